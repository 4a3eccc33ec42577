use mfotl_core::enforceability::Enforceability;
use mfotl_core::enforcer::harness::simulate;
use mfotl_core::enforcer::Session;
use mfotl_core::policy::{parse_signature, typecheck, Formula, Signature};
use mfotl_testkit::campaign::audit;
use mfotl_testkit::gen;
use proptest::prelude::*;

fn session(f: &Formula, sig: &Signature) -> Option<Session> {
    let typed = typecheck(f, sig).unwrap();
    Session::new(typed, sig.clone()).ok()
}

fn partial_signature(c: [bool; 6]) -> Signature {
    let caps = |k: usize| {
        let mut s = vec!["observable"];
        if c[2 * k] {
            s.push("causable");
        }
        if c[2 * k + 1] {
            s.push("suppressable");
        }
        s.join(", ")
    };
    parse_signature(&format!(
        "event p(a: int) {{{}}}\nevent q(a: int, b: string) {{{}}}\nevent r(b: string) {{{}}}",
        caps(0),
        caps(1),
        caps(2)
    ))
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transparent_policies_are_enforced_soundly_and_transparently(
        f in gen::small_policy(),
        seed in any::<u64>(),
    ) {
        let sig = gen::small_signature();
        let Some(s) = session(&f, &sig) else { return Ok(()) };
        prop_assume!(s.report().verdict == Enforceability::Transparent);
        let typed = s.policy().clone();
        let scripts = mfotl_testkit::sample(
            prop_oneof![gen::script(&sig, 3, 10), gen::guided_script(&typed, &sig, 3, 10)],
            8,
            seed,
        );
        for script in scripts {
            let a = audit(&typed, &sig, &script);
            prop_assert!(a.unsound.is_empty(), "{}: {:?}", f, a.unsound);
            prop_assert!(a.opaque.is_empty(), "{}: {:?}", f, a.opaque);
        }
    }

    #[test]
    fn identical_inputs_identical_commands(f in gen::small_policy(), seed in any::<u64>()) {
        let sig = gen::small_signature();
        let Some(s) = session(&f, &sig) else { return Ok(()) };
        let script = mfotl_testkit::sample(gen::guided_script(s.policy(), &sig, 3, 10), 1, seed).next().unwrap();
        let a = simulate(s.clone(), &script).unwrap();
        let b = simulate(s, &script).unwrap();
        prop_assert_eq!(a.transcript, b.transcript);
    }

    #[test]
    fn commands_respect_capabilities(f in gen::small_policy(), c in any::<[bool; 6]>(), seed in any::<u64>()) {
        let sig = partial_signature(c);
        let Some(mut s) = session(&f, &sig) else { return Ok(()) };
        let script = mfotl_testkit::sample(gen::guided_script(s.policy(), &sig, 3, 10), 1, seed).next().unwrap();
        let mut commands = vec![];
        for (ts, events) in &script.steps {
            let r = s.react(*ts, events).unwrap();
            for i in &r.command.suppress {
                prop_assert!(sig.capabilities(&events[*i].name).suppressable, "suppressed {}", events[*i]);
            }
            commands.extend(r.proactive);
            commands.push(r.command);
        }
        commands.extend(s.flush());
        for cmd in &commands {
            for e in &cmd.cause {
                prop_assert!(sig.capabilities(&e.name).causable, "caused {}", e);
            }
            prop_assert!(!cmd.proactive || cmd.suppress.is_empty());
        }
    }
}
