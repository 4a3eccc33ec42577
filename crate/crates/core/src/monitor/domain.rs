use std::collections::{BTreeMap, BTreeSet};

use crate::log::Log;
use crate::policy::{Formula, Sort, Value};

/// Assignment of constants to variables.
pub type Valuation = BTreeMap<String, Value>;

/// Finite per-sort sets of constants over which quantifiers range.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActiveDomain {
    strings: Vec<Value>,
    ints: Vec<Value>,
}

impl ActiveDomain {
    /// Every constant in the formula and in the log.
    pub fn new(f: &Formula, log: &Log) -> Self {
        let mut all = f.constants();
        all.extend(log.constants());
        Self::from_values(all)
    }

    pub fn from_values(values: impl IntoIterator<Item = Value>) -> Self {
        let set: BTreeSet<Value> = values.into_iter().collect();
        let (strings, ints) = set.into_iter().partition(|v| v.sort() == Sort::Str);
        ActiveDomain { strings, ints }
    }

    /// A copy enlarged with extra constants.
    pub fn extended(&self, extra: impl IntoIterator<Item = Value>) -> Self {
        Self::from_values(
            self.strings
                .iter()
                .chain(self.ints.iter())
                .cloned()
                .chain(extra),
        )
    }

    pub fn of(&self, sort: Sort) -> &[Value] {
        match sort {
            Sort::Str => &self.strings,
            Sort::Int => &self.ints,
        }
    }

    pub fn contains(&self, v: &Value) -> bool {
        self.of(v.sort()).binary_search(v).is_ok()
    }

    pub fn values(&self) -> impl Iterator<Item = &Value> {
        self.strings.iter().chain(self.ints.iter())
    }
}

/// Cartesian product of the domains of `sorts`, in lexicographic order.
pub(crate) fn tuples(dom: &ActiveDomain, sorts: &[Sort]) -> Vec<Vec<Value>> {
    let mut out = vec![Vec::with_capacity(sorts.len())];
    for &s in sorts {
        let vals = dom.of(s);
        let mut next = Vec::with_capacity(out.len() * vals.len());
        for prefix in &out {
            for v in vals {
                let mut t = prefix.clone();
                t.push(v.clone());
                next.push(t);
            }
        }
        out = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partitions_by_sort() {
        let d = ActiveDomain::from_values([Value::str("b"), Value::Int(3), Value::str("a")]);
        assert_eq!(d.of(Sort::Str), &[Value::str("a"), Value::str("b")]);
        assert_eq!(d.of(Sort::Int), &[Value::Int(3)]);
        assert!(d.contains(&Value::Int(3)));
        assert_eq!(tuples(&d, &[Sort::Str, Sort::Int]).len(), 2);
        assert_eq!(tuples(&d, &[]), vec![Vec::<Value>::new()]);
    }
}
