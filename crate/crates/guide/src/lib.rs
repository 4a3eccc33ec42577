//! The chapters of `book/` as doc comments, so `cargo test` runs their snippets.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/policies.md")]
pub mod policies {}
#[doc = include_str!("../../../book/src/monitoring.md")]
pub mod monitoring {}
#[doc = include_str!("../../../book/src/enforceability.md")]
pub mod enforceability {}
#[doc = include_str!("../../../book/src/enforcement.md")]
pub mod enforcement {}
#[doc = include_str!("../../../book/src/protocol.md")]
pub mod protocol {}
#[doc = include_str!("../../../book/src/converter.md")]
pub mod converter {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
