//! Metric first-order temporal logic (MFOTL) privacy policies: parsing, monitoring,
//! enforceability analysis and online enforcement.

pub mod lex;
pub mod log;
pub mod monitor;
pub mod policy;
pub mod enforceability;
pub mod enforcer;
pub mod converter;
pub mod corpus;
