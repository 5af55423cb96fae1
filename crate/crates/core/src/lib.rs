//! Blind annotation for privacy-preserving entity resolution.
//!
//! Domain oracles on each side describe their own records as small Boolean
//! programs ([`dsl`]). The programs are evaluated obliviously over the other
//! party's encrypted records ([`interp`], [`crypto`]); a coordinator decrypts
//! only the Boolean answers, tracks agreement across rounds and emits the
//! ground-truth labels ([`protocol`]). [`bench`] ingests benchmark datasets,
//! drives scripted annotators and scores the result.

pub mod bench;
pub mod crypto;
pub mod dsl;
pub mod interp;
pub mod party;
pub mod protocol;
pub mod seed;

pub use party::Party;
