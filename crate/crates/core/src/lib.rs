//! Attribute-based digital identity.
//!
//! * [`model`]: attributes, claims, partial and digital identities, credential
//!   selection.
//! * [`abc`]: CL-style anonymous credentials with selective disclosure.
//! * [`policy`]: the policy language, its decomposition and evaluation.
//! * [`gate`]: domain registry and access decisions over presentations.
//! * [`wallet`] and [`cli`]: holder wallet persistence and the command line.

pub mod abc;
pub mod cli;
pub mod gate;
pub mod model;
pub mod policy;
pub mod wallet;
