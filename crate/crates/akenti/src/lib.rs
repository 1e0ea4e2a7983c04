//! Certificate-based fine-grained authorization for job and resource
//! management.
//!
//! The crate has two halves. The decision side gathers signed policy,
//! use-condition, and attribute certificates from configured directories,
//! evaluates the use-condition constraint language for a subject, and
//! returns granted, conditional, or denied actions — optionally packaged
//! as a short-lived capability certificate. The enforcement side is a
//! simulated grid gatekeeper and job manager that admits users through a
//! grid-mapfile, parses job requests, consults the decision engine
//! through a configurable callout, and drives the job lifecycle.

pub mod cert;
pub mod config;
pub mod constraint;
pub mod engine;
pub mod gram;
pub mod httpio;
pub mod keys;
pub mod lint;
pub mod principal;
pub mod resource;
pub mod scenario;
pub mod service;
pub mod store;
pub mod time;
pub mod wire;

pub use cert::{parse_certificate, serialize_certificate, AkentiCertificate};
pub use constraint::{evaluate, parse_constraint, ConstraintExpr};

pub use principal::{Dn, Principal};
pub use resource::ResourcePath;
