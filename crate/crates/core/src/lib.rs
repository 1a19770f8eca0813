//! Training and verification of reinforcement-learning policies on Markov
//! decision processes written in a PRISM-language subset.
//!
//! The pipeline: [`lang`] parses a model, [`model`] builds it explicitly or
//! simulates it, [`policy`] trains agents against the simulator,
//! [`transforms`] derives permissive and remapped policies, [`induced`]
//! builds the policy-induced chain on the fly and [`checker`] evaluates
//! reachability and expected-reward properties on it. [`benchmarks`]
//! bundles the example environments and [`runs`] records experiments as
//! content-addressed manifests.

pub mod benchmarks;
pub mod checker;
pub mod induced;
pub mod lang;
pub mod model;
pub mod policy;
pub mod runs;
pub mod transforms;
pub mod util;
