//! A simulator, enumerator, and verification suite for a toy theory of
//! epistemically restricted classical systems.
//!
//! The theory describes systems whose complete physical configuration (the
//! *ontic state*) is one of `4^N` discrete labels for `N` elementary
//! systems, while an observer's knowledge (the *epistemic state*) is a
//! subset of those labels constrained by a balance principle: in a state of
//! maximal knowledge, exactly half of a minimal set of yes/no questions
//! about the configuration may be answered. From that single restriction a
//! surprising amount of qubit-like structure emerges, and this crate builds
//! all of it mechanically:
//!
//! - [`ontic`] — ontic spaces, epistemic states as bit sets, and the set
//!   algebra on them (marginals, conjunction, fidelity, disjointness,
//!   convex and coherent combination).
//! - [`validity`] — the balance principle as an operational predicate and
//!   exhaustive catalogs of every valid state for 1–3 systems.
//! - [`transforms`] — permutations of the ontic space, the group of allowed
//!   (validity-preserving) transformations, and rotation/reflection
//!   classification for a single system.
//! - [`measurements`] — measurements as partitions into valid states,
//!   update rules, and mutually unbiased partitioning searches.
//! - [`sim`] — a seeded ontic-level Monte Carlo engine with per-trial
//!   deterministic randomness.
//! - [`protocols`] — self-asserting reproductions of the named phenomena:
//!   interference, steering, no cloning, dense coding, teleportation, and
//!   the rest.
//! - [`quantum`] — a minimal ≤3-qubit state-vector reference used to audit
//!   the analogy between the toy theory and qubit quantum mechanics.
//! - [`dsl`] — a small text language for scripting experiments, with an
//!   exact (rational-arithmetic) epistemic evaluator and a Monte Carlo
//!   evaluator.

pub mod dsl;
pub mod measurements;
pub mod ontic;
pub mod protocols;
pub mod quantum;
pub mod sim;
pub mod transforms;
pub mod validity;

pub use ontic::{CellSet, CoherentOp, EpistemicState, OnticIndex, SystemShape};
pub use validity::{Catalog, ValidityChecker};
