//! Reality-enforcing voting mechanisms for populations with sybils and
//! passive voters.
//!
//! Every tally, threshold and position is an exact rational ([`rational::Q`]).
//! The [`verifier`] module brute-forces the definitions on small instances and
//! is the ground truth the closed forms in [`guarantees`] are tested against.

pub mod betweenness;
pub mod cli;
pub mod error;
pub mod guarantees;
pub mod montecarlo;
pub mod population;
pub mod proxy;
pub mod rational;
pub mod rules;
pub mod verifier;

pub use error::{Error, Result};
pub use population::{build_profile, Alternative, Ballot, DomainKind, DomainSpec, NonatomicProfile, Profile, Voter, VoterClass};
pub use rational::Q;
pub use rules::{apply, evaluate, BaseRule, Mechanism, Participation, Tally};
