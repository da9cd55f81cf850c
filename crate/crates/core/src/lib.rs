//! Exact inference and exact sampling for first-order Markov sequences under
//! hard global constraints: binary equalities in three tractable topologies,
//! and context-free grammar membership for unambiguous and weakly ambiguous
//! grammars. A brute-force oracle backs every algorithm, and the two hardness
//! constructions (2SAT to falsifying NFA, binary CSP to an unwrapped chain)
//! are executable.

pub mod equality;
pub mod error;
pub mod grammar;
pub mod inside;
pub mod markov;
pub mod oracle;
pub mod reductions;
pub mod weak;

pub use error::{Error, Result};
pub use markov::{Alphabet, Chain, MarkovModel, Matrix, Pinned, StepChain, Word};
