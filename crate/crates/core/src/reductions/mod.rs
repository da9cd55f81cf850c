//! The two hardness constructions, made executable: 2SAT to a falsifying
//! NFA with exact string counting, and a binary CSP unwrapped into a chain
//! with equality constraints along an Eulerian walk.

mod csp;
mod twosat;

pub use csp::{
    eulerian_path, eulerize, unwrap_csp, verify_reduction, BinaryCsp, CspEdge, EulerWalk, ReductionReport, UnwrapResult,
};
pub use twosat::{build_falsifying_nfa, count_sat, count_sat_with_guard, Literal, Nfa, TwoSatFormula, SUBSET_GUARD};
