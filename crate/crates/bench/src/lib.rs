//! Shared fixtures for the benchmarks.

use viscowave_core::kernels::RelaxationKernel;
use viscowave_core::problem::{HistoryChoice, InitialData, ProblemConfig};

/// A smooth damped problem on `n` elements with the given memory kernel.
pub fn damped_problem(kernel: RelaxationKernel, history: HistoryChoice, n: usize) -> ProblemConfig {
    ProblemConfig {
        n_elems: n,
        dt: 1e-3,
        t_final: 2.0,
        b: 0.2,
        alpha: 0.05,
        sigma: 0.05,
        gamma: 0.1,
        kernel,
        history,
        u0: InitialData::expr("0.5*sin(pi*x/2)"),
        u1: InitialData::expr("0.2*x"),
        ..Default::default()
    }
}
