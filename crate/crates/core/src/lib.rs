pub mod bernstein;
pub mod bootstrap;
pub mod cli;
pub mod copula;
pub mod empirical;
pub mod error;
pub mod ndbc;
mod quad;
pub mod rng;
pub mod sample;
pub mod simulation;
pub mod stats;

pub use bernstein::{bernstein_copula, bernstein_partial_u, bernstein_partial_v, bernstein_pmf, BernsteinOrder, EmpiricalBernstein};
pub use copula::{copula_cdf, sample_copula, tau_to_param, CopulaFamily, CopulaSpec};
pub use empirical::{empirical_copula, pseudo_observations, PseudoSample};
pub use error::{Error, Result};
pub use sample::Sample;
pub use stats::{GridSpec, StatisticTriple};
pub use bootstrap::{run_test, run_test_empirical, MultiplierDraw, PValueRule, TestOptions, TestResult};
