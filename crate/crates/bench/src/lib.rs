//! Shared fixtures for the benchmarks.

use lrsparse_core::losses::LossModel;
use lrsparse_core::solver::SolverConfig;
use lrsparse_core::synth::{generate, InstanceParams, SpectrumTarget};
use lrsparse_core::tensor::hosvd;
use lrsparse_core::TuckerTensor;

/// A noisy Gaussian instance of side `d` and rank `(r, r, r)` with 1%
/// outliers, a starting point and a one-step solver configuration.
pub struct Fixture {
    pub model: LossModel,
    pub start: TuckerTensor,
    pub config: SolverConfig,
}

pub fn gaussian_fixture(d: usize, r: usize) -> Fixture {
    let params = InstanceParams {
        alpha: 0.01,
        target: SpectrumTarget::MaxAbs { value: 1.0 },
        noise: lrsparse_core::synth::NoiseLaw::Gaussian { sigma: 0.01 },
        ..InstanceParams::gaussian(vec![d; 3], vec![r; 3], 0)
    };
    let inst = generate(&params).expect("valid benchmark instance");
    let model = inst.model().expect("Gaussian model");
    let start = hosvd(&inst.observation, &[r; 3]).expect("rank fits the shape");
    let config = SolverConfig {
        alpha: 0.01,
        l_max: 1,
        rel_tol: 0.0,
        ..SolverConfig::new(&model, vec![r; 3], 1.0)
    };
    Fixture { model, start, config }
}
