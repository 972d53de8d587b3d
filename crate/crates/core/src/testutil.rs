//! Seeded random fixtures shared by unit tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::tensor::{DenseTensor, Matrix, Shape, TuckerTensor};

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub(crate) fn normal_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub(crate) fn normal_tensor(rng: &mut impl Rng, dims: &[usize]) -> DenseTensor {
    let shape = Shape::new(dims.to_vec()).unwrap();
    let data = (0..shape.numel()).map(|_| rng.sample(StandardNormal)).collect();
    DenseTensor::new(shape, data).unwrap()
}

pub(crate) fn orthonormal(rng: &mut impl Rng, d: usize, r: usize) -> Matrix {
    normal_matrix(rng, d, r).qr().q()
}

pub(crate) fn random_tucker(rng: &mut impl Rng, dims: &[usize], r: &[usize]) -> TuckerTensor {
    let core = normal_tensor(rng, r);
    let factors = dims.iter().zip(r).map(|(&d, &rj)| orthonormal(rng, d, rj)).collect();
    TuckerTensor::new(core, factors).unwrap()
}
