//! Geometry of the fixed-Tucker-rank manifold.
//!
//! At a point `C · [[U_1, ..., U_m]]` the tangent space consists of
//! `D ×_i U_i + Σ_i C ×_{j≠i} U_j ×_i W_i` with `W_iᵀU_i = 0`.

use crate::error::{Error, Result};
use crate::tensor::{hosvd, pseudo_inverse, DenseTensor, Matrix, Shape, TuckerTensor};

/// Singular values of a core unfolding below this fraction of the largest
/// make the tangent projection ill-defined.
pub const CORE_PINV_CUTOFF: f64 = 1e-12;

/// A tangent vector at `base`, stored in its low-rank parametrization.
#[derive(Clone, Debug)]
pub struct TangentVector {
    pub base: TuckerTensor,
    /// `D`, of shape `(r_1, ..., r_m)`.
    pub core_part: DenseTensor,
    /// `W_j`, each `d_j × r_j` with `W_jᵀU_j = 0`.
    pub mode_parts: Vec<Matrix>,
}

impl TangentVector {
    /// Core and factors of `a · base + b · self` in Tucker form with
    /// factors `[U_i | W_i]` and a core of shape `2r`.
    pub fn factored(&self, a: f64, b: f64) -> (DenseTensor, Vec<Matrix>) {
        let base_core = self.base.core();
        let r = base_core.dims().to_vec();
        let m = r.len();
        let doubled = Shape::new(r.iter().map(|x| 2 * x).collect::<Vec<_>>()).expect("doubled ranks are valid");
        let mut core = DenseTensor::zeros(doubled.clone());

        // Block (0, ..., 0) holds a·C + b·D; block e_i holds b·C.
        let block0: Vec<f64> = base_core
            .data()
            .iter()
            .zip(self.core_part.data())
            .map(|(c, d)| a * c + b * d)
            .collect();
        scatter_block(&mut core, &doubled, &r, None, &block0);
        if b != 0.0 {
            let scaled: Vec<f64> = base_core.data().iter().map(|c| b * c).collect();
            for i in 0..m {
                scatter_block(&mut core, &doubled, &r, Some(i), &scaled);
            }
        }

        let factors = self
            .base
            .factors()
            .iter()
            .zip(&self.mode_parts)
            .map(|(u, w)| {
                let mut f = Matrix::zeros(u.nrows(), 2 * u.ncols());
                f.columns_mut(0, u.ncols()).copy_from(u);
                f.columns_mut(u.ncols(), u.ncols()).copy_from(w);
                f
            })
            .collect();
        (core, factors)
    }

    pub fn to_dense(&self) -> DenseTensor {
        let (core, factors) = self.factored(0.0, 1.0);
        let refs: Vec<Option<&Matrix>> = factors.iter().map(Some).collect();
        core.multi_mode_product_unchecked(&refs)
    }

    /// Largest `‖W_jᵀU_j‖_F` over modes.
    pub fn gauge_defect(&self) -> f64 {
        self.base
            .factors()
            .iter()
            .zip(&self.mode_parts)
            .map(|(u, w)| (w.transpose() * u).norm())
            .fold(0.0, f64::max)
    }
}

/// Copies a block of shape `r` into the `2r` core, offset by `r_i` in mode
/// `shifted` (if any).
fn scatter_block(core: &mut DenseTensor, doubled: &Shape, r: &[usize], shifted: Option<usize>, block: &[f64]) {
    let block_shape = Shape::new(r.to_vec()).expect("ranks form a valid shape");
    let mut idx = vec![0usize; r.len()];
    let data = core.data_mut();
    for (flat, &v) in block.iter().enumerate() {
        let mut rem = flat;
        for (slot, &d) in idx.iter_mut().zip(block_shape.dims()).rev() {
            *slot = rem % d;
            rem /= d;
        }
        if let Some(i) = shifted {
            idx[i] += r[i];
        }
        let target = doubled.ravel(&idx).expect("block index inside the doubled core");
        data[target] = v;
    }
}

/// `(I − UUᵀ) x`
fn complement_project(u: &Matrix, x: &Matrix) -> Matrix {
    x - u * (u.transpose() * x)
}

/// Orthogonal projection of `g` onto the tangent space at `base`.
pub fn tangent_project(base: &TuckerTensor, g: &DenseTensor) -> Result<TangentVector> {
    if g.shape() != base.shape() {
        return Err(Error::DimensionMismatch {
            expected: base.shape().to_string(),
            got: g.shape().to_string(),
        });
    }
    let factors: Vec<&Matrix> = base.factors().iter().collect();
    let core = base.core();
    let mut mode_parts = Vec::with_capacity(factors.len());
    for (i, u) in factors.iter().enumerate() {
        let core_unfolded = core.matricize(i)?;
        let (pinv, ratio) = pseudo_inverse(&core_unfolded, CORE_PINV_CUTOFF);
        if !(ratio >= CORE_PINV_CUTOFF) {
            return Err(Error::RankDeficientCore { mode: i, ratio });
        }
        let partial = g.contract_all(&factors, Some(i)).matricize(i)?;
        let w = complement_project(u, &(partial * pinv));
        mode_parts.push(complement_project(u, &w));
    }
    let core_part = g.contract_all(&factors, None);
    Ok(TangentVector {
        base: base.clone(),
        core_part,
        mode_parts,
    })
}

/// Densifies a tangent vector.
pub fn tangent_to_dense(v: &TangentVector) -> DenseTensor {
    v.to_dense()
}

/// Clips every entry with `|w| > c` to `c · sign(w)`.
pub fn entrywise_truncate(w: &DenseTensor, c: f64) -> DenseTensor {
    debug_assert!(c >= 0.0);
    w.map(|x| if x.abs() > c { c.copysign(x) } else { x })
}

/// `Trunc_τ`, identical to [`entrywise_truncate`].
pub fn trunc(a: &DenseTensor, tau: f64) -> DenseTensor {
    entrywise_truncate(a, tau)
}

/// `hosvd(entrywise_truncate(w, ζ/2), r)`; `ζ = ∞` skips the truncation.
pub fn trim(w: &DenseTensor, zeta: f64, r: &[usize]) -> Result<TuckerTensor> {
    if zeta.is_nan() || zeta < 0.0 {
        return Err(crate::error::invalid("zeta", format!("must be non-negative, got {zeta}")));
    }
    if zeta.is_infinite() || w.max_abs() <= zeta / 2.0 {
        hosvd(w, r)
    } else {
        hosvd(&entrywise_truncate(w, zeta / 2.0), r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::singular_values;
    use crate::testutil::{normal_tensor, random_tucker, rng};

    #[test]
    fn point_lies_in_its_own_tangent_space() {
        let base = random_tucker(&mut rng(10), &[6, 5, 7], &[2, 2, 3]);
        let dense = base.to_dense();
        let v = tangent_project(&base, &dense).unwrap();
        assert!(v.to_dense().distance(&dense).unwrap() < 1e-12 * dense.frobenius_norm());
        assert!(v.gauge_defect() < 1e-12);
    }

    #[test]
    fn complement_directions_project_to_zero() {
        let mut g = rng(11);
        let base = random_tucker(&mut g, &[6, 6, 6], &[2, 2, 2]);
        // g ×_j (I − U_jU_jᵀ) for every mode has no tangent component at second order or below.
        let x = normal_tensor(&mut g, &[6, 6, 6]);
        let comps: Vec<Matrix> = base
            .factors()
            .iter()
            .map(|u| Matrix::identity(6, 6) - u * u.transpose())
            .collect();
        let refs: Vec<Option<&Matrix>> = comps.iter().map(Some).collect();
        let orth = x.multi_mode_product(&refs).unwrap();
        let v = tangent_project(&base, &orth).unwrap();
        assert!(v.to_dense().frobenius_norm() < 1e-10 * orth.frobenius_norm());
    }

    #[test]
    fn zero_and_core_only_parts() {
        let base = random_tucker(&mut rng(12), &[5, 4, 6], &[2, 2, 2]);
        let zero = TangentVector {
            base: base.clone(),
            core_part: DenseTensor::zeros(base.core().shape().clone()),
            mode_parts: base.factors().iter().map(|u| Matrix::zeros(u.nrows(), u.ncols())).collect(),
        };
        assert_eq!(tangent_to_dense(&zero).max_abs(), 0.0);
        let d_only = TangentVector {
            core_part: base.core().clone(),
            ..zero
        };
        assert!(tangent_to_dense(&d_only).distance(&base.to_dense()).unwrap() < 1e-13);
    }

    #[test]
    fn densified_tangent_has_rank_at_most_2r() {
        let mut g = rng(13);
        let base = random_tucker(&mut g, &[9, 8, 10], &[2, 3, 2]);
        let v = tangent_project(&base, &normal_tensor(&mut g, &[9, 8, 10])).unwrap();
        let dense = v.to_dense();
        for (mode, &r) in [2, 3, 2].iter().enumerate() {
            let s = singular_values(&dense.matricize(mode).unwrap());
            assert!(s[2 * r] < 1e-9 * s[0], "mode {mode}: {s:?}");
        }
    }

    #[test]
    fn rank_deficient_core_is_reported() {
        let mut g = rng(14);
        let mut base = random_tucker(&mut g, &[5, 5, 5], &[2, 2, 2]);
        let core = DenseTensor::from_fn(base.core().shape().clone(), |i| if i[0] == 0 { 1.0 } else { 0.0 }).unwrap();
        base = TuckerTensor::new(core, base.factors().to_vec()).unwrap();
        let err = tangent_project(&base, &normal_tensor(&mut g, &[5, 5, 5])).unwrap_err();
        assert!(matches!(err, Error::RankDeficientCore { mode: 0, .. }));
    }

    #[test]
    fn truncation_sign_rule() {
        let shape = Shape::new(vec![3, 1]).unwrap();
        let w = DenseTensor::new(shape, vec![-3.0, 0.5, 2.0]).unwrap();
        assert_eq!(entrywise_truncate(&w, 1.0).data(), &[-1.0, 0.5, 1.0]);
        assert_eq!(entrywise_truncate(&w, 0.0).max_abs(), 0.0);
        assert_eq!(entrywise_truncate(&w, 3.0), w);
        assert_eq!(trunc(&w, 3.0), w);
    }

    #[test]
    fn trim_with_infinite_zeta_is_hosvd() {
        let w = normal_tensor(&mut rng(15), &[5, 6, 4]);
        let r = [2, 2, 2];
        assert_eq!(trim(&w, f64::INFINITY, &r).unwrap(), hosvd(&w, &r).unwrap());
        let exact = random_tucker(&mut rng(16), &[5, 6, 4], &r).to_dense();
        let zeta = 2.0 * exact.max_abs();
        assert!(trim(&exact, zeta, &r).unwrap().to_dense().distance(&exact).unwrap() < 1e-12);
        assert!(trim(&w, -1.0, &r).is_err());
    }
}
