use lrsparse_core::losses::{Link, LossModel};
use lrsparse_core::manifold::{entrywise_truncate, tangent_project, trim};
use lrsparse_core::pruning::{gradient_prune, level_alpha_active_indices, slice_budget};
use lrsparse_core::tensor::io::{read_lrst, read_sparse_csv, write_lrst, write_sparse_csv};
use lrsparse_core::tensor::{hosvd, spikiness};
use lrsparse_core::{DenseTensor, Matrix, Shape, SparseTensor};
use proptest::prelude::*;

fn tensor_strategy(min_dim: usize, max_dim: usize) -> impl Strategy<Value = DenseTensor> {
    prop::collection::vec(min_dim..=max_dim, 3).prop_flat_map(|dims| {
        let n: usize = dims.iter().product();
        prop::collection::vec(-5.0f64..5.0, n)
            .prop_map(move |data| DenseTensor::new(Shape::new(dims.clone()).unwrap(), data).unwrap())
    })
}

/// Two tensors of one random shape.
fn pair_strategy(min_dim: usize, max_dim: usize) -> impl Strategy<Value = (DenseTensor, DenseTensor)> {
    prop::collection::vec(min_dim..=max_dim, 3).prop_flat_map(|dims| {
        let n: usize = dims.iter().product();
        (prop::collection::vec(-5.0f64..5.0, n), prop::collection::vec(-5.0f64..5.0, n)).prop_map(move |(a, b)| {
            let shape = Shape::new(dims.clone()).unwrap();
            (DenseTensor::new(shape.clone(), a).unwrap(), DenseTensor::new(shape, b).unwrap())
        })
    })
}

/// An exact Tucker-rank `(r, r, r)` tensor built from a random core and factors.
fn lowrank_strategy() -> impl Strategy<Value = (DenseTensor, Vec<usize>)> {
    (prop::collection::vec(3usize..=6, 3), 1usize..=2).prop_flat_map(|(dims, r)| {
        let core_len = r * r * r;
        let factor_len: usize = dims.iter().map(|d| d * r).sum();
        (
            prop::collection::vec(-2.0f64..2.0, core_len),
            prop::collection::vec(-2.0f64..2.0, factor_len),
        )
            .prop_map(move |(core, fac)| {
                let core = DenseTensor::new(Shape::new(vec![r; 3]).unwrap(), core).unwrap();
                let mut offset = 0;
                let mats: Vec<Matrix> = dims
                    .iter()
                    .map(|&d| {
                        let m = Matrix::from_column_slice(d, r, &fac[offset..offset + d * r]);
                        offset += d * r;
                        m
                    })
                    .collect();
                let refs: Vec<Option<&Matrix>> = mats.iter().map(Some).collect();
                (core.multi_mode_product(&refs).unwrap(), vec![r; 3])
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unfolding_round_trips(t in tensor_strategy(1, 5), mode in 0usize..3) {
        let m = t.matricize(mode).unwrap();
        prop_assert_eq!(m.nrows(), t.dims()[mode]);
        let back = DenseTensor::tensorize(&m, t.shape(), mode).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn hosvd_recovers_exact_rank_inputs((t, r) in lowrank_strategy()) {
        prop_assume!(t.frobenius_norm() > 1e-6);
        let h = hosvd(&t, &r).unwrap();
        let err = h.to_dense().distance(&t).unwrap() / t.frobenius_norm();
        // A nearly singular random core loses a few digits.
        prop_assert!(err < 1e-8, "relative error {}", err);
        for u in h.factors() {
            let gram = u.transpose() * u;
            let defect = (gram - Matrix::identity(u.ncols(), u.ncols())).abs().max();
            prop_assert!(defect < 1e-10);
        }
    }

    #[test]
    fn tangent_projection_is_an_orthogonal_projector((base, g) in pair_strategy(3, 5)) {
        let b = hosvd(&base, &[2, 2, 2]).unwrap();
        let Ok(v) = tangent_project(&b, &g) else {
            // Rank-deficient cores are reported, not projected.
            return Ok(());
        };
        let p = v.to_dense();
        let pp = tangent_project(&b, &p).unwrap().to_dense();
        let scale = g.frobenius_norm().max(1e-12);
        prop_assert!(pp.distance(&p).unwrap() <= 1e-8 * scale);
        prop_assert!(p.frobenius_norm() <= g.frobenius_norm() * (1.0 + 1e-10));
        let residual = g.sub(&p).unwrap();
        prop_assert!(residual.inner(&p).unwrap().abs() <= 1e-8 * scale * scale);
    }

    #[test]
    fn active_set_respects_slice_budgets(t in tensor_strategy(2, 6), alpha in 0.0f64..=1.0) {
        let active = level_alpha_active_indices(&t, alpha).unwrap();
        let shape = t.shape();
        for mode in 0..3 {
            let budget = slice_budget(alpha, shape.numel_except(mode));
            let mut counts = vec![0usize; shape.dim(mode)];
            for &i in &active.indices {
                counts[shape.unravel(i)[mode]] += 1;
            }
            // Ties at the threshold are broken by index, so counts are exact bounds.
            prop_assert!(counts.iter().all(|&c| c <= budget));
        }
        prop_assert!(active.indices.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn slice_sparse_tensors_lie_in_their_active_set(t in tensor_strategy(3, 6), keep in 0.0f64..0.5) {
        // A pseudo-random subset; its largest slice fraction puts it in S_alpha.
        let shape = t.shape().clone();
        let mask = t.map(|v| if (v * 7919.0).fract().abs() < keep { v } else { 0.0 });
        let s = SparseTensor::from_flat(
            shape.clone(),
            mask.data().iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| (i, *v)).collect(),
        ).unwrap();
        let alpha = s.max_slice_fraction();
        let active = level_alpha_active_indices(&s.to_dense(), alpha).unwrap();
        for i in s.flat_indices() {
            prop_assert!(active.contains(*i));
        }
    }

    #[test]
    fn pruning_stays_within_slice_budgets(a in tensor_strategy(3, 6), alpha in 0.0f64..0.5) {
        let model = LossModel::gaussian(a.clone());
        let t_hat = DenseTensor::zeros(a.shape().clone());
        let s = gradient_prune(&t_hat, &model, alpha, f64::INFINITY).unwrap();
        for mode in 0..3 {
            let cap = (alpha * a.shape().numel_except(mode) as f64).ceil() as usize;
            prop_assert!(s.slice_counts(mode).unwrap().iter().all(|&c| c <= cap));
        }
        // Gaussian pruning with an unbounded box matches the observation on the support.
        for (i, v) in s.iter_flat() {
            prop_assert!((v - a.data()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn bernoulli_prune_minimizes_the_entry_gradient(
        bit in 0u8..2, t in -3.0f64..3.0, k_pr in 0.1f64..3.0, sigma in 0.3f64..3.0,
    ) {
        let shape = Shape::new(vec![1, 1, 1]).unwrap();
        let a = DenseTensor::filled(shape, bit as f64);
        for link in [Link::logistic(sigma).unwrap(), Link::probit(sigma).unwrap()] {
            let model = LossModel::bernoulli(a.clone(), link).unwrap();
            let s = model.entry_prune(&[0, 0, 0], t, k_pr).unwrap();
            prop_assert!((t + s).abs() <= k_pr + 1e-12);
            let best = model.entry_gradient(&[0, 0, 0], t + s).unwrap().abs();
            for k in 0..=200 {
                let x = -k_pr + 2.0 * k_pr * k as f64 / 200.0;
                prop_assert!(best <= model.entry_gradient(&[0, 0, 0], x).unwrap().abs() + 1e-12);
            }
        }
    }

    #[test]
    fn trimming_bounds_entries(t in tensor_strategy(3, 5), c in 0.01f64..3.0) {
        let clipped = entrywise_truncate(&t, c);
        prop_assert!(clipped.max_abs() <= c);
        let h = trim(&t, c, &[1, 1, 1]).unwrap();
        prop_assert_eq!(h.ranks(), vec![1, 1, 1]);
    }

    #[test]
    fn spikiness_is_at_least_one(t in tensor_strategy(1, 5)) {
        prop_assume!(t.frobenius_norm() > 0.0);
        prop_assert!(spikiness(&t).unwrap() >= 1.0 - 1e-12);
    }

    #[test]
    fn files_round_trip(t in tensor_strategy(1, 4)) {
        let mut buf = Vec::new();
        write_lrst(&t, &mut buf).unwrap();
        prop_assert_eq!(read_lrst(buf.as_slice()).unwrap(), t.clone());
        let s = SparseTensor::from_flat(
            t.shape().clone(),
            t.data().iter().enumerate().filter(|(_, v)| v.abs() > 2.5).map(|(i, v)| (i, *v)).collect(),
        ).unwrap();
        let mut csv = Vec::new();
        write_sparse_csv(&s, &mut csv).unwrap();
        prop_assert_eq!(read_sparse_csv(csv.as_slice(), t.shape()).unwrap(), s);
    }

    #[test]
    fn gaussian_gradient_is_monotone_with_unit_constants((a, x) in pair_strategy(2, 4)) {
        let model = LossModel::gaussian(a.clone());
        let z = DenseTensor::zeros(a.shape().clone());
        let dx = x.sub(&z).unwrap();
        let dg = model.gradient(&x).unwrap().sub(&model.gradient(&z).unwrap()).unwrap();
        let lhs = dx.inner(&dg).unwrap();
        let rhs = dx.frobenius_norm().powi(2);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.max(1.0));
    }

    #[test]
    fn poisson_curvature_within_bounds(y in 0u32..20, intensity in 0.5f64..20.0, zeta in 0.1f64..3.0, u in -1.0f64..1.0) {
        let shape = Shape::new(vec![1, 1, 1]).unwrap();
        let model = LossModel::poisson(DenseTensor::filled(shape, y as f64), intensity).unwrap();
        let x = u * zeta;
        let h = 1e-4;
        let g = |v: f64| model.entry_gradient(&[0, 0, 0], v).unwrap();
        let curvature = (g(x + h) - g(x - h)) / (2.0 * h);
        let (lo, hi) = model.curvature_bounds(zeta);
        prop_assert!(curvature >= lo * (1.0 - 1e-6) && curvature <= hi * (1.0 + 1e-6));
    }
}
