//! Level-α active indices and gradient pruning of the sparse component.

use std::cmp::Ordering;

use crate::error::{invalid, Result};
use crate::losses::{check_k_pr, LossModel};
use crate::tensor::{DenseTensor, Shape, SparseTensor};

/// Entries ranked by magnitude, ties broken toward the lower flat index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankKey {
    pub magnitude: f64,
    pub flat: usize,
}

impl RankKey {
    /// Descending rank order: larger magnitude first, then lower index.
    #[inline]
    fn precedes(&self, other: &RankKey) -> Ordering {
        other
            .magnitude
            .total_cmp(&self.magnitude)
            .then(self.flat.cmp(&other.flat))
    }
}

/// Indices passing the per-slice order-statistic thresholds in every mode.
#[derive(Clone, Debug)]
pub struct ActiveIndexSet {
    /// Sorted flat indices.
    pub indices: Vec<usize>,
    pub alpha: f64,
    /// `thresholds[j][i]`: the `⌊α d_j^-⌋`-th ranked entry of slice `i` of
    /// mode `j`, or `None` when the budget is zero.
    pub thresholds: Vec<Vec<Option<RankKey>>>,
}

impl ActiveIndexSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, flat: usize) -> bool {
        self.indices.binary_search(&flat).is_ok()
    }
}

/// `⌊α · n⌋`, tolerant of representation error in `α`.
pub fn slice_budget(alpha: f64, n: usize) -> usize {
    ((alpha * n as f64) + 1e-9).floor() as usize
}

pub fn level_alpha_active_indices(g: &DenseTensor, alpha: f64) -> Result<ActiveIndexSet> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid("alpha", format!("must lie in [0, 1], got {alpha}")));
    }
    let shape = g.shape();
    let data = g.data();
    let mut thresholds = Vec::with_capacity(shape.order());
    let mut empty = false;
    for mode in 0..shape.order() {
        let k = slice_budget(alpha, shape.numel_except(mode)).min(shape.numel_except(mode));
        if k == 0 {
            empty = true;
            thresholds.push(vec![None; shape.dim(mode)]);
        } else {
            thresholds.push(mode_thresholds(data, shape, mode, k));
        }
    }
    let indices = if empty {
        Vec::new()
    } else {
        active_members(data, shape, &thresholds)
    };
    Ok(ActiveIndexSet {
        indices,
        alpha,
        thresholds,
    })
}

fn mode_thresholds(data: &[f64], shape: &Shape, mode: usize, k: usize) -> Vec<Option<RankKey>> {
    let (left, n, right) = shape.split(mode);
    let mut buf: Vec<RankKey> = Vec::with_capacity(left * right);
    (0..n)
        .map(|i| {
            buf.clear();
            for a in 0..left {
                let start = (a * n + i) * right;
                buf.extend((start..start + right).map(|flat| RankKey {
                    magnitude: data[flat].abs(),
                    flat,
                }));
            }
            let (_, kth, _) = buf.select_nth_unstable_by(k - 1, |x, y| x.precedes(y));
            Some(*kth)
        })
        .collect()
}

fn active_members(data: &[f64], shape: &Shape, thresholds: &[Vec<Option<RankKey>>]) -> Vec<usize> {
    let dims = shape.dims();
    let m = dims.len();
    let mut idx = vec![0usize; m];
    let mut out = Vec::new();
    for (flat, &v) in data.iter().enumerate() {
        let key = RankKey {
            magnitude: v.abs(),
            flat,
        };
        let passes = (0..m).all(|j| match &thresholds[j][idx[j]] {
            Some(t) => key.precedes(t) != Ordering::Greater,
            None => false,
        });
        if passes {
            out.push(flat);
        }
        for j in (0..m).rev() {
            idx[j] += 1;
            if idx[j] < dims[j] {
                break;
            }
            idx[j] = 0;
        }
    }
    out
}

/// Gradient pruning: on the active set of `∇L(t_hat)`, the entry value that
/// brings `|l′_ω|` closest to zero within the `k_pr` box.
pub fn gradient_prune(t_hat: &DenseTensor, model: &LossModel, alpha_eff: f64, k_pr: f64) -> Result<SparseTensor> {
    check_k_pr(k_pr)?;
    let g = model.gradient(t_hat)?;
    let active = level_alpha_active_indices(&g, alpha_eff)?;
    let mut indices = Vec::with_capacity(active.len());
    let mut values = Vec::with_capacity(active.len());
    for &flat in &active.indices {
        let s = model.entry_prune_flat(flat, t_hat.data()[flat], k_pr);
        if !s.is_finite() {
            return Err(invalid("k_pr", "an infinite bound leaves an active entry without a finite minimizer"));
        }
        if s != 0.0 {
            indices.push(flat);
            values.push(s);
        }
    }
    Ok(SparseTensor::from_sorted_unchecked(t_hat.shape().clone(), indices, values))
}

/// Keeps entries with `|value| > delta_star`.
pub fn hard_threshold_support(s_hat: &SparseTensor, delta_star: f64) -> SparseTensor {
    s_hat.filter(|_, v| v.abs() > delta_star)
}
