//! The density estimate itself: for each grid point w, average the
//! boundary-corrected kernel over all present pairs,
//! `f̂(w) = (1/N_present) Σ_{i<j present} k_h(W_ij, w)`.
//!
//! On a complete network `N_present = n(n-1)/2` and this is the usual dyadic
//! pair average; with missing edges it estimates the edge density conditional
//! on presence, and the present share is carried in the result's metadata.
//! The weighted variant multiplies each pair's kernel value by the product of
//! its endpoints' node weights and shares the same summation order, so unit
//! weights reproduce the plain estimate bit for bit.

use crate::data::DyadicDataset;
use crate::error::{Error, Result};
use crate::kernels::{BoundaryKernel, KernelFamily, KernelSpec};
use crate::numeric::trapezoid;
use crate::par;

/// Evaluation points in a fixed estimation domain.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationGrid {
    domain: (f64, f64),
    points: Vec<f64>,
}

impl EvaluationGrid {
    /// `d` equally spaced points over the domain, endpoints included
    /// (the single point sits at the midpoint when d = 1).
    pub fn equally_spaced(domain: (f64, f64), d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Input("grid needs at least one point".into()));
        }
        let (a, b) = domain;
        let points = if d == 1 {
            vec![0.5 * (a + b)]
        } else {
            (0..d)
                .map(|m| a + (b - a) * m as f64 / (d - 1) as f64)
                .collect()
        };
        Self::from_points(domain, points)
    }

    /// Explicit points; must be finite, strictly increasing, inside the domain.
    pub fn from_points(domain: (f64, f64), points: Vec<f64>) -> Result<Self> {
        if !(domain.0.is_finite() && domain.1.is_finite() && domain.0 < domain.1) {
            return Err(Error::Input(format!(
                "domain must be a finite interval, got [{}, {}]",
                domain.0, domain.1
            )));
        }
        if points.is_empty() {
            return Err(Error::Input("grid needs at least one point".into()));
        }
        for w in &points {
            if !w.is_finite() || *w < domain.0 || *w > domain.1 {
                return Err(Error::Input(format!("grid point {w} outside domain")));
            }
        }
        if points.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::Input("grid points must be strictly increasing".into()));
        }
        Ok(Self { domain, points })
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Riemann step: mean gap between points, or the domain width for d = 1.
    pub fn spacing(&self) -> f64 {
        let d = self.points.len();
        if d == 1 {
            self.domain.1 - self.domain.0
        } else {
            (self.points[d - 1] - self.points[0]) / (d - 1) as f64
        }
    }
}

/// A density estimate on a grid, with the settings that produced it.
#[derive(Debug, Clone)]
pub struct DensityEstimate {
    pub grid: EvaluationGrid,
    pub values: Vec<f64>,
    pub n_nodes: usize,
    pub n_present: usize,
    pub n_pairs_total: usize,
    /// Present pairs over total pairs; 1.0 on a complete network. The
    /// unconditional edge law is this weight on the estimated density plus
    /// the complementary point mass on "missing".
    pub present_share: f64,
    pub family: KernelFamily,
    pub order: usize,
    pub bandwidth: f64,
}

impl DensityEstimate {
    /// Trapezoid integral of the curve over the grid span; a plausibility
    /// diagnostic that should sit near 1 when the grid covers the support.
    pub fn integral(&self) -> f64 {
        trapezoid(self.grid.points(), &self.values)
    }
}

fn validate(dataset: &DyadicDataset, spec: &KernelSpec, grid: &EvaluationGrid) -> Result<usize> {
    let (a, b) = spec.domain();
    let (ga, gb) = grid.domain();
    if ga < a || gb > b {
        return Err(Error::Input(format!(
            "grid domain [{ga}, {gb}] exceeds kernel domain [{a}, {b}]"
        )));
    }
    let n_present = dataset.n_present();
    if n_present == 0 {
        return Err(Error::DegenerateInput("no present pairs".into()));
    }
    Ok(n_present)
}

/// Sum of (optionally weighted) kernel evaluations over present pairs in
/// fixed row-major pair order.
pub(crate) fn pair_kernel_sum(
    dataset: &DyadicDataset,
    weights: Option<&[f64]>,
    kernel: &BoundaryKernel,
) -> f64 {
    let n = dataset.n();
    let (values, present) = dataset.raw();
    let mut acc = 0.0;
    let mut idx = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            if present[idx] {
                let k = kernel.eval(values[idx]);
                acc += match weights {
                    Some(w) => w[i] * w[j] * k,
                    None => k,
                };
            }
            idx += 1;
        }
    }
    acc
}

fn estimate_impl(
    dataset: &DyadicDataset,
    weights: Option<&[f64]>,
    spec: &KernelSpec,
    grid: &EvaluationGrid,
) -> Result<DensityEstimate> {
    let n_present = validate(dataset, spec, grid)?;
    if let Some(w) = weights {
        if w.len() != dataset.n() {
            return Err(Error::Input(format!(
                "{} node weights for {} nodes",
                w.len(),
                dataset.n()
            )));
        }
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Input("node weights must be finite and non-negative".into()));
        }
    }
    let kernels = spec.kernels_on_grid(grid.points())?;
    let inv = 1.0 / n_present as f64;
    let values = par::map_indexed(kernels.len(), |m| {
        pair_kernel_sum(dataset, weights, &kernels[m]) * inv
    });
    Ok(DensityEstimate {
        grid: grid.clone(),
        values,
        n_nodes: dataset.n(),
        n_present,
        n_pairs_total: dataset.n_pairs_total(),
        present_share: dataset.present_share(),
        family: spec.family(),
        order: spec.order(),
        bandwidth: spec.bandwidth(),
    })
}

/// Pair-averaged kernel density estimate on the grid.
pub fn fhat(
    dataset: &DyadicDataset,
    spec: &KernelSpec,
    grid: &EvaluationGrid,
) -> Result<DensityEstimate> {
    estimate_impl(dataset, None, spec, grid)
}

/// Node-weighted estimate: every pair's kernel value is scaled by
/// `weights[i] * weights[j]`, with the same present-pair normalization.
pub fn weighted_fhat(
    dataset: &DyadicDataset,
    weights: &[f64],
    spec: &KernelSpec,
    grid: &EvaluationGrid,
) -> Result<DensityEstimate> {
    estimate_impl(dataset, Some(weights), spec, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::EdgeRecord;
    use rand::Rng;

    const DOMAIN: (f64, f64) = (-2.0, 2.0);

    fn spec(h: f64) -> KernelSpec {
        KernelSpec::new(KernelFamily::Epanechnikov, 2, h, DOMAIN).unwrap()
    }

    fn random_complete(n: usize, seed: u64) -> DyadicDataset {
        let mut rng = crate::numeric::substream_rng(seed, 0);
        let m = n * (n - 1) / 2;
        let values = (0..m).map(|_| rng.gen_range(-1.8..1.8)).collect();
        DyadicDataset::complete(n, values).unwrap()
    }

    #[test]
    fn grid_shapes() {
        let g = EvaluationGrid::equally_spaced(DOMAIN, 5).unwrap();
        assert_eq!(g.points(), &[-2.0, -1.0, 0.0, 1.0, 2.0]);
        assert_eq!(g.spacing(), 1.0);
        let g1 = EvaluationGrid::equally_spaced(DOMAIN, 1).unwrap();
        assert_eq!(g1.points(), &[0.0]);
        assert_eq!(g1.spacing(), 4.0);
        assert!(EvaluationGrid::equally_spaced(DOMAIN, 0).is_err());
        assert!(EvaluationGrid::from_points(DOMAIN, vec![0.0, 0.0]).is_err());
        assert!(EvaluationGrid::from_points(DOMAIN, vec![-3.0]).is_err());
    }

    #[test]
    fn matches_direct_average_small_case() {
        let ds = DyadicDataset::complete(3, vec![0.1, -0.4, 0.7]).unwrap();
        let sp = spec(0.6);
        let grid = EvaluationGrid::from_points(DOMAIN, vec![0.0, 0.5]).unwrap();
        let est = fhat(&ds, &sp, &grid).unwrap();
        for (m, &w) in grid.points().iter().enumerate() {
            let k = sp.boundary_kernel(w).unwrap();
            let direct = (k.eval(0.1) + k.eval(-0.4) + k.eval(0.7)) / 3.0;
            assert!((est.values[m] - direct).abs() < 1e-15);
        }
        assert_eq!(est.present_share, 1.0);
        assert_eq!(est.n_present, 3);
    }

    #[test]
    fn missing_edges_divide_by_present_count() {
        let ds = DyadicDataset::from_edge_list(&[
            EdgeRecord { i: "a".into(), j: "b".into(), value: Some(0.1) },
            EdgeRecord { i: "a".into(), j: "c".into(), value: None },
            EdgeRecord { i: "b".into(), j: "c".into(), value: Some(-0.3) },
        ])
        .unwrap();
        let sp = spec(0.6);
        let grid = EvaluationGrid::from_points(DOMAIN, vec![0.0]).unwrap();
        let est = fhat(&ds, &sp, &grid).unwrap();
        let k = sp.boundary_kernel(0.0).unwrap();
        let direct = (k.eval(0.1) + k.eval(-0.3)) / 2.0;
        assert!((est.values[0] - direct).abs() < 1e-15);
        assert!((est.present_share - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn unit_weights_reproduce_fhat_bitwise() {
        let ds = random_complete(9, 5);
        let sp = spec(0.4);
        let grid = EvaluationGrid::equally_spaced(DOMAIN, 17).unwrap();
        let plain = fhat(&ds, &sp, &grid).unwrap();
        let weighted = weighted_fhat(&ds, &vec![1.0; 9], &sp, &grid).unwrap();
        assert_eq!(plain.values, weighted.values);
    }

    #[test]
    fn zero_weight_drops_a_node() {
        // zeroing node z equals estimating on the dataset with z's edges
        // marked missing, rescaled back to the full-pair normalization
        let n = 7;
        let ds = random_complete(n, 11);
        let sp = spec(0.5);
        let grid = EvaluationGrid::equally_spaced(DOMAIN, 9).unwrap();
        let mut weights = vec![1.0; n];
        weights[2] = 0.0;
        let est = weighted_fhat(&ds, &weights, &sp, &grid).unwrap();

        let mut records = Vec::new();
        for (i, j, v) in ds.present_pairs() {
            records.push(EdgeRecord {
                i: format!("{i}"),
                j: format!("{j}"),
                value: (i != 2 && j != 2).then_some(v),
            });
        }
        let dropped = DyadicDataset::from_edge_list(&records).unwrap();
        let sub = fhat(&dropped, &sp, &grid).unwrap();
        let rescale = sub.n_present as f64 / ds.n_pairs_total() as f64;
        for m in 0..grid.len() {
            assert!((est.values[m] - sub.values[m] * rescale).abs() < 1e-13);
        }
    }

    #[test]
    fn locality_far_pairs_do_not_matter() {
        let mut vals = vec![-1.9, -1.85, 1.2, 1.3, 1.25, -1.8];
        let ds1 = DyadicDataset::complete(4, vals.clone()).unwrap();
        let sp = spec(0.3);
        let grid = EvaluationGrid::from_points(DOMAIN, vec![1.2, 1.35]).unwrap();
        let est1 = fhat(&ds1, &sp, &grid).unwrap();
        // move the far-away values; nothing within h of the grid changes
        vals[0] = -1.0;
        vals[1] = -0.5;
        vals[5] = 0.2;
        let ds2 = DyadicDataset::complete(4, vals).unwrap();
        let est2 = fhat(&ds2, &sp, &grid).unwrap();
        assert_eq!(est1.values, est2.values);
    }

    #[test]
    fn relabeling_leaves_estimate_unchanged() {
        let n = 8;
        let ds = random_complete(n, 3);
        let sp = spec(0.5);
        let grid = EvaluationGrid::equally_spaced(DOMAIN, 13).unwrap();
        let base = fhat(&ds, &sp, &grid).unwrap();
        // relabel via the permutation i -> (i*3+1) mod 8 (a bijection on 0..8)
        let perm: Vec<usize> = (0..n).map(|i| (i * 3 + 1) % n).collect();
        let mut records = Vec::new();
        for (i, j, v) in ds.present_pairs() {
            records.push(EdgeRecord {
                i: format!("{}", perm[i]),
                j: format!("{}", perm[j]),
                value: Some(v),
            });
        }
        let relabeled = DyadicDataset::from_edge_list(&records).unwrap();
        let est = fhat(&relabeled, &sp, &grid).unwrap();
        for m in 0..grid.len() {
            assert!((base.values[m] - est.values[m]).abs() < 1e-12);
        }
    }

    #[test]
    fn estimate_is_linear_in_the_kernel() {
        // mixing two bandwidths: the convex combination of estimates equals
        // the estimate under the pooled kernel evaluated by hand
        let ds = random_complete(6, 21);
        let (sp1, sp2) = (spec(0.3), spec(0.8));
        let grid = EvaluationGrid::equally_spaced(DOMAIN, 7).unwrap();
        let (e1, e2) = (fhat(&ds, &sp1, &grid).unwrap(), fhat(&ds, &sp2, &grid).unwrap());
        let alpha = 0.3;
        for (m, &w) in grid.points().iter().enumerate() {
            let (k1, k2) = (sp1.boundary_kernel(w).unwrap(), sp2.boundary_kernel(w).unwrap());
            let pooled: f64 = ds
                .present_values()
                .map(|v| alpha * k1.eval(v) + (1.0 - alpha) * k2.eval(v))
                .sum::<f64>()
                / ds.n_present() as f64;
            let combo = alpha * e1.values[m] + (1.0 - alpha) * e2.values[m];
            assert!((pooled - combo).abs() < 1e-12);
        }
    }

    #[test]
    fn integral_near_one_on_simulated_data() {
        let ds = random_complete(60, 9);
        let sp = spec(0.35);
        let grid = EvaluationGrid::equally_spaced(DOMAIN, 101).unwrap();
        let est = fhat(&ds, &sp, &grid).unwrap();
        let total = est.integral();
        assert!((0.8..=1.2).contains(&total), "integral {total}");
    }

    #[test]
    fn rejects_bad_weights_and_empty_data() {
        let ds = random_complete(5, 2);
        let sp = spec(0.4);
        let grid = EvaluationGrid::equally_spaced(DOMAIN, 3).unwrap();
        assert!(weighted_fhat(&ds, &[1.0; 4], &sp, &grid).is_err());
        assert!(weighted_fhat(&ds, &[1.0, 1.0, -0.1, 1.0, 1.0], &sp, &grid).is_err());
        let empty = DyadicDataset::from_edge_list(&[
            EdgeRecord { i: "a".into(), j: "b".into(), value: None },
        ]);
        assert!(matches!(
            fhat(&empty.unwrap(), &sp, &grid),
            Err(Error::DegenerateInput(_))
        ));
    }
}
