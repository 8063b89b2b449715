//! Counterfactual edge-density analysis with discrete node covariates:
//! what would population 1's edge density look like under population 0's
//! covariate distribution?
//!
//! Nodes are reweighted by the probability ratio ψ̂(x) = p̂⁰(x)/p̂¹(x) of
//! their covariate level, so the estimate is a ψ̂-weighted kernel sum over
//! pairs. Its covariance accounts for the estimation of ψ̂ itself through
//! the per-node influence values κ̂, giving
//!
//! ```text
//! Σ̂(w,w') = (4/n²) Σ_i (ψ̂_i S_i(w) + S̃_i(w))(ψ̂_i S_i(w') + S̃_i(w'))
//!          - 4/(n³(n-1)) Σ_{i<j} k k' ψ̂_i²ψ̂_j²
//!          - (4/n) f̂(w) f̂(w')
//! S_i(w)  = (1/(n-1)) Σ_{j≠i} k_h(W_ij,w) ψ̂(X_j¹)
//! S̃_i(w) = (1/(n-1)) Σ_{j≠i} κ̂(X_i⁰, X_i¹, X_j¹) S_j(w)
//! ```
//!
//! (coefficients as printed; they differ from the one-sample covariance
//! by lower-order terms and are not harmonized here). Bands then follow
//! the same repair / correlation-resampling route as the one-sample case.

use crate::bandwidth::rot_bandwidth;
use crate::covariance::{psd_project_with, CovMatrix, PsdCovMatrix, PsdOptions};
use crate::data::DyadicDataset;
use crate::error::{Error, Result};
use crate::estimator::{weighted_fhat, DensityEstimate, EvaluationGrid};
use crate::inference::{gaussian_quantile, uniform_band, RbcConfig, UniformBand};
use crate::kernels::KernelSpec;
use crate::par;
use nalgebra::DMatrix;
use std::collections::HashMap;
use std::io::Read;

/// Per-node covariate levels for the two populations, over a shared
/// ordered support.
#[derive(Debug, Clone)]
pub struct CovariateSample {
    levels: Vec<String>,
    x0: Vec<usize>,
    x1: Vec<usize>,
}

impl CovariateSample {
    /// Build from per-node level labels; the support is the sorted union of
    /// levels observed in either population.
    pub fn new<S: AsRef<str>>(x0: &[S], x1: &[S]) -> Result<Self> {
        if x0.is_empty() || x0.len() != x1.len() {
            return Err(Error::Input(format!(
                "populations must assign the same nonzero node count, got {} and {}",
                x0.len(),
                x1.len()
            )));
        }
        let mut levels: Vec<String> = x0
            .iter()
            .chain(x1.iter())
            .map(|s| s.as_ref().to_string())
            .collect();
        levels.sort();
        levels.dedup();
        let index: HashMap<&str, usize> = levels
            .iter()
            .enumerate()
            .map(|(k, s)| (s.as_str(), k))
            .collect();
        let to_idx = |v: &[S]| v.iter().map(|s| index[s.as_ref()]).collect();
        Ok(Self {
            x0: to_idx(x0),
            x1: to_idx(x1),
            levels,
        })
    }

    pub fn n(&self) -> usize {
        self.x0.len()
    }

    pub fn levels(&self) -> &[String] {
        &self.levels
    }

    pub fn x0(&self) -> &[usize] {
        &self.x0
    }

    pub fn x1(&self) -> &[usize] {
        &self.x1
    }

    pub fn pmf0(&self) -> Vec<f64> {
        pmf_hat(&self.x0, self.levels.len())
    }

    pub fn pmf1(&self) -> Vec<f64> {
        pmf_hat(&self.x1, self.levels.len())
    }
}

/// Empirical level frequencies: count of nodes at each level over n.
pub fn pmf_hat(assignments: &[usize], n_levels: usize) -> Vec<f64> {
    let mut counts = vec![0usize; n_levels];
    for &x in assignments {
        counts[x] += 1;
    }
    let n = assignments.len() as f64;
    counts.iter().map(|&c| c as f64 / n).collect()
}

/// Probability ratios ψ̂(x) = p̂⁰(x)/p̂¹(x) per level and per node.
#[derive(Debug, Clone)]
pub struct PsiWeights {
    pub per_level: Vec<f64>,
    /// ψ̂(X_i¹) for each node i.
    pub per_node: Vec<f64>,
}

pub fn psi_hat(sample: &CovariateSample) -> Result<PsiWeights> {
    let p0 = sample.pmf0();
    let p1 = sample.pmf1();
    let per_level: Vec<f64> = p0
        .iter()
        .zip(&p1)
        .enumerate()
        .map(|(x, (&a, &b))| {
            if b == 0.0 {
                Err(Error::SupportViolation {
                    level: sample.levels[x].clone(),
                })
            } else {
                Ok(a / b)
            }
        })
        .collect::<Result<_>>()?;
    let per_node = sample.x1.iter().map(|&x| per_level[x]).collect();
    Ok(PsiWeights {
        per_level,
        per_node,
    })
}

/// Influence value of node i's covariates on ψ̂(x):
/// (I{X_i⁰=x} - p̂⁰(x))/p̂¹(x) - ψ̂(x)·(I{X_i¹=x} - p̂¹(x))/p̂¹(x).
pub fn kappa_hat(x0_i: usize, x1_i: usize, x: usize, p0: &[f64], p1: &[f64]) -> Result<f64> {
    if p1[x] <= 0.0 {
        return Err(Error::SupportViolation {
            level: format!("level index {x}"),
        });
    }
    let ind0 = if x0_i == x { 1.0 } else { 0.0 };
    let ind1 = if x1_i == x { 1.0 } else { 0.0 };
    Ok((ind0 - p0[x]) / p1[x] - (p0[x] / p1[x]) * ((ind1 - p1[x]) / p1[x]))
}

/// n × levels table of κ̂(X_i⁰, X_i¹, x); every column averages to zero.
#[derive(Debug, Clone)]
pub struct KappaTable {
    n: usize,
    n_levels: usize,
    values: Vec<f64>,
}

impl KappaTable {
    pub fn build(sample: &CovariateSample) -> Result<Self> {
        let p0 = sample.pmf0();
        let p1 = sample.pmf1();
        let (n, n_levels) = (sample.n(), sample.levels.len());
        let mut values = Vec::with_capacity(n * n_levels);
        for i in 0..n {
            for x in 0..n_levels {
                values.push(kappa_hat(sample.x0[i], sample.x1[i], x, &p0, &p1)?);
            }
        }
        Ok(Self {
            n,
            n_levels,
            values,
        })
    }

    pub fn value(&self, i: usize, x: usize) -> f64 {
        self.values[i * self.n_levels + x]
    }

    pub fn column_mean(&self, x: usize) -> f64 {
        (0..self.n).map(|i| self.value(i, x)).sum::<f64>() / self.n as f64
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }
}

/// Counterfactual density estimate: the pair kernel sum with each pair
/// weighted by ψ̂(X_i¹)ψ̂(X_j¹).
pub fn cf_estimate(
    data1: &DyadicDataset,
    psi: &PsiWeights,
    spec: &KernelSpec,
    grid: &EvaluationGrid,
) -> Result<DensityEstimate> {
    weighted_fhat(data1, &psi.per_node, spec, grid)
}

/// Raw and repaired covariance of the counterfactual estimate.
#[derive(Debug, Clone)]
pub struct CounterfactualCov {
    pub raw: CovMatrix,
    pub psd: PsdCovMatrix,
}

pub fn cf_covariance(
    data1: &DyadicDataset,
    sample: &CovariateSample,
    psi: &PsiWeights,
    kappa: &KappaTable,
    spec: &KernelSpec,
    grid: &EvaluationGrid,
) -> Result<CounterfactualCov> {
    cf_covariance_with(data1, sample, psi, kappa, spec, grid, PsdOptions::default())
}

/// [`cf_covariance`] with explicit covariance-repair options.
pub fn cf_covariance_with(
    data1: &DyadicDataset,
    sample: &CovariateSample,
    psi: &PsiWeights,
    kappa: &KappaTable,
    spec: &KernelSpec,
    grid: &EvaluationGrid,
    opts: PsdOptions,
) -> Result<CounterfactualCov> {
    let n = data1.n();
    if n < 3 {
        return Err(Error::Input(format!("need at least 3 nodes, got {n}")));
    }
    if sample.n() != n || psi.per_node.len() != n {
        return Err(Error::Input(format!(
            "covariates cover {} nodes but the network has {n}",
            sample.n()
        )));
    }
    if data1.n_present() == 0 {
        return Err(Error::DegenerateInput("no present pairs".into()));
    }
    let d = grid.len();
    let kernels = spec.kernels_on_grid(grid.points())?;
    let scale = 1.0 / data1.present_share();
    let psi_n = &psi.per_node;
    let pairs: Vec<(usize, usize, f64)> = data1.present_pairs().collect();
    let nf = n as f64;

    let mut s_cols = vec![0.0f64; d * n]; // Σ_{j≠i} k̃ψ_j, laid out [m*n + i]
    let mut pair_sum = vec![0.0f64; d];
    let mut middle = vec![0.0f64; d * d];
    let tri: Vec<(usize, usize)> = (0..d).flat_map(|m| (m..d).map(move |m2| (m, m2))).collect();

    const BLOCK: usize = 8192;
    for block in pairs.chunks(BLOCK) {
        let rows = par::map_indexed(block.len(), |r| {
            let v = block[r].2;
            kernels.iter().map(|k| k.eval(v) * scale).collect::<Vec<f64>>()
        });
        par::for_each_chunk_mut(&mut s_cols, n, |m, col| {
            for (r, &(i, j, _)) in block.iter().enumerate() {
                let k = rows[r][m];
                col[i] += k * psi_n[j];
                col[j] += k * psi_n[i];
            }
        });
        par::for_each_chunk_mut(&mut pair_sum, 1, |m, ps| {
            for (r, &(i, j, _)) in block.iter().enumerate() {
                ps[0] += rows[r][m] * psi_n[i] * psi_n[j];
            }
        });
        let wt2: Vec<f64> = block
            .iter()
            .map(|&(i, j, _)| {
                let w = psi_n[i] * psi_n[j];
                w * w
            })
            .collect();
        let dots = par::map_indexed(tri.len(), |t| {
            let (m, m2) = tri[t];
            rows.iter()
                .zip(&wt2)
                .map(|(row, w2)| row[m] * row[m2] * w2)
                .sum::<f64>()
        });
        for (t, &(m, m2)) in tri.iter().enumerate() {
            middle[m * d + m2] += dots[t];
        }
    }

    // S̃ via level totals: Σ_{j≠i} κ(i, X_j¹)S_j = Σ_x κ(i,x)T_x - κ(i, X_i¹)S_i
    let n_levels = kappa.n_levels();
    let a_cols = par::map_indexed(d, |m| {
        let col = &s_cols[m * n..(m + 1) * n];
        let mut level_totals = vec![0.0f64; n_levels];
        for (j, &s) in col.iter().enumerate() {
            level_totals[sample.x1[j]] += s;
        }
        let inv1 = 1.0 / (nf - 1.0);
        let inv2 = inv1 * inv1;
        // A_i = ψ_i S_i + S̃_i with the leave-one-out prefactors applied
        (0..n)
            .map(|i| {
                let mut tilde = -kappa.value(i, sample.x1[i]) * col[i];
                for x in 0..n_levels {
                    tilde += kappa.value(i, x) * level_totals[x];
                }
                psi_n[i] * col[i] * inv1 + tilde * inv2
            })
            .collect::<Vec<f64>>()
    });

    let fhat_pairs: Vec<f64> = pair_sum
        .iter()
        .map(|s| s * 2.0 / (nf * (nf - 1.0)))
        .collect();
    let c1 = 4.0 / (nf * nf);
    let c2 = 4.0 / (nf * nf * nf * (nf - 1.0));
    let c3 = 4.0 / nf;

    let upper = par::map_indexed(tri.len(), |t| {
        let (m, m2) = tri[t];
        let (ca, cb) = (&a_cols[m], &a_cols[m2]);
        let mut own = 0.0;
        for i in 0..n {
            own += ca[i] * cb[i];
        }
        c1 * own - c2 * middle[m * d + m2] - c3 * fhat_pairs[m] * fhat_pairs[m2]
    });
    let mut entries = DMatrix::zeros(d, d);
    for (t, &(m, m2)) in tri.iter().enumerate() {
        entries[(m, m2)] = upper[t];
        entries[(m2, m)] = upper[t];
    }
    let raw = CovMatrix {
        grid: grid.clone(),
        entries,
        n_nodes: n,
        bandwidth: spec.bandwidth(),
        present_share: data1.present_share(),
    };
    let constants = spec.lipschitz_constants(&spec.default_sweep_grid())?;
    let psd = psd_project_with(&raw, constants, n, spec.bandwidth(), opts)?;
    Ok(CounterfactualCov { raw, psd })
}

/// Intermediate products of the counterfactual band pipeline.
#[derive(Debug, Clone)]
pub struct CfRun {
    pub bandwidth: f64,
    pub psi: PsiWeights,
    pub estimate: DensityEstimate,
    pub covariance: CounterfactualCov,
    pub band: UniformBand,
}

/// Full counterfactual pipeline: rule-of-thumb bandwidth on the observed
/// sample, order-p' kernel, weights, estimate, covariance, repair,
/// quantile, band.
pub fn cf_run(
    data1: &DyadicDataset,
    sample: &CovariateSample,
    config: &RbcConfig,
    seed: u64,
) -> Result<CfRun> {
    config.validate()?;
    if config.p != 2 {
        return Err(Error::Input(format!(
            "rule-of-thumb constants are available for selection order 2 only, got {}",
            config.p
        )));
    }
    let selection = rot_bandwidth(data1, config.family)?;
    let spec = KernelSpec::new(config.family, config.p_prime, selection.h, config.domain)?;
    let grid = EvaluationGrid::equally_spaced(config.domain, config.grid_size)?;
    let psi = psi_hat(sample)?;
    let kappa = KappaTable::build(sample)?;
    let estimate = cf_estimate(data1, &psi, &spec, &grid)?;
    let covariance = cf_covariance_with(
        data1,
        sample,
        &psi,
        &kappa,
        &spec,
        &grid,
        PsdOptions { ridge: config.ridge },
    )?;
    let q_hat = gaussian_quantile(&covariance.psd, config.alpha, config.b_draws, seed)?;
    let band = uniform_band(&estimate, &covariance.psd, q_hat, config.alpha, config.b_draws)?;
    Ok(CfRun {
        bandwidth: selection.h,
        psi,
        estimate,
        covariance,
        band,
    })
}

pub fn cf_band(
    data1: &DyadicDataset,
    sample: &CovariateSample,
    config: &RbcConfig,
    seed: u64,
) -> Result<UniformBand> {
    cf_run(data1, sample, config, seed).map(|run| run.band)
}

/// Read per-node covariate levels from CSV with header `node,x0,x1`,
/// joined to the network by node label; every node must appear exactly once.
pub fn read_covariates_csv<R: Read>(reader: R, labels: &[String]) -> Result<CovariateSample> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = csv
        .headers()
        .map_err(|e| Error::Input(format!("covariate csv: {e}")))?
        .clone();
    let expect = ["node", "x0", "x1"];
    if headers.len() != 3 || !headers.iter().zip(expect).all(|(a, b)| a == b) {
        return Err(Error::Input(format!(
            "covariate csv must have header node,x0,x1, got {headers:?}"
        )));
    }
    let index: HashMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(k, s)| (s.as_str(), k))
        .collect();
    let mut x0: Vec<Option<String>> = vec![None; labels.len()];
    let mut x1: Vec<Option<String>> = vec![None; labels.len()];
    for record in csv.records() {
        let record = record.map_err(|e| Error::Input(format!("covariate csv: {e}")))?;
        let node = record.get(0).unwrap_or_default();
        let &i = index.get(node).ok_or_else(|| {
            Error::Input(format!("covariate csv names unknown node '{node}'"))
        })?;
        if x0[i].is_some() {
            return Err(Error::Input(format!(
                "covariate csv repeats node '{node}'"
            )));
        }
        let (a, b) = (record.get(1).unwrap_or_default(), record.get(2).unwrap_or_default());
        if a.is_empty() || b.is_empty() {
            return Err(Error::Input(format!(
                "covariate csv has empty level for node '{node}'"
            )));
        }
        x0[i] = Some(a.to_string());
        x1[i] = Some(b.to_string());
    }
    let mut v0 = Vec::with_capacity(labels.len());
    let mut v1 = Vec::with_capacity(labels.len());
    for (k, label) in labels.iter().enumerate() {
        match (&x0[k], &x1[k]) {
            (Some(a), Some(b)) => {
                v0.push(a.clone());
                v1.push(b.clone());
            }
            _ => {
                return Err(Error::Input(format!(
                    "covariate csv is missing node '{label}'"
                )))
            }
        }
    }
    CovariateSample::new(&v0, &v1)
}
