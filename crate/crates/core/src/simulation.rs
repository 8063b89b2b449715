//! Synthetic dyadic data with controllable degeneracy, its closed-form
//! density, the four-term error decomposition, and the Monte Carlo study
//! harness behind the `simulate` command.
//!
//! The generator draws node effects A_i from {-1, 0, +1} with probabilities
//! π = (π₁, π₂, π₃) and sets W_ij = A_iA_j + V_ij with standard normal
//! V_ij. The edge density is then the three-component normal mixture
//!
//! ```text
//! f_W(w) = (π₁² + π₃²)φ(w-1) + π₂(2-π₂)φ(w) + 2π₁π₃φ(w+1)
//! ```
//!
//! and the variance of the conditional density f_{W|A}(w|A) across A
//! controls whether the node-level (Hájek) term of the estimator's error
//! decomposition is degenerate at every point, some points, or none.

use crate::bandwidth::rot_bandwidth;
use crate::data::DyadicDataset;
use crate::error::{Error, Result};
use crate::estimator::{fhat, EvaluationGrid};
use crate::inference::{band_at, pointwise_intervals};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::numeric::{integrate_gl64, normal_pdf, substream_rng};
use crate::par;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Mixing probabilities for the three-point node effect distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiParams {
    pub pi1: f64,
    pub pi2: f64,
    pub pi3: f64,
}

impl PiParams {
    pub fn new(pi1: f64, pi2: f64, pi3: f64) -> Result<Self> {
        for v in [pi1, pi2, pi3] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Input(format!(
                    "probabilities must be finite and nonnegative, got ({pi1}, {pi2}, {pi3})"
                )));
            }
        }
        if (pi1 + pi2 + pi3 - 1.0).abs() > 1e-12 {
            return Err(Error::Input(format!(
                "probabilities must sum to 1, got {}",
                pi1 + pi2 + pi3
            )));
        }
        Ok(Self { pi1, pi2, pi3 })
    }

    pub fn probabilities(&self) -> [f64; 3] {
        [self.pi1, self.pi2, self.pi3]
    }

    /// Compact label like "(1/2,0,1/2)" falls back to decimals.
    pub fn label(&self) -> String {
        format!("({},{},{})", self.pi1, self.pi2, self.pi3)
    }
}

/// Draw a complete synthetic network; returns the dataset and the latent
/// node effects (the latter power the decomposition oracle).
pub fn generate(pi: &PiParams, n: usize, seed: u64) -> Result<(DyadicDataset, Vec<f64>)> {
    if n < 2 {
        return Err(Error::Input(format!("need at least 2 nodes, got {n}")));
    }
    let mut rng = substream_rng(seed, 0);
    let a: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            if u < pi.pi1 {
                -1.0
            } else if u < pi.pi1 + pi.pi2 {
                0.0
            } else {
                1.0
            }
        })
        .collect();
    let mut values = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let v: f64 = StandardNormal.sample(&mut rng);
            values.push(a[i] * a[j] + v);
        }
    }
    Ok((DyadicDataset::complete(n, values)?, a))
}

/// The closed-form edge density of the synthetic family.
pub fn true_density(pi: &PiParams, w: f64) -> f64 {
    (pi.pi1 * pi.pi1 + pi.pi3 * pi.pi3) * normal_pdf(w - 1.0)
        + pi.pi2 * (2.0 - pi.pi2) * normal_pdf(w)
        + 2.0 * pi.pi1 * pi.pi3 * normal_pdf(w + 1.0)
}

/// Edge density conditional on one endpoint's effect `a` ∈ {-1, 0, +1}.
pub fn conditional_density(pi: &PiParams, w: f64, a: f64) -> f64 {
    pi.pi1 * normal_pdf(w + a) + pi.pi2 * normal_pdf(w) + pi.pi3 * normal_pdf(w - a)
}

/// How the node-level term of the error decomposition behaves over the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degeneracy {
    /// Var[f_{W|A}(w|A)] vanishes everywhere: the node-level term is absent.
    Total,
    /// Vanishes at some grid points only.
    Partial,
    /// Positive everywhere.
    None,
}

impl Degeneracy {
    pub fn name(self) -> &'static str {
        match self {
            Degeneracy::Total => "total",
            Degeneracy::Partial => "partial",
            Degeneracy::None => "none",
        }
    }
}

/// Variance curve of the conditional density and its grid extremes.
#[derive(Debug, Clone)]
pub struct DegeneracyProfile {
    pub grid: EvaluationGrid,
    /// Var[f_{W|A}(w|A)] at each grid point (closed form).
    pub variance: Vec<f64>,
    /// Minimum of the curve (the squared lower degeneracy constant on the grid).
    pub d_lo: f64,
    /// Maximum of the curve (the squared upper degeneracy constant on the grid).
    pub d_up: f64,
    pub classification: Degeneracy,
}

const DEGENERACY_TOL: f64 = 1e-12;

pub fn degeneracy_profile(pi: &PiParams, grid: &EvaluationGrid) -> DegeneracyProfile {
    let probs = pi.probabilities();
    let levels = [-1.0, 0.0, 1.0];
    let variance: Vec<f64> = grid
        .points()
        .iter()
        .map(|&w| {
            let mean = true_density(pi, w);
            let second: f64 = probs
                .iter()
                .zip(levels)
                .map(|(&p, a)| {
                    let c = conditional_density(pi, w, a);
                    p * c * c
                })
                .sum();
            (second - mean * mean).max(0.0)
        })
        .collect();
    let d_lo = variance.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    let d_up = variance.iter().fold(0.0f64, |a, &v| a.max(v));
    let classification = if d_up <= DEGENERACY_TOL {
        Degeneracy::Total
    } else if d_lo <= DEGENERACY_TOL {
        Degeneracy::Partial
    } else {
        Degeneracy::None
    };
    DegeneracyProfile {
        grid: grid.clone(),
        variance,
        d_lo,
        d_up,
        classification,
    }
}

/// The four curves of the error decomposition
/// f̂ - f = bias + node_level + pair_noise + interaction.
#[derive(Debug, Clone)]
pub struct HoeffdingComponents {
    /// B: E[f̂] - f, the smoothing bias.
    pub b: Vec<f64>,
    /// L: (2/n)·Σ_i (E[k|A_i] - E[k]), the node-level (Hájek) term.
    pub l: Vec<f64>,
    /// E: (2/(n(n-1)))·Σ_{i<j} (k(W_ij) - E[k|A_i,A_j]), the pair noise.
    pub e: Vec<f64>,
    /// Q: the centered interaction E[k|A_i,A_j] - E[k|A_i] - E[k|A_j] + E[k].
    pub q: Vec<f64>,
}

/// Decompose the estimation error of `fhat` on a synthetic draw with known
/// node effects. Conditional kernel means are computed by 64-node
/// Gauss-Legendre quadrature per kernel support; given A_i and A_j the edge
/// value is A_iA_j plus standard normal noise, so E[k|A_i,A_j] depends only
/// on the product A_iA_j ∈ {-1, 0, +1}.
pub fn hoeffding_components(
    dataset: &DyadicDataset,
    a: &[f64],
    pi: &PiParams,
    spec: &KernelSpec,
    grid: &EvaluationGrid,
) -> Result<HoeffdingComponents> {
    let n = dataset.n();
    if a.len() != n {
        return Err(Error::Input(format!(
            "{} node effects for {n} nodes",
            a.len()
        )));
    }
    if a.iter().any(|v| *v != -1.0 && *v != 0.0 && *v != 1.0) {
        return Err(Error::Input("node effects must lie in {-1, 0, +1}".into()));
    }
    if dataset.n_present() != dataset.n_pairs_total() {
        return Err(Error::Input(
            "the decomposition needs a complete network".into(),
        ));
    }
    let estimate = fhat(dataset, spec, grid)?;
    let kernels = spec.kernels_on_grid(grid.points())?;
    let probs = pi.probabilities();
    let nf = n as f64;
    let idx = |v: f64| (v + 1.0) as usize; // -1,0,1 -> 0,1,2

    let d = grid.len();
    let curves = par::map_indexed(d, |m| {
        let kern = &kernels[m];
        let (lo, hi) = kern.support;
        // E[k | A_iA_j = c] for c in {-1, 0, +1}
        let e_prod: [f64; 3] = std::array::from_fn(|ci| {
            let c = ci as f64 - 1.0;
            integrate_gl64(lo, hi, |s| kern.eval(s) * normal_pdf(s - c))
        });
        // E[k | A_i = a] = Σ_b π_b E[k | ab]
        let e_cond: [f64; 3] = std::array::from_fn(|ai| {
            let av = ai as f64 - 1.0;
            probs
                .iter()
                .zip([-1.0, 0.0, 1.0])
                .map(|(&p, b)| p * e_prod[idx(av * b)])
                .sum()
        });
        let e_all: f64 = probs.iter().zip(e_cond).map(|(&p, e)| p * e).sum();

        let b = e_all - true_density(pi, grid.points()[m]);
        let mut l = 0.0;
        for &ai in a {
            l += e_cond[idx(ai)] - e_all;
        }
        l *= 2.0 / nf;
        let mut e_term = 0.0;
        let mut q_term = 0.0;
        for (i, j, v) in dataset.present_pairs() {
            let cond_ij = e_prod[idx(a[i] * a[j])];
            e_term += kern.eval(v) - cond_ij;
            q_term += cond_ij - e_cond[idx(a[i])] - e_cond[idx(a[j])] + e_all;
        }
        let pair_scale = 2.0 / (nf * (nf - 1.0));
        (b, l, e_term * pair_scale, q_term * pair_scale, estimate.values[m])
    });

    Ok(HoeffdingComponents {
        b: curves.iter().map(|c| c.0).collect(),
        l: curves.iter().map(|c| c.1).collect(),
        e: curves.iter().map(|c| c.2).collect(),
        q: curves.iter().map(|c| c.3).collect(),
    })
}

/// Settings for the Monte Carlo study.
#[derive(Debug, Clone)]
pub struct McConfig {
    pub pis: Vec<PiParams>,
    pub n: usize,
    pub reps: usize,
    /// Evaluation grid size.
    pub d: usize,
    /// Resampling draws per band.
    pub b_draws: usize,
    /// Uncorrected kernel order (also selects the bandwidth).
    pub p: usize,
    /// Bias-robust kernel order.
    pub p_prime: usize,
    pub alpha: f64,
    pub seed: u64,
    pub family: KernelFamily,
    pub domain: (f64, f64),
}

impl McConfig {
    /// The three reference mixing vectors: fully, partially, and
    /// non-degenerate.
    pub fn reference_pis() -> Vec<PiParams> {
        vec![
            PiParams::new(0.5, 0.0, 0.5).unwrap(),
            PiParams::new(0.25, 0.0, 0.75).unwrap(),
            PiParams::new(0.2, 0.2, 0.6).unwrap(),
        ]
    }

    /// CI-sized study: n=300, 500 replications, d=25, B=2000.
    pub fn scaled(seed: u64) -> Self {
        Self {
            pis: Self::reference_pis(),
            n: 300,
            reps: 500,
            d: 25,
            b_draws: 2000,
            p: 2,
            p_prime: 4,
            alpha: 0.05,
            seed,
            family: KernelFamily::Epanechnikov,
            domain: (-2.0, 2.0),
        }
    }

    /// Reference-scale design: n=3000, 2000 replications, d=50, B=10000.
    pub fn full_scale(seed: u64) -> Self {
        Self {
            n: 3000,
            reps: 2000,
            d: 50,
            b_draws: 10_000,
            ..Self::scaled(seed)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.pis.is_empty() {
            return Err(Error::Input("no mixing vectors supplied".into()));
        }
        if self.reps < 2 {
            return Err(Error::Input(format!(
                "need at least 2 replications, got {}",
                self.reps
            )));
        }
        if self.n < 3 {
            return Err(Error::Input(format!("need at least 3 nodes, got {}", self.n)));
        }
        if self.p < 2 || self.p % 2 != 0 || self.p_prime <= self.p || self.p_prime % 2 != 0 {
            return Err(Error::Input(format!(
                "orders must be even with p < p', got p={} p'={}",
                self.p, self.p_prime
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Input(format!("level must lie in (0,1), got {}", self.alpha)));
        }
        if self.b_draws < 100 {
            return Err(Error::Input(format!(
                "need at least 100 resampling draws, got {}",
                self.b_draws
            )));
        }
        Ok(())
    }
}

/// One study row: a mixing vector crossed with a kernel order.
#[derive(Debug, Clone)]
pub struct McRow {
    pub pi: PiParams,
    pub degeneracy: Degeneracy,
    pub order: usize,
    pub mean_h_rot: f64,
    pub rimse: f64,
    pub ucb_coverage: f64,
    pub ucb_avg_width: f64,
    pub pci_coverage: f64,
    pub pci_avg_width: f64,
}

/// Study output: one row per (mixing vector, kernel order).
#[derive(Debug, Clone)]
pub struct McReport {
    pub rows: Vec<McRow>,
    pub reps: usize,
    pub n: usize,
    pub seed: u64,
}

struct RepOutcome {
    h: f64,
    // per order: rimse, ucb cover, ucb width, pci cover, pci width
    per_order: [[f64; 5]; 2],
}

/// Coverage and width study over synthetic replications. Per replication:
/// draw a network, select the rule-of-thumb bandwidth once, then build
/// bands with the order-p kernel (uncorrected) and the order-p' kernel
/// (bias-robust) at that same bandwidth; pointwise intervals ride along.
pub fn mc_study(config: &McConfig) -> Result<McReport> {
    config.validate()?;
    let grid = EvaluationGrid::equally_spaced(config.domain, config.d)?;
    let orders = [config.p, config.p_prime];
    let mut rows = Vec::with_capacity(config.pis.len() * 2);
    for (pi_idx, pi) in config.pis.iter().enumerate() {
        let truth: Vec<f64> = grid.points().iter().map(|&w| true_density(pi, w)).collect();
        let spacing = grid.spacing();
        let outcomes: Vec<Result<RepOutcome>> = par::map_indexed(config.reps, |rep| {
            let mut seeder =
                substream_rng(config.seed, (pi_idx * config.reps + rep) as u64);
            let data_seed: u64 = seeder.gen();
            let band_seeds: [u64; 2] = [seeder.gen(), seeder.gen()];
            let (data, _) = generate(pi, config.n, data_seed)?;
            let selection = rot_bandwidth(&data, config.family)?;
            let mut per_order = [[0.0f64; 5]; 2];
            for (which, (&order, &band_seed)) in
                orders.iter().zip(&band_seeds).enumerate()
            {
                let spec =
                    KernelSpec::new(config.family, order, selection.h, config.domain)?;
                let (estimate, psd, band) = band_at(
                    &data,
                    &spec,
                    &grid,
                    config.alpha,
                    config.b_draws,
                    band_seed,
                )?;
                let pci = pointwise_intervals(&estimate, &psd, config.alpha)?;
                let imse: f64 = estimate
                    .values
                    .iter()
                    .zip(&truth)
                    .map(|(fh, f)| (fh - f) * (fh - f) * spacing)
                    .sum();
                per_order[which] = [
                    imse.sqrt(),
                    band.covers(&truth) as u8 as f64,
                    band.average_width(),
                    pci.covers(&truth) as u8 as f64,
                    pci.average_width(),
                ];
            }
            Ok(RepOutcome {
                h: selection.h,
                per_order,
            })
        });
        let outcomes: Vec<RepOutcome> = outcomes.into_iter().collect::<Result<_>>()?;
        let reps = config.reps as f64;
        let mean_h = outcomes.iter().map(|o| o.h).sum::<f64>() / reps;
        let profile = degeneracy_profile(pi, &grid);
        for (which, &order) in orders.iter().enumerate() {
            let mean = |k: usize| -> f64 {
                outcomes.iter().map(|o| o.per_order[which][k]).sum::<f64>() / reps
            };
            rows.push(McRow {
                pi: *pi,
                degeneracy: profile.classification,
                order,
                mean_h_rot: mean_h,
                rimse: mean(0),
                ucb_coverage: mean(1),
                ucb_avg_width: mean(2),
                pci_coverage: mean(3),
                pci_avg_width: mean(4),
            });
        }
    }
    Ok(McReport {
        rows,
        reps: config.reps,
        n: config.n,
        seed: config.seed,
    })
}
