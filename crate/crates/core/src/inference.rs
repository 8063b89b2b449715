//! Uniform confidence bands via Gaussian multiplier resampling, the
//! bias-robust band pipeline, pointwise intervals, and a two-sample
//! density-equality test.
//!
//! The band quantile comes from the studentized process: draw B mean-zero
//! Gaussian vectors with the correlation matrix of the repaired covariance,
//! take each draw's sup-norm, and return the order statistic at
//! `ceil(B(1-alpha))`. The band is then `center ± q̂·√Σ̂⁺(w,w)`.
//!
//! The bias-robust pipeline selects a rule-of-thumb bandwidth for an
//! order-p kernel and then runs estimation, covariance, and resampling with
//! an order-p' kernel (p' > p) at that same bandwidth, trading a slower
//! rate for valid coverage without estimating bias terms.

use crate::bandwidth::{rot_bandwidth, BandwidthSelection};
use crate::covariance::{psd_project_with, sigma_hat, PsdCovMatrix, PsdOptions};
use crate::data::DyadicDataset;
use crate::error::{Error, Result};
use crate::estimator::{fhat, DensityEstimate, EvaluationGrid};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::numeric::{normal_quantile, substream_rng};
use crate::par;
use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

/// Grid points whose repaired variance falls at or below this share of the
/// largest variance are treated as exactly degenerate.
const ZERO_VAR_SHARE: f64 = 1e-12;

/// A simultaneous confidence band over the evaluation grid.
#[derive(Debug, Clone)]
pub struct UniformBand {
    pub grid: EvaluationGrid,
    pub center: Vec<f64>,
    pub halfwidth: Vec<f64>,
    pub q_hat: f64,
    pub alpha: f64,
    /// Resample count behind `q_hat` (0 for analytic pointwise intervals).
    pub b_draws: usize,
    /// Points excluded from the sup because their variance was numerically zero.
    pub zero_variance: Vec<bool>,
}

impl UniformBand {
    pub fn lower(&self) -> Vec<f64> {
        self.center
            .iter()
            .zip(&self.halfwidth)
            .map(|(c, h)| c - h)
            .collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.center
            .iter()
            .zip(&self.halfwidth)
            .map(|(c, h)| c + h)
            .collect()
    }

    /// True when every grid value of `f` lies inside the band.
    pub fn covers(&self, f: &[f64]) -> bool {
        f.len() == self.center.len()
            && f.iter()
                .zip(&self.center)
                .zip(&self.halfwidth)
                .all(|((v, c), h)| (v - c).abs() <= *h)
    }

    pub fn average_width(&self) -> f64 {
        2.0 * self.halfwidth.iter().sum::<f64>() / self.halfwidth.len() as f64
    }
}

/// Settings for the bias-robust band pipeline.
#[derive(Debug, Clone, Copy)]
pub struct RbcConfig {
    pub family: KernelFamily,
    pub domain: (f64, f64),
    /// Order used for bandwidth selection (the rule of thumb covers 2).
    pub p: usize,
    /// Higher order used for estimation and resampling.
    pub p_prime: usize,
    pub alpha: f64,
    pub b_draws: usize,
    pub grid_size: usize,
    /// Add a tiny diagonal ridge (1e-12·trace/d) before the covariance
    /// repair; off by default, for near-singular normalizations.
    pub ridge: bool,
}

impl RbcConfig {
    pub fn new(family: KernelFamily, domain: (f64, f64)) -> Self {
        Self {
            family,
            domain,
            p: 2,
            p_prime: 4,
            alpha: 0.05,
            b_draws: 2000,
            grid_size: 25,
            ridge: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 || self.p % 2 != 0 {
            return Err(Error::Input(format!(
                "selection order must be even and at least 2, got {}",
                self.p
            )));
        }
        if self.p_prime <= self.p || self.p_prime % 2 != 0 {
            return Err(Error::Input(format!(
                "inference order must be even and exceed {}, got {}",
                self.p, self.p_prime
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Input(format!(
                "level must lie in (0,1), got {}",
                self.alpha
            )));
        }
        if self.b_draws < 100 {
            return Err(Error::Input(format!(
                "need at least 100 resampling draws, got {}",
                self.b_draws
            )));
        }
        if self.grid_size == 0 {
            return Err(Error::Input("grid size must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of a two-sample density-equality test.
#[derive(Debug, Clone)]
pub struct TwoSampleResult {
    pub tau: f64,
    pub statistic: TestStat,
    pub critical_value: f64,
    pub reject: bool,
    pub alpha: f64,
    /// Per-sample rule-of-thumb bandwidths (selected independently).
    pub bandwidth0: f64,
    pub bandwidth1: f64,
}

/// Functional applied to the estimate difference over the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestStat {
    /// Grid Riemann sum of the squared difference, square-rooted.
    L2,
    /// Maximum absolute difference over the grid.
    Sup,
}

impl TestStat {
    fn apply(self, diff: &[f64], spacing: f64) -> f64 {
        match self {
            TestStat::Sup => diff.iter().fold(0.0f64, |a, v| a.max(v.abs())),
            TestStat::L2 => diff.iter().map(|v| v * v * spacing).sum::<f64>().sqrt(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TestStat::L2 => "2",
            TestStat::Sup => "sup",
        }
    }
}

impl std::str::FromStr for TestStat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "2" | "l2" => Ok(TestStat::L2),
            "sup" | "inf" | "max" => Ok(TestStat::Sup),
            other => Err(Error::Input(format!(
                "unknown test statistic '{other}' (expected 2 or sup)"
            ))),
        }
    }
}

fn zero_variance_flags(diag: &[f64]) -> Vec<bool> {
    let max = diag.iter().fold(0.0f64, |a, &v| a.max(v));
    diag.iter().map(|&v| v <= ZERO_VAR_SHARE * max).collect()
}

/// Eigen square root with tiny negative eigenvalues clipped at zero.
/// Eigenvalues below -1e-8 mean the input was not a repaired covariance.
fn gaussian_factor(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);
    if eig.eigenvalues.iter().any(|&v| v < -1e-8) {
        return Err(Error::Numerical(format!(
            "resampling covariance has eigenvalue {} below -1e-8; \
             it was not produced by the projection step",
            eig.eigenvalues.iter().fold(f64::INFINITY, |a, &v| a.min(v))
        )));
    }
    let roots = nalgebra::DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|v| v.max(0.0).sqrt()),
    );
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

/// Eigen square root for the studentized (unit-diagonal) matrix. The
/// covariance repair guarantees eigenvalues above -1e-8 at covariance
/// scale, but dividing by near-zero variances amplifies that slack by
/// 1/min(diag), so mildly negative curvature up to `amp_tol` is legitimate
/// here and is removed by alternating eigenvalue clips with diagonal
/// rescaling; anything beyond it means the input was not a repaired
/// covariance.
fn correlation_factor(corr: &DMatrix<f64>, amp_tol: f64) -> Result<DMatrix<f64>> {
    let d = corr.nrows();
    let mut x = (corr + corr.transpose()) * 0.5;
    for _pass in 0..64 {
        let eig = nalgebra::SymmetricEigen::new(x.clone());
        let min_eig = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &v| a.min(v));
        if min_eig < -amp_tol {
            return Err(Error::Numerical(format!(
                "studentized covariance has eigenvalue {min_eig} beyond the \
                 amplified tolerance {:.3e}; it was not produced by the \
                 projection step",
                -amp_tol
            )));
        }
        if min_eig >= -1e-10 {
            let roots = nalgebra::DVector::from_iterator(
                d,
                eig.eigenvalues.iter().map(|v| v.max(0.0).sqrt()),
            );
            return Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots));
        }
        let clipped =
            nalgebra::DVector::from_iterator(d, eig.eigenvalues.iter().map(|v| v.max(0.0)));
        let scaled = &eig.eigenvectors * DMatrix::from_diagonal(&clipped);
        x = scaled * eig.eigenvectors.transpose();
        x = (&x + x.transpose()) * 0.5;
        for i in 0..d {
            let dii = x[(i, i)];
            if dii >= 1e-8 {
                let s = 1.0 / dii.sqrt();
                for j in 0..d {
                    x[(i, j)] *= s;
                    x[(j, i)] *= s;
                }
            } else {
                // the clip annihilated this point's variance: decouple it
                for j in 0..d {
                    x[(i, j)] = 0.0;
                    x[(j, i)] = 0.0;
                }
            }
            x[(i, i)] = 1.0;
        }
    }
    Err(Error::Numerical(
        "studentized covariance repair did not converge".into(),
    ))
}

fn order_statistic(mut draws: Vec<f64>, alpha: f64) -> f64 {
    let b = draws.len();
    draws.sort_by(f64::total_cmp);
    let rank = (b as f64 * (1.0 - alpha)).ceil() as usize;
    draws[rank.clamp(1, b) - 1]
}

/// Smallest q such that at least B(1-alpha) of B simulated sup-norms of the
/// studentized Gaussian process fall at or below q.
pub fn gaussian_quantile(psd: &PsdCovMatrix, alpha: f64, b: usize, seed: u64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Input(format!("level must lie in (0,1), got {alpha}")));
    }
    if b < 100 {
        return Err(Error::Input(format!(
            "need at least 100 resampling draws, got {b}"
        )));
    }
    let diag = psd.diag();
    let flags = zero_variance_flags(&diag);
    let kept: Vec<usize> = (0..diag.len()).filter(|&i| !flags[i]).collect();
    if kept.is_empty() {
        return Err(Error::DegenerateInput(
            "estimated variance is zero at every grid point".into(),
        ));
    }
    let dk = kept.len();
    let mut corr = DMatrix::zeros(dk, dk);
    for (a, &i) in kept.iter().enumerate() {
        for (bq, &j) in kept.iter().enumerate() {
            corr[(a, bq)] = psd.entries[(i, j)] / (diag[i] * diag[j]).sqrt();
        }
        corr[(a, a)] = 1.0;
    }
    let min_kept = kept.iter().map(|&i| diag[i]).fold(f64::INFINITY, f64::min);
    let amp_tol = 1.25e-8 * (1.0 + 1.0 / min_kept);
    let factor = correlation_factor(&corr, amp_tol)?;
    let maxima = par::map_indexed(b, |r| {
        let mut rng = substream_rng(seed, r as u64);
        let g = nalgebra::DVector::from_iterator(
            dk,
            (0..dk).map(|_| StandardNormal.sample(&mut rng)),
        );
        let z = &factor * g;
        z.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    });
    Ok(order_statistic(maxima, alpha))
}

/// Assemble the band `center ± q̂·√Σ̂⁺(w,w)` on the estimate's grid.
pub fn uniform_band(
    center: &DensityEstimate,
    psd: &PsdCovMatrix,
    q_hat: f64,
    alpha: f64,
    b_draws: usize,
) -> Result<UniformBand> {
    if center.grid.points() != psd.grid.points() {
        return Err(Error::Input(
            "estimate and covariance use different grids".into(),
        ));
    }
    if !(q_hat.is_finite() && q_hat >= 0.0) {
        return Err(Error::Input(format!(
            "band quantile must be finite and nonnegative, got {q_hat}"
        )));
    }
    let diag = psd.diag();
    let zero_variance = zero_variance_flags(&diag);
    let halfwidth = diag
        .iter()
        .zip(&zero_variance)
        .map(|(&v, &z)| if z { 0.0 } else { q_hat * v.max(0.0).sqrt() })
        .collect();
    Ok(UniformBand {
        grid: center.grid.clone(),
        center: center.values.clone(),
        halfwidth,
        q_hat,
        alpha,
        b_draws,
        zero_variance,
    })
}

/// Per-point normal intervals `center ± Φ⁻¹(1-alpha/2)·√Σ̂⁺(w,w)`; narrower
/// than the simultaneous band, with no joint coverage guarantee.
pub fn pointwise_intervals(
    center: &DensityEstimate,
    psd: &PsdCovMatrix,
    alpha: f64,
) -> Result<UniformBand> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Input(format!("level must lie in (0,1), got {alpha}")));
    }
    let z = normal_quantile(1.0 - alpha / 2.0);
    uniform_band(center, psd, z, alpha, 0)
}

/// All intermediate products of the bias-robust pipeline, for reporting.
#[derive(Debug, Clone)]
pub struct RbcRun {
    pub bandwidth: BandwidthSelection,
    pub estimate: DensityEstimate,
    pub covariance: PsdCovMatrix,
    pub band: UniformBand,
}

/// Bias-robust pipeline: rule-of-thumb bandwidth for the order-p kernel,
/// then estimate, covariance, repair, quantile, and band, all with the
/// order-p' kernel at that same bandwidth.
pub fn rbc_run(dataset: &DyadicDataset, config: &RbcConfig, seed: u64) -> Result<RbcRun> {
    config.validate()?;
    if config.p != 2 {
        return Err(Error::Input(format!(
            "rule-of-thumb constants are available for selection order 2 only, got {}",
            config.p
        )));
    }
    let selection = rot_bandwidth(dataset, config.family)?;
    band_with_bandwidth(dataset, config, selection, seed)
}

/// Same pipeline with the bandwidth supplied directly (already selected).
pub fn band_with_bandwidth(
    dataset: &DyadicDataset,
    config: &RbcConfig,
    selection: BandwidthSelection,
    seed: u64,
) -> Result<RbcRun> {
    config.validate()?;
    let spec = KernelSpec::new(config.family, config.p_prime, selection.h, config.domain)?;
    let grid = EvaluationGrid::equally_spaced(config.domain, config.grid_size)?;
    let opts = PsdOptions { ridge: config.ridge };
    let (estimate, covariance, band) =
        band_at_with(dataset, &spec, &grid, config.alpha, config.b_draws, seed, opts)?;
    Ok(RbcRun {
        bandwidth: selection,
        estimate,
        covariance,
        band,
    })
}

/// Estimate, repaired covariance, and band for an already-built kernel on an
/// already-built grid; the building block behind [`rbc_run`] and the
/// simulation harness (which also needs the uncorrected low-order variant).
pub fn band_at(
    dataset: &DyadicDataset,
    spec: &KernelSpec,
    grid: &EvaluationGrid,
    alpha: f64,
    b_draws: usize,
    seed: u64,
) -> Result<(DensityEstimate, PsdCovMatrix, UniformBand)> {
    band_at_with(dataset, spec, grid, alpha, b_draws, seed, PsdOptions::default())
}

/// [`band_at`] with explicit covariance-repair options.
pub fn band_at_with(
    dataset: &DyadicDataset,
    spec: &KernelSpec,
    grid: &EvaluationGrid,
    alpha: f64,
    b_draws: usize,
    seed: u64,
    opts: PsdOptions,
) -> Result<(DensityEstimate, PsdCovMatrix, UniformBand)> {
    let estimate = fhat(dataset, spec, grid)?;
    let raw = sigma_hat(dataset, spec, grid)?;
    let constants = spec.lipschitz_constants(&spec.default_sweep_grid())?;
    let psd = psd_project_with(&raw, constants, dataset.n(), spec.bandwidth(), opts)?;
    let q_hat = gaussian_quantile(&psd, alpha, b_draws, seed)?;
    let band = uniform_band(&estimate, &psd, q_hat, alpha, b_draws)?;
    Ok((estimate, psd, band))
}

/// Bias-robust uniform band (see [`rbc_run`] for the intermediate pieces).
pub fn rbc_band(dataset: &DyadicDataset, config: &RbcConfig, seed: u64) -> Result<UniformBand> {
    rbc_run(dataset, config, seed).map(|run| run.band)
}

/// Two-sample test of density equality over the shared inference domain.
/// Bandwidths are selected independently per sample; the critical value is
/// the (1-alpha) quantile over B draws of the statistic applied to
/// Z⁰-Z¹, with Zʳ independent mean-zero Gaussians carrying each sample's
/// repaired covariance (covariance scale, not correlation).
pub fn two_sample_test(
    data0: &DyadicDataset,
    data1: &DyadicDataset,
    config: &RbcConfig,
    statistic: TestStat,
    seed: u64,
) -> Result<TwoSampleResult> {
    config.validate()?;
    if config.p != 2 {
        return Err(Error::Input(format!(
            "rule-of-thumb constants are available for selection order 2 only, got {}",
            config.p
        )));
    }
    let grid = EvaluationGrid::equally_spaced(config.domain, config.grid_size)?;
    let mut runs = Vec::with_capacity(2);
    for data in [data0, data1] {
        let selection = rot_bandwidth(data, config.family)?;
        let spec = KernelSpec::new(config.family, config.p_prime, selection.h, config.domain)?;
        let estimate = fhat(data, &spec, &grid)?;
        let raw = sigma_hat(data, &spec, &grid)?;
        let constants = spec.lipschitz_constants(&spec.default_sweep_grid())?;
        let psd = psd_project_with(
            &raw,
            constants,
            data.n(),
            selection.h,
            PsdOptions { ridge: config.ridge },
        )?;
        runs.push((selection.h, estimate, psd));
    }
    let (h1, est1, psd1) = runs.pop().unwrap();
    let (h0, est0, psd0) = runs.pop().unwrap();

    let d = grid.len();
    let spacing = grid.spacing();
    let diff: Vec<f64> = est1
        .values
        .iter()
        .zip(&est0.values)
        .map(|(a, b)| a - b)
        .collect();
    let tau = statistic.apply(&diff, spacing);

    let f0 = gaussian_factor(&psd0.entries)?;
    let f1 = gaussian_factor(&psd1.entries)?;
    let draws = par::map_indexed(config.b_draws, |r| {
        let mut rng = substream_rng(seed, r as u64);
        let g0 = nalgebra::DVector::from_iterator(
            d,
            (0..d).map(|_| StandardNormal.sample(&mut rng)),
        );
        let g1 = nalgebra::DVector::from_iterator(
            d,
            (0..d).map(|_| StandardNormal.sample(&mut rng)),
        );
        let z = &f0 * g0 - &f1 * g1;
        statistic.apply(z.as_slice(), spacing)
    });
    let critical_value = order_statistic(draws, config.alpha);
    Ok(TwoSampleResult {
        tau,
        statistic,
        critical_value,
        reject: tau >= critical_value,
        alpha: config.alpha,
        bandwidth0: h0,
        bandwidth1: h1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{psd_project, CovMatrix};
    use crate::kernels::LipschitzConstants;
    use rand::Rng;

    const DOMAIN: (f64, f64) = (-2.0, 2.0);

    fn psd_from(entries: DMatrix<f64>, d: usize) -> PsdCovMatrix {
        let grid = EvaluationGrid::equally_spaced(DOMAIN, d).unwrap();
        let raw = CovMatrix::from_entries(grid, entries, 100, 0.5).unwrap();
        psd_project(&raw, LipschitzConstants { c_l: 5.0, c_k: 20.0 }, 100, 0.5).unwrap()
    }

    #[test]
    fn single_point_quantile_matches_normal() {
        let psd = psd_from(DMatrix::from_row_slice(1, 1, &[1.0]), 1);
        let q = gaussian_quantile(&psd, 0.05, 100_000, 7).unwrap();
        assert!((1.93..=1.99).contains(&q), "q = {q}");
    }

    #[test]
    fn identity_quantile_matches_independence_form() {
        let d = 10;
        let psd = psd_from(DMatrix::identity(d, d), d);
        let q = gaussian_quantile(&psd, 0.05, 200_000, 11).unwrap();
        // sup of d independent |N(0,1)| has cdf (2Φ(q)-1)^d
        let target = normal_quantile((1.0 + 0.95f64.powf(0.1)) / 2.0);
        assert!((q - target).abs() < 0.02, "q = {q}, closed form {target}");
    }

    #[test]
    fn quantile_monotone_in_level_on_shared_draws() {
        let d = 5;
        let psd = psd_from(DMatrix::identity(d, d), d);
        let q10 = gaussian_quantile(&psd, 0.10, 5000, 3).unwrap();
        let q05 = gaussian_quantile(&psd, 0.05, 5000, 3).unwrap();
        let q01 = gaussian_quantile(&psd, 0.01, 5000, 3).unwrap();
        assert!(q01 >= q05 && q05 >= q10);
    }

    #[test]
    fn quantile_dominates_single_point_level() {
        for d in [1usize, 3, 8] {
            let psd = psd_from(DMatrix::identity(d, d), d);
            let q = gaussian_quantile(&psd, 0.05, 20_000, 5).unwrap();
            let z = normal_quantile(0.975);
            assert!(q >= z - 0.05, "d={d}: q = {q} vs z = {z}");
        }
    }

    #[test]
    fn quantile_is_deterministic() {
        let d = 6;
        let psd = psd_from(DMatrix::identity(d, d), d);
        let a = gaussian_quantile(&psd, 0.05, 3000, 42).unwrap();
        let b = gaussian_quantile(&psd, 0.05, 3000, 42).unwrap();
        assert_eq!(a, b);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn quantile_identical_across_thread_counts() {
        let d = 7;
        let psd = psd_from(DMatrix::identity(d, d), d);
        let default_pool = gaussian_quantile(&psd, 0.05, 4000, 9).unwrap();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| gaussian_quantile(&psd, 0.05, 4000, 9).unwrap());
        assert_eq!(default_pool, single);
    }

    #[test]
    fn all_zero_variance_is_degenerate() {
        let psd = psd_from(DMatrix::zeros(3, 3), 3);
        assert!(matches!(
            gaussian_quantile(&psd, 0.05, 1000, 1),
            Err(Error::DegenerateInput(_))
        ));
    }

    fn toy_estimate(d: usize, value: f64) -> DensityEstimate {
        let grid = EvaluationGrid::equally_spaced(DOMAIN, d).unwrap();
        DensityEstimate {
            grid,
            values: vec![value; d],
            n_nodes: 100,
            n_present: 4950,
            n_pairs_total: 4950,
            present_share: 1.0,
            family: KernelFamily::Epanechnikov,
            order: 2,
            bandwidth: 0.5,
        }
    }

    #[test]
    fn zero_quantile_collapses_band() {
        let d = 4;
        let psd = psd_from(DMatrix::identity(d, d), d);
        let est = toy_estimate(d, 0.25);
        let band = uniform_band(&est, &psd, 0.0, 0.05, 1000).unwrap();
        assert_eq!(band.lower(), band.center);
        assert_eq!(band.upper(), band.center);
    }

    #[test]
    fn halfwidth_scales_with_covariance_root() {
        let d = 4;
        let base = DMatrix::identity(d, d) * 0.04;
        let psd1 = psd_from(base.clone(), d);
        let psd2 = psd_from(base * 9.0, d);
        let est = toy_estimate(d, 0.25);
        let b1 = uniform_band(&est, &psd1, 1.7, 0.05, 1000).unwrap();
        let b2 = uniform_band(&est, &psd2, 1.7, 0.05, 1000).unwrap();
        for m in 0..d {
            assert!((b2.halfwidth[m] - 3.0 * b1.halfwidth[m]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_variance_points_have_zero_halfwidth_and_flag() {
        let d = 3;
        let mut m = DMatrix::identity(d, d);
        m[(1, 1)] = 0.0;
        // relax the slope budget so the zero survives projection
        let grid = EvaluationGrid::equally_spaced(DOMAIN, d).unwrap();
        let raw = CovMatrix::from_entries(grid, m, 100, 0.5).unwrap();
        let psd = psd_project(
            &raw,
            LipschitzConstants { c_l: 50.0, c_k: 50.0 },
            100,
            0.5,
        )
        .unwrap();
        let est = toy_estimate(d, 0.25);
        let band = uniform_band(&est, &psd, 1.9, 0.05, 1000).unwrap();
        assert!(band.zero_variance[1]);
        assert_eq!(band.halfwidth[1], 0.0);
        assert!(band.halfwidth[0] > 0.0);
    }

    #[test]
    fn pointwise_matches_uniform_on_single_point() {
        let psd = psd_from(DMatrix::from_row_slice(1, 1, &[0.09]), 1);
        let est = toy_estimate(1, 0.25);
        let q = gaussian_quantile(&psd, 0.05, 100_000, 13).unwrap();
        let ucb = uniform_band(&est, &psd, q, 0.05, 100_000).unwrap();
        let pci = pointwise_intervals(&est, &psd, 0.05).unwrap();
        assert!((ucb.halfwidth[0] - pci.halfwidth[0]).abs() < 0.01 * pci.halfwidth[0]);
    }

    #[test]
    fn pointwise_narrower_when_quantile_exceeds_normal() {
        let d = 12;
        let psd = psd_from(DMatrix::identity(d, d), d);
        let est = toy_estimate(d, 0.25);
        let q = gaussian_quantile(&psd, 0.05, 20_000, 17).unwrap();
        let ucb = uniform_band(&est, &psd, q, 0.05, 20_000).unwrap();
        let pci = pointwise_intervals(&est, &psd, 0.05).unwrap();
        assert!(q > normal_quantile(0.975));
        for m in 0..d {
            assert!(pci.halfwidth[m] < ucb.halfwidth[m]);
        }
    }

    #[test]
    fn band_nesting_in_level() {
        let d = 8;
        let psd = psd_from(DMatrix::identity(d, d) * 0.2, d);
        let est = toy_estimate(d, 0.25);
        let q1 = gaussian_quantile(&psd, 0.01, 8000, 23).unwrap();
        let q2 = gaussian_quantile(&psd, 0.10, 8000, 23).unwrap();
        let wide = uniform_band(&est, &psd, q1, 0.01, 8000).unwrap();
        let narrow = uniform_band(&est, &psd, q2, 0.10, 8000).unwrap();
        for m in 0..d {
            assert!(wide.lower()[m] <= narrow.lower()[m]);
            assert!(wide.upper()[m] >= narrow.upper()[m]);
        }
    }

    fn random_dataset(n: usize, seed: u64) -> DyadicDataset {
        let mut rng = substream_rng(seed, 0);
        let m = n * (n - 1) / 2;
        let values = (0..m).map(|_| rng.gen_range(-1.5f64..1.5)).collect();
        DyadicDataset::complete(n, values).unwrap()
    }

    #[test]
    fn rbc_band_is_seed_deterministic() {
        let data = random_dataset(40, 19);
        let mut config = RbcConfig::new(KernelFamily::Epanechnikov, DOMAIN);
        config.b_draws = 500;
        config.grid_size = 7;
        let a = rbc_band(&data, &config, 101).unwrap();
        let b = rbc_band(&data, &config, 101).unwrap();
        assert_eq!(a.center, b.center);
        assert_eq!(a.halfwidth, b.halfwidth);
        assert_eq!(a.q_hat, b.q_hat);
    }

    #[test]
    fn rbc_rejects_equal_orders() {
        let data = random_dataset(20, 29);
        let mut config = RbcConfig::new(KernelFamily::Epanechnikov, DOMAIN);
        config.p_prime = 2;
        assert!(matches!(
            rbc_band(&data, &config, 1),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn two_sample_same_data_never_rejects() {
        let data = random_dataset(30, 37);
        let mut config = RbcConfig::new(KernelFamily::Epanechnikov, DOMAIN);
        config.b_draws = 400;
        config.grid_size = 9;
        for stat in [TestStat::Sup, TestStat::L2] {
            let res = two_sample_test(&data, &data, &config, stat, 5).unwrap();
            assert_eq!(res.tau, 0.0);
            assert!(!res.reject);
            assert_eq!(res.reject, res.tau >= res.critical_value);
        }
    }

    #[test]
    fn two_sample_detects_shifted_sample() {
        // sample 1 concentrated near +1, sample 0 near -1: tau should be
        // large relative to noise at this size
        let n = 60;
        let m = n * (n - 1) / 2;
        let mut rng = substream_rng(43, 0);
        let v0: Vec<f64> = (0..m).map(|_| -1.0 + 0.3 * rng.gen_range(-1.0f64..1.0)).collect();
        let v1: Vec<f64> = (0..m).map(|_| 1.0 + 0.3 * rng.gen_range(-1.0f64..1.0)).collect();
        let d0 = DyadicDataset::complete(n, v0).unwrap();
        let d1 = DyadicDataset::complete(n, v1).unwrap();
        let mut config = RbcConfig::new(KernelFamily::Epanechnikov, DOMAIN);
        config.b_draws = 400;
        config.grid_size = 9;
        let res = two_sample_test(&d0, &d1, &config, TestStat::Sup, 7).unwrap();
        assert!(res.reject, "tau = {}, critical = {}", res.tau, res.critical_value);
        assert!(res.bandwidth0 > 0.0 && res.bandwidth1 > 0.0);
    }

    #[test]
    fn test_stat_parsing() {
        assert_eq!("2".parse::<TestStat>().unwrap(), TestStat::L2);
        assert_eq!("sup".parse::<TestStat>().unwrap(), TestStat::Sup);
        assert!("3".parse::<TestStat>().is_err());
    }
}
