//! Bandwidth selection.
//!
//! `rot_bandwidth` is the normal-reference rule of thumb on the pooled edge
//! values: `h = C(K) · min(σ̂, IQR/1.349) · N^{-1/5}` with `N = n(n-1)/2`
//! pairs and a fixed second-order constant per kernel family. It
//! deliberately ignores dyadic dependence; it is the selector the bias-robust
//! band pipeline starts from.
//!
//! `aimse_bandwidth` evaluates the asymptotic-IMSE-optimal rate
//! `h = [p!(p-1)! ∫fν ∫K² / (2 ∫(f⁽ᵖ⁾)²ν (∫uᵖK)²)]^{1/(2p+1)} N^{-1/(2p+1)}`
//! from user-supplied curves for the density, its p-th derivative, and a
//! weight function, all tabulated on one grid.

use crate::data::DyadicDataset;
use crate::error::{Error, Result};
use crate::kernels::{interior_constants, KernelFamily};
use crate::numeric::{quantile_type7, trapezoid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandwidthMethod {
    RuleOfThumb,
    Aimse,
    /// Supplied by the caller rather than selected from data.
    Fixed,
}

impl BandwidthMethod {
    pub fn name(self) -> &'static str {
        match self {
            BandwidthMethod::RuleOfThumb => "rule-of-thumb",
            BandwidthMethod::Aimse => "aimse",
            BandwidthMethod::Fixed => "fixed",
        }
    }
}

/// A selected bandwidth plus the pieces that produced it.
#[derive(Debug, Clone)]
pub struct BandwidthSelection {
    pub h: f64,
    pub method: BandwidthMethod,
    /// Family constant C(K) (rule of thumb) or the bracketed constant (AIMSE).
    pub constant: f64,
    /// min(σ̂, IQR/1.349) for the rule of thumb; 1 for AIMSE.
    pub scale: f64,
    /// Pair count N = n(n-1)/2 driving the rate.
    pub effective_pairs: usize,
}

impl BandwidthSelection {
    /// Wrap a caller-supplied bandwidth; constant and scale are not meaningful.
    pub fn fixed(h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Input(format!(
                "bandwidth must be positive and finite, got {h}"
            )));
        }
        Ok(Self {
            h,
            method: BandwidthMethod::Fixed,
            constant: f64::NAN,
            scale: f64::NAN,
            effective_pairs: 0,
        })
    }
}

/// Second-order rule-of-thumb constants. The uniform family has no published
/// constant here and is rejected.
fn rot_constant(family: KernelFamily) -> Result<f64> {
    match family {
        KernelFamily::Epanechnikov => Ok(2.435),
        KernelFamily::Triangular => Ok(2.576),
        KernelFamily::Uniform => Err(Error::Input(
            "no rule-of-thumb constant for the uniform family; use epanechnikov or triangular"
                .into(),
        )),
    }
}

/// Normal-reference rule-of-thumb bandwidth over the present edge values.
pub fn rot_bandwidth(dataset: &DyadicDataset, family: KernelFamily) -> Result<BandwidthSelection> {
    let constant = rot_constant(family)?;
    let mut vals: Vec<f64> = dataset.present_values().collect();
    if vals.len() < 2 {
        return Err(Error::DegenerateInput(format!(
            "need at least 2 present values, got {}",
            vals.len()
        )));
    }
    let m = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / m;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let iqr = quantile_type7(&vals, 0.75) - quantile_type7(&vals, 0.25);
    let scale = var.sqrt().min(iqr / 1.349);
    if scale <= 0.0 {
        return Err(Error::DegenerateInput(
            "edge values have zero dispersion; no data-driven bandwidth exists".into(),
        ));
    }
    let n = dataset.n();
    let effective_pairs = n * (n - 1) / 2;
    let h = constant * scale * (effective_pairs as f64).powf(-0.2);
    Ok(BandwidthSelection {
        h,
        method: BandwidthMethod::RuleOfThumb,
        constant,
        scale,
        effective_pairs,
    })
}

/// Asymptotic-IMSE bandwidth from tabulated curves on `grid`: the density
/// `f`, its p-th derivative `f_p`, and a non-negative weight `nu`.
pub fn aimse_bandwidth(
    grid: &[f64],
    f: &[f64],
    f_p: &[f64],
    nu: &[f64],
    family: KernelFamily,
    p: usize,
    n_nodes: usize,
) -> Result<BandwidthSelection> {
    if p < 2 || p % 2 != 0 {
        return Err(Error::Input(format!("order must be even and >= 2, got {p}")));
    }
    if n_nodes < 2 {
        return Err(Error::Input(format!("need at least 2 nodes, got {n_nodes}")));
    }
    let d = grid.len();
    if d < 2 || f.len() != d || f_p.len() != d || nu.len() != d {
        return Err(Error::Input("curves and grid must share a length >= 2".into()));
    }
    if nu.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Input("weight curve must be finite and non-negative".into()));
    }
    let fw: Vec<f64> = f.iter().zip(nu).map(|(a, b)| a * b).collect();
    let fpw: Vec<f64> = f_p.iter().zip(nu).map(|(a, b)| a * a * b).collect();
    let int_f = trapezoid(grid, &fw);
    let int_fp = trapezoid(grid, &fpw);
    if int_fp <= 0.0 {
        return Err(Error::Numerical(
            "flat density: ∫ (f^(p))² ν vanishes, the optimal bandwidth is unbounded".into(),
        ));
    }
    let (l2, mu_p) = interior_constants(family, p)?;
    if mu_p.abs() < 1e-14 {
        return Err(Error::Numerical("kernel top moment vanishes".into()));
    }
    let fact = |k: usize| (1..=k).product::<usize>() as f64;
    let constant =
        (fact(p) * fact(p - 1) * int_f * l2 / (2.0 * int_fp * mu_p * mu_p)).powf(1.0 / (2 * p + 1) as f64);
    let effective_pairs = n_nodes * (n_nodes - 1) / 2;
    let h = constant * (effective_pairs as f64).powf(-1.0 / (2 * p + 1) as f64);
    Ok(BandwidthSelection {
        h,
        method: BandwidthMethod::Aimse,
        constant,
        scale: 1.0,
        effective_pairs,
    })
}
