//! Boundary-corrected kernels on a compact support.
//!
//! A kernel of order `p` centered at `w` with bandwidth `h` integrates to one,
//! kills moments 1..p-1, and lives on `[w-h, w+h] ∩ [a, b]`. Near the edges of
//! the domain the plain rescaled kernel loses these properties, so each
//! evaluation point gets a polynomial correction: the kernel is
//! `h⁻¹ K(u) (c₀ + c₁u + ... + c_{p-1}u^{p-1})` with `u = (s-w)/h`, and the
//! coefficients solve the p×p truncated-moment system `M c = e₁`,
//! `M[r][j] = ∫ u^{r+j} K(u) du` over the truncated rescaled support.
//!
//! All moment integrals are polynomials integrated in closed form, so the
//! moment ladder holds to solver precision, not quadrature precision.
//! Coefficient solutions depend on `w` only through the truncation geometry,
//! and are memoized per spec: every interior point shares one solution.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

/// Base (second-order, interior) kernel shapes on [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    Epanechnikov,
    Triangular,
    Uniform,
}

impl KernelFamily {
    /// Base kernel value K(u); zero outside [-1, 1].
    pub fn base(self, u: f64) -> f64 {
        if !(-1.0..=1.0).contains(&u) {
            return 0.0;
        }
        match self {
            KernelFamily::Epanechnikov => 0.75 * (1.0 - u * u),
            KernelFamily::Triangular => 1.0 - u.abs(),
            KernelFamily::Uniform => 0.5,
        }
    }

    /// Polynomial pieces (lo, hi, ascending coefficients) of the base kernel.
    fn pieces(self) -> &'static [(f64, f64, &'static [f64])] {
        match self {
            KernelFamily::Epanechnikov => &[(-1.0, 1.0, &[0.75, 0.0, -0.75])],
            KernelFamily::Triangular => &[(-1.0, 0.0, &[1.0, 1.0]), (0.0, 1.0, &[1.0, -1.0])],
            KernelFamily::Uniform => &[(-1.0, 1.0, &[0.5])],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Epanechnikov => "epanechnikov",
            KernelFamily::Triangular => "triangular",
            KernelFamily::Uniform => "uniform",
        }
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "epanechnikov" | "epa" => Ok(KernelFamily::Epanechnikov),
            "triangular" | "tri" => Ok(KernelFamily::Triangular),
            "uniform" | "uni" => Ok(KernelFamily::Uniform),
            other => Err(Error::Input(format!("unknown kernel family {other:?}"))),
        }
    }
}

/// ∫ u^q K(u) du over [lo, hi] ∩ [-1, 1], exactly.
fn truncated_moment(family: KernelFamily, q: usize, lo: f64, hi: f64) -> f64 {
    let mut acc = 0.0;
    for &(plo, phi, coeffs) in family.pieces() {
        let a = lo.max(plo);
        let b = hi.min(phi);
        if b <= a {
            continue;
        }
        for (k, &c) in coeffs.iter().enumerate() {
            let e = (q + k + 1) as f64;
            acc += c / e * (b.powf(e) - a.powf(e));
        }
    }
    acc
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn integrate_poly(coeffs: &[f64], a: f64, b: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(k, &c)| c / (k + 1) as f64 * (b.powi(k as i32 + 1) - a.powi(k as i32 + 1)))
        .sum()
}

/// (∫K², ∫uᵖK) of the interior order-p kernel on [-1, 1], exactly.
/// These are the kernel constants entering the asymptotic-IMSE bandwidth.
pub(crate) fn interior_constants(family: KernelFamily, p: usize) -> Result<(f64, f64)> {
    let mut moments = vec![0.0; 3 * p + 1];
    for (q, m) in moments.iter_mut().enumerate() {
        *m = truncated_moment(family, q, -1.0, 1.0);
    }
    let m = DMatrix::from_fn(p, p, |r, j| moments[r + j]);
    let mut rhs = DVector::zeros(p);
    rhs[0] = 1.0;
    let c = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::KernelConstruction("singular interior moment system".into()))?;
    let coeffs: Vec<f64> = c.iter().copied().collect();
    let mu_p: f64 = coeffs.iter().enumerate().map(|(j, &cj)| cj * moments[p + j]).sum();
    let mut l2 = 0.0;
    for &(lo, hi, piece) in family.pieces() {
        let corrected = convolve(piece, &coeffs);
        l2 += integrate_poly(&convolve(&corrected, &corrected), lo, hi);
    }
    Ok((l2, mu_p))
}

/// Kernel configuration: family, order, bandwidth, and the estimation domain.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    family: KernelFamily,
    p: usize,
    h: f64,
    domain: (f64, f64),
    // coefficient memo keyed by truncation geometry (bit patterns of the
    // rescaled support endpoints); clones share it
    memo: Arc<RwLock<HashMap<(u64, u64), Arc<Vec<f64>>>>>,
    lipschitz: Arc<OnceLock<LipschitzConstants>>,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, p: usize, h: f64, domain: (f64, f64)) -> Result<Self> {
        if p < 2 || p % 2 != 0 {
            return Err(Error::Input(format!("kernel order must be even and >= 2, got {p}")));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Input(format!("bandwidth must be positive, got {h}")));
        }
        if !(domain.0.is_finite() && domain.1.is_finite() && domain.0 < domain.1) {
            return Err(Error::Input(format!(
                "domain must be a finite interval, got [{}, {}]",
                domain.0, domain.1
            )));
        }
        Ok(Self {
            family,
            p,
            h,
            domain,
            memo: Arc::new(RwLock::new(HashMap::new())),
            lipschitz: Arc::new(OnceLock::new()),
        })
    }

    /// Same family/order/domain at a different bandwidth (fresh caches).
    pub fn with_bandwidth(&self, h: f64) -> Result<Self> {
        Self::new(self.family, self.p, h, self.domain)
    }

    /// Same bandwidth/domain at a different order (fresh caches).
    pub fn with_order(&self, p: usize) -> Result<Self> {
        Self::new(self.family, p, self.h, self.domain)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn order(&self) -> usize {
        self.p
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    /// Rescaled support [max(-1,(a-w)/h), min(1,(b-w)/h)] of the kernel at w.
    fn u_range(&self, w: f64) -> (f64, f64) {
        let lo = ((self.domain.0 - w) / self.h).max(-1.0);
        let hi = ((self.domain.1 - w) / self.h).min(1.0);
        (lo, hi)
    }

    fn coefficients(&self, lo: f64, hi: f64) -> Result<Arc<Vec<f64>>> {
        let key = (lo.to_bits(), hi.to_bits());
        if let Some(c) = self.memo.read().expect("kernel memo poisoned").get(&key) {
            return Ok(Arc::clone(c));
        }
        let p = self.p;
        let mut moments = vec![0.0; 2 * p - 1];
        for (q, m) in moments.iter_mut().enumerate() {
            *m = truncated_moment(self.family, q, lo, hi);
        }
        let m = DMatrix::from_fn(p, p, |r, j| moments[r + j]);
        let mut rhs = DVector::zeros(p);
        rhs[0] = 1.0;
        let solved = m.lu().solve(&rhs).ok_or_else(|| {
            Error::KernelConstruction(format!(
                "singular moment system on rescaled support [{lo}, {hi}]"
            ))
        })?;
        let coeffs = Arc::new(solved.iter().copied().collect::<Vec<f64>>());
        self.memo
            .write()
            .expect("kernel memo poisoned")
            .insert(key, Arc::clone(&coeffs));
        Ok(coeffs)
    }

    /// Boundary-corrected kernel centered at `w`.
    pub fn boundary_kernel(&self, w: f64) -> Result<BoundaryKernel> {
        if !(self.domain.0..=self.domain.1).contains(&w) {
            return Err(Error::Input(format!(
                "evaluation point {w} outside domain [{}, {}]",
                self.domain.0, self.domain.1
            )));
        }
        let (lo, hi) = self.u_range(w);
        let coefficients = self.coefficients(lo, hi)?;
        Ok(BoundaryKernel {
            center: w,
            support: (w + lo * self.h, w + hi * self.h),
            u_range: (lo, hi),
            family: self.family,
            inv_h: 1.0 / self.h,
            coefficients,
        })
    }

    /// Kernels for a whole grid of evaluation points.
    pub fn kernels_on_grid(&self, grid: &[f64]) -> Result<Vec<BoundaryKernel>> {
        grid.iter().map(|&w| self.boundary_kernel(w)).collect()
    }

    /// Smoothness constants from a finite-difference sweep of `w -> k_h(s, w)`
    /// over `sweep_grid` (both s and w range over it). The grid must be dense
    /// relative to h; use [`KernelSpec::default_sweep_grid`] when in doubt.
    /// Cached after the first call.
    pub fn lipschitz_constants(&self, sweep_grid: &[f64]) -> Result<LipschitzConstants> {
        if let Some(c) = self.lipschitz.get() {
            return Ok(*c);
        }
        if sweep_grid.len() < 2 {
            return Err(Error::Input("sweep grid needs at least 2 points".into()));
        }
        let mut max_slope: f64 = 0.0;
        let mut prev = self.boundary_kernel(sweep_grid[0])?;
        for win in sweep_grid.windows(2) {
            let (w0, w1) = (win[0], win[1]);
            let cur = self.boundary_kernel(w1)?;
            let dw = w1 - w0;
            if dw <= 0.0 {
                return Err(Error::Input("sweep grid must be strictly increasing".into()));
            }
            // only s near either center can see a change
            let s_lo = prev.support.0.min(cur.support.0) - dw;
            let s_hi = prev.support.1.max(cur.support.1) + dw;
            for &s in sweep_grid {
                if s < s_lo || s > s_hi {
                    continue;
                }
                let slope = (cur.eval(s) - prev.eval(s)).abs() / dw;
                max_slope = max_slope.max(slope);
            }
            prev = cur;
        }
        let c_l = self.h * self.h * max_slope;
        let c_k = 2.0 * c_l + 1.0 + 1.0 / (self.domain.1 - self.domain.0);
        let out = LipschitzConstants { c_l, c_k };
        let _ = self.lipschitz.set(out);
        Ok(out)
    }

    /// Evenly spaced sweep grid with at least 200 points per bandwidth length.
    pub fn default_sweep_grid(&self) -> Vec<f64> {
        let (a, b) = self.domain;
        let steps = (((b - a) / self.h * 200.0).ceil() as usize).clamp(200, 400_000);
        (0..=steps)
            .map(|k| a + (b - a) * k as f64 / steps as f64)
            .collect()
    }
}

/// A constructed kernel at one evaluation point.
#[derive(Debug, Clone)]
pub struct BoundaryKernel {
    pub center: f64,
    /// Effective support [w-h, w+h] ∩ [a, b] in data space.
    pub support: (f64, f64),
    u_range: (f64, f64),
    family: KernelFamily,
    inv_h: f64,
    coefficients: Arc<Vec<f64>>,
}

impl BoundaryKernel {
    /// Correction polynomial coefficients, ascending in u.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// k_h(s, w): zero outside the effective support.
    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        let u = (s - self.center) * self.inv_h;
        if u < self.u_range.0 || u > self.u_range.1 {
            return 0.0;
        }
        // Horner for the correction polynomial
        let mut poly = 0.0;
        for &c in self.coefficients.iter().rev() {
            poly = poly * u + c;
        }
        self.inv_h * self.family.base(u) * poly
    }

    /// Exact r-th local moment ∫ (s-w)^r k_h(s, w) ds over the support.
    pub fn moment(&self, spec: &KernelSpec, r: usize) -> Result<f64> {
        if r > 2 * spec.order() {
            return Err(Error::Input(format!(
                "moment order {r} exceeds 2p = {}",
                2 * spec.order()
            )));
        }
        let (lo, hi) = self.u_range;
        let mut acc = 0.0;
        for (j, &c) in self.coefficients.iter().enumerate() {
            acc += c * truncated_moment(self.family, r + j, lo, hi);
        }
        Ok(spec.bandwidth().powi(r as i32) * acc)
    }
}

/// Finite-difference smoothness constants of a kernel spec.
///
/// `c_l` bounds h² times the slope of `w -> k_h(s, w)`; `c_k = 2 c_l + 1 +
/// 1/|W|` is the constant entering the covariance repair's slope budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzConstants {
    pub c_l: f64,
    pub c_k: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::integrate_gl64;

    const DOMAIN: (f64, f64) = (-2.0, 2.0);

    /// Independent quadrature route for moments: integrate the evaluated
    /// kernel itself, splitting at the correction pieces' breakpoints.
    fn moment_by_quadrature(k: &BoundaryKernel, h: f64, r: usize) -> f64 {
        let (lo, hi) = k.support;
        let mid = k.center.clamp(lo, hi); // triangular base has a crease at u=0
        let f = |s: f64| (s - k.center).powi(r as i32) * k.eval(s);
        integrate_gl64(lo, mid, f) + integrate_gl64(mid, hi, f) + 0.0 * h
    }

    #[test]
    fn interior_second_order_needs_no_correction() {
        for family in [
            KernelFamily::Epanechnikov,
            KernelFamily::Triangular,
            KernelFamily::Uniform,
        ] {
            let spec = KernelSpec::new(family, 2, 0.5, DOMAIN).unwrap();
            let k = spec.boundary_kernel(0.0).unwrap();
            assert!((k.coefficients()[0] - 1.0).abs() < 1e-12);
            assert!(k.coefficients()[1].abs() < 1e-12);
            // matches the plain rescaled base kernel
            for s in [-0.49, -0.2, 0.0, 0.13, 0.5] {
                let u = s / 0.5;
                assert!((k.eval(s) - family.base(u) / 0.5).abs() < 1e-12);
            }
            assert_eq!(k.eval(0.51), 0.0);
            assert_eq!(k.eval(-3.0), 0.0);
        }
    }

    #[test]
    fn boundary_coefficients_epanechnikov_hand_solved() {
        // at w = a the rescaled support is [0, 1]; the 2x2 moment system has
        // the exact solution c = (128/19, -240/19)
        let spec = KernelSpec::new(KernelFamily::Epanechnikov, 2, 0.5, DOMAIN).unwrap();
        let k = spec.boundary_kernel(-2.0).unwrap();
        assert!((k.coefficients()[0] - 128.0 / 19.0).abs() < 1e-12);
        assert!((k.coefficients()[1] + 240.0 / 19.0).abs() < 1e-12);
        assert_eq!(k.support, (-2.0, -1.5));
    }

    #[test]
    fn interior_fourth_order_epanechnikov_hand_solved() {
        // symmetric support kills odd coefficients; the even pair solves a
        // 2x2 system with solution (15/8, -35/8)
        let spec = KernelSpec::new(KernelFamily::Epanechnikov, 4, 0.25, DOMAIN).unwrap();
        let k = spec.boundary_kernel(0.0).unwrap();
        let c = k.coefficients();
        assert!((c[0] - 15.0 / 8.0).abs() < 1e-12);
        assert!(c[1].abs() < 1e-12);
        assert!((c[2] + 35.0 / 8.0).abs() < 1e-12);
        assert!(c[3].abs() < 1e-12);
    }

    #[test]
    fn moment_ladder_holds_everywhere() {
        // order r: exactly 1 at r=0, 0 for 1..p-1, and nonzero somewhere at p
        for family in [
            KernelFamily::Epanechnikov,
            KernelFamily::Triangular,
            KernelFamily::Uniform,
        ] {
            for p in [2usize, 4] {
                for h in [0.1, 0.5] {
                    let spec = KernelSpec::new(family, p, h, DOMAIN).unwrap();
                    let mut top_moment_seen: f64 = 0.0;
                    for step in 0..=50 {
                        let w = -2.0 + 4.0 * step as f64 / 50.0;
                        let k = spec.boundary_kernel(w).unwrap();
                        for r in 0..p {
                            let exact = k.moment(&spec, r).unwrap();
                            let target = if r == 0 { 1.0 } else { 0.0 };
                            assert!(
                                (exact - target).abs() < 1e-9,
                                "{family:?} p={p} h={h} w={w} r={r}: {exact}"
                            );
                            let quad = moment_by_quadrature(&k, h, r);
                            assert!(
                                (exact - quad).abs() < 1e-9,
                                "{family:?} p={p} h={h} w={w} r={r}: exact {exact} quad {quad}"
                            );
                        }
                        top_moment_seen = top_moment_seen.max(k.moment(&spec, p).unwrap().abs());
                    }
                    assert!(
                        top_moment_seen > 1e-6,
                        "{family:?} p={p} h={h}: order-p moment vanished everywhere"
                    );
                }
            }
        }
    }

    #[test]
    fn interior_epanechnikov_second_moment_closed_form() {
        for h in [0.2, 0.5] {
            let spec = KernelSpec::new(KernelFamily::Epanechnikov, 2, h, DOMAIN).unwrap();
            let k = spec.boundary_kernel(0.0).unwrap();
            assert!((k.moment(&spec, 2).unwrap() - h * h / 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn interior_points_share_one_memoized_solution() {
        let spec = KernelSpec::new(KernelFamily::Triangular, 2, 0.25, DOMAIN).unwrap();
        let k1 = spec.boundary_kernel(-0.3).unwrap();
        let k2 = spec.boundary_kernel(1.1).unwrap();
        assert!(Arc::ptr_eq(&k1.coefficients, &k2.coefficients));
        let kb = spec.boundary_kernel(-1.9).unwrap();
        assert!(!Arc::ptr_eq(&k1.coefficients, &kb.coefficients));
        // clones share the memo
        let spec2 = spec.clone();
        let k3 = spec2.boundary_kernel(0.8).unwrap();
        assert!(Arc::ptr_eq(&k1.coefficients, &k3.coefficients));
    }

    #[test]
    fn lipschitz_constant_matches_derivative_bound_interior() {
        // away from the domain edges the correction is inactive and
        // |d/dw k_h(s,w)| = |K'(u)|/h² <= 1.5/h² for Epanechnikov, so a sweep
        // restricted to interior points must land on c_l = 1.5
        let h = 0.4;
        let spec = KernelSpec::new(KernelFamily::Epanechnikov, 2, h, DOMAIN).unwrap();
        let interior: Vec<f64> = {
            let (a, b) = (DOMAIN.0 + 2.0 * h, DOMAIN.1 - 2.0 * h);
            let steps = ((b - a) / h * 220.0) as usize;
            (0..=steps).map(|k| a + (b - a) * k as f64 / steps as f64).collect()
        };
        let c = spec.lipschitz_constants(&interior).unwrap();
        assert!((c.c_l - 1.5).abs() < 0.05, "c_l = {}", c.c_l);
        assert!((c.c_k - (2.0 * c.c_l + 1.0 + 0.25)).abs() < 1e-12);
        // cached: a second call (even with another grid) returns the stored value
        let again = spec.lipschitz_constants(&spec.default_sweep_grid()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn lipschitz_constant_boundary_dominates_and_is_stable() {
        // over the full domain the boundary-corrected region sets the
        // constant; it must exceed the interior bound and be stable under
        // sweep-grid refinement
        let h = 0.4;
        let coarse = {
            let spec = KernelSpec::new(KernelFamily::Epanechnikov, 2, h, DOMAIN).unwrap();
            spec.lipschitz_constants(&spec.default_sweep_grid()).unwrap()
        };
        let fine = {
            let spec = KernelSpec::new(KernelFamily::Epanechnikov, 2, h, DOMAIN).unwrap();
            let (a, b) = DOMAIN;
            let steps = ((b - a) / h * 450.0) as usize;
            let grid: Vec<f64> =
                (0..=steps).map(|k| a + (b - a) * k as f64 / steps as f64).collect();
            spec.lipschitz_constants(&grid).unwrap()
        };
        assert!(coarse.c_l > 1.5);
        assert!(
            (coarse.c_l - fine.c_l).abs() / fine.c_l < 0.05,
            "coarse {} vs fine {}",
            coarse.c_l,
            fine.c_l
        );
    }

    #[test]
    fn spec_validation() {
        assert!(KernelSpec::new(KernelFamily::Uniform, 3, 0.1, DOMAIN).is_err());
        assert!(KernelSpec::new(KernelFamily::Uniform, 0, 0.1, DOMAIN).is_err());
        assert!(KernelSpec::new(KernelFamily::Uniform, 2, 0.0, DOMAIN).is_err());
        assert!(KernelSpec::new(KernelFamily::Uniform, 2, 0.1, (1.0, 1.0)).is_err());
        let spec = KernelSpec::new(KernelFamily::Uniform, 2, 0.1, DOMAIN).unwrap();
        assert!(spec.boundary_kernel(2.5).is_err());
    }

    #[test]
    fn bandwidth_larger_than_domain_still_normalizes() {
        let spec = KernelSpec::new(KernelFamily::Epanechnikov, 2, 10.0, DOMAIN).unwrap();
        for w in [-2.0, -0.7, 0.0, 1.3, 2.0] {
            let k = spec.boundary_kernel(w).unwrap();
            assert!((k.moment(&spec, 0).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn interior_constants_match_quadrature_and_hand_values() {
        // second order: plain base kernels
        let (l2, mu2) = interior_constants(KernelFamily::Epanechnikov, 2).unwrap();
        assert!((l2 - 0.6).abs() < 1e-12 && (mu2 - 0.2).abs() < 1e-12);
        let (l2, mu2) = interior_constants(KernelFamily::Triangular, 2).unwrap();
        assert!((l2 - 2.0 / 3.0).abs() < 1e-12 && (mu2 - 1.0 / 6.0).abs() < 1e-12);
        let (l2, mu2) = interior_constants(KernelFamily::Uniform, 2).unwrap();
        assert!((l2 - 0.5).abs() < 1e-12 && (mu2 - 1.0 / 3.0).abs() < 1e-12);
        // fourth order Epanechnikov: 0.75(1-u²)(15/8 - 35/8 u²)
        let (l2, mu4) = interior_constants(KernelFamily::Epanechnikov, 4).unwrap();
        assert!((l2 - 1.25).abs() < 1e-12, "l2 = {l2}");
        assert!((mu4 + 1.0 / 21.0).abs() < 1e-12, "mu4 = {mu4}");
        // quadrature cross-check for a non-hand-solved case
        let (l2, mu4) = interior_constants(KernelFamily::Triangular, 4).unwrap();
        let spec = KernelSpec::new(KernelFamily::Triangular, 4, 1.0, (-1.0, 1.0)).unwrap();
        let k = spec.boundary_kernel(0.0).unwrap();
        let q_l2 = integrate_gl64(-1.0, 0.0, |u| k.eval(u) * k.eval(u))
            + integrate_gl64(0.0, 1.0, |u| k.eval(u) * k.eval(u));
        let q_mu4 = k.moment(&spec, 4).unwrap();
        assert!((l2 - q_l2).abs() < 1e-10, "{l2} vs {q_l2}");
        assert!((mu4 - q_mu4).abs() < 1e-12);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn unit_mass_and_finite_everywhere(
                w in -2.0f64..=2.0,
                h in 0.05f64..2.0,
                fam in prop_oneof![
                    Just(KernelFamily::Epanechnikov),
                    Just(KernelFamily::Triangular),
                    Just(KernelFamily::Uniform)
                ],
                p in prop_oneof![Just(2usize), Just(4usize)],
            ) {
                let spec = KernelSpec::new(fam, p, h, DOMAIN).unwrap();
                let k = spec.boundary_kernel(w).unwrap();
                prop_assert!((k.moment(&spec, 0).unwrap() - 1.0).abs() < 1e-8);
                for step in 0..40 {
                    let s = -2.0 + 4.0 * step as f64 / 39.0;
                    prop_assert!(k.eval(s).is_finite());
                }
            }
        }
    }
}
