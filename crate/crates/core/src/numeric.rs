//! Small numeric utilities shared across modules: the standard normal
//! density/cdf/quantile, Gauss-Legendre rules, sample quantiles, grid sums,
//! and the seed-to-substream map that keeps parallel runs reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};
use std::sync::OnceLock;

pub(crate) const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

pub(crate) fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

fn std_normal() -> &'static Normal {
    static N: OnceLock<Normal> = OnceLock::new();
    N.get_or_init(|| Normal::new(0.0, 1.0).expect("standard normal"))
}

pub(crate) fn normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

pub(crate) fn normal_quantile(p: f64) -> f64 {
    // one Newton step tightens the library's rational approximation from
    // ~1e-9 to machine precision
    let x = std_normal().inverse_cdf(p);
    let pdf = normal_pdf(x);
    if pdf > 0.0 {
        x - (normal_cdf(x) - p) / pdf
    } else {
        x
    }
}

/// Independent, reproducible substream for the `index`-th unit of work under a
/// run-level seed. ChaCha streams with a shared key are independent by
/// construction, so results do not depend on how work is scheduled.
pub(crate) fn substream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1],
/// by Newton iteration on the Legendre recurrence.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0; // P_j(z) running value
            let mut p1 = 0.0; // P_{j-1}(z)
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j as f64 + 1.0);
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// The shared 64-point rule used by the quadrature oracles.
pub(crate) fn gauss_legendre_64() -> &'static (Vec<f64>, Vec<f64>) {
    static GL: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    GL.get_or_init(|| gauss_legendre(64))
}

/// ∫ f over [a, b] with the 64-point rule mapped onto the interval.
pub(crate) fn integrate_gl64(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (nodes, weights) = gauss_legendre_64();
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        acc += w * f(c + r * x);
    }
    acc * r
}

/// Linear-interpolation sample quantile (the spreadsheet/R default), on an
/// already sorted slice.
pub(crate) fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let m = sorted.len();
    assert!(m > 0 && (0.0..=1.0).contains(&p));
    if m == 1 {
        return sorted[0];
    }
    let k = (m as f64 - 1.0) * p;
    let lo = k.floor() as usize;
    let hi = (lo + 1).min(m - 1);
    sorted[lo] + (k - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Trapezoid integral of tabulated values on an increasing grid.
pub(crate) fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    assert_eq!(grid.len(), values.len());
    let mut acc = 0.0;
    for i in 1..grid.len() {
        acc += 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        // An n-point rule is exact through degree 2n-1.
        for n in [2usize, 5, 16, 64] {
            let (nodes, weights) = gauss_legendre(n);
            assert!((weights.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            let deg = 2 * n - 1;
            let approx: f64 = nodes
                .iter()
                .zip(&weights)
                .map(|(x, w)| w * x.powi(deg as i32 - 1))
                .sum();
            // ∫ x^(deg-1) over [-1,1]; deg-1 is even
            let exact = 2.0 / deg as f64;
            assert!(
                (approx - exact).abs() < 1e-12,
                "n={n} deg={} got {approx} want {exact}",
                deg - 1
            );
        }
    }

    #[test]
    fn gl64_gaussian_mass() {
        let total = integrate_gl64(-8.0, 8.0, normal_pdf);
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quantile_matches_hand_values() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_type7(&xs, 0.5), 2.5);
        assert_eq!(quantile_type7(&xs, 0.0), 1.0);
        assert_eq!(quantile_type7(&xs, 1.0), 4.0);
        assert!((quantile_type7(&xs, 0.25) - 1.75).abs() < 1e-15);
    }

    #[test]
    fn normal_quantile_round_trip() {
        for p in [0.025, 0.5, 0.975, 0.997] {
            assert!((normal_cdf(normal_quantile(p)) - p).abs() < 1e-12);
        }
        assert!((normal_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-9);
    }

    #[test]
    fn substreams_differ_and_reproduce() {
        use rand::RngCore;
        let mut a = substream_rng(7, 0);
        let mut b = substream_rng(7, 1);
        let mut a2 = substream_rng(7, 0);
        assert_ne!(a.next_u64(), b.next_u64());
        let mut a = substream_rng(7, 0);
        assert_eq!(a.next_u64(), a2.next_u64());
    }
}
