//! Covariance of the density estimate across grid points, and its repair
//! into a usable covariance function.
//!
//! `sigma_hat` evaluates, exactly as written,
//!
//! ```text
//! Σ̂(w,w') = (4/n²) Σ_i S_i(w) S_i(w')
//!          - 4/(n²(n-1)²) Σ_{i<j} k_h(W_ij,w) k_h(W_ij,w')
//!          - (4n-6)/(n(n-1)) f̂(w) f̂(w')
//! S_i(w)  = (1/(n-1)) Σ_{j≠i} k_h(W_ij,w)
//! ```
//!
//! where on incomplete networks every kernel evaluation is scaled by the
//! inverse present share (missing edges contribute zero, and the scaling
//! keeps the expression consistent with the present-pair-normalized
//! estimate). The result is symmetric by construction but not positive
//! semidefinite in finite samples.
//!
//! `psd_project` repairs it: among symmetric PSD matrices whose adjacent-
//! column differences respect the kernel smoothness budget
//! `4·C_k·C_L/(n h³) · |w'-w''|`, it finds one whose weighted sup deviation
//! from the input, `max |M-Σ̂|/√(Σ̂(w,w)+Σ̂(w',w'))`, is within a slack of
//! `min(1/(2n), ...)` of the best achievable. The solver is dependency-free:
//! Dykstra alternating projections (eigenvalue clipping against two-entry
//! slope slabs) builds feasible candidates, and a bisection over the
//! objective level with cyclic projections tightens the best one.

use crate::data::DyadicDataset;
use crate::error::{Error, Result};
use crate::estimator::EvaluationGrid;
use crate::kernels::{KernelSpec, LipschitzConstants};
use crate::par;
use nalgebra::DMatrix;

/// Raw (possibly indefinite) covariance estimate on a grid.
#[derive(Debug, Clone)]
pub struct CovMatrix {
    pub grid: EvaluationGrid,
    pub entries: DMatrix<f64>,
    pub n_nodes: usize,
    pub bandwidth: f64,
    pub present_share: f64,
}

impl CovMatrix {
    /// Wrap an externally built symmetric matrix (for tests and tooling).
    pub fn from_entries(
        grid: EvaluationGrid,
        entries: DMatrix<f64>,
        n_nodes: usize,
        bandwidth: f64,
    ) -> Result<Self> {
        let d = grid.len();
        if entries.nrows() != d || entries.ncols() != d {
            return Err(Error::Input(format!(
                "entries are {}x{} for a {d}-point grid",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("covariance entries must be finite".into()));
        }
        let scale = entries.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for i in 0..d {
            for j in (i + 1)..d {
                if (entries[(i, j)] - entries[(j, i)]).abs() > 1e-12 * (1.0 + scale) {
                    return Err(Error::Input(format!(
                        "entries not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self {
            grid,
            entries,
            n_nodes,
            bandwidth,
            present_share: 1.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.grid.len()
    }
}

/// Pairwise covariance estimator of the density estimate over the grid.
pub fn sigma_hat(
    dataset: &DyadicDataset,
    spec: &KernelSpec,
    grid: &EvaluationGrid,
) -> Result<CovMatrix> {
    let n = dataset.n();
    let d = grid.len();
    let n_present = dataset.n_present();
    if n_present == 0 {
        return Err(Error::DegenerateInput("no present pairs".into()));
    }
    let kernels = spec.kernels_on_grid(grid.points())?;
    let rho = dataset.present_share();
    let scale = 1.0 / rho;
    let pairs: Vec<(usize, usize, f64)> = dataset.present_pairs().collect();

    let nf = n as f64;
    let mut s_cols = vec![0.0f64; d * n]; // S_i sums, laid out [m*n + i]
    let mut pair_sum = vec![0.0f64; d];
    let mut middle = vec![0.0f64; d * d];
    let tri: Vec<(usize, usize)> = (0..d).flat_map(|m| (m..d).map(move |m2| (m, m2))).collect();

    const BLOCK: usize = 8192;
    for block in pairs.chunks(BLOCK) {
        let rows = par::map_indexed(block.len(), |r| {
            let v = block[r].2;
            kernels.iter().map(|k| k.eval(v) * scale).collect::<Vec<f64>>()
        });
        // per-grid-point accumulation; chunks are disjoint in m
        par::for_each_chunk_mut(&mut s_cols, n, |m, col| {
            for (r, &(i, j, _)) in block.iter().enumerate() {
                let k = rows[r][m];
                col[i] += k;
                col[j] += k;
            }
        });
        par::for_each_chunk_mut(&mut pair_sum, 1, |m, ps| {
            for row in &rows {
                ps[0] += row[m];
            }
        });
        let dots = par::map_indexed(tri.len(), |t| {
            let (m, m2) = tri[t];
            rows.iter().map(|row| row[m] * row[m2]).sum::<f64>()
        });
        for (t, &(m, m2)) in tri.iter().enumerate() {
            middle[m * d + m2] += dots[t];
        }
    }

    let fhat_pairs: Vec<f64> = pair_sum
        .iter()
        .map(|s| s * 2.0 / (nf * (nf - 1.0)))
        .collect();
    let c1 = 4.0 / (nf * nf * (nf - 1.0) * (nf - 1.0));
    let c2 = 4.0 / (nf * nf * (nf - 1.0) * (nf - 1.0));
    let c3 = (4.0 * nf - 6.0) / (nf * (nf - 1.0));

    let upper = par::map_indexed(tri.len(), |t| {
        let (m, m2) = tri[t];
        let (ca, cb) = (&s_cols[m * n..(m + 1) * n], &s_cols[m2 * n..(m2 + 1) * n]);
        let mut own = 0.0;
        for i in 0..n {
            own += ca[i] * cb[i];
        }
        // S_i carries a 1/(n-1) factor on each side
        c1 * own - c2 * middle[m * d + m2] - c3 * fhat_pairs[m] * fhat_pairs[m2]
    });
    let mut entries = DMatrix::zeros(d, d);
    for (t, &(m, m2)) in tri.iter().enumerate() {
        entries[(m, m2)] = upper[t];
        entries[(m2, m)] = upper[t];
    }
    Ok(CovMatrix {
        grid: grid.clone(),
        entries,
        n_nodes: n,
        bandwidth: spec.bandwidth(),
        present_share: rho,
    })
}

/// Options for [`psd_project`]; `ridge` adds `1e-12·trace/d` to the diagonal
/// before projecting (off by default, for near-singular normalizations).
#[derive(Debug, Clone, Copy, Default)]
pub struct PsdOptions {
    pub ridge: bool,
}

/// A repaired covariance matrix with its feasibility metadata.
#[derive(Debug, Clone)]
pub struct PsdCovMatrix {
    pub grid: EvaluationGrid,
    pub entries: DMatrix<f64>,
    /// Achieved weighted sup deviation from the input.
    pub objective: f64,
    /// Slope budget per unit grid distance: 4·C_k·C_L/(n·h³).
    pub lipschitz_bound: f64,
    /// Objectives of the internal candidates (clip-and-smooth, Dykstra, ...).
    pub candidate_objectives: Vec<f64>,
    /// Grid pairs whose normalization √(Σ̂(w,w)+Σ̂(w',w')) was nonpositive
    /// or below 1e-7, leaving them out of the objective; they remain
    /// subject to the constraints.
    pub excluded_pairs: usize,
    /// Total projection cycles spent.
    pub iterations: usize,
}

impl PsdCovMatrix {
    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.entries[(i, i)]).collect()
    }

    /// Independent feasibility certificate: symmetry, eigenvalue floor,
    /// and the slope constraint on every grid triple.
    pub fn verify(&self) -> Result<()> {
        let d = self.dim();
        let m = &self.entries;
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite entry in projected matrix".into()));
        }
        for i in 0..d {
            for j in 0..d {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 {
                    return Err(Error::Numerical(format!("asymmetry at ({i}, {j})")));
                }
            }
        }
        if min_eigenvalue(m) < -1e-8 {
            return Err(Error::Numerical(format!(
                "projected matrix has eigenvalue {} below -1e-8",
                min_eigenvalue(m)
            )));
        }
        let w = self.grid.points();
        let tol = 1e-9 * d as f64 + 1e-12;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let gap = self.lipschitz_bound * (w[j] - w[k]).abs();
                    if (m[(i, j)] - m[(i, k)]).abs() > gap + tol {
                        return Err(Error::Numerical(format!(
                            "slope constraint violated at ({i}, {j}, {k}): {} > {gap}",
                            (m[(i, j)] - m[(i, k)]).abs()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn symmetric_eigen(m: &DMatrix<f64>) -> (DMatrix<f64>, nalgebra::DVector<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);
    (eig.eigenvectors, eig.eigenvalues)
}

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let (_, vals) = symmetric_eigen(m);
    vals.iter().fold(f64::INFINITY, |a, &v| a.min(v))
}

/// Frobenius projection onto the PSD cone (symmetrize, clip eigenvalues).
pub(crate) fn eigen_clip(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (vecs, vals) = symmetric_eigen(m);
    let clipped = nalgebra::DVector::from_iterator(vals.len(), vals.iter().map(|v| v.max(0.0)));
    let scaled = &vecs * DMatrix::from_diagonal(&clipped);
    let out = scaled * vecs.transpose();
    // clean tiny asymmetry from the recomposition
    (&out + out.transpose()) * 0.5
}

/// Two-entry slope constraints |x[a] - x[b]| <= c, over rows and columns.
fn build_slabs(grid: &[f64], d: usize, bound: f64) -> Vec<(usize, usize, f64)> {
    let mut slabs = Vec::new();
    for i in 0..d {
        for j in 0..(d - 1) {
            let c = bound * (grid[j + 1] - grid[j]);
            slabs.push((i * d + j, i * d + j + 1, c)); // row direction
            slabs.push((j * d + i, (j + 1) * d + i, c)); // column direction
        }
    }
    slabs
}

fn slab_sweep(x: &mut DMatrix<f64>, slabs: &[(usize, usize, f64)]) {
    let data = x.as_mut_slice(); // column-major, but slabs are index pairs either way
    for &(a, b, c) in slabs {
        let diff = data[a] - data[b];
        if diff.abs() > c {
            let shift = 0.5 * (diff.abs() - c) * diff.signum();
            data[a] -= shift;
            data[b] += shift;
        }
    }
}

fn lip_residual(x: &DMatrix<f64>, slabs: &[(usize, usize, f64)]) -> f64 {
    let data = x.as_slice();
    slabs
        .iter()
        .fold(0.0f64, |acc, &(a, b, c)| acc.max((data[a] - data[b]).abs() - c))
}

struct Weighted<'a> {
    reference: &'a DMatrix<f64>,
    /// √(S_ii + S_jj) per entry; +inf marks pairs excluded from the objective.
    denom: DMatrix<f64>,
}

impl Weighted<'_> {
    fn objective(&self, m: &DMatrix<f64>) -> f64 {
        let d = m.nrows();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                let den = self.denom[(i, j)];
                if den.is_finite() {
                    worst = worst.max((m[(i, j)] - self.reference[(i, j)]).abs() / den);
                }
            }
        }
        worst
    }

    fn box_clamp(&self, m: &mut DMatrix<f64>, t: f64) {
        let d = m.nrows();
        for i in 0..d {
            for j in 0..d {
                let den = self.denom[(i, j)];
                if den.is_finite() {
                    let (lo, hi) = (
                        self.reference[(i, j)] - t * den,
                        self.reference[(i, j)] + t * den,
                    );
                    m[(i, j)] = m[(i, j)].clamp(lo, hi);
                }
            }
        }
    }
}

const LIP_TOL: f64 = 1e-9;

fn is_feasible(m: &DMatrix<f64>, slabs: &[(usize, usize, f64)]) -> bool {
    lip_residual(m, slabs) <= LIP_TOL && min_eigenvalue(m) >= -1e-8
}

/// Cyclic projections (optionally inside the weighted box at level `t`)
/// until the iterate is PSD with slope residual below `lip_tol`.
/// Returns the iterate and cycles used, or None if the budget runs out.
fn pocs(
    start: &DMatrix<f64>,
    weighted: &Weighted,
    slabs: &[(usize, usize, f64)],
    t: Option<f64>,
    box_tol: f64,
    max_cycles: usize,
) -> Option<(DMatrix<f64>, usize)> {
    let mut x = start.clone();
    let mut prev_change = f64::INFINITY;
    for cycle in 1..=max_cycles {
        let before = x.clone();
        if let Some(level) = t {
            weighted.box_clamp(&mut x, level);
        }
        slab_sweep(&mut x, slabs);
        x = eigen_clip(&x);
        // the iterate is exactly PSD here; only the other residuals matter
        let lip_ok = lip_residual(&x, slabs) <= LIP_TOL;
        let box_ok = t.map_or(true, |level| weighted.objective(&x) <= level + box_tol);
        if lip_ok && box_ok {
            return Some((x, cycle));
        }
        let change = (&x - &before).amax();
        if change < 1e-15 && prev_change < 1e-15 {
            return None; // stalled: the sets do not meet at this level
        }
        prev_change = change;
    }
    None
}

/// Dykstra's alternating projections onto the PSD cone and the slope slabs;
/// converges to the Frobenius-nearest point of the intersection.
fn dykstra(
    start: &DMatrix<f64>,
    slabs: &[(usize, usize, f64)],
    max_cycles: usize,
) -> (DMatrix<f64>, usize) {
    let d = start.nrows();
    let mut x = start.clone();
    let mut e_psd = DMatrix::<f64>::zeros(d, d);
    let mut e_slab = vec![(0.0f64, 0.0f64); slabs.len()];
    let mut cycles = 0;
    for cycle in 1..=max_cycles {
        cycles = cycle;
        let y = &x + &e_psd;
        x = eigen_clip(&y);
        e_psd = y - &x;
        if lip_residual(&x, slabs) <= LIP_TOL {
            break; // x is exactly PSD right after the clip
        }
        let data = x.as_mut_slice();
        for (s, &(a, b, c)) in slabs.iter().enumerate() {
            let (ea, eb) = e_slab[s];
            let (ya, yb) = (data[a] + ea, data[b] + eb);
            let diff = ya - yb;
            let (pa, pb) = if diff.abs() <= c {
                (ya, yb)
            } else {
                let shift = 0.5 * (diff.abs() - c) * diff.signum();
                (ya - shift, yb + shift)
            };
            e_slab[s] = (ya - pa, yb - pb);
            data[a] = pa;
            data[b] = pb;
        }
    }
    (x, cycles)
}

/// Repair `raw` into a PSD, slope-constrained covariance matrix that is
/// near-optimal in the weighted sup deviation. See the module docs.
pub fn psd_project(
    raw: &CovMatrix,
    constants: LipschitzConstants,
    n: usize,
    h: f64,
) -> Result<PsdCovMatrix> {
    psd_project_with(raw, constants, n, h, PsdOptions::default())
}

pub fn psd_project_with(
    raw: &CovMatrix,
    constants: LipschitzConstants,
    n: usize,
    h: f64,
    opts: PsdOptions,
) -> Result<PsdCovMatrix> {
    if n < 2 {
        return Err(Error::Input(format!("need at least 2 nodes, got {n}")));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Input(format!("bandwidth must be positive, got {h}")));
    }
    let d = raw.dim();
    let mut s = raw.entries.clone();
    if opts.ridge {
        let bump = 1e-12 * s.trace() / d as f64;
        for i in 0..d {
            s[(i, i)] += bump;
        }
    }

    // normalization weights from the (possibly ridged) input diagonal
    let mut excluded_pairs = 0usize;
    let mut denom = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let den2 = s[(i, i)] + s[(j, j)];
            let den = den2.max(0.0).sqrt();
            if den <= 1e-7 {
                if j >= i {
                    excluded_pairs += 1;
                }
                denom[(i, j)] = f64::INFINITY;
            } else {
                denom[(i, j)] = den;
            }
        }
    }
    let weighted = Weighted {
        reference: &s,
        denom,
    };

    let bound = 4.0 * constants.c_k * constants.c_l / (n as f64 * h * h * h);
    let slabs = build_slabs(raw.grid.points(), d, bound);

    let mut iterations = 0usize;
    if is_feasible(&s, &slabs) {
        return Ok(PsdCovMatrix {
            grid: raw.grid.clone(),
            entries: s,
            objective: 0.0,
            lipschitz_bound: bound,
            candidate_objectives: vec![0.0],
            excluded_pairs,
            iterations: 0,
        });
    }

    // candidate 1: eigenvalue clip, then smooth back into the slope polytope
    let mut candidates: Vec<(DMatrix<f64>, f64)> = Vec::new();
    let clipped = eigen_clip(&s);
    let smoothed = if lip_residual(&clipped, &slabs) <= LIP_TOL {
        Some((clipped, 1))
    } else {
        pocs(&clipped, &weighted, &slabs, None, f64::INFINITY, 500)
    };
    if let Some((m, used)) = smoothed {
        iterations += used;
        candidates.push((m.clone(), weighted.objective(&m)));
    }
    // candidate 2: Dykstra from the raw matrix
    let (dyk, used) = dykstra(&s, &slabs, 500);
    iterations += used;
    if is_feasible(&dyk, &slabs) {
        candidates.push((dyk.clone(), weighted.objective(&dyk)));
    }
    if candidates.is_empty() {
        return Err(Error::Numerical(
            "projection failed: no candidate reached the feasible set".into(),
        ));
    }
    candidates.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let candidate_objectives: Vec<f64> = candidates.iter().map(|c| c.1).collect();
    let (mut best, mut best_obj) = candidates.swap_remove(0);

    // bisection on the objective level; the optimality slack is 1/(2n),
    // tightened for tiny grids where exhaustive verification is feasible
    let refine_tol = if d <= 5 {
        (0.5 / n as f64).min(2e-5)
    } else {
        0.5 / n as f64
    };
    if best_obj > refine_tol {
        let (mut t_lo, mut t_hi) = (0.0f64, best_obj);
        let mut rounds = 0;
        while t_hi - t_lo > refine_tol && rounds < 60 {
            rounds += 1;
            let t = 0.5 * (t_lo + t_hi);
            match pocs(&best, &weighted, &slabs, Some(t), 0.1 * refine_tol, 400) {
                Some((m, used)) => {
                    iterations += used;
                    let o = weighted.objective(&m);
                    if o < t_hi && is_feasible(&m, &slabs) {
                        t_hi = o;
                        best = m;
                        best_obj = o;
                    } else {
                        t_lo = t;
                    }
                }
                None => {
                    iterations += 400;
                    t_lo = t;
                }
            }
        }
    }

    Ok(PsdCovMatrix {
        grid: raw.grid.clone(),
        entries: best,
        objective: best_obj,
        lipschitz_bound: bound,
        candidate_objectives,
        excluded_pairs,
        iterations,
    })
}
