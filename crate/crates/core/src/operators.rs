//! Finite-difference realizations of the Dirichlet Laplacian, the
//! clamped bi-Laplacian and the damped-plate block operator
//! `A_η = [[0, −I], [ηI + Δ², −ρΔ]]` on intervals and rectangles;
//! spectra, resolvent ray scans in discrete weighted graph norms,
//! Rademacher bound estimation, and the perturbation defect of the
//! operator mapped through a boundary-straightening pullback.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::PullbackMap;
use crate::grid::{tensor_derivative, Grid1D, GridTensor};
use crate::parallel::{map_range, map_slice};
use crate::pencil::{damping_angle, DampingParam};
use crate::weights::weighted_sobolev_norm_2d;

/// Interior-node grids the difference operators are assembled on.
/// 1D: `n` nodes at `ih`, `h = L/(n+1)`; 2D: tensor product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OpGrid {
    Interval { n: usize, length: f64 },
    Rectangle { nx: usize, ny: usize, lx: f64, ly: f64 },
}

impl OpGrid {
    pub fn interval(n: usize, length: f64) -> Self {
        OpGrid::Interval { n, length }
    }

    pub fn square(n: usize, length: f64) -> Self {
        OpGrid::Rectangle { nx: n, ny: n, lx: length, ly: length }
    }

    /// Number of interior degrees of freedom.
    pub fn dof(&self) -> usize {
        match *self {
            OpGrid::Interval { n, .. } => n,
            OpGrid::Rectangle { nx, ny, .. } => nx * ny,
        }
    }

    /// Interior node coordinates (1D) resp. distance to the boundary
    /// of the box per node (2D), used by the weighted graph norms.
    pub fn boundary_distance(&self) -> Vec<f64> {
        match *self {
            OpGrid::Interval { n, length } => {
                let h = length / (n + 1) as f64;
                (1..=n).map(|i| (i as f64 * h).min(length - i as f64 * h)).collect()
            }
            OpGrid::Rectangle { nx, ny, lx, ly } => {
                let hx = lx / (nx + 1) as f64;
                let hy = ly / (ny + 1) as f64;
                let mut out = Vec::with_capacity(nx * ny);
                for i in 1..=nx {
                    for j in 1..=ny {
                        let x = i as f64 * hx;
                        let y = j as f64 * hy;
                        out.push((x.min(lx - x)).min(y.min(ly - y)));
                    }
                }
                out
            }
        }
    }
}

/// Triplet-form sparse matrix; dense conversion for desk-scale solves.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    pub dim: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseOperator {
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, j, a) in &self.entries {
            out[i] += a * v[j];
        }
        out
    }

    /// `‖M − Mᵀ‖_∞` of the assembled matrix.
    pub fn symmetry_defect(&self) -> f64 {
        let d = self.to_dense();
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..i {
                worst = worst.max((d[(i, j)] - d[(j, i)]).abs());
            }
        }
        worst
    }
}

/// Tridiagonal second-derivative matrix with Dirichlet ghosts.
fn d2_matrix(n: usize, h: f64) -> Vec<(usize, usize, f64)> {
    let inv_h2 = 1.0 / (h * h);
    let mut e = Vec::with_capacity(3 * n);
    for i in 0..n {
        e.push((i, i, -2.0 * inv_h2));
        if i > 0 {
            e.push((i, i - 1, inv_h2));
        }
        if i + 1 < n {
            e.push((i, i + 1, inv_h2));
        }
    }
    e
}

/// Five-point fourth-derivative matrix with clamped ghosts: boundary
/// value `u₀ = 0` and the reflection `u_{−1} = u₁` from the centered
/// zero normal derivative.
fn d4_matrix_clamped(n: usize, h: f64) -> Vec<(usize, usize, f64)> {
    let inv_h4 = 1.0 / (h * h * h * h);
    let mut e = Vec::new();
    for i in 0..n {
        let mut push = |j: isize, v: f64| {
            if j >= 0 && (j as usize) < n {
                e.push((i, j as usize, v * inv_h4));
            }
        };
        let ii = i as isize;
        // Stencil (1, -4, 6, -4, 1); ghosts folded in at the ends.
        if i == 0 {
            // u_{-1} = u_1 adds 1 to the +1 neighbor; u_0 = 0 drops.
            push(ii, 6.0 + 1.0);
            push(ii + 1, -4.0);
            push(ii + 2, 1.0);
        } else if i == n - 1 {
            push(ii, 6.0 + 1.0);
            push(ii - 1, -4.0);
            push(ii - 2, 1.0);
        } else {
            push(ii - 2, 1.0);
            push(ii - 1, -4.0);
            push(ii, 6.0);
            push(ii + 1, -4.0);
            push(ii + 2, 1.0);
        }
    }
    e
}

/// Kronecker product of triplet lists: `(A ⊗ B)` on an `na·nb` grid
/// with row-major (x-major) flattening.
fn kron(a: &[(usize, usize, f64)], nb: usize, b: &[(usize, usize, f64)]) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &(ia, ja, va) in a {
        for &(ib, jb, vb) in b {
            out.push((ia * nb + ib, ja * nb + jb, va * vb));
        }
    }
    out
}

fn identity_triplets(n: usize) -> Vec<(usize, usize, f64)> {
    (0..n).map(|i| (i, i, 1.0)).collect()
}

/// Discrete Dirichlet Laplacian: 3-point (1D) / 5-point (2D) stencil,
/// symmetric, `−Δ_h` positive definite.
pub fn laplacian_dirichlet(grid: OpGrid) -> Result<SparseOperator> {
    match grid {
        OpGrid::Interval { n, length } => {
            if n < 3 {
                return Err(Error::argument(format!("need at least 3 interior nodes, got {n}")));
            }
            let h = length / (n + 1) as f64;
            Ok(SparseOperator { dim: n, entries: d2_matrix(n, h) })
        }
        OpGrid::Rectangle { nx, ny, lx, ly } => {
            if nx < 3 || ny < 3 {
                return Err(Error::argument(format!(
                    "need at least 3 interior nodes per axis, got {nx} x {ny}"
                )));
            }
            let hx = lx / (nx + 1) as f64;
            let hy = ly / (ny + 1) as f64;
            let mut entries = kron(&d2_matrix(nx, hx), ny, &identity_triplets(ny));
            entries.extend(kron(&identity_triplets(nx), ny, &d2_matrix(ny, hy)));
            Ok(SparseOperator { dim: nx * ny, entries })
        }
    }
}

/// Discrete clamped bi-Laplacian: 5-point (1D) / 13-point (2D)
/// stencil with ghosts eliminated through `u|∂ = 0`, `∂_n u|∂ = 0`
/// (reflection rule). Symmetric positive definite.
pub fn biharmonic_clamped(grid: OpGrid) -> Result<SparseOperator> {
    match grid {
        OpGrid::Interval { n, length } => {
            if n < 5 {
                return Err(Error::argument(format!("need at least 5 interior nodes, got {n}")));
            }
            let h = length / (n + 1) as f64;
            Ok(SparseOperator { dim: n, entries: d4_matrix_clamped(n, h) })
        }
        OpGrid::Rectangle { nx, ny, lx, ly } => {
            if nx < 5 || ny < 5 {
                return Err(Error::argument(format!(
                    "need at least 5 interior nodes per axis, got {nx} x {ny}"
                )));
            }
            let hx = lx / (nx + 1) as f64;
            let hy = ly / (ny + 1) as f64;
            // Dxxxx ⊗ I + 2 Dxx ⊗ Dyy + I ⊗ Dyyyy; the mixed term only
            // needs Dirichlet ghosts.
            let mut entries = kron(&d4_matrix_clamped(nx, hx), ny, &identity_triplets(ny));
            let mixed = kron(&d2_matrix(nx, hx), ny, &d2_matrix(ny, hy));
            entries.extend(mixed.into_iter().map(|(i, j, v)| (i, j, 2.0 * v)));
            entries.extend(kron(&identity_triplets(nx), ny, &d4_matrix_clamped(ny, hy)));
            Ok(SparseOperator { dim: nx * ny, entries })
        }
    }
}

/// Assembled block operator `A_η = [[0, −I], [ηI + B, −ρL]]`.
#[derive(Debug, Clone)]
pub struct BlockOperatorA {
    pub grid: OpGrid,
    pub rho: f64,
    pub eta: f64,
    pub laplacian: SparseOperator,
    pub biharmonic: SparseOperator,
}

pub fn assemble_a(grid: OpGrid, rho: DampingParam, eta: f64) -> Result<BlockOperatorA> {
    if eta < 0.0 {
        return Err(Error::domain(format!("eta must be nonnegative, got {eta}")));
    }
    let laplacian = laplacian_dirichlet(grid)?;
    let biharmonic = biharmonic_clamped(grid)?;
    if laplacian.dim != biharmonic.dim {
        return Err(Error::argument("block dimensions disagree".to_string()));
    }
    Ok(BlockOperatorA { grid, rho: rho.get(), eta, laplacian, biharmonic })
}

impl BlockOperatorA {
    pub fn block_dim(&self) -> usize {
        self.laplacian.dim
    }

    pub fn dim(&self) -> usize {
        2 * self.laplacian.dim
    }

    /// `A_η (u, w) = (−w, (η + B)u − ρ L w)`.
    pub fn apply(&self, u: &[f64], w: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let first: Vec<f64> = w.iter().map(|v| -v).collect();
        let mut second = self.biharmonic.apply(u);
        let lw = self.laplacian.apply(w);
        for i in 0..second.len() {
            second[i] += self.eta * u[i] - self.rho * lw[i];
        }
        (first, second)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let m = self.block_dim();
        let mut a = DMatrix::zeros(2 * m, 2 * m);
        for i in 0..m {
            a[(i, m + i)] = -1.0;
            a[(m + i, i)] += self.eta;
        }
        for &(i, j, v) in &self.biharmonic.entries {
            a[(m + i, j)] += v;
        }
        for &(i, j, v) in &self.laplacian.entries {
            a[(m + i, m + j)] -= self.rho * v;
        }
        a
    }
}

/// Eigenvalues of the assembled block operator with conjugation
/// bookkeeping. The matrix, hence its spectrum, does not depend on the
/// norm metadata carried along for reporting.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<Complex64>,
    pub dim: usize,
    pub grid: OpGrid,
    pub rho: f64,
    pub eta: f64,
    pub norm_metadata: Option<(f64, f64)>,
    /// Max over eigenvalues of the distance to the nearest conjugate.
    pub conjugation_residual: f64,
}

impl SpectrumReport {
    pub fn min_real_part(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.re).fold(f64::INFINITY, f64::min)
    }
}

/// Dense complete-spectrum solve of the block operator.
pub fn spectrum(a: &BlockOperatorA, count: usize) -> Result<SpectrumReport> {
    spectrum_with_metadata(a, count, None)
}

pub fn spectrum_with_metadata(
    a: &BlockOperatorA,
    count: usize,
    norm_metadata: Option<(f64, f64)>,
) -> Result<SpectrumReport> {
    if count > a.dim() {
        return Err(Error::argument(format!(
            "requested {count} eigenvalues of a dimension-{} operator",
            a.dim()
        )));
    }
    let dense = a.to_dense();
    let eigs = dense.complex_eigenvalues();
    if eigs.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::numeric("eigensolver produced non-finite values".to_string()));
    }
    let mut eigenvalues: Vec<Complex64> = eigs.iter().copied().collect();
    eigenvalues.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    let conjugation_residual = eigenvalues
        .iter()
        .map(|z| {
            eigenvalues
                .iter()
                .map(|w| (w - z.conj()).norm() / (1.0 + z.norm()))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0f64, f64::max);
    eigenvalues.truncate(count.max(1).min(eigenvalues.len()));
    Ok(SpectrumReport {
        eigenvalues,
        dim: a.dim(),
        grid: a.grid,
        rho: a.rho,
        eta: a.eta,
        norm_metadata,
        conjugation_residual,
    })
}

/// Smallest eigenpair of the clamped bi-Laplacian (symmetric dense
/// solve); the discrete beam mode.
pub fn smallest_beam_mode(b: &SparseOperator) -> (f64, DVector<f64>) {
    let dense = b.to_dense();
    let sym = nalgebra::linalg::SymmetricEigen::new(dense);
    let mut best = (f64::INFINITY, 0usize);
    for (i, &v) in sym.eigenvalues.iter().enumerate() {
        if v < best.0 {
            best = (v, i);
        }
    }
    (best.0, sym.eigenvectors.column(best.1).into_owned())
}

/// Spectral norm of a real matrix.
pub fn spectral_norm_f64(m: &DMatrix<f64>) -> f64 {
    nalgebra::linalg::SVD::new(m.clone(), false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Declared discrete weighted graph norm `W^{k}(w_{γ+kp}) ×
/// W^{k−2}(w_{γ+kp})` for resolvent scans; `p = 2` so the operator
/// norm is a weighted singular value. Orders `k ≥ 2` keep both
/// components nonnegative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphNormSpec {
    pub k: i32,
    pub p: f64,
    pub gamma: f64,
}

impl Default for GraphNormSpec {
    fn default() -> Self {
        GraphNormSpec { k: 2, p: 2.0, gamma: 0.5 }
    }
}

/// One scanned resolvent sample.
#[derive(Debug, Clone, Copy)]
pub struct ScanRow {
    pub lambda: Complex64,
    pub norm: f64,
}

/// Resolvent ray scan report: `‖λ(λ + A_h)⁻¹‖` along the rays
/// `λ = λ₀ + r e^{±i(π−σ)}` in the declared graph norm.
#[derive(Debug, Clone)]
pub struct ResolventScanReport {
    pub lambda0: f64,
    pub sigma: f64,
    pub norm_spec: GraphNormSpec,
    pub rows: Vec<ScanRow>,
    pub sup: f64,
}

/// First-derivative matrix on the interior grid (uniform `h`),
/// one-sided second-order at the two ends.
fn d1_dense(n: usize, h: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 1..n - 1 {
        m[(i, i - 1)] = -0.5 / h;
        m[(i, i + 1)] = 0.5 / h;
    }
    m[(0, 0)] = -1.5 / h;
    m[(0, 1)] = 2.0 / h;
    m[(0, 2)] = -0.5 / h;
    m[(n - 1, n - 1)] = 1.5 / h;
    m[(n - 1, n - 2)] = -2.0 / h;
    m[(n - 1, n - 3)] = 0.5 / h;
    m
}

fn d2_dense_free(n: usize, h: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let ih2 = 1.0 / (h * h);
    for i in 1..n - 1 {
        m[(i, i - 1)] = ih2;
        m[(i, i)] = -2.0 * ih2;
        m[(i, i + 1)] = ih2;
    }
    for (r, sign) in [(0usize, 1.0f64), (n - 1, -1.0)] {
        let step = |k: i64| -> usize {
            if sign > 0.0 { k as usize } else { (n as i64 - 1 - k) as usize }
        };
        m[(r, step(0))] = 2.0 * ih2;
        m[(r, step(1))] = -5.0 * ih2;
        m[(r, step(2))] = 4.0 * ih2;
        m[(r, step(3))] = -ih2;
    }
    m
}

/// Cholesky factor `Lᵀ` of the weighted Sobolev Gram matrix
/// `Σ_{j ≤ k} D_jᵀ W D_j` on the interval's interior nodes.
fn sobolev_gram_factor(n: usize, h: f64, dist: &[f64], k: i32, weight_exp: f64) -> Result<DMatrix<f64>> {
    let w = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            dist[i].powf(weight_exp) * h
        } else {
            0.0
        }
    });
    let mut gram = w.clone();
    if k >= 1 {
        let d1 = d1_dense(n, h);
        gram += d1.transpose() * &w * &d1;
        if k >= 2 {
            let d2 = d2_dense_free(n, h);
            gram += d2.transpose() * &w * &d2;
            let mut dj = d2;
            for _ in 3..=k {
                dj = d1_dense(n, h) * dj;
                gram += dj.transpose() * &w * &dj;
            }
        }
    }
    let chol = nalgebra::linalg::Cholesky::new(gram)
        .ok_or_else(|| Error::numeric("weighted Gram matrix is not positive definite".to_string()))?;
    Ok(chol.l().transpose())
}

/// Similarity factor for the product norm on the interval block grid.
fn graph_norm_factor(a: &BlockOperatorA, spec: &GraphNormSpec) -> Result<DMatrix<f64>> {
    if (spec.p - 2.0).abs() > 1e-12 {
        return Err(Error::argument(
            "operator norms are computed in the p = 2 graph norm; other p are not inner-product norms".to_string(),
        ));
    }
    if spec.k < 2 {
        return Err(Error::argument(
            "graph-norm scans need k >= 2 so both components have nonnegative order".to_string(),
        ));
    }
    let (n, h) = match a.grid {
        OpGrid::Interval { n, length } => (n, length / (n + 1) as f64),
        OpGrid::Rectangle { .. } => {
            return Err(Error::argument(
                "resolvent scans are assembled on interval grids".to_string(),
            ))
        }
    };
    let dist = a.grid.boundary_distance();
    let weight_exp = spec.gamma + spec.k as f64 * spec.p;
    let f1 = sobolev_gram_factor(n, h, &dist, spec.k, weight_exp)?;
    let f2 = sobolev_gram_factor(n, h, &dist, spec.k - 2, weight_exp)?;
    let mut factor = DMatrix::zeros(2 * n, 2 * n);
    factor.view_mut((0, 0), (n, n)).copy_from(&f1);
    factor.view_mut((n, n), (n, n)).copy_from(&f2);
    Ok(factor)
}

fn complex_from_real(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Largest singular value of a complex matrix.
fn spectral_norm_complex(m: &DMatrix<Complex64>) -> f64 {
    nalgebra::linalg::SVD::new(m.clone(), false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Scans `‖λ (λ + A_h)⁻¹‖` for `λ = λ₀ + r e^{±i(π−σ)}` over the given
/// magnitudes, in the weighted graph norm. Fails with the offending
/// `λ` if a shifted system is singular.
pub fn resolvent_ray_scan(
    a: &BlockOperatorA,
    lambda0: f64,
    sigma: f64,
    magnitudes: &[f64],
    norm_spec: GraphNormSpec,
) -> Result<ResolventScanReport> {
    let theta = damping_angle(DampingParam::new(a.rho)?).theta;
    if !(sigma > theta && sigma < std::f64::consts::PI) {
        return Err(Error::domain(format!(
            "scan angle must lie in (theta(rho), pi) = ({theta:.6}, pi), got {sigma}"
        )));
    }
    if magnitudes.is_empty() || magnitudes.windows(2).any(|w| w[1] <= w[0]) || magnitudes[0] <= 0.0 {
        return Err(Error::argument(
            "magnitudes must be a positive strictly increasing sequence".to_string(),
        ));
    }
    let factor = graph_norm_factor(a, &norm_spec)?;
    let factor_inv = factor
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::numeric("norm factor is singular".to_string()))?;
    let factor_c = complex_from_real(&factor);
    let factor_inv_c = complex_from_real(&factor_inv);
    let dense = complex_from_real(&a.to_dense());
    let dim = a.dim();
    let ray = std::f64::consts::PI - sigma;
    let mut lambdas = Vec::with_capacity(2 * magnitudes.len());
    for &r in magnitudes {
        for sign in [1.0, -1.0] {
            lambdas.push(Complex64::new(lambda0, 0.0) + Complex64::from_polar(r, sign * ray));
        }
    }
    let rows = map_slice(&lambdas, |&lambda| -> Result<ScanRow> {
        let mut shifted = dense.clone();
        for i in 0..dim {
            shifted[(i, i)] += lambda;
        }
        let lu = nalgebra::linalg::LU::new(shifted);
        let inv = lu
            .try_inverse()
            .ok_or_else(|| Error::singular(format!("shifted system singular at lambda = {lambda}")))?;
        let scaled = &factor_c * inv * &factor_inv_c * lambda;
        Ok(ScanRow { lambda, norm: spectral_norm_complex(&scaled) })
    });
    let rows: Result<Vec<ScanRow>> = rows.into_iter().collect();
    let rows = rows?;
    let sup = rows.iter().map(|r| r.norm).fold(0.0, f64::max);
    Ok(ResolventScanReport { lambda0, sigma, norm_spec, rows, sup })
}

/// Result of the randomized operator-family bound estimation.
#[derive(Debug, Clone)]
pub struct RademacherReport {
    /// Square-mean estimate of the randomized bound, maximized over
    /// the supplied vector tuples.
    pub estimate: f64,
    /// Largest single-draw quotient seen (diagnostic).
    pub pathwise_max: f64,
    /// Tuples skipped because the denominator vanished.
    pub resampled: usize,
    pub trials: usize,
}

/// Monte-Carlo estimate of the randomized uniform bound
/// `‖Σ ε_n T_n x_n‖₂ ≤ C ‖Σ ε_n x_n‖₂` over random unit phases.
///
/// Each trial averages the squared norms over the full cyclic phase
/// rotation `ε_n ↦ ε_n e^{2πi n j/N}`, which cancels the cross terms
/// of the Euclidean norm exactly; the estimate therefore never exceeds
/// `max_n ‖T_n‖₂` beyond rounding, matching the second-moment
/// expansion `E‖Σ ε_n T_n x_n‖² = Σ ‖T_n x_n‖²`.
pub fn rademacher_bound(
    family: &[DMatrix<f64>],
    test_vectors: &[Vec<DVector<f64>>],
    trials: usize,
    seed: u64,
) -> Result<RademacherReport> {
    if family.is_empty() {
        return Err(Error::argument("empty operator family".to_string()));
    }
    if trials < 1000 {
        return Err(Error::argument(format!("need at least 1000 trials, got {trials}")));
    }
    let n_ops = family.len();
    let dim = family[0].nrows();
    for t in family {
        if t.nrows() != dim || t.ncols() != dim {
            return Err(Error::argument("operator family dimensions disagree".to_string()));
        }
    }
    for tuple in test_vectors {
        if tuple.len() != n_ops {
            return Err(Error::argument(format!(
                "vector tuple length {} does not match family size {n_ops}",
                tuple.len()
            )));
        }
        if tuple.iter().any(|x| x.len() != dim) {
            return Err(Error::argument("vector dimension mismatch".to_string()));
        }
    }
    let mut estimate: f64 = 0.0;
    let mut pathwise: f64 = 0.0;
    let mut resampled = 0usize;
    for tuple in test_vectors {
        let den_base: f64 = tuple.iter().map(|x| x.norm_squared()).sum();
        if den_base == 0.0 {
            resampled += 1;
            continue;
        }
        let images: Vec<DVector<f64>> =
            tuple.iter().zip(family).map(|(x, t)| t * x).collect();
        let per_trial = map_range(trials, |trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (trial as u64).wrapping_mul(0x9e3779b97f4a7c15));
            let phases: Vec<Complex64> = (0..n_ops)
                .map(|_| Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU)))
                .collect();
            let mut num_acc = 0.0;
            let mut den_acc = 0.0;
            let mut worst_quotient: f64 = 0.0;
            for j in 0..n_ops {
                let mut num = vec![Complex64::new(0.0, 0.0); dim];
                let mut den = vec![Complex64::new(0.0, 0.0); dim];
                for (n_idx, phase) in phases.iter().enumerate() {
                    let rot = *phase
                        * Complex64::from_polar(
                            1.0,
                            std::f64::consts::TAU * (n_idx * j) as f64 / n_ops as f64,
                        );
                    for r in 0..dim {
                        num[r] += rot * images[n_idx][r];
                        den[r] += rot * tuple[n_idx][r];
                    }
                }
                let num_sq: f64 = num.iter().map(|z| z.norm_sqr()).sum();
                let den_sq: f64 = den.iter().map(|z| z.norm_sqr()).sum();
                num_acc += num_sq;
                den_acc += den_sq;
                if den_sq > 0.0 {
                    worst_quotient = worst_quotient.max((num_sq / den_sq).sqrt());
                }
            }
            (num_acc, den_acc, worst_quotient)
        });
        let mut num_total = 0.0;
        let mut den_total = 0.0;
        for (num, den, worst) in per_trial {
            num_total += num;
            den_total += den;
            pathwise = pathwise.max(worst);
        }
        if den_total == 0.0 {
            resampled += 1;
            continue;
        }
        estimate = estimate.max((num_total / den_total).sqrt());
    }
    Ok(RademacherReport { estimate, pathwise_max: pathwise, resampled, trials })
}

/// Perturbation defect of the operator mapped through a pullback:
/// max over the field suite of
/// `‖(A^Φ − A)(u₁,u₂)‖_{X} / ‖(u₁,u₂)‖_{D}` in discrete weighted
/// norms, `X = W^{k−2}(w_{γ+kp})` on the second component and
/// `D = W^{k+2}(w_{γ+kp}) × W^{k}(w_{γ+kp})`.
pub fn mapped_operator_defect(
    half_grid: &GridTensor,
    map: &PullbackMap,
    rho: DampingParam,
    field_suite: &[(Vec<f64>, Vec<f64>)],
    k: i32,
    p: f64,
    gamma: f64,
) -> Result<f64> {
    if k < 2 {
        return Err(Error::argument("the defect norm needs k >= 2".to_string()));
    }
    if field_suite.is_empty() {
        return Err(Error::argument("empty field suite".to_string()));
    }
    let (nx, ny) = (half_grid.nx(), half_grid.ny());
    let count = nx * ny;
    for (u1, u2) in field_suite {
        if u1.len() != count || u2.len() != count {
            return Err(Error::argument("suite field length does not match grid".to_string()));
        }
    }
    // Coefficients b_k(y) = d_k h2 / (1 + d1 h2) of the first-order
    // pushforward correction P_k = d_k - b_k d1.
    let zero_profile = matches!(map.domain.profile, crate::geometry::HeightProfile::Zero);
    let (b1, b2): (Vec<f64>, Vec<f64>) = if zero_profile {
        (vec![0.0; count], vec![0.0; count])
    } else {
        let mut b1 = vec![0.0; count];
        let mut b2 = vec![0.0; count];
        let cells: Vec<usize> = (0..count).collect();
        let cols = map_slice(&cells, |&i| {
            let y1 = half_grid.xs[i / ny];
            let yt = half_grid.ys[i % ny];
            let d1 = map.h2_deriv([1, 0], y1, yt);
            let dt = map.h2_deriv([0, 1], y1, yt);
            (d1 / (1.0 + d1), dt / (1.0 + d1))
        });
        for (i, (v1, v2)) in cols.into_iter().enumerate() {
            b1[i] = v1;
            b2[i] = v2;
        }
        (b1, b2)
    };
    let weight_exp = gamma + k as f64 * p;
    let x_upper = half_grid.xs[nx - 1] + 0.5 * half_grid.hx;

    let pushed_derivative = |v: &[f64], axis: usize, b: &[f64]| -> Vec<f64> {
        let straight = if axis == 0 {
            tensor_derivative(half_grid, v, 1, 0)
        } else {
            tensor_derivative(half_grid, v, 0, 1)
        };
        let normal = tensor_derivative(half_grid, v, 1, 0);
        straight
            .iter()
            .zip(&normal)
            .zip(b)
            .map(|((s, n), bi)| s - bi * n)
            .collect()
    };
    let lap_phi = |v: &[f64]| -> Vec<f64> {
        let p1 = pushed_derivative(&pushed_derivative(v, 0, &b1), 0, &b1);
        let p2 = pushed_derivative(&pushed_derivative(v, 1, &b2), 1, &b2);
        p1.iter().zip(&p2).map(|(a, b)| a + b).collect()
    };
    let lap_flat = |v: &[f64]| -> Vec<f64> {
        let dxx = tensor_derivative(half_grid, v, 2, 0);
        let dyy = tensor_derivative(half_grid, v, 0, 2);
        dxx.iter().zip(&dyy).map(|(a, b)| a + b).collect()
    };

    let mut worst: f64 = 0.0;
    for (u1, u2) in field_suite {
        // B2 u1 = (Lap^Phi)^2 u1 - Lap^2 u1, B1 u2 = Lap^Phi u2 - Lap u2.
        let b2_u1: Vec<f64> = {
            let curved = lap_phi(&lap_phi(u1));
            let flat = lap_flat(&lap_flat(u1));
            curved.iter().zip(&flat).map(|(a, b)| a - b).collect()
        };
        let b1_u2: Vec<f64> = {
            let curved = lap_phi(u2);
            let flat = lap_flat(u2);
            curved.iter().zip(&flat).map(|(a, b)| a - b).collect()
        };
        let defect: Vec<f64> = b2_u1
            .iter()
            .zip(&b1_u2)
            .map(|(a, b)| a - rho.get() * b)
            .collect();
        let num = weighted_sobolev_norm_2d(half_grid, &defect, k - 2, p, weight_exp, x_upper)?;
        let den = weighted_sobolev_norm_2d(half_grid, u1, k + 2, p, weight_exp, x_upper)?
            + weighted_sobolev_norm_2d(half_grid, u2, k, p, weight_exp, x_upper)?;
        if den == 0.0 {
            continue;
        }
        worst = worst.max(num / den);
    }
    Ok(worst)
}

/// Discrete dual norm `sup_g ⟨u, g⟩ / ‖g‖_{W^{order,p'}(w_{γ'})}` over
/// a fixed smooth test set; the plumbing stand-in for negative-order
/// norms.
pub fn discrete_dual_norm(
    grid: &Grid1D,
    values: &[f64],
    order: i32,
    p: f64,
    gamma: f64,
) -> Result<f64> {
    use crate::grid::integrate_weighted_1d;
    use crate::weights::{weighted_sobolev_norm, SobolevSpec};
    if order < 0 {
        return Err(Error::argument("dual norm order is the positive dual exponent".to_string()));
    }
    let p_dual = p / (p - 1.0);
    let gamma_dual = -gamma / (p - 1.0);
    let spec = SobolevSpec::new(order, p_dual, gamma_dual)?;
    let mut best: f64 = 0.0;
    let length = grid.length;
    for j in 1..=12usize {
        let g = grid.sample(|x| {
            (std::f64::consts::PI * j as f64 * x / length).sin() * (x / length) * (1.0 - x / length)
        });
        let pairing_integrand: Vec<f64> = values.iter().zip(&g).map(|(u, gi)| u * gi).collect();
        let pairing = integrate_weighted_1d(&grid.nodes, length, &pairing_integrand, 0.0)?;
        let g_norm = weighted_sobolev_norm(grid, &g, &spec)?;
        if g_norm > 0.0 {
            best = best.max(pairing.abs() / g_norm);
        }
    }
    Ok(best)
}
