//! Grids, singular-weight quadrature and finite differences.
//!
//! Weighted integrals `∫ G(x) x^γ dx` are computed by piecewise
//! polynomial interpolation of `G` on a sliding window, times *exact*
//! power moments of `x^γ` over each cell. The weight is never sampled,
//! so there is no order loss for `γ` close to −1.

use crate::error::{Error, Result};

/// Number of interpolation nodes per quadrature window (degree 5).
const WINDOW: usize = 6;

/// A strictly increasing set of nodes inside `(0, length)`, graded
/// toward the boundary at `0` as `x_j = L (j/(n+1))^g`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    pub nodes: Vec<f64>,
    pub length: f64,
    pub grading: f64,
}

impl Grid1D {
    /// Graded grid with `n` interior nodes and grading exponent `g ≥ 1`
    /// (nodes cluster toward `x = 0` for `g > 1`).
    pub fn graded(n: usize, length: f64, grading: f64) -> Result<Self> {
        if n < WINDOW {
            return Err(Error::argument(format!("need at least {WINDOW} nodes, got {n}")));
        }
        if !(length > 0.0) {
            return Err(Error::argument(format!("length must be positive, got {length}")));
        }
        if !(grading >= 1.0) {
            return Err(Error::argument(format!(
                "grading exponent must be >= 1, got {grading}"
            )));
        }
        let nodes = (1..=n)
            .map(|j| length * ((j as f64) / ((n + 1) as f64)).powf(grading))
            .collect();
        Ok(Grid1D { nodes, length, grading })
    }

    /// Uniform grid (grading 1).
    pub fn uniform(n: usize, length: f64) -> Result<Self> {
        Self::graded(n, length, 1.0)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Sample a function at the nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }
}

/// Exact moments `M_j = ∫_a^b (x − x_c)^j x^γ dx`, `j = 0..=deg`, with
/// `x_c = (a+b)/2`. Stable recurrence through the boundary terms of
/// `d/dx[(x−x_c)^j x^{γ+1}]`; the difference `b^{γ+1} − a^{γ+1}` is
/// computed through `expm1` to avoid cancellation on narrow cells.
fn power_moments(a: f64, b: f64, gamma: f64, deg: usize) -> Vec<f64> {
    debug_assert!(a >= 0.0 && b > a);
    let xc = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let g1 = gamma + 1.0;
    let pow_b = b.powf(g1);
    let pow_a = if a == 0.0 { 0.0 } else { a.powf(g1) };
    let diff = if a == 0.0 {
        pow_b
    } else {
        pow_a * (g1 * ((b - a) / a).ln_1p()).exp_m1()
    };
    let sum = pow_b + pow_a;
    let mut moments = Vec::with_capacity(deg + 1);
    moments.push(diff / g1);
    let mut half_pow = 1.0;
    for j in 1..=deg {
        half_pow *= half;
        let boundary = half_pow * if j % 2 == 0 { diff } else { sum };
        let m = (boundary - (j as f64) * xc * moments[j - 1]) / (g1 + j as f64);
        moments.push(m);
    }
    moments
}

/// Plain moments `∫_a^b (x − x_c)^j dx` (any interval).
fn plain_moments(a: f64, b: f64, deg: usize) -> Vec<f64> {
    let half = 0.5 * (b - a);
    (0..=deg)
        .map(|j| {
            if j % 2 == 1 {
                0.0
            } else {
                2.0 * half.powi(j as i32 + 1) / (j as f64 + 1.0)
            }
        })
        .collect()
}

/// Coefficients (in powers of `x − x_c`) of the polynomial interpolating
/// `(nodes[i], values[i])` for `i` in `window`, by a shifted Vandermonde
/// solve with partial pivoting.
fn local_poly_coeffs(nodes: &[f64], values: &[f64], window: std::ops::Range<usize>, xc: f64) -> [f64; WINDOW] {
    let idx: Vec<usize> = window.collect();
    let m = idx.len();
    debug_assert!(m == WINDOW);
    let mut a = [[0.0f64; WINDOW]; WINDOW];
    let mut rhs = [0.0f64; WINDOW];
    for (r, &i) in idx.iter().enumerate() {
        let u = nodes[i] - xc;
        let mut p = 1.0;
        for c in 0..m {
            a[r][c] = p;
            p *= u;
        }
        rhs[r] = values[i];
    }
    // Gaussian elimination with partial pivoting on the 6x6 system.
    for col in 0..m {
        let mut piv = col;
        for r in col + 1..m {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        a.swap(col, piv);
        rhs.swap(col, piv);
        let d = a[col][col];
        for r in col + 1..m {
            let factor = a[r][col] / d;
            for c in col..m {
                a[r][c] -= factor * a[col][c];
            }
            rhs[r] -= factor * rhs[col];
        }
    }
    let mut coeffs = [0.0f64; WINDOW];
    for col in (0..m).rev() {
        let mut s = rhs[col];
        for c in col + 1..m {
            s -= a[col][c] * coeffs[c];
        }
        coeffs[col] = s / a[col][col];
    }
    coeffs
}

fn window_for_cell(cell_left: isize, n: usize) -> std::ops::Range<usize> {
    // Window of WINDOW nodes roughly centered on the cell [cell_left, cell_left+1].
    let lo = (cell_left - (WINDOW as isize / 2 - 1))
        .clamp(0, n as isize - WINDOW as isize) as usize;
    lo..lo + WINDOW
}

/// `∫_0^{upper} G(x) x^γ dx` for `G` sampled at `nodes ⊂ (0, upper)`,
/// `γ > −1`. The integrand factor `G` is interpolated piecewise by
/// degree-5 polynomials; the weight is integrated exactly per cell.
pub fn integrate_weighted_1d(nodes: &[f64], upper: f64, values: &[f64], gamma: f64) -> Result<f64> {
    let n = nodes.len();
    if n != values.len() {
        return Err(Error::argument(format!(
            "node/value length mismatch: {n} vs {}",
            values.len()
        )));
    }
    if n < WINDOW {
        return Err(Error::argument(format!("need at least {WINDOW} nodes, got {n}")));
    }
    if !(gamma > -1.0) {
        return Err(Error::domain(format!(
            "weight exponent must satisfy gamma > -1 for a convergent integral, got {gamma}"
        )));
    }
    let mut total = 0.0;
    // Cells: [0, x_0], [x_i, x_{i+1}] ..., [x_{n-1}, upper].
    for cell in -1..(n as isize) {
        let (a, b) = if cell < 0 {
            (0.0, nodes[0])
        } else if cell as usize == n - 1 {
            (nodes[n - 1], upper)
        } else {
            (nodes[cell as usize], nodes[cell as usize + 1])
        };
        if b <= a {
            continue;
        }
        let xc = 0.5 * (a + b);
        let window = window_for_cell(cell.max(0), n);
        let coeffs = local_poly_coeffs(nodes, values, window, xc);
        let moments = power_moments(a, b, gamma, WINDOW - 1);
        let cell_val: f64 = coeffs.iter().zip(&moments).map(|(c, m)| c * m).sum();
        total += cell_val;
    }
    Ok(total)
}

/// `∫_{lower}^{upper} G(x) dx` (no weight, any interval) for `G`
/// sampled at `nodes`, same piecewise-quintic scheme.
pub fn integrate_plain_1d(nodes: &[f64], lower: f64, upper: f64, values: &[f64]) -> Result<f64> {
    let n = nodes.len();
    if n != values.len() {
        return Err(Error::argument("node/value length mismatch".to_string()));
    }
    if n < WINDOW {
        return Err(Error::argument(format!("need at least {WINDOW} nodes, got {n}")));
    }
    let mut total = 0.0;
    for cell in -1..(n as isize) {
        let (a, b) = if cell < 0 {
            (lower, nodes[0])
        } else if cell as usize == n - 1 {
            (nodes[n - 1], upper)
        } else {
            (nodes[cell as usize], nodes[cell as usize + 1])
        };
        if b <= a {
            continue;
        }
        let xc = 0.5 * (a + b);
        let window = window_for_cell(cell.max(0), n);
        let coeffs = local_poly_coeffs(nodes, values, window, xc);
        let moments = plain_moments(a, b, WINDOW - 1);
        total += coeffs.iter().zip(&moments).map(|(c, m)| c * m).sum::<f64>();
    }
    Ok(total)
}

/// First derivative on a (possibly nonuniform) grid: centered 3-point
/// second-order formula inside, one-sided quadratic fit at the two
/// boundary-most nodes.
pub fn d1_nonuniform(nodes: &[f64], values: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    assert!(n >= 3, "need at least 3 nodes for a derivative stencil");
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        let hm = nodes[i] - nodes[i - 1];
        let hp = nodes[i + 1] - nodes[i];
        out[i] = -hp / (hm * (hm + hp)) * values[i - 1]
            + (hp - hm) / (hm * hp) * values[i]
            + hm / (hp * (hm + hp)) * values[i + 1];
    }
    // Quadratic through the first three nodes, differentiated at node 0.
    let h1 = nodes[1] - nodes[0];
    let h2 = nodes[2] - nodes[0];
    out[0] = values[0] * (-(h1 + h2) / (h1 * h2))
        + values[1] * (h2 / (h1 * (h2 - h1)))
        + values[2] * (-h1 / (h2 * (h2 - h1)));
    let h1 = nodes[n - 2] - nodes[n - 1];
    let h2 = nodes[n - 3] - nodes[n - 1];
    out[n - 1] = values[n - 1] * (-(h1 + h2) / (h1 * h2))
        + values[n - 2] * (h2 / (h1 * (h2 - h1)))
        + values[n - 3] * (-h1 / (h2 * (h2 - h1)));
    out
}

/// `k`-th derivative by repeated first differences.
pub fn derivative_k(nodes: &[f64], values: &[f64], k: usize) -> Vec<f64> {
    let mut v = values.to_vec();
    for _ in 0..k {
        v = d1_nonuniform(nodes, &v);
    }
    v
}

/// Uniform tensor-product grid in two dimensions. Axis 0 is the
/// boundary-normal coordinate `x₁` carrying the power weight; axis 1
/// is tangential. Values are stored row-major: `values[ix * ny + iy]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridTensor {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub hx: f64,
    pub hy: f64,
}

impl GridTensor {
    /// Node-based uniform grid with `nx × ny` nodes spanning
    /// `[x0, x1] × [y0, y1]` inclusive.
    pub fn uniform(nx: usize, x0: f64, x1: f64, ny: usize, y0: f64, y1: f64) -> Result<Self> {
        if nx < WINDOW || ny < WINDOW {
            return Err(Error::argument(format!(
                "tensor grid needs at least {WINDOW} nodes per axis, got {nx} x {ny}"
            )));
        }
        let hx = (x1 - x0) / (nx - 1) as f64;
        let hy = (y1 - y0) / (ny - 1) as f64;
        if !(hx > 0.0 && hy > 0.0) {
            return Err(Error::argument("degenerate tensor grid extent".to_string()));
        }
        Ok(GridTensor {
            xs: (0..nx).map(|i| x0 + hx * i as f64).collect(),
            ys: (0..ny).map(|j| y0 + hy * j as f64).collect(),
            hx,
            hy,
        })
    }

    /// Cell-centered uniform grid on `(x0, x1) × (y0, y1)`: nodes at
    /// `x0 + (i + 1/2) hx`. Keeps the first node strictly off the
    /// weighted boundary.
    pub fn cell_centered(nx: usize, x0: f64, x1: f64, ny: usize, y0: f64, y1: f64) -> Result<Self> {
        if nx < WINDOW || ny < WINDOW {
            return Err(Error::argument(format!(
                "tensor grid needs at least {WINDOW} nodes per axis, got {nx} x {ny}"
            )));
        }
        let hx = (x1 - x0) / nx as f64;
        let hy = (y1 - y0) / ny as f64;
        Ok(GridTensor {
            xs: (0..nx).map(|i| x0 + hx * (i as f64 + 0.5)).collect(),
            ys: (0..ny).map(|j| y0 + hy * (j as f64 + 0.5)).collect(),
            hx,
            hy,
        })
    }

    pub fn nx(&self) -> usize {
        self.xs.len()
    }

    pub fn ny(&self) -> usize {
        self.ys.len()
    }

    pub fn node_count(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.node_count());
        for &x in &self.xs {
            for &y in &self.ys {
                v.push(f(x, y));
            }
        }
        v
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration
/// on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let legendre = |x: f64| -> (f64, f64) {
        let mut p0 = 1.0;
        let mut p1 = x;
        for k in 2..=n {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        (p1, dp)
    };
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(x);
            let dx = -p / dp;
            x += dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Single-axis derivative of order 1 or 2 on a uniform tensor grid,
/// centered inside and second-order one-sided at the edges.
pub fn axis_derivative(grid: &GridTensor, values: &[f64], axis: usize, order: usize) -> Vec<f64> {
    let (nx, ny) = (grid.nx(), grid.ny());
    assert_eq!(values.len(), nx * ny);
    let h = if axis == 0 { grid.hx } else { grid.hy };
    let n_along = if axis == 0 { nx } else { ny };
    assert!(n_along >= 4);
    let mut out = vec![0.0; values.len()];
    let idx = |ix: usize, iy: usize| ix * ny + iy;
    let get = |i: usize, j: usize| {
        if axis == 0 {
            values[idx(i, j)]
        } else {
            values[idx(j, i)]
        }
    };
    let set = |i: usize, j: usize, v: f64, out: &mut Vec<f64>| {
        if axis == 0 {
            out[idx(i, j)] = v;
        } else {
            out[idx(j, i)] = v;
        }
    };
    let n_other = if axis == 0 { ny } else { nx };
    for j in 0..n_other {
        match order {
            1 => {
                for i in 1..n_along - 1 {
                    let v = (get(i + 1, j) - get(i - 1, j)) / (2.0 * h);
                    set(i, j, v, &mut out);
                }
                let v0 = (-3.0 * get(0, j) + 4.0 * get(1, j) - get(2, j)) / (2.0 * h);
                set(0, j, v0, &mut out);
                let vn = (3.0 * get(n_along - 1, j) - 4.0 * get(n_along - 2, j)
                    + get(n_along - 3, j))
                    / (2.0 * h);
                set(n_along - 1, j, vn, &mut out);
            }
            2 => {
                let h2 = h * h;
                for i in 1..n_along - 1 {
                    let v = (get(i + 1, j) - 2.0 * get(i, j) + get(i - 1, j)) / h2;
                    set(i, j, v, &mut out);
                }
                let v0 = (2.0 * get(0, j) - 5.0 * get(1, j) + 4.0 * get(2, j) - get(3, j)) / h2;
                set(0, j, v0, &mut out);
                let vn = (2.0 * get(n_along - 1, j) - 5.0 * get(n_along - 2, j)
                    + 4.0 * get(n_along - 3, j)
                    - get(n_along - 4, j))
                    / h2;
                set(n_along - 1, j, vn, &mut out);
            }
            _ => panic!("axis_derivative supports orders 1 and 2 directly"),
        }
    }
    out
}

/// Mixed derivative `∂_x^{ax} ∂_y^{ay}` by composing axis derivatives
/// (orders decomposed as 2+2+1 as needed).
pub fn tensor_derivative(grid: &GridTensor, values: &[f64], ax: usize, ay: usize) -> Vec<f64> {
    let mut v = values.to_vec();
    for (axis, mut order) in [(0usize, ax), (1usize, ay)] {
        while order >= 2 {
            v = axis_derivative(grid, &v, axis, 2);
            order -= 2;
        }
        if order == 1 {
            v = axis_derivative(grid, &v, axis, 1);
        }
    }
    v
}

/// `∫∫ G(x,y) x^γ dy dx` over `(0, x_upper) × (y_lo, y_hi)` for `G`
/// sampled on the tensor grid. For `γ = 0` the weight moments reduce
/// to plain polynomial integration.
pub fn integrate_weighted_2d(
    grid: &GridTensor,
    values: &[f64],
    gamma: f64,
    x_upper: f64,
    y_lo: f64,
    y_hi: f64,
) -> Result<f64> {
    let (nx, ny) = (grid.nx(), grid.ny());
    assert_eq!(values.len(), nx * ny);
    // Integrate along the tangential axis first.
    let mut line = Vec::with_capacity(nx);
    for ix in 0..nx {
        let row = &values[ix * ny..(ix + 1) * ny];
        line.push(integrate_plain_1d(&grid.ys, y_lo, y_hi, row)?);
    }
    if gamma == 0.0 {
        integrate_plain_1d(&grid.xs, 0.0, x_upper, &line)
    } else {
        integrate_weighted_1d(&grid.xs, x_upper, &line, gamma)
    }
}
