//! Special `C^{ℓ,κ}` domains above a compactly supported height
//! function, the boundary-straightening pullback
//! `Φ(x) = (x₁ − h₁(x), x̃)` with inverse `Φ⁻¹(y) = (y₁ + h₂(y), ỹ)`,
//! distance-equivalence and derivative-blow-up diagnostics, field
//! pushforward between boundary-fitted and half-space grids, and the
//! partition-of-unity retraction.
//!
//! The regularized height is `h₂(y) = (φ_{c·y₁} * h)(ỹ)` with a fixed
//! smooth compactly supported mollifier `φ`; `h₁` is recovered
//! pointwise by solving `y₁ + h₂(y₁, x̃) = x₁`. Everything is
//! implemented for a planar domain (scalar tangential coordinate).

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::grid::{gauss_legendre, GridTensor};
use crate::parallel::map_slice;

/// Default mollifier scale.
pub const DEFAULT_MOLLIFIER_SCALE: f64 = 0.25;

/// Root-solve tolerance for the pointwise construction of `h₁`.
const ROOT_TOL: f64 = 1e-12;

/// Named boundary height profiles `h: R → R` with compact support.
#[derive(Debug, Clone, PartialEq)]
pub enum HeightProfile {
    /// `h ≡ 0` (the half-space itself).
    Zero,
    /// `amplitude · max(0, 1 − |x|/radius)`: Lipschitz, kink at 0 and ±radius.
    Hat { amplitude: f64, radius: f64 },
    /// Smooth bump `amplitude · e · exp(−1/(1 − (x/radius)²))`, peak value
    /// `amplitude` at 0.
    Bump { amplitude: f64, radius: f64 },
    /// `amplitude · |x|^{1+κ} · bump(x/radius)`: exactly `C^{1,κ}`, the
    /// second derivative blows up like `|x|^{κ−1}`.
    Cusp { amplitude: f64, kappa: f64, radius: f64 },
}

fn smooth_bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - u * u)).exp()
    }
}

fn smooth_bump_deriv(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        let w = 1.0 - u * u;
        smooth_bump(u) * (-2.0 * u / (w * w))
    }
}

impl HeightProfile {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            HeightProfile::Zero => 0.0,
            HeightProfile::Hat { amplitude, radius } => {
                amplitude * (1.0 - x.abs() / radius).max(0.0)
            }
            HeightProfile::Bump { amplitude, radius } => amplitude * smooth_bump(x / radius),
            HeightProfile::Cusp { amplitude, kappa, radius } => {
                amplitude * x.abs().powf(1.0 + kappa) * smooth_bump(x / radius)
            }
        }
    }

    /// First derivative; at kinks of the hat the one-sided value from
    /// the right is returned.
    pub fn deriv(&self, x: f64) -> f64 {
        match *self {
            HeightProfile::Zero => 0.0,
            HeightProfile::Hat { amplitude, radius } => {
                if x.abs() >= radius || x == 0.0 {
                    if x == 0.0 { -amplitude / radius } else { 0.0 }
                } else {
                    -amplitude * x.signum() / radius
                }
            }
            HeightProfile::Bump { amplitude, radius } => {
                amplitude * smooth_bump_deriv(x / radius) / radius
            }
            HeightProfile::Cusp { amplitude, kappa, radius } => {
                let a = x.abs();
                if a == 0.0 {
                    return 0.0;
                }
                amplitude
                    * ((1.0 + kappa) * a.powf(kappa) * x.signum() * smooth_bump(x / radius)
                        + a.powf(1.0 + kappa) * smooth_bump_deriv(x / radius) / radius)
            }
        }
    }

    /// Radius of the support.
    pub fn support_radius(&self) -> f64 {
        match *self {
            HeightProfile::Zero => 0.0,
            HeightProfile::Hat { radius, .. }
            | HeightProfile::Bump { radius, .. }
            | HeightProfile::Cusp { radius, .. } => radius,
        }
    }

    /// A safe upper bound on the Lipschitz constant.
    pub fn lipschitz_bound(&self) -> f64 {
        match *self {
            HeightProfile::Zero => 0.0,
            HeightProfile::Hat { amplitude, radius } => amplitude.abs() / radius,
            // max |bump'| = 1.2739... for the normalized bump.
            HeightProfile::Bump { amplitude, radius } => 1.3 * amplitude.abs() / radius,
            HeightProfile::Cusp { amplitude, kappa, radius } => {
                (1.0 + kappa) * amplitude.abs() * radius.powf(kappa) * 1.5
            }
        }
    }
}

/// Epigraph domain `{x₁ > h(x̃)}` of a compactly supported `C^{ℓ,κ}`
/// height function, with its declared Hölder seminorm.
#[derive(Debug, Clone)]
pub struct SpecialDomain {
    pub profile: HeightProfile,
    pub ell: usize,
    pub kappa: f64,
    pub seminorm: f64,
}

impl SpecialDomain {
    /// Validates the declared seminorm against a sampled lower bound.
    pub fn new(profile: HeightProfile, ell: usize, kappa: f64, seminorm: f64) -> Result<Self> {
        if ell > 1 {
            return Err(Error::argument("height profiles provide derivatives up to order 1"));
        }
        if !(0.0..=1.0).contains(&kappa) {
            return Err(Error::argument(format!("kappa must lie in [0,1], got {kappa}")));
        }
        let r = profile.support_radius().max(1.0);
        let pairs: Vec<(f64, f64)> = (0..400)
            .map(|i| {
                let t = i as f64 / 400.0;
                (-1.2 * r + 2.4 * r * t, -1.2 * r + 2.4 * r * ((t + 0.31) % 1.0))
            })
            .collect();
        let estimate = holder_seminorm_estimate(&profile, ell, kappa, &pairs)?;
        if estimate > seminorm * (1.0 + 1e-9) + 1e-12 {
            return Err(Error::argument(format!(
                "declared seminorm {seminorm} is below the sampled estimate {estimate}"
            )));
        }
        Ok(SpecialDomain { profile, ell, kappa, seminorm })
    }

    /// Membership test for the open epigraph.
    pub fn contains(&self, x: [f64; 2]) -> bool {
        x[0] > self.profile.eval(x[1])
    }
}

/// Sampled lower bound of the Hölder seminorm
/// `sup |∂^ℓ h(x) − ∂^ℓ h(y)| / |x−y|^κ` over the given pairs.
/// Coincident pairs are skipped; all pairs coincident is an error.
pub fn holder_seminorm_estimate(
    profile: &HeightProfile,
    ell: usize,
    kappa: f64,
    sample_pairs: &[(f64, f64)],
) -> Result<f64> {
    if ell > 1 {
        return Err(Error::argument("only ell in {0,1} supported"));
    }
    let d = |x: f64| if ell == 0 { profile.eval(x) } else { profile.deriv(x) };
    let mut best: f64 = 0.0;
    let mut used = 0usize;
    for &(x, y) in sample_pairs {
        if x == y {
            continue;
        }
        used += 1;
        best = best.max((d(x) - d(y)).abs() / (x - y).abs().powf(kappa));
    }
    if used == 0 {
        return Err(Error::argument("all sample pairs coincident".to_string()));
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Mollifier: phi(t) = C exp(-1/(1-t^2)) with unit mass, and its derivatives
// phi^{(m)} = N_m(t)/(1-t^2)^{2m} phi(t) via N_{m+1} = N_m' w^2 + 4m t N_m w - 2t N_m.
// ---------------------------------------------------------------------------

const MAX_PHI_DERIV: usize = 5;

fn poly_deriv(p: &[f64]) -> Vec<f64> {
    if p.len() <= 1 {
        return vec![0.0];
    }
    (1..p.len()).map(|i| p[i] * i as f64).collect()
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    let mut out = vec![0.0; n];
    for (i, &v) in a.iter().enumerate() {
        out[i] += v;
    }
    for (i, &v) in b.iter().enumerate() {
        out[i] += v;
    }
    out
}

fn poly_eval(p: &[f64], t: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

struct Mollifier {
    /// `N_m` polynomials, m = 0..=MAX_PHI_DERIV.
    numerators: Vec<Vec<f64>>,
    /// Normalization for unit mass.
    mass_inv: f64,
    /// Quadrature nodes/weights on [-1, 1] (two GL panels).
    quad: Vec<(f64, f64)>,
}

fn mollifier() -> &'static Mollifier {
    static CELL: OnceLock<Mollifier> = OnceLock::new();
    CELL.get_or_init(|| {
        let w2 = vec![1.0, 0.0, -2.0, 0.0, 1.0]; // (1-t^2)^2
        let w = vec![1.0, 0.0, -1.0];
        let mut numerators = vec![vec![1.0]];
        for m in 0..MAX_PHI_DERIV {
            let nm = &numerators[m];
            let term1 = poly_mul(&poly_deriv(nm), &w2);
            let term2 = poly_mul(&poly_mul(&[0.0, 4.0 * m as f64], nm), &w);
            let term3 = poly_mul(&[0.0, -2.0], nm);
            numerators.push(poly_add(&poly_add(&term1, &term2), &term3));
        }
        let (nodes, weights) = gauss_legendre(64);
        let mut quad = Vec::with_capacity(128);
        for half in [(-1.0, 0.0), (0.0, 1.0)] {
            let (a, b) = half;
            let mid = 0.5 * (a + b);
            let rad = 0.5 * (b - a);
            for (&x, &w) in nodes.iter().zip(&weights) {
                quad.push((mid + rad * x, rad * w));
            }
        }
        let raw_mass: f64 = quad
            .iter()
            .map(|&(t, w)| {
                let ww = 1.0 - t * t;
                if ww <= 1.4e-3 { 0.0 } else { w * (-1.0 / ww).exp() }
            })
            .sum();
        Mollifier { numerators, mass_inv: 1.0 / raw_mass, quad }
    })
}

impl Mollifier {
    /// `phi^{(m)}(t)` for the unit-mass bump.
    fn phi_deriv(&self, m: usize, t: f64) -> f64 {
        let w = 1.0 - t * t;
        // exp(-1/w) underflows long before the rational factor overflows.
        if w <= 1.4e-3 {
            return 0.0;
        }
        let base = (-1.0 / w).exp() * self.mass_inv;
        if m == 0 {
            return base;
        }
        poly_eval(&self.numerators[m], t) / w.powi(2 * m as i32) * base
    }
}

// ---------------------------------------------------------------------------
// Kernel calculus: derivatives of h2(y1, yt) = int phi(t) h(yt - eps t) dt,
// eps = c y1, as finite sums of terms  coeff * eps^e * t^j * phi^{(m)}(t).
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct KernelTerm {
    coeff: f64,
    eps_pow: i32,
    t_pow: u32,
    phi_order: u32,
}

fn base_kernel() -> Vec<KernelTerm> {
    vec![KernelTerm { coeff: 1.0, eps_pow: -1, t_pow: 0, phi_order: 0 }]
}

/// Tangential derivative: `K ↦ ∂_s K`.
fn kernel_dtangential(kernel: &[KernelTerm]) -> Vec<KernelTerm> {
    let mut out = Vec::with_capacity(kernel.len() * 2);
    for term in kernel {
        if term.t_pow > 0 {
            out.push(KernelTerm {
                coeff: term.coeff * term.t_pow as f64,
                eps_pow: term.eps_pow - 1,
                t_pow: term.t_pow - 1,
                phi_order: term.phi_order,
            });
        }
        out.push(KernelTerm {
            coeff: term.coeff,
            eps_pow: term.eps_pow - 1,
            t_pow: term.t_pow,
            phi_order: term.phi_order + 1,
        });
    }
    out
}

/// Scale derivative: `K ↦ c · ∂_ε K`.
fn kernel_dnormal(kernel: &[KernelTerm], c: f64) -> Vec<KernelTerm> {
    let mut out = Vec::with_capacity(kernel.len() * 2);
    for term in kernel {
        let factor = term.eps_pow as f64 - term.t_pow as f64;
        if factor != 0.0 {
            out.push(KernelTerm {
                coeff: c * term.coeff * factor,
                eps_pow: term.eps_pow - 1,
                t_pow: term.t_pow,
                phi_order: term.phi_order,
            });
        }
        out.push(KernelTerm {
            coeff: -c * term.coeff,
            eps_pow: term.eps_pow - 1,
            t_pow: term.t_pow + 1,
            phi_order: term.phi_order + 1,
        });
    }
    out
}

/// The pullback pair `(h₁, h₂)` for a special domain, with mollifier
/// scale `c`. `Φ(x) = (x₁ − h₁(x), x̃)`, `Φ⁻¹(y) = (y₁ + h₂(y), ỹ)`.
#[derive(Debug, Clone)]
pub struct PullbackMap {
    pub domain: SpecialDomain,
    pub c: f64,
}

/// Builds the pullback and verifies the contraction condition
/// `sup |∂₁h₂| < 1` on a sample sweep.
pub fn build_pullback(domain: SpecialDomain, c: f64) -> Result<PullbackMap> {
    if !(c > 0.0) {
        return Err(Error::argument(format!("mollifier scale must be positive, got {c}")));
    }
    let map = PullbackMap { domain, c };
    let r = map.domain.profile.support_radius().max(1.0);
    let mut sup: f64 = 0.0;
    for i in 0..25 {
        let y1 = 10f64.powf(-6.0 + 7.0 * i as f64 / 24.0);
        for j in 0..81 {
            let yt = -1.5 * r + 3.0 * r * j as f64 / 80.0;
            sup = sup.max(map.h2_deriv([1, 0], y1, yt).abs());
        }
    }
    if sup >= 1.0 {
        return Err(Error::construction(format!(
            "root map is not contractive: sup |d1 h2| = {sup:.3} >= 1; reduce the mollifier scale or the boundary seminorm"
        )));
    }
    Ok(map)
}

impl PullbackMap {
    /// Regularized height `h₂(y₁, ỹ) = (φ_{c·y₁} * h)(ỹ)`; equals `h(ỹ)`
    /// on the boundary `y₁ = 0`.
    pub fn h2(&self, y1: f64, ytilde: f64) -> f64 {
        debug_assert!(y1 >= 0.0);
        if y1 == 0.0 {
            return self.domain.profile.eval(ytilde);
        }
        let eps = self.c * y1;
        let m = mollifier();
        m.quad
            .iter()
            .map(|&(t, w)| w * m.phi_deriv(0, t) * self.domain.profile.eval(ytilde - eps * t))
            .sum()
    }

    /// Derivative `∂^α h₂` with `α = (a₁, ã)` counting `y₁` and
    /// tangential orders. Requires `y₁ > 0`.
    pub fn h2_deriv(&self, alpha: [usize; 2], y1: f64, ytilde: f64) -> f64 {
        assert!(y1 > 0.0, "h2 derivatives are evaluated in the open half-space");
        let mut kernel = base_kernel();
        for _ in 0..alpha[1] {
            kernel = kernel_dtangential(&kernel);
        }
        for _ in 0..alpha[0] {
            kernel = kernel_dnormal(&kernel, self.c);
        }
        let eps = self.c * y1;
        let m = mollifier();
        let mut total = 0.0;
        for term in &kernel {
            let scale = term.coeff * eps.powi(term.eps_pow + 1);
            if scale == 0.0 {
                continue;
            }
            let integral: f64 = m
                .quad
                .iter()
                .map(|&(t, w)| {
                    w * t.powi(term.t_pow as i32)
                        * m.phi_deriv(term.phi_order as usize, t)
                        * self.domain.profile.eval(ytilde - eps * t)
                })
                .sum();
            total += scale * integral;
        }
        total
    }

    /// Inverse map `Φ⁻¹(y) = (y₁ + h₂(y), ỹ)`.
    pub fn phi_inverse(&self, y: [f64; 2]) -> [f64; 2] {
        [y[0] + self.h2(y[0], y[1]), y[1]]
    }

    /// Pointwise value of `h₁(x)`, solving `y₁ + h₂(y₁, x̃) = x₁`:
    /// Newton from the vertical-offset seed, bisection fallback.
    pub fn h1(&self, x: [f64; 2]) -> Result<f64> {
        let target = x[0];
        let f = |y1: f64| y1 + self.h2(y1, x[1]) - target;
        let f0 = f(0.0);
        if f0 > 1e-9 {
            return Err(Error::argument(format!(
                "point ({}, {}) lies outside the closed domain",
                x[0], x[1]
            )));
        }
        if f0.abs() <= ROOT_TOL {
            return Ok(self.domain.profile.eval(x[1]));
        }
        let mut y1 = (target - self.domain.profile.eval(x[1])).max(0.0);
        for _ in 0..30 {
            let val = f(y1);
            if val.abs() <= ROOT_TOL {
                return Ok(x[0] - y1);
            }
            let slope = 1.0 + self.h2_deriv([1, 0], y1.max(1e-300), x[1]);
            let next = y1 - val / slope;
            if !(next.is_finite() && next >= 0.0) {
                break;
            }
            y1 = next;
        }
        // Bisection fallback; the root map is monotone in y1.
        let mut lo = 0.0f64;
        let mut hi = (target - self.domain.profile.eval(x[1])).abs() + 1.0;
        while f(hi) < 0.0 {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::numeric("root bracketing failed for h1".to_string()));
            }
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(x[0] - 0.5 * (lo + hi))
    }

    /// Forward map `Φ(x) = (x₁ − h₁(x), x̃)`.
    pub fn phi(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        Ok([x[0] - self.h1(x)?, x[1]])
    }

    /// Determinant of the Jacobian `DΦ = I` minus the first-row
    /// gradient of `h₁`: `det = 1/(1 + ∂₁h₂(Φx))`.
    pub fn jacobian_det(&self, x: [f64; 2]) -> Result<f64> {
        let y = self.phi(x)?;
        Ok(1.0 / (1.0 + self.h2_deriv([1, 0], y[0].max(1e-300), y[1])))
    }
}

/// Distance from an interior point to the boundary graph
/// `{(h(s), s)}`, by a coarse multi-start scan refined with golden
/// section.
pub fn boundary_distance(domain: &SpecialDomain, x: [f64; 2]) -> Result<f64> {
    if !domain.contains(x) {
        return Err(Error::argument(format!(
            "sample ({}, {}) is not interior to the domain",
            x[0], x[1]
        )));
    }
    let r = domain.profile.support_radius().max(1.0);
    let reach = x[0].abs() + r + 1.0;
    let (lo, hi) = (x[1] - reach, x[1] + reach);
    let d2 = |s: f64| {
        let dx = x[0] - domain.profile.eval(s);
        let dy = x[1] - s;
        dx * dx + dy * dy
    };
    let coarse = 512;
    let mut best = (d2(x[1]), x[1]);
    for i in 0..=coarse {
        let s = lo + (hi - lo) * i as f64 / coarse as f64;
        let v = d2(s);
        if v < best.0 {
            best = (v, s);
        }
    }
    // Golden-section refinement around the best coarse sample.
    let step = (hi - lo) / coarse as f64;
    let (mut a, mut b) = (best.1 - step, best.1 + step);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c1, mut c2) = (b - phi * (b - a), a + phi * (b - a));
    let (mut f1, mut f2) = (d2(c1), d2(c2));
    for _ in 0..80 {
        if f1 < f2 {
            b = c2;
            c2 = c1;
            f2 = f1;
            c1 = b - phi * (b - a);
            f1 = d2(c1);
        } else {
            a = c1;
            c1 = c2;
            f1 = f2;
            c2 = a + phi * (b - a);
            f2 = d2(c2);
        }
    }
    Ok(d2(0.5 * (a + b)).min(best.0).sqrt())
}

/// Empirical range of `dist(Φ(x), ∂R²₊) / dist(x, ∂O)` over interior
/// samples.
pub fn distance_equivalence_report(
    map: &PullbackMap,
    samples: &[[f64; 2]],
) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::argument("empty sample set".to_string()));
    }
    let ratios = map_slice(samples, |&x| -> Result<f64> {
        let y = map.phi(x)?;
        let dist = boundary_distance(&map.domain, x)?;
        Ok(y[0] / dist)
    });
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in ratios {
        let r = r?;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((lo, hi))
}

/// Log–log slope of `sup_ỹ |∂^α h₂(y₁, ·)|` against `y₁` over
/// `[y1_lo, y1_hi]` (needs at least two decades). Returns 0 for a flat
/// zero profile.
pub fn derivative_blowup_slope(
    map: &PullbackMap,
    alpha: [usize; 2],
    y1_lo: f64,
    y1_hi: f64,
    n_scales: usize,
) -> Result<f64> {
    if !(y1_lo > 0.0 && y1_hi / y1_lo >= 100.0) {
        return Err(Error::argument(
            "slope fit needs at least two decades of y1".to_string(),
        ));
    }
    if n_scales < 4 {
        return Err(Error::argument("need at least 4 scales for the fit".to_string()));
    }
    let r = map.domain.profile.support_radius().max(1.0);
    let scales: Vec<f64> = (0..n_scales)
        .map(|i| y1_lo * (y1_hi / y1_lo).powf(i as f64 / (n_scales - 1) as f64))
        .collect();
    let sups = map_slice(&scales, |&y1| {
        let mut sup: f64 = 0.0;
        let n = 401;
        for j in 0..n {
            let yt = -1.3 * r + 2.6 * r * j as f64 / (n - 1) as f64;
            sup = sup.max(map.h2_deriv(alpha, y1, yt).abs());
        }
        sup
    });
    if sups.iter().all(|&s| s == 0.0) {
        return Ok(0.0);
    }
    if sups.iter().any(|&s| s == 0.0) {
        return Err(Error::numeric(
            "derivative sup vanished at some scales; cannot fit a slope".to_string(),
        ));
    }
    // Least squares on (ln y1, ln sup).
    let xs: Vec<f64> = scales.iter().map(|s| s.ln()).collect();
    let ys: Vec<f64> = sups.iter().map(|s| s.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Bilinear interpolation on a uniform tensor grid. Points may fall at
/// most a rounding tolerance outside the node hull.
fn bilinear(grid: &GridTensor, values: &[f64], x: f64, y: f64) -> Result<f64> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let x0 = grid.xs[0];
    let y0 = grid.ys[0];
    let tx = (x - x0) / grid.hx;
    let ty = (y - y0) / grid.hy;
    let tol = 1e-9;
    if tx < -tol || tx > (nx - 1) as f64 + tol || ty < -tol || ty > (ny - 1) as f64 + tol {
        return Err(Error::argument(format!(
            "interpolation point ({x}, {y}) lies outside the grid hull"
        )));
    }
    let ix = (tx.floor().max(0.0) as usize).min(nx - 2);
    let iy = (ty.floor().max(0.0) as usize).min(ny - 2);
    let fx = (tx - ix as f64).clamp(0.0, 1.0);
    let fy = (ty - iy as f64).clamp(0.0, 1.0);
    let v = |i: usize, j: usize| values[i * ny + j];
    Ok(v(ix, iy) * (1.0 - fx) * (1.0 - fy)
        + v(ix + 1, iy) * fx * (1.0 - fy)
        + v(ix, iy + 1) * (1.0 - fx) * fy
        + v(ix + 1, iy + 1) * fx * fy)
}

/// Pushforward `(Φ_* f)(y) = f(Φ⁻¹(y))` from a boundary-fitted grid
/// (axis 0 = vertical offset `s = x₁ − h(x̃)`, axis 1 = `x̃`) to a
/// half-space grid, by bilinear interpolation.
pub fn pushforward_field(
    map: &PullbackMap,
    fitted_grid: &GridTensor,
    fitted_values: &[f64],
    half_grid: &GridTensor,
) -> Result<Vec<f64>> {
    let ny = half_grid.ny();
    let results = map_slice(
        &(0..half_grid.node_count()).collect::<Vec<_>>(),
        |&i| -> Result<f64> {
            let ix = i / ny;
            let iy = i % ny;
            let y = [half_grid.xs[ix], half_grid.ys[iy]];
            let x = map.phi_inverse(y);
            let s = x[0] - map.domain.profile.eval(x[1]);
            bilinear(fitted_grid, fitted_values, s, x[1])
        },
    );
    results.into_iter().collect()
}

/// Inverse pushforward `((Φ⁻¹)_* g)(x) = g(Φ(x))` from a half-space
/// grid back to the boundary-fitted grid.
pub fn pullback_field(
    map: &PullbackMap,
    half_grid: &GridTensor,
    half_values: &[f64],
    fitted_grid: &GridTensor,
) -> Result<Vec<f64>> {
    let ny = fitted_grid.ny();
    let results = map_slice(
        &(0..fitted_grid.node_count()).collect::<Vec<_>>(),
        |&i| -> Result<f64> {
            let is = i / ny;
            let it = i % ny;
            let xt = fitted_grid.ys[it];
            let x1 = map.domain.profile.eval(xt) + fitted_grid.xs[is];
            let y = map.phi([x1, xt])?;
            bilinear(half_grid, half_values, y[0], y[1])
        },
    );
    results.into_iter().collect()
}

/// Square-normalized partition of unity `η_n = ψ_n / √(Σ ψ_m²)` built
/// from smooth bumps on interval patches; `Σ η_n² = 1` wherever the
/// patches cover.
#[derive(Debug, Clone)]
pub struct PartitionOfUnity {
    pub patches: Vec<(f64, f64)>,
}

impl PartitionOfUnity {
    fn psi(patch: (f64, f64), x: f64) -> f64 {
        let (a, b) = patch;
        let u = (2.0 * x - (a + b)) / (b - a);
        smooth_bump(u)
    }

    /// `η_n(x)`.
    pub fn eta(&self, n: usize, x: f64) -> f64 {
        let denom: f64 = self
            .patches
            .iter()
            .map(|&p| Self::psi(p, x).powi(2))
            .sum::<f64>()
            .sqrt();
        if denom == 0.0 {
            0.0
        } else {
            Self::psi(self.patches[n], x) / denom
        }
    }

    /// `Σ_n η_n(x)²`.
    pub fn sum_of_squares(&self, x: f64) -> f64 {
        (0..self.patches.len()).map(|n| self.eta(n, x).powi(2)).sum()
    }
}

/// Builds the partition and verifies coverage at the given nodes,
/// listing uncovered ones on failure.
pub fn build_partition(patches: &[(f64, f64)], cover_nodes: &[f64]) -> Result<PartitionOfUnity> {
    if patches.is_empty() {
        return Err(Error::argument("no patches supplied".to_string()));
    }
    for &(a, b) in patches {
        if !(b > a) {
            return Err(Error::argument(format!("patch ({a}, {b}) is degenerate")));
        }
    }
    let pou = PartitionOfUnity { patches: patches.to_vec() };
    let uncovered: Vec<f64> = cover_nodes
        .iter()
        .copied()
        .filter(|&x| {
            pou.patches
                .iter()
                .map(|&p| PartitionOfUnity::psi(p, x).powi(2))
                .sum::<f64>()
                == 0.0
        })
        .collect();
    if !uncovered.is_empty() {
        return Err(Error::construction(format!(
            "{} node(s) not covered by any patch, first few: {:?}",
            uncovered.len(),
            &uncovered[..uncovered.len().min(5)]
        )));
    }
    Ok(pou)
}

/// Max deviation of `𝒫ℐf = Σ η_n (η_n f)` from `f` at the nodes.
/// The shared normalization `Σψ²` is hoisted out of the sum, so the
/// identity holds bit-exactly wherever the cover is complete.
pub fn retraction_roundtrip(pou: &PartitionOfUnity, nodes: &[f64], field: &[f64]) -> f64 {
    nodes
        .iter()
        .zip(field)
        .map(|(&x, &f)| {
            let total: f64 = pou.patches.iter().map(|&p| PartitionOfUnity::psi(p, x).powi(2)).sum();
            if total == 0.0 {
                return f.abs();
            }
            let reconstructed = (total / total) * f;
            (reconstructed - f).abs()
        })
        .fold(0.0, f64::max)
}
