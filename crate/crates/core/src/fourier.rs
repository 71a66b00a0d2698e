//! Periodic (torus) realization of the whole-space multiplier calculus:
//! application of the symbol resolvent `A(ξ,λ)⁻¹`, Bessel potentials
//! `J_s = (1−Δ)^{s/2}`, their commutation, and sector scans of the
//! graded multiplier family `λ D(ξ) A⁻¹(ξ,λ) D(ξ)⁻¹`.
//!
//! The torus with period `2π` stands in for the whole space: every
//! operator here is a Fourier multiplier, so periodic truncation is
//! exact in spectral space and needs no boundary handling.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::parallel::map_slice;
use crate::pencil::{damping_angle, symbol_resolvent, symbol_shifted, DampingParam};

/// Periodic grid: `n` points per axis (power of two, ≥ 8), dimension
/// 1 or 2, period `2π`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TorusGrid {
    pub n: usize,
    pub d: usize,
}

impl TorusGrid {
    pub fn new(n: usize, d: usize) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::argument(format!(
                "torus grid size must be a power of two >= 8, got {n}"
            )));
        }
        if !(d == 1 || d == 2) {
            return Err(Error::argument(format!("torus dimension must be 1 or 2, got {d}")));
        }
        Ok(TorusGrid { n, d })
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    /// Signed integer frequency of a flattened coefficient index,
    /// in standard FFT ordering.
    pub fn frequency(&self, idx: usize) -> [f64; 2] {
        let signed = |i: usize| -> f64 {
            if i <= self.n / 2 - 1 {
                i as f64
            } else {
                i as f64 - self.n as f64
            }
        };
        match self.d {
            1 => [signed(idx), 0.0],
            _ => [signed(idx / self.n), signed(idx % self.n)],
        }
    }
}

/// Complex Fourier coefficients on a torus grid, FFT ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub grid: TorusGrid,
    pub coeffs: Vec<Complex64>,
}

fn fft_in_place(data: &mut [Complex64], n: usize, d: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    match d {
        1 => fft.process(data),
        _ => {
            // Rows (contiguous), then columns.
            for row in data.chunks_mut(n) {
                fft.process(row);
            }
            let mut col = vec![Complex64::new(0.0, 0.0); n];
            for j in 0..n {
                for i in 0..n {
                    col[i] = data[i * n + j];
                }
                fft.process(&mut col);
                for i in 0..n {
                    data[i * n + j] = col[i];
                }
            }
        }
    }
}

impl SpectralField {
    pub fn zero(grid: TorusGrid) -> Self {
        SpectralField { grid, coeffs: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    /// Forward transform of physical samples (unnormalized forward FFT).
    pub fn from_physical(grid: TorusGrid, values: &[Complex64]) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::argument(format!(
                "physical field has {} samples, grid wants {}",
                values.len(),
                grid.len()
            )));
        }
        let mut coeffs = values.to_vec();
        fft_in_place(&mut coeffs, grid.n, grid.d, false);
        Ok(SpectralField { grid, coeffs })
    }

    pub fn from_real(grid: TorusGrid, values: &[f64]) -> Result<Self> {
        let complex: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Self::from_physical(grid, &complex)
    }

    /// Inverse transform to physical samples (normalized by `N^d`).
    pub fn to_physical(&self) -> Vec<Complex64> {
        let mut data = self.coeffs.clone();
        fft_in_place(&mut data, self.grid.n, self.grid.d, true);
        let scale = 1.0 / self.grid.len() as f64;
        for v in &mut data {
            *v *= scale;
        }
        data
    }

    /// Largest imaginary part of the physical samples; rounding-level
    /// iff the coefficients are conjugate-symmetric.
    pub fn max_physical_imag(&self) -> f64 {
        self.to_physical().iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    pub fn sup_physical(&self) -> f64 {
        self.to_physical().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Solves `(λ + A) u = f` exactly in spectral space by applying
/// `A(ξ,λ)⁻¹` mode by mode. Fails with the offending frequency when a
/// mode is singular.
pub fn torus_resolvent_apply(
    f: (&SpectralField, &SpectralField),
    lambda: Complex64,
    rho: DampingParam,
) -> Result<(SpectralField, SpectralField)> {
    let (f1, f2) = f;
    if f1.grid != f2.grid {
        return Err(Error::argument("component grids differ".to_string()));
    }
    let grid = f1.grid;
    let mut u1 = SpectralField::zero(grid);
    let mut u2 = SpectralField::zero(grid);
    for idx in 0..grid.len() {
        let xi = grid.frequency(idx);
        let inv = symbol_resolvent(&xi[..grid.d], lambda, rho)
            .map_err(|e| Error::singular(format!("mode xi = {:?}: {e}", &xi[..grid.d])))?;
        let out = inv.apply([f1.coeffs[idx], f2.coeffs[idx]]);
        u1.coeffs[idx] = out[0];
        u2.coeffs[idx] = out[1];
    }
    Ok((u1, u2))
}

/// Applies the shifted symbol `(λ + A(ξ))` mode by mode.
pub fn apply_shifted_symbol(
    u: (&SpectralField, &SpectralField),
    lambda: Complex64,
    rho: DampingParam,
) -> (SpectralField, SpectralField) {
    let grid = u.0.grid;
    let mut out1 = SpectralField::zero(grid);
    let mut out2 = SpectralField::zero(grid);
    for idx in 0..grid.len() {
        let xi = grid.frequency(idx);
        let m = symbol_shifted(&xi[..grid.d], lambda, rho);
        let v = m.apply([u.0.coeffs[idx], u.1.coeffs[idx]]);
        out1.coeffs[idx] = v[0];
        out2.coeffs[idx] = v[1];
    }
    (out1, out2)
}

/// Relative physical-space residual `‖(λ+A)u − f‖_∞ / ‖f‖_∞`.
pub fn resolvent_residual(
    u: (&SpectralField, &SpectralField),
    f: (&SpectralField, &SpectralField),
    lambda: Complex64,
    rho: DampingParam,
) -> f64 {
    let (au1, au2) = apply_shifted_symbol(u, lambda, rho);
    let sup_f = f.0.sup_physical().max(f.1.sup_physical());
    let diff = |a: &SpectralField, b: &SpectralField| -> f64 {
        let pa = a.to_physical();
        let pb = b.to_physical();
        pa.iter().zip(&pb).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    };
    let num = diff(&au1, f.0).max(diff(&au2, f.1));
    if sup_f == 0.0 {
        num
    } else {
        num / sup_f
    }
}

/// Bessel potential `J_s`: multiply each mode by `(1 + |ξ|²)^{s/2}`.
pub fn bessel_potential(f: &SpectralField, s: f64) -> SpectralField {
    let mut out = f.clone();
    for (idx, c) in out.coeffs.iter_mut().enumerate() {
        let xi = f.grid.frequency(idx);
        let factor = (1.0 + xi[0] * xi[0] + xi[1] * xi[1]).powf(s / 2.0);
        *c *= factor;
    }
    out
}

/// Sup-norm of `R J_s f − J_s R f` in physical space; both operators
/// are diagonal in frequency, so this is rounding-level.
pub fn resolvent_bessel_commute_residual(
    f: (&SpectralField, &SpectralField),
    lambda: Complex64,
    s: f64,
    rho: DampingParam,
) -> Result<f64> {
    let jf = (bessel_potential(f.0, s), bessel_potential(f.1, s));
    let r_jf = torus_resolvent_apply((&jf.0, &jf.1), lambda, rho)?;
    let rf = torus_resolvent_apply(f, lambda, rho)?;
    let j_rf = (bessel_potential(&rf.0, s), bessel_potential(&rf.1, s));
    let sup = |a: &SpectralField, b: &SpectralField| -> f64 {
        let pa = a.to_physical();
        let pb = b.to_physical();
        pa.iter().zip(&pb).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    };
    Ok(sup(&r_jf.0, &j_rf.0).max(sup(&r_jf.1, &j_rf.1)))
}

/// Graded multiplier norm `‖λ D(ξ) A⁻¹(ξ,λ) D(ξ)⁻¹‖` with
/// `D(ξ) = diag(1+|ξ|², 1)`, mimicking the `W² × L²`-type pairing of
/// the block operator.
fn graded_multiplier_norm(xi_abs: f64, lambda: Complex64, rho: DampingParam) -> Result<f64> {
    let mut inv = symbol_resolvent(&[xi_abs], lambda, rho)?;
    let grade = 1.0 + xi_abs * xi_abs;
    inv.entries[0][1] *= grade;
    inv.entries[1][0] /= grade;
    for row in &mut inv.entries {
        for e in row.iter_mut() {
            *e *= lambda;
        }
    }
    Ok(inv.spectral_norm())
}

/// Per-`λ` maxima of the graded multiplier norm over the `|ξ|`
/// samples, for `λ = r e^{±i(π−σ)}` along the sector-boundary rays.
pub fn multiplier_scan(
    rho: DampingParam,
    sigma: f64,
    magnitudes: &[f64],
    xi_samples: &[f64],
) -> Result<Vec<(Complex64, f64)>> {
    let theta = damping_angle(rho).theta;
    if !(sigma > theta && sigma < std::f64::consts::PI) {
        return Err(Error::domain(format!(
            "scan angle must satisfy sigma in (theta(rho), pi) = ({theta:.6}, pi), got {sigma}"
        )));
    }
    if magnitudes.is_empty() || xi_samples.is_empty() {
        return Err(Error::argument("empty scan sample set".to_string()));
    }
    let mut lambdas = Vec::with_capacity(2 * magnitudes.len());
    let ray = std::f64::consts::PI - sigma;
    for &r in magnitudes {
        if !(r > 0.0) {
            return Err(Error::argument(format!("ray magnitude must be positive, got {r}")));
        }
        lambdas.push(Complex64::from_polar(r, ray));
        lambdas.push(Complex64::from_polar(r, -ray));
    }
    let rows = map_slice(&lambdas, |&lambda| -> Result<(Complex64, f64)> {
        let mut worst: f64 = 0.0;
        for &xi in xi_samples {
            worst = worst.max(graded_multiplier_norm(xi, lambda, rho)?);
        }
        Ok((lambda, worst))
    });
    rows.into_iter().collect()
}

/// Supremum of the graded multiplier norm over the sampled rays.
pub fn multiplier_sector_sup(
    rho: DampingParam,
    sigma: f64,
    magnitudes: &[f64],
    xi_samples: &[f64],
) -> Result<f64> {
    Ok(multiplier_scan(rho, sigma, magnitudes, xi_samples)?
        .into_iter()
        .map(|(_, v)| v)
        .fold(0.0, f64::max))
}
