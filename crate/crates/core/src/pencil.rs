//! Closed-form algebra of the quadratic pencil `V(λ) = λ² + λρ√b + b`,
//! the damping angle, sector geometry, and the 2×2 matrix symbol of the
//! damped plate block operator together with its explicit resolvent.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Threshold below which a resolvent denominator counts as singular.
/// No regularization is applied past this point.
pub const SINGULAR_DENOMINATOR: f64 = 1e-300;

/// Damping strength `ρ > 0` of the structural damping term `−ρΔ∂_t u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampingParam(f64);

impl DampingParam {
    pub fn new(rho: f64) -> Result<Self> {
        if rho.is_finite() && rho > 0.0 {
            Ok(DampingParam(rho))
        } else {
            Err(Error::domain(format!(
                "damping parameter must satisfy rho > 0, got {rho}"
            )))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Roots `α±` of the scalar pencil `α² − ρα + 1`, so that
/// `V(λ) = (α₊λ + √b)(α₋λ + √b)`.
///
/// For `0 < ρ < 2` the roots are `e^{±iϑ(ρ)}`; for `ρ ≥ 2` both are
/// real and positive. Always `α₊α₋ = 1` and `α₊ + α₋ = ρ`.
#[derive(Debug, Clone, Copy)]
pub struct PencilRoots {
    pub alpha_plus: Complex64,
    pub alpha_minus: Complex64,
}

/// Angle `ϑ(ρ) ∈ [0, π/2)` of the pencil roots: `arg α± = ±ϑ(ρ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorAngle {
    pub theta: f64,
}

/// A 2×2 complex matrix value of the symbol `A(ξ)` or of a resolvent
/// `A(ξ,λ)⁻¹`, stored row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolMatrix {
    pub entries: [[Complex64; 2]; 2],
}

impl SymbolMatrix {
    pub fn identity() -> Self {
        SymbolMatrix {
            entries: [
                [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
                [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            ],
        }
    }

    pub fn mul(&self, other: &SymbolMatrix) -> SymbolMatrix {
        let a = &self.entries;
        let b = &other.entries;
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        SymbolMatrix { entries: out }
    }

    pub fn apply(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        [
            self.entries[0][0] * v[0] + self.entries[0][1] * v[1],
            self.entries[1][0] * v[0] + self.entries[1][1] * v[1],
        ]
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.entries
            .iter()
            .flatten()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Spectral norm (largest singular value), via the closed-form
    /// eigenvalues of the 2×2 Hermitian matrix `M*M`.
    pub fn spectral_norm(&self) -> f64 {
        let m = &self.entries;
        // Entries of M*M (Hermitian, only need the real structure).
        let a = m[0][0].norm_sqr() + m[1][0].norm_sqr();
        let d = m[0][1].norm_sqr() + m[1][1].norm_sqr();
        let b = m[0][0].conj() * m[0][1] + m[1][0].conj() * m[1][1];
        let tr = a + d;
        let disc = ((a - d) * (a - d) + 4.0 * b.norm_sqr()).max(0.0).sqrt();
        (0.5 * (tr + disc)).max(0.0).sqrt()
    }

    pub fn sub(&self, other: &SymbolMatrix) -> SymbolMatrix {
        let mut out = self.entries;
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] -= other.entries[i][j];
            }
        }
        SymbolMatrix { entries: out }
    }

    /// Determinant.
    pub fn det(&self) -> Complex64 {
        self.entries[0][0] * self.entries[1][1] - self.entries[0][1] * self.entries[1][0]
    }

    /// Eigenvalues from the characteristic polynomial.
    pub fn eigenvalues(&self) -> [Complex64; 2] {
        let tr = self.entries[0][0] + self.entries[1][1];
        let det = self.det();
        let disc = (tr * tr - 4.0 * det).sqrt();
        [(tr + disc) * 0.5, (tr - disc) * 0.5]
    }
}

/// Pencil roots `α±(ρ)`: oscillatory branch `ρ/2 ± i√(1 − ρ²/4)` for
/// `0 < ρ < 2`, real branch `ρ/2 ± √(ρ²/4 − 1)` for `ρ ≥ 2` (the two
/// branches agree at `ρ = 2`).
pub fn pencil_roots(rho: DampingParam) -> PencilRoots {
    let r = rho.get();
    if r < 2.0 {
        let im = (1.0 - r * r / 4.0).sqrt();
        PencilRoots {
            alpha_plus: Complex64::new(r / 2.0, im),
            alpha_minus: Complex64::new(r / 2.0, -im),
        }
    } else {
        let s = (r * r / 4.0 - 1.0).sqrt();
        PencilRoots {
            alpha_plus: Complex64::new(r / 2.0 + s, 0.0),
            alpha_minus: Complex64::new(r / 2.0 - s, 0.0),
        }
    }
}

/// Damping angle `ϑ(ρ) = arctan((2/ρ)√(1 − ρ²/4))` for `ρ < 2`, else 0.
/// Equals `arg α₊`, increases to `π/2` as `ρ ↓ 0` and vanishes for
/// `ρ ≥ 2`.
pub fn damping_angle(rho: DampingParam) -> SectorAngle {
    let r = rho.get();
    let theta = if r < 2.0 {
        ((2.0 / r) * (1.0 - r * r / 4.0).sqrt()).atan()
    } else {
        0.0
    };
    SectorAngle { theta }
}

/// Evaluate the scalar pencil `V(λ) = λ² + λρ√b + b` for `b > 0`.
pub fn pencil_value(lambda: Complex64, b: f64, rho: DampingParam) -> Result<Complex64> {
    if !(b.is_finite() && b > 0.0) {
        return Err(Error::domain(format!(
            "pencil base must satisfy b > 0, got {b}"
        )));
    }
    let sqrt_b = b.sqrt();
    Ok(lambda * lambda + lambda * rho.get() * sqrt_b + b)
}

/// Matrix symbol `A(ξ) = [[0, −1], [|ξ|⁴, ρ|ξ|²]]`.
pub fn symbol(xi: &[f64], rho: DampingParam) -> SymbolMatrix {
    let xi2: f64 = xi.iter().map(|x| x * x).sum();
    SymbolMatrix {
        entries: [
            [Complex64::new(0.0, 0.0), Complex64::new(-1.0, 0.0)],
            [
                Complex64::new(xi2 * xi2, 0.0),
                Complex64::new(rho.get() * xi2, 0.0),
            ],
        ],
    }
}

/// Shifted symbol `A(ξ, λ) = λI + A(ξ)`.
pub fn symbol_shifted(xi: &[f64], lambda: Complex64, rho: DampingParam) -> SymbolMatrix {
    let mut m = symbol(xi, rho);
    m.entries[0][0] += lambda;
    m.entries[1][1] += lambda;
    m
}

/// Explicit resolvent
/// `A(ξ,λ)⁻¹ = det⁻¹ [[λ + ρ|ξ|², 1], [−|ξ|⁴, λ]]` with
/// `det = (α₊λ + |ξ|²)(α₋λ + |ξ|²)`.
///
/// Fails with a singularity error naming the vanishing factor when
/// either `α±λ + |ξ|²` falls below [`SINGULAR_DENOMINATOR`] in modulus.
pub fn symbol_resolvent(xi: &[f64], lambda: Complex64, rho: DampingParam) -> Result<SymbolMatrix> {
    let xi2: f64 = xi.iter().map(|x| x * x).sum();
    let roots = pencil_roots(rho);
    let factor_plus = roots.alpha_plus * lambda + xi2;
    let factor_minus = roots.alpha_minus * lambda + xi2;
    for (name, factor) in [("alpha_plus", factor_plus), ("alpha_minus", factor_minus)] {
        if factor.norm() < SINGULAR_DENOMINATOR {
            return Err(Error::singular(format!(
                "resolvent factor ({name}*lambda + |xi|^2) vanishes at lambda = {lambda}, |xi|^2 = {xi2}"
            )));
        }
    }
    let det = factor_plus * factor_minus;
    let inv_det = 1.0 / det;
    Ok(SymbolMatrix {
        entries: [
            [
                (lambda + rho.get() * xi2) * inv_det,
                Complex64::new(1.0, 0.0) * inv_det,
            ],
            [Complex64::new(-(xi2 * xi2), 0.0) * inv_det, lambda * inv_det],
        ],
    })
}

/// Membership in the open sector `Σ_ω = {z ≠ 0 : |arg z| < ω}`, with
/// the principal argument in `(−π, π]` and strict inequality.
pub fn sector_contains(z: Complex64, omega: f64) -> bool {
    if z.re == 0.0 && z.im == 0.0 {
        return false;
    }
    z.arg().abs() < omega
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn rho(r: f64) -> DampingParam {
        DampingParam::new(r).unwrap()
    }

    #[test]
    fn roots_at_rho_two_are_unit() {
        let r = pencil_roots(rho(2.0));
        assert_relative_eq!(r.alpha_plus.re, 1.0, epsilon = 1e-15);
        assert_relative_eq!(r.alpha_plus.im, 0.0, epsilon = 1e-15);
        assert_relative_eq!(r.alpha_minus.re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn roots_at_rho_sqrt2() {
        let r = pencil_roots(rho(2f64.sqrt()));
        let expected = 2f64.sqrt() / 2.0;
        assert_relative_eq!(r.alpha_plus.re, expected, epsilon = 1e-15);
        assert_relative_eq!(r.alpha_plus.im, expected, epsilon = 1e-15);
        assert_relative_eq!(r.alpha_minus.im, -expected, epsilon = 1e-15);
    }

    #[test]
    fn rejects_nonpositive_rho() {
        assert!(DampingParam::new(0.0).is_err());
        assert!(DampingParam::new(-1.0).is_err());
        assert!(DampingParam::new(f64::NAN).is_err());
    }

    #[test]
    fn angle_values() {
        assert_eq!(damping_angle(rho(2.0)).theta, 0.0);
        assert_eq!(damping_angle(rho(5.0)).theta, 0.0);
        assert_relative_eq!(
            damping_angle(rho(2f64.sqrt())).theta,
            std::f64::consts::FRAC_PI_4,
            epsilon = 1e-15
        );
        assert!(damping_angle(rho(0.01)).theta > 1.56);
    }

    #[test]
    fn angle_continuous_and_monotone() {
        // 1000-point grid on (0, 2]: strictly decreasing, -> 0 at 2.
        let n = 1000;
        let mut prev = f64::INFINITY;
        for i in 1..=n {
            let r = 2.0 * (i as f64) / (n as f64);
            let th = damping_angle(rho(r)).theta;
            assert!(th < prev, "theta must strictly decrease on (0,2]");
            prev = th;
        }
        assert!(prev.abs() < 1e-6);
        // Continuity at rho = 2 from the left.
        assert!(damping_angle(rho(2.0 - 1e-9)).theta < 1e-4);
    }

    #[test]
    fn pencil_value_examples() {
        let v = pencil_value(Complex64::new(0.0, 0.0), 4.0, rho(1.0)).unwrap();
        assert_relative_eq!(v.re, 4.0, epsilon = 1e-15);
        let v = pencil_value(Complex64::new(1.0, 0.0), 1.0, rho(2.0)).unwrap();
        assert_relative_eq!(v.re, 4.0, epsilon = 1e-15);
        assert!(pencil_value(Complex64::new(1.0, 0.0), 0.0, rho(1.0)).is_err());
    }

    #[test]
    fn symbol_values() {
        let m = symbol(&[0.0, 0.0], rho(1.0));
        assert_eq!(m.entries[0][0], Complex64::new(0.0, 0.0));
        assert_eq!(m.entries[0][1], Complex64::new(-1.0, 0.0));
        assert_eq!(m.entries[1][0], Complex64::new(0.0, 0.0));
        let m = symbol(&[1.0], rho(1.0));
        assert_eq!(m.entries[1][0], Complex64::new(1.0, 0.0));
        assert_eq!(m.entries[1][1], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn symbol_eigenvalue_angles_match_damping_angle() {
        // Eigenvalues of A(xi) are |xi|^2 e^{±iθ(ρ)} for ρ < 2.
        for r in [0.3, 0.9, 1.5, 1.9] {
            let theta = damping_angle(rho(r)).theta;
            for xin in [0.5f64, 1.0, 2.7] {
                let m = symbol(&[xin], rho(r));
                let eigs = m.eigenvalues();
                let mut args: Vec<f64> = eigs.iter().map(|z| z.arg().abs()).collect();
                args.sort_by(f64::total_cmp);
                assert_relative_eq!(args[0], theta, epsilon = 1e-10);
                assert_relative_eq!(args[1], theta, epsilon = 1e-10);
                assert_relative_eq!(eigs[0].norm(), xin * xin, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn resolvent_at_origin() {
        // A(0,1) = [[1,-1],[0,1]] has inverse [[1,1],[0,1]].
        let inv = symbol_resolvent(&[0.0], Complex64::new(1.0, 0.0), rho(1.0)).unwrap();
        assert_relative_eq!(inv.entries[0][0].re, 1.0, epsilon = 1e-14);
        assert_relative_eq!(inv.entries[0][1].re, 1.0, epsilon = 1e-14);
        assert_relative_eq!(inv.entries[1][0].re, 0.0, epsilon = 1e-14);
        assert_relative_eq!(inv.entries[1][1].re, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn resolvent_singularity_detected() {
        // A(0, 0) is not invertible: both factors vanish exactly.
        let err = symbol_resolvent(&[0.0], Complex64::new(0.0, 0.0), rho(3.0)).unwrap_err();
        assert!(matches!(err, Error::Singular(_)));
        assert!(err.to_string().contains("alpha_plus"));
    }

    #[test]
    fn sector_membership() {
        let quarter = std::f64::consts::FRAC_PI_4;
        assert!(sector_contains(Complex64::new(1.0, 0.0), quarter));
        assert!(!sector_contains(Complex64::new(0.0, 1.0), quarter));
        assert!(!sector_contains(Complex64::new(0.0, 0.0), quarter));
        // Boundary is excluded: arg z = omega exactly.
        assert!(!sector_contains(Complex64::new(1.0, 1.0), quarter));
    }

    proptest! {
        #[test]
        fn root_identities(r in 1e-6f64..10.0) {
            let roots = pencil_roots(rho(r));
            let prod = roots.alpha_plus * roots.alpha_minus;
            let sum = roots.alpha_plus + roots.alpha_minus;
            prop_assert!((prod - Complex64::new(1.0, 0.0)).norm() <= 1e-12);
            prop_assert!((sum - Complex64::new(r, 0.0)).norm() <= 1e-12);
            if r < 2.0 {
                prop_assert!((roots.alpha_plus.norm() - 1.0).abs() <= 1e-12);
            } else {
                prop_assert!(roots.alpha_plus.im == 0.0 && roots.alpha_minus.im == 0.0);
                prop_assert!(roots.alpha_minus.re >= 0.0);
            }
            // arg alpha_plus equals the damping angle.
            let theta = damping_angle(rho(r)).theta;
            prop_assert!((roots.alpha_plus.arg() - theta).abs() <= 1e-12);
        }

        #[test]
        fn pencil_factorization(
            re in -5.0f64..5.0,
            im in -5.0f64..5.0,
            b in 1e-3f64..25.0,
            r in 1e-2f64..6.0,
        ) {
            let lambda = Complex64::new(re, im);
            let roots = pencil_roots(rho(r));
            let direct = pencil_value(lambda, b, rho(r)).unwrap();
            let sqrt_b = b.sqrt();
            let factored = (roots.alpha_plus * lambda + sqrt_b)
                * (roots.alpha_minus * lambda + sqrt_b);
            let scale = 1.0 + direct.norm().max(factored.norm());
            prop_assert!((direct - factored).norm() / scale <= 1e-12);
        }

        #[test]
        fn resolvent_inverts_shifted_symbol(
            xi1 in -3.0f64..3.0,
            xi2 in -3.0f64..3.0,
            re in 0.1f64..8.0,
            im in -4.0f64..4.0,
            r in 0.1f64..5.0,
        ) {
            // lambda with positive real part stays inside the resolvent set.
            let lambda = Complex64::new(re, im);
            let xi = [xi1, xi2];
            let inv = symbol_resolvent(&xi, lambda, rho(r)).unwrap();
            let shifted = symbol_shifted(&xi, lambda, rho(r));
            let residual = shifted.mul(&inv).sub(&SymbolMatrix::identity()).norm();
            prop_assert!(residual <= 1e-12, "residual {residual}");
            // Determinant matches the displayed factorization.
            let roots = pencil_roots(rho(r));
            let xisq = xi1 * xi1 + xi2 * xi2;
            let det = shifted.det();
            let factored = (roots.alpha_plus * lambda + xisq)
                * (roots.alpha_minus * lambda + xisq);
            let scale = 1.0 + det.norm();
            prop_assert!((det - factored).norm() / scale <= 1e-12);
        }
    }
}
