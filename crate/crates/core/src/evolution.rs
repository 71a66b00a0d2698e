//! θ-scheme time integration of the first-order system
//! `∂_t v + A v = (0, f)ᵀ`, energy-dissipation and decay diagnostics,
//! inhomogeneous boundary data through user-supplied lifts, and
//! weighted-in-time maximal-regularity ratio reports.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::integrate_weighted_1d;
use crate::operators::{assemble_a, BlockOperatorA, OpGrid};
use crate::parallel::map_slice;
use crate::pencil::DampingParam;
use crate::weights::check_mu;

/// Temporal grid and weight exponent for `L^q(v_μ)` norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
    pub mu: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize, mu: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::argument(format!("horizon must be positive, got {horizon}")));
        }
        if steps < 2 {
            return Err(Error::argument(format!("need at least 2 steps, got {steps}")));
        }
        Ok(TimeGrid { horizon, steps, mu })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }
}

/// Computed trajectory `v_n = (u_n, w_n)` of the first-order system.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<(DVector<f64>, DVector<f64>)>,
    pub theta: f64,
    pub dt: f64,
}

impl Trajectory {
    pub fn block_dim(&self) -> usize {
        self.states[0].0.len()
    }
}

/// One θ-step solver with the implicit factor `(I + θ Δt A)` factored
/// once and shared across steps.
pub struct ThetaStepper {
    lu: nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    a_dense: DMatrix<f64>,
    pub dt: f64,
    pub theta: f64,
    dim: usize,
}

impl ThetaStepper {
    /// Build from any square matrix (used directly for surrogate and
    /// stability tests).
    pub fn from_matrix(a: DMatrix<f64>, dt: f64, theta: f64) -> Result<Self> {
        if !(0.5..=1.0).contains(&theta) {
            return Err(Error::domain(format!("theta must lie in [1/2, 1], got {theta}")));
        }
        if !(dt > 0.0) {
            return Err(Error::domain(format!("time step must be positive, got {dt}")));
        }
        let dim = a.nrows();
        let implicit = DMatrix::identity(dim, dim) + &a * (theta * dt);
        let lu = nalgebra::linalg::LU::new(implicit);
        if lu.determinant().abs() == 0.0 {
            return Err(Error::numeric("implicit theta-scheme matrix is singular".to_string()));
        }
        Ok(ThetaStepper { lu, a_dense: a, dt, theta, dim })
    }

    pub fn for_operator(a: &BlockOperatorA, dt: f64, theta: f64) -> Result<Self> {
        Self::from_matrix(a.to_dense(), dt, theta)
    }

    /// Advance one step: solves
    /// `(I + θ Δt A) v' = (I − (1−θ) Δt A) v + Δt · forcing`.
    pub fn step(&self, v: &DVector<f64>, forcing: &DVector<f64>) -> Result<DVector<f64>> {
        debug_assert_eq!(v.len(), self.dim);
        let mut rhs = v - &self.a_dense * v * ((1.0 - self.theta) * self.dt);
        rhs += forcing * self.dt;
        self.lu
            .solve(&rhs)
            .ok_or_else(|| Error::numeric("theta-step solve failed".to_string()))
    }
}

/// Single θ-step of the block system with source average `f̄` in the
/// second component.
pub fn step_theta(
    stepper: &ThetaStepper,
    v: (&DVector<f64>, &DVector<f64>),
    f_bar: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let m = v.0.len();
    let mut packed = DVector::zeros(2 * m);
    packed.rows_mut(0, m).copy_from(v.0);
    packed.rows_mut(m, m).copy_from(v.1);
    let mut forcing = DVector::zeros(2 * m);
    forcing.rows_mut(m, m).copy_from(f_bar);
    let next = stepper.step(&packed, &forcing)?;
    Ok((next.rows(0, m).into_owned(), next.rows(m, m).into_owned()))
}

/// Integrate `∂_t v + A v = (0, f)ᵀ` from the given initial state.
pub fn solve_from(
    a: &BlockOperatorA,
    v0: (DVector<f64>, DVector<f64>),
    f: &(dyn Fn(f64) -> DVector<f64> + Sync),
    t_end: f64,
    dt: f64,
    theta: f64,
) -> Result<Trajectory> {
    let m = a.block_dim();
    if v0.0.len() != m || v0.1.len() != m {
        return Err(Error::argument("initial state does not match operator dimension".to_string()));
    }
    let steps = (t_end / dt).round().max(1.0) as usize;
    let stepper = ThetaStepper::for_operator(a, dt, theta)?;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(v0);
    let mut f_prev = f(0.0);
    for n in 0..steps {
        let t_next = (n + 1) as f64 * dt;
        let f_next = f(t_next);
        // theta-averaged source keeps the scheme's order.
        let f_bar = &f_next * theta + &f_prev * (1.0 - theta);
        let (u, w) = {
            let (u_prev, w_prev) = &states[n];
            step_theta(&stepper, (u_prev, w_prev), &f_bar)?
        };
        times.push(t_next);
        states.push((u, w));
        f_prev = f_next;
    }
    Ok(Trajectory { times, states, theta, dt })
}

/// Integrate from rest (`v(0) = 0`).
pub fn solve_cauchy(
    a: &BlockOperatorA,
    f: &(dyn Fn(f64) -> DVector<f64> + Sync),
    t_end: f64,
    dt: f64,
    theta: f64,
) -> Result<Trajectory> {
    let m = a.block_dim();
    solve_from(a, (DVector::zeros(m), DVector::zeros(m)), f, t_end, dt, theta)
}

/// Energy diagnostics of a homogeneous run. The discrete energy is the
/// clamped quadratic form `E = ⟨B u, u⟩ + ‖w‖²` (mesh-weighted), whose
/// exact dissipation rate is `−2ρ‖∇w‖²`.
#[derive(Debug, Clone)]
pub struct EnergyReport {
    pub energies: Vec<f64>,
    /// Largest step-to-step increase relative to the initial energy.
    pub max_relative_increase: f64,
    pub monotone: bool,
    /// For θ = 1/2: sup over steps of
    /// `|ΔE/Δt + ρ(‖∇w_n‖² + ‖∇w_{n+1}‖²)|`.
    pub cn_balance_residual: Option<f64>,
}

fn mesh_weight(grid: OpGrid) -> f64 {
    match grid {
        OpGrid::Interval { n, length } => length / (n + 1) as f64,
        OpGrid::Rectangle { nx, ny, lx, ly } => {
            (lx / (nx + 1) as f64) * (ly / (ny + 1) as f64)
        }
    }
}

/// `E(v) = h (uᵀ B u + wᵀ w)`.
pub fn energy(a: &BlockOperatorA, u: &DVector<f64>, w: &DVector<f64>) -> f64 {
    let h = mesh_weight(a.grid);
    let bu = a.biharmonic.apply(u.as_slice());
    let quad: f64 = bu.iter().zip(u.iter()).map(|(x, y)| x * y).sum();
    h * (quad + a.eta * u.norm_squared() + w.norm_squared())
}

/// `‖∇w‖² = h ⟨(−L) w, w⟩`, the discrete dissipation functional.
fn gradient_energy(a: &BlockOperatorA, w: &DVector<f64>) -> f64 {
    let h = mesh_weight(a.grid);
    let lw = a.laplacian.apply(w.as_slice());
    -h * lw.iter().zip(w.iter()).map(|(x, y)| x * y).sum::<f64>()
}

pub fn energy_dissipation_check(a: &BlockOperatorA, traj: &Trajectory) -> EnergyReport {
    let energies: Vec<f64> =
        traj.states.iter().map(|(u, w)| energy(a, u, w)).collect();
    let scale = energies[0].max(1e-300);
    let mut max_increase: f64 = 0.0;
    for pair in energies.windows(2) {
        max_increase = max_increase.max((pair[1] - pair[0]) / scale);
    }
    let cn_balance_residual = if (traj.theta - 0.5).abs() < 1e-12 {
        let mut sup: f64 = 0.0;
        for n in 0..traj.states.len() - 1 {
            let g0 = gradient_energy(a, &traj.states[n].1);
            let g1 = gradient_energy(a, &traj.states[n + 1].1);
            let rate = (energies[n + 1] - energies[n]) / traj.dt;
            sup = sup.max((rate + a.rho * (g0 + g1)).abs());
        }
        Some(sup)
    } else {
        None
    };
    EnergyReport {
        monotone: max_increase <= 1e-12,
        max_relative_increase: max_increase,
        energies,
        cn_balance_residual,
    }
}

/// Analytic boundary lift `E(t, x)` with time derivatives; must vanish
/// together with `∂_t E` at `t = 0`.
pub struct BoundaryLift<'a> {
    pub e: &'a (dyn Fn(f64, f64) -> f64 + Sync),
    pub e_t: &'a (dyn Fn(f64, f64) -> f64 + Sync),
    pub e_tt: &'a (dyn Fn(f64, f64) -> f64 + Sync),
}

impl BoundaryLift<'_> {
    fn check_compatibility(&self, length: f64) -> Result<()> {
        for i in 0..=20 {
            let x = length * i as f64 / 20.0;
            if (self.e)(0.0, x).abs() > 1e-12 || (self.e_t)(0.0, x).abs() > 1e-12 {
                return Err(Error::argument(format!(
                    "lift violates zero initial traces at x = {x}"
                )));
            }
        }
        Ok(())
    }
}

/// Result of an inhomogeneous run `u = ũ + E`.
#[derive(Debug, Clone)]
pub struct InhomogeneousRun {
    pub times: Vec<f64>,
    /// Reconstructed total solution samples per step.
    pub u: Vec<DVector<f64>>,
    /// Sup over steps of the extrapolated boundary residual `|u − g₀|`.
    pub boundary_residual_value: f64,
    /// Sup over steps of `|∂_n u − g₁|`.
    pub boundary_residual_normal: f64,
    pub homogeneous: Trajectory,
}

/// Solve with inhomogeneous boundary data supplied through the lift:
/// `ũ` solves the homogeneous problem with source
/// `f̃ = f − (∂_t² + Δ² − ρΔ∂_t) E`, and `u = ũ + E`.
pub fn solve_inhomogeneous(
    a: &BlockOperatorA,
    f: &(dyn Fn(f64, f64) -> f64 + Sync),
    lift: &BoundaryLift<'_>,
    t_end: f64,
    dt: f64,
    theta: f64,
) -> Result<InhomogeneousRun> {
    let (n, length) = match a.grid {
        OpGrid::Interval { n, length } => (n, length),
        OpGrid::Rectangle { .. } => {
            return Err(Error::argument(
                "inhomogeneous lifts are implemented on interval grids".to_string(),
            ))
        }
    };
    lift.check_compatibility(length)?;
    let h = length / (n + 1) as f64;
    let xs: Vec<f64> = (1..=n).map(|i| i as f64 * h).collect();
    let sample = |g: &dyn Fn(f64, f64) -> f64, t: f64| -> DVector<f64> {
        DVector::from_iterator(n, xs.iter().map(|&x| g(t, x)))
    };
    let modified = |t: f64| -> DVector<f64> {
        let e = sample(lift.e, t);
        let e_t = sample(lift.e_t, t);
        let e_tt = sample(lift.e_tt, t);
        let be = DVector::from_vec(a.biharmonic.apply(e.as_slice()));
        let le_t = DVector::from_vec(a.laplacian.apply(e_t.as_slice()));
        sample(&f, t) - e_tt - be + le_t * a.rho
    };
    let homogeneous = solve_cauchy(a, &modified, t_end, dt, theta)?;
    let mut u = Vec::with_capacity(homogeneous.times.len());
    let mut res_val: f64 = 0.0;
    let mut res_nrm: f64 = 0.0;
    for (t, (ut, _)) in homogeneous.times.iter().zip(&homogeneous.states) {
        // Quadratic extrapolation of the homogeneous part to both
        // boundary points; E carries the boundary data exactly.
        let left_val = 3.0 * ut[0] - 3.0 * ut[1] + ut[2];
        let left_nrm = (-5.0 * ut[0] + 8.0 * ut[1] - 3.0 * ut[2]) / (2.0 * h);
        let right_val = 3.0 * ut[n - 1] - 3.0 * ut[n - 2] + ut[n - 3];
        let right_nrm = (-5.0 * ut[n - 1] + 8.0 * ut[n - 2] - 3.0 * ut[n - 3]) / (2.0 * h);
        res_val = res_val.max(left_val.abs()).max(right_val.abs());
        res_nrm = res_nrm.max(left_nrm.abs()).max(right_nrm.abs());
        u.push(ut + sample(lift.e, *t));
    }
    Ok(InhomogeneousRun {
        times: homogeneous.times.clone(),
        u,
        boundary_residual_value: res_val,
        boundary_residual_normal: res_nrm,
        homogeneous,
    })
}

/// Least-squares slope of `log E_n`: the fitted exponential decay rate
/// (positive for a decaying trajectory).
pub fn decay_rate(a: &BlockOperatorA, traj: &Trajectory) -> Result<f64> {
    let energies: Vec<f64> = traj.states.iter().map(|(u, w)| energy(a, u, w)).collect();
    if energies[0] <= 0.0 {
        return Err(Error::argument(
            "zero initial data: decay fit is degenerate, run skipped".to_string(),
        ));
    }
    if energies.iter().any(|&e| e <= 0.0) {
        return Err(Error::numeric("energy hit zero; cannot fit a log slope".to_string()));
    }
    let last = *energies.last().unwrap();
    if last >= energies[0] {
        return Err(Error::numeric(format!(
            "non-decaying trajectory: E(0) = {}, E(T) = {last}",
            energies[0]
        )));
    }
    let n = energies.len() as f64;
    let mt = traj.times.iter().sum::<f64>() / n;
    let my = energies.iter().map(|e| e.ln()).sum::<f64>() / n;
    let mut stt = 0.0;
    let mut sty = 0.0;
    for (t, e) in traj.times.iter().zip(&energies) {
        stt += (t - mt) * (t - mt);
        sty += (t - mt) * (e.ln() - my);
    }
    Ok(-sty / stt)
}

/// `∫_0^T g(t) t^μ dt` for `g` sampled on the uniform time grid
/// (including `t = 0`): piecewise-linear interpolation against exact
/// power moments, so no order loss at `t = 0` for `μ < 0`.
pub fn time_weighted_integral(times: &[f64], values: &[f64], mu: f64) -> Result<f64> {
    if times.len() != values.len() || times.len() < 2 {
        return Err(Error::argument("need matching time/value samples".to_string()));
    }
    if !(mu > -1.0) {
        return Err(Error::domain(format!("temporal weight must satisfy mu > -1, got {mu}")));
    }
    let mut total = 0.0;
    for i in 0..times.len() - 1 {
        let (t0, t1) = (times[i], times[i + 1]);
        let (v0, v1) = (values[i], values[i + 1]);
        let m0 = (t1.powf(mu + 1.0) - t0.powf(mu + 1.0)) / (mu + 1.0);
        let m1 = (t1.powf(mu + 2.0) - t0.powf(mu + 2.0)) / (mu + 2.0);
        let slope = (v1 - v0) / (t1 - t0);
        // v(t) = v0 + slope (t - t0).
        total += (v0 - slope * t0) * m0 + slope * m1;
    }
    Ok(total)
}

/// Interval-interior weighted Sobolev norm with the two-sided
/// boundary-distance weight `min(x, L−x)^γ`, split at the midpoint and
/// mirrored so the singular quadrature applies on both ends.
fn interval_sobolev_norm(
    xs: &[f64],
    length: f64,
    values: &[f64],
    k: i32,
    p: f64,
    weight_exp: f64,
) -> Result<f64> {
    use crate::grid::d1_nonuniform;
    let n = xs.len();
    let mut total = 0.0;
    let mut current = values.to_vec();
    let half = length / 2.0;
    let split = xs.partition_point(|&x| x <= half);
    for j in 0..=k {
        if j > 0 {
            current = d1_nonuniform(xs, &current);
        }
        let left_nodes = &xs[..split];
        let left_vals: Vec<f64> = current[..split].iter().map(|v| v.abs().powf(p)).collect();
        total += integrate_weighted_1d(left_nodes, half, &left_vals, weight_exp)?;
        // Mirror the right half onto (0, L/2].
        let mut right_nodes: Vec<f64> = xs[split..].iter().map(|&x| length - x).collect();
        right_nodes.reverse();
        let mut right_vals: Vec<f64> =
            current[split..].iter().map(|v| v.abs().powf(p)).collect();
        right_vals.reverse();
        total += integrate_weighted_1d(&right_nodes, half, &right_vals, weight_exp)?;
    }
    Ok(total.powf(1.0 / p))
}

/// One maximal-regularity ratio measurement.
#[derive(Debug, Clone)]
pub struct MRRow {
    pub n: usize,
    pub dt: f64,
    pub field: usize,
    /// `‖u‖_U / ‖f‖_F`; `None` when the source norm vanished (skipped).
    pub ratio: Option<f64>,
}

/// Maximal-regularity ratio report across refinements.
#[derive(Debug, Clone)]
pub struct MRReport {
    pub q: f64,
    pub mu: f64,
    pub p: f64,
    pub gamma: f64,
    pub k: i32,
    pub rows: Vec<MRRow>,
    /// Per-refinement maxima of the finite ratios.
    pub per_refinement_max: Vec<f64>,
    /// `max/min − 1` of the per-refinement maxima.
    pub drift: f64,
    pub uniformly_bounded: bool,
}

/// Ratio `‖u‖_U / ‖f‖_F` per source and refinement, with
/// `U = W^{2,q}(v_μ; W^{k−2,p}(w_{γ+kp})) ∩ L^q(v_μ; W^{k+2,p}(w_{γ+kp}))`
/// and `F = L^q(v_μ; W^{k−2,p}(w_{γ+kp}))` on the unit interval.
/// Verdict: uniformly bounded if the per-refinement maxima drift by
/// less than 20%.
pub fn mr_ratio_report(
    rho: DampingParam,
    sources: &[&(dyn Fn(f64, f64) -> f64 + Sync)],
    q: f64,
    mu: f64,
    p: f64,
    gamma: f64,
    k: i32,
    refinement_ns: &[usize],
    t_end: f64,
) -> Result<MRReport> {
    if !(q > 1.0 && p > 1.0) {
        return Err(Error::domain("q and p must lie in (1, inf)".to_string()));
    }
    check_mu(mu, q)?;
    if !(gamma > -1.0 && gamma < p - 1.0) {
        return Err(Error::domain(format!(
            "gamma must lie in (-1, p-1) = (-1, {}), got {gamma}",
            p - 1.0
        )));
    }
    if k < 2 {
        return Err(Error::domain("regularity order k must be >= 2".to_string()));
    }
    if sources.is_empty() || refinement_ns.is_empty() {
        return Err(Error::argument("need at least one source and one refinement".to_string()));
    }
    let weight_exp = gamma + k as f64 * p;
    let mut rows = Vec::new();
    let mut per_refinement_max = Vec::new();
    for &n in refinement_ns {
        let grid = OpGrid::interval(n, 1.0);
        let a = assemble_a(grid, rho, 0.0)?;
        let h = 1.0 / (n + 1) as f64;
        let dt = t_end / (4.0 * (n + 1) as f64).round();
        let xs: Vec<f64> = (1..=n).map(|i| i as f64 * h).collect();
        let mut refinement_max: f64 = 0.0;
        let field_rows = map_slice(
            &sources.iter().enumerate().collect::<Vec<_>>(),
            |&(field_idx, source)| -> Result<MRRow> {
                let f_vec = |t: f64| -> DVector<f64> {
                    DVector::from_iterator(n, xs.iter().map(|&x| source(t, x)))
                };
                let traj = solve_cauchy(&a, &f_vec, t_end, dt, 0.5)?;
                let times = &traj.times;
                let steps = times.len();
                // Source norm per time node.
                let mut f_norm_q = Vec::with_capacity(steps);
                for &t in times {
                    let fv = f_vec(t);
                    let s =
                        interval_sobolev_norm(&xs, 1.0, fv.as_slice(), k - 2, p, weight_exp)?;
                    f_norm_q.push(s.powf(q));
                }
                let f_norm = time_weighted_integral(times, &f_norm_q, mu)?.powf(1.0 / q);
                if f_norm == 0.0 {
                    return Ok(MRRow { n, dt, field: field_idx, ratio: None });
                }
                // Time derivatives of u: d_t u = w, d_t^2 u by centered
                // differences of w.
                let mut u_norm = 0.0;
                for (order_vals, spatial_k) in [(0usize, k + 2), (1, k - 2), (2, k - 2)]
                    .map(|(j, sk)| (j, sk))
                {
                    let (j, sk) = (order_vals, spatial_k);
                    let mut node_vals = Vec::with_capacity(steps);
                    for idx in 0..steps {
                        let vec = match j {
                            0 => traj.states[idx].0.clone(),
                            1 => traj.states[idx].1.clone(),
                            _ => {
                                let w = |i: usize| &traj.states[i].1;
                                if idx == 0 {
                                    (w(1) - w(0)) / dt
                                } else if idx == steps - 1 {
                                    (w(idx) - w(idx - 1)) / dt
                                } else {
                                    (w(idx + 1) - w(idx - 1)) / (2.0 * dt)
                                }
                            }
                        };
                        let s =
                            interval_sobolev_norm(&xs, 1.0, vec.as_slice(), sk, p, weight_exp)?;
                        node_vals.push(s.powf(q));
                    }
                    u_norm += time_weighted_integral(times, &node_vals, mu)?.powf(1.0 / q);
                }
                Ok(MRRow { n, dt, field: field_idx, ratio: Some(u_norm / f_norm) })
            },
        );
        for row in field_rows {
            let row = row?;
            if let Some(r) = row.ratio {
                refinement_max = refinement_max.max(r);
            }
            rows.push(row);
        }
        per_refinement_max.push(refinement_max);
    }
    let finite: Vec<f64> = per_refinement_max.iter().copied().filter(|&v| v > 0.0).collect();
    let drift = if finite.len() >= 2 {
        let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = finite.iter().copied().fold(0.0f64, f64::max);
        hi / lo - 1.0
    } else {
        0.0
    };
    Ok(MRReport {
        q,
        mu,
        p,
        gamma,
        k,
        rows,
        per_refinement_max,
        drift,
        uniformly_bounded: drift < 0.2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rho(r: f64) -> DampingParam {
        DampingParam::new(r).unwrap()
    }

    #[test]
    fn zero_source_stays_zero() {
        let a = assemble_a(OpGrid::interval(16, 1.0), rho(1.0), 0.0).unwrap();
        let f = |_t: f64| DVector::zeros(16);
        let traj = solve_cauchy(&a, &f, 0.1, 0.01, 1.0).unwrap();
        for (u, w) in &traj.states {
            assert_eq!(u.norm(), 0.0);
            assert_eq!(w.norm(), 0.0);
        }
    }

    #[test]
    fn scalar_surrogate_backward_euler() {
        // 1x1 system dv/dt + a v = 0, theta = 1: v' = v / (1 + a dt) exactly.
        let a_val = 3.0;
        let stepper =
            ThetaStepper::from_matrix(DMatrix::from_element(1, 1, a_val), 0.05, 1.0).unwrap();
        let v = DVector::from_element(1, 2.0);
        let next = stepper.step(&v, &DVector::zeros(1)).unwrap();
        assert_relative_eq!(next[0], 2.0 / (1.0 + a_val * 0.05), epsilon = 1e-15);
    }

    #[test]
    fn crank_nicolson_amplification_contractive() {
        // Eigenmode with Re z >= 0: |(1 - z/2)/(1 + z/2)| <= 1. Realized
        // by a 2x2 rotation-plus-decay block.
        for (re, im) in [(0.5, 2.0), (0.0, 3.0), (2.0, 0.0)] {
            let a = DMatrix::from_row_slice(2, 2, &[re, -im, im, re]);
            let dt = 0.3;
            let implicit = DMatrix::identity(2, 2) + &a * (0.5 * dt);
            let explicit = DMatrix::identity(2, 2) - &a * (0.5 * dt);
            let amp = implicit.try_inverse().unwrap() * explicit;
            for z in amp.complex_eigenvalues().iter() {
                assert!(z.norm() <= 1.0 + 1e-12, "|amp| = {}", z.norm());
            }
        }
    }

    #[test]
    fn implicit_euler_energy_monotone() {
        let n = 100;
        let a = assemble_a(OpGrid::interval(n, 1.0), rho(1.0), 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        // Random smooth initial data through a low-frequency expansion.
        let h = 1.0 / (n + 1) as f64;
        let mut u0 = DVector::zeros(n);
        let mut w0 = DVector::zeros(n);
        for j in 1..=5 {
            let cu: f64 = rng.gen_range(-1.0..1.0);
            let cw: f64 = rng.gen_range(-1.0..1.0);
            for i in 0..n {
                let x = (i + 1) as f64 * h;
                let mode = (std::f64::consts::PI * j as f64 * x).sin();
                u0[i] += cu * mode * x * (1.0 - x);
                w0[i] += cw * mode;
            }
        }
        let f = |_t: f64| DVector::zeros(n);
        let traj = solve_from(&a, (u0, w0), &f, 0.1, 1e-3, 1.0).unwrap();
        let report = energy_dissipation_check(&a, &traj);
        assert!(
            report.monotone,
            "max relative increase {}",
            report.max_relative_increase
        );
    }

    #[test]
    fn crank_nicolson_balance_second_order() {
        let n = 60;
        let a = assemble_a(OpGrid::interval(n, 1.0), rho(1.0), 0.0).unwrap();
        let h = 1.0 / (n + 1) as f64;
        let u0 = DVector::from_fn(n, |i, _| {
            let x = (i + 1) as f64 * h;
            (std::f64::consts::PI * x).sin() * x * (1.0 - x)
        });
        let w0 = DVector::zeros(n);
        let f = |_t: f64| DVector::zeros(n);
        let residual_at = |dt: f64| {
            let traj = solve_from(&a, (u0.clone(), w0.clone()), &f, 0.02, dt, 0.5).unwrap();
            energy_dissipation_check(&a, &traj).cn_balance_residual.unwrap()
        };
        let r1 = residual_at(1e-3);
        let r2 = residual_at(5e-4);
        assert!(r1 / r2 > 3.0 && r1 / r2 < 5.5, "CN balance rate {}", r1 / r2);
    }

    fn manufactured_error(n: usize, dt: f64, theta: f64) -> f64 {
        // u*(t,x) = t^2 x^2 (1-x)^2 with the matching source.
        let r = 1.0;
        let a = assemble_a(OpGrid::interval(n, 1.0), rho(r), 0.0).unwrap();
        let h = 1.0 / (n + 1) as f64;
        let shape = |x: f64| x * x * (1.0 - x) * (1.0 - x);
        let f = move |t: f64| {
            DVector::from_fn(n, |i, _| {
                let x = (i + 1) as f64 * h;
                2.0 * shape(x) + 24.0 * t * t - r * 2.0 * t * (12.0 * x * x - 12.0 * x + 2.0)
            })
        };
        let t_end = 0.5;
        let traj = solve_cauchy(&a, &f, t_end, dt, theta).unwrap();
        let (u, _) = traj.states.last().unwrap();
        let mut err: f64 = 0.0;
        for i in 0..n {
            let x = (i + 1) as f64 * h;
            err = err.max((u[i] - t_end * t_end * shape(x)).abs());
        }
        err
    }

    #[test]
    fn manufactured_solution_converges_second_order() {
        let e1 = manufactured_error(32, 1.0 / 64.0, 0.5);
        let e2 = manufactured_error(64, 1.0 / 128.0, 0.5);
        let rate = (e1 / e2).log2();
        assert!((1.6..=2.4).contains(&rate), "rate {rate} ({e1} vs {e2})");
    }

    #[test]
    fn reduction_consistency_w_approximates_du_dt() {
        let n = 48;
        let a = assemble_a(OpGrid::interval(n, 1.0), rho(1.0), 0.0).unwrap();
        let h = 1.0 / (n + 1) as f64;
        let f = move |t: f64| {
            DVector::from_fn(n, |i, _| {
                let x = (i + 1) as f64 * h;
                (2.0 * t).sin() * (std::f64::consts::PI * x).sin()
            })
        };
        let dt = 1e-3;
        let traj = solve_cauchy(&a, &f, 0.2, dt, 0.5).unwrap();
        let mid = traj.states.len() / 2;
        let du = (&traj.states[mid + 1].0 - &traj.states[mid - 1].0) / (2.0 * dt);
        let w = &traj.states[mid].1;
        let diff = (&du - w).norm() / w.norm().max(1e-300);
        assert!(diff < 1e-3, "w vs central du/dt: {diff}");
    }

    #[test]
    fn superposition_of_sources() {
        let n = 32;
        let a = assemble_a(OpGrid::interval(n, 1.0), rho(0.8), 0.0).unwrap();
        let h = 1.0 / (n + 1) as f64;
        let f1 = move |t: f64| {
            DVector::from_fn(n, |i, _| {
                let x = (i + 1) as f64 * h;
                t.sin() * x * (1.0 - x)
            })
        };
        let f2 = move |t: f64| {
            DVector::from_fn(n, |i, _| {
                let x = (i + 1) as f64 * h;
                (3.0 * t).cos() * (std::f64::consts::PI * x).sin()
            })
        };
        let fsum = move |t: f64| f1(t) + f2(t);
        let dt = 5e-3;
        let t1 = solve_cauchy(&a, &f1, 0.2, dt, 0.5).unwrap();
        let t2 = solve_cauchy(&a, &f2, 0.2, dt, 0.5).unwrap();
        let ts = solve_cauchy(&a, &fsum, 0.2, dt, 0.5).unwrap();
        let last = ts.states.len() - 1;
        let combined = &t1.states[last].0 + &t2.states[last].0;
        let diff = (&ts.states[last].0 - combined).norm();
        assert!(diff < 1e-11, "superposition defect {diff}");
    }

    #[test]
    fn inhomogeneous_reduces_to_cauchy_for_zero_lift() {
        let n = 24;
        let a = assemble_a(OpGrid::interval(n, 1.0), rho(1.0), 0.0).unwrap();
        let zero3 = |_: f64, _: f64| 0.0;
        let lift = BoundaryLift { e: &zero3, e_t: &zero3, e_tt: &zero3 };
        let src = |t: f64, x: f64| t.sin() * x * (1.0 - x);
        let run = solve_inhomogeneous(&a, &src, &lift, 0.1, 2e-3, 0.5).unwrap();
        let h = 1.0 / (n + 1) as f64;
        let f_vec = move |t: f64| {
            DVector::from_fn(n, |i, _| {
                let x = (i + 1) as f64 * h;
                t.sin() * x * (1.0 - x)
            })
        };
        let direct = solve_cauchy(&a, &f_vec, 0.1, 2e-3, 0.5).unwrap();
        let last = run.u.len() - 1;
        let diff = (&run.u[last] - &direct.states[last].0).norm();
        assert!(diff < 1e-13);
    }

    #[test]
    fn inhomogeneous_lift_boundary_residuals() {
        use crate::profiles::boundary_cutoff;
        let residuals = |n: usize| {
            let a = assemble_a(OpGrid::interval(n, 1.0), rho(1.0), 0.0).unwrap();
            let e = |t: f64, x: f64| t * t * boundary_cutoff(x);
            let e_t = |t: f64, x: f64| 2.0 * t * boundary_cutoff(x);
            let e_tt = |_: f64, x: f64| 2.0 * boundary_cutoff(x);
            let lift = BoundaryLift { e: &e, e_t: &e_t, e_tt: &e_tt };
            let src = |_: f64, _: f64| 0.0;
            let dt = 0.4 / n as f64;
            let run = solve_inhomogeneous(&a, &src, &lift, 0.2, dt, 0.5).unwrap();
            (run.boundary_residual_value, run.boundary_residual_normal)
        };
        let (v1, d1) = residuals(40);
        let (v2, d2) = residuals(80);
        // O(h^2)-ish decay of both boundary residuals.
        assert!(v1 / v2 > 2.0, "value residual rate {}", v1 / v2);
        assert!(d1 / d2 > 2.0, "normal residual rate {}", d1 / d2);
        // Superposition: (f, E) equals (f, 0) + (0, E).
        let n = 40;
        let a = assemble_a(OpGrid::interval(n, 1.0), rho(1.0), 0.0).unwrap();
        let e = |t: f64, x: f64| t * t * boundary_cutoff(x);
        let e_t = |t: f64, x: f64| 2.0 * t * boundary_cutoff(x);
        let e_tt = |_: f64, x: f64| 2.0 * boundary_cutoff(x);
        let zero3 = |_: f64, _: f64| 0.0;
        let lift = BoundaryLift { e: &e, e_t: &e_t, e_tt: &e_tt };
        let zero_lift = BoundaryLift { e: &zero3, e_t: &zero3, e_tt: &zero3 };
        let src = |t: f64, x: f64| t.cos() * x * x * (1.0 - x) * (1.0 - x);
        let dt = 5e-3;
        let both = solve_inhomogeneous(&a, &src, &lift, 0.1, dt, 0.5).unwrap();
        let only_f = solve_inhomogeneous(&a, &src, &zero_lift, 0.1, dt, 0.5).unwrap();
        let only_e = solve_inhomogeneous(&a, &zero3, &lift, 0.1, dt, 0.5).unwrap();
        let last = both.u.len() - 1;
        let combined = &only_f.u[last] + &only_e.u[last];
        assert!((&both.u[last] - combined).norm() < 1e-12);
    }

    #[test]
    fn lift_compatibility_enforced() {
        let n = 16;
        let a = assemble_a(OpGrid::interval(n, 1.0), rho(1.0), 0.0).unwrap();
        let bad = |_t: f64, _x: f64| 1.0;
        let zero3 = |_: f64, _: f64| 0.0;
        let lift = BoundaryLift { e: &bad, e_t: &zero3, e_tt: &zero3 };
        let err = solve_inhomogeneous(&a, &zero3, &lift, 0.1, 1e-2, 1.0).unwrap_err();
        assert!(matches!(err, Error::Argument(_)));
    }

    #[test]
    fn decay_rate_errors() {
        let n = 20;
        let a = assemble_a(OpGrid::interval(n, 1.0), rho(1.0), 0.0).unwrap();
        let f = |_t: f64| DVector::zeros(n);
        let traj = solve_cauchy(&a, &f, 0.05, 1e-3, 1.0).unwrap();
        assert!(matches!(decay_rate(&a, &traj), Err(Error::Argument(_))));
    }

    #[test]
    fn time_weighted_integral_oracle() {
        // int_0^1 t * t^0.5 dt = 2/5 with piecewise-linear g(t) = t (exact).
        let times: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let vals = times.clone();
        let got = time_weighted_integral(&times, &vals, 0.5).unwrap();
        assert_relative_eq!(got, 0.4, max_relative = 1e-12);
        // Singular weight handled exactly near t = 0.
        let got = time_weighted_integral(&times, &vals, -0.5).unwrap();
        assert_relative_eq!(got, 2.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn mr_ratio_scaling_invariance_and_finiteness() {
        let src = |t: f64, x: f64| t.sin() * x * x * (1.0 - x) * (1.0 - x);
        let scaled = |t: f64, x: f64| 7.5 * t.sin() * x * x * (1.0 - x) * (1.0 - x);
        let report = mr_ratio_report(
            rho(1.0),
            &[&src, &scaled],
            2.0,
            0.0,
            2.0,
            0.5,
            2,
            &[24],
            0.5,
        )
        .unwrap();
        let ratios: Vec<f64> = report.rows.iter().filter_map(|r| r.ratio).collect();
        assert_eq!(ratios.len(), 2);
        assert!(ratios[0].is_finite() && ratios[0] > 0.0);
        assert_relative_eq!(ratios[0], ratios[1], max_relative = 1e-9);
    }

    #[test]
    fn mr_ratio_zero_source_skipped() {
        let zero = |_: f64, _: f64| 0.0;
        let report =
            mr_ratio_report(rho(1.0), &[&zero], 2.0, 0.0, 2.0, 0.5, 2, &[16], 0.25).unwrap();
        assert!(report.rows[0].ratio.is_none());
    }

    #[test]
    fn mr_ratio_rejects_bad_parameters() {
        let src = |_: f64, _: f64| 1.0;
        assert!(mr_ratio_report(rho(1.0), &[&src], 2.0, 3.0, 2.0, 0.5, 2, &[16], 0.25).is_err());
        assert!(mr_ratio_report(rho(1.0), &[&src], 2.0, 0.0, 2.0, 1.5, 2, &[16], 0.25).is_err());
    }
}
