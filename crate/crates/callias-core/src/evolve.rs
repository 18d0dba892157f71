//! Time evolution: the unitary wave propagator of the hyperbolic equation
//! `i du/dt = A(t) u - f(t)` over the time cylinder `[0, 1]`.
//!
//! Each step applies the exact exponential of the midpoint-sampled
//! operator (exponential midpoint rule, second order in the step size).
//! Because the exponential is formed through an eigendecomposition of a
//! Hermitian matrix, every step — and hence the full propagator — is
//! unitary to rounding error, independently of the step size.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::discretize::{assemble_operator, SpatialGrid};
use crate::error::{CoreError, Result};
use crate::model::CalliasModel;
use crate::spectral::eigendecompose_matrix;

/// Minimum admissible number of time steps.
pub const MIN_STEPS: usize = 16;

/// Unitary propagator of the homogeneous equation over `[0, 1]`.
#[derive(Debug, Clone)]
pub struct UnitaryPropagator {
    pub matrix: Array2<C64>,
    pub grid: SpatialGrid,
    pub steps: usize,
}

impl UnitaryPropagator {
    /// `max |Q* Q - 1|` entrywise.
    pub fn unitarity_defect(&self) -> f64 {
        let d = self.matrix.nrows();
        let qh = self.matrix.t().mapv(|z| z.conj());
        let g = qh.dot(&self.matrix);
        let mut worst = 0.0_f64;
        for r in 0..d {
            for c in 0..d {
                let want = if r == c {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                };
                worst = worst.max((g[[r, c]] - want).norm());
            }
        }
        worst
    }

    /// Inverse propagator (adjoint, by unitarity).
    pub fn inverse(&self) -> UnitaryPropagator {
        UnitaryPropagator {
            matrix: self.matrix.t().mapv(|z| z.conj()),
            grid: self.grid.clone(),
            steps: self.steps,
        }
    }
}

/// Exact step matrix `exp(-i dt A(t_mid))`.
fn step_matrix(model: &CalliasModel, grid: &SpatialGrid, t_mid: f64, dt: f64) -> Result<Array2<C64>> {
    let op = assemble_operator(model, grid, t_mid)?;
    let spec = eigendecompose_matrix(&op.matrix)?;
    Ok(spec.apply_function(|l| C64::from_polar(1.0, -dt * l)))
}

/// Propagator over `[0, 1]` with `steps` midpoint-exponential steps.
pub fn propagate(model: &CalliasModel, grid: &SpatialGrid, steps: usize) -> Result<UnitaryPropagator> {
    if steps < MIN_STEPS {
        return Err(CoreError::StepCountTooLow {
            got: steps,
            min: MIN_STEPS,
        });
    }
    let dt = 1.0 / steps as f64;
    let d = grid.dim();
    let mut q = Array2::<C64>::eye(d);
    for k in 0..steps {
        let e = step_matrix(model, grid, (k as f64 + 0.5) * dt, dt)?;
        q = e.dot(&q);
    }
    Ok(UnitaryPropagator {
        matrix: q,
        grid: grid.clone(),
        steps,
    })
}

/// Propagator over an arbitrary window `[t0, t1]` with `steps` midpoint
/// steps. Composition is exact up to roundoff when the window is split at
/// a common mesh point: `propagate_between(t1, t2) * propagate_between(t0, t1)`
/// equals `propagate_between(t0, t2)` with matching step sizes.
pub fn propagate_between(
    model: &CalliasModel,
    grid: &SpatialGrid,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<UnitaryPropagator> {
    if steps == 0 {
        return Err(CoreError::StepCountTooLow { got: 0, min: 1 });
    }
    if t1 <= t0 {
        return Err(CoreError::AssumptionViolation {
            name: "propagation window",
            detail: format!("need t1 > t0, got [{t0}, {t1}]"),
        });
    }
    let dt = (t1 - t0) / steps as f64;
    let d = grid.dim();
    let mut q = Array2::<C64>::eye(d);
    for k in 0..steps {
        let e = step_matrix(model, grid, t0 + (k as f64 + 0.5) * dt, dt)?;
        q = e.dot(&q);
    }
    Ok(UnitaryPropagator {
        matrix: q,
        grid: grid.clone(),
        steps,
    })
}

/// Propagator with a step-doubling self-check: recomputes with `2 * steps`
/// and fails with `NotConverged` if the two disagree by more than `tol`
/// in max entry norm. Returns the finer propagator and the observed
/// discrepancy.
pub fn propagate_checked(
    model: &CalliasModel,
    grid: &SpatialGrid,
    steps: usize,
    tol: f64,
) -> Result<(UnitaryPropagator, f64)> {
    let coarse = propagate(model, grid, steps)?;
    let fine = propagate(model, grid, 2 * steps)?;
    let mut diff = 0.0_f64;
    for (a, b) in coarse.matrix.iter().zip(fine.matrix.iter()) {
        diff = diff.max((a - b).norm());
    }
    if diff > tol {
        return Err(CoreError::NotConverged(diff));
    }
    Ok((fine, diff))
}

/// Trajectory of the inhomogeneous Cauchy problem.
#[derive(Debug, Clone)]
pub struct CauchySolution {
    /// `steps + 1` sample times including both endpoints.
    pub times: Vec<f64>,
    /// State at each sample time.
    pub states: Vec<Array1<C64>>,
}

impl CauchySolution {
    pub fn initial(&self) -> &Array1<C64> {
        &self.states[0]
    }

    pub fn terminal(&self) -> &Array1<C64> {
        self.states.last().expect("nonempty trajectory")
    }
}

/// Solve `i du/dt = A(t) u - f(t)` forward over `[0, 1]`.
///
/// Each step combines the exact homogeneous exponential with the
/// first-order Duhamel weight `phi1(z) = (e^z - 1) / z` applied to the
/// midpoint source, which keeps the source coupling at the same second
/// order as the homogeneous part.
pub fn solve_cauchy(
    model: &CalliasModel,
    grid: &SpatialGrid,
    u0: &Array1<C64>,
    source: impl Fn(f64) -> Array1<C64>,
    steps: usize,
) -> Result<CauchySolution> {
    solve_cauchy_directed(model, grid, u0, source, steps, false)
}

/// Solve the same equation backward: given the state at `t = 1`, recover
/// the trajectory down to `t = 0`. The returned trajectory is still
/// ordered by increasing time.
pub fn solve_cauchy_backward(
    model: &CalliasModel,
    grid: &SpatialGrid,
    u1: &Array1<C64>,
    source: impl Fn(f64) -> Array1<C64>,
    steps: usize,
) -> Result<CauchySolution> {
    solve_cauchy_directed(model, grid, u1, source, steps, true)
}

fn solve_cauchy_directed(
    model: &CalliasModel,
    grid: &SpatialGrid,
    boundary_state: &Array1<C64>,
    source: impl Fn(f64) -> Array1<C64>,
    steps: usize,
    backward: bool,
) -> Result<CauchySolution> {
    if steps < MIN_STEPS {
        return Err(CoreError::StepCountTooLow {
            got: steps,
            min: MIN_STEPS,
        });
    }
    let d = grid.dim();
    if boundary_state.len() != d {
        return Err(CoreError::DimensionMismatch(format!(
            "expected {}, got {}",
            d,
            boundary_state.len()
        )));
    }
    let dt = 1.0 / steps as f64;
    let signed_dt = if backward { -dt } else { dt };
    let mut u = boundary_state.clone();
    let mut states = vec![u.clone()];
    for k in 0..steps {
        let t_from = if backward {
            1.0 - k as f64 * dt
        } else {
            k as f64 * dt
        };
        let t_mid = t_from + 0.5 * signed_dt;
        let op = assemble_operator(model, grid, t_mid)?;
        let spec = eigendecompose_matrix(&op.matrix)?;
        // u(t + dt) = e^{-i dt A} u + dt phi1(-i dt A) (i f(t_mid))
        let e = spec.apply_function(|l| C64::from_polar(1.0, -signed_dt * l));
        let phi1 = spec.apply_function(|l| {
            let z = C64::new(0.0, -signed_dt * l);
            if z.norm() < 1e-8 {
                // e^z ~ 1 + z + z^2/2: phi1 ~ 1 + z/2
                C64::new(1.0, 0.0) + 0.5 * z
            } else {
                (z.exp() - C64::new(1.0, 0.0)) / z
            }
        });
        let f_mid = source(t_mid);
        if f_mid.len() != d {
            return Err(CoreError::DimensionMismatch(format!(
                "source returned length {}, expected {}",
                f_mid.len(),
                d
            )));
        }
        let forced = phi1.dot(&f_mid.mapv(|z| z * C64::new(0.0, 1.0)));
        u = e.dot(&u) + forced.mapv(|z| z * C64::new(signed_dt, 0.0));
        states.push(u.clone());
    }
    let mut times: Vec<f64> = (0..=steps)
        .map(|k| {
            if backward {
                1.0 - k as f64 * dt
            } else {
                k as f64 * dt
            }
        })
        .collect();
    if backward {
        times.reverse();
        states.reverse();
    }
    Ok(CauchySolution { times, states })
}

/// Finite-propagation-speed diagnostic.
#[derive(Debug, Clone)]
pub struct LightConeReport {
    /// Initial support radius around the center.
    pub radius0: f64,
    /// Worst mass fraction observed outside the light cone
    /// `dist(x, center) <= radius0 + t` over all sample times.
    pub excess: f64,
    /// Total mass (should stay 1 by unitarity).
    pub mass_drift: f64,
}

/// Evolve a normalized state supported in `dist(x, center) <= radius0`
/// and measure leakage outside the unit-speed light cone.
///
/// Line models only: the staggered grid carries a position basis. The
/// initial state is a truncated Gaussian on the chirality-plus nodes.
pub fn light_cone_excess(
    model: &CalliasModel,
    grid: &SpatialGrid,
    steps: usize,
    center: f64,
    radius0: f64,
) -> Result<LightConeReport> {
    let sites = grid.sites();
    if sites.is_empty() {
        return Err(CoreError::GridModelMismatch);
    }
    if steps < MIN_STEPS {
        return Err(CoreError::StepCountTooLow {
            got: steps,
            min: MIN_STEPS,
        });
    }
    let d = grid.dim();
    let nodes = grid.nodes();
    let mut u = Array1::<C64>::zeros(d);
    for (j, &x) in nodes.iter().enumerate() {
        let r = (x - center).abs();
        if r <= radius0 {
            // smooth truncation: exactly zero at the support edge
            let s = r / radius0;
            u[j] = C64::new((-8.0 * s * s).exp() * (1.0 - s * s), 0.0);
        }
    }
    let norm: f64 = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(CoreError::AssumptionViolation {
            name: "light-cone probe",
            detail: "initial ball contains no grid nodes".into(),
        });
    }
    u.mapv_inplace(|z| z / C64::new(norm, 0.0));

    let dt = 1.0 / steps as f64;
    let mut excess = 0.0_f64;
    let mut mass_drift = 0.0_f64;
    for k in 0..steps {
        let e = step_matrix(model, grid, (k as f64 + 0.5) * dt, dt)?;
        u = e.dot(&u);
        let t = (k + 1) as f64 * dt;
        let allowed = radius0 + t;
        let mut outside = 0.0;
        let mut total = 0.0;
        for (j, &x) in sites.iter().enumerate() {
            let m = u[j].norm_sqr();
            total += m;
            if crate::discretize::max_metric_distance(model, x, center) > allowed {
                outside += m;
            }
        }
        excess = excess.max(outside / total);
        mass_drift = mass_drift.max((total - 1.0).abs());
    }
    Ok(LightConeReport {
        radius0,
        excess,
        mass_drift,
    })
}

/// Radius-based propagation-speed report for an arbitrary initial state.
#[derive(Debug, Clone)]
pub struct PropagationReport {
    /// Maximum over sample times of
    /// `radius{|u(t)| > eps} - (radius supp u0 + (t - t0))`.
    /// `None` when the initial state vanishes identically (empty support).
    pub max_excess: Option<f64>,
    /// Threshold used to delimit the evolved support.
    pub eps: f64,
}

/// Evolve `u0` over `[t0, t1]` and measure how far the `eps`-support
/// radius (distance from the origin) outruns the unit-speed cone grown
/// from the exact support radius of `u0`. Line models only.
pub fn check_propagation(
    model: &CalliasModel,
    grid: &SpatialGrid,
    u0: &Array1<C64>,
    t0: f64,
    t1: f64,
    steps: usize,
    eps: f64,
) -> Result<PropagationReport> {
    let sites = grid.sites();
    if sites.is_empty() || u0.len() != grid.dim() {
        return Err(CoreError::GridModelMismatch);
    }
    if steps < MIN_STEPS {
        return Err(CoreError::StepCountTooLow {
            got: steps,
            min: MIN_STEPS,
        });
    }
    let mut radius0 = f64::NEG_INFINITY;
    for (j, &x) in sites.iter().enumerate() {
        if u0[j].norm() > 0.0 {
            radius0 = radius0.max(x.abs());
        }
    }
    if radius0 == f64::NEG_INFINITY {
        return Ok(PropagationReport {
            max_excess: None,
            eps,
        });
    }
    let dt = (t1 - t0) / steps as f64;
    let mut u = u0.clone();
    let mut max_excess = f64::NEG_INFINITY;
    for k in 0..steps {
        let e = step_matrix(model, grid, t0 + (k as f64 + 0.5) * dt, dt)?;
        u = e.dot(&u);
        let t = (k + 1) as f64 * dt;
        let mut radius_t = f64::NEG_INFINITY;
        for (j, &x) in sites.iter().enumerate() {
            if u[j].norm() > eps {
                radius_t = radius_t.max(x.abs());
            }
        }
        max_excess = max_excess.max(radius_t - (radius0 + t));
    }
    Ok(PropagationReport {
        max_excess: Some(max_excess),
        eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::make_grid;
    use crate::model::{line_model, Bump};

    fn model_l(c0: f64, c1: f64) -> CalliasModel {
        line_model(
            12.0,
            Bump {
                height: 1.0,
                width: 1.0,
                center: 0.0,
            },
            c0,
            c1,
        )
    }

    #[test]
    fn propagator_is_unitary() {
        let m = model_l(-1.0, 1.0);
        let g = make_grid(&m.domain, 48).unwrap();
        let q = propagate(&m, &g, 24).unwrap();
        assert!(q.unitarity_defect() < 1e-12);
    }

    #[test]
    fn step_count_guard() {
        let m = model_l(-1.0, 1.0);
        let g = make_grid(&m.domain, 32).unwrap();
        assert!(matches!(
            propagate(&m, &g, 8),
            Err(CoreError::StepCountTooLow { got: 8, min: 16 })
        ));
    }

    #[test]
    fn static_model_matches_matrix_exponential() {
        let m = model_l(0.5, 0.5);
        let g = make_grid(&m.domain, 40).unwrap();
        let q = propagate(&m, &g, 16).unwrap();
        let op = assemble_operator(&m, &g, 0.5).unwrap();
        let spec = eigendecompose_matrix(&op.matrix).unwrap();
        let exact = spec.apply_function(|l| C64::from_polar(1.0, -l));
        let mut diff = 0.0_f64;
        for (a, b) in q.matrix.iter().zip(exact.iter()) {
            diff = diff.max((a - b).norm());
        }
        assert!(diff < 1e-10, "diff = {diff}");
    }

    #[test]
    fn windowed_propagators_compose() {
        let m = model_l(-1.0, 1.0);
        let g = make_grid(&m.domain, 32).unwrap();
        let whole = propagate_between(&m, &g, 0.0, 1.0, 32).unwrap();
        let first = propagate_between(&m, &g, 0.0, 0.5, 16).unwrap();
        let second = propagate_between(&m, &g, 0.5, 1.0, 16).unwrap();
        let composed = second.matrix.dot(&first.matrix);
        let mut diff = 0.0_f64;
        for (a, b) in whole.matrix.iter().zip(composed.iter()) {
            diff = diff.max((a - b).norm());
        }
        assert!(diff < 1e-12, "diff = {diff}");
    }

    #[test]
    fn propagation_speed_check() {
        let m = model_l(-1.0, 1.0);
        let g = make_grid(&m.domain, 300).unwrap();
        let nodes = g.nodes();
        let mut u0 = Array1::<C64>::zeros(g.dim());
        for (j, &x) in nodes.iter().enumerate() {
            if x.abs() < 1.0 {
                u0[j] = C64::new((-4.0 * x * x).exp() * (1.0 - x * x), 0.0);
            }
        }
        let n: f64 = u0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        u0.mapv_inplace(|z| z / C64::new(n, 0.0));
        let r = check_propagation(&m, &g, &u0, 0.0, 1.0, 32, 1e-5).unwrap();
        let excess = r.max_excess.unwrap();
        assert!(excess <= 0.5, "excess = {excess}");
        // zero initial state is flagged, not an error
        let zero = Array1::<C64>::zeros(g.dim());
        let rz = check_propagation(&m, &g, &zero, 0.0, 1.0, 32, 1e-5).unwrap();
        assert!(rz.max_excess.is_none());
    }

    #[test]
    fn step_doubling_converges() {
        let m = model_l(-1.0, 1.0);
        let g = make_grid(&m.domain, 32).unwrap();
        let (_, d32) = propagate_checked(&m, &g, 32, 1.0).unwrap();
        let (_, d64) = propagate_checked(&m, &g, 64, 1.0).unwrap();
        // midpoint rule: halving the step shrinks the defect ~4x
        assert!(d64 < 0.4 * d32, "d32 = {d32}, d64 = {d64}");
    }

    #[test]
    fn forward_backward_roundtrip() {
        let m = model_l(-1.0, 1.0);
        let g = make_grid(&m.domain, 32).unwrap();
        let d = g.dim();
        let u0 = Array1::from_iter((0..d).map(|j| C64::new((0.2 * j as f64).cos(), (0.1 * j as f64).sin())));
        let source = |t: f64| {
            Array1::from_iter((0..d).map(|j| C64::new(t * (0.05 * j as f64).sin(), 0.0)))
        };
        let fwd = solve_cauchy(&m, &g, &u0, source, 64).unwrap();
        let back = solve_cauchy_backward(&m, &g, fwd.terminal(), source, 64).unwrap();
        let mut diff = 0.0_f64;
        for (a, b) in back.initial().iter().zip(u0.iter()) {
            diff = diff.max((a - b).norm());
        }
        assert!(diff < 1e-10, "roundtrip diff = {diff}");
    }

    #[test]
    fn homogeneous_cauchy_matches_propagator() {
        let m = model_l(-1.0, 1.0);
        let g = make_grid(&m.domain, 32).unwrap();
        let d = g.dim();
        let u0 = Array1::from_iter((0..d).map(|j| C64::new(((j + 1) as f64).recip(), 0.0)));
        let zero = |_t: f64| Array1::<C64>::zeros(d);
        let sol = solve_cauchy(&m, &g, &u0, zero, 32).unwrap();
        let q = propagate(&m, &g, 32).unwrap();
        let qu = q.matrix.dot(&u0);
        let mut diff = 0.0_f64;
        for (a, b) in sol.terminal().iter().zip(qu.iter()) {
            diff = diff.max((a - b).norm());
        }
        assert!(diff < 1e-12);
    }

    #[test]
    fn cauchy_residual_is_second_order() {
        // interior finite-difference residual of the computed trajectory
        let m = model_l(-1.0, 1.0);
        let g = make_grid(&m.domain, 24).unwrap();
        let d = g.dim();
        let u0 = Array1::from_iter((0..d).map(|j| C64::new((0.3 * j as f64).sin(), 0.1)));
        let source = |t: f64| Array1::from_elem(d, C64::new(0.2 * t, 0.0));
        let residual = |steps: usize| -> f64 {
            let sol = solve_cauchy(&m, &g, &u0, &source, steps).unwrap();
            let dt = 1.0 / steps as f64;
            let mut worst = 0.0_f64;
            for k in (1..steps).step_by(steps / 8) {
                let t = sol.times[k];
                let op = assemble_operator(&m, &g, t).unwrap();
                // i (u_{k+1} - u_{k-1}) / (2 dt) - A u_k + f(t_k)
                let du = (&sol.states[k + 1] - &sol.states[k - 1])
                    .mapv(|z| z * C64::new(0.0, 1.0 / (2.0 * dt)));
                let au = op.matrix.dot(&sol.states[k]);
                let r = du - au + source(t);
                worst = worst.max(r.iter().fold(0.0_f64, |a, z| a.max(z.norm())));
            }
            worst
        };
        let r64 = residual(64);
        let r128 = residual(128);
        assert!(r128 < 0.35 * r64, "r64 = {r64}, r128 = {r128}");
    }

    #[test]
    fn light_cone_leakage_small_and_shrinking() {
        let m = model_l(-1.0, 1.0);
        let g1 = make_grid(&m.domain, 64).unwrap();
        let g2 = make_grid(&m.domain, 128).unwrap();
        let r1 = light_cone_excess(&m, &g1, 32, 0.0, 2.0).unwrap();
        let r2 = light_cone_excess(&m, &g2, 64, 0.0, 2.0).unwrap();
        assert!(r1.mass_drift < 1e-10);
        assert!(r1.excess < 0.05, "excess = {}", r1.excess);
        assert!(r2.excess <= r1.excess * 1.05, "r1 = {}, r2 = {}", r1.excess, r2.excess);
    }
}
