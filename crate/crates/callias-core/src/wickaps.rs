//! The Wick-rotated elliptic boundary value problem on the space-time
//! cylinder, with APS and anti-APS boundary conditions, and its index by
//! dense SVD.
//!
//! The elliptic operator is realized, up to an invertible zeroth-order
//! prefactor that changes neither kernel nor cokernel, as the first-order
//! system `du/dt - i A(t) u = f`. The time discretization is the same
//! midpoint (Crank-Nicolson) rule family as the evolution module, so the
//! discrete APS kernel corresponds exactly to initial data whose discrete
//! evolution satisfies the terminal boundary condition: the index identity
//! with the propagator block is a finite-dimensional fact, not an
//! asymptotic one.

use ndarray::{s, Array2};
use ndarray_linalg::{JobSvd, SVDDC};
use num_complex::Complex64 as C64;

use crate::discretize::{assemble_operator, SpatialGrid};
use crate::error::{CoreError, Result};
use crate::model::CalliasModel;
use crate::qblocks::BoundarySplitting;
use crate::spectral::SpectralData;

/// Largest admissible column count for the dense SVD.
pub const MAX_COLUMNS: usize = 4000;

/// Minimum admissible time-step count.
pub const MIN_TIME_STEPS: usize = 16;

/// Bookkeeping for the 2-D discretization.
#[derive(Debug, Clone)]
pub struct SpaceTimeGrid {
    pub spatial: SpatialGrid,
    pub time_steps: usize,
}

impl SpaceTimeGrid {
    /// Spatial dimension d.
    pub fn state_dim(&self) -> usize {
        self.spatial.dim()
    }

    /// Number of state vectors: times t_0 .. t_{N_t}.
    pub fn state_count(&self) -> usize {
        self.time_steps + 1
    }

    /// Number of scalar equations: one d-block per interval midpoint.
    pub fn equation_rows(&self) -> usize {
        self.time_steps * self.state_dim()
    }
}

/// Assembled Crank-Nicolson system, before boundary conditions.
///
/// Equation block k (scaled by the step size for conditioning):
/// `(-1 - i dt A_mid / 2) u_k + (1 - i dt A_mid / 2) u_{k+1} = dt f_mid`.
#[derive(Debug)]
pub struct WickSystem {
    pub grid: SpaceTimeGrid,
    /// Per-step coefficient of `u_k`.
    left: Vec<Array2<C64>>,
    /// Per-step coefficient of `u_{k+1}`.
    right: Vec<Array2<C64>>,
}

/// Assemble the Wick-rotated system on `[0, 1]` with `n_t` steps.
pub fn assemble_wick(
    model: &CalliasModel,
    spatial: &SpatialGrid,
    n_t: usize,
) -> Result<WickSystem> {
    if n_t < MIN_TIME_STEPS {
        return Err(CoreError::StepCountTooLow {
            got: n_t,
            min: MIN_TIME_STEPS,
        });
    }
    let d = spatial.dim();
    let dt = 1.0 / n_t as f64;
    let mut left = Vec::with_capacity(n_t);
    let mut right = Vec::with_capacity(n_t);
    let half = C64::new(0.0, -0.5 * dt);
    for k in 0..n_t {
        let t_mid = (k as f64 + 0.5) * dt;
        let a = assemble_operator(model, spatial, t_mid)?.matrix;
        let mut l = a.mapv(|z| z * half);
        let mut r = l.clone();
        for j in 0..d {
            l[[j, j]] -= C64::new(1.0, 0.0);
            r[[j, j]] += C64::new(1.0, 0.0);
        }
        left.push(l);
        right.push(r);
    }
    Ok(WickSystem {
        grid: SpaceTimeGrid {
            spatial: spatial.clone(),
            time_steps: n_t,
        },
        left,
        right,
    })
}

/// Index data of a boundary value problem.
#[derive(Debug, Clone)]
pub struct ApsIndexResult {
    pub ind: i64,
    pub dim_ker: usize,
    pub dim_coker: usize,
    pub rows: usize,
    pub cols: usize,
    pub sigma_max: f64,
    /// False if a singular value fell in the rank guard band.
    pub guard_clear: bool,
}

fn basis_columns(spec: &SpectralData, indices: &[usize]) -> Array2<C64> {
    let d = spec.eigenvectors.nrows();
    let mut b = Array2::<C64>::zeros((d, indices.len()));
    for (c, &i) in indices.iter().enumerate() {
        b.slice_mut(s![.., c]).assign(&spec.eigenvectors.column(i));
    }
    b
}

fn constrained_matrix(
    sys: &WickSystem,
    initial_basis: &Array2<C64>,
    terminal_basis: &Array2<C64>,
) -> Result<Array2<C64>> {
    let d = sys.grid.state_dim();
    let n_t = sys.grid.time_steps;
    let c0 = initial_basis.ncols();
    let c1 = terminal_basis.ncols();
    let rows = sys.grid.equation_rows();
    let cols = c0 + (n_t - 1) * d + c1;
    if cols > MAX_COLUMNS {
        return Err(CoreError::ProblemTooLarge {
            detail: format!("wick system has {cols} columns (limit {MAX_COLUMNS})"),
        });
    }
    let mut m = Array2::<C64>::zeros((rows, cols));
    // column offsets: u_0 -> [0, c0); u_k (1..n_t) -> c0 + (k-1) d; u_{n_t} -> cols - c1
    for k in 0..n_t {
        let r0 = k * d;
        // u_k coefficient
        if k == 0 {
            let b = sys.left[k].dot(initial_basis);
            m.slice_mut(s![r0..r0 + d, 0..c0]).assign(&b);
        } else {
            let off = c0 + (k - 1) * d;
            m.slice_mut(s![r0..r0 + d, off..off + d]).assign(&sys.left[k]);
        }
        // u_{k+1} coefficient
        if k == n_t - 1 {
            let b = sys.right[k].dot(terminal_basis);
            m.slice_mut(s![r0..r0 + d, cols - c1..cols]).assign(&b);
        } else {
            let off = c0 + k * d;
            let mut target = m.slice_mut(s![r0..r0 + d, off..off + d]);
            let cur = &target.to_owned() + &sys.right[k];
            target.assign(&cur);
        }
    }
    Ok(m)
}

fn index_of_matrix(m: &Array2<C64>, sv_tol: f64) -> Result<ApsIndexResult> {
    let (rows, cols) = m.dim();
    let (_, sv, _) = m
        .svddc(JobSvd::None)
        .map_err(|e| CoreError::ConvergenceFailure(format!("svd: {e}")))?;
    let sigma_max = sv.iter().cloned().fold(0.0_f64, f64::max);
    let tol = sv_tol * sigma_max.max(f64::MIN_POSITIVE);
    let rank = sv.iter().filter(|s| **s > tol).count();
    let guard_clear = !sv.iter().any(|&s| s > tol && s <= 1e3 * tol);
    Ok(ApsIndexResult {
        ind: cols as i64 - rows as i64,
        dim_ker: cols - rank,
        dim_coker: rows - rank,
        rows,
        cols,
        sigma_max,
        guard_clear,
    })
}

/// Index of the APS problem: `P_[0,inf) at t=0` and `P_(-inf,0] at t=1`
/// both vanish, i.e. the initial state runs over the strictly negative
/// eigenspace and the terminal state over the strictly positive one.
pub fn aps_index(
    sys: &WickSystem,
    spec0: &SpectralData,
    spec1: &SpectralData,
    split: &BoundarySplitting,
    sv_tol: f64,
) -> Result<ApsIndexResult> {
    let b0 = basis_columns(spec0, &split.minus0);
    let b1 = basis_columns(spec1, &split.plus1);
    index_of_matrix(&constrained_matrix(sys, &b0, &b1)?, sv_tol)
}

/// Index of the anti-APS problem with the complementary constraints:
/// the initial state runs over the `[0, inf)` eigenspace and the terminal
/// state over the `(-inf, 0]` one.
pub fn anti_aps_index(
    sys: &WickSystem,
    spec0: &SpectralData,
    spec1: &SpectralData,
    split: &BoundarySplitting,
    sv_tol: f64,
) -> Result<ApsIndexResult> {
    let b0 = basis_columns(spec0, &split.plus0);
    let b1 = basis_columns(spec1, &split.minus1);
    index_of_matrix(&constrained_matrix(sys, &b0, &b1)?, sv_tol)
}

/// Index data of the unconstrained system (free boundary data at both
/// ends); its kernel is d-dimensional — one free discrete Cauchy datum.
pub fn free_index(sys: &WickSystem, sv_tol: f64) -> Result<ApsIndexResult> {
    let d = sys.grid.state_dim();
    let eye = Array2::<C64>::eye(d);
    index_of_matrix(&constrained_matrix(sys, &eye, &eye)?, sv_tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::make_grid;
    use crate::model::{circle_model, line_model, Bump};
    use crate::qblocks::split_boundary_spaces;
    use crate::spectral::eigendecompose;

    const TOL: f64 = 1e-8;

    fn specs(
        model: &CalliasModel,
        grid: &SpatialGrid,
    ) -> (SpectralData, SpectralData, BoundarySplitting) {
        let s0 = eigendecompose(&assemble_operator(model, grid, 0.0).unwrap()).unwrap();
        let s1 = eigendecompose(&assemble_operator(model, grid, 1.0).unwrap()).unwrap();
        let split = split_boundary_spaces(&s0, &s1).unwrap();
        (s0, s1, split)
    }

    #[test]
    fn free_system_has_cauchy_kernel() {
        let m = circle_model(0.3, 0.3);
        let g = make_grid(&m.domain, 8).unwrap();
        let sys16 = assemble_wick(&m, &g, 16).unwrap();
        let r16 = free_index(&sys16, TOL).unwrap();
        assert_eq!(r16.dim_ker, g.dim());
        assert_eq!(r16.dim_coker, 0);
        // refinement stability
        let sys32 = assemble_wick(&m, &g, 32).unwrap();
        let r32 = free_index(&sys32, TOL).unwrap();
        assert_eq!(r32.dim_ker, r16.dim_ker);
    }

    #[test]
    fn static_kernel_free_aps_index_zero() {
        let m = circle_model(0.3, 0.3);
        let g = make_grid(&m.domain, 8).unwrap();
        let (s0, s1, split) = specs(&m, &g);
        let sys = assemble_wick(&m, &g, 16).unwrap();
        let r = aps_index(&sys, &s0, &s1, &split, TOL).unwrap();
        assert_eq!((r.ind, r.dim_ker, r.dim_coker), (0, 0, 0));
        let a = anti_aps_index(&sys, &s0, &s1, &split, TOL).unwrap();
        assert_eq!((a.ind, a.dim_ker, a.dim_coker), (0, 0, 0));
    }

    #[test]
    fn circle_winding_one_aps_index() {
        let m = circle_model(0.0, 1.0);
        let g = make_grid(&m.domain, 8).unwrap();
        let (s0, s1, split) = specs(&m, &g);
        let sys = assemble_wick(&m, &g, 32).unwrap();
        let r = aps_index(&sys, &s0, &s1, &split, TOL).unwrap();
        assert_eq!(r.ind, 0);
        assert!(r.guard_clear);
        let a = anti_aps_index(&sys, &s0, &s1, &split, TOL).unwrap();
        assert_eq!(a.ind, 0);
    }

    #[test]
    fn line_crossing_aps_matches_block_index() {
        let m = line_model(
            12.0,
            Bump {
                height: 1.0,
                width: 1.0,
                center: 0.0,
            },
            -1.0,
            1.0,
        );
        let g = make_grid(&m.domain, 48).unwrap();
        let (s0, s1, split) = specs(&m, &g);
        let sys = assemble_wick(&m, &g, 16).unwrap();
        let r = aps_index(&sys, &s0, &s1, &split, TOL).unwrap();
        assert_eq!((r.ind, r.dim_ker, r.dim_coker), (1, 1, 0));
        let a = anti_aps_index(&sys, &s0, &s1, &split, TOL).unwrap();
        assert_eq!((a.ind, a.dim_ker, a.dim_coker), (-1, 0, 1));
    }

    #[test]
    fn oversized_system_rejected() {
        let m = circle_model(0.3, 0.3);
        let g = make_grid(&m.domain, 64).unwrap(); // d = 129
        let sys = assemble_wick(&m, &g, 64).unwrap();
        let eye = Array2::<C64>::eye(g.dim());
        assert!(matches!(
            constrained_matrix(&sys, &eye, &eye),
            Err(CoreError::ProblemTooLarge { .. })
        ));
    }
}
