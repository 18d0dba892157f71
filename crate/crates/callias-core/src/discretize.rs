//! Spatial grids and assembly of the Hermitian boundary operator family.
//!
//! Circle models use exact Fourier modes, so the scalar model with a
//! spatially constant gauge is an exact finite model of the shifted
//! momentum operator. Line models use a staggered two-grid scheme: the
//! first spinor chirality lives on `n` nodes, the second on the `n - 1`
//! midpoints, and the first-order derivative couples them with a compact
//! second-order-accurate stencil. The staggering makes the discrete
//! operator carry the continuum zero-mode count: a single-grid central
//! difference adds a spurious doubler branch whose zero mode cancels the
//! physical one in every index count.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{CoreError, Result};
use crate::model::{CalliasModel, SpatialDomain};

/// Discretization of the spatial slice.
#[derive(Debug, Clone, PartialEq)]
pub enum SpatialGrid {
    /// Fourier modes `-K..=K` on a circle; operator dimension `2K + 1`.
    FourierCircle { modes: usize, circumference: f64 },
    /// `n` interior nodes plus `n - 1` midpoints on `[-L, L]` with
    /// Dirichlet truncation; operator dimension `2n - 1`.
    StaggeredLine { n: usize, half_width: f64 },
}

impl SpatialGrid {
    /// Dimension of the assembled operator.
    pub fn dim(&self) -> usize {
        match self {
            SpatialGrid::FourierCircle { modes, .. } => 2 * modes + 1,
            SpatialGrid::StaggeredLine { n, .. } => 2 * n - 1,
        }
    }

    /// Node spacing on the line; 0 for the spectral circle grid.
    pub fn spacing(&self) -> f64 {
        match self {
            SpatialGrid::FourierCircle { .. } => 0.0,
            SpatialGrid::StaggeredLine { n, half_width } => {
                2.0 * half_width / (*n as f64 + 1.0)
            }
        }
    }

    /// Node coordinates (chirality-plus sites) on the line.
    pub fn nodes(&self) -> Vec<f64> {
        match self {
            SpatialGrid::FourierCircle { .. } => vec![],
            SpatialGrid::StaggeredLine { n, half_width } => {
                let h = self.spacing();
                (1..=*n).map(|j| -half_width + j as f64 * h).collect()
            }
        }
    }

    /// Midpoint coordinates (chirality-minus sites) on the line.
    pub fn midpoints(&self) -> Vec<f64> {
        match self {
            SpatialGrid::FourierCircle { .. } => vec![],
            SpatialGrid::StaggeredLine { .. } => {
                let h = self.spacing();
                let nodes = self.nodes();
                nodes.windows(2).map(|w| w[0] + 0.5 * h).collect()
            }
        }
    }

    /// All site coordinates in matrix ordering (nodes then midpoints).
    pub fn sites(&self) -> Vec<f64> {
        match self {
            SpatialGrid::FourierCircle { .. } => vec![],
            SpatialGrid::StaggeredLine { .. } => {
                let mut s = self.nodes();
                s.extend(self.midpoints());
                s
            }
        }
    }

    /// Fourier mode indices `-K..=K`.
    pub fn mode_indices(&self) -> Vec<i64> {
        match self {
            SpatialGrid::FourierCircle { modes, .. } => {
                let k = *modes as i64;
                (-k..=k).collect()
            }
            SpatialGrid::StaggeredLine { .. } => vec![],
        }
    }
}

/// Hermitian matrix of the boundary operator at a fixed time, together
/// with its provenance.
#[derive(Debug, Clone)]
pub struct HermitianOperator {
    pub matrix: Array2<C64>,
    pub grid: SpatialGrid,
    pub t: f64,
}

impl HermitianOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `max |A - A*|`; exactly zero by symmetrized assembly.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.dim() {
            for j in 0..=i {
                let d = (self.matrix[[i, j]] - self.matrix[[j, i]].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }
}

/// Build a grid for the model domain. `resolution` is the mode cutoff K on
/// the circle and the node count n on the line; both require >= 8.
pub fn make_grid(domain: &SpatialDomain, resolution: usize) -> Result<SpatialGrid> {
    if resolution < 8 {
        return Err(CoreError::ResolutionTooLow {
            got: resolution,
            min: 8,
        });
    }
    Ok(match domain {
        SpatialDomain::Circle { circumference } => SpatialGrid::FourierCircle {
            modes: resolution,
            circumference: *circumference,
        },
        SpatialDomain::Line { half_width } => SpatialGrid::StaggeredLine {
            n: resolution,
            half_width: *half_width,
        },
    })
}

/// Assemble the Hermitian boundary operator at time `t`.
pub fn assemble_operator(
    model: &CalliasModel,
    grid: &SpatialGrid,
    t: f64,
) -> Result<HermitianOperator> {
    let matrix = match (&model.domain, grid) {
        (SpatialDomain::Circle { circumference }, SpatialGrid::FourierCircle { modes, circumference: gc })
            if circumference == gc =>
        {
            assemble_circle(model, *modes, *circumference, t)
        }
        (SpatialDomain::Line { half_width }, SpatialGrid::StaggeredLine { n, half_width: gw })
            if half_width == gw =>
        {
            assemble_line(model, *n, *half_width, t)
        }
        _ => return Err(CoreError::GridModelMismatch),
    };
    Ok(HermitianOperator {
        matrix,
        grid: grid.clone(),
        t,
    })
}

fn assemble_circle(model: &CalliasModel, k: usize, circumference: f64, t: f64) -> Array2<C64> {
    let dim = 2 * k + 1;
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut a = Array2::<C64>::zeros((dim, dim));
    // -i d/dx is diagonal in the Fourier basis.
    for (row, m) in (-(k as i64)..=(k as i64)).enumerate() {
        a[[row, row]] = C64::new(two_pi * m as f64 / circumference, 0.0);
    }
    if let Some(g) = &model.gauge {
        // theta is the holonomy fraction: the spectrum of the bare gauged
        // momentum is (2*pi/C)(n + theta).
        let theta = g.theta.eval(t, model.collar_delta);
        for row in 0..dim {
            a[[row, row]] += C64::new(two_pi * theta / circumference, 0.0);
        }
        // cosine harmonic amp*cos(2*pi*q*x/C + phase) has Fourier
        // coefficients (amp/2) e^{+i phase} at +q and (amp/2) e^{-i phase}
        // at -q; it couples modes m and m -+ q.
        for h in &g.harmonics {
            let amp = h.amplitude.eval(t, model.collar_delta);
            if amp == 0.0 {
                continue;
            }
            let q = h.mode.unsigned_abs() as usize;
            let coeff = 0.5 * amp;
            for row in 0..dim {
                if row + q < dim {
                    // row = col + q: picks up the +q Fourier coefficient
                    let val = C64::from_polar(coeff, h.phase);
                    a[[row + q, row]] += val;
                    a[[row, row + q]] += val.conj();
                }
            }
        }
    }
    a
}

fn assemble_line(model: &CalliasModel, n: usize, half_width: f64, t: f64) -> Array2<C64> {
    let h = 2.0 * half_width / (n as f64 + 1.0);
    let dim = 2 * n - 1;
    let mut a = Array2::<C64>::zeros((dim, dim));
    let nodes: Vec<f64> = (1..=n).map(|j| -half_width + j as f64 * h).collect();

    // Chirality basis: block [0..n) = nodes (sigma_2 = +1 sector),
    // block [n..2n-1) = midpoints (sigma_2 = -1 sector).
    // A = [[ p, B* ], [ B, -p ]] with B = d/dx + phi sampled at midpoints.
    for (j, &x) in nodes.iter().enumerate() {
        a[[j, j]] = C64::new(model.potential_perp(t, x), 0.0);
    }
    for m in 0..n - 1 {
        let y = nodes[m] + 0.5 * h;
        let row = n + m;
        a[[row, row]] = C64::new(-model.potential_perp(t, y), 0.0);
        let phi = model.potential_phi(t, y);
        let lo = C64::new(-1.0 / h + 0.5 * phi, 0.0);
        let hi = C64::new(1.0 / h + 0.5 * phi, 0.0);
        a[[row, m]] = lo;
        a[[m, row]] = lo.conj();
        a[[row, m + 1]] = hi;
        a[[m + 1, row]] = hi.conj();
    }
    a
}

/// Time derivative of the assembled family, by symmetric differencing of
/// the closed-form coefficient profiles.
pub fn assemble_time_derivative(
    model: &CalliasModel,
    grid: &SpatialGrid,
    t: f64,
    dt: f64,
) -> Result<Array2<C64>> {
    let plus = assemble_operator(model, grid, t + dt)?;
    let minus = assemble_operator(model, grid, t - dt)?;
    Ok((&plus.matrix - &minus.matrix) / C64::new(2.0 * dt, 0.0))
}

/// Distance in the max-metric. With the static flat metric and unit lapse
/// this is Euclidean distance on the line and geodesic arc length on the
/// circle.
pub fn max_metric_distance(model: &CalliasModel, x: f64, y: f64) -> f64 {
    match model.domain {
        SpatialDomain::Line { .. } => (x - y).abs(),
        SpatialDomain::Circle { circumference } => {
            let d = (x - y).rem_euclid(circumference);
            d.min(circumference - d)
        }
    }
}

/// Sample a scalar profile on all sites of a grid as a state vector living
/// in the chirality-plus (node) sector.
pub fn node_state(grid: &SpatialGrid, f: impl Fn(f64) -> C64) -> Array1<C64> {
    match grid {
        SpatialGrid::FourierCircle { .. } => {
            Array1::zeros(grid.dim())
        }
        SpatialGrid::StaggeredLine { .. } => {
            let mut u = Array1::<C64>::zeros(grid.dim());
            for (j, x) in grid.nodes().iter().enumerate() {
                u[j] = f(*x);
            }
            u
        }
    }
}
