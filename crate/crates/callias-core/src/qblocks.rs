//! Spectral-subspace block decomposition of the wave propagator and the
//! Fredholm indices of its diagonal compressions.
//!
//! The boundary operators at the two ends of the cylinder split the state
//! space twice. The splitting conventions differ at the two ends on
//! purpose — zero modes are grouped with the positive half at the initial
//! time and with the negative half at the final time:
//!
//! * at `t = 0`: plus = `[0, inf)`, minus = `(-inf, 0)`;
//! * at `t = 1`: plus = `(0, inf)`, minus = `(-inf, 0]`.
//!
//! With these conventions the index of the minus-minus compression equals
//! the spectral flow of the family minus the terminal kernel dimension,
//! exactly and at every resolution.

use ndarray::{Array1, Array2};
use ndarray_linalg::SVD;
use num_complex::Complex64 as C64;

use crate::error::{CoreError, Result};
use crate::evolve::UnitaryPropagator;
use crate::spectral::SpectralData;

/// Relative singular-value threshold for rank decisions.
pub const SV_REL_TOL: f64 = 1e-8;

/// Index sets of the two boundary splittings (into the eigenbasis order).
#[derive(Debug, Clone)]
pub struct BoundarySplitting {
    /// `[0, inf)` eigenvector indices at `t = 0`.
    pub plus0: Vec<usize>,
    /// `(-inf, 0)` eigenvector indices at `t = 0`.
    pub minus0: Vec<usize>,
    /// `(0, inf)` eigenvector indices at `t = 1`.
    pub plus1: Vec<usize>,
    /// `(-inf, 0]` eigenvector indices at `t = 1`.
    pub minus1: Vec<usize>,
}

/// Build the boundary splitting from endpoint eigendecompositions.
///
/// Errors with `AmbiguousKernel` if either endpoint spectrum has an
/// eigenvalue in the guard band, since then the splitting itself is
/// ill-defined at the working resolution.
pub fn split_boundary_spaces(
    spec0: &SpectralData,
    spec1: &SpectralData,
) -> Result<BoundarySplitting> {
    spec0.checked_kernel_dim()?;
    spec1.checked_kernel_dim()?;
    Ok(BoundarySplitting {
        plus0: spec0.nonnegative_indices(),
        minus0: spec0.negative_indices(),
        plus1: spec1.positive_indices(),
        minus1: spec1.nonpositive_indices(),
    })
}

/// The four blocks of the propagator in the boundary eigenbases.
#[derive(Debug, Clone)]
pub struct QBlocks {
    /// plus0 -> plus1.
    pub pp: Array2<C64>,
    /// minus0 -> plus1.
    pub pm: Array2<C64>,
    /// plus0 -> minus1.
    pub mp: Array2<C64>,
    /// minus0 -> minus1.
    pub mm: Array2<C64>,
}

/// Compress the propagator into its four boundary blocks.
pub fn q_blocks(
    q: &UnitaryPropagator,
    spec0: &SpectralData,
    spec1: &SpectralData,
    splitting: &BoundarySplitting,
) -> Result<QBlocks> {
    let d = q.matrix.nrows();
    if spec0.eigenvectors.nrows() != d || spec1.eigenvectors.nrows() != d {
        return Err(CoreError::DimensionMismatch(format!(
            "propagator dim {d} vs eigenbases {} / {}",
            spec0.eigenvectors.nrows(),
            spec1.eigenvectors.nrows()
        )));
    }
    // W = V1* Q V0, then slice.
    let v1h = spec1.eigenvectors.t().mapv(|z| z.conj());
    let w = v1h.dot(&q.matrix).dot(&spec0.eigenvectors);
    let take = |rows: &[usize], cols: &[usize]| {
        let mut b = Array2::<C64>::zeros((rows.len(), cols.len()));
        for (bi, &i) in rows.iter().enumerate() {
            for (bj, &j) in cols.iter().enumerate() {
                b[[bi, bj]] = w[[i, j]];
            }
        }
        b
    };
    Ok(QBlocks {
        pp: take(&splitting.plus1, &splitting.plus0),
        pm: take(&splitting.plus1, &splitting.minus0),
        mp: take(&splitting.minus1, &splitting.plus0),
        mm: take(&splitting.minus1, &splitting.minus0),
    })
}

/// Fredholm data of one block.
#[derive(Debug, Clone)]
pub struct BlockIndex {
    /// `dim ker - dim coker`. For a finite matrix this always equals
    /// `cols - rows`; the kernel and cokernel dimensions below are the
    /// numerically interesting content.
    pub index: i64,
    pub kernel_dim: usize,
    pub cokernel_dim: usize,
    pub rank: usize,
    /// Largest singular value.
    pub sigma_max: f64,
    /// Smallest singular value counted as nonzero, if any.
    pub sigma_min_kept: Option<f64>,
    /// False if some singular value fell in the guard band
    /// `(tol, 1000 * tol]`, making the rank decision fragile.
    pub guard_clear: bool,
}

/// Singular-value analysis of a block.
pub fn block_index(block: &Array2<C64>) -> Result<BlockIndex> {
    let (rows, cols) = block.dim();
    if rows == 0 || cols == 0 {
        return Ok(BlockIndex {
            index: cols as i64 - rows as i64,
            kernel_dim: cols,
            cokernel_dim: rows,
            rank: 0,
            sigma_max: 0.0,
            sigma_min_kept: None,
            guard_clear: true,
        });
    }
    let (_, sv, _) = block
        .svd(false, false)
        .map_err(|e| CoreError::ConvergenceFailure(format!("svd: {e}")))?;
    let sigma_max = sv.iter().cloned().fold(0.0_f64, f64::max);
    let tol = SV_REL_TOL * sigma_max.max(f64::MIN_POSITIVE);
    let rank = sv.iter().filter(|s| **s > tol).count();
    let guard_clear = !sv.iter().any(|&s| s > tol && s <= 1e3 * tol);
    let sigma_min_kept = sv
        .iter()
        .cloned()
        .filter(|&s| s > tol)
        .fold(None, |a: Option<f64>, s| Some(a.map_or(s, |x| x.min(s))));
    Ok(BlockIndex {
        index: cols as i64 - rows as i64,
        kernel_dim: cols - rank,
        cokernel_dim: rows - rank,
        rank,
        sigma_max,
        sigma_min_kept,
        guard_clear,
    })
}

/// Report of the kernel-pairing identity: the plus-minus block maps the
/// kernel of the minus-minus block isometrically onto the cokernel
/// (adjoint kernel) of the plus-plus block.
#[derive(Debug, Clone)]
pub struct PairingReport {
    /// Singular values of the pairing map restricted to the kernel; all
    /// should equal 1 for a unitary propagator.
    pub singular_values: Vec<f64>,
    /// `max || Qpp* (Qpm k) ||` over kernel basis vectors `k`; should
    /// vanish, certifying the image lies in the cokernel.
    pub cokernel_residual: f64,
    pub kernel_dim: usize,
}

/// Verify the kernel-pairing identity for a block decomposition.
pub fn kernel_pairing_check(blocks: &QBlocks) -> Result<PairingReport> {
    let (rows, cols) = blocks.mm.dim();
    if rows == 0 || cols == 0 {
        return Ok(PairingReport {
            singular_values: vec![],
            cokernel_residual: 0.0,
            kernel_dim: if rows == 0 { cols } else { 0 },
        });
    }
    let (_, sv, vt) = blocks
        .mm
        .svd(false, true)
        .map_err(|e| CoreError::ConvergenceFailure(format!("svd: {e}")))?;
    let vt = vt.expect("requested right singular vectors");
    let sigma_max = sv.iter().cloned().fold(0.0_f64, f64::max);
    let tol = SV_REL_TOL * sigma_max.max(f64::MIN_POSITIVE);
    // kernel basis: rows of vt (conjugated) past the rank, plus all of
    // the null space when cols > number of singular values
    let mut kernel_cols: Vec<usize> = Vec::new();
    for (i, &s) in sv.iter().enumerate() {
        if s <= tol {
            kernel_cols.push(i);
        }
    }
    for i in sv.len()..cols.min(vt.nrows()) {
        kernel_cols.push(i);
    }
    let k = kernel_cols.len();
    if k == 0 {
        return Ok(PairingReport {
            singular_values: vec![],
            cokernel_residual: 0.0,
            kernel_dim: 0,
        });
    }
    let mut kernel = Array2::<C64>::zeros((cols, k));
    for (bk, &i) in kernel_cols.iter().enumerate() {
        for j in 0..cols {
            kernel[[j, bk]] = vt[[i, j]].conj();
        }
    }
    let image = blocks.pm.dot(&kernel);
    let (_, isv, _) = image
        .svd(false, false)
        .map_err(|e| CoreError::ConvergenceFailure(format!("svd: {e}")))?;
    let pph = blocks.pp.t().mapv(|z| z.conj());
    let back = pph.dot(&image);
    let cokernel_residual = back.iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    Ok(PairingReport {
        singular_values: isv.to_vec(),
        cokernel_residual,
        kernel_dim: k,
    })
}

/// Sorted singular values of the off-diagonal plus-minus block, with a
/// fitted exponential decay rate. For a family smooth in time the
/// off-diagonal coupling is quasi-adiabatically small and the singular
/// values decay fast; loss of decay flags an under-resolved evolution.
#[derive(Debug, Clone)]
pub struct DecayTable {
    /// Descending singular values of the plus-minus block.
    pub singular_values: Vec<f64>,
    /// `sigma_16 / sigma_1` (0 if fewer than 16 singular values).
    pub ratio_16_1: f64,
    /// Least-squares slope of `ln sigma_k` against `k` over values above
    /// 1e-14 relative; negative means decay.
    pub fitted_rate: f64,
}

/// Decay diagnostics of the off-diagonal block.
pub fn offdiag_decay(blocks: &QBlocks) -> Result<DecayTable> {
    let (_, sv, _) = blocks
        .pm
        .svd(false, false)
        .map_err(|e| CoreError::ConvergenceFailure(format!("svd: {e}")))?;
    let mut singular_values: Vec<f64> = sv.to_vec();
    singular_values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let ratio_16_1 = if singular_values.len() >= 16 && singular_values[0] > 0.0 {
        singular_values[15] / singular_values[0]
    } else {
        0.0
    };
    // fit ln sigma_k ~ a + rate * k over the usable range
    let top = singular_values.first().cloned().unwrap_or(0.0);
    let pts: Vec<(f64, f64)> = singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > 1e-14 * top.max(f64::MIN_POSITIVE))
        .map(|(k, &s)| (k as f64, s.ln()))
        .collect();
    let fitted_rate = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    } else {
        0.0
    };
    Ok(DecayTable {
        singular_values,
        ratio_16_1,
        fitted_rate,
    })
}

/// Compactness diagnostics of the minus-plus block: a singular-value
/// ladder at geometric indices, plus a smoothing-ratio bound. The block
/// maps positive initial data into the negative terminal subspace; the
/// smoothing ratio measures by how much an extra Sobolev order is gained
/// across the map, maximized over a bank of compactly supported probes.
#[derive(Debug, Clone)]
pub struct CompactnessTable {
    /// `(k, sigma_k)` for `k = 1, 4, 16, ...` (1-indexed, descending).
    pub sigma_ladder: Vec<(usize, f64)>,
    /// One smoothing ratio per probe vector.
    pub smoothing_ratios: Vec<f64>,
    /// Worst ratio over the bank.
    pub max_ratio: f64,
    /// Sobolev order `s` of the probe norm; the image is measured in
    /// order `s + 1`.
    pub sobolev_order: f64,
}

/// Bank of normalized, compactly supported probe states on the position
/// nodes of a line grid (bumps of assorted centers and widths).
pub fn probe_bank(grid: &crate::discretize::SpatialGrid, count: usize) -> Result<Vec<Array1<C64>>> {
    let sites = grid.sites();
    let nodes = grid.nodes();
    if sites.is_empty() || nodes.is_empty() {
        return Err(CoreError::GridModelMismatch);
    }
    let half = nodes.last().copied().unwrap_or(1.0);
    let mut bank = Vec::with_capacity(count);
    for p in 0..count {
        let frac = (p as f64 + 0.5) / count as f64;
        let center = -0.5 * half + frac * half;
        let width = 0.5 + 1.5 * frac;
        let mut u = Array1::<C64>::zeros(grid.dim());
        for (j, &x) in nodes.iter().enumerate() {
            let s = (x - center) / width;
            if s.abs() < 1.0 {
                u[j] = C64::new((1.0 - s * s).powi(2), 0.0);
            }
        }
        let n: f64 = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n > 0.0 {
            u.mapv_inplace(|z| z / C64::new(n, 0.0));
            bank.push(u);
        }
    }
    if bank.is_empty() {
        return Err(CoreError::AssumptionViolation {
            name: "probe bank",
            detail: "no probe intersects the grid".into(),
        });
    }
    Ok(bank)
}

/// Build the compactness table for a block decomposition.
///
/// `op0` and `op1` are the boundary operators (used for the Sobolev
/// scales at the two ends); `bank` holds position-space probe states.
pub fn compactness_table(
    blocks: &QBlocks,
    spec0: &SpectralData,
    spec1: &SpectralData,
    splitting: &BoundarySplitting,
    op0: &crate::discretize::HermitianOperator,
    op1: &crate::discretize::HermitianOperator,
    sobolev_order: f64,
    bank: &[Array1<C64>],
) -> Result<CompactnessTable> {
    let (_, sv, _) = blocks
        .mp
        .svd(false, false)
        .map_err(|e| CoreError::ConvergenceFailure(format!("svd: {e}")))?;
    let mut sorted: Vec<f64> = sv.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut sigma_ladder = Vec::new();
    let mut k = 1usize;
    while k <= sorted.len() {
        sigma_ladder.push((k, sorted[k - 1]));
        k *= 4;
    }

    let mut smoothing_ratios = Vec::with_capacity(bank.len());
    for u in bank {
        if u.len() != spec0.eigenvectors.nrows() {
            return Err(CoreError::DimensionMismatch(format!(
                "probe length {} vs state dim {}",
                u.len(),
                spec0.eigenvectors.nrows()
            )));
        }
        // coefficients of u on the plus0 eigenvectors
        let mut c = Array1::<C64>::zeros(splitting.plus0.len());
        for (bi, &i) in splitting.plus0.iter().enumerate() {
            let v = spec0.eigenvectors.column(i);
            c[bi] = v.iter().zip(u.iter()).map(|(a, b)| a.conj() * b).sum();
        }
        let w_coeff = blocks.mp.dot(&c);
        // back to position space through the minus1 eigenvectors
        let mut w = Array1::<C64>::zeros(u.len());
        for (bi, &i) in splitting.minus1.iter().enumerate() {
            let v = spec1.eigenvectors.column(i);
            for (wj, vj) in w.iter_mut().zip(v.iter()) {
                *wj += vj * w_coeff[bi];
            }
        }
        let denom = crate::spectral::sobolev_norm(op0, u, sobolev_order)?;
        let numer = crate::spectral::sobolev_norm(op1, &w, sobolev_order + 1.0)?;
        smoothing_ratios.push(if denom > 0.0 { numer / denom } else { 0.0 });
    }
    let max_ratio = smoothing_ratios.iter().cloned().fold(0.0_f64, f64::max);
    Ok(CompactnessTable {
        sigma_ladder,
        smoothing_ratios,
        max_ratio,
        sobolev_order,
    })
}

/// Regularity of the minus-minus kernel states: how fast their
/// coefficients on the initial eigenbasis decay with the eigenvalue.
#[derive(Debug, Clone)]
pub struct KernelRegularity {
    /// Fitted exponent `p` in `|<v_lambda, kappa>| ~ (1 + lambda^2)^{-p}`,
    /// the worst (smallest) over kernel basis vectors. `None` marks an
    /// empty kernel — a valid outcome, not an error.
    pub decay_exponent: Option<f64>,
    pub kernel_dim: usize,
}

/// Fit the eigenbasis decay of the minus-minus kernel states.
pub fn kernel_regularity_check(
    blocks: &QBlocks,
    spec0: &SpectralData,
    splitting: &BoundarySplitting,
) -> Result<KernelRegularity> {
    let (rows, cols) = blocks.mm.dim();
    if rows == 0 || cols == 0 {
        return Ok(KernelRegularity {
            decay_exponent: None,
            kernel_dim: if rows == 0 { cols } else { 0 },
        });
    }
    let (_, sv, vt) = blocks
        .mm
        .svd(false, true)
        .map_err(|e| CoreError::ConvergenceFailure(format!("svd: {e}")))?;
    let vt = vt.expect("requested right singular vectors");
    let sigma_max = sv.iter().cloned().fold(0.0_f64, f64::max);
    let tol = SV_REL_TOL * sigma_max.max(f64::MIN_POSITIVE);
    let mut kernel_cols: Vec<usize> = sv
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= tol)
        .map(|(i, _)| i)
        .collect();
    kernel_cols.extend(sv.len()..cols.min(vt.nrows()));
    if kernel_cols.is_empty() {
        return Ok(KernelRegularity {
            decay_exponent: None,
            kernel_dim: 0,
        });
    }
    let d = spec0.eigenvectors.nrows();
    let mut worst: Option<f64> = None;
    for &kc in &kernel_cols {
        // embed the kernel vector into the full space
        let mut kappa = Array1::<C64>::zeros(d);
        for (bj, &i) in splitting.minus0.iter().enumerate() {
            let v = spec0.eigenvectors.column(i);
            let coeff = vt[[kc, bj]].conj();
            for (kj, vj) in kappa.iter_mut().zip(v.iter()) {
                *kj += vj * coeff;
            }
        }
        // fit ln |c_i| against ln (1 + lambda_i^2)
        let mut pts: Vec<(f64, f64)> = Vec::new();
        for i in 0..d {
            let v = spec0.eigenvectors.column(i);
            let c: C64 = v.iter().zip(kappa.iter()).map(|(a, b)| a.conj() * b).sum();
            let m = c.norm();
            if m > 1e-13 {
                pts.push(((1.0 + spec0.eigenvalues[i].powi(2)).ln(), m.ln()));
            }
        }
        if pts.len() < 2 {
            continue;
        }
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let exponent = -slope;
        worst = Some(worst.map_or(exponent, |w: f64| w.min(exponent)));
    }
    Ok(KernelRegularity {
        decay_exponent: worst,
        kernel_dim: kernel_cols.len(),
    })
}
