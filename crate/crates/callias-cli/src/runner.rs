//! Task execution and deterministic report assembly.

use std::collections::BTreeMap;

use callias_core::discretize::{assemble_operator, make_grid, SpatialGrid};
use callias_core::evolve::{light_cone_excess, propagate, solve_cauchy};
use callias_core::flow_eta::{
    as_integral, eta_invariant, index_report, relative_eta, spectral_flow,
};
use callias_core::model::{build_model, CalliasModel, SpatialDomain};
use callias_core::qblocks::{
    block_index, kernel_pairing_check, offdiag_decay, q_blocks, split_boundary_spaces,
    BoundarySplitting, QBlocks,
};
use callias_core::spectral::{eigendecompose, SpectralData};
use callias_core::wickaps::{anti_aps_index, aps_index, assemble_wick};
use callias_core::{CoreError, Result};
use ndarray::Array1;
use num_complex::Complex64 as C64;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Task};

/// Report schema identifier.
pub const REPORT_SCHEMA: &str = "callias-lab/report/v1";

/// Manifest schema identifier.
pub const MANIFEST_SCHEMA: &str = "callias-lab/manifest/v1";

/// Everything one run produces: the JSON report plus CSV artifacts.
pub struct RunOutput {
    pub report: Value,
    /// `(file name, contents)` pairs; CSV files are RFC 4180 (CRLF).
    pub artifacts: Vec<(String, Vec<u8>)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let d = h.finalize();
    d.iter().map(|b| format!("{b:02x}")).collect()
}

/// Deterministic serialization: pretty JSON with a trailing newline.
pub fn to_json_bytes(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("report serialization");
    s.push('\n');
    s.into_bytes()
}

struct Workspace {
    model: CalliasModel,
    grid: SpatialGrid,
    spec0: SpectralData,
    spec1: SpectralData,
    splitting: BoundarySplitting,
}

impl Workspace {
    fn new(cfg: &ExperimentConfig) -> Result<Workspace> {
        let model = build_model(&cfg.model)?;
        let grid = make_grid(&model.domain, cfg.numerics.resolution)?;
        let spec0 = eigendecompose(&assemble_operator(&model, &grid, 0.0)?)?;
        let spec1 = eigendecompose(&assemble_operator(&model, &grid, 1.0)?)?;
        let splitting = split_boundary_spaces(&spec0, &spec1)?;
        Ok(Workspace {
            model,
            grid,
            spec0,
            spec1,
            splitting,
        })
    }

    fn blocks(&self, time_steps: usize) -> Result<QBlocks> {
        let q = propagate(&self.model, &self.grid, time_steps)?;
        q_blocks(&q, &self.spec0, &self.spec1, &self.splitting)
    }
}

fn spectrum_json(ws: &Workspace) -> Result<Value> {
    let dims = (
        ws.spec0.checked_kernel_dim()?,
        ws.spec1.checked_kernel_dim()?,
    );
    Ok(json!({
        "dim": ws.spec0.eigenvalues.len(),
        "zero_tol": ws.spec0.zero_tol.max(ws.spec1.zero_tol),
        "initial": {
            "eigenvalues": ws.spec0.eigenvalues.to_vec(),
            "kernel_dim": dims.0,
            "radius": ws.spec0.radius,
        },
        "terminal": {
            "eigenvalues": ws.spec1.eigenvalues.to_vec(),
            "kernel_dim": dims.1,
            "radius": ws.spec1.radius,
        },
    }))
}

/// CSV cell formatting: shortest round-trip representation.
fn csv_f64(x: f64) -> String {
    format!("{x}")
}

fn evolve_json(
    ws: &Workspace,
    time_steps: usize,
    artifacts: &mut Vec<(String, Vec<u8>)>,
) -> Result<Value> {
    let q = propagate(&ws.model, &ws.grid, time_steps)?;
    let mut out = json!({
        "time_steps": time_steps,
        "unitarity_defect": q.unitarity_defect(),
    });
    if let SpatialDomain::Line { .. } = ws.model.domain {
        let cone = light_cone_excess(&ws.model, &ws.grid, time_steps, 0.0, 1.0)?;
        out["light_cone"] = json!({
            "radius0": cone.radius0,
            "excess": cone.excess,
            "mass_drift": cone.mass_drift,
        });
        // trajectory of a normalized bump, exported as CSV
        let nodes = ws.grid.nodes();
        let mut u0 = Array1::<C64>::zeros(ws.grid.dim());
        for (j, &x) in nodes.iter().enumerate() {
            if x.abs() < 1.0 {
                u0[j] = C64::new((1.0 - x * x).powi(2), 0.0);
            }
        }
        let n: f64 = u0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n > 0.0 {
            u0.mapv_inplace(|z| z / C64::new(n, 0.0));
            let sol = solve_cauchy(&ws.model, &ws.grid, &u0, |_| {
                Array1::<C64>::zeros(nodes.len() * 2 - 1)
            }, time_steps)?;
            let mut csv = String::from("t,x,re,im\r\n");
            for (ti, t) in sol.times.iter().enumerate() {
                for (j, &x) in nodes.iter().enumerate() {
                    let z = sol.states[ti][j];
                    csv.push_str(&format!(
                        "{},{},{},{}\r\n",
                        csv_f64(*t),
                        csv_f64(x),
                        csv_f64(z.re),
                        csv_f64(z.im)
                    ));
                }
            }
            artifacts.push(("trajectory.csv".into(), csv.into_bytes()));
            out["trajectory_csv"] = json!("trajectory.csv");
        }
    }
    Ok(out)
}

fn block_json(b: &callias_core::qblocks::BlockIndex) -> Value {
    json!({
        "index": b.index,
        "kernel_dim": b.kernel_dim,
        "cokernel_dim": b.cokernel_dim,
        "rank": b.rank,
        "sigma_max": b.sigma_max,
        "sigma_min_kept": b.sigma_min_kept,
        "guard_clear": b.guard_clear,
    })
}

fn qblocks_json(ws: &Workspace, time_steps: usize) -> Result<Value> {
    let blocks = ws.blocks(time_steps)?;
    let mm = block_index(&blocks.mm)?;
    let pp = block_index(&blocks.pp)?;
    let pairing = kernel_pairing_check(&blocks)?;
    let decay = offdiag_decay(&blocks)?;
    Ok(json!({
        "mm": block_json(&mm),
        "pp": block_json(&pp),
        "pairing": {
            "kernel_dim": pairing.kernel_dim,
            "singular_values": pairing.singular_values,
            "cokernel_residual": pairing.cokernel_residual,
        },
        "offdiag_decay": {
            "ratio_16_1": decay.ratio_16_1,
            "fitted_rate": decay.fitted_rate,
            "leading": decay.singular_values.iter().take(16).cloned().collect::<Vec<_>>(),
        },
    }))
}

fn flow_json(
    ws: &Workspace,
    flow_samples: usize,
    artifacts: &mut Vec<(String, Vec<u8>)>,
) -> Result<Value> {
    let flow = spectral_flow(&ws.model, &ws.grid, flow_samples)?;
    let mut csv = String::from("s,track,lambda\r\n");
    for (j, s) in flow.times.iter().enumerate() {
        for k in 0..flow.tracks.nrows() {
            csv.push_str(&format!(
                "{},{},{}\r\n",
                csv_f64(*s),
                k,
                csv_f64(flow.tracks[[k, j]])
            ));
        }
    }
    artifacts.push(("flow_tracks.csv".into(), csv.into_bytes()));
    Ok(json!({
        "net": flow.net,
        "crossings": flow.crossings.iter().map(|c| json!({
            "t": c.t, "direction": c.direction, "track": c.track,
        })).collect::<Vec<_>>(),
        "max_track_speed": flow.max_track_speed,
        "samples": flow_samples,
        "tracks_csv": "flow_tracks.csv",
    }))
}

fn eta_json(ws: &Workspace, cfg: &ExperimentConfig) -> Result<Value> {
    let method = cfg.numerics.eta_method;
    let eta0 = eta_invariant(&ws.spec0, method)?;
    let eta1 = eta_invariant(&ws.spec1, method)?;
    let rel = relative_eta(&ws.spec0, &ws.spec1)?;
    let asv = as_integral(&ws.model, 256, 64)?;
    Ok(json!({
        "initial": eta0,
        "terminal": eta1,
        "relative": rel,
        "anomaly_integral": { "value": asv.value, "flat": asv.flat },
    }))
}

fn wick_json(ws: &Workspace, n_t: usize) -> Result<Value> {
    let sys = assemble_wick(&ws.model, &ws.grid, n_t)?;
    let aps = aps_index(&sys, &ws.spec0, &ws.spec1, &ws.splitting, 1e-8)?;
    let anti = anti_aps_index(&sys, &ws.spec0, &ws.spec1, &ws.splitting, 1e-8)?;
    let one = |r: &callias_core::wickaps::ApsIndexResult| {
        json!({
            "index": r.ind,
            "kernel_dim": r.dim_ker,
            "cokernel_dim": r.dim_coker,
            "rows": r.rows,
            "cols": r.cols,
            "guard_clear": r.guard_clear,
        })
    };
    Ok(json!({
        "time_steps": n_t,
        "aps": one(&aps),
        "anti_aps": one(&anti),
    }))
}

fn index_json(ws: &Workspace, cfg: &ExperimentConfig) -> Result<Value> {
    let wick = match cfg.numerics.wick_time_steps {
        Some(n_t) => {
            let sys = assemble_wick(&ws.model, &ws.grid, n_t)?;
            Some(aps_index(&sys, &ws.spec0, &ws.spec1, &ws.splitting, 1e-8)?.ind)
        }
        None => None,
    };
    let report = index_report(
        &ws.model,
        cfg.numerics.resolution,
        cfg.numerics.time_steps,
        cfg.numerics.flow_samples,
        wick,
    )?;
    Ok(serde_json::to_value(&report).expect("index report serialization"))
}

/// Execute all tasks of one configuration.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let ws = Workspace::new(cfg)?;
    let mut results = BTreeMap::<String, Value>::new();
    let mut artifacts = Vec::new();
    for task in &cfg.tasks {
        let value = match task {
            Task::Spectrum => spectrum_json(&ws)?,
            Task::Evolve => evolve_json(&ws, cfg.numerics.time_steps, &mut artifacts)?,
            Task::Qblocks => qblocks_json(&ws, cfg.numerics.time_steps)?,
            Task::Flow => flow_json(&ws, cfg.numerics.flow_samples, &mut artifacts)?,
            Task::Eta => eta_json(&ws, cfg)?,
            Task::Index => index_json(&ws, cfg)?,
            Task::Wick => {
                let n_t = cfg.numerics.wick_time_steps.ok_or_else(|| {
                    CoreError::AssumptionViolation {
                        name: "wick task",
                        detail: "numerics.wick_time_steps is required for the wick task".into(),
                    }
                })?;
                wick_json(&ws, n_t)?
            }
        };
        results.insert(task.name().to_string(), value);
    }
    let config_value = serde_json::to_value(cfg).expect("config serialization");
    let config_digest = sha256_hex(&to_json_bytes(&config_value));
    let report = json!({
        "schema": REPORT_SCHEMA,
        "label": cfg.label,
        "seed": cfg.seed,
        "config": config_value,
        "config_sha256": config_digest,
        "results": results,
    });
    Ok(RunOutput { report, artifacts })
}

/// Build the manifest for a set of written files.
pub fn manifest(files: &BTreeMap<String, Vec<u8>>) -> Value {
    let sums: BTreeMap<String, String> = files
        .iter()
        .map(|(k, v)| (k.clone(), sha256_hex(v)))
        .collect();
    json!({
        "schema": MANIFEST_SCHEMA,
        "files": sums,
    })
}
