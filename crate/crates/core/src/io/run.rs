//! Command dispatch: runs one command on a validated configuration and
//! writes its artifacts.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::admissibility::{check_admissible_with, AdmissibilityReport, BcResiduals, BC_TOL};
use crate::energy::{load_form, Functional};
use crate::error::{Result, ShellError};
use crate::geometry::{curvatures, fundamental_forms, Vec3};
use crate::minimize::{minimize, Iterations, StageRecord, TrajectoryNorms};
use crate::verify::{
    blowup_probe, classify, coercivity_probe, identity_checks, polyconvexity_probe, BlowupReport, CoercivityReport, ConvexityReport,
    IdentityReport,
};

use super::config::{Format, RunConfig};
use super::format::{obj_string, to_json, write_csv, SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Curvature,
    Evaluate,
    Verify,
    Minimize,
}

impl Command {
    pub const ALL: [Command; 4] = [Command::Curvature, Command::Evaluate, Command::Verify, Command::Minimize];

    pub fn name(self) -> &'static str {
        match self {
            Command::Curvature => "curvature",
            Command::Evaluate => "evaluate",
            Command::Verify => "verify",
            Command::Minimize => "minimize",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = ShellError;
    fn from_str(s: &str) -> Result<Self> {
        Command::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| ShellError::validation("command", format!("unknown command `{s}`")))
    }
}

/// Per-node geometry with the preset's exact curvatures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureRow {
    pub i: usize,
    pub j: usize,
    pub x1: f64,
    pub x2: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub weight: f64,
    pub sqrt_a: f64,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    #[serde(rename = "H_exact")]
    pub h_exact: f64,
    #[serde(rename = "K_exact")]
    pub k_exact: f64,
    #[serde(rename = "H_error")]
    pub h_error: f64,
    #[serde(rename = "K_error")]
    pub k_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvatureSummary {
    pub schema_version: u32,
    pub command: String,
    pub surface: String,
    pub nx: usize,
    pub ny: usize,
    pub area: f64,
    /// Quadrature of `K sqrt_a`.
    pub total_curvature: f64,
    pub max_abs_h_error: f64,
    pub max_abs_k_error: f64,
    pub identities: IdentityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateReport {
    pub schema_version: u32,
    pub command: String,
    /// `int W - L`; absent when the configuration is not admissible.
    pub total_energy: Option<f64>,
    pub stored_energy: Option<f64>,
    pub load_work: f64,
    pub admissibility: AdmissibilityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub command: String,
    pub seed: u64,
    pub polyconvexity: Option<ConvexityReport>,
    pub coercivity: Option<CoercivityReport>,
    /// Reason the coercivity probe was not run for this energy.
    pub coercivity_skipped: Option<String>,
    pub blowup: Option<BlowupReport>,
    pub classification: Option<String>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimizeReport {
    pub schema_version: u32,
    pub command: String,
    pub converged: bool,
    pub stall: Option<String>,
    pub iterations: Iterations,
    pub stages: Vec<StageRecord>,
    pub energy_history: Vec<f64>,
    pub objective_history: Vec<f64>,
    pub grad_norm_history: Vec<f64>,
    pub norm_history: Vec<TrajectoryNorms>,
    pub admissibility: AdmissibilityReport,
    pub psi_final: Vec<Vec3>,
}

/// Final per-node state of a minimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeRow {
    pub i: usize,
    pub j: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub sqrt_a: f64,
    pub m_plus: f64,
    pub m_minus: f64,
}

/// Result of a dispatched command. `success` is false on a failed probe,
/// an inadmissible evaluation or a non-converged minimization.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub success: bool,
    pub report: String,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.success {
            0
        } else {
            1
        }
    }
}

struct Sink<'a> {
    dir: &'a Path,
    formats: &'a [Format],
    files: Vec<PathBuf>,
}

impl Sink<'_> {
    fn put(&mut self, fmt: Format, name: &str, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        if self.formats.contains(&fmt) {
            let p = self.dir.join(name);
            write(&p)?;
            self.files.push(p);
        }
        Ok(())
    }

    fn json(&mut self, name: &str, text: &str) -> Result<()> {
        self.put(Format::Json, name, |p| Ok(std::fs::write(p, text)?))
    }
}

/// Run `cmd`. Relative input paths resolve against `base`; artifacts go to
/// `cfg.output.dir`.
pub fn dispatch(cmd: Command, cfg: &RunConfig, base: &Path) -> Result<Outcome> {
    cfg.validate()?;
    let pb = cfg.prepare(base)?;
    std::fs::create_dir_all(&cfg.output.dir)?;
    let mut sink = Sink { dir: &cfg.output.dir, formats: &cfg.output.formats, files: Vec::new() };
    let grid = pb.shell.grid().clone();
    let name = cmd.name().to_string();
    let (success, report) = match cmd {
        Command::Curvature => {
            let psi = &pb.deformed;
            let cd = curvatures(&fundamental_forms(psi)?);
            let preset = &cfg.reference_surface;
            let rows: Vec<CurvatureRow> = (0..grid.len())
                .map(|n| {
                    let (i, j) = grid.ij(n);
                    let x = grid.coords(n);
                    let (he, ke) = preset.curvature(x);
                    let p = psi.psi[n];
                    CurvatureRow {
                        i,
                        j,
                        x1: x[0],
                        x2: x[1],
                        x: p[0],
                        y: p[1],
                        z: p[2],
                        weight: grid.weight(n),
                        sqrt_a: psi.sqrt_a[n],
                        h: cd.h[n],
                        k: cd.k[n],
                        kappa1: cd.kappa1[n],
                        kappa2: cd.kappa2[n],
                        h_exact: he,
                        k_exact: ke,
                        h_error: cd.h[n] - he,
                        k_error: cd.k[n] - ke,
                    }
                })
                .collect();
            let area = grid.integrate(&psi.sqrt_a)?;
            let kd: Vec<f64> = rows.iter().map(|r| r.k * r.sqrt_a).collect();
            let summary = CurvatureSummary {
                schema_version: SCHEMA_VERSION,
                command: name,
                surface: preset.name().to_string(),
                nx: grid.nx,
                ny: grid.ny,
                area,
                total_curvature: grid.integrate(&kd)?,
                max_abs_h_error: rows.iter().map(|r| r.h_error.abs()).fold(0.0, f64::max),
                max_abs_k_error: rows.iter().map(|r| r.k_error.abs()).fold(0.0, f64::max),
                identities: identity_checks(psi)?,
            };
            sink.put(Format::Csv, "curvature.csv", |p| write_csv(p, &rows))?;
            sink.put(Format::Obj, "surface.obj", |p| Ok(std::fs::write(p, obj_string(&grid, &psi.psi)?)?))?;
            (true, to_json(&summary)?)
        }
        Command::Evaluate => {
            let psi = &pb.deformed;
            let tol = BcResiduals { psi: BC_TOL, a3: cfg.solver.normal_bc_tol };
            let adm = check_admissible_with(psi, &pb.shell, pb.bc.as_ref(), tol)?;
            let load_work = load_form(psi, &pb.loads)?;
            let f = Functional::new(&pb.spec, &pb.loads, &pb.shell)?;
            let total = if adm.ok { Some(f.evaluate(psi)?.energy) } else { None };
            if adm.ok {
                let rows = f.density_rows(psi)?;
                sink.put(Format::Csv, "density.csv", |p| write_csv(p, &rows))?;
            }
            let r = EvaluateReport {
                schema_version: SCHEMA_VERSION,
                command: name,
                total_energy: total,
                stored_energy: total.map(|t| t + load_work),
                load_work,
                admissibility: adm,
            };
            (r.total_energy.is_some(), to_json(&r)?)
        }
        Command::Verify => {
            let v = cfg.verify;
            let spec = &pb.spec;
            let poly = if v.polyconvexity > 0 { Some(polyconvexity_probe(spec, v.polyconvexity, cfg.seed)?) } else { None };
            let (coer, skipped) = if v.coercivity == 0 {
                (None, None)
            } else {
                match coercivity_probe(spec, &pb.shell, v.coercivity, cfg.seed) {
                    Ok(r) => (Some(r), None),
                    Err(ShellError::UnsupportedSpec(why)) => (None, Some(why)),
                    Err(e) => return Err(e),
                }
            };
            let blow = if v.blowup > 0 { Some(blowup_probe(spec, v.blowup)?) } else { None };
            let classification = match (&poly, &blow) {
                (Some(p), Some(b)) => Some(classify(p, b).to_string()),
                _ => None,
            };
            let passed =
                poly.as_ref().is_none_or(|r| r.passed) && coer.as_ref().is_none_or(|r| r.passed) && blow.as_ref().is_none_or(|r| r.passed);
            let r = VerifyReport {
                schema_version: SCHEMA_VERSION,
                command: name,
                seed: cfg.seed,
                polyconvexity: poly,
                coercivity: coer,
                coercivity_skipped: skipped,
                blowup: blow,
                classification,
                passed,
            };
            (passed, to_json(&r)?)
        }
        Command::Minimize => {
            let bc = pb.bc.as_ref().ok_or_else(|| ShellError::validation("bc", "minimize needs a clamped boundary part"))?;
            let res = minimize(&pb.deformed, &pb.spec, &pb.loads, &pb.shell, bc, &cfg.solver)?;
            let fin = &res.psi_final;
            let f = Functional::new(&pb.spec, &pb.loads, &pb.shell)?;
            let rows: Vec<NodeRow> = f
                .density_rows(fin)?
                .into_iter()
                .enumerate()
                .map(|(n, d)| {
                    let p = fin.psi[n];
                    NodeRow {
                        i: d.node_i,
                        j: d.node_j,
                        x: p[0],
                        y: p[1],
                        z: p[2],
                        w: d.w,
                        h: d.h,
                        k: d.k,
                        sqrt_a: d.sqrt_a,
                        m_plus: d.m_plus,
                        m_minus: d.m_minus,
                    }
                })
                .collect();
            sink.put(Format::Csv, "minimize.csv", |p| write_csv(p, &rows))?;
            sink.put(Format::Obj, "minimize.obj", |p| Ok(std::fs::write(p, obj_string(&grid, &fin.psi)?)?))?;
            let r = MinimizeReport {
                schema_version: SCHEMA_VERSION,
                command: name,
                converged: res.converged,
                stall: res.stall,
                iterations: res.iterations,
                stages: res.stages,
                energy_history: res.energy_history,
                objective_history: res.objective_history,
                grad_norm_history: res.grad_norm_history,
                norm_history: res.norm_history,
                admissibility: res.admissibility,
                psi_final: fin.psi.clone(),
            };
            (r.converged, to_json(&r)?)
        }
    };
    sink.json(&format!("{}.json", cmd.name()), &report)?;
    Ok(Outcome { success, report, files: sink.files })
}

/// Structured form of an error for the error stream.
pub fn error_json(err: &ShellError) -> String {
    let kind = match err {
        ShellError::InvalidGrid(_) => "invalid_grid",
        ShellError::Shape(_) => "shape",
        ShellError::DegenerateSurface { .. } => "degenerate_surface",
        ShellError::DegenerateMetric { .. } => "degenerate_metric",
        ShellError::ReferenceDegenerate { .. } => "reference_degenerate",
        ShellError::NumericDomain(_) => "numeric_domain",
        ShellError::Inadmissible(_) => "inadmissible",
        ShellError::Validation { .. } => "validation",
        ShellError::Parse { .. } => "parse",
        ShellError::UnsupportedSpec(_) => "unsupported_spec",
        ShellError::Sampling(_) => "sampling",
        ShellError::Path(_) => "path",
        ShellError::Io(_) => "io",
        ShellError::Json(_) => "json",
    };
    let mut e = serde_json::json!({ "kind": kind, "message": err.to_string() });
    match err {
        ShellError::Validation { field, .. } => e["field"] = field.clone().into(),
        ShellError::Parse { line, column, .. } => {
            e["line"] = (*line).into();
            e["column"] = (*column).into();
        }
        _ => {}
    }
    serde_json::json!({ "schema_version": SCHEMA_VERSION, "error": e }).to_string()
}
