//! Command-line driver: configuration, pipeline steps and artifact emission.
//!
//! Every artifact goes under the output directory. Exit codes: 0 success,
//! 2 invalid configuration, 3 existence condition violated, 4 solver failure.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analysis::{check_wellposedness, estimate_constants, nondimensionalize, ConstantsReport, WellPosednessVerdict, DEFAULT_SAFETY_FACTOR};
use crate::cell::{compute_effective_tensors, CellProblem, DimensionlessParams, EffectiveTensors, InvariantReport};
use crate::darcy::{solve_darcy_on_cube, DarcySummary, DarcyTensors};
use crate::epsweep::{cells_per_axis, run_sweep, CellAverageTable, SweepConfig, UnfoldError};
use crate::error::{Error, Result};
use crate::forcing::Forcing;
use crate::geom::V3;
use crate::mesh::{build_unit_cell_mesh, vtk, CellMesh, ObstacleSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub resolution: usize,
    pub obstacle_radius: f64,
    pub obstacle_center: V3,
}

/// Either `N2` or all of `nu`, `nu_r`, `ca`, `cd`. Without `alpha` the `γ = 0`
/// value `1/α = N²(1+β)` is used; without `Rc` the viscosity quadruple supplies `R_M`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(rename = "N2", default, skip_serializing_if = "Option::is_none")]
    pub n2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ca: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cd: Option<f64>,
    #[serde(rename = "Rc", default, skip_serializing_if = "Option::is_none")]
    pub rc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub beta: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingSection {
    pub f: Forcing,
    pub g: Forcing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DarcySection {
    pub resolution: usize,
}

/// `1/m` written as a number or as the string `"1/m"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Epsilon {
    Value(f64),
    Fraction(String),
}

impl Epsilon {
    pub fn value(&self) -> Result<f64> {
        match self {
            Epsilon::Value(v) => Ok(*v),
            Epsilon::Fraction(s) => {
                let bad = || Error::ConfigInvalid(format!("epsilon '{s}' is not of the form 1/m"));
                let (a, b) = s.split_once('/').ok_or_else(bad)?;
                let (a, b): (u32, u32) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if a != 1 || b == 0 {
                    return Err(bad());
                }
                Ok(1.0 / b as f64)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub epsilons: Vec<Epsilon>,
    pub per_cell_resolution: usize,
    pub darcy_resolution: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Vtk,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub geometry: Geometry,
    pub params: Params,
    #[serde(default)]
    pub forcing: ForcingSection,
    #[serde(default = "default_darcy")]
    pub darcy: DarcySection,
    #[serde(default = "default_sweep")]
    pub sweep: SweepSection,
    #[serde(default = "default_output")]
    pub output: OutputSection,
}

fn default_darcy() -> DarcySection {
    DarcySection { resolution: 16 }
}

fn default_sweep() -> SweepSection {
    SweepSection {
        epsilons: ["1/2", "1/3", "1/4"].map(|s| Epsilon::Fraction(s.into())).to_vec(),
        per_cell_resolution: 6,
        darcy_resolution: 12,
    }
}

fn default_output() -> OutputSection {
    OutputSection { directory: "out".into(), formats: vec![Format::Json, Format::Csv, Format::Vtk] }
}

impl Default for Config {
    /// Sphere of radius 1/4 at resolution 8, `N² = 0.5`, `R_c = β = 1`, `γ = 0`, `f = e₁`, `g = 0`.
    fn default() -> Self {
        Config {
            geometry: Geometry { resolution: 8, obstacle_radius: 0.25, obstacle_center: [0.5; 3] },
            params: Params { n2: Some(0.5), rc: Some(1.0), beta: 1.0, ..Params::default() },
            forcing: ForcingSection { f: Forcing::Constant([1.0, 0.0, 0.0]), g: Forcing::Constant([0.0; 3]) },
            darcy: default_darcy(),
            sweep: default_sweep(),
            output: default_output(),
        }
    }
}

fn invalid<E: std::fmt::Display>(e: E) -> Error {
    Error::ConfigInvalid(e.to_string())
}

impl Config {
    pub fn from_toml(s: &str) -> Result<Self> {
        let c: Config = toml::from_str(s).map_err(invalid)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path).map_err(|e| Error::ConfigInvalid(format!("{}: {e}", path.display())))?;
        Self::from_toml(&s)
    }

    pub fn validate(&self) -> Result<()> {
        self.dimensionless().map_err(invalid)?;
        self.obstacle().validate().map_err(invalid)?;
        self.forcing.f.validate()?;
        self.forcing.g.validate()?;
        if self.geometry.resolution < 2 || self.darcy.resolution < 1 || self.sweep.per_cell_resolution < 2 {
            return Err(invalid("resolutions must be at least 2 (cell) and 1 (darcy)"));
        }
        for e in &self.sweep.epsilons {
            cells_per_axis(e.value()?).map_err(invalid)?;
        }
        if self.output.formats.is_empty() {
            return Err(invalid("output.formats is empty"));
        }
        Ok(())
    }

    pub fn dimensionless(&self) -> Result<DimensionlessParams> {
        let p = &self.params;
        let quad = [p.nu, p.nu_r, p.ca, p.cd];
        let (n2, rc) = match (p.n2, quad.iter().all(Option::is_some), quad.iter().any(Option::is_some)) {
            (Some(n2), false, false) => (n2, p.rc.ok_or_else(|| invalid("params.Rc is required with N2"))?),
            (None, true, _) => {
                let nd = nondimensionalize(p.nu.unwrap(), p.nu_r.unwrap(), p.ca.unwrap(), p.cd.unwrap(), 1.0)?;
                (nd.n2, p.rc.unwrap_or(nd.r_m))
            }
            _ => return Err(invalid("give exactly one of params.N2 or the full (nu, nu_r, ca, cd)")),
        };
        match p.alpha {
            Some(a) => DimensionlessParams::new(n2, rc, a, p.beta),
            None => DimensionlessParams::gamma_zero(n2, rc, p.beta),
        }
    }

    pub fn obstacle(&self) -> ObstacleSpec {
        ObstacleSpec::sphere(self.geometry.obstacle_center, self.geometry.obstacle_radius)
    }

    pub fn sweep_config(&self, safety: f64) -> Result<SweepConfig> {
        Ok(SweepConfig {
            epsilons: self.sweep.epsilons.iter().map(Epsilon::value).collect::<Result<_>>()?,
            per_cell_resolution: self.sweep.per_cell_resolution,
            obstacle: self.obstacle(),
            params: self.dimensionless()?,
            f: self.forcing.f.clone(),
            g: self.forcing.g.clone(),
            darcy_resolution: self.sweep.darcy_resolution,
            safety_factor: safety,
        })
    }

    fn wants(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Solve the six cell problems and report their invariants
    CellSolve,
    /// Effective tensors K1, K2, L1, L2
    Tensors,
    /// Existence condition; exits 3 when it fails
    Check,
    /// Homogenized Darcy problem on the unit cube
    Darcy,
    /// ε-resolved solves and convergence report
    EpsSweep,
    /// Per-ε unfolding and cell-average details
    Unfold,
    /// Poincaré, trace, Gaffney and inf-sup constants
    Constants,
}

#[derive(Debug, Parser)]
#[command(name = "microdarcy", version, about = "Periodic homogenization of micropolar flow through perforated media")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration; built-in defaults when omitted
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// output directory, overriding output.directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = DEFAULT_SAFETY_FACTOR)]
    pub safety_factor: f64,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ConfigInvalid(_)
        | Error::InvalidParameter(_)
        | Error::NonPositiveViscosity
        | Error::InvalidObstacle(_)
        | Error::ObstacleTouchesBoundary
        | Error::ResolutionTooCoarse(_)
        | Error::NonIntegerTiling(_)
        | Error::TooFewSamples => 2,
        Error::WellPosednessViolated { .. } => 3,
        _ => 4,
    }
}

/// Parses arguments, runs, reports errors on stderr; returns the exit code.
pub fn main_with_args<I: IntoIterator<Item = String>>(args: I) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let run = || -> Result<Vec<PathBuf>> {
        let mut cfg = match &cli.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        if let Some(o) = &cli.out {
            cfg.output.directory = o.clone();
        }
        run(cli.command, &cfg, cli.safety_factor)
    };
    match run() {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("microdarcy: {e}");
            exit_code(&e)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub params: DimensionlessParams,
    pub gamma: f64,
    pub satisfied: bool,
    /// absent for `γ = 0`, where no constants are needed
    pub verdict: Option<WellPosednessVerdict>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSolutionSummary {
    pub i: usize,
    pub k: usize,
    pub residual: f64,
    pub invariants: InvariantReport,
    pub integral_u: V3,
    pub integral_w: V3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnfoldRow {
    pub epsilon: f64,
    pub unfold: UnfoldError,
    pub boundary_defect: f64,
    pub cell_average: CellAverageTable,
}

fn write(dir: &Path, name: &str, contents: &str, out: &mut Vec<PathBuf>) -> Result<()> {
    let p = dir.join(name);
    fs::write(&p, contents)?;
    out.push(p);
    Ok(())
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("artifact serializes");
    s.push('\n');
    s
}

fn cell_mesh(cfg: &Config) -> Result<CellMesh> {
    build_unit_cell_mesh(cfg.geometry.resolution, cfg.obstacle())
}

/// Tensors from `tensors.json` in the output directory when present, else recomputed.
fn load_or_compute_tensors(cfg: &Config, safety: f64) -> Result<EffectiveTensors> {
    let p = cfg.output.directory.join("tensors.json");
    if let Ok(s) = fs::read_to_string(&p) {
        let t = EffectiveTensors::from_json(&s)?;
        if t.params == cfg.dimensionless()?
            && t.mesh.resolution == cfg.geometry.resolution
            && t.mesh.radius == cfg.geometry.obstacle_radius {
            return Ok(t);
        }
    }
    let m = cell_mesh(cfg)?;
    compute_effective_tensors(&CellProblem::with_safety(&m, cfg.dimensionless()?, None, safety)?.solve_all()?)
}

/// Runs one command; returns the files written.
pub fn run(cmd: Command, cfg: &Config, safety: f64) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    if !(safety >= 1.0 && safety.is_finite()) {
        return Err(invalid(format!("safety factor {safety} must be at least 1")));
    }
    let dir = &cfg.output.directory;
    fs::create_dir_all(dir)?;
    let params = cfg.dimensionless()?;
    let mut out = Vec::new();
    match cmd {
        Command::Constants => {
            let c = estimate_constants(&cell_mesh(cfg)?)?;
            write(dir, "constants.json", &json(&c), &mut out)?;
        }
        Command::Check => {
            let verdict = if params.gamma() == 0.0 {
                None
            } else {
                let c: ConstantsReport = estimate_constants(&cell_mesh(cfg)?)?;
                Some(check_wellposedness(&params, &c, safety))
            };
            let satisfied = verdict.as_ref().is_none_or(|v| v.satisfied);
            let r = CheckReport { params, gamma: params.gamma(), satisfied, verdict };
            write(dir, "verdict.json", &json(&r), &mut out)?;
            if let Some(v) = r.verdict.filter(|v| !v.satisfied) {
                return Err(Error::WellPosednessViolated { gamma_sq: v.gamma * v.gamma, bound: v.bound });
            }
        }
        Command::CellSolve => {
            let m = cell_mesh(cfg)?;
            let sols = CellProblem::with_safety(&m, params, None, safety)?.solve_all()?;
            let rows: Vec<CellSolutionSummary> = sols
                .iter()
                .map(|s| CellSolutionSummary {
                    i: s.i,
                    k: s.k,
                    residual: s.residual,
                    invariants: s.invariants(),
                    integral_u: s.integral_u(),
                    integral_w: s.integral_w(),
                })
                .collect();
            write(dir, "cell_solutions.json", &json(&rows), &mut out)?;
            if cfg.wants(Format::Vtk) {
                let nv = m.mesh.n_vertices();
                let vertex_values = |space: &crate::fem::Space, c: &[f64]| -> Vec<V3> {
                    let n = space.expand(c);
                    (0..nv).map(|v| [n[3 * v], n[3 * v + 1], n[3 * v + 2]]).collect()
                };
                let fields: Vec<(String, Vec<V3>)> = sols
                    .iter()
                    .flat_map(|s| {
                        [
                            (format!("u_{}_{}", s.i, s.k), vertex_values(&s.problem.vel, &s.u)),
                            (format!("w_{}_{}", s.i, s.k), vertex_values(&s.problem.rot, &s.w)),
                        ]
                    })
                    .collect();
                let data: Vec<vtk::Data> = fields.iter().map(|(n, v)| vtk::Data::PointVector(n, v)).collect();
                let p = dir.join("cell_solutions.vtk");
                vtk::write(&p, &m.mesh, "cell solutions", &data)?;
                out.push(p);
            }
        }
        Command::Tensors => {
            let m = cell_mesh(cfg)?;
            let t = compute_effective_tensors(&CellProblem::with_safety(&m, params, None, safety)?.solve_all()?)?;
            write(dir, "tensors.json", &(t.to_json() + "\n"), &mut out)?;
        }
        Command::Darcy => {
            let t = load_or_compute_tensors(cfg, safety)?;
            let (f, g) = (cfg.forcing.f.field(), cfg.forcing.g.field());
            let d = solve_darcy_on_cube(DarcyTensors::from(&t), &f, &g, cfg.darcy.resolution)?;
            let summary: DarcySummary = d.summary(&f, &g);
            write(dir, "darcy.json", &json(&summary), &mut out)?;
            let p = dir.join("darcy.vtk");
            d.write_vtk(&p)?;
            out.push(p);
        }
        Command::EpsSweep | Command::Unfold => {
            let vtk_out = cmd == Command::EpsSweep && cfg.wants(Format::Vtk);
            let s = run_sweep(&cfg.sweep_config(safety)?, vtk_out)?;
            if cmd == Command::EpsSweep {
                write(dir, "sweep.csv", &s.report.to_csv(), &mut out)?;
                write(dir, "sweep.json", &(s.report.to_json() + "\n"), &mut out)?;
                for sol in &s.solutions {
                    let p = dir.join(format!("eps_1_{}.vtk", sol.mesh.m));
                    sol.write_vtk(&p)?;
                    out.push(p);
                }
            } else {
                let rows: Vec<UnfoldRow> = s
                    .report
                    .rows
                    .iter()
                    .zip(s.unfold.iter().zip(&s.boundary_defects).zip(s.tables))
                    .map(|(r, ((u, d), t))| UnfoldRow { epsilon: r.epsilon, unfold: *u, boundary_defect: *d, cell_average: t })
                    .collect();
                write(dir, "unfold.json", &json(&rows), &mut out)?;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
