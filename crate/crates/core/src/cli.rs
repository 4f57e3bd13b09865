//! `dglab` command line: von Neumann sweeps, lambda scans and Taylor-Green
//! runs. Every subcommand takes an optional TOML config whose keys mirror
//! the long flag names; flags given on the command line win.

use crate::basis::{KernelSpec, NodeFamily};
use crate::dgsem3d::{
    ConservedField, Reduction, RunStatus, Solver, SolverConfig, SolverError, SvvConfig, SvvViscosity,
    ViscosityModel,
};
use crate::diagnostics::{energy_spectrum, tgv_initial_condition, DiagnosticsError};
use crate::physics3d::GasModel;
use crate::vn1d::{
    default_k_grid, dispersion_dissipation_sweep, max_dissipation_vs_lambda, period_grid, LambdaScan, SvvSettings,
    VnConfig, VnError,
};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::ffi::OsString;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config file {path}: {msg}")]
    Config { path: PathBuf, msg: String },
    #[error("eigensolver failed at kh = {kh:?}: {msg}")]
    Eigen { kh: Vec<f64>, msg: String },
    #[error("run aborted at t = {time}: {error}")]
    Positivity { time: f64, error: SolverError },
    #[error(transparent)]
    Vn(#[from] VnError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } => 2,
            CliError::Vn(VnError::InvalidConfig(_) | VnError::LambdaGrid | VnError::PeriodGrid | VnError::GridOrder | VnError::GridStart(_) | VnError::Basis(_)) => 2,
            CliError::Solver(SolverError::InvalidConfig(_)) => 2,
            CliError::Eigen { .. } | CliError::Vn(_) => 3,
            CliError::Positivity { .. } => 4,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dglab", version, about = "Dissipation laboratory for high-order DG schemes")]
pub struct Cli {
    /// worker threads (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// fixed-order reductions, bit-reproducible across thread counts
    #[arg(long, global = true)]
    pub deterministic: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dispersion/dissipation sweep over k for one configuration
    VnSweep(VnSweepArgs),
    /// Mode-set dissipation maxima and their merge/split events versus lambda
    VnLambdaScan(LambdaScanArgs),
    /// Taylor-Green vortex run
    Tgv(TgvArgs),
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct VnSweepArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, conflicts_with = "inviscid")]
    pub pe: Option<f64>,
    #[arg(long)]
    pub inviscid: bool,
    #[arg(long)]
    pub svv_mu: Option<f64>,
    #[arg(long)]
    pub svv_p: Option<f64>,
    /// gauss | gauss-lobatto
    #[arg(long)]
    pub family: Option<NodeFamily>,
    #[arg(long)]
    pub kpoints: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct LambdaScanArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[arg(long)]
    pub lambda_min: Option<f64>,
    #[arg(long)]
    pub lambda_max: Option<f64>,
    /// number of lambda intervals
    #[arg(long)]
    pub steps: Option<usize>,
    /// extra lambda values reported outside the event scan
    #[arg(long, value_delimiter = ',')]
    pub lambda_points: Option<Vec<f64>>,
    #[arg(long)]
    pub family: Option<NodeFamily>,
    /// kh intervals over one period
    #[arg(long)]
    pub kpoints: Option<usize>,
    /// start of the kh period
    #[arg(long)]
    pub kh0: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelArg {
    None,
    Smagorinsky,
    SvvConst,
    SvvSmagorinsky,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct TgvArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long = "E")]
    #[serde(rename = "E")]
    pub e: Option<usize>,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, conflicts_with = "inviscid")]
    pub re: Option<f64>,
    #[arg(long)]
    pub inviscid: bool,
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    #[arg(long)]
    pub svv_p: Option<f64>,
    #[arg(long)]
    pub svv_mu: Option<f64>,
    #[arg(long)]
    pub tend: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub snapshots: Option<Vec<f64>>,
    #[arg(long)]
    pub cfl: Option<f64>,
    #[arg(long)]
    pub mach: Option<f64>,
    #[arg(long)]
    pub diag_interval: Option<f64>,
    /// spectrum sampling points per direction (default 2 E (N+1))
    #[arg(long)]
    pub spectrum_grid: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn load<T: for<'de> Deserialize<'de> + Default>(path: &Option<PathBuf>) -> Result<T, CliError> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Config { path: p.clone(), msg: e.to_string() })?;
            toml::from_str(&text).map_err(|e| CliError::Config { path: p.clone(), msg: e.to_string() })
        }
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

impl VnSweepArgs {
    /// Flags over file values.
    pub fn merged(self) -> Result<Self, CliError> {
        let f: Self = load(&self.config)?;
        let inviscid = self.inviscid || (f.inviscid && self.pe.is_none());
        Ok(Self {
            config: self.config,
            n: self.n.or(f.n),
            lambda: self.lambda.or(f.lambda),
            pe: if self.inviscid { None } else { self.pe.or(f.pe) },
            inviscid,
            svv_mu: self.svv_mu.or(f.svv_mu),
            svv_p: self.svv_p.or(f.svv_p),
            family: self.family.or(f.family),
            kpoints: self.kpoints.or(f.kpoints),
            out: self.out.or(f.out),
        })
    }

    pub fn vn_config(&self) -> Result<VnConfig, CliError> {
        if self.inviscid && self.pe.is_some() {
            return usage("--pe and --inviscid are exclusive");
        }
        let svv = match (self.svv_mu, self.svv_p) {
            (None, None) => None,
            (Some(mu), Some(p)) => Some(SvvSettings { mu, kernel: KernelSpec::Power { p } }),
            _ => return usage("--svv-mu and --svv-p go together"),
        };
        let cfg = VnConfig {
            n: self.n.unwrap_or(7),
            family: self.family.unwrap_or(NodeFamily::Gauss),
            lambda: self.lambda.unwrap_or(0.0),
            pe: self.pe,
            svv,
            ..VnConfig::default()
        };
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

impl LambdaScanArgs {
    pub fn merged(self) -> Result<Self, CliError> {
        let f: Self = load(&self.config)?;
        Ok(Self {
            config: self.config,
            n: self.n.or(f.n),
            lambda_min: self.lambda_min.or(f.lambda_min),
            lambda_max: self.lambda_max.or(f.lambda_max),
            steps: self.steps.or(f.steps),
            lambda_points: self.lambda_points.or(f.lambda_points),
            family: self.family.or(f.family),
            kpoints: self.kpoints.or(f.kpoints),
            kh0: self.kh0.or(f.kh0),
            out: self.out.or(f.out),
        })
    }

    pub fn lambda_grid(&self) -> Result<Vec<f64>, CliError> {
        let lo = self.lambda_min.unwrap_or(0.0);
        let hi = self.lambda_max.unwrap_or(2.0);
        let steps = self.steps.unwrap_or(400);
        if !(lo >= 0.0 && hi >= lo) {
            return usage("need 0 <= lambda-min <= lambda-max");
        }
        if steps == 0 || hi == lo {
            return Ok(vec![lo]);
        }
        Ok((0..=steps).map(|i| lo + (hi - lo) * i as f64 / steps as f64).collect())
    }
}

/// The 3D run exactly as resolved from file and flags; hashed for file names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TgvRun {
    pub model: ModelArg,
    pub solver: SolverConfig,
    pub spectrum_grid: usize,
}

impl TgvArgs {
    pub fn merged(self) -> Result<Self, CliError> {
        let f: Self = load(&self.config)?;
        let inviscid = self.inviscid || (f.inviscid && self.re.is_none());
        Ok(Self {
            config: self.config,
            e: self.e.or(f.e),
            n: self.n.or(f.n),
            lambda: self.lambda.or(f.lambda),
            re: if self.inviscid { None } else { self.re.or(f.re) },
            inviscid,
            model: self.model.or(f.model),
            svv_p: self.svv_p.or(f.svv_p),
            svv_mu: self.svv_mu.or(f.svv_mu),
            tend: self.tend.or(f.tend),
            snapshots: self.snapshots.or(f.snapshots),
            cfl: self.cfl.or(f.cfl),
            mach: self.mach.or(f.mach),
            diag_interval: self.diag_interval.or(f.diag_interval),
            spectrum_grid: self.spectrum_grid.or(f.spectrum_grid),
            out: self.out.or(f.out),
        })
    }

    pub fn resolve(&self, reduction: Reduction) -> Result<TgvRun, CliError> {
        let model = self.model.unwrap_or(ModelArg::None);
        let gas = GasModel { mach: self.mach.unwrap_or(0.1), re: self.re, ..GasModel::default() };
        let molecular = match self.re {
            Some(re) if re > 0.0 => ViscosityModel::Constant { mu: 1.0 / re },
            Some(re) => return usage(format!("Re must be positive, got {re}")),
            None => ViscosityModel::None,
        };
        let kernel = || match self.svv_p {
            Some(p) => Ok(KernelSpec::Power { p }),
            None => usage("SVV models need --svv-p"),
        };
        let (viscosity, svv) = match model {
            ModelArg::None => (molecular, None),
            ModelArg::Smagorinsky => {
                if self.re.is_some() {
                    return usage("the Smagorinsky model runs without molecular viscosity; drop --re");
                }
                (ViscosityModel::Smagorinsky, None)
            }
            ModelArg::SvvConst => {
                let Some(mu) = self.svv_mu else { return usage("svv-const needs --svv-mu") };
                (molecular, Some(SvvConfig { kernel: kernel()?, viscosity: SvvViscosity::Constant { mu } }))
            }
            ModelArg::SvvSmagorinsky => {
                if self.re.is_some() {
                    return usage("svv-smagorinsky runs without molecular viscosity; drop --re");
                }
                (ViscosityModel::None, Some(SvvConfig { kernel: kernel()?, viscosity: SvvViscosity::Smagorinsky }))
            }
        };
        let t_end = self.tend.unwrap_or(1.0);
        let mut snapshots = self.snapshots.clone().unwrap_or_default();
        if snapshots.is_empty() {
            snapshots.push(t_end);
        }
        let solver = SolverConfig {
            n: self.n.unwrap_or(3),
            e: self.e.unwrap_or(4),
            gas,
            lambda: self.lambda.unwrap_or(1.0),
            viscosity,
            svv,
            cfl: self.cfl.unwrap_or(0.4),
            t_end,
            snapshots,
            diag_interval: self.diag_interval.unwrap_or(0.05),
            entropy_fix: None,
            reduction,
        };
        solver.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let min = solver.e * (solver.n + 1);
        let spectrum_grid = self.spectrum_grid.unwrap_or(2 * min);
        if spectrum_grid < min {
            return usage(format!("--spectrum-grid must be at least E (N+1) = {min}"));
        }
        Ok(TgvRun { model, solver, spectrum_grid })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub started: f64,
    pub finished: f64,
    pub status: String,
    pub outputs: Vec<String>,
}

/// SHA-256 of the canonical JSON rendering (struct field order is fixed).
pub fn config_hash<T: Serialize>(cfg: &T) -> Result<String, CliError> {
    let canonical = serde_json::to_string(cfg)?;
    let digest = Sha256::digest(canonical.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Full-precision float for CSV cells (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: Option<PathBuf>) -> Result<Self, CliError> {
        let dir = dir.unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, files: Vec::new() })
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(self.dir.join(name))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        fs::write(self.dir.join(name), body)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn manifest<T: Serialize>(
        &mut self,
        name: &str,
        command: &str,
        cfg: &T,
        hash: &str,
        started: f64,
        status: &str,
    ) -> Result<(), CliError> {
        let mut outputs = self.files.clone();
        outputs.push(name.to_string());
        let m = RunManifest {
            tool: "dglab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: serde_json::to_value(cfg)?,
            config_hash: hash.into(),
            started,
            finished: now(),
            status: status.into(),
            outputs,
        };
        fs::write(self.dir.join(name), serde_json::to_string_pretty(&m)? + "\n")?;
        self.files.push(name.to_string());
        Ok(())
    }
}

pub fn cmd_vn_sweep(args: VnSweepArgs) -> Result<PathBuf, CliError> {
    let started = now();
    let args = args.merged()?;
    let cfg = args.vn_config()?;
    let kpoints = args.kpoints.unwrap_or(256);
    if kpoints == 0 {
        return usage("--kpoints must be positive");
    }
    let sweep = dispersion_dissipation_sweep(&cfg, &default_k_grid(cfg.n, kpoints))?;
    let hash = config_hash(&(&cfg, kpoints))?;
    let mut out = Outputs::new(args.out.clone())?;
    let b = |x: bool| if x { "1".to_string() } else { "0".to_string() };
    out.csv(
        "dispersion.csv",
        &[
            "k_hat", "mode_index", "re_omega_hat", "im_omega_hat", "is_primary", "amp_abs", "secondary_error",
            "jump_abs", "kh", "re_omega", "im_omega",
        ],
        sweep.rows.iter().map(|r| {
            vec![
                fmt_f64(r.k_hat),
                r.mode_index.to_string(),
                fmt_f64(r.re_omega_hat),
                fmt_f64(r.im_omega_hat),
                b(r.is_primary),
                fmt_f64(r.amp_abs),
                fmt_f64(r.secondary_error),
                fmt_f64(r.jump_abs),
                fmt_f64(r.kh),
                fmt_f64(r.re_omega),
                fmt_f64(r.im_omega),
            ]
        }),
    )?;
    out.csv(
        "secondary_error.csv",
        &["k_hat", "secondary_error"],
        sweep.primary_rows().map(|r| vec![fmt_f64(r.k_hat), fmt_f64(r.secondary_error)]),
    )?;
    out.csv("jump.csv", &["k_hat", "jump_abs"], sweep.primary_rows().map(|r| vec![fmt_f64(r.k_hat), fmt_f64(r.jump_abs)]))?;
    if !sweep.ambiguous_kh.is_empty() {
        eprintln!("warning: ambiguous primary continuation at {} k points", sweep.ambiguous_kh.len());
    }
    let status = if sweep.failures.is_empty() { "completed" } else { "eigensolver-failure" };
    out.manifest("manifest.json", "vn-sweep", &(&cfg, kpoints), &hash, started, status)?;
    if let Some(first) = sweep.failures.first() {
        return Err(CliError::Eigen {
            kh: sweep.failures.iter().map(|f| f.kh).collect(),
            msg: first.error.to_string(),
        });
    }
    Ok(out.dir)
}

/// Plain-text event summary printed after a scan.
pub fn scan_summary(scan: &LambdaScan, extra: &LambdaScan, n: usize) -> String {
    let half = (n as f64 + 1.0) / 2.0;
    let mut s = String::from("# mode-set events\n");
    if scan.events.is_empty() {
        s.push_str("none\n");
    }
    for e in &scan.events {
        s.push_str(&format!(
            "{:?} at lambda = {:.4} (bracket {:.4}..{:.4}): {} -> {} groups\n",
            e.kind, e.lambda, e.lambda_lo, e.lambda_hi, e.groups_before, e.groups_after
        ));
    }
    s.push_str("# largest bounded group maximum, |Im omega_hat| and |Im omega h/2|\n");
    let listed = if extra.points.is_empty() { &scan.points } else { &extra.points };
    for p in listed {
        let v = p.largest_bounded().unwrap_or(0.0);
        s.push_str(&format!("lambda = {}: {:.6} {:.6}\n", p.lambda, v, v * half));
    }
    s
}

pub fn cmd_vn_lambda_scan(args: LambdaScanArgs) -> Result<PathBuf, CliError> {
    let started = now();
    let args = args.merged()?;
    let n = args.n.unwrap_or(7);
    let cfg = VnConfig { n, family: args.family.unwrap_or(NodeFamily::GaussLobatto), ..VnConfig::default() };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let grid = args.lambda_grid()?;
    let kpoints = args.kpoints.unwrap_or(1024);
    if kpoints < 2 {
        return usage("--kpoints must be at least 2");
    }
    let kgrid = period_grid(args.kh0.unwrap_or(0.1234), kpoints);
    let scan = max_dissipation_vs_lambda(&cfg, &grid, &kgrid)?;
    let mut extra_l = args.lambda_points.clone().unwrap_or_default();
    extra_l.sort_by(f64::total_cmp);
    extra_l.dedup();
    let extra = if extra_l.is_empty() {
        LambdaScan { points: vec![], events: vec![] }
    } else {
        max_dissipation_vs_lambda(&cfg, &extra_l, &kgrid)?
    };
    let hash = config_hash(&(&cfg, &grid, &extra_l, &kgrid))?;
    let half = (n as f64 + 1.0) / 2.0;
    let mut out = Outputs::new(args.out.clone())?;
    let rows = scan.points.iter().chain(&extra.points).flat_map(|p| {
        p.groups.iter().enumerate().map(move |(gi, g)| {
            vec![
                fmt_f64(p.lambda),
                gi.to_string(),
                g.modes.to_string(),
                g.cycles.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("+"),
                fmt_f64(g.max_dissipation),
                fmt_f64(g.max_dissipation * half),
                (g.contains_primary as u8).to_string(),
                (g.bounded as u8).to_string(),
                (p.ambiguous as u8).to_string(),
            ]
        })
    });
    out.csv(
        "lambda_scan.csv",
        &[
            "lambda", "group", "modes", "cycles", "max_im_omega_hat", "max_im_omega_h_half", "contains_primary",
            "bounded", "ambiguous",
        ],
        rows,
    )?;
    out.csv(
        "events.csv",
        &["kind", "lambda", "lambda_lo", "lambda_hi", "groups_before", "groups_after"],
        scan.events.iter().map(|e| {
            vec![
                format!("{:?}", e.kind).to_lowercase(),
                fmt_f64(e.lambda),
                fmt_f64(e.lambda_lo),
                fmt_f64(e.lambda_hi),
                e.groups_before.to_string(),
                e.groups_after.to_string(),
            ]
        }),
    )?;
    let summary = scan_summary(&scan, &extra, n);
    print!("{summary}");
    out.text("summary.txt", &summary)?;
    let amb = scan.points.iter().chain(&extra.points).filter(|p| p.ambiguous).count();
    if amb > 0 {
        eprintln!("warning: grouping ambiguous at {amb} lambda points");
    }
    out.manifest("manifest.json", "vn-lambda-scan", &(&cfg, &grid, &extra_l, &kgrid), &hash, started, "completed")?;
    Ok(out.dir)
}

fn time_tag(t: f64) -> String {
    format!("t{t:09.4}")
}

/// Flat little-endian f64 dump behind a text header closed by `end_header`.
pub fn write_snapshot(path: &Path, u: &ConservedField, time: f64) -> Result<(), CliError> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    write!(
        f,
        "dglab-field 1\nE {}\nN {}\nnodes gauss-lobatto\nvariables rho rho_v1 rho_v2 rho_v3 rho_e\n\
         layout element(x fastest) node(i fastest) variable\ntime {}\ncount {}\nend_header\n",
        u.mesh.e,
        u.n,
        fmt_f64(time),
        u.data.len()
    )?;
    for x in &u.data {
        f.write_all(&x.to_le_bytes())?;
    }
    f.flush()?;
    Ok(())
}

/// Inverse of `write_snapshot`: (E, N, time, data).
pub fn read_snapshot(path: &Path) -> Result<(usize, usize, f64, Vec<f64>), CliError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let marker = b"end_header\n";
    let end = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| CliError::Usage("snapshot header not terminated".into()))?
        + marker.len();
    let header = String::from_utf8_lossy(&bytes[..end]).to_string();
    let field = |key: &str| -> Result<&str, CliError> {
        header
            .lines()
            .find_map(|l| l.strip_prefix(key).map(str::trim))
            .ok_or_else(|| CliError::Usage(format!("snapshot header lacks '{key}'")))
    };
    let bad = |k: &str| CliError::Usage(format!("bad '{k}' in snapshot header"));
    let e = field("E ")?.parse().map_err(|_| bad("E"))?;
    let n = field("N ")?.parse().map_err(|_| bad("N"))?;
    let t = field("time ")?.parse().map_err(|_| bad("time"))?;
    let data: Vec<f64> = bytes[end..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((e, n, t, data))
}

pub fn cmd_tgv(args: TgvArgs, reduction: Reduction) -> Result<PathBuf, CliError> {
    let started = now();
    let args = args.merged()?;
    let run = args.resolve(reduction)?;
    let hash = config_hash(&run)?;
    let tag = &hash[..12];
    let solver = Solver::new(&run.solver)?;
    let gas = run.solver.gas;
    let u0 = solver.new_field(|x| tgv_initial_condition(x, &gas).0);
    let output = solver.march(u0, |_, _| {});
    let mut out = Outputs::new(args.out.clone())?;
    out.csv(
        &format!("diagnostics_{tag}.csv"),
        &["t", "K", "eps", "zeta", "mu_num"],
        output.series.rows().into_iter().map(|r| vec![fmt_f64(r.t), fmt_f64(r.k), opt(r.eps), fmt_f64(r.zeta), opt(r.mu_num)]),
    )?;
    for snap in &output.snapshots {
        let sp = energy_spectrum(&solver, &snap.field, run.spectrum_grid, snap.time)?;
        out.csv(
            &format!("spectrum_{tag}_{}.csv", time_tag(snap.time)),
            &["k", "E_k"],
            sp.energy.iter().enumerate().skip(1).map(|(k, e)| vec![k.to_string(), fmt_f64(*e)]),
        )?;
        let name = format!("field_{tag}_{}.bin", time_tag(snap.time));
        write_snapshot(&out.dir.join(&name), &snap.field, snap.time)?;
        out.files.push(name);
    }
    let status = match &output.status {
        RunStatus::Completed => "completed".to_string(),
        RunStatus::Aborted { time, .. } => format!("aborted at t = {time}"),
    };
    out.manifest(&format!("manifest_{tag}.json"), "tgv", &run, &hash, started, &status)?;
    eprintln!("{} steps, outputs in {}", output.steps, out.dir.display());
    if let RunStatus::Aborted { time, error } = output.status {
        return Err(CliError::Positivity { time, error });
    }
    Ok(out.dir)
}

fn configure_threads(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(t) = threads {
        if t == 0 {
            return usage("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    Ok(())
}

/// Parse, dispatch, report; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = configure_threads(cli.threads).and_then(|_| {
        let reduction = if cli.deterministic { Reduction::Deterministic } else { Reduction::Unordered };
        match cli.command {
            Command::VnSweep(a) => cmd_vn_sweep(a),
            Command::VnLambdaScan(a) => cmd_vn_lambda_scan(a),
            Command::Tgv(a) => cmd_tgv(a, reduction),
        }
    });
    match result {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
