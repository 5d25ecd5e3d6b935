//! Batch front end: configuration, the ground-state / envelope / surface
//! pipeline, and diagnostics export.
//!
//! Exit codes: 0 success, 1 solver or invariant failure, 2 config or input
//! error, 3 refusal to overwrite existing output.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::error::{DwsError, Result};
use crate::fdnls::{self, Branch};
use crate::field::SpectralField;
use crate::grid::Grid2D;
use crate::io;
use crate::nls;
use crate::params::WaveParams;
use crate::reduction::{self, ReductionConfig, ReductionPlan};
use crate::symbols;

pub const EXIT_OK: i32 = 0;
pub const EXIT_SOLVER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_OVERWRITE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "dws", version, about = "Deep-water gravity-capillary solitary wave pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Line-oriented `key = value` configuration file with `[sections]`.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Comma-separated epsilon sweep list.
    #[arg(long, global = true, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    /// Branch selection: `+`, `-`, or `both`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub branch: Option<String>,
    /// Envelope grid: NX NZ LX LZ (half box lengths).
    #[arg(long, global = true, num_args = 4)]
    pub grid: Option<Vec<String>>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    pub force: bool,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Closed-form third-order tails instead of the exact half-space solves.
    #[arg(long = "cheap-dn", global = true)]
    pub cheap_dn: bool,
    /// Couple the envelope solve to the exact reduction remainder.
    #[arg(long, global = true)]
    pub remainder: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compute the cubic-NLS ground state envelope.
    GroundState,
    /// Solve the full-dispersion envelope equation over the epsilon sweep.
    Solve,
    /// Reconstruct surface profiles from envelope solutions.
    Reconstruct,
    /// Run the invariant suite on reconstructed surfaces.
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum BranchSel {
    Plus,
    Minus,
    Both,
}

impl BranchSel {
    fn branches(self) -> Vec<Branch> {
        match self {
            BranchSel::Plus => vec![Branch::Plus],
            BranchSel::Minus => vec![Branch::Minus],
            BranchSel::Both => vec![Branch::Plus, Branch::Minus],
        }
    }
}

/// Fully resolved run parameters: defaults, then config file, then flags.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RunConfig {
    pub grid_nx: usize,
    pub grid_nz: usize,
    pub grid_lx: f64,
    pub grid_lz: f64,
    /// Transverse point count of the derived surface grid.
    pub surface_nz: usize,
    pub eps: Vec<f64>,
    pub branch: BranchSel,
    pub delta: f64,
    pub theta: f64,
    pub ground_tol: f64,
    pub fdnls_tol: f64,
    pub eta3_tol: f64,
    pub out: PathBuf,
    pub force: bool,
    pub threads: usize,
    pub cheap_dn: bool,
    pub remainder: bool,
    /// Symbol names dumped by `validate` (`g`, `f`, `K0`, `L0`, `M0`, `limit`).
    pub symbols: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grid_nx: 64,
            grid_nz: 64,
            grid_lx: 10.0,
            grid_lz: 10.0,
            surface_nz: 128,
            eps: vec![0.1, 0.05, 0.025],
            branch: BranchSel::Both,
            delta: 0.15,
            theta: 5.0 / 6.0,
            ground_tol: 1e-10,
            fdnls_tol: 1e-10,
            eta3_tol: 1e-8,
            out: PathBuf::from("out"),
            force: false,
            threads: 1,
            cheap_dn: false,
            remainder: false,
            symbols: Vec::new(),
        }
    }
}

/// Parse a line-oriented `key = value` file with `[section]` headers and
/// `#` comments into `section.key` pairs.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    let mut section = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = name.trim().to_string();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(DwsError::Config(format!(
                "line {}: expected `key = value` or `[section]`, got {raw:?}",
                lineno + 1
            )));
        };
        let full = if section.is_empty() {
            key.trim().to_string()
        } else {
            format!("{section}.{}", key.trim())
        };
        map.insert(full, value.trim().to_string());
    }
    Ok(map)
}

fn parse_as<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| DwsError::Config(format!("bad value for {key}: {v:?}")))
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &cli.config {
            let text = std::fs::read_to_string(path)?;
            cfg.apply_pairs(&parse_config_text(&text)?)?;
        }
        if let Some(eps) = &cli.eps {
            cfg.eps = eps.clone();
        }
        if let Some(b) = &cli.branch {
            cfg.branch = match b.as_str() {
                "+" => BranchSel::Plus,
                "-" => BranchSel::Minus,
                "both" => BranchSel::Both,
                _ => {
                    return Err(DwsError::Config(format!(
                        "branch must be `+`, `-`, or `both` (got {b:?})"
                    )))
                }
            };
        }
        if let Some(g) = &cli.grid {
            cfg.grid_nx = parse_as("grid nx", &g[0])?;
            cfg.grid_nz = parse_as("grid nz", &g[1])?;
            cfg.grid_lx = parse_as("grid lx", &g[2])?;
            cfg.grid_lz = parse_as("grid lz", &g[3])?;
        }
        if let Some(out) = &cli.out {
            cfg.out = out.clone();
        }
        if let Some(t) = cli.threads {
            cfg.threads = t;
        }
        cfg.force |= cli.force;
        cfg.cheap_dn |= cli.cheap_dn;
        cfg.remainder |= cli.remainder;
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_pairs(&mut self, pairs: &BTreeMap<String, String>) -> Result<()> {
        for (k, v) in pairs {
            match k.as_str() {
                "grid.nx" => self.grid_nx = parse_as(k, v)?,
                "grid.nz" => self.grid_nz = parse_as(k, v)?,
                "grid.lx" => self.grid_lx = parse_as(k, v)?,
                "grid.lz" => self.grid_lz = parse_as(k, v)?,
                "grid.surface_nz" => self.surface_nz = parse_as(k, v)?,
                "params.eps" => {
                    self.eps = v
                        .split(',')
                        .map(|s| parse_as(k, s.trim()))
                        .collect::<Result<_>>()?
                }
                "params.delta" => self.delta = parse_as(k, v)?,
                "params.theta" => self.theta = parse_as(k, v)?,
                "params.branch" => {
                    self.branch = match v.as_str() {
                        "+" => BranchSel::Plus,
                        "-" => BranchSel::Minus,
                        "both" => BranchSel::Both,
                        _ => return Err(DwsError::Config(format!("bad branch {v:?}"))),
                    }
                }
                "solver.ground_tol" => self.ground_tol = parse_as(k, v)?,
                "solver.fdnls_tol" => self.fdnls_tol = parse_as(k, v)?,
                "solver.eta3_tol" => self.eta3_tol = parse_as(k, v)?,
                "solver.cheap_dn" => self.cheap_dn = parse_as(k, v)?,
                "solver.remainder" => self.remainder = parse_as(k, v)?,
                "output.dir" => self.out = PathBuf::from(v),
                "output.force" => self.force = parse_as(k, v)?,
                "output.threads" => self.threads = parse_as(k, v)?,
                "validate.symbols" => {
                    self.symbols = v.split(',').map(|s| s.trim().to_string()).collect()
                }
                _ => return Err(DwsError::Config(format!("unknown config key {k}"))),
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps.is_empty() {
            return Err(DwsError::Config("empty epsilon list".into()));
        }
        for &e in &self.eps {
            WaveParams { delta: self.delta, theta: self.theta, ..WaveParams::new(e)? }.validate()?;
        }
        if !(self.ground_tol > 0.0 && self.fdnls_tol > 0.0 && self.eta3_tol > 0.0) {
            return Err(DwsError::Config("tolerances must be positive".into()));
        }
        if self.threads == 0 {
            return Err(DwsError::Config("threads must be at least 1".into()));
        }
        Grid2D::new(self.grid_nx, self.grid_nz, self.grid_lx, self.grid_lz)
            .map_err(|e| DwsError::Config(format!("envelope grid: {e}")))?;
        Ok(())
    }

    pub fn params(&self, eps: f64) -> WaveParams {
        WaveParams {
            delta: self.delta,
            theta: self.theta,
            ..WaveParams::new(eps).expect("validated")
        }
    }

    pub fn reduction_config(&self) -> ReductionConfig {
        ReductionConfig {
            cheap_dn: self.cheap_dn,
            picard_tol: self.eta3_tol,
            ..ReductionConfig::default()
        }
    }

    /// FNV-1a over the canonical serialized form; stable across runs.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("serializable config");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
        format!("{h:016x}")
    }

    fn sidecar(&self, payload: serde_json::Value) -> serde_json::Value {
        json!({
            "version": env!("CARGO_PKG_VERSION"),
            "config_hash": self.hash(),
            "config": self,
            "result": payload,
        })
    }
}

fn eps_tag(eps: f64) -> String {
    format!("{eps:.6}").replace('.', "p")
}

fn branch_tag(b: Branch) -> &'static str {
    match b {
        Branch::Plus => "plus",
        Branch::Minus => "minus",
    }
}

/// Refuse to overwrite unless `--force`; distinguished exit code 3.
fn guard(paths: &[PathBuf], force: bool) -> std::result::Result<(), i32> {
    if !force {
        for p in paths {
            if p.exists() {
                eprintln!("refusing to overwrite {} (use --force)", p.display());
                return Err(EXIT_OVERWRITE);
            }
        }
    }
    Ok(())
}

fn exit_code(e: &DwsError) -> i32 {
    match e {
        DwsError::Divergence(_) | DwsError::InsufficientDepth { .. } => EXIT_SOLVER,
        _ => EXIT_CONFIG,
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let cfg = match RunConfig::from_cli(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Err(e) = std::fs::create_dir_all(&cfg.out) {
        eprintln!("cannot create output directory: {e}");
        return EXIT_CONFIG;
    }
    let res = match cli.command {
        Command::GroundState => cmd_ground_state(&cfg),
        Command::Solve => cmd_solve(&cfg),
        Command::Reconstruct => cmd_reconstruct(&cfg),
        Command::Validate => cmd_validate(&cfg),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn envelope_grid(cfg: &RunConfig) -> Arc<Grid2D> {
    Grid2D::new(cfg.grid_nx, cfg.grid_nz, cfg.grid_lx, cfg.grid_lz).expect("validated grid")
}

fn ground_state_path(cfg: &RunConfig) -> PathBuf {
    cfg.out.join("zeta0.dwsf")
}

/// Load the ground state written by `ground-state`, or compute it inline on
/// the given grid.
fn obtain_ground_state(cfg: &RunConfig, grid: &Arc<Grid2D>) -> Result<nls::GroundState> {
    let path = ground_state_path(cfg);
    if path.exists() {
        let zeta = io::read_field(&path)?;
        if zeta.grid().as_ref() == grid.as_ref() {
            let residual_h1 = nls::residual(&zeta).h1_norm();
            return Ok(nls::GroundState {
                zeta,
                petviashvili_iters: 0,
                newton_iters: 0,
                residual_h1,
                last_newton_stats: None,
            });
        }
    }
    nls::ground_state(grid, cfg.ground_tol)
}

pub fn cmd_ground_state(cfg: &RunConfig) -> Result<i32> {
    let field_path = ground_state_path(cfg);
    let json_path = cfg.out.join("zeta0.json");
    if let Err(code) = guard(&[field_path.clone(), json_path.clone()], cfg.force) {
        return Ok(code);
    }
    let grid = envelope_grid(cfg);
    let gs = nls::ground_state(&grid, cfg.ground_tol)?;
    io::write_field(&field_path, &gs.zeta)?;
    io::write_json(
        &json_path,
        &cfg.sidecar(json!({
            "residual_h1": gs.residual_h1,
            "peak": gs.zeta.max_abs(),
            "h1_norm": gs.zeta.h1_norm(),
            "petviashvili_iters": gs.petviashvili_iters,
            "newton_iters": gs.newton_iters,
        })),
    )?;
    println!(
        "ground state: residual {:.3e}, peak {:.6}",
        gs.residual_h1,
        gs.zeta.max_abs()
    );
    Ok(EXIT_OK)
}

/// The derived surface lattice for one epsilon: nearest commensurate box,
/// surface resolution of at least 16 points per carrier wavelength.
pub fn surface_plan(cfg: &RunConfig, eps: f64) -> Result<ReductionPlan> {
    let m = (cfg.grid_lx / (eps * std::f64::consts::PI)).round().max(1.0) as usize;
    let nx = (16 * m).next_power_of_two();
    reduction::plan(
        eps,
        (cfg.grid_lx, cfg.grid_lz),
        (cfg.grid_nx, cfg.grid_nz),
        (nx, cfg.surface_nz),
    )
}

struct BranchRun {
    eps: f64,
    branch: Branch,
    outcome: Result<(fdnls::FdnlsSolution, crate::report::SolverReport)>,
}

/// Solve the envelope equation at one sweep point. With remainder coupling
/// the iterate is round-tripped through the surface reduction each Newton
/// pass, which requires the commensurate surface grid; the ground state is
/// recomputed on the adjusted envelope box in that case.
fn solve_point(cfg: &RunConfig, eps: f64, branch: Branch) -> Result<(fdnls::FdnlsSolution, crate::report::SolverReport)> {
    let params = cfg.params(eps);
    let band = params.band();
    if cfg.remainder {
        let plan = surface_plan(cfg, eps)?;
        let env = Grid2D::new(cfg.grid_nx, cfg.grid_nz, plan.envelope.lx(), cfg.grid_lz)?;
        let gs = nls::ground_state(&env, cfg.ground_tol)?;
        let rcfg = cfg.reduction_config();
        let surface = plan.surface.clone();
        let coupling = move |zeta: &SpectralField| {
            reduction::envelope_remainder(zeta, &params, &surface, &rcfg)
        };
        fdnls::solve_fdnls_with(eps, branch, &gs, cfg.fdnls_tol, &band, Some(&coupling))
    } else {
        let grid = envelope_grid(cfg);
        let gs = obtain_ground_state(cfg, &grid)?;
        fdnls::solve_fdnls(eps, branch, &gs, cfg.fdnls_tol, &band)
    }
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<i32> {
    let mut jobs = Vec::new();
    for &eps in &cfg.eps {
        for branch in cfg.branch.branches() {
            jobs.push((eps, branch));
        }
    }
    let mut paths = vec![cfg.out.join("sweep.csv")];
    for &(eps, branch) in &jobs {
        let stem = format!("fdnls_eps{}_{}", eps_tag(eps), branch_tag(branch));
        paths.push(cfg.out.join(format!("{stem}.dwsf")));
        paths.push(cfg.out.join(format!("{stem}.json")));
    }
    if let Err(code) = guard(&paths, cfg.force) {
        return Ok(code);
    }

    // Fixed-size worker pool over the sweep points; results keyed by job
    // index so the output order (and the files) are deterministic.
    let queue = Mutex::new(jobs.iter().cloned().enumerate().collect::<Vec<_>>());
    let results: Mutex<Vec<(usize, BranchRun)>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..cfg.threads.min(jobs.len()) {
            scope.spawn(|| loop {
                let job = queue.lock().unwrap().pop();
                let Some((idx, (eps, branch))) = job else { break };
                let outcome = solve_point(cfg, eps, branch);
                results
                    .lock()
                    .unwrap()
                    .push((idx, BranchRun { eps, branch, outcome }));
            });
        }
    });
    let mut runs = results.into_inner().unwrap();
    runs.sort_by_key(|(idx, _)| *idx);

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (_, run) in &runs {
        let stem = format!("fdnls_eps{}_{}", eps_tag(run.eps), branch_tag(run.branch));
        match &run.outcome {
            Ok((sol, report)) => {
                io::write_field(&cfg.out.join(format!("{stem}.dwsf")), &sol.zeta)?;
                io::write_json(
                    &cfg.out.join(format!("{stem}.json")),
                    &cfg.sidecar(json!({
                        "epsilon": sol.epsilon,
                        "branch": run.branch.label(),
                        "residual_h1": sol.residual_h1,
                        "h1_distance": sol.h1_distance_to_ground_state,
                        "sup_distance": sol.sup_distance_to_ground_state,
                        "report": report,
                    })),
                )?;
                rows.push(vec![
                    format!("{}", run.eps),
                    run.branch.label().to_string(),
                    format!("{:.6e}", sol.residual_h1),
                    format!("{:.6e}", sol.h1_distance_to_ground_state),
                    format!("{:.6e}", sol.sup_distance_to_ground_state),
                ]);
                println!(
                    "eps {} branch {}: residual {:.3e}, H1 distance {:.3e}",
                    run.eps,
                    run.branch.label(),
                    sol.residual_h1,
                    sol.h1_distance_to_ground_state
                );
            }
            Err(e) => {
                eprintln!("eps {} branch {}: {e}", run.eps, run.branch.label());
                failures.push(format!("eps {} branch {}", run.eps, run.branch.label()));
            }
        }
    }
    io::write_csv(
        &cfg.out.join("sweep.csv"),
        &["eps", "branch", "residual_h1", "h1_distance", "sup_distance"],
        &rows,
    )?;
    if failures.is_empty() {
        Ok(EXIT_OK)
    } else {
        eprintln!("failed sweep points: {}", failures.join(", "));
        Ok(EXIT_SOLVER)
    }
}

/// Reconstruct one surface; returns the file stem written.
fn reconstruct_point(cfg: &RunConfig, eps: f64, branch: Branch) -> Result<String> {
    let params = cfg.params(eps);
    let plan = surface_plan(cfg, eps)?;
    let env = Grid2D::new(cfg.grid_nx, cfg.grid_nz, plan.envelope.lx(), cfg.grid_lz)?;
    let gs = nls::ground_state(&env, cfg.ground_tol)?;
    let (sol, _) = fdnls::solve_fdnls(eps, branch, &gs, cfg.fdnls_tol, &params.band())?;
    let dec = reduction::reconstruct_surface(&sol.zeta, &params, &plan.surface, &cfg.reduction_config())?;

    let stem = format!("surface_eps{}_{}", eps_tag(eps), branch_tag(branch));
    let eta = dec.eta();
    io::write_field(&cfg.out.join(format!("{stem}.dwsf")), &eta)?;
    io::write_field(&cfg.out.join(format!("{stem}_eta1.dwsf")), &dec.eta1)?;
    io::write_field(&cfg.out.join(format!("{stem}_eta3.dwsf")), &dec.eta3)?;
    io::write_json(
        &cfg.out.join(format!("{stem}.json")),
        &cfg.sidecar(json!({
            "epsilon": eps,
            "branch": branch.label(),
            "norms": dec.norms,
            "report": dec.report,
            "surface_grid": [plan.surface.nx(), plan.surface.nz(), plan.surface.lx(), plan.surface.lz()],
        })),
    )?;

    // Elevation profile along z = 0 for external plotting.
    let g = &plan.surface;
    let iz0 = g.nz() / 2;
    let rows: Vec<Vec<String>> = (0..g.nx())
        .map(|ix| {
            vec![
                format!("{:.9e}", g.x_at(ix)),
                format!("{:.9e}", eta.values()[g.index(ix, iz0)].re),
            ]
        })
        .collect();
    io::write_csv(&cfg.out.join(format!("{stem}_profile.csv")), &["x", "eta"], &rows)?;
    println!(
        "eps {eps} branch {}: sup |eta| {:.4e}, |eta3|_3 {:.4e}",
        branch.label(),
        dec.norms.sup_eta,
        dec.norms.h3_eta3
    );
    Ok(stem)
}

pub fn cmd_reconstruct(cfg: &RunConfig) -> Result<i32> {
    let mut paths = Vec::new();
    for &eps in &cfg.eps {
        for branch in cfg.branch.branches() {
            let stem = format!("surface_eps{}_{}", eps_tag(eps), branch_tag(branch));
            for suffix in [".dwsf", "_eta1.dwsf", "_eta3.dwsf", ".json", "_profile.csv"] {
                paths.push(cfg.out.join(format!("{stem}{suffix}")));
            }
        }
    }
    if let Err(code) = guard(&paths, cfg.force) {
        return Ok(code);
    }
    let mut failures = Vec::new();
    for &eps in &cfg.eps {
        for branch in cfg.branch.branches() {
            if let Err(e) = reconstruct_point(cfg, eps, branch) {
                eprintln!("eps {eps} branch {}: {e}", branch.label());
                failures.push(format!("eps {eps} branch {}", branch.label()));
            }
        }
    }
    if failures.is_empty() {
        Ok(EXIT_OK)
    } else {
        eprintln!("failed reconstructions: {}", failures.join(", "));
        Ok(EXIT_SOLVER)
    }
}

fn symbol_by_name(name: &str) -> Result<fn(f64, f64) -> f64> {
    Ok(match name {
        "g" => symbols::g_symbol,
        "f" => symbols::f_symbol,
        "K0" => |k1, k3| f64::hypot(k1, k3),
        "L0" => |k1, k3| {
            let k = f64::hypot(k1, k3);
            if k == 0.0 {
                0.0
            } else {
                k1 * k1 / k
            }
        },
        "M0" => |k1, k3| {
            let k = f64::hypot(k1, k3);
            if k == 0.0 {
                0.0
            } else {
                k1 * k3 / k
            }
        },
        "limit" => symbols::limit_symbol,
        _ => {
            return Err(DwsError::Config(format!(
                "unknown symbol {name:?} (expected g, f, K0, L0, M0, limit)"
            )))
        }
    })
}

struct Check {
    name: &'static str,
    value: f64,
    limit: f64,
}

impl Check {
    fn passed(&self) -> bool {
        self.value.is_finite() && self.value <= self.limit
    }
}

/// Invariant suite over the stored reconstruction artifacts: band
/// bookkeeping, cascade coefficients, residual split.
fn validate_point(cfg: &RunConfig, eps: f64, branch: Branch) -> Result<(Vec<Check>, serde_json::Value)> {
    let params = cfg.params(eps);
    let band = params.band();
    let stem = format!("surface_eps{}_{}", eps_tag(eps), branch_tag(branch));
    let eta1 = io::read_field(&cfg.out.join(format!("{stem}_eta1.dwsf")))?;
    let eta3 = io::read_field(&cfg.out.join(format!("{stem}_eta3.dwsf")))?;
    let eta = io::read_field(&cfg.out.join(format!("{stem}.dwsf")))?;

    let rel = |num: f64, den: f64| if den == 0.0 { num } else { num / den };
    let mut checks = Vec::new();

    let banded = band.project_band(&eta1);
    checks.push(Check {
        name: "eta1_band_limited",
        value: rel(eta1.sub(&banded).l2_norm(), eta1.l2_norm()),
        limit: 1e-12,
    });
    checks.push(Check {
        name: "eta3_offband",
        value: rel(band.project_band(&eta3).l2_norm(), eta3.l2_norm()),
        limit: 1e-12,
    });
    let eta2 = eta.sub(&eta1);
    checks.push(Check {
        name: "eta2_offband",
        value: rel(band.project_band(&eta2).l2_norm(), eta2.l2_norm()),
        limit: 1e-12,
    });
    let l2 = crate::dno::operators::lprime2(&eta1);
    checks.push(Check {
        name: "lprime2_misses_band",
        value: rel(band.project_band(&l2).l2_norm(), l2.l2_norm()),
        limit: 1e-12,
    });
    let k1e = crate::dno::operators::k1_closed(&eta1, &eta1).dealias();
    let sq = k1e.mul(&k1e).dealias();
    checks.push(Check {
        name: "squared_trace_term_misses_band",
        value: rel(band.project_plus(&sq).l2_norm(), sq.l2_norm()),
        limit: 1e-12,
    });

    let rcfg = cfg.reduction_config();
    let cascade = reduction::cascade_coefficients(&eta1, &eta3, &params, &rcfg)?;
    let targets = [
        ("cascade_slave_quadratic", cascade.slave_quadratic, 4.0),
        ("cascade_kprime3", cascade.kprime3, -1.5),
        ("cascade_lprime3", cascade.lprime3, -2.0),
        ("cascade_tails", cascade.tails, 2.5),
        ("cascade_total", cascade.total, -5.5),
    ];
    for (name, got, want) in targets {
        checks.push(Check {
            name,
            value: (got - want).abs() / want.abs(),
            // Finite-eps corrections are O(eps^theta); generous ceiling.
            limit: 0.2,
        });
    }

    // The exact residual needs the half-space solves; skip it in cheap mode.
    let residual = if cfg.cheap_dn {
        json!(null)
    } else {
        let dno = reduction::auto_dno_config(eta.grid());
        let split = reduction::full_residual(&eta, &params, &dno)?;
        json!({
            "h1": split.h1,
            "band_h1": split.band_h1,
            "offband_h1": split.offband_h1,
        })
    };
    let payload = json!({
        "cascade": cascade,
        "residual": residual,
    });
    Ok((checks, payload))
}

pub fn cmd_validate(cfg: &RunConfig) -> Result<i32> {
    if !cfg.symbols.is_empty() {
        let grid = envelope_grid(cfg);
        let mut header = vec!["k1".to_string()];
        header.extend(cfg.symbols.iter().cloned());
        let fns = cfg
            .symbols
            .iter()
            .map(|s| symbol_by_name(s))
            .collect::<Result<Vec<_>>>()?;
        let mut rows = Vec::new();
        for ix in 0..grid.nx() / 2 {
            let k1 = grid.k1_at(ix);
            let mut row = vec![format!("{k1:.9e}")];
            row.extend(fns.iter().map(|f| format!("{:.9e}", f(k1, 0.0))));
            rows.push(row);
        }
        let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        io::write_csv(&cfg.out.join("symbols.csv"), &header_refs, &rows)?;
    }

    let mut all = Vec::new();
    let mut failed = Vec::new();
    for &eps in &cfg.eps {
        for branch in cfg.branch.branches() {
            let (checks, payload) = validate_point(cfg, eps, branch)?;
            for c in &checks {
                let status = if c.passed() { "pass" } else { "FAIL" };
                println!(
                    "eps {eps} {}: {} {status} ({:.3e} vs {:.1e})",
                    branch.label(),
                    c.name,
                    c.value,
                    c.limit
                );
                if !c.passed() {
                    failed.push(format!("{} (eps {eps} {})", c.name, branch.label()));
                }
            }
            all.push(json!({
                "epsilon": eps,
                "branch": branch.label(),
                "checks": checks.iter().map(|c| json!({
                    "name": c.name,
                    "value": c.value,
                    "limit": c.limit,
                    "passed": c.passed(),
                })).collect::<Vec<_>>(),
                "diagnostics": payload,
            }));
        }
    }
    io::write_json(&cfg.out.join("validate.json"), &cfg.sidecar(json!(all)))?;
    if failed.is_empty() {
        Ok(EXIT_OK)
    } else {
        eprintln!("failed invariants: {}", failed.join(", "));
        Ok(EXIT_SOLVER)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_round_trip_with_flag_overrides() {
        let text = "
# comment
[grid]
nx = 32
nz = 16
lx = 8.0
lz = 6.0
[params]
eps = 0.05, 0.025
branch = -
[solver]
cheap_dn = true
[output]
dir = /tmp/run
";
        let pairs = parse_config_text(text).unwrap();
        let mut cfg = RunConfig::default();
        cfg.apply_pairs(&pairs).unwrap();
        assert_eq!(cfg.grid_nx, 32);
        assert_eq!(cfg.eps, vec![0.05, 0.025]);
        assert_eq!(cfg.branch, BranchSel::Minus);
        assert!(cfg.cheap_dn);
        assert_eq!(cfg.out, PathBuf::from("/tmp/run"));
        cfg.validate().unwrap();

        assert!(parse_config_text("nonsense line").is_err());
        let mut bad = BTreeMap::new();
        bad.insert("grid.nx".to_string(), "not a number".to_string());
        assert!(RunConfig::default().apply_pairs(&bad).is_err());
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let mut cfg = RunConfig::default();
        cfg.ground_tol = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.eps = vec![1.5];
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.threads = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        let a = RunConfig::default();
        let b = RunConfig::default();
        assert_eq!(a.hash(), b.hash());
        let mut c = RunConfig::default();
        c.delta = 0.12;
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn symbol_names_resolve() {
        for name in ["g", "f", "K0", "L0", "M0", "limit"] {
            let f = symbol_by_name(name).unwrap();
            assert!(f(1.3, 0.4).is_finite());
        }
        assert!(symbol_by_name("bogus").is_err());
    }
}
