//! Benchmark scenarios: configuration, timed runs, sweeps and CSV output.

use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::kinetics::ReactionModel;
use crate::mesh::{BoundaryLayout, CatalyticIndex, ChannelGrid};
use crate::operator::{TransportOperator, VelocityField};
use crate::reduced::{OfflineOptions, ReducedBasis, ReducedSolution};
use crate::reference::{global_solve, GlobalSolution};
use crate::settings::SolverSettings;

/// Levels above this need `allow_large`.
pub const DEFAULT_MAX_LEVEL: u32 = 6;

pub const SWEEP_HEADER: &str =
    "level,N_global,N_reduced,t_offline_s,t_online_s,t_global_s,iters_reduced,iters_global,max_diff";
pub const PROFILE_HEADER: &str = "x,Y_CO,Y_O2,Y_CO2";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Global,
    Reduced,
    Both,
}

impl Mode {
    pub fn runs_global(self) -> bool {
        matches!(self, Mode::Global | Mode::Both)
    }

    pub fn runs_reduced(self) -> bool {
        matches!(self, Mode::Reduced | Mode::Both)
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(Mode::Global),
            "reduced" => Ok(Mode::Reduced),
            "both" => Ok(Mode::Both),
            other => Err(Error::Config(format!("unknown mode '{other}' (global|reduced|both)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub level: u32,
    pub diffusion: f64,
    pub k: f64,
    pub v_in: f64,
    pub lx: f64,
    pub ly: f64,
    pub span: (f64, f64),
    pub inlet: Vec<f64>,
    pub model: String,
    pub mode: Mode,
    /// Number of combined basis functions; `None` keeps one per node.
    pub compress: Option<usize>,
    pub ftol: f64,
    pub max_iters: usize,
    pub repeats: usize,
    pub force_full_reassembly: bool,
    pub allow_large: bool,
    pub out: Option<PathBuf>,
    pub profile_out: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            level: 0,
            diffusion: 1e-2,
            k: 1e10,
            v_in: 1.0,
            lx: 5.0,
            ly: 1.0,
            span: (2.0, 3.0),
            inlet: vec![0.2, 0.8, 0.0],
            model: "mass_action_co_ox".into(),
            mode: Mode::Both,
            compress: None,
            ftol: 1e-11,
            max_iters: 200,
            repeats: 5,
            force_full_reassembly: false,
            allow_large: false,
            out: None,
            profile_out: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for key '{key}'")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| parse(key, v)).collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean '{value}' for key '{key}'"))),
    }
}

impl ScenarioConfig {
    /// Sets one configuration key. Keys match the CLI flag names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.trim() {
            "level" => self.level = parse(key, value)?,
            "D" | "diffusion" => self.diffusion = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "vin" | "v_in" => self.v_in = parse(key, value)?,
            "Lx" | "lx" => self.lx = parse(key, value)?,
            "Ly" | "ly" => self.ly = parse(key, value)?,
            "span" => match parse_list(key, value)?.as_slice() {
                &[a, b] => self.span = (a, b),
                _ => return Err(Error::Config("span needs two values 'start,end'".into())),
            },
            "Y_in" | "yin" => self.inlet = parse_list(key, value)?,
            "model" | "kind" => self.model = value.trim().to_string(),
            "mode" => self.mode = value.trim().parse()?,
            "compress" => {
                let n: usize = parse(key, value)?;
                self.compress = (n > 0).then_some(n);
            }
            "ftol" => self.ftol = parse(key, value)?,
            "max_iters" => self.max_iters = parse(key, value)?,
            "repeats" => self.repeats = parse(key, value)?,
            "force_full_reassembly" => self.force_full_reassembly = parse_bool(key, value)?,
            "allow_large" => self.allow_large = parse_bool(key, value)?,
            "out" => self.out = Some(PathBuf::from(value.trim())),
            "profile" | "profile_out" => self.profile_out = Some(PathBuf::from(value.trim())),
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Applies flat `key = value` lines; `#` starts a comment.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", lineno + 1)))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_kv(text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.level > DEFAULT_MAX_LEVEL && !self.allow_large {
            return Err(Error::Config(format!(
                "level {} exceeds {DEFAULT_MAX_LEVEL}; pass allow_large to override",
                self.level
            )));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if self.v_in < 0.0 || self.k < 0.0 {
            return Err(Error::Config("v_in and k must be non-negative".into()));
        }
        Ok(())
    }

    pub fn reaction_model(&self) -> Result<ReactionModel> {
        ReactionModel::from_name(&self.model, self.k)
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings {
            ftol: self.ftol,
            max_iters: self.max_iters,
            force_full_reassembly: self.force_full_reassembly,
            ..SolverSettings::default()
        }
    }

    pub fn grid(&self) -> Result<(ChannelGrid, CatalyticIndex)> {
        let grid = ChannelGrid::build(self.level, self.lx, self.ly)?
            .tag_boundary(&BoundaryLayout::channel(self.span.0, self.span.1))?;
        let cat = grid.catalytic_index()?;
        Ok((grid, cat))
    }

    pub fn velocity(&self) -> VelocityField {
        VelocityField::hagen_poiseuille(self.v_in, self.ly)
    }

    pub fn assemble(&self, grid: &ChannelGrid) -> Result<TransportOperator> {
        TransportOperator::assemble(grid, &self.velocity(), self.diffusion, &self.inlet, None)
    }
}

/// One row of the sweep table. Missing values print as empty cells.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepRow {
    pub level: u32,
    pub n_global: usize,
    pub n_reduced: usize,
    pub t_offline_s: Option<f64>,
    pub t_online_s: Option<f64>,
    pub t_global_s: Option<f64>,
    pub iters_reduced: Option<usize>,
    pub iters_global: Option<usize>,
    pub max_diff: Option<f64>,
}

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl SweepRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.level,
            self.n_global,
            self.n_reduced,
            cell(self.t_offline_s),
            cell(self.t_online_s),
            cell(self.t_global_s),
            cell(self.iters_reduced),
            cell(self.iters_global),
            self.max_diff.map(|d| format!("{d:e}")).unwrap_or_default()
        )
    }
}

/// Species values at one catalytic collocation point.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileRow {
    pub x: f64,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub row: SweepRow,
    pub profile: Vec<ProfileRow>,
    pub reduced: Option<ReducedSolution>,
    pub global: Option<GlobalSolution>,
    /// Reconstructed reduced fields, present in `both` mode.
    pub reduced_fields: Option<Vec<Vec<f64>>>,
}

fn median(mut v: Vec<Duration>) -> f64 {
    v.sort();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2].as_secs_f64()
    } else {
        0.5 * (v[n / 2 - 1].as_secs_f64() + v[n / 2].as_secs_f64())
    }
}

/// Rows `(x, species values...)` at the catalytic nodes, ordered along the
/// boundary.
pub fn export_boundary_profile(trace: &[Vec<f64>], grid: &ChannelGrid, cat: &CatalyticIndex) -> Vec<ProfileRow> {
    cat.nodes
        .iter()
        .enumerate()
        .map(|(l, &node)| ProfileRow {
            x: grid.coord(node)[0],
            values: trace.iter().map(|t| t[l]).collect(),
        })
        .collect()
}

pub fn write_profile(rows: &[ProfileRow], mut w: impl Write) -> Result<()> {
    writeln!(w, "{PROFILE_HEADER}")?;
    for r in rows {
        let values: Vec<String> = r.values.iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{},{}", r.x, values.join(","))?;
    }
    Ok(())
}

/// Global and reduced degree-of-freedom counts without solving anything.
pub fn count_only(cfg: &ScenarioConfig, level: u32) -> Result<SweepRow> {
    let cfg = ScenarioConfig { level, ..cfg.clone() };
    let (grid, cat) = cfg.grid()?;
    Ok(SweepRow {
        level,
        n_global: grid.node_count() * cfg.inlet.len(),
        n_reduced: cfg.compress.map_or(cat.len(), |g| g.min(cat.len())),
        ..SweepRow::default()
    })
}

/// Runs the configured solvers, timing offline, online and global phases
/// separately (median over `cfg.repeats`).
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let (grid, cat) = cfg.grid()?;
    let model = cfg.reaction_model()?;
    let settings = cfg.solver_settings();
    let context = |e: Error| Error::Config(format!("level {} k {:e}: {e}", cfg.level, cfg.k));

    let mut t_offline = Vec::new();
    let mut t_online = Vec::new();
    let mut t_global = Vec::new();
    let mut reduced = None;
    let mut global = None;
    let mut basis_op = None;

    for _ in 0..cfg.repeats {
        if cfg.mode.runs_reduced() {
            let start = Instant::now();
            let op = cfg.assemble(&grid)?;
            let mut basis = ReducedBasis::offline(&op, &grid, &cat, OfflineOptions::default())?;
            if let Some(n) = cfg.compress {
                basis = basis.compress(&basis.contiguous_groups(n))?;
            }
            t_offline.push(start.elapsed());
            let sol = basis.online(&model, &settings).map_err(context)?;
            t_online.push(sol.online_time);
            reduced = Some(sol);
            basis_op = Some((basis, op));
        }
        if cfg.mode.runs_global() {
            let owned;
            let op = match &basis_op {
                Some((_, op)) => op,
                None => {
                    owned = cfg.assemble(&grid)?;
                    &owned
                }
            };
            let sol = global_solve(op, &grid, &cat, &model, &settings).map_err(context)?;
            t_global.push(sol.solve_time);
            global = Some(sol);
        }
    }

    let reduced_fields = match (&reduced, &basis_op, cfg.mode) {
        (Some(sol), Some((basis, op)), Mode::Both) => Some(basis.reconstruct(op, sol)?),
        _ => None,
    };
    let max_diff = match (&reduced_fields, &global) {
        (Some(r), Some(g)) => Some(
            r.iter()
                .zip(&g.fields)
                .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
                .fold(0.0, f64::max),
        ),
        _ => None,
    };

    let trace = match (&reduced, &global) {
        (Some(r), _) => r.boundary_trace.clone(),
        (None, Some(g)) => (0..g.fields.len()).map(|s| g.trace(s, &cat)).collect(),
        (None, None) => unreachable!("every mode runs at least one solver"),
    };
    let profile = export_boundary_profile(&trace, &grid, &cat);

    let row = SweepRow {
        level: cfg.level,
        n_global: grid.node_count() * cfg.inlet.len(),
        n_reduced: basis_op.as_ref().map_or(cat.len(), |(b, _)| b.unknowns()),
        t_offline_s: (!t_offline.is_empty()).then(|| median(t_offline)),
        t_online_s: (!t_online.is_empty()).then(|| median(t_online)),
        t_global_s: (!t_global.is_empty()).then(|| median(t_global)),
        iters_reduced: reduced.as_ref().map(|r| r.newton_iters),
        iters_global: global.as_ref().map(|g| g.newton_iters),
        max_diff,
    };

    if let Some(path) = &cfg.out {
        let mut f = std::fs::File::create(path)?;
        writeln!(f, "{SWEEP_HEADER}")?;
        writeln!(f, "{}", row.csv())?;
    }
    if let Some(path) = &cfg.profile_out {
        write_profile(&profile, std::fs::File::create(path)?)?;
    }

    Ok(SolveReport {
        row,
        profile,
        reduced,
        global,
        reduced_fields,
    })
}

fn scenario_without_outputs(cfg: &ScenarioConfig) -> ScenarioConfig {
    ScenarioConfig {
        out: None,
        profile_out: None,
        ..cfg.clone()
    }
}

/// One row per level. Rows are written and flushed to `sink` as they
/// complete, so a failing level leaves the earlier rows in place.
pub fn sweep_levels(
    cfg: &ScenarioConfig,
    levels: &[u32],
    counts_only: bool,
    mut sink: impl Write,
) -> Result<Vec<SweepRow>> {
    if levels.is_empty() {
        return Err(Error::Config("empty level list".into()));
    }
    writeln!(sink, "{SWEEP_HEADER}")?;
    let mut rows = Vec::with_capacity(levels.len());
    for &level in levels {
        let point = ScenarioConfig {
            level,
            ..scenario_without_outputs(cfg)
        };
        let row = if counts_only {
            if level > DEFAULT_MAX_LEVEL && !cfg.allow_large {
                point.validate()?;
            }
            count_only(&point, level)?
        } else {
            run_scenario(&point)?.row
        };
        writeln!(sink, "{}", row.csv())?;
        sink.flush()?;
        rows.push(row);
    }
    Ok(rows)
}

/// One row per rate constant on the fixed level `cfg.level`, with a
/// leading `k` column.
pub fn sweep_k(cfg: &ScenarioConfig, ks: &[f64], mut sink: impl Write) -> Result<Vec<(f64, SweepRow)>> {
    if ks.is_empty() {
        return Err(Error::Config("empty k list".into()));
    }
    writeln!(sink, "k,{SWEEP_HEADER}")?;
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        let point = ScenarioConfig {
            k,
            ..scenario_without_outputs(cfg)
        };
        let row = run_scenario(&point)?.row;
        writeln!(sink, "{k:e},{}", row.csv())?;
        sink.flush()?;
        rows.push((k, row));
    }
    Ok(rows)
}
