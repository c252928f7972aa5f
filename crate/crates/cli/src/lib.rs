//! Experiment runner around `lamplight-core`: deterministic configuration,
//! plotter-ready report files, and a fixed exit-code contract.
//!
//! Every command reads one [`ExperimentConfig`] (file keys overridden by
//! flags), writes its tables under the configured output directory, and
//! maps failures onto stable exit codes: 1 config/io, 2 resource budget,
//! 3 boundary-map coverage, 4 fiber-law violation.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use lamplight_core::boundary::CloneBall;
use lamplight_core::dlgraph::{folner_scan, Ambient, DLBox, FolnerRow, GraphError, DEFAULT_BUDGET};
use lamplight_core::lift::{up_map, LiftError, PreimageAudit};
use lamplight_core::qmaps::{format_map, parse_map, PiecewiseMap};
use lamplight_core::ufh::{
    audit_stage, bounded_matching, obstruction_stage, whyte_scan, MatchingReport, UfhError,
    Verdict, WhyteReport,
};
use lamplight_core::Rational;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Resource(String),
    Coverage(String),
    Fiber(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Resource(_) => 2,
            CliError::Coverage(_) => 3,
            CliError::Fiber(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
            CliError::Resource(m) => write!(f, "resource error: {m}"),
            CliError::Coverage(m) => write!(f, "coverage error: {m}"),
            CliError::Fiber(m) => write!(f, "fiber violation: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn graph_err(e: GraphError) -> CliError {
    match e {
        GraphError::Budget { .. } => CliError::Resource(e.to_string()),
        other => CliError::Config(other.to_string()),
    }
}

fn ufh_err(e: UfhError) -> CliError {
    match e {
        UfhError::Lift(LiftError::Coverage { vertex, clone }) => {
            CliError::Coverage(format!("vertex {vertex} has uncovered clone {clone}"))
        }
        UfhError::Graph(g) => graph_err(g),
        other => CliError::Config(other.to_string()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Emit {
    Csv,
    Json,
}

impl std::str::FromStr for Emit {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "csv" => Ok(Emit::Csv),
            "json" => Ok(Emit::Json),
            other => Err(CliError::Config(format!("unknown emit format `{other}`"))),
        }
    }
}

fn parse_ambient(s: &str) -> Result<Ambient, CliError> {
    match s {
        "band" => Ok(Ambient::Band),
        "box" => Ok(Ambient::Box),
        other => Err(CliError::Config(format!("unknown ambient `{other}`"))),
    }
}

/// One experiment description. Flags override file keys; the seed is the
/// only entropy source, so a fixed config reproduces every byte.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub n: u32,
    pub k: i64,
    pub h_list: Vec<i64>,
    pub r: u32,
    /// Matching radius for the bipartite audit; 0 skips the matching.
    pub match_radius: u32,
    pub phi_l: Option<PathBuf>,
    pub phi_u: Option<PathBuf>,
    pub seed: u64,
    pub ambient: Ambient,
    pub outdir: PathBuf,
    pub budget: u128,
    pub emit: Emit,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 2,
            k: 1,
            h_list: (2..=8).collect(),
            r: 1,
            match_radius: 0,
            phi_l: None,
            phi_u: None,
            seed: 0,
            ambient: Ambient::Band,
            outdir: PathBuf::from("."),
            budget: DEFAULT_BUDGET,
            emit: Emit::Csv,
        }
    }
}

impl ExperimentConfig {
    /// Apply one `key = value` pair from a config file or a flag.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let bad = |what: &str| CliError::Config(format!("bad value `{value}` for {what}"));
        match key {
            "n" => self.n = value.parse().map_err(|_| bad("n"))?,
            "k" => self.k = value.parse().map_err(|_| bad("k"))?,
            "H_list" => {
                self.h_list = value
                    .split(',')
                    .filter(|p| !p.trim().is_empty())
                    .map(|p| p.trim().parse())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad("H_list"))?;
            }
            "r" => self.r = value.parse().map_err(|_| bad("r"))?,
            "R" => self.match_radius = value.parse().map_err(|_| bad("R"))?,
            "phi_l" => self.phi_l = Some(PathBuf::from(value)),
            "phi_u" => self.phi_u = Some(PathBuf::from(value)),
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            "ambient" => self.ambient = parse_ambient(value)?,
            "outdir" => self.outdir = PathBuf::from(value),
            "budget" => self.budget = value.parse().map_err(|_| bad("budget"))?,
            "emit" => self.emit = value.parse()?,
            other => return Err(CliError::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Overlay `key = value` lines from a file; `#` starts a comment.
    pub fn load_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("expected key = value, got `{line}`")))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.n < 2 {
            return Err(CliError::Config(format!("n = {} must be at least 2", self.n)));
        }
        if self.k < 1 {
            return Err(CliError::Config(format!("k = {} must be at least 1", self.k)));
        }
        if self.h_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Config(String::from(
                "H_list must be strictly increasing",
            )));
        }
        Ok(())
    }
}

/// A flat report table: column names plus stringified cells, rendered as
/// CSV or a JSON array of objects depending on the emit setting.
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn render(&self, emit: Emit) -> String {
        match emit {
            Emit::Csv => {
                let mut out = self.columns.join(",");
                out.push('\n');
                for row in &self.rows {
                    out.push_str(&row.join(","));
                    out.push('\n');
                }
                out
            }
            Emit::Json => {
                let rows: Vec<serde_json::Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        self.columns
                            .iter()
                            .zip(row)
                            .map(|(c, v)| {
                                let cell = if v.is_empty() {
                                    serde_json::Value::Null
                                } else {
                                    serde_json::Value::String(v.clone())
                                };
                                (c.to_string(), cell)
                            })
                            .collect::<serde_json::Map<_, _>>()
                            .into()
                    })
                    .collect();
                let mut out = serde_json::to_string_pretty(&rows).expect("string table");
                out.push('\n');
                out
            }
        }
    }
}

fn write_table(cfg: &ExperimentConfig, stem: &str, table: &Table) -> Result<PathBuf, CliError> {
    fs::create_dir_all(&cfg.outdir)?;
    let ext = match cfg.emit {
        Emit::Csv => "csv",
        Emit::Json => "json",
    };
    let path = cfg.outdir.join(format!("{stem}.{ext}"));
    fs::write(&path, table.render(cfg.emit))?;
    Ok(path)
}

fn opt_cell<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

/// Følner table over the configured heights. Returns the rows; the file
/// lands at `folner.csv` (or `.json`) under the output directory.
pub fn cmd_folner(cfg: &ExperimentConfig) -> Result<Vec<FolnerRow>, CliError> {
    cfg.validate()?;
    let rows = match cfg.ambient {
        Ambient::Band => folner_scan(cfg.n, &cfg.h_list, cfg.r, cfg.budget).map_err(graph_err)?,
        // a whole box has no box-ambient complement; kept for symmetry
        Ambient::Box => {
            let mut rows = Vec::new();
            for &h in &cfg.h_list {
                let b = DLBox::build(cfg.n, h, 0, cfg.budget).map_err(graph_err)?;
                let boundary = b.r_boundary(&b.all_ids(), cfg.r, Ambient::Box).len() as u64;
                rows.push(FolnerRow {
                    h,
                    size: b.vertex_count() as u128,
                    boundary,
                    ratio: Rational::new(boundary.into(), (b.vertex_count() as u64).into()),
                });
            }
            rows
        }
    };
    let table = Table {
        columns: vec!["H", "size", "boundary", "ratio"],
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    r.h.to_string(),
                    r.size.to_string(),
                    r.boundary.to_string(),
                    r.ratio.to_string(),
                ]
            })
            .collect(),
    };
    let path = write_table(cfg, "folner", &table)?;
    println!("wrote {}", path.display());
    Ok(rows)
}

fn load_map(path: &Path) -> Result<PiecewiseMap, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_map(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// The boundary maps of a run: from files when configured, identities on
/// the standard windows otherwise.
pub fn load_boundary_maps(
    cfg: &ExperimentConfig,
) -> Result<(PiecewiseMap, PiecewiseMap), CliError> {
    let max_h = cfg.h_list.last().copied().unwrap_or(0);
    let phi_l = match &cfg.phi_l {
        Some(p) => load_map(p)?,
        None => PiecewiseMap::identity(CloneBall::zero(cfg.n, 0)),
    };
    let phi_u = match &cfg.phi_u {
        Some(p) => load_map(p)?,
        None => PiecewiseMap::identity(CloneBall::zero(cfg.n, max_h)),
    };
    Ok((phi_l, phi_u))
}

pub struct ObstructionOutcome {
    pub report: WhyteReport,
    pub audit: PreimageAudit,
    pub matching: Option<MatchingReport>,
    pub verdict: Verdict,
}

pub fn verdict_line(v: Verdict) -> &'static str {
    match v {
        Verdict::Obstructed => "OBSTRUCTED",
        Verdict::Consistent => "CONSISTENT",
        Verdict::Inconclusive => "INCONCLUSIVE",
    }
}

/// The obstruction pipeline: lift the configured boundary maps over every
/// height, scan the comparison chain, audit preimages at the tallest
/// height, and print the verdict as the final stdout line.
pub fn cmd_obstruction(cfg: &ExperimentConfig) -> Result<ObstructionOutcome, CliError> {
    cfg.validate()?;
    if cfg.h_list.is_empty() {
        return Err(CliError::Config(String::from("H_list is empty")));
    }
    let (phi_l, phi_u) = load_boundary_maps(cfg)?;
    let report = whyte_scan(
        |h| Ok(obstruction_stage(&phi_l, &phi_u, cfg.k, h, cfg.budget)?.chain),
        &cfg.h_list,
        cfg.r,
    )
    .map_err(ufh_err)?;
    let whyte_table = Table {
        columns: vec!["H", "sum_a", "boundary_size", "ratio"],
        rows: report
            .rows
            .iter()
            .map(|row| {
                vec![
                    row.h.to_string(),
                    row.sum.to_string(),
                    row.boundary_size.to_string(),
                    row.ratio.to_string(),
                ]
            })
            .collect(),
    };
    let whyte_path = write_table(cfg, "whyte", &whyte_table)?;

    let max_h = *cfg.h_list.last().expect("nonempty");
    let stage = obstruction_stage(&phi_l, &phi_u, cfg.k, max_h, cfg.budget).map_err(ufh_err)?;
    let k_used = phi_l.bilipschitz_bound() * phi_u.bilipschitz_bound();
    let audit = audit_stage(&stage, &k_used);
    let audit_table = Table {
        columns: vec![
            "t",
            "sum_counts",
            "expected_center",
            "lower_bound",
            "upper_bound",
            "in_sandwich",
        ],
        rows: audit
            .rows
            .iter()
            .map(|row| {
                vec![
                    row.t.to_string(),
                    row.sum_counts.to_string(),
                    opt_cell(&row.expected_center),
                    opt_cell(&row.lower_bound),
                    opt_cell(&row.upper_bound),
                    opt_cell(&row.in_sandwich),
                ]
            })
            .collect(),
    };
    let audit_path = write_table(cfg, "audit", &audit_table)?;

    let matching = if cfg.match_radius > 0 {
        let m = bounded_matching(&stage.psi, &stage.target, cfg.match_radius);
        let table = Table {
            columns: vec!["source_vertex_id", "target_vertex_id"],
            rows: m
                .matching
                .iter()
                .map(|(s, t)| vec![s.to_string(), t.to_string()])
                .collect(),
        };
        let path = write_table(cfg, "matching", &table)?;
        println!(
            "wrote {} (deficiency {}, deficient set {}, neighborhood {})",
            path.display(),
            m.deficiency,
            m.deficient_set.len(),
            m.neighborhood_size
        );
        Some(m)
    } else {
        None
    };

    println!("wrote {}", whyte_path.display());
    println!("wrote {}", audit_path.display());
    let verdict = report.verdict;
    println!("{}", verdict_line(verdict));
    Ok(ObstructionOutcome { report, audit, matching, verdict })
}

pub struct UpAuditOutcome {
    /// Fiber-size histogram over the interior sublattice vertices.
    pub histogram: BTreeMap<u64, u64>,
    pub interior_vertices: u64,
}

/// Exhaustive fiber audit of the k-step `up` map over the tallest
/// configured box: every interior sublattice vertex must have exactly `k`
/// preimages, or the command fails with exit code 4.
pub fn cmd_upaudit(cfg: &ExperimentConfig) -> Result<UpAuditOutcome, CliError> {
    cfg.validate()?;
    let h = *cfg
        .h_list
        .last()
        .ok_or_else(|| CliError::Config(String::from("H_list is empty")))?;
    let k = cfg.k as u32;
    let b = DLBox::build(cfg.n, h, 0, cfg.budget).map_err(graph_err)?;
    let mut fibers = vec![0u64; b.vertex_count()];
    for id in b.all_ids() {
        let w = up_map(&b.vertex(id), k);
        if let Some(wid) = b.index_of(&w) {
            fibers[wid] += 1;
        }
    }
    // interior: on the k-sublattice with k - 1 full levels available below
    let mut histogram = BTreeMap::new();
    let mut interior_vertices = 0u64;
    let mut violation = None;
    for t in b.levels() {
        if t.rem_euclid(cfg.k) != 0 || t - (cfg.k - 1) < b.base_level() {
            continue;
        }
        let lo = (t - b.base_level()) as usize * b.level_count();
        for (offset, &count) in fibers[lo..lo + b.level_count()].iter().enumerate() {
            *histogram.entry(count).or_insert(0) += 1;
            interior_vertices += 1;
            if count != k as u64 && violation.is_none() {
                violation = Some((lo + offset, count));
            }
        }
    }
    let table = Table {
        columns: vec!["fiber_size", "count"],
        rows: histogram
            .iter()
            .map(|(size, count)| vec![size.to_string(), count.to_string()])
            .collect(),
    };
    let path = write_table(cfg, "fibers", &table)?;
    println!("wrote {}", path.display());
    if let Some((id, count)) = violation {
        return Err(CliError::Fiber(format!(
            "vertex {id} has fiber size {count}, expected {k}"
        )));
    }
    println!("all {interior_vertices} interior fibers have size {k}");
    Ok(UpAuditOutcome { histogram, interior_vertices })
}

/// Validate a map description file and echo its canonical form plus the
/// measure-linearity report.
pub fn cmd_checkmap(path: &Path) -> Result<PiecewiseMap, CliError> {
    let m = load_map(path)?;
    print!("{}", format_map(&m));
    let report = m.measure_linear_report();
    println!("global = {}", opt_cell(&report.global));
    println!("window_ratio = {}", report.window_ratio);
    println!("bilipschitz = {}", m.bilipschitz_bound());
    let primes: Vec<String> = report.prime_support.iter().map(u64::to_string).collect();
    println!("prime_support = {}", primes.join(","));
    Ok(m)
}
