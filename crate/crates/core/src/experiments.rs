//! Config-driven experiment runs.
//!
//! A config is a TOML document:
//!
//! ```toml
//! kind = "strategy-sweep"
//! master_seed = 42
//!
//! [params]
//! n = { min = 9, max = 15, step = 3 }   # or `n = 12`, or `n = [6, 12]`
//! episodes = 1000
//! strategies = ["sprinter", "bfs"]
//!
//! [output]
//! dir = "reports"
//! format = "both"                        # json | csv | both
//! ```
//!
//! Each run writes `<dir>/<kind>.json` and/or `<dir>/<kind>.csv`. Report
//! bytes depend only on the config, the master seed and the crate version;
//! rows follow parameter order.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use num_traits::ToPrimitive;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, floor_pow2_root, total_win_bound};
use crate::embedding::{
    enumerate_win_probability, estimate_expected_win, improper_pair_frequency, search_worst_tree,
};
use crate::error::Error;
use crate::graph::{GluedTreesGraph, GraphAudit, MemoryBudget};
use crate::harness::{strategy_by_id, success_rates, StrategyRecord, Transcript, STRATEGY_IDS};
use crate::oracle::{name_bits, Oracle, VertexName};
use crate::rng::Stream;
use crate::tree::{make_tree, TreeShape};

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Process exit codes used by the CLI.
pub mod exit_code {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const RESOURCE: i32 = 3;
    pub const BOUND_VIOLATION: i32 = 4;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    GraphAudit,
    EmbedExact,
    EmbedMc,
    PairAudit,
    BoundsTable,
    StrategySweep,
    WorstTreeSearch,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::GraphAudit => "graph-audit",
            ExperimentKind::EmbedExact => "embed-exact",
            ExperimentKind::EmbedMc => "embed-mc",
            ExperimentKind::PairAudit => "pair-audit",
            ExperimentKind::BoundsTable => "bounds-table",
            ExperimentKind::StrategySweep => "strategy-sweep",
            ExperimentKind::WorstTreeSearch => "worst-tree-search",
        }
    }
}

/// An integer parameter: a single value, an explicit list, or an inclusive
/// `{ min, max, step }` range.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IntSet {
    One(u64),
    List(Vec<u64>),
    Range {
        min: u64,
        max: u64,
        #[serde(default = "one")]
        step: u64,
    },
}

fn one() -> u64 {
    1
}

impl IntSet {
    pub fn values(&self) -> Vec<u64> {
        match self {
            IntSet::One(v) => vec![*v],
            IntSet::List(list) => list.clone(),
            IntSet::Range { min, max, step } if *step > 0 => {
                (*min..=*max).step_by(*step as usize).collect()
            }
            IntSet::Range { .. } => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub n: Option<IntSet>,
    /// Query-tree sizes; defaults to `floor(2^{n/3})` where optional.
    pub t: Option<IntSet>,
    /// Instances per `n` (graph-audit, embed-exact).
    pub seeds: Option<u64>,
    pub shapes: Option<Vec<TreeShape>>,
    /// Trees per `(n, shape, t)` (embed-mc, pair-audit).
    pub trees: Option<u64>,
    pub graph_trials: Option<u64>,
    pub embed_trials: Option<u64>,
    pub episodes: Option<u64>,
    /// Query budgets; defaults to `floor(2^{n/3})`.
    pub budget: Option<IntSet>,
    pub strategies: Option<Vec<String>>,
    pub candidates: Option<u64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
    #[default]
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
}

fn default_dir() -> PathBuf {
    PathBuf::from("reports")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            format: OutputFormat::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub master_seed: u64,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub field: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

fn line_at(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of the first `key = ...` assignment, if any.
fn line_of_key(text: &str, key: &str) -> Option<usize> {
    text.lines()
        .position(|l| {
            l.trim_start()
                .strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| i + 1)
}

/// Parses a config, returning schema diagnostics on failure.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, Vec<Diagnostic>> {
    toml::from_str::<ExperimentConfig>(text).map_err(|e| {
        vec![Diagnostic {
            field: "config".into(),
            line: e.span().map(|s| line_at(text, s.start)),
            message: e.message().trim().to_string(),
        }]
    })
}

/// Every problem that would make [`run`] reject the config; empty iff the
/// config is accepted.
pub fn validate(text: &str) -> Vec<Diagnostic> {
    match parse_config(text) {
        Ok(config) => check_config(&config, Some(text)),
        Err(diags) => diags,
    }
}

/// Semantic checks on a parsed config. `source` supplies line numbers.
pub fn check_config(config: &ExperimentConfig, source: Option<&str>) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let p = &config.params;
    let mut push = |field: &str, message: String| {
        let key = field.rsplit('.').next().unwrap_or(field);
        diags.push(Diagnostic {
            field: field.to_string(),
            line: source.and_then(|s| line_of_key(s, key)),
            message,
        });
    };
    use ExperimentKind::*;
    let kind = config.kind;

    let ns = match &p.n {
        None => {
            push("params.n", "missing required field".into());
            Vec::new()
        }
        Some(set) => {
            let values = set.values();
            if values.is_empty() {
                push("params.n", "range is empty".into());
            }
            let max_n = if kind == BoundsTable {
                120
            } else {
                u64::from(crate::graph::MAX_HEIGHT)
            };
            for &n in &values {
                if n < 1 || n > max_n {
                    push("params.n", format!("n = {n} outside [1, {max_n}]"));
                }
            }
            values
        }
    };

    let t_required = matches!(kind, EmbedExact | PairAudit);
    let t_allowed = matches!(
        kind,
        EmbedExact | EmbedMc | PairAudit | BoundsTable | WorstTreeSearch
    );
    match &p.t {
        None if t_required => push("params.t", "missing required field".into()),
        Some(_) if !t_allowed => push("params.t", format!("not used by {}", kind.as_str())),
        Some(set) => {
            let ts = set.values();
            if ts.is_empty() {
                push("params.t", "range is empty".into());
            }
            for &t in &ts {
                if t < 1 {
                    push("params.t", "t must be at least 1".into());
                }
                for &n in ns
                    .iter()
                    .filter(|_| matches!(kind, BoundsTable | PairAudit))
                {
                    if n < 64 && t >= 1u64 << n {
                        push("params.t", format!("t = {t} is not below 2^n for n = {n}"));
                    }
                }
                if kind == EmbedExact && t > 23 {
                    push(
                        "params.t",
                        format!("t = {t} exceeds the enumeration budget (t <= 23)"),
                    );
                }
            }
        }
        None => {}
    }

    let positive = |name: &str,
                    value: Option<u64>,
                    required: bool,
                    push: &mut dyn FnMut(&str, String)| {
        match value {
            None if required => push(&format!("params.{name}"), "missing required field".into()),
            Some(0) => push(&format!("params.{name}"), "must be positive".into()),
            _ => {}
        }
    };
    let trials_needed = matches!(kind, EmbedMc | PairAudit | WorstTreeSearch);
    positive("graph_trials", p.graph_trials, trials_needed, &mut push);
    positive("embed_trials", p.embed_trials, trials_needed, &mut push);
    positive("seeds", p.seeds, kind == GraphAudit, &mut push);
    positive("trees", p.trees, false, &mut push);
    positive("episodes", p.episodes, kind == StrategySweep, &mut push);
    positive(
        "candidates",
        p.candidates,
        kind == WorstTreeSearch,
        &mut push,
    );

    if let Some(shapes) = &p.shapes {
        if shapes.is_empty() {
            push("params.shapes", "list is empty".into());
        }
    }
    if let Some(ids) = &p.strategies {
        if ids.is_empty() {
            push("params.strategies", "list is empty".into());
        }
        for id in ids {
            if strategy_by_id(id).is_err() {
                push("params.strategies", format!("unknown strategy `{id}`"));
            }
        }
    }
    if let Some(set) = &p.budget {
        if set.values().is_empty() {
            push("params.budget", "range is empty".into());
        }
    }
    diags
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid config:\n{}", .0.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n"))]
    Config(Vec<Diagnostic>),
    #[error("resource budget exceeded: {0}")]
    Resource(String),
    #[error(transparent)]
    Other(#[from] Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl ExperimentError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => exit_code::CONFIG,
            ExperimentError::Resource(_) | ExperimentError::Other(Error::Resource(_)) => {
                exit_code::RESOURCE
            }
            _ => exit_code::FAILURE,
        }
    }
}

fn lift(e: Error) -> ExperimentError {
    match e {
        Error::Resource(msg) => ExperimentError::Resource(msg),
        other => ExperimentError::Other(other),
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub rows: usize,
    pub violations: Vec<String>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.violations.is_empty() {
            exit_code::OK
        } else {
            exit_code::BOUND_VIOLATION
        }
    }
}

/// JSON report envelope; `R` is the kind's row type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report<R> {
    pub format_version: u32,
    pub kind: ExperimentKind,
    pub master_seed: u64,
    pub rows: Vec<R>,
    pub violations: Vec<String>,
}

/// `bounds-table` row; column order is frozen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsRow {
    pub n: u32,
    pub t: u64,
    pub exit_bound: f64,
    pub improper_bound_paper: f64,
    pub improper_bound_terms: f64,
    pub total: f64,
    pub vacuous: bool,
}

impl From<bounds::BoundReport> for BoundsRow {
    fn from(r: bounds::BoundReport) -> Self {
        Self {
            n: r.n,
            t: r.t,
            exit_bound: r.exit_bound,
            improper_bound_paper: r.improper_bound,
            improper_bound_terms: r.improper_bound_terms,
            total: r.total,
            vacuous: r.vacuous,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactRow {
    pub n: u32,
    pub shape: TreeShape,
    pub t: u64,
    pub graph_index: u64,
    pub graph_seed: u64,
    /// Reduced fraction `p/q`.
    pub probability: String,
    pub probability_f64: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub n: u32,
    pub shape: TreeShape,
    pub t: u64,
    pub tree_index: u64,
    /// Parent array as JSON.
    pub tree: String,
    pub seed: u64,
    pub trials: u64,
    pub successes: u64,
    pub mean: f64,
    pub stderr: f64,
    pub ci99_upper: f64,
    /// `null` when `t >= 2^n`.
    pub bound_total: Option<f64>,
    pub bound_vacuous: Option<bool>,
    /// Whether the bound is asserted (`t <= 2^{n/3}`).
    pub checked: bool,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub n: u32,
    pub shape: TreeShape,
    pub t: u64,
    pub tree_index: u64,
    pub a: u64,
    pub b: u64,
    pub trials: u64,
    pub successes: u64,
    pub mean: f64,
    pub ci99_upper: f64,
    /// `2^{n+2} * pair_bound_both_sides + ancestor_sum`.
    pub pair_limit: f64,
    pub improper_mean: f64,
    pub improper_stderr: f64,
    pub pair_sum: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: u32,
    pub strategy_id: String,
    pub budget: u64,
    pub episodes: u64,
    pub successes: u64,
    pub mean: f64,
    pub ci99_upper: f64,
    pub master_seed: u64,
    /// `total_win_bound(budget + 1, n).total`, or `null` when undefined.
    pub bound_total: Option<f64>,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstTreeRow {
    pub n: u32,
    pub t: u64,
    pub candidates: u64,
    pub best_index: u64,
    pub shape: TreeShape,
    pub tree: String,
    pub trials: u64,
    pub successes: u64,
    pub mean: f64,
    pub stderr: f64,
    pub ci99_upper: f64,
    /// `null` when `t >= 2^n`.
    pub bound_total: Option<f64>,
    pub checked: bool,
    pub ok: bool,
}

/// Seed for one experiment unit, from the master seed and its parameters.
fn unit_seed(master: u64, kind: ExperimentKind, path: &[u64]) -> u64 {
    let mut s = Stream::new(master).derive_named(kind.as_str());
    for &p in path {
        s = s.derive(p);
    }
    s.seed_for(0)
}

fn shape_index(shape: TreeShape) -> u64 {
    TreeShape::ALL
        .iter()
        .position(|&s| s == shape)
        .expect("known shape") as u64
}

/// Runs a parsed config, writing reports. Bound violations are reported in
/// the outcome, not as errors.
pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome, ExperimentError> {
    let mut config = config.clone();
    if let Some(seed) = opts.seed {
        config.master_seed = seed;
    }
    if let Some(dir) = &opts.out_dir {
        config.output.dir = dir.clone();
    }
    let diags = check_config(&config, None);
    if !diags.is_empty() {
        return Err(ExperimentError::Config(diags));
    }
    if config.kind != ExperimentKind::BoundsTable {
        let mem = MemoryBudget::from_env();
        for n in heights(&config) {
            mem.check(n).map_err(lift)?;
        }
    }
    match config.kind {
        ExperimentKind::GraphAudit => finish(&config, run_graph_audit(&config)?),
        ExperimentKind::EmbedExact => finish(&config, run_embed_exact(&config)?),
        ExperimentKind::EmbedMc => finish(&config, run_embed_mc(&config)?),
        ExperimentKind::PairAudit => finish(&config, run_pair_audit(&config)?),
        ExperimentKind::BoundsTable => finish(&config, run_bounds_table(&config)?),
        ExperimentKind::StrategySweep => finish(&config, run_strategy_sweep(&config)?),
        ExperimentKind::WorstTreeSearch => finish(&config, run_worst_tree(&config)?),
    }
}

/// Reads, validates and runs a config file.
pub fn run_file(path: &Path, opts: &RunOptions) -> Result<RunOutcome, ExperimentError> {
    let text = fs::read_to_string(path).map_err(|e| ExperimentError::Other(e.into()))?;
    let config = parse_config(&text).map_err(ExperimentError::Config)?;
    let diags = check_config(&config, Some(&text));
    if !diags.is_empty() {
        return Err(ExperimentError::Config(diags));
    }
    run(&config, opts)
}

type Rows<R> = (Vec<R>, Vec<String>);

fn finish<R: Serialize>(
    config: &ExperimentConfig,
    (rows, violations): Rows<R>,
) -> Result<RunOutcome, ExperimentError> {
    let dir = &config.output.dir;
    fs::create_dir_all(dir).map_err(|e| ExperimentError::Other(e.into()))?;
    let mut files = Vec::new();
    let stem = config.kind.as_str();
    if matches!(
        config.output.format,
        OutputFormat::Json | OutputFormat::Both
    ) {
        let report = Report {
            format_version: REPORT_FORMAT_VERSION,
            kind: config.kind,
            master_seed: config.master_seed,
            rows: rows.iter().collect::<Vec<&R>>(),
            violations: violations.clone(),
        };
        let path = dir.join(format!("{stem}.json"));
        let mut text = serde_json::to_string_pretty(&report).map_err(Error::from)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| ExperimentError::Other(e.into()))?;
        files.push(path);
    }
    if matches!(config.output.format, OutputFormat::Csv | OutputFormat::Both) {
        let path = dir.join(format!("{stem}.csv"));
        fs::write(&path, to_csv(&rows)?).map_err(|e| ExperimentError::Other(e.into()))?;
        files.push(path);
    }
    Ok(RunOutcome {
        files,
        rows: rows.len(),
        violations,
    })
}

pub fn to_csv<R: Serialize>(rows: &[R]) -> Result<String, ExperimentError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| ExperimentError::Other(Error::Io(e.into_error())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Parses a JSON report written by [`run`].
pub fn read_json_report<R: DeserializeOwned>(text: &str) -> Result<Report<R>, Error> {
    Ok(serde_json::from_str(text)?)
}

/// Parses a CSV report written by [`run`].
pub fn read_csv_report<R: DeserializeOwned>(text: &str) -> Result<Vec<R>, csv::Error> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect()
}

fn heights(config: &ExperimentConfig) -> Vec<u32> {
    config
        .params
        .n
        .as_ref()
        .map(|s| s.values())
        .unwrap_or_default()
        .into_iter()
        .map(|n| n as u32)
        .collect()
}

/// `t` values for height `n`, defaulting to `floor(2^{n/3})`.
fn sizes(config: &ExperimentConfig, n: u32) -> Vec<u64> {
    match &config.params.t {
        Some(set) => set.values(),
        None => vec![floor_pow2_root(n, 3)],
    }
}

fn shapes(config: &ExperimentConfig, default: TreeShape) -> Vec<TreeShape> {
    config
        .params
        .shapes
        .clone()
        .unwrap_or_else(|| vec![default])
}

fn run_graph_audit(config: &ExperimentConfig) -> Result<Rows<GraphAudit>, ExperimentError> {
    let seeds = config.params.seeds.unwrap_or(1);
    let mut rows = Vec::new();
    let mut violations = Vec::new();
    for n in heights(config) {
        for k in 0..seeds {
            let seed = unit_seed(config.master_seed, config.kind, &[u64::from(n), k]);
            let audit = GluedTreesGraph::build(n, seed).map_err(lift)?.audit();
            if !audit.ok {
                violations.push(format!(
                    "graph n={n} seed={seed} failed its structural audit"
                ));
            }
            rows.push(audit);
        }
    }
    Ok((rows, violations))
}

fn run_embed_exact(config: &ExperimentConfig) -> Result<Rows<ExactRow>, ExperimentError> {
    let graphs = config.params.seeds.unwrap_or(1);
    let mut rows = Vec::new();
    for n in heights(config) {
        for gi in 0..graphs {
            let graph_seed = unit_seed(config.master_seed, config.kind, &[u64::from(n), gi]);
            let g = GluedTreesGraph::build(n, graph_seed).map_err(lift)?;
            for shape in shapes(config, TreeShape::Path) {
                for t in sizes(config, n) {
                    let tree_seed = unit_seed(
                        config.master_seed,
                        config.kind,
                        &[u64::from(n), gi, shape_index(shape), t],
                    );
                    let tree = make_tree(shape, t as usize, tree_seed).map_err(lift)?;
                    let p = enumerate_win_probability(&g, &tree).map_err(lift)?;
                    rows.push(ExactRow {
                        n,
                        shape,
                        t,
                        graph_index: gi,
                        graph_seed,
                        probability: p.to_string(),
                        probability_f64: p.to_f64().unwrap_or(f64::NAN),
                    });
                }
            }
        }
    }
    Ok((rows, Vec::new()))
}

fn tree_json(tree: &crate::tree::RootedTree) -> String {
    serde_json::to_string(tree).expect("tree serializes")
}

fn run_embed_mc(config: &ExperimentConfig) -> Result<Rows<McRow>, ExperimentError> {
    let p = &config.params;
    let trees = p.trees.unwrap_or(1);
    let (gt, et) = (p.graph_trials.unwrap_or(1), p.embed_trials.unwrap_or(1));
    let mut rows = Vec::new();
    let mut violations = Vec::new();
    for n in heights(config) {
        for shape in shapes(config, TreeShape::RandomAttach) {
            for t in sizes(config, n) {
                let bound = total_win_bound(t, n).ok();
                for k in 0..trees {
                    let path = [u64::from(n), shape_index(shape), t, k];
                    let seed = unit_seed(config.master_seed, config.kind, &path);
                    let tree = make_tree(shape, t as usize, seed).map_err(lift)?;
                    let e = estimate_expected_win(n, &tree, gt, et, seed).map_err(lift)?;
                    let checked = t <= floor_pow2_root(n, 3);
                    let ok = match (&bound, checked) {
                        (Some(b), true) => e.ci99_upper <= b.total,
                        _ => true,
                    };
                    if !ok {
                        violations.push(format!(
                            "embed-mc n={n} shape={shape} t={t} tree={k}: ci99_upper {} > bound {}",
                            e.ci99_upper,
                            bound.map_or(f64::NAN, |b| b.total)
                        ));
                    }
                    rows.push(McRow {
                        n,
                        shape,
                        t,
                        tree_index: k,
                        tree: tree_json(&tree),
                        seed,
                        trials: e.trials,
                        successes: e.successes,
                        mean: e.mean,
                        stderr: e.stderr,
                        ci99_upper: e.ci99_upper,
                        bound_total: bound.map(|b| b.total),
                        bound_vacuous: bound.map(|b| b.vacuous),
                        checked,
                        ok,
                    });
                }
            }
        }
    }
    Ok((rows, violations))
}

/// `2^{n+2} * pair_bound_both_sides(n, t) + ancestor_sum(n, t)`.
pub fn pair_limit(n: u32, t: u64) -> Result<f64, Error> {
    Ok(
        2f64.powi(n as i32 + 2) * bounds::pair_bound_both_sides(n, t)?
            + bounds::ancestor_sum(n, t)?,
    )
}

fn run_pair_audit(config: &ExperimentConfig) -> Result<Rows<PairRow>, ExperimentError> {
    let p = &config.params;
    let trees = p.trees.unwrap_or(1);
    let (gt, et) = (p.graph_trials.unwrap_or(1), p.embed_trials.unwrap_or(1));
    let mut rows = Vec::new();
    let mut violations = Vec::new();
    for n in heights(config) {
        for shape in shapes(config, TreeShape::RandomAttach) {
            for t in sizes(config, n) {
                let limit = pair_limit(n, t).map_err(lift)?;
                for k in 0..trees {
                    let path = [u64::from(n), shape_index(shape), t, k];
                    let seed = unit_seed(config.master_seed, config.kind, &path);
                    let tree = make_tree(shape, t as usize, seed).map_err(lift)?;
                    let audit = improper_pair_frequency(n, &tree, gt, et, seed).map_err(lift)?;
                    let union_ok =
                        audit.pair_sum >= audit.improper.mean - 3.0 * audit.improper.stderr;
                    if !union_ok {
                        violations.push(format!(
                            "pair-audit n={n} shape={shape} t={t} tree={k}: pair sum {} < improper {}",
                            audit.pair_sum, audit.improper.mean
                        ));
                    }
                    for (&(a, b), e) in &audit.pairs {
                        let ok = e.ci99_upper <= limit;
                        if !ok {
                            violations.push(format!(
                                "pair-audit n={n} t={t} tree={k} pair ({a},{b}): ci99_upper {} > {limit}",
                                e.ci99_upper
                            ));
                        }
                        rows.push(PairRow {
                            n,
                            shape,
                            t,
                            tree_index: k,
                            a: a as u64,
                            b: b as u64,
                            trials: e.trials,
                            successes: e.successes,
                            mean: e.mean,
                            ci99_upper: e.ci99_upper,
                            pair_limit: limit,
                            improper_mean: audit.improper.mean,
                            improper_stderr: audit.improper.stderr,
                            pair_sum: audit.pair_sum,
                            ok: ok && union_ok,
                        });
                    }
                }
            }
        }
    }
    Ok((rows, violations))
}

/// Rows of the bounds table for each `n` and `t` (default `floor(2^{n/3})`).
pub fn bounds_rows(ns: &[u32], ts: Option<&[u64]>) -> Result<Vec<BoundsRow>, Error> {
    let mut rows = Vec::new();
    for &n in ns {
        let default = [floor_pow2_root(n, 3)];
        for &t in ts.unwrap_or(&default) {
            rows.push(total_win_bound(t, n)?.into());
        }
    }
    Ok(rows)
}

fn run_bounds_table(config: &ExperimentConfig) -> Result<Rows<BoundsRow>, ExperimentError> {
    let ts = config.params.t.as_ref().map(|s| s.values());
    Ok((bounds_rows(&heights(config), ts.as_deref())?, Vec::new()))
}

fn budgets(config: &ExperimentConfig, n: u32) -> Vec<u64> {
    match &config.params.budget {
        Some(set) => set.values(),
        None => vec![floor_pow2_root(n, 3)],
    }
}

fn run_strategy_sweep(config: &ExperimentConfig) -> Result<Rows<SweepRow>, ExperimentError> {
    let episodes = config.params.episodes.unwrap_or(1);
    let ids: Vec<String> = config
        .params
        .strategies
        .clone()
        .unwrap_or_else(|| STRATEGY_IDS.iter().map(|s| s.to_string()).collect());
    let id_refs: Vec<&str> = ids.iter().map(String::as_str).collect();
    let mut rows = Vec::new();
    let mut violations = Vec::new();
    for n in heights(config) {
        for budget in budgets(config, n) {
            let seed = unit_seed(config.master_seed, config.kind, &[u64::from(n), budget]);
            let estimates = success_rates(n, &id_refs, budget, episodes, seed).map_err(lift)?;
            let bound = total_win_bound(budget + 1, n).ok().map(|b| b.total);
            for (id, e) in id_refs.iter().zip(&estimates) {
                let ok = bound.is_none_or(|b| e.ci99_upper <= b);
                if !ok {
                    violations.push(format!(
                        "strategy-sweep n={n} budget={budget} {id}: ci99_upper {} > bound {}",
                        e.ci99_upper,
                        bound.unwrap_or(f64::NAN)
                    ));
                }
                let r = StrategyRecord::new(n, id, budget, seed, e);
                rows.push(SweepRow {
                    n: r.n,
                    strategy_id: r.strategy_id,
                    budget: r.budget,
                    episodes: r.episodes,
                    successes: r.successes,
                    mean: r.mean,
                    ci99_upper: r.ci99_upper,
                    master_seed: r.master_seed,
                    bound_total: bound,
                    ok,
                });
            }
        }
    }
    Ok((rows, violations))
}

fn run_worst_tree(config: &ExperimentConfig) -> Result<Rows<WorstTreeRow>, ExperimentError> {
    let p = &config.params;
    let candidates = p.candidates.unwrap_or(1);
    let (gt, et) = (p.graph_trials.unwrap_or(1), p.embed_trials.unwrap_or(1));
    let mut rows = Vec::new();
    let mut violations = Vec::new();
    for n in heights(config) {
        for t in sizes(config, n) {
            let seed = unit_seed(config.master_seed, config.kind, &[u64::from(n), t]);
            let best = search_worst_tree(n, t as usize, candidates, gt, et, seed).map_err(lift)?;
            let bound = total_win_bound(t, n).ok().map(|b| b.total);
            let e = best.estimate;
            let checked = t <= floor_pow2_root(n, 3);
            let ok = match (bound, checked) {
                (Some(b), true) => e.mean <= b + 3.0 * e.stderr,
                _ => true,
            };
            if !ok {
                violations.push(format!(
                    "worst-tree-search n={n} t={t}: mean {} > bound {}",
                    e.mean,
                    bound.unwrap_or(f64::NAN)
                ));
            }
            rows.push(WorstTreeRow {
                n,
                t,
                candidates,
                best_index: best.candidate_index,
                shape: best.shape,
                tree: tree_json(&best.tree),
                trials: e.trials,
                successes: e.successes,
                mean: e.mean,
                stderr: e.stderr,
                ci99_upper: e.ci99_upper,
                bound_total: bound,
                checked,
                ok,
            });
        }
    }
    Ok((rows, violations))
}

/// A fixed probe of an oracle: mostly a random walk over returned names,
/// with every tenth query (on average) a uniformly random name from the
/// full name space. Deterministic in `script_seed`.
pub fn oracle_script(oracle: &mut Oracle, queries: u64, script_seed: u64) -> Transcript {
    let mut rng = Stream::new(script_seed).derive_named("oracle-script");
    let space = 1u64 << name_bits(oracle.graph().n());
    let mut transcript = Transcript::new();
    let mut current = oracle.entrance_name();
    for _ in 0..queries {
        let name = if rng.below(10) == 0 {
            VertexName(rng.below(space))
        } else {
            current
        };
        let response = oracle.query(name);
        let nbrs = response.neighbors();
        if !nbrs.is_empty() {
            current = nbrs[rng.below(nbrs.len() as u64) as usize];
        }
        transcript.push(name, response);
    }
    transcript
}
