//! Batch experiment runners behind the `gwbrw` binary.
//!
//! Every runner consumes an [`ExperimentConfig`] and produces a [`Report`]:
//! one row per statistic, and every asserted row carries its numeric bound
//! together with the decision rule spelled out in text. Reports serialize to
//! CSV or NDJSON behind `#`-prefixed metadata lines (tool version, master
//! seed, config hash).
//!
//! Replicates draw their randomness from per-replicate streams keyed by the
//! master seed, and parallel schedules collect results in replicate order, so
//! a fixed config and seed produce byte-identical serialized output at any
//! worker count. Per-row wall-clock timings are kept in memory and on stderr
//! only; they never enter the serialized artifact.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brw::{contract_to_b, free_range, graph_distance_trie, sample_heights};
use crate::coupling::{coupled_ranges, reflect_path};
use crate::gw_sampler::{
    sample_gw_conditioned, scaling_a_n, DistributionSpec, OffspringDistribution,
};
use crate::metrics::four_point_check;
use crate::snakes::{
    brownian_excursion, brownian_snake_given_h, cactus_metric, contour_identity_check,
    contraction_gap_check, default_dr, measure_comparisons, range_deviation_check,
    spatial_contour, GridSnake,
};
use crate::stats::{chi_square_two_sample, fnv1a_hash, ks_two_sample, replicate_rng};
use crate::tree_core::{contour_vertices, height_process, scc_plus, truncate_pointed, PointedTree};
use crate::walk_estimates::{
    biased_tail_bound, biased_tail_mc, birth_death_empirical, birth_death_table, estimate_c_ipgw,
    estimate_c_ipgw_scales, estimate_c_lln, green_exact, green_mc, hitting_laplace_exact,
    hitting_laplace_mc, no_return_exact, no_return_mc, ruin_exact, ruin_mc,
};

/// Error surface of the runners: configuration problems map to exit code 2,
/// everything else to exit code 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

fn config_err<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Config(msg.into()))
}

/// Seed streams for the runner sections. Sections never touch the raw master
/// seed: each derives its own sub-master, so replicate indices can restart
/// from zero in every section without colliding streams.
mod stream {
    pub const WALK_FORMULAS: u64 = 10; // +0 / +1 for the two arities
    pub const BIASED_TAIL: u64 = 12;
    pub const IDENTITIES: u64 = 13;
    pub const FOUR_POINT: u64 = 14;
    pub const COUPLING: u64 = 15; // + cutoff index
    pub const REFLECT_IDENTITY: u64 = 18;
    pub const REFLECT_MARGINAL: u64 = 19;
    pub const LLN_UNIT: u64 = 20;
    pub const LLN_SIZES: u64 = 21; // + size index
    pub const LLN_IPGW: u64 = 28;
    pub const CONVERGENCE: u64 = 30; // + size index
    pub const CONV_LIMIT: u64 = 39;
    pub const MARGINAL_DISCRETE: u64 = 40;
    pub const MARGINAL_LIMIT: u64 = 45;
    pub const SCC: u64 = 50;
    pub const SNAKE_DEMO: u64 = 60;
}

fn section_seed(master: u64, tag: u64) -> u64 {
    replicate_rng(master, tag).gen()
}

// ---------------------------------------------------------------------------
// Configuration

/// Numeric thresholds shared by the runners. Every asserted report row quotes
/// the threshold it applied.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Two-sample tests assert p-value strictly above this.
    pub p_threshold: f64,
    /// Monte Carlo vs exact: |mean - exact| <= se_band * stderr.
    pub se_band: f64,
    /// Relative agreement demanded of the two largest-size range-density
    /// estimates.
    pub rel_gap: f64,
    /// Exactness tolerance for metric identities.
    pub metric_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            p_threshold: 0.01,
            se_band: 3.0,
            rel_gap: 0.02,
            metric_tol: 1e-9,
        }
    }
}

pub const DEFAULT_SEED: u64 = 1_000_003;

/// One experiment run, fully determined by this value plus the master seed.
/// Zero or empty fields are placeholders filled by the per-experiment
/// defaults of [`ExperimentConfig::apply_experiment_defaults`].
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Experiment name; filled from the subcommand when empty, rejected when
    /// it contradicts the subcommand.
    pub experiment: String,
    pub distribution: DistributionSpec,
    /// Arity of the position tree.
    pub b: u32,
    /// Conditioned tree sizes, in row order.
    pub sizes: Vec<usize>,
    /// Replicates per size.
    pub replicates: u64,
    /// Grid resolution for s in [0, 1] (contour pair grids, excursion grids).
    pub grid_m: usize,
    /// Ancestor-spine truncation depth for pointed-tree experiments.
    pub spine_depth: u32,
    /// Window radius of the successor-invariance test.
    pub window_q: i64,
    /// Fixed pair (s1, s2) tracked by the convergence experiment.
    pub pair: [f64; 2],
    /// Coupling cutoff depths.
    pub cutoffs: Vec<u32>,
    /// Master seed. The --seed flag overrides it.
    pub seed: u64,
    pub tolerances: Tolerances,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: String::new(),
            distribution: DistributionSpec::geometric(),
            b: 2,
            sizes: Vec::new(),
            replicates: 0,
            grid_m: 0,
            spine_depth: 0,
            window_q: 2,
            pair: [0.3, 0.7],
            cutoffs: Vec::new(),
            seed: DEFAULT_SEED,
            tolerances: Tolerances::default(),
        }
    }
}

pub const EXPERIMENT_NAMES: [&str; 8] = [
    "exact-checks",
    "lln",
    "estimate-c",
    "convergence",
    "marginal-ks",
    "coupling-check",
    "scc-invariance",
    "snake-demo",
];

impl ExperimentConfig {
    /// The ready-to-run default configuration of one experiment.
    pub fn for_experiment(name: &str) -> Result<ExperimentConfig, CliError> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_experiment_defaults(name)?;
        Ok(cfg)
    }

    /// Fills placeholder fields with the per-experiment defaults and
    /// validates the result.
    pub fn apply_experiment_defaults(&mut self, name: &str) -> Result<(), CliError> {
        if self.experiment.is_empty() {
            self.experiment = name.to_string();
        } else if self.experiment != name {
            return config_err(format!(
                "config is for experiment '{}' but '{}' was requested",
                self.experiment, name
            ));
        }
        let (sizes, replicates, grid_m, spine_depth): (&[usize], u64, usize, u32) = match name {
            "exact-checks" => (&[160], 100_000, 20, 24),
            "lln" => (&[5_000, 20_000, 80_000], 200, 20, 25),
            "estimate-c" => (&[20_000], 300, 20, 25),
            "convergence" => (&[5_000, 40_000], 200, 20, 24),
            "marginal-ks" => (&[20_000], 600, 2_000, 24),
            "coupling-check" => (&[300], 10_000, 20, 24),
            "scc-invariance" => (&[1], 100_000, 20, 24),
            "snake-demo" => (&[1], 1, 40, 24),
            other => return config_err(format!("unknown experiment '{other}'")),
        };
        if self.sizes.is_empty() {
            self.sizes = sizes.to_vec();
        }
        if self.replicates == 0 {
            self.replicates = replicates;
        }
        if self.grid_m == 0 {
            self.grid_m = grid_m;
        }
        if self.spine_depth == 0 {
            self.spine_depth = spine_depth;
        }
        if self.cutoffs.is_empty() {
            self.cutoffs = vec![8, 12];
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !EXPERIMENT_NAMES.contains(&self.experiment.as_str()) {
            return config_err(format!("unknown experiment '{}'", self.experiment));
        }
        self.distribution
            .build()
            .map_err(|e| CliError::Config(format!("distribution: {e}")))?;
        if self.b < 2 {
            return config_err("b must be at least 2");
        }
        if self.sizes.is_empty() || self.sizes.iter().any(|&n| n == 0) {
            return config_err("sizes must be nonempty and positive");
        }
        if self.replicates == 0 {
            return config_err("replicates must be at least 1");
        }
        if self.grid_m < 2 {
            return config_err("grid_m must be at least 2");
        }
        if self.window_q < 0 {
            return config_err("window_q must be nonnegative");
        }
        if (self.spine_depth as i64) < self.window_q + 5 {
            return config_err("spine_depth must be at least window_q + 5");
        }
        let [s1, s2] = self.pair;
        if !(0.0 < s1 && s1 < s2 && s2 < 1.0) {
            return config_err("pair must satisfy 0 < s1 < s2 < 1");
        }
        if self.cutoffs.is_empty() || self.cutoffs.iter().any(|&c| c == 0) {
            return config_err("cutoffs must be nonempty and positive");
        }
        let t = &self.tolerances;
        if !(t.p_threshold > 0.0 && t.p_threshold < 1.0) {
            return config_err("p_threshold must lie in (0, 1)");
        }
        if !(t.se_band > 0.0) || !(t.rel_gap > 0.0) || !(t.metric_tol >= 0.0) {
            return config_err("se_band and rel_gap must be positive, metric_tol nonnegative");
        }
        Ok(())
    }

    fn mu(&self) -> Result<OffspringDistribution, CliError> {
        self.distribution
            .build()
            .map_err(|e| CliError::Config(format!("distribution: {e}")))
    }

    /// Hash of the canonical JSON form, stamped into report metadata.
    pub fn hash(&self) -> u64 {
        let canonical = serde_json::to_string(self).expect("config serializes");
        fnv1a_hash(canonical.as_bytes())
    }
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Clone, Debug, Serialize)]
pub struct ReportRow {
    pub experiment: String,
    pub statistic: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub bound: Option<f64>,
    /// `None` marks a diagnostic row that asserts nothing.
    pub pass: Option<bool>,
    /// The decision rule applied, or the reading aid for diagnostic rows.
    pub rule: String,
    /// Wall-clock attribution; stderr-only, never serialized (identical
    /// inputs must give identical artifacts).
    #[serde(skip)]
    pub runtime_ms: u64,
}

#[derive(Clone, Debug)]
pub struct Report {
    pub experiment: String,
    pub rows: Vec<ReportRow>,
}

/// Metadata stamped on serialized reports.
#[derive(Clone, Copy, Debug)]
pub struct RunMeta {
    pub seed: u64,
    pub config_hash: u64,
}

impl Report {
    pub fn new(experiment: &str) -> Report {
        Report {
            experiment: experiment.to_string(),
            rows: Vec::new(),
        }
    }

    fn info(&mut self, statistic: String, value: f64, stderr: Option<f64>, rule: &str, ms: u64) {
        self.rows.push(ReportRow {
            experiment: self.experiment.clone(),
            statistic,
            value,
            stderr,
            bound: None,
            pass: None,
            rule: rule.to_string(),
            runtime_ms: ms,
        });
    }

    #[allow(clippy::too_many_arguments)]
    fn check(
        &mut self,
        statistic: String,
        value: f64,
        stderr: Option<f64>,
        bound: f64,
        pass: bool,
        rule: String,
        ms: u64,
    ) {
        self.rows.push(ReportRow {
            experiment: self.experiment.clone(),
            statistic,
            value,
            stderr,
            bound: Some(bound),
            pass: Some(pass),
            rule,
            runtime_ms: ms,
        });
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass != Some(false))
    }

    pub fn failures(&self) -> Vec<&ReportRow> {
        self.rows
            .iter()
            .filter(|r| r.pass == Some(false))
            .collect()
    }

    pub fn total_runtime_ms(&self) -> u64 {
        self.rows.iter().map(|r| r.runtime_ms).sum()
    }

    pub fn row(&self, statistic: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.statistic == statistic)
    }

    pub fn to_csv(&self, meta: &RunMeta) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# gwbrw v{} report", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "# experiment={}", self.experiment);
        let _ = writeln!(out, "# seed={}", meta.seed);
        let _ = writeln!(out, "# config_hash={:016x}", meta.config_hash);
        out.push_str("experiment,statistic,value,stderr,bound,pass,rule\n");
        for r in &self.rows {
            let stderr = r.stderr.map(|v| v.to_string()).unwrap_or_default();
            let bound = r.bound.map(|v| v.to_string()).unwrap_or_default();
            let pass = match r.pass {
                Some(true) => "pass",
                Some(false) => "fail",
                None => "",
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                csv_field(&r.experiment),
                csv_field(&r.statistic),
                r.value,
                stderr,
                bound,
                pass,
                csv_field(&r.rule)
            );
        }
        out
    }

    pub fn to_ndjson(&self, meta: &RunMeta) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{{\"meta\":{{\"tool\":\"gwbrw\",\"version\":\"{}\",\"experiment\":\"{}\",\"seed\":{},\"config_hash\":\"{:016x}\"}}}}",
            env!("CARGO_PKG_VERSION"),
            self.experiment,
            meta.seed,
            meta.config_hash
        );
        for r in &self.rows {
            let _ = writeln!(out, "{}", serde_json::to_string(r).expect("row serializes"));
        }
        out
    }
}

/// Commas would break the CSV layout; fields are composed without them and
/// this keeps accidental ones harmless.
fn csv_field(s: &str) -> String {
    if s.contains(',') {
        s.replace(',', ";")
    } else {
        s.to_string()
    }
}

struct Stopwatch(Instant);

impl Stopwatch {
    fn new() -> Stopwatch {
        Stopwatch(Instant::now())
    }

    /// Milliseconds since the previous lap.
    fn lap(&mut self) -> u64 {
        let now = Instant::now();
        let ms = now.duration_since(self.0).as_millis() as u64;
        self.0 = now;
        ms
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    assert!(!v.is_empty());
    v.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    v[v.len() / 2]
}

/// Ordered parallel map over replicate indices: the output vector is always
/// in index order, so downstream folds are schedule-independent.
fn par_replicates<T, F>(n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

// ---------------------------------------------------------------------------
// exact-checks

pub fn run_exact_checks(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let mut report = Report::new("exact-checks");
    if cfg.replicates == 0 {
        return Ok(report);
    }
    let mu = cfg.mu()?;
    let n = cfg.replicates;
    let band = cfg.tolerances.se_band;
    let mut sw = Stopwatch::new();

    for (bi, &b) in [2u32, 3].iter().enumerate() {
        let mut rng = replicate_rng(section_seed(cfg.seed, stream::WALK_FORMULAS + bi as u64), 0);
        for p in 0..=3u32 {
            let exact = green_exact(b, p);
            let (mc, se) = green_mc(b, p, n, 40, &mut rng);
            report.check(
                format!("green b={b} p={p}"),
                mc,
                Some(se),
                exact,
                (mc - exact).abs() <= band * se,
                format!("|mc - exact| <= {band} stderr; exact visit count 2b/(b-1) b^-p"),
                sw.lap(),
            );
        }
        for ell in 1..=3u32 {
            let exact = ruin_exact(b, ell);
            let (mc, se) = ruin_mc(b, ell, 40, n, &mut rng);
            report.check(
                format!("ruin b={b} ell={ell}"),
                mc,
                Some(se),
                exact,
                (mc - exact).abs() <= band * se,
                format!("|mc - exact| <= {band} stderr; exact hitting probability b^-ell"),
                sw.lap(),
            );
        }
        {
            let exact = no_return_exact(b);
            let (mc, se) = no_return_mc(b, 40, n, &mut rng);
            report.check(
                format!("no_return b={b}"),
                mc,
                Some(se),
                exact,
                (mc - exact).abs() <= band * se,
                format!("|mc - exact| <= {band} stderr; exact escape probability (b-1)/(2b)"),
                sw.lap(),
            );
        }
        for s in [0.1f64, 0.5, 1.0] {
            let exact = hitting_laplace_exact(s);
            let (mc, se) = hitting_laplace_mc(s, n, 200, &mut rng);
            report.check(
                format!("hitting_laplace b={b} s={s}"),
                mc,
                Some(se),
                exact,
                (mc - exact).abs() <= band * se,
                format!(
                    "|mc - exact| <= {band} stderr; passages past 200 steps contribute 0 \
                     (downward bias below e^-200s)"
                ),
                sw.lap(),
            );
        }
        {
            let table = birth_death_table(b);
            let (deep, root) = birth_death_empirical(b, n, 20_000, &mut rng);
            let total = deep.iter().sum::<u64>() as f64;
            let cells = [
                ("deeper", deep[0], table.deeper),
                ("rejoin", deep[1], table.rejoin),
                ("hold", deep[2], table.hold),
            ];
            let mut ms = sw.lap();
            for (label, count, expect) in cells {
                let p_hat = count as f64 / total;
                let se = (expect * (1.0 - expect) / total).sqrt();
                report.check(
                    format!("birth_death_{label} b={b}"),
                    p_hat,
                    Some(se),
                    expect,
                    (p_hat - expect).abs() <= band * se,
                    format!("|frequency - table entry| <= {band} binomial stderr"),
                    std::mem::take(&mut ms),
                );
            }
            let n_root = (root[0] + root[1]) as f64;
            let p_hat = root[0] as f64 / n_root;
            let se = (table.root_deeper * table.root_hold / n_root).sqrt();
            report.check(
                format!("birth_death_root_deeper b={b}"),
                p_hat,
                Some(se),
                table.root_deeper,
                (p_hat - table.root_deeper).abs() <= band * se,
                format!("|frequency - table entry| <= {band} binomial stderr"),
                sw.lap(),
            );
        }
    }

    {
        let mut rng = replicate_rng(section_seed(cfg.seed, stream::BIASED_TAIL), 0);
        let (n1, n2) = (20u64, 40u64);
        for (lambda, ell) in [(2.0f64, 6u32), (2.0, 10), (1.5, 10)] {
            let bound = biased_tail_bound(lambda, ell, n1, n2).min(1.0);
            let freq = biased_tail_mc(cfg.b, lambda, ell, n1, n2, n, &mut rng);
            report.check(
                format!("biased_tail lambda={lambda} ell={ell}"),
                freq,
                None,
                bound,
                freq <= bound,
                format!(
                    "height-excess frequency <= (n2-n1)(lambda-1)/(lambda^ell - 1) \
                     at n1={n1} n2={n2}"
                ),
                sw.lap(),
            );
        }
    }

    identity_sweep_rows(&mut report, cfg, &mu, &mut sw)?;
    four_point_row(&mut report, cfg, &mu, &mut sw)?;
    coupling_rows(&mut report, cfg, &mu, 300, n.min(10_000), &mut sw)?;
    Ok(report)
}

/// Deterministic identity checks on sampled trees: snake metric vs trie
/// metric, contraction gap parity, occupation-measure bounds, and the
/// range-growth deviation inequality.
fn identity_sweep_rows(
    report: &mut Report,
    cfg: &ExperimentConfig,
    mu: &OffspringDistribution,
    sw: &mut Stopwatch,
) -> Result<(), CliError> {
    const TREES: u64 = 30;
    for (si, &size) in cfg.sizes.iter().enumerate() {
        let seed = section_seed(cfg.seed, stream::IDENTITIES + si as u64);
        let mut max_defect = 0u64;
        let mut gap_failures = 0u64;
        let mut measure_failures = 0u64;
        let mut deviation_failures = 0u64;
        for rep in 0..TREES {
            let mut rng = replicate_rng(seed, rep);
            let tree = sample_gw_conditioned(mu, size, &mut rng, 100_000)
                .map_err(|e| CliError::Runtime(format!("conditioned sampling: {e}")))?;
            let hbrw = sample_heights(tree, true, &mut rng);
            let snake = spatial_contour(&hbrw);
            let free = free_range(&hbrw, &mut rng);
            let con = contract_to_b(&free, cfg.b, &mut rng);
            max_defect = max_defect.max(contour_identity_check(&snake, &free));
            if !contraction_gap_check(&snake, &con).consistent {
                gap_failures += 1;
            }
            if !measure_comparisons(&snake, &free).within_bounds() {
                measure_failures += 1;
            }
            for c in [0.25f64, 0.6] {
                let rd = range_deviation_check(&snake, &free, c);
                if !(rd.deviation_ok && rd.coupling_ok && rd.exact_ok.unwrap_or(true)) {
                    deviation_failures += 1;
                }
            }
        }
        let ms = sw.lap();
        report.check(
            format!("contour_identity_max_defect n={size}"),
            max_defect as f64,
            None,
            0.0,
            max_defect == 0,
            format!("snake metric equals the free-range trie metric on all contour pairs ({TREES} trees)"),
            ms,
        );
        report.check(
            format!("contraction_gap_failures n={size}"),
            gap_failures as f64,
            None,
            0.0,
            gap_failures == 0,
            "contracting labels shortens distances by even amounts only".to_string(),
            0,
        );
        report.check(
            format!("measure_bound_failures n={size}"),
            measure_failures as f64,
            None,
            0.0,
            measure_failures == 0,
            "contour, interpolated and doubled occupation measures stay within their couplings"
                .to_string(),
            0,
        );
        report.check(
            format!("range_deviation_failures n={size}"),
            deviation_failures as f64,
            None,
            0.0,
            deviation_failures == 0,
            "range growth deviation and slot-coupling inequalities hold at c in {0.25, 0.6}"
                .to_string(),
            0,
        );
    }
    Ok(())
}

/// Four-point condition of the discrete snake metric, exhaustively over all
/// quadruples of a full contour grid.
fn four_point_row(
    report: &mut Report,
    cfg: &ExperimentConfig,
    mu: &OffspringDistribution,
    sw: &mut Stopwatch,
) -> Result<(), CliError> {
    const TREES: u64 = 12;
    const SIZE: usize = 48;
    let seed = section_seed(cfg.seed, stream::FOUR_POINT);
    let mut violations = 0usize;
    for rep in 0..TREES {
        let mut rng = replicate_rng(seed, rep);
        let tree = sample_gw_conditioned(mu, SIZE, &mut rng, 100_000)
            .map_err(|e| CliError::Runtime(format!("conditioned sampling: {e}")))?;
        let hbrw = sample_heights(tree, true, &mut rng);
        let w: Vec<f64> = hbrw.heights.iter().map(|&h| h as f64).collect();
        let d = crate::metrics::snake_metric_discrete(&hbrw.tree, &w);
        violations += four_point_check(&d, cfg.tolerances.metric_tol).len();
    }
    report.check(
        format!("four_point_violations n={SIZE}"),
        violations as f64,
        None,
        0.0,
        violations == 0,
        format!(
            "snake metrics satisfy the four-point condition at tolerance {} \
             (all quadruples, {TREES} trees)",
            cfg.tolerances.metric_tol
        ),
        sw.lap(),
    );
    Ok(())
}

/// The coupling-bound block shared by `exact-checks` and `coupling-check`:
/// per cutoff, the frequency of range-count discrepancies against the proved
/// bound, plus the pathwise reflection identity on every sampled pair.
fn coupling_rows(
    report: &mut Report,
    cfg: &ExperimentConfig,
    mu: &OffspringDistribution,
    tree_size: usize,
    reps: u64,
    sw: &mut Stopwatch,
) -> Result<(), CliError> {
    for (ci, &cutoff) in cfg.cutoffs.iter().enumerate() {
        let seed = section_seed(cfg.seed, stream::COUPLING + ci as u64);
        let outs: Result<Vec<(bool, bool, u32, f64)>, String> = par_replicates(reps, |rep| {
            let mut rng = replicate_rng(seed, rep);
            let tree = sample_gw_conditioned(mu, tree_size, &mut rng, 100_000)
                .map_err(|e| format!("conditioned sampling: {e}"))?;
            let (pair, rep_report) = coupled_ranges(&tree, cfg.b, cutoff, &mut rng);
            Ok((
                rep_report.violated,
                pair.validate(),
                rep_report.max_discrepancy,
                rep_report.probability_bound,
            ))
        })
        .into_iter()
        .collect();
        let outs = outs.map_err(CliError::Runtime)?;
        let violations = outs.iter().filter(|o| o.0).count();
        let identity_failures = outs.iter().filter(|o| !o.1).count();
        let max_disc = outs.iter().map(|o| o.2).max().unwrap_or(0);
        let bound = outs.first().map(|o| o.3).unwrap_or(1.0);
        let freq = violations as f64 / reps as f64;
        let ms = sw.lap();
        report.check(
            format!("coupling_violation_freq c={cutoff} n={tree_size}"),
            freq,
            None,
            bound,
            freq <= bound,
            "frequency of count discrepancies exceeding the shallow-vertex budget \
             <= 2 b^-cutoff (tree size)^3"
                .to_string(),
            ms,
        );
        report.check(
            format!("coupling_identity_failures c={cutoff} n={tree_size}"),
            identity_failures as f64,
            None,
            0.0,
            identity_failures == 0,
            "reflected heights equal h - I + 1{I odd} vertexwise on every replicate".to_string(),
            0,
        );
        report.info(
            format!("coupling_max_discrepancy c={cutoff} n={tree_size}"),
            max_disc as f64,
            None,
            "largest visited-count gap seen across replicates",
            0,
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// coupling-check

pub fn run_coupling_check(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let mut report = Report::new("coupling-check");
    if cfg.replicates == 0 {
        return Ok(report);
    }
    let mu = cfg.mu()?;
    let mut sw = Stopwatch::new();

    const PATH_LEN: usize = 128;
    {
        let seed = section_seed(cfg.seed, stream::REFLECT_IDENTITY);
        let mismatches: u64 = par_replicates(cfg.replicates, |rep| {
            let mut rng = replicate_rng(seed, rep);
            let mut h = vec![0i64; PATH_LEN + 1];
            for k in 1..=PATH_LEN {
                h[k] = h[k - 1] + if rng.gen::<bool>() { 1 } else { -1 };
            }
            let closed = reflect_path(&h);
            // Hard reflection simulated step by step with the same
            // increments: from zero the chain must go up.
            let mut r = 0i64;
            let mut bad = 0u64;
            for k in 1..=PATH_LEN {
                r = if r == 0 { 1 } else { r + (h[k] - h[k - 1]) };
                if r != closed[k] {
                    bad += 1;
                }
            }
            bad
        })
        .into_iter()
        .sum();
        report.check(
            "reflection_identity_mismatches".to_string(),
            mismatches as f64,
            None,
            0.0,
            mismatches == 0,
            format!(
                "h - I + 1{{I odd}} reproduces the hard-reflected chain pathwise \
                 ({} paths of {PATH_LEN} steps)",
                cfg.replicates
            ),
            sw.lap(),
        );
    }

    {
        let n_ks = cfg.replicates.min(20_000);
        let seed = section_seed(cfg.seed, stream::REFLECT_MARGINAL);
        let pairs: Vec<(f64, f64)> = par_replicates(n_ks, |rep| {
            let mut rng = replicate_rng(seed, rep);
            let mut h = vec![0i64; 301];
            for k in 1..=300 {
                h[k] = h[k - 1] + if rng.gen::<bool>() { 1 } else { -1 };
            }
            let a = *reflect_path(&h).last().unwrap() as f64;
            let mut r = 0i64;
            for _ in 0..300 {
                r = if r == 0 {
                    1
                } else {
                    r + if rng.gen::<bool>() { 1 } else { -1 }
                };
            }
            (a, r as f64)
        });
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let ks = ks_two_sample(&a, &b);
        report.check(
            "reflected_marginal_ks_p".to_string(),
            ks.p_value,
            None,
            cfg.tolerances.p_threshold,
            ks.p_value > cfg.tolerances.p_threshold,
            format!(
                "two-sample KS between the closed-form reflection endpoint and an \
                 independently simulated reflected chain (300 steps, {n_ks} each); \
                 p > {}",
                cfg.tolerances.p_threshold
            ),
            sw.lap(),
        );
    }

    let size = *cfg.sizes.first().expect("validated nonempty");
    coupling_rows(&mut report, cfg, &mu, size, cfg.replicates.min(10_000), &mut sw)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// lln and estimate-c

pub fn run_lln(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let mut report = Report::new("lln");
    if cfg.replicates == 0 {
        return Ok(report);
    }
    let mu = cfg.mu()?;
    let band = cfg.tolerances.se_band;
    let mut sw = Stopwatch::new();

    {
        let unit = estimate_c_lln(&mu, cfg.b, 1, 8, section_seed(cfg.seed, stream::LLN_UNIT));
        report.check(
            "c_hat n=1".to_string(),
            unit.estimate.c_hat,
            Some(unit.estimate.stderr),
            1.0,
            unit.estimate.c_hat == 1.0,
            "single-vertex tree: the range fraction is exactly 1".to_string(),
            sw.lap(),
        );
    }

    let mut medians = Vec::new();
    let mut estimates = Vec::new();
    for (i, &n) in cfg.sizes.iter().enumerate() {
        let seed = section_seed(cfg.seed, stream::LLN_SIZES + i as u64);
        let lln = estimate_c_lln(&mu, cfg.b, n, cfg.replicates, seed);
        let ms = sw.lap();
        report.info(
            format!("c_hat n={n}"),
            lln.estimate.c_hat,
            Some(lln.estimate.stderr),
            "mean range fraction over the replicates",
            ms,
        );
        report.check(
            format!("c_lower_bound n={n}"),
            lln.estimate.c_hat - band * lln.estimate.stderr,
            None,
            0.0,
            lln.estimate.c_hat - band * lln.estimate.stderr > 0.0,
            format!("c_hat - {band} stderr stays positive"),
            0,
        );
        let med = median(lln.deviations.clone());
        report.info(
            format!("deviation_median n={n}"),
            med,
            None,
            "upper median over replicates of max_k |R_k - c_hat k| / n",
            0,
        );
        medians.push(med);
        estimates.push(lln.estimate);
    }

    if cfg.sizes.len() >= 2 {
        let worst_ratio = medians
            .windows(2)
            .map(|w| w[1] / w[0])
            .fold(f64::NEG_INFINITY, f64::max);
        report.check(
            "deviation_median_ratio_max".to_string(),
            worst_ratio,
            None,
            1.0,
            worst_ratio < 1.0,
            "uniform-deviation medians strictly decrease along the size grid".to_string(),
            sw.lap(),
        );
        let last = &estimates[estimates.len() - 1];
        let prev = &estimates[estimates.len() - 2];
        let rel = (last.c_hat - prev.c_hat).abs() / last.c_hat;
        report.check(
            "c_hat_rel_gap".to_string(),
            rel,
            None,
            cfg.tolerances.rel_gap,
            rel <= cfg.tolerances.rel_gap,
            format!(
                "the two largest sizes agree within {} relative",
                cfg.tolerances.rel_gap
            ),
            0,
        );
    }
    if cfg.sizes.len() >= 3 {
        let k = estimates.len();
        let first_drift = (estimates[k - 3].c_hat - estimates[k - 2].c_hat).abs();
        let second_drift = (estimates[k - 2].c_hat - estimates[k - 1].c_hat).abs();
        report.check(
            "c_drift_ratio".to_string(),
            second_drift / first_drift,
            None,
            1.0,
            second_drift < first_drift,
            "consecutive size-step drifts shrink (stabilization)".to_string(),
            0,
        );
    }

    {
        let ipgw = estimate_c_ipgw(
            &mu,
            cfg.b,
            cfg.spine_depth,
            cfg.replicates,
            section_seed(cfg.seed, stream::LLN_IPGW),
        );
        let ms = sw.lap();
        report.info(
            format!("c_hat_ipgw P={}", cfg.spine_depth),
            ipgw.estimate.c_hat,
            Some(ipgw.estimate.stderr),
            "no-revisit frequency in the truncated spine environment",
            ms,
        );
        report.info(
            format!("c_hat_ipgw P={}", 2 * cfg.spine_depth),
            ipgw.deep_estimate.c_hat,
            Some(ipgw.deep_estimate.stderr),
            "same estimator at doubled truncation depth",
            0,
        );
        report.info(
            "ipgw_truncation_drift".to_string(),
            ipgw.drift,
            None,
            "|c_hat(P) - c_hat(2P)|, the empirical truncation allowance",
            0,
        );
        let lln_last = estimates.last().expect("at least one size");
        let joint_se = (ipgw.estimate.stderr.powi(2) + lln_last.stderr.powi(2)).sqrt();
        let gap = (ipgw.estimate.c_hat - lln_last.c_hat).abs();
        let allowed = band * joint_se + ipgw.drift;
        report.check(
            "lln_ipgw_gap".to_string(),
            gap,
            Some(joint_se),
            allowed,
            gap <= allowed,
            format!("cross-estimator gap <= {band} joint stderr + truncation drift"),
            0,
        );
    }
    Ok(report)
}

pub fn run_estimate_c(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let mut report = Report::new("estimate-c");
    if cfg.replicates == 0 {
        return Ok(report);
    }
    let mu = cfg.mu()?;
    let band = cfg.tolerances.se_band;
    let mut sw = Stopwatch::new();

    let mut lln_last = None;
    for (i, &n) in cfg.sizes.iter().enumerate() {
        let seed = section_seed(cfg.seed, stream::LLN_SIZES + i as u64);
        let lln = estimate_c_lln(&mu, cfg.b, n, cfg.replicates, seed);
        let ms = sw.lap();
        report.info(
            format!("c_hat_lln n={n}"),
            lln.estimate.c_hat,
            Some(lln.estimate.stderr),
            "mean range fraction over the replicates",
            ms,
        );
        report.check(
            format!("c_lower_bound n={n}"),
            lln.estimate.c_hat - band * lln.estimate.stderr,
            None,
            0.0,
            lln.estimate.c_hat - band * lln.estimate.stderr > 0.0,
            format!("c_hat - {band} stderr stays positive"),
            0,
        );
        lln_last = Some(lln.estimate);
    }

    let scales = [cfg.spine_depth, 2 * cfg.spine_depth];
    let ipgw = estimate_c_ipgw_scales(
        &mu,
        cfg.b,
        &scales,
        cfg.replicates,
        section_seed(cfg.seed, stream::LLN_IPGW),
    );
    let ms = sw.lap();
    for (scale, est) in scales.iter().zip(&ipgw) {
        report.info(
            format!("c_hat_ipgw P={scale}"),
            est.c_hat,
            Some(est.stderr),
            "no-revisit frequency in the truncated spine environment",
            ms / 2,
        );
    }
    report.check(
        "ipgw_monotone".to_string(),
        (ipgw[0].c_hat - ipgw[1].c_hat).max(0.0),
        None,
        0.0,
        ipgw[0].c_hat >= ipgw[1].c_hat,
        "coupled truncation estimates are nonincreasing in depth".to_string(),
        0,
    );
    let drift = (ipgw[0].c_hat - ipgw[1].c_hat).abs();
    report.info(
        "ipgw_truncation_drift".to_string(),
        drift,
        None,
        "|c_hat(P) - c_hat(2P)|, the empirical truncation allowance",
        0,
    );
    let lln_last = lln_last.expect("at least one size");
    let joint_se = (ipgw[0].stderr.powi(2) + lln_last.stderr.powi(2)).sqrt();
    let gap = (ipgw[0].c_hat - lln_last.c_hat).abs();
    let allowed = band * joint_se + drift;
    report.check(
        "lln_ipgw_gap".to_string(),
        gap,
        Some(joint_se),
        allowed,
        gap <= allowed,
        format!("cross-estimator gap <= {band} joint stderr + truncation drift"),
        0,
    );
    Ok(report)
}

// ---------------------------------------------------------------------------
// convergence

/// Grid resolution of the limit excursion behind the fixed-pair law.
const LIMIT_EXCURSION_M: usize = 2_000;

struct ConvergenceRep {
    sup_diff: f64,
    fixed_pair: f64,
    dstar_violations: u64,
}

pub fn run_convergence(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let mut report = Report::new("convergence");
    if cfg.replicates == 0 {
        return Ok(report);
    }
    let mu = cfg.mu()?;
    let m = cfg.grid_m;
    let [s1, s2] = cfg.pair;
    let mut sw = Stopwatch::new();

    let mut sup_medians = Vec::new();
    let mut pair_samples: Vec<Vec<f64>> = Vec::new();
    for (i, &n) in cfg.sizes.iter().enumerate() {
        let seed = section_seed(cfg.seed, stream::CONVERGENCE + i as u64);
        // Labels move by one per generation, so snake distances grow like the
        // square root of the tree height: the metric normalization is
        // sqrt(a_n), not a_n.
        let scale = scaling_a_n(&mu, n).sqrt();
        let outs: Result<Vec<ConvergenceRep>, String> = par_replicates(cfg.replicates, |rep| {
            let mut rng = replicate_rng(seed, rep);
            let tree = sample_gw_conditioned(&mu, n, &mut rng, 100_000)
                .map_err(|e| format!("conditioned sampling: {e}"))?;
            let hbrw = sample_heights(tree, true, &mut rng);
            let snake = spatial_contour(&hbrw);
            let free = free_range(&hbrw, &mut rng);
            let con = contract_to_b(&free, cfg.b, &mut rng);
            let dur = snake.duration();
            let slot = |s: f64| ((dur as f64 * s).floor() as usize).min(dur);
            let grid: Vec<usize> = (0..=m).map(|j| slot(j as f64 / m as f64)).collect();
            let mut sup = 0i64;
            let mut violations = 0u64;
            for a in 0..grid.len() {
                for bidx in a + 1..grid.len() {
                    let (ka, kb) = (grid[a], grid[bidx]);
                    let d_snake = snake.endpoint_distance(ka, kb);
                    let d_con =
                        graph_distance_trie(&con, snake.visit(ka), snake.visit(kb)) as i64;
                    if d_con > d_snake {
                        violations += 1;
                    }
                    sup = sup.max(d_snake - d_con);
                }
            }
            let fixed = snake.endpoint_distance(slot(s1), slot(s2)) as f64 / scale;
            Ok(ConvergenceRep {
                sup_diff: sup as f64 / scale,
                fixed_pair: fixed,
                dstar_violations: violations,
            })
        })
        .into_iter()
        .collect();
        let outs = outs.map_err(CliError::Runtime)?;
        let ms = sw.lap();
        let med = median(outs.iter().map(|o| o.sup_diff).collect());
        let violations: u64 = outs.iter().map(|o| o.dstar_violations).sum();
        report.info(
            format!("sup_diff_median n={n}"),
            med,
            None,
            "upper median over replicates of the grid sup of (snake - contracted) distance / sqrt(a_n)",
            ms,
        );
        report.check(
            format!("dstar_exceeds_d n={n}"),
            violations as f64,
            None,
            0.0,
            violations == 0,
            "the contracted range metric never exceeds the snake metric (all grid pairs)"
                .to_string(),
            0,
        );
        sup_medians.push(med);
        pair_samples.push(outs.into_iter().map(|o| o.fixed_pair).collect());
    }

    for (i, w) in pair_samples.windows(2).enumerate() {
        let ks = ks_two_sample(&w[0], &w[1]);
        let (na, nb) = (cfg.sizes[i], cfg.sizes[i + 1]);
        report.info(
            format!("fixed_pair_drift_D n={na}..{nb}"),
            ks.statistic,
            None,
            "two-sample KS statistic between consecutive sizes at the fixed pair (diagnostic)",
            sw.lap(),
        );
        report.info(
            format!("fixed_pair_drift_p n={na}..{nb}"),
            ks.p_value,
            None,
            "p-value of the drift diagnostic above",
            0,
        );
    }
    if sup_medians.len() >= 2 {
        let worst_ratio = sup_medians
            .windows(2)
            .map(|w| w[1] / w[0])
            .fold(f64::NEG_INFINITY, f64::max);
        report.check(
            "sup_diff_ratio_max".to_string(),
            worst_ratio,
            None,
            1.0,
            worst_ratio < 1.0,
            "sup-difference medians strictly decrease along the size grid".to_string(),
            sw.lap(),
        );
    }

    if mu.variance().is_some() {
        let mf = LIMIT_EXCURSION_M as f64;
        for s in cfg.pair {
            if ((s * mf).round() - s * mf).abs() > 1e-9 {
                return config_err(format!(
                    "pair entry {s} does not sit on the 1/{LIMIT_EXCURSION_M} limit grid"
                ));
            }
        }
        let seed = section_seed(cfg.seed, stream::CONV_LIMIT);
        let limit: Vec<f64> = par_replicates(cfg.replicates, |rep| {
            let mut rng = replicate_rng(seed, rep);
            reflected_cactus_pair_sample(s1, s2, LIMIT_EXCURSION_M, &mut rng)
        });
        let discrete = pair_samples.last().expect("at least one size");
        let n_max = *cfg.sizes.last().expect("nonempty");
        let ks = ks_two_sample(discrete, &limit);
        let ms = sw.lap();
        report.info(
            format!("fixed_pair_cactus_D n={n_max}"),
            ks.statistic,
            None,
            "KS statistic of the discrete fixed-pair law against the reflected cactus pair law",
            ms,
        );
        report.check(
            format!("fixed_pair_cactus_ks_p n={n_max}"),
            ks.p_value,
            None,
            cfg.tolerances.p_threshold,
            ks.p_value > cfg.tolerances.p_threshold,
            format!(
                "two-sample KS of d_n(s1,s2) against the simulated reflected cactus \
                 pair marginal; p > {}",
                cfg.tolerances.p_threshold
            ),
            0,
        );
    }
    Ok(report)
}

/// One sample of the reflected cactus distance between two fixed times of the
/// Brownian snake over the excursion lifetime.
///
/// The lifetime is an excursion on a grid of `m` steps; below the window
/// minimum v* the two snake paths coincide, so only the shared value V =
/// W(v*) ~ N(0, v*) and the two conditionally independent tails matter. Each
/// tail contributes its endpoint and its running minimum of |W|, drawn
/// exactly: endpoint first, then the bridge minimum given the endpoint by
/// inverting P(min <= x) = exp(-2(a-x)(b-x)/len).
fn reflected_cactus_pair_sample<R: Rng + ?Sized>(s1: f64, s2: f64, m: usize, rng: &mut R) -> f64 {
    let e = brownian_excursion(m, rng);
    let i1 = (s1 * m as f64).round() as usize;
    let i2 = (s2 * m as f64).round() as usize;
    let vstar = e[i1..=i2].iter().fold(f64::INFINITY, |a, &x| a.min(x));
    let z: f64 = rng.sample(StandardNormal);
    let v = z * vstar.sqrt();
    let (w1, min1) = reflected_tail(v, e[i1] - vstar, rng);
    let (w2, min2) = reflected_tail(v, e[i2] - vstar, rng);
    (w1 - min1.min(min2)) + (w2 - min1.min(min2))
}

/// Endpoint magnitude and minimum of |W| along one Brownian tail of the given
/// length started at `v`. A sign change forces the minimum to zero; otherwise
/// the bridge-minimum of the path (or of its mirror image) applies.
fn reflected_tail<R: Rng + ?Sized>(v: f64, len: f64, rng: &mut R) -> (f64, f64) {
    if len <= 0.0 {
        return (v.abs(), v.abs());
    }
    let z: f64 = rng.sample(StandardNormal);
    let end = v + z * len.sqrt();
    let min_abs = if v >= 0.0 && end >= 0.0 {
        bridge_min(v, end, len, rng.gen::<f64>()).max(0.0)
    } else if v <= 0.0 && end <= 0.0 {
        bridge_min(-v, -end, len, rng.gen::<f64>()).max(0.0)
    } else {
        0.0
    };
    (end.abs(), min_abs)
}

/// Minimum of a Brownian bridge from `a` to `b` over duration `len`, at
/// quantile `u`: the inverse of P(min <= x) = exp(-2(a-x)(b-x)/len) on
/// x <= min(a, b).
fn bridge_min(a: f64, b: f64, len: f64, u: f64) -> f64 {
    let u = u.max(f64::MIN_POSITIVE);
    0.5 * ((a + b) - ((a - b).powi(2) - 2.0 * len * u.ln()).sqrt())
}

// ---------------------------------------------------------------------------
// marginal-ks

const MARGINAL_TIMES: [f64; 3] = [0.25, 0.5, 0.75];

struct MarginalRep {
    lifetime: [f64; 3],
    endpoint: [f64; 3],
    reflected: [f64; 3],
    zero_defect: f64,
}

pub fn run_marginal_ks(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let mut report = Report::new("marginal-ks");
    if cfg.replicates == 0 {
        return Ok(report);
    }
    let mu = cfg.mu()?;
    if mu.variance().is_none() {
        return config_err("marginal-ks requires a finite-variance offspring distribution");
    }
    if cfg.grid_m % 4 != 0 {
        return config_err("marginal-ks needs grid_m divisible by 4");
    }
    let n = *cfg.sizes.iter().max().expect("validated nonempty");
    let a_n = scaling_a_n(&mu, n);
    let sqrt_a = a_n.sqrt();
    let m = cfg.grid_m;
    let mut sw = Stopwatch::new();

    let seed = section_seed(cfg.seed, stream::MARGINAL_DISCRETE);
    let discrete: Result<Vec<MarginalRep>, String> = par_replicates(cfg.replicates, |rep| {
        let mut rng = replicate_rng(seed, rep);
        let tree = sample_gw_conditioned(&mu, n, &mut rng, 100_000)
            .map_err(|e| format!("conditioned sampling: {e}"))?;
        let hs = height_process(&tree);
        let cvs = contour_vertices(&tree);
        let free = sample_heights(tree.clone(), false, &mut rng);
        let refl = sample_heights(tree, true, &mut rng);
        let mut out = MarginalRep {
            lifetime: [0.0; 3],
            endpoint: [0.0; 3],
            reflected: [0.0; 3],
            zero_defect: 0.0,
        };
        for (j, &s) in MARGINAL_TIMES.iter().enumerate() {
            let hk = ((n as f64 * s).floor() as usize).min(hs.values.len() - 1);
            out.lifetime[j] = hs.values[hk] as f64 / a_n;
            let ck = ((2.0 * n as f64 * s).floor() as usize).min(cvs.len() - 1);
            let v = cvs[ck] as usize;
            // At a fixed contour slot the walk value sits on a fixed-parity
            // integer lattice: the depth of cvs[k] has the parity of k, and
            // the walk value has the parity of the depth. Atoms 2 apart give
            // the raw KS distance to the continuous limit a floor of half an
            // atom, decaying only like a_n^{-1/2}, so each value is spread
            // uniformly over its width-2 lattice cell; the smoothed CDF is
            // the linear interpolation of the exact staircase. Folding at
            // zero on the reflected side matches the halved boundary cell of
            // |N(0, H)|.
            let u1: f64 = rng.gen::<f64>() - 0.5;
            out.endpoint[j] = (free.heights[v] as f64 + 2.0 * u1) / sqrt_a;
            let u2: f64 = rng.gen::<f64>() - 0.5;
            out.reflected[j] = (refl.heights[v] as f64 + 2.0 * u2).abs() / sqrt_a;
        }
        out.zero_defect = (hs.values[0] as f64)
            .abs()
            .max((free.heights[cvs[0] as usize] as f64).abs())
            .max((refl.heights[cvs[0] as usize] as f64).abs());
        Ok(out)
    })
    .into_iter()
    .collect();
    let discrete = discrete.map_err(CliError::Runtime)?;
    let discrete_ms = sw.lap();

    let seed = section_seed(cfg.seed, stream::MARGINAL_LIMIT);
    let limit: Vec<([f64; 3], [f64; 3], [f64; 3])> = par_replicates(cfg.replicates, |rep| {
        let mut rng = replicate_rng(seed, rep);
        let e = brownian_excursion(m, &mut rng);
        let mut lifetime = [0.0; 3];
        let mut endpoint = [0.0; 3];
        let mut reflected = [0.0; 3];
        for (j, &s) in MARGINAL_TIMES.iter().enumerate() {
            let h = e[(s * m as f64).round() as usize];
            lifetime[j] = h;
            let z1: f64 = rng.sample(StandardNormal);
            endpoint[j] = z1 * h.sqrt();
            let z2: f64 = rng.sample(StandardNormal);
            reflected[j] = (z2 * h.sqrt()).abs();
        }
        (lifetime, endpoint, reflected)
    });
    let limit_ms = sw.lap();

    let zero_max = discrete
        .iter()
        .map(|r| r.zero_defect)
        .fold(0.0f64, f64::max);
    report.check(
        "degenerate_zero_max n=0".to_string(),
        zero_max,
        None,
        0.0,
        zero_max == 0.0,
        "at s = 0 the height process and both walk endpoints are exactly zero".to_string(),
        0,
    );

    let thr = cfg.tolerances.p_threshold;
    for (j, &s) in MARGINAL_TIMES.iter().enumerate() {
        let d_life: Vec<f64> = discrete.iter().map(|r| r.lifetime[j]).collect();
        let l_life: Vec<f64> = limit.iter().map(|r| r.0[j]).collect();
        let ks = ks_two_sample(&d_life, &l_life);
        report.check(
            format!("lifetime_ks_p s={s}"),
            ks.p_value,
            None,
            thr,
            ks.p_value > thr,
            format!(
                "two-sample KS of the height process at ns over a_n against the \
                 excursion marginal (n={n}); p > {thr}"
            ),
            if j == 0 { discrete_ms } else { 0 },
        );
        let d_end: Vec<f64> = discrete.iter().map(|r| r.endpoint[j]).collect();
        let l_end: Vec<f64> = limit.iter().map(|r| r.1[j]).collect();
        let ks = ks_two_sample(&d_end, &l_end);
        report.check(
            format!("endpoint_ks_p s={s}"),
            ks.p_value,
            None,
            thr,
            ks.p_value > thr,
            format!(
                "two-sample KS of the free walk endpoint at 2ns over sqrt(a_n), spread \
                 over its parity-lattice cell, against the snake endpoint marginal \
                 sqrt(H_s) Z; p > {thr}"
            ),
            if j == 0 { limit_ms } else { 0 },
        );
        let d_ref: Vec<f64> = discrete.iter().map(|r| r.reflected[j]).collect();
        let l_ref: Vec<f64> = limit.iter().map(|r| r.2[j]).collect();
        let ks = ks_two_sample(&d_ref, &l_ref);
        report.check(
            format!("reflected_endpoint_ks_p s={s}"),
            ks.p_value,
            None,
            thr,
            ks.p_value > thr,
            format!(
                "two-sample KS of the reflected walk endpoint, spread over its \
                 parity-lattice cell and folded at zero, against the absolute snake \
                 endpoint marginal |sqrt(H_s) Z|; p > {thr}"
            ),
            0,
        );
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// scc-invariance

pub fn run_scc_invariance(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let mut report = Report::new("scc-invariance");
    if cfg.replicates == 0 {
        return Ok(report);
    }
    let mu = cfg.mu()?;
    let q = cfg.window_q;
    let mut sw = Stopwatch::new();
    if q == 0 {
        report.check(
            "window_categories".to_string(),
            1.0,
            None,
            1.0,
            true,
            "q = 0: every window is the bare point, invariance is trivial".to_string(),
            sw.lap(),
        );
        return Ok(report);
    }

    let spine = cfg.spine_depth;
    let seed = section_seed(cfg.seed, stream::SCC);
    const CHUNK: u64 = 2_048;
    let n = cfg.replicates;
    // The chi-square homogeneity test needs two independent samples, so the
    // replicate budget is doubled and split: the first half reads the window
    // as sampled, the second half reads it after the successor move. Windows
    // read nothing above height q + 1, so the sampler can cut every subtree
    // there; counts merge additively, which keeps any chunk schedule
    // equivalent.
    let n_total = 2 * n;
    let n_chunks = (n_total + CHUNK - 1) / CHUNK;
    let maps: Vec<HashMap<String, [u64; 2]>> = par_replicates(n_chunks, |chunk| {
        let mut counts: HashMap<String, [u64; 2]> = HashMap::new();
        let lo = chunk * CHUNK;
        let hi = (lo + CHUNK).min(n_total);
        for rep in lo..hi {
            let mut rng = replicate_rng(seed, rep);
            let pt = sample_pointed_window(&mu, spine, q + 1, &mut rng);
            if rep < n {
                let window =
                    truncate_pointed(&pt, -q, Some(q)).expect("point sits in the window");
                counts.entry(window_key(&window)).or_default()[0] += 1;
            } else {
                let (next, _moved) = scc_plus(&pt);
                let window =
                    truncate_pointed(&next, -q, Some(q)).expect("point sits in the window");
                counts.entry(window_key(&window)).or_default()[1] += 1;
            }
        }
        counts
    });
    let mut counts: HashMap<String, [u64; 2]> = HashMap::new();
    for map in maps {
        for (k, v) in map {
            let e = counts.entry(k).or_default();
            e[0] += v[0];
            e[1] += v[1];
        }
    }
    let mut cells: Vec<(String, [u64; 2])> = counts.into_iter().collect();
    cells.sort_by(|a, b| {
        let (ta, tb) = (a.1[0] + a.1[1], b.1[0] + b.1[1]);
        tb.cmp(&ta).then_with(|| a.0.cmp(&b.0))
    });
    let before: Vec<u64> = cells.iter().map(|c| c.1[0]).collect();
    let after: Vec<u64> = cells.iter().map(|c| c.1[1]).collect();
    let res = chi_square_two_sample(&before, &after, 5.0);
    let ms = sw.lap();

    report.info(
        "window_categories".to_string(),
        cells.len() as f64,
        None,
        "distinct pointed window shapes seen on either side",
        ms,
    );
    let total_before: u64 = before.iter().sum();
    report.check(
        "window_total_before".to_string(),
        total_before as f64 / n as f64,
        None,
        1.0,
        total_before == n,
        "every first-half replicate lands in exactly one window category".to_string(),
        0,
    );
    report.info(
        "scc_chi2_stat".to_string(),
        res.statistic,
        None,
        "chi-square homogeneity statistic of the pooled categories",
        0,
    );
    report.info(
        "scc_chi2_dof".to_string(),
        res.dof as f64,
        None,
        "degrees of freedom after pooling cells below expected count 5",
        0,
    );
    report.check(
        "scc_chi2_p".to_string(),
        res.p_value,
        None,
        cfg.tolerances.p_threshold,
        res.p_value > cfg.tolerances.p_threshold,
        format!(
            "window law is invariant under the right-successor move: chi-square \
             p > {} on {} replicates (spine depth {spine})",
            cfg.tolerances.p_threshold, n
        ),
        0,
    );
    Ok(report)
}

fn window_key(pt: &PointedTree) -> String {
    format!("{}|p{}|r{}", pt.tree.to_line(), pt.point, pt.root_height)
}

/// A spine-truncated pointed tree whose subtrees are cut at absolute height
/// `cap_h`: ancestor offspring counts follow the spine law with the spine
/// child first, everything else is an independent GW(mu) tree. Cutting at
/// `cap_h` leaves every window over heights within [-spine, cap_h - 1]
/// untouched, boundary vertices only ever appear as collapsed leaves.
fn sample_pointed_window<R: Rng + ?Sized>(
    mu: &OffspringDistribution,
    spine: u32,
    cap_h: i64,
    rng: &mut R,
) -> PointedTree {
    let p = spine as usize;
    let mut seq = Vec::with_capacity(p + 16);
    let mut counts = Vec::with_capacity(p);
    for _ in 0..p {
        let k = mu.sample_spine(rng);
        counts.push(k);
        seq.push(k);
    }
    // DFS layout: spine prefix, the point's subtree, then the non-spine
    // children of each spine vertex from the deepest one up.
    gw_capped(mu, cap_h, &mut seq, rng);
    for d in (0..p).rev() {
        let child_height = d as i64 - p as i64 + 1;
        for _ in 1..counts[d] {
            gw_capped(mu, cap_h - child_height, &mut seq, rng);
        }
    }
    PointedTree {
        tree: crate::tree_core::OrderedTree::from_offspring(seq)
            .expect("spine construction is a valid tree"),
        point: p,
        root_height: -(spine as i64),
    }
}

fn gw_capped<R: Rng + ?Sized>(
    mu: &OffspringDistribution,
    budget: i64,
    seq: &mut Vec<u32>,
    rng: &mut R,
) {
    let k = if budget <= 0 { 0 } else { mu.sample(rng) };
    seq.push(k);
    for _ in 0..k {
        gw_capped(mu, budget - 1, seq, rng);
    }
}

// ---------------------------------------------------------------------------
// snake-demo

pub fn run_snake_demo(cfg: &ExperimentConfig) -> Result<(GridSnake, Report), CliError> {
    let mut report = Report::new("snake-demo");
    let m = cfg.grid_m;
    let [s1, s2] = cfg.pair;
    let i1 = (s1 * m as f64).round() as usize;
    let i2 = (s2 * m as f64).round() as usize;
    for (s, i) in [(s1, i1), (s2, i2)] {
        if ((s * m as f64) - i as f64).abs() > 1e-9 {
            return config_err(format!("pair entry {s} does not sit on the 1/{m} grid"));
        }
    }
    let mut sw = Stopwatch::new();
    let mut rng = replicate_rng(section_seed(cfg.seed, stream::SNAKE_DEMO), 0);
    let h = brownian_excursion(m, &mut rng);
    let dr_fine = default_dr(1.0, m) / 4.0;
    let fine = brownian_snake_given_h(&h, 1.0, dr_fine, &mut rng);

    // Coarsening reads the same Brownian paths on every 2nd stored level, so
    // consecutive rows differ only through the level resolution.
    let snakes = vec![fine.clone(), fine.coarsen_levels(2), fine.coarsen_levels(4)];
    let mut metrics = Vec::new();
    for s in &snakes {
        let cact = cactus_metric(s).map_err(|e| CliError::Runtime(format!("cactus: {e}")))?;
        let mut diameter = 0.0f64;
        for a in 0..=m {
            for b in a + 1..=m {
                diameter = diameter.max(cact.at(a, b));
            }
        }
        let ms = sw.lap();
        report.info(
            format!("pair_distance dr={}", s.dr()),
            cact.at(i1, i2),
            None,
            "cactus distance between the fixed pair at this level resolution",
            ms,
        );
        report.info(
            format!("cactus_diameter dr={}", s.dr()),
            diameter,
            None,
            "largest cactus entry at this level resolution",
            0,
        );
        report.info(
            format!("max_level_step dr={}", s.dr()),
            s.max_level_step(),
            None,
            "largest stored-level jump; each cactus entry is accurate to twice this",
            0,
        );
        metrics.push(cact);
    }
    for w in metrics.windows(2) {
        let gap = w[0]
            .sup_distance(&w[1])
            .map_err(|e| CliError::Runtime(format!("sup distance: {e}")))?;
        report.info(
            "refinement_sup_gap".to_string(),
            gap,
            None,
            "sup-norm change of the cactus matrix when the level grid doubles",
            sw.lap(),
        );
    }
    Ok((fine, report))
}

// ---------------------------------------------------------------------------
// CLI plumbing

#[derive(Parser, Debug)]
#[command(
    name = "gwbrw",
    version,
    about = "Branching random walk range experiments on conditioned trees"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON experiment config; omitted fields take per-experiment defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<std::path::PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output path (stdout when omitted).
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<std::path::PathBuf>,
    /// Worker threads for replicate scheduling (0 = one per core).
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
}

#[derive(Subcommand, Clone, Copy, Debug)]
pub enum Command {
    /// Closed-form walk quantities, deterministic inequalities, couplings.
    ExactChecks,
    /// Range density law of large numbers across tree sizes.
    Lln,
    /// The range density constant by two independent estimators.
    EstimateC,
    /// Contracted vs snake metric on a time grid, with the fixed-pair law.
    Convergence,
    /// Height and endpoint marginals against the continuum limits.
    MarginalKs,
    /// Reflection coupling identities and discrepancy bounds.
    CouplingCheck,
    /// Window-law invariance under the right-successor move.
    SccInvariance,
    /// A grid snake serialized as CSV with a level-refinement table.
    SnakeDemo,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::ExactChecks => "exact-checks",
            Command::Lln => "lln",
            Command::EstimateC => "estimate-c",
            Command::Convergence => "convergence",
            Command::MarginalKs => "marginal-ks",
            Command::CouplingCheck => "coupling-check",
            Command::SccInvariance => "scc-invariance",
            Command::SnakeDemo => "snake-demo",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Ndjson,
}

pub enum RunOutput {
    Report(Report),
    /// The demo also carries the snake itself; its grid rows form the CSV
    /// body and the report becomes comment lines.
    SnakeDemo(Box<GridSnake>, Report),
}

impl RunOutput {
    pub fn report(&self) -> &Report {
        match self {
            RunOutput::Report(r) => r,
            RunOutput::SnakeDemo(_, r) => r,
        }
    }
}

/// Dispatches on `cfg.experiment`; the config must already be normalized.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    match cfg.experiment.as_str() {
        "exact-checks" => run_exact_checks(cfg).map(RunOutput::Report),
        "lln" => run_lln(cfg).map(RunOutput::Report),
        "estimate-c" => run_estimate_c(cfg).map(RunOutput::Report),
        "convergence" => run_convergence(cfg).map(RunOutput::Report),
        "marginal-ks" => run_marginal_ks(cfg).map(RunOutput::Report),
        "coupling-check" => run_coupling_check(cfg).map(RunOutput::Report),
        "scc-invariance" => run_scc_invariance(cfg).map(RunOutput::Report),
        "snake-demo" => run_snake_demo(cfg).map(|(s, r)| RunOutput::SnakeDemo(Box::new(s), r)),
        other => config_err(format!("unknown experiment '{other}'")),
    }
}

pub fn load_config(path: Option<&std::path::Path>, name: &str) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match path {
        None => ExperimentConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("reading {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("parsing {}: {e}", p.display())))?
        }
    };
    cfg.apply_experiment_defaults(name)?;
    Ok(cfg)
}

pub fn render_output(output: &RunOutput, format: OutputFormat, meta: &RunMeta) -> String {
    match (output, format) {
        (RunOutput::Report(r), OutputFormat::Csv) => r.to_csv(meta),
        (RunOutput::Report(r), OutputFormat::Ndjson) => r.to_ndjson(meta),
        (RunOutput::SnakeDemo(snake, r), OutputFormat::Csv) => {
            let mut out = String::new();
            let _ = writeln!(out, "# gwbrw v{} report", env!("CARGO_PKG_VERSION"));
            let _ = writeln!(out, "# experiment={}", r.experiment);
            let _ = writeln!(out, "# seed={}", meta.seed);
            let _ = writeln!(out, "# config_hash={:016x}", meta.config_hash);
            for row in &r.rows {
                let _ = writeln!(out, "# {} = {} ({})", row.statistic, row.value, row.rule);
            }
            out.push_str(&snake.to_csv());
            out
        }
        (RunOutput::SnakeDemo(snake, r), OutputFormat::Ndjson) => {
            let mut out = r.to_ndjson(meta);
            for i in 0..snake.n_points() {
                let _ = writeln!(
                    out,
                    "{{\"s\":{},\"h\":{},\"w_hat\":{}}}",
                    snake.time(i),
                    snake.lifetimes()[i],
                    snake.endpoint(i)
                );
            }
            out
        }
    }
}

/// Entry point of the binary. Returns the process exit code: 0 when every
/// asserted row passes, 1 on failures or runtime errors, 2 on config errors.
pub fn run_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let name = cli.command.name();
    let mut cfg = match load_config(cli.config.as_deref(), name) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return 2;
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("runtime error: building worker pool: {e}");
            return 1;
        }
    };
    let started = Instant::now();
    let output = match pool.install(|| run_experiment(&cfg)) {
        Ok(o) => o,
        Err(e @ CliError::Config(_)) => {
            eprintln!("{e}");
            return 2;
        }
        Err(e) => {
            eprintln!("{e}");
            return 1;
        }
    };
    let meta = RunMeta {
        seed: cfg.seed,
        config_hash: cfg.hash(),
    };
    let text = render_output(&output, cli.format, &meta);
    if let Some(path) = &cli.out {
        if let Err(e) = std::fs::write(path, &text) {
            eprintln!("runtime error: writing {}: {e}", path.display());
            return 1;
        }
    } else {
        print!("{text}");
    }
    let report = output.report();
    let failures = report.failures();
    eprintln!(
        "{name}: {} rows, {} failed, {} ms",
        report.rows.len(),
        failures.len(),
        started.elapsed().as_millis()
    );
    for row in &failures {
        eprintln!(
            "  FAIL {} value={} bound={}",
            row.statistic,
            row.value,
            row.bound.map(|b| b.to_string()).unwrap_or_default()
        );
    }
    if failures.is_empty() {
        0
    } else {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::Welford;

    fn base(name: &str) -> ExperimentConfig {
        ExperimentConfig::for_experiment(name).unwrap()
    }

    #[test]
    fn config_defaults_fill_and_validate() {
        let cfg = base("lln");
        assert_eq!(cfg.experiment, "lln");
        assert_eq!(cfg.sizes, vec![5_000, 20_000, 80_000]);
        assert_eq!(cfg.replicates, 200);
        assert_eq!(cfg.seed, DEFAULT_SEED);

        let partial: ExperimentConfig =
            serde_json::from_str(r#"{"replicates": 50, "sizes": [100]}"#).unwrap();
        let mut cfg = partial;
        cfg.apply_experiment_defaults("lln").unwrap();
        assert_eq!(cfg.replicates, 50);
        assert_eq!(cfg.sizes, vec![100]);
        assert_eq!(cfg.grid_m, 20);

        let mut wrong = base("lln");
        wrong.experiment = "lln".into();
        assert!(wrong.apply_experiment_defaults("convergence").is_err());

        let bad: Result<ExperimentConfig, _> = serde_json::from_str(r#"{"sises": [100]}"#);
        assert!(bad.is_err(), "unknown fields are config errors");

        let mut zero = base("lln");
        zero.sizes = vec![0];
        assert!(zero.validate().is_err());
        let mut arity = base("lln");
        arity.b = 1;
        assert!(arity.validate().is_err());
        let mut pair = base("convergence");
        pair.pair = [0.7, 0.3];
        assert!(pair.validate().is_err());
        let mut dist = base("lln");
        dist.distribution.kind = "nope".into();
        assert!(dist.validate().is_err());
    }

    #[test]
    fn report_serialization_is_stable() {
        let mut r = Report::new("demo");
        r.info("plain".to_string(), 0.5, None, "a diagnostic", 3);
        r.check(
            "checked".to_string(),
            1.25,
            Some(0.01),
            2.0,
            true,
            "value <= bound".to_string(),
            4,
        );
        r.check(
            "failing".to_string(),
            3.0,
            None,
            2.0,
            false,
            "value <= bound".to_string(),
            0,
        );
        assert!(!r.all_pass());
        assert_eq!(r.failures().len(), 1);
        assert_eq!(r.total_runtime_ms(), 7);

        let meta = RunMeta {
            seed: 7,
            config_hash: 0xabc,
        };
        let csv = r.to_csv(&meta);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], concat!("# gwbrw v", env!("CARGO_PKG_VERSION"), " report"));
        assert_eq!(lines[1], "# experiment=demo");
        assert_eq!(lines[2], "# seed=7");
        assert_eq!(lines[3], "# config_hash=0000000000000abc");
        assert_eq!(lines[4], "experiment,statistic,value,stderr,bound,pass,rule");
        assert_eq!(lines[5], "demo,plain,0.5,,,,a diagnostic");
        assert_eq!(lines[6], "demo,checked,1.25,0.01,2,pass,value <= bound");
        assert_eq!(lines[7], "demo,failing,3,,2,fail,value <= bound");

        let nd = r.to_ndjson(&meta);
        let mut it = nd.lines();
        let head: serde_json::Value = serde_json::from_str(it.next().unwrap()).unwrap();
        assert_eq!(head["meta"]["seed"], 7);
        let row: serde_json::Value = serde_json::from_str(it.next().unwrap()).unwrap();
        assert_eq!(row["statistic"], "plain");
        assert!(row["pass"].is_null());
        assert_eq!(it.count(), 2);
    }

    #[test]
    fn exact_checks_empty_config_gives_empty_report() {
        let mut cfg = base("exact-checks");
        cfg.replicates = 0;
        let report = run_exact_checks(&cfg).unwrap();
        assert!(report.rows.is_empty());
        assert!(report.all_pass());
    }

    #[test]
    fn exact_checks_smoke_all_pass() {
        let mut cfg = base("exact-checks");
        cfg.replicates = 2_000;
        cfg.sizes = vec![80];
        cfg.seed = 148;
        // 44 rows compared at z-score bands: 3 sigma per row leaves a union
        // false-failure rate near 9% per seed, 4 sigma brings it under 0.5%.
        cfg.tolerances.se_band = 4.0;
        let report = run_exact_checks(&cfg).unwrap();
        // 15 walk-formula rows per arity, 3 biased tails, 4 identity rows,
        // one four-point row, 3 coupling rows per cutoff.
        assert_eq!(report.rows.len(), 30 + 3 + 4 + 1 + 6);
        for row in &report.rows {
            assert!(
                row.pass != Some(false),
                "{} failed: value {} bound {:?}",
                row.statistic,
                row.value,
                row.bound
            );
        }
        let green = report.row("green b=2 p=0").unwrap();
        assert_eq!(green.bound, Some(4.0));
    }

    #[test]
    fn coupling_check_rows_pass() {
        let mut cfg = base("coupling-check");
        cfg.replicates = 2_000;
        cfg.sizes = vec![120];
        cfg.cutoffs = vec![6, 10];
        cfg.seed = 149;
        let report = run_coupling_check(&cfg).unwrap();
        assert!(report.all_pass(), "failures: {:?}", report.failures());
        assert_eq!(report.rows.len(), 2 + 6);
        let id = report.row("reflection_identity_mismatches").unwrap();
        assert_eq!(id.value, 0.0);
    }

    #[test]
    fn lln_runner_reports_expected_rows() {
        let mut cfg = base("lln");
        cfg.sizes = vec![300, 1_200];
        cfg.replicates = 40;
        cfg.spine_depth = 12;
        cfg.seed = 150;
        let report = run_lln(&cfg).unwrap();
        let unit = report.row("c_hat n=1").unwrap();
        assert_eq!(unit.pass, Some(true));
        assert_eq!(unit.value, 1.0);
        assert!(report.row("c_hat n=300").is_some());
        assert!(report.row("deviation_median n=1200").is_some());
        assert!(report.row("deviation_median_ratio_max").is_some());
        assert!(report.row("c_hat_rel_gap").is_some());
        assert!(report.row("lln_ipgw_gap").is_some());
        for stat in ["c_lower_bound n=300", "c_lower_bound n=1200"] {
            assert_eq!(report.row(stat).unwrap().pass, Some(true));
        }
    }

    #[test]
    fn estimate_c_runner_cross_checks() {
        let mut cfg = base("estimate-c");
        cfg.sizes = vec![2_000];
        cfg.replicates = 150;
        cfg.spine_depth = 14;
        cfg.seed = 151;
        let report = run_estimate_c(&cfg).unwrap();
        assert_eq!(report.rows.len(), 7);
        assert_eq!(report.row("ipgw_monotone").unwrap().pass, Some(true));
        assert_eq!(report.row("lln_ipgw_gap").unwrap().pass, Some(true));
    }

    #[test]
    fn convergence_runner_orders_metrics() {
        let mut cfg = base("convergence");
        cfg.sizes = vec![200, 1_600];
        cfg.replicates = 60;
        cfg.grid_m = 10;
        cfg.seed = 152;
        let report = run_convergence(&cfg).unwrap();
        for n in [200, 1_600] {
            let row = report.row(&format!("dstar_exceeds_d n={n}")).unwrap();
            assert_eq!(row.pass, Some(true), "violations at n={n}: {}", row.value);
        }
        assert_eq!(
            report.row("sup_diff_ratio_max").unwrap().pass,
            Some(true),
            "medians: {:?} {:?}",
            report.row("sup_diff_median n=200").map(|r| r.value),
            report.row("sup_diff_median n=1600").map(|r| r.value)
        );
        assert!(report.row("fixed_pair_drift_p n=200..1600").is_some());
        let cactus = report.row("fixed_pair_cactus_ks_p n=1600").unwrap();
        assert_eq!(
            cactus.pass,
            Some(true),
            "cactus pair law rejected: p = {}",
            cactus.value
        );
    }

    #[test]
    fn bridge_min_inverts_its_law() {
        // Round trip: plugging the quantile of a chosen minimum back into
        // the sampler returns that minimum.
        for &(a, b, len, x0) in &[
            (1.0f64, 0.5f64, 2.0f64, 0.25f64),
            (0.8, 1.6, 0.7, -0.4),
            (2.0, 2.0, 3.0, 0.0),
        ] {
            let u = (-2.0 * (a - x0) * (b - x0) / len).exp();
            let x = bridge_min(a, b, len, u);
            assert!((x - x0).abs() < 1e-12, "({a},{b},{len}): {x} vs {x0}");
        }
        // u -> 1 collapses the minimum onto min(a, b).
        assert!((bridge_min(1.0, 3.0, 2.0, 1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_pair_sampler_matches_grid_construction() {
        let m = 40;
        let n_reps = 2_500u64;
        let (s1, s2) = (0.3, 0.7);
        let exact: Vec<f64> = (0..n_reps)
            .map(|rep| {
                let mut rng = replicate_rng(153, rep);
                reflected_cactus_pair_sample(s1, s2, m, &mut rng)
            })
            .collect();
        let dr = default_dr(1.0, m) / 2.0;
        let grid: Vec<f64> = (0..n_reps)
            .map(|rep| {
                let mut rng = replicate_rng(154, rep);
                let h = brownian_excursion(m, &mut rng);
                let snake = brownian_snake_given_h(&h, 1.0, dr, &mut rng).reflected();
                snake.pair_distance(12, 28)
            })
            .collect();
        let ks = ks_two_sample(&exact, &grid);
        assert!(
            ks.p_value > 0.01,
            "exact vs grid pair law: D = {}, p = {}",
            ks.statistic,
            ks.p_value
        );
        let mut we = Welford::new();
        let mut wg = Welford::new();
        for &x in &exact {
            we.push(x);
        }
        for &x in &grid {
            wg.push(x);
        }
        let se = (we.std_err().powi(2) + wg.std_err().powi(2)).sqrt();
        assert!(
            (we.mean() - wg.mean()).abs() <= 3.0 * se + 2.0 * dr.sqrt(),
            "means {} vs {}",
            we.mean(),
            wg.mean()
        );
    }

    #[test]
    fn marginal_ks_runner_passes_at_moderate_size() {
        let mut cfg = base("marginal-ks");
        cfg.sizes = vec![2_000];
        cfg.replicates = 300;
        cfg.grid_m = 400;
        cfg.seed = 155;
        let report = run_marginal_ks(&cfg).unwrap();
        assert_eq!(report.rows.len(), 1 + 9);
        assert!(report.all_pass(), "failures: {:?}", report.failures());

        let mut stable = base("marginal-ks");
        stable.distribution = DistributionSpec {
            kind: "stable".into(),
            gamma: Some(1.5),
            table: None,
        };
        assert!(matches!(
            run_marginal_ks(&stable),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn scc_invariance_runner_accepts_the_window_law() {
        let mut cfg = base("scc-invariance");
        cfg.replicates = 20_000;
        cfg.seed = 156;
        let report = run_scc_invariance(&cfg).unwrap();
        assert!(report.all_pass(), "failures: {:?}", report.failures());
        assert!(report.row("window_categories").unwrap().value > 10.0);
        assert_eq!(report.row("window_total_before").unwrap().value, 1.0);

        let mut degenerate = base("scc-invariance");
        degenerate.window_q = 0;
        degenerate.replicates = 10;
        let report = run_scc_invariance(&degenerate).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert!(report.all_pass());
    }

    #[test]
    fn snake_demo_reports_refinement_and_serializes() {
        let mut cfg = base("snake-demo");
        cfg.grid_m = 20;
        cfg.seed = 157;
        let (snake, report) = run_snake_demo(&cfg).unwrap();
        assert_eq!(report.rows.len(), 3 * 3 + 2);
        assert!(report.all_pass(), "demo rows are diagnostics");
        assert_eq!(snake.grid_size(), 20);

        let meta = RunMeta {
            seed: cfg.seed,
            config_hash: cfg.hash(),
        };
        let out = render_output(
            &RunOutput::SnakeDemo(Box::new(snake), report),
            OutputFormat::Csv,
            &meta,
        );
        let body: Vec<&str> = out.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body[0], "s,h,w_hat");
        assert_eq!(body.len(), 1 + 21);
    }

    #[test]
    fn reports_are_identical_across_worker_counts() {
        let mut cfg = base("convergence");
        cfg.sizes = vec![300];
        cfg.replicates = 40;
        cfg.grid_m = 10;
        cfg.seed = 158;
        let meta = RunMeta {
            seed: cfg.seed,
            config_hash: cfg.hash(),
        };
        let render = |workers: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .unwrap();
            let out = pool.install(|| run_experiment(&cfg)).unwrap();
            (
                render_output(&out, OutputFormat::Csv, &meta),
                render_output(&out, OutputFormat::Ndjson, &meta),
            )
        };
        let (csv1, nd1) = render(1);
        let (csv3, nd3) = render(3);
        assert_eq!(csv1, csv3);
        assert_eq!(nd1, nd3);
    }

    #[test]
    fn cli_parses_subcommands_and_flags() {
        let cli = Cli::try_parse_from([
            "gwbrw",
            "marginal-ks",
            "--seed",
            "9",
            "--workers",
            "2",
            "--format",
            "ndjson",
        ])
        .unwrap();
        assert_eq!(cli.command.name(), "marginal-ks");
        assert_eq!(cli.seed, Some(9));
        assert_eq!(cli.workers, 2);
        assert_eq!(cli.format, OutputFormat::Ndjson);
        assert!(Cli::try_parse_from(["gwbrw", "nope"]).is_err());

        for name in EXPERIMENT_NAMES {
            let cfg = ExperimentConfig::for_experiment(name).unwrap();
            assert_eq!(cfg.experiment, name);
            cfg.validate().unwrap();
        }
    }
}
