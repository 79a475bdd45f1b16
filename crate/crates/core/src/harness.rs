//! Monte-Carlo sweep driver: runs the algorithm roster over seeded channel
//! drops, collects per-drop metrics, and emits CSV/JSON.
//!
//! Determinism contract: the spec and base seed fully determine every
//! emitted byte. Per-drop seeds are derived from the base seed and the
//! (point, drop) index pair, results are keyed and sorted before emission,
//! and wall-clock measurement is off by default (the timing column reads
//! zero) so the byte-level contract survives re-runs and any worker count.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{baseline_precoder, default_gpi_init, BaselineKind};
use crate::channel::{dbm_to_watts, generate_drop, ChannelRealization, ScenarioConfig};
use crate::forms::{build_forms, build_forms_partial, CsitMode, PrecoderState};
use crate::gpi::{
    gpi_solve, gpi_solve_infinite_blocklength, gpi_solve_rate_max, GpiObjective, GpiSettings,
};
use crate::joint::{joint_solve, JointSettings};
use crate::math::{self, FblParams};
use crate::reliability::{solve_phase2, ReliabilityCaps};
use crate::{Error, EveUserMat, Result};

/// Which scenario knob a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVar {
    #[serde(rename = "P_dBm")]
    PDbm,
    L,
    N,
    K,
    M,
}

impl SweepVar {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepVar::PDbm => "P_dBm",
            SweepVar::L => "L",
            SweepVar::N => "N",
            SweepVar::K => "K",
            SweepVar::M => "M",
        }
    }
}

impl std::str::FromStr for SweepVar {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "P_DBM" | "P" => Ok(SweepVar::PDbm),
            "L" => Ok(SweepVar::L),
            "N" => Ok(SweepVar::N),
            "K" => Ok(SweepVar::K),
            "M" => Ok(SweepVar::M),
            other => Err(Error::Config(format!("unknown sweep variable '{other}'"))),
        }
    }
}

/// Algorithm roster entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AlgorithmKind {
    /// Secure precoder at the cap targets (no reliability phase).
    Gpi,
    /// Same under covariance-only wiretap knowledge.
    GpiCov,
    /// Full alternating optimization.
    Joint,
    /// Alternating optimization under covariance-only wiretap knowledge.
    JointCov,
    /// Eavesdropper-blind rate maximizer plus the reliability phase.
    SeMax,
    Rzf,
    RzfEve,
    Zf,
    ZfEve,
    Mrt,
}

impl AlgorithmKind {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmKind::Gpi => "ALG1",
            AlgorithmKind::GpiCov => "ALG1-COV",
            AlgorithmKind::Joint => "ALG2",
            AlgorithmKind::JointCov => "ALG2-COV",
            AlgorithmKind::SeMax => "FBL-SE-MAX",
            AlgorithmKind::Rzf => "RZF",
            AlgorithmKind::RzfEve => "RZF-EVE",
            AlgorithmKind::Zf => "ZF",
            AlgorithmKind::ZfEve => "ZF-EVE",
            AlgorithmKind::Mrt => "MRT",
        }
    }

    /// The full roster in reporting order.
    pub fn all() -> Vec<AlgorithmKind> {
        vec![
            AlgorithmKind::Gpi,
            AlgorithmKind::GpiCov,
            AlgorithmKind::Joint,
            AlgorithmKind::JointCov,
            AlgorithmKind::SeMax,
            AlgorithmKind::Rzf,
            AlgorithmKind::RzfEve,
            AlgorithmKind::Zf,
            AlgorithmKind::ZfEve,
            AlgorithmKind::Mrt,
        ]
    }
}

impl std::str::FromStr for AlgorithmKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let up = s.to_ascii_uppercase();
        AlgorithmKind::all()
            .into_iter()
            .find(|a| a.name() == up)
            .ok_or_else(|| Error::Config(format!("unknown algorithm '{s}'")))
    }
}

impl TryFrom<String> for AlgorithmKind {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<AlgorithmKind> for String {
    fn from(a: AlgorithmKind) -> String {
        a.name().to_string()
    }
}

/// Full description of one sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSpec {
    pub var: SweepVar,
    pub values: Vec<f64>,
    pub scenario: ScenarioConfig,
    pub algorithms: Vec<AlgorithmKind>,
    pub drops: usize,
    pub base_seed: u64,
    /// Transmit power when not the swept variable, dBm.
    pub p_dbm: f64,
    /// Blocklength when not the swept variable.
    pub blocklength: u32,
    pub alpha: f64,
    pub weight: f64,
    pub inner_tol: f64,
    pub inner_max_iters: usize,
    pub outer_tol: f64,
    pub outer_max_iters: usize,
    /// Error/leakage caps are evenly spaced over this range.
    pub cap_lo: f64,
    pub cap_hi: f64,
    /// Record wall-clock per row; off by default to keep output bytes a
    /// pure function of (spec, seed).
    pub measure_time: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            var: SweepVar::PDbm,
            values: vec![0.0, 10.0, 20.0, 30.0],
            scenario: ScenarioConfig::default(),
            algorithms: AlgorithmKind::all(),
            drops: 50,
            base_seed: 1,
            p_dbm: 20.0,
            blocklength: 200,
            alpha: 10.0,
            weight: 0.01,
            inner_tol: 0.01,
            inner_max_iters: 15,
            outer_tol: 0.01,
            outer_max_iters: 5,
            cap_lo: 1e-6,
            cap_hi: 2e-6,
            measure_time: false,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config("sweep needs at least one value".into()));
        }
        if self.values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Config("sweep values must be sorted ascending".into()));
        }
        if self.drops < 1 {
            return Err(Error::Config("need at least one drop per point".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("algorithm roster is empty".into()));
        }
        if !(self.cap_lo > 0.0 && self.cap_lo <= self.cap_hi && self.cap_hi < 0.5) {
            return Err(Error::Config("caps must satisfy 0 < lo <= hi < 1/2".into()));
        }
        Ok(())
    }

    fn gpi_settings(&self) -> GpiSettings {
        GpiSettings {
            tolerance: self.inner_tol,
            max_iters: self.inner_max_iters,
            refresh_anchors: true,
        }
    }

    fn joint_settings(&self, csit: CsitMode) -> JointSettings {
        JointSettings {
            outer_tol: self.outer_tol,
            outer_max_iters: self.outer_max_iters,
            gpi: self.gpi_settings(),
            csit,
        }
    }
}

/// One (point, algorithm, drop) measurement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricRow {
    pub sweep_var: String,
    pub sweep_value: f64,
    pub algorithm: String,
    pub seed: u64,
    pub sum_secrecy_rate: f64,
    pub sum_secrecy_rate_clipped: f64,
    pub sum_rate: f64,
    pub max_error_prob: f64,
    pub max_leakage: f64,
    pub outer_iters: u32,
    pub inner_iters_total: u32,
    pub wall_ms: f64,
}

/// A per-drop algorithm failure; the sweep continues without the row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub sweep_value: f64,
    pub drop_index: usize,
    pub seed: u64,
    pub algorithm: String,
    pub message: String,
}

/// Mean and spread per (point, algorithm).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRow {
    pub sweep_value: f64,
    pub algorithm: String,
    pub drops: usize,
    pub mean_sum_secrecy_rate: f64,
    pub stderr_sum_secrecy_rate: f64,
    pub mean_max_error_prob: f64,
    pub mean_max_leakage: f64,
}

/// Everything a sweep produces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepOutput {
    pub spec: SweepSpec,
    pub rows: Vec<MetricRow>,
    pub summary: Vec<SummaryRow>,
    pub errors: Vec<ErrorRecord>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Per-drop seed: independent of scheduling, unique per (point, drop).
pub fn derive_drop_seed(base_seed: u64, point_index: usize, drop_index: usize) -> u64 {
    base_seed ^ splitmix64((point_index as u64) << 32 | drop_index as u64)
}

struct PointSetup {
    scenario: ScenarioConfig,
    params: FblParams,
    caps: ReliabilityCaps,
}

fn resolve_point(spec: &SweepSpec, value: f64) -> Result<PointSetup> {
    let mut scenario = spec.scenario.clone();
    let mut p_dbm = spec.p_dbm;
    let mut blocklength = spec.blocklength;
    let as_count = |v: f64, what: &str| -> Result<usize> {
        if v < 1.0 || v.fract() != 0.0 {
            return Err(Error::Config(format!("{what} sweep needs positive integers, got {v}")));
        }
        Ok(v as usize)
    };
    match spec.var {
        SweepVar::PDbm => p_dbm = value,
        SweepVar::L => blocklength = as_count(value, "L")? as u32,
        SweepVar::N => scenario.antennas = as_count(value, "N")?,
        SweepVar::K => scenario.users = as_count(value, "K")?,
        SweepVar::M => scenario.eves = as_count(value, "M")?,
    }
    scenario.validate()?;
    let noise = scenario.noise_power_watts();
    let params = FblParams {
        blocklength,
        symbol_power: dbm_to_watts(p_dbm),
        noise_user: noise,
        noise_eve: noise,
        alpha: spec.alpha,
        weight: spec.weight,
    };
    params.validate()?;
    let caps =
        ReliabilityCaps::evenly_spaced(scenario.users, scenario.eves, spec.cap_lo, spec.cap_hi);
    Ok(PointSetup { scenario, params, caps })
}

/// Result of one algorithm on one drop, before metric extraction.
pub struct AlgOutcome {
    pub precoder: PrecoderState,
    pub eps: Vec<f64>,
    pub delta: EveUserMat,
    pub outer_iters: u32,
    pub inner_iters: u32,
    /// Objective trajectory when the algorithm is iterative.
    pub trajectory: Vec<f64>,
}

/// Run one roster entry on one drop. Shared per-drop state (the perfect
/// forms and the normalization constant) is passed in so baselines do not
/// recompute it.
pub fn run_algorithm(
    kind: AlgorithmKind,
    channels: &ChannelRealization,
    caps: &ReliabilityCaps,
    params: &FblParams,
    spec: &SweepSpec,
    r_inf: f64,
) -> Result<AlgOutcome> {
    let settings = spec.gpi_settings();
    match kind {
        AlgorithmKind::Joint | AlgorithmKind::JointCov => {
            let csit = if kind == AlgorithmKind::Joint {
                CsitMode::Perfect
            } else {
                CsitMode::Covariance
            };
            let out = joint_solve(channels, caps, params, &spec.joint_settings(csit))?;
            Ok(AlgOutcome {
                precoder: out.precoder,
                eps: out.eps,
                delta: out.delta,
                outer_iters: out.outer_iters as u32,
                inner_iters: out.inner_iters as u32,
                trajectory: out.objective_traj,
            })
        }
        AlgorithmKind::Gpi | AlgorithmKind::GpiCov => {
            let forms = if kind == AlgorithmKind::Gpi {
                build_forms(channels, params)
            } else {
                build_forms_partial(channels, params)
            };
            let init = default_gpi_init(channels, params)?;
            let run = gpi_solve(
                &forms,
                GpiObjective::Secrecy { eps: &caps.eps_hat, delta: &caps.delta_hat },
                params,
                &settings,
                &init,
            )?;
            Ok(AlgOutcome {
                precoder: run.precoder,
                eps: caps.eps_hat.clone(),
                delta: caps.delta_hat.clone(),
                outer_iters: 0,
                inner_iters: run.iterations as u32,
                trajectory: run.trajectory,
            })
        }
        AlgorithmKind::SeMax => {
            let forms = build_forms(channels, params);
            let init = default_gpi_init(channels, params)?;
            let run = gpi_solve_rate_max(&forms, &caps.eps_hat, params, &settings, &init)?;
            let rel = solve_phase2(&run.precoder, &forms, caps, r_inf, params)?;
            Ok(AlgOutcome {
                precoder: run.precoder,
                eps: rel.eps,
                delta: rel.delta,
                outer_iters: 0,
                inner_iters: run.iterations as u32,
                trajectory: run.trajectory,
            })
        }
        AlgorithmKind::Mrt
        | AlgorithmKind::Zf
        | AlgorithmKind::Rzf
        | AlgorithmKind::ZfEve
        | AlgorithmKind::RzfEve => {
            let bk = match kind {
                AlgorithmKind::Mrt => BaselineKind::Mrt,
                AlgorithmKind::Zf => BaselineKind::Zf,
                AlgorithmKind::Rzf => BaselineKind::Rzf,
                AlgorithmKind::ZfEve => BaselineKind::ZfEve,
                _ => BaselineKind::RzfEve,
            };
            let precoder = baseline_precoder(bk, channels, params)?;
            let forms = build_forms(channels, params);
            let rel = solve_phase2(&precoder, &forms, caps, r_inf, params)?;
            Ok(AlgOutcome {
                precoder,
                eps: rel.eps,
                delta: rel.delta,
                outer_iters: 0,
                inner_iters: 0,
                trajectory: Vec::new(),
            })
        }
    }
}

fn metric_row(
    spec: &SweepSpec,
    value: f64,
    alg: AlgorithmKind,
    seed: u64,
    channels: &ChannelRealization,
    params: &FblParams,
    outcome: &AlgOutcome,
    wall_ms: f64,
) -> Result<MetricRow> {
    let rates =
        math::secrecy_rate_exact(&outcome.precoder, channels, &outcome.eps, &outcome.delta, params)?;
    let sum_secrecy_rate: f64 = rates.iter().sum();
    let sum_secrecy_rate_clipped: f64 = math::clip_rates(&rates).iter().sum();
    let sum_rate: f64 = math::sinr_users(&outcome.precoder, channels, params)
        .iter()
        .map(|r| r.ln_1p() * math::LOG2_E)
        .sum();
    Ok(MetricRow {
        sweep_var: spec.var.as_str().to_string(),
        sweep_value: value,
        algorithm: alg.name().to_string(),
        seed,
        sum_secrecy_rate,
        sum_secrecy_rate_clipped,
        sum_rate,
        max_error_prob: outcome.eps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        max_leakage: outcome.delta.max(),
        outer_iters: outcome.outer_iters,
        inner_iters_total: outcome.inner_iters,
        wall_ms,
    })
}

fn run_point_drop(
    spec: &SweepSpec,
    point_index: usize,
    drop_index: usize,
) -> (Vec<MetricRow>, Vec<ErrorRecord>) {
    let value = spec.values[point_index];
    let seed = derive_drop_seed(spec.base_seed, point_index, drop_index);
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    let mut fail = |alg: &str, message: String| {
        errors.push(ErrorRecord {
            sweep_value: value,
            drop_index,
            seed,
            algorithm: alg.to_string(),
            message,
        });
    };

    let setup = match resolve_point(spec, value) {
        Ok(s) => s,
        Err(e) => {
            fail("*", e.to_string());
            return (rows, errors);
        }
    };
    let scenario = ScenarioConfig { seed, ..setup.scenario };
    let channels = match generate_drop(&scenario) {
        Ok(c) => c,
        Err(e) => {
            fail("*", e.to_string());
            return (rows, errors);
        }
    };
    // Normalization constant shared by every reliability phase on this drop.
    let r_inf = (|| -> Result<f64> {
        let forms = build_forms(&channels, &setup.params);
        let init = default_gpi_init(&channels, &setup.params)?;
        let (_, r) =
            gpi_solve_infinite_blocklength(&forms, &setup.params, &spec.gpi_settings(), &init)?;
        Ok(r)
    })();
    let r_inf = match r_inf {
        Ok(r) => r,
        Err(e) => {
            fail("*", e.to_string());
            return (rows, errors);
        }
    };

    for &alg in &spec.algorithms {
        let start = Instant::now();
        match run_algorithm(alg, &channels, &setup.caps, &setup.params, spec, r_inf) {
            Ok(outcome) => {
                let wall_ms = if spec.measure_time {
                    start.elapsed().as_secs_f64() * 1e3
                } else {
                    0.0
                };
                match metric_row(spec, value, alg, seed, &channels, &setup.params, &outcome, wall_ms)
                {
                    Ok(row) => rows.push(row),
                    Err(e) => fail(alg.name(), e.to_string()),
                }
            }
            Err(e) => fail(alg.name(), e.to_string()),
        }
    }
    (rows, errors)
}

/// Run the sweep on `workers` threads. Results are identical for any
/// worker count.
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<SweepOutput> {
    spec.validate()?;
    let tasks: Vec<(usize, usize)> = (0..spec.values.len())
        .flat_map(|p| (0..spec.drops).map(move |d| (p, d)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let mut keyed: Vec<((usize, usize), (Vec<MetricRow>, Vec<ErrorRecord>))> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(p, d)| ((p, d), run_point_drop(spec, p, d)))
            .collect()
    });
    keyed.sort_by_key(|(key, _)| *key);

    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for (_, (mut r, mut e)) in keyed {
        rows.append(&mut r);
        errors.append(&mut e);
    }
    let summary = summarize(spec, &rows);
    Ok(SweepOutput { spec: spec.clone(), rows, summary, errors })
}

fn summarize(spec: &SweepSpec, rows: &[MetricRow]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for &value in &spec.values {
        for &alg in &spec.algorithms {
            let vals: Vec<&MetricRow> = rows
                .iter()
                .filter(|r| r.sweep_value == value && r.algorithm == alg.name())
                .collect();
            if vals.is_empty() {
                continue;
            }
            let n = vals.len() as f64;
            let mean = vals.iter().map(|r| r.sum_secrecy_rate).sum::<f64>() / n;
            let var = if vals.len() > 1 {
                vals.iter().map(|r| (r.sum_secrecy_rate - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            out.push(SummaryRow {
                sweep_value: value,
                algorithm: alg.name().to_string(),
                drops: vals.len(),
                mean_sum_secrecy_rate: mean,
                stderr_sum_secrecy_rate: (var / n).sqrt(),
                mean_max_error_prob: vals.iter().map(|r| r.max_error_prob).sum::<f64>() / n,
                mean_max_leakage: vals.iter().map(|r| r.max_leakage).sum::<f64>() / n,
            });
        }
    }
    out
}

/// CSV header shared by every emitted table.
pub const CSV_HEADER: &str = "sweep_var,sweep_value,algorithm,seed,sum_secrecy_rate,\
sum_secrecy_rate_clipped,sum_rate,max_error_prob,max_leakage,outer_iters,inner_iters_total,wall_ms";

/// Render rows as CSV, header included, bit-stable field formatting.
pub fn csv_string(rows: &[MetricRow]) -> String {
    let mut s = String::with_capacity(128 * (rows.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in rows {
        // {:?} on f64 is the shortest round-trip representation, which is
        // deterministic and keeps tiny probabilities readable.
        let _ = writeln!(
            s,
            "{},{:?},{},{},{:?},{:?},{:?},{:?},{:?},{},{},{:?}",
            r.sweep_var,
            r.sweep_value,
            r.algorithm,
            r.seed,
            r.sum_secrecy_rate,
            r.sum_secrecy_rate_clipped,
            r.sum_rate,
            r.max_error_prob,
            r.max_leakage,
            r.outer_iters,
            r.inner_iters_total,
            r.wall_ms,
        );
    }
    s
}

/// Write the CSV table to a file.
pub fn write_csv_file(rows: &[MetricRow], path: &std::path::Path) -> Result<()> {
    std::fs::write(path, csv_string(rows)).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Write the full output (resolved spec, rows, summary, errors) as JSON.
pub fn write_json_file(output: &SweepOutput, path: &std::path::Path) -> Result<()> {
    let body = serde_json::to_string_pretty(output)
        .map_err(|e| Error::Config(format!("serialize: {e}")))?;
    std::fs::write(path, body).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// One-drop diagnostic report for the CLI: per-algorithm metrics plus
/// iteration trajectories.
pub fn single_drop_report(spec: &SweepSpec) -> Result<serde_json::Value> {
    spec.validate()?;
    let value = spec.values.first().copied().unwrap_or(spec.p_dbm);
    let setup = resolve_point(spec, value)?;
    let scenario = ScenarioConfig { seed: spec.base_seed, ..setup.scenario };
    let channels = generate_drop(&scenario)?;
    let forms = build_forms(&channels, &setup.params);
    let init = default_gpi_init(&channels, &setup.params)?;
    let (_, r_inf) =
        gpi_solve_infinite_blocklength(&forms, &setup.params, &spec.gpi_settings(), &init)?;

    let mut algs = serde_json::Map::new();
    for &alg in &spec.algorithms {
        match run_algorithm(alg, &channels, &setup.caps, &setup.params, spec, r_inf) {
            Ok(outcome) => {
                let row =
                    metric_row(spec, value, alg, spec.base_seed, &channels, &setup.params, &outcome, 0.0)?;
                algs.insert(
                    alg.name().to_string(),
                    serde_json::json!({
                        "metrics": row,
                        "trajectory": outcome.trajectory,
                        "eps": outcome.eps,
                        "max_leakage": outcome.delta.max(),
                    }),
                );
            }
            Err(e) => {
                algs.insert(alg.name().to_string(), serde_json::json!({ "error": e.to_string() }));
            }
        }
    }
    Ok(serde_json::json!({
        "scenario": scenario,
        "params": setup.params,
        "caps": setup.caps,
        "r_inf": r_inf,
        "user_gains_db": channels.gamma.iter().map(|g| 10.0 * g.log10()).collect::<Vec<_>>(),
        "eve_gains_db": channels.gamma_e.iter().map(|g| 10.0 * g.log10()).collect::<Vec<_>>(),
        "algorithms": algs,
    }))
}

/// Quick built-in oracle checks for the CLI; each returns `Ok` or an
/// explanation of what diverged.
pub fn selftest() -> Vec<(&'static str, std::result::Result<(), String>)> {
    type Check = (&'static str, fn() -> std::result::Result<(), String>);

    fn check_tail_round_trip() -> std::result::Result<(), String> {
        for exp10 in [1, 2, 6, 11, 100, 300] {
            let p = 10f64.powi(-exp10);
            let x = math::gaussian_q_inv(p).map_err(|e| e.to_string())?;
            let back = math::gaussian_q(x);
            if ((back - p) / p).abs() > 1e-12 {
                return Err(format!("round trip at p=1e-{exp10}: got {back}"));
            }
        }
        Ok(())
    }

    fn check_tangent_bound() -> std::result::Result<(), String> {
        for anchor in [0.1, 1.0, 10.0] {
            let (q, r) = math::dispersion_sqrt_tangent(anchor).map_err(|e| e.to_string())?;
            for i in 0..=60 {
                let x = 10f64.powf(-3.0 + i as f64 * 0.1);
                let lhs = (2.0 * x / (1.0 + x)).sqrt();
                if lhs > q * x.ln_1p() + r + 1e-12 {
                    return Err(format!("bound violated at x={x}, anchor={anchor}"));
                }
            }
        }
        Ok(())
    }

    fn default_params() -> FblParams {
        FblParams {
            blocklength: 200,
            symbol_power: dbm_to_watts(20.0),
            noise_user: dbm_to_watts(-99.0),
            noise_eve: dbm_to_watts(-99.0),
            alpha: 10.0,
            weight: 0.01,
        }
    }

    fn check_form_identity() -> std::result::Result<(), String> {
        let config = ScenarioConfig { antennas: 4, users: 2, eves: 2, seed: 12, ..Default::default() };
        let channels = generate_drop(&config).map_err(|e| e.to_string())?;
        let params = default_params();
        let forms = build_forms(&channels, &params);
        let p = crate::baselines::mrt_precoder(&channels).map_err(|e| e.to_string())?;
        let q = forms.quad_values(&p);
        let rho = math::sinr_users(&p, &channels, &params);
        for k in 0..2 {
            let lhs = q.a[k] / q.b[k];
            let rhs = 1.0 + rho[k];
            if ((lhs - rhs) / rhs).abs() > 1e-10 {
                return Err(format!("ratio identity user {k}: {lhs} vs {rhs}"));
            }
        }
        Ok(())
    }

    fn check_fixed_point() -> std::result::Result<(), String> {
        let config = ScenarioConfig { antennas: 4, users: 2, eves: 2, seed: 5, ..Default::default() };
        let channels = generate_drop(&config).map_err(|e| e.to_string())?;
        let params = default_params();
        let forms = build_forms(&channels, &params);
        let init = crate::baselines::mrt_precoder(&channels).map_err(|e| e.to_string())?;
        let eps = vec![1e-6; 2];
        let delta = EveUserMat::filled(2, 2, 1.5e-6);
        let run = gpi_solve(
            &forms,
            GpiObjective::Secrecy { eps: &eps, delta: &delta },
            &params,
            &GpiSettings::tight(),
            &init,
        )
        .map_err(|e| e.to_string())?;
        if run.kkt_residual > 1e-6 {
            return Err(format!("fixed-point residual {}", run.kkt_residual));
        }
        Ok(())
    }

    fn check_reliability_stationarity() -> std::result::Result<(), String> {
        let v = [0.9, 1.1];
        let (w, cap, l, r_inf) = (0.01, 2e-6, 200u32, 10.0);
        let tau = crate::reliability::tau_star(&v, r_inf, w, cap, l)
            .ok_or("unexpected cap saturation")?;
        let qinv = math::gaussian_q_inv(tau).map_err(|e| e.to_string())?;
        let lhs = w / r_inf
            * v.iter().map(|x| (x / l as f64).sqrt()).sum::<f64>()
            * (2.0 * std::f64::consts::PI).sqrt()
            * (qinv * qinv / 2.0).exp();
        let rhs = (1.0 - w) / cap;
        if ((lhs - rhs) / rhs).abs() > 1e-8 {
            return Err(format!("stationarity residual {}", ((lhs - rhs) / rhs).abs()));
        }
        Ok(())
    }

    fn check_wiretap_nulling() -> std::result::Result<(), String> {
        let config = ScenarioConfig { antennas: 8, users: 2, eves: 4, seed: 3, ..Default::default() };
        let channels = generate_drop(&config).map_err(|e| e.to_string())?;
        let p = baseline_precoder(BaselineKind::ZfEve, &channels, &default_params())
            .map_err(|e| e.to_string())?;
        for m in 0..4 {
            for k in 0..2 {
                let leak = channels.g[m].dotc(&p.user(k)).norm();
                if leak > 1e-10 {
                    return Err(format!("wiretap {m} leak {leak} for user {k}"));
                }
            }
        }
        Ok(())
    }

    fn check_sweep_determinism() -> std::result::Result<(), String> {
        let spec = SweepSpec {
            values: vec![20.0],
            algorithms: vec![AlgorithmKind::Mrt, AlgorithmKind::Gpi],
            drops: 2,
            scenario: ScenarioConfig { antennas: 4, users: 2, eves: 2, ..Default::default() },
            ..Default::default()
        };
        let a = run_sweep(&spec, 1).map_err(|e| e.to_string())?;
        let b = run_sweep(&spec, 4).map_err(|e| e.to_string())?;
        if csv_string(&a.rows) != csv_string(&b.rows) {
            return Err("worker count changed the CSV bytes".into());
        }
        Ok(())
    }

    let checks: Vec<Check> = vec![
        ("gaussian tail round trip", check_tail_round_trip),
        ("tangent bound dominance", check_tangent_bound),
        ("quadratic form identity", check_form_identity),
        ("power iteration fixed point", check_fixed_point),
        ("reliability stationarity", check_reliability_stationarity),
        ("wiretap nulling", check_wiretap_nulling),
        ("sweep determinism", check_sweep_determinism),
    ];
    checks.into_iter().map(|(name, f)| (name, f())).collect()
}
