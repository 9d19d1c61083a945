//! Experiment runner: configs and presets, per-seed pipelines, acceptance
//! predicates, and CSV/JSON/SVG artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::diagnostics::{
    alignment_check, almost_orth_check, amplification, candidate_sets, edge_counts, error_on, norm_growth_check,
    AlmostOrthSummary, Amplification, DiagnosticContext, DiagnosticsConfig, DiagnosticsReport, IterationDiagnostics,
    ProjectionRecorder,
};
use crate::distribution::{
    check_sample_properties, fmt_f64, make_spec, sample_dataset, Dataset, DistributionSpec, MeanMode, SampleThresholds,
};
use crate::error::{Error, Result};
use crate::linalg::sign;
use crate::network::{init_network, NetworkParams};
use crate::rng::derive_seed;
use crate::trainer::{theorem_schedule, train_from, SnapshotPolicy, TrainConfig, TrainTrace};

const SEED_TAG_MEANS: u64 = 0;
const SEED_TAG_TRAIN: u64 = 1;
const SEED_TAG_INIT: u64 = 2;
const SEED_TAG_TEST: u64 = 3;
const SEED_TAG_VAL: u64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionConfig {
    pub d: usize,
    /// Within-cluster variance `sigma^2`.
    pub sigma2: f64,
    pub eta: f64,
    #[serde(default)]
    pub mean_mode: MeanMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub alpha: f64,
    /// `None` runs the theorem schedule `1 + ceil(1 / (4 alpha))`.
    pub iterations: Option<usize>,
    /// Standard deviation of the initial weights.
    pub omega_init: f64,
    #[serde(default)]
    pub subgrad_at_zero: f64,
    pub snapshot_policy: SnapshotPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    /// Decision-boundary SVG and grid CSV (two-dimensional inputs only).
    pub boundary: bool,
    /// `[x0_min, x0_max, x1_min, x1_max]`.
    pub grid_bounds: [f64; 4],
    pub grid_resolution: usize,
    pub checkpoint: bool,
    pub dataset: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            boundary: false,
            grid_bounds: [-2.0, 2.0, -2.0, 2.0],
            grid_resolution: 200,
            checkpoint: true,
            dataset: false,
        }
    }
}

/// Acceptance predicates over the per-seed metrics of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Predicate {
    /// Every clean point classified correctly and every noisy point
    /// incorrectly at `T`.
    SignSeparation { min_fraction: f64 },
    /// Monte Carlo test error at most `eta + slack`.
    TestError { slack: f64, min_fraction: f64 },
    /// For all four sets, median correlation at `t = 1` is at least
    /// `factor` times the median at `t = 0` and at least `floor`.
    Amplification { factor: f64, floor: f64, min_fraction: f64 },
    /// Alignment at every `t` up to the horizon and almost-orthogonality.
    AlignmentOrthogonality { min_fraction: f64 },
    /// Per-neuron and Frobenius weight-growth bounds.
    NormGrowth { min_fraction: f64 },
    /// Final clean and noisy training accuracies hit the given values.
    TrainFit { clean_acc: f64, noisy_acc: f64, min_fraction: f64 },
    /// Mean final validation accuracy; optionally every seed interpolates.
    FinalValAccuracy { min_mean: f64, require_interpolation: bool },
    /// Mean of `peak - final` validation accuracy.
    ValPeakDrop { min_mean_drop: f64 },
}

impl Predicate {
    pub fn name(&self) -> &'static str {
        match self {
            Predicate::SignSeparation { .. } => "sign_separation",
            Predicate::TestError { .. } => "test_error",
            Predicate::Amplification { .. } => "amplification",
            Predicate::AlignmentOrthogonality { .. } => "alignment_orthogonality",
            Predicate::NormGrowth { .. } => "norm_growth",
            Predicate::TrainFit { .. } => "train_fit",
            Predicate::FinalValAccuracy { .. } => "final_val_accuracy",
            Predicate::ValPeakDrop { .. } => "val_peak_drop",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub distribution: DistributionConfig,
    pub n_train: usize,
    /// Fresh samples for the Monte Carlo test error; `0` skips it.
    pub n_test: usize,
    /// Fixed validation set for accuracy curves; `0` skips it.
    pub n_val: usize,
    pub m: usize,
    pub train: TrainSettings,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    /// Iterations at which the full diagnostics are evaluated; `T` is always
    /// added.
    pub diag_iterations: Vec<usize>,
    /// Accuracy-curve spacing; `0` disables curves.
    pub curve_every: usize,
    #[serde(default)]
    pub outputs: OutputConfig,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub acceptance: Vec<Predicate>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.n_train == 0 {
            return Err(Error::Config("n_train must be at least 1".into()));
        }
        if self.m == 0 {
            return Err(Error::InvalidInit("width m must be at least 1".into()));
        }
        if !(self.distribution.sigma2 >= 0.0) || !self.distribution.sigma2.is_finite() {
            return Err(Error::InvalidSigma(self.distribution.sigma2));
        }
        // distribution constraints on d and eta
        make_spec(self.distribution.d, 0.0, self.distribution.eta, MeanMode::Canonical, 0)?;
        self.train_config(0)?.validate()?;
        self.diagnostics.validate()?;
        if self.outputs.grid_resolution == 0 {
            return Err(Error::Config("grid_resolution must be at least 1".into()));
        }
        let b = self.outputs.grid_bounds;
        if !(b[0] < b[1] && b[2] < b[3]) {
            return Err(Error::Config(format!("grid bounds {b:?} are empty")));
        }
        for p in &self.acceptance {
            let needs_val = matches!(p, Predicate::FinalValAccuracy { .. } | Predicate::ValPeakDrop { .. });
            if needs_val && (self.n_val == 0 || self.curve_every == 0) {
                return Err(Error::Config(format!("predicate {} needs n_val and curve_every", p.name())));
            }
            if matches!(p, Predicate::TestError { .. }) && self.n_test == 0 {
                return Err(Error::Config("predicate test_error needs n_test".into()));
            }
        }
        Ok(())
    }

    pub fn iterations(&self) -> Result<usize> {
        match self.train.iterations {
            Some(t) => Ok(t),
            None => theorem_schedule(self.train.alpha),
        }
    }

    /// Last iteration covered by the alignment and almost-orthogonality
    /// checks: `min(T, theorem_schedule(alpha)) - 1`.
    pub fn orth_horizon(&self) -> Result<usize> {
        let t = self.iterations()?;
        Ok(t.min(theorem_schedule(self.train.alpha)?).saturating_sub(1))
    }

    pub fn train_config(&self, seed: u64) -> Result<TrainConfig> {
        Ok(TrainConfig {
            alpha: self.train.alpha,
            iterations: self.iterations()?,
            omega_init: self.train.omega_init,
            subgrad_at_zero: self.train.subgrad_at_zero,
            snapshot_policy: self.train.snapshot_policy,
            seed: derive_seed(seed, SEED_TAG_INIT),
        })
    }

    pub fn spec(&self, seed: u64) -> Result<DistributionSpec> {
        let dc = &self.distribution;
        make_spec(dc.d, dc.sigma2.sqrt(), dc.eta, dc.mean_mode, derive_seed(seed, SEED_TAG_MEANS))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Applies a dotted-path override such as `train.alpha=0.05`. The value
    /// is parsed as JSON, falling back to a plain string.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (path, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
        let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut doc = serde_json::to_value(&*self)?;
        let mut node = &mut doc;
        let keys: Vec<&str> = path.split('.').collect();
        for (k, key) in keys.iter().enumerate() {
            let next = match node {
                Value::Object(map) => map.get_mut(*key),
                Value::Array(items) => key.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
                _ => None,
            };
            node = next.ok_or_else(|| Error::Config(format!("unknown config key `{}`", keys[..=k].join("."))))?;
        }
        *node = value;
        *self = serde_json::from_value(doc).map_err(|e| Error::Config(format!("override `{assignment}`: {e}")))?;
        Ok(())
    }
}

pub const PRESETS: [&str; 4] = ["fig1", "fig2_lowdim", "fig2_highdim", "theorem"];

/// Named configurations for the two-dimensional boundary experiment, the
/// low- and high-dimensional overfitting curves, and the early-stopped
/// regime with theoretical guarantees.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let curve = |d: usize, n: usize, iterations: usize| {
        let m = 400;
        ExperimentConfig {
            name: name.to_string(),
            distribution: DistributionConfig {
                d,
                sigma2: (d as f64).powf(-1.2),
                eta: 0.15,
                mean_mode: MeanMode::Canonical,
            },
            n_train: n,
            n_test: 0,
            n_val: 6000,
            m,
            train: TrainSettings {
                alpha: 0.1,
                iterations: Some(iterations),
                omega_init: (0.01 / (m * d) as f64).sqrt(),
                subgrad_at_zero: 0.0,
                snapshot_policy: SnapshotPolicy::Endpoints,
            },
            diagnostics: DiagnosticsConfig::default(),
            diag_iterations: vec![0],
            curve_every: 500,
            outputs: OutputConfig::default(),
            seeds: vec![1, 2, 3],
            acceptance: Vec::new(),
        }
    };
    let cfg = match name {
        "fig1" => {
            let m = 500;
            ExperimentConfig {
                name: name.to_string(),
                distribution: DistributionConfig {
                    d: 2,
                    sigma2: 1.0 / 50.0,
                    eta: 0.15,
                    mean_mode: MeanMode::Canonical,
                },
                n_train: 5000,
                n_test: 20000,
                n_val: 0,
                m,
                train: TrainSettings {
                    alpha: 0.05,
                    iterations: Some(3000),
                    omega_init: (1.0 / (32.0 * m as f64)).sqrt(),
                    subgrad_at_zero: 0.0,
                    snapshot_policy: SnapshotPolicy::Endpoints,
                },
                diagnostics: DiagnosticsConfig::default(),
                diag_iterations: vec![0],
                curve_every: 0,
                outputs: OutputConfig {
                    boundary: true,
                    ..OutputConfig::default()
                },
                seeds: vec![1],
                acceptance: vec![Predicate::TrainFit {
                    clean_acc: 1.0,
                    noisy_acc: 0.0,
                    min_fraction: 1.0,
                }],
            }
        }
        "fig2_lowdim" => ExperimentConfig {
            acceptance: vec![Predicate::ValPeakDrop { min_mean_drop: 0.02 }],
            ..curve(8, 200, 40000)
        },
        "fig2_highdim" => ExperimentConfig {
            acceptance: vec![Predicate::FinalValAccuracy {
                min_mean: 0.80,
                require_interpolation: true,
            }],
            ..curve(400, 40, 12000)
        },
        "theorem" => {
            let (d, m) = (500, 128);
            ExperimentConfig {
                name: name.to_string(),
                distribution: DistributionConfig {
                    d,
                    sigma2: 1.0 / (16.0 * d as f64),
                    eta: 0.05,
                    mean_mode: MeanMode::Canonical,
                },
                n_train: 2000,
                n_test: 20000,
                n_val: 0,
                m,
                train: TrainSettings {
                    alpha: 0.1,
                    iterations: None,
                    omega_init: (1e-10 / (m * d) as f64).sqrt(),
                    subgrad_at_zero: 0.0,
                    snapshot_policy: SnapshotPolicy::All,
                },
                diagnostics: DiagnosticsConfig::default(),
                diag_iterations: (0..=4).collect(),
                curve_every: 0,
                outputs: OutputConfig::default(),
                seeds: (1..=10).collect(),
                acceptance: vec![
                    Predicate::SignSeparation { min_fraction: 0.9 },
                    Predicate::TestError {
                        slack: 0.03,
                        min_fraction: 0.9,
                    },
                    Predicate::Amplification {
                        factor: 5.0,
                        floor: 0.05,
                        min_fraction: 1.0,
                    },
                    Predicate::AlignmentOrthogonality { min_fraction: 0.8 },
                    Predicate::NormGrowth { min_fraction: 1.0 },
                ],
            }
        }
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(cfg)
}

/// Largest constant `C` for which each modelling assumption holds at the
/// configured sizes; the step-size assumption gives an interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionProxies {
    /// `d >= C max(log^2(n/delta), log(m/delta))`.
    pub dimension_max_c: f64,
    /// `sigma^2 <= 1 / (C^2 d)`.
    pub variance_max_c: f64,
    /// `n >= C log(m/delta)`.
    pub samples_max_c: f64,
    /// `eta <= 1/C`.
    pub noise_max_c: f64,
    /// `m >= C log(1/delta)`.
    pub width_max_c: f64,
    /// `omega^2 <= 1 / (C^4 m d)`.
    pub init_max_c: f64,
    /// `1/(2 sqrt C) <= alpha <= 1/sqrt C`.
    pub step_c_range: [f64; 2],
    /// All assumptions hold together for some `C` in this range, if any.
    pub joint_c_range: Option<[f64; 2]>,
}

pub fn assumption_proxies(cfg: &ExperimentConfig) -> AssumptionProxies {
    let delta = cfg.diagnostics.delta;
    let (n, m, d) = (cfg.n_train as f64, cfg.m as f64, cfg.distribution.d as f64);
    let inv = |v: f64| if v > 0.0 { 1.0 / v } else { f64::INFINITY };
    let dimension_max_c = d / (n / delta).ln().powi(2).max((m / delta).ln());
    let variance_max_c = inv(cfg.distribution.sigma2 * d).sqrt();
    let samples_max_c = n / (m / delta).ln();
    let noise_max_c = inv(cfg.distribution.eta);
    let width_max_c = m / (1.0 / delta).ln();
    let omega2 = cfg.train.omega_init * cfg.train.omega_init;
    let init_max_c = inv(omega2 * m * d).powf(0.25);
    let alpha = cfg.train.alpha;
    let step_c_range = [1.0 / (4.0 * alpha * alpha), 1.0 / (alpha * alpha)];
    let upper = [dimension_max_c, variance_max_c, samples_max_c, noise_max_c, width_max_c, init_max_c, step_c_range[1]]
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let lower = step_c_range[0].max(1.0);
    AssumptionProxies {
        dimension_max_c,
        variance_max_c,
        samples_max_c,
        noise_max_c,
        width_max_c,
        init_max_c,
        step_c_range,
        joint_c_range: (lower <= upper).then_some([lower, upper]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: usize,
    pub train_acc: f64,
    pub val_acc: f64,
}

/// Scalar results of one seed; predicates are evaluated from these alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub iterations: usize,
    pub n_noisy: usize,
    pub eta: f64,
    pub final_risk: f64,
    pub final_train_acc: f64,
    pub final_clean_acc: Option<f64>,
    pub final_noisy_acc: Option<f64>,
    pub clean_all_correct: bool,
    pub noisy_all_incorrect: bool,
    pub min_clean_margin: Option<f64>,
    pub max_noisy_margin: Option<f64>,
    pub gamma_margin_pass: bool,
    pub test_error: Option<f64>,
    pub test_error_se: Option<f64>,
    pub j_sizes: BTreeMap<String, usize>,
    pub j_fraction: f64,
    pub orth_horizon: usize,
    pub alignment_all_hold: bool,
    pub alignment_min_fraction: f64,
    pub almost_orth: Option<AlmostOrthSummary>,
    pub almost_orth_initial_ratio: Option<f64>,
    pub norm_growth_holds: bool,
    pub max_neuron_growth_ratio: f64,
    pub max_frob_growth_ratio: f64,
    pub amplification: Vec<Amplification>,
    pub min_edge_fraction: Option<f64>,
    pub edge_pass: bool,
    pub sample_properties_pass: bool,
    pub feature_displacement_min: f64,
    pub ramp_risk: f64,
    pub gen_bound: f64,
    pub val_peak: Option<f64>,
    pub val_peak_t: Option<usize>,
    pub val_final: Option<f64>,
}

/// Everything one seed produces, in memory.
pub struct SeedOutcome {
    pub metrics: SeedMetrics,
    pub spec: DistributionSpec,
    pub train_set: Dataset,
    pub trace: TrainTrace,
    pub diagnostics: Vec<IterationDiagnostics>,
    /// Full report at `T`.
    pub final_report: DiagnosticsReport,
    pub curve: Vec<CurvePoint>,
}

impl SeedOutcome {
    pub fn final_params(&self) -> &NetworkParams {
        self.trace.last()
    }

    pub fn trace_csv(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.trace.write_csv(&mut buf)?;
        Ok(buf)
    }

    pub fn diagnostics_json(&self) -> Result<Vec<u8>> {
        let mut buf = serde_json::to_vec_pretty(&self.diagnostics)?;
        buf.push(b'\n');
        Ok(buf)
    }
}

fn train_accuracy(params: &NetworkParams, dataset: &Dataset) -> Result<f64> {
    let out = params.forward_batch(dataset.points().view())?;
    let hits = out.iter().zip(dataset.labels()).filter(|(f, y)| sign(**f) == **y).count();
    Ok(hits as f64 / dataset.n() as f64)
}

/// Samples, trains and evaluates one seed.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedOutcome> {
    cfg.validate()?;
    let spec = cfg.spec(seed)?;
    let train_set = sample_dataset(&spec, cfg.n_train, derive_seed(seed, SEED_TAG_TRAIN))?;
    let val_set = if cfg.n_val > 0 {
        Some(sample_dataset(&spec, cfg.n_val, derive_seed(seed, SEED_TAG_VAL))?)
    } else {
        None
    };
    let tc = cfg.train_config(seed)?;
    let last = tc.iterations;
    let tau = cfg.orth_horizon()?;
    let params0 = init_network(cfg.m, spec.d(), tc.omega_init, tc.subgrad_at_zero, tc.seed)?;
    let jsets = candidate_sets(&params0, &spec, &cfg.diagnostics)?;
    let edges = edge_counts(&params0, &train_set, &jsets, &cfg.diagnostics)?;
    let thresholds = SampleThresholds {
        c1: cfg.diagnostics.c1,
        delta: cfg.diagnostics.delta,
    };
    let sample_props = check_sample_properties(&train_set, &spec, &thresholds)?;

    let mut diag_ts: Vec<usize> = cfg.diag_iterations.iter().copied().filter(|&t| t <= last).collect();
    diag_ts.push(last);
    diag_ts.sort_unstable();
    diag_ts.dedup();

    let ctx = DiagnosticContext {
        spec: &spec,
        train: &train_set,
        params0: &params0,
        jsets: &jsets,
        recorder: None,
        test: (cfg.n_test > 0).then_some((cfg.n_test, derive_seed(seed, SEED_TAG_TEST))),
        cfg: &cfg.diagnostics,
    };
    let mut recorder = ProjectionRecorder::new(&spec, tc.alpha, tau);
    let mut reports: Vec<IterationDiagnostics> = Vec::new();
    let mut final_report = None;
    let mut alignment_all_hold = true;
    let mut alignment_min_fraction: f64 = 1.0;
    let mut amp = Vec::new();
    let mut curve = Vec::new();
    let mut failure: Option<Error> = None;

    let mut hook = |t: usize, p: &NetworkParams| {
        if failure.is_some() {
            return;
        }
        let mut step = || -> Result<()> {
            recorder.observe(t, p);
            if (1..=tau).contains(&t) {
                let a = alignment_check(p, &train_set, &jsets)?;
                alignment_all_hold &= a.all_hold;
                for s in &a.sets {
                    alignment_min_fraction = alignment_min_fraction.min(s.fraction);
                }
            }
            if t == 1 {
                amp = amplification(&params0, p, &spec, &jsets)?;
            }
            if diag_ts.binary_search(&t).is_ok() {
                let report = ctx.evaluate(t, p)?;
                reports.push(report.summary());
                if t == last {
                    final_report = Some(report);
                }
            }
            if let Some(val) = &val_set {
                if t % cfg.curve_every == 0 || t == last {
                    curve.push(CurvePoint {
                        t,
                        train_acc: train_accuracy(p, &train_set)?,
                        val_acc: 1.0 - error_on(p, val)?.error,
                    });
                }
            }
            Ok(())
        };
        if let Err(e) = step() {
            failure = Some(e);
        }
    };
    let trace = train_from(params0.clone(), &train_set, &tc, Some(&mut hook))?;
    if let Some(e) = failure {
        return Err(e);
    }
    let final_report = final_report.expect("final iteration is always evaluated");

    let mut almost_orth = None;
    for r in reports.iter_mut().filter(|r| (1..=tau).contains(&r.t)) {
        let check = almost_orth_check(&recorder, &jsets, r.t)?;
        r.almost_orth = Some(AlmostOrthSummary {
            holds: check.holds,
            max_violation_ratio: check.max_violation_ratio,
        });
    }
    let mut almost_orth_initial_ratio = None;
    if tau >= 1 {
        let check = almost_orth_check(&recorder, &jsets, tau)?;
        almost_orth_initial_ratio = Some(check.initial_ratio);
        almost_orth = Some(AlmostOrthSummary {
            holds: check.holds,
            max_violation_ratio: check.max_violation_ratio,
        });
    }
    let growth = norm_growth_check(&recorder);
    let rec = trace.final_record();
    let margins = &final_report.margins;
    let (val_peak, val_peak_t) = match curve.iter().max_by(|a, b| a.val_acc.total_cmp(&b.val_acc).then(b.t.cmp(&a.t))) {
        Some(c) => (Some(c.val_acc), Some(c.t)),
        None => (None, None),
    };
    let final_summary = final_report.summary();
    let metrics = SeedMetrics {
        seed,
        iterations: last,
        n_noisy: train_set.noisy_set().len(),
        eta: spec.eta(),
        final_risk: rec.empirical_risk,
        final_train_acc: margins.margins.iter().filter(|m| **m > 0.0).count() as f64 / train_set.n() as f64,
        final_clean_acc: rec.clean_acc,
        final_noisy_acc: rec.noisy_acc,
        clean_all_correct: final_report.clean_all_correct,
        noisy_all_incorrect: final_report.noisy_all_incorrect,
        min_clean_margin: margins.min_clean,
        max_noisy_margin: margins.max_noisy,
        gamma_margin_pass: final_report.gamma_margin_pass,
        test_error: final_summary.test_error,
        test_error_se: final_summary.test_error_se,
        j_sizes: final_summary.j_sizes.clone(),
        j_fraction: final_report.j_fraction,
        orth_horizon: tau,
        alignment_all_hold: tau >= 1 && alignment_all_hold,
        alignment_min_fraction,
        almost_orth,
        almost_orth_initial_ratio,
        norm_growth_holds: growth.holds,
        max_neuron_growth_ratio: growth.max_neuron_ratio,
        max_frob_growth_ratio: growth.max_frob_ratio,
        amplification: amp,
        min_edge_fraction: edges.min_edge_fraction,
        edge_pass: edges.pass,
        sample_properties_pass: sample_props.all_pass,
        feature_displacement_min: final_report.feature_displacement.min,
        ramp_risk: final_report.ramp_risk,
        gen_bound: final_report.generalization_bound_value,
        val_peak,
        val_peak_t,
        val_final: curve.last().map(|c| c.val_acc),
    };
    Ok(SeedOutcome {
        metrics,
        spec,
        train_set,
        trace,
        diagnostics: reports,
        final_report,
        curve,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateOutcome {
    pub name: String,
    pub pass: bool,
    /// Passing seeds for per-seed predicates, or the mean for averaged ones.
    pub value: f64,
    pub detail: String,
}

fn required(min_fraction: f64, seeds: usize) -> usize {
    (min_fraction * seeds as f64 - 1e-9).ceil().max(0.0) as usize
}

fn count_outcome(name: &str, metrics: &[SeedMetrics], min_fraction: f64, ok: impl Fn(&SeedMetrics) -> bool) -> PredicateOutcome {
    let passing: Vec<u64> = metrics.iter().filter(|m| ok(m)).map(|m| m.seed).collect();
    let need = required(min_fraction, metrics.len());
    PredicateOutcome {
        name: name.to_string(),
        pass: passing.len() >= need,
        value: passing.len() as f64,
        detail: format!("{} of {} seeds pass (need {need}); passing seeds {passing:?}", passing.len(), metrics.len()),
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn evaluate_predicate(p: &Predicate, metrics: &[SeedMetrics]) -> PredicateOutcome {
    let name = p.name();
    match *p {
        Predicate::SignSeparation { min_fraction } => {
            count_outcome(name, metrics, min_fraction, |m| m.clean_all_correct && m.noisy_all_incorrect)
        }
        Predicate::TestError { slack, min_fraction } => count_outcome(name, metrics, min_fraction, |m| {
            m.test_error.is_some_and(|e| e <= m.eta + slack)
        }),
        Predicate::Amplification {
            factor,
            floor,
            min_fraction,
        } => count_outcome(name, metrics, min_fraction, |m| {
            m.amplification.len() == 4
                && m.amplification.iter().all(|a| match (a.median_before, a.median_after) {
                    (Some(b), Some(t1)) => t1 >= factor * b && t1 >= floor,
                    _ => false,
                })
        }),
        Predicate::AlignmentOrthogonality { min_fraction } => count_outcome(name, metrics, min_fraction, |m| {
            m.alignment_all_hold && m.alignment_min_fraction == 1.0 && m.almost_orth.as_ref().is_some_and(|a| a.holds)
        }),
        Predicate::NormGrowth { min_fraction } => count_outcome(name, metrics, min_fraction, |m| m.norm_growth_holds),
        Predicate::TrainFit {
            clean_acc,
            noisy_acc,
            min_fraction,
        } => count_outcome(name, metrics, min_fraction, |m| {
            m.final_clean_acc.is_none_or(|v| v == clean_acc) && m.final_noisy_acc.is_none_or(|v| v == noisy_acc)
        }),
        Predicate::FinalValAccuracy {
            min_mean,
            require_interpolation,
        } => {
            let finals: Vec<f64> = metrics.iter().map(|m| m.val_final.unwrap_or(f64::NAN)).collect();
            let avg = mean(&finals);
            let interpolated = metrics.iter().filter(|m| m.final_train_acc == 1.0).count();
            let interp_ok = !require_interpolation || interpolated == metrics.len();
            PredicateOutcome {
                name: name.to_string(),
                pass: avg >= min_mean && interp_ok,
                value: avg,
                detail: format!(
                    "mean final validation accuracy {avg:.4} (need {min_mean}); {interpolated} of {} seeds interpolate",
                    metrics.len()
                ),
            }
        }
        Predicate::ValPeakDrop { min_mean_drop } => {
            let drops: Vec<f64> = metrics
                .iter()
                .map(|m| match (m.val_peak, m.val_final) {
                    (Some(p), Some(f)) => p - f,
                    _ => f64::NAN,
                })
                .collect();
            let avg = mean(&drops);
            PredicateOutcome {
                name: name.to_string(),
                pass: avg >= min_mean_drop,
                value: avg,
                detail: format!("mean peak-minus-final validation accuracy {avg:.4} (need {min_mean_drop}); per seed {drops:?}"),
            }
        }
    }
}

pub fn evaluate_predicates(predicates: &[Predicate], metrics: &[SeedMetrics]) -> Vec<PredicateOutcome> {
    predicates.iter().map(|p| evaluate_predicate(p, metrics)).collect()
}

/// Top-level `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub seeds: Vec<SeedMetrics>,
    pub predicates: Vec<PredicateOutcome>,
    pub all_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub crate_version: String,
    pub checkpoint_format: String,
}

/// `manifest.json`: the resolved configuration plus timestamps. The
/// configuration alone reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub versions: Versions,
    pub assumption_proxies: AssumptionProxies,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub seconds_per_seed: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedArtifacts {
    pub seed: u64,
    pub dir: PathBuf,
    pub trace: PathBuf,
    pub diagnostics: PathBuf,
    pub summary: PathBuf,
    pub curve: Option<PathBuf>,
    pub boundary_svg: Option<PathBuf>,
    pub grid_csv: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub manifest: PathBuf,
    pub summary_path: PathBuf,
    pub curves: Option<PathBuf>,
    pub seeds: Vec<SeedArtifacts>,
    pub summary: RunSummary,
}

fn now_unix() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_file(path, &bytes)
}

/// Runs every seed in order and writes all artifacts under `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunArtifacts> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let started = now_unix();
    let mut seeds = cfg.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    let mut metrics = Vec::new();
    let mut artifacts = Vec::new();
    let mut curves = Vec::new();
    let mut timing = BTreeMap::new();
    for &seed in &seeds {
        let clock = std::time::Instant::now();
        let outcome = run_seed(cfg, seed)?;
        timing.insert(seed.to_string(), clock.elapsed().as_secs_f64());
        artifacts.push(write_seed(cfg, &outcome, &out.join(format!("seed_{seed}")))?);
        if !outcome.curve.is_empty() {
            curves.push(outcome.curve.clone());
        }
        metrics.push(outcome.metrics);
    }
    let predicates = evaluate_predicates(&cfg.acceptance, &metrics);
    let summary = RunSummary {
        name: cfg.name.clone(),
        all_pass: predicates.iter().all(|p| p.pass),
        seeds: metrics,
        predicates,
    };
    let summary_path = out.join("summary.json");
    write_json(&summary_path, &summary)?;
    let curves_path = if curves.is_empty() {
        None
    } else {
        let rows = accuracy_curves(&curves)?;
        let path = out.join("curves.csv");
        let mut buf = Vec::new();
        write_curves_csv(&rows, &mut buf)?;
        write_file(&path, &buf)?;
        Some(path)
    };
    let manifest = Manifest {
        config: cfg.clone(),
        versions: Versions {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            checkpoint_format: "xorgd-checkpoint-v1".to_string(),
        },
        assumption_proxies: assumption_proxies(cfg),
        started_unix: started,
        finished_unix: now_unix(),
        seconds_per_seed: timing,
    };
    let manifest_path = out.join("manifest.json");
    write_json(&manifest_path, &manifest)?;
    Ok(RunArtifacts {
        manifest: manifest_path,
        summary_path,
        curves: curves_path,
        seeds: artifacts,
        summary,
    })
}

fn write_seed(cfg: &ExperimentConfig, outcome: &SeedOutcome, dir: &Path) -> Result<SeedArtifacts> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let trace = dir.join("trace.csv");
    write_file(&trace, &outcome.trace_csv()?)?;
    let diagnostics = dir.join("diagnostics.json");
    write_file(&diagnostics, &outcome.diagnostics_json()?)?;
    let summary = dir.join("summary.json");
    write_json(&summary, &outcome.metrics)?;
    let curve = if outcome.curve.is_empty() {
        None
    } else {
        let path = dir.join("curve.csv");
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["t", "train_acc", "val_acc"])?;
        for c in &outcome.curve {
            w.write_record([c.t.to_string(), fmt_f64(c.train_acc), fmt_f64(c.val_acc)])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::format("curve", e))?;
        write_file(&path, &bytes)?;
        Some(path)
    };
    let params = outcome.final_params();
    let (mut boundary_svg, mut grid_csv) = (None, None);
    if cfg.outputs.boundary && params.d() == 2 {
        let grid = decision_boundary_grid(params, cfg.outputs.grid_bounds, cfg.outputs.grid_resolution)?;
        let csv_path = dir.join("grid.csv");
        let mut buf = Vec::new();
        grid.write_csv(&mut buf)?;
        write_file(&csv_path, &buf)?;
        let svg_path = dir.join("boundary.svg");
        write_file(&svg_path, grid.to_svg(Some(&outcome.train_set)).as_bytes())?;
        boundary_svg = Some(svg_path);
        grid_csv = Some(csv_path);
    }
    let checkpoint = if cfg.outputs.checkpoint {
        let path = dir.join("checkpoint.csv");
        params.save_checkpoint(&path, Some(outcome.metrics.seed))?;
        Some(path)
    } else {
        None
    };
    let dataset = if cfg.outputs.dataset {
        let path = dir.join("train.csv");
        outcome.train_set.save_csv(&path)?;
        Some(path)
    } else {
        None
    };
    Ok(SeedArtifacts {
        seed: outcome.metrics.seed,
        dir: dir.to_path_buf(),
        trace,
        diagnostics,
        summary,
        curve,
        boundary_svg,
        grid_csv,
        checkpoint,
        dataset,
    })
}

pub fn load_manifest(out: &Path) -> Result<Manifest> {
    let path = out.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_summary(out: &Path) -> Result<RunSummary> {
    let path = out.join("summary.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Re-evaluates the manifest's predicates from the per-seed metrics on disk.
pub fn check(out: &Path) -> Result<Vec<PredicateOutcome>> {
    let manifest = load_manifest(out)?;
    let summary = load_summary(out)?;
    Ok(evaluate_predicates(&manifest.config.acceptance, &summary.seeds))
}

/// Signs of `f` at the centres of a `res x res` grid; row `r` holds the
/// cells with the `r`-th smallest `x1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryGrid {
    pub bounds: [f64; 4],
    pub resolution: usize,
    pub signs: Vec<i8>,
}

/// SVG fill for grid cells of each sign.
pub fn region_color(sign: i8) -> &'static str {
    match sign {
        1 => "#f3c4c4",
        -1 => "#c4d3f3",
        _ => "#ffffff",
    }
}

impl BoundaryGrid {
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        let [x0a, x0b, x1a, x1b] = self.bounds;
        let r = self.resolution as f64;
        (
            x0a + (col as f64 + 0.5) * (x0b - x0a) / r,
            x1a + (row as f64 + 0.5) * (x1b - x1a) / r,
        )
    }

    pub fn sign_at(&self, row: usize, col: usize) -> i8 {
        self.signs[row * self.resolution + col]
    }

    /// Writes `x0,x1,sign` for every cell.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x0", "x1", "sign"])?;
        for row in 0..self.resolution {
            for col in 0..self.resolution {
                let (x0, x1) = self.cell_center(row, col);
                w.write_record([fmt_f64(x0), fmt_f64(x1), self.sign_at(row, col).to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io("<grid>", e))
    }

    /// Writes `<prefix>.csv` and `<prefix>.svg`.
    pub fn save(&self, prefix: &Path, points: Option<&Dataset>) -> Result<(PathBuf, PathBuf)> {
        let csv_path = prefix.with_extension("csv");
        let svg_path = prefix.with_extension("svg");
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        write_file(&csv_path, &buf)?;
        write_file(&svg_path, self.to_svg(points).as_bytes())?;
        Ok((csv_path, svg_path))
    }

    /// Regions as horizontal runs of equal sign in grid units (the viewBox
    /// is `res x res`, top row = largest `x1`), overlaid with `points`
    /// colored by observed label and outlined when noisy.
    pub fn to_svg(&self, points: Option<&Dataset>) -> String {
        let res = self.resolution;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="600" height="600" viewBox="0 0 {res} {res}" shape-rendering="crispEdges">"#
        );
        let _ = writeln!(s, r#"<g class="regions">"#);
        for row in 0..res {
            let y = res - 1 - row;
            let mut col = 0;
            while col < res {
                let v = self.sign_at(row, col);
                let start = col;
                while col < res && self.sign_at(row, col) == v {
                    col += 1;
                }
                let _ = writeln!(
                    s,
                    r#"<rect x="{start}" y="{y}" width="{}" height="1" fill="{}" data-sign="{v}"/>"#,
                    col - start,
                    region_color(v)
                );
            }
        }
        let _ = writeln!(s, "</g>");
        if let Some(ds) = points {
            let [x0a, x0b, x1a, x1b] = self.bounds;
            let r = res as f64;
            let radius = (r / 150.0).max(0.3);
            let _ = writeln!(s, r#"<g class="points">"#);
            for i in 0..ds.n() {
                let p = ds.point(i);
                if !(x0a..=x0b).contains(&p[0]) || !(x1a..=x1b).contains(&p[1]) {
                    continue;
                }
                let cx = (p[0] - x0a) / (x0b - x0a) * r;
                let cy = (x1b - p[1]) / (x1b - x1a) * r;
                let fill = if ds.labels()[i] > 0.0 { "#b03a2e" } else { "#2e5aa8" };
                let stroke = if ds.is_noisy(i) {
                    format!(r##" stroke="#000000" stroke-width="{:.3}""##, radius * 0.6)
                } else {
                    String::new()
                };
                let _ = writeln!(s, r#"<circle cx="{cx:.4}" cy="{cy:.4}" r="{radius:.3}" fill="{fill}"{stroke}/>"#);
            }
            let _ = writeln!(s, "</g>");
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Evaluates `sgn f` on a uniform grid over `bounds`.
pub fn decision_boundary_grid(params: &NetworkParams, bounds: [f64; 4], resolution: usize) -> Result<BoundaryGrid> {
    if params.d() != 2 {
        return Err(Error::UnsupportedDimension(params.d()));
    }
    if resolution == 0 || !(bounds[0] < bounds[1] && bounds[2] < bounds[3]) {
        return Err(Error::Config(format!("bad grid: bounds {bounds:?}, resolution {resolution}")));
    }
    let mut grid = BoundaryGrid {
        bounds,
        resolution,
        signs: Vec::with_capacity(resolution * resolution),
    };
    for row in 0..resolution {
        for col in 0..resolution {
            let (x0, x1) = grid.cell_center(row, col);
            grid.signs.push(sign(params.forward(&[x0, x1])?) as i8);
        }
    }
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub t: usize,
    pub train_mean: f64,
    pub train_sd: f64,
    pub val_mean: f64,
    pub val_sd: f64,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    (m, var.sqrt())
}

/// Per-iteration mean and (population) standard deviation across seeds.
pub fn accuracy_curves(curves: &[Vec<CurvePoint>]) -> Result<Vec<CurveRow>> {
    let first = curves.first().ok_or(Error::GridMismatch)?;
    if curves.iter().any(|c| c.len() != first.len() || c.iter().zip(first).any(|(a, b)| a.t != b.t)) {
        return Err(Error::GridMismatch);
    }
    Ok((0..first.len())
        .map(|k| {
            let train: Vec<f64> = curves.iter().map(|c| c[k].train_acc).collect();
            let val: Vec<f64> = curves.iter().map(|c| c[k].val_acc).collect();
            let (train_mean, train_sd) = mean_sd(&train);
            let (val_mean, val_sd) = mean_sd(&val);
            CurveRow {
                t: first[k].t,
                train_mean,
                train_sd,
                val_mean,
                val_sd,
            }
        })
        .collect())
}

/// Writes `t,train_mean,train_sd,val_mean,val_sd`.
pub fn write_curves_csv<W: Write>(rows: &[CurveRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "train_mean", "train_sd", "val_mean", "val_sd"])?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            fmt_f64(r.train_mean),
            fmt_f64(r.train_sd),
            fmt_f64(r.val_mean),
            fmt_f64(r.val_sd),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<curves>", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::reference_network;
    use ndarray::Array2;

    #[test]
    fn presets_resolve() {
        for name in PRESETS {
            preset(name).unwrap().validate().unwrap();
        }
        assert!(matches!(preset("fig3"), Err(Error::UnknownPreset(_))));
        let f1 = preset("fig1").unwrap();
        assert_eq!((f1.train.alpha, f1.m), (0.05, 500));
        let hi = preset("fig2_highdim").unwrap();
        let (m, d) = (hi.m as f64, hi.distribution.d as f64);
        assert!((hi.train.omega_init.powi(2) - 0.01 / (m * d)).abs() < 1e-18);
        assert_eq!(preset("theorem").unwrap().iterations().unwrap(), 4);
    }

    #[test]
    fn overrides() {
        let mut c = preset("theorem").unwrap();
        c.apply_override("train.alpha=0.05").unwrap();
        assert_eq!(c.iterations().unwrap(), 6);
        c.apply_override("name=custom").unwrap();
        assert_eq!(c.name, "custom");
        c.apply_override("seeds=[4,5]").unwrap();
        assert_eq!(c.seeds, vec![4, 5]);
        c.apply_override("outputs.grid_bounds.1=3.5").unwrap();
        assert_eq!(c.outputs.grid_bounds[1], 3.5);
        assert!(c.apply_override("train.alpah=0.1").is_err());
        assert!(c.apply_override("m=-3").is_err());
        assert!(c.apply_override("noequals").is_err());
    }

    #[test]
    fn zero_samples_rejected() {
        let mut c = preset("theorem").unwrap();
        c.n_train = 0;
        assert!(c.validate().is_err());
        let dir = tempfile::tempdir().unwrap();
        assert!(run(&c, &dir.path().join("out")).is_err());
        assert!(!dir.path().join("out").exists());
    }

    #[test]
    fn zero_network_grid() {
        let p = NetworkParams::from_weights(Array2::zeros((4, 2)), 0.0).unwrap();
        let g = decision_boundary_grid(&p, [-1.0, 1.0, -1.0, 1.0], 8).unwrap();
        assert!(g.signs.iter().all(|s| *s == 0));
        let svg = g.to_svg(None);
        assert_eq!(svg.matches("<rect").count(), 8);
        assert!(!svg.contains(region_color(1)) && !svg.contains(region_color(-1)));
    }

    #[test]
    fn grid_needs_plane() {
        let p = NetworkParams::from_weights(Array2::zeros((4, 3)), 0.0).unwrap();
        assert!(matches!(
            decision_boundary_grid(&p, [-1.0, 1.0, -1.0, 1.0], 4),
            Err(Error::UnsupportedDimension(3))
        ));
    }

    #[test]
    fn reference_grid_closed_form() {
        let spec = make_spec(2, 0.0, 0.0, MeanMode::Canonical, 0).unwrap();
        let p = reference_network(&spec).unwrap();
        let g = decision_boundary_grid(&p, [-2.0, 2.0, -2.0, 2.0], 41).unwrap();
        for row in 0..41 {
            for col in 0..41 {
                let (x0, x1) = g.cell_center(row, col);
                let expected = if x0.abs() > x1.abs() {
                    1
                } else if x0.abs() < x1.abs() {
                    -1
                } else {
                    0
                };
                assert_eq!(g.sign_at(row, col), expected, "({x0}, {x1})");
            }
        }
    }

    #[test]
    fn curves() {
        let c = vec![
            CurvePoint { t: 0, train_acc: 0.5, val_acc: 0.4 },
            CurvePoint { t: 10, train_acc: 1.0, val_acc: 0.8 },
        ];
        let rows = accuracy_curves(std::slice::from_ref(&c)).unwrap();
        assert!(rows.iter().all(|r| r.train_sd == 0.0 && r.val_sd == 0.0));
        let mut d = c.clone();
        d[1].val_acc = 0.6;
        let rows = accuracy_curves(&[c.clone(), d.clone()]).unwrap();
        assert!((rows[1].val_mean - 0.7).abs() < 1e-15);
        assert!((rows[1].val_sd - 0.1).abs() < 1e-15);
        d[1].t = 11;
        assert!(matches!(accuracy_curves(&[c, d]), Err(Error::GridMismatch)));
        assert!(accuracy_curves(&[]).is_err());
    }

    #[test]
    fn required_counts() {
        assert_eq!(required(0.9, 10), 9);
        assert_eq!(required(0.8, 10), 8);
        assert_eq!(required(1.0, 3), 3);
        assert_eq!(required(0.9, 1), 1);
    }

    #[test]
    fn theorem_proxies() {
        let p = assumption_proxies(&preset("theorem").unwrap());
        assert!((p.step_c_range[0] - 25.0).abs() < 1e-9 && (p.step_c_range[1] - 100.0).abs() < 1e-9);
        assert!((p.variance_max_c - 4.0).abs() < 1e-12);
        // the variance and step-size assumptions cannot hold together here
        assert_eq!(p.joint_c_range, None);
    }
}
