//! Runtime predicates for the feature-learning analysis: candidate neuron
//! sets, neuron alignment, almost-orthogonality, correlation amplification,
//! activation edges, margins, test error and the margin-based
//! generalization bound.

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::distribution::{sample_dataset_range, Cluster, Dataset, DistributionSpec};
use crate::error::{Error, Result};
use crate::linalg::{dot, median, norm, relu, sign};
use crate::network::NetworkParams;

/// Test sets are drawn and scored in chunks of this many samples.
const TEST_CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticsConfig {
    /// Candidate-set constant.
    pub c0: f64,
    /// Correlation threshold is `scale / sqrt(d)`; `None` means `1 / (3 c0)`.
    pub correlation_threshold_scale: Option<f64>,
    /// Required minimum of `edge / n`; stands in for `1 / C2`.
    pub edge_constant: f64,
    /// Sample-concentration constant.
    pub c1: f64,
    /// Margin constant of the generalization bound.
    pub gamma: f64,
    pub delta: f64,
    pub tolerance: f64,
}

/// `4^5 * 1024^2 * e^4`.
pub fn default_c0() -> f64 {
    4f64.powi(5) * 1024f64.powi(2) * 4f64.exp()
}

/// `e^-2 / (16 * 1024)`.
pub fn default_gamma() -> f64 {
    (-2f64).exp() / 16384.0
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            c0: default_c0(),
            correlation_threshold_scale: None,
            edge_constant: 0.05,
            c1: 2.0,
            gamma: default_gamma(),
            delta: 0.01,
            tolerance: 1e-9,
        }
    }
}

impl DiagnosticsConfig {
    pub fn validate(&self) -> Result<()> {
        let scale = self.threshold_scale();
        for (name, v) in [
            ("c0", self.c0),
            ("correlation_threshold_scale", scale),
            ("edge_constant", self.edge_constant),
            ("c1", self.c1),
            ("gamma", self.gamma),
            ("tolerance", self.tolerance),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        Ok(())
    }

    pub fn threshold_scale(&self) -> f64 {
        self.correlation_threshold_scale.unwrap_or(1.0 / (3.0 * self.c0))
    }

    /// Normalized-correlation threshold for candidate neurons.
    pub fn correlation_threshold(&self, d: usize) -> f64 {
        self.threshold_scale() / (d as f64).sqrt()
    }

    /// Subnetwork margin constant `4096 e^2 / (1 - 1/c0)^2`.
    pub fn c3(&self) -> f64 {
        4096.0 * 2f64.exp() / (1.0 - 1.0 / self.c0).powi(2)
    }
}

/// The four candidate neuron sets `J_{+mu1}, J_{-mu1}, J_{+mu2}, J_{-mu2}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSets {
    sets: [Vec<usize>; 4],
}

impl CandidateSets {
    pub fn new(sets: [Vec<usize>; 4]) -> Self {
        CandidateSets { sets }
    }

    pub fn get(&self, cluster: Cluster) -> &[usize] {
        &self.sets[cluster.index()]
    }

    pub fn sizes(&self) -> [usize; 4] {
        [0, 1, 2, 3].map(|k| self.sets[k].len())
    }

    /// Sorted union of the four sets.
    pub fn union(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.sets.iter().flatten().copied().collect();
        all.sort_unstable();
        all.dedup();
        all
    }

    pub fn fraction(&self, m: usize) -> f64 {
        self.union().len() as f64 / m as f64
    }
}

/// `J_mu` for `mu` in `{±mu1}`: positive neurons whose initial direction has
/// correlation at least the threshold with `mu`; same with negative neurons
/// for `{±mu2}`. Zero-norm and zero-weight neurons are never included.
///
/// `params0` must be the initialization; this cannot be checked.
pub fn candidate_sets(params0: &NetworkParams, spec: &DistributionSpec, cfg: &DiagnosticsConfig) -> Result<CandidateSets> {
    cfg.validate()?;
    if params0.d() != spec.d() {
        return Err(Error::shape(format!("d = {}", spec.d()), format!("d = {}", params0.d())));
    }
    let threshold = cfg.correlation_threshold(spec.d());
    let sets = Cluster::ALL.map(|c| {
        let mean = spec.mean(c);
        (0..params0.m())
            .filter(|&j| {
                let a = params0.a()[j];
                let right_sign = if c.is_mu1() { a > 0.0 } else { a < 0.0 };
                let nrm = params0.neuron_norm(j);
                right_sign && nrm > 0.0 && dot(params0.row(j), &mean) / nrm >= threshold
            })
            .collect()
    });
    Ok(CandidateSets { sets })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetAlignment {
    pub cluster: Cluster,
    pub size: usize,
    pub satisfied: usize,
    /// `satisfied / size`, or `1.0` for an empty set.
    pub fraction: f64,
    /// The cluster or its opposite has no samples, so a clause is vacuous.
    pub vacuous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub sets: Vec<SetAlignment>,
    pub all_hold: bool,
}

impl AlignmentReport {
    pub fn fractions(&self) -> BTreeMap<String, f64> {
        self.sets.iter().map(|s| (s.cluster.code().to_string(), s.fraction)).collect()
    }
}

/// Neuron alignment: every `j` in `J_mu` has `phi' = 1` on all of `I_mu` and
/// `phi' = 0` on all of `I_{-mu}`, with `phi'(0)` taken from `params`.
pub fn alignment_check(params: &NetworkParams, dataset: &Dataset, jsets: &CandidateSets) -> Result<AlignmentReport> {
    if params.d() != dataset.d() {
        return Err(Error::shape(format!("d = {}", params.d()), format!("d = {}", dataset.d())));
    }
    let mut sets = Vec::with_capacity(4);
    for c in Cluster::ALL {
        let on = dataset.cluster_indices(c);
        let off = dataset.cluster_indices(c.opposite());
        let members = jsets.get(c);
        let mut satisfied = 0;
        for &j in members {
            if j >= params.m() {
                return Err(Error::Index { index: j, m: params.m() });
            }
            let w = params.row(j);
            let fires = |i: &usize| {
                let x = dataset.point(*i);
                params.relu_deriv(dot(w, x.as_slice().expect("contiguous rows")))
            };
            if on.iter().all(|i| fires(i) == 1.0) && off.iter().all(|i| fires(i) == 0.0) {
                satisfied += 1;
            }
        }
        let fraction = if members.is_empty() {
            1.0
        } else {
            satisfied as f64 / members.len() as f64
        };
        sets.push(SetAlignment {
            cluster: c,
            size: members.len(),
            satisfied,
            fraction,
            vacuous: on.is_empty() || off.is_empty(),
        });
    }
    let all_hold = sets.iter().all(|s| s.satisfied == s.size);
    Ok(AlignmentReport { sets, all_hold })
}

/// Per-iteration projections `<w_j, mu1>`, `<w_j, mu2>` (up to a horizon) and
/// weight-growth ratios (every iteration), collected from a training hook.
#[derive(Debug, Clone)]
pub struct ProjectionRecorder {
    mu1: Vec<f64>,
    mu2: Vec<f64>,
    horizon: usize,
    alpha: f64,
    a: Vec<f64>,
    projections: BTreeMap<usize, (Vec<f64>, Vec<f64>)>,
    growth: BTreeMap<usize, GrowthRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub t: usize,
    /// `max_j ||w_j|| / (2 |a_j| alpha t)` over neurons with `a_j != 0`.
    pub neuron_ratio: f64,
    /// `||W||_F / (2 alpha t)`.
    pub frob_ratio: f64,
}

impl ProjectionRecorder {
    /// Records projections for `t <= horizon`; `alpha` scales the growth
    /// ratios.
    pub fn new(spec: &DistributionSpec, alpha: f64, horizon: usize) -> Self {
        ProjectionRecorder {
            mu1: spec.mu1().to_vec(),
            mu2: spec.mu2().to_vec(),
            horizon,
            alpha,
            a: Vec::new(),
            projections: BTreeMap::new(),
            growth: BTreeMap::new(),
        }
    }

    pub fn observe(&mut self, t: usize, params: &NetworkParams) {
        if self.a.is_empty() {
            self.a = params.a().to_vec();
        }
        if t <= self.horizon {
            let p1 = (0..params.m()).map(|j| dot(params.row(j), &self.mu1)).collect();
            let p2 = (0..params.m()).map(|j| dot(params.row(j), &self.mu2)).collect();
            self.projections.insert(t, (p1, p2));
        }
        if t >= 1 {
            let scale = 2.0 * self.alpha * t as f64;
            let neuron_ratio = params
                .active_neurons()
                .map(|j| params.neuron_norm(j) / (params.a()[j].abs() * scale))
                .fold(0.0, f64::max);
            self.growth.insert(
                t,
                GrowthRow {
                    t,
                    neuron_ratio,
                    frob_ratio: params.frobenius_norm() / scale,
                },
            );
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn second_layer(&self) -> &[f64] {
        &self.a
    }

    /// `(<w_j, mu1>, <w_j, mu2>)` for every neuron at iteration `t`.
    pub fn projections(&self, t: usize) -> Option<(&[f64], &[f64])> {
        self.projections.get(&t).map(|(a, b)| (a.as_slice(), b.as_slice()))
    }

    pub fn growth(&self) -> impl Iterator<Item = &GrowthRow> {
        self.growth.values()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlmostOrthReport {
    /// All ratios for `1 <= t <= tau` are at most one.
    pub holds: bool,
    pub max_violation_ratio: f64,
    /// `(t, max ratio at t)` for `t = 1..=tau`.
    pub per_iteration: Vec<(usize, f64)>,
    /// The ratio at `t = 0`, reported but not part of `holds`.
    pub initial_ratio: f64,
}

fn cross_ratio(j: usize, cluster: Cluster, p1: &[f64], p2: &[f64], a: &[f64], alpha: f64) -> f64 {
    let cross = if cluster.is_mu1() { p2[j] } else { p1[j] };
    cross.abs() / (3.0 * alpha * a[j].abs())
}

/// Almost-orthogonality up to `tau`: for `j` in `J_{±mu1}`,
/// `|<w_j^(t), mu2>| <= 3 alpha |a_j|` (and symmetrically for `J_{±mu2}`)
/// for `1 <= t <= tau`. Iterations `0..=tau` must all have been recorded.
pub fn almost_orth_check(recorder: &ProjectionRecorder, jsets: &CandidateSets, tau: usize) -> Result<AlmostOrthReport> {
    let alpha = recorder.alpha;
    let a = &recorder.a;
    let mut per_iteration = Vec::with_capacity(tau);
    let mut initial_ratio = 0.0;
    for t in 0..=tau {
        let (p1, p2) = recorder.projections(t).ok_or(Error::IncompleteTrace(t))?;
        let mut worst: f64 = 0.0;
        for c in Cluster::ALL {
            for &j in jsets.get(c) {
                if j >= a.len() {
                    return Err(Error::Index { index: j, m: a.len() });
                }
                worst = worst.max(cross_ratio(j, c, p1, p2, a, alpha));
            }
        }
        if t == 0 {
            initial_ratio = worst;
        } else {
            per_iteration.push((t, worst));
        }
    }
    let max_violation_ratio = per_iteration.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(AlmostOrthReport {
        holds: max_violation_ratio <= 1.0,
        max_violation_ratio,
        per_iteration,
        initial_ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormGrowthReport {
    pub holds: bool,
    pub max_neuron_ratio: f64,
    pub max_frob_ratio: f64,
    pub iterations_checked: usize,
}

/// Weight-growth bounds `||w_j^(t)|| <= 2 |a_j| alpha t` and
/// `||W^(t)||_F <= 2 alpha t` for every recorded `t >= 1`.
pub fn norm_growth_check(recorder: &ProjectionRecorder) -> NormGrowthReport {
    let mut max_neuron_ratio: f64 = 0.0;
    let mut max_frob_ratio: f64 = 0.0;
    let mut count = 0;
    for row in recorder.growth() {
        max_neuron_ratio = max_neuron_ratio.max(row.neuron_ratio);
        max_frob_ratio = max_frob_ratio.max(row.frob_ratio);
        count += 1;
    }
    NormGrowthReport {
        holds: max_neuron_ratio <= 1.0 && max_frob_ratio <= 1.0,
        max_neuron_ratio,
        max_frob_ratio,
        iterations_checked: count,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlations {
    /// `<w_j / ||w_j||, mu>`, zero for zero-norm neurons.
    pub values: Vec<f64>,
    pub zero_norm: Vec<usize>,
}

impl Correlations {
    /// Median over `subset`, skipping zero-norm neurons.
    pub fn median_over(&self, subset: &[usize]) -> Option<f64> {
        let vals: Vec<f64> = subset
            .iter()
            .filter(|j| !self.zero_norm.contains(j))
            .map(|&j| self.values[j])
            .collect();
        median(&vals)
    }
}

pub fn normalized_correlations(params: &NetworkParams, mu: &[f64]) -> Result<Correlations> {
    if mu.len() != params.d() {
        return Err(Error::shape(format!("mean of length {}", params.d()), mu.len()));
    }
    if (norm(mu) - 1.0).abs() > 1e-9 {
        return Err(Error::Config("correlation direction must be a unit vector".into()));
    }
    let mut zero_norm = Vec::new();
    let values = (0..params.m())
        .map(|j| {
            let n = params.neuron_norm(j);
            if n == 0.0 {
                zero_norm.push(j);
                0.0
            } else {
                dot(params.row(j), mu) / n
            }
        })
        .collect();
    Ok(Correlations { values, zero_norm })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Amplification {
    pub cluster: Cluster,
    pub median_before: Option<f64>,
    pub median_after: Option<f64>,
    pub ratio: Option<f64>,
}

/// Median normalized correlation of `J_mu` with `mu` before and after.
pub fn amplification(
    before: &NetworkParams,
    after: &NetworkParams,
    spec: &DistributionSpec,
    jsets: &CandidateSets,
) -> Result<Vec<Amplification>> {
    Cluster::ALL
        .iter()
        .map(|&c| {
            let mean = spec.mean(c);
            let b = normalized_correlations(before, &mean)?.median_over(jsets.get(c));
            let a = normalized_correlations(after, &mean)?.median_over(jsets.get(c));
            let ratio = match (b, a) {
                (Some(b), Some(a)) if b > 0.0 => Some(a / b),
                _ => None,
            };
            Ok(Amplification {
                cluster: c,
                median_before: b,
                median_after: a,
                ratio,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeEntry {
    pub neuron: usize,
    pub cluster: Cluster,
    /// `sum_{clean i in I_mu} phi'(<w_j, x_i>) - sum_{clean i in I_-mu} phi'(<w_j, x_i>)`.
    /// Integral unless a pre-activation is exactly zero and `phi'(0)` is
    /// fractional.
    pub edge: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeReport {
    pub entries: Vec<EdgeEntry>,
    /// `min edge / n` over all candidate neurons.
    pub min_edge_fraction: Option<f64>,
    /// `min_edge_fraction >= edge_constant`.
    pub pass: bool,
}

/// Clean-sample activation edge of every candidate neuron at initialization.
pub fn edge_counts(params0: &NetworkParams, dataset: &Dataset, jsets: &CandidateSets, cfg: &DiagnosticsConfig) -> Result<EdgeReport> {
    if params0.d() != dataset.d() {
        return Err(Error::shape(format!("d = {}", params0.d()), format!("d = {}", dataset.d())));
    }
    let mut entries = Vec::new();
    for c in Cluster::ALL {
        let on = dataset.clean_cluster_indices(c);
        let off = dataset.clean_cluster_indices(c.opposite());
        for &j in jsets.get(c) {
            if j >= params0.m() {
                return Err(Error::Index { index: j, m: params0.m() });
            }
            let w = params0.row(j);
            let act = |idx: &[usize]| {
                idx.iter().fold(0.0, |acc, &i| {
                    let x = dataset.point(i);
                    acc + params0.relu_deriv(dot(w, x.as_slice().expect("contiguous rows")))
                })
            };
            entries.push(EdgeEntry {
                neuron: j,
                cluster: c,
                edge: act(&on) - act(&off),
            });
        }
    }
    let n = dataset.n() as f64;
    let min_edge_fraction = entries.iter().map(|e| e.edge / n).reduce(f64::min);
    Ok(EdgeReport {
        pass: min_edge_fraction.is_some_and(|v| v >= cfg.edge_constant),
        entries,
        min_edge_fraction,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    /// `y_i f(x_i)` (or `y_i f^J(x_i)`), in sample order.
    pub margins: Vec<f64>,
    pub min_clean: Option<f64>,
    pub max_noisy: Option<f64>,
    /// Every clean margin is strictly positive.
    pub clean_all_positive: bool,
    /// Every noisy margin is strictly negative.
    pub noisy_all_negative: bool,
}

impl MarginReport {
    /// Reported, never asserted: whether the smallest clean margin reaches
    /// `gamma`.
    pub fn clean_margin_at_least(&self, gamma: f64) -> bool {
        self.min_clean.is_some_and(|m| m >= gamma)
    }
}

/// Margins of the full network, or of the subnetwork on `subset`.
pub fn margin_report(params: &NetworkParams, dataset: &Dataset, subset: Option<&[usize]>) -> Result<MarginReport> {
    if params.d() != dataset.d() {
        return Err(Error::shape(format!("d = {}", params.d()), format!("d = {}", dataset.d())));
    }
    let labels = dataset.labels();
    let mut margins = Vec::with_capacity(dataset.n());
    for i in 0..dataset.n() {
        let x = dataset.point(i);
        let x = x.as_slice().expect("contiguous rows");
        let f = match subset {
            Some(s) => params.subnetwork_forward(s, x)?,
            None => params.forward(x)?,
        };
        margins.push(labels[i] * f);
    }
    let mut min_clean: Option<f64> = None;
    let mut max_noisy: Option<f64> = None;
    for (i, &mg) in margins.iter().enumerate() {
        if dataset.is_noisy(i) {
            max_noisy = Some(max_noisy.map_or(mg, |v| v.max(mg)));
        } else {
            min_clean = Some(min_clean.map_or(mg, |v| v.min(mg)));
        }
    }
    Ok(MarginReport {
        clean_all_positive: min_clean.is_none_or(|v| v > 0.0),
        noisy_all_negative: max_noisy.is_none_or(|v| v < 0.0),
        margins,
        min_clean,
        max_noisy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub error: f64,
    pub std_err: f64,
    pub n: usize,
}

impl ErrorEstimate {
    fn from_count(errors: usize, n: usize) -> Self {
        let p = errors as f64 / n as f64;
        ErrorEstimate {
            error: p,
            std_err: (p * (1.0 - p) / n as f64).sqrt(),
            n,
        }
    }
}

fn check_n_test(n_test: usize) -> Result<()> {
    if n_test == 0 {
        return Err(Error::Config("n_test must be at least 1".into()));
    }
    Ok(())
}

/// Monte Carlo estimate of `P(y != sgn f(x))` on fresh samples; a zero
/// output counts as an error.
pub fn test_error(params: &NetworkParams, spec: &DistributionSpec, n_test: usize, seed: u64) -> Result<ErrorEstimate> {
    check_n_test(n_test)?;
    let mut errors = 0;
    let mut start = 0;
    while start < n_test {
        let len = TEST_CHUNK.min(n_test - start);
        let chunk = sample_dataset_range(spec, start as u64, len, seed)?;
        errors += count_errors(params, &chunk)?;
        start += len;
    }
    Ok(ErrorEstimate::from_count(errors, n_test))
}

/// Error of `params` on a fixed evaluation set.
pub fn error_on(params: &NetworkParams, dataset: &Dataset) -> Result<ErrorEstimate> {
    Ok(ErrorEstimate::from_count(count_errors(params, dataset)?, dataset.n()))
}

fn count_errors(params: &NetworkParams, dataset: &Dataset) -> Result<usize> {
    let out = params.forward_batch(dataset.points().view())?;
    Ok(out
        .iter()
        .zip(dataset.labels())
        .filter(|(f, y)| sign(**f) != **y)
        .count())
}

/// `nu(x) = |<mu1, x>| - |<mu2, x>|`.
pub fn reference_score(spec: &DistributionSpec, x: &[f64]) -> f64 {
    dot(spec.mu1(), x).abs() - dot(spec.mu2(), x).abs()
}

/// Monte Carlo error of `sgn(nu(x))` against noisy labels.
pub fn reference_error(spec: &DistributionSpec, n_test: usize, seed: u64) -> Result<ErrorEstimate> {
    check_n_test(n_test)?;
    let mut errors = 0;
    let mut start = 0;
    while start < n_test {
        let len = TEST_CHUNK.min(n_test - start);
        let chunk = sample_dataset_range(spec, start as u64, len, seed)?;
        errors += (0..len)
            .filter(|&i| {
                let x = chunk.point(i);
                sign(reference_score(spec, x.as_slice().expect("contiguous rows"))) != chunk.labels()[i]
            })
            .count();
        start += len;
    }
    Ok(ErrorEstimate::from_count(errors, n_test))
}

/// The four-neuron network with rows `mu1, -mu1, mu2, -mu2`; its output is
/// `nu(x) / 2`.
pub fn reference_network(spec: &DistributionSpec) -> Result<NetworkParams> {
    let d = spec.d();
    let mut w = Array2::zeros((4, d));
    for (k, c) in Cluster::ALL.iter().enumerate() {
        for (v, m) in w.row_mut(k).iter_mut().zip(spec.mean(*c)) {
            *v = m;
        }
    }
    NetworkParams::from_weights(w, 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDisplacement {
    /// `||phi(W_T x_i) - phi(W_0 x_i)|| / ||phi(W_0 x_i)||` per sample;
    /// infinite when the denominator is zero.
    pub ratios: Vec<f64>,
    pub min: f64,
    pub infinite: Vec<usize>,
}

pub fn feature_displacement(params0: &NetworkParams, params_t: &NetworkParams, dataset: &Dataset) -> Result<FeatureDisplacement> {
    if params0.m() != params_t.m() || params0.d() != params_t.d() {
        return Err(Error::shape(
            format!("{} x {}", params0.m(), params0.d()),
            format!("{} x {}", params_t.m(), params_t.d()),
        ));
    }
    if params0.d() != dataset.d() {
        return Err(Error::shape(format!("d = {}", params0.d()), format!("d = {}", dataset.d())));
    }
    let mut ratios = Vec::with_capacity(dataset.n());
    let mut infinite = Vec::new();
    for i in 0..dataset.n() {
        let x = dataset.point(i);
        let x = x.as_slice().expect("contiguous rows");
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..params0.m() {
            let h0 = relu(dot(params0.row(j), x));
            let ht = relu(dot(params_t.row(j), x));
            num += (ht - h0) * (ht - h0);
            den += h0 * h0;
        }
        if den == 0.0 {
            infinite.push(i);
            ratios.push(f64::INFINITY);
        } else {
            ratios.push((num / den).sqrt());
        }
    }
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(FeatureDisplacement { ratios, min, infinite })
}

/// `r_gamma(z) = min(1, max(0, 1 - z / gamma))`.
pub fn ramp(z: f64, gamma: f64) -> f64 {
    (1.0 - z / gamma).clamp(0.0, 1.0)
}

pub fn ramp_risk(params: &NetworkParams, dataset: &Dataset, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::Config(format!("gamma must be positive, got {gamma}")));
    }
    let report = margin_report(params, dataset, None)?;
    let sum = report.margins.iter().fold(0.0, |acc, m| acc + ramp(*m, gamma));
    Ok(sum / dataset.n() as f64)
}

/// `ramp + 4 / (gamma sqrt(n)) + sqrt(2 log(4/delta) / n)`.
pub fn generalization_bound(gamma: f64, n: usize, delta: f64, empirical_ramp_risk: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::Config(format!("gamma must be positive, got {gamma}")));
    }
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Config(format!("delta must lie in (0, 1), got {delta}")));
    }
    let n = n as f64;
    Ok(empirical_ramp_risk + 4.0 / (gamma * n.sqrt()) + (2.0 * (4.0 / delta).ln() / n).sqrt())
}

/// Everything evaluated at one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub t: usize,
    pub jsets: CandidateSets,
    pub j_fraction: f64,
    pub alignment: AlignmentReport,
    pub almost_orth: Option<AlmostOrthReport>,
    /// Normalized correlations of every neuron with `+mu1, -mu1, +mu2, -mu2`.
    pub correlations: Vec<Correlations>,
    pub margins: MarginReport,
    pub clean_all_correct: bool,
    pub noisy_all_incorrect: bool,
    pub gamma_margin_pass: bool,
    pub test_error: Option<ErrorEstimate>,
    pub feature_displacement: FeatureDisplacement,
    pub ramp_risk: f64,
    pub generalization_bound_value: f64,
}

/// Inputs shared by every per-iteration evaluation of one run.
pub struct DiagnosticContext<'a> {
    pub spec: &'a DistributionSpec,
    pub train: &'a Dataset,
    pub params0: &'a NetworkParams,
    pub jsets: &'a CandidateSets,
    pub recorder: Option<&'a ProjectionRecorder>,
    /// Fresh test samples `(n_test, seed)` for the Monte Carlo error.
    pub test: Option<(usize, u64)>,
    pub cfg: &'a DiagnosticsConfig,
}

impl DiagnosticContext<'_> {
    pub fn evaluate(&self, t: usize, params: &NetworkParams) -> Result<DiagnosticsReport> {
        let alignment = alignment_check(params, self.train, self.jsets)?;
        let almost_orth = match self.recorder {
            Some(r) if t >= 1 && r.projections(t).is_some() => Some(almost_orth_check(r, self.jsets, t)?),
            _ => None,
        };
        let correlations = Cluster::ALL
            .iter()
            .map(|&c| normalized_correlations(params, &self.spec.mean(c)))
            .collect::<Result<Vec<_>>>()?;
        let margins = margin_report(params, self.train, None)?;
        let test_error = self
            .test
            .map(|(n, seed)| test_error(params, self.spec, n, seed))
            .transpose()?;
        let feature_displacement = feature_displacement(self.params0, params, self.train)?;
        let ramp_risk = ramp_risk(params, self.train, self.cfg.gamma)?;
        let bound = generalization_bound(self.cfg.gamma, self.train.n(), self.cfg.delta, ramp_risk)?;
        Ok(DiagnosticsReport {
            t,
            jsets: self.jsets.clone(),
            j_fraction: self.jsets.fraction(params.m()),
            alignment,
            almost_orth,
            correlations,
            clean_all_correct: margins.clean_all_positive,
            noisy_all_incorrect: margins.noisy_all_negative,
            gamma_margin_pass: margins.clean_margin_at_least(self.cfg.gamma),
            margins,
            test_error,
            feature_displacement,
            ramp_risk,
            generalization_bound_value: bound,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlmostOrthSummary {
    pub holds: bool,
    pub max_violation_ratio: f64,
}

/// The JSON object written for each checked iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationDiagnostics {
    pub t: usize,
    #[serde(rename = "J_sizes")]
    pub j_sizes: BTreeMap<String, usize>,
    pub alignment_fraction: BTreeMap<String, f64>,
    pub almost_orth: Option<AlmostOrthSummary>,
    pub min_clean_margin: Option<f64>,
    pub max_noisy_margin: Option<f64>,
    pub test_error: Option<f64>,
    pub test_error_se: Option<f64>,
    pub feature_displacement_min: f64,
    pub gen_bound: f64,
    /// Median normalized correlation of each `J_mu` with `mu`.
    pub median_correlation: BTreeMap<String, Option<f64>>,
}

impl DiagnosticsReport {
    pub fn summary(&self) -> IterationDiagnostics {
        let sizes = self.jsets.sizes();
        IterationDiagnostics {
            t: self.t,
            j_sizes: Cluster::ALL.iter().map(|c| (c.code().to_string(), sizes[c.index()])).collect(),
            alignment_fraction: self.alignment.fractions(),
            almost_orth: self.almost_orth.as_ref().map(|a| AlmostOrthSummary {
                holds: a.holds,
                max_violation_ratio: a.max_violation_ratio,
            }),
            min_clean_margin: self.margins.min_clean,
            max_noisy_margin: self.margins.max_noisy,
            test_error: self.test_error.map(|e| e.error),
            test_error_se: self.test_error.map(|e| e.std_err),
            feature_displacement_min: self.feature_displacement.min,
            gen_bound: self.generalization_bound_value,
            median_correlation: Cluster::ALL
                .iter()
                .map(|c| {
                    let corr = &self.correlations[c.index()];
                    (c.code().to_string(), corr.median_over(self.jsets.get(*c)))
                })
                .collect(),
        }
    }
}
