//! Full-batch gradient descent on the empirical logistic risk.

use std::io::Write;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::distribution::{fmt_f64, Dataset};
use crate::error::{Error, Result};
use crate::linalg::sign;
use crate::network::{init_network, NetworkParams};

/// `l(z) = log(1 + exp(-z))`, evaluated without overflow.
pub fn logistic_loss(z: f64) -> f64 {
    if z >= 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

/// `l'(z) = -1 / (1 + exp(z))`.
///
/// For very large `z` the true value is below the smallest subnormal and the
/// result underflows to `-0.0`.
pub fn logistic_loss_deriv(z: f64) -> f64 {
    if z >= 0.0 {
        let e = (-z).exp();
        -e / (1.0 + e)
    } else {
        -1.0 / (1.0 + z.exp())
    }
}

/// Forward pass shared by risk, accuracy and gradient computations.
struct Pass {
    pre: Array2<f64>,
    out: Array1<f64>,
}

fn check_dims(params: &NetworkParams, dataset: &Dataset) -> Result<()> {
    if params.d() != dataset.d() {
        return Err(Error::shape(
            format!("dataset with d = {}", params.d()),
            format!("d = {}", dataset.d()),
        ));
    }
    Ok(())
}

fn forward_pass(params: &NetworkParams, dataset: &Dataset) -> Result<Pass> {
    check_dims(params, dataset)?;
    let mut pass = Pass {
        pre: Array2::zeros((dataset.n(), params.m())),
        out: Array1::zeros(dataset.n()),
    };
    forward_into(params, dataset, &mut pass);
    Ok(pass)
}

/// Refills `pass` without reallocating; dimensions must already match.
fn forward_into(params: &NetworkParams, dataset: &Dataset, pass: &mut Pass) {
    general_mat_mul(1.0, dataset.points(), &params.w().t(), 0.0, &mut pass.pre);
    pass.out = params.outputs_from_preactivations(&pass.pre);
}

fn risk_from(out: &Array1<f64>, labels: &[f64]) -> f64 {
    let sum = out
        .iter()
        .zip(labels)
        .fold(0.0, |acc, (f, y)| acc + logistic_loss(y * f));
    sum / labels.len() as f64
}

/// Writes the gradient into `grad`, overwriting `pass.pre` with the
/// per-sample, per-neuron weights.
fn gradient_into(params: &NetworkParams, dataset: &Dataset, pass: &mut Pass, grad: &mut Array2<f64>) {
    let n = dataset.n() as f64;
    let labels = dataset.labels();
    // M_ij = l'(y_i f_i) y_i a_j phi'(<w_j, x_i>) / n
    for (i, mut row) in pass.pre.axis_iter_mut(Axis(0)).enumerate() {
        let y = labels[i];
        let c = logistic_loss_deriv(y * pass.out[i]) * y / n;
        Zip::from(&mut row)
            .and(params.a())
            .for_each(|v, &a| *v = c * a * params.relu_deriv(*v));
    }
    general_mat_mul(1.0, &pass.pre.t(), dataset.points(), 0.0, grad);
}

pub fn empirical_risk(params: &NetworkParams, dataset: &Dataset) -> Result<f64> {
    let pass = forward_pass(params, dataset)?;
    Ok(risk_from(&pass.out, dataset.labels()))
}

/// Gradient of the empirical risk with respect to `W`; row `j` is
/// `(1/n) sum_i l'(y_i f(x_i)) y_i a_j phi'(<w_j, x_i>) x_i`.
pub fn gradient(params: &NetworkParams, dataset: &Dataset) -> Result<Array2<f64>> {
    let mut pass = forward_pass(params, dataset)?;
    let mut grad = Array2::zeros(params.w().dim());
    gradient_into(params, dataset, &mut pass, &mut grad);
    Ok(grad)
}

pub fn gd_step(params: &NetworkParams, dataset: &Dataset, alpha: f64) -> Result<NetworkParams> {
    check_alpha(alpha)?;
    let g = gradient(params, dataset)?;
    params.with_weights(params.w() - &(g * alpha))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Config(format!("step size must be positive, got {alpha}")));
    }
    Ok(())
}

/// Early-stopping horizon `T = 1 + ceil(1 / (4 alpha))`.
///
/// Quotients within `1e-9` (relative) of an integer are snapped to it so
/// that `alpha = 0.05` yields exactly `T = 6`.
pub fn theorem_schedule(alpha: f64) -> Result<usize> {
    check_alpha(alpha)?;
    let q = 1.0 / (4.0 * alpha);
    let r = q.round();
    let q = if (q - r).abs() <= 1e-9 * r.max(1.0) { r } else { q.ceil() };
    Ok(1 + q as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotPolicy {
    All,
    Endpoints,
    /// Every `k`-th iteration plus both endpoints.
    EveryK(usize),
}

impl Default for SnapshotPolicy {
    fn default() -> Self {
        SnapshotPolicy::EveryK(10)
    }
}

impl SnapshotPolicy {
    fn keeps(self, t: usize, last: usize) -> bool {
        t == 0
            || t == last
            || match self {
                SnapshotPolicy::All => true,
                SnapshotPolicy::Endpoints => false,
                SnapshotPolicy::EveryK(k) => k > 0 && t % k == 0,
            }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub alpha: f64,
    /// Number of gradient steps `T`.
    pub iterations: usize,
    pub omega_init: f64,
    #[serde(default)]
    pub subgrad_at_zero: f64,
    #[serde(default)]
    pub snapshot_policy: SnapshotPolicy,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.iterations == 0 {
            return Err(Error::Config("iteration count must be at least 1".into()));
        }
        if !(self.omega_init > 0.0) {
            return Err(Error::InvalidInit(format!(
                "initialization scale must be positive, got {}",
                self.omega_init
            )));
        }
        if let SnapshotPolicy::EveryK(0) = self.snapshot_policy {
            return Err(Error::Config("snapshot interval must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    pub empirical_risk: f64,
    /// Training accuracy on the clean samples; `None` if there are none.
    pub clean_acc: Option<f64>,
    /// Training accuracy (against observed labels) on the noisy samples.
    pub noisy_acc: Option<f64>,
    pub frob_norm: f64,
    pub max_neuron_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: usize,
    pub params: NetworkParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    pub snapshots: Vec<Snapshot>,
    /// One record for every `t` in `0..=T`.
    pub records: Vec<IterationRecord>,
}

impl TrainTrace {
    pub fn initial(&self) -> &NetworkParams {
        &self.snapshots[0].params
    }

    pub fn last(&self) -> &NetworkParams {
        &self.snapshots.last().expect("trace has snapshots").params
    }

    pub fn snapshot(&self, t: usize) -> Option<&NetworkParams> {
        self.snapshots
            .binary_search_by_key(&t, |s| s.t)
            .ok()
            .map(|k| &self.snapshots[k].params)
    }

    pub fn final_record(&self) -> &IterationRecord {
        self.records.last().expect("trace has records")
    }

    /// Writes `t,empirical_risk,clean_acc,noisy_acc,frob_norm,max_neuron_norm`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "empirical_risk", "clean_acc", "noisy_acc", "frob_norm", "max_neuron_norm"])?;
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        for r in &self.records {
            w.write_record([
                r.t.to_string(),
                fmt_f64(r.empirical_risk),
                opt(r.clean_acc),
                opt(r.noisy_acc),
                fmt_f64(r.frob_norm),
                fmt_f64(r.max_neuron_norm),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<trace>", e))
    }
}

/// Fraction of `indices` whose prediction `sgn(f)` equals the observed
/// label. A zero output never counts as correct.
pub(crate) fn accuracy_on(out: &Array1<f64>, labels: &[f64], indices: &[usize]) -> Option<f64> {
    if indices.is_empty() {
        return None;
    }
    let hits = indices.iter().filter(|&&i| sign(out[i]) == labels[i]).count();
    Some(hits as f64 / indices.len() as f64)
}

fn record(t: usize, params: &NetworkParams, dataset: &Dataset, pass: &Pass, clean: &[usize], noisy: &[usize]) -> IterationRecord {
    let labels = dataset.labels();
    let max_neuron_norm = (0..params.m()).map(|j| params.neuron_norm(j)).fold(0.0, f64::max);
    IterationRecord {
        t,
        empirical_risk: risk_from(&pass.out, labels),
        clean_acc: accuracy_on(&pass.out, labels, clean),
        noisy_acc: accuracy_on(&pass.out, labels, noisy),
        frob_norm: params.frobenius_norm(),
        max_neuron_norm,
    }
}

/// Per-iteration callback: receives `(t, W^(t))` for every `t` in `0..=T`.
pub type Hook<'a> = &'a mut dyn FnMut(usize, &NetworkParams);

/// Initializes a width-`m` network from `config.seed` and trains it.
pub fn train(dataset: &Dataset, m: usize, config: &TrainConfig, hook: Option<Hook<'_>>) -> Result<TrainTrace> {
    config.validate()?;
    let params0 = init_network(m, dataset.d(), config.omega_init, config.subgrad_at_zero, config.seed)?;
    train_from(params0, dataset, config, hook)
}

/// Runs `config.iterations` steps from explicit initial weights.
pub fn train_from(
    params0: NetworkParams,
    dataset: &Dataset,
    config: &TrainConfig,
    mut hook: Option<Hook<'_>>,
) -> Result<TrainTrace> {
    config.validate()?;
    check_dims(&params0, dataset)?;
    let last = config.iterations;
    let clean = dataset.clean_set();
    let noisy = dataset.noisy_set();
    let mut snapshots = Vec::new();
    let mut records = Vec::with_capacity(last + 1);
    let mut params = params0;
    let mut pass = forward_pass(&params, dataset)?;
    let mut grad = Array2::zeros(params.w().dim());
    for t in 0..=last {
        if t > 0 {
            forward_into(&params, dataset, &mut pass);
        }
        if pass.out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { iteration: t, what: "network output" });
        }
        let rec = record(t, &params, dataset, &pass, &clean, &noisy);
        if !rec.empirical_risk.is_finite() {
            return Err(Error::Divergence { iteration: t, what: "loss" });
        }
        records.push(rec);
        if let Some(h) = hook.as_mut() {
            h(t, &params);
        }
        if config.snapshot_policy.keeps(t, last) {
            snapshots.push(Snapshot { t, params: params.clone() });
        }
        if t == last {
            break;
        }
        gradient_into(&params, dataset, &mut pass, &mut grad);
        let w = params.w_mut();
        w.scaled_add(-config.alpha, &grad);
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { iteration: t + 1, what: "weights" });
        }
    }
    Ok(TrainTrace { snapshots, records })
}
