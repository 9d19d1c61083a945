//! Two-layer ReLU network `f(x; W) = sum_j a_j relu(<w_j, x>)` with a frozen
//! second layer.

use std::io::{BufRead, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::distribution::{fmt_f64, parse_f64};
use crate::error::{Error, Result};
use crate::linalg::relu;
use crate::rng::{substream, Purpose};

/// Hidden weights plus the fixed second-layer signs.
///
/// `a` is laid out as `floor(m/2)` entries `+1/sqrt(m)`, then `floor(m/2)`
/// entries `-1/sqrt(m)`, then (odd `m` only) a trailing zero. It cannot be
/// changed after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    w: Array2<f64>,
    a: Vec<f64>,
    subgrad_at_zero: f64,
}

/// Second-layer weights for width `m`.
pub fn second_layer(m: usize) -> Vec<f64> {
    let half = m / 2;
    let s = 1.0 / (m as f64).sqrt();
    let mut a = Vec::with_capacity(m);
    a.extend(std::iter::repeat_n(s, half));
    a.extend(std::iter::repeat_n(-s, half));
    if m % 2 == 1 {
        a.push(0.0);
    }
    a
}

fn check_subgrad(s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidInit(format!(
            "subgradient at zero must lie in [0, 1], got {s}"
        )));
    }
    Ok(())
}

/// Gaussian initialization `W_ij ~ N(0, omega_init^2)`; row `j` is drawn from
/// its own substream.
pub fn init_network(m: usize, d: usize, omega_init: f64, subgrad_at_zero: f64, seed: u64) -> Result<NetworkParams> {
    if m == 0 || d == 0 {
        return Err(Error::InvalidInit(format!("need m >= 1 and d >= 1, got m = {m}, d = {d}")));
    }
    if !(omega_init > 0.0) || !omega_init.is_finite() {
        return Err(Error::InvalidInit(format!(
            "initialization scale must be positive, got {omega_init}"
        )));
    }
    check_subgrad(subgrad_at_zero)?;
    let mut w = Array2::<f64>::zeros((m, d));
    for (j, mut row) in w.axis_iter_mut(Axis(0)).enumerate() {
        let mut rng = substream(seed, Purpose::Init, j as u64);
        for v in row.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v = omega_init * z;
        }
    }
    NetworkParams::from_weights(w, subgrad_at_zero)
}

impl NetworkParams {
    /// Wraps explicit hidden weights with the standard second layer.
    pub fn from_weights(w: Array2<f64>, subgrad_at_zero: f64) -> Result<Self> {
        check_subgrad(subgrad_at_zero)?;
        if w.nrows() == 0 || w.ncols() == 0 {
            return Err(Error::InvalidInit("empty weight matrix".into()));
        }
        let a = second_layer(w.nrows());
        Ok(NetworkParams {
            w: w.as_standard_layout().into_owned(),
            a,
            subgrad_at_zero,
        })
    }

    /// Same second layer and subgradient, new hidden weights.
    pub fn with_weights(&self, w: Array2<f64>) -> Result<Self> {
        if w.dim() != self.w.dim() {
            return Err(Error::shape(format!("{:?}", self.w.dim()), format!("{:?}", w.dim())));
        }
        Ok(NetworkParams {
            w: w.as_standard_layout().into_owned(),
            a: self.a.clone(),
            subgrad_at_zero: self.subgrad_at_zero,
        })
    }

    pub fn m(&self) -> usize {
        self.w.nrows()
    }

    pub fn d(&self) -> usize {
        self.w.ncols()
    }

    pub fn w(&self) -> &Array2<f64> {
        &self.w
    }

    pub(crate) fn w_mut(&mut self) -> &mut Array2<f64> {
        &mut self.w
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let d = self.d();
        &self.w.as_slice().expect("standard layout")[j * d..(j + 1) * d]
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn subgrad_at_zero(&self) -> f64 {
        self.subgrad_at_zero
    }

    /// Neurons with a non-zero second-layer weight.
    pub fn active_neurons(&self) -> impl Iterator<Item = usize> + '_ {
        self.a.iter().enumerate().filter(|(_, a)| **a != 0.0).map(|(j, _)| j)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.w.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn neuron_norm(&self, j: usize) -> f64 {
        self.row(j).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d() {
            return Err(Error::shape(format!("input of length {}", self.d()), x.len()));
        }
        Ok(())
    }

    fn preactivation(&self, j: usize, x: &[f64]) -> f64 {
        crate::linalg::dot(self.row(j), x)
    }

    /// `phi'(z)` with the configured value at exactly zero.
    pub fn relu_deriv(&self, z: f64) -> f64 {
        if z > 0.0 {
            1.0
        } else if z < 0.0 {
            0.0
        } else {
            self.subgrad_at_zero
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok((0..self.m()).fold(0.0, |acc, j| acc + self.a[j] * relu(self.preactivation(j, x))))
    }

    /// Outputs for every row of `points`, via one matrix product.
    pub fn forward_batch(&self, points: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        let z = self.preactivations(points)?;
        Ok(self.outputs_from_preactivations(&z))
    }

    /// `points · W^T`, shape `n × m`.
    pub fn preactivations(&self, points: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if points.ncols() != self.d() {
            return Err(Error::shape(format!("points with {} columns", self.d()), points.ncols()));
        }
        Ok(points.dot(&self.w.t()))
    }

    pub(crate) fn outputs_from_preactivations(&self, z: &Array2<f64>) -> Array1<f64> {
        z.axis_iter(Axis(0))
            .map(|row| row.iter().zip(&self.a).fold(0.0, |acc, (v, a)| acc + a * relu(*v)))
            .collect()
    }

    /// `f^J(x; W)`, the sum restricted to the neurons in `subset`.
    pub fn subnetwork_forward(&self, subset: &[usize], x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let mut acc = 0.0;
        for &j in subset {
            if j >= self.m() {
                return Err(Error::Index { index: j, m: self.m() });
            }
            acc += self.a[j] * relu(self.preactivation(j, x));
        }
        Ok(acc)
    }

    /// `phi(W x)`.
    pub fn hidden_features(&self, x: &[f64]) -> Result<Array1<f64>> {
        self.check_input(x)?;
        Ok((0..self.m()).map(|j| relu(self.preactivation(j, x))).collect())
    }

    /// `phi'(W x)` entrywise, in `{0, subgrad_at_zero, 1}`.
    pub fn activation_pattern(&self, x: &[f64]) -> Result<Array1<f64>> {
        self.check_input(x)?;
        Ok((0..self.m()).map(|j| self.relu_deriv(self.preactivation(j, x))).collect())
    }

    pub fn forward_view(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        match x.as_slice() {
            Some(s) => self.forward(s),
            None => self.forward(&x.to_vec()),
        }
    }

    /// Writes a checkpoint: one JSON header line followed by the row-major
    /// CSV body of `W` at 17 significant digits.
    pub fn write_checkpoint<W: Write>(&self, mut out: W, seed: Option<u64>) -> Result<()> {
        let header = CheckpointHeader {
            format: CHECKPOINT_FORMAT.to_string(),
            m: self.m(),
            d: self.d(),
            subgrad_at_zero: self.subgrad_at_zero,
            a_layout: A_LAYOUT.to_string(),
            seed,
        };
        let io = |e| Error::io("<checkpoint>", e);
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n").map_err(io)?;
        for row in self.w.axis_iter(Axis(0)) {
            let line: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
            out.write_all(line.join(",").as_bytes()).map_err(io)?;
            out.write_all(b"\n").map_err(io)?;
        }
        out.flush().map_err(io)
    }

    pub fn read_checkpoint<R: BufRead>(input: R) -> Result<(Self, CheckpointHeader)> {
        let mut lines = input.lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::format("checkpoint", "empty file"))?
            .map_err(|e| Error::io("<checkpoint>", e))?;
        let header: CheckpointHeader = serde_json::from_str(&first)?;
        if header.format != CHECKPOINT_FORMAT {
            return Err(Error::format("checkpoint", format!("unknown format `{}`", header.format)));
        }
        if header.a_layout != A_LAYOUT {
            return Err(Error::format("checkpoint", format!("unknown layout `{}`", header.a_layout)));
        }
        let mut values = Vec::with_capacity(header.m * header.d);
        for line in lines {
            let line = line.map_err(|e| Error::io("<checkpoint>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let before = values.len();
            for tok in line.split(',') {
                values.push(parse_f64(tok)?);
            }
            if values.len() - before != header.d {
                return Err(Error::format("checkpoint", "row length does not match d"));
            }
        }
        let w = Array2::from_shape_vec((header.m, header.d), values)
            .map_err(|e| Error::format("checkpoint", e))?;
        let params = NetworkParams::from_weights(w, header.subgrad_at_zero)?;
        Ok((params, header))
    }

    pub fn save_checkpoint(&self, path: &Path, seed: Option<u64>) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_checkpoint(std::io::BufWriter::new(f), seed)
    }

    pub fn load_checkpoint(path: &Path) -> Result<(Self, CheckpointHeader)> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        NetworkParams::read_checkpoint(std::io::BufReader::new(f))
    }
}

const CHECKPOINT_FORMAT: &str = "xorgd-checkpoint-v1";
const A_LAYOUT: &str = "plus_then_minus";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub m: usize,
    pub d: usize,
    pub subgrad_at_zero: f64,
    pub a_layout: String,
    /// Initialization seed, when known.
    pub seed: Option<u64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn two_by_two() -> NetworkParams {
        NetworkParams::from_weights(array![[1.0, 0.0], [0.0, 1.0]], 0.0).unwrap()
    }

    #[test]
    fn second_layer_layout() {
        let a = second_layer(2);
        assert_eq!(a, vec![1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt()]);
        let a = second_layer(5);
        assert_eq!(a.iter().filter(|v| **v > 0.0).count(), 2);
        assert_eq!(a.iter().filter(|v| **v < 0.0).count(), 2);
        assert_eq!(a[4], 0.0);
        let p = init_network(2, 3, 0.7, 0.0, 1).unwrap();
        assert_eq!(p.a(), &[1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt()]);
    }

    #[test]
    fn fig1_init_shape() {
        let omega = (1.0 / (32.0 * 500.0f64)).sqrt();
        let p = init_network(500, 2, omega, 0.0, 42).unwrap();
        assert_eq!((p.m(), p.d()), (500, 2));
        let var = p.w().iter().map(|v| v * v).sum::<f64>() / 1000.0;
        assert!((var / (omega * omega) - 1.0).abs() < 0.15, "{var}");
    }

    #[test]
    fn init_errors() {
        assert!(matches!(init_network(4, 2, 0.0, 0.0, 0), Err(Error::InvalidInit(_))));
        assert!(matches!(init_network(4, 2, -1.0, 0.0, 0), Err(Error::InvalidInit(_))));
        assert!(matches!(init_network(4, 2, 1.0, 1.5, 0), Err(Error::InvalidInit(_))));
        assert!(init_network(0, 2, 1.0, 0.0, 0).is_err());
    }

    #[test]
    fn init_is_deterministic() {
        let a = init_network(8, 5, 0.1, 0.0, 3).unwrap();
        let b = init_network(8, 5, 0.1, 0.0, 3).unwrap();
        let c = init_network(8, 5, 0.1, 0.0, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn hand_evaluated_forward() {
        let p = two_by_two();
        let f = p.forward(&[2.0, 3.0]).unwrap();
        assert!((f - (-1.0 / 2f64.sqrt())).abs() < 1e-15);
        assert!((f + 0.70711).abs() < 1e-5);
    }

    #[test]
    fn zero_weights() {
        let p = NetworkParams::from_weights(Array2::zeros((4, 3)), 0.0).unwrap();
        assert_eq!(p.forward(&[1.0, -2.0, 0.5]).unwrap(), 0.0);
        assert_eq!(p.hidden_features(&[1.0, 2.0, 3.0]).unwrap().to_vec(), vec![0.0; 4]);
        assert_eq!(p.activation_pattern(&[1.0, 2.0, 3.0]).unwrap().to_vec(), vec![0.0; 4]);
        let batch = array![[1.0, 2.0, 3.0], [-1.0, 0.0, 1.0]];
        assert_eq!(p.forward_batch(batch.view()).unwrap().to_vec(), vec![0.0, 0.0]);
        let half = NetworkParams::from_weights(Array2::zeros((4, 3)), 0.5).unwrap();
        assert_eq!(half.activation_pattern(&[1.0, 2.0, 3.0]).unwrap().to_vec(), vec![0.5; 4]);
    }

    #[test]
    fn hidden_features_by_hand() {
        let p = two_by_two();
        assert_eq!(p.hidden_features(&[-1.0, 2.0]).unwrap().to_vec(), vec![0.0, 2.0]);
        assert_eq!(p.activation_pattern(&[-1.0, 2.0]).unwrap().to_vec(), vec![0.0, 1.0]);
    }

    #[test]
    fn subnetwork_edges() {
        let p = init_network(6, 3, 1.0, 0.0, 8).unwrap();
        let x = [0.3, -1.2, 0.8];
        let all: Vec<usize> = (0..6).collect();
        assert_eq!(p.subnetwork_forward(&all, &x).unwrap(), p.forward(&x).unwrap());
        assert_eq!(p.subnetwork_forward(&[], &x).unwrap(), 0.0);
        assert!(matches!(p.subnetwork_forward(&[6], &x), Err(Error::Index { index: 6, m: 6 })));
    }

    #[test]
    fn shape_errors() {
        let p = two_by_two();
        assert!(matches!(p.forward(&[1.0]), Err(Error::Shape { .. })));
        assert!(p.hidden_features(&[1.0, 2.0, 3.0]).is_err());
        assert!(p.activation_pattern(&[]).is_err());
        assert!(p.forward_batch(array![[1.0, 2.0, 3.0]].view()).is_err());
        assert!(p.with_weights(Array2::zeros((3, 2))).is_err());
    }

    #[test]
    fn singleton_batch() {
        let p = init_network(7, 4, 0.5, 0.0, 2).unwrap();
        let x = array![[0.1, 0.2, -0.3, 0.4]];
        let f = p.forward_batch(x.view()).unwrap();
        assert!((f[0] - p.forward(&[0.1, 0.2, -0.3, 0.4]).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn checkpoint_round_trip() {
        let p = init_network(5, 3, 0.3, 0.25, 9).unwrap();
        let mut buf = Vec::new();
        p.write_checkpoint(&mut buf, Some(9)).unwrap();
        let (q, header) = NetworkParams::read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(header.seed, Some(9));
        assert_eq!(header.m, 5);
        assert_eq!(q, p);
    }
}
