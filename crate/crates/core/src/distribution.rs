//! The noisy 2-XOR cluster distribution.
//!
//! Four Gaussian clusters sit at `±mu1` (clean label `+1`) and `±mu2`
//! (clean label `-1`) with `mu1 ⟂ mu2` unit vectors. Observed labels are
//! the clean labels flipped independently with probability `eta`.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::rng::{substream, Purpose};

/// Unit-norm and orthogonality tolerance for the cluster means.
pub const MEAN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    #[default]
    UniformFlip,
    None,
}

/// Within-cluster law. Only isotropic Gaussians are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClusterFamily {
    #[default]
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MeanMode {
    /// `mu1 = e1`, `mu2 = e2`.
    #[default]
    Canonical,
    /// Gram–Schmidt on two Gaussian vectors.
    RandomOrthonormal,
}

/// One of the four cluster means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Cluster {
    #[serde(rename = "+m1")]
    PlusMu1,
    #[serde(rename = "-m1")]
    MinusMu1,
    #[serde(rename = "+m2")]
    PlusMu2,
    #[serde(rename = "-m2")]
    MinusMu2,
}

impl Cluster {
    pub const ALL: [Cluster; 4] = [
        Cluster::PlusMu1,
        Cluster::MinusMu1,
        Cluster::PlusMu2,
        Cluster::MinusMu2,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Cluster> {
        Cluster::ALL.get(i).copied()
    }

    /// `+1` for the `±mu1` clusters, `-1` for `±mu2`.
    pub fn clean_label(self) -> f64 {
        match self {
            Cluster::PlusMu1 | Cluster::MinusMu1 => 1.0,
            Cluster::PlusMu2 | Cluster::MinusMu2 => -1.0,
        }
    }

    /// The cluster at the negated mean.
    pub fn opposite(self) -> Cluster {
        match self {
            Cluster::PlusMu1 => Cluster::MinusMu1,
            Cluster::MinusMu1 => Cluster::PlusMu1,
            Cluster::PlusMu2 => Cluster::MinusMu2,
            Cluster::MinusMu2 => Cluster::PlusMu2,
        }
    }

    /// Whether this cluster belongs to the `mu1` axis.
    pub fn is_mu1(self) -> bool {
        matches!(self, Cluster::PlusMu1 | Cluster::MinusMu1)
    }

    pub fn sign(self) -> f64 {
        match self {
            Cluster::PlusMu1 | Cluster::PlusMu2 => 1.0,
            Cluster::MinusMu1 | Cluster::MinusMu2 => -1.0,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Cluster::PlusMu1 => "+m1",
            Cluster::MinusMu1 => "-m1",
            Cluster::PlusMu2 => "+m2",
            Cluster::MinusMu2 => "-m2",
        }
    }
}

impl fmt::Display for Cluster {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Cluster {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "+m1" => Ok(Cluster::PlusMu1),
            "-m1" => Ok(Cluster::MinusMu1),
            "+m2" => Ok(Cluster::PlusMu2),
            "-m2" => Ok(Cluster::MinusMu2),
            other => Err(Error::format("dataset", format!("unknown cluster code `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    d: usize,
    mu1: Vec<f64>,
    mu2: Vec<f64>,
    sigma: f64,
    eta: f64,
    noise_mode: NoiseMode,
    cluster_family: ClusterFamily,
}

impl DistributionSpec {
    pub fn new(mu1: Vec<f64>, mu2: Vec<f64>, sigma: f64, eta: f64, noise_mode: NoiseMode) -> Result<Self> {
        let d = mu1.len();
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        if mu2.len() != d {
            return Err(Error::shape(format!("mu2 of length {d}"), mu2.len()));
        }
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidSigma(sigma));
        }
        if !(0.0..0.5).contains(&eta) {
            return Err(Error::InvalidNoise(eta));
        }
        if noise_mode == NoiseMode::None && eta != 0.0 {
            return Err(Error::Config(format!(
                "noise mode `none` is incompatible with eta = {eta}"
            )));
        }
        for (name, mu) in [("mu1", &mu1), ("mu2", &mu2)] {
            if (norm(mu) - 1.0).abs() > MEAN_TOLERANCE {
                return Err(Error::Config(format!("{name} is not unit norm")));
            }
        }
        if dot(&mu1, &mu2).abs() > MEAN_TOLERANCE {
            return Err(Error::Config("mu1 and mu2 are not orthogonal".into()));
        }
        Ok(DistributionSpec {
            d,
            mu1,
            mu2,
            sigma,
            eta,
            noise_mode,
            cluster_family: ClusterFamily::Gaussian,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn mu1(&self) -> &[f64] {
        &self.mu1
    }

    pub fn mu2(&self) -> &[f64] {
        &self.mu2
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn noise_mode(&self) -> NoiseMode {
        self.noise_mode
    }

    pub fn cluster_family(&self) -> ClusterFamily {
        self.cluster_family
    }

    /// Probability that a label is flipped.
    pub fn effective_noise(&self) -> f64 {
        match self.noise_mode {
            NoiseMode::UniformFlip => self.eta,
            NoiseMode::None => 0.0,
        }
    }

    /// The mean vector of `cluster`.
    pub fn mean(&self, cluster: Cluster) -> Vec<f64> {
        let base = if cluster.is_mu1() { &self.mu1 } else { &self.mu2 };
        let s = cluster.sign();
        base.iter().map(|v| s * v).collect()
    }

    /// Unit vector orthogonal to `cluster`'s mean along the other class axis.
    pub fn cross_axis(&self, cluster: Cluster) -> &[f64] {
        if cluster.is_mu1() {
            &self.mu2
        } else {
            &self.mu1
        }
    }
}

/// Builds a [`DistributionSpec`]. `seed` is only consumed in
/// [`MeanMode::RandomOrthonormal`].
pub fn make_spec(d: usize, sigma: f64, eta: f64, mean_mode: MeanMode, seed: u64) -> Result<DistributionSpec> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if !(0.0..0.5).contains(&eta) {
        return Err(Error::InvalidNoise(eta));
    }
    let (mu1, mu2) = match mean_mode {
        MeanMode::Canonical => {
            let mut mu1 = vec![0.0; d];
            let mut mu2 = vec![0.0; d];
            mu1[0] = 1.0;
            mu2[1] = 1.0;
            (mu1, mu2)
        }
        MeanMode::RandomOrthonormal => random_orthonormal_pair(d, seed),
    };
    let mode = if eta == 0.0 {
        NoiseMode::None
    } else {
        NoiseMode::UniformFlip
    };
    DistributionSpec::new(mu1, mu2, sigma, eta, mode)
}

fn random_orthonormal_pair(d: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = substream(seed, Purpose::Means, 0);
    loop {
        let g1: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let g2: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n1 = norm(&g1);
        if n1 < 1e-8 {
            continue;
        }
        let mu1: Vec<f64> = g1.iter().map(|v| v / n1).collect();
        // two projection passes keep the inner product at rounding level
        let mut v = g2;
        for _ in 0..2 {
            let p = dot(&v, &mu1);
            v.iter_mut().zip(&mu1).for_each(|(vi, ui)| *vi -= p * ui);
        }
        let nv = norm(&v);
        if nv < 1e-8 {
            continue;
        }
        let mu2 = v.iter().map(|x| x / nv).collect();
        return (mu1, mu2);
    }
}

/// A labelled sample from the noisy distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Array2<f64>,
    clean_labels: Vec<f64>,
    labels: Vec<f64>,
    cluster_of: Vec<Cluster>,
    noisy: Vec<bool>,
}

impl Dataset {
    /// Assembles a dataset, checking the label bookkeeping invariants.
    pub fn from_parts(points: Array2<f64>, cluster_of: Vec<Cluster>, noisy: Vec<bool>) -> Result<Self> {
        let n = points.nrows();
        if cluster_of.len() != n || noisy.len() != n {
            return Err(Error::shape(
                format!("{n} cluster and noise entries"),
                format!("{} and {}", cluster_of.len(), noisy.len()),
            ));
        }
        let clean_labels: Vec<f64> = cluster_of.iter().map(|c| c.clean_label()).collect();
        let labels = clean_labels
            .iter()
            .zip(&noisy)
            .map(|(&y, &flip)| if flip { -y } else { y })
            .collect();
        Ok(Dataset {
            points,
            clean_labels,
            labels,
            cluster_of,
            noisy,
        })
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn d(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn point(&self, i: usize) -> ArrayView1<'_, f64> {
        self.points.row(i)
    }

    pub fn clean_labels(&self) -> &[f64] {
        &self.clean_labels
    }

    /// Observed (possibly flipped) labels.
    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn cluster_of(&self) -> &[Cluster] {
        &self.cluster_of
    }

    pub fn is_noisy(&self, i: usize) -> bool {
        self.noisy[i]
    }

    pub fn noisy_mask(&self) -> &[bool] {
        &self.noisy
    }

    pub fn noisy_set(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.noisy[i]).collect()
    }

    pub fn clean_set(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| !self.noisy[i]).collect()
    }

    /// Indices in `cluster`.
    pub fn cluster_indices(&self, cluster: Cluster) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.cluster_of[i] == cluster).collect()
    }

    /// Clean indices in `cluster`.
    pub fn clean_cluster_indices(&self, cluster: Cluster) -> Vec<usize> {
        (0..self.n())
            .filter(|&i| self.cluster_of[i] == cluster && !self.noisy[i])
            .collect()
    }

    /// Writes the dataset as CSV with 17-significant-digit floats.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.d()).map(|k| format!("x_{k}")).collect();
        header.extend(["clean_label", "label", "cluster", "is_noisy"].map(String::from));
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec: Vec<String> = self.point(i).iter().map(|v| fmt_f64(*v)).collect();
            rec.push(fmt_label(self.clean_labels[i]));
            rec.push(fmt_label(self.labels[i]));
            rec.push(self.cluster_of[i].code().to_string());
            rec.push(if self.noisy[i] { "1" } else { "0" }.to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let cols = header.len();
        if cols < 6 {
            return Err(Error::format("dataset", "too few columns"));
        }
        let d = cols - 4;
        for k in 0..d {
            if header[k] != format!("x_{k}") {
                return Err(Error::format("dataset", format!("unexpected column `{}`", &header[k])));
            }
        }
        let tail: Vec<&str> = header.iter().skip(d).collect();
        if tail != ["clean_label", "label", "cluster", "is_noisy"] {
            return Err(Error::format("dataset", "unexpected trailing columns"));
        }
        let mut values = Vec::new();
        let mut cluster_of = Vec::new();
        let mut noisy = Vec::new();
        let mut given = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            for k in 0..d {
                values.push(parse_f64(&rec[k])?);
            }
            let clean = parse_label(&rec[d])?;
            let label = parse_label(&rec[d + 1])?;
            let cluster: Cluster = rec[d + 2].parse()?;
            let flag = match &rec[d + 3] {
                "0" => false,
                "1" => true,
                other => return Err(Error::format("dataset", format!("bad is_noisy `{other}`"))),
            };
            cluster_of.push(cluster);
            noisy.push(flag);
            given.push((clean, label));
        }
        let n = cluster_of.len();
        let points = Array2::from_shape_vec((n, d), values).map_err(|e| Error::format("dataset", e))?;
        let ds = Dataset::from_parts(points, cluster_of, noisy)?;
        for (i, (clean, label)) in given.into_iter().enumerate() {
            if clean != ds.clean_labels[i] || label != ds.labels[i] {
                return Err(Error::format(
                    "dataset",
                    format!("row {i}: labels inconsistent with cluster and noise flag"),
                ));
            }
        }
        Ok(ds)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Dataset::read_csv(std::io::BufReader::new(f))
    }
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::format("csv", format!("not a number: `{s}`")))
}

fn fmt_label(y: f64) -> String {
    if y > 0.0 { "1" } else { "-1" }.to_string()
}

fn parse_label(s: &str) -> Result<f64> {
    match s.trim() {
        "1" | "+1" => Ok(1.0),
        "-1" => Ok(-1.0),
        other => Err(Error::format("dataset", format!("bad label `{other}`"))),
    }
}

/// Draws `n` samples. Sample `i` uses its own substreams for the cluster
/// choice, the Gaussian offset and the label flip, so the result is
/// independent of evaluation order and the points do not depend on `eta`.
pub fn sample_dataset(spec: &DistributionSpec, n: usize, seed: u64) -> Result<Dataset> {
    sample_dataset_range(spec, 0, n, seed)
}

/// Samples `start..start + n` of the stream that [`sample_dataset`] draws
/// from; concatenating consecutive ranges reproduces the full dataset.
pub fn sample_dataset_range(spec: &DistributionSpec, start: u64, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Config("sample count must be at least 1".into()));
    }
    let d = spec.d();
    let eta = spec.effective_noise();
    let mut points = Array2::<f64>::zeros((n, d));
    let mut cluster_of = Vec::with_capacity(n);
    let mut noisy = Vec::with_capacity(n);
    let means: Vec<Vec<f64>> = Cluster::ALL.iter().map(|&c| spec.mean(c)).collect();
    for (i, mut row) in points.axis_iter_mut(Axis(0)).enumerate() {
        let idx = start + i as u64;
        let c = Cluster::ALL[substream(seed, Purpose::Cluster, idx).random_range(0..4)];
        let mean = &means[c.index()];
        if spec.sigma() == 0.0 {
            row.iter_mut().zip(mean).for_each(|(x, m)| *x = *m);
        } else {
            let mut rng = substream(seed, Purpose::Offset, idx);
            for (x, m) in row.iter_mut().zip(mean) {
                let z: f64 = rng.sample(StandardNormal);
                *x = m + spec.sigma() * z;
            }
        }
        let u: f64 = substream(seed, Purpose::Flip, idx).random();
        cluster_of.push(c);
        noisy.push(u < eta);
    }
    Dataset::from_parts(points, cluster_of, noisy)
}

/// Constants for the sample-property checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleThresholds {
    pub c1: f64,
    pub delta: f64,
}

impl Default for SampleThresholds {
    fn default() -> Self {
        SampleThresholds { c1: 2.0, delta: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats {
    pub cluster: Cluster,
    pub count: usize,
    pub fraction: f64,
    /// `min <x_i, mu>` over the cluster.
    pub min_along_mean: Option<f64>,
    /// `max |<x_i, mu_perp>|`, with `mu_perp` the other class axis.
    pub max_across: Option<f64>,
    /// `max ||x_i - mu||^2`.
    pub max_sq_deviation: Option<f64>,
    pub empty: bool,
    pub pass_along: bool,
    pub pass_across: bool,
    pub pass_deviation: bool,
    pub pass_fraction: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePropertyReport {
    pub clusters: Vec<ClusterStats>,
    pub noisy_fraction: f64,
    pub noisy_fraction_bound: f64,
    pub pass_noisy_fraction: bool,
    /// Half-width of the allowed band around 1/4 for cluster fractions.
    pub fraction_band: f64,
    pub all_pass: bool,
}

pub fn check_sample_properties(
    dataset: &Dataset,
    spec: &DistributionSpec,
    thresholds: &SampleThresholds,
) -> Result<SamplePropertyReport> {
    let n = dataset.n();
    if n == 0 {
        return Err(Error::Config("empty dataset".into()));
    }
    if dataset.d() != spec.d() {
        return Err(Error::shape(format!("d = {}", spec.d()), format!("d = {}", dataset.d())));
    }
    let c1 = thresholds.c1;
    let spread = spec.sigma() * (spec.d() as f64).sqrt();
    let band = c1 * ((1.0 / thresholds.delta).ln() / n as f64).sqrt();

    let mut clusters = Vec::with_capacity(4);
    for c in Cluster::ALL {
        let mean = spec.mean(c);
        let perp = spec.cross_axis(c);
        let idx = dataset.cluster_indices(c);
        let mut min_along: Option<f64> = None;
        let mut max_across: Option<f64> = None;
        let mut max_dev: Option<f64> = None;
        for &i in &idx {
            let x = dataset.point(i);
            let x = x.as_slice().expect("rows are contiguous");
            let along = dot(x, &mean);
            let across = dot(x, perp).abs();
            let dev: f64 = x.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum();
            min_along = Some(min_along.map_or(along, |m| m.min(along)));
            max_across = Some(max_across.map_or(across, |m| m.max(across)));
            max_dev = Some(max_dev.map_or(dev, |m| m.max(dev)));
        }
        let fraction = idx.len() as f64 / n as f64;
        clusters.push(ClusterStats {
            cluster: c,
            count: idx.len(),
            fraction,
            min_along_mean: min_along,
            max_across,
            max_sq_deviation: max_dev,
            empty: idx.is_empty(),
            pass_along: min_along.is_some_and(|v| v >= 1.0 - c1 * spread),
            pass_across: max_across.is_some_and(|v| v <= c1 * spread),
            pass_deviation: max_dev.is_some_and(|v| v <= c1 * spread * spread),
            pass_fraction: (fraction - 0.25).abs() <= band,
        });
    }
    let noisy_fraction = dataset.noisy_set().len() as f64 / n as f64;
    let noisy_fraction_bound = spec.effective_noise() + band;
    let pass_noisy_fraction = noisy_fraction <= noisy_fraction_bound;
    let all_pass = pass_noisy_fraction
        && clusters
            .iter()
            .all(|s| s.pass_along && s.pass_across && s.pass_deviation && s.pass_fraction);
    Ok(SamplePropertyReport {
        clusters,
        noisy_fraction,
        noisy_fraction_bound,
        pass_noisy_fraction,
        fraction_band: band,
        all_pass,
    })
}
