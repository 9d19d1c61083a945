//! Brute-force reference implementations used as test oracles. Everything
//! here works on plain `Vec`s with explicit loops and shares no code with
//! the library beyond reading its inputs.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xorgd::diagnostics::{self, candidate_sets, edge_counts, DiagnosticContext, DiagnosticsConfig, ProjectionRecorder};
use xorgd::trainer::{gradient, train_from, TrainConfig};
use xorgd::{init_network, make_spec, sample_dataset, Cluster, Dataset, MeanMode, NetworkParams, SnapshotPolicy};

pub type Mat = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn to_mat(p: &NetworkParams) -> Mat {
    (0..p.m()).map(|j| p.row(j).to_vec()).collect()
}

pub fn points(ds: &Dataset) -> Mat {
    (0..ds.n()).map(|i| ds.point(i).to_vec()).collect()
}

pub fn ip(u: &[f64], v: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..u.len() {
        s += u[k] * v[k];
    }
    s
}

pub fn l2(u: &[f64]) -> f64 {
    ip(u, u).sqrt()
}

pub fn second_layer(m: usize) -> Vec<f64> {
    let h = m / 2;
    let s = 1.0 / (m as f64).sqrt();
    (0..m)
        .map(|j| if j < h { s } else if j < 2 * h { -s } else { 0.0 })
        .collect()
}

pub fn phi(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        0.0
    }
}

pub fn dphi(z: f64, at_zero: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else if z < 0.0 {
        0.0
    } else {
        at_zero
    }
}

pub fn f(w: &Mat, a: &[f64], x: &[f64]) -> f64 {
    let mut s = 0.0;
    for j in 0..w.len() {
        s += a[j] * phi(ip(&w[j], x));
    }
    s
}

pub fn f_sub(w: &Mat, a: &[f64], x: &[f64], subset: &[usize]) -> f64 {
    let mut s = 0.0;
    for &j in subset {
        s += a[j] * phi(ip(&w[j], x));
    }
    s
}

/// Logistic loss by its defining formula; fine for moderate arguments.
pub fn loss(z: f64) -> f64 {
    (1.0 + (-z).exp()).ln()
}

pub fn risk(w: &Mat, a: &[f64], xs: &Mat, ys: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..xs.len() {
        s += loss(ys[i] * f(w, a, &xs[i]));
    }
    s / xs.len() as f64
}

/// Analytic gradient by explicit summation.
pub fn grad(w: &Mat, a: &[f64], xs: &Mat, ys: &[f64], at_zero: f64) -> Mat {
    let n = xs.len() as f64;
    let d = xs[0].len();
    let mut g = vec![vec![0.0; d]; w.len()];
    for i in 0..xs.len() {
        let z = ys[i] * f(w, a, &xs[i]);
        let lp = -1.0 / (1.0 + z.exp());
        for j in 0..w.len() {
            let c = lp * ys[i] * a[j] * dphi(ip(&w[j], &xs[i]), at_zero) / n;
            for k in 0..d {
                g[j][k] += c * xs[i][k];
            }
        }
    }
    g
}

/// Central finite differences of the empirical risk.
pub fn fd_grad(w: &Mat, a: &[f64], xs: &Mat, ys: &[f64], h: f64) -> Mat {
    let mut g = vec![vec![0.0; w[0].len()]; w.len()];
    for j in 0..w.len() {
        for k in 0..w[0].len() {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[j][k] += h;
            wm[j][k] -= h;
            g[j][k] = (risk(&wp, a, xs, ys) - risk(&wm, a, xs, ys)) / (2.0 * h);
        }
    }
    g
}

/// Smallest `|<w_j, x_i>|` over all pairs.
pub fn kink_margin(w: &Mat, xs: &Mat) -> f64 {
    let mut best = f64::INFINITY;
    for row in w {
        for x in xs {
            best = best.min(ip(row, x).abs());
        }
    }
    best
}

pub fn mean_of(mu1: &[f64], mu2: &[f64], c: Cluster) -> Vec<f64> {
    match c {
        Cluster::PlusMu1 => mu1.to_vec(),
        Cluster::MinusMu1 => mu1.iter().map(|v| -v).collect(),
        Cluster::PlusMu2 => mu2.to_vec(),
        Cluster::MinusMu2 => mu2.iter().map(|v| -v).collect(),
    }
}

pub fn brute_jsets(w: &Mat, a: &[f64], mu1: &[f64], mu2: &[f64], threshold: f64) -> [Vec<usize>; 4] {
    Cluster::ALL.map(|c| {
        let mu = mean_of(mu1, mu2, c);
        let mut out = Vec::new();
        for j in 0..w.len() {
            let sign_ok = match c {
                Cluster::PlusMu1 | Cluster::MinusMu1 => a[j] > 0.0,
                _ => a[j] < 0.0,
            };
            let nrm = l2(&w[j]);
            if sign_ok && nrm > 0.0 && ip(&w[j], &mu) / nrm >= threshold {
                out.push(j);
            }
        }
        out
    })
}

pub fn opposite(c: Cluster) -> Cluster {
    match c {
        Cluster::PlusMu1 => Cluster::MinusMu1,
        Cluster::MinusMu1 => Cluster::PlusMu1,
        Cluster::PlusMu2 => Cluster::MinusMu2,
        Cluster::MinusMu2 => Cluster::PlusMu2,
    }
}

/// Per-set count of candidate neurons satisfying alignment.
pub fn brute_alignment(w: &Mat, xs: &Mat, clusters: &[Cluster], jsets: &[Vec<usize>; 4], at_zero: f64) -> [usize; 4] {
    let mut counts = [0; 4];
    for (k, c) in Cluster::ALL.iter().enumerate() {
        for &j in &jsets[k] {
            let mut ok = true;
            for i in 0..xs.len() {
                let v = dphi(ip(&w[j], &xs[i]), at_zero);
                if clusters[i] == *c && v != 1.0 {
                    ok = false;
                }
                if clusters[i] == opposite(*c) && v != 0.0 {
                    ok = false;
                }
            }
            if ok {
                counts[k] += 1;
            }
        }
    }
    counts
}

/// Largest `|<w_j, mu_other>| / (3 alpha |a_j|)` over candidate neurons.
pub fn brute_orth_ratio(w: &Mat, a: &[f64], mu1: &[f64], mu2: &[f64], jsets: &[Vec<usize>; 4], alpha: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for (k, c) in Cluster::ALL.iter().enumerate() {
        let other = if matches!(c, Cluster::PlusMu1 | Cluster::MinusMu1) { mu2 } else { mu1 };
        for &j in &jsets[k] {
            worst = worst.max(ip(&w[j], other).abs() / (3.0 * alpha * a[j].abs()));
        }
    }
    worst
}

pub fn brute_edge(w: &Mat, xs: &Mat, clusters: &[Cluster], noisy: &[bool], j: usize, c: Cluster, at_zero: f64) -> f64 {
    let mut e = 0.0;
    for i in 0..xs.len() {
        if noisy[i] {
            continue;
        }
        let v = dphi(ip(&w[j], &xs[i]), at_zero);
        if clusters[i] == c {
            e += v;
        } else if clusters[i] == opposite(c) {
            e -= v;
        }
    }
    e
}

pub fn brute_displacement(w0: &Mat, wt: &Mat, x: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..w0.len() {
        let h0 = phi(ip(&w0[j], x));
        let ht = phi(ip(&wt[j], x));
        num += (ht - h0) * (ht - h0);
        den += h0 * h0;
    }
    if den == 0.0 {
        f64::INFINITY
    } else {
        (num / den).sqrt()
    }
}

pub fn brute_ramp(z: f64, gamma: f64) -> f64 {
    let v = 1.0 - z / gamma;
    if v < 0.0 {
        0.0
    } else if v > 1.0 {
        1.0
    } else {
        v
    }
}

pub fn brute_median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

pub fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = l2(&v);
        if n > 1e-3 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

/// Compares every diagnostics scalar of one random run against the
/// brute-force oracle; returns the number of scalars checked.
pub fn check_instance(seed: u64) -> Result<usize, String> {
    let mut r = rng(1000 + seed);
    let d = r.random_range(2..=8);
    let n = r.random_range(8..=64);
    let m = r.random_range(2..=16);
    let eta = if r.random_bool(0.3) { 0.0 } else { r.random_range(0.0..0.3) };
    let spec = make_spec(d, r.random_range(0.0..0.4), eta, MeanMode::RandomOrthonormal, r.random()).unwrap();
    let ds = sample_dataset(&spec, n, r.random()).unwrap();
    let at_zero = [0.0, 0.5, 1.0][r.random_range(0..3)];
    let mut cfg = DiagnosticsConfig::default();
    if r.random_bool(0.5) {
        cfg.correlation_threshold_scale = Some(r.random_range(0.0..1.5));
    }
    let alpha = r.random_range(0.05..0.5);
    let iterations = r.random_range(1..=6);
    let tc = TrainConfig {
        alpha,
        iterations,
        omega_init: r.random_range(0.05..1.0) / ((m * d) as f64).sqrt(),
        subgrad_at_zero: at_zero,
        snapshot_policy: SnapshotPolicy::All,
        seed: r.random(),
    };
    let p0 = init_network(m, d, tc.omega_init, at_zero, tc.seed).unwrap();
    let jsets = candidate_sets(&p0, &spec, &cfg).unwrap();
    let mut recorder = ProjectionRecorder::new(&spec, alpha, iterations);
    let trace = train_from(p0.clone(), &ds, &tc, Some(&mut |t, p| recorder.observe(t, p))).unwrap();
    let n_test = 300;
    let test_seed: u64 = r.random();

    let (mu1, mu2) = (spec.mu1().to_vec(), spec.mu2().to_vec());
    let a = p0.a().to_vec();
    let xs = points(&ds);
    let ys = ds.labels().to_vec();
    let clusters = ds.cluster_of().to_vec();
    let noisy = ds.noisy_mask().to_vec();
    let w0 = to_mat(&p0);
    let threshold = cfg.threshold_scale() / (d as f64).sqrt();
    let bj = brute_jsets(&w0, &a, &mu1, &mu2, threshold);
    let mut checked = 0;
    let fail = |what: String| Err::<(), String>(format!("instance {seed}: {what}"));
    let tol = 1e-12;

    for (k, c) in Cluster::ALL.iter().enumerate() {
        checked += 1;
        if jsets.get(*c) != bj[k].as_slice() {
            fail(format!("J set {c} {:?} vs {:?}", jsets.get(*c), bj[k]))?;
        }
    }
    let edges = edge_counts(&p0, &ds, &jsets, &cfg).unwrap();
    for e in &edges.entries {
        checked += 1;
        let b = brute_edge(&w0, &xs, &clusters, &noisy, e.neuron, e.cluster, at_zero);
        if e.edge != b {
            fail(format!("edge of neuron {} {} vs {b}", e.neuron, e.edge))?;
        }
    }

    let test_set = sample_dataset(&spec, n_test, test_seed).unwrap();
    let test_pts = points(&test_set);
    let ctx = DiagnosticContext {
        spec: &spec,
        train: &ds,
        params0: &p0,
        jsets: &jsets,
        recorder: Some(&recorder),
        test: Some((n_test, test_seed)),
        cfg: &cfg,
    };
    for t in 0..=iterations {
        let pt = trace.snapshot(t).unwrap();
        let w = to_mat(pt);
        let rep = ctx.evaluate(t, pt).unwrap();

        // training record
        let rec = &trace.records[t];
        checked += 4;
        if !close(rec.empirical_risk, risk(&w, &a, &xs, &ys), tol) {
            fail(format!("risk at t={t}"))?;
        }
        let frob = w.iter().map(|row| ip(row, row)).sum::<f64>().sqrt();
        let max_norm = w.iter().map(|row| l2(row)).fold(0.0, f64::max);
        if !close(rec.frob_norm, frob, tol) || !close(rec.max_neuron_norm, max_norm, tol) {
            fail(format!("norms at t={t}"))?;
        }
        let (mut hits_c, mut nc, mut hits_n, mut nn) = (0, 0, 0, 0);
        for i in 0..n {
            let fx = f(&w, &a, &xs[i]);
            let hit = fx != 0.0 && (fx > 0.0) == (ys[i] > 0.0);
            if noisy[i] {
                nn += 1;
                hits_n += hit as usize;
            } else {
                nc += 1;
                hits_c += hit as usize;
            }
        }
        let acc = |h: usize, k: usize| (k > 0).then(|| h as f64 / k as f64);
        if rec.clean_acc != acc(hits_c, nc) || rec.noisy_acc != acc(hits_n, nn) {
            fail(format!("accuracies at t={t}"))?;
        }

        // gradient
        if t < iterations {
            let g = gradient(pt, &ds).unwrap();
            let bg = grad(&w, &a, &xs, &ys, at_zero);
            for j in 0..m {
                for k in 0..d {
                    checked += 1;
                    if !close(g[[j, k]], bg[j][k], tol) {
                        fail(format!("gradient ({j},{k}) at t={t}"))?;
                    }
                }
            }
        }

        // alignment
        let counts = brute_alignment(&w, &xs, &clusters, &bj, at_zero);
        for (k, s) in rep.alignment.sets.iter().enumerate() {
            checked += 2;
            let frac = if bj[k].is_empty() { 1.0 } else { counts[k] as f64 / bj[k].len() as f64 };
            if s.satisfied != counts[k] || s.size != bj[k].len() || s.fraction != frac {
                fail(format!("alignment {} at t={t}", s.cluster))?;
            }
        }

        // almost-orthogonality up to t
        if t >= 1 {
            let ao = rep.almost_orth.as_ref().unwrap();
            let mut worst: f64 = 0.0;
            for (s, &(tt, ratio)) in ao.per_iteration.iter().enumerate() {
                checked += 1;
                let b = brute_orth_ratio(&to_mat(trace.snapshot(tt).unwrap()), &a, &mu1, &mu2, &bj, alpha);
                if tt != s + 1 || !close(ratio, b, tol) {
                    fail(format!("orthogonality ratio at t={tt}"))?;
                }
                worst = worst.max(b);
            }
            checked += 3;
            let b0 = brute_orth_ratio(&w0, &a, &mu1, &mu2, &bj, alpha);
            if !close(ao.max_violation_ratio, worst, tol) || ao.holds != (worst <= 1.0) || !close(ao.initial_ratio, b0, tol) {
                fail(format!("orthogonality summary at t={t}"))?;
            }
        }

        // correlations and their medians over the candidate sets
        let summary = rep.summary();
        for (k, c) in Cluster::ALL.iter().enumerate() {
            let mu = mean_of(&mu1, &mu2, *c);
            let mut vals = Vec::new();
            for j in 0..m {
                checked += 1;
                let nrm = l2(&w[j]);
                let b = if nrm == 0.0 { 0.0 } else { ip(&w[j], &mu) / nrm };
                if !close(rep.correlations[k].values[j], b, tol) {
                    fail(format!("correlation of neuron {j} with {c} at t={t}"))?;
                }
                if bj[k].contains(&j) && nrm > 0.0 {
                    vals.push(b);
                }
            }
            checked += 1;
            let med = summary.median_correlation[c.code()];
            match (med, brute_median(vals)) {
                (None, None) => {}
                (Some(x), Some(y)) if close(x, y, tol) => {}
                other => fail(format!("median correlation {c} at t={t}: {other:?}"))?,
            }
        }

        // margins
        let mut min_clean: Option<f64> = None;
        let mut max_noisy: Option<f64> = None;
        let mut ramp_sum = 0.0;
        for i in 0..n {
            checked += 1;
            let mg = ys[i] * f(&w, &a, &xs[i]);
            if !close(rep.margins.margins[i], mg, tol) {
                fail(format!("margin {i} at t={t}"))?;
            }
            if noisy[i] {
                max_noisy = Some(max_noisy.map_or(mg, |v| v.max(mg)));
            } else {
                min_clean = Some(min_clean.map_or(mg, |v| v.min(mg)));
            }
            ramp_sum += brute_ramp(mg, cfg.gamma);
        }
        checked += 5;
        let opt_close = |x: Option<f64>, y: Option<f64>| match (x, y) {
            (None, None) => true,
            (Some(x), Some(y)) => close(x, y, tol),
            _ => false,
        };
        if !opt_close(rep.margins.min_clean, min_clean) || !opt_close(rep.margins.max_noisy, max_noisy) {
            fail(format!("margin extremes at t={t}"))?;
        }
        if rep.clean_all_correct != min_clean.is_none_or(|v| v > 0.0)
            || rep.noisy_all_incorrect != max_noisy.is_none_or(|v| v < 0.0)
            || rep.gamma_margin_pass != min_clean.is_some_and(|v| v >= cfg.gamma)
        {
            fail(format!("margin flags at t={t}"))?;
        }

        // ramp risk and bound
        checked += 2;
        let ramp = ramp_sum / n as f64;
        if !close(rep.ramp_risk, ramp, tol) {
            fail(format!("ramp risk at t={t}"))?;
        }
        let bound = ramp + 4.0 / (cfg.gamma * (n as f64).sqrt()) + (2.0 * (4.0 / cfg.delta).ln() / n as f64).sqrt();
        if !close(rep.generalization_bound_value, bound, tol) {
            fail(format!("bound at t={t}"))?;
        }

        // feature displacement
        let mut min_disp = f64::INFINITY;
        for i in 0..n {
            checked += 1;
            let b = brute_displacement(&w0, &w, &xs[i]);
            if !close(rep.feature_displacement.ratios[i], b, tol) {
                fail(format!("displacement {i} at t={t}"))?;
            }
            min_disp = min_disp.min(b);
        }
        checked += 1;
        if !close(rep.feature_displacement.min, min_disp, tol) {
            fail(format!("displacement min at t={t}"))?;
        }

        // test error on the same sample stream
        let errors = test_pts
            .iter()
            .zip(test_set.labels())
            .filter(|(x, y)| {
                let fx = f(&w, &a, x);
                fx == 0.0 || (fx > 0.0) != (**y > 0.0)
            })
            .count();
        checked += 1;
        let te = rep.test_error.unwrap();
        if te.error != errors as f64 / n_test as f64 || te.n != n_test {
            fail(format!("test error at t={t}: {} vs {errors}/{n_test}", te.error))?;
        }
    }

    // weight growth ratios, every t >= 1
    for row in recorder.growth() {
        let w = to_mat(trace.snapshot(row.t).unwrap());
        let scale = 2.0 * alpha * row.t as f64;
        let neuron = (0..m)
            .filter(|&j| a[j] != 0.0)
            .map(|j| l2(&w[j]) / (a[j].abs() * scale))
            .fold(0.0, f64::max);
        let frob = w.iter().map(|r| ip(r, r)).sum::<f64>().sqrt() / scale;
        checked += 2;
        if !close(row.neuron_ratio, neuron, tol) || !close(row.frob_ratio, frob, tol) {
            fail(format!("growth ratios at t={}", row.t))?;
        }
    }

    // amplification between t = 0 and t = 1
    let amp = diagnostics::amplification(&p0, trace.snapshot(1).unwrap(), &spec, &jsets).unwrap();
    let w1 = to_mat(trace.snapshot(1).unwrap());
    for (k, c) in Cluster::ALL.iter().enumerate() {
        let mu = mean_of(&mu1, &mu2, *c);
        let med = |w: &Mat| brute_median(bj[k].iter().filter(|&&j| l2(&w[j]) > 0.0).map(|&j| ip(&w[j], &mu) / l2(&w[j])).collect());
        checked += 2;
        let ok = |x: Option<f64>, y: Option<f64>| match (x, y) {
            (None, None) => true,
            (Some(x), Some(y)) => close(x, y, tol),
            _ => false,
        };
        if !ok(amp[k].median_before, med(&w0)) || !ok(amp[k].median_after, med(&w1)) {
            fail(format!("amplification medians for {c}"))?;
        }
    }
    Ok(checked)
}
