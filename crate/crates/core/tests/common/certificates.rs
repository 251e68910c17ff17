//! Optimality and gradient certificates for the learners.

use prognosis::learners::tree::Node;
use prognosis::learners::{self, DesignMatrix, GbtParams, ModelParams, Network, Standardizer};
use prognosis::seed;
use rand::Rng;
use rand_distr::{Distribution, Normal};

pub fn names(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("x{j}")).collect()
}

pub fn logistic_problem(n: usize, p: usize, key: u64) -> (DesignMatrix, Vec<u8>) {
    let mut rng = seed::stream(key, &[]);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let beta: Vec<f64> = (0..p).map(|j| if j < 3 { 1.0 - j as f64 * 0.6 } else { 0.0 }).collect();
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for _ in 0..n {
        let row: Vec<f64> = (0..p).map(|j| normal.sample(&mut rng) * (1.0 + j as f64) + j as f64).collect();
        let eta: f64 = row.iter().zip(&beta).enumerate().map(|(j, (x, b))| b * (x - j as f64) / (1.0 + j as f64)).sum();
        y.push(u8::from(rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp())));
        rows.push(row);
    }
    (DesignMatrix::from_rows(names(p), &rows).unwrap(), y)
}

pub fn linear(m: &learners::TrainedModel) -> &learners::LinearModel {
    match &m.params {
        ModelParams::ElasticNet(l) => l,
        _ => panic!("not a linear model"),
    }
}

/// Largest KKT violation of the penalized objective, from an independent standardization.
pub fn kkt_residual(x: &DesignMatrix, y: &[u8], lambda: f64, alpha: f64, model: &learners::LinearModel) -> f64 {
    let n = x.n_rows() as f64;
    let p = model.predict(x);
    let r: Vec<f64> = p.iter().zip(y).map(|(p, &y)| p - f64::from(y)).collect();
    let mut worst = (r.iter().sum::<f64>() / n).abs();
    for j in 0..x.n_cols() {
        let col = x.col(j);
        let mean = col.iter().sum::<f64>() / n;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let g: f64 = col.iter().zip(&r).map(|(v, r)| (v - mean) / sd * r).sum::<f64>() / n;
        let b = model.coefficients[j];
        let res = if b == 0.0 {
            (g.abs() - lambda * alpha).max(0.0)
        } else {
            (g + lambda * (1.0 - alpha) * b + lambda * alpha * b.signum()).abs()
        };
        worst = worst.max(res);
    }
    worst
}

pub fn toy_two_feature(n: usize, key: u64) -> (DesignMatrix, Vec<u8>) {
    let mut rng = seed::stream(key, &[]);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for _ in 0..n {
        let a = f64::from(rng.random_range(0..12u32));
        let b = f64::from(rng.random_range(0..9u32));
        let p = if a + 0.7 * b > 9.0 { 0.85 } else { 0.2 };
        y.push(u8::from(rng.random::<f64>() < p));
        rows.push(vec![a, b]);
    }
    (DesignMatrix::from_rows(names(2), &rows).unwrap(), y)
}

/// Largest |leaf - oracle| of a single depth-1 boosting round against an
/// exhaustive Newton-step search.
pub fn newton_leaf_error(key: u64, lambda: f64) -> f64 {
    let (x, y) = toy_two_feature(50, 20 + key);
    let n = y.len() as f64;
    let mean = y.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let p0 = mean;
    let g: Vec<f64> = y.iter().map(|&v| p0 - f64::from(v)).collect();
    let h = p0 * (1.0 - p0);
    let side = |idx: &[usize]| -> (f64, f64) { (idx.iter().map(|&i| g[i]).sum(), h * idx.len() as f64) };
    let mut best: Option<(f64, f64, f64)> = None;
    for f in 0..2 {
        let mut values: Vec<f64> = x.col(f).to_vec();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for &t in &values[..values.len() - 1] {
            let (l, r): (Vec<usize>, Vec<usize>) = (0..x.n_rows()).partition(|&i| x.get(i, f) <= t);
            let (gl, hl) = side(&l);
            let (gr, hr) = side(&r);
            let cost = -gl * gl / (hl + lambda) - gr * gr / (hr + lambda);
            if best.is_none_or(|(c, _, _)| cost < c - 1e-12) {
                best = Some((cost, -gl / (hl + lambda), -gr / (hr + lambda)));
            }
        }
    }
    let (_, wl, wr) = best.unwrap();
    let hp = GbtParams {
        n_rounds: 1,
        max_depth: 1,
        learning_rate: 1.0,
        l2_leaf_lambda: lambda,
        min_leaf: 1,
    };
    let m = learners::gbt::fit_gbt(&x, &y, &hp, 0).unwrap();
    let ModelParams::Gbt(b) = &m.params else { panic!("not a boosted model") };
    let base_err = (b.base_score - (mean / (1.0 - mean)).ln()).abs();
    let Node::Split { left, right, .. } = b.trees[0].nodes[0] else { panic!("no split") };
    let leaf = |i: usize| match &b.trees[0].nodes[i] {
        Node::Leaf { value } => value[0],
        _ => panic!("not a leaf"),
    };
    base_err.max((leaf(left) - wl).abs()).max((leaf(right) - wr).abs())
}

/// Worst relative error between the analytic gradient and central differences.
pub fn gradient_check(key: u64, hidden: &[usize]) -> f64 {
    let mut rng = seed::stream(50 + key, &[]);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let rows: Vec<Vec<f64>> = (0..5).map(|_| (0..4).map(|_| normal.sample(&mut rng)).collect()).collect();
    let y = [1.0, 0.0, 1.0, 1.0, 0.0];
    let x = DesignMatrix::from_rows(names(4), &rows).unwrap();
    let mut net = Network::zeros(Standardizer::fit(&x), 4, hidden);
    let params: Vec<f64> = (0..net.n_params()).map(|_| normal.sample(&mut rng) * 0.8).collect();
    net.set_params_flat(&params);
    let flat = Standardizer::fit(&x).transform_rows(&x);
    let view = ndarray::ArrayView2::from_shape((5, 4), &flat).unwrap();
    let (_, grad) = net.loss_and_gradient(view, &y);
    let step = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..params.len() {
        let mut probe = net.clone();
        let mut p = params.clone();
        p[k] += step;
        probe.set_params_flat(&p);
        let up = probe.loss_and_gradient(view, &y).0;
        p[k] -= 2.0 * step;
        probe.set_params_flat(&p);
        let down = probe.loss_and_gradient(view, &y).0;
        let numeric = (up - down) / (2.0 * step);
        let rel = (numeric - grad[k]).abs() / numeric.abs().max(grad[k].abs()).max(1e-7);
        worst = worst.max(rel);
    }
    worst
}
