use prognosis::eval::{
    auc, fit_outer, grid_search, make_folds, nested_cv, nested_cv_detailed, sens_spec, wilcoxon_rank_sum,
    youden_threshold, CvConfig, LearnerSpec,
};
use prognosis::learners::{DesignMatrix, ElasticNetParams, ForestParams, GbtParams, Hyperparameters, Learner};
use prognosis::seed;
use proptest::prelude::*;
use rand::Rng;

fn pair_auc(s: &[f64], y: &[u8]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..s.len() {
        for j in 0..s.len() {
            if y[i] == 1 && y[j] == 0 {
                den += 1.0;
                num += if s[i] > s[j] { 1.0 } else if s[i] == s[j] { 0.5 } else { 0.0 };
            }
        }
    }
    num / den
}

#[test]
fn auc_matches_pair_counting_exactly() {
    let mut rng = seed::stream(1, &[]);
    let mut done = 0;
    while done < 1000 {
        let n = rng.random_range(2..=50);
        // coarse scores force plenty of ties
        let levels = rng.random_range(2..20);
        let s: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..levels)) / 7.0).collect();
        let y: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        if y.iter().all(|&v| v == y[0]) {
            continue;
        }
        assert_eq!(auc(&s, &y).unwrap(), pair_auc(&s, &y));
        done += 1;
    }
}

/// Two-sided p by enumerating every assignment of ranks to the first sample.
fn enumerate_p(a: &[f64], b: &[f64]) -> f64 {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    let rank = |v: f64| (all.iter().position(|&x| x == v).unwrap() + 1) as u32;
    let w: u32 = a.iter().map(|&v| rank(v)).sum();
    let n = all.len() as u32;
    let (mut le, mut ge, mut total) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != a.len() {
            continue;
        }
        let s: u32 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).sum();
        total += 1;
        le += u64::from(s <= w);
        ge += u64::from(s >= w);
    }
    (2.0 * le.min(ge) as f64 / total as f64).min(1.0)
}

#[test]
fn wilcoxon_exact_matches_enumeration() {
    let mut rng = seed::stream(2, &[]);
    for n in 1..=11 {
        for m in 1..=(12 - n) {
            for _ in 0..3 {
                let a: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
                let b: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + 0.2).collect();
                let p = wilcoxon_rank_sum(&a, &b).unwrap();
                assert!((p - enumerate_p(&a, &b)).abs() < 1e-12, "n={n} m={m}");
            }
        }
    }
    assert!((wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap() - 0.1).abs() < 1e-12);
}

#[test]
fn wilcoxon_normal_approximation_is_close() {
    for key in 0..3 {
        let mut rng = seed::stream(30 + key, &[]);
        let a: Vec<f64> = (0..12).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..13).map(|_| rng.random::<f64>() + 0.25).collect();
        let p = wilcoxon_rank_sum(&a, &b).unwrap();
        let exact = enumerate_p(&a, &b);
        assert!((p - exact).abs() < 0.02, "{p} vs {exact}");
    }
}

#[test]
fn youden_matches_exhaustive_scan() {
    for key in 0..20 {
        let mut rng = seed::stream(100 + key, &[]);
        let s: Vec<f64> = (0..20).map(|_| f64::from(rng.random_range(0..12u32)) / 11.0).collect();
        let mut y: Vec<u8> = (0..20).map(|_| rng.random_range(0..2)).collect();
        y[0] = 0;
        y[1] = 1;
        let mut cuts = s.clone();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut best = (f64::NEG_INFINITY, 0.0);
        for &t in &cuts {
            let (se, sp) = sens_spec(&s, &y, t).unwrap();
            let j = se + sp - 1.0;
            if j > best.0 + 1e-12 {
                best = (j, t);
            }
        }
        assert_eq!(youden_threshold(&s, &y).unwrap(), best.1, "seed {key}");
    }
}

proptest! {
    #[test]
    fn auc_symmetries(
        s in prop::collection::vec(0.0f64..1.0, 4..40),
        bits in prop::collection::vec(0u8..2, 40),
    ) {
        let mut y = bits[..s.len()].to_vec();
        y[0] = 0;
        y[1] = 1;
        let a = auc(&s, &y).unwrap();
        let flipped: Vec<u8> = y.iter().map(|v| 1 - v).collect();
        prop_assert!((a - (1.0 - auc(&s, &flipped).unwrap())).abs() < 1e-15);
        let warped: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
        prop_assert_eq!(a, auc(&warped, &y).unwrap());
    }

    #[test]
    fn wilcoxon_is_symmetric(
        a in prop::collection::vec(0u32..30, 1..15),
        b in prop::collection::vec(0u32..30, 1..15),
    ) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let p = wilcoxon_rank_sum(&a, &b).unwrap();
        prop_assert_eq!(p, wilcoxon_rank_sum(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&p));
    }
}

fn learnable(n: usize, p: usize, key: u64, signal: f64) -> (DesignMatrix, Vec<u8>) {
    let mut rng = seed::stream(key, &[]);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for _ in 0..n {
        let row: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let eta = signal * (row[0] - 0.5 * row[1]);
        y.push(u8::from(rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp())));
        rows.push(row);
    }
    let names = (0..p).map(|j| format!("f{j}")).collect();
    (DesignMatrix::from_rows(names, &rows).unwrap(), y)
}

fn small_cv(seed: u64) -> CvConfig {
    CvConfig {
        inner_folds: 3,
        inner_repeats: 1,
        master_seed: seed,
        ..CvConfig::default()
    }
}

fn small_specs() -> Vec<LearnerSpec> {
    vec![
        LearnerSpec {
            learner: Learner::ElasticNet,
            grid: vec![
                Hyperparameters::ElasticNet(ElasticNetParams { lambda: 0.01, alpha: 0.5 }),
                Hyperparameters::ElasticNet(ElasticNetParams { lambda: 0.3, alpha: 1.0 }),
            ],
        },
        LearnerSpec {
            learner: Learner::Gbt,
            grid: vec![Hyperparameters::Gbt(GbtParams {
                n_rounds: 15,
                max_depth: 2,
                ..GbtParams::default()
            })],
        },
    ]
}

#[test]
fn grid_search_prefers_the_memorizing_forest_and_breaks_ties_first() {
    let (x, y) = learnable(120, 3, 5, 8.0);
    let fit = |min_leaf| {
        Hyperparameters::RandomForest(ForestParams {
            n_trees: 30,
            min_leaf,
            ..ForestParams::default()
        })
    };
    let cv = small_cv(1);
    let r = grid_search(&[fit(120), fit(1)], &x, &y, &cv, 9).unwrap();
    assert_eq!(r.best_index, 1);
    let same = grid_search(&[fit(1), fit(1)], &x, &y, &cv, 9).unwrap();
    assert_eq!(same.best_index, 0);
    assert_eq!(same.mean_auc[0], same.mean_auc[1]);
    let single = grid_search(&[fit(3)], &x, &y, &cv, 9).unwrap();
    assert_eq!(single.best, fit(3));
}

#[test]
fn nested_cv_reports_every_outer_estimate_and_is_deterministic() {
    let (x, y) = learnable(100, 4, 6, 3.0);
    let cv = small_cv(3);
    let (report, held_out) = nested_cv_detailed(&x, &y, &small_specs(), &cv).unwrap();
    assert_eq!(report.models.len(), 3);
    for m in &report.models {
        assert_eq!(m.n_estimates, 25, "{}", m.model);
        assert!(m.failures.is_empty());
    }
    assert_eq!(report.comparisons.len(), 3);
    let folds = make_folds(&y, 5, 5, true, prognosis::seed::derive(3, &[prognosis::seed::tag::OUTER])).unwrap();
    for h in &held_out {
        let (train, test) = folds.split(h.repeat, h.fold);
        assert_eq!(h.rows, test);
        assert!(train.iter().all(|i| !test.contains(i)));
        assert_eq!(train.len() + test.len(), 100);
        let members: Vec<&Vec<f64>> = h.predictions.iter().filter(|(n, _)| n != "ensemble").map(|(_, p)| p).collect();
        let ens = &h.predictions.iter().find(|(n, _)| n == "ensemble").unwrap().1;
        for (i, &e) in ens.iter().enumerate() {
            let lo = members.iter().map(|m| m[i]).fold(f64::INFINITY, f64::min);
            let hi = members.iter().map(|m| m[i]).fold(f64::NEG_INFINITY, f64::max);
            assert!(lo <= e && e <= hi);
        }
    }
    let again = nested_cv(&x, &y, &small_specs(), &cv).unwrap();
    assert_eq!(serde_json::to_string(&report).unwrap(), serde_json::to_string(&again).unwrap());
    let mean = report.model("gbt").unwrap().mean_auc.unwrap();
    assert!(mean > 0.6, "learnable data gave {mean}");
}

#[test]
fn nested_cv_is_schedule_independent() {
    let (x, y) = learnable(80, 3, 7, 3.0);
    let cv = small_cv(4);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let a = one.install(|| nested_cv(&x, &y, &small_specs(), &cv)).unwrap();
    let b = three.install(|| nested_cv(&x, &y, &small_specs(), &cv)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn held_out_rows_never_influence_the_fit() {
    let (x, y) = learnable(90, 4, 8, 3.0);
    let cv = small_cv(5);
    let folds = make_folds(&y, 5, 1, true, 77).unwrap();
    let (train, test) = folds.split(0, 2);
    let mut rng = seed::stream(99, &[]);
    for spec in small_specs() {
        let base = fit_outer(&x, &y, &train, &spec, &cv, 0, 2).unwrap();
        for &row in &test {
            let mut rows: Vec<Vec<f64>> = (0..x.n_rows()).map(|i| x.row(i)).collect();
            rows[row].iter_mut().for_each(|v| *v = rng.random_range(-100.0..100.0));
            let mut y2 = y.clone();
            y2[row] = 1 - y2[row];
            let x2 = DesignMatrix::from_rows(x.names().to_vec(), &rows).unwrap();
            let other = fit_outer(&x2, &y2, &train, &spec, &cv, 0, 2).unwrap();
            assert_eq!(base, other);
        }
    }
}

#[test]
fn single_class_labels_are_rejected() {
    let (x, _) = learnable(30, 2, 9, 1.0);
    assert!(nested_cv(&x, &[1; 30], &small_specs(), &small_cv(0)).is_err());
}
