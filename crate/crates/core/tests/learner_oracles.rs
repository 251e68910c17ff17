mod common;

use common::certificates::{gradient_check, kkt_residual, linear, logistic_problem, names, newton_leaf_error, toy_two_feature};
use common::pair_auc;
use prognosis::learners::tree::Node;
use prognosis::learners::{
    self, fit, predict_proba, DesignMatrix, ElasticNetParams, ForestParams, GbtParams, Hyperparameters,
    MlpParams, Mtry,
};
use prognosis::seed;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

#[test]
fn elastic_net_kkt_certificate_on_seeded_problems() {
    let lambdas = [1e-3, 1e-2, 5e-2, 0.2];
    let alphas = [0.0, 0.3, 0.7, 1.0, 0.5];
    for k in 0..20u64 {
        let (x, y) = logistic_problem(120, 8, 100 + k);
        let hp = ElasticNetParams {
            lambda: lambdas[k as usize % 4],
            alpha: alphas[k as usize % 5],
        };
        let m = learners::linear::fit_elastic_net(&x, &y, &hp, 0).unwrap();
        let res = kkt_residual(&x, &y, hp.lambda, hp.alpha, linear(&m));
        assert!(res <= 1e-6, "problem {k}: KKT residual {res:e}");
    }
}

#[test]
fn lasso_keeps_only_the_informative_column() {
    let mut rng = seed::stream(5, &[]);
    let n = 300;
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for _ in 0..n {
        let row: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        y.push(u8::from(rng.random::<f64>() < 1.0 / (1.0 + (-4.0 * row[2]).exp())));
        rows.push(row);
    }
    let x = DesignMatrix::from_rows(names(5), &rows).unwrap();
    let hp = ElasticNetParams { lambda: 0.08, alpha: 1.0 };
    let m = learners::linear::fit_elastic_net(&x, &y, &hp, 0).unwrap();
    let l = linear(&m);
    for (j, &b) in l.coefficients.iter().enumerate() {
        assert_eq!(b != 0.0, j == 2, "coefficient {j} = {b}");
    }
    assert!(kkt_residual(&x, &y, hp.lambda, hp.alpha, l) <= 1e-6);
}

/// Unpenalized logistic regression by Newton-Raphson with Gaussian elimination.
fn newton_logistic(x: &DesignMatrix, y: &[u8]) -> Vec<f64> {
    let n = x.n_rows();
    let p = x.n_cols() + 1;
    let row = |i: usize| -> Vec<f64> {
        let mut r = vec![1.0];
        r.extend(x.row(i));
        r
    };
    let mut beta = vec![0.0; p];
    for _ in 0..100 {
        let mut g = vec![0.0; p];
        let mut h = vec![vec![0.0; p]; p];
        for i in 0..n {
            let r = row(i);
            let eta: f64 = r.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let mu = 1.0 / (1.0 + (-eta).exp());
            for a in 0..p {
                g[a] += (mu - f64::from(y[i])) * r[a];
                for b in 0..p {
                    h[a][b] += mu * (1.0 - mu) * r[a] * r[b];
                }
            }
        }
        // solve h * d = g
        let mut aug: Vec<Vec<f64>> = h.iter().zip(&g).map(|(row, &gi)| {
            let mut r = row.clone();
            r.push(gi);
            r
        }).collect();
        for c in 0..p {
            let piv = (c..p).max_by(|&a, &b| aug[a][c].abs().total_cmp(&aug[b][c].abs())).unwrap();
            aug.swap(c, piv);
            for r in 0..p {
                if r != c {
                    let f = aug[r][c] / aug[c][c];
                    for k in c..=p {
                        aug[r][k] -= f * aug[c][k];
                    }
                }
            }
        }
        let d: Vec<f64> = (0..p).map(|c| aug[c][p] / aug[c][c]).collect();
        beta.iter_mut().zip(&d).for_each(|(b, d)| *b -= d);
        if d.iter().all(|v| v.abs() < 1e-13) {
            break;
        }
    }
    beta
}

#[test]
fn ridge_limit_matches_newton_oracle() {
    let (x, y) = logistic_problem(400, 4, 9);
    let m = learners::linear::fit_elastic_net(&x, &y, &ElasticNetParams { lambda: 1e-9, alpha: 0.0 }, 0).unwrap();
    let (b0, slopes) = linear(&m).original_scale();
    let oracle = newton_logistic(&x, &y);
    assert!((b0 - oracle[0]).abs() < 1e-4, "{b0} vs {}", oracle[0]);
    for (a, b) in slopes.iter().zip(&oracle[1..]) {
        assert!((a - b).abs() < 1e-4, "{a} vs {b}");
    }
}

#[test]
fn depth_one_tree_matches_exhaustive_gini() {
    for key in 0..10 {
        let (x, y) = toy_two_feature(60, key);
        // oracle: enumerate every (feature, observed value) split
        let gini = |idx: &[usize]| -> f64 {
            let w = idx.len() as f64;
            let pos = idx.iter().filter(|&&i| y[i] == 1).count() as f64;
            w - (pos * pos + (w - pos) * (w - pos)) / w
        };
        let mut best: Option<(f64, usize, f64)> = None;
        for f in 0..2 {
            let mut values: Vec<f64> = x.col(f).to_vec();
            values.sort_by(f64::total_cmp);
            values.dedup();
            for &t in &values[..values.len() - 1] {
                let (l, r): (Vec<usize>, Vec<usize>) = (0..x.n_rows()).partition(|&i| x.get(i, f) <= t);
                let cost = gini(&l) + gini(&r);
                if best.is_none_or(|(c, _, _)| cost < c - 1e-12) {
                    best = Some((cost, f, t));
                }
            }
        }
        let (_, bf, bt) = best.unwrap();
        let hp = ForestParams {
            n_trees: 1,
            mtry: Mtry::All,
            bootstrap: false,
            max_depth: Some(1),
            min_leaf: 1,
        };
        let m = learners::forest::fit_random_forest(&x, &y, &hp, 0).unwrap();
        match m.forest().unwrap().trees[0].nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!((feature, threshold), (bf, bt), "seed {key}");
            }
            _ => panic!("root did not split"),
        }
    }
}

#[test]
fn forest_memorizes_unique_rows() {
    let (x, y) = logistic_problem(150, 5, 11);
    let hp = ForestParams {
        n_trees: 10,
        bootstrap: false,
        min_leaf: 1,
        ..Default::default()
    };
    let m = fit(&x, &y, &Hyperparameters::RandomForest(hp), 3).unwrap();
    let p = predict_proba(&m, &x).unwrap();
    let correct = p.iter().zip(&y).filter(|(p, &y)| (**p >= 0.5) == (y == 1)).count();
    assert_eq!(correct, y.len());
}

#[test]
fn forest_is_deterministic() {
    let (x, y) = logistic_problem(100, 6, 12);
    let hp = Hyperparameters::RandomForest(ForestParams {
        n_trees: 25,
        ..Default::default()
    });
    let a = fit(&x, &y, &hp, 42).unwrap().to_json().unwrap();
    let b = fit(&x, &y, &hp, 42).unwrap().to_json().unwrap();
    assert_eq!(a, b);
    let c = fit(&x, &y, &hp, 43).unwrap().to_json().unwrap();
    assert_ne!(a, c);
}

#[test]
fn single_newton_step_matches_closed_form() {
    for (key, lambda) in [(0u64, 0.0), (1, 1.0), (2, 3.5)] {
        let err = newton_leaf_error(key, lambda);
        assert!(err < 1e-10, "leaf error {err:e}");
    }
}

#[test]
fn network_gradient_matches_central_differences() {
    for (key, hidden) in [(0u64, vec![3]), (1, vec![4, 3]), (2, vec![5, 4, 2])] {
        let worst = gradient_check(key, &hidden);
        assert!(worst < 1e-4, "hidden {hidden:?}: relative error {worst:e}");
    }
}

#[test]
fn network_separates_blobs() {
    let mut rng = seed::stream(77, &[]);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in 0..200 {
        let c = if i % 2 == 0 { -2.0 } else { 2.0 };
        rows.push(vec![c + normal.sample(&mut rng), c + normal.sample(&mut rng)]);
        y.push(u8::from(i % 2 == 1));
    }
    let x = DesignMatrix::from_rows(names(2), &rows).unwrap();
    let m = fit(&x, &y, &Hyperparameters::Mlp(MlpParams::default()), 1).unwrap();
    let auc = pair_auc(&predict_proba(&m, &x).unwrap(), &y);
    assert!(auc > 0.95, "training AUC {auc}");
}

fn small_hps() -> Vec<Hyperparameters> {
    vec![
        Hyperparameters::ElasticNet(ElasticNetParams { lambda: 0.01, alpha: 0.5 }),
        Hyperparameters::RandomForest(ForestParams {
            n_trees: 20,
            ..Default::default()
        }),
        Hyperparameters::Gbt(GbtParams {
            n_rounds: 20,
            ..Default::default()
        }),
        Hyperparameters::Mlp(MlpParams {
            epochs: 10,
            hidden: vec![8],
            ..Default::default()
        }),
    ]
}

#[test]
fn json_round_trip_preserves_predictions_bit_exactly() {
    let (x, y) = logistic_problem(90, 5, 31);
    for hp in small_hps() {
        let m = fit(&x, &y, &hp, 8).unwrap();
        let back = learners::TrainedModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        let a = predict_proba(&m, &x).unwrap();
        let b = predict_proba(&back, &x).unwrap();
        assert!(a.iter().zip(&b).all(|(a, b)| a.to_bits() == b.to_bits()), "{}", hp.learner());
    }
}

#[test]
fn tree_learners_ignore_monotone_feature_transforms() {
    let (x, y) = logistic_problem(120, 4, 41);
    let mut warped = x.clone();
    warped.map_col(1, |v| (v / 3.0).exp() + 2.0 * v).unwrap();
    warped.map_col(3, |v| v * v * v).unwrap();
    for hp in &small_hps()[1..3] {
        let a = predict_proba(&fit(&x, &y, hp, 5).unwrap(), &x).unwrap();
        let b = predict_proba(&fit(&warped, &y, hp, 5).unwrap(), &warped).unwrap();
        assert_eq!(a, b, "{}", hp.learner());
    }
}

#[test]
fn schema_mismatch_is_rejected() {
    let (x, y) = logistic_problem(40, 3, 2);
    let m = fit(&x, &y, &small_hps()[0], 0).unwrap();
    let other = DesignMatrix::new(vec!["a".into(), "b".into(), "c".into()], x.cols().to_vec()).unwrap();
    assert!(matches!(predict_proba(&m, &other), Err(prognosis::Error::SchemaMismatch(_))));
}

#[test]
fn duplicated_rows_get_duplicated_predictions() {
    let (x, y) = logistic_problem(50, 3, 4);
    let dup = x.select_rows(&[7, 7, 3, 3]);
    for hp in small_hps() {
        let p = predict_proba(&fit(&x, &y, &hp, 1).unwrap(), &dup).unwrap();
        assert_eq!(p[0].to_bits(), p[1].to_bits());
        assert_eq!(p[2].to_bits(), p[3].to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn predictions_are_open_unit_interval(
        rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 8..30),
        labels in prop::collection::vec(0u8..2, 30),
        key in 0u64..1000,
    ) {
        let n = rows.len();
        let x = DesignMatrix::from_rows(names(3), &rows).unwrap();
        let y = &labels[..n];
        for hp in small_hps() {
            let m = fit(&x, y, &hp, key).unwrap();
            for p in predict_proba(&m, &x).unwrap() {
                prop_assert!(p > 0.0 && p < 1.0 && p.is_finite(), "{} gave {}", m.learner, p);
            }
        }
    }

    #[test]
    fn ensemble_is_order_free_and_bounded(
        members in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 6), 2..5),
        rot in 0usize..4,
    ) {
        let refs: Vec<&[f64]> = members.iter().map(Vec::as_slice).collect();
        let mut rotated = refs.clone();
        let r = rot % rotated.len();
        rotated.rotate_left(r);
        let a = learners::ensemble_average(&refs).unwrap();
        let b = learners::ensemble_average(&rotated).unwrap();
        prop_assert_eq!(&a, &b);
        for (i, v) in a.iter().enumerate() {
            let lo = refs.iter().map(|m| m[i]).fold(f64::INFINITY, f64::min);
            let hi = refs.iter().map(|m| m[i]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(*v >= lo && *v <= hi);
        }
    }
}
