use prognosis::ehr::{rf_impute, ColumnData, EhrColumn, EhrTable};
use prognosis::seed;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn numeric(name: &str, v: Vec<Option<f64>>) -> EhrColumn {
    EhrColumn {
        name: name.into(),
        data: ColumnData::Numeric(v),
    }
}

fn values(c: &EhrColumn) -> Vec<Option<f64>> {
    match &c.data {
        ColumnData::Numeric(v) => v.clone(),
        _ => panic!("categorical"),
    }
}

/// Column `c` is a noisy function of `a` and `b`; 20% of `c` is masked.
fn planted(n: usize, key: u64) -> (EhrTable, Vec<f64>, Vec<usize>) {
    let mut rng = seed::stream(key, &[]);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let a: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
    let b: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let c: Vec<f64> = a
        .iter()
        .zip(&b)
        .map(|(a, b)| 3.0 * a + b * b + 0.3 * normal.sample(&mut rng))
        .collect();
    let masked: Vec<usize> = (0..n).filter(|_| rng.random::<f64>() < 0.2).collect();
    let mut cm: Vec<Option<f64>> = c.iter().copied().map(Some).collect();
    masked.iter().for_each(|&r| cm[r] = None);
    let table = EhrTable {
        patient_ids: (0..n).map(|i| format!("p{i}")).collect(),
        columns: vec![
            numeric("a", a.into_iter().map(Some).collect()),
            numeric("b", b.into_iter().map(Some).collect()),
            numeric("c", cm),
        ],
    };
    (table, c, masked)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn forest_imputation_beats_median_fill() {
    let mut wins = 0;
    for key in 0..10 {
        let (table, truth, masked) = planted(200, key);
        let out = rf_impute(&table, 5, key).unwrap();
        let filled = values(&out.columns[2]);
        let observed: Vec<f64> = values(&table.columns[2]).into_iter().flatten().collect();
        let med = median(observed);
        let rmse = |f: &dyn Fn(usize) -> f64| {
            (masked.iter().map(|&r| (f(r) - truth[r]).powi(2)).sum::<f64>() / masked.len() as f64).sqrt()
        };
        let forest = rmse(&|r| filled[r].unwrap());
        let baseline = rmse(&|_| med);
        if forest < baseline {
            wins += 1;
        }
    }
    assert_eq!(wins, 10);
}

#[test]
fn imputation_is_deterministic_and_preserves_observed_cells() {
    let (mut table, _, _) = planted(120, 3);
    // scatter missing cells over the predictors too
    for (j, col) in table.columns.iter_mut().enumerate().take(2) {
        if let ColumnData::Numeric(v) = &mut col.data {
            for r in (j..v.len()).step_by(9) {
                v[r] = None;
            }
        }
    }
    let a = rf_impute(&table, 3, 11).unwrap();
    let b = rf_impute(&table, 3, 11).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.n_missing(), 0);
    for (before, after) in table.columns.iter().zip(&a.columns) {
        for (x, y) in values(before).iter().zip(values(after)) {
            if let Some(x) = x {
                assert_eq!(x.to_bits(), y.unwrap().to_bits());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn output_is_complete_and_observed_cells_survive(
        cells in prop::collection::vec(prop::collection::vec(prop::option::weighted(0.8, -50.0f64..50.0), 3), 6..25),
        key in 0u64..100,
    ) {
        let n = cells.len();
        let mut cols: Vec<Vec<Option<f64>>> = (0..3).map(|j| cells.iter().map(|r| r[j]).collect()).collect();
        for c in &mut cols {
            if c.iter().all(Option::is_none) {
                c[0] = Some(1.0);
            }
        }
        let table = EhrTable {
            patient_ids: (0..n).map(|i| format!("p{i}")).collect(),
            columns: cols.iter().enumerate().map(|(j, c)| numeric(&format!("c{j}"), c.clone())).collect(),
        };
        let out = rf_impute(&table, 2, key).unwrap();
        prop_assert_eq!(out.n_missing(), 0);
        for (before, after) in table.columns.iter().zip(&out.columns) {
            for (x, y) in values(before).iter().zip(values(after)) {
                if let Some(x) = x {
                    prop_assert_eq!(x.to_bits(), y.unwrap().to_bits());
                }
            }
        }
    }
}
