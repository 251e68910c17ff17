use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{self, tag};

/// Fold index of every row, per repeat.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub repeats: Vec<Vec<usize>>,
}

impl FoldAssignment {
    /// (training rows, held-out rows) for one repeat and fold, ascending.
    pub fn split(&self, repeat: usize, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let (test, train): (Vec<usize>, Vec<usize>) =
            (0..self.repeats[repeat].len()).partition(|&i| self.repeats[repeat][i] == fold);
        (train, test)
    }
}

/// Repeated k-fold partitions; stratified deals each class round-robin
/// after a seeded shuffle, continuing the deal across classes.
pub fn make_folds(labels: &[u8], k: usize, repeats: usize, stratified: bool, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 folds, got {k}")));
    }
    if repeats == 0 {
        return Err(Error::InvalidInput("need at least 1 repeat".into()));
    }
    if k > labels.len() {
        return Err(Error::InvalidInput(format!("{k} folds for {} rows", labels.len())));
    }
    let groups: Vec<Vec<usize>> = if stratified {
        let g: Vec<Vec<usize>> = (0..=1u8)
            .map(|c| (0..labels.len()).filter(|&i| labels[i] == c).collect())
            .collect();
        let minority = g.iter().map(Vec::len).min().unwrap_or(0);
        if minority < k {
            return Err(Error::InvalidInput(format!(
                "{k} stratified folds exceed the minority class size {minority}"
            )));
        }
        g
    } else {
        vec![(0..labels.len()).collect()]
    };
    let repeats = (0..repeats)
        .map(|r| {
            let mut rng = seed::stream(seed, &[tag::FOLDS, r as u64]);
            let mut assign = vec![0; labels.len()];
            let mut next = 0;
            for group in &groups {
                let mut g = group.clone();
                g.shuffle(&mut rng);
                for i in g {
                    assign[i] = next % k;
                    next += 1;
                }
            }
            assign
        })
        .collect();
    Ok(FoldAssignment { k, repeats })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_and_stratification() {
        let labels: Vec<u8> = (0..100).map(|i| u8::from(i < 40)).collect();
        let f = make_folds(&labels, 5, 3, true, 7).unwrap();
        for r in 0..3 {
            for fold in 0..5 {
                let (train, test) = f.split(r, fold);
                assert_eq!(test.len(), 20);
                assert_eq!(train.len() + test.len(), 100);
                let pos = test.iter().filter(|&&i| labels[i] == 1).count();
                assert!((7..=9).contains(&pos));
            }
        }
        assert_eq!(f, make_folds(&labels, 5, 3, true, 7).unwrap());
        assert_ne!(f, make_folds(&labels, 5, 3, true, 8).unwrap());
    }

    #[test]
    fn too_many_folds_for_minority() {
        let labels = [1, 1, 0, 0, 0, 0];
        assert!(make_folds(&labels, 3, 1, true, 0).is_err());
        assert!(make_folds(&labels, 3, 1, false, 0).is_ok());
    }
}
