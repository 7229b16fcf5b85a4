use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum SplitScheme {
    /// Fractions for train and validation; the rest is test.
    RandomPercent { train: f64, val: f64 },
    /// Fold `f` is test, fold `f + 1` validation, the rest train.
    Kfold { k: usize },
}

impl Default for SplitScheme {
    fn default() -> Self {
        SplitScheme::RandomPercent { train: 0.6, val: 0.2 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Items ordered so that every class is spread evenly along the sequence:
/// the `j`-th of `n_c` shuffled members of class `c` sits at `(j + ½) / n_c`.
fn stratified_order(labels: &[usize], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut keyed = Vec::with_capacity(labels.len());
    for c in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(rng);
        let n = members.len() as f64;
        keyed.extend(
            members
                .into_iter()
                .enumerate()
                .map(|(j, i)| ((j as f64 + 0.5) / n, c, i)),
        );
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, _, i)| i).collect()
}

/// Deterministic splits of `labels.len()` items, stratified by label.
/// Unlabelled tasks pass all-zero labels. Returns one split for
/// `random_percent` and `k` for `kfold`.
pub fn make_splits(labels: &[usize], scheme: SplitScheme, seed: u64) -> Result<Vec<Split>, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = stratified_order(labels, &mut rng);
    let n = order.len();
    match scheme {
        SplitScheme::RandomPercent { train, val } => {
            if !(train > 0.0 && val >= 0.0 && train + val <= 1.0) {
                return Err(HarnessError::Split(format!(
                    "invalid fractions train={train} val={val}"
                )));
            }
            let n_train = (n as f64 * train).round() as usize;
            let n_val = ((n as f64 * val).round() as usize).min(n - n_train);
            let sorted = |s: &[usize]| {
                let mut v = s.to_vec();
                v.sort_unstable();
                v
            };
            Ok(vec![Split {
                train: sorted(&order[..n_train]),
                val: sorted(&order[n_train..n_train + n_val]),
                test: sorted(&order[n_train + n_val..]),
            }])
        }
        SplitScheme::Kfold { k } => {
            if k < 3 {
                return Err(HarnessError::Split(format!("kfold needs k >= 3, got {k}")));
            }
            let mut counts = std::collections::BTreeMap::new();
            for &l in labels {
                *counts.entry(l).or_insert(0usize) += 1;
            }
            if let Some((c, m)) = counts.iter().find(|(_, &m)| m < k) {
                return Err(HarnessError::Split(format!(
                    "class {c} has {m} samples, fewer than {k} folds"
                )));
            }
            let mut folds = vec![Vec::new(); k];
            for (pos, &i) in order.iter().enumerate() {
                folds[pos % k].push(i);
            }
            for f in &mut folds {
                f.sort_unstable();
            }
            Ok((0..k)
                .map(|f| {
                    let v = (f + 1) % k;
                    let mut train: Vec<usize> = (0..k)
                        .filter(|&g| g != f && g != v)
                        .flat_map(|g| folds[g].iter().copied())
                        .collect();
                    train.sort_unstable();
                    Split {
                        train,
                        val: folds[v].clone(),
                        test: folds[f].clone(),
                    }
                })
                .collect())
        }
    }
}

/// One split per seed: seed `s` draws its own stratification, and the
/// `i`-th seed uses fold `i mod k` under k-fold. Datasets without labels are
/// split as a single class.
pub fn seed_splits(dataset: &Dataset, scheme: SplitScheme, seeds: &[u64]) -> Result<Vec<Split>, HarnessError> {
    let unlabeled;
    let labels = match dataset.labels() {
        Some(l) => l,
        None => {
            unlabeled = vec![0; dataset.len()];
            &unlabeled
        }
    };
    seeds
        .iter()
        .enumerate()
        .map(|(i, &seed)| {
            let all = make_splits(labels, scheme, seed)?;
            Ok(all[i % all.len()].clone())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixty_twenty_twenty() {
        let labels: Vec<usize> = (0..100).map(|i| i % 3).collect();
        let s = &make_splits(&labels, SplitScheme::default(), 7).unwrap()[0];
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (60, 20, 20));
        assert_eq!(s, &make_splits(&labels, SplitScheme::default(), 7).unwrap()[0]);
        assert_ne!(s, &make_splits(&labels, SplitScheme::default(), 8).unwrap()[0]);
    }

    #[test]
    fn kfold_partitions_every_item_once_as_test() {
        let labels: Vec<usize> = (0..50).map(|i| i % 2).collect();
        let folds = make_splits(&labels, SplitScheme::Kfold { k: 5 }, 1).unwrap();
        let mut tests: Vec<usize> = folds.iter().flat_map(|s| s.test.clone()).collect();
        tests.sort_unstable();
        assert_eq!(tests, (0..50).collect::<Vec<_>>());
        for s in &folds {
            assert_eq!(s.train.len() + s.val.len() + s.test.len(), 50);
        }
    }

    #[test]
    fn rare_class_cannot_fill_folds() {
        let mut labels = vec![0; 20];
        labels[3] = 1;
        assert!(matches!(
            make_splits(&labels, SplitScheme::Kfold { k: 5 }, 0),
            Err(HarnessError::Split(_))
        ));
    }
}
