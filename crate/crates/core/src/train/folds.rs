use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Sample indices of one cross-validation fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Group ids held out in this fold.
    pub test_groups: Vec<u32>,
}

/// Leave-groups-out K-fold split. `groups[i]` is the signer (or any other
/// grouping id) of sample `i`. Distinct groups are shuffled with `seed` and
/// dealt round-robin into `k` folds, so fold sizes in groups differ by at most one.
pub fn kfold_split(groups: &[u32], k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::Validation(format!("need at least 2 folds, got {k}")));
    }
    let mut ids: Vec<u32> = groups.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < k {
        return Err(Error::Validation(format!(
            "{} groups cannot fill {k} folds",
            ids.len()
        )));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assigned: Vec<Vec<u32>> = vec![Vec::new(); k];
    for (i, id) in ids.into_iter().enumerate() {
        assigned[i % k].push(id);
    }
    Ok(assigned
        .into_iter()
        .map(|mut held| {
            held.sort_unstable();
            let (test, train) =
                (0..groups.len()).partition(|&i| held.binary_search(&groups[i]).is_ok());
            Fold {
                train,
                test,
                test_groups: held,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_signer_per_fold() {
        let groups = [0, 0, 1, 1, 2, 2, 3, 3];
        let folds = kfold_split(&groups, 4, 1).unwrap();
        for f in &folds {
            assert_eq!(f.test.len(), 2);
            assert_eq!(f.test_groups.len(), 1);
            assert_eq!(groups[f.test[0]], groups[f.test[1]]);
        }
    }

    #[test]
    fn too_few_groups() {
        assert!(kfold_split(&[1, 1, 2], 3, 0).is_err());
        assert!(kfold_split(&[1, 2], 1, 0).is_err());
    }
}
