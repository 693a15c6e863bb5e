use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::io::ModeCounts;
use super::window::PoseWindow;
use crate::error::{Error, Result};
use crate::sim::FailureMode;

/// Train/validation partition made at source-log granularity.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<PoseWindow>,
    pub val: Vec<PoseWindow>,
    pub seed: u64,
    pub ratio: f64,
    pub train_counts: ModeCounts,
    pub val_counts: ModeCounts,
    /// Modes missing from one side, and similar problems.
    pub warnings: Vec<String>,
}

/// Splits whole source logs between train and validation, separately for
/// each mode. A mode with `n` logs sends `round(ratio * n)` of them to
/// training, clamped to `[1, n - 1]` when `n >= 2`. Log order within a mode
/// is shuffled with `seed`.
pub fn split_dataset(windows: Vec<PoseWindow>, ratio: f64, seed: u64) -> Result<DatasetSplit> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!("split ratio {ratio} must lie in (0, 1)")));
    }
    // (mode, source) groups in order of first appearance
    let mut groups: Vec<((FailureMode, String), Vec<PoseWindow>)> = Vec::new();
    for w in windows {
        let key = (w.mode, w.source.clone());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, g)) => g.push(w),
            None => groups.push((key, vec![w])),
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_groups = vec![false; groups.len()];
    for mode in FailureMode::ALL {
        let mut idx: Vec<usize> = (0..groups.len()).filter(|&i| groups[i].0 .0 == mode).collect();
        let n = idx.len();
        if n == 0 {
            continue;
        }
        idx.shuffle(&mut rng);
        let mut n_train = (ratio * n as f64).round() as usize;
        if n >= 2 {
            n_train = n_train.clamp(1, n - 1);
        }
        for &i in &idx[..n_train.min(n)] {
            train_groups[i] = true;
        }
    }

    let mut split = DatasetSplit {
        train: Vec::new(),
        val: Vec::new(),
        seed,
        ratio,
        train_counts: ModeCounts::default(),
        val_counts: ModeCounts::default(),
        warnings: Vec::new(),
    };
    for ((_, g), is_train) in groups.into_iter().zip(train_groups) {
        for w in g {
            if is_train {
                split.train_counts.add(w.mode);
                split.train.push(w);
            } else {
                split.val_counts.add(w.mode);
                split.val.push(w);
            }
        }
    }
    for mode in FailureMode::ALL {
        for (side, counts) in [("train", &split.train_counts), ("val", &split.val_counts)] {
            if counts.get(mode) == 0 {
                split.warnings.push(format!("mode {mode} has no windows in {side}"));
            }
        }
    }
    for w in &split.warnings {
        log::warn!("{w}");
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Pose;

    fn windows_of(source: &str, mode: FailureMode, n: usize) -> Vec<PoseWindow> {
        (0..n)
            .map(|k| {
                let poses = (0..3).map(|i| Pose::new((k + i) as f64 * 0.5, i as f64, 0.0, 0.0)).collect();
                PoseWindow::new(poses, mode, source).unwrap()
            })
            .collect()
    }

    #[test]
    fn single_log_goes_to_training() {
        let s = split_dataset(windows_of("a", FailureMode::Nominal, 4), 1.0 - 1e-9, 1).unwrap();
        assert_eq!(s.train.len(), 4);
        assert!(s.val.is_empty());
        assert!(!s.warnings.is_empty());
    }

    #[test]
    fn ten_logs_split_eight_two() {
        let w: Vec<_> = (0..10)
            .flat_map(|i| windows_of(&format!("log{i}"), FailureMode::Speeding, i + 1))
            .collect();
        let s = split_dataset(w, 0.8, 3).unwrap();
        let mut train_sources: Vec<_> = s.train.iter().map(|w| w.source.clone()).collect();
        train_sources.dedup();
        assert_eq!(train_sources.len(), 8);
        assert!(s.val.iter().all(|v| !train_sources.contains(&v.source)));
        assert_eq!(s.train.len() + s.val.len(), 55);
    }

    #[test]
    fn same_seed_same_split() {
        let w: Vec<_> = (0..6).flat_map(|i| windows_of(&format!("l{i}"), FailureMode::Nominal, 2)).collect();
        let a = split_dataset(w.clone(), 0.5, 9).unwrap();
        let b = split_dataset(w, 0.5, 9).unwrap();
        assert_eq!(a, b);
    }
}
