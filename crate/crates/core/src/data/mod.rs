//! Labeled fixed-length pose windows built from trajectory logs.

mod features;
mod io;
mod split;
mod window;

pub use features::{featurize, FeatureMode, FeatureSeq, FEATURE_DIM};
pub use io::{read_windows, write_windows, DatasetMeta, ModeCounts};
pub use split::{split_dataset, DatasetSplit};
pub use window::{make_windows, resample_poses, PoseWindow, WINDOW_DT_TOL};
