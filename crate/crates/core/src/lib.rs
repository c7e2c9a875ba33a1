//! Classification of labelled interval sequences with exact continuous-time
//! random-convolution features.
//!
//! The pipeline: parse interval CSV data ([`data`]), reduce each sequence to
//! a sorted change list ([`change_list`]), fit a bank of dilated convolution
//! kernels with random channel subsets and quantile biases ([`model`]),
//! evaluate every feature exactly by sweeping merged change lists
//! ([`featurize`]), and classify with a leave-one-out-tuned ridge regression
//! ([`ridge`]). A rasterized brute-force path ([`raster`]) exists to verify
//! the exact featurizer, [`synth`] generates reproducible labelled datasets,
//! [`cv`] runs the repeated stratified evaluation protocol, and [`bench`]
//! measures the featurizer's scaling behaviour.

pub mod bench;
pub mod change_list;
pub mod cv;
pub mod data;
pub mod error;
pub mod featurize;
pub mod model;
pub mod pipeline;
pub mod raster;
pub mod ridge;
pub mod synth;

pub use data::{
    load_dataset, load_intervals, parse_dataset, parse_intervals_unlabelled, Dataset, Interval,
    IntervalSequence,
};
pub use error::{Error, Result};
pub use featurize::{feature, transform, window, FeatureMatrix, Trace, TransformReport};
pub use model::{fit, fit_biases, fit_dilations, FeatureModel, FitConfig};
pub use pipeline::{accuracy, predict, train, TrainedModel};
pub use ridge::{ridge_fit, ridge_predict, RidgeModel};
