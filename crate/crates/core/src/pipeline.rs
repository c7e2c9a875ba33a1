//! End-to-end training and prediction, plus model persistence.
//!
//! A trained model bundles the feature bank with the ridge classifier. The
//! on-disk format is versioned JSON; reals round-trip bit-exactly through
//! the shortest-representation float printing used by the serializer, so a
//! saved and reloaded model reproduces predictions bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::featurize::{transform, TransformReport};
use crate::model::{fit, FeatureModel, FitConfig};
use crate::ridge::{default_alpha_grid, ridge_fit, ridge_predict, RidgeModel};

const FORMAT_NAME: &str = "interval-conv-classifier";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedModel {
    format: String,
    version: u32,
    /// When set, inputs are reduced to presence/absence (every interval value
    /// becomes 1.0) before featurisation, at train and predict time alike.
    #[serde(default)]
    pub binarize: bool,
    pub feature: FeatureModel,
    pub ridge: RidgeModel,
}

impl TrainedModel {
    pub fn new(feature: FeatureModel, ridge: RidgeModel) -> TrainedModel {
        TrainedModel {
            format: FORMAT_NAME.to_string(),
            version: FORMAT_VERSION,
            binarize: false,
            feature,
            ridge,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trained model serialises")
    }

    pub fn from_json(s: &str) -> Result<TrainedModel> {
        let m: TrainedModel =
            serde_json::from_str(s).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if m.format != FORMAT_NAME {
            return Err(Error::ModelFormat(format!(
                "not a model file (format {:?})",
                m.format
            )));
        }
        if m.version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported model version {} (this build reads {})",
                m.version, FORMAT_VERSION
            )));
        }
        if m.ridge.num_features() != m.feature.num_features() {
            return Err(Error::ModelFormat(format!(
                "classifier expects {} features, feature bank provides {}",
                m.ridge.num_features(),
                m.feature.num_features()
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TrainedModel> {
        TrainedModel::from_json(&fs::read_to_string(path)?)
    }
}

/// Fit the feature bank and the classifier on `train`.
pub fn train(train_ds: &Dataset, config: &FitConfig) -> Result<TrainedModel> {
    let feature = fit(train_ds, config)?;
    let (x, _report) = transform(train_ds, &feature)?;
    let ridge = ridge_fit(&x, &train_ds.labels, &default_alpha_grid())?;
    Ok(TrainedModel::new(feature, ridge))
}

/// Predict one label per sequence, with the transform report for callers
/// that care about range overflow or degenerate windows.
pub fn predict(model: &TrainedModel, ds: &Dataset) -> Result<(Vec<String>, TransformReport)> {
    let binarized;
    let ds = if model.binarize {
        let mut copy = ds.clone();
        copy.binarize_values();
        binarized = copy;
        &binarized
    } else {
        ds
    };
    let (x, report) = transform(ds, &model.feature)?;
    let labels = ridge_predict(&model.ridge, &x)?;
    Ok((labels, report))
}

/// Fraction of positions where the two label lists agree.
pub fn accuracy(predicted: &[String], truth: &[String]) -> f64 {
    assert_eq!(predicted.len(), truth.len(), "label list length mismatch");
    if predicted.is_empty() {
        return 0.0;
    }
    let correct = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    correct as f64 / predicted.len() as f64
}
