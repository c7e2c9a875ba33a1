//! Repeated stratified k-fold cross-validation.
//!
//! Each repeat reshuffles, partitions the samples into stratified folds and
//! trains one model per fold on the remaining samples only — the time range,
//! dilation grid and biases of a fold's model come exclusively from its
//! training split, and each fold result records the model's fitted range so
//! tests can assert that no information leaked from the held-out fold.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use log::warn;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::featurize::transform;
use crate::model::{fit, FitConfig};
use crate::pipeline::accuracy;
use crate::ridge::{default_alpha_grid, ridge_fit, ridge_predict};

/// Outcome of one (repeat, fold) train/test pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub repeat: usize,
    pub fold: usize,
    pub accuracy: f64,
    pub test_size: usize,
    /// Time range the fold's model was fitted with; equals the maximum end
    /// timestamp of the training split (never of the full dataset).
    pub train_t_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: usize,
    pub repeats: usize,
    pub config: FitConfig,
    pub classes: Vec<String>,
    pub fold_results: Vec<FoldResult>,
    pub mean_accuracy: f64,
    pub accuracy_std: f64,
    /// Summed wall time across folds, by stage.
    pub fit_seconds: f64,
    pub transform_seconds: f64,
    pub classify_seconds: f64,
}

impl fmt::Display for CvReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "cross-validation: {} folds x {} repeats, seed {}, {} features, {} dilations",
            self.folds, self.repeats, self.config.seed, self.config.num_features,
            self.config.num_dilations
        )?;
        writeln!(f, "classes: {}", self.classes.join(", "))?;
        writeln!(f, "{:>7}  {:>9}", "repeat", "mean acc")?;
        for r in 0..self.repeats {
            let accs: Vec<f64> = self
                .fold_results
                .iter()
                .filter(|fr| fr.repeat == r)
                .map(|fr| fr.accuracy)
                .collect();
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            writeln!(f, "{r:>7}  {mean:>9.4}")?;
        }
        writeln!(
            f,
            "overall mean accuracy {:.4} (std {:.4}) over {} folds",
            self.mean_accuracy,
            self.accuracy_std,
            self.fold_results.len()
        )?;
        write!(
            f,
            "wall time: fit {:.2}s, transform {:.2}s, classify {:.2}s",
            self.fit_seconds, self.transform_seconds, self.classify_seconds
        )
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic per-fold model seed.
pub(crate) fn derive_seed(seed: u64, repeat: usize, fold: usize) -> u64 {
    splitmix64(splitmix64(seed ^ ((repeat as u64) << 20)) ^ fold as u64)
}

/// Partition sample indices into `folds` test sets, stratified by label when
/// every class has at least `folds` members (otherwise plain shuffled folds,
/// with a warning). Every index lands in exactly one fold.
pub fn stratified_folds(
    labels: &[String],
    folds: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<usize>> {
    let mut by_class: BTreeMap<&String, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut out = vec![Vec::new(); folds];
    if by_class.values().any(|v| v.len() < folds) {
        warn!(
            "a class has fewer than {folds} members: folds are shuffled without stratification"
        );
        let mut idx: Vec<usize> = (0..labels.len()).collect();
        idx.shuffle(rng);
        for (pos, i) in idx.into_iter().enumerate() {
            out[pos % folds].push(i);
        }
    } else {
        // Deal each class round-robin, carrying the dealing position across
        // classes so remainders spread over different folds.
        let mut next = 0usize;
        for idx in by_class.values() {
            let mut idx = idx.clone();
            idx.shuffle(rng);
            for i in idx {
                out[next % folds].push(i);
                next += 1;
            }
        }
    }
    for fold in &mut out {
        fold.sort_unstable();
    }
    out
}

/// Relabel a copy of `ds` with a random permutation of its own labels — the
/// chance-level control for classification results.
pub fn permute_labels(ds: &Dataset, seed: u64) -> Dataset {
    let mut out = ds.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    out.labels.shuffle(&mut rng);
    out
}

/// Run repeated stratified cross-validation. Fold models are fitted with
/// seeds derived from `(config.seed, repeat, fold)`; the shuffle uses its own
/// stream per repeat. Deterministic up to wall-clock fields.
pub fn crossvalidate(
    ds: &Dataset,
    config: &FitConfig,
    folds: usize,
    repeats: usize,
) -> Result<CvReport> {
    if folds < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 folds, got {folds}")));
    }
    if repeats == 0 {
        return Err(Error::InvalidInput("need at least 1 repeat".into()));
    }
    if ds.len() < folds {
        return Err(Error::Fit(format!(
            "{} samples cannot fill {folds} folds",
            ds.len()
        )));
    }
    let classes = ds.classes();
    if classes.len() < 2 {
        return Err(Error::Fit(
            "training data has a single class; classification is undefined".into(),
        ));
    }

    let mut tasks = Vec::with_capacity(folds * repeats);
    for repeat in 0..repeats {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream((1 << 32) + repeat as u64);
        let fold_sets = stratified_folds(&ds.labels, folds, &mut rng);
        for (fold, test_idx) in fold_sets.into_iter().enumerate() {
            let train_idx: Vec<usize> =
                (0..ds.len()).filter(|i| !test_idx.contains(i)).collect();
            tasks.push((repeat, fold, train_idx, test_idx));
        }
    }

    let results: Result<Vec<(FoldResult, f64, f64, f64)>> = tasks
        .into_par_iter()
        .map(|(repeat, fold, train_idx, test_idx)| {
            let train_ds = ds.subset(&train_idx);
            let test_ds = ds.subset(&test_idx);
            let fold_cfg = FitConfig {
                seed: derive_seed(config.seed, repeat, fold),
                ..config.clone()
            };
            let t0 = Instant::now();
            let feature = fit(&train_ds, &fold_cfg)?;
            let fit_s = t0.elapsed().as_secs_f64();

            let t1 = Instant::now();
            let (x_train, _) = transform(&train_ds, &feature)?;
            let (x_test, _) = transform(&test_ds, &feature)?;
            let transform_s = t1.elapsed().as_secs_f64();

            let t2 = Instant::now();
            let ridge = ridge_fit(&x_train, &train_ds.labels, &default_alpha_grid())?;
            let pred = ridge_predict(&ridge, &x_test)?;
            let classify_s = t2.elapsed().as_secs_f64();

            let fr = FoldResult {
                repeat,
                fold,
                accuracy: accuracy(&pred, &test_ds.labels),
                test_size: test_idx.len(),
                train_t_max: feature.t_max,
            };
            Ok((fr, fit_s, transform_s, classify_s))
        })
        .collect();
    let results = results?;

    let fold_results: Vec<FoldResult> = results.iter().map(|(fr, ..)| fr.clone()).collect();
    let n = fold_results.len() as f64;
    let mean_accuracy = fold_results.iter().map(|fr| fr.accuracy).sum::<f64>() / n;
    let accuracy_std = (fold_results
        .iter()
        .map(|fr| (fr.accuracy - mean_accuracy).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(CvReport {
        folds,
        repeats,
        config: config.clone(),
        classes,
        fold_results,
        mean_accuracy,
        accuracy_std,
        fit_seconds: results.iter().map(|r| r.1).sum(),
        transform_seconds: results.iter().map(|r| r.2).sum(),
        classify_seconds: results.iter().map(|r| r.3).sum(),
    })
}
