//! Wall-clock scaling checks for the featurizer.
//!
//! The claim under test: transform cost tracks the number of interval events
//! and the number of features, and does not depend on the magnitude of the
//! timestamps (there is no sampling grid to grow). The report carries three
//! ratios against a base dataset — timestamps scaled 1000x, events doubled,
//! feature count halved — each measured as best-of-`runs` wall time.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::Result;
use crate::featurize::transform;
use crate::model::{fit, FeatureModel, FitConfig};
use crate::synth::{synth, SignalKind, SynthSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub sequences: usize,
    pub channels: usize,
    pub events: usize,
    pub num_features: usize,
    pub num_dilations: usize,
    /// Timing runs per measurement; the fastest is kept.
    pub runs: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sequences: 40,
            channels: 4,
            events: 60,
            num_features: 2688,
            num_dilations: 16,
            runs: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    /// Transform seconds: base data, 1000x timestamps, 2x events, m/2.
    pub base_seconds: f64,
    pub magnitude_seconds: f64,
    pub events2_seconds: f64,
    pub half_features_seconds: f64,
    pub fit_seconds: f64,
    pub magnitude_ratio: f64,
    pub events_ratio: f64,
    pub features_ratio: f64,
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "bench: {} sequences, {} channels, {} events, {} features, {} dilations",
            self.config.sequences,
            self.config.channels,
            self.config.events,
            self.config.num_features,
            self.config.num_dilations
        )?;
        writeln!(f, "fit                 {:>9.3}s", self.fit_seconds)?;
        writeln!(f, "transform base      {:>9.3}s", self.base_seconds)?;
        writeln!(
            f,
            "transform 1000x t   {:>9.3}s  (ratio {:.3})",
            self.magnitude_seconds, self.magnitude_ratio
        )?;
        writeln!(
            f,
            "transform 2x events {:>9.3}s  (ratio {:.3})",
            self.events2_seconds, self.events_ratio
        )?;
        write!(
            f,
            "transform m/2       {:>9.3}s  (ratio {:.3})",
            self.half_features_seconds, self.features_ratio
        )
    }
}

fn time_transform(ds: &Dataset, model: &FeatureModel, runs: usize) -> Result<f64> {
    let mut best = f64::INFINITY;
    for _ in 0..runs.max(1) {
        let t = Instant::now();
        let _ = transform(ds, model)?;
        best = best.min(t.elapsed().as_secs_f64());
    }
    Ok(best)
}

fn bench_synth(cfg: &BenchConfig, events: usize) -> SynthSpec {
    SynthSpec {
        classes: 2,
        samples_per_class: cfg.sequences.div_ceil(2),
        channels: cfg.channels,
        // Fixed span: doubling the event count shrinks event lengths instead
        // of overflowing the span, so no events are dropped and the change
        // count genuinely doubles.
        max_duration: 16.0,
        events_per_sequence: events,
        signal: SignalKind::Duration,
        signal_strength: 1.0,
        integer: false,
        seed: cfg.seed,
    }
}

/// Run the three scaling measurements. Models are fitted per dataset with
/// the same configuration; ratios compare transform wall times only.
pub fn bench(cfg: &BenchConfig) -> Result<BenchReport> {
    let fit_cfg = FitConfig {
        num_features: cfg.num_features,
        num_dilations: cfg.num_dilations,
        seed: cfg.seed,
    };
    let base_ds = synth(&bench_synth(cfg, cfg.events))?;

    let t_fit = Instant::now();
    let base_model = fit(&base_ds, &fit_cfg)?;
    let fit_seconds = t_fit.elapsed().as_secs_f64();

    let base_seconds = time_transform(&base_ds, &base_model, cfg.runs)?;

    // (a) 1000x timestamp magnitude: same shapes, larger numbers.
    let scaled_ds = base_ds.scale_time(1000.0);
    let scaled_model = fit(&scaled_ds, &fit_cfg)?;
    let magnitude_seconds = time_transform(&scaled_ds, &scaled_model, cfg.runs)?;

    // (b) twice the events per sequence.
    let dense_ds = synth(&bench_synth(cfg, cfg.events * 2))?;
    let dense_model = fit(&dense_ds, &fit_cfg)?;
    let events2_seconds = time_transform(&dense_ds, &dense_model, cfg.runs)?;

    // (c) half the features on the base data.
    let half_cfg = FitConfig { num_features: cfg.num_features / 2, ..fit_cfg.clone() };
    let half_model = fit(&base_ds, &half_cfg)?;
    let half_features_seconds = time_transform(&base_ds, &half_model, cfg.runs)?;

    Ok(BenchReport {
        config: cfg.clone(),
        base_seconds,
        magnitude_seconds,
        events2_seconds,
        half_features_seconds,
        fit_seconds,
        magnitude_ratio: magnitude_seconds / base_seconds,
        events_ratio: events2_seconds / base_seconds,
        features_ratio: half_features_seconds / base_seconds,
    })
}
