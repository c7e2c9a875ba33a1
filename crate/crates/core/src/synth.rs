//! Reproducible synthetic interval datasets.
//!
//! Class identity is encoded by one of three signals: characteristic event
//! duration, a characteristic lag between the first two channels, or a
//! characteristic intensity level. Signal strength 0 removes all class
//! information (a built-in null model).
//!
//! Timestamps sit on a fixed grid — integers in integer mode, multiples of
//! 1/256 otherwise — so interval arithmetic downstream stays exact, and every
//! sequence ends with a one-grid-unit marker event closing exactly at
//! `max_duration`. The marker pins the global time range (every subset of a
//! synthetic dataset spans the same range) and, in float mode, guarantees at
//! least one non-integer timestamp so the pipeline never silently flips into
//! integer mode.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::data::{Dataset, Interval, IntervalSequence};
use crate::error::{Error, Result};

/// Which property of the data carries the class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalKind {
    /// Event durations grow with the class index.
    Duration,
    /// Channel 1 echoes channel 0 after a class-specific lag.
    Lag,
    /// Event values grow with the class index.
    Intensity,
}

impl std::str::FromStr for SignalKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "duration" => Ok(SignalKind::Duration),
            "lag" => Ok(SignalKind::Lag),
            "intensity" => Ok(SignalKind::Intensity),
            other => Err(Error::InvalidInput(format!(
                "unknown signal kind {other:?} (expected duration, lag or intensity)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub classes: usize,
    pub samples_per_class: usize,
    pub channels: usize,
    pub max_duration: f64,
    pub events_per_sequence: usize,
    pub signal: SignalKind,
    /// 0 = no class information; 1 = the strongest class (last index) roughly
    /// doubles the base duration/lag/intensity.
    pub signal_strength: f64,
    pub integer: bool,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            classes: 2,
            samples_per_class: 30,
            channels: 3,
            max_duration: 16.0,
            events_per_sequence: 20,
            signal: SignalKind::Duration,
            signal_strength: 1.0,
            integer: false,
            seed: 0,
        }
    }
}

/// Grid resolution for float-mode timestamps: 1/256 time units.
const FLOAT_GRID: f64 = 256.0;

fn validate(spec: &SynthSpec) -> Result<f64> {
    if spec.classes == 0
        || spec.samples_per_class == 0
        || spec.channels == 0
        || spec.events_per_sequence == 0
    {
        return Err(Error::InvalidInput("all synth sizes must be positive".into()));
    }
    if !spec.max_duration.is_finite() || spec.max_duration <= 0.0 {
        return Err(Error::InvalidInput("max duration must be positive".into()));
    }
    if !spec.signal_strength.is_finite() || spec.signal_strength < 0.0 {
        return Err(Error::InvalidInput("signal strength must be non-negative".into()));
    }
    if spec.signal == SignalKind::Lag && spec.channels < 2 {
        return Err(Error::InvalidInput("the lag signal needs at least two channels".into()));
    }
    let unit = if spec.integer { 1.0 } else { 1.0 / FLOAT_GRID };
    let span = spec.max_duration / unit;
    if span.fract() != 0.0 {
        return Err(Error::InvalidInput(format!(
            "max duration {} does not sit on the {} timestamp grid",
            spec.max_duration,
            if spec.integer { "integer" } else { "1/256" }
        )));
    }
    if span < 64.0 {
        return Err(Error::InvalidInput(format!(
            "max duration {} gives only {span} grid units; need at least 64",
            spec.max_duration
        )));
    }
    Ok(unit)
}

/// Class factor: 1 for class 0, up to 1 + strength for the last class.
fn class_factor(spec: &SynthSpec, class: usize) -> f64 {
    let denom = (spec.classes - 1).max(1) as f64;
    1.0 + spec.signal_strength * class as f64 / denom
}

/// Place `count` intervals of grid length in `[len_lo, len_hi]` sequentially
/// on one channel, with random gaps sized so events spread over the usable
/// span. Events that run past the span are dropped.
fn place_events(
    rng: &mut ChaCha8Rng,
    usable: u64,
    count: usize,
    len_lo: u64,
    len_hi: u64,
) -> Vec<(u64, u64)> {
    let mut out = Vec::with_capacity(count);
    let mean_len = (len_lo + len_hi).div_ceil(2).max(1);
    let free = usable.saturating_sub(count as u64 * mean_len);
    let gap_hi = (2 * free / (count as u64 + 1)).max(1);
    let mut cursor = 0u64;
    for _ in 0..count {
        let gap = rng.random_range(1..=gap_hi);
        let len = rng.random_range(len_lo..=len_hi);
        let start = cursor + gap;
        let end = start + len;
        if end > usable {
            break;
        }
        out.push((start, end));
        cursor = end;
    }
    out
}

/// Generate a labelled dataset per `spec`. Deterministic: each sequence owns
/// one random stream keyed by its global index.
pub fn synth(spec: &SynthSpec) -> Result<Dataset> {
    let unit = validate(spec)?;
    let span_units = (spec.max_duration / unit).round() as u64;
    let usable = span_units - 1; // final grid unit is reserved for the marker
    let marker_channel = spec.channels - 1;

    // Base event length in grid units, sized so even the strongest class
    // fills at most about half of a channel.
    let per_channel = spec.events_per_sequence.div_ceil(spec.channels).max(1);
    let worst_factor = 1.0 + spec.signal_strength;
    let len_base = ((usable as f64 * 0.5 / (1.5 * per_channel as f64 * worst_factor)) as u64)
        .clamp(1, usable / 4);

    let mut sequences = Vec::with_capacity(spec.classes * spec.samples_per_class);
    let mut labels = Vec::with_capacity(sequences.capacity());
    for class in 0..spec.classes {
        let factor = class_factor(spec, class);
        for sample in 0..spec.samples_per_class {
            let global = class * spec.samples_per_class + sample;
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(global as u64);

            let mut channels: BTreeMap<usize, Vec<Interval>> = BTreeMap::new();
            match spec.signal {
                SignalKind::Duration => {
                    let lo = ((len_base as f64 * factor).round() as u64).max(1);
                    let hi = 2 * lo;
                    for c in 0..spec.channels {
                        let count = events_for_channel(spec.events_per_sequence, spec.channels, c);
                        for (s, e) in place_events(&mut rng, usable, count, lo, hi) {
                            push_interval(&mut channels, c, s, e, unit, 1.0);
                        }
                    }
                }
                SignalKind::Lag => {
                    let lag = ((len_base as f64 * factor).round() as u64).max(1);
                    let pairs = (spec.events_per_sequence / 2).max(1);
                    for (s, e) in place_events(&mut rng, usable, pairs, len_base, 2 * len_base)
                    {
                        push_interval(&mut channels, 0, s, e, unit, 1.0);
                        if e + lag <= usable {
                            push_interval(&mut channels, 1, s + lag, e + lag, unit, 1.0);
                        }
                    }
                    // Any leftover event budget becomes class-neutral noise
                    // on the channels not involved in the pairing.
                    if spec.channels > 2 {
                        let noise = spec.events_per_sequence.saturating_sub(2 * pairs);
                        for c in 2..spec.channels {
                            let count = events_for_channel(noise, spec.channels - 2, c - 2);
                            for (s, e) in
                                place_events(&mut rng, usable, count, len_base, 2 * len_base)
                            {
                                push_interval(&mut channels, c, s, e, unit, 1.0);
                            }
                        }
                    }
                }
                SignalKind::Intensity => {
                    for c in 0..spec.channels {
                        let count = events_for_channel(spec.events_per_sequence, spec.channels, c);
                        for (s, e) in
                            place_events(&mut rng, usable, count, len_base, 2 * len_base)
                        {
                            let jitter = rng.random_range(-8i64..=8) as f64 / 64.0;
                            push_interval(&mut channels, c, s, e, unit, factor + jitter);
                        }
                    }
                }
            }
            // Marker: one grid unit ending exactly at max_duration.
            push_interval(&mut channels, marker_channel, usable, span_units, unit, 1.0);

            sequences.push(IntervalSequence { id: format!("s{global:05}"), channels });
            labels.push(format!("c{class}"));
        }
    }
    Ok(Dataset { sequences, labels, num_channels: spec.channels })
}

/// Round-robin split of the per-sequence event budget over channels.
fn events_for_channel(total: usize, channels: usize, channel: usize) -> usize {
    total / channels + usize::from(channel < total % channels)
}

fn push_interval(
    channels: &mut BTreeMap<usize, Vec<Interval>>,
    channel: usize,
    start_units: u64,
    end_units: u64,
    unit: f64,
    value: f64,
) {
    channels.entry(channel).or_default().push(Interval {
        start: start_units as f64 * unit,
        end: end_units as f64 * unit,
        value,
    });
}
