//! Exact continuous-time evaluation of dilated-convolution features.
//!
//! A feature is the proportion of an observation window on which a dilated,
//! channel-summed convolution of the input exceeds a bias. Between change
//! points the convolution is constant, so the proportion is computed exactly
//! by sweeping the merged change list once and accumulating the lengths of
//! the pieces whose level clears the bias — no sampling grid anywhere.

use log::warn;
use rayon::prelude::*;

use crate::change_list::{build_change_list, dilate_and_merge, scale_change_list, DilatedList};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::FeatureModel;

/// Observation window `(t_s, t_e)` for a convolution with `taps` taps and the
/// given dilation. Without padding every tap stays inside `[0, t_max]`, which
/// costs the first `(taps - 1) * dilation` of the range. With padding the
/// window shifts so the middle tap spans the data, reading zeros outside it.
pub fn window(dilation: f64, taps: usize, padding: bool, t_max: f64) -> (f64, f64) {
    if padding {
        let shift = (taps / 2) as f64 * dilation;
        (shift, t_max + shift)
    } else {
        ((taps - 1) as f64 * dilation, t_max)
    }
}

/// A piecewise-constant view of one swept convolution: `values[i]` holds on a
/// stretch of length `durations[i]`, pieces tile the window in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub values: Vec<f64>,
    pub durations: Vec<f64>,
    pub window: (f64, f64),
}

impl Trace {
    pub fn total_duration(&self) -> f64 {
        self.durations.iter().sum()
    }
}

/// Walk `list` once and hand every constant piece `(level, duration)` inside
/// `window` to `visit`. The level is the raw weighted sum (no bias). All
/// changes at one timestamp are applied together before any further time
/// accrues; changes on channels outside `mask` are ignored entirely and do
/// not split pieces.
fn sweep<F: FnMut(f64, f64)>(
    list: &DilatedList,
    weights: &[f64],
    mask: &[bool],
    window: (f64, f64),
    mut visit: F,
) {
    debug_assert_eq!(weights.len(), list.taps);
    let (t_s, t_e) = window;
    debug_assert!(t_s < t_e);
    let entries = &list.entries;
    let n = entries.len();
    let mut psum = 0.0f64;
    let mut prev = t_s;
    let mut i = 0;
    while i < n {
        let t = entries[i].timestamp;
        if t >= t_e {
            break;
        }
        let mut group_delta = 0.0f64;
        let mut active = false;
        let mut j = i;
        while j < n && entries[j].timestamp == t {
            let e = &entries[j];
            if mask[e.channel] {
                group_delta += weights[e.tap] * e.delta;
                active = true;
            }
            j += 1;
        }
        if active {
            if t > prev {
                visit(psum, t - prev);
                prev = t;
            }
            psum += group_delta;
        }
        i = j;
    }
    if prev < t_e {
        visit(psum, t_e - prev);
    }
}

/// Sweep with the bias folded in: piece values are `level - bias`.
/// An empty window yields an empty trace.
pub fn sweep_trace(
    list: &DilatedList,
    weights: &[f64],
    mask: &[bool],
    bias: f64,
    window: (f64, f64),
) -> Trace {
    let mut values = Vec::new();
    let mut durations = Vec::new();
    if window.0 < window.1 {
        sweep(list, weights, mask, window, |level, dur| {
            values.push(level - bias);
            durations.push(dur);
        });
    }
    Trace { values, durations, window }
}

/// Proportion of the window on which the swept level strictly exceeds `bias`.
/// Defined as 0 for an empty window (with a warning).
pub fn feature(
    list: &DilatedList,
    weights: &[f64],
    mask: &[bool],
    bias: f64,
    window: (f64, f64),
) -> f64 {
    if window.0 >= window.1 {
        warn!(
            "empty observation window ({}, {}): feature defined as 0",
            window.0, window.1
        );
        return 0.0;
    }
    let mut out = [0.0f64];
    feature_multi(list, weights, mask, &[bias], window, &mut out);
    out[0]
}

/// One sweep, many biases: `out[j]` gets the proportion for `biases[j]`.
/// Caller guarantees a non-empty window.
pub(crate) fn feature_multi(
    list: &DilatedList,
    weights: &[f64],
    mask: &[bool],
    biases: &[f64],
    window: (f64, f64),
    out: &mut [f64],
) {
    debug_assert_eq!(biases.len(), out.len());
    out.fill(0.0);
    sweep(list, weights, mask, window, |level, dur| {
        for (o, &b) in out.iter_mut().zip(biases) {
            // Strict threshold: a level exactly at the bias does not count.
            if level > b {
                *o += dur;
            }
        }
    });
    let span = window.1 - window.0;
    for o in out.iter_mut() {
        *o = (*o / span).clamp(0.0, 1.0);
    }
}

/// Dense row-major feature matrix: one row per sequence, one column per
/// (kernel, dilation, bias) feature in model order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> FeatureMatrix {
        let n = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged feature rows");
            data.extend(r);
        }
        FeatureMatrix { rows: n, cols, data }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Exact bitwise equality of shape and every entry.
    pub fn bit_eq(&self, other: &FeatureMatrix) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    /// CSV export: header `f0..f{cols-1}`, full-precision values.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record((0..self.cols).map(|j| format!("f{j}")))?;
        for i in 0..self.rows {
            wtr.write_record(self.row(i).iter().map(|x| crate::data::format_f64(*x)))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Side channel for [`transform`]: facts worth reporting but not fatal.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransformReport {
    /// Sequences whose largest timestamp exceeds the model's fitted range.
    pub overflow_ids: Vec<String>,
    /// (combo, bias) features that fell on an empty window and were set to 0.
    pub empty_window_features: usize,
}

/// Compute the full feature matrix for `ds` under `model`. Rows follow
/// dataset order; columns follow the model's combo order. Sequences may run
/// past the fitted time range (their features still integrate over the fitted
/// window); such ids are listed in the report.
pub fn transform(ds: &Dataset, model: &FeatureModel) -> Result<(FeatureMatrix, TransformReport)> {
    if ds.num_channels > model.num_channels {
        return Err(Error::Shape(format!(
            "dataset has {} channels, model was fitted with {}",
            ds.num_channels, model.num_channels
        )));
    }
    let plan = model.plan();
    let t_max_internal = model.internal_t_max();
    let inv_scale = 1.0 / model.time_scale();

    let rows: Vec<(Vec<f64>, bool)> = ds
        .sequences
        .par_iter()
        .map(|seq| {
            let mut row = vec![0.0f64; model.num_features()];
            let l0_raw = build_change_list(seq);
            let l0 = scale_change_list(&l0_raw, inv_scale);
            for (dil_idx, combo_ids) in plan.by_dilation.iter().enumerate() {
                if combo_ids.iter().all(|&ci| model.combos[ci].biases.is_empty()) {
                    continue;
                }
                let merged =
                    dilate_and_merge(&l0, model.dilations_internal[dil_idx], model.taps);
                for &ci in combo_ids {
                    let combo = &model.combos[ci];
                    if combo.biases.is_empty() {
                        continue;
                    }
                    let win = window(
                        model.dilations_internal[dil_idx],
                        model.taps,
                        combo.padding,
                        t_max_internal,
                    );
                    let off = plan.col_offsets[ci];
                    let out = &mut row[off..off + combo.biases.len()];
                    if win.0 >= win.1 {
                        out.fill(0.0);
                        continue;
                    }
                    feature_multi(
                        &merged,
                        model.kernels()[combo.kernel].weights(),
                        &plan.masks[ci],
                        &combo.biases,
                        win,
                        out,
                    );
                }
            }
            let overflow = seq.max_end() > model.t_max;
            (row, overflow)
        })
        .collect();

    let mut report = TransformReport {
        empty_window_features: plan.empty_window_features,
        ..TransformReport::default()
    };
    let mut out_rows = Vec::with_capacity(rows.len());
    for ((row, overflow), seq) in rows.into_iter().zip(&ds.sequences) {
        if overflow {
            report.overflow_ids.push(seq.id.clone());
        }
        out_rows.push(row);
    }
    if !report.overflow_ids.is_empty() {
        warn!(
            "{} sequence(s) run past the fitted time range (first: {})",
            report.overflow_ids.len(),
            report.overflow_ids[0]
        );
    }
    let mut fm = FeatureMatrix::from_rows(out_rows);
    if fm.rows > 0 && fm.cols == 0 {
        fm.cols = model.num_features();
    }
    Ok((fm, report))
}
