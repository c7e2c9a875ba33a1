//! Fitting the random-convolution feature model.
//!
//! A fitted model is a bank of (kernel, dilation) combos, each carrying a
//! random channel subset, an alternating padding flag and a handful of biases
//! drawn from quantiles of real swept traces. Kernels are the 84 nine-tap
//! weight vectors with exactly three -2 entries (the rest +1); dilations are
//! a geometric grid between the smallest observed change gap and an eighth of
//! the time range.
//!
//! Internal time units: integer-mode models (all training timestamps whole
//! numbers) keep raw units so that every change timestamp stays an exact
//! integer; everything else is normalised by `t_max`, making the fitted
//! quantities depend only on time *ratios*. Accessors report raw units.

use std::collections::HashMap;
use std::sync::OnceLock;

use log::warn;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::change_list::{build_change_list, dilate_and_merge, scale_change_list, ChangePoint};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::featurize::{sweep_trace, window};

/// Taps per kernel. The kernel family below is specific to this length.
pub const KERNEL_TAPS: usize = 9;

/// Number of distinct kernels: C(9, 3) placements of the three -2 weights.
pub const NUM_KERNELS: usize = 84;

/// A nine-tap convolution kernel with weights in {-2, +1} summing to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    weights: [f64; KERNEL_TAPS],
}

impl Kernel {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// All 84 kernels, ordered lexicographically by the positions of the -2
/// weights: (0,1,2), (0,1,3), ... (6,7,8).
pub fn enumerate_kernels() -> Vec<Kernel> {
    let mut out = Vec::with_capacity(NUM_KERNELS);
    for i in 0..KERNEL_TAPS {
        for j in i + 1..KERNEL_TAPS {
            for k in j + 1..KERNEL_TAPS {
                let mut weights = [1.0; KERNEL_TAPS];
                weights[i] = -2.0;
                weights[j] = -2.0;
                weights[k] = -2.0;
                out.push(Kernel { weights });
            }
        }
    }
    debug_assert_eq!(out.len(), NUM_KERNELS);
    out
}

fn kernel_table() -> &'static Vec<Kernel> {
    static TABLE: OnceLock<Vec<Kernel>> = OnceLock::new();
    TABLE.get_or_init(enumerate_kernels)
}

/// One (kernel, dilation) pairing with its random channel subset, padding
/// flag and fitted biases. Feature columns follow combo order, then bias
/// order within the combo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Combo {
    pub kernel: usize,
    pub dilation: usize,
    /// Sorted channel ids summed before convolution.
    pub channels: Vec<usize>,
    pub padding: bool,
    pub biases: Vec<f64>,
}

/// Configuration for [`fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub num_features: usize,
    pub num_dilations: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { num_features: 10_000, num_dilations: 32, seed: 0 }
    }
}

/// Result of the dilation-grid fit. Values are stored in internal units; the
/// accessors convert back to raw data units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilationFit {
    pub t_max: f64,
    pub integer_mode: bool,
    d_min_internal: f64,
    dilations_internal: Vec<f64>,
}

impl DilationFit {
    /// 1 for integer-mode fits, `t_max` otherwise.
    pub fn time_scale(&self) -> f64 {
        if self.integer_mode {
            1.0
        } else {
            self.t_max
        }
    }

    /// Smallest gap between consecutive distinct change timestamps within a
    /// training sequence, in raw units.
    pub fn d_min(&self) -> f64 {
        self.d_min_internal * self.time_scale()
    }

    /// Dilation grid in raw units. Integer-mode grids are whole numbers
    /// (nearest integer, at least 1, duplicates kept).
    pub fn dilations(&self) -> Vec<f64> {
        let s = self.time_scale();
        self.dilations_internal.iter().map(|d| d * s).collect()
    }
}

/// Derive the per-combo random stream: combo `i` owns streams `2i` (channel
/// subset) and `2i + 1` (bias fitting), so fitting order never matters.
fn combo_rng(seed: u64, combo: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((combo as u64) * 2 + purpose);
    rng
}

/// Fit the dilation grid on training data: geometric interpolation between
/// `d_min` (smallest observed change gap) and `t_max / 8`, `num_dilations`
/// points. Falls back to the single dilation `d_min` when the range is
/// degenerate.
pub fn fit_dilations(train: &Dataset, num_dilations: usize) -> Result<DilationFit> {
    if num_dilations == 0 {
        return Err(Error::InvalidInput("need at least one dilation".into()));
    }
    let t_max = train.max_end();
    if t_max <= 0.0 {
        return Err(Error::Fit("training data has no positive timestamps".into()));
    }
    let integer_mode = train.all_integer_timestamps();
    let scale = if integer_mode { 1.0 } else { t_max };
    let inv_scale = 1.0 / scale;

    let mut d_min = f64::INFINITY;
    for seq in &train.sequences {
        let l0 = build_change_list(seq);
        let mut prev: Option<f64> = None;
        for c in &l0 {
            let t = c.timestamp * inv_scale;
            if let Some(p) = prev {
                if t > p {
                    d_min = d_min.min(t - p);
                }
            }
            prev = Some(t.max(prev.unwrap_or(t)));
        }
    }
    if !d_min.is_finite() {
        return Err(Error::Fit(
            "no training sequence has two distinct change timestamps".into(),
        ));
    }

    let t_max_internal = t_max * inv_scale;
    let upper = t_max_internal / 8.0;
    let mut dilations_internal: Vec<f64>;
    if d_min >= upper {
        warn!(
            "degenerate dilation range (d_min {} >= t_max/8 {}): using the single dilation d_min",
            d_min * scale,
            upper * scale
        );
        dilations_internal = vec![d_min];
    } else if num_dilations == 1 {
        dilations_internal = vec![d_min];
    } else {
        let lo = d_min.ln();
        let hi = upper.ln();
        dilations_internal = (0..num_dilations)
            .map(|i| {
                let f = i as f64 / (num_dilations - 1) as f64;
                (lo + f * (hi - lo)).exp()
            })
            .collect();
    }
    if integer_mode {
        for d in &mut dilations_internal {
            *d = d.round().max(1.0);
        }
    }
    Ok(DilationFit { t_max, integer_mode, d_min_internal: d_min, dilations_internal })
}

/// Build the combo table: every kernel crossed with every dilation, biases
/// spread as evenly as possible (`m / combos` each, the first `m % combos`
/// combos get one more), padding alternating, and a random channel subset
/// per combo whose size is a power of two capped at `min(channels, 9)`.
/// Bias values start at 0 and are filled by [`fit_biases`].
pub fn assign_combos(
    num_features: usize,
    num_channels: usize,
    num_dilations: usize,
    seed: u64,
) -> Result<Vec<Combo>> {
    if num_channels == 0 {
        return Err(Error::InvalidInput("dataset has no channels".into()));
    }
    if num_features == 0 {
        return Err(Error::InvalidInput("need at least one feature".into()));
    }
    let num_combos = NUM_KERNELS * num_dilations;
    if num_features < num_combos {
        warn!(
            "{num_features} features over {num_combos} combos: some combos get no bias and \
             produce no feature"
        );
    }
    let base = num_features / num_combos;
    let extra = num_features % num_combos;

    let max_size = num_channels.min(KERNEL_TAPS);
    let max_exp = usize::BITS - 1 - max_size.leading_zeros(); // floor(log2)

    let mut combos = Vec::with_capacity(num_combos);
    for kernel in 0..NUM_KERNELS {
        for dilation in 0..num_dilations {
            let idx = combos.len();
            let mut rng = combo_rng(seed, idx, 0);
            let exp = rng.random_range(0..=max_exp);
            let size = 1usize << exp;
            let mut channels: Vec<usize> =
                rand::seq::index::sample(&mut rng, num_channels, size).into_vec();
            channels.sort_unstable();
            let count = base + usize::from(idx < extra);
            combos.push(Combo {
                kernel,
                dilation,
                channels,
                padding: idx % 2 == 0,
                biases: vec![0.0; count],
            });
        }
    }
    Ok(combos)
}

/// Weighted quantile of `values` with positive `durations` as weights: after
/// sorting by value, the first value whose cumulative duration reaches
/// `q * total`. `q = 0` gives the minimum, `q = 1` the maximum.
pub fn weighted_quantile(values: &[f64], durations: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() || values.len() != durations.len() {
        return Err(Error::InvalidInput(format!(
            "weighted_quantile needs matching non-empty inputs (got {} values, {} durations)",
            values.len(),
            durations.len()
        )));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidInput(format!("quantile {q} outside [0, 1]")));
    }
    if durations.iter().any(|&d| d.is_nan() || d <= 0.0) {
        return Err(Error::InvalidInput("durations must be positive".into()));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let total: f64 = durations.iter().sum();
    let threshold = q * total;
    let mut cum = 0.0;
    for &i in &order {
        cum += durations[i];
        if cum >= threshold {
            return Ok(values[i]);
        }
    }
    // Float accumulation can land a hair short of `total`; the answer is then
    // the maximum.
    Ok(values[*order.last().unwrap()])
}

/// The fitted feature model. Serialises to a self-describing structure with
/// round-trip-exact reals; the kernel table is a constant and is rebuilt on
/// demand rather than stored.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureModel {
    pub seed: u64,
    pub taps: usize,
    pub num_channels: usize,
    pub t_max: f64,
    pub integer_mode: bool,
    d_min_internal: f64,
    pub(crate) dilations_internal: Vec<f64>,
    pub combos: Vec<Combo>,
}

impl FeatureModel {
    /// 1 for integer-mode models, `t_max` otherwise. Internal timestamps are
    /// raw timestamps divided by this.
    pub fn time_scale(&self) -> f64 {
        if self.integer_mode {
            1.0
        } else {
            self.t_max
        }
    }

    pub(crate) fn internal_t_max(&self) -> f64 {
        self.t_max / self.time_scale()
    }

    pub fn d_min(&self) -> f64 {
        self.d_min_internal * self.time_scale()
    }

    /// Dilation grid in raw data units.
    pub fn dilations(&self) -> Vec<f64> {
        let s = self.time_scale();
        self.dilations_internal.iter().map(|d| d * s).collect()
    }

    pub fn num_dilations(&self) -> usize {
        self.dilations_internal.len()
    }

    /// Total feature count (sum of bias counts over combos).
    pub fn num_features(&self) -> usize {
        self.combos.iter().map(|c| c.biases.len()).sum()
    }

    pub fn kernels(&self) -> &[Kernel] {
        kernel_table()
    }

    pub(crate) fn plan(&self) -> TransformPlan {
        let mut masks = Vec::with_capacity(self.combos.len());
        let mut col_offsets = Vec::with_capacity(self.combos.len());
        let mut by_dilation = vec![Vec::new(); self.dilations_internal.len()];
        let mut off = 0usize;
        let mut empty_window_features = 0usize;
        let t_max_internal = self.internal_t_max();
        for (i, combo) in self.combos.iter().enumerate() {
            let mut mask = vec![false; self.num_channels];
            for &c in &combo.channels {
                mask[c] = true;
            }
            masks.push(mask);
            col_offsets.push(off);
            off += combo.biases.len();
            by_dilation[combo.dilation].push(i);
            let win = window(
                self.dilations_internal[combo.dilation],
                self.taps,
                combo.padding,
                t_max_internal,
            );
            if win.0 >= win.1 {
                empty_window_features += combo.biases.len();
            }
        }
        TransformPlan { masks, col_offsets, by_dilation, empty_window_features }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("feature model serialises")
    }

    pub fn from_json(s: &str) -> Result<FeatureModel> {
        let m: FeatureModel =
            serde_json::from_str(s).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if m.taps != KERNEL_TAPS {
            return Err(Error::ModelFormat(format!(
                "unsupported tap count {} (this build handles {})",
                m.taps, KERNEL_TAPS
            )));
        }
        for c in &m.combos {
            if c.kernel >= NUM_KERNELS || c.dilation >= m.dilations_internal.len() {
                return Err(Error::ModelFormat("combo indexes out of range".into()));
            }
            if c.channels.iter().any(|&ch| ch >= m.num_channels) {
                return Err(Error::ModelFormat("combo channel out of range".into()));
            }
        }
        Ok(m)
    }
}

pub(crate) struct TransformPlan {
    pub masks: Vec<Vec<bool>>,
    pub col_offsets: Vec<usize>,
    pub by_dilation: Vec<Vec<usize>>,
    pub empty_window_features: usize,
}

/// Refit every combo's biases from `train` using the model's seed: each combo
/// draws one training sequence uniformly, sweeps it at the combo's dilation
/// and subset over the no-padding window with bias 0, and reads one weighted
/// quantile (uniform random q) per bias slot. Degenerate windows leave the
/// biases at 0.
pub fn fit_biases(train: &Dataset, model: &mut FeatureModel) -> Result<()> {
    if train.is_empty() {
        return Err(Error::InvalidInput("cannot fit biases on an empty dataset".into()));
    }
    let inv_scale = 1.0 / model.time_scale();
    let t_max_internal = model.internal_t_max();
    let scaled: Vec<Vec<ChangePoint>> = train
        .sequences
        .iter()
        .map(|s| scale_change_list(&build_change_list(s), inv_scale))
        .collect();

    let num_dilations = model.dilations_internal.len();
    let mut degenerate = 0usize;
    for dil_idx in 0..num_dilations {
        let d = model.dilations_internal[dil_idx];
        let win = window(d, model.taps, false, t_max_internal);
        let mut merged_cache: HashMap<usize, crate::change_list::DilatedList> = HashMap::new();
        for ci in 0..model.combos.len() {
            if model.combos[ci].dilation != dil_idx || model.combos[ci].biases.is_empty() {
                continue;
            }
            let mut rng = combo_rng(model.seed, ci, 1);
            let seq_idx = rng.random_range(0..train.len());
            if win.0 >= win.1 {
                degenerate += model.combos[ci].biases.len();
                for b in &mut model.combos[ci].biases {
                    *b = 0.0;
                }
                continue;
            }
            let merged = merged_cache
                .entry(seq_idx)
                .or_insert_with(|| dilate_and_merge(&scaled[seq_idx], d, model.taps));
            let kernel = kernel_table()[model.combos[ci].kernel];
            let mut mask = vec![false; model.num_channels];
            for &c in &model.combos[ci].channels {
                mask[c] = true;
            }
            let trace = sweep_trace(merged, kernel.weights(), &mask, 0.0, win);
            for b in &mut model.combos[ci].biases {
                let q: f64 = rng.random();
                *b = weighted_quantile(&trace.values, &trace.durations, q)?;
            }
        }
    }
    if degenerate > 0 {
        warn!("{degenerate} bias(es) defaulted to 0: their no-padding window is empty");
    }
    Ok(())
}

/// Fit the full feature model: time range and mode, dilation grid, combo
/// table, biases. Deterministic for a given `(train, config)`.
pub fn fit(train: &Dataset, config: &FitConfig) -> Result<FeatureModel> {
    if train.is_empty() {
        return Err(Error::InvalidInput("cannot fit on an empty dataset".into()));
    }
    if train.classes().len() < 2 {
        return Err(Error::Fit(
            "training data has a single class; classification is undefined".into(),
        ));
    }
    let dil = fit_dilations(train, config.num_dilations)?;
    let combos = assign_combos(
        config.num_features,
        train.num_channels,
        dil.dilations_internal.len(),
        config.seed,
    )?;
    let mut model = FeatureModel {
        seed: config.seed,
        taps: KERNEL_TAPS,
        num_channels: train.num_channels,
        t_max: dil.t_max,
        integer_mode: dil.integer_mode,
        d_min_internal: dil.d_min_internal,
        dilations_internal: dil.dilations_internal,
        combos,
    };
    fit_biases(train, &mut model)?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::parse_dataset;
    use approx::assert_relative_eq;

    #[test]
    fn kernel_family_is_complete_and_ordered() {
        let ks = enumerate_kernels();
        assert_eq!(ks.len(), 84);
        for k in &ks {
            let neg = k.weights().iter().filter(|&&w| w == -2.0).count();
            let pos = k.weights().iter().filter(|&&w| w == 1.0).count();
            assert_eq!((neg, pos), (3, 6));
            assert_eq!(k.weights().iter().sum::<f64>(), 0.0);
        }
        assert_eq!(&ks[0].weights()[..3], &[-2.0, -2.0, -2.0]);
        assert_eq!(&ks[83].weights()[6..], &[-2.0, -2.0, -2.0]);
        // Lexicographic by -2 positions means consecutive kernels differ.
        let mut seen: Vec<[u64; 9]> = ks
            .iter()
            .map(|k| {
                let mut b = [0u64; 9];
                for (i, w) in k.weights().iter().enumerate() {
                    b[i] = w.to_bits();
                }
                b
            })
            .collect();
        seen.dedup();
        assert_eq!(seen.len(), 84);
    }

    fn float_ds_dmin1_tmax80() -> Dataset {
        // Changes at 0.5, 1.5, 10.5, 80: gaps 1, 9, 69.5 -> d_min 1, t_max 80.
        parse_dataset(
            "seq_id,channel,start,end,value\ns1,0,0.5,1.5,1\ns1,0,10.5,80,1\n".as_bytes(),
            "seq_id,label\ns1,a\n".as_bytes(),
        )
        .unwrap()
    }

    #[test]
    fn dilation_grid_is_geometric() {
        let fitd = fit_dilations(&float_ds_dmin1_tmax80(), 32).unwrap();
        assert!(!fitd.integer_mode);
        assert_relative_eq!(fitd.d_min(), 1.0, max_relative = 1e-12);
        let ds = fitd.dilations();
        assert_eq!(ds.len(), 32);
        assert_relative_eq!(ds[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(ds[31], 10.0, max_relative = 1e-12);
        for (i, d) in ds.iter().enumerate() {
            assert_relative_eq!(*d, 10f64.powf(i as f64 / 31.0), max_relative = 1e-9);
        }
        assert_relative_eq!(ds[16], 3.28, max_relative = 1e-2);
    }

    #[test]
    fn integer_mode_rounds_dilations() {
        let ds = parse_dataset(
            "seq_id,channel,start,end,value\ns1,0,0,2,1\ns1,0,4,400,1\n".as_bytes(),
            "seq_id,label\ns1,a\n".as_bytes(),
        )
        .unwrap();
        let fitd = fit_dilations(&ds, 32).unwrap();
        assert!(fitd.integer_mode);
        assert_eq!(fitd.d_min(), 2.0);
        let grid = fitd.dilations();
        assert_eq!(grid[0], 2.0);
        assert_eq!(grid[31], 50.0);
        for d in &grid {
            assert_eq!(d.fract(), 0.0);
            assert!(*d >= 1.0);
        }
        for w in grid.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn degenerate_range_gives_single_dilation() {
        let ds = parse_dataset(
            "seq_id,channel,start,end,value\ns1,0,0,100,1\n".as_bytes(),
            "seq_id,label\ns1,a\n".as_bytes(),
        )
        .unwrap();
        let fitd = fit_dilations(&ds, 32).unwrap();
        assert_eq!(fitd.dilations(), vec![100.0]);
    }

    #[test]
    fn d_min_ignores_cancelled_touch_points() {
        // Touching equal-value intervals produce no change at the junction.
        let ds = parse_dataset(
            "seq_id,channel,start,end,value\ns1,0,0,5,1\ns1,0,5,40,1\n".as_bytes(),
            "seq_id,label\ns1,a\n".as_bytes(),
        )
        .unwrap();
        let fitd = fit_dilations(&ds, 4).unwrap();
        assert_eq!(fitd.d_min(), 40.0);
    }

    #[test]
    fn d_min_is_per_sequence() {
        // Gaps across different sequences must not mix: each sequence here
        // has internal gaps of 10; starts are offset by 1 between sequences.
        let ds = parse_dataset(
            "seq_id,channel,start,end,value\ns1,0,0,10,1\ns2,0,1,11,1\ns2,0,21,801,1\n"
                .as_bytes(),
            "seq_id,label\ns1,a\ns2,b\n".as_bytes(),
        )
        .unwrap();
        let fitd = fit_dilations(&ds, 4).unwrap();
        assert_eq!(fitd.d_min(), 10.0);
    }

    #[test]
    fn no_timestamps_is_an_error() {
        let ds = parse_dataset(
            "seq_id,channel,start,end,value\n".as_bytes(),
            "seq_id,label\ns1,a\ns2,b\n".as_bytes(),
        )
        .unwrap();
        assert!(fit_dilations(&ds, 32).is_err());
    }

    #[test]
    fn scale_equivariance_of_dilations() {
        let base = float_ds_dmin1_tmax80();
        let scaled = base.scale_time(3.7);
        let a = fit_dilations(&base, 16).unwrap();
        let b = fit_dilations(&scaled, 16).unwrap();
        assert_relative_eq!(b.t_max, 3.7 * a.t_max, max_relative = 1e-12);
        assert_relative_eq!(b.d_min(), 3.7 * a.d_min(), max_relative = 1e-12);
        for (da, db) in a.dilations().iter().zip(b.dilations()) {
            assert_relative_eq!(db, 3.7 * da, max_relative = 1e-12);
        }
    }

    #[test]
    fn combo_bookkeeping_at_default_size() {
        let combos = assign_combos(10_000, 4, 32, 9).unwrap();
        assert_eq!(combos.len(), 2688);
        let with_four = combos.iter().filter(|c| c.biases.len() == 4).count();
        let with_three = combos.iter().filter(|c| c.biases.len() == 3).count();
        assert_eq!((with_four, with_three), (1936, 752));
        assert_eq!(combos.iter().map(|c| c.biases.len()).sum::<usize>(), 10_000);
        // kernel-major order, padding alternates
        assert_eq!(combos[0].kernel, 0);
        assert_eq!(combos[0].dilation, 0);
        assert_eq!(combos[32].kernel, 1);
        for (i, c) in combos.iter().enumerate() {
            assert_eq!(c.kernel, i / 32);
            assert_eq!(c.dilation, i % 32);
            assert_eq!(c.padding, i % 2 == 0);
        }
        let padded = combos.iter().filter(|c| c.padding).count();
        assert_eq!(padded, 1344);
    }

    #[test]
    fn channel_subsets_are_powers_of_two_without_replacement() {
        let cases: &[(usize, &[usize])] =
            &[(1, &[1]), (3, &[1, 2]), (8, &[1, 2, 4, 8]), (12, &[1, 2, 4, 8])];
        for &(channels, allowed) in cases {
            let combos = assign_combos(500, channels, 4, 3).unwrap();
            for c in &combos {
                assert!(allowed.contains(&c.channels.len()), "size {} for C={channels}", c.channels.len());
                let mut sorted = c.channels.clone();
                sorted.dedup();
                assert_eq!(sorted.len(), c.channels.len(), "duplicate channel in subset");
                assert!(c.channels.iter().all(|&ch| ch < channels));
                assert!(c.channels.windows(2).all(|w| w[0] < w[1]));
            }
        }
        let single = assign_combos(100, 1, 4, 3).unwrap();
        assert!(single.iter().all(|c| c.channels == vec![0]));
    }

    #[test]
    fn combo_assignment_is_deterministic() {
        let a = assign_combos(700, 6, 8, 42).unwrap();
        let b = assign_combos(700, 6, 8, 42).unwrap();
        assert_eq!(a, b);
        let c = assign_combos(700, 6, 8, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn quantile_hand_values() {
        assert_eq!(weighted_quantile(&[1.0, 3.0], &[9.0, 1.0], 0.5).unwrap(), 1.0);
        assert_eq!(weighted_quantile(&[1.0, 3.0], &[9.0, 1.0], 0.95).unwrap(), 3.0);
        assert_eq!(weighted_quantile(&[5.0, 2.0, 4.0], &[1.0, 1.0, 1.0], 0.0).unwrap(), 2.0);
        assert_eq!(weighted_quantile(&[5.0, 2.0, 4.0], &[1.0, 1.0, 1.0], 1.0).unwrap(), 5.0);
        // Equal values are fine regardless of duration split.
        assert_eq!(weighted_quantile(&[2.0, 2.0], &[0.5, 9.5], 0.3).unwrap(), 2.0);
    }

    #[test]
    fn quantile_is_monotone_in_q() {
        let values = [0.4, -1.0, 2.0, 0.0, 0.4];
        let durations = [1.0, 2.5, 0.5, 3.0, 1.0];
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=20 {
            let q = i as f64 / 20.0;
            let v = weighted_quantile(&values, &durations, q).unwrap();
            assert!(v >= prev, "quantile decreased at q={q}");
            prev = v;
        }
    }

    #[test]
    fn quantile_rejects_bad_input() {
        assert!(weighted_quantile(&[], &[], 0.5).is_err());
        assert!(weighted_quantile(&[1.0], &[1.0, 2.0], 0.5).is_err());
        assert!(weighted_quantile(&[1.0], &[0.0], 0.5).is_err());
        assert!(weighted_quantile(&[1.0], &[1.0], 1.5).is_err());
        assert!(weighted_quantile(&[1.0], &[1.0], -0.1).is_err());
    }

    fn two_class_integer_ds() -> Dataset {
        parse_dataset(
            "seq_id,channel,start,end,value\n\
             s1,0,0,3,1\ns1,1,5,9,2\ns1,0,12,20,1\n\
             s2,0,1,4,1\ns2,1,6,14,2\ns2,0,30,90,1\n"
                .as_bytes(),
            "seq_id,label\ns1,a\ns2,b\n".as_bytes(),
        )
        .unwrap()
    }

    #[test]
    fn fit_produces_consistent_model() {
        let ds = two_class_integer_ds();
        let cfg = FitConfig { num_features: 200, num_dilations: 4, seed: 5 };
        let model = fit(&ds, &cfg).unwrap();
        assert_eq!(model.num_features(), 200);
        assert_eq!(model.num_channels, 2);
        assert!(model.integer_mode);
        assert_eq!(model.t_max, 90.0);
        assert_eq!(model.combos.len(), 84 * 4);
        assert!(model
            .combos
            .iter()
            .flat_map(|c| &c.biases)
            .all(|b| b.is_finite()));
        // At least one combo should have fitted a non-zero bias on this data.
        assert!(model.combos.iter().flat_map(|c| &c.biases).any(|b| *b != 0.0));
    }

    #[test]
    fn fit_is_deterministic() {
        let ds = two_class_integer_ds();
        let cfg = FitConfig { num_features: 150, num_dilations: 3, seed: 77 };
        let a = fit(&ds, &cfg).unwrap();
        let b = fit(&ds, &cfg).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn fit_rejects_single_class() {
        let ds = parse_dataset(
            "seq_id,channel,start,end,value\ns1,0,0,3,1\ns2,0,1,4,1\n".as_bytes(),
            "seq_id,label\ns1,a\ns2,a\n".as_bytes(),
        )
        .unwrap();
        assert!(fit(&ds, &FitConfig::default()).is_err());
    }

    #[test]
    fn model_roundtrips_through_json() {
        let ds = two_class_integer_ds();
        let cfg = FitConfig { num_features: 96, num_dilations: 2, seed: 3 };
        let model = fit(&ds, &cfg).unwrap();
        let json = model.to_json();
        let back = FeatureModel::from_json(&json).unwrap();
        assert_eq!(back.to_json(), json);
        // Reals survive bit-exactly.
        for (a, b) in model
            .combos
            .iter()
            .flat_map(|c| &c.biases)
            .zip(back.combos.iter().flat_map(|c| &c.biases))
        {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn bias_quantile_of_toy_trace() {
        use crate::change_list::{build_change_list, dilate_and_merge};
        use crate::featurize::sweep_trace;
        let ds = parse_dataset(
            "seq_id,channel,start,end,value\n\
             s1,0,10.33,815.40,0.73\n\
             s1,1,803.88,1000.0,1.58\n"
                .as_bytes(),
            "seq_id,label\ns1,walk\n".as_bytes(),
        )
        .unwrap();
        let l0 = build_change_list(&ds.sequences[0]);
        // Single tap: the trace maxes out where both events overlap.
        let m1 = dilate_and_merge(&l0, 20.0, 1);
        let t1 = sweep_trace(&m1, &[1.0], &[true, true], 0.0, (0.0, 1000.0));
        let max1 = weighted_quantile(&t1.values, &t1.durations, 1.0).unwrap();
        assert_relative_eq!(max1, 0.73 + 1.58, max_relative = 1e-12);
        // Two taps at dilation 20: echoes overlap as well, raising the peak.
        let m2 = dilate_and_merge(&l0, 20.0, 2);
        let t2 = sweep_trace(&m2, &[1.0, 1.0], &[true, true], 0.0, (20.0, 1000.0));
        let max2 = weighted_quantile(&t2.values, &t2.durations, 1.0).unwrap();
        assert_relative_eq!(max2, 0.73 + 1.58 + 1.58, max_relative = 1e-12);
        // q = 0 digs out the minimum. The window starts at 20, after the
        // first event has switched on, so the lowest in-window level is 0.73.
        let min2 = weighted_quantile(&t2.values, &t2.durations, 0.0).unwrap();
        assert_relative_eq!(min2, 0.73, max_relative = 1e-12);
    }

    #[test]
    fn biases_of_all_zero_sequence_are_zero() {
        use crate::change_list::dilate_and_merge;
        use crate::featurize::sweep_trace;
        let merged = dilate_and_merge(&[], 2.0, KERNEL_TAPS);
        let tr = sweep_trace(&merged, &[1.0; KERNEL_TAPS], &[true], 0.0, (16.0, 100.0));
        for q in [0.0, 0.3, 0.9, 1.0] {
            assert_eq!(weighted_quantile(&tr.values, &tr.durations, q).unwrap(), 0.0);
        }
    }
}
