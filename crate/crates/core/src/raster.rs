//! Rasterized baseline: sample interval sequences onto a fixed grid and
//! compute the discrete proportion-of-positive-values feature.
//!
//! This is the brute-force counterpart of the exact sweep in [`featurize`]:
//! for integer timestamps, integer dilations and step 1 the two agree
//! exactly (each grid cell is one constant piece); for float data the
//! discrete value converges to the exact one as the step shrinks. The module
//! doubles as a verification oracle ([`oracle_compare`]) and as the lossy
//! baseline path the exact sweep exists to replace.

use rayon::prelude::*;

use crate::data::{Dataset, IntervalSequence};
use crate::error::{Error, Result};
use crate::featurize::transform;
use crate::model::FeatureModel;

/// A sequence sampled at `t = r * step` for `r = 0 .. num_rows-1`, one
/// column per channel, zeros where no interval covers the sample point.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterMatrix {
    pub step: f64,
    /// The continuous time range this raster represents (global, not per
    /// sequence, so every raster in a dataset shares a shape).
    pub t_max: f64,
    pub num_rows: usize,
    pub num_channels: usize,
    values: Vec<f64>,
}

impl RasterMatrix {
    pub fn get(&self, row: usize, channel: usize) -> f64 {
        self.values[row * self.num_channels + channel]
    }

    /// Sample with zero padding outside the grid.
    fn sample_sum(&self, row: isize, mask: &[bool]) -> f64 {
        if row < 0 || row as usize >= self.num_rows {
            return 0.0;
        }
        let base = row as usize * self.num_channels;
        let mut s = 0.0;
        for (c, &on) in mask.iter().enumerate() {
            if on {
                s += self.values[base + c];
            }
        }
        s
    }

    /// Channel-summed column under `mask`, for repeated convolution.
    fn masked_column(&self, mask: &[bool]) -> Vec<f64> {
        (0..self.num_rows)
            .map(|r| self.sample_sum(r as isize, mask))
            .collect()
    }
}

/// Sample `seq` at multiples of `step` across `[0, t_max]` (the grid has
/// `floor(t_max/step) + 1` rows). Intervals are half-open, so a sample at an
/// interval's end reads the next value (or zero).
pub fn rasterize(
    seq: &IntervalSequence,
    num_channels: usize,
    step: f64,
    t_max: f64,
) -> Result<RasterMatrix> {
    if !step.is_finite() || step <= 0.0 {
        return Err(Error::InvalidInput(format!("raster step must be positive, got {step}")));
    }
    if !t_max.is_finite() || t_max <= 0.0 {
        return Err(Error::InvalidInput(format!("raster range must be positive, got {t_max}")));
    }
    let num_rows = (t_max / step).floor() as usize + 1;
    let mut values = vec![0.0; num_rows * num_channels];
    for (&channel, intervals) in &seq.channels {
        if channel >= num_channels {
            return Err(Error::Shape(format!(
                "sequence {} uses channel {channel}, raster has {num_channels}",
                seq.id
            )));
        }
        for iv in intervals {
            // Rows with r*step in [start, end).
            let lo = (iv.start / step).ceil() as usize;
            let hi_excl = ((iv.end / step).ceil() as usize).min(num_rows);
            for r in lo..hi_excl {
                values[r * num_channels + channel] = iv.value;
            }
        }
    }
    Ok(RasterMatrix { step, t_max, num_rows, num_channels, values })
}

/// Discrete proportion-of-positive feature on a raster: the share of grid
/// positions in the (grid-scaled) observation window where the dilated,
/// channel-summed convolution strictly exceeds `bias`. Taps read
/// `M[r - dilation_rows * k]` with zero padding off the grid. An empty
/// position range yields 0.
pub fn discrete_ppv(
    m: &RasterMatrix,
    weights: &[f64],
    dilation_rows: usize,
    mask: &[bool],
    bias: f64,
    padding: bool,
) -> f64 {
    assert!(dilation_rows >= 1, "dilation must be at least one row");
    assert_eq!(mask.len(), m.num_channels);
    let taps = weights.len() as isize;
    let d = dilation_rows as isize;
    // Number of grid cells covering (0, t_max): the window formulas of the
    // exact sweep, scaled onto the grid.
    let n_cells = (m.t_max / m.step).ceil() as isize;
    let (lo, hi) = if padding {
        let shift = (taps / 2) * d;
        (shift, n_cells - 1 + shift)
    } else {
        ((taps - 1) * d, n_cells - 1)
    };
    if lo > hi {
        return 0.0;
    }
    let y = m.masked_column(mask);
    let rows = y.len() as isize;
    let mut positive = 0usize;
    for r in lo..=hi {
        let mut acc = 0.0;
        for (k, w) in weights.iter().enumerate() {
            let idx = r - d * k as isize;
            if (0..rows).contains(&idx) {
                acc += w * y[idx as usize];
            }
        }
        if acc > bias {
            positive += 1;
        }
    }
    positive as f64 / (hi - lo + 1) as f64
}

/// Outcome of checking every feature of every sequence against the raster
/// path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleReport {
    pub max_abs_diff: f64,
    pub features_checked: usize,
}

/// Compute every feature both ways — exact sweep and discrete PPV at `step`
/// — and report the largest absolute discrepancy. For integer-mode models on
/// integer data with step 1 the discrepancy is zero up to float associativity
/// (bounded well under 1e-9); for float data it shrinks linearly with the
/// step.
pub fn oracle_compare(ds: &Dataset, model: &FeatureModel, step: f64) -> Result<OracleReport> {
    if ds.is_empty() {
        return Err(Error::InvalidInput("empty dataset".into()));
    }
    let (exact, _) = transform(ds, model)?;
    let dilations = model.dilations();
    let dilation_rows: Vec<usize> = dilations
        .iter()
        .map(|d| ((d / step).round() as usize).max(1))
        .collect();
    let plan_masks: Vec<Vec<bool>> = model
        .combos
        .iter()
        .map(|c| {
            let mut mask = vec![false; model.num_channels];
            for &ch in &c.channels {
                mask[ch] = true;
            }
            mask
        })
        .collect();

    let max_abs_diff = ds
        .sequences
        .par_iter()
        .enumerate()
        .map(|(i, seq)| -> Result<f64> {
            let raster = rasterize(seq, model.num_channels, step, model.t_max)?;
            let mut worst = 0.0f64;
            let mut col = 0usize;
            for (ci, combo) in model.combos.iter().enumerate() {
                for &bias in &combo.biases {
                    let ppv = discrete_ppv(
                        &raster,
                        model.kernels()[combo.kernel].weights(),
                        dilation_rows[combo.dilation],
                        &plan_masks[ci],
                        bias,
                        combo.padding,
                    );
                    worst = worst.max((ppv - exact.get(i, col)).abs());
                    col += 1;
                }
            }
            Ok(worst)
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;

    Ok(OracleReport { max_abs_diff, features_checked: exact.rows * exact.cols })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::change_list::{build_change_list, dilate_and_merge};
    use crate::data::parse_dataset;
    use crate::featurize::{feature, window};
    use crate::model::{fit, FitConfig};

    fn seq_one_interval(start: f64, end: f64, value: f64) -> Dataset {
        parse_dataset(
            format!("seq_id,channel,start,end,value\ns1,0,{start},{end},{value}\n").as_bytes(),
            "seq_id,label\ns1,a\n".as_bytes(),
        )
        .unwrap()
    }

    #[test]
    fn raster_column_matches_half_open_sampling() {
        let ds = seq_one_interval(2.0, 5.0, 1.0);
        let m = rasterize(&ds.sequences[0], 1, 1.0, 6.0).unwrap();
        assert_eq!(m.num_rows, 7);
        let col: Vec<f64> = (0..7).map(|r| m.get(r, 0)).collect();
        assert_eq!(col, vec![0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn empty_channel_rasterizes_to_zeros() {
        let ds = parse_dataset(
            "seq_id,channel,start,end,value\ns1,1,0,2,3.5\n".as_bytes(),
            "seq_id,label\ns1,a\n".as_bytes(),
        )
        .unwrap();
        let m = rasterize(&ds.sequences[0], 2, 1.0, 4.0).unwrap();
        for r in 0..m.num_rows {
            assert_eq!(m.get(r, 0), 0.0);
        }
        assert_eq!(m.get(0, 1), 3.5);
        assert_eq!(m.get(1, 1), 3.5);
        assert_eq!(m.get(2, 1), 0.0);
    }

    #[test]
    fn coarse_step_can_miss_short_intervals() {
        let ds = seq_one_interval(0.2, 0.4, 9.0);
        let m = rasterize(&ds.sequences[0], 1, 1.0, 2.0).unwrap();
        for r in 0..m.num_rows {
            assert_eq!(m.get(r, 0), 0.0, "interval shorter than the step vanished");
        }
    }

    #[test]
    fn refined_raster_agrees_at_shared_points() {
        let ds = seq_one_interval(1.5, 4.25, 2.0);
        let coarse = rasterize(&ds.sequences[0], 1, 1.0, 6.0).unwrap();
        let fine = rasterize(&ds.sequences[0], 1, 0.5, 6.0).unwrap();
        for r in 0..coarse.num_rows {
            assert_eq!(coarse.get(r, 0), fine.get(2 * r, 0));
        }
    }

    /// The discrete side of the nine-tap hand example: one unit interval
    /// [0, 10), dilation 1, all-ones weights, bias 0.5, no padding, t_max
    /// 100, step 1. The convolution is positive at positions 8..=17: ten of
    /// the 92 window positions.
    #[test]
    fn nine_tap_hand_example_discrete() {
        let ds = seq_one_interval(0.0, 10.0, 1.0);
        let m = rasterize(&ds.sequences[0], 1, 1.0, 100.0).unwrap();
        let f = discrete_ppv(&m, &[1.0; 9], 1, &[true], 0.5, false);
        assert_eq!(f, 10.0 / 92.0);
    }

    #[test]
    fn extreme_biases() {
        let ds = seq_one_interval(0.0, 10.0, 1.0);
        let m = rasterize(&ds.sequences[0], 1, 1.0, 100.0).unwrap();
        // Above the largest possible sum nothing is positive.
        assert_eq!(discrete_ppv(&m, &[1.0; 9], 1, &[true], 100.0, false), 0.0);
        // An all-zero raster with a negative bias is positive everywhere.
        let zeros = rasterize(
            &IntervalSequence::new("z"),
            1,
            1.0,
            10.0,
        )
        .unwrap();
        assert_eq!(discrete_ppv(&zeros, &[1.0; 9], 1, &[true], -1.0, false), 1.0);
        assert_eq!(discrete_ppv(&zeros, &[1.0; 9], 1, &[true], 0.0, false), 0.0);
    }

    #[test]
    fn discrete_ppv_non_increasing_in_bias() {
        let ds = seq_one_interval(0.0, 10.0, 1.0);
        let m = rasterize(&ds.sequences[0], 1, 1.0, 40.0).unwrap();
        let weights = [1.0, -2.0, 1.0, 1.0, -2.0, 1.0, 1.0, -2.0, 1.0];
        let mut prev = 1.0;
        for b in [-3.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0] {
            let f = discrete_ppv(&m, &weights, 2, &[true], b, false);
            assert!(f <= prev);
            assert!((0.0..=1.0).contains(&f));
            prev = f;
        }
    }

    #[test]
    fn empty_position_range_is_zero() {
        let ds = seq_one_interval(0.0, 4.0, 1.0);
        let m = rasterize(&ds.sequences[0], 1, 1.0, 5.0).unwrap();
        // (taps-1)*d = 8 > n_cells-1 = 4: no valid positions.
        assert_eq!(discrete_ppv(&m, &[1.0; 9], 1, &[true], 0.0, false), 0.0);
    }

    /// On integer data the exact sweep and the raster agree cell for cell.
    #[test]
    fn integer_equivalence_single_kernel() {
        let ds = parse_dataset(
            "seq_id,channel,start,end,value\n\
             s1,0,0,10,1\ns1,0,12,15,2\ns1,1,3,9,1\n"
                .as_bytes(),
            "seq_id,label\ns1,a\n".as_bytes(),
        )
        .unwrap();
        let seq = &ds.sequences[0];
        let m = rasterize(seq, 2, 1.0, 20.0).unwrap();
        let l0 = build_change_list(seq);
        let weights = [1.0, -2.0, 1.0];
        for d in [1usize, 2, 3] {
            for padding in [false, true] {
                for mask in [[true, true], [true, false], [false, true]] {
                    for bias in [-1.5, -0.5, 0.0, 0.5, 1.0] {
                        let merged = dilate_and_merge(&l0, d as f64, 3);
                        let win = window(d as f64, 3, padding, 20.0);
                        let exact = feature(&merged, &weights, &mask, bias, win);
                        let ppv = discrete_ppv(&m, &weights, d, &mask, bias, padding);
                        assert!(
                            (exact - ppv).abs() < 1e-12,
                            "d={d} padding={padding} bias={bias}: {exact} vs {ppv}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn oracle_compare_on_fitted_integer_model() {
        let ds = parse_dataset(
            "seq_id,channel,start,end,value\n\
             s1,0,0,3,1\ns1,1,5,9,2\ns1,0,12,20,1\ns1,1,25,40,1\n\
             s2,0,1,4,1\ns2,1,6,14,2\ns2,0,30,90,1\n\
             s3,0,2,8,3\ns3,1,10,30,1\ns3,0,50,70,2\n"
                .as_bytes(),
            "seq_id,label\ns1,a\ns2,b\ns3,a\n".as_bytes(),
        )
        .unwrap();
        let model = fit(&ds, &FitConfig { num_features: 120, num_dilations: 3, seed: 2 }).unwrap();
        assert!(model.integer_mode);
        let report = oracle_compare(&ds, &model, 1.0).unwrap();
        assert_eq!(report.features_checked, 3 * 120);
        assert!(
            report.max_abs_diff < 1e-9,
            "integer-mode discrepancy {}",
            report.max_abs_diff
        );
    }
}
