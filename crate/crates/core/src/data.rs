//! Interval event data model and CSV I/O.
//!
//! A sample is a sequence of *intervals*: per-channel events with a start
//! time, an end time and a real-valued intensity. Channels are integer ids;
//! a channel that never appears in a sequence is an implicit all-zero signal.
//! Interval semantics are half-open `[start, end)`: the value is active at
//! the start timestamp and inactive at the end timestamp. Zero-length
//! intervals are accepted (with a warning on load) but carry no signal.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};

/// One event: `value` is active on the half-open time range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
    pub value: f64,
}

impl Interval {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// A labelled sample: any number of channels, each holding sorted,
/// non-overlapping intervals. Channels are sparse; missing ids are all-zero.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSequence {
    pub id: String,
    /// channel id -> intervals, sorted by start, pairwise non-overlapping.
    pub channels: BTreeMap<usize, Vec<Interval>>,
}

impl IntervalSequence {
    pub fn new(id: impl Into<String>) -> Self {
        IntervalSequence {
            id: id.into(),
            channels: BTreeMap::new(),
        }
    }

    /// Total number of events (intervals) across channels.
    pub fn num_events(&self) -> usize {
        self.channels.values().map(Vec::len).sum()
    }

    /// Highest end timestamp in the sequence, 0 if empty.
    pub fn max_end(&self) -> f64 {
        self.channels
            .values()
            .flatten()
            .map(|iv| iv.end)
            .fold(0.0, f64::max)
    }
}

/// A labelled collection of interval sequences with a fixed channel count.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub sequences: Vec<IntervalSequence>,
    /// One label per sequence, parallel to `sequences`.
    pub labels: Vec<String>,
    /// Channels are `0..num_channels`; the count is the highest channel id
    /// seen plus one.
    pub num_channels: usize,
}

/// Summary counters for a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub num_classes: usize,
    pub num_samples: usize,
    pub num_channels: usize,
    /// Highest end timestamp over all sequences.
    pub max_duration: f64,
    /// Mean number of events per sequence.
    pub mean_events: f64,
}

impl std::fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "samples: {}  classes: {}  channels: {}  max end: {}  mean events: {:.2}",
            self.num_samples, self.num_classes, self.num_channels, self.max_duration, self.mean_events
        )
    }
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Distinct labels in sorted order. Class indices used elsewhere in the
    /// crate are positions in this list.
    pub fn classes(&self) -> Vec<String> {
        let mut cs: Vec<String> = self.labels.clone();
        cs.sort();
        cs.dedup();
        cs
    }

    /// Highest end timestamp over all sequences, 0 for an empty dataset.
    pub fn max_end(&self) -> f64 {
        self.sequences.iter().map(|s| s.max_end()).fold(0.0, f64::max)
    }

    /// Replace every interval value with 1.0, keeping only timing information.
    pub fn binarize_values(&mut self) {
        for seq in &mut self.sequences {
            for ivs in seq.channels.values_mut() {
                for iv in ivs {
                    iv.value = 1.0;
                }
            }
        }
    }

    /// Multiply every timestamp by `factor` (values untouched). Useful for
    /// unit-invariance checks and benchmarks.
    pub fn scale_time(&self, factor: f64) -> Dataset {
        let mut out = self.clone();
        for seq in &mut out.sequences {
            for ivs in seq.channels.values_mut() {
                for iv in ivs {
                    iv.start *= factor;
                    iv.end *= factor;
                }
            }
        }
        out
    }

    pub fn stats(&self) -> DatasetStats {
        let total_events: usize = self.sequences.iter().map(|s| s.num_events()).sum();
        DatasetStats {
            num_classes: self.classes().len(),
            num_samples: self.len(),
            num_channels: self.num_channels,
            max_duration: self.max_end(),
            mean_events: if self.is_empty() {
                0.0
            } else {
                total_events as f64 / self.len() as f64
            },
        }
    }

    /// New dataset holding the given sample indices (in the given order).
    /// The channel count is inherited, so subsets of one dataset stay
    /// mutually compatible even when a subset never uses the last channel.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            sequences: indices.iter().map(|&i| self.sequences[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
            num_channels: self.num_channels,
        }
    }

    /// True when every timestamp in the dataset is an integer.
    pub fn all_integer_timestamps(&self) -> bool {
        self.sequences.iter().all(|s| {
            s.channels
                .values()
                .flatten()
                .all(|iv| iv.start.fract() == 0.0 && iv.end.fract() == 0.0)
        })
    }
}

fn parse_field<T: std::str::FromStr>(file: &str, line: u64, field: &str, what: &str) -> Result<T> {
    field.trim().parse().map_err(|_| Error::Parse {
        file: file.to_string(),
        line,
        msg: format!("cannot parse {what} from {field:?}"),
    })
}

/// Parse the labels CSV (`seq_id,label`). The row order defines sample order.
fn parse_labels<R: Read>(reader: R) -> Result<Vec<(String, String)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    {
        let headers = rdr.headers()?;
        let hs: Vec<String> = headers.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
        if hs != ["seq_id", "label"] {
            return Err(Error::Parse {
                file: "labels".into(),
                line: 1,
                msg: format!("expected header seq_id,label, got {}", hs.join(",")),
            });
        }
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        if rec.len() != 2 {
            return Err(Error::Parse {
                file: "labels".into(),
                line,
                msg: format!("expected 2 fields, got {}", rec.len()),
            });
        }
        out.push((rec[0].to_string(), rec[1].to_string()));
    }
    Ok(out)
}

/// Parse the two CSV streams into a validated [`Dataset`].
///
/// The intervals file has header `seq_id,channel,start,end,value`; the value
/// column may be omitted entirely, in which case every value is 1.0. The
/// labels file (`seq_id,label`) defines the sample order; a labelled sequence
/// with no interval rows is a valid all-zero sample, but interval rows whose
/// `seq_id` carries no label are an error.
///
/// Validation per channel: timestamps finite and non-negative, `end >= start`,
/// values finite, intervals non-overlapping once sorted by start (touching is
/// fine). Zero-length intervals are kept but warned about: they are invisible
/// to the feature transform.
pub fn parse_dataset<R1: Read, R2: Read>(intervals: R1, labels: R2) -> Result<Dataset> {
    let label_rows = parse_labels(labels)?;
    let mut order: Vec<String> = Vec::with_capacity(label_rows.len());
    let mut by_id: BTreeMap<String, usize> = BTreeMap::new();
    let mut labels_out = Vec::with_capacity(label_rows.len());
    for (seq_id, label) in label_rows {
        if by_id.insert(seq_id.clone(), order.len()).is_some() {
            return Err(Error::DuplicateLabel { seq_id });
        }
        order.push(seq_id);
        labels_out.push(label);
    }

    let mut sequences: Vec<IntervalSequence> =
        order.iter().map(IntervalSequence::new).collect();
    let mut num_channels = 0usize;
    read_interval_rows(intervals, |seq_id, channel, interval| {
        let idx = *by_id
            .get(seq_id)
            .ok_or_else(|| Error::UnlabelledSequence { seq_id: seq_id.to_string() })?;
        num_channels = num_channels.max(channel + 1);
        sequences[idx].channels.entry(channel).or_default().push(interval);
        Ok(())
    })?;
    finalize_channels(&mut sequences)?;
    Ok(Dataset { sequences, labels: labels_out, num_channels })
}

/// Parse an intervals CSV with no labels file: sequences appear in first-use
/// order, every label is the empty string. Intended for prediction inputs.
pub fn parse_intervals_unlabelled<R: Read>(intervals: R) -> Result<Dataset> {
    let mut by_id: BTreeMap<String, usize> = BTreeMap::new();
    let mut sequences: Vec<IntervalSequence> = Vec::new();
    let mut num_channels = 0usize;
    read_interval_rows(intervals, |seq_id, channel, interval| {
        let idx = *by_id.entry(seq_id.to_string()).or_insert_with(|| {
            sequences.push(IntervalSequence::new(seq_id));
            sequences.len() - 1
        });
        num_channels = num_channels.max(channel + 1);
        sequences[idx].channels.entry(channel).or_default().push(interval);
        Ok(())
    })?;
    finalize_channels(&mut sequences)?;
    let labels = vec![String::new(); sequences.len()];
    Ok(Dataset { sequences, labels, num_channels })
}

/// Read and validate interval rows, handing each to `sink`.
fn read_interval_rows<R: Read>(
    intervals: R,
    mut sink: impl FnMut(&str, usize, Interval) -> Result<()>,
) -> Result<()> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(intervals);
    let has_value;
    {
        let headers = rdr.headers()?;
        let hs: Vec<String> = headers.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
        if hs == ["seq_id", "channel", "start", "end", "value"] {
            has_value = true;
        } else if hs == ["seq_id", "channel", "start", "end"] {
            has_value = false;
        } else {
            return Err(Error::Parse {
                file: "intervals".into(),
                line: 1,
                msg: format!(
                    "expected header seq_id,channel,start,end[,value], got {}",
                    hs.join(",")
                ),
            });
        }
    }

    let mut zero_length = 0usize;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        let want = if has_value { 5 } else { 4 };
        if rec.len() != want {
            return Err(Error::Parse {
                file: "intervals".into(),
                line,
                msg: format!("expected {want} fields, got {}", rec.len()),
            });
        }
        let seq_id = rec[0].to_string();
        let channel: usize = parse_field("intervals", line, &rec[1], "channel id")?;
        let start: f64 = parse_field("intervals", line, &rec[2], "start timestamp")?;
        let end: f64 = parse_field("intervals", line, &rec[3], "end timestamp")?;
        let value: f64 = if has_value {
            parse_field("intervals", line, &rec[4], "value")?
        } else {
            1.0
        };

        if !start.is_finite() || !end.is_finite() {
            return Err(Error::Parse {
                file: "intervals".into(),
                line,
                msg: "timestamps must be finite".into(),
            });
        }
        if !value.is_finite() {
            return Err(Error::Parse {
                file: "intervals".into(),
                line,
                msg: "value must be finite".into(),
            });
        }
        if start < 0.0 || end < 0.0 {
            return Err(Error::Parse {
                file: "intervals".into(),
                line,
                msg: format!("negative timestamp in [{start}, {end})"),
            });
        }
        if end < start {
            return Err(Error::Parse {
                file: "intervals".into(),
                line,
                msg: format!("interval ends before it starts: [{start}, {end})"),
            });
        }
        if end == start {
            zero_length += 1;
        }

        sink(&seq_id, channel, Interval { start, end, value })?;
    }

    if zero_length > 0 {
        warn!("{zero_length} zero-length interval(s) in input; they carry no signal");
    }
    Ok(())
}

/// Sort each channel and reject overlap. Touching intervals (a.end ==
/// b.start) are allowed.
fn finalize_channels(sequences: &mut [IntervalSequence]) -> Result<()> {
    for seq in sequences {
        for (&channel, ivs) in seq.channels.iter_mut() {
            ivs.sort_by(|a, b| {
                a.start
                    .total_cmp(&b.start)
                    .then(a.end.total_cmp(&b.end))
            });
            for w in ivs.windows(2) {
                if w[0].end > w[1].start {
                    return Err(Error::Overlap {
                        seq_id: seq.id.clone(),
                        channel,
                        a_start: w[0].start,
                        a_end: w[0].end,
                        b_start: w[1].start,
                        b_end: w[1].end,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Load an intervals-only CSV from a path. See [`parse_intervals_unlabelled`].
pub fn load_intervals(intervals: &Path) -> Result<Dataset> {
    let iv = std::fs::File::open(intervals)?;
    parse_intervals_unlabelled(std::io::BufReader::new(iv))
}

/// Load a dataset from paths. See [`parse_dataset`].
pub fn load_dataset(intervals: &Path, labels: &Path) -> Result<Dataset> {
    let iv = std::fs::File::open(intervals)?;
    let lb = std::fs::File::open(labels)?;
    parse_dataset(std::io::BufReader::new(iv), std::io::BufReader::new(lb))
}

/// Write the intervals CSV for `ds` (always in the five-column form).
pub fn write_intervals_csv<W: Write>(ds: &Dataset, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["seq_id", "channel", "start", "end", "value"])?;
    for seq in &ds.sequences {
        for (channel, ivs) in &seq.channels {
            for iv in ivs {
                wtr.write_record([
                    seq.id.as_str(),
                    &channel.to_string(),
                    &format_f64(iv.start),
                    &format_f64(iv.end),
                    &format_f64(iv.value),
                ])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Write the labels CSV for `ds`.
pub fn write_labels_csv<W: Write>(ds: &Dataset, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["seq_id", "label"])?;
    for (seq, label) in ds.sequences.iter().zip(&ds.labels) {
        wtr.write_record([seq.id.as_str(), label.as_str()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Shortest decimal form that parses back to the identical f64.
pub(crate) fn format_f64(x: f64) -> String {
    let mut buf = ryu_like(x);
    if !buf.contains('.') && !buf.contains('e') && !buf.contains("inf") && !buf.contains("NaN") {
        buf.push_str(".0");
    }
    buf
}

fn ryu_like(x: f64) -> String {
    // `{}` on f64 is the shortest representation that round-trips.
    format!("{x}")
}
