//! Frozen-feature datasets: container, binary file format, standardization,
//! splitting and synthetic generators.
//!
//! # File format
//!
//! All integers little-endian.
//!
//! | offset | size      | content                                   |
//! |--------|-----------|-------------------------------------------|
//! | 0      | 4         | magic `KANF`                              |
//! | 4      | 2         | format version, `1`                       |
//! | 6      | 2         | flags, `0`                                |
//! | 8      | 4         | `n` samples                               |
//! | 12     | 4         | `d` feature width                         |
//! | 16     | 4         | `n_classes`                               |
//! | 20     | 4·n·d     | `f32` features, row-major                 |
//! |        | 2·n       | `u16` labels                              |
//! |        | n         | `u8` split tags (0 train, 1 val, 2 test)  |
//! |        | 4         | provenance length `L`                     |
//! |        | L         | UTF-8 provenance                          |
//! |        | 8         | CRC-64 of every preceding byte            |
//!
//! The checksum is CRC-64/XZ: polynomial `0x42F0E1EBA9EA3693` (ECMA-182),
//! reflected input and output, initial value and final xor `0xFFFFFFFFFFFFFFFF`.
//! The check value of the ASCII string `123456789` is `0x995DC9BBDF1939FA`.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const DATASET_MAGIC: [u8; 4] = *b"KANF";
pub const DATASET_VERSION: u16 = 1;
const HEADER_LEN: usize = 20;

/// Floor applied to per-dimension standard deviations.
pub const STD_EPSILON: f64 = 1e-6;

/// Default (train, val, test) fractions.
pub const DEFAULT_SPLIT: (f64, f64, f64) = (0.8, 0.1, 0.1);

pub(crate) const CRC64: crc::Crc<u64> = crc::Crc::<u64>::new(&crc::CRC_64_XZ);

pub fn crc64(bytes: &[u8]) -> u64 {
    CRC64.checksum(bytes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train = 0,
    Val = 1,
    Test = 2,
}

impl Split {
    pub fn from_tag(tag: u8) -> Option<Split> {
        match tag {
            0 => Some(Split::Train),
            1 => Some(Split::Val),
            2 => Some(Split::Test),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    n: usize,
    d: usize,
    n_classes: usize,
    features: Vec<f32>,
    labels: Vec<usize>,
    splits: Vec<Split>,
    provenance: String,
}

impl FeatureDataset {
    /// Validates and assembles a dataset.
    pub fn new(
        d: usize,
        n_classes: usize,
        features: Vec<f32>,
        labels: Vec<usize>,
        splits: Vec<Split>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let n = labels.len();
        if n_classes == 0 || n_classes > u16::MAX as usize + 1 {
            return Err(Error::InvalidArgument(format!(
                "class count {n_classes} outside 1..=65536"
            )));
        }
        if features.len() != n * d {
            return Err(Error::DimensionMismatch {
                context: "dataset features",
                expected: n * d,
                found: features.len(),
            });
        }
        if splits.len() != n {
            return Err(Error::DimensionMismatch {
                context: "dataset split tags",
                expected: n,
                found: splits.len(),
            });
        }
        if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= n_classes) {
            return Err(Error::LabelOutOfRange {
                row,
                label,
                n_classes,
            });
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite feature at row {}, column {}",
                pos / d.max(1),
                pos % d.max(1)
            )));
        }
        Ok(FeatureDataset {
            n,
            d,
            n_classes,
            features,
            labels,
            splits,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn features(&self) -> &[f32] {
        &self.features
    }

    pub fn row(&self, s: usize) -> &[f32] {
        &self.features[s * self.d..(s + 1) * self.d]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        (0..self.n).filter(|&s| self.splits[s] == split).collect()
    }

    pub fn split_count(&self, split: Split) -> usize {
        self.splits.iter().filter(|&&s| s == split).count()
    }

    /// Features of the given rows, widened to `f64`.
    pub fn matrix(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &s in indices {
            data.extend(self.row(s).iter().map(|&v| v as f64));
        }
        Matrix::from_vec(indices.len(), self.d, data).expect("consistent shape")
    }

    /// Features and labels of one split.
    pub fn split_view(&self, split: Split) -> (Matrix, Vec<usize>) {
        let idx = self.split_indices(split);
        let labels = idx.iter().map(|&s| self.labels[s]).collect();
        (self.matrix(&idx), labels)
    }

    pub fn with_splits(mut self, splits: Vec<Split>) -> Result<Self> {
        if splits.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "dataset split tags",
                expected: self.n,
                found: splits.len(),
            });
        }
        self.splits = splits;
        Ok(self)
    }
}

/// Serializes a dataset to bytes in the `KANF` format.
pub fn encode_dataset(ds: &FeatureDataset) -> Result<Vec<u8>> {
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::InvalidArgument(format!("{what} {v} exceeds u32")))
    };
    let n = to_u32(ds.n, "sample count")?;
    let d = to_u32(ds.d, "feature width")?;
    let c = to_u32(ds.n_classes, "class count")?;
    let prov = ds.provenance.as_bytes();
    let prov_len = to_u32(prov.len(), "provenance length")?;
    let mut out =
        Vec::with_capacity(HEADER_LEN + ds.features.len() * 4 + ds.n * 3 + 4 + prov.len() + 8);
    out.extend_from_slice(&DATASET_MAGIC);
    out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&d.to_le_bytes());
    out.extend_from_slice(&c.to_le_bytes());
    for v in &ds.features {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &l in &ds.labels {
        // n_classes <= 65536 so every label fits
        out.extend_from_slice(&(l as u16).to_le_bytes());
    }
    out.extend(ds.splits.iter().map(|&s| s as u8));
    out.extend_from_slice(&prov_len.to_le_bytes());
    out.extend_from_slice(prov);
    let crc = crc64(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Little-endian cursor over a byte buffer that reports truncation.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Truncated {
                needed: self.pos.saturating_add(len),
                available: self.buf.len(),
            }),
        }
    }

    /// Fails with a truncation error unless `len` more bytes are available.
    pub(crate) fn require(&self, len: u128) -> Result<()> {
        let needed = self.pos as u128 + len;
        if needed > self.buf.len() as u128 {
            return Err(Error::Truncated {
                needed: usize::try_from(needed).unwrap_or(usize::MAX),
                available: self.buf.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn magic(&mut self, expected: [u8; 4]) -> Result<()> {
        let found: [u8; 4] = self.take(4)?.try_into().unwrap();
        if found != expected {
            return Err(Error::CorruptMagic { expected, found });
        }
        Ok(())
    }

    /// Checks the trailing CRC over everything before it; the reader must sit
    /// exactly eight bytes before the end.
    pub(crate) fn finish_with_crc(mut self) -> Result<()> {
        let body_end = self.pos;
        let stored = self.u64()?;
        if self.pos != self.buf.len() {
            return Err(Error::Malformed(format!(
                "{} unexpected trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        let computed = crc64(&self.buf[..body_end]);
        if stored != computed {
            return Err(Error::ChecksumMismatch { stored, computed });
        }
        Ok(())
    }
}

/// Parses a `KANF` byte buffer with full validation.
pub fn decode_dataset(bytes: &[u8]) -> Result<FeatureDataset> {
    let mut r = Reader::new(bytes);
    r.magic(DATASET_MAGIC)?;
    let version = r.u16()?;
    if version != DATASET_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let flags = r.u16()?;
    if flags != 0 {
        return Err(Error::Malformed(format!("unsupported flags {flags:#06x}")));
    }
    let n = r.u32()? as usize;
    let d = r.u32()? as usize;
    let n_classes = r.u32()? as usize;
    // Body size check up front so a short file is reported as truncation
    // rather than a checksum failure.
    r.require(n as u128 * d as u128 * 4 + n as u128 * 3 + 4)?;
    let mut features = Vec::with_capacity(n * d);
    for _ in 0..n * d {
        features.push(r.f32()?);
    }
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        labels.push(r.u16()? as usize);
    }
    let mut tags = Vec::with_capacity(n);
    for _ in 0..n {
        tags.push(r.u8()?);
    }
    let prov_len = r.u32()? as usize;
    r.require(prov_len as u128 + 8)?;
    let prov = r.take(prov_len)?;
    r.finish_with_crc()?;

    if n_classes == 0 || n_classes > u16::MAX as usize + 1 {
        return Err(Error::Malformed(format!("class count {n_classes}")));
    }
    if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= n_classes) {
        return Err(Error::LabelOutOfRange {
            row,
            label,
            n_classes,
        });
    }
    let splits = tags
        .iter()
        .enumerate()
        .map(|(row, &t)| {
            Split::from_tag(t)
                .ok_or_else(|| Error::Malformed(format!("split tag {t} at row {row}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::Malformed("non-finite feature value".into()));
    }
    let provenance = std::str::from_utf8(prov)
        .map_err(|e| Error::Malformed(format!("provenance is not UTF-8: {e}")))?
        .to_owned();
    FeatureDataset::new(d, n_classes, features, labels, splits, provenance)
}

pub fn save_dataset(ds: &FeatureDataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_dataset(ds)?)?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<FeatureDataset> {
    decode_dataset(&fs::read(path)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardizationStats {
    pub mean: Vec<f64>,
    /// Population standard deviation, floored at `epsilon`.
    pub std: Vec<f64>,
    pub epsilon: f64,
}

impl StandardizationStats {
    pub fn apply_row(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
    }
}

/// Train-split statistics; val and test never contribute.
pub fn standardization_stats(ds: &FeatureDataset) -> Result<StandardizationStats> {
    let train = ds.split_indices(Split::Train);
    if train.is_empty() {
        return Err(Error::EmptySplit("train"));
    }
    let d = ds.d;
    let count = train.len() as f64;
    let mut mean = vec![0.0; d];
    for &s in &train {
        for (m, &v) in mean.iter_mut().zip(ds.row(s)) {
            *m += v as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let mut var = vec![0.0; d];
    for &s in &train {
        for ((acc, &v), m) in var.iter_mut().zip(ds.row(s)).zip(&mean) {
            let diff = v as f64 - m;
            *acc += diff * diff;
        }
    }
    let std = var
        .iter()
        .map(|v| (v / count).sqrt().max(STD_EPSILON))
        .collect();
    Ok(StandardizationStats {
        mean,
        std,
        epsilon: STD_EPSILON,
    })
}

/// Applies `stats` to every split.
pub fn apply_standardization(
    ds: &FeatureDataset,
    stats: &StandardizationStats,
) -> Result<FeatureDataset> {
    if stats.mean.len() != ds.d || stats.std.len() != ds.d {
        return Err(Error::DimensionMismatch {
            context: "standardization width",
            expected: ds.d,
            found: stats.mean.len(),
        });
    }
    let mut out = ds.clone();
    let mut buf = vec![0.0; ds.d];
    for s in 0..ds.n {
        buf.iter_mut()
            .zip(ds.row(s))
            .for_each(|(b, &v)| *b = v as f64);
        stats.apply_row(&mut buf);
        out.features[s * ds.d..(s + 1) * ds.d]
            .iter_mut()
            .zip(&buf)
            .for_each(|(o, &v)| *o = v as f32);
    }
    Ok(out)
}

/// Standardizes every split with statistics from the train split.
pub fn standardize(ds: &FeatureDataset) -> Result<(FeatureDataset, StandardizationStats)> {
    let stats = standardization_stats(ds)?;
    Ok((apply_standardization(ds, &stats)?, stats))
}

/// Per-split sample counts by largest remainder: each count is within one
/// sample of its exact share.
pub fn split_counts(n: usize, fractions: (f64, f64, f64)) -> Result<[usize; 3]> {
    let f = [fractions.0, fractions.1, fractions.2];
    if f.iter().any(|&v| v.is_nan() || v <= 0.0 || !v.is_finite())
        || ((f[0] + f[1] + f[2]) - 1.0).abs() > 1e-9
    {
        return Err(Error::InvalidArgument(format!(
            "split fractions {fractions:?} must be positive and sum to 1"
        )));
    }
    let exact: Vec<f64> = f.iter().map(|&v| v * n as f64).collect();
    let mut counts = [0usize; 3];
    for (c, &e) in counts.iter_mut().zip(&exact) {
        *c = e.floor() as usize;
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    let mut remaining = n - counts.iter().sum::<usize>();
    for &i in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        counts[i] += 1;
        remaining -= 1;
    }
    Ok(counts)
}

/// Seeded random assignment of split tags.
pub fn split_dataset(
    ds: &FeatureDataset,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<FeatureDataset> {
    let counts = split_counts(ds.n, fractions)?;
    let mut perm: Vec<usize> = (0..ds.n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut splits = vec![Split::Train; ds.n];
    for (pos, &s) in perm.iter().enumerate() {
        splits[s] = if pos < counts[0] {
            Split::Train
        } else if pos < counts[0] + counts[1] {
            Split::Val
        } else {
            Split::Test
        };
    }
    ds.clone().with_splits(splits)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SyntheticKind {
    Linear,
    Rings,
    AdditivePoly,
}

impl SyntheticKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SyntheticKind::Linear => "linear",
            SyntheticKind::Rings => "rings",
            SyntheticKind::AdditivePoly => "additive_poly",
        }
    }
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(SyntheticKind::Linear),
            "rings" => Ok(SyntheticKind::Rings),
            "additive_poly" => Ok(SyntheticKind::AdditivePoly),
            other => Err(Error::InvalidArgument(format!(
                "unknown generator {other:?}"
            ))),
        }
    }
}

/// Parameters that fully determine a synthetic labeling rule.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelRule {
    /// `argmax_c (weights[c] . x + biases[c])`
    Linear {
        weights: Vec<Vec<f64>>,
        biases: Vec<f64>,
    },
    /// Class = number of thresholds at or below `x_0^2 + x_1^2`.
    Rings { thresholds: Vec<f64> },
    /// `argmax_c sum_i poly[c][i](x_i)`, each poly as `[a0, a1, a2, a3]`.
    AdditivePoly { coeffs: Vec<Vec<[f64; 4]>> },
}

impl LabelRule {
    pub fn kind(&self) -> SyntheticKind {
        match self {
            LabelRule::Linear { .. } => SyntheticKind::Linear,
            LabelRule::Rings { .. } => SyntheticKind::Rings,
            LabelRule::AdditivePoly { .. } => SyntheticKind::AdditivePoly,
        }
    }

    /// Class scores (or, for rings, the squared radius in slot 0).
    fn scores(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        match self {
            LabelRule::Linear { weights, biases } => {
                for (w, b) in weights.iter().zip(biases) {
                    out.push(b + w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>());
                }
            }
            LabelRule::Rings { .. } => out.push(x[0] * x[0] + x[1] * x[1]),
            LabelRule::AdditivePoly { coeffs } => {
                for class in coeffs {
                    let s = class
                        .iter()
                        .zip(x)
                        .map(|(p, &u)| p[0] + u * (p[1] + u * (p[2] + u * p[3])))
                        .sum::<f64>();
                    out.push(s);
                }
            }
        }
    }

    fn decide(&self, scores: &[f64]) -> usize {
        match self {
            LabelRule::Rings { thresholds } => {
                thresholds.iter().filter(|&&t| t <= scores[0]).count()
            }
            _ => {
                let mut best = 0;
                for (j, &v) in scores.iter().enumerate().skip(1) {
                    if v > scores[best] {
                        best = j;
                    }
                }
                best
            }
        }
    }

    /// Noise-free label of one feature row.
    pub fn label(&self, x: &[f64]) -> usize {
        let mut scores = Vec::new();
        self.scores(x, &mut scores);
        self.decide(&scores)
    }

    fn encode(&self) -> String {
        fn list(v: &[f64]) -> String {
            v.iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(",")
        }
        match self {
            LabelRule::Linear { weights, biases } => format!(
                "weights={} biases={}",
                weights
                    .iter()
                    .map(|w| list(w))
                    .collect::<Vec<_>>()
                    .join(";"),
                list(biases)
            ),
            LabelRule::Rings { thresholds } => format!("thresholds={}", list(thresholds)),
            LabelRule::AdditivePoly { coeffs } => format!(
                "poly={}",
                coeffs
                    .iter()
                    .map(|c| c.iter().map(|p| list(p)).collect::<Vec<_>>().join("|"))
                    .collect::<Vec<_>>()
                    .join(";")
            ),
        }
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.parse::<f64>()
                .map_err(|e| Error::Malformed(format!("bad number {v:?} in provenance: {e}")))
        })
        .collect()
}

/// Splits `key=value` tokens of a provenance string.
pub fn provenance_fields(provenance: &str) -> Vec<(&str, &str)> {
    provenance
        .split_whitespace()
        .filter_map(|tok| tok.split_once('='))
        .collect()
}

/// Recovers the labeling rule recorded by [`gen_synthetic`].
pub fn parse_label_rule(provenance: &str) -> Result<LabelRule> {
    let fields = provenance_fields(provenance);
    let get = |key: &str| {
        fields
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::Malformed(format!("provenance lacks {key:?}")))
    };
    let kind: SyntheticKind = get("generator")?
        .parse()
        .map_err(|_| Error::Malformed("unknown generator in provenance".into()))?;
    match kind {
        SyntheticKind::Linear => {
            let weights = get("weights")?
                .split(';')
                .map(parse_list)
                .collect::<Result<Vec<_>>>()?;
            let biases = parse_list(get("biases")?)?;
            Ok(LabelRule::Linear { weights, biases })
        }
        SyntheticKind::Rings => Ok(LabelRule::Rings {
            thresholds: parse_list(get("thresholds")?)?,
        }),
        SyntheticKind::AdditivePoly => {
            let coeffs = get("poly")?
                .split(';')
                .map(|class| {
                    class
                        .split('|')
                        .map(|p| {
                            let v = parse_list(p)?;
                            <[f64; 4]>::try_from(v.as_slice())
                                .map_err(|_| Error::Malformed("cubic needs 4 coefficients".into()))
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(LabelRule::AdditivePoly { coeffs })
        }
    }
}

/// Relabels every row of `ds` with the noise-free rule from its provenance.
pub fn recompute_labels(ds: &FeatureDataset) -> Result<Vec<usize>> {
    let rule = parse_label_rule(&ds.provenance)?;
    let mut x = vec![0.0; ds.d];
    Ok((0..ds.n)
        .map(|s| {
            x.iter_mut()
                .zip(ds.row(s))
                .for_each(|(a, &b)| *a = b as f64);
            rule.label(&x)
        })
        .collect())
}

/// Squared-radius thresholds splitting a 2-D standard normal into
/// `n_classes` equally likely annuli: `-2 ln(1 - c / n_classes)`.
pub fn ring_thresholds(n_classes: usize) -> Vec<f64> {
    (1..n_classes)
        .map(|c| -2.0 * (1.0 - c as f64 / n_classes as f64).ln())
        .collect()
}

/// Generates a labeled synthetic dataset with standard normal features.
///
/// `noise` perturbs the decision quantity before labeling: class scores for
/// `linear` and `additive_poly`, the squared radius for `rings`. Splits use
/// [`DEFAULT_SPLIT`] seeded with `seed`.
pub fn gen_synthetic(
    kind: SyntheticKind,
    n: usize,
    d: usize,
    n_classes: usize,
    noise: f64,
    seed: u64,
) -> Result<FeatureDataset> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidArgument("n and d must be positive".into()));
    }
    if n_classes < 2 {
        return Err(Error::InvalidArgument("need at least 2 classes".into()));
    }
    if kind == SyntheticKind::Rings && d < 2 {
        return Err(Error::InvalidArgument("rings needs d >= 2".into()));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise {noise} must be >= 0"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let rule = match kind {
        SyntheticKind::Linear => LabelRule::Linear {
            weights: (0..n_classes)
                .map(|_| (0..d).map(|_| normal()).collect())
                .collect(),
            biases: (0..n_classes).map(|_| 0.5 * normal()).collect(),
        },
        SyntheticKind::Rings => LabelRule::Rings {
            thresholds: ring_thresholds(n_classes),
        },
        SyntheticKind::AdditivePoly => LabelRule::AdditivePoly {
            coeffs: (0..n_classes)
                .map(|_| {
                    (0..d)
                        .map(|_| [0.0, normal(), normal(), 0.3 * normal()])
                        .collect()
                })
                .collect(),
        },
    };
    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    let mut x = vec![0.0; d];
    let mut scores = Vec::new();
    for _ in 0..n {
        for v in x.iter_mut() {
            // Labels are computed from the stored single-precision values.
            let f = normal() as f32;
            features.push(f);
            *v = f as f64;
        }
        rule.scores(&x, &mut scores);
        for sc in scores.iter_mut() {
            *sc += noise * normal();
        }
        labels.push(rule.decide(&scores));
    }
    let provenance = format!(
        "generator={} n={n} d={d} classes={n_classes} noise={noise:?} seed={seed} {}",
        kind,
        rule.encode()
    );
    let ds = FeatureDataset::new(
        d,
        n_classes,
        features,
        labels,
        vec![Split::Train; n],
        provenance,
    )?;
    split_dataset(&ds, DEFAULT_SPLIT, seed)
}
