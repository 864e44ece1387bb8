//! Head checkpoints in the `KANC` format.
//!
//! Layout, little-endian:
//!
//! ```text
//! "KANC" | u16 version = 1 | u16 flags = 0
//! u32 metadata length M | M bytes UTF-8 metadata, one `key=value` per line
//! u32 tensor count T
//! T x ( u64 element count E | E x f64 )
//! u64 CRC-64/XZ of all preceding bytes
//! ```
//!
//! Tensors appear in declared order: `weights, biases` for linear heads and
//! `coeffs, residual_weights, biases` for KAN heads. Floats in the metadata
//! use Rust's shortest round-trip formatting, so they reload exactly.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::data::{crc64, Reader, StandardizationStats};
use crate::error::{Error, Result};
use crate::heads::{HeadKind, LinearHeadParams, ProbeHead};
use crate::kan::KanHeadParams;
use crate::optim::{ParamTensors, RunMetrics, TrainConfig};
use crate::spline::build_knot_grid;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"KANC";
pub const CHECKPOINT_VERSION: u16 = 1;

/// Everything stored alongside the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointMeta {
    pub kind: HeadKind,
    pub d_in: usize,
    pub d_out: usize,
    /// `(G, k, lo, hi)` for KAN heads.
    pub grid: Option<(usize, usize, f64, f64)>,
    pub config: TrainConfig,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub best_val_accuracy: f64,
    pub epochs_run: usize,
    pub param_count: usize,
    pub standardization: Option<StandardizationStats>,
    /// Free-form entries, e.g. the dataset provenance.
    pub extra: BTreeMap<String, String>,
}

impl CheckpointMeta {
    /// Metadata describing a trained head and its run.
    pub fn for_run(head: &ProbeHead, config: &TrainConfig, metrics: &RunMetrics) -> Self {
        let best = metrics.best_record();
        CheckpointMeta {
            kind: head.kind(),
            d_in: head.d_in(),
            d_out: head.d_out(),
            grid: head.grid().map(|g| {
                let (lo, hi) = g.range();
                (g.grid_size(), g.degree(), lo, hi)
            }),
            config: config.clone(),
            best_epoch: metrics.best_epoch,
            best_val_loss: metrics.best_val_loss,
            best_val_accuracy: best.val_accuracy,
            epochs_run: metrics.epochs_run,
            param_count: head.param_count(),
            standardization: None,
            extra: BTreeMap::new(),
        }
    }

    /// The `key=value` metadata block.
    pub fn to_text(&self) -> String {
        let mut kv: Vec<(String, String)> = vec![
            ("format_version".into(), CHECKPOINT_VERSION.to_string()),
            ("head".into(), self.kind.to_string()),
            ("d_in".into(), self.d_in.to_string()),
            ("d_out".into(), self.d_out.to_string()),
        ];
        if let Some((g, k, lo, hi)) = self.grid {
            kv.push(("grid_size".into(), g.to_string()));
            kv.push(("degree".into(), k.to_string()));
            kv.push(("grid_lo".into(), format!("{lo:?}")));
            kv.push(("grid_hi".into(), format!("{hi:?}")));
        }
        let c = &self.config;
        kv.extend([
            ("lr".into(), format!("{:?}", c.learning_rate)),
            ("batch_size".into(), c.batch_size.to_string()),
            ("max_epochs".into(), c.max_epochs.to_string()),
            ("patience".into(), c.early_stop_patience.to_string()),
            ("seed".into(), c.seed.to_string()),
            ("shuffle".into(), c.shuffle.to_string()),
            ("config_grid_size".into(), c.grid_size.to_string()),
            ("config_degree".into(), c.degree.to_string()),
            ("config_grid_lo".into(), format!("{:?}", c.grid_range.0)),
            ("config_grid_hi".into(), format!("{:?}", c.grid_range.1)),
            ("best_epoch".into(), self.best_epoch.to_string()),
            ("best_val_loss".into(), format!("{:?}", self.best_val_loss)),
            (
                "best_val_accuracy".into(),
                format!("{:?}", self.best_val_accuracy),
            ),
            ("epochs_run".into(), self.epochs_run.to_string()),
            ("param_count".into(), self.param_count.to_string()),
        ]);
        if let Some(st) = &self.standardization {
            kv.push(("standardize_mean".into(), join_floats(&st.mean)));
            kv.push(("standardize_std".into(), join_floats(&st.std)));
            kv.push(("standardize_epsilon".into(), format!("{:?}", st.epsilon)));
        }
        for (k, v) in &self.extra {
            kv.push((format!("x.{k}"), v.replace('\n', " ")));
        }
        kv.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for line in text.lines().filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Malformed(format!("metadata line {line:?}")))?;
            map.insert(k.to_owned(), v.to_owned());
        }
        let get = |k: &str| {
            map.get(k)
                .map(String::as_str)
                .ok_or_else(|| Error::Malformed(format!("metadata lacks {k:?}")))
        };
        fn num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Malformed(format!("metadata {k}={v:?} is not a valid value")))
        }
        let field = |k: &str| get(k).and_then(|v| num::<usize>(k, v));
        let float = |k: &str| get(k).and_then(|v| num::<f64>(k, v));

        let version: u16 = num("format_version", get("format_version")?)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let kind: HeadKind = get("head")?
            .parse()
            .map_err(|_| Error::Malformed("unknown head kind in metadata".into()))?;
        let grid = match kind {
            HeadKind::Kan => Some((
                field("grid_size")?,
                field("degree")?,
                float("grid_lo")?,
                float("grid_hi")?,
            )),
            HeadKind::Linear => None,
        };
        let config = TrainConfig {
            learning_rate: float("lr")?,
            batch_size: field("batch_size")?,
            max_epochs: field("max_epochs")?,
            early_stop_patience: field("patience")?,
            seed: num("seed", get("seed")?)?,
            head: kind,
            grid_size: field("config_grid_size")?,
            degree: field("config_degree")?,
            grid_range: (float("config_grid_lo")?, float("config_grid_hi")?),
            shuffle: num("shuffle", get("shuffle")?)?,
            ..TrainConfig::default()
        };
        let standardization = match map.get("standardize_mean") {
            Some(mean) => Some(StandardizationStats {
                mean: split_floats(mean)?,
                std: split_floats(get("standardize_std")?)?,
                epsilon: float("standardize_epsilon")?,
            }),
            None => None,
        };
        let extra = map
            .iter()
            .filter_map(|(k, v)| k.strip_prefix("x.").map(|k| (k.to_owned(), v.clone())))
            .collect();
        Ok(CheckpointMeta {
            kind,
            d_in: field("d_in")?,
            d_out: field("d_out")?,
            grid,
            config,
            best_epoch: field("best_epoch")?,
            best_val_loss: float("best_val_loss")?,
            best_val_accuracy: float("best_val_accuracy")?,
            epochs_run: field("epochs_run")?,
            param_count: field("param_count")?,
            standardization,
            extra,
        })
    }
}

fn join_floats(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:?}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn split_floats(s: &str) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|v| {
            v.parse()
                .map_err(|_| Error::Malformed(format!("bad float {v:?}")))
        })
        .collect()
}

pub fn encode_checkpoint(head: &ProbeHead, meta: &CheckpointMeta) -> Result<Vec<u8>> {
    if meta.kind != head.kind() || meta.d_in != head.d_in() || meta.d_out != head.d_out() {
        return Err(Error::InvalidArgument(
            "checkpoint metadata does not describe this head".into(),
        ));
    }
    let text = meta.to_text();
    let tensors = head.tensors();
    let mut out = Vec::new();
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&(text.len() as u32).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.len() as u64).to_le_bytes());
        for v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc64(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ProbeHead, CheckpointMeta)> {
    let mut r = Reader::new(bytes);
    r.magic(CHECKPOINT_MAGIC)?;
    let version = r.u16()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let flags = r.u16()?;
    if flags != 0 {
        return Err(Error::Malformed(format!("unsupported flags {flags:#06x}")));
    }
    let meta_len = r.u32()? as usize;
    let meta_bytes = r.take(meta_len)?;
    let count = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(count.min(8));
    for _ in 0..count {
        let len = r.u64()?;
        r.require(len as u128 * 8)?;
        let mut t = Vec::with_capacity(len as usize);
        for _ in 0..len {
            t.push(r.f64()?);
        }
        tensors.push(t);
    }
    r.finish_with_crc()?;

    let text = std::str::from_utf8(meta_bytes)
        .map_err(|e| Error::Malformed(format!("metadata is not UTF-8: {e}")))?;
    let meta = CheckpointMeta::from_text(text)?;
    let head = match meta.kind {
        HeadKind::Linear => {
            let [weights, biases]: [Vec<f64>; 2] = tensors
                .try_into()
                .map_err(|_| Error::Malformed("linear checkpoint needs 2 tensors".into()))?;
            ProbeHead::Linear(LinearHeadParams::from_parts(
                meta.d_in, meta.d_out, weights, biases,
            )?)
        }
        HeadKind::Kan => {
            let (g, k, lo, hi) = meta.grid.expect("kan metadata carries a grid");
            let grid = build_knot_grid(g, k, lo, hi)?;
            let [coeffs, residual, biases]: [Vec<f64>; 3] = tensors
                .try_into()
                .map_err(|_| Error::Malformed("KAN checkpoint needs 3 tensors".into()))?;
            ProbeHead::Kan(KanHeadParams::from_parts(
                meta.d_in, meta.d_out, grid, coeffs, residual, biases,
            )?)
        }
    };
    Ok((head, meta))
}

pub fn save_checkpoint(
    head: &ProbeHead,
    meta: &CheckpointMeta,
    path: impl AsRef<Path>,
) -> Result<()> {
    fs::write(path, encode_checkpoint(head, meta)?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ProbeHead, CheckpointMeta)> {
    decode_checkpoint(&fs::read(path)?)
}

/// Loads a checkpoint and fails unless it holds a head of `expected` kind.
pub fn load_checkpoint_as(
    path: impl AsRef<Path>,
    expected: HeadKind,
) -> Result<(ProbeHead, CheckpointMeta)> {
    let (head, meta) = load_checkpoint(path)?;
    if head.kind() != expected {
        return Err(Error::KindMismatch {
            expected: expected.as_str(),
            found: head.kind().as_str(),
        });
    }
    Ok((head, meta))
}
