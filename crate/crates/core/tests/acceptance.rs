//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.
//!
//! `cargo test -p kanprobe --test acceptance`

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use kanprobe::checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
use kanprobe::data::{load_dataset, save_dataset, Split, SyntheticKind};
use kanprobe::experiments::{
    best_val_accuracy, compare_heads, parse_metrics, render_metrics, run_sweep, SweepConfig,
};
use kanprobe::figures::{render_figure, FigureKind};
use kanprobe::heads::{
    head_backward, head_forward, init_linear_head, softmax_cross_entropy, HeadKind, ProbeHead,
};
use kanprobe::kan::{init_kan_head, KanHeadParams};
use kanprobe::optim::{adam_step, evaluate, train, AdamState, ParamTensors, TrainConfig};
use kanprobe::spline::build_knot_grid;
use kanprobe::Error;
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, start: Instant, detail: String) -> Outcome {
    let took = start.elapsed();
    if took > limit {
        Err(format!(
            "{detail}; took {:.1}s, limit {}s",
            took.as_secs_f64(),
            limit.as_secs()
        ))
    } else {
        Ok(detail)
    }
}

fn bspline() -> Outcome {
    let start = Instant::now();
    let mut r = rng(101);
    let mut worst_sum = 0.0f64;
    let mut min_value = f64::INFINITY;
    for g in 1..=30 {
        for k in 0..=5 {
            let grid = build_knot_grid(g, k, -1.0, 1.0).map_err(|e| e.to_string())?;
            for _ in 0..1000 {
                let x = r.random_range(-1.0..=1.0);
                let b = grid.basis(x).map_err(|e| e.to_string())?;
                worst_sum = worst_sum.max((b.iter().sum::<f64>() - 1.0).abs());
                min_value = b.iter().copied().fold(min_value, f64::min);
            }
        }
    }
    let mut worst_oracle = 0.0f64;
    for _ in 0..10_000 {
        let g = r.random_range(1..=30);
        let k = r.random_range(0..=5);
        let lo = r.random_range(-3.0..0.0);
        let hi = lo + r.random_range(0.5..4.0);
        let grid = build_knot_grid(g, k, lo, hi).map_err(|e| e.to_string())?;
        let coeffs: Vec<f64> = (0..g + k).map(|_| r.random_range(-1.0..1.0)).collect();
        let x = r.random_range(lo..=hi);
        let b = grid.basis(x).map_err(|e| e.to_string())?;
        let got: f64 = b.iter().zip(&coeffs).map(|(b, c)| b * c).sum();
        let want = de_boor_value(g, k, lo, hi, &coeffs, x);
        worst_oracle = worst_oracle.max((got - want).abs());
    }
    let detail = format!(
        "max |sum B - 1| = {worst_sum:.1e} (<= 1e-9), min B = {min_value:.1e} (>= 0), max oracle diff = {worst_oracle:.1e} (<= 1e-12)"
    );
    check(
        worst_sum <= 1e-9 && min_value >= 0.0 && worst_oracle <= 1e-12,
        detail.clone(),
    )?;
    within(Duration::from_secs(10), start, detail)
}

fn gradient_error(head: &ProbeHead, x: &kanprobe::Matrix, y: &[usize]) -> f64 {
    let logits = head_forward(head, x, None).unwrap();
    let (_, dl) = softmax_cross_entropy(&logits, y).unwrap();
    let analytic = flatten(&head_backward(head, x, &dl, None).unwrap());
    relative_error(&analytic, &fd_gradient(head, x, y, 1e-5))
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let mut r = rng(202);
    let (mut worst_kan, mut worst_linear) = (0.0f64, 0.0f64);
    let instances = 25;
    for i in 0..instances {
        let d_in = r.random_range(1..=8);
        let d_out = r.random_range(2..=4);
        let g = r.random_range(1..=6);
        let k = r.random_range(0..=3);
        let n = r.random_range(3..=12);
        let x = random_matrix(&mut r, n, d_in, 1.5);
        let y: Vec<usize> = (0..n).map(|_| r.random_range(0..d_out)).collect();
        let grid = build_knot_grid(g, k, -1.0, 1.0).map_err(|e| e.to_string())?;
        let mut p = init_kan_head(d_in, d_out, grid, i);
        p.coeffs
            .iter_mut()
            .for_each(|c| *c += r.random_range(-0.5..0.5));
        worst_kan = worst_kan.max(gradient_error(&ProbeHead::Kan(p), &x, &y));
        let lin = ProbeHead::Linear(init_linear_head(d_in, d_out, i));
        worst_linear = worst_linear.max(gradient_error(&lin, &x, &y));
    }
    let detail = format!(
        "{instances} instances per head; KAN rel err {worst_kan:.1e} (<= 1e-4), linear rel err {worst_linear:.1e} (<= 1e-6)"
    );
    check(worst_kan <= 1e-4 && worst_linear <= 1e-6, detail.clone())?;
    within(Duration::from_secs(30), start, detail)
}

struct Scalar(Vec<f64>);

impl ParamTensors for Scalar {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![&self.0]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.0]
    }
}

fn optimizer() -> Outcome {
    let want = reference_adam_trace(1.0, 0.1, 5);
    let mut theta = Scalar(vec![1.0]);
    let mut state = AdamState::new(&theta);
    let mut worst = 0.0f64;
    for w in &want {
        let g = Scalar(vec![2.0 * theta.0[0]]);
        adam_step(&mut state, &mut theta, &g, 0.1).map_err(|e| e.to_string())?;
        worst = worst.max((theta.0[0] - w).abs());
    }
    let grid = build_knot_grid(3, 2, -1.0, 1.0).unwrap();
    let mut head = ProbeHead::Kan(init_kan_head(3, 2, grid.clone(), 4));
    let before = head.clone();
    let mut state = AdamState::new(&head);
    let zero = ProbeHead::Kan(KanHeadParams::zeros(3, 2, grid));
    adam_step(&mut state, &mut head, &zero, 0.1).map_err(|e| e.to_string())?;
    let unchanged = head == before;
    check(
        worst <= 1e-12 && unchanged,
        format!("5-step trace max diff {worst:.1e} (<= 1e-12), zero-gradient step unchanged: {unchanged}"),
    )
}

fn rings() -> kanprobe::data::FeatureDataset {
    standardized(SyntheticKind::Rings, 2000, 10, 2, 0.05, 1)
}

const RINGS_MARGIN: f64 = 0.30;

fn separation() -> Outcome {
    let start = Instant::now();
    let linear_ds = standardized(SyntheticKind::Linear, 2000, 20, 4, 0.0, 1);
    let mut failures = Vec::new();
    let mut parts = Vec::new();
    for head in [HeadKind::Linear, HeadKind::Kan] {
        let cfg = TrainConfig {
            head,
            max_epochs: 30,
            seed: 1,
            ..TrainConfig::default()
        };
        let m = train(&linear_ds, &cfg).map_err(|e| e.to_string())?.metrics;
        let acc = best_val_accuracy(&m);
        parts.push(format!("linear data {head} best val acc {acc:.4}"));
        if acc < 0.99 {
            failures.push(format!("{head} {acc:.4} < 0.99 on linear data"));
        }
        if head == HeadKind::Linear {
            let train_acc = m.epochs.last().map_or(0.0, |e| e.train_accuracy);
            parts.push(format!("final train acc {train_acc:.4}"));
            if train_acc < 0.99 {
                failures.push(format!("linear train acc {train_acc:.4} < 0.99"));
            }
        }
    }

    let sweep = run_sweep(&rings(), &SweepConfig::default()).map_err(|e| e.to_string())?;
    if !sweep.failures.is_empty() {
        return Err(format!("sweep runs failed: {:?}", sweep.failures));
    }
    let best_linear = sweep
        .linear_runs()
        .map(|r| best_val_accuracy(&r.metrics))
        .fold(f64::NEG_INFINITY, f64::max);
    let worst_kan = sweep
        .kan_runs()
        .map(|r| (best_val_accuracy(&r.metrics), r.key.label()))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or("no KAN runs")?;
    parts.push(format!(
        "rings min KAN {:.4} ({}) vs max linear {best_linear:.4}, margin {:.4} (>= {RINGS_MARGIN})",
        worst_kan.0,
        worst_kan.1,
        worst_kan.0 - best_linear
    ));
    if worst_kan.0 - best_linear < RINGS_MARGIN {
        failures.push("rings margin".into());
    }
    let mut detail = parts.join("; ");
    if !failures.is_empty() {
        detail = format!("{detail}; failed: {}", failures.join(", "));
    }
    check(failures.is_empty(), detail.clone())?;
    within(Duration::from_secs(180), start, detail)
}

fn convergence() -> Outcome {
    let cmp = compare_heads(&rings(), &TrainConfig::default(), 5, 3, &[1, 2, 3], 0)
        .map_err(|e| e.to_string())?;
    let (kan, linear) = cmp.mean_epochs_to_best();
    let per_seed: Vec<String> = cmp
        .entries
        .iter()
        .map(|e| {
            format!(
                "seed {}: {}/{}",
                e.seed, e.kan.epochs_to_best, e.linear.epochs_to_best
            )
        })
        .collect();
    check(
        kan <= linear,
        format!(
            "mean epochs-to-best KAN {kan:.1} vs linear {linear:.1} (KAN <= linear); kan/linear {}",
            per_seed.join(", ")
        ),
    )
}

fn training_contracts() -> Outcome {
    let ds = standardized(SyntheticKind::Linear, 300, 20, 4, 5.0, 5);
    let (xv, yv) = ds.split_view(Split::Val);
    let mut worst = 0.0f64;
    for head in [HeadKind::Kan, HeadKind::Linear] {
        let cfg = TrainConfig {
            head,
            learning_rate: 0.05,
            max_epochs: 200,
            early_stop_patience: 5,
            seed: 3,
            ..TrainConfig::default()
        };
        let a = train(&ds, &cfg).map_err(|e| e.to_string())?;
        let b = train(&ds, &cfg).map_err(|e| e.to_string())?;
        if !a.metrics.same_numbers(&b.metrics) || a.head != b.head {
            return Err(format!("{head}: replay differs"));
        }
        let m = &a.metrics;
        if m.epochs_run >= cfg.max_epochs || m.epochs_run != m.best_epoch + cfg.early_stop_patience
        {
            return Err(format!(
                "{head}: stopped at {} with best {} and patience {}",
                m.epochs_run, m.best_epoch, cfg.early_stop_patience
            ));
        }
        let (loss, _) = evaluate(&a.head, &xv, &yv).map_err(|e| e.to_string())?;
        worst = worst.max((loss - m.best_val_loss).abs());
    }
    check(
        worst <= 1e-9,
        format!("replay bit-identical, stop = best + patience, checkpoint val loss diff {worst:.1e} (<= 1e-9)"),
    )
}

fn format_contracts() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ds = standardized(SyntheticKind::AdditivePoly, 400, 6, 3, 0.1, 9);
    let a = dir.path().join("a.kanf");
    let b = dir.path().join("b.kanf");
    save_dataset(&ds, &a).map_err(|e| e.to_string())?;
    let back = load_dataset(&a).map_err(|e| e.to_string())?;
    save_dataset(&back, &b).map_err(|e| e.to_string())?;
    let read = |p: &std::path::Path| std::fs::read(p).unwrap();
    if back != ds || read(&a) != read(&b) {
        return Err("dataset round trip differs".into());
    }
    let dataset_bytes = read(&a);

    let cfg = TrainConfig {
        max_epochs: 2,
        ..TrainConfig::default()
    };
    let out = train(&ds, &cfg).map_err(|e| e.to_string())?;
    let meta = CheckpointMeta::for_run(&out.head, &cfg, &out.metrics);
    let ca = dir.path().join("a.kanc");
    let cb = dir.path().join("b.kanc");
    save_checkpoint(&out.head, &meta, &ca).map_err(|e| e.to_string())?;
    let (h, m) = load_checkpoint(&ca).map_err(|e| e.to_string())?;
    save_checkpoint(&h, &m, &cb).map_err(|e| e.to_string())?;
    if h != out.head || m != meta || read(&ca) != read(&cb) {
        return Err("checkpoint round trip differs".into());
    }
    let checkpoint_bytes = read(&ca);

    let mut seen = Vec::new();
    for (name, bytes) in [("dataset", dataset_bytes), ("checkpoint", checkpoint_bytes)] {
        let mut magic = bytes.clone();
        magic[0] ^= 0xFF;
        let truncated = bytes[..bytes.len() - 20].to_vec();
        let mut flipped = bytes.clone();
        flipped[bytes.len() / 2] ^= 0x10;
        let mut kinds = Vec::new();
        for bad in [magic, truncated, flipped] {
            let p = dir.path().join("bad");
            std::fs::write(&p, &bad).unwrap();
            let err = if name == "dataset" {
                load_dataset(&p).err()
            } else {
                load_checkpoint(&p).err()
            };
            kinds.push(match err {
                Some(Error::CorruptMagic { .. }) => "magic",
                Some(Error::Truncated { .. }) => "truncated",
                Some(Error::ChecksumMismatch { .. }) => "crc",
                other => return Err(format!("{name}: unexpected {other:?}")),
            });
        }
        if kinds != ["magic", "truncated", "crc"] {
            return Err(format!("{name}: {kinds:?}"));
        }
        seen.push(name);
    }
    Ok(format!(
        "{} round trips bit-identical; magic/truncation/crc give distinct errors",
        seen.join(" and ")
    ))
}

fn polyline_attr<'a>(svg: &'a str, attr: &str) -> Vec<&'a str> {
    svg.match_indices(&format!("{attr}=\""))
        .map(|(i, m)| {
            let rest = &svg[i + m.len()..];
            &rest[..rest.find('"').unwrap()]
        })
        .collect()
}

fn figures() -> Outcome {
    let ds = standardized(SyntheticKind::Rings, 300, 4, 2, 0.05, 3);
    let cfg = SweepConfig {
        seeds: vec![1, 2],
        base: TrainConfig {
            max_epochs: 6,
            learning_rate: 0.05,
            ..TrainConfig::default()
        },
        ..SweepConfig::default()
    };
    let result = run_sweep(&ds, &cfg).map_err(|e| e.to_string())?;
    let csv = render_metrics(&result);
    let reloaded = parse_metrics(&csv, cfg.aggregation).map_err(|e| e.to_string())?;
    let numbers: std::collections::HashSet<&str> = csv
        .lines()
        .filter(|l| !l.starts_with('#'))
        .flat_map(|l| l.split(','))
        .collect();
    let mut vertices = 0;
    for kind in FigureKind::ALL {
        let svg = render_figure(&result, kind).map_err(|e| e.to_string())?;
        if !svg.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\"")
            || !svg.trim_end().ends_with("</svg>")
        {
            return Err(format!("{kind}: not an svg document"));
        }
        if svg != render_figure(&result, kind).unwrap()
            || svg != render_figure(&reloaded, kind).unwrap()
        {
            return Err(format!("{kind}: re-emission differs"));
        }
        let values = polyline_attr(&svg, "data-values");
        let points = polyline_attr(&svg, "points");
        if values.is_empty() || values.len() != points.len() {
            return Err(format!(
                "{kind}: {} series, {} polylines",
                values.len(),
                points.len()
            ));
        }
        for (vals, pts) in values.iter().zip(&points) {
            if vals.split(' ').count() != pts.split(' ').count() {
                return Err(format!("{kind}: vertex count differs from value count"));
            }
            for v in vals.split(' ') {
                if !numbers.contains(v) {
                    return Err(format!("{kind}: {v} not in exported metrics"));
                }
                vertices += 1;
            }
        }
    }
    Ok(format!(
        "{} kinds, {vertices} vertices all in exported metrics; byte-identical on re-emission and from reloaded metrics",
        FigureKind::ALL.len()
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("B-spline correctness", bspline),
        ("Gradient correctness", gradients),
        ("Optimizer correctness", optimizer),
        ("Oracle separation", separation),
        ("Convergence-epochs measurement", convergence),
        ("Training-loop contracts", training_contracts),
        ("Format contracts", format_contracts),
        ("Figure emission", figures),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty()
            && !filter
                .iter()
                .any(|f| name.to_lowercase().contains(&f.to_lowercase()))
        {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name} [{secs:.1}s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name} [{secs:.1}s]: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
