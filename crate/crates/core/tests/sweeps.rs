mod common;

use std::collections::HashSet;

use common::standardized;
use kanprobe::data::SyntheticKind;
use kanprobe::experiments::{
    aggregate_runs, compare_heads, export_metrics, load_metrics, render_metrics, run_sweep,
    AggregationMode, Metric, RunKey, SweepConfig,
};
use kanprobe::figures::{emit_figure, render_figure, FigureKind};
use kanprobe::optim::TrainConfig;
use kanprobe::Error;

fn small_sweep() -> SweepConfig {
    SweepConfig {
        grid_sizes: vec![3, 5, 10, 20],
        degrees: vec![1, 3],
        seeds: vec![1, 2],
        base: TrainConfig {
            max_epochs: 8,
            early_stop_patience: 2,
            learning_rate: 0.05,
            ..TrainConfig::default()
        },
        aggregation: AggregationMode::OverDegrees,
        workers: 4,
    }
}

fn section<'a>(text: &'a str, name: &str) -> Vec<&'a str> {
    let start = text.find(&format!("# {name}\n")).unwrap();
    text[start..]
        .lines()
        .skip(2)
        .take_while(|l| !l.is_empty())
        .collect()
}

#[test]
fn one_by_one_by_one() {
    let ds = standardized(SyntheticKind::Rings, 200, 3, 2, 0.0, 1);
    let cfg = SweepConfig {
        grid_sizes: vec![5],
        degrees: vec![3],
        seeds: vec![7],
        ..small_sweep()
    };
    let r = run_sweep(&ds, &cfg).unwrap();
    assert_eq!(r.runs.len(), 2);
    assert_eq!(r.kan_runs().count(), 1);
    assert_eq!(r.linear_runs().count(), 1);
}

#[test]
fn repeated_seed_has_zero_spread() {
    let ds = standardized(SyntheticKind::Rings, 200, 3, 2, 0.0, 1);
    let cfg = SweepConfig {
        grid_sizes: vec![5],
        degrees: vec![3],
        seeds: vec![4, 4, 4],
        aggregation: AggregationMode::OverSeeds,
        ..small_sweep()
    };
    let r = run_sweep(&ds, &cfg).unwrap();
    assert_eq!(r.runs.len(), 6);
    for series in &r.aggregates {
        for p in &series.points {
            assert_eq!(p.count, 3);
            assert_eq!(p.std, [0.0; 4]);
        }
    }
}

#[test]
fn concurrency_does_not_change_results() {
    let ds = standardized(SyntheticKind::Rings, 300, 4, 2, 0.05, 3);
    let parallel = run_sweep(&ds, &small_sweep()).unwrap();
    let serial = run_sweep(
        &ds,
        &SweepConfig {
            workers: 1,
            ..small_sweep()
        },
    )
    .unwrap();
    assert_eq!(render_metrics(&parallel), render_metrics(&serial));
    let keys: Vec<RunKey> = parallel.runs.iter().map(|r| r.key).collect();
    assert_eq!(keys, small_sweep().run_keys());
}

#[test]
fn aggregates_match_direct_recomputation() {
    let ds = standardized(SyntheticKind::Rings, 300, 4, 2, 0.05, 3);
    let r = run_sweep(&ds, &small_sweep()).unwrap();
    let g5 = r.aggregate(AggregationMode::OverDegrees);
    let series = g5.iter().find(|s| s.group == "G=5").unwrap();
    let members: Vec<_> = r
        .kan_runs()
        .filter(|x| x.key.grid_size == Some(5))
        .collect();
    assert_eq!(members.len(), 4);
    let longest = members.iter().map(|m| m.metrics.epochs_run).max().unwrap();
    assert_eq!(series.points.len(), longest);
    for p in &series.points {
        let vals: Vec<f64> = members
            .iter()
            .filter_map(|m| m.metrics.epochs.get(p.epoch - 1))
            .map(|e| e.val_loss)
            .collect();
        assert_eq!(p.count, vals.len());
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
        assert!((p.mean[Metric::ValLoss as usize] - mean).abs() <= 1e-12);
        assert!((p.std[Metric::ValLoss as usize] - var.sqrt()).abs() <= 1e-12);
    }
    let metrics: Vec<_> = members.iter().map(|m| &m.metrics).collect();
    assert_eq!(aggregate_runs(&metrics), series.points);
}

#[test]
fn export_layout_and_reload() {
    let dir = tempfile::tempdir().unwrap();
    let ds = standardized(SyntheticKind::Rings, 300, 4, 2, 0.05, 3);
    let r = run_sweep(&ds, &small_sweep()).unwrap();
    let path = dir.path().join("m.csv");
    export_metrics(&r, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    export_metrics(&r, &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), text);

    let rows = section(&text, "runs");
    let total: usize = r.runs.iter().map(|x| x.metrics.epochs_run).sum();
    assert_eq!(rows.len(), total);

    let summary = section(&text, "summary");
    assert_eq!(summary.len(), r.runs.len());
    for (line, run) in summary.iter().zip(&r.runs) {
        let cols: Vec<&str> = line.split(',').collect();
        let train_acc: f64 = cols[8].parse().unwrap();
        let val_acc: f64 = cols[9].parse().unwrap();
        let gap: f64 = cols[10].parse().unwrap();
        assert_eq!(gap, train_acc - val_acc);
        assert_eq!(cols[5].parse::<usize>().unwrap(), run.metrics.best_epoch);
    }

    let back = load_metrics(&path, AggregationMode::OverDegrees).unwrap();
    assert_eq!(render_metrics(&back), text);
}

#[test]
fn compare_matches_sweep_runs() {
    let ds = standardized(SyntheticKind::Rings, 300, 4, 2, 0.05, 3);
    let cfg = small_sweep();
    let cmp = compare_heads(&ds, &cfg.base, 5, 3, &[1, 2], 2).unwrap();
    let sweep = run_sweep(&ds, &cfg).unwrap();
    assert_eq!(cmp.entries.len(), 2);
    for e in &cmp.entries {
        let lin = sweep.run(&RunKey::linear(e.seed)).unwrap();
        let kan = sweep.run(&RunKey::kan(5, 3, e.seed)).unwrap();
        assert_eq!(e.linear.best_val_loss, lin.metrics.best_val_loss);
        assert_eq!(e.linear.epochs_to_best, lin.metrics.best_epoch);
        assert_eq!(e.kan.epochs_to_best, kan.metrics.best_epoch);
        assert_eq!(e.kan.param_count, 4 * 2 * 9 + 2);
        assert_eq!(e.linear.param_count, 4 * 2 + 2);
    }
    let table = cmp.to_table();
    assert!(table.contains("epochs_to_best"));
    assert_eq!(table.lines().count(), 1 + 2 * 2 + 2);
}

#[test]
fn run_failures_are_annotated() {
    let ds = standardized(SyntheticKind::Rings, 200, 3, 2, 0.0, 1);
    let cfg = SweepConfig {
        grid_sizes: vec![5],
        degrees: vec![3],
        seeds: vec![1],
        base: TrainConfig {
            learning_rate: f64::MAX,
            max_epochs: 3,
            ..TrainConfig::default()
        },
        ..small_sweep()
    };
    let r = run_sweep(&ds, &cfg).unwrap();
    for (key, msg) in &r.failures {
        assert!(msg.contains(&key.label()), "{msg}");
    }
    assert_eq!(r.runs.len() + r.failures.len(), 2);
    assert!(!r.failures.is_empty());
}

fn numbers_in_csv(text: &str) -> HashSet<String> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .flat_map(|l| l.split(','))
        .map(str::to_owned)
        .collect()
}

fn polyline_attr<'a>(svg: &'a str, attr: &str) -> Vec<&'a str> {
    svg.match_indices(&format!("{attr}=\""))
        .map(|(i, m)| {
            let rest = &svg[i + m.len()..];
            &rest[..rest.find('"').unwrap()]
        })
        .collect()
}

#[test]
fn figures_are_consistent_with_exported_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let ds = standardized(SyntheticKind::Rings, 300, 4, 2, 0.05, 3);
    let r = run_sweep(&ds, &small_sweep()).unwrap();
    let csv = render_metrics(&r);
    let present = numbers_in_csv(&csv);
    for kind in FigureKind::ALL {
        let path = dir.path().join(format!("{kind}.svg"));
        emit_figure(&r, kind, &path).unwrap();
        let svg = std::fs::read_to_string(&path).unwrap();
        assert!(svg.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\""));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg, render_figure(&r, kind).unwrap());
        let values = polyline_attr(&svg, "data-values");
        let points = polyline_attr(&svg, "points");
        assert_eq!(values.len(), points.len());
        for (vals, pts) in values.iter().zip(&points) {
            assert_eq!(vals.split(' ').count(), pts.split(' ').count());
            for v in vals.split(' ') {
                assert!(present.contains(v), "{kind}: {v} not in metrics");
            }
        }
        let expected = match kind {
            FigureKind::ValAccByK => 2,
            FigureKind::KanVsLinear => 2,
            _ => 4,
        };
        assert_eq!(values.len(), expected, "{kind}");
        assert_eq!(svg.matches("class=\"legend-entry\"").count(), expected);
    }
}

#[test]
fn figures_from_reloaded_metrics_are_identical() {
    let ds = standardized(SyntheticKind::Rings, 300, 4, 2, 0.05, 3);
    let r = run_sweep(&ds, &small_sweep()).unwrap();
    let back =
        kanprobe::experiments::parse_metrics(&render_metrics(&r), AggregationMode::OverDegrees)
            .unwrap();
    for kind in FigureKind::ALL {
        assert_eq!(
            render_figure(&r, kind).unwrap(),
            render_figure(&back, kind).unwrap()
        );
    }
}

#[test]
fn empty_result_is_missing_series() {
    let empty =
        kanprobe::experiments::SweepResult::from_runs(Vec::new(), AggregationMode::OverDegrees);
    for kind in FigureKind::ALL {
        assert!(matches!(
            render_figure(&empty, kind),
            Err(Error::MissingSeries(_))
        ));
    }
}
