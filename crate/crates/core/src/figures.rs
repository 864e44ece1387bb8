//! SVG line charts of sweep metrics.
//!
//! Layout is fixed: an 800x500 canvas, plot area from (70, 50) to (620, 440),
//! legend to the right of the plot area, five y ticks and at most ten x ticks.
//! Every `<polyline>` carries `data-epochs` and `data-values` attributes with
//! the exact numbers written to the metrics file, so a chart can be checked
//! against the data without inverting pixel coordinates.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::experiments::{AggregateSeries, AggregationMode, Metric, SweepResult};

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 500.0;
const PLOT_LEFT: f64 = 70.0;
const PLOT_RIGHT: f64 = 620.0;
const PLOT_TOP: f64 = 50.0;
const PLOT_BOTTOM: f64 = 440.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FigureKind {
    ValAccByGrid,
    ValLossByGrid,
    TrainLossByGrid,
    ValAccByK,
    KanVsLinear,
}

impl FigureKind {
    pub const ALL: [FigureKind; 5] = [
        FigureKind::ValAccByGrid,
        FigureKind::ValLossByGrid,
        FigureKind::TrainLossByGrid,
        FigureKind::ValAccByK,
        FigureKind::KanVsLinear,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FigureKind::ValAccByGrid => "val_acc_by_grid",
            FigureKind::ValLossByGrid => "val_loss_by_grid",
            FigureKind::TrainLossByGrid => "train_loss_by_grid",
            FigureKind::ValAccByK => "val_acc_by_k",
            FigureKind::KanVsLinear => "kan_vs_linear",
        }
    }

    pub fn metric(self) -> Metric {
        match self {
            FigureKind::ValAccByGrid | FigureKind::ValAccByK | FigureKind::KanVsLinear => {
                Metric::ValAccuracy
            }
            FigureKind::ValLossByGrid => Metric::ValLoss,
            FigureKind::TrainLossByGrid => Metric::TrainLoss,
        }
    }

    fn y_label(self) -> &'static str {
        match self.metric() {
            Metric::ValAccuracy => "Validation accuracy",
            Metric::ValLoss => "Validation loss",
            Metric::TrainLoss => "Training loss",
            Metric::TrainAccuracy => "Training accuracy",
        }
    }
}

impl fmt::Display for FigureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FigureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FigureKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown figure kind {s:?}")))
    }
}

/// One plotted line: the aggregate it came from and the values drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub label: String,
    pub epochs: Vec<usize>,
    pub values: Vec<f64>,
}

impl PlotSeries {
    fn from_aggregate(series: &AggregateSeries, metric: Metric, label: String) -> Self {
        PlotSeries {
            label,
            epochs: series.points.iter().map(|p| p.epoch).collect(),
            values: series
                .points
                .iter()
                .map(|p| p.mean[metric as usize])
                .collect(),
        }
    }
}

/// The chart a figure kind draws from `result`: title and series.
pub fn figure_series(result: &SweepResult, kind: FigureKind) -> Result<(String, Vec<PlotSeries>)> {
    let metric = kind.metric();
    let pooled = |fallback: AggregationMode| {
        if result.aggregation == AggregationMode::OverSeeds {
            AggregationMode::OverSeeds
        } else {
            fallback
        }
    };
    let (mode, what) = match kind {
        FigureKind::ValAccByGrid => (pooled(AggregationMode::OverDegrees), "Validation Accuracy"),
        FigureKind::ValLossByGrid => (pooled(AggregationMode::OverDegrees), "Validation Loss"),
        FigureKind::TrainLossByGrid => (pooled(AggregationMode::OverDegrees), "Training Loss"),
        FigureKind::ValAccByK => (
            pooled(AggregationMode::OverGridSizes),
            "Validation Accuracy",
        ),
        FigureKind::KanVsLinear => {
            let (g, k) = result
                .best_kan_config()
                .ok_or_else(|| Error::MissingSeries("kan".into()))?;
            let group = format!("G={g} k={k}");
            let kan = result
                .aggregate(AggregationMode::OverSeeds)
                .into_iter()
                .find(|s| s.group == group)
                .ok_or_else(|| Error::MissingSeries(group.clone()))?;
            let linear = result
                .linear_aggregate()
                .ok_or_else(|| Error::MissingSeries("linear".into()))?;
            let title = format!(
                "Validation Accuracy Comparison between KAN ({group}) and Linear Probing ({})",
                AggregationMode::OverSeeds.describe()
            );
            return Ok((
                title,
                vec![
                    PlotSeries::from_aggregate(&kan, metric, format!("KAN {group}")),
                    PlotSeries::from_aggregate(&linear, metric, "Linear".into()),
                ],
            ));
        }
    };
    let by = if matches!(kind, FigureKind::ValAccByK) {
        "Spline Degrees"
    } else {
        "Grid Sizes"
    };
    let groups = result.aggregate(mode);
    if groups.is_empty() {
        let missing = if by == "Grid Sizes" {
            "grid size"
        } else {
            "degree"
        };
        return Err(Error::MissingSeries(missing.into()));
    }
    let title = format!(
        "Averaged {what} over Epochs for Different {by} ({})",
        mode.describe()
    );
    let series = groups
        .iter()
        .map(|s| PlotSeries::from_aggregate(s, metric, s.group.clone()))
        .collect();
    Ok((title, series))
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

/// Renders a line chart as a standalone SVG document.
pub fn render_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[PlotSeries],
) -> Result<String> {
    if series.is_empty() {
        return Err(Error::MissingSeries("any".into()));
    }
    if let Some(s) = series.iter().find(|s| s.values.is_empty()) {
        return Err(Error::MissingSeries(s.label.clone()));
    }
    let max_epoch = series
        .iter()
        .flat_map(|s| s.epochs.iter().copied())
        .max()
        .unwrap_or(1)
        .max(2);
    let finite = series
        .iter()
        .flat_map(|s| s.values.iter().copied())
        .filter(|v| v.is_finite());
    let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    } else {
        let pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
    }
    let x = |e: usize| {
        PLOT_LEFT + (e as f64 - 1.0) / (max_epoch as f64 - 1.0) * (PLOT_RIGHT - PLOT_LEFT)
    };
    let y = |v: f64| {
        let v = if v.is_finite() { v.clamp(lo, hi) } else { hi };
        PLOT_BOTTOM - (v - lo) / (hi - lo) * (PLOT_BOTTOM - PLOT_TOP)
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text class="title" x="{}" y="28" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect class="plot-area" x="{PLOT_LEFT}" y="{PLOT_TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        PLOT_RIGHT - PLOT_LEFT,
        PLOT_BOTTOM - PLOT_TOP
    );

    for i in 0..=4 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        let py = y(v);
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{py:.2}" x2="{PLOT_LEFT}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v:.3}</text>"##,
            PLOT_LEFT - 5.0,
            PLOT_LEFT - 8.0,
            py + 4.0
        );
    }
    let step = max_epoch.div_ceil(10).max(1);
    let mut e = 1;
    while e <= max_epoch {
        let px = x(e);
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{PLOT_BOTTOM}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{e}</text>"#,
            PLOT_BOTTOM + 5.0,
            PLOT_BOTTOM + 18.0
        );
        e += step;
    }
    let _ = writeln!(
        s,
        r#"<text class="x-label" x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (PLOT_LEFT + PLOT_RIGHT) / 2.0,
        PLOT_BOTTOM + 40.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text class="y-label" x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
        (PLOT_TOP + PLOT_BOTTOM) / 2.0,
        (PLOT_TOP + PLOT_BOTTOM) / 2.0,
        escape(y_label)
    );

    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = ser
            .epochs
            .iter()
            .zip(&ser.values)
            .map(|(&e, &v)| format!("{:.2},{:.2}", x(e), y(v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="series" data-label="{}" data-epochs="{}" data-values="{}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            escape(&ser.label),
            join(&ser.epochs),
            join(&ser.values),
            points.join(" ")
        );
    }

    let _ = writeln!(s, r#"<g class="legend">"#);
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let ly = PLOT_TOP + 10.0 + 20.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<g class="legend-entry"><line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text></g>"#,
            PLOT_RIGHT + 15.0,
            PLOT_RIGHT + 40.0,
            PLOT_RIGHT + 46.0,
            ly + 4.0,
            escape(&ser.label)
        );
    }
    s.push_str("</g>\n</svg>\n");
    Ok(s)
}

pub fn render_figure(result: &SweepResult, kind: FigureKind) -> Result<String> {
    let (title, series) = figure_series(result, kind)?;
    render_chart(&title, "Epoch", kind.y_label(), &series)
}

pub fn emit_figure(result: &SweepResult, kind: FigureKind, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, render_figure(result, kind)?)?;
    Ok(())
}
