//! Plain-text SVG line charts.

use std::fmt::Write as _;

use crate::metrics::EpochRecord;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];

pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
}

/// Data range to pixel mapping.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Frame {
    fn fit(series: &[Series]) -> Frame {
        let span = |vals: Vec<f64>| {
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if !lo.is_finite() || !hi.is_finite() {
                (0.0, 1.0)
            } else if lo == hi {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        let all = || series.iter().flat_map(|s| s.points.iter());
        Frame {
            x: span(all().map(|p| p.0).collect()),
            y: span(all().map(|p| p.1).collect()),
        }
    }

    pub fn px(&self, x: f64, y: f64) -> (f64, f64) {
        let fx = (x - self.x.0) / (self.x.1 - self.x.0);
        let fy = (y - self.y.0) / (self.y.1 - self.y.0);
        (
            LEFT + fx * (WIDTH - LEFT - RIGHT),
            HEIGHT - BOTTOM - fy * (HEIGHT - TOP - BOTTOM),
        )
    }
}

/// Formats a pixel coordinate pair the way polylines store it.
pub fn coord(p: (f64, f64)) -> String {
    format!("{:.2},{:.2}", p.0, p.1)
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    frame: Option<Frame>,
    chance_diagonal: bool,
) -> String {
    let f = frame.unwrap_or_else(|| Frame::fit(series));
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (x0, y0) = f.px(f.x.0, f.y.0);
    let (x1, y1) = f.px(f.x.1, f.y.1);
    let _ = writeln!(
        s,
        r#"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = f.x.0 + t * (f.x.1 - f.x.0);
        let yv = f.y.0 + t * (f.y.1 - f.y.0);
        let (px, _) = f.px(xv, f.y.0);
        let (_, py) = f.px(f.x.0, yv);
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{y0:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y0 + 5.0,
            y0 + 18.0,
            tick(xv)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{x0:.2}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            py + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
    if chance_diagonal {
        let _ = writeln!(
            s,
            r##"<line class="chance" x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y1:.2}" stroke="#888888" stroke-dasharray="6 4"/>"##
        );
    }
    for (i, series) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = series.points.iter().map(|&(x, y)| coord(f.px(x, y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline data-series="{}" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            escape(series.name),
            pts.join(" ")
        );
        let ly = TOP + 16.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            x1 - 150.0,
            x1 - 125.0,
            x1 - 118.0,
            ly + 4.0,
            escape(series.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn epoch_series<'a>(history: &[EpochRecord], name: &'a str, f: impl Fn(&EpochRecord) -> f64) -> Series<'a> {
    Series {
        name,
        points: history.iter().map(|r| (r.epoch as f64, f(r))).collect(),
    }
}

pub fn accuracy_svg(history: &[EpochRecord]) -> String {
    let series = [
        epoch_series(history, "training", |r| r.train_accuracy),
        epoch_series(history, "validation", |r| r.val_accuracy),
    ];
    line_chart("Training and Validation Accuracy", "epoch", "accuracy", &series, None, false)
}

pub fn loss_svg(history: &[EpochRecord]) -> String {
    let series = [
        epoch_series(history, "training", |r| r.train_loss),
        epoch_series(history, "validation", |r| r.val_loss),
    ];
    line_chart("Training and Validation Loss", "epoch", "loss", &series, None, false)
}

pub const ROC_FRAME: Frame = Frame {
    x: (0.0, 1.0),
    y: (0.0, 1.0),
};

pub fn roc_svg(points: &[(f64, f64)], auc: Option<f64>) -> String {
    let name = match auc {
        Some(a) => format!("ROC (AUC = {a:.3})"),
        None => "ROC".to_string(),
    };
    let series = [Series {
        name: &name,
        points: points.to_vec(),
    }];
    line_chart(
        "ROC Curve",
        "false positive rate",
        "true positive rate",
        &series,
        Some(ROC_FRAME),
        true,
    )
}

/// Number of vertices in each `<polyline>` of an SVG document.
pub fn polyline_lengths(svg: &str) -> Vec<usize> {
    svg.lines()
        .filter(|l| l.starts_with("<polyline"))
        .filter_map(|l| l.split("points=\"").nth(1))
        .map(|p| p.split('"').next().unwrap_or("").split_whitespace().count())
        .collect()
}
