//! Binary classification metrics and history serialization.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const CLASS_NAMES: [&str; 2] = ["benign", "malignant"];

/// `counts[i][j]`: samples of true class `i` predicted as class `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 2]; 2],
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; 2]; 2]) -> Self {
        Self { counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        (self.counts[0][0] + self.counts[1][1]) as f64 / total as f64
    }
}

pub fn confusion(predictions: &[usize], labels: &[usize]) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::InvalidData(format!(
            "{} predictions but {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (i, (&p, &y)) in predictions.iter().zip(labels).enumerate() {
        if y > 1 {
            return Err(Error::InvalidLabel { index: i, label: y });
        }
        if p > 1 {
            return Err(Error::InvalidData(format!(
                "prediction {p} at position {i} is not a class index"
            )));
        }
        cm.counts[y][p] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when any of the three involved a 0/0 and was reported as 0.
    pub degenerate: bool,
}

/// Per-class scores, indexed by class.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassScores {
    pub classes: [Scores; 2],
}

fn ratio(num: f64, den: f64, degenerate: &mut bool) -> f64 {
    if den == 0.0 {
        *degenerate = true;
        0.0
    } else {
        num / den
    }
}

pub fn class_scores(cm: &ConfusionMatrix) -> ClassScores {
    let c = cm.counts;
    let mut out = ClassScores::default();
    for k in 0..2 {
        let tp = c[k][k] as f64;
        let predicted = (c[0][k] + c[1][k]) as f64;
        let actual = (c[k][0] + c[k][1]) as f64;
        let mut degenerate = false;
        let precision = ratio(tp, predicted, &mut degenerate);
        let recall = ratio(tp, actual, &mut degenerate);
        let f1 = ratio(2.0 * precision * recall, precision + recall, &mut degenerate);
        out.classes[k] = Scores {
            precision,
            recall,
            f1,
            degenerate,
        };
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(false positive rate, true positive rate)` from (0, 0) to (1, 1).
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// Sweeps thresholds over the distinct scores in descending order; a sample
/// is predicted positive when its score is at least the threshold. A
/// `+inf` threshold contributes the (0, 0) point.
pub fn roc(scores: &[f64], labels: &[usize]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidData(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(i) = labels.iter().position(|&y| y > 1) {
        return Err(Error::InvalidLabel {
            index: i,
            label: labels[i],
        });
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::InvalidData(format!("score {s} is not finite")));
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::InvalidData(
            "ROC needs both classes among the labels".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
    }
    let mut curve = RocCurve { points, auc: 0.0 };
    curve.auc = auc(&curve);
    Ok(curve)
}

/// Trapezoidal area under the curve's points.
pub fn auc(curve: &RocCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

pub const HISTORY_HEADER: &str = "epoch,train_loss,train_acc,val_loss,val_acc";

/// Six significant digits, shortest form.
pub fn sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let digits = 5 - v.abs().log10().floor() as i32;
    let rounded: f64 = if digits >= 0 {
        format!("{:.*}", digits as usize, v).parse().unwrap()
    } else {
        format!("{:.5e}", v).parse().unwrap()
    };
    format!("{rounded}")
}

pub fn history_csv(records: &[EpochRecord]) -> String {
    let mut out = format!("{HISTORY_HEADER}\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.epoch,
            sig6(r.train_loss),
            sig6(r.train_accuracy),
            sig6(r.val_loss),
            sig6(r.val_accuracy)
        );
    }
    out
}

pub fn history_write(records: &[EpochRecord], path: &Path) -> Result<()> {
    fs::write(path, history_csv(records)).map_err(|e| Error::io(path, e))
}

pub fn history_parse(text: &str, name: &str) -> Result<Vec<EpochRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == HISTORY_HEADER => {}
        _ => return Err(Error::parse(format!("{name} line 1"), format!("expected header `{HISTORY_HEADER}`"))),
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let at = || format!("{name} line {}", i + 1);
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(Error::parse(at(), format!("expected 5 fields, got {}", fields.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::parse(at(), format!("bad number `{s}`")));
        records.push(EpochRecord {
            epoch: fields[0].parse().map_err(|_| Error::parse(at(), format!("bad epoch `{}`", fields[0])))?,
            train_loss: num(fields[1])?,
            train_accuracy: num(fields[2])?,
            val_loss: num(fields[3])?,
            val_accuracy: num(fields[4])?,
        });
    }
    Ok(records)
}

pub fn history_read(path: &Path) -> Result<Vec<EpochRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    history_parse(&text, &path.display().to_string())
}

pub fn roc_csv(curve: &RocCurve) -> String {
    let mut out = String::from("fpr,tpr\n");
    for (f, t) in &curve.points {
        let _ = writeln!(out, "{f},{t}");
    }
    out
}

pub fn roc_parse(text: &str, name: &str) -> Result<Vec<(f64, f64)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "fpr,tpr" => {}
        _ => return Err(Error::parse(format!("{name} line 1"), "expected header `fpr,tpr`")),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let bad = || Error::parse(format!("{name} line {}", i + 1), format!("bad point `{line}`"));
            let (f, t) = line.split_once(',').ok_or_else(bad)?;
            Ok((f.trim().parse().map_err(|_| bad())?, t.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}

/// Everything an evaluation reports.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub confusion: ConfusionMatrix,
    pub scores: ClassScores,
    pub loss: f64,
    /// `None` when only one class is present.
    pub roc: Option<RocCurve>,
}

impl MetricsReport {
    pub fn accuracy(&self) -> f64 {
        self.confusion.accuracy()
    }

    pub fn to_text(&self) -> String {
        let c = self.confusion.counts;
        let mut out = String::new();
        let _ = writeln!(out, "samples: {}", self.confusion.total());
        let _ = writeln!(out, "loss: {}", self.loss);
        let _ = writeln!(out, "accuracy: {}", self.accuracy());
        let _ = writeln!(out, "auc: {}", self.roc.as_ref().map_or("undefined".to_string(), |r| r.auc.to_string()));
        let _ = writeln!(out, "\n[confusion] rows = true class, columns = predicted");
        let _ = writeln!(out, "true\\pred,benign,malignant");
        for (k, name) in CLASS_NAMES.iter().enumerate() {
            let _ = writeln!(out, "{name},{},{}", c[k][0], c[k][1]);
        }
        let _ = writeln!(out, "\n[scores]");
        let _ = writeln!(out, "class,precision,recall,f1,degenerate");
        for (k, name) in CLASS_NAMES.iter().enumerate() {
            let s = self.scores.classes[k];
            let _ = writeln!(out, "{name},{},{},{},{}", s.precision, s.recall, s.f1, s.degenerate);
        }
        if let Some(r) = &self.roc {
            let _ = writeln!(out, "\n[roc]");
            out.push_str(&roc_csv(r));
        }
        out
    }
}
