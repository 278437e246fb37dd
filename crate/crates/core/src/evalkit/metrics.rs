use serde::{Deserialize, Serialize};

use super::EvalError;

fn check(predictions: &[usize], labels: &[usize]) -> Result<(), EvalError> {
    if predictions.len() != labels.len() {
        return Err(EvalError::LengthMismatch { predictions: predictions.len(), labels: labels.len() });
    }
    if labels.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(())
}

pub fn top1_accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64, EvalError> {
    check(predictions, labels)?;
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Counts indexed `[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

pub fn confusion_matrix(predictions: &[usize], labels: &[usize], classes: usize) -> Result<ConfusionMatrix, EvalError> {
    check(predictions, labels)?;
    let mut counts = vec![vec![0u64; classes]; classes];
    for (&p, &l) in predictions.iter().zip(labels) {
        if p >= classes || l >= classes {
            return Err(EvalError::IndexOutOfRange { index: p.max(l), classes });
        }
        counts[l][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

/// Per-class diagnostics; ratios with a zero denominator are reported as 0 and flagged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub name: String,
    pub support: u64,
    pub predicted: u64,
    pub correct: u64,
    pub recall: f64,
    pub precision: f64,
    pub recall_undefined: bool,
    pub precision_undefined: bool,
    /// Has test samples but none classified correctly.
    pub never_predicted: bool,
}

impl ConfusionMatrix {
    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.trace() as f64 / self.total().max(1) as f64
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.classes()).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }

    pub fn recall(&self) -> Vec<f64> {
        self.per_class(&vec![String::new(); self.classes()]).iter().map(|m| m.recall).collect()
    }

    pub fn precision(&self) -> Vec<f64> {
        self.per_class(&vec![String::new(); self.classes()]).iter().map(|m| m.precision).collect()
    }

    pub fn per_class(&self, names: &[String]) -> Vec<ClassMetrics> {
        let rows = self.row_sums();
        let cols = self.col_sums();
        (0..self.classes())
            .map(|i| {
                let correct = self.counts[i][i];
                let ratio = |d: u64| if d == 0 { 0.0 } else { correct as f64 / d as f64 };
                ClassMetrics {
                    name: names.get(i).cloned().unwrap_or_default(),
                    support: rows[i],
                    predicted: cols[i],
                    correct,
                    recall: ratio(rows[i]),
                    precision: ratio(cols[i]),
                    recall_undefined: rows[i] == 0,
                    precision_undefined: cols[i] == 0,
                    never_predicted: rows[i] > 0 && correct == 0,
                }
            })
            .collect()
    }

    /// Header row and column of class names.
    pub fn to_csv(&self, names: &[String]) -> String {
        let mut out = String::from("true\\predicted");
        for n in names {
            out.push(',');
            out.push_str(&csv_field(n));
        }
        out.push('\n');
        for (i, row) in self.counts.iter().enumerate() {
            out.push_str(&csv_field(names.get(i).map_or("", String::as_str)));
            for v in row {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    /// Row-normalized grayscale heatmap, `cell`×`cell` pixels per entry, largest
    /// normalized value white.
    pub fn heatmap(&self, cell: usize) -> crate::imaging::Frame {
        let k = self.classes().max(1);
        let cell = cell.max(1);
        let rows = self.row_sums();
        let norm: Vec<Vec<f64>> = self
            .counts
            .iter()
            .zip(&rows)
            .map(|(r, &s)| r.iter().map(|&v| if s == 0 { 0.0 } else { v as f64 / s as f64 }).collect())
            .collect();
        let max = norm.iter().flatten().copied().fold(0.0, f64::max);
        let side = k * cell;
        let mut px = vec![0u8; side * side * 3];
        for (i, row) in norm.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let g = if max > 0.0 { (255.0 * v / max).round() as u8 } else { 0 };
                for y in i * cell..(i + 1) * cell {
                    for x in j * cell..(j + 1) * cell {
                        px[(y * side + x) * 3..(y * side + x) * 3 + 3].fill(g);
                    }
                }
            }
        }
        crate::imaging::Frame::new(side, side, px, 0.0).expect("non-empty heatmap")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Evaluation summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub classes: Vec<String>,
    pub samples: u64,
    pub top1: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
}

impl RunMetrics {
    pub fn new(predictions: &[usize], labels: &[usize], classes: &[String]) -> Result<Self, EvalError> {
        let confusion = confusion_matrix(predictions, labels, classes.len())?;
        Ok(Self {
            classes: classes.to_vec(),
            samples: confusion.total(),
            top1: top1_accuracy(predictions, labels)?,
            per_class: confusion.per_class(classes),
            confusion,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDelta {
    pub name: String,
    pub recall_a: f64,
    pub recall_b: f64,
    pub delta: f64,
}

/// `b − a` deltas of overall accuracy and per-class recall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub top1_a: f64,
    pub top1_b: f64,
    pub top1_delta: f64,
    pub per_class: Vec<ClassDelta>,
    /// Class with the most negative delta, if any class got worse.
    pub worst_regression: Option<ClassDelta>,
}

pub fn compare_runs(a: &RunMetrics, b: &RunMetrics) -> Result<DeltaReport, EvalError> {
    if a.classes != b.classes {
        return Err(EvalError::ClassMismatch);
    }
    let per_class: Vec<ClassDelta> = a
        .per_class
        .iter()
        .zip(&b.per_class)
        .map(|(x, y)| ClassDelta { name: x.name.clone(), recall_a: x.recall, recall_b: y.recall, delta: y.recall - x.recall })
        .collect();
    let worst_regression = per_class
        .iter()
        .filter(|d| d.delta < 0.0)
        .min_by(|p, q| p.delta.total_cmp(&q.delta))
        .cloned();
    Ok(DeltaReport { top1_a: a.top1, top1_b: b.top1, top1_delta: b.top1 - a.top1, per_class, worst_regression })
}
