use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::EvalError;

/// Binary confusion counts with `true` as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn tally(preds: &[bool], labels: &[bool]) -> Result<Self, EvalError> {
        if preds.len() != labels.len() {
            return Err(EvalError::LengthMismatch {
                left: preds.len(),
                right: labels.len(),
            });
        }
        if preds.is_empty() {
            return Err(EvalError::Empty);
        }
        let mut c = Confusion::default();
        for (&p, &l) in preds.iter().zip(labels) {
            c.add(p, l);
        }
        Ok(c)
    }

    pub fn add(&mut self, pred: bool, label: bool) {
        match (pred, label) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall; 0 when both are 0.
    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(flatten)]
    pub counts: Confusion,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    /// Present only when stage artifacts were scored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_f1: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_tokens: Option<f64>,
    pub n_samples: usize,
}

impl EvalReport {
    pub fn from_confusion(counts: Confusion) -> Self {
        EvalReport {
            counts,
            precision: counts.precision(),
            recall: counts.recall(),
            f1: counts.f1(),
            accuracy: counts.accuracy(),
            stage_f1: None,
            mean_tokens: None,
            n_samples: counts.total(),
        }
    }

    pub fn with_stage_f1(mut self, f1: [f64; 4]) -> Self {
        self.stage_f1 = Some(f1);
        self
    }

    pub fn with_mean_tokens(mut self, tokens: f64) -> Self {
        self.mean_tokens = Some(tokens);
        self
    }

    /// Plain-text table, percentages with two decimals.
    pub fn to_table(&self) -> String {
        let c = &self.counts;
        let mut out = String::new();
        let _ = writeln!(out, "samples    {}", self.n_samples);
        let _ = writeln!(out, "TP/FP/FN/TN {}/{}/{}/{}", c.tp, c.fp, c.fn_, c.tn);
        let _ = writeln!(out, "F1         {:6.2}", 100.0 * self.f1);
        let _ = writeln!(out, "precision  {:6.2}", 100.0 * self.precision);
        let _ = writeln!(out, "recall     {:6.2}", 100.0 * self.recall);
        let _ = writeln!(out, "accuracy   {:6.2}", 100.0 * self.accuracy);
        if let Some(t) = self.mean_tokens {
            let _ = writeln!(out, "tokens     {t:.1} per sample");
        }
        if let Some(s) = self.stage_f1 {
            let _ = writeln!(
                out,
                "stage F1   {}",
                s.map(|v| format!("{:.2}", 100.0 * v)).join("  ")
            );
        }
        out
    }
}

/// Standard binary metrics over paired predictions and labels.
pub fn classification_metrics(preds: &[bool], labels: &[bool]) -> Result<EvalReport, EvalError> {
    Confusion::tally(preds, labels).map(EvalReport::from_confusion)
}
