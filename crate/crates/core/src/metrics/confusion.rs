use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Cell {
    Tp,
    Fp,
    Tn,
    Fn,
}

impl Cell {
    /// A hit is a positive prediction; miss and bypass are negative.
    pub fn classify(hit: bool, reusable: bool) -> Self {
        match (hit, reusable) {
            (true, true) => Cell::Tp,
            (true, false) => Cell::Fp,
            (false, true) => Cell::Fn,
            (false, false) => Cell::Tn,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Cell::Tp => "TP",
            Cell::Fp => "FP",
            Cell::Tn => "TN",
            Cell::Fn => "FN",
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        Self { tp, fp, tn, fn_ }
    }

    pub fn record(&mut self, cell: Cell) {
        match cell {
            Cell::Tp => self.tp += 1,
            Cell::Fp => self.fp += 1,
            Cell::Tn => self.tn += 1,
            Cell::Fn => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn scores(&self) -> Scores {
        score(self, 1.0).expect("beta 1 is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f_beta: f64,
    pub accuracy: f64,
    /// Set when the metric was 0/0 and reported as 0.
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f_beta_undefined: bool,
    pub accuracy_undefined: bool,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// Precision, recall, F-beta and accuracy. Zero denominators yield 0 with
/// the matching `*_undefined` flag set.
pub fn score(counts: &ConfusionCounts, beta: f64) -> Result<Scores> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidInput(format!("beta must be positive, got {beta}")));
    }
    let c = counts;
    let (precision, precision_undefined) = ratio(c.tp, c.tp + c.fp);
    let (recall, recall_undefined) = ratio(c.tp, c.tp + c.fn_);
    let (accuracy, accuracy_undefined) = ratio(c.tp + c.tn, c.total());
    let b2 = beta * beta;
    let den = b2 * precision + recall;
    let (f_beta, f_beta_undefined) = if den == 0.0 {
        (0.0, true)
    } else {
        ((1.0 + b2) * precision * recall / den, false)
    };
    Ok(Scores {
        precision,
        recall,
        f_beta,
        accuracy,
        precision_undefined,
        recall_undefined,
        f_beta_undefined,
        accuracy_undefined,
    })
}
