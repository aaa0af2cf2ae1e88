use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary confusion counts; class 0 is the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn from_predictions(labels: &[usize], predicted: &[usize]) -> Result<Self> {
        if labels.len() != predicted.len() {
            return Err(Error::shape(
                "confusion",
                format!("{} labels vs {} predictions", labels.len(), predicted.len()),
            ));
        }
        let mut c = Confusion::default();
        for (&y, &p) in labels.iter().zip(predicted) {
            match (y == 0, p == 0) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub confusion: Confusion,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    pub fn from_confusion(c: Confusion) -> Self {
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Metrics {
            accuracy: ratio(c.tp + c.tn, c.total()),
            recall,
            precision,
            f1,
            confusion: c,
        }
    }

    pub fn from_predictions(labels: &[usize], predicted: &[usize]) -> Result<Self> {
        Ok(Self::from_confusion(Confusion::from_predictions(labels, predicted)?))
    }

    pub const CSV_HEADER: &'static str = "background,accuracy,recall,precision,f1";

    pub fn csv_row(&self, background: &str) -> String {
        format!(
            "{background},{:.4},{:.4},{:.4},{:.4}",
            self.accuracy, self.recall, self.precision, self.f1
        )
    }
}
