use crate::error::{Error, Result};

pub const METRICS_HEADER: &str = "epoch,split,unit_index,mean_local_loss,accuracy";

/// One CSV row. Train rows carry a unit's epoch-mean local loss (the BP
/// baseline logs its cross-entropy as unit 0); validation rows carry accuracy.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricsRow {
    TrainLoss { epoch: usize, unit: usize, loss: f64 },
    Validation { epoch: usize, accuracy: f64 },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLog {
    pub rows: Vec<MetricsRow>,
}

impl MetricsLog {
    /// Epoch-mean losses per unit for `epoch` (1-based).
    pub fn unit_losses(&self, epoch: usize) -> Vec<f64> {
        self.rows
            .iter()
            .filter_map(|r| match *r {
                MetricsRow::TrainLoss { epoch: e, loss, .. } if e == epoch => Some(loss),
                _ => None,
            })
            .collect()
    }

    pub fn validation_accuracy(&self, epoch: usize) -> Option<f64> {
        self.rows.iter().find_map(|r| match *r {
            MetricsRow::Validation { epoch: e, accuracy } if e == epoch => Some(accuracy),
            _ => None,
        })
    }

    pub fn epochs(&self) -> usize {
        self.rows
            .iter()
            .map(|r| match *r {
                MetricsRow::TrainLoss { epoch, .. } | MetricsRow::Validation { epoch, .. } => epoch,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(METRICS_HEADER);
        out.push('\n');
        for row in &self.rows {
            match row {
                MetricsRow::TrainLoss { epoch, unit, loss } => {
                    out.push_str(&format!("{epoch},train,{unit},{loss},\n"))
                }
                MetricsRow::Validation { epoch, accuracy } => {
                    out.push_str(&format!("{epoch},validation,,,{accuracy}\n"))
                }
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(METRICS_HEADER) {
            return Err(Error::Config("metrics CSV header mismatch".into()));
        }
        let bad = |n: usize, line: &str| Error::Config(format!("metrics CSV line {n}: `{line}`"));
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let n = i + 2;
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad(n, line));
            }
            let epoch: usize = f[0].parse().map_err(|_| bad(n, line))?;
            let row = match (f[1], f[2], f[3], f[4]) {
                ("train", unit, loss, "") => MetricsRow::TrainLoss {
                    epoch,
                    unit: unit.parse().map_err(|_| bad(n, line))?,
                    loss: loss.parse().map_err(|_| bad(n, line))?,
                },
                ("validation", "", "", acc) => MetricsRow::Validation {
                    epoch,
                    accuracy: acc.parse().map_err(|_| bad(n, line))?,
                },
                _ => return Err(bad(n, line)),
            };
            rows.push(row);
        }
        Ok(MetricsLog { rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MetricsLog {
        let mut rows = Vec::new();
        for epoch in 1..=2 {
            for unit in 0..2 {
                rows.push(MetricsRow::TrainLoss { epoch, unit, loss: 1.0 / (epoch * 3 + unit) as f64 });
            }
            rows.push(MetricsRow::Validation { epoch, accuracy: 0.1 * epoch as f64 });
        }
        MetricsLog { rows }
    }

    #[test]
    fn schema_row_counts() {
        let csv = sample().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], METRICS_HEADER);
        assert_eq!(lines.iter().filter(|l| l.contains(",train,")).count(), 4);
        assert_eq!(lines.iter().filter(|l| l.contains(",validation,")).count(), 2);
        assert_eq!(lines.len(), 7);
    }

    #[test]
    fn parse_recovers_log() {
        let log = sample();
        assert_eq!(MetricsLog::from_csv(&log.to_csv()).unwrap(), log);
        assert_eq!(log.to_csv(), sample().to_csv());
        assert_eq!(log.unit_losses(2).len(), 2);
        assert_eq!(log.epochs(), 2);
    }

    #[test]
    fn malformed_rows_rejected() {
        assert!(MetricsLog::from_csv("nope\n").is_err());
        assert!(MetricsLog::from_csv(&format!("{METRICS_HEADER}\n1,test,0,1,\n")).is_err());
    }
}
