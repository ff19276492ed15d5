//! Append-only metrics CSV.
//!
//! Header: `epoch,example,mean_reward,hidden_rate,train_acc,test_acc`.
//!
//! `example` is the number of training examples processed so far in the run.
//! Rows written every `log_every` examples summarize the examples since the
//! previous row; the last row of each epoch summarizes the whole epoch.
//! `train_acc` is the fraction of those examples whose read-out circuit with
//! the largest summed spiking probability (while clamped) matched the label.
//! `test_acc` is empty when the test set was not evaluated for that row.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

pub const HEADER: &str = "epoch,example,mean_reward,hidden_rate,train_acc,test_acc";

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub epoch: usize,
    pub example: usize,
    pub mean_reward: f64,
    pub hidden_rate: f64,
    pub train_acc: f64,
    pub test_acc: Option<f64>,
}

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "{},{},{},{},{},",
            self.epoch, self.example, self.mean_reward, self.hidden_rate, self.train_acc
        );
        if let Some(a) = self.test_acc {
            write!(s, "{a}").unwrap();
        }
        s
    }

    pub fn parse(line: &str) -> anyhow::Result<Self> {
        let f: Vec<&str> = line.split(',').collect();
        anyhow::ensure!(f.len() == 6, "expected 6 fields in {line:?}");
        Ok(MetricsRow {
            epoch: f[0].parse()?,
            example: f[1].parse()?,
            mean_reward: f[2].parse()?,
            hidden_rate: f[3].parse()?,
            train_acc: f[4].parse()?,
            test_acc: if f[5].is_empty() { None } else { Some(f[5].parse()?) },
        })
    }
}

pub struct MetricsWriter {
    out: std::io::BufWriter<std::fs::File>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> anyhow::Result<Self> {
        let file = std::fs::File::create(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        let mut out = std::io::BufWriter::new(file);
        writeln!(out, "{HEADER}")?;
        Ok(MetricsWriter { out })
    }

    pub fn write(&mut self, row: &MetricsRow) -> anyhow::Result<()> {
        writeln!(self.out, "{}", row.to_csv())?;
        Ok(())
    }

    pub fn flush(&mut self) -> anyhow::Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Reads a metrics file, checking the header.
pub fn read_metrics(path: &Path) -> anyhow::Result<Vec<MetricsRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    anyhow::ensure!(lines.next() == Some(HEADER), "{}: bad header", path.display());
    lines.map(MetricsRow::parse).collect()
}

/// Running sums for one logging window.
#[derive(Clone, Debug, Default)]
pub struct Window {
    pub count: usize,
    reward: f64,
    rate: f64,
    correct: usize,
}

impl Window {
    pub fn add(&mut self, reward: f64, hidden_rate: f64, correct: bool) {
        self.count += 1;
        self.reward += reward;
        self.rate += hidden_rate;
        self.correct += correct as usize;
    }

    pub fn row(&self, epoch: usize, example: usize, test_acc: Option<f64>) -> MetricsRow {
        let n = self.count.max(1) as f64;
        MetricsRow {
            epoch,
            example,
            mean_reward: self.reward / n,
            hidden_rate: self.rate / n,
            train_acc: self.correct as f64 / n,
            test_acc,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let rows = vec![
            MetricsRow { epoch: 0, example: 100, mean_reward: -1.25, hidden_rate: 0.3, train_acc: 0.5, test_acc: None },
            MetricsRow { epoch: 0, example: 150, mean_reward: -0.1 / 3.0, hidden_rate: 1.0 / 7.0, train_acc: 1.0, test_acc: Some(0.875) },
        ];
        let mut w = MetricsWriter::create(&path).unwrap();
        for r in &rows {
            w.write(r).unwrap();
        }
        w.flush().unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("epoch,example,mean_reward,hidden_rate,train_acc,test_acc\n"));
        assert!(text.lines().nth(1).unwrap().ends_with(','));
        assert_eq!(read_metrics(&path).unwrap(), rows);
    }

    #[test]
    fn bad_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "epoch,example\n").unwrap();
        assert!(read_metrics(&path).is_err());
    }
}
