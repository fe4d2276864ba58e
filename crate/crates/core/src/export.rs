//! Plot-ready tabular output.
//!
//! CSV dialect: comma separated, `.` decimal point, one header row, LF line
//! endings. Floats are written with Rust's shortest round-trip formatting.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Equal-width histogram with raw counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn uniform(lo: f64, hi: f64, counts: Vec<u64>) -> Self {
        Self { lo, hi, counts }
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.bins() as f64
    }

    pub fn edges(&self, k: usize) -> (f64, f64) {
        let w = self.bin_width();
        (self.lo + k as f64 * w, self.lo + (k + 1) as f64 * w)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Count density normalized to unit area.
    pub fn density(&self) -> Vec<f64> {
        let norm = self.total() as f64 * self.bin_width();
        self.counts.iter().map(|&c| c as f64 / norm).collect()
    }

    pub fn mean(&self) -> f64 {
        let total = self.total() as f64;
        (0..self.bins())
            .map(|k| {
                let (a, b) = self.edges(k);
                0.5 * (a + b) * self.counts[k] as f64
            })
            .sum::<f64>()
            / total
    }

    /// CSV with header `bin_left,bin_right,count,density`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_left,bin_right,count,density\n");
        for (k, d) in self.density().iter().enumerate() {
            let (a, b) = self.edges(k);
            let _ = writeln!(out, "{a},{b},{},{d}", self.counts[k]);
        }
        out
    }
}

/// Generic CSV table writer.
pub fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_csv() {
        let h = Histogram::uniform(-1.0, 1.0, vec![1, 3]);
        assert_eq!(
            h.to_csv(),
            "bin_left,bin_right,count,density\n-1,0,1,0.25\n0,1,3,0.75\n"
        );
        assert!((h.mean() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn table_layout() {
        let t = csv_table(&["a", "b"], &[vec!["1".into(), "2".into()]]);
        assert_eq!(t, "a,b\n1,2\n");
    }
}
