//! Gated checks, text reports, CSV and binary dumps.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// `x` with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// One gated check: `value` compared against `limit` by `passed`.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
    pub detail: String,
}

impl Check {
    /// Passes when `value < limit`.
    pub fn below(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            passed: value < limit,
            value,
            limit,
            detail: String::new(),
        }
    }

    /// Passes when `value <= limit`.
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self {
            passed: value <= limit,
            ..Self::below(name, value, limit)
        }
    }

    /// Passes when `value >= limit`.
    pub fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Self {
            passed: value >= limit,
            ..Self::below(name, value, limit)
        }
    }

    /// Passes when `value > limit`.
    pub fn above(name: &str, value: f64, limit: f64) -> Self {
        Self {
            passed: value > limit,
            ..Self::below(name, value, limit)
        }
    }

    /// Passes when `lo <= value <= hi`; `limit` records `hi`.
    pub fn within(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            passed: (lo..=hi).contains(&value),
            detail: format!("range [{}, {}]", num(lo), num(hi)),
            ..Self::below(name, value, hi)
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

/// Checks and free-form result lines of one command.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub title: String,
    pub checks: Vec<Check>,
    pub lines: Vec<String>,
}

impl Report {
    pub fn new(title: &str) -> Self {
        Self {
            title: title.into(),
            ..Self::default()
        }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.lines.push(line.into());
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {}", self.title);
        for c in &self.checks {
            let _ = write!(
                s,
                "{} {} value={} limit={}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                num(c.value),
                num(c.limit)
            );
            if !c.detail.is_empty() {
                let _ = write!(s, " ({})", c.detail);
            }
            s.push('\n');
        }
        for l in &self.lines {
            let _ = writeln!(s, "{l}");
        }
        let _ = writeln!(s, "{}", if self.passed() { "ALL PASS" } else { "FAILED" });
        s
    }
}

/// Output directory of a run.
#[derive(Debug, Clone)]
pub struct OutDir(pub PathBuf);

impl OutDir {
    pub fn create(path: &Path) -> Result<Self> {
        fs::create_dir_all(path).with_context(|| format!("creating output directory {}", path.display()))?;
        Ok(Self(path.to_path_buf()))
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.0.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// CSV text with a fixed header; every value at 17 significant digits.
#[derive(Debug, Clone)]
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self {
            text: format!("{}\n", header.join(",")),
            columns: header.len(),
        }
    }

    pub fn row(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.columns);
        let cells: Vec<String> = values.iter().map(|v| num(*v)).collect();
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.text.as_bytes()
    }
}

/// Dense little-endian dump: `u64` rank, `u64` dims, then `f64` data in
/// row-major order.
pub fn dense_dump(dims: &[usize], data: &[f64]) -> Vec<u8> {
    debug_assert_eq!(dims.iter().product::<usize>(), data.len());
    let mut out = Vec::with_capacity(8 * (1 + dims.len() + data.len()));
    out.extend_from_slice(&(dims.len() as u64).to_le_bytes());
    for d in dims {
        out.extend_from_slice(&(*d as u64).to_le_bytes());
    }
    for x in data {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

/// Reads a [`dense_dump`] back.
pub fn read_dense_dump(bytes: &[u8]) -> Option<(Vec<usize>, Vec<f64>)> {
    let word = |i: usize| -> Option<[u8; 8]> { bytes.get(8 * i..8 * i + 8)?.try_into().ok() };
    let rank = u64::from_le_bytes(word(0)?) as usize;
    let dims: Vec<usize> = (0..rank)
        .map(|i| word(1 + i).map(|w| u64::from_le_bytes(w) as usize))
        .collect::<Option<_>>()?;
    let n: usize = dims.iter().product();
    if bytes.len() != 8 * (1 + rank + n) {
        return None;
    }
    let data = (0..n)
        .map(|i| word(1 + rank + i).map(f64::from_le_bytes))
        .collect::<Option<_>>()?;
    Some((dims, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            assert_eq!(s.split('e').next().unwrap().trim_start_matches('-').replace('.', "").len(), 17);
        }
    }

    #[test]
    fn dump_round_trip() {
        let data: Vec<f64> = (0..6).map(|i| i as f64 * 0.5).collect();
        let bytes = dense_dump(&[2, 3], &data);
        assert_eq!(read_dense_dump(&bytes), Some((vec![2, 3], data)));
        assert_eq!(read_dense_dump(&bytes[..bytes.len() - 1]), None);
    }

    #[test]
    fn report_gates() {
        let mut r = Report::new("t");
        r.push(Check::below("a", 1.0, 2.0));
        assert!(r.passed());
        r.push(Check::within("b", 3.0, 0.0, 2.0));
        assert!(!r.passed());
        assert!(r.render().contains("FAIL b"));
    }
}
