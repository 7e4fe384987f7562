//! Plain-text `key = value` run configuration.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use relkin::grid::GridSpec;
use relkin::PhysicalConstants;

/// Parameters of one command. Keys are checked against the command's list
/// before any value is read.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params {
    values: BTreeMap<String, String>,
}

impl Params {
    /// One `key = value` per line; `#` starts a comment; blank lines are
    /// skipped; a repeated key is an error.
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`, got `{}`", no + 1, raw.trim()))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                bail!("line {}: empty key", no + 1);
            }
            if values.insert(k.to_string(), v.to_string()).is_some() {
                bail!("line {}: key `{k}` given twice", no + 1);
            }
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    /// Sets `key` unless already present.
    pub fn with_default(mut self, key: &str, value: &str) -> Self {
        self.values.entry(key.to_string()).or_insert_with(|| value.to_string());
        self
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn check_keys(&self, command: &str, allowed: &[&str]) -> Result<()> {
        let unknown: Vec<&str> = self
            .values
            .keys()
            .map(String::as_str)
            .filter(|k| !allowed.contains(k))
            .collect();
        if !unknown.is_empty() {
            bail!(
                "unknown key(s) for {command}: {}; accepted: {}",
                unknown.join(", "),
                allowed.join(", ")
            );
        }
        Ok(())
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => {
                let x: f64 = v.parse().with_context(|| format!("`{key}`: `{v}` is not a number"))?;
                if !x.is_finite() {
                    bail!("`{key}` must be finite, got {v}");
                }
                Ok(x)
            }
        }
    }

    pub fn positive(&self, key: &str, default: f64) -> Result<f64> {
        let x = self.f64(key, default)?;
        if !(x > 0.0) {
            bail!("`{key}` must be positive, got {x}");
        }
        Ok(x)
    }

    pub fn usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().with_context(|| format!("`{key}`: `{v}` is not a non-negative integer")),
        }
    }

    pub fn bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some("true") | Some("yes") | Some("1") => Ok(true),
            Some("false") | Some("no") | Some("0") => Ok(false),
            Some(v) => bail!("`{key}`: `{v}` is not a boolean"),
        }
    }

    pub fn string<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.raw(key).unwrap_or(default)
    }

    /// Comma-separated numbers.
    pub fn f64_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|s| {
                    let s = s.trim();
                    s.parse::<f64>().with_context(|| format!("`{key}`: `{s}` is not a number"))
                })
                .collect(),
        }
    }

    pub fn usize_list(&self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|s| {
                    let s = s.trim();
                    s.parse::<usize>().with_context(|| format!("`{key}`: `{s}` is not an index"))
                })
                .collect(),
        }
    }

    /// `n_radial x n_polar x n_azimuth`, e.g. `48x12x24`.
    pub fn grid(&self, key: &str, default: GridSpec) -> Result<GridSpec> {
        self.raw(key).map_or(Ok(default), |v| parse_grid(key, v))
    }

    /// Comma-separated grids, e.g. `12x4x8, 24x8x16`.
    pub fn grid_list(&self, key: &str, default: &[GridSpec]) -> Result<Vec<GridSpec>> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(v) => v.split(',').map(|s| parse_grid(key, s)).collect(),
        }
    }

    /// `m0`, `c`, `k_b`, `planck`, unit by default.
    pub fn constants(&self) -> Result<PhysicalConstants> {
        let u = PhysicalConstants::UNIT;
        PhysicalConstants::new(
            self.positive("m0", u.m0)?,
            self.positive("c", u.c)?,
            self.positive("k_b", u.k_b)?,
            self.positive("planck", u.h)?,
        )
        .map_err(|e| anyhow!("physical constants: {e}"))
    }
}

fn parse_grid(key: &str, v: &str) -> Result<GridSpec> {
    let parts: Vec<usize> = v
        .split('x')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("`{key}`: `{}` is not a grid like 48x12x24", v.trim()))?;
    if parts.len() != 3 {
        bail!("`{key}`: `{}` needs three counts like 48x12x24", v.trim());
    }
    Ok(GridSpec::new(parts[0], parts[1], parts[2]))
}

/// Keys read by [`Params::constants`].
pub const CONSTANT_KEYS: [&str; 4] = ["m0", "c", "k_b", "planck"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blank_lines() {
        let p = Params::parse("# run\nz_min = 0.5  # lower\n\nflag=yes\n").unwrap();
        assert_eq!(p.f64("z_min", 1.0).unwrap(), 0.5);
        assert!(p.bool("flag", false).unwrap());
        assert_eq!(p.f64("other", 2.0).unwrap(), 2.0);
    }

    #[test]
    fn rejects_unknown_and_repeated_keys() {
        let p = Params::parse("a = 1\nb = 2").unwrap();
        assert!(p.check_keys("cmd", &["a"]).is_err());
        assert!(p.check_keys("cmd", &["a", "b"]).is_ok());
        assert!(Params::parse("a = 1\na = 2").is_err());
        assert!(Params::parse("novalue").is_err());
    }

    #[test]
    fn typed_values() {
        let p = Params::parse("g = 8x6x12\nl = 0.1, 0.05\nbad = x\nneg = -1").unwrap();
        assert_eq!(p.grid("g", GridSpec::DEFAULT).unwrap(), GridSpec::new(8, 6, 12));
        assert_eq!(p.f64_list("l", &[]).unwrap(), vec![0.1, 0.05]);
        assert!(p.f64("bad", 0.0).is_err());
        assert!(p.positive("neg", 1.0).is_err());
        assert!(p.f64("inf", 0.0).is_ok());
        let q = Params::parse("gs = 12x4x8, 24x8x16\nbadg = 12x4").unwrap();
        assert_eq!(q.grid_list("gs", &[]).unwrap(), vec![GridSpec::new(12, 4, 8), GridSpec::new(24, 8, 16)]);
        assert!(q.grid("badg", GridSpec::DEFAULT).is_err());
    }
}
