//! Flag value types shared by several subcommands.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

/// An angle in radians. Accepts plain numbers and multiples of π such as
/// `pi`, `pi/2` and `3pi/4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Angle(pub f64);

impl FromStr for Angle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let t = s.trim().to_ascii_lowercase();
        if let Ok(v) = t.parse::<f64>() {
            return Ok(Angle(v));
        }
        let (num, den) = match t.split_once('/') {
            Some((n, d)) => (n, d.parse::<f64>().map_err(|e| format!("angle `{s}`: {e}"))?),
            None => (t.as_str(), 1.0),
        };
        let coeff = num
            .strip_suffix("pi")
            .ok_or_else(|| format!("angle `{s}`: expected a number or a multiple of pi"))?
            .trim_end_matches('*');
        let coeff = if coeff.is_empty() {
            1.0
        } else {
            coeff.parse::<f64>().map_err(|e| format!("angle `{s}`: {e}"))?
        };
        Ok(Angle(coeff * PI / den))
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Positive integers written as `1,2,4` or with inclusive ranges, `1..16,32`.
/// Stored sorted and without duplicates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexList(pub Vec<usize>);

impl FromStr for IndexList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut out = Vec::new();
        for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
            match item.split_once("..") {
                Some((lo, hi)) => {
                    let (lo, hi) = (parse(lo)?, parse(hi)?);
                    if lo > hi {
                        return Err(format!("empty range `{item}`"));
                    }
                    out.extend(lo..=hi);
                }
                None => out.push(parse(item)?),
            }
        }
        if out.is_empty() {
            return Err("empty list".into());
        }
        out.sort_unstable();
        out.dedup();
        Ok(IndexList(out))
    }
}

impl fmt::Display for IndexList {
    /// Runs of three or more consecutive values print as `a..b`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = &self.0;
        let mut parts = Vec::new();
        let mut i = 0;
        while i < v.len() {
            let mut j = i;
            while j + 1 < v.len() && v[j + 1] == v[j] + 1 {
                j += 1;
            }
            if j >= i + 2 {
                parts.push(format!("{}..{}", v[i], v[j]));
            } else {
                parts.extend(v[i..=j].iter().map(|x| x.to_string()));
            }
            i = j + 1;
        }
        f.write_str(&parts.join(","))
    }
}

/// `COUNTxDIM`, e.g. `1000x4096`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub count: usize,
    pub dim: usize,
}

impl FromStr for Shape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (c, d) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected COUNTxDIM, got `{s}`"))?;
        let count = c.trim().parse().map_err(|e| format!("count `{c}`: {e}"))?;
        let dim = d.trim().parse().map_err(|e| format!("dim `{d}`: {e}"))?;
        Ok(Shape { count, dim })
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.count, self.dim)
    }
}

/// `n` equally spaced angles covering `[0, π]`, endpoints included.
pub fn angle_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|i| if i + 1 == n { PI } else { PI * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}
