//! Flag value parsers. Each one checks its domain so that clap can name the
//! offending flag in the error.

use hopfid_core::sweep::FloatRange;
use hopfid_core::Family;

pub const DEFAULT_W0_STEP: f64 = 0.0025;

fn float(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

pub fn werner(s: &str) -> Result<f64, String> {
    let v = float(s)?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

pub fn probability(s: &str) -> Result<f64, String> {
    let v = float(s)?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is outside (0, 1]"))
    }
}

pub fn unit_probability(s: &str) -> Result<f64, String> {
    let v = float(s)?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

pub fn positive(s: &str) -> Result<usize, String> {
    match s.trim().parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(_) => Err(format!("`{s}` is not a positive integer")),
    }
}

pub fn block_size(s: &str) -> Result<usize, String> {
    match positive(s)? {
        1 => Err("block size must be at least 2".into()),
        r => Ok(r),
    }
}

pub fn links(s: &str) -> Result<u32, String> {
    let v = positive(s)?;
    u32::try_from(v).map_err(|_| format!("{v} links is too many"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkRange(pub Vec<u32>);

/// `lo:hi` or a single integer.
pub fn link_range(s: &str) -> Result<LinkRange, String> {
    let (lo, hi) = match s.split_once(':') {
        Some((a, b)) => (links(a)?, links(b)?),
        None => {
            let v = links(s)?;
            (v, v)
        }
    };
    if lo > hi {
        return Err(format!("empty range {lo}:{hi}"));
    }
    Ok(LinkRange((lo..=hi).collect()))
}

/// `lo:hi[:step]` or a single value, all within `[0, 1]`.
pub fn werner_range(s: &str) -> Result<FloatRange, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let (lo, hi, step) = match parts.as_slice() {
        [v] => {
            let v = werner(v)?;
            (v, v, 1.0)
        }
        [a, b] => (werner(a)?, werner(b)?, DEFAULT_W0_STEP),
        [a, b, c] => (werner(a)?, werner(b)?, float(c)?),
        _ => return Err(format!("expected lo:hi[:step], got `{s}`")),
    };
    FloatRange::new(lo, hi, step).map_err(|e| e.to_string())
}

pub fn family(s: &str) -> Result<Family, String> {
    s.trim().parse()
}
