//! Purification protocols as one-round maps `w -> (f(w), g(w))`.
//!
//! `f` is the output Werner parameter conditioned on success and `g` the
//! success probability of one `r`-to-1 round on identical Werner inputs.
//! BBPSSW is built in analytically; higher-order maps are loaded from a JSON
//! registry as ratios of polynomials. Everything is stored in the Werner
//! variable; fidelity-variable entries are rewritten at load time.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::werner::{Fidelity, WernerParameter, ENTANGLEMENT_THRESHOLD, ROUNDING_SLACK};

pub const BBPSSW_NAME: &str = "bbpssw";

const DEFAULT_DOMAIN: (f64, f64) = (ENTANGLEMENT_THRESHOLD, 1.0);
const ANCHOR_TOLERANCE: f64 = 1e-9;
const VALIDATION_SAMPLES: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Bbpssw,
    Jansen,
    Custom,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Bbpssw => "bbpssw",
            Family::Jansen => "jansen",
            Family::Custom => "custom",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "bbpssw" => Ok(Family::Bbpssw),
            "jansen" => Ok(Family::Jansen),
            "custom" => Ok(Family::Custom),
            other => Err(format!("unknown protocol family `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variable {
    #[default]
    Werner,
    Fidelity,
}

/// Ratio of two polynomials with ascending-power coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalMap {
    pub numerator: Vec<f64>,
    pub denominator: Vec<f64>,
}

impl RationalMap {
    pub fn new(numerator: Vec<f64>, denominator: Vec<f64>) -> Self {
        RationalMap {
            numerator,
            denominator,
        }
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        RationalMap::new(coeffs, vec![1.0])
    }

    /// `None` when the denominator vanishes or the result is not finite.
    pub fn eval(&self, x: f64) -> Option<f64> {
        let den = horner(&self.denominator, x);
        if den.abs() < 1e-300 {
            return None;
        }
        let v = horner(&self.numerator, x) / den;
        v.is_finite().then_some(v)
    }

    fn denominator_at(&self, x: f64) -> f64 {
        horner(&self.denominator, x)
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_lincomb(a: f64, p: &[f64], b: f64, q: &[f64]) -> Vec<f64> {
    let n = p.len().max(q.len());
    (0..n)
        .map(|i| a * p.get(i).copied().unwrap_or(0.0) + b * q.get(i).copied().unwrap_or(0.0))
        .collect()
}

/// Rewrites `p(F)` as a polynomial in `w` through `F = (1 + 3w) / 4`.
fn compose_fidelity(p: &[f64]) -> Vec<f64> {
    let sub = [0.25, 0.75];
    p.iter().rev().fold(Vec::new(), |acc, &c| {
        let mut next = poly_mul(&acc, &sub);
        if next.is_empty() {
            next.push(0.0);
        }
        next[0] += c;
        next
    })
}

/// One successful BBPSSW round on two identical Werner states, in the
/// fidelity variable. Returns the output fidelity and the round success
/// probability.
pub fn bbpssw_step(fidelity: f64) -> Result<(Fidelity, f64)> {
    if !(fidelity > 0.25 && fidelity <= 1.0) {
        return Err(Error::domain("fidelity", fidelity, 0.25, 1.0));
    }
    let f = fidelity;
    let e = 1.0 - f;
    let success = f * f + (2.0 / 3.0) * f * e + (5.0 / 9.0) * e * e;
    let out = (f * f + e * e / 9.0) / success;
    Ok((Fidelity::snapped(out)?, success))
}

#[derive(Debug, Clone, PartialEq)]
enum MapKind {
    Bbpssw,
    Rational { f: RationalMap, g: RationalMap },
}

/// One purification protocol: block size, domain and its `(f, g)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PurificationMap {
    family: Family,
    name: String,
    block_size: usize,
    domain: (f64, f64),
    kind: MapKind,
}

impl PurificationMap {
    pub fn bbpssw() -> Self {
        PurificationMap {
            family: Family::Bbpssw,
            name: BBPSSW_NAME.to_string(),
            block_size: 2,
            domain: DEFAULT_DOMAIN,
            kind: MapKind::Bbpssw,
        }
    }

    /// A map given directly in the Werner variable. Runs the same checks a
    /// registry entry goes through.
    pub fn rational(
        family: Family,
        name: impl Into<String>,
        block_size: usize,
        f: RationalMap,
        g: RationalMap,
        domain: Option<(f64, f64)>,
    ) -> Result<Self> {
        let map = PurificationMap {
            family,
            name: name.into(),
            block_size,
            domain: domain.unwrap_or(DEFAULT_DOMAIN),
            kind: MapKind::Rational { f, g },
        };
        map.validate()?;
        Ok(map)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn in_domain(&self, w: f64) -> bool {
        w >= self.domain.0 - 1e-12 && w <= self.domain.1 + 1e-12
    }

    /// `(f(w), g(w))` for an input inside the map domain.
    pub fn apply(&self, w: WernerParameter) -> Result<(WernerParameter, f64)> {
        let x = w.value();
        if !self.in_domain(x) {
            return Err(Error::domain("map input", x, self.domain.0, self.domain.1));
        }
        self.evaluate(x)
    }

    fn evaluate(&self, x: f64) -> Result<(WernerParameter, f64)> {
        match &self.kind {
            MapKind::Bbpssw => {
                let (out, p) = bbpssw_step(WernerParameter::snapped(x)?.fidelity().value())?;
                Ok((out.werner(), p))
            }
            MapKind::Rational { f, g } => {
                let err = || Error::Evaluation {
                    protocol: self.name.clone(),
                    at: x,
                };
                let w = f.eval(x).ok_or_else(err)?;
                let p = g.eval(x).ok_or_else(err)?;
                let w = WernerParameter::snapped(w).map_err(|_| Error::Validation {
                    entry: self.name.clone(),
                    reason: format!("f({x}) = {w} is outside [0, 1]"),
                })?;
                if !(p > -ROUNDING_SLACK && p < 1.0 + ROUNDING_SLACK) {
                    return Err(Error::Validation {
                        entry: self.name.clone(),
                        reason: format!("g({x}) = {p} is not a probability"),
                    });
                }
                Ok((w, p.clamp(0.0, 1.0)))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let fail = |reason: String| Error::Validation {
            entry: self.name.clone(),
            reason,
        };
        if self.name.trim().is_empty() {
            return Err(fail("empty name".into()));
        }
        if self.block_size < 2 {
            return Err(fail(format!("block size r = {} must be at least 2", self.block_size)));
        }
        let (lo, hi) = self.domain;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
            return Err(fail(format!("domain [{lo}, {hi}] is not a subinterval of [0, 1]")));
        }
        let MapKind::Rational { f, g } = &self.kind else {
            return Ok(());
        };
        for (label, m) in [("f", f), ("g", g)] {
            if m.numerator.is_empty() || m.denominator.is_empty() {
                return Err(fail(format!("{label} has an empty coefficient list")));
            }
            if m.numerator.iter().chain(&m.denominator).any(|c| !c.is_finite()) {
                return Err(fail(format!("{label} has a non-finite coefficient")));
            }
        }
        match (f.eval(1.0), g.eval(1.0)) {
            (Some(fw), Some(gw))
                if (fw - 1.0).abs() <= ANCHOR_TOLERANCE && (gw - 1.0).abs() <= ANCHOR_TOLERANCE => {}
            (fw, gw) => {
                return Err(fail(format!(
                    "perfect-input anchor violated: f(1) = {}, g(1) = {}",
                    fmt_opt(fw),
                    fmt_opt(gw)
                )))
            }
        }
        for i in 0..=VALIDATION_SAMPLES {
            let x = lo + (hi - lo) * i as f64 / VALIDATION_SAMPLES as f64;
            for (label, m) in [("f", f), ("g", g)] {
                if m.denominator_at(x).abs() < 1e-12 {
                    return Err(fail(format!("{label} denominator vanishes at w = {x}")));
                }
            }
            let fw = f.eval(x).ok_or_else(|| fail(format!("f is not finite at w = {x}")))?;
            let gw = g.eval(x).ok_or_else(|| fail(format!("g is not finite at w = {x}")))?;
            if !(-ROUNDING_SLACK..=1.0 + ROUNDING_SLACK).contains(&fw) {
                return Err(fail(format!("f({x}) = {fw} is outside [0, 1]")));
            }
            let entangled = x > ENTANGLEMENT_THRESHOLD;
            let g_ok = if entangled {
                gw > 0.0 && gw <= 1.0 + ROUNDING_SLACK
            } else {
                (-ROUNDING_SLACK..=1.0 + ROUNDING_SLACK).contains(&gw)
            };
            if !g_ok {
                return Err(fail(format!("g({x}) = {gw} is not a valid success probability")));
            }
        }
        Ok(())
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| x.to_string())
}

pub fn apply_map(map: &PurificationMap, w: WernerParameter) -> Result<(WernerParameter, f64)> {
    map.apply(w)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistryDocument {
    #[serde(default)]
    protocols: Vec<RegistryEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistryEntry {
    family: Family,
    name: String,
    r: usize,
    #[serde(default)]
    variable: Variable,
    f_num: Vec<f64>,
    f_den: Vec<f64>,
    g_num: Vec<f64>,
    g_den: Vec<f64>,
    #[serde(default)]
    domain: Option<[f64; 2]>,
}

impl RegistryEntry {
    fn into_map(self) -> Result<PurificationMap> {
        if self.family == Family::Bbpssw {
            return Err(Error::Validation {
                entry: self.name,
                reason: "family `bbpssw` is built in and cannot be loaded from a registry".into(),
            });
        }
        let (f, g, domain) = match self.variable {
            Variable::Werner => (
                RationalMap::new(self.f_num, self.f_den),
                RationalMap::new(self.g_num, self.g_den),
                self.domain.map(|[lo, hi]| (lo, hi)),
            ),
            Variable::Fidelity => {
                let num = compose_fidelity(&self.f_num);
                let den = compose_fidelity(&self.f_den);
                // w' = (4F' - 1) / 3 = (4 num - den) / (3 den)
                let f = RationalMap::new(
                    poly_lincomb(4.0 / 3.0, &num, -1.0 / 3.0, &den),
                    den,
                );
                let g = RationalMap::new(compose_fidelity(&self.g_num), compose_fidelity(&self.g_den));
                let to_w = |fid: f64| (4.0 * fid - 1.0) / 3.0;
                (f, g, self.domain.map(|[lo, hi]| (to_w(lo), to_w(hi))))
            }
        };
        PurificationMap::rational(self.family, self.name, self.r, f, g, domain)
    }
}

/// Immutable, validated set of purification maps. BBPSSW is always entry 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolRegistry {
    entries: Vec<PurificationMap>,
}

impl Default for ProtocolRegistry {
    fn default() -> Self {
        ProtocolRegistry::builtin()
    }
}

impl ProtocolRegistry {
    pub fn builtin() -> Self {
        ProtocolRegistry {
            entries: vec![PurificationMap::bbpssw()],
        }
    }

    pub fn from_maps(maps: impl IntoIterator<Item = PurificationMap>) -> Result<Self> {
        let mut registry = ProtocolRegistry::builtin();
        for map in maps {
            registry.push(map)?;
        }
        Ok(registry)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        load_registry(&text)
    }

    fn push(&mut self, map: PurificationMap) -> Result<()> {
        if self.get(map.name()).is_some() {
            return Err(Error::Validation {
                entry: map.name,
                reason: "duplicate protocol name".into(),
            });
        }
        self.entries.push(map);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[PurificationMap] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = &PurificationMap> {
        self.entries.iter()
    }

    pub fn get(&self, name: &str) -> Option<&PurificationMap> {
        self.entries.iter().find(|m| m.name == name)
    }

    pub fn families(&self) -> Vec<Family> {
        let mut seen = HashSet::new();
        self.entries
            .iter()
            .map(|m| m.family)
            .filter(|f| seen.insert(*f))
            .collect()
    }

    /// Entries of one family, in registry order.
    pub fn restricted_to(&self, family: Family) -> Vec<&PurificationMap> {
        self.entries.iter().filter(|m| m.family == family).collect()
    }
}

/// Parses and validates a registry document. An empty or whitespace-only
/// document yields the built-in registry.
pub fn load_registry(source: &str) -> Result<ProtocolRegistry> {
    if source.trim().is_empty() {
        return Ok(ProtocolRegistry::builtin());
    }
    let doc: RegistryDocument = serde_json::from_str(source).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut registry = ProtocolRegistry::builtin();
    for entry in doc.protocols {
        registry.push(entry.into_map()?)?;
    }
    Ok(registry)
}
