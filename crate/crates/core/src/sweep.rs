//! Resource landscapes over `(ℓ, w0, p_th)` grids.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocols::Family;
use crate::search::{min_copy_search, SearchSpace, SearchStatus};
use crate::werner::{boundary_w0, PathSpec, WernerParameter};

pub const CSV_HEADER: [&str; 11] = [
    "ell",
    "w0",
    "pth",
    "family",
    "status",
    "n0_min",
    "r",
    "k",
    "w_out",
    "p_succ",
    "boundary_w0",
];

/// Inclusive float range `lo:hi:step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloatRange {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl FloatRange {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && step.is_finite()) || lo > hi || step <= 0.0 {
            return Err(Error::Grid(format!("bad range {lo}:{hi}:{step}")));
        }
        Ok(FloatRange { lo, hi, step })
    }

    /// Grid values, rounded to 10 decimals so that `0.5 + i·0.0025` prints
    /// cleanly.
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        (0..=n)
            .map(|i| ((self.lo + i as f64 * self.step) * 1e10).round() / 1e10)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub ell_values: Vec<u32>,
    pub w0: FloatRange,
    pub p_th_values: Vec<f64>,
    pub families: Vec<Family>,
}

impl GridSpec {
    /// `ℓ ∈ {2..10}`, `w0 ∈ [0.5, 1]` in steps of 0.0025.
    pub fn standard(p_th_values: Vec<f64>, families: Vec<Family>) -> Self {
        GridSpec {
            ell_values: (2..=10).collect(),
            w0: FloatRange {
                lo: 0.5,
                hi: 1.0,
                step: 0.0025,
            },
            p_th_values,
            families,
        }
    }

    pub fn validate(&self) -> Result<()> {
        FloatRange::new(self.w0.lo, self.w0.hi, self.w0.step)?;
        if self.w0.lo < 0.0 || self.w0.hi > 1.0 {
            return Err(Error::Grid(format!("w0 range [{}, {}] leaves [0, 1]", self.w0.lo, self.w0.hi)));
        }
        if self.ell_values.is_empty() || self.ell_values.contains(&0) {
            return Err(Error::Grid("path lengths must be positive and non-empty".into()));
        }
        if self.p_th_values.is_empty() {
            return Err(Error::Grid("no success thresholds".into()));
        }
        if let Some(p) = self.p_th_values.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return Err(Error::Grid(format!("success threshold {p} outside (0, 1]")));
        }
        if self.families.is_empty() {
            return Err(Error::Grid("no protocol families".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ell_values.len() * self.w0.values().len() * self.p_th_values.len() * self.families.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One `(ℓ, w0, p_th, family)` evaluation; field order is the CSV column
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub ell: u32,
    pub w0: f64,
    pub pth: f64,
    pub family: Family,
    pub status: SearchStatus,
    pub n0_min: Option<usize>,
    pub r: Option<usize>,
    pub k: Option<usize>,
    pub w_out: Option<f64>,
    pub p_succ: Option<f64>,
    pub boundary_w0: f64,
}

impl SweepPoint {
    pub fn is_feasible(&self) -> bool {
        self.status == SearchStatus::Feasible
    }

    pub fn above_boundary(&self) -> bool {
        self.w0 > self.boundary_w0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySummary {
    pub family: Family,
    pub pth: f64,
    pub points: usize,
    pub feasible: usize,
    pub budget_exceeded: usize,
    pub median_n0: Option<f64>,
    /// Feasible points needing at most 10 raw copies.
    pub low_copy: usize,
    pub median_k: Option<f64>,
    pub max_k: Option<usize>,
    /// Mean over `ℓ` of (smallest feasible `w0`) − `3^(-1/ℓ)`.
    pub mean_boundary_gap: Option<f64>,
    pub block_sizes: BTreeMap<usize, usize>,
}

/// Jansen versus BBPSSW on points where both are feasible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedComparison {
    pub pth: f64,
    pub shared_feasible: usize,
    pub jansen_fewer_copies: usize,
    pub fraction_fewer_copies: Option<f64>,
    pub jansen_shallower: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepSummary {
    pub families: Vec<FamilySummary>,
    pub comparisons: Vec<SharedComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub grid: GridSpec,
    pub points: Vec<SweepPoint>,
    pub summary: SweepSummary,
}

fn evaluate(ell: u32, w0: f64, grid: &GridSpec, spaces: &[(Family, SearchSpace)]) -> Result<Vec<SweepPoint>> {
    let path = PathSpec::new(ell)?;
    let w = WernerParameter::new(w0)?;
    let boundary = boundary_w0(path).value();
    let mut out = Vec::with_capacity(grid.p_th_values.len() * spaces.len());
    for &pth in &grid.p_th_values {
        for (family, space) in spaces {
            let res = min_copy_search(w, path, pth, space)?;
            out.push(SweepPoint {
                ell,
                w0,
                pth,
                family: *family,
                status: res.status,
                n0_min: res.n0_min,
                r: res.selected.as_ref().map(|s| s.r),
                k: res.selected.as_ref().map(|s| s.k),
                w_out: res.trace.as_ref().map(|t| t.w_out()),
                p_succ: res.p_succ_at_min,
                boundary_w0: boundary,
            });
        }
    }
    Ok(out)
}

/// Evaluates every grid point independently (in parallel) and summarises.
/// Output order is `ℓ`, `w0`, `p_th`, family regardless of scheduling.
pub fn run_sweep(grid: &GridSpec, space: &SearchSpace) -> Result<Sweep> {
    grid.validate()?;
    space.validate()?;
    let spaces: Vec<(Family, SearchSpace)> = grid.families.iter().map(|&f| (f, space.only(f))).collect();
    let cells: Vec<(u32, f64)> = grid
        .ell_values
        .iter()
        .flat_map(|&ell| grid.w0.values().into_iter().map(move |w| (ell, w)))
        .collect();
    let chunks: Vec<Vec<SweepPoint>> = cells
        .par_iter()
        .map(|&(ell, w0)| evaluate(ell, w0, grid, &spaces))
        .collect::<Result<_>>()?;
    let points: Vec<SweepPoint> = chunks.into_iter().flatten().collect();
    let summary = summarize(&points);
    Ok(Sweep {
        grid: grid.clone(),
        points,
        summary,
    })
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    Some(if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    })
}

fn key(x: f64) -> u64 {
    x.to_bits()
}

pub fn summarize(points: &[SweepPoint]) -> SweepSummary {
    let mut groups: Vec<(Family, f64)> = Vec::new();
    for p in points {
        if !groups.iter().any(|&(f, t)| f == p.family && key(t) == key(p.pth)) {
            groups.push((p.family, p.pth));
        }
    }
    groups.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let families = groups
        .iter()
        .map(|&(family, pth)| {
            let pts: Vec<&SweepPoint> = points
                .iter()
                .filter(|p| p.family == family && key(p.pth) == key(pth))
                .collect();
            let feasible: Vec<&&SweepPoint> = pts.iter().filter(|p| p.is_feasible()).collect();
            let n0s: Vec<f64> = feasible.iter().filter_map(|p| p.n0_min).map(|n| n as f64).collect();
            let ks: Vec<usize> = feasible.iter().filter_map(|p| p.k).collect();
            let mut block_sizes = BTreeMap::new();
            for r in feasible.iter().filter_map(|p| p.r) {
                *block_sizes.entry(r).or_insert(0) += 1;
            }
            let mut min_w0: BTreeMap<u32, (f64, f64)> = BTreeMap::new();
            for p in &feasible {
                let e = min_w0.entry(p.ell).or_insert((p.w0, p.boundary_w0));
                if p.w0 < e.0 {
                    e.0 = p.w0;
                }
            }
            let gaps: Vec<f64> = min_w0.values().map(|(w, b)| w - b).collect();
            FamilySummary {
                family,
                pth,
                points: pts.len(),
                feasible: feasible.len(),
                budget_exceeded: pts.iter().filter(|p| p.status == SearchStatus::BudgetExceeded).count(),
                low_copy: n0s.iter().filter(|&&n| n <= 10.0).count(),
                median_n0: median(n0s),
                median_k: median(ks.iter().map(|&k| k as f64).collect()),
                max_k: ks.iter().copied().max(),
                mean_boundary_gap: (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64),
                block_sizes,
            }
        })
        .collect();

    let mut comparisons = Vec::new();
    let thresholds: Vec<f64> = {
        let mut t: Vec<f64> = groups.iter().map(|g| g.1).collect();
        t.sort_by(f64::total_cmp);
        t.dedup_by(|a, b| key(*a) == key(*b));
        t
    };
    let has = |f: Family| points.iter().any(|p| p.family == f);
    if has(Family::Jansen) && has(Family::Bbpssw) {
        let mut bbpssw: HashMap<(u32, u64, u64), &SweepPoint> = HashMap::new();
        for p in points.iter().filter(|p| p.family == Family::Bbpssw && p.is_feasible()) {
            bbpssw.insert((p.ell, key(p.w0), key(p.pth)), p);
        }
        for pth in thresholds {
            let mut shared = 0;
            let mut fewer = 0;
            let mut shallower = 0;
            for j in points
                .iter()
                .filter(|p| p.family == Family::Jansen && p.is_feasible() && key(p.pth) == key(pth))
            {
                if let Some(b) = bbpssw.get(&(j.ell, key(j.w0), key(pth))) {
                    shared += 1;
                    if j.n0_min < b.n0_min {
                        fewer += 1;
                    }
                    if j.k < b.k {
                        shallower += 1;
                    }
                }
            }
            comparisons.push(SharedComparison {
                pth,
                shared_feasible: shared,
                jansen_fewer_copies: fewer,
                fraction_fewer_copies: (shared > 0).then(|| fewer as f64 / shared as f64),
                jansen_shallower: shallower,
            });
        }
    }
    SweepSummary { families, comparisons }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

impl FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

impl ExportFormat {
    /// Guesses the format from a file extension, defaulting to CSV.
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => ExportFormat::Json,
            _ => ExportFormat::Csv,
        }
    }
}

#[derive(Serialize)]
struct JsonDocumentRef<'a> {
    points: &'a [SweepPoint],
    summary: &'a SweepSummary,
}

#[derive(Deserialize)]
struct JsonDocument {
    points: Vec<SweepPoint>,
    summary: SweepSummary,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_csv<W: Write>(points: &[SweepPoint], sink: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
    w.write_record(CSV_HEADER)?;
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

pub fn export(points: &[SweepPoint], summary: &SweepSummary, format: ExportFormat, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut sink = BufWriter::new(file);
    match format {
        ExportFormat::Csv => write_csv(points, &mut sink).map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?,
        ExportFormat::Json => {
            serde_json::to_writer_pretty(&mut sink, &JsonDocumentRef { points, summary }).map_err(|source| {
                Error::Json {
                    path: path.to_path_buf(),
                    source,
                }
            })?;
            sink.write_all(b"\n").map_err(io_err(path))?;
        }
    }
    sink.flush().map_err(io_err(path))
}

pub fn import_csv(path: &Path) -> Result<Vec<SweepPoint>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Grid(format!("{}: unexpected CSV header", path.display())));
    }
    reader
        .deserialize()
        .collect::<std::result::Result<Vec<SweepPoint>, _>>()
        .map_err(csv_err)
}

pub fn import_json(path: &Path) -> Result<(Vec<SweepPoint>, SweepSummary)> {
    let file = File::open(path).map_err(io_err(path))?;
    let doc: JsonDocument = serde_json::from_reader(BufReader::new(file)).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    Ok((doc.points, doc.summary))
}
