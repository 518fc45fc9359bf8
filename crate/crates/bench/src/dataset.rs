//! Datasets: CSV ingestion and export, Gaussian blobs, standardization.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use cagraph::{DataMatrix64, Matrix64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{HarnessError, Result};

/// Samples as the columns of `x` (`d × n`) with optional ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub x: DataMatrix64,
    truth: Option<Vec<usize>>,
}

impl Dataset {
    /// Ground truth must have one entry per sample and use every id in
    /// `0..c` for some `c`.
    pub fn new(name: impl Into<String>, x: DataMatrix64, truth: Option<Vec<usize>>) -> Result<Self> {
        if let Some(t) = &truth {
            if t.len() != x.cols() {
                return Err(HarnessError::Input(format!(
                    "{} labels for {} samples",
                    t.len(),
                    x.cols()
                )));
            }
            let c = t.iter().max().map_or(0, |&m| m + 1);
            let mut seen = vec![false; c];
            for &l in t {
                seen[l] = true;
            }
            if seen.contains(&false) {
                return Err(HarnessError::Input("label ids are not contiguous from 0".into()));
            }
        }
        Ok(Self { name: name.into(), x, truth })
    }

    pub fn truth(&self) -> Option<&[usize]> {
        self.truth.as_deref()
    }

    pub fn n(&self) -> usize {
        self.x.cols()
    }

    pub fn d(&self) -> usize {
        self.x.rows()
    }

    pub fn classes(&self) -> Option<usize> {
        self.truth.as_ref().map(|t| t.iter().max().map_or(0, |&m| m + 1))
    }

    /// Each feature shifted to mean 0 and scaled to unit population
    /// standard deviation. Constant features are only centred.
    pub fn standardized(&self) -> Self {
        let (d, n) = self.x.shape();
        let mut x = self.x.clone().into_vec();
        for row in x.chunks_mut(n) {
            let mean = row.iter().sum::<f64>() / n as f64;
            let sd = (row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
            for v in row.iter_mut() {
                *v -= mean;
                if sd > 0.0 {
                    *v /= sd;
                }
            }
        }
        Self {
            name: self.name.clone(),
            x: Matrix64::from_vec(d, n, x).expect("same shape"),
            truth: self.truth.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelMode {
    /// The last token of each row is a class label.
    LastColumn,
    None,
    /// One label token per line in another file.
    SeparateFile(PathBuf),
}

fn encode_labels<'a>(tokens: impl Iterator<Item = &'a str>) -> Vec<usize> {
    let mut ids: HashMap<&str, usize> = HashMap::new();
    tokens
        .map(|t| {
            let next = ids.len();
            *ids.entry(t).or_insert(next)
        })
        .collect()
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

/// Reads one sample per non-blank line. With `header` the first line is
/// skipped. Labels are re-encoded to `0..c` in order of first appearance.
pub fn load_csv(path: impl AsRef<Path>, labels: &LabelMode, header: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let text = read(path)?;
    let name = path
        .file_stem()
        .map_or_else(|| "data".to_string(), |s| s.to_string_lossy().into_owned());
    parse_csv(&name, &text, labels, header)
}

/// [`load_csv`] on text already in memory.
pub fn parse_csv(name: &str, text: &str, labels: &LabelMode, header: bool) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut features = Vec::new();
    let mut label_tokens = Vec::new();
    let mut width = None;
    for record in reader.records() {
        let record = record.map_err(|e| HarnessError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line_no = record.position().map_or(0, |p| p.line() as usize);
        let mut cells: Vec<&str> = record.iter().collect();
        if *labels == LabelMode::LastColumn {
            let label = cells.pop().filter(|_| !cells.is_empty()).ok_or(HarnessError::Parse {
                line: line_no,
                message: "row has no feature columns before the label".into(),
            })?;
            label_tokens.push(label.to_string());
        }
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return Err(HarnessError::Parse {
                    line: line_no,
                    message: format!("expected {w} features, found {}", cells.len()),
                })
            }
            Some(_) => {}
        }
        for cell in cells {
            let v: f64 = cell.parse().map_err(|_| HarnessError::Parse {
                line: line_no,
                message: format!("non-numeric feature {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(HarnessError::Parse {
                    line: line_no,
                    message: format!("non-finite feature {cell:?}"),
                });
            }
            features.push(v);
        }
    }
    let Some(d) = width else {
        return Err(HarnessError::Input(format!("{name}: no samples")));
    };
    let n = features.len() / d.max(1);
    let rows = Matrix64::from_vec(n, d, features)?;

    let truth = match labels {
        LabelMode::LastColumn => Some(encode_labels(label_tokens.iter().map(String::as_str))),
        LabelMode::None => None,
        LabelMode::SeparateFile(p) => {
            let text = read(p)?;
            let tokens: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
            if tokens.len() != n {
                return Err(HarnessError::Input(format!(
                    "{}: {} labels for {n} samples",
                    p.display(),
                    tokens.len()
                )));
            }
            Some(encode_labels(tokens.into_iter()))
        }
    };
    Dataset::new(name, rows.transpose(), truth)
}

/// Inverse of [`load_csv`] with [`LabelMode::LastColumn`] (or no label
/// column when the dataset has no truth). Values use the shortest text
/// that parses back to the same `f64`.
pub fn to_csv(ds: &Dataset) -> String {
    let mut out = String::new();
    for j in 0..ds.n() {
        for i in 0..ds.d() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{}", ds.x[(i, j)]).expect("write to String");
        }
        if let Some(t) = ds.truth() {
            write!(out, ",{}", t[j]).expect("write to String");
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_csv(ds)).map_err(|e| HarnessError::io(path, e))
}

/// Isotropic Gaussian clusters. Centre coordinates are drawn from
/// `N(0, centers_scale²)` and points from `N(centre, noise_sigma²)`,
/// cluster by cluster, all from one ChaCha8 stream seeded by `seed`.
pub fn make_blobs(
    n_per_cluster: &[usize],
    d: usize,
    centers_scale: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_per_cluster.is_empty() || n_per_cluster.contains(&0) || d == 0 {
        return Err(HarnessError::Input(
            "blobs need d >= 1 and at least one sample per cluster".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let centers: Vec<Vec<f64>> = n_per_cluster
        .iter()
        .map(|_| (0..d).map(|_| centers_scale * normal()).collect())
        .collect();
    let n: usize = n_per_cluster.iter().sum();
    let mut rows = Vec::with_capacity(n * d);
    let mut truth = Vec::with_capacity(n);
    for (c, (&count, center)) in n_per_cluster.iter().zip(&centers).enumerate() {
        for _ in 0..count {
            rows.extend(center.iter().map(|&m| m + noise_sigma * normal()));
            truth.push(c);
        }
    }
    let x = Matrix64::from_vec(n, d, rows)?.transpose();
    Dataset::new(format!("blobs-{seed}"), x, Some(truth))
}
