//! Training data, center grids and design-matrix assembly.
//!
//! A [`Dictionary`] stacks one block of columns per kernel: column `l` of
//! block `n` holds `k_n(x_m, z_{n,l})` for every data site `x_m`. Columns
//! are ordered block-major, then by grid order (lexicographic in the center
//! coordinates).

use std::cmp::Ordering;
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DMatrixView, DVector};
use rayon::prelude::*;

use crate::kernels::Kernel;
use crate::{Error, Result};

/// Default cap on the number of centers a single grid may hold.
pub const DEFAULT_CENTER_CAP: usize = 1_000_000;

/// Axis-aligned box, one `(lo, hi)` pair per coordinate.
pub type Bounds = Vec<(f64, f64)>;

/// Data sites `x_m` (rows) and targets `y_m`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    dim: usize,
    sites: Vec<f64>,
    targets: DVector<f64>,
}

impl TrainingSet {
    /// `sites` is row-major with `dim` coordinates per site.
    pub fn new(dim: usize, sites: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidTrainingSet("dimension must be at least 1".into()));
        }
        if targets.is_empty() {
            return Err(Error::InvalidTrainingSet("at least one sample is required".into()));
        }
        if sites.len() != dim * targets.len() {
            return Err(Error::InvalidTrainingSet(format!(
                "{} coordinates do not form {} sites of dimension {dim}",
                sites.len(),
                targets.len()
            )));
        }
        if sites.iter().chain(&targets).any(|v| !v.is_finite()) {
            return Err(Error::InvalidTrainingSet("entries must be finite".into()));
        }
        let set = Self {
            dim,
            sites,
            targets: DVector::from_vec(targets),
        };
        let mut order: Vec<usize> = (0..set.len()).collect();
        order.sort_by(|&a, &b| lex_cmp(set.site(a), set.site(b)));
        if let Some(w) = order.windows(2).find(|w| set.site(w[0]) == set.site(w[1])) {
            return Err(Error::InvalidTrainingSet(format!(
                "sites {} and {} coincide",
                w[0].min(w[1]),
                w[0].max(w[1])
            )));
        }
        Ok(set)
    }

    /// One-dimensional convenience constructor.
    pub fn from_1d(sites: &[f64], targets: &[f64]) -> Result<Self> {
        Self::new(1, sites.to_vec(), targets.to_vec())
    }

    /// Reads `d` coordinate columns followed by one target column. A header
    /// row is required.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(csv_error)?.clone();
        if headers.len() < 2 {
            return Err(Error::InvalidTrainingSet(
                "expected at least one coordinate column and a target column".into(),
            ));
        }
        let dim = headers.len() - 1;
        let (mut sites, mut targets) = (Vec::new(), Vec::new());
        for (i, record) in rdr.records().enumerate() {
            let record = record.map_err(csv_error)?;
            if record.len() != dim + 1 {
                return Err(Error::InvalidTrainingSet(format!(
                    "row {} has {} fields, expected {}",
                    i + 2,
                    record.len(),
                    dim + 1
                )));
            }
            for (j, field) in record.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| {
                    Error::InvalidTrainingSet(format!("row {}, column {}: cannot parse {field:?}", i + 2, j + 1))
                })?;
                if j < dim {
                    sites.push(v);
                } else {
                    targets.push(v);
                }
            }
        }
        Self::new(dim, sites, targets)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn site(&self, m: usize) -> &[f64] {
        &self.sites[m * self.dim..(m + 1) * self.dim]
    }

    pub fn sites(&self) -> impl Iterator<Item = &[f64]> {
        self.sites.chunks_exact(self.dim)
    }

    pub fn targets(&self) -> &DVector<f64> {
        &self.targets
    }

    pub fn bounding_box(&self) -> Bounds {
        (0..self.dim)
            .map(|j| {
                self.sites().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                    (lo.min(s[j]), hi.max(s[j]))
                })
            })
            .collect()
    }

    /// The samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let sites = indices.iter().flat_map(|&m| self.site(m).iter().copied()).collect();
        let targets = indices.iter().map(|&m| self.targets[m]).collect();
        Self::new(self.dim, sites, targets)
    }

    /// Same sites, new targets.
    pub fn with_targets(&self, targets: DVector<f64>) -> Result<Self> {
        if targets.len() != self.len() {
            return Err(Error::DimensionMismatch("target count differs from site count".into()));
        }
        Ok(Self {
            dim: self.dim,
            sites: self.sites.clone(),
            targets,
        })
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::InvalidTrainingSet(e.to_string())
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Kernel centers `z_l` for one dictionary block.
#[derive(Clone, Debug, PartialEq)]
pub struct CenterGrid {
    dim: usize,
    centers: Vec<f64>,
    spacing: f64,
    bounds: Bounds,
}

impl CenterGrid {
    /// Sorts `centers` (row-major) lexicographically and drops duplicates.
    pub fn from_centers(dim: usize, mut centers: Vec<f64>, spacing: f64, bounds: Bounds) -> Result<Self> {
        if dim == 0 || bounds.len() != dim || centers.len() % dim != 0 {
            return Err(Error::DimensionMismatch("centers and bounds disagree on dimension".into()));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidConfig(format!("spacing must be positive, got {spacing}")));
        }
        for (j, (lo, hi)) in bounds.iter().enumerate() {
            let slack = 1e-9 * (hi - lo).abs().max(spacing);
            if centers.chunks_exact(dim).any(|c| c[j] < lo - slack || c[j] > hi + slack) {
                return Err(Error::InvalidConfig("centers must lie within the grid bounds".into()));
            }
        }
        let mut rows: Vec<&[f64]> = centers.chunks_exact(dim).collect();
        rows.sort_by(|a, b| lex_cmp(a, b));
        rows.dedup();
        centers = rows.concat();
        Ok(Self {
            dim,
            centers,
            spacing,
            bounds,
        })
    }

    pub fn len(&self) -> usize {
        self.centers.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn center(&self, l: usize) -> &[f64] {
        &self.centers[l * self.dim..(l + 1) * self.dim]
    }

    pub fn centers(&self) -> impl Iterator<Item = &[f64]> {
        self.centers.chunks_exact(self.dim)
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }
}

/// Number of lattice nodes along an axis of length `extent`.
pub(crate) fn axis_count(extent: f64, spacing: f64) -> usize {
    (extent / spacing + 1e-9).floor() as usize + 1
}

/// Uniform lattice over `bounds` with both endpoints of every axis included
/// when the extent is a multiple of `spacing`.
pub fn build_grid(bounds: &[(f64, f64)], spacing: f64) -> Result<CenterGrid> {
    build_grid_capped(bounds, spacing, DEFAULT_CENTER_CAP)
}

pub fn build_grid_capped(bounds: &[(f64, f64)], spacing: f64, cap: usize) -> Result<CenterGrid> {
    if bounds.is_empty() {
        return Err(Error::InvalidConfig("grid bounds must have at least one axis".into()));
    }
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::InvalidConfig(format!("spacing must be positive, got {spacing}")));
    }
    if bounds.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && hi >= lo)) {
        return Err(Error::InvalidConfig("grid bounds must be finite with lo ≤ hi".into()));
    }
    let counts: Vec<usize> = bounds.iter().map(|(lo, hi)| axis_count(hi - lo, spacing)).collect();
    let total = counts
        .iter()
        .try_fold(1usize, |acc, &c| acc.checked_mul(c))
        .unwrap_or(usize::MAX);
    if total > cap {
        return Err(Error::TooManyCenters { count: total, cap });
    }
    let dim = bounds.len();
    let mut centers = Vec::with_capacity(total * dim);
    let mut idx = vec![0usize; dim];
    for _ in 0..total {
        centers.extend(idx.iter().zip(bounds).map(|(&i, (lo, _))| lo + i as f64 * spacing));
        // odometer with the last axis fastest: lexicographic order
        for j in (0..dim).rev() {
            idx[j] += 1;
            if idx[j] < counts[j] {
                break;
            }
            idx[j] = 0;
        }
    }
    Ok(CenterGrid {
        dim,
        centers,
        spacing,
        bounds: bounds.to_vec(),
    })
}

/// The data's bounding box grown by `3 ×` the widest kernel on every side.
pub fn default_bounds(train: &TrainingSet, kernels: &[Kernel]) -> Bounds {
    let pad = 3.0 * kernels.iter().map(|k| k.spec().width()).fold(0.0, f64::max);
    train.bounding_box().into_iter().map(|(lo, hi)| (lo - pad, hi + pad)).collect()
}

#[derive(Clone, Debug)]
pub struct DictionaryBlock {
    pub kernel: Kernel,
    pub grid: CenterGrid,
    /// First column of this block in the stacked design.
    pub offset: usize,
}

#[derive(Clone, Debug)]
pub struct Dictionary {
    blocks: Vec<DictionaryBlock>,
    column_index: Vec<(usize, usize)>,
    design: DMatrix<f64>,
}

impl Dictionary {
    pub fn blocks(&self) -> &[DictionaryBlock] {
        &self.blocks
    }

    /// The stacked `M × P` design matrix.
    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn block_design(&self, n: usize) -> DMatrixView<'_, f64> {
        let b = &self.blocks[n];
        self.design.columns(b.offset, b.grid.len())
    }

    pub fn n_columns(&self) -> usize {
        self.column_index.len()
    }

    /// `(block, position within block)` for a flat column.
    pub fn column_index(&self, column: usize) -> (usize, usize) {
        self.column_index[column]
    }

    pub fn flat_column(&self, block: usize, l: usize) -> usize {
        self.blocks[block].offset + l
    }

    pub fn center_of(&self, column: usize) -> &[f64] {
        let (n, l) = self.column_index[column];
        self.blocks[n].grid.center(l)
    }

    /// `f(x) = Σ_n Σ_l a_{n,l} k_n(x, z_{n,l})` at each point, skipping zero
    /// coefficients.
    pub fn evaluate(&self, coeffs: &DVector<f64>, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        if coeffs.len() != self.n_columns() {
            return Err(Error::DimensionMismatch("coefficient count differs from column count".into()));
        }
        let active: Vec<usize> = (0..coeffs.len()).filter(|&j| coeffs[j] != 0.0).collect();
        points
            .par_iter()
            .map(|x| {
                active.iter().try_fold(0.0, |acc, &j| {
                    let (n, _) = self.column_index[j];
                    Ok(acc + coeffs[j] * self.blocks[n].kernel.eval(x, self.center_of(j))?)
                })
            })
            .collect()
    }
}

impl Dictionary {
    /// CSV with columns `column,block,x1[,x2…],coefficient`, one row per
    /// design column.
    pub fn write_coefficients_csv<W: std::io::Write>(&self, coeffs: &DVector<f64>, writer: W) -> Result<()> {
        if coeffs.len() != self.n_columns() {
            return Err(Error::DimensionMismatch("coefficient count differs from column count".into()));
        }
        let dim = self.blocks.first().map_or(1, |b| b.grid.dim());
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["column".to_string(), "block".to_string()];
        header.extend((1..=dim).map(|k| format!("x{k}")));
        header.push("coefficient".into());
        w.write_record(&header)?;
        for j in 0..self.n_columns() {
            let (n, _) = self.column_index[j];
            let mut row = vec![j.to_string(), n.to_string()];
            row.extend(self.center_of(j).iter().map(|c| format!("{c:.16e}")));
            row.push(format!("{:.16e}", coeffs[j]));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds the stacked design matrix for `kernels[n]` centered on `grids[n]`.
pub fn assemble_design(kernels: &[Kernel], grids: &[CenterGrid], train: &TrainingSet) -> Result<Dictionary> {
    if kernels.is_empty() || kernels.len() != grids.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} kernels for {} grids",
            kernels.len(),
            grids.len()
        )));
    }
    let mut blocks = Vec::with_capacity(kernels.len());
    let mut column_index = Vec::new();
    for (n, (kernel, grid)) in kernels.iter().zip(grids).enumerate() {
        if kernel.dim() != train.dim() || grid.dim() != train.dim() {
            return Err(Error::DimensionMismatch(format!(
                "block {n}: kernel/grid dimension differs from data dimension {}",
                train.dim()
            )));
        }
        blocks.push(DictionaryBlock {
            kernel: kernel.clone(),
            grid: grid.clone(),
            offset: column_index.len(),
        });
        column_index.extend((0..grid.len()).map(|l| (n, l)));
    }
    let columns: Vec<(&Kernel, &[f64])> = column_index
        .iter()
        .map(|&(n, l)| (&blocks[n].kernel, blocks[n].grid.center(l)))
        .collect();
    let rows: Vec<Vec<f64>> = (0..train.len())
        .into_par_iter()
        .map(|m| {
            let x = train.site(m);
            columns.iter().map(|(k, z)| k.eval(x, z)).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let design = DMatrix::from_fn(train.len(), column_index.len(), |m, j| rows[m][j]);
    Ok(Dictionary {
        blocks,
        column_index,
        design,
    })
}

/// `[G]_{m,n} = k(x_m, x_n)`, exactly symmetric.
pub fn assemble_gram(kernel: &Kernel, train: &TrainingSet) -> Result<DMatrix<f64>> {
    if kernel.dim() != train.dim() {
        return Err(Error::DimensionMismatch("kernel and data dimensions differ".into()));
    }
    let m = train.len();
    let upper: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| (i..m).map(|j| kernel.eval(train.site(i), train.site(j))).collect())
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(m, m, |i, j| {
        if i <= j {
            upper[i][j - i]
        } else {
            upper[j][i - j]
        }
    }))
}
