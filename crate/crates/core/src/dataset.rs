//! Real-valued data matrices, the stacked original/synthetic pool used by
//! the propensity classifier, neighbour construction and CSV I/O.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{PmseError, Result};
use crate::scalar::Scalar;

/// An `n × q` matrix of finite reals with named columns, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix<T> {
    values: Vec<T>,
    rows: usize,
    cols: usize,
    column_names: Vec<String>,
}

impl<T: Scalar> DataMatrix<T> {
    /// Build from row-major storage. Requires at least one row and column,
    /// one name per column and only finite entries.
    pub fn from_row_major(values: Vec<T>, rows: usize, column_names: Vec<String>) -> Result<Self> {
        let cols = column_names.len();
        if rows == 0 || cols == 0 {
            return Err(PmseError::shape(
                "data matrix",
                "n >= 1 and q >= 1",
                format!("{rows}x{cols}"),
            ));
        }
        if values.len() != rows * cols {
            return Err(PmseError::shape(
                "data matrix storage",
                format!("{} values", rows * cols),
                values.len(),
            ));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(PmseError::Domain(format!(
                "non-finite entry at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self {
            values,
            rows,
            cols,
            column_names,
        })
    }

    /// Build from a list of rows; every row must have `column_names.len()` entries.
    pub fn from_rows(rows: &[Vec<T>], column_names: Vec<String>) -> Result<Self> {
        let cols = column_names.len();
        let mut values = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(PmseError::shape(
                    "row length",
                    cols,
                    format!("{} in row {i}", row.len()),
                ));
            }
            values.extend_from_slice(row);
        }
        Self::from_row_major(values, rows.len(), column_names)
    }

    /// Rows with generated column names `x1..xq`.
    pub fn from_unnamed_rows(rows: &[Vec<T>]) -> Result<Self> {
        let q = rows.first().map_or(0, Vec::len);
        Self::from_rows(rows, default_column_names(q))
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.values[row * self.cols + col]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[T] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.values.chunks_exact(self.cols)
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = T> + '_ {
        self.values.iter().skip(col).step_by(self.cols).copied()
    }

    pub fn as_row_major(&self) -> &[T] {
        &self.values
    }

    /// Apply `f` to every entry; fails if the result is not finite.
    pub fn map(&self, mut f: impl FnMut(usize, T) -> T) -> Result<Self> {
        let cols = self.cols;
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| f(i % cols, v))
            .collect();
        Self::from_row_major(values, self.rows, self.column_names.clone())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }
}

/// Column names `x1, x2, …, xq`.
pub fn default_column_names(q: usize) -> Vec<String> {
    (1..=q).map(|j| format!("x{j}")).collect()
}

/// Original and synthetic rows stacked into one pool with a synthetic-row
/// indicator. Rows `0..n` are original (label `false`), rows `n..2n` synthetic.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPool<T> {
    predictors: DataMatrix<T>,
    labels: Vec<bool>,
}

impl<T: Scalar> LabeledPool<T> {
    /// Pool with explicit labels. `labels` must have one entry per row, an
    /// even length, and exactly half of them set.
    pub fn new(predictors: DataMatrix<T>, labels: Vec<bool>) -> Result<Self> {
        let big_n = predictors.nrows();
        if labels.len() != big_n {
            return Err(PmseError::shape("pool labels", big_n, labels.len()));
        }
        let ones = labels.iter().filter(|&&l| l).count();
        if !big_n.is_multiple_of(2) || ones * 2 != big_n {
            return Err(PmseError::shape(
                "pool label balance",
                format!("{} ones of {big_n}", big_n / 2),
                ones,
            ));
        }
        Ok(Self { predictors, labels })
    }

    pub fn predictors(&self) -> &DataMatrix<T> {
        &self.predictors
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    /// Total row count `N = 2n`.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Rows per block, `n`.
    pub fn block_size(&self) -> usize {
        self.labels.len() / 2
    }

    /// Same predictors with every label flipped.
    pub fn with_swapped_labels(&self) -> Self {
        Self {
            predictors: self.predictors.clone(),
            labels: self.labels.iter().map(|l| !l).collect(),
        }
    }
}

/// Stack `original` over `synthetic` and label synthetic rows 1.
/// Predictors are the raw columns.
pub fn stack_and_label<T: Scalar>(
    original: &DataMatrix<T>,
    synthetic: &DataMatrix<T>,
) -> Result<LabeledPool<T>> {
    if !original.same_shape(synthetic) {
        return Err(PmseError::shape(
            "stack_and_label",
            format!("{}x{}", original.nrows(), original.ncols()),
            format!("{}x{}", synthetic.nrows(), synthetic.ncols()),
        ));
    }
    let n = original.nrows();
    let mut values = Vec::with_capacity(2 * original.values.len());
    values.extend_from_slice(&original.values);
    values.extend_from_slice(&synthetic.values);
    let predictors = DataMatrix::from_row_major(values, 2 * n, original.column_names.clone())?;
    let labels = (0..2 * n).map(|i| i >= n).collect();
    Ok(LabeledPool { predictors, labels })
}

/// Neighbouring dataset: a copy of `x` where every entry of `row_index`
/// has independent N(0, noise_sd²) noise added.
pub fn perturb_one_row<T: Scalar, R: Rng + ?Sized>(
    x: &DataMatrix<T>,
    row_index: usize,
    noise_sd: T,
    rng: &mut R,
) -> Result<DataMatrix<T>> {
    if row_index >= x.rows {
        return Err(PmseError::Index {
            index: row_index,
            rows: x.rows,
        });
    }
    if !(noise_sd >= T::zero()) || !noise_sd.is_finite() {
        return Err(PmseError::Domain(format!(
            "noise sd must be finite and >= 0, got {noise_sd}"
        )));
    }
    let mut out = x.clone();
    let start = row_index * x.cols;
    for v in &mut out.values[start..start + x.cols] {
        *v = *v + noise_sd * T::standard_normal(rng);
    }
    Ok(out)
}

/// Read a headered CSV of numbers. Parse errors report 1-based data-row and
/// column positions (the header is not counted).
pub fn read_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<DataMatrix<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| PmseError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let csv_err = |source| PmseError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let names: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_owned)
        .collect();
    let q = names.len();
    let mut values = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        rows += 1;
        if record.len() != q {
            return Err(PmseError::shape(
                "csv row length",
                q,
                format!("{} in data row {rows}", record.len()),
            ));
        }
        for (j, cell) in record.iter().enumerate() {
            let parsed = cell.parse::<T>().ok().filter(|v| v.is_finite());
            match parsed {
                Some(v) => values.push(v),
                None => {
                    return Err(PmseError::Parse {
                        row: rows,
                        column: j + 1,
                        value: cell.to_owned(),
                    })
                }
            }
        }
    }
    DataMatrix::from_row_major(values, rows, names)
}

/// Write `x` as a headered CSV with 15-significant-digit decimals.
pub fn write_csv<T: Scalar>(x: &DataMatrix<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| PmseError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    write_csv_to(x, &mut out).map_err(io_err)?;
    out.flush().map_err(io_err)
}

/// CSV text of `x`, as written by [`write_csv`].
pub fn to_csv_string<T: Scalar>(x: &DataMatrix<T>) -> String {
    let mut buf = Vec::new();
    write_csv_to(x, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

fn write_csv_to<T: Scalar, W: Write>(x: &DataMatrix<T>, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{}", x.column_names.join(","))?;
    let mut line = String::new();
    for row in x.rows() {
        line.clear();
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&v.to_decimal_string());
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}
