//! Observation matrices, their loaders and the csv writer.
//!
//! Observations are stored row-wise: `samples` is N × M with one observation
//! per row. Modules that need column-wise math transpose locally.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use byteorder::{BigEndian, ReadBytesExt};
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A validated set of observations with optional class labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    samples: DMatrix<f64>,
    labels: Option<Vec<usize>>,
    pub name: String,
    pub source: String,
    /// Generator side-channel: intrinsic coordinates (swiss roll `t`, `h`).
    pub intrinsic: Option<DMatrix<f64>>,
    /// Generator side-channel: `(row, col)` positions replaced by sparse noise.
    pub corrupted: Vec<(usize, usize)>,
}

impl Dataset {
    pub fn new(
        samples: DMatrix<f64>,
        labels: Option<Vec<usize>>,
        name: impl Into<String>,
        source: impl Into<String>,
    ) -> Result<Self> {
        let (n, m) = samples.shape();
        if n < 2 {
            return Err(Error::arg(format!("dataset needs at least 2 observations, got {n}")));
        }
        if m < 1 {
            return Err(Error::arg("dataset needs at least 1 feature"));
        }
        if let Some((idx, _)) = samples.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::format(format!(
                "non-finite entry at row {}, column {}",
                idx % n,
                idx / n
            )));
        }
        if let Some(labels) = &labels {
            validate_labels(labels, n)?;
        }
        Ok(Self {
            samples,
            labels,
            name: name.into(),
            source: source.into(),
            intrinsic: None,
            corrupted: Vec::new(),
        })
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.samples.ncols()
    }

    pub fn n_classes(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().copied().max().map_or(0, |c| c + 1))
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        validate_labels(&labels, self.n_samples())?;
        self.labels = Some(labels);
        Ok(self)
    }

    /// Copy of this dataset with rows reordered so that row `i` is old row `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let n = self.n_samples();
        let mut seen = vec![false; n];
        if order.len() != n || order.iter().any(|&i| i >= n || std::mem::replace(&mut seen[i], true)) {
            return Err(Error::arg("row order must be a permutation of 0..N"));
        }
        let samples = DMatrix::from_fn(n, self.n_features(), |r, c| self.samples[(order[r], c)]);
        let labels = self.labels.as_ref().map(|l| order.iter().map(|&i| l[i]).collect());
        let mut out = Dataset::new(samples, labels, self.name.clone(), self.source.clone())?;
        out.intrinsic = self
            .intrinsic
            .as_ref()
            .map(|t| DMatrix::from_fn(n, t.ncols(), |r, c| t[(order[r], c)]));
        Ok(out)
    }

    /// Write as csv: header `x0,…,x{M-1}[,label]`, one row per observation.
    ///
    /// Floats use Rust's shortest round-trip formatting, so reloading is bit-exact.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        let mut header: Vec<String> = (0..self.n_features()).map(|j| format!("x{j}")).collect();
        if self.labels.is_some() {
            header.push("label".into());
        }
        w.write_record(&header).map_err(|e| csv_err(path, e))?;
        for i in 0..self.n_samples() {
            let mut rec: Vec<String> = self.samples.row(i).iter().map(|v| v.to_string()).collect();
            if let Some(l) = &self.labels {
                rec.push(l[i].to_string());
            }
            w.write_record(&rec).map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Writes a plain numeric matrix with the given header, shortest round-trip floats.
pub fn write_matrix_csv(path: impl AsRef<Path>, header: &[String], m: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    if header.len() != m.ncols() {
        return Err(Error::arg("header length differs from column count"));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn validate_labels(labels: &[usize], n: usize) -> Result<()> {
    if labels.len() != n {
        return Err(Error::format(format!(
            "label vector has length {}, expected {n}",
            labels.len()
        )));
    }
    let c = labels.iter().copied().max().map_or(0, |c| c + 1);
    let mut counts = vec![0usize; c];
    for &l in labels {
        counts[l] += 1;
    }
    if let Some(empty) = counts.iter().position(|&k| k == 0) {
        return Err(Error::format(format!("class {empty} has no members")));
    }
    Ok(())
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::format(format!("{}: {e}", path.display()))
    }
}

/// On-disk dataset layouts accepted by [`load_matrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Idx,
    ImageDir,
}

impl FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "idx" => Ok(Self::Idx),
            "image-dir" | "imagedir" | "images" => Ok(Self::ImageDir),
            other => Err(Error::arg(format!("unknown matrix format '{other}'"))),
        }
    }
}

pub fn load_matrix(path: impl AsRef<Path>, format: MatrixFormat) -> Result<Dataset> {
    let path = path.as_ref();
    match format {
        MatrixFormat::Csv => load_csv(path),
        MatrixFormat::Idx => load_idx(path),
        MatrixFormat::ImageDir => load_image_dir(path),
    }
}

fn load_csv(path: &Path) -> Result<Dataset> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Option<Vec<usize>> = None;
    let mut width = None;
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if line == 0 && rec.iter().any(|f| f.parse::<f64>().is_err()) {
            if rec.iter().next_back() == Some("label") {
                labels = Some(Vec::new());
            }
            continue;
        }
        let n_feat = rec.len() - usize::from(labels.is_some());
        if *width.get_or_insert(rec.len()) != rec.len() {
            return Err(Error::format(format!("ragged csv row {}", line + 1)));
        }
        let mut row = Vec::with_capacity(n_feat);
        for f in rec.iter().take(n_feat) {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::format(format!("row {}: '{f}' is not a number", line + 1)))?;
            if !v.is_finite() {
                return Err(Error::format(format!("row {}: non-finite entry", line + 1)));
            }
            row.push(v);
        }
        if let Some(labels) = labels.as_mut() {
            let raw = rec.get(n_feat).unwrap_or_default();
            let l = raw
                .parse::<usize>()
                .map_err(|_| Error::format(format!("row {}: bad label '{raw}'", line + 1)))?;
            labels.push(l);
        }
        rows.push(row);
    }
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    let samples = DMatrix::from_fn(n, m, |i, j| rows[i][j]);
    Dataset::new(samples, labels, file_stem(path), path.display().to_string())
}

const IDX_SCALE_U8: f64 = 255.0;

/// Big-endian IDX container: two zero bytes, a type code, a rank byte, then
/// `rank` u32 dimensions. Dimension 0 indexes observations.
fn load_idx(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (dims, values) = parse_idx(&bytes)?;
    let n = dims[0];
    let m = dims[1..].iter().product::<usize>().max(1);
    let samples = DMatrix::from_fn(n, m, |i, j| values[i * m + j]);
    Dataset::new(samples, None, file_stem(path), path.display().to_string())
}

/// Read a rank-1 IDX file of integer class labels.
pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut cur = std::io::Cursor::new(&bytes[..]);
    let header = read_idx_header(&mut cur)?;
    if header.dims.len() != 1 {
        return Err(Error::format("label file must be a rank-1 idx array"));
    }
    let n = header.dims[0];
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let v = match header.code {
            0x08 => cur.read_u8().map(i64::from),
            0x09 => cur.read_i8().map(i64::from),
            0x0B => cur.read_i16::<BigEndian>().map(i64::from),
            0x0C => cur.read_i32::<BigEndian>().map(i64::from),
            _ => return Err(Error::format("label file must hold integers")),
        }
        .map_err(|_| Error::format("truncated idx label payload"))?;
        out.push(usize::try_from(v).map_err(|_| Error::format("negative label"))?);
    }
    Ok(out)
}

struct IdxHeader {
    code: u8,
    dims: Vec<usize>,
}

fn read_idx_header(cur: &mut std::io::Cursor<&[u8]>) -> Result<IdxHeader> {
    let mut magic = [0u8; 4];
    cur.read_exact(&mut magic)
        .map_err(|_| Error::format("idx file shorter than its magic number"))?;
    if magic[0] != 0 || magic[1] != 0 {
        return Err(Error::format("bad idx magic number"));
    }
    let rank = magic[3] as usize;
    if rank == 0 {
        return Err(Error::format("idx rank must be at least 1"));
    }
    let dims = (0..rank)
        .map(|_| cur.read_u32::<BigEndian>().map(|d| d as usize))
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|_| Error::format("truncated idx dimensions"))?;
    Ok(IdxHeader {
        code: magic[2],
        dims,
    })
}

fn parse_idx(bytes: &[u8]) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut cur = std::io::Cursor::new(bytes);
    let header = read_idx_header(&mut cur)?;
    let count: usize = header.dims.iter().product();
    let mut values = Vec::with_capacity(count);
    let truncated = |_| Error::format("truncated idx payload");
    for _ in 0..count {
        let v = match header.code {
            0x08 => f64::from(cur.read_u8().map_err(truncated)?) / IDX_SCALE_U8,
            0x09 => f64::from(cur.read_i8().map_err(truncated)?),
            0x0B => f64::from(cur.read_i16::<BigEndian>().map_err(truncated)?),
            0x0C => f64::from(cur.read_i32::<BigEndian>().map_err(truncated)?),
            0x0D => f64::from(cur.read_f32::<BigEndian>().map_err(truncated)?),
            0x0E => cur.read_f64::<BigEndian>().map_err(truncated)?,
            code => return Err(Error::format(format!("unknown idx type code 0x{code:02x}"))),
        };
        if !v.is_finite() {
            return Err(Error::format("non-finite entry in idx payload"));
        }
        values.push(v);
    }
    Ok((header.dims, values))
}

/// `root/<class>/<image>.{png,pgm}`; classes are subdirectories in name order,
/// images are converted to 8-bit grayscale, flattened in raster order and scaled to [0, 1].
fn load_image_dir(root: &Path) -> Result<Dataset> {
    let mut class_dirs = sorted_entries(root)?
        .into_iter()
        .filter(|p| p.is_dir())
        .collect::<Vec<_>>();
    class_dirs.sort();
    if class_dirs.is_empty() {
        return Err(Error::format(format!("{} has no class subdirectories", root.display())));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut shape: Option<(u32, u32)> = None;
    for (class, dir) in class_dirs.iter().enumerate() {
        let mut files = sorted_entries(dir)?
            .into_iter()
            .filter(|p| {
                p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "pgm"))
            })
            .collect::<Vec<_>>();
        files.sort();
        for file in files {
            let img = image::open(&file)
                .map_err(|e| Error::format(format!("{}: {e}", file.display())))?
                .into_luma8();
            let dims = img.dimensions();
            if *shape.get_or_insert(dims) != dims {
                return Err(Error::format(format!(
                    "{} is {}x{}, expected {}x{}",
                    file.display(),
                    dims.0,
                    dims.1,
                    shape.unwrap().0,
                    shape.unwrap().1
                )));
            }
            rows.push(img.as_raw().iter().map(|&p| f64::from(p) / 255.0).collect());
            labels.push(class);
        }
    }
    if rows.is_empty() {
        return Err(Error::format(format!("no png/pgm images under {}", root.display())));
    }
    let m = rows[0].len();
    let samples = DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j]);
    Dataset::new(samples, Some(labels), file_stem(root), root.display().to_string())
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(dir, e))?;
    out.sort();
    Ok(out)
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string()
}
