//! Dataset sources: files on disk or named synthetic generators.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use lowrank_isomap::generators::{gen_labeled_clusters, gen_subspace_union, gen_swiss_roll};
use lowrank_isomap::{load_idx_labels, load_matrix, Dataset, MatrixFormat};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenKind {
    Blobs,
    Swiss,
    Subspaces,
}

impl GenKind {
    fn parse(name: &str) -> Option<Self> {
        match name {
            "blobs" | "clusters" => Some(Self::Blobs),
            "swiss" | "swiss-roll" | "swissroll" => Some(Self::Swiss),
            "subspaces" | "subspace" => Some(Self::Subspaces),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Self::Blobs => "blobs",
            Self::Swiss => "swiss",
            Self::Subspaces => "subspaces",
        }
    }

    fn defaults(self) -> &'static [(&'static str, f64)] {
        match self {
            Self::Blobs => &[("classes", 4.0), ("per", 25.0), ("dim", 10.0), ("sep", 8.0)],
            Self::Swiss => &[("n", 800.0), ("noise", 0.05)],
            Self::Subspaces => &[("ambient", 30.0), ("dim", 2.0), ("count", 3.0), ("per", 20.0), ("corrupt", 0.0)],
        }
    }
}

/// A generator name with every parameter filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub kind: GenKind,
    params: BTreeMap<&'static str, f64>,
    pub seed: u64,
}

impl GenSpec {
    /// Parses `name[:key=value,...]`. Returns `Ok(None)` when `raw` does not name a generator.
    pub fn parse(raw: &str, default_seed: u64) -> Result<Option<Self>, Failure> {
        let (name, rest) = raw.split_once(':').unwrap_or((raw, ""));
        let Some(kind) = GenKind::parse(name.trim()) else {
            return Ok(None);
        };
        let mut params: BTreeMap<&'static str, f64> = kind.defaults().iter().copied().collect();
        let mut seed = default_seed;
        for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Failure::Usage(format!("generator parameter `{item}` is not key=value")))?;
            let (k, v) = (k.trim(), v.trim());
            if k == "seed" {
                seed = v.parse().map_err(|_| Failure::Usage(format!("bad seed `{v}`")))?;
                continue;
            }
            let key = kind
                .defaults()
                .iter()
                .map(|(name, _)| *name)
                .find(|name| *name == k)
                .ok_or_else(|| Failure::Usage(format!("`{}` has no parameter `{k}`", kind.name())))?;
            let value: f64 = v
                .parse()
                .map_err(|_| Failure::Usage(format!("parameter `{k}`: `{v}` is not a number")))?;
            params.insert(key, value);
        }
        Ok(Some(Self { kind, params, seed }))
    }

    fn count(&self, key: &str) -> Result<usize, Failure> {
        let v = self.params[key];
        if v < 0.0 || v.fract() != 0.0 {
            return Err(Failure::Usage(format!("parameter `{key}` must be a non-negative integer, got {v}")));
        }
        Ok(v as usize)
    }

    /// Same recipe resized to roughly `n` observations.
    pub fn with_size(&self, n: usize) -> Result<Self, Failure> {
        let mut out = self.clone();
        let (key, per) = match self.kind {
            GenKind::Swiss => ("n", n),
            GenKind::Blobs => ("per", n / self.count("classes")?.max(1)),
            GenKind::Subspaces => ("per", n / self.count("count")?.max(1)),
        };
        out.params.insert(key, per as f64);
        Ok(out)
    }

    pub fn generate(&self) -> Result<Dataset, Failure> {
        let p = &self.params;
        let data = match self.kind {
            GenKind::Blobs => gen_labeled_clusters(
                self.count("classes")?,
                self.count("per")?,
                self.count("dim")?,
                p["sep"],
                self.seed,
            ),
            GenKind::Swiss => gen_swiss_roll(self.count("n")?, p["noise"], self.seed),
            GenKind::Subspaces => gen_subspace_union(
                self.count("ambient")?,
                self.count("dim")?,
                self.count("count")?,
                self.count("per")?,
                p["corrupt"],
                self.seed,
            ),
        };
        Ok(data?)
    }
}

impl fmt::Display for GenSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.kind.name())?;
        for (k, _) in self.kind.defaults() {
            write!(f, "{k}={},", self.params[k])?;
        }
        write!(f, "seed={}", self.seed)
    }
}

/// Resolved input description, as recorded in a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    /// Canonical generator spec or absolute path.
    pub source: String,
    pub format: Option<String>,
    pub labels: Option<PathBuf>,
}

fn absolute(p: &Path) -> Result<PathBuf, Failure> {
    std::fs::canonicalize(p).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))
}

impl InputSpec {
    /// A string naming a generator is treated as one unless a file of that name exists.
    pub fn resolve(raw: &str, format: Option<&str>, labels: Option<&Path>, seed: u64) -> Result<Self, Failure> {
        let labels = labels.map(absolute).transpose()?;
        if !Path::new(raw).exists() {
            if let Some(spec) = GenSpec::parse(raw, seed)? {
                if format.is_some() {
                    return Err(Failure::Usage("--format does not apply to generator inputs".into()));
                }
                return Ok(Self { source: spec.to_string(), format: None, labels });
            }
        }
        let path = absolute(Path::new(raw))?;
        let format = match format {
            Some(f) => f.parse::<MatrixFormat>()?,
            None if path.is_dir() => MatrixFormat::ImageDir,
            None => match path.extension().and_then(|e| e.to_str()) {
                Some("idx") | Some("ubyte") => MatrixFormat::Idx,
                _ => MatrixFormat::Csv,
            },
        };
        let format = match format {
            MatrixFormat::Csv => "csv",
            MatrixFormat::Idx => "idx",
            MatrixFormat::ImageDir => "image-dir",
        };
        Ok(Self { source: path.display().to_string(), format: Some(format.into()), labels })
    }

    pub fn generator(&self) -> Result<Option<GenSpec>, Failure> {
        if self.format.is_some() {
            return Ok(None);
        }
        GenSpec::parse(&self.source, 0)
    }

    pub fn load(&self) -> Result<Dataset, Failure> {
        let data = match (&self.format, self.generator()?) {
            (None, Some(spec)) => spec.generate()?,
            (Some(f), _) => load_matrix(&self.source, f.parse()?)?,
            (None, None) => return Err(Failure::Runtime(format!("`{}` is not a known generator", self.source))),
        };
        match &self.labels {
            None => Ok(data),
            Some(p) => Ok(data.with_labels(read_labels(p)?)?),
        }
    }
}

/// Labels from a one-column csv (header `label` optional) or an IDX label file.
pub fn read_labels(path: &Path) -> Result<Vec<usize>, Failure> {
    if path.extension().and_then(|e| e.to_str()) != Some("csv") {
        return Ok(load_idx_labels(path)?);
    }
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
        let field = rec.get(0).unwrap_or_default();
        if line == 0 && field == "label" {
            continue;
        }
        out.push(field.parse().map_err(|_| {
            Failure::Runtime(format!("{}: line {}: bad label `{field}`", path.display(), line + 1))
        })?);
    }
    Ok(out)
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<(), Failure> {
    let mut text = String::from("label\n");
    for l in labels {
        text.push_str(&l.to_string());
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

/// Running sha256 over dataset contents and raw files.
#[derive(Default)]
pub struct Checksum(Sha256);

impl Checksum {
    pub fn dataset(&mut self, data: &Dataset) {
        let x = data.samples();
        self.0.update((x.nrows() as u64).to_le_bytes());
        self.0.update((x.ncols() as u64).to_le_bytes());
        for i in 0..x.nrows() {
            for v in x.row(i).iter() {
                self.0.update(v.to_bits().to_le_bytes());
            }
        }
        match data.labels() {
            Some(l) => {
                self.0.update([1]);
                for v in l {
                    self.0.update((*v as u64).to_le_bytes());
                }
            }
            None => self.0.update([0]),
        }
    }

    pub fn file(&mut self, path: &Path) -> Result<(), Failure> {
        let bytes = std::fs::read(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
        self.0.update((bytes.len() as u64).to_le_bytes());
        self.0.update(bytes);
        Ok(())
    }

    pub fn hex(self) -> String {
        format!("{:x}", self.0.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_spec_fills_defaults() {
        let s = GenSpec::parse("swiss:n=400", 7).unwrap().unwrap();
        assert_eq!(s.to_string(), "swiss:n=400,noise=0.05,seed=7");
        let again = GenSpec::parse(&s.to_string(), 0).unwrap().unwrap();
        assert_eq!(again, s);
        assert_eq!(
            GenSpec::parse("blobs", 3).unwrap().unwrap().to_string(),
            "blobs:classes=4,per=25,dim=10,sep=8,seed=3"
        );
    }

    #[test]
    fn bad_specs() {
        assert!(GenSpec::parse("data.csv", 0).unwrap().is_none());
        assert!(matches!(GenSpec::parse("blobs:size=3", 0), Err(Failure::Usage(_))));
        assert!(matches!(GenSpec::parse("blobs:per", 0), Err(Failure::Usage(_))));
        assert!(matches!(GenSpec::parse("swiss:n=abc", 0), Err(Failure::Usage(_))));
        let half = GenSpec::parse("blobs:per=2.5", 0).unwrap().unwrap();
        assert!(matches!(half.generate(), Err(Failure::Usage(_))));
    }

    #[test]
    fn resize() {
        let s = GenSpec::parse("blobs:classes=5", 0).unwrap().unwrap().with_size(500).unwrap();
        assert_eq!(s.generate().unwrap().n_samples(), 500);
        let s = GenSpec::parse("swiss", 0).unwrap().unwrap().with_size(123).unwrap();
        assert_eq!(s.generate().unwrap().n_samples(), 123);
    }

    #[test]
    fn checksum_tracks_content() {
        let a = GenSpec::parse("blobs", 0).unwrap().unwrap().generate().unwrap();
        let b = GenSpec::parse("blobs", 1).unwrap().unwrap().generate().unwrap();
        let hash = |d: &Dataset| {
            let mut c = Checksum::default();
            c.dataset(d);
            c.hex()
        };
        assert_eq!(hash(&a), hash(&a));
        assert_ne!(hash(&a), hash(&b));
        assert_eq!(hash(&a).len(), 64);
    }
}
