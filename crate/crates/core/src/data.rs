//! Datasets, their on-disk formats, segment-based splitting and temporal chunking.
//!
//! A dataset is stored as two files: a comma-separated behavior/label table
//! and a little-endian binary embedding matrix (`SADC` format, 32-bit floats).
//! Rows of both files correspond one-to-one and appear in recording order
//! within each driver.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::ops::Range;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Matrix, Result};

pub const TABLE_HEADER: [&str; 11] = [
    "sample_id",
    "driver_id",
    "segment_hint",
    "order_index",
    "d_cl",
    "road_type",
    "curvature",
    "oncoming_type",
    "oncoming_dist",
    "lead_type",
    "lead_dist",
];

/// Optional trailing column carrying split tags.
pub const SPLIT_COLUMN: &str = "split";

/// Proxy label columns, in table order.
pub const LABEL_NAMES: [&str; 6] = [
    "road_type",
    "curvature",
    "oncoming_type",
    "oncoming_dist",
    "lead_type",
    "lead_dist",
];

pub const LABEL_ROAD_TYPE: usize = 0;
pub const LABEL_CURVATURE: usize = 1;

pub const EMBEDDING_MAGIC: &[u8; 4] = b"SADC";
pub const EMBEDDING_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Unassigned,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Unassigned => "unassigned",
        }
    }

    fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "" | "unassigned" => Some(Split::Unassigned),
            _ => None,
        }
    }
}

/// Embeddings, lateral-offset targets, proxy labels and per-sample metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub sample_id: Vec<u64>,
    pub embeddings: Matrix,
    /// Distance to lane center d_CL, meters.
    pub behavior: Vec<f64>,
    /// N × 6 raw proxy labels, columns as in [`LABEL_NAMES`].
    pub labels: Matrix,
    pub driver_id: Vec<u32>,
    /// Segment identifier; `-1` until [`segment_split`] derives one.
    pub segment_id: Vec<i64>,
    pub order_index: Vec<i64>,
    pub split: Vec<Split>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.behavior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.behavior.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.embeddings.cols()
    }

    /// Checks every structural invariant of the type.
    pub fn validate(&self) -> Result<()> {
        let n = self.behavior.len();
        let lens = [
            ("sample_id", self.sample_id.len()),
            ("embeddings", self.embeddings.rows()),
            ("labels", self.labels.rows()),
            ("driver_id", self.driver_id.len()),
            ("segment_id", self.segment_id.len()),
            ("order_index", self.order_index.len()),
            ("split", self.split.len()),
        ];
        for (name, len) in lens {
            if len != n {
                return Err(Error::Data(format!(
                    "{name} has length {len}, expected {n}"
                )));
            }
        }
        if self.embeddings.cols() == 0 {
            return Err(Error::Data("embedding dimension must be at least 1".into()));
        }
        if self.labels.cols() == 0 {
            return Err(Error::Data("at least one proxy label is required".into()));
        }
        check_finite(&self.embeddings)?;
        let mut last: HashMap<u32, i64> = HashMap::new();
        for (i, (&d, &o)) in self.driver_id.iter().zip(&self.order_index).enumerate() {
            if let Some(&prev) = last.get(&d) {
                if o <= prev {
                    return Err(Error::Data(format!(
                        "order_index not strictly increasing for driver {d} at row {i}"
                    )));
                }
            }
            last.insert(d, o);
        }
        Ok(())
    }

    /// Copies the given rows, in order, into a new dataset.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            sample_id: idx.iter().map(|&i| self.sample_id[i]).collect(),
            embeddings: self.embeddings.select_rows(idx),
            behavior: idx.iter().map(|&i| self.behavior[i]).collect(),
            labels: self.labels.select_rows(idx),
            driver_id: idx.iter().map(|&i| self.driver_id[i]).collect(),
            segment_id: idx.iter().map(|&i| self.segment_id[i]).collect(),
            order_index: idx.iter().map(|&i| self.order_index[i]).collect(),
            split: idx.iter().map(|&i| self.split[i]).collect(),
        }
    }

    pub fn indices_with_split(&self, split: Split) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.split[i] == split)
            .collect()
    }

    pub fn with_split(&self, split: Split) -> Dataset {
        self.subset(&self.indices_with_split(split))
    }

    /// Sorted distinct driver ids.
    pub fn drivers(&self) -> Vec<u32> {
        let mut d = self.driver_id.clone();
        d.sort_unstable();
        d.dedup();
        d
    }

    pub fn indices_of_driver(&self, driver: u32) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.driver_id[i] == driver)
            .collect()
    }

    pub fn label_column(&self, l: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.labels.get(i, l)).collect()
    }
}

fn check_finite(m: &Matrix) -> Result<()> {
    for (i, row) in m.iter_rows().enumerate() {
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEmbedding { row: i, col: j });
        }
    }
    Ok(())
}

/// Loads and validates a dataset from its table and embedding files.
pub fn load_dataset(table_path: &Path, embeddings_path: &Path) -> Result<Dataset> {
    let table = read_table(table_path)?;
    let embeddings = read_embeddings(embeddings_path)?;
    if table.behavior.len() != embeddings.rows() {
        return Err(Error::RowCountMismatch {
            table: table.behavior.len(),
            embeddings: embeddings.rows(),
        });
    }
    let n = table.behavior.len();
    let ds = Dataset {
        sample_id: table.sample_id,
        embeddings,
        behavior: table.behavior,
        labels: Matrix::from_vec(n, LABEL_NAMES.len(), table.labels)?,
        driver_id: table.driver_id,
        segment_id: table.segment_hint,
        order_index: table.order_index,
        split: table.split,
    };
    ds.validate()?;
    Ok(ds)
}

/// Writes both files of a dataset. The split column is written only when
/// some row carries a tag.
pub fn save_dataset(ds: &Dataset, table_path: &Path, embeddings_path: &Path) -> Result<()> {
    write_table(ds, table_path)?;
    write_embeddings(embeddings_path, &ds.embeddings)
}

struct Table {
    sample_id: Vec<u64>,
    driver_id: Vec<u32>,
    segment_hint: Vec<i64>,
    order_index: Vec<i64>,
    behavior: Vec<f64>,
    labels: Vec<f64>,
    split: Vec<Split>,
}

fn read_table(path: &Path) -> Result<Table> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let header = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let with_split = header.len() == TABLE_HEADER.len() + 1
        && header.get(TABLE_HEADER.len()) == Some(SPLIT_COLUMN);
    if header
        .iter()
        .take(TABLE_HEADER.len())
        .ne(TABLE_HEADER.iter().copied())
        || (header.len() != TABLE_HEADER.len() && !with_split)
    {
        return Err(Error::Header {
            path: path.to_path_buf(),
            expected: format!("{}[,{SPLIT_COLUMN}]", TABLE_HEADER.join(",")),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut t = Table {
        sample_id: Vec::new(),
        driver_id: Vec::new(),
        segment_hint: Vec::new(),
        order_index: Vec::new(),
        behavior: Vec::new(),
        labels: Vec::new(),
        split: Vec::new(),
    };
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let field = |k: usize| rec.get(k).unwrap_or("");
        let bad = |k: usize| {
            Error::Data(format!(
                "{}: row {}: cannot parse {} = `{}`",
                path.display(),
                line + 1,
                TABLE_HEADER.get(k).copied().unwrap_or(SPLIT_COLUMN),
                field(k)
            ))
        };
        t.sample_id.push(field(0).parse().map_err(|_| bad(0))?);
        t.driver_id.push(field(1).parse().map_err(|_| bad(1))?);
        let hint = if field(2).is_empty() {
            -1
        } else {
            field(2).parse().map_err(|_| bad(2))?
        };
        t.segment_hint.push(hint);
        t.order_index.push(field(3).parse().map_err(|_| bad(3))?);
        t.behavior.push(parse_real(field(4)).ok_or_else(|| bad(4))?);
        for k in 5..TABLE_HEADER.len() {
            t.labels.push(parse_real(field(k)).ok_or_else(|| bad(k))?);
        }
        let tag = if with_split {
            let k = TABLE_HEADER.len();
            Split::parse(field(k)).ok_or_else(|| bad(k))?
        } else {
            Split::Unassigned
        };
        t.split.push(tag);
    }
    Ok(t)
}

fn parse_real(s: &str) -> Option<f64> {
    if s.is_empty() || s.eq_ignore_ascii_case("nan") {
        return Some(f64::NAN);
    }
    s.parse().ok()
}

fn write_table(ds: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let with_split = ds.split.iter().any(|&s| s != Split::Unassigned);
    let mut header = TABLE_HEADER.to_vec();
    if with_split {
        header.push(SPLIT_COLUMN);
    }
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for i in 0..ds.len() {
        let mut rec = vec![
            ds.sample_id[i].to_string(),
            ds.driver_id[i].to_string(),
            ds.segment_id[i].to_string(),
            ds.order_index[i].to_string(),
            ds.behavior[i].to_string(),
        ];
        for l in 0..ds.labels.cols() {
            let v = ds.labels.get(i, l);
            // Type columns are integer codes.
            if v.is_finite() && v.fract() == 0.0 {
                rec.push(format!("{}", v as i64));
            } else {
                rec.push(v.to_string());
            }
        }
        if with_split {
            rec.push(ds.split[i].as_str().to_string());
        }
        w.write_record(&rec).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads an `SADC` embedding file into 64-bit floats.
pub fn read_embeddings(path: &Path) -> Result<Matrix> {
    let mut buf = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    decode_embeddings(&buf).map_err(|reason| Error::format(path, reason))
}

pub(crate) fn decode_embeddings(buf: &[u8]) -> std::result::Result<Matrix, String> {
    if buf.len() < 24 {
        return Err("file shorter than header".into());
    }
    if &buf[0..4] != EMBEDDING_MAGIC {
        return Err("magic mismatch, expected SADC".into());
    }
    let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
    if version != EMBEDDING_VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let n = u64::from_le_bytes(buf[8..16].try_into().unwrap()) as usize;
    let d = u64::from_le_bytes(buf[16..24].try_into().unwrap()) as usize;
    let expected = n
        .checked_mul(d)
        .and_then(|c| c.checked_mul(4))
        .ok_or("header sizes overflow")?;
    let body = &buf[24..];
    if body.len() != expected {
        return Err(format!(
            "payload is {} bytes, header implies {expected}",
            body.len()
        ));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Matrix::from_vec(n, d, data).map_err(|e| e.to_string())
}

/// Writes an `SADC` embedding file; values are narrowed to 32-bit floats.
pub fn write_embeddings(path: &Path, m: &Matrix) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&encode_embeddings(m))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub(crate) fn encode_embeddings(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + m.as_slice().len() * 4);
    out.extend_from_slice(EMBEDDING_MAGIC);
    out.extend_from_slice(&EMBEDDING_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for &v in m.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitConfig {
    /// Samples per segment; 30 is three seconds at 10 Hz.
    pub segment_len: usize,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            segment_len: 30,
            val_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Hash, PartialEq, Eq, Clone, Copy)]
enum SegmentKey {
    Hinted(u32, i64),
    Derived(u32, usize),
}

/// Assigns whole segments to train or validation.
///
/// Segments come from the `segment_id` hint when present, otherwise from
/// consecutive runs of `segment_len` rows per driver (a trailing partial run
/// is its own segment). `round(val_fraction × segments)` segments, rounded
/// half up, are drawn as validation with a seeded shuffle. The returned
/// dataset carries a dense segment ordinal in `segment_id`.
pub fn segment_split(d: &Dataset, cfg: &SplitConfig) -> Result<Dataset> {
    if cfg.segment_len == 0 {
        return Err(Error::arg("segment_len", "must be at least 1"));
    }
    if !(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0) {
        return Err(Error::arg("val_fraction", "must lie in (0, 1)"));
    }
    if d.split.iter().any(|&s| s != Split::Unassigned) {
        return Err(Error::Data("dataset already carries split tags".into()));
    }

    let mut seen_per_driver: HashMap<u32, usize> = HashMap::new();
    let mut ordinal: HashMap<SegmentKey, usize> = HashMap::new();
    let mut seg_of_row = Vec::with_capacity(d.len());
    for i in 0..d.len() {
        let drv = d.driver_id[i];
        let pos = seen_per_driver.entry(drv).or_insert(0);
        let key = if d.segment_id[i] >= 0 {
            SegmentKey::Hinted(drv, d.segment_id[i])
        } else {
            SegmentKey::Derived(drv, *pos / cfg.segment_len)
        };
        *pos += 1;
        let next = ordinal.len();
        seg_of_row.push(*ordinal.entry(key).or_insert(next));
    }

    let n_seg = ordinal.len();
    let n_val = (cfg.val_fraction * n_seg as f64 + 0.5).floor() as usize;
    let mut order: Vec<usize> = (0..n_seg).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    order.shuffle(&mut rng);
    let mut is_val = vec![false; n_seg];
    for &s in &order[..n_val.min(n_seg)] {
        is_val[s] = true;
    }

    let mut out = d.clone();
    for (i, &s) in seg_of_row.iter().enumerate() {
        out.segment_id[i] = s as i64;
        out.split[i] = if is_val[s] { Split::Val } else { Split::Train };
    }
    Ok(out)
}

/// Row ranges splitting `n` ordered samples into `ceil(1 / fraction)` chunks.
///
/// Chunks never go below one sample, so small inputs yield `n` singleton
/// chunks. Sizes differ by at most one with the larger chunks first.
pub fn chunk_ranges(n: usize, fraction: f64) -> Result<Vec<Range<usize>>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::arg("fraction", "must lie in (0, 1]"));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    // Guard against 1/0.1 landing a hair above 10.
    let requested = ((1.0 / fraction) - 1e-9).ceil().max(1.0) as usize;
    let k = requested.min(n);
    let base = n / k;
    let extra = n % k;
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for c in 0..k {
        let len = base + usize::from(c < extra);
        out.push(start..start + len);
        start += len;
    }
    Ok(out)
}

/// Splits a dataset, in row order, into contiguous temporal chunks.
pub fn temporal_subsets(d: &Dataset, fraction: f64) -> Result<Vec<Dataset>> {
    Ok(chunk_ranges(d.len(), fraction)?
        .into_iter()
        .map(|r| d.subset(&r.collect::<Vec<_>>()))
        .collect())
}
