//! Dataset loaders, PGM images, parameter checkpoints and result tables.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::models::{ParamSet, Tensor};
use crate::series::{MultivariateSeries, WindowSample, WindowTarget};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    /// Header row, timestamp column, numeric variate columns.
    EttCsv,
    /// Headerless rows of `d·T` values (variate-major) and an integer label.
    LabeledWindowsCsv,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub path: PathBuf,
    pub format: DatasetFormat,
    /// Variate columns to keep, by header name; all when `None`.
    pub columns: Option<Vec<String>>,
    /// Variates per labelled window.
    pub variates: usize,
    /// Label column index; the last column when `None`.
    pub label_column: Option<usize>,
    pub split: [f64; 3],
}

impl DatasetManifest {
    pub fn new(path: impl Into<PathBuf>, format: DatasetFormat) -> Self {
        Self {
            path: path.into(),
            format,
            columns: None,
            variates: 1,
            label_column: None,
            split: [0.7, 0.1, 0.2],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.split.iter().any(|&r| !(r > 0.0)) || (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "split ratios {:?} must be positive and sum to 1",
                self.split
            )));
        }
        if self.variates == 0 {
            return Err(Error::InvalidArgument("variates must be positive".into()));
        }
        Ok(())
    }
}

fn line_of(rec: &csv::StringRecord) -> usize {
    rec.position().map_or(0, |p| p.line() as usize)
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

fn parse_cell(cell: &str, line: usize, column: usize) -> Result<f64> {
    match cell.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::NonNumericCell {
            line,
            column,
            cell: cell.to_string(),
        }),
    }
}

/// Reads an ETT-style CSV: rows become time steps, the leading timestamp
/// column is dropped. Timestamps must be non-decreasing as strings.
pub fn load_ett_csv(manifest: &DatasetManifest) -> Result<MultivariateSeries> {
    let file = fs::File::open(&manifest.path)?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(file);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.is_empty() {
        return Err(Error::EmptyFile);
    }
    if headers.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            message: "need a timestamp column and at least one variate".into(),
        });
    }
    let names: Vec<String> = headers.iter().skip(1).map(|h| h.trim().to_string()).collect();
    let keep: Vec<usize> = match &manifest.columns {
        None => (0..names.len()).collect(),
        Some(cols) => cols
            .iter()
            .map(|c| {
                names.iter().position(|n| n == c).ok_or_else(|| Error::Parse {
                    line: 1,
                    message: format!("no column named {c:?}"),
                })
            })
            .collect::<Result<_>>()?,
    };
    let mut rows: Vec<Vec<f64>> = vec![Vec::new(); keep.len()];
    let mut last_stamp: Option<String> = None;
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = line_of(&rec);
        if rec.len() != headers.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        let stamp = rec[0].trim().to_string();
        if let Some(prev) = &last_stamp {
            if stamp < *prev {
                return Err(Error::Parse {
                    line,
                    message: format!("timestamp {stamp:?} precedes {prev:?}"),
                });
            }
        }
        last_stamp = Some(stamp);
        for (out, &c) in rows.iter_mut().zip(&keep) {
            out.push(parse_cell(&rec[c + 1], line, c + 2)?);
        }
    }
    if rows[0].is_empty() {
        return Err(Error::EmptyFile);
    }
    let names = keep.iter().map(|&c| names[c].clone()).collect();
    MultivariateSeries::with_names(rows, names)
}

/// Labelled windows and the inferred class count (`max label + 1`).
pub fn load_labeled_windows_csv(manifest: &DatasetManifest) -> Result<(Vec<WindowSample>, usize)> {
    manifest.validate()?;
    let file = fs::File::open(&manifest.path)?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(file);
    let mut out = Vec::new();
    let mut width: Option<usize> = None;
    let mut classes = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = line_of(&rec);
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(Error::InconsistentWidth {
                line,
                expected: w,
                found: rec.len(),
            });
        }
        let label_col = manifest.label_column.unwrap_or(w - 1);
        if label_col >= w {
            return Err(Error::Parse {
                line,
                message: format!("label column {label_col} beyond width {w}"),
            });
        }
        let label_cell = rec[label_col].trim();
        let label: usize = label_cell.parse().map_err(|_| Error::LabelNotInteger {
            line,
            cell: label_cell.to_string(),
        })?;
        let values = (0..w)
            .filter(|&c| c != label_col)
            .map(|c| parse_cell(&rec[c], line, c + 1))
            .collect::<Result<Vec<f64>>>()?;
        if values.is_empty() || values.len() % manifest.variates != 0 {
            return Err(Error::Parse {
                line,
                message: format!("{} values do not split into {} variates", values.len(), manifest.variates),
            });
        }
        let t = values.len() / manifest.variates;
        classes = classes.max(label + 1);
        out.push(WindowSample {
            lookback: values.chunks(t).map(<[f64]>::to_vec).collect(),
            target: WindowTarget::Class(label),
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyFile);
    }
    Ok((out, classes))
}

const PGM_MAX: f64 = 65535.0;

/// Writes a plain (`P2`) 16-bit PGM. Pixels are min-max scaled to
/// `[0, 65535]`; the original range goes into a comment line.
pub fn write_pgm(img: &GrayImage, path: &Path) -> Result<()> {
    let (lo, hi) = (img.min(), img.max());
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "P2")?;
    writeln!(w, "# min={lo:e} max={hi:e}")?;
    writeln!(w, "{} {}", img.width(), img.height())?;
    writeln!(w, "65535")?;
    for r in 0..img.height() {
        let line: Vec<String> = img
            .row(r)
            .iter()
            .map(|&v| {
                let q = if hi > lo { ((v - lo) / (hi - lo) * PGM_MAX).round() } else { 0.0 };
                (q as u32).to_string()
            })
            .collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `P2` file written by [`write_pgm`], restoring the original range
/// when the comment is present.
pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let text = fs::read_to_string(path)?;
    let mut range: Option<(f64, f64)> = None;
    let mut tokens = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(c) = line.trim_start().strip_prefix('#') {
            let mut lo = None;
            let mut hi = None;
            for part in c.split_whitespace() {
                if let Some(v) = part.strip_prefix("min=") {
                    lo = v.parse::<f64>().ok();
                } else if let Some(v) = part.strip_prefix("max=") {
                    hi = v.parse::<f64>().ok();
                }
            }
            if let (Some(a), Some(b)) = (lo, hi) {
                range = Some((a, b));
            }
            continue;
        }
        tokens.extend(line.split_whitespace().map(|t| (i + 1, t)));
    }
    let mut it = tokens.into_iter();
    let mut next = |what: &str| -> Result<(usize, &str)> {
        it.next().ok_or_else(|| Error::CorruptFile(format!("missing {what}")))
    };
    let (_, magic) = next("magic")?;
    if magic != "P2" {
        return Err(Error::CorruptFile(format!("not a plain PGM: {magic:?}")));
    }
    let num = |(line, t): (usize, &str)| -> Result<u64> {
        t.parse().map_err(|_| Error::Parse {
            line,
            message: format!("expected an integer, found {t:?}"),
        })
    };
    let width = num(next("width")?)? as usize;
    let height = num(next("height")?)? as usize;
    let maxval = num(next("maxval")?)? as f64;
    if maxval <= 0.0 {
        return Err(Error::CorruptFile("maxval must be positive".into()));
    }
    let (lo, hi) = range.unwrap_or((0.0, maxval));
    let mut pixels = Vec::with_capacity(width * height);
    for _ in 0..width * height {
        let q = num(next("pixel")?)? as f64;
        pixels.push(if hi > lo { lo + q / maxval * (hi - lo) } else { lo });
    }
    if next("end").is_ok() {
        return Err(Error::CorruptFile("trailing data after pixels".into()));
    }
    GrayImage::new(height, width, pixels)
}

/// Raw pixel values, one CSV row per image row.
pub fn write_pixels_csv(img: &GrayImage, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in 0..img.height() {
        w.write_record(img.row(r).iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

const CKPT_MAGIC: &[u8; 8] = b"TSIMGCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Binary checkpoint: magic, `u32` version, `u32` record count, then per
/// record the name, shape and little-endian `f64` data.
pub fn save_checkpoint(params: &ParamSet, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CKPT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, t) in params.iter() {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
        for &d in &t.shape {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in &t.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::CorruptFile(format!("truncated at byte {} (wanted {n} more)", self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn load_checkpoint(path: &Path) -> Result<ParamSet> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    let mut c = Cursor { buf: &buf, pos: 0 };
    if c.take(CKPT_MAGIC.len())? != CKPT_MAGIC {
        return Err(Error::CorruptFile("bad magic".into()));
    }
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let count = c.u32()?;
    let mut params = ParamSet::new();
    for _ in 0..count {
        let len = c.u32()? as usize;
        let name = std::str::from_utf8(c.take(len)?)
            .map_err(|_| Error::CorruptFile("tensor name is not UTF-8".into()))?
            .to_string();
        let ndim = c.u32()? as usize;
        let shape = (0..ndim).map(|_| c.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let n = n.ok_or_else(|| Error::CorruptFile(format!("shape {shape:?} overflows")))?;
        let bytes = c.take(n.checked_mul(8).ok_or_else(|| Error::CorruptFile("tensor too large".into()))?)?;
        let data = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        params.insert(name, Tensor { shape, data });
    }
    if c.pos != buf.len() {
        return Err(Error::CorruptFile(format!("{} trailing bytes", buf.len() - c.pos)));
    }
    Ok(params)
}

/// One line of a results table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultRow {
    pub experiment_id: String,
    pub axis_value: String,
    pub mse: Option<f64>,
    pub mae: Option<f64>,
    pub accuracy: Option<f64>,
    pub n_value: Option<usize>,
    pub seconds: Option<f64>,
    pub normalized_mse: Option<f64>,
}

pub const RESULT_COLUMNS: [&str; 8] = [
    "experiment_id",
    "axis_value",
    "mse",
    "mae",
    "accuracy",
    "n_value",
    "seconds",
    "normalized_mse",
];

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(String::new, T::to_string)
}

fn write_rows<W: Write>(w: &mut csv::Writer<W>, rows: &[ResultRow]) -> Result<()> {
    for r in rows {
        w.write_record([
            r.experiment_id.clone(),
            r.axis_value.clone(),
            opt(&r.mse),
            opt(&r.mae),
            opt(&r.accuracy),
            opt(&r.n_value),
            opt(&r.seconds),
            opt(&r.normalized_mse),
        ])
        .map_err(csv_err)?;
    }
    Ok(())
}

/// Writes a fresh results table with header.
pub fn write_results_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(RESULT_COLUMNS).map_err(csv_err)?;
    write_rows(&mut w, rows)?;
    w.flush()?;
    Ok(())
}

/// The same table as [`write_results_csv`], as a string.
pub fn results_to_string(rows: &[ResultRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RESULT_COLUMNS).map_err(csv_err)?;
    write_rows(&mut w, rows)?;
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Appends rows, writing the header first if the file is new or empty.
pub fn append_results_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let fresh = fs::metadata(path).map_or(true, |m| m.len() == 0);
    let file = fs::OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        w.write_record(RESULT_COLUMNS).map_err(csv_err)?;
    }
    write_rows(&mut w, rows)?;
    w.flush()?;
    Ok(())
}

pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>() != RESULT_COLUMNS {
        return Err(Error::Parse {
            line: 1,
            message: "unexpected results header".into(),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = line_of(&rec);
        let f = |i: usize| -> Result<Option<f64>> {
            let s = rec[i].trim();
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| Error::NonNumericCell {
                    line,
                    column: i + 1,
                    cell: s.to_string(),
                })
            }
        };
        let n = rec[5].trim();
        out.push(ResultRow {
            experiment_id: rec[0].to_string(),
            axis_value: rec[1].to_string(),
            mse: f(2)?,
            mae: f(3)?,
            accuracy: f(4)?,
            n_value: if n.is_empty() {
                None
            } else {
                Some(n.parse().map_err(|_| Error::NonNumericCell {
                    line,
                    column: 6,
                    cell: n.to_string(),
                })?)
            },
            seconds: f(6)?,
            normalized_mse: f(7)?,
        });
    }
    Ok(out)
}
