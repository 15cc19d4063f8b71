//! Frame metadata: CSV ingestion, easy/hard splits and dataset loading.
//!
//! Catalog files are UTF-8 CSV with the header
//! `id,camera_id,lat,lon,timestamp_utc,label,temperature_c,path`.
//! `label` and `temperature_c` may be empty. Relative image paths are
//! resolved against the directory holding the catalog.

mod image;
mod split;
pub mod synth;

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, SecondsFormat, Utc};

use crate::error::{Error, Result};
use crate::solar::{self, GeoPoint, SunLabel};
use crate::tensor::Tensor;

pub use image::{encode_ppm, load_image, save_ppm};
pub use split::{split_chronological, split_easy, split_hard, HardSelection, Split, SplitMode};
pub use synth::{gen_synthetic, generate, generate_records, SynthConfig, SynthDataset, SynthTask};

pub const CATALOG_HEADER: [&str; 8] = [
    "id",
    "camera_id",
    "lat",
    "lon",
    "timestamp_utc",
    "label",
    "temperature_c",
    "path",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub id: String,
    pub camera_id: String,
    pub geo: GeoPoint,
    pub timestamp_utc: DateTime<Utc>,
    pub label: Option<SunLabel>,
    pub temperature_c: Option<f64>,
    pub path: PathBuf,
}

impl ImageRecord {
    pub fn local_solar_date(&self) -> NaiveDate {
        solar::local_solar_date(self.geo, self.timestamp_utc)
    }

    /// Checks that the stored label agrees with the solar labelling window.
    pub fn label_is_consistent(&self, tolerance_min: f64) -> bool {
        match self.label {
            None => true,
            Some(l) => solar::label_window(self.geo, self.timestamp_utc, tolerance_min) == Some(l),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    /// 1-based line number in the file (the header is line 1).
    pub line: usize,
    pub reason: String,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

#[derive(Debug, Clone)]
pub struct LoadedCatalog {
    pub records: Vec<ImageRecord>,
    pub rejections: Vec<Rejection>,
}

/// Reads a catalog file. Malformed rows are reported, not dropped silently;
/// a duplicated id or a catalog with no valid rows is an error.
pub fn load_catalog(path: impl AsRef<Path>) -> Result<LoadedCatalog> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let loaded = parse_catalog(&text, base)?;
    if loaded.records.is_empty() {
        return Err(Error::Catalog(format!(
            "{}: no valid records ({} rejected)",
            path.display(),
            loaded.rejections.len()
        )));
    }
    Ok(loaded)
}

fn parse_catalog(text: &str, base: &Path) -> Result<LoadedCatalog> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::Catalog(format!("unreadable header: {e}")))?
        .clone();
    if header.iter().ne(CATALOG_HEADER.iter().copied()) {
        return Err(Error::Catalog(format!(
            "unexpected header `{}` (expected `{}`)",
            header.iter().collect::<Vec<_>>().join(","),
            CATALOG_HEADER.join(",")
        )));
    }

    let mut records = Vec::new();
    let mut rejections = Vec::new();
    let mut seen = HashSet::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                rejections.push(Rejection {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        match parse_row(&row, base) {
            Ok(rec) => {
                if !seen.insert(rec.id.clone()) {
                    return Err(Error::DuplicateId(rec.id));
                }
                records.push(rec);
            }
            Err(reason) => rejections.push(Rejection { line, reason }),
        }
    }
    Ok(LoadedCatalog {
        records,
        rejections,
    })
}

fn parse_row(row: &csv::StringRecord, base: &Path) -> std::result::Result<ImageRecord, String> {
    if row.len() != CATALOG_HEADER.len() {
        return Err(format!(
            "expected {} fields, found {}",
            CATALOG_HEADER.len(),
            row.len()
        ));
    }
    let field = |i: usize| row.get(i).unwrap_or("");
    let id = field(0);
    if id.is_empty() {
        return Err("empty id".into());
    }
    let camera_id = field(1);
    if camera_id.is_empty() {
        return Err("empty camera_id".into());
    }
    let lat: f64 = field(2).parse().map_err(|_| format!("bad lat `{}`", field(2)))?;
    let lon: f64 = field(3).parse().map_err(|_| format!("bad lon `{}`", field(3)))?;
    let geo = GeoPoint::new(lat, lon).map_err(|e| e.to_string())?;
    let timestamp_utc = DateTime::parse_from_rfc3339(field(4))
        .map_err(|e| format!("bad timestamp `{}`: {e}", field(4)))?
        .with_timezone(&Utc);
    let label = match field(5) {
        "" => None,
        s => Some(s.parse::<SunLabel>().map_err(|e| e.to_string())?),
    };
    let temperature_c = match field(6) {
        "" => None,
        s => {
            let t: f64 = s.parse().map_err(|_| format!("bad temperature `{s}`"))?;
            if !t.is_finite() {
                return Err(format!("non-finite temperature `{s}`"));
            }
            Some(t)
        }
    };
    if field(7).is_empty() {
        return Err("empty path".into());
    }
    let raw = PathBuf::from(field(7));
    let path = if raw.is_relative() { base.join(raw) } else { raw };
    Ok(ImageRecord {
        id: id.to_string(),
        camera_id: camera_id.to_string(),
        geo,
        timestamp_utc,
        label,
        temperature_c,
        path,
    })
}

/// Writes records as a catalog file; paths under `dir` are stored relative to it.
pub fn write_catalog(path: impl AsRef<Path>, records: &[ImageRecord]) -> Result<()> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::Catalog(e.to_string()))?;
    let to_err = |e: csv::Error| Error::Catalog(format!("{}: {e}", path.display()));
    writer.write_record(CATALOG_HEADER).map_err(to_err)?;
    for r in records {
        let rel = r.path.strip_prefix(base).unwrap_or(&r.path);
        writer
            .write_record([
                r.id.as_str(),
                r.camera_id.as_str(),
                &format!("{}", r.geo.lat_deg()),
                &format!("{}", r.geo.lon_deg()),
                &r.timestamp_utc.to_rfc3339_opts(SecondsFormat::Secs, true),
                r.label.map(SunLabel::as_str).unwrap_or(""),
                &r.temperature_c.map(|t| format!("{t}")).unwrap_or_default(),
                &rel.to_string_lossy(),
            ])
            .map_err(to_err)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Records paired with their decoded images, index-aligned.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub records: Vec<ImageRecord>,
    pub images: Vec<Tensor>,
}

impl Dataset {
    pub fn new(records: Vec<ImageRecord>, images: Vec<Tensor>) -> Result<Self> {
        if records.len() != images.len() {
            return Err(Error::InvalidArgument(format!(
                "{} records but {} images",
                records.len(),
                images.len()
            )));
        }
        Ok(Dataset { records, images })
    }

    /// Decodes every record's image from disk.
    pub fn load(records: Vec<ImageRecord>) -> Result<Self> {
        let images = records
            .iter()
            .map(|r| load_image(&r.path))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset { records, images })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Keeps the records whose id is in `ids`, preserving catalog order.
    pub fn subset(&self, ids: &HashSet<String>) -> Dataset {
        let (records, images) = self
            .records
            .iter()
            .zip(&self.images)
            .filter(|(r, _)| ids.contains(&r.id))
            .map(|(r, i)| (r.clone(), i.clone()))
            .unzip();
        Dataset { records, images }
    }

    pub fn select(&self, records: &[ImageRecord]) -> Dataset {
        let ids: HashSet<String> = records.iter().map(|r| r.id.clone()).collect();
        self.subset(&ids)
    }
}
