//! Tabular dataset ingestion, min-max normalization and stratified splits.
//!
//! Datasets are never vendored. Known tasks are described by an embedded
//! manifest and cached under a data directory (`$ADCPRUNE_DATA_DIR`, else
//! `./data`). A prepared file `<data_dir>/<name>.csv` (comma separated, no
//! header, label last) always takes precedence over the raw download.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Cells that mark a missing value.
const MISSING: &[&str] = &["", "?", "NA", "NaN", "nan"];

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    /// `"last"`, or a header name.
    Named(String),
}

impl Default for LabelColumn {
    fn default() -> Self {
        LabelColumn::Named("last".into())
    }
}

impl FromStr for LabelColumn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::InvalidConfig("empty label column".into()));
        }
        Ok(s.parse::<usize>().map(LabelColumn::Index).unwrap_or_else(|_| LabelColumn::Named(s.to_string())))
    }
}

impl fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelColumn::Index(i) => write!(f, "{i}"),
            LabelColumn::Named(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delimiter {
    Byte(u8),
    /// Any run of spaces and tabs.
    Whitespace,
}

impl Default for Delimiter {
    fn default() -> Self {
        Delimiter::Byte(b',')
    }
}

impl FromStr for Delimiter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "whitespace" | "ws" | " " => Ok(Delimiter::Whitespace),
            "\\t" | "tab" | "\t" => Ok(Delimiter::Byte(b'\t')),
            _ if s.len() == 1 && s.is_ascii() => Ok(Delimiter::Byte(s.as_bytes()[0])),
            _ => Err(Error::InvalidConfig(format!("delimiter must be one ASCII character or 'whitespace', got {s:?}"))),
        }
    }
}

impl fmt::Display for Delimiter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Delimiter::Whitespace => f.write_str("whitespace"),
            Delimiter::Byte(b'\t') => f.write_str("tab"),
            Delimiter::Byte(b) => write!(f, "{}", *b as char),
        }
    }
}

impl Serialize for Delimiter {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Delimiter {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CsvSchema {
    pub label_column: LabelColumn,
    pub delimiter: Delimiter,
    pub header: bool,
    /// Columns ignored entirely (ids and the like), by index.
    pub drop_columns: Vec<usize>,
}

impl Default for CsvSchema {
    /// Comma separated, header row, label in the last column.
    fn default() -> Self {
        Self { label_column: LabelColumn::default(), delimiter: Delimiter::default(), header: true, drop_columns: Vec::new() }
    }
}

impl CsvSchema {
    /// Layout of prepared cache files: comma separated, no header, label last.
    pub fn prepared() -> Self {
        Self { header: false, ..Self::default() }
    }
}

/// Normalized features plus dense labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    /// Row-major, every value in `[0, 1]`.
    pub features: Vec<Vec<f64>>,
    /// Dense class indices `0..class_names.len()`.
    pub labels: Vec<usize>,
    /// Original label text of each class index.
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub feature_mins: Vec<f64>,
    pub feature_maxes: Vec<f64>,
    /// Rows dropped at load time because a cell was missing or malformed.
    pub dropped_rows: usize,
}

impl Dataset {
    /// Builds a dataset from raw values, normalizing each feature to `[0, 1]`
    /// and mapping labels to dense indices (numeric order when every label
    /// parses as a number, text order otherwise).
    pub fn from_raw(name: &str, raw: Vec<Vec<f64>>, labels: &[String]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Dataset(format!("{name}: no usable rows")));
        }
        if raw.len() != labels.len() {
            return Err(Error::ShapeMismatch(format!("{} rows but {} labels", raw.len(), labels.len())));
        }
        let width = raw[0].len();
        if width == 0 {
            return Err(Error::Dataset(format!("{name}: no feature columns")));
        }
        if let Some(bad) = raw.iter().position(|r| r.len() != width) {
            return Err(Error::ShapeMismatch(format!("row {bad} has {} features, expected {width}", raw[bad].len())));
        }
        if raw.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Dataset(format!("{name}: non-finite feature value")));
        }

        let mut mins = vec![f64::INFINITY; width];
        let mut maxes = vec![f64::NEG_INFINITY; width];
        for row in &raw {
            for (j, &v) in row.iter().enumerate() {
                mins[j] = mins[j].min(v);
                maxes[j] = maxes[j].max(v);
            }
        }
        let constant: Vec<usize> = (0..width).filter(|&j| maxes[j] <= mins[j]).collect();
        if !constant.is_empty() {
            log::warn!("{name}: constant feature column(s) {constant:?} normalized to 0");
        }
        let features = raw
            .into_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(j, &v)| if maxes[j] > mins[j] { ((v - mins[j]) / (maxes[j] - mins[j])).clamp(0.0, 1.0) } else { 0.0 })
                    .collect()
            })
            .collect();

        let (class_names, labels) = dense_labels(labels);
        Ok(Self {
            name: name.to_string(),
            features,
            labels,
            class_names,
            feature_names: (0..width).map(|j| format!("x{j}")).collect(),
            feature_mins: mins,
            feature_maxes: maxes,
            dropped_rows: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Share of the most frequent class.
    pub fn majority_rate(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        *self.class_counts().iter().max().unwrap_or(&0) as f64 / self.len() as f64
    }

    /// Rows at `indices`, keeping the class table and normalization bounds.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            dropped_rows: 0,
            ..self.clone()
        }
    }

    /// Size requirements for use in training runs.
    pub fn check_trainable(&self) -> Result<()> {
        if self.len() < 10 {
            return Err(Error::Dataset(format!("{}: {} samples, at least 10 required", self.name, self.len())));
        }
        let present = self.class_counts().iter().filter(|&&c| c > 0).count();
        if present < 2 {
            return Err(Error::Dataset(format!("{}: at least 2 classes required", self.name)));
        }
        Ok(())
    }
}

fn dense_labels(labels: &[String]) -> (Vec<String>, Vec<usize>) {
    let distinct: BTreeSet<&str> = labels.iter().map(|s| s.as_str()).collect();
    let mut names: Vec<&str> = distinct.into_iter().collect();
    if names.iter().all(|s| s.parse::<f64>().is_ok()) {
        names.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
    }
    let index = |s: &str| names.iter().position(|n| *n == s).unwrap();
    let dense = labels.iter().map(|l| index(l)).collect();
    (names.into_iter().map(String::from).collect(), dense)
}

fn is_missing(cell: &str) -> bool {
    MISSING.contains(&cell)
}

/// Splits text into records under `schema`.
fn read_records(text: &str, schema: &CsvSchema) -> Result<Vec<Vec<String>>> {
    match schema.delimiter {
        Delimiter::Whitespace => Ok(text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.split_whitespace().map(String::from).collect())
            .collect()),
        Delimiter::Byte(b) => {
            let mut reader = csv::ReaderBuilder::new()
                .delimiter(b)
                .has_headers(false)
                .flexible(true)
                .trim(csv::Trim::All)
                .from_reader(text.as_bytes());
            let mut out = Vec::new();
            for rec in reader.records() {
                let rec = rec?;
                if rec.iter().all(str::is_empty) {
                    continue;
                }
                out.push(rec.iter().map(String::from).collect());
            }
            Ok(out)
        }
    }
}

/// Parses delimited text into a normalized dataset.
pub fn parse_csv(text: &str, schema: &CsvSchema, name: &str) -> Result<Dataset> {
    let mut records = read_records(text, schema)?;
    let header = if schema.header && !records.is_empty() { Some(records.remove(0)) } else { None };
    let width = header.as_ref().or(records.first()).map_or(0, Vec::len);
    if width < 2 {
        return Err(Error::Dataset(format!("{name}: need at least one feature and one label column")));
    }

    let label_col = match &schema.label_column {
        LabelColumn::Index(i) if *i < width => *i,
        LabelColumn::Index(i) => {
            return Err(Error::InvalidConfig(format!("label column {i} out of range for {width} columns")))
        }
        LabelColumn::Named(s) if s == "last" => width - 1,
        LabelColumn::Named(s) => header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == s))
            .ok_or_else(|| Error::InvalidConfig(format!("label column {s:?} not found in header")))?,
    };
    if schema.drop_columns.contains(&label_col) {
        return Err(Error::InvalidConfig("label column is also dropped".into()));
    }
    let feature_cols: Vec<usize> = (0..width).filter(|c| *c != label_col && !schema.drop_columns.contains(c)).collect();

    let mut raw = Vec::with_capacity(records.len());
    let mut labels = Vec::with_capacity(records.len());
    let mut dropped = 0usize;
    for rec in &records {
        let parsed: Option<Vec<f64>> = (rec.len() == width)
            .then(|| feature_cols.iter().map(|&c| if is_missing(&rec[c]) { None } else { rec[c].parse::<f64>().ok().filter(|v| v.is_finite()) }).collect())
            .flatten();
        match parsed {
            Some(row) if !is_missing(&rec[label_col]) => {
                raw.push(row);
                labels.push(rec[label_col].clone());
            }
            _ => dropped += 1,
        }
    }
    if dropped > 0 {
        log::warn!("{name}: dropped {dropped} row(s) with missing or malformed cells");
    }
    let mut ds = Dataset::from_raw(name, raw, &labels)?;
    ds.dropped_rows = dropped;
    if let Some(h) = header {
        ds.feature_names = feature_cols.iter().map(|&c| h[c].clone()).collect();
    }
    Ok(ds)
}

pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
    parse_csv(&text, schema, name)
}

/// Train/test index sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Seeded stratified split.
///
/// The train size is `round(train_frac * S)`. Each class first receives the
/// floor of its proportional share; the remaining slots go to the classes
/// with the largest fractional remainders. Index lists are returned sorted.
pub fn stratified_split(ds: &Dataset, train_frac: f64, seed: u64) -> Result<Split> {
    if !(train_frac > 0.0 && train_frac <= 1.0) {
        return Err(Error::InvalidConfig(format!("train fraction {train_frac} outside (0, 1]")));
    }
    let total = ds.len();
    let n_train = (train_frac * total as f64).round() as usize;
    if n_train >= total {
        return Err(Error::Dataset(format!("{}: train fraction {train_frac} leaves an empty test set", ds.name)));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.class_count()];
    for (i, &l) in ds.labels.iter().enumerate() {
        by_class[l].push(i);
    }
    if let Some(c) = by_class.iter().position(|m| m.len() == 1) {
        return Err(Error::Dataset(format!(
            "{}: class {:?} has a single sample and cannot be stratified",
            ds.name, ds.class_names[c]
        )));
    }

    let ideal: Vec<f64> = by_class.iter().map(|m| m.len() as f64 * n_train as f64 / total as f64).collect();
    let mut quota: Vec<usize> = ideal.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..quota.len()).collect();
    order.sort_by(|&a, &b| (ideal[b] - ideal[b].floor()).total_cmp(&(ideal[a] - ideal[a].floor())).then(a.cmp(&b)));
    let mut short = n_train - quota.iter().sum::<usize>();
    for &c in order.iter().cycle().take(order.len() * 2) {
        if short == 0 {
            break;
        }
        if quota[c] < by_class[c].len() {
            quota[c] += 1;
            short -= 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::with_capacity(total - n_train);
    for (members, q) in by_class.iter_mut().zip(quota) {
        members.shuffle(&mut rng);
        train.extend_from_slice(&members[..q]);
        test.extend_from_slice(&members[q..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test, seed })
}

/// One known dataset and where to get it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub name: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    pub url: Option<String>,
    /// SHA-256 of the downloaded file, lowercase hex.
    pub checksum: Option<String>,
    pub format: SourceFormat,
    /// File inside a zip download.
    pub member: Option<String>,
    #[serde(default)]
    pub label_column: LabelColumn,
    #[serde(default)]
    pub delimiter: Delimiter,
    #[serde(default)]
    pub header: bool,
    #[serde(default)]
    pub drop_columns: Vec<usize>,
    pub notes: String,
}

impl ManifestEntry {
    pub fn schema(&self) -> CsvSchema {
        CsvSchema {
            label_column: self.label_column.clone(),
            delimiter: self.delimiter,
            header: self.header,
            drop_columns: self.drop_columns.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceFormat {
    Csv,
    Zip,
    /// Spreadsheet; needs manual conversion to the prepared CSV layout.
    Xls,
    /// Fully determined by a rule; built locally.
    Generated,
}

const MANIFEST_JSON: &str = include_str!("../datasets/manifest.json");

pub fn manifest() -> Vec<ManifestEntry> {
    serde_json::from_str(MANIFEST_JSON).expect("embedded dataset manifest is valid")
}

pub fn manifest_entry(name: &str) -> Option<ManifestEntry> {
    let key = name.to_ascii_lowercase();
    manifest().into_iter().find(|e| e.name == key || e.aliases.contains(&key))
}

pub fn data_dir() -> PathBuf {
    std::env::var_os("ADCPRUNE_DATA_DIR").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("data"))
}

pub fn prepared_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.csv"))
}

fn raw_path(dir: &Path, entry: &ManifestEntry) -> PathBuf {
    dir.join(&entry.name).join("raw")
}

/// Opens a dataset given a file path or a manifest name.
///
/// `schema` applies to plain files. Manifest datasets use the prepared CSV
/// when present, else the cached raw download with the manifest schema.
pub fn resolve(reference: &str, schema: &CsvSchema, dir: &Path) -> Result<Dataset> {
    let path = Path::new(reference);
    if path.is_file() {
        return load_csv(path, schema);
    }
    let entry = manifest_entry(reference).ok_or_else(|| {
        Error::Dataset(format!("{reference:?} is neither a file nor a known dataset name"))
    })?;
    let prepared = prepared_path(dir, &entry.name);
    let mut ds = if prepared.is_file() {
        load_csv(&prepared, &CsvSchema::prepared())?
    } else if raw_path(dir, &entry).is_file() {
        load_csv(&raw_path(dir, &entry), &entry.schema())?
    } else {
        return Err(Error::Dataset(format!(
            "dataset {} not cached in {}; run `adcprune fetch {}`",
            entry.name,
            dir.display(),
            entry.name
        )));
    };
    ds.name = entry.name;
    Ok(ds)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// The balance-scale task: every combination of left/right weight and
/// distance in 1..=5, labelled by which side has the larger torque.
/// Rows are `class,lw,ld,rw,rd`, matching the public file.
pub fn balance_scale_csv() -> String {
    let mut out = String::new();
    for lw in 1..=5 {
        for ld in 1..=5 {
            for rw in 1..=5 {
                for rd in 1..=5 {
                    let (l, r) = (lw * ld, rw * rd);
                    let class = match l.cmp(&r) {
                        std::cmp::Ordering::Greater => "L",
                        std::cmp::Ordering::Less => "R",
                        std::cmp::Ordering::Equal => "B",
                    };
                    out.push_str(&format!("{class},{lw},{ld},{rw},{rd}\n"));
                }
            }
        }
    }
    out
}

/// Downloads (or builds) one manifest dataset into `dir`, returning the path
/// of the cached file.
pub fn fetch(entry: &ManifestEntry, dir: &Path) -> Result<PathBuf> {
    let target = raw_path(dir, entry);
    let bytes = match entry.format {
        SourceFormat::Generated => balance_scale_csv().into_bytes(),
        SourceFormat::Xls => {
            return Err(Error::Fetch(format!(
                "{} is distributed as a spreadsheet ({}); convert it to {} (comma separated, no header, label last)",
                entry.name,
                entry.url.as_deref().unwrap_or("no url"),
                prepared_path(dir, &entry.name).display()
            )))
        }
        SourceFormat::Csv | SourceFormat::Zip => {
            let url = entry.url.as_deref().ok_or_else(|| Error::Fetch(format!("{} has no url", entry.name)))?;
            let body = download(url)?;
            if let Some(expected) = &entry.checksum {
                let got = sha256_hex(&body);
                if !got.eq_ignore_ascii_case(expected) {
                    return Err(Error::Fetch(format!("{url}: checksum mismatch, expected {expected}, got {got}")));
                }
            } else {
                log::info!("{}: sha256 {}", entry.name, sha256_hex(&body));
            }
            if entry.format == SourceFormat::Zip {
                let member = entry.member.as_deref().ok_or_else(|| Error::Fetch(format!("{} has no zip member", entry.name)))?;
                extract_member(&body, member)?
            } else {
                body
            }
        }
    };
    let parent = target.parent().expect("raw path has a parent");
    std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    std::fs::write(&target, bytes).map_err(|e| Error::io(&target, e))?;
    Ok(target)
}

fn download(url: &str) -> Result<Vec<u8>> {
    let mut resp = ureq::get(url).call().map_err(|e| Error::Fetch(format!("{url}: {e}")))?;
    resp.body_mut()
        .with_config()
        .limit(64 * 1024 * 1024)
        .read_to_vec()
        .map_err(|e| Error::Fetch(format!("{url}: {e}")))
}

fn extract_member(archive: &[u8], member: &str) -> Result<Vec<u8>> {
    let mut zip = zip::ZipArchive::new(Cursor::new(archive)).map_err(|e| Error::Fetch(format!("bad zip: {e}")))?;
    let mut file = zip.by_name(member).map_err(|e| Error::Fetch(format!("zip member {member}: {e}")))?;
    let mut out = Vec::new();
    file.read_to_end(&mut out).map_err(|e| Error::Fetch(format!("zip member {member}: {e}")))?;
    Ok(out)
}
