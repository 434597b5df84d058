//! Heightmap, mask and manifest interchange.
//!
//! HMAP is a plain-text grid format:
//!
//! ```text
//! HMAP 1
//! width W
//! height H
//! pitch_um P
//! meta key value        (zero or more)
//! z z z ...             (H lines of W tokens, "nan" for missing)
//! ```
//!
//! Masks are binary PGM (P5, maxval 255, ink = 255) and manifests are CSV.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HMAP_MAGIC: &str = "HMAP 1";
pub const MANIFEST_HEADER: [&str; 5] = ["sample_id", "papyrus_id", "letter", "heightmap", "label"];

/// Dense height grid in µm. Missing pixels are stored as NaN; every other
/// value is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightMap {
    width: usize,
    height: usize,
    pitch_um: f64,
    z: Vec<f64>,
    pub meta: BTreeMap<String, String>,
}

impl HeightMap {
    /// Builds a map from a row-major grid. Any non-finite value becomes the
    /// missing sentinel.
    pub fn new(width: usize, height: usize, pitch_um: f64, mut z: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "heightmap dimensions must be positive, got {width}x{height}"
            )));
        }
        if !(pitch_um.is_finite() && pitch_um > 0.0) {
            return Err(Error::InvalidInput(format!(
                "pitch_um must be positive, got {pitch_um}"
            )));
        }
        if z.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "expected {} values for {width}x{height}, got {}",
                width * height,
                z.len()
            )));
        }
        for v in z.iter_mut() {
            if !v.is_finite() {
                *v = f64::NAN;
            }
        }
        Ok(HeightMap {
            width,
            height,
            pitch_um,
            z,
            meta: BTreeMap::new(),
        })
    }

    pub fn filled(width: usize, height: usize, pitch_um: f64, value: f64) -> Result<Self> {
        Self::new(width, height, pitch_um, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pitch_um(&self) -> f64 {
        self.pitch_um
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.z
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.z[row * self.width + col]
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.get(row, col).is_nan()
    }

    pub fn missing_count(&self) -> usize {
        self.z.iter().filter(|v| v.is_nan()).count()
    }

    pub fn is_fully_finite(&self) -> bool {
        self.z.iter().all(|v| v.is_finite())
    }

    /// Same grid geometry and metadata, new values.
    pub fn with_values(&self, z: Vec<f64>) -> Result<Self> {
        let mut out = HeightMap::new(self.width, self.height, self.pitch_um, z)?;
        out.meta = self.meta.clone();
        Ok(out)
    }

    pub(crate) fn with_geometry(
        &self,
        width: usize,
        height: usize,
        pitch_um: f64,
        z: Vec<f64>,
    ) -> Result<Self> {
        let mut out = HeightMap::new(width, height, pitch_um, z)?;
        out.meta = self.meta.clone();
        Ok(out)
    }

    pub(crate) fn require_finite(&self, op: &str) -> Result<()> {
        if self.is_fully_finite() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "{op} requires a fully finite heightmap ({} missing pixels)",
                self.missing_count()
            )))
        }
    }
}

/// Per-pixel measurement validity (true = finite height).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidityMask {
    pub width: usize,
    pub height: usize,
    pub m: Vec<bool>,
}

impl ValidityMask {
    pub fn invalid_count(&self) -> usize {
        self.m.iter().filter(|v| !**v).count()
    }

    pub fn fraction_invalid(&self) -> f64 {
        self.invalid_count() as f64 / self.m.len() as f64
    }
}

/// Binary ink annotation (true = ink).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMask {
    pub width: usize,
    pub height: usize,
    pub ink: Vec<bool>,
}

impl LabelMask {
    pub fn new(width: usize, height: usize, ink: Vec<bool>) -> Result<Self> {
        if ink.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "mask of {width}x{height} needs {} pixels, got {}",
                width * height,
                ink.len()
            )));
        }
        Ok(LabelMask { width, height, ink })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        LabelMask {
            width,
            height,
            ink: vec![false; width * height],
        }
    }

    pub fn ink_count(&self) -> usize {
        self.ink.iter().filter(|v| **v).count()
    }

    pub fn check_dims(&self, width: usize, height: usize) -> Result<()> {
        if self.width != width || self.height != height {
            return Err(Error::DimensionMismatch(format!(
                "mask is {}x{}, heightmap is {width}x{height}",
                self.width, self.height
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub sample_id: String,
    pub papyrus_id: String,
    pub letter: String,
    pub heightmap_path: PathBuf,
    pub label_path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    /// Distinct papyrus ids in first-appearance order.
    pub fn papyri(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.entries
            .iter()
            .filter(|e| seen.insert(e.papyrus_id.clone()))
            .map(|e| e.papyrus_id.clone())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn validate(&self, check_files: bool) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::Manifest("manifest has no samples".into()));
        }
        let mut ids = HashSet::new();
        for e in &self.entries {
            if !ids.insert(e.sample_id.as_str()) {
                return Err(Error::Manifest(format!(
                    "duplicate sample_id '{}'",
                    e.sample_id
                )));
            }
            if check_files {
                for p in [&e.heightmap_path, &e.label_path] {
                    if !p.is_file() {
                        return Err(Error::Manifest(format!(
                            "sample '{}': missing file {}",
                            e.sample_id,
                            p.display()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn format_value(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        // `Display` for f64 emits the shortest digit string that parses back
        // to the same bits.
        format!("{v}")
    }
}

/// Canonical HMAP text for a heightmap.
pub fn heightmap_to_string(h: &HeightMap) -> String {
    let mut out = String::with_capacity(h.len() * 8 + 64);
    out.push_str(HMAP_MAGIC);
    out.push('\n');
    let _ = writeln!(out, "width {}", h.width);
    let _ = writeln!(out, "height {}", h.height);
    let _ = writeln!(out, "pitch_um {}", format_value(h.pitch_um));
    for (k, v) in &h.meta {
        let _ = writeln!(out, "meta {k} {v}");
    }
    for row in h.z.chunks(h.width) {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&format_value(*v));
        }
        out.push('\n');
    }
    out
}

fn parse_header_value<'a>(
    path: &Path,
    line_no: usize,
    line: Option<&'a str>,
    key: &str,
) -> Result<&'a str> {
    let line = line.ok_or_else(|| Error::parse(path, line_no, 1, format!("missing '{key}' line")))?;
    let mut parts = line.splitn(2, ' ');
    let got = parts.next().unwrap_or("");
    if got != key {
        return Err(Error::parse(
            path,
            line_no,
            1,
            format!("expected '{key}', found '{got}'"),
        ));
    }
    parts
        .next()
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::parse(path, line_no, key.len() + 1, format!("'{key}' has no value")))
}

fn parse_token(tok: &str) -> Option<f64> {
    match tok.to_ascii_lowercase().as_str() {
        "nan" | "inf" | "-inf" | "+inf" => Some(f64::NAN),
        _ => tok.parse::<f64>().ok().filter(|v| v.is_finite()),
    }
}

/// Parses HMAP text. `path` is only used for error messages.
pub fn parse_heightmap(text: &str, path: &Path) -> Result<HeightMap> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = || lines.next();

    let (ln, magic) = next().ok_or_else(|| Error::parse(path, 1, 1, "empty file"))?;
    if magic.trim_end() != HMAP_MAGIC {
        return Err(Error::parse(path, ln, 1, format!("expected '{HMAP_MAGIC}'")));
    }

    let (ln, l) = next().map_or((2, None), |(n, l)| (n, Some(l)));
    let w_str = parse_header_value(path, ln, l, "width")?;
    let width: usize = w_str
        .parse()
        .map_err(|_| Error::parse(path, ln, 7, format!("bad width '{w_str}'")))?;

    let (ln, l) = next().map_or((3, None), |(n, l)| (n, Some(l)));
    let h_str = parse_header_value(path, ln, l, "height")?;
    let height: usize = h_str
        .parse()
        .map_err(|_| Error::parse(path, ln, 8, format!("bad height '{h_str}'")))?;

    let (ln, l) = next().map_or((4, None), |(n, l)| (n, Some(l)));
    let p_str = parse_header_value(path, ln, l, "pitch_um")?;
    let pitch: f64 = p_str
        .parse()
        .map_err(|_| Error::parse(path, ln, 10, format!("bad pitch '{p_str}'")))?;
    if !(pitch.is_finite() && pitch > 0.0) {
        return Err(Error::parse(path, ln, 10, format!("pitch must be > 0, got {p_str}")));
    }
    if width == 0 || height == 0 {
        return Err(Error::parse(path, 2, 1, "width and height must be positive"));
    }

    let mut meta = BTreeMap::new();
    let mut z = Vec::with_capacity(width * height);
    let mut rows = 0usize;
    let mut last_line = 4;
    for (ln, line) in lines.by_ref() {
        last_line = ln;
        if rows == 0 && line.starts_with("meta ") {
            let rest = &line[5..];
            let (k, v) = rest.split_once(' ').ok_or_else(|| {
                Error::parse(path, ln, 6, "meta line needs a key and a value")
            })?;
            if k.is_empty() {
                return Err(Error::parse(path, ln, 6, "empty meta key"));
            }
            meta.insert(k.to_string(), v.to_string());
            continue;
        }
        if rows == height {
            if line.trim().is_empty() {
                continue;
            }
            return Err(Error::parse(
                path,
                ln,
                1,
                format!("extra data after {height} rows"),
            ));
        }
        let mut count = 0usize;
        let mut col = 0usize;
        for tok in line.split_whitespace() {
            // byte offset of this token within the line, 1-based
            let offset = tok.as_ptr() as usize - line.as_ptr() as usize + 1;
            col = offset;
            let v = parse_token(tok).ok_or_else(|| {
                Error::parse(path, ln, offset, format!("non-numeric token '{tok}'"))
            })?;
            count += 1;
            if count > width {
                return Err(Error::parse(
                    path,
                    ln,
                    offset,
                    format!("row {rows} has more than {width} values"),
                ));
            }
            z.push(v);
        }
        if count != width {
            return Err(Error::parse(
                path,
                ln,
                col.max(1),
                format!("row {rows} has {count} values, expected {width}"),
            ));
        }
        rows += 1;
    }
    if rows != height {
        return Err(Error::parse(
            path,
            last_line + 1,
            1,
            format!("expected {height} data rows, found {rows}"),
        ));
    }
    let mut h = HeightMap::new(width, height, pitch, z)?;
    h.meta = meta;
    Ok(h)
}

pub fn read_heightmap(path: impl AsRef<Path>) -> Result<HeightMap> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_heightmap(&text, path)
}

pub fn write_heightmap(h: &HeightMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, heightmap_to_string(h)).map_err(|e| Error::io(path, e))
}

pub fn mask_to_pgm(m: &LabelMask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", m.width, m.height).into_bytes();
    out.extend(m.ink.iter().map(|&b| if b { 255u8 } else { 0u8 }));
    out
}

/// Parses a binary PGM with maxval 255 whose pixels are all 0 or 255.
pub fn parse_mask(bytes: &[u8], path: &Path) -> Result<LabelMask> {
    let mut pos = 0usize;
    let mut line = 1usize;
    let mut fields: Vec<usize> = Vec::with_capacity(3);

    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::parse(path, 1, 1, "not a binary PGM (expected magic 'P5')"));
    }
    pos += 2;
    while fields.len() < 3 {
        // skip whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while let Some(&c) = bytes.get(pos) {
                        pos += 1;
                        if c == b'\n' {
                            line += 1;
                            break;
                        }
                    }
                }
                Some(c) if c.is_ascii_whitespace() => {
                    if *c == b'\n' {
                        line += 1;
                    }
                    pos += 1;
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::parse(path, line, 1, "truncated PGM header"));
        }
        let s = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        let v = s
            .parse::<usize>()
            .map_err(|_| Error::parse(path, line, 1, format!("bad header number '{s}'")))?;
        fields.push(v);
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(c) if c.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::parse(path, line, 1, "missing raster separator")),
    }
    let (width, height, maxval) = (fields[0], fields[1], fields[2]);
    if width == 0 || height == 0 {
        return Err(Error::parse(path, line, 1, "PGM dimensions must be positive"));
    }
    if maxval != 255 {
        return Err(Error::parse(path, line, 1, format!("maxval must be 255, got {maxval}")));
    }
    let raster = &bytes[pos..];
    if raster.len() != width * height {
        return Err(Error::parse(
            path,
            line,
            1,
            format!(
                "raster has {} bytes, expected {}",
                raster.len(),
                width * height
            ),
        ));
    }
    let mut ink = Vec::with_capacity(raster.len());
    for (i, &b) in raster.iter().enumerate() {
        match b {
            0 => ink.push(false),
            255 => ink.push(true),
            other => {
                return Err(Error::InvalidInput(format!(
                    "{}: illegal mask value {other} at row {}, col {}",
                    path.display(),
                    i / width,
                    i % width
                )))
            }
        }
    }
    LabelMask::new(width, height, ink)
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<LabelMask> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_mask(&bytes, path)
}

pub fn write_mask(m: &LabelMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, mask_to_pgm(m)).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Deserialize, Serialize)]
struct ManifestRow {
    sample_id: String,
    papyrus_id: String,
    letter: String,
    heightmap: String,
    label: String,
}

/// Reads and validates a manifest; relative paths resolve against the
/// manifest's directory.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.trim().is_empty() {
        return Err(Error::Manifest(format!("{}: empty manifest", path.display())));
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != MANIFEST_HEADER {
        return Err(Error::Manifest(format!(
            "{}: header must be '{}'",
            path.display(),
            MANIFEST_HEADER.join(",")
        )));
    }
    let mut entries = Vec::new();
    for row in rdr.deserialize() {
        let row: ManifestRow = row?;
        let resolve = |p: &str| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        entries.push(ManifestEntry {
            heightmap_path: resolve(&row.heightmap),
            label_path: resolve(&row.label),
            sample_id: row.sample_id,
            papyrus_id: row.papyrus_id,
            letter: row.letter,
        });
    }
    let manifest = DatasetManifest {
        format_version: 1,
        entries,
    };
    manifest.validate(true)?;
    Ok(manifest)
}

/// Writes a manifest with paths relative to the manifest's directory where
/// possible.
pub fn write_manifest(m: &DatasetManifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    m.validate(false)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let rel = |p: &Path| -> String {
        p.strip_prefix(base)
            .unwrap_or(p)
            .to_string_lossy()
            .into_owned()
    };
    let mut wtr = csv::Writer::from_writer(Vec::new());
    for e in &m.entries {
        wtr.serialize(ManifestRow {
            sample_id: e.sample_id.clone(),
            papyrus_id: e.papyrus_id.clone(),
            letter: e.letter.clone(),
            heightmap: rel(&e.heightmap_path),
            label: rel(&e.label_path),
        })?;
    }
    let bytes = wtr
        .into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("test.hmap")
    }

    #[test]
    fn reads_two_by_two_with_missing() {
        let text = "HMAP 1\nwidth 2\nheight 2\npitch_um 0.34\n1.0 2.0\nnan 4.0\n";
        let h = parse_heightmap(text, p()).unwrap();
        assert_eq!((h.width(), h.height()), (2, 2));
        assert_eq!(h.pitch_um(), 0.34);
        assert!(h.is_missing(1, 0));
        assert_eq!(h.missing_count(), 1);
        assert_eq!(h.get(1, 1), 4.0);
    }

    #[test]
    fn short_row_reports_row_index() {
        let text = "HMAP 1\nwidth 3\nheight 2\npitch_um 1\n1 2 3\n4 5\n";
        match parse_heightmap(text, p()) {
            Err(Error::Parse { line, msg, .. }) => {
                assert_eq!(line, 6);
                assert!(msg.contains("row 1"), "{msg}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_tokens_and_pitch() {
        let bad_tok = "HMAP 1\nwidth 2\nheight 1\npitch_um 1\n1 abc\n";
        match parse_heightmap(bad_tok, p()) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (5, 3)),
            other => panic!("unexpected {other:?}"),
        }
        let bad_pitch = "HMAP 1\nwidth 1\nheight 1\npitch_um 0\n1\n";
        assert!(matches!(
            parse_heightmap(bad_pitch, p()),
            Err(Error::Parse { line: 4, .. })
        ));
        let bad_magic = "HMAP 2\nwidth 1\nheight 1\npitch_um 1\n1\n";
        assert!(parse_heightmap(bad_magic, p()).is_err());
        let missing_rows = "HMAP 1\nwidth 1\nheight 2\npitch_um 1\n1\n";
        assert!(parse_heightmap(missing_rows, p()).is_err());
    }

    #[test]
    fn sentinels_are_case_insensitive() {
        let text = "HMAP 1\nwidth 3\nheight 1\npitch_um 1\nNaN -INF Inf\n";
        let h = parse_heightmap(text, p()).unwrap();
        assert_eq!(h.missing_count(), 3);
    }

    #[test]
    fn writer_emits_canonical_rows() {
        let h = HeightMap::new(2, 1, 0.34, vec![0.0, f64::NAN]).unwrap();
        let s = heightmap_to_string(&h);
        assert_eq!(s, "HMAP 1\nwidth 2\nheight 1\npitch_um 0.34\n0 nan\n");
    }

    #[test]
    fn meta_lines_round_trip() {
        let mut h = HeightMap::new(1, 1, 2.5, vec![0.1]).unwrap();
        h.meta.insert("papyrus".into(), "P248".into());
        h.meta.insert("note".into(), "two words".into());
        let s = heightmap_to_string(&h);
        let back = parse_heightmap(&s, p()).unwrap();
        assert_eq!(back, h);
        assert_eq!(back.get(0, 0).to_bits(), 0.1f64.to_bits());
    }

    #[test]
    fn pgm_rejects_illegal_values() {
        let mut bytes = b"P5\n2 1\n255\n".to_vec();
        bytes.extend([0u8, 128u8]);
        assert!(matches!(parse_mask(&bytes, p()), Err(Error::InvalidInput(_))));
        assert!(parse_mask(b"P2\n1 1\n255\n0", p()).is_err());
    }

    #[test]
    fn pgm_all_zero_and_comments() {
        let mut bytes = b"P5\n# comment\n3 2\n255\n".to_vec();
        bytes.extend([0u8; 6]);
        let m = parse_mask(&bytes, p()).unwrap();
        assert_eq!((m.width, m.height), (3, 2));
        assert_eq!(m.ink_count(), 0);
    }

    fn write_sample_files(dir: &Path, id: &str) -> (String, String) {
        let h = HeightMap::filled(2, 2, 0.34, 1.0).unwrap();
        let hp = format!("{id}.hmap");
        let lp = format!("{id}.pgm");
        write_heightmap(&h, dir.join(&hp)).unwrap();
        write_mask(&LabelMask::empty(2, 2), dir.join(&lp)).unwrap();
        (hp, lp)
    }

    #[test]
    fn manifest_groups_papyri() {
        let dir = tempfile::tempdir().unwrap();
        let mut csv = String::from("sample_id,papyrus_id,letter,heightmap,label\n");
        let counts = [("P248", 5), ("P250", 5), ("P500P2", 4)];
        for (pap, n) in counts {
            for i in 0..n {
                let id = format!("{pap}_{i}");
                let (hp, lp) = write_sample_files(dir.path(), &id);
                csv.push_str(&format!("{id},{pap},eta,{hp},{lp}\n"));
            }
        }
        let mp = dir.path().join("manifest.csv");
        fs::write(&mp, csv).unwrap();
        let m = read_manifest(&mp).unwrap();
        assert_eq!(m.len(), 14);
        assert_eq!(m.papyri(), vec!["P248", "P250", "P500P2"]);
        assert!(m.entries[0].heightmap_path.is_absolute() || m.entries[0].heightmap_path.starts_with(dir.path()));

        // writer round trip keeps relative paths
        let mp2 = dir.path().join("copy.csv");
        write_manifest(&m, &mp2).unwrap();
        assert_eq!(read_manifest(&mp2).unwrap(), m);
    }

    #[test]
    fn manifest_errors() {
        let dir = tempfile::tempdir().unwrap();
        let (hp, lp) = write_sample_files(dir.path(), "a");
        let mp = dir.path().join("m.csv");
        fs::write(
            &mp,
            format!("sample_id,papyrus_id,letter,heightmap,label\na,P1,x,{hp},{lp}\na,P1,x,{hp},{lp}\n"),
        )
        .unwrap();
        match read_manifest(&mp) {
            Err(Error::Manifest(msg)) => assert!(msg.contains("'a'"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }

        fs::write(&mp, "").unwrap();
        assert!(matches!(read_manifest(&mp), Err(Error::Manifest(_))));

        fs::write(
            &mp,
            "sample_id,papyrus_id,letter,heightmap,label\nb,P1,x,nope.hmap,nope.pgm\n",
        )
        .unwrap();
        match read_manifest(&mp) {
            Err(Error::Manifest(msg)) => assert!(msg.contains("missing file")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
