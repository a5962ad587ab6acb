//! Raw inputs: the region grid, land-cover class rasters, POI tables and
//! sparse indicator labels, with their plain-text file formats.
//!
//! Every text format accepts `#`-prefixed comment lines anywhere; writers use
//! them to embed provenance (seed, resolved config) ahead of the payload.
//!
//! Land-cover pixel row 0 is the southern edge of the grid, aligned with the
//! origin latitude, so pixel row `py` belongs to region row `py / ppc`.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kilometres per degree of latitude.
pub const KM_PER_DEG_LAT: f64 = 110.574;
/// Kilometres per degree of longitude at the equator; scaled by `cos(lat)`.
pub const KM_PER_DEG_LON_EQUATOR: f64 = 111.320;

/// ESA WorldCover class names, in class-code order.
pub const WORLDCOVER_CLASSES: [&str; 11] = [
    "tree_cover",
    "shrubland",
    "grassland",
    "cropland",
    "built_up",
    "bare_sparse_vegetation",
    "snow_and_ice",
    "permanent_water",
    "herbaceous_wetland",
    "mangroves",
    "moss_and_lichen",
];

pub const DEFAULT_ENV_CLASSES: usize = WORLDCOVER_CLASSES.len();

/// Integer cell coordinates `(x, y)`; `x` grows eastwards, `y` northwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RegionId {
    pub x: usize,
    pub y: usize,
}

impl RegionId {
    pub fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    /// Chebyshev (king-move) distance between two cells.
    pub fn chebyshev(self, other: RegionId) -> usize {
        self.x.abs_diff(other.x).max(self.y.abs_diff(other.y))
    }
}

fn default_cell_km() -> f64 {
    1.0
}

/// Geospace origin, extent and cell size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin_lon: f64,
    pub origin_lat: f64,
    pub n_cols: usize,
    pub n_rows: usize,
    #[serde(default = "default_cell_km")]
    pub cell_km: f64,
}

impl GridSpec {
    pub fn new(origin_lon: f64, origin_lat: f64, n_cols: usize, n_rows: usize, cell_km: f64) -> Result<Self> {
        let g = Self {
            origin_lon,
            origin_lat,
            n_cols,
            n_rows,
            cell_km,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_cols == 0 || self.n_rows == 0 {
            return Err(Error::InvalidGrid(format!(
                "grid must have at least one cell, got {}x{}",
                self.n_cols, self.n_rows
            )));
        }
        if !(self.cell_km > 0.0 && self.cell_km.is_finite()) {
            return Err(Error::InvalidGrid(format!("cell_km must be positive, got {}", self.cell_km)));
        }
        if !self.origin_lon.is_finite() || !self.origin_lat.is_finite() || self.origin_lat.abs() >= 90.0 {
            return Err(Error::InvalidGrid("origin must be finite with |lat| < 90".into()));
        }
        Ok(())
    }

    pub fn n_regions(&self) -> usize {
        self.n_cols * self.n_rows
    }

    pub fn km_per_deg_lon(&self) -> f64 {
        KM_PER_DEG_LON_EQUATOR * self.origin_lat.to_radians().cos()
    }

    pub fn km_per_deg_lat(&self) -> f64 {
        KM_PER_DEG_LAT
    }

    /// Kilometre offsets of a coordinate from the origin.
    pub fn to_km(&self, lon: f64, lat: f64) -> (f64, f64) {
        (
            (lon - self.origin_lon) * self.km_per_deg_lon(),
            (lat - self.origin_lat) * self.km_per_deg_lat(),
        )
    }

    pub fn from_km(&self, east_km: f64, north_km: f64) -> (f64, f64) {
        (
            self.origin_lon + east_km / self.km_per_deg_lon(),
            self.origin_lat + north_km / self.km_per_deg_lat(),
        )
    }

    /// Cell containing a coordinate. Points on a shared boundary go to the
    /// cell on the lower-left side (floor semantics).
    pub fn region_of(&self, lon: f64, lat: f64) -> Option<RegionId> {
        if !lon.is_finite() || !lat.is_finite() {
            return None;
        }
        let (ex, ny) = self.to_km(lon, lat);
        let fx = (ex / self.cell_km).floor();
        let fy = (ny / self.cell_km).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.n_cols as f64 || fy >= self.n_rows as f64 {
            return None;
        }
        Some(RegionId::new(fx as usize, fy as usize))
    }

    /// Geographic centre of a cell.
    pub fn center(&self, r: RegionId) -> (f64, f64) {
        self.from_km((r.x as f64 + 0.5) * self.cell_km, (r.y as f64 + 0.5) * self.cell_km)
    }

    pub fn contains(&self, r: RegionId) -> bool {
        r.x < self.n_cols && r.y < self.n_rows
    }

    pub fn check(&self, r: RegionId) -> Result<()> {
        if self.contains(r) {
            Ok(())
        } else {
            Err(Error::OutOfGrid {
                x: r.x as i64,
                y: r.y as i64,
            })
        }
    }

    /// Row-major index.
    pub fn index(&self, r: RegionId) -> usize {
        r.y * self.n_cols + r.x
    }

    pub fn region(&self, index: usize) -> RegionId {
        RegionId::new(index % self.n_cols, index / self.n_cols)
    }

    /// All regions in row-major order.
    pub fn regions(&self) -> impl Iterator<Item = RegionId> + '_ {
        (0..self.n_regions()).map(move |i| self.region(i))
    }
}

pub fn load_grid(path: impl AsRef<Path>) -> Result<GridSpec> {
    let path = path.as_ref();
    let text = read(path)?;
    let grid: GridSpec =
        toml::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), 0, e.to_string()))?;
    grid.validate()?;
    Ok(grid)
}

pub fn save_grid(path: impl AsRef<Path>, grid: &GridSpec, provenance: &[String]) -> Result<()> {
    let mut out = comment_block(provenance);
    let _ = writeln!(out, "origin_lon = {}", fmt_f64(grid.origin_lon));
    let _ = writeln!(out, "origin_lat = {}", fmt_f64(grid.origin_lat));
    let _ = writeln!(out, "n_cols = {}", grid.n_cols);
    let _ = writeln!(out, "n_rows = {}", grid.n_rows);
    let _ = writeln!(out, "cell_km = {}", fmt_f64(grid.cell_km));
    write(path.as_ref(), &out)
}

/// Per-pixel land-cover classes covering a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LandCoverGrid {
    pub grid: GridSpec,
    pub pixels_per_cell: usize,
    pub n_classes: usize,
    /// Row-major, `n_rows * ppc` rows of `n_cols * ppc` codes, south to north.
    pub classes: Vec<u8>,
}

impl LandCoverGrid {
    pub fn new(grid: GridSpec, pixels_per_cell: usize, n_classes: usize, classes: Vec<u8>) -> Result<Self> {
        if pixels_per_cell == 0 {
            return Err(Error::DimensionMismatch("pixels_per_cell must be >= 1".into()));
        }
        if n_classes == 0 || n_classes > 256 {
            return Err(Error::Config(format!("class count must be in 1..=256, got {n_classes}")));
        }
        let expected = grid.n_rows * grid.n_cols * pixels_per_cell * pixels_per_cell;
        if classes.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "expected {expected} pixels, got {}",
                classes.len()
            )));
        }
        if let Some(&code) = classes.iter().find(|&&c| c as usize >= n_classes) {
            return Err(Error::ClassOutOfRange {
                code: code as u32,
                classes: n_classes,
            });
        }
        Ok(Self {
            grid,
            pixels_per_cell,
            n_classes,
            classes,
        })
    }

    pub fn pixel_rows(&self) -> usize {
        self.grid.n_rows * self.pixels_per_cell
    }

    pub fn pixel_cols(&self) -> usize {
        self.grid.n_cols * self.pixels_per_cell
    }

    pub fn pixel(&self, px: usize, py: usize) -> u8 {
        self.classes[py * self.pixel_cols() + px]
    }

    /// Class codes of every pixel inside a region.
    pub fn cell_pixels(&self, r: RegionId) -> impl Iterator<Item = u8> + '_ {
        let p = self.pixels_per_cell;
        let (x0, y0) = (r.x * p, r.y * p);
        (y0..y0 + p).flat_map(move |py| (x0..x0 + p).map(move |px| self.pixel(px, py)))
    }

    /// Same class map at `factor` times the pixel resolution.
    pub fn upsample(&self, factor: usize) -> Self {
        let cols = self.pixel_cols();
        let mut classes = Vec::with_capacity(self.classes.len() * factor * factor);
        for row in self.classes.chunks(cols) {
            let wide: Vec<u8> = row.iter().flat_map(|&c| std::iter::repeat_n(c, factor)).collect();
            for _ in 0..factor {
                classes.extend_from_slice(&wide);
            }
        }
        Self {
            grid: self.grid,
            pixels_per_cell: self.pixels_per_cell * factor,
            n_classes: self.n_classes,
            classes,
        }
    }
}

pub fn load_landcover(path: impl AsRef<Path>, grid: &GridSpec) -> Result<LandCoverGrid> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let text = read(path)?;
    let mut lines = content_lines(&text);

    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(&name, 0, "missing LANDCOVER header"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "LANDCOVER" {
        return Err(Error::parse(&name, hline, "expected 'LANDCOVER <pixel_rows> <pixel_cols> <J>'"));
    }
    let parse_usize = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::parse(&name, hline, format!("bad header field {s:?}")))
    };
    let rows = parse_usize(fields[1])?;
    let cols = parse_usize(fields[2])?;
    let n_classes = parse_usize(fields[3])?;

    if rows % grid.n_rows != 0 || cols % grid.n_cols != 0 || rows / grid.n_rows != cols / grid.n_cols || rows == 0 {
        return Err(Error::DimensionMismatch(format!(
            "{rows}x{cols} pixels do not tile a {}x{} grid with square cells",
            grid.n_rows, grid.n_cols
        )));
    }

    let mut classes = Vec::with_capacity(rows * cols);
    let mut seen_rows = 0;
    for (lineno, line) in lines {
        let before = classes.len();
        for tok in line.split_whitespace() {
            let code: u32 = tok
                .parse()
                .map_err(|_| Error::parse(&name, lineno, format!("bad class code {tok:?}")))?;
            if code as usize >= n_classes {
                return Err(Error::ClassOutOfRange {
                    code,
                    classes: n_classes,
                });
            }
            classes.push(code as u8);
        }
        if classes.len() - before != cols {
            return Err(Error::parse(
                &name,
                lineno,
                format!("malformed row length: expected {cols}, got {}", classes.len() - before),
            ));
        }
        seen_rows += 1;
    }
    if seen_rows != rows {
        return Err(Error::DimensionMismatch(format!("header says {rows} rows, file has {seen_rows}")));
    }
    LandCoverGrid::new(*grid, rows / grid.n_rows, n_classes, classes)
}

pub fn save_landcover(path: impl AsRef<Path>, lc: &LandCoverGrid, provenance: &[String]) -> Result<()> {
    let mut out = comment_block(provenance);
    let _ = writeln!(out, "LANDCOVER {} {} {}", lc.pixel_rows(), lc.pixel_cols(), lc.n_classes);
    for row in lc.classes.chunks(lc.pixel_cols()) {
        let mut first = true;
        for c in row {
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{c}");
        }
        out.push('\n');
    }
    write(path.as_ref(), &out)
}

/// POI category names; line number in the manifest is the category index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Categories {
    pub names: Vec<String>,
}

impl Categories {
    pub fn new(names: Vec<String>) -> Self {
        Self { names }
    }

    /// Unnamed categories `0..k`.
    pub fn anonymous(k: usize) -> Self {
        Self {
            names: (0..k).map(|i| format!("category_{i}")).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Resolve either an integer index or a category name.
    pub fn resolve(&self, label: &str) -> Option<usize> {
        if let Ok(i) = label.parse::<usize>() {
            return (i < self.len()).then_some(i);
        }
        self.names.iter().position(|n| n == label)
    }
}

pub fn load_categories(path: impl AsRef<Path>) -> Result<Categories> {
    let text = read(path.as_ref())?;
    let names = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect();
    Ok(Categories { names })
}

pub fn save_categories(path: impl AsRef<Path>, cats: &Categories) -> Result<()> {
    let mut out = String::new();
    for n in &cats.names {
        out.push_str(n);
        out.push('\n');
    }
    write(path.as_ref(), &out)
}

/// A point of interest: longitude, latitude and category index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoiRecord {
    pub x: f64,
    pub y: f64,
    pub c: usize,
}

/// Result of a lenient parse: every data row lands in exactly one list.
#[derive(Debug)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub errors: Vec<Error>,
    pub rows: usize,
}

impl<T> Parsed<T> {
    fn into_strict(mut self) -> Result<Vec<T>> {
        if self.errors.is_empty() {
            Ok(self.records)
        } else {
            Err(self.errors.swap_remove(0))
        }
    }
}

pub fn parse_pois(text: &str, name: &str, cats: &Categories) -> Result<Parsed<PoiRecord>> {
    let mut lines = content_lines(text);
    expect_header(&mut lines, name, &["lon", "lat", "category"])?;
    let mut parsed = Parsed {
        records: Vec::new(),
        errors: Vec::new(),
        rows: 0,
    };
    for (lineno, line) in lines {
        parsed.rows += 1;
        let row = (|| {
            let f = split_csv(line, 3).ok_or_else(|| Error::parse(name, lineno, "expected 3 columns"))?;
            let x = parse_coord(f[0], name, lineno)?;
            let y = parse_coord(f[1], name, lineno)?;
            let c = cats.resolve(f[2]).ok_or_else(|| Error::UnknownCategory(f[2].to_string()))?;
            Ok(PoiRecord { x, y, c })
        })();
        match row {
            Ok(r) => parsed.records.push(r),
            Err(e) => parsed.errors.push(e),
        }
    }
    Ok(parsed)
}

pub fn load_pois(path: impl AsRef<Path>, cats: &Categories) -> Result<Vec<PoiRecord>> {
    let path = path.as_ref();
    parse_pois(&read(path)?, &path.display().to_string(), cats)?.into_strict()
}

pub fn save_pois(path: impl AsRef<Path>, pois: &[PoiRecord], provenance: &[String]) -> Result<()> {
    let mut out = comment_block(provenance);
    out.push_str("lon,lat,category\n");
    for p in pois {
        let _ = writeln!(out, "{},{},{}", fmt_f64(p.x), fmt_f64(p.y), p.c);
    }
    write(path.as_ref(), &out)
}

/// Sparse indicator values keyed by region.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSet {
    pub indicator_name: String,
    pub entries: Vec<(RegionId, f64)>,
}

impl LabelSet {
    pub fn new(indicator_name: impl Into<String>, entries: Vec<(RegionId, f64)>, grid: &GridSpec) -> Result<Self> {
        let mut seen = HashSet::with_capacity(entries.len());
        for &(r, v) in &entries {
            grid.check(r)?;
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("label at ({}, {})", r.x, r.y)));
            }
            if !seen.insert(r) {
                return Err(Error::DuplicateRegion { x: r.x, y: r.y });
            }
        }
        Ok(Self {
            indicator_name: indicator_name.into(),
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn parse_labels(text: &str, name: &str, grid: &GridSpec) -> Result<Parsed<(RegionId, f64)>> {
    let mut lines = content_lines(text);
    expect_header(&mut lines, name, &["x_r", "y_r", "value"])?;
    let mut parsed = Parsed {
        records: Vec::new(),
        errors: Vec::new(),
        rows: 0,
    };
    let mut seen = HashSet::new();
    for (lineno, line) in lines {
        parsed.rows += 1;
        let row = (|| {
            let f = split_csv(line, 3).ok_or_else(|| Error::parse(name, lineno, "expected 3 columns"))?;
            let x: i64 = f[0]
                .parse()
                .map_err(|_| Error::parse(name, lineno, format!("bad x_r {:?}", f[0])))?;
            let y: i64 = f[1]
                .parse()
                .map_err(|_| Error::parse(name, lineno, format!("bad y_r {:?}", f[1])))?;
            if x < 0 || y < 0 || x as usize >= grid.n_cols || y as usize >= grid.n_rows {
                return Err(Error::OutOfGrid { x, y });
            }
            let v: f64 = f[2]
                .parse()
                .map_err(|_| Error::parse(name, lineno, format!("bad value {:?}", f[2])))?;
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("{name}:{lineno}: label value {v}")));
            }
            let r = RegionId::new(x as usize, y as usize);
            if !seen.insert(r) {
                return Err(Error::DuplicateRegion { x: r.x, y: r.y });
            }
            Ok((r, v))
        })();
        match row {
            Ok(r) => parsed.records.push(r),
            Err(e) => parsed.errors.push(e),
        }
    }
    Ok(parsed)
}

pub fn load_labels(path: impl AsRef<Path>, grid: &GridSpec) -> Result<LabelSet> {
    let path = path.as_ref();
    let text = read(path)?;
    let name = indicator_name(&text).unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "indicator".into())
    });
    let entries = parse_labels(&text, &path.display().to_string(), grid)?.into_strict()?;
    Ok(LabelSet {
        indicator_name: name,
        entries,
    })
}

pub fn save_labels(path: impl AsRef<Path>, labels: &LabelSet, provenance: &[String]) -> Result<()> {
    let mut out = comment_block(provenance);
    let _ = writeln!(out, "# indicator={}", labels.indicator_name);
    out.push_str("x_r,y_r,value\n");
    for (r, v) in &labels.entries {
        let _ = writeln!(out, "{},{},{}", r.x, r.y, fmt_f64(*v));
    }
    write(path.as_ref(), &out)
}

fn indicator_name(text: &str) -> Option<String> {
    text.lines()
        .filter_map(|l| l.trim().strip_prefix('#'))
        .find_map(|c| c.trim().strip_prefix("indicator=").map(|s| s.trim().to_string()))
}

// ---------------------------------------------------------------------------
// shared text helpers

/// Shortest representation that parses back to the same bits.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub(crate) fn comment_block(lines: &[String]) -> String {
    let mut out = String::new();
    for l in lines {
        for part in l.lines() {
            out.push_str("# ");
            out.push_str(part);
            out.push('\n');
        }
    }
    out
}

pub(crate) fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Non-blank, non-comment lines with 1-based line numbers.
pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn expect_header<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    name: &str,
    columns: &[&str],
) -> Result<()> {
    let Some((lineno, header)) = lines.next() else {
        return Err(Error::parse(name, 0, format!("missing header {}", columns.join(","))));
    };
    let got: Vec<&str> = header.split(',').map(str::trim).collect();
    if got != columns {
        return Err(Error::parse(
            name,
            lineno,
            format!("expected header {}, got {header}", columns.join(",")),
        ));
    }
    Ok(())
}

fn split_csv(line: &str, n: usize) -> Option<Vec<&str>> {
    let f: Vec<&str> = line.split(',').map(str::trim).collect();
    (f.len() == n).then_some(f)
}

fn parse_coord(s: &str, name: &str, lineno: usize) -> Result<f64> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::parse(name, lineno, format!("non-numeric coordinate {s:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid4() -> GridSpec {
        GridSpec::new(116.0, 39.5, 4, 4, 1.0).unwrap()
    }

    #[test]
    fn origin_maps_to_first_cell() {
        let g = grid4();
        assert_eq!(g.region_of(g.origin_lon, g.origin_lat), Some(RegionId::new(0, 0)));
    }

    #[test]
    fn floor_semantics() {
        let g = grid4();
        let (lon, lat) = g.from_km(1.5 * g.cell_km, 0.2);
        assert_eq!(g.region_of(lon, lat), Some(RegionId::new(1, 0)));
        let (lon, lat) = g.from_km(-0.01, 0.2);
        assert_eq!(g.region_of(lon, lat), None);
        let (lon, lat) = g.from_km(0.5, 4.01);
        assert_eq!(g.region_of(lon, lat), None);
    }

    #[test]
    fn centers_round_trip() {
        let g = GridSpec::new(-73.9, 40.7, 7, 5, 0.75).unwrap();
        for r in g.regions() {
            let (lon, lat) = g.center(r);
            assert_eq!(g.region_of(lon, lat), Some(r));
        }
    }

    #[test]
    fn rejects_degenerate_grid() {
        assert!(GridSpec::new(0.0, 0.0, 0, 3, 1.0).is_err());
        assert!(GridSpec::new(0.0, 0.0, 3, 3, 0.0).is_err());
    }

    #[test]
    fn category_resolution() {
        let cats = Categories::new(vec!["food".into(), "shop".into(), "school".into()]);
        assert_eq!(cats.resolve("2"), Some(2));
        assert_eq!(cats.resolve("shop"), Some(1));
        assert_eq!(cats.resolve("3"), None);
        assert_eq!(cats.resolve("bank"), None);
    }

    #[test]
    fn pois_parse_single_row() {
        let cats = Categories::anonymous(3);
        let p = parse_pois("lon,lat,category\n116.3,39.9,2\n", "t", &cats).unwrap();
        assert_eq!(p.records, vec![PoiRecord { x: 116.3, y: 39.9, c: 2 }]);
    }

    #[test]
    fn pois_empty_with_header() {
        let cats = Categories::anonymous(3);
        let p = parse_pois("lon,lat,category\n", "t", &cats).unwrap();
        assert!(p.records.is_empty());
        assert_eq!(p.rows, 0);
    }

    #[test]
    fn pois_lenient_accounts_for_every_row() {
        let cats = Categories::new(vec!["a".into(), "b".into()]);
        let text = "lon,lat,category\n1,2,a\nx,2,a\n1,2,c\n1,2\n3,4,1\n";
        let p = parse_pois(text, "t", &cats).unwrap();
        assert_eq!(p.records.len() + p.errors.len(), p.rows);
        assert_eq!(p.records.len(), 2);
        assert!(matches!(p.errors[1], Error::UnknownCategory(_)));
    }

    #[test]
    fn labels_reject_out_of_grid_and_duplicates() {
        let g = grid4();
        let ok = parse_labels("x_r,y_r,value\n0,0,5.0\n", "t", &g).unwrap();
        assert_eq!(ok.records, vec![(RegionId::new(0, 0), 5.0)]);

        let bad = parse_labels("x_r,y_r,value\n4,0,1.0\n", "t", &g).unwrap();
        assert!(matches!(bad.errors[0], Error::OutOfGrid { x: 4, y: 0 }));

        let dup = parse_labels("x_r,y_r,value\n1,1,1.0\n1,1,2.0\n", "t", &g).unwrap();
        assert!(matches!(dup.errors[0], Error::DuplicateRegion { x: 1, y: 1 }));

        let nan = parse_labels("x_r,y_r,value\n1,1,NaN\n", "t", &g).unwrap();
        assert!(matches!(nan.errors[0], Error::NonFinite(_)));
    }

    #[test]
    fn landcover_file_checks() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridSpec::new(0.0, 0.0, 2, 2, 1.0).unwrap();
        let path = dir.path().join("lc.txt");

        fs::write(&path, "LANDCOVER 2 2 11\n0 0\n0 0\n").unwrap();
        let lc = load_landcover(&path, &g).unwrap();
        assert_eq!(lc.pixels_per_cell, 1);
        assert!(lc.classes.iter().all(|&c| c == 0));

        fs::write(&path, "LANDCOVER 2 2 11\n0 11\n0 0\n").unwrap();
        assert!(matches!(
            load_landcover(&path, &g),
            Err(Error::ClassOutOfRange { code: 11, classes: 11 })
        ));

        fs::write(&path, "LANDCOVER 2 2 11\n0 0 0\n0 0\n").unwrap();
        assert!(matches!(load_landcover(&path, &g), Err(Error::Parse { .. })));

        fs::write(&path, "LANDCOVER 3 2 11\n0 0\n0 0\n0 0\n").unwrap();
        assert!(matches!(load_landcover(&path, &g), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn upsample_preserves_layout() {
        let g = GridSpec::new(0.0, 0.0, 1, 1, 1.0).unwrap();
        let lc = LandCoverGrid::new(g, 2, 4, vec![0, 1, 2, 3]).unwrap();
        let up = lc.upsample(2);
        assert_eq!(up.pixels_per_cell, 4);
        assert_eq!(up.classes, vec![0, 0, 1, 1, 0, 0, 1, 1, 2, 2, 3, 3, 2, 2, 3, 3]);
    }
}
