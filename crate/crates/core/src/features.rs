//! Per-region position, environment and society features.
//!
//! * position: integer cell coordinates in grid units,
//! * environment: land-cover class area proportions inside the cell,
//! * society: POI category proportions scaled by the social impact factor
//!   `f = ln(poi_count + 1)`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geodata::{self, GridSpec, LandCoverGrid, PoiRecord, RegionId};
use crate::tensor::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct RegionFeatures {
    pub region: RegionId,
    pub e_pos: [f64; 2],
    pub e_env: Vec<f64>,
    pub e_soc: Vec<f64>,
    pub poi_count: usize,
}

impl RegionFeatures {
    /// Concatenated raw vector `[pos, env, soc]`.
    pub fn raw(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 + self.e_env.len() + self.e_soc.len());
        v.extend_from_slice(&self.e_pos);
        v.extend_from_slice(&self.e_env);
        v.extend_from_slice(&self.e_soc);
        v
    }
}

/// Features for every region of a grid, in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub grid: GridSpec,
    pub n_env: usize,
    pub n_soc: usize,
    pub regions: Vec<RegionFeatures>,
    /// POIs that fell outside the grid and were dropped.
    pub pois_outside: usize,
}

pub fn social_impact_factor(poi_count: usize) -> f64 {
    (poi_count as f64 + 1.0).ln()
}

pub fn compute_pos(region: RegionId, grid: &GridSpec) -> Result<[f64; 2]> {
    grid.check(region)?;
    // lower-left corner offset in km, divided by the cell scale
    let east_km = region.x as f64 * grid.cell_km;
    let north_km = region.y as f64 * grid.cell_km;
    Ok([(east_km / grid.cell_km).round(), (north_km / grid.cell_km).round()])
}

pub fn compute_env(region: RegionId, lc: &LandCoverGrid) -> Vec<f64> {
    let mut counts = vec![0usize; lc.n_classes];
    for c in lc.cell_pixels(region) {
        counts[c as usize] += 1;
    }
    let total = (lc.pixels_per_cell * lc.pixels_per_cell) as f64;
    counts.into_iter().map(|n| n as f64 / total).collect()
}

fn soc_from_counts(counts: &[usize]) -> (Vec<f64>, usize) {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return (vec![0.0; counts.len()], 0);
    }
    let f = social_impact_factor(n);
    let soc = counts.iter().map(|&c| f * (c as f64 / n as f64)).collect();
    (soc, n)
}

/// Societal embedding of one region and its POI count.
pub fn compute_soc(region: RegionId, pois: &[PoiRecord], grid: &GridSpec, n_categories: usize) -> (Vec<f64>, usize) {
    let mut counts = vec![0usize; n_categories];
    for p in pois {
        if p.c < n_categories && grid.region_of(p.x, p.y) == Some(region) {
            counts[p.c] += 1;
        }
    }
    soc_from_counts(&counts)
}

pub fn featurize_all(
    grid: &GridSpec,
    lc: &LandCoverGrid,
    pois: &[PoiRecord],
    n_categories: usize,
) -> Result<FeatureTable> {
    if lc.grid != *grid {
        return Err(Error::DimensionMismatch("land-cover grid differs from region grid".into()));
    }
    let n = grid.n_regions();
    let mut counts = vec![0usize; n * n_categories];
    let mut outside = 0;
    for p in pois {
        if p.c >= n_categories {
            return Err(Error::UnknownCategory(p.c.to_string()));
        }
        match grid.region_of(p.x, p.y) {
            Some(r) => counts[grid.index(r) * n_categories + p.c] += 1,
            None => outside += 1,
        }
    }
    if outside > 0 {
        log::warn!("{outside} POIs fall outside the grid and were dropped");
    }

    let mut regions = Vec::with_capacity(n);
    for (i, region) in grid.regions().enumerate() {
        let (e_soc, poi_count) = soc_from_counts(&counts[i * n_categories..(i + 1) * n_categories]);
        regions.push(RegionFeatures {
            region,
            e_pos: compute_pos(region, grid)?,
            e_env: compute_env(region, lc),
            e_soc,
            poi_count,
        });
    }
    Ok(FeatureTable {
        grid: *grid,
        n_env: lc.n_classes,
        n_soc: n_categories,
        regions,
        pois_outside: outside,
    })
}

impl FeatureTable {
    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        2 + self.n_env + self.n_soc
    }

    /// Model input rows `[pos, env, soc]`; with `normalize_pos` each position
    /// axis is min-max scaled to `[0, 1]`.
    pub fn input_matrix(&self, normalize_pos: bool) -> Matrix {
        let dim = self.input_dim();
        let mut m = Matrix::zeros(self.len(), dim);
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for r in &self.regions {
            for a in 0..2 {
                lo[a] = lo[a].min(r.e_pos[a]);
                hi[a] = hi[a].max(r.e_pos[a]);
            }
        }
        for (i, r) in self.regions.iter().enumerate() {
            let row = m.row_mut(i);
            for a in 0..2 {
                row[a] = if !normalize_pos {
                    r.e_pos[a]
                } else if hi[a] > lo[a] {
                    (r.e_pos[a] - lo[a]) / (hi[a] - lo[a])
                } else {
                    0.0
                };
            }
            row[2..2 + self.n_env].copy_from_slice(&r.e_env);
            row[2 + self.n_env..].copy_from_slice(&r.e_soc);
        }
        m
    }

    /// Rows permuted so that new row `perm[i]` holds old row `i`.
    pub fn permuted(&self, perm: &[usize]) -> FeatureTable {
        let mut regions = self.regions.clone();
        for (old, r) in self.regions.iter().enumerate() {
            regions[perm[old]] = r.clone();
        }
        FeatureTable {
            regions,
            ..self.clone()
        }
    }
}

pub fn save_features(path: impl AsRef<Path>, table: &FeatureTable, provenance: &[String]) -> Result<()> {
    let mut out = geodata::comment_block(provenance);
    out.push_str("x_r,y_r,pos_0,pos_1");
    for j in 0..table.n_env {
        let _ = write!(out, ",env_{j}");
    }
    for k in 0..table.n_soc {
        let _ = write!(out, ",soc_{k}");
    }
    out.push_str(",poi_count\n");
    for r in &table.regions {
        let _ = write!(out, "{},{}", r.region.x, r.region.y);
        for v in r.e_pos.iter().chain(&r.e_env).chain(&r.e_soc) {
            let _ = write!(out, ",{}", geodata::fmt_f64(*v));
        }
        let _ = writeln!(out, ",{}", r.poi_count);
    }
    geodata::write(path.as_ref(), &out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lc_from(grid: GridSpec, ppc: usize, classes: Vec<u8>) -> LandCoverGrid {
        LandCoverGrid::new(grid, ppc, 11, classes).unwrap()
    }

    #[test]
    fn pos_is_cell_coordinates() {
        let g = GridSpec::new(0.0, 0.0, 8, 8, 1.0).unwrap();
        assert_eq!(compute_pos(RegionId::new(0, 0), &g).unwrap(), [0.0, 0.0]);
        assert_eq!(compute_pos(RegionId::new(3, 7), &g).unwrap(), [3.0, 7.0]);
        assert!(compute_pos(RegionId::new(8, 0), &g).is_err());
    }

    #[test]
    fn pos_at_two_km_cells_matches_center_offsets() {
        let g = GridSpec::new(10.0, 45.0, 8, 8, 2.0).unwrap();
        let r = RegionId::new(3, 7);
        let (lon, lat) = g.center(r);
        let (ex, ny) = g.to_km(lon, lat);
        let oracle = [(ex / g.cell_km).floor(), (ny / g.cell_km).floor()];
        assert_eq!(compute_pos(r, &g).unwrap(), oracle);
    }

    #[test]
    fn env_uniform_cell_is_one_hot() {
        let g = GridSpec::new(0.0, 0.0, 1, 1, 1.0).unwrap();
        let lc = lc_from(g, 3, vec![4; 9]);
        let env = compute_env(RegionId::new(0, 0), &lc);
        let mut want = vec![0.0; 11];
        want[4] = 1.0;
        assert_eq!(env, want);
    }

    #[test]
    fn env_even_split() {
        let g = GridSpec::new(0.0, 0.0, 1, 1, 1.0).unwrap();
        let lc = lc_from(g, 2, vec![0, 1, 1, 0]);
        let env = compute_env(RegionId::new(0, 0), &lc);
        assert_eq!(&env[..3], &[0.5, 0.5, 0.0]);
    }

    #[test]
    fn soc_empty_and_single() {
        let g = GridSpec::new(0.0, 0.0, 2, 2, 1.0).unwrap();
        let (soc, n) = compute_soc(RegionId::new(0, 0), &[], &g, 4);
        assert_eq!((soc, n), (vec![0.0; 4], 0));

        let (lon, lat) = g.center(RegionId::new(1, 0));
        let pois = [PoiRecord { x: lon, y: lat, c: 2 }];
        let (soc, n) = compute_soc(RegionId::new(1, 0), &pois, &g, 4);
        assert_eq!(n, 1);
        assert_eq!(soc, vec![0.0, 0.0, 2f64.ln(), 0.0]);
        assert!((soc[2] - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn one_by_one_grid_composes() {
        let g = GridSpec::new(5.0, 5.0, 1, 1, 1.0).unwrap();
        let lc = lc_from(g, 2, vec![1, 1, 1, 3]);
        let (lon, lat) = g.center(RegionId::new(0, 0));
        let pois = vec![PoiRecord { x: lon, y: lat, c: 0 }, PoiRecord { x: lon, y: lat, c: 1 }];
        let t = featurize_all(&g, &lc, &pois, 2).unwrap();
        assert_eq!(t.regions.len(), 1);
        let r = &t.regions[0];
        assert_eq!(r.e_pos, [0.0, 0.0]);
        assert_eq!(r.e_env, compute_env(r.region, &lc));
        assert_eq!((r.e_soc.clone(), r.poi_count), compute_soc(r.region, &pois, &g, 2));
    }

    #[test]
    fn outside_pois_are_counted() {
        let g = GridSpec::new(0.0, 0.0, 2, 2, 1.0).unwrap();
        let lc = lc_from(g, 1, vec![0; 4]);
        let pois = vec![PoiRecord { x: -1.0, y: 0.0, c: 0 }, PoiRecord { x: 0.001, y: 0.001, c: 0 }];
        let t = featurize_all(&g, &lc, &pois, 1).unwrap();
        assert_eq!(t.pois_outside, 1);
        assert_eq!(t.regions[0].poi_count, 1);
    }

    #[test]
    fn normalized_positions_span_unit_interval() {
        let g = GridSpec::new(0.0, 0.0, 3, 2, 1.0).unwrap();
        let lc = lc_from(g, 1, vec![0; 6]);
        let t = featurize_all(&g, &lc, &[], 1).unwrap();
        let m = t.input_matrix(true);
        assert_eq!(m.row(5)[..2], [1.0, 1.0]);
        assert_eq!(m.row(1)[..2], [0.5, 0.0]);
        let raw = t.input_matrix(false);
        assert_eq!(raw.row(5)[..2], [2.0, 1.0]);
    }
}
