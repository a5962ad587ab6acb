//! Seeded synthetic study areas with a known indicator field.
//!
//! Land cover is drawn per pixel: a Voronoi partition over pixel space
//! assigns each pixel an archetype, each (cell, archetype) pair gets its own
//! Dirichlet-perturbed class distribution, and pixels within half a river
//! width of the barrier polyline become water. POIs are Poisson per cell and
//! category, with rates mixed from the archetype intensities by pixel share.
//!
//! The indicator is
//! `y = w·e_env + v·e_soc + smooth + jump·side + noise`
//! with `smooth = A·sin(2πx/λ + φ₁)·cos(2πy/λ + φ₂)` on cell centres, `side`
//! the barrier side of the cell centre and `noise ~ N(0, σ²)`. Every term is
//! kept in the [`Ledger`].

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Dataset;
use crate::features::{self, FeatureTable, RegionFeatures};
use crate::geodata::{self, Categories, GridSpec, LabelSet, LandCoverGrid, PoiRecord, RegionId, WORLDCOVER_CLASSES};

pub const WATER_CLASS: u8 = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Archetype {
    pub name: String,
    /// Mean land-cover class distribution (one weight per class).
    pub class_weights: Vec<f64>,
    /// Expected POIs per fully covered cell, per category.
    pub poi_intensity: Vec<f64>,
    /// Relative frequency among Voronoi sites.
    pub frequency: f64,
}

fn classes(pairs: &[(usize, f64)]) -> Vec<f64> {
    let mut v = vec![0.0; WORLDCOVER_CLASSES.len()];
    for &(i, w) in pairs {
        v[i] = w;
    }
    v
}

pub fn default_categories() -> Vec<String> {
    ["food", "retail", "office", "education", "health", "leisure"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

/// Water, forest, cropland, residential and commercial.
pub fn default_archetypes() -> Vec<Archetype> {
    // class indices: 0 tree, 1 shrub, 2 grass, 3 crop, 4 built, 5 bare,
    // 6 snow, 7 water, 8 wetland, 9 mangrove, 10 moss
    vec![
        Archetype {
            name: "water".into(),
            class_weights: classes(&[(7, 0.85), (8, 0.1), (2, 0.05)]),
            poi_intensity: vec![0.2, 0.0, 0.0, 0.0, 0.0, 0.4],
            frequency: 0.1,
        },
        Archetype {
            name: "forest".into(),
            class_weights: classes(&[(0, 0.75), (1, 0.1), (2, 0.1), (5, 0.05)]),
            poi_intensity: vec![0.2, 0.1, 0.0, 0.0, 0.0, 0.8],
            frequency: 0.2,
        },
        Archetype {
            name: "cropland".into(),
            class_weights: classes(&[(3, 0.7), (2, 0.15), (0, 0.1), (4, 0.05)]),
            poi_intensity: vec![0.5, 0.5, 0.1, 0.2, 0.1, 0.1],
            frequency: 0.3,
        },
        Archetype {
            name: "residential".into(),
            class_weights: classes(&[(4, 0.55), (0, 0.15), (2, 0.2), (3, 0.1)]),
            poi_intensity: vec![6.0, 5.0, 1.0, 3.0, 2.5, 1.5],
            frequency: 0.25,
        },
        Archetype {
            name: "commercial".into(),
            class_weights: classes(&[(4, 0.85), (2, 0.1), (5, 0.05)]),
            poi_intensity: vec![14.0, 12.0, 10.0, 1.0, 2.0, 5.0],
            frequency: 0.15,
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_cols: usize,
    pub n_rows: usize,
    pub cell_km: f64,
    pub origin_lon: f64,
    pub origin_lat: f64,
    pub pixels_per_cell: usize,
    pub archetypes: Vec<Archetype>,
    pub categories: Vec<String>,
    /// Voronoi sites per cell.
    pub site_density: f64,
    /// Dirichlet concentration of per-cell class distributions.
    pub concentration: f64,
    /// Barrier polyline in grid units (cell `(x, y)` spans `[x, x+1]×[y, y+1]`).
    pub barrier: Vec<(f64, f64)>,
    pub river_width: f64,
    pub env_weights: Vec<f64>,
    pub soc_weights: Vec<f64>,
    pub smooth_amplitude: f64,
    pub smooth_wavelength: f64,
    pub jump: f64,
    pub noise_sigma: f64,
    pub indicator: String,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self::sized(48, 48)
    }
}

impl SynthConfig {
    /// Default world of the given size; the barrier crosses the whole grid.
    pub fn sized(n_cols: usize, n_rows: usize) -> Self {
        let (w, h) = (n_cols as f64, n_rows as f64);
        Self {
            n_cols,
            n_rows,
            cell_km: 1.0,
            origin_lon: 116.0,
            origin_lat: 39.5,
            pixels_per_cell: 10,
            archetypes: default_archetypes(),
            categories: default_categories(),
            site_density: 0.15,
            concentration: 6.0,
            barrier: vec![(0.0, 0.35 * h), (0.3 * w, 0.5 * h), (0.6 * w, 0.62 * h), (w, 0.45 * h)],
            river_width: 0.6,
            env_weights: vec![0.3, 0.2, 0.5, 1.0, 3.0, 0.0, 0.0, -0.5, 0.2, 0.0, 0.0],
            soc_weights: vec![0.8, 0.6, 1.0, 0.4, 0.5, 0.3],
            smooth_amplitude: 0.5,
            smooth_wavelength: 20.0,
            jump: 1.0,
            noise_sigma: 0.2,
            indicator: "synthetic".into(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let j = WORLDCOVER_CLASSES.len();
        let k = self.categories.len();
        let bad = |m: String| Err(Error::Config(m));
        if self.n_cols < 2 || self.n_rows < 2 {
            return bad(format!("grid must be at least 2x2, got {}x{}", self.n_cols, self.n_rows));
        }
        if self.pixels_per_cell == 0 || !(self.cell_km > 0.0) {
            return bad("pixels_per_cell and cell_km must be positive".into());
        }
        if self.archetypes.is_empty() {
            return bad("at least one archetype is required".into());
        }
        for a in &self.archetypes {
            if a.class_weights.len() != j || a.poi_intensity.len() != k {
                return bad(format!("archetype {} needs {j} class weights and {k} intensities", a.name));
            }
            if a.class_weights.iter().chain(&a.poi_intensity).any(|v| !(*v >= 0.0 && v.is_finite()))
                || a.class_weights.iter().sum::<f64>() <= 0.0
                || !(a.frequency >= 0.0)
            {
                return bad(format!("archetype {} has negative or empty weights", a.name));
            }
        }
        if self.archetypes.iter().map(|a| a.frequency).sum::<f64>() <= 0.0 {
            return bad("archetype frequencies sum to zero".into());
        }
        if self.env_weights.len() != j || self.soc_weights.len() != k {
            return bad(format!("need {j} env weights and {k} soc weights"));
        }
        if !(self.noise_sigma >= 0.0) || !(self.site_density > 0.0) || !(self.concentration > 0.0) {
            return bad("noise_sigma >= 0, site_density > 0 and concentration > 0 required".into());
        }
        if !(self.smooth_wavelength > 0.0) || !(self.river_width >= 0.0) {
            return bad("smooth_wavelength > 0 and river_width >= 0 required".into());
        }
        if self.barrier.len() == 1 {
            return bad("barrier polyline needs at least two vertices".into());
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.origin_lon, self.origin_lat, self.n_cols, self.n_rows, self.cell_km)
    }
}

/// 1 when the point lies below the polyline: an upward vertical ray from it
/// crosses the polyline an odd number of times.
pub fn barrier_side(barrier: &[(f64, f64)], p: (f64, f64)) -> u8 {
    let mut crossings = 0;
    for seg in barrier.windows(2) {
        let ((x0, y0), (x1, y1)) = (seg[0], seg[1]);
        // half-open in x so shared vertices count once
        let spans = (x0 <= p.0 && p.0 < x1) || (x1 <= p.0 && p.0 < x0);
        if !spans {
            continue;
        }
        let y = y0 + (p.0 - x0) / (x1 - x0) * (y1 - y0);
        if y > p.1 {
            crossings += 1;
        }
    }
    (crossings % 2) as u8
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p.0 - a.0 - t * dx).hypot(p.1 - a.1 - t * dy)
}

fn polyline_distance(line: &[(f64, f64)], p: (f64, f64)) -> f64 {
    line.windows(2)
        .map(|s| segment_distance(p, s[0], s[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Poisson draw by sequential inversion of the CDF.
pub fn poisson_inversion<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    let u: f64 = rng.random();
    let mut k = 0usize;
    let mut p = (-lambda).exp();
    let mut cdf = p;
    while u > cdf {
        k += 1;
        p *= lambda / k as f64;
        let next = cdf + p;
        if next == cdf {
            // tail beyond double precision
            break;
        }
        cdf = next;
    }
    k
}

fn sample_index<R: Rng + ?Sized>(cdf: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * cdf[cdf.len() - 1];
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
}

fn cumulative(w: &[f64]) -> Vec<f64> {
    w.iter()
        .scan(0.0, |s, &v| {
            *s += v;
            Some(*s)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedgerRow {
    pub region: RegionId,
    pub env_term: f64,
    pub soc_term: f64,
    pub smooth: f64,
    pub side: u8,
    pub noise: f64,
    pub y: f64,
}

/// Every component of the generated indicator.
#[derive(Debug, Clone, PartialEq)]
pub struct Ledger {
    pub jump: f64,
    pub env_weights: Vec<f64>,
    pub soc_weights: Vec<f64>,
    pub smooth_phase: (f64, f64),
    /// Dominant archetype per cell, row-major.
    pub dominant_archetype: Vec<usize>,
    /// Pixel share of each archetype per cell, row-major.
    pub archetype_shares: Vec<Vec<f64>>,
    pub rows: Vec<LedgerRow>,
}

impl Ledger {
    /// Indicator recomputed from the stored components.
    pub fn recompute(row: &LedgerRow, jump: f64) -> f64 {
        row.env_term + row.soc_term + row.smooth + jump * row.side as f64 + row.noise
    }

    pub fn to_csv(&self, provenance: &[String]) -> String {
        let mut head = provenance.to_vec();
        head.push(format!("jump={}", geodata::fmt_f64(self.jump)));
        head.push(format!("env_weights={:?}", self.env_weights));
        head.push(format!("soc_weights={:?}", self.soc_weights));
        head.push(format!("smooth_phase={:?}", self.smooth_phase));
        head.push("y = env_term + soc_term + smooth + jump*side + noise".into());
        let mut out = geodata::comment_block(&head);
        out.push_str("x_r,y_r,env_term,soc_term,smooth,side,noise,y,archetype\n");
        for (i, r) in self.rows.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.region.x,
                r.region.y,
                geodata::fmt_f64(r.env_term),
                geodata::fmt_f64(r.soc_term),
                geodata::fmt_f64(r.smooth),
                r.side,
                geodata::fmt_f64(r.noise),
                geodata::fmt_f64(r.y),
                self.dominant_archetype[i]
            );
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>, provenance: &[String]) -> Result<()> {
        geodata::write(path.as_ref(), &self.to_csv(provenance))
    }
}

pub const LEDGER_FILE: &str = "ledger.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct SynthWorld {
    pub config: SynthConfig,
    pub dataset: Dataset,
    pub ledger: Ledger,
}

impl SynthWorld {
    /// Write the dataset files and the ledger into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let prov = vec![
            "command=synth".to_string(),
            format!("seed={}", self.config.seed),
            format!(
                "config={}",
                serde_json::to_string(&self.config).map_err(|e| Error::Config(e.to_string()))?
            ),
        ];
        self.dataset.save(dir, &prov)?;
        self.ledger.save(dir.join(LEDGER_FILE), &prov)
    }
}

pub fn generate(config: &SynthConfig) -> Result<SynthWorld> {
    config.validate()?;
    let grid = config.grid()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let ppc = config.pixels_per_cell;
    let (pw, ph) = (config.n_cols * ppc, config.n_rows * ppc);
    let n_arch = config.archetypes.len();

    // Voronoi sites in grid units
    let n_sites = ((grid.n_regions() as f64 * config.site_density).round() as usize).max(1);
    let freq_cdf = cumulative(&config.archetypes.iter().map(|a| a.frequency).collect::<Vec<_>>());
    let sites: Vec<(f64, f64, usize)> = (0..n_sites)
        .map(|_| {
            let x = rng.random::<f64>() * config.n_cols as f64;
            let y = rng.random::<f64>() * config.n_rows as f64;
            (x, y, sample_index(&freq_cdf, &mut rng))
        })
        .collect();
    // bucket sites on the cell grid for fast nearest lookup
    let bucket = |x: f64, y: f64| {
        let bx = (x.floor() as usize).min(config.n_cols - 1);
        let by = (y.floor() as usize).min(config.n_rows - 1);
        by * config.n_cols + bx
    };
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); grid.n_regions()];
    for (i, s) in sites.iter().enumerate() {
        buckets[bucket(s.0, s.1)].push(i);
    }
    let nearest_site = |x: f64, y: f64| -> usize {
        let (cx, cy) = (x.floor() as i64, y.floor() as i64);
        let mut best = (f64::INFINITY, usize::MAX);
        let mut radius = 0i64;
        loop {
            for by in cy - radius..=cy + radius {
                for bx in cx - radius..=cx + radius {
                    let on_ring = (by - cy).abs() == radius || (bx - cx).abs() == radius;
                    if !on_ring || bx < 0 || by < 0 || bx >= config.n_cols as i64 || by >= config.n_rows as i64 {
                        continue;
                    }
                    for &i in &buckets[by as usize * config.n_cols + bx as usize] {
                        let d = (sites[i].0 - x).powi(2) + (sites[i].1 - y).powi(2);
                        if d < best.0 || (d == best.0 && i < best.1) {
                            best = (d, i);
                        }
                    }
                }
            }
            // every site outside the ring is at least `radius` cells away
            if best.1 != usize::MAX && best.0.sqrt() <= radius as f64 {
                return best.1;
            }
            radius += 1;
            if radius > (config.n_cols.max(config.n_rows) as i64) + 1 {
                return best.1;
            }
        }
    };

    let mut arch_of_pixel = vec![0usize; pw * ph];
    for py in 0..ph {
        for px in 0..pw {
            let x = (px as f64 + 0.5) / ppc as f64;
            let y = (py as f64 + 0.5) / ppc as f64;
            arch_of_pixel[py * pw + px] = sites[nearest_site(x, y)].2;
        }
    }

    // per-cell archetype shares and dirichlet-perturbed class distributions
    let mut classes = vec![0u8; pw * ph];
    let mut shares = vec![vec![0.0; n_arch]; grid.n_regions()];
    let mut dominant = vec![0usize; grid.n_regions()];
    let half_river = config.river_width / 2.0;
    for r in grid.regions() {
        let ci = grid.index(r);
        let mut counts = vec![0usize; n_arch];
        for dy in 0..ppc {
            for dx in 0..ppc {
                counts[arch_of_pixel[(r.y * ppc + dy) * pw + r.x * ppc + dx]] += 1;
            }
        }
        let total = (ppc * ppc) as f64;
        shares[ci] = counts.iter().map(|&c| c as f64 / total).collect();
        dominant[ci] = (0..n_arch).max_by_key(|&a| (counts[a], std::cmp::Reverse(a))).unwrap_or(0);
        let cdfs: Vec<Option<Vec<f64>>> = (0..n_arch)
            .map(|a| {
                if counts[a] == 0 {
                    return None;
                }
                let w: Vec<f64> = config.archetypes[a]
                    .class_weights
                    .iter()
                    .map(|&p| {
                        if p > 0.0 {
                            Gamma::new(config.concentration * p, 1.0)
                                .map(|g| g.sample(&mut rng))
                                .unwrap_or(0.0)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let w = if w.iter().sum::<f64>() > 0.0 { w } else { config.archetypes[a].class_weights.clone() };
                Some(cumulative(&w))
            })
            .collect();
        for dy in 0..ppc {
            for dx in 0..ppc {
                let (px, py) = (r.x * ppc + dx, r.y * ppc + dy);
                let p = ((px as f64 + 0.5) / ppc as f64, (py as f64 + 0.5) / ppc as f64);
                let a = arch_of_pixel[py * pw + px];
                let class = sample_index(cdfs[a].as_ref().expect("archetype present in cell"), &mut rng) as u8;
                let in_river = config.barrier.len() >= 2 && polyline_distance(&config.barrier, p) <= half_river;
                classes[py * pw + px] = if in_river { WATER_CLASS } else { class };
            }
        }
    }
    let landcover = LandCoverGrid::new(grid, ppc, WORLDCOVER_CLASSES.len(), classes)?;

    let k = config.categories.len();
    let mut pois = Vec::new();
    for r in grid.regions() {
        let ci = grid.index(r);
        for c in 0..k {
            let rate: f64 = (0..n_arch)
                .map(|a| shares[ci][a] * config.archetypes[a].poi_intensity[c])
                .sum();
            for _ in 0..poisson_inversion(rate, &mut rng) {
                // keep clear of cell edges so the point maps back to this cell
                let u = 0.02 + 0.96 * rng.random::<f64>();
                let v = 0.02 + 0.96 * rng.random::<f64>();
                let (lon, lat) = grid.from_km((r.x as f64 + u) * grid.cell_km, (r.y as f64 + v) * grid.cell_km);
                pois.push(PoiRecord { x: lon, y: lat, c });
            }
        }
    }

    let table = features::featurize_all(&grid, &landcover, &pois, k)?;
    let tau = std::f64::consts::TAU;
    let phase = (rng.random::<f64>() * tau, rng.random::<f64>() * tau);
    let noise = Normal::new(0.0, config.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut rows = Vec::with_capacity(grid.n_regions());
    for f in &table.regions {
        let r = f.region;
        let (cx, cy) = (r.x as f64 + 0.5, r.y as f64 + 0.5);
        let env_term: f64 = config.env_weights.iter().zip(&f.e_env).map(|(w, e)| w * e).sum();
        let soc_term: f64 = config.soc_weights.iter().zip(&f.e_soc).map(|(w, e)| w * e).sum();
        let smooth = config.smooth_amplitude
            * (tau * cx / config.smooth_wavelength + phase.0).sin()
            * (tau * cy / config.smooth_wavelength + phase.1).cos();
        let side = if config.barrier.len() >= 2 { barrier_side(&config.barrier, (cx, cy)) } else { 0 };
        let eps = noise.sample(&mut rng);
        let mut row = LedgerRow {
            region: r,
            env_term,
            soc_term,
            smooth,
            side,
            noise: eps,
            y: 0.0,
        };
        row.y = Ledger::recompute(&row, config.jump);
        rows.push(row);
    }
    let labels = LabelSet::new(
        config.indicator.clone(),
        rows.iter().map(|r| (r.region, r.y)).collect(),
        &grid,
    )?;
    Ok(SynthWorld {
        config: config.clone(),
        dataset: Dataset {
            grid,
            landcover,
            categories: Categories::new(config.categories.clone()),
            pois,
            labels,
        },
        ledger: Ledger {
            jump: config.jump,
            env_weights: config.env_weights.clone(),
            soc_weights: config.soc_weights.clone(),
            smooth_phase: phase,
            dominant_archetype: dominant,
            archetype_shares: shares,
            rows,
        },
    })
}

/// Feature table with random proportions and POI mixes, for tests and
/// small experiments that do not need a full world.
pub fn random_features(n_cols: usize, n_rows: usize, n_env: usize, n_soc: usize, seed: u64) -> Result<FeatureTable> {
    let grid = GridSpec::new(0.0, 0.0, n_cols, n_rows, 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let regions = grid
        .regions()
        .map(|r| {
            let env = normalized(&mut rng, n_env);
            let count = rng.random_range(0..20usize);
            let f = features::social_impact_factor(count);
            let e_soc = if count == 0 {
                vec![0.0; n_soc]
            } else {
                normalized(&mut rng, n_soc).into_iter().map(|p| f * p).collect()
            };
            Ok(RegionFeatures {
                region: r,
                e_pos: features::compute_pos(r, &grid)?,
                e_env: env,
                e_soc,
                poi_count: count,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureTable {
        grid,
        n_env,
        n_soc,
        regions,
        pois_outside: 0,
    })
}

fn normalized<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    // squaring makes sparse, uneven mixes more likely
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>().powi(2)).collect();
    let s: f64 = raw.iter().sum();
    if s == 0.0 {
        return vec![1.0 / n as f64; n];
    }
    raw.into_iter().map(|v| v / s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small() -> SynthConfig {
        let mut c = SynthConfig::sized(12, 10);
        c.pixels_per_cell = 4;
        c.seed = 5;
        c
    }

    #[test]
    fn deterministic_by_seed() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a, b);
        let mut c = small();
        c.seed = 6;
        assert_ne!(a.dataset.labels, generate(&c).unwrap().dataset.labels);
    }

    #[test]
    fn ledger_recomputes_labels() {
        let w = generate(&small()).unwrap();
        let table = w.dataset.featurize().unwrap();
        for ((row, (_, y)), f) in w.ledger.rows.iter().zip(&w.dataset.labels.entries).zip(&table.regions) {
            assert_abs_diff_eq!(Ledger::recompute(row, w.ledger.jump), *y, epsilon = 1e-12);
            let env: f64 = w.ledger.env_weights.iter().zip(&f.e_env).map(|(a, b)| a * b).sum();
            assert_abs_diff_eq!(env, row.env_term, epsilon = 1e-12);
        }
    }

    #[test]
    fn noiseless_linear_world() {
        let mut c = small();
        c.noise_sigma = 0.0;
        c.jump = 0.0;
        c.smooth_amplitude = 0.0;
        let w = generate(&c).unwrap();
        for r in &w.ledger.rows {
            assert_eq!(r.y, r.env_term + r.soc_term);
        }
    }

    #[test]
    fn side_by_ray_parity() {
        let line = [(0.0, 5.0), (10.0, 5.0)];
        assert_eq!(barrier_side(&line, (3.0, 1.0)), 1);
        assert_eq!(barrier_side(&line, (3.0, 9.0)), 0);
        let zig = [(0.0, 2.0), (5.0, 8.0), (10.0, 2.0)];
        assert_eq!(barrier_side(&zig, (5.0, 7.0)), 1);
        assert_eq!(barrier_side(&zig, (5.0, 9.0)), 0);
        // exactly under the shared vertex: counted once
        assert_eq!(barrier_side(&zig, (5.0, 0.0)), 1);
    }

    #[test]
    fn poisson_mean_and_zero_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(poisson_inversion(0.0, &mut rng), 0);
        let n = 20_000;
        let total: usize = (0..n).map(|_| poisson_inversion(3.5, &mut rng)).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 3.5).abs() < 3.0 * (3.5f64 / n as f64).sqrt() * 1.5, "{mean}");
    }

    #[test]
    fn poi_counts_match_intensities() {
        let w = generate(&SynthConfig {
            pixels_per_cell: 4,
            seed: 11,
            ..SynthConfig::sized(30, 30)
        })
        .unwrap();
        let cfg = &w.config;
        for c in 0..cfg.categories.len() {
            let expected: f64 = w
                .ledger
                .archetype_shares
                .iter()
                .map(|sh| sh.iter().zip(&cfg.archetypes).map(|(s, a)| s * a.poi_intensity[c]).sum::<f64>())
                .sum();
            let observed = w.dataset.pois.iter().filter(|p| p.c == c).count() as f64;
            assert!(
                (observed - expected).abs() <= 3.0 * expected.sqrt().max(1.0),
                "category {c}: {observed} vs {expected}"
            );
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = small();
        c.n_cols = 1;
        assert!(generate(&c).is_err());
        let mut c = small();
        c.noise_sigma = -1.0;
        assert!(c.validate().is_err());
        let mut c = small();
        c.archetypes[0].poi_intensity[0] = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn random_features_are_valid() {
        let t = random_features(4, 3, 5, 3, 2).unwrap();
        assert_eq!(t.len(), 12);
        for r in &t.regions {
            assert_abs_diff_eq!(r.e_env.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }
}
