//! Inverse distance weighting and universal kriging.
//!
//! Sample and target positions are plain planar coordinates; for grid data
//! use [`Sample::at_region`] / [`region_point`], which place a region at its
//! cell centre in grid units.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodata::RegionId;
use crate::tensor::{lu_solve, Matrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

impl Sample {
    pub fn new(x: f64, y: f64, value: f64) -> Self {
        Self { x, y, value }
    }

    pub fn at_region(r: RegionId, value: f64) -> Self {
        let (x, y) = region_point(r);
        Self { x, y, value }
    }
}

/// Cell centre of `r` in grid units.
pub fn region_point(r: RegionId) -> (f64, f64) {
    (r.x as f64 + 0.5, r.y as f64 + 0.5)
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Indices of the `k` samples nearest to `target`, nearest first; ties go
/// to the lower index.
pub fn nearest(samples: &[Sample], target: (f64, f64), k: usize) -> Vec<(usize, f64)> {
    let mut d: Vec<(usize, f64)> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| (i, dist((s.x, s.y), target)))
        .collect();
    let k = k.min(d.len());
    let cmp = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
    if k > 0 && k < d.len() {
        d.select_nth_unstable_by(k - 1, cmp);
    }
    d.truncate(k);
    d.sort_by(cmp);
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdwConfig {
    pub power: f64,
    pub k_neighbors: usize,
}

impl Default for IdwConfig {
    fn default() -> Self {
        Self {
            power: 2.0,
            k_neighbors: 16,
        }
    }
}

/// Normalised IDW weights over the `k` nearest samples. A sample at
/// distance zero takes all the weight.
pub fn idw_weights(samples: &[Sample], target: (f64, f64), power: f64, k: usize) -> Result<Vec<(usize, f64)>> {
    if samples.is_empty() {
        return Err(Error::TooFewLabels("IDW needs at least one sample".into()));
    }
    if !(power > 0.0) {
        return Err(Error::Config(format!("IDW power must be > 0, got {power}")));
    }
    let near = nearest(samples, target, k.max(1));
    if near[0].1 == 0.0 {
        return Ok(vec![(near[0].0, 1.0)]);
    }
    let raw: Vec<(usize, f64)> = near.iter().map(|&(i, d)| (i, d.powf(-power))).collect();
    let total: f64 = raw.iter().map(|w| w.1).sum();
    Ok(raw.into_iter().map(|(i, w)| (i, w / total)).collect())
}

pub fn idw_predict(samples: &[Sample], target: (f64, f64), power: f64, k: usize) -> Result<f64> {
    let w = idw_weights(samples, target, power, k)?;
    Ok(w.iter().map(|&(i, w)| w * samples[i].value).sum())
}

/// Exponential semivariogram `γ(h) = nugget + sill·(1 − exp(−h/range))`
/// for `h > 0` and `γ(0) = 0`. `sill` is the partial sill, so the total
/// plateau is `nugget + sill`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariogramModel {
    pub nugget: f64,
    pub sill: f64,
    pub range: f64,
}

/// Partial sill used when the field is constant.
pub const DEGENERATE_SILL: f64 = 1e-12;

impl VariogramModel {
    pub fn new(nugget: f64, sill: f64, range: f64) -> Result<Self> {
        let m = Self { nugget, sill, range };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nugget >= 0.0 && self.sill > 0.0 && self.range > 0.0)
            || !(self.nugget.is_finite() && self.sill.is_finite() && self.range.is_finite())
        {
            return Err(Error::Config(format!(
                "variogram needs nugget >= 0, sill > 0, range > 0; got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn gamma(&self, h: f64) -> f64 {
        if h <= 0.0 {
            0.0
        } else {
            self.nugget + self.sill * (1.0 - (-h / self.range).exp())
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.nugget == 0.0 && self.sill == DEGENERATE_SILL
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalVariogram {
    /// Mean pair distance per non-empty bin.
    pub lags: Vec<f64>,
    pub gamma: Vec<f64>,
    pub counts: Vec<usize>,
}

pub const VARIOGRAM_BINS: usize = 12;

fn max_pair_distance(samples: &[Sample]) -> f64 {
    let mut m: f64 = 0.0;
    for (i, a) in samples.iter().enumerate() {
        for b in &samples[i + 1..] {
            m = m.max(dist((a.x, a.y), (b.x, b.y)));
        }
    }
    m
}

/// Half mean squared difference over all pairs, binned on `(0, max_dist]`.
pub fn empirical_variogram(samples: &[Sample], n_bins: usize, max_dist: f64) -> EmpiricalVariogram {
    let width = max_dist / n_bins as f64;
    let mut sum_g = vec![0.0; n_bins];
    let mut sum_h = vec![0.0; n_bins];
    let mut counts = vec![0usize; n_bins];
    if width > 0.0 {
        for (i, a) in samples.iter().enumerate() {
            for b in &samples[i + 1..] {
                let h = dist((a.x, a.y), (b.x, b.y));
                if h <= 0.0 || h > max_dist {
                    continue;
                }
                let bin = ((h / width).ceil() as usize).clamp(1, n_bins) - 1;
                sum_g[bin] += 0.5 * (a.value - b.value).powi(2);
                sum_h[bin] += h;
                counts[bin] += 1;
            }
        }
    }
    let mut out = EmpiricalVariogram {
        lags: Vec::new(),
        gamma: Vec::new(),
        counts: Vec::new(),
    };
    for b in 0..n_bins {
        if counts[b] > 0 {
            out.lags.push(sum_h[b] / counts[b] as f64);
            out.gamma.push(sum_g[b] / counts[b] as f64);
            out.counts.push(counts[b]);
        }
    }
    out
}

/// Least-squares weight of a bin: pair count over squared lag.
fn bin_weight(count: usize, lag: f64) -> f64 {
    count as f64 / (lag * lag).max(1e-12)
}

fn weighted_sse(ev: &EmpiricalVariogram, m: &VariogramModel) -> f64 {
    ev.lags
        .iter()
        .zip(&ev.gamma)
        .zip(&ev.counts)
        .map(|((&h, &g), &n)| bin_weight(n, h) * (m.gamma(h) - g).powi(2))
        .sum()
}

/// Best non-negative (nugget, sill) for a fixed range: weighted linear
/// least squares on the basis (1, 1 − e^{−h/range}).
fn linear_part(ev: &EmpiricalVariogram, range: f64) -> (f64, f64) {
    let (mut s11, mut s12, mut s22, mut t1, mut t2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&h, &g), &n) in ev.lags.iter().zip(&ev.gamma).zip(&ev.counts) {
        let w = bin_weight(n, h);
        let b = 1.0 - (-h / range).exp();
        s11 += w;
        s12 += w * b;
        s22 += w * b * b;
        t1 += w * g;
        t2 += w * b * g;
    }
    let det = s11 * s22 - s12 * s12;
    let (mut nug, mut sill) = if det.abs() > 1e-300 {
        ((t1 * s22 - s12 * t2) / det, (s11 * t2 - s12 * t1) / det)
    } else {
        (0.0, t2 / s22.max(1e-300))
    };
    if nug < 0.0 {
        nug = 0.0;
        sill = t2 / s22.max(1e-300);
    }
    if sill <= 0.0 {
        sill = DEGENERATE_SILL;
        nug = (t1 / s11.max(1e-300)).max(0.0);
    }
    (nug, sill)
}

/// Fit the exponential model by weighted least squares (weights
/// `N_pairs / h²`): a log-spaced
/// grid over the range (with the linear parameters solved exactly per
/// candidate) seeds a damped Gauss-Newton refinement of all three
/// parameters. The range stays within `[first lag / 4, last lag]`.
pub fn fit_variogram(samples: &[Sample]) -> Result<VariogramModel> {
    if samples.len() < 10 {
        return Err(Error::TooFewLabels(format!(
            "variogram fit needs at least 10 samples, got {}",
            samples.len()
        )));
    }
    let max_d = max_pair_distance(samples);
    let first = samples[0].value;
    let fallback = VariogramModel {
        nugget: 0.0,
        sill: DEGENERATE_SILL,
        range: (max_d / 3.0).max(1.0),
    };
    if samples.iter().all(|s| s.value == first) || max_d == 0.0 {
        return Ok(fallback);
    }
    let ev = empirical_variogram(samples, VARIOGRAM_BINS, max_d / 2.0);
    if ev.lags.len() < 2 || ev.gamma.iter().all(|&g| g == 0.0) {
        return Ok(fallback);
    }

    // range is kept inside the lag interval covered by the bins; beyond it
    // the model degenerates into a linear trend
    let r_lo = ev.lags[0].max(1e-6) / 4.0;
    let r_hi = ev.lags.last().copied().unwrap_or(1.0).max(r_lo);
    let mut best: Option<(f64, VariogramModel)> = None;
    let n_grid = 40;
    for i in 0..n_grid {
        let t = i as f64 / (n_grid - 1) as f64;
        let range = r_lo * (r_hi / r_lo).powf(t);
        let (nugget, sill) = linear_part(&ev, range);
        let m = VariogramModel { nugget, sill, range };
        let sse = weighted_sse(&ev, &m);
        if best.as_ref().is_none_or(|b| sse < b.0) {
            best = Some((sse, m));
        }
    }
    let (mut sse, mut m) = best.expect("grid is non-empty");

    // Gauss-Newton with Levenberg damping on (nugget, sill, ln range).
    let mut lambda = 1e-3;
    for _ in 0..100 {
        let mut jtj = [[0.0f64; 3]; 3];
        let mut jtr = [0.0f64; 3];
        for ((&h, &g), &n) in ev.lags.iter().zip(&ev.gamma).zip(&ev.counts) {
            let w = bin_weight(n, h);
            let e = (-h / m.range).exp();
            let r = m.gamma(h) - g;
            let jac = [1.0, 1.0 - e, -m.sill * e * h / m.range];
            for a in 0..3 {
                jtr[a] += w * jac[a] * r;
                for b in 0..3 {
                    jtj[a][b] += w * jac[a] * jac[b];
                }
            }
        }
        let mut a = Matrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                a.set(i, j, jtj[i][j] + if i == j { lambda * jtj[i][i].max(1e-12) } else { 0.0 });
            }
        }
        let Ok(step) = lu_solve(&a, &[-jtr[0], -jtr[1], -jtr[2]]) else {
            break;
        };
        let cand = VariogramModel {
            nugget: (m.nugget + step[0]).max(0.0),
            sill: (m.sill + step[1]).max(DEGENERATE_SILL),
            range: (m.range * step[2].clamp(-2.0, 2.0).exp()).clamp(r_lo, r_hi),
        };
        let cand_sse = weighted_sse(&ev, &cand);
        if cand_sse < sse {
            let gain = (sse - cand_sse) / sse.max(1e-300);
            m = cand;
            sse = cand_sse;
            lambda = (lambda * 0.3).max(1e-9);
            if gain < 1e-12 {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e8 {
                break;
            }
        }
    }
    m.validate()?;
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UkConfig {
    pub k_neighbors: usize,
}

impl Default for UkConfig {
    fn default() -> Self {
        Self { k_neighbors: 64 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UkPrediction {
    pub value: f64,
    /// `(sample index, λ)` for the neighbours used. Empty after a fallback.
    pub weights: Vec<(usize, f64)>,
    /// The kriging system was singular and IDW was used instead.
    pub fell_back: bool,
}

/// Universal kriging with drift basis (1, x, y) over the `k` nearest
/// samples. Coordinates are centred on the target before assembling the
/// system, which keeps it well scaled and translation invariant.
pub fn uk_predict(samples: &[Sample], target: (f64, f64), model: &VariogramModel, k: usize) -> Result<UkPrediction> {
    model.validate()?;
    if samples.len() < 3 {
        return Err(Error::TooFewLabels(format!(
            "universal kriging needs at least 3 samples, got {}",
            samples.len()
        )));
    }
    let near = nearest(samples, target, k.max(3));
    let n = near.len();
    let size = n + 3;
    let mut a = Matrix::zeros(size, size);
    let mut rhs = vec![0.0; size];
    for (i, &(si, d0)) in near.iter().enumerate() {
        let s = samples[si];
        for (j, &(sj, _)) in near.iter().enumerate() {
            let t = samples[sj];
            a.set(i, j, model.gamma(dist((s.x, s.y), (t.x, t.y))));
        }
        let f = [1.0, s.x - target.0, s.y - target.1];
        for (c, v) in f.into_iter().enumerate() {
            a.set(i, n + c, v);
            a.set(n + c, i, v);
        }
        rhs[i] = model.gamma(d0);
    }
    rhs[n] = 1.0;
    match lu_solve(&a, &rhs) {
        Ok(sol) => {
            let weights: Vec<(usize, f64)> = near.iter().zip(&sol).map(|(&(i, _), &l)| (i, l)).collect();
            let value = weights.iter().map(|&(i, l)| l * samples[i].value).sum();
            Ok(UkPrediction {
                value,
                weights,
                fell_back: false,
            })
        }
        Err(_) => {
            log::warn!("kriging system singular at ({}, {}); using IDW", target.0, target.1);
            let d = IdwConfig::default();
            Ok(UkPrediction {
                value: idw_predict(samples, target, d.power, d.k_neighbors)?,
                weights: Vec::new(),
                fell_back: true,
            })
        }
    }
}

/// Predictions for many targets plus the number of kriging fallbacks.
pub fn uk_predict_all(
    samples: &[Sample],
    targets: &[(f64, f64)],
    model: &VariogramModel,
    k: usize,
) -> Result<(Vec<f64>, usize)> {
    let mut out = Vec::with_capacity(targets.len());
    let mut fallbacks = 0;
    for &t in targets {
        let p = uk_predict(samples, t, model, k)?;
        fallbacks += p.fell_back as usize;
        out.push(p.value);
    }
    Ok((out, fallbacks))
}
