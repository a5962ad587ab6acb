//! Weighted heterogeneous region graph.
//!
//! Node ids are static: regions occupy `[0, N)` in row-major order,
//! environmental entities `[N, N+J)` and societal entities `[N+J, N+J+K)`.
//! Entity nodes act as hubs: every region linked to the same entity is two
//! hops from every other such region, whatever their spatial distance.
//!
//! Region adjacency uses the 8-neighbourhood (all cells of the surrounding
//! 3×3 block).

use std::collections::{HashSet, VecDeque};
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::features::{FeatureTable, RegionFeatures};
use crate::geodata::{self, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    /// Region near region.
    Rnr,
    /// Environmental entity located in region.
    Elr,
    /// Societal entity located in region.
    Slr,
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeKind::Rnr => "RNR",
            EdgeKind::Elr => "ELR",
            EdgeKind::Slr => "SLR",
        })
    }
}

impl FromStr for EdgeKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "RNR" => Ok(EdgeKind::Rnr),
            "ELR" => Ok(EdgeKind::Elr),
            "SLR" => Ok(EdgeKind::Slr),
            other => Err(format!("unknown relation {other:?}")),
        }
    }
}

/// Undirected edge stored once with `src < dst`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

impl Edge {
    pub fn new(a: usize, b: usize, weight: f64) -> Self {
        Self {
            src: a.min(b),
            dst: a.max(b),
            weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeteroGraph {
    pub n_regions: usize,
    pub n_env: usize,
    pub n_soc: usize,
    pub edges_rnr: Vec<Edge>,
    pub edges_elr: Vec<Edge>,
    pub edges_slr: Vec<Edge>,
    pub theta_env: f64,
    pub theta_soc: f64,
}

/// Number of 8-neighbour pairs on an `rows × cols` grid.
pub fn rnr_edge_count(rows: usize, cols: usize) -> usize {
    let (r, c) = (rows as i64, cols as i64);
    (4 * r * c - 3 * r - 3 * c + 2).max(0) as usize
}

pub fn build_rnr(grid: &GridSpec) -> Vec<Edge> {
    let (w, h) = (grid.n_cols as i64, grid.n_rows as i64);
    let mut edges = Vec::with_capacity(rnr_edge_count(grid.n_rows, grid.n_cols));
    for y in 0..h {
        for x in 0..w {
            let a = (y * w + x) as usize;
            // forward half of the 3x3 neighbourhood
            for (dx, dy) in [(1, 0), (-1, 1), (0, 1), (1, 1)] {
                let (nx, ny) = (x + dx, y + dy);
                if nx >= 0 && nx < w && ny < h {
                    edges.push(Edge::new(a, (ny * w + nx) as usize, 1.0));
                }
            }
        }
    }
    edges
}

fn check_theta(theta: f64, what: &str) -> Result<()> {
    if theta.is_nan() || theta < 0.0 {
        return Err(Error::Config(format!("{what} must be >= 0, got {theta}")));
    }
    Ok(())
}

/// Region-environment edges weighted by area proportion, kept when the
/// proportion reaches `theta_env`.
pub fn build_elr(features: &[RegionFeatures], theta_env: f64) -> Result<Vec<Edge>> {
    check_theta(theta_env, "theta_env")?;
    let n = features.len();
    let mut edges = Vec::new();
    for (i, f) in features.iter().enumerate() {
        for (j, &p) in f.e_env.iter().enumerate() {
            if p >= theta_env && p > 0.0 {
                edges.push(Edge::new(i, n + j, p));
            }
        }
    }
    Ok(edges)
}

/// Region-society edges weighted by `f · p_poi`, kept when that reaches
/// `theta_soc`.
pub fn build_slr(features: &[RegionFeatures], n_env: usize, theta_soc: f64) -> Result<Vec<Edge>> {
    check_theta(theta_soc, "theta_soc")?;
    let n = features.len();
    let mut edges = Vec::new();
    for (i, f) in features.iter().enumerate() {
        for (k, &w) in f.e_soc.iter().enumerate() {
            if w >= theta_soc && w > 0.0 {
                edges.push(Edge::new(i, n + n_env + k, w));
            }
        }
    }
    Ok(edges)
}

pub fn build_graph(grid: &GridSpec, table: &FeatureTable, theta_env: f64, theta_soc: f64) -> Result<HeteroGraph> {
    if table.len() != grid.n_regions() {
        return Err(Error::DimensionMismatch(format!(
            "{} feature rows for {} regions",
            table.len(),
            grid.n_regions()
        )));
    }
    let g = HeteroGraph {
        n_regions: grid.n_regions(),
        n_env: table.n_env,
        n_soc: table.n_soc,
        edges_rnr: build_rnr(grid),
        edges_elr: build_elr(&table.regions, theta_env)?,
        edges_slr: build_slr(&table.regions, table.n_env, theta_soc)?,
        theta_env,
        theta_soc,
    };
    debug_assert!(g.validate(Some(grid)).is_ok());
    Ok(g)
}

impl HeteroGraph {
    pub fn n_nodes(&self) -> usize {
        self.n_regions + self.n_env + self.n_soc
    }

    pub fn env_node(&self, j: usize) -> usize {
        self.n_regions + j
    }

    pub fn soc_node(&self, k: usize) -> usize {
        self.n_regions + self.n_env + k
    }

    pub fn edges(&self, kind: EdgeKind) -> &[Edge] {
        match kind {
            EdgeKind::Rnr => &self.edges_rnr,
            EdgeKind::Elr => &self.edges_elr,
            EdgeKind::Slr => &self.edges_slr,
        }
    }

    pub fn n_edges(&self) -> usize {
        self.edges_rnr.len() + self.edges_elr.len() + self.edges_slr.len()
    }

    /// Checks every structural invariant; with a grid, also that region
    /// edges join 8-neighbours.
    pub fn validate(&self, grid: Option<&GridSpec>) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("graph invariant violated: {msg}")));
        let n = self.n_regions;
        let env = n..n + self.n_env;
        let soc = n + self.n_env..self.n_nodes();
        let mut seen = HashSet::new();
        for kind in [EdgeKind::Rnr, EdgeKind::Elr, EdgeKind::Slr] {
            for e in self.edges(kind) {
                if e.src >= e.dst {
                    return bad(format!("{kind} edge {}-{} not canonical", e.src, e.dst));
                }
                if !e.weight.is_finite() || e.weight <= 0.0 {
                    return bad(format!("{kind} edge {}-{} has weight {}", e.src, e.dst, e.weight));
                }
                let ok = match kind {
                    EdgeKind::Rnr => e.dst < n && e.weight == 1.0,
                    EdgeKind::Elr => e.src < n && env.contains(&e.dst) && e.weight >= self.theta_env,
                    EdgeKind::Slr => e.src < n && soc.contains(&e.dst) && e.weight >= self.theta_soc,
                };
                if !ok {
                    return bad(format!("{kind} edge {}-{} w={} out of place", e.src, e.dst, e.weight));
                }
                if !seen.insert((e.src, e.dst)) {
                    return bad(format!("duplicate edge {}-{}", e.src, e.dst));
                }
                if let (EdgeKind::Rnr, Some(g)) = (kind, grid) {
                    if g.region(e.src).chebyshev(g.region(e.dst)) != 1 {
                        return bad(format!("RNR edge {}-{} joins non-adjacent cells", e.src, e.dst));
                    }
                }
            }
        }
        Ok(())
    }

    /// Undirected adjacency lists over all node ids, in edge-list order.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_nodes()];
        for e in self.edges_rnr.iter().chain(&self.edges_elr).chain(&self.edges_slr) {
            adj[e.src].push(e.dst);
            adj[e.dst].push(e.src);
        }
        adj
    }

    pub fn degree(&self, node: usize) -> usize {
        self.edges_rnr
            .iter()
            .chain(&self.edges_elr)
            .chain(&self.edges_slr)
            .filter(|e| e.src == node || e.dst == node)
            .count()
    }

    /// Hop distances from `start` to every node (`usize::MAX` if unreachable).
    pub fn bfs(&self, start: usize) -> Vec<usize> {
        let adj = self.adjacency();
        let mut dist = vec![usize::MAX; self.n_nodes()];
        dist[start] = 0;
        let mut q = VecDeque::from([start]);
        while let Some(u) = q.pop_front() {
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    q.push_back(v);
                }
            }
        }
        dist
    }

    /// Same graph with region `i` renamed to `perm[i]`; edge order is kept.
    pub fn relabel_regions(&self, perm: &[usize]) -> HeteroGraph {
        let map = |v: usize| if v < self.n_regions { perm[v] } else { v };
        let relabel = |edges: &[Edge]| {
            edges
                .iter()
                .map(|e| Edge::new(map(e.src), map(e.dst), e.weight))
                .collect()
        };
        HeteroGraph {
            edges_rnr: relabel(&self.edges_rnr),
            edges_elr: relabel(&self.edges_elr),
            edges_slr: relabel(&self.edges_slr),
            ..self.clone()
        }
    }
}

pub fn save_graph(path: impl AsRef<Path>, g: &HeteroGraph, provenance: &[String]) -> Result<()> {
    let mut out = geodata::comment_block(provenance);
    let _ = writeln!(
        out,
        "HETGRAPH {} {} {} {} {}",
        g.n_regions,
        g.n_env,
        g.n_soc,
        geodata::fmt_f64(g.theta_env),
        geodata::fmt_f64(g.theta_soc)
    );
    for kind in [EdgeKind::Rnr, EdgeKind::Elr, EdgeKind::Slr] {
        for e in g.edges(kind) {
            let _ = writeln!(out, "{kind} {} {} {}", e.src, e.dst, geodata::fmt_f64(e.weight));
        }
    }
    geodata::write(path.as_ref(), &out)
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<HeteroGraph> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let text = geodata::read(path)?;
    let mut lines = geodata::content_lines(&text);
    let (hl, header) = lines.next().ok_or_else(|| Error::parse(&name, 0, "missing HETGRAPH header"))?;
    let f: Vec<&str> = header.split_whitespace().collect();
    if f.len() != 6 || f[0] != "HETGRAPH" {
        return Err(Error::parse(&name, hl, "expected 'HETGRAPH <n_regions> <n_env> <n_soc> <θ_env> <θ_soc>'"));
    }
    let perr = |l: usize, s: &str| Error::parse(&name, l, format!("bad field {s:?}"));
    let int = |s: &str| s.parse::<usize>().map_err(|_| perr(hl, s));
    let float = |s: &str| s.parse::<f64>().map_err(|_| perr(hl, s));
    let mut g = HeteroGraph {
        n_regions: int(f[1])?,
        n_env: int(f[2])?,
        n_soc: int(f[3])?,
        edges_rnr: Vec::new(),
        edges_elr: Vec::new(),
        edges_slr: Vec::new(),
        theta_env: float(f[4])?,
        theta_soc: float(f[5])?,
    };
    for (l, line) in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(Error::parse(&name, l, "expected 'REL src dst weight'"));
        }
        let kind: EdgeKind = f[0].parse().map_err(|e: String| Error::parse(&name, l, e))?;
        let src = f[1].parse::<usize>().map_err(|_| perr(l, f[1]))?;
        let dst = f[2].parse::<usize>().map_err(|_| perr(l, f[2]))?;
        let w = f[3].parse::<f64>().map_err(|_| perr(l, f[3]))?;
        let e = Edge::new(src, dst, w);
        match kind {
            EdgeKind::Rnr => g.edges_rnr.push(e),
            EdgeKind::Elr => g.edges_elr.push(e),
            EdgeKind::Slr => g.edges_slr.push(e),
        }
    }
    g.validate(None)?;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodata::{LandCoverGrid, RegionId};

    fn grid(c: usize, r: usize) -> GridSpec {
        GridSpec::new(0.0, 0.0, c, r, 1.0).unwrap()
    }

    fn feat(i: usize, env: Vec<f64>, soc: Vec<f64>, count: usize) -> RegionFeatures {
        RegionFeatures {
            region: RegionId::new(i, 0),
            e_pos: [i as f64, 0.0],
            e_env: env,
            e_soc: soc,
            poi_count: count,
        }
    }

    #[test]
    fn rnr_small_grids() {
        assert!(build_rnr(&grid(1, 1)).is_empty());
        assert_eq!(build_rnr(&grid(2, 2)).len(), 6);
    }

    #[test]
    fn rnr_five_by_five_matches_pair_scan() {
        let g = grid(5, 5);
        let edges = build_rnr(&g);
        let mut brute = 0;
        for a in 0..25 {
            for b in a + 1..25 {
                if g.region(a).chebyshev(g.region(b)) == 1 {
                    brute += 1;
                }
            }
        }
        assert_eq!(brute, 72);
        assert_eq!(edges.len(), brute);
        assert_eq!(rnr_edge_count(5, 5), 72);
    }

    #[test]
    fn elr_threshold_extremes() {
        let fs = vec![feat(0, vec![0.25, 0.25, 0.5], vec![], 0)];
        assert_eq!(build_elr(&fs, 0.0).unwrap().len(), 3);
        assert!(build_elr(&fs, 1.01).unwrap().is_empty());
        assert!(build_elr(&fs, -0.1).is_err());
    }

    #[test]
    fn slr_rules() {
        let empty = vec![feat(0, vec![1.0], vec![0.0, 0.0], 0)];
        assert!(build_slr(&empty, 1, 1e-9).unwrap().is_empty());

        let single = vec![feat(0, vec![1.0], vec![0.0, 2f64.ln()], 1)];
        assert!(build_slr(&single, 1, 0.9).unwrap().is_empty());
        let e = build_slr(&single, 1, 0.6).unwrap();
        assert_eq!(e, vec![Edge::new(0, 3, 2f64.ln())]);
    }

    #[test]
    fn max_thresholds_leave_only_adjacency() {
        let g = grid(2, 2);
        let lc = LandCoverGrid::new(g, 1, 11, vec![0, 1, 2, 3]).unwrap();
        let t = crate::features::featurize_all(&g, &lc, &[], 3).unwrap();
        let hg = build_graph(&g, &t, f64::INFINITY, f64::INFINITY).unwrap();
        assert_eq!(hg.edges_rnr.len(), 6);
        assert_eq!(hg.n_edges(), 6);
        hg.validate(Some(&g)).unwrap();
    }

    #[test]
    fn graph_file_round_trip() {
        let g = grid(3, 2);
        let lc = LandCoverGrid::new(g, 2, 11, (0..24).map(|i| (i % 3) as u8).collect()).unwrap();
        let t = crate::features::featurize_all(&g, &lc, &[], 2).unwrap();
        let hg = build_graph(&g, &t, 0.2, 0.3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.txt");
        save_graph(&p, &hg, &["seed=1".into()]).unwrap();
        assert_eq!(load_graph(&p).unwrap(), hg);
    }
}
