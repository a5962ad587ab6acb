use crate::hetgraph::{Edge, HeteroGraph};
use crate::tensor::Matrix;

/// The five directed message channels of the region graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    RegionNearRegion,
    EnvToRegion,
    RegionToEnv,
    SocToRegion,
    RegionToSoc,
}

impl Relation {
    pub const ALL: [Relation; 5] = [
        Relation::RegionNearRegion,
        Relation::EnvToRegion,
        Relation::RegionToEnv,
        Relation::SocToRegion,
        Relation::RegionToSoc,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Relation::RegionNearRegion => "rnr",
            Relation::EnvToRegion => "env_to_region",
            Relation::RegionToEnv => "region_to_env",
            Relation::SocToRegion => "soc_to_region",
            Relation::RegionToSoc => "region_to_soc",
        }
    }
}

/// Edge-weighted neighbour mean in compressed row form.
///
/// Row `t` lists `(source, w / Σw)` in the order the edges were supplied,
/// so relabelling nodes without reordering edges reproduces every sum
/// bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborMean {
    n_targets: usize,
    n_sources: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl NeighborMean {
    pub fn from_triples(n_targets: usize, n_sources: usize, triples: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n_targets + 1];
        for &(t, _, _) in triples {
            counts[t + 1] += 1;
        }
        for i in 0..n_targets {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let mut fill = counts;
        let mut cols = vec![0; triples.len()];
        let mut vals = vec![0.0; triples.len()];
        for &(t, s, w) in triples {
            let at = fill[t];
            cols[at] = s;
            vals[at] = w;
            fill[t] += 1;
        }
        for t in 0..n_targets {
            let row = row_ptr[t]..row_ptr[t + 1];
            let total: f64 = vals[row.clone()].iter().sum();
            if total > 0.0 {
                for v in &mut vals[row] {
                    *v /= total;
                }
            }
        }
        Self {
            n_targets,
            n_sources,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn n_targets(&self) -> usize {
        self.n_targets
    }

    pub fn n_sources(&self) -> usize {
        self.n_sources
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Normalised `(source, weight)` pairs feeding `target`.
    pub fn neighbors(&self, target: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[target]..self.row_ptr[target + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    /// `out[t] = Σ_s w_ts · h[s]`; targets without neighbours get zeros.
    pub fn apply(&self, h: &Matrix) -> Matrix {
        debug_assert_eq!(h.rows(), self.n_sources);
        let d = h.cols();
        let mut out = Matrix::zeros(self.n_targets, d);
        for t in 0..self.n_targets {
            let (lo, hi) = (self.row_ptr[t], self.row_ptr[t + 1]);
            if lo == hi {
                continue;
            }
            let row = out.row_mut(t);
            for e in lo..hi {
                let w = self.vals[e];
                for (o, x) in row.iter_mut().zip(h.row(self.cols[e])) {
                    *o += w * x;
                }
            }
        }
        out
    }

    /// Adjoint of [`apply`](Self::apply), accumulated into `out`.
    pub fn apply_transpose_into(&self, grad: &Matrix, out: &mut Matrix) {
        debug_assert_eq!(grad.rows(), self.n_targets);
        debug_assert_eq!(out.rows(), self.n_sources);
        for t in 0..self.n_targets {
            let g = grad.row(t);
            for e in self.row_ptr[t]..self.row_ptr[t + 1] {
                let w = self.vals[e];
                for (o, x) in out.row_mut(self.cols[e]).iter_mut().zip(g) {
                    *o += w * x;
                }
            }
        }
    }
}

/// One [`NeighborMean`] per relation, built from a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationalAdjacency {
    pub n_regions: usize,
    pub n_env: usize,
    pub n_soc: usize,
    ops: [NeighborMean; 5],
}

impl RelationalAdjacency {
    pub fn new(g: &HeteroGraph) -> Self {
        let n = g.n_regions;
        let mut rnr = Vec::with_capacity(2 * g.edges_rnr.len());
        for e in &g.edges_rnr {
            rnr.push((e.src, e.dst, e.weight));
            rnr.push((e.dst, e.src, e.weight));
        }
        // entity edges are stored (region, entity)
        let split = |edges: &[Edge], offset: usize| -> (Vec<_>, Vec<_>) {
            let to_region = edges.iter().map(|e| (e.src, e.dst - offset, e.weight)).collect();
            let from_region = edges.iter().map(|e| (e.dst - offset, e.src, e.weight)).collect();
            (to_region, from_region)
        };
        let (env_to_region, region_to_env) = split(&g.edges_elr, n);
        let (soc_to_region, region_to_soc) = split(&g.edges_slr, n + g.n_env);
        Self {
            n_regions: n,
            n_env: g.n_env,
            n_soc: g.n_soc,
            ops: [
                NeighborMean::from_triples(n, n, &rnr),
                NeighborMean::from_triples(n, g.n_env, &env_to_region),
                NeighborMean::from_triples(g.n_env, n, &region_to_env),
                NeighborMean::from_triples(n, g.n_soc, &soc_to_region),
                NeighborMean::from_triples(g.n_soc, n, &region_to_soc),
            ],
        }
    }

    pub fn get(&self, rel: Relation) -> &NeighborMean {
        &self.ops[rel.index()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_mean_and_adjoint() {
        let op = NeighborMean::from_triples(2, 3, &[(0, 1, 1.0), (0, 2, 3.0), (1, 0, 2.0)]);
        let h = Matrix::from_rows(&[vec![1.0, 0.0], vec![2.0, 4.0], vec![6.0, 8.0]]).unwrap();
        let out = op.apply(&h);
        assert_eq!(out.row(0), &[0.25 * 2.0 + 0.75 * 6.0, 0.25 * 4.0 + 0.75 * 8.0]);
        assert_eq!(out.row(1), &[1.0, 0.0]);

        // <apply(h), g> = <h, applyᵀ(g)>
        let g = Matrix::from_rows(&[vec![0.5, -1.0], vec![2.0, 3.0]]).unwrap();
        let mut back = Matrix::zeros(3, 2);
        op.apply_transpose_into(&g, &mut back);
        let lhs = out.hadamard(&g).unwrap().sum();
        let rhs = h.hadamard(&back).unwrap().sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn isolated_targets_aggregate_to_zero() {
        let op = NeighborMean::from_triples(3, 1, &[(1, 0, 0.4)]);
        let h = Matrix::filled(1, 2, 5.0);
        let out = op.apply(&h);
        assert_eq!(out.row(0), &[0.0, 0.0]);
        assert_eq!(out.row(1), &[5.0, 5.0]);
    }
}
