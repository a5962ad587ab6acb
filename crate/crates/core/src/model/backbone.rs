use rand::Rng;

use super::graph_ops::{Relation, RelationalAdjacency};
use crate::error::{Error, Result};
use crate::tensor::{self, Matrix, Parameters};

/// One relation-typed message-passing layer.
///
/// For a node `v` of any type:
/// `z_v = W_self·h_v + b + Σ_rel W_rel · mean_w{h_u : u →rel v}`
/// followed by ReLU on every layer but the last.
#[derive(Debug, Clone, PartialEq)]
pub struct HgnnLayer {
    pub w_self: Matrix,
    pub bias: Matrix,
    pub w_rel: [Matrix; 5],
}

impl HgnnLayer {
    fn init<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        let w_self = Matrix::glorot(d, d, rng);
        let w_rel = std::array::from_fn(|_| Matrix::glorot(d, d, rng));
        Self {
            w_self,
            bias: Matrix::zeros(1, d),
            w_rel,
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            w_self: self.w_self.zeros_like(),
            bias: self.bias.zeros_like(),
            w_rel: std::array::from_fn(|i| self.w_rel[i].zeros_like()),
        }
    }

    fn rel(&self, r: Relation) -> &Matrix {
        &self.w_rel[r.index()]
    }
}

/// Graph encoder: input projection for regions, learnable entity
/// embeddings and a stack of [`HgnnLayer`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct Backbone {
    pub input_w: Matrix,
    pub input_b: Matrix,
    pub env_embed: Matrix,
    pub soc_embed: Matrix,
    pub layers: Vec<HgnnLayer>,
    pub use_self_loop: bool,
}

impl Parameters for Backbone {
    fn params(&self) -> Vec<&Matrix> {
        let mut v = vec![&self.input_w, &self.input_b, &self.env_embed, &self.soc_embed];
        for l in &self.layers {
            v.push(&l.w_self);
            v.push(&l.bias);
            v.extend(l.w_rel.iter());
        }
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v = vec![
            &mut self.input_w,
            &mut self.input_b,
            &mut self.env_embed,
            &mut self.soc_embed,
        ];
        for l in &mut self.layers {
            v.push(&mut l.w_self);
            v.push(&mut l.bias);
            v.extend(l.w_rel.iter_mut());
        }
        v
    }
}

/// Node states of one layer, split by node type.
#[derive(Debug, Clone)]
struct NodeStates {
    region: Matrix,
    env: Matrix,
    soc: Matrix,
}

#[derive(Debug, Clone)]
struct LayerCache {
    input: NodeStates,
    agg_rnr: Matrix,
    agg_env_to_region: Matrix,
    agg_soc_to_region: Matrix,
    agg_region_to_env: Matrix,
    agg_region_to_soc: Matrix,
    pre: NodeStates,
}

/// Everything recorded by a forward pass that the backward pass needs.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    x: Matrix,
    layers: Vec<LayerCache>,
    /// Final region embeddings (`n_regions × d`).
    pub output: Matrix,
}

impl Backbone {
    pub fn init<R: Rng + ?Sized>(
        input_dim: usize,
        n_env: usize,
        n_soc: usize,
        hidden: usize,
        n_layers: usize,
        use_self_loop: bool,
        rng: &mut R,
    ) -> Self {
        let input_w = Matrix::glorot(input_dim, hidden, rng);
        let env_embed = Matrix::glorot(n_env, hidden, rng);
        let soc_embed = Matrix::glorot(n_soc, hidden, rng);
        let layers = (0..n_layers).map(|_| HgnnLayer::init(hidden, rng)).collect();
        Self {
            input_w,
            input_b: Matrix::zeros(1, hidden),
            env_embed,
            soc_embed,
            layers,
            use_self_loop,
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.input_w.cols()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            input_w: self.input_w.zeros_like(),
            input_b: self.input_b.zeros_like(),
            env_embed: self.env_embed.zeros_like(),
            soc_embed: self.soc_embed.zeros_like(),
            layers: self.layers.iter().map(HgnnLayer::zeros_like).collect(),
            use_self_loop: self.use_self_loop,
        }
    }

    fn check_shapes(&self, x: &Matrix, adj: &RelationalAdjacency) -> Result<()> {
        if x.cols() != self.input_w.rows() {
            return Err(Error::Shape(format!(
                "input has {} features, model expects {}",
                x.cols(),
                self.input_w.rows()
            )));
        }
        if x.rows() != adj.n_regions || adj.n_env != self.env_embed.rows() || adj.n_soc != self.soc_embed.rows() {
            return Err(Error::Shape(format!(
                "graph ({} regions, {} env, {} soc) does not match inputs ({} rows) / model ({} env, {} soc)",
                adj.n_regions,
                adj.n_env,
                adj.n_soc,
                x.rows(),
                self.env_embed.rows(),
                self.soc_embed.rows()
            )));
        }
        Ok(())
    }

    /// Region embeddings after all layers.
    pub fn forward(&self, x: &Matrix, adj: &RelationalAdjacency) -> Result<ForwardCache> {
        self.check_shapes(x, adj)?;
        let mut h = NodeStates {
            region: x.matmul(&self.input_w)?.add_row(&self.input_b)?,
            env: self.env_embed.clone(),
            soc: self.soc_embed.clone(),
        };
        let mut caches = Vec::with_capacity(self.layers.len());
        for (li, layer) in self.layers.iter().enumerate() {
            let last = li + 1 == self.layers.len();
            let agg_rnr = adj.get(Relation::RegionNearRegion).apply(&h.region);
            let agg_env_to_region = adj.get(Relation::EnvToRegion).apply(&h.env);
            let agg_soc_to_region = adj.get(Relation::SocToRegion).apply(&h.soc);
            let agg_region_to_env = adj.get(Relation::RegionToEnv).apply(&h.region);
            let agg_region_to_soc = adj.get(Relation::RegionToSoc).apply(&h.region);

            let mut z_region = agg_rnr.matmul(layer.rel(Relation::RegionNearRegion))?;
            z_region.add_assign(&agg_env_to_region.matmul(layer.rel(Relation::EnvToRegion))?)?;
            z_region.add_assign(&agg_soc_to_region.matmul(layer.rel(Relation::SocToRegion))?)?;
            let mut z_env = agg_region_to_env.matmul(layer.rel(Relation::RegionToEnv))?;
            let mut z_soc = agg_region_to_soc.matmul(layer.rel(Relation::RegionToSoc))?;
            if self.use_self_loop {
                z_region.add_assign(&h.region.matmul(&layer.w_self)?)?;
                z_env.add_assign(&h.env.matmul(&layer.w_self)?)?;
                z_soc.add_assign(&h.soc.matmul(&layer.w_self)?)?;
            }
            let pre = NodeStates {
                region: z_region.add_row(&layer.bias)?,
                env: z_env.add_row(&layer.bias)?,
                soc: z_soc.add_row(&layer.bias)?,
            };
            pre.region.ensure_finite("hgnn activation")?;
            let next = if last {
                pre.clone()
            } else {
                NodeStates {
                    region: pre.region.relu(),
                    env: pre.env.relu(),
                    soc: pre.soc.relu(),
                }
            };
            caches.push(LayerCache {
                input: std::mem::replace(&mut h, next),
                agg_rnr,
                agg_env_to_region,
                agg_soc_to_region,
                agg_region_to_env,
                agg_region_to_soc,
                pre,
            });
        }
        Ok(ForwardCache {
            x: x.clone(),
            layers: caches,
            output: h.region,
        })
    }

    /// Parameter gradients given `d loss / d output`.
    pub fn backward(&self, cache: &ForwardCache, adj: &RelationalAdjacency, d_out: &Matrix) -> Result<Backbone> {
        let mut grads = self.zeros_like();
        let mut dh = NodeStates {
            region: d_out.clone(),
            env: self.env_embed.zeros_like(),
            soc: self.soc_embed.zeros_like(),
        };
        let n_layers = self.layers.len();
        for li in (0..n_layers).rev() {
            let layer = &self.layers[li];
            let c = &cache.layers[li];
            let g = &mut grads.layers[li];
            let dz = if li + 1 == n_layers {
                dh
            } else {
                NodeStates {
                    region: tensor::relu_backward(&c.pre.region, &dh.region)?,
                    env: tensor::relu_backward(&c.pre.env, &dh.env)?,
                    soc: tensor::relu_backward(&c.pre.soc, &dh.soc)?,
                }
            };

            g.bias = dz.region.col_sums();
            g.bias.add_assign(&dz.env.col_sums())?;
            g.bias.add_assign(&dz.soc.col_sums())?;

            let mut d_region = Matrix::zeros(c.input.region.rows(), c.input.region.cols());
            let mut d_env = Matrix::zeros(c.input.env.rows(), c.input.env.cols());
            let mut d_soc = Matrix::zeros(c.input.soc.rows(), c.input.soc.cols());

            if self.use_self_loop {
                let mut gs = c.input.region.matmul_tn(&dz.region)?;
                gs.add_assign(&c.input.env.matmul_tn(&dz.env)?)?;
                gs.add_assign(&c.input.soc.matmul_tn(&dz.soc)?)?;
                g.w_self = gs;
                d_region.add_assign(&dz.region.matmul_nt(&layer.w_self)?)?;
                d_env.add_assign(&dz.env.matmul_nt(&layer.w_self)?)?;
                d_soc.add_assign(&dz.soc.matmul_nt(&layer.w_self)?)?;
            }

            // region targets
            for (rel, agg, src) in [
                (Relation::RegionNearRegion, &c.agg_rnr, 0),
                (Relation::EnvToRegion, &c.agg_env_to_region, 1),
                (Relation::SocToRegion, &c.agg_soc_to_region, 2),
            ] {
                g.w_rel[rel.index()] = agg.matmul_tn(&dz.region)?;
                let d_agg = dz.region.matmul_nt(layer.rel(rel))?;
                let dst = match src {
                    0 => &mut d_region,
                    1 => &mut d_env,
                    _ => &mut d_soc,
                };
                adj.get(rel).apply_transpose_into(&d_agg, dst);
            }
            // entity targets
            for (rel, agg, dz_t) in [
                (Relation::RegionToEnv, &c.agg_region_to_env, &dz.env),
                (Relation::RegionToSoc, &c.agg_region_to_soc, &dz.soc),
            ] {
                g.w_rel[rel.index()] = agg.matmul_tn(dz_t)?;
                let d_agg = dz_t.matmul_nt(layer.rel(rel))?;
                adj.get(rel).apply_transpose_into(&d_agg, &mut d_region);
            }

            dh = NodeStates {
                region: d_region,
                env: d_env,
                soc: d_soc,
            };
        }
        let (_, dw, db) = tensor::linear_backward(&cache.x, &self.input_w, &dh.region)?;
        grads.input_w = dw;
        grads.input_b = db;
        grads.env_embed = dh.env;
        grads.soc_embed = dh.soc;
        for p in grads.params() {
            p.ensure_finite("backbone gradient")?;
        }
        Ok(grads)
    }
}
