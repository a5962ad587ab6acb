use rand::Rng;

use crate::error::Result;
use crate::tensor::{self, Matrix, Parameters};

/// Three linear layers `d → d → d → 1` with ReLU in between.
#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    pub w1: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
    pub w3: Matrix,
    pub b3: Matrix,
}

#[derive(Debug, Clone)]
pub struct HeadCache {
    x: Matrix,
    z1: Matrix,
    a1: Matrix,
    z2: Matrix,
    a2: Matrix,
    /// `n × 1` predictions.
    pub output: Matrix,
}

impl Parameters for Head {
    fn params(&self) -> Vec<&Matrix> {
        vec![&self.w1, &self.b1, &self.w2, &self.b2, &self.w3, &self.b3]
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        vec![
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.w3,
            &mut self.b3,
        ]
    }
}

impl Head {
    pub fn init<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        Self {
            w1: Matrix::glorot(d, d, rng),
            b1: Matrix::zeros(1, d),
            w2: Matrix::glorot(d, d, rng),
            b2: Matrix::zeros(1, d),
            w3: Matrix::glorot(d, 1, rng),
            b3: Matrix::zeros(1, 1),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            w1: self.w1.zeros_like(),
            b1: self.b1.zeros_like(),
            w2: self.w2.zeros_like(),
            b2: self.b2.zeros_like(),
            w3: self.w3.zeros_like(),
            b3: self.b3.zeros_like(),
        }
    }

    pub fn forward(&self, x: &Matrix) -> Result<HeadCache> {
        let z1 = x.matmul(&self.w1)?.add_row(&self.b1)?;
        let a1 = z1.relu();
        let z2 = a1.matmul(&self.w2)?.add_row(&self.b2)?;
        let a2 = z2.relu();
        let output = a2.matmul(&self.w3)?.add_row(&self.b3)?;
        output.ensure_finite("head output")?;
        Ok(HeadCache {
            x: x.clone(),
            z1,
            a1,
            z2,
            a2,
            output,
        })
    }

    /// Returns parameter gradients and `d loss / d input`.
    pub fn backward(&self, cache: &HeadCache, d_out: &Matrix) -> Result<(Head, Matrix)> {
        let (da2, dw3, db3) = tensor::linear_backward(&cache.a2, &self.w3, d_out)?;
        let dz2 = tensor::relu_backward(&cache.z2, &da2)?;
        let (da1, dw2, db2) = tensor::linear_backward(&cache.a1, &self.w2, &dz2)?;
        let dz1 = tensor::relu_backward(&cache.z1, &da1)?;
        let (dx, dw1, db1) = tensor::linear_backward(&cache.x, &self.w1, &dz1)?;
        let g = Head {
            w1: dw1,
            b1: db1,
            w2: dw2,
            b2: db2,
            w3: dw3,
            b3: db3,
        };
        for p in g.params() {
            p.ensure_finite("head gradient")?;
        }
        Ok((g, dx))
    }
}
