//! Dense row-major `f64` matrices, the handful of kernels the model needs,
//! their vector-Jacobian products, the Adam optimizer and a small LU solver.
//!
//! Gradients are written out per kernel rather than recorded on a tape; the
//! model composes them in a fixed order.

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    /// Uniform in `[-a, a]` with `a = sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let a = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.random_range(-a..=a)).collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.rows, self.cols)
    }

    fn same_shape(&self, other: &Matrix, op: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "{op}: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(what.to_string()))
        }
    }

    /// `self · other`
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "matmul: {:?} · {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let (m, k, n) = (self.rows, self.cols, other.cols);
        Ok(gemm(m, k, n, &self.data, (k, 1), &other.data, (n, 1)))
    }

    /// `selfᵀ · other`
    pub fn matmul_tn(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::Shape(format!(
                "matmul_tn: {:?}ᵀ · {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let (m, k, n) = (self.cols, self.rows, other.cols);
        Ok(gemm(m, k, n, &self.data, (1, self.cols), &other.data, (n, 1)))
    }

    /// `self · otherᵀ`
    pub fn matmul_nt(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::Shape(format!(
                "matmul_nt: {:?} · {:?}ᵀ",
                self.shape(),
                other.shape()
            )));
        }
        let (m, k, n) = (self.rows, self.cols, other.rows);
        Ok(gemm(m, k, n, &self.data, (k, 1), &other.data, (1, other.cols)))
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.same_shape(other, "add")?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Matrix { data, ..*self })
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.same_shape(other, "sub")?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Matrix { data, ..*self })
    }

    pub fn add_assign(&mut self, other: &Matrix) -> Result<()> {
        self.same_shape(other, "add_assign")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            data: self.data.iter().map(|v| v * s).collect(),
            ..*self
        }
    }

    pub fn hadamard(&self, other: &Matrix) -> Result<Matrix> {
        self.same_shape(other, "hadamard")?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect();
        Ok(Matrix { data, ..*self })
    }

    /// Adds a `1 × cols` row vector to every row.
    pub fn add_row(&self, bias: &Matrix) -> Result<Matrix> {
        if bias.rows != 1 || bias.cols != self.cols {
            return Err(Error::Shape(format!(
                "add_row: {:?} + {:?}",
                self.shape(),
                bias.shape()
            )));
        }
        let mut out = self.clone();
        for row in out.data.chunks_mut(self.cols.max(1)) {
            for (a, b) in row.iter_mut().zip(&bias.data) {
                *a += b;
            }
        }
        Ok(out)
    }

    /// `1 × cols` column sums.
    pub fn col_sums(&self) -> Matrix {
        let mut s = Matrix::zeros(1, self.cols);
        for row in self.data.chunks(self.cols.max(1)) {
            for (a, b) in s.data.iter_mut().zip(row) {
                *a += b;
            }
        }
        s
    }

    pub fn relu(&self) -> Matrix {
        Matrix {
            data: self.data.iter().map(|&v| v.max(0.0)).collect(),
            ..*self
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn sum_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(indices.len(), self.cols);
        for (o, &i) in indices.iter().enumerate() {
            out.row_mut(o).copy_from_slice(self.row(i));
        }
        out
    }

    /// `self[indices[o]] += src[o]` for every row `o` of `src`.
    pub fn scatter_add_rows(&mut self, indices: &[usize], src: &Matrix) {
        for (o, &i) in indices.iter().enumerate() {
            let cols = self.cols;
            let dst = &mut self.data[i * cols..(i + 1) * cols];
            for (a, b) in dst.iter_mut().zip(src.row(o)) {
                *a += b;
            }
        }
    }

    /// Row-wise softmax.
    pub fn row_softmax(&self) -> Matrix {
        let mut out = self.clone();
        for row in out.data.chunks_mut(self.cols.max(1)) {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for v in row.iter_mut() {
                *v = (*v - m).exp();
                s += *v;
            }
            for v in row.iter_mut() {
                *v /= s;
            }
        }
        out
    }

    /// Rows scaled to unit Euclidean norm, with the norms. Zero rows stay zero.
    pub fn l2_normalize_rows(&self) -> (Matrix, Vec<f64>) {
        let mut out = self.clone();
        let mut norms = Vec::with_capacity(self.rows);
        for row in out.data.chunks_mut(self.cols.max(1)) {
            let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 0.0 {
                for v in row.iter_mut() {
                    *v /= n;
                }
            }
            norms.push(n);
        }
        (out, norms)
    }

    /// Order-sensitive hash of the exact bit patterns.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in self.shape_words().into_iter().chain(self.data.iter().map(|v| v.to_bits())) {
            h ^= v;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h
    }

    fn shape_words(&self) -> [u64; 2] {
        [self.rows as u64, self.cols as u64]
    }
}

fn gemm(m: usize, k: usize, n: usize, a: &[f64], sa: (usize, usize), b: &[f64], sb: (usize, usize)) -> Matrix {
    let mut c = Matrix::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    // SAFETY: the strides describe in-bounds views of `a` (m×k) and `b`
    // (k×n) as checked by the callers, and `c` is a fresh m×n buffer.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            sa.0 as isize,
            sa.1 as isize,
            b.as_ptr(),
            sb.0 as isize,
            sb.1 as isize,
            0.0,
            c.data.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    c
}

/// Overflow-safe `ln Σ exp(x_i)`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Gradient through `relu`: passes `grad` where the pre-activation was positive.
pub fn relu_backward(pre: &Matrix, grad: &Matrix) -> Result<Matrix> {
    pre.same_shape(grad, "relu_backward")?;
    let data = pre
        .data
        .iter()
        .zip(&grad.data)
        .map(|(&p, &g)| if p > 0.0 { g } else { 0.0 })
        .collect();
    Ok(Matrix { data, ..*grad })
}

/// Gradients of `y = x·w (+ b)` given `dy`: returns `(dx, dw, db)`.
pub fn linear_backward(x: &Matrix, w: &Matrix, dy: &Matrix) -> Result<(Matrix, Matrix, Matrix)> {
    let dx = dy.matmul_nt(w)?;
    let dw = x.matmul_tn(dy)?;
    Ok((dx, dw, dy.col_sums()))
}

/// Gradient through row normalisation `u = x / ‖x‖`.
pub fn l2_normalize_backward(unit: &Matrix, norms: &[f64], grad: &Matrix) -> Result<Matrix> {
    unit.same_shape(grad, "l2_normalize_backward")?;
    let mut out = Matrix::zeros(grad.rows, grad.cols);
    for i in 0..grad.rows {
        let n = norms[i];
        if n == 0.0 {
            continue;
        }
        let u = unit.row(i);
        let g = grad.row(i);
        let dot: f64 = u.iter().zip(g).map(|(a, b)| a * b).sum();
        for (o, (ui, gi)) in out.row_mut(i).iter_mut().zip(u.iter().zip(g)) {
            *o = (gi - ui * dot) / n;
        }
    }
    Ok(out)
}

/// Learnable parameter containers expose their matrices in a fixed order.
pub trait Parameters {
    fn params(&self) -> Vec<&Matrix>;
    fn params_mut(&mut self) -> Vec<&mut Matrix>;

    fn num_parameters(&self) -> usize {
        self.params().iter().map(|m| m.len()).sum()
    }

    fn checksum(&self) -> u64 {
        self.params()
            .iter()
            .fold(0u64, |h, m| h.rotate_left(7) ^ m.checksum())
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Matrix,
    pub v: Matrix,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(rows: usize, cols: usize, lr: f64) -> Self {
        Self {
            m: Matrix::zeros(rows, cols),
            v: Matrix::zeros(rows, cols),
            step: 0,
            lr,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
        }
    }

    pub fn for_param(param: &Matrix, lr: f64) -> Self {
        Self::new(param.rows, param.cols, lr)
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(param: &mut Matrix, grad: &Matrix, state: &mut AdamState) -> Result<()> {
    param.same_shape(grad, "adam_step")?;
    param.same_shape(&state.m, "adam_step moments")?;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for i in 0..param.data.len() {
        let g = grad.data[i];
        let m = state.beta1 * state.m.data[i] + (1.0 - state.beta1) * g;
        let v = state.beta2 * state.v.data[i] + (1.0 - state.beta2) * g * g;
        state.m.data[i] = m;
        state.v.data[i] = v;
        let upd = state.lr * (m / c1) / ((v / c2).sqrt() + state.eps);
        if !upd.is_finite() {
            return Err(Error::NonFinite(format!("adam update at element {i}")));
        }
        param.data[i] -= upd;
    }
    Ok(())
}

/// Adam over an ordered parameter list.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub states: Vec<AdamState>,
}

impl Adam {
    pub fn new<P: Parameters + ?Sized>(params: &P, lr: f64) -> Self {
        Self {
            states: params.params().into_iter().map(|p| AdamState::for_param(p, lr)).collect(),
        }
    }

    pub fn step<P: Parameters + ?Sized>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let grads = grads.params();
        for ((p, g), s) in params.params_mut().into_iter().zip(grads).zip(&mut self.states) {
            adam_step(p, g, s)?;
        }
        Ok(())
    }
}

/// Solve `a · x = b` by LU decomposition with partial pivoting.
pub fn lu_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows;
    if a.cols != n || b.len() != n {
        return Err(Error::Shape(format!(
            "lu_solve: {:?} with rhs of {}",
            a.shape(),
            b.len()
        )));
    }
    let mut lu = a.data.clone();
    let mut x = b.to_vec();
    let scale = lu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tiny = scale * n as f64 * f64::EPSILON;
    for col in 0..n {
        let (piv, pval) = (col..n)
            .map(|r| (r, lu[r * n + col].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pval <= tiny {
            return Err(Error::NonFinite(format!("singular matrix at column {col}")));
        }
        if piv != col {
            for j in 0..n {
                lu.swap(col * n + j, piv * n + j);
            }
            x.swap(col, piv);
        }
        let d = lu[col * n + col];
        for r in col + 1..n {
            let f = lu[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            lu[r * n + col] = f;
            for j in col + 1..n {
                lu[r * n + j] -= f * lu[col * n + j];
            }
            x[r] -= f * x[col];
        }
    }
    for r in (0..n).rev() {
        let mut s = x[r];
        for j in r + 1..n {
            s -= lu[r * n + j] * x[j];
        }
        x[r] = s / lu[r * n + r];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("lu_solve produced non-finite solution".into()));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
        let mut c = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a.get(i, k) * b.get(k, j);
                }
                c.set(i, j, s);
            }
        }
        c
    }

    #[test]
    fn identity_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Matrix::glorot(5, 7, &mut rng);
        assert_eq!(Matrix::identity(5).matmul(&a).unwrap(), a);
    }

    #[test]
    fn transposed_products_agree_with_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = Matrix::glorot(9, 4, &mut rng);
        let b = Matrix::glorot(9, 6, &mut rng);
        let c = Matrix::glorot(3, 4, &mut rng);
        let tn = a.matmul_tn(&b).unwrap();
        let want = naive_matmul(&a.transpose(), &b);
        for (x, y) in tn.data().iter().zip(want.data()) {
            assert!((x - y).abs() < 1e-12);
        }
        let nt = a.matmul_nt(&c).unwrap();
        let want = naive_matmul(&a, &c.transpose());
        for (x, y) in nt.data().iter().zip(want.data()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(a.matmul(&c).is_err());
    }

    #[test]
    fn relu_values() {
        let m = Matrix::from_vec(1, 3, vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(m.relu().data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn log_sum_exp_is_overflow_safe() {
        let v = log_sum_exp(&[1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[-5.0]), -5.0);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let m = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 800.0, 800.0, -800.0]).unwrap();
        let s = m.row_softmax();
        for i in 0..2 {
            assert!((s.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!((s.get(1, 0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn quadratic_gradient() {
        // f(x) = x·xᵀ for a row vector x; df/dx = 2x
        let x = Matrix::from_vec(1, 3, vec![1.0, 2.0, 3.0]).unwrap();
        let xt = x.transpose();
        let dy = Matrix::filled(1, 1, 1.0);
        let (dx, dw, _) = linear_backward(&x, &xt, &dy).unwrap();
        let total = dx.add(&dw.transpose()).unwrap();
        assert_eq!(total.data(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn zero_input_bias_gradient_is_output_error() {
        let x = Matrix::zeros(4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = Matrix::glorot(3, 2, &mut rng);
        let dy = Matrix::from_vec(4, 2, vec![0.5, -1.0, 0.25, 2.0, 0.0, 1.0, -3.0, 0.5]).unwrap();
        let (_, dw, db) = linear_backward(&x, &w, &dy).unwrap();
        assert_eq!(db, dy.col_sums());
        assert!(dw.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn adam_zero_gradient_keeps_parameter() {
        let mut p = Matrix::from_vec(1, 2, vec![0.3, -0.7]).unwrap();
        let before = p.clone();
        let mut s = AdamState::for_param(&p, 2e-3);
        adam_step(&mut p, &Matrix::zeros(1, 2), &mut s).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = Matrix::from_vec(1, 3, vec![0.0, 1.0, 2.0]).unwrap();
        let g = Matrix::from_vec(1, 3, vec![0.5, -3.0, 1e-3]).unwrap();
        let mut s = AdamState::for_param(&p, 2e-3);
        adam_step(&mut p, &g, &mut s).unwrap();
        // m̂ = g, v̂ = g², so the step is lr·g/(|g|+ε)
        for (i, (&pv, &gv)) in p.data().iter().zip(g.data()).enumerate() {
            let want = i as f64 - 2e-3 * gv / (gv.abs() + 1e-8);
            assert!((pv - want).abs() < 1e-15, "{pv} vs {want}");
        }
    }

    #[test]
    fn adam_two_steps_match_reference() {
        // scalar Adam written out longhand
        let (lr, b1, b2, eps) = (0.01, 0.9, 0.999, 1e-8);
        let grads = [0.4, -1.2];
        let (mut x, mut m, mut v) = (1.5f64, 0.0f64, 0.0f64);
        for (t, g) in grads.iter().enumerate() {
            let t = t as i32 + 1;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            x -= lr * mh / (vh.sqrt() + eps);
        }
        let mut p = Matrix::filled(1, 1, 1.5);
        let mut s = AdamState::for_param(&p, lr);
        for g in grads {
            adam_step(&mut p, &Matrix::filled(1, 1, g), &mut s).unwrap();
        }
        assert_eq!(p.get(0, 0), x);
        assert_eq!(s.step, 2);
    }

    #[test]
    fn lu_solves_pivoted_system() {
        let a = Matrix::from_rows(&[vec![0.0, 2.0, 1.0], vec![1.0, 1.0, 0.0], vec![3.0, 0.0, 1.0]]).unwrap();
        let x = lu_solve(&a, &[5.0, 3.0, 6.0]).unwrap();
        let back = a.matmul(&Matrix::from_vec(3, 1, x).unwrap()).unwrap();
        for (v, w) in back.data().iter().zip([5.0, 3.0, 6.0]) {
            assert!((v - w).abs() < 1e-12);
        }
        let sing = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(lu_solve(&sing, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn normalize_backward_matches_differences() {
        let x = Matrix::from_vec(1, 3, vec![0.3, -1.1, 2.0]).unwrap();
        let g = Matrix::from_vec(1, 3, vec![1.0, 0.5, -0.25]).unwrap();
        let (u, n) = x.l2_normalize_rows();
        let dx = l2_normalize_backward(&u, &n, &g).unwrap();
        let h = 1e-6;
        for j in 0..3 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp.set(0, j, x.get(0, j) + h);
            xm.set(0, j, x.get(0, j) - h);
            let f = |m: &Matrix| m.l2_normalize_rows().0.hadamard(&g).unwrap().sum();
            let fd = (f(&xp) - f(&xm)) / (2.0 * h);
            assert!((fd - dx.get(0, j)).abs() < 1e-8);
        }
    }
}
