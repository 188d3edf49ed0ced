//! Dense kernels used by the model: matrix products, activations, softmax,
//! and a central finite-difference gradient used as a test oracle.
//!
//! All values are `f64`. Matrices are row-major. The batched products used
//! on the hot path go through `matrixmultiply`; everything else is plain
//! loops over slices.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("matrix entry {i}")));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Uniform Glorot initialization: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
    pub fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let limit = glorot_limit(cols, rows);
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// `W x`.
pub fn matvec(w: &Matrix, x: &[f64]) -> Result<Vec<f64>> {
    if w.cols != x.len() {
        return Err(Error::Shape(format!(
            "matvec: matrix is {}x{}, vector has length {}",
            w.rows,
            w.cols,
            x.len()
        )));
    }
    Ok((0..w.rows).map(|r| dot(w.row(r), x)).collect())
}

/// `Wᵀ g`, the input gradient of [`matvec`].
pub fn matvec_transposed(w: &Matrix, g: &[f64]) -> Result<Vec<f64>> {
    if w.rows != g.len() {
        return Err(Error::Shape(format!(
            "matvec_transposed: matrix is {}x{}, vector has length {}",
            w.rows,
            w.cols,
            g.len()
        )));
    }
    let mut out = vec![0.0; w.cols];
    for (r, &gr) in g.iter().enumerate() {
        axpy(gr, w.row(r), &mut out);
    }
    Ok(out)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha * x`.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[allow(clippy::too_many_arguments)]
fn dgemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(k == 0 || a.len() > (m - 1) * rsa + (k - 1) * csa);
    assert!(k == 0 || b.len() > (k - 1) * rsb + (n - 1) * csb);
    assert!(c.len() >= m * n);
    // SAFETY: the asserts above bound every index touched for the given strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Row-batched affine map: `X Wᵀ + 1 biasᵀ` for `X` of shape `k × w.cols()`.
pub fn affine_rows(x: &[f64], k: usize, w: &Matrix, bias: &[f64]) -> Result<Vec<f64>> {
    if x.len() != k * w.cols || bias.len() != w.rows {
        return Err(Error::Shape(format!(
            "affine_rows: input {} values for {k} rows, weight {}x{}, bias {}",
            x.len(),
            w.rows,
            w.cols,
            bias.len()
        )));
    }
    let mut out = Vec::with_capacity(k * w.rows);
    for _ in 0..k {
        out.extend_from_slice(bias);
    }
    dgemm(
        k,
        w.cols,
        w.rows,
        x,
        (w.cols, 1),
        &w.data,
        (1, w.cols),
        1.0,
        &mut out,
    );
    Ok(out)
}

/// `D W` for `D` of shape `k × w.rows()`: input gradient of [`affine_rows`].
pub fn backprop_rows(d: &[f64], k: usize, w: &Matrix) -> Vec<f64> {
    assert_eq!(d.len(), k * w.rows);
    let mut out = vec![0.0; k * w.cols];
    dgemm(
        k,
        w.rows,
        w.cols,
        d,
        (w.rows, 1),
        &w.data,
        (w.cols, 1),
        0.0,
        &mut out,
    );
    out
}

/// `G += Dᵀ X`: weight gradient of [`affine_rows`].
pub fn accumulate_outer_rows(d: &[f64], x: &[f64], k: usize, grad: &mut Matrix) {
    assert_eq!(d.len(), k * grad.rows);
    assert_eq!(x.len(), k * grad.cols);
    let (rows, cols) = (grad.rows, grad.cols);
    dgemm(
        rows,
        k,
        cols,
        d,
        (1, rows),
        x,
        (cols, 1),
        1.0,
        &mut grad.data,
    );
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn scalar(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    pub fn apply(self, v: &[f64]) -> Vec<f64> {
        v.iter().map(|&x| self.scalar(x)).collect()
    }

    pub fn apply_in_place(self, v: &mut [f64]) {
        for x in v {
            *x = self.scalar(*x);
        }
    }

    /// Derivative expressed through the activation's output `y = f(x)`.
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(Error::invalid(format!("unknown activation `{other}`"))),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        })
    }
}

pub fn activation(kind: &str, v: &[f64]) -> Result<Vec<f64>> {
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("activation input {i}")));
    }
    Ok(kind.parse::<Activation>()?.apply(v))
}

/// Logistic function, evaluated without overflow for large |x|.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn softmax(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::Empty("softmax input"));
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("softmax input {i}")));
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = out.iter().sum();
    for o in &mut out {
        *o /= total;
    }
    Ok(out)
}

/// Vector-Jacobian product of softmax: given `a = softmax(v)` and `g = dL/da`,
/// returns `dL/dv`.
pub fn softmax_backward(a: &[f64], g: &[f64]) -> Vec<f64> {
    let inner = dot(a, g);
    a.iter().zip(g).map(|(ai, gi)| ai * (gi - inner)).collect()
}

/// Central finite-difference gradient of `f` at `x`.
pub fn fd_gradient<F>(mut f: F, x: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::invalid(format!("eps must be positive, got {eps}")));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        let orig = probe[j];
        probe[j] = orig + eps;
        let up = f(&probe);
        probe[j] = orig - eps;
        let down = f(&probe);
        probe[j] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite(format!(
                "function evaluation near coordinate {j}"
            )));
        }
        grad.push((up - down) / (2.0 * eps));
    }
    Ok(grad)
}

/// Nearest-rank quantile of an ascending-sorted, non-empty sample.
pub fn nearest_rank_quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let n = sorted.len();
    let rank = (q.clamp(0.0, 1.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// `|a - b| / max(|a|, |b|, 1e-8)`: the comparison used by gradient checks.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}
