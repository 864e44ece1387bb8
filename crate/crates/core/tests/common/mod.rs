//! Reference implementations written independently of the library code paths.
#![allow(dead_code)]

use kanprobe::data::{gen_synthetic, standardize, FeatureDataset, SyntheticKind};
use kanprobe::heads::{head_forward, softmax_cross_entropy, ProbeHead};
use kanprobe::kan::KanHeadParams;
use kanprobe::optim::ParamTensors;
use kanprobe::spline::KnotGrid;
use kanprobe::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform extended knot vector built from scratch.
pub fn oracle_knots(g: usize, k: usize, lo: f64, hi: f64) -> Vec<f64> {
    let h = (hi - lo) / g as f64;
    (0..g + 2 * k + 1)
        .map(|j| {
            if j == k {
                lo
            } else if j == g + k {
                hi
            } else {
                lo + (j as f64 - k as f64) * h
            }
        })
        .collect()
}

/// Textbook recursive definition of `B_{i,k}(x)`. At `x == hi` the left limit
/// is taken so the basis is defined at the right end of the range.
pub fn cox_de_boor(t: &[f64], i: usize, k: usize, x: f64, hi: f64) -> f64 {
    if k == 0 {
        let inside = if x == hi {
            t[i] < x && x <= t[i + 1]
        } else {
            t[i] <= x && x < t[i + 1]
        };
        return if inside { 1.0 } else { 0.0 };
    }
    let mut v = 0.0;
    let d1 = t[i + k] - t[i];
    if d1 != 0.0 {
        v += (x - t[i]) / d1 * cox_de_boor(t, i, k - 1, x, hi);
    }
    let d2 = t[i + k + 1] - t[i + 1];
    if d2 != 0.0 {
        v += (t[i + k + 1] - x) / d2 * cox_de_boor(t, i + 1, k - 1, x, hi);
    }
    v
}

/// Full basis vector at `x` (clamped into the range) via [`cox_de_boor`].
pub fn oracle_basis(g: usize, k: usize, lo: f64, hi: f64, x: f64) -> Vec<f64> {
    let t = oracle_knots(g, k, lo, hi);
    let x = x.max(lo).min(hi);
    (0..g + k).map(|i| cox_de_boor(&t, i, k, x, hi)).collect()
}

/// De Boor's algorithm: value of `Σ c_i B_{i,k}(x)` at a single point.
pub fn de_boor_value(g: usize, k: usize, lo: f64, hi: f64, coeffs: &[f64], x: f64) -> f64 {
    let t = oracle_knots(g, k, lo, hi);
    let x = x.max(lo).min(hi);
    let mut span = k;
    while span + 1 < g + k && t[span + 1] <= x {
        span += 1;
    }
    let mut d: Vec<f64> = (0..=k).map(|j| coeffs[j + span - k]).collect();
    for r in 1..=k {
        for j in (r..=k).rev() {
            let left = t[j + span - k];
            let right = t[j + 1 + span - r];
            let alpha = (x - left) / (right - left);
            d[j] = (1.0 - alpha) * d[j - 1] + alpha * d[j];
        }
    }
    d[k]
}

pub fn oracle_silu(u: f64) -> f64 {
    u / (1.0 + (-u).exp())
}

/// Per-edge double loop over samples, outputs and inputs.
pub fn naive_kan_logits(p: &KanHeadParams, x: &Matrix) -> Matrix {
    let grid = p.grid();
    let (g, k) = (grid.grid_size(), grid.degree());
    let (lo, hi) = grid.range();
    let bd = g + k;
    let mut out = Matrix::zeros(x.rows(), p.d_out());
    for s in 0..x.rows() {
        for j in 0..p.d_out() {
            let mut acc = p.biases[j];
            for i in 0..p.d_in() {
                let u = x.get(s, i);
                let b = oracle_basis(g, k, lo, hi, u);
                let mut edge = p.residual_weights[j * p.d_in() + i] * oracle_silu(u);
                for (m, bm) in b.iter().enumerate() {
                    edge += p.coeffs[(j * p.d_in() + i) * bd + m] * bm;
                }
                acc += edge;
            }
            out.set(s, j, acc);
        }
    }
    out
}

pub fn naive_linear_logits(weights: &[f64], biases: &[f64], x: &Matrix) -> Matrix {
    let d_out = biases.len();
    let d_in = x.cols();
    let mut out = Matrix::zeros(x.rows(), d_out);
    for s in 0..x.rows() {
        for j in 0..d_out {
            let mut acc = biases[j];
            for i in 0..d_in {
                acc += weights[j * d_in + i] * x.get(s, i);
            }
            out.set(s, j, acc);
        }
    }
    out
}

/// Unevaluated sum `hi + lo` carried with twice the working precision.
#[derive(Debug, Clone, Copy)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

impl DoubleDouble {
    pub fn new(v: f64) -> Self {
        DoubleDouble { hi: v, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let bb = s - a;
        (s, (a - (s - bb)) + (b - bb))
    }

    pub fn add(self, v: f64) -> Self {
        let (s, e) = Self::two_sum(self.hi, v);
        let (hi, lo) = Self::two_sum(s, e + self.lo);
        DoubleDouble { hi, lo }
    }

    pub fn ln(self) -> f64 {
        self.hi.ln() + self.lo / self.hi
    }
}

/// Cross-entropy and its logit gradient with double-double accumulation.
pub fn reference_softmax_ce(logits: &Matrix, labels: &[usize]) -> (f64, Matrix) {
    let n = logits.rows();
    let mut total = DoubleDouble::new(0.0);
    let mut grad = Matrix::zeros(n, logits.cols());
    for s in 0..n {
        let row = logits.row(s);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|z| (z - m).exp()).collect();
        let sum = exps
            .iter()
            .fold(DoubleDouble::new(0.0), |acc, &e| acc.add(e));
        let lse = m + sum.ln();
        total = total.add(lse - row[labels[s]]);
        for (c, e) in exps.iter().enumerate() {
            let p = e / sum.hi * (1.0 - sum.lo / sum.hi);
            let target = if c == labels[s] { 1.0 } else { 0.0 };
            grad.set(s, c, (p - target) / n as f64);
        }
    }
    ((total.hi + total.lo) / n as f64, grad)
}

/// Scalar Adam on `f(θ) = θ²`; returns θ after each step.
pub fn reference_adam_trace(theta0: f64, lr: f64, steps: usize) -> Vec<f64> {
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let (mut m, mut v, mut theta) = (0.0, 0.0, theta0);
    let mut trace = Vec::new();
    for t in 1..=steps {
        let g = 2.0 * theta;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let m_hat = m / (1.0 - b1.powi(t as i32));
        let v_hat = v / (1.0 - b2.powi(t as i32));
        theta -= lr * m_hat / (v_hat.sqrt() + eps);
        trace.push(theta);
    }
    trace
}

pub fn loss_of(head: &ProbeHead, x: &Matrix, y: &[usize]) -> f64 {
    let logits = head_forward(head, x, None).unwrap();
    softmax_cross_entropy(&logits, y).unwrap().0
}

/// Central differences of the mean cross-entropy with respect to every
/// parameter, flattened in declared tensor order.
pub fn fd_gradient(head: &ProbeHead, x: &Matrix, y: &[usize], step: f64) -> Vec<f64> {
    let sizes: Vec<usize> = head.tensors().iter().map(|t| t.len()).collect();
    let mut out = Vec::new();
    for (ti, &len) in sizes.iter().enumerate() {
        for e in 0..len {
            let mut plus = head.clone();
            plus.tensors_mut()[ti][e] += step;
            let mut minus = head.clone();
            minus.tensors_mut()[ti][e] -= step;
            out.push((loss_of(&plus, x, y) - loss_of(&minus, x, y)) / (2.0 * step));
        }
    }
    out
}

pub fn flatten(p: &impl ParamTensors) -> Vec<f64> {
    p.tensors()
        .into_iter()
        .flat_map(|t| t.iter().copied())
        .collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, or the absolute difference when both are tiny.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale < 1e-12 {
        norm(&diff)
    } else {
        norm(&diff) / scale
    }
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-scale..scale))
        .collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// Least-squares coefficients of `u ↦ u²` on the grid's basis.
pub fn fit_square(grid: &KnotGrid) -> Vec<f64> {
    let (lo, hi) = grid.range();
    let bd = grid.basis_dim();
    let mut ata = vec![vec![0.0; bd]; bd];
    let mut atb = vec![0.0; bd];
    let samples = 2000;
    for s in 0..=samples {
        let u = lo + (hi - lo) * s as f64 / samples as f64;
        let b = grid.basis(u).unwrap();
        for r in 0..bd {
            atb[r] += b[r] * u * u;
            for c in 0..bd {
                ata[r][c] += b[r] * b[c];
            }
        }
    }
    solve(ata, atb)
}

/// Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            let pivot = a[col].clone();
            for (v, p) in a[r].iter_mut().zip(&pivot).skip(col) {
                *v -= f * p;
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

pub fn standardized(
    kind: SyntheticKind,
    n: usize,
    d: usize,
    classes: usize,
    noise: f64,
    seed: u64,
) -> FeatureDataset {
    standardize(&gen_synthetic(kind, n, d, classes, noise, seed).unwrap())
        .unwrap()
        .0
}
