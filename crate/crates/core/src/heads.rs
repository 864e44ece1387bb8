//! Probing heads over frozen features: the linear baseline, the KAN head,
//! and the shared loss and prediction helpers.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::kan::{self, BasisCache, KanGradients, KanHeadParams};
use crate::matrix::Matrix;
use crate::optim::ParamTensors;
use crate::spline::KnotGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HeadKind {
    Linear,
    Kan,
}

impl HeadKind {
    pub fn as_str(self) -> &'static str {
        match self {
            HeadKind::Linear => "linear",
            HeadKind::Kan => "kan",
        }
    }
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(HeadKind::Linear),
            "kan" => Ok(HeadKind::Kan),
            other => Err(Error::InvalidArgument(format!(
                "unknown head kind {other:?}"
            ))),
        }
    }
}

/// Affine classifier: `weights` is `[d_out][d_in]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHeadParams {
    d_in: usize,
    d_out: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LinearHeadParams {
    pub fn zeros(d_in: usize, d_out: usize) -> Self {
        LinearHeadParams {
            d_in,
            d_out,
            weights: vec![0.0; d_in * d_out],
            biases: vec![0.0; d_out],
        }
    }

    pub fn from_parts(
        d_in: usize,
        d_out: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
    ) -> Result<Self> {
        check_len("linear weights", d_in * d_out, weights.len())?;
        check_len("linear biases", d_out, biases.len())?;
        if weights.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite linear parameter".into()));
        }
        Ok(LinearHeadParams {
            d_in,
            d_out,
            weights,
            biases,
        })
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }
}

impl ParamTensors for LinearHeadParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![&self.weights, &self.biases]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.weights, &mut self.biases]
    }
}

fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        });
    }
    Ok(())
}

/// Weights ~ N(0, 1/d_in), biases zero.
pub fn init_linear_head(d_in: usize, d_out: usize, seed: u64) -> LinearHeadParams {
    let mut params = LinearHeadParams::zeros(d_in, d_out);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Normal::new(0.0, 1.0 / (d_in as f64).sqrt()).expect("positive std");
    params
        .weights
        .iter_mut()
        .for_each(|w| *w = dist.sample(&mut rng));
    params
}

pub fn linear_param_count(d_in: usize, d_out: usize) -> usize {
    d_in * d_out + d_out
}

pub fn linear_forward(params: &LinearHeadParams, features: &Matrix) -> Result<Matrix> {
    check_len("linear input width", params.d_in, features.cols())?;
    let mut logits = Matrix::zeros(features.rows(), params.d_out);
    for s in 0..features.rows() {
        let x = features.row(s);
        for (j, out) in logits.row_mut(s).iter_mut().enumerate() {
            let w = &params.weights[j * params.d_in..(j + 1) * params.d_in];
            let mut acc = params.biases[j];
            for (wi, xi) in w.iter().zip(x) {
                acc += wi * xi;
            }
            *out = acc;
        }
    }
    Ok(logits)
}

/// Affine gradients, accumulated sample-major.
pub fn linear_backward(
    params: &LinearHeadParams,
    features: &Matrix,
    dlogits: &Matrix,
) -> Result<LinearHeadParams> {
    check_len("linear input width", params.d_in, features.cols())?;
    check_len("dlogits rows", features.rows(), dlogits.rows())?;
    check_len("dlogits width", params.d_out, dlogits.cols())?;
    let mut grads = LinearHeadParams::zeros(params.d_in, params.d_out);
    for s in 0..features.rows() {
        let x = features.row(s);
        for (j, &g) in dlogits.row(s).iter().enumerate() {
            grads.biases[j] += g;
            let row = &mut grads.weights[j * params.d_in..(j + 1) * params.d_in];
            for (gw, xi) in row.iter_mut().zip(x) {
                *gw += g * xi;
            }
        }
    }
    Ok(grads)
}

/// Mean softmax cross-entropy and its gradient with respect to the logits.
///
/// Uses the max-shifted log-sum-exp, so extreme logits do not overflow.
pub fn softmax_cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    let n = logits.rows();
    let classes = logits.cols();
    if n == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    check_len("label count", n, labels.len())?;
    if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
        return Err(Error::LabelOutOfRange {
            row,
            label,
            n_classes: classes,
        });
    }
    let inv_n = 1.0 / n as f64;
    let mut total = 0.0;
    let mut grad = Matrix::zeros(n, classes);
    for (s, &label) in labels.iter().enumerate() {
        let z = logits.row(s);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = z.iter().map(|&v| (v - max).exp()).sum();
        let lse = max + sum_exp.ln();
        total += lse - z[label];
        for (j, g) in grad.row_mut(s).iter_mut().enumerate() {
            let p = (z[j] - lse).exp();
            let target = if j == label { 1.0 } else { 0.0 };
            *g = (p - target) * inv_n;
        }
    }
    Ok((total * inv_n, grad))
}

/// Row-wise argmax; ties go to the lowest class index.
pub fn predict(logits: &Matrix) -> Vec<usize> {
    (0..logits.rows())
        .map(|s| {
            let row = logits.row(s);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Head parameters of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbeHead {
    Linear(LinearHeadParams),
    Kan(KanHeadParams),
}

/// Gradients matching a [`ProbeHead`] variant.
#[derive(Debug, Clone, PartialEq)]
pub enum HeadGradients {
    Linear(LinearHeadParams),
    Kan(KanGradients),
}

impl ProbeHead {
    pub fn kind(&self) -> HeadKind {
        match self {
            ProbeHead::Linear(_) => HeadKind::Linear,
            ProbeHead::Kan(_) => HeadKind::Kan,
        }
    }

    pub fn d_in(&self) -> usize {
        match self {
            ProbeHead::Linear(p) => p.d_in(),
            ProbeHead::Kan(p) => p.d_in(),
        }
    }

    pub fn d_out(&self) -> usize {
        match self {
            ProbeHead::Linear(p) => p.d_out(),
            ProbeHead::Kan(p) => p.d_out(),
        }
    }

    pub fn grid(&self) -> Option<&KnotGrid> {
        match self {
            ProbeHead::Linear(_) => None,
            ProbeHead::Kan(p) => Some(p.grid()),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            ProbeHead::Linear(p) => linear_param_count(p.d_in(), p.d_out()),
            ProbeHead::Kan(p) => kan::kan_param_count(p.d_in(), p.d_out(), p.grid()),
        }
    }

    pub fn as_kan(&self) -> Option<&KanHeadParams> {
        match self {
            ProbeHead::Kan(p) => Some(p),
            ProbeHead::Linear(_) => None,
        }
    }

    pub fn as_linear(&self) -> Option<&LinearHeadParams> {
        match self {
            ProbeHead::Linear(p) => Some(p),
            ProbeHead::Kan(_) => None,
        }
    }
}

impl ParamTensors for ProbeHead {
    fn tensors(&self) -> Vec<&[f64]> {
        match self {
            ProbeHead::Linear(p) => p.tensors(),
            ProbeHead::Kan(p) => p.tensors(),
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            ProbeHead::Linear(p) => p.tensors_mut(),
            ProbeHead::Kan(p) => p.tensors_mut(),
        }
    }
}

impl ParamTensors for HeadGradients {
    fn tensors(&self) -> Vec<&[f64]> {
        match self {
            HeadGradients::Linear(g) => g.tensors(),
            HeadGradients::Kan(g) => g.tensors(),
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            HeadGradients::Linear(g) => g.tensors_mut(),
            HeadGradients::Kan(g) => g.tensors_mut(),
        }
    }
}

/// Initializes a head. KAN heads require a grid.
pub fn head_init(
    kind: HeadKind,
    d_in: usize,
    d_out: usize,
    grid: Option<&KnotGrid>,
    seed: u64,
) -> Result<ProbeHead> {
    if d_in == 0 || d_out == 0 {
        return Err(Error::InvalidArgument(format!(
            "head dimensions must be positive, got {d_in} -> {d_out}"
        )));
    }
    match kind {
        HeadKind::Linear => Ok(ProbeHead::Linear(init_linear_head(d_in, d_out, seed))),
        HeadKind::Kan => {
            let grid =
                grid.ok_or_else(|| Error::InvalidArgument("KAN head requires a knot grid".into()))?;
            Ok(ProbeHead::Kan(kan::init_kan_head(
                d_in,
                d_out,
                grid.clone(),
                seed,
            )))
        }
    }
}

/// Forward pass. The cache is only consulted by KAN heads.
pub fn head_forward(
    head: &ProbeHead,
    features: &Matrix,
    cache: Option<&BasisCache>,
) -> Result<Matrix> {
    match head {
        ProbeHead::Linear(p) => linear_forward(p, features),
        ProbeHead::Kan(p) => kan::kan_forward(p, features, cache),
    }
}

pub fn head_backward(
    head: &ProbeHead,
    features: &Matrix,
    dlogits: &Matrix,
    cache: Option<&BasisCache>,
) -> Result<HeadGradients> {
    match head {
        ProbeHead::Linear(p) => linear_backward(p, features, dlogits).map(HeadGradients::Linear),
        ProbeHead::Kan(p) => kan::kan_backward(p, features, dlogits, cache).map(HeadGradients::Kan),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spline::build_knot_grid;

    #[test]
    fn zero_linear_head() {
        let p = LinearHeadParams::zeros(3, 2);
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 3.0]]);
        assert_eq!(linear_forward(&p, &x).unwrap(), Matrix::zeros(1, 2));
    }

    #[test]
    fn identity_linear_head() {
        let mut p = LinearHeadParams::zeros(3, 3);
        for i in 0..3 {
            p.weights[i * 3 + i] = 1.0;
        }
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 3.5], vec![0.0, 0.25, -7.0]]);
        assert_eq!(linear_forward(&p, &x).unwrap(), x);
    }

    #[test]
    fn linear_backward_one_hot() {
        let p = init_linear_head(3, 2, 5);
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 3.5]]);
        let dl = Matrix::from_rows(&[vec![0.0, 1.0]]);
        let g = linear_backward(&p, &x, &dl).unwrap();
        assert_eq!(&g.weights[3..6], x.row(0));
        assert_eq!(&g.weights[0..3], &[0.0; 3]);
        assert_eq!(g.biases, vec![0.0, 1.0]);
        let z = linear_backward(&p, &x, &Matrix::zeros(1, 2)).unwrap();
        assert_eq!(z, LinearHeadParams::zeros(3, 2));
    }

    #[test]
    fn uniform_logits_loss_is_log_classes() {
        let logits = Matrix::from_rows(&[vec![0.3; 10], vec![-4.0; 10]]);
        let (loss, _) = softmax_cross_entropy(&logits, &[3, 9]).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn extreme_logits_do_not_overflow() {
        let logits = Matrix::from_rows(&[vec![1000.0, 0.0]]);
        let (loss, grad) = softmax_cross_entropy(&logits, &[0]).unwrap();
        assert!(loss.is_finite() && loss.abs() < 1e-300);
        assert!(grad.as_slice().iter().all(|g| g.is_finite()));
        let (loss, _) = softmax_cross_entropy(&logits, &[1]).unwrap();
        assert!((loss - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn out_of_range_label_rejected() {
        let logits = Matrix::zeros(2, 3);
        assert!(matches!(
            softmax_cross_entropy(&logits, &[0, 3]),
            Err(Error::LabelOutOfRange {
                row: 1,
                label: 3,
                ..
            })
        ));
    }

    #[test]
    fn dlogits_rows_sum_to_zero() {
        let logits = Matrix::from_rows(&[vec![0.2, -1.0, 3.0], vec![5.0, 5.0, -5.0]]);
        let (_, g) = softmax_cross_entropy(&logits, &[2, 0]).unwrap();
        for s in 0..2 {
            assert!(g.row(s).iter().sum::<f64>().abs() < 1e-15);
        }
    }

    #[test]
    fn predict_argmax_and_ties() {
        let logits = Matrix::from_rows(&[vec![0.1, 0.9, 0.3], vec![0.5, 0.5, 0.1]]);
        assert_eq!(predict(&logits), vec![1, 0]);
        let shifted = logits.map(|v| v + 17.0);
        assert_eq!(predict(&shifted), vec![1, 0]);
    }

    #[test]
    fn kan_without_grid_is_error() {
        assert!(head_init(HeadKind::Kan, 3, 2, None, 0).is_err());
        assert!(head_init(HeadKind::Linear, 0, 2, None, 0).is_err());
    }

    #[test]
    fn dispatch_matches_direct_calls() {
        let g = build_knot_grid(5, 3, -1.0, 1.0).unwrap();
        let x = Matrix::from_rows(&[vec![0.4, -1.3, 2.0], vec![0.0, 0.1, -0.2]]);
        let lin = head_init(HeadKind::Linear, 3, 2, None, 9).unwrap();
        let kanh = head_init(HeadKind::Kan, 3, 2, Some(&g), 9).unwrap();
        assert_eq!(
            head_forward(&lin, &x, None).unwrap(),
            linear_forward(lin.as_linear().unwrap(), &x).unwrap()
        );
        assert_eq!(
            head_forward(&kanh, &x, None).unwrap(),
            kan::kan_forward(kanh.as_kan().unwrap(), &x, None).unwrap()
        );
        assert_eq!(lin, head_init(HeadKind::Linear, 3, 2, None, 9).unwrap());
        assert_eq!(kanh, head_init(HeadKind::Kan, 3, 2, Some(&g), 9).unwrap());
        assert_eq!(lin.param_count(), 8);
    }

    #[test]
    fn linear_param_count_at_resnet_width() {
        assert_eq!(linear_param_count(2048, 10), 20_490);
    }
}
