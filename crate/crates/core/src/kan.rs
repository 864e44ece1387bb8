//! Single Kolmogorov-Arnold layer mapping `d_in` frozen features to `d_out`
//! logits.
//!
//! Every edge `(j, i)` carries the univariate function
//!
//! ```text
//! phi_ji(u) = w_ji * silu(u) + sum_m c_jim * B_m(u)
//! ```
//!
//! and output `j` is `b_j + sum_i phi_ji(x_i)`. The basis `B_m` comes from a
//! single [`KnotGrid`] shared by all edges, with inputs clamped to its range.
//!
//! Parameter tensors are stored flat and row-major: coefficients as
//! `[d_out][d_in][G + k]`, residual weights as `[d_out][d_in]`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::optim::ParamTensors;
use crate::spline::KnotGrid;

/// Default cap on basis-cache size: 2 GiB of `f64` entries.
pub const DEFAULT_CACHE_BUDGET_BYTES: u128 = 2 << 30;

pub fn silu(u: f64) -> f64 {
    u / (1.0 + (-u).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct KanHeadParams {
    d_in: usize,
    d_out: usize,
    grid: KnotGrid,
    pub coeffs: Vec<f64>,
    pub residual_weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Gradients congruent with [`KanHeadParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct KanGradients {
    pub coeffs: Vec<f64>,
    pub residual_weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl KanHeadParams {
    /// All-zero parameters.
    pub fn zeros(d_in: usize, d_out: usize, grid: KnotGrid) -> Self {
        let bd = grid.basis_dim();
        KanHeadParams {
            d_in,
            d_out,
            coeffs: vec![0.0; d_out * d_in * bd],
            residual_weights: vec![0.0; d_out * d_in],
            biases: vec![0.0; d_out],
            grid,
        }
    }

    /// Assembles parameters from flat tensors, validating shapes and finiteness.
    pub fn from_parts(
        d_in: usize,
        d_out: usize,
        grid: KnotGrid,
        coeffs: Vec<f64>,
        residual_weights: Vec<f64>,
        biases: Vec<f64>,
    ) -> Result<Self> {
        let bd = grid.basis_dim();
        check_len("kan coeffs", d_out * d_in * bd, coeffs.len())?;
        check_len("kan residual weights", d_out * d_in, residual_weights.len())?;
        check_len("kan biases", d_out, biases.len())?;
        let all = coeffs.iter().chain(&residual_weights).chain(&biases);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite KAN parameter".into()));
        }
        Ok(KanHeadParams {
            d_in,
            d_out,
            grid,
            coeffs,
            residual_weights,
            biases,
        })
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn grid(&self) -> &KnotGrid {
        &self.grid
    }

    pub fn coeff_index(&self, j: usize, i: usize, m: usize) -> usize {
        (j * self.d_in + i) * self.grid.basis_dim() + m
    }

    pub fn zero_gradients(&self) -> KanGradients {
        KanGradients {
            coeffs: vec![0.0; self.coeffs.len()],
            residual_weights: vec![0.0; self.residual_weights.len()],
            biases: vec![0.0; self.biases.len()],
        }
    }

    /// Multiplies every parameter by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        for t in out.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= alpha);
        }
        out
    }
}

impl ParamTensors for KanHeadParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![&self.coeffs, &self.residual_weights, &self.biases]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            &mut self.coeffs,
            &mut self.residual_weights,
            &mut self.biases,
        ]
    }
}

impl ParamTensors for KanGradients {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![&self.coeffs, &self.residual_weights, &self.biases]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            &mut self.coeffs,
            &mut self.residual_weights,
            &mut self.biases,
        ]
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

/// Random initialization: coefficients ~ N(0, (0.1/sqrt(G+k))^2), residual
/// weights ~ N(0, 1/d_in), biases zero. Deterministic in `seed`.
pub fn init_kan_head(d_in: usize, d_out: usize, grid: KnotGrid, seed: u64) -> KanHeadParams {
    let mut params = KanHeadParams::zeros(d_in, d_out, grid);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bd = params.grid.basis_dim() as f64;
    let coeff_dist = Normal::new(0.0, 0.1 / bd.sqrt()).expect("positive std");
    let resid_dist = Normal::new(0.0, 1.0 / (d_in as f64).sqrt()).expect("positive std");
    params
        .coeffs
        .iter_mut()
        .for_each(|c| *c = coeff_dist.sample(&mut rng));
    params
        .residual_weights
        .iter_mut()
        .for_each(|w| *w = resid_dist.sample(&mut rng));
    params
}

/// `d_out * d_in * (G + k) + d_out * d_in + d_out`.
pub fn kan_param_count(d_in: usize, d_out: usize, grid: &KnotGrid) -> usize {
    d_out * d_in * grid.basis_dim() + d_out * d_in + d_out
}

/// Per-sample basis values and residual activations for a fixed feature
/// matrix. Frozen features never change, so this is computed once per split.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisCache {
    grid: KnotGrid,
    n: usize,
    d_in: usize,
    basis: Vec<f64>,
    starts: Vec<u32>,
    silu: Vec<f64>,
}

/// One sample's view into basis values: dense `[d_in][G + k]` values, the
/// first nonzero index per feature, and `silu` per feature.
#[derive(Debug, Clone, Copy)]
struct SampleBasis<'a> {
    basis: &'a [f64],
    starts: &'a [u32],
    silu: &'a [f64],
}

/// Number of `f64` entries a basis cache over `n` samples holds.
pub fn cache_entry_count(n: usize, d_in: usize, grid: &KnotGrid) -> u128 {
    n as u128 * d_in as u128 * grid.basis_dim() as u128
}

/// Basis cache with the default memory budget.
pub fn precompute_basis_cache(grid: &KnotGrid, features: &Matrix) -> Result<BasisCache> {
    precompute_basis_cache_with_budget(grid, features, DEFAULT_CACHE_BUDGET_BYTES)
}

pub fn precompute_basis_cache_with_budget(
    grid: &KnotGrid,
    features: &Matrix,
    budget_bytes: u128,
) -> Result<BasisCache> {
    let n = features.rows();
    let d_in = features.cols();
    let requested = cache_entry_count(n, d_in, grid) * std::mem::size_of::<f64>() as u128;
    if requested > budget_bytes {
        return Err(Error::MemoryBudget {
            requested,
            cap: budget_bytes,
        });
    }
    check_finite(features)?;
    let bd = grid.basis_dim();
    let mut cache = BasisCache {
        grid: grid.clone(),
        n,
        d_in,
        basis: vec![0.0; n * d_in * bd],
        starts: vec![0; n * d_in],
        silu: vec![0.0; n * d_in],
    };
    for s in 0..n {
        let x = features.row(s);
        let row = s * d_in;
        fill_sample(
            grid,
            x,
            &mut cache.basis[row * bd..(row + d_in) * bd],
            &mut cache.starts[row..row + d_in],
            &mut cache.silu[row..row + d_in],
        );
    }
    Ok(cache)
}

fn fill_sample(grid: &KnotGrid, x: &[f64], basis: &mut [f64], starts: &mut [u32], act: &mut [f64]) {
    let bd = grid.basis_dim();
    for (i, &xi) in x.iter().enumerate() {
        starts[i] = grid.fill_basis(xi, &mut basis[i * bd..(i + 1) * bd]) as u32;
        act[i] = silu(xi);
    }
}

fn check_finite(features: &Matrix) -> Result<()> {
    if features.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite feature value".into()));
    }
    Ok(())
}

impl BasisCache {
    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn grid(&self) -> &KnotGrid {
        &self.grid
    }

    /// Value `B_m(clamp(x_{s,i}))`.
    pub fn value(&self, s: usize, i: usize, m: usize) -> f64 {
        let bd = self.grid.basis_dim();
        self.basis[(s * self.d_in + i) * bd + m]
    }

    pub fn entry_count(&self) -> usize {
        self.basis.len()
    }

    fn sample(&self, s: usize) -> SampleBasis<'_> {
        let bd = self.grid.basis_dim();
        let row = s * self.d_in;
        SampleBasis {
            basis: &self.basis[row * bd..(row + self.d_in) * bd],
            starts: &self.starts[row..row + self.d_in],
            silu: &self.silu[row..row + self.d_in],
        }
    }

    /// Cache restricted to the given sample rows, in order.
    pub fn select_rows(&self, indices: &[usize]) -> BasisCache {
        let bd = self.grid.basis_dim();
        let d = self.d_in;
        let mut out = BasisCache {
            grid: self.grid.clone(),
            n: indices.len(),
            d_in: d,
            basis: Vec::with_capacity(indices.len() * d * bd),
            starts: Vec::with_capacity(indices.len() * d),
            silu: Vec::with_capacity(indices.len() * d),
        };
        for &s in indices {
            let src = self.sample(s);
            out.basis.extend_from_slice(src.basis);
            out.starts.extend_from_slice(src.starts);
            out.silu.extend_from_slice(src.silu);
        }
        out
    }
}

fn check_inputs(
    params: &KanHeadParams,
    features: &Matrix,
    cache: Option<&BasisCache>,
) -> Result<()> {
    check_len("kan input width", params.d_in, features.cols())?;
    if let Some(c) = cache {
        check_len("basis cache rows", features.rows(), c.n)?;
        check_len("basis cache width", params.d_in, c.d_in)?;
        if c.grid != params.grid {
            return Err(Error::InvalidArgument(
                "basis cache was built for a different grid".into(),
            ));
        }
    }
    Ok(())
}

/// Runs `f` on each sample's basis view, from the cache when given, otherwise
/// computed into a scratch row.
fn for_each_sample(
    params: &KanHeadParams,
    features: &Matrix,
    cache: Option<&BasisCache>,
    mut f: impl FnMut(usize, SampleBasis<'_>),
) {
    match cache {
        Some(c) => (0..c.n).for_each(|s| f(s, c.sample(s))),
        None => {
            let d = params.d_in;
            let bd = params.grid.basis_dim();
            let mut basis = vec![0.0; d * bd];
            let mut starts = vec![0u32; d];
            let mut act = vec![0.0; d];
            for s in 0..features.rows() {
                fill_sample(
                    &params.grid,
                    features.row(s),
                    &mut basis,
                    &mut starts,
                    &mut act,
                );
                f(
                    s,
                    SampleBasis {
                        basis: &basis,
                        starts: &starts,
                        silu: &act,
                    },
                );
            }
        }
    }
}

/// Logits `[n][d_out]`. With a cache the result is bit-identical to the
/// uncached evaluation.
pub fn kan_forward(
    params: &KanHeadParams,
    features: &Matrix,
    cache: Option<&BasisCache>,
) -> Result<Matrix> {
    check_inputs(params, features, cache)?;
    if cache.is_none() {
        check_finite(features)?;
    }
    let d = params.d_in;
    let bd = params.grid.basis_dim();
    let active = params.grid.degree() + 1;
    let mut logits = Matrix::zeros(features.rows(), params.d_out);
    for_each_sample(params, features, cache, |s, sb| {
        let out = logits.row_mut(s);
        for (j, o) in out.iter_mut().enumerate() {
            let mut acc = params.biases[j];
            for i in 0..d {
                let edge = j * d + i;
                acc += params.residual_weights[edge] * sb.silu[i];
                let start = sb.starts[i] as usize;
                let c = &params.coeffs[edge * bd + start..edge * bd + start + active];
                let b = &sb.basis[i * bd + start..i * bd + start + active];
                for (cm, bm) in c.iter().zip(b) {
                    acc += cm * bm;
                }
            }
            *o = acc;
        }
    });
    Ok(logits)
}

/// Gradients of `sum_{s,j} dlogits[s][j] * logits[s][j]` with respect to all
/// head parameters. Accumulation is sample-major: samples in row order, and
/// within a sample outputs then features then basis indices ascending.
pub fn kan_backward(
    params: &KanHeadParams,
    features: &Matrix,
    dlogits: &Matrix,
    cache: Option<&BasisCache>,
) -> Result<KanGradients> {
    check_inputs(params, features, cache)?;
    check_len("dlogits rows", features.rows(), dlogits.rows())?;
    check_len("dlogits width", params.d_out, dlogits.cols())?;
    if cache.is_none() {
        check_finite(features)?;
    }
    let d = params.d_in;
    let bd = params.grid.basis_dim();
    let active = params.grid.degree() + 1;
    let mut grads = params.zero_gradients();
    for_each_sample(params, features, cache, |s, sb| {
        for (j, &g) in dlogits.row(s).iter().enumerate() {
            grads.biases[j] += g;
            for i in 0..d {
                let edge = j * d + i;
                grads.residual_weights[edge] += g * sb.silu[i];
                let start = sb.starts[i] as usize;
                let gc = &mut grads.coeffs[edge * bd + start..edge * bd + start + active];
                let b = &sb.basis[i * bd + start..i * bd + start + active];
                for (gm, bm) in gc.iter_mut().zip(b) {
                    *gm += g * bm;
                }
            }
        }
    });
    Ok(grads)
}
