//! Uniform extended knot grids and B-spline basis evaluation.
//!
//! A grid with `G` intervals over `[lo, hi]` and degree `k` carries
//! `G + 2k + 1` uniformly spaced knots, extended `k` steps past each end of
//! the range, and spans `G + k` basis functions. Inputs are clamped into
//! `[lo, hi]` before evaluation, so the basis always forms a partition of
//! unity.
//!
//! Degree-0 pieces are half-open `[t_i, t_{i+1})`, except the last in-range
//! interval which is closed at `hi`.

use crate::error::{Error, Result};

/// Largest supported spline degree. Evaluation uses fixed-size scratch space.
pub const MAX_DEGREE: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct KnotGrid {
    grid_size: usize,
    degree: usize,
    range_lo: f64,
    range_hi: f64,
    knots: Vec<f64>,
}

/// Builds the uniform extended knot vector for `grid_size` intervals over
/// `[range_lo, range_hi]`.
pub fn build_knot_grid(
    grid_size: usize,
    degree: usize,
    range_lo: f64,
    range_hi: f64,
) -> Result<KnotGrid> {
    if grid_size == 0 {
        return Err(Error::InvalidArgument(
            "grid size must be at least 1".into(),
        ));
    }
    if degree > MAX_DEGREE {
        return Err(Error::InvalidArgument(format!(
            "spline degree {degree} exceeds the supported maximum {MAX_DEGREE}"
        )));
    }
    if !(range_lo.is_finite() && range_hi.is_finite()) || range_lo >= range_hi {
        return Err(Error::InvalidArgument(format!(
            "grid range [{range_lo}, {range_hi}] must be finite with lo < hi"
        )));
    }
    let h = (range_hi - range_lo) / grid_size as f64;
    let count = grid_size + 2 * degree + 1;
    let mut knots: Vec<f64> = (0..count)
        .map(|j| range_lo + (j as f64 - degree as f64) * h)
        .collect();
    // Pin the range ends exactly so clamped inputs land on real knots.
    knots[degree] = range_lo;
    knots[grid_size + degree] = range_hi;
    Ok(KnotGrid {
        grid_size,
        degree,
        range_lo,
        range_hi,
        knots,
    })
}

impl KnotGrid {
    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn range(&self) -> (f64, f64) {
        (self.range_lo, self.range_hi)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions, `G + k`.
    pub fn basis_dim(&self) -> usize {
        self.grid_size + self.degree
    }

    /// Knot spacing.
    pub fn step(&self) -> f64 {
        (self.range_hi - self.range_lo) / self.grid_size as f64
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.range_lo, self.range_hi)
    }

    /// Index `s` of the in-range knot interval `[t_s, t_{s+1})` holding the
    /// already-clamped `x`; `x == hi` maps to the last interval.
    fn span(&self, x: f64) -> usize {
        let k = self.degree;
        let last = self.grid_size + k - 1;
        // Interior knots t_{k+1} ..= t_{G+k-1}; count those <= x.
        let interior = &self.knots[k + 1..=last];
        k + interior.partition_point(|&t| t <= x)
    }

    /// Writes all `G + k` basis values at `x` into `out`, clamping `x` first.
    /// Returns the index of the first possibly nonzero entry.
    ///
    /// `x` must not be NaN; `out.len()` must equal [`basis_dim`](Self::basis_dim).
    pub fn fill_basis(&self, x: f64, out: &mut [f64]) -> usize {
        debug_assert_eq!(out.len(), self.basis_dim());
        out.iter_mut().for_each(|v| *v = 0.0);
        let x = self.clamp(x);
        let s = self.span(x);
        let start = s - self.degree;
        local_basis(&self.knots, s, x, self.degree, &mut out[start..=s]);
        start
    }

    /// Basis values `B_{0..G+k-1, k}(clamp(x))`.
    pub fn basis(&self, x: f64) -> Result<Vec<f64>> {
        if !x.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite input {x}")));
        }
        let mut out = vec![0.0; self.basis_dim()];
        self.fill_basis(x, &mut out);
        Ok(out)
    }

    /// Derivatives `dB_{i,k}/dx` at `x`.
    ///
    /// Requires `k >= 1` and `x` strictly inside the range and off every knot,
    /// where one-sided derivatives can disagree.
    pub fn basis_derivative(&self, x: f64) -> Result<Vec<f64>> {
        let k = self.degree;
        if k == 0 {
            return Err(Error::InvalidArgument(
                "degree-0 basis has no derivative".into(),
            ));
        }
        if !x.is_finite() || x <= self.range_lo || x >= self.range_hi {
            return Err(Error::InvalidArgument(format!(
                "derivative point {x} must lie strictly inside ({}, {})",
                self.range_lo, self.range_hi
            )));
        }
        if self.knots.contains(&x) {
            return Err(Error::InvalidArgument(format!(
                "derivative point {x} lies on a knot"
            )));
        }
        let s = self.span(x);
        // Degree k-1 values for indices s-k+1 ..= s.
        let mut lower = [0.0; MAX_DEGREE + 1];
        local_basis(&self.knots, s, x, k - 1, &mut lower[..k]);
        let t = &self.knots;
        let kf = k as f64;
        let lower_at = |i: usize| -> f64 {
            // index i of the degree k-1 basis, zero outside s-k+1..=s
            if i + k > s && i <= s {
                lower[i + k - 1 - s]
            } else {
                0.0
            }
        };
        let mut out = vec![0.0; self.basis_dim()];
        for i in s - k..=s {
            let a = lower_at(i) / (t[i + k] - t[i]);
            let b = lower_at(i + 1) / (t[i + k + 1] - t[i + 1]);
            out[i] = kf * (a - b);
        }
        Ok(out)
    }
}

/// Triangular Cox–de Boor evaluation of the `degree + 1` basis functions
/// that are nonzero on knot interval `span`, written to `out` in index order
/// `span - degree ..= span`.
fn local_basis(knots: &[f64], span: usize, x: f64, degree: usize, out: &mut [f64]) {
    debug_assert_eq!(out.len(), degree + 1);
    let mut left = [0.0; MAX_DEGREE + 1];
    let mut right = [0.0; MAX_DEGREE + 1];
    out[0] = 1.0;
    for j in 1..=degree {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = out[r] / (right[r + 1] + left[j - r]);
            out[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        out[j] = saved;
    }
}
