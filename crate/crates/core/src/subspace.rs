//! Gradient history and the low-dimensional search basis derived from it.
//!
//! A [`GradientWindow`] keeps the `Q` most recent gradient snapshots. Stacked as
//! columns they form a `D x Q` matrix `G`; [`build_basis`] takes its dominant
//! left singular vectors as an orthonormal basis `A`, and [`SubspaceBasis::lift`]
//! maps subspace coordinates back to full parameters via `anchor + A z`.
//!
//! `D` is expected to be much larger than `Q`, so the decomposition goes through a
//! thin Householder QR of `G` followed by an SVD of the small triangular factor.
//! No `D x D` matrix is ever formed.

use std::collections::VecDeque;
use std::ops::Deref;

use nalgebra::DMatrix;
use thiserror::Error;

/// Default relative cutoff for the numerical rank of the gradient matrix.
pub const DEFAULT_RANK_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SubspaceError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },
    #[error("empty parameter vector")]
    Empty,
    #[error("gradient window is empty")]
    EmptyWindow,
    #[error("gradient window capacity must be at least 1")]
    ZeroCapacity,
    #[error("requested rank must be at least 1")]
    ZeroRank,
    #[error("degenerate gradient history")]
    DegenerateHistory,
}

fn check_finite(values: &[f64]) -> Result<(), SubspaceError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(SubspaceError::NonFinite { index }),
        None => Ok(()),
    }
}

/// A point in the full parameter space. Always non-empty and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Result<Self, SubspaceError> {
        if values.is_empty() {
            return Err(SubspaceError::Empty);
        }
        check_finite(&values)?;
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "parameter dimension must be at least 1");
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// In-place `self += scale * direction`. Fails if the result would leave the
    /// finite domain, in which case `self` is unchanged.
    pub fn add_scaled(&mut self, scale: f64, direction: &[f64]) -> Result<(), SubspaceError> {
        if direction.len() != self.dim() {
            return Err(SubspaceError::DimensionMismatch {
                expected: self.dim(),
                actual: direction.len(),
            });
        }
        let updated: Vec<f64> = self
            .0
            .iter()
            .zip(direction)
            .map(|(p, d)| p + scale * d)
            .collect();
        check_finite(&updated)?;
        self.0 = updated;
        Ok(())
    }
}

impl Deref for ParameterVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Ring buffer of the most recent gradient snapshots, oldest first.
#[derive(Debug, Clone)]
pub struct GradientWindow {
    dim: usize,
    capacity: usize,
    snapshots: VecDeque<Vec<f64>>,
}

impl GradientWindow {
    pub fn new(dim: usize, capacity: usize) -> Result<Self, SubspaceError> {
        if dim == 0 {
            return Err(SubspaceError::Empty);
        }
        if capacity == 0 {
            return Err(SubspaceError::ZeroCapacity);
        }
        Ok(Self {
            dim,
            capacity,
            snapshots: VecDeque::with_capacity(capacity),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn snapshots(&self) -> impl Iterator<Item = &[f64]> {
        self.snapshots.iter().map(Vec::as_slice)
    }

    /// Appends `gradient` as the newest snapshot, evicting the oldest one when full.
    pub fn push(&mut self, gradient: &[f64]) -> Result<(), SubspaceError> {
        if gradient.len() != self.dim {
            return Err(SubspaceError::DimensionMismatch {
                expected: self.dim,
                actual: gradient.len(),
            });
        }
        check_finite(gradient)?;
        if self.snapshots.len() == self.capacity {
            self.snapshots.pop_front();
        }
        self.snapshots.push_back(gradient.to_vec());
        Ok(())
    }

    pub fn clear(&mut self) {
        self.snapshots.clear();
    }

    /// The `D x count` gradient matrix with snapshots as columns, oldest first.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.snapshots.len(), |i, j| self.snapshots[j][i])
    }
}

/// Orthonormal directions plus the anchor point they are attached to.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    directions: DMatrix<f64>,
    anchor: ParameterVector,
    requested_rank: usize,
    singular_values: Vec<f64>,
}

impl SubspaceBasis {
    /// Builds a basis from explicit columns. The caller is responsible for
    /// orthonormality; this is mainly useful for tests and fixed embeddings.
    pub fn from_columns(directions: DMatrix<f64>, anchor: ParameterVector) -> Result<Self, SubspaceError> {
        if directions.nrows() != anchor.dim() {
            return Err(SubspaceError::DimensionMismatch {
                expected: anchor.dim(),
                actual: directions.nrows(),
            });
        }
        if directions.ncols() == 0 {
            return Err(SubspaceError::ZeroRank);
        }
        check_finite(directions.as_slice())?;
        let requested_rank = directions.ncols();
        Ok(Self {
            directions,
            anchor,
            requested_rank,
            singular_values: Vec::new(),
        })
    }

    /// Number of directions actually spanned; the search runs in this many coordinates.
    pub fn rank_effective(&self) -> usize {
        self.directions.ncols()
    }

    pub fn requested_rank(&self) -> usize {
        self.requested_rank
    }

    pub fn ambient_dim(&self) -> usize {
        self.directions.nrows()
    }

    pub fn anchor(&self) -> &ParameterVector {
        &self.anchor
    }

    /// `D x rank_effective` matrix of orthonormal columns.
    pub fn directions(&self) -> &DMatrix<f64> {
        &self.directions
    }

    /// All singular values of the gradient matrix in descending order (empty for
    /// bases built with [`SubspaceBasis::from_columns`]).
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Maps subspace coordinates to full parameters: `anchor + A z`.
    pub fn lift(&self, z: &[f64]) -> Result<ParameterVector, SubspaceError> {
        let r = self.rank_effective();
        if z.len() != r {
            return Err(SubspaceError::DimensionMismatch {
                expected: r,
                actual: z.len(),
            });
        }
        let mut out = self.anchor.as_slice().to_vec();
        for (k, &coef) in z.iter().enumerate() {
            if coef == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.directions.column(k).iter()) {
                *o += a * coef;
            }
        }
        ParameterVector::new(out)
    }
}

/// Computes the top left singular vectors of the window's gradient matrix.
///
/// Keeps `min(rank, numerical rank)` directions, where the numerical rank counts
/// singular values above `sigma_max * rank_threshold`. Each column is flipped so
/// its largest-magnitude entry (lowest index on ties) is non-negative.
pub fn build_basis(
    window: &GradientWindow,
    anchor: ParameterVector,
    rank: usize,
    rank_threshold: f64,
) -> Result<SubspaceBasis, SubspaceError> {
    if window.is_empty() {
        return Err(SubspaceError::EmptyWindow);
    }
    if rank == 0 {
        return Err(SubspaceError::ZeroRank);
    }
    if anchor.dim() != window.dim() {
        return Err(SubspaceError::DimensionMismatch {
            expected: window.dim(),
            actual: anchor.dim(),
        });
    }

    let g = window.matrix();
    if g.iter().all(|&v| v == 0.0) {
        return Err(SubspaceError::DegenerateHistory);
    }

    // G = Q R with Q: D x k, R: k x Q, k = min(D, Q).
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let svd = r.svd(true, false);
    let u_small = svd.u.expect("left singular vectors requested");

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .expect("singular values are finite")
            .then(a.cmp(&b))
    });
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();

    let sigma_max = singular_values[0];
    if !(sigma_max > 0.0) {
        return Err(SubspaceError::DegenerateHistory);
    }
    let cutoff = sigma_max * rank_threshold;
    let numerical_rank = singular_values.iter().filter(|&&s| s > cutoff).count();
    let keep = rank.min(numerical_rank);

    let mut directions = DMatrix::zeros(window.dim(), keep);
    for (col, &src) in order.iter().take(keep).enumerate() {
        let mut v = &q * u_small.column(src);
        let pivot = v
            .iter()
            .enumerate()
            .fold((0usize, 0.0f64), |(bi, bv), (i, x)| {
                if x.abs() > bv {
                    (i, x.abs())
                } else {
                    (bi, bv)
                }
            })
            .0;
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        directions.set_column(col, &v);
    }

    Ok(SubspaceBasis {
        directions,
        anchor,
        requested_rank: rank,
        singular_values,
    })
}
