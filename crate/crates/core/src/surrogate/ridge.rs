use nalgebra::{DMatrix, DVector};

use super::{check_queries, ContextSet, Predictor, SurrogateError, TargetStats};

/// Linear model with unpenalized intercept, fitted on standardized targets:
/// `(Xc' Xc + lambda I) w = Xc' y` with column-centered `Xc`.
#[derive(Debug, Clone)]
pub struct RidgeModel {
    weights: DVector<f64>,
    x_mean: DVector<f64>,
    stats: TargetStats,
}

impl RidgeModel {
    pub fn fit(context: &ContextSet, lambda: f64) -> Result<Self, SurrogateError> {
        if context.is_empty() {
            return Err(SurrogateError::EmptyContext);
        }
        let (xs, ys) = context.merged();
        let stats = TargetStats::from_targets(&ys)?;
        let n = xs.len();
        let r = context.dim();
        let x = DMatrix::from_fn(n, r, |i, j| xs[i][j]);
        let x_mean = DVector::from_fn(r, |j, _| x.column(j).mean());
        let mut xc = x;
        for j in 0..r {
            xc.column_mut(j).add_scalar_mut(-x_mean[j]);
        }
        let y = DVector::from_iterator(n, ys.iter().map(|&v| stats.normalize(v)));

        let mut gram = xc.tr_mul(&xc);
        for j in 0..r {
            gram[(j, j)] += lambda;
        }
        let rhs = xc.tr_mul(&y);
        let weights = match gram.clone().cholesky() {
            Some(chol) => chol.solve(&rhs),
            None => gram.lu().solve(&rhs).ok_or(SurrogateError::Singular)?,
        };
        if !weights.iter().all(|w| w.is_finite()) {
            return Err(SurrogateError::NonFinite("ridge weights"));
        }
        Ok(Self { weights, x_mean, stats })
    }

    /// Slopes in the original target units.
    pub fn coefficients(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w * self.stats.scale).collect()
    }

    pub fn intercept(&self) -> f64 {
        self.stats.mean - self.stats.scale * self.weights.dot(&self.x_mean)
    }
}

impl Predictor for RidgeModel {
    fn predict(&self, queries: &[Vec<f64>]) -> Result<Vec<f64>, SurrogateError> {
        check_queries(queries, self.x_mean.len())?;
        Ok(queries
            .iter()
            .map(|q| {
                let centered: f64 = q
                    .iter()
                    .zip(self.x_mean.iter())
                    .zip(self.weights.iter())
                    .map(|((a, m), w)| (a - m) * w)
                    .sum();
                self.stats.denormalize(centered)
            })
            .collect())
    }
}
