use super::{check_queries, ContextSet, Predictor, SurrogateError};

/// Inverse-distance weighting with weights `1 / max(d, floor)^power`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdwConfig {
    pub power: f64,
    /// Queries closer than this to a data point return that point's target.
    pub distance_floor: f64,
}

impl Default for IdwConfig {
    fn default() -> Self {
        Self {
            power: 2.0,
            distance_floor: 1e-12,
        }
    }
}

/// Fitted on raw targets.
#[derive(Debug, Clone)]
pub struct IdwModel {
    config: IdwConfig,
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
}

impl IdwModel {
    pub fn fit(context: &ContextSet, config: IdwConfig) -> Result<Self, SurrogateError> {
        if context.is_empty() {
            return Err(SurrogateError::EmptyContext);
        }
        let (xs, ys) = context.merged();
        Ok(Self { config, xs, ys })
    }

    fn predict_one(&self, q: &[f64]) -> f64 {
        let mut weighted = 0.0;
        let mut total = 0.0;
        for (x, y) in self.xs.iter().zip(&self.ys) {
            let d = x
                .iter()
                .zip(q)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if d <= self.config.distance_floor {
                return *y;
            }
            let w = d.powf(-self.config.power);
            weighted += w * y;
            total += w;
        }
        weighted / total
    }
}

impl Predictor for IdwModel {
    fn predict(&self, queries: &[Vec<f64>]) -> Result<Vec<f64>, SurrogateError> {
        check_queries(queries, self.xs[0].len())?;
        Ok(queries.iter().map(|q| self.predict_one(q)).collect())
    }
}
