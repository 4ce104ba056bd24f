//! Benchmark objectives with true evaluations and gradient oracles.
//!
//! Returns follow the "higher is better" convention. Evaluation noise, when
//! configured, is additive Gaussian drawn from a stream seeded by the caller's
//! evaluation seed, so a noisy objective is still a deterministic function of
//! `(theta, eval_seed)`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::sampler::RngStream;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error("parameter dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("non-finite parameter at index {0}")]
    NonFinite(usize),
    #[error("objective does not provide gradients")]
    GradientUnsupported,
    #[error("invalid objective configuration: {0}")]
    InvalidConfig(String),
    #[error("evaluation failed: {0}")]
    Failed(String),
}

pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    /// Noise-free return at `theta`. Callers go through [`Objective::evaluate`],
    /// which validates the input first.
    fn value(&self, theta: &[f64]) -> f64;

    fn noise_std(&self) -> f64 {
        0.0
    }

    /// Environment steps represented by one evaluation.
    fn step_cost(&self) -> u64 {
        1
    }

    fn supports_gradient(&self) -> bool {
        false
    }

    fn gradient_unchecked(&self, _theta: &[f64]) -> Result<Vec<f64>, ObjectiveError> {
        Err(ObjectiveError::GradientUnsupported)
    }

    /// One true evaluation ("rollout") of `theta`.
    fn evaluate(&self, theta: &[f64], eval_seed: u64) -> Result<f64, ObjectiveError> {
        self.check_input(theta)?;
        let mut y = self.value(theta);
        let std = self.noise_std();
        if std > 0.0 {
            y += std * RngStream::new(eval_seed).standard_normal();
        }
        if !y.is_finite() {
            return Err(ObjectiveError::Failed(format!("non-finite return {y}")));
        }
        Ok(y)
    }

    fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>, ObjectiveError> {
        self.check_input(theta)?;
        self.gradient_unchecked(theta)
    }

    fn check_input(&self, theta: &[f64]) -> Result<(), ObjectiveError> {
        if theta.len() != self.dim() {
            return Err(ObjectiveError::DimensionMismatch {
                expected: self.dim(),
                actual: theta.len(),
            });
        }
        match theta.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(ObjectiveError::NonFinite(i)),
            None => Ok(()),
        }
    }
}

/// Central-difference gradient of the noise-free value.
pub fn central_difference(objective: &dyn Objective, theta: &[f64], step: f64) -> Vec<f64> {
    let mut probe = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + step;
            let up = objective.value(&probe);
            probe[i] = orig - step;
            let down = objective.value(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut RngStream) -> DMatrix<f64> {
    // column-major fill order
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.standard_normal()).collect();
    DMatrix::from_vec(rows, cols, data)
}

/// Concave quadratic with low effective dimension:
/// `J(theta) = sum_i lambda_i * ((theta - theta_opt) . b_i)^2` with orthonormal `b_i`.
#[derive(Debug, Clone)]
pub struct PlantedQuadratic {
    basis: DMatrix<f64>,
    spectrum: Vec<f64>,
    optimum: Vec<f64>,
    noise_std: f64,
}

impl PlantedQuadratic {
    /// Draws the hidden basis as an orthonormalized Gaussian `dim x eff_dim`
    /// matrix and a unit-norm optimum, both from `seed`.
    pub fn new(dim: usize, eff_dim: usize, spectrum: &[f64], seed: u64) -> Result<Self, ObjectiveError> {
        if dim == 0 || eff_dim == 0 {
            return Err(ObjectiveError::InvalidConfig("dimensions must be positive".into()));
        }
        if eff_dim > dim {
            return Err(ObjectiveError::InvalidConfig(format!(
                "effective dimension {eff_dim} exceeds dimension {dim}"
            )));
        }
        if spectrum.len() != eff_dim {
            return Err(ObjectiveError::InvalidConfig(format!(
                "spectrum has {} entries, expected {eff_dim}",
                spectrum.len()
            )));
        }
        if let Some(l) = spectrum.iter().find(|l| !(**l < 0.0 && l.is_finite())) {
            return Err(ObjectiveError::InvalidConfig(format!(
                "curvatures must be finite and negative, got {l}"
            )));
        }
        let mut rng = RngStream::new(seed);
        let basis = gaussian_matrix(dim, eff_dim, &mut rng).qr().q();
        let raw: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let optimum = raw.iter().map(|v| v / norm).collect();
        Ok(Self {
            basis,
            spectrum: spectrum.to_vec(),
            optimum,
            noise_std: 0.0,
        })
    }

    pub fn with_noise(mut self, noise_std: f64) -> Self {
        assert!(noise_std >= 0.0 && noise_std.is_finite());
        self.noise_std = noise_std;
        self
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn optimum(&self) -> &[f64] {
        &self.optimum
    }

    fn projected_offset(&self, theta: &[f64]) -> DVector<f64> {
        let diff = DVector::from_iterator(
            theta.len(),
            theta.iter().zip(&self.optimum).map(|(t, o)| t - o),
        );
        self.basis.tr_mul(&diff)
    }
}

impl Objective for PlantedQuadratic {
    fn dim(&self) -> usize {
        self.optimum.len()
    }

    fn value(&self, theta: &[f64]) -> f64 {
        self.projected_offset(theta)
            .iter()
            .zip(&self.spectrum)
            .map(|(p, l)| l * p * p)
            .sum()
    }

    fn noise_std(&self) -> f64 {
        self.noise_std
    }

    fn supports_gradient(&self) -> bool {
        true
    }

    fn gradient_unchecked(&self, theta: &[f64]) -> Result<Vec<f64>, ObjectiveError> {
        let p = self.projected_offset(theta);
        let weighted = DVector::from_iterator(
            p.len(),
            p.iter().zip(&self.spectrum).map(|(p, l)| 2.0 * l * p),
        );
        Ok((&self.basis * weighted).as_slice().to_vec())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LqrConfig {
    pub state_dim: usize,
    pub action_dim: usize,
    pub horizon: usize,
    /// Number of fixed initial states averaged per rollout.
    pub initial_states: usize,
    /// Standard deviation of the initial states; 0 starts every rollout at the origin.
    pub initial_scale: f64,
    /// `R = control_weight * I`; `S = I`.
    pub control_weight: f64,
    pub spectral_radius: f64,
    pub seed: u64,
}

impl Default for LqrConfig {
    fn default() -> Self {
        Self {
            state_dim: 4,
            action_dim: 2,
            horizon: 50,
            initial_states: 4,
            initial_scale: 1.0,
            control_weight: 0.1,
            spectral_radius: 0.95,
            seed: 0,
        }
    }
}

/// Finite-horizon linear system driven by a linear state-feedback policy.
///
/// `theta` is the gain `K` (`action_dim x state_dim`, row-major), `u_t = K x_t`,
/// `x_{t+1} = A x_t + B u_t`, and the return is
/// `-sum_{t<H} (x_t' S x_t + u_t' R u_t)` averaged over the initial states.
#[derive(Debug, Clone)]
pub struct LqrRollout {
    config: LqrConfig,
    dynamics: DMatrix<f64>,
    input: DMatrix<f64>,
    state_cost: DMatrix<f64>,
    control_cost: DMatrix<f64>,
    initial_states: Vec<DVector<f64>>,
    noise_std: f64,
}

impl LqrRollout {
    pub fn new(config: LqrConfig) -> Result<Self, ObjectiveError> {
        let n = config.state_dim;
        let m = config.action_dim;
        if n == 0 || m == 0 || config.horizon == 0 || config.initial_states == 0 {
            return Err(ObjectiveError::InvalidConfig("LQR sizes must be positive".into()));
        }
        if !(config.control_weight > 0.0) || !(config.spectral_radius > 0.0) || config.initial_scale < 0.0 {
            return Err(ObjectiveError::InvalidConfig(
                "control weight and spectral radius must be positive".into(),
            ));
        }
        let mut rng = RngStream::new(config.seed);
        let raw = gaussian_matrix(n, n, &mut rng);
        let radius = raw
            .clone()
            .complex_eigenvalues()
            .iter()
            .map(|c| c.norm())
            .fold(0.0f64, f64::max);
        let dynamics = if radius > 0.0 {
            raw * (config.spectral_radius / radius)
        } else {
            raw
        };
        let input = gaussian_matrix(n, m, &mut rng) / (n as f64).sqrt();
        let initial_states = (0..config.initial_states)
            .map(|_| DVector::from_iterator(n, (0..n).map(|_| config.initial_scale * rng.standard_normal())))
            .collect();
        Ok(Self {
            state_cost: DMatrix::identity(n, n),
            control_cost: DMatrix::identity(m, m) * config.control_weight,
            config,
            dynamics,
            input,
            initial_states,
            noise_std: 0.0,
        })
    }

    pub fn with_noise(mut self, noise_std: f64) -> Self {
        assert!(noise_std >= 0.0 && noise_std.is_finite());
        self.noise_std = noise_std;
        self
    }

    pub fn config(&self) -> &LqrConfig {
        &self.config
    }

    pub fn dynamics(&self) -> &DMatrix<f64> {
        &self.dynamics
    }

    fn gain(&self, theta: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.config.action_dim, self.config.state_dim, theta)
    }

    /// States `x_0 .. x_{H-1}` for one initial state.
    pub fn trajectory(&self, theta: &[f64], start: usize) -> Vec<DVector<f64>> {
        let closed = &self.dynamics + &self.input * self.gain(theta);
        let mut x = self.initial_states[start].clone();
        let mut states = Vec::with_capacity(self.config.horizon);
        for _ in 0..self.config.horizon {
            let next = &closed * &x;
            states.push(std::mem::replace(&mut x, next));
        }
        states
    }
}

impl Objective for LqrRollout {
    fn dim(&self) -> usize {
        self.config.state_dim * self.config.action_dim
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let k = self.gain(theta);
        let stage = &self.state_cost + k.transpose() * &self.control_cost * &k;
        let total: f64 = (0..self.initial_states.len())
            .map(|s| {
                self.trajectory(theta, s)
                    .iter()
                    .map(|x| x.dot(&(&stage * x)))
                    .sum::<f64>()
            })
            .sum();
        -total / self.initial_states.len() as f64
    }

    fn noise_std(&self) -> f64 {
        self.noise_std
    }

    fn step_cost(&self) -> u64 {
        self.config.horizon as u64
    }

    fn supports_gradient(&self) -> bool {
        true
    }

    /// Adjoint recursion: `lambda_t = 2 W x_t + (A + B K)' lambda_{t+1}`, `lambda_H = 0`,
    /// `dc/dK = sum_t (2 R K x_t + B' lambda_{t+1}) x_t'` with `W = S + K' R K`.
    fn gradient_unchecked(&self, theta: &[f64]) -> Result<Vec<f64>, ObjectiveError> {
        let k = self.gain(theta);
        let closed = &self.dynamics + &self.input * &k;
        let stage = &self.state_cost + k.transpose() * &self.control_cost * &k;
        let rk = &self.control_cost * &k;
        let n = self.config.state_dim;
        let mut grad = DMatrix::<f64>::zeros(self.config.action_dim, n);
        for s in 0..self.initial_states.len() {
            let states = self.trajectory(theta, s);
            let mut adjoint = DVector::<f64>::zeros(n);
            for x in states.iter().rev() {
                let term = &rk * x * 2.0 + self.input.tr_mul(&adjoint);
                grad += term * x.transpose();
                adjoint = &stage * x * 2.0 + closed.tr_mul(&adjoint);
            }
        }
        let scale = -1.0 / self.initial_states.len() as f64;
        let mut out = Vec::with_capacity(self.dim());
        for i in 0..self.config.action_dim {
            for j in 0..n {
                out.push(scale * grad[(i, j)]);
            }
        }
        Ok(out)
    }
}
