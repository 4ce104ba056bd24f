//! Candidate generation in subspace coordinates: isotropic Gaussian perturbations
//! projected onto an l2 trust region.
//!
//! Randomness comes from [`RngStream`], a ChaCha8 generator seeded from a `u64`.
//! Normals are drawn with `rand_distr::StandardNormal`, one sample at a time and
//! coordinate by coordinate, so a given seed reproduces the same candidates on any
//! platform.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Seeded, portable random stream (ChaCha8).
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream for sub-task `index`, e.g. one candidate or one round.
    /// Depends only on `(seed, index)`, never on how much of `self` was consumed.
    pub fn derive(&self, index: u64) -> RngStream {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index.wrapping_add(1));
        RngStream { seed: self.seed, rng }
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }
}

/// l2 ball around `center` plus the perturbation scale used inside it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustRegion {
    pub center: Vec<f64>,
    pub radius: f64,
    pub sigma: f64,
}

impl TrustRegion {
    pub fn new(center: Vec<f64>, radius: f64, sigma: f64) -> Self {
        assert!(radius > 0.0, "trust-region radius must be positive");
        assert!(sigma >= 0.0, "sampling sigma must be non-negative");
        assert!(center.iter().all(|v| v.is_finite()), "center must be finite");
        Self { center, radius, sigma }
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Euclidean projection of `z` onto the ball of `radius` around `center`.
pub fn project_ball(z: &[f64], center: &[f64], radius: f64) -> Vec<f64> {
    assert_eq!(z.len(), center.len(), "dimension mismatch in project_ball");
    let dist = distance(z, center);
    if dist <= radius {
        return z.to_vec();
    }
    let scale = radius / dist;
    z.iter()
        .zip(center)
        .map(|(x, c)| c + scale * (x - c))
        .collect()
}

/// Draws `count` points `project_ball(center + sigma * eps)` with standard normal `eps`.
pub fn gaussian_sample(region: &TrustRegion, count: usize, rng: &mut RngStream) -> Vec<Vec<f64>> {
    let dim = region.center.len();
    (0..count)
        .map(|_| {
            let raw: Vec<f64> = (0..dim)
                .map(|k| region.center[k] + region.sigma * rng.standard_normal())
                .collect();
            project_ball(&raw, &region.center, region.radius)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_point_is_unchanged() {
        assert_eq!(project_ball(&[0.3, 0.4], &[0.0, 0.0], 1.0), vec![0.3, 0.4]);
    }

    #[test]
    fn exterior_point_is_scaled_onto_sphere() {
        let p = project_ball(&[3.0, 4.0], &[0.0, 0.0], 1.0);
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn center_is_fixed_point() {
        assert_eq!(project_ball(&[1.0, -2.0], &[1.0, -2.0], 0.5), vec![1.0, -2.0]);
    }

    #[test]
    fn zero_sigma_returns_center_copies() {
        let region = TrustRegion::new(vec![0.25, -1.0, 3.0], 0.1, 0.0);
        let mut rng = RngStream::new(3);
        let samples = gaussian_sample(&region, 7, &mut rng);
        assert_eq!(samples.len(), 7);
        assert!(samples.iter().all(|s| s == &region.center));
    }

    #[test]
    fn large_sigma_stays_in_ball() {
        let region = TrustRegion::new(vec![0.0; 5], 0.01, 0.1);
        let mut rng = RngStream::new(11);
        for s in gaussian_sample(&region, 1000, &mut rng) {
            assert!(distance(&s, &region.center) <= region.radius + 1e-12);
        }
    }

    #[test]
    fn small_sigma_matches_gaussian_variance() {
        let radius = 1.0;
        let sigma = radius / 100.0;
        let region = TrustRegion::new(vec![0.5, -0.5, 0.0], radius, sigma);
        let mut rng = RngStream::new(42);
        let samples = gaussian_sample(&region, 10_000, &mut rng);
        for k in 0..3 {
            let mean = samples.iter().map(|s| s[k]).sum::<f64>() / samples.len() as f64;
            let var = samples.iter().map(|s| (s[k] - mean).powi(2)).sum::<f64>()
                / (samples.len() - 1) as f64;
            assert!((var / (sigma * sigma) - 1.0).abs() < 0.05, "coord {k}: var {var}");
        }
    }

    #[test]
    fn same_seed_same_samples() {
        let region = TrustRegion::new(vec![0.0; 4], 0.01, 0.005);
        let a = gaussian_sample(&region, 50, &mut RngStream::new(9));
        let b = gaussian_sample(&region, 50, &mut RngStream::new(9));
        assert_eq!(a, b);
    }

    #[test]
    fn derived_streams_ignore_parent_position() {
        let mut parent = RngStream::new(5);
        let before = parent.derive(3).next_u64();
        parent.next_u64();
        assert_eq!(parent.derive(3).next_u64(), before);
        assert_ne!(parent.derive(4).next_u64(), before);
    }
}
