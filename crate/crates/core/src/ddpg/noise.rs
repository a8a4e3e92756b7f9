use rand::Rng;
use rand_distr::StandardNormal;

/// Zero-mean Ornstein–Uhlenbeck process, `n ← n − θ n Δt + σ √Δt ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct OuNoise {
    pub theta: f64,
    pub sigma: f64,
    pub dt: f64,
    pub state: f64,
}

impl OuNoise {
    pub fn new(theta: f64, sigma: f64, dt: f64) -> Self {
        OuNoise {
            theta,
            sigma,
            dt,
            state: 0.0,
        }
    }

    pub fn reset(&mut self) {
        self.state = 0.0;
    }

    pub fn sample<R: Rng>(&mut self, rng: &mut R) -> f64 {
        let xi: f64 = rng.sample(StandardNormal);
        self.state += -self.theta * self.state * self.dt + self.sigma * self.dt.sqrt() * xi;
        self.state
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_sigma_decays_geometrically() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut n = OuNoise::new(0.15, 0.0, 1.0);
        n.state = 2.0;
        for k in 1..=20 {
            let v = n.sample(&mut rng);
            assert!((v - 2.0 * 0.85f64.powi(k)).abs() < 1e-12);
        }
    }

    #[test]
    fn stationary_spread() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut n = OuNoise::new(0.15, 1.0, 1.0);
        let samples: Vec<f64> = (0..200_000).map(|_| n.sample(&mut rng)).collect();
        let var = samples.iter().map(|v| v * v).sum::<f64>() / samples.len() as f64;
        // Discrete AR(1): σ² / (1 − (1 − θ)²).
        let expected = 1.0 / (1.0 - 0.85f64.powi(2));
        assert!((var / expected - 1.0).abs() < 0.05, "{var} vs {expected}");
    }
}
