use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Empirical miss frequency with its binomial standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub probability: f64,
    pub std_error: f64,
    pub draws: u64,
}

impl McEstimate {
    /// Number of standard errors separating `p` from the empirical value.
    pub fn z_score(&self, p: f64) -> f64 {
        let se = self.std_error.max((p * (1.0 - p) / self.draws as f64).sqrt());
        if se == 0.0 {
            if p == self.probability { 0.0 } else { f64::INFINITY }
        } else {
            (self.probability - p).abs() / se
        }
    }
}

const CHUNK: u64 = 1 << 18;

/// Simulate the equal-prior decision rule: the received statistic is
/// `ηγ·c_samp + N` with `N ~ 𝒩(0, σ²)`, and a miss is `C_r ≤ ηγ·c_samp/2`.
///
/// Draws are split into fixed-size streams of one ChaCha generator, so the
/// result depends on `seed` only and not on the thread count.
pub fn monte_carlo_pmd(eta: f64, gamma: f64, sigma2: f64, c_samp: f64, draws: u64, seed: u64) -> Result<McEstimate> {
    if !(sigma2 > 0.0) || !(eta > 0.0) || !(gamma > 0.0) || !(c_samp >= 0.0) || draws == 0 {
        return Err(Error::invalid("oracle.monte_carlo", "need positive eta, gamma, sigma2, draws and non-negative c_samp"));
    }
    let signal = eta * gamma * c_samp;
    let threshold = 0.5 * signal;
    let noise = Normal::new(0.0, sigma2.sqrt()).map_err(|e| Error::invalid("oracle.sigma2", e.to_string()))?;
    let chunks = draws.div_ceil(CHUNK);
    let misses: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let n = CHUNK.min(draws - c * CHUNK);
            (0..n)
                .filter(|_| signal + noise.sample(&mut rng) <= threshold)
                .count() as u64
        })
        .sum();
    let p = misses as f64 / draws as f64;
    Ok(McEstimate {
        probability: p,
        std_error: (p * (1.0 - p) / draws as f64).sqrt(),
        draws,
    })
}
