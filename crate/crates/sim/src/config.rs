use thiserror::Error;

use crate::rng::PathRng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("n_paths must be at least 1")]
    NoPaths,
    #[error("dt must be positive")]
    BadStep,
    #[error("t_max too short: e^(-q t_max) = {0:e} is not below 1e-8")]
    ShortHorizon(f64),
    #[error("threads must be at least 1")]
    NoThreads,
    #[error("x = {0} outside [0, b]")]
    OutsideBand(f64),
    #[error("barrier must be positive")]
    BadBarrier,
    #[error("discount must be positive")]
    BadDiscount,
    #[error("{0}")]
    Model(String),
}

/// Path count, time discretization and random seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_paths: usize,
    /// Largest time step for Brownian components.
    pub dt: f64,
    /// Paths are cut at this time.
    pub t_max: f64,
    pub seed: u64,
    /// Pair each path with its mirror image; `n_paths` counts both.
    pub antithetic: bool,
    /// Worker threads; the result does not depend on it.
    pub threads: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { n_paths: 10_000, dt: 1e-2, t_max: 200.0, seed: 1, antithetic: false, threads: 1 }
    }
}

impl SimConfig {
    /// Checks the config for discounting at rate `q_min`.
    pub fn validate(&self, q_min: f64) -> Result<(), SimError> {
        if self.n_paths == 0 {
            return Err(SimError::NoPaths);
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(SimError::BadStep);
        }
        if self.threads == 0 {
            return Err(SimError::NoThreads);
        }
        if !(q_min > 0.0) {
            return Err(SimError::BadDiscount);
        }
        let tail = (-q_min * self.t_max).exp();
        if !(tail < 1e-8) {
            return Err(SimError::ShortHorizon(tail));
        }
        Ok(())
    }

    /// Shortest horizon accepted for discount rate `q`, with some margin.
    pub fn min_horizon(q: f64) -> f64 {
        (1e8f64).ln() / q * 1.05
    }

    fn samples(&self) -> usize {
        if self.antithetic {
            self.n_paths.div_ceil(2)
        } else {
            self.n_paths
        }
    }

    /// Runs `path` once per sample and returns the per-sample outputs in
    /// path order. `offset` separates the streams of unrelated estimators.
    pub(crate) fn run<const K: usize, F>(&self, offset: u64, path: F) -> Vec<[f64; K]>
    where
        F: Fn(&mut PathRng) -> [f64; K] + Sync,
    {
        let n = self.samples();
        let one = |p: usize| -> [f64; K] {
            let stream = offset ^ p as u64;
            let a = path(&mut PathRng::new(self.seed, stream, false));
            if !self.antithetic {
                return a;
            }
            let b = path(&mut PathRng::new(self.seed, stream, true));
            let mut out = [0.0; K];
            for k in 0..K {
                out[k] = 0.5 * (a[k] + b[k]);
            }
            out
        };
        let threads = self.threads.max(1).min(n.max(1));
        if threads == 1 {
            return (0..n).map(one).collect();
        }
        let chunk = n.div_ceil(threads);
        let mut out = Vec::with_capacity(n);
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..threads)
                .map(|w| {
                    let one = &one;
                    s.spawn(move || (w * chunk..((w + 1) * chunk).min(n)).map(one).collect::<Vec<_>>())
                })
                .collect();
            for h in handles {
                out.extend(h.join().expect("worker panicked"));
            }
        });
        out
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// Independent samples behind the estimate (pairs when antithetic).
    pub n_effective: usize,
}

impl SimEstimate {
    /// Mean and standard error of column `k`, with `bias` added to the error.
    pub(crate) fn from_column<const K: usize>(samples: &[[f64; K]], k: usize, bias: f64) -> Self {
        let n = samples.len();
        let mean = samples.iter().map(|s| s[k]).sum::<f64>() / n as f64;
        let var = if n > 1 {
            samples.iter().map(|s| (s[k] - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        SimEstimate { mean, std_error: (var / n as f64).sqrt() + bias, n_effective: n }
    }

    /// Whether `value` lies within `k` standard errors.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.std_error
    }
}
