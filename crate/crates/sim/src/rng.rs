use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Random source of one path. The antithetic twin negates normals and
/// reflects uniforms.
pub struct PathRng {
    rng: ChaCha8Rng,
    flip: bool,
}

impl PathRng {
    pub fn new(seed: u64, stream: u64, flip: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        PathRng { rng, flip }
    }

    /// Uniform on the open interval (0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        let u = ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
        if self.flip {
            1.0 - u
        } else {
            u
        }
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        if self.flip {
            -z
        } else {
            z
        }
    }

    /// Standard exponential.
    #[inline]
    pub fn exp1(&mut self) -> f64 {
        -self.uniform().ln()
    }
}
