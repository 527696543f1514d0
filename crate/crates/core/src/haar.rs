//! Reproducible Haar-uniform sampling of pure qubit states.
//!
//! Each sampler is addressed by a (seed, stream index) pair; parallel
//! ensemble runs give every task its own stream so that results are
//! bit-identical to a serial run regardless of scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::state::DensityMatrix;

/// Counter-based RNG stream for one ensemble member.
pub struct HaarSampler {
    rng: ChaCha12Rng,
    pub seed: u64,
    pub stream: u64,
}

impl HaarSampler {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, seed, stream }
    }

    /// Bloch angles of a Haar-uniform pure state: cos(theta) uniform on
    /// [-1, 1], phi uniform on [0, 2*pi).
    pub fn angles(&mut self) -> (f64, f64) {
        let cos_theta: f64 = self.rng.gen_range(-1.0..=1.0);
        let phi: f64 = self.rng.gen_range(0.0..std::f64::consts::TAU);
        (cos_theta.acos(), phi)
    }

    pub fn state(&mut self) -> (DensityMatrix, f64, f64) {
        let (theta, phi) = self.angles();
        (crate::state::qubit::bloch_state(theta, phi), theta, phi)
    }
}

/// Convenience: the k-th Haar state of an ensemble keyed by `seed`.
pub fn haar_state(seed: u64, index: u64) -> (DensityMatrix, f64, f64) {
    HaarSampler::new(seed, index).state()
}
