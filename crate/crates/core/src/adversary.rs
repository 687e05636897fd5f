//! Supervisor-visible measurements: window-gated SOC bias plus sensor noise,
//! and the noisy battery-power channel used by the detector.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::{AttackSpec, BenchmarkParams};

/// ChaCha stream id of the SOC sensor noise.
pub const SOC_NOISE_STREAM: u64 = 1;
/// ChaCha stream id of the battery-current noise.
pub const CURRENT_NOISE_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SensorSample {
    /// Measured SOC, always within [0, 1].
    pub s_m: f64,
    /// Measured battery power, kW.
    pub pbat_m: f64,
    pub attack_active: bool,
}

/// `start <= t < end` for some window.
pub fn in_window(t: f64, attack: &AttackSpec) -> bool {
    attack.windows.iter().any(|&(a, b)| a <= t && t < b)
}

/// `clip(s + bias·[t in window] + noise, 0, 1)`.
pub fn spoofed_soc(s: f64, t: f64, attack: Option<&AttackSpec>, noise: f64) -> f64 {
    let bias = match attack {
        Some(a) if in_window(t, a) => a.bias,
        _ => 0.0,
    };
    (s + bias + noise).clamp(0.0, 1.0)
}

/// `p_bat * (1 + eps)`.
pub fn measured_pbat(p_bat: f64, rel_noise: f64) -> f64 {
    p_bat * (1.0 + rel_noise)
}

/// Independent noise substreams derived from one master seed.
#[derive(Debug, Clone)]
pub struct NoiseStreams {
    soc: ChaCha8Rng,
    current: ChaCha8Rng,
}

impl NoiseStreams {
    pub fn new(seed: u64) -> Self {
        let mut soc = ChaCha8Rng::seed_from_u64(seed);
        soc.set_stream(SOC_NOISE_STREAM);
        let mut current = ChaCha8Rng::seed_from_u64(seed);
        current.set_stream(CURRENT_NOISE_STREAM);
        Self { soc, current }
    }

    /// Next standard-normal draw from the SOC stream.
    pub fn soc_unit(&mut self) -> f64 {
        self.soc.sample(StandardNormal)
    }

    /// Next standard-normal draw from the current stream.
    pub fn current_unit(&mut self) -> f64 {
        self.current.sample(StandardNormal)
    }
}

/// Sensor front end for one run. Draws exactly one value from each stream
/// per sample regardless of the configured sigmas.
#[derive(Debug, Clone)]
pub struct Sensors {
    noise: NoiseStreams,
    attack: Option<AttackSpec>,
}

impl Sensors {
    pub fn new(seed: u64, attack: Option<AttackSpec>) -> Self {
        Self {
            noise: NoiseStreams::new(seed),
            attack,
        }
    }

    pub fn sample(&mut self, s: f64, p_bat: f64, t: f64, p: &BenchmarkParams) -> SensorSample {
        let eta = p.sigma_soc * self.noise.soc_unit();
        let eps = p.sigma_pbat_rel * self.noise.current_unit();
        SensorSample {
            s_m: spoofed_soc(s, t, self.attack.as_ref(), eta),
            pbat_m: measured_pbat(p_bat, eps),
            attack_active: self.attack.as_ref().is_some_and(|a| in_window(t, a)),
        }
    }
}
