use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// U(±sqrt(6 / (fan_in + fan_out))), zero biases.
    XavierUniform,
    /// N(0, σ²) resampled outside ±2σ, zero biases.
    TruncatedNormal { std: f64 },
}

pub fn truncated_normal<R: Rng>(rng: &mut R, std: f64) -> f64 {
    loop {
        let z: f64 = StandardNormal.sample(rng);
        if z.abs() <= 2.0 {
            return z * std;
        }
    }
}

pub fn fill<R: Rng>(init: Init, fan_in: usize, fan_out: usize, out: &mut [f64], rng: &mut R) {
    match init {
        Init::XavierUniform => {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for x in out {
                *x = rng.random_range(-a..a);
            }
        }
        Init::TruncatedNormal { std } => {
            for x in out {
                *x = truncated_normal(rng, std);
            }
        }
    }
}
