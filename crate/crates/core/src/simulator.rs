//! Synthetic readout: Gaussian clouds on the Q axis with known ground truth.
//!
//! Each qubit has two clouds `N(mu0, sigma)` and `N(mu1, sigma)` with
//! `mu0 < mu1` and a threshold; binary assignment is `1` iff `Q >= threshold`.
//! All randomness comes from ChaCha8 streams derived from an explicit seed,
//! so every output is reproducible bit for bit.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::bits::BitString;
use crate::calibration::{CalibrationRecord, Samples};
use crate::error::{Error, Result};
use crate::noise_model::{Mode, SingleQubitConfusion};
use crate::tally::Shot;

/// Shots generated per RNG stream.
const SHARD: usize = 4096;
/// First stream used for calibration experiments.
const CALIBRATION_STREAM: u64 = 1 << 40;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Standard normal CDF.
pub fn phi(x: f64) -> f64 {
    std_normal().cdf(x)
}

/// Cloud parameters of one qubit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitDetector {
    pub mu0: f64,
    pub mu1: f64,
    pub sigma: f64,
    /// Assignment threshold; the midpoint of the clouds when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

impl QubitDetector {
    pub fn threshold(&self) -> f64 {
        self.threshold.unwrap_or(0.5 * (self.mu0 + self.mu1))
    }

    fn mean(&self, bit: u8) -> f64 {
        if bit == 0 {
            self.mu0
        } else {
            self.mu1
        }
    }
}

/// Ground-truth detector of a register.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub qubits: Vec<QubitDetector>,
}

impl DetectorSpec {
    pub fn new(qubits: Vec<QubitDetector>) -> Result<Self> {
        let spec = Self { qubits };
        spec.validate()?;
        Ok(spec)
    }

    /// Clouds at `-1` and `+1` with the width that yields the requested
    /// assignment fidelity at the midpoint threshold.
    pub fn symmetric(n_qubits: usize, fidelity: f64) -> Result<Self> {
        if !(0.5 < fidelity && fidelity < 1.0) {
            return Err(Error::contract(format!("fidelity {fidelity} outside (0.5, 1)")));
        }
        let sigma = 1.0 / std_normal().inverse_cdf(fidelity);
        Self::new(vec![
            QubitDetector {
                mu0: -1.0,
                mu1: 1.0,
                sigma,
                threshold: None,
            };
            n_qubits
        ])
    }

    pub fn validate(&self) -> Result<()> {
        if self.qubits.is_empty() {
            return Err(Error::contract("detector spec has no qubits"));
        }
        for (q, d) in self.qubits.iter().enumerate() {
            if !d.sigma.is_finite() || d.sigma <= 0.0 {
                return Err(Error::contract(format!("qubit {q}: sigma must be positive")));
            }
            if !d.mu0.is_finite() || !d.mu1.is_finite() || d.mu0 >= d.mu1 {
                return Err(Error::contract(format!("qubit {q}: clouds must satisfy mu0 < mu1")));
            }
            if !d.threshold().is_finite() {
                return Err(Error::contract(format!("qubit {q}: threshold must be finite")));
            }
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.qubits.len()
    }

    /// Exact confusion matrix of qubit `q` under threshold assignment.
    pub fn true_confusion(&self, q: usize) -> SingleQubitConfusion {
        let d = &self.qubits[q];
        let th = d.threshold();
        let p00 = phi((th - d.mu0) / d.sigma);
        let p11 = 1.0 - phi((th - d.mu1) / d.sigma);
        SingleQubitConfusion::new([[p00, 1.0 - p11], [1.0 - p00, p11]]).expect("Gaussian masses are stochastic")
    }

    /// Product of the per-qubit probabilities of assigning `target` correctly.
    pub fn string_fidelity(&self, target: &BitString) -> f64 {
        (0..self.n_qubits())
            .map(|q| {
                let b = target.bit(q) as usize;
                self.true_confusion(q).entry(b, b)
            })
            .product()
    }

    /// Draws one Q value for qubit `q` in state `bit`.
    fn draw<R: Rng>(&self, q: usize, bit: u8, rng: &mut R) -> f64 {
        let d = &self.qubits[q];
        let z: f64 = rng.sample(StandardNormal);
        d.mean(bit) + d.sigma * z
    }

    fn assign(&self, q: usize, value: f64) -> u8 {
        u8::from(value >= self.qubits[q].threshold())
    }
}

/// What the simulated circuit prepares.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preparation {
    /// A single basis string, as prepared by a layer of X gates.
    String(BitString),
    /// A distribution over basis strings.
    Distribution(BTreeMap<BitString, f64>),
    /// Reset-then-measure and flip-then-measure on every qubit.
    Calibration,
}

/// A seeded synthetic experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub preparation: Preparation,
    pub n_shots: usize,
    pub seed: u64,
    pub mode: Mode,
}

impl ExperimentSpec {
    pub fn string(target: BitString, n_shots: usize, seed: u64, mode: Mode) -> Self {
        Self {
            preparation: Preparation::String(target),
            n_shots,
            seed,
            mode,
        }
    }

    pub fn validate(&self, det: &DetectorSpec) -> Result<()> {
        if self.n_shots < 1 {
            return Err(Error::contract("n_shots must be at least 1"));
        }
        let n = det.n_qubits();
        match &self.preparation {
            Preparation::String(s) if s.len() != n => Err(Error::contract(format!(
                "prepared string has {} qubits, detector has {n}",
                s.len()
            ))),
            Preparation::Distribution(d) => {
                if d.is_empty() {
                    return Err(Error::contract("empty true distribution"));
                }
                if d.keys().any(|s| s.len() != n) {
                    return Err(Error::contract("true distribution strings do not match the detector size"));
                }
                if d.values().any(|&p| p.is_nan() || p < 0.0) {
                    return Err(Error::contract("true distribution has negative entries"));
                }
                let sum: f64 = d.values().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::contract(format!("true distribution sums to {sum}")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Samples experiment shots. Shards of 4096 shots use independent streams,
/// so the output does not depend on the worker count.
pub fn sample_shots(exp: &ExperimentSpec, det: &DetectorSpec) -> Result<Vec<Shot>> {
    det.validate()?;
    exp.validate(det)?;
    let (strings, cumulative): (Vec<BitString>, Vec<f64>) = match &exp.preparation {
        Preparation::String(s) => (vec![s.clone()], vec![1.0]),
        Preparation::Distribution(d) => {
            let mut acc = 0.0;
            d.iter()
                .filter(|(_, &p)| p > 0.0)
                .map(|(s, &p)| {
                    acc += p;
                    (s.clone(), acc)
                })
                .unzip()
        }
        Preparation::Calibration => {
            return Err(Error::contract("calibration preparations produce calibration records"));
        }
    };
    let n_q = det.n_qubits();
    let n_shards = exp.n_shots.div_ceil(SHARD);
    let shards: Vec<Vec<Shot>> = (0..n_shards)
        .into_par_iter()
        .map(|shard| {
            let mut rng = stream_rng(exp.seed, shard as u64);
            let len = SHARD.min(exp.n_shots - shard * SHARD);
            (0..len)
                .map(|_| {
                    let truth = if strings.len() == 1 {
                        &strings[0]
                    } else {
                        let u: f64 = rng.random::<f64>() * cumulative[cumulative.len() - 1];
                        let idx = cumulative.partition_point(|&c| c <= u).min(strings.len() - 1);
                        &strings[idx]
                    };
                    let q: Vec<f64> = (0..n_q).map(|k| det.draw(k, truth.bit(k), &mut rng)).collect();
                    match exp.mode {
                        Mode::Analog => Shot::Analog(q),
                        Mode::Binary => Shot::Bits(
                            BitString::from_bits(q.iter().enumerate().map(|(k, &v)| det.assign(k, v)).collect())
                                .expect("assignments are bits"),
                        ),
                    }
                })
                .collect()
        })
        .collect();
    Ok(shards.into_iter().flatten().collect())
}

/// Calibration records for every qubit: `n_shots` after reset and `n_shots`
/// after a flip, qubit ids `0..N_q`.
pub fn sample_calibration(det: &DetectorSpec, n_shots: usize, seed: u64, mode: Mode) -> Result<Vec<CalibrationRecord>> {
    det.validate()?;
    if n_shots < 1 {
        return Err(Error::contract("n_shots must be at least 1"));
    }
    (0..det.n_qubits() * 2)
        .into_par_iter()
        .map(|idx| {
            let (q, state) = (idx / 2, (idx % 2) as u8);
            let mut rng = stream_rng(seed, CALIBRATION_STREAM + idx as u64);
            let values: Vec<f64> = (0..n_shots).map(|_| det.draw(q, state, &mut rng)).collect();
            let samples = match mode {
                Mode::Analog => Samples::Analog(values),
                Mode::Binary => Samples::Bits(values.iter().map(|&v| det.assign(q, v)).collect()),
            };
            CalibrationRecord::new(q as u32, state, samples)
        })
        .collect()
}

/// Uniformly random bitstring of length `n`.
pub fn random_bitstring<R: Rng>(n: usize, rng: &mut R) -> BitString {
    BitString::from_bits((0..n).map(|_| rng.random_range(0..2u8)).collect()).expect("bits")
}

/// Seeded random target strings, as used for benchmark sweeps.
pub fn random_targets(n_qubits: usize, count: usize, seed: u64) -> Vec<BitString> {
    let mut rng = stream_rng(seed, 0);
    (0..count).map(|_| random_bitstring(n_qubits, &mut rng)).collect()
}

/// Population assigned to `target`, zero when absent.
pub fn success_probability(populations: &BTreeMap<BitString, f64>, target: &BitString) -> f64 {
    populations.get(target).copied().unwrap_or(0.0)
}
