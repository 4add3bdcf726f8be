//! Reference mitigation methods on the observed subspace.
//!
//! * [`ibu`]: iterative Bayesian unfolding (expectation maximization on the
//!   confusion matrix restricted to the active set).
//! * [`mim`]: noise-matrix inversion followed by Euclidean projection onto
//!   the probability simplex.
//!
//! Both consume binary tallies and models. The inverse assignment matrix is
//! evaluated entry by entry as a product of per-qubit 2x2 inverses.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::noise_model::{Mode, NoiseModel};
use crate::tally::OutcomeTally;

/// Starting point of the unfolding iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IbuStart {
    #[default]
    Uniform,
    Empirical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IbuConfig {
    pub iterations: usize,
    pub start: IbuStart,
}

impl Default for IbuConfig {
    fn default() -> Self {
        Self {
            iterations: 100,
            start: IbuStart::Uniform,
        }
    }
}

fn require_binary(tally: &OutcomeTally, model: &NoiseModel) -> Result<()> {
    for (context, mode) in [("noise model", model.mode()), ("tally", tally.mode())] {
        if mode != Mode::Binary {
            return Err(Error::ModeMismatch {
                context,
                expected: Mode::Binary,
                found: mode,
            });
        }
    }
    if tally.n_qubits() != model.n_qubits() {
        return Err(Error::contract(format!(
            "tally has {} qubits, model has {}",
            tally.n_qubits(),
            model.n_qubits()
        )));
    }
    Ok(())
}

fn to_map(tally: &OutcomeTally, values: Vec<f64>) -> BTreeMap<BitString, f64> {
    tally.active().iter().map(|(s, _)| s.clone()).zip(values).collect()
}

/// Iterative Bayesian unfolding on the active set:
/// `rho_j <- sum_i noisy_i L_ij rho_j / sum_m L_im rho_m`.
pub fn ibu(tally: &OutcomeTally, model: &NoiseModel, cfg: &IbuConfig) -> Result<BTreeMap<BitString, f64>> {
    Ok(to_map(tally, ibu_iterates(tally, model, cfg)?.pop().unwrap()))
}

/// Every IBU iterate, starting guess first.
pub fn ibu_iterates(tally: &OutcomeTally, model: &NoiseModel, cfg: &IbuConfig) -> Result<Vec<Vec<f64>>> {
    require_binary(tally, model)?;
    if cfg.iterations < 1 {
        return Err(Error::contract("IBU needs at least one iteration"));
    }
    let strings: Vec<&BitString> = tally.active().iter().map(|(s, _)| s).collect();
    let m = strings.len();
    let noisy = tally.empirical_frequencies();
    // Row i: observed string, column j: candidate true string.
    let mut lambda = vec![0.0; m * m];
    for (i, si) in strings.iter().enumerate() {
        let key = crate::OutcomeKey::from(*si);
        for (j, sj) in strings.iter().enumerate() {
            lambda[i * m + j] = model.likelihood_entry(&key, sj)?;
        }
    }
    let mut rho = match cfg.start {
        IbuStart::Uniform => vec![1.0 / m as f64; m],
        IbuStart::Empirical => noisy.clone(),
    };
    let mut out = vec![rho.clone()];
    let mut next = vec![0.0; m];
    for _ in 0..cfg.iterations {
        next.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..m {
            if noisy[i] == 0.0 {
                continue;
            }
            let row = &lambda[i * m..(i + 1) * m];
            let denom: f64 = row.iter().zip(&rho).map(|(l, r)| l * r).sum();
            if denom.is_nan() || denom <= 0.0 {
                return Err(Error::DegenerateLikelihood {
                    outcome: strings[i].to_string(),
                });
            }
            let w = noisy[i] / denom;
            for j in 0..m {
                next[j] += w * row[j] * rho[j];
            }
        }
        std::mem::swap(&mut rho, &mut next);
        out.push(rho.clone());
    }
    Ok(out)
}

/// Inverse of a 2x2 matrix, `None` when `|det| <= 1e-9`.
fn inverse_2x2(m: [[f64; 2]; 2]) -> std::result::Result<[[f64; 2]; 2], f64> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() <= 1e-9 {
        return Err(det);
    }
    Ok([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
}

/// Noise-matrix inversion on the active set followed by projection onto the
/// probability simplex. Inputs that invert to a physical vector are returned
/// unprojected.
pub fn mim(tally: &OutcomeTally, model: &NoiseModel) -> Result<BTreeMap<BitString, f64>> {
    require_binary(tally, model)?;
    let inverses = model
        .confusions()?
        .iter()
        .enumerate()
        .map(|(q, c)| inverse_2x2(c.entries()).map_err(|det| Error::Singular { qubit: q, det }))
        .collect::<Result<Vec<_>>>()?;
    let strings: Vec<&BitString> = tally.active().iter().map(|(s, _)| s).collect();
    let noisy = tally.empirical_frequencies();
    let v: Vec<f64> = strings
        .iter()
        .map(|sj| {
            strings
                .iter()
                .zip(&noisy)
                .map(|(si, &p)| {
                    let mut inv = 1.0;
                    for ((m, &tj), &oi) in inverses.iter().zip(sj.bits()).zip(si.bits()) {
                        inv *= m[tj as usize][oi as usize];
                    }
                    inv * p
                })
                .sum()
        })
        .collect();
    let physical = v.iter().all(|&x| x >= 0.0) && (v.iter().sum::<f64>() - 1.0).abs() <= 1e-12;
    let out = if physical { v } else { project_simplex(&v) };
    Ok(to_map(tally, out))
}

/// Euclidean projection onto `{x : x >= 0, sum x = 1}` by sorting and
/// thresholding.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    assert!(!v.is_empty(), "cannot project an empty vector");
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    let mut x: Vec<f64> = v.iter().map(|&vi| (vi - theta).max(0.0)).collect();
    // Put the rounding residue on the largest coordinate.
    let residue = 1.0 - x.iter().sum::<f64>();
    let imax = (0..x.len()).max_by(|&a, &b| x[a].total_cmp(&x[b])).unwrap();
    x[imax] = (x[imax] + residue).max(0.0);
    x
}
