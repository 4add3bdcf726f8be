//! Detector models from reset-then-measure and flip-then-measure records.
//!
//! All histograms use add-one (Laplace) smoothing so that every produced
//! probability is strictly positive.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise_model::{bin_index_in, Mode, NoiseModel, ResponseFunction, SingleQubitConfusion};

/// Default number of shots per calibration experiment.
pub const DEFAULT_CALIBRATION_SHOTS: usize = 100_000;

/// Calibration samples of one experiment: assigned bits or raw Q values.
#[derive(Clone, Debug, PartialEq)]
pub enum Samples {
    Bits(Vec<u8>),
    Analog(Vec<f64>),
}

impl Samples {
    pub fn len(&self) -> usize {
        match self {
            Samples::Bits(v) => v.len(),
            Samples::Analog(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Shots recorded after preparing one qubit in a known basis state.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationRecord {
    pub qubit_id: u32,
    pub prepared_state: u8,
    pub samples: Samples,
}

impl CalibrationRecord {
    pub fn new(qubit_id: u32, prepared_state: u8, samples: Samples) -> Result<Self> {
        if prepared_state > 1 {
            return Err(Error::contract(format!("prepared state {prepared_state} is not 0 or 1")));
        }
        if let Samples::Bits(b) = &samples {
            if b.iter().any(|&x| x > 1) {
                return Err(Error::contract("binary calibration samples must be 0 or 1"));
            }
        }
        Ok(Self {
            qubit_id,
            prepared_state,
            samples,
        })
    }

    pub fn n_shots(&self) -> usize {
        self.samples.len()
    }
}

fn check_pair(rec0: &CalibrationRecord, rec1: &CalibrationRecord) -> Result<()> {
    if rec0.prepared_state != 0 || rec1.prepared_state != 1 {
        return Err(Error::contract(
            "calibration expects records prepared in |0> and |1>, in that order",
        ));
    }
    if rec0.qubit_id != rec1.qubit_id {
        return Err(Error::contract(format!(
            "calibration records belong to different qubits ({} and {})",
            rec0.qubit_id, rec1.qubit_id
        )));
    }
    if rec0.samples.is_empty() || rec1.samples.is_empty() {
        return Err(Error::contract(format!("qubit {} has an empty calibration record", rec0.qubit_id)));
    }
    Ok(())
}

/// Smoothed 2x2 confusion matrix, `entries[i][j] = (n_ij + 1) / (N_j + 2)`.
pub fn calibrate_binary(rec0: &CalibrationRecord, rec1: &CalibrationRecord) -> Result<SingleQubitConfusion> {
    check_pair(rec0, rec1)?;
    let mut entries = [[0.0; 2]; 2];
    for (j, rec) in [rec0, rec1].into_iter().enumerate() {
        let Samples::Bits(bits) = &rec.samples else {
            return Err(Error::contract("binary calibration needs bit samples"));
        };
        let ones = bits.iter().filter(|&&b| b == 1).count();
        let zeros = bits.len() - ones;
        let denom = (bits.len() + 2) as f64;
        entries[0][j] = (zeros + 1) as f64 / denom;
        entries[1][j] = (ones + 1) as f64 / denom;
    }
    SingleQubitConfusion::new(entries)
}

/// Equal-width histogram response function over the pooled sample range,
/// `lambda[j][b] = (n_jb + 1) / (N_j + n_bin)`.
pub fn calibrate_analog(
    rec0: &CalibrationRecord,
    rec1: &CalibrationRecord,
    n_bin: usize,
) -> Result<ResponseFunction> {
    check_pair(rec0, rec1)?;
    if n_bin < 2 {
        return Err(Error::contract(format!("n_bin must be at least 2, got {n_bin}")));
    }
    let (Samples::Analog(s0), Samples::Analog(s1)) = (&rec0.samples, &rec1.samples) else {
        return Err(Error::contract("analog calibration needs real-valued samples"));
    };
    if s0.iter().chain(s1).any(|q| !q.is_finite()) {
        return Err(Error::contract("analog calibration samples must be finite"));
    }
    let (lo, hi) = s0
        .iter()
        .chain(s1)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &q| (lo.min(q), hi.max(q)));
    if hi <= lo {
        return Err(Error::DegenerateCalibration(format!(
            "qubit {}: all calibration samples equal {lo}",
            rec0.qubit_id
        )));
    }
    let width = hi - lo;
    let mut edges: Vec<f64> = (0..=n_bin).map(|b| lo + width * (b as f64 / n_bin as f64)).collect();
    edges[n_bin] = hi;
    if edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::DegenerateCalibration(format!(
            "qubit {}: sample range too narrow for {n_bin} bins",
            rec0.qubit_id
        )));
    }

    let mut lambda = [vec![0.0; n_bin], vec![0.0; n_bin]];
    for (j, samples) in [s0, s1].into_iter().enumerate() {
        let mut counts = vec![0usize; n_bin];
        for &q in samples {
            counts[bin_index_in(&edges, q)] += 1;
        }
        let denom = (samples.len() + n_bin) as f64;
        for (l, c) in lambda[j].iter_mut().zip(counts) {
            *l = (c + 1) as f64 / denom;
        }
    }
    ResponseFunction::new(edges, lambda)
}

/// One line of a calibration JSONL file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CalibrationLine {
    pub qubit_id: u32,
    pub prepared_state: u8,
    pub samples: Vec<f64>,
}

impl CalibrationLine {
    /// Interprets the samples as bits (`binary == true`) or Q values.
    pub fn into_record(self, binary: bool) -> Result<CalibrationRecord> {
        let samples = if binary {
            Samples::Bits(
                self.samples
                    .iter()
                    .map(|&x| match x {
                        0.0 => Ok(0u8),
                        1.0 => Ok(1u8),
                        _ => Err(Error::contract(format!("binary sample {x} is not 0 or 1"))),
                    })
                    .collect::<Result<_>>()?,
            )
        } else {
            Samples::Analog(self.samples)
        };
        CalibrationRecord::new(self.qubit_id, self.prepared_state, samples)
    }
}

impl From<&CalibrationRecord> for CalibrationLine {
    fn from(r: &CalibrationRecord) -> Self {
        let samples = match &r.samples {
            Samples::Bits(b) => b.iter().map(|&x| x as f64).collect(),
            Samples::Analog(q) => q.clone(),
        };
        CalibrationLine {
            qubit_id: r.qubit_id,
            prepared_state: r.prepared_state,
            samples,
        }
    }
}

/// Groups records by qubit id (ascending) and pairs the `|0>` and `|1>`
/// experiments of each qubit. Several records for the same preparation are
/// concatenated.
pub fn pair_records(records: Vec<CalibrationRecord>) -> Result<Vec<(CalibrationRecord, CalibrationRecord)>> {
    use std::collections::BTreeMap;
    let mut by_qubit: BTreeMap<u32, [Option<CalibrationRecord>; 2]> = BTreeMap::new();
    for rec in records {
        let slot = &mut by_qubit.entry(rec.qubit_id).or_default()[rec.prepared_state as usize];
        match slot {
            None => *slot = Some(rec),
            Some(existing) => match (&mut existing.samples, rec.samples) {
                (Samples::Bits(a), Samples::Bits(b)) => a.extend(b),
                (Samples::Analog(a), Samples::Analog(b)) => a.extend(b),
                _ => return Err(Error::contract("mixed binary and analog calibration samples")),
            },
        }
    }
    by_qubit
        .into_iter()
        .map(|(id, [r0, r1])| match (r0, r1) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(Error::contract(format!("qubit {id} lacks a |0> or |1> calibration record"))),
        })
        .collect()
}

/// Calibrates every qubit found in `records` and assembles the register
/// model, qubits ordered by id. `n_bin` is ignored in binary mode.
pub fn calibrate_model(records: Vec<CalibrationRecord>, mode: Mode, n_bin: usize) -> Result<NoiseModel> {
    let pairs = pair_records(records)?;
    let ids: Vec<u32> = pairs.iter().map(|(r, _)| r.qubit_id).collect();
    let model = match mode {
        Mode::Binary => NoiseModel::binary(
            pairs
                .iter()
                .map(|(r0, r1)| calibrate_binary(r0, r1))
                .collect::<Result<_>>()?,
        ),
        Mode::Analog => NoiseModel::analog(
            pairs
                .iter()
                .map(|(r0, r1)| calibrate_analog(r0, r1, n_bin))
                .collect::<Result<_>>()?,
        ),
    };
    model.with_qubit_ids(ids)
}
