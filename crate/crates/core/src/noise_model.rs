//! Per-qubit detector models and lazily evaluated multi-qubit likelihoods.
//!
//! Readout noise is assumed uncorrelated, so the `2^N_q x 2^N_q` assignment
//! matrix is the tensor product of per-qubit factors. It is never built:
//! [`NoiseModel::likelihood_entry`] multiplies one factor per qubit on demand.
//!
//! Two detector kinds are supported and a model holds only one of them:
//!
//! * binary: a 2x2 column-stochastic [`SingleQubitConfusion`] with
//!   `entries[i][j] = Pr(assigned i | true j)`;
//! * analog: a binned [`ResponseFunction`] over the Q quadrature with
//!   `lambda[j][b] = Pr(Q in bin b | true j)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bits::{BitString, OutcomeKey};
use crate::error::{Error, Result};

/// Tolerance for row/column sums of stochastic tables.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Whether shots carry assigned bits or analog detector values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Binary,
    Analog,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Binary => "binary",
            Mode::Analog => "analog",
        })
    }
}

/// Single-qubit assignment matrix, `entries[assigned][true]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingleQubitConfusion {
    entries: [[f64; 2]; 2],
}

impl SingleQubitConfusion {
    pub fn new(entries: [[f64; 2]; 2]) -> Result<Self> {
        for row in &entries {
            for &e in row {
                if !(0.0..=1.0).contains(&e) {
                    return Err(Error::contract(format!("confusion entry {e} outside [0, 1]")));
                }
            }
        }
        let sums = [entries[0][0] + entries[1][0], entries[0][1] + entries[1][1]];
        for (j, sum) in sums.into_iter().enumerate() {
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::contract(format!("confusion column {j} sums to {sum}, not 1")));
            }
        }
        Ok(Self { entries })
    }

    pub fn identity() -> Self {
        Self {
            entries: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    /// Symmetric matrix with the given probability of correct assignment.
    pub fn symmetric(fidelity: f64) -> Result<Self> {
        Self::new([[fidelity, 1.0 - fidelity], [1.0 - fidelity, fidelity]])
    }

    /// `Pr(assigned | true_state)`.
    #[inline]
    pub fn entry(&self, assigned: usize, true_state: usize) -> f64 {
        self.entries[assigned][true_state]
    }

    pub fn entries(&self) -> [[f64; 2]; 2] {
        self.entries
    }

    /// Probability of assigning the prepared state correctly.
    pub fn fidelity(&self, state: usize) -> f64 {
        self.entries[state][state]
    }

    pub fn determinant(&self) -> f64 {
        let e = &self.entries;
        e[0][0] * e[1][1] - e[0][1] * e[1][0]
    }
}

/// Binned analog likelihood of one qubit along the Q axis.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponseFunction {
    bin_edges: Vec<f64>,
    lambda: [Vec<f64>; 2],
}

impl ResponseFunction {
    /// `bin_edges` must be strictly ascending with `lambda[j].len() + 1`
    /// entries; each `lambda` row must be a probability vector.
    pub fn new(bin_edges: Vec<f64>, lambda: [Vec<f64>; 2]) -> Result<Self> {
        if bin_edges.len() < 2 {
            return Err(Error::contract("response function needs at least one bin"));
        }
        if bin_edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::contract("bin edges must be finite"));
        }
        if bin_edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::contract("bin edges must be strictly ascending"));
        }
        let n_bins = bin_edges.len() - 1;
        for (j, row) in lambda.iter().enumerate() {
            if row.len() != n_bins {
                return Err(Error::contract(format!(
                    "lambda row {j} has {} entries for {n_bins} bins",
                    row.len()
                )));
            }
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::contract(format!("lambda row {j} has entries outside [0, 1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::contract(format!("lambda row {j} sums to {sum}, not 1")));
            }
        }
        Ok(Self { bin_edges, lambda })
    }

    pub fn n_bins(&self) -> usize {
        self.bin_edges.len() - 1
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn lambda(&self, state: usize) -> &[f64] {
        &self.lambda[state]
    }

    /// `Pr(bin | true_state)`.
    #[inline]
    pub fn mass(&self, state: usize, bin: usize) -> f64 {
        self.lambda[state][bin]
    }

    /// Half-open bin lookup, `[edge_b, edge_{b+1})`. Values outside the
    /// calibrated range clamp to the first or last bin.
    pub fn bin_index(&self, q: f64) -> usize {
        bin_index_in(&self.bin_edges, q)
    }

    /// Index into `bin_edges` of the edge used to threshold analog values
    /// into bits: bins below it assign `0`, bins at or above it assign `1`.
    pub fn median_edge_index(&self) -> usize {
        self.n_bins().div_ceil(2).max(1).min(self.n_bins())
    }

    pub fn median_edge(&self) -> f64 {
        self.bin_edges[self.median_edge_index()]
    }

    /// Bit assigned to a bin by the median-edge threshold.
    #[inline]
    pub fn bin_to_bit(&self, bin: usize) -> u8 {
        u8::from(bin >= self.median_edge_index())
    }

    /// Bit assigned to a raw Q value by the median-edge threshold.
    pub fn assign_bit(&self, q: f64) -> u8 {
        self.bin_to_bit(self.bin_index(q))
    }

    /// Binary confusion matrix induced by assigning `0` iff `Q < threshold`.
    ///
    /// The threshold snaps to the nearest bin edge (lower edge on ties) and
    /// the bin masses on either side are aggregated.
    pub fn confusion_from_response(&self, threshold: f64) -> Result<SingleQubitConfusion> {
        let first = self.bin_edges[0];
        let last = *self.bin_edges.last().unwrap();
        if !(first..=last).contains(&threshold) {
            return Err(Error::contract(format!(
                "threshold {threshold} outside calibrated range [{first}, {last}]"
            )));
        }
        let mut edge = 0;
        for (k, &e) in self.bin_edges.iter().enumerate() {
            if (e - threshold).abs() < (self.bin_edges[edge] - threshold).abs() {
                edge = k;
            }
        }
        Ok(self.confusion_at_edge(edge))
    }

    fn confusion_at_edge(&self, edge: usize) -> SingleQubitConfusion {
        let mut entries = [[0.0; 2]; 2];
        for (j, row) in self.lambda.iter().enumerate() {
            entries[0][j] = row[..edge].iter().sum();
            entries[1][j] = row[edge..].iter().sum();
        }
        SingleQubitConfusion { entries }
    }
}

/// Detector models for every qubit of a register, all of one [`Mode`].
#[derive(Clone, Debug, PartialEq)]
pub enum Detectors {
    Binary(Vec<SingleQubitConfusion>),
    Analog(Vec<ResponseFunction>),
}

/// Tensor-product readout model over `N_q` qubits.
///
/// Entry `k` of the detector list models character `k` of every bitstring.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    qubit_ids: Vec<u32>,
    detectors: Detectors,
}

impl NoiseModel {
    pub fn binary(per_qubit: Vec<SingleQubitConfusion>) -> Self {
        let qubit_ids = (0..per_qubit.len() as u32).collect();
        Self {
            qubit_ids,
            detectors: Detectors::Binary(per_qubit),
        }
    }

    pub fn analog(per_qubit: Vec<ResponseFunction>) -> Self {
        let qubit_ids = (0..per_qubit.len() as u32).collect();
        Self {
            qubit_ids,
            detectors: Detectors::Analog(per_qubit),
        }
    }

    /// Replaces the default `0..N_q` device labels.
    pub fn with_qubit_ids(mut self, ids: Vec<u32>) -> Result<Self> {
        if ids.len() != self.n_qubits() {
            return Err(Error::contract(format!(
                "{} qubit ids for {} detectors",
                ids.len(),
                self.n_qubits()
            )));
        }
        self.qubit_ids = ids;
        Ok(self)
    }

    pub fn mode(&self) -> Mode {
        match self.detectors {
            Detectors::Binary(_) => Mode::Binary,
            Detectors::Analog(_) => Mode::Analog,
        }
    }

    pub fn n_qubits(&self) -> usize {
        match &self.detectors {
            Detectors::Binary(v) => v.len(),
            Detectors::Analog(v) => v.len(),
        }
    }

    pub fn qubit_ids(&self) -> &[u32] {
        &self.qubit_ids
    }

    pub fn detectors(&self) -> &Detectors {
        &self.detectors
    }

    /// Number of distinct outcome values of qubit `q` (2 in binary mode).
    pub fn outcome_levels(&self, q: usize) -> usize {
        match &self.detectors {
            Detectors::Binary(_) => 2,
            Detectors::Analog(v) => v[q].n_bins(),
        }
    }

    /// `(Pr(value | 0), Pr(value | 1))` for one qubit.
    #[inline]
    pub fn factor_pair(&self, q: usize, value: u16) -> Result<[f64; 2]> {
        let v = value as usize;
        let levels = self.outcome_levels(q);
        if v >= levels {
            return Err(Error::contract(format!(
                "outcome value {v} of qubit {q} out of range (< {levels})"
            )));
        }
        Ok(match &self.detectors {
            Detectors::Binary(m) => [m[q].entry(v, 0), m[q].entry(v, 1)],
            Detectors::Analog(r) => [r[q].mass(0, v), r[q].mass(1, v)],
        })
    }

    /// Per-qubit factor pairs for one outcome key.
    pub fn outcome_factors(&self, key: &OutcomeKey) -> Result<Vec<[f64; 2]>> {
        self.check_len(key.len(), "outcome key")?;
        key.as_slice()
            .iter()
            .enumerate()
            .map(|(q, &v)| self.factor_pair(q, v))
            .collect()
    }

    /// `Pr(outcome | true_string)` as a product of per-qubit factors.
    pub fn likelihood_entry(&self, key: &OutcomeKey, true_string: &BitString) -> Result<f64> {
        self.check_len(true_string.len(), "true string")?;
        let factors = self.outcome_factors(key)?;
        Ok(product_over(&factors, true_string.bits()))
    }

    /// Bitstring obtained by assigning each qubit of `key`; the identity in
    /// binary mode, median-edge thresholding in analog mode.
    pub fn key_to_bits(&self, key: &OutcomeKey) -> Result<BitString> {
        self.check_len(key.len(), "outcome key")?;
        let bits = match &self.detectors {
            Detectors::Binary(_) => key
                .as_slice()
                .iter()
                .map(|&v| {
                    if v > 1 {
                        Err(Error::contract(format!("binary outcome value {v} is not a bit")))
                    } else {
                        Ok(v as u8)
                    }
                })
                .collect::<Result<Vec<_>>>()?,
            Detectors::Analog(rfs) => key
                .as_slice()
                .iter()
                .zip(rfs)
                .map(|(&b, rf)| {
                    if b as usize >= rf.n_bins() {
                        Err(Error::contract(format!("bin index {b} out of range")))
                    } else {
                        Ok(rf.bin_to_bit(b as usize))
                    }
                })
                .collect::<Result<Vec<_>>>()?,
        };
        BitString::from_bits(bits)
    }

    /// The binary model induced by median-edge thresholding. Binary models
    /// are returned unchanged.
    pub fn to_binary(&self) -> NoiseModel {
        match &self.detectors {
            Detectors::Binary(_) => self.clone(),
            Detectors::Analog(rfs) => NoiseModel {
                qubit_ids: self.qubit_ids.clone(),
                detectors: Detectors::Binary(
                    rfs.iter().map(|rf| rf.confusion_at_edge(rf.median_edge_index())).collect(),
                ),
            },
        }
    }

    /// Confusion matrices of a binary model.
    pub fn confusions(&self) -> Result<&[SingleQubitConfusion]> {
        match &self.detectors {
            Detectors::Binary(v) => Ok(v),
            Detectors::Analog(_) => Err(Error::ModeMismatch {
                context: "noise model",
                expected: Mode::Binary,
                found: Mode::Analog,
            }),
        }
    }

    /// Response functions of an analog model.
    pub fn responses(&self) -> Result<&[ResponseFunction]> {
        match &self.detectors {
            Detectors::Analog(v) => Ok(v),
            Detectors::Binary(_) => Err(Error::ModeMismatch {
                context: "noise model",
                expected: Mode::Analog,
                found: Mode::Binary,
            }),
        }
    }

    fn check_len(&self, len: usize, what: &str) -> Result<()> {
        if len != self.n_qubits() {
            return Err(Error::contract(format!(
                "{what} has length {len}, model has {} qubits",
                self.n_qubits()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&DetectorFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: DetectorFile = serde_json::from_str(s)?;
        file.try_into()
    }
}

/// Bin lookup over ascending `edges` with clamping; see
/// [`ResponseFunction::bin_index`].
pub(crate) fn bin_index_in(edges: &[f64], q: f64) -> usize {
    // Count of interior edges <= q.
    edges[1..edges.len() - 1].partition_point(|&e| e <= q)
}

/// Product of one factor per qubit, selected by the true bit. Shared by every
/// likelihood path so that equal factors give bit-identical products.
#[inline]
pub(crate) fn product_over(factors: &[[f64; 2]], bits: &[u8]) -> f64 {
    let mut p = 1.0;
    for (f, &b) in factors.iter().zip(bits) {
        p *= f[b as usize];
    }
    p
}

pub const DETECTOR_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct DetectorFile {
    schema_version: u32,
    mode: Mode,
    qubits: Vec<QubitBlock>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QubitBlock {
    qubit_id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix: Option<[[f64; 2]; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bin_edges: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda: Option<[Vec<f64>; 2]>,
}

impl From<&NoiseModel> for DetectorFile {
    fn from(m: &NoiseModel) -> Self {
        let qubits = match &m.detectors {
            Detectors::Binary(v) => v
                .iter()
                .zip(&m.qubit_ids)
                .map(|(c, &id)| QubitBlock {
                    qubit_id: id,
                    matrix: Some(c.entries),
                    bin_edges: None,
                    lambda: None,
                })
                .collect(),
            Detectors::Analog(v) => v
                .iter()
                .zip(&m.qubit_ids)
                .map(|(rf, &id)| QubitBlock {
                    qubit_id: id,
                    matrix: None,
                    bin_edges: Some(rf.bin_edges.clone()),
                    lambda: Some(rf.lambda.clone()),
                })
                .collect(),
        };
        DetectorFile {
            schema_version: DETECTOR_SCHEMA_VERSION,
            mode: m.mode(),
            qubits,
        }
    }
}

impl TryFrom<DetectorFile> for NoiseModel {
    type Error = Error;

    fn try_from(f: DetectorFile) -> Result<Self> {
        if f.schema_version != DETECTOR_SCHEMA_VERSION {
            return Err(Error::contract(format!(
                "unsupported detector schema version {}",
                f.schema_version
            )));
        }
        let ids = f.qubits.iter().map(|b| b.qubit_id).collect();
        let model = match f.mode {
            Mode::Binary => NoiseModel::binary(
                f.qubits
                    .into_iter()
                    .map(|b| match b.matrix {
                        Some(m) => SingleQubitConfusion::new(m),
                        None => Err(Error::contract(format!("qubit {} lacks a matrix", b.qubit_id))),
                    })
                    .collect::<Result<_>>()?,
            ),
            Mode::Analog => NoiseModel::analog(
                f.qubits
                    .into_iter()
                    .map(|b| match (b.bin_edges, b.lambda) {
                        (Some(e), Some(l)) => ResponseFunction::new(e, l),
                        _ => Err(Error::contract(format!(
                            "qubit {} lacks bin_edges or lambda",
                            b.qubit_id
                        ))),
                    })
                    .collect::<Result<_>>()?,
            ),
        };
        model.with_qubit_ids(ids)
    }
}
