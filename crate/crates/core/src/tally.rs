//! Shot grouping and subspace reduction.
//!
//! Shots are grouped by [`OutcomeKey`]: the assigned bits in binary mode,
//! the per-qubit bin indices in analog mode. Likelihoods are constant on a
//! key, so a mitigation run only ever loops over distinct keys.
//!
//! The *active set* is the set of bitstrings that mitigation may assign
//! population to. It is the set of observed strings in binary mode and the
//! set of median-edge-thresholded keys in analog mode.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::bits::{BitString, OutcomeKey};
use crate::error::{Error, Result};
use crate::noise_model::{Mode, NoiseModel};

/// One experiment shot.
#[derive(Clone, Debug, PartialEq)]
pub enum Shot {
    Bits(BitString),
    /// Q value of every qubit.
    Analog(Vec<f64>),
}

impl Shot {
    pub fn mode(&self) -> Mode {
        match self {
            Shot::Bits(_) => Mode::Binary,
            Shot::Analog(_) => Mode::Analog,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Shot::Bits(b) => b.len(),
            Shot::Analog(q) => q.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Grouping key of a shot under `model`.
pub fn outcome_key(shot: &Shot, model: &NoiseModel) -> Result<OutcomeKey> {
    if shot.mode() != model.mode() {
        return Err(Error::ModeMismatch {
            context: "shot record",
            expected: model.mode(),
            found: shot.mode(),
        });
    }
    if shot.len() != model.n_qubits() {
        return Err(Error::contract(format!(
            "shot has {} qubits, model has {}",
            shot.len(),
            model.n_qubits()
        )));
    }
    Ok(match shot {
        Shot::Bits(b) => OutcomeKey::from(b),
        Shot::Analog(q) => {
            let rfs = model.responses()?;
            OutcomeKey(q.iter().zip(rfs).map(|(&v, rf)| rf.bin_index(v) as u16).collect())
        }
    })
}

/// Grouped shot counts plus the active bitstring set derived from them.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeTally {
    mode: Mode,
    n_qubits: usize,
    groups: Vec<(OutcomeKey, u64)>,
    active: Vec<(BitString, u64)>,
    total: u64,
}

impl OutcomeTally {
    /// Builds a tally from `(key, count)` pairs; repeated keys accumulate and
    /// zero counts are dropped.
    pub fn from_key_counts<I>(model: &NoiseModel, counts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (OutcomeKey, u64)>,
    {
        let mut groups: BTreeMap<OutcomeKey, u64> = BTreeMap::new();
        for (key, c) in counts {
            if c > 0 {
                *groups.entry(key).or_default() += c;
            }
        }
        Self::from_groups(model, groups)
    }

    /// Binary tally from explicit bitstring counts, without a model.
    pub fn from_bit_counts<I>(counts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (BitString, u64)>,
    {
        let mut groups: BTreeMap<OutcomeKey, u64> = BTreeMap::new();
        let mut n_qubits = None;
        for (s, c) in counts {
            if *n_qubits.get_or_insert(s.len()) != s.len() {
                return Err(Error::contract("bitstrings of different lengths in one tally"));
            }
            if c > 0 {
                *groups.entry(OutcomeKey::from(&s)).or_default() += c;
            }
        }
        let n_qubits = n_qubits.ok_or_else(|| Error::contract("empty tally"))?;
        let model = NoiseModel::binary(vec![crate::SingleQubitConfusion::identity(); n_qubits]);
        Self::from_groups(&model, groups)
    }

    fn from_groups(model: &NoiseModel, groups: BTreeMap<OutcomeKey, u64>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::contract("tally needs at least one shot"));
        }
        let mut active: BTreeMap<BitString, u64> = BTreeMap::new();
        let mut total = 0u64;
        for (key, &c) in &groups {
            *active.entry(model.key_to_bits(key)?).or_default() += c;
            total += c;
        }
        Ok(Self {
            mode: model.mode(),
            n_qubits: model.n_qubits(),
            groups: groups.into_iter().collect(),
            active: active.into_iter().collect(),
            total,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Distinct outcome keys with their counts, sorted by key.
    pub fn groups(&self) -> &[(OutcomeKey, u64)] {
        &self.groups
    }

    /// Active bitstrings with their (thresholded) counts, sorted.
    pub fn active(&self) -> &[(BitString, u64)] {
        &self.active
    }

    /// Number of distinct outcome keys, `G`.
    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    /// Size of the active set, `M`.
    pub fn n_active(&self) -> usize {
        self.active.len()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Raw (thresholded) count of a bitstring, 0 if unobserved.
    pub fn count_of(&self, s: &BitString) -> u64 {
        self.active
            .binary_search_by(|(k, _)| k.cmp(s))
            .map_or(0, |i| self.active[i].1)
    }

    /// Empirical frequencies `n_k / N` over the active set, aligned with
    /// [`active`](Self::active).
    pub fn empirical_frequencies(&self) -> Vec<f64> {
        let n = self.total as f64;
        self.active.iter().map(|&(_, c)| c as f64 / n).collect()
    }

    /// [`empirical_frequencies`](Self::empirical_frequencies) keyed by bitstring.
    pub fn empirical_map(&self) -> BTreeMap<BitString, f64> {
        self.active
            .iter()
            .map(|(s, _)| s.clone())
            .zip(self.empirical_frequencies())
            .collect()
    }

    /// Binary projection: every key replaced by its thresholded bitstring.
    pub fn to_binary(&self) -> OutcomeTally {
        OutcomeTally {
            mode: Mode::Binary,
            n_qubits: self.n_qubits,
            groups: self.active.iter().map(|(s, c)| (OutcomeKey::from(s), *c)).collect(),
            active: self.active.clone(),
            total: self.total,
        }
    }

    /// Combines two tallies built under the same model.
    pub fn merge(&self, other: &OutcomeTally) -> Result<OutcomeTally> {
        if self.mode != other.mode || self.n_qubits != other.n_qubits {
            return Err(Error::contract("cannot merge tallies of different shape"));
        }
        let mut groups: BTreeMap<OutcomeKey, u64> = self.groups.iter().cloned().collect();
        for (k, c) in &other.groups {
            *groups.entry(k.clone()).or_default() += c;
        }
        let mut active: BTreeMap<BitString, u64> = self.active.iter().cloned().collect();
        for (s, c) in &other.active {
            *active.entry(s.clone()).or_default() += c;
        }
        Ok(OutcomeTally {
            mode: self.mode,
            n_qubits: self.n_qubits,
            groups: groups.into_iter().collect(),
            active: active.into_iter().collect(),
            total: self.total + other.total,
        })
    }

    /// Expands a binary tally back into individual shots, in key order.
    pub fn expand_binary(&self) -> Result<Vec<Shot>> {
        if self.mode != Mode::Binary {
            return Err(Error::ModeMismatch {
                context: "tally",
                expected: Mode::Binary,
                found: self.mode,
            });
        }
        Ok(self
            .active
            .iter()
            .flat_map(|(s, c)| std::iter::repeat_n(Shot::Bits(s.clone()), *c as usize))
            .collect())
    }
}

/// Groups shots under `model` and derives the active set.
pub fn tally_shots(shots: &[Shot], model: &NoiseModel) -> Result<OutcomeTally> {
    tally_weighted(shots.iter().map(|s| (s, 1)), model)
}

/// Like [`tally_shots`] for `(shot, multiplicity)` pairs.
pub fn tally_weighted<'a, I>(shots: I, model: &NoiseModel) -> Result<OutcomeTally>
where
    I: IntoIterator<Item = (&'a Shot, u64)>,
{
    let mut groups: BTreeMap<OutcomeKey, u64> = BTreeMap::new();
    for (shot, c) in shots {
        let key = outcome_key(shot, model)?;
        if c > 0 {
            *groups.entry(key).or_default() += c;
        }
    }
    OutcomeTally::from_groups(model, groups)
}

/// One line of a shot JSONL file. Binary shots carry `bits` (optionally with
/// a `count`), analog shots carry `q`. An `i` quadrature is accepted and
/// ignored.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ShotLine {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bits: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u64>,
    #[serde(default, skip_serializing)]
    pub i: Option<Vec<f64>>,
}

impl ShotLine {
    pub fn into_shot(self) -> Result<(Shot, u64)> {
        let shot = match (self.bits, self.q) {
            (Some(b), None) => Shot::Bits(b.parse()?),
            (None, Some(q)) => {
                if self.count.is_some() {
                    return Err(Error::contract("counts are only accepted for binary shots"));
                }
                if q.iter().any(|v| !v.is_finite()) {
                    return Err(Error::contract("analog shot values must be finite"));
                }
                Shot::Analog(q)
            }
            _ => return Err(Error::contract("shot line needs exactly one of \"bits\" or \"q\"")),
        };
        Ok((shot, self.count.unwrap_or(1)))
    }
}

impl From<&Shot> for ShotLine {
    fn from(s: &Shot) -> Self {
        match s {
            Shot::Bits(b) => ShotLine {
                bits: Some(b.to_string()),
                ..Default::default()
            },
            Shot::Analog(q) => ShotLine {
                q: Some(q.clone()),
                ..Default::default()
            },
        }
    }
}

/// Reads a shot JSONL stream; blank lines are skipped.
pub fn read_shots<R: BufRead>(reader: R) -> Result<Vec<(Shot, u64)>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ShotLine = serde_json::from_str(&line)
            .map_err(|e| Error::contract(format!("shot line {}: {e}", n + 1)))?;
        out.push(parsed.into_shot()?);
    }
    if out.is_empty() {
        return Err(Error::contract("shot file contains no shots"));
    }
    Ok(out)
}

pub fn write_shots<W: Write>(mut writer: W, shots: &[Shot]) -> Result<()> {
    for s in shots {
        serde_json::to_writer(&mut writer, &ShotLine::from(s))?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise_model::{ResponseFunction, SingleQubitConfusion};

    fn bits(s: &str) -> Shot {
        Shot::Bits(s.parse().unwrap())
    }

    fn ident(n: usize) -> NoiseModel {
        NoiseModel::binary(vec![SingleQubitConfusion::identity(); n])
    }

    #[test]
    fn counting() {
        let t = tally_shots(&[bits("01"), bits("01"), bits("11")], &ident(2)).unwrap();
        assert_eq!(t.n_active(), 2);
        assert_eq!(t.total(), 3);
        assert_eq!(t.count_of(&"01".parse().unwrap()), 2);
        assert_eq!(t.count_of(&"11".parse().unwrap()), 1);
        assert_eq!(t.count_of(&"00".parse().unwrap()), 0);
        let r = t.empirical_frequencies();
        assert_eq!(r, vec![2.0 / 3.0, 1.0 / 3.0]);
    }

    #[test]
    fn single_key() {
        let n = 24;
        let shots = vec![Shot::Bits(BitString::zeros(n)); 1000];
        let t = tally_shots(&shots, &ident(n)).unwrap();
        assert_eq!(t.n_active(), 1);
        assert_eq!(t.n_groups(), 1);
        assert_eq!(t.empirical_frequencies(), vec![1.0]);
    }

    #[test]
    fn uniform_frequencies() {
        let shots: Vec<_> = ["00", "01", "10", "11"].iter().map(|s| bits(s)).collect();
        let t = tally_shots(&shots, &ident(2)).unwrap();
        assert_eq!(t.empirical_frequencies(), vec![0.25; 4]);
    }

    #[test]
    fn analog_grouping_and_thresholding() {
        let edges = vec![-2.0, -1.0, 0.0, 1.0, 2.0];
        let rf = ResponseFunction::new(edges, [vec![0.25; 4], vec![0.25; 4]]).unwrap();
        let model = NoiseModel::analog(vec![rf.clone(), rf]);
        let shots = vec![
            Shot::Analog(vec![-1.5, 1.7]),
            Shot::Analog(vec![-3.0, 5.0]),
            Shot::Analog(vec![-0.5, 0.2]),
        ];
        let t = tally_shots(&shots, &model).unwrap();
        assert_eq!(t.n_groups(), 2);
        assert_eq!(t.groups()[0], (OutcomeKey(vec![0, 3]), 2));
        assert_eq!(t.groups()[1], (OutcomeKey(vec![1, 2]), 1));
        assert_eq!(t.n_active(), 1);
        assert_eq!(t.active()[0], ("01".parse().unwrap(), 3));
        let b = t.to_binary();
        assert_eq!(b.mode(), Mode::Binary);
        assert_eq!(b.n_groups(), 1);
    }

    #[test]
    fn mismatches() {
        let rf = ResponseFunction::new(vec![0.0, 1.0, 2.0], [vec![0.5; 2], vec![0.5; 2]]).unwrap();
        let analog = NoiseModel::analog(vec![rf]);
        assert!(matches!(
            tally_shots(&[bits("0")], &analog),
            Err(Error::ModeMismatch { .. })
        ));
        assert!(matches!(tally_shots(&[bits("01")], &ident(3)), Err(Error::Contract(_))));
        assert!(tally_shots(&[], &ident(1)).is_err());
    }

    #[test]
    fn merge_is_commutative() {
        let m = ident(2);
        let a = tally_shots(&[bits("01"), bits("00")], &m).unwrap();
        let b = tally_shots(&[bits("01"), bits("11")], &m).unwrap();
        let ab = a.merge(&b).unwrap();
        assert_eq!(ab, b.merge(&a).unwrap());
        assert_eq!(ab, tally_shots(&[bits("01"), bits("00"), bits("01"), bits("11")], &m).unwrap());
    }

    #[test]
    fn jsonl_parsing() {
        let text = "{\"bits\":\"0101\"}\n\n{\"bits\":\"0101\",\"count\":37}\n{\"q\":[-1.02,0.87],\"i\":[0.1,0.2]}\n";
        let shots = read_shots(text.as_bytes()).unwrap();
        assert_eq!(shots.len(), 3);
        assert_eq!(shots[1], (bits("0101"), 37));
        assert_eq!(shots[2], (Shot::Analog(vec![-1.02, 0.87]), 1));
        assert!(read_shots("{\"bits\":\"01\",\"q\":[1.0]}".as_bytes()).is_err());
        assert!(read_shots("".as_bytes()).is_err());

        let mut buf = Vec::new();
        write_shots(&mut buf, &[bits("10"), Shot::Analog(vec![0.1, -2.5])]).unwrap();
        let back: Vec<Shot> = read_shots(buf.as_slice()).unwrap().into_iter().map(|(s, _)| s).collect();
        assert_eq!(back, vec![bits("10"), Shot::Analog(vec![0.1, -2.5])]);
    }
}
