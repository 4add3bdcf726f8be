//! Pairwise Bayesian mitigation over the active bitstring set.
//!
//! The full posterior over all `M` populations is out of reach, so the
//! populations are updated two at a time. For a pair `(i, j)` every other
//! population is frozen at its current estimate `R_k` and the pair budget
//! `S = R_i + R_j` is kept fixed, which leaves a one-dimensional posterior in
//! `t = rho_i` on `[0, S]`:
//!
//! ```text
//! log Pr(t | shots) = sum_g n_g * ln( L[g][i] t + L[g][j] (S - t) + C_g ) + const
//! C_g               = sum_{k != i,j} L[g][k] R_k
//! ```
//!
//! where `g` runs over distinct outcome keys with multiplicity `n_g`. With a
//! uniform prior this is the log-likelihood along the segment. It is
//! evaluated on `n_p` equally spaced points and reduced to a new `(R_i, R_j)`
//! by the configured [`Estimator`]. One *sweep* visits every unordered pair
//! once; sweeps repeat until the total variation distance between
//! consecutive population vectors drops below `epsilon`.
//!
//! The likelihood table `L[g][k]` and the totals `T[g] = sum_k L[g][k] R_k`
//! are cached, so a pair update costs `O(G)` per grid point and `O(G)` to
//! refresh the totals.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::metrics::{total_variation_aligned, ConvergenceTrace, TraceEntry};
use crate::noise_model::{product_over, NoiseModel};
use crate::tally::OutcomeTally;

/// How a pair posterior is reduced to point estimates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// Grid maximizer, smallest `t` on ties.
    #[default]
    Argmax,
    /// Posterior mean of `t`.
    Mean,
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "argmax" => Ok(Estimator::Argmax),
            "mean" => Ok(Estimator::Mean),
            _ => Err(Error::contract(format!("unknown estimator {s:?} (argmax | mean)"))),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Argmax => "argmax",
            Estimator::Mean => "mean",
        })
    }
}

/// Tuning knobs of [`mitigate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MitigationConfig {
    /// Grid points per pair posterior.
    pub n_p: usize,
    /// Exit once a sweep moves the populations by less than this (TV).
    pub epsilon: f64,
    pub max_sweeps: usize,
    pub estimator: Estimator,
    /// Lower clamp applied before taking logarithms.
    pub likelihood_floor: f64,
    /// Upper bound on `G * M` cached likelihood entries.
    pub max_cache_entries: usize,
    /// Record the TV distance of every individual pair update.
    pub trace_pairs: bool,
}

impl Default for MitigationConfig {
    fn default() -> Self {
        Self {
            n_p: 101,
            epsilon: 1e-3,
            max_sweeps: 20,
            estimator: Estimator::Argmax,
            likelihood_floor: 1e-300,
            max_cache_entries: 1 << 27,
            trace_pairs: false,
        }
    }
}

impl MitigationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_p < 3 {
            return Err(Error::contract(format!("n_p must be at least 3, got {}", self.n_p)));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::contract(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_sweeps < 1 {
            return Err(Error::contract("max_sweeps must be at least 1"));
        }
        if self.likelihood_floor.is_nan() || self.likelihood_floor <= 0.0 {
            return Err(Error::contract("likelihood_floor must be positive"));
        }
        Ok(())
    }
}

/// Mutable state of one mitigation run.
#[derive(Clone, Debug)]
pub struct MitigationState {
    active: Vec<BitString>,
    populations: Vec<f64>,
    counts: Vec<f64>,
    n_groups: usize,
    /// Column-major `G x M`: entry `(g, k)` lives at `k * G + g`.
    likelihood: Vec<f64>,
    totals: Vec<f64>,
    floor: f64,
    sweeps: usize,
    trace: ConvergenceTrace,
    pair_trace: Vec<f64>,
    started: Instant,
    // Scratch buffers reused across pair updates.
    rest: Vec<f64>,
    line: PairLine,
}

impl MitigationState {
    /// Initializes the populations from the empirical frequencies and fills
    /// the likelihood cache.
    pub fn new(tally: &OutcomeTally, model: &NoiseModel, cfg: &MitigationConfig) -> Result<Self> {
        cfg.validate()?;
        check_compatible(tally, model)?;
        let g = tally.n_groups();
        let m = tally.n_active();
        if g.checked_mul(m).is_none_or(|n| n > cfg.max_cache_entries) {
            return Err(Error::Resource {
                groups: g,
                strings: m,
                budget: cfg.max_cache_entries,
            });
        }
        let factors = tally
            .groups()
            .iter()
            .map(|(key, _)| model.outcome_factors(key))
            .collect::<Result<Vec<_>>>()?;
        let active: Vec<BitString> = tally.active().iter().map(|(s, _)| s.clone()).collect();
        let mut likelihood = vec![0.0; g * m];
        likelihood
            .par_chunks_mut(g)
            .zip(active.par_iter())
            .for_each(|(col, s)| {
                for (l, f) in col.iter_mut().zip(&factors) {
                    *l = product_over(f, s.bits());
                }
            });
        let mut state = Self {
            active,
            populations: tally.empirical_frequencies(),
            counts: tally.groups().iter().map(|&(_, c)| c as f64).collect(),
            n_groups: g,
            likelihood,
            totals: vec![0.0; g],
            floor: cfg.likelihood_floor,
            sweeps: 0,
            trace: ConvergenceTrace::new(),
            pair_trace: Vec::new(),
            started: Instant::now(),
            rest: vec![0.0; g],
            line: PairLine::default(),
        };
        state.refresh_totals();
        for (gi, &t) in state.totals.iter().enumerate() {
            if t.is_nan() || t <= 0.0 {
                let key = &tally.groups()[gi].0;
                return Err(Error::DegenerateLikelihood {
                    outcome: format!("{:?}", key.as_slice()),
                });
            }
        }
        Ok(state)
    }

    /// Active bitstrings, aligned with [`populations`](Self::populations).
    pub fn active(&self) -> &[BitString] {
        &self.active
    }

    pub fn populations(&self) -> &[f64] {
        &self.populations
    }

    pub fn n_active(&self) -> usize {
        self.active.len()
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn trace(&self) -> &ConvergenceTrace {
        &self.trace
    }

    /// Cached likelihoods of active string `k` over all groups.
    pub fn likelihood_column(&self, k: usize) -> &[f64] {
        &self.likelihood[k * self.n_groups..(k + 1) * self.n_groups]
    }

    /// Total log-likelihood `sum_g n_g ln(sum_k L[g][k] R_k)`, recomputed
    /// from scratch.
    pub fn log_likelihood(&self) -> f64 {
        let mut totals = vec![0.0; self.n_groups];
        for (k, &r) in self.populations.iter().enumerate() {
            for (t, l) in totals.iter_mut().zip(self.likelihood_column(k)) {
                *t += l * r;
            }
        }
        self.counts
            .iter()
            .zip(&totals)
            .map(|(c, t)| c * t.max(self.floor).ln())
            .sum()
    }

    /// Current populations keyed by bitstring.
    pub fn population_map(&self) -> BTreeMap<BitString, f64> {
        self.active.iter().cloned().zip(self.populations.iter().copied()).collect()
    }

    fn refresh_totals(&mut self) {
        let g = self.n_groups;
        self.totals.iter_mut().for_each(|t| *t = 0.0);
        for (k, &r) in self.populations.iter().enumerate() {
            if r == 0.0 {
                continue;
            }
            let col = &self.likelihood[k * g..(k + 1) * g];
            for (t, l) in self.totals.iter_mut().zip(col) {
                *t += l * r;
            }
        }
    }

    /// Loads the segment through `(R_i, R_j)` into `self.line`, storing the
    /// frozen remainder `C_g` in `self.rest`.
    fn load_pair(&mut self, i: usize, j: usize) -> Result<f64> {
        let g = self.n_groups;
        let (ri, rj) = (self.populations[i], self.populations[j]);
        let budget = ri + rj;
        let li = &self.likelihood[i * g..(i + 1) * g];
        let lj = &self.likelihood[j * g..(j + 1) * g];
        self.line.clear();
        for gi in 0..g {
            let c = self.totals[gi] - li[gi] * ri - lj[gi] * rj;
            if c < -1e-12 {
                return Err(Error::InternalConsistency(format!(
                    "negative frozen likelihood {c:e} for group {gi} in pair ({i}, {j})"
                )));
            }
            let c = c.max(0.0);
            self.rest[gi] = c;
            let slope = li[gi] - lj[gi];
            // Groups with equal likelihood under both strings are constant in t.
            if slope != 0.0 {
                self.line.push(self.counts[gi], c + lj[gi] * budget, slope);
            }
        }
        Ok(budget)
    }

    fn commit_pair(&mut self, i: usize, j: usize, ri: f64, rj: f64) {
        let g = self.n_groups;
        self.populations[i] = ri;
        self.populations[j] = rj;
        let li = &self.likelihood[i * g..(i + 1) * g];
        let lj = &self.likelihood[j * g..(j + 1) * g];
        for gi in 0..g {
            self.totals[gi] = self.rest[gi] + li[gi] * ri + lj[gi] * rj;
        }
    }

    fn prune(&mut self) {
        if self.populations.iter().all(|&r| r > 0.0) {
            return;
        }
        let g = self.n_groups;
        let keep: Vec<usize> = (0..self.active.len()).filter(|&k| self.populations[k] > 0.0).collect();
        let mut likelihood = Vec::with_capacity(keep.len() * g);
        for &k in &keep {
            likelihood.extend_from_slice(&self.likelihood[k * g..(k + 1) * g]);
        }
        self.likelihood = likelihood;
        self.active = keep.iter().map(|&k| self.active[k].clone()).collect();
        self.populations = keep.iter().map(|&k| self.populations[k]).collect();
    }

    /// Pair schedule of the next sweep: descending population, ties broken by
    /// bitstring order.
    fn schedule(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.active.len()).collect();
        order.sort_by(|&a, &b| {
            self.populations[b]
                .total_cmp(&self.populations[a])
                .then_with(|| self.active[a].cmp(&self.active[b]))
        });
        order
    }
}

fn check_compatible(tally: &OutcomeTally, model: &NoiseModel) -> Result<()> {
    if tally.mode() != model.mode() {
        return Err(Error::ModeMismatch {
            context: "tally",
            expected: model.mode(),
            found: tally.mode(),
        });
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

/// `t -> sum_g n_g ln(max(base_g + slope_g t, floor))`, constant groups omitted.
#[derive(Clone, Debug, Default)]
struct PairLine {
    counts: Vec<f64>,
    base: Vec<f64>,
    slope: Vec<f64>,
}

impl PairLine {
    fn clear(&mut self) {
        self.counts.clear();
        self.base.clear();
        self.slope.clear();
    }

    fn push(&mut self, count: f64, base: f64, slope: f64) {
        self.counts.push(count);
        self.base.push(base);
        self.slope.push(slope);
    }

    fn eval(&self, t: f64, floor: f64) -> f64 {
        let mut acc = 0.0;
        for ((&c, &b), &s) in self.counts.iter().zip(&self.base).zip(&self.slope) {
            acc += c * (b + s * t).max(floor).ln();
        }
        acc
    }

    fn grid(&self, budget: f64, n_p: usize, floor: f64) -> Vec<f64> {
        (0..n_p).map(|k| self.eval(grid_point(budget, k, n_p), floor)).collect()
    }

    /// Derivative of [`eval`](Self::eval); clamped groups contribute nothing.
    fn slope_at(&self, t: f64, floor: f64) -> f64 {
        let mut acc = 0.0;
        for ((&c, &b), &s) in self.counts.iter().zip(&self.base).zip(&self.slope) {
            let p = b + s * t;
            acc += if p > floor { c * s / p } else { 0.0 };
        }
        acc
    }

    /// Grid maximizer of the concave objective. Bisection on the sign of the
    /// derivative finds the first grid point where the objective stops
    /// rising; the maximizer is that point or its left neighbour (smaller
    /// index on ties).
    fn concave_argmax(&self, budget: f64, n_p: usize, floor: f64) -> (usize, f64) {
        let (mut lo, mut hi) = (0, n_p - 1);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.slope_at(grid_point(budget, mid, n_p), floor) > 0.0 {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        let at_k = self.eval(grid_point(budget, lo, n_p), floor);
        if lo > 0 {
            let before = self.eval(grid_point(budget, lo - 1, n_p), floor);
            if before >= at_k {
                return (lo - 1, before);
            }
        }
        (lo, at_k)
    }

    /// True when the objective cannot rise by moving away from an endpoint of
    /// the segment, so the current split is already optimal.
    fn optimal_at_end(&self, t: f64, budget: f64, floor: f64) -> bool {
        (t == budget && self.slope_at(budget, floor) >= 0.0) || (t == 0.0 && self.slope_at(0.0, floor) <= 0.0)
    }
}

#[inline]
fn grid_point(budget: f64, k: usize, n_p: usize) -> f64 {
    budget * (k as f64 / (n_p - 1) as f64)
}

/// Log-posterior of one pair on its budget segment.
#[derive(Clone, Debug, PartialEq)]
pub struct PairPosterior {
    pub i: usize,
    pub j: usize,
    /// `S = R_i + R_j`.
    pub budget: f64,
    /// Log-posterior (up to a constant) at `t_k = S k / (n_p - 1)`.
    pub log_post: Vec<f64>,
}

impl PairPosterior {
    pub fn n_points(&self) -> usize {
        self.log_post.len()
    }

    pub fn grid_point(&self, k: usize) -> f64 {
        grid_point(self.budget, k, self.log_post.len())
    }

    /// Index of the largest grid value, smallest index on ties.
    pub fn argmax_index(&self) -> usize {
        let mut best = 0;
        for (k, &v) in self.log_post.iter().enumerate() {
            if v > self.log_post[best] {
                best = k;
            }
        }
        best
    }

    /// Posterior mean of `t`, normalizing the shifted exponentiated grid.
    pub fn mean(&self) -> f64 {
        let max = self.log_post[self.argmax_index()];
        let (mut num, mut den) = (0.0, 0.0);
        for (k, &v) in self.log_post.iter().enumerate() {
            let w = (v - max).exp();
            num += w * self.grid_point(k);
            den += w;
        }
        (num / den).clamp(0.0, self.budget)
    }
}

/// Evaluates the pair log-posterior of active strings `i` and `j` on the
/// full `n_p`-point grid.
pub fn pair_log_posterior(
    state: &mut MitigationState,
    i: usize,
    j: usize,
    cfg: &MitigationConfig,
) -> Result<PairPosterior> {
    cfg.validate()?;
    if i == j || i >= state.n_active() || j >= state.n_active() {
        return Err(Error::contract(format!("invalid pair ({i}, {j})")));
    }
    let budget = state.load_pair(i, j)?;
    Ok(PairPosterior {
        i,
        j,
        budget,
        log_post: state.line.grid(budget, cfg.n_p, state.floor),
    })
}

/// Point estimate `(R_i', R_j')` with `R_i' + R_j' = S`.
pub fn estimate_pair(p: &PairPosterior, estimator: Estimator) -> (f64, f64) {
    let t = match estimator {
        Estimator::Argmax => p.grid_point(p.argmax_index()),
        Estimator::Mean => p.mean(),
    };
    (t, p.budget - t)
}

/// Relative slack below which a grid point does not displace the incumbent.
const IMPROVEMENT_RTOL: f64 = 1e-10;

/// Updates every unordered active pair once, then prunes strings whose
/// population reached zero. Returns the TV distance moved by the sweep.
///
/// In argmax mode a pair keeps its current split unless the grid maximizer
/// strictly improves the likelihood; the total log-likelihood therefore never
/// decreases.
pub fn sweep(state: &mut MitigationState, cfg: &MitigationConfig) -> Result<f64> {
    sweep_observed(state, cfg, |_, _, _| {})
}

/// [`sweep`] that calls `on_update(state, i, j)` after each pair update,
/// before pruning.
pub fn sweep_observed<F>(state: &mut MitigationState, cfg: &MitigationConfig, mut on_update: F) -> Result<f64>
where
    F: FnMut(&MitigationState, usize, usize),
{
    cfg.validate()?;
    state.sweeps += 1;
    let m = state.n_active();
    let before = state.populations.clone();
    if m >= 2 {
        state.refresh_totals();
        let order = state.schedule();
        for a in 0..m {
            for b in a + 1..m {
                let (i, j) = (order[a], order[b]);
                if state.populations[i] == 0.0 && state.populations[j] == 0.0 {
                    continue;
                }
                let old_i = state.populations[i];
                let budget = state.load_pair(i, j)?;
                let floor = state.floor;
                let new_i = match cfg.estimator {
                    Estimator::Argmax if state.line.optimal_at_end(old_i, budget, floor) => old_i,
                    Estimator::Argmax => {
                        let (k, best) = state.line.concave_argmax(budget, cfg.n_p, floor);
                        let incumbent = state.line.eval(old_i, floor);
                        if best > incumbent + IMPROVEMENT_RTOL * (1.0 + incumbent.abs()) {
                            grid_point(budget, k, cfg.n_p)
                        } else {
                            old_i
                        }
                    }
                    Estimator::Mean => {
                        let post = PairPosterior {
                            i,
                            j,
                            budget,
                            log_post: state.line.grid(budget, cfg.n_p, floor),
                        };
                        estimate_pair(&post, Estimator::Mean).0
                    }
                };
                if cfg.trace_pairs {
                    state.pair_trace.push((new_i - old_i).abs());
                }
                if new_i != old_i {
                    state.commit_pair(i, j, new_i, budget - new_i);
                }
                on_update(state, i, j);
            }
        }
    }
    let tv = total_variation_aligned(&before, &state.populations);
    state.prune();
    state.trace.push(TraceEntry {
        sweep: state.sweeps,
        tv,
        active: state.n_active(),
        elapsed: state.started.elapsed(),
    })?;
    Ok(tv)
}

/// Outcome of [`mitigate`].
#[derive(Clone, Debug, PartialEq)]
pub struct MitigationResult {
    /// Populations of the surviving active strings.
    pub populations: BTreeMap<BitString, f64>,
    pub sweeps: usize,
    /// Whether the last sweep moved less than `epsilon`.
    pub converged: bool,
    pub trace: ConvergenceTrace,
    /// Per-pair TV distances, when requested.
    pub pair_trace: Vec<f64>,
}

impl MitigationResult {
    pub fn population(&self, s: &BitString) -> f64 {
        self.populations.get(s).copied().unwrap_or(0.0)
    }

    /// Serializable result document.
    pub fn to_file(&self, cfg: &MitigationConfig) -> ResultFile {
        ResultFile {
            populations: self.populations.iter().map(|(k, &v)| (k.to_string(), v)).collect(),
            sweeps: self.sweeps,
            converged: self.converged,
            tv_trace: self.trace.tv_values(),
            pair_tv_trace: cfg.trace_pairs.then(|| self.pair_trace.clone()),
            config: cfg.clone(),
        }
    }
}

/// JSON result document. Holds no wall-clock data, so seeded runs produce
/// identical files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub populations: BTreeMap<String, f64>,
    pub sweeps: usize,
    pub converged: bool,
    pub tv_trace: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_tv_trace: Option<Vec<f64>>,
    pub config: MitigationConfig,
}

/// Runs sweeps from the empirical frequencies until the TV distance of a
/// sweep falls below `cfg.epsilon` or `cfg.max_sweeps` is reached.
pub fn mitigate(tally: &OutcomeTally, model: &NoiseModel, cfg: &MitigationConfig) -> Result<MitigationResult> {
    let mut state = MitigationState::new(tally, model, cfg)?;
    let mut converged = false;
    while state.sweeps < cfg.max_sweeps {
        if sweep(&mut state, cfg)? < cfg.epsilon {
            converged = true;
            break;
        }
    }
    Ok(MitigationResult {
        populations: state.population_map(),
        sweeps: state.sweeps,
        converged,
        trace: state.trace,
        pair_trace: state.pair_trace,
    })
}

/// Exhaustive maximum of the likelihood over a lattice on the probability
/// simplex of the active set. Test-scale only: `M <= 3` and at most 201
/// points per axis.
pub fn brute_force_posterior(
    tally: &OutcomeTally,
    model: &NoiseModel,
    grid_resolution: usize,
) -> Result<BTreeMap<BitString, f64>> {
    check_compatible(tally, model)?;
    let m = tally.n_active();
    if m > 3 || !(2..=201).contains(&grid_resolution) {
        return Err(Error::contract(format!(
            "brute force limited to M <= 3 and 2 <= resolution <= 201 (M = {m}, resolution = {grid_resolution})"
        )));
    }
    let strings: Vec<BitString> = tally.active().iter().map(|(s, _)| s.clone()).collect();
    if m == 1 {
        return Ok(BTreeMap::from([(strings[0].clone(), 1.0)]));
    }
    let mut table = Vec::with_capacity(tally.n_groups());
    for (key, count) in tally.groups() {
        let row = strings
            .iter()
            .map(|s| model.likelihood_entry(key, s))
            .collect::<Result<Vec<f64>>>()?;
        table.push((*count as f64, row));
    }
    let steps = grid_resolution - 1;
    let objective = |rho: &[f64]| -> f64 {
        table
            .iter()
            .map(|(c, row)| {
                let p: f64 = row.iter().zip(rho).map(|(l, r)| l * r).sum();
                c * p.max(f64::MIN_POSITIVE).ln()
            })
            .sum()
    };
    let mut best = (f64::NEG_INFINITY, vec![0.0; m]);
    let mut rho = vec![0.0; m];
    for a in 0..=steps {
        let inner = if m == 3 { steps - a } else { 0 };
        for b in 0..=inner {
            rho[0] = a as f64 / steps as f64;
            if m == 3 {
                rho[1] = b as f64 / steps as f64;
                rho[2] = (steps - a - b) as f64 / steps as f64;
            } else {
                rho[1] = (steps - a) as f64 / steps as f64;
            }
            let v = objective(&rho);
            if v > best.0 {
                best = (v, rho.clone());
            }
        }
    }
    Ok(strings.into_iter().zip(best.1).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise_model::SingleQubitConfusion;

    fn single_qubit(counts: (u64, u64)) -> (OutcomeTally, NoiseModel) {
        let tally = OutcomeTally::from_bit_counts([
            ("0".parse().unwrap(), counts.0),
            ("1".parse().unwrap(), counts.1),
        ])
        .unwrap();
        let model = NoiseModel::binary(vec![SingleQubitConfusion::symmetric(0.9).unwrap()]);
        (tally, model)
    }

    /// Continuous maximizer of `a ln(0.8 t + 0.1) + b ln(0.9 - 0.8 t)` on
    /// `[0, 1]`: the stationary point `(0.9 a - 0.1 b) / (0.8 (a + b))`,
    /// clamped.
    fn closed_form(a: f64, b: f64) -> f64 {
        ((0.9 * a - 0.1 * b) / (0.8 * (a + b))).clamp(0.0, 1.0)
    }

    #[test]
    fn nine_to_one_posterior() {
        let (tally, model) = single_qubit((9, 1));
        let cfg = MitigationConfig::default();
        let mut state = MitigationState::new(&tally, &model, &cfg).unwrap();
        let post = pair_log_posterior(&mut state, 0, 1, &cfg).unwrap();
        assert_eq!(post.budget, 1.0);
        for (k, &v) in post.log_post.iter().enumerate() {
            let t = post.grid_point(k);
            let expect = 9.0 * (0.8 * t + 0.1).ln() + (0.9 - 0.8 * t).ln();
            assert!((v - expect).abs() < 1e-12);
        }
        assert_eq!(closed_form(9.0, 1.0), 1.0);
        assert_eq!(estimate_pair(&post, Estimator::Argmax), (1.0, 0.0));
    }

    #[test]
    fn symmetric_counts_peak_at_half() {
        let (tally, model) = single_qubit((5, 5));
        let cfg = MitigationConfig::default();
        let mut state = MitigationState::new(&tally, &model, &cfg).unwrap();
        let post = pair_log_posterior(&mut state, 0, 1, &cfg).unwrap();
        assert_eq!(post.grid_point(post.argmax_index()), 0.5);
    }

    #[test]
    fn flat_posterior_tie_breaks() {
        let post = PairPosterior {
            i: 0,
            j: 1,
            budget: 0.4,
            log_post: vec![-3.0; 5],
        };
        assert_eq!(estimate_pair(&post, Estimator::Argmax), (0.0, 0.4));
        let (a, b) = estimate_pair(&post, Estimator::Mean);
        assert!((a - 0.2).abs() < 1e-15 && (b - 0.2).abs() < 1e-15);
    }

    #[test]
    fn indistinguishable_pair_is_flat() {
        // Both qubits fully random: every string has the same likelihood.
        let flat = SingleQubitConfusion::new([[0.5, 0.5], [0.5, 0.5]]).unwrap();
        let model = NoiseModel::binary(vec![flat, SingleQubitConfusion::symmetric(0.9).unwrap()]);
        let tally = OutcomeTally::from_key_counts(
            &model,
            [
                (crate::OutcomeKey(vec![0, 0]), 30),
                (crate::OutcomeKey(vec![1, 0]), 10),
                (crate::OutcomeKey(vec![1, 1]), 5),
            ],
        )
        .unwrap();
        let cfg = MitigationConfig::default();
        let mut state = MitigationState::new(&tally, &model, &cfg).unwrap();
        // "00" and "10" differ only on the random qubit.
        let post = pair_log_posterior(&mut state, 0, 1, &cfg).unwrap();
        assert!(post.log_post.iter().all(|&v| v == post.log_post[0]));
        assert_eq!(estimate_pair(&post, Estimator::Argmax).0, 0.0);
    }

    #[test]
    fn closed_form_single_qubit() {
        let (tally, model) = single_qubit((580, 420));
        let res = mitigate(&tally, &model, &MitigationConfig::default()).unwrap();
        let r0 = res.population(&"0".parse().unwrap());
        assert!((closed_form(580.0, 420.0) - 0.6).abs() < 1e-12);
        assert!((r0 - 0.6).abs() <= 0.01, "{r0}");
        assert!(res.converged);
    }

    #[test]
    fn identity_is_a_fixed_point() {
        let tally = OutcomeTally::from_bit_counts([
            ("00".parse().unwrap(), 17),
            ("01".parse().unwrap(), 5),
            ("11".parse().unwrap(), 3),
        ])
        .unwrap();
        let model = NoiseModel::binary(vec![SingleQubitConfusion::identity(); 2]);
        let cfg = MitigationConfig::default();
        let res = mitigate(&tally, &model, &cfg).unwrap();
        assert_eq!(res.sweeps, 1);
        assert_eq!(res.trace.tv_values(), vec![0.0]);
        assert_eq!(res.populations, tally.empirical_map());
    }

    #[test]
    fn single_active_string() {
        let tally = OutcomeTally::from_bit_counts([("101".parse().unwrap(), 40)]).unwrap();
        let model = NoiseModel::binary(vec![SingleQubitConfusion::symmetric(0.9).unwrap(); 3]);
        let res = mitigate(&tally, &model, &MitigationConfig::default()).unwrap();
        assert_eq!(res.sweeps, 1);
        assert_eq!(res.populations.len(), 1);
        let bf = brute_force_posterior(&tally, &model, 11).unwrap();
        assert_eq!(bf.values().copied().collect::<Vec<_>>(), vec![1.0]);
    }

    #[test]
    fn brute_force_single_qubit() {
        let (tally, model) = single_qubit((580, 420));
        let bf = brute_force_posterior(&tally, &model, 201).unwrap();
        assert!((bf[&"0".parse::<BitString>().unwrap()] - 0.6).abs() <= 0.005);
    }

    #[test]
    fn brute_force_guards() {
        let tally = OutcomeTally::from_bit_counts(
            ["00", "01", "10", "11"].iter().map(|s| (s.parse().unwrap(), 3)),
        )
        .unwrap();
        let model = NoiseModel::binary(vec![SingleQubitConfusion::identity(); 2]);
        assert!(brute_force_posterior(&tally, &model, 11).is_err());
        let (t1, m1) = single_qubit((1, 1));
        assert!(brute_force_posterior(&t1, &m1, 202).is_err());
    }

    #[test]
    fn config_validation() {
        let bad = [
            MitigationConfig { n_p: 2, ..Default::default() },
            MitigationConfig { epsilon: 0.0, ..Default::default() },
            MitigationConfig { max_sweeps: 0, ..Default::default() },
            MitigationConfig { likelihood_floor: 0.0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err());
        }
        assert_eq!("mean".parse::<Estimator>().unwrap(), Estimator::Mean);
        assert!("mode".parse::<Estimator>().is_err());
    }

    #[test]
    fn mode_mismatch_and_resource_errors() {
        let (tally, _) = single_qubit((3, 4));
        let rf = crate::ResponseFunction::new(vec![0.0, 1.0, 2.0], [vec![0.5; 2], vec![0.5; 2]]).unwrap();
        let analog = NoiseModel::analog(vec![rf]);
        assert!(matches!(
            mitigate(&tally, &analog, &MitigationConfig::default()),
            Err(Error::ModeMismatch { .. })
        ));
        let binary = NoiseModel::binary(vec![SingleQubitConfusion::symmetric(0.9).unwrap()]);
        let cfg = MitigationConfig {
            max_cache_entries: 3,
            ..Default::default()
        };
        match mitigate(&tally, &binary, &cfg) {
            Err(e @ Error::Resource { groups: 2, strings: 2, .. }) => assert!(e.is_resource()),
            other => panic!("expected resource error, got {other:?}"),
        }
    }

    #[test]
    fn concave_search_matches_full_scan() {
        let (tally, model) = single_qubit((580, 420));
        let cfg = MitigationConfig::default();
        let mut state = MitigationState::new(&tally, &model, &cfg).unwrap();
        let post = pair_log_posterior(&mut state, 0, 1, &cfg).unwrap();
        let (k, v) = state.line.concave_argmax(post.budget, cfg.n_p, state.floor);
        assert_eq!(k, post.argmax_index());
        assert_eq!(v, post.log_post[k]);
        assert_eq!(post.grid_point(k), 0.6);
    }

    /// Random segment objective: positive base, slopes that keep every
    /// group positive on `[0, budget]`.
    fn random_line(seed: u64, budget: f64) -> PairLine {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut line = PairLine::default();
        for _ in 0..rng.random_range(1..40) {
            let base = rng.random_range(1e-6..1.0);
            let slope = rng.random_range(-base / budget..1.0);
            line.push(rng.random_range(1..50) as f64, base, slope);
        }
        line
    }

    #[test]
    fn derivative_search_matches_full_scan_on_random_lines() {
        for seed in 0..500 {
            let budget = 0.3 + (seed % 7) as f64 * 0.1;
            let line = random_line(seed, budget);
            let n_p = [3, 11, 101, 201][seed as usize % 4];
            let grid = line.grid(budget, n_p, 1e-300);
            let (k, v) = line.concave_argmax(budget, n_p, 1e-300);
            let best = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            // Rounding may separate near-equal neighbours; the value must agree.
            assert!(best - v <= 1e-12 * (1.0 + best.abs()), "seed {seed}: {v} vs {best}");
            assert_eq!(grid[k], v);

            for t in [0.0, budget] {
                if line.optimal_at_end(t, budget, 1e-300) {
                    let here = line.eval(t, 1e-300);
                    assert!(grid.iter().all(|&g| g <= here + 1e-12 * (1.0 + here.abs())), "seed {seed}, end {t}");
                }
            }
        }
    }

    #[test]
    fn mean_estimator_runs() {
        let (tally, model) = single_qubit((580, 420));
        let cfg = MitigationConfig {
            estimator: Estimator::Mean,
            ..Default::default()
        };
        let res = mitigate(&tally, &model, &cfg).unwrap();
        let r0 = res.population(&"0".parse().unwrap());
        // Posterior mean of a near-Gaussian likelihood sits close to its mode.
        assert!((r0 - 0.6).abs() < 0.01, "{r0}");
        let total: f64 = res.populations.values().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
