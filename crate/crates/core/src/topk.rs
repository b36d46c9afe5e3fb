//! Sequential-halving top-k identification and the uniform-allocation baseline.
//!
//! Theory mode follows the textbook schedule: `L = ⌈log₂(n/√T)⌉` halving
//! rounds, each spending at most `T/(2L)` pulls on fresh columns, then a
//! clean-up round with half the budget on the survivors. Practical mode keeps
//! every column drawn so far for the surviving items, halves until fewer than
//! `2k` candidates remain and caps the per-round column count.

use crate::error::{invalid, Error, Result};
use crate::estimator::{RoundData, ScoreEstimator};
use crate::matrix::{MatrixView, ObservationMatrix};
use crate::sampler::{CalibrationBlock, Sampler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Theory,
    Practical,
}

/// Which end of the score scale counts as "top".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Preference {
    #[default]
    Largest,
    /// Used for overlaps under the Z-channel, where `u = 1 − p`.
    Smallest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopKConfig {
    /// Total pull budget `T`.
    pub budget: u64,
    pub k: usize,
    pub mode: Mode,
    /// Cap on the columns any one item is observed on (practical mode only).
    pub m_max: Option<usize>,
    /// Keep earlier columns of surviving items (practical mode only).
    pub reuse_samples: bool,
    pub prefer: Preference,
}

impl TopKConfig {
    pub fn theory(budget: u64, k: usize) -> Self {
        Self {
            budget,
            k,
            mode: Mode::Theory,
            m_max: None,
            reuse_samples: false,
            prefer: Preference::Largest,
        }
    }

    /// Practical defaults: reuse on, `m_max = 10·√T`.
    pub fn practical(budget: u64, k: usize) -> Self {
        Self {
            budget,
            k,
            mode: Mode::Practical,
            m_max: Some(default_m_max(budget)),
            reuse_samples: true,
            prefer: Preference::Largest,
        }
    }

    pub fn with_preference(mut self, prefer: Preference) -> Self {
        self.prefer = prefer;
        self
    }

    /// Hard errors for unusable settings; soft regime violations come back as warnings.
    pub fn validate(&self, n: usize) -> Result<Vec<String>> {
        if self.k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        if n < 2 * self.k {
            return Err(invalid(format!("need n >= 2k, got n = {n}, k = {}", self.k)));
        }
        if self.m_max == Some(0) {
            return Err(invalid("m_max must be at least 1"));
        }
        let mut warnings = Vec::new();
        if self.mode == Mode::Theory {
            let t = self.budget as f64;
            let nf = n as f64;
            if (2 * self.k) as f64 >= t.sqrt() {
                warnings.push(format!("2k = {} is not below sqrt(T) = {:.1}", 2 * self.k, t.sqrt()));
            }
            if t < nf * nf.ln() || t > nf * nf {
                warnings.push(format!("T = {} outside [n ln n, n^2] = [{:.0}, {:.0}]", self.budget, nf * nf.ln(), nf * nf));
            }
        }
        Ok(warnings)
    }
}

/// `10·√T`, at least 1.
pub fn default_m_max(budget: u64) -> usize {
    ((10.0 * (budget as f64).sqrt()).floor() as usize).max(1)
}

/// Number of halving rounds `⌈log₂(n/√T)⌉`, clamped at 0; the smallest `L` with `n² ≤ T·4^L`.
pub fn halving_rounds(budget: u64, n: usize) -> u32 {
    let n2 = (n as u128) * (n as u128);
    let mut cap = budget as u128;
    let mut l = 0;
    while cap < n2 {
        if cap == 0 {
            // T = 0: no finite L exists; report the round count for T = 1.
            return halving_rounds(1, n);
        }
        cap *= 4;
        l += 1;
    }
    l
}

/// Fresh columns in theory round `r`: `⌊T / (2·⌈n/2^r⌉·L)⌋`.
pub fn halving_schedule(budget: u64, n: usize, r: u32) -> Result<u64> {
    let l = halving_rounds(budget, n);
    if r >= l {
        return Err(invalid(format!("round {r} beyond r_max (the schedule has {l} rounds)")));
    }
    let size = n.div_ceil(1usize << r) as u64;
    Ok(budget / (2 * size * l as u64))
}

/// Item ids ordered best first; ties go to the smaller id.
pub fn rank_items(items: &[usize], scores: &[f64], prefer: Preference) -> Vec<usize> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| {
        let by_score = match prefer {
            Preference::Largest => scores[b].total_cmp(&scores[a]),
            Preference::Smallest => scores[a].total_cmp(&scores[b]),
        };
        by_score.then(items[a].cmp(&items[b]))
    });
    order.into_iter().map(|p| items[p]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundTrace {
    pub round: usize,
    pub candidates: usize,
    pub new_columns: usize,
    /// Columns the estimate was computed on (larger than `new_columns` under reuse).
    pub columns_used: usize,
    pub pulls: u64,
    pub cleanup: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopKResult {
    /// The `k` selected items, best first.
    pub ids: Vec<usize>,
    /// Every item scored in the last estimate, best first.
    pub ranking: Vec<usize>,
    pub rounds: Vec<RoundTrace>,
    pub pulls: u64,
    pub warnings: Vec<String>,
    /// Practical mode stopped at the `m_max` cap.
    pub capped: bool,
}

/// Observations accumulated for the current candidates.
struct Pool {
    items: Vec<usize>,
    x: ObservationMatrix,
    calibration: Option<CalibrationBlock>,
    v_norm_sq: Option<f64>,
}

impl Pool {
    fn estimate(&self, estimator: &dyn ScoreEstimator) -> Result<Vec<f64>> {
        let data = RoundData {
            items: &self.items,
            x: &self.x,
            calibration: self.calibration.as_ref(),
            v_norm: self.v_norm_sq.map(f64::sqrt),
        };
        let est = estimator.estimate(&data)?;
        if est.u_hat.len() != self.items.len() {
            return Err(Error::Sampler(format!(
                "estimator returned {} scores for {} items",
                est.u_hat.len(),
                self.items.len()
            )));
        }
        Ok(est.u_hat)
    }

    /// Keep the rows of `survivors` (a subset of the current items).
    fn retain(&mut self, survivors: &[usize]) {
        let positions: Vec<usize> = survivors
            .iter()
            .map(|id| self.items.binary_search(id).expect("survivor is a current item"))
            .collect();
        self.x = self.x.select_rows(&positions);
        self.items = survivors.to_vec();
    }
}

fn fresh_pool(sampler: &mut Sampler<'_>, items: Vec<usize>, n_cols: usize) -> Result<Pool> {
    let draw = sampler.draw(&items, n_cols)?;
    Ok(Pool {
        items,
        x: draw.items,
        calibration: draw.calibration,
        v_norm_sq: draw.v_norm.map(|v| v * v),
    })
}

fn extend_pool(pool: &mut Pool, sampler: &mut Sampler<'_>, n_cols: usize) -> Result<()> {
    let draw = sampler.draw(&pool.items, n_cols)?;
    pool.x = pool.x.hstack(&draw.items)?;
    pool.calibration = match (&pool.calibration, &draw.calibration) {
        (Some(a), Some(b)) => Some(a.hstack(b)?),
        _ => None,
    };
    pool.v_norm_sq = match (pool.v_norm_sq, draw.v_norm) {
        (Some(a), Some(b)) => Some(a + b * b),
        _ => None,
    };
    Ok(())
}

/// Survivors of a halving step, in increasing id order.
fn halve(ranking: &[usize], keep: usize) -> Vec<usize> {
    let mut s = ranking[..keep].to_vec();
    s.sort_unstable();
    s
}

/// Adaptive top-k by sequential halving on spectral scores.
pub fn sequential_halving_topk(
    sampler: &mut Sampler<'_>,
    estimator: &dyn ScoreEstimator,
    config: &TopKConfig,
) -> Result<TopKResult> {
    let n = sampler.n_items();
    let warnings = config.validate(n)?;
    if sampler.ledger().consumed() != 0 {
        return Err(invalid("sequential halving needs a fresh ledger"));
    }
    match config.mode {
        Mode::Theory => theory_mode(sampler, estimator, config, n, warnings),
        Mode::Practical => practical_mode(sampler, estimator, config, n, warnings),
    }
}

fn theory_mode(
    sampler: &mut Sampler<'_>,
    estimator: &dyn ScoreEstimator,
    config: &TopKConfig,
    n: usize,
    warnings: Vec<String>,
) -> Result<TopKResult> {
    let t = config.budget;
    let l = halving_rounds(t, n);
    let mut candidates: Vec<usize> = (0..n).collect();
    let mut rounds = Vec::new();
    for r in 0..l {
        let size = candidates.len() as u64;
        let cols = t / (2 * size * l as u64);
        if cols == 0 {
            return Err(Error::BudgetExhausted {
                requested: size,
                remaining: sampler.ledger().remaining(),
                limit: t,
            });
        }
        let pool = fresh_pool(sampler, candidates.clone(), cols as usize)?;
        let scores = pool.estimate(estimator)?;
        rounds.push(RoundTrace {
            round: r as usize,
            candidates: candidates.len(),
            new_columns: cols as usize,
            columns_used: cols as usize,
            pulls: size * cols,
            cleanup: false,
        });
        let keep = candidates.len().div_ceil(2).max(config.k);
        candidates = halve(&rank_items(&candidates, &scores, config.prefer), keep);
    }
    let size = candidates.len() as u64;
    let cols = t / (2 * size);
    if cols == 0 {
        return Err(Error::BudgetExhausted {
            requested: size,
            remaining: sampler.ledger().remaining(),
            limit: t,
        });
    }
    let pool = fresh_pool(sampler, candidates.clone(), cols as usize)?;
    let scores = pool.estimate(estimator)?;
    rounds.push(RoundTrace {
        round: l as usize,
        candidates: candidates.len(),
        new_columns: cols as usize,
        columns_used: cols as usize,
        pulls: size * cols,
        cleanup: true,
    });
    let ranking = rank_items(&candidates, &scores, config.prefer);
    Ok(TopKResult {
        ids: ranking[..config.k].to_vec(),
        ranking,
        rounds,
        pulls: sampler.ledger().consumed(),
        warnings,
        capped: false,
    })
}

/// Number of practical halving rounds: how many times the candidate set is
/// estimated before fewer than `2k` remain.
pub fn practical_rounds(n: usize, k: usize) -> usize {
    let mut size = n;
    let mut rounds = 0;
    while size >= 2 * k {
        rounds += 1;
        size = size.div_ceil(2);
    }
    rounds
}

fn practical_mode(
    sampler: &mut Sampler<'_>,
    estimator: &dyn ScoreEstimator,
    config: &TopKConfig,
    n: usize,
    warnings: Vec<String>,
) -> Result<TopKResult> {
    let t = config.budget;
    let total_rounds = practical_rounds(n, config.k) as u64;
    let mut candidates: Vec<usize> = (0..n).collect();
    let mut pool: Option<Pool> = None;
    let mut rounds = Vec::new();
    let mut ranking = Vec::new();
    let mut capped = false;
    for r in 0..total_rounds {
        let size = candidates.len() as u64;
        let mut cols = (t / (total_rounds * size)) as usize;
        if let Some(cap) = config.m_max {
            let seen = match &pool {
                Some(p) if config.reuse_samples => p.x.ncols(),
                _ => 0,
            };
            if seen + cols >= cap {
                cols = cap - seen;
                capped = true;
            }
        }
        if cols == 0 {
            if r == 0 && !capped {
                return Err(Error::BudgetExhausted {
                    requested: size,
                    remaining: sampler.ledger().remaining(),
                    limit: t,
                });
            }
            break;
        }
        match pool.as_mut() {
            Some(p) if config.reuse_samples => {
                p.retain(&candidates);
                extend_pool(p, sampler, cols)?;
            }
            _ => pool = Some(fresh_pool(sampler, candidates.clone(), cols)?),
        }
        let p = pool.as_ref().expect("pool was just filled");
        let scores = p.estimate(estimator)?;
        rounds.push(RoundTrace {
            round: r as usize,
            candidates: candidates.len(),
            new_columns: cols,
            columns_used: p.x.ncols(),
            pulls: size * cols as u64,
            cleanup: false,
        });
        ranking = rank_items(&candidates, &scores, config.prefer);
        if capped {
            break;
        }
        let keep = candidates.len().div_ceil(2).max(config.k);
        candidates = halve(&ranking, keep);
    }
    Ok(TopKResult {
        ids: ranking[..config.k].to_vec(),
        ranking,
        rounds,
        pulls: sampler.ledger().consumed(),
        warnings,
        capped,
    })
}

/// Uniform allocation: every item gets `⌊T/n⌋` columns in a single batch.
pub fn nonadaptive_topk(
    sampler: &mut Sampler<'_>,
    estimator: &dyn ScoreEstimator,
    budget: u64,
    k: usize,
    prefer: Preference,
) -> Result<TopKResult> {
    let n = sampler.n_items();
    if k == 0 || k > n {
        return Err(invalid(format!("k = {k} must lie in [1, n = {n}]")));
    }
    if budget < n as u64 {
        return Err(invalid(format!("budget {budget} is below one pull per item (n = {n})")));
    }
    let cols = (budget / n as u64) as usize;
    let pool = fresh_pool(sampler, (0..n).collect(), cols)?;
    let scores = pool.estimate(estimator)?;
    let ranking = rank_items(&pool.items, &scores, prefer);
    Ok(TopKResult {
        ids: ranking[..k].to_vec(),
        ranking,
        rounds: vec![RoundTrace {
            round: 0,
            candidates: n,
            new_columns: cols,
            columns_used: cols,
            pulls: n as u64 * cols as u64,
            cleanup: false,
        }],
        pulls: sampler.ledger().consumed(),
        warnings: Vec::new(),
        capped: false,
    })
}
