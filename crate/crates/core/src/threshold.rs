//! Adaptive thresholding: find the items above a band `[α, β]`.
//!
//! Each round recruits four times as many fresh workers as the last, accepts
//! items whose lower confidence bound clears `α`, rejects items whose upper
//! bound falls below `β`, and keeps the rest. Once fewer than `κ` items remain
//! active, the survivors plus a random sample of classified items go through
//! one clean-up round with `t_C` workers.

use rand::seq::index::sample;

use crate::error::{invalid, Result};
use crate::estimator::{RoundData, ScoreEstimator};
use crate::sampler::Sampler;
use crate::seed;
use crate::spectral::{constants, uniform_half_width, SpectralConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdConfig {
    pub alpha: f64,
    pub beta: f64,
    pub c_lower: f64,
    /// Multiplier on `C4`, same meaning as in [`SpectralConfig`].
    pub constant_scale: f64,
    /// Seed of the padding-set stream.
    pub seed: u64,
}

impl ThresholdConfig {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self {
            alpha,
            beta,
            c_lower: 0.5,
            constant_scale: 1.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.beta.is_finite() && self.alpha < self.beta) {
            return Err(invalid(format!("need alpha < beta, got [{}, {}]", self.alpha, self.beta)));
        }
        if self.beta - self.alpha > 1.0 {
            return Err(invalid("the band [alpha, beta] must be at most 1 wide"));
        }
        self.spectral().validate()
    }

    fn spectral(&self) -> SpectralConfig {
        SpectralConfig {
            c_lower: self.c_lower,
            constant_scale: self.constant_scale,
            ..SpectralConfig::default()
        }
    }

    pub fn c4_scaled(&self) -> Result<f64> {
        Ok(self.constant_scale * constants(self.c_lower)?.c4)
    }

    fn width(&self) -> f64 {
        self.beta - self.alpha
    }

    /// `t_{-1} = 12 ln n / C4`.
    pub fn base_workers(&self, n: usize) -> Result<f64> {
        Ok(12.0 * (n as f64).ln() / self.c4_scaled()?)
    }

    /// `t_r = ⌈4^{r+1} t_{-1}⌉`.
    pub fn round_workers(&self, n: usize, r: usize) -> Result<usize> {
        Ok((4f64.powi(r as i32 + 1) * self.base_workers(n)?).ceil() as usize)
    }

    /// Elimination rounds `⌈log₂(1/(β − α))⌉`.
    pub fn round_count(&self) -> usize {
        (1.0 / self.width()).log2().ceil().max(0.0) as usize
    }

    /// `12 ln n / ((β − α)² C4)`, the clean-up size before rounding.
    fn cleanup_size(&self, n: usize) -> Result<f64> {
        Ok(self.base_workers(n)? / (self.width() * self.width()))
    }

    /// `κ = ⌊12 ln n / ((β − α)² C4)⌋`.
    pub fn kappa(&self, n: usize) -> Result<usize> {
        Ok(self.cleanup_size(n)?.floor() as usize)
    }

    /// `t_C = ⌈12 ln n / ((β − α)² C4)⌉`.
    pub fn cleanup_workers(&self, n: usize) -> Result<usize> {
        Ok(self.cleanup_size(n)?.ceil() as usize)
    }

    /// Validity regime `β − α > sqrt(12 ln n / (C4 n))`.
    pub fn in_regime(&self, n: usize) -> Result<bool> {
        Ok(self.width() > (self.base_workers(n)? / n as f64).sqrt())
    }
}

/// Classification difficulty: distance of `u` from the far side of the band.
pub fn gamma_gap(u: f64, alpha: f64, beta: f64) -> f64 {
    if u > beta {
        u - alpha
    } else if u >= alpha {
        beta - alpha
    } else {
        beta - u
    }
}

/// Worst-case pull count for true values `u`.
pub fn budget_bound(u: &[f64], config: &ThresholdConfig) -> Result<f64> {
    config.validate()?;
    let n = u.len();
    if n == 0 {
        return Err(invalid("budget bound needs at least one item"));
    }
    let c4 = config.c4_scaled()?;
    let ln_n = (n as f64).ln();
    let head = config.cleanup_size(n)?;
    let mut gaps: Vec<f64> = u.iter().map(|&x| gamma_gap(x, config.alpha, config.beta)).collect();
    gaps.sort_by(f64::total_cmp);
    let kappa = config.kappa(n)?;
    let tail: f64 = gaps.iter().skip(kappa).map(|g| 32.0 * ln_n / (c4 * g * g)).sum();
    Ok(2.0 * head * head + tail)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRound {
    pub round: usize,
    pub active: usize,
    pub workers: usize,
    pub half_width: f64,
    pub accepted: Vec<usize>,
    pub rejected: Vec<usize>,
    pub pulls: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdResult {
    /// Accepted items in increasing id order.
    pub accepted: Vec<usize>,
    pub rounds: Vec<ThresholdRound>,
    /// Items sent to clean-up and the workers they received.
    pub cleanup_set: Vec<usize>,
    pub cleanup_workers: usize,
    pub pulls: u64,
    pub warnings: Vec<String>,
}

struct Scored {
    scores: Vec<f64>,
    half_width: f64,
}

fn score(
    sampler: &mut Sampler<'_>,
    estimator: &dyn ScoreEstimator,
    items: &[usize],
    workers: usize,
    n: usize,
    config: &ThresholdConfig,
) -> Result<Scored> {
    let draw = sampler.draw(items, workers)?;
    let est = estimator.estimate(&RoundData {
        items,
        x: &draw.items,
        calibration: draw.calibration.as_ref(),
        v_norm: draw.v_norm,
    })?;
    let half_width = match estimator.half_width_override() {
        Some(c) => c,
        None => uniform_half_width(n, workers, &config.spectral())?,
    };
    Ok(Scored {
        scores: est.u_hat,
        half_width,
    })
}

fn regime_warnings(n: usize, config: &ThresholdConfig) -> Result<Vec<String>> {
    let mut w = Vec::new();
    if !config.in_regime(n)? {
        w.push(format!(
            "beta - alpha = {} is below sqrt(12 ln n / (C4 n)) = {:.4}; guarantees do not apply",
            config.width(),
            (config.base_workers(n)? / n as f64).sqrt()
        ));
    }
    Ok(w)
}

/// Adaptive thresholding with geometric worker growth and a clean-up round.
pub fn adaptive_threshold(
    sampler: &mut Sampler<'_>,
    estimator: &dyn ScoreEstimator,
    config: &ThresholdConfig,
) -> Result<ThresholdResult> {
    config.validate()?;
    let n = sampler.n_items();
    if n < 2 {
        return Err(invalid("thresholding needs at least 2 items"));
    }
    let warnings = regime_warnings(n, config)?;
    let kappa = config.kappa(n)?;
    let mut rng = seed::stream(config.seed);
    let mut active: Vec<usize> = (0..n).collect();
    let mut accepted: Vec<usize> = Vec::new();
    let mut rounds = Vec::new();
    let mut cleanup_set = active.clone();
    for r in 0..config.round_count() {
        let workers = config.round_workers(n, r)?;
        let s = score(sampler, estimator, &active, workers, n, config)?;
        let c = s.half_width;
        let acc: Vec<usize> = active
            .iter()
            .zip(&s.scores)
            .filter(|(_, &u)| u - c > config.alpha)
            .map(|(&i, _)| i)
            .collect();
        let rej: Vec<usize> = active
            .iter()
            .zip(&s.scores)
            .filter(|(_, &u)| u + c < config.beta)
            .map(|(&i, _)| i)
            .collect();
        let next: Vec<usize> = active
            .iter()
            .copied()
            .filter(|i| acc.binary_search(i).is_err() && rej.binary_search(i).is_err())
            .collect();
        rounds.push(ThresholdRound {
            round: r,
            active: active.len(),
            workers,
            half_width: c,
            accepted: acc.clone(),
            rejected: rej.clone(),
            pulls: active.len() as u64 * workers as u64,
        });
        accepted.extend_from_slice(&acc);
        if next.len() < kappa {
            let mut classified: Vec<usize> = acc.iter().chain(&rej).copied().collect();
            classified.sort_unstable();
            classified.dedup();
            let want = (kappa - next.len()).min(classified.len());
            let mut pad: Vec<usize> = sample(&mut rng, classified.len(), want)
                .into_iter()
                .map(|p| classified[p])
                .collect();
            pad.extend_from_slice(&next);
            pad.sort_unstable();
            cleanup_set = pad;
            break;
        }
        active = next;
        cleanup_set = active.clone();
    }
    let cleanup_workers = config.cleanup_workers(n)?;
    if !cleanup_set.is_empty() && cleanup_workers > 0 {
        let s = score(sampler, estimator, &cleanup_set, cleanup_workers, n, config)?;
        accepted.extend(
            cleanup_set
                .iter()
                .zip(&s.scores)
                .filter(|(_, &u)| u - s.half_width > config.alpha)
                .map(|(&i, _)| i),
        );
    }
    accepted.sort_unstable();
    accepted.dedup();
    Ok(ThresholdResult {
        accepted,
        rounds,
        cleanup_set,
        cleanup_workers,
        pulls: sampler.ledger().consumed(),
        warnings,
    })
}

/// One batch of `t_C` workers on every item; accept `û > (α + β)/2`.
pub fn nonadaptive_threshold(
    sampler: &mut Sampler<'_>,
    estimator: &dyn ScoreEstimator,
    config: &ThresholdConfig,
) -> Result<ThresholdResult> {
    config.validate()?;
    let n = sampler.n_items();
    if n < 2 {
        return Err(invalid("thresholding needs at least 2 items"));
    }
    let warnings = regime_warnings(n, config)?;
    let workers = config.cleanup_workers(n)?.max(1);
    let items: Vec<usize> = (0..n).collect();
    let s = score(sampler, estimator, &items, workers, n, config)?;
    let mid = 0.5 * (config.alpha + config.beta);
    let accepted = items
        .iter()
        .zip(&s.scores)
        .filter(|(_, &u)| u > mid)
        .map(|(&i, _)| i)
        .collect();
    Ok(ThresholdResult {
        accepted,
        rounds: Vec::new(),
        cleanup_set: items,
        cleanup_workers: workers,
        pulls: sampler.ledger().consumed(),
        warnings,
    })
}
