//! Per-round scoring used by the bandit algorithms.
//!
//! The bandits only need "scores for these items from this matrix". The
//! spectral scorer is the production path; the oracle and row-average scorers
//! exist for testing and as a baseline.

use crate::error::{invalid, Error, Result};
use crate::matrix::{norm, MatrixView, ObservationMatrix, RowSelection};
use crate::sampler::CalibrationBlock;
use crate::spectral::{
    column_sum_filter, full_svd_filter, row_average_reference, split_scores, uniform_half_width, Orientation, SpectralConfig,
    SpectralEstimate, VHatMethod, VNormSource,
};

/// Everything observed about the current candidates.
#[derive(Debug, Clone, Copy)]
pub struct RoundData<'a> {
    /// Original item ids, one per row of `x`.
    pub items: &'a [usize],
    pub x: &'a ObservationMatrix,
    pub calibration: Option<&'a CalibrationBlock>,
    /// Exact `‖v‖` over the columns of `x`, when known.
    pub v_norm: Option<f64>,
}

pub trait ScoreEstimator: Send + Sync {
    fn estimate(&self, data: &RoundData<'_>) -> Result<SpectralEstimate>;

    /// Fixed confidence half-width that overrides the closed-form one.
    fn half_width_override(&self) -> Option<f64> {
        None
    }
}

/// `‖v̂‖` with `v̂_j` the calibration-row mean of column `j` divided by the known item value.
pub fn calibration_v_norm(block: &CalibrationBlock) -> Result<f64> {
    let rows = block.x.nrows();
    if rows == 0 {
        return Err(invalid("calibration needs at least one row"));
    }
    if block.known_u == 0.0 {
        return Err(invalid("calibration rows need a nonzero known item value"));
    }
    let scale = 1.0 / (rows as f64 * block.known_u);
    let v: Vec<f64> = block.x.column_sums().into_iter().map(|s| s * scale).collect();
    Ok(norm(&v))
}

/// Orientation reference from calibration rows: `sign(u_cal) · Cᵀ 1`.
fn calibration_reference(block: &CalibrationBlock) -> Vec<f64> {
    let sign = block.known_u.signum();
    block.x.column_sums().into_iter().map(|s| s * sign).collect()
}

/// Spectral scorer (split-matrix, full-matrix or column-sum filter), calibration aware.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralScorer {
    pub config: SpectralConfig,
}

impl SpectralScorer {
    pub fn new(config: SpectralConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    fn resolve_v_norm(&self, data: &RoundData<'_>) -> Result<Option<f64>> {
        match self.config.v_norm_source {
            VNormSource::Oracle(x) => Ok(Some(x)),
            VNormSource::SamplerOracle => data
                .v_norm
                .map(Some)
                .ok_or_else(|| invalid("sampler did not report ‖v‖ for an oracle-normed estimator")),
            VNormSource::Calibration => {
                let block = data
                    .calibration
                    .ok_or_else(|| invalid("calibration ‖v‖ requested but the draw has no calibration rows"))?;
                Ok(Some(calibration_v_norm(block)?))
            }
            VNormSource::None => Ok(None),
        }
    }
}

impl ScoreEstimator for SpectralScorer {
    fn estimate(&self, data: &RoundData<'_>) -> Result<SpectralEstimate> {
        let x = data.x;
        let n = x.nrows();
        if n != data.items.len() {
            return Err(invalid("item list does not match matrix rows"));
        }
        let cols = x.ncols();
        let v_norm = self.resolve_v_norm(data)?;
        let cal = data.calibration.map(|b| &b.x);
        let n_cal = cal.map_or(0, MatrixView::nrows);
        let x_dyn: &dyn MatrixView = x;

        let reference = match (data.calibration, self.config.orientation) {
            (Some(block), _) => Some(calibration_reference(block)),
            (None, Orientation::RowAverage) => Some(row_average_reference(x)),
            (None, Orientation::EntrySum) => None,
        };

        let u_hat = match self.config.v_hat_method {
            VHatMethod::SplitSvd => {
                let h = n.div_ceil(2);
                let hc = n_cal.div_ceil(2);
                let mut a = RowSelection::new(cols);
                a.push_rows(x_dyn, 0..h);
                let mut b = RowSelection::new(cols);
                b.push_rows(x_dyn, h..n);
                if let Some(c) = cal {
                    let c_dyn: &dyn MatrixView = c;
                    a.push_rows(c_dyn, 0..hc);
                    b.push_rows(c_dyn, hc..n_cal);
                }
                if a.nrows() == 0 || b.nrows() == 0 {
                    return Err(invalid(format!("split estimation needs at least 2 rows, got {}", a.nrows() + b.nrows())));
                }
                for (half, start, end) in [(&a, 0, h), (&b, h, n)] {
                    if half.is_zero() {
                        return Err(Error::DegenerateHalf { start, end });
                    }
                }
                let all = split_scores(&a, &b, v_norm.unwrap_or(1.0), reference.as_deref(), &self.config)?;
                let mut u = Vec::with_capacity(n);
                u.extend_from_slice(&all[..h]);
                let b_start = a.nrows();
                u.extend_from_slice(&all[b_start..b_start + (n - h)]);
                u
            }
            VHatMethod::ColumnSum | VHatMethod::FullSvd => {
                let mut stacked = RowSelection::new(cols);
                stacked.push_rows(x_dyn, 0..n);
                if let Some(c) = cal {
                    let c_dyn: &dyn MatrixView = c;
                    stacked.push_rows(c_dyn, 0..n_cal);
                }
                let v = if self.config.v_hat_method == VHatMethod::ColumnSum {
                    column_sum_filter(&stacked, reference.as_deref(), &self.config)?
                } else {
                    full_svd_filter(&stacked, reference.as_deref(), &self.config)?
                };
                let scale = 1.0 / v_norm.unwrap_or(1.0);
                x.mul_vec(&v).into_iter().map(|s| s * scale).collect()
            }
        };
        let ci_half_width = match v_norm {
            Some(_) => Some(uniform_half_width(n, cols, &self.config)?),
            None => None,
        };
        Ok(SpectralEstimate {
            u_hat,
            ci_half_width,
            m_used: cols,
            method: self.config.v_hat_method,
        })
    }
}

/// Returns the true values of the requested items, ignoring the data.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleScorer {
    truth: Vec<f64>,
    half_width: Option<f64>,
}

impl OracleScorer {
    pub fn new(truth: Vec<f64>) -> Self {
        Self {
            truth,
            half_width: None,
        }
    }

    /// Report a fixed confidence half-width instead of the closed form.
    pub fn with_half_width(mut self, half_width: f64) -> Self {
        self.half_width = Some(half_width);
        self
    }
}

impl ScoreEstimator for OracleScorer {
    fn estimate(&self, data: &RoundData<'_>) -> Result<SpectralEstimate> {
        let u_hat = data
            .items
            .iter()
            .map(|&i| self.truth.get(i).copied().ok_or(Error::UnknownRow(i)))
            .collect::<Result<Vec<f64>>>()?;
        Ok(SpectralEstimate {
            u_hat,
            ci_half_width: self.half_width,
            m_used: data.x.ncols(),
            method: VHatMethod::SplitSvd,
        })
    }

    fn half_width_override(&self) -> Option<f64> {
        self.half_width
    }
}

/// Row-average baseline (biased, ordering-preserving in expectation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RowAverageScorer;

impl ScoreEstimator for RowAverageScorer {
    fn estimate(&self, data: &RoundData<'_>) -> Result<SpectralEstimate> {
        Ok(SpectralEstimate {
            u_hat: crate::spectral::row_average_scores(data.x)?,
            ci_half_width: None,
            m_used: data.x.ncols(),
            method: VHatMethod::ColumnSum,
        })
    }
}
