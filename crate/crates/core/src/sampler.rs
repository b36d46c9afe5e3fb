//! Sources of fresh response columns and exact pull accounting.
//!
//! A [`ColumnSource`] hands out observations on columns (workers, hash
//! functions) it has never used before. [`Sampler`] wraps a source with a
//! [`BudgetLedger`]: every draw of `|items| × n_cols` is charged before any
//! data is produced, and a draw that would overrun the limit is refused.

use crate::error::{invalid, Error, Result};
use crate::matrix::ObservationMatrix;
use crate::model::{sample_raw_bits, Family, RankOneInstance};
use crate::seed;

/// Pull counter with a hard limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BudgetLedger {
    consumed: u64,
    limit: u64,
}

impl BudgetLedger {
    pub fn new(limit: u64) -> Self {
        Self { consumed: 0, limit }
    }

    pub fn consumed(&self) -> u64 {
        self.consumed
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn remaining(&self) -> u64 {
        self.limit - self.consumed
    }

    /// Record `pulls`, refusing (and recording nothing) if the limit would be exceeded.
    pub fn charge(&mut self, pulls: u64) -> Result<()> {
        if pulls > self.remaining() {
            return Err(Error::BudgetExhausted {
                requested: pulls,
                remaining: self.remaining(),
                limit: self.limit,
            });
        }
        self.consumed += pulls;
        Ok(())
    }
}

/// Rows with a known item value, observed on the same columns as the items.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationBlock {
    pub x: ObservationMatrix,
    pub known_u: f64,
}

impl CalibrationBlock {
    pub fn hstack(&self, other: &CalibrationBlock) -> Result<CalibrationBlock> {
        Ok(CalibrationBlock {
            x: self.x.hstack(&other.x)?,
            known_u: self.known_u,
        })
    }
}

/// Result of one draw of fresh columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    /// One row per requested item, in request order.
    pub items: ObservationMatrix,
    pub calibration: Option<CalibrationBlock>,
    /// Exact `‖v‖` over the drawn columns, when the source knows it.
    pub v_norm: Option<f64>,
}

/// Anything that can produce observations on columns it has not used before.
pub trait ColumnSource: Send {
    fn n_items(&self) -> usize;

    fn draw(&mut self, items: &[usize], n_cols: usize) -> Result<Draw>;
}

/// A column source metered by a ledger.
pub struct Sampler<'a> {
    source: &'a mut dyn ColumnSource,
    ledger: BudgetLedger,
}

impl<'a> Sampler<'a> {
    pub fn new(source: &'a mut dyn ColumnSource, limit: u64) -> Self {
        Self {
            source,
            ledger: BudgetLedger::new(limit),
        }
    }

    pub fn n_items(&self) -> usize {
        self.source.n_items()
    }

    pub fn ledger(&self) -> &BudgetLedger {
        &self.ledger
    }

    /// Charge `|items| · n_cols` pulls, then draw.
    pub fn draw(&mut self, items: &[usize], n_cols: usize) -> Result<Draw> {
        self.ledger.charge(items.len() as u64 * n_cols as u64)?;
        let draw = self.source.draw(items, n_cols)?;
        if draw.items.nrows_cols() != (items.len(), n_cols) {
            return Err(Error::Sampler(format!(
                "source returned a {:?} matrix for a {}x{} request",
                draw.items.nrows_cols(),
                items.len(),
                n_cols
            )));
        }
        Ok(draw)
    }
}

impl ObservationMatrix {
    fn nrows_cols(&self) -> (usize, usize) {
        use crate::matrix::MatrixView;
        (self.nrows(), self.ncols())
    }
}

/// Law of the column parameters (`v_j` for Raw, `q_j` otherwise).
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnLaw {
    /// Column `j` uses `params[j mod len]`.
    Cycle(Vec<f64>),
    /// Independent `Uniform(lo, hi)` per column, drawn lazily from the source seed.
    Uniform { lo: f64, hi: f64 },
}

const COLUMN_TAG: u64 = 0xc01;
const BATCH_TAG: u64 = 0xba7c;

/// Synthetic rank-one source: fixed row parameters, fresh columns on every draw.
///
/// Batch `b` samples its entries from per-row streams derived from
/// `(seed, b, row)`, so results do not depend on which other rows were requested.
#[derive(Debug, Clone)]
pub struct InstanceSource {
    family: Family,
    row_params: Vec<f64>,
    law: ColumnLaw,
    calibration: Option<(usize, f64)>,
    seed: u64,
    next_col: u64,
    batch: u64,
}

impl InstanceSource {
    /// `row_params` are `u_i` for Raw and `p_i` for the channel families.
    pub fn new(family: Family, row_params: Vec<f64>, law: ColumnLaw, seed: u64) -> Result<Self> {
        if row_params.is_empty() {
            return Err(invalid("source needs at least one item"));
        }
        if let Some(x) = row_params.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(invalid(format!("row parameter {x} outside [0, 1]")));
        }
        match &law {
            ColumnLaw::Cycle(v) if v.is_empty() => return Err(invalid("empty column cycle")),
            ColumnLaw::Cycle(v) => {
                if let Some(x) = v.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                    return Err(invalid(format!("column parameter {x} outside [0, 1]")));
                }
            }
            ColumnLaw::Uniform { lo, hi } => {
                if !(0.0 <= *lo && lo <= hi && *hi <= 1.0) {
                    return Err(invalid(format!("uniform column law [{lo}, {hi}] outside [0, 1]")));
                }
            }
        }
        Ok(Self {
            family,
            row_params,
            law,
            calibration: None,
            seed,
            next_col: 0,
            batch: 0,
        })
    }

    /// Source over an instance's items whose columns cycle through its workers.
    pub fn from_instance(instance: &RankOneInstance, seed: u64) -> Result<Self> {
        let rows = (0..instance.n()).map(|i| instance.row_param(i)).collect();
        let cols = (0..instance.m()).map(|j| instance.col_param(j)).collect();
        Self::new(instance.family(), rows, ColumnLaw::Cycle(cols), seed)
    }

    /// Append `count` calibration rows with row parameter `row_param` to every draw.
    pub fn with_calibration(mut self, count: usize, row_param: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&row_param) {
            return Err(invalid(format!("calibration parameter {row_param} outside [0, 1]")));
        }
        self.calibration = (count > 0).then_some((count, row_param));
        Ok(self)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Ground-truth item values `u`.
    pub fn item_values(&self) -> Vec<f64> {
        self.row_params.iter().map(|&r| self.family.item_value(r)).collect()
    }

    fn column_param(&self, j: u64) -> f64 {
        match &self.law {
            ColumnLaw::Cycle(v) => v[(j % v.len() as u64) as usize],
            ColumnLaw::Uniform { lo, hi } => {
                lo + (hi - lo) * seed::unit_f64(seed::derive(self.seed, &[COLUMN_TAG, j]))
            }
        }
    }
}

impl ColumnSource for InstanceSource {
    fn n_items(&self) -> usize {
        self.row_params.len()
    }

    fn draw(&mut self, items: &[usize], n_cols: usize) -> Result<Draw> {
        if let Some(&bad) = items.iter().find(|&&i| i >= self.row_params.len()) {
            return Err(Error::UnknownRow(bad));
        }
        let cols: Vec<f64> = (0..n_cols as u64).map(|j| self.column_param(self.next_col + j)).collect();
        let batch_seed = seed::derive(self.seed, &[BATCH_TAG, self.batch]);
        let family = self.family;
        let rows = &self.row_params;
        let raw = sample_raw_bits(items, n_cols, batch_seed, |i, j| family.one_probability(rows[i], cols[j]));
        let calibration = self.calibration.map(|(count, param)| {
            let ids: Vec<usize> = (rows.len()..rows.len() + count).collect();
            let raw = sample_raw_bits(&ids, n_cols, batch_seed, |_, j| family.one_probability(param, cols[j]));
            CalibrationBlock {
                x: family.transform(raw),
                known_u: family.item_value(param),
            }
        });
        let v_norm = cols
            .iter()
            .map(|&q| family.worker_value(q).powi(2))
            .sum::<f64>()
            .sqrt();
        self.next_col += n_cols as u64;
        self.batch += 1;
        Ok(Draw {
            items: family.transform(raw),
            calibration,
            v_norm: Some(v_norm),
        })
    }
}
