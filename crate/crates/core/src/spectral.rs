//! Split-matrix spectral estimation of the item parameters `u`.
//!
//! The rows of `X` are split into two halves `A` and `B`. The leading right
//! singular vector of each half estimates the direction of `v`, and each half's
//! items are scored with a matched filter built from the *other* half:
//!
//! ```text
//! û_A = X_A v̂_B / (‖v̂_B‖ ‖v‖),    û_B = X_B v̂_A / (‖v̂_A‖ ‖v‖)
//! ```
//!
//! Because `v̂_B` is independent of `X_A`, every `û_i` concentrates around
//! `u_i` and admits a uniform confidence half-width
//! `Γ = sqrt((log(1/δ) + log(m+n+2)) / (C4 · min(m, n)))`.

use crate::error::{invalid, Error, Result};
use crate::matrix::{dot, norm, MatrixView, RowSelection};
use crate::seed;
use rand::RngCore;

/// How `v̂` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VHatMethod {
    /// Leading right singular vector of the opposite half (independent filter).
    SplitSvd,
    /// Normalized column sums of the whole matrix.
    ColumnSum,
    /// Leading right singular vector of the whole matrix (no split).
    FullSvd,
}

impl VHatMethod {
    pub fn name(self) -> &'static str {
        match self {
            VHatMethod::SplitSvd => "split-svd",
            VHatMethod::ColumnSum => "column-sum",
            VHatMethod::FullSvd => "full-svd",
        }
    }
}

/// Where `‖v‖` comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VNormSource {
    /// A known value.
    Oracle(f64),
    /// The exact norm reported by the sampler for the columns it drew.
    SamplerOracle,
    /// Estimated from calibration rows with a known item value.
    Calibration,
    /// Unknown: scores are returned without a confidence half-width.
    None,
}

/// Global sign convention for `v̂` (and hence `û`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    /// Entries of `v̂` sum to a nonnegative value.
    EntrySum,
    /// `û` has nonnegative inner product with the row averages of `X`.
    RowAverage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralConfig {
    /// Lower bound `c` on the entries of `u` and `v`.
    pub c_lower: f64,
    pub power_tolerance: f64,
    pub power_max_iters: usize,
    pub v_hat_method: VHatMethod,
    pub v_norm_source: VNormSource,
    /// Multiplier applied to `C4` (the closed-form constants are loose).
    pub constant_scale: f64,
    pub orientation: Orientation,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            c_lower: 0.5,
            power_tolerance: 1e-10,
            power_max_iters: 1000,
            v_hat_method: VHatMethod::SplitSvd,
            v_norm_source: VNormSource::SamplerOracle,
            constant_scale: 1.0,
            orientation: Orientation::EntrySum,
        }
    }
}

impl SpectralConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_lower > 0.0 && self.c_lower < 1.0) {
            return Err(invalid(format!("c_lower = {} must lie in (0, 1)", self.c_lower)));
        }
        if !(self.power_tolerance > 0.0) {
            return Err(invalid("power_tolerance must be positive"));
        }
        if self.power_max_iters == 0 {
            return Err(invalid("power_max_iters must be at least 1"));
        }
        if !(self.constant_scale > 0.0 && self.constant_scale.is_finite()) {
            return Err(invalid("constant_scale must be positive and finite"));
        }
        if let VNormSource::Oracle(x) = self.v_norm_source {
            if !(x > 0.0) {
                return Err(invalid("oracle ‖v‖ must be positive"));
            }
        }
        Ok(())
    }

    /// `constant_scale · C4(c_lower)`.
    pub fn c4_scaled(&self) -> Result<f64> {
        Ok(self.constant_scale * constants(self.c_lower)?.c4)
    }
}

/// Constants of the entrywise error bound for a lower bound `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantSet {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
}

pub fn constants(c: f64) -> Result<ConstantSet> {
    if !(c > 0.0 && c < 1.0) {
        return Err(invalid(format!("c = {c} must lie in (0, 1)")));
    }
    let c2 = c.powi(4) / 48.0;
    let c3 = 4.0 / c.powi(4) + 30.0 * std::f64::consts::SQRT_2;
    let c4 = c * c * f64::min(1.0 / 18.0, c2 / 9.0);
    let c1 = f64::min(c4, (6.0 * c3 / c).powi(-2));
    Ok(ConstantSet {
        c1,
        c2,
        c3,
        c4,
        c5: c1 / 64.0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEstimate {
    pub u_hat: Vec<f64>,
    /// Uniform half-width `Γ`; absent when `‖v‖` is unknown.
    pub ci_half_width: Option<f64>,
    pub m_used: usize,
    pub method: VHatMethod,
}

/// Unit-norm leading right singular vector of `x` by power iteration on `XᵀX`.
///
/// Starts from the normalized all-ones vector and stops once
/// `‖XᵀX v − λ v‖ ≤ tol · λ`. The sign makes the entry sum nonnegative, with
/// exact ties resolved by making the first nonzero entry positive.
pub fn leading_right_singular_vector<M: MatrixView + ?Sized>(x: &M, config: &SpectralConfig) -> Result<Vec<f64>> {
    let m = x.ncols();
    if x.nrows() == 0 || m == 0 || x.is_zero() {
        return Err(Error::ZeroMatrix);
    }
    let mut v = vec![1.0 / (m as f64).sqrt(); m];
    let mut restarted = false;
    let mut residual = f64::INFINITY;
    for _ in 0..config.power_max_iters {
        let w = x.mul_t_vec(&x.mul_vec(&v));
        let w_norm = norm(&w);
        if w_norm == 0.0 {
            // Start vector orthogonal to the row space; retry from a fixed pseudo-random start.
            if restarted {
                return Err(Error::ZeroMatrix);
            }
            restarted = true;
            v = fixed_random_unit(m);
            continue;
        }
        let lambda = dot(&v, &w);
        residual = w
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt();
        if lambda > 0.0 && residual <= config.power_tolerance * lambda {
            orient_entry_sum(&mut v);
            return Ok(v);
        }
        residual /= lambda.abs().max(f64::MIN_POSITIVE);
        v = w.into_iter().map(|a| a / w_norm).collect();
    }
    Err(Error::NoConvergence {
        iters: config.power_max_iters,
        residual,
    })
}

fn fixed_random_unit(m: usize) -> Vec<f64> {
    let mut rng = seed::stream(0x005e_ed0f_5eed);
    let v: Vec<f64> = (0..m).map(|_| seed::unit_f64(rng.next_u64()) - 0.5).collect();
    let n = norm(&v);
    v.into_iter().map(|a| a / n).collect()
}

fn orient_entry_sum(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    let flip = if s != 0.0 {
        s < 0.0
    } else {
        v.iter().find(|&&a| a != 0.0).is_some_and(|&a| a < 0.0)
    };
    if flip {
        v.iter_mut().for_each(|a| *a = -*a);
    }
}

/// Flip `v` so that `⟨v, reference⟩ ≥ 0`.
pub(crate) fn orient_to(v: &mut [f64], reference: &[f64]) {
    if dot(v, reference) < 0.0 {
        v.iter_mut().for_each(|a| *a = -*a);
    }
}

/// Direction whose matched filter correlates nonnegatively with row averages: `Xᵀ X 1`.
pub(crate) fn row_average_reference<M: MatrixView + ?Sized>(x: &M) -> Vec<f64> {
    let sums: Vec<f64> = (0..x.nrows()).map(|i| x.row_sum(i)).collect();
    x.mul_t_vec(&sums)
}

/// Split-matrix estimate with an explicit partition of the rows.
///
/// `reference`, when given, fixes the sign of both half-filters. Returns the
/// scores of `half_a` followed by those of `half_b`, divided by `v_norm`.
pub(crate) fn split_scores(
    half_a: &dyn MatrixView,
    half_b: &dyn MatrixView,
    v_norm: f64,
    reference: Option<&[f64]>,
    config: &SpectralConfig,
) -> Result<Vec<f64>> {
    let filter = |half: &dyn MatrixView| -> Result<Vec<f64>> {
        let mut v = leading_right_singular_vector(half, config)?;
        if let Some(r) = reference {
            orient_to(&mut v, r);
        }
        Ok(v)
    };
    let v_a = filter(half_a)?;
    let v_b = filter(half_b)?;
    let scale_a = 1.0 / (norm(&v_b) * v_norm);
    let scale_b = 1.0 / (norm(&v_a) * v_norm);
    let mut out: Vec<f64> = half_a.mul_vec(&v_b).into_iter().map(|s| s * scale_a).collect();
    out.extend(half_b.mul_vec(&v_a).into_iter().map(|s| s * scale_b));
    Ok(out)
}

/// Split-matrix spectral estimate of `u`: first `⌈n/2⌉` rows form half A.
pub fn estimate_split<M: MatrixView + ?Sized>(x: &M, v_norm: f64, config: &SpectralConfig) -> Result<SpectralEstimate> {
    config.validate()?;
    let n = x.nrows();
    if n < 2 {
        return Err(invalid(format!("split estimation needs at least 2 rows, got {n}")));
    }
    if !(v_norm > 0.0 && v_norm.is_finite()) {
        return Err(invalid(format!("‖v‖ = {v_norm} must be positive")));
    }
    let h = n.div_ceil(2);
    let as_dyn: &dyn MatrixView = &x;
    let mut a = RowSelection::new(x.ncols());
    a.push_rows(as_dyn, 0..h);
    let mut b = RowSelection::new(x.ncols());
    b.push_rows(as_dyn, h..n);
    for (half, start, end) in [(&a, 0, h), (&b, h, n)] {
        if half.is_zero() {
            return Err(Error::DegenerateHalf { start, end });
        }
    }
    let reference = match config.orientation {
        Orientation::EntrySum => None,
        Orientation::RowAverage => Some(row_average_reference(x)),
    };
    let u_hat = split_scores(&a, &b, v_norm, reference.as_deref(), config)?;
    Ok(SpectralEstimate {
        u_hat,
        ci_half_width: Some(uniform_half_width(n, x.ncols(), config)?),
        m_used: x.ncols(),
        method: VHatMethod::SplitSvd,
    })
}

/// Column-sum filter over the whole matrix, oriented by `reference` or by the config.
pub(crate) fn column_sum_filter<M: MatrixView + ?Sized>(
    x: &M,
    reference: Option<&[f64]>,
    config: &SpectralConfig,
) -> Result<Vec<f64>> {
    if x.nrows() == 0 || x.ncols() == 0 || x.is_zero() {
        return Err(Error::ZeroMatrix);
    }
    let mut v = x.column_sums();
    let n = norm(&v);
    if n == 0.0 {
        return Err(invalid("column sums vanish; the column-sum filter is undefined"));
    }
    v.iter_mut().for_each(|a| *a /= n);
    match (reference, config.orientation) {
        (Some(r), _) => orient_to(&mut v, r),
        (None, Orientation::EntrySum) => orient_entry_sum(&mut v),
        (None, Orientation::RowAverage) => orient_to(&mut v, &row_average_reference(x)),
    }
    Ok(v)
}

/// Leading right singular vector of the whole matrix, oriented by `reference` or by the config.
pub(crate) fn full_svd_filter<M: MatrixView + ?Sized>(
    x: &M,
    reference: Option<&[f64]>,
    config: &SpectralConfig,
) -> Result<Vec<f64>> {
    let mut v = leading_right_singular_vector(x, config)?;
    match (reference, config.orientation) {
        (Some(r), _) => orient_to(&mut v, r),
        (None, Orientation::EntrySum) => {}
        (None, Orientation::RowAverage) => orient_to(&mut v, &row_average_reference(x)),
    }
    Ok(v)
}

/// Column-sum variant: `v̂ ∝ Xᵀ1`, `û = X v̂ / ‖v‖` (or raw scores when `‖v‖` is unknown).
pub fn estimate_column_sum<M: MatrixView + ?Sized>(
    x: &M,
    v_norm: Option<f64>,
    config: &SpectralConfig,
) -> Result<SpectralEstimate> {
    config.validate()?;
    if let Some(s) = v_norm {
        if !(s > 0.0 && s.is_finite()) {
            return Err(invalid(format!("‖v‖ = {s} must be positive")));
        }
    }
    let v = column_sum_filter(x, None, config)?;
    let scale = v_norm.map_or(1.0, |s| 1.0 / s);
    let u_hat = x.mul_vec(&v).into_iter().map(|a| a * scale).collect();
    let ci_half_width = match v_norm {
        Some(_) => Some(uniform_half_width(x.nrows(), x.ncols(), config)?),
        None => None,
    };
    Ok(SpectralEstimate {
        u_hat,
        ci_half_width,
        m_used: x.ncols(),
        method: VHatMethod::ColumnSum,
    })
}

/// Half-width `Γ` such that `|û_i − u_i| ≤ Γ` with probability at least `1 − δ`.
pub fn confidence_half_width(n: usize, m: usize, delta: f64, config: &SpectralConfig) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta = {delta} must lie in (0, 1)")));
    }
    if n == 0 || m == 0 {
        return Err(invalid("n and m must be at least 1"));
    }
    let numerator = (1.0 / delta).ln() + ((m + n + 2) as f64).ln();
    Ok((numerator / (config.c4_scaled()? * n.min(m) as f64)).sqrt())
}

/// All-items half-width (`δ = 1/n³`): holds for every `i` simultaneously with
/// probability at least `1 − 1/n²`.
pub fn uniform_half_width(n: usize, m: usize, config: &SpectralConfig) -> Result<f64> {
    if n == 0 || m == 0 {
        return Err(invalid("n and m must be at least 1"));
    }
    let numerator = 3.0 * (n as f64).ln() + 2.0 * ((m + n) as f64).ln();
    Ok((numerator / (config.c4_scaled()? * n.min(m) as f64)).sqrt())
}

/// Row averages `(1/m) Σ_j X_ij`.
///
/// Preserves the ordering of `u` in expectation but is a biased estimate of
/// `u_i` itself (it estimates `u_i · mean(v)`).
pub fn row_average_scores<M: MatrixView + ?Sized>(x: &M) -> Result<Vec<f64>> {
    let m = x.ncols();
    if m == 0 {
        return Err(invalid("row averages need at least one column"));
    }
    Ok((0..x.nrows()).map(|i| x.row_sum(i) / m as f64).collect())
}

/// One ground-truth trial for constant calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageSample {
    /// `max_i |û_i − u_i|`.
    pub max_abs_error: f64,
    pub n: usize,
    pub m: usize,
}

/// Largest `constant_scale` for which `confidence_half_width(n, m, delta)`
/// covers the observed maximum error in at least a `1 − delta` fraction of the
/// samples.
pub fn calibrate_constant_scale(samples: &[CoverageSample], delta: f64, config: &SpectralConfig) -> Result<f64> {
    if samples.is_empty() {
        return Err(invalid("calibration needs at least one sample"));
    }
    let base = SpectralConfig {
        constant_scale: 1.0,
        ..config.clone()
    };
    let mut ceilings = samples
        .iter()
        .map(|s| {
            let g = confidence_half_width(s.n, s.m, delta, &base)?;
            Ok(if s.max_abs_error > 0.0 {
                (g / s.max_abs_error).powi(2)
            } else {
                f64::INFINITY
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    ceilings.sort_by(|a, b| b.total_cmp(a));
    let need = ((1.0 - delta) * samples.len() as f64).ceil().max(1.0) as usize;
    let scale = ceilings[need - 1];
    if !scale.is_finite() {
        // Every required sample was exact; any scale works, keep the literal constants' scale.
        return Ok(config.constant_scale.max(1.0));
    }
    Ok(scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{DenseMatrix, ObservationMatrix};

    fn cfg() -> SpectralConfig {
        SpectralConfig::default()
    }

    #[test]
    fn singular_vector_exact_rank_one() {
        let x = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        let v = leading_right_singular_vector(&x, &cfg()).unwrap();
        assert!((v[0] - 1.0 / 5f64.sqrt()).abs() < 1e-10);
        assert!((v[1] - 2.0 / 5f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn singular_vector_single_entry() {
        let x = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let v = leading_right_singular_vector(&x, &cfg()).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-12 && v[1].abs() < 1e-12);
    }

    #[test]
    fn singular_vector_rejects_zero() {
        let x = DenseMatrix::zeros(3, 2);
        assert!(matches!(leading_right_singular_vector(&x, &cfg()), Err(Error::ZeroMatrix)));
    }

    #[test]
    fn singular_vector_restarts_when_start_is_orthogonal() {
        // X·1 = 0, so the all-ones start is annihilated.
        let x = DenseMatrix::from_rows(&[vec![1.0, -1.0], vec![2.0, -2.0]]).unwrap();
        let v = leading_right_singular_vector(&x, &cfg()).unwrap();
        let r = 0.5f64.sqrt();
        assert!((v[0].abs() - r).abs() < 1e-10 && (v[0] + v[1]).abs() < 1e-10);
        assert!(v[0] > 0.0, "tie broken toward a positive first entry");
    }

    #[test]
    fn non_convergence_is_reported() {
        let x = DenseMatrix::from_rows(&[vec![1.0, 0.3], vec![0.2, 0.9]]).unwrap();
        let c = SpectralConfig {
            power_max_iters: 1,
            ..cfg()
        };
        assert!(matches!(
            leading_right_singular_vector(&x, &c),
            Err(Error::NoConvergence { iters: 1, .. })
        ));
    }

    #[test]
    fn noiseless_split_recovery() {
        let u = [0.2, 0.4, 0.6, 0.8];
        let v = [0.5, 0.5, 0.5];
        let x = DenseMatrix::outer(&u, &v);
        let est = estimate_split(&x, 0.75f64.sqrt(), &cfg()).unwrap();
        for (a, b) in est.u_hat.iter().zip(&u) {
            assert!((a - b).abs() < 1e-8);
        }
        assert_eq!(est.m_used, 3);
        assert!(est.ci_half_width.unwrap() > 0.0);
    }

    #[test]
    fn split_rejects_small_or_degenerate_input() {
        let x = DenseMatrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        assert!(estimate_split(&x, 1.0, &cfg()).is_err());
        let x = DenseMatrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(
            estimate_split(&x, 1.0, &cfg()),
            Err(Error::DegenerateHalf { start: 0, end: 1 })
        ));
        let x = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert!(estimate_split(&x, 0.0, &cfg()).is_err());
    }

    #[test]
    fn column_sum_noiseless() {
        let u = [0.3, 0.9, 0.6];
        let v = [0.2, 0.7, 0.4, 0.5];
        let x = DenseMatrix::outer(&u, &v);
        let scores = estimate_column_sum(&x, None, &cfg()).unwrap();
        assert!(scores.ci_half_width.is_none());
        let ratio = scores.u_hat[0] / u[0];
        assert!(ratio > 0.0);
        for (s, t) in scores.u_hat.iter().zip(&u) {
            assert!((s / t - ratio).abs() < 1e-12);
        }
        let vn = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let est = estimate_column_sum(&x, Some(vn), &cfg()).unwrap();
        for (a, b) in est.u_hat.iter().zip(&u) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!(matches!(
            estimate_column_sum(&DenseMatrix::zeros(2, 2), None, &cfg()),
            Err(Error::ZeroMatrix)
        ));
    }

    #[test]
    fn constants_reference_values() {
        let k = constants(0.5).unwrap();
        assert!((k.c2 - 1.302e-3).abs() < 1e-6);
        assert!((k.c3 - 106.43).abs() < 5e-3);
        assert!((k.c4 - 3.617e-5).abs() < 1e-8);
        assert!((k.c1 - 6.13e-7).abs() < 1e-9);
        assert!((k.c5 - 9.58e-9).abs() < 1e-11);
        let k = constants(0.9).unwrap();
        assert!((k.c2 - 1.367e-2).abs() < 1e-5);
        assert!((k.c4 - 1.230e-3).abs() < 1e-6);
        assert!((k.c1 - 9.56e-6).abs() < 1e-8);
        assert!(constants(0.0).is_err() && constants(1.0).is_err());
    }

    #[test]
    fn half_width_reference_value() {
        let g = confidence_half_width(1_000_000, 1_000_000, 0.01, &cfg()).unwrap();
        assert!((g - 0.727).abs() < 1e-3, "{g}");
    }

    #[test]
    fn half_width_scaling_and_monotonicity() {
        let c = cfg();
        // Keep m + n fixed so only min(m, n) changes.
        let a = confidence_half_width(400, 1600, 0.05, &c).unwrap();
        let b = confidence_half_width(1600, 400, 0.05, &c).unwrap();
        assert_eq!(a, b);
        let g1 = confidence_half_width(1000, 250, 0.05, &c).unwrap();
        let g4 = confidence_half_width(1000, 250, 0.05, &SpectralConfig { constant_scale: 4.0, ..c.clone() }).unwrap();
        assert!((g1 / g4 - 2.0).abs() < 1e-12);
        assert!(confidence_half_width(100, 100, 0.001, &c).unwrap() > confidence_half_width(100, 100, 0.01, &c).unwrap());
        assert!(confidence_half_width(100, 100, 1.0, &c).is_err());
    }

    #[test]
    fn row_average_examples() {
        let x = ObservationMatrix::from_values(&[vec![1.0, 1.0], vec![0.0, 0.0]], 0.0, 1.0).unwrap();
        assert_eq!(row_average_scores(&x).unwrap(), vec![1.0, 0.0]);
        let u = [0.1, 0.5, 0.3];
        let v = [0.2, 0.6];
        let s = row_average_scores(&DenseMatrix::outer(&u, &v)).unwrap();
        for (a, b) in s.iter().zip(&u) {
            assert!((a - b * 0.4).abs() < 1e-15);
        }
    }

    #[test]
    fn row_average_orientation_flips_negative_scores() {
        // u = (-1, -2): entry-sum orientation of v̂ gives negative scores; the
        // row-average rule agrees with the sign of the row averages instead.
        let x = DenseMatrix::outer(&[-1.0, -2.0, -1.5, -0.5], &[0.5, 0.25]);
        let c = SpectralConfig {
            orientation: Orientation::RowAverage,
            ..cfg()
        };
        let est = estimate_split(&x, 1.0, &c).unwrap();
        let avg = row_average_scores(&x).unwrap();
        let corr: f64 = est.u_hat.iter().zip(&avg).map(|(a, b)| a * b).sum();
        assert!(corr >= 0.0);
    }

    #[test]
    fn calibration_picks_largest_covering_scale() {
        let c = cfg();
        let g = confidence_half_width(100, 100, 0.1, &c).unwrap();
        let samples: Vec<CoverageSample> = (1..=10)
            .map(|k| CoverageSample {
                max_abs_error: g * k as f64 / 10.0,
                n: 100,
                m: 100,
            })
            .collect();
        let s = calibrate_constant_scale(&samples, 0.1, &c).unwrap();
        // Nine of ten samples must be covered: the ninth smallest error is 0.9·g.
        assert!((s - (1.0 / 0.81)).abs() < 1e-9);
        let covered = samples
            .iter()
            .filter(|t| t.max_abs_error <= g / s.sqrt() * (1.0 + 1e-12))
            .count();
        assert_eq!(covered, 9);
    }
}
