//! Rank-one response models and the channels that corrupt them.
//!
//! Three observation models share the form `E X = u vᵀ`:
//!
//! - `Raw`: `X_ij ~ Ber(u_i v_j)` directly.
//! - `OrZ` (Z-channel): `Y_ij = Ber(p_i) ∨ Ber(q_j)` and `X = 11ᵀ − Y`, so
//!   `E X = (1 − p)(1 − q)ᵀ` with `u = 1 − p`, `v = 1 − q`.
//! - `XorSymmetric` (binary symmetric channel): `Y_ij = Ber(p_i) ⊕ Ber(q_j)`
//!   and `X = Y − ½11ᵀ`, so `E X = (p − ½1)(1 − 2q)ᵀ`.

use rand::RngCore;

use crate::error::{invalid, Error, Result};
use crate::matrix::{DenseMatrix, ObservationMatrix};
use crate::seed;

/// Channel family, without parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Raw,
    OrZ,
    XorSymmetric,
}

impl Family {
    /// Levels `(lo, hi)` of the transformed observations.
    pub fn levels(self) -> (f64, f64) {
        match self {
            Family::Raw | Family::OrZ => (0.0, 1.0),
            Family::XorSymmetric => (-0.5, 0.5),
        }
    }

    /// Probability that the *pre-transform* observation is 1, given the row
    /// parameter (`u` for Raw, `p` otherwise) and the column parameter (`v`
    /// for Raw, `q` otherwise).
    #[inline]
    pub fn one_probability(self, row: f64, col: f64) -> f64 {
        match self {
            Family::Raw => row * col,
            Family::OrZ => 1.0 - (1.0 - row) * (1.0 - col),
            Family::XorSymmetric => row * (1.0 - col) + col * (1.0 - row),
        }
    }

    /// Item parameter `u_i` implied by a row parameter.
    pub fn item_value(self, row: f64) -> f64 {
        match self {
            Family::Raw => row,
            Family::OrZ => 1.0 - row,
            Family::XorSymmetric => row - 0.5,
        }
    }

    /// Worker parameter `v_j` implied by a column parameter.
    pub fn worker_value(self, col: f64) -> f64 {
        match self {
            Family::Raw => col,
            Family::OrZ => 1.0 - col,
            Family::XorSymmetric => 1.0 - 2.0 * col,
        }
    }

    /// Map raw `{0,1}` observations to the rank-one form.
    pub fn transform(self, raw: ObservationMatrix) -> ObservationMatrix {
        match self {
            Family::Raw => raw,
            Family::OrZ => raw.complement_bits(),
            Family::XorSymmetric => raw.relabel(-0.5, 0.5),
        }
    }
}

/// Channel together with its raw parameter vectors.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelKind {
    Raw,
    /// `Y = Ber(p_i) ∨ Ber(q_j)`.
    OrZ { p: Vec<f64>, q: Vec<f64> },
    /// `Y = Ber(p_i) ⊕ Ber(q_j)`.
    XorSymmetric { p: Vec<f64>, q: Vec<f64> },
}

impl ChannelKind {
    pub fn family(&self) -> Family {
        match self {
            ChannelKind::Raw => Family::Raw,
            ChannelKind::OrZ { .. } => Family::OrZ,
            ChannelKind::XorSymmetric { .. } => Family::XorSymmetric,
        }
    }
}

/// Ground-truth parameters of a rank-one model.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneInstance {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub channel: ChannelKind,
    pub c_lower: f64,
    pub c_upper: f64,
}

impl RankOneInstance {
    /// Raw Bernoulli model with bounds taken from the data.
    pub fn raw(u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        let lo = u.iter().chain(&v).copied().fold(f64::INFINITY, f64::min);
        let hi = u.iter().chain(&v).copied().fold(f64::NEG_INFINITY, f64::max);
        Self::raw_with_bounds(u, v, lo, hi)
    }

    /// Raw Bernoulli model with every entry of `u`, `v` in `[c_lower, c_upper] ⊆ [0, 1]`.
    pub fn raw_with_bounds(u: Vec<f64>, v: Vec<f64>, c_lower: f64, c_upper: f64) -> Result<Self> {
        nonempty(&u, &v)?;
        if !(0.0..=1.0).contains(&c_lower) || !(c_lower..=1.0).contains(&c_upper) {
            return Err(invalid(format!("bounds [{c_lower}, {c_upper}] must lie in [0, 1]")));
        }
        if let Some(x) = u.iter().chain(&v).find(|x| !(c_lower..=c_upper).contains(*x)) {
            return Err(invalid(format!("entry {x} outside [{c_lower}, {c_upper}]")));
        }
        Ok(Self {
            u,
            v,
            channel: ChannelKind::Raw,
            c_lower,
            c_upper,
        })
    }

    /// Z-channel model; `u = 1 − p`, `v = 1 − q`.
    pub fn or_z(p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        probabilities(&p, &q)?;
        let u = p.iter().map(|&x| Family::OrZ.item_value(x)).collect();
        let v = q.iter().map(|&x| Family::OrZ.worker_value(x)).collect();
        Ok(Self::with_channel(u, v, ChannelKind::OrZ { p, q }))
    }

    /// Binary symmetric channel model; `u = p − ½`, `v = 1 − 2q`.
    pub fn xor_symmetric(p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        probabilities(&p, &q)?;
        let u = p.iter().map(|&x| Family::XorSymmetric.item_value(x)).collect();
        let v = q.iter().map(|&x| Family::XorSymmetric.worker_value(x)).collect();
        Ok(Self::with_channel(u, v, ChannelKind::XorSymmetric { p, q }))
    }

    fn with_channel(u: Vec<f64>, v: Vec<f64>, channel: ChannelKind) -> Self {
        let abs = |x: &f64| x.abs();
        let c_lower = u.iter().chain(&v).map(abs).fold(f64::INFINITY, f64::min);
        let c_upper = u.iter().chain(&v).map(abs).fold(0.0, f64::max);
        Self {
            u,
            v,
            channel,
            c_lower,
            c_upper,
        }
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }

    pub fn m(&self) -> usize {
        self.v.len()
    }

    pub fn family(&self) -> Family {
        self.channel.family()
    }

    /// Row parameter fed to the channel (`u_i` for Raw, `p_i` otherwise).
    pub fn row_param(&self, i: usize) -> f64 {
        match &self.channel {
            ChannelKind::Raw => self.u[i],
            ChannelKind::OrZ { p, .. } | ChannelKind::XorSymmetric { p, .. } => p[i],
        }
    }

    /// Column parameter fed to the channel (`v_j` for Raw, `q_j` otherwise).
    pub fn col_param(&self, j: usize) -> f64 {
        match &self.channel {
            ChannelKind::Raw => self.v[j],
            ChannelKind::OrZ { q, .. } | ChannelKind::XorSymmetric { q, .. } => q[j],
        }
    }

    pub fn v_norm(&self) -> f64 {
        self.v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

fn nonempty(u: &[f64], v: &[f64]) -> Result<()> {
    if u.is_empty() || v.is_empty() {
        return Err(invalid("u and v must be nonempty"));
    }
    Ok(())
}

fn probabilities(p: &[f64], q: &[f64]) -> Result<()> {
    nonempty(p, q)?;
    if let Some(x) = p.iter().chain(q).find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(invalid(format!("channel parameter {x} outside [0, 1]")));
    }
    Ok(())
}

/// Draw pre-transform `{0,1}` observations.
///
/// Row `r` of the output uses its own stream derived from `(seed, row_ids[r])`,
/// so any subset of rows can be regenerated independently. `prob(row_id, j)`
/// gives `P(Y = 1)` for column `j`.
pub fn sample_raw_bits<F>(row_ids: &[usize], n_cols: usize, seed: u64, prob: F) -> ObservationMatrix
where
    F: Fn(usize, usize) -> f64,
{
    let mut bits = Vec::with_capacity(row_ids.len() * n_cols);
    for &id in row_ids {
        let mut rng = seed::stream(seed::derive(seed, &[id as u64]));
        for j in 0..n_cols {
            // Bernoulli(p) from a 32-bit uniform, exact up to 2⁻³².
            let cut = prob(id, j) * 4_294_967_296.0;
            bits.push(((rng.next_u32() as f64) < cut) as u8);
        }
    }
    ObservationMatrix::from_bits(row_ids.len(), n_cols, bits, 0.0, 1.0, seed)
        .expect("bits are 0/1 by construction")
}

/// Sample the transformed observation matrix for `row_ids` over the first
/// `n_cols` workers of `instance`.
pub fn sample_observations(
    instance: &RankOneInstance,
    row_ids: &[usize],
    n_cols: usize,
    seed: u64,
) -> Result<ObservationMatrix> {
    if row_ids.is_empty() {
        return Err(invalid("row_ids must be nonempty"));
    }
    if n_cols == 0 {
        return Err(invalid("n_cols must be at least 1"));
    }
    if n_cols > instance.m() {
        return Err(invalid(format!(
            "requested {n_cols} columns but the instance has {} workers",
            instance.m()
        )));
    }
    if let Some(&bad) = row_ids.iter().find(|&&i| i >= instance.n()) {
        return Err(Error::UnknownRow(bad));
    }
    let family = instance.family();
    let raw = sample_raw_bits(row_ids, n_cols, seed, |i, j| {
        family.one_probability(instance.row_param(i), instance.col_param(j))
    });
    Ok(family.transform(raw))
}

/// Apply the channel's rank-one transform to a raw `{0,1}` matrix.
pub fn transform_channel(raw: ObservationMatrix, channel: &ChannelKind) -> Result<ObservationMatrix> {
    if raw.lo() != 0.0 || raw.hi() != 1.0 {
        return Err(invalid(format!(
            "raw observations must take values in {{0, 1}}, got {{{}, {}}}",
            raw.lo(),
            raw.hi()
        )));
    }
    Ok(channel.family().transform(raw))
}

/// Exact expectation `u vᵀ` of the transformed observations.
pub fn expected_matrix(instance: &RankOneInstance) -> DenseMatrix {
    DenseMatrix::outer(&instance.u, &instance.v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::MatrixView;

    #[test]
    fn expected_matrix_examples() {
        let raw = RankOneInstance::raw(vec![0.2, 0.4], vec![0.5]).unwrap();
        let e = expected_matrix(&raw);
        assert!((e.get(0, 0) - 0.1).abs() < 1e-15 && (e.get(1, 0) - 0.2).abs() < 1e-15);

        let z = RankOneInstance::or_z(vec![0.0], vec![0.0]).unwrap();
        assert_eq!(expected_matrix(&z).get(0, 0), 1.0);

        let x = RankOneInstance::xor_symmetric(vec![0.8], vec![0.1]).unwrap();
        assert!((expected_matrix(&x).get(0, 0) - 0.24).abs() < 1e-12);
    }

    #[test]
    fn seeded_determinism() {
        let inst = RankOneInstance::raw(vec![0.3, 0.7, 0.5], vec![0.4; 50]).unwrap();
        let a = sample_observations(&inst, &[0, 2], 50, 9).unwrap();
        let b = sample_observations(&inst, &[0, 2], 50, 9).unwrap();
        assert_eq!(a, b);
        let c = sample_observations(&inst, &[0, 2], 50, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rows_are_reproducible_in_isolation() {
        let inst = RankOneInstance::raw(vec![0.3, 0.7, 0.5], vec![0.4; 50]).unwrap();
        let all = sample_observations(&inst, &[0, 1, 2], 50, 3).unwrap();
        let one = sample_observations(&inst, &[1], 50, 3).unwrap();
        assert_eq!(all.row_bits(1), one.row_bits(0));
    }

    #[test]
    fn degenerate_raw_row_is_all_lo() {
        let inst = RankOneInstance::raw(vec![0.0, 0.9], vec![0.8; 100]).unwrap();
        let x = sample_observations(&inst, &[0], 100, 1).unwrap();
        assert!(x.row_is_zero(0));
    }

    #[test]
    fn noiseless_z_channel_is_all_ones() {
        let inst = RankOneInstance::or_z(vec![0.0], vec![0.0; 64]).unwrap();
        let x = sample_observations(&inst, &[0], 64, 5).unwrap();
        assert_eq!(x.row_hi_count(0), 64);
        assert_eq!((x.lo(), x.hi()), (0.0, 1.0));
    }

    #[test]
    fn xor_levels() {
        let inst = RankOneInstance::xor_symmetric(vec![0.2, 0.9], vec![0.3; 10]).unwrap();
        let x = sample_observations(&inst, &[0, 1], 10, 5).unwrap();
        assert_eq!((x.lo(), x.hi()), (-0.5, 0.5));
    }

    #[test]
    fn errors() {
        let inst = RankOneInstance::raw(vec![0.3], vec![0.4; 5]).unwrap();
        assert!(matches!(sample_observations(&inst, &[1], 5, 0), Err(Error::UnknownRow(1))));
        assert!(sample_observations(&inst, &[0], 0, 0).is_err());
        assert!(sample_observations(&inst, &[], 3, 0).is_err());
        let xor = ObservationMatrix::from_values(&[vec![-0.5, 0.5]], -0.5, 0.5).unwrap();
        assert!(transform_channel(xor, &ChannelKind::Raw).is_err());
        assert!(RankOneInstance::or_z(vec![1.5], vec![0.1]).is_err());
        assert!(RankOneInstance::raw_with_bounds(vec![0.05], vec![0.5], 0.1, 0.9).is_err());
    }

    #[test]
    fn transform_examples() {
        // OrZ at p = q = 0.5: P(Y = 1) = 0.75, so P(X = 1) = 0.25.
        assert!((Family::OrZ.one_probability(0.5, 0.5) - 0.75).abs() < 1e-15);
        let y = ObservationMatrix::from_values(&[vec![1.0, 0.0]], 0.0, 1.0).unwrap();
        let chan = ChannelKind::OrZ {
            p: vec![0.5],
            q: vec![0.5, 0.5],
        };
        let x = transform_channel(y.clone(), &chan).unwrap();
        assert_eq!((x.get(0, 0), x.get(0, 1)), (0.0, 1.0));
        // XorSymmetric at p = 0.5: P(Y = 1) = 0.5 whatever q is.
        for q in [0.0, 0.3, 1.0] {
            assert!((Family::XorSymmetric.one_probability(0.5, q) - 0.5).abs() < 1e-15);
        }
        let chan = ChannelKind::XorSymmetric {
            p: vec![0.5],
            q: vec![0.5, 0.5],
        };
        let x = transform_channel(y, &chan).unwrap();
        assert_eq!((x.get(0, 0), x.get(0, 1)), (0.5, -0.5));
    }
}
