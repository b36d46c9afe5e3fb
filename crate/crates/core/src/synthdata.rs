//! Synthetic crowdsourcing instances and planted read sets.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{invalid, Result};
use crate::minhash::Read;
use crate::model::{Family, RankOneInstance};
use crate::sampler::{ColumnLaw, InstanceSource};
use crate::seed;

const BASES: [u8; 4] = *b"ACGT";
const WORKER_TAG: u64 = 0x3071;

/// Crowd instance: item qualities `p_i ~ Beta(1, 5)` and worker error
/// rates `q_j ~ Uniform(0, 1)` drawn lazily per column, binary symmetric channel.
#[derive(Debug, Clone, PartialEq)]
pub struct CrowdInstance {
    pub p: Vec<f64>,
    pub seed: u64,
}

impl CrowdInstance {
    /// Worker error rate `q_j`.
    pub fn worker(&self, j: usize) -> f64 {
        seed::unit_f64(seed::derive(self.seed, &[WORKER_TAG, j as u64]))
    }

    /// True item values `u_i = p_i − ½`.
    pub fn item_values(&self) -> Vec<f64> {
        self.p.iter().map(|&p| Family::XorSymmetric.item_value(p)).collect()
    }

    /// Materialize the first `m` workers.
    pub fn rank_one(&self, m: usize) -> Result<RankOneInstance> {
        RankOneInstance::xor_symmetric(self.p.clone(), (0..m).map(|j| self.worker(j)).collect())
    }

    /// Endless source of fresh workers with `n_calibration` known-answer rows
    /// (`p = 0`, so `u = −½`).
    pub fn source(&self, sampler_seed: u64, n_calibration: usize) -> Result<InstanceSource> {
        InstanceSource::new(
            Family::XorSymmetric,
            self.p.clone(),
            ColumnLaw::Uniform { lo: 0.0, hi: 1.0 },
            sampler_seed,
        )?
        .with_calibration(n_calibration, 0.0)
    }
}

pub fn gen_crowd_instance(n: usize, seed: u64) -> Result<CrowdInstance> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let beta = Beta::new(1.0, 5.0).expect("valid Beta parameters");
    let mut rng = seed::stream(seed);
    Ok(CrowdInstance {
        p: (0..n).map(|_| beta.sample(&mut rng)).collect(),
        seed,
    })
}

/// Uniform i.i.d. bases.
pub fn gen_genome(length: usize, seed: u64) -> Result<String> {
    if length == 0 {
        return Err(invalid("genome length must be at least 1"));
    }
    let mut rng = seed::stream(seed);
    let bytes: Vec<u8> = (0..length).map(|_| BASES[rng.random_range(0..4)]).collect();
    Ok(String::from_utf8(bytes).expect("ASCII"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedReadSet {
    pub reference: Read,
    /// Non-calibration reads first, then calibration reads.
    pub reads: Vec<Read>,
    /// Overlap fraction with the reference, aligned with `reads`.
    pub true_overlap: Vec<f64>,
    pub genome_length: usize,
    pub read_length: usize,
    pub noise_rate: f64,
}

impl PlantedReadSet {
    pub fn items(&self) -> &[Read] {
        let n = self.reads.iter().take_while(|r| !r.is_calibration).count();
        &self.reads[..n]
    }

    pub fn calibration(&self) -> &[Read] {
        let n = self.items().len();
        &self.reads[n..]
    }
}

fn mutate(seq: &[u8], rate: f64, rng: &mut impl Rng) -> String {
    let out: Vec<u8> = seq
        .iter()
        .map(|&b| {
            if rate > 0.0 && rng.random::<f64>() < rate {
                let others: Vec<u8> = BASES.iter().copied().filter(|&c| c != b).collect();
                others[rng.random_range(0..3)]
            } else {
                b
            }
        })
        .collect();
    String::from_utf8(out).expect("ASCII")
}

/// Reference at offset 0, read `i` at `offsets[i]`, each with substitution noise.
///
/// Overlap of read `i` is `max(0, 1 − o_i / L)`: its prefix matches a suffix
/// of the reference. Calibration reads are uniform random sequences.
pub fn gen_reads_with_overlaps(
    genome: &str,
    read_length: usize,
    offsets: &[usize],
    noise_rate: f64,
    n_calibration: usize,
    seed: u64,
) -> Result<PlantedReadSet> {
    let g = genome.len();
    if read_length == 0 || read_length > g {
        return Err(invalid(format!("read length {read_length} must lie in [1, {g}]")));
    }
    if !(0.0..=1.0).contains(&noise_rate) {
        return Err(invalid(format!("noise rate {noise_rate} outside [0, 1]")));
    }
    if let Some(&o) = offsets.iter().find(|&&o| o + read_length > g) {
        return Err(invalid(format!("offset {o} + read length {read_length} exceeds genome length {g}")));
    }
    let bytes = genome.as_bytes();
    let mut rng = seed::stream(seed);
    let reference = Read::new("ref", mutate(&bytes[..read_length], noise_rate, &mut rng));
    let mut reads = Vec::with_capacity(offsets.len() + n_calibration);
    let mut overlap = Vec::with_capacity(offsets.len() + n_calibration);
    for (i, &o) in offsets.iter().enumerate() {
        reads.push(Read::new(format!("read{i}"), mutate(&bytes[o..o + read_length], noise_rate, &mut rng)));
        overlap.push((1.0 - o as f64 / read_length as f64).max(0.0));
    }
    for c in 0..n_calibration {
        let s: Vec<u8> = (0..read_length).map(|_| BASES[rng.random_range(0..4)]).collect();
        reads.push(Read::calibration(format!("cal{c}"), String::from_utf8(s).expect("ASCII")));
        overlap.push(0.0);
    }
    Ok(PlantedReadSet {
        reference,
        reads,
        true_overlap: overlap,
        genome_length: g,
        read_length,
        noise_rate,
    })
}

/// Overlap bands for a planted layout; overlaps are spread evenly within a band.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapLayout {
    pub n_top: usize,
    pub top: (f64, f64),
    pub n_mid: usize,
    pub mid: (f64, f64),
    /// Reads placed past the reference, with zero overlap.
    pub n_zero: usize,
}

fn band(count: usize, (lo, hi): (f64, f64)) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![hi],
        _ => (0..count).map(|i| hi - (hi - lo) * i as f64 / (count - 1) as f64).collect(),
    }
}

/// Offsets for `layout` in shuffled order.
pub fn layout_offsets(layout: &OverlapLayout, read_length: usize, genome_length: usize, seed: u64) -> Result<Vec<usize>> {
    for (lo, hi) in [layout.top, layout.mid] {
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(invalid(format!("overlap band [{lo}, {hi}] outside [0, 1]")));
        }
    }
    if layout.n_zero > 0 && genome_length < 2 * read_length {
        return Err(invalid("zero-overlap reads need a genome at least twice the read length"));
    }
    let l = read_length as f64;
    let mut offsets: Vec<usize> = band(layout.n_top, layout.top)
        .into_iter()
        .chain(band(layout.n_mid, layout.mid))
        .map(|p| ((1.0 - p) * l).round() as usize)
        .collect();
    let mut rng = seed::stream(seed);
    for _ in 0..layout.n_zero {
        offsets.push(rng.random_range(read_length..=genome_length - read_length));
    }
    offsets.shuffle(&mut rng);
    Ok(offsets)
}
