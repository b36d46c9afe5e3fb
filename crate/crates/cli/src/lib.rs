//! Command-line driver: synthetic experiments, sketching and one-shot estimation.
//!
//! [`execute`] takes the full argument vector (program name first) and returns
//! the process exit code: 0 on success, 1 on usage errors, 2 on data errors.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use adaspec::estimator::{RoundData, ScoreEstimator, SpectralScorer};
use adaspec::eval::{
    instance_hardness, run_experiment, run_threshold_experiment, Algorithm, CurvePoint, TopKExperiment, TrialSetup,
};
use adaspec::minhash::{
    hash_seeds, jaccard_exact, parse_fasta, sketch_all, write_sketches, CollisionPool, PoolSource, Read,
};
use adaspec::sampler::Sampler;
use adaspec::seed::derive;
use adaspec::spectral::{
    calibrate_constant_scale, estimate_split, CoverageSample, Orientation, SpectralConfig, VHatMethod, VNormSource,
};
use adaspec::synthdata::{gen_crowd_instance, gen_genome, gen_reads_with_overlaps, layout_offsets, OverlapLayout};
use adaspec::threshold::ThresholdConfig;
use adaspec::topk::{Mode, Preference};
use adaspec::{MatrixView, ObservationMatrix};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

pub const CSV_HEADER: &str = "algorithm,budget,trials,exact_error,exact_error_se,top2k_recall,mean_pulls,seed";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl From<adaspec::Error> for CliError {
    fn from(e: adaspec::Error) -> Self {
        match e {
            adaspec::Error::InvalidArgument(m) => CliError::Usage(m),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "adaspec", version, about = "Adaptive spectral top-k and thresholding experiments")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Plain-text file of `key = value` lines; flags on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for trial parallelism (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthetic crowdsourcing top-k: adaptive vs uniform allocation.
    CrowdTopk(CrowdTopk),
    /// Synthetic crowdsourcing thresholding: adaptive vs one-shot.
    CrowdThreshold(CrowdThreshold),
    /// Min-hash sketches of a FASTA file, written in the binary sketch format.
    Sketch(SketchArgs),
    /// Top-k overlapping reads by min-hash collisions.
    AlignTopk(AlignTopk),
    /// One-shot split spectral estimate on a collision matrix.
    Estimate(EstimateArgs),
    /// Hardness report (gap and H2) for a vector of item values.
    Hardness(HardnessArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    SplitSvd,
    ColumnSum,
    FullSvd,
}

impl From<EstimatorArg> for VHatMethod {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::SplitSvd => VHatMethod::SplitSvd,
            EstimatorArg::ColumnSum => VHatMethod::ColumnSum,
            EstimatorArg::FullSvd => VHatMethod::FullSvd,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Theory,
    Practical,
}

#[derive(Debug, Clone, Args)]
pub struct BanditArgs {
    /// Number of items to identify.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Comma-separated total budgets (scientific notation allowed).
    #[arg(long, value_parser = parse_budgets, required = true)]
    pub budgets: Budgets,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Practical)]
    pub mode: ModeArg,
    /// Per-item column cap in practical mode: a number, or `none`. Default 10·√T.
    #[arg(long)]
    pub m_max: Option<String>,
    /// Estimate each round from its fresh columns only.
    #[arg(long)]
    pub no_reuse: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Budgets(pub Vec<u64>);

fn parse_count(s: &str) -> Result<u64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("not a number: {s:?}"))?;
    if !(v >= 1.0 && v.fract() == 0.0 && v < 1.8e19) {
        return Err(format!("{s:?} is not a positive integer"));
    }
    Ok(v as u64)
}

fn parse_budgets(s: &str) -> Result<Budgets, String> {
    let v = s.split(',').map(parse_count).collect::<Result<Vec<_>, _>>()?;
    if v.is_empty() {
        return Err("no budgets given".into());
    }
    Ok(Budgets(v))
}

#[derive(Debug, Args)]
pub struct CrowdTopk {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[command(flatten)]
    pub bandit: BanditArgs,
    /// Known-answer rows appended to every draw (fix the sign of the estimate).
    #[arg(long, default_value_t = 20)]
    pub calibration: usize,
    #[arg(long, value_enum, default_value_t = EstimatorArg::ColumnSum)]
    pub estimator: EstimatorArg,
}

#[derive(Debug, Args)]
pub struct CrowdThreshold {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Lower edge of the band, on the product-quality scale `p`.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Upper edge of the band, on the product-quality scale `p`.
    #[arg(long, default_value_t = 0.65)]
    pub beta: f64,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Known-answer rows appended to every draw (fix the sign of the estimate).
    #[arg(long, default_value_t = 20)]
    pub calibration: usize,
    #[arg(long, default_value_t = 0.5)]
    pub c_lower: f64,
    /// Multiplier on the confidence constant, or `auto` to fit it on synthetic ground truth.
    #[arg(long, default_value = "auto")]
    pub constant_scale: String,
}

#[derive(Debug, Args)]
pub struct SketchArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// k-mer length.
    #[arg(long, alias = "kmer", default_value_t = 14)]
    pub k: usize,
    #[arg(long, default_value_t = 1000)]
    pub hashes: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Replace each k-mer by the smaller of itself and its reverse complement.
    #[arg(long)]
    pub canonical: bool,
}

#[derive(Debug, Args)]
pub struct AlignTopk {
    /// Generate a planted read set instead of reading FASTA.
    #[arg(long)]
    pub synthetic: bool,
    /// Reference FASTA (first record is the reference).
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Read FASTA, or the number of reads with `--synthetic`.
    #[arg(long)]
    pub reads: Option<String>,
    /// Calibration FASTA (random reads with no overlap).
    #[arg(long = "calibration-reads")]
    pub calibration_reads: Option<PathBuf>,
    #[arg(long, default_value_t = 20000)]
    pub genome: usize,
    #[arg(long = "len", default_value_t = 1000)]
    pub read_length: usize,
    /// Planted reads with a large overlap.
    #[arg(long, default_value_t = 5)]
    pub k_top: usize,
    /// Planted competitors with a moderate overlap.
    #[arg(long, default_value_t = 20)]
    pub mid: usize,
    #[arg(long, default_value_t = 0.2)]
    pub top_lo: f64,
    #[arg(long, default_value_t = 0.3)]
    pub top_hi: f64,
    #[arg(long, default_value_t = 0.1)]
    pub mid_lo: f64,
    #[arg(long, default_value_t = 0.19)]
    pub mid_hi: f64,
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
    /// Synthetic calibration reads.
    #[arg(long, default_value_t = 20)]
    pub calibration: usize,
    /// k-mer length.
    #[arg(long, default_value_t = 14)]
    pub kmer: usize,
    /// Size of the hash-seed pool (default: enough for the largest budget).
    #[arg(long)]
    pub hashes: Option<usize>,
    #[command(flatten)]
    pub bandit: BanditArgs,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub reads: PathBuf,
    #[arg(long, default_value_t = 14)]
    pub kmer: usize,
    #[arg(long, default_value_t = 1000)]
    pub hashes: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct HardnessArgs {
    /// File with one value per line (or comma separated).
    #[arg(long)]
    pub values: Option<PathBuf>,
    /// Use the item values of a synthetic crowd instance of this size.
    #[arg(long)]
    pub crowd: Option<usize>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
}

/// Expand `--config FILE` into flags placed right after the subcommand, so
/// that flags given explicitly (which come later) override them.
fn merge_config(argv: &[String]) -> CliResult<Vec<String>> {
    let Some(pos) = argv.iter().position(|a| a == "--config" || a.starts_with("--config=")) else {
        return Ok(argv.to_vec());
    };
    let path = match argv[pos].strip_prefix("--config=") {
        Some(p) => p.to_string(),
        None => argv
            .get(pos + 1)
            .cloned()
            .ok_or_else(|| CliError::Usage("--config needs a file".into()))?,
    };
    let text = fs::read_to_string(&path).map_err(|e| CliError::Data(format!("{path}: {e}")))?;
    let mut extra = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Data(format!("{path}:{}: expected `key = value`", i + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        match value {
            "true" => extra.push(format!("--{key}")),
            "false" => {}
            _ => {
                extra.push(format!("--{key}"));
                extra.push(value.to_string());
            }
        }
    }
    let cmd = Cli::command();
    let names: Vec<&str> = cmd.get_subcommands().map(|c| c.get_name()).collect();
    let sub = argv
        .iter()
        .skip(1)
        .position(|a| names.contains(&a.as_str()))
        .map(|i| i + 1)
        .unwrap_or(argv.len());
    let mut out = argv[..(sub + 1).min(argv.len())].to_vec();
    out.extend(extra);
    if sub + 1 < argv.len() {
        out.extend_from_slice(&argv[sub + 1..]);
    }
    Ok(out)
}

/// Run the CLI and return the exit code.
pub fn execute(argv: &[String]) -> i32 {
    let merged = match merge_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(&merged) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli, &merged) {
        Ok(summary) => {
            eprintln!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run(cli: &Cli, argv: &[String]) -> CliResult<String> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| CliError::Data(e.to_string()))?;
    let echo = format!("# {}", argv.join(" "));
    pool.install(|| match &cli.command {
        Command::CrowdTopk(a) => crowd_topk(a, cli.out.as_deref(), &echo),
        Command::CrowdThreshold(a) => crowd_threshold(a, cli.out.as_deref(), &echo),
        Command::Sketch(a) => sketch(a, cli.out.as_deref()),
        Command::AlignTopk(a) => align_topk(a, cli.out.as_deref(), &echo),
        Command::Estimate(a) => estimate(a, cli.out.as_deref(), &echo),
        Command::Hardness(a) => hardness(a, cli.out.as_deref(), &echo),
    })
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Data(format!("{}: {e}", p.display()))),
        None => {
            let mut o = std::io::stdout().lock();
            o.write_all(text.as_bytes())?;
            o.flush()?;
            Ok(())
        }
    }
}

fn curve_csv(echo: &str, points: &[CurvePoint], seed: u64) -> String {
    let mut s = format!("{echo}\n{CSV_HEADER}\n");
    for p in points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            p.algorithm.name(),
            p.budget,
            p.trials,
            p.exact_error,
            p.exact_error_se,
            p.top2k_recall,
            p.mean_pulls,
            seed
        );
    }
    s
}

fn curve_summary(points: &[CurvePoint]) -> String {
    let parts: Vec<String> = points
        .iter()
        .map(|p| format!("{}@{}: error {:.3}", p.algorithm.name(), p.budget, p.exact_error))
        .collect();
    parts.join("; ")
}

fn experiment(b: &BanditArgs, prefer: Preference) -> CliResult<TopKExperiment> {
    if b.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    if b.k == 0 {
        return Err(CliError::Usage("--k must be at least 1".into()));
    }
    let mut exp = TopKExperiment::new(b.k, b.budgets.0.clone(), b.trials, b.seed);
    exp.mode = match b.mode {
        ModeArg::Theory => Mode::Theory,
        ModeArg::Practical => Mode::Practical,
    };
    exp.reuse_samples = !b.no_reuse;
    exp.prefer = prefer;
    exp.m_max = match b.m_max.as_deref() {
        None => None,
        Some("none") => Some(usize::MAX),
        Some(s) => Some(parse_count(s).map_err(CliError::Usage)? as usize),
    };
    Ok(exp)
}

fn crowd_topk(a: &CrowdTopk, out: Option<&Path>, echo: &str) -> CliResult<String> {
    let exp = experiment(&a.bandit, Preference::Largest)?;
    if a.n < 2 * a.bandit.k {
        return Err(CliError::Usage(format!("--n must be at least 2k = {}", 2 * a.bandit.k)));
    }
    let scorer = crowd_scorer(a.estimator.into(), a.calibration)?;
    let n = a.n;
    let cal = a.calibration;
    let factory = move |s: u64| -> adaspec::Result<TrialSetup> {
        let inst = gen_crowd_instance(n, derive(s, &[0]))?;
        Ok(TrialSetup {
            source: Box::new(inst.source(derive(s, &[1]), cal)?),
            truth: inst.item_values(),
        })
    };
    let r = run_experiment(&factory, &scorer, &exp)?;
    emit(out, &curve_csv(echo, &r.points, a.bandit.seed))?;
    Ok(format!("crowd-topk n={} k={}: {}", a.n, a.bandit.k, curve_summary(&r.points)))
}

/// Scorer for crowd data: calibration rows fix the sign; `‖v̂‖` stands in for `‖v‖`.
fn crowd_scorer(method: VHatMethod, calibration: usize) -> CliResult<SpectralScorer> {
    let orientation = if calibration == 0 {
        Orientation::RowAverage
    } else {
        Orientation::EntrySum
    };
    Ok(SpectralScorer::new(SpectralConfig {
        v_hat_method: method,
        v_norm_source: VNormSource::None,
        orientation,
        ..SpectralConfig::default()
    })?)
}

fn crowd_threshold(a: &CrowdThreshold, out: Option<&Path>, echo: &str) -> CliResult<String> {
    if a.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    if a.n < 2 {
        return Err(CliError::Usage("--n must be at least 2".into()));
    }
    let base = SpectralConfig {
        c_lower: a.c_lower,
        v_norm_source: VNormSource::SamplerOracle,
        ..SpectralConfig::default()
    };
    base.validate()?;
    let scale = match a.constant_scale.as_str() {
        "auto" => fit_crowd_scale(a.n, a.calibration, a.seed, &SpectralScorer::new(base.clone())?)?,
        s => s
            .parse::<f64>()
            .map_err(|_| CliError::Usage(format!("--constant-scale: not a number: {s:?}")))?,
    };
    let spectral = SpectralConfig {
        constant_scale: scale,
        ..base
    };
    let scorer = SpectralScorer::new(spectral.clone())?;
    // Item values are p − ½; the band is given on the p scale.
    let cfg = ThresholdConfig {
        alpha: a.alpha - 0.5,
        beta: a.beta - 0.5,
        c_lower: a.c_lower,
        constant_scale: scale,
        seed: a.seed,
    };
    cfg.validate()?;
    let n = a.n;
    let cal = a.calibration;
    let factory = move |s: u64| -> adaspec::Result<TrialSetup> {
        let inst = gen_crowd_instance(n, derive(s, &[0]))?;
        Ok(TrialSetup {
            source: Box::new(inst.source(derive(s, &[1]), cal)?),
            truth: inst.item_values(),
        })
    };
    let points = run_threshold_experiment(
        &factory,
        &scorer,
        &cfg,
        &[Algorithm::Adaptive, Algorithm::Nonadaptive],
        a.trials,
        a.seed,
    )?;
    let mut s = format!("{echo}\n# constant_scale = {scale}\n{CSV_HEADER}\n");
    for p in &points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},nan,{},{}",
            p.algorithm.name(),
            p.mean_pulls.ceil(),
            p.trials,
            p.error,
            p.error_se,
            p.mean_pulls,
            a.seed
        );
    }
    emit(out, &s)?;
    let parts: Vec<String> = points
        .iter()
        .map(|p| format!("{}: error {:.3}, mean pulls {:.0}", p.algorithm.name(), p.error, p.mean_pulls))
        .collect();
    Ok(format!("crowd-threshold n={} scale={scale:.4}: {}", a.n, parts.join("; ")))
}

/// Largest constant scale whose half-width covers the scorer's error on
/// synthetic crowd instances with known truth, over a range of worker counts.
fn fit_crowd_scale(n: usize, calibration: usize, seed: u64, scorer: &SpectralScorer) -> CliResult<f64> {
    let items: Vec<usize> = (0..n).collect();
    let mut samples = Vec::new();
    for rep in 0..4u64 {
        let s = derive(seed, &[0x5ca1e, rep]);
        let inst = gen_crowd_instance(n, derive(s, &[0]))?;
        let truth = inst.item_values();
        for shift in 0..5 {
            let m = (n >> shift).max(8);
            let mut src = inst.source(derive(s, &[1, shift]), calibration)?;
            let mut sampler = Sampler::new(&mut src, u64::MAX);
            let draw = sampler.draw(&items, m)?;
            let est = scorer.estimate(&RoundData {
                items: &items,
                x: &draw.items,
                calibration: draw.calibration.as_ref(),
                v_norm: draw.v_norm,
            })?;
            let err = est.u_hat.iter().zip(&truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            samples.push(CoverageSample {
                max_abs_error: err,
                n,
                m,
            });
        }
    }
    Ok(calibrate_constant_scale(&samples, 1.0 / (n as f64).powi(3), &scorer.config)?)
}

fn read_fasta(path: &Path) -> CliResult<Vec<Read>> {
    Ok(parse_fasta(path)?)
}

fn sketch(a: &SketchArgs, out: Option<&Path>) -> CliResult<String> {
    let out = out.ok_or_else(|| CliError::Usage("sketch needs --out for the binary sketch file".into()))?;
    if a.hashes == 0 {
        return Err(CliError::Usage("--hashes must be at least 1".into()));
    }
    let reads = read_fasta(&a.input)?;
    let seeds = hash_seeds(a.seed, a.hashes);
    let sketches = sketch_all(&reads, a.k, &seeds, a.canonical)?;
    write_sketches(out, &sketches)?;
    Ok(format!("sketched {} reads with {} hashes (k = {}) into {}", reads.len(), a.hashes, a.k, out.display()))
}

struct ReadSet {
    reference: Read,
    items: Vec<Read>,
    calibration: Vec<Read>,
}

fn load_reads(a: &AlignTopk) -> CliResult<ReadSet> {
    if a.synthetic {
        let n_reads: usize = match &a.reads {
            Some(s) => s
                .parse()
                .map_err(|_| CliError::Usage(format!("--reads must be a count with --synthetic, got {s:?}")))?,
            None => 300,
        };
        let n_planted = a.k_top + a.mid;
        if n_reads < n_planted {
            return Err(CliError::Usage(format!("--reads {n_reads} is below k-top + mid = {n_planted}")));
        }
        let layout = OverlapLayout {
            n_top: a.k_top,
            top: (a.top_lo, a.top_hi),
            n_mid: a.mid,
            mid: (a.mid_lo, a.mid_hi),
            n_zero: n_reads - n_planted,
        };
        let seed = a.bandit.seed;
        let genome = gen_genome(a.genome, derive(seed, &[0x6e0]))?;
        let offsets = layout_offsets(&layout, a.read_length, a.genome, derive(seed, &[0x1a7]))?;
        let set = gen_reads_with_overlaps(&genome, a.read_length, &offsets, a.noise, a.calibration, derive(seed, &[0x5e7]))?;
        return Ok(ReadSet {
            reference: set.reference.clone(),
            items: set.items().to_vec(),
            calibration: set.calibration().to_vec(),
        });
    }
    let ref_path = a
        .reference
        .as_ref()
        .ok_or_else(|| CliError::Usage("align-topk needs --synthetic or --reference and --reads".into()))?;
    let reads_path = a
        .reads
        .as_ref()
        .ok_or_else(|| CliError::Usage("align-topk needs --reads".into()))?;
    let reference = read_fasta(ref_path)?.remove(0);
    let items = read_fasta(Path::new(reads_path))?;
    let calibration = match &a.calibration_reads {
        Some(p) => read_fasta(p)?
            .into_iter()
            .map(|r| Read::calibration(r.id, r.sequence))
            .collect(),
        None => Vec::new(),
    };
    Ok(ReadSet {
        reference,
        items,
        calibration,
    })
}

fn align_topk(a: &AlignTopk, out: Option<&Path>, echo: &str) -> CliResult<String> {
    let exp = experiment(&a.bandit, Preference::Smallest)?;
    let set = load_reads(a)?;
    let n = set.items.len();
    if n < 2 * a.bandit.k {
        return Err(CliError::Usage(format!("{n} reads is below 2k = {}", 2 * a.bandit.k)));
    }
    let max_budget = *exp.budgets.iter().max().expect("budgets are nonempty");
    let hashes = a.hashes.unwrap_or_else(|| align_pool_size(max_budget, n, a.bandit.k));
    let seeds = hash_seeds(derive(a.bandit.seed, &[0x4a5]), hashes);
    let pool = Arc::new(CollisionPool::build(&set.reference, &set.items, &set.calibration, a.kmer, &seeds)?);
    let truth: Vec<f64> = set
        .items
        .iter()
        .map(|r| jaccard_exact(&set.reference.sequence, &r.sequence, a.kmer).map(|j| 1.0 - j))
        .collect::<adaspec::Result<_>>()?;
    let scorer = align_scorer()?;
    let factory = move |s: u64| -> adaspec::Result<TrialSetup> {
        Ok(TrialSetup {
            source: Box::new(PoolSource::new(pool.clone(), Some(s))),
            truth: truth.clone(),
        })
    };
    let r = run_experiment(&factory, &scorer, &exp)?;
    emit(out, &curve_csv(echo, &r.points, a.bandit.seed))?;
    Ok(format!("align-topk reads={n} hashes={hashes}: {}", curve_summary(&r.points)))
}

/// Column-sum scorer for collision data; `‖v̂‖` stands in for `‖v‖`.
fn align_scorer() -> CliResult<SpectralScorer> {
    Ok(SpectralScorer::new(SpectralConfig {
        v_hat_method: VHatMethod::ColumnSum,
        v_norm_source: VNormSource::None,
        ..SpectralConfig::default()
    })?)
}

/// Hash seeds needed so that no run of either algorithm exhausts the pool.
pub fn align_pool_size(max_budget: u64, n: usize, k: usize) -> usize {
    let rounds = adaspec::topk::practical_rounds(n, k).max(1) as u64;
    let mut size = n;
    let mut total = 0u64;
    for _ in 0..rounds {
        total += max_budget / (rounds * size as u64);
        size = size.div_ceil(2);
    }
    let uniform = max_budget / n as u64;
    total.max(uniform) as usize + 1
}

fn estimate(a: &EstimateArgs, out: Option<&Path>, echo: &str) -> CliResult<String> {
    if a.hashes == 0 {
        return Err(CliError::Usage("--hashes must be at least 1".into()));
    }
    let reference = read_fasta(&a.reference)?.remove(0);
    let reads = read_fasta(&a.reads)?;
    if reads.len() < 2 {
        return Err(CliError::Data("estimation needs at least 2 reads".into()));
    }
    let seeds = hash_seeds(a.seed, a.hashes);
    let y = adaspec::minhash::collision_matrix(&reference, &reads, a.kmer, &seeds)?;
    let x: ObservationMatrix = y.to_observations();
    // Z-channel columns have v_j = 1 − q_j ≤ 1; with no calibration use √m.
    let v_norm = (x.ncols() as f64).sqrt();
    let est = estimate_split(&x, v_norm, &SpectralConfig::default())?;
    let mut s = format!("{echo}\nid,u_hat,collision_rate\n");
    for (i, r) in reads.iter().enumerate() {
        let rate = adaspec::minhash::jaccard_estimate(y.y.row_bits(i))?;
        let _ = writeln!(s, "{},{},{}", r.id, est.u_hat[i], rate);
    }
    emit(out, &s)?;
    Ok(format!("estimated {} reads against {} with {} hashes", reads.len(), reference.id, a.hashes))
}

fn hardness(a: &HardnessArgs, out: Option<&Path>, echo: &str) -> CliResult<String> {
    let values: Vec<f64> = match (&a.values, a.crowd) {
        (Some(p), None) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            let mut v = Vec::new();
            for (i, line) in text.lines().enumerate() {
                for tok in line.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                    v.push(tok.parse::<f64>().map_err(|_| {
                        CliError::Data(format!("{}:{}: not a number: {tok:?}", p.display(), i + 1))
                    })?);
                }
            }
            v
        }
        (None, Some(n)) => gen_crowd_instance(n, a.seed)?.item_values(),
        _ => return Err(CliError::Usage("hardness needs exactly one of --values or --crowd".into())),
    };
    let h = instance_hardness(&values, a.k)?;
    let s = format!(
        "{echo}\nn,k,u_k,delta_plus,h2\n{},{},{},{},{}\n",
        values.len(),
        a.k,
        h.sorted[a.k - 1],
        h.delta_plus,
        h.h2
    );
    emit(out, &s)?;
    Ok(format!("n={} k={}: delta_plus = {:.4e}, H2 = {:.4e}", values.len(), a.k, h.delta_plus, h.h2))
}

/// Parsed-argument access for tests.
pub fn parse(argv: &[&str]) -> Result<Cli, clap::Error> {
    Cli::try_parse_from(argv)
}
