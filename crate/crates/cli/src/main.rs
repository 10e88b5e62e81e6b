mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use csrange::detect::{Fallback, Method};
use csrange::experiment::SnrBucket;
use csrange::signal::ChannelPreset;

#[derive(Parser, Debug)]
#[command(name = "csrange", version, about = "Compressive cross-correlation acoustic ranging toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a reference chirp and, optionally, a synthetic received trace.
    Gen(GenArgs),
    /// Compress a signal file buffer by buffer into a packet stream.
    Compress(CompressArgs),
    /// Recover sparse correlation coefficients from a packet stream.
    Recover(RecoverArgs),
    /// Estimate range from recovered coefficients or directly from a trace.
    Range(RangeArgs),
    /// Monte-Carlo characterization over methods, compression factors and SNR.
    Sweep(SweepArgs),
    /// Correlation and compression cost table.
    Timing(TimingArgs),
    /// Simulated multilateration rounds from a scenario file.
    Localize(LocalizeArgs),
    /// Energy compaction of received traces in several domains.
    Profile(ProfileArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ProfileName {
    Mote,
    Wideband,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Sxcorr,
    StructSxcorr,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FallbackArg {
    Strict,
    TallestAnywhere,
}

impl From<FallbackArg> for Fallback {
    fn from(f: FallbackArg) -> Self {
        match f {
            FallbackArg::Strict => Fallback::Strict,
            FallbackArg::TallestAnywhere => Fallback::TallestAnywhere,
        }
    }
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long, value_enum, default_value = "mote")]
    pub profile: ProfileName,
    /// Where to write the reference chirp.
    #[arg(long)]
    pub reference_out: Option<PathBuf>,
    /// Where to write the received trace; requires --delay.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Line-of-sight delay in samples.
    #[arg(long)]
    pub delay: Option<usize>,
    #[arg(long, default_value = "CASE_A", value_parser = parse_preset)]
    pub preset: ChannelPreset,
    /// Signal-to-noise ratio in dB; `inf` for a noiseless trace.
    #[arg(long, default_value_t = f64::INFINITY)]
    pub snr: f64,
    /// Trace length in samples; defaults to the profile's window.
    #[arg(long)]
    pub trace_len: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the trace as one sample per line.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CompressArgs {
    /// Received signal file.
    #[arg(long)]
    pub input: PathBuf,
    /// Output packet stream.
    #[arg(long)]
    pub out: PathBuf,
    /// Compression factor in (0, 1], or `auto` to choose it from the trace's peak-to-mean ratio.
    #[arg(long, default_value = "0.3")]
    pub alpha: String,
    /// Buffer count; when absent, --reference sets it to one chirp per buffer.
    #[arg(long)]
    pub buffers: Option<usize>,
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Buffer indices whose packets are dropped, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub drop: Vec<u16>,
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    /// Fixed ℓ1 weight; overrides --lambda-ratio.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub lambda_ratio: f64,
    /// Residual bound; enables λ continuation until it is met.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    pub max_iterations: usize,
    /// Peaks kept by structured pruning.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Coherence threshold of structured pruning.
    #[arg(long, default_value_t = 0.6)]
    pub mu0: f64,
    /// Penalize each coefficient by its column norm.
    #[arg(long)]
    pub weighted: bool,
}

#[derive(Args, Debug, Clone)]
pub struct DetectArgs {
    /// Phase-1 threshold in standard deviations above the mean.
    #[arg(long, default_value_t = 6.0)]
    pub sigma: f64,
    #[arg(long, value_enum, default_value = "tallest-anywhere")]
    pub fallback: FallbackArg,
    /// Disable parabolic sub-sample refinement.
    #[arg(long)]
    pub no_refine: bool,
    /// Speed of sound in m/s.
    #[arg(long, default_value_t = 343.0)]
    pub speed: f64,
}

#[derive(Args, Debug)]
pub struct RecoverArgs {
    #[arg(long)]
    pub packets: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long, value_enum, default_value = "struct-sxcorr")]
    pub mode: ModeArg,
    /// JSON output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Args, Debug)]
pub struct RangeArgs {
    /// Recovered coefficients written by `recover`.
    #[arg(long, conflicts_with = "trace")]
    pub coefficients: Option<PathBuf>,
    /// Received trace to range end to end.
    #[arg(long, requires = "reference")]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long, default_value = "STRUCT_SXCORR")]
    pub method: Method,
    #[arg(long, default_value_t = 0.3)]
    pub alpha: f64,
    #[arg(long)]
    pub buffers: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub downsample_factor: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub detect: DetectArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// TOML experiment configuration; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    /// SNR buckets as `lo:hi` dB pairs, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_bucket)]
    pub snr: Option<Vec<SnrBucket>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_preset)]
    pub presets: Option<Vec<ChannelPreset>>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub profile: Option<ProfileName>,
    /// Per-trial CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-cell mean, deviation and median CSV.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Gnuplot script plotting the summary CSV.
    #[arg(long, requires = "summary")]
    pub gnuplot: Option<PathBuf>,
    /// Instead of the sweep, compare rule-chosen buffering with one buffer.
    #[arg(long)]
    pub buffers_compare: bool,
}

#[derive(Args, Debug)]
pub struct TimingArgs {
    #[arg(long, default_value_t = 4800)]
    pub n: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2,0.3,0.5")]
    pub alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1,10")]
    pub buffers: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct LocalizeArgs {
    /// TOML scenario; the built-in five-anchor arc when absent.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Methods to compare; defaults to the scenario's method.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ProfileArgs {
    #[arg(long, default_value = "CASE_C", value_parser = parse_preset)]
    pub preset: ChannelPreset,
    #[arg(long, default_value = "20:30", value_parser = parse_bucket)]
    pub snr: SnrBucket,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Energy fraction the kept coefficients must reach.
    #[arg(long, default_value_t = 0.95)]
    pub fraction: f64,
    #[arg(long, value_enum, default_value = "mote")]
    pub profile: ProfileName,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_preset(s: &str) -> Result<ChannelPreset, String> {
    match s.to_ascii_uppercase().replace('-', "_").as_str() {
        "CASE_A" | "A" => Ok(ChannelPreset::CaseA),
        "CASE_B" | "B" => Ok(ChannelPreset::CaseB),
        "CASE_C" | "C" => Ok(ChannelPreset::CaseC),
        _ => Err(format!("unknown preset `{s}` (expected CASE_A, CASE_B or CASE_C)")),
    }
}

fn parse_bucket(s: &str) -> Result<SnrBucket, String> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("SNR bucket `{s}` is not `lo:hi`"))?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("{lo}: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("{hi}: {e}"))?;
    if lo > hi {
        return Err(format!("SNR bucket `{s}` has lo > hi"));
    }
    Ok(SnrBucket::new(lo, hi))
}

fn exit_code(e: &csrange::Error) -> u8 {
    match e.category() {
        "format" => 3,
        "io" => 4,
        "protocol" => 5,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Compress(a) => commands::compress(a),
        Command::Recover(a) => commands::recover(a),
        Command::Range(a) => commands::range(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Timing(a) => commands::timing(a),
        Command::Localize(a) => commands::localize(a),
        Command::Profile(a) => commands::profile(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(exit_code(&e))
        }
    }
}
