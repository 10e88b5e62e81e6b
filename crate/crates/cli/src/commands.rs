use std::fs;
use std::path::Path;

use csrange::baselines::{sparsity_profile, Domain};
use csrange::detect::{alpha_from_rho, range_from_coefficients, DetectConfig, Method, RangeFrame};
use csrange::experiment::{
    generate_trial, run_buffer_comparison, run_sweep, run_timing, summarize, ExperimentConfig, SnrBucket, TraceProfile,
};
use csrange::localize::{median_error_by_loss, run_localization, Scenario};
use csrange::pipeline::{range_trace, PipelineConfig};
use csrange::recovery::{recover_buffered, BufferedRecovery, RecoveryMode, SolverConfig};
use csrange::sensing::{buffer_count_for, compress_buffered, decode_stream, encode_stream};
use csrange::signal::{file as sigfile, simulate_channel_samples, SampledSignal};
use csrange::{rng, Error, Result};

use crate::output::{write_csv, write_gnuplot, write_json, Sink};
use crate::{
    CompressArgs, DetectArgs, GenArgs, LocalizeArgs, ModeArg, ProfileArgs, ProfileName, RangeArgs, RecoverArgs, SolverArgs,
    SweepArgs, TimingArgs,
};

fn io_context(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| io_context(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| io_context(path, e))
}

fn read_signal(path: &Path) -> Result<SampledSignal> {
    sigfile::decode(&read_bytes(path)?)
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = String::from_utf8(read_bytes(path)?).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn trace_profile(name: ProfileName) -> TraceProfile {
    match name {
        ProfileName::Mote => TraceProfile::mote(),
        ProfileName::Wideband => TraceProfile::wideband(),
    }
}

fn solver_config(a: &SolverArgs) -> Result<SolverConfig> {
    let cfg = SolverConfig {
        epsilon: a.epsilon,
        lambda: a.lambda,
        lambda_ratio: a.lambda_ratio,
        max_iterations: a.max_iterations,
        k: a.k,
        mu0: a.mu0,
        weighted: a.weighted,
        ..SolverConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn detect_config(a: &DetectArgs) -> DetectConfig {
    DetectConfig { sigma: a.sigma, fallback: a.fallback.into(), refine: !a.no_refine }
}

fn recovery_mode(m: ModeArg) -> RecoveryMode {
    match m {
        ModeArg::Sxcorr => RecoveryMode::Sxcorr,
        ModeArg::StructSxcorr => RecoveryMode::StructSxcorr,
    }
}

pub fn gen(a: GenArgs) -> Result<()> {
    let profile = trace_profile(a.profile);
    let p = profile.reference()?;
    if let Some(path) = &a.reference_out {
        write_bytes(path, &sigfile::encode(&p)?)?;
    }
    let Some(out) = &a.out else {
        if a.reference_out.is_none() {
            return Err(Error::Parameter("nothing to write: pass --reference-out and/or --out".into()));
        }
        return Ok(());
    };
    let delay = a.delay.ok_or_else(|| Error::Parameter("--out requires --delay".into()))?;
    let n = a.trace_len.unwrap_or(profile.trace_len);
    let ch = a.preset.profile(delay, p.fs(), a.snr, a.seed);
    let (x, truth) = simulate_channel_samples(&p, &ch, n)?;
    write_bytes(out, &sigfile::encode(&x)?)?;
    if let Some(path) = &a.csv {
        let mut buf = Vec::new();
        sigfile::write_csv(&x, &mut buf)?;
        write_bytes(path, &buf)?;
    }
    let info = serde_json::json!({
        "truth_lag": truth,
        "samples": x.len(),
        "fs": x.fs(),
        "paths": ch.paths.len(),
        "snr_db": if a.snr.is_finite() { Some(a.snr) } else { None },
    });
    println!("{info}");
    Ok(())
}

pub fn compress(a: CompressArgs) -> Result<()> {
    let x = read_signal(&a.input)?;
    let alpha = if a.alpha.eq_ignore_ascii_case("auto") {
        alpha_from_rho(&x)
    } else {
        a.alpha.parse().map_err(|_| Error::Parameter(format!("alpha `{}` is neither a number nor `auto`", a.alpha)))?
    };
    let b = match (a.buffers, &a.reference) {
        (Some(b), _) => b,
        (None, Some(r)) => buffer_count_for(read_signal(r)?.len(), x.len())?,
        (None, None) => return Err(Error::Parameter("pass --buffers or --reference to fix the buffer count".into())),
    };
    let packets: Vec<_> = compress_buffered(&x, b, alpha, a.seed)?
        .into_iter()
        .filter(|p| !a.drop.contains(&p.buffer_index))
        .collect();
    write_bytes(&a.out, &encode_stream(&packets))?;
    let info = serde_json::json!({
        "alpha": alpha,
        "buffers": b,
        "packets": packets.len(),
        "measurements_per_buffer": packets.first().map(|p| p.m_tilde()),
    });
    println!("{info}");
    Ok(())
}

pub fn recover(a: RecoverArgs) -> Result<()> {
    let packets = decode_stream(&read_bytes(&a.packets)?)?;
    let p = read_signal(&a.reference)?;
    let rec = recover_buffered(&packets, &p, &solver_config(&a.solver)?, recovery_mode(a.mode))?;
    write_json(Sink::from(a.out.as_deref()), &rec)
}

pub fn range(a: RangeArgs) -> Result<()> {
    let solver = solver_config(&a.solver)?;
    let detect = detect_config(&a.detect);
    let est = if let Some(path) = &a.coefficients {
        let text = read_bytes(path)?;
        let rec: BufferedRecovery =
            serde_json::from_slice(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let frame = RangeFrame { n_tilde: rec.n_tilde, fs: rec.fs, speed: a.detect.speed, scale: 1 };
        let method = if a.method == Method::Sxcorr { Method::Sxcorr } else { Method::StructSxcorr };
        range_from_coefficients(&rec.buffers, frame, &detect, method)?
    } else if let (Some(trace), Some(reference)) = (&a.trace, &a.reference) {
        let x = read_signal(trace)?;
        let p = read_signal(reference)?;
        let cfg = PipelineConfig {
            alpha: a.alpha,
            buffers: a.buffers,
            seed: a.seed,
            solver,
            detect,
            speed: a.detect.speed,
            downsample_factor: a.downsample_factor,
        };
        range_trace(&x, &p, a.method, &cfg)?
    } else {
        return Err(Error::Parameter("pass --coefficients, or --trace with --reference".into()));
    };
    write_json(Sink::from(a.out.as_deref()), &est)
}

pub fn sweep(a: SweepArgs) -> Result<()> {
    let mut cfg: ExperimentConfig = match &a.config {
        Some(path) => read_toml(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = a.methods {
        cfg.methods = v;
    }
    if let Some(v) = a.alphas {
        cfg.alphas = v;
    }
    if let Some(v) = a.snr {
        cfg.snr_buckets = v;
    }
    if let Some(v) = a.presets {
        cfg.presets = v;
    }
    if let Some(v) = a.trials {
        cfg.trials = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.profile {
        cfg.profile = trace_profile(v);
    }
    let header = format!("# csrange sweep config_hash={}", cfg.hash());
    let sink = Sink::from(a.out.as_deref());
    if a.buffers_compare {
        let rows = run_buffer_comparison(&cfg)?;
        let better = rows.iter().filter(|r| r.buffered_not_worse).count();
        eprintln!("buffered recovery not worse in {better}/{} cells", rows.len());
        return write_csv(sink, Some(&header), &rows);
    }
    let rows = run_sweep(&cfg)?;
    write_csv(sink, Some(&header), &rows)?;
    if let Some(path) = &a.summary {
        let cells = summarize(&rows);
        write_csv(Sink::File(path), Some(&header), &cells)?;
        if let Some(gp) = &a.gnuplot {
            write_gnuplot(gp, path, &cfg)?;
        }
    }
    Ok(())
}

pub fn timing(a: TimingArgs) -> Result<()> {
    let rows = run_timing(a.n, &a.alphas, &a.buffers, a.repeats, a.seed)?;
    let td = rows.iter().find(|r| r.operation == "TD_XCORR").map(|r| r.seconds);
    let fd = rows.iter().find(|r| r.operation == "FD_XCORR").map(|r| r.seconds);
    if let (Some(td), Some(fd)) = (td, fd) {
        eprintln!("FD over TD correlation speedup: {:.1}x", td / fd);
    }
    for r in rows.iter().filter(|r| r.operation == "COMPRESS" && r.buffers != Some(1)) {
        let one = rows.iter().find(|o| o.operation == "COMPRESS" && o.alpha == r.alpha && o.buffers == Some(1));
        if let (Some(one), Some(b)) = (one, r.buffers) {
            let mac_ratio = one.multiply_adds.unwrap_or(0) as f64 / r.multiply_adds.unwrap_or(1) as f64;
            eprintln!(
                "alpha {:.2}, {b} buffers: {:.1}x fewer multiply-adds, {:.1}x faster",
                r.alpha.unwrap_or(f64::NAN),
                mac_ratio,
                one.seconds / r.seconds
            );
        }
    }
    write_csv(Sink::from(a.out.as_deref()), None, &rows)
}

#[derive(serde::Serialize)]
struct LocalizationRow {
    method: Method,
    round: usize,
    loss_rate: f64,
    anchors_used: usize,
    x: Option<f64>,
    y: Option<f64>,
    error_m: Option<f64>,
}

pub fn localize(a: LocalizeArgs) -> Result<()> {
    let mut scenario: Scenario = match &a.scenario {
        Some(path) => read_toml(path)?,
        None => Scenario::default(),
    };
    if let Some(r) = a.rounds {
        scenario.rounds = r;
    }
    let methods = a.methods.unwrap_or_else(|| vec![scenario.method]);
    let mut rows = Vec::new();
    let mut medians = Vec::new();
    for &method in &methods {
        let out = run_localization(&Scenario { method, ..scenario.clone() })?;
        for (loss, med) in median_error_by_loss(&out) {
            eprintln!("{method} loss {loss:.2}: median position error {med:.4} m");
            medians.push((method, loss, med));
        }
        rows.extend(out.into_iter().map(|o| LocalizationRow {
            method,
            round: o.round,
            loss_rate: o.loss_rate,
            anchors_used: o.anchors_used,
            x: o.position.map(|p| p[0]),
            y: o.position.map(|p| p[1]),
            error_m: o.error_m,
        }));
    }
    let median_of = |m: Method, l: f64| medians.iter().find(|e| e.0 == m && e.1 == l).map(|e| e.2);
    for &l in &scenario.loss_rates {
        if let (Some(s), Some(st)) = (median_of(Method::Sxcorr, l), median_of(Method::StructSxcorr, l)) {
            eprintln!("loss {l:.2}: SXCORR minus STRUCT_SXCORR median error {:.4} m", s - st);
        }
    }
    write_csv(Sink::from(a.out.as_deref()), None, &rows)
}

#[derive(serde::Serialize)]
struct ProfileRow {
    trial: usize,
    seed: u64,
    truth_lag: usize,
    snr_db: f64,
    domain: Domain,
    k: usize,
    length: usize,
}

pub fn profile(a: ProfileArgs) -> Result<()> {
    if a.trials == 0 {
        return Err(Error::Parameter("trials must be at least 1".into()));
    }
    if !(a.fraction > 0.0 && a.fraction <= 1.0) {
        return Err(Error::Parameter("fraction must lie in (0, 1]".into()));
    }
    let tp = trace_profile(a.profile);
    let p = tp.reference()?;
    let mut rows = Vec::new();
    let mut wins = 0;
    for trial in 0..a.trials {
        let seed = rng::derive_seed(a.seed, trial as u64);
        let t = generate_trial(&tp, &p, a.preset, a.snr, seed)?;
        let mut ks = Vec::new();
        for d in Domain::ALL {
            let prof = sparsity_profile(&p, &t.trace, d)?;
            let k = prof.k_for(a.fraction);
            ks.push(k);
            rows.push(ProfileRow {
                trial,
                seed,
                truth_lag: t.truth_lag,
                snr_db: t.snr_db,
                domain: d,
                k,
                length: prof.sorted_magnitudes.len(),
            });
        }
        if ks[1..].iter().all(|k| ks[0] < *k) {
            wins += 1;
        }
    }
    eprintln!(
        "correlation domain sparsest in {wins}/{} traces ({} {})",
        a.trials,
        a.preset,
        SnrBucket::label(&a.snr)
    );
    write_csv(Sink::from(a.out.as_deref()), None, &rows)
}
