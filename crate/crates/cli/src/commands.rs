use crate::config::{default_out_dir, Settings};
use crate::error::{CliError, Result};
use crate::manifest::{unix_now, RunManifest};
use mcs_core::container::{self, Container};
use mcs_core::harness::{curve_csv, place_transmissions, LinkConfig};
use mcs_core::recovery::estimate_csv;
use mcs_core::sampler::SamplerError;
use mcs_core::signal::SignalError;
use mcs_core::{
    apply_timing_jitter, check_hardware_delay_grid, detection_probability, extract_lane_samples, form_measurement, generate_pattern,
    pattern_coherence, reconstruct_block, sweep_occupancy, synthesize_multiband, verify_equivalence, BandSpec, HarnessError,
    LaneSampleBlock, Occupancy, PatternStrategy, RecoveryConfig, SamplingPattern, SensingMatrix, SubbandLayout, SynthConfig,
    TrialConfig,
};
use serde_json::json;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

/// Relative error above which the equivalence check counts as failed.
pub const EQUIVALENCE_TOLERANCE: f64 = 1e-9;

const JITTER_SALT: u64 = 0x6773_6a69_7474_6572;

fn d(v: impl ToString) -> String {
    v.to_string()
}

fn pattern_defaults() -> Vec<(&'static str, String)> {
    vec![
        ("pattern.file", String::new()),
        ("pattern.cosets", String::new()),
        ("pattern.lanes", d(8)),
        ("pattern.grid", d(40)),
        ("pattern.lane_rate_hz", d(50e6)),
        ("pattern.strategy", d(PatternStrategy::GreedyMinCoherence)),
        ("pattern.seed", d(0)),
    ]
}

fn recovery_defaults() -> Vec<(&'static str, String)> {
    vec![
        ("recovery.max_support", String::new()),
        ("recovery.residual_tol", d(1e-6)),
        ("recovery.gamma", d(2)),
    ]
}

fn with(mut base: Vec<(&'static str, String)>, extra: &[(&'static str, String)]) -> Vec<(&'static str, String)> {
    base.extend_from_slice(extra);
    base.push(("output.dir", default_out_dir()));
    base
}

pub fn simulate_settings() -> Settings {
    let mut keys = pattern_defaults();
    keys.extend(recovery_defaults());
    Settings::new(
        "simulate",
        &with(
            keys,
            &[
                ("window", d(1024)),
                ("decimation", d(1)),
                ("snr_db", d(10)),
                ("seed", d(1)),
                ("trials", d(500)),
                ("occupancies_mhz", d("50,100,150,200,300,400")),
                ("placement.grid_hz", String::new()),
                ("jitter_rms_s", d(0)),
                ("link.frame_len", d(0)),
                ("link.max_latency_frames", d(0)),
            ],
        ),
    )
}

pub fn reconstruct_settings() -> Settings {
    let mut keys = pattern_defaults();
    keys.extend(recovery_defaults());
    Settings::new(
        "reconstruct",
        &with(keys, &[("input", String::new()), ("window", String::new()), ("decimation", d(1))]),
    )
}

pub fn gensig_settings() -> Settings {
    Settings::new(
        "gensig",
        &with(
            pattern_defaults(),
            &[
                ("window", d(1024)),
                ("bands_mhz", String::new()),
                ("occupancy_mhz", String::new()),
                ("placement.grid_hz", String::new()),
                ("snr_db", d(10)),
                ("seed", d(1)),
                ("format", d("grid")),
                ("jitter_rms_s", d(0)),
                ("output.name", d("signal")),
            ],
        ),
    )
}

pub fn equivalence_settings() -> Settings {
    Settings::new("equivalence", &with(vec![], &[("trials", d(200)), ("window", d(256)), ("seed", d(1))]))
}

pub fn pattern_settings() -> Settings {
    Settings::new("pattern", &with(pattern_defaults(), &[("output.name", d("pattern.txt"))]))
}

fn resolve_pattern(s: &mut Settings) -> Result<SamplingPattern> {
    let pattern = if !s.is_empty("pattern.file") {
        let path = PathBuf::from(s.raw("pattern.file"));
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        text.parse::<SamplingPattern>()
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
    } else {
        let rate: f64 = s.get("pattern.lane_rate_hz")?;
        let grid: usize = s.get("pattern.grid")?;
        let cosets: Vec<i64> = s.list("pattern.cosets")?;
        if cosets.is_empty() {
            let strategy: PatternStrategy = s.get("pattern.strategy")?;
            generate_pattern(s.get("pattern.lanes")?, grid, strategy, s.get("pattern.seed")?, rate)
                .map_err(|e| s.invalid("pattern.lanes", e))?
        } else {
            SamplingPattern::new(cosets.len(), grid, &cosets, rate).map_err(|e| s.invalid("pattern.cosets", e))?
        }
    };
    let cosets: Vec<String> = pattern.cosets().iter().map(usize::to_string).collect();
    s.record("pattern.cosets", cosets.join(","));
    s.record("pattern.lanes", pattern.num_lanes());
    s.record("pattern.grid", pattern.grid_factor());
    s.record("pattern.lane_rate_hz", pattern.lane_rate_hz());
    Ok(pattern)
}

fn resolve_recovery(s: &mut Settings, num_lanes: usize) -> Result<RecoveryConfig> {
    s.materialize("recovery.max_support", RecoveryConfig::for_lanes(num_lanes).max_support);
    let cfg = RecoveryConfig {
        max_support: s.get("recovery.max_support")?,
        residual_tol: s.get("recovery.residual_tol")?,
        ed_threshold_factor: s.get("recovery.gamma")?,
    };
    cfg.validate(num_lanes).map_err(|e| s.invalid("recovery.max_support", e))?;
    Ok(cfg)
}

fn out_dir(s: &Settings) -> Result<PathBuf> {
    let dir = PathBuf::from(s.raw("output.dir"));
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn finish(command: &str, s: &Settings, started: f64, dir: &Path, mut outputs: Vec<PathBuf>, results: serde_json::Value) -> Result<PathBuf> {
    let seed = s.resolved().get("seed").and_then(|v| v.parse().ok());
    let manifest_path = dir.join(crate::manifest::MANIFEST_NAME);
    outputs.push(manifest_path);
    RunManifest {
        tool: "mcs".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        seed,
        config: s.resolved(),
        started_unix_s: started,
        finished_unix_s: unix_now(),
        outputs,
        results,
    }
    .write(dir)
}

fn harness_error(err: HarnessError) -> CliError {
    match err {
        HarnessError::Sampling(SamplerError::SignalTooShort { .. } | SamplerError::GridMismatch { .. }) => CliError::Data(err.to_string()),
        other => CliError::Config(other.to_string()),
    }
}

pub fn simulate(mut s: Settings) -> Result<()> {
    let started = unix_now();
    let pattern = resolve_pattern(&mut s)?;
    let recovery = resolve_recovery(&mut s, pattern.num_lanes())?;
    s.materialize("placement.grid_hz", pattern.lane_rate_hz());
    let frame_len: usize = s.get("link.frame_len")?;
    let occupancies: Vec<f64> = s.list("occupancies_mhz")?;
    if occupancies.is_empty() {
        return Err(s.invalid("occupancies_mhz", "need at least one occupancy"));
    }
    let mut base = TrialConfig::new(pattern, Occupancy::TotalMhz(0.0), s.get("seed")?);
    base.window_len = s.get("window")?;
    base.decimation = s.get("decimation")?;
    base.snr_db = s.get("snr_db")?;
    base.recovery = recovery;
    base.placement_grid_hz = s.get("placement.grid_hz")?;
    base.jitter_rms_s = s.get("jitter_rms_s")?;
    base.link = (frame_len > 0).then_some(LinkConfig {
        frame_len,
        max_latency_frames: s.get("link.max_latency_frames")?,
    });
    base.validate().map_err(harness_error)?;
    let trials: usize = s.get("trials")?;

    let curve = sweep_occupancy(&base, &occupancies, trials).map_err(harness_error)?;
    let dir = out_dir(&s)?;
    let csv_path = dir.join("curve.csv");
    write_text(&csv_path, &curve_csv(&curve))?;
    println!("{}  ({} trials per point, {} dB)", base.pattern, trials, base.snr_db);
    println!("{:>14} {:>9} {:>8} {:>13}", "occupancy_mhz", "mean_pd", "ci95", "false_alarms");
    for p in &curve {
        println!("{:>14} {:>9.4} {:>8.4} {:>13.3}", p.occupancy_mhz, p.mean_pd, p.ci95, p.mean_false_alarms);
    }
    let manifest = finish("simulate", &s, started, &dir, vec![csv_path.clone()], json!({ "curve": curve }))?;
    println!("wrote {} and {}", csv_path.display(), manifest.display());
    Ok(())
}

fn read_input(path: &Path) -> Result<Container> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    container::read_container(&mut std::io::BufReader::new(file)).map_err(|e| CliError::container(path, e))
}

fn same_rate(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * b.abs()
}

pub fn reconstruct(mut s: Settings) -> Result<()> {
    let started = unix_now();
    if s.is_empty("input") {
        return Err(CliError::Usage("reconstruct needs an input file".into()));
    }
    let input = PathBuf::from(s.raw("input"));
    let pattern = resolve_pattern(&mut s)?;
    let recovery = resolve_recovery(&mut s, pattern.num_lanes())?;
    let decimation: usize = s.get("decimation")?;

    let rate_mismatch = |have: f64| {
        CliError::Data(format!(
            "{}: grid rate {have} Hz does not match the pattern's {} Hz",
            input.display(),
            pattern.grid_rate_hz()
        ))
    };
    let block = match read_input(&input)? {
        Container::Grid { grid_rate_hz, samples } => {
            if !same_rate(grid_rate_hz, pattern.grid_rate_hz()) {
                return Err(rate_mismatch(grid_rate_hz));
            }
            s.materialize("window", samples.len() / pattern.grid_factor());
            let window: usize = s.get("window")?;
            let signal = mcs_core::GridSignal::new(samples, grid_rate_hz, Default::default());
            extract_lane_samples(&signal, &pattern, window).map_err(|e| CliError::Data(format!("{}: {e}", input.display())))?
        }
        Container::Lanes { grid_rate_hz, lanes } => {
            if !same_rate(grid_rate_hz, pattern.grid_rate_hz()) {
                return Err(rate_mismatch(grid_rate_hz));
            }
            let len = lanes.first().map_or(0, Vec::len);
            s.materialize("window", len);
            if s.get::<usize>("window")? != len {
                return Err(s.invalid("window", format!("lane block holds {len} samples per lane")));
            }
            LaneSampleBlock::new(lanes, pattern.clone()).map_err(|e| CliError::Data(format!("{}: {e}", input.display())))?
        }
    };

    let report = reconstruct_block(&block, decimation, &recovery).map_err(harness_error)?;
    let x = form_measurement(&block, decimation).map_err(|e| s.invalid("decimation", e))?;
    let layout = SubbandLayout::new(pattern.grid_factor(), pattern.lane_rate_hz());

    let dir = out_dir(&s)?;
    let estimate_path = dir.join("estimate.csv");
    let x_path = dir.join("X.csv");
    write_text(&estimate_path, &estimate_csv(&report.estimate, &report.detected_sections, &layout))?;
    write_text(&x_path, &x.to_csv())?;

    println!("{pattern}, window {}, decimation {decimation}", block.window_len());
    println!("noise floor {:.4e}", report.noise_floor);
    let listed: Vec<String> = report.detected_subbands.iter().map(usize::to_string).collect();
    println!("detected subbands: {}", if listed.is_empty() { "none".into() } else { listed.join(",") });
    for &sub in &report.detected_subbands {
        let (lo, hi) = layout.subband_interval(sub);
        let energy = report.estimate.subband_energy[layout.section_of_subband(sub)];
        println!("  subband {sub:>3}  [{:>8.1}, {:>8.1}) MHz  energy {energy:.4e}", lo / 1e6, hi / 1e6);
    }

    let mut results = json!({
        "detected_subbands": report.detected_subbands,
        "noise_floor": report.noise_floor,
        "residual_norm": report.estimate.residual_norm,
    });
    let sidecar = input.with_extension("truth");
    if let Ok(text) = fs::read_to_string(&sidecar) {
        let truth = container::parse_support(&text).map_err(|e| CliError::container(&sidecar, e))?;
        let score = detection_probability(&truth, &report.detected_subbands);
        println!(
            "truth from {}: detection probability {:.3}, false alarms {}",
            sidecar.display(),
            score.probability,
            score.false_alarm_count
        );
        results["truth"] = json!(truth);
        results["detection_probability"] = json!(score.probability);
        results["false_alarm_count"] = json!(score.false_alarm_count);
    }
    finish("reconstruct", &s, started, &dir, vec![estimate_path, x_path], results)?;
    Ok(())
}

/// `center:width` pairs in MHz, comma-separated.
fn parse_bands(s: &Settings) -> Result<Vec<BandSpec>> {
    let items: Vec<String> = s.list("bands_mhz")?;
    items
        .iter()
        .map(|item| {
            let (c, w) = item
                .split_once(':')
                .ok_or_else(|| s.invalid("bands_mhz", format!("'{item}' is not center:width")))?;
            let c: f64 = c.trim().parse().map_err(|_| s.invalid("bands_mhz", format!("bad center in '{item}'")))?;
            let w: f64 = w.trim().parse().map_err(|_| s.invalid("bands_mhz", format!("bad width in '{item}'")))?;
            Ok(BandSpec::new(c * 1e6, w * 1e6))
        })
        .collect()
}

pub fn gensig(mut s: Settings) -> Result<()> {
    let started = unix_now();
    let pattern = resolve_pattern(&mut s)?;
    s.materialize("placement.grid_hz", pattern.lane_rate_hz());
    let window: usize = s.get("window")?;
    let seed: u64 = s.get("seed")?;
    let layout = SubbandLayout::new(pattern.grid_factor(), pattern.lane_rate_hz());
    let mut bands = parse_bands(&s)?;
    if bands.is_empty() && !s.is_empty("occupancy_mhz") {
        bands = place_transmissions(s.get("occupancy_mhz")?, &layout, s.get("placement.grid_hz")?, seed)
            .map_err(|e| s.invalid("occupancy_mhz", e))?;
    }
    let synth = SynthConfig::new(pattern.grid_factor(), pattern.lane_rate_hz(), window);
    let signal = synthesize_multiband(&bands, &synth, s.get("snr_db")?, seed).map_err(|e| match e {
        SignalError::OverlappingBands(..) | SignalError::BandOutOfRange { .. } | SignalError::EmptyBand(_) => {
            s.invalid("bands_mhz", e)
        }
        other => CliError::Config(other.to_string()),
    })?;

    let dir = out_dir(&s)?;
    let name = s.raw("output.name").to_string();
    let data_path = dir.join(format!("{name}.gbsn"));
    let truth_path = dir.join(format!("{name}.truth"));
    let pattern_path = dir.join(format!("{name}.pattern"));
    let file = fs::File::create(&data_path).map_err(|e| CliError::io(&data_path, e))?;
    let mut w = BufWriter::new(file);
    let format = s.raw("format").to_string();
    match format.as_str() {
        "grid" => container::write_grid(&mut w, signal.grid_rate_hz(), signal.samples()),
        "lanes" => {
            let jitter: f64 = s.get("jitter_rms_s")?;
            let block = apply_timing_jitter(&signal, &pattern, window, jitter, seed ^ JITTER_SALT).map_err(|e| s.invalid("jitter_rms_s", e))?;
            container::write_lanes(&mut w, signal.grid_rate_hz(), block.lanes())
        }
        _ => return Err(s.invalid("format", "expected 'grid' or 'lanes'")),
    }
    .and_then(|_| std::io::Write::flush(&mut w))
    .map_err(|e| CliError::io(&data_path, e))?;
    write_text(&truth_path, &(container::format_support(signal.truth_support()) + "\n"))?;
    write_text(&pattern_path, &pattern.to_text())?;

    println!(
        "wrote {} ({format}, {} grid samples, truth subbands {})",
        data_path.display(),
        signal.len(),
        container::format_support(signal.truth_support())
    );
    let results = json!({ "bands": bands, "truth": signal.truth_support() });
    finish("gensig", &s, started, &dir, vec![data_path, truth_path, pattern_path], results)?;
    Ok(())
}

pub fn equivalence(s: Settings) -> Result<()> {
    let started = unix_now();
    let trials: usize = s.get("trials")?;
    let window: usize = s.get("window")?;
    let err = verify_equivalence(trials, window, s.get("seed")?).map_err(|e| s.invalid("trials", e))?;
    let pass = err < EQUIVALENCE_TOLERANCE;
    println!("max relative error {err:.3e} over {trials} trials (N={window}): {}", if pass { "ok" } else { "FAILED" });
    let dir = out_dir(&s)?;
    finish(
        "equivalence",
        &s,
        started,
        &dir,
        vec![],
        json!({ "max_relative_error": err, "tolerance": EQUIVALENCE_TOLERANCE, "pass": pass }),
    )?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Acceptance(format!("equivalence error {err:e} exceeds {EQUIVALENCE_TOLERANCE:e}")))
    }
}

pub fn pattern(mut s: Settings) -> Result<()> {
    let started = unix_now();
    let pattern = resolve_pattern(&mut s)?;
    let coherence = pattern_coherence(&SensingMatrix::new(&pattern));
    let on_grid = check_hardware_delay_grid(&pattern);
    let dir = out_dir(&s)?;
    let path = dir.join(s.raw("output.name"));
    write_text(&path, &pattern.to_text())?;
    println!("{pattern}");
    println!("coherence {coherence:.6}");
    println!("250 ps delay grid: {}", if on_grid { "yes" } else { "no" });
    println!("wrote {}", path.display());
    finish(
        "pattern",
        &s,
        started,
        &dir,
        vec![path],
        json!({ "coherence": coherence, "hardware_delay_grid": on_grid }),
    )?;
    Ok(())
}
