//! End-to-end acceptance checks. Runs as a plain binary so each criterion
//! prints exactly one PASS/FAIL line; the process fails if any does.

mod common;

use common::{naive_dft, random_sequence, random_subbands, rel_frobenius, theta_truth};
use mcs_core::harness::{reconstruct_block, sweep_occupancy, verify_equivalence};
use mcs_core::sampler::lane_snr_db;
use mcs_core::signal::{synthesize_tone, SynthConfig};
use mcs_core::{
    apply_timing_jitter, check_hardware_delay_grid, decimate_fold, dsp, extract_lane_samples, form_measurement, generate_pattern,
    reference_pattern, run_trial, simulate_link_and_realign, synthesize_multiband, BandSpec, Occupancy, PatternStrategy,
    SamplingPattern, SensingMatrix, SubbandLayout, TrialConfig,
};
use std::process::ExitCode;
use std::time::{Duration, Instant};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// 1. ‖X − AΘ_truth‖_F/‖X‖_F < 1e-9 against the full-grid oracle, < 30 s.
fn forward_model() -> Outcome {
    let started = Instant::now();
    let patterns = [
        generate_pattern(8, 40, PatternStrategy::Random, 1, 50e6).unwrap(),
        generate_pattern(4, 20, PatternStrategy::Random, 2, 50e6).unwrap(),
    ];
    let n = 1024;
    let mut worst: f64 = 0.0;
    for pattern in &patterns {
        let layout = SubbandLayout::new(pattern.grid_factor(), 50e6);
        let a = SensingMatrix::new(pattern);
        for seed in 0..100u64 {
            let bands = random_subbands(&layout, 1 + (seed % 3) as usize, seed);
            let cfg = SynthConfig::new(pattern.grid_factor(), 50e6, n);
            let signal = synthesize_multiband(&bands, &cfg, f64::INFINITY, seed).unwrap();
            let block = extract_lane_samples(&signal, pattern, n).unwrap();
            for d in [1, 2, 4] {
                let x = form_measurement(&block, d).unwrap();
                let model = a.entries().matmul(&theta_truth(&signal, pattern, n, d));
                worst = worst.max(rel_frobenius(&model, x.entries()));
            }
        }
    }
    let elapsed = started.elapsed();
    outcome(
        worst < 1e-9 && elapsed < Duration::from_secs(30),
        format!("max relative error {worst:.2e} over 2x100 signals, d in {{1,2,4}}, {elapsed:.2?}"),
    )
}

/// 2. Delay-path and offset-clock spectra agree to 1e-9, < 30 s.
fn equivalence() -> Outcome {
    let started = Instant::now();
    let err = verify_equivalence(200, 256, 2024).unwrap();
    let elapsed = started.elapsed();
    outcome(
        err < 1e-9 && elapsed < Duration::from_secs(30),
        format!("max relative error {err:.2e} over 200 trials, {elapsed:.2?}"),
    )
}

/// 3. FFT of the folded lane equals every d-th bin of the full FFT.
fn decimation_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in [256, 512, 1024] {
        for seed in 0..50 {
            let x = random_sequence(n, seed * 31 + n as u64);
            let full = naive_dft(&x);
            for d in [1, 2, 4, 8] {
                let folded = dsp::fft(&decimate_fold(&x, d).unwrap());
                let picked: Vec<_> = full.iter().step_by(d).copied().collect();
                worst = worst.max(dsp::max_relative_error(&folded, &picked));
            }
        }
    }
    outcome(worst < 1e-10, format!("max relative error {worst:.2e}"))
}

/// 4. Noiseless K ∈ {1, 2}: exact support in every one of 200 trials.
fn exact_recovery() -> Outcome {
    let pattern = reference_pattern();
    let layout = SubbandLayout::new(40, 50e6);
    let mut exact = [0usize; 2];
    for (slot, k) in [1usize, 2].into_iter().enumerate() {
        for seed in 0..200u64 {
            let bands = random_subbands(&layout, k, 10_000 * k as u64 + seed);
            let mut cfg = TrialConfig::new(pattern.clone(), Occupancy::Bands(bands), seed);
            cfg.snr_db = f64::INFINITY;
            let r = run_trial(&cfg).unwrap();
            if r.detected == r.truth && r.truth.len() == k {
                exact[slot] += 1;
            }
        }
    }
    outcome(exact == [200, 200], format!("K=1 {}/200, K=2 {}/200 exact", exact[0], exact[1]))
}

/// 5. Detection versus occupancy at 10 dB, 500 trials per point, < 5 min.
fn occupancy_curve() -> Outcome {
    let started = Instant::now();
    let occupancies = [50.0, 100.0, 150.0, 200.0, 300.0, 400.0];
    let base = TrialConfig::new(reference_pattern(), Occupancy::TotalMhz(0.0), 1);
    let curve = sweep_occupancy(&base, &occupancies, 500).unwrap();
    let pd: Vec<f64> = curve.iter().map(|p| p.mean_pd).collect();
    let monotone = pd.windows(2).all(|w| w[1] <= w[0] + 0.05);
    let elapsed = started.elapsed();
    let pass = pd[1] >= 0.99 && pd[3] >= 0.80 && monotone && elapsed < Duration::from_secs(300);
    let listing: Vec<String> = occupancies.iter().zip(&pd).map(|(o, p)| format!("{o}:{p:.3}")).collect();
    outcome(pass, format!("Pd by MHz [{}], {elapsed:.2?}", listing.join(" ")))
}

/// 6. 269.174 fs RMS jitter on a full-scale 1 GHz tone costs 55 ± 3 dB SNR.
fn jitter_ceiling() -> Outcome {
    // 4 GHz grid: the tone must sit inside the band, not on its edge
    let pattern = generate_pattern(8, 80, PatternStrategy::Random, 4, 50e6).unwrap();
    let tone = synthesize_tone(1e9, 1.0, &SynthConfig::new(80, 50e6, 1024));
    let reference = extract_lane_samples(&tone, &pattern, 1024).unwrap();
    let jittered = apply_timing_jitter(&tone, &pattern, 1024, 269.174e-15, 6).unwrap();
    let snr = lane_snr_db(&reference, &jittered);
    outcome((snr - 55.0).abs() <= 3.0, format!("lane SNR {snr:.2} dB"))
}

/// 7. Link model is payload-transparent for 100 random latency draws.
fn link_transparency() -> Outcome {
    let pattern = reference_pattern();
    let cfg = SynthConfig::new(40, 50e6, 1024);
    let signal = synthesize_multiband(&[BandSpec::from_edges(0.0, 100e6)], &cfg, 10.0, 7).unwrap();
    let block = extract_lane_samples(&signal, &pattern, 1024).unwrap();
    let identical = (0..100).filter(|&seed| simulate_link_and_realign(&block, 32, 16, seed).unwrap().0 == block).count();
    outcome(identical == 100, format!("{identical}/100 realigned blocks bit-identical"))
}

/// 8. The 250 ps delay grid admits exactly the divisors of 80.
fn hardware_grid() -> Outcome {
    let mismatches: Vec<usize> = (2..=400)
        .filter(|&l| {
            let p = SamplingPattern::new(1, l, &[0], 50e6).unwrap();
            check_hardware_delay_grid(&p) != (80 % l == 0)
        })
        .collect();
    outcome(mismatches.is_empty(), format!("L in 2..=400, mismatches {mismatches:?}"))
}

/// 9. One snapshot (N=1024, P=8, d=4) through sampling, front end and
/// recovery in < 100 ms on a single thread.
fn snapshot_latency() -> Outcome {
    let pattern = reference_pattern();
    let cfg = SynthConfig::new(40, 50e6, 1024);
    let signal = synthesize_multiband(&[BandSpec::from_edges(-200e6, -100e6)], &cfg, 10.0, 9).unwrap();
    let recovery = mcs_core::RecoveryConfig::for_lanes(8);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let (elapsed, detected) = pool.install(|| {
        let started = Instant::now();
        let block = extract_lane_samples(&signal, &pattern, 1024).unwrap();
        let report = reconstruct_block(&block, 4, &recovery).unwrap();
        (started.elapsed(), report.detected_subbands)
    });
    let correct = detected == *signal.truth_support();
    outcome(
        elapsed < Duration::from_millis(100) && correct,
        format!("{elapsed:.2?} single-threaded, detected {detected:?}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("forward-model consistency", forward_model),
        ("architecture equivalence", equivalence),
        ("decimation identity", decimation_identity),
        ("noiseless exact recovery", exact_recovery),
        ("detection vs occupancy", occupancy_curve),
        ("jitter SNR ceiling", jitter_ceiling),
        ("link transparency", link_transparency),
        ("hardware delay grid", hardware_grid),
        ("snapshot latency", snapshot_latency),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        println!("{} {}. {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
