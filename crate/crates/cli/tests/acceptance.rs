//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Run with `cargo test -p cicsim-cli --test acceptance`.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use cicsim::analysis::{measure_snr, spectrum, Window};
use cicsim::chain::{chain_response, design_chain, ChainSpec};
use cicsim::cic::{
    design, frequency_response_mag, output_msb, process, process_pipelined, reference_params,
    reference_schedule, truncation_error_bound, CicParams, CicState,
};
use cicsim::mcla::{bit_pg, block_carries, group_pg, mcla_add, PgPair};
use cicsim::netlist::emit_netlist;
use cicsim::sources::{seeded_rng, sine_samples};
use cicsim::FixedWord;
use cicsim_cli::commands::{reference_add, snr_run};
use cicsim_cli::config::RunConfig;
use num_bigint::BigUint;
use rand::Rng;
use rand_distr::{Distribution, Normal};

type Check = fn() -> Outcome;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn cicsim(dir: &Path, args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_cicsim"))
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .output()
        .expect("cicsim runs");
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn field(report: &str, key: &str) -> String {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or("")
        .to_string()
}

fn word(v: i64, w: u32) -> FixedWord {
    FixedWord::new(v, w).unwrap()
}

fn params(n: u32, m: u32, r: u32, b: u32) -> CicParams {
    CicParams::new(n, m, r, b).unwrap()
}

fn boxcar_power(len: usize, n: u32) -> Vec<i128> {
    let mut h = vec![1i128];
    for _ in 0..n {
        let mut next = vec![0i128; h.len() + len - 1];
        for (i, &v) in h.iter().enumerate() {
            for slot in &mut next[i..i + len] {
                *slot += v;
            }
        }
        h = next;
    }
    h
}

fn c1_register_growth() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let report = cicsim(
        dir.path(),
        &[
            "design",
            "--stages",
            "5",
            "--delay",
            "1",
            "--decimation",
            "16",
        ],
    );
    let reported = field(&report, "g_max");
    let mut rng = seeded_rng(1);
    let mut mismatches = 0;
    for _ in 0..50 {
        let (n, m, r) = (
            rng.random_range(1..=6u32),
            rng.random_range(1..=3u32),
            rng.random_range(2..=32u32),
        );
        let d = design(params(n, m, r, 1), None);
        let expect = BigUint::from(r * m).pow(n);
        if d.map(|d| d.g_max).ok() != Some(expect) {
            mismatches += 1;
        }
    }
    outcome(
        reported == "1048576" && mismatches == 0,
        format!("g_max(5,1,16) = {reported}; random configs mismatching (RM)^N: {mismatches}/50"),
    )
}

fn c2_word_length() -> Outcome {
    let b6 = output_msb(&params(5, 1, 16, 6));
    let b1 = output_msb(&params(5, 1, 16, 1));
    outcome(
        b6 == 25 && b1 == 20,
        format!("b_max(B_in=6) = {b6}, b_max(B_in=1) = {b1}"),
    )
}

fn c3_fir_equivalence() -> Outcome {
    let mut rng = seeded_rng(3);
    let (mut runs, mut bad, mut runs_wrapping) = (0, 0, 0);
    for n in 1..=4 {
        for m in 1..=2 {
            for r in 2..=8 {
                for b in 1..=6 {
                    let p = params(n, m, r, b);
                    let d = design(p, None).unwrap();
                    let h = boxcar_power((r * m) as usize, n);
                    let lo = FixedWord::min_value(b);
                    let hi = FixedWord::max_value(b);
                    for phase in 0..r.min(4) {
                        let x: Vec<i64> = (0..10_000).map(|_| rng.random_range(lo..=hi)).collect();
                        let xs: Vec<FixedWord> = x.iter().map(|&v| word(v, b)).collect();
                        let mut s = CicState::with_phase(&d, phase).unwrap();
                        let got = process(&d, &mut s, &xs).unwrap();
                        let expect: Vec<i64> = (phase as usize..x.len())
                            .step_by(r as usize)
                            .map(|k| {
                                let acc: i128 = h
                                    .iter()
                                    .enumerate()
                                    .take_while(|(j, _)| *j <= k)
                                    .map(|(j, c)| c * x[k - j] as i128)
                                    .sum();
                                cicsim::fixed_point::wrap(acc, d.output_width())
                                    .unwrap()
                                    .value()
                            })
                            .collect();
                        runs += 1;
                        if got.iter().map(|w| w.value()).ne(expect.iter().copied()) {
                            bad += 1;
                        }
                        if s.stats.integrator_wraps > 0 {
                            runs_wrapping += 1;
                        }
                    }
                }
            }
        }
    }
    outcome(
        bad == 0 && runs_wrapping > 0,
        format!("{runs} runs x 10^4 samples, {bad} mismatching, {runs_wrapping} with integrator wrap-around"),
    )
}

fn adder_sweep(w: u32) -> u64 {
    let mut bad = 0;
    for a in 0..1u64 << w {
        for b in 0..1u64 << w {
            for c in [false, true] {
                let (x, y) = (
                    FixedWord::from_bits(a, w).unwrap(),
                    FixedWord::from_bits(b, w).unwrap(),
                );
                let got = mcla_add(x, y, c).unwrap();
                if (got.sum, got.carry_out) != reference_add(x, y, c) {
                    bad += 1;
                }
            }
        }
    }
    bad
}

fn c4_mcla() -> Outcome {
    let bad4 = adder_sweep(4);
    let bad8 = adder_sweep(8);
    let mut rng = seeded_rng(4);
    let mut bad25 = 0;
    for _ in 0..1_000_000 {
        let x = FixedWord::from_bits(rng.random(), 25).unwrap();
        let y = FixedWord::from_bits(rng.random(), 25).unwrap();
        let c: bool = rng.random();
        let got = mcla_add(x, y, c).unwrap();
        if (got.sum, got.carry_out) != reference_add(x, y, c) {
            bad25 += 1;
        }
    }
    let mut bad_identity = 0;
    for a in 0..16u32 {
        for b in 0..16u32 {
            for c0 in [false, true] {
                let pg: [PgPair; 4] =
                    std::array::from_fn(|i| bit_pg((a >> i) & 1 == 1, (b >> i) & 1 == 1));
                let g = group_pg(&pg);
                if block_carries(&pg, c0)[3] != (g.generate || (g.propagate && c0)) {
                    bad_identity += 1;
                }
            }
        }
    }
    outcome(
        bad4 + bad8 + bad25 + bad_identity == 0,
        format!(
            "mismatches: width 4 {bad4}/512, width 8 {bad8}/131072, width 25 {bad25}/10^6, group carry identity {bad_identity}/512"
        ),
    )
}

fn c5_netlist() -> Outcome {
    let compiled = emit_netlist(8).unwrap().compile().unwrap();
    let mut bad = 0;
    let mut cases = 0;
    for a in 0..256u64 {
        for b in 0..256u64 {
            for c in [false, true] {
                let (x, y) = (
                    FixedWord::from_bits(a, 8).unwrap(),
                    FixedWord::from_bits(b, 8).unwrap(),
                );
                cases += 1;
                if compiled.add(x, y, c).unwrap() != mcla_add(x, y, c).unwrap() {
                    bad += 1;
                }
            }
        }
    }
    outcome(bad == 0, format!("{cases} cases, {bad} mismatching"))
}

fn c6_pipeline() -> Outcome {
    let d = design(reference_params(), None).unwrap();
    let mut rng = seeded_rng(6);
    let x: Vec<FixedWord> = (0..100_000)
        .map(|_| word(rng.random_range(-32..32), 6))
        .collect();
    let lag = d.stages() - 1;
    let mut delayed = vec![word(0, 6); lag];
    delayed.extend_from_slice(&x);
    delayed.truncate(x.len());
    let piped = process_pipelined(&d, &mut CicState::new(&d), &x).unwrap();
    let direct = process(&d, &mut CicState::new(&d), &delayed).unwrap();
    outcome(
        piped == direct && !piped.is_empty(),
        format!(
            "{} outputs compared, latency {lag} input samples",
            piped.len()
        ),
    )
}

fn c7_frequency_response() -> Outcome {
    let p = reference_params();
    let dc = frequency_response_mag(&p, 0.0);
    let worst_null = (1..=7)
        .map(|k| frequency_response_mag(&p, k as f64 / 16.0) / dc)
        .fold(0.0, f64::max);
    let h: Vec<f64> = boxcar_power(16, 5).iter().map(|&c| c as f64).collect();
    let mut rng = seeded_rng(7);
    let mut worst_rel = 0.0f64;
    for _ in 0..1000 {
        let f: f64 = rng.random_range(0.0..0.5);
        let (mut re, mut im) = (0.0, 0.0);
        for (n, c) in h.iter().enumerate() {
            let ph = -2.0 * std::f64::consts::PI * f * n as f64;
            re += c * ph.cos();
            im += c * ph.sin();
        }
        let oracle = re.hypot(im);
        worst_rel = worst_rel.max((frequency_response_mag(&p, f) - oracle).abs() / dc);
    }
    outcome(
        dc == 1_048_576.0 && worst_null <= 1e-9 && worst_rel <= 1e-9,
        format!("DC gain {dc}, worst null {worst_null:.2e} of DC, worst oracle deviation {worst_rel:.2e} of DC"),
    )
}

fn c8_truncation_bound() -> Outcome {
    let p = reference_params();
    let d = design(p, Some(reference_schedule())).unwrap();
    let full = design(p, None).unwrap();
    let bound = truncation_error_bound(&d).unwrap();
    let bound_lsbs = u64::try_from(&bound).unwrap();
    let dropped = d.dropped_bits();
    let mut rng = seeded_rng(8);
    // a 25-bit first integrator only holds |x| <= 16 without overflow
    let x: Vec<FixedWord> = (0..1_000_000)
        .map(|_| word(rng.random_range(-16..=15), 6))
        .collect();
    let yt = process(&d, &mut CicState::new(&d), &x).unwrap();
    let yf = process(&full, &mut CicState::new(&full), &x).unwrap();
    // error in full-width LSBs, then compared with the bound scaled the same way
    let worst = yf
        .iter()
        .zip(&yt)
        .map(|(f, t)| (f.value() as i128 - ((t.value() as i128) << dropped)).abs())
        .max()
        .unwrap();
    let worst_out = worst as f64 / (1u64 << dropped) as f64;
    outcome(
        worst <= (bound_lsbs as i128) << dropped,
        format!("bound {bound_lsbs} output LSBs, observed max {worst_out:.4} output LSBs over {} outputs", yt.len()),
    )
}

fn c9_chain() -> Outcome {
    let cfg = design_chain(&ChainSpec::default()).unwrap();
    let factors = cfg.stage_factors();
    let rates_ok = factors.iter().all(|&f| f >= 2) && factors.iter().product::<u32>() == 128;
    let nulls: Vec<f64> = (1..=8).map(|k| 384e3 * k as f64).collect();
    let null_db = chain_response(&cfg, &nulls).unwrap();
    let worst_null = null_db.iter().cloned().fold(f64::MIN, f64::max);

    let grid: Vec<f64> = (0..=348).map(|k| k as f64 * 1e3).collect();
    let db = chain_response(&cfg, &grid).unwrap();
    let ripple =
        db.iter().cloned().fold(f64::MIN, f64::max) - db.iter().cloned().fold(f64::MAX, f64::min);
    let cic_droop = -20.0
        * (frequency_response_mag(&cfg.cic.params, 348e3 / cfg.fs_in)
            / frequency_response_mag(&cfg.cic.params, 0.0))
        .log10();

    let pass_grid: Vec<f64> = (0..=cfg.f_pass as usize / 1000)
        .map(|k| k as f64 * 1e3)
        .collect();
    let pdb = chain_response(&cfg, &pass_grid).unwrap();
    let pass_ripple =
        pdb.iter().cloned().fold(f64::MIN, f64::max) - pdb.iter().cloned().fold(f64::MAX, f64::min);
    let pass_droop = -20.0
        * (frequency_response_mag(&cfg.cic.params, cfg.f_pass / cfg.fs_in)
            / frequency_response_mag(&cfg.cic.params, 0.0))
        .log10();

    outcome(
        rates_ok && worst_null <= -100.0 && ripple < cic_droop,
        format!(
            "factors {factors:?} -> {:.0} Hz; worst CIC-null level {worst_null:.1} dB; \
             ripple 0-348 kHz {ripple:.2} dB vs CIC droop at 348 kHz {cic_droop:.2} dB; \
             (in-band 0-{:.0} Hz: ripple {pass_ripple:.4} dB vs droop {pass_droop:.4} dB)",
            cfg.output_rate(),
            cfg.f_pass
        ),
    )
}

fn c10_snr() -> Outcome {
    let mut worst_change = f64::INFINITY;
    let mut lines = Vec::new();
    for seed in 1..=5 {
        let cfg = RunConfig {
            seed,
            ..RunConfig::default()
        };
        let run = snr_run(&cfg).unwrap();
        let after = run.after.as_ref().unwrap().1;
        worst_change = worst_change.min(after - run.before_db);
        lines.push(format!("{:.2}->{:.2}", run.before_db, after));
    }

    // sine plus white Gaussian noise of known power
    let fs = 48_000.0;
    let n = 1 << 16;
    let (amp, sigma, band) = (0.5, 1e-3, (0.0, 20_000.0));
    let f = 1001.0 * fs / n as f64;
    let mut rng = seeded_rng(10);
    let noise = Normal::new(0.0, sigma).unwrap();
    let x: Vec<f64> = sine_samples(amp, f, fs, 0.4, n)
        .iter()
        .map(|v| v + noise.sample(&mut rng))
        .collect();
    let s = spectrum(&x, fs, Window::Hann, 1.0).unwrap();
    let measured = measure_snr(&s, f, band, 3).unwrap();
    let truth =
        10.0 * ((amp * amp / 2.0) / (sigma * sigma * (band.1 - band.0) / (fs / 2.0))).log10();
    let synth_err = measured - truth;

    outcome(
        worst_change >= -1.0 && synth_err.abs() <= 0.5,
        format!(
            "before->after dB per seed [{}], worst change {worst_change:+.3} dB; synthetic {measured:.3} dB vs analytic {truth:.3} dB",
            lines.join(", ")
        ),
    )
}

fn c11_determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    cicsim(a.path(), &["--seed", "42", "snr"]);
    cicsim(b.path(), &["--seed", "42", "snr"]);
    let names = ["snr.txt", "snr_before.csv", "snr_after.csv"];
    let same = names
        .iter()
        .filter(|n| {
            std::fs::read(a.path().join(n)).unwrap() == std::fs::read(b.path().join(n)).unwrap()
        })
        .count();
    outcome(
        same == names.len(),
        format!("{same}/{} output files byte-identical", names.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [(u32, Duration, Check); 11] = [
        (1, Duration::from_secs(1), c1_register_growth),
        (2, Duration::from_secs(1), c2_word_length),
        (3, Duration::from_secs(120), c3_fir_equivalence),
        (4, Duration::from_secs(30), c4_mcla),
        (5, Duration::from_secs(60), c5_netlist),
        (6, Duration::from_secs(30), c6_pipeline),
        (7, Duration::from_secs(10), c7_frequency_response),
        (8, Duration::from_secs(120), c8_truncation_bound),
        (9, Duration::from_secs(60), c9_chain),
        (10, Duration::from_secs(120), c10_snr),
        (11, Duration::from_secs(120), c11_determinism),
    ];
    let mut failed = 0;
    for (id, budget, check) in criteria {
        let start = Instant::now();
        let o = check();
        let took = start.elapsed();
        let in_time = took <= budget;
        let pass = o.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {id}: {} ({:.2}s / {}s budget{}) {}",
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { ", over budget" },
            o.detail
        );
    }
    println!("acceptance: {} of 11 criteria passed", 11 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
