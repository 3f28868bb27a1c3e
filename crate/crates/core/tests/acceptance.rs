//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.
//!
//! Usage: `cargo test -p extremum-tde --test acceptance [-- FILTER...]`, where
//! a filter matches a check number or a substring of its name.

use std::hint::black_box;
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use extremum_tde::estimators::cce;
use extremum_tde::signal_model::empirical_rho;
use extremum_tde::streams::Lane;
use extremum_tde::theory::{
    error_exponent, extremum_cdf_exact, harmonic_number, lower_bound, truncation_check, upper_bound,
};
use extremum_tde::{
    decoder_samples, effective_rho, encode_max_index, fit_log2_slope, generate_pair,
    generate_raw_pair, locate_extremum, mmie_decode, rho_sq_mmie, run_experiment,
    run_experiment_with_workers, sweep_k, sweep_snr, Counted, EpsilonMode, ErrorRateEstimate,
    EstimatorId, ExperimentConfig, ModelParams, RawSensorParams, SweepPoint, TrialBudget,
    TrialStream,
};

const SEED: u64 = 1;
const D_MAX: u32 = 150;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn snr20() -> f64 {
    100.0
}

/// MMIE error rates versus k at 20 dB, shared by the exponent and sandwich checks.
fn k_sweep() -> &'static Vec<SweepPoint> {
    static SWEEP: OnceLock<Vec<SweepPoint>> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let base = ExperimentConfig::new(
            ModelParams::new(20.0, D_MAX, 6).unwrap(),
            vec![EstimatorId::Mmie],
            TrialBudget::Adaptive {
                min_errors: 20_000,
                max_trials: 1_000_000,
            },
            SEED,
        );
        sweep_k(&base, &[6, 8, 10, 12, 14]).unwrap()
    })
}

fn mmie(p: &SweepPoint) -> &ErrorRateEstimate {
    p.estimate(EstimatorId::Mmie).unwrap()
}

fn error_exponent_slope() -> Verdict {
    let pts = k_sweep();
    let ks: Vec<u32> = pts.iter().map(|p| p.params.k).collect();
    let ps: Vec<f64> = pts.iter().map(|p| mmie(p).p_hat).collect();
    let slope = fit_log2_slope(&ks, &ps).unwrap();
    let target = -error_exponent(snr20()).unwrap();
    let tol = 0.1 * target.abs();
    let listing: Vec<String> = pts
        .iter()
        .map(|p| format!("k={}:{:.4e}/{}", p.params.k, mmie(p).p_hat, mmie(p).trials))
        .collect();
    Verdict::new(
        (slope - target).abs() <= tol,
        format!(
            "slope {slope:.4} vs {target:.4} +- {tol:.4} [{}]",
            listing.join(" ")
        ),
    )
}

fn bound_sandwich() -> Verdict {
    let mut ok = true;
    let mut notes = Vec::new();
    for p in k_sweep() {
        let e = mmie(p);
        if e.errors < 100 {
            notes.push(format!("k={}:skipped({} errors)", p.params.k, e.errors));
            continue;
        }
        let k = p.params.k;
        let lo = lower_bound(k, snr20(), EpsilonMode::Zero).unwrap();
        let up = upper_bound(k, snr20(), D_MAX, EpsilonMode::Zero)
            .unwrap()
            .min(1.0);
        let below = if k >= 10 {
            e.p_hat <= up
        } else {
            e.ci_low <= up
        };
        let fine = 0.1 * lo <= e.p_hat && below;
        ok &= fine;
        notes.push(format!(
            "k={k}:{:.3e}<={:.4e}<={:.3e}{}",
            0.1 * lo,
            e.p_hat,
            up,
            if fine { "" } else { "!" }
        ));
    }
    Verdict::new(ok, notes.join(" "))
}

fn extremum_statistics() -> Verdict {
    let n = 1usize << 10;
    let reps = 100_000u64;
    let mut vals: Vec<f64> = (0..reps)
        .map(|r| {
            let x = TrialStream::new(SEED, r).encoder_field().samples(0, n);
            let j = encode_max_index(&x[..]).unwrap().index() as usize;
            x[j].norm_sqr()
        })
        .collect();
    let m = reps as f64;
    let mean = vals.iter().sum::<f64>() / m;
    let h = harmonic_number(n);
    let mean_tol = 3.0 * (1.6449f64 / m).sqrt();

    let ln_n = (n as f64).ln();
    vals.sort_by(f64::total_cmp);
    let ks = vals
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = extremum_cdf_exact(v - ln_n, n);
            ((i + 1) as f64 / m - f).max(f - i as f64 / m)
        })
        .fold(0.0, f64::max);
    let dkw = 1.36 / m.sqrt();
    Verdict::new(
        (mean - h).abs() <= mean_tol && ks <= dkw,
        format!("mean {mean:.5} vs H(N) {h:.5} +- {mean_tol:.5}; KS {ks:.5} <= {dkw:.5}"),
    )
}

/// Mean and variance of `|y[J]|^2 / H(N)` at zero delay over `reps` trials.
fn rho_sq_stats(k: u32, reps: u64) -> (f64, f64) {
    let params = ModelParams::new(20.0, 0, k).unwrap();
    let mut words = Vec::new();
    let vals: Vec<f64> = (0..reps)
        .map(|t| {
            let stream = TrialStream::new(SEED, t);
            let msg = locate_extremum(k, &stream, &mut words);
            let j = msg.index() as i64;
            let y = decoder_samples(&params, &stream, 0, j, 1).get(j).unwrap();
            rho_sq_mmie(y, params.n())
        })
        .collect();
    let m = reps as f64;
    let mean = vals.iter().sum::<f64>() / m;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, var)
}

fn rho_sq_estimator() -> Verdict {
    let reps = 100_000;
    let (mean14, var14) = rho_sq_stats(14, reps);
    let (_, var8) = rho_sq_stats(8, reps);
    let rho_sq = ModelParams::new(20.0, 0, 14).unwrap().rho_sq();
    Verdict::new(
        (mean14 - rho_sq).abs() <= 0.03 && var14 < var8,
        format!("mean {mean14:.5} vs {rho_sq:.5} +- 0.03; var N=2^14 {var14:.5} < N=2^8 {var8:.5}"),
    )
}

fn benchmark_ordering() -> Verdict {
    let mut ok = true;
    let mut notes = Vec::new();
    for k in [8, 10, 12, 14] {
        let config = ExperimentConfig::new(
            ModelParams::new(20.0, D_MAX, k).unwrap(),
            vec![
                EstimatorId::Mmie,
                EstimatorId::RdCce,
                EstimatorId::OnebitCce,
            ],
            TrialBudget::Fixed { trials: 100_000 },
            SEED,
        );
        let est = run_experiment(&config).unwrap();
        let (m, rd, ob) = (&est[0], &est[1], &est[2]);
        let fine = m.p_hat < rd.p_hat
            && m.p_hat < ob.p_hat
            && m.ci_high < rd.ci_low
            && m.ci_high < ob.ci_low;
        ok &= fine;
        notes.push(format!(
            "k={k}:mmie {:.3e} rd {:.3e} 1bit {:.3e}{}",
            m.p_hat,
            rd.p_hat,
            ob.p_hat,
            if fine { "" } else { "!" }
        ));
    }
    Verdict::new(ok, notes.join("; "))
}

fn snr_sweep() -> Verdict {
    let base = ExperimentConfig::new(
        ModelParams::new(0.0, D_MAX, 15).unwrap(),
        vec![EstimatorId::Mmie],
        TrialBudget::Adaptive {
            min_errors: 500,
            max_trials: 1_000_000,
        },
        SEED,
    );
    let pts = sweep_snr(&base, &[0.0, 5.0, 10.0, 15.0, 20.0, 25.0]).unwrap();
    let mut ok = true;
    for w in pts.windows(2) {
        let (a, b) = (mmie(&w[0]), mmie(&w[1]));
        // a later point may exceed an earlier one only within CI overlap
        ok &= b.p_hat <= a.p_hat || a.overlaps(b);
    }
    let mut notes = Vec::new();
    for p in &pts {
        let up = p.bounds.as_ref().unwrap().upper_clamped;
        let e = mmie(p);
        if p.params.snr_db >= 15.0 {
            ok &= e.p_hat <= up;
        }
        notes.push(format!("{}dB:{:.3e}/{:.3e}", p.params.snr_db, e.p_hat, up));
    }
    Verdict::new(ok, notes.join(" "))
}

fn raw_equivalence() -> Verdict {
    let m = 1_000_000usize;
    let tol = 5.0 / (m as f64).sqrt();
    let settings = [
        RawSensorParams::new(1.0, 0.0, 1.0, 1.0).unwrap(),
        RawSensorParams::new(0.5, 1.0, 0.2, 0.3).unwrap(),
        RawSensorParams::new(2.0, 4.0, 0.1, 2.5).unwrap(),
    ];
    let mut ok = (effective_rho(&settings[0]).norm() - 0.5).abs() < 1e-15;
    let mut notes = Vec::new();
    for (i, raw) in settings.iter().enumerate() {
        let mut rng = TrialStream::new(SEED, i as u64).rng(Lane::Auxiliary);
        let pair = generate_raw_pair(raw, 10, m, &mut rng);
        let dev = (empirical_rho(raw, &pair) - effective_rho(raw)).norm();
        ok &= dev <= tol;
        notes.push(format!(
            "|rho|={:.4}:dev {dev:.2e}",
            effective_rho(raw).norm()
        ));
    }
    Verdict::new(ok, format!("{} (tol {tol:.1e})", notes.join(" ")))
}

fn truncation_grid() -> Verdict {
    let mut ok = true;
    let mut worst = f64::NEG_INFINITY;
    let mut cells = 0;
    for rho_sq in [0.5, 0.9, 0.99] {
        for v in [1.0, 2.0, 3.0] {
            for a in [0.5, 1.0, 2.0, 3.0] {
                let mut rng = TrialStream::new(SEED, cells).rng(Lane::Auxiliary);
                let c = truncation_check(rho_sq, v, a, 1_000_000, &mut rng).unwrap();
                ok &= c.holds;
                worst = worst.max(c.rhs - c.lhs);
                cells += 1;
            }
        }
    }
    Verdict::new(ok, format!("{cells} cells, largest rhs - lhs {worst:.3e}"))
}

fn per_call(reps: u32, mut f: impl FnMut()) -> Duration {
    let t = Instant::now();
    for _ in 0..reps {
        f();
    }
    t.elapsed() / reps
}

fn complexity() -> Verdict {
    let params = ModelParams::new(20.0, D_MAX, 14).unwrap();
    let pair = generate_pair(&params, &TrialStream::new(SEED, 0));
    let n = params.n() as u64;
    let spread = 2 * D_MAX as u64 + 1;

    let enc = Counted::new(pair.encoder_window());
    let msg = encode_max_index(&enc).unwrap();
    let dec = Counted::new(&pair.y);
    mmie_decode(&dec, &msg, D_MAX).unwrap();
    let cy = Counted::new(&pair.y);
    let cx = Counted::new(pair.encoder_window());
    cce(&cx, &cy, D_MAX).unwrap();
    let counts_ok = enc.reads() == n && dec.reads() == spread && cy.reads() == n * spread;

    let t_mmie = per_call(20_000, || {
        black_box(mmie_decode(black_box(&pair.y), &msg, D_MAX).unwrap());
    });
    let x = pair.encoder_window();
    let t_cce = per_call(3, || {
        black_box(cce(black_box(x), &pair.y, D_MAX).unwrap());
    });
    let ratio = t_cce.as_secs_f64() / t_mmie.as_secs_f64();
    Verdict::new(
        counts_ok && ratio > 100.0,
        format!(
            "reads: encoder {} (N={n}), mmie {} ({spread}), cce {} products ({}); \
             time mmie {:.2?} cce {:.2?} ratio {ratio:.0}",
            enc.reads(),
            dec.reads(),
            cy.reads(),
            n * spread,
            t_mmie,
            t_cce
        ),
    )
}

fn csv_line(params: &ModelParams, e: &ErrorRateEstimate, seed: u64) -> String {
    format!(
        "sim,{},{},{:.8e},{},{},{},{:.8e},{:.8e},{:.8e},{seed}",
        e.estimator,
        params.k,
        params.snr_db,
        params.d_max,
        e.trials,
        e.errors,
        e.p_hat,
        e.ci_low,
        e.ci_high
    )
}

fn determinism() -> Verdict {
    let configs = [
        ExperimentConfig::new(
            ModelParams::new(20.0, D_MAX, 10).unwrap(),
            EstimatorId::ALL.to_vec(),
            TrialBudget::Fixed { trials: 3000 },
            SEED,
        ),
        ExperimentConfig::new(
            ModelParams::new(10.0, D_MAX, 12).unwrap(),
            vec![EstimatorId::Mmie],
            TrialBudget::Adaptive {
                min_errors: 300,
                max_trials: 100_000,
            },
            SEED,
        ),
    ];
    let mut ok = true;
    let mut rows = 0;
    for c in &configs {
        let lines = |w: usize| -> Vec<String> {
            run_experiment_with_workers(c, w)
                .unwrap()
                .iter()
                .map(|e| csv_line(&c.params, e, c.master_seed))
                .collect()
        };
        let (a, b) = (lines(1), lines(8));
        ok &= a == b;
        rows += a.len();
    }
    Verdict::new(ok, format!("{rows} rows compared between 1 and 8 workers"))
}

type Check = (u32, &'static str, fn() -> Verdict);

const CHECKS: [Check; 10] = [
    (1, "error_exponent_slope", error_exponent_slope),
    (2, "bound_sandwich", bound_sandwich),
    (3, "extremum_statistics", extremum_statistics),
    (4, "rho_sq_estimator", rho_sq_estimator),
    (5, "benchmark_ordering", benchmark_ordering),
    (6, "snr_sweep", snr_sweep),
    (7, "raw_equivalence", raw_equivalence),
    (8, "truncation_grid", truncation_grid),
    (9, "complexity", complexity),
    (10, "determinism", determinism),
];

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let selected = |id: u32, name: &str| {
        filters.is_empty()
            || filters
                .iter()
                .any(|f| f == &id.to_string() || name.contains(f.as_str()))
    };
    let mut failed = 0;
    let mut ran = 0;
    for (id, name, check) in CHECKS {
        if !selected(id, name) {
            continue;
        }
        let t = Instant::now();
        let v = check();
        ran += 1;
        if !v.pass {
            failed += 1;
        }
        println!(
            "[{id:>2}] {} {name} ({:.1?}): {}",
            if v.pass { "PASS" } else { "FAIL" },
            t.elapsed(),
            v.detail
        );
    }
    println!("acceptance: {} of {ran} passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
