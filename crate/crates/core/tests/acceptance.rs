//! Acceptance suite. Every criterion prints one PASS/FAIL line (written
//! straight to stderr so it shows without `--nocapture`); the test fails if
//! any criterion fails.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tcs_core::analysis::{gronwall_bound, DecayVerification};
use tcs_core::diagnostics::{
    fluctuations, lyapunov, norms, run_fluctuation_oracle, DiagnosticsContext, FluctuationState,
};
use tcs_core::harness::io::read_timeseries;
use tcs_core::harness::report::parse_trailer;
use tcs_core::harness::{run, sample_initial_data, ScenarioConfig};
use tcs_core::integrator::{integrate, IntegratorConfig};
use tcs_core::model::{
    asymptotic_temperature, center_of_mass, CommunicationKernel, ConservedQuantities, ModelParams,
    ParticleEnsemble,
};

const PUBLISHED_T_MIN: f64 = 10.6445;
const PUBLISHED_T_MAX: f64 = 10.8955;

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn report(o: &Outcome) {
    let mut err = std::io::stderr();
    let _ = writeln!(
        err,
        "[acceptance {}] {} {}: {}",
        o.id,
        if o.pass { "PASS" } else { "FAIL" },
        o.name,
        o.detail
    );
}

fn tcs(args: &[&str]) -> (i32, String, Duration) {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_tcs"))
        .args(args)
        .output()
        .expect("run tcs binary");
    let elapsed = start.elapsed();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        elapsed,
    )
}

fn trailer_map(stdout: &str) -> HashMap<String, String> {
    parse_trailer(stdout).into_iter().collect()
}

fn num(map: &HashMap<String, String>, key: &str) -> f64 {
    map.get(key)
        .unwrap_or_else(|| panic!("trailer lacks {key}"))
        .parse()
        .unwrap()
}

fn sig3(x: f64) -> f64 {
    let mag = 10f64.powf(x.abs().log10().floor() - 2.0);
    (x / mag).round() * mag
}

fn initial_norms(s: &ParticleEnsemble) -> (f64, f64, f64) {
    let com = center_of_mass(s);
    let t_inf = asymptotic_temperature(&ConservedQuantities::from_initial(s), &com.v);
    let n = norms(&fluctuations(s, t_inf));
    (n.x, n.v, n.t)
}

fn criterion_1() -> Outcome {
    let (code, stdout, elapsed) = tcs(&["check", "--preset", "paper-sec6"]);
    let kv = trailer_map(&stdout);
    let t_m = num(&kv, "constant.T_m");
    let t_mx = num(&kv, "constant.T_M");
    let phi = num(&kv, "global.e1.lhs");
    let e1 = num(&kv, "global.e1.rhs");
    let e2 = num(&kv, "global.e2.rhs");
    let all_conditions = kv
        .iter()
        .filter(|(k, _)| k.starts_with("global.") && k.ends_with(".satisfied"))
        .all(|(_, v)| v == "true");
    let pass = code == 0
        && kv.get("global.overall").map(String::as_str) == Some("true")
        && all_conditions
        && (t_m - PUBLISHED_T_MIN).abs() <= 0.05
        && (t_mx - PUBLISHED_T_MAX).abs() <= 0.05
        && sig3(phi) == sig3(0.296)
        && sig3(e1) == sig3(0.142)
        && sig3(e2) == sig3(0.181)
        && phi > e1.max(e2)
        && elapsed < Duration::from_secs(1);
    Outcome {
        id: 1,
        name: "hypothesis reproduction",
        pass,
        detail: format!(
            "exit {code}, T_m {t_m:.4}, T_M {t_mx:.4}, phi(3sqrt2 eps0) {phi:.4} > max({e1:.4}, {e2:.4}), {:.3}s",
            elapsed.as_secs_f64()
        ),
    }
}

fn criterion_2() -> Outcome {
    let base = ScenarioConfig::reference_experiment();
    let n = base.n as f64;
    let w = |i: usize| base.position_box[i].width();
    // Sample sum of squared deviations has mean (n-1) * variance.
    let x_expected = ((n - 1.0) * (w(0).powi(2) + w(1).powi(2)) / 12.0).sqrt();
    let t_expected = ((n - 1.0) * base.temperature_interval.width().powi(2) / 12.0).sqrt();
    let (mut sx, mut st) = (0.0, 0.0);
    for seed in 0..100 {
        let mut c = base.clone();
        c.seed = seed;
        let (x, _, t) = initial_norms(&sample_initial_data(&c).unwrap());
        sx += x;
        st += t;
    }
    let (mx, mt) = (sx / 100.0, st / 100.0);
    let pass = (mx / x_expected - 1.0).abs() <= 0.1
        && (mx / 0.144 - 1.0).abs() <= 0.1
        && (mt / t_expected - 1.0).abs() <= 0.1
        && (mt / 0.29 - 1.0).abs() <= 0.1;
    Outcome {
        id: 2,
        name: "initial-data statistics",
        pass,
        detail: format!(
            "mean X(0) {mx:.4} (expected {x_expected:.4}), mean Tnorm(0) {mt:.4} (expected {t_expected:.4})"
        ),
    }
}

/// Criteria 3, 4, 5 and the first two parts of 9 share one CLI run.
fn simulation_criteria(dir: &Path) -> Vec<Outcome> {
    let out_dir = dir.join("sim");
    let (code, stdout, elapsed) = tcs(&[
        "simulate",
        "--preset",
        "paper-sec6",
        "--t-end",
        "50",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    let kv = trailer_map(&stdout);
    let records = read_timeseries(&out_dir.join("timeseries.csv")).unwrap();
    let mut outcomes = Vec::new();

    let mech = num(&kv, "envelope.mechanical.violations");
    let temp = num(&kv, "envelope.temperature.violations");
    let rec_count = num(&kv, "envelope.records");
    outcomes.push(Outcome {
        id: 3,
        name: "decay envelopes",
        pass: code == 0
            && mech == 0.0
            && temp == 0.0
            && rec_count as usize == records.len()
            && records.len() >= 5000
            && elapsed < Duration::from_secs(30),
        detail: format!(
            "exit {code}, {} records, mechanical violations {mech}, temperature violations {temp}, {:.2}s",
            records.len(),
            elapsed.as_secs_f64()
        ),
    });

    let eps = 0.003;
    let a1 = num(&kv, "constant.A1");
    let mut pass = true;
    let mut detail = Vec::new();
    for (q, floor) in [
        ("X", eps / 3.0),
        ("V", eps / 3.0),
        ("Tnorm", a1.min(2.0 * eps / 3.0) / 2.0),
    ] {
        let rate = num(&kv, &format!("fit.{q}.rate"));
        let r2 = num(&kv, &format!("fit.{q}.r_squared"));
        pass &= rate > 0.0 && rate >= floor;
        detail.push(format!("{q} rate {rate:.4e} >= {floor:.1e} (r^2 {r2:.3})"));
    }
    outcomes.push(Outcome {
        id: 4,
        name: "flocking rates",
        pass,
        detail: detail.join(", "),
    });

    // Independent check of the mean orbit from the CSV columns.
    let (x0, v0) = (&records[0].x_c, &records[0].v_c);
    let mut com_err = 0.0f64;
    for r in &records {
        let (s, c) = r.t.sin_cos();
        for k in 0..x0.len() {
            com_err = com_err
                .max((r.x_c[k] - (c * x0[k] + s * v0[k])).abs())
                .max((r.v_c[k] - (-s * x0[k] + c * v0[k])).abs());
        }
    }
    let e0 = records[0].energy;
    let energy = records
        .iter()
        .fold(0.0f64, |m, r| m.max((r.energy - e0).abs() / e0.abs()));
    let zero_mean = num(&kv, "drift.zero_mean");
    let identity = num(&kv, "drift.temperature_identity");
    outcomes.push(Outcome {
        id: 5,
        name: "conservation",
        pass: energy <= 1e-8 && com_err <= 1e-8 && zero_mean <= 1e-9 && identity <= 1e-8,
        detail: format!(
            "energy {energy:.2e}, center of mass {com_err:.2e}, zero mean {zero_mean:.2e}, temperature identity {identity:.2e}"
        ),
    });

    let diss = num(&kv, "dissipative.violations");
    let checked = num(&kv, "dissipative.checked");
    let (t_m, t_mx) = (num(&kv, "constant.T_m"), num(&kv, "constant.T_M"));
    let eps0 = 0.76;
    let corridor = records
        .iter()
        .all(|r| r.min_t >= t_m - eps0 && r.max_t <= t_mx + eps0);
    let lyap = lyapunov_equivalence();
    outcomes.push(Outcome {
        id: 9,
        name: "property suite",
        pass: diss == 0.0 && checked > 0.0 && corridor && lyap.0,
        detail: format!(
            "dissipative violations {diss} over {checked} samples, temperature corridor {}, {}",
            if corridor { "holds" } else { "BROKEN" },
            lyap.1
        ),
    });
    outcomes
}

fn lyapunov_equivalence() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_lo = f64::INFINITY;
    let mut worst_hi = f64::INFINITY;
    for _ in 0..1000 {
        let n = rng.gen_range(1..30);
        let dim = rng.gen_range(1..4);
        let scale = 10f64.powf(rng.gen_range(-3.0..2.0));
        let mut gen = |len: usize| -> Vec<f64> {
            (0..len).map(|_| scale * rng.gen_range(-1.0..1.0)).collect()
        };
        let f = FluctuationState {
            dim,
            xhat: gen(n * dim),
            vhat: gen(n * dim),
            that: gen(n),
        };
        let eps = rng.gen_range(1e-6..=0.5);
        let l = lyapunov(&f, eps).value;
        let nr = norms(&f);
        let z = nr.x * nr.x + nr.v * nr.v;
        worst_lo = worst_lo.min(l - 3.0 / 16.0 * z);
        worst_hi = worst_hi.min(3.0 / 4.0 * z - l);
    }
    (
        worst_lo >= 0.0 && worst_hi >= 0.0,
        format!("Lyapunov equivalence on 1000 states (min slack {worst_lo:.2e} / {worst_hi:.2e})"),
    )
}

fn random_config(rng: &mut ChaCha8Rng) -> ScenarioConfig {
    let mut c = ScenarioConfig::reference_experiment();
    c.n = rng.gen_range(5..40);
    c.seed = rng.gen();
    for iv in c.position_box.iter_mut().chain(c.velocity_box.iter_mut()) {
        let lo = rng.gen_range(-0.5..0.5);
        iv.lo = lo;
        iv.hi = lo + rng.gen_range(0.0..0.1);
    }
    let t = rng.gen_range(2.0..20.0);
    c.temperature_interval.lo = t;
    c.temperature_interval.hi = t + rng.gen_range(0.0..0.5);
    c.kappa1 = rng.gen_range(0.1..5.0);
    c.kappa2 = rng.gen_range(1.0..200.0);
    c.eps0 = rng.gen_range(0.1..0.5);
    c
}

fn criterion_6() -> Outcome {
    let mut configs = vec![ScenarioConfig::reference_experiment()];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    while configs.len() < 11 {
        let c = random_config(&mut rng);
        if run::check(&c).hypotheses.iter().any(|h| h.overall) {
            configs.push(c);
        }
    }
    let mut worst = 0.0f64;
    for c in &configs {
        let s0 = sample_initial_data(c).unwrap();
        let icfg = IntegratorConfig::new(c.dt, 10.0, 10).unwrap();
        let r = run_fluctuation_oracle(&s0, &c.model_params().unwrap(), &icfg).unwrap();
        let m = r.max_deviation;
        worst = worst.max(m.x).max(m.v).max(m.t);
    }
    Outcome {
        id: 6,
        name: "oracle equivalence",
        pass: worst <= 1e-6,
        detail: format!("max deviation {worst:.2e} over preset + 10 random admissible configurations on [0, 10]"),
    }
}

fn criterion_7() -> Outcome {
    let s = ParticleEnsemble::from_rows(&[vec![1.0, 0.0]], &[vec![0.0, 0.5]], &[5.0]).unwrap();
    let p = ModelParams::new(
        1.0,
        100.0,
        CommunicationKernel::algebraic(1.0, 1.0).unwrap(),
        CommunicationKernel::algebraic(40.0, 1.0).unwrap(),
        2,
    )
    .unwrap();
    let t_end: f64 = 2.0;
    let exact = [t_end.cos(), 0.5 * t_end.sin()];
    let ctx = DiagnosticsContext::new(&s, 0.003);
    let errors: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&dt| {
            let cfg = IntegratorConfig::new(dt, t_end, 1000)
                .unwrap()
                .with_states();
            let traj = integrate(&s, &p, &cfg, &ctx, |_, _| {}).unwrap();
            let last = traj.states.unwrap().pop().unwrap();
            let x = last.position(0);
            ((x[0] - exact[0]).powi(2) + (x[1] - exact[1]).powi(2)).sqrt()
        })
        .collect();
    let ratios = [errors[0] / errors[1], errors[1] / errors[2]];
    Outcome {
        id: 7,
        name: "integrator order",
        pass: ratios.iter().all(|r| (14.0..=18.0).contains(r)),
        detail: format!(
            "errors {:.3e} {:.3e} {:.3e}, ratios {:.3} {:.3}",
            errors[0], errors[1], errors[2], ratios[0], ratios[1]
        ),
    }
}

fn criterion_8() -> Outcome {
    let mut worst = 0.0f64;
    let y0 = 1.3;
    for &c1 in &[0.5, 1.7, 3.0] {
        for &c2 in &[0.1, 1.0, 4.0] {
            for &c3 in &[0.2, 1.1, 2.5] {
                // Fine-grid RK4 of y' = -c1 y + c2 exp(-c3 t).
                let f = |t: f64, y: f64| -c1 * y + c2 * (-c3 * t).exp();
                let h = 1e-3;
                let (mut t, mut y) = (0.0, y0);
                for step in 1..=5000 {
                    let k1 = f(t, y);
                    let k2 = f(t + h / 2.0, y + h / 2.0 * k1);
                    let k3 = f(t + h / 2.0, y + h / 2.0 * k2);
                    let k4 = f(t + h, y + h * k3);
                    y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                    t = step as f64 * h;
                    if step % 500 == 0 {
                        let b = gronwall_bound(y0, c1, c2, c3, t);
                        assert!(!b.degenerate);
                        worst = worst.max((b.value - y).abs() / y.abs());
                    }
                }
            }
        }
    }
    Outcome {
        id: 8,
        name: "Gronwall cross-check",
        pass: worst <= 1e-8,
        detail: format!("max relative deviation {worst:.2e} on 27 parameter triples"),
    }
}

#[test]
fn acceptance_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let mut outcomes = vec![criterion_1(), criterion_2()];
    outcomes.extend(simulation_criteria(dir.path()));
    outcomes.push(criterion_6());
    outcomes.push(criterion_7());
    outcomes.push(criterion_8());
    outcomes.sort_by_key(|o| o.id);
    for o in &outcomes {
        report(o);
    }
    let failed: Vec<u32> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    assert_eq!(outcomes.len(), 9);
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

/// The same verification through the library, as a cross-check of the CLI
/// wiring.
#[test]
fn library_simulation_agrees_with_cli_contract() {
    let mut cfg = ScenarioConfig::reference_experiment();
    cfg.t_end = 5.0;
    let out = run::simulate(&cfg, None);
    assert_eq!(out.report.status.code(), 0, "{}", out.report.render());
    match out.report.decay {
        Some(DecayVerification::Checked {
            violations,
            records,
            ..
        }) => {
            assert!(violations.is_empty());
            assert_eq!(records, 501);
        }
        other => panic!("{other:?}"),
    }
}
