//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any fails.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use iscsc::array::{steering_derivative, steering_vector, ArrayGeometry, ChannelEstimate};
use iscsc::kinematics::{evolve_state, jacobian_g1, ProcessDraw, SlotClock, VehicleState};
use iscsc::linalg::{self, c, CMat, CVec};
use iscsc::opt::{gaussian_randomization, validate_outage_mc, RandomizationParams, SensingTarget, SlotProblem, Targets};
use iscsc::semantic::{comm_sense_power, BeamformerSet};
use iscsc::sensing::{fim_observation, fim_posterior, pcrb_report, pcrb_theta};
use iscsc::sim::{load_config, run_simulation, Beamforming, FilterKind, Role, RunResult, Scenario, SlotStatus};
use nalgebra::{Matrix3, Matrix4};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn scenario(name: &str) -> Scenario {
    load_config(&config_path(name)).expect("shipped config loads")
}

fn rel(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / b.abs().max(floor)
}

fn intended<'a>(run: &'a RunResult) -> impl Iterator<Item = (SlotStatus, &'a iscsc::sim::VehicleRecord)> + 'a {
    run.records
        .iter()
        .flat_map(|r| r.vehicles.iter().map(move |v| (r.status, v)))
        .filter(|(_, v)| v.role == Role::Intended)
}

fn semantic_gain(run: &RunResult, elapsed: Duration) -> Verdict {
    let mut worst: f64 = 0.0;
    let (mut sem, mut conv, mut n) = (0.0, 0.0, 0usize);
    for (status, v) in intended(run) {
        if !status.is_feasible() {
            continue;
        }
        let rho = v.rho.expect("intended vehicles carry ρ");
        for link in [&v.predicted_link, &v.true_link] {
            worst = worst.max(rel(link.semantic_rate, link.conventional_rate / rho, 1e-300));
        }
        sem += v.predicted_link.semantic_rate;
        conv += v.predicted_link.conventional_rate;
        n += 1;
    }
    let ratio = sem / conv;
    let pass = n > 0 && worst <= 1e-12 && ratio >= 1.4 && elapsed < Duration::from_secs(300);
    verdict(
        pass,
        format!(
            "{n} feasible slots, identity error {worst:.1e}, mean semantic/conventional {ratio:.3}, run {:.0} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn tracking_ordering() -> Verdict {
    let start = Instant::now();
    let base = scenario("nominal.toml").config;
    let mut rmse = Vec::new();
    for filter in [FilterKind::Ekf, FilterKind::Pf, FilterKind::None] {
        let (mut a, mut d, mut n) = (0.0, 0.0, 0.0);
        for seed in 1..=10 {
            let mut cfg = base.clone();
            cfg.optimizer.beamforming = Beamforming::Isotropic;
            cfg.simulation.filter = filter;
            cfg.simulation.seed = seed;
            let run = run_simulation(&cfg.resolve().expect("valid")).expect("run");
            for v in run.records.iter().flat_map(|r| &r.vehicles) {
                a += (v.posterior.theta - v.truth.theta).powi(2);
                d += (v.posterior.distance - v.truth.distance).powi(2);
                n += 1.0;
            }
        }
        rmse.push(((a / n).sqrt(), (d / n).sqrt()));
    }
    let (ekf, pf, none) = (rmse[0], rmse[1], rmse[2]);
    let elapsed = start.elapsed();
    let pass = ekf.0 < none.0 && ekf.1 < none.1 && ekf.0 <= 2.0 * pf.0 && elapsed < Duration::from_secs(600);
    verdict(
        pass,
        format!(
            "angle RMSE ekf {:.3e} pf {:.3e} none {:.3e}; distance RMSE ekf {:.3e} none {:.3e}; {:.0} s",
            ekf.0,
            pf.0,
            none.0,
            ekf.1,
            none.1,
            elapsed.as_secs_f64()
        ),
    )
}

fn outage_certificate(run: &RunResult) -> Verdict {
    let start = Instant::now();
    let (mut checked, mut failed, mut worst) = (0usize, 0usize, 0.0f64);
    for d in &run.designs {
        let feasible = run.records.iter().any(|r| r.slot == d.slot && r.status.is_feasible());
        if !feasible {
            continue;
        }
        let est = validate_outage_mc(&d.beams, &d.intended, &d.eavesdroppers, &d.outage_targets(), 10_000, d.slot as u64)
            .expect("outage check");
        for o in est {
            let eps = match o.kind {
                iscsc::opt::BtiKind::Intended { .. } => d.epsilon_intended,
                iscsc::opt::BtiKind::Eavesdropper { .. } => d.epsilon_eavesdropper,
            };
            checked += 1;
            failed += usize::from(!o.within(eps, 3.0));
            worst = worst.max(o.rate);
        }
    }
    let elapsed = start.elapsed();
    let pass = checked > 0 && failed == 0 && elapsed < Duration::from_secs(300);
    verdict(
        pass,
        format!(
            "{checked} constraints, {failed} above ε + 3 SE, worst empirical rate {worst:.4}, {:.0} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn random_psd(n: usize, rank: usize, scale: f64, rng: &mut ChaCha8Rng) -> CMat {
    let mut m = linalg::zeros(n);
    for _ in 0..rank {
        let v = CVec::from_fn(n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        m += linalg::outer(&v);
    }
    let t = linalg::real_trace(&m);
    m.scale(scale / t)
}

fn random_state(rng: &mut ChaCha8Rng) -> VehicleState {
    VehicleState::new(
        rng.random_range(-1.2..1.2),
        rng.random_range(5.0..60.0),
        rng.random_range(-20.0..20.0),
        Complex64::from_polar(rng.random_range(0.3..2.0), rng.random_range(-3.0..3.0)),
    )
}

fn random_spd4(rng: &mut ChaCha8Rng) -> Matrix4<f64> {
    let a = Matrix4::from_fn(|_, _| rng.random::<f64>() - 0.5);
    a * a.transpose() + Matrix4::identity() * 0.5
}

fn symmetric_condition(j: &Matrix3<f64>) -> f64 {
    let ev = j.symmetric_eigen().eigenvalues;
    let (lo, hi) = (ev.min(), ev.max());
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

fn pcrb_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut instances, mut worst, mut monotone_failures) = (0usize, 0.0f64, 0usize);
    while instances < 1000 {
        let n = rng.random_range(2..=12);
        let geom = ArrayGeometry::half_wavelength(n);
        let state = random_state(&mut rng);
        let rx = random_psd(n, rng.random_range(1..=n), rng.random_range(0.1..2.0), &mut rng);
        let m_pred = random_spd4(&mut rng);
        let obs = fim_observation(&state, &rx, &geom, 16, 1.0).expect("fim");
        let j = fim_posterior(&obs, &m_pred).expect("posterior");
        if symmetric_condition(&j) > 1e6 {
            continue;
        }
        instances += 1;
        let closed = pcrb_theta(&j).expect("bound");
        let numeric = j.try_inverse().expect("invertible")[(0, 0)];
        worst = worst.max(rel(closed, numeric, 1e-300));
        let single = pcrb_report(&state, &m_pred, &rx, &geom, 16, 1.0).expect("report").pcrb_theta;
        let double = pcrb_report(&state, &m_pred, &rx.scale(2.0), &geom, 16, 1.0).expect("report").pcrb_theta;
        monotone_failures += usize::from(double > single * (1.0 + 1e-12));
    }
    let elapsed = start.elapsed();
    let pass = worst < 1e-10 && monotone_failures == 0 && elapsed < Duration::from_secs(60);
    verdict(
        pass,
        format!(
            "{instances} instances, worst relative error {worst:.1e}, {monotone_failures} with PCRB(2R) > PCRB(R), {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

/// Observation blocks evaluated entry by entry from the defining traces.
fn brute_force_fim(state: &VehicleState, rx: &CMat, n: usize, t: usize, sigma_r2: f64) -> [f64; 4] {
    let k = std::f64::consts::PI;
    let (s, co) = state.theta.sin_cos();
    let a: Vec<Complex64> = (0..n).map(|i| Complex64::from_polar(1.0, k * i as f64 * s)).collect();
    let da: Vec<Complex64> = (0..n).map(|i| c(0.0, k * i as f64 * co) * a[i]).collect();
    let b = |i: usize, j: usize| a[i] * a[j].conj();
    let db = |i: usize, j: usize| da[i] * a[j].conj() + a[i] * da[j].conj();
    // Tr(X R Yᴴ) = Σ_{i,j,l} X_ij R_jl conj(Y_il)
    let tr = |x: &dyn Fn(usize, usize) -> Complex64, y: &dyn Fn(usize, usize) -> Complex64| {
        let mut acc = c(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    acc += x(i, j) * rx[(j, l)] * y(i, l).conj();
                }
            }
        }
        acc
    };
    let scale = 2.0 * t as f64 / sigma_r2;
    let beta = state.beta;
    let tt = scale * beta.norm_sqr() * tr(&db, &db).re;
    let cross = beta.conj() * tr(&b, &db) * scale;
    let bb = scale * tr(&b, &b).re;
    [tt, cross.re, (cross * c(0.0, 1.0)).re, bb]
}

fn fim_jacobian_oracles() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut fim_err, mut steer_err, mut jac_err) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..200 {
        let n = rng.random_range(2..=10);
        let geom = ArrayGeometry::half_wavelength(n);
        let state = random_state(&mut rng);
        let rx = random_psd(n, rng.random_range(1..=n), 1.0, &mut rng);
        let got = fim_observation(&state, &rx, &geom, 32, 0.5).expect("fim");
        let want = brute_force_fim(&state, &rx, n, 32, 0.5);
        let floor = 1e-12 * (want[0].abs() + want[3].abs());
        let got = [got.j_tt, got.j_tb[0], got.j_tb[1], got.j_bb[(0, 0)]];
        for (g, w) in got.iter().zip(&want) {
            fim_err = fim_err.max(rel(*g, *w, floor));
        }

        let h = 1e-6;
        let fd = (steering_vector(state.theta + h, &geom) - steering_vector(state.theta - h, &geom)) / c(2.0 * h, 0.0);
        let exact = steering_derivative(state.theta, &geom);
        steer_err = steer_err.max((&fd - &exact).norm() / exact.norm().max(1e-300));

        let clock = SlotClock::new(rng.random_range(0.005..0.05)).expect("clock");
        let g = jacobian_g1(&state, &clock);
        let x0 = state.to_vector();
        for col in 0..4 {
            let step = 1e-4 * x0[col].abs().max(1e-2);
            let eval = |delta: f64| {
                let mut x = x0;
                x[col] += delta;
                let s = state.with_vector(&x);
                evolve_state(&s, &clock, &ProcessDraw::ZERO).expect("step").to_vector()
            };
            // Five-point central stencil.
            let column = (eval(-2.0 * step) - eval(2.0 * step) + (eval(step) - eval(-step)) * 8.0) / (12.0 * step);
            for row in 0..4 {
                jac_err = jac_err.max(rel(column[row], g[(row, col)], 1e-6));
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = fim_err < 1e-9 && steer_err < 1e-5 && jac_err < 1e-5 && elapsed < Duration::from_secs(60);
    verdict(
        pass,
        format!(
            "FIM {fim_err:.1e}, steering derivative {steer_err:.1e}, state Jacobian {jac_err:.1e} (relative), {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn ao_behavior(run: &RunResult) -> Verdict {
    let (mut slots, mut over_cap, mut unconverged, mut decreases) = (0usize, 0usize, 0usize, 0usize);
    let mut worst_drop: f64 = 0.0;
    let mut last_increment: f64 = 0.0;
    for r in &run.records {
        if r.status == SlotStatus::Infeasible {
            continue;
        }
        slots += 1;
        over_cap += usize::from(r.ao_trace.len() > 100);
        let last = r.ao_trace.iter().rev().find(|it| it.feasible);
        let incr = last.and_then(|it| Some(it.w_increment?.max(it.r_increment?)));
        match incr {
            Some(v) if r.ao_converged && v <= 1e-3 => last_increment = last_increment.max(v),
            _ => unconverged += 1,
        }
        let objectives: Vec<f64> = r.ao_trace.iter().filter_map(|it| it.objective).collect();
        for w in objectives.windows(2) {
            let drop = w[0] - w[1];
            worst_drop = worst_drop.max(drop);
            decreases += usize::from(drop > 1e-6);
        }
    }
    let pass = slots > 0 && over_cap == 0 && unconverged == 0 && decreases == 0;
    verdict(
        pass,
        format!(
            "{slots} slots, {over_cap} over 100 iterations, {unconverged} not converged (largest final increment {last_increment:.1e}), {decreases} objective decreases (largest {worst_drop:.1e})"
        ),
    )
}

fn randomization_problem(s: &Scenario) -> SlotProblem {
    let est = |v: &iscsc::sim::VehicleSpec| {
        let st = v.prior.state;
        let h = steering_vector(st.theta, &s.geometry) * st.beta;
        ChannelEstimate::isotropic(h, s.config.channel.csi_error * st.beta.norm_sqr()).expect("estimate")
    };
    let k = s.num_intended();
    SlotProblem {
        geometry: s.geometry,
        intended: s.vehicles[..k].iter().map(est).collect(),
        eavesdroppers: s.vehicles[k..].iter().map(est).collect(),
        targets: s
            .vehicles
            .iter()
            .map(|v| SensingTarget {
                state: v.prior.state,
                prior_info: 1.0 / v.process.variances[0],
            })
            .collect(),
        params: s.slot,
    }
}

fn randomization() -> Verdict {
    let s = scenario("nominal.toml");
    let problem = randomization_problem(&s);
    let n = s.geometry.num_antennas;
    let targets = Targets {
        lambda: 1.0,
        varrho: 0.5,
        rho: vec![0.65; s.num_intended()],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut trace_err, mut power_gain, mut identity_err) = (0.0f64, f64::NEG_INFINITY, 0.0f64);
    for case in 0..100 {
        let rank = if case % 2 == 0 { 1 } else { rng.random_range(2..=n) };
        let w: Vec<CMat> = (0..s.num_intended())
            .map(|_| random_psd(n, rank, rng.random_range(0.01..0.08), &mut rng))
            .collect();
        let r = vec![random_psd(n, n, 0.01, &mut rng); s.vehicles.len()];
        let beams = BeamformerSet::new(w, r).expect("beams");
        let out = gaussian_randomization(&beams, &problem, &targets, &RandomizationParams::default(), case)
            .expect("randomization");
        for (a, b) in beams.w.iter().zip(&out.beams.w) {
            trace_err = trace_err.max((linalg::real_trace(a) - linalg::real_trace(b)).abs());
            if rank == 1 {
                identity_err = identity_err.max((a - b).norm() / a.norm());
            }
        }
        power_gain = power_gain.max(comm_sense_power(&out.beams) - comm_sense_power(&beams));
    }
    let pass = trace_err <= 1e-9 && power_gain <= 1e-12 && identity_err <= 1e-9;
    verdict(
        pass,
        format!(
            "100 cases, trace error {trace_err:.1e}, largest power change {power_gain:.1e}, rank-one reproduction error {identity_err:.1e}"
        ),
    )
}

fn secrecy_zero(run: &RunResult) -> Verdict {
    let unintended_distance = |r: &iscsc::sim::SlotRecord| {
        r.vehicles
            .iter()
            .filter(|v| v.role == Role::Unintended)
            .map(|v| v.truth.distance)
            .fold(f64::INFINITY, f64::min)
    };
    let closest = run
        .records
        .iter()
        .min_by(|a, b| unintended_distance(a).total_cmp(&unintended_distance(b)))
        .map(|r| r.slot)
        .unwrap_or(0);
    let zero_slots: Vec<usize> = run
        .records
        .iter()
        .filter(|r| r.slot.abs_diff(closest) <= 5)
        .filter(|r| r.vehicles.iter().any(|v| v.role == Role::Intended && v.true_link.ssr == Some(0.0)))
        .map(|r| r.slot)
        .collect();
    let min_rate = intended(run)
        .map(|(_, v)| v.true_link.semantic_rate.min(v.true_link.conventional_rate))
        .fold(f64::INFINITY, f64::min);
    let pass = !zero_slots.is_empty() && min_rate > 0.0;
    verdict(
        pass,
        format!("closest approach at slot {closest}, zero secrecy rate at slots {zero_slots:?}, smallest intended rate {min_rate:.3}"),
    )
}

fn main() {
    let nominal = scenario("nominal.toml");
    let start = Instant::now();
    let nominal_run = run_simulation(&nominal).expect("nominal run");
    let nominal_time = start.elapsed();
    let flyby_run = run_simulation(&scenario("flyby.toml")).expect("flyby run");

    let results = [
        ("semantic rate identity and gain", semantic_gain(&nominal_run, nominal_time)),
        ("tracking filter ordering", tracking_ordering()),
        ("outage certificate", outage_certificate(&nominal_run)),
        ("posterior CRB oracle", pcrb_oracle()),
        ("FIM and Jacobian oracles", fim_jacobian_oracles()),
        ("AO convergence and monotonicity", ao_behavior(&nominal_run)),
        ("randomization recovery", randomization()),
        ("secrecy rate zero event", secrecy_zero(&flyby_run)),
    ];
    let mut failures = 0;
    for (i, (name, v)) in results.iter().enumerate() {
        println!("criterion {} {name}: {} ({})", i + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failures += usize::from(!v.pass);
    }
    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
