//! Acceptance gate. Runs every criterion, prints one line each and exits
//! non-zero when any of them fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use beamalign::bounds::case1_bound;
use beamalign::channel::{gen_path_set, true_xi, PathConfig};
use beamalign::codebook::{build_g, gen_codebook, CodebookParams, Owner};
use beamalign::config::{Estimator, JammerMode, Scenario, Tx};
use beamalign::harness::{self, CurvePoint, Realization};
use beamalign::nnls::{solve, NnlsProblem};
use beamalign::ofdm_oracle::{time_domain_rx, OfdmParams, OracleLink, PulseModel};
use beamalign::pipeline::{ba_antijam, ba_antijam_from_powers, estimate_jam_noise_power, model_projected_powers};
use beamalign::projection::{build_complement_basis, project_beacon};
use beamalign::rng::{derive_seed, stream_rng, Stream};
use beamalign::signal::{
    synthesize_beacon, synthesize_from_gains, BeaconDims, BeaconDraws, JammerLink, JammerProfile, ProbingMode,
    ProbingPlan,
};
use beamalign::verify::{integer_delay_paths, virtual_channel};
use beamalign::nnls::NnlsOptions;

use common::{exhaustive_nnls, small_scenario};

struct Verdict {
    passed: bool,
    detail: String,
}

impl Verdict {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

type Criterion = (u32, &'static str, fn() -> beamalign::Result<Verdict>);

fn codebook(s: &Scenario, owner: Owner, q: usize, seed: u64, stream: Stream, bs: Option<&beamalign::codebook::Codebook>) -> beamalign::codebook::Codebook {
    gen_codebook(owner, &CodebookParams::for_owner(&s.system, owner, q), &mut stream_rng(seed, stream), bs).unwrap()
}

fn ofdm_equivalence() -> beamalign::Result<Verdict> {
    let start = Instant::now();
    let s = small_scenario();
    let sys = &s.system;
    assert_eq!((sys.subcarriers, sys.cyclic_prefix), (64, 8));
    let params = OfdmParams {
        fft_len: 64,
        cp_len: 8,
        pulse: PulseModel::Impulse,
    };
    let mut worst: f64 = 0.0;
    for case in 0..100u64 {
        let seed = derive_seed(0xACC1, &[case]);
        let q = 1 + (case % 3) as usize;
        let dims = BeaconDims::from_system(sys, q);
        let mode = if case % 2 == 0 { ProbingMode::Randomized } else { ProbingMode::Conventional };
        let plan = ProbingPlan::new(dims, sys.subcarrier_sets(), mode, sys.gamma_b, &mut stream_rng(seed, Stream::KnownSymbols))?;
        let used: Vec<usize> = plan.subcarriers().concat();
        let pb = integer_delay_paths(&s, Tx::Bs, &mut stream_rng(seed, Stream::BsChannel))?;
        let pj = integer_delay_paths(&s, Tx::Jammer, &mut stream_rng(seed, Stream::JammerChannel))?;
        let (vb, vj) = (virtual_channel(&s, &pb, &used)?, virtual_channel(&s, &pj, &used)?);
        let cb_b = codebook(&s, Owner::Bs, q, seed, Stream::BsCodebook, None);
        let jam_mode = JammerMode::ALL[(case % 3) as usize];
        let cb_j = codebook(&s, Owner::Jammer(jam_mode), q, seed, Stream::JammerCodebook, Some(&cb_b));
        let cb_u = codebook(&s, Owner::Ue, q, seed, Stream::UeCodebook, None);
        let draws = BeaconDraws::from_seed(&dims, seed);
        let jam = JammerProfile::new(3.0, (case % 5) as f64 / 4.0)?;
        let freq = synthesize_beacon(
            &vb,
            &cb_b,
            Some(JammerLink { channel: &vj, codebook: &cb_j }),
            &cb_u,
            &plan,
            sys.bs_power,
            &jam,
            0.0,
            &draws,
        )?;
        let time = time_domain_rx(
            OracleLink { paths: &pb, codebook: &cb_b },
            Some(OracleLink { paths: &pj, codebook: &cb_j }),
            &cb_u,
            &plan,
            sys.bs_power,
            &jam,
            0.0,
            &draws,
            &params,
        )?;
        let scale = freq.samples.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let diff = freq.samples.iter().zip(&time.samples).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        worst = worst.max(diff / scale);
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(Verdict::new(
        worst <= 1e-9 && secs < 10.0,
        format!("100 scenarios, max relative error {worst:.2e} (tol 1e-9), {secs:.2} s (limit 10 s)"),
    ))
}

fn projector_exactness() -> beamalign::Result<Verdict> {
    let mut rng = stream_rng(0xACC2, Stream::KnownSymbols);
    let (mut e_orth, mut e_id, mut e_proj): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..1000 {
        let len = rng.random_range(2..=28);
        let t: Vec<Complex64> = (0..len)
            .map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)))
            .collect();
        let basis = build_complement_basis(&t)?;
        let u = DMatrix::from_fn(len, len - 1, |r, c| basis.entry(r, c));
        let tv = DVector::from_vec(t);
        e_orth = e_orth.max((u.adjoint() * &tv).camax());
        e_id = e_id.max((u.adjoint() * &u - DMatrix::identity(len - 1, len - 1)).camax());
        let target = DMatrix::identity(len, len) - &tv * tv.adjoint() / Complex64::from(len as f64);
        e_proj = e_proj.max((&u * u.adjoint() - target).camax());
    }
    Ok(Verdict::new(
        e_orth <= 1e-12 && e_id <= 1e-12 && e_proj <= 1e-12,
        format!("1000 vectors, |U^H t| {e_orth:.1e}, |U^H U - I| {e_id:.1e}, |U U^H - P| {e_proj:.1e} (tol 1e-12)"),
    ))
}

fn known_symbol_cancellation() -> beamalign::Result<Verdict> {
    let mut s = Scenario::desk();
    s.sweep.gamma_j = vec![0.0];
    let opts = NnlsOptions::default();
    let (mut compared, mut mismatched) = (0, 0);
    let mut drift: f64 = 0.0;
    for run in 0..30 {
        let q = [20, 60][run % 2];
        let real = Realization::generate(&s, q, harness::run_seed(s.seed, q, run))?;
        let quiet = ba_antijam(&real.beacon(&s, ProbingMode::Randomized, None)?, &real.bs_model, &real.randomized, &opts)?;
        let truth = real.bs_xi.rescaled(s.system.gamma_b);
        let ok_quiet = beamalign::pipeline::score(&quiet, &truth)?;
        for mode in JammerMode::ALL {
            for excess_db in [-10.0, 0.0, 10.0, 20.0, 30.0] {
                let p_j = s.system.bs_power * 10f64.powf(excess_db / 10.0);
                let rx = real.beacon(&s, ProbingMode::Randomized, Some((mode, JammerProfile::new(p_j, 0.0)?)))?;
                let loud = ba_antijam(&rx, &real.bs_model, &real.randomized, &opts)?;
                let ok_loud = beamalign::pipeline::score(&loud, &truth)?;
                compared += 1;
                if loud.selected != quiet.selected || ok_loud != ok_quiet {
                    mismatched += 1;
                }
                let scale = quiet.estimate.iter().cloned().fold(0.0, f64::max);
                for (a, b) in loud.estimate.iter().zip(&quiet.estimate) {
                    drift = drift.max((a - b).abs() / scale);
                }
            }
        }
    }
    Ok(Verdict::new(
        mismatched == 0,
        format!(
            "{compared} jammed runs vs jammer-free twins: {mismatched} outcome mismatches, max estimate drift {drift:.1e} relative"
        ),
    ))
}

fn jam_noise_estimator() -> beamalign::Result<Verdict> {
    let s = Scenario::desk();
    let sys = &s.system;
    let real = Realization::generate(&s, 1, 0xACC4)?;
    let dims = real.dims;
    let p_j = sys.jammer_power(-5.0);
    let noise = sys.noise_var();
    let jam_gains = &real.jammer_gains[0];
    let probes = [(0, 0, 0), (0, 1, 1), (0, 2, 0)];
    let runs = 10_000;
    let mut worst_z: f64 = 0.0;
    for gamma_j in [0.0, 0.5, 1.0] {
        let profile = JammerProfile::new(p_j, gamma_j)?;
        let mut sums = vec![(0.0, 0.0); probes.len()];
        for r in 0..runs {
            let draws = BeaconDraws::from_seed(&dims, derive_seed(0xACC4, &[r as u64, (gamma_j * 4.0) as u64]));
            let rx = synthesize_from_gains(&real.bs_gains, jam_gains, &real.randomized, sys.bs_power, &profile, noise, &draws)?;
            let p0 = estimate_jam_noise_power(&project_beacon(&rx, &real.randomized)?)?;
            for (k, &(slot, i, j)) in probes.iter().enumerate() {
                let v = p0.0[dims.measurement(slot, i, j)];
                sums[k].0 += v;
                sums[k].1 += v * v;
            }
        }
        for (k, &(slot, i, j)) in probes.iter().enumerate() {
            let n = runs as f64;
            let mean = sums[k].0 / n;
            let var = (sums[k].1 / n - mean * mean) * n / (n - 1.0);
            let analytic = gamma_j * p_j * jam_gains.mean_power(slot, i, j) + noise;
            worst_z = worst_z.max((mean - analytic).abs() / (var / n).sqrt());
        }
    }
    Ok(Verdict::new(
        worst_z <= 3.0,
        format!("10^4 runs per gamma_J in {{0, 0.5, 1}}, 3 measurements each, worst deviation {worst_z:.2} standard errors (limit 3)"),
    ))
}

fn nnls_correctness() -> beamalign::Result<Verdict> {
    let mut rng = stream_rng(0xACC5, Stream::Noise);
    let (mut worst_obj, mut kkt_fail, mut converged): (f64, usize, usize) = (0.0, 0, 0);
    for inst in 0..500 {
        let n = 1 + inst % 12;
        let m = rng.random_range(n..=2 * n + 3);
        let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let b = if inst % 2 == 0 {
            DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0))
        } else {
            let x = DVector::from_fn(n, |_, _| if rng.random_bool(0.4) { rng.random_range(0.0..2.0) } else { 0.0 });
            &a * x + DVector::from_fn(m, |_, _| 0.01 * rng.random_range(-1.0..1.0))
        };
        let sol = solve(&NnlsProblem::new(a.clone(), b.clone())?)?;
        let x = DVector::from_column_slice(&sol.x);
        let obj = (&a * &x - &b).norm_squared();
        let (best, _) = exhaustive_nnls(&a, &b);
        worst_obj = worst_obj.max((obj - best).abs() / best.max(1.0));
        if sol.converged {
            converged += 1;
            let w = a.transpose() * (&b - &a * &x);
            let ok = x.iter().all(|&v| v >= 0.0)
                && x.iter().zip(w.iter()).all(|(&xj, &wj)| if xj > 0.0 { wj.abs() <= sol.tolerance } else { wj <= sol.tolerance });
            kkt_fail += usize::from(!ok);
        }
    }
    Ok(Verdict::new(
        worst_obj <= 1e-8 && kkt_fail == 0,
        format!("500 instances, worst objective gap {worst_obj:.1e} (tol 1e-8), {converged} converged, {kkt_fail} KKT violations"),
    ))
}

fn cancellation_identity() -> beamalign::Result<Verdict> {
    let opts = NnlsOptions::default();
    let mut worst: f64 = 0.0;
    let mut per_mode = [0usize; 3];
    for (s, cases, qs) in [(small_scenario(), 60, [8usize, 12, 16]), (Scenario::desk(), 4, [50, 60, 80])] {
        let sys = &s.system;
        for case in 0..cases {
            let seed = derive_seed(0xACC6, &[case as u64, sys.bs_antennas as u64]);
            let q = qs[case % 3];
            let real = Realization::generate(&s, q, seed)?;
            if !real.bs_model.identifiable() {
                continue;
            }
            let xi_j = true_xi(&real.jammer_channel, Tx::Jammer, sys.jammer_power(-5.0))?;
            for (k, mode) in JammerMode::ALL.into_iter().enumerate() {
                let g_j = real.jammer_matrix(mode)?;
                let gamma_j = [0.0, 0.5, 1.0][case % 3];
                let (p0, p1) = model_projected_powers(real.bs_model.matrix(), &real.bs_xi, sys.gamma_b, Some((&g_j, &xi_j, gamma_j)), sys.noise_var())?;
                let out = ba_antijam_from_powers(&p0, &p1, sys.gamma_b, &real.bs_model, &opts)?;
                let target = real.bs_xi.rescaled(sys.gamma_b);
                let err = out.estimate.iter().zip(&target.values).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                worst = worst.max(err);
                per_mode[k] += 1;
            }
        }
    }
    Ok(Verdict::new(
        worst <= 1e-8 && per_mode.iter().all(|&c| c > 0),
        format!("identifiable instances per mode {per_mode:?}, worst l2 error {worst:.1e} (tol 1e-8)"),
    ))
}

fn case1_bound_holds() -> beamalign::Result<Verdict> {
    let s = Scenario::desk();
    let sys = &s.system;
    let used: Vec<usize> = sys.subcarrier_sets().concat();
    let mut violations = 0;
    let mut tightest: f64 = 0.0;
    for case in 0..1000u64 {
        let seed = derive_seed(0xACC7, &[case]);
        let q = 1 + (case % 20) as usize;
        let mode = [JammerMode::Random, JammerMode::Omnidirectional][(case % 2) as usize];
        let cb_j = codebook(&s, Owner::Jammer(mode), q, seed, Stream::JammerCodebook, None);
        let cb_u = codebook(&s, Owner::Ue, q, seed, Stream::UeCodebook, None);
        let paths = gen_path_set(&PathConfig::from_system(sys, Tx::Jammer)?, Tx::Jammer, &mut stream_rng(seed, Stream::JammerChannel));
        let vc = virtual_channel(&s, &paths, &used)?;
        let xi = true_xi(&vc, Tx::Jammer, sys.jammer_power([-5.0, 0.0, 5.0][(case % 3) as usize]))?;
        let (actual, bound) = case1_bound(&build_g(&cb_j, &cb_u)?, &xi)?;
        violations += usize::from(actual > bound);
        tightest = tightest.max(actual / bound);
    }
    Ok(Verdict::new(
        violations == 0,
        format!("1000 instances, {violations} violations, largest actual/bound ratio {tightest:.3}"),
    ))
}

fn find<'a>(pts: &'a [CurvePoint], est: Estimator, mode: JammerMode, sjr: f64, gamma_j: f64, q: usize) -> &'a CurvePoint {
    pts.iter()
        .find(|p| p.estimator == est && p.jammer_mode == mode && p.sjr_db == sjr && p.gamma_j == gamma_j && p.q == q)
        .expect("grid point present")
}

fn half_width(p: &CurvePoint) -> f64 {
    (p.ci_hi - p.ci_lo) / 2.0
}

fn qualitative_reproduction() -> beamalign::Result<Verdict> {
    let start = Instant::now();
    let s = Scenario::desk();
    assert_eq!((s.system.bs_antennas, s.system.subcarriers, s.runs), (16, 256, 200));
    assert_eq!(s.system.snr_db, 10.0);
    let pts = harness::sweep(&s)?;
    let secs = start.elapsed().as_secs_f64();
    let g = &s.sweep;
    let q_max = *g.q.iter().max().unwrap();

    let (mut a_total, mut a_fail, mut a_worst) = (0, 0, 0.0f64);
    let (mut b_total, mut b_fail, mut b_worst) = (0, 0, f64::INFINITY);
    let (mut c_total, mut c_fail) = (0, 0);
    for &sjr in &g.sjr_db {
        for &gj in &g.gamma_j {
            for &q in &g.q {
                let reference = find(&pts, Estimator::Reference, JammerMode::Random, sjr, gj, q);
                for &mode in &g.jammer_modes {
                    let anti = find(&pts, Estimator::Antijam, mode, sjr, gj, q);
                    let gap = (anti.p_ba - reference.p_ba).abs();
                    let slack = 0.05 + half_width(anti) + half_width(reference);
                    a_total += 1;
                    a_fail += usize::from(gap > slack);
                    a_worst = a_worst.max(gap - slack);
                }
                let omni = find(&pts, Estimator::Unaware, JammerMode::Omnidirectional, sjr, gj, q);
                let random = find(&pts, Estimator::Unaware, JammerMode::Random, sjr, gj, q);
                c_total += 1;
                c_fail += usize::from(omni.ci_hi < random.ci_lo);
            }
            if sjr <= 0.0 {
                let anti = find(&pts, Estimator::Antijam, JammerMode::CopyBs, sjr, gj, q_max);
                let unaware = find(&pts, Estimator::Unaware, JammerMode::CopyBs, sjr, gj, q_max);
                let margin = anti.p_ba - unaware.p_ba;
                b_total += 1;
                b_fail += usize::from(margin < 0.3);
                b_worst = b_worst.min(margin);
            }
        }
    }
    for p in &pts {
        println!(
            "    {:<9} {:<15} sjr={:>4} gamma_j={:.1} q={:>3} p_ba={:.3} [{:.3}, {:.3}]",
            p.estimator.name(),
            p.jammer_mode.name(),
            p.sjr_db,
            p.gamma_j,
            p.q,
            p.p_ba,
            p.ci_lo,
            p.ci_hi
        );
    }
    let passed = a_fail == 0 && b_fail == 0 && c_fail == 0 && secs <= 900.0;
    Ok(Verdict::new(
        passed,
        format!(
            "(a) anti-jam vs reference {}/{a_total} points within 0.05+CI, worst excess {a_worst:.3}; \
             (b) copy-bs margin at q={q_max} {}/{b_total} >= 0.3, smallest {b_worst:.3}; \
             (c) omni >= random {}/{c_total} within CI; {secs:.0} s (limit 900 s)",
            a_total - a_fail,
            b_total - b_fail,
            c_total - c_fail
        ),
    ))
}

fn determinism() -> beamalign::Result<Verdict> {
    let mut s = Scenario::desk();
    s.runs = 16;
    s.sweep.q = vec![10, 40];
    s.sweep.gamma_j = vec![0.5];
    let csv = |threads| -> beamalign::Result<Vec<u8>> {
        let mut buf = Vec::new();
        harness::write_csv(&harness::sweep_with_threads(&s, threads)?, &mut buf)?;
        Ok(buf)
    };
    let first = csv(Some(1))?;
    let second = csv(Some(1))?;
    let wide = csv(Some(4))?;
    let default = csv(None)?;
    let same = first == second && first == wide && first == default;
    Ok(Verdict::new(
        same,
        format!("{} CSV bytes, repeated and 1/4/default workers identical: {same}", first.len()),
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (1, "OFDM model equivalence", ofdm_equivalence),
        (2, "projector exactness", projector_exactness),
        (3, "known-symbol jammer cancellation", known_symbol_cancellation),
        (4, "jammer-plus-noise power estimator", jam_noise_estimator),
        (5, "NNLS correctness", nnls_correctness),
        (6, "algebraic cancellation identity", cancellation_identity),
        (7, "jammer power bound", case1_bound_holds),
        (8, "qualitative curve reproduction", qualitative_reproduction),
        (9, "determinism", determinism),
    ];
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (id, name, check) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let verdict = check().unwrap_or_else(|e| Verdict::new(false, format!("error: {e}")));
        println!(
            "criterion {id} [{}] {name}: {} ({:.1} s)",
            if verdict.passed { "PASS" } else { "FAIL" },
            verdict.detail,
            start.elapsed().as_secs_f64()
        );
        failed += usize::from(!verdict.passed);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
