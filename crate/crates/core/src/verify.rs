//! Quick self-checks run by the `verify` command.
//!
//! Each check compares two independent computations of the same quantity
//! on freshly drawn small scenarios and reports the worst discrepancy.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::bounds::case1_bound;
use crate::channel::{
    build_physical_matrices, gen_path_set, to_virtual, true_xi, BeamspaceBasis, LinkGeometry, PathConfig, PathSet,
    VirtualChannel,
};
use crate::codebook::{build_g, gen_codebook, Codebook, CodebookParams, Owner};
use crate::config::{JammerMode, Scenario, Tx};
use crate::error::Result;
use crate::nnls::{solve, NnlsOptions, NnlsProblem};
use crate::ofdm_oracle::{time_domain_rx, OfdmParams, OracleLink, PulseModel};
use crate::pipeline::{ba_antijam_from_powers, model_projected_powers, MeasurementModel};
use crate::projection::build_complement_basis;
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::signal::{
    synthesize_beacon, BeaconDims, BeaconDraws, JammerLink, JammerProfile, ProbingMode, ProbingPlan,
};

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub cases: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &'static str, cases: usize, worst: f64, tolerance: f64) -> Self {
        Self {
            name,
            cases,
            worst,
            tolerance,
            passed: worst <= tolerance,
        }
    }
}

/// Small system with integer-delay-friendly OFDM sizes.
pub fn small_scenario() -> Scenario {
    let mut s = Scenario::desk();
    let sys = &mut s.system;
    sys.bs_antennas = 8;
    sys.jammer_antennas = 8;
    sys.ue_antennas = 8;
    sys.subcarriers = 64;
    sys.cyclic_prefix = 8;
    sys.symbols_per_slot = 6;
    sys.subslot0_len = 3;
    s
}

/// Paths of one link with the delays rounded down to whole samples.
pub fn integer_delay_paths<R: Rng + ?Sized>(scenario: &Scenario, tx: Tx, rng: &mut R) -> Result<PathSet> {
    let mut ps = gen_path_set(&PathConfig::from_system(&scenario.system, tx)?, tx, rng);
    for p in &mut ps.paths {
        p.delay_frac = 0.0;
    }
    Ok(ps)
}

pub fn virtual_channel(scenario: &Scenario, paths: &PathSet, used: &[usize]) -> Result<VirtualChannel> {
    let sys = &scenario.system;
    let geom = LinkGeometry::from_system(sys, paths.tx);
    let basis = Arc::new(BeamspaceBasis::new(sys.ue_antennas, geom.tx_antennas));
    to_virtual(&build_physical_matrices(paths, &geom, used)?, used, basis)
}

fn codebooks(scenario: &Scenario, q: usize, seed: u64) -> Result<(Codebook, Codebook, Codebook)> {
    let sys = &scenario.system;
    let draw = |owner, stream, bs: Option<&Codebook>| {
        gen_codebook(
            owner,
            &CodebookParams::for_owner(sys, owner, q),
            &mut stream_rng(seed, stream),
            bs,
        )
    };
    let bs = draw(Owner::Bs, Stream::BsCodebook, None)?;
    let jam = draw(Owner::Jammer(JammerMode::Random), Stream::JammerCodebook, None)?;
    let ue = draw(Owner::Ue, Stream::UeCodebook, None)?;
    Ok((bs, jam, ue))
}

/// Frequency-domain synthesis against explicit time-domain transmission.
pub fn ofdm_equivalence(cases: usize, seed: u64) -> Result<Check> {
    let scenario = small_scenario();
    let sys = &scenario.system;
    let params = OfdmParams {
        fft_len: sys.subcarriers,
        cp_len: sys.cyclic_prefix,
        pulse: PulseModel::Impulse,
    };
    let mut worst: f64 = 0.0;
    for c in 0..cases {
        let s = derive_seed(seed, &[c as u64]);
        let q = 1 + c % 3;
        let dims = BeaconDims::from_system(sys, q);
        let plan = ProbingPlan::new(
            dims,
            sys.subcarrier_sets(),
            ProbingMode::Randomized,
            sys.gamma_b,
            &mut stream_rng(s, Stream::KnownSymbols),
        )?;
        let used: Vec<usize> = plan.subcarriers().concat();
        let pb = integer_delay_paths(&scenario, Tx::Bs, &mut stream_rng(s, Stream::BsChannel))?;
        let pj = integer_delay_paths(&scenario, Tx::Jammer, &mut stream_rng(s, Stream::JammerChannel))?;
        let (vb, vj) = (virtual_channel(&scenario, &pb, &used)?, virtual_channel(&scenario, &pj, &used)?);
        let (cb_b, cb_j, cb_u) = codebooks(&scenario, q, s)?;
        let draws = BeaconDraws::from_seed(&dims, s);
        let jam = JammerProfile::new(2.0, 0.5)?;
        let freq = synthesize_beacon(
            &vb,
            &cb_b,
            Some(JammerLink {
                channel: &vj,
                codebook: &cb_j,
            }),
            &cb_u,
            &plan,
            sys.bs_power,
            &jam,
            0.0,
            &draws,
        )?;
        let time = time_domain_rx(
            OracleLink {
                paths: &pb,
                codebook: &cb_b,
            },
            Some(OracleLink {
                paths: &pj,
                codebook: &cb_j,
            }),
            &cb_u,
            &plan,
            sys.bs_power,
            &jam,
            0.0,
            &draws,
            &params,
        )?;
        let scale = freq.samples.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let diff = freq
            .samples
            .iter()
            .zip(&time.samples)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        worst = worst.max(diff / scale);
    }
    Ok(Check::new("ofdm-equivalence", cases, worst, 1e-9))
}

/// Orthogonality and completeness of the complement basis.
pub fn projector_exactness(cases: usize, seed: u64) -> Result<Check> {
    let mut rng = stream_rng(seed, Stream::KnownSymbols);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let len = rng.random_range(2..=28);
        let t: Vec<Complex64> = (0..len)
            .map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)))
            .collect();
        let basis = build_complement_basis(&t)?;
        let u = DMatrix::from_fn(len, len - 1, |r, c| basis.entry(r, c));
        let tv = DVector::from_vec(t);
        let ortho = (u.adjoint() * &tv).camax();
        let ident = (u.adjoint() * &u - DMatrix::identity(len - 1, len - 1)).camax();
        let proj = &u * u.adjoint() - (DMatrix::identity(len, len) - &tv * tv.adjoint() / Complex64::from(len as f64));
        worst = worst.max(ortho).max(ident).max(proj.camax());
    }
    Ok(Check::new("projector-exactness", cases, worst, 1e-12))
}

/// KKT residual of the NNLS solver on random dense problems.
pub fn nnls_kkt(cases: usize, seed: u64) -> Result<Check> {
    let mut rng = stream_rng(seed, Stream::Noise);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let n = rng.random_range(1..=12);
        let m = rng.random_range(n..=2 * n + 2);
        let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        let sol = solve(&NnlsProblem::new(a, b)?)?;
        let ratio = if sol.converged { sol.kkt_violation / sol.tolerance } else { f64::INFINITY };
        worst = worst.max(ratio);
    }
    Ok(Check::new("nnls-kkt", cases, worst, 1.0))
}

/// Exact population powers through the anti-jam estimator.
pub fn cancellation_identity(cases: usize, seed: u64) -> Result<Check> {
    let scenario = small_scenario();
    let sys = &scenario.system;
    let used: Vec<usize> = sys.subcarrier_sets().concat();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for c in 0..cases {
        let s = derive_seed(seed, &[c as u64]);
        let q = 8 + c % 8;
        let (cb_b, cb_j, cb_u) = codebooks(&scenario, q, s)?;
        let model = MeasurementModel::new(build_g(&cb_b, &cb_u)?);
        if !model.identifiable() {
            continue;
        }
        checked += 1;
        let pb = gen_path_set(&PathConfig::from_system(sys, Tx::Bs)?, Tx::Bs, &mut stream_rng(s, Stream::BsChannel));
        let pj = gen_path_set(
            &PathConfig::from_system(sys, Tx::Jammer)?,
            Tx::Jammer,
            &mut stream_rng(s, Stream::JammerChannel),
        );
        let xi_b = true_xi(&virtual_channel(&scenario, &pb, &used)?, Tx::Bs, sys.bs_power)?;
        let xi_j = true_xi(&virtual_channel(&scenario, &pj, &used)?, Tx::Jammer, 10.0)?;
        let g_j = build_g(&cb_j, &cb_u)?;
        let (p0, p1) = model_projected_powers(model.matrix(), &xi_b, sys.gamma_b, Some((&g_j, &xi_j, 0.7)), 0.1)?;
        let out = ba_antijam_from_powers(&p0, &p1, sys.gamma_b, &model, &NnlsOptions::default())?;
        let target = xi_b.rescaled(sys.gamma_b);
        let err = out
            .estimate
            .iter()
            .zip(&target.values)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(err);
    }
    Ok(Check::new("cancellation-identity", checked, worst, 1e-8))
}

/// Violations of the omnidirectional/random jammer power bound.
pub fn jammer_bound(cases: usize, seed: u64) -> Result<Check> {
    let scenario = small_scenario();
    let sys = &scenario.system;
    let used: Vec<usize> = sys.subcarrier_sets().concat();
    let mut violations = 0;
    for c in 0..cases {
        let s = derive_seed(seed, &[c as u64]);
        let (_, cb_j, cb_u) = codebooks(&scenario, 1 + c % 6, s)?;
        let pj = gen_path_set(
            &PathConfig::from_system(sys, Tx::Jammer)?,
            Tx::Jammer,
            &mut stream_rng(s, Stream::JammerChannel),
        );
        let xi_j = true_xi(&virtual_channel(&scenario, &pj, &used)?, Tx::Jammer, 3.0)?;
        let (actual, bound) = case1_bound(&build_g(&cb_j, &cb_u)?, &xi_j)?;
        if actual > bound {
            violations += 1;
        }
    }
    Ok(Check::new("jammer-bound", cases, violations as f64, 0.0))
}

/// Every check with `cases` instances each.
pub fn all(cases: usize, seed: u64) -> Result<Vec<Check>> {
    Ok(vec![
        ofdm_equivalence(cases, seed)?,
        projector_exactness(cases, seed)?,
        nnls_kkt(cases, seed)?,
        cancellation_identity(cases, seed)?,
        jammer_bound(cases, seed)?,
    ])
}
