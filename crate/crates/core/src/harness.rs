//! Monte Carlo execution of beam-alignment experiments.
//!
//! Every run draws its channels, codebooks, symbols and noise from a seed
//! derived from the master seed, the number of beacon slots and the run
//! index. All estimators and jammer settings of a run share those draws, so
//! curves at equal `q` differ only through the quantity being varied.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{
    best_k_term, case1_bound, case2_condition, half_space_check, nullspace_probe, recon_error, BoundReport,
};
use crate::channel::{ensemble_xi, true_xi, BeamspaceBasis, LinkGeometry, PathConfig, PathSet, VirtualChannel, XiVector};
use crate::codebook::{build_g, gen_codebook, Codebook, CodebookParams, MeasurementMatrix, Owner};
use crate::config::{Estimator, JammerMode, Scenario, Tx};
use crate::error::{Error, Result};
use crate::nnls::NnlsOptions;
use crate::pipeline::{ba_antijam, ba_unaware, score, BaOutcome, MeasurementModel};
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::signal::{
    synthesize_from_gains, BeaconDims, BeaconDraws, BeaconRx, JammerProfile, LinkGains, ProbingMode, ProbingPlan,
};

/// One jammer configuration at a given number of beacon slots.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub q: usize,
    pub sjr_db: f64,
    pub jammer_mode: JammerMode,
    pub gamma_j: f64,
}

impl Cell {
    fn label(&self, est: Estimator) -> String {
        format!(
            "{} q={} sjr={} mode={} gamma_j={}",
            est.name(),
            self.q,
            self.sjr_db,
            self.jammer_mode.name(),
            self.gamma_j
        )
    }
}

/// Aggregated success probability of one estimator in one cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub estimator: Estimator,
    pub jammer_mode: JammerMode,
    pub sjr_db: f64,
    pub gamma_j: f64,
    pub gamma_b: f64,
    pub q: usize,
    pub runs: usize,
    pub p_ba: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub mean_recon_error: f64,
    #[serde(skip)]
    pub unconverged: usize,
}

/// 95% Wilson score interval for `successes` out of `n`.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    // Pin the degenerate ends so rounding cannot leave a 1e-17 sliver.
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Per-run seed.
pub fn run_seed(master: u64, q: usize, run: usize) -> u64 {
    derive_seed(master, &[q as u64, run as u64])
}

/// Everything drawn for one Monte Carlo run.
pub struct Realization {
    pub seed: u64,
    pub q: usize,
    pub dims: BeaconDims,
    pub bs_paths: PathSet,
    pub jammer_paths: PathSet,
    pub bs_channel: VirtualChannel,
    pub jammer_channel: VirtualChannel,
    pub bs_codebook: Codebook,
    pub ue_codebook: Codebook,
    pub jammer_random: Codebook,
    pub jammer_omni: Codebook,
    pub jammer_copy: Codebook,
    pub conventional: ProbingPlan,
    pub randomized: ProbingPlan,
    pub draws: BeaconDraws,
    pub bs_model: MeasurementModel,
    pub bs_gains: LinkGains,
    /// Jammer link gains per mode, in [`JammerMode::ALL`] order.
    pub jammer_gains: Vec<LinkGains>,
    pub bs_xi: XiVector,
}

fn mode_index(mode: JammerMode) -> usize {
    JammerMode::ALL.iter().position(|&m| m == mode).unwrap_or(0)
}

impl Realization {
    pub fn generate(scenario: &Scenario, q: usize, seed: u64) -> Result<Self> {
        let sys = &scenario.system;
        let dims = BeaconDims::from_system(sys, q);
        let sets = sys.subcarrier_sets();
        let used: Vec<usize> = sets.concat();

        let bs_geom = LinkGeometry::from_system(sys, Tx::Bs);
        let jam_geom = LinkGeometry::from_system(sys, Tx::Jammer);
        let bs_basis = Arc::new(BeamspaceBasis::new(sys.ue_antennas, sys.bs_antennas));
        let jam_basis = if sys.jammer_antennas == sys.bs_antennas {
            bs_basis.clone()
        } else {
            Arc::new(BeamspaceBasis::new(sys.ue_antennas, sys.jammer_antennas))
        };
        let (bs_paths, bs_channel) = VirtualChannel::generate(
            &PathConfig::from_system(sys, Tx::Bs)?,
            &bs_geom,
            Tx::Bs,
            &used,
            bs_basis,
            &mut stream_rng(seed, Stream::BsChannel),
        )?;
        let (jammer_paths, jammer_channel) = VirtualChannel::generate(
            &PathConfig::from_system(sys, Tx::Jammer)?,
            &jam_geom,
            Tx::Jammer,
            &used,
            jam_basis,
            &mut stream_rng(seed, Stream::JammerChannel),
        )?;

        let bs_codebook = gen_codebook(
            Owner::Bs,
            &CodebookParams::for_owner(sys, Owner::Bs, q),
            &mut stream_rng(seed, Stream::BsCodebook),
            None,
        )?;
        let ue_codebook = gen_codebook(
            Owner::Ue,
            &CodebookParams::for_owner(sys, Owner::Ue, q),
            &mut stream_rng(seed, Stream::UeCodebook),
            None,
        )?;
        let jam_codebook = |mode: JammerMode| -> Result<Codebook> {
            let owner = Owner::Jammer(mode);
            gen_codebook(
                owner,
                &CodebookParams::for_owner(sys, owner, q),
                &mut stream_rng(seed, Stream::JammerCodebook),
                Some(&bs_codebook),
            )
        };
        let jammer_random = jam_codebook(JammerMode::Random)?;
        let jammer_omni = jam_codebook(JammerMode::Omnidirectional)?;
        let jammer_copy = if sys.jammer_antennas == sys.bs_antennas {
            jam_codebook(JammerMode::CopyBs)?
        } else {
            jammer_random.clone()
        };

        let conventional = ProbingPlan::new(
            dims,
            sets,
            ProbingMode::Conventional,
            sys.gamma_b,
            &mut stream_rng(seed, Stream::KnownSymbols),
        )?;
        let randomized = if dims.subslot0 >= 2 && dims.subslot1() >= 2 {
            conventional.with_mode(ProbingMode::Randomized, sys.gamma_b)?
        } else {
            conventional.clone()
        };
        let draws = BeaconDraws::from_seed(&dims, seed);

        let bs_model = MeasurementModel::new(build_g(&bs_codebook, &ue_codebook)?);
        let sc = conventional.subcarriers();
        let bs_gains = LinkGains::compute(&bs_channel, &bs_codebook, &ue_codebook, sc, &dims)?;
        let jammer_gains = [&jammer_random, &jammer_omni, &jammer_copy]
            .iter()
            .map(|cb| LinkGains::compute(&jammer_channel, cb, &ue_codebook, sc, &dims))
            .collect::<Result<Vec<_>>>()?;
        let bs_xi = true_xi(&bs_channel, Tx::Bs, sys.bs_power)?;
        Ok(Self {
            seed,
            q,
            dims,
            bs_paths,
            jammer_paths,
            bs_channel,
            jammer_channel,
            bs_codebook,
            ue_codebook,
            jammer_random,
            jammer_omni,
            jammer_copy,
            conventional,
            randomized,
            draws,
            bs_model,
            bs_gains,
            jammer_gains,
            bs_xi,
        })
    }

    pub fn jammer_codebook(&self, mode: JammerMode) -> &Codebook {
        match mode {
            JammerMode::Random => &self.jammer_random,
            JammerMode::Omnidirectional => &self.jammer_omni,
            JammerMode::CopyBs => &self.jammer_copy,
        }
    }

    pub fn jammer_matrix(&self, mode: JammerMode) -> Result<MeasurementMatrix> {
        build_g(self.jammer_codebook(mode), &self.ue_codebook)
    }

    /// Received beacon for a probing mode and jammer setting.
    pub fn beacon(
        &self,
        scenario: &Scenario,
        mode: ProbingMode,
        jammer: Option<(JammerMode, JammerProfile)>,
    ) -> Result<BeaconRx> {
        let plan = match mode {
            ProbingMode::Conventional => &self.conventional,
            ProbingMode::Randomized => &self.randomized,
        };
        let sys = &scenario.system;
        let zero;
        let (gains, profile) = match jammer {
            Some((m, p)) => (&self.jammer_gains[mode_index(m)], p),
            None => {
                zero = LinkGains::zero(&self.dims);
                (&zero, JammerProfile::OFF)
            }
        };
        synthesize_from_gains(
            &self.bs_gains,
            gains,
            plan,
            sys.bs_power,
            &profile,
            sys.noise_var(),
            &self.draws,
        )
    }

    /// Runs one estimator and scores it.
    pub fn evaluate(&self, scenario: &Scenario, est: Estimator, cell: &Cell) -> Result<RunResult> {
        let sys = &scenario.system;
        let opts = NnlsOptions::default();
        let profile = JammerProfile::new(sys.jammer_power(cell.sjr_db), cell.gamma_j)?;
        let (outcome, truth): (BaOutcome, XiVector) = match est {
            Estimator::Reference => {
                let rx = self.beacon(scenario, ProbingMode::Conventional, None)?;
                (ba_unaware(&rx, &self.bs_model, sys.noise_var(), &opts)?, self.bs_xi.clone())
            }
            Estimator::Unaware => {
                let rx = self.beacon(scenario, ProbingMode::Conventional, Some((cell.jammer_mode, profile)))?;
                (ba_unaware(&rx, &self.bs_model, sys.noise_var(), &opts)?, self.bs_xi.clone())
            }
            Estimator::Antijam => {
                let rx = self.beacon(scenario, ProbingMode::Randomized, Some((cell.jammer_mode, profile)))?;
                (
                    ba_antijam(&rx, &self.bs_model, &self.randomized, &opts)?,
                    self.bs_xi.rescaled(sys.gamma_b),
                )
            }
        };
        let s = score(&outcome, &truth)?;
        Ok(RunResult {
            success: s.success,
            recon_error: recon_error(&truth.values, &outcome.estimate)?,
            converged: outcome.converged,
        })
    }
}

/// Outcome of one estimator on one run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunResult {
    pub success: bool,
    pub recon_error: f64,
    pub converged: bool,
}

/// Jammer cells of a scenario at one `q`, in grid order.
pub fn cells(scenario: &Scenario, q: usize) -> Vec<Cell> {
    let g = &scenario.sweep;
    let mut out = Vec::new();
    for &sjr_db in &g.sjr_db {
        for &jammer_mode in &g.jammer_modes {
            for &gamma_j in &g.gamma_j {
                out.push(Cell {
                    q,
                    sjr_db,
                    jammer_mode,
                    gamma_j,
                });
            }
        }
    }
    out
}

fn aggregate(scenario: &Scenario, cell: &Cell, est: Estimator, results: &[RunResult]) -> CurvePoint {
    let n = results.len();
    let successes = results.iter().filter(|r| r.success).count();
    let (ci_lo, ci_hi) = wilson_interval(successes, n);
    let recon: f64 = results.iter().map(|r| r.recon_error).sum();
    CurvePoint {
        estimator: est,
        jammer_mode: cell.jammer_mode,
        sjr_db: cell.sjr_db,
        gamma_j: cell.gamma_j,
        gamma_b: scenario.system.gamma_b,
        q: cell.q,
        runs: n,
        p_ba: successes as f64 / n as f64,
        ci_lo,
        ci_hi,
        mean_recon_error: recon / n as f64,
        unconverged: results.iter().filter(|r| !r.converged).count(),
    }
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}"))),
    }
}

/// Results of every (cell, estimator) pair for all runs at one `q`;
/// indexed `[cell][estimator][run]`.
fn run_q(
    scenario: &Scenario,
    q: usize,
    cells: &[Cell],
    estimators: &[Estimator],
) -> Result<Vec<Vec<Vec<RunResult>>>> {
    let per_run: Vec<Result<Vec<Vec<RunResult>>>> = (0..scenario.runs)
        .into_par_iter()
        .map(|run| {
            let seed = run_seed(scenario.seed, q, run);
            let fail = |label: String, e: Error| Error::RunFailed {
                cell: label,
                run,
                seed,
                source: Box::new(e),
            };
            let real = Realization::generate(scenario, q, seed)
                .map_err(|e| fail(format!("q={q}"), e))?;
            let mut reference = None;
            cells
                .iter()
                .map(|cell| {
                    estimators
                        .iter()
                        .map(|&est| {
                            if est == Estimator::Reference {
                                if let Some(r) = reference {
                                    return Ok(r);
                                }
                            }
                            let r = real
                                .evaluate(scenario, est, cell)
                                .map_err(|e| fail(cell.label(est), e))?;
                            if est == Estimator::Reference {
                                reference = Some(r);
                            }
                            Ok(r)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let per_run = per_run.into_iter().collect::<Result<Vec<_>>>()?;
    Ok((0..cells.len())
        .map(|c| {
            (0..estimators.len())
                .map(|e| per_run.iter().map(|r| r[c][e]).collect())
                .collect()
        })
        .collect())
}

/// Monte Carlo estimate for one cell and estimator.
pub fn run_cell(scenario: &Scenario, cell: &Cell, est: Estimator) -> Result<CurvePoint> {
    scenario.validate()?;
    let res = run_q(scenario, cell.q, std::slice::from_ref(cell), &[est])?;
    Ok(aggregate(scenario, cell, est, &res[0][0]))
}

/// Full grid sweep, ordered by q, SJR, jammer mode, gamma_J, estimator.
pub fn sweep(scenario: &Scenario) -> Result<Vec<CurvePoint>> {
    sweep_with_threads(scenario, None)
}

/// [`sweep`] on a dedicated pool of `threads` workers.
pub fn sweep_with_threads(scenario: &Scenario, threads: Option<usize>) -> Result<Vec<CurvePoint>> {
    scenario.validate()?;
    with_pool(threads, || {
        let mut out = Vec::new();
        for &q in &scenario.sweep.q {
            let cs = cells(scenario, q);
            let res = run_q(scenario, q, &cs, &scenario.sweep.estimators)?;
            for (cell, per_est) in cs.iter().zip(res) {
                for (&est, results) in scenario.sweep.estimators.iter().zip(per_est) {
                    out.push(aggregate(scenario, cell, est, &results));
                }
            }
        }
        Ok(out)
    })?
}

pub fn write_csv<W: Write>(points: &[CurvePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(points: &[CurvePoint], mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, points)?;
    writeln!(out)?;
    Ok(())
}

/// Diagnostics of one run.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub run: usize,
    pub seed: u64,
    pub report: BoundReport,
}

/// Bound diagnostics for the first `runs` runs of a cell.
///
/// The reconstruction error is that of the jammer-unaware estimate.
pub fn bound_reports(scenario: &Scenario, cell: &Cell, runs: usize) -> Result<Vec<RunReport>> {
    scenario.validate()?;
    let sys = &scenario.system;
    let jam_power = sys.jammer_power(cell.sjr_db);
    let used: Vec<usize> = sys.subcarrier_sets().concat();
    let ensemble = ensemble_xi(
        &PathConfig::from_system(sys, Tx::Jammer)?,
        &LinkGeometry::from_system(sys, Tx::Jammer),
        Tx::Jammer,
        &used,
        jam_power,
        scenario.ensemble_draws,
        &mut stream_rng(derive_seed(scenario.seed, &[u64::MAX]), Stream::JammerChannel),
    )?;
    let kappa = scenario.nullspace_order();
    (0..runs)
        .into_par_iter()
        .map(|run| {
            let seed = run_seed(scenario.seed, cell.q, run);
            let real = Realization::generate(scenario, cell.q, seed)?;
            let profile = JammerProfile::new(jam_power, cell.gamma_j)?;
            let rx = real.beacon(scenario, ProbingMode::Conventional, Some((cell.jammer_mode, profile)))?;
            let est = ba_unaware(&rx, &real.bs_model, sys.noise_var(), &NnlsOptions::default())?;
            let g_j = real.jammer_matrix(cell.jammer_mode)?;
            let xi_j = true_xi(&real.jammer_channel, Tx::Jammer, jam_power)?;
            let (jam_norm, jam_bound) = case1_bound(&g_j, &xi_j)?;
            let (jam_norm_ensemble, jam_bound_ensemble) = case1_bound(&g_j, &ensemble)?;
            let best_k_terms = (0..=2 * sys.bs_paths)
                .map(|k| best_k_term(&real.bs_xi.values, k).map(|v| (k, v)))
                .collect::<Result<Vec<_>>>()?;
            let dominance = if real.bs_xi.len() == xi_j.len() && jam_power > 0.0 {
                case2_condition(&real.bs_xi.values, &xi_j.values, sys.bs_power, jam_power).ok()
            } else {
                None
            };
            let g_b = real.bs_model.matrix();
            let probe_k = kappa.min(g_b.ncols());
            let nullspace = nullspace_probe(
                &g_b.to_dense(),
                probe_k,
                scenario.nullspace_trials,
                &mut stream_rng(seed, Stream::Noise),
            )?;
            Ok(RunReport {
                run,
                seed,
                report: BoundReport {
                    recon_error: recon_error(&real.bs_xi.values, &est.estimate)?,
                    jam_norm,
                    jam_bound,
                    jam_norm_ensemble,
                    jam_bound_ensemble,
                    best_k_terms,
                    dominance,
                    half_space: half_space_check(g_b),
                    nullspace,
                },
            })
        })
        .collect()
}
