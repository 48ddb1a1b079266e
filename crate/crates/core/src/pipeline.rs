//! Beam-alignment estimators and success scoring.

use nalgebra::{DMatrix, DVector};

use crate::channel::XiVector;
use crate::codebook::MeasurementMatrix;
use crate::error::{ensure_len, Error, Result};
use crate::nnls::{solve_normal, NnlsOptions, NormalEquations};
use crate::projection::{project_beacon, ProjectedRx};
use crate::signal::{collect_measurements, power_vector, stack_power_vector, BeaconRx, PowerVec, ProbingMode, ProbingPlan};

/// Measurement matrix with its Gram matrix, shared by every fit on it.
#[derive(Clone, Debug)]
pub struct MeasurementModel {
    matrix: MeasurementMatrix,
    gram: DMatrix<f64>,
}

impl MeasurementModel {
    pub fn new(matrix: MeasurementMatrix) -> Self {
        let gram = matrix.gram();
        Self { matrix, gram }
    }

    pub fn matrix(&self) -> &MeasurementMatrix {
        &self.matrix
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Full column rank test: smallest Gram eigenvalue above `1e-10`
    /// times the largest.
    pub fn identifiable(&self) -> bool {
        if self.matrix.nrows() < self.matrix.ncols() {
            return false;
        }
        let eig = self.gram.clone().symmetric_eigenvalues();
        let max = eig.max();
        max > 0.0 && eig.min() > 1e-10 * max
    }
}

/// Result of one beam-alignment estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct BaOutcome {
    pub estimate: Vec<f64>,
    /// Argmax of the estimate, lowest index on ties.
    pub selected: usize,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Estimated and true dominant beamspace index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Score {
    pub selected: usize,
    pub truth: usize,
    pub success: bool,
}

/// Non-negative fit of `target ~ G xi`.
pub fn fit(model: &MeasurementModel, target: &[f64], opts: &NnlsOptions) -> Result<BaOutcome> {
    let atb = model.matrix.tr_mul(target)?;
    let btb = target.iter().map(|v| v * v).sum();
    let ne = NormalEquations::new(model.gram.clone(), atb, btb)?;
    let sol = solve_normal(&ne, opts)?;
    Ok(BaOutcome {
        selected: crate::argmax(&sol.x),
        estimate: sol.x,
        residual_norm: sol.residual_norm,
        iterations: sol.iterations,
        converged: sol.converged,
    })
}

/// Jammer-unaware estimate from stacked mean powers and a known noise floor.
pub fn ba_unaware_from_powers(
    powers: &PowerVec,
    model: &MeasurementModel,
    noise_var: f64,
    opts: &NnlsOptions,
) -> Result<BaOutcome> {
    ensure_len("power vector", model.matrix.nrows(), powers.len())?;
    if !(noise_var.is_finite() && noise_var >= 0.0) {
        return Err(Error::Precondition("noise variance must be non-negative".into()));
    }
    let target: Vec<f64> = powers.0.iter().map(|p| p - noise_var).collect();
    fit(model, &target, opts)
}

/// Jammer-unaware estimate from a conventionally probed beacon.
pub fn ba_unaware(
    rx: &BeaconRx,
    model: &MeasurementModel,
    noise_var: f64,
    opts: &NnlsOptions,
) -> Result<BaOutcome> {
    if rx.mode != ProbingMode::Conventional {
        return Err(Error::Precondition("unaware estimation expects conventional probing".into()));
    }
    ba_unaware_from_powers(&power_vector(rx)?, model, noise_var, opts)
}

fn projected_power(prx: &ProjectedRx, first: bool) -> Result<PowerVec> {
    let d = prx.dims;
    let dof = if first { d.subslot0 - 1 } else { d.subslot1() - 1 };
    let est = collect_measurements(&d, |slot, i, j| {
        let total: f64 = (0..d.per_stream)
            .map(|l| {
                let block = if first {
                    prx.block0(slot, i, l, j)
                } else {
                    prx.block1(slot, i, l, j)
                };
                block.iter().map(|y| y.norm_sqr()).sum::<f64>()
            })
            .sum();
        Ok(total / (dof * d.per_stream) as f64)
    })?;
    stack_power_vector(&est, &d)
}

/// Jammer-plus-noise power from the projected first subslot.
pub fn estimate_jam_noise_power(prx: &ProjectedRx) -> Result<PowerVec> {
    projected_power(prx, true)
}

/// Projected power of the second subslot.
pub fn subslot1_power(prx: &ProjectedRx) -> Result<PowerVec> {
    projected_power(prx, false)
}

/// Anti-jam estimate from projected powers of both subslots.
pub fn ba_antijam_from_powers(
    subslot0: &PowerVec,
    subslot1: &PowerVec,
    gamma_b: f64,
    model: &MeasurementModel,
    opts: &NnlsOptions,
) -> Result<BaOutcome> {
    if !(gamma_b > 0.0) {
        return Err(Error::Precondition(
            "anti-jam estimation needs a positive random-probing share".into(),
        ));
    }
    ensure_len("subslot 0 powers", model.matrix.nrows(), subslot0.len())?;
    ensure_len("subslot 1 powers", model.matrix.nrows(), subslot1.len())?;
    let target: Vec<f64> = subslot1.0.iter().zip(&subslot0.0).map(|(a, b)| a - b).collect();
    fit(model, &target, opts)
}

/// Randomized-probing estimate: project out the known symbols, estimate
/// the jammer-plus-noise floor on subslot 0 and subtract it from subslot 1.
pub fn ba_antijam(
    rx: &BeaconRx,
    model: &MeasurementModel,
    plan: &ProbingPlan,
    opts: &NnlsOptions,
) -> Result<BaOutcome> {
    if rx.mode != ProbingMode::Randomized || plan.mode() != ProbingMode::Randomized {
        return Err(Error::Precondition("anti-jam estimation expects randomized probing".into()));
    }
    if !(plan.gamma_b() > 0.0) {
        return Err(Error::Precondition(
            "anti-jam estimation needs a positive random-probing share".into(),
        ));
    }
    let prx = project_beacon(rx, plan)?;
    let p0 = estimate_jam_noise_power(&prx)?;
    let p1 = subslot1_power(&prx)?;
    ba_antijam_from_powers(&p0, &p1, plan.gamma_b(), model, opts)
}

pub fn score(outcome: &BaOutcome, truth: &XiVector) -> Result<Score> {
    ensure_len("beamspace power vector", outcome.estimate.len(), truth.len())?;
    let t = truth.argmax();
    Ok(Score {
        selected: outcome.selected,
        truth: t,
        success: outcome.selected == t,
    })
}

fn add_scaled(acc: &mut [f64], g: &MeasurementMatrix, xi: &XiVector, scale: f64) -> Result<()> {
    let gx = g.mul(&xi.values)?;
    acc.iter_mut().zip(gx).for_each(|(a, v)| *a += scale * v);
    Ok(())
}

/// Population mean powers `G_B xi_B + G_J xi_J + noise`.
pub fn model_powers(
    g_b: &MeasurementMatrix,
    xi_b: &XiVector,
    jammer: Option<(&MeasurementMatrix, &XiVector)>,
    noise_var: f64,
) -> Result<PowerVec> {
    let mut p = vec![noise_var; g_b.nrows()];
    add_scaled(&mut p, g_b, xi_b, 1.0)?;
    if let Some((g_j, xi_j)) = jammer {
        ensure_len("jammer measurements", g_b.nrows(), g_j.nrows())?;
        add_scaled(&mut p, g_j, xi_j, 1.0)?;
    }
    Ok(PowerVec(p))
}

/// Population projected powers of both subslots: the first carries the
/// random jammer share plus noise, the second adds the random BS share.
pub fn model_projected_powers(
    g_b: &MeasurementMatrix,
    xi_b: &XiVector,
    gamma_b: f64,
    jammer: Option<(&MeasurementMatrix, &XiVector, f64)>,
    noise_var: f64,
) -> Result<(PowerVec, PowerVec)> {
    let mut p0 = vec![noise_var; g_b.nrows()];
    if let Some((g_j, xi_j, gamma_j)) = jammer {
        ensure_len("jammer measurements", g_b.nrows(), g_j.nrows())?;
        add_scaled(&mut p0, g_j, xi_j, gamma_j)?;
    }
    let mut p1 = p0.clone();
    add_scaled(&mut p1, g_b, xi_b, gamma_b)?;
    Ok((PowerVec(p0), PowerVec(p1)))
}

/// Plain `G x` for dense checks.
pub fn apply(g: &MeasurementMatrix, x: &[f64]) -> Result<DVector<f64>> {
    Ok(DVector::from_vec(g.mul(x)?))
}
