//! Diagnostics on reconstruction quality and measurement-matrix geometry.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use serde::Serialize;

use crate::channel::XiVector;
use crate::codebook::MeasurementMatrix;
use crate::error::{ensure_len, Error, Result};

/// Ratio threshold used to label the equal-codebook dominance condition.
pub const DOMINANCE_FACTOR: f64 = 10.0;

/// Euclidean distance between two beamspace power vectors.
pub fn recon_error(truth: &[f64], estimate: &[f64]) -> Result<f64> {
    ensure_len("reconstruction", truth.len(), estimate.len())?;
    Ok(truth
        .iter()
        .zip(estimate)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt())
}

/// l1 norm of everything but the `kappa` largest-magnitude entries.
pub fn best_k_term(xi: &[f64], kappa: usize) -> Result<f64> {
    if kappa > xi.len() {
        return Err(Error::Precondition(format!(
            "kappa {kappa} exceeds length {}",
            xi.len()
        )));
    }
    let mut mags: Vec<f64> = xi.iter().map(|v| v.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    Ok(mags[kappa..].iter().sum())
}

/// `||G_J xi_J||` and its Frobenius-based upper bound
/// `sqrt(rows * cols) / (U_J V) * ||xi_J||`.
pub fn case1_bound(g_j: &MeasurementMatrix, xi_j: &XiVector) -> Result<(f64, f64)> {
    let gx = g_j.mul(&xi_j.values)?;
    let actual = gx.iter().map(|v| v * v).sum::<f64>().sqrt();
    let xi_norm = xi_j.values.iter().map(|v| v * v).sum::<f64>().sqrt();
    let bound = ((g_j.nrows() * g_j.ncols()) as f64).sqrt() * g_j.weight() * xi_norm;
    Ok((actual, bound))
}

/// Power ratio against normalized channel-peak ratio for equal codebooks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DominanceCheck {
    /// `P_B / P_J`.
    pub power_ratio: f64,
    /// `(max xi_J / P_J) / (max xi_B / P_B)`.
    pub channel_ratio: f64,
    pub satisfied: bool,
}

pub fn case2_condition(
    xi_b: &[f64],
    xi_j: &[f64],
    bs_power: f64,
    jammer_power: f64,
) -> Result<DominanceCheck> {
    ensure_len("equal-codebook comparison", xi_b.len(), xi_j.len())?;
    if !(bs_power > 0.0 && jammer_power > 0.0) {
        return Err(Error::Precondition("both transmit powers must be positive".into()));
    }
    let peak = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    let bs = peak(xi_b) / bs_power;
    if !(bs > 0.0) {
        return Err(Error::Precondition("BS channel has no energy".into()));
    }
    let power_ratio = bs_power / jammer_power;
    let channel_ratio = (peak(xi_j) / jammer_power) / bs;
    Ok(DominanceCheck {
        power_ratio,
        channel_ratio,
        satisfied: power_ratio >= DOMINANCE_FACTOR * channel_ratio,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HalfSpace {
    pub holds: bool,
    /// All-ones combination when every column is covered.
    pub witness: Option<Vec<f64>>,
    /// Columns no measurement touches.
    pub uncovered: Vec<usize>,
}

/// Tries the all-ones combination, valid because the matrix is non-negative.
pub fn half_space_check(g: &MeasurementMatrix) -> HalfSpace {
    let uncovered: Vec<usize> = g
        .column_sums()
        .iter()
        .enumerate()
        .filter(|(_, &s)| !(s > 0.0))
        .map(|(i, _)| i)
        .collect();
    let holds = uncovered.is_empty();
    HalfSpace {
        holds,
        witness: holds.then(|| vec![1.0; g.nrows()]),
        uncovered,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NullspaceProbe {
    pub kappa: usize,
    /// Smallest `||G beta||` over unit vectors supported on a probed set.
    pub min_value: f64,
    pub support: Vec<usize>,
    pub supports_checked: usize,
    /// True when every support of size `kappa` was examined.
    pub exhaustive: bool,
}

fn binomial_at_most(n: usize, k: usize, cap: usize) -> Option<usize> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > cap as u128 {
            return None;
        }
    }
    Some(acc as usize)
}

fn min_singular(g: &DMatrix<f64>, cols: &[usize]) -> f64 {
    if g.nrows() < cols.len() {
        return 0.0;
    }
    let sub = g.select_columns(cols);
    sub.singular_values().min()
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Smallest singular value over `kappa`-column submatrices.
///
/// Enumerates every support when there are at most `trials` of them and
/// samples `trials` random supports otherwise. A small value flags a
/// near-null sparse direction; a large one certifies nothing.
pub fn nullspace_probe<R: Rng + ?Sized>(
    g: &DMatrix<f64>,
    kappa: usize,
    trials: usize,
    rng: &mut R,
) -> Result<NullspaceProbe> {
    let n = g.ncols();
    if kappa == 0 || trials == 0 {
        return Err(Error::Precondition("kappa and trials must be positive".into()));
    }
    if kappa > n {
        return Err(Error::Precondition(format!("kappa {kappa} exceeds {n} columns")));
    }
    let mut best = NullspaceProbe {
        kappa,
        min_value: f64::INFINITY,
        support: Vec::new(),
        supports_checked: 0,
        exhaustive: false,
    };
    let consider = |cols: Vec<usize>, best: &mut NullspaceProbe| {
        let v = min_singular(g, &cols);
        best.supports_checked += 1;
        if v < best.min_value {
            best.min_value = v;
            best.support = cols;
        }
    };
    if binomial_at_most(n, kappa, trials).is_some() {
        let mut c: Vec<usize> = (0..kappa).collect();
        loop {
            consider(c.clone(), &mut best);
            if !next_combination(&mut c, n) {
                break;
            }
        }
        best.exhaustive = true;
    } else {
        for _ in 0..trials {
            let mut cols = sample(rng, n, kappa).into_vec();
            cols.sort_unstable();
            consider(cols, &mut best);
        }
    }
    Ok(best)
}

/// Per-run diagnostics attached to harness reports.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub recon_error: f64,
    pub jam_norm: f64,
    pub jam_bound: f64,
    pub jam_norm_ensemble: f64,
    pub jam_bound_ensemble: f64,
    /// `(kappa, sigma_kappa(xi_B))` for `kappa = 0..=2 L_B`.
    pub best_k_terms: Vec<(usize, f64)>,
    pub dominance: Option<DominanceCheck>,
    pub half_space: HalfSpace,
    pub nullspace: NullspaceProbe,
}
