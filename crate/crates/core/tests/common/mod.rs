//! Test-only oracles, independent of the library's solution paths.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

use beamalign::codebook::Codebook;
use beamalign::config::Scenario;

/// Global NNLS minimum of `||A x - b||^2` by enumerating every support and
/// solving the unconstrained problem on it.
///
/// Returns `(objective, x)`.
pub fn exhaustive_nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> (f64, DVector<f64>) {
    let n = a.ncols();
    let mut best = (b.norm_squared(), DVector::zeros(n));
    for mask in 1u32..(1 << n) {
        let cols: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
        let sub = a.select_columns(cols.iter());
        let svd = sub.clone().svd(true, true);
        let Ok(z) = svd.solve(b, 1e-13) else { continue };
        if z.iter().any(|&v| v < 0.0) {
            continue;
        }
        let obj = (&sub * &z - b).norm_squared();
        if obj < best.0 {
            let mut x = DVector::zeros(n);
            for (k, &j) in cols.iter().enumerate() {
                x[j] = z[k];
            }
            best = (obj, x);
        }
    }
    best
}

/// Measurement matrix built entry by entry from the Kronecker product of
/// the two 0/1 support indicators.
pub fn brute_force_g(tx: &Codebook, ue: &Codebook) -> DMatrix<f64> {
    let (m, nu) = (tx.antennas, ue.antennas);
    let rows_per_slot = tx.chains() * ue.chains();
    let mut g = DMatrix::zeros(tx.slots() * rows_per_slot, m * nu);
    for s in 0..tx.slots() {
        for i in 0..tx.chains() {
            for j in 0..ue.chains() {
                let row = s * rows_per_slot + i * ue.chains() + j;
                let u: Vec<f64> = (0..m).map(|p| f64::from(tx.sets[s][i].contains(&p))).collect();
                let v: Vec<f64> = (0..nu).map(|p| f64::from(ue.sets[s][j].contains(&p))).collect();
                let w = 1.0 / (tx.support * ue.support) as f64;
                for (mi, uu) in u.iter().enumerate() {
                    for (ni, vv) in v.iter().enumerate() {
                        g[(row, ni + nu * mi)] = uu * vv * w;
                    }
                }
            }
        }
    }
    g
}

/// Eight antennas per node and a 64-point OFDM grid.
pub fn small_scenario() -> Scenario {
    beamalign::verify::small_scenario()
}
