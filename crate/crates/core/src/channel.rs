//! Multipath channels and their beamspace representation.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{SystemConfig, Tx};
use crate::error::{ensure_len, Error, Result};
use crate::rng::complex_normal;

pub type CMatrix = DMatrix<Complex64>;

/// One propagation path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub gain: Complex64,
    /// Integer part of the delay in sampling periods.
    pub delay_int: usize,
    /// Fractional part of the delay in sampling periods, in `[0, 1)`.
    pub delay_frac: f64,
    /// Normalized angle of departure, `sin(theta) / 2`.
    pub aod: f64,
    /// Normalized angle of arrival.
    pub aoa: f64,
}

impl Path {
    pub fn delay(&self) -> f64 {
        self.delay_int as f64 + self.delay_frac
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    pub tx: Tx,
    pub paths: Vec<Path>,
}

impl PathSet {
    pub fn max_delay_int(&self) -> usize {
        self.paths.iter().map(|p| p.delay_int).max().unwrap_or(0)
    }

    pub fn has_fractional_delays(&self) -> bool {
        self.paths.iter().any(|p| p.delay_frac != 0.0)
    }
}

/// Statistical description of one link's multipath.
#[derive(Clone, Debug, PartialEq)]
pub struct PathConfig {
    variances: Vec<f64>,
    max_delay: f64,
    tau_slope: f64,
}

impl PathConfig {
    pub fn new(variances: Vec<f64>, max_delay: f64, tau_slope: f64) -> Result<Self> {
        if variances.is_empty() {
            return Err(Error::InvalidConfig("at least one path is required".into()));
        }
        if variances.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidConfig("path variances must be non-negative".into()));
        }
        if !(max_delay.is_finite() && max_delay > 0.0) {
            return Err(Error::InvalidConfig("max delay must be positive".into()));
        }
        if !(tau_slope.is_finite() && tau_slope > 0.0) {
            return Err(Error::InvalidConfig("tau slope must be positive".into()));
        }
        Ok(Self {
            variances,
            max_delay,
            tau_slope,
        })
    }

    pub fn from_system(sys: &SystemConfig, tx: Tx) -> Result<Self> {
        Self::new(sys.path_variances(tx), sys.max_delay, sys.tau_slope)
    }

    pub fn paths(&self) -> usize {
        self.variances.len()
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn max_delay(&self) -> f64 {
        self.max_delay
    }

    /// Inverse-CDF sample of the truncated exponential delay profile.
    pub fn delay_from_uniform(&self, u: f64) -> f64 {
        let tail = -(-self.max_delay / self.tau_slope).exp_m1();
        let tau = -self.tau_slope * (-u * tail).ln_1p();
        tau.clamp(0.0, self.max_delay)
    }
}

/// Draws one multipath realization.
///
/// Per path the stream yields the gain, the delay and then the departure
/// and arrival angles, always in that order.
pub fn gen_path_set<R: Rng + ?Sized>(cfg: &PathConfig, tx: Tx, rng: &mut R) -> PathSet {
    let paths = cfg
        .variances
        .iter()
        .map(|&var| {
            let gain = complex_normal(rng) * var.sqrt();
            let tau = cfg.delay_from_uniform(rng.random::<f64>());
            let aod = 0.5 * rng.random_range(-FRAC_PI_2..FRAC_PI_2).sin();
            let aoa = 0.5 * rng.random_range(-FRAC_PI_2..FRAC_PI_2).sin();
            let delay_int = tau.floor() as usize;
            Path {
                gain,
                delay_int,
                delay_frac: tau - delay_int as f64,
                aod,
                aoa,
            }
        })
        .collect();
    PathSet { tx, paths }
}

/// Unit-norm uniform linear array response.
pub fn steering(len: usize, angle: f64) -> Vec<Complex64> {
    let scale = 1.0 / (len as f64).sqrt();
    (0..len)
        .map(|p| Complex64::from_polar(scale, -2.0 * PI * angle * p as f64))
        .collect()
}

/// Normalized baseband frequency of subcarrier `k`, folded into `[-1/2, 1/2)`.
pub fn centered_frequency(k: usize, fft_len: usize) -> f64 {
    let k = k % fft_len;
    if 2 * k >= fft_len {
        (k as f64 - fft_len as f64) / fft_len as f64
    } else {
        k as f64 / fft_len as f64
    }
}

/// Sizes needed to evaluate a link's channel matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LinkGeometry {
    pub tx_antennas: usize,
    pub ue_antennas: usize,
    pub ue_chains: usize,
    pub fft_len: usize,
}

impl LinkGeometry {
    pub fn from_system(sys: &SystemConfig, tx: Tx) -> Self {
        Self {
            tx_antennas: sys.antennas(tx),
            ue_antennas: sys.ue_antennas,
            ue_chains: sys.ue_chains,
            fft_len: sys.subcarriers,
        }
    }
}

/// Antenna-domain channel matrix of each used subcarrier.
///
/// Fractional delays enter through the ideal band-limited pulse, whose
/// spectrum is a linear phase in the centered subcarrier frequency.
pub fn build_physical_matrices(
    paths: &PathSet,
    geom: &LinkGeometry,
    used: &[usize],
) -> Result<Vec<CMatrix>> {
    if geom.tx_antennas == 0 || geom.ue_antennas == 0 || geom.ue_chains == 0 || geom.fft_len == 0 {
        return Err(Error::InvalidConfig("link geometry sizes must be positive".into()));
    }
    if let Some(&k) = used.iter().find(|&&k| k >= geom.fft_len) {
        return Err(Error::InvalidConfig(format!(
            "subcarrier {k} outside an FFT of size {}",
            geom.fft_len
        )));
    }
    let outer: Vec<CMatrix> = paths
        .paths
        .iter()
        .map(|p| {
            let b = steering(geom.ue_antennas, p.aoa);
            let a = steering(geom.tx_antennas, p.aod);
            CMatrix::from_fn(geom.ue_antennas, geom.tx_antennas, |n, m| b[n] * a[m].conj())
        })
        .collect();
    let norm = 1.0 / (geom.ue_chains as f64).sqrt();
    let f = geom.fft_len as f64;
    Ok(used
        .iter()
        .map(|&k| {
            let mut c = CMatrix::zeros(geom.ue_antennas, geom.tx_antennas);
            for (p, o) in paths.paths.iter().zip(&outer) {
                let phase = -2.0 * PI * (k as f64 * p.delay_int as f64 / f
                    + centered_frequency(k, geom.fft_len) * p.delay_frac);
                let w = p.gain * Complex64::from_polar(norm, phase);
                c.zip_apply(o, |x, y| *x += w * y);
            }
            c
        })
        .collect())
}

/// Unitary DFT factors relating antenna and beamspace domains.
#[derive(Clone, Debug)]
pub struct BeamspaceBasis {
    rx: CMatrix,
    tx: CMatrix,
}

/// Unitary inverse DFT, entry `(m, p) = exp(j 2 pi m p / n) / sqrt(n)`.
pub fn unitary_idft(n: usize) -> CMatrix {
    let s = 1.0 / (n as f64).sqrt();
    CMatrix::from_fn(n, n, |m, p| {
        Complex64::from_polar(s, 2.0 * PI * ((m * p) % n) as f64 / n as f64)
    })
}

fn alternate_columns(mut m: CMatrix) -> CMatrix {
    for (c, mut col) in m.column_iter_mut().enumerate() {
        if c % 2 == 1 {
            col.neg_mut();
        }
    }
    m
}

impl BeamspaceBasis {
    pub fn new(ue_antennas: usize, tx_antennas: usize) -> Self {
        // W J: the sign flips of J act on the columns of W.
        Self {
            rx: alternate_columns(unitary_idft(ue_antennas)),
            tx: alternate_columns(unitary_idft(tx_antennas)),
        }
    }

    pub fn ue_antennas(&self) -> usize {
        self.rx.nrows()
    }

    pub fn tx_antennas(&self) -> usize {
        self.tx.nrows()
    }

    /// Antenna domain to beamspace.
    pub fn to_beamspace(&self, physical: &CMatrix) -> Result<CMatrix> {
        self.check(physical)?;
        Ok(&self.rx * physical * self.tx.adjoint())
    }

    /// Beamspace to antenna domain.
    pub fn to_physical(&self, beamspace: &CMatrix) -> Result<CMatrix> {
        self.check(beamspace)?;
        Ok(self.rx.adjoint() * beamspace * &self.tx)
    }

    fn check(&self, m: &CMatrix) -> Result<()> {
        ensure_len("channel rows", self.rx.nrows(), m.nrows())?;
        ensure_len("channel columns", self.tx.nrows(), m.ncols())
    }
}

/// Beamspace channel matrices on the used subcarriers.
#[derive(Clone, Debug)]
pub struct VirtualChannel {
    subcarriers: Vec<usize>,
    matrices: Vec<CMatrix>,
    basis: Arc<BeamspaceBasis>,
}

pub fn to_virtual(
    physical: &[CMatrix],
    subcarriers: &[usize],
    basis: Arc<BeamspaceBasis>,
) -> Result<VirtualChannel> {
    ensure_len("subcarrier list", physical.len(), subcarriers.len())?;
    let matrices = physical
        .iter()
        .map(|c| basis.to_beamspace(c))
        .collect::<Result<_>>()?;
    Ok(VirtualChannel {
        subcarriers: subcarriers.to_vec(),
        matrices,
        basis,
    })
}

impl VirtualChannel {
    /// Wraps beamspace matrices directly.
    pub fn from_beamspace(
        matrices: Vec<CMatrix>,
        subcarriers: &[usize],
        basis: Arc<BeamspaceBasis>,
    ) -> Result<Self> {
        ensure_len("subcarrier list", matrices.len(), subcarriers.len())?;
        for m in &matrices {
            basis.check(m)?;
        }
        Ok(Self {
            subcarriers: subcarriers.to_vec(),
            matrices,
            basis,
        })
    }

    /// Draws a fresh path set and returns it with its beamspace channel.
    pub fn generate<R: Rng + ?Sized>(
        cfg: &PathConfig,
        geom: &LinkGeometry,
        tx: Tx,
        subcarriers: &[usize],
        basis: Arc<BeamspaceBasis>,
        rng: &mut R,
    ) -> Result<(PathSet, Self)> {
        let paths = gen_path_set(cfg, tx, rng);
        let phys = build_physical_matrices(&paths, geom, subcarriers)?;
        let vc = to_virtual(&phys, subcarriers, basis)?;
        Ok((paths, vc))
    }

    pub fn subcarriers(&self) -> &[usize] {
        &self.subcarriers
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }

    pub fn basis(&self) -> &Arc<BeamspaceBasis> {
        &self.basis
    }

    pub fn ue_antennas(&self) -> usize {
        self.basis.ue_antennas()
    }

    pub fn tx_antennas(&self) -> usize {
        self.basis.tx_antennas()
    }

    /// Position of subcarrier `k` in the used list.
    pub fn position(&self, k: usize) -> Result<usize> {
        self.subcarriers
            .iter()
            .position(|&x| x == k)
            .ok_or_else(|| Error::Precondition(format!("subcarrier {k} is not in use")))
    }

    pub fn matrix(&self, k: usize) -> Result<&CMatrix> {
        Ok(&self.matrices[self.position(k)?])
    }

    pub fn physical(&self, k: usize) -> Result<CMatrix> {
        self.basis.to_physical(self.matrix(k)?)
    }

    /// Gain of an equal-weight beam pair, `(1/sqrt(|tx| |rx|)) sum C[n, m]`.
    pub fn support_gain(&self, pos: usize, tx_support: &[usize], rx_support: &[usize]) -> Complex64 {
        let c = &self.matrices[pos];
        let mut acc = Complex64::new(0.0, 0.0);
        for &m in tx_support {
            for &n in rx_support {
                acc += c[(n, m)];
            }
        }
        acc / ((tx_support.len() * rx_support.len()) as f64).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.matrices
            .iter()
            .all(|m| m.iter().all(|z| z.re == 0.0 && z.im == 0.0))
    }
}

/// Non-negative beamspace power vector of one transmitter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiVector {
    pub tx: Tx,
    pub power: f64,
    pub values: Vec<f64>,
}

impl XiVector {
    pub fn new(tx: Tx, power: f64, values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("beamspace power vector"));
        }
        if values.iter().any(|&v| v < 0.0) {
            return Err(Error::Precondition("beamspace powers must be non-negative".into()));
        }
        Ok(Self { tx, power, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same profile at a different transmit power.
    pub fn rescaled(&self, factor: f64) -> Self {
        Self {
            tx: self.tx,
            power: self.power * factor,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn argmax(&self) -> usize {
        crate::argmax(&self.values)
    }
}

/// Per-realization beamspace powers: the mean over used subcarriers of
/// `|vec(C)_n|^2`, times the transmit power. `vec` stacks columns.
pub fn true_xi(vc: &VirtualChannel, tx: Tx, power: f64) -> Result<XiVector> {
    if vc.matrices.is_empty() {
        return Err(Error::Precondition("no used subcarriers".into()));
    }
    let n = vc.ue_antennas() * vc.tx_antennas();
    let mut values = vec![0.0; n];
    for c in &vc.matrices {
        for (v, z) in values.iter_mut().zip(c.as_slice()) {
            *v += z.norm_sqr();
        }
    }
    let scale = power / vc.matrices.len() as f64;
    values.iter_mut().for_each(|v| *v *= scale);
    XiVector::new(tx, power, values)
}

/// Monte Carlo estimate of the ensemble beamspace powers.
pub fn ensemble_xi<R: Rng + ?Sized>(
    cfg: &PathConfig,
    geom: &LinkGeometry,
    tx: Tx,
    subcarriers: &[usize],
    power: f64,
    draws: usize,
    rng: &mut R,
) -> Result<XiVector> {
    if draws == 0 {
        return Err(Error::Precondition("ensemble needs at least one draw".into()));
    }
    let basis = Arc::new(BeamspaceBasis::new(geom.ue_antennas, geom.tx_antennas));
    let mut acc = vec![0.0; geom.ue_antennas * geom.tx_antennas];
    for _ in 0..draws {
        let (_, vc) = VirtualChannel::generate(cfg, geom, tx, subcarriers, basis.clone(), rng)?;
        let xi = true_xi(&vc, tx, power)?;
        acc.iter_mut().zip(&xi.values).for_each(|(a, v)| *a += v);
    }
    acc.iter_mut().for_each(|a| *a /= draws as f64);
    XiVector::new(tx, power, acc)
}
