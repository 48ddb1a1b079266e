//! Time-domain OFDM reference chain.
//!
//! Builds every transmitted OFDM block with its cyclic prefix, propagates
//! it through beamformed multipath with explicit convolution, strips the
//! prefix and takes a DFT on the used subcarriers. Agreement with the
//! frequency-domain synthesis validates that model.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::channel::{steering, PathSet};
use crate::codebook::Codebook;
use crate::error::{ensure_len, Error, Result};
use crate::signal::{BeaconDraws, BeaconRx, JammerProfile, ProbingPlan};

/// Combined DAC/ADC pulse.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PulseModel {
    /// Single tap; only integer delays are representable.
    Impulse,
    /// Kaiser-windowed sinc with `taps` taps, delayed by `taps / 2` samples.
    /// The receiver removes that bulk delay after the DFT.
    KaiserSinc { taps: usize, beta: f64 },
}

impl Default for PulseModel {
    fn default() -> Self {
        PulseModel::KaiserSinc {
            taps: 64,
            beta: 10.0,
        }
    }
}

fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..500 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

impl PulseModel {
    pub fn taps(&self) -> usize {
        match *self {
            PulseModel::Impulse => 1,
            PulseModel::KaiserSinc { taps, .. } => taps,
        }
    }

    pub fn bulk_delay(&self) -> usize {
        match *self {
            PulseModel::Impulse => 0,
            PulseModel::KaiserSinc { taps, .. } => taps / 2,
        }
    }

    /// Taps of the pulse delayed by `frac` samples.
    pub fn response(&self, frac: f64) -> Result<Vec<f64>> {
        match *self {
            PulseModel::Impulse => {
                if frac != 0.0 {
                    return Err(Error::Precondition(
                        "an impulse pulse cannot realize fractional delays".into(),
                    ));
                }
                Ok(vec![1.0])
            }
            PulseModel::KaiserSinc { taps, beta } => {
                if taps < 2 || !(beta.is_finite() && beta >= 0.0) {
                    return Err(Error::InvalidConfig("invalid Kaiser-sinc pulse".into()));
                }
                let half = taps as f64 / 2.0;
                let norm = bessel_i0(beta);
                Ok((0..taps)
                    .map(|r| {
                        let x = r as f64 - half - frac;
                        let ratio = x / half;
                        if ratio.abs() > 1.0 {
                            0.0
                        } else {
                            sinc(x) * bessel_i0(beta * (1.0 - ratio * ratio).sqrt()) / norm
                        }
                    })
                    .collect())
            }
        }
    }
}

/// OFDM numerology of the reference chain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OfdmParams {
    pub fft_len: usize,
    pub cp_len: usize,
    pub pulse: PulseModel,
}

impl OfdmParams {
    pub fn block_len(&self) -> usize {
        self.fft_len + self.cp_len
    }
}

/// IDFT of `d` placed on `subcarriers`, prefixed with its last `cp_len`
/// samples.
pub fn ofdm_modulate(
    d: &[Complex64],
    subcarriers: &[usize],
    fft_len: usize,
    cp_len: usize,
) -> Result<Vec<Complex64>> {
    ensure_len("OFDM symbols", subcarriers.len(), d.len())?;
    if fft_len == 0 || cp_len > fft_len {
        return Err(Error::InvalidConfig("prefix must not exceed the FFT size".into()));
    }
    if let Some(&k) = subcarriers.iter().find(|&&k| k >= fft_len) {
        return Err(Error::InvalidConfig(format!("subcarrier {k} out of range")));
    }
    let scale = 1.0 / (fft_len as f64).sqrt();
    let body: Vec<Complex64> = (0..fft_len)
        .map(|n| {
            subcarriers
                .iter()
                .zip(d)
                .map(|(&k, &x)| {
                    x * Complex64::from_polar(scale, 2.0 * PI * ((k * n) % fft_len) as f64 / fft_len as f64)
                })
                .sum()
        })
        .collect();
    let mut z = Vec::with_capacity(fft_len + cp_len);
    z.extend_from_slice(&body[fft_len - cp_len..]);
    z.extend_from_slice(&body);
    Ok(z)
}

/// Drops the prefix and evaluates the unitary DFT on `subcarriers`.
pub fn ofdm_demodulate(
    block: &[Complex64],
    subcarriers: &[usize],
    fft_len: usize,
    cp_len: usize,
) -> Result<Vec<Complex64>> {
    ensure_len("OFDM block", fft_len + cp_len, block.len())?;
    let scale = 1.0 / (fft_len as f64).sqrt();
    Ok(subcarriers
        .iter()
        .map(|&k| {
            block[cp_len..]
                .iter()
                .enumerate()
                .map(|(q, &y)| {
                    y * Complex64::from_polar(scale, -2.0 * PI * ((k * q) % fft_len) as f64 / fft_len as f64)
                })
                .sum()
        })
        .collect())
}

/// Antenna weights of an equal-gain beamspace beam.
///
/// Inverts the beamspace map `u -> W J u`, giving `u = J W^H beam`.
pub fn antenna_weights(beam: &[f64]) -> Vec<Complex64> {
    let m = beam.len();
    let scale = 1.0 / (m as f64).sqrt();
    (0..m)
        .map(|p| {
            let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
            beam.iter()
                .enumerate()
                .filter(|(_, &b)| b != 0.0)
                .map(|(q, &b)| {
                    Complex64::from_polar(scale * b * sign, -2.0 * PI * ((p * q) % m) as f64 / m as f64)
                })
                .sum()
        })
        .collect()
}

/// Multipath and transmit codebook of one emitter.
#[derive(Clone, Copy)]
pub struct OracleLink<'a> {
    pub paths: &'a PathSet,
    pub codebook: &'a Codebook,
}

struct Emitter {
    /// Per path: gain over sqrt(chains), integer delay, pulse taps.
    paths: Vec<(Complex64, usize, Vec<f64>)>,
    /// `tx_gain[path][slot][stream]` = a^H(aod) u.
    tx_gain: Vec<Vec<Vec<Complex64>>>,
    /// `rx_gain[path][slot][chain]` = v^H b(aoa).
    rx_gain: Vec<Vec<Vec<Complex64>>>,
    /// `waveform[stream]`, all blocks concatenated.
    waveform: Vec<Vec<Complex64>>,
}

fn dot_conj(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[allow(clippy::too_many_arguments)]
fn emitter(
    link: &OracleLink<'_>,
    ue: &Codebook,
    plan: &ProbingPlan,
    params: &OfdmParams,
    ue_chains_norm: f64,
    amplitude: impl Fn(usize) -> (f64, f64),
    random: &[Complex64],
) -> Result<Emitter> {
    let d = plan.dims();
    let cb = link.codebook;
    ensure_len("codebook slots", d.slots, cb.slots())?;
    ensure_len("codebook chains", d.streams, cb.chains())?;
    let tx_w: Vec<Vec<Vec<Complex64>>> = (0..d.slots)
        .map(|s| (0..d.streams).map(|i| antenna_weights(&cb.beam(s, i))).collect())
        .collect();
    let rx_w: Vec<Vec<Vec<Complex64>>> = (0..d.slots)
        .map(|s| (0..d.chains).map(|j| antenna_weights(&ue.beam(s, j))).collect())
        .collect();
    let mut paths = Vec::new();
    let mut tx_gain = Vec::new();
    let mut rx_gain = Vec::new();
    for p in &link.paths.paths {
        let a = steering(cb.antennas, p.aod);
        let b = steering(ue.antennas, p.aoa);
        tx_gain.push(
            tx_w.iter()
                .map(|slot| slot.iter().map(|u| dot_conj(&a, u)).collect())
                .collect(),
        );
        rx_gain.push(
            rx_w.iter()
                .map(|slot| slot.iter().map(|v| dot_conj(v, &b)).collect())
                .collect(),
        );
        paths.push((p.gain * ue_chains_norm, p.delay_int, params.pulse.response(p.delay_frac)?));
    }
    let blocks = d.slots * d.symbols;
    let mut waveform = vec![Vec::with_capacity(blocks * params.block_len()); d.streams];
    for slot in 0..d.slots {
        for sym in 0..d.symbols {
            let (ak, ar) = amplitude(sym);
            for (i, wave) in waveform.iter_mut().enumerate() {
                let symbols: Vec<Complex64> = (0..d.per_stream)
                    .map(|l| {
                        let tone = d.tone(slot, i, l);
                        plan.known(slot, i, l)[sym] * ak + random[tone * d.symbols + sym] * ar
                    })
                    .collect();
                wave.extend(ofdm_modulate(&symbols, &plan.subcarriers()[i], params.fft_len, params.cp_len)?);
            }
        }
    }
    Ok(Emitter {
        paths,
        tx_gain,
        rx_gain,
        waveform,
    })
}

/// Received beacon computed through the time-domain chain.
#[allow(clippy::too_many_arguments)]
pub fn time_domain_rx(
    bs: OracleLink<'_>,
    jammer: Option<OracleLink<'_>>,
    ue: &Codebook,
    plan: &ProbingPlan,
    bs_power: f64,
    jam: &JammerProfile,
    noise_var: f64,
    draws: &BeaconDraws,
    params: &OfdmParams,
) -> Result<BeaconRx> {
    let d = *plan.dims();
    ensure_len("UE codebook slots", d.slots, ue.slots())?;
    ensure_len("UE codebook chains", d.chains, ue.chains())?;
    ensure_len("noise draws", d.len(), draws.noise.len())?;
    if params.cp_len > params.fft_len {
        return Err(Error::InvalidConfig("prefix must not exceed the FFT size".into()));
    }
    let max_delay = bs
        .paths
        .max_delay_int()
        .max(jammer.map_or(0, |j| j.paths.max_delay_int()));
    let needed = params.pulse.taps() - 1 + max_delay;
    if needed > params.cp_len {
        return Err(Error::CpTooShort {
            needed,
            available: params.cp_len,
        });
    }

    let norm = 1.0 / (d.chains as f64).sqrt();
    let mut emitters = vec![emitter(
        &bs,
        ue,
        plan,
        params,
        norm,
        |s| {
            let g = plan.random_share(s);
            (((1.0 - g) * bs_power).sqrt(), (g * bs_power).sqrt())
        },
        &draws.bs_random,
    )?];
    if let Some(link) = jammer {
        let (ak, ar) = (((1.0 - jam.gamma_j) * jam.power).sqrt(), (jam.gamma_j * jam.power).sqrt());
        emitters.push(emitter(&link, ue, plan, params, norm, |_| (ak, ar), &draws.jammer_random)?);
    }

    let p_len = params.block_len();
    let blocks = d.slots * d.symbols;
    let bulk = params.pulse.bulk_delay();
    let sigma = noise_var.sqrt();
    let mut samples = vec![Complex64::new(0.0, 0.0); d.len()];
    let mut rx = vec![Complex64::new(0.0, 0.0); p_len];
    for j in 0..d.chains {
        for blk in 0..blocks {
            let slot = blk / d.symbols;
            let sym = blk % d.symbols;
            rx.iter_mut().for_each(|y| *y = Complex64::new(0.0, 0.0));
            for e in &emitters {
                for (pi, (gain, delay, taps)) in e.paths.iter().enumerate() {
                    let f = e.rx_gain[pi][slot][j];
                    for (i, wave) in e.waveform.iter().enumerate() {
                        for (q, y) in rx.iter_mut().enumerate() {
                            let n = blk * p_len + q;
                            let mut acc = Complex64::new(0.0, 0.0);
                            for (r, &h) in taps.iter().enumerate() {
                                if h == 0.0 {
                                    continue;
                                }
                                let Some(src) = n.checked_sub(delay + r) else { continue };
                                let src_slot = src / p_len / d.symbols;
                                acc += wave[src] * e.tx_gain[pi][src_slot][i] * h;
                            }
                            *y += gain * f * acc;
                        }
                    }
                }
            }
            for i in 0..d.streams {
                let sc = &plan.subcarriers()[i];
                let freq = ofdm_demodulate(&rx, sc, params.fft_len, params.cp_len)?;
                for (l, (&k, v)) in sc.iter().zip(freq).enumerate() {
                    let comp = Complex64::from_polar(
                        1.0,
                        2.0 * PI * ((k * bulk) % params.fft_len) as f64 / params.fft_len as f64,
                    );
                    let idx = d.index(slot, i, l, j, sym);
                    samples[idx] = v * comp + draws.noise[idx] * sigma;
                }
            }
        }
    }
    BeaconRx::new(d, plan.mode(), plan.subcarriers().to_vec(), samples)
}
