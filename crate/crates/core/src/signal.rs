//! Frequency-domain beacon synthesis and power statistics.

use num_complex::Complex64;
use rand::Rng;

use crate::channel::VirtualChannel;
use crate::codebook::Codebook;
use crate::config::SystemConfig;
use crate::error::{ensure_len, Error, Result};
use crate::rng::{complex_normal, stream_rng, Stream};

/// BS transmit scheme within a beacon slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbingMode {
    /// Known symbols on every OFDM symbol.
    Conventional,
    /// Known symbols, plus a random sequence on the second subslot.
    Randomized,
}

/// Shape of the received data of one beacon interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct BeaconDims {
    pub slots: usize,
    pub streams: usize,
    pub per_stream: usize,
    pub chains: usize,
    pub symbols: usize,
    pub subslot0: usize,
}

impl BeaconDims {
    pub fn from_system(sys: &SystemConfig, slots: usize) -> Self {
        Self {
            slots,
            streams: sys.tx_chains,
            per_stream: sys.subcarriers_per_stream,
            chains: sys.ue_chains,
            symbols: sys.symbols_per_slot,
            subslot0: sys.subslot0_len,
        }
    }

    pub fn subslot1(&self) -> usize {
        self.symbols - self.subslot0
    }

    /// Number of transmitted tones, `slots * streams * per_stream`.
    pub fn tones(&self) -> usize {
        self.slots * self.streams * self.per_stream
    }

    pub fn tone(&self, slot: usize, stream: usize, l: usize) -> usize {
        (slot * self.streams + stream) * self.per_stream + l
    }

    /// Index of a sample; symbols vary fastest, then chains.
    pub fn index(&self, slot: usize, stream: usize, l: usize, chain: usize, symbol: usize) -> usize {
        (self.tone(slot, stream, l) * self.chains + chain) * self.symbols + symbol
    }

    pub fn len(&self) -> usize {
        self.tones() * self.chains * self.symbols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of stacked power measurements, `slots * streams * chains`.
    pub fn measurements(&self) -> usize {
        self.slots * self.streams * self.chains
    }

    pub fn measurement(&self, slot: usize, stream: usize, chain: usize) -> usize {
        (slot * self.streams + stream) * self.chains + chain
    }

    pub fn validate(&self) -> Result<()> {
        if [self.slots, self.streams, self.per_stream, self.chains, self.symbols].contains(&0) {
            return Err(Error::InvalidConfig("beacon dimensions must be positive".into()));
        }
        if self.subslot0 > self.symbols {
            return Err(Error::InvalidConfig("subslot 0 longer than the slot".into()));
        }
        Ok(())
    }
}

/// Public probing symbols and the BS power split.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbingPlan {
    dims: BeaconDims,
    mode: ProbingMode,
    gamma_b: f64,
    subcarriers: Vec<Vec<usize>>,
    /// Indexed `tone * symbols + symbol`.
    known: Vec<Complex64>,
}

impl ProbingPlan {
    /// Draws unit-modulus QPSK known symbols.
    pub fn new<R: Rng + ?Sized>(
        dims: BeaconDims,
        subcarriers: Vec<Vec<usize>>,
        mode: ProbingMode,
        gamma_b: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let known = (0..dims.tones() * dims.symbols)
            .map(|_| {
                let bits: u8 = rng.random_range(0..4);
                Complex64::new(
                    if bits & 1 == 0 { h } else { -h },
                    if bits & 2 == 0 { h } else { -h },
                )
            })
            .collect();
        Self::with_symbols(dims, subcarriers, mode, gamma_b, known)
    }

    pub fn with_symbols(
        dims: BeaconDims,
        subcarriers: Vec<Vec<usize>>,
        mode: ProbingMode,
        gamma_b: f64,
        known: Vec<Complex64>,
    ) -> Result<Self> {
        dims.validate()?;
        ensure_len("stream count", dims.streams, subcarriers.len())?;
        for set in &subcarriers {
            ensure_len("subcarriers per stream", dims.per_stream, set.len())?;
        }
        ensure_len("known symbols", dims.tones() * dims.symbols, known.len())?;
        if known.iter().any(|t| (t.norm_sqr() - 1.0).abs() > 1e-12) {
            return Err(Error::Precondition("known symbols must have unit modulus".into()));
        }
        if !(0.0..=1.0).contains(&gamma_b) {
            return Err(Error::InvalidConfig("gamma_b must lie in [0, 1]".into()));
        }
        if mode == ProbingMode::Randomized && (dims.subslot0 < 2 || dims.subslot1() < 2) {
            return Err(Error::InvalidConfig(
                "randomized probing needs at least 2 symbols per subslot".into(),
            ));
        }
        Ok(Self {
            dims,
            mode,
            gamma_b,
            subcarriers,
            known,
        })
    }

    /// Same symbols under another transmit scheme.
    pub fn with_mode(&self, mode: ProbingMode, gamma_b: f64) -> Result<Self> {
        Self::with_symbols(self.dims, self.subcarriers.clone(), mode, gamma_b, self.known.clone())
    }

    pub fn dims(&self) -> &BeaconDims {
        &self.dims
    }

    pub fn mode(&self) -> ProbingMode {
        self.mode
    }

    pub fn gamma_b(&self) -> f64 {
        self.gamma_b
    }

    pub fn subcarriers(&self) -> &[Vec<usize>] {
        &self.subcarriers
    }

    /// Known symbols of one tone across the slot.
    pub fn known(&self, slot: usize, stream: usize, l: usize) -> &[Complex64] {
        let s = self.dims.symbols;
        let t = self.dims.tone(slot, stream, l);
        &self.known[t * s..(t + 1) * s]
    }

    /// Fraction of BS power carried by the random sequence on `symbol`.
    pub fn random_share(&self, symbol: usize) -> f64 {
        match self.mode {
            ProbingMode::Randomized if symbol >= self.dims.subslot0 => self.gamma_b,
            _ => 0.0,
        }
    }
}

/// Jammer power and the share of it spent on random symbols.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JammerProfile {
    pub power: f64,
    pub gamma_j: f64,
}

impl JammerProfile {
    pub const OFF: JammerProfile = JammerProfile {
        power: 0.0,
        gamma_j: 0.0,
    };

    pub fn new(power: f64, gamma_j: f64) -> Result<Self> {
        if !(power.is_finite() && power >= 0.0) {
            return Err(Error::InvalidConfig("jammer power must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&gamma_j) {
            return Err(Error::InvalidConfig("gamma_j must lie in [0, 1]".into()));
        }
        Ok(Self { power, gamma_j })
    }
}

/// Random quantities of one beacon interval: BS and jammer random
/// sequences per transmitted tone and symbol, and unit-variance noise per
/// received sample.
#[derive(Clone, Debug, PartialEq)]
pub struct BeaconDraws {
    pub bs_random: Vec<Complex64>,
    pub jammer_random: Vec<Complex64>,
    pub noise: Vec<Complex64>,
}

impl BeaconDraws {
    pub fn generate<R: Rng + ?Sized>(
        dims: &BeaconDims,
        bs_rng: &mut R,
        jammer_rng: &mut R,
        noise_rng: &mut R,
    ) -> Self {
        let tx_len = dims.tones() * dims.symbols;
        Self {
            bs_random: (0..tx_len).map(|_| complex_normal(bs_rng)).collect(),
            jammer_random: (0..tx_len).map(|_| complex_normal(jammer_rng)).collect(),
            noise: (0..dims.len()).map(|_| complex_normal(noise_rng)).collect(),
        }
    }

    /// Draws from the dedicated streams of a run seed.
    pub fn from_seed(dims: &BeaconDims, seed: u64) -> Self {
        Self::generate(
            dims,
            &mut stream_rng(seed, Stream::BsProbing),
            &mut stream_rng(seed, Stream::JammerProbing),
            &mut stream_rng(seed, Stream::Noise),
        )
    }

    fn check(&self, dims: &BeaconDims) -> Result<()> {
        let tx_len = dims.tones() * dims.symbols;
        ensure_len("BS random sequence", tx_len, self.bs_random.len())?;
        ensure_len("jammer random sequence", tx_len, self.jammer_random.len())?;
        ensure_len("noise draws", dims.len(), self.noise.len())
    }
}

/// Received frequency-domain samples of one beacon interval.
#[derive(Clone, Debug, PartialEq)]
pub struct BeaconRx {
    pub dims: BeaconDims,
    pub mode: ProbingMode,
    /// Used subcarriers of each stream.
    pub subcarriers: Vec<Vec<usize>>,
    /// Layout given by [`BeaconDims::index`].
    pub samples: Vec<Complex64>,
}

impl BeaconRx {
    pub fn new(
        dims: BeaconDims,
        mode: ProbingMode,
        subcarriers: Vec<Vec<usize>>,
        samples: Vec<Complex64>,
    ) -> Result<Self> {
        dims.validate()?;
        ensure_len("stream count", dims.streams, subcarriers.len())?;
        for set in &subcarriers {
            ensure_len("subcarriers per stream", dims.per_stream, set.len())?;
        }
        ensure_len("beacon samples", dims.len(), samples.len())?;
        Ok(Self {
            dims,
            mode,
            subcarriers,
            samples,
        })
    }

    /// All symbols of one (tone, chain) pair.
    pub fn block(&self, slot: usize, stream: usize, l: usize, chain: usize) -> &[Complex64] {
        let start = self.dims.index(slot, stream, l, chain, 0);
        &self.samples[start..start + self.dims.symbols]
    }

    /// First-subslot view of a block.
    pub fn subslot0(&self, slot: usize, stream: usize, l: usize, chain: usize) -> &[Complex64] {
        &self.block(slot, stream, l, chain)[..self.dims.subslot0]
    }

    /// Second-subslot view of a block.
    pub fn subslot1(&self, slot: usize, stream: usize, l: usize, chain: usize) -> &[Complex64] {
        &self.block(slot, stream, l, chain)[self.dims.subslot0..]
    }
}

/// Beam-pair link gains of one transmitter.
///
/// Indexed `tone * chains + chain`, with the tone of the transmitting stream.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkGains {
    dims: BeaconDims,
    gains: Vec<Complex64>,
}

impl LinkGains {
    pub fn compute(
        vc: &VirtualChannel,
        tx: &Codebook,
        ue: &Codebook,
        subcarriers: &[Vec<usize>],
        dims: &BeaconDims,
    ) -> Result<Self> {
        ensure_len("TX codebook slots", dims.slots, tx.slots())?;
        ensure_len("UE codebook slots", dims.slots, ue.slots())?;
        ensure_len("TX codebook chains", dims.streams, tx.chains())?;
        ensure_len("UE codebook chains", dims.chains, ue.chains())?;
        ensure_len("TX antennas", vc.tx_antennas(), tx.antennas)?;
        ensure_len("UE antennas", vc.ue_antennas(), ue.antennas)?;
        let positions: Vec<Vec<usize>> = subcarriers
            .iter()
            .map(|set| set.iter().map(|&k| vc.position(k)).collect())
            .collect::<Result<_>>()?;
        let mut gains = Vec::with_capacity(dims.tones() * dims.chains);
        for slot in 0..dims.slots {
            for (i, pos) in positions.iter().enumerate() {
                for &p in pos {
                    for j in 0..dims.chains {
                        gains.push(vc.support_gain(
                            p,
                            tx.support_set(slot, i),
                            ue.support_set(slot, j),
                        ));
                    }
                }
            }
        }
        Ok(Self { dims: *dims, gains })
    }

    pub fn zero(dims: &BeaconDims) -> Self {
        Self {
            dims: *dims,
            gains: vec![Complex64::new(0.0, 0.0); dims.tones() * dims.chains],
        }
    }

    pub fn get(&self, slot: usize, stream: usize, l: usize, chain: usize) -> Complex64 {
        self.gains[self.dims.tone(slot, stream, l) * self.dims.chains + chain]
    }

    /// `(1/F_i) sum_l |h|^2` for one measurement.
    pub fn mean_power(&self, slot: usize, stream: usize, chain: usize) -> f64 {
        (0..self.dims.per_stream)
            .map(|l| self.get(slot, stream, l, chain).norm_sqr())
            .sum::<f64>()
            / self.dims.per_stream as f64
    }
}

/// `g^H vec(C)` for the beamspace matrix on subcarrier `k`.
pub fn link_gain(vc: &VirtualChannel, beam: &[Complex64], k: usize) -> Result<Complex64> {
    let c = vc.matrix(k)?;
    ensure_len("combined beam", c.len(), beam.len())?;
    Ok(beam
        .iter()
        .zip(c.as_slice())
        .map(|(g, x)| g.conj() * x)
        .sum())
}

/// Combined beam `conj(u) kron v` for real-valued beams.
pub fn combined_beam(tx_beam: &[f64], ue_beam: &[f64]) -> Vec<Complex64> {
    tx_beam
        .iter()
        .flat_map(|&u| ue_beam.iter().map(move |&v| Complex64::new(u * v, 0.0)))
        .collect()
}

/// Synthesizes the received beacon from precomputed link gains.
pub fn synthesize_from_gains(
    bs: &LinkGains,
    jammer: &LinkGains,
    plan: &ProbingPlan,
    bs_power: f64,
    jam: &JammerProfile,
    noise_var: f64,
    draws: &BeaconDraws,
) -> Result<BeaconRx> {
    let dims = *plan.dims();
    ensure_len("BS gains", dims.tones() * dims.chains, bs.gains.len())?;
    ensure_len("jammer gains", dims.tones() * dims.chains, jammer.gains.len())?;
    draws.check(&dims)?;
    if !(noise_var.is_finite() && noise_var >= 0.0) {
        return Err(Error::InvalidConfig("noise variance must be non-negative".into()));
    }
    if !(bs_power.is_finite() && bs_power >= 0.0) {
        return Err(Error::InvalidConfig("BS power must be non-negative".into()));
    }
    let sigma = noise_var.sqrt();
    let jam_known = ((1.0 - jam.gamma_j) * jam.power).sqrt();
    let jam_random = (jam.gamma_j * jam.power).sqrt();
    let bs_amp: Vec<(f64, f64)> = (0..dims.symbols)
        .map(|s| {
            let g = plan.random_share(s);
            (((1.0 - g) * bs_power).sqrt(), (g * bs_power).sqrt())
        })
        .collect();

    let mut samples = vec![Complex64::new(0.0, 0.0); dims.len()];
    for slot in 0..dims.slots {
        for i in 0..dims.streams {
            for l in 0..dims.per_stream {
                let tone = dims.tone(slot, i, l);
                let t = plan.known(slot, i, l);
                let rb = &draws.bs_random[tone * dims.symbols..(tone + 1) * dims.symbols];
                let rj = &draws.jammer_random[tone * dims.symbols..(tone + 1) * dims.symbols];
                for j in 0..dims.chains {
                    let hb = bs.get(slot, i, l, j);
                    let hj = jammer.get(slot, i, l, j);
                    let base = dims.index(slot, i, l, j, 0);
                    for s in 0..dims.symbols {
                        let (ak, ar) = bs_amp[s];
                        let db = t[s] * ak + rb[s] * ar;
                        let dj = t[s] * jam_known + rj[s] * jam_random;
                        samples[base + s] = hb * db + hj * dj + draws.noise[base + s] * sigma;
                    }
                }
            }
        }
    }
    BeaconRx::new(dims, plan.mode(), plan.subcarriers().to_vec(), samples)
}

/// Beamspace channels and codebooks of the jammer link.
pub struct JammerLink<'a> {
    pub channel: &'a VirtualChannel,
    pub codebook: &'a Codebook,
}

/// Received beacon for BS, optional jammer and noise.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_beacon(
    vc_b: &VirtualChannel,
    bs_codebook: &Codebook,
    jammer: Option<JammerLink<'_>>,
    ue_codebook: &Codebook,
    plan: &ProbingPlan,
    bs_power: f64,
    jam: &JammerProfile,
    noise_var: f64,
    draws: &BeaconDraws,
) -> Result<BeaconRx> {
    let dims = plan.dims();
    let hb = LinkGains::compute(vc_b, bs_codebook, ue_codebook, plan.subcarriers(), dims)?;
    let hj = match jammer {
        Some(link) => {
            LinkGains::compute(link.channel, link.codebook, ue_codebook, plan.subcarriers(), dims)?
        }
        None => LinkGains::zero(dims),
    };
    synthesize_from_gains(&hb, &hj, plan, bs_power, jam, noise_var, draws)
}

/// `(1/(S F_i)) sum_l ||y||^2` for one (stream, chain, slot).
pub fn mean_power_estimate(rx: &BeaconRx, stream: usize, chain: usize, slot: usize) -> Result<f64> {
    let d = &rx.dims;
    if stream >= d.streams || chain >= d.chains || slot >= d.slots {
        return Err(Error::Precondition(format!(
            "measurement ({slot}, {stream}, {chain}) out of range"
        )));
    }
    let total: f64 = (0..d.per_stream)
        .map(|l| rx.block(slot, stream, l, chain).iter().map(|y| y.norm_sqr()).sum::<f64>())
        .sum();
    Ok(total / (d.symbols * d.per_stream) as f64)
}

/// One labelled power measurement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerEstimate {
    pub slot: usize,
    pub stream: usize,
    pub chain: usize,
    pub value: f64,
}

/// Stacked power measurements in (slot, stream, chain) order.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerVec(pub Vec<f64>);

impl PowerVec {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Stacks labelled estimates, which must arrive complete and in order.
pub fn stack_power_vector(estimates: &[PowerEstimate], dims: &BeaconDims) -> Result<PowerVec> {
    if estimates.len() != dims.measurements() {
        return Err(Error::PowerVector(format!(
            "expected {} measurements, got {}",
            dims.measurements(),
            estimates.len()
        )));
    }
    let mut out = Vec::with_capacity(estimates.len());
    for (idx, e) in estimates.iter().enumerate() {
        if e.stream >= dims.streams || e.chain >= dims.chains || e.slot >= dims.slots {
            return Err(Error::PowerVector(format!(
                "measurement ({}, {}, {}) out of range",
                e.slot, e.stream, e.chain
            )));
        }
        if dims.measurement(e.slot, e.stream, e.chain) != idx {
            return Err(Error::PowerVector(format!(
                "measurement ({}, {}, {}) at position {idx} is out of order",
                e.slot, e.stream, e.chain
            )));
        }
        out.push(e.value);
    }
    Ok(PowerVec(out))
}

/// Applies `f(slot, stream, chain)` to every measurement in stacking order.
pub fn collect_measurements<F>(dims: &BeaconDims, mut f: F) -> Result<Vec<PowerEstimate>>
where
    F: FnMut(usize, usize, usize) -> Result<f64>,
{
    let mut out = Vec::with_capacity(dims.measurements());
    for slot in 0..dims.slots {
        for stream in 0..dims.streams {
            for chain in 0..dims.chains {
                out.push(PowerEstimate {
                    slot,
                    stream,
                    chain,
                    value: f(slot, stream, chain)?,
                });
            }
        }
    }
    Ok(out)
}

/// Mean-power estimates of a whole beacon.
pub fn power_vector(rx: &BeaconRx) -> Result<PowerVec> {
    let est = collect_measurements(&rx.dims, |s, i, j| mean_power_estimate(rx, i, j, s))?;
    stack_power_vector(&est, &rx.dims)
}

/// Expected mean-power estimates given the link gains, averaging over the
/// random sequences and noise only.
pub fn expected_power_vector(
    bs: &LinkGains,
    jammer: &LinkGains,
    plan: &ProbingPlan,
    bs_power: f64,
    jam: &JammerProfile,
    noise_var: f64,
) -> Result<PowerVec> {
    let d = *plan.dims();
    let est = collect_measurements(&d, |slot, i, j| {
        let mut acc = 0.0;
        for l in 0..d.per_stream {
            let hb = bs.get(slot, i, l, j);
            let hj = jammer.get(slot, i, l, j);
            for s in 0..d.symbols {
                let g = plan.random_share(s);
                let coherent = hb * ((1.0 - g) * bs_power).sqrt()
                    + hj * ((1.0 - jam.gamma_j) * jam.power).sqrt();
                acc += coherent.norm_sqr()
                    + g * bs_power * hb.norm_sqr()
                    + jam.gamma_j * jam.power * hj.norm_sqr()
                    + noise_var;
            }
        }
        Ok(acc / (d.symbols * d.per_stream) as f64)
    })?;
    stack_power_vector(&est, &d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{BeamspaceBasis, CMatrix};
    use crate::codebook::{gen_codebook, CodebookParams, Owner};
    use std::sync::Arc;

    pub(crate) fn dims(slots: usize, streams: usize, per: usize, chains: usize, symbols: usize) -> BeaconDims {
        BeaconDims {
            slots,
            streams,
            per_stream: per,
            chains,
            symbols,
            subslot0: symbols / 2,
        }
    }

    fn combs(d: &BeaconDims) -> Vec<Vec<usize>> {
        crate::config::subcarrier_sets(64, d.streams, d.per_stream)
    }

    struct Fixture {
        vc: VirtualChannel,
        bs: Codebook,
        ue: Codebook,
        plan: ProbingPlan,
    }

    fn fixture(seed: u64, d: BeaconDims, mode: ProbingMode) -> Fixture {
        let sc = combs(&d);
        let used: Vec<usize> = sc.concat();
        let basis = Arc::new(BeamspaceBasis::new(4, 6));
        let mut rng = stream_rng(seed, Stream::BsChannel);
        let mats = used
            .iter()
            .map(|_| CMatrix::from_fn(4, 6, |_, _| complex_normal(&mut rng)))
            .collect();
        let vc = VirtualChannel::from_beamspace(mats, &used, basis).unwrap();
        let bs = gen_codebook(
            Owner::Bs,
            &CodebookParams { antennas: 6, chains: d.streams, support: 2, slots: d.slots },
            &mut stream_rng(seed, Stream::BsCodebook),
            None,
        )
        .unwrap();
        let ue = gen_codebook(
            Owner::Ue,
            &CodebookParams { antennas: 4, chains: d.chains, support: 2, slots: d.slots },
            &mut stream_rng(seed, Stream::UeCodebook),
            None,
        )
        .unwrap();
        let plan = ProbingPlan::new(d, sc, mode, 0.5, &mut stream_rng(seed, Stream::KnownSymbols)).unwrap();
        Fixture { vc, bs, ue, plan }
    }

    #[test]
    fn noiseless_conventional_is_scaled_known_symbols() {
        let d = dims(2, 2, 2, 2, 6);
        let f = fixture(1, d, ProbingMode::Conventional);
        let draws = BeaconDraws::from_seed(&d, 1);
        let rx = synthesize_beacon(&f.vc, &f.bs, None, &f.ue, &f.plan, 2.0, &JammerProfile::OFF, 0.0, &draws)
            .unwrap();
        let h = LinkGains::compute(&f.vc, &f.bs, &f.ue, f.plan.subcarriers(), &d).unwrap();
        for slot in 0..2 {
            for i in 0..2 {
                for l in 0..2 {
                    for j in 0..2 {
                        let t = f.plan.known(slot, i, l);
                        for (s, y) in rx.block(slot, i, l, j).iter().enumerate() {
                            let expect = h.get(slot, i, l, j) * t[s] * 2f64.sqrt();
                            assert!((y - expect).norm() < 1e-15);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn randomized_subslot0_has_no_random_term() {
        let d = dims(1, 1, 2, 1, 8);
        let f = fixture(2, d, ProbingMode::Randomized);
        let draws = BeaconDraws::from_seed(&d, 2);
        let rx = synthesize_beacon(&f.vc, &f.bs, None, &f.ue, &f.plan, 1.0, &JammerProfile::OFF, 0.0, &draws)
            .unwrap();
        let conv = f.plan.with_mode(ProbingMode::Conventional, 0.0).unwrap();
        let rc = synthesize_beacon(&f.vc, &f.bs, None, &f.ue, &conv, 1.0, &JammerProfile::OFF, 0.0, &draws)
            .unwrap();
        for l in 0..2 {
            assert_eq!(rx.subslot0(0, 0, l, 0), rc.subslot0(0, 0, l, 0));
            assert_ne!(rx.subslot1(0, 0, l, 0), rc.subslot1(0, 0, l, 0));
        }
    }

    #[test]
    fn conventional_equals_randomized_without_split() {
        let d = dims(3, 2, 3, 2, 8);
        let f = fixture(3, d, ProbingMode::Conventional);
        let draws = BeaconDraws::from_seed(&d, 3);
        let jam = JammerProfile::new(1.5, 0.4).unwrap();
        let link = || JammerLink { channel: &f.vc, codebook: &f.bs };
        let a = synthesize_beacon(&f.vc, &f.bs, Some(link()), &f.ue, &f.plan, 1.0, &jam, 0.1, &draws).unwrap();
        let rand0 = f.plan.with_mode(ProbingMode::Randomized, 0.0).unwrap();
        let b = synthesize_beacon(&f.vc, &f.bs, Some(link()), &f.ue, &rand0, 1.0, &jam, 0.1, &draws).unwrap();
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn jammer_only_sample_variance() {
        let d = dims(1, 1, 1, 1, 2);
        let f = fixture(4, d, ProbingMode::Conventional);
        let jam = JammerProfile::new(2.0, 1.0).unwrap();
        let hj = LinkGains::compute(&f.vc, &f.bs, &f.ue, f.plan.subcarriers(), &d).unwrap();
        let zero = LinkGains::zero(&d);
        let noise = 0.3;
        let n = 20_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for trial in 0..n {
            let draws = BeaconDraws::from_seed(&d, 1000 + trial);
            let rx = synthesize_from_gains(&zero, &hj, &f.plan, 0.0, &jam, noise, &draws).unwrap();
            let p = rx.samples[0].norm_sqr();
            sum += p;
            sq += p * p;
        }
        let mean = sum / n as f64;
        let se = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
        let expect = 2.0 * hj.get(0, 0, 0, 0).norm_sqr() + noise;
        assert!((mean - expect).abs() < 3.0 * se, "{mean} {expect} {se}");
    }

    #[test]
    fn constant_samples_give_their_power() {
        let d = dims(1, 2, 3, 2, 4);
        let c = Complex64::new(0.3, -1.2);
        let rx = BeaconRx::new(d, ProbingMode::Conventional, combs(&d), vec![c; d.len()]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((mean_power_estimate(&rx, i, j, 0).unwrap() - c.norm_sqr()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn noise_only_power_is_noise_variance() {
        let d = dims(1, 1, 3, 1, 28);
        let f = fixture(5, d, ProbingMode::Conventional);
        let zero = LinkGains::zero(&d);
        let n = 10_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for trial in 0..n {
            let draws = BeaconDraws::from_seed(&d, trial);
            let rx = synthesize_from_gains(&zero, &zero, &f.plan, 1.0, &JammerProfile::OFF, 0.7, &draws)
                .unwrap();
            let p = mean_power_estimate(&rx, 0, 0, 0).unwrap();
            sum += p;
            sq += p * p;
        }
        let mean = sum / n as f64;
        let se = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - 0.7).abs() < 3.0 * se);
    }

    #[test]
    fn unit_channel_yields_bs_power() {
        let d = dims(1, 1, 2, 1, 5);
        let f = fixture(6, d, ProbingMode::Conventional);
        let mut h = LinkGains::zero(&d);
        h.gains.iter_mut().for_each(|g| *g = Complex64::new(1.0, 0.0));
        let draws = BeaconDraws::from_seed(&d, 6);
        let rx = synthesize_from_gains(&h, &LinkGains::zero(&d), &f.plan, 3.5, &JammerProfile::OFF, 0.0, &draws)
            .unwrap();
        assert!((mean_power_estimate(&rx, 0, 0, 0).unwrap() - 3.5).abs() < 1e-14);
    }

    #[test]
    fn stacking_order_is_enforced() {
        let d = dims(2, 1, 1, 1, 4);
        let good = vec![
            PowerEstimate { slot: 0, stream: 0, chain: 0, value: 1.0 },
            PowerEstimate { slot: 1, stream: 0, chain: 0, value: 2.0 },
        ];
        assert_eq!(stack_power_vector(&good, &d).unwrap().0, vec![1.0, 2.0]);
        let swapped = vec![good[1], good[0]];
        assert!(matches!(stack_power_vector(&swapped, &d), Err(Error::PowerVector(_))));
        assert!(stack_power_vector(&good[..1], &d).is_err());
    }

    #[test]
    fn basis_beam_reads_entry() {
        let f = fixture(7, dims(1, 1, 1, 1, 2), ProbingMode::Conventional);
        let k = f.vc.subcarriers()[0];
        let c = f.vc.matrix(k).unwrap().clone();
        for n in [0, 5, 23] {
            let mut e = vec![Complex64::new(0.0, 0.0); 24];
            e[n] = Complex64::new(1.0, 0.0);
            assert_eq!(link_gain(&f.vc, &e, k).unwrap(), c.as_slice()[n]);
        }
        assert!(link_gain(&f.vc, &[Complex64::new(1.0, 0.0)], k).is_err());
    }

    #[test]
    fn support_gain_matches_combined_beam() {
        let d = dims(2, 2, 1, 2, 2);
        let f = fixture(8, d, ProbingMode::Conventional);
        let h = LinkGains::compute(&f.vc, &f.bs, &f.ue, f.plan.subcarriers(), &d).unwrap();
        for slot in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let g = combined_beam(&f.bs.beam(slot, i), &f.ue.beam(slot, j));
                    let k = f.plan.subcarriers()[i][0];
                    let direct = link_gain(&f.vc, &g, k).unwrap();
                    assert!((direct - h.get(slot, i, 0, j)).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn known_symbols_have_unit_modulus() {
        let d = dims(3, 3, 3, 2, 28);
        let f = fixture(9, d, ProbingMode::Randomized);
        for slot in 0..3 {
            for i in 0..3 {
                for l in 0..3 {
                    let t = f.plan.known(slot, i, l);
                    let e0: f64 = t[..d.subslot0].iter().map(|z| z.norm_sqr()).sum();
                    let e1: f64 = t[d.subslot0..].iter().map(|z| z.norm_sqr()).sum();
                    assert!((e0 - d.subslot0 as f64).abs() < 1e-12);
                    assert!((e1 - d.subslot1() as f64).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn expectation_matches_average() {
        let d = dims(1, 1, 3, 1, 28);
        let f = fixture(10, d, ProbingMode::Randomized);
        let hb = LinkGains::compute(&f.vc, &f.bs, &f.ue, f.plan.subcarriers(), &d).unwrap();
        let mut hj = hb.clone();
        hj.gains.iter_mut().enumerate().for_each(|(n, g)| *g *= Complex64::from_polar(0.8, n as f64));
        let jam = JammerProfile::new(1.3, 0.5).unwrap();
        let expect = expected_power_vector(&hb, &hj, &f.plan, 1.0, &jam, 0.2).unwrap().0[0];
        let n = 10_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for trial in 0..n {
            let draws = BeaconDraws::from_seed(&d, 50_000 + trial);
            let rx = synthesize_from_gains(&hb, &hj, &f.plan, 1.0, &jam, 0.2, &draws).unwrap();
            let p = power_vector(&rx).unwrap().0[0];
            sum += p;
            sq += p * p;
        }
        let mean = sum / n as f64;
        let se = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - expect).abs() < 4.0 * se, "{mean} {expect} {se}");
    }

    #[test]
    fn partition_reassembles_block() {
        let d = dims(1, 1, 1, 1, 9);
        let samples: Vec<Complex64> = (0..9).map(|n| Complex64::new(n as f64, 0.0)).collect();
        let rx = BeaconRx::new(d, ProbingMode::Randomized, combs(&d), samples.clone()).unwrap();
        let mut joined = rx.subslot0(0, 0, 0, 0).to_vec();
        joined.extend_from_slice(rx.subslot1(0, 0, 0, 0));
        assert_eq!(joined, samples);
    }

    #[test]
    fn randomized_plan_needs_two_symbols_per_subslot() {
        let d = BeaconDims { subslot0: 1, ..dims(1, 1, 1, 1, 4) };
        let r = ProbingPlan::new(d, combs(&d), ProbingMode::Randomized, 0.5, &mut stream_rng(1, Stream::KnownSymbols));
        assert!(r.is_err());
    }
}
