//! Scenario configuration.
//!
//! Field defaults reproduce the full-size experiment; [`Scenario::desk`]
//! returns the reduced profile used for quick sweeps and CI.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which transmitter a quantity belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tx {
    Bs,
    Jammer,
}

/// How the jammer chooses its transmit beams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JammerMode {
    /// Independent pseudo-random supports.
    Random,
    /// Full-support beams that radiate in every direction.
    Omnidirectional,
    /// The BS supports, slot by slot.
    CopyBs,
}

impl JammerMode {
    pub const ALL: [JammerMode; 3] = [
        JammerMode::Random,
        JammerMode::Omnidirectional,
        JammerMode::CopyBs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            JammerMode::Random => "random",
            JammerMode::Omnidirectional => "omnidirectional",
            JammerMode::CopyBs => "copy-bs",
        }
    }
}

/// Beam-alignment estimators evaluated by the harness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// NNLS on raw powers with the noise floor subtracted.
    Unaware,
    /// Randomized probing with projection-based jammer cancellation.
    Antijam,
    /// Unaware NNLS with the jammer switched off.
    Reference,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [Estimator::Unaware, Estimator::Antijam, Estimator::Reference];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Unaware => "unaware",
            Estimator::Antijam => "antijam",
            Estimator::Reference => "reference",
        }
    }
}

impl std::str::FromStr for JammerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown jammer mode `{s}`")))
    }
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown estimator `{s}`")))
    }
}

/// Physical-layer and probing parameters shared by every run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// OFDM size F.
    pub subcarriers: usize,
    /// Cyclic prefix length in samples.
    pub cyclic_prefix: usize,
    pub carrier_hz: f64,
    pub sample_rate_hz: f64,
    pub bs_antennas: usize,
    pub jammer_antennas: usize,
    /// Transmit RF chains, identical at BS and jammer.
    pub tx_chains: usize,
    pub ue_antennas: usize,
    pub ue_chains: usize,
    /// Used subcarriers per transmit stream.
    pub subcarriers_per_stream: usize,
    /// OFDM symbols per beacon slot.
    pub symbols_per_slot: usize,
    /// Length of the first subslot under randomized probing.
    pub subslot0_len: usize,
    pub bs_support: usize,
    pub jammer_support: usize,
    pub ue_support: usize,
    pub bs_paths: usize,
    pub jammer_paths: usize,
    /// Path power profile in dB, one entry per path index.
    pub path_gains_db: Vec<f64>,
    /// Maximum path delay in sampling periods.
    pub max_delay: f64,
    pub tau_slope: f64,
    pub bs_power: f64,
    /// Fraction of BS power moved to the random sequence in subslot 1.
    pub gamma_b: f64,
    /// Per-antenna SNR used to derive the noise variance.
    pub snr_db: f64,
    /// Explicit noise variance, overriding `snr_db`.
    pub noise_var: Option<f64>,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            subcarriers: 2048,
            cyclic_prefix: 128,
            carrier_hz: 70e9,
            sample_rate_hz: 1e9,
            bs_antennas: 32,
            jammer_antennas: 32,
            tx_chains: 3,
            ue_antennas: 32,
            ue_chains: 2,
            subcarriers_per_stream: 3,
            symbols_per_slot: 28,
            subslot0_len: 14,
            bs_support: 4,
            jammer_support: 4,
            ue_support: 4,
            bs_paths: 2,
            jammer_paths: 2,
            path_gains_db: vec![0.0, -3.0],
            max_delay: 3.0,
            tau_slope: 2.0,
            bs_power: 1.0,
            gamma_b: 0.5,
            snr_db: 10.0,
            noise_var: None,
        }
    }
}

impl SystemConfig {
    /// Reduced array and FFT sizes for desk-scale runs.
    pub fn desk() -> Self {
        Self {
            subcarriers: 256,
            cyclic_prefix: 16,
            bs_antennas: 16,
            jammer_antennas: 16,
            ue_antennas: 16,
            ..Self::default()
        }
    }

    pub fn subslot1_len(&self) -> usize {
        self.symbols_per_slot.saturating_sub(self.subslot0_len)
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
            .unwrap_or_else(|| self.bs_power / 10f64.powf(self.snr_db / 10.0))
    }

    /// Jammer power for a signal-to-jamming ratio in dB.
    pub fn jammer_power(&self, sjr_db: f64) -> f64 {
        self.bs_power / 10f64.powf(sjr_db / 10.0)
    }

    pub fn antennas(&self, tx: Tx) -> usize {
        match tx {
            Tx::Bs => self.bs_antennas,
            Tx::Jammer => self.jammer_antennas,
        }
    }

    pub fn paths(&self, tx: Tx) -> usize {
        match tx {
            Tx::Bs => self.bs_paths,
            Tx::Jammer => self.jammer_paths,
        }
    }

    /// Linear path-power profile for one transmitter.
    pub fn path_variances(&self, tx: Tx) -> Vec<f64> {
        self.path_gains_db
            .iter()
            .take(self.paths(tx))
            .map(|db| 10f64.powf(db / 10.0))
            .collect()
    }

    /// Used subcarriers of each transmit stream.
    ///
    /// Streams interleave on one evenly spaced comb: the `l`-th subcarrier
    /// of stream `i` is `(l * streams + i) * spacing`.
    pub fn subcarrier_sets(&self) -> Vec<Vec<usize>> {
        subcarrier_sets(self.subcarriers, self.tx_chains, self.subcarriers_per_stream)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let positive = [
            ("subcarriers", self.subcarriers),
            ("bs_antennas", self.bs_antennas),
            ("jammer_antennas", self.jammer_antennas),
            ("tx_chains", self.tx_chains),
            ("ue_antennas", self.ue_antennas),
            ("ue_chains", self.ue_chains),
            ("subcarriers_per_stream", self.subcarriers_per_stream),
            ("symbols_per_slot", self.symbols_per_slot),
            ("bs_support", self.bs_support),
            ("jammer_support", self.jammer_support),
            ("ue_support", self.ue_support),
            ("bs_paths", self.bs_paths),
            ("jammer_paths", self.jammer_paths),
        ];
        for (name, v) in positive {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.tx_chains * self.subcarriers_per_stream > self.subcarriers {
            return bad(format!(
                "{} streams of {} subcarriers exceed {} subcarriers",
                self.tx_chains, self.subcarriers_per_stream, self.subcarriers
            ));
        }
        if self.subslot0_len > self.symbols_per_slot {
            return bad("subslot0_len exceeds symbols_per_slot".into());
        }
        if self.bs_support > self.bs_antennas {
            return bad("bs_support exceeds bs_antennas".into());
        }
        if self.jammer_support > self.jammer_antennas {
            return bad("jammer_support exceeds jammer_antennas".into());
        }
        if self.ue_support > self.ue_antennas {
            return bad("ue_support exceeds ue_antennas".into());
        }
        let needed = self.bs_paths.max(self.jammer_paths);
        if self.path_gains_db.len() < needed {
            return bad(format!(
                "path_gains_db has {} entries, {needed} paths configured",
                self.path_gains_db.len()
            ));
        }
        if self.path_gains_db.iter().any(|g| !g.is_finite()) {
            return bad("path_gains_db must be finite".into());
        }
        if !(self.max_delay.is_finite() && self.max_delay > 0.0) {
            return bad("max_delay must be positive".into());
        }
        if !(self.tau_slope.is_finite() && self.tau_slope > 0.0) {
            return bad("tau_slope must be positive".into());
        }
        if !(self.bs_power.is_finite() && self.bs_power >= 0.0) {
            return bad("bs_power must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.gamma_b) {
            return bad("gamma_b must lie in [0, 1]".into());
        }
        if !self.snr_db.is_finite() {
            return bad("snr_db must be finite".into());
        }
        if let Some(v) = self.noise_var {
            if !(v.is_finite() && v >= 0.0) {
                return bad("noise_var must be non-negative".into());
            }
        }
        for (name, v) in [("carrier_hz", self.carrier_hz), ("sample_rate_hz", self.sample_rate_hz)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive"));
            }
        }
        Ok(())
    }
}

pub fn subcarrier_sets(fft_len: usize, streams: usize, per_stream: usize) -> Vec<Vec<usize>> {
    let total = streams * per_stream;
    let spacing = if total == 0 { 0 } else { fft_len / total };
    (0..streams)
        .map(|i| (0..per_stream).map(|l| (l * streams + i) * spacing).collect())
        .collect()
}

/// Grids swept by the harness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub q: Vec<usize>,
    pub sjr_db: Vec<f64>,
    pub jammer_modes: Vec<JammerMode>,
    pub gamma_j: Vec<f64>,
    pub estimators: Vec<Estimator>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            q: vec![10, 20, 40, 60, 80, 100],
            sjr_db: vec![-5.0, 0.0, 5.0],
            jammer_modes: JammerMode::ALL.to_vec(),
            gamma_j: vec![0.0, 0.5, 1.0],
            estimators: Estimator::ALL.to_vec(),
        }
    }
}

/// Complete description of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub system: SystemConfig,
    pub sweep: SweepGrid,
    pub seed: u64,
    pub runs: usize,
    /// Channel draws used to approximate ensemble beamspace powers.
    pub ensemble_draws: usize,
    /// Random supports tried by the nullspace probe.
    pub nullspace_trials: usize,
    /// Sparsity order of the nullspace probe; zero selects twice the BS path count.
    pub nullspace_order: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            system: SystemConfig::default(),
            sweep: SweepGrid::default(),
            seed: 1,
            runs: 1000,
            ensemble_draws: 200,
            nullspace_trials: 200,
            nullspace_order: 0,
        }
    }
}

impl Scenario {
    pub fn desk() -> Self {
        Self {
            system: SystemConfig::desk(),
            runs: 200,
            ..Self::default()
        }
    }

    pub fn nullspace_order(&self) -> usize {
        if self.nullspace_order == 0 {
            2 * self.system.bs_paths
        } else {
            self.nullspace_order
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.runs == 0 {
            return bad("runs must be positive");
        }
        let g = &self.sweep;
        if g.q.is_empty()
            || g.sjr_db.is_empty()
            || g.jammer_modes.is_empty()
            || g.gamma_j.is_empty()
            || g.estimators.is_empty()
        {
            return bad("sweep grids must be non-empty");
        }
        if g.q.contains(&0) {
            return bad("q values must be positive");
        }
        if g.sjr_db.iter().any(|s| !s.is_finite()) {
            return bad("sjr_db values must be finite");
        }
        if g.gamma_j.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return bad("gamma_j values must lie in [0, 1]");
        }
        if g.jammer_modes.contains(&JammerMode::CopyBs)
            && self.system.jammer_antennas != self.system.bs_antennas
        {
            return bad("copy-bs jamming needs as many jammer antennas as BS antennas");
        }
        if g.estimators.contains(&Estimator::Antijam) {
            let s = &self.system;
            if s.subslot0_len < 2 || s.subslot1_len() < 2 {
                return bad("anti-jam estimation needs both subslots to hold at least 2 symbols");
            }
            if s.gamma_b <= 0.0 {
                return bad("anti-jam estimation needs gamma_b > 0");
            }
        }
        if self.ensemble_draws == 0 || self.nullspace_trials == 0 {
            return bad("ensemble_draws and nullspace_trials must be positive");
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    /// Loads a `.json` or `.toml` file, choosing the parser by extension.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => Self::from_json_str(&text),
            Some(ext) if ext.eq_ignore_ascii_case("toml") => Self::from_toml_str(&text),
            _ => Err(Error::InvalidConfig(format!(
                "{}: expected a .json or .toml extension",
                path.display()
            ))),
        }
    }
}
