//! JSON snapshot of the codebooks used by one run, for replay.

use serde::{Deserialize, Serialize};

use crate::codebook::{Codebook, Owner};
use crate::error::{Error, Result};
use crate::harness::Realization;
use crate::config::JammerMode;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Snapshot {
    pub seed: u64,
    pub q: usize,
    pub bs: Codebook,
    #[serde(default)]
    pub jammer: Option<Codebook>,
    pub ue: Codebook,
}

impl Snapshot {
    pub fn from_realization(real: &Realization, mode: Option<JammerMode>) -> Self {
        Self {
            seed: real.seed,
            q: real.q,
            bs: real.bs_codebook.clone(),
            jammer: mode.map(|m| real.jammer_codebook(m).clone()),
            ue: real.ue_codebook.clone(),
        }
    }

    /// Checks every codebook and their mutual consistency.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Snapshot(m.to_string()));
        if !matches!(self.bs.owner, Owner::Bs) || !matches!(self.ue.owner, Owner::Ue) {
            return bad("owner labels do not match their slots");
        }
        self.bs.validate()?;
        self.ue.validate()?;
        if self.bs.slots() != self.q || self.ue.slots() != self.q {
            return bad("slot count differs from q");
        }
        if let Some(j) = &self.jammer {
            let Owner::Jammer(mode) = j.owner else {
                return bad("jammer codebook has a non-jammer owner");
            };
            j.validate()?;
            if j.slots() != self.q {
                return bad("jammer slot count differs from q");
            }
            if mode == JammerMode::CopyBs && j.sets != self.bs.sets {
                return bad("copy-bs jammer differs from the BS codebook");
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
