//! Pseudo-random angular-support codebooks and measurement matrices.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{JammerMode, SystemConfig};
use crate::error::{ensure_len, Error, Result};

/// Who uses a codebook.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Owner {
    Bs,
    Jammer(JammerMode),
    Ue,
}

/// Sizes of a codebook.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CodebookParams {
    pub antennas: usize,
    pub chains: usize,
    pub support: usize,
    pub slots: usize,
}

impl CodebookParams {
    pub fn for_owner(sys: &SystemConfig, owner: Owner, slots: usize) -> Self {
        match owner {
            Owner::Bs => Self {
                antennas: sys.bs_antennas,
                chains: sys.tx_chains,
                support: sys.bs_support,
                slots,
            },
            Owner::Jammer(_) => Self {
                antennas: sys.jammer_antennas,
                chains: sys.tx_chains,
                support: sys.jammer_support,
                slots,
            },
            Owner::Ue => Self {
                antennas: sys.ue_antennas,
                chains: sys.ue_chains,
                support: sys.ue_support,
                slots,
            },
        }
    }
}

/// Support sets per beacon slot and RF chain.
///
/// Indices are zero-based beamspace bins, sorted ascending. Each beam puts
/// weight `1/sqrt(support)` on its bins.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Codebook {
    pub owner: Owner,
    pub antennas: usize,
    pub support: usize,
    /// `sets[slot][chain]`.
    pub sets: Vec<Vec<Vec<usize>>>,
}

pub fn gen_codebook<R: Rng + ?Sized>(
    owner: Owner,
    params: &CodebookParams,
    rng: &mut R,
    bs: Option<&Codebook>,
) -> Result<Codebook> {
    let p = params;
    if p.antennas == 0 || p.chains == 0 || p.slots == 0 {
        return Err(Error::InvalidConfig("codebook sizes must be positive".into()));
    }
    match owner {
        Owner::Jammer(JammerMode::Omnidirectional) => {
            let all: Vec<usize> = (0..p.antennas).collect();
            Ok(Codebook {
                owner,
                antennas: p.antennas,
                support: p.antennas,
                sets: vec![vec![all; p.chains]; p.slots],
            })
        }
        Owner::Jammer(JammerMode::CopyBs) => {
            let bs = bs.ok_or_else(|| {
                Error::InvalidConfig("copy-bs jamming needs the BS codebook".into())
            })?;
            if bs.antennas != p.antennas {
                return Err(Error::InvalidConfig(format!(
                    "copy-bs jamming needs {} jammer antennas, got {}",
                    bs.antennas, p.antennas
                )));
            }
            if bs.slots() != p.slots || bs.chains() != p.chains {
                return Err(Error::InvalidConfig(
                    "BS codebook shape differs from the jammer's".into(),
                ));
            }
            Ok(Codebook {
                owner,
                ..bs.clone()
            })
        }
        _ => {
            if p.support == 0 || p.support > p.antennas {
                return Err(Error::InvalidConfig(format!(
                    "support {} must lie in 1..={}",
                    p.support, p.antennas
                )));
            }
            let sets = (0..p.slots)
                .map(|_| {
                    (0..p.chains)
                        .map(|_| {
                            let mut s = sample(rng, p.antennas, p.support).into_vec();
                            s.sort_unstable();
                            s
                        })
                        .collect()
                })
                .collect();
            Ok(Codebook {
                owner,
                antennas: p.antennas,
                support: p.support,
                sets,
            })
        }
    }
}

impl Codebook {
    pub fn slots(&self) -> usize {
        self.sets.len()
    }

    pub fn chains(&self) -> usize {
        self.sets.first().map_or(0, Vec::len)
    }

    pub fn support_set(&self, slot: usize, chain: usize) -> &[usize] {
        &self.sets[slot][chain]
    }

    /// Dense beamspace beam `1_S / sqrt(|S|)`.
    pub fn beam(&self, slot: usize, chain: usize) -> Vec<f64> {
        let set = self.support_set(slot, chain);
        let w = 1.0 / (set.len() as f64).sqrt();
        let mut v = vec![0.0; self.antennas];
        for &m in set {
            v[m] = w;
        }
        v
    }

    /// Checks structural invariants, e.g. after deserialization.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Snapshot(m));
        if self.antennas == 0 || self.support == 0 || self.support > self.antennas {
            return bad(format!(
                "support {} incompatible with {} antennas",
                self.support, self.antennas
            ));
        }
        if self.sets.is_empty() || self.chains() == 0 {
            return bad("codebook has no beams".into());
        }
        let chains = self.chains();
        for (s, slot) in self.sets.iter().enumerate() {
            if slot.len() != chains {
                return bad(format!("slot {s} has {} chains, expected {chains}", slot.len()));
            }
            for set in slot {
                if set.len() != self.support {
                    return bad(format!("slot {s}: support of size {}", set.len()));
                }
                if set.windows(2).any(|w| w[0] >= w[1]) {
                    return bad(format!("slot {s}: support not strictly increasing"));
                }
                if set.last().is_some_and(|&m| m >= self.antennas) {
                    return bad(format!("slot {s}: index out of range"));
                }
            }
        }
        if let Owner::Jammer(JammerMode::Omnidirectional) = self.owner {
            if self.support != self.antennas {
                return bad("omnidirectional beams must cover every bin".into());
            }
        }
        Ok(())
    }
}

/// Stacked beam-pair measurement operator.
///
/// Row `(slot * tx_chains + i) * ue_chains + j` averages the beamspace
/// powers over the product of the two support sets. Column `n + N * m`
/// holds receive bin `n` and transmit bin `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementMatrix {
    ncols: usize,
    weight: f64,
    rows: Vec<Vec<usize>>,
}

pub fn build_g(tx: &Codebook, ue: &Codebook) -> Result<MeasurementMatrix> {
    ensure_len("beacon slots", tx.slots(), ue.slots())?;
    let n = ue.antennas;
    let mut rows = Vec::with_capacity(tx.slots() * tx.chains() * ue.chains());
    for slot in 0..tx.slots() {
        for i in 0..tx.chains() {
            let us = tx.support_set(slot, i);
            for j in 0..ue.chains() {
                let vs = ue.support_set(slot, j);
                let mut cols = Vec::with_capacity(us.len() * vs.len());
                for &m in us {
                    for &r in vs {
                        cols.push(r + n * m);
                    }
                }
                rows.push(cols);
            }
        }
    }
    Ok(MeasurementMatrix {
        ncols: tx.antennas * n,
        weight: 1.0 / (tx.support * ue.support) as f64,
        rows,
    })
}

impl MeasurementMatrix {
    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// Value of every nonzero entry.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Sorted column indices of the nonzeros in row `r`.
    pub fn row_support(&self, r: usize) -> &[usize] {
        &self.rows[r]
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.nrows(), self.ncols);
        for (r, cols) in self.rows.iter().enumerate() {
            for &c in cols {
                a[(r, c)] = self.weight;
            }
        }
        a
    }

    pub fn mul(&self, x: &[f64]) -> Result<Vec<f64>> {
        ensure_len("measurement operand", self.ncols, x.len())?;
        Ok(self
            .rows
            .iter()
            .map(|cols| self.weight * cols.iter().map(|&c| x[c]).sum::<f64>())
            .collect())
    }

    pub fn tr_mul(&self, b: &[f64]) -> Result<DVector<f64>> {
        ensure_len("measurement target", self.nrows(), b.len())?;
        let mut out = DVector::zeros(self.ncols);
        for (cols, &v) in self.rows.iter().zip(b) {
            for &c in cols {
                out[c] += self.weight * v;
            }
        }
        Ok(out)
    }

    /// `G^T G`, accumulated row by row from the sparse structure.
    pub fn gram(&self) -> DMatrix<f64> {
        let w2 = self.weight * self.weight;
        let mut g = DMatrix::zeros(self.ncols, self.ncols);
        for cols in &self.rows {
            for &a in cols {
                for &b in cols {
                    g[(a, b)] += w2;
                }
            }
        }
        g
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.ncols];
        for cols in &self.rows {
            for &c in cols {
                s[c] += self.weight;
            }
        }
        s
    }
}
