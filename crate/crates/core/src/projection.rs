//! Orthogonal-complement bases of the known probing vectors.

use num_complex::Complex64;

use crate::error::{ensure_len, Error, Result};
use crate::signal::{BeaconDims, BeaconRx, ProbingPlan};

/// Semi-unitary `S x (S-1)` matrix whose columns span the orthogonal
/// complement of a known vector. Stored column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplementBasis {
    len: usize,
    data: Vec<Complex64>,
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Completes `t / |t|` to an orthonormal basis with one Householder
/// reflection and returns the remaining columns.
///
/// Each column is rotated so its first nonzero entry is real positive.
pub fn build_complement_basis(t: &[Complex64]) -> Result<ComplementBasis> {
    let s = t.len();
    if s < 2 {
        return Err(Error::Precondition("known vector needs at least 2 entries".into()));
    }
    if t.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::NonFinite("known vector"));
    }
    let energy: f64 = t.iter().map(|z| z.norm_sqr()).sum();
    if (energy - s as f64).abs() > 1e-9 * s as f64 {
        return Err(Error::Precondition(format!(
            "known vector energy {energy} differs from its length {s}"
        )));
    }
    let norm = energy.sqrt();
    let q: Vec<Complex64> = t.iter().map(|z| z / norm).collect();
    // w = q + e^{j arg q0} e1 keeps the first entry away from cancellation.
    let phase = if q[0].norm() > 0.0 {
        q[0] / q[0].norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let mut w = q;
    w[0] += phase;
    let wn: f64 = w.iter().map(|z| z.norm_sqr()).sum();
    let scale = 2.0 / wn;

    let mut data = Vec::with_capacity(s * (s - 1));
    for c in 1..s {
        // column c of I - scale w w^H
        let wc = w[c].conj();
        let start = data.len();
        for (r, wr) in w.iter().enumerate() {
            let id = if r == c { 1.0 } else { 0.0 };
            data.push(Complex64::new(id, 0.0) - wr * wc * scale);
        }
        let col = &mut data[start..];
        if let Some(lead) = col.iter().find(|z| z.norm() > 1e-12).copied() {
            let rot = lead.conj() / lead.norm();
            col.iter_mut().for_each(|z| *z *= rot);
        }
    }
    Ok(ComplementBasis { len: s, data })
}

impl ComplementBasis {
    /// Length of the known vector.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn column(&self, c: usize) -> &[Complex64] {
        &self.data[c * self.len..(c + 1) * self.len]
    }

    pub fn entry(&self, r: usize, c: usize) -> Complex64 {
        self.data[c * self.len + r]
    }

    /// `U^H y`.
    pub fn project(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        ensure_len("projected block", self.len, y.len())?;
        Ok((0..self.len - 1)
            .map(|c| {
                self.column(c)
                    .iter()
                    .zip(y)
                    .fold(ZERO, |acc, (u, v)| acc + u.conj() * v)
            })
            .collect())
    }
}

/// Projects one subslot of received data.
pub fn project_subslot(y: &[Complex64], basis: &ComplementBasis) -> Result<Vec<Complex64>> {
    basis.project(y)
}

/// Both subslots of a beacon after projection, `S0 - 1` and `S1 - 1`
/// samples per (tone, chain) block in the beacon's block order.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedRx {
    pub dims: BeaconDims,
    pub subslot0: Vec<Complex64>,
    pub subslot1: Vec<Complex64>,
}

impl ProjectedRx {
    fn block_index(&self, slot: usize, stream: usize, l: usize, chain: usize) -> usize {
        self.dims.tone(slot, stream, l) * self.dims.chains + chain
    }

    pub fn block0(&self, slot: usize, stream: usize, l: usize, chain: usize) -> &[Complex64] {
        let n = self.dims.subslot0 - 1;
        let b = self.block_index(slot, stream, l, chain);
        &self.subslot0[b * n..(b + 1) * n]
    }

    pub fn block1(&self, slot: usize, stream: usize, l: usize, chain: usize) -> &[Complex64] {
        let n = self.dims.subslot1() - 1;
        let b = self.block_index(slot, stream, l, chain);
        &self.subslot1[b * n..(b + 1) * n]
    }
}

/// Removes the known-symbol component from both subslots of every block.
pub fn project_beacon(rx: &BeaconRx, plan: &ProbingPlan) -> Result<ProjectedRx> {
    let d = rx.dims;
    if d != *plan.dims() {
        return Err(Error::Precondition("beacon and probing plan shapes differ".into()));
    }
    if d.subslot0 < 2 || d.subslot1() < 2 {
        return Err(Error::Precondition(
            "projection needs at least 2 symbols per subslot".into(),
        ));
    }
    let mut out0 = Vec::with_capacity(d.tones() * d.chains * (d.subslot0 - 1));
    let mut out1 = Vec::with_capacity(d.tones() * d.chains * (d.subslot1() - 1));
    for slot in 0..d.slots {
        for i in 0..d.streams {
            for l in 0..d.per_stream {
                let t = plan.known(slot, i, l);
                let u0 = build_complement_basis(&t[..d.subslot0])?;
                let u1 = build_complement_basis(&t[d.subslot0..])?;
                for j in 0..d.chains {
                    out0.extend(u0.project(rx.subslot0(slot, i, l, j))?);
                    out1.extend(u1.project(rx.subslot1(slot, i, l, j))?);
                }
            }
        }
    }
    Ok(ProjectedRx {
        dims: d,
        subslot0: out0,
        subslot1: out1,
    })
}
