//! Lawson-Hanson active-set solver for non-negative least squares.
//!
//! The solver works on the normal equations `A^T A` and `A^T b`, growing a
//! Cholesky factor of the passive-set Gram matrix one column at a time.
//! Callers with structured operators can hand over the normal equations
//! directly.

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_len, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NnlsOptions {
    /// KKT tolerance relative to `max |A^T b|`.
    pub rel_tol: f64,
    /// Iteration cap; `None` selects three times the number of unknowns.
    pub max_iter: Option<usize>,
}

impl Default for NnlsOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            max_iter: None,
        }
    }
}

/// `min ||b - A x||` subject to `x >= 0`.
#[derive(Clone, Debug)]
pub struct NnlsProblem {
    a: DMatrix<f64>,
    b: DVector<f64>,
    opts: NnlsOptions,
}

impl NnlsProblem {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        Self::with_options(a, b, NnlsOptions::default())
    }

    pub fn with_options(a: DMatrix<f64>, b: DVector<f64>, opts: NnlsOptions) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::Precondition("NNLS needs a non-empty matrix".into()));
        }
        ensure_len("NNLS target", a.nrows(), b.len())?;
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("NNLS input"));
        }
        check_options(&opts)?;
        Ok(Self { a, b, opts })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }
}

fn check_options(opts: &NnlsOptions) -> Result<()> {
    if !(opts.rel_tol.is_finite() && opts.rel_tol > 0.0) {
        return Err(Error::InvalidConfig("NNLS tolerance must be positive".into()));
    }
    Ok(())
}

/// Normal equations `A^T A x = A^T b` together with `b^T b`.
#[derive(Clone, Debug)]
pub struct NormalEquations {
    gram: DMatrix<f64>,
    atb: DVector<f64>,
    btb: f64,
}

impl NormalEquations {
    pub fn new(gram: DMatrix<f64>, atb: DVector<f64>, btb: f64) -> Result<Self> {
        if gram.nrows() == 0 || gram.nrows() != gram.ncols() {
            return Err(Error::Precondition("Gram matrix must be square and non-empty".into()));
        }
        ensure_len("A^T b", gram.nrows(), atb.len())?;
        if gram.iter().chain(atb.iter()).any(|v| !v.is_finite()) || !btb.is_finite() {
            return Err(Error::NonFinite("normal equations"));
        }
        Ok(Self { gram, atb, btb })
    }

    pub fn from_dense(a: &DMatrix<f64>, b: &DVector<f64>) -> Self {
        Self {
            gram: a.tr_mul(a),
            atb: a.tr_mul(b),
            btb: b.norm_squared(),
        }
    }

    pub fn dim(&self) -> usize {
        self.atb.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NnlsSolution {
    pub x: Vec<f64>,
    pub residual_norm: f64,
    /// Indices with positive entries, ascending.
    pub passive: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    /// Largest violation of the KKT conditions at `x`.
    pub kkt_violation: f64,
    /// Absolute KKT tolerance used.
    pub tolerance: f64,
}

pub fn solve(p: &NnlsProblem) -> Result<NnlsSolution> {
    let ne = NormalEquations::from_dense(&p.a, &p.b);
    let mut sol = solve_normal(&ne, &p.opts)?;
    let x = DVector::from_column_slice(&sol.x);
    sol.residual_norm = (&p.b - &p.a * x).norm();
    Ok(sol)
}

/// Incrementally maintained Cholesky factor of a passive-set Gram matrix.
struct Factor {
    /// Row-major lower triangle, row `r` has `r + 1` entries.
    rows: Vec<Vec<f64>>,
}

const PIVOT_REL: f64 = 1e-11;

impl Factor {
    fn new() -> Self {
        Self { rows: Vec::new() }
    }

    fn forward(&self, rhs: &mut [f64]) {
        for r in 0..rhs.len() {
            let row = &self.rows[r];
            let mut v = rhs[r];
            for c in 0..r {
                v -= row[c] * rhs[c];
            }
            rhs[r] = v / row[r];
        }
    }

    fn backward(&self, rhs: &mut [f64]) {
        for r in (0..rhs.len()).rev() {
            let mut v = rhs[r];
            for (c, rc) in rhs.iter().enumerate().skip(r + 1) {
                v -= self.rows[c][r] * rc;
            }
            rhs[r] = v / self.rows[r][r];
        }
    }

    /// Appends column `t`; refuses columns numerically dependent on the set.
    fn push(&mut self, gram: &DMatrix<f64>, set: &[usize], t: usize) -> bool {
        let mut l: Vec<f64> = set.iter().map(|&p| gram[(p, t)]).collect();
        self.forward(&mut l);
        let diag = gram[(t, t)] - l.iter().map(|v| v * v).sum::<f64>();
        if !(diag > PIVOT_REL * gram[(t, t)]) {
            return false;
        }
        l.push(diag.sqrt());
        self.rows.push(l);
        true
    }

    fn pop(&mut self) {
        self.rows.pop();
    }

    fn rebuild(gram: &DMatrix<f64>, set: &[usize]) -> Option<Self> {
        let mut f = Self::new();
        for (k, &t) in set.iter().enumerate() {
            if !f.push(gram, &set[..k], t) {
                return None;
            }
        }
        Some(f)
    }

    /// Solves the passive subproblem with one step of iterative refinement.
    fn solve(&self, gram: &DMatrix<f64>, set: &[usize], rhs: &[f64]) -> Vec<f64> {
        let mut z = rhs.to_vec();
        self.forward(&mut z);
        self.backward(&mut z);
        let mut r: Vec<f64> = set
            .iter()
            .zip(rhs)
            .map(|(&a, &v)| v - set.iter().zip(&z).map(|(&b, zb)| gram[(a, b)] * zb).sum::<f64>())
            .collect();
        self.forward(&mut r);
        self.backward(&mut r);
        z.iter_mut().zip(&r).for_each(|(a, d)| *a += d);
        z
    }
}

fn gradient(ne: &NormalEquations, x: &[f64], support: &[usize]) -> Vec<f64> {
    let mut w = ne.atb.as_slice().to_vec();
    for &p in support {
        let xp = x[p];
        for (wi, g) in w.iter_mut().zip(ne.gram.column(p).iter()) {
            *wi -= g * xp;
        }
    }
    w
}

/// Lawson-Hanson iterations on precomputed normal equations.
///
/// Hitting the iteration cap returns the current iterate with
/// `converged == false`.
pub fn solve_normal(ne: &NormalEquations, opts: &NnlsOptions) -> Result<NnlsSolution> {
    check_options(opts)?;
    let n = ne.dim();
    let max_iter = opts.max_iter.unwrap_or(3 * n);
    let tol = opts.rel_tol * ne.atb.amax();
    let gram = &ne.gram;
    let atb = ne.atb.as_slice();

    let pinned: Vec<bool> = (0..n).map(|j| !(gram[(j, j)] > 0.0)).collect();
    let mut x = vec![0.0; n];
    let mut set: Vec<usize> = Vec::new();
    let mut in_set = vec![false; n];
    let mut rejected = vec![false; n];
    let mut factor = Factor::new();
    let mut w = atb.to_vec();
    let mut iterations = 0;
    let mut capped = false;

    'outer: loop {
        let mut pick = None;
        let mut best = tol;
        for j in 0..n {
            if !in_set[j] && !pinned[j] && !rejected[j] && w[j] > best {
                best = w[j];
                pick = Some(j);
            }
        }
        let Some(t) = pick else { break };
        if iterations >= max_iter {
            capped = true;
            break;
        }
        iterations += 1;
        if !factor.push(gram, &set, t) {
            rejected[t] = true;
            continue;
        }
        set.push(t);
        in_set[t] = true;

        let mut first = true;
        loop {
            let rhs: Vec<f64> = set.iter().map(|&p| atb[p]).collect();
            let z = factor.solve(gram, &set, &rhs);
            if z.iter().all(|&v| v > 0.0) {
                for (&p, &v) in set.iter().zip(&z) {
                    x[p] = v;
                }
                break;
            }
            if first && z[z.len() - 1] <= 0.0 {
                // Rounding made the entering variable non-positive; the
                // iterate is unchanged, so try another candidate.
                set.pop();
                in_set[t] = false;
                factor.pop();
                rejected[t] = true;
                continue 'outer;
            }
            first = false;
            let mut alpha = f64::INFINITY;
            let mut blocking = 0;
            for (k, (&p, &v)) in set.iter().zip(&z).enumerate() {
                if v <= 0.0 {
                    let a = x[p] / (x[p] - v);
                    if a < alpha {
                        alpha = a;
                        blocking = k;
                    }
                }
            }
            for (k, (&p, &v)) in set.iter().zip(&z).enumerate() {
                x[p] = if k == blocking { 0.0 } else { x[p] + alpha * (v - x[p]) };
            }
            set.retain(|&p| {
                let keep = x[p] > 0.0;
                if !keep {
                    x[p] = 0.0;
                    in_set[p] = false;
                }
                keep
            });
            factor = match Factor::rebuild(gram, &set) {
                Some(f) => f,
                None => {
                    return Err(Error::Precondition(
                        "passive set became numerically singular".into(),
                    ))
                }
            };
            if iterations >= max_iter {
                capped = true;
                break 'outer;
            }
            iterations += 1;
        }
        rejected.iter_mut().for_each(|r| *r = false);
        w = gradient(ne, &x, &set);
    }

    let mut passive: Vec<usize> = (0..n).filter(|&j| x[j] > 0.0).collect();
    passive.sort_unstable();
    let w = gradient(ne, &x, &passive);
    let kkt_violation = (0..n)
        .filter(|&j| !pinned[j])
        .map(|j| if x[j] > 0.0 { w[j].abs() } else { w[j].max(0.0) })
        .fold(0.0, f64::max);
    // ||b - Ax||^2 = b^T b - 2 x^T A^T b + x^T G x = b^T b - x^T (A^T b + w)
    let quad: f64 = passive.iter().map(|&j| x[j] * (atb[j] + w[j])).sum();
    let residual_norm = (ne.btb - quad).max(0.0).sqrt();
    Ok(NnlsSolution {
        x,
        residual_norm,
        passive,
        iterations,
        converged: !capped && kkt_violation <= tol,
        kkt_violation,
        tolerance: tol,
    })
}
