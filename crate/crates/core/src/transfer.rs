//! Discretized transfer operators and their leading spectral data.
//!
//! States are admissible words of length `d` (the potential depth). Row `s`,
//! column `s'` of the kernel is nonzero only when `s' = a s_0 .. s_{d-2}`, so
//! `(L f)(s) = sum_{s'} K[s, s'] f(s')` is the Ruelle operator restricted to
//! depth-`d` cylinder functions.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::alphabet::{check_mixing, enumerate_words, AlphabetSpec, TransitionFn, WordConstraint, DEFAULT_WORD_CAP};
use crate::error::{Error, Result};
use crate::observable::Observable;
use crate::potential::{word_index, PotentialVec};

/// Largest boolean power tried when verifying mixing.
pub const DEFAULT_MIXING_POWER: usize = 64;

/// State count up to which the full spectrum is computed.
pub const DENSE_LIMIT: usize = 512;

/// Admissible depth-`d` words and their shift structure.
#[derive(Debug)]
pub struct StateSpace {
    node_count: usize,
    depth: usize,
    words: Vec<Vec<usize>>,
    index: Vec<usize>,
    /// `preds[s]` lists `(a, s')` with `s' = a s_0 .. s_{d-2}` admissible.
    preds: Vec<Vec<(usize, usize)>>,
}

impl StateSpace {
    fn new(transition: &TransitionFn, depth: usize) -> Result<Self> {
        let m = transition.size();
        let total = m
            .checked_pow(depth as u32)
            .filter(|&t| t <= DEFAULT_WORD_CAP)
            .ok_or(Error::CapExceeded {
                what: "state words",
                needed: usize::MAX,
                cap: DEFAULT_WORD_CAP,
            })?;
        let words = enumerate_words(transition, depth, WordConstraint::Free, DEFAULT_WORD_CAP)?.words;
        let mut index = vec![usize::MAX; total];
        for (i, w) in words.iter().enumerate() {
            index[word_index(w, m)] = i;
        }
        let preds = words
            .iter()
            .map(|s| {
                (0..m)
                    .filter(|&a| transition.allows(a, s[0]))
                    .map(|a| {
                        let mut sp = Vec::with_capacity(depth);
                        sp.push(a);
                        sp.extend_from_slice(&s[..depth - 1]);
                        (a, index[word_index(&sp, m)])
                    })
                    .collect()
            })
            .collect();
        Ok(StateSpace {
            node_count: m,
            depth,
            words,
            index,
            preds,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn words(&self) -> &[Vec<usize>] {
        &self.words
    }

    /// State index of the prefix of `word`, if admissible.
    pub fn state_of(&self, word: &[usize]) -> Option<usize> {
        let i = self.index[word_index(&word[..self.depth], self.node_count)];
        (i != usize::MAX).then_some(i)
    }
}

/// Alphabet, transition function and potential vector with a verified mixing time.
#[derive(Debug, Clone)]
pub struct Model {
    alphabet: AlphabetSpec,
    transition: TransitionFn,
    potential: PotentialVec,
    states: Arc<StateSpace>,
}

impl Model {
    pub fn new(alphabet: AlphabetSpec, transition: TransitionFn, potential: PotentialVec) -> Result<Self> {
        if transition.size() != alphabet.len() {
            return Err(Error::DimensionMismatch {
                expected: alphabet.len(),
                got: transition.size(),
            });
        }
        if potential.node_count() != alphabet.len() {
            return Err(Error::DimensionMismatch {
                expected: alphabet.len(),
                got: potential.node_count(),
            });
        }
        if alphabet.is_circle() && !transition.is_full() {
            return Err(Error::invalid("constrained transitions are only supported on finite alphabets"));
        }
        let transition = match transition.mixing_time() {
            Some(_) => transition,
            None => transition.with_verified_mixing(DEFAULT_MIXING_POWER)?,
        };
        let states = Arc::new(StateSpace::new(&transition, potential.depth())?);
        Ok(Model {
            alphabet,
            transition,
            potential,
            states,
        })
    }

    pub fn alphabet(&self) -> &AlphabetSpec {
        &self.alphabet
    }

    pub fn transition(&self) -> &TransitionFn {
        &self.transition
    }

    pub fn potential(&self) -> &PotentialVec {
        &self.potential
    }

    pub fn states(&self) -> &StateSpace {
        &self.states
    }

    pub fn q(&self) -> usize {
        self.potential.q()
    }

    /// Assembles `L_{t . psi}` on the state space.
    pub fn operator(&self, t: &[f64]) -> Result<DiscretizedTransfer> {
        let q = self.potential.q();
        if t.len() != q {
            return Err(Error::DimensionMismatch { expected: q, got: t.len() });
        }
        if t.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("non-finite t"));
        }
        let st = &self.states;
        let n = st.len();
        let tpsi: Vec<f64> = st
            .words
            .iter()
            .map(|w| dot(t, self.potential.at_word(w)))
            .collect();
        let shift = tpsi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let rank_one = st.depth == 1 && self.transition.is_full();
        let kernel = if rank_one {
            Kernel::RankOne(
                (0..n)
                    .map(|a| self.alphabet.weight(a) * (tpsi[a] - shift).exp())
                    .collect(),
            )
        } else {
            let mut k = DMatrix::<f64>::zeros(n, n);
            for (s, preds) in st.preds.iter().enumerate() {
                for &(a, sp) in preds {
                    k[(s, sp)] = self.alphabet.weight(a) * (tpsi[sp] - shift).exp();
                }
            }
            Kernel::Dense(k)
        };
        Ok(DiscretizedTransfer {
            states: Arc::clone(&self.states),
            kernel,
            log_shift: shift,
            t: t.to_vec(),
            coords: (0..self.alphabet.len()).map(|z| self.alphabet.coordinate(z)).collect(),
        })
    }
}

/// Builds the operator for `t . psi` from loose parts, verifying mixing.
pub fn assemble_operator(
    alphabet: &AlphabetSpec,
    transition: &TransitionFn,
    psi: &PotentialVec,
    t: &[f64],
) -> Result<DiscretizedTransfer> {
    Model::new(alphabet.clone(), transition.clone(), psi.clone())?.operator(t)
}

/// Dense kernel of a discretized transfer operator.
///
/// The stored kernel is `K e^{-log_shift}`; reported radii undo the shift.
#[derive(Debug, Clone)]
pub struct DiscretizedTransfer {
    states: Arc<StateSpace>,
    kernel: Kernel,
    log_shift: f64,
    t: Vec<f64>,
    coords: Vec<f64>,
}

/// Depth-1 operators with full transitions have identical rows; only one is stored.
#[derive(Debug, Clone)]
enum Kernel {
    RankOne(Vec<f64>),
    Dense(DMatrix<f64>),
}

impl DiscretizedTransfer {
    pub fn states(&self) -> &StateSpace {
        &self.states
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Unshifted kernel as a dense matrix.
    pub fn kernel(&self) -> DMatrix<f64> {
        self.scaled_kernel() * self.log_shift.exp()
    }

    /// Dense kernel scaled by `e^{-log_shift}`.
    pub fn scaled_kernel(&self) -> DMatrix<f64> {
        match &self.kernel {
            Kernel::RankOne(row) => {
                let n = row.len();
                DMatrix::from_fn(n, n, |_, j| row[j])
            }
            Kernel::Dense(k) => k.clone(),
        }
    }

    /// Scaled entry `K[s, s'] e^{-log_shift}`.
    pub fn entry(&self, s: usize, sp: usize) -> f64 {
        match &self.kernel {
            Kernel::RankOne(row) => row[sp],
            Kernel::Dense(k) => k[(s, sp)],
        }
    }

    /// Scaled action `x -> K x e^{-log_shift}`.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.kernel {
            Kernel::RankOne(row) => {
                let v: f64 = row.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
                DVector::from_element(row.len(), v)
            }
            Kernel::Dense(k) => k * x,
        }
    }

    pub fn log_shift(&self) -> f64 {
        self.log_shift
    }

    /// True when every row is the same (depth 1, full transitions).
    pub fn is_rank_one(&self) -> bool {
        matches!(self.kernel, Kernel::RankOne(_))
    }

    fn state_coords(&self, s: usize) -> Vec<f64> {
        self.states.words[s].iter().map(|&z| self.coords[z]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Relative distance of `|lambda_2|` to `r` below which the leading eigenvalue counts as repeated.
    pub simple_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-12,
            max_iter: 100_000,
            simple_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SpectralData {
    pub r: f64,
    pub logr: f64,
    #[serde(rename = "G")]
    pub g: Vec<f64>,
    pub nu: Vec<f64>,
    pub gap: f64,
    pub lambda2_abs: f64,
    pub iterations: usize,
    /// Whether `gap` comes from the full spectrum.
    pub exact_gap: bool,
}

impl SpectralData {
    /// `mu = G nu`.
    pub fn dgm(&self) -> Vec<f64> {
        self.g.iter().zip(&self.nu).map(|(g, n)| g * n).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spectral data serializes")
    }
}

/// Leading eigenvalue, eigenfunction and eigenmeasure of `op`.
pub fn spectral_solve(op: &DiscretizedTransfer, opts: &SolveOptions) -> Result<SpectralData> {
    let n = op.len();
    let k = match &op.kernel {
        Kernel::RankOne(row) => {
            let rs: f64 = row.iter().sum();
            let g = vec![1.0; n];
            let nu: Vec<f64> = row.iter().map(|x| x / rs).collect();
            return Ok(finish(op, rs, g, nu, 0.0, 0, true));
        }
        Kernel::Dense(k) => k,
    };
    let (rs, g, nu, lambda2, iterations, exact) = if n <= DENSE_LIMIT {
        dense_solve(k, opts)?
    } else {
        iterative_solve(k, opts)?
    };
    if (rs - lambda2) / rs < opts.simple_tol {
        return Err(Error::NonSimpleLeading { ratio: lambda2 / rs });
    }
    Ok(finish(op, rs, g, nu, lambda2, iterations, exact))
}

fn finish(
    op: &DiscretizedTransfer,
    rs: f64,
    mut g: Vec<f64>,
    mut nu: Vec<f64>,
    lambda2: f64,
    iterations: usize,
    exact: bool,
) -> SpectralData {
    let s: f64 = nu.iter().sum();
    nu.iter_mut().for_each(|x| *x /= s);
    let c: f64 = g.iter().zip(&nu).map(|(a, b)| a * b).sum();
    g.iter_mut().for_each(|x| *x /= c);
    let logr = rs.ln() + op.log_shift;
    SpectralData {
        r: logr.exp(),
        logr,
        g,
        nu,
        gap: 1.0 - lambda2 / rs,
        lambda2_abs: lambda2 * op.log_shift.exp(),
        iterations,
        exact_gap: exact,
    }
}

type Solved = (f64, Vec<f64>, Vec<f64>, f64, usize, bool);

fn dense_solve(k: &DMatrix<f64>, opts: &SolveOptions) -> Result<Solved> {
    let n = k.nrows();
    let mut moduli: Vec<f64> = k.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    let r0 = moduli[0];
    let lambda2 = moduli.get(1).copied().unwrap_or(0.0);
    if r0 <= 0.0 {
        return Err(Error::NoConvergence {
            iterations: 0,
            residual: f64::NAN,
        });
    }
    if (r0 - lambda2) / r0 < opts.simple_tol {
        return Err(Error::NonSimpleLeading { ratio: lambda2 / r0 });
    }
    // Inverse iteration with a shift just above the Perron root.
    let sigma = r0 * (1.0 + 1e-9);
    let shifted = k - DMatrix::<f64>::identity(n, n) * sigma;
    let lu = shifted.clone().lu();
    let lut = shifted.transpose().lu();
    let mut g = DVector::from_element(n, 1.0);
    let mut nu = DVector::from_element(n, 1.0);
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < opts.max_iter.max(8) {
        iterations += 1;
        g = lu.solve(&g).ok_or(Error::NoConvergence { iterations, residual })?;
        nu = lut.solve(&nu).ok_or(Error::NoConvergence { iterations, residual })?;
        normalize_positive(&mut g);
        normalize_positive(&mut nu);
        let rg = rayleigh(k, &g, &nu);
        residual = residual_of(k, &g, rg).max(residual_of(&k.transpose(), &nu, rg));
        if residual < opts.tol {
            break;
        }
        if iterations >= 50 {
            return Err(Error::NoConvergence { iterations, residual });
        }
    }
    let rs = rayleigh(k, &g, &nu);
    Ok((rs, clamp_positive(g), clamp_positive(nu), lambda2, iterations, true))
}

fn iterative_solve(k: &DMatrix<f64>, opts: &SolveOptions) -> Result<Solved> {
    let n = k.nrows();
    let kt = k.transpose();
    let g = power(k, opts)?;
    let nu = power(&kt, opts)?;
    let iterations = g.1 + nu.1;
    let (g, nu) = (g.0, nu.0);
    let rs = rayleigh(k, &g, &nu);
    // Deflated power iteration for |lambda_2|.
    let c = nu.dot(&g);
    let mut x = DVector::from_fn(n, |i, _| ((i * 7919 % 104_729) as f64 / 104_729.0) - 0.5);
    let mut log_growth = Vec::new();
    for step in 0..400 {
        let proj = nu.dot(&x) / c;
        x -= &g * proj;
        let y = k * &x;
        let nrm = y.norm();
        if nrm == 0.0 {
            log_growth.clear();
            log_growth.push(f64::NEG_INFINITY);
            break;
        }
        if step >= 200 {
            log_growth.push((nrm / x.norm()).ln());
        }
        x = y / nrm;
    }
    let lambda2 = if log_growth.is_empty() {
        0.0
    } else {
        (log_growth.iter().sum::<f64>() / log_growth.len() as f64).exp()
    };
    Ok((rs, clamp_positive(g), clamp_positive(nu), lambda2, iterations, false))
}

fn power(k: &DMatrix<f64>, opts: &SolveOptions) -> Result<(DVector<f64>, usize)> {
    let n = k.nrows();
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let y = k * &x;
        let lam = y.sum() / x.sum();
        residual = (&y - &x * lam).amax() / (lam * x.amax());
        x = y / lam;
        normalize_positive(&mut x);
        if residual < opts.tol {
            return Ok((x, it));
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

fn normalize_positive(x: &mut DVector<f64>) {
    let s = x.sum();
    *x /= s;
}

fn clamp_positive(x: DVector<f64>) -> Vec<f64> {
    x.iter().map(|v| v.max(0.0)).collect()
}

fn rayleigh(k: &DMatrix<f64>, g: &DVector<f64>, nu: &DVector<f64>) -> f64 {
    nu.dot(&(k * g)) / nu.dot(g)
}

fn residual_of(k: &DMatrix<f64>, x: &DVector<f64>, lam: f64) -> f64 {
    (k * x - x * lam).amax() / (lam * x.amax())
}

/// `(1/n) log (L^n 1)(probe)` with per-step renormalization.
pub fn log_radius_by_iteration(op: &DiscretizedTransfer, n: usize, probe: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::OutOfRange("iteration count must be at least 1".into()));
    }
    if probe >= op.len() {
        return Err(Error::OutOfRange(format!("probe state {probe} out of range")));
    }
    let mut x = DVector::from_element(op.len(), 1.0);
    let mut acc = 0.0;
    for _ in 0..n {
        x = op.apply(&x);
        let m = x.amax();
        acc += m.ln();
        x /= m;
    }
    Ok((acc + x[probe].ln()) / n as f64 + op.log_shift)
}

/// Residual `max |mu^T P - mu^T|` for the normalized kernel `P = K G / (r G)`.
pub fn dgm_stationarity_residual(op: &DiscretizedTransfer, sd: &SpectralData) -> f64 {
    let n = op.len();
    let rs = (sd.logr - op.log_shift).exp();
    let mu = sd.dgm();
    (0..n)
        .map(|sp| {
            let flow: f64 = (0..n)
                .map(|s| mu[s] * op.entry(s, sp) * sd.g[sp] / (rs * sd.g[s]))
                .sum();
            (flow - mu[sp]).abs()
        })
        .fold(0.0, f64::max)
}

/// `c_n = |int f . g o sigma^n dmu - int f dmu int g dmu|` for `n = 0..=n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CorrelationDecay {
    pub c: Vec<f64>,
    /// `|lambda_2| / r`.
    pub ratio: f64,
    /// Smallest `C` with `c_n <= C ratio^n` for all listed `n`.
    pub fitted_constant: f64,
}

pub fn correlation_decay(
    op: &DiscretizedTransfer,
    sd: &SpectralData,
    f: &Observable,
    g: &Observable,
    n_max: usize,
) -> Result<CorrelationDecay> {
    let d = op.states.depth;
    if f.depth() > d || g.depth() > d {
        return Err(Error::DepthUnsupported {
            depth: f.depth().max(g.depth()),
            method: "correlation_decay",
        });
    }
    let n = op.len();
    let rs = (sd.logr - op.log_shift).exp();
    let fv: Vec<f64> = (0..n).map(|s| f.eval(&op.state_coords(s))).collect();
    let gv: Vec<f64> = (0..n).map(|s| g.eval(&op.state_coords(s))).collect();
    let mu = sd.dgm();
    let ef: f64 = fv.iter().zip(&mu).map(|(a, b)| a * b).sum();
    let eg: f64 = gv.iter().zip(&mu).map(|(a, b)| a * b).sum();
    let mut h = DVector::from_fn(n, |s, _| fv[s] * sd.g[s]);
    let mut c = Vec::with_capacity(n_max + 1);
    for step in 0..=n_max {
        if step > 0 {
            h = op.apply(&h) / rs;
        }
        let joint: f64 = (0..n).map(|s| sd.nu[s] * gv[s] * h[s]).sum();
        c.push((joint - ef * eg).abs());
    }
    let ratio = sd.lambda2_abs / sd.r;
    let fitted_constant = c
        .iter()
        .enumerate()
        .map(|(k, v)| if v.abs() == 0.0 { 0.0 } else { v / ratio.powi(k as i32) })
        .fold(0.0, f64::max);
    Ok(CorrelationDecay {
        c,
        ratio,
        fitted_constant,
    })
}

/// `int f dnu` (or `int f dmu` when `with_g`) for an observable of any depth.
///
/// Deeper observables are pushed down to the state depth with the transfer
/// operator, using `int h dnu = r^{-k} int L^k h dnu`.
pub fn integrate(op: &DiscretizedTransfer, sd: &SpectralData, f: &Observable, with_g: bool) -> Result<f64> {
    let st = &op.states;
    let d = st.depth;
    let m = st.node_count;
    let depth = f.depth();
    let weight = |s: usize| if with_g { sd.g[s] * sd.nu[s] } else { sd.nu[s] };
    if depth <= d {
        return Ok((0..op.len()).map(|s| weight(s) * f.eval(&op.state_coords(s))).sum());
    }
    let total = m
        .checked_pow(depth as u32)
        .filter(|&t| t <= 1 << 26)
        .ok_or(Error::CapExceeded {
            what: "observable table",
            needed: usize::MAX,
            cap: 1 << 26,
        })?;
    let rs = (sd.logr - op.log_shift).exp();
    let mut h = vec![0.0; total];
    let mut word = vec![0usize; depth];
    let mut coords = vec![0.0; depth];
    for (idx, slot) in h.iter_mut().enumerate() {
        decode(idx, m, &mut word);
        if let Some(s) = st.state_of(&word) {
            for (c, &z) in coords.iter_mut().zip(&word) {
                *c = op.coords[z];
            }
            let gfac = if with_g { sd.g[s] } else { 1.0 };
            *slot = f.eval(&coords) * gfac;
        }
    }
    let mut len = depth;
    while len > d {
        let next_total = total_for(m, len - 1);
        let mut next = vec![0.0; next_total];
        let mut x = vec![0usize; len - 1];
        let mut ax = vec![0usize; len];
        for (idx, slot) in next.iter_mut().enumerate() {
            decode(idx, m, &mut x);
            let Some(s) = st.state_of(&x) else { continue };
            let mut acc = 0.0;
            for &(a, sp) in &st.preds[s] {
                ax[0] = a;
                ax[1..].copy_from_slice(&x);
                acc += op.entry(s, sp) * h[word_index(&ax, m)];
            }
            *slot = acc / rs;
        }
        h = next;
        len -= 1;
    }
    Ok((0..op.len())
        .map(|s| sd.nu[s] * h[word_index(&st.words[s], m)])
        .sum())
}

fn total_for(m: usize, len: usize) -> usize {
    m.pow(len as u32)
}

fn decode(mut idx: usize, m: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = idx % m;
        idx /= m;
    }
}

/// Convenience: mixing time of a transition table (re-exported for callers
/// that only hold an operator).
pub fn mixing_time(transition: &TransitionFn) -> Result<usize> {
    check_mixing(transition, DEFAULT_MIXING_POWER)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::{build_circle_alphabet, build_finite_alphabet, build_uniform_alphabet};

    fn cwp3() -> Model {
        let a = build_uniform_alphabet(&["1", "2", "3"]).unwrap();
        let t = TransitionFn::full(3);
        let p = PotentialVec::indicators(&a, &t).unwrap();
        Model::new(a, t, p).unwrap()
    }

    fn golden() -> Model {
        let a = build_uniform_alphabet(&["0", "1"]).unwrap();
        let t = TransitionFn::from_rows(&[vec![0, 1], vec![1, 1]]).unwrap();
        let p = PotentialVec::site_values(&a, &t, &[0.0, 1.0]).unwrap();
        Model::new(a, t, p).unwrap()
    }

    fn series_i0(x: f64) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..200 {
            term *= (x / 2.0) * (x / 2.0) / (k * k) as f64;
            sum += term;
        }
        sum
    }

    #[test]
    fn zero_potential_is_stochastic() {
        let op = cwp3().operator(&[0.0, 0.0, 0.0]).unwrap();
        for s in 0..3 {
            let rs: f64 = op.kernel().row(s).iter().sum();
            assert!((rs - 1.0).abs() < 1e-15);
        }
        let sd = spectral_solve(&op, &SolveOptions::default()).unwrap();
        assert!((sd.r - 1.0).abs() < 1e-15);
        assert!(sd.g.iter().all(|g| (g - 1.0).abs() < 1e-15));
        assert!(sd.nu.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn cwp_radius_closed_form() {
        let op = cwp3().operator(&[1.0, 2.0, 3.0]).unwrap();
        let sd = spectral_solve(&op, &SolveOptions::default()).unwrap();
        let expect = (1f64.exp() + 2f64.exp() + 3f64.exp()) / 3.0;
        assert!((sd.r - expect).abs() / expect < 1e-14);
    }

    #[test]
    fn circle_kernel_and_bessel_radius() {
        let m = 256;
        let a = build_circle_alphabet(m).unwrap();
        let t = TransitionFn::full(m);
        let p = PotentialVec::xy(&a, &t).unwrap();
        let model = Model::new(a.clone(), t, p).unwrap();
        let op = model.operator(&[2.0, 0.0]).unwrap();
        let k = op.kernel();
        for j in [0, 17, 128] {
            let expect = (2.0 * a.angles()[j].cos()).exp() / m as f64;
            assert!((k[(5, j)] - expect).abs() < 1e-15 * expect.max(1.0));
        }
        let sd = spectral_solve(&op, &SolveOptions::default()).unwrap();
        let i0 = series_i0(2.0);
        assert!((sd.r - i0).abs() / i0 < 1e-13);
        assert!((i0 - 2.2795853).abs() < 1e-7);
    }

    #[test]
    fn golden_mean_kernel_respects_admissibility() {
        let op = golden().operator(&[1.0]).unwrap();
        let k = op.kernel();
        // row = output state b, column = prepended symbol a, nonzero iff A(a, b)
        assert_eq!(k[(0, 0)], 0.0);
        assert!(k[(0, 1)] > 0.0 && k[(1, 0)] > 0.0 && k[(1, 1)] > 0.0);
        assert!(!op.is_rank_one());
    }

    #[test]
    fn golden_mean_spectrum() {
        let op = golden().operator(&[0.0]).unwrap();
        let sd = spectral_solve(&op, &SolveOptions::default()).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((sd.logr + 2f64.ln() - phi.ln()).abs() < 1e-14);
        assert!((sd.lambda2_abs / sd.r - 1.0 / (phi * phi)).abs() < 1e-12);
        assert!(sd.exact_gap);
        assert!(dgm_stationarity_residual(&op, &sd) < 1e-14);
        let est = log_radius_by_iteration(&op, 400, 0).unwrap() + 2f64.ln();
        assert!((est - 0.4812118).abs() < 1e-3);
    }

    #[test]
    fn log_radius_iteration_closed_form() {
        let a = build_finite_alphabet(&["+1", "-1"], &[0.5, 0.5]).unwrap();
        let t = TransitionFn::full(2);
        let p = PotentialVec::plus_minus(&a, &t).unwrap();
        let model = Model::new(a, t, p).unwrap();
        let op = model.operator(&[1.0]).unwrap();
        let est = log_radius_by_iteration(&op, 50, 0).unwrap();
        assert!((est - 1f64.cosh().ln()).abs() < 1e-8);
        let op0 = model.operator(&[0.0]).unwrap();
        for n in [1, 7, 50] {
            assert_eq!(log_radius_by_iteration(&op0, n, 1).unwrap(), 0.0);
        }
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            cwp3().operator(&[1.0]),
            Err(Error::DimensionMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn constant_observables_do_not_correlate() {
        let op = golden().operator(&[0.3]).unwrap();
        let sd = spectral_solve(&op, &SolveOptions::default()).unwrap();
        let one = Observable::constant(1.0);
        let cd = correlation_decay(&op, &sd, &one, &one, 10).unwrap();
        assert!(cd.c.iter().all(|c| *c < 1e-14));
    }

    #[test]
    fn golden_mean_correlations_follow_second_eigenvalue() {
        let op = golden().operator(&[0.0]).unwrap();
        let sd = spectral_solve(&op, &SolveOptions::default()).unwrap();
        let f = Observable::indicator_word(&[1]);
        let cd = correlation_decay(&op, &sd, &f, &f, 20).unwrap();
        let rho = ((5f64.sqrt() - 1.0) / 2.0).powi(2);
        for n in 1..=12 {
            let ratio = cd.c[n] / cd.c[n - 1];
            assert!((ratio - rho).abs() < 1e-7, "n={n} ratio={ratio}");
        }
    }

    #[test]
    fn xy_zero_field_is_iid() {
        let m = 64;
        let a = build_circle_alphabet(m).unwrap();
        let t = TransitionFn::full(m);
        let p = PotentialVec::xy(&a, &t).unwrap();
        let op = Model::new(a, t, p).unwrap().operator(&[0.0, 0.0]).unwrap();
        let sd = spectral_solve(&op, &SolveOptions::default()).unwrap();
        let cd = correlation_decay(&op, &sd, &Observable::cos_first(), &Observable::cos_first(), 3).unwrap();
        assert!(cd.c[1] < 1e-15);
        assert!((cd.c[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn deep_observables_integrate_against_product_marginals() {
        let a = build_finite_alphabet(&["+1", "-1"], &[0.5, 0.5]).unwrap();
        let t = TransitionFn::full(2);
        let p = PotentialVec::plus_minus(&a, &t).unwrap();
        let op = Model::new(a, t, p).unwrap().operator(&[0.7]).unwrap();
        let sd = spectral_solve(&op, &SolveOptions::default()).unwrap();
        let pp = 0.7f64.exp() / (2.0 * 0.7f64.cosh());
        let f = Observable::indicator_word(&[0, 0, 1]);
        let v = integrate(&op, &sd, &f, true).unwrap();
        assert!((v - pp * pp * (1.0 - pp)).abs() < 1e-15);
    }

    #[test]
    fn depth_two_chain_matches_markov_oracle() {
        // psi(x0, x1) = 1 if x0 == x1: a nearest-neighbour Ising chain.
        let a = build_uniform_alphabet(&["0", "1"]).unwrap();
        let t = TransitionFn::full(2);
        let rows = vec![vec![1.0], vec![0.0], vec![0.0], vec![1.0]];
        let p = PotentialVec::table(&a, &t, 2, &rows).unwrap();
        let model = Model::new(a, t, p).unwrap();
        let beta: f64 = 0.8;
        let sd = spectral_solve(&model.operator(&[beta]).unwrap(), &SolveOptions::default()).unwrap();
        // transfer matrix [[e^b, 1],[1, e^b]] / 2 has top eigenvalue (e^b + 1)/2
        assert!((sd.r - (beta.exp() + 1.0) / 2.0).abs() < 1e-14);
        let mu = sd.dgm();
        let agree = mu[0] + mu[3];
        let expect = beta.exp() / (beta.exp() + 1.0);
        assert!((agree - expect).abs() < 1e-13);
    }
}
