//! Finite-`n` probabilistic Gibbs measures and their limit mixtures.
//!
//! `mu_{n,beta}` has density `e^{-beta H_n} / Z_{n,beta}` against `rho^n` on
//! admissible `n`-words, with `H_n = -|S_n psi|^2 / (2n)`.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alphabet::{enumerate_words, WordConstraint};
use crate::error::{Error, Result};
use crate::observable::Observable;
use crate::potential::{norm, PotentialKind};
use crate::pressure::PressureMap;
use crate::quadratic::{find_maxima, phi_beta_gradient, MaximaOptions, MaximaSet};
use crate::quadrature::gauss_hermite;
use crate::sampling::{batch_rng, von_mises, Categorical};
use crate::transfer::{dot, integrate, Model};
use crate::xy::log_bessel_i0;

/// Default work cap for exact enumeration.
pub const DEFAULT_EXACT_CAP: usize = 1 << 32;
/// Smallest acceptable effective sample size.
pub const MIN_ESS: f64 = 100.0;
/// Samples per independently seeded batch.
pub const BATCH_SIZE: usize = 1 << 14;

/// `-(1/2n) |S_n psi|^2`, periodic extension for deeper potentials.
pub fn hamiltonian(model: &Model, word: &[usize]) -> Result<f64> {
    let n = word.len();
    let psi = model.potential();
    if n == 0 || n < psi.depth() {
        return Err(Error::invalid(format!("word length {n} below potential depth {}", psi.depth())));
    }
    if word.iter().any(|&z| z >= model.alphabet().len()) {
        return Err(Error::invalid("word contains unknown nodes"));
    }
    let s = birkhoff_sum(model, word);
    Ok(-dot(&s, &s) / (2.0 * n as f64))
}

/// XY Hamiltonian `-(1/2n) sum_{i,j} cos(theta_i - theta_j)`.
pub fn hamiltonian_angles(angles: &[f64]) -> f64 {
    let (c, s) = angles
        .iter()
        .fold((0.0, 0.0), |(c, s), a| (c + a.cos(), s + a.sin()));
    -(c * c + s * s) / (2.0 * angles.len() as f64)
}

fn birkhoff_sum(model: &Model, word: &[usize]) -> Vec<f64> {
    let psi = model.potential();
    let d = psi.depth();
    let n = word.len();
    let mut s = vec![0.0; psi.q()];
    let mut window = vec![0usize; d];
    for k in 0..n {
        for (j, slot) in window.iter_mut().enumerate() {
            *slot = word[(k + j) % n];
        }
        for (si, v) in s.iter_mut().zip(psi.at_word(&window)) {
            *si += v;
        }
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Proposal {
    /// Words drawn from `rho^n`, weights `e^{-beta H_n}`.
    Product,
    /// Gaussian latent field `z` from a gridded proposal, then the `beta z`-tilted product.
    LatentField,
    /// `Product`, falling back to `LatentField` when the effective sample size is too small.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum PgmMethod {
    Exact,
    #[serde(rename_all = "camelCase")]
    Mc {
        samples: usize,
        stderr: f64,
        ess: f64,
        seed: u64,
        proposal: Proposal,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PgmEstimate {
    pub n: usize,
    pub beta: f64,
    pub observable: String,
    pub depth: usize,
    pub value: f64,
    pub log_z: f64,
    pub method: PgmMethod,
}

impl PgmEstimate {
    pub fn stderr(&self) -> Option<f64> {
        match self.method {
            PgmMethod::Exact => None,
            PgmMethod::Mc { stderr, .. } => Some(stderr),
        }
    }
}

fn check_common(n: usize, beta: f64, f: &Observable) -> Result<()> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::OutOfRange(format!("beta = {beta} must be finite and nonnegative")));
    }
    if n == 0 || f.depth() > n {
        return Err(Error::OutOfRange(format!(
            "system size {n} must be at least the observable depth {}",
            f.depth()
        )));
    }
    Ok(())
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let mx = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + xs.map(|x| (x - mx).exp()).sum::<f64>().ln()
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Exact expectation by summing over symbol-count vectors.
pub fn exact_pgm(model: &Model, n: usize, beta: f64, f: &Observable, cap: usize) -> Result<PgmEstimate> {
    check_common(n, beta, f)?;
    if model.potential().depth() != 1 {
        return Err(Error::DepthUnsupported {
            depth: model.potential().depth(),
            method: "exact_pgm",
        });
    }
    if model.alphabet().is_circle() {
        return Err(Error::Unsupported("exact enumeration needs a finite alphabet".into()));
    }
    let (value, log_z) = if model.transition().is_full() {
        exact_free(model, n, beta, f, cap)?
    } else {
        exact_dp(model, n, beta, f, cap)?
    };
    Ok(PgmEstimate {
        n,
        beta,
        observable: f.name().to_string(),
        depth: f.depth(),
        value,
        log_z,
        method: PgmMethod::Exact,
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Visits every composition of `n` into `m` nonnegative parts in lexicographic order.
fn for_each_composition(n: usize, m: usize, mut visit: impl FnMut(&[usize])) {
    let mut c = vec![0usize; m];
    c[m - 1] = n;
    loop {
        visit(&c);
        // Move one unit from the tail into the rightmost position that can grow.
        let Some(j) = (0..m - 1).rev().find(|&j| c[j + 1..].iter().sum::<usize>() > 0) else {
            return;
        };
        c[j] += 1;
        let rest: usize = n - c[..=j].iter().sum::<usize>();
        for slot in c[j + 1..].iter_mut() {
            *slot = 0;
        }
        c[m - 1] = rest;
    }
}

fn exact_free(model: &Model, n: usize, beta: f64, f: &Observable, cap: usize) -> Result<(f64, f64)> {
    let alphabet = model.alphabet();
    let m = alphabet.len();
    let d = f.depth();
    let count = binomial(n + m - 1, m - 1);
    let prefixes = m.checked_pow(d as u32).unwrap_or(usize::MAX);
    let work = count * prefixes as f64 * m as f64;
    if work > cap as f64 {
        return Err(Error::CapExceeded {
            what: "exact enumeration",
            needed: work.min(usize::MAX as f64) as usize,
            cap,
        });
    }
    let psi: Vec<Vec<f64>> = (0..m).map(|a| model.potential().at_word(&[a]).to_vec()).collect();
    let lnw: Vec<f64> = alphabet.weights().iter().map(|w| w.ln()).collect();
    let mut log_fact = vec![0.0; n + 1];
    for k in 1..=n {
        log_fact[k] = log_fact[k - 1] + (k as f64).ln();
    }
    // Prefix words with their symbol counts and observable values.
    let words: Vec<(Vec<usize>, f64)> = (0..prefixes)
        .map(|idx| {
            let w = crate::potential::word_from_index(idx, m, d);
            let mut k = vec![0usize; m];
            for &z in &w {
                k[z] += 1;
            }
            (k, f.eval_nodes(alphabet, &w))
        })
        .collect();
    let denom: f64 = (0..d).map(|j| (n - j) as f64).product();
    let q = model.q();
    let mut lws = Vec::with_capacity(count as usize);
    let mut conds = Vec::with_capacity(count as usize);
    let mut s = vec![0.0; q];
    for_each_composition(n, m, |c| {
        s.iter_mut().for_each(|x| *x = 0.0);
        let mut lw = log_fact[n];
        for a in 0..m {
            if c[a] > 0 {
                lw += c[a] as f64 * lnw[a] - log_fact[c[a]];
                for (si, pi) in s.iter_mut().zip(&psi[a]) {
                    *si += c[a] as f64 * pi;
                }
            }
        }
        lw += beta / (2.0 * n as f64) * dot(&s, &s);
        let mut cond = 0.0;
        for (k, fv) in &words {
            if *fv == 0.0 {
                continue;
            }
            let mut num = 1.0;
            for a in 0..m {
                for j in 0..k[a] {
                    num *= c[a].saturating_sub(j) as f64;
                }
            }
            cond += fv * num / denom;
        }
        lws.push(lw);
        conds.push(cond);
    });
    let mx = lws.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    let mut acc = 0.0;
    for (lw, c) in lws.iter().zip(&conds) {
        let e = (lw - mx).exp();
        z += e;
        acc += e * c;
    }
    Ok((acc / z, mx + z.ln()))
}

/// Dynamic programming over (symbol counts, last symbol) for constrained transitions.
pub(crate) fn exact_dp(model: &Model, n: usize, beta: f64, f: &Observable, cap: usize) -> Result<(f64, f64)> {
    let alphabet = model.alphabet();
    let a_fn = model.transition();
    let m = alphabet.len();
    let d = f.depth();
    let base = n + 1;
    let slots = base
        .checked_pow((m - 1) as u32)
        .ok_or(Error::CapExceeded {
            what: "exact DP table",
            needed: usize::MAX,
            cap,
        })?;
    let prefixes = enumerate_words(a_fn, d, WordConstraint::Free, cap.max(1))?;
    let work = slots as f64 * (m * m) as f64 * n as f64 * prefixes.len() as f64;
    if work > cap as f64 {
        return Err(Error::CapExceeded {
            what: "exact DP",
            needed: work.min(usize::MAX as f64) as usize,
            cap,
        });
    }
    let lnw: Vec<f64> = alphabet.weights().iter().map(|w| w.ln()).collect();
    let psi: Vec<Vec<f64>> = (0..m).map(|a| model.potential().at_word(&[a]).to_vec()).collect();
    let strides: Vec<usize> = (0..m - 1).map(|i| base.pow(i as u32)).collect();
    let decode = |idx: usize, total: usize, out: &mut [usize]| {
        let mut r = idx;
        let mut used = 0;
        for slot in out.iter_mut().take(m - 1) {
            *slot = r % base;
            used += *slot;
            r /= base;
        }
        out[m - 1] = total.wrapping_sub(used);
        used <= total
    };
    let mut per_prefix = Vec::with_capacity(prefixes.len());
    let mut counts = vec![0usize; m];
    for u in &prefixes.words {
        let mut table = vec![f64::NEG_INFINITY; slots * m];
        let mut idx = 0;
        for &z in u {
            if z < m - 1 {
                idx += strides[z];
            }
        }
        table[idx * m + u[d - 1]] = u.iter().map(|&z| lnw[z]).sum();
        for len in d..n {
            let mut next = vec![f64::NEG_INFINITY; slots * m];
            for idx in 0..slots {
                if !decode(idx, len, &mut counts) {
                    continue;
                }
                for a in 0..m {
                    let cur = table[idx * m + a];
                    if cur == f64::NEG_INFINITY {
                        continue;
                    }
                    for b in 0..m {
                        if !a_fn.allows(a, b) {
                            continue;
                        }
                        let j = if b < m - 1 { idx + strides[b] } else { idx };
                        let slot = &mut next[j * m + b];
                        *slot = log_add(*slot, cur + lnw[b]);
                    }
                }
            }
            table = next;
        }
        let mut terms = Vec::new();
        let q = model.q();
        for idx in 0..slots {
            if !decode(idx, n, &mut counts) {
                continue;
            }
            let mut s = vec![0.0; q];
            for a in 0..m {
                for (si, pi) in s.iter_mut().zip(&psi[a]) {
                    *si += counts[a] as f64 * pi;
                }
            }
            let tilt = beta / (2.0 * n as f64) * dot(&s, &s);
            for last in 0..m {
                let v = table[idx * m + last];
                if v > f64::NEG_INFINITY {
                    terms.push(v + tilt);
                }
            }
        }
        per_prefix.push((log_sum_exp(terms.iter().copied()), f.eval_nodes(alphabet, u)));
    }
    let log_z = log_sum_exp(per_prefix.iter().map(|p| p.0));
    let value = per_prefix.iter().map(|(lz, fv)| fv * (lz - log_z).exp()).sum();
    Ok((value, log_z))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct McOptions {
    pub samples: usize,
    pub seed: u64,
    pub proposal: Proposal,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions {
            samples: 100_000,
            seed: 0,
            proposal: Proposal::Auto,
        }
    }
}

/// Self-normalized importance sampling estimate of `int f dmu_{n,beta}`.
pub fn mc_pgm(model: &Model, n: usize, beta: f64, f: &Observable, opts: &McOptions) -> Result<PgmEstimate> {
    check_common(n, beta, f)?;
    if !model.transition().is_full() {
        return Err(Error::Unsupported("importance sampling needs full transitions".into()));
    }
    if opts.samples == 0 {
        return Err(Error::OutOfRange("sample count must be positive".into()));
    }
    match opts.proposal {
        Proposal::Product => product_estimate(model, n, beta, f, opts),
        Proposal::LatentField => latent_estimate(model, n, beta, f, opts),
        Proposal::Auto => match product_estimate(model, n, beta, f, opts) {
            Err(Error::LowEss { .. }) if latent_supported(model) && beta > 0.0 => {
                latent_estimate(model, n, beta, f, opts)
            }
            other => other,
        },
    }
}

fn continuous_xy(model: &Model) -> bool {
    model.alphabet().is_circle() && model.potential().kind() == PotentialKind::Xy
}

fn latent_supported(model: &Model) -> bool {
    model.potential().depth() == 1 && (continuous_xy(model) || model.q() <= 2)
}

struct Summary {
    value: f64,
    stderr: f64,
    ess: f64,
    log_mean_weight: f64,
}

fn summarize(batches: &[(Vec<f64>, Vec<f64>)]) -> Summary {
    let mx = batches
        .iter()
        .flat_map(|b| b.0.iter().copied())
        .fold(f64::NEG_INFINITY, f64::max);
    let mut sw = 0.0;
    let mut sw2 = 0.0;
    let mut swf = 0.0;
    let mut count = 0usize;
    for (lw, fv) in batches {
        for (l, v) in lw.iter().zip(fv) {
            let w = (l - mx).exp();
            sw += w;
            sw2 += w * w;
            swf += w * v;
            count += 1;
        }
    }
    let value = swf / sw;
    let mut var = 0.0;
    for (lw, fv) in batches {
        for (l, v) in lw.iter().zip(fv) {
            let w = (l - mx).exp();
            var += w * w * (v - value) * (v - value);
        }
    }
    Summary {
        value,
        stderr: var.sqrt() / sw,
        ess: sw * sw / sw2,
        log_mean_weight: mx + (sw / count as f64).ln(),
    }
}

fn run_batches<F>(samples: usize, seed: u64, body: F) -> Vec<(Vec<f64>, Vec<f64>)>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng, usize) -> (Vec<f64>, Vec<f64>) + Sync,
{
    let batches = samples.div_ceil(BATCH_SIZE);
    (0..batches)
        .into_par_iter()
        .map(|b| {
            let size = BATCH_SIZE.min(samples - b * BATCH_SIZE);
            let mut rng = batch_rng(seed, b as u64);
            body(&mut rng, size)
        })
        .collect()
}

fn finish_mc(
    n: usize,
    beta: f64,
    f: &Observable,
    opts: &McOptions,
    proposal: Proposal,
    s: Summary,
    log_z: f64,
) -> Result<PgmEstimate> {
    if !(s.ess >= MIN_ESS) {
        return Err(Error::LowEss {
            ess: s.ess,
            required: MIN_ESS,
        });
    }
    Ok(PgmEstimate {
        n,
        beta,
        observable: f.name().to_string(),
        depth: f.depth(),
        value: s.value,
        log_z,
        method: PgmMethod::Mc {
            samples: opts.samples,
            stderr: s.stderr,
            ess: s.ess,
            seed: opts.seed,
            proposal,
        },
    })
}

fn product_estimate(model: &Model, n: usize, beta: f64, f: &Observable, opts: &McOptions) -> Result<PgmEstimate> {
    let scale = beta / (2.0 * n as f64);
    let d = f.depth();
    let batches = if continuous_xy(model) {
        run_batches(opts.samples, opts.seed, |rng, size| {
            let mut lw = Vec::with_capacity(size);
            let mut fv = Vec::with_capacity(size);
            let mut head = vec![0.0; d];
            for _ in 0..size {
                let (mut c, mut s) = (0.0, 0.0);
                for k in 0..n {
                    let th = -PI + 2.0 * PI * rng.random::<f64>();
                    c += th.cos();
                    s += th.sin();
                    if k < d {
                        head[k] = th;
                    }
                }
                lw.push(scale * (c * c + s * s));
                fv.push(f.eval(&head));
            }
            (lw, fv)
        })
    } else {
        let alphabet = model.alphabet();
        let cat = Categorical::new(alphabet.weights());
        run_batches(opts.samples, opts.seed, |rng, size| {
            let mut lw = Vec::with_capacity(size);
            let mut fv = Vec::with_capacity(size);
            let mut word = vec![0usize; n];
            for _ in 0..size {
                for slot in word.iter_mut() {
                    *slot = cat.sample(rng);
                }
                let s = birkhoff_sum(model, &word);
                lw.push(scale * dot(&s, &s));
                fv.push(f.eval_nodes(alphabet, &word));
            }
            (lw, fv)
        })
    };
    let s = summarize(&batches);
    let log_z = s.log_mean_weight;
    finish_mc(n, beta, f, opts, Proposal::Product, s, log_z)
}

/// Piecewise-constant proposal for the latent field `z`.
struct FieldGrid {
    radial: bool,
    lo: Vec<f64>,
    step: Vec<f64>,
    dims: Vec<usize>,
    cells: Categorical,
    /// Log proposal density on each cell (w.r.t. `dr` or `dz`).
    log_density: Vec<f64>,
}

impl FieldGrid {
    fn build(lo: Vec<f64>, hi: Vec<f64>, dims: Vec<usize>, radial: bool, g: &impl Fn(&[f64]) -> f64) -> Self {
        let step: Vec<f64> = lo.iter().zip(&hi).zip(&dims).map(|((l, h), &k)| (h - l) / k as f64).collect();
        let total: usize = dims.iter().product();
        let mut logs = Vec::with_capacity(total);
        let mut mid = vec![0.0; dims.len()];
        for idx in 0..total {
            let mut r = idx;
            for (i, slot) in mid.iter_mut().enumerate() {
                *slot = lo[i] + (r % dims[i]) as f64 * step[i] + 0.5 * step[i];
                r /= dims[i];
            }
            logs.push(g(&mid));
        }
        let mx = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let probs: Vec<f64> = logs.iter().map(|l| (l - mx).exp()).collect();
        let total_p: f64 = probs.iter().sum();
        let volume: f64 = step.iter().product();
        let log_density = probs.iter().map(|p| (p / total_p / volume).ln()).collect();
        FieldGrid {
            radial,
            lo,
            step,
            dims,
            cells: Categorical::new(&probs),
            log_density,
        }
    }

    /// Draws a point and returns it with its log proposal density.
    fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, f64) {
        let c = self.cells.sample(rng);
        let mut r = c;
        let x: Vec<f64> = (0..self.dims.len())
            .map(|i| {
                let k = r % self.dims[i];
                r /= self.dims[i];
                self.lo[i] + (k as f64 + rng.random::<f64>()) * self.step[i]
            })
            .collect();
        (x, self.log_density[c])
    }
}

/// Tightest box where `g` is within 40 of its maximum, found on a coarse grid.
fn trim_box(lo: f64, hi: f64, g: &impl Fn(f64) -> f64) -> (f64, f64) {
    let k = 4000;
    let xs: Vec<f64> = (0..=k).map(|i| lo + (hi - lo) * i as f64 / k as f64).collect();
    let vs: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
    let mx = vs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let keep: Vec<usize> = (0..=k).filter(|&i| vs[i] > mx - 40.0).collect();
    let a = keep.first().copied().unwrap_or(0).saturating_sub(1);
    let b = (keep.last().copied().unwrap_or(k) + 1).min(k);
    (xs[a], xs[b])
}

fn latent_estimate(model: &Model, n: usize, beta: f64, f: &Observable, opts: &McOptions) -> Result<PgmEstimate> {
    if !latent_supported(model) {
        return Err(Error::Unsupported(
            "latent-field proposal needs a depth-1 potential with q <= 2 or the XY circle".into(),
        ));
    }
    if beta <= 0.0 {
        return Err(Error::Unsupported("latent-field proposal needs beta > 0".into()));
    }
    let nf = n as f64;
    let d = f.depth();
    let q = model.q();
    let sup = model.potential().sup_norm();
    let half = sup + 12.0 / (nf * beta).sqrt() + 0.1;
    if continuous_xy(model) {
        let nphi = |r: f64| nf * (-0.5 * beta * r * r + log_bessel_i0(beta * r).unwrap_or(f64::INFINITY));
        let g = |r: f64| if r <= 0.0 { f64::NEG_INFINITY } else { r.ln() + nphi(r) };
        let (a, b) = trim_box(0.0, half, &g);
        let grid = FieldGrid::build(vec![a], vec![b], vec![4096], true, &|x: &[f64]| g(x[0]));
        debug_assert!(grid.radial);
        let batches = run_batches(opts.samples, opts.seed, |rng, size| {
            let mut lw = Vec::with_capacity(size);
            let mut fv = Vec::with_capacity(size);
            let mut head = vec![0.0; d];
            for _ in 0..size {
                let (x, logq) = grid.sample(rng);
                let r = x[0];
                let dir = -PI + 2.0 * PI * rng.random::<f64>();
                // target e^{n phi(z)} dz = 2 pi r e^{n phi(r)} dr d(dir)/(2 pi)
                lw.push(nphi(r) + (2.0 * PI * r).ln() - logq);
                for slot in head.iter_mut() {
                    *slot = von_mises(rng, dir, beta * r);
                }
                fv.push(f.eval(&head));
            }
            (lw, fv)
        });
        let s = summarize(&batches);
        let log_z = s.log_mean_weight + (nf * beta / (2.0 * PI)).ln();
        return finish_mc(n, beta, f, opts, Proposal::LatentField, s, log_z);
    }
    let alphabet = model.alphabet();
    let m = alphabet.len();
    let psi: Vec<Vec<f64>> = (0..m).map(|a| model.potential().at_word(&[a]).to_vec()).collect();
    let lnw: Vec<f64> = alphabet.weights().iter().map(|w| w.ln()).collect();
    let nphi = |z: &[f64]| -> f64 {
        let lse = log_sum_exp((0..m).map(|a| lnw[a] + beta * dot(z, &psi[a])));
        nf * (-0.5 * beta * dot(z, z) + lse)
    };
    let mut lo = Vec::with_capacity(q);
    let mut hi = Vec::with_capacity(q);
    for i in 0..q {
        // Profile along axis i through the best point on the other axes (coarse).
        let line = |x: f64| {
            let mut z = vec![0.0; q];
            z[i] = x;
            let others: Vec<f64> = (0..q).filter(|&j| j != i).map(|_| 0.0).collect();
            let _ = others;
            let mut best = nphi(&z);
            if q == 2 {
                let j = 1 - i;
                for k in -40..=40 {
                    z[j] = half * k as f64 / 40.0;
                    best = best.max(nphi(&z));
                }
            }
            best
        };
        let (a, b) = trim_box(-half, half, &line);
        lo.push(a);
        hi.push(b);
    }
    let dims = if q == 1 { vec![4096] } else { vec![512, 512] };
    let grid = FieldGrid::build(lo, hi, dims, false, &|z: &[f64]| nphi(z));
    let batches = run_batches(opts.samples, opts.seed, |rng, size| {
        let mut lw = Vec::with_capacity(size);
        let mut fv = Vec::with_capacity(size);
        let mut word = vec![0usize; d];
        let mut tilt = vec![0.0; m];
        for _ in 0..size {
            let (z, logq) = grid.sample(rng);
            lw.push(nphi(&z) - logq);
            for a in 0..m {
                tilt[a] = lnw[a] + beta * dot(&z, &psi[a]);
            }
            let mx = tilt.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let probs: Vec<f64> = tilt.iter().map(|t| (t - mx).exp()).collect();
            let cat = Categorical::new(&probs);
            for slot in word.iter_mut() {
                *slot = cat.sample(rng);
            }
            fv.push(f.eval_nodes(alphabet, &word));
        }
        (lw, fv)
    });
    let s = summarize(&batches);
    let log_z = s.log_mean_weight + 0.5 * q as f64 * (nf * beta / (2.0 * PI)).ln();
    finish_mc(n, beta, f, opts, Proposal::LatentField, s, log_z)
}

/// Relative error of tensor Gauss-Hermite quadrature for the Gaussian linearization identity.
pub fn hubbard_stratonovich_check(xi: &[f64], nodes_per_dim: usize) -> Result<f64> {
    let q = xi.len();
    if !(1..=3).contains(&q) {
        return Err(Error::OutOfRange(format!("dimension {q} outside 1..=3")));
    }
    if norm(xi) > 5.0 {
        return Err(Error::OutOfRange("|xi| must be at most 5".into()));
    }
    if nodes_per_dim == 0 || nodes_per_dim > 128 {
        return Err(Error::OutOfRange("nodes per dimension must be in 1..=128".into()));
    }
    // t = sqrt(2) x turns (2 pi)^{-q/2} e^{-|t|^2/2 + sqrt 2 t.xi} dt into pi^{-q/2} e^{-|x|^2 + 2 x.xi} dx.
    let (x, w) = gauss_hermite(nodes_per_dim)?;
    let total = nodes_per_dim.pow(q as u32);
    let mut sum = 0.0;
    for idx in 0..total {
        let mut r = idx;
        let mut weight = 1.0;
        let mut expo = 0.0;
        for &xi_i in xi {
            let k = r % nodes_per_dim;
            r /= nodes_per_dim;
            weight *= w[k];
            expo += 2.0 * x[k] * xi_i;
        }
        sum += weight * expo.exp();
    }
    let quad = sum / PI.powf(0.5 * q as f64);
    let exact = dot(xi, xi).exp();
    Ok((quad - exact).abs() / exact)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MixtureComponent {
    pub z: Vec<f64>,
    pub weight: f64,
    pub t_param: Vec<f64>,
    /// `int G dP` over the state words.
    pub g_integral: f64,
    /// Order of the first nonvanishing derivative (one-dimensional case).
    pub flatness_order: Option<u32>,
    /// Conformal measure weights on the state words.
    pub nu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LimitMixture {
    pub beta: f64,
    pub components: Vec<MixtureComponent>,
}

/// Directions used to average over a rotation orbit of maximizers.
const ORBIT_DIRECTIONS: usize = 64;

impl LimitMixture {
    /// `sum_j w_j int f dnu_j`.
    pub fn predict(&self, pm: &PressureMap, f: &Observable) -> Result<f64> {
        let mut acc = 0.0;
        for c in &self.components {
            let op = pm.operator(&c.t_param)?;
            let sd = pm.spectral(&c.t_param)?;
            acc += c.weight * integrate(&op, &sd, f, false)?;
        }
        Ok(acc)
    }
}

fn g_integral(pm: &PressureMap, t: &[f64]) -> Result<f64> {
    let model = pm.model();
    let sd = pm.spectral(t)?;
    let alphabet = model.alphabet();
    Ok(model
        .states()
        .words()
        .iter()
        .enumerate()
        .map(|(s, w)| sd.g[s] * w.iter().map(|&z| alphabet.weight(z)).product::<f64>())
        .sum())
}

/// Weights of the limit of `mu_{n,beta}` as `n -> inf`.
pub fn limit_mixture(pm: &PressureMap, maxima: &MaximaSet) -> Result<LimitMixture> {
    let model = pm.model();
    if !model.transition().is_full() {
        return Err(Error::Unsupported(
            "limit mixture weights need full transitions (int G dP is delicate otherwise)".into(),
        ));
    }
    let beta = maxima.beta;
    let q = pm.q();
    let component = |z: Vec<f64>, weight: f64, order: Option<u32>, g: f64| -> Result<MixtureComponent> {
        let t: Vec<f64> = z.iter().map(|x| x * beta).collect();
        let sd = pm.spectral(&t)?;
        Ok(MixtureComponent {
            z,
            weight,
            t_param: t,
            g_integral: g,
            flatness_order: order,
            nu: sd.nu,
        })
    };
    if maxima.radial {
        let mut comps = Vec::new();
        for m in &maxima.maxima {
            let r = norm(&m.z);
            if r < 1e-9 {
                comps.push(component(vec![0.0; q], 1.0, None, 1.0)?);
            } else {
                if q != 2 {
                    return Err(Error::Unsupported("orbit averaging is implemented for q = 2".into()));
                }
                for j in 0..ORBIT_DIRECTIONS {
                    let a = -PI + 2.0 * PI * j as f64 / ORBIT_DIRECTIONS as f64;
                    comps.push(component(vec![r * a.cos(), r * a.sin()], 1.0, None, 1.0)?);
                }
            }
        }
        let total = comps.len() as f64;
        comps.iter_mut().for_each(|c| c.weight = 1.0 / total);
        return Ok(LimitMixture {
            beta,
            components: comps,
        });
    }
    if beta == 0.0 {
        // mu_{n,0} is the product measure itself.
        let z = maxima.maxima.first().map(|m| m.z.clone()).unwrap_or(vec![0.0; q]);
        return Ok(LimitMixture {
            beta,
            components: vec![component(z, 1.0, None, 1.0)?],
        });
    }
    let mut raw = Vec::new();
    if q == 1 {
        let mut entries = Vec::new();
        for m in &maxima.maxima {
            let (order, c) = flatness(pm, beta, m.z[0], m.degenerate)?;
            let g = g_integral(pm, &[beta * m.z[0]])?;
            entries.push((m.z.clone(), order, c, g));
        }
        let top = entries.iter().map(|e| e.1).max().unwrap_or(2);
        for (z, order, c, g) in entries {
            if order == top {
                raw.push((z, g * c.powf(-1.0 / order as f64), Some(order), g));
            }
        }
    } else {
        for m in &maxima.maxima {
            if m.degenerate {
                return Err(Error::DegenerateMaximum {
                    z: m.z.clone(),
                    min_eigenvalue: m.min_abs_eigenvalue,
                });
            }
            let h = nalgebra::DMatrix::from_fn(q, q, |i, j| m.hessian[i][j]);
            let det = h.determinant().abs();
            let t: Vec<f64> = m.z.iter().map(|x| x * beta).collect();
            let g = g_integral(pm, &t)?;
            raw.push((m.z.clone(), g / det.sqrt(), None, g));
        }
    }
    let total: f64 = raw.iter().map(|r| r.1).sum();
    let components = raw
        .into_iter()
        .map(|(z, w, order, g)| component(z, w / total, order, g))
        .collect::<Result<Vec<_>>>()?;
    Ok(LimitMixture { beta, components })
}

/// Order `2k` of the first nonvanishing derivative of `phi_beta` at `z` and `|phi^{(2k)}| / (2k)!`.
fn flatness(pm: &PressureMap, beta: f64, z: f64, degenerate: bool) -> Result<(u32, f64)> {
    let d1 = |x: f64| -> Result<f64> { Ok(phi_beta_gradient(pm, beta, &[x])?[0]) };
    if !degenerate {
        let h = 1e-4;
        let d2 = (d1(z + h)? - d1(z - h)?) / (2.0 * h);
        return Ok((2, d2.abs() / 2.0));
    }
    let h = 1e-2;
    let d4 = (d1(z + 2.0 * h)? - 2.0 * d1(z + h)? + 2.0 * d1(z - h)? - d1(z - 2.0 * h)?) / (2.0 * h * h * h);
    if d4.abs() > 1e-4 {
        return Ok((4, d4.abs() / 24.0));
    }
    Err(Error::Unsupported(format!(
        "maximum at {z} is flatter than fourth order; weights are not specified"
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum ConvergenceMethod {
    Exact { cap: usize },
    Mc(McOptions),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConvergenceOptions {
    pub tol: f64,
    pub maxima: MaximaOptions,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        ConvergenceOptions {
            tol: 0.02,
            maxima: MaximaOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConvergenceRow {
    pub n: usize,
    pub value: f64,
    pub stderr: Option<f64>,
    pub prediction: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConvergenceTable {
    pub beta: f64,
    pub observable: String,
    pub prediction: f64,
    pub rows: Vec<ConvergenceRow>,
    pub tol: f64,
    pub pass: bool,
}

/// Roundoff allowance when comparing consecutive gaps.
pub const TREND_SLACK: f64 = 1e-12;

/// PASS iff the gap is non-increasing over the last three sizes and the final gap is below `tol`.
pub fn trend_pass(gaps: &[f64], tol: f64) -> bool {
    let tail = &gaps[gaps.len().saturating_sub(3)..];
    !gaps.is_empty() && tail.windows(2).all(|w| w[1] <= w[0] + TREND_SLACK) && *gaps.last().unwrap_or(&f64::INFINITY) < tol
}

pub fn convergence_test(
    pm: &PressureMap,
    beta: f64,
    f: &Observable,
    n_list: &[usize],
    method: &ConvergenceMethod,
    opts: &ConvergenceOptions,
) -> Result<ConvergenceTable> {
    let maxima = find_maxima(pm, beta, &opts.maxima)?;
    let mixture = limit_mixture(pm, &maxima)?;
    let prediction = mixture.predict(pm, f)?;
    convergence_against(pm.model(), beta, f, n_list, method, prediction, opts.tol)
}

/// Convergence table against a given prediction.
pub fn convergence_against(
    model: &Model,
    beta: f64,
    f: &Observable,
    n_list: &[usize],
    method: &ConvergenceMethod,
    prediction: f64,
    tol: f64,
) -> Result<ConvergenceTable> {
    if n_list.is_empty() {
        return Err(Error::invalid("empty list of system sizes"));
    }
    let rows = n_list
        .iter()
        .map(|&n| {
            let est = match method {
                ConvergenceMethod::Exact { cap } => exact_pgm(model, n, beta, f, *cap)?,
                ConvergenceMethod::Mc(o) => mc_pgm(model, n, beta, f, o)?,
            };
            Ok(ConvergenceRow {
                n,
                value: est.value,
                stderr: est.stderr(),
                prediction,
                gap: (est.value - prediction).abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
    Ok(ConvergenceTable {
        beta,
        observable: f.name().to_string(),
        prediction,
        pass: trend_pass(&gaps, tol),
        rows,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::{build_circle_alphabet, build_finite_alphabet, build_uniform_alphabet, TransitionFn};
    use crate::potential::PotentialVec;

    fn spin() -> Model {
        let a = build_finite_alphabet(&["+1", "-1"], &[0.5, 0.5]).unwrap();
        let t = TransitionFn::full(2);
        let p = PotentialVec::plus_minus(&a, &t).unwrap();
        Model::new(a, t, p).unwrap()
    }

    fn indicators(q: usize) -> Model {
        let labels: Vec<String> = (1..=q).map(|i| i.to_string()).collect();
        let a = build_uniform_alphabet(&labels).unwrap();
        let t = TransitionFn::full(q);
        let p = PotentialVec::indicators(&a, &t).unwrap();
        Model::new(a, t, p).unwrap()
    }

    fn xy_model() -> Model {
        let a = build_circle_alphabet(64).unwrap();
        let t = TransitionFn::full(64);
        let p = PotentialVec::xy(&a, &t).unwrap();
        Model::new(a, t, p).unwrap()
    }

    fn choose(n: u64, k: u64) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn hamiltonian_examples() {
        let m = indicators(3);
        let n = 6;
        assert_eq!(hamiltonian(&m, &vec![1; n]).unwrap(), -(n as f64) / 2.0);
        let m2 = indicators(2);
        assert_eq!(hamiltonian(&m2, &[0, 1, 0, 1]).unwrap(), -1.0);
        let th = [0.3, -1.2, 2.0];
        let direct: f64 = th
            .iter()
            .flat_map(|a| th.iter().map(move |b| (a - b as &f64).cos()))
            .sum::<f64>()
            * (-1.0 / 6.0);
        assert!((hamiltonian_angles(&th) - direct).abs() < 1e-15);
    }

    #[test]
    fn periodic_extension_for_deeper_potentials() {
        let a = build_uniform_alphabet(&["0", "1"]).unwrap();
        let t = TransitionFn::full(2);
        let rows = vec![vec![1.0], vec![0.0], vec![0.0], vec![1.0]];
        let p = PotentialVec::table(&a, &t, 2, &rows).unwrap();
        let m = Model::new(a, t, p).unwrap();
        // agreements around the cycle 0 0 1: (0,0), (0,1), (1,0) -> S = 1
        assert_eq!(hamiltonian(&m, &[0, 0, 1]).unwrap(), -1.0 / 6.0);
    }

    #[test]
    fn exact_matches_hand_sum() {
        let m = spin();
        let f = Observable::indicator_word(&[0]);
        let est = exact_pgm(&m, 4, 1.0, &f, DEFAULT_EXACT_CAP).unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for k in 0..=4u64 {
            let w = choose(4, k) / 16.0 * (((2 * k) as f64 - 4.0).powi(2) / 8.0).exp();
            num += w * k as f64 / 4.0;
            den += w;
        }
        assert!((est.value - num / den).abs() < 1e-15);
        assert!((est.log_z - den.ln()).abs() < 1e-14);
    }

    #[test]
    fn beta_zero_is_product_measure() {
        let m = spin();
        let f = Observable::indicator_word(&[0, 0]);
        let est = exact_pgm(&m, 30, 0.0, &f, DEFAULT_EXACT_CAP).unwrap();
        assert!((est.value - 0.25).abs() < 1e-14);
        assert!(est.log_z.abs() < 1e-13);
    }

    #[test]
    fn odd_observable_vanishes() {
        let m = spin();
        let f = Observable::site(&[1.0, -1.0]);
        for n in [5, 40, 101] {
            let est = exact_pgm(&m, n, 1.7, &f, DEFAULT_EXACT_CAP).unwrap();
            assert!(est.value.abs() < 1e-14, "n={n} value={}", est.value);
        }
    }

    #[test]
    fn dp_agrees_with_multinomial_path() {
        let m = indicators(3);
        let f = Observable::indicator_word(&[0, 2]);
        let (v1, z1) = exact_free(&m, 20, 2.5, &f, DEFAULT_EXACT_CAP).unwrap();
        let (v2, z2) = exact_dp(&m, 20, 2.5, &f, DEFAULT_EXACT_CAP).unwrap();
        assert!((v1 - v2).abs() < 1e-13);
        assert!((z1 - z2).abs() < 1e-12);
    }

    #[test]
    fn constrained_dp_against_brute_force() {
        let a = build_finite_alphabet(&["+1", "-1"], &[0.3, 0.7]).unwrap();
        let t = TransitionFn::from_rows(&[vec![0, 1], vec![1, 1]]).unwrap();
        let p = PotentialVec::plus_minus(&a, &t).unwrap();
        let m = Model::new(a.clone(), t.clone(), p).unwrap();
        let f = Observable::indicator_word(&[1, 1]);
        let n = 9;
        let beta = 1.3;
        let words = enumerate_words(&t, n, WordConstraint::Free, 1 << 12).unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for w in &words.words {
            let rho: f64 = w.iter().map(|&z| a.weight(z)).product();
            let wt = rho * (-beta * hamiltonian(&m, w).unwrap()).exp();
            den += wt;
            num += wt * f.eval_nodes(&a, w);
        }
        let est = exact_pgm(&m, n, beta, &f, DEFAULT_EXACT_CAP).unwrap();
        assert!((est.value - num / den).abs() < 1e-14);
        assert!((est.log_z - den.ln()).abs() < 1e-13);
    }

    #[test]
    fn cap_and_depth_guards() {
        let m = indicators(3);
        let f = Observable::indicator_word(&[0]);
        assert!(matches!(exact_pgm(&m, 1000, 1.0, &f, 1000), Err(Error::CapExceeded { .. })));
        let a = build_uniform_alphabet(&["0", "1"]).unwrap();
        let t = TransitionFn::full(2);
        let p = PotentialVec::table(&a, &t, 2, &[vec![1.0], vec![0.0], vec![0.0], vec![1.0]]).unwrap();
        let deep = Model::new(a, t, p).unwrap();
        assert!(matches!(
            exact_pgm(&deep, 10, 1.0, &f, DEFAULT_EXACT_CAP),
            Err(Error::DepthUnsupported { depth: 2, .. })
        ));
    }

    #[test]
    fn mc_at_beta_zero_is_plain_mean() {
        let m = spin();
        let f = Observable::indicator_word(&[0]);
        let opts = McOptions {
            samples: 20_000,
            seed: 3,
            proposal: Proposal::Product,
        };
        let est = mc_pgm(&m, 10, 0.0, &f, &opts).unwrap();
        match est.method {
            PgmMethod::Mc { ess, .. } => assert!((ess - 20_000.0).abs() < 1e-6),
            _ => unreachable!(),
        }
        assert!((est.value - 0.5).abs() < 4.0 * est.stderr().unwrap());
    }

    #[test]
    fn mc_matches_exact() {
        let m = spin();
        let f = Observable::indicator_word(&[0]);
        let exact = exact_pgm(&m, 50, 0.5, &f, DEFAULT_EXACT_CAP).unwrap();
        let opts = McOptions {
            samples: 50_000,
            seed: 9,
            proposal: Proposal::Product,
        };
        let mc = mc_pgm(&m, 50, 0.5, &f, &opts).unwrap();
        assert!((mc.value - exact.value).abs() < 3.0 * mc.stderr().unwrap());
        assert!((mc.log_z - exact.log_z).abs() < 0.05);
    }

    #[test]
    fn latent_proposal_matches_exact_when_ordered() {
        let m = spin();
        let f = Observable::indicator_word(&[0, 0]);
        let exact = exact_pgm(&m, 200, 2.0, &f, DEFAULT_EXACT_CAP).unwrap();
        let opts = McOptions {
            samples: 100_000,
            seed: 5,
            proposal: Proposal::LatentField,
        };
        let mc = mc_pgm(&m, 200, 2.0, &f, &opts).unwrap();
        assert!((mc.value - exact.value).abs() < 4.0 * mc.stderr().unwrap());
        assert!((mc.log_z - exact.log_z).abs() < 1e-2);
    }

    #[test]
    fn latent_proposal_on_indicator_plane() {
        let m = indicators(2);
        let f = Observable::indicator_word(&[1]);
        let exact = exact_pgm(&m, 80, 3.0, &f, DEFAULT_EXACT_CAP).unwrap();
        let opts = McOptions {
            samples: 60_000,
            seed: 1,
            proposal: Proposal::LatentField,
        };
        let mc = mc_pgm(&m, 80, 3.0, &f, &opts).unwrap();
        assert!((mc.value - exact.value).abs() < 4.0 * mc.stderr().unwrap());
    }

    #[test]
    fn mc_is_deterministic_under_seed() {
        let m = spin();
        let f = Observable::indicator_word(&[0]);
        let opts = McOptions {
            samples: 40_000,
            seed: 17,
            proposal: Proposal::Product,
        };
        let a = mc_pgm(&m, 30, 0.8, &f, &opts).unwrap();
        let b = mc_pgm(&m, 30, 0.8, &f, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn low_ess_is_reported() {
        let m = spin();
        let f = Observable::indicator_word(&[0]);
        let opts = McOptions {
            samples: 2_000,
            seed: 1,
            proposal: Proposal::Product,
        };
        assert!(matches!(mc_pgm(&m, 400, 4.0, &f, &opts), Err(Error::LowEss { .. })));
    }

    #[test]
    fn xy_rotational_symmetry() {
        let m = xy_model();
        let opts = McOptions {
            samples: 50_000,
            seed: 2,
            proposal: Proposal::Product,
        };
        let est = mc_pgm(&m, 50, 1.0, &Observable::cos_first(), &opts).unwrap();
        assert!(est.value.abs() < 3.0 * est.stderr().unwrap());
    }

    #[test]
    fn hubbard_stratonovich() {
        assert!(hubbard_stratonovich_check(&[0.0], 16).unwrap() < 1e-14);
        assert!(hubbard_stratonovich_check(&[1.0], 64).unwrap() < 1e-12);
        assert!(hubbard_stratonovich_check(&[1.0, 2.0], 64).unwrap() < 1e-10);
        assert!(hubbard_stratonovich_check(&[6.0], 64).is_err());
    }

    #[test]
    fn mixture_weights() {
        let pm = PressureMap::new(spin());
        let ms = find_maxima(&pm, 0.5, &MaximaOptions::default()).unwrap();
        let mix = limit_mixture(&pm, &ms).unwrap();
        assert_eq!(mix.components.len(), 1);
        assert_eq!(mix.components[0].weight, 1.0);
        let ms = find_maxima(&pm, 2.0, &MaximaOptions::default()).unwrap();
        let mix = limit_mixture(&pm, &ms).unwrap();
        assert_eq!(mix.components.len(), 2);
        for c in &mix.components {
            assert!((c.weight - 0.5).abs() < 1e-9);
        }
        let ms = find_maxima(&pm, 1.0, &MaximaOptions::default()).unwrap();
        let mix = limit_mixture(&pm, &ms).unwrap();
        assert_eq!(mix.components[0].flatness_order, Some(4));
    }

    #[test]
    fn potts_mixture_is_symmetric() {
        let pm = PressureMap::new(indicators(3));
        let ms = find_maxima(&pm, 4.0, &MaximaOptions::default()).unwrap();
        let mix = limit_mixture(&pm, &ms).unwrap();
        assert_eq!(mix.components.len(), 3);
        for c in &mix.components {
            assert!((c.weight - 1.0 / 3.0).abs() < 1e-6);
        }
        let f = Observable::indicator_word(&[0]);
        assert!((mix.predict(&pm, &f).unwrap() - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn beta_zero_convergence_is_exact() {
        let pm = PressureMap::new(spin());
        let f = Observable::indicator_word(&[0, 1]);
        let table = convergence_test(
            &pm,
            0.0,
            &f,
            &[10, 20, 40],
            &ConvergenceMethod::Exact { cap: DEFAULT_EXACT_CAP },
            &ConvergenceOptions::default(),
        )
        .unwrap();
        assert!(table.pass);
        assert!(table.rows.iter().all(|r| r.gap < 1e-14));
    }

    #[test]
    fn trend_rule() {
        assert!(trend_pass(&[0.5, 0.1, 0.05, 0.01], 0.02));
        assert!(!trend_pass(&[0.1, 0.05, 0.06], 0.1));
        assert!(!trend_pass(&[0.1, 0.05, 0.03], 0.02));
    }
}
