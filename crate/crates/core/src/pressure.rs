//! Pressure `P(t) = log r_{t . psi}`, its derivatives and the Legendre entropy.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::{Arc, RwLock};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transfer::{dot, spectral_solve, DiscretizedTransfer, Model, SolveOptions, SpectralData};

/// Memo tables larger than this are dropped wholesale.
const CACHE_LIMIT: usize = 1 << 18;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PressurePoint {
    pub t: Vec<f64>,
    #[serde(rename = "P")]
    pub p: f64,
    pub grad: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hess: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum EntropyStatus {
    Finite,
    MinusInfinity,
    Boundary,
}

impl EntropyStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            EntropyStatus::Finite => "finite",
            EntropyStatus::MinusInfinity => "minusInfinity",
            EntropyStatus::Boundary => "boundary",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EntropyValue {
    pub z: Vec<f64>,
    /// `-inf` when `status` is `MinusInfinity`.
    #[serde(rename = "H")]
    pub h: f64,
    pub argmin_t: Option<Vec<f64>>,
    pub status: EntropyStatus,
}

/// Gradient size below which the minimizer is polished by one plain Newton step.
const STALL_GRADIENT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EntropyOptions {
    /// Search box half-width; `None` uses `4 ||psi||_inf + 1`.
    pub k_search: Option<f64>,
    /// Coarse grid points per axis.
    pub grid: usize,
    pub refine: bool,
    pub max_iter: usize,
}

impl Default for EntropyOptions {
    fn default() -> Self {
        EntropyOptions {
            k_search: None,
            grid: 0,
            refine: true,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DualityReport {
    /// `max (H(z) + t.z - P(t))` over the grids; should be `<= 0`.
    pub one_sided_violation: f64,
    /// `max_t |P(t) - max_z (H(z) + t.z)|`.
    pub reconstruction_error: f64,
}

/// Memoized pressure map of one model.
#[derive(Debug)]
pub struct PressureMap {
    model: Arc<Model>,
    opts: SolveOptions,
    cache: RwLock<HashMap<Vec<u64>, Arc<Solved>>>,
}

#[derive(Debug)]
struct Solved {
    spectral: SpectralData,
    grad: Vec<f64>,
}

impl PressureMap {
    pub fn new(model: Model) -> Self {
        Self::with_options(Arc::new(model), SolveOptions::default())
    }

    pub fn with_options(model: Arc<Model>, opts: SolveOptions) -> Self {
        PressureMap {
            model,
            opts,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn shared_model(&self) -> Arc<Model> {
        Arc::clone(&self.model)
    }

    pub fn options(&self) -> &SolveOptions {
        &self.opts
    }

    pub fn q(&self) -> usize {
        self.model.q()
    }

    /// Default search box `4 ||psi||_inf + 1`.
    pub fn default_k(&self) -> f64 {
        self.model.potential().default_search_box()
    }

    pub fn operator(&self, t: &[f64]) -> Result<DiscretizedTransfer> {
        self.model.operator(t)
    }

    fn solved(&self, t: &[f64]) -> Result<Arc<Solved>> {
        let key: Vec<u64> = t.iter().map(|x| (x + 0.0).to_bits()).collect();
        if let Some(hit) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let op = self.model.operator(t)?;
        let spectral = spectral_solve(&op, &self.opts)?;
        let q = self.q();
        let mut grad = vec![0.0; q];
        for (s, w) in self.model.states().words().iter().enumerate() {
            let weight = spectral.g[s] * spectral.nu[s];
            for (gi, pi) in grad.iter_mut().zip(self.model.potential().at_word(w)) {
                *gi += pi * weight;
            }
        }
        let solved = Arc::new(Solved { spectral, grad });
        let mut cache = self.cache.write().expect("cache lock");
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, Arc::clone(&solved));
        Ok(solved)
    }

    pub fn spectral(&self, t: &[f64]) -> Result<SpectralData> {
        Ok(self.solved(t)?.spectral.clone())
    }

    pub fn value(&self, t: &[f64]) -> Result<f64> {
        Ok(self.solved(t)?.spectral.logr)
    }

    /// `grad P(t) = int psi dmu_{t . psi}`.
    pub fn gradient(&self, t: &[f64]) -> Result<Vec<f64>> {
        Ok(self.solved(t)?.grad.clone())
    }

    pub fn pressure(&self, t: &[f64]) -> Result<PressurePoint> {
        let s = self.solved(t)?;
        Ok(PressurePoint {
            t: t.to_vec(),
            p: s.spectral.logr,
            grad: s.grad.clone(),
            hess: None,
        })
    }

    /// Pressure point with the Hessian filled in.
    pub fn pressure_with_hessian(&self, t: &[f64], h: f64) -> Result<PressurePoint> {
        let mut p = self.pressure(t)?;
        let hm = self.hessian(t, h)?;
        p.hess = Some(rows(&hm));
        Ok(p)
    }

    /// `log r_0`.
    pub fn h_top(&self) -> Result<f64> {
        self.value(&vec![0.0; self.q()])
    }

    /// Central differences of the analytic gradient, symmetrized.
    pub fn hessian(&self, t: &[f64], h: f64) -> Result<DMatrix<f64>> {
        if !(1e-6..=1e-2).contains(&h) {
            return Err(Error::OutOfRange(format!("hessian step {h} outside [1e-6, 1e-2]")));
        }
        self.hessian_unchecked(t, h)
    }

    pub(crate) fn hessian_unchecked(&self, t: &[f64], h: f64) -> Result<DMatrix<f64>> {
        let q = self.q();
        let mut m = DMatrix::zeros(q, q);
        let mut tp = t.to_vec();
        for j in 0..q {
            tp[j] = t[j] + h;
            let gp = self.gradient(&tp)?;
            tp[j] = t[j] - h;
            let gm = self.gradient(&tp)?;
            tp[j] = t[j];
            for i in 0..q {
                m[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        Ok((&m + m.transpose()) * 0.5)
    }

    /// `H(z) = inf_t { P(t) - t.z }`.
    pub fn entropy(&self, z: &[f64], opts: &EntropyOptions) -> Result<EntropyValue> {
        let q = self.q();
        if z.len() != q {
            return Err(Error::DimensionMismatch { expected: q, got: z.len() });
        }
        let k = opts.k_search.unwrap_or_else(|| self.default_k());
        if !(k > 0.0) {
            return Err(Error::OutOfRange("search box must be positive".into()));
        }
        let f = |t: &[f64]| -> Result<f64> { Ok(self.value(t)? - dot(t, z)) };

        // Coarse grid.
        let per_axis = if opts.grid > 1 {
            opts.grid
        } else {
            match q {
                1 => 81,
                2 => 21,
                3 => 11,
                _ => 5,
            }
        };
        let axis: Vec<f64> = (0..per_axis)
            .map(|i| -k + 2.0 * k * i as f64 / (per_axis - 1) as f64)
            .collect();
        let mut best_t = vec![0.0; q];
        let mut best_f = f(&best_t)?;
        let total = per_axis
            .checked_pow(q as u32)
            .filter(|&n| n <= 1 << 20)
            .ok_or(Error::CapExceeded {
                what: "entropy grid",
                needed: usize::MAX,
                cap: 1 << 20,
            })?;
        let mut t = vec![0.0; q];
        for idx in 0..total {
            let mut r = idx;
            for slot in t.iter_mut() {
                *slot = axis[r % per_axis];
                r /= per_axis;
            }
            let v = f(&t)?;
            if v < best_f {
                best_f = v;
                best_t.copy_from_slice(&t);
            }
        }
        if !opts.refine {
            return Ok(EntropyValue {
                z: z.to_vec(),
                h: best_f,
                argmin_t: Some(best_t),
                status: EntropyStatus::Finite,
            });
        }

        // Damped Newton descent.
        let radius = 8.0 * k;
        let mut t = best_t;
        let mut ft = best_f;
        let mut converged = false;
        let mut escaped = false;
        for _ in 0..opts.max_iter {
            let g: Vec<f64> = self.gradient(&t)?.iter().zip(z).map(|(a, b)| a - b).collect();
            let gmax = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if gmax < 1e-11 {
                converged = true;
                break;
            }
            let hm = self.hessian_unchecked(&t, 1e-4)?;
            let scale = 1.0 + hm.amax();
            if gmax < STALL_GRADIENT {
                // f is flat to roundoff here, so finish with one plain Newton step.
                let sys = &hm + DMatrix::identity(q, q) * (1e-10 * scale);
                if let Some(c) = sys.cholesky() {
                    let step = c.solve(&(-DVector::from_column_slice(&g)));
                    let cand: Vec<f64> = t.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                    let gc = self.gradient(&cand)?;
                    let gcmax = gc.iter().zip(z).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                    if gcmax < gmax {
                        ft = f(&cand)?.min(ft);
                        t = cand;
                    }
                }
                converged = true;
                break;
            }
            let mut lambda = 1e-10 * scale;
            let gv = DVector::from_column_slice(&g);
            let mut accepted = false;
            while lambda < 1e10 * scale {
                let sys = &hm + DMatrix::identity(q, q) * lambda;
                let Some(step) = sys.cholesky().map(|c| c.solve(&(-&gv))) else {
                    lambda *= 10.0;
                    continue;
                };
                let cand: Vec<f64> = t.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                if norm(&cand) > radius {
                    t = cand;
                    escaped = true;
                    break;
                }
                let fc = f(&cand)?;
                if fc <= ft + 1e-4 * gv.dot(&step) || fc < ft - 1e-15 * ft.abs().max(1.0) {
                    t = cand;
                    ft = fc;
                    accepted = true;
                    break;
                }
                lambda *= 10.0;
            }
            if escaped || !accepted {
                break;
            }
        }
        let tn = norm(&t);
        if converged && tn <= k {
            return Ok(EntropyValue {
                z: z.to_vec(),
                h: ft,
                argmin_t: Some(t),
                status: EntropyStatus::Finite,
            });
        }
        if tn == 0.0 {
            return Err(Error::AmbiguousBoundary { z: z.to_vec() });
        }

        // Radial slope test along the descent direction.
        let u: Vec<f64> = t.iter().map(|x| x / tn).collect();
        let at = |r: f64| -> Result<f64> { f(&u.iter().map(|x| x * r).collect::<Vec<_>>()) };
        let (f2, f4, f8) = (at(2.0 * k)?, at(4.0 * k)?, at(8.0 * k)?);
        let s1 = (f2 - f4) / (2.0 * k);
        let s2 = (f4 - f8) / (4.0 * k);
        if s2 > 1e-8 && s2 >= 0.45 * s1 {
            return Ok(EntropyValue {
                z: z.to_vec(),
                h: f64::NEG_INFINITY,
                argmin_t: None,
                status: EntropyStatus::MinusInfinity,
            });
        }
        if converged && !escaped && f8 >= ft - 1e-12 * ft.abs().max(1.0) {
            return Ok(EntropyValue {
                z: z.to_vec(),
                h: ft,
                argmin_t: Some(t),
                status: EntropyStatus::Finite,
            });
        }
        if (f4 - f8).abs() < 1e-10 {
            let h = if escaped { f8.min(f(&t)?) } else { ft.min(f8) };
            return Ok(EntropyValue {
                z: z.to_vec(),
                h,
                argmin_t: None,
                status: EntropyStatus::Boundary,
            });
        }
        Err(Error::AmbiguousBoundary { z: z.to_vec() })
    }

    /// Legendre duality on grids of `t` and `z`.
    pub fn duality_check(&self, t_grid: &[Vec<f64>], z_grid: &[Vec<f64>], opts: &EntropyOptions) -> Result<DualityReport> {
        let hz: Vec<(Vec<f64>, f64)> = z_grid
            .iter()
            .map(|z| self.entropy(z, opts).map(|e| (z.clone(), e.h)))
            .collect::<Result<_>>()?;
        let mut one_sided = f64::NEG_INFINITY;
        let mut recon: f64 = 0.0;
        for t in t_grid {
            let p = self.value(t)?;
            let mut sup = f64::NEG_INFINITY;
            for (z, h) in &hz {
                if h.is_finite() {
                    let v = h + dot(t, z);
                    one_sided = one_sided.max(v - p);
                    sup = sup.max(v);
                }
            }
            recon = recon.max((p - sup).abs());
        }
        Ok(DualityReport {
            one_sided_violation: one_sided,
            reconstruction_error: recon,
        })
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Full round-trip formatting used by every CSV emitter.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:.16e}")
    }
}

/// CSV rows `t_1..t_q, P, grad_1..grad_q`.
pub fn pressure_surface_csv(pm: &PressureMap, grid: &[Vec<f64>]) -> Result<String> {
    let q = pm.q();
    let mut out = String::new();
    let head: Vec<String> = (1..=q)
        .map(|i| format!("t{i}"))
        .chain(std::iter::once("P".to_string()))
        .chain((1..=q).map(|i| format!("grad{i}")))
        .collect();
    writeln!(out, "{}", head.join(",")).ok();
    for t in grid {
        let p = pm.pressure(t)?;
        let cells: Vec<String> = t
            .iter()
            .copied()
            .chain(std::iter::once(p.p))
            .chain(p.grad.iter().copied())
            .map(num)
            .collect();
        writeln!(out, "{}", cells.join(",")).ok();
    }
    Ok(out)
}

/// CSV rows `z_1..z_q, H, status`.
pub fn entropy_profile_csv(pm: &PressureMap, grid: &[Vec<f64>], opts: &EntropyOptions) -> Result<String> {
    let q = pm.q();
    let mut out = String::new();
    let head: Vec<String> = (1..=q).map(|i| format!("z{i}")).collect();
    writeln!(out, "{},H,status", head.join(",")).ok();
    for z in grid {
        let (h, status) = match pm.entropy(z, opts) {
            Ok(e) => (num(e.h), e.status.as_str().to_string()),
            Err(Error::AmbiguousBoundary { .. }) => ("nan".to_string(), "ambiguous".to_string()),
            Err(e) => return Err(e),
        };
        let cells: Vec<String> = z.iter().copied().map(num).collect();
        writeln!(out, "{},{h},{status}", cells.join(",")).ok();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::{build_circle_alphabet, build_finite_alphabet, build_uniform_alphabet, TransitionFn};
    use crate::potential::PotentialVec;

    fn cwp(q: usize) -> PressureMap {
        let labels: Vec<String> = (1..=q).map(|i| i.to_string()).collect();
        let a = build_uniform_alphabet(&labels).unwrap();
        let t = TransitionFn::full(q);
        let p = PotentialVec::indicators(&a, &t).unwrap();
        PressureMap::new(Model::new(a, t, p).unwrap())
    }

    fn spin() -> PressureMap {
        let a = build_finite_alphabet(&["+1", "-1"], &[0.5, 0.5]).unwrap();
        let t = TransitionFn::full(2);
        let p = PotentialVec::plus_minus(&a, &t).unwrap();
        PressureMap::new(Model::new(a, t, p).unwrap())
    }

    fn xy(m: usize) -> PressureMap {
        let a = build_circle_alphabet(m).unwrap();
        let t = TransitionFn::full(m);
        let p = PotentialVec::xy(&a, &t).unwrap();
        PressureMap::new(Model::new(a, t, p).unwrap())
    }

    fn logsumexp_mean(t: &[f64]) -> f64 {
        let mx = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        mx + (t.iter().map(|x| (x - mx).exp()).sum::<f64>() / t.len() as f64).ln()
    }

    // Independent Bessel oracles by power series.
    fn i0(x: f64) -> f64 {
        let (mut term, mut sum) = (1.0, 1.0);
        for k in 1..300 {
            term *= (x / 2.0).powi(2) / (k * k) as f64;
            sum += term;
        }
        sum
    }

    fn i1(x: f64) -> f64 {
        let mut term = x / 2.0;
        let mut sum = term;
        for k in 1..300 {
            term *= (x / 2.0).powi(2) / (k * (k + 1)) as f64;
            sum += term;
        }
        sum
    }

    #[test]
    fn cwp3_pressure_and_softmax() {
        let pm = cwp(3);
        let t = [0.3, -1.2, 2.0];
        let p = pm.pressure(&t).unwrap();
        assert!((p.p - logsumexp_mean(&t)).abs() < 1e-14);
        let z: f64 = t.iter().map(|x| x.exp()).sum();
        for i in 0..3 {
            assert!((p.grad[i] - t[i].exp() / z).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_field_gradient_is_mean() {
        let p = spin().pressure(&[0.0]).unwrap();
        assert_eq!(p.p, 0.0);
        assert!(p.grad[0].abs() < 1e-16);
    }

    #[test]
    fn xy_pressure_is_log_bessel() {
        let pm = xy(256);
        let x = 2.5;
        let p = pm.pressure(&[x, 0.0]).unwrap();
        assert!((p.p - i0(x).ln()).abs() < 1e-13);
        assert!((p.grad[0] - i1(x) / i0(x)).abs() < 1e-13);
        assert!(p.grad[1].abs() < 1e-14);
    }

    #[test]
    fn hessians() {
        let h = cwp(2).hessian(&[0.0, 0.0], 1e-4).unwrap();
        for (i, j, v) in [(0, 0, 0.25), (0, 1, -0.25), (1, 0, -0.25), (1, 1, 0.25)] {
            assert!((h[(i, j)] - v).abs() < 1e-8);
        }
        let pm = xy(256);
        let x: f64 = 1.7;
        let h = pm.hessian(&[x, 0.0], 1e-4).unwrap();
        let r = i1(x) / i0(x);
        let radial = 1.0 - r / x - r * r;
        assert!((h[(0, 0)] - radial).abs() < 1e-7);
        assert!((h[(1, 1)] - r / x).abs() < 1e-7);
        let hs = spin().hessian(&[0.4], 1e-4).unwrap();
        assert!((hs[(0, 0)] - 1.0 / 0.4f64.cosh().powi(2)).abs() < 1e-8);
        assert!(spin().hessian(&[0.0], 1.0).is_err());
    }

    #[test]
    fn entropy_at_barycenter() {
        let e = cwp(2).entropy(&[0.5, 0.5], &EntropyOptions::default()).unwrap();
        assert_eq!(e.status, EntropyStatus::Finite);
        assert!(e.h.abs() < 1e-12);
        let t = e.argmin_t.unwrap();
        assert!((t[0] - t[1]).abs() < 1e-8);
    }

    #[test]
    fn entropy_outside_simplex() {
        let e = cwp(2).entropy(&[2.0, 0.0], &EntropyOptions::default()).unwrap();
        assert_eq!(e.status, EntropyStatus::MinusInfinity);
        assert_eq!(e.h, f64::NEG_INFINITY);
        let e = cwp(2).entropy(&[0.3, 0.3], &EntropyOptions::default()).unwrap();
        assert_eq!(e.status, EntropyStatus::MinusInfinity);
    }

    #[test]
    fn entropy_on_the_edge_of_the_spin_interval() {
        let e = spin().entropy(&[1.0], &EntropyOptions::default()).unwrap();
        assert_eq!(e.status, EntropyStatus::Boundary);
        assert!((e.h + 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn entropy_matches_legendre_identity() {
        let pm = spin();
        for t0 in [-2.0, -0.5, 0.1, 1.3] {
            let p = pm.pressure(&[t0]).unwrap();
            let e = pm.entropy(&p.grad, &EntropyOptions::default()).unwrap();
            assert!((e.h - (p.p - t0 * p.grad[0])).abs() < 1e-10, "t0={t0}");
        }
        let pm = cwp(3);
        let t0 = [0.4, -0.3, 1.1];
        let p = pm.pressure(&t0).unwrap();
        let e = pm.entropy(&p.grad, &EntropyOptions::default()).unwrap();
        assert!((e.h - (p.p - dot(&t0, &p.grad))).abs() < 1e-9);
    }

    #[test]
    fn xy_boundary_circle_is_minus_infinity() {
        let pm = xy(128);
        let e = pm.entropy(&[1.0, 0.0], &EntropyOptions::default()).unwrap();
        assert_eq!(e.status, EntropyStatus::MinusInfinity);
        let e = pm.entropy(&[0.5, 0.0], &EntropyOptions::default()).unwrap();
        assert_eq!(e.status, EntropyStatus::Finite);
    }

    #[test]
    fn duality_single_point() {
        let pm = spin();
        let rep = pm
            .duality_check(&[vec![0.0]], &[vec![0.0]], &EntropyOptions::default())
            .unwrap();
        assert!(rep.reconstruction_error < 1e-14);
    }

    #[test]
    fn csv_emitters() {
        let pm = spin();
        let s = pressure_surface_csv(&pm, &[vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(s.lines().count(), 3);
        assert!(s.starts_with("t1,P,grad1\n"));
        let s = entropy_profile_csv(&pm, &[vec![0.0], vec![3.0]], &EntropyOptions::default()).unwrap();
        assert!(s.lines().nth(2).unwrap().ends_with("-inf,minusInfinity"));
        assert_eq!(num(0.1), "1.0000000000000001e-1");
    }
}
