//! Auxiliary functions `phi_beta`, `phibar_beta`, their maxima and the quadratic pressure.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pressure::{norm, rows, EntropyOptions, PressureMap};
use crate::transfer::{dot, SpectralData};

/// Distinct maximizers are at least this far apart.
pub const CLUSTER_RADIUS: f64 = 1e-6;
/// Global maxima agree in value within this tolerance.
pub const VALUE_TOL: f64 = 1e-9;
/// Smallest `|eigenvalue|` of a non-degenerate Hessian.
pub const DEGENERACY_TOL: f64 = 1e-7;

const HESS_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MaximaOptions {
    /// Search box half-width; `None` uses `4 ||psi||_inf + 1`.
    pub k: Option<f64>,
    /// Grid step; `None` picks `1e-2` for one-dimensional sweeps and `0.25` otherwise.
    pub grid_step: Option<f64>,
    pub multistarts: usize,
    /// Search along the first axis and report orbit representatives.
    pub radial: bool,
}

impl Default for MaximaOptions {
    fn default() -> Self {
        MaximaOptions {
            k: None,
            grid_step: None,
            multistarts: 8,
            radial: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Maximum {
    pub z: Vec<f64>,
    pub value: f64,
    pub hessian: Vec<Vec<f64>>,
    pub min_abs_eigenvalue: f64,
    pub degenerate: bool,
    pub self_consistency_residual: f64,
    /// Set for radial searches: `z` represents a whole orbit.
    pub orbit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MaximaSet {
    pub beta: f64,
    pub maxima: Vec<Maximum>,
    #[serde(rename = "P2")]
    pub p2: f64,
    pub search_box: f64,
    pub radial: bool,
}

impl MaximaSet {
    pub fn any_degenerate(&self) -> bool {
        self.maxima.iter().any(|m| m.degenerate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QuadraticPressure {
    #[serde(rename = "P2")]
    pub p2: f64,
    pub maxima: MaximaSet,
    /// `phibar_beta` at each maximizer.
    pub phibar: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EquilibriumState {
    pub z: Vec<f64>,
    pub t_param: Vec<f64>,
    pub spectral: SpectralData,
    /// `int psi dmu_{beta z . psi}`.
    pub mean: Vec<f64>,
    pub self_consistency: f64,
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta >= 0.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("beta = {beta} must be finite and nonnegative")))
    }
}

fn scaled(t: &[f64], beta: f64) -> Vec<f64> {
    t.iter().map(|x| x * beta).collect()
}

/// `-(beta/2) |t|^2 + P(beta t)`.
pub fn phi_beta(pm: &PressureMap, beta: f64, t: &[f64]) -> Result<f64> {
    check_beta(beta)?;
    Ok(-0.5 * beta * dot(t, t) + pm.value(&scaled(t, beta))?)
}

/// `beta grad P(beta t) - beta t`.
pub fn phi_beta_gradient(pm: &PressureMap, beta: f64, t: &[f64]) -> Result<Vec<f64>> {
    check_beta(beta)?;
    let g = pm.gradient(&scaled(t, beta))?;
    Ok(g.iter().zip(t).map(|(gi, ti)| beta * (gi - ti)).collect())
}

/// `beta^2 Hess P(beta t) - beta I` by differences of the analytic gradient.
pub fn phi_beta_hessian(pm: &PressureMap, beta: f64, t: &[f64]) -> Result<DMatrix<f64>> {
    let q = t.len();
    let hp = pm.hessian_unchecked(&scaled(t, beta), HESS_STEP)?;
    Ok(hp * (beta * beta) - DMatrix::identity(q, q) * beta)
}

/// `H(z) + (beta/2) |z|^2`; `-inf` outside the attainable means.
pub fn phibar_beta(pm: &PressureMap, beta: f64, z: &[f64], opts: &EntropyOptions) -> Result<f64> {
    check_beta(beta)?;
    let e = pm.entropy(z, opts)?;
    Ok(e.h + 0.5 * beta * dot(z, z))
}

pub fn find_maxima(pm: &PressureMap, beta: f64, opts: &MaximaOptions) -> Result<MaximaSet> {
    check_beta(beta)?;
    let q = pm.q();
    let k = opts.k.unwrap_or_else(|| pm.default_k());
    if k < 4.0 * pm.model().potential().sup_norm() {
        return Err(Error::OutOfRange(format!("search box {k} below 4 ||psi||_inf")));
    }
    let radial = opts.radial && q > 1;
    if beta == 0.0 {
        // phi_0 is constant; the critical equation z = grad P(0) picks one point.
        let z = pm.gradient(&vec![0.0; q])?;
        let m = describe(pm, beta, z, radial)?;
        let p2 = m.value;
        return Ok(MaximaSet {
            beta,
            maxima: vec![m],
            p2,
            search_box: k,
            radial,
        });
    }
    let points = if q == 1 || radial {
        sweep_1d(pm, beta, k, opts.grid_step.unwrap_or(1e-2), radial)?
    } else {
        multistart(pm, beta, k, opts.grid_step.unwrap_or(0.25), opts.multistarts.max(1))?
    };
    let mut maxima = points
        .into_iter()
        .map(|z| describe(pm, beta, z, radial))
        .collect::<Result<Vec<_>>>()?;
    let p2 = maxima.iter().map(|m| m.value).fold(f64::NEG_INFINITY, f64::max);
    maxima.retain(|m| m.value >= p2 - VALUE_TOL);
    maxima.sort_by(|a, b| a.z.partial_cmp(&b.z).unwrap_or(std::cmp::Ordering::Equal));
    if maxima.is_empty() {
        return Err(Error::NoConvergence {
            iterations: 0,
            residual: f64::NAN,
        });
    }
    Ok(MaximaSet {
        beta,
        maxima,
        p2,
        search_box: k,
        radial,
    })
}

fn describe(pm: &PressureMap, beta: f64, z: Vec<f64>, radial: bool) -> Result<Maximum> {
    let value = phi_beta(pm, beta, &z)?;
    let hess = phi_beta_hessian(pm, beta, &z)?;
    let min_abs = SymmetricEigen::new(hess.clone())
        .eigenvalues
        .iter()
        .map(|x| x.abs())
        .fold(f64::INFINITY, f64::min);
    let g = pm.gradient(&scaled(&z, beta))?;
    let residual = norm(&z.iter().zip(&g).map(|(a, b)| a - b).collect::<Vec<_>>());
    Ok(Maximum {
        z,
        value,
        hessian: rows(&hess),
        min_abs_eigenvalue: min_abs,
        degenerate: min_abs < DEGENERACY_TOL,
        self_consistency_residual: residual,
        orbit: radial,
    })
}

/// Dense sweep of `phi'` with sign-change bracketing (`q = 1`, or radially along `e_1`).
fn sweep_1d(pm: &PressureMap, beta: f64, k: f64, step: f64, radial: bool) -> Result<Vec<Vec<f64>>> {
    if !(step > 0.0) {
        return Err(Error::OutOfRange("grid step must be positive".into()));
    }
    let q = pm.q();
    let embed = |x: f64| -> Vec<f64> {
        let mut t = vec![0.0; q];
        t[0] = x;
        t
    };
    let deriv = |x: f64| -> Result<f64> { Ok(phi_beta_gradient(pm, beta, &embed(x))?[0]) };
    let n = (k / step).ceil() as i64;
    let lo = if radial { 0 } else { -n };
    let xs: Vec<f64> = (lo..=n).map(|i| i as f64 * step).collect();
    let ds = xs.iter().map(|&x| deriv(x)).collect::<Result<Vec<_>>>()?;
    let eps = 1e-14 * beta.max(1.0);
    let sign = |d: f64| {
        if d > eps {
            1
        } else if d < -eps {
            -1
        } else {
            0
        }
    };
    let ss: Vec<i32> = ds.iter().map(|&d| sign(d)).collect();
    let last = xs.len() - 1;
    let mut roots = Vec::new();
    let mut i = 0;
    while i < xs.len() {
        if ss[i] == 0 {
            let mut j = i;
            while j < last && ss[j + 1] == 0 {
                j += 1;
            }
            let left_ok = i == 0 || ss[i - 1] > 0;
            let right_ok = j == last || ss[j + 1] < 0;
            if left_ok && right_ok {
                let mid = 0.5 * (xs[i] + xs[j]);
                roots.push(if i == j { xs[i] } else { bisect(&deriv, xs[i], xs[j], mid)? });
            }
            i = j + 1;
            continue;
        }
        if i < last && ss[i] > 0 && ss[i + 1] < 0 {
            roots.push(bisect(&deriv, xs[i], xs[i + 1], 0.5 * (xs[i] + xs[i + 1]))?);
        }
        i += 1;
    }
    let mut out: Vec<Vec<f64>> = Vec::new();
    for r in roots {
        if out.iter().all(|p| (p[0] - r).abs() > CLUSTER_RADIUS) {
            out.push(embed(r));
        }
    }
    Ok(out)
}

/// Bisection on a `+ -` bracket of `d`; falls back to `fallback` if the bracket is flat.
fn bisect(d: &impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, fallback: f64) -> Result<f64> {
    let mut da = d(a)?;
    let db = d(b)?;
    if !(da > 0.0 && db < 0.0) {
        if da == 0.0 {
            return Ok(a);
        }
        if db == 0.0 {
            return Ok(b);
        }
        return Ok(fallback);
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let dm = d(m)?;
        if dm == 0.0 {
            return Ok(m);
        }
        if dm > 0.0 {
            a = m;
            da = dm;
        } else {
            b = m;
        }
    }
    let _ = da;
    Ok(0.5 * (a + b))
}

fn multistart(pm: &PressureMap, beta: f64, k: f64, step: f64, multistarts: usize) -> Result<Vec<Vec<f64>>> {
    if !(step > 0.0) {
        return Err(Error::OutOfRange("grid step must be positive".into()));
    }
    let q = pm.q();
    let n = (k / step).floor() as i64;
    let per_axis = (2 * n + 1) as usize;
    let total = per_axis
        .checked_pow(q as u32)
        .filter(|&t| t <= 1 << 22)
        .ok_or(Error::CapExceeded {
            what: "maxima grid",
            needed: usize::MAX,
            cap: 1 << 22,
        })?;
    let mut scored: Vec<(f64, usize)> = Vec::with_capacity(total);
    let mut t = vec![0.0; q];
    for idx in 0..total {
        decode_grid(idx, per_axis, n, step, &mut t);
        scored.push((phi_beta(pm, beta, &t)?, idx));
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut found: Vec<Vec<f64>> = Vec::new();
    for &(_, idx) in scored.iter().take(2 * multistarts) {
        decode_grid(idx, per_axis, n, step, &mut t);
        if let Some(z) = ascend(pm, beta, t.clone())? {
            if found.iter().all(|p| dist(p, &z) > CLUSTER_RADIUS) {
                found.push(z);
            }
        }
    }
    Ok(found)
}

fn decode_grid(mut idx: usize, per_axis: usize, n: i64, step: f64, out: &mut [f64]) {
    for slot in out.iter_mut() {
        *slot = ((idx % per_axis) as i64 - n) as f64 * step;
        idx /= per_axis;
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Damped Newton ascent of `phi_beta`; `None` if it stalls away from a critical point.
fn ascend(pm: &PressureMap, beta: f64, mut t: Vec<f64>) -> Result<Option<Vec<f64>>> {
    let q = t.len();
    let mut f = phi_beta(pm, beta, &t)?;
    for _ in 0..500 {
        let g = phi_beta_gradient(pm, beta, &t)?;
        let gmax = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if gmax < 1e-12 * beta.max(1.0) {
            return Ok(Some(t));
        }
        // Work with the negated Hessian, which is PSD near a maximum.
        let neg = -phi_beta_hessian(pm, beta, &t)?;
        let scale = 1.0 + neg.amax();
        let gv = DVector::from_column_slice(&g);
        let mut lambda = 1e-12 * scale;
        let mut accepted = false;
        while lambda < 1e12 * scale {
            let sys = &neg + DMatrix::identity(q, q) * lambda;
            let Some(step) = sys.cholesky().map(|c| c.solve(&gv)) else {
                lambda *= 10.0;
                continue;
            };
            let cand: Vec<f64> = t.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let fc = phi_beta(pm, beta, &cand)?;
            if fc >= f + 1e-4 * gv.dot(&step) || (fc >= f && step.amax() < 1e-6) {
                t = cand;
                f = fc;
                accepted = true;
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            let resid = gmax / beta;
            return Ok((resid < 1e-8).then_some(t));
        }
    }
    let g = phi_beta_gradient(pm, beta, &t)?;
    let resid = g.iter().fold(0.0f64, |m, x| m.max(x.abs())) / beta;
    Ok((resid < 1e-8).then_some(t))
}

/// `P_2(beta) = max phi_beta`, with `phibar_beta` evaluated at the maximizers.
pub fn quadratic_pressure(pm: &PressureMap, beta: f64, opts: &MaximaOptions) -> Result<QuadraticPressure> {
    let maxima = find_maxima(pm, beta, opts)?;
    let eopts = EntropyOptions::default();
    let phibar = maxima
        .maxima
        .iter()
        .map(|m| phibar_beta(pm, beta, &m.z, &eopts))
        .collect::<Result<Vec<_>>>()?;
    Ok(QuadraticPressure {
        p2: maxima.p2,
        maxima,
        phibar,
    })
}

/// One dynamical Gibbs measure `mu_{beta z_j . psi}` per maximizer.
pub fn equilibrium_states(pm: &PressureMap, maxima: &MaximaSet) -> Result<Vec<EquilibriumState>> {
    maxima
        .maxima
        .iter()
        .map(|m| {
            let t = scaled(&m.z, maxima.beta);
            let spectral = pm.spectral(&t)?;
            let mean = pm.gradient(&t)?;
            let resid = dist(&mean, &m.z);
            Ok(EquilibriumState {
                z: m.z.clone(),
                t_param: t,
                spectral,
                mean,
                self_consistency: resid,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::{build_circle_alphabet, build_finite_alphabet, build_uniform_alphabet, TransitionFn};
    use crate::potential::PotentialVec;
    use crate::transfer::Model;

    fn spin() -> PressureMap {
        let a = build_finite_alphabet(&["+1", "-1"], &[0.5, 0.5]).unwrap();
        let t = TransitionFn::full(2);
        let p = PotentialVec::plus_minus(&a, &t).unwrap();
        PressureMap::new(Model::new(a, t, p).unwrap())
    }

    fn xy() -> PressureMap {
        let a = build_circle_alphabet(256).unwrap();
        let t = TransitionFn::full(256);
        let p = PotentialVec::xy(&a, &t).unwrap();
        PressureMap::new(Model::new(a, t, p).unwrap())
    }

    fn cwp(q: usize) -> PressureMap {
        let labels: Vec<String> = (1..=q).map(|i| i.to_string()).collect();
        let a = build_uniform_alphabet(&labels).unwrap();
        let t = TransitionFn::full(q);
        let p = PotentialVec::indicators(&a, &t).unwrap();
        PressureMap::new(Model::new(a, t, p).unwrap())
    }

    /// Damped fixed-point iteration for `m = tanh(beta m)`, independent of the sweep.
    fn tanh_fixed_point(beta: f64) -> f64 {
        let mut m = 1.0;
        for _ in 0..100_000 {
            m = 0.5 * m + 0.5 * (beta * m).tanh();
        }
        m
    }

    #[test]
    fn phi_closed_forms() {
        let pm = spin();
        assert_eq!(phi_beta(&pm, 1.3, &[0.0]).unwrap(), 0.0);
        let (b, t): (f64, f64) = (1.3, 0.7);
        let expect = -b * t * t / 2.0 + (b * t).cosh().ln();
        assert!((phi_beta(&pm, b, &[t]).unwrap() - expect).abs() < 1e-15);
        assert!(phi_beta(&pm, -1.0, &[t]).is_err());
    }

    #[test]
    fn phibar_at_barycenter() {
        let pm = cwp(2);
        let v = phibar_beta(&pm, 3.0, &[0.5, 0.5], &EntropyOptions::default()).unwrap();
        assert!((v - 0.75).abs() < 1e-12);
        let v = phibar_beta(&pm, 3.0, &[2.0, 0.0], &EntropyOptions::default()).unwrap();
        assert_eq!(v, f64::NEG_INFINITY);
    }

    #[test]
    fn subcritical_spin_has_unique_maximum() {
        let ms = find_maxima(&spin(), 0.5, &MaximaOptions::default()).unwrap();
        assert_eq!(ms.maxima.len(), 1);
        assert!(ms.maxima[0].z[0].abs() < 1e-14);
        assert!(ms.p2.abs() < 1e-15);
        assert!(!ms.maxima[0].degenerate);
    }

    #[test]
    fn supercritical_spin_has_two_maxima() {
        let pm = spin();
        let m = tanh_fixed_point(2.0);
        assert!((m - 0.9575).abs() < 1e-4);
        let ms = find_maxima(&pm, 2.0, &MaximaOptions::default()).unwrap();
        assert_eq!(ms.maxima.len(), 2);
        assert!((ms.maxima[0].z[0] + m).abs() < 1e-10);
        assert!((ms.maxima[1].z[0] - m).abs() < 1e-10);
        let p2 = -m * m + (2.0 * m).cosh().ln();
        assert!((ms.p2 - p2).abs() < 1e-12);
        for mx in &ms.maxima {
            assert!(mx.self_consistency_residual < 1e-8);
        }
    }

    #[test]
    fn critical_spin_maximum_is_degenerate() {
        let ms = find_maxima(&spin(), 1.0, &MaximaOptions::default()).unwrap();
        assert_eq!(ms.maxima.len(), 1);
        assert!(ms.maxima[0].degenerate);
    }

    #[test]
    fn sweep_count_stable_under_refinement() {
        let pm = spin();
        for beta in [0.5, 1.5, 3.0] {
            let coarse = MaximaOptions {
                grid_step: Some(0.02),
                ..Default::default()
            };
            let fine = MaximaOptions {
                grid_step: Some(0.01),
                ..Default::default()
            };
            let a = find_maxima(&pm, beta, &coarse).unwrap().maxima.len();
            let b = find_maxima(&pm, beta, &fine).unwrap().maxima.len();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn beta_zero_gives_h_top() {
        let pm = cwp(3);
        let qp = quadratic_pressure(&pm, 0.0, &MaximaOptions::default()).unwrap();
        assert!(qp.p2.abs() < 1e-15);
        assert_eq!(qp.maxima.maxima.len(), 1);
    }

    #[test]
    fn xy_subcritical_radial() {
        let opts = MaximaOptions {
            radial: true,
            ..Default::default()
        };
        let ms = find_maxima(&xy(), 1.5, &opts).unwrap();
        assert_eq!(ms.maxima.len(), 1);
        assert!(norm(&ms.maxima[0].z) < 1e-12);
    }

    #[test]
    fn xy_supercritical_radial_representative() {
        let pm = xy();
        let opts = MaximaOptions {
            radial: true,
            ..Default::default()
        };
        let qp = quadratic_pressure(&pm, 3.0, &opts).unwrap();
        let ms = &qp.maxima;
        assert_eq!(ms.maxima.len(), 1);
        let r = ms.maxima[0].z[0];
        assert!(r > (1.0f64 / 3.0).sqrt() && r <= 1.0);
        assert!(ms.maxima[0].degenerate && ms.maxima[0].orbit);
        assert!((qp.phibar[0] - qp.p2).abs() < 1e-6);
    }

    #[test]
    fn equilibrium_states_of_spin_model() {
        let pm = spin();
        let ms = find_maxima(&pm, 2.0, &MaximaOptions::default()).unwrap();
        let eq = equilibrium_states(&pm, &ms).unwrap();
        assert_eq!(eq.len(), 2);
        let m = tanh_fixed_point(2.0);
        for (e, sign) in eq.iter().zip([-1.0, 1.0]) {
            let p_plus = (2.0 * sign * m).exp() / (2.0 * (2.0 * m).cosh());
            let mu = e.spectral.dgm();
            assert!((mu[0] - p_plus).abs() < 1e-9);
            assert!(e.self_consistency < 1e-8);
        }
    }

    #[test]
    fn potts_three_symmetric_maxima() {
        let pm = cwp(3);
        let ms = find_maxima(&pm, 4.0, &MaximaOptions::default()).unwrap();
        assert_eq!(ms.maxima.len(), 3, "{:?}", ms.maxima);
        for m in &ms.maxima {
            assert!(m.self_consistency_residual < 1e-8);
            assert!((m.value - ms.p2).abs() < VALUE_TOL);
        }
    }
}
