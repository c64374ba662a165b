//! Mean-field XY model: Bessel functions, the radial auxiliary function and its critical points.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::alphabet::{build_circle_alphabet, TransitionFn};
use crate::error::{Error, Result};
use crate::observable::Observable;
use crate::pgm::{convergence_against, ConvergenceMethod, ConvergenceTable, McOptions, Proposal};
use crate::potential::PotentialVec;
use crate::quadrature::integrate_breaks;
use crate::transfer::Model;

/// Series below this argument, scaled asymptotic expansion above.
const SERIES_LIMIT: f64 = 30.0;
/// Largest argument accepted by the unscaled `I_0`.
pub const I0_MAX_ARG: f64 = 700.0;

fn series(x: f64, nu: u32) -> f64 {
    let y = 0.25 * x * x;
    let mut term = if nu == 0 { 1.0 } else { 0.5 * x };
    let mut sum = term;
    for k in 1..500u32 {
        term *= y / (k as f64 * (k + nu) as f64);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

/// `sum_k (-1)^k a_k(nu) / x^k` of the large-argument expansion.
fn asymptotic(x: f64, nu: u32) -> f64 {
    let mu = 4.0 * (nu * nu) as f64;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200u32 {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (k as f64 * 8.0 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

fn check_arg(x: f64) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::OutOfRange(format!("Bessel argument {x} must be nonnegative")));
    }
    Ok(())
}

/// `e^{-x} I_0(x)` for any `x >= 0`.
pub fn bessel_i0_scaled(x: f64) -> Result<f64> {
    check_arg(x)?;
    if x <= SERIES_LIMIT {
        Ok(series(x, 0) * (-x).exp())
    } else {
        Ok(asymptotic(x, 0) / (2.0 * PI * x).sqrt())
    }
}

/// `e^{-x} I_1(x)` for any `x >= 0`.
pub fn bessel_i1_scaled(x: f64) -> Result<f64> {
    check_arg(x)?;
    if x <= SERIES_LIMIT {
        Ok(series(x, 1) * (-x).exp())
    } else {
        Ok(asymptotic(x, 1) / (2.0 * PI * x).sqrt())
    }
}

/// `I_0(x)` for `0 <= x <= 700`.
pub fn bessel_i0(x: f64) -> Result<f64> {
    check_arg(x)?;
    if x > I0_MAX_ARG {
        return Err(Error::OutOfRange(format!("I0({x}) overflows; use log_bessel_i0")));
    }
    if x <= SERIES_LIMIT {
        Ok(series(x, 0))
    } else {
        Ok(bessel_i0_scaled(x)? * x.exp())
    }
}

/// `I_1(x)` for `0 <= x <= 700`.
pub fn bessel_i1(x: f64) -> Result<f64> {
    check_arg(x)?;
    if x > I0_MAX_ARG {
        return Err(Error::OutOfRange(format!("I1({x}) overflows")));
    }
    if x <= SERIES_LIMIT {
        Ok(series(x, 1))
    } else {
        Ok(bessel_i1_scaled(x)? * x.exp())
    }
}

pub fn log_bessel_i0(x: f64) -> Result<f64> {
    Ok(bessel_i0_scaled(x)?.ln() + x)
}

/// `I_0'(x) / I_0(x) = I_1(x) / I_0(x)`.
pub fn bessel_ratio(x: f64) -> Result<f64> {
    Ok(bessel_i1_scaled(x)? / bessel_i0_scaled(x)?)
}

/// `R(y) / y`, continuous at 0 with value 1/2.
fn ratio_over_arg(y: f64) -> Result<f64> {
    if y < 1e-4 {
        Ok(0.5 - y * y / 16.0)
    } else {
        Ok(bessel_ratio(y)? / y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct XyPhi {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

/// `phi_beta(x) = -(beta/2) x^2 + log I_0(beta x)` and its first two derivatives.
pub fn xy_phi(beta: f64, x: f64) -> Result<XyPhi> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::OutOfRange(format!("radius {x} must be nonnegative")));
    }
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::OutOfRange(format!("beta = {beta}")));
    }
    let y = beta * x;
    let r = bessel_ratio(y)?;
    Ok(XyPhi {
        value: -0.5 * beta * x * x + log_bessel_i0(y)?,
        d1: beta * (r - x),
        d2: beta * (beta * (1.0 - ratio_over_arg(y)? - r * r) - 1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Subcritical => "subcritical",
            Regime::Critical => "critical",
            Regime::Supercritical => "supercritical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct XyCriticalData {
    pub beta: f64,
    pub regime: Regime,
    pub r_star: f64,
    pub phi_max: f64,
    pub second_deriv: f64,
    /// `|R(beta r*) - r*|`, zero when `r* = 0`.
    pub residual: f64,
    /// Order of the first nonvanishing derivative of `phi_beta` at `r*`.
    pub flatness_order: u32,
}

/// Maximizer of `phi_beta` on `[0, inf)`.
pub fn xy_critical_point(beta: f64) -> Result<XyCriticalData> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::OutOfRange(format!("beta = {beta} must be positive")));
    }
    let f = |x: f64| -> Result<f64> { Ok(bessel_ratio(beta * x)? - x) };
    let (regime, r_star) = if beta < 2.0 {
        (Regime::Subcritical, 0.0)
    } else if beta == 2.0 {
        // R(2x) - x = -x^3/2 + O(x^5): look for a positive root anyway.
        let mut root = 0.0;
        let n = 10_000;
        for i in 1..n {
            let (a, b) = (i as f64 / n as f64, (i + 1) as f64 / n as f64);
            if f(a)? > 1e-14 && f(b)? < 0.0 {
                root = bisect_root(&f, a, b)?;
                break;
            }
        }
        (Regime::Critical, root)
    } else {
        let lo = ((beta - 2.0) / beta).sqrt() + 1e-12;
        (Regime::Supercritical, bisect_root(&f, lo, 1.0)?)
    };
    let phi = xy_phi(beta, r_star)?;
    let residual = if r_star > 0.0 { f(r_star)?.abs() } else { 0.0 };
    let flatness_order = if phi.d2.abs() > 1e-12 {
        2
    } else {
        // phi_2(x) = -x^4/4 + O(x^6) near 0.
        4
    };
    Ok(XyCriticalData {
        beta,
        regime,
        r_star,
        phi_max: phi.value,
        second_deriv: phi.d2,
        residual,
        flatness_order,
    })
}

fn bisect_root(f: &impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<f64> {
    let fa = f(a)?;
    let fb = f(b)?;
    if !(fa > 0.0 && fb < 0.0) {
        return Err(Error::NoConvergence {
            iterations: 0,
            residual: fa.abs().min(fb.abs()),
        });
    }
    while b - a > 1e-15 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if fm > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EtaOptions {
    /// Trapezoid nodes per inner angle.
    pub nodes: usize,
    /// Trapezoid nodes for the direction average.
    pub directions: usize,
}

impl Default for EtaOptions {
    fn default() -> Self {
        EtaOptions {
            nodes: 128,
            directions: 64,
        }
    }
}

/// `int f d eta_x`: the direction average of product von Mises measures.
pub fn eta_expectation(x: f64, f: &Observable, opts: &EtaOptions) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::OutOfRange(format!("x = {x} must be nonnegative")));
    }
    let d = f.depth();
    let m = opts.nodes;
    let dirs = opts.directions;
    let work = (m as f64).powi(d as i32) * dirs as f64;
    if m < 8 || dirs < 1 || work > 1e9 {
        return Err(Error::OutOfRange(format!(
            "quadrature sizes (nodes {m}, directions {dirs}, depth {d}) outside the supported range"
        )));
    }
    let i0e = bessel_i0_scaled(x)?;
    let angles: Vec<f64> = (0..m).map(|k| -PI + 2.0 * PI * k as f64 / m as f64).collect();
    let mut total = 0.0;
    let mut coords = vec![0.0; d];
    for j in 0..dirs {
        let theta_t = -PI + 2.0 * PI * j as f64 / dirs as f64;
        let dens: Vec<f64> = angles
            .iter()
            .map(|&a| (x * ((a - theta_t).cos() - 1.0)).exp() / (i0e * m as f64))
            .collect();
        let mut inner = 0.0;
        let count = m.pow(d as u32);
        for idx in 0..count {
            let mut r = idx;
            let mut w = 1.0;
            for slot in coords.iter_mut().rev() {
                let k = r % m;
                r /= m;
                *slot = angles[k];
                w *= dens[k];
            }
            inner += w * f.eval(&coords);
        }
        total += inner;
    }
    Ok(total / dirs as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LaplaceTail {
    pub integral: f64,
    pub asymptotic: f64,
    pub ratio: f64,
}

/// `int_0^{b_n} x^gamma e^{-n x^alpha} dx` against `Gamma((gamma+1)/alpha) / (alpha n^{(gamma+1)/alpha})`.
pub fn laplace_tail(alpha: f64, gamma_exp: f64, n: f64, b_n: f64) -> Result<LaplaceTail> {
    if !(alpha > 0.0) || !(gamma_exp >= 0.0) || !(n > 0.0) || !(b_n > 0.0) {
        return Err(Error::OutOfRange("laplace_tail needs alpha > 0, gamma >= 0, n > 0, b_n > 0".into()));
    }
    if n * b_n.powf(alpha) < 10.0 {
        return Err(Error::OutOfRange(format!(
            "n b_n^alpha = {} below 10",
            n * b_n.powf(alpha)
        )));
    }
    let scale = n.powf(-1.0 / alpha);
    let mut breaks = vec![0.0];
    let mut edge = scale / 8.0;
    while edge < b_n {
        breaks.push(edge);
        edge *= 2.0;
    }
    breaks.push(b_n);
    let g = |x: f64| x.powf(gamma_exp) * (-n * x.powf(alpha)).exp();
    let integral = integrate_breaks(&g, &breaks, 1e-13)?;
    let s = (gamma_exp + 1.0) / alpha;
    let asymptotic = gamma(s) / (alpha * n.powf(s));
    Ok(LaplaceTail {
        integral,
        asymptotic,
        ratio: integral / asymptotic,
    })
}

/// Finite-`n` XY expectation `int r e^{n phi(r)} eta(beta r) dr / int r e^{n phi(r)} dr`,
/// where `eta(x)` is the direction-averaged expectation under the product von Mises measure.
///
/// Exact after the Gaussian linearization: given the latent field the sites are independent.
pub fn xy_finite_n_expectation(beta: f64, n: usize, eta: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    if !(beta.is_finite() && beta > 0.0) || n == 0 {
        return Err(Error::OutOfRange("need beta > 0 and n >= 1".into()));
    }
    let nf = n as f64;
    let crit = xy_critical_point(beta)?;
    let peak = nf * crit.phi_max;
    let r_max = 2.0 + 12.0 / (nf * beta).sqrt();
    let breaks: Vec<f64> = (0..=128).map(|k| r_max * k as f64 / 128.0).collect();
    let density = |r: f64| -> f64 {
        match xy_phi(beta, r) {
            Ok(p) => r * (nf * p.value - peak).exp(),
            Err(_) => 0.0,
        }
    };
    let den = integrate_breaks(&density, &breaks, 1e-12)?;
    let failure = std::cell::Cell::new(None);
    let num = integrate_breaks(
        &|r: f64| match eta(beta * r) {
            Ok(v) => density(r) * v,
            Err(e) => {
                failure.set(Some(e));
                0.0
            }
        },
        &breaks,
        1e-12,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(num / den)
}

/// Limit prediction `int f d eta_{beta r*}`.
pub fn xy_limit_prediction(beta: f64, f: &Observable, opts: &EtaOptions) -> Result<f64> {
    let crit = xy_critical_point(beta)?;
    eta_expectation(beta * crit.r_star, f, opts)
}

/// Monte Carlo convergence of the circle Gibbs measures toward `eta_{beta r*}`.
pub fn xy_limit_check(
    beta: f64,
    f: &Observable,
    n_list: &[usize],
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<ConvergenceTable> {
    if f.depth() > 2 {
        return Err(Error::OutOfRange("observable depth must be at most 2".into()));
    }
    let prediction = xy_limit_prediction(beta, f, &EtaOptions::default())?;
    let alphabet = build_circle_alphabet(64)?;
    let transition = TransitionFn::full(64);
    let potential = PotentialVec::xy(&alphabet, &transition)?;
    let model = Model::new(alphabet, transition, potential)?;
    let method = ConvergenceMethod::Mc(McOptions {
        samples,
        seed,
        proposal: Proposal::Auto,
    });
    convergence_against(&model, beta, f, n_list, &method, prediction, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::periodic_mean;

    fn trapezoid_i0(x: f64) -> f64 {
        // (1/pi) int_0^pi e^{x cos y} dy on 512 nodes of the full period
        periodic_mean(512, |y| (x * y.cos()).exp())
    }

    #[test]
    fn i0_values() {
        assert_eq!(bessel_i0(0.0).unwrap(), 1.0);
        let v = bessel_i0(2.0).unwrap();
        assert!((v - trapezoid_i0(2.0)).abs() / v < 1e-13);
        assert!((v - 2.2795853023360673).abs() < 1e-15);
        assert!(bessel_i0(-1.0).is_err());
        assert!(bessel_i0(701.0).is_err());
        assert!(log_bessel_i0(5000.0).unwrap().is_finite());
    }

    #[test]
    fn series_and_asymptotic_agree_across_the_switch() {
        for x in [25.0, 30.0, 35.0, 60.0] {
            let trap = periodic_mean(1024, |y| (x * (y.cos() - 1.0)).exp());
            let v = bessel_i0_scaled(x).unwrap();
            assert!((v - trap).abs() / trap < 1e-14, "x={x}");
            let trap1 = periodic_mean(1024, |y| y.cos() * (x * (y.cos() - 1.0)).exp());
            let v1 = bessel_i1_scaled(x).unwrap();
            assert!((v1 - trap1).abs() / trap1 < 1e-14, "x={x}");
        }
    }

    #[test]
    fn i0_ode_residual() {
        for x in [0.1f64, 0.5, 2.0, 10.0, 25.0, 31.0, 50.0] {
            let h = 1e-2;
            let f = |y: f64| bessel_i0_scaled(y).unwrap() * (y - x).exp();
            let (f2m, fm, f0, fp, f2p) = (f(x - 2.0 * h), f(x - h), f(x), f(x + h), f(x + 2.0 * h));
            let d1 = (f2m - 8.0 * fm + 8.0 * fp - f2p) / (12.0 * h);
            let d2 = (-f2m + 16.0 * fm - 30.0 * f0 + 16.0 * fp - f2p) / (12.0 * h * h);
            let res = (d2 + d1 / x - f0) / f0;
            assert!(res.abs() < 1e-9, "x={x} res={res}");
        }
    }

    #[test]
    fn phi_derivatives_consistent() {
        let beta = 3.0;
        let p0 = xy_phi(beta, 0.0).unwrap();
        assert_eq!(p0.value, 0.0);
        assert_eq!(p0.d1, 0.0);
        assert!((p0.d2 - beta * (beta / 2.0 - 1.0)).abs() < 1e-15);
        for x in [0.1, 0.5, 0.9] {
            let h = 1e-5;
            let p = xy_phi(beta, x).unwrap();
            let (a, b) = (xy_phi(beta, x - h).unwrap(), xy_phi(beta, x + h).unwrap());
            assert!(((b.value - a.value) / (2.0 * h) - p.d1).abs() < 1e-7);
            assert!(((b.d1 - a.d1) / (2.0 * h) - p.d2).abs() < 1e-7);
            assert!(p.value <= beta * x * (1.0 - x / 2.0));
        }
    }

    #[test]
    fn critical_points() {
        let c = xy_critical_point(1.0).unwrap();
        assert_eq!(c.regime, Regime::Subcritical);
        assert_eq!(c.r_star, 0.0);
        let c = xy_critical_point(4.0).unwrap();
        assert!(c.r_star > 0.5f64.sqrt() && c.r_star <= 1.0);
        assert!(c.residual < 1e-12);
        let lower = 0.0001f64 / 2.0001;
        let c = xy_critical_point(2.0001).unwrap();
        assert!(c.r_star > lower.sqrt() && c.r_star < 2.0 * lower.sqrt());
        let c = xy_critical_point(2.0).unwrap();
        assert_eq!(c.regime, Regime::Critical);
        assert_eq!(c.r_star, 0.0);
        assert_eq!(c.flatness_order, 4);
    }

    #[test]
    fn supercritical_second_derivative_identity() {
        for beta in [2.5, 3.0, 4.0, 6.0] {
            let c = xy_critical_point(beta).unwrap();
            let r = c.r_star;
            let expect = -beta * beta * (r * r + 2.0 / beta - 1.0);
            assert!((c.second_deriv - expect).abs() < 1e-9, "beta={beta}");
            assert!(c.second_deriv < 0.0);
        }
    }

    #[test]
    fn eta_examples() {
        let opts = EtaOptions::default();
        let v = eta_expectation(2.5, &Observable::cos_first(), &opts).unwrap();
        assert!(v.abs() < 1e-14);
        let x = 2.5;
        let r = bessel_ratio(x).unwrap();
        let v = eta_expectation(x, &Observable::cos_diff(), &opts).unwrap();
        assert!((v - r * r).abs() < 1e-13);
        let sq = Observable::new("cos^2", 1, |a| a[0].cos().powi(2));
        let v = eta_expectation(0.0, &sq, &opts).unwrap();
        assert!((v - 0.5).abs() < 1e-14);
    }

    #[test]
    fn laplace_elementary() {
        let n = 50.0;
        let b = 2.0;
        let lt = laplace_tail(1.0, 0.0, n, b).unwrap();
        assert!((lt.integral - (1.0 - (-n * b).exp()) / n).abs() < 1e-15);
        assert!((lt.asymptotic - 1.0 / n).abs() < 1e-16);
        assert!(laplace_tail(2.0, 1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn finite_n_two_sites_closed_form() {
        // n = 2: density proportional to e^{(beta/2) cos(theta_0 - theta_1)}.
        for beta in [0.7, 3.0, 6.0] {
            let v = xy_finite_n_expectation(beta, 2, |x| Ok(bessel_ratio(x)?.powi(2))).unwrap();
            let expect = bessel_ratio(beta / 2.0).unwrap();
            assert!((v - expect).abs() < 1e-10, "beta={beta} {v} {expect}");
        }
    }

    #[test]
    fn finite_n_tends_to_limit() {
        let beta = 4.0;
        let r = xy_critical_point(beta).unwrap().r_star;
        let gaps: Vec<f64> = [50, 200, 800]
            .iter()
            .map(|&n| (xy_finite_n_expectation(beta, n, |x| Ok(bessel_ratio(x)?.powi(2))).unwrap() - r * r).abs())
            .collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2] && gaps[2] < 2e-3, "{gaps:?}");
    }

    #[test]
    fn mc_matches_finite_n_oracle() {
        let beta = 4.0;
        let n = 100;
        let exact = xy_finite_n_expectation(beta, n, |x| Ok(bessel_ratio(x)?.powi(2))).unwrap();
        let table = xy_limit_check(beta, &Observable::cos_diff(), &[n], 60_000, 4, 0.03).unwrap();
        let row = &table.rows[0];
        assert!((row.value - exact).abs() < 4.0 * row.stderr.unwrap(), "{} vs {exact}", row.value);
        let r = xy_critical_point(beta).unwrap().r_star;
        assert!((table.prediction - r * r).abs() < 1e-12);
    }
}
