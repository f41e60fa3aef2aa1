//! The continuous and stationary limit objects of the scaled processes.
//!
//! Three ingredients:
//!
//! * squared Bessel (CIR-type) diffusions `dX = b dt + sqrt(v X^+) dW`
//!   simulated by full-truncation Euler-Maruyama, with the running integral
//!   of the first coordinate accumulated by the trapezoid rule;
//! * closed-form Laplace transforms of the squared Bessel endpoint and of
//!   the joint (endpoint, integral) pair, plus the equivalent
//!   integral-representation transform evaluated by adaptive quadrature;
//! * the stationary law of a subcritical single-type chain, whose
//!   generating function is the infinite product `prod_j H(G_(j)(z))` of the
//!   immigration pgf composed with offspring pgf iterates, inverted to a pmf
//!   on the unit circle.

use crate::law::Marginal;
use crate::model::{CaseLabel, ModelParams};
use crate::moments::fmt_f64;
use crate::rng::StreamKey;
use crate::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

/// Integration setup for one limit-diffusion run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SdeConfig {
    /// Drift constant.
    pub drift: f64,
    /// Diffusion scale `v` in `sqrt(v X^+)`.
    pub diffusion: f64,
    /// Horizon.
    pub t_max: f64,
    /// Step size.
    pub dt: f64,
}

impl SdeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || self.t_max < 0.0 || self.drift < 0.0 || self.diffusion < 0.0 {
            return Err(Error::Config(format!("invalid SDE configuration: {self:?}")));
        }
        Ok(())
    }
}

/// Default Euler-Maruyama step.
pub const DEFAULT_DT: f64 = 1e-3;

/// A discretized limit trajectory.
///
/// Coordinates are optional because in the one-sided regimes only one
/// coordinate has a diffusion limit (the other is a stationary law handled
/// by [`stationary_law`]).
#[derive(Debug, Clone)]
pub struct LimitPath {
    pub times: Vec<f64>,
    pub x1: Option<Vec<f64>>,
    pub x2: Option<Vec<f64>>,
    /// Trapezoid running integral of x1, when x1 is present.
    pub integral_x1: Option<Vec<f64>>,
}

impl LimitPath {
    /// Value of a coordinate at the last grid point at or before `t`.
    pub fn value_at(&self, coord: usize, t: f64) -> Option<f64> {
        let xs = if coord == 0 { self.x1.as_ref() } else { self.x2.as_ref() }?;
        let dt = self.times.get(1).copied().unwrap_or(1.0) - self.times[0];
        let ix = ((t / dt).floor() as usize).min(xs.len() - 1);
        Some(xs[ix])
    }

    pub fn integral_at(&self, t: f64) -> Option<f64> {
        let xs = self.integral_x1.as_ref()?;
        let dt = self.times.get(1).copied().unwrap_or(1.0) - self.times[0];
        let ix = ((t / dt).floor() as usize).min(xs.len() - 1);
        Some(xs[ix])
    }

    /// CSV rows `t,x1,x2,integral`; absent coordinates render empty fields.
    pub fn to_csv_rows(&self, out: &mut String) {
        let cell = |v: Option<&Vec<f64>>, i: usize| {
            v.map(|xs| fmt_f64(xs[i])).unwrap_or_default()
        };
        for (i, t) in self.times.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt_f64(*t),
                cell(self.x1.as_ref(), i),
                cell(self.x2.as_ref(), i),
                cell(self.integral_x1.as_ref(), i),
            ));
        }
    }
}

/// One squared Bessel coordinate with running integral.
///
/// Full-truncation Euler-Maruyama: the positive part sits inside the square
/// root exactly as in the SDE, the state itself is not clipped.
pub fn simulate_sbp(config: &SdeConfig, stream: StreamKey) -> Result<LimitPath> {
    config.validate()?;
    let mut rng = stream.stream();
    let (xs, times) = euler_maruyama(config, &mut rng);
    let integral = trapezoid_running(&times, &xs);
    Ok(LimitPath {
        times,
        x1: Some(xs),
        x2: None,
        integral_x1: Some(integral),
    })
}

fn euler_maruyama<R: Rng + ?Sized>(config: &SdeConfig, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let steps = (config.t_max / config.dt).round() as usize;
    let sqrt_dt = config.dt.sqrt();
    let mut xs = Vec::with_capacity(steps + 1);
    let mut times = Vec::with_capacity(steps + 1);
    let mut x = 0.0f64;
    xs.push(x);
    times.push(0.0);
    for i in 1..=steps {
        let z: f64 = rng.sample(StandardNormal);
        x += config.drift * config.dt + (config.diffusion * x.max(0.0)).sqrt() * sqrt_dt * z;
        xs.push(x);
        times.push(i as f64 * config.dt);
    }
    (xs, times)
}

fn trapezoid_running(times: &[f64], xs: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..xs.len() {
        acc += 0.5 * (xs[i] + xs[i - 1]) * (times[i] - times[i - 1]);
        out.push(acc);
    }
    out
}

/// Simulate the limit process of one covered case on a shared grid.
///
/// * Case 1: two independent squared Bessel coordinates driven by
///   `(b1, v1_{11})` and `(b2, v2_{22})`.
/// * Case 2: `(X1, a21 * integral(X1))`.
/// * Case 3: coordinate 1 only; coordinate 2 has a stationary (not
///   diffusion) limit.
/// * Case 4: `(X1, a21/(1 - a22) * X1)`.
/// * Case 5: coordinate 2 only, drift `a21 b1/(1 - a11) + b2`, diffusion
///   `v2_{22}`.
pub fn simulate_limit_case(
    params: &ModelParams,
    t_max: f64,
    dt: f64,
    stream: StreamKey,
) -> Result<LimitPath> {
    let case = &params.case_label;
    let mk = |drift: f64, diffusion: f64| SdeConfig { drift, diffusion, t_max, dt };
    match case {
        CaseLabel::Case1 => {
            let mut rng = stream.stream();
            let c1 = mk(params.b1(), params.v(1, 1, 1));
            let c2 = mk(params.b2(), params.v(2, 2, 2));
            c1.validate()?;
            c2.validate()?;
            // Both coordinates from one stream: draws interleave but the
            // coordinates stay independent.
            let (x1, times) = euler_maruyama(&c1, &mut rng);
            let (x2, _) = euler_maruyama(&c2, &mut rng);
            let integral = trapezoid_running(&times, &x1);
            Ok(LimitPath { times, x1: Some(x1), x2: Some(x2), integral_x1: Some(integral) })
        }
        CaseLabel::Case2 => {
            let path = simulate_sbp(&mk(params.b1(), params.v(1, 1, 1)), stream)?;
            let x2 = path
                .integral_x1
                .as_ref()
                .expect("sbp always carries its integral")
                .iter()
                .map(|v| params.a21() * v)
                .collect();
            Ok(LimitPath { x2: Some(x2), ..path })
        }
        CaseLabel::Case3 => {
            let path = simulate_sbp(&mk(params.b1(), params.v(1, 1, 1)), stream)?;
            Ok(LimitPath { x2: None, ..path })
        }
        CaseLabel::Case4 => {
            let path = simulate_sbp(&mk(params.b1(), params.v(1, 1, 1)), stream)?;
            let ray = params.a21() / (1.0 - params.a22());
            let x2 = path
                .x1
                .as_ref()
                .expect("sbp always has a first coordinate")
                .iter()
                .map(|v| ray * v)
                .collect();
            Ok(LimitPath { x2: Some(x2), ..path })
        }
        CaseLabel::Case5 => {
            let drift = params.a21() / (1.0 - params.a11()) * params.b1() + params.b2();
            let path = simulate_sbp(&mk(drift, params.v(2, 2, 2)), stream)?;
            Ok(LimitPath {
                times: path.times,
                x1: None,
                x2: path.x1,
                integral_x1: None,
            })
        }
        CaseLabel::NotCovered(reason) => Err(Error::NotCovered(reason.clone())),
    }
}

/// Laplace transform of a squared Bessel functional:
/// `E exp(-alpha Y_t - (beta^2/2) int_0^t Y_s ds)
///  = (cosh(beta t) + (2 alpha / beta) sinh(beta t))^(-nu-1)`
/// for the normalized process with generator drift `2 nu + 2` and
/// diffusion 4.
pub fn laplace_sbp(alpha: f64, beta: f64, t: f64, nu: f64) -> f64 {
    assert!(alpha >= 0.0 && beta > 0.0 && t >= 0.0 && nu > -1.0);
    let bt = beta * t;
    (bt.cosh() + 2.0 * alpha / beta * bt.sinh()).powf(-nu - 1.0)
}

/// Joint Laplace transform of `(X_t, a21 int_0^t X_s ds)` for the squared
/// Bessel coordinate with drift `b1` and diffusion scale `v`:
///
/// `(cosh(c t) + s1 sqrt(v) / sqrt(2 a21 s2) * sinh(c t))^(-2 b1 / v)`
/// with `c = sqrt(v a21 s2 / 2)`.
///
/// Requires `s2 > 0`; the `s2 -> 0` limit is the Gamma endpoint transform
/// [`laplace_gamma_endpoint`].
pub fn laplace_joint_case2(s1: f64, s2: f64, t: f64, b1: f64, v: f64, a21: f64) -> f64 {
    assert!(s1 >= 0.0 && s2 > 0.0 && t >= 0.0 && v > 0.0 && a21 > 0.0 && b1 >= 0.0);
    let c = (v * a21 * s2 / 2.0).sqrt();
    let coef = s1 * v.sqrt() / (2.0 * a21 * s2).sqrt();
    let ct = c * t;
    (ct.cosh() + coef * ct.sinh()).powf(-2.0 * b1 / v)
}

/// Endpoint transform `E exp(-s1 X_t) = (1 + v t s1 / 2)^(-2 b1 / v)`:
/// the endpoint is Gamma with shape `2 b1 / v` and scale `v t / 2`.
pub fn laplace_gamma_endpoint(s1: f64, t: f64, b1: f64, v: f64) -> f64 {
    assert!(s1 >= 0.0 && t >= 0.0 && v > 0.0);
    (1.0 + v * t * s1 / 2.0).powf(-2.0 * b1 / v)
}

/// The same joint transform at `t = 1` in integral form,
/// `exp(-b1 int_0^1 g(tau) dtau)` with
///
/// `g(tau) = sqrt(2 a21 s2 / v) *
///   (v s1/2 + c tanh(tau c)) / (v s1/2 tanh(tau c) + c)`,
///
/// evaluated by adaptive Simpson quadrature. Agrees with
/// [`laplace_joint_case2`] at `t = 1` to the quadrature tolerance.
pub fn laplace_joint_fosterney(
    s1: f64,
    s2: f64,
    b1: f64,
    v: f64,
    a21: f64,
    quad_tol: f64,
) -> Result<f64> {
    assert!(s1 >= 0.0 && v > 0.0 && a21 > 0.0 && b1 >= 0.0);
    if s2 <= 0.0 {
        return Err(Error::Config("integral form needs s2 > 0".into()));
    }
    let c = (0.5 * v * a21 * s2).sqrt();
    let k = 0.5 * v * s1;
    let scale = (2.0 * a21 * s2 / v).sqrt();
    let g = move |tau: f64| {
        let th = (tau * c).tanh();
        scale * (k + c * th) / (k * th + c)
    };
    let integral = adaptive_simpson(&g, 0.0, 1.0, quad_tol)?;
    Ok((-b1 * integral).exp())
}

/// Adaptive Simpson quadrature with an absolute tolerance.
fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        if depth > 50 {
            return Err(Error::QuadratureFailed);
        }
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let err = left + right - whole;
        if err.abs() <= 15.0 * tol {
            return Ok(left + right + err / 15.0);
        }
        let half = 0.5 * tol;
        Ok(recurse(f, a, m, fa, flm, fm, left, half, depth + 1)?
            + recurse(f, m, b, fm, frm, fb, right, half, depth + 1)?)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    if !(fa.is_finite() && fm.is_finite() && fb.is_finite()) {
        return Err(Error::QuadratureFailed);
    }
    let whole = simpson(fa, fm, fb, b - a);
    recurse(f, a, b, fa, fm, fb, whole, tol, 0)
}

/// A transform evaluation as a self-describing JSON record.
#[derive(Debug, Clone, Serialize)]
pub struct TransformRecord {
    pub name: &'static str,
    pub inputs: serde_json::Value,
    pub value: f64,
}

impl TransformRecord {
    pub fn joint_case2(s1: f64, s2: f64, t: f64, b1: f64, v: f64, a21: f64) -> TransformRecord {
        TransformRecord {
            name: "laplace_joint_case2",
            inputs: serde_json::json!({"s1": s1, "s2": s2, "t": t, "b1": b1, "v": v, "a21": a21}),
            value: laplace_joint_case2(s1, s2, t, b1, v, a21),
        }
    }
}

/// Default pmf size for stationary-law inversion.
pub const DEFAULT_PMF_SIZE: usize = 256;
/// Default number of unit-circle evaluation points.
pub const DEFAULT_TRANSFORM_POINTS: usize = 4096;
/// Iteration cap for the pgf product; convergence is geometric with ratio
/// equal to the offspring mean, so this is generous.
pub const PGF_ITERATION_CAP: usize = 100_000;
/// Mass allowed in the top bins of the inversion before aliasing is flagged.
pub const ALIAS_MASS_BOUND: f64 = 1e-9;

/// Stationary law of the subcritical single-type chain with offspring pgf
/// `G` and immigration pgf `H`.
#[derive(Debug, Clone)]
pub struct StationaryLaw {
    pub offspring: Marginal,
    pub immigration: Marginal,
    /// `pmf[k]` approximates the stationary mass at k.
    pub pmf: Vec<f64>,
    /// Mass outside the retained range `0..=pmf.len()-1`.
    pub leaked: f64,
    /// Mean of the retained pmf.
    pub mean: f64,
}

impl StationaryLaw {
    /// CSV rows `k,p_k`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,p_k\n");
        for (k, p) in self.pmf.iter().enumerate() {
            out.push_str(&format!("{k},{}\n", fmt_f64(*p)));
        }
        out
    }

    /// Total variation distance to another pmf on 0..; the leaked tail
    /// counts in full.
    pub fn total_variation(&self, other_pmf: &[f64]) -> f64 {
        let n = self.pmf.len().max(other_pmf.len());
        let mut tv = 0.0;
        for k in 0..n {
            let a = self.pmf.get(k).copied().unwrap_or(0.0);
            let b = other_pmf.get(k).copied().unwrap_or(0.0);
            tv += (a - b).abs();
        }
        0.5 * (tv + self.leaked)
    }
}

/// Evaluate the stationary generating function `prod_j H(G_(j)(z))` on the
/// closed unit disk by truncating once consecutive factors are within `tol`
/// of 1.
pub fn stationary_pgf(
    offspring: &Marginal,
    immigration: &Marginal,
    z: Complex64,
    tol: f64,
) -> Result<Complex64> {
    let a = offspring.mean();
    if a >= 1.0 {
        return Err(Error::NoConvergence(format!(
            "offspring mean {a} is not subcritical"
        )));
    }
    let mut w = z;
    let mut product = Complex64::new(1.0, 0.0);
    for _ in 0..PGF_ITERATION_CAP {
        let factor = immigration.pgf(w);
        product *= factor;
        let next_w = offspring.pgf(w);
        let next_factor = immigration.pgf(next_w);
        if (Complex64::new(1.0, 0.0) - factor).norm() < tol
            && (Complex64::new(1.0, 0.0) - next_factor).norm() < tol
        {
            return Ok(product);
        }
        w = next_w;
    }
    Err(Error::NoConvergence(
        "stationary pgf product did not converge within the iteration cap".into(),
    ))
}

/// Invert the stationary generating function to a pmf on `0..=pmf_size-1`
/// by evaluating it at `transform_points` roots of unity.
///
/// `transform_points` must be at least `2 * pmf_size`. Mass aliased into the
/// top bins beyond [`ALIAS_MASS_BOUND`] is an error; the honest tail mass
/// above the retained range is reported as `leaked`.
pub fn stationary_law(
    offspring: &Marginal,
    immigration: &Marginal,
    pmf_size: usize,
    transform_points: usize,
) -> Result<StationaryLaw> {
    if transform_points < 2 * pmf_size {
        return Err(Error::Config(format!(
            "transform points {transform_points} below 2 * pmf size {pmf_size}"
        )));
    }
    let m = transform_points;
    let tol = 1e-14;
    let mut evals = Vec::with_capacity(m);
    for j in 0..m {
        let theta = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
        let z = Complex64::from_polar(1.0, theta);
        evals.push(stationary_pgf(offspring, immigration, z, tol)?);
    }

    let invert = |k: usize| -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, phi) in evals.iter().enumerate() {
            let theta = -2.0 * std::f64::consts::PI * ((k * j) % m) as f64 / m as f64;
            acc += phi * Complex64::from_polar(1.0, theta);
        }
        acc.re / m as f64
    };

    // Aliasing guard: the highest bins fold the far tail back; they must be
    // negligible for the truncation to be trustworthy.
    let guard_bins = 8;
    let mut alias_mass = 0.0;
    for k in (m - guard_bins)..m {
        alias_mass += invert(k).abs();
    }
    if alias_mass > ALIAS_MASS_BOUND {
        return Err(Error::AliasingMass { mass: alias_mass, bound: ALIAS_MASS_BOUND });
    }

    let mut pmf = Vec::with_capacity(pmf_size);
    let mut retained = 0.0;
    for k in 0..pmf_size {
        // Tiny negative values are inversion noise; clip, never fold.
        let p = invert(k).max(0.0);
        retained += p;
        pmf.push(p);
    }
    let leaked = (1.0 - retained).max(0.0);
    let mean = pmf
        .iter()
        .enumerate()
        .map(|(k, p)| k as f64 * p)
        .sum::<f64>();
    Ok(StationaryLaw {
        offspring: offspring.clone(),
        immigration: immigration.clone(),
        pmf,
        leaked,
        mean,
    })
}

/// Stationary law of one coordinate chain of a two-type model.
///
/// Coordinate 0 is always autonomous after normalization; coordinate 1
/// additionally requires `a21 = 0` so that no type-1 offspring feed the
/// second chain. The requested coordinate must be subcritical.
pub fn coordinate_stationary_law(
    params: &ModelParams,
    coord: usize,
    pmf_size: usize,
    transform_points: usize,
) -> Result<StationaryLaw> {
    assert!(coord < 2);
    let (offspring_mean, coupled) = if coord == 0 {
        (params.a11(), false)
    } else {
        (params.a22(), params.a21() > 0.0)
    };
    if coupled {
        return Err(Error::Config(
            "second coordinate is not autonomous: a21 > 0".into(),
        ));
    }
    if offspring_mean >= 1.0 {
        return Err(Error::NoConvergence(format!(
            "coordinate {coord} offspring mean {offspring_mean} is not subcritical"
        )));
    }
    let offspring = if coord == 0 {
        params.offspring_type1.marginal(0)
    } else {
        params.offspring_type2.marginal(1)
    };
    let immigration = params.immigration.marginal(coord);
    stationary_law(&offspring, &immigration, pmf_size, transform_points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::poisson_archetype;
    use crate::rng::{StreamDomain, StreamKey};
    use approx::assert_abs_diff_eq;

    fn key(ix: u64) -> StreamKey {
        StreamKey::new(2024, StreamDomain::Limit, ix)
    }

    #[test]
    fn zero_diffusion_is_a_line() {
        let cfg = SdeConfig { drift: 0.7, diffusion: 0.0, t_max: 1.0, dt: 1e-3 };
        let path = simulate_sbp(&cfg, key(0)).unwrap();
        let xs = path.x1.as_ref().unwrap();
        for (t, x) in path.times.iter().zip(xs) {
            assert_abs_diff_eq!(*x, 0.7 * t, epsilon = 1e-12);
        }
        // Trapezoid integral of a line is exact.
        let last = *path.integral_x1.as_ref().unwrap().last().unwrap();
        assert_abs_diff_eq!(last, 0.7 / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_drift_stays_absorbed() {
        let cfg = SdeConfig { drift: 0.0, diffusion: 2.0, t_max: 1.0, dt: 1e-3 };
        let path = simulate_sbp(&cfg, key(1)).unwrap();
        assert!(path.x1.unwrap().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn case4_collapses_to_the_ray() {
        let params = poisson_archetype(4).unwrap();
        let path = simulate_limit_case(&params, 1.0, 1e-2, key(2)).unwrap();
        let ray = params.a21() / (1.0 - params.a22());
        let x1 = path.x1.as_ref().unwrap();
        let x2 = path.x2.as_ref().unwrap();
        for (a, b) in x1.iter().zip(x2) {
            assert_abs_diff_eq!(*b, ray * a, epsilon = 1e-12);
        }
    }

    #[test]
    fn case2_deterministic_integral() {
        // v = 0 collapses the first coordinate to b1 t, so the second is
        // a21 b1 t^2 / 2.
        let params = crate::model::build_model(
            crate::law::Law::deterministic([1, 1]),
            crate::law::Law::deterministic([0, 1]),
            crate::law::Law::deterministic([1, 0]),
            false,
        )
        .unwrap();
        let path = simulate_limit_case(&params, 1.0, 1e-3, key(3)).unwrap();
        let x2 = path.x2.as_ref().unwrap();
        for (t, v) in path.times.iter().zip(x2) {
            assert_abs_diff_eq!(*v, 0.5 * t * t, epsilon = 1e-9);
        }
    }

    #[test]
    fn case5_has_second_coordinate_only() {
        let params = poisson_archetype(5).unwrap();
        let path = simulate_limit_case(&params, 0.5, 1e-2, key(4)).unwrap();
        assert!(path.x1.is_none());
        assert!(path.x2.is_some());
        let case3 = poisson_archetype(3).unwrap();
        let path3 = simulate_limit_case(&case3, 0.5, 1e-2, key(5)).unwrap();
        assert!(path3.x1.is_some());
        assert!(path3.x2.is_none());
    }

    #[test]
    fn laplace_sbp_special_values() {
        assert_abs_diff_eq!(laplace_sbp(0.3, 1.0, 0.0, -0.5), 1.0);
        // alpha = 0 leaves the cosh marginal.
        let v = laplace_sbp(0.0, 2.0, 1.5, -0.25);
        assert_abs_diff_eq!(v, (2.0f64 * 1.5).cosh().powf(-0.75), epsilon = 1e-15);
        // Small beta approaches the (1 + 2 alpha t)^(-nu-1) limit.
        let v = laplace_sbp(0.7, 1e-6, 1.0, -0.5);
        assert_abs_diff_eq!(v, (1.0f64 + 2.0 * 0.7).powf(-0.5), epsilon = 1e-9);
    }

    #[test]
    fn laplace_values_lie_in_unit_interval_and_decrease_in_t() {
        let mut last = 1.0;
        for i in 1..=8 {
            let t = i as f64 * 0.25;
            let v = laplace_sbp(0.0, 1.3, t, -0.4);
            assert!(v > 0.0 && v <= 1.0);
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn joint_case2_marginals() {
        let (b1, v, a21) = (1.0, 2.0, 0.7);
        // s1 = 0: cosh marginal of the integral.
        let s2 = 0.8;
        let c = (v * a21 * s2 / 2.0f64).sqrt();
        assert_abs_diff_eq!(
            laplace_joint_case2(0.0, s2, 1.0, b1, v, a21),
            c.cosh().powf(-2.0 * b1 / v),
            epsilon = 1e-15
        );
        // s2 -> 0 approaches the Gamma endpoint marginal.
        let near = laplace_joint_case2(0.5, 1e-12, 1.0, b1, v, a21);
        assert_abs_diff_eq!(
            near,
            laplace_gamma_endpoint(0.5, 1.0, b1, v),
            epsilon = 1e-6
        );
    }

    #[test]
    fn integral_form_matches_closed_form() {
        for (b1, v, a21) in [(1.0, 2.0, 1.0), (0.5, 1.0, 0.7), (2.0, 0.5, 0.3)] {
            for s1 in [0.0, 0.5, 1.0] {
                for s2 in [0.25, 0.5, 1.0] {
                    let closed = laplace_joint_case2(s1, s2, 1.0, b1, v, a21);
                    let integral =
                        laplace_joint_fosterney(s1, s2, b1, v, a21, 1e-10).unwrap();
                    assert_abs_diff_eq!(closed, integral, epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn integral_form_trivial_cases() {
        // Zero immigration mean kills the exponent.
        assert_abs_diff_eq!(
            laplace_joint_fosterney(0.5, 0.5, 0.0, 2.0, 1.0, 1e-10).unwrap(),
            1.0
        );
        assert!(laplace_joint_fosterney(0.5, 0.0, 1.0, 2.0, 1.0, 1e-10).is_err());
    }

    #[test]
    fn stationary_pgf_degenerate_offspring() {
        // Offspring always zero: the stationary law is the immigration law.
        let g = Marginal::Deterministic { value: 0 };
        let h = Marginal::Poisson { mean: 1.3 };
        for z in [
            Complex64::new(0.3, 0.0),
            Complex64::from_polar(1.0, 1.1),
            Complex64::new(1.0, 0.0),
        ] {
            let val = stationary_pgf(&g, &h, z, 1e-14).unwrap();
            let expect = h.pgf(z);
            assert!((val - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn stationary_pgf_degenerate_immigration() {
        let g = Marginal::Geometric { mean: 0.5 };
        let h = Marginal::Deterministic { value: 0 };
        let val = stationary_pgf(&g, &h, Complex64::new(0.2, 0.1), 1e-14).unwrap();
        assert!((val - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn stationary_pgf_is_normalized_and_bounded() {
        let g = Marginal::Geometric { mean: 0.5 };
        let h = Marginal::Poisson { mean: 1.0 };
        let at_one = stationary_pgf(&g, &h, Complex64::new(1.0, 0.0), 1e-14).unwrap();
        assert!((at_one - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        for j in 0..16 {
            let z = Complex64::from_polar(1.0, j as f64 * 0.4);
            let v = stationary_pgf(&g, &h, z, 1e-14).unwrap();
            assert!(v.norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn stationary_pgf_rejects_critical_offspring() {
        let g = Marginal::Poisson { mean: 1.0 };
        let h = Marginal::Poisson { mean: 1.0 };
        assert!(stationary_pgf(&g, &h, Complex64::new(0.5, 0.0), 1e-14).is_err());
    }

    #[test]
    fn stationary_law_zero_offspring_is_immigration_law() {
        let law = stationary_law(
            &Marginal::Deterministic { value: 0 },
            &Marginal::Poisson { mean: 1.0 },
            64,
            256,
        )
        .unwrap();
        // Poisson(1) masses e^{-1}/k!.
        let mut p = (-1.0f64).exp();
        for k in 0..20 {
            assert_abs_diff_eq!(law.pmf[k], p, epsilon = 1e-8);
            p /= (k + 1) as f64;
        }
        assert_abs_diff_eq!(law.mean, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn stationary_law_no_immigration_is_delta_zero() {
        let law = stationary_law(
            &Marginal::Geometric { mean: 0.5 },
            &Marginal::Deterministic { value: 0 },
            16,
            64,
        )
        .unwrap();
        assert_abs_diff_eq!(law.pmf[0], 1.0, epsilon = 1e-12);
        assert!(law.pmf[1..].iter().all(|p| *p < 1e-12));
        assert_abs_diff_eq!(law.mean, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn stationary_mean_matches_fixed_point() {
        // Mean must equal b / (1 - a).
        let law = stationary_law(
            &Marginal::Geometric { mean: 0.5 },
            &Marginal::Poisson { mean: 1.0 },
            DEFAULT_PMF_SIZE,
            DEFAULT_TRANSFORM_POINTS,
        )
        .unwrap();
        let expect = 1.0 / (1.0 - 0.5);
        assert!((law.mean - expect).abs() <= 1e-6 * expect);
        assert!(law.leaked < 1e-9);
        let total: f64 = law.pmf.iter().sum::<f64>() + law.leaked;
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn coordinate_law_requires_autonomy() {
        let p4 = poisson_archetype(4).unwrap();
        assert!(coordinate_stationary_law(&p4, 1, 32, 64).is_err());
        let p3 = poisson_archetype(3).unwrap();
        let law = coordinate_stationary_law(&p3, 1, 128, 512).unwrap();
        let expect = 1.0 / (1.0 - p3.a22());
        assert!((law.mean - expect).abs() <= 1e-6 * expect);
    }
}
