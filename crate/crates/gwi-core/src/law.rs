//! Offspring and immigration laws on the nonnegative integer quadrant.
//!
//! A [`Law`] describes one 2-vector draw: the joint offspring of a single
//! parent (type-1 children, type-2 children) or one immigration batch. Laws
//! come in two kinds: an explicit finite table sampled by the alias method,
//! or a product of parametric marginals with independent coordinates. Every
//! kind exposes exact moments up to order four, single-draw sampling, and an
//! exact sampler for the sum of `m` independent copies (binomial counts over
//! table atoms, additivity for Poisson, binomial for Bernoulli, a
//! gamma-Poisson mixture for geometric), so population-sized convolutions
//! never require per-individual loops.

use crate::linalg::{Mat2, Vec2};
use crate::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, WeightedAliasIndex};

/// Mass tolerance for finite probability tables.
pub const MASS_TOL: f64 = 1e-12;

/// Threshold below which a geometric sum is drawn term by term instead of
/// through the gamma-Poisson mixture.
const GEOMETRIC_SUM_DIRECT: u64 = 8;

/// A parametric law on the nonnegative integers.
#[derive(Debug, Clone, PartialEq)]
pub enum Marginal {
    /// Poisson with the given mean.
    Poisson { mean: f64 },
    /// Geometric on {0,1,2,...} parametrized by its mean `m`
    /// (success probability 1/(1+m)), so critical means are hit exactly.
    Geometric { mean: f64 },
    /// Bernoulli on {0,1}.
    Bernoulli { p: f64 },
    /// Point mass.
    Deterministic { value: u64 },
    /// Explicit table: `probs[k] = P(X = k)`.
    Finite { probs: Vec<f64> },
}

impl Marginal {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Marginal::Poisson { mean } => mean.is_finite() && *mean >= 0.0,
            Marginal::Geometric { mean } => mean.is_finite() && *mean >= 0.0,
            Marginal::Bernoulli { p } => p.is_finite() && (0.0..=1.0).contains(p),
            Marginal::Deterministic { .. } => true,
            Marginal::Finite { probs } => {
                if probs.is_empty() || probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    false
                } else {
                    let total: f64 = probs.iter().sum();
                    if (total - 1.0).abs() > MASS_TOL {
                        return Err(Error::LawMass { total, tol: MASS_TOL });
                    }
                    true
                }
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidLaw(format!("{self:?}")))
        }
    }

    /// Raw moment E(X^r) for r = 1..=4.
    pub fn raw_moment(&self, r: u32) -> f64 {
        assert!((1..=4).contains(&r));
        match self {
            Marginal::Poisson { mean } => {
                let l = *mean;
                // Touchard polynomials.
                match r {
                    1 => l,
                    2 => l + l * l,
                    3 => l + 3.0 * l * l + l * l * l,
                    _ => l + 7.0 * l * l + 6.0 * l * l * l + l * l * l * l,
                }
            }
            Marginal::Geometric { mean } => {
                // Factorial moments are r! mean^r; convert by Stirling numbers.
                let m = *mean;
                match r {
                    1 => m,
                    2 => 2.0 * m * m + m,
                    3 => 6.0 * m.powi(3) + 6.0 * m * m + m,
                    _ => 24.0 * m.powi(4) + 36.0 * m.powi(3) + 14.0 * m * m + m,
                }
            }
            Marginal::Bernoulli { p } => *p,
            Marginal::Deterministic { value } => (*value as f64).powi(r as i32),
            Marginal::Finite { probs } => probs
                .iter()
                .enumerate()
                .map(|(k, p)| (k as f64).powi(r as i32) * p)
                .sum(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.raw_moment(1)
    }

    pub fn variance(&self) -> f64 {
        let m1 = self.raw_moment(1);
        self.raw_moment(2) - m1 * m1
    }

    /// Fourth central moment E((X - EX)^4).
    pub fn fourth_central(&self) -> f64 {
        let m1 = self.raw_moment(1);
        let m2 = self.raw_moment(2);
        let m3 = self.raw_moment(3);
        let m4 = self.raw_moment(4);
        m4 - 4.0 * m3 * m1 + 6.0 * m2 * m1 * m1 - 3.0 * m1.powi(4)
    }

    /// Probability generating function E(z^X) on the closed unit disk.
    pub fn pgf(&self, z: Complex64) -> Complex64 {
        match self {
            Marginal::Poisson { mean } => ((z - 1.0) * *mean).exp(),
            Marginal::Geometric { mean } => {
                let p = 1.0 / (1.0 + mean);
                let q = mean / (1.0 + mean);
                Complex64::new(p, 0.0) / (Complex64::new(1.0, 0.0) - z * q)
            }
            Marginal::Bernoulli { p } => Complex64::new(1.0 - p, 0.0) + z * *p,
            Marginal::Deterministic { value } => z.powu(*value as u32),
            Marginal::Finite { probs } => {
                // Horner evaluation from the top coefficient.
                let mut acc = Complex64::new(0.0, 0.0);
                for p in probs.iter().rev() {
                    acc = acc * z + p;
                }
                acc
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            Marginal::Poisson { mean } => sample_poisson(*mean, rng),
            Marginal::Geometric { mean } => {
                if *mean == 0.0 {
                    return 0;
                }
                let p = 1.0 / (1.0 + mean);
                rand_distr::Geometric::new(p).expect("validated p").sample(rng)
            }
            Marginal::Bernoulli { p } => u64::from(rng.gen_bool(*p)),
            Marginal::Deterministic { value } => *value,
            Marginal::Finite { probs } => {
                // Cold path; joint tables go through the alias sampler.
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (k, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return k as u64;
                    }
                }
                probs.len() as u64 - 1
            }
        }
    }

    /// Draw the sum of `m` independent copies in one shot.
    ///
    /// Each arm is exact in distribution: Poisson additivity, binomial
    /// thinning for Bernoulli, binomial atom counts for finite tables, and
    /// the gamma-Poisson mixture for the negative binomial sum of
    /// geometrics.
    pub fn sample_sum<R: Rng + ?Sized>(&self, m: u64, rng: &mut R) -> Option<u64> {
        if m == 0 {
            return Some(0);
        }
        match self {
            Marginal::Poisson { mean } => Some(sample_poisson(*mean * m as f64, rng)),
            Marginal::Geometric { mean } => {
                if *mean == 0.0 {
                    return Some(0);
                }
                if m <= GEOMETRIC_SUM_DIRECT {
                    let mut total: u64 = 0;
                    for _ in 0..m {
                        total = total.checked_add(self.sample(rng))?;
                    }
                    return Some(total);
                }
                // Negative binomial via gamma-Poisson: rate ~ Gamma(m, mean).
                let gamma = rand_distr::Gamma::new(m as f64, *mean).expect("validated");
                Some(sample_poisson(gamma.sample(rng), rng))
            }
            Marginal::Bernoulli { p } => {
                let bin = rand_distr::Binomial::new(m, *p).expect("validated p");
                Some(bin.sample(rng))
            }
            Marginal::Deterministic { value } => m.checked_mul(*value),
            Marginal::Finite { probs } => {
                let counts = multinomial_counts(m, probs, rng);
                let mut total: u64 = 0;
                for (k, c) in counts.into_iter().enumerate() {
                    total = total.checked_add(c.checked_mul(k as u64)?)?;
                }
                Some(total)
            }
        }
    }

    /// Largest value in the support, when bounded.
    pub fn support_bound(&self) -> Option<u64> {
        match self {
            Marginal::Poisson { mean } | Marginal::Geometric { mean } => {
                (*mean == 0.0).then_some(0)
            }
            Marginal::Bernoulli { p } => Some(if *p > 0.0 { 1 } else { 0 }),
            Marginal::Deterministic { value } => Some(*value),
            Marginal::Finite { probs } => Some(probs.len() as u64 - 1),
        }
    }

    /// Explicit probability table, when the support is bounded.
    fn table(&self) -> Option<Vec<f64>> {
        let bound = self.support_bound()? as usize;
        let mut probs = vec![0.0; bound + 1];
        match self {
            Marginal::Poisson { .. } | Marginal::Geometric { .. } => probs[0] = 1.0,
            Marginal::Bernoulli { p } => {
                probs[0] = 1.0 - p;
                if *p > 0.0 {
                    probs[bound] = *p;
                }
            }
            Marginal::Deterministic { .. } => probs[bound] = 1.0,
            Marginal::Finite { probs: src } => probs.copy_from_slice(src),
        }
        Some(probs)
    }
}

/// Poisson draw as an exact nonnegative integer.
fn sample_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda == 0.0 {
        return 0;
    }
    let d = rand_distr::Poisson::new(lambda).expect("positive finite lambda");
    let x: f64 = d.sample(rng);
    x as u64
}

/// Multinomial counts over `probs` by sequential conditional binomials.
fn multinomial_counts<R: Rng + ?Sized>(m: u64, probs: &[f64], rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = m;
    let mut mass_left: f64 = probs.iter().sum();
    for (k, p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k + 1 == probs.len() || mass_left <= *p {
            counts[k] = remaining;
            break;
        }
        let cond = (p / mass_left).clamp(0.0, 1.0);
        let c = rand_distr::Binomial::new(remaining, cond)
            .expect("conditional probability in [0,1]")
            .sample(rng);
        counts[k] = c;
        remaining -= c;
        mass_left -= p;
    }
    counts
}

/// One atom of a finite joint table.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub x: [u64; 2],
    pub p: f64,
}

#[derive(Debug, Clone)]
enum LawKind {
    Product { c1: Marginal, c2: Marginal },
    Finite { atoms: Vec<Atom>, alias: WeightedAliasIndex<f64> },
}

/// A law on Z_+^2, used both for per-parent offspring vectors and for joint
/// immigration batches.
#[derive(Debug, Clone)]
pub struct Law {
    kind: LawKind,
}

impl Law {
    /// Independent coordinates with parametric marginals.
    pub fn product(c1: Marginal, c2: Marginal) -> Result<Law> {
        c1.validate()?;
        c2.validate()?;
        Ok(Law { kind: LawKind::Product { c1, c2 } })
    }

    /// Explicit joint table sampled by the alias method.
    pub fn finite(atoms: Vec<Atom>) -> Result<Law> {
        if atoms.is_empty() {
            return Err(Error::InvalidLaw("empty atom table".into()));
        }
        if atoms.iter().any(|a| !a.p.is_finite() || a.p < 0.0) {
            return Err(Error::InvalidLaw("negative or non-finite atom probability".into()));
        }
        let total: f64 = atoms.iter().map(|a| a.p).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::LawMass { total, tol: MASS_TOL });
        }
        let alias = WeightedAliasIndex::new(atoms.iter().map(|a| a.p).collect())
            .map_err(|e| Error::InvalidLaw(format!("alias table: {e}")))?;
        Ok(Law { kind: LawKind::Finite { atoms, alias } })
    }

    /// Point mass at `x`.
    pub fn deterministic(x: [u64; 2]) -> Law {
        Law::product(
            Marginal::Deterministic { value: x[0] },
            Marginal::Deterministic { value: x[1] },
        )
        .expect("point mass is always valid")
    }

    /// Exact mean vector.
    pub fn mean(&self) -> Vec2 {
        match &self.kind {
            LawKind::Product { c1, c2 } => [c1.mean(), c2.mean()],
            LawKind::Finite { atoms, .. } => {
                let mut m = [0.0; 2];
                for a in atoms {
                    m[0] += a.x[0] as f64 * a.p;
                    m[1] += a.x[1] as f64 * a.p;
                }
                m
            }
        }
    }

    /// Exact covariance matrix.
    pub fn covariance(&self) -> Mat2 {
        match &self.kind {
            LawKind::Product { c1, c2 } => {
                Mat2([[c1.variance(), 0.0], [0.0, c2.variance()]])
            }
            LawKind::Finite { atoms, .. } => {
                let m = self.mean();
                let mut c = [[0.0; 2]; 2];
                for a in atoms {
                    let d = [a.x[0] as f64 - m[0], a.x[1] as f64 - m[1]];
                    for i in 0..2 {
                        for j in 0..2 {
                            c[i][j] += d[i] * d[j] * a.p;
                        }
                    }
                }
                Mat2(c)
            }
        }
    }

    /// Componentwise fourth central moments.
    pub fn fourth_central(&self) -> Vec2 {
        match &self.kind {
            LawKind::Product { c1, c2 } => [c1.fourth_central(), c2.fourth_central()],
            LawKind::Finite { atoms, .. } => {
                let m = self.mean();
                let mut out = [0.0; 2];
                for a in atoms {
                    for i in 0..2 {
                        out[i] += (a.x[i] as f64 - m[i]).powi(4) * a.p;
                    }
                }
                out
            }
        }
    }

    /// Pgf of the component `i` marginal on the closed unit disk.
    pub fn marginal_pgf(&self, i: usize, z: Complex64) -> Complex64 {
        assert!(i < 2);
        match &self.kind {
            LawKind::Product { c1, c2 } => {
                if i == 0 {
                    c1.pgf(z)
                } else {
                    c2.pgf(z)
                }
            }
            LawKind::Finite { atoms, .. } => {
                atoms.iter().map(|a| z.powu(a.x[i] as u32) * a.p).sum()
            }
        }
    }

    /// Marginal law of one component.
    pub fn marginal(&self, i: usize) -> Marginal {
        assert!(i < 2);
        match &self.kind {
            LawKind::Product { c1, c2 } => {
                if i == 0 {
                    c1.clone()
                } else {
                    c2.clone()
                }
            }
            LawKind::Finite { atoms, .. } => {
                let bound = atoms.iter().map(|a| a.x[i]).max().unwrap_or(0) as usize;
                let mut probs = vec![0.0; bound + 1];
                for a in atoms {
                    probs[a.x[i] as usize] += a.p;
                }
                Marginal::Finite { probs }
            }
        }
    }

    /// Mass on outcomes with a positive count in component `i`.
    pub fn mass_positive(&self, i: usize) -> f64 {
        match &self.kind {
            LawKind::Product { c1, c2 } => {
                let m = if i == 0 { c1 } else { c2 };
                match m {
                    Marginal::Poisson { mean } => -(-mean).exp_m1(),
                    Marginal::Geometric { mean } => mean / (1.0 + mean),
                    Marginal::Bernoulli { p } => *p,
                    Marginal::Deterministic { value } => {
                        if *value > 0 {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    Marginal::Finite { probs } => 1.0 - probs[0],
                }
            }
            LawKind::Finite { atoms, .. } => {
                atoms.iter().filter(|a| a.x[i] > 0).map(|a| a.p).sum()
            }
        }
    }

    /// One draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [u64; 2] {
        match &self.kind {
            LawKind::Product { c1, c2 } => [c1.sample(rng), c2.sample(rng)],
            LawKind::Finite { atoms, alias } => atoms[alias.sample(rng)].x,
        }
    }

    /// Sum of `m` independent draws, exactly in distribution.
    ///
    /// `None` signals 64-bit overflow of a component total.
    pub fn sample_sum<R: Rng + ?Sized>(&self, m: u64, rng: &mut R) -> Option<[u64; 2]> {
        if m == 0 {
            return Some([0, 0]);
        }
        match &self.kind {
            LawKind::Product { c1, c2 } => {
                Some([c1.sample_sum(m, rng)?, c2.sample_sum(m, rng)?])
            }
            LawKind::Finite { atoms, .. } => {
                let probs: Vec<f64> = atoms.iter().map(|a| a.p).collect();
                let counts = multinomial_counts(m, &probs, rng);
                let mut total = [0u64; 2];
                for (a, c) in atoms.iter().zip(counts) {
                    for i in 0..2 {
                        total[i] = total[i].checked_add(c.checked_mul(a.x[i])?)?;
                    }
                }
                Some(total)
            }
        }
    }

    /// Expand to an explicit joint table when the support is bounded.
    pub fn as_finite_table(&self) -> Option<Vec<Atom>> {
        match &self.kind {
            LawKind::Finite { atoms, .. } => Some(atoms.clone()),
            LawKind::Product { c1, c2 } => {
                let (t1, t2) = (c1.table()?, c2.table()?);
                let mut atoms = Vec::with_capacity(t1.len() * t2.len());
                for (i, p1) in t1.iter().enumerate() {
                    for (j, p2) in t2.iter().enumerate() {
                        let p = p1 * p2;
                        if p > 0.0 {
                            atoms.push(Atom { x: [i as u64, j as u64], p });
                        }
                    }
                }
                Some(atoms)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use crate::rng::{StreamDomain, StreamKey};

    fn test_rng(ix: u64) -> crate::RngStream {
        StreamKey::new(99, StreamDomain::Aux, ix).stream()
    }

    /// Moments of every marginal family agree with direct summation over an
    /// explicit table (truncated far into the tail for unbounded support).
    #[test]
    fn marginal_moments_match_summation() {
        let cases = vec![
            Marginal::Poisson { mean: 1.3 },
            Marginal::Geometric { mean: 0.8 },
            Marginal::Bernoulli { p: 0.3 },
            Marginal::Deterministic { value: 4 },
            Marginal::Finite { probs: vec![0.2, 0.5, 0.0, 0.3] },
        ];
        for law in cases {
            let pmf: Vec<f64> = match &law {
                Marginal::Poisson { mean } => {
                    let mut v = vec![];
                    let mut p = (-mean).exp();
                    for k in 0..200 {
                        v.push(p);
                        p *= mean / (k + 1) as f64;
                    }
                    v
                }
                Marginal::Geometric { mean } => {
                    let p = 1.0 / (1.0 + mean);
                    let q = mean / (1.0 + mean);
                    (0..2000).map(|k| p * q.powi(k)).collect()
                }
                other => other.table().unwrap(),
            };
            for r in 1..=4 {
                let direct: f64 = pmf
                    .iter()
                    .enumerate()
                    .map(|(k, p)| (k as f64).powi(r as i32) * p)
                    .sum();
                assert_abs_diff_eq!(law.raw_moment(r), direct, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn finite_law_rejects_bad_mass() {
        let atoms = vec![Atom { x: [0, 0], p: 0.5 }, Atom { x: [1, 0], p: 0.6 }];
        assert!(matches!(Law::finite(atoms), Err(Error::LawMass { .. })));
        let atoms = vec![Atom { x: [0, 0], p: -0.5 }, Atom { x: [1, 0], p: 1.5 }];
        assert!(Law::finite(atoms).is_err());
    }

    #[test]
    fn product_law_moments() {
        let law = Law::product(
            Marginal::Poisson { mean: 2.0 },
            Marginal::Bernoulli { p: 0.25 },
        )
        .unwrap();
        assert_eq!(law.mean(), [2.0, 0.25]);
        let cov = law.covariance();
        assert_abs_diff_eq!(cov.get(0, 0), 2.0);
        assert_abs_diff_eq!(cov.get(1, 1), 0.25 * 0.75);
        assert_eq!(cov.get(0, 1), 0.0);
    }

    #[test]
    fn finite_law_moments_match_product_expansion() {
        let product = Law::product(
            Marginal::Bernoulli { p: 0.4 },
            Marginal::Finite { probs: vec![0.1, 0.6, 0.3] },
        )
        .unwrap();
        let table = Law::finite(product.as_finite_table().unwrap()).unwrap();
        assert_abs_diff_eq!(product.mean()[0], table.mean()[0], epsilon = 1e-15);
        assert_abs_diff_eq!(product.mean()[1], table.mean()[1], epsilon = 1e-15);
        assert!(product.covariance().max_abs_diff(&table.covariance()) < 1e-14);
        let f1 = product.fourth_central();
        let f2 = table.fourth_central();
        assert_abs_diff_eq!(f1[0], f2[0], epsilon = 1e-14);
        assert_abs_diff_eq!(f1[1], f2[1], epsilon = 1e-14);
    }

    /// The one-shot sum sampler agrees with per-individual sums in mean and
    /// variance for every family.
    #[test]
    fn sample_sum_matches_individual_sampling() {
        let laws = vec![
            Law::product(Marginal::Poisson { mean: 0.9 }, Marginal::Geometric { mean: 0.6 })
                .unwrap(),
            Law::finite(vec![
                Atom { x: [0, 0], p: 0.25 },
                Atom { x: [2, 1], p: 0.5 },
                Atom { x: [0, 3], p: 0.25 },
            ])
            .unwrap(),
        ];
        let m = 40u64;
        let reps = 20_000;
        for (li, law) in laws.iter().enumerate() {
            let mut rng = test_rng(li as u64);
            let mut sums = [0.0f64; 2];
            let mut sq = [0.0f64; 2];
            for _ in 0..reps {
                let s = law.sample_sum(m, &mut rng).unwrap();
                for i in 0..2 {
                    sums[i] += s[i] as f64;
                    sq[i] += (s[i] as f64) * (s[i] as f64);
                }
            }
            let mean = law.mean();
            let cov = law.covariance();
            for i in 0..2 {
                let emp_mean = sums[i] / reps as f64;
                let emp_var = sq[i] / reps as f64 - emp_mean * emp_mean;
                let target_mean = m as f64 * mean[i];
                let target_var = m as f64 * cov.get(i, i);
                let se = (target_var / reps as f64).sqrt().max(1e-12);
                assert!(
                    (emp_mean - target_mean).abs() < 5.0 * se,
                    "law {li} comp {i}: mean {emp_mean} vs {target_mean}"
                );
                assert!(
                    (emp_var - target_var).abs() < 0.05 * target_var + 5.0 * se,
                    "law {li} comp {i}: var {emp_var} vs {target_var}"
                );
            }
        }
    }

    #[test]
    fn geometric_mean_parametrization_is_exact() {
        let g = Marginal::Geometric { mean: 0.5 };
        assert_eq!(g.mean(), 0.5);
        assert_eq!(g.variance(), 2.0 * 0.25 + 0.5 - 0.25);
    }

    #[test]
    fn pgf_at_one_is_one() {
        let laws = vec![
            Marginal::Poisson { mean: 1.7 },
            Marginal::Geometric { mean: 0.4 },
            Marginal::Bernoulli { p: 0.2 },
            Marginal::Deterministic { value: 3 },
            Marginal::Finite { probs: vec![0.5, 0.5] },
        ];
        for law in laws {
            let v = law.pgf(Complex64::new(1.0, 0.0));
            assert_abs_diff_eq!(v.re, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn mass_positive_reflects_support() {
        let law = Law::finite(vec![
            Atom { x: [0, 1], p: 0.75 },
            Atom { x: [0, 0], p: 0.25 },
        ])
        .unwrap();
        assert_eq!(law.mass_positive(0), 0.0);
        assert_abs_diff_eq!(law.mass_positive(1), 0.75);
    }
}
