//! Model parameters: mean matrix, criticality classification, derived
//! variance matrices, and the closed-form powers of the mean matrix.

use crate::law::{Atom, Law, Marginal};
use crate::linalg::{Mat2, Vec2};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Tolerance for testing mean-matrix entries against 0 and 1.
///
/// Equalities hold when within `CRITICAL_TOL`; strict inequalities must hold
/// by more than `CRITICAL_TOL`.
pub const CRITICAL_TOL: f64 = 1e-9;

/// The five covered regimes of the lower-triangular mean matrix, numbered as
/// is conventional for decomposable critical two-type processes:
///
/// | case | a11      | a21  | a22      |
/// |------|----------|------|----------|
/// | 1    | 1        | 0    | 1        |
/// | 2    | 1        | > 0  | 1        |
/// | 3    | 1        | 0    | [0, 1)   |
/// | 4    | 1        | > 0  | [0, 1)   |
/// | 5    | [0, 1)   | >= 0 | 1        |
///
/// Cases 1 and 2 are the strongly critical ones (both diagonal entries
/// equal 1).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseLabel {
    Case1,
    Case2,
    Case3,
    Case4,
    Case5,
    NotCovered(String),
}

impl CaseLabel {
    pub fn index(&self) -> Option<u8> {
        match self {
            CaseLabel::Case1 => Some(1),
            CaseLabel::Case2 => Some(2),
            CaseLabel::Case3 => Some(3),
            CaseLabel::Case4 => Some(4),
            CaseLabel::Case5 => Some(5),
            CaseLabel::NotCovered(_) => None,
        }
    }

    pub fn from_index(i: u8) -> Option<CaseLabel> {
        match i {
            1 => Some(CaseLabel::Case1),
            2 => Some(CaseLabel::Case2),
            3 => Some(CaseLabel::Case3),
            4 => Some(CaseLabel::Case4),
            5 => Some(CaseLabel::Case5),
            _ => None,
        }
    }

    pub fn is_covered(&self) -> bool {
        self.index().is_some()
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaseLabel::NotCovered(reason) => write!(f, "not covered ({reason})"),
            other => write!(f, "case {}", other.index().unwrap()),
        }
    }
}

/// Classify a lower-triangular mean matrix into one of the five regimes.
pub fn classify(a: &Mat2) -> CaseLabel {
    let (a11, a21, a22) = (a.get(0, 0), a.get(1, 0), a.get(1, 1));
    let one = |x: f64| (x - 1.0).abs() <= CRITICAL_TOL;
    let zero = |x: f64| x.abs() <= CRITICAL_TOL;
    let below_one = |x: f64| x >= 0.0 && x < 1.0 - CRITICAL_TOL;
    let positive = |x: f64| x > CRITICAL_TOL;

    if a11 > 1.0 + CRITICAL_TOL || a22 > 1.0 + CRITICAL_TOL {
        return CaseLabel::NotCovered(format!(
            "supercritical: spectral radius max({a11}, {a22}) > 1"
        ));
    }
    match (one(a11), one(a22)) {
        (true, true) if zero(a21) => CaseLabel::Case1,
        (true, true) if positive(a21) => CaseLabel::Case2,
        (true, false) if below_one(a22) && zero(a21) => CaseLabel::Case3,
        (true, false) if below_one(a22) && positive(a21) => CaseLabel::Case4,
        (false, true) if below_one(a11) => CaseLabel::Case5,
        (false, false) => CaseLabel::NotCovered(format!(
            "subcritical: spectral radius max({a11}, {a22}) < 1"
        )),
        _ => CaseLabel::NotCovered(format!(
            "ambiguous entries (a11={a11}, a21={a21}, a22={a22})"
        )),
    }
}

/// A fully derived model: the three laws plus the moment quantities every
/// formula consumes.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub offspring_type1: Law,
    pub offspring_type2: Law,
    pub immigration: Law,
    /// Offspring mean matrix; column i is the mean offspring vector of a
    /// type-i parent. Lower triangular after normalization.
    pub mean_matrix: Mat2,
    /// Immigration mean vector.
    pub immigration_mean: Vec2,
    /// Immigration covariance.
    pub v0: Mat2,
    /// Offspring covariance of a type-1 parent.
    pub v1: Mat2,
    /// Offspring covariance of a type-2 parent.
    pub v2: Mat2,
    pub case_label: CaseLabel,
    /// True when the two coordinates were swapped to normalize the mean
    /// matrix to lower-triangular form.
    pub swapped: bool,
}

impl ModelParams {
    pub fn a11(&self) -> f64 {
        self.mean_matrix.get(0, 0)
    }
    pub fn a21(&self) -> f64 {
        self.mean_matrix.get(1, 0)
    }
    pub fn a22(&self) -> f64 {
        self.mean_matrix.get(1, 1)
    }
    pub fn b1(&self) -> f64 {
        self.immigration_mean[0]
    }
    pub fn b2(&self) -> f64 {
        self.immigration_mean[1]
    }

    /// Offspring covariance entry v^{(i)}_{j,k} with i in {0,1,2} (0 is
    /// immigration), indices 1-based as in the moment formulas.
    pub fn v(&self, i: usize, j: usize, k: usize) -> f64 {
        let m = match i {
            0 => &self.v0,
            1 => &self.v1,
            2 => &self.v2,
            _ => panic!("law index out of range"),
        };
        m.get(j - 1, k - 1)
    }

    /// Fails unless the model classifies into the requested case.
    pub fn require_case(&self, expected: &CaseLabel) -> Result<()> {
        if &self.case_label == expected {
            Ok(())
        } else {
            Err(Error::CaseMismatch {
                expected: expected.to_string(),
                actual: self.case_label.to_string(),
            })
        }
    }
}

fn swap_components(law: &Law) -> Law {
    match law.as_finite_table() {
        Some(atoms) => Law::finite(
            atoms
                .into_iter()
                .map(|Atom { x, p }| Atom { x: [x[1], x[0]], p })
                .collect(),
        )
        .expect("swapped table keeps its mass"),
        None => Law::product(law.marginal(1), law.marginal(0))
            .expect("swapped product keeps validity"),
    }
}

/// Assemble and classify a model from its three laws.
///
/// The offspring mean matrix must be reducible: at least one off-diagonal
/// mean zero. When only the (1,2) entry is positive and `allow_swap` is set,
/// the two types are relabelled (recorded in `swapped`) so the matrix is
/// lower triangular. Models outside the five critical regimes are returned
/// with a `NotCovered` label rather than rejected; only irreducible mean
/// matrices and invalid laws are errors.
pub fn build_model(
    offspring_type1: Law,
    offspring_type2: Law,
    immigration: Law,
    allow_swap: bool,
) -> Result<ModelParams> {
    let m1 = offspring_type1.mean();
    let m2 = offspring_type2.mean();
    let a12 = m2[0];
    let a21 = m1[1];

    if a12 > 0.0 && a21 > 0.0 {
        return Err(Error::Irreducible { a12, a21 });
    }

    let (xi1, xi2, eps, swapped) = if a12 > 0.0 {
        if !allow_swap {
            return Err(Error::NotCovered(
                "mean matrix is upper triangular; enable coordinate swap".into(),
            ));
        }
        (
            swap_components(&offspring_type2),
            swap_components(&offspring_type1),
            swap_components(&immigration),
            true,
        )
    } else {
        (offspring_type1, offspring_type2, immigration, false)
    };

    // Decomposability must hold pathwise, not just in mean: a type-2 parent
    // never produces a type-1 child.
    let stray = xi2.mass_positive(0);
    if stray > 0.0 {
        return Err(Error::DecomposabilityViolated { mass: stray });
    }

    let c1 = xi1.mean();
    let c2 = xi2.mean();
    let mean_matrix = Mat2([[c1[0], c2[0]], [c1[1], c2[1]]]);
    let case_label = classify(&mean_matrix);

    Ok(ModelParams {
        mean_matrix,
        immigration_mean: eps.mean(),
        v0: eps.covariance(),
        v1: xi1.covariance(),
        v2: xi2.covariance(),
        case_label,
        swapped,
        offspring_type1: xi1,
        offspring_type2: xi2,
        immigration: eps,
    })
}

/// Closed-form power of a lower-triangular 2x2 matrix.
///
/// The diagonal entries are plain powers; the lower-left entry is
/// `a21 (a11^l - a22^l)/(a11 - a22)`, degenerating to `l a^{l-1}` (with `a`
/// the midpoint of the near-equal diagonal) when the diagonal entries
/// coincide within tolerance. `l = 0` gives the identity.
pub fn mean_matrix_power(a: &Mat2, l: u64) -> Mat2 {
    debug_assert!(a.get(0, 1) == 0.0, "matrix must be lower triangular");
    if l == 0 {
        return Mat2::identity();
    }
    let (a11, a21, a22) = (a.get(0, 0), a.get(1, 0), a.get(1, 1));
    let li = l as i32;
    let lower = if (a11 - a22).abs() <= CRITICAL_TOL {
        // Midpoint form keeps the error of the degenerate branch at
        // O((l |a11-a22|)^2) relative.
        let mid = 0.5 * (a11 + a22);
        a21 * l as f64 * mid.powi(li - 1)
    } else {
        a21 * (a11.powi(li) - a22.powi(li)) / (a11 - a22)
    };
    Mat2([[a11.powi(li), 0.0], [lower, a22.powi(li)]])
}

/// Poisson-law archetype for each covered case, used by the command-line
/// defaults and the verification suite.
///
/// Type-1 offspring are (Poisson, Poisson) with means matching the first
/// column of the case's mean matrix, type-2 offspring are (0, Poisson), and
/// immigration is a pair of independent Poisson(1) batches.
pub fn poisson_archetype(case: u8) -> Result<ModelParams> {
    let (a11, a21, a22) = match case {
        1 => (1.0, 0.0, 1.0),
        2 => (1.0, 0.7, 1.0),
        3 => (1.0, 0.0, 0.5),
        4 => (1.0, 0.7, 0.5),
        5 => (0.5, 0.7, 1.0),
        _ => return Err(Error::Config(format!("no archetype for case {case}"))),
    };
    let pois = |mean: f64| {
        if mean == 0.0 {
            Marginal::Deterministic { value: 0 }
        } else {
            Marginal::Poisson { mean }
        }
    };
    let xi1 = Law::product(pois(a11), pois(a21))?;
    let xi2 = Law::product(Marginal::Deterministic { value: 0 }, pois(a22))?;
    let eps = Law::product(pois(1.0), pois(1.0))?;
    let params = build_model(xi1, xi2, eps, false)?;
    debug_assert_eq!(params.case_label.index(), Some(case));
    Ok(params)
}

/// Case-3 archetype with correlated immigration coordinates
/// (atoms (0,0) and (1,1) with probability 1/2 each, so the immigration
/// cross-covariance is 1/4).
pub fn case3_correlated_archetype() -> Result<ModelParams> {
    let xi1 = Law::product(
        Marginal::Poisson { mean: 1.0 },
        Marginal::Deterministic { value: 0 },
    )?;
    let xi2 = Law::product(
        Marginal::Deterministic { value: 0 },
        Marginal::Poisson { mean: 0.5 },
    )?;
    let eps = Law::finite(vec![
        Atom { x: [0, 0], p: 0.5 },
        Atom { x: [1, 1], p: 0.5 },
    ])?;
    build_model(xi1, xi2, eps, false)
}

/// Case-5 archetype with correlated type-1 offspring coordinates and
/// correlated immigration, exercising every term of the cross-time
/// covariance formula.
pub fn case5_correlated_archetype() -> Result<ModelParams> {
    // Type-1 offspring: mean (0.5, 0.7), cov [[0.25, 0.25], [0.25, 0.41]].
    let xi1 = Law::finite(vec![
        Atom { x: [0, 0], p: 0.4 },
        Atom { x: [0, 1], p: 0.1 },
        Atom { x: [1, 1], p: 0.4 },
        Atom { x: [1, 2], p: 0.1 },
    ])?;
    let xi2 = Law::product(
        Marginal::Deterministic { value: 0 },
        Marginal::Poisson { mean: 1.0 },
    )?;
    let eps = Law::finite(vec![
        Atom { x: [0, 0], p: 0.5 },
        Atom { x: [1, 1], p: 0.25 },
        Atom { x: [1, 0], p: 0.25 },
    ])?;
    build_model(xi1, xi2, eps, false)
}
