//! Model specification files.
//!
//! A model file is TOML with three law sections. Unknown keys are rejected
//! so a typo cannot silently change a law. Probabilities may be written as
//! numbers or as exact-rational strings like `"1/3"`.
//!
//! ```toml
//! # Strongly critical coupled regime with Poisson laws.
//! [offspring1.product]
//! component1 = { poisson = { mean = 1.0 } }
//! component2 = { poisson = { mean = 0.7 } }
//!
//! [offspring2.product]
//! component1 = { deterministic = { value = 0 } }
//! component2 = { poisson = { mean = 1.0 } }
//!
//! [immigration.finite]
//! atoms = [
//!     { x = [0, 0], p = "1/2" },
//!     { x = [1, 1], p = "1/2" },
//! ]
//! ```

use crate::law::{Atom, Law, Marginal};
use crate::model::{build_model, ModelParams};
use crate::{Error, Result};
use serde::Deserialize;
use std::path::Path;

/// A probability literal: plain number or `"p/q"` string.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Prob {
    Number(f64),
    Rational(String),
}

impl Prob {
    pub fn value(&self) -> Result<f64> {
        match self {
            Prob::Number(x) => Ok(*x),
            Prob::Rational(s) => {
                let (num, den) = s
                    .split_once('/')
                    .ok_or_else(|| Error::ModelFile(format!("bad rational '{s}'")))?;
                let num: f64 = num
                    .trim()
                    .parse()
                    .map_err(|_| Error::ModelFile(format!("bad rational '{s}'")))?;
                let den: f64 = den
                    .trim()
                    .parse()
                    .map_err(|_| Error::ModelFile(format!("bad rational '{s}'")))?;
                if den == 0.0 {
                    return Err(Error::ModelFile(format!("zero denominator in '{s}'")));
                }
                Ok(num / den)
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MarginalSpec {
    Poisson { mean: f64 },
    Geometric { mean: f64 },
    Bernoulli { p: Prob },
    Deterministic { value: u64 },
    Finite { probs: Vec<Prob> },
}

impl MarginalSpec {
    fn build(&self) -> Result<Marginal> {
        let m = match self {
            MarginalSpec::Poisson { mean } => Marginal::Poisson { mean: *mean },
            MarginalSpec::Geometric { mean } => Marginal::Geometric { mean: *mean },
            MarginalSpec::Bernoulli { p } => Marginal::Bernoulli { p: p.value()? },
            MarginalSpec::Deterministic { value } => Marginal::Deterministic { value: *value },
            MarginalSpec::Finite { probs } => Marginal::Finite {
                probs: probs.iter().map(|p| p.value()).collect::<Result<_>>()?,
            },
        };
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub x: [u64; 2],
    pub p: Prob,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LawSpec {
    /// Independent coordinates.
    Product {
        component1: MarginalSpec,
        component2: MarginalSpec,
    },
    /// Joint finite table (coordinates may be correlated).
    Finite { atoms: Vec<AtomSpec> },
}

impl LawSpec {
    pub fn build(&self) -> Result<Law> {
        match self {
            LawSpec::Product { component1, component2 } => {
                Law::product(component1.build()?, component2.build()?)
            }
            LawSpec::Finite { atoms } => Law::finite(
                atoms
                    .iter()
                    .map(|a| Ok(Atom { x: a.x, p: a.p.value()? }))
                    .collect::<Result<_>>()?,
            ),
        }
    }
}

/// Top-level model file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub offspring1: LawSpec,
    pub offspring2: LawSpec,
    pub immigration: LawSpec,
    /// Relabel the types when the mean matrix is upper triangular.
    #[serde(default = "default_allow_swap")]
    pub allow_swap: bool,
}

fn default_allow_swap() -> bool {
    true
}

impl ModelSpec {
    pub fn parse(text: &str) -> Result<ModelSpec> {
        toml::from_str(text).map_err(|e| Error::ModelFile(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<ModelSpec> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::ModelFile(format!("{}: {e}", path.display())))?;
        ModelSpec::parse(&text)
    }

    pub fn build(&self) -> Result<ModelParams> {
        build_model(
            self.offspring1.build()?,
            self.offspring2.build()?,
            self.immigration.build()?,
            self.allow_swap,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CaseLabel;
    use approx::assert_abs_diff_eq;

    const CASE2_POISSON: &str = r#"
[offspring1.product]
component1 = { poisson = { mean = 1.0 } }
component2 = { poisson = { mean = 0.7 } }

[offspring2.product]
component1 = { deterministic = { value = 0 } }
component2 = { poisson = { mean = 1.0 } }

[immigration.product]
component1 = { poisson = { mean = 1.0 } }
component2 = { poisson = { mean = 1.0 } }
"#;

    #[test]
    fn parses_and_classifies() {
        let spec = ModelSpec::parse(CASE2_POISSON).unwrap();
        let params = spec.build().unwrap();
        assert_eq!(params.case_label, CaseLabel::Case2);
        assert_abs_diff_eq!(params.a21(), 0.7);
    }

    #[test]
    fn rational_probabilities() {
        let text = r#"
[offspring1.product]
component1 = { bernoulli = { p = "1/2" } }
component2 = { deterministic = { value = 0 } }

[offspring2.product]
component1 = { deterministic = { value = 0 } }
component2 = { finite = { probs = ["1/3", "1/3", "1/3"] } }

[immigration.finite]
atoms = [
    { x = [0, 0], p = "3/4" },
    { x = [1, 2], p = "1/4" },
]
"#;
        let params = ModelSpec::parse(text).unwrap().build().unwrap();
        assert_abs_diff_eq!(params.a11(), 0.5);
        assert_abs_diff_eq!(params.a22(), 1.0, epsilon = 1e-15);
        assert_eq!(params.case_label, CaseLabel::Case5);
        assert_abs_diff_eq!(params.b1(), 0.25);
        assert_abs_diff_eq!(params.b2(), 0.5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = CASE2_POISSON.replace("[immigration.product]", "[imigration.product]");
        assert!(matches!(ModelSpec::parse(&text), Err(Error::ModelFile(_))));
        let text = format!("{CASE2_POISSON}\nextra_key = 1\n");
        assert!(matches!(ModelSpec::parse(&text), Err(Error::ModelFile(_))));
    }

    #[test]
    fn bad_rational_is_rejected() {
        let p = Prob::Rational("1:2".into());
        assert!(p.value().is_err());
        assert!(Prob::Rational("1/0".into()).value().is_err());
        assert_abs_diff_eq!(Prob::Rational("2/8".into()).value().unwrap(), 0.25);
    }
}
