//! Finitely supported increment measures on `Z^d`.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

const FLOAT_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum Weights {
    Exact(Vec<BigRational>),
    Float(Vec<f64>),
}

/// Probability measure on finitely many distinct points of `Z^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct IncrementMeasure {
    support: Vec<Vec<i64>>,
    weights: Weights,
    probs: Vec<f64>,
}

impl IncrementMeasure {
    pub fn exact(support: Vec<Vec<i64>>, weights: Vec<BigRational>) -> Result<Self> {
        check_support(&support, weights.len())?;
        if weights.iter().any(|w| !w.is_positive()) {
            return Err(Error::InvalidMeasure("weights must be positive".into()));
        }
        let total: BigRational = weights.iter().cloned().sum();
        if !total.is_one() {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }
        let probs = weights.iter().map(|w| w.to_f64().unwrap_or(f64::NAN)).collect();
        Ok(IncrementMeasure { support, weights: Weights::Exact(weights), probs })
    }

    pub fn float(support: Vec<Vec<i64>>, weights: Vec<f64>) -> Result<Self> {
        check_support(&support, weights.len())?;
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidMeasure("weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > FLOAT_SUM_TOLERANCE {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }
        Ok(IncrementMeasure { support, probs: weights.clone(), weights: Weights::Float(weights) })
    }

    pub fn uniform(support: Vec<Vec<i64>>) -> Result<Self> {
        let k = support.len();
        if k == 0 {
            return Err(Error::InvalidMeasure("empty support".into()));
        }
        let w = BigRational::new(BigInt::one(), BigInt::from(k));
        IncrementMeasure::exact(support, vec![w; k])
    }

    /// Point mass at `x`.
    pub fn dirac(x: Vec<i64>) -> Self {
        IncrementMeasure::uniform(vec![x]).expect("single point is a valid measure")
    }

    pub fn dim(&self) -> usize {
        self.support[0].len()
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn support(&self) -> &[Vec<i64>] {
        &self.support
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.weights, Weights::Exact(_))
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        crate::walk::shannon_entropy(&self.probs)
    }

    /// Integer numerators over a common denominator, when that fits in `u64`.
    pub fn common_denominator(&self) -> Option<(Vec<u64>, u64)> {
        let Weights::Exact(w) = &self.weights else { return None };
        let lcm = w.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
        let den = lcm.to_u64()?;
        let nums = w
            .iter()
            .map(|x| (x.numer() * (&lcm / x.denom())).to_u64())
            .collect::<Option<Vec<u64>>>()?;
        Some((nums, den))
    }

    /// Weight strings as they appear in measure files.
    pub fn weight_strings(&self) -> Vec<String> {
        match &self.weights {
            Weights::Exact(w) => w.iter().map(|x| x.to_string()).collect(),
            Weights::Float(w) => w.iter().map(|x| x.to_string()).collect(),
        }
    }
}

fn check_support(support: &[Vec<i64>], n_weights: usize) -> Result<()> {
    if support.is_empty() {
        return Err(Error::InvalidMeasure("empty support".into()));
    }
    if support.len() != n_weights {
        return Err(Error::InvalidMeasure("support and weights differ in length".into()));
    }
    let d = support[0].len();
    if d == 0 {
        return Err(Error::InvalidMeasure("points must have at least one coordinate".into()));
    }
    if let Some(bad) = support.iter().find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: bad.len() });
    }
    let distinct: BTreeSet<&Vec<i64>> = support.iter().collect();
    if distinct.len() != support.len() {
        return Err(Error::InvalidMeasure("support points must be distinct".into()));
    }
    Ok(())
}

/// Parses `"p/q"`, an integer string, or a decimal into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| Error::Parse(format!("bad numerator in {s:?}")))?;
        let q: BigInt = q.trim().parse().map_err(|_| Error::Parse(format!("bad denominator in {s:?}")))?;
        if q.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(BigRational::new(p, q));
    }
    if let Ok(p) = s.parse::<BigInt>() {
        return Ok(BigRational::from_integer(p));
    }
    // Decimal literals are exact: 0.25 means 1/4.
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, s),
    };
    let (int_part, frac_part) = body.split_once('.').ok_or_else(|| Error::Parse(format!("not a number: {s:?}")))?;
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = digits.parse().map_err(|_| Error::Parse(format!("not a number: {s:?}")))?;
    let denom = num_traits::pow(BigInt::from(10), frac_part.len());
    Ok(BigRational::new(numer * sign, denom))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(p: i64, q: i64) -> BigRational {
        BigRational::new(p.into(), q.into())
    }

    #[test]
    fn rejects_bad_measures() {
        assert!(IncrementMeasure::exact(vec![vec![0], vec![1]], vec![r(1, 2), r(1, 3)]).is_err());
        assert!(IncrementMeasure::exact(vec![vec![0], vec![0]], vec![r(1, 2), r(1, 2)]).is_err());
        assert!(IncrementMeasure::exact(vec![vec![0], vec![1, 2]], vec![r(1, 2), r(1, 2)]).is_err());
        assert!(IncrementMeasure::exact(vec![vec![0], vec![1]], vec![r(3, 2), r(-1, 2)]).is_err());
        assert!(IncrementMeasure::float(vec![vec![0], vec![1]], vec![0.5, 0.5 + 1e-9]).is_err());
        assert!(IncrementMeasure::float(vec![vec![0], vec![1]], vec![0.5, 0.5 + 1e-14]).is_ok());
    }

    #[test]
    fn common_denominator_of_thirds_and_sixths() {
        let mu = IncrementMeasure::exact(vec![vec![0], vec![1], vec![2]], vec![r(1, 3), r(1, 2), r(1, 6)]).unwrap();
        assert_eq!(mu.common_denominator(), Some((vec![2, 3, 1], 6)));
    }

    #[test]
    fn rational_parsing() {
        assert_eq!(parse_rational("1/3").unwrap(), r(1, 3));
        assert_eq!(parse_rational(" 2 / 4 ").unwrap(), r(1, 2));
        assert_eq!(parse_rational("0.25").unwrap(), r(1, 4));
        assert_eq!(parse_rational("-1.5").unwrap(), r(-3, 2));
        assert_eq!(parse_rational("1").unwrap(), r(1, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
    }
}
