//! Exact multivariate polynomials over the rationals: graded monomial bases,
//! the monomial-value lift that turns degree-D polynomials into hyperplanes,
//! and certified sign evaluation (float filter, exact fallback).

use crate::numeric::{rat_to_f64, rational_to_string};
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::OnceLock;
use thiserror::Error;

/// Exact sign of a polynomial value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SignValue {
    Negative,
    Zero,
    Positive,
}

impl SignValue {
    pub fn of_rational(r: &BigRational) -> SignValue {
        if r.is_zero() {
            SignValue::Zero
        } else if r.is_positive() {
            SignValue::Positive
        } else {
            SignValue::Negative
        }
    }

    pub fn of_f64(v: f64) -> SignValue {
        if v == 0.0 {
            SignValue::Zero
        } else if v > 0.0 {
            SignValue::Positive
        } else {
            SignValue::Negative
        }
    }

    pub fn product(self, other: SignValue) -> SignValue {
        use SignValue::*;
        match (self, other) {
            (Zero, _) | (_, Zero) => Zero,
            (Positive, Positive) | (Negative, Negative) => Positive,
            _ => Negative,
        }
    }

    pub fn is_zero(self) -> bool {
        self == SignValue::Zero
    }
}

/// A monomial: one exponent per ambient variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial {
    exps: Vec<u32>,
}

impl Monomial {
    pub fn new(exps: Vec<u32>) -> Monomial {
        Monomial { exps }
    }

    /// The constant monomial in `d` variables.
    pub fn unit(d: usize) -> Monomial {
        Monomial { exps: vec![0; d] }
    }

    /// x_i as a monomial in `d` variables.
    pub fn var(d: usize, i: usize) -> Monomial {
        let mut exps = vec![0; d];
        exps[i] = 1;
        Monomial { exps }
    }

    pub fn dimension(&self) -> usize {
        self.exps.len()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exps
    }

    pub fn total_degree(&self) -> u32 {
        self.exps.iter().sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.exps.len(), other.exps.len());
        Monomial {
            exps: self
                .exps
                .iter()
                .zip(&other.exps)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

/// Graded order: total degree first; within a degree, higher powers of
/// earlier variables come first. This is the fixed basis enumeration order,
/// so for d=2, D=3 the sequence is x1, x2, x1^2, x1*x2, x2^2, x1^3, ...
impl Ord for Monomial {
    fn cmp(&self, other: &Monomial) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| other.exps.cmp(&self.exps))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Monomial) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.total_degree() == 0 {
            return write!(f, "1");
        }
        let mut first = true;
        for (i, &e) in self.exps.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if e == 1 {
                write!(f, "x{}", i + 1)?;
            } else {
                write!(f, "x{}^{}", i + 1, e)?;
            }
        }
        Ok(())
    }
}

/// A point with exact rational coordinates. Caches f64 approximations for
/// the evaluation filter; the cache is never used for exact decisions.
#[derive(Clone, Debug)]
pub struct RationalPoint {
    coords: Vec<BigRational>,
    approx: Vec<f64>,
}

impl PartialEq for RationalPoint {
    fn eq(&self, other: &RationalPoint) -> bool {
        self.coords == other.coords
    }
}

impl Eq for RationalPoint {}

impl RationalPoint {
    pub fn new(coords: Vec<BigRational>) -> RationalPoint {
        let approx = coords.iter().map(rat_to_f64).collect();
        RationalPoint { coords, approx }
    }

    pub fn dimension(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[BigRational] {
        &self.coords
    }

    pub fn coord(&self, i: usize) -> &BigRational {
        &self.coords[i]
    }

    pub fn approx(&self) -> &[f64] {
        &self.approx
    }
}

impl From<Vec<BigRational>> for RationalPoint {
    fn from(coords: Vec<BigRational>) -> RationalPoint {
        RationalPoint::new(coords)
    }
}

struct ApproxTerms {
    // (f64 coefficient, exponents); usable only when all entries are finite.
    terms: Vec<(f64, Vec<u32>)>,
    finite: bool,
    max_degree: u32,
}

/// Sparse multivariate polynomial with exact rational coefficients.
/// Stored coefficients are never zero; the zero polynomial has no terms.
pub struct MultiPoly {
    d: usize,
    terms: BTreeMap<Monomial, BigRational>,
    approx: OnceLock<ApproxTerms>,
}

impl Clone for MultiPoly {
    fn clone(&self) -> MultiPoly {
        MultiPoly {
            d: self.d,
            terms: self.terms.clone(),
            approx: OnceLock::new(),
        }
    }
}

impl PartialEq for MultiPoly {
    fn eq(&self, other: &MultiPoly) -> bool {
        self.d == other.d && self.terms == other.terms
    }
}

impl Eq for MultiPoly {}

impl fmt::Debug for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MultiPoly({})", self)
    }
}

impl fmt::Display for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            if m.total_degree() == 0 {
                write!(f, "{}", c)?;
            } else if c.is_one() {
                write!(f, "{}", m)?;
            } else {
                write!(f, "{}*{}", c, m)?;
            }
        }
        Ok(())
    }
}

impl MultiPoly {
    pub fn zero(d: usize) -> MultiPoly {
        MultiPoly {
            d,
            terms: BTreeMap::new(),
            approx: OnceLock::new(),
        }
    }

    pub fn constant(d: usize, c: BigRational) -> MultiPoly {
        let mut p = MultiPoly::zero(d);
        if !c.is_zero() {
            p.terms.insert(Monomial::unit(d), c);
        }
        p
    }

    pub fn one(d: usize) -> MultiPoly {
        MultiPoly::constant(d, BigRational::one())
    }

    pub fn variable(d: usize, i: usize) -> MultiPoly {
        MultiPoly::from_terms(d, [(Monomial::var(d, i), BigRational::one())])
    }

    pub fn from_terms(
        d: usize,
        terms: impl IntoIterator<Item = (Monomial, BigRational)>,
    ) -> MultiPoly {
        let mut map: BTreeMap<Monomial, BigRational> = BTreeMap::new();
        for (m, c) in terms {
            assert_eq!(m.dimension(), d, "monomial dimension mismatch");
            if c.is_zero() {
                continue;
            }
            match map.entry(m) {
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert(c);
                }
                std::collections::btree_map::Entry::Occupied(mut e) => {
                    let sum = e.get() + &c;
                    if sum.is_zero() {
                        e.remove();
                    } else {
                        *e.get_mut() = sum;
                    }
                }
            }
        }
        MultiPoly {
            d,
            terms: map,
            approx: OnceLock::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; -1 for the zero polynomial.
    pub fn degree(&self) -> i64 {
        self.terms
            .keys()
            .map(|m| m.total_degree() as i64)
            .max()
            .unwrap_or(-1)
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Terms in the canonical graded order.
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Monomial) -> BigRational {
        self.terms.get(m).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn degree_in(&self, var: usize) -> u32 {
        self.terms
            .keys()
            .map(|m| m.exponents()[var])
            .max()
            .unwrap_or(0)
    }

    pub fn add(&self, other: &MultiPoly) -> MultiPoly {
        assert_eq!(self.d, other.d);
        MultiPoly::from_terms(
            self.d,
            self.terms
                .iter()
                .chain(other.terms.iter())
                .map(|(m, c)| (m.clone(), c.clone())),
        )
    }

    pub fn neg(&self) -> MultiPoly {
        MultiPoly::from_terms(self.d, self.terms.iter().map(|(m, c)| (m.clone(), -c)))
    }

    pub fn sub(&self, other: &MultiPoly) -> MultiPoly {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &BigRational) -> MultiPoly {
        if c.is_zero() {
            return MultiPoly::zero(self.d);
        }
        MultiPoly::from_terms(self.d, self.terms.iter().map(|(m, k)| (m.clone(), k * c)))
    }

    pub fn mul(&self, other: &MultiPoly) -> MultiPoly {
        assert_eq!(self.d, other.d);
        let mut acc: BTreeMap<Monomial, BigRational> = BTreeMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let m = ma.mul(mb);
                let c = ca * cb;
                match acc.entry(m) {
                    std::collections::btree_map::Entry::Vacant(e) => {
                        e.insert(c);
                    }
                    std::collections::btree_map::Entry::Occupied(mut e) => {
                        let sum = e.get() + &c;
                        if sum.is_zero() {
                            e.remove();
                        } else {
                            *e.get_mut() = sum;
                        }
                    }
                }
            }
        }
        MultiPoly {
            d: self.d,
            terms: acc,
            approx: OnceLock::new(),
        }
    }

    pub fn pow(&self, e: u32) -> MultiPoly {
        let mut acc = MultiPoly::one(self.d);
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn partial_derivative(&self, var: usize) -> MultiPoly {
        MultiPoly::from_terms(
            self.d,
            self.terms.iter().filter_map(|(m, c)| {
                let e = m.exponents()[var];
                if e == 0 {
                    return None;
                }
                let mut exps = m.exponents().to_vec();
                exps[var] = e - 1;
                Some((Monomial::new(exps), c * BigRational::from_integer(e.into())))
            }),
        )
    }

    /// Exact evaluation.
    pub fn eval_exact(&self, p: &RationalPoint) -> BigRational {
        assert_eq!(p.dimension(), self.d, "point dimension mismatch");
        // Power tables keep repeated exponents cheap.
        let mut pows: Vec<Vec<BigRational>> = (0..self.d).map(|_| vec![BigRational::one()]) .collect();
        for (i, table) in pows.iter_mut().enumerate() {
            let need = self.degree_in(i) as usize;
            for _ in 0..need {
                let next = table.last().unwrap() * p.coord(i);
                table.push(next);
            }
        }
        let mut acc = BigRational::zero();
        for (m, c) in &self.terms {
            let mut term = c.clone();
            for (i, &e) in m.exponents().iter().enumerate() {
                if e > 0 {
                    term *= &pows[i][e as usize];
                }
            }
            acc += term;
        }
        acc
    }

    fn approx_terms(&self) -> &ApproxTerms {
        self.approx.get_or_init(|| {
            let mut finite = true;
            let mut max_degree = 0;
            let terms = self
                .terms
                .iter()
                .map(|(m, c)| {
                    let cf = rat_to_f64(c);
                    finite &= cf.is_finite();
                    max_degree = max_degree.max(m.total_degree());
                    (cf, m.exponents().to_vec())
                })
                .collect();
            ApproxTerms {
                terms,
                finite,
                max_degree,
            }
        })
    }

    /// Certified sign of `self(p)`: a float pass with a running error bound
    /// decides when it can; anything inconclusive falls back to exact
    /// rational evaluation.
    pub fn eval_sign(&self, p: &RationalPoint) -> SignValue {
        assert_eq!(p.dimension(), self.d, "point dimension mismatch");
        if let Some(s) = self.eval_sign_filtered(p) {
            return s;
        }
        SignValue::of_rational(&self.eval_exact(p))
    }

    /// Float filter; `None` when the certified bound straddles zero.
    fn eval_sign_filtered(&self, p: &RationalPoint) -> Option<SignValue> {
        let at = self.approx_terms();
        if !at.finite || p.approx().iter().any(|x| !x.is_finite()) {
            return None;
        }
        if at.terms.is_empty() {
            return Some(SignValue::Zero);
        }
        let xs = p.approx();
        let mut val = 0.0_f64;
        let mut abs_sum = 0.0_f64;
        for (c, exps) in &at.terms {
            let mut t = *c;
            for (i, &e) in exps.iter().enumerate() {
                for _ in 0..e {
                    t *= xs[i];
                }
            }
            val += t;
            abs_sum += t.abs();
        }
        if !val.is_finite() || !abs_sum.is_finite() {
            return None;
        }
        // Relative part: each coordinate approximation is within 4 ulps, each
        // product/sum rounds once; 4*deg + 2*terms + 16 epsilons dominate the
        // accumulated relative error. The absolute tail covers underflow.
        let n_ops = 4.0 * at.max_degree as f64 + 2.0 * at.terms.len() as f64 + 16.0;
        let bound = abs_sum * f64::EPSILON * n_ops
            + (at.terms.len() as f64) * (at.max_degree as f64 + 2.0) * 1e-290;
        if val > bound {
            Some(SignValue::Positive)
        } else if val < -bound {
            Some(SignValue::Negative)
        } else {
            None
        }
    }
}

/// All monomials of total degree 1..=D in d variables, in the graded order.
/// The length is C(D+d, d) - 1.
pub fn monomial_basis(d: usize, max_degree: u32) -> Vec<Monomial> {
    assert!(d >= 1 && max_degree >= 1);
    let mut out = Vec::new();
    let mut exps = vec![0u32; d];
    for deg in 1..=max_degree {
        emit_degree(deg, 0, &mut exps, &mut out);
    }
    out
}

fn emit_degree(remaining: u32, var: usize, exps: &mut Vec<u32>, out: &mut Vec<Monomial>) {
    if var == exps.len() - 1 {
        exps[var] = remaining;
        out.push(Monomial::new(exps.clone()));
        exps[var] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        exps[var] = e;
        emit_degree(remaining - e, var + 1, exps, out);
        exps[var] = 0;
    }
}

/// C(n, k) as an exact big integer.
pub fn binomial(n: u64, k: u64) -> BigUint {
    num_integer::binomial(BigUint::from(n), BigUint::from(k))
}

/// Smallest D >= 1 with C(D+d, d) - 1 >= k: the degree needed to linearize
/// k simultaneous vanishing conditions.
pub fn min_degree(k: usize, d: usize) -> u32 {
    assert!(k >= 1 && d >= 1);
    let k = BigUint::from(k);
    let mut deg = 1u32;
    loop {
        let count = binomial(deg as u64 + d as u64, d as u64) - BigUint::one();
        if count >= k {
            return deg;
        }
        deg += 1;
    }
}

/// Values of the basis monomials at `x`, computed incrementally from lower
/// degrees (one multiplication per monomial when the basis is an initial
/// segment of the graded order; arbitrary bases fall back to direct powers).
pub fn veronese(x: &RationalPoint, basis: &[Monomial]) -> Vec<BigRational> {
    let mut values: Vec<BigRational> = Vec::with_capacity(basis.len());
    let mut index: HashMap<&[u32], usize> = HashMap::with_capacity(basis.len());
    for (i, m) in basis.iter().enumerate() {
        assert_eq!(m.dimension(), x.dimension(), "basis dimension mismatch");
        let v = if m.total_degree() == 1 {
            let var = m.exponents().iter().position(|&e| e > 0).unwrap();
            x.coord(var).clone()
        } else {
            let var = m.exponents().iter().position(|&e| e > 0).unwrap();
            let mut parent = m.exponents().to_vec();
            parent[var] -= 1;
            match index.get(parent.as_slice()) {
                Some(&j) => &values[j] * x.coord(var),
                None => m
                    .exponents()
                    .iter()
                    .enumerate()
                    .fold(BigRational::one(), |acc, (i, &e)| {
                        let mut acc = acc;
                        for _ in 0..e {
                            acc *= x.coord(i);
                        }
                        acc
                    }),
            }
        };
        index.insert(m.exponents(), i);
        values.push(v);
    }
    values
}

/// Signs of `f` at every point, sharing the per-polynomial filter tables.
pub fn multi_eval_sign(f: &MultiPoly, points: &[RationalPoint]) -> Vec<SignValue> {
    points.iter().map(|p| f.eval_sign(p)).collect()
}

/// Exact product of a sequence; empty input gives the constant 1.
pub fn product(fs: &[MultiPoly]) -> MultiPoly {
    let d = fs.first().map(|f| f.dimension()).unwrap_or(1);
    let mut acc = MultiPoly::one(d);
    for f in fs {
        acc = acc.mul(f);
    }
    acc
}

#[derive(Debug, Error)]
pub enum PolyFormatError {
    #[error("term {index}: exponent length {got}, expected dimension {expected}")]
    DimensionMismatch {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("term {index}: invalid integer {value:?}")]
    BadInteger { index: usize, value: String },
    #[error("term {index}: zero denominator")]
    ZeroDenominator { index: usize },
    #[error("term {index}: zero coefficient stored")]
    ZeroCoefficient { index: usize },
    #[error("term {index}: duplicate monomial")]
    DuplicateMonomial { index: usize },
}

/// Wire format: exponents plus decimal-string numerator/denominator.
#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct TermJson {
    pub exp: Vec<u32>,
    pub num: String,
    pub den: String,
}

/// JSON form of a polynomial; terms in the canonical graded order.
#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct PolyJson {
    pub d: usize,
    pub terms: Vec<TermJson>,
}

impl MultiPoly {
    pub fn to_json(&self) -> PolyJson {
        PolyJson {
            d: self.d,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| TermJson {
                    exp: m.exponents().to_vec(),
                    num: c.numer().to_string(),
                    den: c.denom().to_string(),
                })
                .collect(),
        }
    }

    pub fn from_json(json: &PolyJson) -> Result<MultiPoly, PolyFormatError> {
        let mut terms = BTreeMap::new();
        for (index, t) in json.terms.iter().enumerate() {
            if t.exp.len() != json.d {
                return Err(PolyFormatError::DimensionMismatch {
                    index,
                    got: t.exp.len(),
                    expected: json.d,
                });
            }
            let num: num_bigint::BigInt = t.num.parse().map_err(|_| {
                PolyFormatError::BadInteger {
                    index,
                    value: t.num.clone(),
                }
            })?;
            let den: num_bigint::BigInt = t.den.parse().map_err(|_| {
                PolyFormatError::BadInteger {
                    index,
                    value: t.den.clone(),
                }
            })?;
            if den.is_zero() {
                return Err(PolyFormatError::ZeroDenominator { index });
            }
            let c = BigRational::new(num, den);
            if c.is_zero() {
                return Err(PolyFormatError::ZeroCoefficient { index });
            }
            if terms.insert(Monomial::new(t.exp.clone()), c).is_some() {
                return Err(PolyFormatError::DuplicateMonomial { index });
            }
        }
        Ok(MultiPoly {
            d: json.d,
            terms,
            approx: OnceLock::new(),
        })
    }
}

impl Serialize for MultiPoly {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for MultiPoly {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<MultiPoly, D::Error> {
        let json = PolyJson::deserialize(d)?;
        MultiPoly::from_json(&json).map_err(serde::de::Error::custom)
    }
}

/// Serde helper for rationals as "num/den" strings.
pub mod rational_string {
    use super::*;

    pub fn serialize<S: serde::Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&rational_to_string(r))
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        crate::numeric::parse_rational_str(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("invalid rational {s:?}")))
    }
}
