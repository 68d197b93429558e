//! Exact handling of points on a plane curve Z(f): univariate real-root
//! isolation, Sylvester resultants, decomposition of the curve into
//! x-monotone branches over critical-value slabs, and exact range queries
//! over the points stored on each branch.

use crate::numeric::rational_to_string;
use crate::partition::WeightedPointSet;
use crate::polycore::{Monomial, MultiPoly, SignValue};
use crate::ranges::SemialgebraicRange;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

// ---------------------------------------------------------------------------
// Univariate polynomials

/// Dense univariate polynomial over the rationals; no trailing zeros.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UniPoly {
    coeffs: Vec<BigRational>,
}

impl UniPoly {
    pub fn new(mut coeffs: Vec<BigRational>) -> UniPoly {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        UniPoly { coeffs }
    }

    pub fn zero() -> UniPoly {
        UniPoly { coeffs: vec![] }
    }

    pub fn constant(c: BigRational) -> UniPoly {
        UniPoly::new(vec![c])
    }

    pub fn one() -> UniPoly {
        UniPoly::constant(BigRational::one())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; -1 for the zero polynomial.
    pub fn degree(&self) -> i64 {
        self.coeffs.len() as i64 - 1
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn leading(&self) -> Option<&BigRational> {
        self.coeffs.last()
    }

    pub fn eval(&self, x: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn eval_sign(&self, x: &BigRational) -> SignValue {
        SignValue::of_rational(&self.eval(x))
    }

    pub fn derivative(&self) -> UniPoly {
        UniPoly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * BigRational::from_integer(i.into()))
                .collect(),
        )
    }

    pub fn add(&self, o: &UniPoly) -> UniPoly {
        let n = self.coeffs.len().max(o.coeffs.len());
        UniPoly::new(
            (0..n)
                .map(|i| {
                    let a = self.coeffs.get(i).cloned().unwrap_or_else(BigRational::zero);
                    let b = o.coeffs.get(i).cloned().unwrap_or_else(BigRational::zero);
                    a + b
                })
                .collect(),
        )
    }

    pub fn neg(&self) -> UniPoly {
        UniPoly::new(self.coeffs.iter().map(|c| -c).collect())
    }

    pub fn sub(&self, o: &UniPoly) -> UniPoly {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &UniPoly) -> UniPoly {
        if self.is_zero() || o.is_zero() {
            return UniPoly::zero();
        }
        let mut out = vec![BigRational::zero(); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        UniPoly::new(out)
    }

    pub fn scale(&self, c: &BigRational) -> UniPoly {
        UniPoly::new(self.coeffs.iter().map(|k| k * c).collect())
    }

    /// Exact division; panics if the remainder is nonzero.
    pub fn div_exact(&self, divisor: &UniPoly) -> UniPoly {
        let (q, r) = self.div_rem(divisor);
        assert!(r.is_zero(), "inexact polynomial division");
        q
    }

    pub fn div_rem(&self, divisor: &UniPoly) -> (UniPoly, UniPoly) {
        assert!(!divisor.is_zero(), "division by zero polynomial");
        let dd = divisor.degree();
        let mut rem = self.coeffs.clone();
        let mut quo = vec![BigRational::zero(); self.coeffs.len()];
        let lead = divisor.leading().unwrap();
        while rem.len() as i64 - 1 >= dd {
            let shift = rem.len() - 1 - dd as usize;
            let factor = rem.last().unwrap() / lead;
            if !factor.is_zero() {
                for (j, c) in divisor.coeffs.iter().enumerate() {
                    let idx = shift + j;
                    let sub = c * &factor;
                    rem[idx] -= sub;
                }
                quo[shift] = factor;
            }
            debug_assert!(rem.last().unwrap().is_zero());
            rem.pop();
        }
        (UniPoly::new(quo), UniPoly::new(rem))
    }

    /// Primitive integer form with positive leading coefficient.
    pub fn primitive(&self) -> UniPoly {
        if self.is_zero() {
            return UniPoly::zero();
        }
        let mut lcm = BigInt::one();
        for c in &self.coeffs {
            lcm = lcm.lcm(c.denom());
        }
        let ints: Vec<BigInt> = self
            .coeffs
            .iter()
            .map(|c| c.numer() * (&lcm / c.denom()))
            .collect();
        let mut gcd = BigInt::zero();
        for v in &ints {
            gcd = gcd.gcd(v);
        }
        let flip = ints.last().unwrap().is_negative();
        UniPoly::new(
            ints.into_iter()
                .map(|v| {
                    let q = &v / &gcd;
                    BigRational::from(if flip { -q } else { q })
                })
                .collect(),
        )
    }

    /// Primitive gcd via a pseudo-remainder sequence with content stripping.
    pub fn gcd(&self, other: &UniPoly) -> UniPoly {
        let mut a = self.primitive();
        let mut b = other.primitive();
        if a.is_zero() {
            return b;
        }
        while !b.is_zero() {
            if a.degree() < b.degree() {
                std::mem::swap(&mut a, &mut b);
                continue;
            }
            let r = a.pseudo_rem(&b).primitive();
            a = b;
            b = r;
        }
        a.primitive()
    }

    /// Remainder of lc(b)^(deg a - deg b + 1) * a modulo b.
    fn pseudo_rem(&self, b: &UniPoly) -> UniPoly {
        let delta = (self.degree() - b.degree() + 1).max(0) as u32;
        let lead = b.leading().unwrap();
        let mut scaled = self.clone();
        for _ in 0..delta {
            scaled = scaled.scale(lead);
        }
        scaled.div_rem(b).1
    }

    /// Squarefree part: same real roots, all simple.
    pub fn square_free_part(&self) -> UniPoly {
        if self.degree() <= 1 {
            return self.primitive();
        }
        let g = self.gcd(&self.derivative());
        if g.degree() <= 0 {
            return self.primitive();
        }
        self.primitive().div_exact(&g).primitive()
    }
}

// ---------------------------------------------------------------------------
// Real-root isolation (Descartes bisection)

/// Interval around exactly one real root of a target polynomial. Either an
/// exact rational root (`lo == hi`) or an open interval with a certified
/// sign change.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsolatingInterval {
    #[serde(with = "crate::polycore::rational_string")]
    pub lo: BigRational,
    #[serde(with = "crate::polycore::rational_string")]
    pub hi: BigRational,
    pub exact: bool,
}

impl IsolatingInterval {
    fn exact_at(v: BigRational) -> IsolatingInterval {
        IsolatingInterval {
            lo: v.clone(),
            hi: v,
            exact: true,
        }
    }

    pub fn contains_open(&self, x: &BigRational) -> bool {
        !self.exact && &self.lo < x && x < &self.hi
    }

    pub fn midpoint(&self) -> BigRational {
        (&self.lo + &self.hi) / BigRational::from_integer(2.into())
    }
}

/// Sign variations in a coefficient sequence.
fn variations(coeffs: &[BigRational]) -> usize {
    let mut last = 0i8;
    let mut count = 0;
    for c in coeffs {
        let s = if c.is_zero() {
            0
        } else if c.is_positive() {
            1
        } else {
            -1
        };
        if s != 0 {
            if last != 0 && s != last {
                count += 1;
            }
            last = s;
        }
    }
    count
}

/// Descartes bound on the number of roots of `p` in the open interval (a, b).
fn descartes_in_interval(p: &UniPoly, a: &BigRational, b: &BigRational) -> usize {
    // q(t) = (1+t)^n * p((a + b t)/(1 + t)) has as many sign variations as
    // the Descartes bound for (a, b).
    let n = p.degree() as usize;
    // Iteratively build (a + b t)^i and (1 + t)^(n-i).
    let lin_ab = UniPoly::new(vec![a.clone(), b.clone()]);
    let lin_1t = UniPoly::new(vec![BigRational::one(), BigRational::one()]);
    let mut pow_ab = vec![UniPoly::one()];
    for i in 1..=n {
        let next = pow_ab[i - 1].mul(&lin_ab);
        pow_ab.push(next);
    }
    let mut pow_1t = vec![UniPoly::one()];
    for i in 1..=n {
        let next = pow_1t[i - 1].mul(&lin_1t);
        pow_1t.push(next);
    }
    let mut q = UniPoly::zero();
    for (i, c) in p.coeffs().iter().enumerate() {
        if !c.is_zero() {
            q = q.add(&pow_ab[i].mul(&pow_1t[n - i]).scale(c));
        }
    }
    variations(q.coeffs())
}

/// A power-of-two bound B with every real root strictly inside (-B, B).
fn root_bound(p: &UniPoly) -> BigRational {
    let lead = p.leading().unwrap().abs();
    let mut max = BigRational::zero();
    for c in &p.coeffs[..p.coeffs.len() - 1] {
        let v = c.abs() / &lead;
        if v > max {
            max = v;
        }
    }
    let bound = max + BigRational::one();
    let mut b = BigRational::one();
    while b < bound {
        b = b * BigRational::from_integer(2.into());
    }
    b
}

/// Isolating intervals for all distinct real roots, in ascending order.
pub fn isolate_roots(p: &UniPoly) -> Vec<IsolatingInterval> {
    assert!(!p.is_zero(), "cannot isolate roots of the zero polynomial");
    let sf = p.square_free_part();
    if sf.degree() <= 0 {
        return vec![];
    }
    let bound = root_bound(&sf);
    let mut out: Vec<IsolatingInterval> = Vec::new();
    let mut stack = vec![(-&bound, bound.clone())];
    while let Some((lo, hi)) = stack.pop() {
        let v = descartes_in_interval(&sf, &lo, &hi);
        if v == 0 {
            continue;
        }
        // Only emit once both endpoints carry a nonzero sign; an endpoint
        // that is itself a root (of a neighbouring exact interval) would
        // break later sign-change refinement.
        let mid = (&lo + &hi) / BigRational::from_integer(2.into());
        if v == 1
            && sf.eval_sign(&lo) != SignValue::Zero
            && sf.eval_sign(&hi) != SignValue::Zero
        {
            if sf.eval(&mid).is_zero() {
                out.push(IsolatingInterval::exact_at(mid));
            } else {
                out.push(IsolatingInterval {
                    lo,
                    hi,
                    exact: false,
                });
            }
            continue;
        }
        if sf.eval(&mid).is_zero() {
            out.push(IsolatingInterval::exact_at(mid.clone()));
        }
        stack.push((lo, mid.clone()));
        stack.push((mid, hi));
    }
    out.sort_by(|a, b| (&a.lo + &a.hi).cmp(&(&b.lo + &b.hi)));
    debug_assert!(out
        .windows(2)
        .all(|w| w[0].hi <= w[1].lo || (w[0].exact && w[0].lo <= w[1].lo)));
    out
}

/// Halves the interval width; exact intervals are left alone.
pub fn refine(sf: &UniPoly, iv: &mut IsolatingInterval) {
    if iv.exact {
        return;
    }
    let slo = sf.eval_sign(&iv.lo);
    debug_assert!(
        slo != SignValue::Zero && sf.eval_sign(&iv.hi) != SignValue::Zero,
        "open isolating interval must have non-root endpoints"
    );
    let mid = iv.midpoint();
    let sm = sf.eval_sign(&mid);
    if sm == SignValue::Zero {
        *iv = IsolatingInterval::exact_at(mid);
        return;
    }
    if slo.product(sm) == SignValue::Negative {
        iv.hi = mid;
    } else {
        iv.lo = mid;
    }
}

/// Refines until `x` lies outside the open interval (no-op if already out).
fn refine_away_from(sf: &UniPoly, iv: &mut IsolatingInterval, x: &BigRational) {
    // Terminates because x is not the isolated root.
    while iv.contains_open(x) {
        refine(sf, iv);
    }
}

// ---------------------------------------------------------------------------
// Bivariate polynomials as polynomials in y over Q[x]

/// Coefficient view: index = power of y, entries are polynomials in x.
fn to_ypolys(f: &MultiPoly) -> Vec<UniPoly> {
    assert_eq!(f.dimension(), 2, "bivariate polynomial expected");
    let deg_y = f.degree_in(1) as usize;
    let mut rows: Vec<Vec<BigRational>> = vec![vec![]; deg_y + 1];
    for (m, c) in f.terms() {
        let ex = m.exponents()[0] as usize;
        let ey = m.exponents()[1] as usize;
        if rows[ey].len() <= ex {
            rows[ey].resize(ex + 1, BigRational::zero());
        }
        rows[ey][ex] = c.clone();
    }
    let mut out: Vec<UniPoly> = rows.into_iter().map(UniPoly::new).collect();
    while out.last().is_some_and(|p| p.is_zero()) {
        out.pop();
    }
    out
}

fn ypolys_to_multipoly(yp: &[UniPoly]) -> MultiPoly {
    let mut terms = Vec::new();
    for (ey, p) in yp.iter().enumerate() {
        for (ex, c) in p.coeffs().iter().enumerate() {
            if !c.is_zero() {
                terms.push((Monomial::new(vec![ex as u32, ey as u32]), c.clone()));
            }
        }
    }
    MultiPoly::from_terms(2, terms)
}

fn ypoly_is_zero(yp: &[UniPoly]) -> bool {
    yp.is_empty()
}

fn ypoly_deg(yp: &[UniPoly]) -> i64 {
    yp.len() as i64 - 1
}

/// Partial derivative in y.
fn ypoly_derivative(yp: &[UniPoly]) -> Vec<UniPoly> {
    let mut out: Vec<UniPoly> = yp
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, p)| p.scale(&BigRational::from_integer(i.into())))
        .collect();
    while out.last().is_some_and(|p| p.is_zero()) {
        out.pop();
    }
    out
}

/// Specializes x, producing a univariate polynomial in y.
fn ypoly_eval_x(yp: &[UniPoly], x: &BigRational) -> UniPoly {
    UniPoly::new(yp.iter().map(|p| p.eval(x)).collect())
}

/// Content: gcd over Q[x] of the y-coefficients.
fn ypoly_content(yp: &[UniPoly]) -> UniPoly {
    let mut acc = UniPoly::zero();
    for p in yp {
        acc = acc.gcd(p);
        if acc.degree() == 0 {
            break;
        }
    }
    acc
}

fn ypoly_divide_content(yp: &[UniPoly], content: &UniPoly) -> Vec<UniPoly> {
    if content.degree() <= 0 {
        return yp.to_vec();
    }
    yp.iter().map(|p| p.div_exact(content)).collect()
}

/// Exact division in Q[x][y]; panics on inexact division.
fn ypoly_div_exact(num: &[UniPoly], den: &[UniPoly]) -> Vec<UniPoly> {
    assert!(!ypoly_is_zero(den));
    let dd = ypoly_deg(den);
    let mut rem: Vec<UniPoly> = num.to_vec();
    let mut quo: Vec<UniPoly> = vec![UniPoly::zero(); num.len()];
    let lead = den.last().unwrap();
    while !rem.is_empty() && rem.len() as i64 - 1 >= dd {
        let shift = rem.len() - 1 - dd as usize;
        let factor = rem.last().unwrap().div_exact(lead);
        for (j, c) in den.iter().enumerate() {
            let sub = c.mul(&factor);
            rem[shift + j] = rem[shift + j].sub(&sub);
        }
        quo[shift] = factor;
        assert!(rem.last().unwrap().is_zero(), "inexact y-division");
        rem.pop();
        while rem.last().is_some_and(|p| p.is_zero()) {
            rem.pop();
        }
        if rem.len() as i64 - 1 < dd {
            break;
        }
    }
    assert!(rem.is_empty(), "inexact y-division (nonzero remainder)");
    let mut quo = quo;
    while quo.last().is_some_and(|p| p.is_zero()) {
        quo.pop();
    }
    quo
}

/// Primitive gcd in y over Q[x], by a primitive pseudo-remainder sequence.
fn ypoly_gcd(a: &[UniPoly], b: &[UniPoly]) -> Vec<UniPoly> {
    fn primitive_part(yp: &[UniPoly]) -> Vec<UniPoly> {
        if ypoly_is_zero(yp) {
            return vec![];
        }
        let c = ypoly_content(yp);
        ypoly_divide_content(yp, &c)
            .into_iter()
            .map(|p| p)
            .collect()
    }
    fn pseudo_rem(a: &[UniPoly], b: &[UniPoly]) -> Vec<UniPoly> {
        let delta = (ypoly_deg(a) - ypoly_deg(b) + 1).max(0);
        let lead = b.last().unwrap().clone();
        let mut rem: Vec<UniPoly> = a.to_vec();
        for _ in 0..delta {
            if rem.len() as i64 - 1 < ypoly_deg(b) {
                break;
            }
            let shift = rem.len() - 1 - ypoly_deg(b) as usize;
            let top = rem.last().unwrap().clone();
            // rem = lead * rem - top * y^shift * b
            rem = rem.iter().map(|p| p.mul(&lead)).collect();
            for (j, c) in b.iter().enumerate() {
                let sub = c.mul(&top);
                rem[shift + j] = rem[shift + j].sub(&sub);
            }
            while rem.last().is_some_and(|p| p.is_zero()) {
                rem.pop();
            }
            if rem.is_empty() {
                break;
            }
        }
        rem
    }
    let mut a = primitive_part(a);
    let mut b = primitive_part(b);
    if ypoly_is_zero(&a) {
        return b;
    }
    while !ypoly_is_zero(&b) {
        if ypoly_deg(a.as_slice()) < ypoly_deg(b.as_slice()) {
            std::mem::swap(&mut a, &mut b);
            continue;
        }
        let r = primitive_part(&pseudo_rem(&a, &b));
        a = b;
        b = r;
    }
    primitive_part(&a)
}

/// Determinant of a square matrix of polynomials by fraction-free
/// elimination; exact, with swap signs tracked.
fn poly_matrix_det(mut m: Vec<Vec<UniPoly>>) -> UniPoly {
    let n = m.len();
    if n == 0 {
        return UniPoly::one();
    }
    let mut prev = UniPoly::one();
    let mut sign = false;
    for t in 0..n - 1 {
        // Pivot: nonzero entry of minimal degree in the remaining block.
        let mut best: Option<(usize, usize, i64)> = None;
        for i in t..n {
            for j in t..n {
                if m[i][j].is_zero() {
                    continue;
                }
                let d = m[i][j].degree();
                if best.is_none_or(|(_, _, bd)| d < bd) {
                    best = Some((i, j, d));
                }
            }
        }
        let Some((pi, pj, _)) = best else {
            return UniPoly::zero();
        };
        if pi != t {
            m.swap(t, pi);
            sign = !sign;
        }
        if pj != t {
            for row in m.iter_mut() {
                row.swap(t, pj);
            }
            sign = !sign;
        }
        for i in t + 1..n {
            for j in t + 1..n {
                let num = m[t][t].mul(&m[i][j]).sub(&m[i][t].mul(&m[t][j]));
                m[i][j] = num.div_exact(&prev);
            }
            m[i][t] = UniPoly::zero();
        }
        prev = m[t][t].clone();
    }
    let det = m[n - 1][n - 1].clone();
    if sign {
        det.neg()
    } else {
        det
    }
}

/// Resultant of f and g as polynomials in y: the determinant of their
/// Sylvester matrix, a polynomial in x. Convention: the first deg_y(g) rows
/// hold the coefficients of f (descending powers of y), the remaining
/// deg_y(f) rows hold those of g.
pub fn sylvester_resultant(f: &MultiPoly, g: &MultiPoly) -> UniPoly {
    let fy = to_ypolys(f);
    let gy = to_ypolys(g);
    assert!(!f.is_zero() && !g.is_zero(), "resultant of zero polynomial");
    assert!(ypoly_deg(&fy) >= 1, "deg_y f must be at least 1");
    resultant_y(&fy, &gy)
}

fn resultant_y(fy: &[UniPoly], gy: &[UniPoly]) -> UniPoly {
    let m = ypoly_deg(fy);
    let n = ypoly_deg(gy);
    debug_assert!(m >= 1 && n >= 0);
    if n == 0 {
        // Res(f, c(x)) = c(x)^deg_y(f).
        let mut acc = UniPoly::one();
        for _ in 0..m {
            acc = acc.mul(&gy[0]);
        }
        return acc;
    }
    let size = (m + n) as usize;
    let mut mat = vec![vec![UniPoly::zero(); size]; size];
    // Descending y-coefficients.
    let fd: Vec<UniPoly> = fy.iter().rev().cloned().collect();
    let gd: Vec<UniPoly> = gy.iter().rev().cloned().collect();
    for i in 0..n as usize {
        for (j, c) in fd.iter().enumerate() {
            mat[i][i + j] = c.clone();
        }
    }
    for i in 0..m as usize {
        for (j, c) in gd.iter().enumerate() {
            mat[n as usize + i][i + j] = c.clone();
        }
    }
    poly_matrix_det(mat)
}

// ---------------------------------------------------------------------------
// Arc decomposition

#[derive(Debug, Error)]
pub enum PatchError {
    #[error("no usable shear found in {attempts} attempts")]
    ShearBudgetExceeded { attempts: usize },
    #[error("point {index} does not lie on the curve")]
    PointOffCurve { index: usize },
    #[error("curve polynomial is zero or constant")]
    DegenerateCurve,
}

/// Branch counts and a certified interior sample for one open slab between
/// consecutive critical x-values.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SlabInfo {
    pub branches: usize,
    #[serde(with = "crate::polycore::rational_string")]
    pub sample: BigRational,
}

/// Decomposition of a plane curve into x-monotone branches over the slabs
/// between critical x-values, in sheared coordinates X = x + shear * y.
#[derive(Clone, Debug)]
pub struct ArcDecomposition {
    pub f: MultiPoly,
    pub shear: BigRational,
    /// Squarefree, content-free working curve, as y-polynomials in X.
    reduced: Vec<UniPoly>,
    /// Pure-x content of the (sheared) curve: vertical line components.
    content: UniPoly,
    /// Squarefree polynomial whose roots are the critical X values.
    critical_poly: UniPoly,
    pub critical_xs: Vec<IsolatingInterval>,
    pub slabs: Vec<SlabInfo>,
    pub critical_points: Vec<usize>,
}

/// Per-branch point storage with prefix weights, ready for interval sums.
#[derive(Clone, Debug)]
pub struct ArcStore {
    pub arcs: Vec<ArcBucket>,
    pub critical_points: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct ArcBucket {
    pub slab: usize,
    pub branch: usize,
    /// Sheared x-coordinates, ascending (ties broken by point id).
    pub xs: Vec<BigRational>,
    pub points: Vec<usize>,
    /// prefix_weights[i] = sum of the first i point weights.
    pub prefix_weights: Vec<BigRational>,
}

const SHEAR_ATTEMPTS: usize = 16;

/// Substitutes x -> x - lambda*y, so that the result at (x + lambda*y, y)
/// equals f at (x, y).
pub fn shear_poly(f: &MultiPoly, lambda: &BigRational) -> MultiPoly {
    if lambda.is_zero() {
        return f.clone();
    }
    // (X - lambda Y)^a computed iteratively.
    let x = MultiPoly::variable(2, 0);
    let y = MultiPoly::variable(2, 1);
    let lin = x.sub(&y.scale(lambda));
    let max_a = f.degree_in(0);
    let mut pows = vec![MultiPoly::one(2)];
    for i in 1..=max_a as usize {
        let next = pows[i - 1].mul(&lin);
        pows.push(next);
    }
    let mut acc = MultiPoly::zero(2);
    for (m, c) in f.terms() {
        let a = m.exponents()[0] as usize;
        let b = m.exponents()[1];
        let mut term = pows[a].scale(c);
        if b > 0 {
            term = term.mul(&y.pow(b));
        }
        acc = acc.add(&term);
    }
    acc
}

/// Sheared coordinate of a stored point.
fn shear_x(pts: &WeightedPointSet, i: usize, lambda: &BigRational) -> BigRational {
    let p = pts.point(i);
    p.coord(0) + lambda * p.coord(1)
}

/// Decomposes Z(f) into x-monotone branches and assigns each given point to
/// a branch or to the critical set. All points must satisfy f = 0 exactly.
pub fn decompose_arcs(
    f: &MultiPoly,
    pts: &WeightedPointSet,
    members: &[usize],
    rng: &mut ChaCha8Rng,
) -> Result<(ArcDecomposition, ArcStore), PatchError> {
    assert_eq!(f.dimension(), 2);
    if f.degree() <= 0 {
        return Err(PatchError::DegenerateCurve);
    }
    for &i in members {
        if f.eval_sign(pts.point(i)) != SignValue::Zero {
            return Err(PatchError::PointOffCurve { index: i });
        }
    }

    // Shear only when the curve has no y-dependence at all; branch counting
    // handles leading-coefficient drops through the critical values.
    let mut shear = BigRational::zero();
    let mut working = f.clone();
    if f.degree_in(1) == 0 {
        let mut found = false;
        for _ in 0..SHEAR_ATTEMPTS {
            let num = rng.random_range(1i64..=64);
            let den = rng.random_range(1i64..=16);
            let lambda = BigRational::new(BigInt::from(num), BigInt::from(den));
            let sheared = shear_poly(f, &lambda);
            if sheared.degree_in(1) >= 1 {
                shear = lambda;
                working = sheared;
                found = true;
                break;
            }
        }
        if !found {
            return Err(PatchError::ShearBudgetExceeded {
                attempts: SHEAR_ATTEMPTS,
            });
        }
    }

    let fy = to_ypolys(&working);
    let content = ypoly_content(&fy);
    let f1 = ypoly_divide_content(&fy, &content);
    // Squarefree part in y: divide by gcd(f1, d f1 / dy). Zero set unchanged.
    let reduced = if ypoly_deg(&f1) >= 1 {
        let g = ypoly_gcd(&f1, &ypoly_derivative(&f1));
        if ypoly_deg(&g) >= 1 {
            ypoly_div_exact(&f1, &g)
        } else {
            f1
        }
    } else {
        f1
    };

    // Critical X values: discriminant-type roots, leading-coefficient roots
    // and vertical-line components, folded into one squarefree polynomial.
    let mut crit = content.clone();
    if crit.is_zero() || crit.degree() < 0 {
        crit = UniPoly::one();
    }
    if crit.degree() <= 0 {
        crit = UniPoly::one();
    }
    if ypoly_deg(&reduced) >= 1 {
        let res = resultant_y(&reduced, &ypoly_derivative(&reduced));
        let res = if ypoly_deg(&reduced) == 1 {
            // Linear in y: no discriminant; only the leading coefficient.
            UniPoly::one()
        } else {
            res
        };
        assert!(
            !res.is_zero(),
            "squarefree curve must have a nonzero discriminant"
        );
        crit = crit.mul(&res);
        crit = crit.mul(reduced.last().unwrap());
    }
    let critical_poly = if crit.degree() >= 1 {
        crit.square_free_part()
    } else {
        UniPoly::one()
    };
    let mut critical_xs = if critical_poly.degree() >= 1 {
        isolate_roots(&critical_poly)
    } else {
        vec![]
    };
    separate_intervals(&critical_poly, &mut critical_xs);

    // Route the points.
    let mut critical_points: Vec<usize> = Vec::new();
    let mut routed: Vec<(usize, usize, usize, BigRational)> = Vec::new(); // (slab, branch, id, X)
    for &i in members {
        let x = shear_x(pts, i, &shear);
        let on_content = !content.is_zero() && content.degree() >= 1 && content.eval(&x).is_zero();
        if on_content || (critical_poly.degree() >= 1 && critical_poly.eval(&x).is_zero()) {
            critical_points.push(i);
            continue;
        }
        for iv in critical_xs.iter_mut() {
            refine_away_from(&critical_poly, iv, &x);
        }
        let slab = critical_xs
            .iter()
            .take_while(|iv| iv.hi <= x || (iv.exact && iv.lo < x))
            .count();
        let y = pts.point(i).coord(1).clone();
        let u = ypoly_eval_x(&reduced, &x);
        assert!(
            u.degree() == ypoly_deg(&reduced),
            "leading coefficient vanished off the critical set"
        );
        debug_assert!(u.eval(&y).is_zero());
        let roots = isolate_roots(&u);
        let branch = roots
            .iter()
            .position(|iv| {
                (iv.exact && iv.lo == y) || (!iv.exact && iv.lo < y && y < iv.hi)
            })
            .expect("point must sit on some branch");
        routed.push((slab, branch, i, x));
    }

    // Slab samples and branch counts, from the separated critical intervals.
    let slab_count = critical_xs.len() + 1;
    let mut slabs: Vec<SlabInfo> = Vec::with_capacity(slab_count);
    for s in 0..slab_count {
        let sample = slab_sample(&critical_xs, s);
        let branches = if ypoly_deg(&reduced) >= 1 {
            let u = ypoly_eval_x(&reduced, &sample);
            assert_eq!(u.degree(), ypoly_deg(&reduced));
            isolate_roots(&u).len()
        } else {
            0
        };
        slabs.push(SlabInfo { branches, sample });
    }
    for &(slab, branch, _, _) in &routed {
        assert!(
            branch < slabs[slab].branches,
            "branch index exceeds the slab's branch count"
        );
    }

    // Buckets sorted by sheared x.
    let mut buckets: std::collections::BTreeMap<(usize, usize), Vec<(BigRational, usize)>> =
        std::collections::BTreeMap::new();
    for (slab, branch, id, x) in routed {
        buckets.entry((slab, branch)).or_default().push((x, id));
    }
    let arcs: Vec<ArcBucket> = buckets
        .into_iter()
        .map(|((slab, branch), mut entries)| {
            entries.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
            let xs: Vec<BigRational> = entries.iter().map(|(x, _)| x.clone()).collect();
            let points: Vec<usize> = entries.iter().map(|(_, id)| *id).collect();
            let mut prefix = Vec::with_capacity(points.len() + 1);
            prefix.push(BigRational::zero());
            for &id in &points {
                let next = prefix.last().unwrap() + pts.weight(id);
                prefix.push(next);
            }
            ArcBucket {
                slab,
                branch,
                xs,
                points,
                prefix_weights: prefix,
            }
        })
        .collect();

    let decomp = ArcDecomposition {
        f: f.clone(),
        shear,
        reduced,
        content,
        critical_poly,
        critical_xs,
        slabs,
        critical_points: critical_points.clone(),
    };
    let store = ArcStore {
        arcs,
        critical_points,
    };
    Ok((decomp, store))
}

/// Refines until interval hulls are strictly separated, so that midpoints of
/// the gaps are certified interior slab samples.
fn separate_intervals(poly: &UniPoly, ivs: &mut [IsolatingInterval]) {
    for i in 1..ivs.len() {
        loop {
            if ivs[i - 1].hi < ivs[i].lo {
                break;
            }
            // Refine the wider of the two.
            let w0 = &ivs[i - 1].hi - &ivs[i - 1].lo;
            let w1 = &ivs[i].hi - &ivs[i].lo;
            if w0 >= w1 && !ivs[i - 1].exact {
                refine(poly, &mut ivs[i - 1]);
            } else if !ivs[i].exact {
                refine(poly, &mut ivs[i]);
            } else {
                refine(poly, &mut ivs[i - 1]);
            }
        }
    }
}

fn slab_sample(critical_xs: &[IsolatingInterval], slab: usize) -> BigRational {
    let one = BigRational::one();
    if critical_xs.is_empty() {
        return BigRational::zero();
    }
    if slab == 0 {
        return &critical_xs[0].lo - one;
    }
    if slab == critical_xs.len() {
        return &critical_xs[slab - 1].hi + one;
    }
    (&critical_xs[slab - 1].hi + &critical_xs[slab].lo) / BigRational::from_integer(2.into())
}

impl ArcDecomposition {
    /// Re-verifies every stored assignment: points satisfy the curve
    /// equation, branch indices recount identically, and branch counts are
    /// stable across multiple samples per slab.
    pub fn audit(&self, store: &ArcStore, pts: &WeightedPointSet) -> Result<(), String> {
        for bucket in &store.arcs {
            for (pos, &i) in bucket.points.iter().enumerate() {
                let x = shear_x(pts, i, &self.shear);
                if x != bucket.xs[pos] {
                    return Err(format!("point {i}: stored x mismatch"));
                }
                let u = ypoly_eval_x(&self.reduced, &x);
                let y = pts.point(i).coord(1);
                if !u.eval(y).is_zero() {
                    return Err(format!("point {i}: not on reduced curve"));
                }
                let roots = isolate_roots(&u);
                let branch = roots
                    .iter()
                    .position(|iv| (iv.exact && &iv.lo == y) || (!iv.exact && &iv.lo < y && y < &iv.hi))
                    .ok_or_else(|| format!("point {i}: no branch found"))?;
                if branch != bucket.branch {
                    return Err(format!(
                        "point {i}: branch recount {branch} != stored {}",
                        bucket.branch
                    ));
                }
            }
        }
        // Branch count invariant under sample choice: three samples per slab.
        for (s, info) in self.slabs.iter().enumerate() {
            if ypoly_deg(&self.reduced) < 1 {
                continue;
            }
            for offset in [0i64, 1, -1] {
                let jitter = jitter_sample(&self.critical_xs, s, offset);
                let u = ypoly_eval_x(&self.reduced, &jitter);
                if u.degree() != ypoly_deg(&self.reduced) {
                    return Err(format!("slab {s}: degree drop at sample"));
                }
                if isolate_roots(&u).len() != info.branches {
                    return Err(format!("slab {s}: branch count varies with sample"));
                }
            }
        }
        for &i in &store.critical_points {
            let x = shear_x(pts, i, &self.shear);
            let on_content =
                self.content.degree() >= 1 && self.content.eval(&x).is_zero();
            let on_crit = self.critical_poly.degree() >= 1
                && self.critical_poly.eval(&x).is_zero();
            if !(on_content || on_crit) {
                return Err(format!("critical point {i} is not over a critical x"));
            }
        }
        Ok(())
    }
}

fn jitter_sample(critical_xs: &[IsolatingInterval], slab: usize, offset: i64) -> BigRational {
    let base = slab_sample(critical_xs, slab);
    if offset == 0 || critical_xs.is_empty() {
        return base;
    }
    // Move a quarter of the gap toward a side, staying inside the open slab.
    let delta = if slab == 0 || slab == critical_xs.len() {
        BigRational::new(BigInt::from(offset), BigInt::from(4))
    } else {
        let lo = &critical_xs[slab - 1].hi;
        let hi = &critical_xs[slab].lo;
        (hi - lo) * BigRational::new(BigInt::from(offset), BigInt::from(4))
    };
    base + delta
}

// ---------------------------------------------------------------------------
// Queries

/// Rational interval for certified sign evaluation of univariate polynomials
/// over root enclosures. Exact endpoints, no rounding.
#[derive(Clone, Debug)]
struct RatInterval {
    lo: BigRational,
    hi: BigRational,
}

impl RatInterval {
    fn point(v: &BigRational) -> RatInterval {
        RatInterval {
            lo: v.clone(),
            hi: v.clone(),
        }
    }

    fn add(&self, o: &RatInterval) -> RatInterval {
        RatInterval {
            lo: &self.lo + &o.lo,
            hi: &self.hi + &o.hi,
        }
    }

    fn mul(&self, o: &RatInterval) -> RatInterval {
        let c = [
            &self.lo * &o.lo,
            &self.lo * &o.hi,
            &self.hi * &o.lo,
            &self.hi * &o.hi,
        ];
        let mut lo = c[0].clone();
        let mut hi = c[0].clone();
        for v in &c[1..] {
            if v < &lo {
                lo = v.clone();
            }
            if v > &hi {
                hi = v.clone();
            }
        }
        RatInterval { lo, hi }
    }
}

/// Interval Horner evaluation of `p` over `[iv.lo, iv.hi]`.
fn interval_eval_unipoly(p: &UniPoly, iv: &RatInterval) -> RatInterval {
    let mut acc = RatInterval::point(&BigRational::zero());
    for c in p.coeffs().iter().rev() {
        acc = acc.mul(iv).add(&RatInterval::point(c));
    }
    acc
}

/// Certified sign of `g` at the root of `u` isolated by `yiv`.
/// Requires g(root) != 0; refines the enclosure until the sign is decided.
fn certified_sign_at_root(g: &UniPoly, u: &UniPoly, yiv: &IsolatingInterval) -> SignValue {
    if yiv.exact {
        return g.eval_sign(&yiv.lo);
    }
    let mut iv = yiv.clone();
    for _ in 0..4096 {
        let enc = interval_eval_unipoly(
            g,
            &RatInterval {
                lo: iv.lo.clone(),
                hi: iv.hi.clone(),
            },
        );
        if enc.lo.is_positive() {
            return SignValue::Positive;
        }
        if enc.hi.is_negative() {
            return SignValue::Negative;
        }
        refine(u, &mut iv);
        if iv.exact {
            return g.eval_sign(&iv.lo);
        }
    }
    unreachable!("sign certification failed to converge; g vanishes at the root?");
}

/// Exact weight of the stored points inside the range: branch-wise constant
/// sign words between resultant roots, prefix-weight sums per true interval,
/// and individual exact tests for critical and resultant-root points.
pub fn arc_query(
    store: &ArcStore,
    decomp: &ArcDecomposition,
    range: &SemialgebraicRange,
    pts: &WeightedPointSet,
) -> BigRational {
    assert_eq!(range.dimension(), 2, "range dimension mismatch");
    let mut total = crate::partition::Weight::zero();
    for &i in &store.critical_points {
        if range.contains(pts.point(i)) {
            total += pts.weight(i);
        }
    }
    if store.arcs.is_empty() {
        return total.into_rational();
    }

    // Atoms in sheared coordinates, as y-polynomials in X.
    let sheared_atoms: Vec<Vec<UniPoly>> = range
        .atoms()
        .iter()
        .map(|a| {
            let sheared = if decomp.shear.is_zero() {
                a.g.clone()
            } else {
                shear_poly(&a.g, &decomp.shear)
            };
            to_ypolys(&sheared)
        })
        .collect();

    for bucket in &store.arcs {
        if bucket.points.is_empty() {
            continue;
        }
        total += bucket_weight(bucket, decomp, range, &sheared_atoms, pts);
    }
    total.into_rational()
}

fn bucket_weight(
    bucket: &ArcBucket,
    decomp: &ArcDecomposition,
    range: &SemialgebraicRange,
    sheared_atoms: &[Vec<UniPoly>],
    pts: &WeightedPointSet,
) -> crate::partition::Weight {
    let n_entries = bucket.points.len();
    let scan_all = |_: ()| {
        let mut w = crate::partition::Weight::zero();
        for &i in &bucket.points {
            if range.contains(pts.point(i)) {
                w += pts.weight(i);
            }
        }
        w
    };

    // Rational window containing all of the bucket's x-keys, strictly inside
    // the true slab (bucket points were refined out of the critical
    // intervals during construction).
    let wlo = if bucket.slab == 0 {
        &bucket.xs[0] - BigRational::one()
    } else {
        decomp.critical_xs[bucket.slab - 1].hi.clone()
    };
    let whi = if bucket.slab == decomp.critical_xs.len() {
        bucket.xs.last().unwrap() + BigRational::one()
    } else {
        decomp.critical_xs[bucket.slab].lo.clone()
    };

    // Per atom: run boundaries (entry indices) and per-run truth; entries at
    // resultant roots are tested individually.
    let mut individual = vec![false; n_entries];
    let mut boundaries: Vec<usize> = Vec::new();
    let mut atom_runs: Vec<AtomRuns> = Vec::with_capacity(sheared_atoms.len());

    for atom_y in sheared_atoms {
        let res = resultant_y(&decomp.reduced, atom_y);
        if res.is_zero() {
            // The atom shares a component with the curve; fall back to an
            // exact scan of the whole bucket.
            return scan_all(());
        }
        let res_sf = res.square_free_part();
        if res_sf.degree() < 1 {
            // No real candidates: one run over the whole bucket.
            atom_runs.push(AtomRuns {
                bounds: vec![],
                truths: vec![None],
            });
            continue;
        }
        // Entries sitting exactly on a resultant root are handled one by one.
        for (pos, x) in bucket.xs.iter().enumerate() {
            if res_sf.eval(x).is_zero() {
                individual[pos] = true;
            }
        }
        // Candidate roots strictly inside the window, refined until they
        // separate cleanly from window edges and non-root entries.
        let mut cands: Vec<IsolatingInterval> = Vec::new();
        for iv in isolate_roots(&res_sf) {
            let mut iv = iv;
            if iv.exact {
                if iv.lo > wlo && iv.lo < whi {
                    cands.push(iv);
                }
                continue;
            }
            // Roots exactly at a window edge are outside the open window.
            if res_sf.eval(&wlo).is_zero() && iv.contains_open(&wlo) {
                continue;
            }
            if res_sf.eval(&whi).is_zero() && iv.contains_open(&whi) {
                continue;
            }
            refine_away_from(&res_sf, &mut iv, &wlo);
            refine_away_from(&res_sf, &mut iv, &whi);
            if iv.exact {
                if iv.lo > wlo && iv.lo < whi {
                    cands.push(iv);
                }
                continue;
            }
            if iv.hi <= wlo || iv.lo >= whi {
                continue;
            }
            // Now (lo, hi) is inside the window; push non-root entries out.
            for x in &bucket.xs {
                if !res_sf.eval(x).is_zero() {
                    refine_away_from(&res_sf, &mut iv, x);
                }
            }
            cands.push(iv);
        }
        cands.sort_by(|a, b| (&a.lo + &a.hi).cmp(&(&b.lo + &b.hi)));

        // Entry-index boundaries: number of entries strictly before the root.
        let mut bounds: Vec<usize> = Vec::new();
        for iv in &cands {
            let key = if iv.exact { &iv.lo } else { &iv.lo };
            let b = bucket.xs.partition_point(|x| x <= key);
            bounds.push(b);
        }
        bounds.dedup();
        for &b in &bounds {
            boundaries.push(b);
        }
        atom_runs.push(AtomRuns {
            truths: vec![None; bounds.len() + 1],
            bounds,
        });
    }

    for (pos, flag) in individual.iter().enumerate().take(n_entries) {
        if *flag {
            boundaries.push(pos);
            boundaries.push(pos + 1);
        }
    }
    boundaries.push(0);
    boundaries.push(n_entries);
    boundaries.sort_unstable();
    boundaries.dedup();

    let mut weight = crate::partition::Weight::zero();
    for seg in boundaries.windows(2) {
        let (s, e) = (seg[0], seg[1]);
        if s >= e {
            continue;
        }
        if individual[s] {
            // Singleton segment: the curve point is the data point itself.
            debug_assert_eq!(e, s + 1);
            let id = bucket.points[s];
            if range.contains(pts.point(id)) {
                weight += pts.weight(id);
            }
            continue;
        }
        // Sample entry for the segment: any non-individual entry works.
        let sample_x = &bucket.xs[s];
        let truth = segment_truth(
            range,
            sheared_atoms,
            &mut atom_runs,
            decomp,
            bucket,
            s,
            sample_x,
        );
        if truth {
            let delta = &bucket.prefix_weights[e] - &bucket.prefix_weights[s];
            weight += &delta;
        }
    }
    weight
}

struct AtomRuns {
    bounds: Vec<usize>,
    truths: Vec<Option<bool>>,
}

/// Truth of the formula on a segment, evaluating (and caching) each atom's
/// sign on the branch over an in-segment sample.
fn segment_truth(
    range: &SemialgebraicRange,
    sheared_atoms: &[Vec<UniPoly>],
    atom_runs: &mut [AtomRuns],
    decomp: &ArcDecomposition,
    bucket: &ArcBucket,
    entry_pos: usize,
    sample_x: &BigRational,
) -> bool {
    let mut u_cache: Option<(UniPoly, Vec<IsolatingInterval>)> = None;
    // Formula trees are tiny; resolve atoms recursively without laziness
    // tricks, caching per-run truths across segments.
    fn resolve(
        f: &crate::ranges::Formula,
        sheared_atoms: &[Vec<UniPoly>],
        atom_runs: &mut [AtomRuns],
        decomp: &ArcDecomposition,
        bucket: &ArcBucket,
        entry_pos: usize,
        sample_x: &BigRational,
        u_cache: &mut Option<(UniPoly, Vec<IsolatingInterval>)>,
    ) -> bool {
        use crate::ranges::Formula;
        match f {
            Formula::Atom(ai) => {
                let run = atom_runs[*ai].bounds.partition_point(|&b| b <= entry_pos);
                if let Some(t) = atom_runs[*ai].truths[run] {
                    return t;
                }
                let (u, roots) = u_cache.get_or_insert_with(|| {
                    let u = ypoly_eval_x(&decomp.reduced, sample_x);
                    let roots = isolate_roots(&u);
                    (u, roots)
                });
                let g_at_x = ypoly_eval_x(&sheared_atoms[*ai], sample_x);
                let yiv = &roots[bucket.branch];
                let sign = if g_at_x.is_zero() {
                    SignValue::Zero
                } else {
                    certified_sign_at_root(&g_at_x, u, yiv)
                };
                let t = sign != SignValue::Negative;
                atom_runs[*ai].truths[run] = Some(t);
                t
            }
            Formula::And(fs) => fs.iter().all(|f| {
                resolve(
                    f,
                    sheared_atoms,
                    atom_runs,
                    decomp,
                    bucket,
                    entry_pos,
                    sample_x,
                    u_cache,
                )
            }),
            Formula::Or(fs) => fs.iter().any(|f| {
                resolve(
                    f,
                    sheared_atoms,
                    atom_runs,
                    decomp,
                    bucket,
                    entry_pos,
                    sample_x,
                    u_cache,
                )
            }),
            Formula::Not(f) => !resolve(
                f,
                sheared_atoms,
                atom_runs,
                decomp,
                bucket,
                entry_pos,
                sample_x,
                u_cache,
            ),
        }
    }
    resolve(
        range.formula(),
        sheared_atoms,
        atom_runs,
        decomp,
        bucket,
        entry_pos,
        sample_x,
        &mut u_cache,
    )
}


// ---------------------------------------------------------------------------
// Serialization (embedded in tree files)

#[derive(Serialize, Deserialize)]
pub struct ArcBucketJson {
    pub slab: usize,
    pub branch: usize,
    pub xs: Vec<String>,
    pub points: Vec<usize>,
    pub prefix_weights: Vec<String>,
}

#[derive(Serialize, Deserialize)]
pub struct ArcsJson {
    pub f: crate::polycore::PolyJson,
    pub shear: String,
    pub reduced: crate::polycore::PolyJson,
    pub content: crate::polycore::PolyJson,
    pub critical_poly: crate::polycore::PolyJson,
    pub critical_xs: Vec<IsolatingInterval>,
    pub slabs: Vec<SlabInfo>,
    pub critical_points: Vec<usize>,
    pub arcs: Vec<ArcBucketJson>,
}

fn unipoly_to_multipoly(p: &UniPoly) -> MultiPoly {
    MultiPoly::from_terms(
        2,
        p.coeffs()
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| (Monomial::new(vec![i as u32, 0]), c.clone())),
    )
}

fn multipoly_to_unipoly(f: &MultiPoly) -> UniPoly {
    let mut coeffs = vec![BigRational::zero(); (f.degree().max(0) as usize) + 1];
    for (m, c) in f.terms() {
        assert_eq!(m.exponents()[1], 0);
        coeffs[m.exponents()[0] as usize] = c.clone();
    }
    UniPoly::new(coeffs)
}

pub fn arcs_to_json(decomp: &ArcDecomposition, store: &ArcStore) -> ArcsJson {
    ArcsJson {
        f: decomp.f.to_json(),
        shear: rational_to_string(&decomp.shear),
        reduced: ypolys_to_multipoly(&decomp.reduced).to_json(),
        content: unipoly_to_multipoly(&decomp.content).to_json(),
        critical_poly: unipoly_to_multipoly(&decomp.critical_poly).to_json(),
        critical_xs: decomp.critical_xs.clone(),
        slabs: decomp.slabs.clone(),
        critical_points: decomp.critical_points.clone(),
        arcs: store
            .arcs
            .iter()
            .map(|b| ArcBucketJson {
                slab: b.slab,
                branch: b.branch,
                xs: b.xs.iter().map(rational_to_string).collect(),
                points: b.points.clone(),
                prefix_weights: b.prefix_weights.iter().map(rational_to_string).collect(),
            })
            .collect(),
    }
}

pub fn arcs_from_json(json: &ArcsJson) -> Result<(ArcDecomposition, ArcStore), String> {
    let parse_rat = |s: &str| {
        crate::numeric::parse_rational_str(s).ok_or_else(|| format!("invalid rational {s:?}"))
    };
    let f = MultiPoly::from_json(&json.f).map_err(|e| e.to_string())?;
    let reduced_mp = MultiPoly::from_json(&json.reduced).map_err(|e| e.to_string())?;
    let decomp = ArcDecomposition {
        f,
        shear: parse_rat(&json.shear)?,
        reduced: to_ypolys(&reduced_mp),
        content: multipoly_to_unipoly(
            &MultiPoly::from_json(&json.content).map_err(|e| e.to_string())?,
        ),
        critical_poly: multipoly_to_unipoly(
            &MultiPoly::from_json(&json.critical_poly).map_err(|e| e.to_string())?,
        ),
        critical_xs: json.critical_xs.clone(),
        slabs: json.slabs.clone(),
        critical_points: json.critical_points.clone(),
    };
    let arcs = json
        .arcs
        .iter()
        .map(|b| {
            Ok(ArcBucket {
                slab: b.slab,
                branch: b.branch,
                xs: b.xs.iter().map(|s| parse_rat(s)).collect::<Result<_, String>>()?,
                points: b.points.clone(),
                prefix_weights: b
                    .prefix_weights
                    .iter()
                    .map(|s| parse_rat(s))
                    .collect::<Result<_, String>>()?,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    let store = ArcStore {
        arcs,
        critical_points: json.critical_points.clone(),
    };
    Ok((decomp, store))
}
