//! Semialgebraic query ranges: Boolean formulas over closed polynomial
//! inequalities `g(x) >= 0`, exact point membership, and a sound
//! three-valued classifier for axis-aligned boxes.

use crate::linalg;
use crate::numeric::{rat_to_f64_interval, rational_to_string};
use crate::polycore::{Monomial, MultiPoly, RationalPoint, SignValue};
use num_rational::BigRational;
use num_traits::One;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One closed inequality `g(x) >= 0`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub g: MultiPoly,
}

/// Boolean combination of atoms by index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Formula {
    Atom(usize),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Not(Box<Formula>),
}

impl Formula {
    fn max_atom(&self) -> Option<usize> {
        match self {
            Formula::Atom(i) => Some(*i),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().filter_map(|f| f.max_atom()).max(),
            Formula::Not(f) => f.max_atom(),
        }
    }
}

#[derive(Debug, Error)]
pub enum RangeError {
    #[error("atom index {index} out of bounds ({atoms} atoms)")]
    AtomIndexOutOfBounds { index: usize, atoms: usize },
    #[error("atom {index} has dimension {got}, range declares {expected}")]
    AtomDimension {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("atom {index} is the zero polynomial")]
    ZeroAtom { index: usize },
    #[error("range declares degree bound {declared} below actual degree {actual}")]
    DegreeBoundTooSmall { declared: u32, actual: u32 },
    #[error("range declares {declared} atoms, found {actual}")]
    AtomBoundTooSmall { declared: usize, actual: usize },
    #[error("simplex vertices are affinely dependent")]
    DegenerateSimplex,
    #[error("expected {expected} vertices for dimension {d}, got {got}")]
    BadVertexCount { expected: usize, d: usize, got: usize },
}

/// A member of the query class: at most `s` atoms of degree at most `delta`
/// over `d` variables, combined by the formula.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SemialgebraicRange {
    d: usize,
    delta: u32,
    s: usize,
    atoms: Vec<Atom>,
    formula: Formula,
}

impl SemialgebraicRange {
    pub fn new(
        d: usize,
        delta: u32,
        s: usize,
        atoms: Vec<Atom>,
        formula: Formula,
    ) -> Result<SemialgebraicRange, RangeError> {
        if let Some(max) = formula.max_atom() {
            if max >= atoms.len() {
                return Err(RangeError::AtomIndexOutOfBounds {
                    index: max,
                    atoms: atoms.len(),
                });
            }
        }
        for (index, a) in atoms.iter().enumerate() {
            if a.g.is_zero() {
                return Err(RangeError::ZeroAtom { index });
            }
            if a.g.dimension() != d {
                return Err(RangeError::AtomDimension {
                    index,
                    got: a.g.dimension(),
                    expected: d,
                });
            }
        }
        let actual_deg = atoms.iter().map(|a| a.g.degree().max(0) as u32).max().unwrap_or(0);
        if actual_deg > delta {
            return Err(RangeError::DegreeBoundTooSmall {
                declared: delta,
                actual: actual_deg,
            });
        }
        if atoms.len() > s {
            return Err(RangeError::AtomBoundTooSmall {
                declared: s,
                actual: atoms.len(),
            });
        }
        Ok(SemialgebraicRange {
            d,
            delta,
            s,
            atoms,
            formula,
        })
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn delta(&self) -> u32 {
        self.delta
    }

    pub fn max_atoms(&self) -> usize {
        self.s
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn formula(&self) -> &Formula {
        &self.formula
    }

    /// Exact membership. Boundary points (an atom evaluating to zero) follow
    /// the closed semantics of the atoms through the formula.
    pub fn contains(&self, p: &RationalPoint) -> bool {
        assert_eq!(p.dimension(), self.d, "point dimension mismatch");
        // Atoms evaluated lazily: formulas rarely reference all of them.
        let mut cache: Vec<Option<bool>> = vec![None; self.atoms.len()];
        self.eval_formula(&self.formula, p, &mut cache)
    }

    fn eval_formula(&self, f: &Formula, p: &RationalPoint, cache: &mut Vec<Option<bool>>) -> bool {
        match f {
            Formula::Atom(i) => {
                if let Some(v) = cache[*i] {
                    return v;
                }
                let v = self.atoms[*i].g.eval_sign(p) != SignValue::Negative;
                cache[*i] = Some(v);
                v
            }
            Formula::And(fs) => fs.iter().all(|f| self.eval_formula(f, p, cache)),
            Formula::Or(fs) => fs.iter().any(|f| self.eval_formula(f, p, cache)),
            Formula::Not(f) => !self.eval_formula(f, p, cache),
        }
    }

    /// Sound three-valued classification of a box: `Inside` means every
    /// point of the box satisfies the range, `Outside` means none does,
    /// `Unknown` carries no claim.
    pub fn classify_box(&self, b: &AxisBox) -> BoxClass {
        assert_eq!(b.dimension(), self.d, "box dimension mismatch");
        let mut cache: Vec<Option<Tri>> = vec![None; self.atoms.len()];
        match self.classify_formula(&self.formula, b, &mut cache) {
            Tri::True => BoxClass::Inside,
            Tri::False => BoxClass::Outside,
            Tri::Unknown => BoxClass::Unknown,
        }
    }

    fn classify_formula(&self, f: &Formula, b: &AxisBox, cache: &mut Vec<Option<Tri>>) -> Tri {
        match f {
            Formula::Atom(i) => {
                if let Some(v) = cache[*i] {
                    return v;
                }
                let enc = interval_eval(&self.atoms[*i].g, b);
                let v = if enc.lo >= 0.0 {
                    Tri::True
                } else if enc.hi < 0.0 {
                    Tri::False
                } else {
                    Tri::Unknown
                };
                cache[*i] = Some(v);
                v
            }
            Formula::And(fs) => {
                let mut acc = Tri::True;
                for f in fs {
                    acc = acc.and(self.classify_formula(f, b, cache));
                    if acc == Tri::False {
                        break;
                    }
                }
                acc
            }
            Formula::Or(fs) => {
                let mut acc = Tri::False;
                for f in fs {
                    acc = acc.or(self.classify_formula(f, b, cache));
                    if acc == Tri::True {
                        break;
                    }
                }
                acc
            }
            Formula::Not(f) => self.classify_formula(f, b, cache).not(),
        }
    }
}

/// Classification verdict for a box against a range.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoxClass {
    Inside,
    Outside,
    Unknown,
}

/// Kleene's strong three-valued logic.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Tri {
    True,
    False,
    Unknown,
}

impl Tri {
    fn and(self, o: Tri) -> Tri {
        match (self, o) {
            (Tri::False, _) | (_, Tri::False) => Tri::False,
            (Tri::True, Tri::True) => Tri::True,
            _ => Tri::Unknown,
        }
    }
    fn or(self, o: Tri) -> Tri {
        match (self, o) {
            (Tri::True, _) | (_, Tri::True) => Tri::True,
            (Tri::False, Tri::False) => Tri::False,
            _ => Tri::Unknown,
        }
    }
    fn not(self) -> Tri {
        match self {
            Tri::True => Tri::False,
            Tri::False => Tri::True,
            Tri::Unknown => Tri::Unknown,
        }
    }
}

/// Closed axis-aligned box with exact rational corners. Float enclosures of
/// the corners are cached for the interval classifier.
#[derive(Clone, Debug)]
pub struct AxisBox {
    lo: Vec<BigRational>,
    hi: Vec<BigRational>,
    lo_f: Vec<f64>,
    hi_f: Vec<f64>,
}

impl PartialEq for AxisBox {
    fn eq(&self, other: &AxisBox) -> bool {
        self.lo == other.lo && self.hi == other.hi
    }
}

impl Eq for AxisBox {}

impl AxisBox {
    pub fn new(lo: Vec<BigRational>, hi: Vec<BigRational>) -> AxisBox {
        assert_eq!(lo.len(), hi.len());
        assert!(
            lo.iter().zip(&hi).all(|(a, b)| a <= b),
            "box must have lo <= hi on every axis"
        );
        let lo_f = lo.iter().map(|r| rat_to_f64_interval(r).0).collect();
        let hi_f = hi.iter().map(|r| rat_to_f64_interval(r).1).collect();
        AxisBox { lo, hi, lo_f, hi_f }
    }

    /// Bounding box of a nonempty point collection.
    pub fn around<'a>(points: impl IntoIterator<Item = &'a RationalPoint>) -> AxisBox {
        let mut iter = points.into_iter();
        let first = iter.next().expect("at least one point");
        let mut lo = first.coords().to_vec();
        let mut hi = lo.clone();
        for p in iter {
            for (i, c) in p.coords().iter().enumerate() {
                if c < &lo[i] {
                    lo[i] = c.clone();
                }
                if c > &hi[i] {
                    hi[i] = c.clone();
                }
            }
        }
        AxisBox::new(lo, hi)
    }

    pub fn dimension(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[BigRational] {
        &self.lo
    }

    pub fn hi(&self) -> &[BigRational] {
        &self.hi
    }

    pub fn contains_point(&self, p: &RationalPoint) -> bool {
        p.coords()
            .iter()
            .enumerate()
            .all(|(i, c)| &self.lo[i] <= c && c <= &self.hi[i])
    }
}

/// Outward-rounded f64 interval; every operation widens by one ulp per
/// endpoint, so enclosures are sound without rounding-mode control.
#[derive(Clone, Copy, Debug)]
struct FInt {
    lo: f64,
    hi: f64,
}

impl FInt {
    fn point_outward(v: f64) -> FInt {
        FInt { lo: v, hi: v }
    }

    fn widen(self) -> FInt {
        FInt {
            lo: self.lo.next_down(),
            hi: self.hi.next_up(),
        }
    }

    fn add(self, o: FInt) -> FInt {
        FInt {
            lo: self.lo + o.lo,
            hi: self.hi + o.hi,
        }
        .widen()
    }

    fn mul(self, o: FInt) -> FInt {
        let c = [
            self.lo * o.lo,
            self.lo * o.hi,
            self.hi * o.lo,
            self.hi * o.hi,
        ];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in c {
            // 0 * inf produces NaN; the sound enclosure is the whole line.
            if v.is_nan() {
                return FInt {
                    lo: f64::NEG_INFINITY,
                    hi: f64::INFINITY,
                };
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        FInt { lo, hi }.widen()
    }

    fn powi(self, e: u32) -> FInt {
        let mut acc = FInt { lo: 1.0, hi: 1.0 };
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }
}

/// Term-by-term interval extension of `g` over the box.
fn interval_eval(g: &MultiPoly, b: &AxisBox) -> FInt {
    let vars: Vec<FInt> = b
        .lo_f
        .iter()
        .zip(&b.hi_f)
        .map(|(&lo, &hi)| FInt { lo, hi })
        .collect();
    let mut acc = FInt::point_outward(0.0);
    for (m, c) in g.terms() {
        let (clo, chi) = rat_to_f64_interval(c);
        let mut term = FInt { lo: clo, hi: chi };
        for (i, &e) in m.exponents().iter().enumerate() {
            if e > 0 {
                term = term.mul(vars[i].powi(e));
            }
        }
        acc = acc.add(term);
    }
    acc
}

/// Halfspace `a . x >= b`.
pub fn make_halfspace(a: &[BigRational], b: &BigRational) -> SemialgebraicRange {
    let d = a.len();
    let mut terms: Vec<(Monomial, BigRational)> = a
        .iter()
        .enumerate()
        .map(|(i, c)| (Monomial::var(d, i), c.clone()))
        .collect();
    terms.push((Monomial::unit(d), -b));
    let g = MultiPoly::from_terms(d, terms);
    SemialgebraicRange::new(d, 1, 1, vec![Atom { g }], Formula::Atom(0))
        .expect("halfspace construction")
}

/// Closed ball given by its center and squared radius.
pub fn make_ball(center: &[BigRational], radius_sq: &BigRational) -> SemialgebraicRange {
    let d = center.len();
    let g = ball_atom(center, radius_sq);
    SemialgebraicRange::new(d, 2, 1, vec![Atom { g }], Formula::Atom(0))
        .expect("ball construction")
}

fn ball_atom(center: &[BigRational], radius_sq: &BigRational) -> MultiPoly {
    // radius_sq - sum (x_i - c_i)^2
    let d = center.len();
    let mut acc = MultiPoly::constant(d, radius_sq.clone());
    for (i, c) in center.iter().enumerate() {
        let xi = MultiPoly::variable(d, i);
        let diff = xi.sub(&MultiPoly::constant(d, c.clone()));
        acc = acc.sub(&diff.mul(&diff));
    }
    acc
}

/// Closed simplex spanned by d+1 vertices: the AND of d+1 inward halfspaces.
pub fn make_simplex(vertices: &[RationalPoint]) -> Result<SemialgebraicRange, RangeError> {
    let d = vertices
        .first()
        .map(|v| v.dimension())
        .unwrap_or(0);
    if vertices.len() != d + 1 || d == 0 {
        return Err(RangeError::BadVertexCount {
            expected: d + 1,
            d,
            got: vertices.len(),
        });
    }
    let mut atoms = Vec::with_capacity(d + 1);
    for skip in 0..=d {
        // Hyperplane through all vertices but `skip`, oriented inward.
        let rows: Vec<Vec<BigRational>> = vertices
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != skip)
            .map(|(_, v)| {
                let mut row = v.coords().to_vec();
                row.push(BigRational::one());
                row
            })
            .collect();
        let coeffs = linalg::nullvector_if_unique(&rows, d + 1)
            .ok_or(RangeError::DegenerateSimplex)?;
        let mut terms: Vec<(Monomial, BigRational)> = coeffs[..d]
            .iter()
            .enumerate()
            .map(|(i, c)| (Monomial::var(d, i), c.clone()))
            .collect();
        terms.push((Monomial::unit(d), coeffs[d].clone()));
        let mut g = MultiPoly::from_terms(d, terms);
        match g.eval_sign(&vertices[skip]) {
            SignValue::Positive => {}
            SignValue::Negative => g = g.neg(),
            SignValue::Zero => return Err(RangeError::DegenerateSimplex),
        }
        atoms.push(Atom { g });
    }
    let formula = Formula::And((0..=d).map(Formula::Atom).collect());
    SemialgebraicRange::new(d, 1, d + 1, atoms, formula)
}

/// Closed annulus `r1^2 <= |x - c|^2 <= r2^2`.
pub fn make_annulus(
    center: &[BigRational],
    r1_sq: &BigRational,
    r2_sq: &BigRational,
) -> SemialgebraicRange {
    let d = center.len();
    let outer = ball_atom(center, r2_sq); // r2^2 - |x-c|^2 >= 0
    let inner = ball_atom(center, r1_sq).neg(); // |x-c|^2 - r1^2 >= 0
    SemialgebraicRange::new(
        d,
        2,
        2,
        vec![Atom { g: inner }, Atom { g: outer }],
        Formula::And(vec![Formula::Atom(0), Formula::Atom(1)]),
    )
    .expect("annulus construction")
}

// ---------------------------------------------------------------------------
// File format

#[derive(Serialize, Deserialize, Clone, Debug)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum FormulaJson {
    Atom { index: usize },
    And { args: Vec<FormulaJson> },
    Or { args: Vec<FormulaJson> },
    Not { args: Vec<FormulaJson> },
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct RangeJson {
    pub d: usize,
    pub delta: u32,
    pub s: usize,
    pub atoms: Vec<crate::polycore::PolyJson>,
    pub formula: FormulaJson,
}

#[derive(Debug, Error)]
pub enum RangeFormatError {
    #[error("atom {index}: {source}")]
    Poly {
        index: usize,
        source: crate::polycore::PolyFormatError,
    },
    #[error("\"not\" takes exactly one argument, got {got}")]
    BadNotArity { got: usize },
    #[error(transparent)]
    Range(#[from] RangeError),
}

fn formula_from_json(j: &FormulaJson) -> Result<Formula, RangeFormatError> {
    Ok(match j {
        FormulaJson::Atom { index } => Formula::Atom(*index),
        FormulaJson::And { args } => {
            Formula::And(args.iter().map(formula_from_json).collect::<Result<_, _>>()?)
        }
        FormulaJson::Or { args } => {
            Formula::Or(args.iter().map(formula_from_json).collect::<Result<_, _>>()?)
        }
        FormulaJson::Not { args } => {
            if args.len() != 1 {
                return Err(RangeFormatError::BadNotArity { got: args.len() });
            }
            Formula::Not(Box::new(formula_from_json(&args[0])?))
        }
    })
}

fn formula_to_json(f: &Formula) -> FormulaJson {
    match f {
        Formula::Atom(i) => FormulaJson::Atom { index: *i },
        Formula::And(fs) => FormulaJson::And {
            args: fs.iter().map(formula_to_json).collect(),
        },
        Formula::Or(fs) => FormulaJson::Or {
            args: fs.iter().map(formula_to_json).collect(),
        },
        Formula::Not(f) => FormulaJson::Not {
            args: vec![formula_to_json(f)],
        },
    }
}

impl SemialgebraicRange {
    pub fn to_json(&self) -> RangeJson {
        RangeJson {
            d: self.d,
            delta: self.delta,
            s: self.s,
            atoms: self.atoms.iter().map(|a| a.g.to_json()).collect(),
            formula: formula_to_json(&self.formula),
        }
    }

    pub fn from_json(j: &RangeJson) -> Result<SemialgebraicRange, RangeFormatError> {
        let atoms = j
            .atoms
            .iter()
            .enumerate()
            .map(|(index, p)| {
                MultiPoly::from_json(p)
                    .map(|g| Atom { g })
                    .map_err(|source| RangeFormatError::Poly { index, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let formula = formula_from_json(&j.formula)?;
        Ok(SemialgebraicRange::new(j.d, j.delta, j.s, atoms, formula)?)
    }
}

impl Serialize for SemialgebraicRange {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SemialgebraicRange {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<SemialgebraicRange, D::Error> {
        let j = RangeJson::deserialize(d)?;
        SemialgebraicRange::from_json(&j).map_err(serde::de::Error::custom)
    }
}

/// Boxes serialize as rational strings; the float caches are rebuilt.
impl Serialize for AxisBox {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct BoxJson<'a> {
            lo: Vec<String>,
            hi: Vec<String>,
            #[serde(skip)]
            _p: &'a (),
        }
        BoxJson {
            lo: self.lo.iter().map(rational_to_string).collect(),
            hi: self.hi.iter().map(rational_to_string).collect(),
            _p: &(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for AxisBox {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<AxisBox, D::Error> {
        #[derive(Deserialize)]
        struct BoxJson {
            lo: Vec<String>,
            hi: Vec<String>,
        }
        let j = BoxJson::deserialize(d)?;
        let parse = |v: &[String]| -> Result<Vec<BigRational>, D::Error> {
            v.iter()
                .map(|s| {
                    crate::numeric::parse_rational_str(s)
                        .ok_or_else(|| serde::de::Error::custom(format!("invalid rational {s:?}")))
                })
                .collect()
        };
        let lo = parse(&j.lo)?;
        let hi = parse(&j.hi)?;
        if lo.len() != hi.len() || lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return Err(serde::de::Error::custom("invalid box bounds"));
        }
        Ok(AxisBox::new(lo, hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{rat, rat_int};
    use num_traits::Zero;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pt(coords: &[(i64, i64)]) -> RationalPoint {
        RationalPoint::new(coords.iter().map(|&(n, d)| rat(n, d)).collect())
    }

    fn unit_disk() -> SemialgebraicRange {
        make_ball(&[rat_int(0), rat_int(0)], &rat_int(1))
    }

    #[test]
    fn disk_membership_with_boundary() {
        let disk = unit_disk();
        assert!(disk.contains(&pt(&[(0, 1), (0, 1)])));
        assert!(disk.contains(&pt(&[(1, 1), (0, 1)])));
        assert!(!disk.contains(&pt(&[(2, 1), (0, 1)])));
    }

    #[test]
    fn simplex_membership() {
        let s = make_simplex(&[
            pt(&[(0, 1), (0, 1)]),
            pt(&[(1, 1), (0, 1)]),
            pt(&[(0, 1), (1, 1)]),
        ])
        .unwrap();
        assert!(s.contains(&pt(&[(1, 4), (1, 4)])));
        assert!(!s.contains(&pt(&[(1, 1), (1, 1)])));
        // Vertices and edges are inside (closed).
        assert!(s.contains(&pt(&[(0, 1), (0, 1)])));
        assert!(s.contains(&pt(&[(1, 2), (1, 2)])));
    }

    #[test]
    fn degenerate_simplex_rejected() {
        let err = make_simplex(&[
            pt(&[(0, 1), (0, 1)]),
            pt(&[(1, 1), (1, 1)]),
            pt(&[(2, 1), (2, 1)]),
        ]);
        assert!(matches!(err, Err(RangeError::DegenerateSimplex)));
    }

    #[test]
    fn annulus_membership() {
        let a = make_annulus(&[rat_int(0), rat_int(0)], &rat_int(1), &rat_int(4));
        assert!(a.contains(&pt(&[(0, 1), (3, 2)])));
        assert!(a.contains(&pt(&[(1, 1), (0, 1)]))); // inner boundary
        assert!(a.contains(&pt(&[(2, 1), (0, 1)]))); // outer boundary
        assert!(!a.contains(&pt(&[(0, 1), (1, 2)])));
        assert!(!a.contains(&pt(&[(3, 1), (0, 1)])));
    }

    fn unit_box() -> AxisBox {
        AxisBox::new(vec![rat_int(0), rat_int(0)], vec![rat_int(1), rat_int(1)])
    }

    #[test]
    fn classify_halfplane_cases() {
        let b = unit_box();
        let hp = |c: BigRational| make_halfspace(&[rat_int(1), rat_int(0)], &c);
        assert_eq!(hp(rat_int(2)).classify_box(&b), BoxClass::Outside);
        assert_eq!(hp(rat_int(-1)).classify_box(&b), BoxClass::Inside);
        assert_eq!(hp(rat(1, 2)).classify_box(&b), BoxClass::Unknown);
    }

    #[test]
    fn classify_respects_formula_logic() {
        let b = unit_box();
        // NOT(x1 >= 2) is everywhere true on the box.
        let inside_via_not = SemialgebraicRange::new(
            2,
            1,
            1,
            vec![Atom {
                g: make_halfspace(&[rat_int(1), rat_int(0)], &rat_int(2)).atoms()[0]
                    .g
                    .clone(),
            }],
            Formula::Not(Box::new(Formula::Atom(0))),
        )
        .unwrap();
        assert_eq!(inside_via_not.classify_box(&b), BoxClass::Inside);
    }

    #[test]
    fn range_construction_validates() {
        let g = make_halfspace(&[rat_int(1)], &rat_int(0)).atoms()[0].g.clone();
        assert!(matches!(
            SemialgebraicRange::new(1, 1, 1, vec![], Formula::Atom(0)),
            Err(RangeError::AtomIndexOutOfBounds { .. })
        ));
        assert!(matches!(
            SemialgebraicRange::new(1, 0, 1, vec![Atom { g: g.clone() }], Formula::Atom(0)),
            Err(RangeError::DegreeBoundTooSmall { .. })
        ));
        assert!(matches!(
            SemialgebraicRange::new(1, 1, 0, vec![Atom { g }], Formula::Atom(0)),
            Err(RangeError::AtomBoundTooSmall { .. })
        ));
    }

    #[test]
    fn range_json_round_trip() {
        let a = make_annulus(&[rat(1, 2), rat(-1, 3)], &rat(1, 4), &rat_int(2));
        let js = serde_json::to_string(&a).unwrap();
        let back: SemialgebraicRange = serde_json::from_str(&js).unwrap();
        assert_eq!(back, a);
        assert!(js.contains(r#""op":"and""#));
    }

    fn random_range(rng: &mut ChaCha8Rng, d: usize) -> SemialgebraicRange {
        match rng.random_range(0..4) {
            0 => {
                let a: Vec<BigRational> = (0..d)
                    .map(|_| rat(rng.random_range(-8i64..=8), 4))
                    .collect();
                if a.iter().all(|x| x.is_zero()) {
                    return random_range(rng, d);
                }
                make_halfspace(&a, &rat(rng.random_range(-8i64..=8), 4))
            }
            1 => {
                let c: Vec<BigRational> =
                    (0..d).map(|_| rat(rng.random_range(-4i64..=4), 4)).collect();
                make_ball(&c, &rat(rng.random_range(1i64..=16), 4))
            }
            2 => {
                let c: Vec<BigRational> =
                    (0..d).map(|_| rat(rng.random_range(-4i64..=4), 4)).collect();
                let r1 = rat(rng.random_range(1i64..=8), 8);
                let r2 = &r1 + rat(rng.random_range(1i64..=8), 8);
                make_annulus(&c, &r1, &r2)
            }
            _ => {
                let disk = make_ball(
                    &(0..d).map(|_| rat(rng.random_range(-2i64..=2), 2)).collect::<Vec<_>>(),
                    &rat(rng.random_range(1i64..=8), 2),
                );
                SemialgebraicRange::new(
                    d,
                    2,
                    1,
                    disk.atoms().to_vec(),
                    Formula::Not(Box::new(Formula::Atom(0))),
                )
                .unwrap()
            }
        }
    }

    fn random_box(rng: &mut ChaCha8Rng, d: usize) -> AxisBox {
        let lo: Vec<BigRational> = (0..d)
            .map(|_| rat(rng.random_range(-16i64..=8), 8))
            .collect();
        let hi: Vec<BigRational> = lo
            .iter()
            .map(|l| l + rat(rng.random_range(0i64..=12), 8))
            .collect();
        AxisBox::new(lo, hi)
    }

    fn sample_in_box(rng: &mut ChaCha8Rng, b: &AxisBox) -> RationalPoint {
        RationalPoint::new(
            b.lo()
                .iter()
                .zip(b.hi())
                .map(|(lo, hi)| {
                    let t = rat(rng.random_range(0i64..=64), 64);
                    lo + (hi - lo) * t
                })
                .collect(),
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn prop_classify_box_sound(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = rng.random_range(1..=3);
            let range = random_range(&mut rng, d);
            let b = random_box(&mut rng, d);
            let class = range.classify_box(&b);
            for _ in 0..100 {
                let p = sample_in_box(&mut rng, &b);
                match class {
                    BoxClass::Inside => prop_assert!(range.contains(&p)),
                    BoxClass::Outside => prop_assert!(!range.contains(&p)),
                    BoxClass::Unknown => {}
                }
            }
        }

        #[test]
        fn prop_classify_monotone_under_shrinking(seed in 0u64..5_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31));
            let d = rng.random_range(1..=2);
            let range = random_range(&mut rng, d);
            let b = random_box(&mut rng, d);
            // Shrink towards the center.
            let lo: Vec<BigRational> = b
                .lo()
                .iter()
                .zip(b.hi())
                .map(|(lo, hi)| lo + (hi - lo) * rat(1, 4))
                .collect();
            let hi: Vec<BigRational> = b
                .lo()
                .iter()
                .zip(b.hi())
                .map(|(lo, hi)| hi - (hi - lo) * rat(1, 4))
                .collect();
            let smaller = AxisBox::new(lo, hi);
            let big = range.classify_box(&b);
            let small = range.classify_box(&smaller);
            match big {
                BoxClass::Inside => prop_assert_eq!(small, BoxClass::Inside),
                BoxClass::Outside => prop_assert_eq!(small, BoxClass::Outside),
                BoxClass::Unknown => {}
            }
        }
    }
}
