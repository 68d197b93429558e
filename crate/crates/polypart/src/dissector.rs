//! Randomized construction of a polynomial that simultaneously splits at
//! least half of a family of point sets, by lifting one random anchor per
//! family and passing a hyperplane through the lifted points.

use crate::linalg;
use crate::numeric::rat_to_f64;
use crate::partition::WeightedPointSet;
use crate::polycore::{
    min_degree, monomial_basis, multi_eval_sign, veronese, Monomial, MultiPoly, SignValue,
};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Families to dissect: pairwise disjoint, nonempty index sets over a shared
/// point set in dimension `d`.
#[derive(Clone, Debug)]
pub struct DissectInput {
    pub families: Vec<Vec<usize>>,
    pub d: usize,
}

/// Auxiliary affinely independent points in the lifted space, prepared in
/// advance to pin down the hyperplane when anchors are affinely dependent.
#[derive(Clone, Debug)]
pub struct AuxPoints {
    pub q: Vec<Vec<BigRational>>,
}

/// Outcome of the dissecting trial loop.
#[derive(Clone, Debug)]
pub struct DissectResult {
    pub g: MultiPoly,
    /// Indices of families that `g` dissects well.
    pub dissected: Vec<usize>,
    pub trials_used: usize,
    /// Per trial, how many families were not well-dissected.
    pub trial_miss_counts: Vec<usize>,
}

#[derive(Debug, Error)]
pub enum DissectError {
    #[error("could not sample affinely independent auxiliary points in {attempts} attempts")]
    InternalRandomnessFailure { attempts: usize },
    #[error("no dissecting polynomial found within {trials} trials")]
    TrialBudgetExceeded { trials: usize },
    #[error("families must be nonempty and pairwise disjoint")]
    InvalidFamilies,
}

/// Knobs for the trial loop. Above `exact_solve_max_k` the hyperplane is
/// solved in floating point (coefficients adopted exactly afterwards); the
/// acceptance checks stay exact either way.
#[derive(Clone, Debug)]
pub struct DissectorConfig {
    pub max_trials: usize,
    pub exact_solve_max_k: usize,
}

impl Default for DissectorConfig {
    fn default() -> DissectorConfig {
        DissectorConfig {
            max_trials: 1000,
            exact_solve_max_k: 64,
        }
    }
}

const AUX_GRID_BITS: u32 = 31;
const AUX_ATTEMPTS: usize = 64;

/// k random points in the unit cube of the lifted space, drawn from the grid
/// 2^-31 * {0..2^31} and verified affinely independent by exact rank.
pub fn sample_aux_points(k: usize, rng: &mut ChaCha8Rng) -> Result<AuxPoints, DissectError> {
    assert!(k >= 1);
    let den = BigInt::from(1u64 << AUX_GRID_BITS);
    for _ in 0..AUX_ATTEMPTS {
        let q: Vec<Vec<BigRational>> = (0..k)
            .map(|_| {
                (0..k)
                    .map(|_| {
                        let n = rng.random_range(0..=(1u64 << AUX_GRID_BITS));
                        BigRational::new(BigInt::from(n), den.clone())
                    })
                    .collect()
            })
            .collect();
        if affinely_independent(&q) {
            return Ok(AuxPoints { q });
        }
    }
    Err(DissectError::InternalRandomnessFailure {
        attempts: AUX_ATTEMPTS,
    })
}

fn affinely_independent(points: &[Vec<BigRational>]) -> bool {
    if points.len() <= 1 {
        return true;
    }
    let ncols = points[0].len();
    let diffs: Vec<Vec<BigRational>> = points[1..]
        .iter()
        .map(|p| p.iter().zip(&points[0]).map(|(a, b)| a - b).collect())
        .collect();
    linalg::rank(&diffs, ncols) == points.len() - 1
}

/// Result of the exact hyperplane solve.
#[derive(Clone, Debug)]
pub enum HyperplaneOutcome {
    /// Coefficients (a_1..a_k, a_0) of a . x + a_0 = 0, primitive integers.
    Found(Vec<BigRational>),
    /// The prescribed auxiliary points leave the hyperplane underdetermined;
    /// the caller resamples them and retries.
    Restart,
}

/// The unique hyperplane through the anchor lifts `b` and, when their affine
/// hull is deficient, through a prefix of the auxiliary points.
pub fn hyperplane_through(b: &[Vec<BigRational>], aux: &AuxPoints) -> HyperplaneOutcome {
    let k = b.len();
    debug_assert!(b.iter().all(|p| p.len() == k));
    let affine_row = |p: &[BigRational]| -> Vec<BigRational> {
        let mut row = p.to_vec();
        row.push(BigRational::one());
        row
    };
    let b_rows: Vec<Vec<BigRational>> = b.iter().map(|p| affine_row(p)).collect();
    let rank_b = linalg::rank(&b_rows, k + 1);
    // Affine hull dimension k' = rank_b - 1; take k - k' - 1 auxiliary points.
    let extra = k - rank_b;
    let mut rows = b_rows;
    rows.extend(aux.q.iter().take(extra).map(|p| affine_row(p)));
    match linalg::nullvector_if_unique(&rows, k + 1) {
        Some(coeffs) => HyperplaneOutcome::Found(coeffs),
        None => HyperplaneOutcome::Restart,
    }
}

/// Whether `g` leaves at most 7/8 of the family strictly on each side.
/// Exact threshold comparison; points on the zero set count for neither side.
pub fn is_well_dissecting(g: &MultiPoly, family: &[usize], pts: &WeightedPointSet) -> bool {
    let mut pos = 0usize;
    let mut neg = 0usize;
    for &i in family {
        match g.eval_sign(pts.point(i)) {
            SignValue::Positive => pos += 1,
            SignValue::Negative => neg += 1,
            SignValue::Zero => {}
        }
    }
    well_dissected_counts(pos, neg, family.len())
}

fn well_dissected_counts(pos: usize, neg: usize, total: usize) -> bool {
    // pos <= 7/8 * total and neg <= 7/8 * total, exactly.
    8 * pos <= 7 * total && 8 * neg <= 7 * total
}

pub fn build_dissector(
    input: &DissectInput,
    pts: &WeightedPointSet,
    rng: &mut ChaCha8Rng,
) -> Result<DissectResult, DissectError> {
    build_dissector_with(input, pts, &DissectorConfig::default(), rng).map(|(res, _)| res)
}

/// Full trial loop; also returns the per-family sign vectors of the winning
/// polynomial so callers can split without re-evaluating.
pub fn build_dissector_with(
    input: &DissectInput,
    pts: &WeightedPointSet,
    cfg: &DissectorConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(DissectResult, Vec<Vec<SignValue>>), DissectError> {
    let k = input.families.len();
    if k == 0 || input.families.iter().any(|f| f.is_empty()) {
        return Err(DissectError::InvalidFamilies);
    }
    let degree = min_degree(k, input.d);
    let basis: Vec<Monomial> = monomial_basis(input.d, degree)
        .into_iter()
        .take(k)
        .collect();
    let exact = k <= cfg.exact_solve_max_k;
    let mut aux = if exact {
        Some(sample_aux_points(k, rng)?)
    } else {
        None
    };

    let need = k.div_ceil(2);
    let mut miss_counts = Vec::new();
    for trial in 1..=cfg.max_trials {
        let anchors: Vec<usize> = input
            .families
            .iter()
            .map(|f| f[rng.random_range(0..f.len())])
            .collect();
        let solved = if exact {
            let lifted: Vec<Vec<BigRational>> = anchors
                .iter()
                .map(|&i| veronese(pts.point(i), &basis))
                .collect();
            match hyperplane_through(&lifted, aux.as_ref().unwrap()) {
                HyperplaneOutcome::Found(c) => Some(assemble(input.d, &basis, &c)),
                HyperplaneOutcome::Restart => {
                    aux = Some(sample_aux_points(k, rng)?);
                    None
                }
            }
        } else {
            solve_float(&anchors, &basis, pts)
        };
        let Some(g) = solved else {
            // Degenerate system: restart with fresh randomness.
            miss_counts.push(k);
            continue;
        };
        debug_assert!(g.degree() >= 0 && g.degree() <= degree as i64);

        let signs: Vec<Vec<SignValue>> = input
            .families
            .iter()
            .map(|f| {
                let family_pts: Vec<_> = f.iter().map(|&i| pts.point(i).clone()).collect();
                multi_eval_sign(&g, &family_pts)
            })
            .collect();
        let mut dissected = Vec::new();
        for (fi, fam_signs) in signs.iter().enumerate() {
            let pos = fam_signs.iter().filter(|s| **s == SignValue::Positive).count();
            let neg = fam_signs.iter().filter(|s| **s == SignValue::Negative).count();
            if well_dissected_counts(pos, neg, fam_signs.len()) {
                dissected.push(fi);
            }
        }
        miss_counts.push(k - dissected.len());
        if dissected.len() >= need {
            let result = DissectResult {
                g,
                dissected,
                trials_used: trial,
                trial_miss_counts: miss_counts,
            };
            return Ok((result, signs));
        }
    }
    Err(DissectError::TrialBudgetExceeded {
        trials: cfg.max_trials,
    })
}

/// g = a . Phi(x) + a_0 from solved hyperplane coefficients, rescaled so
/// coefficient magnitudes stay near one. Exact-solve coefficients are
/// minors of the lifted system and can reach thousands of bits; without the
/// rescale they overflow the float filter and force every downstream sign
/// test into big-rational arithmetic.
fn assemble(d: usize, basis: &[Monomial], coeffs: &[BigRational]) -> MultiPoly {
    let mut terms: Vec<(Monomial, BigRational)> = basis
        .iter()
        .zip(coeffs)
        .map(|(m, c)| (m.clone(), c.clone()))
        .collect();
    terms.push((Monomial::unit(d), coeffs[basis.len()].clone()));
    normalize_magnitude(MultiPoly::from_terms(d, terms))
}

/// Float route for large lifted dimensions, where the exact interpolation
/// coefficients (ratios of k-by-k minors) grow beyond practical size.
///
/// The anchors are lifted in centered, scaled coordinates: the monomial
/// basis on the raw unit box is numerically rank-deficient beyond degree
/// ~15, while on [-1,1] the solve stays well within f64 reach. Centering is
/// a triangular change of basis with respect to the graded order, so the
/// solved polynomial still lies in the span of the first k graded-lex
/// monomials plus the constant. Its coefficients are adopted as exact
/// dyadic rationals; only the through-the-anchors property is approximate,
/// which the exact well-dissection recheck absorbs.
fn solve_float(
    anchors: &[usize],
    basis: &[Monomial],
    pts: &WeightedPointSet,
) -> Option<MultiPoly> {
    let k = anchors.len();
    let d = pts.dimension();
    // Anchor bounding box, as exact dyadics adopted from f64.
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for &i in anchors {
        for (j, &x) in pts.point(i).approx().iter().enumerate() {
            if !x.is_finite() {
                return None;
            }
            lo[j] = lo[j].min(x);
            hi[j] = hi[j].max(x);
        }
    }
    let center: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let scale: Vec<f64> = lo
        .iter()
        .zip(&hi)
        .map(|(a, b)| {
            let s = 0.5 * (b - a);
            if s > 0.0 { s } else { 1.0 }
        })
        .collect();

    let rows: Vec<Vec<f64>> = anchors
        .iter()
        .map(|&i| {
            let xs = pts.point(i).approx();
            let us: Vec<f64> = xs
                .iter()
                .enumerate()
                .map(|(j, &x)| (x - center[j]) / scale[j])
                .collect();
            let mut row: Vec<f64> = basis
                .iter()
                .map(|m| {
                    let mut v = 1.0_f64;
                    for (j, &e) in m.exponents().iter().enumerate() {
                        for _ in 0..e {
                            v *= us[j];
                        }
                    }
                    v
                })
                .collect();
            row.push(1.0);
            row
        })
        .collect();
    let sol = linalg::nullvector_f64(&rows, k + 1)?;
    if sol[..k].iter().all(|&x| x == 0.0) {
        return None;
    }

    // Expand sum c_i * prod ((x_j - center_j)/scale_j)^e_ij + c_k exactly.
    let center: Vec<BigRational> = center.iter().map(|&c| BigRational::from_float(c)).collect::<Option<_>>()?;
    let scale: Vec<BigRational> = scale.iter().map(|&s| BigRational::from_float(s)).collect::<Option<_>>()?;
    let max_deg: Vec<u32> = (0..d)
        .map(|j| basis.iter().map(|m| m.exponents()[j]).max().unwrap_or(0))
        .collect();
    let axis_pows: Vec<Vec<MultiPoly>> = (0..d)
        .map(|j| {
            let lin = MultiPoly::variable(d, j)
                .sub(&MultiPoly::constant(d, center[j].clone()))
                .scale(&(BigRational::one() / &scale[j]));
            let mut pows = vec![MultiPoly::one(d)];
            for e in 1..=max_deg[j] as usize {
                let next = pows[e - 1].mul(&lin);
                pows.push(next);
            }
            pows
        })
        .collect();
    let mut g = MultiPoly::constant(d, BigRational::from_float(sol[k])?);
    for (m, &c) in basis.iter().zip(&sol) {
        if c == 0.0 {
            continue;
        }
        let mut term = MultiPoly::constant(d, BigRational::from_float(c)?);
        for (j, &e) in m.exponents().iter().enumerate() {
            if e > 0 {
                term = term.mul(&axis_pows[j][e as usize]);
            }
        }
        g = g.add(&term);
    }
    if g.is_zero() {
        return None;
    }
    Some(normalize_magnitude(g))
}

/// Rescales a polynomial by a power of two so coefficient magnitudes stay
/// near one (signs unchanged); keeps the float filter effective downstream.
fn normalize_magnitude(g: MultiPoly) -> MultiPoly {
    let mag = g
        .terms()
        .map(|(_, c)| c.numer().bits() as i64 - c.denom().bits() as i64)
        .max()
        .unwrap_or(0);
    if (-64..=64).contains(&mag) {
        return g;
    }
    let scale = if mag > 0 {
        BigRational::new(BigInt::one(), BigInt::one() << (mag as usize))
    } else {
        BigRational::from(BigInt::one() << ((-mag) as usize))
    };
    g.scale(&scale)
}

// Re-exported for tests that compute expected values independently.
#[doc(hidden)]
pub fn float_anchor_residual(g: &MultiPoly, pts: &WeightedPointSet, anchor: usize) -> f64 {
    rat_to_f64(&g.eval_exact(pts.point(anchor)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{rat, rat_int};
    use crate::partition::WeightedPointSet;
    use crate::polycore::RationalPoint;
    use num_traits::Signed;
    use rand::SeedableRng;

    fn point_set(coords: &[(i64, i64)]) -> WeightedPointSet {
        WeightedPointSet::unit_weights(
            coords
                .iter()
                .map(|&(x, y)| RationalPoint::new(vec![rat_int(x), rat_int(y)]))
                .collect(),
        )
        .unwrap()
    }

    fn grid_points(n: usize, seed: u64) -> WeightedPointSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        WeightedPointSet::unit_weights(
            (0..n)
                .map(|_| {
                    RationalPoint::new(vec![
                        rat(rng.random_range(0..=1_000_000), 1_000_000),
                        rat(rng.random_range(0..=1_000_000), 1_000_000),
                    ])
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn aux_points_basic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = sample_aux_points(1, &mut rng).unwrap();
        assert_eq!(a.q.len(), 1);
        assert!(a.q[0][0] >= rat_int(0) && a.q[0][0] <= rat_int(1));

        let a3 = sample_aux_points(3, &mut rng).unwrap();
        let diffs: Vec<Vec<BigRational>> = a3.q[1..]
            .iter()
            .map(|p| p.iter().zip(&a3.q[0]).map(|(x, y)| x - y).collect())
            .collect();
        assert_eq!(linalg::rank(&diffs, 3), 2);
    }

    #[test]
    fn aux_points_deterministic_under_seed() {
        let a = sample_aux_points(4, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = sample_aux_points(4, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a.q, b.q);
    }

    #[test]
    fn hyperplane_two_distinct_points() {
        let aux = AuxPoints {
            q: vec![vec![rat(1, 7), rat(2, 7)], vec![rat(3, 7), rat(1, 7)]],
        };
        let b = vec![vec![rat_int(0), rat_int(0)], vec![rat_int(1), rat_int(0)]];
        let HyperplaneOutcome::Found(c) = hyperplane_through(&b, &aux) else {
            panic!("expected a hyperplane");
        };
        // x2 = 0 up to scale.
        assert_eq!(c, vec![rat_int(0), rat_int(1), rat_int(0)]);
    }

    #[test]
    fn hyperplane_coincident_points_uses_aux() {
        let aux = AuxPoints {
            q: vec![vec![rat(1, 3), rat(1, 2)], vec![rat(2, 3), rat(1, 5)]],
        };
        let b = vec![vec![rat_int(0), rat_int(0)], vec![rat_int(0), rat_int(0)]];
        let HyperplaneOutcome::Found(c) = hyperplane_through(&b, &aux) else {
            panic!("expected a hyperplane");
        };
        // Line through (0,0) and (1/3,1/2): 3x - 2y = 0 up to scale.
        assert_eq!(c, vec![rat_int(3), rat_int(-2), rat_int(0)]);
    }

    #[test]
    fn hyperplane_collinear_triple_matches_independent_solve() {
        // Three collinear points in R^3 plus one auxiliary point off the line.
        let b = vec![
            vec![rat_int(0), rat_int(0), rat_int(0)],
            vec![rat_int(1), rat_int(1), rat_int(1)],
            vec![rat_int(2), rat_int(2), rat_int(2)],
        ];
        let aux = AuxPoints {
            q: vec![
                vec![rat_int(1), rat_int(0), rat_int(0)],
                vec![rat(1, 2), rat(1, 3), rat(1, 5)],
                vec![rat(1, 7), rat(1, 11), rat(1, 13)],
            ],
        };
        let HyperplaneOutcome::Found(c) = hyperplane_through(&b, &aux) else {
            panic!("expected a hyperplane");
        };
        // Independent derivation: the plane through the line x=y=z and
        // (1,0,0) has normal (1,1,1) x (1,0,0) = (0,1,-1), offset 0.
        assert_eq!(c, vec![rat_int(0), rat_int(1), rat_int(-1), rat_int(0)]);
    }

    #[test]
    fn well_dissecting_boundaries() {
        // 8 points on a line; g = x1 - c separates them by count.
        let pts = point_set(&[
            (0, 0),
            (1, 0),
            (2, 0),
            (3, 0),
            (4, 0),
            (5, 0),
            (6, 0),
            (7, 0),
        ]);
        let family: Vec<usize> = (0..8).collect();
        let g_7_1 = crate::ranges::make_halfspace(&[rat_int(-1), rat_int(0)], &rat(-13, 2));
        // 7 points strictly below 13/2, 1 above: counts (7, 1).
        assert!(is_well_dissecting(&g_7_1.atoms()[0].g, &family, &pts));
        let g_all = crate::ranges::make_halfspace(&[rat_int(1), rat_int(0)], &rat_int(-1));
        // All 8 strictly positive.
        assert!(!is_well_dissecting(&g_all.atoms()[0].g, &family, &pts));
        let g_vanish = MultiPoly::from_terms(2, [(Monomial::var(2, 1), rat_int(1))]);
        // x2 vanishes on the whole family.
        assert!(is_well_dissecting(&g_vanish, &family, &pts));
    }

    #[test]
    fn single_family_gets_degree_one_dissector() {
        let pts = grid_points(16, 3);
        let input = DissectInput {
            families: vec![(0..16).collect()],
            d: 2,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let res = build_dissector(&input, &pts, &mut rng).unwrap();
        assert!(res.g.degree() <= 1);
        assert_eq!(res.dissected, vec![0]);
        assert!(is_well_dissecting(&res.g, &input.families[0], &pts));
    }

    #[test]
    fn two_families_need_at_least_one_dissected() {
        let pts = grid_points(40, 9);
        let input = DissectInput {
            families: vec![(0..20).collect(), (20..40).collect()],
            d: 2,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let res = build_dissector(&input, &pts, &mut rng).unwrap();
        assert!(res.g.degree() <= min_degree(2, 2) as i64);
        assert!(!res.dissected.is_empty());
        for &fi in &res.dissected {
            assert!(is_well_dissecting(&res.g, &input.families[fi], &pts));
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let pts = grid_points(60, 11);
        let input = DissectInput {
            families: vec![(0..20).collect(), (20..40).collect(), (40..60).collect()],
            d: 2,
        };
        let a = build_dissector(&input, &pts, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        let b = build_dissector(&input, &pts, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        assert_eq!(a.g, b.g);
        assert_eq!(a.dissected, b.dissected);
        assert_eq!(a.trials_used, b.trials_used);
    }

    #[test]
    fn monte_carlo_trials_and_miss_fraction() {
        // 500 random instances, k <= 16, family sizes <= 64. The per-trial
        // success probability is at least 1/2, so the trial count is nearly
        // geometric; the not-well-dissected fraction has mean <= 1/4.
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut total_trials = 0usize;
        let mut miss_num = 0usize;
        let mut miss_den = 0usize;
        for inst in 0..500 {
            let k = rng.random_range(1..=16);
            let sizes: Vec<usize> = (0..k).map(|_| rng.random_range(1..=64)).collect();
            let n: usize = sizes.iter().sum();
            let pts = grid_points(n, 10_000 + inst);
            let mut families = Vec::new();
            let mut next = 0;
            for s in sizes {
                families.push((next..next + s).collect());
                next += s;
            }
            let input = DissectInput { families, d: 2 };
            let (res, _) = build_dissector_with(
                &input,
                &pts,
                &DissectorConfig::default(),
                &mut rng,
            )
            .unwrap();
            total_trials += res.trials_used;
            for &m in &res.trial_miss_counts {
                miss_num += m;
                miss_den += k;
            }
            assert!(res.dissected.len() >= k.div_ceil(2));
            assert!(res.g.degree() <= min_degree(k, 2) as i64);
        }
        let mean_trials = total_trials as f64 / 500.0;
        let miss_fraction = miss_num as f64 / miss_den as f64;
        assert!(mean_trials <= 4.0, "mean trials {mean_trials}");
        assert!(miss_fraction <= 0.35, "miss fraction {miss_fraction}");
    }

    #[test]
    fn float_route_still_verified_exactly() {
        // Force the float solve with a tiny exact cap.
        let pts = grid_points(360, 77);
        let families: Vec<Vec<usize>> = (0..24).map(|i| (i * 15..(i + 1) * 15).collect()).collect();
        let input = DissectInput { families, d: 2 };
        let cfg = DissectorConfig {
            max_trials: 1000,
            exact_solve_max_k: 4,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (res, _) = build_dissector_with(&input, &pts, &cfg, &mut rng).unwrap();
        assert!(res.dissected.len() >= 12);
        for &fi in &res.dissected {
            assert!(is_well_dissecting(&res.g, &input.families[fi], &pts));
        }
        // Anchors are hit only approximately on this route, but the
        // polynomial must still be genuinely low-degree.
        assert!(res.g.degree() <= min_degree(24, 2) as i64);
        assert!(res.g.terms().all(|(_, c)| !c.is_zero() || c.abs() > rat_int(0)));
    }
}
