//! Seeded generators for point datasets and query-range families. Every
//! generator is a pure function of its parameters and seed.

use crate::numeric::{rat, rat_int};
use crate::partition::WeightedPointSet;
use crate::patches2d::UniPoly;
use crate::polycore::{Monomial, MultiPoly, RationalPoint};
use crate::ranges::{
    make_annulus, make_ball, make_halfspace, make_simplex, Atom, Formula, SemialgebraicRange,
};

use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const COORD_GRID: i64 = 1_000_000;

/// Dataset shapes. Coordinates are exact rationals on a fine grid (or exact
/// curve points for the degenerate families).
#[derive(Clone, Debug, PartialEq)]
pub enum Distribution {
    /// Uniform over the unit box.
    UniformBox,
    /// A few Gaussian blobs with centers in the unit box.
    GaussianClusters { clusters: usize },
    /// Exactly on the unit circle via the rational parametrization
    /// ((1-t^2)/(1+t^2), 2t/(1+t^2)). Two-dimensional only.
    OnCircle,
    /// Exactly on the graph y = q(x) of a univariate polynomial (d = 2).
    OnGraph { q: UniPoly },
    /// Regular lattice in the unit box.
    Grid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightMode {
    Unit,
    /// Nonnegative rationals k/100, k in 0..=100.
    Random,
}

pub fn generate_points(
    dist: &Distribution,
    n: usize,
    d: usize,
    seed: u64,
    weights: WeightMode,
) -> WeightedPointSet {
    assert!(n >= 1 && d >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<RationalPoint> = match dist {
        Distribution::UniformBox => (0..n)
            .map(|_| {
                RationalPoint::new(
                    (0..d)
                        .map(|_| rat(rng.random_range(0..=COORD_GRID), COORD_GRID))
                        .collect(),
                )
            })
            .collect(),
        Distribution::GaussianClusters { clusters } => {
            let k = (*clusters).max(1);
            let centers: Vec<Vec<f64>> = (0..k)
                .map(|_| (0..d).map(|_| rng.random_range(0.2..0.8)).collect())
                .collect();
            (0..n)
                .map(|_| {
                    let c = &centers[rng.random_range(0..k)];
                    RationalPoint::new(
                        (0..d)
                            .map(|j| {
                                let x = c[j] + 0.06 * gaussian(&mut rng);
                                grid_snap(x)
                            })
                            .collect(),
                    )
                })
                .collect()
        }
        Distribution::OnCircle => {
            assert_eq!(d, 2, "on-circle data is two-dimensional");
            (0..n)
                .map(|_| {
                    let t = rat(rng.random_range(-40_000i64..=40_000), 10_000);
                    let t2 = &t * &t;
                    let den = &t2 + BigRational::one();
                    RationalPoint::new(vec![
                        (BigRational::one() - &t2) / den.clone(),
                        (rat_int(2) * &t) / den,
                    ])
                })
                .collect()
        }
        Distribution::OnGraph { q } => {
            assert_eq!(d, 2, "graph data is two-dimensional");
            (0..n)
                .map(|_| {
                    let x = rat(rng.random_range(-COORD_GRID..=COORD_GRID), COORD_GRID);
                    let y = q.eval(&x);
                    RationalPoint::new(vec![x, y])
                })
                .collect()
        }
        Distribution::Grid => {
            let side = (1..).find(|s: &usize| s.pow(d as u32) >= n).unwrap();
            let denom = side.max(2) as i64 - 1;
            (0..n)
                .map(|i| {
                    let mut idx = i;
                    RationalPoint::new(
                        (0..d)
                            .map(|_| {
                                let c = (idx % side) as i64;
                                idx /= side;
                                rat(c, denom.max(1))
                            })
                            .collect(),
                    )
                })
                .collect()
        }
    };
    let weights: Vec<BigRational> = match weights {
        WeightMode::Unit => vec![BigRational::one(); n],
        WeightMode::Random => (0..n)
            .map(|_| rat(rng.random_range(0..=100), 100))
            .collect(),
    };
    WeightedPointSet::new(points, weights).expect("generated set is valid")
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller on uniform variates from the seeded stream.
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn grid_snap(x: f64) -> BigRational {
    let k = (x * COORD_GRID as f64).round();
    let k = k.clamp(-(COORD_GRID as f64) * 10.0, COORD_GRID as f64 * 10.0) as i64;
    rat(k, COORD_GRID)
}

/// Query-range families over roughly the unit box.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RangeFamily {
    Halfspaces,
    Balls,
    Simplices,
    Annuli,
    /// Boolean combinations of up to three random atoms of degree <= 3.
    Conjunctions,
    /// Rotates through all of the above.
    Mixed,
}

impl RangeFamily {
    pub fn parse(name: &str) -> Option<RangeFamily> {
        Some(match name {
            "halfspaces" => RangeFamily::Halfspaces,
            "balls" => RangeFamily::Balls,
            "simplices" => RangeFamily::Simplices,
            "annuli" => RangeFamily::Annuli,
            "conjunctions" => RangeFamily::Conjunctions,
            "mixed" => RangeFamily::Mixed,
            _ => return None,
        })
    }
}

pub fn generate_ranges(
    family: RangeFamily,
    count: usize,
    d: usize,
    seed: u64,
) -> Vec<SemialgebraicRange> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let f = match family {
                RangeFamily::Mixed => match i % 5 {
                    0 => RangeFamily::Halfspaces,
                    1 => RangeFamily::Balls,
                    2 => RangeFamily::Simplices,
                    3 => RangeFamily::Annuli,
                    _ => RangeFamily::Conjunctions,
                },
                f => f,
            };
            one_range(f, d, &mut rng)
        })
        .collect()
}

fn one_range(family: RangeFamily, d: usize, rng: &mut ChaCha8Rng) -> SemialgebraicRange {
    match family {
        RangeFamily::Halfspaces => {
            let mut a: Vec<BigRational> =
                (0..d).map(|_| rat(rng.random_range(-64i64..=64), 32)).collect();
            if a.iter().all(|c| c.is_zero()) {
                a[0] = BigRational::one();
            }
            make_halfspace(&a, &rat(rng.random_range(-64i64..=64), 32))
        }
        RangeFamily::Balls => {
            let c: Vec<BigRational> = (0..d)
                .map(|_| rat(rng.random_range(-20i64..=120), 100))
                .collect();
            make_ball(&c, &rat(rng.random_range(1i64..=140), 100))
        }
        RangeFamily::Simplices => loop {
            let verts: Vec<RationalPoint> = (0..=d)
                .map(|_| {
                    RationalPoint::new(
                        (0..d)
                            .map(|_| rat(rng.random_range(-40i64..=140), 100))
                            .collect(),
                    )
                })
                .collect();
            if let Ok(s) = make_simplex(&verts) {
                return s;
            }
        },
        RangeFamily::Annuli => {
            let c: Vec<BigRational> = (0..d)
                .map(|_| rat(rng.random_range(-20i64..=120), 100))
                .collect();
            let r1 = rat(rng.random_range(1i64..=50), 100);
            let r2 = &r1 + rat(rng.random_range(5i64..=100), 100);
            make_annulus(&c, &r1, &r2)
        }
        RangeFamily::Conjunctions => {
            let n_atoms = rng.random_range(2..=3);
            let atoms: Vec<Atom> = (0..n_atoms)
                .map(|_| Atom {
                    g: random_low_degree_poly(d, rng),
                })
                .collect();
            let leaves: Vec<Formula> = (0..n_atoms)
                .map(|i| {
                    if rng.random_range(0..4) == 0 {
                        Formula::Not(Box::new(Formula::Atom(i)))
                    } else {
                        Formula::Atom(i)
                    }
                })
                .collect();
            let formula = if rng.random_range(0..2) == 0 {
                Formula::And(leaves)
            } else {
                let mut it = leaves.into_iter();
                let first = it.next().unwrap();
                Formula::Or(vec![first, Formula::And(it.collect())])
            };
            SemialgebraicRange::new(d, 3, n_atoms, atoms, formula)
                .expect("generated range is valid")
        }
        RangeFamily::Mixed => unreachable!("resolved by caller"),
    }
}

fn random_low_degree_poly(d: usize, rng: &mut ChaCha8Rng) -> MultiPoly {
    loop {
        let mut terms = Vec::new();
        let mut basis = crate::polycore::monomial_basis(d, 3);
        basis.push(Monomial::unit(d));
        for m in basis {
            if rng.random_range(0..3) == 0 {
                let c = rng.random_range(-8i64..=8);
                if c != 0 {
                    terms.push((m, rat(c, 4)));
                }
            }
        }
        let p = MultiPoly::from_terms(d, terms);
        if !p.is_zero() {
            return p;
        }
    }
}

/// The unit-circle polynomial x^2 + y^2 - 1.
pub fn circle_poly() -> MultiPoly {
    MultiPoly::from_terms(
        2,
        [
            (Monomial::new(vec![2, 0]), rat_int(1)),
            (Monomial::new(vec![0, 2]), rat_int(1)),
            (Monomial::unit(2), rat_int(-1)),
        ],
    )
}

/// y = x^3 - x as a graph generator input.
pub fn cubic_graph() -> UniPoly {
    UniPoly::new(vec![rat_int(0), rat_int(-1), rat_int(0), rat_int(1)])
}

/// Interprets a bivariate polynomial of the shape c*y - u(x) as a graph
/// y = u(x)/c; used by the on-variety generator.
pub fn graph_from_poly(f: &MultiPoly) -> Option<UniPoly> {
    if f.dimension() != 2 || f.degree_in(1) != 1 {
        return None;
    }
    let mut c = BigRational::zero();
    let mut u_coeffs: Vec<BigRational> = Vec::new();
    for (m, coeff) in f.terms() {
        let (ex, ey) = (m.exponents()[0] as usize, m.exponents()[1]);
        match ey {
            0 => {
                if u_coeffs.len() <= ex {
                    u_coeffs.resize(ex + 1, BigRational::zero());
                }
                u_coeffs[ex] = -coeff;
            }
            1 => {
                if ex != 0 {
                    return None; // mixed x*y term: not a graph
                }
                c = coeff.clone();
            }
            _ => return None,
        }
    }
    if c.is_zero() {
        return None;
    }
    Some(UniPoly::new(
        u_coeffs.into_iter().map(|k| k / &c).collect(),
    ))
}

/// Builds the graph polynomial c*y - u(x) for tests and file generation.
pub fn graph_poly(q: &UniPoly) -> MultiPoly {
    let mut terms: Vec<(Monomial, BigRational)> = vec![(
        Monomial::new(vec![0, 1]),
        BigRational::one(),
    )];
    for (i, c) in q.coeffs().iter().enumerate() {
        if !c.is_zero() {
            terms.push((Monomial::new(vec![i as u32, 0]), -c));
        }
    }
    MultiPoly::from_terms(2, terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polycore::SignValue;

    #[test]
    fn uniform_box_deterministic_and_in_range() {
        let a = generate_points(&Distribution::UniformBox, 50, 3, 11, WeightMode::Unit);
        let b = generate_points(&Distribution::UniformBox, 50, 3, 11, WeightMode::Unit);
        assert_eq!(a, b);
        for p in a.points() {
            for c in p.coords() {
                assert!(*c >= rat_int(0) && *c <= rat_int(1));
            }
        }
    }

    #[test]
    fn circle_points_satisfy_equation_exactly() {
        let pts = generate_points(&Distribution::OnCircle, 100, 2, 3, WeightMode::Unit);
        let f = circle_poly();
        for p in pts.points() {
            assert_eq!(f.eval_sign(p), SignValue::Zero);
        }
    }

    #[test]
    fn grid_has_requested_count() {
        let pts = generate_points(&Distribution::Grid, 256, 2, 0, WeightMode::Unit);
        assert_eq!(pts.len(), 256);
    }

    #[test]
    fn graph_points_on_cubic() {
        let q = cubic_graph();
        let pts = generate_points(
            &Distribution::OnGraph { q: q.clone() },
            80,
            2,
            5,
            WeightMode::Random,
        );
        let f = graph_poly(&q);
        for p in pts.points() {
            assert_eq!(f.eval_sign(p), SignValue::Zero);
        }
        // Round-trip through the polynomial form.
        let back = graph_from_poly(&f).unwrap();
        assert_eq!(back, q);
    }

    #[test]
    fn ranges_deterministic_under_seed() {
        let a = generate_ranges(RangeFamily::Mixed, 20, 2, 9);
        let b = generate_ranges(RangeFamily::Mixed, 20, 2, 9);
        assert_eq!(a, b);
    }
}
