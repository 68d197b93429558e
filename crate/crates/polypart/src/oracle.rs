//! Brute-force ground truth: exact linear-scan range counting and reporting.

use crate::partition::{Weight, WeightedPointSet};
use crate::ranges::SemialgebraicRange;
use num_rational::BigRational;

/// Exact cumulative weight of the points inside the range. Additions only.
pub fn oracle_count(pts: &WeightedPointSet, range: &SemialgebraicRange) -> BigRational {
    let mut acc = Weight::zero();
    for i in 0..pts.len() {
        if range.contains(pts.point(i)) {
            acc += pts.weight(i);
        }
    }
    acc.into_rational()
}

/// Indices of the points inside the range, ascending.
pub fn oracle_report(pts: &WeightedPointSet, range: &SemialgebraicRange) -> Vec<usize> {
    (0..pts.len())
        .filter(|&i| range.contains(pts.point(i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rat_int;
    use crate::polycore::RationalPoint;
    use crate::ranges::make_ball;
    use num_traits::Zero;

    fn disk_example() -> (WeightedPointSet, SemialgebraicRange) {
        let pts = WeightedPointSet::new(
            vec![
                RationalPoint::new(vec![rat_int(0), rat_int(0)]),
                RationalPoint::new(vec![rat_int(1), rat_int(0)]),
                RationalPoint::new(vec![rat_int(2), rat_int(0)]),
            ],
            vec![rat_int(2), rat_int(3), rat_int(5)],
        )
        .unwrap();
        let disk = make_ball(&[rat_int(0), rat_int(0)], &rat_int(1));
        (pts, disk)
    }

    #[test]
    fn count_counts_boundary_points() {
        let (pts, disk) = disk_example();
        assert_eq!(oracle_count(&pts, &disk), rat_int(5));
    }

    #[test]
    fn report_is_sorted_and_consistent_with_count() {
        let (pts, disk) = disk_example();
        let rep = oracle_report(&pts, &disk);
        assert_eq!(rep, vec![0, 1]);
        let sum: BigRational = rep.iter().map(|&i| pts.weight(i).clone()).sum();
        assert_eq!(sum, oracle_count(&pts, &disk));
        // Empty and all-containing ranges.
        let far = make_ball(&[rat_int(100), rat_int(100)], &rat_int(1));
        assert!(oracle_count(&pts, &far).is_zero());
        assert!(oracle_report(&pts, &far).is_empty());
        let all = make_ball(&[rat_int(0), rat_int(0)], &rat_int(100));
        assert_eq!(oracle_report(&pts, &all), vec![0, 1, 2]);
    }
}
