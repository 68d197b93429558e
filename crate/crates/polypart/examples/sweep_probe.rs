use polypart::datagen::{generate_points, Distribution, WeightMode};
use polypart::dissector::{build_dissector_with, DissectInput, DissectorConfig};
use rand::{Rng, SeedableRng};

fn main() {
    // Families shaped like a late partition phase: many small contiguous
    // blobs of a uniform set.
    for &k in &[80usize, 150, 220, 300] {
        let per = 110usize;
        let n = k * per;
        let pts = generate_points(&Distribution::UniformBox, n, 2, 7, WeightMode::Unit);
        // sort indices by x then chunk: contiguous-ish blobs
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| pts.point(a).coord(0).cmp(pts.point(b).coord(0)));
        let families: Vec<Vec<usize>> = idx.chunks(per).map(|c| c.to_vec()).collect();
        let input = DissectInput { families, d: 2 };
        let cfg = DissectorConfig { max_trials: 40, exact_solve_max_k: 64 };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let t0 = std::time::Instant::now();
        match build_dissector_with(&input, &pts, &cfg, &mut rng) {
            Ok((res, _)) => eprintln!(
                "k={k}: ok in {} trials ({:.1}s), dissected {} of {k}, misses {:?}",
                res.trials_used,
                t0.elapsed().as_secs_f64(),
                res.dissected.len(),
                &res.trial_miss_counts
            ),
            Err(e) => eprintln!("k={k}: FAILED after {:.1}s: {e}", t0.elapsed().as_secs_f64()),
        }
    }
}
