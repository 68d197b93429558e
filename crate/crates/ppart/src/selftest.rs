//! Bundled invariant corpus: a condensed version of the acceptance checks
//! that runs in seconds and exercises every subsystem.

use polypart::datagen::{
    circle_poly, generate_points, generate_ranges, Distribution, RangeFamily, WeightMode,
};
use polypart::dissector::{build_dissector, DissectInput};
use polypart::numeric::rat_int;
use polypart::oracle::{oracle_count, oracle_report};
use polypart::partition::build_partition;
use polypart::patches2d::decompose_arcs;
use polypart::tree::{build_tree, ExceptionalStrategy, TreeParams};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run() -> bool {
    let mut ok = true;
    ok &= section("oracle equivalence", oracle_equivalence);
    ok &= section("partition invariants", partition_invariants);
    ok &= section("dissector statistics", dissector_statistics);
    ok &= section("plane-curve arcs", plane_curve_arcs);
    if ok {
        println!("selftest: PASS");
    } else {
        println!("selftest: FAIL");
    }
    ok
}

fn section(name: &str, f: fn() -> Result<String, String>) -> bool {
    match f() {
        Ok(detail) => {
            println!("selftest[{name}]: ok — {detail}");
            true
        }
        Err(e) => {
            println!("selftest[{name}]: FAILED — {e}");
            false
        }
    }
}

fn oracle_equivalence() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE);
    let mut queries = 0usize;
    for inst in 0..60u64 {
        let d = if inst % 2 == 0 { 2 } else { 3 };
        let n = rng.random_range(1..=400);
        let dist = match inst % 4 {
            0 => Distribution::UniformBox,
            1 => Distribution::GaussianClusters { clusters: 3 },
            2 if d == 2 => Distribution::OnCircle,
            _ => Distribution::Grid,
        };
        let pts = generate_points(&dist, n, d, 100 + inst, WeightMode::Unit);
        let strategy = if inst % 2 == 0 {
            ExceptionalStrategy::Inline
        } else {
            ExceptionalStrategy::Patches2d
        };
        let params = TreeParams {
            r: 8,
            n0: 16,
            strategy,
            seed: 500 + inst,
            ..TreeParams::default()
        };
        let tree = build_tree(pts.clone(), params).map_err(|e| e.to_string())?;
        for range in generate_ranges(RangeFamily::Mixed, 4, d, 900 + inst) {
            let (count, fuzzy, _) = tree.query_count(&range);
            if fuzzy {
                return Err(format!("instance {inst}: unexpected fuzzy answer"));
            }
            if count != oracle_count(&pts, &range) {
                return Err(format!("instance {inst}: count mismatch"));
            }
            if tree.query_report(&range).0 != oracle_report(&pts, &range) {
                return Err(format!("instance {inst}: report mismatch"));
            }
            queries += 1;
        }
    }
    Ok(format!("{queries} queries match the oracle across 60 instances"))
}

fn partition_invariants() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xBA1A);
    for inst in 0..30u64 {
        let n = rng.random_range(2..=800);
        let r = rng.random_range(2..=32).min(n as i64);
        let pts = generate_points(
            &Distribution::UniformBox,
            n,
            2,
            3131 + inst,
            WeightMode::Unit,
        );
        // Balance, phase and halving bounds are hard assertions inside the
        // build; reaching here means they held.
        let part = build_partition(&pts, &rat_int(r), &mut rng).map_err(|e| e.to_string())?;
        let stats = part.partition_stats();
        if stats.max_cell_size > part.cell_capacity() {
            return Err(format!("instance {inst}: balance violated"));
        }
    }
    Ok("30 builds satisfied balance, phase and halving bounds".into())
}

fn dissector_statistics() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xD15C);
    let mut trials = 0usize;
    for inst in 0..100u64 {
        let k = rng.random_range(1..=12);
        let sizes: Vec<usize> = (0..k).map(|_| rng.random_range(1..=48)).collect();
        let n: usize = sizes.iter().sum();
        let pts = generate_points(&Distribution::UniformBox, n, 2, 777 + inst, WeightMode::Unit);
        let mut families = Vec::new();
        let mut next = 0;
        for s in sizes {
            families.push((next..next + s).collect());
            next += s;
        }
        let input = DissectInput { families, d: 2 };
        let res = build_dissector(&input, &pts, &mut rng).map_err(|e| e.to_string())?;
        trials += res.trials_used;
    }
    let mean = trials as f64 / 100.0;
    if mean > 4.0 {
        return Err(format!("mean trials {mean:.2} exceeds 4"));
    }
    Ok(format!("mean trials {mean:.2} over 100 calls"))
}

fn plane_curve_arcs() -> Result<String, String> {
    let pts = generate_points(&Distribution::OnCircle, 120, 2, 4242, WeightMode::Unit);
    let members: Vec<usize> = (0..pts.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA4C5);
    let (decomp, store) =
        decompose_arcs(&circle_poly(), &pts, &members, &mut rng).map_err(|e| e.to_string())?;
    decomp.audit(&store, &pts)?;
    for range in generate_ranges(RangeFamily::Balls, 30, 2, 555) {
        let got = polypart::patches2d::arc_query(&store, &decomp, &range, &pts);
        if got != oracle_count(&pts, &range) {
            return Err("arc query disagrees with the oracle".into());
        }
    }
    Ok("arc assignments audited; 30 queries exact".into())
}
