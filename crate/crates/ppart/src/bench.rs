//! Benchmark workloads: build trees over a size sweep, time queries, verify
//! counts against the oracle on request, and fit log-log scaling slopes.

use anyhow::{bail, Context, Result};
use polypart::datagen::{self, Distribution, RangeFamily, WeightMode};
use polypart::numeric::parse_rational_str;
use polypart::oracle::oracle_count;
use polypart::tree::{build_tree, ExceptionalStrategy, QueryStats, TreeParams};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Deserialize, Serialize, Clone)]
pub struct Workload {
    pub dataset: DatasetSpec,
    pub sizes: Vec<usize>,
    pub queries: QuerySpec,
    #[serde(default)]
    pub tree: TreeSpec,
    /// When set, every count is checked against the oracle (slow).
    #[serde(default)]
    pub verify: bool,
}

#[derive(Deserialize, Serialize, Clone)]
pub struct DatasetSpec {
    /// uniform-box | gaussian-clusters | on-circle | grid
    pub dist: String,
    pub d: usize,
    pub seed: u64,
    #[serde(default)]
    pub clusters: Option<usize>,
    #[serde(default)]
    pub random_weights: bool,
}

#[derive(Deserialize, Serialize, Clone)]
pub struct QuerySpec {
    pub family: String,
    pub count: usize,
    pub seed: u64,
}

#[derive(Deserialize, Serialize, Clone)]
pub struct TreeSpec {
    pub r: usize,
    pub n0: usize,
    pub strategy: String,
    pub fuzz_eps: String,
    pub seed: u64,
}

impl Default for TreeSpec {
    fn default() -> TreeSpec {
        TreeSpec {
            r: 16,
            n0: 32,
            strategy: "inline".into(),
            fuzz_eps: "1/1048576".into(),
            seed: 0,
        }
    }
}

#[derive(Serialize)]
pub struct BenchReport {
    pub version: u32,
    pub env: EnvInfo,
    pub workload: Workload,
    pub records: Vec<SizeRecord>,
    pub fits: Fits,
}

#[derive(Serialize)]
pub struct EnvInfo {
    pub os: &'static str,
    pub arch: &'static str,
    pub threads: usize,
}

#[derive(Serialize)]
pub struct SizeRecord {
    pub n: usize,
    pub build_seconds: f64,
    pub mean_query_seconds: f64,
    pub median_query_seconds: f64,
    pub mean_stats: MeanStats,
    pub counts_verified: bool,
}

#[derive(Serialize, Default)]
pub struct MeanStats {
    pub nodes_visited: f64,
    pub cells_inside: f64,
    pub cells_outside: f64,
    pub cells_unknown: f64,
    pub leaf_points_scanned: f64,
    pub exceptional_points_scanned: f64,
}

#[derive(Serialize)]
pub struct Fits {
    pub nodes_visited_vs_n: FitLine,
    pub mean_query_seconds_vs_n: FitLine,
    pub build_seconds_vs_n: FitLine,
}

#[derive(Serialize)]
pub struct FitLine {
    pub slope: f64,
    pub intercept: f64,
    pub rms_residual: f64,
}

/// Least squares on (log2 x, log2 y).
pub fn log_log_fit(points: &[(f64, f64)]) -> FitLine {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.log2(), y.log2()))
        .collect();
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    let slope = if denom.abs() < 1e-12 {
        0.0
    } else {
        (n * sxy - sx * sy) / denom
    };
    let intercept = (sy - slope * sx) / n;
    let rms = (pts
        .iter()
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum::<f64>()
        / n)
        .sqrt();
    FitLine {
        slope,
        intercept,
        rms_residual: rms,
    }
}

fn parse_dist(spec: &DatasetSpec) -> Result<Distribution> {
    Ok(match spec.dist.as_str() {
        "uniform-box" => Distribution::UniformBox,
        "gaussian-clusters" => Distribution::GaussianClusters {
            clusters: spec.clusters.unwrap_or(4),
        },
        "on-circle" => Distribution::OnCircle,
        "grid" => Distribution::Grid,
        other => bail!("unknown distribution {other:?} in workload"),
    })
}

fn parse_tree_spec(spec: &TreeSpec) -> Result<TreeParams> {
    let strategy = match spec.strategy.as_str() {
        "inline" => ExceptionalStrategy::Inline,
        "patches2d" => ExceptionalStrategy::Patches2d,
        "fuzzy" => ExceptionalStrategy::Fuzzy,
        other => bail!("unknown strategy {other:?} in workload"),
    };
    Ok(TreeParams {
        r: spec.r,
        n0: spec.n0,
        strategy,
        fuzz_eps: parse_rational_str(&spec.fuzz_eps)
            .with_context(|| format!("invalid fuzz_eps {:?}", spec.fuzz_eps))?,
        seed: spec.seed,
    })
}

pub fn run(workload_path: &Path, out_path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(workload_path)
        .with_context(|| format!("cannot read workload {}", workload_path.display()))?;
    let workload: Workload = serde_json::from_str(&text)
        .with_context(|| format!("{}: malformed workload", workload_path.display()))?;
    if workload.sizes.len() < 4 {
        bail!("workload must sweep at least 4 sizes for the scaling fits");
    }
    let dist = parse_dist(&workload.dataset)?;
    let family = RangeFamily::parse(&workload.queries.family)
        .with_context(|| format!("unknown range family {:?}", workload.queries.family))?;
    let params = parse_tree_spec(&workload.tree)?;
    let weights = if workload.dataset.random_weights {
        WeightMode::Random
    } else {
        WeightMode::Unit
    };

    let mut records = Vec::new();
    for &n in &workload.sizes {
        let pts = datagen::generate_points(&dist, n, workload.dataset.d, workload.dataset.seed, weights);
        let ranges = datagen::generate_ranges(
            family,
            workload.queries.count,
            workload.dataset.d,
            workload.queries.seed,
        );
        let t0 = std::time::Instant::now();
        let tree = build_tree(pts.clone(), params.clone())?;
        let build_seconds = t0.elapsed().as_secs_f64();

        let mut sum = QueryStatsSum::default();
        let mut times = Vec::with_capacity(ranges.len());
        let mut verified = workload.verify;
        for range in &ranges {
            let t = std::time::Instant::now();
            let (count, fuzzy, stats) = tree.query_count(range);
            times.push(t.elapsed().as_secs_f64());
            sum.add(&stats);
            if workload.verify && !fuzzy && count != oracle_count(&pts, range) {
                verified = false;
            }
        }
        times.sort_by(f64::total_cmp);
        let mean_query_seconds = times.iter().sum::<f64>() / times.len().max(1) as f64;
        let median_query_seconds = times.get(times.len() / 2).copied().unwrap_or(0.0);
        records.push(SizeRecord {
            n,
            build_seconds,
            mean_query_seconds,
            median_query_seconds,
            mean_stats: sum.mean(ranges.len()),
            counts_verified: verified,
        });
        eprintln!(
            "bench n={n}: build {build_seconds:.2}s, mean query {:.3}ms",
            mean_query_seconds * 1e3
        );
    }

    let fits = Fits {
        nodes_visited_vs_n: log_log_fit(
            &records
                .iter()
                .map(|r| (r.n as f64, r.mean_stats.nodes_visited))
                .collect::<Vec<_>>(),
        ),
        mean_query_seconds_vs_n: log_log_fit(
            &records
                .iter()
                .map(|r| (r.n as f64, r.mean_query_seconds))
                .collect::<Vec<_>>(),
        ),
        build_seconds_vs_n: log_log_fit(
            &records
                .iter()
                .map(|r| (r.n as f64, r.build_seconds))
                .collect::<Vec<_>>(),
        ),
    };
    let report = BenchReport {
        version: 1,
        env: EnvInfo {
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
        },
        workload,
        records,
        fits,
    };
    std::fs::write(out_path, serde_json::to_string_pretty(&report)?)
        .with_context(|| format!("cannot write {}", out_path.display()))?;
    eprintln!(
        "bench report: nodes_visited slope {:.3} -> {}",
        report.fits.nodes_visited_vs_n.slope,
        out_path.display()
    );
    Ok(())
}

#[derive(Default)]
struct QueryStatsSum {
    nodes_visited: u64,
    cells_inside: u64,
    cells_outside: u64,
    cells_unknown: u64,
    leaf_points_scanned: u64,
    exceptional_points_scanned: u64,
}

impl QueryStatsSum {
    fn add(&mut self, s: &QueryStats) {
        self.nodes_visited += s.nodes_visited;
        self.cells_inside += s.cells_inside;
        self.cells_outside += s.cells_outside;
        self.cells_unknown += s.cells_unknown;
        self.leaf_points_scanned += s.leaf_points_scanned;
        self.exceptional_points_scanned += s.exceptional_points_scanned;
    }

    fn mean(&self, n: usize) -> MeanStats {
        let n = n.max(1) as f64;
        MeanStats {
            nodes_visited: self.nodes_visited as f64 / n,
            cells_inside: self.cells_inside as f64 / n,
            cells_outside: self.cells_outside as f64 / n,
            cells_unknown: self.cells_unknown as f64 / n,
            leaf_points_scanned: self.leaf_points_scanned as f64 / n,
            exceptional_points_scanned: self.exceptional_points_scanned as f64 / n,
        }
    }
}
