//! Executes a validated configuration: schedules one task per (scan point,
//! spatial realization) on a worker pool, merges the per-task tallies in a
//! fixed order, and writes CSV files stamped with the resolved settings.
//!
//! Determinism contract: every random stream is derived from the master
//! seed, the realization index, and the trajectory index alone, and merge
//! order is fixed by task construction order, so reruns with the same seed
//! produce byte-identical data regardless of the worker count. Realization
//! streams are shared across scan points on purpose: every point sees the
//! same spatial draws, so curves over the scan axis are not distorted by
//! geometry noise.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::engine::{run_trajectory, McConfig, SolveCache};
use crate::error::{Error, Result};
use crate::geometry::{
    build_partition, nearest_neighbor_scale, sample_positions, Geometry, PairPartition,
    Position,
};
use crate::observables::{BinStat, BinnedPairs, ObservableAccumulator};
use crate::oracle::{self, DeviationPoint, ModelEvaluation};
use crate::rng::{geometry_rng, trajectory_seed};

use super::config::{ExperimentConfig, ScanSection};

#[derive(Clone, Copy, Debug)]
pub struct DetuningPoint {
    pub delta: f64,
    pub rho33: f64,
    pub rho33_err: f64,
}

#[derive(Clone, Debug)]
pub struct DensityResult {
    pub density: f64,
    pub points: Vec<DetuningPoint>,
}

#[derive(Clone, Copy, Debug)]
pub struct CountingPoint {
    pub delta: f64,
    pub rho33: f64,
    pub rho33_err: f64,
    pub mean_count: f64,
    pub mandel_q: f64,
}

#[derive(Clone, Debug)]
pub struct PairCorrelationRun {
    pub delta: f64,
    pub rho33: f64,
    pub rho33_err: f64,
    pub bins: Vec<BinStat>,
    /// Pairs beyond the histogram range, so totals always balance.
    pub overflow: BinStat,
}

/// In-memory results of a run, one variant per scan kind.
#[derive(Clone, Debug)]
pub enum ScanResults {
    Detuning(Vec<DetuningPoint>),
    Density(Vec<DensityResult>),
    PairCorrelation(Vec<PairCorrelationRun>),
    Counting(Vec<CountingPoint>),
    Deviation(Vec<DeviationPoint>),
}

/// One ensemble scan point: a detuning and, for density scans, the gas
/// density that sizes the box.
#[derive(Clone, Copy, Debug)]
struct PointSpec {
    delta: f64,
    density: Option<f64>,
}

/// Runs the configured scan and returns the results without touching the
/// filesystem.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ScanResults> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;

    match config.scan {
        ScanSection::Detuning { ref deltas } => {
            let points: Vec<PointSpec> = deltas
                .values()?
                .into_iter()
                .map(|delta| PointSpec { delta, density: None })
                .collect();
            let merged = run_points(config, &pool, &points)?;
            let mut out = Vec::with_capacity(points.len());
            for (point, acc) in points.iter().zip(&merged) {
                let (rho33, rho33_err) = acc.rydberg_fraction()?;
                out.push(DetuningPoint { delta: point.delta, rho33, rho33_err });
            }
            Ok(ScanResults::Detuning(out))
        }
        ScanSection::Density { ref densities, ref deltas } => {
            let deltas = deltas.values()?;
            let mut out = Vec::with_capacity(densities.len());
            for &density in densities {
                let points: Vec<PointSpec> = deltas
                    .iter()
                    .map(|&delta| PointSpec { delta, density: Some(density) })
                    .collect();
                let merged = run_points(config, &pool, &points)?;
                let mut curve = Vec::with_capacity(points.len());
                for (point, acc) in points.iter().zip(&merged) {
                    let (rho33, rho33_err) = acc.rydberg_fraction()?;
                    curve.push(DetuningPoint { delta: point.delta, rho33, rho33_err });
                }
                out.push(DensityResult { density, points: curve });
            }
            Ok(ScanResults::Density(out))
        }
        ScanSection::PairCorrelation { ref deltas } => {
            let points: Vec<PointSpec> = deltas
                .values()?
                .into_iter()
                .map(|delta| PointSpec { delta, density: None })
                .collect();
            let merged = run_points(config, &pool, &points)?;
            let mut out = Vec::with_capacity(points.len());
            for (point, acc) in points.iter().zip(&merged) {
                let (rho33, rho33_err) = acc.rydberg_fraction()?;
                out.push(PairCorrelationRun {
                    delta: point.delta,
                    rho33,
                    rho33_err,
                    bins: acc.distance_bins()?,
                    overflow: acc.overflow_bin()?,
                });
            }
            Ok(ScanResults::PairCorrelation(out))
        }
        ScanSection::Counting { ref deltas } => {
            let points: Vec<PointSpec> = deltas
                .values()?
                .into_iter()
                .map(|delta| PointSpec { delta, density: None })
                .collect();
            let merged = run_points(config, &pool, &points)?;
            let mut out = Vec::with_capacity(points.len());
            for (point, acc) in points.iter().zip(&merged) {
                let (rho33, rho33_err) = acc.rydberg_fraction()?;
                let mandel_q = match acc.mandel_q() {
                    Ok(q) => q,
                    Err(Error::UndefinedObservable(_)) => f64::NAN,
                    Err(e) => return Err(e),
                };
                out.push(CountingPoint {
                    delta: point.delta,
                    rho33,
                    rho33_err,
                    mean_count: acc.mean_top_count()?,
                    mandel_q,
                });
            }
            Ok(ScanResults::Counting(out))
        }
        ScanSection::Deviation { v12, ref deltas, ref vs, chain } => {
            let deltas = deltas.values()?;
            let vs = match vs {
                Some(v) => v.clone(),
                None => oracle::default_v_grid(),
            };
            let evaluation = if chain {
                ModelEvaluation::Chain
            } else {
                ModelEvaluation::MonteCarlo { trajectories: config.mc.trajectories }
            };
            let drive = config.drive();
            let seed = config.mc.seed;
            let tasks: Vec<(f64, f64)> = deltas
                .iter()
                .flat_map(|&delta| vs.iter().map(move |&v| (delta, v)))
                .collect();
            let rows: Vec<Vec<DeviationPoint>> = pool.install(|| {
                tasks
                    .par_iter()
                    .map(|&(delta, v)| {
                        oracle::deviation_map(&drive, v12, &[delta], &[v], evaluation, seed)
                    })
                    .collect::<Result<_>>()
            })?;
            Ok(ScanResults::Deviation(rows.into_iter().flatten().collect()))
        }
    }
}

/// Runs the scan and writes its CSV outputs into `config.output.dir`.
pub fn run_and_write(config: &ExperimentConfig) -> Result<ScanResults> {
    let results = run_experiment(config)?;
    let dir = config.output.dir.clone();
    fs::create_dir_all(&dir)?;
    if config.output.dump_positions {
        write_positions(config, &dir)?;
    }
    let stamp = header_stamp(config)?;
    match &results {
        ScanResults::Detuning(points) => {
            write_detuning_csv(&dir.join("detuning_scan.csv"), &stamp, &[], points)?;
        }
        ScanResults::Density(curves) => {
            for (i, curve) in curves.iter().enumerate() {
                write_detuning_csv(
                    &dir.join(format!("density_scan_{i:03}.csv")),
                    &stamp,
                    &[format!("density = {}", curve.density)],
                    &curve.points,
                )?;
            }
        }
        ScanResults::PairCorrelation(runs) => {
            for (i, run) in runs.iter().enumerate() {
                write_pair_correlation_csv(
                    &dir.join(format!("pair_correlation_{i:03}.csv")),
                    &stamp,
                    run,
                )?;
            }
        }
        ScanResults::Counting(points) => {
            let rows = points.iter().map(|p| {
                format!(
                    "{},{},{},{},{}",
                    p.delta, p.rho33, p.rho33_err, p.mean_count, p.mandel_q
                )
            });
            write_csv(
                &dir.join("counting_scan.csv"),
                &stamp,
                &[],
                "delta,rho33,rho33_err,mean_count,mandel_q",
                rows,
            )?;
        }
        ScanResults::Deviation(points) => {
            let rows = points.iter().map(|p| {
                format!(
                    "{},{},{},{},{},{},{},{},{}",
                    p.delta, p.v, p.exact, p.dev_a, p.err_a, p.dev_b, p.err_b, p.dev_c,
                    p.err_c
                )
            });
            write_csv(
                &dir.join("deviation_map.csv"),
                &stamp,
                &[],
                "delta,v,exact,dev_a,err_a,dev_b,err_b,dev_c,err_c",
                rows,
            )?;
        }
    }
    Ok(results)
}

/// Merged accumulator per scan point, one task per (point, realization).
fn run_points(
    config: &ExperimentConfig,
    pool: &rayon::ThreadPool,
    points: &[PointSpec],
) -> Result<Vec<ObservableAccumulator>> {
    let realizations = config.mc.realizations;
    let tasks: Vec<(usize, u32)> = (0..points.len())
        .flat_map(|p| (0..realizations).map(move |r| (p, r)))
        .collect();
    let total = tasks.len();
    let outputs: Vec<(usize, ObservableAccumulator)> = pool.install(|| {
        tasks
            .par_iter()
            .enumerate()
            .map(|(k, &(p, r))| {
                let start = Instant::now();
                let acc = ensemble_task(config, &points[p], r)?;
                if !config.quiet {
                    eprintln!(
                        "task {}/{total} done: delta = {}, realization {r} ({:.1} s)",
                        k + 1,
                        points[p].delta,
                        start.elapsed().as_secs_f64()
                    );
                }
                Ok((p, acc))
            })
            .collect::<Result<_>>()
    })?;

    let mut merged: Vec<Option<ObservableAccumulator>> = Vec::new();
    merged.resize_with(points.len(), || None);
    for (p, acc) in outputs {
        match &mut merged[p] {
            Some(existing) => existing.merge(&acc)?,
            slot @ None => *slot = Some(acc),
        }
    }
    Ok(merged.into_iter().map(|m| m.expect("every point has tasks")).collect())
}

/// One spatial realization of one scan point: sample positions, build the
/// pair window, and tally snapshots from all trajectories.
fn ensemble_task(
    config: &ExperimentConfig,
    point: &PointSpec,
    realization: u32,
) -> Result<ObservableAccumulator> {
    let drive = config.drive().with_delta(point.delta);
    let interaction = config.interaction_spec()?;
    let geometry = config.geometry_section()?.resolve(point.density)?;
    let mut grng = geometry_rng(config.mc.seed, realization as u64);
    let positions = sample_positions(&geometry, &mut grng)?;
    let partition = resolve_partition(config, &positions)?;

    let (bin_width, nbins) = histogram_layout(config, &geometry);
    let binned = BinnedPairs::new(&positions, bin_width, nbins)?;
    let mut acc = ObservableAccumulator::new(bin_width, nbins)?;

    let mc = McConfig {
        steps_per_atom: config.mc.steps_per_atom,
        samples_per_trajectory: config.mc.samples_per_trajectory,
        memoize: config.mc.memoize,
    };
    let mut cache = SolveCache::new(config.mc.memoize);
    for t in 0..config.mc.trajectories {
        let seed = trajectory_seed(config.mc.seed, realization as u64, t as u64);
        let mut tally_error = None;
        run_trajectory(
            &drive,
            &interaction,
            &positions,
            &partition,
            &mc,
            seed,
            &mut cache,
            |state| {
                if tally_error.is_none() {
                    if let Err(e) = acc.accumulate(state, &binned) {
                        tally_error = Some(e);
                    }
                }
            },
        )?;
        if let Some(e) = tally_error {
            return Err(e);
        }
    }
    Ok(acc)
}

fn resolve_partition(
    config: &ExperimentConfig,
    positions: &[Position],
) -> Result<PairPartition> {
    let p = &config.partition;
    if p.sare {
        return Ok(PairPartition::all_singles(positions.len()));
    }
    let lower = p.l_lower.unwrap_or(0.0);
    let upper = match p.l_upper {
        Some(u) => u,
        None => nearest_neighbor_scale(positions)?,
    };
    build_partition(positions, lower, upper, p.mode)
}

fn histogram_layout(config: &ExperimentConfig, geometry: &Geometry) -> (f64, usize) {
    let width = config.output.bin_width;
    let r_max = config.output.r_max.unwrap_or_else(|| geometry.extent());
    let nbins = ((r_max / width).ceil() as usize).max(1);
    (width, nbins)
}

/// Comment block prepended to every CSV: version, seed, and the resolved
/// configuration echoed as TOML.
fn header_stamp(config: &ExperimentConfig) -> Result<String> {
    let mut out = String::new();
    out.push_str(&format!("# rydsim {}\n", env!("CARGO_PKG_VERSION")));
    out.push_str(&format!("# seed = {}\n", config.mc.seed));
    out.push_str("# config:\n");
    for line in config.to_toml()?.lines() {
        out.push_str("#   ");
        out.push_str(line);
        out.push('\n');
    }
    Ok(out)
}

fn write_csv(
    path: &Path,
    stamp: &str,
    extra: &[String],
    columns: &str,
    rows: impl IntoIterator<Item = String>,
) -> Result<()> {
    let mut text = String::with_capacity(stamp.len() + 4096);
    text.push_str(stamp);
    for line in extra {
        text.push_str("# ");
        text.push_str(line);
        text.push('\n');
    }
    text.push_str(columns);
    text.push('\n');
    for row in rows {
        text.push_str(&row);
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

fn write_detuning_csv(
    path: &Path,
    stamp: &str,
    extra: &[String],
    points: &[DetuningPoint],
) -> Result<()> {
    let rows = points
        .iter()
        .map(|p| format!("{},{},{}", p.delta, p.rho33, p.rho33_err));
    write_csv(path, stamp, extra, "delta,rho33,rho33_err", rows)
}

fn write_pair_correlation_csv(
    path: &Path,
    stamp: &str,
    run: &PairCorrelationRun,
) -> Result<()> {
    let extra = [
        format!("delta = {}", run.delta),
        format!("rho33 = {} +- {}", run.rho33, run.rho33_err),
        "last row collects all pairs beyond r_max".to_string(),
    ];
    let rows = run.bins.iter().chain(std::iter::once(&run.overflow)).map(|b| {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            b.r_lo,
            0.5 * (b.r_lo + b.r_hi),
            b.r_hi,
            b.pairs,
            b.coincidences,
            b.pair_probability,
            b.pair_probability_err,
            b.g2,
            b.g2_err
        )
    });
    write_csv(
        path,
        stamp,
        &extra,
        "r_lo,r_mid,r_hi,pairs,coincidences,pair_probability,pair_probability_err,g2,g2_err",
        rows,
    )
}

/// Writes the sampled positions of every realization (and, for density
/// scans, every density) so spatial draws can be inspected or replotted.
fn write_positions(config: &ExperimentConfig, dir: &Path) -> Result<()> {
    let stamp = header_stamp(config)?;
    let densities: Vec<Option<f64>> = match config.scan {
        ScanSection::Density { ref densities, .. } => {
            densities.iter().map(|&d| Some(d)).collect()
        }
        ScanSection::Deviation { .. } => return Ok(()),
        _ => vec![None],
    };
    for (di, &density) in densities.iter().enumerate() {
        let geometry = config.geometry_section()?.resolve(density)?;
        for r in 0..config.mc.realizations {
            let mut grng = geometry_rng(config.mc.seed, r as u64);
            let positions = sample_positions(&geometry, &mut grng)?;
            let name = if density.is_some() {
                format!("positions_d{di:03}_r{r:03}.csv")
            } else {
                format!("positions_r{r:03}.csv")
            };
            let rows = positions
                .iter()
                .enumerate()
                .map(|(a, p)| format!("{a},{},{},{}", p[0], p[1], p[2]));
            write_csv(&dir.join(name), &stamp, &[], "atom,x,y,z", rows)?;
        }
    }
    Ok(())
}
