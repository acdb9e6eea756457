//! Exact few-atom references and the three-atom model comparison.
//!
//! Two independent references are provided. `exact_steady_state` solves the
//! full joint master equation of up to four atoms with arbitrary pairwise
//! couplings. `chain_stationary` computes the exact stationary distribution
//! of the resampling Markov chain itself for a small system, by assembling
//! its transition matrix over all classical configurations; agreement with
//! the sampled chain validates the engine, and comparison against the full
//! joint solution quantifies the model error of a given partition.

use std::collections::HashMap;
use std::sync::Arc;

use crate::engine::{effective_detuning, run_trajectory, McConfig, MicroState, SolveCache};
use crate::error::{Error, Result};
use crate::geometry::{PairPartition, PartitionMode, Position};
use crate::liouvillian::{build_generator, GeneratorMatrix, MAX_EXACT_ATOMS};
use crate::physics::{DriveParams, InteractionSpec};
use crate::rng::trajectory_seed;
use crate::steady::steady_state;

/// Exact joint steady state of a small fully coupled ensemble.
#[derive(Clone, Debug)]
pub struct ExactSolution {
    /// Probability of each classical configuration, atom 0 as the most
    /// significant digit.
    pub joint: Vec<f64>,
    /// Top-level probability per atom.
    pub per_atom_top: Vec<f64>,
    /// Mean of `per_atom_top`.
    pub top_fraction: f64,
}

fn digit(config: usize, atom: usize, atoms: usize, d: usize) -> usize {
    config / d.pow((atoms - 1 - atom) as u32) % d
}

fn with_digit(config: usize, atom: usize, atoms: usize, d: usize, value: usize) -> usize {
    let stride = d.pow((atoms - 1 - atom) as u32);
    let old = config / stride % d;
    config - old * stride + value * stride
}

fn marginals(joint: &[f64], atoms: usize, d: usize) -> ExactSolution {
    let mut per_atom_top = vec![0.0; atoms];
    for (h, &p) in joint.iter().enumerate() {
        for (a, top) in per_atom_top.iter_mut().enumerate() {
            if digit(h, a, atoms, d) == d - 1 {
                *top += p;
            }
        }
    }
    let top_fraction = per_atom_top.iter().sum::<f64>() / atoms as f64;
    ExactSolution { joint: joint.to_vec(), per_atom_top, top_fraction }
}

/// Solves the full joint master equation for `atoms` atoms with the given
/// pairwise couplings (`atoms` x `atoms`, row-major, diagonal ignored) at
/// the common laser detuning from `params`.
pub fn exact_steady_state(
    params: &DriveParams,
    couplings: &[f64],
    atoms: usize,
) -> Result<ExactSolution> {
    let deltas = vec![params.delta; atoms];
    let m = build_generator(params, &deltas, couplings)?;
    let joint = steady_state(&m)?.populations;
    Ok(marginals(&joint, atoms, params.scheme.levels()))
}

/// Exact stationary distribution of the resampling chain on a small system:
/// the transition matrix over all `d^n` configurations is assembled from
/// the same conditional solves the engine performs, and its fixed point is
/// extracted with the null-space solver.
pub fn chain_stationary(
    params: &DriveParams,
    interaction: &InteractionSpec,
    positions: &[Position],
    partition: &PairPartition,
) -> Result<ExactSolution> {
    params.validate()?;
    interaction.validate()?;
    let n = positions.len();
    if n == 0 || n > MAX_EXACT_ATOMS {
        return Err(Error::SizeLimit { atoms: n, limit: MAX_EXACT_ATOMS });
    }
    let units = partition.units();
    if units == 0 {
        return Err(Error::EmptyPartition);
    }
    let d = params.scheme.levels();
    let dim = d.pow(n as u32);
    let weight = 1.0 / units as f64;
    let mut cache = SolveCache::new(false);
    // conditional populations depend only on the unit and the configuration
    // of the atoms outside it, so memoize per (unit, complement) locally
    let mut conditionals: HashMap<(usize, usize), Arc<[f64]>> = HashMap::new();
    let mut triplets: Vec<(u32, u32, f64)> = Vec::new();

    for c in 0..dim {
        let mut state = MicroState::all_ground(n, params.scheme);
        for a in 0..n {
            state.set_level(a as u32, digit(c, a, n, d) as u8);
        }
        for u in 0..units {
            if u < partition.pairs.len() {
                let (i, j) = partition.pairs[u];
                let rest =
                    with_digit(with_digit(c, i as usize, n, d, 0), j as usize, n, d, 0);
                let sigma = match conditionals.get(&(u, rest)) {
                    Some(hit) => hit.clone(),
                    None => {
                        let d1 = effective_detuning(
                            &state, positions, interaction, params.delta, i, Some(j),
                        )?;
                        let d2 = effective_detuning(
                            &state, positions, interaction, params.delta, j, Some(i),
                        )?;
                        let v = interaction.coupling(i as usize, j as usize, positions)?;
                        let sol = cache.pair_populations(params, d1, d2, v)?;
                        conditionals.insert((u, rest), sol.clone());
                        sol
                    }
                };
                for (x, &p) in sigma.iter().enumerate() {
                    let cc = with_digit(
                        with_digit(c, i as usize, n, d, x / d),
                        j as usize,
                        n,
                        d,
                        x % d,
                    );
                    triplets.push((cc as u32, c as u32, weight * p));
                }
            } else {
                let a = partition.singles[u - partition.pairs.len()];
                let rest = with_digit(c, a as usize, n, d, 0);
                let sigma = match conditionals.get(&(u, rest)) {
                    Some(hit) => hit.clone(),
                    None => {
                        let da = effective_detuning(
                            &state, positions, interaction, params.delta, a, None,
                        )?;
                        let sol = cache.single_populations(params, da)?;
                        conditionals.insert((u, rest), sol.clone());
                        sol
                    }
                };
                for (x, &p) in sigma.iter().enumerate() {
                    let cc = with_digit(c, a as usize, n, d, x);
                    triplets.push((cc as u32, c as u32, weight * p));
                }
            }
        }
        triplets.push((c as u32, c as u32, -1.0));
    }

    let m = GeneratorMatrix::from_triplets(dim, 0, triplets);
    let pi = steady_state(&m)?.populations;
    Ok(marginals(&pi, n, d))
}

/// The three simplified treatments of the equilateral-plus-close-pair
/// three-atom system: atoms 0 and 1 share the fixed coupling `v12`, atom 2
/// couples to both with the swept strength `v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SimplifiedModel {
    /// Every atom a single unit; all couplings enter as detuning shifts.
    Singles,
    /// All three pairs treated exactly, sharing atoms.
    OverlappingPairs,
    /// Pair (0, 1) exact, atom 2 coupled through detuning shifts.
    PairPlusSingle,
}

impl SimplifiedModel {
    pub fn partition(self) -> PairPartition {
        match self {
            SimplifiedModel::Singles => PairPartition::all_singles(3),
            SimplifiedModel::OverlappingPairs => PairPartition::forced(
                vec![(0, 1), (0, 2), (1, 2)],
                vec![],
                PartitionMode::Overlapping,
            ),
            SimplifiedModel::PairPlusSingle => {
                PairPartition::forced(vec![(0, 1)], vec![2], PartitionMode::Disjoint)
            }
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SimplifiedModel::Singles => "a",
            SimplifiedModel::OverlappingPairs => "b",
            SimplifiedModel::PairPlusSingle => "c",
        }
    }
}

fn triangle_positions() -> Vec<Position> {
    vec![[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]
}

fn triangle_interaction(v12: f64, v: f64) -> InteractionSpec {
    InteractionSpec::vdw(0.0)
        .with_override(0, 1, v12)
        .with_override(0, 2, v)
        .with_override(1, 2, v)
}

fn triangle_couplings(v12: f64, v: f64) -> [f64; 9] {
    [0.0, v12, v, v12, 0.0, v, v, v, 0.0]
}

/// Top-level fraction of a simplified model sampled with the Monte Carlo
/// engine under a forced partition; returns the mean and its standard
/// error over `trajectories` independent one-snapshot chains.
pub fn model_top_fraction_mc(
    params: &DriveParams,
    v12: f64,
    v: f64,
    model: SimplifiedModel,
    trajectories: u32,
    master_seed: u64,
) -> Result<(f64, f64)> {
    let positions = triangle_positions();
    let interaction = triangle_interaction(v12, v);
    let partition = model.partition();
    let mc = McConfig { steps_per_atom: 10, samples_per_trajectory: 1, memoize: true };
    let mut cache = SolveCache::new(true);
    let mut sum = 0u64;
    let mut sum_sq = 0u64;
    for t in 0..trajectories {
        let seed = trajectory_seed(master_seed, 0, t as u64);
        run_trajectory(
            params,
            &interaction,
            &positions,
            &partition,
            &mc,
            seed,
            &mut cache,
            |s| {
                let n = s.top_count() as u64;
                sum += n;
                sum_sq += n * n;
            },
        )?;
    }
    let s = trajectories as f64;
    let mean_n = sum as f64 / s;
    let var_n = (sum_sq as f64 / s - mean_n * mean_n).max(0.0);
    Ok((mean_n / 3.0, (var_n / s).sqrt() / 3.0))
}

/// Top-level fraction of a simplified model from the exact stationary
/// distribution of its resampling chain; no statistical error.
pub fn model_top_fraction_chain(
    params: &DriveParams,
    v12: f64,
    v: f64,
    model: SimplifiedModel,
) -> Result<f64> {
    let sol = chain_stationary(
        params,
        &triangle_interaction(v12, v),
        &triangle_positions(),
        &model.partition(),
    )?;
    Ok(sol.top_fraction)
}

/// One grid point of the model-error map.
#[derive(Clone, Copy, Debug)]
pub struct DeviationPoint {
    pub delta: f64,
    pub v: f64,
    /// Exact mean top-level fraction of the three-atom system.
    pub exact: f64,
    /// Relative deviations |model - exact| / exact per model.
    pub dev_a: f64,
    pub dev_b: f64,
    pub dev_c: f64,
    /// Relative standard errors of the model estimates (zero when the
    /// chain evaluation is used).
    pub err_a: f64,
    pub err_b: f64,
    pub err_c: f64,
}

/// How the simplified models are evaluated in a deviation map.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelEvaluation {
    /// Monte Carlo with the given number of one-snapshot trajectories.
    MonteCarlo { trajectories: u32 },
    /// Exact chain stationary distribution.
    Chain,
}

/// Relative deviation of all three simplified models from the exact
/// three-atom solution over a (detuning, coupling) grid. Grid points where
/// the exact top fraction vanishes are skipped.
pub fn deviation_map(
    params: &DriveParams,
    v12: f64,
    deltas: &[f64],
    vs: &[f64],
    evaluation: ModelEvaluation,
    master_seed: u64,
) -> Result<Vec<DeviationPoint>> {
    let mut out = Vec::with_capacity(deltas.len() * vs.len());
    for &delta in deltas {
        let p = params.with_delta(delta);
        for &v in vs {
            let exact = exact_steady_state(&p, &triangle_couplings(v12, v), 3)?.top_fraction;
            if exact == 0.0 {
                continue;
            }
            let mut devs = [0.0; 3];
            let mut errs = [0.0; 3];
            for (k, model) in [
                SimplifiedModel::Singles,
                SimplifiedModel::OverlappingPairs,
                SimplifiedModel::PairPlusSingle,
            ]
            .into_iter()
            .enumerate()
            {
                let (frac, err) = match evaluation {
                    ModelEvaluation::MonteCarlo { trajectories } => {
                        model_top_fraction_mc(&p, v12, v, model, trajectories, master_seed)?
                    }
                    ModelEvaluation::Chain => {
                        (model_top_fraction_chain(&p, v12, v, model)?, 0.0)
                    }
                };
                devs[k] = (frac - exact).abs() / exact;
                errs[k] = err / exact;
            }
            out.push(DeviationPoint {
                delta,
                v,
                exact,
                dev_a: devs[0],
                dev_b: devs[1],
                dev_c: devs[2],
                err_a: errs[0],
                err_b: errs[1],
                err_c: errs[2],
            });
        }
    }
    Ok(out)
}

/// Default sweep of the third-atom coupling: 30 log-spaced values covering
/// 1e-2 to 10 MHz.
pub fn default_v_grid() -> Vec<f64> {
    (0..30).map(|k| 10f64.powf(-2.0 + 3.0 * k as f64 / 29.0)).collect()
}
