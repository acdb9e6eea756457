//! Shared test oracles, deliberately built on different numerics than the
//! code they check: dense Gaussian elimination instead of sparse QR, and
//! stepwise Taylor propagation instead of any stationary solve.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rydsim::liouvillian::{build_pair_generator, build_single_generator, GeneratorMatrix};
use rydsim::physics::{DriveParams, LevelScheme};

/// Valid drive parameters spanning weak to saturated driving.
pub fn random_drive(rng: &mut ChaCha8Rng, scheme: LevelScheme) -> DriveParams {
    let three = scheme == LevelScheme::ThreeLevel;
    DriveParams {
        scheme,
        omega12: rng.gen_range(0.2..5.0),
        omega23: if three { rng.gen_range(0.2..5.0) } else { 0.0 },
        delta: rng.gen_range(-50.0..50.0),
        gamma21: rng.gen_range(0.5..10.0),
        gamma32: if three { rng.gen_range(0.005..1.0) } else { 0.0 },
        deph21: rng.gen_range(0.0..1.0),
        deph32: if three { rng.gen_range(0.0..1.0) } else { 0.0 },
    }
}

/// Random single or pair generator, cycling through both level schemes and
/// blockaded to antiblockaded shift ranges.
pub fn random_generator(rng: &mut ChaCha8Rng, draw: usize) -> GeneratorMatrix {
    let scheme = if draw % 2 == 0 { LevelScheme::TwoLevel } else { LevelScheme::ThreeLevel };
    let p = random_drive(rng, scheme);
    if draw % 4 < 2 {
        build_single_generator(&p, rng.gen_range(-50.0..50.0)).unwrap()
    } else {
        build_pair_generator(
            &p,
            rng.gen_range(-50.0..50.0),
            rng.gen_range(-50.0..50.0),
            rng.gen_range(-100.0..100.0),
        )
        .unwrap()
    }
}

/// Dense row-major copy of a sparse generator.
pub fn dense_of(m: &GeneratorMatrix) -> Vec<Vec<f64>> {
    let dim = m.dim();
    let mut a = vec![vec![0.0; dim]; dim];
    for &(r, c, v) in m.entries() {
        a[r as usize][c as usize] += v;
    }
    a
}

/// Largest absolute row sum of the generator.
pub fn inf_norm(m: &GeneratorMatrix) -> f64 {
    let mut row_sum = vec![0.0; m.dim()];
    for &(r, _, v) in m.entries() {
        row_sum[r as usize] += v.abs();
    }
    row_sum.into_iter().fold(0.0, f64::max)
}

/// Unique stationary vector by dense elimination. The generator conserves
/// the trace, so its population rows are linearly dependent; replacing the
/// last row (a population row) with the trace functional and solving
/// against a unit right-hand side pins the normalized steady state.
/// Panics when the reduced system is singular, i.e. when the stationary
/// vector is not unique.
pub fn dense_steady(m: &GeneratorMatrix) -> Vec<f64> {
    let dim = m.dim();
    let mut a = dense_of(m);
    let mut b = vec![0.0; dim];
    for x in a[dim - 1].iter_mut() {
        *x = 0.0;
    }
    for j in m.population_offset()..dim {
        a[dim - 1][j] = 1.0;
    }
    b[dim - 1] = 1.0;

    let scale = a
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0f64, |acc, &x| acc.max(x.abs()));
    for k in 0..dim {
        let piv = (k..dim)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap();
        assert!(
            a[piv][k].abs() > 1e-13 * scale,
            "dense elimination hit a vanishing pivot at column {k}"
        );
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..dim {
            let f = a[i][k] / a[k][k];
            if f == 0.0 {
                continue;
            }
            for j in k..dim {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; dim];
    for k in (0..dim).rev() {
        let mut s = b[k];
        for j in k + 1..dim {
            s -= a[k][j] * x[j];
        }
        x[k] = s / a[k][k];
    }
    x
}

/// Action of `exp(t M)` on a start vector: many short steps, each summing
/// the Taylor series of the step propagator. The step length keeps
/// `|h| * norm(M)` at one half, well inside the series' comfort zone.
pub fn propagate(m: &GeneratorMatrix, start: &[f64], t: f64) -> Vec<f64> {
    let rate = inf_norm(m).max(1e-12);
    let steps = (2.0 * t * rate).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let mut x = start.to_vec();
    let mut term = vec![0.0; x.len()];
    let mut next = vec![0.0; x.len()];
    for _ in 0..steps {
        term.copy_from_slice(&x);
        for k in 1..200 {
            m.apply(&term, &mut next);
            let f = h / k as f64;
            for (t_i, &n_i) in term.iter_mut().zip(&next) {
                *t_i = f * n_i;
            }
            let mut tmax = 0.0f64;
            let mut xmax = 0.0f64;
            for (x_i, &t_i) in x.iter_mut().zip(&term) {
                *x_i += t_i;
                tmax = tmax.max(t_i.abs());
                xmax = xmax.max(x_i.abs());
            }
            if tmax <= 1e-18 * xmax {
                break;
            }
        }
    }
    x
}

/// Pearson statistic of observed counts against model probabilities.
/// Categories expecting fewer than ten counts are pooled into one residual
/// bin. Returns the statistic and the degrees of freedom (bins minus one).
pub fn chi_square(observed: &[u64], probs: &[f64]) -> (f64, usize) {
    assert_eq!(observed.len(), probs.len());
    let n = observed.iter().sum::<u64>() as f64;
    let mut stat = 0.0;
    let mut bins = 0usize;
    let mut pooled_obs = 0.0;
    let mut pooled_exp = 0.0;
    for (&o, &p) in observed.iter().zip(probs) {
        let e = n * p;
        if e < 10.0 {
            pooled_obs += o as f64;
            pooled_exp += e;
        } else {
            stat += (o as f64 - e).powi(2) / e;
            bins += 1;
        }
    }
    if pooled_exp > 0.0 || pooled_obs > 0.0 {
        stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp.max(1e-300);
        bins += 1;
    }
    (stat, bins.saturating_sub(1))
}

/// 99.9th percentile of the chi-square distribution by degrees of freedom;
/// a sampled statistic above this rejects distributional agreement.
pub fn chi2_crit(dof: usize) -> f64 {
    const TABLE: [f64; 15] = [
        10.828, 13.816, 16.266, 18.467, 20.515, 22.458, 24.322, 26.124, 27.877,
        29.588, 31.264, 32.909, 34.528, 36.123, 37.697,
    ];
    assert!(
        (1..=TABLE.len()).contains(&dof),
        "no tabulated critical value for {dof} degrees of freedom"
    );
    TABLE[dof - 1]
}

/// Largest absolute component difference between two vectors.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}
