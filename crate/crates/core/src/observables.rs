//! Ensemble observables estimated from configuration snapshots.
//!
//! Accumulators keep exact integer tallies (snapshot counts, top-level
//! counts and their squares, distance-binned pair and coincidence counts),
//! so partial results from split workloads merge into byte-identical
//! totals regardless of how the work was divided. Derived quantities
//! (top-level fraction, pair correlation, counting statistics) are computed
//! from the tallies on demand.

use crate::engine::MicroState;
use crate::error::{Error, Result};
use crate::geometry::Position;

/// Distance bin index for every atom pair of one fixed geometry, computed
/// once per realization. Bin `k` covers `(k w, (k+1) w]`; distances beyond
/// the last regular bin land in the overflow bin, so no pair is dropped.
#[derive(Clone, Debug)]
pub struct BinnedPairs {
    atoms: usize,
    nbins: usize,
    bin_width: f64,
    /// Upper-triangle pair bins, row-major, `u16::MAX` unused.
    bins: Vec<u16>,
    /// Pairs per bin for this geometry, overflow last.
    static_counts: Vec<u64>,
}

fn pair_index(atoms: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < atoms);
    i * (2 * atoms - i - 1) / 2 + (j - i - 1)
}

impl BinnedPairs {
    pub fn new(positions: &[Position], bin_width: f64, nbins: usize) -> Result<Self> {
        if !(bin_width.is_finite() && bin_width > 0.0) {
            return Err(Error::InvalidParams(format!(
                "bin width must be positive, got {bin_width}"
            )));
        }
        if nbins == 0 || nbins + 1 >= u16::MAX as usize {
            return Err(Error::InvalidParams(format!(
                "bin count must be in 1..{}, got {nbins}",
                u16::MAX - 1
            )));
        }
        let n = positions.len();
        let mut bins = vec![0u16; n * (n.saturating_sub(1)) / 2];
        let mut static_counts = vec![0u64; nbins + 1];
        for i in 0..n {
            for j in (i + 1)..n {
                let mut r2 = 0.0;
                for k in 0..3 {
                    let d = positions[i][k] - positions[j][k];
                    r2 += d * d;
                }
                let d = r2.sqrt();
                let mut bin = ((d / bin_width).ceil() as usize).max(1) - 1;
                if bin >= nbins {
                    bin = nbins; // overflow
                }
                bins[pair_index(n, i, j)] = bin as u16;
                static_counts[bin] += 1;
            }
        }
        Ok(BinnedPairs { atoms: n, nbins, bin_width, bins, static_counts })
    }

    pub fn atoms(&self) -> usize {
        self.atoms
    }

    pub fn nbins(&self) -> usize {
        self.nbins
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    fn bin_of(&self, a: u32, b: u32) -> usize {
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        self.bins[pair_index(self.atoms, i as usize, j as usize)] as usize
    }
}

/// Pooled tallies over snapshots, mergeable across trajectories,
/// realizations, and workers.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservableAccumulator {
    nbins: usize,
    bin_width: f64,
    snapshots: u64,
    atom_snapshots: u64,
    sum_top: u64,
    sum_top_sq: u64,
    /// Histogram of the per-snapshot top-level count.
    excitation_hist: Vec<u64>,
    /// Per-bin totals over snapshots, overflow last.
    bin_pairs: Vec<u64>,
    bin_coincidences: Vec<u64>,
    bin_coincidences_sq: Vec<u64>,
}

/// Statistics of one distance bin.
#[derive(Clone, Copy, Debug)]
pub struct BinStat {
    pub r_lo: f64,
    pub r_hi: f64,
    /// Pair slots summed over snapshots.
    pub pairs: u64,
    /// Simultaneous top-level occupations summed over snapshots.
    pub coincidences: u64,
    /// Probability that both atoms of a pair at this distance sit on top.
    pub pair_probability: f64,
    pub pair_probability_err: f64,
    /// Pair probability normalized by the squared top-level fraction.
    pub g2: f64,
    pub g2_err: f64,
}

impl ObservableAccumulator {
    pub fn new(bin_width: f64, nbins: usize) -> Result<Self> {
        if !(bin_width.is_finite() && bin_width > 0.0) || nbins == 0 {
            return Err(Error::InvalidParams(format!(
                "accumulator needs positive bin width and bin count, got {bin_width} x {nbins}"
            )));
        }
        Ok(ObservableAccumulator {
            nbins,
            bin_width,
            snapshots: 0,
            atom_snapshots: 0,
            sum_top: 0,
            sum_top_sq: 0,
            excitation_hist: Vec::new(),
            bin_pairs: vec![0; nbins + 1],
            bin_coincidences: vec![0; nbins + 1],
            bin_coincidences_sq: vec![0; nbins + 1],
        })
    }

    pub fn snapshots(&self) -> u64 {
        self.snapshots
    }

    pub fn nbins(&self) -> usize {
        self.nbins
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    /// Folds one snapshot into the tallies.
    pub fn accumulate(&mut self, state: &MicroState, binned: &BinnedPairs) -> Result<()> {
        if binned.nbins != self.nbins || binned.bin_width.to_bits() != self.bin_width.to_bits() {
            return Err(Error::AccumulatorMismatch(format!(
                "binning {} x {} does not match accumulator {} x {}",
                binned.bin_width, binned.nbins, self.bin_width, self.nbins
            )));
        }
        if state.atoms() != binned.atoms {
            return Err(Error::AccumulatorMismatch(format!(
                "snapshot has {} atoms, binned geometry has {}",
                state.atoms(),
                binned.atoms
            )));
        }
        self.snapshots += 1;
        self.atom_snapshots += state.atoms() as u64;
        let n = state.top_count() as u64;
        self.sum_top += n;
        self.sum_top_sq += n * n;
        if n as usize >= self.excitation_hist.len() {
            self.excitation_hist.resize(n as usize + 1, 0);
        }
        self.excitation_hist[n as usize] += 1;

        for (tot, add) in self.bin_pairs.iter_mut().zip(&binned.static_counts) {
            *tot += add;
        }
        let mut coin = vec![0u64; self.nbins + 1];
        let top = state.top_atoms();
        for (ti, &a) in top.iter().enumerate() {
            for &b in &top[ti + 1..] {
                coin[binned.bin_of(a, b)] += 1;
            }
        }
        for (k, &c) in coin.iter().enumerate() {
            self.bin_coincidences[k] += c;
            self.bin_coincidences_sq[k] += c * c;
        }
        Ok(())
    }

    /// Adds another accumulator's tallies; both must share the binning.
    pub fn merge(&mut self, other: &ObservableAccumulator) -> Result<()> {
        if other.nbins != self.nbins || other.bin_width.to_bits() != self.bin_width.to_bits() {
            return Err(Error::AccumulatorMismatch(format!(
                "cannot merge binning {} x {} into {} x {}",
                other.bin_width, other.nbins, self.bin_width, self.nbins
            )));
        }
        self.snapshots += other.snapshots;
        self.atom_snapshots += other.atom_snapshots;
        self.sum_top += other.sum_top;
        self.sum_top_sq += other.sum_top_sq;
        if other.excitation_hist.len() > self.excitation_hist.len() {
            self.excitation_hist.resize(other.excitation_hist.len(), 0);
        }
        for (k, &c) in other.excitation_hist.iter().enumerate() {
            self.excitation_hist[k] += c;
        }
        for k in 0..=self.nbins {
            self.bin_pairs[k] += other.bin_pairs[k];
            self.bin_coincidences[k] += other.bin_coincidences[k];
            self.bin_coincidences_sq[k] += other.bin_coincidences_sq[k];
        }
        Ok(())
    }

    fn require_snapshots(&self, what: &str) -> Result<()> {
        if self.snapshots == 0 {
            return Err(Error::UndefinedObservable(format!(
                "{what} requested before any snapshot was accumulated"
            )));
        }
        Ok(())
    }

    /// Pooled top-level fraction and its standard error over snapshots.
    pub fn rydberg_fraction(&self) -> Result<(f64, f64)> {
        self.require_snapshots("top-level fraction")?;
        let s = self.snapshots as f64;
        let atoms = self.atom_snapshots as f64 / s;
        let mean_n = self.sum_top as f64 / s;
        let var_n = (self.sum_top_sq as f64 / s - mean_n * mean_n).max(0.0);
        let frac = mean_n / atoms;
        let err = (var_n / s).sqrt() / atoms;
        Ok((frac, err))
    }

    /// Mean top-level count per snapshot.
    pub fn mean_top_count(&self) -> Result<f64> {
        self.require_snapshots("mean top-level count")?;
        Ok(self.sum_top as f64 / self.snapshots as f64)
    }

    /// Counting-statistics parameter var/mean - 1 of the top-level count,
    /// from the streamed first and second moments.
    pub fn mandel_q(&self) -> Result<f64> {
        self.require_snapshots("counting statistics")?;
        let s = self.snapshots as f64;
        let mean = self.sum_top as f64 / s;
        if mean == 0.0 {
            return Err(Error::UndefinedObservable(
                "counting statistics of an always-empty top level".into(),
            ));
        }
        let var = self.sum_top_sq as f64 / s - mean * mean;
        Ok(var / mean - 1.0)
    }

    /// Same statistic recomputed from the count histogram; must agree with
    /// [`Self::mandel_q`] to near machine precision since both reduce the
    /// same integer tallies.
    pub fn mandel_q_from_histogram(&self) -> Result<f64> {
        self.require_snapshots("counting statistics")?;
        let mut total = 0u64;
        let mut first = 0u64;
        let mut second = 0u64;
        for (k, &c) in self.excitation_hist.iter().enumerate() {
            let k = k as u64;
            total += c;
            first += c * k;
            second += c * k * k;
        }
        let s = total as f64;
        let mean = first as f64 / s;
        if mean == 0.0 {
            return Err(Error::UndefinedObservable(
                "counting statistics of an always-empty top level".into(),
            ));
        }
        let var = second as f64 / s - mean * mean;
        Ok(var / mean - 1.0)
    }

    /// Histogram of the per-snapshot top-level count.
    pub fn excitation_histogram(&self) -> &[u64] {
        &self.excitation_hist
    }

    fn bin_stat(&self, k: usize, r_lo: f64, r_hi: f64, rho2: f64) -> BinStat {
        let s = self.snapshots as f64;
        let pairs = self.bin_pairs[k];
        let coin = self.bin_coincidences[k];
        let (prob, prob_err, g2, g2_err) = if pairs == 0 {
            (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
        } else {
            let prob = coin as f64 / pairs as f64;
            let mean_c = coin as f64 / s;
            let var_c = (self.bin_coincidences_sq[k] as f64 / s - mean_c * mean_c).max(0.0);
            let err_c = (var_c / s).sqrt();
            let mean_pairs = pairs as f64 / s;
            let prob_err = err_c / mean_pairs;
            (prob, prob_err, prob / rho2, prob_err / rho2)
        };
        BinStat {
            r_lo,
            r_hi,
            pairs,
            coincidences: coin,
            pair_probability: prob,
            pair_probability_err: prob_err,
            g2,
            g2_err,
        }
    }

    /// Distance-resolved pair statistics for the regular bins, in bin
    /// order. The pair-correlation error propagates only the coincidence
    /// fluctuations; the uncertainty of the squared fraction in the
    /// denominator is comparatively negligible at the sample sizes used.
    pub fn distance_bins(&self) -> Result<Vec<BinStat>> {
        self.require_snapshots("distance-resolved statistics")?;
        let (rho, _) = self.rydberg_fraction()?;
        let rho2 = rho * rho;
        Ok((0..self.nbins)
            .map(|k| {
                self.bin_stat(k, k as f64 * self.bin_width, (k + 1) as f64 * self.bin_width, rho2)
            })
            .collect())
    }

    /// Statistics of the overflow bin holding every pair beyond the last
    /// regular bin.
    pub fn overflow_bin(&self) -> Result<BinStat> {
        self.require_snapshots("distance-resolved statistics")?;
        let (rho, _) = self.rydberg_fraction()?;
        Ok(self.bin_stat(
            self.nbins,
            self.nbins as f64 * self.bin_width,
            f64::INFINITY,
            rho * rho,
        ))
    }

    /// Total pair slots over all bins including overflow; used to verify
    /// that binning never drops a pair.
    pub fn total_pairs(&self) -> u64 {
        self.bin_pairs.iter().sum()
    }
}
