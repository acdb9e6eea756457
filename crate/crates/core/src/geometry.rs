//! Atom arrangements, position sampling, and the pair/single partition.
//!
//! A partition groups atoms into disjoint or overlapping close pairs plus
//! leftover singles. Pair candidates are atom pairs whose separation `d`
//! satisfies `l_lower < d <= l_upper`; the upper bound defaults to the
//! median nearest-neighbor distance so that roughly half of the typical
//! neighbor links become exact pairs, and the lower bound is only raised
//! above zero in dense samples where closer pairs are locked in their
//! ground states anyway.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cartesian position in micrometers. One-dimensional arrangements occupy
/// the x axis with y = z = 0.
pub type Position = [f64; 3];

fn distance(a: &Position, b: &Position) -> f64 {
    let mut r2 = 0.0;
    for k in 0..3 {
        let d = a[k] - b[k];
        r2 += d * d;
    }
    r2.sqrt()
}

/// Supported atom arrangements.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    /// Regular chain along x with the given spacing.
    Lattice1d { spacing: f64, atoms: usize },
    /// Uniformly random positions on a segment of the given length.
    Gas1d { length: f64, atoms: usize },
    /// Uniformly random positions in a box with the given edge lengths.
    Gas3d { dims: [f64; 3], atoms: usize },
}

impl Geometry {
    /// Segment gas specified through a linear density in atoms/um.
    /// The atom count is the rounded expectation, at least two atoms.
    pub fn gas1d_with_density(length: f64, density: f64) -> Self {
        let atoms = ((length * density).round() as usize).max(2);
        Geometry::Gas1d { length, atoms }
    }

    /// Box gas specified through a volume density in atoms/um^3.
    pub fn gas3d_with_density(dims: [f64; 3], density: f64) -> Self {
        let atoms = ((dims[0] * dims[1] * dims[2] * density).round() as usize).max(2);
        Geometry::Gas3d { dims, atoms }
    }

    pub fn atoms(&self) -> usize {
        match *self {
            Geometry::Lattice1d { atoms, .. }
            | Geometry::Gas1d { atoms, .. }
            | Geometry::Gas3d { atoms, .. } => atoms,
        }
    }

    /// Upper bound on any pairwise distance; used as the default histogram
    /// range.
    pub fn extent(&self) -> f64 {
        match *self {
            Geometry::Lattice1d { spacing, atoms } => spacing * (atoms.max(1) - 1) as f64,
            Geometry::Gas1d { length, .. } => length,
            Geometry::Gas3d { dims, .. } => {
                (dims[0] * dims[0] + dims[1] * dims[1] + dims[2] * dims[2]).sqrt()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let atoms = self.atoms();
        if atoms < 2 {
            return Err(Error::DegenerateGeometry(format!(
                "at least two atoms are required, got {atoms}"
            )));
        }
        match *self {
            Geometry::Lattice1d { spacing, .. } => {
                if !(spacing.is_finite() && spacing > 0.0) {
                    return Err(Error::DegenerateGeometry(format!(
                        "lattice spacing must be positive, got {spacing}"
                    )));
                }
            }
            Geometry::Gas1d { length, .. } => {
                if !(length.is_finite() && length > 0.0) {
                    return Err(Error::DegenerateGeometry(format!(
                        "segment length must be positive, got {length}"
                    )));
                }
            }
            Geometry::Gas3d { dims, .. } => {
                if !dims.iter().all(|d| d.is_finite() && *d > 0.0) {
                    return Err(Error::DegenerateGeometry(format!(
                        "box edges must be positive, got {dims:?}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Draws one spatial realization. Lattices are deterministic; gases place
/// each atom independently and uniformly.
pub fn sample_positions(geometry: &Geometry, rng: &mut ChaCha8Rng) -> Result<Vec<Position>> {
    geometry.validate()?;
    let positions = match *geometry {
        Geometry::Lattice1d { spacing, atoms } => (0..atoms)
            .map(|k| [spacing * k as f64, 0.0, 0.0])
            .collect(),
        Geometry::Gas1d { length, atoms } => (0..atoms)
            .map(|_| [rng.gen::<f64>() * length, 0.0, 0.0])
            .collect(),
        Geometry::Gas3d { dims, atoms } => (0..atoms)
            .map(|_| {
                [
                    rng.gen::<f64>() * dims[0],
                    rng.gen::<f64>() * dims[1],
                    rng.gen::<f64>() * dims[2],
                ]
            })
            .collect(),
    };
    Ok(positions)
}

/// Median nearest-neighbor distance of the arrangement, the default upper
/// partition bound. For an even atom count the two middle values are
/// averaged.
pub fn nearest_neighbor_scale(positions: &[Position]) -> Result<f64> {
    if positions.len() < 2 {
        return Err(Error::DegenerateGeometry(
            "nearest-neighbor scale needs at least two atoms".into(),
        ));
    }
    let n = positions.len();
    let mut nn = vec![f64::INFINITY; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = distance(&positions[i], &positions[j]);
            if d <= 0.0 {
                return Err(Error::DegenerateGeometry(format!(
                    "atoms {i} and {j} coincide"
                )));
            }
            if d < nn[i] {
                nn[i] = d;
            }
            if d < nn[j] {
                nn[j] = d;
            }
        }
    }
    nn.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = n / 2;
    Ok(if n % 2 == 1 { nn[mid] } else { 0.5 * (nn[mid - 1] + nn[mid]) })
}

/// Whether pairs may share atoms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionMode {
    /// Greedy matching by ascending separation; each atom joins at most one
    /// pair.
    Disjoint,
    /// Every in-range pair becomes a unit; an atom may appear in several.
    Overlapping,
}

/// Pairs and singles over which the Monte Carlo selects its update unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairPartition {
    /// Index pairs with i < j.
    pub pairs: Vec<(u32, u32)>,
    /// Atoms in no pair.
    pub singles: Vec<u32>,
    pub mode: PartitionMode,
    pub l_lower: f64,
    pub l_upper: f64,
}

impl PairPartition {
    /// Partition that treats every atom as a single (no exact pairs).
    pub fn all_singles(atoms: usize) -> Self {
        PairPartition {
            pairs: Vec::new(),
            singles: (0..atoms as u32).collect(),
            mode: PartitionMode::Disjoint,
            l_lower: 0.0,
            l_upper: 0.0,
        }
    }

    /// Partition with hand-picked units, bypassing the distance rule. Used by
    /// synthetic model evaluations; `build_partition` is the validated path.
    pub fn forced(pairs: Vec<(u32, u32)>, singles: Vec<u32>, mode: PartitionMode) -> Self {
        PairPartition { pairs, singles, mode, l_lower: 0.0, l_upper: 0.0 }
    }

    /// Number of selectable units.
    pub fn units(&self) -> usize {
        self.pairs.len() + self.singles.len()
    }
}

/// Builds the pair/single partition from the distance window
/// `l_lower < d <= l_upper`.
pub fn build_partition(
    positions: &[Position],
    l_lower: f64,
    l_upper: f64,
    mode: PartitionMode,
) -> Result<PairPartition> {
    let n = positions.len();
    if n == 0 {
        return Err(Error::DegenerateGeometry("no atoms to partition".into()));
    }
    if !(l_lower.is_finite() && l_upper.is_finite()) || l_lower < 0.0 || l_upper < l_lower {
        return Err(Error::InvalidParams(format!(
            "partition window must satisfy 0 <= l_lower <= l_upper, got ({l_lower}, {l_upper}]"
        )));
    }

    let mut candidates: Vec<(f64, u32, u32)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let d = distance(&positions[i], &positions[j]);
            if d <= 0.0 {
                return Err(Error::DegenerateGeometry(format!(
                    "atoms {i} and {j} coincide"
                )));
            }
            if d > l_lower && d <= l_upper {
                candidates.push((d, i as u32, j as u32));
            }
        }
    }

    let mut pairs = Vec::new();
    let mut in_pair = vec![false; n];
    match mode {
        PartitionMode::Disjoint => {
            // ascending separation, ties broken by the lowest index pair
            candidates.sort_by(|a, b| {
                a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
            });
            for (_, i, j) in candidates {
                if !in_pair[i as usize] && !in_pair[j as usize] {
                    in_pair[i as usize] = true;
                    in_pair[j as usize] = true;
                    pairs.push((i, j));
                }
            }
            pairs.sort_unstable();
        }
        PartitionMode::Overlapping => {
            candidates.sort_by(|a, b| a.1.cmp(&b.1).then(a.2.cmp(&b.2)));
            for (_, i, j) in candidates {
                in_pair[i as usize] = true;
                in_pair[j as usize] = true;
                pairs.push((i, j));
            }
        }
    }
    let singles = (0..n as u32).filter(|&i| !in_pair[i as usize]).collect();
    Ok(PairPartition { pairs, singles, mode, l_lower, l_upper })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn lattice_positions_are_regular() {
        let g = Geometry::Lattice1d { spacing: 2.5, atoms: 4 };
        let mut r = rng::geometry_rng(1, 0);
        let p = sample_positions(&g, &mut r).unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(p[3], [7.5, 0.0, 0.0]);
        assert!((g.extent() - 7.5).abs() < 1e-12);
    }

    #[test]
    fn gas_positions_fill_the_box() {
        let g = Geometry::Gas3d { dims: [3.0, 4.0, 5.0], atoms: 200 };
        let mut r = rng::geometry_rng(7, 3);
        let p = sample_positions(&g, &mut r).unwrap();
        assert_eq!(p.len(), 200);
        for pos in &p {
            assert!(pos[0] >= 0.0 && pos[0] <= 3.0);
            assert!(pos[1] >= 0.0 && pos[1] <= 4.0);
            assert!(pos[2] >= 0.0 && pos[2] <= 5.0);
        }
        // same substream, same draw
        let mut r2 = rng::geometry_rng(7, 3);
        assert_eq!(p, sample_positions(&g, &mut r2).unwrap());
    }

    #[test]
    fn density_constructors_round_the_expected_count() {
        assert_eq!(Geometry::gas1d_with_density(1000.0, 0.1).atoms(), 100);
        assert_eq!(Geometry::gas3d_with_density([10.0, 10.0, 10.0], 0.137).atoms(), 137);
    }

    #[test]
    fn nn_scale_handles_odd_and_even_counts() {
        // chain 0, 1, 10: nearest-neighbor distances 1, 1, 9
        let p = vec![[0.0; 3], [1.0, 0.0, 0.0], [10.0, 0.0, 0.0]];
        assert!((nearest_neighbor_scale(&p).unwrap() - 1.0).abs() < 1e-12);
        // 0, 1, 10, 30: distances 1, 1, 9, 20 -> median 5
        let p = vec![[0.0; 3], [1.0, 0.0, 0.0], [10.0, 0.0, 0.0], [30.0, 0.0, 0.0]];
        assert!((nearest_neighbor_scale(&p).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn nn_scale_of_a_uniform_segment_gas_matches_sampling_theory() {
        // For a uniform gas of density n the nearest-neighbor distance is
        // asymptotically exponential with median ln(2) / (2 n).
        let g = Geometry::gas1d_with_density(200_000.0, 0.1);
        let mut r = rng::geometry_rng(11, 0);
        let p = sample_positions(&g, &mut r).unwrap();
        let scale = nearest_neighbor_scale(&p).unwrap();
        let expected = std::f64::consts::LN_2 / 0.2;
        assert!(
            (scale - expected).abs() < 0.05 * expected,
            "scale = {scale}, expected about {expected}"
        );
    }

    #[test]
    fn disjoint_matching_prefers_closest_pairs_and_lowest_indices() {
        // equilateral triangle with exactly representable squared
        // separations (all 2), so the tie breaks toward the lowest indices
        let p = vec![[0.0; 3], [1.0, 1.0, 0.0], [1.0, 0.0, 1.0]];
        let part = build_partition(&p, 0.0, 1.5, PartitionMode::Disjoint).unwrap();
        assert_eq!(part.pairs, vec![(0, 1)]);
        assert_eq!(part.singles, vec![2]);

        // chain 0, 1, 1.9: (1,2) is closer and wins although (0,1) has lower indices
        let p = vec![[0.0; 3], [1.0, 0.0, 0.0], [1.9, 0.0, 0.0]];
        let part = build_partition(&p, 0.0, 1.5, PartitionMode::Disjoint).unwrap();
        assert_eq!(part.pairs, vec![(1, 2)]);
        assert_eq!(part.singles, vec![0]);
    }

    #[test]
    fn overlapping_mode_keeps_all_candidates() {
        let h = 3f64.sqrt() / 2.0;
        let p = vec![[0.0; 3], [1.0, 0.0, 0.0], [0.5, h, 0.0]];
        let part = build_partition(&p, 0.0, 1.5, PartitionMode::Overlapping).unwrap();
        assert_eq!(part.pairs, vec![(0, 1), (0, 2), (1, 2)]);
        assert!(part.singles.is_empty());
    }

    #[test]
    fn window_bounds_are_strict_below_and_inclusive_above() {
        let p = vec![[0.0; 3], [1.0, 0.0, 0.0], [3.0, 0.0, 0.0]];
        // d(0,1) = 1 exactly at l_lower: excluded; d(1,2) = 2 = l_upper: included
        let part = build_partition(&p, 1.0, 2.0, PartitionMode::Disjoint).unwrap();
        assert_eq!(part.pairs, vec![(1, 2)]);
        assert_eq!(part.singles, vec![0]);
    }

    #[test]
    fn lattice_partition_with_default_scale_pairs_neighbors() {
        let g = Geometry::Lattice1d { spacing: 2.0, atoms: 6 };
        let mut r = rng::geometry_rng(0, 0);
        let p = sample_positions(&g, &mut r).unwrap();
        let scale = nearest_neighbor_scale(&p).unwrap();
        assert!((scale - 2.0).abs() < 1e-12);
        let part = build_partition(&p, 0.0, scale, PartitionMode::Disjoint).unwrap();
        assert_eq!(part.pairs, vec![(0, 1), (2, 3), (4, 5)]);
        assert!(part.singles.is_empty());
        let part = build_partition(&p, 0.0, scale, PartitionMode::Overlapping).unwrap();
        assert_eq!(part.pairs.len(), 5);
        assert!(part.singles.is_empty());
    }

    #[test]
    fn coincident_atoms_fail_partitioning() {
        let p = vec![[1.0, 1.0, 1.0], [1.0, 1.0, 1.0]];
        assert!(matches!(
            build_partition(&p, 0.0, 1.0, PartitionMode::Disjoint),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn random_partitions_satisfy_their_invariants() {
        use rand::Rng;
        let mut r = rng::geometry_rng(99, 0);
        for case in 0..300 {
            let atoms = 2 + (case % 40);
            let g = Geometry::Gas3d { dims: [6.0, 6.0, 6.0], atoms };
            let mut gr = rng::geometry_rng(100, case as u64);
            let p = sample_positions(&g, &mut gr).unwrap();
            let upper = 0.5 + r.gen::<f64>() * 4.0;
            let lower = r.gen::<f64>() * upper * 0.5;
            let mode = if case % 2 == 0 { PartitionMode::Disjoint } else { PartitionMode::Overlapping };
            let part = build_partition(&p, lower, upper, mode).unwrap();

            let mut seen = vec![0usize; atoms];
            for &(i, j) in &part.pairs {
                assert!(i < j, "pair indices must be ordered");
                let d = distance(&p[i as usize], &p[j as usize]);
                assert!(d > lower && d <= upper, "pair distance {d} outside ({lower}, {upper}]");
                seen[i as usize] += 1;
                seen[j as usize] += 1;
            }
            for &s in &part.singles {
                assert_eq!(seen[s as usize], 0, "single atom {s} appears in a pair");
            }
            if mode == PartitionMode::Disjoint {
                assert!(seen.iter().all(|&c| c <= 1), "disjoint pairs share an atom");
                let covered: usize =
                    part.pairs.len() * 2 + part.singles.len();
                assert_eq!(covered, atoms, "every atom must appear exactly once");
            } else {
                // overlapping: every atom is either in some pair or a single
                let in_pairs = seen.iter().filter(|&&c| c > 0).count();
                assert_eq!(in_pairs + part.singles.len(), atoms);
            }
        }
    }
}
