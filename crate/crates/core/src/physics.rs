//! Atomic level schemes, drive parameters, and pairwise interaction strengths.
//!
//! The single-atom drive Hamiltonian is
//!
//! ```text
//! H = omega12 (S12 + S21) + omega23 (S23 + S32) - delta S33
//! ```
//!
//! with transition operators `S_ab = |a><b|`. The Rabi amplitudes multiply
//! the bare ladder operators without a factor 1/2, and `delta` is the
//! detuning accumulated by the top level over both drive photons. Two atoms
//! at distance `r` additionally acquire `V(r) S33 (x) S33` with
//! `V(r) = c6 / r^6`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Position;

/// Number of retained atomic levels and their roles.
///
/// `ThreeLevel` is the full ladder (ground, intermediate, top).
/// `TwoLevel` keeps only the ground and top level with a single drive
/// field. The top level is the interacting one in both schemes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelScheme {
    TwoLevel,
    ThreeLevel,
}

impl LevelScheme {
    /// Retained levels per atom.
    pub fn levels(self) -> usize {
        match self {
            LevelScheme::TwoLevel => 2,
            LevelScheme::ThreeLevel => 3,
        }
    }

    /// Internal index of the interacting (top) level.
    pub fn top(self) -> usize {
        self.levels() - 1
    }

    /// External labels of the retained levels in internal index order.
    /// The ladder is labeled 1, 2, 3; the two-level reduction keeps the
    /// labels 1 and 3 of the states it retains.
    pub fn labels(self) -> &'static [u8] {
        match self {
            LevelScheme::TwoLevel => &[1, 3],
            LevelScheme::ThreeLevel => &[1, 2, 3],
        }
    }
}

/// Drive amplitudes, detuning, and dissipation rates of one atom, all in MHz.
///
/// For `TwoLevel`, `omega12`, `gamma21`, and `deph21` describe the single
/// retained transition; the three-level-only fields must be zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    pub scheme: LevelScheme,
    /// Rabi amplitude of the lower (1-2) transition.
    pub omega12: f64,
    /// Rabi amplitude of the upper (2-3) transition.
    pub omega23: f64,
    /// Top-level detuning, entering the Hamiltonian as `-delta S33`.
    pub delta: f64,
    /// Population decay rate of level 2 into level 1
    /// (two-level: of the top level into the ground level).
    pub gamma21: f64,
    /// Population decay rate of the top level into level 2.
    pub gamma32: f64,
    /// Extra dephasing rate of the 2-1 coherence (drive-phase noise on the
    /// lower transition). The 3-1 coherence dephases with the sum
    /// `deph21 + deph32` because it involves both drive photons.
    pub deph21: f64,
    /// Extra dephasing rate of the 3-2 coherence.
    pub deph32: f64,
}

impl DriveParams {
    /// Two-level parameter set for the single retained transition.
    pub fn two_level(omega: f64, delta: f64, gamma: f64, deph: f64) -> Self {
        DriveParams {
            scheme: LevelScheme::TwoLevel,
            omega12: omega,
            omega23: 0.0,
            delta,
            gamma21: gamma,
            gamma32: 0.0,
            deph21: deph,
            deph32: 0.0,
        }
    }

    /// Same parameters with the detuning replaced (used by scans and by the
    /// effective-detuning construction).
    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("omega12", self.omega12),
            ("omega23", self.omega23),
            ("delta", self.delta),
            ("gamma21", self.gamma21),
            ("gamma32", self.gamma32),
            ("deph21", self.deph21),
            ("deph32", self.deph32),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                return Err(Error::InvalidParams(format!("{name} = {value} is not finite")));
            }
        }
        for (name, value) in [
            ("gamma21", self.gamma21),
            ("gamma32", self.gamma32),
            ("deph21", self.deph21),
            ("deph32", self.deph32),
        ] {
            if value < 0.0 {
                return Err(Error::InvalidParams(format!("rate {name} = {value} is negative")));
            }
        }
        if self.scheme == LevelScheme::TwoLevel
            && (self.omega23 != 0.0 || self.gamma32 != 0.0 || self.deph32 != 0.0)
        {
            return Err(Error::InvalidParams(
                "two-level scheme requires omega23 = gamma32 = deph32 = 0".into(),
            ));
        }
        Ok(())
    }
}

/// Pairwise interaction model: an isotropic van der Waals tail `c6 / r^6`
/// plus optional explicit per-pair overrides for synthetic arrangements.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InteractionSpec {
    /// van der Waals coefficient in MHz um^6.
    pub c6: f64,
    /// Symmetric per-pair overrides (atom index pair -> MHz) that take
    /// precedence over the distance law.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<(u32, u32, f64)>,
}

impl InteractionSpec {
    /// Pure distance-law interaction.
    pub fn vdw(c6: f64) -> Self {
        InteractionSpec { c6, overrides: Vec::new() }
    }

    /// Adds a symmetric override for one index pair.
    pub fn with_override(mut self, i: u32, j: u32, v: f64) -> Self {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.overrides.push((a, b, v));
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.c6.is_finite() {
            return Err(Error::InvalidParams(format!("c6 = {} is not finite", self.c6)));
        }
        for &(i, j, v) in &self.overrides {
            if i == j {
                return Err(Error::InvalidParams(format!(
                    "interaction override pairs an atom with itself (index {i})"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!(
                    "interaction override ({i},{j}) = {v} is not finite"
                )));
            }
        }
        Ok(())
    }

    /// Interaction strength of two atoms from the distance law alone.
    ///
    /// Errors with a degenerate-geometry condition when the separation is
    /// zero (or numerically indistinguishable from it).
    pub fn pair_coupling(&self, ri: &Position, rj: &Position) -> Result<f64> {
        let mut r2 = 0.0;
        for k in 0..3 {
            let d = ri[k] - rj[k];
            r2 += d * d;
        }
        if !r2.is_finite() {
            return Err(Error::InvalidParams("non-finite atom positions".into()));
        }
        if r2 <= 0.0 {
            return Err(Error::DegenerateGeometry(
                "coincident atoms have no defined pair interaction".into(),
            ));
        }
        Ok(self.c6 / (r2 * r2 * r2))
    }

    /// Override-aware interaction strength for an indexed pair.
    pub fn coupling(&self, i: usize, j: usize, positions: &[Position]) -> Result<f64> {
        let (a, b) = if i <= j { (i as u32, j as u32) } else { (j as u32, i as u32) };
        for &(oi, oj, v) in &self.overrides {
            if (oi, oj) == (a, b) {
                return Ok(v);
            }
        }
        self.pair_coupling(&positions[i], &positions[j])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coupling_follows_inverse_sixth_power() {
        let spec = InteractionSpec::vdw(900.0);
        let a = [0.0, 0.0, 0.0];
        let b = [2.0, 0.0, 0.0];
        let v = spec.pair_coupling(&a, &b).unwrap();
        assert!((v - 14.0625).abs() < 1e-12, "v = {v}");

        let spec = InteractionSpec::vdw(50000.0);
        let b = [3.0, 4.0, 0.0];
        let v = spec.pair_coupling(&a, &b).unwrap();
        assert!((v - 50000.0 / 5f64.powi(6)).abs() < 1e-9);
    }

    #[test]
    fn doubling_distance_divides_coupling_by_64() {
        let spec = InteractionSpec::vdw(137.5);
        for r in [0.3, 1.0, 2.7, 10.0] {
            let v1 = spec.pair_coupling(&[0.0; 3], &[r, 0.0, 0.0]).unwrap();
            let v2 = spec.pair_coupling(&[0.0; 3], &[2.0 * r, 0.0, 0.0]).unwrap();
            assert!((v1 / v2 - 64.0).abs() < 1e-9);
        }
    }

    #[test]
    fn coincident_atoms_are_rejected() {
        let spec = InteractionSpec::vdw(900.0);
        let err = spec.pair_coupling(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap_err();
        assert!(matches!(err, Error::DegenerateGeometry(_)));
    }

    #[test]
    fn overrides_take_precedence_and_are_symmetric() {
        let spec = InteractionSpec::vdw(900.0).with_override(2, 0, 7.5);
        let positions = vec![[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        assert_eq!(spec.coupling(0, 2, &positions).unwrap(), 7.5);
        assert_eq!(spec.coupling(2, 0, &positions).unwrap(), 7.5);
        // the unoverridden pair still follows the distance law
        let v01 = spec.coupling(0, 1, &positions).unwrap();
        assert!((v01 - 900.0).abs() < 1e-12);
    }

    #[test]
    fn two_level_rejects_ladder_fields() {
        let mut p = DriveParams::two_level(1.0, 0.0, 6.0, 0.0);
        p.validate().unwrap();
        p.gamma32 = 0.1;
        assert!(p.validate().is_err());
    }

    #[test]
    fn negative_rates_are_rejected() {
        let p = DriveParams {
            scheme: LevelScheme::ThreeLevel,
            omega12: 1.0,
            omega23: 1.0,
            delta: 0.0,
            gamma21: -1.0,
            gamma32: 0.0,
            deph21: 0.0,
            deph32: 0.0,
        };
        assert!(p.validate().is_err());
    }
}
