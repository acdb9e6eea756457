//! Experiment configuration: the TOML schema behind presets and config
//! files, its validation rules, and the resolution of derived quantities
//! (gas box sizes from densities, detuning grids from range specs).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Geometry, PartitionMode};
use crate::physics::{DriveParams, InteractionSpec, LevelScheme};

/// Retained-level count and drive/dissipation rates, all in MHz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    pub scheme: LevelScheme,
    pub omega12: f64,
    #[serde(default)]
    pub omega23: f64,
    /// Baseline top-level detuning. Scans replace it point by point, so it
    /// only documents the operating point in echoed configs.
    #[serde(default)]
    pub delta: f64,
    pub gamma21: f64,
    #[serde(default)]
    pub gamma32: f64,
    #[serde(default)]
    pub deph21: f64,
    #[serde(default)]
    pub deph32: f64,
}

impl PhysicsSection {
    pub fn drive(&self) -> DriveParams {
        DriveParams {
            scheme: self.scheme,
            omega12: self.omega12,
            omega23: self.omega23,
            delta: self.delta,
            gamma21: self.gamma21,
            gamma32: self.gamma32,
            deph21: self.deph21,
            deph32: self.deph32,
        }
    }
}

/// Distance-law interaction strength.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionSection {
    /// van der Waals coefficient in MHz um^6.
    pub c6: f64,
}

/// Atom arrangement. Gas sizes may be given directly (`length`, `dims`) or
/// through a density, in which case the box is sized to hold `atoms` at that
/// density. Exactly one of the two forms must be present unless a density
/// scan supplies the density externally, in which case both stay unset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeometrySection {
    Lattice1d {
        spacing: f64,
        atoms: usize,
    },
    Gas1d {
        atoms: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        length: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        density: Option<f64>,
    },
    Gas3d {
        atoms: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dims: Option<[f64; 3]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        density: Option<f64>,
    },
}

impl GeometrySection {
    pub fn atoms(&self) -> usize {
        match *self {
            GeometrySection::Lattice1d { atoms, .. }
            | GeometrySection::Gas1d { atoms, .. }
            | GeometrySection::Gas3d { atoms, .. } => atoms,
        }
    }

    /// Turns the section into a concrete geometry. `density_override` comes
    /// from a density scan and requires a gas section that leaves both the
    /// size and the density open.
    pub fn resolve(&self, density_override: Option<f64>) -> Result<Geometry> {
        if let Some(d) = density_override {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::Config(format!(
                    "scanned density must be positive, got {d}"
                )));
            }
        }
        let geometry = match *self {
            GeometrySection::Lattice1d { spacing, atoms } => {
                if density_override.is_some() {
                    return Err(Error::Config(
                        "a density scan needs a gas geometry, not a lattice".into(),
                    ));
                }
                Geometry::Lattice1d { spacing, atoms }
            }
            GeometrySection::Gas1d { atoms, length, density } => {
                if density_override.is_some() && (length.is_some() || density.is_some()) {
                    return Err(Error::Config(
                        "the density scan sets the gas density; leave `length` and \
                         `density` out of [geometry]"
                            .into(),
                    ));
                }
                let length = match (length, density_override.or(density)) {
                    (Some(l), None) => l,
                    (None, Some(d)) => {
                        if !(d.is_finite() && d > 0.0) {
                            return Err(Error::Config(format!(
                                "gas density must be positive, got {d}"
                            )));
                        }
                        atoms as f64 / d
                    }
                    (Some(_), Some(_)) => {
                        return Err(Error::Config(
                            "give either `length` or `density` for a 1d gas, not both".into(),
                        ))
                    }
                    (None, None) => {
                        return Err(Error::Config(
                            "a 1d gas needs `length` or `density`".into(),
                        ))
                    }
                };
                Geometry::Gas1d { length, atoms }
            }
            GeometrySection::Gas3d { atoms, dims, density } => {
                if density_override.is_some() && (dims.is_some() || density.is_some()) {
                    return Err(Error::Config(
                        "the density scan sets the gas density; leave `dims` and \
                         `density` out of [geometry]"
                            .into(),
                    ));
                }
                let dims = match (dims, density_override.or(density)) {
                    (Some(d), None) => d,
                    (None, Some(d)) => {
                        if !(d.is_finite() && d > 0.0) {
                            return Err(Error::Config(format!(
                                "gas density must be positive, got {d}"
                            )));
                        }
                        let side = (atoms as f64 / d).cbrt();
                        [side, side, side]
                    }
                    (Some(_), Some(_)) => {
                        return Err(Error::Config(
                            "give either `dims` or `density` for a 3d gas, not both".into(),
                        ))
                    }
                    (None, None) => {
                        return Err(Error::Config(
                            "a 3d gas needs `dims` or `density`".into(),
                        ))
                    }
                };
                Geometry::Gas3d { dims, atoms }
            }
        };
        geometry.validate()?;
        Ok(geometry)
    }
}

/// Pair-window and model-variant settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartitionSection {
    pub mode: PartitionMode,
    /// Lower pair-window bound in um; pairs need `l_lower < d`. Defaults
    /// to zero.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_lower: Option<f64>,
    /// Upper pair-window bound in um; pairs need `d <= l_upper`. Defaults
    /// to the median nearest-neighbor distance of each realization.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_upper: Option<f64>,
    /// Treat every atom singly (rate-equation baseline); the pair window
    /// is ignored.
    pub sare: bool,
    /// Dense-sample mode: both window bounds must be given explicitly and
    /// must bracket the pair resonance distance [c6/(2 delta)]^(1/6).
    pub high_density: bool,
}

impl Default for PartitionSection {
    fn default() -> Self {
        PartitionSection {
            mode: PartitionMode::Disjoint,
            l_lower: None,
            l_upper: None,
            sare: false,
            high_density: false,
        }
    }
}

/// Monte Carlo budget and seeding.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    /// Burn-in and inter-sample sweep length in steps per atom.
    pub steps_per_atom: u32,
    /// Steady-state snapshots taken per trajectory, one sweep apart.
    pub samples_per_trajectory: u32,
    /// Independent chains per spatial realization.
    pub trajectories: u32,
    /// Spatial realizations (gas position draws) per scan point.
    pub realizations: u32,
    /// Master seed; every (realization, trajectory) stream derives from it.
    pub seed: u64,
    /// Reuse steady-state solves for repeated detuning/coupling values.
    pub memoize: bool,
}

impl Default for McSection {
    fn default() -> Self {
        McSection {
            steps_per_atom: 10,
            samples_per_trajectory: 1,
            trajectories: 1000,
            realizations: 1,
            seed: 1,
            memoize: false,
        }
    }
}

/// Output location and histogram layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Pair-distance histogram bin width in um.
    pub bin_width: f64,
    /// Histogram range in um; distances beyond it land in one overflow bin.
    /// Defaults to the geometry extent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
    /// Also write the sampled atom positions of every realization.
    pub dump_positions: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
            bin_width: 0.1,
            r_max: None,
            dump_positions: false,
        }
    }
}

/// A detuning axis: either explicit values or an inclusive linear range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Linspace { start: f64, stop: f64, points: usize },
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        match *self {
            Grid::List(ref v) => {
                if v.is_empty() {
                    return Err(Error::Config("empty value list in scan grid".into()));
                }
                if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
                    return Err(Error::Config(format!("non-finite grid value {bad}")));
                }
                Ok(v.clone())
            }
            Grid::Linspace { start, stop, points } => {
                if !(start.is_finite() && stop.is_finite()) {
                    return Err(Error::Config(format!(
                        "grid range [{start}, {stop}] is not finite"
                    )));
                }
                if points == 0 {
                    return Err(Error::Config("grid needs at least one point".into()));
                }
                if points == 1 {
                    return Ok(vec![start]);
                }
                let step = (stop - start) / (points - 1) as f64;
                Ok((0..points).map(|k| start + step * k as f64).collect())
            }
        }
    }
}

/// What is swept and which outputs are produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScanSection {
    /// Top-level population against detuning.
    Detuning { deltas: Grid },
    /// One detuning scan per gas density.
    Density { densities: Vec<f64>, deltas: Grid },
    /// Distance-resolved pair statistics, one file per detuning.
    PairCorrelation { deltas: Grid },
    /// Excitation-count histogram and Mandel Q against detuning.
    Counting { deltas: Grid },
    /// Three-atom model benchmark: relative error of the single-atom,
    /// overlapping-pair, and pair-plus-single reductions against the exact
    /// solution, on a grid of detunings and third-atom couplings.
    Deviation {
        /// Fixed coupling between the first two atoms, MHz.
        v12: f64,
        deltas: Grid,
        /// Third-atom couplings; defaults to 30 log-spaced values in
        /// [1e-2, 10] MHz.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        vs: Option<Vec<f64>>,
        /// Evaluate model populations from the exact stationary distribution
        /// of the update chain instead of sampling it.
        #[serde(default)]
        chain: bool,
    },
}

impl ScanSection {
    pub fn deltas(&self) -> &Grid {
        match self {
            ScanSection::Detuning { deltas }
            | ScanSection::Density { deltas, .. }
            | ScanSection::PairCorrelation { deltas }
            | ScanSection::Counting { deltas }
            | ScanSection::Deviation { deltas, .. } => deltas,
        }
    }
}

/// A complete experiment description, loadable from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Free-form remark echoed into output headers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// Worker threads; omitted means one per available core.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Suppress per-task progress lines on stderr.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub quiet: bool,
    pub physics: PhysicsSection,
    /// Required except for deviation scans, which fix their own couplings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interaction: Option<InteractionSection>,
    /// Required except for deviation scans.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometrySection>,
    #[serde(default)]
    pub partition: PartitionSection,
    #[serde(default)]
    pub mc: McSection,
    pub scan: ScanSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_toml_str(&text)
    }

    /// Serializes the fully resolved configuration, used to stamp outputs.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn drive(&self) -> DriveParams {
        self.physics.drive()
    }

    pub fn interaction_spec(&self) -> Result<InteractionSpec> {
        let section = self.interaction.ok_or_else(|| {
            Error::Config("this scan needs an [interaction] section with `c6`".into())
        })?;
        Ok(InteractionSpec::vdw(section.c6))
    }

    pub fn geometry_section(&self) -> Result<&GeometrySection> {
        self.geometry.as_ref().ok_or_else(|| {
            Error::Config("this scan needs a [geometry] section".into())
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.drive().validate()?;
        let deltas = self.scan.deltas().values()?;

        if let ScanSection::Deviation { v12, ref vs, .. } = self.scan {
            if !v12.is_finite() {
                return Err(Error::Config(format!("v12 = {v12} is not finite")));
            }
            if let Some(vs) = vs {
                if vs.is_empty() {
                    return Err(Error::Config("empty coupling list `vs`".into()));
                }
                if let Some(bad) = vs.iter().find(|v| !v.is_finite()) {
                    return Err(Error::Config(format!("non-finite coupling {bad} in `vs`")));
                }
            }
            if self.geometry.is_some() || self.interaction.is_some() {
                return Err(Error::Config(
                    "a deviation scan fixes its own three-atom arrangement; remove the \
                     [geometry] and [interaction] sections"
                        .into(),
                ));
            }
        } else {
            let interaction = self.interaction_spec()?;
            interaction.validate()?;
            let geometry = self.geometry_section()?;
            match self.scan {
                ScanSection::Density { ref densities, .. } => {
                    if densities.is_empty() {
                        return Err(Error::Config("empty density list".into()));
                    }
                    for &d in densities {
                        geometry.resolve(Some(d))?;
                    }
                }
                _ => {
                    geometry.resolve(None)?;
                }
            }
        }

        let p = &self.partition;
        for (name, bound) in [("l_lower", p.l_lower), ("l_upper", p.l_upper)] {
            if let Some(b) = bound {
                if !(b.is_finite() && b >= 0.0) {
                    return Err(Error::Config(format!(
                        "{name} must be a nonnegative length, got {b}"
                    )));
                }
            }
        }
        if let (Some(lo), Some(hi)) = (p.l_lower, p.l_upper) {
            if lo >= hi {
                return Err(Error::Config(format!(
                    "pair window is empty: l_lower = {lo} >= l_upper = {hi}"
                )));
            }
        }
        if p.high_density && !p.sare {
            let (Some(lo), Some(hi)) = (p.l_lower, p.l_upper) else {
                return Err(Error::Config(
                    "high-density mode needs explicit l_lower and l_upper".into(),
                ));
            };
            let c6 = self.interaction_spec()?.c6;
            if c6 <= 0.0 {
                return Err(Error::Config(format!(
                    "high-density mode needs a repulsive interaction, got c6 = {c6}"
                )));
            }
            for &delta in &deltas {
                if delta <= 0.0 {
                    return Err(Error::Config(format!(
                        "high-density mode needs positive detunings so that the pair \
                         resonance distance [c6/(2 delta)]^(1/6) exists; got delta = {delta}"
                    )));
                }
                let r2 = (c6 / (2.0 * delta)).powf(1.0 / 6.0);
                if !(lo < r2 && r2 < hi) {
                    return Err(Error::Config(format!(
                        "high-density window must bracket the pair resonance distance \
                         [c6/(2 delta)]^(1/6) = {r2:.4} um at delta = {delta} MHz; \
                         got ({lo}, {hi}]"
                    )));
                }
            }
        }

        let mc = &self.mc;
        if mc.steps_per_atom == 0 {
            return Err(Error::Config("steps_per_atom must be at least 1".into()));
        }
        if mc.samples_per_trajectory == 0 {
            return Err(Error::Config("samples_per_trajectory must be at least 1".into()));
        }
        if mc.trajectories == 0 {
            return Err(Error::Config("trajectories must be at least 1".into()));
        }
        if mc.realizations == 0 {
            return Err(Error::Config("realizations must be at least 1".into()));
        }

        let out = &self.output;
        if !(out.bin_width.is_finite() && out.bin_width > 0.0) {
            return Err(Error::Config(format!(
                "bin_width must be positive, got {}",
                out.bin_width
            )));
        }
        if let Some(r) = out.r_max {
            if !(r.is_finite() && r >= out.bin_width) {
                return Err(Error::Config(format!(
                    "r_max must be at least one bin width, got {r}"
                )));
            }
        }

        if self.workers == Some(0) {
            return Err(Error::Config(
                "workers must be at least 1; omit the setting for one per core".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_toml() -> &'static str {
        r#"
            [physics]
            scheme = "two_level"
            omega12 = 1.0
            gamma21 = 6.0

            [interaction]
            c6 = 900.0

            [geometry]
            kind = "lattice1d"
            spacing = 5.0
            atoms = 10

            [scan]
            kind = "detuning"
            deltas = [0.0, 1.0]
        "#
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml_str(minimal_toml()).unwrap();
        assert_eq!(cfg.mc.steps_per_atom, 10);
        assert_eq!(cfg.mc.samples_per_trajectory, 1);
        assert_eq!(cfg.mc.seed, 1);
        assert!(!cfg.mc.memoize);
        assert_eq!(cfg.partition.mode, PartitionMode::Disjoint);
        assert_eq!(cfg.output.bin_width, 0.1);
        assert!(cfg.workers.is_none());
    }

    #[test]
    fn config_echo_round_trips() {
        let cfg = ExperimentConfig::from_toml_str(minimal_toml()).unwrap();
        let echo = cfg.to_toml().unwrap();
        let back = ExperimentConfig::from_toml_str(&echo).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_top_level_keys_are_rejected_with_a_named_field() {
        let bad = format!("bogus_key = 3\n{}", minimal_toml());
        let err = ExperimentConfig::from_toml_str(&bad).unwrap_err();
        assert!(err.to_string().contains("bogus_key"), "{err}");
    }

    #[test]
    fn grid_forms_produce_the_expected_values() {
        let list = Grid::List(vec![1.0, 2.5]);
        assert_eq!(list.values().unwrap(), vec![1.0, 2.5]);
        let lin = Grid::Linspace { start: -1.0, stop: 5.0, points: 25 };
        let v = lin.values().unwrap();
        assert_eq!(v.len(), 25);
        assert_eq!(v[0], -1.0);
        assert_eq!(v[24], 5.0);
        assert!((v[1] - v[0] - 0.25).abs() < 1e-12);
        assert!(v.iter().any(|&x| (x - 1.25).abs() < 1e-12));
        assert!(v.iter().any(|&x| (x - 2.5).abs() < 1e-12));
        let single = Grid::Linspace { start: 7.0, stop: 7.0, points: 1 };
        assert_eq!(single.values().unwrap(), vec![7.0]);
        assert!(Grid::List(vec![]).values().is_err());
    }

    #[test]
    fn gas_sections_resolve_sizes_from_densities() {
        let g1 = GeometrySection::Gas1d { atoms: 1000, length: None, density: Some(3.0) };
        match g1.resolve(None).unwrap() {
            Geometry::Gas1d { length, atoms } => {
                assert_eq!(atoms, 1000);
                assert!((length - 1000.0 / 3.0).abs() < 1e-9);
            }
            other => panic!("wrong geometry {other:?}"),
        }

        let g3 = GeometrySection::Gas3d { atoms: 500, dims: None, density: None };
        match g3.resolve(Some(1e-3)).unwrap() {
            Geometry::Gas3d { dims, atoms } => {
                assert_eq!(atoms, 500);
                let side = (500.0f64 / 1e-3).cbrt();
                for d in dims {
                    assert!((d - side).abs() < 1e-9);
                }
            }
            other => panic!("wrong geometry {other:?}"),
        }
    }

    #[test]
    fn ambiguous_or_missing_gas_sizes_are_rejected() {
        let both = GeometrySection::Gas1d {
            atoms: 10,
            length: Some(5.0),
            density: Some(2.0),
        };
        assert!(both.resolve(None).is_err());
        let neither = GeometrySection::Gas1d { atoms: 10, length: None, density: None };
        assert!(neither.resolve(None).is_err());
        let fixed = GeometrySection::Gas1d { atoms: 10, length: Some(5.0), density: None };
        assert!(fixed.resolve(Some(1.0)).is_err());
        let lattice = GeometrySection::Lattice1d { spacing: 2.0, atoms: 10 };
        assert!(lattice.resolve(Some(1.0)).is_err());
    }

    #[test]
    fn high_density_mode_requires_a_bracketing_window() {
        let mut toml = String::from(
            r#"
            [physics]
            scheme = "two_level"
            omega12 = 1.0
            delta = 7.0
            gamma21 = 6.0

            [interaction]
            c6 = 900.0

            [geometry]
            kind = "gas1d"
            atoms = 100
            density = 3.0

            [partition]
            mode = "overlapping"
            high_density = true

            [scan]
            kind = "pair_correlation"
            deltas = [7.0]
        "#,
        );
        let err = ExperimentConfig::from_toml_str(&toml).unwrap_err();
        assert!(err.to_string().contains("l_lower"), "{err}");

        toml = toml.replace(
            "high_density = true",
            "high_density = true\nl_lower = 1.8\nl_upper = 2.2",
        );
        let cfg = ExperimentConfig::from_toml_str(&toml).unwrap();
        assert!(cfg.validate().is_ok());

        let shifted = toml.replace("deltas = [7.0]", "deltas = [0.05]");
        let err = ExperimentConfig::from_toml_str(&shifted).unwrap_err();
        assert!(err.to_string().contains("pair resonance distance"), "{err}");

        let negative = toml.replace("deltas = [7.0]", "deltas = [-7.0]");
        let err = ExperimentConfig::from_toml_str(&negative).unwrap_err();
        assert!(err.to_string().contains("positive detunings"), "{err}");
    }

    #[test]
    fn deviation_scans_refuse_geometry_sections() {
        let toml = r#"
            [physics]
            scheme = "three_level"
            omega12 = 3.0
            omega23 = 2.0
            gamma21 = 6.0
            gamma32 = 0.025

            [geometry]
            kind = "lattice1d"
            spacing = 5.0
            atoms = 3

            [scan]
            kind = "deviation"
            v12 = 2.0
            deltas = [0.0]
        "#;
        let err = ExperimentConfig::from_toml_str(toml).unwrap_err();
        assert!(err.to_string().contains("three-atom"), "{err}");
    }

    #[test]
    fn parse_errors_carry_line_information() {
        let bad = minimal_toml().replace("omega12 = 1.0", "omega12 = \"loud\"");
        let err = ExperimentConfig::from_toml_str(&bad).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("line"), "{text}");
    }
}
