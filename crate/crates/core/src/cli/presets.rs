//! Built-in experiment definitions. Each preset is a complete, validated
//! configuration; command-line flags can still override its budget, seed,
//! output location, and partition window.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::geometry::PartitionMode;
use crate::physics::LevelScheme;

use super::config::{
    ExperimentConfig, GeometrySection, Grid, InteractionSection, McSection, OutputSection,
    PartitionSection, PhysicsSection, ScanSection,
};

pub const PRESET_NAMES: [&str; 7] =
    ["fig2", "fig4a", "fig4b", "fig5", "fig6", "fig7", "fig8"];

/// Ladder drive used by the excitation-fraction and pair-correlation
/// presets: strong lower leg, weak upper leg, slow top-level decay, and
/// mild laser dephasing on both legs.
fn ladder_drive_weak_probe() -> PhysicsSection {
    PhysicsSection {
        scheme: LevelScheme::ThreeLevel,
        omega12: 2.0,
        omega23: 1.0,
        delta: 0.0,
        gamma21: 6.0,
        gamma32: 0.025,
        deph21: 0.1,
        deph32: 0.1,
    }
}

/// Ladder drive used by the counting-statistics presets: both legs at
/// 3 MHz, no extra dephasing.
fn ladder_drive_balanced() -> PhysicsSection {
    PhysicsSection {
        scheme: LevelScheme::ThreeLevel,
        omega12: 3.0,
        omega23: 3.0,
        delta: 0.0,
        gamma21: 6.0,
        gamma32: 0.025,
        deph21: 0.0,
        deph32: 0.0,
    }
}

fn out_dir(name: &str) -> OutputSection {
    OutputSection { dir: PathBuf::from("out").join(name), ..OutputSection::default() }
}

fn fig2() -> ExperimentConfig {
    ExperimentConfig {
        note: None,
        workers: None,
        quiet: false,
        physics: PhysicsSection {
            scheme: LevelScheme::ThreeLevel,
            omega12: 3.0,
            omega23: 2.0,
            delta: 0.0,
            gamma21: 6.0,
            gamma32: 0.025,
            deph21: 0.0,
            deph32: 0.0,
        },
        interaction: None,
        geometry: None,
        partition: PartitionSection::default(),
        mc: McSection { trajectories: 100_000, memoize: true, ..McSection::default() },
        scan: ScanSection::Deviation {
            v12: 2.0,
            deltas: Grid::List(vec![0.0]),
            vs: None,
            chain: false,
        },
        output: out_dir("fig2"),
    }
}

fn fig4a() -> ExperimentConfig {
    ExperimentConfig {
        note: None,
        workers: None,
        quiet: false,
        physics: ladder_drive_weak_probe(),
        interaction: Some(InteractionSection { c6: 50_000.0 }),
        geometry: Some(GeometrySection::Gas3d { atoms: 500, dims: None, density: None }),
        partition: PartitionSection::default(),
        mc: McSection {
            trajectories: 250,
            realizations: 8,
            memoize: true,
            ..McSection::default()
        },
        scan: ScanSection::Density {
            densities: vec![1e-3, 1e-2, 1e-1],
            deltas: Grid::Linspace { start: -10.0, stop: 40.0, points: 26 },
        },
        output: out_dir("fig4a"),
    }
}

fn fig4b() -> ExperimentConfig {
    // Nearest-neighbor coupling of 2.5 MHz on a 5 um chain.
    let c6 = 2.5 * 5.0f64.powi(6);
    ExperimentConfig {
        note: None,
        workers: None,
        quiet: false,
        physics: ladder_drive_weak_probe(),
        interaction: Some(InteractionSection { c6 }),
        geometry: Some(GeometrySection::Lattice1d { spacing: 5.0, atoms: 50 }),
        partition: PartitionSection {
            mode: PartitionMode::Overlapping,
            ..PartitionSection::default()
        },
        mc: McSection { trajectories: 2000, memoize: true, ..McSection::default() },
        scan: ScanSection::Detuning {
            deltas: Grid::Linspace { start: -1.0, stop: 5.0, points: 25 },
        },
        output: out_dir("fig4b"),
    }
}

fn fig5() -> ExperimentConfig {
    ExperimentConfig {
        note: None,
        workers: None,
        quiet: false,
        physics: ladder_drive_weak_probe(),
        interaction: Some(InteractionSection { c6: 900.0 / std::f64::consts::TAU }),
        geometry: Some(GeometrySection::Gas1d {
            atoms: 100,
            length: None,
            density: Some(0.1),
        }),
        partition: PartitionSection::default(),
        mc: McSection { trajectories: 20_000, memoize: true, ..McSection::default() },
        scan: ScanSection::PairCorrelation {
            deltas: Grid::Linspace { start: -2.0, stop: 4.0, points: 13 },
        },
        output: OutputSection { r_max: Some(20.0), ..out_dir("fig5") },
    }
}

fn fig6() -> ExperimentConfig {
    // Nearest-neighbor coupling of 100 MHz on a 2 um chain.
    let c6 = 100.0 * 2.0f64.powi(6);
    ExperimentConfig {
        note: None,
        workers: None,
        quiet: false,
        physics: ladder_drive_balanced(),
        interaction: Some(InteractionSection { c6 }),
        geometry: Some(GeometrySection::Lattice1d { spacing: 2.0, atoms: 50 }),
        partition: PartitionSection {
            mode: PartitionMode::Overlapping,
            ..PartitionSection::default()
        },
        mc: McSection { trajectories: 2000, memoize: true, ..McSection::default() },
        scan: ScanSection::Counting {
            deltas: Grid::Linspace { start: -10.0, stop: 110.0, points: 25 },
        },
        output: out_dir("fig6"),
    }
}

fn fig7() -> ExperimentConfig {
    ExperimentConfig {
        note: Some(
            "two-level reduction driven at 1 MHz; decay 6 MHz and no extra dephasing \
             assumed for the retained transition"
                .into(),
        ),
        workers: None,
        quiet: false,
        physics: PhysicsSection {
            scheme: LevelScheme::TwoLevel,
            omega12: 1.0,
            omega23: 0.0,
            delta: 7.0,
            gamma21: 6.0,
            gamma32: 0.0,
            deph21: 0.0,
            deph32: 0.0,
        },
        interaction: Some(InteractionSection { c6: 900.0 }),
        geometry: Some(GeometrySection::Gas1d {
            atoms: 1000,
            length: None,
            density: Some(3.0),
        }),
        partition: PartitionSection {
            mode: PartitionMode::Overlapping,
            l_lower: Some(1.8),
            l_upper: Some(2.2),
            sare: false,
            high_density: true,
        },
        mc: McSection {
            trajectories: 1000,
            samples_per_trajectory: 10,
            memoize: true,
            ..McSection::default()
        },
        scan: ScanSection::PairCorrelation { deltas: Grid::List(vec![7.0]) },
        output: OutputSection { r_max: Some(20.0), ..out_dir("fig7") },
    }
}

fn fig8() -> ExperimentConfig {
    ExperimentConfig {
        note: Some(
            "balanced ladder drive in the dense-sample window; the pair window \
             brackets the two-photon pair resonance at [c6/(2 delta)]^(1/6)"
                .into(),
        ),
        workers: None,
        quiet: false,
        physics: PhysicsSection { delta: 7.0, ..ladder_drive_balanced() },
        interaction: Some(InteractionSection { c6: 900.0 }),
        geometry: Some(GeometrySection::Gas1d {
            atoms: 1000,
            length: None,
            density: Some(3.0),
        }),
        partition: PartitionSection {
            mode: PartitionMode::Overlapping,
            l_lower: Some(1.8),
            l_upper: Some(2.2),
            sare: false,
            high_density: true,
        },
        mc: McSection {
            trajectories: 1000,
            samples_per_trajectory: 10,
            memoize: true,
            ..McSection::default()
        },
        scan: ScanSection::PairCorrelation { deltas: Grid::List(vec![7.0]) },
        output: OutputSection { r_max: Some(20.0), ..out_dir("fig8") },
    }
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let config = match name {
        "fig2" => fig2(),
        "fig4a" => fig4a(),
        "fig4b" => fig4b(),
        "fig5" => fig5(),
        "fig6" => fig6(),
        "fig7" => fig7(),
        "fig8" => fig8(),
        other => {
            return Err(Error::Config(format!(
                "unknown preset '{other}'; available: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    debug_assert!(config.validate().is_ok());
    Ok(config)
}
