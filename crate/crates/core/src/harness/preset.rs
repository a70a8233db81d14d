//! Built-in experiment grids.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::harness::sweep::{SweepSpec, DEFAULT_SEEDS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Edge count against attack strength.
    Fig2,
    /// Threshold against attack strength on 75 edges.
    Fig3,
    /// Honest traffic only.
    FalsePositive,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown preset `{0}` (expected fig2, fig3 or false_positive)")]
pub struct UnknownPreset(pub String);

impl FromStr for Preset {
    type Err = UnknownPreset;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fig2" => Ok(Preset::Fig2),
            "fig3" => Ok(Preset::Fig3),
            "false_positive" => Ok(Preset::FalsePositive),
            other => Err(UnknownPreset(other.to_owned())),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::FalsePositive => "false_positive",
        })
    }
}

/// 0.1, 0.2, …, 1.0
pub fn attack_grid() -> Vec<f64> {
    (1..=10).map(|i| f64::from(i) / 10.0).collect()
}

/// 0.25, 0.5, …, 1.5
pub fn threshold_grid() -> Vec<f64> {
    (1..=6).map(|i| f64::from(i) * 0.25).collect()
}

pub const EDGE_COUNTS: [u32; 4] = [10, 25, 50, 75];

impl Preset {
    pub fn spec(self) -> SweepSpec {
        let base = SweepSpec {
            duration: vec![200],
            window: vec![10],
            gossip_prob: vec![0.5],
            p_honest: vec![0.01],
            attack_start: vec![0],
            seeds: DEFAULT_SEEDS.collect(),
            ..SweepSpec::default()
        };
        match self {
            Preset::Fig2 => SweepSpec {
                edge_count: EDGE_COUNTS.to_vec(),
                threshold: vec![0.5],
                p_attack: attack_grid(),
                ..base
            },
            Preset::Fig3 => SweepSpec {
                edge_count: vec![75],
                threshold: threshold_grid(),
                p_attack: attack_grid(),
                ..base
            },
            Preset::FalsePositive => SweepSpec {
                edge_count: EDGE_COUNTS.to_vec(),
                threshold: threshold_grid(),
                p_attack: vec![0.0],
                p_honest: vec![0.01, 0.02, 0.03, 0.04, 0.05],
                ..base
            },
        }
    }
}

pub fn preset(name: &str) -> Result<SweepSpec, UnknownPreset> {
    name.parse::<Preset>().map(Preset::spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(attack_grid(), vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]);
        assert_eq!(threshold_grid(), vec![0.25, 0.5, 0.75, 1.0, 1.25, 1.5]);
    }

    #[test]
    fn fig2_shape() {
        let spec = preset("fig2").unwrap();
        assert_eq!(spec.configs().len(), 40);
        assert_eq!(spec.run_count(), 600);
        assert_eq!(spec.threshold, vec![0.5]);
    }

    #[test]
    fn fig3_shape() {
        let spec = preset("fig3").unwrap();
        assert_eq!(spec.configs().len(), 60);
        assert_eq!(spec.edge_count, vec![75]);
    }

    #[test]
    fn false_positive_has_no_attack() {
        let spec = preset("false_positive").unwrap();
        assert_eq!(spec.configs().len(), 4 * 6 * 5);
        assert!(spec.configs().iter().all(|c| c.p_attack == 0.0));
    }

    #[test]
    fn unknown_name() {
        assert_eq!(preset("fig9"), Err(UnknownPreset("fig9".into())));
        assert_eq!("fig3".parse::<Preset>().unwrap().to_string(), "fig3");
    }
}
