//! Cartesian parameter sweeps replicated over a list of seeds.

use std::path::PathBuf;

use rayon::prelude::*;
use thiserror::Error;

use crate::engine;
use crate::model::{ConfigError, RunMetrics, SimConfig, Step};

/// Value lists for every configuration field.
///
/// Configurations are enumerated with `edge_count` varying slowest and
/// `attack_start` fastest, in field order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub edge_count: Vec<u32>,
    pub duration: Vec<Step>,
    pub window: Vec<Step>,
    pub gossip_prob: Vec<f64>,
    pub threshold: Vec<f64>,
    pub p_attack: Vec<f64>,
    pub p_honest: Vec<f64>,
    pub attack_start: Vec<Step>,
    pub seeds: Vec<u64>,
    pub out_raw: Option<PathBuf>,
    pub out_agg: Option<PathBuf>,
}

pub const DEFAULT_SEEDS: std::ops::RangeInclusive<u64> = 1..=15;

impl Default for SweepSpec {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            edge_count: vec![d.edge_count],
            duration: vec![d.duration],
            window: vec![d.window],
            gossip_prob: vec![d.gossip_prob],
            threshold: vec![d.threshold],
            p_attack: vec![d.p_attack],
            p_honest: vec![d.p_honest],
            attack_start: vec![d.attack_start],
            seeds: DEFAULT_SEEDS.collect(),
            out_raw: None,
            out_agg: None,
        }
    }
}

impl SweepSpec {
    /// A spec covering exactly one run.
    pub fn single(config: SimConfig) -> Self {
        Self {
            edge_count: vec![config.edge_count],
            duration: vec![config.duration],
            window: vec![config.window],
            gossip_prob: vec![config.gossip_prob],
            threshold: vec![config.threshold],
            p_attack: vec![config.p_attack],
            p_honest: vec![config.p_honest],
            attack_start: vec![config.attack_start],
            seeds: vec![config.seed],
            out_raw: None,
            out_agg: None,
        }
    }

    /// Every configuration of the product, with `seed` left at 0.
    pub fn configs(&self) -> Vec<SimConfig> {
        let mut out = Vec::new();
        for &edge_count in &self.edge_count {
            for &duration in &self.duration {
                for &window in &self.window {
                    for &gossip_prob in &self.gossip_prob {
                        for &threshold in &self.threshold {
                            for &p_attack in &self.p_attack {
                                for &p_honest in &self.p_honest {
                                    for &attack_start in &self.attack_start {
                                        out.push(SimConfig {
                                            edge_count,
                                            duration,
                                            window,
                                            gossip_prob,
                                            threshold,
                                            p_attack,
                                            p_honest,
                                            attack_start,
                                            seed: 0,
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn run_count(&self) -> usize {
        self.configs().len() * self.seeds.len()
    }
}

/// One run and its outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub config: SimConfig,
    pub metrics: RunMetrics,
}

/// Outcomes of all seeds of one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    /// The configuration; its `seed` is meaningless.
    pub config: SimConfig,
    pub runs: usize,
    pub detection_rate_pct: f64,
    /// Mean over detected runs only.
    pub mean_detection_step: Option<f64>,
    pub mean_messages: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("sweep has no configurations")]
    EmptyProduct,
    #[error("sweep has no seeds")]
    NoSeeds,
    #[error("invalid configuration (seed {seed}): {source}\n{config:?}")]
    Run {
        config: Box<SimConfig>,
        seed: u64,
        source: ConfigError,
    },
    #[error("failed to start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub raw: Vec<RawRow>,
    pub aggregate: Vec<AggregateRow>,
}

/// Runs every configuration with every seed on `jobs` worker threads.
///
/// Rows come back in product order (seeds innermost) whatever the number of
/// workers.
pub fn sweep(spec: &SweepSpec, jobs: usize) -> Result<SweepResult, SweepError> {
    let configs = spec.configs();
    if configs.is_empty() {
        return Err(SweepError::EmptyProduct);
    }
    if spec.seeds.is_empty() {
        return Err(SweepError::NoSeeds);
    }
    for cfg in &configs {
        if let Err(source) = cfg.clone().validate() {
            return Err(SweepError::Run {
                config: Box::new(cfg.clone()),
                seed: spec.seeds[0],
                source,
            });
        }
    }

    let runs: Vec<SimConfig> = configs
        .iter()
        .flat_map(|cfg| spec.seeds.iter().map(move |&seed| SimConfig { seed, ..cfg.clone() }))
        .collect();

    let execute = |config: &SimConfig| -> Result<RawRow, SweepError> {
        engine::run(config)
            .map(|metrics| RawRow {
                config: config.clone(),
                metrics,
            })
            .map_err(|source| SweepError::Run {
                config: Box::new(config.clone()),
                seed: config.seed,
                source,
            })
    };

    let raw: Vec<RawRow> = if jobs <= 1 {
        runs.iter().map(execute).collect::<Result<_, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| SweepError::Pool(e.to_string()))?;
        pool.install(|| runs.par_iter().map(execute).collect::<Result<_, _>>())?
    };

    let aggregate = raw.chunks(spec.seeds.len()).map(aggregate_runs).collect();
    Ok(SweepResult { raw, aggregate })
}

/// Aggregates the runs of one configuration.
pub fn aggregate_runs(rows: &[RawRow]) -> AggregateRow {
    assert!(!rows.is_empty(), "aggregate of no runs");
    let runs = rows.len();
    let steps: Vec<f64> = rows
        .iter()
        .filter_map(|r| r.metrics.detection_step)
        .map(f64::from)
        .collect();
    let messages: u64 = rows.iter().map(|r| r.metrics.gossip_messages_sent).sum();
    AggregateRow {
        config: SimConfig {
            seed: 0,
            ..rows[0].config.clone()
        },
        runs,
        detection_rate_pct: 100.0 * steps.len() as f64 / runs as f64,
        mean_detection_step: (!steps.is_empty()).then(|| steps.iter().sum::<f64>() / steps.len() as f64),
        mean_messages: messages as f64 / runs as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> SweepSpec {
        SweepSpec {
            edge_count: vec![5, 8],
            duration: vec![40],
            p_attack: vec![0.0, 0.6],
            seeds: vec![1, 2, 3],
            ..SweepSpec::default()
        }
    }

    #[test]
    fn product_order_and_counts() {
        let spec = small_spec();
        let configs = spec.configs();
        assert_eq!(configs.len(), 4);
        assert_eq!(
            configs.iter().map(|c| (c.edge_count, c.p_attack)).collect::<Vec<_>>(),
            vec![(5, 0.0), (5, 0.6), (8, 0.0), (8, 0.6)]
        );
        assert_eq!(spec.run_count(), 12);
    }

    #[test]
    fn one_config_fifteen_seeds() {
        let spec = SweepSpec {
            edge_count: vec![10],
            ..SweepSpec::default()
        };
        let out = sweep(&spec, 1).unwrap();
        assert_eq!(out.raw.len(), 15);
        assert_eq!(out.aggregate.len(), 1);
        assert_eq!(out.aggregate[0].runs, 15);
    }

    #[test]
    fn silent_sweep_aggregates_to_zero() {
        let spec = SweepSpec {
            edge_count: vec![10],
            p_attack: vec![0.0],
            p_honest: vec![0.0],
            seeds: vec![1, 2],
            ..SweepSpec::default()
        };
        let out = sweep(&spec, 1).unwrap();
        let agg = &out.aggregate[0];
        assert_eq!(agg.detection_rate_pct, 0.0);
        assert_eq!(agg.mean_detection_step, None);
        assert_eq!(agg.mean_messages, 0.0);
    }

    #[test]
    fn aggregate_matches_brute_force() {
        let spec = small_spec();
        let out = sweep(&spec, 1).unwrap();
        for (i, agg) in out.aggregate.iter().enumerate() {
            let rows = &out.raw[i * 3..(i + 1) * 3];
            assert!(rows.iter().all(|r| SimConfig {
                seed: 0,
                ..r.config.clone()
            } == agg.config));
            let mut detected = 0;
            let mut step_sum = 0u32;
            let mut msg_sum = 0u64;
            for r in rows {
                if r.metrics.detected {
                    detected += 1;
                    step_sum += r.metrics.detection_step.unwrap();
                }
                msg_sum += r.metrics.gossip_messages_sent;
            }
            assert_eq!(agg.detection_rate_pct, detected as f64 * 100.0 / 3.0);
            let expected_mean = (detected > 0).then(|| step_sum as f64 / detected as f64);
            assert_eq!(agg.mean_detection_step, expected_mean);
            assert_eq!(agg.mean_messages, msg_sum as f64 / 3.0);
        }
    }

    #[test]
    fn parallel_matches_sequential() {
        let spec = small_spec();
        assert_eq!(sweep(&spec, 1).unwrap(), sweep(&spec, 3).unwrap());
    }

    #[test]
    fn errors() {
        let spec = SweepSpec {
            seeds: vec![],
            ..small_spec()
        };
        assert_eq!(sweep(&spec, 1), Err(SweepError::NoSeeds));
        let spec = SweepSpec {
            threshold: vec![],
            ..small_spec()
        };
        assert_eq!(sweep(&spec, 1), Err(SweepError::EmptyProduct));
        let spec = SweepSpec {
            window: vec![50],
            ..small_spec()
        };
        let err = sweep(&spec, 1).unwrap_err();
        assert!(matches!(
            err,
            SweepError::Run {
                source: ConfigError::WindowExceedsDuration { .. },
                ..
            }
        ));
    }
}
