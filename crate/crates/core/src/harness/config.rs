//! Line-based `key=value` configuration files.
//!
//! ```text
//! # fig. 2 style sweep
//! edge_count=10,25,50,75
//! p_attack=0.1,0.2,0.3
//! seed=1,2,3
//! ```
//!
//! Every key takes a comma-separated list. A file where every key has a single
//! value and `seed` is given describes one run; anything else is a sweep.

use std::fmt::Display;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::harness::sweep::SweepSpec;
use crate::model::SimConfig;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("expected `key=value`")]
    MissingEquals,
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{0}` given more than once")]
    DuplicateKey(String),
    #[error("invalid value `{value}` for key `{key}`")]
    InvalidValue { key: String, value: String },
    #[error("key `{0}` has an empty value list")]
    EmptyList(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParsedConfig {
    Single(SimConfig),
    Sweep(Box<SweepSpec>),
}

impl ParsedConfig {
    pub fn into_sweep(self) -> SweepSpec {
        match self {
            ParsedConfig::Single(cfg) => SweepSpec::single(cfg),
            ParsedConfig::Sweep(spec) => *spec,
        }
    }
}

const KEYS: &[&str] = &[
    "edge_count",
    "duration",
    "window",
    "gossip_prob",
    "threshold",
    "p_attack",
    "p_honest",
    "attack_start",
    "seed",
    "out_raw",
    "out_agg",
];

fn parse_list<T: FromStr>(key: &str, raw: &str, line: usize) -> Result<Vec<T>, ParseError> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Err(ParseError {
            line,
            kind: ParseErrorKind::EmptyList(key.to_owned()),
        });
    }
    raw.split(',')
        .map(|item| {
            let item = item.trim();
            item.parse().map_err(|_| ParseError {
                line,
                kind: ParseErrorKind::InvalidValue {
                    key: key.to_owned(),
                    value: item.to_owned(),
                },
            })
        })
        .collect()
}

/// Parses a config file. Omitted keys take the defaults of
/// [`SimConfig::default`]; an omitted `seed` means seeds 1 to 15.
pub fn parse_config(text: &str) -> Result<ParsedConfig, ParseError> {
    let mut spec = SweepSpec::default();
    let mut seen: Vec<&str> = Vec::new();
    let mut all_single = true;

    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or(ParseError {
            line,
            kind: ParseErrorKind::MissingEquals,
        })?;
        let key = key.trim();
        let Some(&known) = KEYS.iter().find(|&&k| k == key) else {
            return Err(ParseError {
                line,
                kind: ParseErrorKind::UnknownKey(key.to_owned()),
            });
        };
        if seen.contains(&known) {
            return Err(ParseError {
                line,
                kind: ParseErrorKind::DuplicateKey(key.to_owned()),
            });
        }
        seen.push(known);

        let n = match known {
            "edge_count" => set(&mut spec.edge_count, parse_list(key, value, line)?),
            "duration" => set(&mut spec.duration, parse_list(key, value, line)?),
            "window" => set(&mut spec.window, parse_list(key, value, line)?),
            "gossip_prob" => set(&mut spec.gossip_prob, parse_list(key, value, line)?),
            "threshold" => set(&mut spec.threshold, parse_list(key, value, line)?),
            "p_attack" => set(&mut spec.p_attack, parse_list(key, value, line)?),
            "p_honest" => set(&mut spec.p_honest, parse_list(key, value, line)?),
            "attack_start" => set(&mut spec.attack_start, parse_list(key, value, line)?),
            "seed" => set(&mut spec.seeds, parse_list(key, value, line)?),
            "out_raw" | "out_agg" => {
                let path = value.trim();
                if path.is_empty() {
                    return Err(ParseError {
                        line,
                        kind: ParseErrorKind::EmptyList(key.to_owned()),
                    });
                }
                let slot = if known == "out_raw" {
                    &mut spec.out_raw
                } else {
                    &mut spec.out_agg
                };
                *slot = Some(PathBuf::from(path));
                1
            }
            _ => unreachable!("key list and match arms disagree"),
        };
        all_single &= n == 1;
    }

    let has_outputs = spec.out_raw.is_some() || spec.out_agg.is_some();
    if all_single && seen.contains(&"seed") && !has_outputs {
        let configs = spec.configs();
        debug_assert_eq!(configs.len(), 1);
        let cfg = SimConfig {
            seed: spec.seeds[0],
            ..configs.into_iter().next().expect("single-valued spec has one config")
        };
        return Ok(ParsedConfig::Single(cfg));
    }
    Ok(ParsedConfig::Sweep(Box::new(spec)))
}

fn set<T>(slot: &mut Vec<T>, values: Vec<T>) -> usize {
    *slot = values;
    slot.len()
}

/// Writes `config` in the format read by [`parse_config`]. Reals use the
/// shortest representation that parses back to the same value.
pub fn render_config(config: &SimConfig) -> String {
    let fields: [(&str, &dyn Display); 9] = [
        ("edge_count", &config.edge_count),
        ("duration", &config.duration),
        ("window", &config.window),
        ("gossip_prob", &config.gossip_prob),
        ("threshold", &config.threshold),
        ("p_attack", &config.p_attack),
        ("p_honest", &config.p_honest),
        ("attack_start", &config.attack_start),
        ("seed", &config.seed),
    ];
    fields.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}
