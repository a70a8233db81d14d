//! CSV files for raw runs and per-configuration aggregates.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::harness::sweep::{AggregateRow, RawRow};

pub const RAW_HEADER: &str = "edge_count,duration,window,gossip_prob,threshold,p_attack,p_honest,seed,detected,detection_step,gossip_messages_sent,alerts_generated";

pub const AGGREGATE_HEADER: &str = "edge_count,duration,window,gossip_prob,threshold,p_attack,p_honest,runs,detection_rate_pct,mean_detection_step,mean_messages";

#[derive(Debug, Error)]
#[error("cannot write {}: {source}", path.display())]
pub struct OutputError {
    pub path: PathBuf,
    #[source]
    pub source: io::Error,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Raw rows as CSV text, header included.
pub fn raw_csv(rows: &[RawRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(RAW_HEADER);
    out.push('\n');
    for RawRow { config: c, metrics: m } in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            c.edge_count,
            c.duration,
            c.window,
            c.gossip_prob,
            c.threshold,
            c.p_attack,
            c.p_honest,
            c.seed,
            m.detected,
            opt(m.detection_step),
            m.gossip_messages_sent,
            m.alerts_generated,
        );
    }
    out
}

/// Aggregate rows as CSV text, header included.
pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(AGGREGATE_HEADER);
    out.push('\n');
    for row in rows {
        let c = &row.config;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            c.edge_count,
            c.duration,
            c.window,
            c.gossip_prob,
            c.threshold,
            c.p_attack,
            c.p_honest,
            row.runs,
            row.detection_rate_pct,
            opt(row.mean_detection_step),
            row.mean_messages,
        );
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<(), OutputError> {
    fs::write(path, contents).map_err(|source| OutputError {
        path: path.to_owned(),
        source,
    })
}

pub fn write_raw(rows: &[RawRow], path: &Path) -> Result<(), OutputError> {
    write_file(path, &raw_csv(rows))
}

pub fn write_aggregate(rows: &[AggregateRow], path: &Path) -> Result<(), OutputError> {
    write_file(path, &aggregate_csv(rows))
}
