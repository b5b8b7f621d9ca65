//! Per-round trace dumps.

use std::io::Write;

use anyhow::Result;
use attestree_core::sim::{Direction, Trace, FOREIGN_PID};

/// One CSV line per record and honest node: `round, node, level, pid,
/// ill_directed`. Infinite levels print as `inf`; parents whose key belongs
/// to no node print as `foreign`.
pub fn write_trace_csv<W: Write>(trace: &Trace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["round", "node", "level", "pid", "ill_directed"])?;
    for rec in &trace.records {
        for u in 0..rec.node_count() {
            let pid = match rec.pid[u] {
                FOREIGN_PID => "foreign".to_string(),
                p => p.to_string(),
            };
            let ill = u8::from(rec.direction[u] == Direction::Ill);
            w.write_record([
                rec.round.to_string(),
                u.to_string(),
                rec.level[u].to_string(),
                pid,
                ill.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
