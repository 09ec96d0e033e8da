//! CSV and JSON writers. Numbers use Rust's shortest round-trip formatting,
//! which does not depend on the process locale.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::json;

use super::{AoOutcome, ComplexArray, IterationTrace, ScheduleOutcome, SweepRow};
use crate::error::Result;

/// Shortest representation that parses back to the same `f64`.
pub fn format_f64(x: f64) -> String {
    format!("{x}")
}

pub fn trace_csv(out: &AoOutcome) -> String {
    iteration_trace_csv(&out.trace, out.w.num_users())
}

/// Trace rows for `num_users` users; also used for the partial trace carried
/// by an aborted run.
pub fn iteration_trace_csv(trace: &IterationTrace, num_users: usize) -> String {
    let kn = num_users;
    let mut s = String::from("iter,wssr_nats,wssr_clamped_nats");
    for k in 1..=kn {
        let _ = write!(s, ",rate_user_{k}");
    }
    s.push_str(",admm_iters,qp_iters,sdp_gap,wall_ms\n");
    for r in &trace.records {
        let _ = write!(s, "{},{},{}", r.iter, format_f64(r.wssr), format_f64(r.wssr_clamped));
        for rate in &r.rates {
            let _ = write!(s, ",{}", format_f64(*rate));
        }
        let _ = writeln!(
            s,
            ",{},{},{},{}",
            r.admm_iters,
            r.qp_iters,
            format_f64(r.sdp_gap),
            format_f64(r.wall_ms)
        );
    }
    s
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("param_value,seed,final_wssr_nats,final_wssr_clamped_nats,iters,total_ms\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            format_f64(r.param_value),
            r.seed,
            format_f64(r.final_wssr),
            format_f64(r.final_wssr_clamped),
            r.iters,
            format_f64(r.total_ms)
        );
    }
    s
}

/// One row per block: the large block (if it ran) first, then the small
/// blocks numbered from 0.
pub fn schedule_csv(out: &ScheduleOutcome) -> String {
    let mut s = String::from("block,kind,final_wssr_nats,final_wssr_clamped_nats,iters,total_ms\n");
    let rows = out
        .large
        .iter()
        .map(|o| ("large", o))
        .chain(out.blocks.iter().map(|o| ("small", o)));
    let mut small = 0;
    for (kind, o) in rows {
        let block = if kind == "large" {
            "-".to_string()
        } else {
            small += 1;
            (small - 1).to_string()
        };
        let _ = writeln!(
            s,
            "{block},{kind},{},{},{},{}",
            format_f64(o.trace.final_wssr()),
            format_f64(o.trace.final_clamped()),
            o.iterations(),
            format_f64(o.trace.total_ms())
        );
    }
    s
}

/// Final `W`, `μ` and `L` as flat arrays with their dimensions.
pub fn result_json(out: &AoOutcome) -> serde_json::Value {
    let w = ComplexArray::from_vectors(out.w.users());
    let mu = ComplexArray::from_vectors(std::slice::from_ref(out.mu.as_vector()));
    let l = out.assignment.as_ref().map(|l| {
        json!({
            "dims": [l.num_ris(), l.num_users()],
            "data": l.l.iter().flatten().map(|&b| u8::from(b)).collect::<Vec<_>>(),
        })
    });
    json!({
        "w": {"dims": w.dims, "re": w.re, "im": w.im, "antennas_per_bs": out.w.antennas_per_bs()},
        "mu": {"dims": [out.mu.len()], "re": mu.re, "im": mu.im},
        "l": l,
        "initial_wssr_nats": out.trace.initial_wssr(),
        "final_wssr_nats": out.trace.final_wssr(),
        "final_wssr_clamped_nats": out.trace.final_clamped(),
        "iterations": out.iterations(),
        "converged": out.trace.converged,
    })
}

pub fn write_trace_csv(path: &Path, out: &AoOutcome) -> Result<()> {
    std::fs::write(path, trace_csv(out))?;
    Ok(())
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    std::fs::write(path, sweep_csv(rows))?;
    Ok(())
}

pub fn write_schedule_csv(path: &Path, out: &ScheduleOutcome) -> Result<()> {
    std::fs::write(path, schedule_csv(out))?;
    Ok(())
}

pub fn write_result_json(path: &Path, out: &AoOutcome) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&result_json(out))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
