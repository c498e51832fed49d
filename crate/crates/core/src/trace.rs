//! Line-delimited channel trace files.
//!
//! ```text
//! #qdtrace-trace v1 digest=<hex>
//! I <timestep> <tx> <rx> <n_mpcs> <tuples> <geom_ops> <checks> <paths> <budget> <per-order|->
//! M <timestep> <tx> <rx> <kind> <delay_s> <gain_db> <aod_az> <aod_el> <aoa_az> <aoa_el> <phase_rad> <parent>
//! END <n_instances>
//! ```
//!
//! Each `I` line is followed by exactly `n_mpcs` `M` lines. Floats use the
//! shortest representation that round-trips, so reading is lossless.
//! Wall times are not stored; they live in the run manifest.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::qd::{Angles, Mpc, MpcKind};
use crate::raytracer::OpCounter;
use crate::scenario::ChannelInstance;

pub const TRACE_MAGIC: &str = "#qdtrace-trace";
pub const TRACE_VERSION: u32 = 1;

pub fn write_trace<W: Write + ?Sized>(out: &mut W, digest: &str, instances: &[ChannelInstance]) -> Result<()> {
    writeln!(out, "{TRACE_MAGIC} v{TRACE_VERSION} digest={digest}")?;
    for inst in instances {
        let c = &inst.counters;
        let per_order = if c.tuples_per_order.is_empty() {
            "-".to_string()
        } else {
            c.tuples_per_order.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
        };
        writeln!(
            out,
            "I {} {} {} {} {} {} {} {} {} {}",
            inst.timestep,
            inst.tx_id,
            inst.rx_id,
            inst.mpcs.len(),
            c.tuples_visited,
            c.geometric_ops,
            c.obstruction_checks,
            c.paths_checked,
            c.check_budget,
            per_order
        )?;
        for m in &inst.mpcs {
            writeln!(
                out,
                "M {} {} {} {} {:?} {:?} {:?} {:?} {:?} {:?} {:?} {:016x}",
                inst.timestep,
                inst.tx_id,
                inst.rx_id,
                m.kind.as_str(),
                m.delay_s,
                m.gain_db,
                m.aod.az,
                m.aod.el,
                m.aoa.az,
                m.aoa.el,
                m.phase_rad,
                m.parent
            )?;
        }
    }
    writeln!(out, "END {}", instances.len())?;
    Ok(())
}

/// Parsed trace file.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub digest: String,
    pub instances: Vec<ChannelInstance>,
}

fn field<T: std::str::FromStr>(tok: &str, what: &str, record: usize) -> Result<T> {
    tok.parse().map_err(|_| Error::Trace {
        record,
        msg: format!("bad {what} {tok:?}"),
    })
}

fn parse_mpc(toks: &[&str], inst: &ChannelInstance, record: usize) -> Result<Mpc> {
    let err = |msg: String| Error::Trace { record, msg };
    if toks.len() != 13 || toks[0] != "M" {
        return Err(err(format!("expected MPC record with 13 fields, got {:?}", toks.first())));
    }
    let ts: usize = field(toks[1], "timestep", record)?;
    if ts != inst.timestep || toks[2] != inst.tx_id || toks[3] != inst.rx_id {
        return Err(err("MPC record does not match its instance".into()));
    }
    let kind = MpcKind::parse(toks[4]).ok_or_else(|| err(format!("unknown kind {:?}", toks[4])))?;
    let f = |i: usize, name: &str| field::<f64>(toks[i], name, record);
    let parent = u64::from_str_radix(toks[12], 16).map_err(|_| err(format!("bad parent {:?}", toks[12])))?;
    Ok(Mpc {
        kind,
        delay_s: f(5, "delay")?,
        gain_db: f(6, "gain")?,
        aod: Angles::new(f(7, "aod_az")?, f(8, "aod_el")?),
        aoa: Angles::new(f(9, "aoa_az")?, f(10, "aoa_el")?),
        phase_rad: f(11, "phase")?,
        parent,
    })
}

/// Reads a whole trace. Record indices in errors are 1-based line numbers.
pub fn read_trace<R: BufRead>(src: R) -> Result<Trace> {
    let mut lines = src.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or(Error::Trace {
        record: 1,
        msg: "empty file".into(),
    })?;
    let header = header?;
    let digest = header
        .strip_prefix(&format!("{TRACE_MAGIC} v{TRACE_VERSION} digest="))
        .ok_or(Error::Trace {
            record: 1,
            msg: format!("unsupported header {header:?}"),
        })?
        .to_string();

    let mut instances: Vec<ChannelInstance> = Vec::new();
    let mut pending = 0usize;
    let mut last = 1;
    for (record, line) in lines {
        let line = line?;
        last = record;
        let toks: Vec<&str> = line.split_ascii_whitespace().collect();
        let err = |msg: String| Error::Trace { record, msg };
        if pending > 0 {
            let inst = instances.last_mut().expect("pending implies an instance");
            let m = parse_mpc(&toks, inst, record)?;
            inst.mpcs.push(m);
            pending -= 1;
            continue;
        }
        match toks.first().copied() {
            Some("I") => {
                if toks.len() != 11 {
                    return Err(err(format!("instance record needs 11 fields, got {}", toks.len())));
                }
                let tuples_per_order = if toks[10] == "-" {
                    Vec::new()
                } else {
                    toks[10]
                        .split(',')
                        .map(|t| field(t, "per-order count", record))
                        .collect::<Result<_>>()?
                };
                pending = field(toks[4], "MPC count", record)?;
                instances.push(ChannelInstance {
                    timestep: field(toks[1], "timestep", record)?,
                    tx_id: toks[2].to_string(),
                    rx_id: toks[3].to_string(),
                    mpcs: Vec::with_capacity(pending),
                    counters: OpCounter {
                        tuples_visited: field(toks[5], "tuples_visited", record)?,
                        geometric_ops: field(toks[6], "geometric_ops", record)?,
                        obstruction_checks: field(toks[7], "obstruction_checks", record)?,
                        paths_checked: field(toks[8], "paths_checked", record)?,
                        check_budget: field(toks[9], "check_budget", record)?,
                        tuples_per_order,
                    },
                    wall_time_ns: 0,
                });
            }
            Some("END") => {
                let n: usize = toks
                    .get(1)
                    .ok_or_else(|| err("END without count".into()))
                    .and_then(|t| field(t, "instance count", record))?;
                if n != instances.len() {
                    return Err(err(format!("END declares {n} instances, found {}", instances.len())));
                }
                return Ok(Trace { digest, instances });
            }
            _ => return Err(err(format!("unexpected record {line:?}"))),
        }
    }
    Err(Error::Trace {
        record: last + 1,
        msg: "truncated trace (missing END)".into(),
    })
}
