//! Per-receiver SNR/SINR time series from a set of channel instances.
//!
//! Every serving link uses SVD beams. An interfering transmitter points its
//! beam at the first receiver it serves; if it serves none, or that link is
//! in outage, it is idle.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{assemble_h, received_power_dbm, sinr_db, snr_db, svd_beamforming, ChannelMatrix, Interferer, Link};
use crate::error::{Error, Result};
use crate::scenario::{ChannelInstance, ScenarioConfig};

/// One receiver at one timestep. Outage gives NaN powers and ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSample {
    pub timestep: usize,
    pub time_s: f64,
    pub rx_id: String,
    pub tx_id: String,
    pub n_mpcs: usize,
    pub rx_power_dbm: f64,
    pub snr_db: f64,
    pub sinr_db: f64,
}

impl LinkSample {
    pub fn is_outage(&self) -> bool {
        self.sinr_db.is_nan()
    }
}

struct Beams {
    w_tx: DVector<Complex64>,
    w_rx: DVector<Complex64>,
}

/// Evaluates all receivers at every timestep, in (timestep, receiver) order.
pub fn evaluate_links(cfg: &ScenarioConfig, instances: &[ChannelInstance]) -> Result<Vec<LinkSample>> {
    let index: HashMap<(usize, &str, &str), &ChannelInstance> = instances
        .iter()
        .map(|i| ((i.timestep, i.tx_id.as_str(), i.rx_id.as_str()), i))
        .collect();
    let budget = cfg.link_budget();
    let txs: Vec<_> = cfg.nodes.iter().filter(|n| n.kind.is_tx()).collect();
    let rxs: Vec<_> = cfg.nodes.iter().filter(|n| !n.kind.is_tx()).collect();

    let per_step = |ts: usize| -> Result<Vec<LinkSample>> {
        let channel = |tx: &str, rx: &str| -> Result<(ChannelMatrix, usize)> {
            let inst = index.get(&(ts, tx, rx)).ok_or_else(|| {
                Error::Metric(format!("missing channel instance for timestep {ts}, {tx} -> {rx}"))
            })?;
            let (t, r) = (cfg.node(tx).expect("tx exists"), cfg.node(rx).expect("rx exists"));
            Ok((assemble_h(&inst.mpcs, &t.array, &r.array), inst.mpcs.len()))
        };
        let mut h: HashMap<(&str, &str), (ChannelMatrix, usize)> = HashMap::new();
        for t in &txs {
            for r in &rxs {
                h.insert((t.id.as_str(), r.id.as_str()), channel(&t.id, &r.id)?);
            }
        }
        // serving beams per receiver
        let mut beams: HashMap<&str, Beams> = HashMap::new();
        for r in &rxs {
            let s = r.serving.as_deref().expect("validated");
            let (m, n) = &h[&(s, r.id.as_str())];
            if *n == 0 {
                continue;
            }
            match svd_beamforming(m) {
                Ok(bf) => {
                    beams.insert(r.id.as_str(), Beams { w_tx: bf.w_tx, w_rx: bf.w_rx });
                }
                Err(Error::Outage) => {}
                Err(e) => return Err(e),
            }
        }
        let tx_beam = |tx: &str| -> Option<&DVector<Complex64>> {
            rxs.iter()
                .find(|r| r.serving.as_deref() == Some(tx))
                .and_then(|r| beams.get(r.id.as_str()))
                .map(|b| &b.w_tx)
        };
        let mut out = Vec::with_capacity(rxs.len());
        for r in &rxs {
            let s = r.serving.as_deref().expect("validated");
            let (m, n) = &h[&(s, r.id.as_str())];
            let mut sample = LinkSample {
                timestep: ts,
                time_s: cfg.time_at(ts),
                rx_id: r.id.clone(),
                tx_id: s.to_string(),
                n_mpcs: *n,
                rx_power_dbm: f64::NAN,
                snr_db: f64::NAN,
                sinr_db: f64::NAN,
            };
            if let Some(b) = beams.get(r.id.as_str()) {
                let p_tx = cfg.node(s).and_then(|t| t.tx_power_dbm).expect("validated");
                let link = Link { tx_power_dbm: p_tx, h: m, w_tx: &b.w_tx, w_rx: &b.w_rx };
                let interferers: Vec<Interferer> = txs
                    .iter()
                    .filter(|t| t.id != s)
                    .map(|t| Interferer {
                        tx_power_dbm: t.tx_power_dbm.expect("validated"),
                        h: &h[&(t.id.as_str(), r.id.as_str())].0,
                        w: tx_beam(&t.id),
                    })
                    .collect();
                sample.rx_power_dbm = received_power_dbm(&link);
                sample.snr_db = snr_db(&link, &budget);
                sample.sinr_db = sinr_db(&link, &interferers, &budget);
            }
            out.push(sample);
        }
        Ok(out)
    };

    let steps: Vec<Vec<LinkSample>> = (0..cfg.steps).into_par_iter().map(per_step).collect::<Result<_>>()?;
    Ok(steps.into_iter().flatten().collect())
}

pub const LINK_CSV_HEADER: &str = "timestep,time_s,rx_id,tx_id,n_mpcs,rx_power_dbm,snr_db,sinr_db";

pub fn write_link_csv<W: Write + ?Sized>(out: &mut W, samples: &[LinkSample]) -> Result<()> {
    writeln!(out, "{LINK_CSV_HEADER}")?;
    for s in samples {
        writeln!(
            out,
            "{},{:?},{},{},{},{:?},{:?},{:?}",
            s.timestep, s.time_s, s.rx_id, s.tx_id, s.n_mpcs, s.rx_power_dbm, s.snr_db, s.sinr_db
        )?;
    }
    Ok(())
}

pub fn read_link_csv<R: BufRead>(src: R) -> Result<Vec<LinkSample>> {
    let mut lines = src.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == LINK_CSV_HEADER => {}
        _ => return Err(Error::Parse { line: 1, msg: "missing link CSV header".into() }),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        let err = |msg: &str| Error::Parse { line: lineno, msg: msg.to_string() };
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 8 {
            return Err(err("expected 8 columns"));
        }
        let num = |k: usize| f[k].parse::<f64>().map_err(|_| err("bad number"));
        out.push(LinkSample {
            timestep: f[0].parse().map_err(|_| err("bad timestep"))?,
            time_s: num(1)?,
            rx_id: f[2].to_string(),
            tx_id: f[3].to_string(),
            n_mpcs: f[4].parse().map_err(|_| err("bad MPC count"))?,
            rx_power_dbm: num(5)?,
            snr_db: num(6)?,
            sinr_db: num(7)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip_with_outage() {
        let s = vec![
            LinkSample {
                timestep: 0,
                time_s: 0.0,
                rx_id: "rx".into(),
                tx_id: "tx".into(),
                n_mpcs: 3,
                rx_power_dbm: -50.25,
                snr_db: 28.7,
                sinr_db: 12.1,
            },
            LinkSample {
                timestep: 1,
                time_s: 0.005,
                rx_id: "rx".into(),
                tx_id: "tx".into(),
                n_mpcs: 0,
                rx_power_dbm: f64::NAN,
                snr_db: f64::NAN,
                sinr_db: f64::NAN,
            },
        ];
        let mut buf = Vec::new();
        write_link_csv(&mut buf, &s).unwrap();
        let back = read_link_csv(&buf[..]).unwrap();
        assert_eq!(back[0], s[0]);
        assert!(back[1].is_outage() && back[1].n_mpcs == 0);
    }
}
