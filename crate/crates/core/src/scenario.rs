//! Scenario configuration, node mobility and the per-(timestep, pair)
//! pipeline: trace -> optional diffuse expansion -> post-expansion filters.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{ArrayConfig, LinkBudget};
use crate::error::{Error, Result};
use crate::geometry::{load_mesh, TriangleMesh, Vec3};
use crate::qd::{expand_ray, MaterialTable, Mpc};
use crate::raytracer::{trace_pair, OpCounter, TraceConfig};
use crate::rng::{tuple_hash, StreamKey};
use crate::simplify::SimplificationSetting;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    Tx,
    Rx,
    InterfererTx,
    InterfererRx,
}

impl NodeKind {
    pub fn is_tx(self) -> bool {
        matches!(self, NodeKind::Tx | NodeKind::InterfererTx)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: String,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tx_power_dbm: Option<f64>,
    /// Transmitter this receiver is attached to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub serving: Option<String>,
    #[serde(default)]
    pub speed_mps: f64,
    /// One point for a static node, otherwise a piecewise-linear track.
    pub waypoints: Vec<[f64; 3]>,
    pub array: ArrayConfig,
}

/// Piecewise-linear position along the waypoints at constant speed,
/// clamped at the final waypoint.
pub fn position_at(node: &NodeSpec, t_s: f64) -> Vec3 {
    let pts: Vec<Vec3> = node.waypoints.iter().map(|&p| Vec3::from(p)).collect();
    let mut remaining = (node.speed_mps * t_s.max(0.0)).max(0.0);
    for w in pts.windows(2) {
        let leg = w[0].distance(w[1]);
        if remaining <= leg {
            if leg == 0.0 {
                return w[0];
            }
            return w[0] + (w[1] - w[0]) * (remaining / leg);
        }
        remaining -= leg;
    }
    *pts.last().expect("validated: at least one waypoint")
}

fn default_timestep() -> f64 {
    0.005
}
fn default_carrier() -> f64 {
    60e9
}
fn default_bandwidth() -> f64 {
    400e6
}
fn default_nf() -> f64 {
    9.0
}
fn default_n0() -> f64 {
    -174.0
}
fn default_rel() -> f64 {
    f64::NEG_INFINITY
}
fn default_abs() -> f64 {
    -200.0
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// Mesh file, relative to the scenario file.
    pub mesh: PathBuf,
    /// Material file, relative to the scenario file.
    pub materials: PathBuf,
    pub steps: usize,
    #[serde(default = "default_timestep")]
    pub timestep_s: f64,
    #[serde(default = "default_carrier")]
    pub carrier_freq_hz: f64,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_hz: f64,
    #[serde(default = "default_nf")]
    pub noise_figure_db: f64,
    #[serde(default = "default_n0")]
    pub noise_psd_dbm_hz: f64,
    #[serde(default)]
    pub qd: bool,
    #[serde(default)]
    pub seed: u64,
    pub max_reflections: usize,
    #[serde(default = "default_rel")]
    pub rel_threshold_db: f64,
    #[serde(default = "default_abs")]
    pub abs_threshold_db: f64,
    /// Re-apply the thresholds to the full MPC list after diffuse expansion.
    #[serde(default = "default_true")]
    pub post_qd_filter: bool,
    #[serde(default)]
    pub threshold_after_obstruction: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rl_clamp_db: Option<[f64; 2]>,
    #[serde(rename = "node")]
    pub nodes: Vec<NodeSpec>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("scenario: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    pub fn simplification(&self) -> SimplificationSetting {
        SimplificationSetting {
            max_reflections: self.max_reflections,
            rel_threshold_db: self.rel_threshold_db,
            abs_threshold_db: self.abs_threshold_db,
        }
    }

    pub fn link_budget(&self) -> LinkBudget {
        LinkBudget {
            bandwidth_hz: self.bandwidth_hz,
            noise_figure_db: self.noise_figure_db,
            noise_psd_dbm_hz: self.noise_psd_dbm_hz,
        }
    }

    pub fn trace_config(&self) -> TraceConfig {
        TraceConfig {
            max_reflection_order: self.max_reflections,
            rel_threshold_db: self.rel_threshold_db,
            abs_threshold_db: self.abs_threshold_db,
            carrier_freq_hz: self.carrier_freq_hz,
            seed: self.seed,
            threshold_after_obstruction: self.threshold_after_obstruction,
            exhaustive_checks: false,
            rl_clamp_db: self.rl_clamp_db.map(|[a, b]| (a, b)),
        }
    }

    pub fn time_at(&self, timestep: usize) -> f64 {
        timestep as f64 * self.timestep_s
    }

    pub fn node(&self, id: &str) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Directed (tx, rx) node-index pairs: every transmitter toward every
    /// receiver, in node order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let txs = self.nodes.iter().enumerate().filter(|(_, n)| n.kind.is_tx());
        txs.flat_map(|(i, _)| {
            self.nodes
                .iter()
                .enumerate()
                .filter(|(_, n)| !n.kind.is_tx())
                .map(move |(j, _)| (i, j))
        })
        .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::config("steps must be >= 1"));
        }
        if !(self.timestep_s > 0.0 && self.timestep_s.is_finite()) {
            return Err(Error::config("timestep_s must be > 0"));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::config("bandwidth_hz must be > 0"));
        }
        self.trace_config().validate()?;
        let mut ids = HashSet::new();
        for n in &self.nodes {
            if n.id.is_empty() || n.id.chars().any(char::is_whitespace) {
                return Err(Error::config(format!("node id {:?} must be non-empty without whitespace", n.id)));
            }
            if !ids.insert(n.id.as_str()) {
                return Err(Error::config(format!("duplicate node id {}", n.id)));
            }
            if n.waypoints.is_empty() {
                return Err(Error::config(format!("node {}: at least one waypoint", n.id)));
            }
            if n.waypoints.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::config(format!("node {}: non-finite waypoint", n.id)));
            }
            if !(n.speed_mps >= 0.0 && n.speed_mps.is_finite()) {
                return Err(Error::config(format!("node {}: speed must be >= 0", n.id)));
            }
            n.array.validate()?;
            match (n.kind.is_tx(), n.tx_power_dbm) {
                (true, None) => return Err(Error::config(format!("node {}: transmitter needs tx_power_dbm", n.id))),
                (false, Some(_)) => return Err(Error::config(format!("node {}: receiver cannot set tx_power_dbm", n.id))),
                (true, Some(p)) if !p.is_finite() => return Err(Error::config(format!("node {}: bad tx power", n.id))),
                _ => {}
            }
        }
        for n in self.nodes.iter().filter(|n| !n.kind.is_tx()) {
            let s = n
                .serving
                .as_deref()
                .ok_or_else(|| Error::config(format!("receiver {} has no serving transmitter", n.id)))?;
            match self.node(s) {
                Some(t) if t.kind.is_tx() => {}
                _ => return Err(Error::config(format!("receiver {}: serving {s} is not a transmitter", n.id))),
            }
        }
        if self.pairs().is_empty() {
            return Err(Error::config("scenario needs at least one transmitter and one receiver"));
        }
        Ok(())
    }
}

/// A validated scenario with its geometry and materials loaded.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub mesh: TriangleMesh,
    pub materials: MaterialTable,
}

impl Scenario {
    pub fn new(config: ScenarioConfig, mesh: TriangleMesh, materials: MaterialTable) -> Result<Self> {
        config.validate()?;
        for t in mesh.triangles() {
            if !materials.contains(t.material_id()) {
                return Err(Error::config(format!("mesh uses unknown material {}", t.material_id())));
            }
        }
        Ok(Scenario { config, mesh, materials })
    }

    /// Reads the scenario TOML and the mesh and material files it names.
    pub fn load(path: &Path) -> Result<Self> {
        let config = ScenarioConfig::from_toml(&std::fs::read_to_string(path)?)?;
        Self::load_with(path, config)
    }

    /// Like [`Scenario::load`] with an already parsed (possibly overridden)
    /// configuration; relative paths resolve against `path`'s directory.
    pub fn load_with(path: &Path, config: ScenarioConfig) -> Result<Self> {
        let dir = path.parent().unwrap_or(Path::new("."));
        let materials = MaterialTable::load(&dir.join(&config.materials))?;
        let mesh_file = std::fs::File::open(dir.join(&config.mesh))?;
        let mesh = load_mesh(std::io::BufReader::new(mesh_file), |id| materials.contains(id))?;
        Self::new(config, mesh, materials)
    }

    /// SHA-256 over the resolved configuration, mesh and materials.
    pub fn digest(&self) -> String {
        let mut cfg = self.config.clone();
        // file locations do not change the simulation
        cfg.mesh = PathBuf::new();
        cfg.materials = PathBuf::new();
        let mut h = Sha256::new();
        h.update(cfg.to_toml().as_bytes());
        h.update(self.mesh.to_text().as_bytes());
        h.update(self.materials.to_toml().as_bytes());
        hex::encode(h.finalize())
    }

    pub fn instance_count(&self) -> usize {
        self.config.steps * self.config.pairs().len()
    }
}

/// All MPCs for one (timestep, tx, rx) triple.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelInstance {
    pub timestep: usize,
    pub tx_id: String,
    pub rx_id: String,
    pub mpcs: Vec<Mpc>,
    pub counters: OpCounter,
    /// Wall time spent producing this instance. Not persisted in traces.
    pub wall_time_ns: u64,
}

/// Stream for reflection losses of one directed pair; held across timesteps.
pub fn reflection_loss_key(seed: u64, tx_id: &str, rx_id: &str) -> StreamKey {
    StreamKey::new(seed).with("rl").with(tx_id).with(rx_id)
}

/// Stream for the diffuse components of one ray at one timestep.
pub fn diffuse_key(seed: u64, timestep: usize, tx_id: &str, rx_id: &str, tuple: &[usize]) -> StreamKey {
    StreamKey::new(seed)
        .with("qd")
        .with_u64(timestep as u64)
        .with(tx_id)
        .with(rx_id)
        .with_u64(tuple_hash(tuple))
}

pub fn compute_instance(scn: &Scenario, timestep: usize, pair: (usize, usize)) -> Result<ChannelInstance> {
    let start = Instant::now();
    let cfg = &scn.config;
    let (tx, rx) = (&cfg.nodes[pair.0], &cfg.nodes[pair.1]);
    let t = cfg.time_at(timestep);
    let trace_cfg = cfg.trace_config();
    let out = trace_pair(
        position_at(tx, t),
        position_at(rx, t),
        &scn.mesh,
        &scn.materials,
        &trace_cfg,
        &reflection_loss_key(cfg.seed, &tx.id, &rx.id),
    )?;
    let mut mpcs = Vec::new();
    for ray in &out.rays {
        if cfg.qd && ray.order() > 0 {
            let mut rng = diffuse_key(cfg.seed, timestep, &tx.id, &rx.id, &ray.triangles).stream();
            mpcs.extend(expand_ray(ray, &scn.mesh, &scn.materials, &mut rng)?);
        } else {
            mpcs.push(Mpc::main_cursor(ray));
        }
    }
    if cfg.post_qd_filter {
        mpcs = cfg.simplification().apply(&mpcs);
    }
    Ok(ChannelInstance {
        timestep,
        tx_id: tx.id.clone(),
        rx_id: rx.id.clone(),
        mpcs,
        counters: out.counter,
        wall_time_ns: start.elapsed().as_nanos() as u64,
    })
}

/// Runs `f` on a pool of `jobs` threads (`0` = rayon default).
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Every channel instance in canonical (timestep, pair) order.
pub fn run(scn: &Scenario, jobs: usize) -> Result<Vec<ChannelInstance>> {
    let pairs = scn.config.pairs();
    let n = scn.config.steps * pairs.len();
    with_jobs(jobs, || {
        (0..n)
            .into_par_iter()
            .map(|k| compute_instance(scn, k / pairs.len(), pairs[k % pairs.len()]))
            .collect::<Result<Vec<_>>>()
    })?
}
