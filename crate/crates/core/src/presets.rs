//! Built-in scenarios: a rectangular room, an L-shaped corridor with an
//! interfering link, and an outdoor courtyard. The same scenarios ship as
//! files under `scenarios/`.

use std::path::{Path, PathBuf};

use crate::channel::ArrayConfig;
use crate::error::{Error, Result};
use crate::geometry::TriangleMesh;
use crate::qd::{MaterialTable, QdMaterialParams};
use crate::scenario::{NodeKind, NodeSpec, Scenario, ScenarioConfig};
use crate::scenes;

#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub config: ScenarioConfig,
    pub mesh: TriangleMesh,
    pub materials: MaterialTable,
}

impl Preset {
    pub fn scenario(&self) -> Result<Scenario> {
        Scenario::new(self.config.clone(), self.mesh.clone(), self.materials.clone())
    }

    pub fn scenario_file_name(&self) -> String {
        format!("{}.toml", self.name)
    }

    /// Writes the scenario, mesh and material files into `dir` and returns
    /// the scenario path.
    pub fn write_to(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(&self.config.mesh), self.mesh.to_text())?;
        std::fs::write(dir.join(&self.config.materials), self.materials.to_toml())?;
        let path = dir.join(self.scenario_file_name());
        std::fs::write(&path, self.config.to_toml())?;
        Ok(path)
    }
}

fn tx(id: &str, p_dbm: f64, at: [f64; 3]) -> NodeSpec {
    NodeSpec {
        id: id.into(),
        kind: if id == "tx" { NodeKind::Tx } else { NodeKind::InterfererTx },
        tx_power_dbm: Some(p_dbm),
        serving: None,
        speed_mps: 0.0,
        waypoints: vec![at],
        array: ArrayConfig::upa(8, 8),
    }
}

fn rx(id: &str, serving: &str, speed_mps: f64, waypoints: Vec<[f64; 3]>) -> NodeSpec {
    NodeSpec {
        id: id.into(),
        kind: if id == "rx" { NodeKind::Rx } else { NodeKind::InterfererRx },
        tx_power_dbm: None,
        serving: Some(serving.into()),
        speed_mps,
        waypoints,
        array: ArrayConfig::upa(4, 4),
    }
}

fn base_config(name: &str, steps: usize, max_reflections: usize, nodes: Vec<NodeSpec>) -> ScenarioConfig {
    ScenarioConfig {
        name: name.into(),
        mesh: format!("{name}.mesh").into(),
        materials: format!("{name}.materials.toml").into(),
        steps,
        timestep_s: 0.005,
        carrier_freq_hz: 60e9,
        bandwidth_hz: 400e6,
        noise_figure_db: 9.0,
        noise_psd_dbm_hz: -174.0,
        qd: true,
        seed: 1,
        max_reflections,
        rel_threshold_db: f64::NEG_INFINITY,
        abs_threshold_db: -200.0,
        post_qd_filter: true,
        threshold_after_obstruction: false,
        rl_clamp_db: None,
        nodes,
    }
}

fn material(name: &str, s_rl_db: f64, sigma_rl_db: f64) -> QdMaterialParams {
    QdMaterialParams {
        name: name.into(),
        s_rl_db,
        sigma_rl_db,
        ..QdMaterialParams::placeholder()
    }
}

/// Non-calibrated placeholder materials: 0 wall/facade, 1 furniture or
/// vehicle body, 2 ground.
pub fn placeholder_materials() -> MaterialTable {
    let mut m = MaterialTable::new();
    m.insert(0, material("wall", 10.0, 2.0));
    m.insert(1, material("metal", 4.0, 1.0));
    m.insert(2, material("ground", 12.0, 2.5));
    m
}

/// 10 x 19 x 3 m room; the receiver walks away from a ceiling-mounted
/// access point along the long axis.
pub fn indoor1() -> Preset {
    let nodes = vec![
        tx("tx", 20.0, [5.0, 0.1, 2.9]),
        rx("rx", "tx", 1.2, vec![[5.0, 0.1, 1.5], [5.0, 18.9, 1.5]]),
    ];
    Preset {
        name: "indoor1",
        config: base_config("indoor1", 3133, 4, nodes),
        mesh: scenes::indoor_room(),
        materials: placeholder_materials(),
    }
}

/// L-shaped corridor. The receiver walks down the short leg and turns into
/// the long leg, losing line of sight near y = 4.2 m; a second link in the
/// long leg interferes.
pub fn l_room() -> Preset {
    let nodes = vec![
        tx("tx", 20.0, [0.2, 3.0, 2.5]),
        rx("rx", "tx", 1.2, vec![[2.0, 2.5, 1.5], [8.5, 2.5, 1.5], [8.5, 19.0, 1.5]]),
        tx("tx_interf", 20.0, [8.0, 18.8, 2.5]),
        rx("rx_interf", "tx_interf", 0.0, vec![[9.0, 3.0, 1.5]]),
    ];
    Preset {
        name: "l_room",
        config: base_config("l_room", 3831, 4, nodes),
        mesh: scenes::l_corridor(),
        materials: placeholder_materials(),
    }
}

/// 120 x 70 m courtyard; an access point on a facade serves a receiver
/// driving along the yard at 15 km/h, with a second link as interferer.
pub fn courtyard() -> Preset {
    let nodes = vec![
        tx("tx", 30.0, [60.0, 0.2, 3.0]),
        rx("rx", "tx", 4.17, vec![[15.0, 12.0, 1.5], [105.0, 12.0, 1.5]]),
        tx("tx_interf", 30.0, [119.8, 35.0, 3.0]),
        rx("rx_interf", "tx_interf", 0.0, vec![[100.0, 55.0, 1.5]]),
    ];
    Preset {
        name: "courtyard",
        config: base_config("courtyard", 3971, 3, nodes),
        mesh: scenes::courtyard(),
        materials: placeholder_materials(),
    }
}

pub fn all() -> Vec<Preset> {
    vec![indoor1(), l_room(), courtyard()]
}

pub fn by_name(name: &str) -> Result<Preset> {
    all()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::config(format!("unknown preset {name:?}")))
}
