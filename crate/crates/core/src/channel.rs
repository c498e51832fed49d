//! Narrowband MIMO channel matrices, SVD beamforming and SINR.
//!
//! `H = sum_m sqrt(PG_m) e^{j Phi_m} conj(a_rx(AoA_m)) a_tx(AoD_m)^H`.
//! The propagation phase is already folded into `Phi_m` for every MPC, so
//! no separate `-2 pi tau f_c` term is added here.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::qd::{Angles, Mpc};

fn default_spacing() -> f64 {
    0.5
}

fn default_col_axis() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}

fn default_row_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

/// Uniform planar array of omnidirectional elements.
///
/// Element `(m, n)` (row-major index `m * cols + n`) sits at
/// `spacing * (n * col_axis + m * row_axis)` wavelengths. The default axes
/// put the array in a plane parallel to y-z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    pub rows: usize,
    pub cols: usize,
    #[serde(default = "default_spacing")]
    pub spacing_wl: f64,
    #[serde(default = "default_col_axis")]
    pub col_axis: [f64; 3],
    #[serde(default = "default_row_axis")]
    pub row_axis: [f64; 3],
}

impl ArrayConfig {
    pub fn upa(rows: usize, cols: usize) -> Self {
        ArrayConfig {
            rows,
            cols,
            spacing_wl: default_spacing(),
            col_axis: default_col_axis(),
            row_axis: default_row_axis(),
        }
    }

    pub fn elements(&self) -> usize {
        self.rows * self.cols
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::config("array needs at least one row and one column"));
        }
        if !(self.spacing_wl > 0.0 && self.spacing_wl.is_finite()) {
            return Err(Error::config("array spacing must be > 0"));
        }
        for axis in [self.col_axis, self.row_axis] {
            let n = Vec3::from(axis).norm();
            if !(n.is_finite() && (n - 1.0).abs() < 1e-9) {
                return Err(Error::config("array axes must be unit vectors"));
            }
        }
        Ok(())
    }
}

pub type ChannelMatrix = DMatrix<Complex64>;

/// Per-element response toward `angle`, unit magnitude per entry.
pub fn steering_vector(cfg: &ArrayConfig, angle: Angles) -> DVector<Complex64> {
    let u = Vec3::from_az_el(angle.az, angle.el);
    let k = std::f64::consts::TAU * cfg.spacing_wl;
    let pc = k * Vec3::from(cfg.col_axis).dot(u);
    let pr = k * Vec3::from(cfg.row_axis).dot(u);
    DVector::from_iterator(
        cfg.elements(),
        (0..cfg.rows).flat_map(|m| (0..cfg.cols).map(move |n| Complex64::from_polar(1.0, m as f64 * pr + n as f64 * pc))),
    )
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Sums the rank-one contribution of every MPC into a `U x S` matrix.
pub fn assemble_h(mpcs: &[Mpc], tx: &ArrayConfig, rx: &ArrayConfig) -> ChannelMatrix {
    let mut h = ChannelMatrix::zeros(rx.elements(), tx.elements());
    for m in mpcs {
        let amp = Complex64::from_polar(db_to_linear(m.gain_db).sqrt(), m.phase_rad);
        let a_rx = steering_vector(rx, m.aoa).map(|z| z.conj());
        let a_tx = steering_vector(tx, m.aod).map(|z| z.conj());
        h.ger(amp, &a_rx, &a_tx, Complex64::new(1.0, 0.0));
    }
    h
}

#[derive(Debug, Clone)]
pub struct Beamformer {
    pub w_tx: DVector<Complex64>,
    pub w_rx: DVector<Complex64>,
    /// Largest singular value of H.
    pub sigma_max: f64,
}

/// Dominant singular pair of `H`; the first triplet wins on ties.
pub fn svd_beamforming(h: &ChannelMatrix) -> Result<Beamformer> {
    if h.iter().all(|z| *z == Complex64::new(0.0, 0.0)) || h.is_empty() {
        return Err(Error::Outage);
    }
    let svd = h.clone().svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Outage),
    };
    let mut best = 0;
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s > svd.singular_values[best] {
            best = i;
        }
    }
    let w_rx = u.column(best).into_owned();
    let w_tx = v_t.row(best).adjoint();
    Ok(Beamformer {
        w_tx,
        w_rx,
        sigma_max: svd.singular_values[best],
    })
}

/// `|w_rx^H H w_tx|^2`.
pub fn beamformed_gain(h: &ChannelMatrix, w_tx: &DVector<Complex64>, w_rx: &DVector<Complex64>) -> f64 {
    w_rx.dotc(&(h * w_tx)).norm_sqr()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    pub noise_psd_dbm_hz: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        LinkBudget {
            bandwidth_hz: 400e6,
            noise_figure_db: 9.0,
            noise_psd_dbm_hz: -174.0,
        }
    }
}

impl LinkBudget {
    /// `N0 + 10 log10(B) + NF` in dBm.
    pub fn noise_floor_dbm(&self) -> f64 {
        self.noise_psd_dbm_hz + 10.0 * self.bandwidth_hz.log10() + self.noise_figure_db
    }
}

pub struct Link<'a> {
    pub tx_power_dbm: f64,
    pub h: &'a ChannelMatrix,
    pub w_tx: &'a DVector<Complex64>,
    pub w_rx: &'a DVector<Complex64>,
}

pub struct Interferer<'a> {
    pub tx_power_dbm: f64,
    /// Channel from the interferer to the victim receiver.
    pub h: &'a ChannelMatrix,
    /// Beam the interferer uses toward its own receiver; `None` when idle.
    pub w: Option<&'a DVector<Complex64>>,
}

fn dbm_to_mw(dbm: f64) -> f64 {
    db_to_linear(dbm)
}

/// Received signal power after beamforming [dBm].
pub fn received_power_dbm(link: &Link) -> f64 {
    link.tx_power_dbm + linear_to_db(beamformed_gain(link.h, link.w_tx, link.w_rx))
}

/// SINR with conjugate-transpose combining at the receiver.
pub fn sinr_db(link: &Link, interferers: &[Interferer], budget: &LinkBudget) -> f64 {
    let signal = dbm_to_mw(link.tx_power_dbm) * beamformed_gain(link.h, link.w_tx, link.w_rx);
    let interference: f64 = interferers
        .iter()
        .filter_map(|i| i.w.map(|w| dbm_to_mw(i.tx_power_dbm) * beamformed_gain(i.h, w, link.w_rx)))
        .sum();
    linear_to_db(signal / (interference + dbm_to_mw(budget.noise_floor_dbm())))
}

pub fn snr_db(link: &Link, budget: &LinkBudget) -> f64 {
    sinr_db(link, &[], budget)
}
