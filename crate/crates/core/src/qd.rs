//! Quasi-deterministic diffuse components.
//!
//! Each reflected deterministic ray becomes the main cursor of a cluster.
//! Every reflector on its path contributes `n_pre` pre-cursors and `n_post`
//! post-cursors drawn with that reflector's material parameters:
//!
//! * arrival offsets: Poisson process (exponential inter-arrivals)
//! * gain: `PG_0,dB - K_dB - (10/ln 10) |dtau|/gamma + S_dB`
//! * angles: Laplacian offsets around the parent's AoD/AoA
//! * phase: uniform on [0, 2pi)
//!
//! The direct ray produces no diffuse components.

use std::collections::BTreeMap;
use std::f64::consts::{LN_10, PI, TAU};
use std::path::Path;

use rand::Rng;
use rand_distr::{Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raytracer::DeterministicRay;

/// Rician and Poisson parameters of one surface material.
///
/// `S` is configured in dB and converted to natural-log units with
/// `ln(10)/10` inside the exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QdMaterialParams {
    #[serde(default)]
    pub name: String,
    /// Reflection loss Rician location [dB].
    pub s_rl_db: f64,
    /// Reflection loss Rician scale [dB].
    pub sigma_rl_db: f64,
    /// Cluster loss factor K [dB].
    pub s_k_db: f64,
    pub sigma_k_db: f64,
    /// Power-delay decay constants [s].
    pub s_gamma_pre_s: f64,
    pub sigma_gamma_pre_s: f64,
    pub s_gamma_post_s: f64,
    pub sigma_gamma_post_s: f64,
    /// Decay deviation sigma_s [dB].
    pub s_sigma_s_pre_db: f64,
    pub sigma_sigma_s_pre_db: f64,
    pub s_sigma_s_post_db: f64,
    pub sigma_sigma_s_post_db: f64,
    /// Poisson arrival rates [1/s].
    pub lambda_pre_hz: f64,
    pub lambda_post_hz: f64,
    pub n_pre: usize,
    pub n_post: usize,
    /// Laplacian scale of angular offsets [rad].
    pub angle_spread_rad: f64,
}

impl QdMaterialParams {
    /// Non-calibrated indoor placeholder (concrete-like surface at 60 GHz).
    pub fn placeholder() -> Self {
        QdMaterialParams {
            name: "placeholder".into(),
            s_rl_db: 10.0,
            sigma_rl_db: 2.0,
            s_k_db: 10.0,
            sigma_k_db: 2.0,
            s_gamma_pre_s: 2.0e-9,
            sigma_gamma_pre_s: 0.5e-9,
            s_gamma_post_s: 4.0e-9,
            sigma_gamma_post_s: 1.0e-9,
            s_sigma_s_pre_db: 3.0,
            sigma_sigma_s_pre_db: 1.0,
            s_sigma_s_post_db: 3.0,
            sigma_sigma_s_post_db: 1.0,
            lambda_pre_hz: 1.2e9,
            lambda_post_hz: 0.8e9,
            n_pre: 3,
            n_post: 5,
            angle_spread_rad: 5f64.to_radians(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sigmas = [
            ("sigma_rl_db", self.sigma_rl_db),
            ("sigma_k_db", self.sigma_k_db),
            ("sigma_gamma_pre_s", self.sigma_gamma_pre_s),
            ("sigma_gamma_post_s", self.sigma_gamma_post_s),
            ("sigma_sigma_s_pre_db", self.sigma_sigma_s_pre_db),
            ("sigma_sigma_s_post_db", self.sigma_sigma_s_post_db),
            ("angle_spread_rad", self.angle_spread_rad),
        ];
        for (name, v) in sigmas {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{}: {name} must be finite and >= 0", self.name)));
            }
        }
        let locs = [
            self.s_rl_db,
            self.s_k_db,
            self.s_gamma_pre_s,
            self.s_gamma_post_s,
            self.s_sigma_s_pre_db,
            self.s_sigma_s_post_db,
        ];
        if locs.iter().any(|v| !v.is_finite()) {
            return Err(Error::config(format!("{}: non-finite parameter", self.name)));
        }
        for (count, rate, gamma, side) in [
            (self.n_pre, self.lambda_pre_hz, self.s_gamma_pre_s, "pre"),
            (self.n_post, self.lambda_post_hz, self.s_gamma_post_s, "post"),
        ] {
            if count > 0 && !(rate > 0.0 && rate.is_finite()) {
                return Err(Error::config(format!("{}: lambda_{side}_hz must be > 0", self.name)));
            }
            if count > 0 && !(gamma > 0.0) {
                return Err(Error::config(format!("{}: s_gamma_{side}_s must be > 0", self.name)));
            }
        }
        Ok(())
    }

    pub fn diffuse_per_reflector(&self) -> usize {
        self.n_pre + self.n_post
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MaterialTable {
    materials: BTreeMap<u32, QdMaterialParams>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MaterialFile {
    #[serde(default)]
    calibrated: bool,
    #[serde(rename = "material", default)]
    materials: Vec<MaterialEntry>,
}

#[derive(Deserialize)]
struct MaterialEntry {
    id: u32,
    #[serde(flatten)]
    params: QdMaterialParams,
}

impl MaterialTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: u32, params: QdMaterialParams) {
        self.materials.insert(id, params);
    }

    pub fn get(&self, id: u32) -> Option<&QdMaterialParams> {
        self.materials.get(&id)
    }

    pub fn contains(&self, id: u32) -> bool {
        self.materials.contains_key(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &QdMaterialParams)> {
        self.materials.iter().map(|(k, v)| (*k, v))
    }

    /// Parses the TOML material file: a list of `[[material]]` tables, each
    /// with an `id` and every [`QdMaterialParams`] field.
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: MaterialFile =
            toml::from_str(text).map_err(|e| Error::config(format!("material file: {e}")))?;
        let _ = file.calibrated;
        let mut table = MaterialTable::new();
        for entry in file.materials {
            entry.params.validate()?;
            if table.materials.insert(entry.id, entry.params).is_some() {
                return Err(Error::config(format!("duplicate material id {}", entry.id)));
            }
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        let mut out = String::from(
            "# Units: *_db in dB, *_s in seconds, *_hz in 1/s, angle_spread_rad in radians.\n\
             # S (sigma_s) is given in dB; the model converts it with ln(10)/10.\n\
             calibrated = false\n",
        );
        for (id, p) in &self.materials {
            out.push_str("\n[[material]]\n");
            out.push_str(&format!("id = {id}\n"));
            let body = toml::to_string(p).expect("material params serialize");
            out.push_str(&body);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Angles {
    pub az: f64,
    pub el: f64,
}

impl Angles {
    pub fn new(az: f64, el: f64) -> Self {
        Angles { az, el }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MpcKind {
    MainCursor,
    PreCursor,
    PostCursor,
}

impl MpcKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MpcKind::MainCursor => "main",
            MpcKind::PreCursor => "pre",
            MpcKind::PostCursor => "post",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "main" => Some(MpcKind::MainCursor),
            "pre" => Some(MpcKind::PreCursor),
            "post" => Some(MpcKind::PostCursor),
            _ => None,
        }
    }
}

/// One multipath component as consumed by the channel builder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mpc {
    pub delay_s: f64,
    pub gain_db: f64,
    pub aod: Angles,
    pub aoa: Angles,
    /// Total phase in [0, 2pi), propagation term included.
    pub phase_rad: f64,
    pub kind: MpcKind,
    /// Tuple hash of the deterministic ray this component belongs to.
    pub parent: u64,
}

impl Mpc {
    pub fn main_cursor(ray: &DeterministicRay) -> Self {
        Mpc {
            delay_s: ray.delay_s,
            gain_db: ray.gain_db,
            aod: ray.aod,
            aoa: ray.aoa,
            phase_rad: ray.phase_rad,
            kind: MpcKind::MainCursor,
            parent: ray.tuple_hash(),
        }
    }
}

/// `|Z|` with `Z = (s + sigma N1) + j sigma N2`.
pub fn sample_rician<R: Rng + ?Sized>(s: f64, sigma: f64, rng: &mut R) -> Result<f64> {
    if !(sigma >= 0.0) {
        return Err(Error::config(format!("Rician scale must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(s.abs());
    }
    let re: f64 = s + sigma * rng.sample::<f64, _>(StandardNormal);
    let im: f64 = sigma * rng.sample::<f64, _>(StandardNormal);
    Ok(re.hypot(im))
}

/// Zero-mean Laplacian with scale `b` (standard deviation `sqrt(2) b`).
pub fn sample_laplacian<R: Rng + ?Sized>(b: f64, rng: &mut R) -> f64 {
    if b == 0.0 {
        return 0.0;
    }
    let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
    -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Exponential variate with the given rate, strictly positive.
fn sample_exp<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    -u.ln() / rate
}

/// Exponential variate conditioned to lie in (0, limit).
fn sample_exp_below<R: Rng + ?Sized>(rate: f64, limit: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    let x = -(1.0 - u * (1.0 - (-rate * limit).exp())).ln() / rate;
    x.min(limit * (1.0 - f64::EPSILON))
}

pub(crate) fn wrap_azimuth(az: f64) -> f64 {
    let w = (az + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        PI
    } else {
        w
    }
}

fn jitter<R: Rng + ?Sized>(a: Angles, b: f64, rng: &mut R) -> Angles {
    let az = wrap_azimuth(a.az + sample_laplacian(b, rng));
    let el = (a.el + sample_laplacian(b, rng)).clamp(-PI / 2.0, PI / 2.0);
    Angles { az, el }
}

/// dB slope of the diffuse tail for a decay constant `gamma` [dB per second].
pub fn decay_slope_db_per_s(gamma_s: f64) -> f64 {
    -(10.0 / LN_10) / gamma_s
}

/// The `n_pre + n_post` diffuse components one reflector adds around `ray`.
pub fn diffuse_batch<R: Rng + ?Sized>(
    ray: &DeterministicRay,
    params: &QdMaterialParams,
    rng: &mut R,
) -> Result<Vec<Mpc>> {
    let mut out = Vec::with_capacity(params.diffuse_per_reflector());
    let parent = ray.tuple_hash();
    let sides = [
        (
            MpcKind::PreCursor,
            params.n_pre,
            params.lambda_pre_hz,
            (params.s_gamma_pre_s, params.sigma_gamma_pre_s),
            (params.s_sigma_s_pre_db, params.sigma_sigma_s_pre_db),
        ),
        (
            MpcKind::PostCursor,
            params.n_post,
            params.lambda_post_hz,
            (params.s_gamma_post_s, params.sigma_gamma_post_s),
            (params.s_sigma_s_post_db, params.sigma_sigma_s_post_db),
        ),
    ];
    for (kind, count, rate, gamma_p, sigma_s_p) in sides {
        if count == 0 {
            continue;
        }
        let k_db = sample_rician(params.s_k_db, params.sigma_k_db, rng)?;
        let gamma = sample_rician(gamma_p.0, gamma_p.1, rng)?;
        if !(gamma > 0.0) {
            return Err(Error::config("decay constant sampled as zero"));
        }
        let sigma_s_db = sample_rician(sigma_s_p.0, sigma_s_p.1, rng)?;
        let mut offset = 0.0;
        for _ in 0..count {
            let delay = match kind {
                MpcKind::PreCursor => {
                    // arrivals run backward from tau_0 and stay at tau > 0
                    let remaining = ray.delay_s - offset;
                    offset += sample_exp_below(rate, remaining, rng);
                    ray.delay_s - offset
                }
                _ => {
                    offset += sample_exp(rate, rng);
                    ray.delay_s + offset
                }
            };
            let s_db = if sigma_s_db > 0.0 {
                sigma_s_db * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            let gain_db = ray.gain_db - k_db + decay_slope_db_per_s(gamma) * offset + s_db;
            let aod = jitter(ray.aod, params.angle_spread_rad, rng);
            let aoa = jitter(ray.aoa, params.angle_spread_rad, rng);
            let phase_rad = rng.random::<f64>() * TAU;
            out.push(Mpc {
                delay_s: delay,
                gain_db,
                aod,
                aoa,
                phase_rad,
                kind,
                parent,
            });
        }
    }
    Ok(out)
}

/// Main cursor plus one diffuse batch per reflector, each drawn with the
/// material of the surface it stems from.
pub fn multi_bounce<R: Rng + ?Sized>(
    ray: &DeterministicRay,
    reflector_params: &[&QdMaterialParams],
    rng: &mut R,
) -> Result<Vec<Mpc>> {
    if ray.order() == 0 {
        return Err(Error::config("the direct ray has no diffuse components"));
    }
    if reflector_params.len() != ray.order() {
        return Err(Error::config(format!(
            "expected material parameters for {} reflectors, got {}",
            ray.order(),
            reflector_params.len()
        )));
    }
    let mut out = vec![Mpc::main_cursor(ray)];
    for params in reflector_params {
        out.extend(diffuse_batch(ray, params, rng)?);
    }
    Ok(out)
}

/// [`multi_bounce`] with the same parameters on every reflector.
pub fn generate_cluster<R: Rng + ?Sized>(
    ray: &DeterministicRay,
    params: &QdMaterialParams,
    rng: &mut R,
) -> Result<Vec<Mpc>> {
    let per: Vec<&QdMaterialParams> = vec![params; ray.order()];
    multi_bounce(ray, &per, rng)
}

/// Looks up each reflector's material and expands `ray`.
pub fn expand_ray<R: Rng + ?Sized>(
    ray: &DeterministicRay,
    mesh: &crate::geometry::TriangleMesh,
    materials: &MaterialTable,
    rng: &mut R,
) -> Result<Vec<Mpc>> {
    let mut per = Vec::with_capacity(ray.order());
    for &t in &ray.triangles {
        let id = mesh
            .get(t)
            .ok_or_else(|| Error::config(format!("triangle {t} out of range")))?
            .material_id();
        per.push(
            materials
                .get(id)
                .ok_or_else(|| Error::config(format!("missing material {id}")))?,
        );
    }
    multi_bounce(ray, &per, rng)
}

/// Expected component count of a cluster: `r (n_pre + n_post) + 1`.
pub fn cluster_size(order: usize, params: &QdMaterialParams) -> usize {
    order * params.diffuse_per_reflector() + 1
}

/// Copy of `params` with the cluster loss, decay constants and decay
/// deviations fixed at their location values.
pub fn pinned(params: &QdMaterialParams) -> QdMaterialParams {
    QdMaterialParams {
        sigma_k_db: 0.0,
        sigma_gamma_pre_s: 0.0,
        sigma_gamma_post_s: 0.0,
        sigma_sigma_s_pre_db: 0.0,
        sigma_sigma_s_post_db: 0.0,
        ..params.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatCheck {
    pub name: &'static str,
    pub empirical: f64,
    pub analytic: f64,
    /// Relative tolerance, or the absolute critical value for `phase_ks`.
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QdStatsReport {
    pub clusters: usize,
    pub checks: Vec<StatCheck>,
}

impl QdStatsReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Kolmogorov-Smirnov 1% critical value for large `n`.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}

/// KS distance between `samples` and the uniform law on [0, 2pi).
pub fn ks_uniform_phase(samples: &mut [f64]) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = x / TAU;
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

fn rel_check(name: &'static str, empirical: f64, analytic: f64, tolerance: f64) -> StatCheck {
    let pass = if analytic == 0.0 {
        empirical == 0.0
    } else {
        ((empirical - analytic) / analytic).abs() <= tolerance
    };
    StatCheck { name, empirical, analytic, tolerance, pass }
}

/// Draws `clusters` single-bounce clusters with K, gamma and sigma_s pinned
/// and compares the diffuse statistics against their analytic values.
pub fn qd_stats<R: Rng + ?Sized>(clusters: usize, params: &QdMaterialParams, rng: &mut R) -> Result<QdStatsReport> {
    if clusters < 1000 {
        return Err(Error::config("qd-stats needs at least 1000 clusters"));
    }
    let p = pinned(params);
    p.validate()?;
    if p.n_post < 2 {
        return Err(Error::config("qd-stats needs n_post >= 2"));
    }
    let ray = DeterministicRay {
        triangles: vec![0],
        points: Vec::new(),
        length_m: 30.0,
        delay_s: 30.0 / crate::raytracer::SPEED_OF_LIGHT,
        gain_db: -70.0,
        reflection_losses_db: vec![p.s_rl_db],
        aod: Angles::new(0.0, 0.0),
        aoa: Angles::new(0.0, 0.0),
        phase_rad: 0.0,
    };
    let expected = cluster_size(1, &p);
    let mut size_ok = true;
    let (mut gaps, mut gap_n) = (0.0, 0usize);
    let (mut sx, mut sy, mut sxx, mut sxy, mut n_fit) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut sq, mut n_ang) = (0.0, 0usize);
    let mut phases = Vec::with_capacity(clusters * p.diffuse_per_reflector());
    for _ in 0..clusters {
        let cl = generate_cluster(&ray, &p, rng)?;
        size_ok &= cl.len() == expected;
        let mut prev = ray.delay_s;
        for m in cl.iter().filter(|m| m.kind != MpcKind::MainCursor) {
            phases.push(m.phase_rad);
            sq += m.aod.az * m.aod.az;
            n_ang += 1;
            if m.kind == MpcKind::PostCursor {
                gaps += m.delay_s - prev;
                gap_n += 1;
                prev = m.delay_s;
                let (x, y) = (m.delay_s - ray.delay_s, m.gain_db);
                sx += x;
                sy += y;
                sxx += x * x;
                sxy += x * y;
                n_fit += 1.0;
            }
        }
    }
    let slope = (n_fit * sxy - sx * sy) / (n_fit * sxx - sx * sx);
    let n_phase = phases.len();
    let ks = ks_uniform_phase(&mut phases);
    let crit = ks_critical_1pct(n_phase);
    Ok(QdStatsReport {
        clusters,
        checks: vec![
            rel_check("post_interarrival_mean_s", gaps / gap_n as f64, 1.0 / p.lambda_post_hz, 0.01),
            rel_check("post_decay_slope_db_per_s", slope, decay_slope_db_per_s(p.s_gamma_post_s), 0.05),
            rel_check(
                "angle_offset_std_rad",
                (sq / n_ang as f64).sqrt(),
                std::f64::consts::SQRT_2 * p.angle_spread_rad,
                0.02,
            ),
            StatCheck { name: "phase_ks", empirical: ks, analytic: 0.0, tolerance: crit, pass: ks < crit },
            StatCheck {
                name: "cluster_size",
                empirical: if size_ok { expected as f64 } else { f64::NAN },
                analytic: expected as f64,
                tolerance: 0.0,
                pass: size_ok,
            },
        ],
    })
}
