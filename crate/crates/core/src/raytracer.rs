//! Method-of-images specular path enumeration.
//!
//! The reflection tree is walked depth first over triangle tuples (ordered
//! from the TX side) with no two consecutive equal entries. For each tuple
//! the RX is mirrored across the tuple in reverse, and the path is rebuilt
//! from the TX by intersecting the line toward each image with the
//! corresponding triangle.
//!
//! Thresholding runs between geometry and obstruction: gains are assigned
//! to every geometrically valid path, the absolute and relative thresholds
//! prune the list, and only survivors pay for obstruction checks.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    mirror_point, plane_crossing, point_in_triangle, scan_obstruction, Segment, Triangle,
    TriangleMesh, Vec3,
};
use crate::qd::{sample_rician, Angles, MaterialTable, QdMaterialParams};
use crate::rng::{tuple_hash, StreamKey};
use crate::simplify;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Operation counts of one trace, following the `r + (r+1) T` per-ray model.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounter {
    pub tuples_visited: u64,
    /// One unit per mirror/intersection step (`r` per tuple of order `r`).
    pub geometric_ops: u64,
    /// One unit per triangle tested against a segment.
    pub obstruction_checks: u64,
    /// Paths that entered the obstruction phase.
    pub paths_checked: u64,
    /// Checks those paths would cost with no early exit.
    pub check_budget: u64,
    /// Visited tuples by reflection order.
    pub tuples_per_order: Vec<u64>,
}

impl OpCounter {
    pub fn merge(&mut self, o: &OpCounter) {
        self.tuples_visited += o.tuples_visited;
        self.geometric_ops += o.geometric_ops;
        self.obstruction_checks += o.obstruction_checks;
        self.paths_checked += o.paths_checked;
        self.check_budget += o.check_budget;
        if self.tuples_per_order.len() < o.tuples_per_order.len() {
            self.tuples_per_order.resize(o.tuples_per_order.len(), 0);
        }
        for (a, b) in self.tuples_per_order.iter_mut().zip(&o.tuples_per_order) {
            *a += b;
        }
    }

    pub fn total_ops(&self) -> u64 {
        self.geometric_ops + self.obstruction_checks
    }

    fn visit(&mut self, order: usize) {
        self.tuples_visited += 1;
        if self.tuples_per_order.len() <= order {
            self.tuples_per_order.resize(order + 1, 0);
        }
        self.tuples_per_order[order] += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceConfig {
    pub max_reflection_order: usize,
    /// Relative threshold gamma_th [dB]; `-inf` disables it.
    pub rel_threshold_db: f64,
    /// Absolute threshold Gamma_th [dB].
    pub abs_threshold_db: f64,
    pub carrier_freq_hz: f64,
    pub seed: u64,
    /// Obstruction-check every candidate before thresholding.
    pub threshold_after_obstruction: bool,
    /// Test every triangle on every segment instead of stopping at the first
    /// blocker. Results are identical; counters become exact.
    pub exhaustive_checks: bool,
    /// Optional clamp of sampled reflection losses [dB].
    pub rl_clamp_db: Option<(f64, f64)>,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            max_reflection_order: 2,
            rel_threshold_db: f64::NEG_INFINITY,
            abs_threshold_db: -200.0,
            carrier_freq_hz: 60e9,
            seed: 0,
            threshold_after_obstruction: false,
            exhaustive_checks: false,
            rl_clamp_db: None,
        }
    }
}

impl TraceConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.abs_threshold_db.is_finite() {
            return Err(Error::config("absolute threshold must be finite"));
        }
        if self.rel_threshold_db.is_nan() || self.rel_threshold_db == f64::INFINITY {
            return Err(Error::config("relative threshold must be finite or -inf"));
        }
        if !(self.carrier_freq_hz > 0.0 && self.carrier_freq_hz.is_finite()) {
            return Err(Error::config("carrier frequency must be > 0"));
        }
        if let Some((lo, hi)) = self.rl_clamp_db {
            if !(lo <= hi) {
                return Err(Error::config("reflection loss clamp must satisfy lo <= hi"));
            }
        }
        Ok(())
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq_hz
    }
}

/// A valid specular path before gains are assigned.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGeometry {
    pub triangles: Vec<usize>,
    /// TX, reflection points from the TX side, RX.
    pub points: Vec<Vec3>,
}

impl PathGeometry {
    pub fn length_m(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].distance(w[1])).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterministicRay {
    /// Reflecting triangle indices, TX side first.
    pub triangles: Vec<usize>,
    pub points: Vec<Vec3>,
    pub length_m: f64,
    pub delay_s: f64,
    pub gain_db: f64,
    pub reflection_losses_db: Vec<f64>,
    pub aod: Angles,
    pub aoa: Angles,
    /// `r pi - 2 pi frac(l / lambda)` folded into [0, 2pi).
    pub phase_rad: f64,
}

impl DeterministicRay {
    pub fn order(&self) -> usize {
        self.triangles.len()
    }

    pub fn tuple_hash(&self) -> u64 {
        tuple_hash(&self.triangles)
    }
}

/// Images `RX^(1..r)`; `RX^(k)` mirrors `RX^(k-1)` across the k-th triangle
/// counted from the RX side.
pub fn image_chain(rx: Vec3, tuple: &[&Triangle]) -> Result<Vec<Vec3>> {
    if tuple.is_empty() {
        return Err(Error::config("image chain needs at least one reflector"));
    }
    let mut images = Vec::with_capacity(tuple.len());
    let mut cur = rx;
    for tri in tuple.iter().rev() {
        cur = mirror_point(cur, tri);
        images.push(cur);
    }
    Ok(images)
}

/// Rebuilds the specular path for `tuple`, or `None` when a plane crossing
/// fails or a reflection point leaves its triangle.
pub fn build_path(
    tx: Vec3,
    rx: Vec3,
    tuple: &[usize],
    mesh: &TriangleMesh,
    counter: &mut OpCounter,
) -> Option<PathGeometry> {
    let r = tuple.len();
    counter.geometric_ops += r as u64;
    if r == 0 {
        return (tx != rx).then(|| PathGeometry {
            triangles: Vec::new(),
            points: vec![tx, rx],
        });
    }
    let tris: Vec<&Triangle> = tuple.iter().map(|&i| &mesh.triangles()[i]).collect();
    let images = image_chain(rx, &tris).ok()?;
    let mut points = Vec::with_capacity(r + 2);
    points.push(tx);
    let mut cur = tx;
    for (k, tri) in tris.iter().enumerate() {
        let target = images[r - 1 - k];
        let (_, p) = plane_crossing(&Segment::new(cur, target), tri)?;
        if !point_in_triangle(p, tri) {
            return None;
        }
        points.push(p);
        cur = p;
    }
    points.push(rx);
    Some(PathGeometry {
        triangles: tuple.to_vec(),
        points,
    })
}

/// Reflecting triangles excluded for each of the `r + 1` segments.
pub fn segment_exclusions(tuple: &[usize]) -> Vec<Vec<usize>> {
    let r = tuple.len();
    (0..=r)
        .map(|k| {
            let mut ex = Vec::with_capacity(2);
            if k >= 1 {
                ex.push(tuple[k - 1]);
            }
            if k < r && !ex.contains(&tuple[k]) {
                ex.push(tuple[k]);
            }
            ex
        })
        .collect()
}

/// Obstruction checks a full scan of this path costs: `(r+1) T` minus the
/// per-segment exclusions.
pub fn path_check_budget(tuple: &[usize], triangle_count: usize) -> u64 {
    segment_exclusions(tuple)
        .iter()
        .map(|ex| (triangle_count - ex.iter().filter(|&&i| i < triangle_count).count()) as u64)
        .sum()
}

/// True iff every segment of the path is clear.
pub fn check_obstruction(
    path: &PathGeometry,
    mesh: &TriangleMesh,
    exhaustive: bool,
    counter: &mut OpCounter,
) -> bool {
    counter.paths_checked += 1;
    counter.check_budget += path_check_budget(&path.triangles, mesh.len());
    let mut clear = true;
    for (k, ex) in segment_exclusions(&path.triangles).iter().enumerate() {
        let seg = Segment::new(path.points[k], path.points[k + 1]);
        if scan_obstruction(&seg, mesh, ex, exhaustive, &mut counter.obstruction_checks) {
            clear = false;
            if !exhaustive {
                break;
            }
        }
    }
    clear
}

/// `20 log10(lambda / (4 pi l)) - sum(RL)`.
pub fn deterministic_gain_db(total_length_m: f64, reflection_losses_db: &[f64], wavelength_m: f64) -> f64 {
    20.0 * (wavelength_m / (4.0 * PI * total_length_m)).log10() - reflection_losses_db.iter().sum::<f64>()
}

pub fn sample_reflection_loss<R: Rng + ?Sized>(
    material: &QdMaterialParams,
    clamp: Option<(f64, f64)>,
    rng: &mut R,
) -> Result<f64> {
    let rl = sample_rician(material.s_rl_db, material.sigma_rl_db, rng)?;
    Ok(match clamp {
        Some((lo, hi)) => rl.clamp(lo, hi),
        None => rl,
    })
}

/// Number of tuples in a reflection tree: `1 + sum_{r=1..R} T (T-1)^(r-1)`.
pub fn predicted_tuple_count(triangles: u64, max_order: usize) -> u64 {
    let mut total = 1u64;
    let mut level = triangles;
    for _ in 1..=max_order {
        total = total.saturating_add(level);
        level = level.saturating_mul(triangles.saturating_sub(1));
    }
    total
}

/// Tuples of order `r` in the tree: `T (T-1)^(r-1)`.
pub fn predicted_tuples_at_order(triangles: u64, order: usize) -> u64 {
    if order == 0 {
        1
    } else {
        triangles.saturating_mul(triangles.saturating_sub(1).saturating_pow(order as u32 - 1))
    }
}

#[derive(Debug, Clone, Default)]
pub struct TraceOutput {
    pub rays: Vec<DeterministicRay>,
    pub counter: OpCounter,
}

fn direction_angles(from: Vec3, to: Vec3) -> Angles {
    let (az, el) = (to - from).to_az_el();
    Angles::new(az, el)
}

fn ray_phase(order: usize, length_m: f64, wavelength_m: f64) -> f64 {
    let phase = (order as f64 * PI - TAU * (length_m / wavelength_m).fract()).rem_euclid(TAU);
    if phase >= TAU {
        0.0
    } else {
        phase
    }
}

/// Assigns gain, delay, angles and phase to a geometric path. Reflection
/// losses come from a stream keyed by the tuple, so the same path keeps its
/// losses across timesteps and threshold settings.
pub fn finish_ray(
    path: PathGeometry,
    mesh: &TriangleMesh,
    materials: &MaterialTable,
    cfg: &TraceConfig,
    rl_key: &StreamKey,
) -> Result<DeterministicRay> {
    let lambda = cfg.wavelength_m();
    let mut losses = Vec::with_capacity(path.triangles.len());
    if !path.triangles.is_empty() {
        let mut rng = rl_key.clone().with_u64(tuple_hash(&path.triangles)).stream();
        for &t in &path.triangles {
            let id = mesh.triangles()[t].material_id();
            let mat = materials
                .get(id)
                .ok_or_else(|| Error::config(format!("missing material {id}")))?;
            losses.push(sample_reflection_loss(mat, cfg.rl_clamp_db, &mut rng)?);
        }
    }
    let length_m = path.length_m();
    let n = path.points.len();
    Ok(DeterministicRay {
        length_m,
        delay_s: length_m / SPEED_OF_LIGHT,
        gain_db: deterministic_gain_db(length_m, &losses, lambda),
        aod: direction_angles(path.points[0], path.points[1]),
        aoa: direction_angles(path.points[n - 1], path.points[n - 2]),
        phase_rad: ray_phase(path.triangles.len(), length_m, lambda),
        reflection_losses_db: losses,
        triangles: path.triangles,
        points: path.points,
    })
}

fn enumerate_tuples(
    tuple: &mut Vec<usize>,
    triangles: usize,
    max_order: usize,
    visit: &mut dyn FnMut(&[usize]),
) {
    visit(tuple);
    if tuple.len() == max_order {
        return;
    }
    for i in 0..triangles {
        if tuple.last() == Some(&i) {
            continue;
        }
        tuple.push(i);
        enumerate_tuples(tuple, triangles, max_order, visit);
        tuple.pop();
    }
}

/// Visits every tuple of the reflection tree in depth-first preorder.
pub fn for_each_tuple(triangles: usize, max_order: usize, mut visit: impl FnMut(&[usize])) {
    let mut tuple = Vec::with_capacity(max_order);
    enumerate_tuples(&mut tuple, triangles, max_order, &mut visit);
}

/// All unobstructed specular rays between `tx` and `rx` up to the configured
/// order, in tree order.
pub fn trace_pair(
    tx: Vec3,
    rx: Vec3,
    mesh: &TriangleMesh,
    materials: &MaterialTable,
    cfg: &TraceConfig,
    rl_key: &StreamKey,
) -> Result<TraceOutput> {
    cfg.validate()?;
    let mut counter = OpCounter::default();
    let mut candidates = Vec::new();
    for_each_tuple(mesh.len(), cfg.max_reflection_order, |tuple| {
        counter.visit(tuple.len());
        if let Some(path) = build_path(tx, rx, tuple, mesh, &mut counter) {
            candidates.push(path);
        }
    });

    let mut rays = Vec::with_capacity(candidates.len());
    for path in candidates {
        rays.push(finish_ray(path, mesh, materials, cfg, rl_key)?);
    }

    let thresholds = simplify::SimplificationSetting {
        max_reflections: cfg.max_reflection_order,
        rel_threshold_db: cfg.rel_threshold_db,
        abs_threshold_db: cfg.abs_threshold_db,
    };
    let clear = |ray: &DeterministicRay, counter: &mut OpCounter| {
        let path = PathGeometry {
            triangles: ray.triangles.clone(),
            points: ray.points.clone(),
        };
        check_obstruction(&path, mesh, cfg.exhaustive_checks, counter)
    };
    let rays = if cfg.threshold_after_obstruction {
        let visible: Vec<DeterministicRay> =
            rays.into_iter().filter(|r| clear(r, &mut counter)).collect();
        thresholds.apply(&visible)
    } else {
        thresholds
            .apply(&rays)
            .into_iter()
            .filter(|r| clear(r, &mut counter))
            .collect()
    };
    Ok(TraceOutput { rays, counter })
}
