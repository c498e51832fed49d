//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{HashMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qdtrace::channel::{
    assemble_h, beamformed_gain, linear_to_db, sinr_db, snr_db, svd_beamforming, ArrayConfig, Interferer, Link,
    LinkBudget,
};
use qdtrace::cli::{parse_grid, sweep};
use qdtrace::geometry::{Triangle, TriangleMesh, Vec3};
use qdtrace::link::evaluate_links;
use qdtrace::metrics::{validate_complexity, ComplexitySample, SLOPE_TOLERANCE};
use qdtrace::presets;
use qdtrace::qd::{qd_stats, Angles, MaterialTable, Mpc, MpcKind, QdMaterialParams};
use qdtrace::raytracer::{predicted_tuple_count, trace_pair, TraceConfig};
use qdtrace::rng::StreamKey;
use qdtrace::scenario::{position_at, run, ChannelInstance, Scenario};
use qdtrace::scenes;
use qdtrace::simplify::{filter_absolute, filter_relative, saved_checks, SimplificationSetting};

const SPECULARITY_TOL_RAD: f64 = 1e-9;
const LENGTH_REL_TOL: f64 = 1e-9;
const ORACLE_POINT_TOL_M: f64 = 1e-7;
const DEGENERATE_SEGMENT_M: f64 = 1e-6;
const BEAM_GAIN_TOL_DB: f64 = 1e-6;
const SVD_REL_TOL: f64 = 1e-9;
const NOISE_FLOOR_DBM: f64 = -78.98;
const NOISE_FLOOR_TOL_DB: f64 = 0.01;
const NLOS_DROP_DB: f64 = 20.0;

type Check = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn materials() -> MaterialTable {
    presets::placeholder_materials()
}

fn uniform(rng: &mut ChaCha8Rng, lo: Vec3, hi: Vec3) -> Vec3 {
    Vec3::new(
        rng.random_range(lo.x..hi.x),
        rng.random_range(lo.y..hi.y),
        rng.random_range(lo.z..hi.z),
    )
}

fn plane_of(t: &Triangle) -> (Vec3, f64) {
    let [a, b, c] = t.vertices();
    let n = (b - a).cross(c - a).normalized();
    (n, n.dot(a))
}

fn reflect(p: Vec3, t: &Triangle) -> Vec3 {
    let (n, d) = plane_of(t);
    p - n * (2.0 * (n.dot(p) - d))
}

fn angle_between(a: Vec3, b: Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

// 1. specular geometry in closed boxes
fn moi_geometry() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mats = materials();
    let (mut rays, mut worst_angle, mut worst_len) = (0usize, 0.0f64, 0.0f64);
    for draw in 0..1000 {
        let max = Vec3::new(rng.random_range(2.0..20.0), rng.random_range(2.0..20.0), rng.random_range(2.0..6.0));
        let mesh = TriangleMesh::new(scenes::box_room(Vec3::ZERO, max, 0));
        let m = Vec3::new(0.05, 0.05, 0.05);
        let tx = uniform(&mut rng, m, max - m);
        let rx = uniform(&mut rng, m, max - m);
        let cfg = TraceConfig { max_reflection_order: 1 + draw % 3, ..TraceConfig::default() };
        let out = trace_pair(tx, rx, &mesh, &mats, &cfg, &StreamKey::new(draw as u64)).map_err(|e| e.to_string())?;
        ensure(out.rays.iter().any(|r| r.order() == 0), || format!("draw {draw}: no direct ray in a convex room"))?;
        for ray in &out.rays {
            rays += 1;
            let p = &ray.points;
            for k in 1..=ray.order() {
                let (n, _) = plane_of(&mesh.triangles()[ray.triangles[k - 1]]);
                let din = (p[k] - p[k - 1]).normalized();
                let dout = (p[k + 1] - p[k]).normalized();
                let mirrored = din - n * (2.0 * din.dot(n));
                worst_angle = worst_angle.max(angle_between(mirrored, dout));
            }
            let mut image = rx;
            for &t in ray.triangles.iter().rev() {
                image = reflect(image, &mesh.triangles()[t]);
            }
            let expected = tx.distance(image);
            worst_len = worst_len.max((ray.length_m - expected).abs() / expected);
        }
    }
    ensure(worst_angle <= SPECULARITY_TOL_RAD, || format!("specularity error {worst_angle:e} rad"))?;
    ensure(worst_len <= LENGTH_REL_TOL, || format!("length error {worst_len:e}"))?;
    Ok(format!("{rays} rays, max specularity error {worst_angle:.1e} rad, max length error {worst_len:.1e}"))
}

// 2. independent Fermat-principle oracle
struct PlaneFrame {
    origin: Vec3,
    u: Vec3,
    v: Vec3,
}

impl PlaneFrame {
    fn new(t: &Triangle) -> Self {
        let [a, b, c] = t.vertices();
        let u = (b - a).normalized();
        let n = (b - a).cross(c - a).normalized();
        PlaneFrame { origin: a, u, v: n.cross(u) }
    }

    fn at(&self, s: f64, t: f64) -> Vec3 {
        self.origin + self.u * s + self.v * t
    }
}

/// Minimizes the total length of TX -> P1 -> ... -> Pr -> RX with every
/// P_k constrained to the plane of its triangle (damped Newton; the
/// objective is convex).
fn fermat_points(tx: Vec3, rx: Vec3, tris: &[&Triangle]) -> Vec<Vec3> {
    let frames: Vec<PlaneFrame> = tris.iter().map(|t| PlaneFrame::new(t)).collect();
    let r = frames.len();
    let dim = 2 * r;
    let mut x = DVector::<f64>::zeros(dim);
    for (k, (f, t)) in frames.iter().zip(tris).enumerate() {
        let c = t.centroid() - f.origin;
        x[2 * k] = c.dot(f.u);
        x[2 * k + 1] = c.dot(f.v);
    }
    let points = |x: &DVector<f64>| -> Vec<Vec3> {
        let mut p = vec![tx];
        p.extend(frames.iter().enumerate().map(|(k, f)| f.at(x[2 * k], x[2 * k + 1])));
        p.push(rx);
        p
    };
    let length = |x: &DVector<f64>| -> f64 { points(x).windows(2).map(|w| w[0].distance(w[1])).sum() };
    for _ in 0..200 {
        let p = points(&x);
        let mut g = DVector::<f64>::zeros(dim);
        let mut h = DMatrix::<f64>::zeros(dim, dim);
        // Jacobian of point k (1-based in p) w.r.t. its two coordinates
        let jac = |k: usize| -> [Vec3; 2] { [frames[k].u, frames[k].v] };
        for s in 0..=r {
            let d = p[s + 1] - p[s];
            let len = d.norm();
            let e = d / len;
            let proj = |a: Vec3, b: Vec3| (a.dot(b) - a.dot(e) * b.dot(e)) / len;
            // segment s joins point s (variable index s-1) and point s+1 (index s)
            let ends: Vec<(usize, f64)> = [(s.wrapping_sub(1), -1.0), (s, 1.0)]
                .into_iter()
                .filter(|&(i, _)| i < r)
                .collect();
            for &(i, si) in &ends {
                let ji = jac(i);
                for a in 0..2 {
                    g[2 * i + a] += si * e.dot(ji[a]);
                }
                for &(j, sj) in &ends {
                    let jj = jac(j);
                    for a in 0..2 {
                        for b in 0..2 {
                            h[(2 * i + a, 2 * j + b)] += si * sj * proj(ji[a], jj[b]);
                        }
                    }
                }
            }
        }
        let step = match h.clone().cholesky() {
            Some(ch) => ch.solve(&(-&g)),
            None => -&g,
        };
        let f0 = length(&x);
        let mut alpha = 1.0;
        while alpha > 1e-12 && length(&(&x + &step * alpha)) > f0 + 1e-4 * alpha * g.dot(&step) {
            alpha *= 0.5;
        }
        x += &step * alpha;
        if (&step * alpha).norm() < 1e-15 {
            break;
        }
    }
    points(&x)
}

fn inside(p: Vec3, t: &Triangle) -> bool {
    let [a, b, c] = t.vertices();
    let n = (b - a).cross(c - a);
    let nn = n.dot(n);
    let w1 = (c - b).cross(p - b).dot(n) / nn;
    let w2 = (a - c).cross(p - c).dot(n) / nn;
    let w3 = 1.0 - w1 - w2;
    w1 >= -1e-12 && w2 >= -1e-12 && w3 >= -1e-12
}

/// Moller-Trumbore segment/triangle hit with the parameter strictly inside.
fn hits(a: Vec3, b: Vec3, t: &Triangle) -> bool {
    let [v0, v1, v2] = t.vertices();
    let d = b - a;
    let (e1, e2) = (v1 - v0, v2 - v0);
    let pv = d.cross(e2);
    let det = e1.dot(pv);
    if det.abs() < 1e-14 {
        return false;
    }
    let tv = a - v0;
    let u = tv.dot(pv) / det;
    let qv = tv.cross(e1);
    let v = d.dot(qv) / det;
    let s = e2.dot(qv) / det;
    (0.0..=1.0).contains(&u) && v >= 0.0 && u + v <= 1.0 && s > 1e-9 && s < 1.0 - 1e-9
}

fn oracle_paths(tx: Vec3, rx: Vec3, mesh: &TriangleMesh, max_order: usize) -> HashMap<Vec<usize>, Vec<Vec3>> {
    let tri = mesh.triangles();
    let t = tri.len();
    let mut tuples: Vec<Vec<usize>> = vec![vec![]];
    for i in 0..t {
        tuples.push(vec![i]);
        if max_order >= 2 {
            tuples.extend((0..t).filter(|&j| j != i).map(|j| vec![i, j]));
        }
    }
    let mut out = HashMap::new();
    for tuple in tuples {
        let refs: Vec<&Triangle> = tuple.iter().map(|&i| &tri[i]).collect();
        let pts = if tuple.is_empty() { vec![tx, rx] } else { fermat_points(tx, rx, &refs) };
        let mut ok = true;
        for (k, tr) in refs.iter().enumerate() {
            let (n, d) = plane_of(tr);
            let before = n.dot(pts[k]) - d;
            let after = n.dot(pts[k + 2]) - d;
            ok &= before * after > 0.0 && inside(pts[k + 1], tr);
        }
        for s in 0..pts.len() - 1 {
            // consecutive bounces on the intersection line of two planes
            ok &= pts[s].distance(pts[s + 1]) > DEGENERATE_SEGMENT_M;
            let own: Vec<usize> = [s.checked_sub(1).map(|i| tuple[i]), tuple.get(s).copied()]
                .into_iter()
                .flatten()
                .collect();
            ok &= !(0..t).any(|i| !own.contains(&i) && hits(pts[s], pts[s + 1], &tri[i]));
        }
        if ok {
            out.insert(tuple, pts);
        }
    }
    out
}

fn random_triangle(rng: &mut ChaCha8Rng) -> Triangle {
    loop {
        let c = uniform(rng, Vec3::ZERO, Vec3::new(10.0, 10.0, 10.0));
        let size = rng.random_range(2.0..6.0);
        let mut v = || {
            c + Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * size
        };
        let (a, b, d) = (v(), v(), v());
        if let Ok(t) = Triangle::new(a, b, d, 0) {
            if (b - a).cross(d - a).norm() > 0.5 {
                return t;
            }
        }
    }
}

fn oracle_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mats = materials();
    let (mut paths, mut worst) = (0usize, 0.0f64);
    for scene in 0..50 {
        let t = rng.random_range(2..=8);
        let mesh = TriangleMesh::new((0..t).map(|_| random_triangle(&mut rng)).collect());
        let tx = uniform(&mut rng, Vec3::ZERO, Vec3::new(10.0, 10.0, 10.0));
        let rx = uniform(&mut rng, Vec3::ZERO, Vec3::new(10.0, 10.0, 10.0));
        let r = 1 + scene % 2;
        let cfg = TraceConfig { max_reflection_order: r, abs_threshold_db: -1000.0, ..TraceConfig::default() };
        let traced = trace_pair(tx, rx, &mesh, &mats, &cfg, &StreamKey::new(scene as u64)).map_err(|e| e.to_string())?;
        let oracle = oracle_paths(tx, rx, &mesh, r);
        let got: HashSet<&Vec<usize>> = traced.rays.iter().map(|r| &r.triangles).collect();
        let want: HashSet<&Vec<usize>> = oracle.keys().collect();
        ensure(got == want, || {
            format!(
                "scene {scene}: tracer-only {:?}, oracle-only {:?}",
                got.difference(&want).collect::<Vec<_>>(),
                want.difference(&got).collect::<Vec<_>>()
            )
        })?;
        for ray in &traced.rays {
            for (a, b) in ray.points.iter().zip(&oracle[&ray.triangles]) {
                worst = worst.max(a.distance(*b));
            }
            paths += 1;
        }
    }
    ensure(worst <= ORACLE_POINT_TOL_M, || format!("reflection points differ by {worst:e} m"))?;
    Ok(format!("50 scenes, {paths} paths identical, max point deviation {worst:.1e} m"))
}

// 3. complexity accounting
fn complexity() -> Check {
    let mats = materials();
    let scenes_by_t: [(TriangleMesh, Vec3, Vec3); 3] = [
        (scenes::tetra_room(), Vec3::new(4.0, 3.0, 1.0), Vec3::new(6.0, 4.0, 2.5)),
        (scenes::indoor_room(), Vec3::new(5.0, 0.1, 2.9), Vec3::new(4.0, 9.0, 1.5)),
        (scenes::furnished_room(), Vec3::new(5.0, 0.5, 2.5), Vec3::new(5.0, 14.0, 1.5)),
    ];
    let mut samples = Vec::new();
    for (mesh, tx, rx) in &scenes_by_t {
        for r in 0..=3 {
            let cfg = TraceConfig {
                max_reflection_order: r,
                exhaustive_checks: true,
                abs_threshold_db: -1000.0,
                ..TraceConfig::default()
            };
            let out = trace_pair(*tx, *rx, mesh, &mats, &cfg, &StreamKey::new(3)).map_err(|e| e.to_string())?;
            if r == 0 {
                ensure(out.counter.obstruction_checks == mesh.len() as u64, || {
                    format!("R=0 on T={}: {} checks", mesh.len(), out.counter.obstruction_checks)
                })?;
            }
            samples.push(ComplexitySample { triangles: mesh.len(), max_order: r, counter: out.counter, exhaustive: true });
        }
    }
    ensure(predicted_tuple_count(12, 1) == 13 && predicted_tuple_count(12, 2) == 145, || "T=12 counts".into())?;
    let report = validate_complexity(&samples).map_err(|e| e.to_string())?;
    let mut detail = Vec::new();
    for s in &report.slopes {
        ensure(s.within_tolerance, || {
            format!("R={}: slope {:.3} not within {SLOPE_TOLERANCE} of {}", s.max_order, s.model_slope, s.expected)
        })?;
        detail.push(format!("R={} slope {:.2} (measured {:.2})", s.max_order, s.model_slope, s.measured_slope));
    }
    Ok(format!("tuple counts exact for T in {{4,12,40}}, R 0..3; {}", detail.join(", ")))
}

// 4. thresholding semantics
fn thresholding() -> Check {
    let gains = [-60.0, -72.0, -75.5, -90.0, -120.0, -60.0];
    let rels = [f64::NEG_INFINITY, -40.0, -15.0, -3.0, 0.0];
    let abss = [-200.0, -100.0, -75.5, -60.0, 0.0];
    let mut cases = 0;
    for mask in 0u32..64 {
        let subset: Vec<f64> = (0..6).filter(|i| mask >> i & 1 == 1).map(|i| gains[i]).collect();
        let strongest = subset.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for (&g_rel, &g_abs) in rels.iter().zip(&abss) {
            for &rel in &rels {
                let want: Vec<f64> = subset
                    .iter()
                    .cloned()
                    .filter(|g| rel == f64::NEG_INFINITY || g - strongest >= rel)
                    .collect();
                ensure(filter_relative(&subset, rel) == want, || format!("relative {rel} on {subset:?}"))?;
                cases += 1;
            }
            for &abs in &abss {
                let want: Vec<f64> = subset.iter().cloned().filter(|&g| g >= abs).collect();
                ensure(filter_absolute(&subset, abs) == want, || format!("absolute {abs} on {subset:?}"))?;
                cases += 1;
            }
            let s = SimplificationSetting { max_reflections: 4, rel_threshold_db: g_rel, abs_threshold_db: g_abs };
            let after_abs: Vec<f64> = subset.iter().cloned().filter(|&g| g >= g_abs).collect();
            let top = after_abs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let want: Vec<f64> = after_abs
                .iter()
                .cloned()
                .filter(|g| g_rel == f64::NEG_INFINITY || g - top >= g_rel)
                .collect();
            ensure(s.apply(&subset) == want, || format!("pipeline on {subset:?}"))?;
            cases += 1;
        }
    }
    let mesh = scenes::indoor_room();
    let mats = materials();
    let (tx, rx) = (Vec3::new(5.0, 0.1, 2.9), Vec3::new(5.0, 8.0, 1.5));
    let cfg = |rel: f64| TraceConfig {
        max_reflection_order: 3,
        rel_threshold_db: rel,
        exhaustive_checks: true,
        ..TraceConfig::default()
    };
    let key = StreamKey::new(4);
    let full = trace_pair(tx, rx, &mesh, &mats, &cfg(f64::NEG_INFINITY), &key).map_err(|e| e.to_string())?;
    let pruned = trace_pair(tx, rx, &mesh, &mats, &cfg(-15.0), &key).map_err(|e| e.to_string())?;
    let (a, b) = (full.counter.obstruction_checks, pruned.counter.obstruction_checks);
    ensure(b < a, || format!("checks not reduced: {b} vs {a}"))?;
    let kept: HashSet<&Vec<usize>> = pruned.rays.iter().map(|r| &r.triangles).collect();
    let discarded: Vec<&[usize]> = full
        .rays
        .iter()
        .filter(|r| !kept.contains(&r.triangles))
        .map(|r| r.triangles.as_slice())
        .collect();
    let saved = saved_checks(discarded.iter().copied(), mesh.len());
    ensure(a - b == saved, || format!("saved {} but saved_checks says {saved}", a - b))?;
    Ok(format!("{cases} exhaustive cases; box scene checks {a} -> {b}, saved_checks {saved} reconciles"))
}

// 5. diffuse statistics
fn qd_statistics() -> Check {
    let mut rng = StreamKey::new(5).with("acceptance").stream();
    let p = QdMaterialParams::placeholder();
    let report = qd_stats(100_000, &p, &mut rng).map_err(|e| e.to_string())?;
    let lines: Vec<String> = report
        .checks
        .iter()
        .map(|c| format!("{} {:.4e}/{:.4e}", c.name, c.empirical, c.analytic))
        .collect();
    ensure(report.all_pass(), || format!("failed: {}", lines.join("; ")))?;
    Ok(lines.join("; "))
}

// 6. beamforming
fn power_iteration_sigma(h: &DMatrix<Complex64>) -> f64 {
    let g = h.adjoint() * h;
    let mut v = DVector::<Complex64>::from_element(h.ncols(), Complex64::new(1.0, 0.3));
    let mut lambda = 0.0;
    for _ in 0..5000 {
        let w = &g * &v;
        let n = w.norm();
        if n == 0.0 {
            return 0.0;
        }
        v = w / Complex64::new(n, 0.0);
        if (n - lambda).abs() <= 1e-15 * n {
            lambda = n;
            break;
        }
        lambda = n;
    }
    lambda.sqrt()
}

fn random_mpc(rng: &mut ChaCha8Rng) -> Mpc {
    Mpc {
        delay_s: rng.random_range(1e-9..1e-7),
        gain_db: rng.random_range(-120.0..-60.0),
        aod: Angles::new(rng.random_range(-3.1..3.1), rng.random_range(-1.5..1.5)),
        aoa: Angles::new(rng.random_range(-3.1..3.1), rng.random_range(-1.5..1.5)),
        phase_rad: rng.random_range(0.0..std::f64::consts::TAU),
        kind: MpcKind::MainCursor,
        parent: 0,
    }
}

fn beamforming() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let (tx, rx) = (ArrayConfig::upa(8, 8), ArrayConfig::upa(4, 4));
    let mut worst_gain = 0.0f64;
    for _ in 0..20 {
        let m = random_mpc(&mut rng);
        let h = assemble_h(std::slice::from_ref(&m), &tx, &rx);
        let bf = svd_beamforming(&h).map_err(|e| e.to_string())?;
        let over = linear_to_db(beamformed_gain(&h, &bf.w_tx, &bf.w_rx)) - m.gain_db;
        worst_gain = worst_gain.max((over - 10.0 * 1024f64.log10()).abs());
    }
    ensure(worst_gain <= BEAM_GAIN_TOL_DB, || format!("rank-1 gain off by {worst_gain:e} dB"))?;
    let mut worst_rel = 0.0f64;
    for _ in 0..100 {
        let (r, c) = (rng.random_range(1..=16), rng.random_range(1..=64));
        let h = DMatrix::from_fn(r, c, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let bf = svd_beamforming(&h).map_err(|e| e.to_string())?;
        let sigma = power_iteration_sigma(&h);
        let g = beamformed_gain(&h, &bf.w_tx, &bf.w_rx).sqrt();
        worst_rel = worst_rel.max((g - sigma).abs() / sigma).max((bf.sigma_max - sigma).abs() / sigma);
    }
    ensure(worst_rel <= SVD_REL_TOL, || format!("SVD gain vs sigma_max off by {worst_rel:e}"))?;
    Ok(format!(
        "rank-1 gain 30.103 dB within {worst_gain:.1e} dB; 100 random SVDs within {worst_rel:.1e}"
    ))
}

// 7. SINR bounds
fn sinr_bounds() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let (tx, rx) = (ArrayConfig::upa(8, 8), ArrayConfig::upa(4, 4));
    let budget = LinkBudget::default();
    let floor = budget.noise_floor_dbm();
    ensure((floor - NOISE_FLOOR_DBM).abs() <= NOISE_FLOOR_TOL_DB, || format!("noise floor {floor} dBm"))?;
    let mut min_gap = f64::INFINITY;
    for i in 0..1000 {
        let serving: Vec<Mpc> = (0..rng.random_range(1..8)).map(|_| random_mpc(&mut rng)).collect();
        let cross: Vec<Mpc> = (0..rng.random_range(1..8)).map(|_| random_mpc(&mut rng)).collect();
        let own: Vec<Mpc> = (0..rng.random_range(1..8)).map(|_| random_mpc(&mut rng)).collect();
        let h = assemble_h(&serving, &tx, &rx);
        let hi = assemble_h(&cross, &tx, &rx);
        let bf = svd_beamforming(&h).map_err(|e| e.to_string())?;
        let bfi = svd_beamforming(&assemble_h(&own, &tx, &rx)).map_err(|e| e.to_string())?;
        let link = Link { tx_power_dbm: 20.0, h: &h, w_tx: &bf.w_tx, w_rx: &bf.w_rx };
        let p_i = rng.random_range(0.0..30.0);
        let snr = snr_db(&link, &budget);
        let active = sinr_db(&link, &[Interferer { tx_power_dbm: p_i, h: &hi, w: Some(&bfi.w_tx) }], &budget);
        let idle = sinr_db(&link, &[Interferer { tx_power_dbm: p_i, h: &hi, w: None }], &budget);
        ensure(active <= snr, || format!("instance {i}: SINR {active} > SNR {snr}"))?;
        ensure(idle == snr, || format!("instance {i}: idle SINR {idle} != SNR {snr}"))?;
        min_gap = min_gap.min(snr - active);
    }
    Ok(format!("1000 instances SINR <= SNR (min gap {min_gap:.2e} dB), idle == SNR, noise floor {floor:.3} dBm"))
}

// 8. L-corridor line-of-sight loss
fn l_corridor_scenario(max_reflections: usize, timestep_s: f64, steps: usize) -> Scenario {
    let mut p = presets::l_room();
    let c = &mut p.config;
    c.max_reflections = max_reflections;
    c.timestep_s = timestep_s;
    c.steps = steps;
    c.qd = false;
    let rx = c.nodes.iter_mut().find(|n| n.id == "rx").unwrap();
    rx.waypoints = vec![[8.5, 2.5, 1.5], [8.5, 19.0, 1.5]];
    p.scenario().expect("valid scenario")
}

/// Plan-view line of sight from the access point at (0.2, 3) to a receiver
/// in the long leg (x = 8.5) passes the inner corner (7, 4).
fn in_los(rx: Vec3) -> bool {
    let y_at_corner = 3.0 + (rx.y - 3.0) * (7.0 - 0.2) / (rx.x - 0.2);
    y_at_corner <= 4.0
}

fn l_corridor() -> Check {
    let dt = 0.1;
    let steps = 137;
    let serving = |inst: &&ChannelInstance| inst.tx_id == "tx" && inst.rx_id == "rx";
    let rx_at = |scn: &Scenario, k: usize| position_at(scn.config.node("rx").unwrap(), scn.config.time_at(k));

    let s0 = l_corridor_scenario(0, dt, steps);
    let i0 = run(&s0, 0).map_err(|e| e.to_string())?;
    let nlos0: Vec<_> = i0.iter().filter(serving).filter(|i| !in_los(rx_at(&s0, i.timestep))).collect();
    ensure(!nlos0.is_empty(), || "no NLoS samples on the route".into())?;
    ensure(nlos0.iter().all(|i| i.mpcs.is_empty()), || "R=0 has MPCs in NLoS".into())?;

    let s1 = l_corridor_scenario(1, dt, steps);
    let i1 = run(&s1, 0).map_err(|e| e.to_string())?;
    let lit1 = i1
        .iter()
        .filter(serving)
        .filter(|i| !in_los(rx_at(&s1, i.timestep)) && !i.mpcs.is_empty())
        .count();
    ensure(lit1 > 0, || "R=1 has no single-bounce path in NLoS".into())?;

    let s4 = l_corridor_scenario(4, dt, steps);
    let i4 = run(&s4, 0).map_err(|e| e.to_string())?;
    let samples = evaluate_links(&s4.config, &i4).map_err(|e| e.to_string())?;
    let rx: Vec<_> = samples.iter().filter(|s| s.rx_id == "rx").collect();
    let first_nlos = rx.iter().position(|s| !in_los(rx_at(&s4, s.timestep))).unwrap();
    let mean = |v: &[&&qdtrace::link::LinkSample]| v.iter().map(|s| s.sinr_db).sum::<f64>() / v.len() as f64;
    let before = mean(&rx[first_nlos.saturating_sub(5)..first_nlos].iter().collect::<Vec<_>>());
    // 2 m to 3.2 m past the corner
    let after_range = (first_nlos + 17)..(first_nlos + 27).min(rx.len());
    let after = mean(&rx[after_range].iter().collect::<Vec<_>>());
    let drop = before - after;
    ensure(after.is_finite() && before.is_finite(), || "outage around the corner at R=4".into())?;
    ensure(drop >= NLOS_DROP_DB, || format!("SINR drop only {drop:.1} dB ({before:.1} -> {after:.1})"))?;
    Ok(format!(
        "{} NLoS samples empty at R=0, {lit1} lit at R=1; R=4 SINR {before:.1} -> {after:.1} dB (drop {drop:.1} dB)",
        nlos0.len()
    ))
}

// 9. superset and monotonicity
fn mpc_key(m: &Mpc) -> [u64; 9] {
    [
        m.kind as u64,
        m.parent,
        m.delay_s.to_bits(),
        m.gain_db.to_bits(),
        m.aod.az.to_bits(),
        m.aod.el.to_bits(),
        m.aoa.az.to_bits(),
        m.aoa.el.to_bits(),
        m.phase_rad.to_bits(),
    ]
}

fn rays(inst: &[ChannelInstance]) -> usize {
    inst.iter().flat_map(|i| &i.mpcs).filter(|m| m.kind == MpcKind::MainCursor).count()
}

fn superset_for(preset: presets::Preset, steps: usize, orders: &[usize]) -> Result<usize, String> {
    let mk = |r: usize, rel: f64, abs: f64| -> Scenario {
        let mut p = preset.clone();
        p.config.steps = steps;
        p.config.max_reflections = r;
        p.config.rel_threshold_db = rel;
        p.config.abs_threshold_db = abs;
        p.scenario().expect("valid")
    };
    let r_max = *orders.iter().max().unwrap();
    let base = run(&mk(r_max, f64::NEG_INFINITY, -1000.0), 0).map_err(|e| e.to_string())?;
    let base_sets: Vec<HashSet<[u64; 9]>> = base.iter().map(|i| i.mpcs.iter().map(mpc_key).collect()).collect();
    let rels = [f64::NEG_INFINITY, -40.0, -25.0, -15.0];
    let abss = [-1000.0, -110.0, -95.0];
    let mut counts: HashMap<(usize, usize, usize), usize> = HashMap::new();
    for (ri, &r) in orders.iter().enumerate() {
        for (gi, &g) in rels.iter().enumerate() {
            for (ai, &a) in abss.iter().enumerate() {
                let out = run(&mk(r, g, a), 0).map_err(|e| e.to_string())?;
                for (inst, set) in out.iter().zip(&base_sets) {
                    if let Some(m) = inst.mpcs.iter().find(|m| !set.contains(&mpc_key(m))) {
                        return Err(format!("R={r} gamma={g} Gamma={a}: MPC {m:?} not in baseline"));
                    }
                }
                counts.insert((ri, gi, ai), rays(&out));
            }
        }
    }
    for (&(ri, gi, ai), &n) in &counts {
        if gi + 1 < rels.len() && counts[&(ri, gi + 1, ai)] > n {
            return Err(format!("rays increase with gamma at R index {ri}"));
        }
        if ai + 1 < abss.len() && counts[&(ri, gi, ai + 1)] > n {
            return Err(format!("rays increase with Gamma at R index {ri}"));
        }
        if ri + 1 < orders.len() && counts[&(ri + 1, gi, ai)] < n {
            return Err(format!("rays decrease with R at gamma index {gi}"));
        }
    }
    Ok(counts.len())
}

fn superset_monotonicity() -> Check {
    let a = superset_for(presets::indoor1(), 8, &[1, 2, 3])?;
    let mut l = presets::l_room();
    // start next to the corner so the short run covers both visibility states
    l.config.nodes.iter_mut().find(|n| n.id == "rx").unwrap().waypoints = vec![[8.5, 3.0, 1.5], [8.5, 19.0, 1.5]];
    l.config.timestep_s = 0.5;
    let b = superset_for(l, 8, &[0, 1, 2])?;
    Ok(format!("{} simplified runs are subsets of their baselines; ray counts monotone", a + b))
}

// 10. speedup directionality
fn speedup_direction() -> Check {
    let mesh = scenes::indoor_room();
    let mats = materials();
    let rxs: Vec<Vec3> = (0..20).map(|k| Vec3::new(5.0, 1.0 + 0.9 * k as f64, 1.5)).collect();
    let time = |r: usize| -> Result<Duration, String> {
        let cfg = TraceConfig { max_reflection_order: r, ..TraceConfig::default() };
        let mut best = Duration::MAX;
        for _ in 0..3 {
            let t0 = Instant::now();
            for rx in &rxs {
                trace_pair(Vec3::new(5.0, 0.1, 2.9), *rx, &mesh, &mats, &cfg, &StreamKey::new(1)).map_err(|e| e.to_string())?;
            }
            best = best.min(t0.elapsed());
        }
        Ok(best)
    };
    let (t2, t4) = (time(2)?, time(4)?);
    ensure(t2 < t4, || format!("R=2 took {t2:?}, R=4 took {t4:?}"))?;
    let mut p = presets::indoor1();
    p.config.steps = 40;
    let scn = p.scenario().map_err(|e| e.to_string())?;
    let grid = parse_grid("R=1..4,gamma=-inf,-40,-25,-15").map_err(|e| e.to_string())?;
    let rows = sweep(&scn, &grid, 3, 0, false).map_err(|e| e.to_string())?;
    ensure(rows.len() == 16, || format!("{} sweep rows", rows.len()))?;
    for r in rows.iter().filter(|r| !r.baseline) {
        ensure(r.speedup > 1.0, || {
            format!("R={} gamma={}: speedup {:.3}", r.max_reflections, r.rel_threshold_db, r.speedup)
        })?;
    }
    let min = rows.iter().filter(|r| !r.baseline).map(|r| r.speedup).fold(f64::INFINITY, f64::min);
    let max_nrmse = rows.iter().map(|r| r.nrmse).fold(0.0, f64::max);
    Ok(format!(
        "trace R=2 {:.1} ms < R=4 {:.1} ms; 15 non-baseline cells speedup >= {min:.2}, max NRMSE {max_nrmse:.3}",
        t2.as_secs_f64() * 1e3,
        t4.as_secs_f64() * 1e3
    ))
}

// 11. determinism across worker counts
fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scenario = presets::indoor1().write_to(&dir.path().join("scn")).map_err(|e| e.to_string())?;
    let trace = |jobs: &str| -> Result<Vec<u8>, String> {
        let out = dir.path().join(format!("jobs{jobs}"));
        let args = ["qdtrace", "trace", "--scenario", scenario.to_str().unwrap(), "--out", out.to_str().unwrap()];
        let code = qdtrace::cli::run(args.into_iter().chain(["--steps", "200", "--jobs", jobs]));
        ensure(code == 0, || format!("trace with --jobs {jobs} exited {code}"))?;
        std::fs::read(out.join("trace.txt")).map_err(|e| e.to_string())
    };
    let a = trace("1")?;
    let b = trace("4")?;
    ensure(a == b, || "trace files differ between --jobs 1 and --jobs 4".into())?;
    Ok(format!("{} byte trace files identical for --jobs 1 and 4", a.len()))
}

fn main() {
    let criteria: [Criterion; 11] = [
        (1, "specular geometry in closed boxes", moi_geometry),
        (2, "brute-force oracle equivalence", oracle_equivalence),
        (3, "complexity accounting", complexity),
        (4, "thresholding semantics", thresholding),
        (5, "diffuse statistics", qd_statistics),
        (6, "beamforming gain", beamforming),
        (7, "SINR bounds", sinr_bounds),
        (8, "L-corridor line-of-sight loss", l_corridor),
        (9, "simplification superset and monotonicity", superset_monotonicity),
        (10, "speedup directionality", speedup_direction),
        (11, "determinism across worker counts", determinism),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, f) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let t0 = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let secs = t0.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {id:>2} PASS ({secs:.1} s) {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {id:>2} FAIL ({secs:.1} s) {name}: {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
