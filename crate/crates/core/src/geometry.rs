//! Triangle-mesh primitives for the image-method tracer.
//!
//! Everything is in meters and double precision. Reflection points are found
//! in two steps: a crossing with the supporting plane, then a barycentric
//! containment test. Points on edges and vertices count as inside.

use std::fmt::Write as _;
use std::io::BufRead;
use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Barycentric slack for the containment test.
pub const BARY_EPS: f64 = 1e-12;
/// Slack on the crossing parameter so a segment never hits the triangle it
/// starts or ends on.
pub const CROSSING_EPS: f64 = 1e-9;
/// Below this `|dir . n|` a segment is treated as parallel to a plane.
pub const PARALLEL_EPS: f64 = 1e-12;
/// Minimum triangle area in m^2.
pub const MIN_AREA: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        self / self.norm()
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Azimuth in (-pi, pi] from +x in the x-y plane and elevation in
    /// [-pi/2, pi/2] from the x-y plane.
    pub fn to_az_el(self) -> (f64, f64) {
        let r = self.norm();
        let mut az = self.y.atan2(self.x);
        if az <= -std::f64::consts::PI {
            az = std::f64::consts::PI;
        }
        let el = (self.z / r).clamp(-1.0, 1.0).asin();
        (az, el)
    }

    pub fn from_az_el(az: f64, el: f64) -> Vec3 {
        Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
    }

    /// Angle between two vectors, accurate near 0 and pi.
    pub fn angle_to(self, o: Vec3) -> f64 {
        self.cross(o).norm().atan2(self.dot(o))
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

/// A mesh triangle with its cached supporting plane `n . x = offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct Triangle {
    v: [Vec3; 3],
    material_id: u32,
    normal: Vec3,
    offset: f64,
}

impl Triangle {
    pub fn new(v0: Vec3, v1: Vec3, v2: Vec3, material_id: u32) -> Result<Self> {
        if !(v0.is_finite() && v1.is_finite() && v2.is_finite()) {
            return Err(Error::DegenerateTriangle { area: f64::NAN });
        }
        let c = (v1 - v0).cross(v2 - v0);
        let area = 0.5 * c.norm();
        if !(area > MIN_AREA) {
            return Err(Error::DegenerateTriangle { area });
        }
        let normal = c.normalized();
        Ok(Triangle {
            v: [v0, v1, v2],
            material_id,
            normal,
            offset: normal.dot(v0),
        })
    }

    pub fn vertices(&self) -> [Vec3; 3] {
        self.v
    }

    pub fn material_id(&self) -> u32 {
        self.material_id
    }

    /// Unit normal, right-handed in vertex order.
    pub fn normal(&self) -> Vec3 {
        self.normal
    }

    pub fn plane_offset(&self) -> f64 {
        self.offset
    }

    pub fn centroid(&self) -> Vec3 {
        (self.v[0] + self.v[1] + self.v[2]) / 3.0
    }

    /// Signed distance from the supporting plane.
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }

    /// Barycentric coordinates `(w0, w1, w2)` of `p` projected on the plane.
    pub fn barycentric(&self, p: Vec3) -> [f64; 3] {
        let e1 = self.v[1] - self.v[0];
        let e2 = self.v[2] - self.v[0];
        let d = p - self.v[0];
        let d11 = e1.dot(e1);
        let d12 = e1.dot(e2);
        let d22 = e2.dot(e2);
        let dp1 = d.dot(e1);
        let dp2 = d.dot(e2);
        let denom = d11 * d22 - d12 * d12;
        let w1 = (d22 * dp1 - d12 * dp2) / denom;
        let w2 = (d11 * dp2 - d12 * dp1) / denom;
        [1.0 - w1 - w2, w1, w2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Vec3,
    pub b: Vec3,
}

impl Segment {
    pub fn new(a: Vec3, b: Vec3) -> Self {
        Segment { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    pub fn direction(&self) -> Vec3 {
        self.b - self.a
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    triangles: Vec<Triangle>,
}

impl TriangleMesh {
    pub fn new(triangles: Vec<Triangle>) -> Self {
        TriangleMesh { triangles }
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    /// Triangle count `T`.
    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Triangle> {
        self.triangles.get(i)
    }

    /// Serializes in the line-per-triangle text format read by [`load_mesh`].
    pub fn to_text(&self) -> String {
        let mut out = String::from("# v0x v0y v0z v1x v1y v1z v2x v2y v2z material_id\n");
        for t in &self.triangles {
            for v in t.v {
                let _ = write!(out, "{} {} {} ", v.x, v.y, v.z);
            }
            let _ = writeln!(out, "{}", t.material_id);
        }
        out
    }
}

/// Reflects `p` across the supporting plane of `tri`.
pub fn mirror_point(p: Vec3, tri: &Triangle) -> Vec3 {
    p - tri.normal * (2.0 * tri.signed_distance(p))
}

/// Crossing parameter and point where `seg` passes through the plane of
/// `tri`, if the parameter lies strictly inside (0, 1).
pub fn plane_crossing(seg: &Segment, tri: &Triangle) -> Option<(f64, Vec3)> {
    let dir = seg.direction();
    let len = dir.norm();
    if len == 0.0 {
        return None;
    }
    let denom = tri.normal.dot(dir);
    if (denom / len).abs() < PARALLEL_EPS {
        return None;
    }
    let t = -tri.signed_distance(seg.a) / denom;
    if t > 0.0 && t < 1.0 {
        Some((t, seg.a + dir * t))
    } else {
        None
    }
}

pub fn segment_plane_intersect(seg: &Segment, tri: &Triangle) -> Option<Vec3> {
    plane_crossing(seg, tri).map(|(_, p)| p)
}

/// Containment for a point already on the triangle's plane; edges and
/// vertices count as inside.
pub fn point_in_triangle(p: Vec3, tri: &Triangle) -> bool {
    tri.barycentric(p).iter().all(|&w| w >= -BARY_EPS)
}

/// Whether `tri` blocks the open segment.
pub fn triangle_blocks(seg: &Segment, tri: &Triangle) -> bool {
    match plane_crossing(seg, tri) {
        Some((t, p)) => t > CROSSING_EPS && t < 1.0 - CROSSING_EPS && point_in_triangle(p, tri),
        None => false,
    }
}

/// Tests `seg` against every triangle not listed in `exclude`.
///
/// Each tested triangle adds one to `checks`. With `exhaustive` unset the
/// scan stops at the first blocker.
pub fn scan_obstruction(
    seg: &Segment,
    mesh: &TriangleMesh,
    exclude: &[usize],
    exhaustive: bool,
    checks: &mut u64,
) -> bool {
    let mut blocked = false;
    for (i, tri) in mesh.triangles.iter().enumerate() {
        if exclude.contains(&i) {
            continue;
        }
        *checks += 1;
        if triangle_blocks(seg, tri) {
            blocked = true;
            if !exhaustive {
                break;
            }
        }
    }
    blocked
}

pub fn segment_obstructed(seg: &Segment, mesh: &TriangleMesh, exclude: &[usize]) -> bool {
    let mut checks = 0;
    scan_obstruction(seg, mesh, exclude, false, &mut checks)
}

/// Reads the mesh text format: nine coordinates and a material id per line,
/// `#` comments and blank lines skipped.
pub fn load_mesh<R: BufRead>(
    source: R,
    is_known_material: impl Fn(u32) -> bool,
) -> Result<TriangleMesh> {
    let mut triangles = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse { line: lineno, msg };
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() != 10 {
            return Err(err(format!("expected 10 fields, found {}", fields.len())));
        }
        let mut c = [0.0f64; 9];
        for (k, f) in fields[..9].iter().enumerate() {
            let v: f64 = f
                .parse()
                .map_err(|_| err(format!("field {}: not a number: {f:?}", k + 1)))?;
            if !v.is_finite() {
                return Err(err(format!("field {}: non-finite value", k + 1)));
            }
            c[k] = v;
        }
        let material: u32 = fields[9]
            .parse()
            .map_err(|_| err(format!("bad material id {:?}", fields[9])))?;
        if !is_known_material(material) {
            return Err(err(format!("unknown material id {material}")));
        }
        let tri = Triangle::new(
            Vec3::new(c[0], c[1], c[2]),
            Vec3::new(c[3], c[4], c[5]),
            Vec3::new(c[6], c[7], c[8]),
            material,
        )
        .map_err(|e| err(e.to_string()))?;
        triangles.push(tri);
    }
    Ok(TriangleMesh::new(triangles))
}
