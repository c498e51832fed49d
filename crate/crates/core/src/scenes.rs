//! Synthetic environments: a rectangular room, an L-shaped corridor, an
//! outdoor courtyard and a few small test rooms.

use crate::geometry::{Triangle, TriangleMesh, Vec3};

fn tri(a: Vec3, b: Vec3, c: Vec3, material: u32) -> Triangle {
    Triangle::new(a, b, c, material).expect("scene triangles are non-degenerate")
}

/// Planar quad `a b c d` (in order around the boundary) as two triangles.
pub fn quad(a: Vec3, b: Vec3, c: Vec3, d: Vec3, material: u32) -> [Triangle; 2] {
    [tri(a, b, c, material), tri(a, c, d, material)]
}

/// Axis-aligned wall rectangle spanning `(x0,y0)-(x1,y1)` in plan between
/// heights `z0` and `z1`.
pub fn wall(x0: f64, y0: f64, x1: f64, y1: f64, z0: f64, z1: f64, material: u32) -> [Triangle; 2] {
    quad(
        Vec3::new(x0, y0, z0),
        Vec3::new(x1, y1, z0),
        Vec3::new(x1, y1, z1),
        Vec3::new(x0, y0, z1),
        material,
    )
}

/// Horizontal rectangle at height `z`.
pub fn slab(x0: f64, y0: f64, x1: f64, y1: f64, z: f64, material: u32) -> [Triangle; 2] {
    quad(
        Vec3::new(x0, y0, z),
        Vec3::new(x1, y0, z),
        Vec3::new(x1, y1, z),
        Vec3::new(x0, y1, z),
        material,
    )
}

/// Closed axis-aligned box, two triangles per face (12 total).
pub fn box_room(min: Vec3, max: Vec3, material: u32) -> Vec<Triangle> {
    let mut t = Vec::with_capacity(12);
    t.extend(slab(min.x, min.y, max.x, max.y, min.z, material));
    t.extend(slab(min.x, min.y, max.x, max.y, max.z, material));
    t.extend(wall(min.x, min.y, max.x, min.y, min.z, max.z, material));
    t.extend(wall(min.x, max.y, max.x, max.y, min.z, max.z, material));
    t.extend(wall(min.x, min.y, min.x, max.y, min.z, max.z, material));
    t.extend(wall(max.x, min.y, max.x, max.y, min.z, max.z, material));
    t
}

/// Open box without a floor face (10 triangles), e.g. a cabinet on the floor.
pub fn block(min: Vec3, max: Vec3, material: u32) -> Vec<Triangle> {
    let mut t = box_room(min, max, material);
    t.drain(0..2);
    t
}

/// 10 x 19 x 3 m rectangular room, 12 triangles.
pub fn indoor_room() -> TriangleMesh {
    TriangleMesh::new(box_room(Vec3::ZERO, Vec3::new(10.0, 19.0, 3.0), 0))
}

/// Closed tetrahedral room, 4 triangles.
pub fn tetra_room() -> TriangleMesh {
    let a = Vec3::new(0.0, 0.0, 0.0);
    let b = Vec3::new(12.0, 0.0, 0.0);
    let c = Vec3::new(4.0, 11.0, 0.0);
    let d = Vec3::new(5.0, 4.0, 9.0);
    TriangleMesh::new(vec![tri(a, b, c, 0), tri(a, b, d, 0), tri(b, c, d, 0), tri(c, a, d, 0)])
}

/// Rectangular room with two cabinets and four free-standing panels,
/// 40 triangles.
pub fn furnished_room() -> TriangleMesh {
    let mut t = box_room(Vec3::ZERO, Vec3::new(10.0, 19.0, 3.0), 0);
    t.extend(block(Vec3::new(1.0, 2.0, 0.0), Vec3::new(2.0, 4.0, 1.2), 1));
    t.extend(block(Vec3::new(7.5, 12.0, 0.0), Vec3::new(9.0, 13.0, 0.9), 1));
    t.extend(wall(3.0, 9.0, 4.5, 9.0, 0.0, 1.8, 1));
    t.extend(wall(6.0, 6.0, 6.0, 7.5, 0.0, 1.8, 1));
    t.extend(wall(2.0, 15.0, 3.0, 16.0, 0.0, 2.0, 1));
    t.extend(wall(8.0, 16.5, 9.5, 17.0, 0.0, 2.0, 1));
    TriangleMesh::new(t)
}

/// L-shaped corridor, 3 m high: an 11 x 4 m leg along x joined to a
/// 4 x 20 m leg along y at its far end. 20 triangles.
///
/// ```text
///  y=20      +----+
///            |    |
///  y=4  +----+    |
///       |         |
///  y=0  +---------+
///      x=0  x=7  x=11
/// ```
pub fn l_corridor() -> TriangleMesh {
    let h = 3.0;
    let mut t = Vec::with_capacity(20);
    for z in [0.0, h] {
        t.extend(slab(0.0, 0.0, 7.0, 4.0, z, 0));
        t.extend(slab(7.0, 0.0, 11.0, 20.0, z, 0));
    }
    t.extend(wall(0.0, 0.0, 11.0, 0.0, 0.0, h, 0));
    t.extend(wall(11.0, 0.0, 11.0, 20.0, 0.0, h, 0));
    t.extend(wall(7.0, 20.0, 11.0, 20.0, 0.0, h, 0));
    t.extend(wall(7.0, 4.0, 7.0, 20.0, 0.0, h, 0));
    t.extend(wall(0.0, 4.0, 7.0, 4.0, 0.0, h, 0));
    t.extend(wall(0.0, 0.0, 0.0, 4.0, 0.0, h, 0));
    TriangleMesh::new(t)
}

/// 120 x 70 m courtyard enclosed by 15 m facades, with six parked
/// vehicles. 70 triangles.
pub fn courtyard() -> TriangleMesh {
    let (lx, ly, h) = (120.0, 70.0, 15.0);
    let mut t = Vec::new();
    t.extend(slab(0.0, 0.0, lx, ly, 0.0, 2));
    t.extend(wall(0.0, 0.0, lx, 0.0, 0.0, h, 0));
    t.extend(wall(lx, 0.0, lx, ly, 0.0, h, 0));
    t.extend(wall(lx, ly, 0.0, ly, 0.0, h, 0));
    t.extend(wall(0.0, ly, 0.0, 0.0, 0.0, h, 0));
    for k in 0..6 {
        let x = 20.0 + 14.0 * k as f64;
        let y = if k % 2 == 0 { 25.0 } else { 40.0 };
        t.extend(block(Vec3::new(x, y, 0.0), Vec3::new(x + 4.5, y + 1.8, 1.5), 1));
    }
    TriangleMesh::new(t)
}
