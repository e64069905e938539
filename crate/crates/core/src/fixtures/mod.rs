//! Deterministic meshes used by the tests, the benchmarks and the CLI demo
//! commands.

mod face;

use std::collections::HashMap;

pub use face::{synthetic_face, FaceFixture};

use crate::abstraction::{AbstractedMesh, Anchor, Boundary, Polyline, Side};
use crate::geometry::Vec3;
use crate::mesh::{Mesh, RegionLabeling};

/// Axis-aligned unit cube, outward-facing counter-clockwise triangles.
/// Vertex `x + 2y + 4z` sits at `(x, y, z)`.
pub fn unit_cube() -> Mesh {
    let vertices = (0..8)
        .map(|i| Vec3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64))
        .collect();
    let triangles = vec![
        [0, 2, 3],
        [0, 3, 1],
        [4, 5, 7],
        [4, 7, 6],
        [0, 1, 5],
        [0, 5, 4],
        [2, 6, 7],
        [2, 7, 3],
        [0, 4, 6],
        [0, 6, 2],
        [1, 3, 7],
        [1, 7, 5],
    ];
    Mesh::new(vertices, triangles).expect("valid cube")
}

/// One region per cube face: -z, +z, -y, +y, -x, +x map to 1..=6.
pub fn unit_cube_face_labels() -> RegionLabeling {
    RegionLabeling::new(6, vec![1, 1, 2, 2, 3, 3, 4, 4, 5, 5, 6, 6])
}

/// Two unit squares in the `z = 0` plane sharing the edge `x = 1`, one
/// region each.
pub fn two_squares() -> (Mesh, RegionLabeling) {
    let vertices = vec![
        Vec3::new(0.0, 0.0, 0.0),
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(2.0, 0.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(1.0, 1.0, 0.0),
        Vec3::new(2.0, 1.0, 0.0),
    ];
    let triangles = vec![[0, 1, 4], [0, 4, 3], [1, 2, 5], [1, 5, 4]];
    (
        Mesh::new(vertices, triangles).expect("valid squares"),
        RegionLabeling::new(2, vec![1, 1, 2, 2]),
    )
}

/// Flat `nx × ny` cell grid in `z = 0` with square cells of side `cell`.
/// Vertex `i + j·(nx + 1)` sits at `(i·cell, j·cell, 0)`.
pub fn grid(nx: usize, ny: usize, cell: f64) -> Mesh {
    heightfield(nx, ny, cell, |_, _| 0.0)
}

/// Grid like [`grid`] with `z = height(x, y)`.
pub fn heightfield(nx: usize, ny: usize, cell: f64, height: impl Fn(f64, f64) -> f64) -> Mesh {
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let (x, y) = (i as f64 * cell, j as f64 * cell);
            vertices.push(Vec3::new(x, y, height(x, y)));
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    let id = |i: usize, j: usize| i + j * (nx + 1);
    for j in 0..ny {
        for i in 0..nx {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Mesh::new(vertices, triangles).expect("valid grid")
}

/// Unit icosphere after `subdivisions` rounds of 1-to-4 splitting; has
/// `10·4^s + 2` vertices.
pub fn icosphere(subdivisions: u32) -> Mesh {
    let t = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut triangles: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Vec3>| {
            *midpoint.entry((a.min(b), a.max(b))).or_insert_with(|| {
                vertices.push(((vertices[a] + vertices[b]) * 0.5).normalize());
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(triangles.len() * 4);
        for &[a, b, c] in &triangles {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        triangles = next;
    }
    Mesh::new(vertices, triangles).expect("valid icosphere")
}

/// Two unit squares sharing the edge from anchor 1 to anchor 2. Region 1
/// is held fixed in the plane `z = 0`; the flap (region 2, anchors 4 and
/// 5) is rotated about the shared edge so the normals meet at `angle`.
pub fn hinge(angle: f64) -> AbstractedMesh {
    let flap = |y: f64| Vec3::new(1.0 + angle.cos(), y, angle.sin());
    let points = [
        Vec3::new(0.0, 0.0, 0.0),
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(1.0, 1.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        flap(0.0),
        flap(1.0),
    ];
    let anchors = points
        .iter()
        .enumerate()
        .map(|(i, &position)| Anchor {
            position,
            vertex: i,
            on_open_boundary: false,
            fixed: i < 4,
        })
        .collect();
    let polyline = |a: u32, b: Side, anchors: Vec<usize>, length: f64| Polyline {
        a,
        b,
        vertices: anchors.clone(),
        anchors,
        closed: false,
        length,
    };
    let polylines = vec![
        polyline(1, Side::Region(2), vec![1, 2], 1.0),
        polyline(1, Side::Open, vec![2, 3, 0, 1], 3.0),
        polyline(2, Side::Open, vec![2, 5, 4, 1], 3.0),
    ];
    let boundaries = vec![Boundary {
        regions: [1, 2],
        length: 1.0,
    }];
    AbstractedMesh::from_loops(anchors, polylines, vec![vec![vec![0, 1, 2, 3]], vec![vec![1, 4, 5, 2]]], boundaries)
        .expect("valid hinge")
}
