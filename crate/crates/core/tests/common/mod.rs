#![allow(dead_code)]

use std::collections::HashMap;

use reorient_core::mesh::TriangleMesh;
use reorient_core::rotation::Vec3;

pub const CUBE_OBJ: &str = "\
v -1 -1 -1
v 1 -1 -1
v 1 1 -1
v -1 1 -1
v -1 -1 1
v 1 -1 1
v 1 1 1
v -1 1 1
f 1 3 2
f 1 4 3
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
";

pub fn cube() -> TriangleMesh {
    reorient_core::mesh::parse_obj(CUBE_OBJ).unwrap()
}

pub fn cube_vertices() -> Vec<Vec3> {
    let mut v = Vec::new();
    for x in [-1.0, 1.0] {
        for y in [-1.0, 1.0] {
            for z in [-1.0, 1.0] {
                v.push([x, y, z]);
            }
        }
    }
    v
}

fn normalized(p: Vec3) -> Vec3 {
    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    [p[0] / n, p[1] / n, p[2] / n]
}

/// Unit icosphere with a vertex at +z (and -z), outward winding.
pub fn icosphere_raw(subdivisions: usize) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|&p| normalized(p))
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
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
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Vec3>| {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                let (p, q) = (verts[a], verts[b]);
                verts.push(normalized([p[0] + q[0], p[1] + q[1], p[2] + q[2]]));
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    // put vertex 0 on +z so the pole is a vertex
    let p = verts[0];
    let axis = normalized([p[1], -p[0], 0.0]);
    let angle = p[2].clamp(-1.0, 1.0).acos();
    let rot = reorient_core::rotation::UnitQuaternion::from_axis_angle(axis, angle).unwrap();
    let verts = verts.into_iter().map(|v| rot.rotate(v)).collect();
    (verts, faces)
}

/// Icosphere radially displaced by a smooth, asymmetric field. `variant`
/// selects one of several unrelated shapes.
pub fn lumpy(variant: usize) -> TriangleMesh {
    let (verts, faces) = icosphere_raw(3);
    let c = [
        [0.9, 0.35, -0.5, 1.7, 0.6, 0.0, 0.25],
        [-0.4, 1.1, 0.7, 2.3, 0.3, 1.0, 0.35],
        [0.5, -0.8, 1.3, 1.1, 0.45, 2.0, 0.3],
        [1.4, 0.2, 0.4, 2.9, 0.5, 0.5, 0.2],
    ][variant % 4];
    let verts = verts
        .into_iter()
        .map(|[x, y, z]| {
            let s = 1.0
                + c[6] * (c[3] * (c[0] * x + c[1] * y + c[2] * z) + c[5]).sin()
                + 0.3 * (x + 0.5).max(0.0) * (1.0 + c[4] * y)
                + 0.15 * (2.0 * z + c[5]).cos() * x
                + 0.4 * (x * c[0] + 0.3).max(0.0).powi(2);
            let stretch = [1.4 + 0.2 * c[0], 0.9, 0.7 + 0.1 * c[2]];
            [x * s * stretch[0], y * s * stretch[1], z * s * stretch[2]]
        })
        .collect();
    TriangleMesh::new(verts, faces)
        .unwrap()
        .canonicalized()
        .unwrap()
}

pub fn sphere(subdivisions: usize) -> TriangleMesh {
    let (v, f) = icosphere_raw(subdivisions);
    TriangleMesh::new(v, f).unwrap()
}
