use std::collections::HashMap;

use super::{add, cross, norm, scale, sub, BeamLattice, Point3, TetMesh};
use crate::error::GeometryError;

const MERGE_TOL: f64 = 1e-9;

/// Spatial hash that merges vertices closer than [`MERGE_TOL`].
struct VertexPool {
    vertices: Vec<Point3>,
    surface: Vec<bool>,
    buckets: HashMap<[i64; 3], Vec<usize>>,
}

impl VertexPool {
    const BUCKET: f64 = 1e-6;

    fn new() -> Self {
        VertexPool {
            vertices: Vec::new(),
            surface: Vec::new(),
            buckets: HashMap::new(),
        }
    }

    fn key(p: Point3) -> [i64; 3] {
        p.map(|c| (c / Self::BUCKET).floor() as i64)
    }

    fn insert(&mut self, p: Point3, surface: bool) -> usize {
        let k = Self::key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(list) = self.buckets.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        for &v in list {
                            if norm(sub(self.vertices[v], p)) <= MERGE_TOL {
                                self.surface[v] |= surface;
                                return v;
                            }
                        }
                    }
                }
            }
        }
        self.vertices.push(p);
        self.surface.push(surface);
        let id = self.vertices.len() - 1;
        self.buckets.entry(k).or_default().push(id);
        id
    }
}

/// Orthonormal frame perpendicular to `d`, a function of `d` only so that
/// collinear struts get identical rings at shared nodes.
fn ring_frame(d: Point3) -> (Point3, Point3) {
    let abs = d.map(f64::abs);
    let helper = if abs[0] <= abs[1] && abs[0] <= abs[2] {
        [1.0, 0.0, 0.0]
    } else if abs[1] <= abs[2] {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let e1 = cross(d, helper);
    let e1 = scale(e1, 1.0 / norm(e1));
    let e2 = cross(d, e1);
    (e1, e2)
}

/// Splits a triangular prism (bottom `v[0..3]`, top `v[3..6]`, `v[i+3]` above
/// `v[i]`) into three tets. The diagonal choice depends only on global vertex
/// indices, so neighboring prisms agree on shared quad faces.
fn split_prism(v: [usize; 6]) -> [[usize; 4]; 3] {
    const ROT: [[usize; 6]; 6] = [
        [0, 1, 2, 3, 4, 5],
        [1, 2, 0, 4, 5, 3],
        [2, 0, 1, 5, 3, 4],
        [3, 5, 4, 0, 2, 1],
        [4, 3, 5, 1, 0, 2],
        [5, 4, 3, 2, 1, 0],
    ];
    let imin = (0..6).min_by_key(|&i| v[i]).expect("six vertices");
    let p = ROT[imin].map(|i| v[i]);
    if p[1].min(p[5]) < p[2].min(p[4]) {
        [
            [p[0], p[1], p[2], p[5]],
            [p[0], p[1], p[5], p[4]],
            [p[0], p[4], p[5], p[3]],
        ]
    } else {
        [
            [p[0], p[1], p[2], p[4]],
            [p[0], p[4], p[2], p[5]],
            [p[0], p[4], p[5], p[3]],
        ]
    }
}

/// Tessellates each strut as a prismatic tube with a `sides`-gon cross
/// section (circumradius = diameter / 2) and `axial` slabs, with an axis
/// vertex at every station. Struts meeting at a node share the axis vertex
/// at that node; any other coincident vertices are merged as well.
pub fn tessellate_struts(
    lattice: &BeamLattice,
    sides: usize,
    axial: usize,
) -> Result<TetMesh, GeometryError> {
    if sides < 3 {
        return Err(GeometryError::InvalidParameter(format!(
            "tube needs at least 3 sides, got {sides}"
        )));
    }
    if axial < 1 {
        return Err(GeometryError::InvalidParameter(
            "tube needs at least 1 axial segment".into(),
        ));
    }
    let degrees = lattice.node_degrees();
    let mut pool = VertexPool::new();
    let mut tets = Vec::new();
    for (s, strut) in lattice.struts.iter().enumerate() {
        let [na, nb] = strut.nodes;
        let (a, b) = (lattice.nodes[na], lattice.nodes[nb]);
        let axis = sub(b, a);
        let len = norm(axis);
        if len < 1e-12 {
            return Err(GeometryError::ZeroLengthStrut { strut: s });
        }
        let d = scale(axis, 1.0 / len);
        let (e1, e2) = ring_frame(d);
        let r = strut.diameter / 2.0;
        let offsets: Vec<Point3> = (0..sides)
            .map(|m| {
                let th = 2.0 * std::f64::consts::PI * m as f64 / sides as f64;
                add(scale(e1, r * th.cos()), scale(e2, r * th.sin()))
            })
            .collect();
        let mut centers = Vec::with_capacity(axial + 1);
        let mut rings = Vec::with_capacity(axial + 1);
        for k in 0..=axial {
            let c = match k {
                0 => a,
                k if k == axial => b,
                k => add(a, scale(axis, k as f64 / axial as f64)),
            };
            let exposed_cap = (k == 0 && degrees[na] == 1) || (k == axial && degrees[nb] == 1);
            centers.push(pool.insert(c, exposed_cap));
            rings.push(
                offsets
                    .iter()
                    .map(|o| pool.insert(add(c, *o), true))
                    .collect::<Vec<_>>(),
            );
        }
        for k in 0..axial {
            for m in 0..sides {
                let m1 = (m + 1) % sides;
                let prism = [
                    centers[k],
                    rings[k][m],
                    rings[k][m1],
                    centers[k + 1],
                    rings[k + 1][m],
                    rings[k + 1][m1],
                ];
                tets.extend(split_prism(prism));
            }
        }
    }
    TetMesh::from_parts(pool.vertices, tets, pool.surface)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_beam_lattice, signed_volume, CellType, Strut, UnitCellSpec};
    use std::collections::HashMap;

    fn lattice_of(nodes: Vec<Point3>, struts: Vec<[usize; 2]>, d: f64) -> BeamLattice {
        BeamLattice {
            nodes,
            struts: struts
                .into_iter()
                .map(|n| Strut {
                    nodes: n,
                    diameter: d,
                })
                .collect(),
            bounding_box: [[0.0; 3], [1.0; 3]],
        }
    }

    #[test]
    fn triangular_single_strut() {
        let l = lattice_of(vec![[0.0; 3], [0.0, 0.0, 5.0]], vec![[0, 1]], 1.0);
        let m = tessellate_struts(&l, 3, 1).unwrap();
        assert_eq!(m.num_vertices(), 2 * 3 + 2);
        assert_eq!(m.num_tets(), 9);
        for t in 0..m.num_tets() {
            assert!(signed_volume(m.tet_positions(t)) > 0.0);
        }
        // Equilateral triangle of circumradius 0.5 times length 5.
        let area = 3.0 * 3f64.sqrt() / 4.0 * 0.25;
        assert!((m.total_volume() - area * 5.0).abs() < 1e-12);
        assert_eq!(m.surface_flags.iter().filter(|&&s| s).count(), 8);
    }

    #[test]
    fn collinear_struts_share_junction() {
        let l = lattice_of(
            vec![[0.0; 3], [0.0, 0.0, 3.0], [0.0, 0.0, 6.0]],
            vec![[0, 1], [1, 2]],
            1.0,
        );
        let m = tessellate_struts(&l, 6, 2).unwrap();
        let separate = 2 * (3 * 7);
        assert!(m.num_vertices() < separate);
        assert_eq!(m.num_vertices(), 5 * 7);
        assert!(
            !m.surface_flags[m
                .vertices
                .iter()
                .position(|p| *p == [0.0, 0.0, 3.0])
                .unwrap()]
        );
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let l = lattice_of(vec![[0.0; 3], [0.0, 0.0, 1.0]], vec![[0, 1]], 0.2);
        assert!(tessellate_struts(&l, 2, 1).is_err());
        assert!(tessellate_struts(&l, 3, 0).is_err());
        let z = lattice_of(vec![[0.0; 3], [0.0; 3]], vec![[0, 1]], 0.2);
        assert!(matches!(
            tessellate_struts(&z, 4, 1),
            Err(GeometryError::ZeroLengthStrut { strut: 0 })
        ));
    }

    #[test]
    fn prism_split_is_conforming() {
        // Every interior face shared by exactly two tets, boundary faces by one.
        let spec = UnitCellSpec {
            cell_type: CellType::SimpleCubic,
            cell_size: 10.0,
            strut_diameter: 2.0,
        };
        let l = generate_beam_lattice(&spec, 1, 1, 1).unwrap();
        let m = tessellate_struts(&l, 5, 3).unwrap();
        let mut faces: HashMap<[usize; 3], usize> = HashMap::new();
        for t in &m.tets {
            for skip in 0..4 {
                let mut f: Vec<usize> = (0..4).filter(|&i| i != skip).map(|i| t[i]).collect();
                f.sort_unstable();
                *faces.entry([f[0], f[1], f[2]]).or_default() += 1;
            }
        }
        assert!(faces.values().all(|&c| c <= 2));
        for t in 0..m.num_tets() {
            let v = signed_volume(m.tet_positions(t));
            assert!(v > 0.0 && (v - m.volumes[t]).abs() < 1e-12);
        }
    }

    #[test]
    fn volume_close_to_cylinders() {
        // Non-intersecting parallel struts; a 12-gon captures ~95.5% of the disk.
        let l = lattice_of(
            vec![[0.0; 3], [0.0, 0.0, 8.0], [5.0, 0.0, 0.0], [5.0, 0.0, 8.0]],
            vec![[0, 1], [2, 3]],
            1.5,
        );
        let m = tessellate_struts(&l, 12, 4).unwrap();
        let cyl = 2.0 * std::f64::consts::PI * 0.75f64.powi(2) * 8.0;
        assert!((m.total_volume() - cyl).abs() / cyl < 0.10);
    }
}
