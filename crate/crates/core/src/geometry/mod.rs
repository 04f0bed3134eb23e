//! Lattice geometry: parametric beam lattices, strut tessellation into
//! tetrahedra, reduced (skeletal) graphs and the tet-vertex to strut-node
//! assignment used by the up-mapping network.

mod assign;
mod boxmesh;
mod lattice;
mod reduced;
mod tessellate;

pub use assign::{assign_tets_to_strut_nodes, Assignment};
pub use boxmesh::box_mesh;
pub use lattice::generate_beam_lattice;
pub use reduced::{classify_nodes, subdivide_to_reduced_graph};
pub use tessellate::tessellate_struts;

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::GeometryError;

pub type Point3 = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellType {
    SimpleCubic,
    BodyCenteredCubic,
    Octet,
}

impl FromStr for CellType {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "simple_cubic" | "simplecubic" | "sc" => Ok(CellType::SimpleCubic),
            "body_centered_cubic" | "bodycenteredcubic" | "bcc" => Ok(CellType::BodyCenteredCubic),
            "octet" => Ok(CellType::Octet),
            _ => Err(GeometryError::UnsupportedCellType(s.to_string())),
        }
    }
}

impl fmt::Display for CellType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellType::SimpleCubic => "simple_cubic",
            CellType::BodyCenteredCubic => "body_centered_cubic",
            CellType::Octet => "octet",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitCellSpec {
    pub cell_type: CellType,
    /// Edge length of the cubic cell (mm).
    pub cell_size: f64,
    /// Strut diameter (mm).
    pub strut_diameter: f64,
}

impl UnitCellSpec {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.cell_size > 0.0) || !self.cell_size.is_finite() {
            return Err(GeometryError::InvalidCell(format!(
                "cell_size must be positive, got {}",
                self.cell_size
            )));
        }
        if !(self.strut_diameter > 0.0 && self.strut_diameter < self.cell_size) {
            return Err(GeometryError::InvalidCell(format!(
                "strut_diameter must lie in (0, cell_size), got {}",
                self.strut_diameter
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Strut {
    pub nodes: [usize; 2],
    pub diameter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamLattice {
    pub nodes: Vec<Point3>,
    pub struts: Vec<Strut>,
    pub bounding_box: [Point3; 2],
}

impl BeamLattice {
    pub fn strut_length(&self, s: usize) -> f64 {
        let [a, b] = self.struts[s].nodes;
        norm(sub(self.nodes[b], self.nodes[a]))
    }

    pub fn total_length(&self) -> f64 {
        (0..self.struts.len()).map(|s| self.strut_length(s)).sum()
    }

    pub fn node_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for s in &self.struts {
            deg[s.nodes[0]] += 1;
            deg[s.nodes[1]] += 1;
        }
        deg
    }

    pub fn height(&self) -> f64 {
        self.bounding_box[1][2] - self.bounding_box[0][2]
    }
}

/// Node class of a reduced-graph node, in one-hot channel order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeType {
    Fixed,
    Loading,
    FreeBoundary,
    Interior,
}

impl NodeType {
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn one_hot(self) -> [f64; 4] {
        let mut v = [0.0; 4];
        v[self.index()] = 1.0;
        v
    }

    pub fn from_one_hot(v: &[f64; 4]) -> Option<NodeType> {
        const ALL: [NodeType; 4] = [
            NodeType::Fixed,
            NodeType::Loading,
            NodeType::FreeBoundary,
            NodeType::Interior,
        ];
        let hot: Vec<usize> = (0..4).filter(|&i| v[i] == 1.0).collect();
        match (hot.as_slice(), v.iter().sum::<f64>() == 1.0) {
            ([i], true) => Some(ALL[*i]),
            _ => None,
        }
    }
}

/// Skeletal strut graph consumed by the reduced predictor.
///
/// Edges are stored as `[receiver, sender]` pairs and every undirected edge
/// appears in both orientations. Edge quantities are oriented receiver minus
/// sender, and messages are aggregated at the receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedGraph {
    #[serde(rename = "nodes")]
    pub positions: Vec<Point3>,
    pub node_type: Vec<[f64; 4]>,
    pub diameter: Vec<f64>,
    pub degree: Vec<usize>,
    pub edges: Vec<[usize; 2]>,
}

impl ReducedGraph {
    pub fn num_nodes(&self) -> usize {
        self.positions.len()
    }

    pub fn node_kind(&self, i: usize) -> NodeType {
        NodeType::from_one_hot(&self.node_type[i]).unwrap_or(NodeType::Interior)
    }

    pub fn recompute_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_nodes()];
        for e in &self.edges {
            deg[e[0]] += 1;
        }
        deg
    }

    /// Sorted neighbor lists derived from the edge list.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); self.num_nodes()];
        for e in &self.edges {
            nb[e[0]].push(e[1]);
        }
        for l in &mut nb {
            l.sort_unstable();
            l.dedup();
        }
        nb
    }

    pub fn total_edge_length(&self) -> f64 {
        self.edges
            .iter()
            .map(|e| norm(sub(self.positions[e[0]], self.positions[e[1]])))
            .sum::<f64>()
            / 2.0
    }
}

/// Tetrahedral volume mesh with rest positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TetMesh {
    pub vertices: Vec<Point3>,
    pub tets: Vec<[usize; 4]>,
    pub surface_flags: Vec<bool>,
    pub volumes: Vec<f64>,
}

impl TetMesh {
    /// Builds a mesh, reorienting every tet to positive signed volume.
    pub fn from_parts(
        vertices: Vec<Point3>,
        mut tets: Vec<[usize; 4]>,
        surface_flags: Vec<bool>,
    ) -> Result<TetMesh, GeometryError> {
        let mut volumes = Vec::with_capacity(tets.len());
        for (t, tet) in tets.iter_mut().enumerate() {
            if let Some(&bad) = tet.iter().find(|&&v| v >= vertices.len()) {
                return Err(GeometryError::InvalidParameter(format!(
                    "tet {t} references vertex {bad} of {}",
                    vertices.len()
                )));
            }
            let mut vol = signed_volume(tet.map(|v| vertices[v]));
            if vol < 0.0 {
                tet.swap(2, 3);
                vol = -vol;
            }
            if vol <= 0.0 {
                return Err(GeometryError::InvalidParameter(format!(
                    "tet {t} has zero volume"
                )));
            }
            volumes.push(vol);
        }
        Ok(TetMesh {
            vertices,
            tets,
            surface_flags,
            volumes,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }

    pub fn bounds(&self) -> [Point3; 2] {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        [lo, hi]
    }

    pub fn tet_positions(&self, t: usize) -> [Point3; 4] {
        self.tets[t].map(|v| self.vertices[v])
    }

    /// Unique undirected mesh edges `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut edges = Vec::with_capacity(self.tets.len() * 6);
        for tet in &self.tets {
            for i in 0..4 {
                for j in (i + 1)..4 {
                    let (a, b) = (tet[i].min(tet[j]), tet[i].max(tet[j]));
                    edges.push([a, b]);
                }
            }
        }
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    pub fn vertex_tets(&self) -> Vec<Vec<usize>> {
        let mut incident = vec![Vec::new(); self.vertices.len()];
        for (t, tet) in self.tets.iter().enumerate() {
            for &v in tet {
                incident[v].push(t);
            }
        }
        incident
    }

    /// Vertices whose z coordinate is within `tol` of `z`.
    pub fn vertices_near_z(&self, z: f64, tol: f64) -> Vec<usize> {
        (0..self.vertices.len())
            .filter(|&v| (self.vertices[v][2] - z).abs() <= tol)
            .collect()
    }
}

pub fn signed_volume(p: [Point3; 4]) -> f64 {
    let a = sub(p[1], p[0]);
    let b = sub(p[2], p[0]);
    let c = sub(p[3], p[0]);
    dot(a, cross(b, c)) / 6.0
}

pub(crate) fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn add(a: Point3, b: Point3) -> Point3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn scale(a: Point3, s: f64) -> Point3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub(crate) fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: Point3, b: Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: Point3) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn dist2(a: Point3, b: Point3) -> f64 {
    let d = sub(a, b);
    dot(d, d)
}
