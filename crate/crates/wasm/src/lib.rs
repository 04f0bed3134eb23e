//! Browser bindings. Each export returns a JSON string; the plain Rust
//! functions behind them are what the native tests call.

use latticegraph::continuum::Material;
use latticegraph::geometry::{box_mesh, generate_beam_lattice, tessellate_struts, CellType, Point3, UnitCellSpec};
use latticegraph::oracle::{run_compression, BoundaryCondition};
use latticegraph::pipeline::Specimen;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Mesh resolution kept small so a solve stays interactive.
const SIDES: usize = 4;
const AXIAL: usize = 1;
const CELL: f64 = 10.0;
const MAX_CELLS: usize = 4;

#[derive(Debug, Serialize)]
pub struct LatticePreview {
    pub nodes: Vec<Point3>,
    pub struts: Vec<[usize; 2]>,
    pub total_length: f64,
    pub reduced_nodes: usize,
    pub reduced_edges: usize,
    pub tets: usize,
}

#[derive(Debug, Serialize)]
pub struct Curve {
    pub strain: Vec<f64>,
    /// Compressive platen force (N), positive.
    pub force: Vec<f64>,
    pub tets: usize,
}

#[derive(Debug, Serialize)]
pub struct Block {
    /// Deformed vertex positions at the final step.
    pub vertices: Vec<Point3>,
    pub edges: Vec<[usize; 2]>,
    pub force: f64,
    /// Uniform-compression force `E·ε·A` of the small-strain limit.
    pub linear_force: f64,
}

fn unit_cell(cell_type: &str, diameter: f64) -> Result<UnitCellSpec, String> {
    Ok(UnitCellSpec {
        cell_type: cell_type.parse::<CellType>().map_err(|e| e.to_string())?,
        cell_size: CELL,
        strut_diameter: diameter,
    })
}

fn check_cells(cells: [usize; 3]) -> Result<(), String> {
    if cells.iter().any(|&c| c == 0 || c > MAX_CELLS) {
        return Err(format!("cell counts must be between 1 and {MAX_CELLS}, got {cells:?}"));
    }
    Ok(())
}

pub fn preview(cell_type: &str, cells: [usize; 3], diameter: f64, segment: f64) -> Result<LatticePreview, String> {
    check_cells(cells)?;
    let spec = unit_cell(cell_type, diameter)?;
    let lattice = generate_beam_lattice(&spec, cells[0], cells[1], cells[2]).map_err(|e| e.to_string())?;
    let mesh = tessellate_struts(&lattice, SIDES, AXIAL).map_err(|e| e.to_string())?;
    let specimen = Specimen { lattice, mesh };
    let graph = specimen.reduced_graph(segment, 1e-6).map_err(|e| e.to_string())?;
    Ok(LatticePreview {
        total_length: specimen.lattice.total_length(),
        struts: specimen.lattice.struts.iter().map(|s| s.nodes).collect(),
        nodes: specimen.lattice.nodes,
        reduced_nodes: graph.num_nodes(),
        reduced_edges: graph.edges.len(),
        tets: specimen.mesh.num_tets(),
    })
}

/// Oracle force-strain curve of a single unit cell.
pub fn unit_cell_curve(cell_type: &str, diameter: f64, strain: f64, steps: usize) -> Result<Curve, String> {
    if !(strain > 0.0 && strain < 0.5) || steps == 0 || steps > 24 {
        return Err(format!("need 0 < strain < 0.5 and 1..=24 steps, got {strain} / {steps}"));
    }
    let lattice = generate_beam_lattice(&unit_cell(cell_type, diameter)?, 1, 1, 1).map_err(|e| e.to_string())?;
    let mesh = tessellate_struts(&lattice, SIDES, AXIAL).map_err(|e| e.to_string())?;
    let bb = lattice.bounding_box;
    let bc = BoundaryCondition::compression(&mesh, (bb[0][2], bb[1][2]), 1e-6, 1.0, steps, strain)
        .map_err(|e| e.to_string())?;
    let traj = run_compression(&mesh, &Material::default(), &bc).map_err(|e| e.to_string())?;
    Ok(Curve {
        strain: (0..=steps).map(|t| strain * t as f64 / steps as f64).collect(),
        force: traj.forces().iter().map(|f| -f + 0.0).collect(),
        tets: mesh.num_tets(),
    })
}

/// Compression of a solid block between bonded platens.
pub fn block(size: Point3, cells: [usize; 3], strain: f64) -> Result<Block, String> {
    check_cells(cells)?;
    if !(strain > 0.0 && strain < 0.5) {
        return Err(format!("need 0 < strain < 0.5, got {strain}"));
    }
    let mesh = box_mesh(size, cells).map_err(|e| e.to_string())?;
    let bc = BoundaryCondition::compression(&mesh, (0.0, size[2]), 1e-9, 1.0, 4, strain).map_err(|e| e.to_string())?;
    let mat = Material::default();
    let traj = run_compression(&mesh, &mat, &bc).map_err(|e| e.to_string())?;
    let u = &traj.states.last().expect("initial state").displacements;
    let mut edges: Vec<[usize; 2]> = mesh
        .tets
        .iter()
        .flat_map(|t| [[t[0], t[1]], [t[0], t[2]], [t[0], t[3]], [t[1], t[2]], [t[1], t[3]], [t[2], t[3]]])
        .map(|[a, b]| [a.min(b), a.max(b)])
        .collect();
    edges.sort_unstable();
    edges.dedup();
    Ok(Block {
        vertices: mesh.vertices.iter().zip(u).map(|(x, d)| [x[0] + d[0], x[1] + d[1], x[2] + d[2]]).collect(),
        edges,
        force: -traj.forces().last().copied().unwrap_or(0.0) + 0.0,
        linear_force: youngs_modulus(&mat) * strain * size[0] * size[1],
    })
}

fn youngs_modulus(m: &Material) -> f64 {
    m.mu * (3.0 * m.lambda + 2.0 * m.mu) / (m.lambda + m.mu)
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    r.map(|v| serde_json::to_string(&v).expect("serializable")).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn lattice_preview(cell_type: &str, nx: usize, ny: usize, nz: usize, diameter: f64, segment: f64) -> Result<String, JsError> {
    to_js(preview(cell_type, [nx, ny, nz], diameter, segment))
}

#[wasm_bindgen]
pub fn uniaxial_curve(cell_type: &str, diameter: f64, strain: f64, steps: usize) -> Result<String, JsError> {
    to_js(unit_cell_curve(cell_type, diameter, strain, steps))
}

#[wasm_bindgen]
pub fn compress_block(nx: usize, ny: usize, nz: usize, strain: f64) -> Result<String, JsError> {
    to_js(block([nx as f64, ny as f64, nz as f64], [nx, ny, nz], strain))
}
