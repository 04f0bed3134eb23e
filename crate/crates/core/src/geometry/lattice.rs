use std::collections::{BTreeMap, BTreeSet};

use super::{BeamLattice, CellType, Strut, UnitCellSpec};
use crate::error::GeometryError;

/// Integer node coordinate in half-cell units.
type HalfKey = [i64; 3];

fn corners() -> Vec<HalfKey> {
    let mut c = Vec::with_capacity(8);
    for z in [0, 2] {
        for y in [0, 2] {
            for x in [0, 2] {
                c.push([x, y, z]);
            }
        }
    }
    c
}

fn cube_edges() -> Vec<(HalfKey, HalfKey)> {
    let c = corners();
    let mut edges = Vec::new();
    for i in 0..c.len() {
        for j in (i + 1)..c.len() {
            let diff: i64 = (0..3).map(|k| (c[i][k] - c[j][k]).abs()).sum();
            if diff == 2 {
                edges.push((c[i], c[j]));
            }
        }
    }
    edges
}

/// Strut template of one cell, in half-cell integer coordinates.
fn cell_template(cell: CellType) -> Vec<(HalfKey, HalfKey)> {
    match cell {
        CellType::SimpleCubic => cube_edges(),
        CellType::BodyCenteredCubic => {
            let mut s = cube_edges();
            s.extend(corners().into_iter().map(|c| ([1, 1, 1], c)));
            s
        }
        CellType::Octet => {
            let faces: Vec<HalfKey> = vec![
                [1, 1, 0],
                [1, 1, 2],
                [1, 0, 1],
                [1, 2, 1],
                [0, 1, 1],
                [2, 1, 1],
            ];
            let mut s = Vec::new();
            for f in &faces {
                let axis = (0..3)
                    .find(|&k| f[k] != 1)
                    .expect("face center lies on a face");
                for c in corners() {
                    if c[axis] == f[axis] {
                        s.push((*f, c));
                    }
                }
            }
            for i in 0..faces.len() {
                for j in (i + 1)..faces.len() {
                    let opposite = (0..3).all(|k| faces[i][k] + faces[j][k] == 2);
                    if !opposite {
                        s.push((faces[i], faces[j]));
                    }
                }
            }
            s
        }
    }
}

/// Tiles the unit cell on an `nx × ny × nz` grid, merging shared nodes and
/// struts. Nodes are ordered by (z, y, x); each strut lists its lower-ordered
/// node first.
pub fn generate_beam_lattice(
    spec: &UnitCellSpec,
    nx: usize,
    ny: usize,
    nz: usize,
) -> Result<BeamLattice, GeometryError> {
    spec.validate()?;
    if nx == 0 || ny == 0 || nz == 0 {
        return Err(GeometryError::InvalidParameter(format!(
            "cell counts must be >= 1, got {nx}x{ny}x{nz}"
        )));
    }
    let template = cell_template(spec.cell_type);
    let mut pairs: BTreeSet<([i64; 3], [i64; 3])> = BTreeSet::new();
    for k in 0..nz as i64 {
        for j in 0..ny as i64 {
            for i in 0..nx as i64 {
                let off = [2 * i, 2 * j, 2 * k];
                for (a, b) in &template {
                    // Sort by (z, y, x) so strut direction is canonical.
                    let ka = [a[2] + off[2], a[1] + off[1], a[0] + off[0]];
                    let kb = [b[2] + off[2], b[1] + off[1], b[0] + off[0]];
                    pairs.insert(if ka < kb { (ka, kb) } else { (kb, ka) });
                }
            }
        }
    }
    let mut index: BTreeMap<[i64; 3], usize> = BTreeMap::new();
    for (a, b) in &pairs {
        index.insert(*a, 0);
        index.insert(*b, 0);
    }
    let half = spec.cell_size / 2.0;
    let mut nodes = Vec::with_capacity(index.len());
    for (n, (key, slot)) in index.iter_mut().enumerate() {
        *slot = n;
        nodes.push([
            key[2] as f64 * half,
            key[1] as f64 * half,
            key[0] as f64 * half,
        ]);
    }
    let struts = pairs
        .iter()
        .map(|(a, b)| Strut {
            nodes: [index[a], index[b]],
            diameter: spec.strut_diameter,
        })
        .collect();
    let s = spec.cell_size;
    Ok(BeamLattice {
        nodes,
        struts,
        bounding_box: [[0.0; 3], [nx as f64 * s, ny as f64 * s, nz as f64 * s]],
    })
}
