use super::{Point3, TetMesh};
use crate::error::GeometryError;

/// Structured tet mesh of the box `[0, size]`, six Kuhn tets per hex cell.
pub fn box_mesh(size: Point3, cells: [usize; 3]) -> Result<TetMesh, GeometryError> {
    if cells.contains(&0) || size.iter().any(|&s| !(s > 0.0)) {
        return Err(GeometryError::InvalidParameter(format!(
            "box mesh needs positive size and cell counts, got {size:?} / {cells:?}"
        )));
    }
    let [nx, ny, nz] = cells;
    let id = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    let mut surface = Vec::with_capacity(vertices.capacity());
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([
                    size[0] * i as f64 / nx as f64,
                    size[1] * j as f64 / ny as f64,
                    size[2] * k as f64 / nz as f64,
                ]);
                surface.push(i == 0 || j == 0 || k == 0 || i == nx || j == ny || k == nz);
            }
        }
    }
    // Kuhn paths from corner 000 to 111 through each axis permutation.
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut tets = Vec::with_capacity(6 * nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                for perm in PERMS {
                    let mut c = [i, j, k];
                    let mut tet = [id(c[0], c[1], c[2]); 4];
                    for (step, &axis) in perm.iter().enumerate() {
                        c[axis] += 1;
                        tet[step + 1] = id(c[0], c[1], c[2]);
                    }
                    tets.push(tet);
                }
            }
        }
    }
    TetMesh::from_parts(vertices, tets, surface)
}
