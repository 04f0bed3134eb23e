//! Legacy ASCII VTK unstructured grids of linear tetrahedra.

use std::fmt::Write as _;

use crate::error::FormatError;
use crate::geometry::{Point3, TetMesh};

const VTK_TETRA: u32 = 10;

/// Named per-vertex data written as POINT_DATA.
pub enum PointField<'a> {
    Scalars(&'a str, &'a [f64]),
    Vectors(&'a str, &'a [Point3]),
}

/// Serializes `mesh` at `positions` (rest positions when `None`). The
/// surface flags are always written as an integer scalar field `surface`.
pub fn write_vtk(
    mesh: &TetMesh,
    positions: Option<&[Point3]>,
    title: &str,
    fields: &[PointField<'_>],
) -> String {
    let pts = positions.unwrap_or(&mesh.vertices);
    let mut s = String::new();
    let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    let _ = writeln!(
        s,
        "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID"
    );
    let _ = writeln!(s, "POINTS {} double", pts.len());
    for p in pts {
        let _ = writeln!(s, "{:?} {:?} {:?}", p[0], p[1], p[2]);
    }
    let _ = writeln!(s, "CELLS {} {}", mesh.num_tets(), 5 * mesh.num_tets());
    for t in &mesh.tets {
        let _ = writeln!(s, "4 {} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    let _ = writeln!(s, "CELL_TYPES {}", mesh.num_tets());
    for _ in 0..mesh.num_tets() {
        let _ = writeln!(s, "{VTK_TETRA}");
    }
    let _ = writeln!(s, "POINT_DATA {}", pts.len());
    let _ = writeln!(s, "SCALARS surface int 1\nLOOKUP_TABLE default");
    for f in &mesh.surface_flags {
        let _ = writeln!(s, "{}", u8::from(*f));
    }
    for field in fields {
        match field {
            PointField::Scalars(name, v) => {
                let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
                for x in *v {
                    let _ = writeln!(s, "{x:?}");
                }
            }
            PointField::Vectors(name, v) => {
                let _ = writeln!(s, "VECTORS {name} double");
                for p in *v {
                    let _ = writeln!(s, "{:?} {:?} {:?}", p[0], p[1], p[2]);
                }
            }
        }
    }
    s
}

fn malformed(msg: impl Into<String>) -> FormatError {
    FormatError::Malformed(msg.into())
}

/// Reads a mesh written by [`write_vtk`]; extra point data is ignored.
pub fn read_vtk(text: &str) -> Result<TetMesh, FormatError> {
    let mut lines = text.lines();
    if !lines.next().unwrap_or("").starts_with("# vtk DataFile") {
        return Err(FormatError::BadMagic {
            expected: "# vtk DataFile".into(),
            found: text.lines().next().unwrap_or("").chars().take(32).collect(),
        });
    }
    let mut tokens = lines.skip(1).flat_map(str::split_whitespace);
    let mut next = |what: &str| {
        tokens
            .next()
            .ok_or_else(|| malformed(format!("unexpected end before {what}")))
    };
    if next("ASCII")? != "ASCII"
        || next("DATASET")? != "DATASET"
        || next("grid")? != "UNSTRUCTURED_GRID"
    {
        return Err(malformed("only ASCII UNSTRUCTURED_GRID is supported"));
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| malformed(format!("bad count {s:?}")))
    };
    let real = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| malformed(format!("bad number {s:?}")))
    };
    if next("POINTS")? != "POINTS" {
        return Err(malformed("expected POINTS"));
    }
    let np = num(next("point count")?)?;
    next("point type")?;
    let mut vertices = Vec::with_capacity(np);
    for _ in 0..np {
        vertices.push([real(next("x")?)?, real(next("y")?)?, real(next("z")?)?]);
    }
    if next("CELLS")? != "CELLS" {
        return Err(malformed("expected CELLS"));
    }
    let nc = num(next("cell count")?)?;
    next("cell size")?;
    let mut tets = Vec::with_capacity(nc);
    for _ in 0..nc {
        if num(next("cell arity")?)? != 4 {
            return Err(malformed("only tetrahedra are supported"));
        }
        tets.push([
            num(next("a")?)?,
            num(next("b")?)?,
            num(next("c")?)?,
            num(next("d")?)?,
        ]);
    }
    if next("CELL_TYPES")? != "CELL_TYPES" || num(next("type count")?)? != nc {
        return Err(malformed("expected CELL_TYPES matching CELLS"));
    }
    for _ in 0..nc {
        if num(next("cell type")?)? != VTK_TETRA as usize {
            return Err(malformed("only cell type 10 (tetra) is supported"));
        }
    }
    let mut surface = vec![false; np];
    while let Some(tok) = tokens.next() {
        if tok == "SCALARS" && tokens.next() == Some("surface") {
            tokens.next();
            tokens.next();
            tokens.next();
            tokens.next();
            for f in surface.iter_mut() {
                *f = tokens
                    .next()
                    .ok_or_else(|| malformed("truncated surface flags"))?
                    == "1";
            }
            break;
        }
    }
    TetMesh::from_parts(vertices, tets, surface).map_err(|e| malformed(e.to_string()))
}
