//! Legacy-ASCII VTK output of triangle meshes with point and cell data.
//!
//! The writer emits `DATASET UNSTRUCTURED_GRID` files readable by ParaView
//! and VisIt.  Scalars are written with nine significant digits in scientific
//! notation, giving byte-stable output for identical inputs; vector point
//! data (displacements) gets a zero third component.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::mesh::Mesh;
use crate::{Error, Result};

/// A named nodal field attached to the output.
pub enum PointField<'a> {
    Scalar { name: &'a str, values: &'a [f64] },
    /// Interleaved 2D vectors `[x0, y0, x1, y1, ...]`, padded with `z = 0`.
    Vector2 { name: &'a str, values: &'a [f64] },
}

/// A named per-triangle field attached to the output.
pub struct CellField<'a> {
    pub name: &'a str,
    pub values: &'a [f64],
}

fn fmt_f(x: f64) -> String {
    // Nine significant digits; enough to round-trip visual inspection and
    // short enough to keep files reasonable.
    format!("{:.8e}", x)
}

/// Render the mesh and its attached fields as a legacy VTK string.
pub fn render_vtk(
    mesh: &Mesh,
    point_fields: &[PointField],
    cell_fields: &[CellField],
) -> Result<String> {
    let n = mesh.vertex_count();
    let m = mesh.triangle_count();
    for f in point_fields {
        let (name, len, expect) = match f {
            PointField::Scalar { name, values } => (*name, values.len(), n),
            PointField::Vector2 { name, values } => (*name, values.len(), 2 * n),
        };
        if len != expect {
            return Err(Error::Domain(format!(
                "point field '{name}' has {len} entries, expected {expect}"
            )));
        }
    }
    for f in cell_fields {
        if f.values.len() != m {
            return Err(Error::Domain(format!(
                "cell field '{}' has {} entries, expected {m}",
                f.name,
                f.values.len()
            )));
        }
    }

    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str("contact-topopt output\n");
    out.push_str("ASCII\n");
    out.push_str("DATASET UNSTRUCTURED_GRID\n");

    writeln!(out, "POINTS {n} double").unwrap();
    for v in &mesh.vertices {
        writeln!(out, "{} {} {}", fmt_f(v[0]), fmt_f(v[1]), fmt_f(0.0)).unwrap();
    }

    writeln!(out, "CELLS {m} {}", 4 * m).unwrap();
    for tri in &mesh.triangles {
        writeln!(out, "3 {} {} {}", tri[0], tri[1], tri[2]).unwrap();
    }
    writeln!(out, "CELL_TYPES {m}").unwrap();
    for _ in 0..m {
        out.push_str("5\n");
    }

    if !point_fields.is_empty() {
        writeln!(out, "POINT_DATA {n}").unwrap();
        for f in point_fields {
            match f {
                PointField::Scalar { name, values } => {
                    writeln!(out, "SCALARS {name} double 1").unwrap();
                    out.push_str("LOOKUP_TABLE default\n");
                    for v in *values {
                        out.push_str(&fmt_f(*v));
                        out.push('\n');
                    }
                }
                PointField::Vector2 { name, values } => {
                    writeln!(out, "VECTORS {name} double").unwrap();
                    for i in 0..n {
                        writeln!(
                            out,
                            "{} {} {}",
                            fmt_f(values[2 * i]),
                            fmt_f(values[2 * i + 1]),
                            fmt_f(0.0)
                        )
                        .unwrap();
                    }
                }
            }
        }
    }

    if !cell_fields.is_empty() {
        writeln!(out, "CELL_DATA {m}").unwrap();
        for f in cell_fields {
            writeln!(out, "SCALARS {} double 1", f.name).unwrap();
            out.push_str("LOOKUP_TABLE default\n");
            for v in f.values {
                out.push_str(&fmt_f(*v));
                out.push('\n');
            }
        }
    }
    Ok(out)
}

/// Write the rendered file to `path`.
pub fn write_vtk(
    mesh: &Mesh,
    point_fields: &[PointField],
    cell_fields: &[CellField],
    path: &Path,
) -> Result<()> {
    let body = render_vtk(mesh, point_fields, cell_fields)?;
    fs::write(path, body)?;
    Ok(())
}
