//! Nodal displacement fields and their legacy-VTK (ASCII unstructured grid)
//! export.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::mesh::{Mesh2D, Point};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyField {
    pub nodes: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub displacement: Vec<[f64; 2]>,
    pub magnitude: Vec<f64>,
}

/// Per-body displacement fields plus per-surface multiplier values (one
/// 2-vector per slave node, in surface order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldExport {
    pub bodies: Vec<BodyField>,
    pub multipliers: Vec<Vec<[f64; 2]>>,
}

impl FieldExport {
    pub fn new(meshes: &[Mesh2D], displacement: Vec<Vec<[f64; 2]>>, multipliers: Vec<Vec<[f64; 2]>>) -> Self {
        let bodies = meshes
            .iter()
            .zip(displacement)
            .map(|(mesh, disp)| BodyField {
                nodes: mesh.nodes().to_vec(),
                triangles: mesh.triangles().to_vec(),
                magnitude: disp.iter().map(|u| u[0].hypot(u[1])).collect(),
                displacement: disp,
            })
            .collect();
        Self { bodies, multipliers }
    }

    /// Largest displacement magnitude and the body/node where it occurs.
    pub fn max_magnitude(&self) -> Option<(usize, usize, f64)> {
        self.bodies
            .iter()
            .enumerate()
            .flat_map(|(b, f)| f.magnitude.iter().enumerate().map(move |(v, &m)| (b, v, m)))
            .max_by(|a, b| a.2.total_cmp(&b.2))
    }
}

/// Flattened grid as stored in a VTK file.
#[derive(Debug, Clone, PartialEq)]
pub struct VtkGrid {
    pub points: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub displacement: Vec<[f64; 2]>,
    pub magnitude: Vec<f64>,
}

pub fn write_vtk<W: Write>(fields: &FieldExport, mut out: W) -> io::Result<()> {
    let npts: usize = fields.bodies.iter().map(|b| b.nodes.len()).sum();
    let ncells: usize = fields.bodies.iter().map(|b| b.triangles.len()).sum();
    for (k, b) in fields.bodies.iter().enumerate() {
        if b.displacement.len() != b.nodes.len() || b.magnitude.len() != b.nodes.len() {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                format!("body {k}: field length does not match node count"),
            ));
        }
    }
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "tied contact displacement")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {npts} double")?;
    for b in &fields.bodies {
        for p in &b.nodes {
            writeln!(out, "{:e} {:e} 0", p[0], p[1])?;
        }
    }
    writeln!(out, "CELLS {ncells} {}", 4 * ncells)?;
    let mut offset = 0;
    for b in &fields.bodies {
        for t in &b.triangles {
            writeln!(out, "3 {} {} {}", t[0] + offset, t[1] + offset, t[2] + offset)?;
        }
        offset += b.nodes.len();
    }
    writeln!(out, "CELL_TYPES {ncells}")?;
    for _ in 0..ncells {
        writeln!(out, "5")?;
    }
    writeln!(out, "CELL_DATA {ncells}")?;
    writeln!(out, "SCALARS body int 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for (k, b) in fields.bodies.iter().enumerate() {
        for _ in &b.triangles {
            writeln!(out, "{k}")?;
        }
    }
    writeln!(out, "POINT_DATA {npts}")?;
    writeln!(out, "VECTORS displacement double")?;
    for b in &fields.bodies {
        for u in &b.displacement {
            writeln!(out, "{:e} {:e} 0", u[0], u[1])?;
        }
    }
    writeln!(out, "SCALARS magnitude double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for b in &fields.bodies {
        for m in &b.magnitude {
            writeln!(out, "{m:e}")?;
        }
    }
    Ok(())
}

fn bad(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

/// Reads back files produced by [`write_vtk`].
pub fn read_vtk<R: BufRead>(input: R) -> io::Result<VtkGrid> {
    let lines: Vec<String> = input.lines().collect::<Result<_, _>>()?;
    let mut it = lines.iter().map(|l| l.trim()).filter(|l| !l.is_empty());
    let mut grid = VtkGrid { points: vec![], triangles: vec![], displacement: vec![], magnitude: vec![] };
    let nums = |line: &str| -> io::Result<Vec<f64>> {
        line.split_whitespace().map(|t| t.parse::<f64>().map_err(|_| bad(format!("bad number `{t}`")))).collect()
    };
    let count = |line: &str, pos: usize| -> io::Result<usize> {
        line.split_whitespace()
            .nth(pos)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad(format!("bad count in `{line}`")))
    };
    let mut point_data = false;
    while let Some(line) = it.next() {
        if line.starts_with("POINTS") {
            for _ in 0..count(line, 1)? {
                let v = nums(it.next().ok_or_else(|| bad("truncated POINTS"))?)?;
                grid.points.push([v[0], v[1]]);
            }
        } else if line.starts_with("CELLS") {
            for _ in 0..count(line, 1)? {
                let v = nums(it.next().ok_or_else(|| bad("truncated CELLS"))?)?;
                if v.len() != 4 || v[0] != 3.0 {
                    return Err(bad("only triangles are supported"));
                }
                grid.triangles.push([v[1] as usize, v[2] as usize, v[3] as usize]);
            }
        } else if line.starts_with("POINT_DATA") {
            point_data = true;
        } else if point_data && line.starts_with("VECTORS displacement") {
            for _ in 0..grid.points.len() {
                let v = nums(it.next().ok_or_else(|| bad("truncated displacement"))?)?;
                grid.displacement.push([v[0], v[1]]);
            }
        } else if point_data && line.starts_with("SCALARS magnitude") {
            it.next(); // lookup table
            for _ in 0..grid.points.len() {
                grid.magnitude.push(nums(it.next().ok_or_else(|| bad("truncated magnitude"))?)?[0]);
            }
        }
    }
    if grid.displacement.len() != grid.points.len() || grid.magnitude.len() != grid.points.len() {
        return Err(bad("missing point data"));
    }
    Ok(grid)
}
