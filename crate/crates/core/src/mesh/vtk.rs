//! Legacy ASCII VTK output (UNSTRUCTURED_GRID, tets only).

use super::TetMesh;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

pub enum Data<'a> {
    PointScalar(&'a str, &'a [f64]),
    PointVector(&'a str, &'a [[f64; 3]]),
    CellScalar(&'a str, &'a [f64]),
    CellVector(&'a str, &'a [[f64; 3]]),
}

pub fn to_string(mesh: &TetMesh, title: &str, data: &[Data]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", mesh.n_vertices());
    for p in &mesh.vertices {
        let _ = writeln!(s, "{:.17e} {:.17e} {:.17e}", p[0], p[1], p[2]);
    }
    let nt = mesh.n_tets();
    let _ = writeln!(s, "CELLS {} {}", nt, 5 * nt);
    for t in &mesh.tets {
        let _ = writeln!(s, "4 {} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("10\n");
    }
    let point: Vec<_> = data.iter().filter(|d| matches!(d, Data::PointScalar(..) | Data::PointVector(..))).collect();
    let cell: Vec<_> = data.iter().filter(|d| matches!(d, Data::CellScalar(..) | Data::CellVector(..))).collect();
    if !point.is_empty() {
        let _ = writeln!(s, "POINT_DATA {}", mesh.n_vertices());
        for d in point {
            write_data(&mut s, d);
        }
    }
    if !cell.is_empty() {
        let _ = writeln!(s, "CELL_DATA {nt}");
        for d in cell {
            write_data(&mut s, d);
        }
    }
    s
}

fn write_data(s: &mut String, d: &Data) {
    match d {
        Data::PointScalar(name, v) | Data::CellScalar(name, v) => {
            let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for x in v.iter() {
                let _ = writeln!(s, "{x:.17e}");
            }
        }
        Data::PointVector(name, v) | Data::CellVector(name, v) => {
            let _ = writeln!(s, "VECTORS {name} double");
            for x in v.iter() {
                let _ = writeln!(s, "{:.17e} {:.17e} {:.17e}", x[0], x[1], x[2]);
            }
        }
    }
}

pub fn write(path: &Path, mesh: &TetMesh, title: &str, data: &[Data]) -> io::Result<()> {
    std::fs::write(path, to_string(mesh, title, data))
}
