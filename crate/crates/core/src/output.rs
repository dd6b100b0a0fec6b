//! Writers for VTK legacy unstructured grids and per-element CSV tables.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::PolyMesh;
use crate::solver::CellFrame;

/// Legacy ASCII VTK file with one polygon cell per element and the given
/// cell-data arrays.
pub fn write_vtk(path: &Path, mesh: &PolyMesh, title: &str, cell_data: &[(&str, &[f64])]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "# vtk DataFile Version 3.0").map_err(io)?;
    writeln!(w, "{}", title.replace('\n', " ")).map_err(io)?;
    writeln!(w, "ASCII").map_err(io)?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID").map_err(io)?;
    writeln!(w, "POINTS {} double", mesh.vertices.len()).map_err(io)?;
    for v in &mesh.vertices {
        writeln!(w, "{:.12e} {:.12e} 0", v[0], v[1]).map_err(io)?;
    }
    let size: usize = mesh.elements.iter().map(|e| e.len() + 1).sum();
    writeln!(w, "CELLS {} {}", mesh.num_elements(), size).map_err(io)?;
    for el in &mesh.elements {
        write!(w, "{}", el.len()).map_err(io)?;
        for v in el {
            write!(w, " {v}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    writeln!(w, "CELL_TYPES {}", mesh.num_elements()).map_err(io)?;
    for _ in 0..mesh.num_elements() {
        // VTK_POLYGON
        writeln!(w, "7").map_err(io)?;
    }
    writeln!(w, "CELL_DATA {}", mesh.num_elements()).map_err(io)?;
    for (name, data) in cell_data {
        if data.len() != mesh.num_elements() {
            return Err(Error::Config(format!(
                "cell array {name} has {} values for {} cells",
                data.len(),
                mesh.num_elements()
            )));
        }
        writeln!(w, "SCALARS {name} double 1").map_err(io)?;
        writeln!(w, "LOOKUP_TABLE default").map_err(io)?;
        for v in data.iter() {
            if v.is_nan() {
                writeln!(w, "nan").map_err(io)?;
            } else {
                writeln!(w, "{v:.9e}").map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)
}

/// CSV with an `element_id` column followed by the given columns.
pub fn write_cell_csv(path: &Path, columns: &[(&str, &[f64])]) -> Result<()> {
    let n = columns.first().map_or(0, |c| c.1.len());
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let names: Vec<&str> = columns.iter().map(|c| c.0).collect();
    writeln!(w, "element_id,{}", names.join(",")).map_err(io)?;
    for k in 0..n {
        write!(w, "{k}").map_err(io)?;
        for (_, c) in columns {
            write!(w, ",{:.9e}", c[k]).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Per-element dump of one cell frame.
pub fn write_cell_frame(path: &Path, frame: &CellFrame) -> Result<()> {
    write_cell_csv(
        path,
        &[
            ("u", &frame.u),
            ("ca_i", &frame.ca_i),
            ("k_o", &frame.k_o),
            ("na_i", &frame.na_i),
        ],
    )
}

/// Cell frames listed in `<dir>/index.csv` (`frame,t_ms,file`).
pub fn read_cell_frames(dir: &Path) -> Result<Vec<CellFrame>> {
    let index = dir.join("index.csv");
    let text = std::fs::read_to_string(&index).map_err(|e| Error::io(&index, e))?;
    let parse_err = |path: &Path, line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut frames = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(parse_err(&index, i + 1, "expected frame,t_ms,file".into()));
        }
        let t: f64 = cols[1]
            .trim()
            .parse()
            .map_err(|_| parse_err(&index, i + 1, format!("bad time '{}'", cols[1])))?;
        let path = dir.join(cols[2].trim());
        let body = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut f = CellFrame {
            t,
            u: Vec::new(),
            ca_i: Vec::new(),
            k_o: Vec::new(),
            na_i: Vec::new(),
        };
        for (j, row) in body.lines().enumerate().skip(1) {
            let v: Vec<f64> = row
                .split(',')
                .skip(1)
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| parse_err(&path, j + 1, e.to_string()))?;
            if v.len() != 4 {
                return Err(parse_err(&path, j + 1, "expected element_id,u,ca_i,k_o,na_i".into()));
            }
            f.u.push(v[0]);
            f.ca_i.push(v[1]);
            f.k_o.push(v[2]);
            f.na_i.push(v[3]);
        }
        frames.push(f);
    }
    Ok(frames)
}
