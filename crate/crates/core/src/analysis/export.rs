//! Legacy ASCII VTK and CSV writers, plus CSV readers for the record and
//! line schemas.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{ConvergenceRecord, LineSample};
use crate::solver::SolutionField;
use crate::{Error, Point, Result};

pub const RECORDS_HEADER: &str = "level,h,dofs,err_l2_u,err_h1_u,err_l2_q,err_l2_gradu,err_Unorm,eta";
pub const LINE_HEADER: &str = "s,x,y,u,qx,qy";
pub const FLUX_HEADER: &str = "level,h,err_l2_q,err_l2_gradu,err_l2_q_scaled,err_l2_divq";

/// VTK cell type of a bilinear quadrilateral.
const VTK_QUAD: u8 = 9;

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// 17 significant digits, enough to round-trip any `f64`.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_legacy_vtk(
    path: &Path,
    title: &str,
    points: &[Point],
    cells: &[[usize; 4]],
    point_data: &[(&str, &[f64])],
) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    let mut body = String::new();
    body.push_str("# vtk DataFile Version 3.0\n");
    body.push_str(title.lines().next().unwrap_or(""));
    body.push_str("\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    body.push_str(&format!("POINTS {} double\n", points.len()));
    w.write_all(body.as_bytes()).map_err(io)?;
    for p in points {
        writeln!(w, "{} {} 0", num(p[0]), num(p[1])).map_err(io)?;
    }
    writeln!(w, "CELLS {} {}", cells.len(), 5 * cells.len()).map_err(io)?;
    for c in cells {
        writeln!(w, "4 {} {} {} {}", c[0], c[1], c[2], c[3]).map_err(io)?;
    }
    writeln!(w, "CELL_TYPES {}", cells.len()).map_err(io)?;
    for _ in cells {
        writeln!(w, "{VTK_QUAD}").map_err(io)?;
    }
    if !point_data.is_empty() {
        writeln!(w, "POINT_DATA {}", points.len()).map_err(io)?;
        for (name, values) in point_data {
            assert_eq!(values.len(), points.len(), "point data '{name}' has wrong length");
            writeln!(w, "SCALARS {name} double 1\nLOOKUP_TABLE default").map_err(io)?;
            for v in values.iter() {
                writeln!(w, "{}", num(*v)).map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)
}

/// Writes `u`, `qx`, `qy` on the nodal lattice: one point per global scalar
/// node and `p^2` sub-quads per element.
pub fn write_solution_vtk(solution: &SolutionField, path: &Path, title: &str) -> Result<()> {
    let p = solution.degree();
    let n = p + 1;
    let dm = &solution.dofmap;
    let mut cells = Vec::with_capacity(solution.mesh.num_elements() * p * p);
    for e in 0..solution.mesh.num_elements() {
        let ids = dm.element_nodes(e);
        for b in 0..p {
            for a in 0..p {
                let k = b * n + a;
                cells.push([ids[k], ids[k + 1], ids[k + n + 1], ids[k + n]]);
            }
        }
    }
    let nn = dm.num_nodes();
    let c = &solution.coeffs;
    write_legacy_vtk(
        path,
        title,
        dm.node_coords(),
        &cells,
        &[("u", &c[..nn]), ("qx", &c[nn..2 * nn]), ("qy", &c[2 * nn..])],
    )
}

pub fn write_records_csv(path: &Path, records: &[ConvergenceRecord]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{RECORDS_HEADER}").map_err(io)?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.level,
            num(r.h),
            r.dofs,
            num(r.err_l2_u),
            num(r.err_h1_u),
            num(r.err_l2_q),
            num(r.err_l2_gradu),
            num(r.err_unorm),
            num(r.eta)
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Rows of the flux-versus-gradient comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluxComparison {
    pub level: usize,
    pub h: f64,
    pub err_l2_q: f64,
    pub err_l2_gradu: f64,
    pub err_l2_q_scaled: f64,
    pub err_l2_divq: f64,
}

pub fn write_flux_csv(path: &Path, rows: &[FluxComparison]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{FLUX_HEADER}").map_err(io)?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.level,
            num(r.h),
            num(r.err_l2_q),
            num(r.err_l2_gradu),
            num(r.err_l2_q_scaled),
            num(r.err_l2_divq)
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_line_csv(path: &Path, sample: &LineSample) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{LINE_HEADER}").map_err(io)?;
    for i in 0..sample.len() {
        let x = sample.points[i];
        writeln!(
            w,
            "{},{},{},{},{},{}",
            num(sample.s[i]),
            num(x[0]),
            num(x[1]),
            num(sample.u[i]),
            num(sample.qx[i]),
            num(sample.qy[i])
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Data rows of a CSV file after checking the header.
fn read_rows(path: &Path, header: &str) -> Result<Vec<Vec<String>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .transpose()
        .map_err(|e| Error::io(path, e))?
        .unwrap_or_default();
    if first.trim() != header {
        return Err(Error::Parse(format!("{}: unexpected header '{first}'", path.display())));
    }
    let width = header.split(',').count();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
        if cells.len() != width {
            return Err(Error::Parse(format!(
                "{}: row {} has {} fields, expected {width}",
                path.display(),
                i + 2,
                cells.len()
            )));
        }
        rows.push(cells);
    }
    Ok(rows)
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse(format!("cannot parse '{s}'")))
}

pub fn read_records_csv(path: &Path) -> Result<Vec<ConvergenceRecord>> {
    read_rows(path, RECORDS_HEADER)?
        .iter()
        .map(|c| {
            Ok(ConvergenceRecord {
                level: parse(&c[0])?,
                h: parse(&c[1])?,
                dofs: parse(&c[2])?,
                err_l2_u: parse(&c[3])?,
                err_h1_u: parse(&c[4])?,
                err_l2_q: parse(&c[5])?,
                err_l2_gradu: parse(&c[6])?,
                err_unorm: parse(&c[7])?,
                eta: parse(&c[8])?,
            })
        })
        .collect()
}

pub fn read_line_csv(path: &Path) -> Result<LineSample> {
    let mut out = LineSample::default();
    for c in read_rows(path, LINE_HEADER)? {
        out.s.push(parse(&c[0])?);
        out.points.push([parse(&c[1])?, parse(&c[2])?]);
        out.u.push(parse(&c[3])?);
        out.qx.push(parse(&c[4])?);
        out.qy.push(parse(&c[5])?);
    }
    Ok(out)
}
