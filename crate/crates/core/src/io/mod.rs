//! File formats: mesh JSON, sparse matrix coordinate text, report JSON and
//! CSV, legacy VTK and gnuplot data.
//!
//! Every writer is a pure function of its input. Text formats print reals
//! with 17 significant digits (`{:.16e}`); JSON uses the shortest decimal
//! that parses back to the same double.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::benchmarks::{ConvergenceStudy, PollutionReport};
use crate::enclosure::{EnclosureReport, SweepRow};
use crate::error::Error;
use crate::fespace::FeSpace;
use crate::mesh::{Mesh, Point};
use crate::sparse::SymCsr;

/// Writes `contents` to `path`, creating parent directories.
pub fn write_text(path: impl AsRef<Path>, contents: &str) -> Result<(), Error> {
    let path = path.as_ref();
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(path, contents).map_err(io)
}

pub fn read_text(path: impl AsRef<Path>) -> Result<String, Error> {
    let path = path.as_ref();
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<(), Error> {
    write_text(path, &to_json(value))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T, Error> {
    let path = path.as_ref();
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Serialize, Deserialize)]
struct MeshBoundaryJson {
    v: [usize; 2],
    tag: u32,
}

#[derive(Serialize, Deserialize)]
struct MeshJson {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<MeshBoundaryJson>,
    region_tags: Vec<u32>,
    crack_pairs: Vec<[usize; 2]>,
}

pub fn mesh_to_json(mesh: &Mesh) -> String {
    let m = MeshJson {
        vertices: mesh.vertices().to_vec(),
        triangles: mesh.triangles().to_vec(),
        boundary_edges: mesh
            .boundary_edges()
            .iter()
            .map(|e| MeshBoundaryJson { v: e.v, tag: e.tag })
            .collect(),
        region_tags: mesh.region_tags().to_vec(),
        crack_pairs: mesh.crack_pairs().to_vec(),
    };
    to_json(&m)
}

/// Parses a mesh written by [`mesh_to_json`]. Tangents and `h_max` are
/// recomputed; the mesh is not validated.
pub fn mesh_from_json(text: &str) -> Result<Mesh, serde_json::Error> {
    let m: MeshJson = serde_json::from_str(text)?;
    Ok(Mesh::from_parts(
        m.vertices,
        m.triangles,
        m.boundary_edges.into_iter().map(|e| (e.v, e.tag)).collect(),
        m.region_tags,
        m.crack_pairs,
    ))
}

pub fn write_mesh_json(path: impl AsRef<Path>, mesh: &Mesh) -> Result<(), Error> {
    write_text(path, &mesh_to_json(mesh))
}

pub fn read_mesh_json(path: impl AsRef<Path>) -> Result<Mesh, Error> {
    let path = path.as_ref();
    mesh_from_json(&read_text(path)?).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Upper triangle of a symmetric matrix, one `i j value` line per stored
/// entry, 0-based, sorted by row then column.
pub fn coo_string(m: &SymCsr) -> String {
    let mut s = String::new();
    for (i, j, v) in m.upper_triplets() {
        let _ = writeln!(s, "{i} {j} {v:.16e}");
    }
    s
}

pub fn write_coo(path: impl AsRef<Path>, m: &SymCsr) -> Result<(), Error> {
    write_text(path, &coo_string(m))
}

pub fn report_csv(report: &EnclosureReport) -> String {
    let mut s = String::from("j,lower,upper,width,converged\n");
    for e in &report.enclosures {
        let _ = writeln!(
            s,
            "{},{:.16e},{:.16e},{:.16e},{}",
            e.j, e.lower, e.upper, e.width, e.converged
        );
    }
    s
}

/// Writes `<stem>.json` and `<stem>.csv`; returns both paths.
pub fn write_report(
    stem: impl AsRef<Path>,
    report: &EnclosureReport,
) -> Result<(PathBuf, PathBuf), Error> {
    let stem = stem.as_ref();
    let json = stem.with_extension("json");
    let csv = stem.with_extension("csv");
    write_json(&json, report)?;
    write_text(&csv, &report_csv(report))?;
    Ok((json, csv))
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("t,l,rho,note\n");
    for r in rows {
        let l = r.l.map(|l| l.to_string()).unwrap_or_default();
        let rho = r.rho.map(|v| format!("{v:.16e}")).unwrap_or_default();
        let note = r.note.as_deref().unwrap_or("").replace(['"', ','], " ");
        let _ = writeln!(s, "{:.16e},{l},{rho},{note}", r.t);
    }
    s
}

/// One row per level: `level,h,n_dofs,width_1,...`; missing widths are
/// left empty.
pub fn convergence_csv(study: &ConvergenceStudy) -> String {
    let k = study.slopes.len();
    let mut s = String::from("level,h,n_dofs");
    for j in 1..=k {
        let _ = write!(s, ",width_{j}");
    }
    s.push('\n');
    for row in &study.rows {
        let _ = write!(s, "{},{:.16e},{}", row.level, row.h, row.n_dofs);
        for j in 0..k {
            match row.widths.get(j) {
                Some(w) => {
                    let _ = write!(s, ",{w:.16e}");
                }
                None => s.push(','),
            }
        }
        s.push('\n');
    }
    s
}

/// Whitespace-separated columns `h width_1 ... width_k` for a log-log plot;
/// missing widths are written as `NaN`, which gnuplot skips.
pub fn convergence_gnuplot(study: &ConvergenceStudy) -> String {
    let k = study.slopes.len();
    let mut s = String::from("# h");
    for j in 1..=k {
        let _ = write!(s, " width_{j}");
    }
    s.push('\n');
    for row in &study.rows {
        let _ = write!(s, "{:.16e}", row.h);
        for j in 0..k {
            match row.widths.get(j) {
                Some(w) => {
                    let _ = write!(s, " {w:.16e}");
                }
                None => s.push_str(" NaN"),
            }
        }
        s.push('\n');
    }
    s
}

pub fn pollution_csv(report: &PollutionReport) -> String {
    let mut s = String::from("value,enclosure,spurious\n");
    for v in &report.naive {
        let j = match v.placement {
            crate::benchmarks::Placement::Inside(j) => j.to_string(),
            crate::benchmarks::Placement::Outside => String::new(),
        };
        let _ = writeln!(s, "{:.16e},{j},{}", v.value, v.spurious);
    }
    s
}

/// Triangles with point data, in the legacy VTK ASCII format.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VtkUnstructuredGrid {
    pub title: String,
    pub points: Vec<Point>,
    pub cells: Vec<[usize; 3]>,
    pub scalars: Vec<(String, Vec<f64>)>,
    pub vectors: Vec<(String, Vec<[f64; 2]>)>,
}

impl VtkUnstructuredGrid {
    pub fn validate(&self) -> Result<(), Error> {
        let n = self.points.len();
        if let Some(c) = self.cells.iter().find(|c| c.iter().any(|&i| i >= n)) {
            return Err(Error::Invalid(format!(
                "cell {c:?} references a point beyond {n}"
            )));
        }
        let bad_len = self
            .scalars
            .iter()
            .map(|(name, v)| (name, v.len()))
            .chain(self.vectors.iter().map(|(name, v)| (name, v.len())))
            .find(|(_, len)| *len != n);
        if let Some((name, len)) = bad_len {
            return Err(Error::Invalid(format!(
                "array {name} has {len} values for {n} points"
            )));
        }
        let names = self
            .scalars
            .iter()
            .map(|a| &a.0)
            .chain(self.vectors.iter().map(|a| &a.0));
        if let Some(name) = names
            .into_iter()
            .find(|s| s.is_empty() || s.contains(char::is_whitespace))
        {
            return Err(Error::Invalid(format!(
                "array name {name:?} must be a single nonempty word"
            )));
        }
        Ok(())
    }

    pub fn to_vtk_string(&self) -> Result<String, Error> {
        self.validate()?;
        let mut s = String::from("# vtk DataFile Version 3.0\n");
        let title = if self.title.is_empty() {
            "enclosure-fem"
        } else {
            self.title.lines().next().unwrap_or("")
        };
        let _ = writeln!(s, "{title}");
        s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
        let _ = writeln!(s, "POINTS {} double", self.points.len());
        for p in &self.points {
            let _ = writeln!(s, "{:.16e} {:.16e} 0", p[0], p[1]);
        }
        let m = self.cells.len();
        let _ = writeln!(s, "CELLS {m} {}", 4 * m);
        for c in &self.cells {
            let _ = writeln!(s, "3 {} {} {}", c[0], c[1], c[2]);
        }
        let _ = writeln!(s, "CELL_TYPES {m}");
        for _ in 0..m {
            s.push_str("5\n");
        }
        if !self.scalars.is_empty() || !self.vectors.is_empty() {
            let _ = writeln!(s, "POINT_DATA {}", self.points.len());
            for (name, v) in &self.scalars {
                let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
                for x in v {
                    let _ = writeln!(s, "{x:.16e}");
                }
            }
            for (name, v) in &self.vectors {
                let _ = writeln!(s, "VECTORS {name} double");
                for x in v {
                    let _ = writeln!(s, "{:.16e} {:.16e} 0", x[0], x[1]);
                }
            }
        }
        Ok(s)
    }
}

pub fn write_vtk(path: impl AsRef<Path>, grid: &VtkUnstructuredGrid) -> Result<(), Error> {
    write_text(path, &grid.to_vtk_string()?)
}

/// Field `x` on the Lagrange nodes of `space`, drawn on the P1 subdivision
/// of each element. `E_norm` and `H` are scaled to maximum absolute value 1
/// and `E` shares the scaling of `E_norm`.
pub fn field_grid(space: &FeSpace, x: &[f64], title: &str) -> VtkUnstructuredGrid {
    let vals = space.node_values(x);
    let e_norm: Vec<f64> = vals.iter().map(|v| v[0].hypot(v[1])).collect();
    let e_max = e_norm.iter().fold(0.0_f64, |m, v| m.max(*v));
    let h_max = vals.iter().fold(0.0_f64, |m, v| m.max(v[2].abs()));
    let se = if e_max > 0.0 { 1.0 / e_max } else { 1.0 };
    let sh = if h_max > 0.0 { 1.0 / h_max } else { 1.0 };
    VtkUnstructuredGrid {
        title: title.to_string(),
        points: space.nodes().to_vec(),
        cells: space.p1_triangles(),
        scalars: vec![
            ("E_norm".into(), e_norm.iter().map(|v| v * se).collect()),
            ("H".into(), vals.iter().map(|v| v[2] * sh).collect()),
        ],
        vectors: vec![(
            "E".into(),
            vals.iter().map(|v| [v[0] * se, v[1] * se]).collect(),
        )],
    }
}
