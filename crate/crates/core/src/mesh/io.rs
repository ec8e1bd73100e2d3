//! Plain-text mesh files.
//!
//! ```text
//! trimesh 1                  mesh1d 1
//! vertices <n>               vertices <n>
//! <x> <y>                    <x>
//! ...                        ...
//! triangles <m>              elements <m>
//! <a> <b> <c> <fine 0|1>     <fine 0|1>
//! ```
//!
//! Lines starting with `#` are comments. Coordinates are written in shortest
//! round-trip form, so a dump followed by a load reproduces the mesh exactly.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::mesh::{Mesh1D, TriMesh};

pub fn write_tri_mesh<W: Write>(mut w: W, mesh: &TriMesh) -> Result<()> {
    writeln!(w, "trimesh 1")?;
    writeln!(w, "vertices {}", mesh.vertices.len())?;
    for v in &mesh.vertices {
        writeln!(w, "{} {}", v[0], v[1])?;
    }
    writeln!(w, "triangles {}", mesh.triangles.len())?;
    for (t, f) in mesh.triangles.iter().zip(&mesh.fine_flags) {
        writeln!(w, "{} {} {} {}", t[0], t[1], t[2], u8::from(*f))?;
    }
    Ok(())
}

pub fn write_mesh_1d<W: Write>(mut w: W, mesh: &Mesh1D) -> Result<()> {
    writeln!(w, "mesh1d 1")?;
    writeln!(w, "vertices {}", mesh.vertices.len())?;
    for v in &mesh.vertices {
        writeln!(w, "{v}")?;
    }
    writeln!(w, "elements {}", mesh.fine_flags.len())?;
    for f in &mesh.fine_flags {
        writeln!(w, "{}", u8::from(*f))?;
    }
    Ok(())
}

struct Lines<R> {
    inner: std::iter::Enumerate<std::io::Lines<R>>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn new(r: R) -> Self {
        Self {
            inner: r.lines().enumerate(),
            line: 0,
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            msg: msg.into(),
        }
    }

    fn next_fields(&mut self) -> Result<Vec<String>> {
        for (i, line) in self.inner.by_ref() {
            self.line = i + 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            return Ok(trimmed.split_whitespace().map(str::to_owned).collect());
        }
        Err(self.err("unexpected end of file"))
    }

    fn header(&mut self, keyword: &str) -> Result<usize> {
        let f = self.next_fields()?;
        if f.len() != 2 || f[0] != keyword {
            return Err(self.err(format!("expected `{keyword} <count>`")));
        }
        f[1].parse()
            .map_err(|_| self.err(format!("bad count `{}`", f[1])))
    }

    fn numbers<T: std::str::FromStr>(&mut self, n: usize) -> Result<Vec<T>> {
        let f = self.next_fields()?;
        if f.len() != n {
            return Err(self.err(format!("expected {n} fields, found {}", f.len())));
        }
        f.iter()
            .map(|s| {
                s.parse()
                    .map_err(|_| self.err(format!("cannot parse `{s}`")))
            })
            .collect()
    }

    fn flag(&mut self, v: u8) -> Result<bool> {
        match v {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(self.err(format!("flag must be 0 or 1, found {v}"))),
        }
    }
}

pub fn read_tri_mesh<R: BufRead>(r: R) -> Result<TriMesh> {
    let mut lines = Lines::new(r);
    if lines.header("trimesh")? != 1 {
        return Err(lines.err("unsupported format version"));
    }
    let nv = lines.header("vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let xy: Vec<f64> = lines.numbers(2)?;
        vertices.push([xy[0], xy[1]]);
    }
    let nt = lines.header("triangles")?;
    let mut triangles = Vec::with_capacity(nt);
    let mut flags = Vec::with_capacity(nt);
    for _ in 0..nt {
        let f: Vec<usize> = lines.numbers(4)?;
        if f[..3].iter().any(|&i| i >= nv) {
            return Err(lines.err("vertex index out of range"));
        }
        triangles.push([f[0], f[1], f[2]]);
        flags.push(lines.flag(f[3].min(2) as u8)?);
    }
    Ok(TriMesh::new(vertices, triangles, flags))
}

pub fn read_mesh_1d<R: BufRead>(r: R) -> Result<Mesh1D> {
    let mut lines = Lines::new(r);
    if lines.header("mesh1d")? != 1 {
        return Err(lines.err("unsupported format version"));
    }
    let nv = lines.header("vertices")?;
    let vertices = (0..nv)
        .map(|_| lines.numbers::<f64>(1).map(|v| v[0]))
        .collect::<Result<Vec<_>>>()?;
    let ne = lines.header("elements")?;
    let mut fine_flags = Vec::with_capacity(ne);
    for _ in 0..ne {
        let v: Vec<u8> = lines.numbers(1)?;
        fine_flags.push(lines.flag(v[0])?);
    }
    let mesh = Mesh1D {
        vertices,
        fine_flags,
    };
    mesh.validate()?;
    Ok(mesh)
}
