//! Report, CSV and OBJ serialization.

use std::io::{self, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Result, ShellError};
use crate::geometry::Vec3;
use crate::grid::ParamGrid;

/// Version stamped into every JSON document written by this module.
pub const SCHEMA_VERSION: u32 = 1;

/// Pretty JSON with every float written as `d.dddddddddddddddde±x` (17
/// significant digits), so equal values always print identically and parse
/// back bit for bit.
struct FixedFloats(PrettyFormatter<'static>);

impl Formatter for FixedFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{v:.16e}")
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloats(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Parse a document written by [`to_json`], rejecting other schema versions.
pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    match value.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == SCHEMA_VERSION as u64 => Ok(serde_json::from_value(value)?),
        other => Err(ShellError::validation("schema_version", format!("expected {SCHEMA_VERSION}, found {other:?}"))),
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

fn csv_err(e: csv::Error) -> ShellError {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => ShellError::Io(e),
        other => ShellError::Io(io::Error::new(io::ErrorKind::InvalidData, format!("{other:?}"))),
    }
}

/// Quad mesh of the grid: one `v` record per node in index order, one `f`
/// record per cell, including the wrap-around cells of periodic directions.
pub fn obj_string(grid: &ParamGrid, psi: &[Vec3]) -> Result<String> {
    grid.check_len(psi.len())?;
    let mut s = String::with_capacity(psi.len() * 72);
    for p in psi {
        s.push_str(&format!("v {:.16e} {:.16e} {:.16e}\n", p[0], p[1], p[2]));
    }
    let ci = if grid.periodic1 { grid.nx } else { grid.nx - 1 };
    let cj = if grid.periodic2 { grid.ny } else { grid.ny - 1 };
    for j in 0..cj {
        for i in 0..ci {
            let (i1, j1) = ((i + 1) % grid.nx, (j + 1) % grid.ny);
            let q = [grid.index(i, j), grid.index(i1, j), grid.index(i1, j1), grid.index(i, j1)];
            s.push_str(&format!("f {} {} {} {}\n", q[0] + 1, q[1] + 1, q[2] + 1, q[3] + 1));
        }
    }
    Ok(s)
}

/// Vertex positions of an OBJ document; other record types are skipped.
pub fn parse_obj_vertices(text: &str) -> Result<Vec<Vec3>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        if it.next() != Some("v") {
            continue;
        }
        let vals: Vec<f64> = it
            .take(3)
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| ShellError::Parse { line: k + 1, column: 1, message: format!("bad vertex: {e}") })?;
        if vals.len() != 3 {
            return Err(ShellError::Parse { line: k + 1, column: 1, message: "vertex needs three coordinates".into() });
        }
        out.push([vals[0], vals[1], vals[2]]);
    }
    Ok(out)
}
