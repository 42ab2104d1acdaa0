//! Plain-text field snapshots.
//!
//! A scalar block is a header `CLUSTERFLOW-SCALAR nx ny lx ly t` followed by
//! `ny` lines of `nx` values (row-major, `y` outer). A snapshot may append a
//! vector block, `CLUSTERFLOW-VECTOR nx ny lx ly t nxcomp nycomp`, followed
//! by the x-component (`ny` lines of `nx + 1`) and then the y-component
//! (`ny + 1` lines of `nx`). Values are written in shortest round-trip form.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::ledger::fmt_f64;

const SCALAR: &str = "CLUSTERFLOW-SCALAR";
const VECTOR: &str = "CLUSTERFLOW-VECTOR";

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub u: ScalarField,
    pub omega: Option<VectorField>,
}

pub fn snapshot_file_name(index: usize) -> String {
    format!("snap_{index:06}.txt")
}

fn write_rows(out: &mut impl Write, values: &[f64], width: usize) -> std::io::Result<()> {
    for row in values.chunks(width) {
        let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn write_snapshot(path: impl AsRef<Path>, snap: &Snapshot) -> Result<()> {
    let path = path.as_ref();
    let g = snap.u.grid();
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    let dims = format!("{} {} {} {} {}", g.nx(), g.ny(), fmt_f64(g.lx()), fmt_f64(g.ly()), fmt_f64(snap.t));
    writeln!(out, "{SCALAR} {dims}").map_err(io)?;
    write_rows(&mut out, snap.u.values(), g.nx()).map_err(io)?;
    if let Some(w) = &snap.omega {
        if !w.grid().same_as(g) {
            return Err(Error::GridMismatch);
        }
        writeln!(out, "{VECTOR} {dims} {} {}", g.xface_count(), g.yface_count()).map_err(io)?;
        write_rows(&mut out, w.x(), g.nx() + 1).map_err(io)?;
        write_rows(&mut out, w.y(), g.nx()).map_err(io)?;
    }
    out.flush().map_err(io)?;
    out.into_inner().map_err(|e| io(e.into_error()))?.sync_data().map_err(io)
}

struct Cursor<'a> {
    path: &'a Path,
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Cursor<'a> {
    fn err(&self, reason: impl Into<String>) -> Error {
        Error::format(self.path, reason)
    }

    fn header(&mut self, tag: &str, extra: usize) -> Result<Option<(Grid, f64, Vec<usize>)>> {
        let Some((n, line)) = self.lines.next() else {
            return Ok(None);
        };
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.first() != Some(&tag) || toks.len() != 6 + extra {
            return Err(self.err(format!("line {}: expected `{tag} nx ny lx ly t` header", n + 1)));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| self.err(format!("line {}: `{s}` is not a count", n + 1)));
        let num = |s: &str| s.parse::<f64>().map_err(|_| self.err(format!("line {}: `{s}` is not a number", n + 1)));
        let grid = Grid::new(num(toks[3])?, num(toks[4])?, int(toks[1])?, int(toks[2])?)
            .map_err(|e| self.err(format!("line {}: {e}", n + 1)))?;
        let counts = toks[6..].iter().map(|s| int(s)).collect::<Result<Vec<_>>>()?;
        Ok(Some((grid, num(toks[5])?, counts)))
    }

    fn block(&mut self, rows: usize, width: usize) -> Result<Vec<f64>> {
        let mut values = Vec::with_capacity(rows * width);
        for r in 0..rows {
            let Some((n, line)) = self.lines.next_if(|(_, l)| !l.starts_with("CLUSTERFLOW-")) else {
                return Err(self.err(format!("expected {rows} rows of {width} values, found {r} rows")));
            };
            let before = values.len();
            for tok in line.split_whitespace() {
                values.push(tok.parse::<f64>().map_err(|_| self.err(format!("line {}: `{tok}` is not a number", n + 1)))?);
            }
            if values.len() - before != width {
                return Err(self.err(format!(
                    "line {}: expected {width} values, found {}",
                    n + 1,
                    values.len() - before
                )));
            }
        }
        Ok(values)
    }
}

pub fn read_snapshot(path: impl AsRef<Path>) -> Result<Snapshot> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_snapshot(&text, path)
}

pub fn parse_snapshot(text: &str, path: &Path) -> Result<Snapshot> {
    let mut cur = Cursor {
        path,
        lines: text.lines().enumerate().peekable(),
    };
    let (grid, t, _) = cur.header(SCALAR, 0)?.ok_or_else(|| cur.err("empty snapshot"))?;
    let u = ScalarField::from_values(grid, cur.block(grid.ny(), grid.nx())?)?;
    let omega = match cur.header(VECTOR, 2)? {
        None => None,
        Some((vg, vt, counts)) => {
            if !vg.same_as(&grid) || vt != t {
                return Err(cur.err("vector block header disagrees with the scalar block"));
            }
            if counts != [grid.xface_count(), grid.yface_count()] {
                return Err(cur.err("vector block component counts do not match the grid"));
            }
            let x = cur.block(grid.ny(), grid.nx() + 1)?;
            let y = cur.block(grid.ny() + 1, grid.nx())?;
            Some(VectorField::from_components(grid, x, y)?)
        }
    };
    if let Some((n, _)) = cur.lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(cur.err(format!("line {}: unexpected trailing content", n + 1)));
    }
    Ok(Snapshot { t, u, omega })
}

/// Snapshot files in `dir` sorted by name.
pub fn list_snapshots(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("snap_") && n.ends_with(".txt"))
        })
        .collect();
    out.sort();
    Ok(out)
}
