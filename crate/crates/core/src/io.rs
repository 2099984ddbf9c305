//! CSV import and export.
//!
//! All files are UTF-8, comma separated, LF line endings, with one header row. Floats are
//! written as `{:.16e}` (17 significant digits, `.` decimal separator), which reimports
//! bit-exactly. Integer columns are written in decimal.
//!
//! | kind              | header                                   |
//! |-------------------|------------------------------------------|
//! | field             | `x0,…,x{n-1},comp,re,im`                 |
//! | trajectory        | `t,x0,…,x{n-1},comp,re,im`               |
//! | projection field  | `x0,…,x{n-1},row,col,re,im`              |
//! | global operator   | `row,col,re,im` (nonzero entries only)   |
//!
//! Rows are emitted in storage order: cells row-major with the last axis fastest, then
//! fiber component (or row, then column). Readers accept any row order; entries missing
//! from a projection-field or operator file are zero.

use crate::error::{Error, Result};
use crate::fiber::{FiberOperator, Projection, ALGEBRAIC_TOL, C64};
use crate::grid::{Field, GridSpec, ProjectionField, Trajectory};
use crate::locality::{check_size, GlobalOperator};
use nalgebra::DMatrix;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn coord_header(n: usize) -> String {
    (0..n)
        .map(|k| format!("x{k}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn coord_cols(grid: &GridSpec, x: usize) -> String {
    grid.coords(x)
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

pub fn write_field_csv<W: Write>(mut w: W, f: &Field) -> Result<()> {
    let grid = f.grid();
    writeln!(w, "{},comp,re,im", coord_header(grid.dims()))?;
    write_field_rows(&mut w, f, None)
}

fn write_field_rows<W: Write>(w: &mut W, f: &Field, t: Option<f64>) -> Result<()> {
    let grid = f.grid();
    for x in 0..grid.cells() {
        let coords = coord_cols(grid, x);
        for (c, z) in f.cell(x).iter().enumerate() {
            if let Some(t) = t {
                write!(w, "{},", num(t))?;
            }
            writeln!(w, "{coords},{c},{},{}", num(z.re), num(z.im))?;
        }
    }
    Ok(())
}

pub fn write_trajectory_csv<W: Write>(mut w: W, traj: &Trajectory) -> Result<()> {
    let Some(first) = traj.states().first() else {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    };
    writeln!(w, "t,{},comp,re,im", coord_header(first.grid().dims()))?;
    for (t, f) in traj.times().iter().zip(traj.states()) {
        write_field_rows(&mut w, f, Some(*t))?;
    }
    Ok(())
}

pub fn write_projection_field_csv<W: Write>(mut w: W, p: &ProjectionField) -> Result<()> {
    let grid = p.grid();
    let d = p.fiber_dim();
    writeln!(w, "{},row,col,re,im", coord_header(grid.dims()))?;
    for x in 0..grid.cells() {
        let coords = coord_cols(grid, x);
        let m = p.at(x).matrix();
        for r in 0..d {
            for c in 0..d {
                let z = m[(r, c)];
                writeln!(w, "{coords},{r},{c},{},{}", num(z.re), num(z.im))?;
            }
        }
    }
    Ok(())
}

pub fn write_operator_csv<W: Write>(mut w: W, g: &GlobalOperator) -> Result<()> {
    writeln!(w, "row,col,re,im")?;
    let m = g.matrix();
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let z = m[(r, c)];
            if z.re != 0.0 || z.im != 0.0 {
                writeln!(w, "{r},{c},{},{}", num(z.re), num(z.im))?;
            }
        }
    }
    Ok(())
}

/// Rows of a CSV body with their 1-based line numbers, after checking the header.
fn rows<R: BufRead>(r: R, header: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let mut lines = r.lines();
    let first = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::Parse("empty file".into()))?;
    if first.trim_end_matches('\r') != header {
        return Err(Error::Parse(format!(
            "line 1: expected header {header:?}, found {first:?}"
        )));
    }
    let width = header.split(',').count();
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let cols: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if cols.len() != width {
            return Err(Error::Parse(format!(
                "line {}: expected {width} columns, found {}",
                i + 2,
                cols.len()
            )));
        }
        out.push((i + 2, cols));
    }
    Ok(out)
}

fn parse_usize(s: &str, line: usize, what: &str, bound: usize) -> Result<usize> {
    let v: usize = s
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad {what} {s:?}")))?;
    if v >= bound {
        return Err(Error::Parse(format!(
            "line {line}: {what} {v} out of range 0..{bound}"
        )));
    }
    Ok(v)
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad number {s:?}")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("line {line}: non-finite value")));
    }
    Ok(v)
}

fn parse_cell(grid: &GridSpec, cols: &[String], line: usize) -> Result<usize> {
    let coords = cols
        .iter()
        .zip(grid.sizes())
        .enumerate()
        .map(|(k, (s, &n))| parse_usize(s, line, &format!("x{k}"), n))
        .collect::<Result<Vec<_>>>()?;
    Ok(grid.index(&coords))
}

pub fn read_field_csv<R: BufRead>(r: R, grid: &GridSpec, d: usize) -> Result<Field> {
    let n = grid.dims();
    let header = format!("{},comp,re,im", coord_header(n));
    let mut values = vec![C64::new(0.0, 0.0); grid.cells() * d];
    let mut seen = vec![false; values.len()];
    for (line, cols) in rows(r, &header)? {
        let x = parse_cell(grid, &cols[..n], line)?;
        let c = parse_usize(&cols[n], line, "comp", d)?;
        let z = C64::new(
            parse_f64(&cols[n + 1], line)?,
            parse_f64(&cols[n + 2], line)?,
        );
        values[x * d + c] = z;
        seen[x * d + c] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Parse(format!(
            "missing value for cell {} component {}",
            missing / d,
            missing % d
        )));
    }
    Field::from_values(grid, d, values)
}

pub fn read_trajectory_csv<R: BufRead>(r: R, grid: &GridSpec, d: usize) -> Result<Trajectory> {
    let n = grid.dims();
    let header = format!("t,{},comp,re,im", coord_header(n));
    let mut times: Vec<f64> = Vec::new();
    let mut states: Vec<Vec<C64>> = Vec::new();
    for (line, cols) in rows(r, &header)? {
        let t = parse_f64(&cols[0], line)?;
        if times.last() != Some(&t) {
            times.push(t);
            states.push(vec![C64::new(0.0, 0.0); grid.cells() * d]);
        }
        let x = parse_cell(grid, &cols[1..=n], line)?;
        let c = parse_usize(&cols[n + 1], line, "comp", d)?;
        let z = C64::new(
            parse_f64(&cols[n + 2], line)?,
            parse_f64(&cols[n + 3], line)?,
        );
        states.last_mut().expect("pushed above")[x * d + c] = z;
    }
    let states = states
        .into_iter()
        .map(|v| Field::from_values(grid, d, v))
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(times, states)
}

/// Reads a projection field; every cell block must pass the projection invariants.
pub fn read_projection_field_csv<R: BufRead>(
    r: R,
    grid: &GridSpec,
    d: usize,
) -> Result<ProjectionField> {
    let n = grid.dims();
    let header = format!("{},row,col,re,im", coord_header(n));
    let mut blocks = vec![DMatrix::<C64>::zeros(d, d); grid.cells()];
    for (line, cols) in rows(r, &header)? {
        let x = parse_cell(grid, &cols[..n], line)?;
        let row = parse_usize(&cols[n], line, "row", d)?;
        let col = parse_usize(&cols[n + 1], line, "col", d)?;
        blocks[x][(row, col)] = C64::new(
            parse_f64(&cols[n + 2], line)?,
            parse_f64(&cols[n + 3], line)?,
        );
    }
    let values = blocks
        .into_iter()
        .enumerate()
        .map(|(x, m)| {
            Projection::new(FiberOperator(m), ALGEBRAIC_TOL)
                .map_err(|e| Error::Parse(format!("cell {x}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    ProjectionField::new(grid, values)
}

pub fn read_operator_csv<R: BufRead>(r: R, grid: &GridSpec, d: usize) -> Result<GlobalOperator> {
    check_size(grid, d)?;
    let size = grid.cells() * d;
    let mut m = DMatrix::<C64>::zeros(size, size);
    for (line, cols) in rows(r, "row,col,re,im")? {
        let row = parse_usize(&cols[0], line, "row", size)?;
        let col = parse_usize(&cols[1], line, "col", size)?;
        m[(row, col)] = C64::new(parse_f64(&cols[2], line)?, parse_f64(&cols[3], line)?);
    }
    GlobalOperator::new(grid, d, m)
}

pub fn load_projection_field(path: &Path, grid: &GridSpec, d: usize) -> Result<ProjectionField> {
    read_projection_field_csv(BufReader::new(File::open(path)?), grid, d)
}

/// Creates `path` and hands a buffered writer to `write`.
pub fn write_file(
    path: &Path,
    write: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write(&mut w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use crate::rng::Ensemble;

    #[test]
    fn field_round_trip_is_bit_exact() {
        let g = GridSpec::unit_torus(vec![3, 4]).unwrap();
        let f = Field::random(&g, 2, &mut Ensemble::new(5));
        let mut buf = Vec::new();
        write_field_csv(&mut buf, &f).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x0,x1,comp,re,im\n0,0,0,"));
        let back = read_field_csv(&buf[..], &g, 2).unwrap();
        assert_eq!(back.values(), f.values());
    }

    #[test]
    fn number_format() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(-2.0), "-2.0000000000000000e0");
        assert_eq!("1.0000000000000001e-1".parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn trajectory_round_trip() {
        let g = GridSpec::unit_torus(vec![4]).unwrap();
        let mut e = Ensemble::new(1);
        let states = vec![Field::random(&g, 2, &mut e), Field::random(&g, 2, &mut e)];
        let traj = Trajectory::new(vec![0.0, 0.5], states).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &traj).unwrap();
        let back = read_trajectory_csv(&buf[..], &g, 2).unwrap();
        assert_eq!(back.times(), traj.times());
        assert_eq!(back.states(), traj.states());
    }

    #[test]
    fn projection_field_and_operator_round_trip() {
        let g = GridSpec::unit_torus(vec![6]).unwrap();
        let p = presets::random_smooth(&g, 3, &mut Ensemble::new(2)).unwrap();
        let mut buf = Vec::new();
        write_projection_field_csv(&mut buf, &p).unwrap();
        assert_eq!(read_projection_field_csv(&buf[..], &g, 3).unwrap(), p);

        let op = GlobalOperator::even_part(&g, 2).unwrap();
        let mut buf = Vec::new();
        write_operator_csv(&mut buf, &op).unwrap();
        assert_eq!(read_operator_csv(&buf[..], &g, 2).unwrap(), op);
    }

    #[test]
    fn malformed_input_reports_line() {
        let g = GridSpec::unit_torus(vec![2]).unwrap();
        let bad = "x0,comp,re,im\n0,0,1.0,0.0\n1,0,oops,0\n";
        let err = read_field_csv(bad.as_bytes(), &g, 1)
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 3"), "{err}");
        let short = "x0,comp,re,im\n0,0,1.0,0.0\n";
        assert!(read_field_csv(short.as_bytes(), &g, 1).is_err());
        let wrong_header = "x,comp,re,im\n";
        assert!(read_field_csv(wrong_header.as_bytes(), &g, 1).is_err());
        let not_projection = "x0,row,col,re,im\n0,0,0,2.0,0.0\n";
        assert!(read_projection_field_csv(not_projection.as_bytes(), &g, 1).is_err());
    }
}
