//! Diagnostics CSV and text snapshots.
//!
//! Floats are written as `{:.16e}`, seventeen significant digits, which
//! is enough for every `f64` to read back to the same bits.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::functionals::DiagnosticsRow;
use crate::grid::{Grid, ScalarField};
use crate::solver::{DiagnosticsSink, State};

pub const CSV_HEADER: &str = "t,mass,min_u,max_u,entropy,E,F,residual,ckp_lower,ckp_upper,l1_u,linf_u,linf_v,linf_w,phi_star_v,phi_star_w,E_legacy";

/// Seventeen significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv_line(r: &DiagnosticsRow) -> String {
    let cols = [
        r.t,
        r.mass,
        r.min_u,
        r.max_u,
        r.entropy,
        r.e,
        r.f,
        r.residual,
        r.ckp_lower,
        r.ckp_upper,
        r.l1_u,
        r.linf_u,
        r.linf_v,
        r.linf_w,
        r.phi_star_v,
        r.phi_star_w,
    ];
    let mut line = cols.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(",");
    line.push(',');
    if let Some(e) = r.e_legacy {
        line.push_str(&fmt_f64(e));
    }
    line
}

pub fn write_diagnostics<W: Write>(mut out: W, rows: &[DiagnosticsRow]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", csv_line(r))?;
    }
    out.flush()
}

/// Streams rows to a CSV file as they are produced.
pub struct CsvSink {
    path: PathBuf,
    out: BufWriter<File>,
    rows: usize,
}

impl CsvSink {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{CSV_HEADER}").map_err(|e| Error::io(&path, e))?;
        Ok(CsvSink { path, out, rows: 0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

impl DiagnosticsSink for CsvSink {
    fn record(&mut self, row: &DiagnosticsRow, _state: &State) -> Result<()> {
        self.rows += 1;
        writeln!(self.out, "{}", csv_line(row)).map_err(|e| Error::io(&self.path, e))
    }
}

/// Column `name` of a diagnostics CSV; empty cells read as NaN.
pub fn read_csv_column(path: impl AsRef<Path>, name: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = match lines.next() {
        Some(h) => h.map_err(|e| Error::io(path, e))?,
        None => return Err(Error::Format(format!("{}: empty file", path.display()))),
    };
    let names: Vec<&str> = header.trim().split(',').collect();
    let col = names
        .iter()
        .position(|n| *n == name)
        .ok_or_else(|| Error::Format(format!("{}: no column '{name}'", path.display())))?;
    let t_col = names
        .iter()
        .position(|n| *n == "t")
        .ok_or_else(|| Error::Format(format!("{}: no column 't'", path.display())))?;
    let (mut ts, mut vs) = (Vec::new(), Vec::new());
    for (k, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.trim().split(',').collect();
        let cell = |c: usize| -> Result<f64> {
            let s = cells.get(c).copied().unwrap_or("");
            if s.is_empty() {
                return Ok(f64::NAN);
            }
            s.parse()
                .map_err(|_| Error::Format(format!("{}: line {}: bad number '{s}'", path.display(), k + 2)))
        };
        ts.push(cell(t_col)?);
        vs.push(cell(col)?);
    }
    Ok((ts, vs))
}

pub fn write_snapshot<W: Write>(mut out: W, s: &State) -> std::io::Result<()> {
    let g = s.grid();
    writeln!(
        out,
        "ARKS1 {} {} {} {} {}",
        g.nx(),
        g.ny(),
        fmt_f64(g.lx()),
        fmt_f64(g.ly()),
        fmt_f64(s.t)
    )?;
    for k in 0..g.len() {
        writeln!(
            out,
            "{} {} {}",
            fmt_f64(s.u.values()[k]),
            fmt_f64(s.v.values()[k]),
            fmt_f64(s.w.values()[k])
        )?;
    }
    out.flush()
}

pub fn save_snapshot(path: impl AsRef<Path>, s: &State) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_snapshot(BufWriter::new(file), s).map_err(|e| Error::io(path, e))
}

pub fn read_snapshot<R: BufRead>(input: R) -> Result<State> {
    let bad = |msg: String| Error::Format(msg);
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| bad("empty snapshot".into()))?
        .map_err(|e| bad(e.to_string()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 6 || parts[0] != "ARKS1" {
        return Err(bad(format!("bad snapshot header '{header}'")));
    }
    let int = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("bad size '{s}'")));
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number '{s}'")));
    let grid = Grid::new(int(parts[1])?, int(parts[2])?, num(parts[3])?, num(parts[4])?)?;
    let t = num(parts[5])?;
    let n = grid.len();
    let (mut u, mut v, mut w) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for (k, line) in lines.enumerate() {
        let line = line.map_err(|e| bad(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<&str> = line.split_whitespace().collect();
        if vals.len() != 3 {
            return Err(bad(format!("line {}: expected 3 values", k + 2)));
        }
        u.push(num(vals[0])?);
        v.push(num(vals[1])?);
        w.push(num(vals[2])?);
    }
    if u.len() != n {
        return Err(bad(format!("expected {n} cells, found {}", u.len())));
    }
    Ok(State {
        u: ScalarField::from_values(grid, u)?,
        v: ScalarField::from_values(grid, v)?,
        w: ScalarField::from_values(grid, w)?,
        t,
    })
}

pub fn load_snapshot(path: impl AsRef<Path>) -> Result<State> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_snapshot(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{make_init, RunConfig};
    use crate::functionals::Recorder;
    use crate::model::Params;

    #[test]
    fn empty_trajectory_is_header_only() {
        let mut buf = Vec::new();
        write_diagnostics(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        for x in [0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn steady_row_has_zero_functionals() {
        let g = Grid::square(8, 1.0).unwrap();
        let p = Params::default();
        let s = State::steady(g, &p, 1.0);
        let row = Recorder::new(p, (1.0, 1.0, p.gamma / p.delta))
            .record(&s, 0.0, 0.0)
            .unwrap();
        assert!(row.e.abs() <= 1e-12 && row.f.abs() <= 1e-12);
        let line = csv_line(&row);
        assert_eq!(line.split(',').count(), CSV_HEADER.split(',').count());
    }

    #[test]
    fn snapshot_round_trip() {
        let cfg = RunConfig::parse("init.kind = random\ngrid.nx = 6\ngrid.ny = 5\ngrid.Lx = 1.5").unwrap();
        let mut s = make_init(&cfg).unwrap();
        s.t = 0.7;
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &s).unwrap();
        let back = read_snapshot(&buf[..]).unwrap();
        assert_eq!(back, s);
        assert!(read_snapshot(&b"ARKS2 4 4 1 1 0\n"[..]).is_err());
    }
}
