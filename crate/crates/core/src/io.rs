//! Text formats: CSV time series, field snapshots and run manifests.
//!
//! Every float is written with 17 significant digits (`{:.16e}`), which
//! round-trips `f64` bit for bit, so identical inputs give identical bytes.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::solver::{SeriesRow, State};

pub const SERIES_HEADER: &str = "t,mass,linf_u,linf_v,min_motility,F,E,hminus1,weighted_l2";

const SNAPSHOT_MAGIC: &str = "# ksmotility snapshot v1";

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotMeta {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub t: f64,
}

impl SnapshotMeta {
    pub fn for_field(field: &Field, t: f64) -> Self {
        let g = field.grid();
        Self {
            nx: g.nx(),
            ny: g.ny(),
            lx: g.lx(),
            ly: g.ly(),
            t,
        }
    }
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    Ok(())
}

/// Writes a header (nx, ny, lx, ly, t) followed by one line per grid row.
pub fn write_snapshot(field: &Field, t: f64, path: &Path) -> Result<()> {
    create_parent(path)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let g = field.grid();
    let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(w, "{SNAPSHOT_MAGIC}")?;
        writeln!(w, "nx {}", g.nx())?;
        writeln!(w, "ny {}", g.ny())?;
        writeln!(w, "lx {}", fmt_f64(g.lx()))?;
        writeln!(w, "ly {}", fmt_f64(g.ly()))?;
        writeln!(w, "t {}", fmt_f64(t))?;
        for row in field.values().chunks(g.nx()) {
            let line: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        w.flush()
    };
    write(&mut w).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

pub fn read_snapshot(path: &Path) -> Result<(Field, SnapshotMeta)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let mut lineno = 0usize;
    let mut next_line = |what: &str| -> Result<(usize, String)> {
        lineno += 1;
        match lines.next() {
            Some(Ok(l)) => Ok((lineno, l)),
            Some(Err(e)) => Err(Error::io(path, e)),
            None => Err(parse_err(
                path,
                lineno,
                format!("unexpected end of file, expected {what}"),
            )),
        }
    };

    let (n, magic) = next_line("snapshot header")?;
    if magic.trim() != SNAPSHOT_MAGIC {
        return Err(parse_err(path, n, "not a snapshot file"));
    }
    let mut header = |key: &str| -> Result<(usize, String)> {
        let (n, l) = next_line(key)?;
        let mut parts = l.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some(k), Some(v), None) if k == key => Ok((n, v.to_string())),
            _ => Err(parse_err(path, n, format!("expected `{key} <value>`"))),
        }
    };
    let parse_usize = |(n, s): (usize, String)| {
        s.parse::<usize>()
            .map_err(|e| parse_err(path, n, format!("bad integer {s:?}: {e}")))
    };
    let parse_f64 = |(n, s): (usize, String)| {
        s.parse::<f64>()
            .map_err(|e| parse_err(path, n, format!("bad number {s:?}: {e}")))
    };
    let nx = parse_usize(header("nx")?)?;
    let ny = parse_usize(header("ny")?)?;
    let lx = parse_f64(header("lx")?)?;
    let ly = parse_f64(header("ly")?)?;
    let t = parse_f64(header("t")?)?;
    let grid = Grid::new(nx, ny, lx, ly).map_err(|e| parse_err(path, 2, e.to_string()))?;

    let mut values = Vec::with_capacity(grid.len());
    for row in 0..ny {
        let (n, l) = next_line(&format!("row {} of {ny}", row + 1))?;
        let before = values.len();
        for tok in l.split_whitespace() {
            let x = tok
                .parse::<f64>()
                .map_err(|e| parse_err(path, n, format!("bad number {tok:?}: {e}")))?;
            values.push(x);
        }
        if values.len() - before != nx {
            return Err(parse_err(
                path,
                n,
                format!("expected {nx} values, found {}", values.len() - before),
            ));
        }
    }
    let field = Field::new(grid, values).map_err(|e| parse_err(path, 0, e.to_string()))?;
    Ok((field, SnapshotMeta { nx, ny, lx, ly, t }))
}

/// Writes `u.snap` and `v.snap` into `dir`.
pub fn write_checkpoint(state: &State, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_snapshot(&state.u, state.t, &dir.join("u.snap"))?;
    write_snapshot(&state.v, state.t, &dir.join("v.snap"))
}

pub fn read_checkpoint(dir: &Path) -> Result<State> {
    let (u, mu) = read_snapshot(&dir.join("u.snap"))?;
    let (v, mv) = read_snapshot(&dir.join("v.snap"))?;
    if u.grid() != v.grid() || mu.t != mv.t {
        return Err(Error::GridMismatch(format!(
            "checkpoint in {} has inconsistent u/v snapshots",
            dir.display()
        )));
    }
    Ok(State { u, v, t: mu.t })
}

fn series_line(row: &SeriesRow) -> String {
    [
        row.t,
        row.mass,
        row.linf_u,
        row.linf_v,
        row.min_motility,
        row.f,
        row.e,
        row.hminus1,
        row.weighted_l2,
    ]
    .iter()
    .map(|&x| fmt_f64(x))
    .collect::<Vec<_>>()
    .join(",")
}

/// Appends series rows, flushing after each so an interrupted run leaves a
/// valid prefix.
pub struct SeriesWriter<W: Write> {
    out: W,
    rows: usize,
}

impl SeriesWriter<BufWriter<File>> {
    pub fn create(path: &Path) -> Result<Self> {
        create_parent(path)?;
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        SeriesWriter::new(BufWriter::new(file)).map_err(|e| Error::io(path, e))
    }
}

impl<W: Write> SeriesWriter<W> {
    pub fn new(mut out: W) -> std::io::Result<Self> {
        writeln!(out, "{SERIES_HEADER}")?;
        out.flush()?;
        Ok(Self { out, rows: 0 })
    }

    pub fn append_series_row(&mut self, row: &SeriesRow) -> std::io::Result<()> {
        writeln!(self.out, "{}", series_line(row))?;
        self.rows += 1;
        self.out.flush()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

pub fn write_series(path: &Path, rows: &[SeriesRow]) -> Result<()> {
    let mut w = SeriesWriter::create(path)?;
    for r in rows {
        w.append_series_row(r).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Reads a series CSV back; the residual column is not stored and comes back as NaN.
pub fn read_series(path: &Path) -> Result<Vec<SeriesRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == SERIES_HEADER => {}
        _ => return Err(parse_err(path, 1, "missing series header")),
    }
    let mut rows = Vec::new();
    for (k, line) in lines {
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(path, k + 1, e.to_string()))?;
        if vals.len() != 9 {
            return Err(parse_err(path, k + 1, format!("expected 9 columns, found {}", vals.len())));
        }
        rows.push(SeriesRow {
            t: vals[0],
            mass: vals[1],
            linf_u: vals[2],
            linf_v: vals[3],
            min_motility: vals[4],
            f: vals[5],
            e: vals[6],
            hminus1: vals[7],
            weighted_l2: vals[8],
            identity_residual: f64::NAN,
        });
    }
    Ok(rows)
}

/// Writes a CSV table with a header and preformatted cells.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    create_parent(path)?;
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Reproducibility record written next to every experiment's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub experiment: String,
    pub outcome: String,
    /// Wall-clock seconds; omitted unless timing was requested so reruns stay byte-identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
    #[serde(default)]
    pub thresholds: BTreeMap<String, f64>,
    #[serde(default)]
    pub summary: BTreeMap<String, String>,
    #[serde(default)]
    pub outputs: Vec<String>,
    /// Fully resolved configuration, as TOML text.
    pub config: String,
}

impl Manifest {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot encode manifest: {e}")))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        create_parent(path)?;
        fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e
                .span()
                .map(|s| text[..s.start].matches('\n').count() + 1)
                .unwrap_or(0),
            msg: e.message().to_string(),
        })
    }
}
