//! Cube container and CSV formats.
//!
//! Container layout, little-endian:
//!
//! ```text
//! "ASRQ1"  u32 version  u32 n_keys
//!   n_keys x (u32 len, key bytes, u32 len, JSON value bytes)
//! u32 n_days
//!   n_days x (u32 day, u32 node_offset, u32 n_nodes, u32 n_q, u32 n_a,
//!             theta (f64 or f32), target u32, exercise bitset)
//! ```
//!
//! Days are written from maturity down to day 0.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{AsrError, Result};
use crate::grid::{build_grids, GridSpec};
use crate::model::AsrModel;
use crate::simulator::{CostDecomposition, DayRecord, SimulationResult};
use crate::solver::{CubeKind, CubeMeta, DaySurface, PolicyCube, SolveStats, FORMAT_VERSION};

pub const MAGIC: &[u8; 5] = b"ASRQ1";

/// Storage type of the values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    #[default]
    F64,
    /// Halves the file; values are rounded.
    F32,
}

pub fn write_cube(cube: &PolicyCube, out: &mut impl Write, precision: Precision) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_u32::<LE>(FORMAT_VERSION)?;
    let meta = &cube.meta;
    let header: Vec<(&str, String)> = vec![
        ("model", serde_json::to_string(&meta.model)?),
        ("grid", serde_json::to_string(&meta.grid)?),
        ("kind", serde_json::to_string(&meta.kind)?),
        ("intraday_noise", serde_json::to_string(&meta.intraday_noise)?),
        ("theta_precision", serde_json::to_string(&precision)?),
        ("stats", serde_json::to_string(&cube.stats)?),
    ];
    out.write_u32::<LE>(header.len() as u32)?;
    for (k, v) in &header {
        write_bytes(out, k.as_bytes())?;
        write_bytes(out, v.as_bytes())?;
    }
    let stored: Vec<&DaySurface> = cube.days.iter().rev().flatten().collect();
    out.write_u32::<LE>(stored.len() as u32)?;
    for d in stored {
        for x in [d.day, d.node_offset, d.n_nodes, d.n_q, d.n_a] {
            out.write_u32::<LE>(x as u32)?;
        }
        match precision {
            Precision::F64 => d.theta.iter().try_for_each(|&v| out.write_f64::<LE>(v))?,
            Precision::F32 => d.theta.iter().try_for_each(|&v| out.write_f32::<LE>(v as f32))?,
        }
        d.target.iter().try_for_each(|&t| out.write_u32::<LE>(t))?;
        let mut bits = vec![0u8; d.exercise.len().div_ceil(8)];
        for (i, &e) in d.exercise.iter().enumerate() {
            if e {
                bits[i / 8] |= 1 << (i % 8);
            }
        }
        out.write_all(&bits)?;
    }
    Ok(())
}

fn write_bytes(out: &mut impl Write, b: &[u8]) -> Result<()> {
    out.write_u32::<LE>(b.len() as u32)?;
    out.write_all(b)?;
    Ok(())
}

fn read_bytes(input: &mut impl Read, limit: usize) -> Result<Vec<u8>> {
    let len = input.read_u32::<LE>()? as usize;
    if len > limit {
        return Err(AsrError::Format(format!("header entry of {len} bytes is too long")));
    }
    let mut b = vec![0; len];
    input.read_exact(&mut b)?;
    Ok(b)
}

fn header_value<T: for<'de> Deserialize<'de>>(header: &BTreeMap<String, Vec<u8>>, key: &str) -> Result<T> {
    let raw = header.get(key).ok_or_else(|| AsrError::Format(format!("header lacks `{key}`")))?;
    serde_json::from_slice(raw).map_err(|e| AsrError::Format(format!("header `{key}`: {e}")))
}

pub fn read_cube(input: &mut impl Read) -> Result<PolicyCube> {
    let mut magic = [0u8; 5];
    input.read_exact(&mut magic).map_err(|_| AsrError::Format("file too short for a cube".into()))?;
    if &magic != MAGIC {
        return Err(AsrError::Format("not a policy cube (bad magic bytes)".into()));
    }
    let version = input.read_u32::<LE>()?;
    if version != FORMAT_VERSION {
        return Err(AsrError::Format(format!("unsupported cube version {version}")));
    }
    let n_keys = input.read_u32::<LE>()?;
    let mut header = BTreeMap::new();
    for _ in 0..n_keys {
        let k = String::from_utf8(read_bytes(input, 1 << 10)?)
            .map_err(|_| AsrError::Format("header key is not UTF-8".into()))?;
        let v = read_bytes(input, 1 << 24)?;
        header.insert(k, v);
    }
    let model: AsrModel = header_value(&header, "model")?;
    model.validate()?;
    let grid: GridSpec = header_value(&header, "grid")?;
    let kind: CubeKind = header_value(&header, "kind")?;
    let intraday_noise: bool = header_value(&header, "intraday_noise")?;
    let precision: Precision = header_value(&header, "theta_precision")?;
    let stats: SolveStats = header_value(&header, "stats")?;
    let grids = build_grids(&grid, &model)?;
    let days = model.contract.days;

    let n_stored = input.read_u32::<LE>()? as usize;
    if n_stored > days + 1 {
        return Err(AsrError::Format(format!("{n_stored} day blocks for a {days}-day contract")));
    }
    let mut out: Vec<Option<DaySurface>> = vec![None; days + 1];
    for _ in 0..n_stored {
        let mut h = [0usize; 5];
        for x in &mut h {
            *x = input.read_u32::<LE>()? as usize;
        }
        let [day, offset, n_nodes, n_q, n_a] = h;
        if day > days || out[day].is_some() {
            return Err(AsrError::Format(format!("unexpected block for day {day}")));
        }
        if n_q != grids.n_q() || n_a != grids.n_a() {
            return Err(AsrError::Format(format!("day {day} block does not match the grid")));
        }
        let len = n_nodes
            .checked_mul(n_q * n_a)
            .filter(|&l| l <= 1 << 32)
            .ok_or_else(|| AsrError::Format(format!("day {day} block is too large")))?;
        let mut d = DaySurface::new(day, offset, n_nodes, n_q, n_a);
        match precision {
            Precision::F64 => input.read_f64_into::<LE>(&mut d.theta)?,
            Precision::F32 => {
                let mut buf = vec![0f32; len];
                input.read_f32_into::<LE>(&mut buf)?;
                d.theta = buf.into_iter().map(f64::from).collect();
            }
        }
        input.read_u32_into::<LE>(&mut d.target)?;
        if d.target.iter().any(|&t| t as usize >= n_q) {
            return Err(AsrError::Format(format!("day {day} has a target outside the grid")));
        }
        let mut bits = vec![0u8; len.div_ceil(8)];
        input.read_exact(&mut bits)?;
        for (i, e) in d.exercise.iter_mut().enumerate() {
            *e = bits[i / 8] >> (i % 8) & 1 == 1;
        }
        out[day] = Some(d);
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(AsrError::Format("trailing bytes after the last day".into()));
    }
    let meta = CubeMeta { model, grid, kind, intraday_noise, format_version: version };
    Ok(PolicyCube { meta, grids, days: out, stats })
}

pub fn save_cube(cube: &PolicyCube, path: &Path, precision: Precision) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_cube(cube, &mut w, precision)?;
    w.flush()?;
    Ok(())
}

pub fn load_cube(path: &Path) -> Result<PolicyCube> {
    read_cube(&mut BufReader::new(File::open(path)?))
}

fn csv_err(e: csv::Error) -> AsrError {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => AsrError::Io(e),
        other => AsrError::Format(format!("{other:?}")),
    }
}

#[derive(Serialize)]
struct CubeRow {
    n: usize,
    zeta: usize,
    #[serde(rename = "S")]
    s: f64,
    q: f64,
    #[serde(rename = "A")]
    a: f64,
    theta: f64,
    v_star: f64,
    exercise: u8,
}

/// Flat export of every stored entry, one line per `(n, zeta, q, A)`.
/// `v_star` is the order in shares toward the optimal target.
pub fn export_cube_csv(cube: &PolicyCube, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let model = cube.model();
    let h = model.price_step();
    let g = &cube.grids;
    for d in cube.days.iter().flatten() {
        for zeta in d.node_offset..d.node_offset + d.n_nodes {
            let s = match (cube.meta.kind, g.s.as_ref()) {
                (CubeKind::Impact, Some(sg)) => sg.values[zeta],
                _ => model.market.s0 + h * (zeta as f64 - 2.0 * d.day as f64),
            };
            let node = d.node(zeta)?;
            for (qi, &q) in g.q.iter().enumerate() {
                for (ai, &a) in g.a.iter().enumerate() {
                    w.serialize(CubeRow {
                        n: d.day,
                        zeta,
                        s,
                        q,
                        a,
                        theta: node.theta(qi, ai),
                        v_star: g.q[node.target(qi, ai)] - q,
                        exercise: u8::from(node.exercise(qi, ai)),
                    })
                    .map_err(csv_err)?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct PathRow {
    day: usize,
    price: f64,
}

/// Closes from a `day,price` CSV; days must run 1, 2, ...
pub fn read_path_csv(input: impl Read) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["day", "price"] {
        return Err(AsrError::Format(format!("path CSV header must be `day,price`, got `{}`", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut prices = Vec::new();
    for (i, row) in r.deserialize::<PathRow>().enumerate() {
        let row = row.map_err(csv_err)?;
        if row.day != i + 1 {
            return Err(AsrError::Format(format!("path CSV row {} has day {}, expected {}", i + 1, row.day, i + 1)));
        }
        prices.push(row.price);
    }
    Ok(prices)
}

pub fn write_path_csv(prices: &[f64], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (i, &price) in prices.iter().enumerate() {
        w.serialize(PathRow { day: i + 1, price }).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ResultRow {
    day: usize,
    #[serde(rename = "S")]
    s: f64,
    #[serde(rename = "A")]
    a: f64,
    q: f64,
    order: f64,
    #[serde(rename = "X")]
    x: f64,
    exercised: u8,
}

/// Replay trajectory as `day,S,A,q,order,X,exercised`.
pub fn write_result_csv(rows: &[DayRecord], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(ResultRow {
            day: r.day,
            s: r.s,
            a: r.a,
            q: r.q,
            order: r.order,
            x: r.x,
            exercised: u8::from(r.exercised),
        })
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// JSON block accompanying a replay trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplaySummary {
    pub n_star: usize,
    pub shares_delivered: f64,
    pub total_cost: f64,
    pub decomposition: CostDecomposition,
    pub extrapolated: bool,
}

impl ReplaySummary {
    pub fn new(result: &SimulationResult, decomposition: CostDecomposition) -> Self {
        Self {
            n_star: result.n_star,
            shares_delivered: result.shares_delivered,
            total_cost: result.total_cost,
            decomposition,
            extrapolated: result.extrapolated,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::fixtures::reference_grid;
    use crate::model::fixtures::reference;
    use crate::model::{ContractSpec, ExerciseSchedule, VolumeCurve};
    use crate::solver::{solve, SolverOptions};

    fn cube() -> PolicyCube {
        let mut m = reference();
        m.contract = ContractSpec {
            notional: 9.0e7,
            days: 5,
            dt: 1.0,
            exercise: ExerciseSchedule::Window { first: 2, last: 4 },
            discount: 0.0,
        };
        m.market.volume = VolumeCurve::Constant(2.0e6);
        let spec = GridSpec { n_q: 21, n_a: 7, q_max: 2.5e6, ..reference_grid() };
        solve(&m, &spec, &SolverOptions::default()).unwrap()
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let c = cube();
        let mut buf = Vec::new();
        write_cube(&c, &mut buf, Precision::F64).unwrap();
        let back = read_cube(&mut buf.as_slice()).unwrap();
        assert_eq!(back.meta, c.meta);
        assert_eq!(back.stats, c.stats);
        for (a, b) in back.days.iter().zip(&c.days) {
            let (a, b) = (a.as_ref().unwrap(), b.as_ref().unwrap());
            assert!(a.theta.iter().zip(&b.theta).all(|(x, y)| x.to_bits() == y.to_bits()));
            assert_eq!(a.target, b.target);
            assert_eq!(a.exercise, b.exercise);
        }
        let mut again = Vec::new();
        write_cube(&back, &mut again, Precision::F64).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn single_precision_rounds_values() {
        let c = cube();
        let mut buf = Vec::new();
        write_cube(&c, &mut buf, Precision::F32).unwrap();
        let back = read_cube(&mut buf.as_slice()).unwrap();
        let (a, b) = (back.day(3).unwrap(), c.day(3).unwrap());
        for (x, y) in a.theta.iter().zip(&b.theta) {
            assert_eq!(*x, *y as f32 as f64);
        }
    }

    #[test]
    fn damaged_files_are_rejected() {
        let c = cube();
        let mut buf = Vec::new();
        write_cube(&c, &mut buf, Precision::F64).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_cube(&mut bad.as_slice()), Err(AsrError::Format(_))));
        let short = &buf[..buf.len() - 3];
        assert!(read_cube(&mut &short[..]).is_err());
        let mut long = buf.clone();
        long.push(0);
        assert!(matches!(read_cube(&mut long.as_slice()), Err(AsrError::Format(_))));
        assert!(read_cube(&mut &b"ASR"[..]).is_err());
    }

    #[test]
    fn cube_csv_has_one_line_per_entry() {
        let c = cube();
        let mut out = Vec::new();
        export_cube_csv(&c, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "n,zeta,S,q,A,theta,v_star,exercise");
        let entries: usize = c.days.iter().flatten().map(|d| d.theta.len()).sum();
        assert_eq!(lines.count(), entries);
    }

    #[test]
    fn path_csv_round_trip() {
        let prices = vec![45.0, 45.6, 44.4];
        let mut out = Vec::new();
        write_path_csv(&prices, &mut out).unwrap();
        assert!(out.starts_with(b"day,price\n1,45.0\n"));
        assert_eq!(read_path_csv(out.as_slice()).unwrap(), prices);
        assert!(read_path_csv(&b"day,px\n1,45\n"[..]).is_err());
        assert!(read_path_csv(&b"day,price\n2,45\n"[..]).is_err());
        assert!(read_path_csv(&b"day,price\n1,abc\n"[..]).is_err());
    }
}
