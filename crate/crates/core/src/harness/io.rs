//! Series files and atomic writes.
//!
//! A series file is comma-separated with a header
//! `t, y_1 … y_Ny, u_1 … u_Nu, m_1 … m_Ny`. A missing `y` is an empty field
//! and must carry `m = 0`. Values are written in shortest round-trip form.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::fixed_point::ObservationSet;

/// Writes `contents` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(d) = dir {
        fs::create_dir_all(d)?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidConfig(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn header(ny: usize, nu: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=ny).map(|j| format!("y_{j}")));
    h.extend((1..=nu).map(|j| format!("u_{j}")));
    h.extend((1..=ny).map(|j| format!("m_{j}")));
    h
}

/// Serializes an observation set to CSV text.
pub fn series_to_csv(obs: &ObservationSet) -> Result<Vec<u8>> {
    let (ny, nu) = (obs.n_target(), obs.n_exo());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header(ny, nu))?;
    let mut rec: Vec<String> = Vec::with_capacity(1 + 2 * ny + nu);
    for t in 0..obs.len() {
        rec.clear();
        rec.push(format!("{}", t as f64 * obs.dt()));
        for j in 0..ny {
            rec.push(if obs.is_observed(t, j) {
                format!("{}", obs.y_obs()[(t, j)])
            } else {
                String::new()
            });
        }
        for j in 0..nu {
            rec.push(format!("{}", obs.u()[(t, j)]));
        }
        for j in 0..ny {
            rec.push(if obs.is_observed(t, j) { "1" } else { "0" }.to_string());
        }
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn export_series(obs: &ObservationSet, path: &Path) -> Result<()> {
    write_atomic(path, &series_to_csv(obs)?)
}

/// A fully observed trajectory written as a series file.
pub fn export_trajectory(tr: &Trajectory, path: &Path) -> Result<()> {
    let obs = ObservationSet::fully_observed(tr.y.clone(), tr.u.clone(), tr.dt)?;
    export_series(&obs, path)
}

fn parse_f64(field: &str, line: u64, what: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::MalformedRow {
        line,
        message: format!("{what}: cannot parse `{field}` as a number"),
    })
}

/// Parses CSV text produced by [`series_to_csv`] or written by hand.
pub fn series_from_csv(text: &[u8]) -> Result<ObservationSet> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text);
    let head: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let ny = head.iter().filter(|h| h.starts_with("y_")).count();
    let nu = head.iter().filter(|h| h.starts_with("u_")).count();
    if head.first().map(String::as_str) != Some("t") || head != header(ny, nu) {
        return Err(Error::MalformedRow {
            line: 1,
            message: format!("expected header `{}`", header(ny, nu).join(",")),
        });
    }
    if ny == 0 {
        return Err(Error::MalformedRow {
            line: 1,
            message: "no y columns".into(),
        });
    }
    let width = 1 + 2 * ny + nu;
    let (mut times, mut ys, mut us, mut ms) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::MalformedRow {
                line,
                message: e.to_string(),
            }
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != width {
            return Err(Error::MalformedRow {
                line,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        times.push(parse_f64(&rec[0], line, "t")?);
        for j in 0..ny {
            let field = &rec[1 + j];
            let flag = &rec[1 + ny + nu + j];
            let observed = match flag {
                "1" => true,
                "0" => false,
                other => {
                    return Err(Error::MalformedRow {
                        line,
                        message: format!("m_{}: expected 0 or 1, found `{other}`", j + 1),
                    })
                }
            };
            if observed == field.is_empty() {
                return Err(Error::MalformedRow {
                    line,
                    message: format!(
                        "y_{} is {} but m_{} = {flag}",
                        j + 1,
                        if field.is_empty() { "empty" } else { "present" },
                        j + 1
                    ),
                });
            }
            ys.push(if observed { parse_f64(field, line, "y")? } else { f64::NAN });
            ms.push(observed);
        }
        for j in 0..nu {
            us.push(parse_f64(&rec[1 + ny + j], line, "u")?);
        }
    }
    let rows = times.len();
    if rows < 2 {
        return Err(Error::MalformedRow {
            line: rows as u64 + 1,
            message: "a series needs at least two rows".into(),
        });
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return Err(Error::MalformedRow {
            line: 3,
            message: "time column must increase".into(),
        });
    }
    for (k, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt.max(1.0) {
            return Err(Error::MalformedRow {
                line: k as u64 + 3,
                message: format!("uneven sampling: step {} differs from {dt}", w[1] - w[0]),
            });
        }
    }
    let y = DMatrix::from_row_slice(rows, ny, &ys);
    let mask = DMatrix::from_row_slice(rows, ny, &ms);
    let u = DMatrix::from_row_slice(rows, nu, &us);
    ObservationSet::new(y, mask, u, dt)
}

pub fn import_series(path: &Path) -> Result<ObservationSet> {
    series_from_csv(&fs::read(path)?)
}

/// Reads a fully observed series file as a trajectory.
pub fn import_trajectory(path: &Path) -> Result<Trajectory> {
    let obs = import_series(path)?;
    if obs.mask().iter().any(|&m| !m) {
        return Err(Error::InvalidConfig(format!(
            "{} has missing entries; a trajectory must be complete",
            path.display()
        )));
    }
    Ok(Trajectory {
        y: obs.y_obs().clone(),
        u: obs.u().clone(),
        dt: obs.dt(),
    })
}

/// Writes named columns of equal length as CSV.
pub fn write_columns(path: &Path, names: &[String], columns: &[Vec<f64>]) -> Result<()> {
    let rows = columns.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(names)?;
    for t in 0..rows {
        w.write_record(columns.iter().map(|c| format!("{}", c[t])))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_lossless() {
        let y = DMatrix::from_fn(6, 2, |t, j| (t as f64 + 0.1).sqrt() * (j as f64 + std::f64::consts::PI));
        let mask = DMatrix::from_fn(6, 2, |t, j| t == 0 || (t + j) % 2 == 0);
        let u = DMatrix::from_fn(6, 1, |t, _| 1.0 / (t as f64 + 3.0));
        let obs = ObservationSet::new(y, mask, u, 0.02).unwrap();
        let back = series_from_csv(&series_to_csv(&obs).unwrap()).unwrap();
        assert_eq!(back.mask(), obs.mask());
        assert_eq!(back.u(), obs.u());
        assert_eq!(back.dt(), obs.dt());
        for t in 0..6 {
            for j in 0..2 {
                if obs.is_observed(t, j) {
                    assert_eq!(back.y_obs()[(t, j)].to_bits(), obs.y_obs()[(t, j)].to_bits());
                }
            }
        }
    }

    #[test]
    fn flag_mismatch_names_the_line() {
        let text = b"t,y_1,m_1\n0,1.0,1\n1,,1\n2,3.0,1\n";
        match series_from_csv(text) {
            Err(Error::MalformedRow { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected malformed row, got {other:?}"),
        }
    }

    #[test]
    fn hand_written_file() {
        let text = b"t,y_1,m_1\n0,0.5,1\n1,,0\n2,,0\n3,1.5,1\n4,,0\n";
        let obs = series_from_csv(text).unwrap();
        assert_eq!(obs.len(), 5);
        assert_eq!(obs.n_target(), 1);
        assert_eq!(obs.dt(), 1.0);
        assert_eq!(obs.missing_fraction(), 0.75);
    }
}
