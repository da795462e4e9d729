//! Instance file formats.
//!
//! * ORLib ("standard"): a header `n m`, then one line per job with
//!   `machine duration` pairs, machines 0-based.
//! * Taillard: a header `n m`, an `n x m` duration matrix, then an `n x m`
//!   matrix of 1-based machine ids.
//!
//! Blank lines and lines starting with `#` are ignored in both.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::instance::{Instance, Time};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    OrLib,
    Taillard,
    Auto,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "orlib" | "standard" => Ok(Format::OrLib),
            "taillard" => Ok(Format::Taillard),
            "auto" => Ok(Format::Auto),
            other => Err(Error::Config(format!("unknown instance format '{other}'"))),
        }
    }
}

struct Row {
    line: usize,
    values: Vec<i64>,
}

fn rows(text: &str) -> Result<Vec<Row>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let values = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<i64>().map_err(|_| Error::Parse {
                    line: idx + 1,
                    msg: format!("expected an integer, found '{tok}'"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(Row {
            line: idx + 1,
            values,
        });
    }
    Ok(out)
}

fn header(rows: &[Row]) -> Result<(usize, usize, usize)> {
    let first = rows.first().ok_or(Error::Parse {
        line: 0,
        msg: "empty file".into(),
    })?;
    match first.values[..] {
        [n, m] if n > 0 && m > 0 => Ok((n as usize, m as usize, first.line)),
        _ => Err(Error::Parse {
            line: first.line,
            msg: "header must be two positive integers 'n m'".into(),
        }),
    }
}

fn duration(v: i64, line: usize) -> Result<Time> {
    if v < 0 {
        return Err(Error::Parse {
            line,
            msg: format!("negative duration {v}"),
        });
    }
    Ok(v as Time)
}

fn parse_orlib(name: &str, rows: &[Row]) -> Result<Instance> {
    let (n, m, hline) = header(rows)?;
    let body = &rows[1..];
    if body.len() != n {
        return Err(Error::Parse {
            line: body.last().map_or(hline, |r| r.line),
            msg: format!("expected {n} job lines, found {}", body.len()),
        });
    }
    let mut jobs = Vec::with_capacity(n);
    for row in body {
        if row.values.is_empty() || row.values.len() % 2 != 0 {
            return Err(Error::Parse {
                line: row.line,
                msg: format!(
                    "expected machine/duration pairs, found {} values",
                    row.values.len()
                ),
            });
        }
        let mut job = Vec::with_capacity(row.values.len() / 2);
        for pair in row.values.chunks(2) {
            let (mc, d) = (pair[0], pair[1]);
            if mc < 0 || mc as usize >= m {
                return Err(Error::Parse {
                    line: row.line,
                    msg: format!("machine {mc} out of range 0..{m}"),
                });
            }
            job.push((mc as usize, duration(d, row.line)?));
        }
        jobs.push(job);
    }
    Instance::new(name, m, jobs)
}

fn parse_taillard(name: &str, rows: &[Row]) -> Result<Instance> {
    let (n, m, hline) = header(rows)?;
    let body = &rows[1..];
    if body.len() != 2 * n {
        return Err(Error::Parse {
            line: body.last().map_or(hline, |r| r.line),
            msg: format!(
                "expected {} matrix lines ({n} durations + {n} machines), found {}",
                2 * n,
                body.len()
            ),
        });
    }
    for row in body {
        if row.values.len() != m {
            return Err(Error::Parse {
                line: row.line,
                msg: format!("expected {m} values, found {}", row.values.len()),
            });
        }
    }
    let (times, machines) = body.split_at(n);
    let mut jobs = Vec::with_capacity(n);
    for (trow, mrow) in times.iter().zip(machines) {
        let mut job = Vec::with_capacity(m);
        for (&d, &mc) in trow.values.iter().zip(&mrow.values) {
            if mc < 1 || mc as usize > m {
                return Err(Error::Parse {
                    line: mrow.line,
                    msg: format!("machine id {mc} out of range 1..={m}"),
                });
            }
            job.push((mc as usize - 1, duration(d, trow.line)?));
        }
        jobs.push(job);
    }
    Instance::new(name, m, jobs)
}

fn detect(rows: &[Row]) -> Result<Format> {
    let (n, m, hline) = header(rows)?;
    let body = &rows[1..];
    if body.len() == 2 * n && body.iter().all(|r| r.values.len() == m) {
        return Ok(Format::Taillard);
    }
    if body.len() == n {
        return Ok(Format::OrLib);
    }
    Err(Error::Parse {
        line: hline,
        msg: format!(
            "cannot detect format: {} data lines for {n} jobs",
            body.len()
        ),
    })
}

/// Parses instance text. `name` becomes the instance label.
pub fn parse_instance(text: &str, format: Format, name: &str) -> Result<Instance> {
    let rows = rows(text)?;
    let format = match format {
        Format::Auto => detect(&rows)?,
        f => f,
    };
    match format {
        Format::OrLib => parse_orlib(name, &rows),
        Format::Taillard => parse_taillard(name, &rows),
        Format::Auto => unreachable!(),
    }
}

/// Reads an instance file; its stem becomes the instance name.
pub fn read_instance(path: &Path, format: Format) -> Result<Instance> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_instance(&text, format, &name)
}

pub fn to_orlib(inst: &Instance) -> String {
    let mut out = format!("{} {}\n", inst.num_jobs(), inst.num_machines());
    for job in inst.jobs() {
        let line: Vec<String> = job.iter().map(|(mc, d)| format!("{mc} {d}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Taillard text; only defined for rectangular instances.
pub fn to_taillard(inst: &Instance) -> Result<String> {
    let m = inst.num_machines();
    if (0..inst.num_jobs()).any(|j| inst.job_len(j) != m) {
        return Err(Error::InvalidInstance(
            "Taillard format needs exactly m operations per job".into(),
        ));
    }
    let jobs = inst.jobs();
    let mut out = format!("{} {}\n", inst.num_jobs(), m);
    for job in &jobs {
        let line: Vec<String> = job.iter().map(|(_, d)| d.to_string()).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    for job in &jobs {
        let line: Vec<String> = job.iter().map(|(mc, _)| (mc + 1).to_string()).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    Ok(out)
}

pub fn write_instance(inst: &Instance, path: &Path, format: Format) -> Result<()> {
    let text = match format {
        Format::Taillard => to_taillard(inst)?,
        _ => to_orlib(inst),
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
