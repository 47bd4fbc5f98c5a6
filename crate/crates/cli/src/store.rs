//! Results directory: append-only CSV files plus the limit cache.

use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use varchart::experiments::{LimitCache, LimitKey};
use varchart::Scheme;

use crate::error::{CliError, Result};
use crate::format::{full, Row};

pub const LIMITS_FILE: &str = "limits.csv";
const LIMIT_HEADER: [&str; 11] = [
    "scheme",
    "delta_star",
    "process",
    "xi",
    "reps",
    "seed",
    "cap",
    "rel_tol",
    "glr_window",
    "c",
    "version",
];

pub struct ResultsStore {
    dir: PathBuf,
    limits: HashMap<LimitKey, f64>,
}

fn parse_f64(field: &str, s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| CliError::Io(format!("{LIMITS_FILE}: bad {field} value {s:?}")))
}

fn parse_u64(field: &str, s: &str) -> Result<u64> {
    s.parse()
        .map_err(|_| CliError::Io(format!("{LIMITS_FILE}: bad {field} value {s:?}")))
}

fn key_from_record(rec: &csv::StringRecord) -> Result<(LimitKey, f64)> {
    let get = |i: usize| rec.get(i).unwrap_or("");
    let scheme: Scheme = get(0)
        .parse()
        .map_err(|_| CliError::Io(format!("{LIMITS_FILE}: unknown scheme {:?}", get(0))))?;
    let opt = |i: usize| (!get(i).is_empty()).then(|| get(i));
    let key = LimitKey {
        scheme,
        delta_star: opt(1).map(|s| parse_f64("delta_star", s)).transpose()?,
        process: get(2).to_string(),
        xi: parse_f64("xi", get(3))?,
        reps: parse_u64("reps", get(4))?,
        seed: parse_u64("seed", get(5))?,
        cap: parse_u64("cap", get(6))?,
        rel_tol: parse_f64("rel_tol", get(7))?,
        glr_window: opt(8).map(|s| parse_u64("glr_window", s).map(|w| w as usize)).transpose()?,
    };
    Ok((key, parse_f64("c", get(9))?))
}

impl ResultsStore {
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let mut limits = HashMap::new();
        let path = dir.join(LIMITS_FILE);
        if path.exists() {
            let mut rdr = csv::Reader::from_path(&path)?;
            for rec in rdr.records() {
                let (key, c) = key_from_record(&rec?)?;
                limits.insert(key, c);
            }
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            limits,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Appends rows to `file`, writing the header when the file is new and
    /// refusing to mix schemas otherwise.
    pub fn append(&self, file: &str, rows: &[Row]) -> Result<()> {
        let Some(first) = rows.first() else {
            return Ok(());
        };
        let header: Vec<&str> = first.iter().map(|(k, _)| *k).collect();
        let path = self.dir.join(file);
        let fresh = match fs::File::open(&path) {
            Ok(f) => {
                let mut line = String::new();
                BufReader::new(f).read_line(&mut line)?;
                if line.is_empty() {
                    true
                } else {
                    let existing: Vec<String> = csv::ReaderBuilder::new()
                        .has_headers(false)
                        .from_reader(line.as_bytes())
                        .records()
                        .next()
                        .transpose()?
                        .map(|r| r.iter().map(str::to_string).collect())
                        .unwrap_or_default();
                    if existing != header {
                        return Err(CliError::Io(format!(
                            "{}: existing header does not match this command's columns",
                            path.display()
                        )));
                    }
                    false
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => true,
            Err(e) => return Err(e.into()),
        };
        let f = OpenOptions::new().create(true).append(true).open(&path)?;
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(f);
        if fresh {
            w.write_record(&header)?;
        }
        for row in rows {
            w.write_record(row.iter().map(|(_, v)| v.as_str()))?;
        }
        w.flush()?;
        Ok(())
    }

    fn append_limit(&self, key: &LimitKey, c: f64) -> Result<()> {
        let opt = |x: Option<String>| x.unwrap_or_default();
        let values = [
            key.scheme.name().to_string(),
            opt(key.delta_star.map(full)),
            key.process.clone(),
            full(key.xi),
            key.reps.to_string(),
            key.seed.to_string(),
            key.cap.to_string(),
            full(key.rel_tol),
            opt(key.glr_window.map(|w| w.to_string())),
            full(c),
            env!("CARGO_PKG_VERSION").to_string(),
        ];
        let row: Row = LIMIT_HEADER.iter().copied().zip(values).collect();
        self.append(LIMITS_FILE, &[row])
    }
}

impl LimitCache for ResultsStore {
    fn get(&self, key: &LimitKey) -> Option<f64> {
        self.limits.get(key).copied()
    }

    fn put(&mut self, key: LimitKey, limit: f64) -> varchart::Result<()> {
        self.append_limit(&key, limit)
            .map_err(|e| varchart::Error::Storage(e.to_string()))?;
        self.limits.insert(key, limit);
        Ok(())
    }
}

/// Writes rows as CSV to `out`, leaving out the named columns.
pub fn print_rows(out: &mut dyn Write, rows: &[Row], skip: &[&str]) -> Result<()> {
    let Some(first) = rows.first() else {
        return Ok(());
    };
    let mut w = csv::Writer::from_writer(out);
    let keep = |k: &&str| !skip.contains(k);
    w.write_record(first.iter().map(|(k, _)| *k).filter(keep))?;
    for row in rows {
        w.write_record(row.iter().filter(|(k, _)| keep(k)).map(|(_, v)| v.as_str()))?;
    }
    w.flush()?;
    Ok(())
}
