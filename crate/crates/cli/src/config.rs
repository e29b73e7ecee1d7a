//! Run settings from `key = value` files and command-line flags.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigFileError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: {key} given twice")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: bad value for {key}: {reason}")]
    Value {
        line: usize,
        key: String,
        reason: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    Trs,
    Alg2,
    Both,
}

impl SolverChoice {
    pub fn runs_trs(self) -> bool {
        matches!(self, Self::Trs | Self::Both)
    }

    pub fn runs_alg2(self) -> bool {
        matches!(self, Self::Alg2 | Self::Both)
    }
}

impl FromStr for SolverChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "trs" => Ok(Self::Trs),
            "alg2" => Ok(Self::Alg2),
            "both" => Ok(Self::Both),
            _ => Err(format!("expected trs, alg2 or both, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MeshSource {
    /// Generated disk mesh with the given ring count.
    Disk(usize),
    File(PathBuf),
}

impl FromStr for MeshSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(n) = s.strip_prefix("disk:") {
            let n: usize = n
                .parse()
                .map_err(|_| format!("disk refinement must be a positive integer, got {n:?}"))?;
            if n == 0 {
                return Err("disk refinement must be at least 1".into());
            }
            Ok(Self::Disk(n))
        } else if let Some(path) = s.strip_prefix("file:") {
            if path.is_empty() {
                return Err("empty mesh path".into());
            }
            Ok(Self::File(PathBuf::from(path)))
        } else {
            Err(format!("expected disk:N or file:PATH, got {s:?}"))
        }
    }
}

impl fmt::Display for MeshSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Disk(n) => write!(f, "disk:{n}"),
            Self::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Format {
    Csv,
    Vtk,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "vtk" => Ok(Self::Vtk),
            "json" => Ok(Self::Json),
            _ => Err(format!("expected csv, vtk or json, got {s:?}")),
        }
    }
}

/// Parses a comma-separated format list such as `csv,vtk`.
pub fn parse_formats(s: &str) -> Result<Vec<Format>, String> {
    let mut out: Vec<Format> = s
        .split(',')
        .map(|f| f.trim().parse())
        .collect::<Result<_, _>>()?;
    out.sort();
    out.dedup();
    Ok(out)
}

/// Partially specified run settings. Unset fields fall back to defaults when
/// the run configuration is built.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub solver: Option<SolverChoice>,
    pub mesh: Option<MeshSource>,
    pub alpha: Option<f64>,
    pub tau0: Option<f64>,
    pub kappa: Option<f64>,
    pub force: Option<f64>,
    pub abstol: Option<f64>,
    pub reltol: Option<f64>,
    pub r: Option<f64>,
    pub max_outer: Option<usize>,
    pub out: Option<PathBuf>,
    pub formats: Option<Vec<Format>>,
}

fn value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T, ConfigFileError>
where
    T::Err: fmt::Display,
{
    raw.parse().map_err(|e: T::Err| ConfigFileError::Value {
        line,
        key: key.to_owned(),
        reason: e.to_string(),
    })
}

fn set<T>(slot: &mut Option<T>, v: T, line: usize, key: &str) -> Result<(), ConfigFileError> {
    if slot.is_some() {
        return Err(ConfigFileError::Duplicate {
            line,
            key: key.to_owned(),
        });
    }
    *slot = Some(v);
    Ok(())
}

impl Settings {
    /// Parses `key = value` lines. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, ConfigFileError> {
        let mut s = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, val)) = content.split_once('=') else {
                return Err(ConfigFileError::Syntax {
                    line,
                    text: content.to_owned(),
                });
            };
            let (key, val) = (key.trim(), val.trim());
            if key.is_empty() || val.is_empty() {
                return Err(ConfigFileError::Syntax {
                    line,
                    text: content.to_owned(),
                });
            }
            match key {
                "solver" => set(&mut s.solver, value(line, key, val)?, line, key)?,
                "mesh" => set(&mut s.mesh, value(line, key, val)?, line, key)?,
                "alpha" => set(&mut s.alpha, value(line, key, val)?, line, key)?,
                "tau0" => set(&mut s.tau0, value(line, key, val)?, line, key)?,
                "kappa" => set(&mut s.kappa, value(line, key, val)?, line, key)?,
                "force" => set(&mut s.force, value(line, key, val)?, line, key)?,
                "abstol" => set(&mut s.abstol, value(line, key, val)?, line, key)?,
                "reltol" => set(&mut s.reltol, value(line, key, val)?, line, key)?,
                "r" => set(&mut s.r, value(line, key, val)?, line, key)?,
                "max_outer" => set(&mut s.max_outer, value(line, key, val)?, line, key)?,
                "out" => set(&mut s.out, PathBuf::from(val), line, key)?,
                "format" => {
                    let formats = parse_formats(val).map_err(|reason| ConfigFileError::Value {
                        line,
                        key: key.to_owned(),
                        reason,
                    })?;
                    set(&mut s.formats, formats, line, key)?
                }
                _ => {
                    return Err(ConfigFileError::UnknownKey {
                        line,
                        key: key.to_owned(),
                    })
                }
            }
        }
        Ok(s)
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(self, over: Settings) -> Settings {
        Settings {
            solver: over.solver.or(self.solver),
            mesh: over.mesh.or(self.mesh),
            alpha: over.alpha.or(self.alpha),
            tau0: over.tau0.or(self.tau0),
            kappa: over.kappa.or(self.kappa),
            force: over.force.or(self.force),
            abstol: over.abstol.or(self.abstol),
            reltol: over.reltol.or(self.reltol),
            r: over.r.or(self.r),
            max_outer: over.max_outer.or(self.max_outer),
            out: over.out.or(self.out),
            formats: over.formats.or(self.formats),
        }
    }
}
