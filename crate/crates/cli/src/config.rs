//! Parameter resolution and exit-code policy. Every value is looked up as
//! command-line flag first, then the `--config` file, then the built-in
//! default.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

/// Maps library failures onto exit codes: a violated run-time bound is a
/// failed assertion (1), everything else is a configuration problem (2).
pub fn core_error(e: holoflow::Error) -> CliError {
    let code = match &e {
        holoflow::Error::MonitorFailure(_) | holoflow::Error::FlowDegeneracy { .. } => 1,
        _ => 2,
    };
    CliError {
        code,
        message: e.to_string(),
    }
}

/// The parsed `--config` file: key=value per line, `#` comments, keys
/// named like the long flags. Keys a subcommand does not use are ignored,
/// so one file can drive several commands.
pub struct Overlay {
    entries: BTreeMap<String, (String, usize)>,
}

impl Overlay {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            for (i, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    CliError::usage(format!(
                        "{} line {}: expected key=value, got '{line}'",
                        path.display(),
                        i + 1
                    ))
                })?;
                entries.insert(key.trim().to_string(), (value.trim().to_string(), i + 1));
            }
        }
        Ok(Overlay { entries })
    }

    pub fn get<T>(&self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.get_opt(key, flag)?.unwrap_or(default))
    }

    pub fn get_opt<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.entries.get(key) {
            Some((raw, line)) => raw.parse().map(Some).map_err(|e| {
                CliError::usage(format!("config line {line}: field '{key}' = '{raw}': {e}"))
            }),
            None => Ok(None),
        }
    }

    pub fn out_path(&self, flag: &Option<PathBuf>) -> Result<Option<PathBuf>, CliError> {
        self.get_opt("out", flag.clone())
    }
}

pub fn check_level(n: usize) -> Result<usize, CliError> {
    if (1..=4).contains(&n) {
        Ok(n)
    } else {
        Err(CliError::usage(format!("n must lie in 1..=4, got {n}")))
    }
}

pub fn check_dim(d: usize) -> Result<usize, CliError> {
    if (1..=3).contains(&d) {
        Ok(d)
    } else {
        Err(CliError::usage(format!("d must lie in 1..=3, got {d}")))
    }
}

pub fn univariate(d: usize, command: &str) -> Result<(), CliError> {
    if d == 1 {
        Ok(())
    } else {
        Err(CliError::usage(format!("{command} is univariate, got d = {d}")))
    }
}

pub fn check_unit(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(CliError::usage(format!("{name} must lie in (0, 1], got {v}")))
    }
}

/// The shared exponent convention: where both appear, alpha <= beta.
pub fn check_ordered(alpha: f64, beta: f64) -> Result<(), CliError> {
    if alpha <= beta {
        Ok(())
    } else {
        Err(CliError::usage(format!(
            "alpha = {alpha} must not exceed beta = {beta}"
        )))
    }
}

pub fn check_strictly_ordered(alpha: f64, beta: f64) -> Result<(), CliError> {
    if alpha < beta {
        Ok(())
    } else {
        Err(CliError::usage(format!(
            "need alpha < beta, got alpha = {alpha}, beta = {beta}"
        )))
    }
}

pub fn check_positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::usage(format!("{name} must be positive, got {v}")))
    }
}

pub fn parse_list_f64(raw: &str, what: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::usage(format!("bad {what} entry '{}'", s.trim())))
        })
        .collect()
}

pub fn parse_list_usize(raw: &str, what: &str) -> Result<Vec<usize>, CliError> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| CliError::usage(format!("bad {what} entry '{}'", s.trim())))
        })
        .collect()
}
