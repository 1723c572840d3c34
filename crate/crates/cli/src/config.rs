//! Optional TOML defaults. Top-level keys apply to every command, a table
//! named after a subcommand applies to that command only:
//!
//! ```toml
//! seed = 3
//! [train]
//! encoder = "gat"
//! taus = [0.57]
//! ```
//!
//! The file is turned into flags placed before the user's own, and later
//! flags win, so the command line always overrides the file.

use std::path::Path;

use crate::args::SUBCOMMANDS;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file {0}: {1}")]
    Read(String, std::io::Error),
    #[error("invalid config file {0}: {1}")]
    Parse(String, String),
}

/// Value of `--config` in raw arguments, if any.
pub fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(v.to_owned());
        }
    }
    None
}

fn to_flags(table: &toml::Table, path: &str) -> Result<Vec<String>, ConfigError> {
    let mut out = Vec::new();
    for (key, value) in table {
        if value.is_table() {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        let scalar = |v: &toml::Value| -> Result<String, ConfigError> {
            match v {
                toml::Value::String(s) => Ok(s.clone()),
                toml::Value::Integer(i) => Ok(i.to_string()),
                toml::Value::Float(f) => Ok(f.to_string()),
                other => Err(ConfigError::Parse(
                    path.to_owned(),
                    format!("unsupported value for '{key}': {other}"),
                )),
            }
        };
        match value {
            toml::Value::Boolean(true) => out.push(flag),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                out.push(flag);
                // Ranges contain commas themselves and take one token each.
                if key == "range" {
                    for v in items {
                        out.push(scalar(v)?);
                    }
                } else {
                    let joined: Result<Vec<String>, _> = items.iter().map(scalar).collect();
                    out.push(joined?.join(","));
                }
            }
            v => {
                out.push(flag);
                out.push(scalar(v)?);
            }
        }
    }
    Ok(out)
}

/// Arguments with the config file's flags spliced in after the subcommand.
pub fn apply(args: Vec<String>) -> Result<Vec<String>, ConfigError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .map_err(|e| ConfigError::Read(path.clone(), e))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Parse(path.clone(), e.to_string()))?;
    let Some(pos) = args.iter().position(|a| SUBCOMMANDS.contains(&a.as_str())) else {
        return Ok(args);
    };
    let mut injected = to_flags(&table, &path)?;
    if let Some(section) = table.get(&args[pos]).and_then(|v| v.as_table()) {
        injected.extend(to_flags(section, &path)?);
    }
    let mut out = args[..=pos].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[pos + 1..]);
    Ok(out)
}
