//! `key = value` config files and the resolved config written into run
//! directories.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use clap::{ArgAction, ArgMatches, Command};

use crate::UsageError;

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

/// Parses `key = value` lines. `#` starts a comment; underscores in keys
/// are read as dashes.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, UsageError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| UsageError(format!("config line {}: expected `key = value`", n + 1)))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(UsageError(format!("config line {}: empty key", n + 1)));
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

/// Flags equivalent to the given pairs. `true` becomes a bare switch and
/// `false` is dropped.
pub fn pairs_to_flags(pairs: &[(String, String)]) -> Vec<OsString> {
    let mut out = Vec::new();
    for (k, v) in pairs {
        match v.as_str() {
            "true" => out.push(format!("--{k}").into()),
            "false" => {}
            _ => {
                out.push(format!("--{k}").into());
                out.push(v.into());
            }
        }
    }
    out
}

/// Splices the flags from `--config FILE` in right after the subcommand,
/// so flags given on the command line take precedence.
pub fn expand_config_flag(mut argv: Vec<OsString>) -> Result<Vec<OsString>, UsageError> {
    let mut path = None;
    let mut i = 1;
    while i < argv.len() {
        let a = argv[i].to_string_lossy().into_owned();
        if a == "--config" {
            if i + 1 >= argv.len() {
                return Err(UsageError("--config needs a file".into()));
            }
            path = Some(argv.remove(i + 1));
            argv.remove(i);
            continue;
        }
        if let Some(p) = a.strip_prefix("--config=") {
            path = Some(OsString::from(p));
            argv.remove(i);
            continue;
        }
        i += 1;
    }
    let Some(path) = path else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| UsageError(format!("cannot read config {}: {e}", Path::new(&path).display())))?;
    let flags = pairs_to_flags(&parse_config(&text)?);
    let at = argv
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map_or(argv.len(), |p| p + 2);
    argv.splice(at..at, flags);
    Ok(argv)
}

/// Every flag of `cmd` with its parsed value, defaults included.
pub fn resolved_pairs(cmd: &Command, m: &ArgMatches) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for arg in cmd.get_arguments() {
        let id = arg.get_id().as_str();
        let Some(long) = arg.get_long() else { continue };
        if matches!(id, "help" | "version" | "config") {
            continue;
        }
        match arg.get_action() {
            ArgAction::SetTrue => {
                if m.get_flag(id) {
                    out.push((long.to_string(), "true".into()));
                }
            }
            _ => {
                if let Some(vals) = m.get_raw(id) {
                    let joined: Vec<String> = vals.map(|v| v.to_string_lossy().into_owned()).collect();
                    if !joined.is_empty() {
                        out.push((long.to_string(), joined.join(",")));
                    }
                }
            }
        }
    }
    out
}

pub fn set_pair(pairs: &mut Vec<(String, String)>, key: &str, value: String) {
    match pairs.iter_mut().find(|(k, _)| k == key) {
        Some(p) => p.1 = value,
        None => pairs.push((key.to_string(), value)),
    }
}

pub fn render_config(pairs: &[(String, String)]) -> String {
    let mut s = format!("# tsimg {VERSION}\n");
    for (k, v) in pairs {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

/// Writes `config.txt`, `seed` and `version` into `dir`.
pub fn write_run_record(dir: &Path, pairs: &[(String, String)], seed: u64) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.txt"), render_config(pairs))?;
    fs::write(dir.join("seed"), format!("{seed}\n"))?;
    fs::write(dir.join("version"), format!("{VERSION}\n"))?;
    Ok(())
}
