//! `--config FILE` support.
//!
//! The file holds `key = value` lines named like the long flags of the
//! chosen subcommand. Each entry becomes a synthetic flag placed right after
//! the subcommand name, unless the same flag already appears on the command
//! line, so flags beat the file and the file beats built-in defaults.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// Flags that take no value; `key = true` switches them on.
const SWITCHES: &[&str] = &["epsilon-median", "full", "drop-trivial", "no-change"];

/// Flags of which at most one may be given. A config entry is dropped when
/// the command line already picked another member of its group.
fn exclusive_group(command: &str) -> &'static [&'static str] {
    match command {
        "embed" | "distance" | "global" => &["epsilon", "epsilon-median", "target-lambda2"],
        "metagraph" | "torus-experiment" => &["epsilon", "epsilon-median"],
        _ => &[],
    }
}

pub fn expand(raw: Vec<OsString>) -> Result<Vec<OsString>> {
    let args: Vec<String> = raw
        .into_iter()
        .map(|a| a.into_string().map_err(|a| anyhow::anyhow!("argument {a:?} is not valid UTF-8")))
        .collect::<Result<_>>()?;
    let Some(path) = config_path(&args)? else {
        return Ok(args.into_iter().map(OsString::from).collect());
    };
    // The subcommand is the first argument after the program name that is not a flag.
    let Some(pos) = args.iter().skip(1).position(|a| !a.starts_with('-')).map(|p| p + 1) else {
        return Ok(args.into_iter().map(OsString::from).collect());
    };
    let entries = parse_file(&path)?;
    let group = exclusive_group(&args[pos]);
    let given = |key: &str| args.iter().any(|a| a == &format!("--{key}") || a.starts_with(&format!("--{key}=")));
    let group_taken = group.iter().any(|k| given(k));

    let mut inserted = Vec::new();
    for (key, value) in entries {
        if key == "config" {
            bail!("{}: a config file cannot include another", path);
        }
        if given(&key) || (group_taken && group.contains(&key.as_str())) {
            continue;
        }
        if SWITCHES.contains(&key.as_str()) {
            match value.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" | "on" => inserted.push(format!("--{key}")),
                "false" | "no" | "0" | "off" => {}
                _ => bail!("{}: '{key}' expects true or false, got '{value}'", path),
            }
        } else {
            inserted.push(format!("--{key}={value}"));
        }
    }
    let mut out = args;
    out.splice(pos + 1..pos + 1, inserted);
    Ok(out.into_iter().map(OsString::from).collect())
}

fn config_path(args: &[String]) -> Result<Option<String>> {
    for (k, a) in args.iter().enumerate() {
        if a == "--config" {
            let v = args.get(k + 1).context("--config needs a file name")?;
            return Ok(Some(v.clone()));
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Ok(Some(v.to_string()));
        }
    }
    Ok(None)
}

fn parse_file(path: &str) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(Path::new(path)).with_context(|| format!("reading config {path}"))?;
    parse(&text).with_context(|| format!("in config {path}"))
}

pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("line {}: expected key = value", lineno + 1);
        };
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            bail!("line {}: empty key", lineno + 1);
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}
