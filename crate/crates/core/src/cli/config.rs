//! `--config FILE`: flat `key=value` lines naming flags of the chosen command.
//!
//! A value from the file is used only when the flag was not given on the
//! command line. Keys that belong to another command are ignored; keys no
//! command knows are rejected.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use clap::parser::ValueSource;
use clap::{ArgAction, ArgMatches, Command};

use super::Usage;

pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, Usage> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Usage::new("--config", format!("line {}: expected key=value, got `{line}`", no + 1)))?;
        let v = v.trim();
        let v = v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v);
        out.push((k.trim().to_string(), v.to_string()));
    }
    Ok(out)
}

fn parse_bool(key: &str, v: &str) -> Result<bool, Usage> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Usage::new(key, format!("expected true or false, got `{v}`"))),
    }
}

/// Returns `argv` extended with config-file flags, or `None` without `--config`.
pub fn apply_config_file(cmd: &Command, argv: &[OsString], matches: &ArgMatches) -> anyhow::Result<Option<Vec<OsString>>> {
    let Some((name, sub_m)) = matches.subcommand() else {
        return Ok(None);
    };
    let path = matches.get_one::<PathBuf>("config").or_else(|| sub_m.get_one::<PathBuf>("config"));
    let Some(path) = path else {
        return Ok(None);
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let sub = cmd.find_subcommand(name).expect("matched subcommand exists");

    let mut extra: Vec<OsString> = Vec::new();
    for (key, value) in parse_pairs(&text)? {
        let id = key.replace('-', "_");
        if id == "config" {
            return Err(Usage::new("--config", "a config file cannot name another config file").into());
        }
        let arg = sub.get_arguments().find(|a| a.get_id().as_str() == id && a.get_long().is_some());
        let Some(arg) = arg else {
            let elsewhere = cmd
                .get_subcommands()
                .any(|c| c.get_arguments().any(|a| a.get_id().as_str() == id));
            if elsewhere || id == "verbose" {
                log::debug!("config key `{key}` does not apply to `{name}`");
                continue;
            }
            return Err(Usage::new(&key, "unknown config key").into());
        };
        if sub_m.value_source(&id) == Some(ValueSource::CommandLine) {
            continue;
        }
        let long = arg.get_long().expect("checked above");
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            if parse_bool(&key, &value)? {
                extra.push(format!("--{long}").into());
            }
        } else {
            extra.push(format!("--{long}={value}").into());
        }
    }
    let mut merged = argv.to_vec();
    merged.extend(extra);
    Ok(Some(merged))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs() {
        let p = parse_pairs("# c\n\nmode = ts\nk=\"25\"\n").unwrap();
        assert_eq!(p, vec![("mode".into(), "ts".into()), ("k".into(), "25".into())]);
        assert!(parse_pairs("novalue").is_err());
    }
}
