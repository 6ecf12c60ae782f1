//! `--config` support. Config keys are turned into extra flags appended to
//! argv, so clap validates them exactly like command-line flags.
//!
//! ```toml
//! seed = 7            # any subcommand that has --seed
//! [score]
//! dims = "original,fog:2"
//! tau = 2.0
//! ```

use std::ffi::OsString;
use std::path::PathBuf;

use clap::CommandFactory;

use crate::Cli;

fn config_path(args: &[OsString]) -> Result<Option<PathBuf>, String> {
    let mut iter = args.iter().skip(1);
    while let Some(arg) = iter.next() {
        let arg = arg.to_string_lossy();
        if arg == "--" {
            break;
        }
        if arg == "--config" {
            return iter.next().map(|p| Some(PathBuf::from(p))).ok_or_else(|| "--config needs a file".to_string());
        }
        if let Some(path) = arg.strip_prefix("--config=") {
            return Ok(Some(PathBuf::from(path)));
        }
    }
    Ok(None)
}

/// First positional argument, skipping the value of `--config`.
fn subcommand(args: &[OsString]) -> Option<String> {
    let mut iter = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned());
    while let Some(arg) = iter.next() {
        if arg == "--config" {
            iter.next();
        } else if !arg.starts_with('-') {
            return Some(arg);
        }
    }
    None
}

fn flag_given(args: &[OsString], long: &str) -> bool {
    let flag = format!("--{long}");
    let with_value = format!("--{long}=");
    args.iter().map(|a| a.to_string_lossy()).take_while(|a| a != "--").any(|a| a == flag || a.starts_with(&with_value))
}

fn scalar(key: &str, value: &toml::Value) -> Result<String, String> {
    match value {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        other => Err(format!("config key `{key}`: unsupported value {other}")),
    }
}

/// `args` with every config key not already given as a flag appended.
pub fn merge_config(args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some(path) = config_path(&args)? else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let table: toml::Table = text.parse().map_err(|e| format!("{}: {e}", path.display()))?;
    let Some(name) = subcommand(&args) else {
        return Ok(args);
    };
    let command = Cli::command();
    let Some(sub) = command.find_subcommand(&name) else {
        return Ok(args);
    };
    let flags: Vec<(String, bool)> = sub
        .get_arguments()
        .filter_map(|a| {
            let takes_value = a.get_action().takes_values();
            a.get_long().map(|l| (l.to_string(), takes_value))
        })
        .collect();
    let lookup = |key: &str| {
        let long = key.replace('_', "-");
        flags.iter().find(|(l, _)| *l == long).cloned()
    };

    let (mut section_entries, mut top_entries) = (Vec::new(), Vec::new());
    for (key, value) in &table {
        match value {
            toml::Value::Table(section) if key == &name => {
                for (k, v) in section {
                    if lookup(k).is_none() {
                        return Err(format!("config key `{name}.{k}` is not a flag of `{name}`"));
                    }
                    section_entries.push((k.clone(), v.clone()));
                }
            }
            toml::Value::Table(_) => {}
            // Top-level keys apply to whichever subcommands accept them.
            _ if lookup(key).is_some() => top_entries.push((key.clone(), value.clone())),
            _ => {}
        }
    }
    // Section keys come first so they shadow top-level ones.
    let entries = section_entries.into_iter().chain(top_entries);

    let mut out = args.clone();
    let mut seen = Vec::new();
    for (key, value) in entries {
        let (long, takes_value) = lookup(&key).expect("checked above");
        if seen.contains(&long) || flag_given(&args, &long) {
            continue;
        }
        seen.push(long.clone());
        let flag = OsString::from(format!("--{long}"));
        match (&value, takes_value) {
            (toml::Value::Boolean(true), false) => out.push(flag),
            (toml::Value::Boolean(false), false) => {}
            (toml::Value::Array(items), true) => {
                for item in items {
                    out.push(format!("--{long}={}", scalar(&key, item)?).into());
                }
            }
            (v, true) => {
                out.push(format!("--{long}={}", scalar(&key, v)?).into());
            }
            _ => return Err(format!("config key `{key}`: expected a boolean")),
        }
    }
    Ok(out)
}
