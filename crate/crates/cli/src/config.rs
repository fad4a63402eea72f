//! `key = value` config files. Keys are long flag names; a key applies to
//! every subcommand that has that flag, and flags given on the command line
//! win over the file.

use std::ffi::OsString;
use std::path::Path;

use clap::{ArgAction, Command};

use crate::CliError;

pub fn parse(text: &str, file: &Path) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{}:{}: expected key = value", file.display(), i + 1)))?;
        let key = k.trim().replace('_', "-");
        let value = v.trim().trim_matches('"').to_string();
        out.push((key, value));
    }
    Ok(out)
}

/// Finds `--config` in `args`, reads it, and inserts its entries as flags
/// right after the subcommand name.
pub fn expand(cmd: &Command, args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut path = None;
    let mut sub_at = None;
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy();
        if a == "--config" {
            path = args.get(i + 1).map(|p| p.clone().into());
            i += 2;
            continue;
        }
        if let Some(p) = a.strip_prefix("--config=") {
            path = Some(std::path::PathBuf::from(p));
        } else if sub_at.is_none() && cmd.find_subcommand(a.as_ref()).is_some() {
            sub_at = Some(i);
        }
        i += 1;
    }
    let (Some(path), Some(sub_at)) = (path, sub_at) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let entries = parse(&text, &path)?;
    let sub = cmd
        .find_subcommand(args[sub_at].to_string_lossy().as_ref())
        .expect("found above");

    let mut injected = Vec::new();
    for (key, value) in entries {
        let known_anywhere = cmd
            .get_subcommands()
            .any(|s| s.get_arguments().any(|a| a.get_long() == Some(key.as_str())));
        if !known_anywhere {
            return Err(CliError::Usage(format!("{}: unknown key {key:?}", path.display())));
        }
        let Some(arg) = sub.get_arguments().find(|a| a.get_long() == Some(key.as_str())) else {
            continue;
        };
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            match value.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" | "on" => injected.push(OsString::from(format!("--{key}"))),
                "false" | "no" | "0" | "off" => {}
                _ => {
                    return Err(CliError::Usage(format!(
                        "{}: {key} expects true or false, got {value:?}",
                        path.display()
                    )))
                }
            }
        } else {
            injected.push(OsString::from(format!("--{key}={value}")));
        }
    }
    let mut out = args;
    out.splice(sub_at + 1..sub_at + 1, injected);
    Ok(out)
}
