//! `key=value` config files. Each key names a long flag without its dashes;
//! entries are spliced in ahead of the command-line flags so that the latter
//! take precedence.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Parses a config file into flag tokens. `true`/`false` values toggle
/// switches; blank lines and `#` comments are skipped.
pub fn parse_config(text: &str, origin: &Path) -> Result<Vec<String>> {
    let mut args = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: origin.to_path_buf(),
            line: idx + 1,
            msg: format!("expected key=value, got {line:?}"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || key == "config" {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line: idx + 1,
                msg: format!("invalid key {key:?}"),
            });
        }
        match value {
            "true" => args.push(format!("--{key}")),
            "false" => {}
            _ => {
                args.push(format!("--{key}"));
                args.push(value.to_string());
            }
        }
    }
    Ok(args)
}

/// Expands `--config FILE` (or `--config=FILE`) in `argv`: the file's flags
/// are inserted right after the subcommand words, before any explicit flag.
pub fn expand_config_args(argv: Vec<String>) -> Result<Vec<String>> {
    let mut config = None;
    let mut rest = Vec::with_capacity(argv.len());
    let mut it = argv.into_iter();
    while let Some(arg) = it.next() {
        if arg == "--config" {
            match it.next() {
                Some(path) => config = Some(path),
                None => return Err(Error::InvalidConfig("--config needs a file path".into())),
            }
        } else if let Some(path) = arg.strip_prefix("--config=") {
            config = Some(path.to_string());
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };
    let path = Path::new(&path);
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let extra = parse_config(&text, path)?;
    // program name, then subcommand words up to the first flag
    let split = 1 + rest.iter().skip(1).take_while(|a| !a.starts_with('-')).count();
    let split = split.min(rest.len());
    let tail = rest.split_off(split);
    rest.extend(extra);
    rest.extend(tail);
    Ok(rest)
}
