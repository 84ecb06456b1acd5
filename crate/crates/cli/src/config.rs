//! Flat `key = value` config files.
//!
//! Keys are the long flag names of the chosen subcommand (`-` or `_` both work).
//! The file is spliced in front of the command-line flags, and since later
//! occurrences win, flags override the file. Boolean flags take `true`/`false`.
//! A key may repeat for list-valued flags such as `checkpoint`.

use std::ffi::OsString;
use std::path::Path;

use clap::Command;

pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut pairs = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`, got `{}`", n + 1, raw.trim()))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(format!("line {}: empty key", n + 1));
        }
        pairs.push((key, value.trim().to_string()));
    }
    Ok(pairs)
}

/// Removes `--config <file>` from `args` and splices the file's settings in right
/// after the subcommand name.
pub fn expand(args: Vec<OsString>, cmd: &Command) -> Result<Vec<OsString>, String> {
    let Some(sub_pos) = args
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|p| p + 1)
    else {
        return Ok(args);
    };
    let mut rest: Vec<OsString> = Vec::new();
    let mut config: Option<OsString> = None;
    let mut it = args[sub_pos + 1..].iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            config = Some(it.next().cloned().ok_or("--config needs a file path")?);
        } else if let Some(path) = s.strip_prefix("--config=") {
            config = Some(path.into());
        } else {
            rest.push(a.clone());
        }
    }
    let Some(config) = config else {
        return Ok(args);
    };
    let name = args[sub_pos].to_string_lossy().into_owned();
    let sub = cmd
        .find_subcommand(&name)
        .ok_or_else(|| format!("unknown subcommand `{name}`"))?;
    let path = Path::new(&config);
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;

    let mut spliced = Vec::new();
    for (key, value) in parse_pairs(&text)? {
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()) && a.get_id() != "config")
            .ok_or_else(|| format!("config key `{key}` is not a flag of `{name}`"))?;
        if arg.get_action().takes_values() {
            spliced.push(OsString::from(format!("--{key}")));
            spliced.push(OsString::from(value));
        } else {
            match value.as_str() {
                "true" => spliced.push(OsString::from(format!("--{key}"))),
                "false" => {}
                other => return Err(format!("config key `{key}` expects true or false, got `{other}`")),
            }
        }
    }
    let mut out = args[..=sub_pos].to_vec();
    out.extend(spliced);
    out.extend(rest);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_with_comments() {
        let p = parse_pairs("# header\nepochs = 5\n\nw_hypo=3.3 # trailing\n").unwrap();
        assert_eq!(
            p,
            vec![("epochs".into(), "5".into()), ("w-hypo".into(), "3.3".into())]
        );
        assert!(parse_pairs("no equals sign").is_err());
        assert!(parse_pairs(" = 4").is_err());
    }
}
