//! `--config FILE` support. The file holds `key = value` lines naming long
//! flags of the chosen subcommand (`#` starts a comment). Its entries are
//! spliced in front of the explicit flags, which therefore win.

use std::ffi::OsString;
use std::path::Path;

use clap::CommandFactory;

use crate::cli::Cli;
use crate::error::{CliError, CliResult};

/// Parses `key = value` lines into pairs.
pub fn parse(text: &str) -> CliResult<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Validation(format!(
                "config line {}: expected key=value, got {raw:?}",
                i + 1
            )));
        };
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        pairs.push((key, value.trim().to_string()));
    }
    Ok(pairs)
}

/// Flags for `subcommand` equivalent to `pairs`; unknown keys are rejected.
pub fn to_args(subcommand: &str, pairs: &[(String, String)]) -> CliResult<Vec<OsString>> {
    let root = Cli::command();
    let sub = root
        .find_subcommand(subcommand)
        .ok_or_else(|| CliError::Validation(format!("unknown subcommand {subcommand:?}")))?;
    let mut args = Vec::new();
    for (key, value) in pairs {
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long().is_some_and(|l| l.replace('_', "-") == *key) && key != "config")
            .ok_or_else(|| {
                CliError::Validation(format!("unknown config key `{key}` for `{subcommand}`"))
            })?;
        let flag = format!("--{}", arg.get_long().unwrap_or_default());
        if arg.get_action().takes_values() {
            args.push(flag.into());
            args.push(value.into());
        } else {
            match value.to_ascii_lowercase().as_str() {
                "true" | "1" | "yes" => args.push(flag.into()),
                "false" | "0" | "no" => {}
                _ => {
                    return Err(CliError::Validation(format!(
                        "config key `{key}` expects true or false, got {value:?}"
                    )))
                }
            }
        }
    }
    Ok(args)
}

/// Returns `argv` with the contents of any `--config FILE` spliced in
/// directly after the subcommand name.
pub fn expand(argv: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let Some(sub_pos) = argv
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
    else {
        return Ok(argv);
    };
    let sub_pos = sub_pos + 1;
    let mut path = None;
    let mut i = sub_pos + 1;
    while i < argv.len() {
        let a = argv[i].to_string_lossy();
        if a == "--config" {
            path = argv.get(i + 1).cloned();
            i += 2;
            continue;
        }
        if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.into());
        }
        i += 1;
    }
    let Some(path) = path else {
        return Ok(argv);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let subcommand = argv[sub_pos].to_string_lossy().into_owned();
    let extra = to_args(&subcommand, &parse(&text)?)?;
    let mut out = argv[..=sub_pos].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[sub_pos + 1..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: Vec<OsString>) -> Vec<String> {
        v.into_iter().map(|s| s.into_string().unwrap()).collect()
    }

    #[test]
    fn parses_pairs_and_comments() {
        let pairs = parse("# recipe\nL = 20\n\neta_db=20  # loss\n--optimize=true\n").unwrap();
        assert_eq!(
            pairs,
            [("L", "20"), ("eta-db", "20"), ("optimize", "true")]
                .map(|(a, b)| (a.to_string(), b.to_string()))
        );
        assert!(parse("no equals sign").is_err());
    }

    #[test]
    fn maps_to_flags() {
        let pairs = parse("L=2\noptimize=true\nerror-rate=0.03").unwrap();
        assert_eq!(
            strings(to_args("keyrate", &pairs).unwrap()),
            ["--L", "2", "--optimize", "--error-rate", "0.03"]
        );
        let off = parse("optimize=false").unwrap();
        assert!(to_args("keyrate", &off).unwrap().is_empty());
    }

    #[test]
    fn rejects_unknown_keys() {
        let pairs = parse("blocks=10").unwrap();
        assert!(matches!(
            to_args("keyrate", &pairs),
            Err(CliError::Validation(_))
        ));
        let nested = parse("config=other.txt").unwrap();
        assert!(to_args("keyrate", &nested).is_err());
    }

    #[test]
    fn no_config_leaves_args_alone() {
        let argv: Vec<OsString> = ["dqps", "rtag", "--L", "2"].map(OsString::from).to_vec();
        assert_eq!(expand(argv.clone()).unwrap(), argv);
    }
}
