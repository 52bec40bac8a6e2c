//! `--config run.json`: a JSON object of flags, or a manifest from an earlier run.
//!
//! Keys are flag names (`grid`, `second_only`, ...). The subcommand comes from
//! the `command` key unless one is given on the command line. Flags given on
//! the command line are appended after the file's, so they win.

use anyhow::{bail, Context, Result};
use serde_json::{Map, Value};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

pub struct Expanded {
    pub args: Vec<OsString>,
    /// Directory that relative paths resolve against.
    pub base: PathBuf,
}

fn flag_value(v: &Value) -> Result<Option<String>> {
    Ok(match v {
        Value::Null | Value::Bool(false) => None,
        Value::Bool(true) => Some(String::new()),
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Array(items) => {
            let parts: Result<Vec<String>> = items
                .iter()
                .map(|x| match x {
                    Value::String(s) => Ok(s.clone()),
                    Value::Number(n) => Ok(n.to_string()),
                    other => bail!("unsupported list element {other}"),
                })
                .collect();
            Some(parts?.join(","))
        }
        Value::Object(_) => bail!("nested objects are not flags"),
    })
}

fn to_flags(obj: &Map<String, Value>) -> Result<Vec<OsString>> {
    let mut out = Vec::new();
    for (k, v) in obj {
        if k == "command" {
            continue;
        }
        let name = k.replace('_', "-");
        match flag_value(v).with_context(|| format!("config key '{k}'"))? {
            None => {}
            Some(s) if s.is_empty() && v.is_boolean() => out.push(format!("--{name}").into()),
            Some(s) => out.push(format!("--{name}={s}").into()),
        }
    }
    Ok(out)
}

/// Splice the config file (if any) into the argument list.
pub fn expand(raw: Vec<OsString>, subcommands: &[&str]) -> Result<Expanded> {
    let mut rest = Vec::new();
    let mut config = None;
    let mut it = raw.into_iter();
    let bin = it.next().unwrap_or_else(|| "oqcv".into());
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            config = Some(PathBuf::from(it.next().context("--config needs a path")?));
        } else if let Some(p) = s.strip_prefix("--config=") {
            config = Some(PathBuf::from(p));
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config else {
        return Ok(Expanded { args: std::iter::once(bin).chain(rest).collect(), base: PathBuf::from(".") });
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let Value::Object(top) = value else { bail!("{} is not a JSON object", path.display()) };
    // a manifest carries the flags under "inputs"
    let flags = match top.get("inputs") {
        Some(Value::Object(inputs)) => inputs.clone(),
        _ => top.clone(),
    };
    let mut cmd = top.get("command").and_then(Value::as_str).map(str::to_string);
    if let Some(first) = rest.first() {
        let first = first.to_string_lossy();
        if subcommands.contains(&first.as_ref()) {
            cmd = Some(first.into_owned());
            rest.remove(0);
        }
    }
    let Some(cmd) = cmd else { bail!("{} has no \"command\" and none was given", path.display()) };
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let base = if base.as_os_str().is_empty() { PathBuf::from(".") } else { base };
    let mut args = vec![bin, cmd.into()];
    args.extend(to_flags(&flags)?);
    args.extend(rest);
    Ok(Expanded { args, base })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn strs(v: &[OsString]) -> Vec<String> {
        v.iter().map(|s| s.to_string_lossy().into_owned()).collect()
    }

    #[test]
    fn flags_from_object() {
        let Value::Object(m) = json!({"command": "sweep", "nbars": [0, 1.5], "family": "thermal", "full": true, "out": null, "quiet": false})
        else {
            unreachable!()
        };
        let f = strs(&to_flags(&m).unwrap());
        assert_eq!(f, ["--family=thermal", "--full", "--nbars=0,1.5"]);
    }

    #[test]
    fn manifest_and_override() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        std::fs::write(&p, r#"{"command":"negativity","version":"0.1.0","inputs":{"state":"vacuum","tol":0.001}}"#).unwrap();
        let e = expand(
            vec!["oqcv".into(), "--config".into(), p.clone().into(), "--tol=0.01".into()],
            &["negativity"],
        )
        .unwrap();
        assert_eq!(strs(&e.args), ["oqcv", "negativity", "--state=vacuum", "--tol=0.001", "--tol=0.01"]);
        assert_eq!(e.base, dir.path());
        assert!(expand(vec!["oqcv".into(), "--config".into()], &[]).is_err());
    }
}
