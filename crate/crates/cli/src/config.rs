//! Settings resolution: command-line flags override the config file, which
//! overrides built-in defaults.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{invalid, CliResult, Classify};

const SECTIONS: [&str; 5] = ["sample", "train", "predict", "evaluate", "bench"];

/// Merges `defaults ⊕ file ⊕ flags` into `S`. A config file either holds one
/// object per subcommand (`{"train": {...}}`) or a single flat object for the
/// command being run. Unknown keys are rejected by `S`.
pub fn resolve<S, F>(section: &str, file: Option<&Path>, flags: &F) -> CliResult<S>
where
    S: Serialize + DeserializeOwned + Default,
    F: Serialize,
{
    let mut merged = as_object(serde_json::to_value(S::default()).runtime()?);
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| crate::error::CliError::Invalid(format!("config {}: {e}", path.display())))?;
        let doc: Value = serde_json::from_str(&text).invalid()?;
        let Value::Object(doc) = doc else {
            return invalid(format!("config {} must be a JSON object", path.display()));
        };
        let layer = if doc.keys().any(|k| SECTIONS.contains(&k.as_str())) {
            match doc.get(section) {
                Some(Value::Object(m)) => m.clone(),
                Some(_) => return invalid(format!("config section `{section}` must be an object")),
                None => Map::new(),
            }
        } else {
            doc
        };
        merged.extend(layer);
    }
    let flags = as_object(serde_json::to_value(flags).runtime()?);
    merged.extend(flags.into_iter().filter(|(_, v)| !v.is_null()));
    serde_json::from_value(Value::Object(merged)).map_err(|e| crate::error::CliError::Invalid(format!("settings: {e}")))
}

fn as_object(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => Map::new(),
    }
}

/// Required setting that has no default.
pub fn required<'a, T>(v: &'a Option<T>, flag: &str) -> CliResult<&'a T> {
    match v {
        Some(v) => Ok(v),
        None => invalid(format!("missing required setting `--{flag}`")),
    }
}

/// `path` with `suffix` appended to its file name: `d.csv` → `d.csv.json`.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
    #[serde(default, deny_unknown_fields)]
    struct S {
        a: u32,
        b: Option<String>,
        c: bool,
    }

    #[derive(Serialize)]
    struct F {
        a: Option<u32>,
        b: Option<String>,
        c: Option<bool>,
    }

    fn file(text: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), text).unwrap();
        f
    }

    #[test]
    fn precedence() {
        let none = F { a: None, b: None, c: None };
        assert_eq!(resolve::<S, _>("train", None, &none).unwrap(), S::default());
        let f = file(r#"{"train": {"a": 3, "b": "x"}, "predict": {"a": 9}}"#);
        let s: S = resolve("train", Some(f.path()), &none).unwrap();
        assert_eq!((s.a, s.b.as_deref()), (3, Some("x")));
        let flags = F { a: Some(5), b: None, c: Some(true) };
        let s: S = resolve("train", Some(f.path()), &flags).unwrap();
        assert_eq!((s.a, s.b.as_deref(), s.c), (5, Some("x"), true));
        let flat = file(r#"{"a": 7}"#);
        assert_eq!(resolve::<S, _>("train", Some(flat.path()), &none).unwrap().a, 7);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_files() {
        let none = F { a: None, b: None, c: None };
        let f = file(r#"{"train": {"zzz": 1}}"#);
        assert!(resolve::<S, _>("train", Some(f.path()), &none).is_err());
        let f = file("[1, 2]");
        assert!(resolve::<S, _>("train", Some(f.path()), &none).is_err());
        assert!(resolve::<S, _>("train", Some(Path::new("/nonexistent/c.json")), &none).is_err());
    }

    #[test]
    fn sidecar_names() {
        assert_eq!(sidecar(Path::new("out/d.csv"), ".json"), PathBuf::from("out/d.csv.json"));
    }
}
