//! Row serialization. Floats are printed with 17 significant digits so
//! repeated runs are byte-identical and values round-trip exactly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{ConfigError, Format, RunConfig};
use super::runner::{Resolved, ResultRow};

pub const CSV_HEADER: &str = "method,alpha,m,eps_abs,eps_rel,err_l2,bound_rhs,satisfied,runtime_ms";

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_field(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn json_field(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => num(x),
        _ => "null".into(),
    }
}

pub fn to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.method,
            num(r.alpha),
            r.m,
            csv_field(r.eps_abs),
            csv_field(r.eps_rel),
            csv_field(r.err_l2),
            csv_field(r.bound_rhs),
            r.satisfied.map(|s| s.as_str()).unwrap_or_default(),
            csv_field(r.runtime_ms),
        );
    }
    out
}

pub fn to_json(rows: &[ResultRow]) -> String {
    let mut out = String::from("[\n");
    for (i, r) in rows.iter().enumerate() {
        let satisfied = match r.satisfied {
            None => "null".to_string(),
            Some(super::runner::Status::Failed) => "\"failed\"".to_string(),
            Some(s) => s.as_str().to_string(),
        };
        let _ = write!(
            out,
            "  {{\"method\": \"{}\", \"alpha\": {}, \"m\": {}, \"eps_abs\": {}, \"eps_rel\": {}, \
             \"err_l2\": {}, \"bound_rhs\": {}, \"satisfied\": {}, \"runtime_ms\": {}}}",
            r.method,
            num(r.alpha),
            r.m,
            json_field(r.eps_abs),
            json_field(r.eps_rel),
            json_field(r.err_l2),
            json_field(r.bound_rhs),
            satisfied,
            json_field(r.runtime_ms),
        );
        out.push_str(if i + 1 < rows.len() { ",\n" } else { "\n" });
    }
    out.push_str("]\n");
    out
}

pub fn render(rows: &[ResultRow], format: Format) -> String {
    match format {
        Format::Csv => to_csv(rows),
        Format::Json => to_json(rows),
    }
}

/// `<out>.config.json` next to the results file.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".config.json");
    PathBuf::from(name)
}

#[derive(Serialize)]
struct Sidecar<'a> {
    config: &'a RunConfig,
    resolved: &'a Resolved,
}

pub fn sidecar_json(config: &RunConfig, resolved: &Resolved) -> String {
    let mut s =
        serde_json::to_string_pretty(&Sidecar { config, resolved }).expect("plain data serializes");
    s.push('\n');
    s
}

fn write_file(path: &Path, text: &str) -> Result<(), ConfigError> {
    std::fs::write(path, text).map_err(|source| ConfigError::Io {
        path: path.into(),
        source,
    })
}

/// Write the results and, for file output, the resolved-config sidecar.
pub fn write_outputs(
    out: Option<&Path>,
    format: Format,
    rows: &[ResultRow],
    config: &RunConfig,
    resolved: &Resolved,
) -> Result<(), ConfigError> {
    let body = render(rows, format);
    match out {
        Some(path) => {
            write_file(path, &body)?;
            write_file(&sidecar_path(path), &sidecar_json(config, resolved))?;
        }
        None => print!("{body}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::runner::Status;

    fn row(satisfied: Option<Status>) -> ResultRow {
        ResultRow {
            method: "ra-jacobi".into(),
            alpha: 0.5,
            m: 8,
            eps_abs: Some(1.234e-5),
            eps_rel: Some(0.1 + 0.2),
            err_l2: None,
            bound_rhs: Some(3.0),
            satisfied,
            runtime_ms: None,
        }
    }

    #[test]
    fn csv_layout() {
        let s = to_csv(&[
            row(Some(Status::Satisfied)),
            row(Some(Status::Failed)),
            row(None),
        ]);
        let lines: Vec<_> = s.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(
            lines[1],
            "ra-jacobi,5.0000000000000000e-1,8,1.2340000000000000e-5,3.0000000000000004e-1,,3.0000000000000000e0,true,"
        );
        assert!(lines[2].ends_with(",failed,"));
        assert!(lines[3].ends_with(",,"));
    }

    #[test]
    fn json_round_trips() {
        let rows = vec![
            row(Some(Status::Violated)),
            row(Some(Status::Failed)),
            row(None),
        ];
        let back: Vec<ResultRow> = serde_json::from_str(&to_json(&rows)).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(
            sidecar_path(Path::new("out/r.csv")),
            PathBuf::from("out/r.csv.config.json")
        );
    }
}
