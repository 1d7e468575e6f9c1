//! CSV time series and `key=value` summaries.

use std::fmt::Write as _;
use std::path::Path;

use super::CliError;
use crate::diagnostics::DiagnosticsRow;

pub const CSV_HEADER: &str =
    "t,gap,lt_gap,dist_min_norm,dist_center,energy_E,energy_Ehat,delta,theta,speed,residual_x,residual_y";

const NA: &str = "NA";

/// Shortest decimal that parses back to the same `f64`. Plain notation for
/// moderate magnitudes, exponent notation otherwise.
pub fn format_float(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn format_opt(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), format_float)
}

fn row_fields(r: &DiagnosticsRow) -> [Option<f64>; 12] {
    [
        Some(r.t),
        r.gap,
        r.lt_gap,
        r.dist_min_norm,
        r.dist_center,
        r.energy_e,
        r.energy_ehat,
        Some(r.delta),
        Some(r.theta),
        Some(r.speed),
        Some(r.residual_x),
        Some(r.residual_y),
    ]
}

/// True when every present field is finite.
pub fn row_is_finite(r: &DiagnosticsRow) -> bool {
    row_fields(r).iter().flatten().all(|v| v.is_finite())
}

pub fn csv_string(rows: &[DiagnosticsRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let line: Vec<String> = row_fields(r).into_iter().map(format_opt).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<DiagnosticsRow>, CliError> {
    let bad = |line: usize, msg: &str| CliError::Csv(format!("line {line}: {msg}"));
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(bad(1, "unexpected header"));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let fields: Vec<Option<f64>> = line
                .split(',')
                .map(|f| match f {
                    NA => Ok(None),
                    f => f.parse::<f64>().map(Some),
                })
                .collect::<Result<_, _>>()
                .map_err(|e| bad(i + 2, &e.to_string()))?;
            let [t, gap, lt_gap, dist_min_norm, dist_center, energy_e, energy_ehat, delta, theta, speed, residual_x, residual_y] =
                fields[..]
            else {
                return Err(bad(i + 2, "expected 12 fields"));
            };
            let req = |v: Option<f64>| v.ok_or_else(|| bad(i + 2, "required field is NA"));
            Ok(DiagnosticsRow {
                t: req(t)?,
                gap,
                lt_gap,
                dist_min_norm,
                dist_center,
                energy_e,
                energy_ehat,
                delta: req(delta)?,
                theta: req(theta)?,
                speed: req(speed)?,
                residual_x: req(residual_x)?,
                residual_y: req(residual_y)?,
            })
        })
        .collect()
}

pub fn read_csv(path: &Path) -> Result<Vec<DiagnosticsRow>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(&text)
}

pub fn key_values_string(kv: &[(String, String)]) -> String {
    kv.iter().fold(String::new(), |mut s, (k, v)| {
        let _ = writeln!(s, "{k}={v}");
        s
    })
}

pub fn parse_key_values(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}
