//! Loading joint distributions from JSON or headerless CSV files.

use std::fs;
use std::path::Path;

use pinertia::dist::INGEST_TOL;
use pinertia::{load_joint, JointDistribution};
use serde::Deserialize;

use crate::CliError;

#[derive(Deserialize)]
struct PmfFile {
    pmf: Vec<Vec<f64>>,
}

fn parse_json(text: &str) -> Result<Vec<Vec<f64>>, CliError> {
    let file: PmfFile =
        serde_json::from_str(text).map_err(|e| CliError::Input(format!("bad JSON input: {e}")))?;
    Ok(file.pmf)
}

fn parse_csv(text: &str) -> Result<Vec<Vec<f64>>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Input(format!("bad CSV input: {e}")))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(c, field)| {
                field.parse::<f64>().map_err(|_| {
                    CliError::Input(format!(
                        "row {}, column {}: not a number: {field:?}",
                        r + 1,
                        c + 1
                    ))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Rows of a JSON `{"pmf": [[...]]}` document, or of a CSV grid when the
/// file ends in `.csv` or does not parse as JSON.
pub fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let is_csv = path
        .extension()
        .is_some_and(|ext| ext.eq_ignore_ascii_case("csv"));
    if is_csv || !text.trim_start().starts_with('{') {
        parse_csv(&text)
    } else {
        parse_json(&text)
    }
}

pub fn load(path: &Path) -> Result<JointDistribution, CliError> {
    let rows = read_rows(path)?;
    load_joint(&rows, INGEST_TOL).map_err(|e| CliError::Input(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_and_csv_agree() {
        let json = parse_json(r#"{"pmf": [[0.45, 0.05], [0.05, 0.45]]}"#).unwrap();
        let csv = parse_csv("0.45,0.05\n0.05, 0.45\n").unwrap();
        assert_eq!(json, csv);
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(parse_csv("0.5,abc\n"), Err(CliError::Input(_))));
        assert!(matches!(
            parse_json(r#"{"rows": []}"#),
            Err(CliError::Input(_))
        ));
    }
}
