//! Experiment result rows and CSV emission.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::BenchError;

/// The pinned CSV schema every experiment emits.
pub const CSV_HEADER: &str =
    "experiment,mode,param,rep,wall_ms,records_scanned,results,bytes_delivered";

/// One measurement: an experiment point under one mode and repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub experiment: String,
    pub mode: String,
    pub param: String,
    pub rep: u32,
    pub wall_ms: f64,
    pub records_scanned: u64,
    pub results: u64,
    pub bytes_delivered: u64,
}

pub fn write_csv<W: Write>(out: W, rows: &[ExperimentRow]) -> Result<(), BenchError> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row).map_err(|e| BenchError::Csv(e.to_string()))?;
    }
    writer.flush().map_err(|e| BenchError::Csv(e.to_string()))?;
    Ok(())
}

pub fn write_csv_file(path: &Path, rows: &[ExperimentRow]) -> Result<(), BenchError> {
    let file = std::fs::File::create(path)
        .map_err(|e| BenchError::Csv(format!("{}: {e}", path.display())))?;
    write_csv(file, rows)
}

/// Median of the wall times of the rows selected by the filter.
pub fn median_wall_ms<'a>(
    rows: impl IntoIterator<Item = &'a ExperimentRow>,
    mode: &str,
    param: &str,
) -> Option<f64> {
    let mut walls: Vec<f64> = rows
        .into_iter()
        .filter(|r| r.mode == mode && r.param == param)
        .map(|r| r.wall_ms)
        .collect();
    if walls.is_empty() {
        return None;
    }
    walls.sort_by(f64::total_cmp);
    Some(walls[walls.len() / 2])
}

/// Fastest wall time of the rows selected by the filter: the
/// least-interference repetition, the robust estimator on shared hosts.
pub fn min_wall_ms<'a>(
    rows: impl IntoIterator<Item = &'a ExperimentRow>,
    mode: &str,
    param: &str,
) -> Option<f64> {
    rows.into_iter()
        .filter(|r| r.mode == mode && r.param == param)
        .map(|r| r.wall_ms)
        .min_by(f64::total_cmp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(mode: &str, param: &str, rep: u32, wall: f64) -> ExperimentRow {
        ExperimentRow {
            experiment: "x".into(),
            mode: mode.into(),
            param: param.into(),
            rep,
            wall_ms: wall,
            records_scanned: 10,
            results: 3,
            bytes_delivered: 100,
        }
    }

    #[test]
    fn header_matches_pinned_schema() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[row("m", "1", 0, 1.5)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        assert_eq!(lines.next().unwrap(), "x,m,1,0,1.5,10,3,100");
    }

    #[test]
    fn median_selects_mode_and_param() {
        let rows = [
            row("a", "1", 0, 5.0),
            row("a", "1", 1, 1.0),
            row("a", "1", 2, 3.0),
            row("b", "1", 0, 100.0),
            row("a", "2", 0, 200.0),
        ];
        assert_eq!(median_wall_ms(rows.iter(), "a", "1"), Some(3.0));
        assert_eq!(median_wall_ms(rows.iter(), "c", "1"), None);
    }
}
