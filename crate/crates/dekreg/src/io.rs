//! File I/O: two-column CSV datasets, curve/table writers, JSON sidecars.
//!
//! All machine-readable output is bit-stable: '.' decimal separator, LF line
//! endings, UTF-8, a header row, and floats at 17 significant digits so
//! values round-trip exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::localfit::{Dataset, FitCurve};

/// Render a float with 17 significant digits (exact f64 round-trip).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Render a float for human tables.
pub fn fmt_human(v: f64) -> String {
    format!("{v:.4}")
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Write `content` to `path` with LF endings (content must already use \n).
pub fn write_text(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content.as_bytes()).map_err(|e| io_err(path, e))
}

/// Read a two-column numeric CSV with header `x,y` or `time,volume`.
pub fn read_xy_csv(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let display = path.display().to_string();
    let csv_err = |line: usize, reason: String| Error::Csv {
        path: display.clone(),
        line,
        reason,
    };

    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut saw_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if !saw_header {
            let header: Vec<String> = line
                .split(',')
                .map(|c| c.trim().to_ascii_lowercase())
                .collect();
            if header != ["x", "y"] && header != ["time", "volume"] {
                return Err(csv_err(
                    line_no,
                    format!("expected header 'x,y' or 'time,volume', found '{line}'"),
                ));
            }
            saw_header = true;
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 2 {
            return Err(csv_err(
                line_no,
                format!("expected 2 columns, found {}", cols.len()),
            ));
        }
        let xv: f64 = cols[0]
            .parse()
            .map_err(|_| csv_err(line_no, format!("bad number '{}'", cols[0])))?;
        let yv: f64 = cols[1]
            .parse()
            .map_err(|_| csv_err(line_no, format!("bad number '{}'", cols[1])))?;
        x.push(xv);
        y.push(yv);
    }
    if !saw_header {
        return Err(csv_err(1, "file is empty".into()));
    }
    if x.is_empty() {
        return Err(csv_err(2, "no data rows".into()));
    }
    Dataset::new(x, y)
}

/// Write a dataset as a two-column CSV with the given header names.
pub fn write_xy_csv(path: &Path, data: &Dataset, header: (&str, &str)) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "{},{}", header.0, header.1);
    for i in 0..data.len() {
        let (x, y) = data.point(i);
        let _ = writeln!(out, "{},{}", fmt_f64(x), fmt_f64(y));
    }
    write_text(path, &out)
}

/// Write a fitted curve as `grid,fitted,defined`; undefined points carry
/// `NA` and a zero flag.
pub fn write_fit_curve_csv(path: &Path, curve: &FitCurve) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "grid,fitted,defined");
    for (g, v) in curve.grid.iter().zip(&curve.values) {
        match v {
            Some(v) => {
                let _ = writeln!(out, "{},{},1", fmt_f64(*g), fmt_f64(*v));
            }
            None => {
                let _ = writeln!(out, "{},NA,0", fmt_f64(*g));
            }
        }
    }
    write_text(path, &out)
}

/// Write several curves as one long-format CSV: `method,grid,fitted,defined`.
pub fn write_curves_csv(path: &Path, curves: &[FitCurve]) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "method,grid,fitted,defined");
    for c in curves {
        for (g, v) in c.grid.iter().zip(&c.values) {
            match v {
                Some(v) => {
                    let _ = writeln!(out, "{},{},{},1", c.method, fmt_f64(*g), fmt_f64(*v));
                }
                None => {
                    let _ = writeln!(out, "{},{},NA,0", c.method, fmt_f64(*g));
                }
            }
        }
    }
    write_text(path, &out)
}

/// Serialize a JSON sidecar with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::invalid(format!("sidecar serialization failed: {e}")))?;
    text.push('\n');
    write_text(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use tempfile::tempdir;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        /// 17 significant digits round-trip any finite double exactly.
        #[test]
        fn float_formatting_round_trips(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let back: f64 = fmt_f64(v).parse().unwrap();
            prop_assert_eq!(back.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn xy_csv_round_trips_bit_exactly() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let data = Dataset::new(
            vec![0.1, 0.2, std::f64::consts::PI],
            vec![1.0 / 3.0, -2.5e-17, 4.0],
        )
        .unwrap();
        write_xy_csv(&path, &data, ("x", "y")).unwrap();
        let back = read_xy_csv(&path).unwrap();
        assert_eq!(data, back);
    }

    #[test]
    fn accepts_time_volume_header() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("tumor.csv");
        write_text(&path, "time,volume\n21,0.05\n25,0.09\n").unwrap();
        let data = read_xy_csv(&path).unwrap();
        assert_eq!(data.x(), &[21.0, 25.0]);
    }

    #[test]
    fn malformed_rows_name_the_line() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");

        write_text(&path, "x,y\n1.0,2.0\noops,3.0\n").unwrap();
        match read_xy_csv(&path).unwrap_err() {
            Error::Csv { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other}"),
        }

        write_text(&path, "a,b\n1,2\n").unwrap();
        match read_xy_csv(&path).unwrap_err() {
            Error::Csv { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected error {other}"),
        }

        write_text(&path, "x,y\n1.0\n").unwrap();
        assert!(matches!(read_xy_csv(&path), Err(Error::Csv { .. })));
    }

    #[test]
    fn missing_file_is_an_io_error() {
        assert!(matches!(
            read_xy_csv(Path::new("/nonexistent/nope.csv")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn curve_csv_flags_undefined_points() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        let curve = FitCurve {
            grid: vec![0.0, 1.0],
            values: vec![Some(2.0), None],
            h: Some(0.3),
            method: "NW".into(),
        };
        write_fit_curve_csv(&path, &curve).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "grid,fitted,defined");
        assert!(lines[1].ends_with(",1"));
        assert!(lines[2].ends_with("NA,0"));
    }
}
