use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::Dataset;
use crate::{Error, Result};

/// Feature count of the smartphone activity-recognition dataset.
pub const ACTIVITY_FEATURES: usize = 561;

/// Column layout: a header row, `d` numeric feature columns, then `label`
/// and `subject`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvProfile {
    /// Exactly [`ACTIVITY_FEATURES`] feature columns.
    Activity,
    /// Any positive number of feature columns.
    Generic,
}

pub fn load_dataset(path: impl AsRef<Path>, profile: CsvProfile) -> Result<Dataset> {
    parse_dataset(File::open(path)?, profile)
}

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line: line as usize,
        message: message.into(),
    }
}

pub fn parse_dataset<R: Read>(input: R, profile: CsvProfile) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut records = reader.records();

    let header = match records.next() {
        None => return Err(parse_err(1, "empty file")),
        Some(h) => h.map_err(|e| parse_err(1, e.to_string()))?,
    };
    let width = header.len();
    if width < 3 {
        return Err(parse_err(1, "header needs feature columns, `label` and `subject`"));
    }
    if !header[width - 2].eq_ignore_ascii_case("label") {
        return Err(parse_err(1, "missing `label` column (second to last)"));
    }
    if !header[width - 1].eq_ignore_ascii_case("subject") {
        return Err(parse_err(1, "missing `subject` column (last)"));
    }
    let d = width - 2;
    if profile == CsvProfile::Activity && d != ACTIVITY_FEATURES {
        return Err(parse_err(
            1,
            format!("activity profile needs {ACTIVITY_FEATURES} feature columns, header has {d}"),
        ));
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut subjects = Vec::new();
    for record in records {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != width {
            return Err(parse_err(
                line,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        for (j, field) in record.iter().take(d).enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("feature {j} is not numeric: {field:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("feature {j} is not finite")));
            }
            values.push(v);
        }
        let label = &record[d];
        if label.is_empty() {
            return Err(parse_err(line, "empty label"));
        }
        labels.push(label.to_string());
        let subject = record[d + 1]
            .parse::<u32>()
            .map_err(|_| parse_err(line, format!("subject is not an integer: {:?}", &record[d + 1])))?;
        subjects.push(subject);
    }
    if labels.is_empty() {
        return Err(parse_err(2, "no data rows"));
    }
    let features = Array2::from_shape_vec((labels.len(), d), values).expect("row widths checked");
    Dataset::new(features, labels, subjects)
}

/// Writes the same schema [`parse_dataset`] reads, with `f{j}` feature
/// headers. Values use the shortest round-trip representation.
pub fn write_dataset<W: Write>(dataset: &Dataset, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..dataset.dim()).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    header.push("subject".into());
    writer.write_record(&header).map_err(csv_to_io)?;
    for i in 0..dataset.len() {
        let mut row: Vec<String> = dataset.row(i).iter().map(|v| v.to_string()).collect();
        row.push(dataset.labels()[i].clone());
        row.push(dataset.subjects()[i].to_string());
        writer.write_record(&row).map_err(csv_to_io)?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_to_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn activity_csv(rows: usize, width_override: Option<(usize, usize)>) -> String {
        let mut s = String::new();
        let header: Vec<String> = (0..ACTIVITY_FEATURES).map(|j| format!("f{j}")).collect();
        s.push_str(&header.join(","));
        s.push_str(",label,subject\n");
        for r in 0..rows {
            let w = match width_override {
                Some((row, w)) if row == r => w,
                _ => ACTIVITY_FEATURES,
            };
            let feats: Vec<String> = (0..w).map(|j| format!("{}", (r + j) as f64 * 0.01)).collect();
            s.push_str(&feats.join(","));
            s.push_str(&format!(",walking,{}\n", r % 3 + 1));
        }
        s
    }

    #[test]
    fn parses_activity_profile() {
        let ds = parse_dataset(activity_csv(4, None).as_bytes(), CsvProfile::Activity).unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.dim(), 561);
        assert_eq!(ds.subjects(), &[1, 2, 3, 1]);
        assert_eq!(ds.labels()[0], "walking");
    }

    #[test]
    fn short_row_is_rejected_with_line_number() {
        let err = parse_dataset(activity_csv(3, Some((1, 560))).as_bytes(), CsvProfile::Activity)
            .unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn generic_profile_accepts_any_width() {
        let text = "a,b,label,subject\n1,2,x,1\n3,4,y,2\n";
        let ds = parse_dataset(text.as_bytes(), CsvProfile::Generic).unwrap();
        assert_eq!((ds.len(), ds.dim()), (2, 2));
        assert!(parse_dataset(text.as_bytes(), CsvProfile::Activity).is_err());
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            parse_dataset("".as_bytes(), CsvProfile::Generic),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_dataset("a,b,label,subject\n".as_bytes(), CsvProfile::Generic),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_dataset("a,b,c\n1,2,3\n".as_bytes(), CsvProfile::Generic),
            Err(Error::Parse { line: 1, .. })
        ));
        let err = parse_dataset("a,label,subject\n1,x,1\nzz,x,1\n".as_bytes(), CsvProfile::Generic)
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn write_then_parse_recovers_dataset() {
        let text = "a,b,label,subject\n0.1,-2.5,x,1\n3e-7,4,y,2\n";
        let ds = parse_dataset(text.as_bytes(), CsvProfile::Generic).unwrap();
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf).unwrap();
        let back = parse_dataset(buf.as_slice(), CsvProfile::Generic).unwrap();
        assert_eq!(back, ds);
    }
}
