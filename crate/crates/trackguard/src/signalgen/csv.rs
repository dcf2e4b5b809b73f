//! Experiment CSV format.
//!
//! ```text
//! # trackguard-csv v1
//! label=Anomaly10;sample_rate=50;seed=1;onset_index=400;critical_index=1600;recovery_index=1600
//! index,cat,cal
//! 0,1.018216944839099,0.9850667587008541
//! ...
//! ```
//!
//! Nominal records omit the three index keys. Amplitudes are written with
//! shortest round-trip formatting, so `read_csv(write_csv(r)) == r`
//! bit-for-bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::{Label, PhaseMarkers, SignalRecord};

pub const CSV_HEADER: &str = "# trackguard-csv v1";
pub const COLUMN_HEADER: &str = "index,cat,cal";

/// Renders a record in the experiment CSV format.
pub fn to_csv_string(record: &SignalRecord) -> Result<String> {
    record.validate()?;
    let mut out = String::with_capacity(32 * record.len() + 128);
    out.push_str(CSV_HEADER);
    out.push('\n');
    write!(
        out,
        "label={};sample_rate={};seed={}",
        record.label, record.sample_rate, record.seed
    )
    .expect("writing to a String cannot fail");
    if let Some(p) = record.phases {
        write!(
            out,
            ";onset_index={};critical_index={};recovery_index={}",
            p.onset_index, p.critical_index, p.recovery_index
        )
        .expect("writing to a String cannot fail");
    }
    out.push('\n');
    out.push_str(COLUMN_HEADER);
    out.push('\n');
    for (i, (cat, cal)) in record.cat.iter().zip(&record.cal).enumerate() {
        writeln!(out, "{i},{cat},{cal}").expect("writing to a String cannot fail");
    }
    Ok(out)
}

/// Writes a record to `path` in the experiment CSV format.
pub fn write_csv(record: &SignalRecord, path: &Path) -> Result<()> {
    let body = to_csv_string(record)?;
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Reads a record from `path`, validating the format line by line.
pub fn read_csv(path: &Path) -> Result<SignalRecord> {
    let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_csv_string(&body, &path.display().to_string())
}

/// Parses the experiment CSV format; `source` is used in error messages.
pub fn from_csv_string(body: &str, source: &str) -> Result<SignalRecord> {
    let err = |line: usize, message: String| Error::CsvParse {
        path: source.into(),
        line,
        message,
    };
    let mut lines = body.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| err(1, "empty file".to_string()))?;
    if header != CSV_HEADER {
        return Err(err(1, format!("expected header {CSV_HEADER:?}, got {header:?}")));
    }

    let (_, meta_line) = lines
        .next()
        .ok_or_else(|| err(2, "missing metadata line".to_string()))?;
    let mut label = None;
    let mut sample_rate = None;
    let mut seed = None;
    let mut onset = None;
    let mut critical = None;
    let mut recovery = None;
    for pair in meta_line.split(';') {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| err(2, format!("metadata entry {pair:?} is not key=value")))?;
        let parse_index = |value: &str| {
            value
                .parse::<usize>()
                .map_err(|_| err(2, format!("invalid {key} value {value:?}")))
        };
        match key {
            "label" => {
                label = Some(
                    value
                        .parse::<Label>()
                        .map_err(|e| err(2, e.to_string()))?,
                )
            }
            "sample_rate" => {
                sample_rate = Some(
                    value
                        .parse::<u32>()
                        .map_err(|_| err(2, format!("invalid sample_rate value {value:?}")))?,
                )
            }
            "seed" => {
                seed = Some(
                    value
                        .parse::<u64>()
                        .map_err(|_| err(2, format!("invalid seed value {value:?}")))?,
                )
            }
            "onset_index" => onset = Some(parse_index(value)?),
            "critical_index" => critical = Some(parse_index(value)?),
            "recovery_index" => recovery = Some(parse_index(value)?),
            _ => return Err(err(2, format!("unknown metadata key {key:?}"))),
        }
    }
    let label = label.ok_or_else(|| err(2, "missing label metadata".to_string()))?;
    let sample_rate =
        sample_rate.ok_or_else(|| err(2, "missing sample_rate metadata".to_string()))?;
    let seed = seed.ok_or_else(|| err(2, "missing seed metadata".to_string()))?;
    let phases = match (label, onset, critical, recovery) {
        (Label::Nominal, None, None, None) => None,
        (Label::Nominal, ..) => {
            return Err(err(2, "nominal record must not carry index metadata".to_string()))
        }
        (Label::Anomaly(_), Some(onset_index), Some(critical_index), Some(recovery_index)) => {
            Some(PhaseMarkers { onset_index, critical_index, recovery_index })
        }
        (Label::Anomaly(_), ..) => {
            return Err(err(
                2,
                "anomaly record requires onset_index, critical_index and recovery_index"
                    .to_string(),
            ))
        }
    };

    let (_, columns) = lines
        .next()
        .ok_or_else(|| err(3, "missing column header".to_string()))?;
    if columns != COLUMN_HEADER {
        return Err(err(3, format!("expected column header {COLUMN_HEADER:?}, got {columns:?}")));
    }

    let mut cat = Vec::new();
    let mut cal = Vec::new();
    for (line_idx, line) in lines {
        let line_no = line_idx + 1;
        let mut fields = line.split(',');
        let (Some(index), Some(cat_s), Some(cal_s), None) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(err(line_no, format!("expected 3 comma-separated fields, got {line:?}")));
        };
        let index: usize = index
            .parse()
            .map_err(|_| err(line_no, format!("invalid sample index {index:?}")))?;
        if index != cat.len() {
            return Err(err(
                line_no,
                format!("sample index {index} out of order (expected {})", cat.len()),
            ));
        }
        let parse_amp = |s: &str| -> Result<f64> {
            let v: f64 = s
                .parse()
                .map_err(|_| err(line_no, format!("invalid amplitude {s:?}")))?;
            if !v.is_finite() {
                return Err(err(line_no, format!("non-finite amplitude {s:?}")));
            }
            Ok(v)
        };
        cat.push(parse_amp(cat_s)?);
        cal.push(parse_amp(cal_s)?);
    }

    let record = SignalRecord { sample_rate, cat, cal, label, phases, seed };
    record.validate().map_err(|e| Error::CsvParse {
        path: source.into(),
        line: 2,
        message: e.to_string(),
    })?;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::super::{catalog::anomaly_class, generate_record, GeneratorConfig};
    use super::*;

    fn small_config() -> GeneratorConfig {
        GeneratorConfig {
            nominal_lead_samples: 30,
            anomaly_samples: 90,
            nominal_tail_samples: 15,
            ..Default::default()
        }
    }

    #[test]
    fn round_trip_preserves_records_exactly() {
        let config = small_config();
        let dir = tempfile::tempdir().unwrap();
        for (i, class) in [None, Some(anomaly_class(5).unwrap()), Some(anomaly_class(8).unwrap())]
            .iter()
            .enumerate()
        {
            let record = generate_record(class.as_ref(), &config, i as u64).unwrap();
            let path = dir.path().join(format!("r{i}.csv"));
            write_csv(&record, &path).unwrap();
            let back = read_csv(&path).unwrap();
            assert_eq!(back, record, "round trip must be exact");
        }
    }

    #[test]
    fn nominal_metadata_omits_index_keys() {
        let record = generate_record(None, &small_config(), 3).unwrap();
        let body = to_csv_string(&record).unwrap();
        let meta = body.lines().nth(1).unwrap();
        assert_eq!(meta, "label=Nominal;sample_rate=50;seed=3");
    }

    #[test]
    fn anomaly_metadata_contains_all_indices() {
        let class = anomaly_class(10).unwrap();
        let record = generate_record(Some(&class), &small_config(), 3).unwrap();
        let body = to_csv_string(&record).unwrap();
        let meta = body.lines().nth(1).unwrap();
        assert_eq!(
            meta,
            "label=Anomaly10;sample_rate=50;seed=3;onset_index=30;critical_index=120;recovery_index=120"
        );
        assert_eq!(body.lines().nth(2).unwrap(), COLUMN_HEADER);
    }

    #[test]
    fn ragged_row_error_names_the_line() {
        let record = generate_record(None, &small_config(), 1).unwrap();
        let mut body = to_csv_string(&record).unwrap();
        // Corrupt the 12th line (sample index 8 lives on line 12).
        let lines: Vec<&str> = body.lines().collect();
        let mut corrupted: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
        corrupted[11] = "8,1.0".to_string();
        body = corrupted.join("\n");
        let e = from_csv_string(&body, "test.csv").unwrap_err();
        match e {
            Error::CsvParse { line, .. } => assert_eq!(line, 12),
            other => panic!("expected CsvParse error, got {other}"),
        }
    }

    #[test]
    fn missing_onset_for_anomaly_is_rejected() {
        let body = "# trackguard-csv v1\n\
                    label=Anomaly2;sample_rate=50;seed=1;critical_index=5;recovery_index=5\n\
                    index,cat,cal\n\
                    0,1.0,1.0\n";
        let e = from_csv_string(body, "test.csv").unwrap_err();
        assert!(e.to_string().contains("onset_index"), "got: {e}");
    }

    #[test]
    fn wrong_header_and_unknown_keys_rejected() {
        assert!(from_csv_string("# other v9\nlabel=Nominal\nindex,cat,cal\n", "t").is_err());
        let body = "# trackguard-csv v1\n\
                    label=Nominal;sample_rate=50;seed=1;color=blue\n\
                    index,cat,cal\n\
                    0,1.0,1.0\n";
        let e = from_csv_string(body, "t").unwrap_err();
        assert!(e.to_string().contains("color"), "got: {e}");
    }

    #[test]
    fn non_finite_amplitudes_rejected() {
        let body = "# trackguard-csv v1\n\
                    label=Nominal;sample_rate=50;seed=1\n\
                    index,cat,cal\n\
                    0,NaN,1.0\n";
        let e = from_csv_string(body, "t").unwrap_err();
        match e {
            Error::CsvParse { line, .. } => assert_eq!(line, 4),
            other => panic!("expected CsvParse error, got {other}"),
        }
    }

    #[test]
    fn out_of_order_indices_rejected() {
        let body = "# trackguard-csv v1\n\
                    label=Nominal;sample_rate=50;seed=1\n\
                    index,cat,cal\n\
                    0,1.0,1.0\n\
                    2,1.0,1.0\n";
        assert!(from_csv_string(body, "t").is_err());
    }
}
