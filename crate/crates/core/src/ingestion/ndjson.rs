use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{IngestionError, LogitRecord, LogitTable};

fn io_error(path: &Path, source: std::io::Error) -> IngestionError {
    IngestionError::Io { path: path.to_path_buf(), source }
}

/// Parses NDJSON records; blank lines are skipped, line numbers are 1-based.
pub fn read_logits(source: impl BufRead) -> Result<LogitTable, IngestionError> {
    let mut table = LogitTable::default();
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| IngestionError::MalformedLine { line: line_no, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: LogitRecord = serde_json::from_str(&line)
            .map_err(|e| IngestionError::MalformedLine { line: line_no, message: e.to_string() })?;
        table.push(record, line_no)?;
    }
    Ok(table)
}

pub fn read_logits_path(path: impl AsRef<Path>) -> Result<LogitTable, IngestionError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    read_logits(BufReader::new(file))
}

/// Writes one record per line with shortest round-trip float rendering.
pub fn write_logits<'a>(
    records: impl IntoIterator<Item = &'a LogitRecord>,
    mut sink: impl Write,
) -> Result<(), IngestionError> {
    let io = |e: std::io::Error| io_error(Path::new("<sink>"), e);
    for r in records {
        if r.logits.iter().any(|v| !v.is_finite()) {
            return Err(IngestionError::NonFinite { sample_id: r.sample_id.clone(), dim: r.dim.to_string() });
        }
        serde_json::to_writer(&mut sink, r).map_err(|e| io(e.into()))?;
        sink.write_all(b"\n").map_err(io)?;
    }
    sink.flush().map_err(io)
}

pub fn write_logits_path<'a>(
    records: impl IntoIterator<Item = &'a LogitRecord>,
    path: impl AsRef<Path>,
) -> Result<(), IngestionError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    write_logits(records, BufWriter::new(file)).map_err(|e| match e {
        IngestionError::Io { source, .. } => io_error(path, source),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corruption::DimensionTag;
    use crate::metrics::Split;

    fn parse(text: &str) -> Result<LogitTable, IngestionError> {
        read_logits(text.as_bytes())
    }

    #[test]
    fn reads_documented_line() {
        let t =
            parse(r#"{"sample_id":"cat/001.png","split":"id","dim":"fog:2","label":3,"logits":[0.12,-1.5]}"#).unwrap();
        let r = &t.records()[0];
        assert_eq!(r.label, Some(3));
        assert_eq!(r.dim.to_string(), "fog:2");
        assert_eq!(t.k(), 2);
    }

    #[test]
    fn missing_logits_names_the_line() {
        let text = concat!(
            r#"{"sample_id":"a","split":"id","dim":"original","logits":[1.0]}"#,
            "\n",
            r#"{"sample_id":"b","split":"ood","dim":"original"}"#,
            "\n"
        );
        assert!(matches!(parse(text), Err(IngestionError::MalformedLine { line: 2, .. })));
    }

    #[test]
    fn rejects_bad_tags_and_mixed_k() {
        let bad_dim = r#"{"sample_id":"a","split":"id","dim":"fog:9","logits":[1.0]}"#;
        assert!(matches!(parse(bad_dim), Err(IngestionError::MalformedLine { line: 1, .. })));
        let mut text = String::new();
        text.push_str(&format!(r#"{{"sample_id":"a","split":"id","dim":"original","logits":{:?}}}"#, [0.0; 5]));
        text.push('\n');
        text.push_str(&format!(r#"{{"sample_id":"b","split":"id","dim":"original","logits":{:?}}}"#, [0.0; 7]));
        assert!(matches!(parse(&text), Err(IngestionError::InconsistentK { line: 2, expected: 5, got: 7 })));
    }

    #[test]
    fn omits_absent_label_and_refuses_nan() {
        let r = LogitRecord {
            sample_id: "x".into(),
            split: Split::Ood,
            dim: DimensionTag::Original,
            label: None,
            logits: vec![0.1, -0.0],
        };
        let mut buf = Vec::new();
        write_logits([&r], &mut buf).unwrap();
        let line = String::from_utf8(buf).unwrap();
        assert_eq!(line, "{\"sample_id\":\"x\",\"split\":\"ood\",\"dim\":\"original\",\"logits\":[0.1,-0.0]}\n");
        let nan = LogitRecord { logits: vec![f64::NAN], ..r };
        assert!(matches!(write_logits([&nan], Vec::new()), Err(IngestionError::NonFinite { .. })));
    }
}
