use std::io::{Read, Write};
use std::path::Path;

use super::{MeasurementError, MetricsRow};

pub const CSV_HEADER: [&str; 6] = [
    "window_start",
    "flow_id",
    "send_rate",
    "block_size",
    "throughput",
    "avg_latency",
];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ImportReport {
    pub rows: Vec<MetricsRow>,
    /// Rows rejected in lenient mode.
    pub skipped: usize,
}

/// Writes rows with the fixed header. Floats use the shortest
/// representation that parses back to the same value; an absent latency is
/// an empty field.
pub fn write_csv<W: Write>(rows: &[MetricsRow], out: W) -> Result<(), MeasurementError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.window_start.to_string(),
            r.flow_id.to_string(),
            r.send_rate.to_string(),
            r.block_size.to_string(),
            r.throughput.to_string(),
            r.avg_latency.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_csv(rows: &[MetricsRow], path: impl AsRef<Path>) -> Result<(), MeasurementError> {
    let file = std::fs::File::create(path)?;
    write_csv(rows, std::io::BufWriter::new(file))
}

pub fn import_csv(path: impl AsRef<Path>, strict: bool) -> Result<ImportReport, MeasurementError> {
    let file = std::fs::File::open(path)?;
    read_csv(std::io::BufReader::new(file), strict)
}

/// Reads rows by header name, so column order is free and extra columns
/// are ignored. In strict mode the first bad field is an error; otherwise
/// bad rows are counted and skipped.
pub fn read_csv<R: Read>(input: R, strict: bool) -> Result<ImportReport, MeasurementError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let mut index = [0usize; 6];
    for (slot, name) in index.iter_mut().zip(CSV_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| MeasurementError::MissingColumn(name.to_string()))?;
    }

    let mut report = ImportReport::default();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        match parse_record(&record, &index, line) {
            Ok(row) => report.rows.push(row),
            Err(e) if strict => return Err(e),
            Err(e) => {
                log::debug!("skipping row: {e}");
                report.skipped += 1;
            }
        }
    }
    Ok(report)
}

fn parse_record(
    record: &csv::StringRecord,
    index: &[usize; 6],
    line: u64,
) -> Result<MetricsRow, MeasurementError> {
    let field = |i: usize| record.get(index[i]).unwrap_or("");
    let bad = |i: usize| MeasurementError::Parse {
        line,
        column: CSV_HEADER[i].to_string(),
        text: field(i).to_string(),
    };
    let non_negative = |i: usize| -> Result<f64, MeasurementError> {
        match field(i).parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
            _ => Err(bad(i)),
        }
    };
    let avg_latency = match field(5) {
        "" => None,
        _ => Some(non_negative(5)?),
    };
    Ok(MetricsRow {
        window_start: non_negative(0)?,
        flow_id: field(1).parse().map_err(|_| bad(1))?,
        send_rate: non_negative(2)?,
        block_size: field(3).parse().map_err(|_| bad(3))?,
        throughput: non_negative(4)?,
        avg_latency,
    })
}
