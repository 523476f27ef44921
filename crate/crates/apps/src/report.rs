//! CSV emission. Floats use the shortest representation that parses back
//! to the same value, so parsing and re-emitting a file is byte-identical.

use std::io::Write;

pub fn write_table<W: Write>(out: W, header: &[String], rows: &[Vec<String>]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn table_to_string(header: &[String], rows: &[Vec<String>]) -> String {
    let mut buf = Vec::new();
    write_table(&mut buf, header, rows).expect("writing to memory");
    String::from_utf8(buf).expect("csv output is utf-8")
}

/// Parses a CSV document into header and rows.
pub fn read_table(text: &str) -> csv::Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers()?.iter().map(str::to_string).collect();
    let rows = r.records().map(|rec| rec.map(|r| r.iter().map(str::to_string).collect())).collect::<csv::Result<_>>()?;
    Ok((header, rows))
}

pub fn serialize_rows<T: serde::Serialize>(rows: &[T]) -> csv::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
