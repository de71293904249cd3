//! Tab-separated table helpers shared by the file formats of this crate.
//!
//! Fields that contain tabs, newlines or quotes are quoted the way the `csv`
//! crate does it, so every table written here reads back losslessly.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

/// A parsed delimited table with a header row.
#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<TableRow>,
}

/// One data row with its 1-based line number in the source file.
#[derive(Debug, Clone)]
pub struct TableRow {
    pub line: usize,
    pub fields: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum TsvError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing column `{0}`")]
    MissingColumn(String),
}

impl Table {
    pub fn read_path(path: &Path, delimiter: u8) -> Result<Self, TsvError> {
        let file = std::fs::File::open(path).map_err(|source| TsvError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::read(file, delimiter)
    }

    pub fn read<R: Read>(reader: R, delimiter: u8) -> Result<Self, TsvError> {
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .has_headers(true)
            .flexible(false)
            .from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| parse_error(&e, 1))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| parse_error(&e, rows.len() + 2))?;
            let line = record
                .position()
                .map(|p| p.line() as usize)
                .unwrap_or(rows.len() + 2);
            rows.push(TableRow {
                line,
                fields: record.iter().map(str::to_string).collect(),
            });
        }
        Ok(Table { header, rows })
    }

    /// Index of every named column, failing on the first one that is absent.
    pub fn columns<'a>(
        &self,
        names: impl IntoIterator<Item = &'a str>,
    ) -> Result<HashMap<&'a str, usize>, TsvError> {
        let mut out = HashMap::new();
        for name in names {
            let idx = self
                .header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| TsvError::MissingColumn(name.to_string()))?;
            out.insert(name, idx);
        }
        Ok(out)
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

fn parse_error(e: &csv::Error, fallback_line: usize) -> TsvError {
    let line = e
        .position()
        .map(|p| p.line() as usize)
        .unwrap_or(fallback_line);
    TsvError::Parse {
        line,
        message: e.to_string(),
    }
}

/// Serialises rows as a tab-separated table with a header line.
pub fn write_table<S: AsRef<str>>(header: &[&str], rows: &[Vec<S>]) -> String {
    let mut wtr = csv::WriterBuilder::new()
        .delimiter(b'\t')
        .quote_style(csv::QuoteStyle::Necessary)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    // Writing into a Vec cannot fail.
    wtr.write_record(header).expect("in-memory write");
    for row in rows {
        wtr.write_record(row.iter().map(AsRef::as_ref))
            .expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf-8 input")
}
