//! CSV and plot-data writers.
//!
//! Every file is written under a `.partial` name and renamed once complete,
//! so an aborted command leaves only `.partial` files behind.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const SCHEMA_LINE: &str = "# schema_version=1";

/// Full round-trip representation (17 significant digits).
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn partial_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".partial");
    path.with_file_name(name)
}

pub struct CsvOut {
    path: PathBuf,
    partial: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
}

impl CsvOut {
    pub fn create(dir: &Path, name: &str, header: &[&str]) -> Result<Self, CliError> {
        let path = dir.join(name);
        let partial = partial_path(&path);
        let file = File::create(&partial).map_err(|e| CliError::io(&partial, e))?;
        let mut buf = BufWriter::new(file);
        writeln!(buf, "{SCHEMA_LINE}").map_err(|e| CliError::io(&partial, e))?;
        let mut writer = csv::Writer::from_writer(buf);
        writer.write_record(header)?;
        Ok(Self { path, partial, writer })
    }

    pub fn row<I, T>(&mut self, fields: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        self.writer.flush().map_err(|e| CliError::io(&self.partial, e))?;
        drop(self.writer);
        fs::rename(&self.partial, &self.path).map_err(|e| CliError::io(&self.path, e))?;
        Ok(self.path)
    }
}

/// Writes a whitespace-separated two-column series with a comment header.
pub fn write_series(dir: &Path, name: &str, columns: [&str; 2], rows: &[(f64, f64)]) -> Result<PathBuf, CliError> {
    let mut text = format!("{SCHEMA_LINE}\n# {} {}\n", columns[0], columns[1]);
    for (x, y) in rows {
        text.push_str(&format!("{} {}\n", num(*x), num(*y)));
    }
    write_text(dir, name, &text)
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let partial = partial_path(&path);
    fs::write(&partial, text).map_err(|e| CliError::io(&partial, e))?;
    fs::rename(&partial, &path).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

/// A parsed output table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn floats(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let c = self.column(name).ok_or_else(|| CliError::Config(format!("no column {name}")))?;
        self.rows
            .iter()
            .map(|r| r[c].parse::<f64>().map_err(|e| CliError::Config(format!("column {name}: {e}"))))
            .collect()
    }
}

/// Reads a CSV written by [`CsvOut`], checking the schema line.
pub fn read_table(path: &Path) -> Result<Table, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| CliError::io(path, e))?;
    if first.trim_end() != SCHEMA_LINE {
        return Err(CliError::Config(format!("{}: missing `{SCHEMA_LINE}` header", path.display())));
    }
    let mut csv = csv::Reader::from_reader(reader);
    let header = csv.headers()?.iter().map(str::to_owned).collect();
    let rows = csv
        .records()
        .map(|r| r.map(|r| r.iter().map(str::to_owned).collect()))
        .collect::<Result<_, _>>()?;
    Ok(Table { header, rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub command: String,
    pub item: String,
    pub passed: bool,
    pub value: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    pub fn push(&mut self, command: &str, item: impl Into<String>, passed: bool, value: f64, detail: impl Into<String>) {
        self.rows.push(SummaryRow {
            command: command.to_owned(),
            item: item.into(),
            passed,
            value,
            detail: detail.into(),
        });
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.passed).count()
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let mut out = CsvOut::create(dir, "summary.csv", &["command", "item", "status", "value", "detail"])?;
        for r in &self.rows {
            let status = if r.passed { "PASS" } else { "FAIL" };
            out.row([r.command.as_str(), r.item.as_str(), status, &num(r.value), r.detail.as_str()])?;
        }
        out.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn csv_is_renamed_on_finish_and_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = CsvOut::create(dir.path(), "t.csv", &["a", "b"]).unwrap();
        out.row([num(0.5), "x,y".to_string()]).unwrap();
        assert!(dir.path().join("t.csv.partial").exists());
        let path = out.finish().unwrap();
        assert!(!dir.path().join("t.csv.partial").exists());
        let t = read_table(&path).unwrap();
        assert_eq!(t.header, ["a", "b"]);
        assert_eq!(t.rows, vec![vec![num(0.5), "x,y".to_string()]]);
        assert_eq!(t.floats("a").unwrap(), vec![0.5]);
    }

    #[test]
    fn dropped_writer_leaves_partial() {
        let dir = tempfile::tempdir().unwrap();
        let out = CsvOut::create(dir.path(), "t.csv", &["a"]).unwrap();
        drop(out);
        assert!(dir.path().join("t.csv.partial").exists());
        assert!(!dir.path().join("t.csv").exists());
    }

    #[test]
    fn summary_status_column() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = Summary::default();
        s.push("check", "a", true, 1.0, "");
        s.push("check", "b", false, -1.0, "bad");
        assert_eq!(s.failures(), 1);
        let t = read_table(&s.write(dir.path()).unwrap()).unwrap();
        let c = t.column("status").unwrap();
        assert_eq!(t.rows[0][c], "PASS");
        assert_eq!(t.rows[1][c], "FAIL");
    }
}
