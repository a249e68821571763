//! CSV tables and plot scripts.

use std::fmt::Write as _;

use super::config::Command;
use super::CliError;

/// Version of the CSV layout; bumped when columns or metadata change.
pub const SCHEMA: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub kind: Command,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Lines written after `#`, in order.
    pub metadata: Vec<String>,
}

/// 17 significant digits in scientific notation.
pub fn format_value(x: f64) -> String {
    format!("{x:.16e}")
}

impl CsvTable {
    pub fn new(kind: Command, header: &[&str]) -> Self {
        CsvTable {
            kind,
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            metadata: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Column counts agree and every value is finite.
    pub fn validate(&self) -> Result<(), CliError> {
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.header.len() {
                return Err(CliError::Table(format!(
                    "row {i} has {} values for {} columns",
                    row.len(),
                    self.header.len()
                )));
            }
            if let Some(k) = row.iter().position(|x| !x.is_finite()) {
                return Err(CliError::Table(format!(
                    "row {i}, column `{}` is not finite ({})",
                    self.header[k], row[k]
                )));
            }
        }
        Ok(())
    }

    /// The whole file. `timestamp` is seconds since the Unix epoch, left out
    /// when `None`.
    pub fn to_csv(&self, timestamp: Option<u64>) -> Result<String, CliError> {
        self.validate()?;
        let mut s = String::new();
        let _ = writeln!(s, "# schema={SCHEMA}");
        let _ = writeln!(s, "# chronodil {}", env!("CARGO_PKG_VERSION"));
        if let Some(ts) = timestamp {
            let _ = writeln!(s, "# timestamp={ts}");
        }
        for m in &self.metadata {
            let _ = writeln!(s, "# {m}");
        }
        let _ = writeln!(s, "{}", self.header.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&x| format_value(x)).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        Ok(s)
    }
}

fn preamble(s: &mut String, title: &str, out: &str) {
    let _ = writeln!(s, "# gnuplot script");
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set datafile commentschars '#'");
    let _ = writeln!(s, "set datafile columnheaders");
    let _ = writeln!(s, "set terminal pngcairo size 900,600");
    let _ = writeln!(s, "set output '{out}.png'");
    let _ = writeln!(s, "set title '{title}'");
    let _ = writeln!(s, "set format y '%.3g'");
}

fn col(table: &CsvTable, name: &str) -> Result<usize, CliError> {
    table
        .header
        .iter()
        .position(|h| h == name)
        .map(|k| k + 1)
        .ok_or_else(|| CliError::Table(format!("table has no `{name}` column")))
}

/// Plot script for a measurement or sweep table; `csv` is the data file's
/// path relative to where the script is run.
pub fn emit_plot_script(table: &CsvTable, csv: &str) -> Result<String, CliError> {
    let stem = csv.strip_suffix(".csv").unwrap_or(csv);
    let mut s = String::new();
    match table.kind {
        Command::Measurement => {
            let (cq, ct, cs) = (col(table, "q")?, col(table, "t")?, col(table, "sigma_t")?);
            preamble(&mut s, "conditioned reading spread", stem);
            let _ = writeln!(s, "set xlabel 't [s]'");
            let _ = writeln!(s, "set ylabel 'sigma_T|n [s]'");
            let _ = writeln!(s, "set key left top");
            let mut curves = Vec::new();
            let mut start = 0;
            while start < table.rows.len() {
                let q = table.rows[start][cq - 1];
                let mut end = start;
                while end + 1 < table.rows.len() && table.rows[end + 1][cq - 1] == q {
                    end += 1;
                }
                curves.push(format!(
                    "'{csv}' every ::{start}::{end} using {ct}:{cs} with linespoints title 'q = {}'",
                    format_value(q)
                ));
                start = end + 1;
            }
            if curves.is_empty() {
                return Err(CliError::Table("measurement table has no rows".into()));
            }
            let _ = writeln!(s, "plot {}", curves.join(", \\\n     "));
        }
        Command::Sweep => {
            let x = table.header.first().cloned().unwrap_or_default();
            let cy = col(table, "t_coh")?;
            let ys = table.column("t_coh").unwrap_or_default();
            let Some((k, &y)) = ys
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
            else {
                return Err(CliError::Table("sweep table has no rows".into()));
            };
            let xv = table.rows[k][0];
            preamble(&mut s, "coherence time", stem);
            let _ = writeln!(s, "set xlabel '{x}'");
            let _ = writeln!(s, "set ylabel 'T_coh [s]'");
            let _ = writeln!(
                s,
                "set label 1 'extremum T_coh = {} at {x} = {}' at {},{} point pointtype 7 offset 1,1",
                format_value(y),
                format_value(xv),
                format_value(xv),
                format_value(y)
            );
            let _ = writeln!(s, "plot '{csv}' using 1:{cy} with lines title 'T_coh'");
        }
        other => {
            return Err(CliError::Table(format!(
                "no plot script for `{}` tables",
                other.name()
            )))
        }
    }
    Ok(s)
}
