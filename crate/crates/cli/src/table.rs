//! Result tables and their CSV form.
//!
//! Layout: `#` provenance lines, a header row, a unit row, then data rows.
//! The last column is always `errors`, empty unless the point failed.

use crate::error::CliError;

pub const TOOL_NAME: &str = "rectenna";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
const HASH_TAG: &str = "# scenario_sha256: ";
const TOOL_TAG: &str = "# tool: ";

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Number(f64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Number(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Number)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub title: String,
    pub columns: Vec<Column>,
    rows: Vec<(Vec<Cell>, Option<String>)>,
}

/// Nine significant digits in scientific notation; negative zero prints
/// as zero so equal values always give equal bytes.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        return "0.00000000e0".into();
    }
    format!("{v:.8e}")
}

impl ResultTable {
    pub fn new(title: &str, columns: &[(&str, &str)]) -> Self {
        Self {
            title: title.to_string(),
            columns: columns.iter().map(|&(n, u)| Column { name: n.into(), unit: u.into() }).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, cells: Vec<Cell>) {
        self.push_row(cells, None);
    }

    /// A row whose point failed: the leading cells that are known plus the
    /// error message.
    pub fn push_error(&mut self, mut cells: Vec<Cell>, error: impl std::fmt::Display) {
        cells.resize(self.columns.len(), Cell::Empty);
        self.push_row(cells, Some(error.to_string()));
    }

    fn push_row(&mut self, cells: Vec<Cell>, error: Option<String>) {
        assert_eq!(cells.len(), self.columns.len(), "row width for table `{}`", self.title);
        self.rows.push((cells, error));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Numeric values of one column; non-numeric cells give `None`.
    pub fn numbers(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.column_index(name)?;
        Some(
            self.rows
                .iter()
                .map(|(r, _)| match r[i] {
                    Cell::Number(v) => Some(v),
                    _ => None,
                })
                .collect(),
        )
    }

    pub fn texts(&self, name: &str) -> Option<Vec<String>> {
        let i = self.column_index(name)?;
        Some(
            self.rows
                .iter()
                .map(|(r, _)| match &r[i] {
                    Cell::Text(t) => t.clone(),
                    Cell::Number(v) => format_number(*v),
                    Cell::Empty => String::new(),
                })
                .collect(),
        )
    }

    pub fn errors(&self) -> impl Iterator<Item = Option<&str>> {
        self.rows.iter().map(|(_, e)| e.as_deref())
    }

    pub fn to_csv(&self, scenario_name: &str, scenario_hash: &str) -> Result<Vec<u8>, CliError> {
        let mut out = Vec::new();
        out.extend_from_slice(format!("{TOOL_TAG}{TOOL_NAME} {TOOL_VERSION}\n").as_bytes());
        out.extend_from_slice(format!("# scenario: {scenario_name}\n").as_bytes());
        out.extend_from_slice(format!("{HASH_TAG}{scenario_hash}\n").as_bytes());
        out.extend_from_slice(format!("# table: {}\n", self.title).as_bytes());
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let mut header: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        header.push("errors");
        w.write_record(&header)?;
        let mut units: Vec<&str> = self.columns.iter().map(|c| c.unit.as_str()).collect();
        units.push("");
        w.write_record(&units)?;
        for (cells, err) in &self.rows {
            let mut rec: Vec<String> = cells
                .iter()
                .map(|c| match c {
                    Cell::Number(v) if v.is_finite() => format_number(*v),
                    Cell::Number(_) | Cell::Empty => String::new(),
                    Cell::Text(t) => t.clone(),
                })
                .collect();
            rec.push(err.clone().unwrap_or_default());
            w.write_record(&rec)?;
        }
        w.into_inner().map_err(|e| CliError::Csv(e.into_error().into()))
    }
}

/// Provenance read back from a CSV produced by [`ResultTable::to_csv`].
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub tool: String,
    pub scenario_hash: String,
    pub columns: usize,
    pub rows: usize,
}

/// Reads the provenance lines and checks that every row has the header's
/// width.
pub fn read_provenance(bytes: &[u8], path: &str) -> Result<Provenance, CliError> {
    let bad = |message: String| CliError::Verify { path: path.to_string(), message };
    let text = std::str::from_utf8(bytes).map_err(|e| bad(format!("not UTF-8: {e}")))?;
    let mut tool = None;
    let mut hash = None;
    let mut body_start = 0;
    for line in text.split_inclusive('\n') {
        if !line.starts_with('#') {
            break;
        }
        body_start += line.len();
        let line = line.trim_end();
        if let Some(t) = line.strip_prefix(TOOL_TAG) {
            tool = Some(t.to_string());
        } else if let Some(h) = line.strip_prefix(HASH_TAG) {
            hash = Some(h.to_string());
        }
    }
    let tool = tool.ok_or_else(|| bad("no tool line".into()))?;
    let scenario_hash = hash.ok_or_else(|| bad("no scenario hash line".into()))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(&bytes[body_start..]);
    let mut columns = None;
    let mut rows = 0;
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let width = *columns.get_or_insert(rec.len());
        if rec.len() != width {
            return Err(bad(format!("record {} has {} fields, header has {width}", i + 1, rec.len())));
        }
        rows += 1;
    }
    let columns = columns.ok_or_else(|| bad("no header row".into()))?;
    if rows < 2 {
        return Err(bad("missing unit row".into()));
    }
    Ok(Provenance { tool, scenario_hash, columns, rows: rows - 2 })
}

pub fn tool_id() -> String {
    format!("{TOOL_NAME} {TOOL_VERSION}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> ResultTable {
        let mut t = ResultTable::new("demo", &[("power", "dBm"), ("efficiency", "1")]);
        t.push(vec![(-10.0).into(), 0.3333333333333.into()]);
        t.push_error(vec![(0.0).into()], "did not converge, twice");
        t
    }

    #[test]
    fn csv_layout() {
        let csv = String::from_utf8(table().to_csv("s", "ab12").unwrap()).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], format!("# tool: rectenna {TOOL_VERSION}"));
        assert_eq!(lines[2], "# scenario_sha256: ab12");
        assert_eq!(lines[4], "power,efficiency,errors");
        assert_eq!(lines[5], "dBm,1,");
        assert_eq!(lines[6], "-1.00000000e1,3.33333333e-1,");
        assert_eq!(lines[7], "0.00000000e0,,\"did not converge, twice\"");
    }

    #[test]
    fn provenance_round_trip() {
        let bytes = table().to_csv("s", "ab12").unwrap();
        let p = read_provenance(&bytes, "x.csv").unwrap();
        assert_eq!(p, Provenance { tool: tool_id(), scenario_hash: "ab12".into(), columns: 3, rows: 2 });
        let mut broken = bytes.clone();
        broken.extend_from_slice(b"1,2\n");
        assert!(read_provenance(&broken, "x.csv").is_err());
    }

    #[test]
    fn negative_zero_prints_as_zero() {
        assert_eq!(format_number(-0.0), format_number(0.0));
        assert_eq!(format_number(915e6), "9.15000000e8");
    }
}
