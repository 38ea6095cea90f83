//! Model-by-metric tables as aligned text and CSV.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub label: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub title: String,
    /// Header of the label column.
    pub label_header: String,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
}

impl Table {
    pub fn new(title: impl Into<String>, label_header: impl Into<String>, columns: Vec<String>) -> Self {
        Self {
            title: title.into(),
            label_header: label_header.into(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, label: impl Into<String>, values: Vec<f64>) -> Result<()> {
        if values.len() != self.columns.len() {
            return Err(Error::shape(
                "report row",
                format!("{} values for {} columns", values.len(), self.columns.len()),
            ));
        }
        self.rows.push(Row {
            label: label.into(),
            values,
        });
        Ok(())
    }

    /// Title line, then right-aligned columns with four decimals.
    pub fn to_text(&self) -> String {
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.values.iter().map(|v| format!("{v:.4}")).collect())
            .collect();
        let label_w = self
            .rows
            .iter()
            .map(|r| r.label.len())
            .chain([self.label_header.len()])
            .max()
            .unwrap_or(0);
        let widths: Vec<usize> = self
            .columns
            .iter()
            .enumerate()
            .map(|(j, c)| cells.iter().map(|r| r[j].len()).chain([c.len()]).max().unwrap_or(0))
            .collect();
        let mut out = format!("{}\n", self.title);
        let mut header = format!("{:<label_w$}", self.label_header);
        for (c, w) in self.columns.iter().zip(&widths) {
            header.push_str(&format!("  {c:>w$}"));
        }
        out.push_str(header.trim_end());
        out.push('\n');
        for (r, row) in self.rows.iter().zip(&cells) {
            let mut line = format!("{:<label_w$}", r.label);
            for (c, w) in row.iter().zip(&widths) {
                line.push_str(&format!("  {c:>w$}"));
            }
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    /// Header row and one row per model; values in full precision.
    pub fn to_csv(&self) -> String {
        let mut out = self.label_header.clone();
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.label);
            for v in &r.values {
                out.push_str(&format!(",{v:?}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(title: impl Into<String>, text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::format("report csv", "empty"))?;
        let mut names = header.split(',').map(str::to_string);
        let label_header = names.next().unwrap_or_default();
        let mut table = Table::new(title, label_header, names.collect());
        for line in lines {
            let mut parts = line.split(',');
            let label = parts.next().unwrap_or_default().to_string();
            let values = parts
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::format("report csv", format!("value `{v}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            table.push(label, values)?;
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_is_header_only() {
        let t = Table::new("Quality", "model", vec!["FD-handcrafted".into()]);
        assert_eq!(t.to_text(), "Quality\nmodel  FD-handcrafted\n");
        assert_eq!(t.to_csv(), "model,FD-handcrafted\n");
    }

    #[test]
    fn one_row_renders_aligned() {
        let mut t = Table::new("Quality", "model", vec!["FD-handcrafted".into()]);
        t.push("MULTI", vec![3.25]).unwrap();
        let text = t.to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1].len(), lines[2].len());
        assert!(lines[2].ends_with("3.2500"));
        assert!(t.push("bad", vec![]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut t = Table::new("Coherence", "model", vec!["E1".into(), "E2".into(), "E3".into()]);
        t.push("WAV", vec![51.0, 1.0 / 3.0, 99.999]).unwrap();
        t.push("Griffin-Lim", vec![f64::MIN_POSITIVE, 0.0, 1e10]).unwrap();
        assert_eq!(Table::from_csv("Coherence", &t.to_csv()).unwrap(), t);
    }
}
