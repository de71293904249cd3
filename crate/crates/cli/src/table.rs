use faitheval_core::tsv::write_table;

/// Decimal places per kind of quantity.
pub const ROUGE_DECIMALS: usize = 2;
pub const KAPPA_DECIMALS: usize = 2;
pub const CORRELATION_DECIMALS: usize = 3;
pub const PERCENT_DECIMALS: usize = 1;
pub const AVERAGE_DECIMALS: usize = 2;

/// Shown for undefined cells.
pub const UNDEFINED: &str = "—";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub name: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &'static str, header: &[&'static str]) -> Self {
        Table {
            name,
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_tsv(&self) -> String {
        write_table(&self.header, &self.rows)
    }

    /// Space-aligned rendering; numeric cells are right-aligned.
    pub fn to_text(&self) -> String {
        let cells: Vec<Vec<&str>> = std::iter::once(self.header.clone())
            .chain(self.rows.iter().map(|r| r.iter().map(String::as_str).collect()))
            .collect();
        let widths: Vec<usize> = (0..self.header.len())
            .map(|c| cells.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, row) in cells.iter().enumerate() {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(cell, &w)| {
                    let pad = " ".repeat(w - cell.chars().count());
                    if i > 0 && is_numeric(cell) {
                        format!("{pad}{cell}")
                    } else {
                        format!("{cell}{pad}")
                    }
                })
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
            if i == 0 {
                let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
                out.push_str(&rule.join("  "));
                out.push('\n');
            }
        }
        out
    }
}

fn is_numeric(cell: &str) -> bool {
    cell == UNDEFINED || cell.parse::<f64>().is_ok()
}

pub fn fixed(value: f64, decimals: usize) -> String {
    format!("{value:.decimals$}")
}

pub fn optional(value: Option<f64>, decimals: usize) -> String {
    value.map_or_else(|| UNDEFINED.to_string(), |v| fixed(v, decimals))
}

/// Fractions in [0, 1] shown on the 0 to 100 scale.
pub fn scaled(value: f64, decimals: usize) -> String {
    fixed(100.0 * value, decimals)
}
