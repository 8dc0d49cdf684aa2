use std::fmt::{self, Write};

/// CSV number format: 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Flat `key=value` text block. Values use the shortest exact decimal form.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    lines: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn text(&mut self, key: impl Into<String>, value: impl Into<String>) -> &mut Self {
        self.lines.push((key.into(), value.into()));
        self
    }

    pub fn real(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        let a = value.abs();
        let text = if a != 0.0 && !(1e-4..1e16).contains(&a) { format!("{value:e}") } else { format!("{value}") };
        self.text(key, text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.lines.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.lines {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// Reads `barrier=` or `barrier.<state>=` lines back from a report.
pub fn parse_barriers(text: &str, states: &[String]) -> Option<Vec<f64>> {
    let value = |key: &str| {
        text.lines()
            .filter_map(|l| l.split_once('='))
            .find(|(k, _)| k.trim() == key)
            .and_then(|(_, v)| v.trim().parse::<f64>().ok())
    };
    if states.is_empty() {
        return value("barrier").map(|b| vec![b]);
    }
    states.iter().map(|s| value(&format!("barrier.{s}"))).collect()
}

/// CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Csv { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn row(&mut self, cells: Vec<String>) -> &mut Self {
        assert_eq!(cells.len(), self.header.len(), "row width");
        self.rows.push(cells);
        self
    }

    pub fn reals(&mut self, cells: &[f64]) -> &mut Self {
        self.row(cells.iter().map(|&x| num(x)).collect())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

impl fmt::Display for Csv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        for line in std::iter::once(&self.header).chain(&self.rows) {
            out.push_str(&line.join(","));
            out.push('\n');
        }
        f.write_str(&out)
    }
}

/// Outcome of one verification check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub model: String,
    pub passed: bool,
    pub observed: String,
    pub expected: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        let _ = write!(
            s,
            "{} check={} model={} observed={} expected={}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.model,
            self.observed,
            self.expected
        );
        f.write_str(&s)
    }
}
