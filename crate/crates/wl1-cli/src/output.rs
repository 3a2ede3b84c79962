use std::io::Write;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// CSV writer that starts with `#` comment lines echoing the configuration and
/// flushes after every row, so partial results survive an interrupted run.
pub struct CsvSink {
    w: csv::Writer<Box<dyn Write + Send>>,
}

impl CsvSink {
    pub fn new(
        mut out: Box<dyn Write + Send>,
        command: &str,
        echo: &[(String, String)],
        header: &[&str],
    ) -> std::io::Result<Self> {
        writeln!(out, "# wl1 {VERSION}")?;
        writeln!(out, "# command={command}")?;
        for (k, v) in echo {
            writeln!(out, "# {k}={v}")?;
        }
        let mut w = csv::WriterBuilder::new().from_writer(out);
        w.write_record(header)?;
        w.flush()?;
        Ok(CsvSink { w })
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) -> std::io::Result<()> {
        self.w.write_record(fields.iter().map(|f| f.as_ref()))?;
        self.w.flush()
    }
}

/// Shortest round-trip form; empty for NaN so a missing value stays a missing value.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}
