//! The certification ledger and its CSV form.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::cert::{Certification, Verdict};
use crate::error::Result;

/// Column order of `ledger.csv`.
pub const LEDGER_COLUMNS: [&str; 7] = ["scenario", "check", "param_json", "measured", "threshold", "verdict", "seed"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerRow {
    pub scenario: String,
    pub check: String,
    pub param_json: String,
    pub measured: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    pub seed: u64,
}

impl LedgerRow {
    pub fn from_cert(scenario: &str, seed: u64, c: &Certification) -> Self {
        LedgerRow {
            scenario: scenario.to_string(),
            check: c.check.clone(),
            param_json: c.param_json(),
            measured: c.measured,
            threshold: c.threshold,
            verdict: c.verdict,
            seed,
        }
    }

    fn record(&self) -> [String; 7] {
        [
            self.scenario.clone(),
            self.check.clone(),
            self.param_json.clone(),
            self.measured.to_string(),
            self.threshold.to_string(),
            self.verdict.as_str().to_string(),
            self.seed.to_string(),
        ]
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ledger {
    pub rows: Vec<LedgerRow>,
}

impl Ledger {
    pub fn push(&mut self, row: LedgerRow) {
        self.rows.push(row);
    }

    pub fn extend(&mut self, rows: impl IntoIterator<Item = LedgerRow>) {
        self.rows.extend(rows);
    }

    pub fn worst(&self) -> Verdict {
        Verdict::worst(self.rows.iter().map(|r| r.verdict))
    }

    /// 0 for all PASS, 2 when something is INCONCLUSIVE without a FAIL, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self.worst() {
            Verdict::Pass => 0,
            Verdict::Inconclusive => 2,
            Verdict::Fail => 1,
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(LEDGER_COLUMNS)?;
        for row in &self.rows {
            wr.write_record(row.record())?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory csv");
        String::from_utf8(buf).expect("utf8 csv")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(check: &str, verdict: Verdict) -> LedgerRow {
        LedgerRow::from_cert("s", 3, &Certification::new(check, 1.5, 2.0, verdict).param("k", "a,b"))
    }

    #[test]
    fn exit_codes_follow_worst_verdict() {
        let mut l = Ledger::default();
        assert_eq!(l.exit_code(), 0);
        l.push(row("a", Verdict::Pass));
        assert_eq!(l.exit_code(), 0);
        l.push(row("b", Verdict::Inconclusive));
        assert_eq!(l.exit_code(), 2);
        l.push(row("c", Verdict::Fail));
        assert_eq!(l.exit_code(), 1);
    }

    #[test]
    fn csv_schema_is_stable() {
        let mut l = Ledger::default();
        l.push(row("a", Verdict::Pass));
        l.push(LedgerRow::from_cert("s", 3, &Certification::new("n", f64::NAN, f64::INFINITY, Verdict::Fail)));
        let text = l.to_csv_string();
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let headers: Vec<String> = rd.headers().unwrap().iter().map(str::to_string).collect();
        assert_eq!(headers, LEDGER_COLUMNS);
        for rec in rd.records() {
            let rec = rec.unwrap();
            assert_eq!(rec.len(), 7);
        }
        assert!(text.contains("\"{\"\"k\"\":\"\"a,b\"\"}\""));
    }
}
