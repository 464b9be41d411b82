//! Certification records shared by every check.

use std::fmt;

use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Verdict {
    Pass,
    Inconclusive,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Inconclusive => "INCONCLUSIVE",
            Verdict::Fail => "FAIL",
        }
    }

    /// Severity order FAIL > INCONCLUSIVE > PASS.
    pub fn worst<I: IntoIterator<Item = Verdict>>(it: I) -> Verdict {
        it.into_iter().max().unwrap_or(Verdict::Pass)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One numerical verdict: a measured quantity compared with a threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certification {
    pub check: String,
    pub params: Map<String, Value>,
    pub measured: f64,
    pub threshold: f64,
    pub verdict: Verdict,
}

impl Certification {
    pub fn new(check: impl Into<String>, measured: f64, threshold: f64, verdict: Verdict) -> Self {
        Certification {
            check: check.into(),
            params: Map::new(),
            measured,
            threshold,
            verdict,
        }
    }

    /// PASS iff `measured <= threshold`.
    pub fn at_most(check: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self::new(check, measured, threshold, Verdict::from_bool(measured <= threshold))
    }

    /// PASS iff `measured >= threshold`.
    pub fn at_least(check: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self::new(check, measured, threshold, Verdict::from_bool(measured >= threshold))
    }

    pub fn param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn param_json(&self) -> String {
        serde_json::to_string(&self.params).expect("params serialize")
    }
}

impl fmt::Display for Certification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {} measured={:.6e} threshold={:.6e} {}",
            self.verdict,
            self.check,
            self.measured,
            self.threshold,
            self.param_json()
        )
    }
}

/// Largest ratio between two empirical constants; stability means `< 2`.
pub fn drift(coarse: f64, fine: f64) -> f64 {
    if coarse == 0.0 && fine == 0.0 {
        return 1.0;
    }
    let (lo, hi) = if coarse < fine { (coarse, fine) } else { (fine, coarse) };
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

pub const STABILITY_FACTOR: f64 = 2.0;

/// PASS iff both constants are finite and agree within [`STABILITY_FACTOR`].
pub fn stability(check: impl Into<String>, coarse: f64, fine: f64) -> Certification {
    let d = drift(coarse, fine);
    let ok = coarse.is_finite() && fine.is_finite() && d < STABILITY_FACTOR;
    Certification::new(check, d, STABILITY_FACTOR, Verdict::from_bool(ok))
        .param("coarse", finite_or_null(coarse))
        .param("fine", finite_or_null(fine))
}

pub fn finite_or_null(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}
