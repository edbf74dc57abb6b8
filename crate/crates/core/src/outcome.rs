use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum TestName {
    Sum,
    Max,
    Cc,
    Dsum,
    Dmax,
    Dcc,
}

impl TestName {
    pub const ALL: [TestName; 6] = [
        TestName::Sum,
        TestName::Max,
        TestName::Cc,
        TestName::Dsum,
        TestName::Dmax,
        TestName::Dcc,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TestName::Sum => "SUM",
            TestName::Max => "MAX",
            TestName::Cc => "CC",
            TestName::Dsum => "DSUM",
            TestName::Dmax => "DMAX",
            TestName::Dcc => "DCC",
        }
    }

    pub fn index(&self) -> usize {
        *self as usize
    }
}

impl fmt::Display for TestName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TestName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TestName::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown test name {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Calibration {
    AnalyticNormal,
    Gumbel,
    Bootstrap,
    Cauchy,
}

/// Result of one test: statistic, p-value and the quantities that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub name: TestName,
    pub statistic: f64,
    pub p_value: f64,
    pub calibration: Calibration,
    pub diagnostics: BTreeMap<String, f64>,
}

impl TestOutcome {
    pub(crate) fn new(name: TestName, statistic: f64, p_value: f64, calibration: Calibration) -> Self {
        Self {
            name,
            statistic,
            p_value,
            calibration,
            diagnostics: BTreeMap::new(),
        }
    }

    pub(crate) fn with(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }

    pub fn rejects(&self, level: f64) -> bool {
        self.p_value < level
    }
}
