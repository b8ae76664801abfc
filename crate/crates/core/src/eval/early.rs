use serde::{Deserialize, Serialize};

use crate::data::Thread;
use crate::error::{Error, Result};

pub const DEFAULT_DELAYS: [f64; 17] = [
    0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 10.0, 12.0, 16.0, 20.0, 24.0, 36.0, 48.0, 72.0,
];

/// Strictly increasing, non-negative delays in hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule(Vec<f64>);

impl Default for Schedule {
    fn default() -> Self {
        Schedule(DEFAULT_DELAYS.to_vec())
    }
}

impl Schedule {
    pub fn new(delays: Vec<f64>) -> Result<Self> {
        if delays.is_empty() {
            return Err(Error::Config("empty delay schedule".into()));
        }
        if delays.iter().any(|d| !d.is_finite() || *d < 0.0) || delays.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!("delays must be non-negative and strictly increasing: {delays:?}")));
        }
        Ok(Schedule(delays))
    }

    pub fn delays(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The source plus every reply posted at most `delay_hours` after it.
pub fn early_cohort(t: &Thread, delay_hours: f64) -> Thread {
    let start = t.source().created_at;
    let limit = delay_hours * 3600.0;
    let mut out = t.clone();
    out.tweets.retain(|tw| tw.parent_id.is_none() || (tw.created_at - start) as f64 <= limit);
    out
}
