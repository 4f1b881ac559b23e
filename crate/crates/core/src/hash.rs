use crate::error::{Error, Result};
use crate::norm::Norm;

/// Sensor readouts produced by one mechanical system for one load.
///
/// Readouts are vertical forces, upward positive, ordered by sensor position.
#[derive(Debug, Clone, PartialEq)]
pub struct HashValue {
    readouts: Vec<f64>,
}

impl HashValue {
    pub fn new(readouts: Vec<f64>) -> Result<Self> {
        if readouts.len() < 2 {
            return Err(Error::arg(format!(
                "a hash needs at least 2 readouts, got {}",
                readouts.len()
            )));
        }
        if readouts.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("hash readouts must be finite"));
        }
        Ok(Self { readouts })
    }

    pub fn readouts(&self) -> &[f64] {
        &self.readouts
    }

    pub fn ns(&self) -> usize {
        self.readouts.len()
    }

    pub fn total(&self) -> f64 {
        self.readouts.iter().sum()
    }

    /// Readouts rescaled to sum to one.
    pub fn normalized(&self) -> Result<Self> {
        let total = self.total();
        if total == 0.0 || !total.is_finite() {
            return Err(Error::DegenerateReadout(format!("readouts sum to {total}")));
        }
        Ok(Self {
            readouts: self.readouts.iter().map(|v| v / total).collect(),
        })
    }

    pub fn distance(&self, other: &HashValue, norm: Norm) -> Result<f64> {
        norm.checked_distance(&self.readouts, &other.readouts)
    }

    pub fn into_readouts(self) -> Vec<f64> {
        self.readouts
    }
}

impl AsRef<[f64]> for HashValue {
    fn as_ref(&self) -> &[f64] {
        &self.readouts
    }
}
