//! Run configuration shared by the library entry points and the CLI.

use crate::error::{Error, Result};
use crate::scalar::rank_tolerance;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Text,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub precision_bits: u32,
    /// Overrides the jet order of generated curves.
    pub jet_order: Option<usize>,
    /// Overrides the relative rank tolerance `2^(-precision/2)`.
    pub rank_tol: Option<f64>,
    pub seed: u64,
    pub format: OutputFormat,
    pub convention_audit: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { precision_bits: 192, jet_order: None, rank_tol: None, seed: 0, format: OutputFormat::Json, convention_audit: true }
    }
}

impl RunConfig {
    pub fn with_precision(precision_bits: u32) -> Self {
        RunConfig { precision_bits, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.precision_bits < 64 {
            return Err(Error::BadFormat(format!("precision {} is below 64 bits", self.precision_bits)));
        }
        if let Some(t) = self.rank_tol {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::BadFormat(format!("rank tolerance {t} outside (0, 1)")));
            }
        }
        Ok(())
    }

    /// Singular-value ratios above `hi` count as rank, at or below `lo` as
    /// zero; anything in between is undecidable at this precision.
    pub fn rank_band(&self) -> (f64, f64) {
        let hi = self.rank_tol.unwrap_or_else(|| rank_tolerance(self.precision_bits));
        (hi, hi.powf(1.5))
    }

    /// Bound for per-stage and final residuals of the float pipeline.
    pub fn residual_tol(&self) -> f64 {
        self.rank_band().0
    }

    /// Jet order to use once the diagram is known.
    pub fn jet_order_for(&self, p1: usize) -> Result<usize> {
        let min = 2 * p1 + 2;
        match self.jet_order {
            Some(k) if k < min => Err(Error::JetOrderTooLow(format!("jet order {k} < 2*p1 + 2 = {min}"))),
            Some(k) => Ok(k),
            None => Ok((3 * p1 + 2).max(min)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_checks() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let (hi, lo) = c.rank_band();
        assert!((hi - 2f64.powi(-96)).abs() < 1e-40);
        assert!(lo < hi);
        assert!(RunConfig::with_precision(32).validate().is_err());
        let low = RunConfig { jet_order: Some(3), ..Default::default() };
        assert!(matches!(low.jet_order_for(2), Err(Error::JetOrderTooLow(_))));
        assert_eq!(c.jet_order_for(2).unwrap(), 8);
    }
}
