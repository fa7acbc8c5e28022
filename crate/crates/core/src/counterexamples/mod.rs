//! Constructions showing where commutator estimates fail or survive.
//!
//! * [`cef1_ratio`]: a log-log singular field with `grad v` in BMO against
//!   rescaled bumps; the ratio grows like `log log(1/r)`.
//! * [`bmo_hilbert_check`]: the one-dimensional logarithmic case, where the
//!   BMO bound does hold.
//! * [`cef2_ratio`]: frequency-shell data separating resonant and
//!   off-resonant interactions, for the regularity trade-off.

mod cef1;
mod cef2;
mod hilbert;

pub use cef1::{cef1_ratio, cef1_velocity_norms, Cef1Instance, Cef1VelocityNorms};
pub use cef2::{cef2_ratio, corollary_variants, phi_hat, Cef2Instance, CorollaryVariant, Shell};
pub use hilbert::{bmo_hilbert_batch, bmo_hilbert_check, BmoFamily, HilbertBatch};

use crate::error::{Error, Result};
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

/// One point of a ratio sweep.
#[derive(Debug, Clone, Serialize)]
pub struct RatioReport {
    /// `r` for the rescaled-bump family, `k` for the shell family.
    pub scale: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub ratio: f64,
    pub resonant: f64,
    pub off_resonant: f64,
    pub diagnostics: BTreeMap<String, f64>,
}

impl RatioReport {
    pub fn diagnostic(&self, key: &str) -> Option<f64> {
        self.diagnostics.get(key).copied()
    }
}

/// Reports at several scales, ordered as given, with a monotonicity verdict.
#[derive(Debug, Clone, Serialize)]
pub struct RatioSweep {
    pub reports: Vec<RatioReport>,
    /// Ratio strictly increases along the sweep order.
    pub increasing: bool,
}

impl RatioSweep {
    pub fn new(reports: Vec<RatioReport>) -> Result<Self> {
        if reports.len() < 3 {
            return Err(Error::Usage(format!(
                "a sweep needs at least 3 scales, got {}",
                reports.len()
            )));
        }
        let increasing = reports.windows(2).all(|w| w[1].ratio > w[0].ratio);
        Ok(Self { reports, increasing })
    }
}

pub const SWEEP_COLUMNS: [&str; 6] =
    ["scale", "numerator", "denominator", "ratio", "resonant", "off_resonant"];

/// Writes `scale,numerator,denominator,ratio,resonant,off_resonant` rows.
pub fn write_sweep_csv(path: &Path, reports: &[RatioReport]) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{}", SWEEP_COLUMNS.join(","))?;
    for r in reports {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.scale, r.numerator, r.denominator, r.ratio, r.resonant, r.off_resonant
        )?;
    }
    out.flush()
}
