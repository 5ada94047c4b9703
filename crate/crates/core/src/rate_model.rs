//! SINR-to-throughput mapping for the shared downlink channel.
//!
//! A [`RateCurve`] maps a user's signal-to-interference-plus-noise ratio
//! (SINR) to the throughput that user would see with the whole channel to
//! itself. Two forms are supported:
//!
//! * an analytic truncated spectral-efficiency law
//!   `R(rho) = min(k * W * log2(1 + rho), R_max)`, and
//! * a lookup table of `(SINR dB, rate)` points, interpolated linearly in the
//!   dB domain — the natural exchange format for link-level simulation traces.
//!
//! # Example
//!
//! ```
//! use greencell::rate_model::{sinr, RateCurve};
//!
//! let curve = RateCurve::analytic(20e6, 0.6, 100e6).unwrap();
//! let rho = sinr(0.1, 1e-3); // 100, i.e. 20 dB
//! let rate = curve.throughput(rho);
//! assert!(rate > 0.0 && rate <= 100e6);
//! ```

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear SINR seen by a user fed with `power_w` watts of transmit power
/// against `sigma2_w` watts of effective noise for its radio conditions.
///
/// The ratio is linear in power: doubling `power_w` doubles the SINR.
pub fn sinr(power_w: f64, sigma2_w: f64) -> f64 {
    debug_assert!(sigma2_w > 0.0, "noise power must be positive");
    power_w / sigma2_w
}

/// Traffic zone: radio conditions plus flow arrival intensity.
///
/// A zone aggregates every position in the cell with the same average radio
/// conditions (`sigma2_w`), so all users of a zone share one effective noise
/// level and one per-zone transmit power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneConfig {
    /// Effective noise power for this zone's radio conditions, watts.
    pub sigma2_w: f64,
    /// Poisson flow arrival rate into this zone, flows per second.
    pub lambda_per_s: f64,
    /// Human-readable name used in reports.
    pub label: String,
}

impl ZoneConfig {
    /// Builds a zone with a default label `zone N` (1-based).
    pub fn new(index: usize, sigma2_w: f64, lambda_per_s: f64) -> Self {
        ZoneConfig {
            sigma2_w,
            lambda_per_s,
            label: format!("zone {}", index + 1),
        }
    }
}

/// Full-channel throughput as a function of linear SINR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RateCurve {
    /// `R(rho) = min(spectral_efficiency * bandwidth_hz * log2(1 + rho), max_rate_bps)`.
    Analytic {
        /// Channel bandwidth `W`, hertz.
        bandwidth_hz: f64,
        /// Efficiency factor `k` relative to the Shannon bound.
        spectral_efficiency: f64,
        /// Hard cap imposed by the modulation-and-coding ladder, bits/s.
        max_rate_bps: f64,
    },
    /// Piecewise-linear interpolation of `(sinr_db, rate_bps)` points.
    Table {
        /// Points sorted by strictly increasing `sinr_db`; rates are
        /// nonnegative and nondecreasing.
        points: Vec<(f64, f64)>,
    },
}

impl RateCurve {
    /// Builds the analytic truncated spectral-efficiency curve.
    ///
    /// All three parameters must be finite and strictly positive.
    pub fn analytic(bandwidth_hz: f64, spectral_efficiency: f64, max_rate_bps: f64) -> Result<Self> {
        for (name, v) in [
            ("bandwidth_hz", bandwidth_hz),
            ("spectral_efficiency", spectral_efficiency),
            ("max_rate_bps", max_rate_bps),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::RateCurve(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(RateCurve::Analytic {
            bandwidth_hz,
            spectral_efficiency,
            max_rate_bps,
        })
    }

    /// Builds a table curve, validating the monotonicity invariants.
    pub fn table(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::RateCurve("table needs at least one point".into()));
        }
        for (i, &(db, rate)) in points.iter().enumerate() {
            if !db.is_finite() || !rate.is_finite() {
                return Err(Error::RateCurve(format!("point {i} is not finite")));
            }
            if rate < 0.0 {
                return Err(Error::RateCurve(format!("rate at point {i} is negative")));
            }
            if i > 0 {
                let (prev_db, prev_rate) = points[i - 1];
                if db <= prev_db {
                    return Err(Error::RateCurve(format!(
                        "sinr_db must be strictly increasing; point {i} has {db} dB after {prev_db} dB"
                    )));
                }
                if rate < prev_rate {
                    return Err(Error::RateCurve(format!(
                        "rate_bps must be nondecreasing; point {i} drops to {rate}"
                    )));
                }
            }
        }
        Ok(RateCurve::Table { points })
    }

    /// Reads a table curve from CSV with the header `sinr_db,rate_bps`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        {
            let headers = rdr
                .headers()
                .map_err(|e| Error::RateCurve(format!("csv header: {e}")))?;
            let got: Vec<&str> = headers.iter().map(str::trim).collect();
            if got != ["sinr_db", "rate_bps"] {
                return Err(Error::RateCurve(format!(
                    "expected header sinr_db,rate_bps, got {}",
                    got.join(",")
                )));
            }
        }
        let mut points = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::RateCurve(format!("csv row {}: {e}", i + 1)))?;
            if record.len() != 2 {
                return Err(Error::RateCurve(format!(
                    "csv row {}: expected 2 fields, got {}",
                    i + 1,
                    record.len()
                )));
            }
            let parse = |field: &str, name: &str| -> Result<f64> {
                field.trim().parse::<f64>().map_err(|e| {
                    Error::RateCurve(format!("csv row {}: bad {name} {field:?}: {e}", i + 1))
                })
            };
            points.push((parse(&record[0], "sinr_db")?, parse(&record[1], "rate_bps")?));
        }
        RateCurve::table(points)
    }

    /// Reads a table curve from a CSV file.
    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_csv_reader(file)
    }

    /// Throughput in bits/s at linear SINR `rho`.
    ///
    /// Zero SINR yields zero rate for both curve forms. Table queries below
    /// the first point clamp to the first rate and queries beyond the last
    /// point saturate at the last rate, so the mapping never extrapolates.
    ///
    /// # Panics
    ///
    /// Debug builds assert `rho` is nonnegative and not NaN.
    pub fn throughput(&self, rho: f64) -> f64 {
        debug_assert!(rho >= 0.0, "SINR must be nonnegative, got {rho}");
        if rho <= 0.0 {
            return 0.0;
        }
        match self {
            RateCurve::Analytic {
                bandwidth_hz,
                spectral_efficiency,
                max_rate_bps,
            } => (spectral_efficiency * bandwidth_hz * (1.0 + rho).log2()).min(*max_rate_bps),
            RateCurve::Table { points } => {
                let db = 10.0 * rho.log10();
                if db <= points[0].0 {
                    return points[0].1;
                }
                let last = points[points.len() - 1];
                if db >= last.0 {
                    return last.1;
                }
                // `partition_point` finds the first point strictly above the
                // query; the previous point exists because of the clamp above.
                let hi = points.partition_point(|&(x, _)| x <= db);
                let (x0, y0) = points[hi - 1];
                let (x1, y1) = points[hi];
                y0 + (y1 - y0) * (db - x0) / (x1 - x0)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EPS: f64 = 1e-12;

    #[test]
    fn zero_sinr_gives_zero_rate() {
        let analytic = RateCurve::analytic(20e6, 0.6, 100e6).unwrap();
        assert_eq!(analytic.throughput(0.0), 0.0);
        let table = RateCurve::table(vec![(0.0, 10e6), (10.0, 20e6)]).unwrap();
        assert_eq!(table.throughput(0.0), 0.0, "table floor at zero SINR");
    }

    #[test]
    fn analytic_curve_caps_at_max_rate() {
        let curve = RateCurve::analytic(20e6, 0.6, 100e6).unwrap();
        let rate = curve.throughput(1e3);
        // 0.6 * 20 MHz * log2(1001) = 119.6 Mbit/s before the cap.
        assert!(
            (rate - 100e6).abs() < EPS * 100e6,
            "rate should cap at 100 Mbit/s, got {rate}"
        );
    }

    #[test]
    fn table_interpolates_linearly_in_db() {
        let curve = RateCurve::table(vec![(0.0, 10e6), (10.0, 20e6)]).unwrap();
        // 5 dB is the midpoint in the dB domain.
        let rho = 10f64.powf(0.5);
        let rate = curve.throughput(rho);
        assert!(
            (rate - 15e6).abs() < 1e-6 * 15e6,
            "midpoint query should give 15 Mbit/s, got {rate}"
        );
    }

    #[test]
    fn table_clamps_below_and_saturates_above() {
        let curve = RateCurve::table(vec![(0.0, 10e6), (10.0, 20e6)]).unwrap();
        assert_eq!(curve.throughput(0.5), 10e6, "below first point clamps");
        assert_eq!(curve.throughput(1e4), 20e6, "beyond last point saturates");
    }

    #[test]
    fn table_rejects_non_monotone_input() {
        assert!(RateCurve::table(vec![(0.0, 1.0), (0.0, 2.0)]).is_err());
        assert!(RateCurve::table(vec![(0.0, 2.0), (5.0, 1.0)]).is_err());
        assert!(RateCurve::table(vec![]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let csv = "sinr_db,rate_bps\n-5,2e6\n0,10e6\n10,20e6\n";
        let curve = RateCurve::from_csv_reader(csv.as_bytes()).unwrap();
        assert_eq!(curve.throughput(1.0), 10e6);
        let bad = "snr,rate\n0,1\n";
        assert!(RateCurve::from_csv_reader(bad.as_bytes()).is_err());
    }

    #[test]
    fn sinr_examples() {
        assert_eq!(sinr(0.0, 1e-3), 0.0);
        assert_eq!(sinr(0.1, 1e-3), 100.0);
        // A zone with 8x lower noise sees 8x the SINR for equal power.
        assert_eq!(sinr(1.0, 0.125), 8.0);
    }

    proptest! {
        // Throughput is nondecreasing in SINR for any valid curve.
        #[test]
        fn throughput_is_monotone(lo in 0.0f64..1e4, delta in 0.0f64..1e4) {
            let analytic = RateCurve::analytic(20e6, 0.6, 100e6).unwrap();
            let table = RateCurve::table(vec![(-10.0, 1e6), (0.0, 10e6), (20.0, 80e6)]).unwrap();
            prop_assert!(analytic.throughput(lo + delta) >= analytic.throughput(lo));
            prop_assert!(table.throughput(lo + delta) >= table.throughput(lo));
        }

        // SINR is linear in power.
        #[test]
        fn sinr_linear_in_power(p in 1e-6f64..1e2, scale in 1e-3f64..1e3, s2 in 1e-6f64..1.0) {
            let lhs = sinr(scale * p, s2);
            let rhs = scale * sinr(p, s2);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()));
        }
    }
}
