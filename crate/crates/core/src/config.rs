//! Configuration ingestion and the experiment sweep runner.
//!
//! A cell is described by one JSON document. Every quantity is in SI units
//! (watts, bits, seconds); decibels appear only inside rate-table files,
//! where the column is explicitly suffixed `_db`. The schema is strict:
//! unknown keys are rejected by name, and every invariant violation names
//! the offending key.
//!
//! ```json
//! {
//!   "zones": [ { "sigma2_w": 1e-3, "lambda_per_s": 0.5 } ],
//!   "packet_bits": 12e6,
//!   "packet_period_s": 1.0,
//!   "file_bits": 5e6,
//!   "b_w": 0.1,
//!   "n_max": 4,
//!   "epsilon": 0.01,
//!   "p_min_w": 1e-4,
//!   "p_max_w": 10.0,
//!   "rate_curve": { "analytic": { "bandwidth_hz": 20e6,
//!                                  "spectral_efficiency": 0.6,
//!                                  "max_rate_bps": 1e8 } }
//! }
//! ```
//!
//! `rate_curve` may instead reference a lookup table,
//! `{ "table": { "path": "lte.csv" } }`, resolved relative to the config
//! file; the optional `optimizer` object tunes the search controls and
//! defaults sensibly when absent.
//!
//! A sweep is a second, smaller document: a swept variable
//! (`traffic_scale`, `power`, or `b`), a list of positive values, and a
//! comparison mode (`local`, `global`, or `both`). [`run_sweep`] evaluates
//! the points in parallel and [`write_sweep_csv`] emits them, in input
//! order, under the fixed header [`SWEEP_CSV_HEADER`].

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed_point::{PowerVector, TrafficParams};
use crate::flow_level::{FlowParams, PolicyEvaluator, PowerPolicy};
use crate::optimizer::{local_policy, optimize_policy, OptimizationResult, OptimizerConfig};
use crate::rate_model::{RateCurve, ZoneConfig};
use crate::state_space::StateSpace;

/// The pinned header of every sweep CSV.
pub const SWEEP_CSV_HEADER: &str =
    "sweep_value,eta_local_bits_per_joule,eta_global_bits_per_joule,blocking_local,blocking_global,policy_json";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawZone {
    sigma2_w: f64,
    lambda_per_s: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnalytic {
    bandwidth_hz: f64,
    spectral_efficiency: f64,
    max_rate_bps: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTable {
    path: String,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawRateCurve {
    Analytic(RawAnalytic),
    Table(RawTable),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    zones: Vec<RawZone>,
    packet_bits: f64,
    packet_period_s: f64,
    file_bits: f64,
    b_w: f64,
    n_max: u32,
    epsilon: f64,
    p_min_w: f64,
    p_max_w: f64,
    rate_curve: RawRateCurve,
    #[serde(default)]
    optimizer: OptimizerConfig,
}

/// A fully validated cell description: zones, traffic, QoS, power support,
/// rate curve, and optimizer controls.
#[derive(Debug, Clone)]
pub struct CellConfig {
    /// Per-zone radio conditions and arrival rates.
    pub zones: Vec<ZoneConfig>,
    /// Packet-level demand defining the full-rate condition.
    pub traffic: TrafficParams,
    /// Flow sizes and the blocking tolerance.
    pub flow: FlowParams,
    /// Load-independent power draw `b`, watts.
    pub fixed_cost_w: f64,
    /// Admission cap on the number of concurrent flows.
    pub n_max: u32,
    /// Lower end of the per-zone power support, watts.
    pub p_min_w: f64,
    /// Upper end of the per-zone power support, watts.
    pub p_max_w: f64,
    /// SINR-to-throughput mapping.
    pub rate_curve: RateCurve,
    /// Search controls for the power optimizers.
    pub optimizer: OptimizerConfig,
}

fn positive(name: &str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::Config(format!(
            "{name}: must be positive and finite (got {value})"
        )))
    }
}

fn parse_raw<'de, T: Deserialize<'de>>(text: &'de str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| Error::Config(e.to_string()))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

impl CellConfig {
    /// Loads and validates a config file; table paths resolve relative to it.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = read_file(path)?;
        Self::from_json_str(&text, path.parent())
    }

    /// Parses and validates a config document. `base_dir` anchors relative
    /// rate-table paths; when `None`, they resolve against the working
    /// directory.
    pub fn from_json_str(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let raw: RawConfig = parse_raw(text)?;
        if raw.zones.is_empty() {
            return Err(Error::Config("zones: at least one zone is required".into()));
        }
        let zones = raw
            .zones
            .iter()
            .enumerate()
            .map(|(j, z)| {
                positive(&format!("zones[{j}].sigma2_w"), z.sigma2_w)?;
                if !(z.lambda_per_s.is_finite() && z.lambda_per_s >= 0.0) {
                    return Err(Error::Config(format!(
                        "zones[{j}].lambda_per_s: must be finite and nonnegative (got {})",
                        z.lambda_per_s
                    )));
                }
                Ok(ZoneConfig::new(j, z.sigma2_w, z.lambda_per_s))
            })
            .collect::<Result<Vec<_>>>()?;
        let traffic = TrafficParams {
            packet_bits: positive("packet_bits", raw.packet_bits)?,
            packet_period_s: positive("packet_period_s", raw.packet_period_s)?,
        };
        let flow = FlowParams {
            file_bits: positive("file_bits", raw.file_bits)?,
            epsilon: raw.epsilon,
        };
        if !(raw.epsilon > 0.0 && raw.epsilon < 1.0) {
            return Err(Error::Config(format!(
                "epsilon: must lie strictly between 0 and 1 (got {})",
                raw.epsilon
            )));
        }
        if raw.n_max == 0 {
            return Err(Error::Config(
                "n_max: at least one concurrent flow must be admissible".into(),
            ));
        }
        let p_min_w = positive("p_min_w", raw.p_min_w)?;
        let p_max_w = positive("p_max_w", raw.p_max_w)?;
        if p_max_w < p_min_w {
            return Err(Error::Config(format!(
                "p_max_w: must be at least p_min_w (got {p_max_w} < {p_min_w})"
            )));
        }
        let rate_curve = match raw.rate_curve {
            RawRateCurve::Analytic(a) => {
                RateCurve::analytic(a.bandwidth_hz, a.spectral_efficiency, a.max_rate_bps)?
            }
            RawRateCurve::Table(t) => {
                let mut table_path = PathBuf::from(&t.path);
                if table_path.is_relative() {
                    if let Some(base) = base_dir {
                        table_path = base.join(table_path);
                    }
                }
                RateCurve::from_csv_path(&table_path)?
            }
        };
        let optimizer = raw.optimizer;
        optimizer.validate()?;
        Ok(Self {
            zones,
            traffic,
            flow,
            fixed_cost_w: positive("b_w", raw.b_w)?,
            n_max: raw.n_max,
            p_min_w,
            p_max_w,
            rate_curve,
            optimizer,
        })
    }

    /// Enumerates the admissible states for this cell.
    pub fn state_space(&self) -> Result<StateSpace> {
        StateSpace::new(self.zones.len(), self.n_max)
    }

    /// An evaluator bound to this config's physics.
    pub fn evaluator<'a>(&'a self, space: &'a StateSpace) -> PolicyEvaluator<'a> {
        PolicyEvaluator::new(
            space,
            &self.zones,
            &self.rate_curve,
            &self.traffic,
            &self.flow,
            self.fixed_cost_w,
        )
    }

    /// The per-state-optimal ("local") policy for this cell.
    pub fn local_policy(&self, space: &StateSpace) -> Result<PowerPolicy> {
        local_policy(
            space,
            &self.zones,
            &self.rate_curve,
            &self.traffic,
            self.fixed_cost_w,
            self.p_min_w,
            self.p_max_w,
            &self.optimizer,
        )
    }

    /// The globally optimized policy for this cell (traffic-averaged
    /// efficiency under the blocking constraint).
    pub fn optimize(&self, space: &StateSpace) -> Result<OptimizationResult> {
        optimize_policy(
            space,
            &self.zones,
            &self.rate_curve,
            &self.traffic,
            &self.flow,
            self.fixed_cost_w,
            self.p_min_w,
            self.p_max_w,
            &self.optimizer,
        )
    }
}

/// Which knob a sweep turns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Multiply every zone's arrival rate by the swept value.
    TrafficScale,
    /// Evaluate the constant policy transmitting the swept power everywhere.
    Power,
    /// Replace the load-independent power draw `b` by the swept value.
    B,
}

/// Which policies a sweep reports per point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Per-state optima only.
    Local,
    /// Globally optimized policy only.
    Global,
    /// Both, side by side.
    Both,
}

/// A declarative experiment: one variable, its values, and what to compare.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// The swept knob.
    pub variable: SweepVariable,
    /// Values taken by the knob, evaluated in order.
    pub values: Vec<f64>,
    /// Which comparison columns to fill.
    pub mode: SweepMode,
}

impl SweepSpec {
    /// Loads and validates a sweep description.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = read_file(path.as_ref())?;
        Self::from_json_str(&text)
    }

    /// Parses and validates a sweep description.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let spec: SweepSpec = parse_raw(text)?;
        if spec.values.is_empty() {
            return Err(Error::Config(
                "values: a sweep needs at least one value".into(),
            ));
        }
        for (i, &v) in spec.values.iter().enumerate() {
            positive(&format!("values[{i}]"), v)?;
        }
        Ok(spec)
    }

    fn wants_local(&self) -> bool {
        matches!(self.mode, SweepMode::Local | SweepMode::Both)
    }

    fn wants_global(&self) -> bool {
        matches!(self.mode, SweepMode::Global | SweepMode::Both)
    }
}

/// One evaluated policy at one sweep point.
#[derive(Debug, Clone, Serialize)]
pub struct PolicyOutcome {
    /// Traffic-averaged efficiency, bits per joule.
    pub eta_bits_per_joule: f64,
    /// Stationary blocking probability.
    pub blocking_probability: f64,
    /// Whether blocking stays within the configured tolerance.
    pub feasible: bool,
    /// Power vectors keyed by state text, e.g. `"1,0": [0.02, 0.0001]`.
    pub policy: BTreeMap<String, Vec<f64>>,
}

/// One row of a sweep: the swept value and the outcomes that were requested.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    /// The value the swept variable took.
    pub sweep_value: f64,
    /// Outcome of the per-state-optimal policy, when requested.
    pub local: Option<PolicyOutcome>,
    /// Outcome of the globally optimized policy, when requested.
    pub global: Option<PolicyOutcome>,
}

impl SweepRow {
    /// The most refined policy this row carries, as one JSON object.
    pub fn policy_json(&self) -> String {
        let policy = self
            .global
            .as_ref()
            .or(self.local.as_ref())
            .map(|o| &o.policy);
        match policy {
            Some(map) => serde_json::to_string(map).expect("a power map always serializes"),
            None => "{}".into(),
        }
    }
}

fn evaluate_outcome(
    config: &CellConfig,
    space: &StateSpace,
    policy: &PowerPolicy,
) -> Result<PolicyOutcome> {
    let mut evaluator = config.evaluator(space);
    evaluator.load_policy(policy)?;
    let eval = evaluator.evaluate()?;
    Ok(PolicyOutcome {
        eta_bits_per_joule: eval.eta_bits_per_joule,
        blocking_probability: eval.distribution.blocking_probability,
        feasible: eval.distribution.qos_satisfied(config.flow.epsilon),
        policy: policy.to_map(space),
    })
}

fn global_outcome(space: &StateSpace, result: OptimizationResult) -> PolicyOutcome {
    PolicyOutcome {
        eta_bits_per_joule: result.objective_bits_per_joule,
        blocking_probability: result.blocking_probability,
        feasible: result.feasible,
        policy: result.policy.to_map(space),
    }
}

/// Evaluates every sweep point against `config`.
///
/// Points run in parallel; the returned rows follow the input order. For
/// `traffic_scale` the local policy is computed once and reused (per-state
/// optima do not depend on arrival rates); for `b` it is recomputed, since
/// the fixed cost shifts every efficiency trade-off; for `power` both
/// columns report the same constant policy, which must lie within the
/// configured power support.
pub fn run_sweep(config: &CellConfig, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    let space = config.state_space()?;
    let shared_local = match spec.variable {
        SweepVariable::TrafficScale if spec.wants_local() => {
            Some(config.local_policy(&space)?)
        }
        _ => None,
    };

    spec.values
        .par_iter()
        .map(|&value| {
            let point = at_point(config, value, spec.variable)?;
            let point_space = point.state_space()?;
            let (mut local, mut global) = (None, None);
            match spec.variable {
                SweepVariable::Power => {
                    let powers = PowerVector(vec![value; point.zones.len()]);
                    powers.validate_bounds(point.p_min_w, point.p_max_w)?;
                    let policy = PowerPolicy::constant(&point_space, powers)?;
                    let outcome = evaluate_outcome(&point, &point_space, &policy)?;
                    if spec.wants_local() {
                        local = Some(outcome.clone());
                    }
                    if spec.wants_global() {
                        global = Some(outcome);
                    }
                }
                SweepVariable::TrafficScale | SweepVariable::B => {
                    if spec.wants_local() {
                        let policy = match &shared_local {
                            Some(p) => p.clone(),
                            None => point.local_policy(&point_space)?,
                        };
                        local = Some(evaluate_outcome(&point, &point_space, &policy)?);
                    }
                    if spec.wants_global() {
                        let result = point.optimize(&point_space)?;
                        global = Some(global_outcome(&point_space, result));
                    }
                }
            }
            Ok(SweepRow {
                sweep_value: value,
                local,
                global,
            })
        })
        .collect()
}

/// The config with the swept variable set to `value`.
fn at_point(config: &CellConfig, value: f64, variable: SweepVariable) -> Result<CellConfig> {
    let mut point = config.clone();
    match variable {
        SweepVariable::TrafficScale => {
            for zone in &mut point.zones {
                zone.lambda_per_s *= value;
            }
        }
        SweepVariable::Power => {}
        SweepVariable::B => point.fixed_cost_w = positive("b", value)?,
    }
    Ok(point)
}

/// Writes rows under [`SWEEP_CSV_HEADER`]. Unrequested columns stay empty;
/// numbers use the shortest round-trip decimal form, so output is
/// byte-stable for a fixed config and spec.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let io_err = |e: csv::Error| Error::Config(format!("sweep csv: {e}"));
    writer
        .write_record(SWEEP_CSV_HEADER.split(','))
        .map_err(io_err)?;
    for row in rows {
        writer
            .serialize((
                row.sweep_value,
                row.local.as_ref().map(|o| o.eta_bits_per_joule),
                row.global.as_ref().map(|o| o.eta_bits_per_joule),
                row.local.as_ref().map(|o| o.blocking_probability),
                row.global.as_ref().map(|o| o.blocking_probability),
                row.policy_json(),
            ))
            .map_err(io_err)?;
    }
    writer.flush().map_err(|e| Error::Config(format!("sweep csv: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_zone_json() -> String {
        r#"{
            "zones": [ { "sigma2_w": 1e-3, "lambda_per_s": 0.5 } ],
            "packet_bits": 12e6,
            "packet_period_s": 1.0,
            "file_bits": 5e6,
            "b_w": 0.1,
            "n_max": 2,
            "epsilon": 0.1,
            "p_min_w": 1e-4,
            "p_max_w": 10.0,
            "rate_curve": { "analytic": { "bandwidth_hz": 20e6,
                                           "spectral_efficiency": 0.6,
                                           "max_rate_bps": 1e8 } },
            "optimizer": { "grid_points_per_decade": 4,
                           "max_sweeps": 8,
                           "multistart_seeds": 0 }
        }"#
        .to_string()
    }

    #[test]
    fn full_document_round_trips() {
        let cfg = CellConfig::from_json_str(&single_zone_json(), None).unwrap();
        assert_eq!(cfg.zones.len(), 1);
        assert_eq!(cfg.n_max, 2);
        assert_eq!(cfg.flow.epsilon, 0.1);
        assert_eq!(cfg.optimizer.grid_points_per_decade, 4);
        // 20 MHz * 0.6 * log2(1 + 1) = 12 Mbit/s at 0 dB.
        assert!((cfg.rate_curve.throughput(1.0) - 12e6).abs() < 1.0);
    }

    #[test]
    fn two_zone_example_loads() {
        let text = r#"{
            "zones": [ { "sigma2_w": 1e-3, "lambda_per_s": 0.3 },
                       { "sigma2_w": 0.000333333333333333, "lambda_per_s": 0.9 } ],
            "packet_bits": 12e6,
            "packet_period_s": 1.0,
            "file_bits": 5e6,
            "b_w": 0.1,
            "n_max": 4,
            "epsilon": 0.01,
            "p_min_w": 1e-4,
            "p_max_w": 10.0,
            "rate_curve": { "analytic": { "bandwidth_hz": 20e6,
                                           "spectral_efficiency": 0.6,
                                           "max_rate_bps": 1e8 } }
        }"#;
        let cfg = CellConfig::from_json_str(text, None).unwrap();
        assert_eq!(cfg.zones.len(), 2);
        assert!((cfg.zones[1].lambda_per_s - 3.0 * cfg.zones[0].lambda_per_s).abs() < 1e-12);
        assert_eq!(cfg.optimizer, OptimizerConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let text = single_zone_json().replace("\"b_w\": 0.1,", "\"b_w\": 0.1, \"bogus_key\": 1,");
        let err = CellConfig::from_json_str(&text, None).unwrap_err();
        assert!(
            err.to_string().contains("bogus_key"),
            "error should name the unknown key: {err}"
        );
    }

    #[test]
    fn missing_keys_are_reported_by_name() {
        let text = single_zone_json().replace("\"epsilon\": 0.1,", "");
        let err = CellConfig::from_json_str(&text, None).unwrap_err();
        assert!(
            err.to_string().contains("epsilon"),
            "error should name the missing key: {err}"
        );
    }

    #[test]
    fn ill_typed_values_are_located() {
        let text = single_zone_json().replace("\"sigma2_w\": 1e-3", "\"sigma2_w\": \"loud\"");
        let err = CellConfig::from_json_str(&text, None).unwrap_err();
        assert!(
            err.to_string().contains("sigma2_w"),
            "error should locate the ill-typed key: {err}"
        );
    }

    #[test]
    fn invariant_violations_name_the_key() {
        let zero_cap = single_zone_json().replace("\"n_max\": 2", "\"n_max\": 0");
        let err = CellConfig::from_json_str(&zero_cap, None).unwrap_err();
        assert!(err.to_string().contains("n_max"), "{err}");

        let bad_eps = single_zone_json().replace("\"epsilon\": 0.1", "\"epsilon\": 1.5");
        let err = CellConfig::from_json_str(&bad_eps, None).unwrap_err();
        assert!(err.to_string().contains("epsilon"), "{err}");

        let bad_noise = single_zone_json().replace("\"sigma2_w\": 1e-3", "\"sigma2_w\": 0.0");
        let err = CellConfig::from_json_str(&bad_noise, None).unwrap_err();
        assert!(err.to_string().contains("sigma2_w"), "{err}");

        let inverted = single_zone_json().replace("\"p_max_w\": 10.0", "\"p_max_w\": 1e-6");
        let err = CellConfig::from_json_str(&inverted, None).unwrap_err();
        assert!(err.to_string().contains("p_max_w"), "{err}");
    }

    #[test]
    fn table_paths_resolve_relative_to_the_config() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("flat.csv"),
            "sinr_db,rate_bps\n-50,1e6\n50,1e6\n",
        )
        .unwrap();
        let text = single_zone_json().replace(
            r#"{ "analytic": { "bandwidth_hz": 20e6,
                                           "spectral_efficiency": 0.6,
                                           "max_rate_bps": 1e8 } }"#,
            r#"{ "table": { "path": "flat.csv" } }"#,
        );
        let config_path = dir.path().join("cell.json");
        std::fs::write(&config_path, text).unwrap();
        let cfg = CellConfig::load(&config_path).unwrap();
        assert!((cfg.rate_curve.throughput(1.0) - 1e6).abs() < 1e-6);
    }

    #[test]
    fn sweep_spec_validates_values() {
        let empty = r#"{ "variable": "traffic_scale", "values": [], "mode": "both" }"#;
        let err = SweepSpec::from_json_str(empty).unwrap_err();
        assert!(err.to_string().contains("values"), "{err}");

        let negative = r#"{ "variable": "b", "values": [0.1, -1.0], "mode": "local" }"#;
        let err = SweepSpec::from_json_str(negative).unwrap_err();
        assert!(err.to_string().contains("values[1]"), "{err}");

        let unknown = r#"{ "variable": "voltage", "values": [1.0], "mode": "local" }"#;
        let err = SweepSpec::from_json_str(unknown).unwrap_err();
        assert!(err.to_string().contains("voltage"), "{err}");

        let ok = SweepSpec::from_json_str(
            r#"{ "variable": "power", "values": [0.01], "mode": "both" }"#,
        )
        .unwrap();
        assert_eq!(ok.variable, SweepVariable::Power);
    }

    #[test]
    fn traffic_sweep_reports_ordered_rows_with_global_at_least_local() {
        let cfg = CellConfig::from_json_str(&single_zone_json(), None).unwrap();
        let spec = SweepSpec::from_json_str(
            r#"{ "variable": "traffic_scale", "values": [0.5, 1.0], "mode": "both" }"#,
        )
        .unwrap();
        let rows = run_sweep(&cfg, &spec).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].sweep_value, 0.5);
        assert_eq!(rows[1].sweep_value, 1.0);
        for row in &rows {
            let local = row.local.as_ref().unwrap();
            let global = row.global.as_ref().unwrap();
            assert!(
                global.eta_bits_per_joule >= local.eta_bits_per_joule - 1e-9,
                "global {} must not fall below local {}",
                global.eta_bits_per_joule,
                local.eta_bits_per_joule
            );
            assert!((0.0..=1.0).contains(&local.blocking_probability));
            let parsed: BTreeMap<String, Vec<f64>> =
                serde_json::from_str(&row.policy_json()).unwrap();
            assert!(!parsed.is_empty());
        }
    }

    #[test]
    fn power_sweep_fills_both_columns_identically() {
        let cfg = CellConfig::from_json_str(&single_zone_json(), None).unwrap();
        let spec = SweepSpec::from_json_str(
            r#"{ "variable": "power", "values": [0.01, 0.05], "mode": "both" }"#,
        )
        .unwrap();
        let rows = run_sweep(&cfg, &spec).unwrap();
        for row in &rows {
            let (l, g) = (row.local.as_ref().unwrap(), row.global.as_ref().unwrap());
            assert_eq!(l.eta_bits_per_joule, g.eta_bits_per_joule);
            assert_eq!(l.blocking_probability, g.blocking_probability);
        }

        let out_of_bounds =
            SweepSpec::from_json_str(r#"{ "variable": "power", "values": [99.0], "mode": "local" }"#)
                .unwrap();
        assert!(run_sweep(&cfg, &out_of_bounds).is_err());
    }

    #[test]
    fn csv_output_is_deterministic_with_the_pinned_header() {
        let cfg = CellConfig::from_json_str(&single_zone_json(), None).unwrap();
        let spec = SweepSpec::from_json_str(
            r#"{ "variable": "traffic_scale", "values": [0.5], "mode": "local" }"#,
        )
        .unwrap();
        let render = || {
            let rows = run_sweep(&cfg, &spec).unwrap();
            let mut buf = Vec::new();
            write_sweep_csv(&rows, &mut buf).unwrap();
            buf
        };
        let first = render();
        let second = render();
        assert_eq!(first, second, "same config and spec must give the same bytes");
        let text = String::from_utf8(first).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), SWEEP_CSV_HEADER);
        let row = lines.next().unwrap();
        assert!(row.starts_with("0.5,"));
        // Global columns were not requested: they stay empty.
        let fields: Vec<&str> = row.splitn(6, ',').collect();
        assert_eq!(fields[2], "");
        assert_eq!(fields[4], "");
    }
}
