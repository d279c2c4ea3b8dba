//! Ready-made configurations for the five published experiments.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use thiserror::Error;

use crate::config::{
    CoefficientsConfig, GridConfig, OutputConfig, ParamsConfig, SimConfig, SolverConfig, TimeConfig,
};

pub const PRESET_NAMES: [&str; 5] = ["exp1", "exp2", "exp3", "exp4", "exp5"];

/// Largest number of energy rows a preset writes.
const RECORD_CAP: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PresetError {
    #[error("unknown preset {0:?}; expected one of exp1, exp2, exp3, exp4, exp5")]
    UnknownName(String),
    #[error("preset {name} has no variant {variant:?}; available: {}", .available.join(", "))]
    UnknownVariant {
        name: String,
        variant: String,
        available: Vec<String>,
    },
}

/// Harvesting pairs of the first experiment with their run lengths.
pub const EXP1_PAIRS: [(f64, f64, f64); 11] = [
    (1.5, 0.08, 200.0),
    (0.08, 1.5, 200.0),
    (1.5, 1.5, 200.0),
    (0.0006, 0.0, 2000.0),
    (0.0, 0.0006, 2000.0),
    (0.0009, 0.0005, 2000.0),
    (0.0009, 0.001, 2000.0),
    (0.0009, 0.0012, 2000.0),
    (0.0009, 0.0015, 2000.0),
    (0.0009, 0.002, 2000.0),
    (0.0009, 0.0025, 2000.0),
];

pub const EXP2_PAIRS: [(f64, f64); 2] = [(0.0009, 0.0009), (0.0009, 0.001)];

/// Contour times of the third experiment: `T + kπ/2` for `T = 13.74`.
pub fn exp3_snapshot_times() -> Vec<f64> {
    (0..5).map(|k| 13.74 + k as f64 * PI / 2.0).collect()
}

fn pair_label(mu: f64, nu: f64) -> String {
    format!("{mu},{nu}")
}

/// Variant names accepted by `preset`; the first one is the default.
pub fn variants(name: &str) -> Result<Vec<String>, PresetError> {
    Ok(match name {
        "exp1" => EXP1_PAIRS.iter().map(|&(m, n, _)| pair_label(m, n)).collect(),
        "exp2" => EXP2_PAIRS.iter().map(|&(m, n)| pair_label(m, n)).collect(),
        "exp3" | "exp4" => vec!["default".to_string()],
        "exp5" => vec!["equal".to_string(), "unequal".to_string()],
        other => return Err(PresetError::UnknownName(other.to_string())),
    })
}

fn parse_pair(s: &str) -> Option<(f64, f64)> {
    let (a, b) = s.split_once(',')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

struct Builder {
    k: &'static str,
    r: &'static str,
    u0: &'static str,
    v0: &'static str,
    mu: f64,
    nu: f64,
    t_end: f64,
    snapshots: Vec<f64>,
    provenance: Vec<(&'static str, &'static str)>,
}

impl Builder {
    fn build(self) -> SimConfig {
        let dt = 0.1;
        let steps = (self.t_end / dt).round() as usize;
        let mut provenance: BTreeMap<String, String> = [
            ("grid.n", "inferred: mesh not stated, 33x33 vertices"),
            ("params.d1", "paper"),
            ("params.d2", "paper"),
            ("params.mu", "paper"),
            ("params.nu", "paper"),
            ("coefficients", "paper"),
            ("time.record_every", "inferred: caps the energy table near 10^4 rows"),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        for (k, v) in self.provenance {
            provenance.insert(k.to_string(), v.to_string());
        }
        SimConfig {
            grid: GridConfig::default(),
            time: TimeConfig {
                dt,
                t_end: self.t_end,
                record_every: steps.div_ceil(RECORD_CAP).max(1),
                snapshot_times: self.snapshots,
            },
            params: ParamsConfig {
                d1: 1.0,
                d2: 1.0,
                mu: self.mu,
                nu: self.nu,
            },
            coefficients: CoefficientsConfig {
                k: self.k.to_string(),
                r: self.r.to_string(),
                u0: self.u0.to_string(),
                v0: self.v0.to_string(),
            },
            output: OutputConfig::default(),
            solver: SolverConfig::default(),
            provenance,
        }
    }
}

const DT_INFERRED: (&str, &str) = ("time.dt", "inferred: step size only stated for the first experiment");

/// Configuration of experiment `name`, optionally choosing a variant.
pub fn preset(name: &str, variant: Option<&str>) -> Result<SimConfig, PresetError> {
    let available = variants(name)?;
    let variant = variant.unwrap_or(&available[0]);
    let unknown = || PresetError::UnknownVariant {
        name: name.to_string(),
        variant: variant.to_string(),
        available: available.clone(),
    };

    let builder = match name {
        "exp1" => {
            let (mu, nu) = parse_pair(variant).ok_or_else(unknown)?;
            let &(_, _, t_end) = EXP1_PAIRS
                .iter()
                .find(|&&(m, n, _)| m == mu && n == nu)
                .ok_or_else(unknown)?;
            let long = t_end > 1000.0;
            let snapshots = if (mu, nu) == (1.5, 0.08) { vec![1.6] } else { vec![] };
            Builder {
                k: "2.1+cos(pi*x)*cos(pi*y)",
                r: "1.2",
                u0: "1.8",
                v0: "1.8",
                mu,
                nu,
                t_end,
                snapshots,
                provenance: vec![
                    ("time.dt", "paper"),
                    (
                        "time.t_end",
                        if long {
                            "paper: run until t=2000"
                        } else {
                            "inferred: short-time figure horizon"
                        },
                    ),
                    ("time.snapshot_times", "paper: contours at t=1.6"),
                ],
            }
        }
        "exp2" => {
            let (mu, nu) = parse_pair(variant).ok_or_else(unknown)?;
            if !EXP2_PAIRS.contains(&(mu, nu)) {
                return Err(unknown());
            }
            Builder {
                k: "2.5+sin(x)*sin(y)",
                r: "1.5+cos(x)*cos(y)",
                u0: "1.2",
                v0: "1.2",
                mu,
                nu,
                t_end: 3000.0,
                snapshots: vec![],
                provenance: vec![DT_INFERRED, ("time.t_end", "paper: plotted until t=3000")],
            }
        }
        "exp3" | "exp4" if variant != "default" => return Err(unknown()),
        "exp3" => Builder {
            k: "(2.1+cos(pi*x)*cos(pi*y))*(1.1+cos(t))",
            r: "1.0",
            u0: "0.5",
            v0: "1.5",
            mu: 0.0009,
            nu: 0.0025,
            t_end: 200.0,
            snapshots: exp3_snapshot_times(),
            provenance: vec![
                DT_INFERRED,
                ("time.t_end", "inferred: covers the contour times and the periodicity window"),
                ("time.snapshot_times", "paper: T=13.74 and T+k*pi/2, k=0..4"),
            ],
        },
        "exp4" => Builder {
            k: "(1.2+2.5*pi^2*exp(-(x-0.5)^2-(y-0.5)^2))*(1.0+0.3*cos(t))",
            r: "1",
            u0: "1.6",
            v0: "1.6",
            mu: 0.0009,
            nu: 0.0025,
            t_end: 1600.0,
            snapshots: vec![80.0, 1600.0],
            provenance: vec![
                DT_INFERRED,
                ("time.t_end", "paper: last contour at t=1600"),
                ("time.snapshot_times", "paper: contours at t=80 and t=1600"),
            ],
        },
        "exp5" => {
            let (mu, nu) = match variant {
                "equal" => (0.0009, 0.0009),
                "unequal" => (0.0009, 0.001),
                _ => return Err(unknown()),
            };
            Builder {
                k: "(2.5+cos(x)*cos(y))*(1.2+cos(t))",
                r: "(1.5+sin(x)*sin(y))*(1.2+sin(t))",
                u0: "1.2",
                v0: "1.2",
                mu,
                nu,
                t_end: 200.0,
                snapshots: vec![],
                provenance: vec![DT_INFERRED, ("time.t_end", "inferred: short-time figure horizon")],
            }
        }
        other => return Err(PresetError::UnknownName(other.to_string())),
    };
    Ok(builder.build())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_variant_builds_a_valid_config() {
        for name in PRESET_NAMES {
            for v in variants(name).unwrap() {
                let c = preset(name, Some(&v)).unwrap();
                c.validate().unwrap_or_else(|e| panic!("{name}/{v}: {e}"));
                let steps = (c.time.t_end / c.time.dt).round() as usize;
                assert!(steps.div_ceil(c.time.record_every) <= RECORD_CAP);
            }
        }
    }

    #[test]
    fn default_exp1_variant() {
        let c = preset("exp1", None).unwrap();
        assert_eq!((c.params.mu, c.params.nu), (1.5, 0.08));
        assert_eq!(c.time.snapshot_times, vec![1.6]);
        assert_eq!(c.time.record_every, 1);
        let long = preset("exp1", Some("0.0009,0.0012")).unwrap();
        assert_eq!(long.time.t_end, 2000.0);
        assert_eq!(long.time.record_every, 2);
    }

    #[test]
    fn unknown_inputs() {
        assert!(matches!(preset("exp9", None), Err(PresetError::UnknownName(_))));
        assert!(matches!(preset("exp1", Some("0.3,0.3")), Err(PresetError::UnknownVariant { .. })));
        assert!(matches!(preset("exp5", Some("odd")), Err(PresetError::UnknownVariant { .. })));
        assert!(matches!(preset("exp3", Some("x")), Err(PresetError::UnknownVariant { .. })));
    }
}
