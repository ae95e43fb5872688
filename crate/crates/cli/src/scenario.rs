use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gridflow::reconfig::ObjectiveWeights;
use gridflow::{fixtures, network, Network};
use serde::{Deserialize, Serialize};

/// One reconfiguration run as read from a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDescriptor {
    #[serde(default)]
    pub name: Option<String>,
    /// Case file, relative to the scenario file, or a bundled fixture name.
    pub case: String,
    #[serde(default = "one")]
    pub load_scale: f64,
    pub weights: ObjectiveWeights,
    #[serde(default = "yes")]
    pub loop_cuts: bool,
    /// Minimum power factor at the supply point.
    #[serde(default)]
    pub power_factor: Option<f64>,
    /// Cross-check the result against exhaustive enumeration.
    #[serde(default)]
    pub oracle: bool,
    #[serde(default)]
    pub v_min: Option<f64>,
    #[serde(default)]
    pub v_max: Option<f64>,
    #[serde(default = "default_gap")]
    pub gap: f64,
    #[serde(default)]
    pub time_limit_s: Option<f64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

fn default_gap() -> f64 {
    1e-6
}

impl ScenarioDescriptor {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let sc: Self = serde_json::from_str(&text).map_err(gridflow::Error::from)?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        check_scale(self.load_scale)?;
        self.weights.validate()?;
        if !(self.gap >= 0.0 && self.gap.is_finite()) {
            bail!("gap must be a non-negative number");
        }
        if let Some(t) = self.time_limit_s {
            if !(t > 0.0 && t.is_finite()) {
                bail!("time limit must be positive");
            }
        }
        Ok(())
    }
}

pub fn check_scale(scale: f64) -> Result<()> {
    if !(scale > 0.0 && scale.is_finite()) {
        bail!("load scale must be positive, got {scale}");
    }
    Ok(())
}

/// Reads a case file, falling back to the bundled fixtures by name.
pub fn load_case(spec: &str, base: Option<&Path>) -> Result<Network> {
    let path = match base {
        Some(dir) => dir.join(spec),
        None => PathBuf::from(spec),
    };
    if path.is_file() {
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        return network::parse_case(&text).with_context(|| format!("parsing {}", path.display()));
    }
    match fixtures::by_name(spec) {
        Some(text) => Ok(network::parse_case(text)?),
        None => bail!("no case file or bundled fixture named {spec:?}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_descriptor_takes_defaults() {
        let sc: ScenarioDescriptor =
            serde_json::from_str(r#"{"case": "ieee33", "weights": {"alpha": 1.0, "beta": 0.0, "gamma": 0.0}}"#)
                .unwrap();
        assert_eq!(sc.load_scale, 1.0);
        assert!(sc.loop_cuts);
        assert!(!sc.oracle);
        assert_eq!(sc.gap, 1e-6);
        assert!(sc.validate().is_ok());
    }

    #[test]
    fn unknown_fields_and_bad_values_are_rejected() {
        let typo = r#"{"case": "ieee33", "weights": {"alpha": 1.0, "beta": 0.0, "gamma": 0.0}, "loopcuts": false}"#;
        assert!(serde_json::from_str::<ScenarioDescriptor>(typo).is_err());
        let mut sc: ScenarioDescriptor =
            serde_json::from_str(r#"{"case": "ieee33", "weights": {"alpha": 1.0, "beta": 0.0, "gamma": 0.0}}"#)
                .unwrap();
        sc.load_scale = 0.0;
        assert!(sc.validate().is_err());
        sc.load_scale = 1.0;
        sc.weights.alpha = 0.0;
        assert!(sc.validate().is_err());
    }

    #[test]
    fn fixture_names_resolve() {
        assert_eq!(load_case("case141", None).unwrap().n_buses(), 141);
        assert!(load_case("missing.json", Some(Path::new("/nonexistent"))).is_err());
    }
}
