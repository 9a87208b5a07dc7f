//! Analysis parameters shared by every stage of the pipeline.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Thresholds and resolutions for the windowed information-theoretic analysis.
///
/// Distances are metres, information is nats, times are seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Width of the centred sliding window.
    pub window_s: f64,
    /// Histogram bin width used to quantize positions and distances.
    pub bin_width: f64,
    /// Mutual information above which a hand and object are coupled.
    pub mi_on: f64,
    /// Mutual information below which a decaying coupling counts as docked.
    pub mi_off: f64,
    /// Hand–object proximity threshold.
    pub ho_dist: f64,
    /// Object–object proximity threshold.
    pub oo_dist: f64,
    /// Number of most recent samples inspected by the trend test.
    pub trend_n: usize,
    /// Multiplier applied to every entropy value.
    pub entropy_scale: f64,
    /// Restrict spatial computations to the x and y axes.
    pub planar: bool,
    /// Positional tolerance for scene-graph equality.
    pub pos_tol: f64,
    /// Temporal tolerance for boundary matching.
    pub tsa_tol: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            window_s: 1.0,
            bin_width: 0.01,
            mi_on: 0.05,
            mi_off: 0.05,
            ho_dist: 0.15,
            oo_dist: 0.20,
            trend_n: 20,
            entropy_scale: 1.0,
            planar: true,
            pos_tol: 0.02,
            tsa_tol: 0.5,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("window_s", self.window_s),
            ("bin_width", self.bin_width),
            ("mi_on", self.mi_on),
            ("mi_off", self.mi_off),
            ("ho_dist", self.ho_dist),
            ("oo_dist", self.oo_dist),
            ("entropy_scale", self.entropy_scale),
            ("pos_tol", self.pos_tol),
            ("tsa_tol", self.tsa_tol),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be a positive number, got {value}")));
            }
        }
        if self.trend_n < 2 {
            return Err(Error::InvalidConfig(format!("trend_n must be at least 2, got {}", self.trend_n)));
        }
        Ok(())
    }

    /// Parses a flat TOML document whose keys mirror the field names.
    /// Missing keys keep their defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Number of samples in a centred window at `rate`, forced odd.
    pub fn window_len(&self, rate: f64) -> usize {
        let n = (self.window_s * rate).round().max(1.0) as usize;
        if n % 2 == 0 {
            n + 1
        } else {
            n
        }
    }

    /// Samples on each side of the centre frame.
    pub fn half_window(&self, rate: f64) -> usize {
        self.window_len(rate) / 2
    }

    pub fn axes(&self) -> &'static [crate::Axis] {
        if self.planar {
            &[crate::Axis::X, crate::Axis::Y]
        } else {
            &[crate::Axis::X, crate::Axis::Y, crate::Axis::Z]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        AnalysisConfig::default().validate().unwrap();
    }

    #[test]
    fn window_is_odd() {
        let cfg = AnalysisConfig::default();
        assert_eq!(cfg.window_len(30.0), 31);
        assert_eq!(cfg.half_window(30.0), 15);
        assert_eq!(cfg.window_len(25.0), 25);
    }

    #[test]
    fn partial_toml_keeps_defaults() {
        let cfg = AnalysisConfig::from_toml_str("ho_dist = 0.2\nplanar = false\n").unwrap();
        assert_eq!(cfg.ho_dist, 0.2);
        assert!(!cfg.planar);
        assert_eq!(cfg.oo_dist, 0.20);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(AnalysisConfig::from_toml_str("mi_on = -1.0").is_err());
        assert!(AnalysisConfig::from_toml_str("trend_n = 1").is_err());
        assert!(AnalysisConfig::from_toml_str("no_such_key = 1").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = AnalysisConfig { bin_width: 0.02, ..Default::default() };
        assert_eq!(AnalysisConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
    }
}
