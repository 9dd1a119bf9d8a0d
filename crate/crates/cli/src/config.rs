//! Pipeline settings file for `featurize`, `rate` and `turns`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ctpanel_core::affect::{RuleSet, DEFAULT_MIN_CONFIDENCE};
use ctpanel_core::curiosity::RatingConfig;
use ctpanel_core::featurize::{AffectEncoding, FeaturizeConfig};
use ctpanel_core::turns::TurnMetricConfig;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub slice_len: f64,
    pub min_confidence: f64,
    pub affect_encoding: AffectEncoding,
    /// Affect rule file; the shipped rules when absent. Relative paths are
    /// resolved against the config file's directory.
    pub rules: Option<PathBuf>,
    pub turns: TurnMetricConfig,
    pub rating: RatingConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            slice_len: 10.0,
            min_confidence: DEFAULT_MIN_CONFIDENCE,
            affect_encoding: AffectEncoding::Dominant,
            rules: None,
            turns: TurnMetricConfig::default(),
            rating: RatingConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        if let Some(rules) = &cfg.rules {
            if rules.is_relative() {
                cfg.rules = Some(path.parent().unwrap_or(Path::new(".")).join(rules));
            }
        }
        Ok(cfg)
    }

    /// Checks every field and loads the rule set.
    pub fn featurize_config(&self) -> Result<FeaturizeConfig, CliError> {
        if !(self.slice_len.is_finite() && self.slice_len > 0.0) {
            return Err(CliError::Usage("slice_len: must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return Err(CliError::Usage("min_confidence: must lie in [0, 1]".into()));
        }
        self.turns
            .validate()
            .map_err(|e| CliError::Usage(format!("turns.{e}")))?;
        if self.rating.min_raters < 2 {
            return Err(CliError::Usage("rating.min_raters: must be at least 2".into()));
        }
        if !(self.rating.time_sd_k.is_finite() && self.rating.time_sd_k >= 0.0) {
            return Err(CliError::Usage("rating.time_sd_k: must be >= 0".into()));
        }
        let rules = match &self.rules {
            None => RuleSet::default(),
            Some(p) => RuleSet::from_path(p).map_err(|e| CliError::Usage(format!("rules: {e}")))?,
        };
        Ok(FeaturizeConfig {
            slice_len: self.slice_len,
            min_confidence: self.min_confidence,
            affect_encoding: self.affect_encoding,
            rules,
            turns: self.turns,
            rating: self.rating,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_mirror_the_standard_settings() {
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.slice_len, 10.0);
        assert_eq!(cfg.min_confidence, 0.8);
        assert_eq!(cfg.turns.alpha_in, -0.5);
        assert_eq!(cfg.turns.alpha_out, 0.5);
        assert_eq!(cfg.rating.time_sd_k, 1.5);
        assert!(cfg.featurize_config().is_ok());
    }

    #[test]
    fn unknown_nested_field_is_named() {
        let err = toml::from_str::<PipelineConfig>("[turns]\nalpha = 1.0\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("alpha"), "{err}");
    }

    #[test]
    fn invalid_values_rejected() {
        let cfg = PipelineConfig {
            slice_len: 0.0,
            ..Default::default()
        };
        assert!(cfg.featurize_config().is_err());
    }
}
