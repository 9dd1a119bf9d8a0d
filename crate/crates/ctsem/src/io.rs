//! Model and design configuration files, `fit.json` and `links.csv`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{FitResult, FIT_SCHEMA_VERSION};
use crate::model::CtModelSpec;
use crate::sim::SimDesign;
use crate::standardize::{EdgeKind, LinkReport};

pub fn parse_model_toml(text: &str) -> Result<CtModelSpec> {
    let spec: CtModelSpec = toml::from_str(text)?;
    spec.validate()?;
    Ok(spec)
}

pub fn read_model_toml(path: &Path) -> Result<CtModelSpec> {
    parse_model_toml(&fs::read_to_string(path)?)
}

/// A simulation design plus optional fitting settings for recovery runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignFile {
    #[serde(flatten)]
    pub design: SimDesign,
    #[serde(default)]
    pub model: Option<CtModelSpec>,
    #[serde(default)]
    pub replicates: Option<usize>,
}

pub fn parse_design_toml(text: &str) -> Result<DesignFile> {
    let file: DesignFile = toml::from_str(text)?;
    file.design.validate()?;
    if let Some(m) = &file.model {
        m.validate()?;
    }
    Ok(file)
}

pub fn read_design_toml(path: &Path) -> Result<DesignFile> {
    parse_design_toml(&fs::read_to_string(path)?)
}

pub fn fit_to_json(fit: &FitResult) -> Result<String> {
    let mut s = serde_json::to_string_pretty(fit)?;
    s.push('\n');
    Ok(s)
}

pub fn fit_from_json(text: &str) -> Result<FitResult> {
    let fit: FitResult = serde_json::from_str(text)?;
    if fit.schema_version != FIT_SCHEMA_VERSION {
        return Err(Error::Data(format!(
            "fit schema version {} is not supported (expected {FIT_SCHEMA_VERSION})",
            fit.schema_version
        )));
    }
    Ok(fit)
}

pub fn read_fit_json(path: &Path) -> Result<FitResult> {
    fit_from_json(&fs::read_to_string(path)?)
}

pub fn write_links_csv(report: &LinkReport, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "schema_version",
        "kind",
        "source",
        "target",
        "standardized_estimate",
        "sd",
        "rank",
    ])
    .map_err(csv_err)?;
    for e in &report.edges {
        let kind = match e.kind {
            EdgeKind::PredictorToLatent => "predictor_to_latent",
            EdgeKind::LatentToManifest => "latent_to_manifest",
        };
        w.write_record([
            FIT_SCHEMA_VERSION.to_string(),
            kind.to_string(),
            e.source.clone(),
            e.target.clone(),
            e.estimate.to_string(),
            e.sd.to_string(),
            e.rank.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Data(format!("links.csv: {e}"))
}
