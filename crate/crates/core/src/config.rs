//! JSON model configurations shared by the CLI and the bindings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::alphabet::AlphabetDocument;
use crate::error::{Error, Result};
use crate::observable::{Observable, ObservableSpec};
use crate::potential::PotentialVec;
use crate::transfer::{Model, SolveOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphabetSource {
    /// Path to an alphabet document, relative to the config file.
    File { file: PathBuf },
    Inline(AlphabetDocument),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum PotentialSpec {
    Indicators,
    /// Scalar values parsed from numeric labels.
    PlusMinus,
    Site { values: Vec<f64> },
    Xy,
    /// `rows[i]` holds the `q` values of the `i`-th word of length `depth` (mixed radix, first symbol most significant).
    Table { depth: usize, rows: Vec<Vec<f64>> },
}

fn default_beta() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelConfig {
    pub alphabet: AlphabetSource,
    pub potential: PotentialSpec,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub seed: u64,
    /// Treat the maximizer search as rotation invariant (XY).
    #[serde(default)]
    pub radial: bool,
    #[serde(default)]
    pub observable: Option<ObservableSpec>,
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("config JSON: {e}")))
    }

    /// Pretty JSON with every default spelled out.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        // Inline the alphabet so the config is self-contained from here on.
        if let AlphabetSource::File { file } = &cfg.alphabet {
            let full = path.parent().unwrap_or(Path::new(".")).join(file);
            let text = std::fs::read_to_string(&full)
                .map_err(|e| Error::invalid(format!("cannot read {}: {e}", full.display())))?;
            let doc: AlphabetDocument =
                serde_json::from_str(&text).map_err(|e| Error::invalid(format!("alphabet JSON: {e}")))?;
            cfg.alphabet = AlphabetSource::Inline(doc);
        }
        Ok(cfg)
    }

    pub fn build_model(&self) -> Result<Model> {
        let doc = match &self.alphabet {
            AlphabetSource::Inline(doc) => doc,
            AlphabetSource::File { file } => {
                return Err(Error::invalid(format!(
                    "alphabet file {} not resolved; use ModelConfig::load",
                    file.display()
                )))
            }
        };
        let (alphabet, transition) = doc.build()?;
        let potential = match &self.potential {
            PotentialSpec::Indicators => PotentialVec::indicators(&alphabet, &transition)?,
            PotentialSpec::PlusMinus => PotentialVec::plus_minus(&alphabet, &transition)?,
            PotentialSpec::Site { values } => PotentialVec::site_values(&alphabet, &transition, values)?,
            PotentialSpec::Xy => PotentialVec::xy(&alphabet, &transition)?,
            PotentialSpec::Table { depth, rows } => PotentialVec::table(&alphabet, &transition, *depth, rows)?,
        };
        Model::new(alphabet, transition, potential)
    }

    pub fn build_observable(&self, model: &Model) -> Result<Option<Observable>> {
        self.observable.as_ref().map(|o| o.build(model.alphabet())).transpose()
    }
}
