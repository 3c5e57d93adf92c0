use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::classifier::Classifier;
use super::train::TrainConfig;
use crate::error::{io_err, Error, Result};

const FORMAT: &str = "gdalab-classifier";
const VERSION: u32 = 1;

/// JSON checkpoint: layer shapes, every parameter at full precision, and the
/// training configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub classifier: Classifier,
    pub train_config: Option<TrainConfig>,
}

impl Checkpoint {
    pub fn new(classifier: Classifier, train_config: Option<TrainConfig>) -> Self {
        Self {
            format: FORMAT.to_string(),
            version: VERSION,
            classifier,
            train_config,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(text)?;
        if c.format != FORMAT || c.version != VERSION {
            return Err(Error::Format {
                what: "checkpoint",
                detail: format!("expected {FORMAT} v{VERSION}, found {} v{}", c.format, c.version),
            });
        }
        c.classifier.validate()?;
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json(&text)
    }
}
