//! Versioned JSON scene document (SI units, angles in degrees).
//!
//! ```json
//! {
//!   "version": 1,
//!   "array": { "elements": [{"index": 1, "position": [0, 0, 0]}, ...],
//!              "spacing": 0.0086, "carrier_frequency": 26e9,
//!              "element_gain": 1, "element_area": 6.5e-5, "pattern_exponent": 1 },
//!   "scene": { "ris_pose": { "rotation": [[1,0,0],[0,1,0],[0,0,1]], "translation": [0,0,0] },
//!              "tx_position": [..], "rx_position": [..] },
//!   "reflection_model": { "passive_magnitude": 0.891, "passive_phases_deg": [0, 67],
//!                         "active_on_gain": 1.413 },
//!   "link_budget": { "tx_power": 1, "tx_gain": 1, "rx_gain": 1 }
//! }
//! ```
//! `rotation` is row-major.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{LinkBudget, ReflectionModel};
use crate::error::{Result, RisError};
use crate::geometry::{RisArray, Scene};

pub const SCENE_DOCUMENT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDocument {
    pub version: u32,
    pub array: RisArray,
    pub scene: Scene,
    pub reflection_model: ReflectionModel,
    pub link_budget: LinkBudget,
}

impl SceneDocument {
    pub fn new(array: RisArray, scene: Scene, reflection_model: ReflectionModel, link_budget: LinkBudget) -> Self {
        SceneDocument {
            version: SCENE_DOCUMENT_VERSION,
            array,
            scene,
            reflection_model,
            link_budget,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene document serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SceneDocument =
            serde_json::from_str(text).map_err(|e| RisError::Format(format!("scene document: {e}")))?;
        if doc.version != SCENE_DOCUMENT_VERSION {
            return Err(RisError::Format(format!(
                "unsupported scene document version {}",
                doc.version
            )));
        }
        doc.reflection_model.validate()?;
        doc.link_budget.validate()?;
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| RisError::io(path, e))?;
        SceneDocument::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| RisError::io(path, e))
    }
}
