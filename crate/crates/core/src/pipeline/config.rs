//! TOML extraction-plan files.
//!
//! ```toml
//! remainder = "matrix"      # name of the implicit last component
//! alpha = 1.0               # Deriche alpha (optional)
//! connectivity = 26         # flooding connectivity (optional)
//!
//! [[component]]
//! name = "white grains"
//! inside = { range = "150-255", opening = 1 }
//! outside = [ { range = "0-100", opening = 2 } ]
//! ```
//!
//! Each label may also set `element = 6 | 18 | 26` (default 26, a cube).
//! A range written as a single level `"170"` means `170-255` and is reported
//! in the warnings.

use serde::Deserialize;

use super::{ComponentSpec, ExtractionPlan, LabelSpec, ThresholdRange};
use crate::error::{Error, Result};
use crate::gradient::DericheParams;
use crate::morphology::StructuringElement;
use crate::volume::Connectivity;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlan {
    #[serde(default = "default_remainder")]
    remainder: String,
    alpha: Option<f64>,
    connectivity: Option<u32>,
    #[serde(default)]
    component: Vec<RawComponent>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawComponent {
    name: String,
    inside: RawLabel,
    outside: Vec<RawLabel>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLabel {
    range: String,
    #[serde(default)]
    opening: usize,
    #[serde(default = "default_element")]
    element: u32,
}

fn default_remainder() -> String {
    "remainder".into()
}

fn default_element() -> u32 {
    26
}

/// A parsed plan file.
#[derive(Clone, Debug)]
pub struct PlanConfig {
    pub plan: ExtractionPlan,
    pub deriche: DericheParams,
    pub connectivity: Connectivity,
    pub warnings: Vec<String>,
}

pub fn parse_plan(text: &str) -> Result<PlanConfig> {
    let raw: RawPlan = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let mut warnings = Vec::new();
    let mut label = |component: &str, l: &RawLabel| -> Result<LabelSpec> {
        let (range, open_ended) = ThresholdRange::parse_lenient(&l.range)?;
        if open_ended {
            warnings.push(format!(
                "component `{component}`: range `{}` has no upper bound, read as {range}",
                l.range
            ));
        }
        let base = Connectivity::from_count(l.element).map_err(|e| Error::Config(e.to_string()))?;
        Ok(LabelSpec::new(
            range,
            StructuringElement::new(base, l.opening),
        ))
    };
    let mut components = Vec::with_capacity(raw.component.len());
    for c in &raw.component {
        let inside = label(&c.name, &c.inside)?;
        let outside = c
            .outside
            .iter()
            .map(|o| label(&c.name, o))
            .collect::<Result<Vec<_>>>()?;
        components.push(ComponentSpec::new(c.name.clone(), inside, outside)?);
    }
    if components.is_empty() {
        return Err(Error::Config("plan defines no [[component]]".into()));
    }
    let deriche = match raw.alpha {
        Some(a) => DericheParams::new(a).map_err(|e| Error::Config(e.to_string()))?,
        None => DericheParams::default(),
    };
    let connectivity = match raw.connectivity {
        Some(n) => Connectivity::from_count(n).map_err(|e| Error::Config(e.to_string()))?,
        None => Connectivity::default(),
    };
    Ok(PlanConfig {
        plan: ExtractionPlan {
            components,
            remainder: raw.remainder,
        },
        deriche,
        connectivity,
        warnings,
    })
}
