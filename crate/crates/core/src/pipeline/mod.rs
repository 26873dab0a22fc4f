//! Segmentation routes: threshold + filtration, double-labels watershed
//! extraction (component by component), and grain splitting.

mod config;
mod grains;

pub use config::{parse_plan, PlanConfig};
pub use grains::{
    connected_components, distance_transform, split_grains, squared_distance_transform,
};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::gradient::{gradient_topography, DericheParams};
use crate::morphology::{open_close_filter, opening, StructuringElement};
use crate::volume::{BinaryVolume, Connectivity, GreyVolume, LabelVolume};
use crate::watershed::{select_basin, watershed_flood};

/// Inclusive grey-level range `lo..=hi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ThresholdRange {
    lo: u8,
    hi: u8,
}

impl ThresholdRange {
    pub fn new(lo: u8, hi: u8) -> Result<Self> {
        if lo > hi {
            return Err(Error::pre(format!("threshold range {lo}-{hi} is empty")));
        }
        Ok(ThresholdRange { lo, hi })
    }

    pub fn full() -> Self {
        ThresholdRange { lo: 0, hi: 255 }
    }

    pub fn lo(&self) -> u8 {
        self.lo
    }

    pub fn hi(&self) -> u8 {
        self.hi
    }

    pub fn contains(&self, v: u8) -> bool {
        self.lo <= v && v <= self.hi
    }

    /// Parses `"lo-hi"`, or a single `"lo"` read as `lo-255`. The flag tells
    /// whether the open-ended form was used.
    pub fn parse_lenient(s: &str) -> Result<(Self, bool)> {
        let level = |t: &str| {
            t.trim()
                .parse::<u8>()
                .map_err(|_| Error::Config(format!("bad grey level `{}` in range `{s}`", t.trim())))
        };
        match s.split_once('-') {
            Some((a, b)) => Ok((Self::new(level(a)?, level(b)?)?, false)),
            None => Ok((Self::new(level(s)?, 255)?, true)),
        }
    }
}

impl FromStr for ThresholdRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse_lenient(s).map(|(r, _)| r)
    }
}

impl fmt::Display for ThresholdRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.lo, self.hi)
    }
}

/// One label localization: a threshold range followed by an opening.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LabelSpec {
    pub range: ThresholdRange,
    pub opening: StructuringElement,
}

impl LabelSpec {
    pub fn new(range: ThresholdRange, opening: StructuringElement) -> Self {
        LabelSpec { range, opening }
    }
}

/// Inside label plus one localization per complementary component.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentSpec {
    pub name: String,
    pub inside: LabelSpec,
    pub outside: Vec<LabelSpec>,
}

impl ComponentSpec {
    pub fn new(
        name: impl Into<String>,
        inside: LabelSpec,
        outside: Vec<LabelSpec>,
    ) -> Result<Self> {
        let name = name.into();
        if outside.is_empty() {
            return Err(Error::Config(format!(
                "component `{name}` has no outside label"
            )));
        }
        Ok(ComponentSpec {
            name,
            inside,
            outside,
        })
    }
}

/// Components extracted in order; whatever remains forms the last one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtractionPlan {
    pub components: Vec<ComponentSpec>,
    pub remainder: String,
}

/// Labeled partition produced by [`run_plan`]: label `i + 1` is `names[i]`.
#[derive(Clone, Debug)]
pub struct PlanOutcome {
    pub labels: LabelVolume,
    pub names: Vec<String>,
}

/// Foreground iff `lo <= v <= hi`.
pub fn threshold(v: &GreyVolume, r: ThresholdRange) -> BinaryVolume {
    let mut out = BinaryVolume::empty(v.dims());
    for (i, &g) in v.data().iter().enumerate() {
        if r.contains(g) {
            out.set_index(i, true);
        }
    }
    out
}

/// `(threshold(v, r) ∘ B) • B`.
pub fn threshold_segment(
    v: &GreyVolume,
    r: ThresholdRange,
    se: &StructuringElement,
) -> BinaryVolume {
    open_close_filter(&threshold(v, r), se)
}

/// `threshold(v, r) ∘ B_k`; an empty result is an error since no flood can
/// start from it.
pub fn localize_label(
    v: &GreyVolume,
    r: ThresholdRange,
    se: &StructuringElement,
) -> Result<BinaryVolume> {
    let out = localize(v, r, se);
    if out.none() {
        return Err(Error::EmptySeeds);
    }
    Ok(out)
}

fn localize(v: &GreyVolume, r: ThresholdRange, se: &StructuringElement) -> BinaryVolume {
    opening(&threshold(v, r), se)
}

/// Label 1 on `inside`, label 2 on the union of `outside`.
pub fn build_seeds(inside: &BinaryVolume, outside: &[BinaryVolume]) -> Result<LabelVolume> {
    let dims = inside.dims();
    let mut union = BinaryVolume::empty(dims);
    for o in outside {
        union = union.or(o)?;
    }
    let overlap = inside.overlap_count(&union)?;
    if overlap > 0 {
        return Err(Error::SeedOverlap { count: overlap });
    }
    let mut seeds = LabelVolume::zeros(dims);
    let s = seeds.data_mut();
    for i in inside.iter_ones() {
        s[i] = 1;
    }
    for i in union.iter_ones() {
        s[i] = 2;
    }
    Ok(seeds)
}

/// Gradient, quantization, flood from the inside/outside labels, basin 1.
pub fn extract_component(
    v: &GreyVolume,
    spec: &ComponentSpec,
    dp: DericheParams,
    c: Connectivity,
) -> Result<BinaryVolume> {
    let topo = gradient_topography(v, dp)?;
    extract_with_topography(v, &topo, spec, c, None)
}

/// [`extract_component`] on a precomputed topography, optionally restricted
/// to `within` (seeds outside it are dropped, the flood is masked by it).
pub fn extract_with_topography(
    v: &GreyVolume,
    topo: &GreyVolume,
    spec: &ComponentSpec,
    c: Connectivity,
    within: Option<&BinaryVolume>,
) -> Result<BinaryVolume> {
    v.dims().ensure_same(&topo.dims())?;
    let restrict = |m: BinaryVolume| match within {
        Some(w) => m.and(w),
        None => Ok(m),
    };
    let inside = restrict(localize(v, spec.inside.range, &spec.inside.opening))?;
    let outside = spec
        .outside
        .iter()
        .map(|o| restrict(localize(v, o.range, &o.opening)))
        .collect::<Result<Vec<_>>>()?;
    if inside.none() || outside.iter().all(|o| o.none()) {
        return Err(Error::EmptySeeds);
    }
    let seeds = build_seeds(&inside, &outside)?;
    drop(inside);
    drop(outside);
    let flood = watershed_flood(topo, seeds, c, within, false)?;
    select_basin(&flood.labels, 1)
}

/// Extracts the plan's components in order, each flooding only the voxels
/// not claimed before it; the remainder gets the last label.
pub fn run_plan(
    v: &GreyVolume,
    plan: &ExtractionPlan,
    dp: DericheParams,
    c: Connectivity,
) -> Result<PlanOutcome> {
    if plan.components.is_empty() {
        return Err(Error::Config("extraction plan has no component".into()));
    }
    let dims = v.dims();
    let topo = gradient_topography(v, dp)?;
    let mut claimed = BinaryVolume::empty(dims);
    let mut labels = LabelVolume::zeros(dims);
    let mut names = Vec::with_capacity(plan.components.len() + 1);
    for (i, spec) in plan.components.iter().enumerate() {
        let free = claimed.complement();
        let mask = extract_with_topography(v, &topo, spec, c, Some(&free)).map_err(|e| {
            Error::Component {
                name: spec.name.clone(),
                source: Box::new(e),
            }
        })?;
        let l = labels.data_mut();
        for p in mask.iter_ones() {
            l[p] = i as u32 + 1;
        }
        claimed = claimed.or(&mask)?;
        names.push(spec.name.clone());
    }
    let last = plan.components.len() as u32 + 1;
    for p in labels.data_mut() {
        if *p == 0 {
            *p = last;
        }
    }
    names.push(plan.remainder.clone());
    Ok(PlanOutcome { labels, names })
}
