//! Parameter-stability protocol: sweep one parameter λ, measure descriptor
//! distances between consecutive segmentations, pick the most stable λ.

use crate::descriptors::{
    chord_length_distribution, curve_distance, two_point_correlation, Axes, DescriptorCurve, Phase,
};
use crate::error::{Error, Result};
use crate::gradient::{gradient_topography, DericheParams};
use crate::morphology::StructuringElement;
use crate::par;
use crate::pipeline::{extract_with_topography, threshold_segment, ComponentSpec, ThresholdRange};
use crate::volume::{BinaryVolume, Connectivity, GreyVolume};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Route {
    Threshold,
    Watershed,
}

/// `λ_i = start + i·step` for every value not above `stop`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepSpec {
    pub parameter: String,
    pub route: Route,
    start: i64,
    stop: i64,
    step: i64,
}

impl SweepSpec {
    pub fn new(
        parameter: impl Into<String>,
        route: Route,
        start: i64,
        stop: i64,
        step: i64,
    ) -> Result<Self> {
        if step <= 0 || start >= stop {
            return Err(Error::pre(format!(
                "sweep needs step > 0 and start < stop, got {start}..{stop} step {step}"
            )));
        }
        Ok(SweepSpec {
            parameter: parameter.into(),
            route,
            start,
            stop,
            step,
        })
    }

    pub fn lambdas(&self) -> Vec<i64> {
        (self.start..=self.stop)
            .step_by(self.step as usize)
            .collect()
    }
}

/// Descriptor settings shared by every step of a sweep.
#[derive(Clone, Copy, Debug)]
pub struct DescriptorSettings {
    pub phase: Phase,
    pub axes: Axes,
    pub chord_r_max: usize,
    pub two_point_r_max: usize,
}

/// Distances between `S(λ_{i-1})` and `S(λ_i)`, indexed by `λ_i`; `None`
/// marks a gap where either segmentation failed.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilityCurve {
    pub lambdas: Vec<i64>,
    pub chord: Vec<Option<f64>>,
    pub two_point: Vec<Option<f64>>,
}

impl StabilityCurve {
    /// CSV with header `lambda,dist_chord,dist_two_point`; gaps are empty.
    pub fn to_csv(&self) -> String {
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut s = String::from("lambda,dist_chord,dist_two_point\n");
        for i in 0..self.lambdas.len() {
            s.push_str(&format!(
                "{},{},{}\n",
                self.lambdas[i],
                cell(self.chord[i]),
                cell(self.two_point[i])
            ));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == "lambda,dist_chord,dist_two_point" => {}
            _ => {
                return Err(Error::Format(
                    "expected header `lambda,dist_chord,dist_two_point`".into(),
                ))
            }
        }
        let mut c = StabilityCurve {
            lambdas: vec![],
            chord: vec![],
            two_point: vec![],
        };
        for (n, line) in lines.enumerate() {
            let bad = || Error::Format(format!("bad sweep row {}: `{line}`", n + 2));
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(bad());
            }
            let opt = |s: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| bad())
                }
            };
            c.lambdas.push(cols[0].parse().map_err(|_| bad())?);
            c.chord.push(opt(cols[1])?);
            c.two_point.push(opt(cols[2])?);
        }
        Ok(c)
    }
}

/// Result of a sweep: the stability curve plus one observation per λ
/// (`None` where the segmentation failed).
#[derive(Clone, Debug)]
pub struct Sweep<T> {
    pub curve: StabilityCurve,
    pub observations: Vec<(i64, Option<T>)>,
}

/// Runs `segment` for every λ of `spec` and compares consecutive results.
pub fn stability_sweep<S>(
    spec: &SweepSpec,
    segment: S,
    settings: DescriptorSettings,
) -> Result<StabilityCurve>
where
    S: Fn(i64) -> Result<BinaryVolume> + Sync + Send,
{
    Ok(stability_sweep_observed(spec, segment, settings, |_, _| ())?.curve)
}

/// [`stability_sweep`] that also evaluates `observe(λ, segmentation)` on each
/// successful step, e.g. an accuracy against a known ground truth.
pub fn stability_sweep_observed<S, O, T>(
    spec: &SweepSpec,
    segment: S,
    settings: DescriptorSettings,
    observe: O,
) -> Result<Sweep<T>>
where
    S: Fn(i64) -> Result<BinaryVolume> + Sync + Send,
    O: Fn(i64, &BinaryVolume) -> T + Sync + Send,
    T: Send,
{
    let lambdas = spec.lambdas();
    type Step<T> = Option<(DescriptorCurve, DescriptorCurve, T)>;
    let steps: Vec<Step<T>> = par::map_slice(&lambdas, |&l| {
        let s = segment(l).ok()?;
        let chord =
            chord_length_distribution(&s, settings.phase, settings.axes, settings.chord_r_max)
                .ok()?;
        let tp = two_point_correlation(&s, settings.phase, settings.axes, settings.two_point_r_max)
            .ok()?;
        let obs = observe(l, &s);
        Some((chord, tp, obs))
    });
    let successes = steps.iter().filter(|s| s.is_some()).count();
    if successes < 2 {
        return Err(Error::InsufficientSweep { successes });
    }
    let mut curve = StabilityCurve {
        lambdas: lambdas[1..].to_vec(),
        chord: Vec::with_capacity(lambdas.len() - 1),
        two_point: Vec::with_capacity(lambdas.len() - 1),
    };
    for i in 1..steps.len() {
        match (&steps[i - 1], &steps[i]) {
            (Some((c0, t0, _)), Some((c1, t1, _))) => {
                curve.chord.push(Some(curve_distance(c0, c1)?));
                curve.two_point.push(Some(curve_distance(t0, t1)?));
            }
            _ => {
                curve.chord.push(None);
                curve.two_point.push(None);
            }
        }
    }
    let observations = lambdas
        .iter()
        .zip(steps)
        .map(|(&l, s)| (l, s.map(|(_, _, o)| o)))
        .collect();
    Ok(Sweep {
        curve,
        observations,
    })
}

/// Threshold route: `threshold_segment` with the range `λ..=hi`.
pub fn threshold_route(
    v: &GreyVolume,
    hi: u8,
    se: StructuringElement,
) -> impl Fn(i64) -> Result<BinaryVolume> + Sync + Send + '_ {
    move |l| {
        let r = ThresholdRange::new(grey(l)?, hi)?;
        Ok(threshold_segment(v, r, &se))
    }
}

/// Watershed route: component extraction with the inside-label range
/// `λ..=inside.hi`, everything else as in `spec`. The gradient is computed
/// once and shared by all steps.
pub fn watershed_route(
    v: &GreyVolume,
    spec: ComponentSpec,
    dp: DericheParams,
    c: Connectivity,
) -> Result<impl Fn(i64) -> Result<BinaryVolume> + Sync + Send + '_> {
    let topo = gradient_topography(v, dp)?;
    Ok(move |l| {
        let mut s = spec.clone();
        s.inside.range = ThresholdRange::new(grey(l)?, spec.inside.range.hi())?;
        extract_with_topography(v, &topo, &s, c, None)
    })
}

fn grey(l: i64) -> Result<u8> {
    u8::try_from(l).map_err(|_| Error::pre(format!("λ = {l} is not a grey level")))
}

/// λ picked from each descriptor curve and from their sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Selection {
    pub chord: Option<i64>,
    pub two_point: Option<i64>,
    pub combined: i64,
}

/// Sliding-window maximum of half-width `size`, skipping gaps.
pub fn dilate_curve(values: &[Option<f64>], size: usize) -> Vec<Option<f64>> {
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(size);
            let hi = (i + size).min(values.len() - 1);
            values[lo..=hi].iter().flatten().copied().reduce(f64::max)
        })
        .collect()
}

fn argmin(lambdas: &[i64], values: &[Option<f64>]) -> Option<i64> {
    let mut best: Option<(f64, i64)> = None;
    for (&l, v) in lambdas.iter().zip(values) {
        if let Some(v) = *v {
            if best.is_none_or(|(b, bl)| v < b || (v == b && l < bl)) {
                best = Some((v, l));
            }
        }
    }
    best.map(|(_, l)| l)
}

/// Dilation restricted to the λ that carry a value: a gap stays a gap, so a
/// failed segmentation is never selected.
fn dilate_present(values: &[Option<f64>], size: usize) -> Vec<Option<f64>> {
    dilate_curve(values, size)
        .into_iter()
        .zip(values)
        .map(|(d, v)| v.and(d))
        .collect()
}

/// Dilates each distance sequence, then returns the λ of the minimum
/// (smallest λ on ties) per descriptor and for the dilated sum. Only λ with a
/// measured distance are candidates.
pub fn auto_select_parameter(c: &StabilityCurve, dilation_size: usize) -> Result<Selection> {
    if c.lambdas.is_empty() {
        return Err(Error::pre("stability curve is empty"));
    }
    let dc = dilate_present(&c.chord, dilation_size);
    let dt = dilate_present(&c.two_point, dilation_size);
    let chord = argmin(&c.lambdas, &dc);
    let two_point = argmin(&c.lambdas, &dt);
    let sum: Vec<Option<f64>> = dc
        .iter()
        .zip(&dt)
        .map(|(a, b)| match (a, b) {
            (Some(a), Some(b)) => Some(a + b),
            (Some(a), None) if two_point.is_none() => Some(*a),
            (None, Some(b)) if chord.is_none() => Some(*b),
            _ => None,
        })
        .collect();
    let combined =
        argmin(&c.lambdas, &sum).ok_or_else(|| Error::pre("stability curve has no values"))?;
    Ok(Selection {
        chord,
        two_point,
        combined,
    })
}
