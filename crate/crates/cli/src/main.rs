use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use grainseg::descriptors::{
    chord_length_distribution, default_r_max, two_point_correlation, Axes, DescriptorCurve, Phase,
};
use grainseg::gradient::DericheParams;
use grainseg::io::{
    export_overlay, export_slice, read_binary, read_grey, write_volume, VolumeData,
};
use grainseg::median::median_filter;
use grainseg::minima::DynamicParameter;
use grainseg::morphology::StructuringElement;
use grainseg::phantom::{generate_phantom, GrainModel, PhantomSpec, RandomPacking};
use grainseg::pipeline::{
    connected_components, extract_component, parse_plan, run_plan, split_grains, threshold_segment,
    ComponentSpec, LabelSpec, ThresholdRange,
};
use grainseg::robustness::{
    auto_select_parameter, stability_sweep, threshold_route, watershed_route, DescriptorSettings,
    Route, StabilityCurve, SweepSpec,
};
use grainseg::{BinaryVolume, GreyVolume};
use grainseg::{BorderRule, Connectivity, Dims, Error};

#[derive(Parser)]
#[command(
    name = "grainseg",
    version,
    about = "Grain extraction and descriptors for 3D grey-level volumes"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a seeded sphere-packing phantom and its ground truth.
    Phantom(PhantomArgs),
    /// Cubic-window median filter.
    Median {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value_t = 1)]
        radius: usize,
        #[arg(long, value_enum, default_value_t = Border::Clamp)]
        border: Border,
    },
    /// Threshold followed by an opening/closing filtration.
    SegmentThreshold {
        input: PathBuf,
        output: PathBuf,
        /// Grey range `lo-hi` (a single `lo` means `lo-255`).
        #[arg(long)]
        range: String,
        /// Size k of the structuring element B_k.
        #[arg(long, default_value_t = 1)]
        opening: usize,
        #[arg(long, default_value_t = 26)]
        element: u32,
    },
    /// Double-labels watershed extraction, from a plan file or a single
    /// inside/outside specification.
    SegmentWatershed {
        input: PathBuf,
        output: PathBuf,
        /// TOML extraction plan; the output is then a label volume.
        #[arg(long, conflicts_with_all = ["inside", "outside"])]
        plan: Option<PathBuf>,
        /// Inside label as `range[:opening]`, e.g. `150-255:1`.
        #[arg(long, requires = "outside")]
        inside: Option<String>,
        /// Outside label as `range[:opening]`; repeatable.
        #[arg(long)]
        outside: Vec<String>,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 26)]
        connectivity: u32,
    },
    /// Connected-component labeling of a binary volume.
    Components {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value_t = 26)]
        connectivity: u32,
    },
    /// Split touching grains with the h-filtered distance watershed.
    Split {
        input: PathBuf,
        output: PathBuf,
        /// Dynamic parameter h (voxel units).
        #[arg(long, default_value_t = 1.0)]
        dynamic: f32,
        #[arg(long, default_value_t = 26)]
        connectivity: u32,
    },
    /// Chord-length and two-point curves, one CSV per kind, phase and direction.
    Descriptors {
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Kind::Chord, Kind::TwoPoint])]
        kind: Vec<Kind>,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [PhaseArg::Grain])]
        phase: Vec<PhaseArg>,
        /// Directions, each a set of axis letters (`x`, `xyz`, ...).
        #[arg(long, value_delimiter = ',', default_values_t = ["x".to_string(), "y".into(), "z".into(), "xyz".into()])]
        axes: Vec<String>,
        /// Largest lag / chord length (default: half the smallest dimension).
        #[arg(long)]
        r_max: Option<usize>,
    },
    /// Parameter-stability sweep; writes `lambda,dist_chord,dist_two_point`.
    Sweep(SweepArgs),
    /// Pick λ from a stability curve after dilating it.
    AutoSelect {
        curve: PathBuf,
        #[arg(long, default_value_t = 5)]
        dilation: usize,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export one z slice as PGM, optionally with a mask boundary overlay.
    Slice {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        z: usize,
        #[arg(long)]
        mask: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct PhantomArgs {
    /// Grey volume output.
    output: PathBuf,
    /// Ground-truth label volume output.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// `nx,ny,nz`
    #[arg(long, value_delimiter = ',', default_values_t = [64, 64, 64])]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    spheres: usize,
    #[arg(long, default_value_t = 0)]
    neck_pairs: usize,
    /// `rmin,rmax`
    #[arg(long, value_delimiter = ',', default_values_t = [5.0, 7.0])]
    radius: Vec<f64>,
    #[arg(long, default_value_t = 2.0)]
    min_gap: f64,
    #[arg(long, default_value_t = 60)]
    matrix_level: u8,
    #[arg(long, default_value_t = 190)]
    grain_level: u8,
    /// Grey levels cycled over grain clusters (overrides `--grain-level`).
    #[arg(long, value_delimiter = ',')]
    class_levels: Vec<u8>,
    /// Gaussian blur sigma in voxels.
    #[arg(long, default_value_t = 0.0)]
    blur: f64,
    #[arg(long, default_value_t = 0)]
    noise: u8,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(clap::Args)]
struct SweepArgs {
    input: PathBuf,
    output: PathBuf,
    #[arg(long, value_enum)]
    route: RouteArg,
    #[arg(long)]
    start: i64,
    #[arg(long)]
    stop: i64,
    #[arg(long, default_value_t = 1)]
    step: i64,
    /// Upper end of the swept range (threshold) or inside label (watershed).
    #[arg(long, default_value_t = 255)]
    hi: u8,
    /// Filtration size (threshold) or inside-label opening (watershed).
    #[arg(long, default_value_t = 1)]
    opening: usize,
    /// Outside labels for the watershed route, as `range[:opening]`.
    #[arg(long)]
    outside: Vec<String>,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 26)]
    connectivity: u32,
    #[arg(long, value_enum, default_value_t = PhaseArg::Grain)]
    phase: PhaseArg,
    #[arg(long, default_value = "xyz")]
    axes: String,
    #[arg(long)]
    r_max: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Border {
    Clamp,
    Background,
    Foreground,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Kind {
    Chord,
    TwoPoint,
}

#[derive(Clone, Copy, ValueEnum)]
enum PhaseArg {
    Grain,
    Background,
}

#[derive(Clone, Copy, ValueEnum)]
enum RouteArg {
    Threshold,
    Watershed,
}

impl From<Border> for BorderRule {
    fn from(b: Border) -> Self {
        match b {
            Border::Clamp => BorderRule::ClampToEdge,
            Border::Background => BorderRule::OutsideBackground,
            Border::Foreground => BorderRule::OutsideForeground,
        }
    }
}

impl From<PhaseArg> for Phase {
    fn from(p: PhaseArg) -> Self {
        match p {
            PhaseArg::Grain => Phase::Grain,
            PhaseArg::Background => Phase::Background,
        }
    }
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.to_possible_value().unwrap().get_name())
    }
}

impl std::fmt::Display for PhaseArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.to_possible_value().unwrap().get_name())
    }
}

fn element(count: u32, k: usize) -> anyhow::Result<StructuringElement> {
    Ok(StructuringElement::new(Connectivity::from_count(count)?, k))
}

/// `range[:opening]`, opening defaulting to 1 with the cube element.
fn label_spec(s: &str) -> anyhow::Result<LabelSpec> {
    let (range, k) = match s.split_once(':') {
        Some((r, k)) => (
            r,
            k.parse()
                .with_context(|| format!("bad opening size in `{s}`"))?,
        ),
        None => (s, 1),
    };
    let (range, open) = ThresholdRange::parse_lenient(range)?;
    if open {
        eprintln!("warning: range `{s}` has no upper bound, read as {range}");
    }
    Ok(LabelSpec::new(range, StructuringElement::cube(k)))
}

fn grey(path: &Path) -> anyhow::Result<GreyVolume> {
    read_grey(path).with_context(|| format!("reading {}", path.display()))
}

fn binary(path: &Path) -> anyhow::Result<BinaryVolume> {
    read_binary(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, v: VolumeData) -> anyhow::Result<()> {
    write_volume(path, &v).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.cmd {
        Cmd::Phantom(a) => phantom(a),
        Cmd::Median {
            input,
            output,
            radius,
            border,
        } => {
            let v = grey(&input)?;
            write(
                &output,
                VolumeData::Grey(median_filter(&v, radius, border.into())?),
            )
        }
        Cmd::SegmentThreshold {
            input,
            output,
            range,
            opening,
            element: e,
        } => {
            let v = grey(&input)?;
            let (r, open) = ThresholdRange::parse_lenient(&range)?;
            if open {
                eprintln!("warning: range `{range}` has no upper bound, read as {r}");
            }
            write(
                &output,
                VolumeData::Binary(threshold_segment(&v, r, &element(e, opening)?)),
            )
        }
        Cmd::SegmentWatershed {
            input,
            output,
            plan,
            inside,
            outside,
            alpha,
            connectivity,
        } => {
            let v = grey(&input)?;
            if let Some(plan) = plan {
                let text = fs::read_to_string(&plan)
                    .with_context(|| format!("reading {}", plan.display()))?;
                let cfg = parse_plan(&text)?;
                for w in &cfg.warnings {
                    eprintln!("warning: {w}");
                }
                let out = run_plan(&v, &cfg.plan, cfg.deriche, cfg.connectivity)?;
                for (i, name) in out.names.iter().enumerate() {
                    println!("{}\t{name}", i + 1);
                }
                return write(&output, VolumeData::Label(out.labels));
            }
            let Some(inside) = inside else {
                bail!(Error::Config(
                    "either --plan or --inside/--outside is required".into()
                ));
            };
            let outside = outside
                .iter()
                .map(|s| label_spec(s))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let spec = ComponentSpec::new("component", label_spec(&inside)?, outside)?;
            let c = Connectivity::from_count(connectivity)?;
            let mask = extract_component(&v, &spec, DericheParams::new(alpha)?, c)?;
            write(&output, VolumeData::Binary(mask))
        }
        Cmd::Components {
            input,
            output,
            connectivity,
        } => {
            let a = binary(&input)?;
            let lab = connected_components(&a, Connectivity::from_count(connectivity)?);
            println!("components\t{}", lab.max_label());
            write(&output, VolumeData::Label(lab))
        }
        Cmd::Split {
            input,
            output,
            dynamic,
            connectivity,
        } => {
            let a = binary(&input)?;
            let g = split_grains(
                &a,
                DynamicParameter::new(dynamic)?,
                Connectivity::from_count(connectivity)?,
            )?;
            println!("grains\t{}", g.max_label());
            write(&output, VolumeData::Label(g))
        }
        Cmd::Descriptors {
            input,
            out_dir,
            kind,
            phase,
            axes,
            r_max,
        } => {
            let a = binary(&input)?;
            fs::create_dir_all(&out_dir)
                .with_context(|| format!("creating {}", out_dir.display()))?;
            let d = a.dims();
            for &k in &kind {
                for &p in &phase {
                    for ax in &axes {
                        let ax = Axes::parse(ax)?;
                        let curve = descriptor(&a, k, p.into(), ax, r_max, d)?;
                        let name = format!("{k}_{p}_{}.csv", ax.label());
                        let path = out_dir.join(name);
                        fs::write(&path, curve.to_csv())
                            .with_context(|| format!("writing {}", path.display()))?;
                    }
                }
            }
            Ok(())
        }
        Cmd::Sweep(a) => sweep(a),
        Cmd::AutoSelect {
            curve,
            dilation,
            out,
        } => {
            let text = fs::read_to_string(&curve)
                .with_context(|| format!("reading {}", curve.display()))?;
            let sel = auto_select_parameter(&StabilityCurve::from_csv(&text)?, dilation)?;
            let show = |v: Option<i64>| v.map_or_else(|| "-".to_string(), |l| l.to_string());
            let report = format!(
                "chord\t{}\ntwo-point\t{}\ncombined\t{}\n",
                show(sel.chord),
                show(sel.two_point),
                sel.combined
            );
            print!("{report}");
            if let Some(out) = out {
                fs::write(&out, report).with_context(|| format!("writing {}", out.display()))?;
            }
            Ok(())
        }
        Cmd::Slice {
            input,
            output,
            z,
            mask,
        } => {
            let v = grey(&input)?;
            match mask {
                Some(m) => export_overlay(&output, &v, &binary(&m)?, z),
                None => export_slice(&output, &v, z),
            }
            .with_context(|| format!("writing {}", output.display()))
        }
    }
}

fn descriptor(
    a: &BinaryVolume,
    k: Kind,
    p: Phase,
    axes: Axes,
    r_max: Option<usize>,
    d: Dims,
) -> anyhow::Result<DescriptorCurve> {
    let r = r_max.unwrap_or_else(|| default_r_max(d));
    Ok(match k {
        Kind::Chord => chord_length_distribution(a, p, axes, r)?,
        Kind::TwoPoint => two_point_correlation(a, p, axes, r)?,
    })
}

fn phantom(a: PhantomArgs) -> anyhow::Result<()> {
    if a.dims.len() != 3 || a.radius.len() != 2 {
        bail!(Error::Config(
            "--dims takes nx,ny,nz and --radius takes rmin,rmax".into()
        ));
    }
    let spec = PhantomSpec {
        dims: Dims::new(a.dims[0], a.dims[1], a.dims[2])?,
        model: GrainModel::Random(RandomPacking {
            count: a.spheres,
            neck_pairs: a.neck_pairs,
            radius: (a.radius[0], a.radius[1]),
            min_gap: a.min_gap,
            class_levels: a.class_levels,
        }),
        matrix_level: a.matrix_level,
        grain_level: a.grain_level,
        blur: a.blur,
        noise: a.noise,
        seed: a.seed,
    };
    let ph = generate_phantom(&spec)?;
    for w in &ph.warnings {
        eprintln!("warning: {w}");
    }
    write(&a.output, VolumeData::Grey(ph.volume))?;
    if let Some(t) = a.truth {
        write(&t, VolumeData::Label(ph.truth))?;
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> anyhow::Result<()> {
    let v = grey(&a.input)?;
    let d = v.dims();
    let r = a.r_max.unwrap_or_else(|| default_r_max(d));
    let settings = DescriptorSettings {
        phase: a.phase.into(),
        axes: Axes::parse(&a.axes)?,
        chord_r_max: r,
        two_point_r_max: r,
    };
    let curve = match a.route {
        RouteArg::Threshold => {
            let spec = SweepSpec::new("threshold-lo", Route::Threshold, a.start, a.stop, a.step)?;
            stability_sweep(
                &spec,
                threshold_route(&v, a.hi, StructuringElement::cube(a.opening)),
                settings,
            )?
        }
        RouteArg::Watershed => {
            let spec = SweepSpec::new("inside-lo", Route::Watershed, a.start, a.stop, a.step)?;
            let outside = a
                .outside
                .iter()
                .map(|s| label_spec(s))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let inside = LabelSpec::new(
                ThresholdRange::new(a.start.clamp(0, 255) as u8, a.hi)?,
                StructuringElement::cube(a.opening),
            );
            let comp = ComponentSpec::new("component", inside, outside)?;
            let route = watershed_route(
                &v,
                comp,
                DericheParams::new(a.alpha)?,
                Connectivity::from_count(a.connectivity)?,
            )?;
            stability_sweep(&spec, route, settings)?
        }
    };
    fs::write(&a.output, curve.to_csv())
        .with_context(|| format!("writing {}", a.output.display()))?;
    Ok(())
}

/// Exit code and category for an error chain.
fn classify(e: &anyhow::Error) -> (u8, &'static str) {
    let Some(core) = e.chain().find_map(|c| c.downcast_ref::<Error>()) else {
        return (1, "error");
    };
    let mut core = core;
    while let Error::Component { source, .. } = core {
        core = source;
    }
    match core {
        Error::Io(_) => (3, "io"),
        Error::Format(_) | Error::Config(_) => (4, "input"),
        Error::Precondition(_) | Error::DimensionMismatch { .. } => (5, "invalid argument"),
        Error::EmptySeeds
        | Error::SeedOutsideMask { .. }
        | Error::SeedOverlap { .. }
        | Error::NoChords
        | Error::CurveMismatch(_)
        | Error::InsufficientSweep { .. }
        | Error::NonFinite(_) => (6, "processing"),
        Error::Component { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, cat) = classify(&e);
            eprintln!("error[{cat}]: {e:#}");
            ExitCode::from(code)
        }
    }
}
