//! `vsa`: run networks through the accelerator model and report cycles,
//! utilization and DRAM traffic.

mod report;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use vsa_core::arch::{
    estimate_conv_cycles, estimate_encoding_cycles, peak_gops, run_network_engine, ArchError, CycleReport,
    HardwareConfig,
};
use vsa_core::mem::{footprints, pingpong_schedule, plan_fusion, simulate_traffic, FusionPlan, MemError};
use vsa_core::net::{
    generate_random_bundle, load_bundle, parse_network, random_image, read_input_tensor, validate, AnnotatedNetwork,
    LayerKind, ModelBundle, Preset,
};
use vsa_core::snn::{run_network_oracle, ImageTensor, Shape3, DEFAULT_BN_EPS};

use report::{BenchReport, Format, RunReport, TrafficReport};

const EXIT_CODES: &str = "\
Exit status:
  0  success
  1  I/O error (unreadable or unwritable file)
  2  invalid command-line arguments
  3  invalid network, bundle, input, configuration or fusion plan
  4  capacity fault in an on-chip buffer
  5  --verify found a spike mismatch between engine and reference model";

#[derive(Parser)]
#[command(name = "vsa", version, about = "Vectorwise binary-weight SNN accelerator simulator", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one inference on the datapath and memory model.
    Run(RunArgs),
    /// DRAM traffic with and without layer fusion, no datapath simulation.
    Traffic(TrafficArgs),
    /// Peak and achieved throughput of the preset networks.
    Bench(BenchArgs),
}

#[derive(clap::Args)]
struct NetArgs {
    /// Preset name (mnist, cifar10), a file holding a network string, or the string itself.
    #[arg(long)]
    net: Option<String>,
    /// Input shape as CxHxW; defaults to the preset's or the bundle's.
    #[arg(long, value_parser = parse_shape)]
    input_shape: Option<Shape3>,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..))]
    timesteps: u32,
    /// Hardware configuration (TOML); unspecified keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    report: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct RunArgs {
    #[command(flatten)]
    common: NetArgs,
    /// Model bundle; without it a random bundle is generated from --seed.
    #[arg(long)]
    bundle: Option<PathBuf>,
    /// Raw input tensor; without it a random image is generated from --seed.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = OnOff::On)]
    fusion: OnOff,
    /// Also run the reference model and compare every spike.
    #[arg(long)]
    verify: bool,
    /// Leave timestamps out of the report.
    #[arg(long)]
    deterministic: bool,
}

#[derive(clap::Args)]
struct TrafficArgs {
    #[command(flatten)]
    common: NetArgs,
    /// `auto` for the greedy planner, or a JSON file `{"groups": [[0], [1, 2], ...]}`
    /// naming compute layers by network index.
    #[arg(long, default_value = "auto")]
    fusion_plan: String,
}

#[derive(clap::Args)]
struct BenchArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..))]
    timesteps: u32,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    report: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

fn parse_shape(s: &str) -> Result<Shape3, String> {
    let dims: Vec<usize> = s
        .split(['x', 'X'])
        .map(|d| d.trim().parse::<usize>().map_err(|e| format!("bad dimension {d:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match dims[..] {
        [c, h, w] if c > 0 && h > 0 && w > 0 => Ok(Shape3::new(c, h, w)),
        _ => Err(format!("expected CxHxW with positive dimensions, got {s:?}")),
    }
}

#[derive(Debug)]
enum Failure {
    Io(String),
    Invalid(String),
    Capacity(String),
    Mismatch(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Invalid(_) => 3,
            Failure::Capacity(_) => 4,
            Failure::Mismatch(_) => 5,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Io(m) => write!(f, "I/O error: {m}"),
            Failure::Invalid(m) => write!(f, "invalid input: {m}"),
            Failure::Capacity(m) => write!(f, "{m}"),
            Failure::Mismatch(m) => write!(f, "verification failed: {m}"),
        }
    }
}

fn invalid(e: impl fmt::Display) -> Failure {
    Failure::Invalid(e.to_string())
}

impl From<MemError> for Failure {
    fn from(e: MemError) -> Self {
        if e.is_capacity() {
            Failure::Capacity(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

impl From<ArchError> for Failure {
    fn from(e: ArchError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn load_config(path: Option<&Path>) -> Result<HardwareConfig, Failure> {
    let cfg = match path {
        Some(p) => toml::from_str(&read_text(p)?).map_err(|e| invalid(format!("{}: {e}", p.display())))?,
        None => HardwareConfig::default(),
    };
    cfg.validate().map_err(invalid)?;
    Ok(cfg)
}

/// Network text and default input shape for a `--net` value.
fn resolve_net(spec: &str) -> Result<(String, Option<Shape3>), Failure> {
    if let Some(p) = Preset::from_name(spec) {
        return Ok((p.text().to_string(), Some(p.input_shape())));
    }
    let path = Path::new(spec);
    if path.is_file() {
        return Ok((read_text(path)?.trim().to_string(), None));
    }
    Ok((spec.to_string(), None))
}

fn annotate(text: &str, shape: Option<Shape3>) -> Result<AnnotatedNetwork, Failure> {
    let net = parse_network(text).map_err(invalid)?;
    let shape = shape.ok_or_else(|| invalid("no input shape: pass --input-shape"))?;
    validate(&net, shape).map_err(invalid)
}

fn emit(text: String, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let c = &args.common;
    let cfg = load_config(c.config.as_deref())?;
    let t = c.timesteps as usize;
    let bundle_file = match &args.bundle {
        Some(p) => Some(load_bundle(p).map_err(|e| match e {
            vsa_core::net::BundleError::Io(io) => Failure::Io(format!("{}: {io}", p.display())),
            other => invalid(other),
        })?),
        None => None,
    };
    let image_file = match &args.input {
        Some(p) => Some(read_input_tensor(p).map_err(|e| match e {
            vsa_core::net::BundleError::Io(io) => Failure::Io(format!("{}: {io}", p.display())),
            other => invalid(other),
        })?),
        None => None,
    };
    let (text, preset_shape) = match (&c.net, &bundle_file) {
        (Some(spec), _) => resolve_net(spec)?,
        (None, Some(b)) => (b.net.to_string(), Some(b.input_shape)),
        (None, None) => return Err(invalid("pass --net or --bundle")),
    };
    let shape = c
        .input_shape
        .or(bundle_file.as_ref().map(|b| b.input_shape))
        .or(image_file.as_ref().map(ImageTensor::shape))
        .or(preset_shape);
    let net = annotate(&text, shape)?;
    let bundle: ModelBundle = match bundle_file {
        Some(b) => {
            if b.net.to_string() != net.description().to_string() || b.input_shape != net.input {
                return Err(invalid(format!(
                    "bundle holds {} on {}, requested {} on {}",
                    b.net,
                    b.input_shape,
                    net.description(),
                    net.input
                )));
            }
            b
        }
        None => generate_random_bundle(&net, args.seed, cfg.format(), DEFAULT_BN_EPS).map_err(invalid)?,
    };
    let image = match image_file {
        Some(img) => img,
        None => random_image(net.input, args.seed),
    };

    let engine = run_network_engine(&bundle, &image, t, &cfg)?;
    let layers = footprints(&net, cfg.format().byte_width());
    let plan = match args.fusion {
        OnOff::On => plan_fusion(&layers, &cfg),
        OnOff::Off => FusionPlan::unfused(&layers),
    };
    let ledger = simulate_traffic(&layers, &plan, t, &cfg)?;
    let oracle = if args.verify { Some(run_network_oracle(&bundle, &image, t).map_err(invalid)?) } else { None };
    let trace = pingpong_schedule(&layers, &plan, t, &cfg, oracle.as_ref().map(|o| &o.layers[..]))?;
    let oracle_match = oracle.as_ref().map(|o| o.layers == engine.layers);

    let report = RunReport::new(
        &net,
        &bundle,
        &cfg,
        t,
        &engine,
        ledger,
        &trace,
        oracle_match,
        (!args.deterministic).then(report::unix_time),
    );
    emit(report.render(c.report).map_err(invalid)?, c.out.as_deref())?;
    match oracle_match {
        Some(false) => Err(Failure::Mismatch(report.first_mismatch(oracle.as_ref().unwrap(), &engine))),
        _ => Ok(()),
    }
}

fn cmd_traffic(args: TrafficArgs) -> Result<(), Failure> {
    let c = &args.common;
    let cfg = load_config(c.config.as_deref())?;
    let spec = c.net.as_deref().ok_or_else(|| invalid("pass --net"))?;
    let (text, preset_shape) = resolve_net(spec)?;
    let net = annotate(&text, c.input_shape.or(preset_shape))?;
    let layers = footprints(&net, cfg.format().byte_width());
    let plan = if args.fusion_plan == "auto" {
        plan_fusion(&layers, &cfg)
    } else {
        let path = Path::new(&args.fusion_plan);
        serde_json::from_str::<FusionPlan>(&read_text(path)?)
            .map_err(|e| invalid(format!("{}: {e}", path.display())))?
    };
    let t = c.timesteps as usize;
    let fused = simulate_traffic(&layers, &plan, t, &cfg)?;
    let unfused = simulate_traffic(&layers, &FusionPlan::unfused(&layers), t, &cfg)?;
    let report = TrafficReport::new(&net, &layers, unfused, fused);
    emit(report.render(c.report).map_err(invalid)?, c.out.as_deref())
}

/// Closed-form cycle totals of a network over `t` steps.
fn estimate_network(net: &AnnotatedNetwork, cfg: &HardwareConfig, t: usize) -> Result<Vec<(usize, CycleReport)>, Failure> {
    let mut out = Vec::new();
    for l in &net.layers {
        let (k, pad, c) = (l.spec.kernel, l.spec.padding, l.spec.out_channels);
        let r = match l.spec.kind {
            LayerKind::EncodingConv => estimate_encoding_cycles(l.input, pad, k, c, cfg)?,
            LayerKind::Conv => estimate_conv_cycles(l.input, pad, k, c, cfg).repeated(t as u64),
            LayerKind::Fc => estimate_conv_cycles(l.input.flattened(), 0, k, c, cfg).repeated(t as u64),
            LayerKind::MaxPool2 => continue,
        };
        out.push((l.index, r));
    }
    Ok(out)
}

fn cmd_bench(args: BenchArgs) -> Result<(), Failure> {
    let cfg = load_config(args.config.as_deref())?;
    let t = args.timesteps as usize;
    let mut report = BenchReport::new(&cfg, t);
    for preset in Preset::ALL {
        let net = validate(&preset.network(), preset.input_shape()).map_err(invalid)?;
        report.add(preset.name(), &estimate_network(&net, &cfg, t)?, &cfg);
    }
    debug_assert_eq!(report.peak_gops, peak_gops(&cfg));
    emit(report.render(args.report).map_err(invalid)?, args.out.as_deref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Traffic(a) => cmd_traffic(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vsa: {e}");
            ExitCode::from(e.code())
        }
    }
}
