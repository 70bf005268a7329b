use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use visionsim::optics::{PowerMap, RefractionProfile};
use visionsim::runner::{
    preview, run_protocol, validate_protocol, Diagnostic, PreviewOptions, RunOptions, Server,
    ServiceConfig, DATA_ENV,
};
use visionsim::Error;

#[derive(Parser)]
#[command(
    name = "visionsim",
    version,
    about = "Run, preview and serve multi-distance vision experiments"
)]
struct Cli {
    /// Print failures to stderr as JSON diagnostics.
    #[arg(long, global = true)]
    json_errors: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Play a protocol end to end with simulated participants.
    Run(RunArgs),
    /// Render one defocused frame.
    Preview(PreviewArgs),
    /// Check a protocol and everything it references.
    Validate(ValidateArgs),
    /// Serve a participant session over WebSocket.
    Serve(ServeArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    protocol: PathBuf,
    #[arg(long)]
    subject: String,
    /// Demographic answer as key=value; repeatable.
    #[arg(long = "demographic", value_parser = parse_pair)]
    demographics: Vec<(String, String)>,
    /// Demographics mask to check the answers against.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long, env = DATA_ENV, default_value = "data")]
    data_root: PathBuf,
    /// Overrides the protocol seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Device registry file; falls back to $VISIONSIM_DEVICES.
    #[arg(long)]
    devices: Option<PathBuf>,
    #[arg(long)]
    device: Option<String>,
    #[arg(long)]
    questionnaires: Option<PathBuf>,
}

#[derive(Args)]
struct PreviewArgs {
    /// PNG to blur; needs --depth. Without both, the office scene is rendered.
    #[arg(long, requires = "depth")]
    image: Option<PathBuf>,
    /// Depth map (PFM or 16-bit millimeter PNG); needs --image.
    #[arg(long, requires = "image")]
    depth: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    sphere: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    cylinder: f64,
    #[arg(long, default_value_t = 0.0)]
    axis: f64,
    /// Residual accommodation, diopters.
    #[arg(long, default_value_t = 0.0)]
    accommodation: f64,
    /// Lens power in diopters.
    #[arg(long, conflicts_with = "focus_distance", allow_hyphen_values = true)]
    lens_power: Option<f64>,
    /// Tune the lens to this distance in meters.
    #[arg(long)]
    focus_distance: Option<f64>,
    /// Pupil diameter, mm.
    #[arg(long, default_value_t = 4.0)]
    pupil: f64,
    /// Horizontal field of view, degrees.
    #[arg(long, default_value_t = 100.0)]
    fov: f64,
    #[arg(long, default_value_t = 800)]
    width: usize,
    #[arg(long, default_value_t = 500)]
    height: usize,
    /// JSON power map `{"grid": [[...], ...]}` added on top of the lens.
    #[arg(long)]
    power_map: Option<PathBuf>,
    #[arg(long, default_value = "preview.png")]
    out: PathBuf,
    /// Also write the blur field as a heatmap PNG.
    #[arg(long)]
    field_out: Option<PathBuf>,
    /// Also write the depth map as PFM.
    #[arg(long)]
    depth_out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    protocol: PathBuf,
    #[arg(long)]
    questionnaires: Option<PathBuf>,
    #[arg(long)]
    devices: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    protocol: PathBuf,
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long, env = DATA_ENV, default_value = "data")]
    data_root: PathBuf,
    #[arg(long)]
    questionnaires: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8765")]
    addr: String,
    /// Exit after this many client connections.
    #[arg(long)]
    max_connections: Option<usize>,
}

fn parse_pair(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .ok_or_else(|| format!("expected key=value, got {s:?}"))
}

fn run(args: RunArgs) -> Result<(), Error> {
    let opts = RunOptions {
        protocol: args.protocol,
        subject_id: args.subject,
        demographics: args.demographics.into_iter().collect::<BTreeMap<_, _>>(),
        mask: args.mask,
        data_root: args.data_root,
        seed: args.seed,
        devices: args.devices,
        device: args.device,
        questionnaire_dir: args.questionnaires,
    };
    let summary = run_protocol(&opts)?;
    println!(
        "session {} (seed {})",
        summary.session_dir.display(),
        summary.seed
    );
    for dir in &summary.scene_dirs {
        println!("  {}", dir.display());
    }
    Ok(())
}

fn preview_cmd(args: PreviewArgs) -> Result<(), Error> {
    let lens_power = match (args.lens_power, args.focus_distance) {
        (Some(p), _) => p,
        (None, Some(d)) if d > 0.0 => 1.0 / d,
        (None, Some(d)) => {
            return Err(Error::Invalid(vec![Diagnostic::new(
                "preview",
                format!("--focus-distance must be > 0, got {d}"),
            )]))
        }
        (None, None) => 0.0,
    };
    let power_map = match &args.power_map {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let map: PowerMap = serde_json::from_str(&text).map_err(|e| {
                Error::Invalid(vec![Diagnostic::new(
                    "power_map",
                    format!("{}: {e}", path.display()),
                )])
            })?;
            Some(map)
        }
        None => None,
    };
    let opts = PreviewOptions {
        image: args.image,
        depth: args.depth,
        refraction: RefractionProfile::new(
            args.sphere,
            args.cylinder,
            args.axis,
            args.accommodation,
        )?,
        lens_power,
        pupil_mm: args.pupil,
        fov: args.fov,
        power_map,
        width: args.width,
        height: args.height,
        out: args.out,
        field_out: args.field_out,
        depth_out: args.depth_out,
    };
    let report = preview(&opts)?;
    println!(
        "wrote {} ({}x{}, max blur {:.1} px)",
        opts.out.display(),
        report.width,
        report.height,
        report.max_blur_px
    );
    Ok(())
}

fn validate_cmd(args: ValidateArgs) -> Result<(), Error> {
    let (protocol, diags) = validate_protocol(
        &args.protocol,
        args.questionnaires.as_deref(),
        args.devices.as_deref(),
    );
    if !diags.is_empty() {
        return Err(Error::Invalid(diags));
    }
    let protocol = protocol.expect("validated");
    println!("{}: ok, {} scenes", protocol.name, protocol.scenes.len());
    Ok(())
}

fn serve(args: ServeArgs) -> Result<(), Error> {
    let config = ServiceConfig::load(
        &args.protocol,
        args.mask.as_deref(),
        args.data_root,
        args.questionnaires,
    )?;
    let mut server = Server::bind(&args.addr, config)?;
    println!("listening on ws://{}", server.local_addr()?);
    server.run(args.max_connections)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Run(a) => run(a),
        Cmd::Preview(a) => preview_cmd(a),
        Cmd::Validate(a) => validate_cmd(a),
        Cmd::Serve(a) => serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if cli.json_errors {
                let report = serde_json::json!({ "errors": e.diagnostics() });
                eprintln!("{report}");
            } else {
                eprintln!("error: {e}");
            }
            if matches!(e, Error::Invalid(_)) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
