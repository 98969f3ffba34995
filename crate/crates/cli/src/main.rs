use std::fs;
use std::io::IsTerminal;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lumen_core::analytics::{analyze_study, SessionLog, DEFAULT_ALPHA};
use lumen_core::mesh::{
    generate_phantom, parse_mesh, write_mesh, MeshFormat, PhantomKind, PhantomSpec,
};
use lumen_core::path::{
    CenterlinePath, DEFAULT_DS, DEFAULT_SMOOTH_ITERATIONS, DEFAULT_SMOOTH_LAMBDA,
};
use lumen_core::skeleton::{extract_centerline, CenterlineParams, ContractionParams};
use lumen_core::travel::{Technique, TravelPolicy, DEFAULT_FOV_DEG};
use lumen_core::visibility::{
    sweep_coverage, Bvh, Directions, HeadModel, MarkerSet, SweepParams, DEFAULT_GRID,
};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "lumen", version, about = "Virtual colonography toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic tubular phantom mesh.
    Phantom(PhantomArgs),
    /// Extract a framed centerline from a closed tubular mesh.
    Centerline(CenterlineArgs),
    /// Sweep a camera policy along a path and report surface coverage.
    Coverage(CoverageArgs),
    /// Reduce session logs to per-technique statistics.
    Analyze(AnalyzeArgs),
    /// Run the HTTP/WebSocket session server.
    Serve(ServeArgs),
}

#[derive(Args)]
struct PhantomArgs {
    /// straight-tube, torus-arc, s-curve or haustral-tube.
    #[arg(long)]
    kind: PhantomKind,
    #[arg(long)]
    radius: Option<f64>,
    /// Axis length (m).
    #[arg(long)]
    length: Option<f64>,
    #[arg(long)]
    bend_radius: Option<f64>,
    /// Bend angle (rad).
    #[arg(long)]
    arc_angle: Option<f64>,
    #[arg(long)]
    fold_amplitude: Option<f64>,
    #[arg(long)]
    fold_wavelength: Option<f64>,
    #[arg(long)]
    rings: Option<usize>,
    #[arg(long)]
    segments: Option<usize>,
    /// Radial vertex noise as a fraction of the radius.
    #[arg(long)]
    jitter: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output mesh, .ply or .obj.
    #[arg(short, long)]
    output: PathBuf,
    /// Also write the analytic axis as a path file.
    #[arg(long)]
    centerline: Option<PathBuf>,
}

#[derive(Args)]
struct CenterlineArgs {
    /// Input mesh, .ply or .obj.
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// Skeleton cluster spacing (m); defaults to 1.5 × mean edge length.
    #[arg(long)]
    spacing: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Vertex indices of the two path ends, as `i,j`.
    #[arg(long, value_parser = parse_pair)]
    endpoints: Option<(usize, usize)>,
    #[arg(long, default_value_t = DEFAULT_DS)]
    ds: f64,
    #[arg(long, default_value_t = DEFAULT_SMOOTH_ITERATIONS)]
    smooth_iterations: usize,
    #[arg(long, default_value_t = DEFAULT_SMOOTH_LAMBDA)]
    smooth_lambda: f64,
}

#[derive(Args)]
struct CoverageArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    path: PathBuf,
    /// fly-through, fly-over or elevator.
    #[arg(long)]
    policy: Technique,
    /// Fly-over wall azimuth (rad).
    #[arg(long, default_value_t = 0.0)]
    phi: f64,
    /// Yaw the head through ± this many degrees at each station.
    #[arg(long)]
    head_sweep: Option<f64>,
    #[arg(long, default_value_t = 5)]
    head_stops: usize,
    /// Sweep the path in both directions.
    #[arg(long)]
    both_directions: bool,
    #[arg(long, default_value_t = DEFAULT_DS)]
    ds: f64,
    /// Rays per image side.
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
    #[arg(long, default_value_t = DEFAULT_FOV_DEG)]
    fov: f64,
    /// Marker set JSON to score for detectability.
    #[arg(long)]
    markers: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Session log files.
    #[arg(required = true)]
    logs: Vec<PathBuf>,
    #[arg(long)]
    markers: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    /// Directory with one subdirectory per scene.
    #[arg(long)]
    scenes: PathBuf,
    /// Directory for session logs.
    #[arg(long)]
    logs: PathBuf,
    #[arg(long, default_value_t = lumen_server::DEFAULT_TICK_HZ)]
    tick_hz: f64,
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected i,j")?;
    let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("{x:?}: {e}"));
    Ok((parse(a)?, parse(b)?))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn load_mesh(path: &Path) -> Result<lumen_core::mesh::TriMesh> {
    let mesh = parse_mesh(&read(path)?, MeshFormat::from_path(path))
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok(mesh)
}

fn load_path(path: &Path) -> Result<CenterlinePath> {
    CenterlinePath::from_json(&read_text(path)?)
        .with_context(|| format!("parsing {}", path.display()))
}

fn load_markers(path: &Path) -> Result<MarkerSet> {
    serde_json::from_str(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn phantom(args: PhantomArgs) -> Result<()> {
    let mut spec = match args.kind {
        PhantomKind::StraightTube => PhantomSpec::straight_tube(),
        PhantomKind::TorusArc => PhantomSpec::torus_arc(),
        PhantomKind::SCurve => PhantomSpec::s_curve(),
        PhantomKind::HaustralTube => PhantomSpec::haustral_tube(),
    };
    let set = |field: &mut f64, value: Option<f64>| {
        if let Some(v) = value {
            *field = v;
        }
    };
    set(&mut spec.radius, args.radius);
    set(&mut spec.length, args.length);
    set(&mut spec.bend_radius, args.bend_radius);
    set(&mut spec.arc_angle, args.arc_angle);
    set(&mut spec.fold_amplitude, args.fold_amplitude);
    set(&mut spec.fold_wavelength, args.fold_wavelength);
    set(&mut spec.jitter, args.jitter);
    spec.rings = args.rings.unwrap_or(spec.rings);
    spec.segments = args.segments.unwrap_or(spec.segments);
    spec.seed = args.seed.unwrap_or(spec.seed);

    let format = MeshFormat::from_path(&args.output).context("output must end in .ply or .obj")?;
    let phantom = generate_phantom(&spec)?;
    write(&args.output, write_mesh(&phantom.mesh, format))?;
    println!(
        "{}: {} vertices, {} faces, axis {:.4} m",
        args.output.display(),
        phantom.mesh.vertex_count(),
        phantom.mesh.face_count(),
        spec.axis_length()
    );
    if let Some(out) = args.centerline {
        let path = CenterlinePath::from_polyline(
            &phantom.centerline,
            DEFAULT_DS,
            0,
            DEFAULT_SMOOTH_LAMBDA,
        )?;
        write(&out, path.to_json())?;
        println!("{}: {} samples", out.display(), path.samples().len());
    }
    Ok(())
}

fn centerline(args: CenterlineArgs) -> Result<()> {
    let mesh = load_mesh(&args.input)?;
    let contraction = args.max_iters.map(|n| ContractionParams {
        max_iterations: n,
        ..ContractionParams::for_mesh(&mesh)
    });
    let params = CenterlineParams {
        contraction,
        spacing: args.spacing,
        endpoints: args.endpoints,
        ds: args.ds,
        smooth_iterations: args.smooth_iterations,
        smooth_lambda: args.smooth_lambda,
    };
    let result = extract_centerline(&mesh, &params)?;
    write(&args.output, result.path.to_json())?;
    println!(
        "{}: length {:.4} m, {} samples, {} skeleton nodes, {} contraction iterations{}",
        args.output.display(),
        result.path.length(),
        result.path.samples().len(),
        result.graph.nodes.len(),
        result.report.iterations,
        if result.report.converged {
            ""
        } else {
            " (not converged)"
        }
    );
    Ok(())
}

fn coverage(args: CoverageArgs) -> Result<()> {
    let mesh = load_mesh(&args.mesh)?;
    let path = load_path(&args.path)?;
    let markers = match &args.markers {
        Some(p) => load_markers(p)?.markers,
        None => Vec::new(),
    };
    let policy = match args.policy {
        Technique::FlyThrough => TravelPolicy::FlyThrough,
        Technique::FlyOver => TravelPolicy::fly_over(args.phi),
        Technique::Elevator => TravelPolicy::Elevator,
    };
    let mut params = SweepParams::new(policy);
    params.ds = args.ds;
    params.grid = args.grid;
    params.fov_deg = args.fov;
    if args.both_directions {
        params.directions = Directions::Both;
    }
    if let Some(half_angle_deg) = args.head_sweep {
        params.head = HeadModel::YawSweep {
            half_angle_deg,
            stops: args.head_stops,
        };
    }
    let bvh = Bvh::build(&mesh);
    let report = sweep_coverage(&bvh, &path, &params, &markers)?;
    write(&args.output, report.to_json())?;
    println!(
        "{}: coverage {:.2}% over {} poses",
        args.policy,
        100.0 * report.coverage,
        report.poses
    );
    for m in &report.markers {
        match &m.excluded {
            Some(why) => println!("  marker {}: excluded ({why})", m.id),
            None => println!(
                "  marker {}: {} ({:.1}% of poses)",
                m.id,
                if m.ever_visible { "seen" } else { "missed" },
                100.0 * m.fraction
            ),
        }
    }
    Ok(())
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        bail!("alpha must be in (0, 1)");
    }
    let markers = load_markers(&args.markers)?;
    let logs = args
        .logs
        .iter()
        .map(|p| {
            SessionLog::parse(&read_text(p)?).with_context(|| format!("parsing {}", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let report = analyze_study(&logs, &markers, args.alpha)?;
    write(&args.output, serde_json::to_string_pretty(&report)?)?;
    for m in &report.measures {
        match (&m.friedman_report, &m.skipped) {
            (Some(line), _) => println!("{}: {line}", m.table.measure),
            (None, Some(why)) => println!("{}: skipped ({why})", m.table.measure),
            (None, None) => println!("{}: no test", m.table.measure),
        }
        for p in &m.pairwise {
            let mark = if p.significant {
                " *"
            } else if p.boundary {
                " (uncorrected only)"
            } else {
                ""
            };
            println!("  {} vs {}: {}{mark}", p.a, p.b, p.report);
        }
    }
    Ok(())
}

fn serve(args: ServeArgs) -> Result<()> {
    let config = lumen_server::Config {
        addr: SocketAddr::new(args.host, args.port),
        scenes: args.scenes,
        logs: args.logs,
        tick_hz: args.tick_hz,
    };
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(lumen_server::serve(config))?;
    Ok(())
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
    match Cli::parse().command {
        Command::Phantom(a) => phantom(a),
        Command::Centerline(a) => centerline(a),
        Command::Coverage(a) => coverage(a),
        Command::Analyze(a) => analyze(a),
        Command::Serve(a) => serve(a),
    }
}
