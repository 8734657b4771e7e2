use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use graspforge::gripper::{GripperKind, GripperModel};
use graspforge::io::{
    export_facets_obj, export_grasps_obj, export_samples_obj, write_grasp_list, write_jsonl, ContactRecord, FacetRecord,
    PairRecord, ParamOverrides, PlannerKind, RunConfig,
};
use graspforge::planners::{find_parallel_pairs, plan, prepare, PlanResult, PlannerParams, Scene};
use graspforge::segmentation::SeedScan;
use graspforge::stability::CurvatureMode;
use graspforge::{load_mesh, MeshFormat, TriangleMesh};

#[derive(Parser)]
#[command(name = "graspforge", version, about = "Plan grasps on triangle meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment the mesh into superimposed facets.
    Segment(Common),
    /// Sample, distribute and refine contacts.
    Sample(Common),
    /// Find antipodal contact pairs.
    Pairs(Common),
    /// Plan grasps and write the grasp list.
    Plan(Common),
    /// Run the full pipeline and print per-stage timings.
    Stats(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Object mesh (STL or OBJ).
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Mesh format; detected from the file when omitted.
    #[arg(long)]
    format: Option<MeshFormat>,
    /// Run configuration file (TOML); flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Gripper profile: a path, a name in $GRASPFORGE_PROFILE_DIR, or a
    /// bundled profile (robotiq85, suction10, three_finger40).
    #[arg(long)]
    gripper: Option<String>,
    /// Planner; defaults to the gripper's kind.
    #[arg(long)]
    planner: Option<PlannerKind>,
    /// Extra collision-only mesh around the object.
    #[arg(long)]
    obstacles: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Write OBJ debug scenes next to the output.
    #[arg(long)]
    export_debug: bool,
    /// Also write rejected candidates (with reasons) to the grasp list.
    #[arg(long)]
    keep_rejected: bool,
    #[arg(long, value_name = "DEG")]
    theta_pln: Option<f64>,
    #[arg(long, value_name = "DEG")]
    theta_fct: Option<f64>,
    #[arg(long, value_name = "MM")]
    t_bdry: Option<f64>,
    #[arg(long, value_name = "MM")]
    t_rnn: Option<f64>,
    #[arg(long, value_name = "MM")]
    h_max: Option<f64>,
    #[arg(long, value_name = "DEG")]
    theta_parl: Option<f64>,
    #[arg(long, value_name = "MM")]
    t_dct: Option<f64>,
    #[arg(long)]
    n_da: Option<usize>,
    /// Samples per mm².
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Object mass, kg.
    #[arg(long)]
    mass: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    /// Per-jaw squeeze force, N.
    #[arg(long)]
    grip_force: Option<f64>,
    /// Seed search range for segmentation.
    #[arg(long, value_parser = parse_seed_scan)]
    seed_scan: Option<SeedScan>,
    /// Reduction of the per-triangle curvature ratios.
    #[arg(long, value_parser = parse_curvature_mode)]
    curvature: Option<CurvatureMode>,
    /// Worker threads for candidate evaluation (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

fn parse_seed_scan(s: &str) -> Result<SeedScan, String> {
    match s {
        "reachable" => Ok(SeedScan::Reachable),
        "one_ring" => Ok(SeedScan::OneRing),
        _ => Err("expected reachable or one_ring".into()),
    }
}

fn parse_curvature_mode(s: &str) -> Result<CurvatureMode, String> {
    match s {
        "max" => Ok(CurvatureMode::Max),
        "min" => Ok(CurvatureMode::Min),
        _ => Err("expected max or min".into()),
    }
}

impl Common {
    fn overrides(&self) -> ParamOverrides {
        ParamOverrides {
            theta_pln: self.theta_pln,
            theta_fct: self.theta_fct,
            theta_parl: self.theta_parl,
            t_bdry: self.t_bdry,
            t_rnn: self.t_rnn,
            t_dct: self.t_dct,
            h_max: self.h_max,
            n_da: self.n_da,
            density: self.density,
            seed: self.seed,
            mass: self.mass,
            mu: self.mu,
            grip_force: self.grip_force,
            seed_scan: self.seed_scan,
            curvature_mode: self.curvature,
            jobs: self.jobs,
            ..Default::default()
        }
    }
}

/// Flags merged over the config file.
struct Run {
    mesh_path: PathBuf,
    format: Option<MeshFormat>,
    obstacles: Option<PathBuf>,
    gripper: Option<String>,
    planner: Option<PlannerKind>,
    output: Option<PathBuf>,
    export_debug: bool,
    keep_rejected: bool,
    overrides: ParamOverrides,
}

impl Run {
    fn new(c: &Common) -> Result<Self> {
        let file = match &c.config {
            Some(path) => {
                let base = path.parent().unwrap_or(Path::new("."));
                RunConfig::load(path)?.resolve_paths(base)
            }
            None => RunConfig::default(),
        };
        let mesh_path = c
            .mesh
            .clone()
            .or(file.object_mesh)
            .ok_or_else(|| anyhow!("no object mesh given (--mesh or object_mesh in the config)"))?;
        Ok(Self {
            mesh_path,
            format: c.format,
            obstacles: c.obstacles.clone().or(file.obstacles),
            gripper: c.gripper.clone().or(file.gripper_profile),
            planner: c.planner.or(file.planner),
            output: c.output.clone().or(file.output),
            export_debug: c.export_debug || file.export_debug.unwrap_or(false),
            keep_rejected: c.keep_rejected,
            overrides: file.params.merged(&c.overrides()),
        })
    }

    fn mesh(&self) -> Result<TriangleMesh> {
        Ok(load_mesh(&self.mesh_path, self.format)?)
    }

    /// Parameters for stages that never evaluate stability, where the mass
    /// may be left out.
    fn params_without_mass(&self) -> Result<PlannerParams> {
        let mut o = self.overrides.clone();
        o.mass.get_or_insert(1.0);
        Ok(o.to_params()?)
    }

    fn params(&self) -> Result<PlannerParams> {
        let mut p = self.overrides.to_params()?;
        p.keep_rejected = self.keep_rejected || self.export_debug;
        Ok(p)
    }

    fn gripper(&self) -> Result<GripperModel> {
        let spec = match (&self.gripper, self.planner) {
            (Some(g), _) => g.clone(),
            (None, Some(PlannerKind::Suction)) => "suction10".into(),
            (None, Some(PlannerKind::ThreeFinger)) => "three_finger40".into(),
            (None, _) => "robotiq85".into(),
        };
        let model = GripperModel::resolve(&spec)?;
        if let Some(kind) = self.planner {
            let expected = match kind {
                PlannerKind::Suction => GripperKind::Suction,
                PlannerKind::TwoFinger => GripperKind::TwoFinger,
                PlannerKind::ThreeFinger => GripperKind::ThreeFinger,
            };
            if model.kind != expected {
                bail!("planner {kind:?} does not match gripper kind {:?}", model.kind);
            }
        }
        Ok(model)
    }

    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.output {
            Some(p) => Box::new(BufWriter::new(
                File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
            )),
            None => Box::new(BufWriter::new(std::io::stdout().lock())),
        })
    }

    fn debug_path(&self, suffix: &str) -> PathBuf {
        let stem = self
            .output
            .as_ref()
            .map(|p| p.with_extension(""))
            .unwrap_or_else(|| PathBuf::from("graspforge_debug"));
        PathBuf::from(format!("{}.{suffix}.obj", stem.display()))
    }

    fn debug_file(&self, suffix: &str) -> Result<BufWriter<File>> {
        let path = self.debug_path(suffix);
        log::info!("writing {}", path.display());
        Ok(BufWriter::new(
            File::create(&path).with_context(|| format!("cannot create {}", path.display()))?,
        ))
    }
}

fn cmd_segment(run: &Run) -> Result<()> {
    let mesh = run.mesh()?;
    let params = run.params_without_mass()?;
    let prepared = prepare(&mesh, &params);
    let facets = &prepared.facets;
    eprintln!("{} triangles, {} facets", mesh.len(), facets.len());
    write_jsonl(run.writer()?, facets.iter().enumerate().map(|(i, f)| FacetRecord::new(i, f)))?;
    if run.export_debug {
        export_facets_obj(run.debug_file("facets")?, &mesh, facets, 0.0, params.rng_seed)?;
        export_facets_obj(run.debug_file("facets_exploded")?, &mesh, facets, 10.0, params.rng_seed)?;
    }
    Ok(())
}

fn cmd_sample(run: &Run) -> Result<()> {
    let mesh = run.mesh()?;
    let params = run.params_without_mass()?;
    let p = prepare(&mesh, &params);
    let count = |v: &[Vec<_>]| v.iter().map(Vec::len).sum::<usize>();
    eprintln!(
        "{} samples, {} contacts, {} after boundary filter, {} after rnn",
        p.samples.len(),
        count(&p.distributed),
        count(&p.boundary_refined),
        count(&p.contacts)
    );
    write_jsonl(run.writer()?, p.contacts.iter().flatten().map(ContactRecord::from))?;
    if run.export_debug {
        export_samples_obj(run.debug_file("samples")?, &p.distributed, &p.boundary_refined, &p.contacts)?;
    }
    Ok(())
}

fn cmd_pairs(run: &Run) -> Result<()> {
    let mesh = run.mesh()?;
    let params = run.params_without_mass()?;
    let range = match run.gripper() {
        Ok(g) if g.kind != GripperKind::Suction => Some(g.opening()),
        _ => None,
    };
    let p = prepare(&mesh, &params);
    let pairs = find_parallel_pairs(&mesh, &p.facets, &p.contacts, params.theta_parl, range);
    eprintln!("{} pairs", pairs.len());
    write_jsonl(run.writer()?, pairs.iter().map(PairRecord::from))?;
    Ok(())
}

fn run_plan(run: &Run) -> Result<(TriangleMesh, GripperModel, PlanResult, Duration)> {
    let mesh = run.mesh()?;
    let obstacles = run.obstacles.as_ref().map(|p| load_mesh(p, None)).transpose()?;
    let model = run.gripper()?;
    let params = run.params()?;
    let mut scene = Scene::new(&mesh);
    if let Some(o) = &obstacles {
        scene = scene.with_obstacles(o);
    }
    let t = Instant::now();
    let result = plan(&scene, &params, &model)?;
    let elapsed = t.elapsed();
    Ok((mesh, model, result, elapsed))
}

fn cmd_plan(run: &Run) -> Result<()> {
    let (mesh, model, result, elapsed) = run_plan(run)?;
    let c = &result.counters;
    eprintln!(
        "{} grasps from {} pairs in {:.3} s (stroke {}, hand {}, pad gap {}, unstable {}, out of stroke {})",
        result.grasps.len(),
        c.pairs,
        elapsed.as_secs_f64(),
        c.stroke_collision,
        c.hand_collision,
        c.pad_gap,
        c.unstable,
        c.out_of_stroke
    );
    let rejected: &[_] = if run.keep_rejected { &result.rejected } else { &[] };
    write_grasp_list(run.writer()?, result.grasps.iter().chain(rejected))?;
    if run.export_debug {
        let p = &result.prepared;
        export_facets_obj(run.debug_file("facets")?, &mesh, &p.facets, 0.0, 0)?;
        export_facets_obj(run.debug_file("facets_exploded")?, &mesh, &p.facets, 10.0, 0)?;
        export_samples_obj(run.debug_file("samples")?, &p.distributed, &p.boundary_refined, &p.contacts)?;
        export_grasps_obj(run.debug_file("scene")?, &mesh, &model, &result.grasps, &result.rejected)?;
    }
    Ok(())
}

fn cmd_stats(run: &Run) -> Result<()> {
    let (mesh, _, result, elapsed) = run_plan(run)?;
    let rows = result.timings.rows();
    let mut ranked: Vec<usize> = (0..rows.len()).collect();
    ranked.sort_by(|&a, &b| rows[b].1.cmp(&rows[a].1).then(a.cmp(&b)));
    let mut rank = vec![0; rows.len()];
    for (r, &i) in ranked.iter().enumerate() {
        rank[i] = r + 1;
    }
    let mut out = run.writer()?;
    writeln!(out, "# triangles {} grasps {} total_s {:.6}", mesh.len(), result.grasps.len(), elapsed.as_secs_f64())?;
    writeln!(out, "{:<14} {:>12} {:>5}", "stage", "seconds", "rank")?;
    for (i, (name, d)) in rows.iter().enumerate() {
        writeln!(out, "{:<14} {:>12.6} {:>5}", name, d.as_secs_f64(), rank[i])?;
    }
    let c = &result.counters;
    writeln!(
        out,
        "# facets {} samples {} contacts {} refined {} pairs {} stroke_checks {} roll_checks {}",
        c.facets, c.samples, c.contacts, c.refined_contacts, c.pairs, c.stroke_checks, c.roll_checks
    )?;
    out.flush()?;
    Ok(())
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        let io = c.downcast_ref::<std::io::Error>().or(match c.downcast_ref::<graspforge::io::IoError>() {
            Some(graspforge::io::IoError::Io(io)) => Some(io),
            _ => None,
        });
        io.is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
    })
}

/// Short category for the machine-readable error line.
fn error_kind(e: &anyhow::Error) -> &'static str {
    for cause in e.chain() {
        if cause.is::<graspforge::MeshError>() {
            return "mesh";
        }
        if cause.is::<graspforge::gripper::GripperError>() {
            return "gripper";
        }
        if cause.is::<graspforge::planners::PlanError>() {
            return "plan";
        }
        if let Some(e) = cause.downcast_ref::<graspforge::io::IoError>() {
            return match e {
                graspforge::io::IoError::Io(_) | graspforge::io::IoError::File { .. } => "io",
                _ => "config",
            };
        }
        if cause.is::<std::io::Error>() {
            return "io";
        }
    }
    "usage"
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Segment(c) => Run::new(c).and_then(|r| cmd_segment(&r)),
        Command::Sample(c) => Run::new(c).and_then(|r| cmd_sample(&r)),
        Command::Pairs(c) => Run::new(c).and_then(|r| cmd_pairs(&r)),
        Command::Plan(c) => Run::new(c).and_then(|r| cmd_plan(&r)),
        Command::Stats(c) => Run::new(c).and_then(|r| cmd_stats(&r)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            let message = format!("{e:#}").replace('"', "'");
            eprintln!("graspforge: error kind={} message=\"{message}\"", error_kind(&e));
            ExitCode::FAILURE
        }
    }
}
