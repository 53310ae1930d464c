use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use roofgraph::bench::{self, Aggregate, BenchItem, BenchReport, GT_SUFFIX};
use roofgraph::config::Config;
use roofgraph::io::{normalize_to_range, read_obj_wireframe, read_xyz, write_obj_wireframe, write_xyz, Wireframe};
use roofgraph::scoring::score_graph_with;
use roofgraph::synth::{generate_roof, perturb_noise, perturb_sparsity, Archetype, PerturbSpec, RoofSpec};
use roofgraph::{evaluate, reconstruct_with_params, triangulate, Error};

/// Roof wireframe reconstruction from point clouds.
#[derive(Debug, Parser)]
#[command(name = "roofgraph", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write per-vertex corner scores and per-edge dihedral angles as CSV.
    Score(ScoreArgs),
    /// Reconstruct a wireframe (OBJ) from a point cloud (XYZ).
    Reconstruct(ReconstructArgs),
    /// Compare a predicted wireframe with ground truth.
    Eval(EvalArgs),
    /// Generate a synthetic roof and its ground-truth wireframe.
    Synth(SynthArgs),
    /// Remove a patch of points and add Gaussian noise to a cloud.
    Perturb(PerturbArgs),
    /// Reconstruct and evaluate every cloud of a suite directory.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct ParamsArg {
    /// Key-value parameter file.
    #[arg(long, value_name = "FILE")]
    params: Option<PathBuf>,
}

impl ParamsArg {
    fn load(&self) -> Result<Config, Failure> {
        match &self.params {
            Some(path) => Config::load(path).map_err(|e| match e {
                Error::Io(e) => Failure::Usage(format!("cannot read {}: {e}", path.display())),
                e => Failure::Usage(format!("{}: {e}", path.display())),
            }),
            None => Ok(Config::default()),
        }
    }
}

#[derive(Debug, Args)]
struct ScoreArgs {
    /// Input cloud (XYZ).
    #[arg(long)]
    input: PathBuf,
    /// Vertex scores CSV (vertex_index,score).
    #[arg(long)]
    output: PathBuf,
    /// Edge angles CSV (edge_u,edge_v,theta); defaults to the output path
    /// with `_edges` appended to its stem.
    #[arg(long)]
    edges: Option<PathBuf>,
    #[command(flatten)]
    params: ParamsArg,
}

#[derive(Debug, Args)]
struct ReconstructArgs {
    /// Input cloud (XYZ).
    #[arg(long)]
    input: PathBuf,
    /// Output wireframe (OBJ).
    #[arg(long)]
    output: PathBuf,
    /// Write every wire candidate as CSV (i,j,path_score,scale_factor,accepted).
    #[arg(long, value_name = "FILE")]
    dump_candidates: Option<PathBuf>,
    #[command(flatten)]
    params: ParamsArg,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Predicted wireframe (OBJ), or a directory of them.
    #[arg(long)]
    input: PathBuf,
    /// Ground-truth wireframe (OBJ), or a directory holding `<name>_gt.obj`
    /// or `<name>.obj` for every prediction.
    #[arg(long)]
    gt: PathBuf,
    /// Evaluate in the normalized frame of this cloud (single pair only).
    #[arg(long)]
    cloud: Option<PathBuf>,
    /// Corner match distance.
    #[arg(long)]
    threshold: Option<f64>,
    /// Report path; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    params: ParamsArg,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    output: PathBuf,
    /// Write the standard five-roof suite instead of a single roof.
    #[arg(long, conflicts_with = "archetype")]
    suite: bool,
    /// flat, gable, hip, pyramid or l_gable.
    #[arg(long, required_unless_present = "suite")]
    archetype: Option<Archetype>,
    /// File name stem; defaults to the archetype name.
    #[arg(long)]
    name: Option<String>,
    #[arg(long, default_value_t = 256.0)]
    width: f64,
    #[arg(long, default_value_t = 128.0)]
    depth: f64,
    #[arg(long, default_value_t = 40.0)]
    ridge_height: f64,
    #[arg(long, default_value_t = bench::SUITE_POINT_COUNT)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also perturb the suite with the perturbation settings of `--params`.
    #[arg(long, requires = "suite")]
    perturb: bool,
    #[command(flatten)]
    params: ParamsArg,
}

#[derive(Debug, Args)]
struct PerturbArgs {
    /// Input cloud (XYZ).
    #[arg(long)]
    input: PathBuf,
    /// Output cloud (XYZ).
    #[arg(long)]
    output: PathBuf,
    /// Fraction of points removed around a random anchor; 0 disables.
    #[arg(long)]
    sparsity: Option<f64>,
    /// Standard deviation of the per-coordinate noise.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    params: ParamsArg,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Suite directory of `<name>.xyz` / `<name>_gt.obj` pairs.
    #[arg(long)]
    input: PathBuf,
    /// JSON-lines report path; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Corner match distance in normalized units.
    #[arg(long)]
    threshold: Option<f64>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    params: ParamsArg,
}

enum Failure {
    /// Bad flags or parameter file.
    Usage(String),
    /// The run itself failed.
    Run(String),
    /// The run finished but some items failed.
    Items,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } => Failure::Usage(e.to_string()),
            e => Failure::Run(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).map_err(|e| Failure::Run(format!("cannot open {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| Failure::Run(format!("cannot create {}: {e}", path.display())))
}

fn output_writer(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn positive_threshold(threshold: f64) -> Result<f64, Failure> {
    if threshold.is_finite() && threshold > 0.0 {
        Ok(threshold)
    } else {
        Err(Failure::Usage(format!("threshold must be positive, got {threshold}")))
    }
}

fn edges_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().and_then(|s| s.to_str()).unwrap_or("scores");
    let name = match output.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_edges.{ext}"),
        None => format!("{stem}_edges"),
    };
    output.with_file_name(name)
}

fn run_score(args: &ScoreArgs) -> Result<(), Failure> {
    let config = args.params.load()?;
    let cloud = read_xyz(open(&args.input)?)?;
    let (normalized, _) = normalize_to_range(&cloud)?;
    let graph = triangulate(&normalized, config.params.xy_epsilon)?;
    let options = roofgraph::scoring::ScoringOptions { exclude_boundary_edges: config.params.exclude_boundary_edges };
    let sg = score_graph_with(graph, &normalized, &options)?;

    let mut out = create(&args.output)?;
    writeln!(out, "vertex_index,score")?;
    for (v, s) in sg.corner_scores.iter().enumerate() {
        writeln!(out, "{v},{s:?}")?;
    }
    out.flush()?;

    let mut out = create(&args.edges.clone().unwrap_or_else(|| edges_path(&args.output)))?;
    writeln!(out, "edge_u,edge_v,theta")?;
    for (e, theta) in sg.edge_angles.iter().enumerate() {
        let [u, v] = sg.graph.edges[e];
        writeln!(out, "{u},{v},{theta:?}")?;
    }
    out.flush()?;
    Ok(())
}

fn optional(value: Option<f64>) -> String {
    value.map(|v| format!("{v:?}")).unwrap_or_default()
}

fn run_reconstruct(args: &ReconstructArgs) -> Result<(), Failure> {
    let config = args.params.load()?;
    let cloud = read_xyz(open(&args.input)?)?;
    let result = reconstruct_with_params(&cloud, &config.params)?;
    let mut out = create(&args.output)?;
    write_obj_wireframe(&result.wireframe, &mut out)?;
    out.flush()?;

    if let Some(path) = &args.dump_candidates {
        let accepted: std::collections::HashSet<(usize, usize)> = result.wireframe.wires.iter().copied().collect();
        let mut out = create(path)?;
        writeln!(out, "i,j,path_score,scale_factor,accepted")?;
        for c in &result.candidates {
            let (i, j) = c.endpoints;
            writeln!(
                out,
                "{i},{j},{},{},{}",
                optional(c.path_score),
                optional(c.scale_factor),
                accepted.contains(&(i, j))
            )?;
        }
        out.flush()?;
    }
    Ok(())
}

fn read_wireframe(path: &Path) -> Result<Wireframe, Failure> {
    read_obj_wireframe(open(path)?).map_err(|e| Failure::Run(format!("{}: {e}", path.display())))
}

/// Prediction/ground-truth pairs of a batch evaluation, sorted by name.
fn eval_pairs(pred_dir: &Path, gt_dir: &Path) -> Result<Vec<(String, PathBuf, PathBuf)>, Failure> {
    let mut pairs = Vec::new();
    for entry in std::fs::read_dir(pred_dir)? {
        let path = entry?.path();
        let Some(file) = path.file_name().and_then(|n| n.to_str()) else { continue };
        if !file.ends_with(".obj") || file.ends_with(GT_SUFFIX) {
            continue;
        }
        let name = file.trim_end_matches(".obj").to_string();
        let suffixed = gt_dir.join(format!("{name}{GT_SUFFIX}"));
        let gt = if suffixed.exists() { suffixed } else { gt_dir.join(file) };
        pairs.push((name, path, gt));
    }
    pairs.sort();
    Ok(pairs)
}

fn run_eval(args: &EvalArgs) -> Result<(), Failure> {
    let config = args.params.load()?;
    let threshold = positive_threshold(args.threshold.unwrap_or(config.threshold))?;
    let mut out = output_writer(args.output.as_deref())?;

    if args.input.is_dir() {
        if !args.gt.is_dir() {
            return Err(Failure::Usage("--gt must be a directory when --input is".into()));
        }
        if args.cloud.is_some() {
            return Err(Failure::Usage("--cloud applies to a single prediction only".into()));
        }
        let items: Vec<BenchItem> = eval_pairs(&args.input, &args.gt)?
            .into_iter()
            .map(|(name, pred, gt)| {
                let outcome = (|| -> Result<_, Failure> {
                    Ok(evaluate(&read_wireframe(&pred)?, &read_wireframe(&gt)?, threshold)?)
                })();
                match outcome {
                    Ok(report) => BenchItem { name, metrics: Some(report), error: None, timing: None },
                    Err(Failure::Run(e) | Failure::Usage(e)) => {
                        BenchItem { name, metrics: None, error: Some(e), timing: None }
                    }
                    Err(Failure::Items) => unreachable!("single evaluations have no items"),
                }
            })
            .collect();
        let report = BenchReport { aggregate: Aggregate::from_items(&items), items };
        report.write_json_lines(&mut out)?;
        out.flush()?;
        return if report.has_failures() { Err(Failure::Items) } else { Ok(()) };
    }

    let mut pred = read_wireframe(&args.input)?;
    let mut gt = read_wireframe(&args.gt)?;
    if let Some(cloud) = &args.cloud {
        let (_, transform) = normalize_to_range(&read_xyz(open(cloud)?)?)?;
        pred = transform.apply_wireframe(&pred);
        gt = transform.apply_wireframe(&gt);
    }
    let report = evaluate(&pred, &gt, threshold)?;
    serde_json::to_writer_pretty(&mut out, &report).map_err(|e| Failure::Run(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn write_pair(dir: &Path, name: &str, cloud: &roofgraph::PointCloud, gt: &Wireframe) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)?;
    let mut out = create(&dir.join(format!("{name}.xyz")))?;
    write_xyz(cloud, &mut out)?;
    out.flush()?;
    let mut out = create(&dir.join(format!("{name}{GT_SUFFIX}")))?;
    write_obj_wireframe(gt, &mut out)?;
    out.flush()?;
    Ok(())
}

fn run_synth(args: &SynthArgs) -> Result<(), Failure> {
    let config = args.params.load()?;
    if args.suite {
        let perturb = args.perturb.then_some(&config.perturb);
        let entries = bench::write_suite(&args.output, args.points, args.seed, perturb)?;
        for e in entries {
            println!("{}", e.cloud.display());
        }
        return Ok(());
    }
    let archetype = args.archetype.ok_or_else(|| Failure::Usage("--archetype is required".into()))?;
    let spec = RoofSpec {
        archetype,
        width: args.width,
        depth: args.depth,
        ridge_height: args.ridge_height,
        point_count: args.points,
        seed: args.seed,
    };
    let (cloud, gt) = generate_roof(&spec).map_err(|e| Failure::Usage(e.to_string()))?;
    let name = args.name.clone().unwrap_or_else(|| archetype.name().to_string());
    write_pair(&args.output, &name, &cloud, &gt)
}

fn run_perturb(args: &PerturbArgs) -> Result<(), Failure> {
    let config = args.params.load()?;
    let spec = PerturbSpec {
        sparsity_fraction: args.sparsity.unwrap_or(config.perturb.sparsity_fraction),
        noise_sigma: args.noise.unwrap_or(config.perturb.noise_sigma),
        seed: args.seed.unwrap_or(config.perturb.seed),
    };
    let mut cloud = read_xyz(open(&args.input)?)?;
    let usage = |e: Error| Failure::Usage(e.to_string());
    if spec.sparsity_fraction != 0.0 {
        cloud = perturb_sparsity(&cloud, &spec).map_err(usage)?;
    }
    cloud = perturb_noise(&cloud, &spec).map_err(usage)?;
    let mut out = create(&args.output)?;
    write_xyz(&cloud, &mut out)?;
    out.flush()?;
    Ok(())
}

fn run_bench(args: &BenchArgs) -> Result<(), Failure> {
    let config = args.params.load()?;
    let threshold = positive_threshold(args.threshold.unwrap_or(config.threshold))?;
    if args.jobs == 0 {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    if !args.input.is_dir() {
        return Err(Failure::Usage(format!("{} is not a directory", args.input.display())));
    }
    let report = bench::run_bench(&args.input, &config.params, threshold, args.jobs)?;
    let mut out = output_writer(args.output.as_deref())?;
    report.write_json_lines(&mut out)?;
    out.flush()?;
    if report.has_failures() {
        Err(Failure::Items)
    } else {
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Score(a) => run_score(a),
        Command::Reconstruct(a) => run_reconstruct(a),
        Command::Eval(a) => run_eval(a),
        Command::Synth(a) => run_synth(a),
        Command::Perturb(a) => run_perturb(a),
        Command::Bench(a) => run_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Items) => ExitCode::from(1),
        Err(Failure::Run(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
