use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use tng_core::bundled;
use tng_core::detection::{train_detector, DetectionController};
use tng_core::eval::{
    matrix_rows, run_dagger_study, run_degradation_study, run_lap_experiment, run_navigation,
    run_navigation_matrix, to_csv, DaggerConfig, DegradationConfig, LapConfig, LapSummary,
    MatrixSummary, NavigationConfig, Report, RunRow, SupervisorConfig,
};
use tng_core::imitation::{collect_demonstrations, train_regression, Dataset, HeadKind, Optimizer};
use tng_core::model::Model;
use tng_core::sim::{Environment, EnvironmentSpec, Observation};
use tng_core::tng::build::{enroll_edges, trajectory_training_set};
use tng_core::tng::{
    train_system, train_trajectory_classifier, Controller, ControllerKind, PipelineConfig,
    TngGraph, Vertex,
};

type T = f64;

#[derive(Parser)]
#[command(
    name = "tng",
    version,
    about = "Topological navigation graphs of learned controllers",
    arg_required_else_help = true
)]
struct Cli {
    /// Seed for every random stream of the invocation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory that receives output files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for independent runs; 0 uses every core.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create or check environment files.
    #[command(subcommand)]
    Env(EnvCommand),
    /// Record expert demonstrations.
    Collect(CollectArgs),
    /// Fit a controller or the trajectory classifier.
    #[command(subcommand)]
    Train(TrainCommand),
    /// Aggregate learner rollouts into a dataset and refit.
    Dagger(DaggerArgs),
    /// Build or describe a navigation graph.
    #[command(subcommand)]
    Graph(GraphCommand),
    /// One navigation episode between two trajectories.
    Navigate(NavigateArgs),
    /// Supervised experiments.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Print and merge report files.
    Report(ReportArgs),
}

#[derive(Subcommand)]
enum EnvCommand {
    /// Write a built-in layout.
    Gen {
        #[arg(long, default_value = "rings5")]
        layout: String,
        #[arg(long, default_value_t = 0.0)]
        noise: T,
    },
    /// Parse an environment and list its crossings.
    Validate { path: PathBuf },
}

#[derive(Args)]
struct CollectArgs {
    #[arg(long)]
    env: Option<PathBuf>,
    /// Trajectory id; every trajectory when omitted.
    #[arg(long)]
    trajectory: Option<u32>,
    #[arg(long)]
    laps: Option<usize>,
    /// Add shifted copies and junction entries to the laps.
    #[arg(long)]
    augment: bool,
}

#[derive(Subcommand)]
enum TrainCommand {
    Regression {
        #[command(flatten)]
        input: TrainInput,
        #[arg(long)]
        lambda: Option<T>,
        /// Fit by Adam instead of the closed form.
        #[arg(long)]
        gradient: bool,
        /// Hidden units of an MLP head; a linear head when omitted.
        #[arg(long)]
        mlp: Option<usize>,
    },
    Detector {
        #[command(flatten)]
        input: TrainInput,
    },
    /// One dataset per trajectory, in vertex order.
    Classifier {
        #[command(flatten)]
        input: TrainInput,
    },
}

#[derive(Args)]
struct TrainInput {
    #[arg(long)]
    env: Option<PathBuf>,
    #[arg(long = "data", num_args = 1..)]
    data: Vec<PathBuf>,
    /// Output file name inside the output directory.
    #[arg(long)]
    name: Option<String>,
}

#[derive(Args)]
struct DaggerArgs {
    #[arg(long)]
    env: Option<PathBuf>,
    #[arg(long)]
    trajectory: u32,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Subcommand)]
enum GraphCommand {
    /// Train every component, or assemble pre-trained models.
    Build {
        #[arg(long)]
        env: Option<PathBuf>,
        #[arg(long, value_enum)]
        controller: Option<Kind>,
        /// One controller model per trajectory, in environment order.
        #[arg(long = "model", num_args = 1..)]
        models: Vec<PathBuf>,
        #[arg(long)]
        classifier: Option<PathBuf>,
    },
    Inspect {
        path: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Regression,
    Detection,
}

#[derive(Args)]
struct NavigateArgs {
    #[arg(long)]
    env: Option<PathBuf>,
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Source trajectory id.
    #[arg(long)]
    from: u32,
    /// Destination trajectory id.
    #[arg(long)]
    to: u32,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Lap experiment for each model.
    Laps {
        #[arg(long)]
        env: Option<PathBuf>,
        #[arg(long = "model", num_args = 1..)]
        models: Vec<PathBuf>,
        #[arg(long, default_value_t = 0)]
        trajectory: u32,
        #[arg(long)]
        laps: Option<usize>,
    },
    /// Every ordered pair of trajectories.
    Matrix {
        #[arg(long)]
        env: Option<PathBuf>,
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Lap experiments under growing landmark displacement.
    Degradation {
        #[arg(long)]
        env: Option<PathBuf>,
        #[arg(long = "model", num_args = 1..)]
        models: Vec<PathBuf>,
        #[arg(long, default_value_t = 0)]
        trajectory: u32,
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        magnitudes: Vec<T>,
    },
}

#[derive(Args)]
struct ReportArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Paths {
    env: Option<PathBuf>,
    datasets: Vec<PathBuf>,
    models: Vec<PathBuf>,
    graph: Option<PathBuf>,
    reports: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    seed: Option<u64>,
    jobs: Option<usize>,
    paths: Paths,
    pipeline: PipelineConfig<T>,
    supervisor: Option<SupervisorConfig<T>>,
    laps: LapConfig<T>,
    navigation: NavigationConfig<T>,
    dagger: DaggerConfig<T>,
    degradation: DegradationConfig<T>,
}

struct Ctx {
    seed: u64,
    jobs: usize,
    out: PathBuf,
    cfg: RunConfig,
}

impl Ctx {
    fn new(cli: &Cli) -> Result<Self> {
        let mut cfg: RunConfig = match &cli.config {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(s) = cfg.supervisor {
            cfg.navigation.supervisor = s;
            cfg.dagger.supervisor = s;
            cfg.degradation.supervisor = s;
        }
        let out = cli
            .out
            .clone()
            .or_else(|| cfg.paths.reports.clone())
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(Self {
            seed: cli.seed.or(cfg.seed).unwrap_or(1),
            jobs: cli.jobs.or(cfg.jobs).unwrap_or(0),
            out,
            cfg,
        })
    }

    fn supervisor(&self) -> SupervisorConfig<T> {
        self.cfg.supervisor.unwrap_or_default()
    }

    fn env_path(&self, arg: &Option<PathBuf>) -> Result<PathBuf> {
        arg.clone()
            .or_else(|| self.cfg.paths.env.clone())
            .ok_or_else(|| anyhow!("no environment given (use --env or paths.env in the config)"))
    }

    fn env(&self, arg: &Option<PathBuf>) -> Result<Environment<T>> {
        let p = self.env_path(arg)?;
        Ok(Environment::load(&p)?)
    }

    fn graph(&self, arg: &Option<PathBuf>) -> Result<TngGraph<T>> {
        let p = arg
            .clone()
            .or_else(|| self.cfg.paths.graph.clone())
            .ok_or_else(|| anyhow!("no graph given (use --graph or paths.graph in the config)"))?;
        let text =
            fs::read_to_string(&p).with_context(|| format!("reading graph {}", p.display()))?;
        Ok(TngGraph::from_json(&text).with_context(|| format!("in {}", p.display()))?)
    }

    fn datasets(&self, arg: &[PathBuf]) -> Vec<PathBuf> {
        if arg.is_empty() {
            self.cfg.paths.datasets.clone()
        } else {
            arg.to_vec()
        }
    }

    fn models(&self, arg: &[PathBuf]) -> Vec<PathBuf> {
        if arg.is_empty() {
            self.cfg.paths.models.clone()
        } else {
            arg.to_vec()
        }
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))?;
        let p = self.out.join(name);
        fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))?;
        println!("wrote {}", p.display());
        Ok(p)
    }

    fn write_dataset(&self, name: &str, data: &Dataset<T>) -> Result<PathBuf> {
        fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))?;
        let p = self.out.join(name);
        let f = File::create(&p).with_context(|| format!("writing {}", p.display()))?;
        let mut w = BufWriter::new(f);
        data.write_jsonl(&mut w)
            .with_context(|| format!("writing {}", p.display()))?;
        w.flush()?;
        println!("wrote {} ({} samples)", p.display(), data.len());
        Ok(p)
    }
}

fn read_dataset(p: &Path) -> Result<Dataset<T>> {
    let f = File::open(p).with_context(|| format!("reading dataset {}", p.display()))?;
    Ok(Dataset::read_jsonl(BufReader::new(f)).with_context(|| format!("in {}", p.display()))?)
}

fn read_model(p: &Path) -> Result<Model<T>> {
    Ok(Model::load(p).with_context(|| format!("loading model {}", p.display()))?)
}

fn merged(paths: &[PathBuf]) -> Result<Dataset<T>> {
    if paths.is_empty() {
        bail!("no dataset given (use --data or paths.datasets in the config)");
    }
    let mut all = Dataset::new();
    for p in paths {
        all.extend(&read_dataset(p)?);
    }
    Ok(all)
}

fn check_hash(model: &Model<T>, env: &Environment<T>, path: &Path) -> Result<()> {
    if model.featurizer_hash() != env.featurizer.hash() {
        bail!(
            "{} was trained with featurizer {} but the environment uses {}",
            path.display(),
            model.featurizer_hash(),
            env.featurizer.hash()
        );
    }
    Ok(())
}

fn model_name(path: &Path, model: &Model<T>) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| model.kind().to_string())
}

fn controllers(
    ctx: &Ctx,
    env: &Environment<T>,
    paths: &[PathBuf],
) -> Result<Vec<(String, Controller<T>)>> {
    let paths = ctx.models(paths);
    if paths.is_empty() {
        bail!("no model given (use --model or paths.models in the config)");
    }
    paths
        .iter()
        .map(|p| {
            let m = read_model(p)?;
            check_hash(&m, env, p)?;
            let name = model_name(p, &m);
            let c = m
                .controller()
                .ok_or_else(|| anyhow!("{} is a classifier, not a controller", p.display()))?;
            Ok((name, c))
        })
        .collect()
}

fn env_cmd(ctx: &Ctx, cmd: &EnvCommand) -> Result<()> {
    match cmd {
        EnvCommand::Gen { layout, noise } => {
            let spec: EnvironmentSpec<T> =
                bundled::layout(layout, *noise, ctx.seed).ok_or_else(|| {
                    anyhow!(
                        "unknown layout {layout:?}; choose one of {}",
                        bundled::LAYOUTS.join(", ")
                    )
                })?;
            let env = Environment::build(&spec)?;
            ctx.write(&format!("{layout}.json"), &spec.to_json())?;
            println!(
                "trajectories: {}, intersections: {}, navigable: {}",
                env.trajectories.len(),
                env.intersections.len(),
                env.navigable
            );
        }
        EnvCommand::Validate { path } => {
            let env = Environment::<T>::load(path)?;
            println!("trajectories: {}", env.trajectories.len());
            for t in &env.trajectories {
                println!(
                    "  {} {:?} {} {} waypoints, {:.3} m",
                    t.id,
                    t.name,
                    if t.closed { "closed" } else { "open" },
                    t.waypoints.len(),
                    t.length()
                );
            }
            println!("landmarks: {}", env.landmarks.len());
            println!("intersections: {}", env.intersections.len());
            for x in &env.intersections {
                println!(
                    "  {} -> {} at ({:.3}, {:.3})",
                    x.from_trajectory, x.to_trajectory, x.point[0], x.point[1]
                );
            }
            println!("navigable: {}", env.navigable);
            println!("featurizer: {}", env.featurizer.hash());
        }
    }
    Ok(())
}

fn collect_cmd(ctx: &Ctx, a: &CollectArgs) -> Result<()> {
    let env = ctx.env(&a.env)?;
    let mut pcfg = ctx.cfg.pipeline.clone();
    if let Some(l) = a.laps {
        pcfg.laps = l;
    }
    let indices: Vec<usize> = match a.trajectory {
        Some(id) => vec![env
            .index_of(id)
            .ok_or_else(|| anyhow!("unknown trajectory {id}"))?],
        None => (0..env.trajectories.len()).collect(),
    };
    for k in indices {
        let id = env.trajectories[k].id;
        let data = if a.augment {
            trajectory_training_set(&env, k, &pcfg, ctx.seed)?.all
        } else {
            let c = collect_demonstrations(&env, id, pcfg.laps, pcfg.dt, &pcfg.expert, ctx.seed)?;
            if let Some(r) = c.aborted {
                bail!("expert failed on trajectory {id}: {r}");
            }
            c.dataset
        };
        ctx.write_dataset(&format!("data-{id}.jsonl"), &data)?;
    }
    Ok(())
}

fn train_cmd(ctx: &Ctx, cmd: &TrainCommand) -> Result<()> {
    let pcfg = &ctx.cfg.pipeline;
    let (model, input) = match cmd {
        TrainCommand::Regression {
            input,
            lambda,
            gradient,
            mlp,
        } => {
            let env = ctx.env(&input.env)?;
            let data = merged(&ctx.datasets(&input.data))?;
            let mut cfg = pcfg.regression;
            if let Some(l) = lambda {
                cfg.lambda = *l;
            }
            if let Some(h) = mlp {
                cfg.head = HeadKind::Mlp { hidden: *h };
            }
            if *gradient || mlp.is_some() {
                if let Optimizer::ClosedForm = cfg.optimizer {
                    cfg.optimizer = Optimizer::Gradient(Default::default());
                }
            } else {
                cfg.optimizer = Optimizer::ClosedForm;
            }
            if let Optimizer::Gradient(g) = &mut cfg.optimizer {
                g.seed = ctx.seed;
            }
            (
                Model::Regression(train_regression(&data, &env.featurizer.hash(), &cfg)?),
                input,
            )
        }
        TrainCommand::Detector { input } => {
            let env = ctx.env(&input.env)?;
            let data = merged(&ctx.datasets(&input.data))?;
            let (det, counts) = train_detector(&data, &env.featurizer.hash(), &pcfg.detector)?;
            println!(
                "labels: left {}, none {}, right {}",
                counts.left, counts.none, counts.right
            );
            let c = DetectionController::new(
                det,
                pcfg.pid,
                pcfg.expert.cruise_speed,
                pcfg.confidence_floor,
            )?;
            (Model::Detection(c), input)
        }
        TrainCommand::Classifier { input } => {
            let env = ctx.env(&input.env)?;
            let paths = ctx.datasets(&input.data);
            if paths.len() < 2 {
                bail!("the classifier needs one dataset per trajectory (at least two)");
            }
            let per_class = paths
                .iter()
                .map(|p| {
                    Ok(read_dataset(p)?
                        .samples()
                        .iter()
                        .map(|s| s.observation.clone())
                        .collect())
                })
                .collect::<Result<Vec<Vec<Observation<T>>>>>()?;
            let mut cfg = pcfg.classifier;
            cfg.optimizer.seed = ctx.seed;
            let c = train_trajectory_classifier(&per_class, &env.featurizer.hash(), &cfg)?;
            let acc: Vec<String> = c
                .train_accuracy
                .iter()
                .map(|a| format!("{:.3}", a))
                .collect();
            println!("training accuracy per class: {}", acc.join(" "));
            (Model::Classifier(c), input)
        }
    };
    let name = input
        .name
        .clone()
        .unwrap_or_else(|| format!("{}.json", model.kind()));
    ctx.write(&name, &model.to_json())?;
    Ok(())
}

fn dagger_cmd(ctx: &Ctx, a: &DaggerArgs) -> Result<()> {
    let env = ctx.env(&a.env)?;
    let mut cfg = ctx.cfg.dagger;
    if let Some(n) = a.iterations {
        cfg.iterations = n;
    }
    let base = match &a.data {
        Some(p) => read_dataset(p)?,
        None => match ctx.cfg.paths.datasets.first() {
            Some(p) => read_dataset(p)?,
            None => {
                let c = collect_demonstrations(
                    &env,
                    a.trajectory,
                    ctx.cfg.pipeline.laps,
                    cfg.dt,
                    &cfg.expert,
                    ctx.seed,
                )?;
                c.dataset
            }
        },
    };
    let study = run_dagger_study(&env, a.trajectory, &base, &cfg, ctx.seed)?;
    println!(
        "{:>9} {:>8} {:>6} {:>8}",
        "iteration", "samples", "ints", "PA"
    );
    for it in &study.iterations {
        println!(
            "{:>9} {:>8} {:>6} {:>8.2}",
            it.iteration, it.dataset_size, it.interventions, it.pa
        );
    }
    ctx.write_dataset("dagger-data.jsonl", &study.dataset)?;
    ctx.write(
        "dagger-model.json",
        &Model::Regression(study.controller.clone()).to_json(),
    )?;
    ctx.write(
        "dagger.json",
        &serde_json::to_string_pretty(&study.iterations)?,
    )?;
    Ok(())
}

fn graph_cmd(ctx: &Ctx, cmd: &GraphCommand) -> Result<()> {
    match cmd {
        GraphCommand::Build {
            env,
            controller,
            models,
            classifier,
        } => {
            let env = ctx.env(env)?;
            let mut pcfg = ctx.cfg.pipeline.clone();
            if let Some(k) = controller {
                pcfg.controller = match k {
                    Kind::Regression => ControllerKind::Regression,
                    Kind::Detection => ControllerKind::Detection,
                };
            }
            let graph = if models.is_empty() {
                if classifier.is_some() {
                    bail!("--classifier needs --model for every trajectory");
                }
                train_system(&env, &pcfg, ctx.seed)?.graph
            } else {
                if models.len() != env.trajectories.len() {
                    bail!(
                        "{} models given for {} trajectories",
                        models.len(),
                        env.trajectories.len()
                    );
                }
                let cpath = classifier
                    .as_ref()
                    .ok_or_else(|| anyhow!("--model needs --classifier"))?;
                let cm = read_model(cpath)?;
                check_hash(&cm, &env, cpath)?;
                let Model::Classifier(cls) = cm else {
                    bail!("{} is not a classifier", cpath.display());
                };
                let vertices = controllers(ctx, &env, models)?
                    .into_iter()
                    .zip(&env.trajectories)
                    .map(|((_, c), t)| Vertex {
                        trajectory: t.id,
                        controller: c,
                    })
                    .collect();
                TngGraph::build(vertices, cls, enroll_edges(&env, &pcfg, ctx.seed)?)?
            };
            ctx.write("graph.json", &graph.to_json())?;
            print_graph(&graph);
        }
        GraphCommand::Inspect { path } => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading graph {}", path.display()))?;
            let graph = TngGraph::<T>::from_json(&text)
                .with_context(|| format!("in {}", path.display()))?;
            print_graph(&graph);
        }
    }
    Ok(())
}

fn print_graph(g: &TngGraph<T>) {
    println!("vertices: {}", g.vertices.len());
    for (i, v) in g.vertices.iter().enumerate() {
        println!(
            "  {i}: trajectory {} ({})",
            v.trajectory,
            v.controller.kind()
        );
    }
    println!("edges: {}", g.edges.len());
    for e in &g.edges {
        println!(
            "  {} -> {} weight {:.4} exemplars {} threshold {:.4}",
            e.from(),
            e.to(),
            e.weight,
            e.classifier.matcher.exemplars.len(),
            e.classifier.matcher.threshold
        );
    }
    let r = g.reachability();
    println!("navigable: {}", r.navigable);
    if !r.unreachable_pairs.is_empty() {
        println!("unreachable pairs: {:?}", r.unreachable_pairs);
    }
}

fn index(env: &Environment<T>, id: u32) -> Result<usize> {
    env.index_of(id)
        .ok_or_else(|| anyhow!("unknown trajectory {id}"))
}

fn navigate_cmd(ctx: &Ctx, a: &NavigateArgs) -> Result<()> {
    let env = ctx.env(&a.env)?;
    let graph = ctx.graph(&a.graph)?;
    let mut ncfg = ctx.cfg.navigation;
    ncfg.record_ticks = true;
    let (i, j) = (index(&env, a.from)?, index(&env, a.to)?);
    let cell = run_navigation(
        &graph,
        &env,
        i,
        j,
        &ncfg,
        tng_core::eval::cell_seed(ctx.seed, i, j),
    )?;
    println!(
        "localized on vertex {}, goal on vertex {}",
        cell.localized, cell.identified_goal
    );
    match &cell.flag {
        Some(f) => println!("not run: {f}"),
        None => println!(
            "plan {:?}: {:?}, PA {:.2}, {:.2} m, {} switches, {} interventions, {:.1} s",
            cell.planned,
            cell.outcome,
            cell.pa.unwrap_or(0.0),
            cell.distance,
            cell.switches,
            cell.interventions,
            cell.total_time
        ),
    }
    if let Some(log) = &cell.log {
        ctx.write("episode.json", &log.to_json())?;
    }
    Ok(())
}

fn eval_cmd(ctx: &Ctx, cmd: &EvalCommand) -> Result<()> {
    let mut report = Report::<T>::new(ctx.seed);
    let rows: Vec<RunRow<T>> = match cmd {
        EvalCommand::Laps {
            env,
            models,
            trajectory,
            laps,
        } => {
            let env = ctx.env(env)?;
            let mut lcfg = ctx.cfg.laps;
            if let Some(l) = laps {
                lcfg.laps = *l;
            }
            let mut rows = Vec::new();
            for (name, mut c) in controllers(ctx, &env, models)? {
                let r = run_lap_experiment(
                    &mut c,
                    &env,
                    *trajectory,
                    &ctx.supervisor(),
                    &lcfg,
                    ctx.seed,
                )?;
                println!(
                    "{name}: {} of {} laps, PA {:.2}, {} interventions",
                    r.laps_completed,
                    r.laps_requested,
                    r.pa,
                    r.log.interventions.len()
                );
                report.laps.push(LapSummary {
                    controller: name.clone(),
                    trajectory: *trajectory,
                    laps_completed: r.laps_completed,
                    pa: r.pa,
                    interventions: r.log.interventions.len(),
                });
                rows.push(RunRow::from_lap(name, &r));
            }
            rows
        }
        EvalCommand::Matrix { env, graph } => {
            let env = ctx.env(env)?;
            let graph = ctx.graph(graph)?;
            let m = run_navigation_matrix(&graph, &env, &ctx.cfg.navigation, ctx.seed, ctx.jobs)?;
            report.matrix = Some(MatrixSummary::from(&m));
            matrix_rows(&m)
        }
        EvalCommand::Degradation {
            env,
            models,
            trajectory,
            magnitudes,
        } => {
            let env = ctx.env(env)?;
            let mut dcfg = ctx.cfg.degradation.clone();
            if !magnitudes.is_empty() {
                dcfg.magnitudes = magnitudes.clone();
            }
            let cs = controllers(ctx, &env, models)?;
            let d = run_degradation_study(&cs, &env, *trajectory, &dcfg, ctx.seed, ctx.jobs)?;
            let mut rows = Vec::new();
            for r in &d.rows {
                for (k, m) in d.magnitudes.iter().enumerate() {
                    rows.push(RunRow {
                        run: format!("{}@{m}", r.controller),
                        src: d.trajectory.to_string(),
                        dst: d.trajectory.to_string(),
                        pa: Some(r.pa[k]),
                        distance: 0.0,
                        interventions: r.interventions[k],
                        outcome: format!("laps:{}", r.laps_completed[k]),
                    });
                }
            }
            report.degradation = Some(d);
            rows
        }
    };
    let stem = match cmd {
        EvalCommand::Laps { .. } => "laps",
        EvalCommand::Matrix { .. } => "matrix",
        EvalCommand::Degradation { .. } => "degradation",
    };
    print!("{}", report.render());
    ctx.write(&format!("{stem}.csv"), &to_csv(&rows))?;
    ctx.write(&format!("{stem}-report.json"), &report.to_json())?;
    Ok(())
}

fn report_cmd(ctx: &Ctx, a: &ReportArgs) -> Result<()> {
    let mut all = Report::<T>::new(ctx.seed);
    for p in &a.inputs {
        let text =
            fs::read_to_string(p).with_context(|| format!("reading report {}", p.display()))?;
        let r = Report::from_json(&text).with_context(|| format!("in {}", p.display()))?;
        all.seed = r.seed;
        all.merge(r);
    }
    print!("{}", all.render());
    ctx.write("report.json", &all.to_json())?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx::new(&cli)?;
    match &cli.command {
        Command::Env(c) => env_cmd(&ctx, c),
        Command::Collect(a) => collect_cmd(&ctx, a),
        Command::Train(c) => train_cmd(&ctx, c),
        Command::Dagger(a) => dagger_cmd(&ctx, a),
        Command::Graph(c) => graph_cmd(&ctx, c),
        Command::Navigate(a) => navigate_cmd(&ctx, a),
        Command::Eval(c) => eval_cmd(&ctx, c),
        Command::Report(a) => report_cmd(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
