use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use peloton::args::{parse_mode, parse_step, Epsilons};
use peloton::io::{read_course_path, read_events, write_course, write_events, Ingested, InputFormat};
use peloton::{epsilon_sweep, run, write_report, write_sweep, write_timings, OutputFormat, ReportContext, ReportSelection, RunConfig};
use peloton_core::{
    generate, mass_start, AthleteId, BehaviorMix, Course, GeneratorConfig, GroundTruth, MassStartConfig, Mode, Mu, Params, Plan, ScriptStep,
};

#[derive(Parser, Debug)]
#[command(name = "peloton", version, about = "Groups, group evolution and long-term patterns in race timing data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Detect groups and patterns in a race file
    Analyze(AnalyzeArgs),
    /// Write a synthetic race and its ground truth
    Generate(GenerateArgs),
    /// Check a race file against a ground-truth file
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct ParamArgs {
    /// Maximum gap inside a group, in ms
    #[arg(long, default_value_t = 2000)]
    epsilon: u64,
    /// Minimum group size
    #[arg(long = "min-group", default_value_t = 7)]
    min_group: usize,
    /// Relation threshold, P/Q or decimal, in (1/2, 1]
    #[arg(long, default_value = "7/10")]
    mu: Mu,
}

impl ParamArgs {
    fn params(&self) -> anyhow::Result<Params> {
        Ok(Params::new(self.epsilon, self.min_group, self.mu)?)
    }
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Event file, or - for stdin
    #[arg(long)]
    input: PathBuf,
    /// Input layout; detected from the header when omitted
    #[arg(long)]
    format: Option<InputFormat>,
    /// Control point distances, one `index,meters` line each
    #[arg(long)]
    course: Option<PathBuf>,
    #[arg(long, value_parser = parse_mode, default_value = "finalized")]
    mode: Mode,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Comma-separated: summary, patterns, longterm, labels, status, anomalies
    #[arg(long, default_value = "summary,patterns,longterm")]
    report: ReportSelection,
    /// Run once per listed epsilon (ms) and print a comparison instead
    #[arg(long = "epsilon-sweep")]
    epsilon_sweep: Option<Epsilons>,
    #[arg(long, default_value = "text")]
    out: OutputFormat,
    /// Athletes for the status report; all when omitted
    #[arg(long = "athlete")]
    athletes: Vec<u64>,
    /// Pace-jump threshold as a factor of the running average pace
    #[arg(long = "pace-jump", default_value_t = peloton::DEFAULT_PACE_JUMP)]
    pace_jump: f64,
    /// Print stage timings to stderr
    #[arg(long)]
    timings: bool,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = 12_500)]
    athletes: u32,
    #[arg(long = "control-points", default_value_t = 100)]
    control_points: u32,
    #[arg(long = "course-m", default_value_t = 42_195)]
    course_m: u32,
    #[arg(long = "pace-bands", default_value_t = 10)]
    pace_bands: u32,
    #[arg(long = "pack-size", default_value_t = 25)]
    pack_size: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Behavior drawn per pack and control point, with --divide, --explode and --scatter
    #[arg(long)]
    random: bool,
    #[arg(long, default_value_t = 0.04)]
    divide: f64,
    #[arg(long, default_value_t = 0.02)]
    explode: f64,
    #[arg(long, default_value_t = 0.02)]
    scatter: f64,
    /// Scripted step PACK:CP:BEHAVIOR (constant, explode, divide/K, scatter/P/E)
    #[arg(long = "step", value_parser = parse_step)]
    steps: Vec<ScriptStep>,
    /// Unscripted mass-start crowd with 1 s timing resolution instead of packs
    #[arg(long = "mass-start")]
    mass_start: bool,
    /// Event output, long layout; stdout when omitted
    #[arg(long)]
    events: Option<PathBuf>,
    /// Ground-truth output (pack races only)
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Course output, `index,meters`
    #[arg(long = "course-out")]
    course_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Ground truth written by `generate`
    #[arg(long)]
    truth: PathBuf,
}

fn open_input(path: &Path) -> anyhow::Result<Box<dyn Read>> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(io::stdin().lock()));
    }
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(Box::new(io::BufReader::new(f)))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

struct Loaded {
    ingested: Ingested,
    course: Option<Course>,
    config: RunConfig,
    ingest_time: std::time::Duration,
}

fn load(input: &InputArgs, params: Params) -> anyhow::Result<Loaded> {
    let clock = Instant::now();
    let ingested = read_events(open_input(&input.input)?, input.format).with_context(|| format!("reading {}", input.input.display()))?;
    let ingest_time = clock.elapsed();
    let course = input.course.as_deref().map(read_course_path).transpose()?;
    let declared = course.as_ref().map(|c| c.len() as u32).unwrap_or(ingested.control_points);
    if declared < ingested.control_points {
        bail!("events reach control point {} but the course has {declared}", ingested.control_points - 1);
    }
    let config = RunConfig { params, mode: input.mode, control_points: Some(declared) };
    Ok(Loaded { ingested, course, config, ingest_time })
}

fn analyze(a: AnalyzeArgs) -> anyhow::Result<()> {
    let loaded = load(&a.input, a.params.params()?)?;
    for r in &loaded.ingested.rejected {
        eprintln!("warning: {}: {r}", a.input.input.display());
    }
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    if let Some(Epsilons(epsilons)) = &a.epsilon_sweep {
        let rows = epsilon_sweep(&loaded.config, &loaded.ingested.events, epsilons)?;
        write_sweep(&mut out, &rows, a.out)?;
        out.flush()?;
        return Ok(());
    }
    let mut result = run(&loaded.config, &loaded.ingested.events)?;
    result.timings.ingest = loaded.ingest_time;
    let athletes: Vec<AthleteId> = a.athletes.iter().copied().map(AthleteId).collect();
    let ctx = ReportContext {
        course: loaded.course.as_ref(),
        rejected_rows: &loaded.ingested.rejected,
        athletes: &athletes,
        pace_jump: a.pace_jump,
    };
    write_report(&mut out, &result, &ctx, a.report, a.out)?;
    out.flush()?;
    if a.timings {
        write_timings(&mut io::stderr(), &result.timings, result.events)?;
    }
    Ok(())
}

fn generate_cmd(g: GenerateArgs) -> anyhow::Result<()> {
    let params = g.params.params()?;
    let write_out = |events: &[peloton_core::Event]| -> anyhow::Result<()> {
        match &g.events {
            Some(p) => write_events(create(p)?, events)?,
            None => write_events(io::stdout().lock(), events)?,
        }
        Ok(())
    };
    if g.mass_start {
        let cfg = MassStartConfig { athletes: g.athletes, seed: g.seed, ..Default::default() };
        write_out(&mass_start(&cfg))?;
        if let Some(p) = &g.course_out {
            let d: Vec<u64> = cfg.distances_m.iter().map(|&d| u64::from(d)).collect();
            write_course(create(p)?, &d)?;
        }
        if g.truth.is_some() {
            bail!("mass-start races have no ground truth");
        }
        return Ok(());
    }
    let plan = if !g.steps.is_empty() {
        Plan::Scripted(g.steps.clone())
    } else if g.random {
        Plan::Random(BehaviorMix { divide: g.divide, explode: g.explode, scatter: g.scatter })
    } else {
        Plan::Constant
    };
    let cfg = GeneratorConfig {
        athletes: g.athletes,
        control_points: g.control_points,
        course_m: g.course_m,
        pace_bands: g.pace_bands,
        pack_size: g.pack_size,
        params,
        seed: g.seed,
        plan,
    };
    let (events, truth) = generate(&cfg)?;
    write_out(&events)?;
    if let Some(p) = &g.truth {
        let mut w = create(p)?;
        w.write_all(truth.to_text().as_bytes())?;
        w.flush()?;
    }
    if let Some(p) = &g.course_out {
        let d: Vec<u64> = (0..cfg.control_points).map(|cp| cfg.distance(cp)).collect();
        let mut w = create(p)?;
        write_course(&mut w, &d)?;
        w.flush()?;
    }
    Ok(())
}

fn verify(v: VerifyArgs) -> anyhow::Result<bool> {
    let text = std::fs::read_to_string(&v.truth).with_context(|| format!("cannot read {}", v.truth.display()))?;
    let truth = GroundTruth::from_text(&text).with_context(|| format!("parsing {}", v.truth.display()))?;
    let loaded = load(&v.input, v.params.params()?)?;
    let result = run(&loaded.config, &loaded.ingested.events)?;
    let observed = result.observed();
    let mut ok = true;
    if observed.groups_per_cp != truth.groups_per_cp {
        ok = false;
        println!("groups per control point differ: expected {:?}, found {:?}", truth.groups_per_cp, observed.groups_per_cp);
    }
    if observed.pair_counts.len() != truth.pair_counts.len() {
        ok = false;
        println!("expected {} control point pairs, found {}", truth.pair_counts.len(), observed.pair_counts.len());
    }
    for (c, (want, got)) in truth.pair_counts.iter().zip(&observed.pair_counts).enumerate() {
        if want != got {
            ok = false;
            println!("pair {}->{}: expected {want:?}, found {got:?}", c, c + 1);
        }
    }
    if observed.longest_edges != truth.longest_edges {
        ok = false;
        println!("longest lengths differ: expected {:?}, found {:?}", truth.longest_edges, observed.longest_edges);
    }
    let totals = observed.totals();
    println!(
        "{}: {} events, {} pairs, {} pattern records",
        if ok { "match" } else { "mismatch" },
        result.events,
        observed.pair_counts.len(),
        totals.iter().sum::<u64>()
    );
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Analyze(a) => analyze(a).map(|_| true),
        Command::Generate(g) => generate_cmd(g).map(|_| true),
        Command::Verify(v) => verify(v),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        // a closed pipe (`| head`) is not a failure
        Err(e) if e.downcast_ref::<io::Error>().is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
