use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gfdm_core::assembly::{assemble_pressure, assemble_temperature};
use gfdm_core::cloud::{self, NodeKind, PointCloud};
use gfdm_core::config::{self, CaseConfig, Overrides};
use gfdm_core::march::Simulator;
use gfdm_core::{output, verify, Error};

/// Environment variable holding the worker thread count.
const THREADS_ENV: &str = "GFDM_THREADS";

#[derive(Parser)]
#[command(name = "gfdm", version, about = "Upwind GFDM simulator for coupled heat and mass transfer in 2D porous media")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Point cloud generation and inspection.
    #[command(subcommand)]
    Cloud(CloudCommand),
    /// Run a case and write snapshots, summary and manifest.
    Run(CaseArgs),
    /// Oracle comparisons and invariant checks; non-zero exit on failure.
    Verify(CaseArgs),
    /// Convergence tables (rectangle cases) or self-convergence (others).
    Study {
        #[command(flatten)]
        case: CaseArgs,
        /// Spacings, coarse to fine.
        #[arg(long, value_delimiter = ',')]
        spacings: Option<Vec<f64>>,
        /// Influence radius multipliers for rectangle studies.
        #[arg(long, value_delimiter = ',', default_value = "1.6,2.6,3.6,4.6")]
        rm_list: Vec<f64>,
    },
    /// Write the pressure and temperature systems of one time step.
    DumpMatrix {
        #[command(flatten)]
        case: CaseArgs,
        /// Time step to dump (1-based).
        #[arg(long, default_value_t = 1)]
        step: usize,
    },
}

#[derive(Subcommand)]
enum CloudCommand {
    /// Generate the cloud of a case (with virtual nodes) and save it.
    Gen(CaseArgs),
    /// Describe a cloud file or the cloud of a case.
    Info {
        /// Cloud file, case config, or bundled case name.
        input: String,
        /// Also build index sets at this multiple of the spacing.
        #[arg(long)]
        rm_mult: Option<f64>,
    },
}

#[derive(Args, Clone)]
struct CaseArgs {
    /// Case config file or bundled case name (case_3_1, case_3_2).
    config: String,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    rm_mult: Option<f64>,
    /// Node spacing.
    #[arg(long)]
    dx: Option<f64>,
    #[arg(long, short)]
    quiet: bool,
}

/// Failure with its exit status: 2 for bad input, 1 for everything else.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(e: impl std::fmt::Display) -> Self {
        Self {
            code: 2,
            message: e.to_string(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: 1,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn load_config(spec: &str) -> gfdm_core::Result<CaseConfig> {
    let path = Path::new(spec);
    if !path.exists() && config::BUNDLED.contains(&spec.trim_end_matches(".json")) {
        return config::bundled(spec);
    }
    config::parse_config(path)
}

fn load_case(args: &CaseArgs) -> CliResult<CaseConfig> {
    let mut cfg = load_config(&args.config).map_err(Failure::input)?;
    cfg.apply_overrides(&Overrides {
        dt: args.dt,
        t_end: args.t_end,
        rm_mult: args.rm_mult,
        dx: args.dx,
        out: args.out.clone(),
    })
    .map_err(Failure::input)?;
    Ok(cfg)
}

fn say(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        println!("{}", msg.as_ref());
    }
}

fn describe(c: &PointCloud) -> String {
    let mut s = format!(
        "nodes {} (interior {}, dirichlet {}, derivative {}, virtual {}), spacing {}, h_avg {:.6}",
        c.len(),
        c.count(NodeKind::Interior),
        c.count(NodeKind::DirichletBoundary),
        c.count(NodeKind::DerivativeBoundary),
        c.count(NodeKind::Virtual),
        c.spacing(),
        c.h_avg()
    );
    if let (Some(r), Some((lo, hi))) = (c.radius(), c.index_set_size_range()) {
        s.push_str(&format!(", r_m {r}, index set sizes {lo}..={hi}"));
    }
    s
}

fn cloud_gen(args: &CaseArgs) -> CliResult {
    let cfg = load_case(args)?;
    let c = cfg.point_cloud()?;
    fs::create_dir_all(&cfg.output.directory)?;
    let path = cfg.output.directory.join("cloud.txt");
    cloud::io::save_cloud(&c, &path)?;
    say(args.quiet, describe(&c));
    say(args.quiet, format!("wrote {}", path.display()));
    Ok(())
}

fn cloud_info(input: &str, rm_mult: Option<f64>) -> CliResult {
    let c = if input.ends_with(".json") || config::BUNDLED.contains(&input) {
        load_config(input).map_err(Failure::input)?.point_cloud()?
    } else {
        cloud::io::load_cloud(Path::new(input)).map_err(Failure::input)?
    };
    let c = match rm_mult {
        Some(m) => {
            let r = m * c.spacing();
            c.build_index_sets(r)?
        }
        None => c,
    };
    println!("{}", describe(&c));
    Ok(())
}

fn run(args: &CaseArgs) -> CliResult {
    let cfg = load_case(args)?;
    let r = output::run_case(&cfg)?;
    if !args.quiet {
        print!("{}", output::summary_text(&cfg, &r.output.summary));
        println!("outputs in {}", r.directory.display());
    }
    Ok(())
}

fn verify_cmd(args: &CaseArgs) -> CliResult {
    let cfg = load_case(args)?;
    let rep = verify::verify_case(&cfg)?;
    fs::create_dir_all(&cfg.output.directory)?;
    let f = File::create(cfg.output.directory.join("verify.json"))?;
    serde_json::to_writer_pretty(BufWriter::new(f), &rep).map_err(std::io::Error::from)?;
    if !args.quiet {
        print!("{rep}");
    }
    if rep.all_passed() {
        Ok(())
    } else {
        Err(Failure {
            code: 1,
            message: "verification failed".into(),
        })
    }
}

fn study(args: &CaseArgs, spacings: Option<Vec<f64>>, rm_list: &[f64]) -> CliResult {
    let cfg = load_case(args)?;
    let dir = cfg.output.directory.clone();
    fs::create_dir_all(&dir)?;
    if verify::RectangleOracle::from_case(&cfg).is_ok() {
        let dx_list = spacings.unwrap_or_else(|| vec![5.0, 2.0]);
        let table = verify::convergence_study(&cfg, &dx_list, rm_list).map_err(Failure::input)?;
        table.write_csv(BufWriter::new(File::create(dir.join("study.csv"))?))?;
        fs::write(dir.join("study.txt"), table.summary())?;
        for &dx in &dx_list {
            for &rm in rm_list {
                let mut c = cfg.clone();
                c.apply_overrides(&Overrides {
                    dx: Some(dx),
                    rm_mult: Some(rm),
                    ..Default::default()
                })
                .map_err(Failure::input)?;
                let name = format!("section_dx{dx}_rm{rm}.csv");
                verify::write_section_profile(&c, BufWriter::new(File::create(dir.join(name))?))?;
            }
        }
        say(args.quiet, table.summary());
        if !table.failures.is_empty() {
            return Err(Failure {
                code: 1,
                message: format!("{} study cells failed", table.failures.len()),
            });
        }
    } else {
        let spacings = spacings.unwrap_or_else(|| vec![12.0, 6.0, 3.0]);
        let rows = verify::self_convergence(&cfg, &spacings).map_err(Failure::input)?;
        let table = verify::StudyTable {
            rows,
            failures: Vec::new(),
        };
        table.write_csv(BufWriter::new(File::create(dir.join("self_convergence.csv"))?))?;
        fs::write(dir.join("self_convergence.txt"), table.summary())?;
        say(args.quiet, table.summary());
    }
    say(args.quiet, format!("outputs in {}", dir.display()));
    Ok(())
}

fn dump_matrix(args: &CaseArgs, step: usize) -> CliResult {
    let cfg = load_case(args)?;
    if step == 0 || step > cfg.schedule.steps() {
        return Err(Failure::input(format!(
            "--step must lie in 1..={}, got {step}",
            cfg.schedule.steps()
        )));
    }
    let disc = cfg.discretization()?;
    let mut sim = Simulator::new(&disc, cfg.schedule.clone())?;
    let mut state = sim.initial_state();
    for _ in 1..step {
        state = sim.step(&state)?;
    }
    let dt = cfg.schedule.dt;
    let psys = assemble_pressure(&disc, &state.p, &state.t, dt)?;
    let p_next = gfdm_core::sparse::solve_linear(&psys.matrix, &psys.rhs)?;
    let tsys = assemble_temperature(&disc, &state.p, &state.t, &p_next, dt, cfg.schedule.convection_time)?;
    let dir = &cfg.output.directory;
    fs::create_dir_all(dir)?;
    for (name, sys) in [("pressure", &psys), ("temperature", &tsys)] {
        sys.matrix
            .write_coo(BufWriter::new(File::create(dir.join(format!("{name}_step{step}.mtx")))?))?;
        let rhs: String = sys.rhs.iter().map(|v| format!("{v:e}\n")).collect();
        fs::write(dir.join(format!("{name}_step{step}_rhs.txt")), rhs)?;
    }
    disc.stencils.dump(BufWriter::new(File::create(dir.join("stencils.txt"))?))?;
    say(
        args.quiet,
        format!(
            "step {step}: {} unknowns, pressure nnz {}, temperature nnz {}; written to {}",
            psys.size(),
            psys.matrix.nnz(),
            tsys.matrix.nnz(),
            dir.display()
        ),
    );
    Ok(())
}

fn configure_threads() -> CliResult {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Failure::input(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::input(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| match &cli.command {
        Command::Cloud(CloudCommand::Gen(a)) => cloud_gen(a),
        Command::Cloud(CloudCommand::Info { input, rm_mult }) => cloud_info(input, *rm_mult),
        Command::Run(a) => run(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Study { case, spacings, rm_list } => study(case, spacings.clone(), rm_list),
        Command::DumpMatrix { case, step } => dump_matrix(case, *step),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
