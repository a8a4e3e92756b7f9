use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::DMatrix;

use delayrl::augment::build_for;
use delayrl::config::Config;
use delayrl::ddpg::{init_agent, save_agent, train_with, EpisodeLog, ReplayBuffer};
use delayrl::env::{make_env, CaseId, PlantKind};
use delayrl::eval::{compare_cases, evaluate, write_atomic, EvalOutputs, ReportRecord};
use delayrl::lti::PlantParams;
use delayrl::sim::run_open_loop;
use delayrl::{Error, Result};

#[derive(Parser)]
#[command(name = "delayrl", version, about = "Delay-aware altitude control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the augmented discrete model and write its matrices as CSV.
    Discretize {
        #[arg(long, default_value_t = PlantParams::nominal().t_p)]
        tp: f64,
        #[arg(long, default_value_t = PlantParams::nominal().t_q)]
        tq: f64,
        #[arg(long, default_value_t = PlantParams::nominal().k_z)]
        kz: f64,
        #[arg(long, default_value_t = 0.0)]
        tau_i: f64,
        #[arg(long, default_value_t = 0.0)]
        tau_o: f64,
        /// Sampling period (s).
        #[arg(long)]
        h: f64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Open-loop run of the base-step simulator.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// CSV of `value,duration` rows.
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a DDPG agent on one case.
    Train {
        #[arg(long)]
        case: CaseId,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        out_agent: PathBuf,
        /// Per-episode CSV log.
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Save the agent every this many episodes as well as at the end.
        #[arg(long)]
        checkpoint_every: Option<usize>,
    },
    /// Run one noiseless episode and write report, trajectory and plot.
    Evaluate {
        #[arg(long)]
        agent: PathBuf,
        #[arg(long)]
        case: CaseId,
        /// delayed, delay-free or training.
        #[arg(long)]
        plant: PlantKind,
        #[arg(long)]
        out_report: PathBuf,
        #[arg(long)]
        out_traj: PathBuf,
        /// SVG output.
        #[arg(long)]
        plot: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Tabulate metrics across reports.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        reports: Vec<PathBuf>,
        /// CSV output; the aligned text table goes to stdout.
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    let cfg = match path {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    Ok(cfg.with_env_overrides())
}

fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut s = String::new();
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:?}", m[(r, c)])).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

fn discretize(params: PlantParams, h: f64, out: &Path) -> Result<()> {
    let model = build_for(&params, h)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_atomic(&out.join("a_e.csv"), matrix_csv(&model.a_e).as_bytes())?;
    let b = DMatrix::from_column_slice(model.b_e.len(), 1, model.b_e.as_slice());
    write_atomic(&out.join("b_e.csv"), matrix_csv(&b).as_bytes())?;
    write_atomic(&out.join("c_e.csv"), matrix_csv(&model.c_e).as_bytes())?;
    let mut layout = String::from("block,kind,offset,width,lag\n");
    for (i, b) in model.layout.blocks.iter().enumerate() {
        let _ = writeln!(layout, "{i},{},{},{},{}", b.kind.label(), b.offset, b.width, b.lag);
    }
    write_atomic(&out.join("layout.csv"), layout.as_bytes())?;
    println!("{}", model.layout);
    println!("n = {}", model.dim());
    Ok(())
}

fn read_schedule(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::format(path, "schedule", format!("{other:?}")),
        })?;
    let mut out = Vec::new();
    for (k, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(path, format!("row {}", k + 1), e.to_string()))?;
        if rec.len() != 2 {
            return Err(Error::format(path, format!("row {}", k + 1), "expected `value,duration`"));
        }
        let parse = |i: usize| rec[i].parse::<f64>();
        match (parse(0), parse(1)) {
            (Ok(v), Ok(d)) => out.push((v, d)),
            // Tolerate a header line.
            _ if k == 0 && rec[0].eq_ignore_ascii_case("value") => {}
            _ => {
                return Err(Error::format(
                    path,
                    format!("row {}", k + 1),
                    format!("cannot parse `{},{}`", &rec[0], &rec[1]),
                ))
            }
        }
    }
    Ok(out)
}

fn simulate(config: Option<&Path>, schedule: &Path, out: &Path) -> Result<()> {
    let cfg = load_config(config)?.simulator()?;
    let schedule = read_schedule(schedule)?;
    let samples = run_open_loop(&cfg, &schedule)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["time", "z", "z_dot", "z_ddot", "u"]).expect("in-memory write");
    for s in &samples {
        let cells = [s.time, s.measured[0], s.measured[1], s.measured[2], s.applied].map(|v| format!("{v:?}"));
        w.write_record(&cells).expect("in-memory write");
    }
    write_atomic(out, &w.into_inner().expect("in-memory flush"))?;
    eprintln!("{} samples written to {}", samples.len(), out.display());
    Ok(())
}

struct TrainArgs<'a> {
    case: CaseId,
    seed: u64,
    episodes: Option<usize>,
    out_agent: &'a Path,
    log: &'a Path,
    config: Option<&'a Path>,
    checkpoint_every: Option<usize>,
}

fn train(args: TrainArgs) -> Result<()> {
    let cfg = load_config(args.config)?;
    let env_cfg = cfg
        .environment(args.case, PlantKind::Training)?
        .with_seed(args.seed);
    let mut hyper = cfg.hyper(env_cfg.params.u_max)?;
    if let Some(e) = args.episodes {
        hyper.episodes = e;
    }
    let episodes = hyper.episodes;
    let mut env = make_env(env_cfg)?;
    let mut agent = init_agent(env.obs_width(), env.u_max(), hyper, args.seed)?;
    let mut buffer = ReplayBuffer::new(agent.hyper.buffer_capacity);
    let mut log_text = format!("{}\n", EpisodeLog::CSV_HEADER);
    eprintln!(
        "training {} (seed {}) for {episodes} episodes of {} steps",
        args.case,
        args.seed,
        env.steps_per_episode()
    );
    let start = std::time::Instant::now();
    // Checkpoints need the agent, which train_with borrows mutably; run one
    // episode at a time instead.
    for episode in 0..episodes {
        let entry = train_with(&mut agent, &mut env, &mut buffer, 1, |_| {})?
            .pop()
            .map(|e| EpisodeLog {
                episode,
                wall_time: start.elapsed().as_secs_f64(),
                ..e
            })
            .expect("one episode");
        eprintln!(
            "episode {:>4}  return {:>12.2}  critic_loss {:>12.4}  actor_q {:>10.4}  {:.1}s",
            entry.episode, entry.episode_return, entry.critic_loss_mean, entry.actor_objective_mean, entry.wall_time
        );
        log_text.push_str(&entry.csv_row());
        log_text.push('\n');
        write_atomic(args.log, log_text.as_bytes())?;
        if args.checkpoint_every.is_some_and(|n| n > 0 && (episode + 1) % n == 0) {
            save_agent(&agent, args.out_agent)?;
        }
    }
    save_agent(&agent, args.out_agent)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Discretize {
            tp,
            tq,
            kz,
            tau_i,
            tau_o,
            h,
            out,
        } => {
            let params = PlantParams {
                t_p: tp,
                t_q: tq,
                k_z: kz,
                tau_i,
                tau_o,
                ..PlantParams::nominal()
            };
            discretize(params, h, &out)
        }
        Command::Simulate { config, schedule, out } => simulate(config.as_deref(), &schedule, &out),
        Command::Train {
            case,
            seed,
            episodes,
            out_agent,
            log,
            config,
            checkpoint_every,
        } => train(TrainArgs {
            case,
            seed,
            episodes,
            out_agent: &out_agent,
            log: &log,
            config: config.as_deref(),
            checkpoint_every,
        }),
        Command::Evaluate {
            agent,
            case,
            plant,
            out_report,
            out_traj,
            plot,
            seed,
            config,
        } => {
            let cfg = load_config(config.as_deref())?;
            let mut env_cfg = cfg.environment(case, plant)?;
            if let Some(s) = seed {
                env_cfg.seed = s;
            }
            let out = EvalOutputs {
                report: out_report,
                trajectory: out_traj,
                plot,
            };
            let report = evaluate(&agent, env_cfg, plant, &out)?;
            print!("{}", report.to_text());
            Ok(())
        }
        Command::Compare { reports, out } => {
            let records = reports
                .iter()
                .map(|p| ReportRecord::load(p))
                .collect::<Result<Vec<_>>>()?;
            let table = compare_cases(&records)?;
            write_atomic(&out, table.to_csv().as_bytes())?;
            print!("{}", table.render_text());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io { .. } => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
