use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eqsim::bench::object::{self, BenchMode, ObjectBench, Payload, Setting, DEFAULT_LINK_RATE};
use eqsim::bench::plot::{line_chart, ChartSpec};
use eqsim::bench::rsp::{self, RspBench, RspTransport};
use eqsim::bench::scale::{self, ScaleBench};
use eqsim::bench::{codec_table, Table};
use eqsim::codec::{codec_benchmark, load_corpus, registry};
use eqsim::core::compound::{derive_channels, parse_config, print_config};
use eqsim::core::sim::{Mode, SceneKind, Variation};

#[derive(Parser)]
#[command(name = "eqsim", version, about = "Benchmarks and config tools for the parallel rendering core")]
struct Cli {
    /// Seed for every random input.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Format written to stdout.
    #[arg(long, global = true, value_enum, default_value_t = Out::Table)]
    out: Out,
    /// Also write the result as CSV to this file.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// Write an SVG line chart of the result.
    #[arg(long, global = true)]
    plot: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Out {
    Csv,
    Table,
}

#[derive(Subcommand)]
enum Command {
    /// Ratio and speed of every compression engine.
    CodecBench {
        /// Directory of files, or builtin:zero, builtin:random, builtin:sparse.
        #[arg(long, default_value = "builtin:sparse")]
        corpus: String,
        #[arg(long, default_value_t = 3)]
        runs: usize,
    },
    /// Reliable multicast throughput from one writer.
    RspBench(RspArgs),
    /// Object mapping and commit-sync times.
    ObjectBench(ObjectArgs),
    /// Decomposition scalability on simulated clusters.
    ScaleBench(ScaleArgs),
    /// Parse and validate a configuration and list its destination channels.
    ConfigCheck { file: PathBuf },
}

#[derive(Args)]
struct RspArgs {
    /// Group sizes, writer included.
    #[arg(long, value_delimiter = ',', default_value = "4")]
    members: Vec<usize>,
    #[arg(long, default_value_t = 16 << 20)]
    size: usize,
    #[arg(long, default_value_t = 0.0)]
    loss: f64,
    #[arg(long, value_enum, default_value_t = TransportArg::Sim)]
    transport: TransportArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum TransportArg {
    Sim,
    Udp,
}

#[derive(Args)]
struct ObjectArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Map)]
    mode: ModeArg,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    clients: Vec<usize>,
    /// ply, volume, random or file:PATH.
    #[arg(long, default_value = "volume")]
    payload: String,
    /// Settings to compare; all four when omitted.
    #[arg(long, value_delimiter = ',')]
    setting: Vec<String>,
    #[arg(long, default_value = "rle")]
    engine: String,
    /// Master link rate in bytes per second.
    #[arg(long, default_value_t = DEFAULT_LINK_RATE)]
    link_rate: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Map,
    Commit,
}

#[derive(Args)]
struct ScaleArgs {
    /// Decomposition modes; all when omitted.
    #[arg(long, value_delimiter = ',')]
    modes: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8")]
    nodes: Vec<usize>,
    /// none, per-node or per-frame.
    #[arg(long, value_delimiter = ',', default_value = "none")]
    heterogeneity: Vec<String>,
    /// Extra seeds besides --seed.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// alley, skewed, fill or random.
    #[arg(long, default_value = "skewed")]
    scene: String,
    #[arg(long, default_value_t = 8)]
    objects: usize,
    #[arg(long, default_value_t = 200)]
    frames: u64,
    /// WIDTHxHEIGHT.
    #[arg(long, default_value = "1280x720", value_parser = parse_size)]
    size: (u32, u32),
    #[arg(long, default_value = "64x64", value_parser = parse_size)]
    tile: (u32, u32),
}

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s.split_once('x').ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s}"))?;
    let w: u32 = w.parse().map_err(|e| format!("{e}"))?;
    let h: u32 = h.parse().map_err(|e| format!("{e}"))?;
    if w == 0 || h == 0 {
        return Err("size must be positive".into());
    }
    Ok((w, h))
}

fn lookup<T>(kind: &str, names: &[String], f: impl Fn(&str) -> Option<T>) -> Result<Vec<T>, String> {
    names.iter().map(|n| f(n).ok_or_else(|| format!("unknown {kind} '{n}'"))).collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("eqsim: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<(), String> {
    let (table, chart) = match &cli.command {
        Command::CodecBench { corpus, runs } => {
            let corpus = load_corpus(corpus, cli.seed).map_err(|e| format!("corpus: {e}"))?;
            let rows = codec_benchmark(&corpus, &registry(), *runs);
            for r in &rows {
                if let Some(f) = &r.failure {
                    eprintln!("eqsim: {} failed: {f}", r.info.id.name);
                }
            }
            (codec_table(&rows), ChartSpec { x: "engine", y: "ratio", series: vec![], title: "compression ratio".into() })
        }
        Command::RspBench(a) => {
            let transport = match a.transport {
                TransportArg::Sim => RspTransport::Sim,
                TransportArg::Udp => RspTransport::Udp,
            };
            let rows = a
                .members
                .iter()
                .map(|&members| {
                    rsp::run(&RspBench { members, bytes: a.size, loss: a.loss, seed: cli.seed, transport })
                        .map_err(|e| e.to_string())
                })
                .collect::<Result<Vec<_>, _>>()?;
            (rsp::table(&rows), ChartSpec { x: "members", y: "MBps", series: vec![], title: "multicast throughput".into() })
        }
        Command::ObjectBench(a) => {
            let payload = Payload::parse(&a.payload).ok_or_else(|| format!("unknown payload '{}'", a.payload))?;
            let settings = if a.setting.is_empty() { Setting::ALL.to_vec() } else { lookup("setting", &a.setting, Setting::from_name)? };
            let mode = match a.mode {
                ModeArg::Map => BenchMode::Map,
                ModeArg::Commit => BenchMode::Commit,
            };
            let data = object::build_payload(&payload, cli.seed).map_err(|e| format!("payload: {e}"))?;
            let mut rows = Vec::new();
            for &setting in &settings {
                for &clients in &a.clients {
                    let b = ObjectBench { mode, clients, setting, engine: a.engine.clone(), link_rate: a.link_rate, seed: cli.seed };
                    rows.push(object::run(&b, &data).map_err(|e| e.to_string())?);
                }
            }
            (object::table(&rows), ChartSpec { x: "clients", y: "seconds", series: vec!["setting"], title: "object distribution".into() })
        }
        Command::ScaleBench(a) => {
            let modes = if a.modes.is_empty() { Mode::ALL.to_vec() } else { lookup("mode", &a.modes, Mode::from_name)? };
            let mut seeds = vec![cli.seed];
            seeds.extend(a.seeds.iter().filter(|s| **s != cli.seed));
            let b = ScaleBench {
                modes,
                nodes: a.nodes.clone(),
                heterogeneity: lookup("heterogeneity", &a.heterogeneity, Variation::from_name)?,
                seeds,
                scene: SceneKind::from_name(&a.scene).ok_or_else(|| format!("unknown scene '{}'", a.scene))?,
                objects: a.objects,
                frames: a.frames,
                size: a.size,
                tile: a.tile,
            };
            let rows = scale::run(&b).map_err(|e| e.to_string())?;
            let series = vec!["mode", "heterogeneity", "seed"];
            (scale::table(&rows), ChartSpec { x: "nodes", y: "totalSeconds", series, title: "scalability".into() })
        }
        Command::ConfigCheck { file } => {
            let table = config_check(file, cli.out)?;
            (table, ChartSpec { x: "segment", y: "w", series: vec!["view"], title: "channels".into() })
        }
    };
    emit(cli, &table)?;
    if let Some(path) = &cli.plot {
        let svg = line_chart(&table, &chart)?;
        fs::write(path, svg).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(())
}

fn emit(cli: &Cli, table: &Table) -> Result<(), String> {
    let stdout = io::stdout().lock();
    match cli.out {
        Out::Csv => table.write_csv(stdout).map_err(|e| e.to_string())?,
        Out::Table => table.write_text(stdout).map_err(|e| e.to_string())?,
    }
    if let Some(path) = &cli.csv {
        let f = fs::File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
        table.write_csv(f).map_err(|e| e.to_string())?;
    }
    Ok(())
}

/// Prints the normalized config, then returns its destination channels.
fn config_check(file: &Path, out: Out) -> Result<Table, String> {
    let text = fs::read_to_string(file).map_err(|e| format!("{}: {e}", file.display()))?;
    let parsed = parse_config(&text).map_err(|e| format!("{}:{e}", file.display()))?;
    for w in &parsed.warnings {
        eprintln!("{}:{w}", file.display());
    }
    let cfg = parsed.config;
    for w in cfg.validate().map_err(|e| format!("{}: {e}", file.display()))? {
        eprintln!("{}: warning: {w}", file.display());
    }
    if out == Out::Table {
        let mut stdout = io::stdout().lock();
        let _ = write!(stdout, "{}", print_config(&cfg));
        let _ = writeln!(stdout);
    }
    let mut t = Table::new(&["canvas", "layout", "view", "segment", "channel", "name", "x", "y", "w", "h"]);
    for canvas in &cfg.canvases {
        let layouts: Vec<_> = match &canvas.layout {
            Some(name) => cfg.layout(name).into_iter().collect(),
            None => cfg.layouts.iter().collect(),
        };
        for layout in layouts {
            for ch in derive_channels(canvas, layout) {
                let vp = ch.viewport;
                t.push(vec![
                    canvas.name.clone(),
                    layout.name.clone(),
                    ch.view,
                    ch.segment.to_string(),
                    ch.channel,
                    ch.name,
                    format!("{:.4}", vp.x),
                    format!("{:.4}", vp.y),
                    format!("{:.4}", vp.w),
                    format!("{:.4}", vp.h),
                ]);
            }
        }
    }
    Ok(t)
}
