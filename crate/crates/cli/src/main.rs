use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context};
use bombieri_core::annex::regenerate_baseline;
use bombieri_core::experiment::{write_atomic, write_csv, write_json};
use bombieri_core::{
    frame_bounds, generate_array, geometry_report, interpolation_constant, run_annex_suite,
    run_sweep, AnnexGrid, Baseline, ExperimentConfig, Generator, Hole, InequalityId,
    MultiplicityArray, MultiplicityRule, PlanePoint,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

/// Sampling and interpolation arrays for Bombieri-normed polynomial spaces.
///
/// `BOMBIERI_THREADS` caps the number of worker threads.
#[derive(Parser)]
#[command(name = "bombieri", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a multiplicity array and write it as JSON.
    GenArray {
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Frame bounds A, B and the singular values of the analysis operator.
    FrameBounds(ArrayArgs),
    /// Interpolation constant M_X of the minimal-norm interpolant.
    InterpConstant(ArrayArgs),
    /// Overlap, separation and coverage of the dilated critical disks.
    Geometry {
        #[command(flatten)]
        input: ArrayArgs,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        c: f64,
        #[arg(long, default_value_t = 100_000)]
        mesh: usize,
    },
    /// One row of frame, interpolation and geometry data per degree.
    Sweep {
        /// JSON experiment config; other flags are ignored when given.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        gen: GenArgs,
        /// Comma-separated, strictly increasing degrees.
        #[arg(long, value_delimiter = ',', default_value = "64,128,256,512")]
        k: Vec<usize>,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        c: f64,
        #[arg(long, default_value_t = 20_000)]
        mesh: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Check the incomplete-beta estimates on a grid; exits 1 if any fails.
    VerifyAnnex {
        #[command(flatten)]
        grid: GridArgs,
        /// Explicit m values instead of the baseline range.
        #[arg(long, value_delimiter = ',')]
        m: Option<Vec<usize>>,
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Recompute the baseline table of floors and thresholds.
    BaselineRegen {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ArrayArgs {
    /// Array JSON file.
    #[arg(long)]
    array: PathBuf,
    /// Override the degree stored in the file.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value_t = GenKind::Fibonacci)]
    generator: GenKind,
    /// Array file for `--generator from-file`.
    #[arg(long = "from")]
    from: Option<PathBuf>,
    #[arg(long, default_value_t = 1.2)]
    density: f64,
    /// `uniform:M`, `random:M_MAX[:SEED]` or `sqrt-k`.
    #[arg(long, default_value = "uniform:1")]
    mult: MultArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Remove nodes in a chordal disk: `RE,IM,RADIUS`.
    #[arg(long, allow_hyphen_values = true)]
    hole: Option<HoleArg>,
    /// Thin the array until its disks dilated by this c are disjoint.
    #[arg(long, allow_hyphen_values = true)]
    separate: Option<f64>,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, value_delimiter = ',', default_value = "100,200,400,800")]
    k: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2")]
    a: Vec<f64>,
    /// Inequality ids; all by default.
    #[arg(long, value_delimiter = ',')]
    id: Option<Vec<String>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Fibonacci,
    Perturbed,
    Clustered,
    FromFile,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy)]
struct MultArg(MultiplicityRule);

impl FromStr for MultArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| t.parse::<u64>().map_err(|e| format!("{t:?}: {e}"));
        let rule = match parts.as_slice() {
            ["uniform", m] => MultiplicityRule::Uniform { m: num(m)? as usize },
            ["random", m] => MultiplicityRule::RandomBounded { m_max: num(m)? as usize, seed: 0 },
            ["random", m, seed] => MultiplicityRule::RandomBounded {
                m_max: num(m)? as usize,
                seed: num(seed)?,
            },
            ["sqrt-k"] => MultiplicityRule::SqrtK,
            _ => return Err(format!("unrecognized multiplicity rule {s:?}")),
        };
        Ok(Self(rule))
    }
}

#[derive(Clone, Copy)]
struct HoleArg(Hole);

impl FromStr for HoleArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let v: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
            .collect::<Result<_, _>>()?;
        let [re, im, radius] = v[..] else {
            return Err("expected RE,IM,RADIUS".into());
        };
        let center = PlanePoint::new(re, im).map_err(|e| e.to_string())?;
        Ok(Self(Hole { center, radius }))
    }
}

impl GenArgs {
    fn config(&self, k_list: Vec<usize>, c: f64, mesh_n: usize) -> anyhow::Result<ExperimentConfig> {
        let generator = match self.generator {
            GenKind::Fibonacci => Generator::Fibonacci,
            GenKind::Perturbed => Generator::Perturbed,
            GenKind::Clustered => Generator::Clustered,
            GenKind::FromFile => Generator::FromFile {
                path: self.from.clone().ok_or_else(|| anyhow!("--from is required"))?,
            },
        };
        let mut cfg = ExperimentConfig::new(generator, k_list, self.density, self.mult.0);
        cfg.c = c;
        cfg.mesh_n = mesh_n;
        cfg.seed = self.seed;
        cfg.hole = self.hole.map(|h| h.0);
        cfg.separate = self.separate;
        Ok(cfg)
    }
}

impl GridArgs {
    fn grid(&self, m_values: Option<Vec<usize>>) -> anyhow::Result<AnnexGrid> {
        let ids = match &self.id {
            None => InequalityId::ALL.to_vec(),
            Some(v) => v
                .iter()
                .map(|s| s.parse::<InequalityId>().map_err(|e| anyhow!("{e}")))
                .collect::<anyhow::Result<_>>()?,
        };
        Ok(AnnexGrid {
            k_values: self.k.clone(),
            a_values: self.a.clone(),
            ids,
            m_values,
        })
    }
}

fn emit(out: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> bombieri_core::Result<()>) -> anyhow::Result<()> {
    match out {
        Some(p) => write_atomic(p, f).with_context(|| format!("writing {}", p.display())),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
            lock.flush()?;
            Ok(())
        }
    }
}

fn csv_field(v: &Value) -> String {
    let s = match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Array(a) => a.iter().map(csv_field).collect::<Vec<_>>().join(";"),
        other => other.to_string(),
    };
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s
    }
}

/// Writes one record, as pretty JSON or as a header line plus a value line.
fn emit_record(value: Value, out: Option<&Path>, format: Format) -> anyhow::Result<()> {
    emit(out, |w| {
        match (format, &value) {
            (Format::Csv, Value::Object(map)) => {
                let keys: Vec<&str> = map.keys().map(String::as_str).collect();
                let vals: Vec<String> = map.values().map(csv_field).collect();
                writeln!(w, "{}\n{}", keys.join(","), vals.join(","))?;
            }
            _ => {
                serde_json::to_writer_pretty(&mut *w, &value)?;
                writeln!(w)?;
            }
        }
        Ok(())
    })
}

fn load_array(args: &ArrayArgs) -> anyhow::Result<MultiplicityArray> {
    let x = MultiplicityArray::load(&args.array)
        .with_context(|| format!("loading {}", args.array.display()))?;
    Ok(match args.k {
        Some(k) => MultiplicityArray::new(k, x.nodes().to_vec())?,
        None => x,
    })
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.cmd {
        Cmd::GenArray { gen, k, out } => {
            let cfg = gen.config(vec![k], 1.0, bombieri_core::experiment::MIN_MESH)?;
            let x = generate_array(&cfg, k)?;
            let json = x.to_json()?;
            emit(out.as_deref(), |w| Ok(writeln!(w, "{json}")?))?;
        }
        Cmd::FrameBounds(args) => {
            let x = load_array(&args)?;
            let report = frame_bounds(&x)?;
            emit_record(serde_json::to_value(&report)?, args.out.as_deref(), args.format)?;
        }
        Cmd::InterpConstant(args) => {
            let x = load_array(&args)?;
            let m_x = interpolation_constant(&x)?;
            let value = serde_json::json!({
                "k": x.k(),
                "total_multiplicity": x.total_multiplicity(),
                "interpolation_constant": m_x,
            });
            emit_record(value, args.out.as_deref(), args.format)?;
        }
        Cmd::Geometry { input, c, mesh } => {
            let x = load_array(&input)?;
            let report = geometry_report(&x, c, mesh);
            emit_record(serde_json::to_value(&report)?, input.out.as_deref(), input.format)?;
        }
        Cmd::Sweep { config, gen, k, c, mesh, out, format } => {
            let cfg = match &config {
                Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
                None => gen.config(k, c, mesh)?,
            };
            cfg.validate()?;
            let rows = run_sweep(&cfg)?;
            let out = out.or_else(|| cfg.output_path.clone());
            emit(out.as_deref(), |w| match format {
                Format::Csv => write_csv(&rows, w),
                Format::Json => write_json(&rows, w),
            })?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            if failed > 0 {
                eprintln!("{failed} of {} rows recorded errors", rows.len());
            }
        }
        Cmd::VerifyAnnex { grid, m, baseline, out, format } => {
            let baseline = match &baseline {
                Some(p) => Baseline::load(p).with_context(|| format!("loading {}", p.display()))?,
                None => Baseline::committed(),
            };
            let report = run_annex_suite(&grid.grid(m)?, &baseline);
            emit(out.as_deref(), |w| match format {
                Format::Csv => report.write_csv(w),
                Format::Json => {
                    serde_json::to_writer_pretty(&mut *w, &report)?;
                    Ok(writeln!(w)?)
                }
            })?;
            eprintln!(
                "{} cells: {} hold, {} fail, {} regime errors",
                report.rows.len(),
                report.evaluated() - report.failures(),
                report.failures(),
                report.errors()
            );
            if !report.all_hold() {
                return Ok(ExitCode::from(1));
            }
        }
        Cmd::BaselineRegen { grid, out } => {
            let baseline = regenerate_baseline(&grid.grid(None)?)?;
            match out {
                Some(p) => baseline.save(&p)?,
                None => {
                    serde_json::to_writer_pretty(std::io::stdout().lock(), &baseline)?;
                    println!();
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn init_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("BOMBIERI_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .with_context(|| format!("BOMBIERI_THREADS={v:?}"))?;
    if n == 0 {
        bail!("BOMBIERI_THREADS must be positive");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match init_threads().and_then(|()| run(cli)) {
        Ok(code) => code,
        // a closed downstream pipe is not an error worth reporting
        Err(e) if broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<std::io::Error>()
            .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
            || c.downcast_ref::<bombieri_core::Error>().is_some_and(|e| e.is_broken_pipe())
    })
}
