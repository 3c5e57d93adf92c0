use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gdalab::datasets::{read_path, write_path};
use gdalab::harness::{
    compare_paths, emit_bound_curves, run_sweep, trial_path, verify_inequalities, ExperimentConfig, PathKind,
};
use gdalab::theory::{gen_bound, optimal_t};
use gdalab::transport::{exact_wasserstein, path_shift_profile, sinkhorn_wasserstein, PointCloud, SinkhornConfig};
use gdalab::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "gdalab", version, about = "Gradual self-training experiments over shifting domains")]
struct Cli {
    /// TOML experiment config; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core). Output does not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build one trial's domain path and write it as a path file.
    Generate(GenerateArgs),
    /// Shift profile of a path file, or the distance between two of its domains.
    Distance(DistanceArgs),
    /// Sweep over T, n, seeds and path kinds.
    Run,
    /// Geodesic against detours of growing magnitude.
    ComparePaths,
    /// Linear and exponential bound curves over a T grid.
    Bounds(BoundsArgs),
    /// Optimal number of steps from explicit values or a path file.
    OptimalT(OptimalTArgs),
    /// Inequality batteries; exits with status 1 if any falls below its threshold.
    Verify,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Path kind (rotation, translation, geodesic, detour:<m>, csv); defaults to the first configured.
    #[arg(long)]
    kind: Option<PathKind>,
    /// Number of steps T; defaults to the first swept value.
    #[arg(long)]
    steps: Option<usize>,
    /// Samples per domain; defaults to the first swept value.
    #[arg(long)]
    n: Option<usize>,
    /// Sweep seed of the trial.
    #[arg(long, default_value_t = 0)]
    trial_seed: u64,
}

#[derive(Args, Debug)]
struct DistanceArgs {
    /// Path file written by `generate`.
    #[arg(long)]
    path: PathBuf,
    /// First domain index; with `--to`, reports one distance instead of the profile.
    #[arg(long, requires = "to")]
    from: Option<usize>,
    #[arg(long, requires = "from")]
    to: Option<usize>,
    /// Ground-cost exponent; defaults to `transport.p`.
    #[arg(long)]
    p: Option<f64>,
    /// Use the entropic approximation with this regularization (0 picks one automatically).
    #[arg(long)]
    sinkhorn: Option<f64>,
    /// Also write the coupling triples (i, j, mass) to this file.
    #[arg(long)]
    coupling: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    /// Print the itemized bound at this T instead of the curves.
    #[arg(long)]
    at: Option<f64>,
    /// Aligned text table instead of CSV (with `--at`).
    #[arg(long, requires = "at")]
    table: bool,
}

#[derive(Args, Debug)]
struct OptimalTArgs {
    /// Take delta_max, n and the source-target distance from this path file.
    #[arg(long, conflicts_with_all = ["delta_max", "n", "distance"])]
    path: Option<PathBuf>,
    #[arg(long)]
    delta_max: Option<f64>,
    #[arg(long)]
    n: Option<f64>,
    /// Source-target distance L.
    #[arg(long)]
    distance: Option<f64>,
    #[arg(long)]
    scale: Option<f64>,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(file) => {
            let text = fs::read_to_string(file).map_err(|source| Error::Io {
                path: file.clone(),
                source,
            })?;
            ExperimentConfig::from_toml(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(file) => fs::write(file, text).map_err(|source| Error::Io {
            path: file.to_path_buf(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| Error::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

fn distance(cfg: &ExperimentConfig, a: &DistanceArgs, out: Option<&Path>) -> Result<()> {
    let path = read_path(&a.path)?;
    let p = a.p.unwrap_or(cfg.transport.p);
    let (Some(i), Some(j)) = (a.from, a.to) else {
        let profile = path_shift_profile(&path, p, cfg.transport.joint, cfg.transport.label_weight)?;
        return emit(out, &profile.to_csv());
    };
    let last = path.steps();
    if i > last || j > last {
        return Err(Error::InvalidArgument(format!("domain index out of range 0..={last}")));
    }
    let cloud = |t: usize| {
        let d = path.domain(t);
        if cfg.transport.joint {
            PointCloud::from_joint(d, cfg.transport.label_weight)
        } else {
            PointCloud::from_features(d)
        }
    };
    let (x, y) = (cloud(i), cloud(j));
    let (value, coupling, method) = match a.sinkhorn {
        Some(reg) => {
            let sk = SinkhornConfig {
                reg: (reg > 0.0).then_some(reg),
                ..Default::default()
            };
            let r = sinkhorn_wasserstein(&x, &y, p, &sk)?;
            if !r.converged {
                eprintln!("warning: sinkhorn stopped after {} iterations (marginal error {:e})", r.iterations, r.marginal_error);
            }
            (r.distance, r.coupling, "sinkhorn")
        }
        None => {
            let (v, c) = exact_wasserstein(&x, &y, p)?;
            (v, c, "exact")
        }
    };
    if let Some(file) = &a.coupling {
        emit(Some(file), &coupling.to_csv())?;
    }
    emit(
        out,
        &format!("from,to,p,method,distance\n{i},{j},{},{method},{}\n", gdalab::numfmt::sig17(p), gdalab::numfmt::sig17(value)),
    )
}

fn bounds(cfg: &ExperimentConfig, a: &BoundsArgs, out: Option<&Path>) -> Result<()> {
    let b = &cfg.bounds;
    if let Some(t) = a.at {
        let t_star = optimal_t(b.delta_max.unwrap_or(b.delta_avg), b.n, b.source_target_distance, b.scale)?;
        let report = gen_bound(&b.constants, b.eps0, t, b.n, b.delta_avg)?.with_t_star(t_star);
        let text = if a.table { report.to_table() } else { report.to_csv()? };
        return emit(out, &text);
    }
    let curves = emit_bound_curves(b)?;
    match curves.crossover {
        Some(x) => eprintln!("crossover: exponential bound exceeds the linear bound for T > {x}"),
        None => eprintln!("crossover: none on the grid"),
    }
    eprintln!("T*: {} (nearest integer {})", curves.t_star.t_star, curves.t_star.t_star_int);
    emit(out, &curves.to_csv()?)
}

fn optimal(cfg: &ExperimentConfig, a: &OptimalTArgs, out: Option<&Path>) -> Result<()> {
    let b = &cfg.bounds;
    let scale = a.scale.unwrap_or(b.scale);
    let (delta_max, n, dist) = match &a.path {
        Some(file) => {
            let path = read_path(file)?;
            let (p, joint, lw) = (cfg.transport.p, cfg.transport.joint, cfg.transport.label_weight);
            let profile = path_shift_profile(&path, p, joint, lw)?;
            let cloud = |t: usize| {
                let d = path.domain(t);
                if joint {
                    PointCloud::from_joint(d, lw)
                } else {
                    PointCloud::from_features(d)
                }
            };
            let (l, _) = exact_wasserstein(&cloud(0), &cloud(path.steps()), p)?;
            (profile.max_delta(), path.n_per_domain() as f64, l)
        }
        None => (
            a.delta_max.unwrap_or(b.delta_max.unwrap_or(b.delta_avg)),
            a.n.unwrap_or(b.n),
            a.distance.unwrap_or(b.source_target_distance),
        ),
    };
    let r = optimal_t(delta_max, n, dist, scale)?;
    let s = gdalab::numfmt::sig17;
    emit(
        out,
        &format!(
            "delta_max,n,source_target_distance,scale,length_branch,stationary_branch,t_star,t_star_int\n{},{},{},{},{},{},{},{}\n",
            s(delta_max),
            s(n),
            s(dist),
            s(scale),
            s(r.length_branch),
            s(r.stationary_branch),
            s(r.t_star),
            r.t_star_int
        ),
    )
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let cfg = load_config(cli)?;
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Generate(a) => {
            let kind = a.kind.unwrap_or(cfg.path.kinds[0]);
            let steps = a.steps.unwrap_or(cfg.sweep.t_values[0]);
            let n = a.n.unwrap_or(cfg.sweep.n_values[0]);
            let path = trial_path(&cfg, kind, steps, n, a.trial_seed)?;
            let mut buf = Vec::new();
            write_path(&path, &mut buf).map_err(|source| Error::Io {
                path: "<buffer>".into(),
                source,
            })?;
            emit(out, &String::from_utf8(buf).expect("path files are utf-8"))?;
        }
        Command::Distance(a) => distance(&cfg, a, out)?,
        Command::Run => emit(out, &run_sweep(&cfg, cli.workers)?.to_csv()?)?,
        Command::ComparePaths => emit(out, &compare_paths(&cfg, cli.workers)?.to_csv()?)?,
        Command::Bounds(a) => bounds(&cfg, a, out)?,
        Command::OptimalT(a) => optimal(&cfg, a, out)?,
        Command::Verify => {
            let report = verify_inequalities(&cfg, cli.workers)?;
            emit(out, &report.to_csv()?)?;
            if !report.all_passed() {
                for b in report.batteries.iter().filter(|b| !b.ok()) {
                    eprintln!("battery {} below threshold: {}/{} passed", b.name, b.passed, b.trials);
                }
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
