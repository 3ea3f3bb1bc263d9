use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use slowecho::analysis::{fit_exponential, CMode, FitResult};
use slowecho::config::{parse_list, parse_pairs, ScenarioConfig};
use slowecho::scenarios::{self, Outcome};
use slowecho::{Error, Result};

#[derive(Parser)]
#[command(name = "slowecho", version, about = "Slow-light photon-echo Maxwell-Bloch simulator")]
struct Cli {
    /// Worker threads for sweeps and paired runs (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Format of tabular output and stdout summaries.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Probe positions in mm, e.g. `--probes 0,2.5,5`.
    #[arg(long, global = true, value_name = "z1,z2,...")]
    probes: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single, paired or control scenario.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a hole-depth sweep or an H-duration scan.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit A·exp[B(τ_g − C)] to (τ_g, intensity) points.
    Fit {
        /// CSV with `tau_g_us` and `echo_efficiency` columns, or two bare columns.
        #[arg(long)]
        points: PathBuf,
        /// `fixed:X` or `min-tau`.
        #[arg(long, default_value = "min-tau")]
        c_mode: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("--threads: {e}")))?;
    }
    match &cli.command {
        Command::Run { config, out } => scenario(cli, config, out, false),
        Command::Sweep { config, out } => scenario(cli, config, out, true),
        Command::Fit { points, c_mode } => fit(cli, points, c_mode),
    }
}

fn load(cli: &Cli, path: &Path, out: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut pairs = parse_pairs(&text)?;
    if let Some(p) = &cli.probes {
        parse_list(p)?;
        pairs.insert("output.probes_mm".into(), p.clone());
    }
    if let Some(f) = cli.format {
        let f = match f {
            Format::Csv => "csv",
            Format::Json => "json",
        };
        pairs.insert("output.format".into(), f.into());
    }
    pairs.insert("output.dir".into(), out.display().to_string());
    ScenarioConfig::from_pairs(&pairs)
}

fn scenario(cli: &Cli, path: &Path, out: &Path, sweep: bool) -> Result<()> {
    let cfg = load(cli, path, out)?;
    if sweep != cfg.scenario.is_sweep() {
        let want = if sweep { "fig3_sweep or fig4_scan" } else { "single_run, fig2_pair or backward_control" };
        return Err(Error::Config(format!(
            "scenario {} does not belong to this subcommand (expected {want})",
            cfg.scenario.name()
        )));
    }
    let outcome = scenarios::run(&cfg)?;
    let manifest = scenarios::write_artifacts(&cfg, &outcome, out)?;
    match cli.format {
        Some(Format::Json) => println!("{}", outcome.summary_json()?),
        _ => print_csv_summary(&outcome),
    }
    eprintln!(
        "wrote {} artifacts to {} (config {})",
        manifest.artifacts.len() + 1,
        out.display(),
        &manifest.config_hash_sha256[..12]
    );
    Ok(())
}

fn print_csv_summary(outcome: &Outcome) {
    let line = |r: &scenarios::RunReport| {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        println!(
            "{},{},{},{},{},{}",
            r.label,
            r.optical_depth,
            opt(r.tau_g_us),
            r.tau_g_predicted_us,
            r.echo_efficiency,
            r.echo_efficiency_sum
        );
    };
    let header = "label,optical_depth,tau_g_us,tau_g_predicted_us,echo_efficiency,echo_efficiency_sum";
    match outcome {
        Outcome::Single(r) => {
            println!("{header}");
            line(&r.report);
        }
        Outcome::Pair(p) => {
            println!("{header}");
            line(&p.report.no_burn);
            line(&p.report.with_burn);
        }
        Outcome::Control(c) => {
            println!("{header}");
            line(&c.report.forward);
            line(&c.report.backward);
            line(&c.report.no_burn);
        }
        Outcome::Sweep(s) => {
            let mut buf = Vec::new();
            let _ = s.result.write_csv(&mut buf);
            print!("{}", String::from_utf8_lossy(&buf));
        }
    }
}

/// Reads (τ_g, y) pairs; rows whose delay is not finite (undetected pulse) are skipped.
fn read_points(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')).peekable();
    let split = |l: &str| l.split(',').map(|c| c.trim().to_string()).collect::<Vec<_>>();
    let (mut ix, mut iy) = (0, 1);
    if let Some(first) = lines.peek() {
        let cols = split(first);
        if cols.iter().any(|c| c.parse::<f64>().is_err()) {
            let find = |name: &str| cols.iter().position(|c| c == name);
            ix = find("tau_g_us").unwrap_or(0);
            iy = find("echo_efficiency").or_else(|| find("intensity")).unwrap_or(1);
            lines.next();
        }
    }
    let mut out = Vec::new();
    for (n, l) in lines.enumerate() {
        let cols = split(l);
        let get = |i: usize| -> Result<f64> {
            cols.get(i)
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| Error::Config(format!("points row {}: bad column {i} in {l:?}", n + 1)))
        };
        let (x, y) = (get(ix)?, get(iy)?);
        if !x.is_finite() {
            eprintln!("skipping row {} with delay {x}", n + 1);
            continue;
        }
        out.push((x, y));
    }
    Ok(out)
}

fn fit(cli: &Cli, points: &Path, c_mode: &str) -> Result<()> {
    let mode: CMode = c_mode.parse()?;
    let pts = read_points(points)?;
    let FitResult { a, b, c, r_squared } = fit_exponential(&pts, mode)?;
    match cli.format {
        Some(Format::Csv) => println!("a,b,c,r_squared\n{a},{b},{c},{r_squared}"),
        _ => println!("{}", serde_json::to_string_pretty(&FitResult { a, b, c, r_squared })?),
    }
    Ok(())
}
