use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use plap_core::battery::{self, CriterionReport};
use plap_core::fit::VerdictOptions;
use plap_core::solver::parse_kv;
use plap_core::{
    compute_exponents, mass_balance_residual, run, verdict, Error, ExponentSet, ProblemParams, Regime, RunConfig,
    TimeSeries, Verdict,
};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_VERDICT: u8 = 4;

#[derive(Parser)]
#[command(name = "plap", about = "Regularized p-Laplacian evolution with gradient absorption")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the exponent set and regime of (p, q, N).
    Exponents {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
        #[arg(long = "N", default_value_t = 1)]
        n: u32,
    },
    /// Run one configuration, write its series and print a JSON report.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run every (p, q) cell of a sweep file in parallel.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
    },
    /// Fit a stored series against the laws predicted for its configuration.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        series: PathBuf,
    },
    /// Run the acceptance battery.
    Verify {
        /// Criterion name or number.
        #[arg(long)]
        only: Option<String>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Emit every proof-machinery check as JSON lines.
    BernsteinCheck,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::InvalidParams(_) | Error::Domain(_) => EXIT_CONFIG,
            _ => EXIT_NUMERICAL,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: format!("{}: {e}", path.display()),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io_failure(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_failure(path, e))
}

#[derive(Serialize)]
struct ExperimentReport {
    params: ProblemParams,
    exponents: ExponentSet,
    regime: Regime,
    verdicts: Vec<Verdict>,
    /// Why no verdicts were produced, when the series was too short to fit.
    verdict_note: Option<String>,
    series: PathBuf,
    mass_residual: f64,
    wall_seconds: f64,
}

impl ExperimentReport {
    fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }
}

fn verdicts_for(cfg: &RunConfig, series: &TimeSeries) -> Result<(Vec<Verdict>, Option<String>), Failure> {
    let opts = VerdictOptions::new(cfg.grid()?.h, cfg.absorption);
    match verdict(&cfg.params, series, &opts) {
        Ok(v) => Ok((v, None)),
        Err(e @ Error::SeriesTooShort(_)) => Ok((Vec::new(), Some(e.to_string()))),
        Err(e) => Err(e.into()),
    }
}

fn experiment(cfg: &RunConfig, series_path: &Path) -> Result<ExperimentReport, Failure> {
    let start = Instant::now();
    let (_, series) = run(cfg)?;
    write(series_path, &series.to_csv())?;
    let (verdicts, verdict_note) = verdicts_for(cfg, &series)?;
    Ok(ExperimentReport {
        params: cfg.params,
        exponents: cfg.params.exponents(),
        regime: cfg.params.regime(),
        verdicts,
        verdict_note,
        series: series_path.to_path_buf(),
        mass_residual: mass_balance_residual(&series),
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("reports serialize")
}

fn cmd_exponents(p: f64, q: f64, n: u32) -> Result<(), Failure> {
    let e = compute_exponents(p, q, n)?;
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.12}"));
    println!("p          {p}");
    println!("q          {q}");
    println!("N          {n}");
    println!("alpha_p    {:.12}", e.alpha_p);
    println!("beta_pq    {:.12}", e.beta_pq);
    println!("q_star     {:.12}", e.q_star);
    println!("xi         {:.12}", e.xi);
    println!("eta        {:.12}", e.eta);
    println!("A          {}", opt(e.a_support));
    println!("B          {}", opt(e.b_l1));
    println!("gamma_max  {:.12}", e.gamma_max);
    println!("regime     {}", e.regime.name());
    Ok(())
}

fn cmd_run(config: &Path, out: &Path) -> Result<(), Failure> {
    let cfg = RunConfig::from_kv_str(&read(config)?)?;
    let report = experiment(&cfg, &out.join("series.csv"))?;
    let line = json(&report);
    write(&out.join("report.json"), &format!("{line}\n"))?;
    println!("{line}");
    if report.passed() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_VERDICT,
            message: "one or more verdicts failed".into(),
        })
    }
}

/// A sweep file is a run configuration without `p` and `q`, plus
/// `cells = p:q, p:q, ...`.
struct SweepSpec {
    base: Vec<(String, String)>,
    cells: Vec<(f64, f64)>,
}

fn parse_sweep(text: &str) -> Result<SweepSpec, Failure> {
    let mut base = Vec::new();
    let mut cells = None;
    for (k, v) in parse_kv(text)? {
        match k.as_str() {
            "cells" => {
                if cells.is_some() {
                    return Err(Error::Config("duplicate key `cells`".into()).into());
                }
                cells = Some(v);
            }
            "p" | "q" => return Err(Error::Config(format!("`{k}` is set per cell in a sweep")).into()),
            _ => base.push((k, v)),
        }
    }
    let cells = cells.ok_or_else(|| Error::Config("missing required key `cells`".into()))?;
    let mut parsed = Vec::new();
    let mut seen = BTreeSet::new();
    for item in cells.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let bad = || Error::Config(format!("cell `{item}` is not of the form p:q"));
        let (p, q) = item.split_once(':').ok_or_else(bad)?;
        let p: f64 = p.trim().parse().map_err(|_| bad())?;
        let q: f64 = q.trim().parse().map_err(|_| bad())?;
        if !seen.insert((p.to_bits(), q.to_bits())) {
            return Err(Error::Config(format!("duplicate cell {p}:{q}")).into());
        }
        parsed.push((p, q));
    }
    if parsed.is_empty() {
        return Err(Error::Config("sweep has no cells".into()).into());
    }
    let spec = SweepSpec { base, cells: parsed };
    for &(p, q) in &spec.cells {
        spec.cell_config(p, q)?;
    }
    Ok(spec)
}

impl SweepSpec {
    fn cell_config(&self, p: f64, q: f64) -> Result<RunConfig, Error> {
        let mut text = format!("p = {p}\nq = {q}\n");
        for (k, v) in &self.base {
            let _ = writeln!(text, "{k} = {v}");
        }
        RunConfig::from_kv_str(&text)
    }
}

const SUMMARY_QUANTITIES: [&str; 4] = ["sup_excess", "grad_sup", "support_radius", "l1_excess"];

fn summary_row(p: f64, q: f64, regime: &str, outcome: &Result<ExperimentReport, Failure>) -> String {
    let mut row = format!("{p},{q},{regime}");
    match outcome {
        Ok(report) => {
            for name in SUMMARY_QUANTITIES {
                let cell = report
                    .verdicts
                    .iter()
                    .find(|v| v.quantity == name)
                    .filter(|v| v.fitted.is_finite())
                    .map_or_else(String::new, |v| format!("{:.6}", v.fitted));
                let _ = write!(row, ",{cell}");
            }
            let _ = write!(row, ",{},", report.passed() && report.verdict_note.is_none());
        }
        Err(f) => {
            row.push_str(",,,,,false,");
            row.push_str(&f.message.replace([',', '\n'], ";"));
        }
    }
    row
}

fn cmd_sweep(config: &Path, workers: usize, out: &Path) -> Result<(), Failure> {
    let spec = parse_sweep(&read(config)?)?;
    fs::create_dir_all(out).map_err(|e| io_failure(out, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Failure {
            code: EXIT_CONFIG,
            message: e.to_string(),
        })?;
    let mut results: Vec<(f64, f64, Result<ExperimentReport, Failure>)> = pool.install(|| {
        spec.cells
            .par_iter()
            .map(|&(p, q)| {
                let stem = format!("cell_p{p}_q{q}");
                let outcome = spec
                    .cell_config(p, q)
                    .map_err(Failure::from)
                    .and_then(|cfg| experiment(&cfg, &out.join(format!("{stem}.csv"))));
                (p, q, outcome)
            })
            .collect()
    });
    results.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let mut summary = String::from("p,q,regime,sup_excess,grad_sup,support_radius,l1_excess,pass,error\n");
    let mut all_pass = true;
    for (p, q, outcome) in &results {
        let stem = format!("cell_p{p}_q{q}");
        match outcome {
            Ok(report) => {
                write(&out.join(format!("{stem}.json")), &format!("{}\n", json(report)))?;
                all_pass &= report.passed();
            }
            Err(f) => {
                eprintln!("cell {p}:{q} failed: {}", f.message);
                all_pass = false;
            }
        }
        let regime = spec.cell_config(*p, *q).map_or("-", |c| c.params.regime().name());
        summary.push_str(&summary_row(*p, *q, regime, outcome));
        summary.push('\n');
    }
    write(&out.join("summary.csv"), &summary)?;
    print!("{summary}");
    if all_pass {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_VERDICT,
            message: "one or more cells failed".into(),
        })
    }
}

fn cmd_fit(config: &Path, series: &Path) -> Result<(), Failure> {
    let cfg = RunConfig::from_kv_str(&read(config)?)?;
    let ts = TimeSeries::from_csv(&read(series)?)?;
    let opts = VerdictOptions::new(cfg.grid()?.h, cfg.absorption);
    let verdicts = verdict(&cfg.params, &ts, &opts)?;
    for v in &verdicts {
        println!("{}", v.to_json_line());
    }
    if verdicts.iter().all(|v| v.pass) {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_VERDICT,
            message: "one or more verdicts failed".into(),
        })
    }
}

fn cmd_verify(only: Option<&str>, workers: usize) -> Result<(), Failure> {
    let ids = battery::select(only)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Failure {
            code: EXIT_CONFIG,
            message: e.to_string(),
        })?;
    let reports: Vec<CriterionReport> = pool.install(|| ids.par_iter().map(|&id| battery::evaluate(id)).collect());
    for r in &reports {
        println!("{}", r.summary_line());
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    println!("{} of {} criteria passed", reports.len() - failed, reports.len());
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_VERDICT,
            message: format!("{failed} criteria failed"),
        })
    }
}

fn cmd_bernstein_check() -> Result<(), Failure> {
    let checks = battery::proof_checks()?;
    let mut ok = true;
    for c in &checks {
        ok &= c.report.pass || !c.required;
        println!("{}", json(&c.report));
    }
    if ok {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_VERDICT,
            message: "a required proof check failed".into(),
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Exponents { p, q, n } => cmd_exponents(*p, *q, *n),
        Command::Run { config, out } => cmd_run(config, out),
        Command::Sweep { config, workers, out } => cmd_sweep(config, *workers, out),
        Command::Fit { config, series } => cmd_fit(config, series),
        Command::Verify { only, workers } => cmd_verify(only.as_deref(), *workers),
        Command::BernsteinCheck => cmd_bernstein_check(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
