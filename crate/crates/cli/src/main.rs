use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sstqp::bench::{self, BenchConfig, Cell};
use sstqp::conic::SolverSettings;
use sstqp::formulations::{Family, Model};
use sstqp::instances::{generate, verify_instance, GeneratorConfig, VerifyOptions};
use sstqp::io::{read_instance, write_instance};
use sstqp::oracle::{self, DEFAULT_BUDGET};
use sstqp::{report, Error};

const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_VERIFY: u8 = 4;

#[derive(Parser)]
#[command(name = "sstqp", version, about = "DNN bounds, instance generation and exact oracles for sparse StQPs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate instances with a known unique StQP minimizer.
    Gen {
        #[arg(long)]
        family: Family,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        rho0: usize,
        /// Defaults to ⌊rho0/2⌉ clipped to [1, rho0 − 1].
        #[arg(long)]
        rho: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Solve one relaxation of an instance file.
    Solve {
        #[arg(long, default_value = "d2b")]
        model: Model,
        /// Primal/dual feasibility tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        path: PathBuf,
    },
    /// Exact sparse optimum by enumeration.
    Oracle {
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: f64,
        path: PathBuf,
    },
    /// Verify the certified properties of a generated instance.
    Check {
        #[arg(long)]
        no_oracle: bool,
        #[arg(long, default_value_t = 16)]
        oracle_cap: usize,
        path: PathBuf,
    },
    /// Run relaxations and the oracle over an instance grid and write a CSV.
    Bench {
        /// `default`, or a file with one `family n rho0 rho` cell per line.
        #[arg(long, default_value = "default")]
        grid: String,
        #[arg(long, value_delimiter = ',', default_value = "d1b,d2b")]
        models: Vec<Model>,
        #[arg(long, default_value_t = 15)]
        oracle_cap: usize,
        #[arg(long, default_value_t = 5)]
        per_cell: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a bench CSV as an SVG gap chart.
    Report {
        #[arg(long)]
        svg: PathBuf,
        csv: PathBuf,
    },
}

/// Usage-level failures (bad flags, unreadable or malformed input) exit 2;
/// numerical and budget failures exit 3.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Dimension(_) | Error::Parameter(_) | Error::Parse { .. } | Error::Io(_) => EXIT_USAGE,
        Error::Numerical { .. } | Error::Budget { .. } | Error::Status(_) | Error::Unsupported(_) => {
            EXIT_NUMERICAL
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Gen {
            family,
            n,
            rho0,
            rho,
            seed,
            count,
            out_dir,
        } => cmd_gen(family, n, rho0, rho, seed, count, &out_dir),
        Cmd::Solve {
            model,
            tol,
            max_iter,
            path,
        } => cmd_solve(model, tol, max_iter, &path),
        Cmd::Oracle { budget, path } => cmd_oracle(budget, &path),
        Cmd::Check {
            no_oracle,
            oracle_cap,
            path,
        } => cmd_check(!no_oracle, oracle_cap, &path),
        Cmd::Bench {
            grid,
            models,
            oracle_cap,
            per_cell,
            seed,
            out,
        } => cmd_bench(&grid, models, oracle_cap, per_cell, seed, &out),
        Cmd::Report { svg, csv } => cmd_report(&svg, &csv),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

type CmdResult = Result<u8, Error>;

fn cmd_gen(
    family: Family,
    n: usize,
    rho0: usize,
    rho: Option<usize>,
    seed: u64,
    count: usize,
    out_dir: &Path,
) -> CmdResult {
    let rho = rho.unwrap_or_else(|| ((rho0 as f64 / 2.0 + 0.5).floor() as usize).clamp(1, rho0.saturating_sub(1).max(1)));
    GeneratorConfig::new(family, n, rho0, rho, seed).validate()?;
    fs::create_dir_all(out_dir)?;
    for k in 0..count as u64 {
        let cfg = GeneratorConfig::new(family, n, rho0, rho, seed + k);
        let inst = generate(&cfg)?;
        let path = out_dir.join(format!("{family}-n{n}-r0{rho0}-r{rho}-s{}.txt", seed + k));
        write_instance(&path, &inst)?;
        println!("{}", path.display());
    }
    Ok(0)
}

fn settings(tol: Option<f64>, max_iter: Option<usize>) -> SolverSettings {
    let mut s = SolverSettings::default();
    if let Some(t) = tol {
        s.tol_feas = t;
        s.accept_tol_feas = s.accept_tol_feas.max(100.0 * t);
    }
    if let Some(m) = max_iter {
        s.max_iter = m;
    }
    s
}

fn cmd_solve(model: Model, tol: Option<f64>, max_iter: Option<usize>, path: &Path) -> CmdResult {
    let inst = read_instance(path)?;
    let s = settings(tol, max_iter);
    let run = bench::run_model(model, &inst, &s, 10.0)?;
    let r = run.residuals;
    let secs = run.wall_time.as_secs_f64();
    println!("model {model}");
    println!("bound {:.10}", run.bound);
    println!("status {}", run.status);
    println!("iterations {}", run.iterations);
    println!("residuals primal {:.3e} dual {:.3e} gap {:.3e}", r.primal, r.dual, r.gap);
    println!("time_s {secs:.4}");
    let mut ok = true;
    for (name, rep) in [("feasibility", &run.feasibility), ("lemma", &run.lemma)] {
        if let Some(rep) = rep {
            println!(
                "check {name} {} (max {:.3e}, tol {:.1e})",
                if rep.pass { "pass" } else { "fail" },
                rep.max,
                rep.tol
            );
            ok &= rep.pass;
        }
    }
    println!(
        "record model={model},bound={:.17e},status={},iterations={},primal={:.3e},dual={:.3e},gap={:.3e},time_s={secs:.4}",
        run.bound, run.status, run.iterations, r.primal, r.dual, r.gap
    );
    Ok(if ok { 0 } else { EXIT_VERIFY })
}

fn cmd_oracle(budget: f64, path: &Path) -> CmdResult {
    let inst = read_instance(path)?;
    let r = oracle::sparse_stqp_exact(&inst.q, inst.rho, budget)?;
    println!("value {:.17e}", r.value);
    println!("support {:?}", r.support);
    let x: Vec<String> = r.minimizer.iter().map(|v| format!("{v:.17e}")).collect();
    println!("minimizer {}", x.join(" "));
    println!("candidates {}", r.candidates_evaluated);
    println!("solves {}", r.budget_used);
    Ok(0)
}

fn cmd_check(use_oracle: bool, oracle_cap: usize, path: &Path) -> CmdResult {
    let inst = read_instance(path)?;
    let opts = VerifyOptions {
        use_oracle,
        oracle_cap,
        ..VerifyOptions::default()
    };
    let rep = verify_instance(&inst, &opts)?;
    for c in &rep.checks {
        println!("{} {} {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
    }
    if let Some(mu) = rep.mu {
        println!("mu {mu:.10e}");
    }
    if let Some(ind) = rep.indefinite {
        println!("indefinite {ind}");
    }
    Ok(if rep.passed() { 0 } else { EXIT_VERIFY })
}

fn read_grid(grid: &str) -> Result<Vec<Cell>, Error> {
    if grid == "default" {
        return Ok(BenchConfig::default().cells);
    }
    let text = fs::read_to_string(grid).map_err(|e| Error::Io(format!("{grid}: {e}")))?;
    let mut cells = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::Parse {
            line: i + 1,
            message: format!("expected 'family n rho0 rho', got '{line}'"),
        };
        if f.len() != 4 {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad());
        let cell = Cell {
            family: f[0].parse()?,
            n: num(f[1])?,
            rho0: num(f[2])?,
            rho: num(f[3])?,
        };
        GeneratorConfig::new(cell.family, cell.n, cell.rho0, cell.rho, 0).validate()?;
        cells.push(cell);
    }
    if cells.is_empty() {
        return Err(Error::Parameter(format!("grid file {grid} has no cells")));
    }
    Ok(cells)
}

fn cmd_bench(
    grid: &str,
    models: Vec<Model>,
    oracle_cap: usize,
    per_cell: usize,
    seed: u64,
    out: &Path,
) -> CmdResult {
    if models.contains(&Model::Mu) {
        return Err(Error::Parameter("bench runs lifted models only".into()));
    }
    let cfg = BenchConfig {
        cells: read_grid(grid)?,
        per_cell,
        base_seed: seed,
        models,
        oracle_cap,
        ..BenchConfig::default()
    };
    let rows = bench::run_bench(&cfg);
    let file = fs::File::create(out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
    bench::write_csv(&rows, file)?;
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    println!("rows {} failed {failed} -> {}", rows.len(), out.display());
    for fam in [Family::Psd, Family::Spn, Family::Cop] {
        let (small, total) = bench::gap_fraction(&rows, fam, |g| g <= 5e-3);
        let (large, _) = bench::gap_fraction(&rows, fam, |g| g > 1e-3);
        if total > 0 {
            println!("{fam}: dnn_gap <= 5e-3 on {small}/{total}, > 1e-3 on {large}/{total}");
        }
    }
    Ok(0)
}

fn cmd_report(svg: &Path, csv: &Path) -> CmdResult {
    let file = fs::File::open(csv).map_err(|e| Error::Io(format!("{}: {e}", csv.display())))?;
    let rows = bench::read_csv(file)?;
    let text = report::render_svg(&rows)?;
    fs::write(svg, text).map_err(|e| Error::Io(format!("{}: {e}", svg.display())))?;
    println!("{}", svg.display());
    Ok(0)
}
