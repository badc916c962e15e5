//! Experiment grid and per-instance bound reports.
//!
//! Each instance is solved with the selected relaxations; the upper bound `U`
//! is the better of the oracle value (when affordable) and the support
//! heuristic seeded by the D1B solution. `dnn_gap = U − max(ν(D1B), ν(D2B))`
//! and `oracle_gap = U − ℓ_ρ`.

use std::io::{Read, Write};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::conic::{self, Residuals, SolveStatus, SolverSettings};
use crate::error::{Error, Result};
use crate::formulations::{
    build, check_feasibility, check_lemma_d1a, check_lemma_d1b, check_lemma_d2a, extract_bound,
    extract_mu, Family, LiftedSolution, Model, ResidualReport, SparseStqpInstance,
};
use crate::instances::{generate, GeneratorConfig};
use crate::oracle;

/// Nearest integer, halves rounded up.
fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub family: Family,
    pub n: usize,
    pub rho0: usize,
    pub rho: usize,
}

/// `ρ₀ ∈ {⌊n/4⌉, ⌊n/2⌉, ⌊3n/4⌉}`, `ρ ∈ {⌊ρ₀/4⌉, ⌊ρ₀/2⌉, ⌊3ρ₀/4⌉}` with
/// `1 ≤ ρ < ρ₀`, duplicates dropped. COP cells need `ρ₀ ≤ n − 5` and are
/// skipped otherwise.
pub fn grid_cells(families: &[Family], ns: &[usize]) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &family in families {
        for &n in ns {
            let mut rho0s: Vec<usize> = [0.25, 0.5, 0.75]
                .iter()
                .map(|f| round_half_up(f * n as f64))
                .collect();
            rho0s.dedup();
            for rho0 in rho0s {
                let mut rhos: Vec<usize> = [0.25, 0.5, 0.75]
                    .iter()
                    .map(|f| round_half_up(f * rho0 as f64).max(1))
                    .filter(|&r| r < rho0)
                    .collect();
                rhos.dedup();
                for rho in rhos {
                    let cfg = GeneratorConfig::new(family, n, rho0, rho, 0);
                    if cfg.validate().is_ok() {
                        cells.push(Cell { family, n, rho0, rho });
                    }
                }
            }
        }
    }
    cells
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub cells: Vec<Cell>,
    pub per_cell: usize,
    pub base_seed: u64,
    pub models: Vec<Model>,
    /// The oracle runs when `n` is at most this and the budget allows it.
    pub oracle_cap: usize,
    pub oracle_budget: f64,
    pub solver: SolverSettings,
    /// Solves slower than this are flagged in the report; nothing is interrupted.
    pub soft_cap: Duration,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            cells: grid_cells(&[Family::Psd, Family::Spn, Family::Cop], &[10, 12, 15]),
            per_cell: 5,
            base_seed: 1,
            models: vec![Model::D1B, Model::D2B],
            oracle_cap: 15,
            oracle_budget: oracle::DEFAULT_BUDGET,
            solver: SolverSettings::default(),
            soft_cap: Duration::from_secs(120),
        }
    }
}

impl BenchConfig {
    /// Seeds are `base_seed + 1000·cell_index + k` so cells never share a stream.
    pub fn instance_configs(&self) -> Vec<GeneratorConfig> {
        let mut out = Vec::new();
        for (c, cell) in self.cells.iter().enumerate() {
            for k in 0..self.per_cell {
                let seed = self.base_seed + 1000 * c as u64 + k as u64;
                out.push(GeneratorConfig::new(cell.family, cell.n, cell.rho0, cell.rho, seed));
            }
        }
        out
    }
}

/// One solved relaxation.
#[derive(Clone, Debug)]
pub struct ModelRun {
    pub model: Model,
    pub bound: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub wall_time: Duration,
    pub residuals: Residuals,
    /// `None` for the plain relaxation.
    pub lifted: Option<LiftedSolution>,
    pub feasibility: Option<ResidualReport>,
    pub lemma: Option<ResidualReport>,
    /// Absolute tolerance the reports were evaluated at.
    pub check_tol: f64,
}

impl ModelRun {
    pub fn max_residual(&self) -> f64 {
        let r = self.residuals;
        r.primal.max(r.dual).max(r.gap)
    }
}

/// Absolute tolerance matching the solver's primal test: it accepts
/// `‖Az − b‖∞ ≤ tol_feas·(1 + ‖b‖∞)`, so relation checks run at
/// `factor·tol_feas·(1 + ‖b‖∞)`.
pub fn check_tolerance(b: &[f64], settings: &SolverSettings, factor: f64) -> f64 {
    let bmax = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    factor * settings.tol_feas * (1.0 + bmax)
}

/// Builds, solves and reads off one relaxation; lifted models also get their
/// feasibility and relation reports at `check_factor` times the solver's
/// feasibility tolerance (see [`check_tolerance`]).
pub fn run_model(
    model: Model,
    inst: &SparseStqpInstance,
    settings: &SolverSettings,
    check_factor: f64,
) -> Result<ModelRun> {
    let built = build(model, inst)?;
    let sol = conic::solve(&built.problem, settings)?;
    let check_tol = check_tolerance(&built.problem.b, settings, check_factor);
    let mut run = ModelRun {
        model,
        bound: f64::NAN,
        status: sol.status,
        iterations: sol.iterations,
        wall_time: sol.wall_time,
        residuals: sol.residuals,
        lifted: None,
        feasibility: None,
        lemma: None,
        check_tol,
    };
    if model == Model::Mu {
        run.bound = extract_mu(&sol, &built.map, settings)?.0;
        return Ok(run);
    }
    let (bound, lifted) = extract_bound(&sol, &built.map, settings)?;
    run.bound = bound;
    run.feasibility = Some(check_feasibility(model, inst, &lifted, check_tol)?);
    run.lemma = match model {
        Model::D1A => Some(check_lemma_d1a(&lifted, check_tol)?),
        Model::D1B => Some(check_lemma_d1b(&lifted, check_tol)?),
        Model::D2A => Some(check_lemma_d2a(&lifted, check_tol)?),
        _ => None,
    };
    run.lifted = Some(lifted);
    Ok(run)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelRecord {
    pub bound: Option<f64>,
    pub iterations: Option<usize>,
    pub seconds: Option<f64>,
    pub residual: Option<f64>,
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub id: String,
    pub family: Family,
    pub n: usize,
    pub rho0: usize,
    pub rho: usize,
    pub seed: u64,
    /// `ok`, or `;`-separated failure notes.
    pub status: String,
    pub d1b: ModelRecord,
    pub d2b: ModelRecord,
    pub d1a: ModelRecord,
    pub d2a: ModelRecord,
    pub oracle: Option<f64>,
    pub oracle_seconds: Option<f64>,
    pub upper: Option<f64>,
    pub dnn_gap: Option<f64>,
    pub oracle_gap: Option<f64>,
    pub soft_cap_hit: bool,
}

pub const CSV_COLUMNS: [&str; 30] = [
    "id",
    "family",
    "n",
    "rho0",
    "rho",
    "seed",
    "status",
    "nu_d1b",
    "nu_d2b",
    "nu_d1a",
    "nu_d2a",
    "oracle",
    "upper",
    "dnn_gap",
    "oracle_gap",
    "iters_d1b",
    "time_d1b",
    "res_d1b",
    "iters_d2b",
    "time_d2b",
    "res_d2b",
    "iters_d1a",
    "time_d1a",
    "res_d1a",
    "iters_d2a",
    "time_d2a",
    "res_d2a",
    "oracle_time",
    "soft_cap_hit",
    "version",
];

const CSV_VERSION: &str = "1";

impl BoundReport {
    pub fn record(&self, model: Model) -> &ModelRecord {
        match model {
            Model::D1A => &self.d1a,
            Model::D1B => &self.d1b,
            Model::D2A => &self.d2a,
            _ => &self.d2b,
        }
    }

    fn record_mut(&mut self, model: Model) -> &mut ModelRecord {
        match model {
            Model::D1A => &mut self.d1a,
            Model::D1B => &mut self.d1b,
            Model::D2A => &mut self.d2a,
            _ => &mut self.d2b,
        }
    }

    /// Best lower bound among the reduced models.
    pub fn best_reduced(&self) -> Option<f64> {
        match (self.d1b.bound, self.d2b.bound) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        }
    }
}

/// Solves every selected model on one instance and assembles its row.
/// Failures are recorded in `status`; the row is always produced.
pub fn run_instance(inst: &SparseStqpInstance, cfg: &BenchConfig) -> BoundReport {
    let m = &inst.meta;
    let mut rep = BoundReport {
        id: format!("{}-n{}-r0{}-r{}-s{}", m.family, inst.n, m.rho0.unwrap_or(0), inst.rho, m.seed),
        family: m.family,
        n: inst.n,
        rho0: m.rho0.unwrap_or(0),
        rho: inst.rho,
        seed: m.seed,
        status: String::new(),
        d1b: ModelRecord::default(),
        d2b: ModelRecord::default(),
        d1a: ModelRecord::default(),
        d2a: ModelRecord::default(),
        oracle: None,
        oracle_seconds: None,
        upper: None,
        dnn_gap: None,
        oracle_gap: None,
        soft_cap_hit: false,
    };
    let mut notes = Vec::new();
    let mut hint = None;
    for &model in &cfg.models {
        if model == Model::Mu {
            continue;
        }
        match run_model(model, inst, &cfg.solver, 10.0) {
            Ok(run) => {
                rep.soft_cap_hit |= run.wall_time > cfg.soft_cap;
                let r = rep.record_mut(model);
                r.bound = Some(run.bound);
                r.iterations = Some(run.iterations);
                r.seconds = Some(run.wall_time.as_secs_f64());
                r.residual = Some(run.max_residual());
                if model == Model::D1B || hint.is_none() {
                    hint = run.lifted;
                }
            }
            Err(e) => notes.push(format!("{model}: {e}")),
        }
    }
    if inst.n <= cfg.oracle_cap {
        let t = Instant::now();
        match oracle::sparse_stqp_exact(&inst.q, inst.rho, cfg.oracle_budget) {
            Ok(r) => {
                rep.oracle = Some(r.value);
                rep.oracle_seconds = Some(t.elapsed().as_secs_f64());
            }
            Err(e) => notes.push(format!("oracle: {e}")),
        }
    }
    match oracle::upper_bound_heuristic(&inst.q, inst.rho, hint.as_ref()) {
        Ok((v, _)) => rep.upper = Some(rep.oracle.map_or(v, |o| o.min(v))),
        Err(e) => notes.push(format!("heuristic: {e}")),
    }
    if let (Some(u), Some(l)) = (rep.upper, rep.best_reduced()) {
        rep.dnn_gap = Some(u - l);
    }
    if let (Some(u), Some(o)) = (rep.upper, rep.oracle) {
        rep.oracle_gap = Some(u - o);
    }
    rep.status = if notes.is_empty() { "ok".into() } else { notes.join("; ") };
    rep
}

/// Generates and runs every instance of the grid. Instances run in parallel;
/// rows come back sorted by `(family, n, ρ₀, ρ, seed)`.
pub fn run_bench(cfg: &BenchConfig) -> Vec<BoundReport> {
    let mut rows: Vec<BoundReport> = cfg
        .instance_configs()
        .par_iter()
        .map(|g| match generate(g) {
            Ok(inst) => run_instance(&inst, cfg),
            Err(e) => BoundReport {
                id: format!("{}-n{}-r0{}-r{}-s{}", g.family, g.n, g.rho0, g.rho, g.seed),
                family: g.family,
                n: g.n,
                rho0: g.rho0,
                rho: g.rho,
                seed: g.seed,
                status: format!("generation: {e}"),
                d1b: ModelRecord::default(),
                d2b: ModelRecord::default(),
                d1a: ModelRecord::default(),
                d2a: ModelRecord::default(),
                oracle: None,
                oracle_seconds: None,
                upper: None,
                dnn_gap: None,
                oracle_gap: None,
                soft_cap_hit: false,
            },
        })
        .collect();
    rows.sort_by(|a, b| {
        (a.family, a.n, a.rho0, a.rho, a.seed).cmp(&(b.family, b.n, b.rho0, b.rho, b.seed))
    });
    rows
}

fn opt_real(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.10e}"))
}

fn opt_int(v: Option<usize>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn opt_secs(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.4}"))
}

pub fn write_csv<W: Write>(rows: &[BoundReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(CSV_COLUMNS).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![
            r.id.clone(),
            r.family.to_string(),
            r.n.to_string(),
            r.rho0.to_string(),
            r.rho.to_string(),
            r.seed.to_string(),
            r.status.clone(),
        ];
        rec.extend([r.d1b.bound, r.d2b.bound, r.d1a.bound, r.d2a.bound].map(opt_real));
        rec.extend([r.oracle, r.upper, r.dnn_gap, r.oracle_gap].map(opt_real));
        for m in [&r.d1b, &r.d2b, &r.d1a, &r.d2a] {
            rec.push(opt_int(m.iterations));
            rec.push(opt_secs(m.seconds));
            rec.push(m.residual.map_or_else(String::new, |x| format!("{x:.3e}")));
        }
        rec.push(opt_secs(r.oracle_seconds));
        rec.push(r.soft_cap_hit.to_string());
        rec.push(CSV_VERSION.into());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_opt<T: std::str::FromStr>(s: &str, line: usize, col: &str) -> Result<Option<T>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| Error::Parse {
        line,
        message: format!("column {col}: cannot parse '{s}'"),
    })
}

/// Reads rows written by [`write_csv`]. Timings and residuals are read back;
/// only the columns the report needs are required to be well formed.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<BoundReport>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers().map_err(|e| Error::Io(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != CSV_COLUMNS {
        return Err(Error::Parse {
            line: 1,
            message: "header does not match the bench schema".into(),
        });
    }
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let get = |i: usize| rec.get(i).unwrap_or("");
        let req = |i: usize| -> Result<String> {
            let v = get(i);
            if v.is_empty() {
                Err(Error::Parse {
                    line,
                    message: format!("column {} is empty", CSV_COLUMNS[i]),
                })
            } else {
                Ok(v.to_string())
            }
        };
        let family = req(1)?.parse::<Family>().map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let num = |i: usize| -> Result<usize> {
            parse_opt::<usize>(get(i), line, CSV_COLUMNS[i])?.ok_or_else(|| Error::Parse {
                line,
                message: format!("column {} is empty", CSV_COLUMNS[i]),
            })
        };
        let real = |i: usize| parse_opt::<f64>(get(i), line, CSV_COLUMNS[i]);
        let model = |b: usize, t: usize| -> Result<ModelRecord> {
            Ok(ModelRecord {
                bound: real(b)?,
                iterations: parse_opt(get(t), line, CSV_COLUMNS[t])?,
                seconds: real(t + 1)?,
                residual: real(t + 2)?,
            })
        };
        rows.push(BoundReport {
            id: req(0)?,
            family,
            n: num(2)?,
            rho0: num(3)?,
            rho: num(4)?,
            seed: parse_opt(get(5), line, "seed")?.unwrap_or(0),
            status: get(6).to_string(),
            d1b: model(7, 15)?,
            d2b: model(8, 18)?,
            d1a: model(9, 21)?,
            d2a: model(10, 24)?,
            oracle: real(11)?,
            upper: real(12)?,
            dnn_gap: real(13)?,
            oracle_gap: real(14)?,
            oracle_seconds: real(27)?,
            soft_cap_hit: get(28) == "true",
        });
    }
    Ok(rows)
}

/// Fraction of rows of `family` with a gap satisfying `pred`, over rows that have a gap.
pub fn gap_fraction(rows: &[BoundReport], family: Family, pred: impl Fn(f64) -> bool) -> (usize, usize) {
    let gaps: Vec<f64> = rows
        .iter()
        .filter(|r| r.family == family)
        .filter_map(|r| r.dnn_gap)
        .collect();
    (gaps.iter().filter(|&&g| pred(g)).count(), gaps.len())
}
