//! Standard-form conic programs `min c·z  s.t.  A z = b,  z ∈ K` over products
//! of nonnegative orthants and PSD cones (in packed `svec` coordinates), and a
//! first-order operator-splitting solver for them.
//!
//! The solver is Douglas–Rachford splitting between the affine set `{A z = b}`
//! and `K`, with over-relaxation, adaptive penalty and safeguarded Anderson
//! acceleration. The affine projection is factored once: rows owning a
//! private column are eliminated through a sparse Cholesky factor and the
//! remaining rows go through a dense Schur complement. Dual variables are the
//! projection multipliers, `y = −σλ`.

mod affine;

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::linalg::{lu_solve_in_place, proj_psd, smat, svec, svec_len};
use affine::AffineProjector;

/// One factor of the cone `K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConeBlock {
    NonNeg(usize),
    /// PSD matrices of the given order, stored as `d(d+1)/2` packed coordinates.
    Psd(usize),
}

impl ConeBlock {
    pub fn dim(&self) -> usize {
        match *self {
            ConeBlock::NonNeg(m) => m,
            ConeBlock::Psd(d) => svec_len(d),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ConeSpec {
    pub blocks: Vec<ConeBlock>,
}

impl ConeSpec {
    pub fn new(blocks: Vec<ConeBlock>) -> Result<Self> {
        if blocks.iter().any(|b| matches!(b, ConeBlock::NonNeg(0) | ConeBlock::Psd(0))) {
            return Err(Error::Parameter("cone blocks must have positive size".into()));
        }
        Ok(ConeSpec { blocks })
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(ConeBlock::dim).sum()
    }

    /// Starting coordinate of every block.
    pub fn offsets(&self) -> Vec<usize> {
        let mut at = 0;
        self.blocks
            .iter()
            .map(|b| {
                let o = at;
                at += b.dim();
                o
            })
            .collect()
    }
}

/// `min c·z  s.t.  A z = b,  z ∈ cone`, with `A` given as `(row, col, value)` triples.
#[derive(Clone, Debug, PartialEq)]
pub struct ConicProblem {
    pub c: Vec<f64>,
    pub a: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
    pub cone: ConeSpec,
    pub label: String,
}

impl ConicProblem {
    /// Validates shapes and indices. Duplicate triples are summed and explicit
    /// zeros dropped, so the stored matrix has no zero entries.
    pub fn new(
        c: Vec<f64>,
        triples: Vec<(usize, usize, f64)>,
        b: Vec<f64>,
        cone: ConeSpec,
        label: impl Into<String>,
    ) -> Result<Self> {
        let n = cone.dim();
        if c.len() != n {
            return Err(Error::Dimension(format!(
                "objective has length {} but the cone has dimension {n}",
                c.len()
            )));
        }
        let m = b.len();
        for &(r, col, v) in &triples {
            if r >= m || col >= n {
                return Err(Error::Dimension(format!(
                    "triple ({r}, {col}) outside a {m} x {n} constraint matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Parameter(format!("non-finite coefficient at ({r}, {col})")));
            }
        }
        if c.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::Parameter("non-finite objective or right-hand side".into()));
        }
        let mut sorted = triples;
        sorted.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        let mut a: Vec<(usize, usize, f64)> = Vec::with_capacity(sorted.len());
        for (r, col, v) in sorted {
            match a.last_mut() {
                Some(last) if last.0 == r && last.1 == col => last.2 += v,
                _ => a.push((r, col, v)),
            }
        }
        a.retain(|t| t.2 != 0.0);
        Ok(ConicProblem {
            c,
            a,
            b,
            cone,
            label: label.into(),
        })
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    /// `A z`.
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_rows()];
        for &(r, col, v) in &self.a {
            out[r] += v * z[col];
        }
        out
    }

    /// `Aᵀ y`.
    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_vars()];
        for &(r, col, v) in &self.a {
            out[col] += v * y[r];
        }
        out
    }

    /// `‖A z − b‖∞ / (1 + ‖b‖∞)`.
    pub fn primal_residual(&self, z: &[f64]) -> f64 {
        let az = self.apply(z);
        let num = az
            .iter()
            .zip(&self.b)
            .fold(0.0_f64, |m, (p, q)| m.max((p - q).abs()));
        num / (1.0 + inf_norm(&self.b))
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        dot(&self.c, z)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    PrimalInfeasibleSuspected,
    DualInfeasibleSuspected,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::MaxIter => "max_iter",
            SolveStatus::PrimalInfeasibleSuspected => "primal_infeasible_suspected",
            SolveStatus::DualInfeasibleSuspected => "dual_infeasible_suspected",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Residuals {
    /// `‖A z − b‖∞ / (1 + ‖b‖∞)`.
    pub primal: f64,
    /// `‖c − Aᵀ y − s‖∞ / (1 + ‖c‖∞)`.
    pub dual: f64,
    /// Distance between the affine iterate and its cone projection, `‖x − z‖∞`.
    pub cone: f64,
    /// `|c·z − b·y| / max(1, |c·z|)`.
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub residuals: Residuals,
    pub iterations: usize,
    pub wall_time: Duration,
}

impl ConicSolution {
    /// Optimal, or stopped at the iteration cap with residuals within the
    /// acceptance thresholds.
    pub fn is_accepted(&self, s: &SolverSettings) -> bool {
        match self.status {
            SolveStatus::Optimal => true,
            SolveStatus::MaxIter => {
                self.residuals.primal <= s.accept_tol_feas
                    && self.residuals.dual <= s.accept_tol_feas
                    && self.residuals.gap <= s.accept_tol_feas.max(s.tol_gap)
            }
            _ => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSettings {
    pub tol_feas: f64,
    pub tol_gap: f64,
    pub accept_tol_feas: f64,
    pub max_iter: usize,
    /// Initial penalty `σ`; rebalanced when the primal/dual residual ratio leaves [0.1, 10].
    pub penalty: f64,
    pub over_relaxation: f64,
    pub seed: u64,
    /// Iterations between residual evaluations.
    pub check_every: usize,
    /// Anderson acceleration memory; 0 runs the plain iteration.
    pub anderson_memory: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol_feas: 1e-7,
            tol_gap: 1e-6,
            accept_tol_feas: 1e-5,
            max_iter: 200_000,
            penalty: 1.0,
            over_relaxation: 1.6,
            seed: 0,
            check_every: 10,
            anderson_memory: 5,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.tol_feas, self.tol_gap, self.accept_tol_feas, self.penalty];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Parameter("tolerances and penalty must be positive".into()));
        }
        if !(self.over_relaxation > 1.0 && self.over_relaxation < 2.0) {
            return Err(Error::Parameter(format!(
                "over-relaxation {} must lie in (1, 2)",
                self.over_relaxation
            )));
        }
        if self.max_iter == 0 || self.check_every == 0 {
            return Err(Error::Parameter("iteration limits must be positive".into()));
        }
        Ok(())
    }
}

/// Euclidean projection onto the product cone.
pub fn project_cone(z: &[f64], spec: &ConeSpec) -> Result<Vec<f64>> {
    if z.len() != spec.dim() {
        return Err(Error::Dimension(format!(
            "vector of length {} for a cone of dimension {}",
            z.len(),
            spec.dim()
        )));
    }
    let mut out = z.to_vec();
    project_cone_in_place(&mut out, spec)?;
    Ok(out)
}

fn project_cone_in_place(z: &mut [f64], spec: &ConeSpec) -> Result<()> {
    let mut at = 0;
    for block in &spec.blocks {
        let k = block.dim();
        let part = &mut z[at..at + k];
        match *block {
            ConeBlock::NonNeg(_) => part.iter_mut().for_each(|v| *v = v.max(0.0)),
            ConeBlock::Psd(_) => {
                let p = svec(&proj_psd(&smat(part)?)?);
                part.copy_from_slice(&p);
            }
        }
        at += k;
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Sparse rows of `A` for fast products inside the iteration.
struct Csr {
    ptr: Vec<usize>,
    idx: Vec<usize>,
    val: Vec<f64>,
}

impl Csr {
    fn new(p: &ConicProblem) -> Self {
        let m = p.num_rows();
        let mut ptr = vec![0; m + 1];
        for &(r, _, _) in &p.a {
            ptr[r + 1] += 1;
        }
        for r in 0..m {
            ptr[r + 1] += ptr[r];
        }
        // triples are sorted by (row, col) at construction
        let idx = p.a.iter().map(|t| t.1).collect();
        let val = p.a.iter().map(|t| t.2).collect();
        Csr { ptr, idx, val }
    }

    fn mul(&self, z: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.ptr[r]..self.ptr[r + 1] {
                s += self.val[k] * z[self.idx[k]];
            }
            *o = s;
        }
    }
}

const DIVERGENCE: f64 = 1e10;
const ADAPT_EVERY: usize = 50;
/// An accelerated iterate is kept only if its fixed-point residual does not
/// grow by more than this factor over the previous one.
const SAFEGUARD: f64 = 1.0;

/// Per-solve buffers and the one-off factorisation.
struct Workspace<'a> {
    p: &'a ConicProblem,
    proj: AffineProjector,
    csr: Csr,
    /// Objective divided by `max(1, ‖c‖∞)`.
    c: Vec<f64>,
    v: Vec<f64>,
    x: Vec<f64>,
    atl: Vec<f64>,
    lam: Vec<f64>,
}

impl Workspace<'_> {
    /// One relaxed splitting step from `u = (z, w)` into `out`; leaves the
    /// affine iterate in `x` and the multiplier of the projection in `lam`.
    fn step(&mut self, u: &[f64], out: &mut [f64], sigma: f64, alpha: f64) -> Result<()> {
        let n = self.c.len();
        let (z, w) = u.split_at(n);
        for i in 0..n {
            self.v[i] = z[i] - w[i] - self.c[i] / sigma;
        }
        self.proj.project(&self.v, &self.p.b, &mut self.x, &mut self.lam);
        let (zo, wo) = out.split_at_mut(n);
        for i in 0..n {
            self.atl[i] = self.v[i] - self.x[i];
            let xh = alpha * self.x[i] + (1.0 - alpha) * z[i];
            zo[i] = xh + w[i];
            wo[i] = w[i] + xh;
        }
        project_cone_in_place(zo, &self.p.cone)?;
        for i in 0..n {
            wo[i] -= zo[i];
        }
        Ok(())
    }
}

/// Type-II Anderson acceleration over the last few fixed-point steps. The
/// difference columns live in a ring buffer with their Gram matrix updated
/// one column at a time.
struct Anderson {
    memory: usize,
    len: usize,
    dg: Vec<f64>,
    df: Vec<f64>,
    gram: Vec<f64>,
    count: usize,
    head: usize,
    g_prev: Vec<f64>,
    f_prev: Vec<f64>,
    have_prev: bool,
}

impl Anderson {
    fn new(memory: usize, len: usize) -> Self {
        Anderson {
            memory,
            len,
            dg: vec![0.0; memory * len],
            df: vec![0.0; memory * len],
            gram: vec![0.0; memory * memory],
            count: 0,
            head: 0,
            g_prev: vec![0.0; len],
            f_prev: vec![0.0; len],
            have_prev: false,
        }
    }

    fn reset(&mut self) {
        self.count = 0;
        self.head = 0;
        self.have_prev = false;
    }

    fn col(v: &[f64], len: usize, k: usize) -> &[f64] {
        &v[k * len..(k + 1) * len]
    }

    /// Records `g(u)` and `f = g(u) − u`, then writes the extrapolated next
    /// iterate into `next`. Returns whether extrapolation was applied.
    fn update(&mut self, g: &[f64], f: &[f64], next: &mut [f64]) -> bool {
        let (len, mem) = (self.len, self.memory);
        if self.have_prev {
            let slot = self.head;
            let range = slot * len..(slot + 1) * len;
            for (((dg, df), (gi, gp)), (fi, fp)) in self.dg[range.clone()]
                .iter_mut()
                .zip(&mut self.df[range])
                .zip(g.iter().zip(&self.g_prev))
                .zip(f.iter().zip(&self.f_prev))
            {
                *dg = gi - gp;
                *df = fi - fp;
            }
            self.head = (slot + 1) % mem;
            self.count = (self.count + 1).min(mem);
            for b in 0..self.count {
                let v = dot(Self::col(&self.df, len, slot), Self::col(&self.df, len, b));
                self.gram[slot * mem + b] = v;
                self.gram[b * mem + slot] = v;
            }
        }
        self.g_prev.copy_from_slice(g);
        self.f_prev.copy_from_slice(f);
        self.have_prev = true;
        next.copy_from_slice(g);
        let k = self.count;
        if k == 0 {
            return false;
        }
        let mut gram = vec![0.0; k * k];
        let mut rhs = vec![0.0; k];
        for a in 0..k {
            rhs[a] = dot(Self::col(&self.df, len, a), f);
            for b in 0..k {
                gram[a * k + b] = self.gram[a * mem + b];
            }
        }
        let scale = (0..k).fold(0.0_f64, |m, a| m.max(gram[a * k + a]));
        if !(scale > 0.0 && scale.is_finite()) {
            return false;
        }
        for a in 0..k {
            gram[a * k + a] += 1e-10 * scale;
        }
        if !lu_solve_in_place(&mut gram, k, &mut rhs) {
            return false;
        }
        for (a, gamma) in rhs.iter().enumerate() {
            for (o, d) in next.iter_mut().zip(Self::col(&self.dg, len, a)) {
                *o -= gamma * d;
            }
        }
        next.iter().all(|v| v.is_finite())
    }
}

/// Solves `p` with the native operator-splitting method. Deterministic: the
/// same problem and settings reproduce the same iterates bit for bit.
pub fn solve(p: &ConicProblem, s: &SolverSettings) -> Result<ConicSolution> {
    s.validate()?;
    let n = p.num_vars();
    if n == 0 {
        return Err(Error::Parameter("problem has no variables".into()));
    }
    if p.cone.dim() != n {
        return Err(Error::Dimension("cone dimension differs from variable count".into()));
    }
    let start = Instant::now();
    let m = p.num_rows();
    let b_norm = inf_norm(&p.b);
    let c_norm = inf_norm(&p.c);
    let c_scale = c_norm.max(1.0);
    let mut ws = Workspace {
        p,
        proj: AffineProjector::new(p)?,
        csr: Csr::new(p),
        c: p.c.iter().map(|v| v / c_scale).collect(),
        v: vec![0.0; n],
        x: vec![0.0; n],
        atl: vec![0.0; n],
        lam: vec![0.0; m],
    };

    // an inconsistent system has no affine point at all
    {
        let mut x0 = vec![0.0; n];
        ws.proj.project(&vec![0.0; n], &p.b, &mut x0, &mut ws.lam);
        if p.primal_residual(&x0) > 1e-8 {
            let res = Residuals {
                primal: p.primal_residual(&vec![0.0; n]),
                ..Residuals::default()
            };
            let status = SolveStatus::PrimalInfeasibleSuspected;
            return Ok(finish(p, status, x0, vec![0.0; m], res, 0, start));
        }
    }

    let mut sigma = s.penalty;
    let alpha = s.over_relaxation;
    let mut u = vec![0.0; 2 * n];
    let mut gu = vec![0.0; 2 * n];
    let mut f = vec![0.0; 2 * n];
    let mut az = vec![0.0; m];
    let mut aa = Anderson::new(s.anderson_memory, 2 * n);
    let mut accelerated = false;
    let mut f_norm_prev = f64::INFINITY;

    let mut best: Option<(f64, Vec<f64>, Vec<f64>, Residuals)> = None;
    let mut status = SolveStatus::MaxIter;
    let mut last_res = Residuals::default();
    let mut iter = 0;
    while iter < s.max_iter {
        iter += 1;
        ws.step(&u, &mut gu, sigma, alpha)?;
        for i in 0..2 * n {
            f[i] = gu[i] - u[i];
        }
        let f_norm = dot(&f, &f).sqrt();
        if accelerated && !(f_norm <= SAFEGUARD * f_norm_prev) {
            // fall back to the plain image of the last accepted iterate
            u.copy_from_slice(&aa.g_prev);
            aa.reset();
            accelerated = false;
            continue;
        }
        f_norm_prev = f_norm;

        let check = iter % s.check_every == 0 || iter == s.max_iter;
        if check {
            let (z, w) = gu.split_at(n);
            let y: Vec<f64> = ws.lam.iter().map(|l| -sigma * l * c_scale).collect();
            ws.csr.mul(z, &mut az);
            let pres = az
                .iter()
                .zip(&p.b)
                .fold(0.0_f64, |mm, (a, bi)| mm.max((a - bi).abs()))
                / (1.0 + b_norm);
            let mut dres_num: f64 = 0.0;
            for i in 0..n {
                // c − Aᵀy − s with s = −σ w, all in caller units
                let r = p.c[i] + sigma * c_scale * (ws.atl[i] + w[i]);
                dres_num = dres_num.max(r.abs());
            }
            let dres = dres_num / (1.0 + c_norm);
            let pobj = dot(&p.c, z);
            let dobj = dot(&p.b, &y);
            let gap = (pobj - dobj).abs() / pobj.abs().max(1.0);
            let cone_res = ws
                .x
                .iter()
                .zip(z)
                .fold(0.0_f64, |mm, (a, bz)| mm.max((a - bz).abs()));
            last_res = Residuals {
                primal: pres,
                dual: dres,
                cone: cone_res,
                gap,
            };
            if !(pres.is_finite() && dres.is_finite()) {
                return Err(Error::Numerical {
                    context: format!("solve({})", p.label),
                    residual: pres,
                });
            }
            if pres <= s.tol_feas && dres <= s.tol_feas && gap <= s.tol_gap {
                status = SolveStatus::Optimal;
                best = Some((0.0, z.to_vec(), y, last_res));
                break;
            }
            let merit = pres.max(dres).max(gap);
            if best.as_ref().is_none_or(|b| merit < b.0) {
                best = Some((merit, z.to_vec(), y.clone(), last_res));
            }
            if inf_norm(z) > DIVERGENCE * (1.0 + b_norm) {
                status = SolveStatus::DualInfeasibleSuspected;
                best = Some((merit, z.to_vec(), y, last_res));
                break;
            }
            if sigma * c_scale * inf_norm(w) > DIVERGENCE * (1.0 + c_norm) {
                status = SolveStatus::PrimalInfeasibleSuspected;
                best = Some((merit, z.to_vec(), y, last_res));
                break;
            }
            if iter % ADAPT_EVERY == 0 {
                let ratio = pres / dres.max(1e-300);
                if !(0.1..=10.0).contains(&ratio) {
                    let factor = ratio.sqrt().clamp(0.1, 10.0);
                    let new_sigma = (sigma * factor).clamp(1e-6, 1e6);
                    gu[n..].iter_mut().for_each(|wi| *wi *= sigma / new_sigma);
                    sigma = new_sigma;
                    u.copy_from_slice(&gu);
                    aa.reset();
                    accelerated = false;
                    f_norm_prev = f64::INFINITY;
                    continue;
                }
            }
        }
        if s.anderson_memory > 0 {
            accelerated = aa.update(&gu, &f, &mut u);
        } else {
            u.copy_from_slice(&gu);
        }
    }
    let (_, zb, yb, res) = best.unwrap_or_else(|| (0.0, gu[..n].to_vec(), vec![0.0; m], last_res));
    Ok(finish(p, status, zb, yb, res, iter, start))
}

fn finish(
    p: &ConicProblem,
    status: SolveStatus,
    z: Vec<f64>,
    y: Vec<f64>,
    residuals: Residuals,
    iterations: usize,
    start: Instant,
) -> ConicSolution {
    let primal_objective = dot(&p.c, &z);
    let dual_objective = dot(&p.b, &y);
    ConicSolution {
        status,
        z,
        y,
        primal_objective,
        dual_objective,
        residuals,
        iterations,
        wall_time: start.elapsed(),
    }
}

/// A conic solver living outside this crate, used for cross-validation.
pub trait ExternalSolver: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, p: &ConicProblem, s: &SolverSettings) -> Result<ConicSolution>;
}

/// Environment variable naming the external backend.
pub const EXTERNAL_SOLVER_ENV: &str = "SSTQP_EXTERNAL_SOLVER";

/// Looks up the backend named by [`EXTERNAL_SOLVER_ENV`] among `registered`.
pub fn external_adapter_from_env<'a>(
    registered: &'a [&'a dyn ExternalSolver],
) -> Result<&'a dyn ExternalSolver> {
    let name = std::env::var(EXTERNAL_SOLVER_ENV).map_err(|_| {
        Error::Unsupported(format!("no external solver configured ({EXTERNAL_SOLVER_ENV} unset)"))
    })?;
    registered
        .iter()
        .copied()
        .find(|a| a.name() == name)
        .ok_or_else(|| Error::Unsupported(format!("external solver '{name}' is not registered")))
}

/// Solves through an external adapter; `None` means no adapter is configured.
pub fn solve_external(
    p: &ConicProblem,
    adapter: Option<&dyn ExternalSolver>,
    s: &SolverSettings,
) -> Result<ConicSolution> {
    match adapter {
        Some(a) => a.solve(p, s),
        None => Err(Error::Unsupported("no external solver adapter configured".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{svec_index, SymMatrix};
    use proptest::prelude::*;

    fn dnn_stqp(q: &SymMatrix) -> ConicProblem {
        // X in Psd(d) plus shadows for every lower-triangle entry
        let d = q.order();
        let k = svec_len(d);
        let cone = ConeSpec::new(vec![ConeBlock::Psd(d), ConeBlock::NonNeg(k)]).unwrap();
        let mut c = vec![0.0; 2 * k];
        let mut a = Vec::new();
        let mut b = vec![0.0; 1 + k];
        b[0] = 1.0;
        for j in 0..d {
            for i in j..d {
                let idx = svec_index(d, i, j);
                let scale = if i == j { 1.0 } else { std::f64::consts::SQRT_2 };
                c[idx] = q.get(i, j) * scale;
                a.push((0, idx, scale));
                a.push((1 + idx, k + idx, 1.0));
                a.push((1 + idx, idx, -1.0 / scale));
            }
        }
        ConicProblem::new(c, a, b, cone, "test-dnn").unwrap()
    }

    #[test]
    fn project_cone_examples() {
        let spec = ConeSpec::new(vec![ConeBlock::NonNeg(3)]).unwrap();
        assert_eq!(project_cone(&[-1.0, 0.0, 2.0], &spec).unwrap(), vec![0.0, 0.0, 2.0]);
        let spec = ConeSpec::new(vec![ConeBlock::Psd(2)]).unwrap();
        let p = project_cone(&svec(&SymMatrix::from_diagonal(&[1.0, -1.0])), &spec).unwrap();
        let expect = svec(&SymMatrix::from_diagonal(&[1.0, 0.0]));
        for (a, b) in p.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(matches!(project_cone(&[1.0], &spec), Err(Error::Dimension(_))));
    }

    fn mixed_spec() -> ConeSpec {
        ConeSpec::new(vec![ConeBlock::NonNeg(2), ConeBlock::Psd(3), ConeBlock::NonNeg(1)]).unwrap()
    }

    proptest! {
        #[test]
        fn project_cone_idempotent(z in proptest::collection::vec(-5.0f64..5.0, 9)) {
            let spec = mixed_spec();
            let p = project_cone(&z, &spec).unwrap();
            let pp = project_cone(&p, &spec).unwrap();
            let err = p.iter().zip(&pp).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            prop_assert!(err <= 1e-9);
        }

        #[test]
        fn project_cone_nonexpansive(
            a in proptest::collection::vec(-5.0f64..5.0, 9),
            b in proptest::collection::vec(-5.0f64..5.0, 9),
        ) {
            let spec = mixed_spec();
            let pa = project_cone(&a, &spec).unwrap();
            let pb = project_cone(&b, &spec).unwrap();
            let d_in = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            let d_out = pa.iter().zip(&pb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            prop_assert!(d_out <= d_in + 1e-9);
        }
    }

    #[test]
    fn problem_drops_zero_and_merges_duplicates() {
        let cone = ConeSpec::new(vec![ConeBlock::NonNeg(2)]).unwrap();
        let p = ConicProblem::new(
            vec![1.0, 1.0],
            vec![(0, 0, 1.0), (0, 0, 1.0), (0, 1, 0.0)],
            vec![1.0],
            cone.clone(),
            "t",
        )
        .unwrap();
        assert_eq!(p.a, vec![(0, 0, 2.0)]);
        assert!(ConicProblem::new(vec![1.0, 1.0], vec![(1, 0, 1.0)], vec![1.0], cone, "t").is_err());
        assert!(ConeSpec::new(vec![ConeBlock::Psd(0)]).is_err());
    }

    #[test]
    fn trace_constrained_psd() {
        // min X11 s.t. X11 + X22 = 1, X PSD
        let cone = ConeSpec::new(vec![ConeBlock::Psd(2)]).unwrap();
        let p = ConicProblem::new(
            vec![1.0, 0.0, 0.0],
            vec![(0, 0, 1.0), (0, 2, 1.0)],
            vec![1.0],
            cone,
            "trace",
        )
        .unwrap();
        let sol = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.primal_objective.abs() < 1e-5);
    }

    #[test]
    fn dnn_of_identity_is_one_half() {
        let sol = solve(&dnn_stqp(&SymMatrix::identity(2)), &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal_objective - 0.5).abs() < 1e-5);
        assert!(sol.dual_objective <= sol.primal_objective + 1e-6 * sol.primal_objective.abs().max(1.0));
    }

    #[test]
    fn solve_is_deterministic() {
        let q = SymMatrix::from_rows(&[vec![1.0, -0.5, 0.2], vec![-0.5, 2.0, 0.3], vec![0.2, 0.3, 1.5]])
            .unwrap();
        let p = dnn_stqp(&q);
        let a = solve(&p, &SolverSettings::default()).unwrap();
        let b = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.primal_objective.to_bits(), b.primal_objective.to_bits());
        assert_eq!(a.z, b.z);
    }

    #[test]
    fn inconsistent_equalities_flagged() {
        let cone = ConeSpec::new(vec![ConeBlock::NonNeg(1)]).unwrap();
        let p = ConicProblem::new(
            vec![1.0],
            vec![(0, 0, 1.0), (1, 0, 1.0)],
            vec![1.0, 2.0],
            cone,
            "bad",
        )
        .unwrap();
        let sol = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::PrimalInfeasibleSuspected);
        assert!(!sol.is_accepted(&SolverSettings::default()));
    }

    #[test]
    fn unbounded_flagged() {
        let cone = ConeSpec::new(vec![ConeBlock::NonNeg(2)]).unwrap();
        // min −z0 s.t. z0 − z1 = 0: unbounded along (t, t)
        let p = ConicProblem::new(
            vec![-1.0, 0.0],
            vec![(0, 0, 1.0), (0, 1, -1.0)],
            vec![0.0],
            cone,
            "unbounded",
        )
        .unwrap();
        let s = SolverSettings {
            max_iter: 2_000_000,
            ..SolverSettings::default()
        };
        let sol = solve(&p, &s).unwrap();
        assert_eq!(sol.status, SolveStatus::DualInfeasibleSuspected);
    }

    #[test]
    fn empty_problem_rejected_and_settings_validated() {
        let p = ConicProblem {
            c: vec![],
            a: vec![],
            b: vec![],
            cone: ConeSpec::default(),
            label: String::new(),
        };
        assert!(matches!(solve(&p, &SolverSettings::default()), Err(Error::Parameter(_))));
        let bad = SolverSettings {
            over_relaxation: 2.0,
            ..SolverSettings::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn external_adapter_absent() {
        let cone = ConeSpec::new(vec![ConeBlock::NonNeg(1)]).unwrap();
        let p = ConicProblem::new(vec![1.0], vec![], vec![], cone, "free").unwrap();
        assert!(matches!(
            solve_external(&p, None, &SolverSettings::default()),
            Err(Error::Unsupported(_))
        ));
        if std::env::var(EXTERNAL_SOLVER_ENV).is_err() {
            assert!(matches!(external_adapter_from_env(&[]), Err(Error::Unsupported(_))));
        }
    }
}
