//! DNN relaxations of the sparse StQP and of the plain StQP, assembled as
//! conic programs, plus the lifted-solution view used by the lifting maps
//! and the relation checkers.
//!
//! Every lifted matrix is bordered: index 0 is the corner, then one block of
//! `n` indices per vector in the order x, u, v, y (only the blocks the model
//! carries). A DNN matrix variable is encoded as a `Psd` block followed by a
//! `NonNeg` shadow per lower-triangle entry, tied to it by an equality row;
//! each scalar inequality gets its own `NonNeg` slack.

mod checks;
mod lift;

pub use checks::{
    check_feasibility, check_lemma_d1a, check_lemma_d1b, check_lemma_d2a, ResidualReport,
};
pub use lift::{lift_s_to_y, lift_w_to_z, restrict_y_to_s, restrict_z_to_w};

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use crate::conic::{ConeBlock, ConeSpec, ConicProblem, ConicSolution, SolverSettings};
use crate::error::{Error, Result};
use crate::linalg::{smat, svec, svec_index, svec_len, SymMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Psd,
    Spn,
    Cop,
    Custom,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Psd => "psd",
            Family::Spn => "spn",
            Family::Cop => "cop",
            Family::Custom => "custom",
        })
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "psd" => Ok(Family::Psd),
            "spn" => Ok(Family::Spn),
            "cop" => Ok(Family::Cop),
            "custom" => Ok(Family::Custom),
            other => Err(Error::Parameter(format!("unknown family '{other}'"))),
        }
    }
}

/// Generation metadata carried alongside `Q`.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceMeta {
    pub family: Family,
    pub rho0: Option<usize>,
    pub xstar: Option<Vec<f64>>,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for InstanceMeta {
    fn default() -> Self {
        InstanceMeta {
            family: Family::Custom,
            rho0: None,
            xstar: None,
            lambda: 0.0,
            seed: 0,
        }
    }
}

/// `min xᵀQx  s.t.  x ∈ F_n, ‖x‖₀ ≤ ρ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseStqpInstance {
    pub n: usize,
    pub rho: usize,
    pub q: SymMatrix,
    pub meta: InstanceMeta,
}

impl SparseStqpInstance {
    pub fn new(q: SymMatrix, rho: usize) -> Result<Self> {
        Self::with_meta(q, rho, InstanceMeta::default())
    }

    pub fn with_meta(q: SymMatrix, rho: usize, meta: InstanceMeta) -> Result<Self> {
        let inst = SparseStqpInstance {
            n: q.order(),
            rho,
            q,
            meta,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.q.order() != self.n {
            return Err(Error::Dimension("Q order differs from n".into()));
        }
        if self.rho < 1 || self.rho > self.n {
            return Err(Error::Parameter(format!(
                "rho = {} must lie in [1, {}]",
                self.rho, self.n
            )));
        }
        if self.q.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("Q has non-finite entries".into()));
        }
        if let Some(x) = &self.meta.xstar {
            if x.len() != self.n {
                return Err(Error::Dimension("xstar length differs from n".into()));
            }
            if x.iter().any(|&v| !(v >= 0.0)) {
                return Err(Error::Parameter("xstar has negative entries".into()));
            }
            let s: f64 = x.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::Parameter(format!("xstar sums to {s}, not 1")));
            }
            let support = x.iter().filter(|&&v| v > 0.0).count();
            if let Some(r0) = self.meta.rho0 {
                if support != r0 {
                    return Err(Error::Parameter(format!(
                        "xstar has support {support} but rho0 = {r0}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `ρ ≥ ρ₀`: the designated optimizer is itself feasible, so the
    /// cardinality bound cuts nothing off.
    pub fn is_trivial(&self) -> bool {
        self.meta.rho0.is_some_and(|r0| self.rho >= r0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Model {
    D1A,
    D1B,
    D2A,
    D2B,
    /// Plain StQP relaxation `μ(Q)`.
    Mu,
}

impl Model {
    pub const LIFTED: [Model; 4] = [Model::D1A, Model::D1B, Model::D2A, Model::D2B];

    pub fn variant(self) -> Option<Variant> {
        match self {
            Model::D1A => Some(Variant::Z),
            Model::D1B => Some(Variant::W),
            Model::D2A => Some(Variant::Y),
            Model::D2B => Some(Variant::S),
            Model::Mu => None,
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::D1A => "d1a",
            Model::D1B => "d1b",
            Model::D2A => "d2a",
            Model::D2B => "d2b",
            Model::Mu => "mu",
        })
    }
}

impl FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "d1a" => Ok(Model::D1A),
            "d1b" => Ok(Model::D1B),
            "d2a" => Ok(Model::D2A),
            "d2b" => Ok(Model::D2B),
            "mu" => Ok(Model::Mu),
            other => Err(Error::Parameter(format!("unknown model '{other}'"))),
        }
    }
}

/// Shape of a lifted matrix: W and S are `(1, x, u)`, Y is `(1, x, u, v)`,
/// Z is `(1, x, u, v, y)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    W,
    S,
    Z,
    Y,
}

impl Variant {
    pub fn blocks(self) -> usize {
        match self {
            Variant::W | Variant::S => 2,
            Variant::Y => 3,
            Variant::Z => 4,
        }
    }

    pub fn order(self, n: usize) -> usize {
        self.blocks() * n + 1
    }
}

/// Vector blocks of a bordered matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    X,
    U,
    V,
    Y,
}

impl Part {
    fn slot(self) -> usize {
        match self {
            Part::X => 0,
            Part::U => 1,
            Part::V => 2,
            Part::Y => 3,
        }
    }
}

/// Bordered index of component `i` of `part`.
#[inline]
pub fn bordered_index(n: usize, part: Part, i: usize) -> usize {
    1 + part.slot() * n + i
}

/// Structured view of a relaxation solution.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedSolution {
    variant: Variant,
    n: usize,
    m: SymMatrix,
}

impl LiftedSolution {
    pub fn from_bordered(variant: Variant, n: usize, m: SymMatrix) -> Result<Self> {
        if n == 0 || m.order() != variant.order(n) {
            return Err(Error::Dimension(format!(
                "bordered matrix of order {} does not match variant {variant:?} with n = {n}",
                m.order()
            )));
        }
        Ok(LiftedSolution { variant, n, m })
    }

    /// `(1, x, u, …)(1, x, u, …)ᵀ` with `v = e − u` and `y = u − x` where the
    /// variant carries them.
    pub fn rank_one(variant: Variant, x: &[f64], u: &[f64]) -> Result<Self> {
        let n = x.len();
        if u.len() != n || n == 0 {
            return Err(Error::Dimension("x and u must have equal positive length".into()));
        }
        let mut p = Vec::with_capacity(variant.order(n));
        p.push(1.0);
        p.extend_from_slice(x);
        p.extend_from_slice(u);
        if variant.blocks() >= 3 {
            p.extend(u.iter().map(|ui| 1.0 - ui));
        }
        if variant.blocks() == 4 {
            p.extend(u.iter().zip(x).map(|(ui, xi)| ui - xi));
        }
        let m = SymMatrix::from_lower_fn(p.len(), |i, j| p[i] * p[j]);
        Self::from_bordered(variant, n, m)
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bordered(&self) -> &SymMatrix {
        &self.m
    }

    pub fn into_bordered(self) -> SymMatrix {
        self.m
    }

    pub fn has(&self, part: Part) -> bool {
        part.slot() < self.variant.blocks()
    }

    pub fn corner(&self) -> f64 {
        self.m.get(0, 0)
    }

    /// Vector block read from the first row.
    pub fn vector(&self, part: Part) -> Option<Vec<f64>> {
        self.has(part).then(|| {
            (0..self.n)
                .map(|i| self.m.get(0, bordered_index(self.n, part, i)))
                .collect()
        })
    }

    pub fn x(&self) -> Vec<f64> {
        self.vector(Part::X).unwrap()
    }

    pub fn u(&self) -> Vec<f64> {
        self.vector(Part::U).unwrap()
    }

    pub fn v(&self) -> Option<Vec<f64>> {
        self.vector(Part::V)
    }

    pub fn y(&self) -> Option<Vec<f64>> {
        self.vector(Part::Y)
    }

    /// Entry `(a_i, b_j)` of the block `M^{ab}`.
    #[inline]
    pub fn entry(&self, a: Part, i: usize, b: Part, j: usize) -> f64 {
        self.m
            .get(bordered_index(self.n, a, i), bordered_index(self.n, b, j))
    }

    /// Block `M^{ab}` as `n` rows of `n` entries.
    pub fn block(&self, a: Part, b: Part) -> Option<Vec<Vec<f64>>> {
        (self.has(a) && self.has(b)).then(|| {
            (0..self.n)
                .map(|i| (0..self.n).map(|j| self.entry(a, i, b, j)).collect())
                .collect()
        })
    }

    /// `⟨Q, M^{xx}⟩`.
    pub fn objective(&self, q: &SymMatrix) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += q.get(i, j) * self.entry(Part::X, i, Part::X, j);
            }
        }
        s
    }
}

/// Where the pieces of a model live inside its conic program.
#[derive(Clone, Debug, PartialEq)]
pub struct IndexMap {
    pub model: Model,
    pub n: usize,
    /// Order of the matrix variable (bordered order for lifted models).
    pub order: usize,
    pub full_dnn: bool,
    pub model_equalities: usize,
    pub corner_rows: usize,
    /// Redundant rows confining the affine set to the PSD face (see `kernel_rows`).
    pub kernel_rows: usize,
    pub inequality_rows: usize,
    pub link_rows: usize,
    /// First coordinate of the inequality slacks.
    pub slack_offset: usize,
    pub q: SymMatrix,
}

impl IndexMap {
    pub fn psd_dim(&self) -> usize {
        svec_len(self.order)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BuiltModel {
    pub problem: ConicProblem,
    pub map: IndexMap,
}

/// A linear expression `Σ c·M[i][j] + constant` over entries of the matrix variable.
#[derive(Clone, Debug, Default)]
pub(crate) struct Lin {
    pub terms: Vec<(usize, usize, f64)>,
    pub constant: f64,
}

impl Lin {
    pub fn term(mut self, i: usize, j: usize, c: f64) -> Self {
        self.terms.push((i, j, c));
        self
    }

    pub fn constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn eval(&self, m: &SymMatrix) -> f64 {
        self.terms
            .iter()
            .map(|&(i, j, c)| c * m.get(i, j))
            .sum::<f64>()
            + self.constant
    }
}

/// A model as lists of linear constraints over the entries of its matrix
/// variable, before encoding as a conic program.
pub(crate) struct Formulation {
    pub model: Model,
    pub n: usize,
    pub order: usize,
    pub full_dnn: bool,
    /// Model equalities, then the corner pin, then kernel rows.
    pub equalities: Vec<Lin>,
    pub model_equalities: usize,
    pub corner_rows: usize,
    pub inequalities: Vec<Lin>,
    pub objective: Lin,
}

impl Formulation {
    fn new(model: Model, n: usize, order: usize, full_dnn: bool) -> Self {
        Formulation {
            model,
            n,
            order,
            full_dnn,
            equalities: Vec::new(),
            model_equalities: 0,
            corner_rows: 0,
            inequalities: Vec::new(),
            objective: Lin::default(),
        }
    }

    fn mark_model_end(&mut self) {
        self.model_equalities = self.equalities.len();
    }

    /// `lin = 0`.
    fn eq(&mut self, lin: Lin) {
        self.equalities.push(lin);
    }

    /// `lin ≥ 0`.
    fn ineq(&mut self, lin: Lin) {
        self.inequalities.push(lin);
    }

    fn coord(&self, i: usize, j: usize, c: f64) -> (usize, f64) {
        let k = svec_index(self.order, i, j);
        (k, if i == j { c } else { c / SQRT_2 })
    }

    fn finish(&self, q: &SymMatrix) -> Result<BuiltModel> {
        let (model, n, full_dnn, objective) = (self.model, self.n, self.full_dnn, &self.objective);
        let model_equalities = self.model_equalities;
        let corner_rows = self.corner_rows;
        let kernel_rows = self.equalities.len() - model_equalities - corner_rows;
        let d = self.order;
        let p = svec_len(d);
        let shadows = if full_dnn { p } else { 0 };
        let slack_offset = p + shadows;
        let n_ineq = self.inequalities.len();
        let vars = slack_offset + n_ineq;

        let mut c = vec![0.0; vars];
        for &(i, j, v) in &objective.terms {
            let (k, w) = self.coord(i, j, v);
            c[k] += w;
        }

        let mut triples = Vec::new();
        let mut b = Vec::new();
        for lin in &self.equalities {
            let r = b.len();
            for &(i, j, v) in &lin.terms {
                let (k, w) = self.coord(i, j, v);
                triples.push((r, k, w));
            }
            b.push(-lin.constant);
        }
        // s − Σ terms = constant
        for (t, lin) in self.inequalities.iter().enumerate() {
            let r = b.len();
            triples.push((r, slack_offset + t, 1.0));
            for &(i, j, v) in &lin.terms {
                let (k, w) = self.coord(i, j, -v);
                triples.push((r, k, w));
            }
            b.push(lin.constant);
        }
        if full_dnn {
            for j in 0..d {
                for i in j..d {
                    let r = b.len();
                    let k = svec_index(d, i, j);
                    triples.push((r, p + k, 1.0));
                    triples.push((r, k, if i == j { -1.0 } else { -1.0 / SQRT_2 }));
                    b.push(0.0);
                }
            }
        }
        let mut blocks = vec![ConeBlock::Psd(d)];
        if shadows + n_ineq > 0 {
            blocks.push(ConeBlock::NonNeg(shadows + n_ineq));
        }
        let problem = ConicProblem::new(
            c,
            triples,
            b,
            ConeSpec::new(blocks)?,
            format!("{model}(n={n})"),
        )?;
        Ok(BuiltModel {
            problem,
            map: IndexMap {
                model,
                n,
                order: d,
                full_dnn,
                model_equalities,
                corner_rows,
                kernel_rows,
                inequality_rows: n_ineq,
                link_rows: shadows,
                slack_offset,
                q: q.clone(),
            },
        })
    }
}

/// Shorthands for bordered indices inside the builders.
struct Ix {
    n: usize,
}

impl Ix {
    fn x(&self, i: usize) -> usize {
        bordered_index(self.n, Part::X, i)
    }
    fn u(&self, i: usize) -> usize {
        bordered_index(self.n, Part::U, i)
    }
    fn v(&self, i: usize) -> usize {
        bordered_index(self.n, Part::V, i)
    }
    fn y(&self, i: usize) -> usize {
        bordered_index(self.n, Part::Y, i)
    }
}

fn objective_xx(ix: &Ix, q: &SymMatrix) -> Lin {
    let mut obj = Lin::default();
    for i in 0..ix.n {
        for j in 0..ix.n {
            obj = obj.term(ix.x(i), ix.x(j), q.get(i, j));
        }
    }
    obj
}

fn sum_of(ix: &Ix, f: impl Fn(&Ix, usize) -> usize, rhs: f64) -> Lin {
    let mut l = Lin::default().constant(-rhs);
    for i in 0..ix.n {
        l = l.term(0, f(ix, i), 1.0);
    }
    l
}

fn sum_block(ix: &Ix, f: impl Fn(&Ix, usize) -> usize, rhs: f64) -> Lin {
    let mut l = Lin::default().constant(-rhs);
    for i in 0..ix.n {
        for j in 0..ix.n {
            l = l.term(f(ix, i), f(ix, j), 1.0);
        }
    }
    l
}

fn corner_pin(a: &mut Formulation) {
    a.eq(Lin::default().term(0, 0, 1.0).constant(-1.0));
    a.corner_rows += 1;
}

/// Rows `(M a)_r = 0, r ≥ 1` for vectors `a` that the model's equalities force
/// into the kernel of every PSD feasible matrix (`aᵀMa = 0` is implied). They
/// leave the feasible set unchanged but confine the affine constraints to the
/// minimal face of the PSD cone, which the splitting solver needs for fast
/// convergence. Row 0 would repeat a model equality and is skipped.
fn kernel_rows(a: &mut Formulation, ix: &Ix, rho: f64) {
    let n = ix.n;
    let mut kernel: Vec<Vec<(usize, f64)>> = Vec::new();
    // eᵀx = 1 with ⟨E,Mxx⟩ = 1, and eᵀu = ρ with ⟨E,Muu⟩ = ρ²
    kernel.push(std::iter::once((0, -1.0)).chain((0..n).map(|i| (ix.x(i), 1.0))).collect());
    kernel.push(std::iter::once((0, -rho)).chain((0..n).map(|i| (ix.u(i), 1.0))).collect());
    let order = a.order;
    if order >= 3 * n + 1 {
        // u + v = e with diag(Muu) + 2 diag(Muv) + diag(Mvv) = e
        for i in 0..n {
            kernel.push(vec![(0, -1.0), (ix.u(i), 1.0), (ix.v(i), 1.0)]);
        }
    }
    if order == 4 * n + 1 {
        // x + y = u with the matching quadratic diagonal identity
        for i in 0..n {
            kernel.push(vec![(ix.x(i), 1.0), (ix.u(i), -1.0), (ix.y(i), 1.0)]);
        }
    }
    for vec in &kernel {
        for r in 1..order {
            let mut l = Lin::default();
            for &(k, c) in vec {
                l = l.term(r, k, c);
            }
            a.eq(l);
        }
    }
}

/// The first five equality families shared by all lifted models:
/// `eᵀx = 1, eᵀu = ρ, ⟨E,M^{xx}⟩ = 1, ⟨E,M^{uu}⟩ = ρ², diag(M^{uu}) = u`,
/// emitted in the order each model lists them via the `between` hook.
fn sums_and_diag_uu(a: &mut Formulation, ix: &Ix, rho: f64, between: impl FnOnce(&mut Formulation)) {
    a.eq(sum_of(ix, Ix::x, 1.0));
    a.eq(sum_of(ix, Ix::u, rho));
    between(a);
    a.eq(sum_block(ix, Ix::x, 1.0));
    a.eq(sum_block(ix, Ix::u, rho * rho));
    for i in 0..ix.n {
        a.eq(Lin::default().term(ix.u(i), ix.u(i), 1.0).term(0, ix.u(i), -1.0));
    }
}

/// Full lifted relaxation over `Z = (1, x, u, v, y)`: DNN of order `4n+1`, `5n+4` equalities.
pub fn build_d1a(inst: &SparseStqpInstance) -> Result<BuiltModel> {
    formulate_d1a(inst)?.finish(&inst.q)
}

fn formulate_d1a(inst: &SparseStqpInstance) -> Result<Formulation> {
    inst.validate()?;
    let n = inst.n;
    let ix = Ix { n };
    let rho = inst.rho as f64;
    let mut a = Formulation::new(Model::D1A, n, 4 * n + 1, true);
    a.objective = objective_xx(&ix, &inst.q);
    sums_and_diag_uu(&mut a, &ix, rho, |a| {
        for i in 0..n {
            // x + y = u
            a.eq(Lin::default()
                .term(0, ix.x(i), 1.0)
                .term(0, ix.y(i), 1.0)
                .term(0, ix.u(i), -1.0));
        }
        for i in 0..n {
            // u + v = e
            a.eq(Lin::default()
                .term(0, ix.u(i), 1.0)
                .term(0, ix.v(i), 1.0)
                .constant(-1.0));
        }
    });
    for i in 0..n {
        // diag(Zxx) + diag(Zyy) + diag(Zuu) + 2[diag(Zxy) − diag(Zxu) − diag(Zuy)] = 0
        a.eq(Lin::default()
            .term(ix.x(i), ix.x(i), 1.0)
            .term(ix.y(i), ix.y(i), 1.0)
            .term(ix.u(i), ix.u(i), 1.0)
            .term(ix.x(i), ix.y(i), 2.0)
            .term(ix.x(i), ix.u(i), -2.0)
            .term(ix.u(i), ix.y(i), -2.0));
    }
    for i in 0..n {
        // diag(Zuu) + 2 diag(Zuv) + diag(Zvv) = e
        a.eq(Lin::default()
            .term(ix.u(i), ix.u(i), 1.0)
            .term(ix.u(i), ix.v(i), 2.0)
            .term(ix.v(i), ix.v(i), 1.0)
            .constant(-1.0));
    }
    a.mark_model_end();
    corner_pin(&mut a);
    kernel_rows(&mut a, &ix, inst.rho as f64);
    Ok(a)
}

/// Reduced form of D1A over `W = (1, x, u)`: PSD of order `2n+1`, `n+4`
/// equalities and `(9/2)n² + (3/2)n` RLT inequalities.
pub fn build_d1b(inst: &SparseStqpInstance) -> Result<BuiltModel> {
    formulate_d1b(inst)?.finish(&inst.q)
}

fn formulate_d1b(inst: &SparseStqpInstance) -> Result<Formulation> {
    inst.validate()?;
    let n = inst.n;
    let ix = Ix { n };
    let mut a = Formulation::new(Model::D1B, n, 2 * n + 1, false);
    a.objective = objective_xx(&ix, &inst.q);
    sums_and_diag_uu(&mut a, &ix, inst.rho as f64, |_| {});
    a.mark_model_end();
    corner_pin(&mut a);
    kernel_rows(&mut a, &ix, inst.rho as f64);
    for i in 0..n {
        for j in 0..n {
            // x eᵀ − Wxu
            a.ineq(Lin::default().term(0, ix.x(i), 1.0).term(ix.x(i), ix.u(j), -1.0));
        }
    }
    for i in 0..n {
        for j in 0..n {
            // −Wxx + Wxu
            a.ineq(Lin::default()
                .term(ix.x(i), ix.x(j), -1.0)
                .term(ix.x(i), ix.u(j), 1.0));
        }
    }
    for i in 0..n {
        for j in i..n {
            // Wxx − Wxu − Wxuᵀ + Wuu
            a.ineq(Lin::default()
                .term(ix.x(i), ix.x(j), 1.0)
                .term(ix.x(i), ix.u(j), -1.0)
                .term(ix.x(j), ix.u(i), -1.0)
                .term(ix.u(i), ix.u(j), 1.0));
        }
    }
    for i in 0..n {
        for j in i..n {
            // e eᵀ − e uᵀ − u eᵀ + Wuu
            a.ineq(Lin::default()
                .constant(1.0)
                .term(0, ix.u(j), -1.0)
                .term(0, ix.u(i), -1.0)
                .term(ix.u(i), ix.u(j), 1.0));
        }
    }
    for i in 0..n {
        for j in 0..n {
            // −e xᵀ + Wxuᵀ + e uᵀ − Wuu
            a.ineq(Lin::default()
                .term(0, ix.x(j), -1.0)
                .term(ix.x(j), ix.u(i), 1.0)
                .term(0, ix.u(j), 1.0)
                .term(ix.u(i), ix.u(j), -1.0));
        }
    }
    for i in 0..n {
        for j in i..n {
            a.ineq(Lin::default().term(ix.x(i), ix.x(j), 1.0));
        }
    }
    Ok(a)
}

/// Full lifted relaxation over `Y = (1, x, u, v)`: DNN of order `3n+1`, `3n+5` equalities.
pub fn build_d2a(inst: &SparseStqpInstance) -> Result<BuiltModel> {
    formulate_d2a(inst)?.finish(&inst.q)
}

fn formulate_d2a(inst: &SparseStqpInstance) -> Result<Formulation> {
    inst.validate()?;
    let n = inst.n;
    let ix = Ix { n };
    let mut a = Formulation::new(Model::D2A, n, 3 * n + 1, true);
    a.objective = objective_xx(&ix, &inst.q);
    sums_and_diag_uu(&mut a, &ix, inst.rho as f64, |a| {
        for i in 0..n {
            a.eq(Lin::default()
                .term(0, ix.u(i), 1.0)
                .term(0, ix.v(i), 1.0)
                .constant(-1.0));
        }
    });
    // eᵀ diag(Yxv) = 0
    let mut trace_xv = Lin::default();
    for i in 0..n {
        trace_xv = trace_xv.term(ix.x(i), ix.v(i), 1.0);
    }
    a.eq(trace_xv);
    for i in 0..n {
        a.eq(Lin::default()
            .term(ix.u(i), ix.u(i), 1.0)
            .term(ix.u(i), ix.v(i), 2.0)
            .term(ix.v(i), ix.v(i), 1.0)
            .constant(-1.0));
    }
    a.mark_model_end();
    corner_pin(&mut a);
    kernel_rows(&mut a, &ix, inst.rho as f64);
    Ok(a)
}

/// Reduced form of D2A over `S = (1, x, u)`: DNN of order `2n+1`, `2n+4`
/// equalities and `(5/2)n² + (1/2)n` inequalities.
pub fn build_d2b(inst: &SparseStqpInstance) -> Result<BuiltModel> {
    formulate_d2b(inst)?.finish(&inst.q)
}

fn formulate_d2b(inst: &SparseStqpInstance) -> Result<Formulation> {
    inst.validate()?;
    let n = inst.n;
    let ix = Ix { n };
    let mut a = Formulation::new(Model::D2B, n, 2 * n + 1, true);
    a.objective = objective_xx(&ix, &inst.q);
    sums_and_diag_uu(&mut a, &ix, inst.rho as f64, |_| {});
    for i in 0..n {
        // diag(Sxu) = x
        a.eq(Lin::default().term(ix.x(i), ix.u(i), 1.0).term(0, ix.x(i), -1.0));
    }
    a.mark_model_end();
    corner_pin(&mut a);
    kernel_rows(&mut a, &ix, inst.rho as f64);
    for i in 0..n {
        for j in 0..n {
            a.ineq(Lin::default().term(0, ix.x(i), 1.0).term(ix.x(i), ix.u(j), -1.0));
        }
    }
    for i in 0..n {
        for j in i..n {
            a.ineq(Lin::default()
                .constant(1.0)
                .term(0, ix.u(j), -1.0)
                .term(0, ix.u(i), -1.0)
                .term(ix.u(i), ix.u(j), 1.0));
        }
    }
    for i in 0..n {
        for j in 0..n {
            // u eᵀ − Suu
            a.ineq(Lin::default().term(0, ix.u(i), 1.0).term(ix.u(i), ix.u(j), -1.0));
        }
    }
    Ok(a)
}

/// `μ(Q) = min ⟨Q,X⟩  s.t.  ⟨E,X⟩ = 1,  X DNN of order n`.
pub fn build_stqp_dnn(q: &SymMatrix) -> Result<BuiltModel> {
    let n = q.order();
    let mut a = Formulation::new(Model::Mu, n, n, true);
    let mut total = Lin::default().constant(-1.0);
    let mut obj = Lin::default();
    for i in 0..n {
        for j in 0..n {
            total = total.term(i, j, 1.0);
            obj = obj.term(i, j, q.get(i, j));
        }
    }
    a.eq(total);
    a.mark_model_end();
    a.objective = obj;
    a.finish(q)
}

pub fn build(model: Model, inst: &SparseStqpInstance) -> Result<BuiltModel> {
    match model {
        Model::D1A => build_d1a(inst),
        Model::D1B => build_d1b(inst),
        Model::D2A => build_d2a(inst),
        Model::D2B => build_d2b(inst),
        Model::Mu => build_stqp_dnn(&inst.q),
    }
}

pub(crate) fn formulate(model: Model, inst: &SparseStqpInstance) -> Result<Formulation> {
    match model {
        Model::D1A => formulate_d1a(inst),
        Model::D1B => formulate_d1b(inst),
        Model::D2A => formulate_d2a(inst),
        Model::D2B => formulate_d2b(inst),
        Model::Mu => Err(Error::Parameter("the plain relaxation has no lifted form".into())),
    }
}

fn matrix_block(sol: &ConicSolution, map: &IndexMap) -> Result<SymMatrix> {
    if sol.z.len() < map.psd_dim() {
        return Err(Error::Dimension("solution shorter than the matrix block".into()));
    }
    smat(&sol.z[..map.psd_dim()])
}

fn require_accepted(sol: &ConicSolution, settings: &SolverSettings) -> Result<()> {
    if sol.is_accepted(settings) {
        Ok(())
    } else {
        Err(Error::Status(format!(
            "{} (primal {:.2e}, dual {:.2e}, gap {:.2e})",
            sol.status, sol.residuals.primal, sol.residuals.dual, sol.residuals.gap
        )))
    }
}

/// Bound and lifted blocks of a solved lifted model. The bound is recomputed
/// as `⟨Q, M^{xx}⟩` from the returned matrix, not taken from the solver.
pub fn extract_bound(
    sol: &ConicSolution,
    map: &IndexMap,
    settings: &SolverSettings,
) -> Result<(f64, LiftedSolution)> {
    require_accepted(sol, settings)?;
    let variant = map
        .model
        .variant()
        .ok_or_else(|| Error::Parameter("extract_mu handles the plain relaxation".into()))?;
    let lifted = LiftedSolution::from_bordered(variant, map.n, matrix_block(sol, map)?)?;
    Ok((lifted.objective(&map.q), lifted))
}

/// `μ(Q)` and the matrix `X` of a solved plain relaxation.
pub fn extract_mu(
    sol: &ConicSolution,
    map: &IndexMap,
    settings: &SolverSettings,
) -> Result<(f64, SymMatrix)> {
    require_accepted(sol, settings)?;
    if map.model != Model::Mu {
        return Err(Error::Parameter("extract_bound handles lifted models".into()));
    }
    let x = matrix_block(sol, map)?;
    Ok((map.q.inner(&x), x))
}

/// Builds, solves and reads off `μ(Q)` in one go.
pub fn solve_mu(q: &SymMatrix, settings: &SolverSettings) -> Result<(f64, SymMatrix)> {
    let built = build_stqp_dnn(q)?;
    let sol = crate::conic::solve(&built.problem, settings)?;
    extract_mu(&sol, &built.map, settings)
}

/// Conic-program coordinates of a lifted solution: the packed matrix, its
/// shadows (full DNN models) and the inequality slacks evaluated exactly.
pub fn embed(lifted: &LiftedSolution, built: &BuiltModel) -> Result<Vec<f64>> {
    let map = &built.map;
    if map.model.variant() != Some(lifted.variant()) || lifted.n() != map.n {
        return Err(Error::Parameter("lifted solution does not match the model".into()));
    }
    let m = lifted.bordered();
    let p = map.psd_dim();
    let mut z = svec(m);
    if map.full_dnn {
        for j in 0..map.order {
            for i in j..map.order {
                z.push(m.get(i, j));
            }
        }
    }
    z.resize(built.problem.num_vars(), 0.0);
    // recover slacks row by row: s = b_r − (A z)_r restricted to non-slack columns
    let first_ineq = map.model_equalities + map.corner_rows + map.kernel_rows;
    let mut partial = vec![0.0; map.inequality_rows];
    for &(r, col, v) in &built.problem.a {
        if r >= first_ineq && r < first_ineq + map.inequality_rows && col < p {
            partial[r - first_ineq] += v * z[col];
        }
    }
    for t in 0..map.inequality_rows {
        z[map.slack_offset + t] = built.problem.b[first_ineq + t] - partial[t];
    }
    Ok(z)
}
