//! Generators for sparse StQP instances with a known unique StQP minimizer
//! `x*` whose support is larger than `ρ`, so the cardinality bound is active.
//!
//! All families share `Q = (I − e x*ᵀ) R (I − x* eᵀ) + N + λE`. For `y ∈ F_n`
//! this gives `yᵀQy = (y − x*)ᵀR(y − x*) + yᵀNy + λ`, which is minimized only
//! at `x*` when `R_AA ≻ 0`, `R_AB = O`, `R_BB` is copositive and `N ≥ O` with
//! `N_AA = O` (`A` is the support of `x*`, `B` its complement).
//!
//! * PSD: `R ≻ 0`, `N = O`; `Q` is PSD and singular, DNN relaxation exact.
//! * SPN: as PSD plus a nonnegative `N` off the `AA` block; usually indefinite.
//! * COP: `R_BB` embeds the Horn matrix, `R_AA` is small enough that the
//!   Horn separator certifies `μ(Q) < 0 = ℓ_n(Q)`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::conic::SolverSettings;
use crate::error::{Error, Result};
use crate::formulations::{solve_mu, Family, InstanceMeta, SparseStqpInstance};
use crate::linalg::{min_eigenvalue, random_spd_with_spectrum, sym_eig, SymMatrix};
use crate::oracle;

/// Dirichlet draws below this are redrawn so the support size is unambiguous.
const MIN_ENTRY: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub family: Family,
    pub n: usize,
    pub rho0: usize,
    pub rho: usize,
    pub seed: u64,
    pub lambda: f64,
    /// Spectrum of `R` (PSD/SPN) and of the `B` block (COP).
    pub r_spectrum: (f64, f64),
    /// Entry range of `N_AB`, `N_BB` (SPN).
    pub n_entries: (f64, f64),
    /// Entry range of the coupling block `C` (COP).
    pub c_entries: (f64, f64),
    /// `R_AA` eigenvalues are drawn from `(0, r_aa_cap·ε)` (COP).
    pub r_aa_cap: f64,
}

impl GeneratorConfig {
    pub fn new(family: Family, n: usize, rho0: usize, rho: usize, seed: u64) -> Self {
        GeneratorConfig {
            family,
            n,
            rho0,
            rho,
            seed,
            lambda: 0.0,
            r_spectrum: (0.0, 3.0),
            n_entries: (0.0, 3.0),
            c_entries: (0.0, 1.0),
            r_aa_cap: 0.99,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        let (n, rho0, rho) = (self.n, self.rho0, self.rho);
        match self.family {
            Family::Psd | Family::Spn => {
                if n < 2 {
                    return bad(format!("n = {n} must be at least 2"));
                }
                if !(2..=n).contains(&rho0) {
                    return bad(format!("rho0 = {rho0} must lie in [2, {n}]"));
                }
            }
            Family::Cop => {
                if n < 7 {
                    return bad(format!("n = {n} must be at least 7 for the cop family"));
                }
                if !(2..=n - 5).contains(&rho0) {
                    return bad(format!("rho0 = {rho0} must lie in [2, {}]", n - 5));
                }
            }
            Family::Custom => return bad("custom instances are not generated".into()),
        }
        if !(1..rho0).contains(&rho) {
            return bad(format!("rho = {rho} must lie in [1, {}]", rho0 - 1));
        }
        if !self.lambda.is_finite() {
            return bad("lambda must be finite".into());
        }
        for (name, (lo, hi)) in [
            ("r_spectrum", self.r_spectrum),
            ("n_entries", self.n_entries),
            ("c_entries", self.c_entries),
        ] {
            if !(lo >= 0.0 && lo < hi && hi.is_finite()) {
                return bad(format!("{name} = ({lo}, {hi}) must satisfy 0 <= lo < hi"));
            }
        }
        if !(self.r_aa_cap > 0.0 && self.r_aa_cap < 1.0) {
            return bad(format!("r_aa_cap = {} must lie in (0, 1)", self.r_aa_cap));
        }
        Ok(())
    }
}

/// A DNN matrix `T` separating an exceptional copositive matrix from SPN.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparationCertificate {
    pub f: SymMatrix,
    /// `−⟨H, F⟩ > 0`.
    pub delta: f64,
    /// `eᵀFe > 0`.
    pub mu_sep: f64,
    /// `delta / mu_sep`.
    pub epsilon: f64,
}

impl SeparationCertificate {
    fn from_f(f: SymMatrix) -> Result<Self> {
        let delta = -horn().inner(&f);
        let mu_sep = f.sum();
        if !(delta > 0.0 && mu_sep > 0.0) {
            return Err(Error::Numerical {
                context: format!("separator does not separate (delta {delta}, mu {mu_sep})"),
                residual: delta.min(mu_sep),
            });
        }
        Ok(SeparationCertificate {
            f,
            delta,
            mu_sep,
            epsilon: delta / mu_sep,
        })
    }
}

/// The Horn matrix: copositive, not SPN, extreme in the copositive cone.
pub fn horn() -> SymMatrix {
    let rows = [
        [1.0, -1.0, 1.0, 1.0, -1.0],
        [-1.0, 1.0, -1.0, 1.0, 1.0],
        [1.0, -1.0, 1.0, -1.0, 1.0],
        [1.0, 1.0, -1.0, 1.0, -1.0],
        [-1.0, 1.0, 1.0, -1.0, 1.0],
    ];
    SymMatrix::from_lower_fn(5, |i, j| rows[i][j])
}

/// The tabulated circulant separator of the Horn matrix, scaled so `eᵀFe = 1`.
pub fn separating_f() -> SeparationCertificate {
    let f = SymMatrix::from_lower_fn(5, |i, j| match (i + 5 - j) % 5 {
        0 => 7.0 / 78.2,
        1 | 4 => 4.32 / 78.2,
        _ => 0.0,
    });
    SeparationCertificate::from_f(f).expect("tabulated separator is valid")
}

/// Best Horn separator: `max −⟨H,F⟩ s.t. eᵀFe = 1, F DNN`, which is `−μ(H)`.
pub fn epsilon_via_sdp(settings: &SolverSettings) -> Result<SeparationCertificate> {
    let (_, f) = solve_mu(&horn(), settings)?;
    SeparationCertificate::from_f(f)
}

/// `(I − e xᵀ) R (I − x eᵀ)`, entrywise `R_ij − r_i − r_j + xᵀRx` with `r = Rx`,
/// which is symmetric by construction.
fn projected(r: &SymMatrix, x: &[f64]) -> SymMatrix {
    let rx = r.mul_vec(x);
    let s: f64 = rx.iter().zip(x).map(|(a, b)| a * b).sum();
    SymMatrix::from_lower_fn(r.order(), |i, j| r.get(i, j) - rx[i] - rx[j] + s)
}

/// Support of size `rho0` uniformly at random, with symmetric Dirichlet weights.
fn draw_xstar<R: Rng + ?Sized>(n: usize, rho0: usize, rng: &mut R) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut support = idx[..rho0].to_vec();
    support.sort_unstable();
    loop {
        let g: Vec<f64> = (0..rho0).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = g.iter().sum();
        let w: Vec<f64> = g.iter().map(|v| v / total).collect();
        if w.iter().all(|&v| v >= MIN_ENTRY) {
            let mut x = vec![0.0; n];
            for (&i, &v) in support.iter().zip(&w) {
                x[i] = v;
            }
            // renormalise so the stored vector sums to 1 to the last bit possible
            let s: f64 = x.iter().sum();
            x.iter_mut().for_each(|v| *v /= s);
            return (x, support);
        }
    }
}

fn complement(n: usize, support: &[usize]) -> Vec<usize> {
    (0..n).filter(|i| !support.contains(i)).collect()
}

fn finish(cfg: &GeneratorConfig, q: SymMatrix, x: Vec<f64>) -> Result<SparseStqpInstance> {
    let q = SymMatrix::from_lower_fn(cfg.n, |i, j| q.get(i, j) + cfg.lambda);
    let meta = InstanceMeta {
        family: cfg.family,
        rho0: Some(cfg.rho0),
        xstar: Some(x),
        lambda: cfg.lambda,
        seed: cfg.seed,
    };
    SparseStqpInstance::with_meta(q, cfg.rho, meta)
}

/// Exact-DNN instances (PSD and SPN families).
pub fn gen_algorithm1<R: Rng + ?Sized>(
    cfg: &GeneratorConfig,
    rng: &mut R,
) -> Result<SparseStqpInstance> {
    cfg.validate()?;
    if !matches!(cfg.family, Family::Psd | Family::Spn) {
        return Err(Error::Parameter(format!("{} is not an exact-DNN family", cfg.family)));
    }
    let n = cfg.n;
    let (x, support) = draw_xstar(n, cfg.rho0, rng);
    let (lo, hi) = cfg.r_spectrum;
    let r = random_spd_with_spectrum(n, lo, hi, rng)?;
    let mut q = projected(&r, &x);
    if cfg.family == Family::Spn {
        let zeros = complement(n, &support);
        let (lo, hi) = cfg.n_entries;
        let draw = |rng: &mut R| loop {
            let v = rng.random_range(lo..hi);
            if v > lo {
                break v;
            }
        };
        // N_AB, then the upper triangle of N_BB mirrored
        for &a in &support {
            for &b in &zeros {
                let v = draw(rng);
                q.set(a, b, q.get(a, b) + v);
            }
        }
        for (k, &b) in zeros.iter().enumerate() {
            for &c in &zeros[k..] {
                let v = draw(rng);
                q.set(b, c, q.get(b, c) + v);
            }
        }
    }
    finish(cfg, q, x)
}

/// Pieces of a COP instance kept for checking the inexactness witness.
#[derive(Clone, Debug)]
pub struct CopConstruction {
    pub instance: SparseStqpInstance,
    pub r: SymMatrix,
    /// `T` zero-padded to order `n`; `⟨Q − λE, U⟩ < 0`.
    pub u: SymMatrix,
    pub certificate: SeparationCertificate,
}

/// Inexact-DNN instances (COP family), with the default tabulated separator.
pub fn gen_algorithm2<R: Rng + ?Sized>(
    cfg: &GeneratorConfig,
    rng: &mut R,
) -> Result<SparseStqpInstance> {
    gen_algorithm2_detailed(cfg, &separating_f(), rng).map(|c| c.instance)
}

/// As [`gen_algorithm2`], returning `R`, the padded certificate and the
/// separator used. `R_BB = [[B, C], [Cᵀ, H]]` with `H` on the last five
/// indices of the zero set of `x*`.
pub fn gen_algorithm2_detailed<R: Rng + ?Sized>(
    cfg: &GeneratorConfig,
    sep: &SeparationCertificate,
    rng: &mut R,
) -> Result<CopConstruction> {
    cfg.validate()?;
    if cfg.family != Family::Cop {
        return Err(Error::Parameter(format!("{} is not the cop family", cfg.family)));
    }
    let n = cfg.n;
    let (x, a_set) = draw_xstar(n, cfg.rho0, rng);
    let b_set = complement(n, &a_set);
    let nb = b_set.len();
    let k = nb - 5;
    let h = horn();

    let mut r = SymMatrix::zeros(n);
    let r_aa = random_spd_with_spectrum(a_set.len(), 0.0, cfg.r_aa_cap * sep.epsilon, rng)?;
    for (p, &i) in a_set.iter().enumerate() {
        for (q, &j) in a_set.iter().enumerate().take(p + 1) {
            r.set(i, j, r_aa.get(p, q));
        }
    }
    if k > 0 {
        let (lo, hi) = cfg.r_spectrum;
        let bb = random_spd_with_spectrum(k, lo, hi, rng)?;
        for p in 0..k {
            for q in 0..=p {
                r.set(b_set[p], b_set[q], bb.get(p, q));
            }
        }
        let (lo, hi) = cfg.c_entries;
        for p in 0..k {
            for q in 0..5 {
                let v = loop {
                    let v = rng.random_range(lo..hi);
                    if v > lo {
                        break v;
                    }
                };
                r.set(b_set[p], b_set[k + q], v);
            }
        }
    }
    let mut u = SymMatrix::zeros(n);
    for p in 0..5 {
        for q in 0..=p {
            r.set(b_set[k + p], b_set[k + q], h.get(p, q));
            u.set(b_set[k + p], b_set[k + q], sep.f.get(p, q));
        }
    }
    let q = projected(&r, &x);
    Ok(CopConstruction {
        instance: finish(cfg, q, x)?,
        r,
        u,
        certificate: sep.clone(),
    })
}

/// Dispatches on the family with a ChaCha8 stream seeded from `cfg.seed`.
pub fn generate(cfg: &GeneratorConfig) -> Result<SparseStqpInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    match cfg.family {
        Family::Cop => gen_algorithm2(cfg, &mut rng),
        _ => gen_algorithm1(cfg, &mut rng),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    pub use_oracle: bool,
    /// Largest `n` for which the oracle is run.
    pub oracle_cap: usize,
    pub oracle_budget: f64,
    pub solver: SolverSettings,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            use_oracle: true,
            oracle_cap: 16,
            oracle_budget: oracle::DEFAULT_BUDGET,
            solver: SolverSettings::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub mu: Option<f64>,
    pub min_eig: Option<f64>,
    pub max_eig: Option<f64>,
    pub l_n: Option<f64>,
    pub l_rho: Option<f64>,
    /// Informational only: SPN draws are expected but not guaranteed to be indefinite.
    pub indefinite: Option<bool>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn push(&mut self, name: &'static str, passed: bool, detail: String) {
        self.checks.push(Check { name, passed, detail });
    }
}

/// Checks the certified properties of a generated instance: designated
/// minimizer, family sign facts via `μ(Q)` and eigenvalues, and (optionally)
/// exact `ℓ_n`, `ℓ_ρ` by enumeration.
pub fn verify_instance(inst: &SparseStqpInstance, opts: &VerifyOptions) -> Result<VerifyReport> {
    inst.validate()?;
    let (Some(x), Some(rho0)) = (&inst.meta.xstar, inst.meta.rho0) else {
        return Err(Error::Parameter("instance carries no designated minimizer".into()));
    };
    if opts.use_oracle && inst.n > opts.oracle_cap {
        return Err(Error::Budget {
            needed: inst.n as f64,
            budget: opts.oracle_cap as f64,
        });
    }
    let lambda = inst.meta.lambda;
    let mut rep = VerifyReport::default();

    let support = x.iter().filter(|&&v| v > 0.0).count();
    let sum: f64 = x.iter().sum();
    rep.push(
        "xstar_in_simplex",
        x.iter().all(|&v| v >= 0.0) && (sum - 1.0).abs() <= 1e-12 && support == rho0,
        format!("sum {sum:.17}, support {support}, rho0 {rho0}"),
    );
    rep.push(
        "nontrivial_rho",
        rho0 > inst.rho,
        if rho0 > inst.rho {
            format!("rho {} < rho0 {rho0}", inst.rho)
        } else {
            format!("trivial: rho {} >= rho0 {rho0}, x* itself is feasible", inst.rho)
        },
    );
    let val = inst.q.quad_form(x);
    rep.push(
        "xstar_value",
        (val - lambda).abs() <= 1e-9,
        format!("x*ᵀQx* = {val:e}, lambda = {lambda}"),
    );

    let spec = sym_eig(&inst.q)?;
    rep.min_eig = Some(spec.min());
    rep.max_eig = Some(spec.max());
    // μ(Q − λE) = μ(Q) − λ, so the family facts are stated relative to λ
    let (mu, _) = solve_mu(&inst.q, &opts.solver)?;
    rep.mu = Some(mu);
    let shifted = mu - lambda;
    match inst.meta.family {
        Family::Psd => {
            let m = min_eigenvalue(&shifted_q(inst))?;
            rep.push("psd", m >= -1e-8, format!("min eig of Q − λE {m:e}"));
            rep.push("mu_exact", shifted.abs() <= 1e-5, format!("mu − lambda = {shifted:e}"));
        }
        Family::Spn => {
            rep.indefinite = Some(spec.min() < -1e-6 && spec.max() > 1e-6);
            rep.push("mu_exact", shifted.abs() <= 1e-5, format!("mu − lambda = {shifted:e}"));
        }
        Family::Cop => {
            rep.push("mu_inexact", shifted <= -1e-4, format!("mu − lambda = {shifted:e}"));
        }
        Family::Custom => {}
    }

    if opts.use_oracle {
        let full = oracle::stqp_exact(&inst.q)?;
        rep.l_n = Some(full.value);
        rep.push(
            "l_n_value",
            (full.value - lambda).abs() <= 1e-8,
            format!("l_n = {:e}", full.value),
        );
        rep.push(
            "unique_support",
            full.support.len() == rho0,
            format!("argmin support {} vs rho0 {rho0}", full.support.len()),
        );
        let sparse = oracle::sparse_stqp_exact(&inst.q, inst.rho, opts.oracle_budget)?;
        rep.l_rho = Some(sparse.value);
        rep.push(
            "l_rho_gap",
            sparse.value > lambda + 1e-6,
            format!("l_rho − lambda = {:e}", sparse.value - lambda),
        );
    }
    Ok(rep)
}

fn shifted_q(inst: &SparseStqpInstance) -> SymMatrix {
    let l = inst.meta.lambda;
    SymMatrix::from_lower_fn(inst.n, |i, j| inst.q.get(i, j) - l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn horn_entries_and_zero() {
        let h = horn();
        assert_eq!(h.quad_form(&[0.5, 0.5, 0.0, 0.0, 0.0]), 0.0);
        let spec = sym_eig(&h).unwrap();
        assert!((spec.min() - (1.0 - 5f64.sqrt())).abs() < 1e-12);
        assert!((spec.max() - (1.0 + 5f64.sqrt())).abs() < 1e-12);
        let l5 = oracle::stqp_exact(&h).unwrap();
        assert!(l5.value.abs() <= 1e-9);
        assert!(oracle::copositive_check_bruteforce(&h).unwrap().copositive);
    }

    #[test]
    fn tabulated_separator() {
        let s = separating_f();
        assert!((s.mu_sep - 1.0).abs() <= 1e-15);
        // diagonal gives 35/78.2, the ten 4.32 entries sit on H = −1
        let mut inner = 0.0;
        let h = horn();
        for i in 0..5 {
            for j in 0..5 {
                inner += h.get(i, j) * s.f.get(i, j);
            }
        }
        assert!((inner + 8.2 / 78.2).abs() < 1e-14);
        assert!((s.delta - 8.2 / 78.2).abs() < 1e-14);
        assert!((s.epsilon - 0.1049).abs() < 2e-4);
        assert_eq!(s.epsilon, s.delta / s.mu_sep);
        assert!(min_eigenvalue(&s.f).unwrap() > 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(GeneratorConfig::new(Family::Psd, 10, 5, 2, 0).validate().is_ok());
        assert!(GeneratorConfig::new(Family::Psd, 10, 5, 5, 0).validate().is_err());
        assert!(GeneratorConfig::new(Family::Psd, 10, 1, 1, 0).validate().is_err());
        assert!(GeneratorConfig::new(Family::Spn, 1, 1, 1, 0).validate().is_err());
        assert!(GeneratorConfig::new(Family::Cop, 10, 5, 2, 0).validate().is_ok());
        assert!(GeneratorConfig::new(Family::Cop, 10, 6, 2, 0).validate().is_err());
        assert!(GeneratorConfig::new(Family::Cop, 6, 1, 1, 0).validate().is_err());
        assert!(GeneratorConfig::new(Family::Custom, 10, 5, 2, 0).validate().is_err());
        let mut c = GeneratorConfig::new(Family::Spn, 10, 5, 2, 0);
        c.n_entries = (3.0, 1.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        for fam in [Family::Psd, Family::Spn, Family::Cop] {
            let cfg = GeneratorConfig::new(fam, 10, 4, 2, 42);
            let a = generate(&cfg).unwrap();
            let b = generate(&cfg).unwrap();
            let bits = |i: &SparseStqpInstance| -> Vec<u64> {
                i.q.as_slice().iter().map(|v| v.to_bits()).collect()
            };
            assert_eq!(bits(&a), bits(&b));
            assert_eq!(a, b);
            let c = generate(&GeneratorConfig { seed: 43, ..cfg }).unwrap();
            assert_ne!(bits(&a), bits(&c));
        }
    }

    #[test]
    fn exact_symmetry_and_designated_value() {
        for fam in [Family::Psd, Family::Spn, Family::Cop] {
            for seed in 0..5 {
                let inst = generate(&GeneratorConfig::new(fam, 12, 5, 3, seed)).unwrap();
                for i in 0..12 {
                    for j in 0..12 {
                        assert_eq!(inst.q.get(i, j).to_bits(), inst.q.get(j, i).to_bits());
                    }
                }
                let x = inst.meta.xstar.as_ref().unwrap();
                assert!(inst.q.quad_form(x).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn cop_block_structure() {
        let cfg = GeneratorConfig::new(Family::Cop, 12, 4, 2, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let c = gen_algorithm2_detailed(&cfg, &separating_f(), &mut rng).unwrap();
        let x = c.instance.meta.xstar.as_ref().unwrap();
        let a: Vec<usize> = (0..12).filter(|&i| x[i] > 0.0).collect();
        let b: Vec<usize> = (0..12).filter(|&i| x[i] == 0.0).collect();
        for &i in &a {
            for &j in &b {
                assert_eq!(c.r.get(i, j), 0.0);
            }
        }
        let r_aa = c.r.principal(&a);
        let top = sym_eig(&r_aa).unwrap().max();
        assert!(top > 0.0 && top < 0.99 * c.certificate.epsilon);
        let h_idx = &b[b.len() - 5..];
        assert_eq!(c.r.principal(h_idx), horn());
        // coupling block C is entrywise in (0, 1)
        for &i in &b[..b.len() - 5] {
            for &j in h_idx {
                assert!(c.r.get(i, j) > 0.0 && c.r.get(i, j) < 1.0);
            }
        }
        // R_BB is copositive
        assert!(oracle::copositive_check_bruteforce(&c.r.principal(&b)).unwrap().copositive);
    }

    #[test]
    fn cop_with_five_zeros_uses_horn_alone() {
        let cfg = GeneratorConfig::new(Family::Cop, 7, 2, 1, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = gen_algorithm2_detailed(&cfg, &separating_f(), &mut rng).unwrap();
        let x = c.instance.meta.xstar.as_ref().unwrap();
        let b: Vec<usize> = (0..7).filter(|&i| x[i] == 0.0).collect();
        assert_eq!(c.r.principal(&b), horn());
    }

    #[test]
    fn nontrivial_rho_check_reports_trivial_instances() {
        let mut inst = generate(&GeneratorConfig::new(Family::Psd, 6, 3, 2, 1)).unwrap();
        inst.rho = 3;
        let opts = VerifyOptions::default();
        let rep = verify_instance(&inst, &opts).unwrap();
        let c = rep.checks.iter().find(|c| c.name == "nontrivial_rho").unwrap();
        assert!(!c.passed);
        assert!(c.detail.contains("trivial"));
        assert!(rep.checks.iter().any(|c| c.name == "l_rho_gap" && !c.passed));
    }

    #[test]
    fn oracle_cap_is_enforced() {
        let inst = generate(&GeneratorConfig::new(Family::Psd, 10, 3, 2, 1)).unwrap();
        let opts = VerifyOptions {
            oracle_cap: 8,
            ..VerifyOptions::default()
        };
        assert!(matches!(verify_instance(&inst, &opts), Err(Error::Budget { .. })));
    }

    fn family() -> impl Strategy<Value = Family> {
        prop_oneof![Just(Family::Psd), Just(Family::Spn)]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn decomposition_identity(
            fam in family(),
            seed in 0u64..10_000,
            n in 2usize..10,
            lambda in -2.0f64..2.0,
            w in proptest::collection::vec(0.0f64..1.0, 10),
        ) {
            let rho0 = 2 + (seed as usize) % (n - 1);
            let mut cfg = GeneratorConfig::new(fam, n, rho0, 1, seed);
            cfg.lambda = lambda;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xs_rng = rng.clone();
            let inst = gen_algorithm1(&cfg, &mut rng).unwrap();
            // replay the draws to recover R and N
            let mut rng = xs_rng;
            let (x, support) = draw_xstar(n, rho0, &mut rng);
            prop_assert_eq!(Some(&x), inst.meta.xstar.as_ref());
            let r = random_spd_with_spectrum(n, 0.0, 3.0, &mut rng).unwrap();
            let p = projected(&r, &x);
            let nmat = SymMatrix::from_lower_fn(n, |i, j| inst.q.get(i, j) - lambda - p.get(i, j));
            for &a in &support {
                for &b in &support {
                    prop_assert!(nmat.get(a, b).abs() <= 1e-12);
                }
            }
            prop_assert!(nmat.min_entry() >= -1e-12);
            let s: f64 = w[..n].iter().sum::<f64>() + 1e-9;
            let y: Vec<f64> = w[..n].iter().map(|v| (v + 1e-9 / n as f64) / s).collect();
            let d: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
            let rhs = r.quad_form(&d) + nmat.quad_form(&y) + lambda;
            prop_assert!((inst.q.quad_form(&y) - rhs).abs() <= 1e-9);
            prop_assert!(inst.rho >= 1 && inst.rho < rho0);
        }

        #[test]
        fn cop_certificate_witness_is_negative(seed in 0u64..10_000, n in 7usize..14) {
            let rho0 = 2 + (seed as usize) % (n - 6);
            let cfg = GeneratorConfig::new(Family::Cop, n, rho0, 1, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = gen_algorithm2_detailed(&cfg, &separating_f(), &mut rng).unwrap();
            let m = shifted_q(&c.instance);
            let inner = m.inner(&c.u);
            let r_aa_norm = {
                let x = c.instance.meta.xstar.as_ref().unwrap();
                let a: Vec<usize> = (0..n).filter(|&i| x[i] > 0.0).collect();
                sym_eig(&c.r.principal(&a)).unwrap().max()
            };
            prop_assert!(inner < 0.0);
            prop_assert!(inner <= r_aa_norm * c.certificate.mu_sep - c.certificate.delta + 1e-12);
            prop_assert!(c.u.min_entry() >= 0.0);
            prop_assert!(min_eigenvalue(&c.u).unwrap() >= -1e-12);
        }
    }
}
