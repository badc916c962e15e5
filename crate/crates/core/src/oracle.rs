//! Exact optima of small (sparse) StQPs by complete enumeration.
//!
//! A global minimizer of `xᵀQx` over the simplex is a KKT point of the face
//! spanned by its support `T`: `Q_TT x_T = λ e`, `eᵀx_T = 1`, `x_T ≥ 0`. Solving
//! that bordered system for every `T` and keeping the nonnegative solutions
//! therefore visits the optimum whatever the inertia of `Q`. Faces whose system
//! is singular are skipped; their minimizers show up again on a smaller face.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::formulations::LiftedSolution;
use crate::linalg::{solve_symmetric_linear, LinearSolve, SymMatrix};

/// Largest order accepted by [`stqp_exact`].
pub const MAX_EXACT_ORDER: usize = 20;
/// Default cap on elementary bordered solves for [`sparse_stqp_exact`].
pub const DEFAULT_BUDGET: f64 = 5e7;
/// Entries in `[CLAMP, −CLAMP]` are set to zero; anything more negative
/// disqualifies the candidate.
const CLAMP: f64 = -1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub value: f64,
    /// Point of `F_n` attaining `value`.
    pub minimizer: Vec<f64>,
    /// Indices of the positive entries of `minimizer`, ascending.
    pub support: Vec<usize>,
    /// Bordered systems whose solution was nonnegative.
    pub candidates_evaluated: u64,
    /// Bordered systems solved.
    pub budget_used: u64,
}

/// Best candidate over the faces of a principal submatrix.
struct Best {
    value: f64,
    /// Local coordinates, one per index of the submatrix.
    x: Vec<f64>,
    candidates: u64,
    solves: u64,
}

fn enumerate_faces(q: &SymMatrix) -> Result<Best> {
    let d = q.order();
    let mut best = Best {
        value: f64::INFINITY,
        x: vec![0.0; d],
        candidates: 0,
        solves: 0,
    };
    let mut idx = Vec::with_capacity(d);
    for mask in 1u64..(1u64 << d) {
        idx.clear();
        idx.extend((0..d).filter(|&i| mask >> i & 1 == 1));
        let k = idx.len();
        best.solves += 1;
        let xt = if k == 1 {
            vec![1.0]
        } else {
            // [Q_TT e; eᵀ 0] (x, t) = (0, 1), λ = −t
            let kkt = SymMatrix::from_lower_fn(k + 1, |i, j| match (i == k, j == k) {
                (false, false) => q.get(idx[i], idx[j]),
                (true, true) => 0.0,
                _ => 1.0,
            });
            let mut rhs = vec![0.0; k + 1];
            rhs[k] = 1.0;
            match solve_symmetric_linear(&kkt, &rhs)? {
                LinearSolve::Singular => continue,
                LinearSolve::Solved(mut sol) => {
                    sol.truncate(k);
                    sol
                }
            }
        };
        if xt.iter().any(|&v| !(v >= CLAMP)) {
            continue;
        }
        // entries within rounding of zero belong to a smaller face
        let mut xt: Vec<f64> = xt.iter().map(|&v| if v <= -CLAMP { 0.0 } else { v }).collect();
        let total: f64 = xt.iter().sum();
        xt.iter_mut().for_each(|v| *v /= total);
        best.candidates += 1;
        let mut value = 0.0;
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                value += xt[a] * q.get(i, j) * xt[b];
            }
        }
        if value < best.value {
            best.value = value;
            best.x.iter_mut().for_each(|v| *v = 0.0);
            for (a, &i) in idx.iter().enumerate() {
                best.x[i] = xt[a];
            }
        }
    }
    Ok(best)
}

fn support_of(x: &[f64]) -> Vec<usize> {
    (0..x.len()).filter(|&i| x[i] > 0.0).collect()
}

/// `ℓ_n(Q) = min xᵀQx` over the simplex, by enumerating all `2^d − 1` faces.
pub fn stqp_exact(q: &SymMatrix) -> Result<OracleResult> {
    let d = q.order();
    if d > MAX_EXACT_ORDER {
        return Err(Error::Budget {
            needed: 2f64.powi(d as i32),
            budget: 2f64.powi(MAX_EXACT_ORDER as i32),
        });
    }
    let best = enumerate_faces(q)?;
    Ok(OracleResult {
        value: best.value,
        support: support_of(&best.x),
        minimizer: best.x,
        candidates_evaluated: best.candidates,
        budget_used: best.solves,
    })
}

/// `C(n, k)` in floating point (exact for the sizes that pass the budget).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Elementary solves needed by [`sparse_stqp_exact`]: `C(n, ρ)·2^ρ`.
pub fn sparse_cost(n: usize, rho: usize) -> f64 {
    let r = rho.min(n);
    binomial(n, r) * 2f64.powi(r as i32)
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        out.push(c.clone());
        let Some(i) = (0..k).rev().find(|&i| c[i] < n - k + i) else {
            return out;
        };
        c[i] += 1;
        for j in i + 1..k {
            c[j] = c[j - 1] + 1;
        }
    }
}

/// `ℓ_ρ(Q)`: the best StQP optimum over all supports of size `min(ρ, n)`.
/// Smaller supports are faces of larger ones and need no separate pass.
/// Supports are processed in parallel; ties go to the lexicographically first
/// support, so the result does not depend on the number of workers.
pub fn sparse_stqp_exact(q: &SymMatrix, rho: usize, budget: f64) -> Result<OracleResult> {
    let n = q.order();
    if rho == 0 {
        return Err(Error::Parameter("rho must be at least 1".into()));
    }
    let r = rho.min(n);
    let needed = sparse_cost(n, r);
    if needed > budget {
        return Err(Error::Budget { needed, budget });
    }
    if r > MAX_EXACT_ORDER {
        return Err(Error::Budget {
            needed,
            budget: 2f64.powi(MAX_EXACT_ORDER as i32),
        });
    }
    let supports = combinations(n, r);
    let results: Vec<Result<(usize, Best)>> = supports
        .par_iter()
        .enumerate()
        .map(|(k, s)| enumerate_faces(&q.principal(s)).map(|b| (k, b)))
        .collect();
    let mut best: Option<(usize, Best)> = None;
    let (mut candidates, mut solves) = (0, 0);
    for res in results {
        let (k, b) = res?;
        candidates += b.candidates;
        solves += b.solves;
        // strict improvement keeps the earliest support on ties
        if best.as_ref().is_none_or(|(_, cur)| b.value < cur.value) {
            best = Some((k, b));
        }
    }
    let (k, b) = best.expect("at least one support");
    let mut x = vec![0.0; n];
    for (a, &i) in supports[k].iter().enumerate() {
        x[i] = b.x[a];
    }
    Ok(OracleResult {
        value: b.value,
        support: support_of(&x),
        minimizer: x,
        candidates_evaluated: candidates,
        budget_used: solves,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CopositivityCheck {
    pub copositive: bool,
    /// `min uᵀMu` over the simplex.
    pub value: f64,
    /// A minimizer; a violating direction when not copositive.
    pub witness: Vec<f64>,
}

/// `M` is copositive iff its StQP optimum is nonnegative (up to `−1e−9`).
pub fn copositive_check_bruteforce(m: &SymMatrix) -> Result<CopositivityCheck> {
    let r = stqp_exact(m)?;
    Ok(CopositivityCheck {
        copositive: r.value >= -1e-9,
        value: r.value,
        witness: r.minimizer,
    })
}

/// Indices of the `k` largest entries of `score`, ties to the smaller index.
fn top_k(score: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..score.len()).collect();
    idx.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// A feasible point of `F_ρ` and its value, hence an upper bound on `ℓ_ρ(Q)`.
/// Candidate supports are the `ρ` largest entries of the hint's `x` and of its
/// `u`, or the `ρ` smallest diagonal entries without a hint; each is solved
/// exactly and the better one is kept.
pub fn upper_bound_heuristic(
    q: &SymMatrix,
    rho: usize,
    hint: Option<&LiftedSolution>,
) -> Result<(f64, Vec<f64>)> {
    let n = q.order();
    if rho == 0 {
        return Err(Error::Parameter("rho must be at least 1".into()));
    }
    let r = rho.min(n).min(MAX_EXACT_ORDER);
    let supports = match hint {
        Some(h) => {
            if h.n() != n {
                return Err(Error::Dimension("hint does not match Q".into()));
            }
            vec![top_k(&h.x(), r), top_k(&h.u(), r)]
        }
        None => {
            let neg_diag: Vec<f64> = q.diagonal().iter().map(|v| -v).collect();
            vec![top_k(&neg_diag, r)]
        }
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for s in supports {
        let b = enumerate_faces(&q.principal(&s))?;
        if best.as_ref().is_none_or(|(v, _)| b.value < *v) {
            let mut x = vec![0.0; n];
            for (a, &i) in s.iter().enumerate() {
                x[i] = b.x[a];
            }
            best = Some((b.value, x));
        }
    }
    Ok(best.expect("at least one candidate support"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulations::Variant;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(n: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
        SymMatrix::from_lower_fn(n, |_, _| rng.random_range(-1.0..1.0))
    }

    /// Dense grid over the simplex in dimension ≤ 3, as an independent check.
    fn grid_min(q: &SymMatrix, steps: usize) -> f64 {
        let n = q.order();
        let mut best = f64::INFINITY;
        let mut rec = |x: &[f64]| best = best.min(q.quad_form(x));
        match n {
            1 => rec(&[1.0]),
            2 => (0..=steps).for_each(|a| {
                let t = a as f64 / steps as f64;
                rec(&[t, 1.0 - t])
            }),
            3 => {
                for a in 0..=steps {
                    for b in 0..=steps - a {
                        let (s, t) = (a as f64 / steps as f64, b as f64 / steps as f64);
                        rec(&[s, t, 1.0 - s - t]);
                    }
                }
            }
            _ => unreachable!(),
        }
        best
    }

    #[test]
    fn identity_gives_barycenter() {
        for d in 1..7 {
            let r = stqp_exact(&SymMatrix::identity(d)).unwrap();
            assert!((r.value - 1.0 / d as f64).abs() < 1e-14);
            assert!(r.minimizer.iter().all(|&v| (v - 1.0 / d as f64).abs() < 1e-14));
            assert_eq!(r.support.len(), d);
        }
    }

    #[test]
    fn two_by_two_diagonal() {
        let r = stqp_exact(&SymMatrix::from_diagonal(&[1.0, 2.0])).unwrap();
        assert!((r.value - 2.0 / 3.0).abs() < 1e-14);
        assert!((r.minimizer[0] - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn sparse_with_rho_one_is_min_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let n = rng.random_range(1..9);
            let q = random_sym(n, &mut rng);
            let r = sparse_stqp_exact(&q, 1, DEFAULT_BUDGET).unwrap();
            let min_diag = q.diagonal().into_iter().fold(f64::INFINITY, f64::min);
            assert_eq!(r.value, min_diag);
            assert_eq!(r.support.len(), 1);
        }
    }

    #[test]
    fn budget_error_names_the_cost() {
        let q = SymMatrix::identity(25);
        match sparse_stqp_exact(&q, 10, DEFAULT_BUDGET) {
            Err(Error::Budget { needed, budget }) => {
                assert_eq!(needed, binomial(25, 10) * 1024.0);
                assert!((needed - 3.3e9).abs() < 0.1e9);
                assert_eq!(budget, DEFAULT_BUDGET);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(stqp_exact(&SymMatrix::identity(21)), Err(Error::Budget { .. })));
    }

    #[test]
    fn copositivity_examples() {
        let c = copositive_check_bruteforce(&SymMatrix::identity(4)).unwrap();
        assert!(c.copositive);
        let mut m = SymMatrix::identity(4);
        m.set(2, 2, -1.0);
        let c = copositive_check_bruteforce(&m).unwrap();
        assert!(!c.copositive);
        assert_eq!(c.witness, vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn heuristic_with_exact_support_hint_is_tight() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let q = random_sym(7, &mut rng);
        let exact = sparse_stqp_exact(&q, 3, DEFAULT_BUDGET).unwrap();
        let mut u = vec![0.0; 7];
        let pad: Vec<usize> = (0..7).filter(|i| !exact.support.contains(i)).collect();
        for &i in exact.support.iter().chain(pad.iter()).take(3) {
            u[i] = 1.0;
        }
        let hint = LiftedSolution::rank_one(Variant::W, &exact.minimizer, &u).unwrap();
        let (v, x) = upper_bound_heuristic(&q, 3, Some(&hint)).unwrap();
        assert!((v - exact.value).abs() < 1e-12);
        assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let (v, _) = upper_bound_heuristic(&q, 1, None).unwrap();
        assert_eq!(v, q.diagonal().into_iter().fold(f64::INFINITY, f64::min));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn matches_grid_search_in_low_dimension(
            entries in proptest::collection::vec(-2.0f64..2.0, 6),
            n in 1usize..4,
        ) {
            let q = SymMatrix::from_lower_fn(n, |i, j| entries[i * (i + 1) / 2 + j]);
            let r = stqp_exact(&q).unwrap();
            let g = grid_min(&q, 400);
            // the grid only approaches the optimum from above
            prop_assert!(r.value <= g + 1e-12);
            prop_assert!(g - r.value <= 0.05);
            prop_assert!((q.quad_form(&r.minimizer) - r.value).abs() <= 1e-10);
        }

        #[test]
        fn invariants_on_random_matrices(seed in 0u64..1000, n in 2usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = random_sym(n, &mut rng);
            let full = stqp_exact(&q).unwrap();
            let mut prev = f64::INFINITY;
            for rho in 1..=n {
                let r = sparse_stqp_exact(&q, rho, DEFAULT_BUDGET).unwrap();
                prop_assert!(r.support.len() <= rho);
                prop_assert!(r.minimizer.iter().all(|&v| v >= 0.0));
                prop_assert!((r.minimizer.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                prop_assert!((q.quad_form(&r.minimizer) - r.value).abs() <= 1e-10);
                // monotone in ρ and bounded by the unconstrained optimum
                prop_assert!(r.value <= prev + 1e-12);
                prop_assert!(r.value >= full.value - 1e-12);
                let (ub, _) = upper_bound_heuristic(&q, rho, None).unwrap();
                prop_assert!(ub >= r.value - 1e-9);
                prev = r.value;
            }
            prop_assert!((prev - full.value).abs() <= 1e-12);
        }

        #[test]
        fn scale_covariance(seed in 0u64..1000, alpha in 0.1f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = random_sym(6, &mut rng);
            let a = sparse_stqp_exact(&q, 3, DEFAULT_BUDGET).unwrap();
            let b = sparse_stqp_exact(&q.scaled(alpha), 3, DEFAULT_BUDGET).unwrap();
            prop_assert!((b.value - alpha * a.value).abs() <= 1e-10 * (1.0 + a.value.abs() * alpha));
            prop_assert_eq!(a.support, b.support);
        }
    }
}
