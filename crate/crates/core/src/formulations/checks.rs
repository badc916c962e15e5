//! Relation checkers for lifted solutions. Each relation reports its worst
//! absolute violation; an identity-with-sign relation `A = B ≥ O` counts both
//! `|A − B|` and the negative part of `B`.

use super::{formulate, LiftedSolution, Model, Part, SparseStqpInstance, Variant};
use crate::error::{Error, Result};
use crate::linalg::min_eigenvalue;

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    /// Relation label and worst violation, in evaluation order.
    pub entries: Vec<(String, f64)>,
    pub max: f64,
    pub tol: f64,
    pub pass: bool,
}

impl ResidualReport {
    fn from_entries(entries: Vec<(String, f64)>, tol: f64) -> Self {
        let max = entries.iter().fold(0.0_f64, |m, e| m.max(e.1));
        ResidualReport {
            entries,
            max,
            tol,
            pass: max <= tol,
        }
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.0 == label).map(|e| e.1)
    }

    /// Labels whose violation exceeds the tolerance.
    pub fn failing(&self) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| e.1 > self.tol)
            .map(|e| e.0.as_str())
            .collect()
    }
}

struct Acc {
    entries: Vec<(String, f64)>,
}

impl Acc {
    fn new() -> Self {
        Acc { entries: Vec::new() }
    }

    fn record(&mut self, label: &str, value: f64) {
        let v = if value.is_nan() { f64::INFINITY } else { value };
        match self.entries.iter_mut().find(|e| e.0 == label) {
            Some(e) => e.1 = e.1.max(v),
            None => self.entries.push((label.to_string(), v.max(0.0))),
        }
    }

    /// `lhs = rhs ≥ 0`.
    fn identity_nonneg(&mut self, label: &str, lhs: f64, rhs: f64) {
        self.record(label, (lhs - rhs).abs().max(-rhs));
    }

    /// `value ≥ 0`.
    fn nonneg(&mut self, label: &str, value: f64) {
        self.record(label, -value);
    }

    /// `lhs = rhs`.
    fn equal(&mut self, label: &str, lhs: f64, rhs: f64) {
        self.record(label, (lhs - rhs).abs());
    }
}

fn expect(sol: &LiftedSolution, variant: Variant) -> Result<()> {
    if sol.variant() != variant {
        return Err(Error::Parameter(format!(
            "expected a {variant:?} solution, got {:?}",
            sol.variant()
        )));
    }
    Ok(())
}

/// The ten relations every D1A-feasible `Z` satisfies: five block identities
/// with nonnegativity and five diagonal identities.
pub fn check_lemma_d1a(z: &LiftedSolution, tol: f64) -> Result<ResidualReport> {
    expect(z, Variant::Z)?;
    let n = z.n();
    let (x, u, v) = (z.x(), z.u(), z.v().unwrap());
    let e = |a, i, b, j| z.entry(a, i, b, j);
    use Part::{U, V, X, Y};
    let mut acc = Acc::new();
    for i in 0..n {
        for j in 0..n {
            acc.identity_nonneg("xv", x[i] - e(X, i, U, j), e(X, i, V, j));
        }
    }
    for i in 0..n {
        for j in 0..n {
            acc.identity_nonneg("xy", -e(X, i, X, j) + e(X, i, U, j), e(X, i, Y, j));
        }
    }
    for i in 0..n {
        for j in 0..n {
            let lhs = e(X, i, X, j) - e(X, i, U, j) - e(X, j, U, i) + e(U, i, U, j);
            acc.identity_nonneg("yy", lhs, e(Y, i, Y, j));
        }
    }
    for i in 0..n {
        for j in 0..n {
            acc.identity_nonneg("vv", 1.0 - u[j] - u[i] + e(U, i, U, j), e(V, i, V, j));
        }
    }
    for i in 0..n {
        for j in 0..n {
            let lhs = -x[j] + e(X, j, U, i) + u[j] - e(U, i, U, j);
            acc.identity_nonneg("vy", lhs, e(V, i, Y, j));
        }
    }
    for i in 0..n {
        acc.equal("diag_xu", e(X, i, U, i), x[i]);
        acc.equal("diag_xv", e(X, i, V, i), 0.0);
        acc.equal("diag_vy", e(V, i, Y, i), 0.0);
        acc.equal("diag_vv", e(V, i, V, i), v[i]);
        acc.equal("diag_uv", e(U, i, V, i), 0.0);
    }
    Ok(ResidualReport::from_entries(acc.entries, tol))
}

/// Consequences of D1B feasibility: `W` is DNN, `Wuu ≥ Wxuᵀ`, `Wuu ≤ ueᵀ`,
/// `u ≤ e` and `x ≤ u`.
pub fn check_lemma_d1b(w: &LiftedSolution, tol: f64) -> Result<ResidualReport> {
    expect(w, Variant::W)?;
    let n = w.n();
    let (x, u) = (w.x(), w.u());
    let e = |a, i, b, j| w.entry(a, i, b, j);
    use Part::{U, X};
    let mut acc = Acc::new();
    acc.nonneg("dnn_psd", min_eigenvalue(w.bordered())?);
    acc.nonneg("dnn_nonneg", w.bordered().min_entry());
    for i in 0..n {
        for j in 0..n {
            acc.nonneg("uu_minus_xu_t", -e(X, j, U, i) + e(U, i, U, j));
        }
    }
    for i in 0..n {
        for j in 0..n {
            acc.nonneg("ue_minus_uu", u[i] - e(U, i, U, j));
        }
    }
    for i in 0..n {
        acc.nonneg("u_le_e", 1.0 - u[i]);
    }
    for i in 0..n {
        acc.nonneg("x_le_u", u[i] - x[i]);
    }
    Ok(ResidualReport::from_entries(acc.entries, tol))
}

/// The seven relations every D2A-feasible `Y` satisfies: three block
/// identities with nonnegativity and four diagonal identities.
pub fn check_lemma_d2a(y: &LiftedSolution, tol: f64) -> Result<ResidualReport> {
    expect(y, Variant::Y)?;
    let n = y.n();
    let (x, u, v) = (y.x(), y.u(), y.v().unwrap());
    let e = |a, i, b, j| y.entry(a, i, b, j);
    use Part::{U, V, X};
    let mut acc = Acc::new();
    for i in 0..n {
        for j in 0..n {
            acc.identity_nonneg("xv", x[i] - e(X, i, U, j), e(X, i, V, j));
        }
    }
    for i in 0..n {
        for j in 0..n {
            acc.identity_nonneg("vv", 1.0 - u[j] - u[i] + e(U, i, U, j), e(V, i, V, j));
        }
    }
    for i in 0..n {
        for j in 0..n {
            acc.identity_nonneg("uv", u[i] - e(U, i, U, j), e(U, i, V, j));
        }
    }
    for i in 0..n {
        acc.equal("diag_xv", e(X, i, V, i), 0.0);
        acc.equal("diag_xu", e(X, i, U, i), x[i]);
        acc.equal("diag_vv", e(V, i, V, i), v[i]);
        acc.equal("diag_uv", e(U, i, V, i), 0.0);
    }
    Ok(ResidualReport::from_entries(acc.entries, tol))
}

/// Feasibility of `sol` for `model` evaluated constraint by constraint from
/// the matrix entries: equalities, inequalities, PSD and (for DNN models)
/// entrywise nonnegativity.
pub fn check_feasibility(
    model: Model,
    inst: &SparseStqpInstance,
    sol: &LiftedSolution,
    tol: f64,
) -> Result<ResidualReport> {
    let f = formulate(model, inst)?;
    if model.variant() != Some(sol.variant()) || sol.n() != inst.n {
        return Err(Error::Parameter(format!(
            "{:?} solution does not fit model {model}",
            sol.variant()
        )));
    }
    let m = sol.bordered();
    let mut acc = Acc::new();
    // kernel rows are consequences of these plus PSD-ness, so they are not rechecked
    let own = f.model_equalities + f.corner_rows;
    for (k, lin) in f.equalities[..own].iter().enumerate() {
        let label = if k < f.model_equalities { "equalities" } else { "corner" };
        acc.record(label, lin.eval(m).abs());
    }
    acc.record("inequalities", 0.0);
    for lin in &f.inequalities {
        acc.nonneg("inequalities", lin.eval(m));
    }
    acc.nonneg("psd", min_eigenvalue(m)?);
    if f.full_dnn {
        acc.nonneg("nonneg", m.min_entry());
    }
    Ok(ResidualReport::from_entries(acc.entries, tol))
}
