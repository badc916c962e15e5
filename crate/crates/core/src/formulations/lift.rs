//! Maps between the reduced matrices (W, S) and the full lifted ones (Z, Y).
//!
//! A lift is the congruence `L M Lᵀ`, where each row of `L` is a short sparse
//! combination of the reduced indices: `v = corner − u` and `y = u − x`. Using
//! the corner entry rather than a literal 1 keeps the lift an exact congruence,
//! so PSD-ness carries over, and with the corner pinned at 1 it coincides with
//! the block formulas `Zxv = xeᵀ − Wxu`, `Zvv = eeᵀ − euᵀ − ueᵀ + Wuu`, etc.
//! Identity rows have a single unit coefficient, so the copied block is
//! reproduced bit for bit and restriction undoes a lift exactly.

use super::{bordered_index, LiftedSolution, Part, Variant};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

type Combo = Vec<(usize, f64)>;

fn lift_rows(n: usize, with_y: bool) -> Vec<Combo> {
    let ix = |p, i| bordered_index(n, p, i);
    let mut rows: Vec<Combo> = vec![vec![(0, 1.0)]];
    rows.extend((0..n).map(|i| vec![(ix(Part::X, i), 1.0)]));
    rows.extend((0..n).map(|i| vec![(ix(Part::U, i), 1.0)]));
    rows.extend((0..n).map(|i| vec![(0, 1.0), (ix(Part::U, i), -1.0)]));
    if with_y {
        rows.extend((0..n).map(|i| vec![(ix(Part::U, i), 1.0), (ix(Part::X, i), -1.0)]));
    }
    rows
}

fn congruence(m: &SymMatrix, rows: &[Combo]) -> SymMatrix {
    SymMatrix::from_lower_fn(rows.len(), |a, b| match (&rows[a][..], &rows[b][..]) {
        // copied entries, including signed zeros
        ([(k, 1.0)], [(l, 1.0)]) => m.get(*k, *l),
        (ra, rb) => {
            let mut s = 0.0;
            for &(k, ck) in ra {
                for &(l, cl) in rb {
                    s += ck * cl * m.get(k, l);
                }
            }
            s
        }
    })
}

fn expect(sol: &LiftedSolution, variant: Variant) -> Result<()> {
    if sol.variant() == variant {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "expected a {variant:?} solution, got {:?}",
            sol.variant()
        )))
    }
}

fn lift(sol: &LiftedSolution, from: Variant, to: Variant) -> Result<LiftedSolution> {
    expect(sol, from)?;
    let n = sol.n();
    let z = congruence(sol.bordered(), &lift_rows(n, to == Variant::Z));
    LiftedSolution::from_bordered(to, n, z)
}

fn restrict(sol: &LiftedSolution, from: Variant, to: Variant) -> Result<LiftedSolution> {
    expect(sol, from)?;
    let n = sol.n();
    let m = sol.bordered();
    let w = SymMatrix::from_lower_fn(2 * n + 1, |i, j| m.get(i, j));
    LiftedSolution::from_bordered(to, n, w)
}

/// `Z` of order `4n+1` from a D1B matrix `W`.
pub fn lift_w_to_z(w: &LiftedSolution) -> Result<LiftedSolution> {
    lift(w, Variant::W, Variant::Z)
}

/// Top-left `(1, x, u)` block of `Z`.
pub fn restrict_z_to_w(z: &LiftedSolution) -> Result<LiftedSolution> {
    restrict(z, Variant::Z, Variant::W)
}

/// `Y` of order `3n+1` from a D2B matrix `S`.
pub fn lift_s_to_y(s: &LiftedSolution) -> Result<LiftedSolution> {
    lift(s, Variant::S, Variant::Y)
}

/// Top-left `(1, x, u)` block of `Y`.
pub fn restrict_y_to_s(y: &LiftedSolution) -> Result<LiftedSolution> {
    restrict(y, Variant::Y, Variant::S)
}
