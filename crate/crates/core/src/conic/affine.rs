//! Euclidean projection onto `{z : A z = b}`.
//!
//! Rows that own a private column (one no other row touches, such as an
//! inequality slack or a nonnegative shadow) are eliminated through it. What is
//! left is an SPD system `H = I + Σ a aᵀ/α²` on the remaining columns, which is
//! very sparse for the models built here, plus a small dense Schur complement
//! for the rows without a private column.

use std::collections::BTreeSet;

use super::ConicProblem;
use crate::error::{Error, Result};

/// Pivots below this fraction of the original diagonal mark a row as linearly
/// dependent on earlier ones.
const DEPENDENT_ROW_TOL: f64 = 1e-11;

/// Dense Cholesky factor that drops dependent rows (their multiplier is 0).
pub(super) struct DenseCholesky {
    m: usize,
    l: Vec<f64>,
    dropped: Vec<bool>,
}

impl DenseCholesky {
    /// Factors the symmetric `m × m` matrix whose lower triangle is in `g` (row-major).
    pub fn new(m: usize, mut g: Vec<f64>) -> Self {
        let mut dropped = vec![false; m];
        for k in 0..m {
            let orig = g[k * m + k];
            let d = orig - g[k * m..k * m + k].iter().map(|v| v * v).sum::<f64>();
            if d <= DEPENDENT_ROW_TOL * orig.max(1.0) {
                dropped[k] = true;
                g[k * m..k * m + k + 1].iter_mut().for_each(|v| *v = 0.0);
                for r in k + 1..m {
                    g[r * m + k] = 0.0;
                }
                continue;
            }
            let dk = d.sqrt();
            g[k * m + k] = dk;
            for r in k + 1..m {
                let (head, tail) = g.split_at_mut(r * m);
                let row_k = &head[k * m..k * m + k];
                let row_r = &mut tail[..k + 1];
                let s: f64 = row_k.iter().zip(&row_r[..k]).map(|(a, b)| a * b).sum();
                row_r[k] = (row_r[k] - s) / dk;
            }
        }
        DenseCholesky { m, l: g, dropped }
    }

    pub fn solve(&self, r: &mut [f64]) {
        let (m, l) = (self.m, &self.l);
        for k in 0..m {
            if self.dropped[k] {
                r[k] = 0.0;
                continue;
            }
            let s: f64 = l[k * m..k * m + k].iter().zip(&r[..k]).map(|(a, b)| a * b).sum();
            r[k] = (r[k] - s) / l[k * m + k];
        }
        for k in (0..m).rev() {
            if self.dropped[k] {
                continue;
            }
            let v = r[k] / l[k * m + k];
            r[k] = v;
            for (j, rj) in r[..k].iter_mut().enumerate() {
                *rj -= l[k * m + j] * v;
            }
        }
    }
}

/// Sparse factor `P H Pᵀ = L Lᵀ` under a greedy minimum-degree ordering.
pub(super) struct SparseCholesky {
    /// `perm[new] = old`.
    perm: Vec<usize>,
    col_ptr: Vec<usize>,
    /// Strictly-lower row indices (new numbering), ascending per column.
    row_idx: Vec<usize>,
    val: Vec<f64>,
    diag: Vec<f64>,
}

impl SparseCholesky {
    /// `entries` are `(i, j, v)` with `i ≥ j`; duplicates are summed.
    pub fn new(k: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); k];
        for &(i, j, _) in entries {
            if i != j {
                adj[i].insert(j);
                adj[j].insert(i);
            }
        }
        // ordering and symbolic factor in one pass: eliminating a node joins its neighbours
        let mut alive = vec![true; k];
        let mut perm = Vec::with_capacity(k);
        let mut patterns_old = Vec::with_capacity(k);
        for _ in 0..k {
            let v = (0..k)
                .filter(|&v| alive[v])
                .min_by_key(|&v| (adj[v].len(), v))
                .expect("a live node remains");
            alive[v] = false;
            let nbrs: Vec<usize> = std::mem::take(&mut adj[v]).into_iter().collect();
            for &a in &nbrs {
                adj[a].remove(&v);
            }
            for (t, &a) in nbrs.iter().enumerate() {
                for &b in &nbrs[t + 1..] {
                    adj[a].insert(b);
                    adj[b].insert(a);
                }
            }
            perm.push(v);
            patterns_old.push(nbrs);
        }
        let mut inv = vec![0; k];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut col_ptr = vec![0];
        let mut row_idx = Vec::new();
        for pat in &patterns_old {
            let mut rows: Vec<usize> = pat.iter().map(|&o| inv[o]).collect();
            rows.sort_unstable();
            row_idx.extend(rows);
            col_ptr.push(row_idx.len());
        }
        // columns of H in the new numbering, lower part
        let mut h_cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); k];
        for &(i, j, v) in entries {
            let (a, b) = (inv[i], inv[j]);
            let (r, c) = if a >= b { (a, b) } else { (b, a) };
            h_cols[c].push((r, v));
        }
        // rows_of[j]: earlier columns with a nonzero in row j, and its slot
        let mut rows_of: Vec<Vec<(usize, usize)>> = vec![Vec::new(); k];
        for c in 0..k {
            for s in col_ptr[c]..col_ptr[c + 1] {
                rows_of[row_idx[s]].push((c, s));
            }
        }
        let mut val = vec![0.0; row_idx.len()];
        let mut diag = vec![0.0; k];
        let mut work = vec![0.0; k];
        for j in 0..k {
            for &(r, v) in &h_cols[j] {
                work[r] += v;
            }
            for &(c, s) in &rows_of[j] {
                let ljc = val[s];
                work[j] -= ljc * ljc;
                for t in s + 1..col_ptr[c + 1] {
                    work[row_idx[t]] -= val[t] * ljc;
                }
            }
            let d = work[j];
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::Numerical {
                    context: "sparse Cholesky of the reduced projection system".into(),
                    residual: d,
                });
            }
            let dj = d.sqrt();
            diag[j] = dj;
            work[j] = 0.0;
            for s in col_ptr[j]..col_ptr[j + 1] {
                let r = row_idx[s];
                val[s] = work[r] / dj;
                work[r] = 0.0;
            }
        }
        Ok(SparseCholesky {
            perm,
            col_ptr,
            row_idx,
            val,
            diag,
        })
    }

    /// Solves `H x = r` in place; `work` has the order of `H`.
    pub fn solve(&self, r: &mut [f64], work: &mut [f64]) {
        let k = self.diag.len();
        for (w, &old) in work.iter_mut().zip(&self.perm) {
            *w = r[old];
        }
        for j in 0..k {
            let v = work[j] / self.diag[j];
            work[j] = v;
            for s in self.col_ptr[j]..self.col_ptr[j + 1] {
                work[self.row_idx[s]] -= self.val[s] * v;
            }
        }
        for j in (0..k).rev() {
            let mut v = work[j];
            for s in self.col_ptr[j]..self.col_ptr[j + 1] {
                v -= self.val[s] * work[self.row_idx[s]];
            }
            work[j] = v / self.diag[j];
        }
        for (w, &old) in work.iter().zip(&self.perm) {
            r[old] = *w;
        }
    }
}

struct Eliminated {
    row: usize,
    pivot: usize,
    alpha: f64,
    /// `(core position, coefficient)` of the other columns.
    terms: Vec<(usize, f64)>,
}

pub(super) struct AffineProjector {
    core: Vec<usize>,
    eliminated: Vec<Eliminated>,
    rest_rows: Vec<usize>,
    rest_terms: Vec<Vec<(usize, f64)>>,
    h: SparseCholesky,
    schur: DenseCholesky,
    rk: Vec<f64>,
    w: Vec<f64>,
    t: Vec<f64>,
    g: Vec<f64>,
    work: Vec<f64>,
}

impl AffineProjector {
    pub fn new(p: &ConicProblem) -> Result<Self> {
        let n = p.num_vars();
        let m = p.num_rows();
        let mut col_count = vec![0usize; n];
        for &(_, c, _) in &p.a {
            col_count[c] += 1;
        }
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        for &(r, c, v) in &p.a {
            rows[r].push((c, v));
        }
        let mut pivot_of = vec![None; m];
        let mut is_pivot = vec![false; n];
        for (r, row) in rows.iter().enumerate() {
            if let Some(&(c, _)) = row.iter().find(|(c, _)| col_count[*c] == 1) {
                pivot_of[r] = Some(c);
                is_pivot[c] = true;
            }
        }
        let core: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
        let mut pos = vec![usize::MAX; n];
        for (i, &c) in core.iter().enumerate() {
            pos[c] = i;
        }
        let k = core.len();
        let mut eliminated = Vec::new();
        let mut rest_rows = Vec::new();
        let mut rest_terms = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            match pivot_of[r] {
                Some(pc) => {
                    let alpha = row.iter().find(|t| t.0 == pc).map(|t| t.1).unwrap_or(1.0);
                    let terms = row
                        .iter()
                        .filter(|t| t.0 != pc)
                        .map(|&(c, v)| (pos[c], v))
                        .collect();
                    eliminated.push(Eliminated {
                        row: r,
                        pivot: pc,
                        alpha,
                        terms,
                    });
                }
                None => {
                    rest_rows.push(r);
                    rest_terms.push(row.iter().map(|&(c, v)| (pos[c], v)).collect::<Vec<_>>());
                }
            }
        }

        let mut entries: Vec<(usize, usize, f64)> = (0..k).map(|i| (i, i, 1.0)).collect();
        for e in &eliminated {
            let a2 = e.alpha * e.alpha;
            for &(i, vi) in &e.terms {
                for &(j, vj) in &e.terms {
                    if i >= j {
                        entries.push((i, j, vi * vj / a2));
                    }
                }
            }
        }
        let h = SparseCholesky::new(k, &entries)?;

        let q = rest_rows.len();
        let mut work = vec![0.0; k];
        let mut s = vec![0.0; q * q];
        let mut t = vec![0.0; k];
        for (a, terms) in rest_terms.iter().enumerate() {
            t.iter_mut().for_each(|v| *v = 0.0);
            for &(i, v) in terms {
                t[i] += v;
            }
            h.solve(&mut t, &mut work);
            for (b, terms_b) in rest_terms.iter().enumerate().skip(a) {
                s[b * q + a] = terms_b.iter().map(|&(i, v)| v * t[i]).sum();
            }
        }
        let schur = DenseCholesky::new(q, s);
        Ok(AffineProjector {
            core,
            eliminated,
            rest_rows,
            rest_terms,
            h,
            schur,
            rk: vec![0.0; k],
            w: vec![0.0; k],
            t: vec![0.0; k],
            g: vec![0.0; q],
            work,
        })
    }

    /// `x = argmin ‖x − v‖` over `A x = b`, with multipliers `lam` such that
    /// `x = v − Aᵀ lam`.
    pub fn project(&mut self, v: &[f64], b: &[f64], x: &mut [f64], lam: &mut [f64]) {
        for (r, &c) in self.rk.iter_mut().zip(&self.core) {
            *r = v[c];
        }
        for e in &self.eliminated {
            let coef = (b[e.row] / e.alpha - v[e.pivot]) / e.alpha;
            for &(i, a) in &e.terms {
                self.rk[i] += a * coef;
            }
        }
        self.w.copy_from_slice(&self.rk);
        self.h.solve(&mut self.w, &mut self.work);
        if !self.rest_rows.is_empty() {
            for (gi, (terms, &r)) in self.g.iter_mut().zip(self.rest_terms.iter().zip(&self.rest_rows)) {
                *gi = terms.iter().map(|&(i, a)| a * self.w[i]).sum::<f64>() - b[r];
            }
            self.schur.solve(&mut self.g);
            self.t.iter_mut().for_each(|v| *v = 0.0);
            for (terms, &gi) in self.rest_terms.iter().zip(&self.g) {
                for &(i, a) in terms {
                    self.t[i] += a * gi;
                }
            }
            self.h.solve(&mut self.t, &mut self.work);
            for (wi, ti) in self.w.iter_mut().zip(&self.t) {
                *wi -= ti;
            }
            for (&r, &gi) in self.rest_rows.iter().zip(&self.g) {
                lam[r] = gi;
            }
        }
        for (&c, &wi) in self.core.iter().zip(&self.w) {
            x[c] = wi;
        }
        for e in &self.eliminated {
            let s: f64 = e.terms.iter().map(|&(i, a)| a * self.w[i]).sum();
            x[e.pivot] = (b[e.row] - s) / e.alpha;
            lam[e.row] = (v[e.pivot] - x[e.pivot]) / e.alpha;
        }
    }
}
