//! Dense symmetric linear algebra: packing, eigendecomposition, PSD projection,
//! spectrum-controlled random matrices and small linear solves.
//!
//! The packed (`svec`) layout walks the lower triangle column by column and
//! scales strictly-lower entries by √2, so that `svec(A)·svec(B) = ⟨A, B⟩`.
//! Every module that maps matrix entries to solver coordinates goes through
//! [`svec_index`], which fixes that ordering in one place.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Dense symmetric matrix. Writes go through [`SymMatrix::set`], which stores
/// both `(i, j)` and `(j, i)`, so symmetry is bitwise exact.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    order: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(order: usize) -> Self {
        assert!(order >= 1, "matrix order must be positive");
        SymMatrix {
            order,
            data: vec![0.0; order * order],
        }
    }

    pub fn identity(order: usize) -> Self {
        let mut m = Self::zeros(order);
        for i in 0..order {
            m.set(i, i, 1.0);
        }
        m
    }

    /// All-ones matrix `E = e eᵀ`.
    pub fn ones(order: usize) -> Self {
        let mut m = Self::zeros(order);
        m.data.iter_mut().for_each(|v| *v = 1.0);
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Builds a matrix from a function evaluated on the lower triangle (`i >= j`).
    pub fn from_lower_fn(order: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(order);
        for j in 0..order {
            for i in j..order {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Builds a matrix from rows, rejecting any entry pair that is not bitwise symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if d == 0 {
            return Err(Error::Dimension("empty matrix".into()));
        }
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension("rows must form a square matrix".into()));
        }
        for i in 0..d {
            for j in 0..i {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::Parameter(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self::from_lower_fn(d, |i, j| rows[i][j]))
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.order + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.order + j] = v;
        self.data[j * self.order + i] = v;
    }

    /// Row-major view of the full square storage.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.order..(i + 1) * self.order]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.order).map(|i| self.get(i, i)).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// Trace inner product `⟨A, B⟩ = Σᵢⱼ AᵢⱼBᵢⱼ`.
    pub fn inner(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.order, other.order);
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// Sum of all entries, `⟨E, M⟩`.
    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.order);
        (0..self.order)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `xᵀ M x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, alpha: f64) -> SymMatrix {
        SymMatrix {
            order: self.order,
            data: self.data.iter().map(|v| alpha * v).collect(),
        }
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.order, other.order);
        SymMatrix {
            order: self.order,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        self.add(&other.scaled(-1.0))
    }

    /// Principal submatrix on the given (ordered) index list.
    pub fn principal(&self, idx: &[usize]) -> SymMatrix {
        SymMatrix::from_lower_fn(idx.len(), |i, j| self.get(idx[i], idx[j]))
    }

    /// Largest asymmetry `|Mᵢⱼ − Mⱼᵢ|` of a square row-major buffer.
    pub fn asymmetry(rows: &[Vec<f64>]) -> f64 {
        let d = rows.len();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..i {
                worst = worst.max((rows[i][j] - rows[j][i]).abs());
            }
        }
        worst
    }

    fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.order, self.order, &self.data)
    }
}

/// Length of the packed vector of a symmetric matrix of order `d`.
#[inline]
pub fn svec_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Position of entry `(i, j)` in the packed vector (order of arguments irrelevant).
#[inline]
pub fn svec_index(d: usize, i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    c * d - c * c.saturating_sub(1) / 2 + (r - c)
}

/// Inverse of [`svec_len`]: the order `d` with `d(d+1)/2 == len`, if any.
pub fn triangular_order(len: usize) -> Option<usize> {
    let d = ((((8 * len + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
    (svec_len(d) == len).then_some(d)
}

/// Packs a symmetric matrix; off-diagonal entries carry a factor √2.
pub fn svec(m: &SymMatrix) -> Vec<f64> {
    let d = m.order();
    let mut out = Vec::with_capacity(svec_len(d));
    for j in 0..d {
        for i in j..d {
            let v = m.get(i, j);
            out.push(if i == j { v } else { v * std::f64::consts::SQRT_2 });
        }
    }
    out
}

/// Unpacks a vector produced by [`svec`].
pub fn smat(v: &[f64]) -> Result<SymMatrix> {
    let d = triangular_order(v.len())
        .filter(|&d| d >= 1)
        .ok_or_else(|| Error::Dimension(format!("length {} is not a triangular number", v.len())))?;
    let mut m = SymMatrix::zeros(d);
    let mut k = 0;
    for j in 0..d {
        for i in j..d {
            let x = v[k];
            m.set(i, j, if i == j { x } else { x / std::f64::consts::SQRT_2 });
            k += 1;
        }
    }
    Ok(m)
}

/// Eigendecomposition `M = V diag(λ) Vᵀ` with eigenvalues in nondecreasing order.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Row-major `d × d`; column `k` is the eigenvector of `eigenvalues[k]`.
    pub eigenvectors: Vec<f64>,
}

impl Spectrum {
    pub fn order(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        let d = self.order();
        (0..d).map(|i| self.eigenvectors[i * d + k]).collect()
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }

    /// `V diag(f(λ)) Vᵀ`, assembled on the lower triangle and mirrored.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let d = self.order();
        let w: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let active: Vec<usize> = (0..d).filter(|&k| w[k] != 0.0).collect();
        let v = &self.eigenvectors;
        SymMatrix::from_lower_fn(d, |i, j| {
            active
                .iter()
                .map(|&k| w[k] * v[i * d + k] * v[j * d + k])
                .sum()
        })
    }
}

const EIG_MAX_ITER: usize = 10_000;

/// Symmetric eigendecomposition (Householder tridiagonalisation + implicit QL).
pub fn sym_eig(m: &SymMatrix) -> Result<Spectrum> {
    let d = m.order();
    if m.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical {
            context: "sym_eig: non-finite input".into(),
            residual: f64::NAN,
        });
    }
    let scale = m.frobenius_norm();
    let eig = SymmetricEigen::try_new(m.to_dmatrix(), f64::EPSILON, EIG_MAX_ITER).ok_or_else(
        || Error::Numerical {
            context: format!("sym_eig: no convergence after {EIG_MAX_ITER} iterations"),
            residual: scale,
        },
    )?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut eigenvectors = vec![0.0; d * d];
    for (col, &k) in order.iter().enumerate() {
        for i in 0..d {
            eigenvectors[i * d + col] = eig.eigenvectors[(i, k)];
        }
    }
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// Smallest eigenvalue.
pub fn min_eigenvalue(m: &SymMatrix) -> Result<f64> {
    Ok(sym_eig(m)?.min())
}

/// Euclidean (Frobenius) projection onto the PSD cone.
pub fn proj_psd(m: &SymMatrix) -> Result<SymMatrix> {
    let spec = sym_eig(m)?;
    if spec.min() >= 0.0 {
        return Ok(m.clone());
    }
    let d = m.order();
    let negatives = spec.eigenvalues.iter().filter(|&&l| l < 0.0).count();
    if 2 * negatives < d {
        // fewer negative eigenpairs: subtract them instead of summing the positive ones
        let correction = spec.reconstruct_with(|l| if l < 0.0 { l } else { 0.0 });
        Ok(SymMatrix::from_lower_fn(d, |i, j| {
            m.get(i, j) - correction.get(i, j)
        }))
    } else {
        Ok(spec.reconstruct_with(|l| l.max(0.0)))
    }
}

/// `V diag(λ) Vᵀ` with `λᵢ ~ U(lo, hi)` i.i.d. and `V` Haar-distributed,
/// obtained from Gram–Schmidt on a Gaussian matrix with sign-normalised `R`.
pub fn random_spd_with_spectrum<R: Rng + ?Sized>(
    d: usize,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Result<SymMatrix> {
    if d == 0 {
        return Err(Error::Parameter("order must be at least 1".into()));
    }
    if !(lo >= 0.0 && lo < hi && hi.is_finite()) {
        return Err(Error::Parameter(format!(
            "spectrum interval ({lo}, {hi}) must satisfy 0 <= lo < hi"
        )));
    }
    let eigenvalues: Vec<f64> = (0..d)
        .map(|_| loop {
            let v = rng.random_range(lo..hi);
            if v > lo {
                break v;
            }
        })
        .collect();
    let v = haar_orthogonal(d, rng);
    let mut out = SymMatrix::zeros(d);
    for j in 0..d {
        for i in j..d {
            let s: f64 = (0..d).map(|k| eigenvalues[k] * v[i][k] * v[j][k]).sum();
            out.set(i, j, s);
        }
    }
    Ok(out)
}

/// Rows of a Haar-random orthogonal matrix (`v[i][k]` is component `i` of column `k`).
fn haar_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<Vec<f64>> {
    loop {
        let mut cols: Vec<Vec<f64>> = (0..d)
            .map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let mut ok = true;
        for k in 0..d {
            for p in 0..k {
                let dot: f64 = cols[k].iter().zip(&cols[p]).map(|(a, b)| a * b).sum();
                let (head, tail) = cols.split_at_mut(k);
                for (a, b) in tail[0].iter_mut().zip(&head[p]) {
                    *a -= dot * b;
                }
            }
            let norm = cols[k].iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm < 1e-10 {
                ok = false;
                break;
            }
            cols[k].iter_mut().for_each(|a| *a /= norm);
        }
        if ok {
            return (0..d).map(|i| (0..d).map(|k| cols[k][i]).collect()).collect();
        }
    }
}

/// Outcome of [`solve_symmetric_linear`]; singularity is a value, not an error.
#[derive(Clone, Debug, PartialEq)]
pub enum LinearSolve {
    Solved(Vec<f64>),
    Singular,
}

/// Relative pivot threshold below which a system is declared singular.
pub const PIVOT_TOL: f64 = 1e-12;

/// Solves `M x = b` by Gaussian elimination with partial pivoting. Symmetric
/// indefinite systems (bordered KKT matrices) are the main customer.
pub fn solve_symmetric_linear(m: &SymMatrix, b: &[f64]) -> Result<LinearSolve> {
    let d = m.order();
    if b.len() != d {
        return Err(Error::Dimension(format!(
            "matrix order {d} but right-hand side has length {}",
            b.len()
        )));
    }
    let mut a = m.as_slice().to_vec();
    let mut x = b.to_vec();
    if lu_solve_in_place(&mut a, d, &mut x) {
        Ok(LinearSolve::Solved(x))
    } else {
        Ok(LinearSolve::Singular)
    }
}

/// In-place partial-pivoting solve on a row-major `n × n` buffer. Returns
/// `false` when a pivot falls below `PIVOT_TOL` times the largest entry.
pub(crate) fn lu_solve_in_place(a: &mut [f64], n: usize, b: &mut [f64]) -> bool {
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return false;
    }
    let tol = PIVOT_TOL * scale;
    for k in 0..n {
        let mut p = k;
        let mut best = a[k * n + k].abs();
        for r in k + 1..n {
            let v = a[r * n + k].abs();
            if v > best {
                best = v;
                p = r;
            }
        }
        if best <= tol {
            return false;
        }
        if p != k {
            for c in 0..n {
                a.swap(k * n + c, p * n + c);
            }
            b.swap(k, p);
        }
        let piv = a[k * n + k];
        for r in k + 1..n {
            let f = a[r * n + k] / piv;
            if f != 0.0 {
                for c in k + 1..n {
                    a[r * n + c] -= f * a[k * n + c];
                }
                b[r] -= f * b[k];
            }
        }
    }
    for k in (0..n).rev() {
        let mut s = b[k];
        for c in k + 1..n {
            s -= a[k * n + c] * b[c];
        }
        b[k] = s / a[k * n + k];
    }
    true
}
