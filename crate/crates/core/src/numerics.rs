//! Dense complex linear algebra: norms, eigensystems and rank-revealing
//! orthonormalization.
//!
//! Every routine first splits its input into the connected components of its
//! sparsity pattern, so diagonal or permutation-like operators (the common
//! case for code Hamiltonians and their Gibbs states) never hit a dense
//! factorization.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Numerical tolerances shared across the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    /// Singular values below `rank_rel * sigma_max` are treated as zero.
    pub rank_rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { abs: 1e-10, rank_rel: 1e-8 }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rank_rel: f64) -> Result<Self> {
        if !(abs > 0.0 && abs.is_finite()) {
            return Err(Error::InvalidTolerance(format!("abs = {abs}")));
        }
        if !(rank_rel > 0.0 && rank_rel.is_finite()) {
            return Err(Error::InvalidTolerance(format!("rank_rel = {rank_rel}")));
        }
        Ok(Tolerance { abs, rank_rel })
    }
}

/// A validated n-qubit density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
    n: usize,
}

impl DensityMatrix {
    /// Validates hermiticity, unit trace and positivity (all within 1e-10).
    pub fn new(mat: ComplexMatrix, n: usize) -> Result<Self> {
        let d = 1usize << n;
        check_square(&mat)?;
        if mat.nrows() != d {
            return Err(Error::DimensionMismatch { expected: d, got: mat.nrows() });
        }
        check_finite(&mat)?;
        let herm = hermitian_residual(&mat);
        if herm > 1e-10 {
            return Err(Error::NotHermitian(herm));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::InvalidDensity(format!("trace {tr}")));
        }
        let lo = min_eigenvalue(&mat)?;
        if lo < -1e-10 {
            return Err(Error::InvalidDensity(format!("eigenvalue {lo:.3e}")));
        }
        Ok(DensityMatrix { mat, n })
    }

    /// Skips the spectral check; callers guarantee validity by construction.
    pub fn new_unchecked(mat: ComplexMatrix, n: usize) -> Self {
        debug_assert_eq!(mat.nrows(), 1usize << n);
        DensityMatrix { mat, n }
    }

    /// Projects a probability vector onto the diagonal.
    pub fn from_diagonal(probs: &[f64], n: usize) -> Result<Self> {
        let d = 1usize << n;
        if probs.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: probs.len() });
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > 1e-10 || probs.iter().any(|p| *p < -1e-10 || !p.is_finite()) {
            return Err(Error::InvalidDensity("diagonal is not a distribution".into()));
        }
        let mat = ComplexMatrix::from_diagonal(&DVector::from_iterator(d, probs.iter().map(|p| cr(*p))));
        Ok(DensityMatrix { mat, n })
    }

    pub fn maximally_mixed(n: usize) -> Self {
        let d = 1usize << n;
        DensityMatrix { mat: ComplexMatrix::identity(d, d) * cr(1.0 / d as f64), n }
    }

    pub fn pure(psi: &ComplexVector, n: usize) -> Result<Self> {
        let d = 1usize << n;
        if psi.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: psi.len() });
        }
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::EmptyInput);
        }
        let v = psi / cr(norm);
        Ok(DensityMatrix { mat: &v * v.adjoint(), n })
    }

    pub fn mat(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn into_mat(self) -> ComplexMatrix {
        self.mat
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    /// `P rho P / tr(P rho)`, the normalized restriction to a subspace.
    pub fn project(&self, p: &ComplexMatrix) -> Result<Self> {
        if p.nrows() != self.dim() || p.ncols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: p.nrows() });
        }
        let m = p * &self.mat * p;
        let w = m.trace().re;
        if w <= 1e-14 {
            return Err(Error::EmptyA(w));
        }
        Ok(DensityMatrix { mat: m / cr(w), n: self.n })
    }
}

pub fn check_square(m: &ComplexMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NonSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(())
}

fn check_finite(m: &ComplexMatrix) -> Result<()> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidDensity("non-finite entry".into()));
    }
    Ok(())
}

/// max |M_ij - conj(M_ji)|.
pub fn hermitian_residual(m: &ComplexMatrix) -> f64 {
    let d = m.nrows().min(m.ncols());
    let mut worst = 0.0f64;
    for j in 0..d {
        for i in j..d {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0f64, |a, z| a.max(z.norm()))
}

pub fn frobenius_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    (a - b).norm()
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

// Union-find over matrix indices.
struct Dsu(Vec<usize>);

impl Dsu {
    fn new(k: usize) -> Self {
        Dsu((0..k).collect())
    }
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Connected components of the symmetric sparsity pattern of a square matrix.
/// Each component is an ascending index list; components ordered by first index.
fn symmetric_blocks(m: &ComplexMatrix) -> Vec<Vec<usize>> {
    let d = m.nrows();
    let mut dsu = Dsu::new(d);
    for j in 0..d {
        for i in 0..d {
            if i != j && m[(i, j)] != ZERO {
                dsu.union(i, j);
            }
        }
    }
    group(&mut dsu, d)
}

fn group(dsu: &mut Dsu, k: usize) -> Vec<Vec<usize>> {
    let mut slot = vec![usize::MAX; k];
    let mut out: Vec<Vec<usize>> = Vec::new();
    for i in 0..k {
        let r = dsu.find(i);
        if slot[r] == usize::MAX {
            slot[r] = out.len();
            out.push(Vec::new());
        }
        out[slot[r]].push(i);
    }
    out
}

/// Row/column index sets of the bipartite components that carry nonzeros.
fn bipartite_blocks(m: &ComplexMatrix) -> Vec<(Vec<usize>, Vec<usize>)> {
    let (r, cdim) = m.shape();
    let mut dsu = Dsu::new(r + cdim);
    let mut live = vec![false; r + cdim];
    for j in 0..cdim {
        for i in 0..r {
            if m[(i, j)] != ZERO {
                dsu.union(i, r + j);
                live[i] = true;
                live[r + j] = true;
            }
        }
    }
    group(&mut dsu, r + cdim)
        .into_iter()
        .filter(|g| live[g[0]])
        .map(|g| {
            let rows: Vec<usize> = g.iter().copied().filter(|&x| x < r).collect();
            let cols: Vec<usize> = g.iter().copied().filter(|&x| x >= r).map(|x| x - r).collect();
            (rows, cols)
        })
        .collect()
}

fn submatrix(m: &ComplexMatrix, rows: &[usize], cols: &[usize]) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

fn is_numerically_hermitian(m: &ComplexMatrix) -> bool {
    m.nrows() == m.ncols() && hermitian_residual(m) <= 1e-13 * max_abs(m).max(1.0)
}

fn hermitian_block_eigenvalues(b: &ComplexMatrix) -> Vec<f64> {
    if b.nrows() == 1 {
        return vec![b[(0, 0)].re];
    }
    let h = (b + b.adjoint()) * cr(0.5);
    h.symmetric_eigenvalues().iter().copied().collect()
}

fn singular_values(b: &ComplexMatrix) -> Vec<f64> {
    if b.nrows() == 1 && b.ncols() == 1 {
        return vec![b[(0, 0)].norm()];
    }
    b.singular_values().iter().copied().collect()
}

fn min_eigenvalue(m: &ComplexMatrix) -> Result<f64> {
    let mut lo = f64::INFINITY;
    for blk in symmetric_blocks(m) {
        let sub = submatrix(m, &blk, &blk);
        for e in hermitian_block_eigenvalues(&sub) {
            lo = lo.min(e);
        }
    }
    Ok(lo)
}

/// Sum of singular values.
pub fn trace_norm(m: &ComplexMatrix) -> Result<f64> {
    check_square(m)?;
    if is_numerically_hermitian(m) {
        let mut s = 0.0;
        for blk in symmetric_blocks(m) {
            let sub = submatrix(m, &blk, &blk);
            s += hermitian_block_eigenvalues(&sub).iter().map(|e| e.abs()).sum::<f64>();
        }
        return Ok(s);
    }
    let mut s = 0.0;
    for (rows, cols) in bipartite_blocks(m) {
        s += singular_values(&submatrix(m, &rows, &cols)).iter().sum::<f64>();
    }
    Ok(s)
}

/// Largest singular value. Defined for rectangular input.
pub fn operator_norm(m: &ComplexMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if is_numerically_hermitian(m) {
        let mut s = 0.0f64;
        for blk in symmetric_blocks(m) {
            let sub = submatrix(m, &blk, &blk);
            for e in hermitian_block_eigenvalues(&sub) {
                s = s.max(e.abs());
            }
        }
        return s;
    }
    let mut s = 0.0f64;
    for (rows, cols) in bipartite_blocks(m) {
        for v in singular_values(&submatrix(m, &rows, &cols)) {
            s = s.max(v);
        }
    }
    s
}

/// Sum of singular values of a possibly rectangular matrix.
pub fn nuclear_norm(m: &ComplexMatrix) -> f64 {
    let mut s = 0.0;
    for (rows, cols) in bipartite_blocks(m) {
        s += singular_values(&submatrix(m, &rows, &cols)).iter().sum::<f64>();
    }
    s
}

/// Orthonormal basis of the span of `vectors`, columns in a deterministic
/// order. Rank is decided by `sigma_i > tol.rank_rel * sigma_max`.
pub fn orthonormal_column_basis(vectors: &[ComplexVector], tol: Tolerance) -> Result<ComplexMatrix> {
    let first = vectors.first().ok_or(Error::EmptyInput)?;
    let d = first.len();
    for v in vectors {
        if v.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: v.len() });
        }
    }
    let a = ComplexMatrix::from_columns(vectors);
    Ok(orthonormalize_matrix(&a, tol))
}

/// Matrix form of [`orthonormal_column_basis`]: basis of the column span of `a`.
pub fn orthonormalize_matrix(a: &ComplexMatrix, tol: Tolerance) -> ComplexMatrix {
    let d = a.nrows();
    if a.ncols() == 0 || d == 0 {
        return ComplexMatrix::zeros(d, 0);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let sig = &svd.singular_values;
    let smax = sig.iter().fold(0.0f64, |x, y| x.max(*y));
    if smax == 0.0 {
        return ComplexMatrix::zeros(d, 0);
    }
    let mut order: Vec<usize> = (0..sig.len()).filter(|&i| sig[i] > tol.rank_rel * smax).collect();
    order.sort_by(|&i, &j| sig[j].total_cmp(&sig[i]).then(i.cmp(&j)));
    let mut out = ComplexMatrix::zeros(d, order.len());
    for (k, &i) in order.iter().enumerate() {
        let mut col = u.column(i).into_owned();
        fix_phase(&mut col);
        out.set_column(k, &col);
    }
    out
}

/// Rotates a vector so that its first significant component is real positive.
pub fn fix_phase(v: &mut ComplexVector) {
    let scale = v.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    if scale == 0.0 {
        return;
    }
    if let Some(z) = v.iter().find(|z| z.norm() > 1e-8 * scale) {
        let ph = z / cr(z.norm());
        let conj = ph.conj();
        for x in v.iter_mut() {
            *x *= conj;
        }
    }
}

/// Eigenvalues in ascending order with unitary eigenvectors as columns.
/// Each eigenvector's first significant component is real positive.
pub fn hermitian_eigensystem(h: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    check_square(h)?;
    let d = h.nrows();
    if d == 0 {
        return Err(Error::EmptyInput);
    }
    let res = hermitian_residual(h);
    if res > 1e-10 * max_abs(h).max(1.0) {
        return Err(Error::NotHermitian(res));
    }
    // (eigenvalue, block-local eigenvector embedded as (index, value) pairs)
    let mut pairs: Vec<(f64, Vec<(usize, C64)>)> = Vec::with_capacity(d);
    for blk in symmetric_blocks(h) {
        if blk.len() == 1 {
            pairs.push((h[(blk[0], blk[0])].re, vec![(blk[0], ONE)]));
            continue;
        }
        let sub = submatrix(h, &blk, &blk);
        let sub = (&sub + sub.adjoint()) * cr(0.5);
        let eig = sub.symmetric_eigen();
        for k in 0..blk.len() {
            let mut col = eig.eigenvectors.column(k).into_owned();
            let nrm = col.norm();
            col /= cr(nrm);
            fix_phase(&mut col);
            pairs.push((eig.eigenvalues[k], blk.iter().copied().zip(col.iter().copied()).collect()));
        }
    }
    let lead = |p: &Vec<(usize, C64)>| p.iter().find(|(_, z)| z.norm() > 1e-8).map(|(i, _)| *i).unwrap_or(0);
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| lead(&a.1).cmp(&lead(&b.1))));
    let mut evecs = ComplexMatrix::zeros(d, d);
    let mut evals = Vec::with_capacity(d);
    for (k, (e, col)) in pairs.into_iter().enumerate() {
        evals.push(e);
        for (i, z) in col {
            evecs[(i, k)] = z;
        }
    }
    Ok((evals, evecs))
}

/// `f(H)` through an eigensystem: `U diag(f(e)) U^dagger`.
pub fn hermitian_function(evals: &[f64], evecs: &ComplexMatrix, f: impl Fn(f64) -> f64) -> ComplexMatrix {
    let mut scaled = evecs.clone();
    for (k, e) in evals.iter().enumerate() {
        let s = cr(f(*e));
        for z in scaled.column_mut(k).iter_mut() {
            *z *= s;
        }
    }
    scaled * evecs.adjoint()
}

/// Diagonal of a matrix as reals when all off-diagonal entries vanish exactly.
pub fn real_diagonal(m: &ComplexMatrix) -> Option<Vec<f64>> {
    let d = m.nrows();
    if m.ncols() != d {
        return None;
    }
    for j in 0..d {
        for i in 0..d {
            if i != j && m[(i, j)] != ZERO {
                return None;
            }
        }
        if m[(j, j)].im != 0.0 {
            return None;
        }
    }
    Some((0..d).map(|i| m[(i, i)].re).collect())
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    pub fn gaussian(rng: &mut ChaCha8Rng, r: usize, cdim: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(r, cdim, |_, _| {
            c(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
        })
    }

    pub fn random_unitary(rng: &mut ChaCha8Rng, d: usize) -> ComplexMatrix {
        gaussian(rng, d, d).qr().q()
    }

    pub fn random_hermitian(rng: &mut ChaCha8Rng, d: usize) -> ComplexMatrix {
        let g = gaussian(rng, d, d);
        (&g + g.adjoint()) * cr(0.5)
    }

    pub fn random_density(rng: &mut ChaCha8Rng, n: usize) -> DensityMatrix {
        let d = 1 << n;
        let g = gaussian(rng, d, d);
        let m = &g * g.adjoint();
        let t = m.trace();
        DensityMatrix::new(m / t, n).unwrap()
    }

    pub fn random_projector(rng: &mut ChaCha8Rng, d: usize) -> ComplexMatrix {
        let k = rng.gen_range(1..=d);
        let q = random_unitary(rng, d).columns(0, k).into_owned();
        &q * q.adjoint()
    }
}
