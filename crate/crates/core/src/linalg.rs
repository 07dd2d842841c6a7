//! Dense linear algebra used throughout the estimators.
//!
//! Matrices here are small (at most a few dozen rows and columns for the
//! OPG and local-linear systems), so everything is stored densely in
//! row-major order. The symmetric eigensolver is delegated to `nalgebra`;
//! everything built on top of it (orientation convention, eigen-truncated
//! pseudo-inverse, ridge fallback, projector distance) lives here.

use std::ops::{Index, IndexMut};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{contract, Error, Result};

/// Relative eigenvalue threshold below which the pseudo-inverse treats an
/// eigenvalue as zero.
pub const PINV_REL_TOL: f64 = 1e-10;

/// Absolute size a component must exceed to count as "nonzero" for the
/// sign-orientation convention.
const ORIENT_EPS: f64 = 1e-12;

const SYMMETRY_TOL: f64 = 1e-10;
const ORTHONORMAL_TOL: f64 = 1e-10;

/// Real dense matrix stored in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from row-major entries, checking shape and finiteness.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(contract("matrix must have at least one row and one column"));
        }
        if data.len() != rows * cols {
            return Err(contract(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(contract("matrix entries must be finite"));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(contract("ragged rows"));
        }
        Self::from_row_major(rows.len(), cols, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds an `n x 1` matrix from a vector.
    pub fn column_vector(v: &[f64]) -> Result<Self> {
        Self::from_row_major(v.len(), 1, v.to_vec())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(contract(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(contract("matrix shapes differ"));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    /// Scales column `j` by `factors[j]`.
    pub fn scale_columns(&self, factors: &[f64]) -> Self {
        assert_eq!(factors.len(), self.cols);
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * factors[j])
    }

    /// The first `k` columns.
    pub fn leading_columns(&self, k: usize) -> Self {
        assert!(k >= 1 && k <= self.cols);
        Self::from_fn(self.rows, k, |i, j| self[(i, j)])
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = self.max_abs().max(1.0);
        (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol * scale))
    }

    /// Spectral norm of a symmetric matrix (largest absolute eigenvalue).
    pub fn sym_norm2(&self) -> Result<f64> {
        let eig = eig_sym(self)?;
        Ok(eig.eigenvalues.iter().fold(0.0, |m: f64, v| m.max(v.abs())))
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Flips the sign of each column so that its first component with
/// magnitude above `ORIENT_EPS` is positive.
fn orient_columns(m: &mut DenseMatrix) {
    for j in 0..m.cols {
        let lead = (0..m.rows)
            .map(|i| m[(i, j)])
            .find(|v| v.abs() > ORIENT_EPS);
        if matches!(lead, Some(v) if v < 0.0) {
            for i in 0..m.rows {
                m[(i, j)] = -m[(i, j)];
            }
        }
    }
}

/// Eigen-decomposition `A = V diag(eigenvalues) Vᵀ` of a symmetric matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenDecomposition {
    /// Sorted in descending order.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal columns; column `j` pairs with `eigenvalues[j]`.
    pub eigenvectors: DenseMatrix,
}

impl EigenDecomposition {
    /// `V diag(values) Vᵀ` for arbitrary replacement eigenvalues.
    pub fn recompose_with(&self, values: &[f64]) -> DenseMatrix {
        let v = &self.eigenvectors;
        let n = v.rows();
        let mut out = DenseMatrix::zeros(n, n);
        for (k, &lam) in values.iter().enumerate() {
            if lam == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = v[(i, k)] * lam;
                for j in 0..n {
                    out[(i, j)] += vik * v[(j, k)];
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        self.recompose_with(&self.eigenvalues)
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted descending and each
/// eigenvector oriented so its first nonzero component is positive.
pub fn eig_sym(a: &DenseMatrix) -> Result<EigenDecomposition> {
    if !a.is_square() {
        return Err(contract(format!(
            "eig_sym needs a square matrix, got {}x{}",
            a.rows, a.cols
        )));
    }
    if !a.is_symmetric(SYMMETRY_TOL) {
        return Err(contract("eig_sym needs a symmetric matrix"));
    }
    let n = a.rows;
    let SymmetricEigen {
        eigenvalues,
        eigenvectors,
    } = SymmetricEigen::new(a.to_nalgebra());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eigenvalues[j].total_cmp(&eigenvalues[i]));
    let values = order.iter().map(|&k| eigenvalues[k]).collect();
    let mut vectors = DenseMatrix::from_fn(n, n, |i, j| eigenvectors[(i, order[j])]);
    orient_columns(&mut vectors);
    Ok(EigenDecomposition {
        eigenvalues: values,
        eigenvectors: vectors,
    })
}

fn pinv_from_eigen(eig: &EigenDecomposition, rel_tol: f64) -> DenseMatrix {
    let cutoff = rel_tol * eig.eigenvalues.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let inv: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| if l.abs() <= cutoff { 0.0 } else { 1.0 / l })
        .collect();
    eig.recompose_with(&inv)
}

/// Moore–Penrose pseudo-inverse of a symmetric matrix; eigenvalues with
/// `|λ| <= rel_tol * max|λ|` are treated as zero.
pub fn pinv_sym(a: &DenseMatrix, rel_tol: f64) -> Result<DenseMatrix> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(contract("rel_tol must lie in (0, 1)"));
    }
    Ok(pinv_from_eigen(&eig_sym(a)?, rel_tol))
}

/// Ridge penalty on the slope coefficients of a least-squares fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Ridge {
    /// Always add this penalty (may be zero).
    Fixed(f64),
    /// Add `1e-8 * trace(N) / dim` only when the normal matrix `N` is
    /// numerically singular.
    Auto,
}

/// Accumulated normal equations `N β = rᵍ` for one design and several
/// target vectors sharing the same weights.
///
/// The first coordinate is the intercept and is never penalized.
#[derive(Clone, Debug)]
pub struct NormalEquations {
    dim: usize,
    matrix: Vec<f64>,
    rhs: Vec<Vec<f64>>,
    positive: usize,
}

impl NormalEquations {
    pub fn new(dim: usize, targets: usize) -> Self {
        Self {
            dim,
            matrix: vec![0.0; dim * dim],
            rhs: vec![vec![0.0; dim]; targets],
            positive: 0,
        }
    }

    /// Adds one observation with design row `row`, weight `w` and one target
    /// value per right-hand side. Only the upper triangle is accumulated.
    #[inline]
    pub fn add(&mut self, row: &[f64], w: f64, targets: impl Iterator<Item = f64>) {
        debug_assert_eq!(row.len(), self.dim);
        if w <= 0.0 {
            return;
        }
        self.positive += 1;
        let k = self.dim;
        for a in 0..k {
            let wa = w * row[a];
            let dst = &mut self.matrix[a * k + a..(a + 1) * k];
            for (d, &rb) in dst.iter_mut().zip(&row[a..]) {
                *d += wa * rb;
            }
        }
        for (rhs, t) in self.rhs.iter_mut().zip(targets) {
            let wt = w * t;
            for (r, &x) in rhs.iter_mut().zip(row) {
                *r += wt * x;
            }
        }
    }

    /// Number of observations added with positive weight.
    pub fn effective_n(&self) -> usize {
        self.positive
    }

    fn normal_matrix(&self) -> DenseMatrix {
        let k = self.dim;
        DenseMatrix::from_fn(k, k, |i, j| {
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            self.matrix[a * k + b]
        })
    }

    /// Solves for every right-hand side through the pseudo-inverse of the
    /// (possibly ridge-augmented) normal matrix.
    pub fn solve(&self, ridge: Ridge) -> Result<Vec<Vec<f64>>> {
        if self.positive == 0 {
            return Err(Error::DegenerateNeighborhood {
                effective_n: 0,
                required: 1,
            });
        }
        let mut n = self.normal_matrix();
        let add_ridge = |n: &mut DenseMatrix, r: f64| {
            for i in 1..n.rows() {
                n[(i, i)] += r;
            }
        };
        let eig = match ridge {
            Ridge::Fixed(r) => {
                if !(r >= 0.0) {
                    return Err(contract("ridge must be non-negative"));
                }
                add_ridge(&mut n, r);
                eig_sym(&n)?
            }
            Ridge::Auto => {
                let eig = eig_sym(&n)?;
                let max = eig.eigenvalues[0].abs();
                let min = *eig.eigenvalues.last().unwrap();
                if min <= PINV_REL_TOL * max && self.dim > 1 {
                    let r = 1e-8 * n.trace() / self.dim as f64;
                    add_ridge(&mut n, r);
                    eig_sym(&n)?
                } else {
                    eig
                }
            }
        };
        let cutoff = PINV_REL_TOL * eig.eigenvalues.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        let v = &eig.eigenvectors;
        let k = self.dim;
        let solutions = self
            .rhs
            .iter()
            .map(|rhs| {
                // β = V diag(1/λ) Vᵀ r
                let mut coef = vec![0.0; k];
                for (c, &lam) in eig.eigenvalues.iter().enumerate() {
                    if lam.abs() <= cutoff {
                        continue;
                    }
                    let proj: f64 = (0..k).map(|i| v[(i, c)] * rhs[i]).sum::<f64>() / lam;
                    for (i, b) in coef.iter_mut().enumerate() {
                        *b += v[(i, c)] * proj;
                    }
                }
                coef
            })
            .collect();
        Ok(solutions)
    }
}

/// Weighted least squares `min Σ wᵢ (tᵢ - βᵀdᵢ)² + ridge·‖β₋₀‖²`.
///
/// The first design column is treated as the intercept and is excluded from
/// the ridge penalty.
pub fn weighted_ls(
    design: &DenseMatrix,
    targets: &[f64],
    weights: &[f64],
    ridge: Ridge,
) -> Result<Vec<f64>> {
    let n = design.rows();
    if targets.len() != n || weights.len() != n {
        return Err(contract(
            "design, targets and weights must have the same length",
        ));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(contract("weights must be non-negative"));
    }
    let mut ne = NormalEquations::new(design.cols(), 1);
    for i in 0..n {
        ne.add(design.row(i), weights[i], std::iter::once(targets[i]));
    }
    Ok(ne.solve(ridge)?.pop().unwrap())
}

/// Modified Gram–Schmidt with reorthogonalization, keeping column signs.
pub(crate) fn gram_schmidt(m: &DenseMatrix) -> Result<DenseMatrix> {
    let (p, d) = (m.rows(), m.cols());
    if d > p {
        return Err(contract("a basis cannot have more columns than rows"));
    }
    let mut cols: Vec<Vec<f64>> = (0..d).map(|j| m.column(j)).collect();
    for j in 0..d {
        let original = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        for _ in 0..2 {
            for k in 0..j {
                let dot: f64 = cols[j].iter().zip(&cols[k]).map(|(a, b)| a * b).sum();
                let prev = cols[k].clone();
                for (a, b) in cols[j].iter_mut().zip(prev) {
                    *a -= dot * b;
                }
            }
        }
        let norm = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 1e-12 * original.max(f64::MIN_POSITIVE)) || norm == 0.0 {
            return Err(contract("columns are linearly dependent"));
        }
        cols[j].iter_mut().for_each(|v| *v /= norm);
    }
    Ok(DenseMatrix::from_fn(p, d, |i, j| cols[j][i]))
}

/// Orthonormal basis of a linear subspace of ℝᵖ.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceBasis {
    basis: DenseMatrix,
}

impl SubspaceBasis {
    /// Wraps a matrix whose columns are already orthonormal (within 1e-10),
    /// applying the orientation convention.
    pub fn from_orthonormal(mut basis: DenseMatrix) -> Result<Self> {
        if basis.cols() > basis.rows() {
            return Err(contract("a basis cannot have more columns than rows"));
        }
        let gram = basis.transpose().matmul(&basis)?;
        let err = gram.sub(&DenseMatrix::identity(basis.cols()))?.max_abs();
        if err > ORTHONORMAL_TOL {
            return Err(contract(format!(
                "columns are not orthonormal (error {err:.3e})"
            )));
        }
        orient_columns(&mut basis);
        Ok(Self { basis })
    }

    /// Orthonormalizes the columns of `m` (modified Gram–Schmidt, two passes).
    pub fn orthonormalize(m: &DenseMatrix) -> Result<Self> {
        let mut basis = gram_schmidt(m)?;
        orient_columns(&mut basis);
        Ok(Self { basis })
    }

    /// Span of the standard basis vectors `e_{k+1}` for `k` in `indices`
    /// (zero-based).
    pub fn coordinate(p: usize, indices: &[usize]) -> Result<Self> {
        if indices.iter().any(|&k| k >= p) {
            return Err(contract("coordinate index out of range"));
        }
        let m = DenseMatrix::from_fn(
            p,
            indices.len(),
            |i, j| if i == indices[j] { 1.0 } else { 0.0 },
        );
        Self::from_orthonormal(m)
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.rows()
    }

    pub fn dim(&self) -> usize {
        self.basis.cols()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.basis
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.basis
    }

    /// Orthogonal projector `B Bᵀ`.
    pub fn projector(&self) -> DenseMatrix {
        let b = &self.basis;
        let p = b.rows();
        DenseMatrix::from_fn(p, p, |i, j| {
            (0..b.cols()).map(|k| b[(i, k)] * b[(j, k)]).sum()
        })
    }
}

/// Operator 2-norm of the difference of the orthogonal projectors onto two
/// subspaces, `‖B₁B₁ᵀ − B₂B₂ᵀ‖₂`.
pub fn subspace_distance(a: &SubspaceBasis, b: &SubspaceBasis) -> Result<f64> {
    if a.ambient_dim() != b.ambient_dim() {
        return Err(contract(format!(
            "ambient dimensions differ: {} vs {}",
            a.ambient_dim(),
            b.ambient_dim()
        )));
    }
    a.projector().sub(&b.projector())?.sym_norm2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_orthogonal(p: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        let m = DenseMatrix::from_fn(p, p, |_, _| rng.random::<f64>() - 0.5);
        SubspaceBasis::orthonormalize(&m).unwrap().into_matrix()
    }

    fn random_symmetric(p: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        let m = DenseMatrix::from_fn(p, p, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        DenseMatrix::from_fn(p, p, |i, j| m[(i, j)] + m[(j, i)])
    }

    #[test]
    fn eig_identity() {
        let eig = eig_sym(&DenseMatrix::identity(3)).unwrap();
        assert_eq!(eig.eigenvalues, vec![1.0, 1.0, 1.0]);
        let gram = eig
            .eigenvectors
            .transpose()
            .matmul(&eig.eigenvectors)
            .unwrap();
        assert!(gram.sub(&DenseMatrix::identity(3)).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn eig_diagonal_gives_standard_basis() {
        let eig = eig_sym(&DenseMatrix::from_diag(&[1.0, 4.0, 0.0])).unwrap();
        assert_eq!(eig.eigenvalues, vec![4.0, 1.0, 0.0]);
        let expected = DenseMatrix::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert!(eig.eigenvectors.sub(&expected).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn eig_reconstructs_known_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let q = random_orthogonal(6, &mut rng);
        let d = [5.0, 3.0, 2.5, 1.0, -0.5, -2.0];
        let a = q
            .matmul(&DenseMatrix::from_diag(&d))
            .unwrap()
            .matmul(&q.transpose())
            .unwrap();
        let a = DenseMatrix::from_fn(6, 6, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
        let eig = eig_sym(&a).unwrap();
        for (got, want) in eig.eigenvalues.iter().zip(d) {
            assert!((got - want).abs() < 1e-10);
        }
        let err = eig.reconstruct().sub(&a).unwrap().sym_norm2().unwrap();
        assert!(err <= 1e-8 * (1.0 + a.sym_norm2().unwrap()));
    }

    #[test]
    fn eig_rejects_bad_input() {
        assert!(matches!(
            eig_sym(&DenseMatrix::zeros(2, 3)),
            Err(Error::Contract(_))
        ));
        let asym = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(eig_sym(&asym), Err(Error::Contract(_))));
    }

    #[test]
    fn orientation_skips_zero_leading_component() {
        // Top eigenvector is (0, -1, 1)/√2 up to sign; first component is exactly zero.
        let a = DenseMatrix::from_rows(&[
            vec![0.0, 0.0, 0.0],
            vec![0.0, 1.0, -1.0],
            vec![0.0, -1.0, 1.0],
        ])
        .unwrap();
        let eig = eig_sym(&a).unwrap();
        let v0 = eig.eigenvectors.column(0);
        assert!(v0[0].abs() < 1e-12);
        assert!(v0[1] > 0.0);
    }

    #[test]
    fn pinv_examples() {
        let id = pinv_sym(&DenseMatrix::identity(4), 1e-10).unwrap();
        assert!(id.sub(&DenseMatrix::identity(4)).unwrap().max_abs() < 1e-14);

        let p = pinv_sym(&DenseMatrix::from_diag(&[2.0, 0.0]), 1e-10).unwrap();
        assert!(
            p.sub(&DenseMatrix::from_diag(&[0.5, 0.0]))
                .unwrap()
                .max_abs()
                < 1e-14
        );

        let v = [0.6, 0.0, 0.8];
        let vv = DenseMatrix::from_fn(3, 3, |i, j| v[i] * v[j]);
        let p = pinv_sym(&vv, 1e-10).unwrap();
        assert!(p.sub(&vv).unwrap().max_abs() < 1e-12);
        let apa = vv.matmul(&p).unwrap().matmul(&vv).unwrap();
        assert!(apa.sub(&vv).unwrap().max_abs() < 1e-12);

        assert!(pinv_sym(&vv, 0.0).is_err());
    }

    /// Normal equations summed term by term, solved by Gaussian elimination
    /// with partial pivoting.
    fn brute_force_wls(design: &DenseMatrix, t: &[f64], w: &[f64]) -> Vec<f64> {
        let k = design.cols();
        let mut a = vec![vec![0.0; k + 1]; k];
        for i in 0..design.rows() {
            let row = design.row(i);
            for r in 0..k {
                for c in 0..k {
                    a[r][c] += w[i] * row[r] * row[c];
                }
                a[r][k] += w[i] * row[r] * t[i];
            }
        }
        for col in 0..k {
            let piv = (col..k)
                .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
                .unwrap();
            a.swap(col, piv);
            for r in col + 1..k {
                let f = a[r][col] / a[col][col];
                for c in col..=k {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
        let mut x = vec![0.0; k];
        for r in (0..k).rev() {
            let s: f64 = (r + 1..k).map(|c| a[r][c] * x[c]).sum();
            x[r] = (a[r][k] - s) / a[r][r];
        }
        x
    }

    fn random_design(n: usize, p: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        DenseMatrix::from_fn(n, p + 1, |_, j| {
            if j == 0 {
                1.0
            } else {
                rng.random::<f64>() * 4.0 - 2.0
            }
        })
    }

    #[test]
    fn wls_exact_on_linear_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let design = random_design(30, 3, &mut rng);
        let beta = [0.5, -1.0, 2.0, 3.5];
        let t: Vec<f64> = (0..30)
            .map(|i| design.row(i).iter().zip(&beta).map(|(a, b)| a * b).sum())
            .collect();
        let got = weighted_ls(&design, &t, &vec![1.0; 30], Ridge::Fixed(0.0)).unwrap();
        for (g, b) in got.iter().zip(beta) {
            assert!((g - b).abs() < 1e-10);
        }
    }

    #[test]
    fn wls_constant_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let design = random_design(20, 2, &mut rng);
        let got = weighted_ls(&design, &[4.2; 20], &[1.0; 20], Ridge::Auto).unwrap();
        assert!((got[0] - 4.2).abs() < 1e-10);
        assert!(got[1].abs() < 1e-10 && got[2].abs() < 1e-10);
    }

    #[test]
    fn wls_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let design = random_design(200, 4, &mut rng);
        let t: Vec<f64> = (0..200).map(|_| rng.random::<f64>() * 10.0).collect();
        let w: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
        let got = weighted_ls(&design, &t, &w, Ridge::Auto).unwrap();
        let want = brute_force_wls(&design, &t, &w);
        for (g, b) in got.iter().zip(want) {
            assert!((g - b).abs() < 1e-8, "{g} vs {b}");
        }
    }

    #[test]
    fn wls_all_zero_weights_is_degenerate() {
        let design = DenseMatrix::from_fn(5, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let err = weighted_ls(&design, &[1.0; 5], &[0.0; 5], Ridge::Auto).unwrap_err();
        assert!(matches!(err, Error::DegenerateNeighborhood { .. }));
    }

    #[test]
    fn wls_auto_ridge_handles_collinear_design() {
        // Second and third columns identical: singular normal matrix.
        let design = DenseMatrix::from_fn(10, 3, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let t: Vec<f64> = (0..10).map(|i| 1.0 + 2.0 * i as f64).collect();
        let beta = weighted_ls(&design, &t, &[1.0; 10], Ridge::Auto).unwrap();
        assert!((beta[1] + beta[2] - 2.0).abs() < 1e-6);
        assert!((beta[1] - beta[2]).abs() < 1e-6);
    }

    #[test]
    fn distance_examples() {
        let e1 = SubspaceBasis::coordinate(2, &[0]).unwrap();
        let e2 = SubspaceBasis::coordinate(2, &[1]).unwrap();
        assert_eq!(subspace_distance(&e1, &e1).unwrap(), 0.0);
        assert!((subspace_distance(&e1, &e2).unwrap() - 1.0).abs() < 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let diag =
            SubspaceBasis::from_orthonormal(DenseMatrix::from_row_major(2, 1, vec![s, s]).unwrap())
                .unwrap();
        // Projector difference [[1/2, -1/2], [-1/2, -1/2]] has eigenvalues ±1/√2.
        assert!((subspace_distance(&e1, &diag).unwrap() - s).abs() < 1e-10);
        let e3 = SubspaceBasis::coordinate(3, &[0]).unwrap();
        assert!(subspace_distance(&e1, &e3).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn eig_trace_and_orthogonality(seed in any::<u64>(), p in 1usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_symmetric(p, &mut rng);
            let eig = eig_sym(&a).unwrap();
            let sum: f64 = eig.eigenvalues.iter().sum();
            prop_assert!((sum - a.trace()).abs() < 1e-8);
            prop_assert!(eig.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
            let gram = eig.eigenvectors.transpose().matmul(&eig.eigenvectors).unwrap();
            prop_assert!(gram.sub(&DenseMatrix::identity(p)).unwrap().max_abs() < 1e-10);
            let err = eig.reconstruct().sub(&a).unwrap().sym_norm2().unwrap();
            prop_assert!(err <= 1e-8 * (1.0 + a.sym_norm2().unwrap()));
        }

        #[test]
        fn pinv_penrose_identities(seed in any::<u64>(), p in 1usize..7, rank in 0usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = random_orthogonal(p, &mut rng);
            let d: Vec<f64> = (0..p).map(|k| if k < rank { rng.random::<f64>() * 4.0 - 2.0 } else { 0.0 }).collect();
            let a = q.matmul(&DenseMatrix::from_diag(&d)).unwrap().matmul(&q.transpose()).unwrap();
            let a = DenseMatrix::from_fn(p, p, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
            let ap = pinv_sym(&a, PINV_REL_TOL).unwrap();
            prop_assert!(ap.is_symmetric(1e-12));
            let apa = a.matmul(&ap).unwrap().matmul(&a).unwrap();
            prop_assert!(apa.sub(&a).unwrap().max_abs() < 1e-8);
            let pap = ap.matmul(&a).unwrap().matmul(&ap).unwrap();
            prop_assert!(pap.sub(&ap).unwrap().max_abs() < 1e-8 * (1.0 + ap.max_abs()));
        }

        #[test]
        fn wls_weight_scaling_and_ols(seed in any::<u64>(), c in 0.01f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let design = random_design(40, 3, &mut rng);
            let t: Vec<f64> = (0..40).map(|_| rng.random::<f64>()).collect();
            let w: Vec<f64> = (0..40).map(|_| rng.random::<f64>() + 0.1).collect();
            let base = weighted_ls(&design, &t, &w, Ridge::Auto).unwrap();
            let scaled: Vec<f64> = w.iter().map(|v| v * c).collect();
            let again = weighted_ls(&design, &t, &scaled, Ridge::Auto).unwrap();
            for (a, b) in base.iter().zip(&again) {
                prop_assert!((a - b).abs() < 1e-8);
            }
            let ols = weighted_ls(&design, &t, &vec![1.0; 40], Ridge::Auto).unwrap();
            let eq = weighted_ls(&design, &t, &vec![c; 40], Ridge::Auto).unwrap();
            for (a, b) in ols.iter().zip(&eq) {
                prop_assert!((a - b).abs() < 1e-8);
            }
        }

        #[test]
        fn distance_is_a_bounded_metric(seed in any::<u64>(), p in 2usize..7, d in 1usize..3) {
            let d = d.min(p);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut sub = || {
                let m = DenseMatrix::from_fn(p, d, |_, _| rng.random::<f64>() - 0.5);
                SubspaceBasis::orthonormalize(&m).unwrap()
            };
            let (a, b, c) = (sub(), sub(), sub());
            let ab = subspace_distance(&a, &b).unwrap();
            let ba = subspace_distance(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&ab));
            let ac = subspace_distance(&a, &c).unwrap();
            let bc = subspace_distance(&b, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-10);

            // Right-multiplying by an orthogonal d×d matrix leaves the subspace unchanged.
            let q = random_orthogonal(d, &mut rng);
            let rotated = SubspaceBasis::from_orthonormal(a.matrix().matmul(&q).unwrap()).unwrap();
            prop_assert!(subspace_distance(&a, &rotated).unwrap() < 1e-10);
        }
    }
}
