//! Dense complex linear algebra helpers shared across the crate.
//!
//! Matrices live in tensor-product Hilbert spaces with mode order
//! Q1 ⊗ Q2 ⊗ Coupler; `kron` composition follows nalgebra's row-major
//! `kronecker` convention, so the flat index of a product basis state is
//! `(i_q1 * d_q2 + i_q2) * d_c + i_c`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const ZERO: C64 = C64::new(0.0, 0.0);

/// Complex scalar from a real value.
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Identity matrix of dimension `n`.
pub fn eye(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Annihilation (lowering) operator on an `n`-level mode.
pub fn lowering(n: usize) -> CMatrix {
    let mut a = CMatrix::zeros(n, n);
    for k in 1..n {
        a[(k - 1, k)] = re((k as f64).sqrt());
    }
    a
}

/// Number operator a†a on an `n`-level mode.
pub fn number(n: usize) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(n, (0..n).map(|k| re(k as f64))))
}

/// Embed a single-mode operator into the product space at mode `mode`.
pub fn embed(op: &CMatrix, dims: &[usize], mode: usize) -> CMatrix {
    assert_eq!(op.nrows(), dims[mode], "operator does not match mode dimension");
    let mut out = eye(1);
    for (m, &d) in dims.iter().enumerate() {
        let factor = if m == mode { op.clone() } else { eye(d) };
        out = out.kronecker(&factor);
    }
    out
}

/// Total excitation-number operator Σ a†_m a_m over all modes.
pub fn total_number(dims: &[usize]) -> CMatrix {
    let full: usize = dims.iter().product();
    let mut out = CMatrix::zeros(full, full);
    for (m, &d) in dims.iter().enumerate() {
        out += embed(&number(d), dims, m);
    }
    out
}

/// Flat product-space index of a multi-mode occupation.
pub fn flat_index(occ: &[usize], dims: &[usize]) -> usize {
    occ.iter().zip(dims).fold(0, |acc, (&i, &d)| {
        debug_assert!(i < d);
        acc * d + i
    })
}

/// Occupation numbers of a flat product-space index.
pub fn multi_index(mut idx: usize, dims: &[usize]) -> Vec<usize> {
    let mut occ = vec![0; dims.len()];
    for m in (0..dims.len()).rev() {
        occ[m] = idx % dims[m];
        idx /= dims[m];
    }
    occ
}

/// Hermitian part (A + A†)/2.
pub fn hermitize(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).map(|z| z * 0.5)
}

/// Relative Hermiticity deviation ‖A − A†‖ / ‖A‖ (0 for the zero matrix).
pub fn hermiticity_deviation(a: &CMatrix) -> f64 {
    let norm = a.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (a - a.adjoint()).norm() / norm
}

/// Deviation of `u` from unitarity, ‖U U† − 1‖.
pub fn unitarity_deviation(u: &CMatrix) -> f64 {
    (u * u.adjoint() - eye(u.nrows())).norm()
}

/// tr(A) as a complex number.
pub fn trace(a: &CMatrix) -> C64 {
    a.diagonal().sum()
}

/// tr(A B), evaluated without forming the product.
pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> C64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    let mut acc = ZERO;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues are returned in ascending order with matching eigenvector
/// columns. The input is symmetrized first so callers may pass matrices
/// that are Hermitian only up to roundoff.
pub fn eigh(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let sym = hermitize(a);
    let eig = sym.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Column-major vectorization vec(A).
pub fn vectorize(a: &CMatrix) -> CVector {
    CVector::from_iterator(a.nrows() * a.ncols(), a.iter().cloned())
}

/// Restriction of the product space to total excitation number ≤ `n_max`.
///
/// The model Hamiltonians conserve total excitation number and the collapse
/// operators only lower it, so evolution started inside the sector stays
/// there; projecting is exact, not an approximation.
#[derive(Debug, Clone)]
pub struct NumberSector {
    pub dims: Vec<usize>,
    /// Flat full-space indices of the retained basis states, ascending.
    pub basis: Vec<usize>,
}

impl NumberSector {
    pub fn new(dims: &[usize], n_max: usize) -> Self {
        let full: usize = dims.iter().product();
        let basis = (0..full)
            .filter(|&idx| multi_index(idx, dims).iter().sum::<usize>() <= n_max)
            .collect();
        Self { dims: dims.to_vec(), basis }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Project a full-space operator into the sector: P A P†.
    pub fn project_op(&self, a: &CMatrix) -> CMatrix {
        let n = self.dim();
        let mut out = CMatrix::zeros(n, n);
        for (i, &bi) in self.basis.iter().enumerate() {
            for (j, &bj) in self.basis.iter().enumerate() {
                out[(i, j)] = a[(bi, bj)];
            }
        }
        out
    }

    /// Project a full-space vector into the sector.
    pub fn project_vec(&self, v: &CVector) -> CVector {
        CVector::from_iterator(self.dim(), self.basis.iter().map(|&b| v[b]))
    }

    /// Lift a sector vector back to the full space (zeros elsewhere).
    pub fn lift_vec(&self, v: &CVector) -> CVector {
        let full: usize = self.dims.iter().product();
        let mut out = CVector::zeros(full);
        for (i, &b) in self.basis.iter().enumerate() {
            out[b] = v[i];
        }
        out
    }

    /// Sector-basis position of a full-space flat index, if retained.
    pub fn position_of(&self, flat: usize) -> Option<usize> {
        self.basis.binary_search(&flat).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowering_matrix_elements() {
        let a = lowering(3);
        assert_eq!(a[(0, 1)], re(1.0));
        assert!((a[(1, 2)].re - 2.0_f64.sqrt()).abs() < 1e-15);
        assert_eq!(a[(1, 0)], ZERO);
        // a†a equals the number operator
        assert!((a.adjoint() * &a - number(3)).norm() < 1e-14);
    }

    #[test]
    fn embed_and_index_conventions_agree() {
        let dims = [2, 3, 2];
        let op = number(3);
        let n2 = embed(&op, &dims, 1);
        for idx in 0..12 {
            let occ = multi_index(idx, &dims);
            assert_eq!(flat_index(&occ, &dims), idx);
            assert!((n2[(idx, idx)].re - occ[1] as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn eigh_sorts_and_reconstructs() {
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[re(2.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), re(-1.0)],
        );
        let (vals, vecs) = eigh(&m);
        assert!(vals[0] <= vals[1]);
        let d = CMatrix::from_diagonal(&CVector::from_iterator(2, vals.iter().map(|&v| re(v))));
        let rec = &vecs * d * vecs.adjoint();
        assert!((rec - m).norm() < 1e-12);
    }

    #[test]
    fn number_sector_counts_states() {
        // three 3-level modes, N <= 2: 1 + 3 + 6 states
        let sector = NumberSector::new(&[3, 3, 3], 2);
        assert_eq!(sector.dim(), 10);
        // two-level modes, N <= 2 drops only |111>
        let sector = NumberSector::new(&[2, 2, 2], 2);
        assert_eq!(sector.dim(), 7);
    }

    #[test]
    fn sector_projection_preserves_block() {
        let dims = [2, 2];
        let h = embed(&number(2), &dims, 0) * re(3.0) + embed(&number(2), &dims, 1) * re(5.0);
        let sector = NumberSector::new(&dims, 1);
        let hp = sector.project_op(&h);
        // retained states |00>, |01>, |10> have energies 0, 5, 3
        assert_eq!(hp.nrows(), 3);
        assert!((hp[(0, 0)].re - 0.0).abs() < 1e-15);
        assert!((hp[(1, 1)].re - 5.0).abs() < 1e-15);
        assert!((hp[(2, 2)].re - 3.0).abs() < 1e-15);
    }
}
