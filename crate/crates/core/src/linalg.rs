//! Small dense helpers shared by the numerical modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
}

/// Symmetric eigendecomposition with eigenvalues sorted descending.
///
/// Each eigenvector is sign-normalised so that its largest-magnitude entry
/// (first one on ties) is positive. Column `i` of the returned matrix pairs
/// with eigenvalue `i`.
pub fn sym_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "sym_eigen needs a square matrix");
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        let mut pivot = 0;
        for k in 1..n {
            if col[k].abs() > col[pivot].abs() {
                pivot = k;
            }
        }
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    (values, vectors)
}

/// Principal square root of `m + eps * I`, eigenvalues clamped at zero.
pub fn psd_sqrt(m: &DMatrix<f64>, eps: f64) -> DMatrix<f64> {
    let n = m.nrows();
    let shifted = m + DMatrix::identity(n, n) * eps;
    let (values, vectors) = sym_eigen(&shifted);
    let roots = DVector::from_iterator(n, values.iter().map(|v| v.max(0.0).sqrt()));
    &vectors * DMatrix::from_diagonal(&roots) * vectors.transpose()
}

pub fn sym_vec_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Upper-triangle vectorisation, row by row, off-diagonal entries scaled by
/// sqrt(2) so that the Euclidean norm equals the Frobenius norm.
pub fn sym_vec(m: &DMatrix<f64>) -> Vec<f64> {
    let d = m.nrows();
    let mut out = Vec::with_capacity(sym_vec_len(d));
    for i in 0..d {
        out.push(m[(i, i)]);
        for j in i + 1..d {
            out.push(0.5 * (m[(i, j)] + m[(j, i)]) * std::f64::consts::SQRT_2);
        }
    }
    out
}

/// Inverse of [`sym_vec`].
pub fn sym_unvec(v: &[f64], d: usize) -> DMatrix<f64> {
    assert_eq!(v.len(), sym_vec_len(d));
    let mut m = DMatrix::zeros(d, d);
    let mut k = 0;
    for i in 0..d {
        m[(i, i)] = v[k];
        k += 1;
        for j in i + 1..d {
            let x = v[k] / std::f64::consts::SQRT_2;
            m[(i, j)] = x;
            m[(j, i)] = x;
            k += 1;
        }
    }
    m
}

/// Rank-revealing Gram-Schmidt over the columns of `m`, taken in index order.
///
/// A column is accepted when its residual after two orthogonalisation passes
/// exceeds `rel_tol` times the largest column norm.
pub fn orthonormal_column_space(m: &DMatrix<f64>, rel_tol: f64) -> Vec<DVector<f64>> {
    let scale = m.column_iter().map(|c| c.norm()).fold(0.0_f64, f64::max);
    let mut basis: Vec<DVector<f64>> = Vec::new();
    if scale == 0.0 {
        return basis;
    }
    for col in m.column_iter() {
        let mut v = col.into_owned();
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&v);
                v.axpy(-c, b, 1.0);
            }
        }
        let r = v.norm();
        if r > rel_tol * scale {
            basis.push(v / r);
        }
    }
    basis
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn rows_to_matrix(rows: &[Vec<f64>]) -> Option<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return None;
    }
    Some(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Serde adapter storing a `DMatrix` as row-major nested arrays.
pub mod serde_rows {
    use super::{matrix_to_rows, rows_to_matrix};
    use nalgebra::DMatrix;
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        matrix_to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        rows_to_matrix(&rows).ok_or_else(|| D::Error::custom("ragged matrix rows"))
    }
}

/// Serde adapter for a list of matrices, each as row-major nested arrays.
pub mod serde_rows_vec {
    use super::{matrix_to_rows, rows_to_matrix};
    use nalgebra::DMatrix;
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(ms: &[DMatrix<f64>], s: S) -> Result<S::Ok, S::Error> {
        ms.iter()
            .map(matrix_to_rows)
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DMatrix<f64>>, D::Error> {
        let all = Vec::<Vec<Vec<f64>>>::deserialize(d)?;
        all.iter()
            .map(|rows| rows_to_matrix(rows).ok_or_else(|| D::Error::custom("ragged matrix rows")))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_and_sign_normalised() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 1.0]);
        let (vals, vecs) = sym_eigen(&m);
        assert_eq!(vals.len(), 3);
        assert!((vals[0] - 5.0).abs() < 1e-12);
        assert!((vals[2] - 1.0).abs() < 1e-12);
        for c in vecs.column_iter() {
            let (idx, _) = c.iamax_full();
            assert!(c[idx] > 0.0);
        }
    }

    #[test]
    fn sym_vec_round_trip_and_norm() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        let v = sym_vec(&m);
        assert_eq!(v.len(), 6);
        assert!((norm(&v) - m.norm()).abs() < 1e-12);
        assert!(max_abs_diff(&sym_unvec(&v, 3), &m) < 1e-15);
    }

    #[test]
    fn psd_sqrt_of_diagonal() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]);
        let r = psd_sqrt(&m, 1e-8);
        assert!((r[(0, 0)] - 2.0).abs() < 1e-6);
        assert!((r[(1, 1)] - 1.0).abs() < 1e-6);
        let back = &r * &r;
        assert!(max_abs_diff(&back, &(m + DMatrix::identity(2, 2) * 1e-8)) < 1e-8);
    }

    #[test]
    fn column_space_detects_rank() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 3.0]);
        let b = orthonormal_column_space(&m, 1e-8);
        assert_eq!(b.len(), 2);
        assert!(b[0].dot(&b[1]).abs() < 1e-14);
    }
}
