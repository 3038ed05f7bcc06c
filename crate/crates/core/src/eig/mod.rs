//! Eigensolvers for the model matrices.
//!
//! [`dense_symmetric_eig`] handles any real symmetric matrix;
//! [`arrowhead_eig`] solves the Tavis–Cummings family through its secular
//! equation. Both return eigenvalues in ascending order with orthonormal
//! eigenvector columns aligned with the matrix basis. Exactly or numerically
//! degenerate subspaces are re-spanned by Gram–Schmidt over the basis labels
//! in order, so the returned vectors depend only on the eigenspaces.

mod arrowhead;
mod dense;

pub use arrowhead::{arrowhead_eig, perturbative_polariton_energies, secular_eval};
pub use dense::{dense_symmetric_eig, symmetric_eig};

use ndarray::{Array1, Array2, ArrayView1};

use crate::model::{ModelMatrix, StructureHint};
use crate::{Error, Result};

/// Default relative tolerance for both solvers.
pub const DEFAULT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    /// Ascending energies.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors, one per column.
    pub eigenvectors: Array2<f64>,
    /// `max_i ‖A v_i − λ_i v_i‖₂`.
    pub residual_bound: f64,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vector(&self, i: usize) -> ArrayView1<'_, f64> {
        self.eigenvectors.column(i)
    }
}

/// Arrowhead matrices go to [`arrowhead_eig`], everything else to the dense
/// solver.
pub fn diagonalize(m: &ModelMatrix, tol: f64) -> Result<EigenDecomposition> {
    match (m.structure_hint(), m.arrowhead_parts()) {
        (StructureHint::Arrowhead, Some((omega_ph, diag, arrow))) => {
            let mut full = Vec::with_capacity(diag.len() + 1);
            full.push(omega_ph);
            full.extend(diag);
            arrowhead_eig(&full, &arrow, tol)
        }
        _ => dense_symmetric_eig(m, tol),
    }
}

/// Sorts, canonicalizes degenerate subspaces, fixes signs and checks the
/// residual against `tol · ‖A‖_F`.
pub(crate) fn finalize(
    values: Vec<f64>,
    vectors: Array2<f64>,
    scale: f64,
    tol: f64,
    apply: impl Fn(&Array2<f64>) -> Array2<f64>,
) -> Result<EigenDecomposition> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let mut eigenvectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.column_mut(dst).assign(&vectors.column(src));
    }

    let cluster_tol = 64.0 * f64::EPSILON * scale.max(f64::MIN_POSITIVE);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && eigenvalues[end] - eigenvalues[end - 1] <= cluster_tol {
            end += 1;
        }
        if end - start > 1 {
            canonicalize_subspace(&mut eigenvectors, start, end);
        } else {
            fix_sign(&mut eigenvectors, start);
        }
        start = end;
    }

    let residual_bound = residual(&apply(&eigenvectors), &eigenvalues, &eigenvectors);
    if residual_bound > tol * scale {
        return Err(Error::ResidualTooLarge { residual: residual_bound, bound: tol * scale });
    }
    Ok(EigenDecomposition { eigenvalues, eigenvectors, residual_bound })
}

pub(crate) fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn residual(av: &Array2<f64>, values: &[f64], vectors: &Array2<f64>) -> f64 {
    values
        .iter()
        .enumerate()
        .map(|(i, &lam)| {
            av.column(i)
                .iter()
                .zip(vectors.column(i))
                .map(|(x, v)| (x - lam * v).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

/// Largest-magnitude component positive (first such index on near ties).
fn fix_sign(vectors: &mut Array2<f64>, col: usize) {
    let v = vectors.column(col);
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(x) = v.iter().find(|x| x.abs() >= (1.0 - 1e-8) * max) {
        if *x < 0.0 {
            vectors.column_mut(col).mapv_inplace(|x| -x);
        }
    }
}

/// Replaces columns `start..end` by the Gram–Schmidt orthonormalization of
/// the projections of `e_0, e_1, …` (label order) onto their span.
fn canonicalize_subspace(vectors: &mut Array2<f64>, start: usize, end: usize) {
    let n = vectors.nrows();
    let k = end - start;
    let q = vectors.slice(ndarray::s![.., start..end]).to_owned();
    // Coordinates of P e_j in the subspace basis are row j of q.
    let mut basis: Vec<Array1<f64>> = Vec::with_capacity(k);
    let orthogonalize = |mut y: Array1<f64>, basis: &[Array1<f64>]| {
        for _ in 0..2 {
            for b in basis {
                let c = b.dot(&y);
                y.scaled_add(-c, b);
            }
        }
        y
    };
    for j in 0..n {
        if basis.len() == k {
            break;
        }
        let y = orthogonalize(q.row(j).to_owned(), &basis);
        let norm = y.dot(&y).sqrt();
        if norm >= 1e-4 {
            basis.push(y / norm);
        }
    }
    while basis.len() < k {
        // pivoted fallback: largest remaining component
        let (y, norm) = (0..n)
            .map(|j| {
                let y = orthogonalize(q.row(j).to_owned(), &basis);
                let norm = y.dot(&y).sqrt();
                (y, norm)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty basis");
        basis.push(y / norm);
    }
    for (c, y) in basis.iter().enumerate() {
        vectors.column_mut(start + c).assign(&q.dot(y));
    }
}
