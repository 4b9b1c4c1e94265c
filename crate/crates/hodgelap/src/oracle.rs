//! Dense ground truth: materialized operators, exact Hodge projections,
//! pseudoinverses, ranks, Betti numbers, Loewner comparisons and
//! principal angles. Everything here is desk-scale (capped) and used to
//! verify the matrix-free approximations.

use nalgebra::{DMatrix, DVector};

use crate::complex::{BoundaryOp, Chain, EmbeddedComplex, Scope};
use crate::error::{Error, Result};
use crate::linop::LinOp;

/// Default cap on total simplices for dense computations.
pub const DEFAULT_DENSE_CAP: usize = 2000;

/// Relative singular value threshold for all rank / Betti decisions.
pub const RANK_RTOL: f64 = 1e-9;

/// A materialized operator with row/column scope tags.
#[derive(Debug, Clone)]
pub struct DenseOp {
    pub mat: DMatrix<f64>,
    pub row_scope: Scope,
    pub col_scope: Scope,
}

/// Materializes a matrix-free operator by exact application to every
/// basis vector.
pub fn materialize(op: &dyn LinOp) -> DMatrix<f64> {
    let (m, n) = (op.rows(), op.cols());
    let mut out = DMatrix::zeros(m, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; m];
    for j in 0..n {
        e[j] = 1.0;
        op.apply(&e, &mut col);
        e[j] = 0.0;
        for i in 0..m {
            out[(i, j)] = col[i];
        }
    }
    out
}

pub fn boundary_matrix(op: &BoundaryOp) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(op.rows, op.cols);
    for j in 0..op.cols {
        for &(r, s) in op.column(j) {
            m[(r as usize, j)] += s as f64;
        }
    }
    m
}

pub fn check_cap(complex: &EmbeddedComplex, cap: usize) -> Result<()> {
    let size = complex.total_simplices();
    if size > cap {
        return Err(Error::TooLarge { size, cap });
    }
    Ok(())
}

/// Singular value decomposition through the symmetric eigenproblem of
/// the Jordan-Wielandt embedding [[0, A], [A^T, 0]], whose eigenvalues
/// are +-sigma with eigenvectors (u; v)/sqrt(2). The symmetric
/// tridiagonal eigensolver is robust where the general bidiagonal SVD
/// is not, and the +sigma eigenvectors yield orthonormal singular
/// vectors.
pub struct JwSvd {
    /// singular values, descending
    pub sigma: Vec<f64>,
    /// left singular vectors as columns, aligned with sigma
    pub u: DMatrix<f64>,
}

pub fn jw_svd(m: &DMatrix<f64>) -> JwSvd {
    let (r, c) = (m.nrows(), m.ncols());
    if r == 0 || c == 0 {
        return JwSvd { sigma: Vec::new(), u: DMatrix::zeros(r, 0) };
    }
    let n = r + c;
    let mut jw = DMatrix::zeros(n, n);
    for i in 0..r {
        for j in 0..c {
            jw[(i, r + j)] = m[(i, j)];
            jw[(r + j, i)] = m[(i, j)];
        }
    }
    let eig = jw.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let k = r.min(c);
    let mut sigma = Vec::with_capacity(k);
    let mut u = DMatrix::zeros(r, k);
    for (col, &idx) in order.iter().take(k).enumerate() {
        sigma.push(eig.eigenvalues[idx].max(0.0));
        let scale = 2.0f64.sqrt();
        for i in 0..r {
            u[(i, col)] = eig.eigenvectors[(i, idx)] * scale;
        }
    }
    JwSvd { sigma, u }
}

/// Rank with threshold RANK_RTOL * sigma_max.
pub fn rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let svd = jw_svd(m);
    let smax = svd.sigma.first().copied().unwrap_or(0.0);
    if smax <= 0.0 {
        return 0;
    }
    svd.sigma.iter().filter(|&&s| s > RANK_RTOL * smax).count()
}

/// Exact rank of an integer matrix over GF(p) with p = 2^61 - 1, by
/// fraction-free elimination. Cross-checks the floating SVD rank for
/// Betti decisions; a disagreement means the SVD threshold failed.
pub fn rank_mod_p(m: &DMatrix<f64>) -> usize {
    const P: u128 = (1u128 << 61) - 1;
    let (rows, cols) = (m.nrows(), m.ncols());
    if rows == 0 || cols == 0 {
        return 0;
    }
    let mut a: Vec<Vec<u128>> = (0..rows)
        .map(|i| {
            (0..cols)
                .map(|j| {
                    let v = m[(i, j)].round() as i128;
                    debug_assert_eq!(m[(i, j)], v as f64, "rank_mod_p needs integer input");
                    v.rem_euclid(P as i128) as u128
                })
                .collect()
        })
        .collect();
    fn mulmod(a: u128, b: u128, p: u128) -> u128 {
        (a * b) % p
    }
    fn powmod(mut b: u128, mut e: u128, p: u128) -> u128 {
        let mut acc = 1u128;
        b %= p;
        while e > 0 {
            if e & 1 == 1 {
                acc = mulmod(acc, b, p);
            }
            b = mulmod(b, b, p);
            e >>= 1;
        }
        acc
    }
    let mut r = 0usize;
    for c in 0..cols {
        let mut pivot = None;
        for i in r..rows {
            if a[i][c] != 0 {
                pivot = Some(i);
                break;
            }
        }
        let Some(p_row) = pivot else { continue };
        a.swap(r, p_row);
        let inv = powmod(a[r][c], P - 2, P);
        for j in c..cols {
            a[r][j] = mulmod(a[r][j], inv, P);
        }
        for i in 0..rows {
            if i != r && a[i][c] != 0 {
                let f = a[i][c];
                for j in c..cols {
                    let sub = mulmod(f, a[r][j], P);
                    a[i][j] = (a[i][j] + P - sub) % P;
                }
            }
        }
        r += 1;
        if r == rows {
            break;
        }
    }
    r
}

/// Rank of a boundary matrix with the integer cross-check enabled for
/// modest sizes.
pub fn boundary_rank(m: &DMatrix<f64>) -> usize {
    let r = rank(m);
    if m.nrows().max(m.ncols()) <= 300 {
        let rp = rank_mod_p(m);
        assert_eq!(r, rp, "SVD rank and exact mod-p rank disagree on a boundary matrix");
    }
    r
}

/// d-th Betti number of the scoped complex by rank-nullity.
pub fn betti(complex: &EmbeddedComplex, d: usize, scope: Scope, cap: usize) -> Result<usize> {
    check_cap(complex, cap)?;
    let n_d = match scope {
        Scope::X => complex.count(d),
        Scope::K => complex.k_scope(d).len(),
        Scope::T => {
            return Err(Error::ScopeMismatch {
                expected: "X or K".into(),
                got: "T".into(),
            })
        }
    };
    let rank_d = if d == 0 {
        0
    } else {
        boundary_rank(&boundary_matrix(&complex.boundary(d, scope)?))
    };
    let rank_d1 = if d + 1 > 3 {
        0
    } else {
        boundary_rank(&boundary_matrix(&complex.boundary(d + 1, scope)?))
    };
    Ok(n_d - rank_d - rank_d1)
}

/// Moore-Penrose pseudoinverse of a symmetric matrix (every
/// pseudoinverse this crate takes is of a Laplacian-like symmetric
/// operator) through the symmetric eigendecomposition.
pub fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DMatrix::zeros(m.ncols(), m.nrows());
    }
    assert!(
        symmetry_defect(m) <= 1e-9 * m.norm().max(1.0),
        "pinv expects a symmetric matrix"
    );
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let tol = RANK_RTOL * lmax;
    let n = m.nrows();
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        let l = eig.eigenvalues[k];
        if l.abs() > tol {
            let v = eig.eigenvectors.column(k);
            out += v * v.transpose() / l;
        }
    }
    out
}

/// Orthonormal basis of the column space of m (columns of the result).
pub fn column_space_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let svd = jw_svd(m);
    let smax = svd.sigma.first().copied().unwrap_or(0.0);
    if smax <= 0.0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let r = svd.sigma.iter().filter(|&&s| s > RANK_RTOL * smax).count();
    let mut q = svd.u.columns(0, r).into_owned();
    // polish to machine-precision orthonormality (two modified
    // Gram-Schmidt passes over eigensolver output)
    for _ in 0..2 {
        for j in 0..r {
            for i in 0..j {
                let qi = q.column(i).into_owned();
                let t = q.column(j).dot(&qi);
                let mut col = q.column_mut(j);
                col.axpy(-t, &qi, 1.0);
            }
            let n = q.column(j).norm();
            if n > 0.0 {
                q.column_mut(j).scale_mut(1.0 / n);
            }
        }
    }
    q
}

/// Orthogonal projection matrix onto the column space of m.
pub fn projector_onto_column_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    let q = column_space_basis(m);
    if q.ncols() == 0 {
        return DMatrix::zeros(m.nrows(), m.nrows());
    }
    &q * q.transpose()
}

/// Exact Hodge projectors for 1-chains of a scope:
/// (onto im d2, onto ker L1, onto im d1^T).
pub struct HodgeProjectors {
    pub bd: DMatrix<f64>,
    pub hr: DMatrix<f64>,
    pub cbd: DMatrix<f64>,
}

pub fn hodge_projectors(
    complex: &EmbeddedComplex,
    scope: Scope,
    cap: usize,
) -> Result<HodgeProjectors> {
    check_cap(complex, cap)?;
    let d1 = boundary_matrix(&complex.boundary(1, scope)?);
    let d2 = boundary_matrix(&complex.boundary(2, scope)?);
    let n1 = d1.ncols();
    let bd = projector_onto_column_space(&d2);
    let cbd = projector_onto_column_space(&d1.transpose());
    let hr = DMatrix::identity(n1, n1) - &bd - &cbd;
    Ok(HodgeProjectors { bd, hr, cbd })
}

/// Splits a 1-chain into (boundary, harmonic, coboundary) parts by
/// least-squares projections. Parts sum to x and are pairwise
/// orthogonal to oracle precision.
pub fn exact_hodge(
    complex: &EmbeddedComplex,
    x: &Chain,
    cap: usize,
) -> Result<(Chain, Chain, Chain)> {
    let scope = x.scope;
    let pr = hodge_projectors(complex, scope, cap)?;
    let v = DVector::from_column_slice(&x.values);
    let xb = &pr.bd * &v;
    let xh = &pr.hr * &v;
    let xc = &pr.cbd * &v;
    Ok((
        Chain::from_values(1, scope, xb.as_slice().to_vec()),
        Chain::from_values(1, scope, xh.as_slice().to_vec()),
        Chain::from_values(1, scope, xc.as_slice().to_vec()),
    ))
}

pub fn symmetry_defect(a: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Smallest eigenvalue of the symmetric matrix (b - a); the check
/// passes when b - a >= -tol * I.
pub fn loewner_min_eig(a: &DMatrix<f64>, b: &DMatrix<f64>, sym_tol: f64) -> Result<f64> {
    let da = symmetry_defect(a);
    let db = symmetry_defect(b);
    if da > sym_tol {
        return Err(Error::NotSymmetric(da));
    }
    if db > sym_tol {
        return Err(Error::NotSymmetric(db));
    }
    let diff = b - a;
    let sym = (&diff + diff.transpose()) * 0.5;
    if sym.nrows() == 0 {
        return Ok(0.0);
    }
    let eig = sym.symmetric_eigen();
    Ok(eig.eigenvalues.min())
}

/// Asserts a >= 0 relaxation: b - a >= -tol I. Returns the min
/// eigenvalue report on failure as well.
pub struct LoewnerReport {
    pub min_eig: f64,
    pub ok: bool,
}

pub fn loewner_check(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> Result<LoewnerReport> {
    let min_eig = loewner_min_eig(a, b, tol.max(1e-12) * 10.0)?;
    Ok(LoewnerReport { min_eig, ok: min_eig >= -tol })
}

/// Largest and smallest nonzero eigenvalue of a symmetric PSD matrix,
/// with the shared relative threshold separating zero modes.
pub fn psd_spectrum_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    if m.nrows() == 0 {
        return (0.0, 0.0);
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let lmax = eig.eigenvalues.max();
    let mut lmin_nonzero = 0.0;
    for &l in eig.eigenvalues.iter() {
        if l > RANK_RTOL * lmax.max(1.0) && (lmin_nonzero == 0.0 || l < lmin_nonzero) {
            lmin_nonzero = l;
        }
    }
    (lmax, lmin_nonzero)
}

/// Principal angles between the column spans of two orthonormal sets:
/// returns the cosines (singular values of Q1^T Q2).
pub fn principal_angle_cosines(q1: &DMatrix<f64>, q2: &DMatrix<f64>) -> Vec<f64> {
    if q1.ncols() == 0 || q2.ncols() == 0 {
        return Vec::new();
    }
    let m = q1.transpose() * q2;
    jw_svd(&m).sigma
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::RawComplex;

    fn tetrahedron() -> EmbeddedComplex {
        let raw = RawComplex {
            vertices: vec![
                (0, [0.0; 3]),
                (1, [1.0, 0.0, 0.0]),
                (2, [0.0, 1.0, 0.0]),
                (3, [0.0, 0.0, 1.0]),
            ],
            simplices: vec![
                vec![
                    vec![0, 1],
                    vec![0, 2],
                    vec![0, 3],
                    vec![1, 2],
                    vec![1, 3],
                    vec![2, 3],
                ],
                vec![vec![0, 1, 2], vec![0, 1, 3], vec![0, 2, 3], vec![1, 2, 3]],
                vec![vec![0, 1, 2, 3]],
            ],
            in_k: None,
        };
        EmbeddedComplex::build(&raw).unwrap()
    }

    #[test]
    fn betti_of_tetrahedron_and_boundary_sphere() {
        let c = tetrahedron();
        assert_eq!(betti(&c, 0, Scope::X, DEFAULT_DENSE_CAP).unwrap(), 1);
        assert_eq!(betti(&c, 1, Scope::X, DEFAULT_DENSE_CAP).unwrap(), 0);
        assert_eq!(betti(&c, 2, Scope::X, DEFAULT_DENSE_CAP).unwrap(), 0);

        // Boundary sphere: everything except the solid tetrahedron.
        let mut sphere = c.clone();
        sphere.in_k = [
            vec![true; 4],
            vec![true; 6],
            vec![true; 4],
            vec![false; 1],
        ];
        sphere.rebuild_k_index();
        assert_eq!(betti(&sphere, 2, Scope::K, DEFAULT_DENSE_CAP).unwrap(), 1);
        assert_eq!(betti(&sphere, 1, Scope::K, DEFAULT_DENSE_CAP).unwrap(), 0);
    }

    #[test]
    fn exact_hodge_splits_boundary_and_coboundary() {
        let c = tetrahedron();
        let d2 = c.boundary(2, Scope::X).unwrap();
        let d1 = c.boundary(1, Scope::X).unwrap();

        let mut w = Chain::zeros(2, Scope::X, c.count(2));
        w.values = vec![1.0, -2.0, 0.5, 3.0];
        let x = d2.apply(&w).unwrap();
        let (xb, xh, xc) = exact_hodge(&c, &x, DEFAULT_DENSE_CAP).unwrap();
        for i in 0..x.len() {
            assert!((xb.values[i] - x.values[i]).abs() < 1e-10);
            assert!(xh.values[i].abs() < 1e-10);
            assert!(xc.values[i].abs() < 1e-10);
        }

        let mut f = Chain::zeros(0, Scope::X, c.count(0));
        f.values = vec![1.0, 2.0, -1.0, 0.0];
        let y = d1.apply_transpose(&f).unwrap();
        let (yb, yh, yc) = exact_hodge(&c, &y, DEFAULT_DENSE_CAP).unwrap();
        for i in 0..y.len() {
            assert!((yc.values[i] - y.values[i]).abs() < 1e-10);
            assert!(yh.values[i].abs() < 1e-10);
            assert!(yb.values[i].abs() < 1e-10);
        }
    }

    #[test]
    fn hodge_parts_recombine_and_are_orthogonal() {
        let c = tetrahedron();
        let n1 = c.count(1);
        let mut x = Chain::zeros(1, Scope::X, n1);
        for (i, v) in x.values.iter_mut().enumerate() {
            *v = ((i * 31 + 7) % 11) as f64 - 5.0;
        }
        let (xb, xh, xc) = exact_hodge(&c, &x, DEFAULT_DENSE_CAP).unwrap();
        for i in 0..n1 {
            let sum = xb.values[i] + xh.values[i] + xc.values[i];
            assert!((sum - x.values[i]).abs() < 1e-10);
        }
        assert!(xb.dot(&xh).abs() < 1e-10);
        assert!(xb.dot(&xc).abs() < 1e-10);
        assert!(xh.dot(&xc).abs() < 1e-10);
    }

    #[test]
    fn loewner_trivial_cases() {
        let a = DMatrix::zeros(3, 3);
        let b = DMatrix::identity(3, 3);
        let rep = loewner_check(&a, &b, 1e-9).unwrap();
        assert!(rep.ok);
        let rep = loewner_check(&b, &a, 1e-9).unwrap();
        assert!(!rep.ok);
        assert!((rep.min_eig + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pseudoinverse_axioms_for_l1() {
        let c = tetrahedron();
        let d1 = boundary_matrix(&c.boundary(1, Scope::X).unwrap());
        let d2 = boundary_matrix(&c.boundary(2, Scope::X).unwrap());
        let l1 = &d2 * d2.transpose() + d1.transpose() * &d1;
        let p = pinv(&l1);
        let aa = &l1 * &p * &l1;
        let pp = &p * &l1 * &p;
        assert!((&aa - &l1).norm() < 1e-9 * l1.norm());
        assert!((&pp - &p).norm() < 1e-9 * p.norm().max(1.0));
        assert!(symmetry_defect(&(&l1 * &p)) < 1e-9);
        assert!(symmetry_defect(&(&p * &l1)) < 1e-9);
    }

    #[test]
    fn pseudoinverse_additivity_on_orthogonal_images() {
        let c = tetrahedron();
        let d1 = boundary_matrix(&c.boundary(1, Scope::X).unwrap());
        let d2 = boundary_matrix(&c.boundary(2, Scope::X).unwrap());
        let up = &d2 * d2.transpose();
        let down = d1.transpose() * &d1;
        let l1 = &up + &down;
        let sum = pinv(&up) + pinv(&down);
        assert!((pinv(&l1) - sum).norm() < 1e-9 * pinv(&l1).norm().max(1.0));
    }

    #[test]
    fn rank_mod_p_matches_svd_on_boundaries() {
        let c = tetrahedron();
        for d in 1..=3 {
            let m = boundary_matrix(&c.boundary(d, Scope::X).unwrap());
            assert_eq!(rank(&m), rank_mod_p(&m));
        }
    }
}
