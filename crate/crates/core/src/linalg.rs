//! Small dense complex linear algebra on top of nalgebra: full SVDs,
//! numerical rank, orthonormal null-space bases and principal angles.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

/// A singular value counts as nonzero iff it exceeds this fraction of the largest.
pub const RANK_TOL: f64 = 1e-8;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn real_matrix(rows: usize, cols: usize, data_row_major: &[f64]) -> CMatrix {
    CMatrix::from_row_iterator(rows, cols, data_row_major.iter().map(|&x| c(x, 0.0)))
}

/// Full SVD `a = u · diag(s) · v^H` with `v` square (ncols × ncols) and
/// singular values sorted in decreasing order. Missing singular values of a
/// wide matrix are reported as zero.
pub struct FullSvd {
    pub u: CMatrix,
    pub singular_values: Vec<f64>,
    pub v: CMatrix,
}

pub fn full_svd(a: &CMatrix) -> FullSvd {
    let (m, n) = a.shape();
    if n == 0 {
        return FullSvd {
            u: CMatrix::identity(m, m),
            singular_values: Vec::new(),
            v: CMatrix::zeros(0, 0),
        };
    }
    // nalgebra returns a thin V^H for wide inputs; zero rows leave the
    // right singular vectors unchanged and make V square.
    let padded = if m < n {
        let mut p = CMatrix::zeros(n, n);
        p.view_mut((0, 0), (m, n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^H");
    let s = svd.singular_values;

    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].partial_cmp(&s[i]).unwrap().then(i.cmp(&j)));

    let rows_u = u.nrows().min(m);
    let mut u_sorted = CMatrix::zeros(m, order.len());
    let mut v_sorted = CMatrix::zeros(n, n);
    let mut sv = Vec::with_capacity(order.len());
    for (dst, &src) in order.iter().enumerate() {
        sv.push(s[src]);
        for r in 0..rows_u {
            u_sorted[(r, dst)] = u[(r, src)];
        }
        for r in 0..n {
            v_sorted[(r, dst)] = v_t[(src, r)].conj();
        }
    }
    sv.truncate(n);
    FullSvd {
        u: u_sorted,
        singular_values: sv,
        v: v_sorted,
    }
}

pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap());
    s
}

/// Numerical rank with the relative tolerance `rel_tol · σ₁`.
pub fn numerical_rank(a: &CMatrix, rel_tol: f64) -> usize {
    let s = singular_values(a);
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().filter(|&&x| x > rel_tol * top).count(),
        _ => 0,
    }
}

/// Orthonormal basis (as columns) of the null space of `a`, an `? × n`
/// matrix, ordered by singular value then index. An empty or zero `a`
/// yields the canonical basis of `C^n`.
pub fn null_space(a: &CMatrix, n: usize) -> CMatrix {
    if a.nrows() == 0 {
        return CMatrix::identity(n, n);
    }
    assert_eq!(a.ncols(), n, "null_space: column count mismatch");
    let svd = full_svd(a);
    let top = svd.singular_values.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return CMatrix::identity(n, n);
    }
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&x| x > RANK_TOL * top)
        .count();
    // Smallest singular values first.
    let cols: Vec<usize> = (rank..n).rev().collect();
    let mut basis = CMatrix::zeros(n, cols.len());
    for (dst, &src) in cols.iter().enumerate() {
        basis.set_column(dst, &svd.v.column(src));
    }
    basis
}

pub fn vstack(blocks: &[&CMatrix]) -> CMatrix {
    let Some(first) = blocks.first() else {
        return CMatrix::zeros(0, 0);
    };
    let n = first.ncols();
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMatrix::zeros(rows, n);
    let mut r = 0;
    for b in blocks {
        assert_eq!(b.ncols(), n, "vstack: column count mismatch");
        out.view_mut((r, 0), (b.nrows(), n)).copy_from(*b);
        r += b.nrows();
    }
    out
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            for p in 0..br {
                for q in 0..bc {
                    out[(i * br + p, j * bc + q)] = s * b[(p, q)];
                }
            }
        }
    }
    out
}

/// Principal angles (radians, ascending) between the column spans of two
/// matrices with orthonormal columns. Computed from sines so that angles
/// near zero keep full relative accuracy.
pub fn principal_angles(a: &CMatrix, b: &CMatrix) -> Vec<f64> {
    let residual = b - a * (a.adjoint() * b);
    let mut s = singular_values(&residual);
    s.truncate(b.ncols());
    let mut angles: Vec<f64> = s.into_iter().map(|x| x.min(1.0).asin()).collect();
    angles.sort_by(|x, y| x.partial_cmp(y).unwrap());
    angles
}

/// Max-abs deviation of `a^H a` from the identity.
pub fn orthonormality_defect(a: &CMatrix) -> f64 {
    let g = a.adjoint() * a;
    let id = CMatrix::identity(g.nrows(), g.ncols());
    (g - id).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
