//! Five-point relative pose.
//!
//! The epipolar constraints of five bearing pairs leave a four-dimensional
//! null space `E = xX + yY + zZ + W`. Imposing `det E = 0` and the trace
//! constraint gives ten cubics in `(x, y, z)`. After Gauss-Jordan elimination
//! of the 10x20 coefficient matrix, three combinations of the reduced rows
//! form a 3x3 matrix whose entries are polynomials in `z` only; its
//! determinant is the degree-10 polynomial whose real roots are the
//! candidate solutions.

use nalgebra::{Matrix3, SMatrix, Vector3, SVD};

use super::SolverError;
use crate::geometry::Bearing;
use crate::poly;

/// Tolerance on `|det E|` for a unit-Frobenius essential matrix.
pub const DET_TOL: f64 = 1e-8;
/// Elementwise tolerance on `2 E E^T E - tr(E E^T) E`.
pub const TRACE_TOL: f64 = 1e-6;
/// Tolerance on `|b^T E a|` for the input correspondences.
pub const EPIPOLAR_TOL: f64 = 1e-8;

const IMAG_TOL: f64 = 1e-6;

/// Essential matrix with unit Frobenius norm and its largest-magnitude entry positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EssentialMatrix(Matrix3<f64>);

impl EssentialMatrix {
    /// Normalizes and sign-canonicalizes `m`.
    pub fn new(m: Matrix3<f64>) -> Option<Self> {
        let n = m.norm();
        if !(n > 0.0 && n.is_finite()) {
            return None;
        }
        let m = m / n;
        let val = m
            .iter()
            .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { *v } else { acc });
        Some(Self(if val < 0.0 { -m } else { m }))
    }

    /// `[t]x R` for a relative pose mapping source-frame points into the target frame.
    pub fn from_pose(rotation: &Matrix3<f64>, translation: &Vector3<f64>) -> Option<Self> {
        Self::new(translation.cross_matrix() * rotation)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn det_residual(&self) -> f64 {
        self.0.determinant().abs()
    }

    pub fn trace_residual(&self) -> f64 {
        let e = &self.0;
        let eet = e * e.transpose();
        (2.0 * eet * e - eet.trace() * e).amax()
    }

    pub fn epipolar_residual(&self, pair: &BearingPair) -> f64 {
        (pair.target.as_vector().transpose() * self.0 * pair.source.as_vector())[0].abs()
    }

    /// Whether both algebraic essential-matrix constraints hold.
    pub fn satisfies_constraints(&self) -> bool {
        self.det_residual() <= DET_TOL && self.trace_residual() <= TRACE_TOL
    }

    /// Distance to `other` up to sign.
    pub fn distance(&self, other: &EssentialMatrix) -> f64 {
        (self.0 - other.0).norm().min((self.0 + other.0).norm())
    }
}

/// Two observations of one point: `target = R * source + t` up to depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BearingPair {
    pub source: Bearing,
    pub target: Bearing,
}

impl BearingPair {
    pub fn new(source: Bearing, target: Bearing) -> Self {
        Self { source, target }
    }
}

// Trivariate polynomial of total degree <= 3, dense over x^i y^j z^k, i,j,k <= 3.
#[derive(Clone, Copy)]
struct Cubic([f64; 64]);

const fn mono(i: usize, j: usize, k: usize) -> usize {
    i * 16 + j * 4 + k
}

impl Cubic {
    fn zero() -> Self {
        Cubic([0.0; 64])
    }

    fn linear(x: f64, y: f64, z: f64, w: f64) -> Self {
        let mut p = Self::zero();
        p.0[mono(1, 0, 0)] = x;
        p.0[mono(0, 1, 0)] = y;
        p.0[mono(0, 0, 1)] = z;
        p.0[mono(0, 0, 0)] = w;
        p
    }

    fn mul(&self, other: &Cubic) -> Cubic {
        let mut out = Self::zero();
        for a in 0..64 {
            let ca = self.0[a];
            if ca == 0.0 {
                continue;
            }
            let (ai, aj, ak) = (a / 16, (a / 4) % 4, a % 4);
            for b in 0..64 {
                let cb = other.0[b];
                if cb == 0.0 {
                    continue;
                }
                let (bi, bj, bk) = (b / 16, (b / 4) % 4, b % 4);
                let (i, j, k) = (ai + bi, aj + bj, ak + bk);
                debug_assert!(i + j + k <= 3);
                out.0[mono(i, j, k)] += ca * cb;
            }
        }
        out
    }

    fn add(&self, other: &Cubic) -> Cubic {
        let mut out = *self;
        for (o, v) in out.0.iter_mut().zip(other.0.iter()) {
            *o += v;
        }
        out
    }

    fn scale(&self, s: f64) -> Cubic {
        let mut out = *self;
        for o in out.0.iter_mut() {
            *o *= s;
        }
        out
    }
}

// Column order of the 10x20 system. After elimination, rows 4..10 lead with
// x^2 z, x^2, y^2 z, y^2, xyz, xy which pair up as (row, z * next row).
const MONOMIALS: [(usize, usize, usize); 20] = [
    (3, 0, 0),
    (0, 3, 0),
    (2, 1, 0),
    (1, 2, 0),
    (2, 0, 1),
    (2, 0, 0),
    (0, 2, 1),
    (0, 2, 0),
    (1, 1, 1),
    (1, 1, 0),
    (1, 0, 2),
    (1, 0, 1),
    (1, 0, 0),
    (0, 1, 2),
    (0, 1, 1),
    (0, 1, 0),
    (0, 0, 3),
    (0, 0, 2),
    (0, 0, 1),
    (0, 0, 0),
];

fn null_space_basis(pairs: &[BearingPair; 5]) -> Result<[Matrix3<f64>; 4], SolverError> {
    let mut a = SMatrix::<f64, 9, 9>::zeros();
    for (row, p) in pairs.iter().enumerate() {
        let s = p.source.as_vector();
        let t = p.target.as_vector();
        for r in 0..3 {
            for c in 0..3 {
                a[(row, 3 * r + c)] = t[r] * s[c];
            }
        }
    }
    let svd = SVD::new(a, false, true);
    let v_t = svd.v_t.ok_or(SolverError::EmptySolutionSet)?;
    let mut order: Vec<usize> = (0..9).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let s = &svd.singular_values;
    // The five constraints must be independent.
    if s[order[4]] <= 1e-10 * s[order[0]] {
        return Err(SolverError::EmptySolutionSet);
    }
    let basis = |k: usize| {
        let row = v_t.row(order[k]);
        Matrix3::from_row_slice(&row.iter().copied().collect::<Vec<_>>())
    };
    Ok([basis(5), basis(6), basis(7), basis(8)])
}

fn constraint_matrix(basis: &[Matrix3<f64>; 4]) -> [[f64; 20]; 10] {
    let [bx, by, bz, bw] = basis;
    let mut e = [[Cubic::zero(); 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            e[r][c] = Cubic::linear(bx[(r, c)], by[(r, c)], bz[(r, c)], bw[(r, c)]);
        }
    }
    let minor = |a: usize, b: usize, c: usize, d: usize| {
        e[1][a].mul(&e[2][b]).add(&e[1][c].mul(&e[2][d]).scale(-1.0))
    };
    let det = e[0][0]
        .mul(&minor(1, 2, 2, 1))
        .add(&e[0][1].mul(&minor(0, 2, 2, 0)).scale(-1.0))
        .add(&e[0][2].mul(&minor(0, 1, 1, 0)));

    let mut eet = [[Cubic::zero(); 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            let mut acc = Cubic::zero();
            for k in 0..3 {
                acc = acc.add(&e[r][k].mul(&e[c][k]));
            }
            eet[r][c] = acc;
        }
    }
    let trace = eet[0][0].add(&eet[1][1]).add(&eet[2][2]);

    let mut eqs = vec![det];
    for r in 0..3 {
        for c in 0..3 {
            let mut acc = Cubic::zero();
            for k in 0..3 {
                acc = acc.add(&eet[r][k].mul(&e[k][c]));
            }
            eqs.push(acc.scale(2.0).add(&trace.mul(&e[r][c]).scale(-1.0)));
        }
    }

    let mut m = [[0.0; 20]; 10];
    for (row, eq) in eqs.iter().enumerate() {
        for (col, &(i, j, k)) in MONOMIALS.iter().enumerate() {
            m[row][col] = eq.0[mono(i, j, k)];
        }
    }
    m
}

fn gauss_jordan(m: &mut [[f64; 20]; 10]) -> Result<(), SolverError> {
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return Err(SolverError::EmptySolutionSet);
    }
    for col in 0..10 {
        let pivot = (col..10)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        if m[pivot][col].abs() <= 1e-12 * scale {
            return Err(SolverError::EmptySolutionSet);
        }
        m.swap(col, pivot);
        let p = m[col][col];
        for v in m[col].iter_mut() {
            *v /= p;
        }
        let pivot_row = m[col];
        for (r, row) in m.iter_mut().enumerate() {
            if r == col {
                continue;
            }
            let f = row[col];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(pivot_row.iter()) {
                    *v -= f * pv;
                }
            }
        }
    }
    Ok(())
}

// Coefficients of x, y and 1 (as polynomials in z) of a reduced row's tail.
fn row_polys(r: &[f64; 20]) -> [Vec<f64>; 3] {
    [
        vec![r[12], r[11], r[10]],
        vec![r[15], r[14], r[13]],
        vec![r[19], r[18], r[17], r[16]],
    ]
}

fn hidden_variable_matrix(m: &[[f64; 20]; 10]) -> [[Vec<f64>; 3]; 3] {
    let combine = |lead: usize, next: usize| {
        let a = row_polys(&m[lead]);
        let b = row_polys(&m[next]);
        let zb = |p: &Vec<f64>| poly::mul(p, &[0.0, 1.0]);
        [
            poly::sub(&a[0], &zb(&b[0])),
            poly::sub(&a[1], &zb(&b[1])),
            poly::sub(&a[2], &zb(&b[2])),
        ]
    };
    [combine(4, 5), combine(6, 7), combine(8, 9)]
}

fn det3_poly(b: &[[Vec<f64>; 3]; 3]) -> Vec<f64> {
    let m = |r1: usize, c1: usize, r2: usize, c2: usize| poly::mul(&b[r1][c1], &b[r2][c2]);
    let c0 = poly::sub(&m(1, 1, 2, 2), &m(1, 2, 2, 1));
    let c1 = poly::sub(&m(1, 0, 2, 2), &m(1, 2, 2, 0));
    let c2 = poly::sub(&m(1, 0, 2, 1), &m(1, 1, 2, 0));
    let t0 = poly::mul(&b[0][0], &c0);
    let t1 = poly::mul(&b[0][1], &c1);
    let t2 = poly::mul(&b[0][2], &c2);
    poly::add(&poly::sub(&t0, &t1), &t2)
}

/// Essential matrices consistent with five bearing pairs (`target^T E source = 0`).
///
/// Only solutions passing the determinant, trace and epipolar checks are
/// returned. At most ten solutions exist.
pub fn essential_5pt(pairs: &[BearingPair; 5]) -> Result<Vec<EssentialMatrix>, SolverError> {
    let basis = null_space_basis(pairs)?;
    let mut m = constraint_matrix(&basis);
    gauss_jordan(&mut m)?;
    let b = hidden_variable_matrix(&m);
    let det = det3_poly(&b);
    let roots = poly::real_roots(&det, IMAG_TOL, 1);

    let mut out = Vec::with_capacity(roots.len());
    for z in roots {
        let mut num = Matrix3::zeros();
        for r in 0..3 {
            for c in 0..3 {
                num[(r, c)] = poly::eval(&b[r][c], z);
            }
        }
        let rows = [
            num.row(0).transpose(),
            num.row(1).transpose(),
            num.row(2).transpose(),
        ];
        let v = [
            rows[0].cross(&rows[1]),
            rows[0].cross(&rows[2]),
            rows[1].cross(&rows[2]),
        ]
        .into_iter()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap();
        if v.z.abs() <= f64::EPSILON * v.norm() {
            continue;
        }
        let (x, y) = (v.x / v.z, v.y / v.z);
        let e = basis[0] * x + basis[1] * y + basis[2] * z + basis[3];
        let Some(e) = EssentialMatrix::new(e) else {
            continue;
        };
        if e.satisfies_constraints() && pairs.iter().all(|p| e.epipolar_residual(p) <= EPIPOLAR_TOL) {
            out.push(e);
        }
    }
    Ok(out)
}

/// Depths `(source, target)` of the point seen by `pair` under relative pose `(r, t)`.
pub fn pair_depths(r: &Matrix3<f64>, t: &Vector3<f64>, pair: &BearingPair) -> Option<(f64, f64)> {
    // target_depth * b - source_depth * R a = t
    let a = r * pair.source.as_vector();
    let b = pair.target.as_vector();
    let aa = a.dot(&a);
    let bb = b.dot(b);
    let ab = a.dot(b);
    let denom = aa * bb - ab * ab;
    if denom <= 1e-24 {
        return None;
    }
    let at = a.dot(t);
    let bt = b.dot(t);
    let target = (aa * bt - ab * at) / denom;
    let source = (ab * bt - bb * at) / denom;
    Some((source, target))
}

/// Relative rotation and unit translation direction from an essential matrix.
///
/// Of the four `(R, ±t)` factorizations, picks the one with the most pairs
/// at positive depth in both frames. That count must be a strict majority.
pub fn decompose_essential(
    e: &EssentialMatrix,
    pairs: &[BearingPair],
) -> Result<(Matrix3<f64>, Vector3<f64>), SolverError> {
    if pairs.is_empty() {
        return Err(SolverError::AmbiguousCheirality);
    }
    let svd = SVD::new(*e.matrix(), true, true);
    let (mut u, mut v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    // Order singular values descending so the null direction is last.
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    u = Matrix3::from_columns(&[u.column(order[0]), u.column(order[1]), u.column(order[2])]);
    v_t = Matrix3::from_rows(&[v_t.row(order[0]), v_t.row(order[1]), v_t.row(order[2])]);
    if u.determinant() < 0.0 {
        u = -u;
    }
    if v_t.determinant() < 0.0 {
        v_t = -v_t;
    }
    let w = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    let t = u.column(2).into_owned().normalize();
    let candidates = [
        (u * w * v_t, t),
        (u * w * v_t, -t),
        (u * w.transpose() * v_t, t),
        (u * w.transpose() * v_t, -t),
    ];
    let mut best: Option<(usize, Matrix3<f64>, Vector3<f64>)> = None;
    for (r, t) in candidates {
        let front = pairs
            .iter()
            .filter(|p| matches!(pair_depths(&r, &t, p), Some((a, b)) if a > 0.0 && b > 0.0))
            .count();
        if best.as_ref().is_none_or(|(n, _, _)| front > *n) {
            best = Some((front, r, t));
        }
    }
    let (front, r, t) = best.unwrap();
    if 2 * front <= pairs.len() {
        return Err(SolverError::AmbiguousCheirality);
    }
    Ok((r, t))
}
