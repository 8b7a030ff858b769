//! Small dense linear-algebra helpers shared by the analysis modules.

use nalgebra::{Complex, DMatrix, Matrix3, SMatrix, SVector, Vector3};

pub type C64 = Complex<f64>;
pub type Mat8 = SMatrix<f64, 8, 8>;
pub type Vec8 = SVector<f64, 8>;
pub type CMat3 = Matrix3<C64>;
pub type CVec3 = Vector3<C64>;

/// Largest singular value.
pub fn operator_norm(x: &Mat8) -> f64 {
    x.singular_values().max()
}

/// Singular values in non-increasing order.
pub fn singular_values(x: &Mat8) -> [f64; 8] {
    let mut s: Vec<f64> = x.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    let mut out = [0.0; 8];
    out.copy_from_slice(&s);
    out
}

const SCHUR_MAX_ITER: usize = 10_000;

/// Complex eigenvalues via a real Schur form with a capped iteration count.
/// The unshifted QR sweep can cycle on orthogonal-like inputs, so on failure
/// the matrix is conjugated by a few fixed orthogonal matrices and retried.
pub fn eigenvalues(x: &Mat8) -> Option<Vec<C64>> {
    let attempt = |m: Mat8| {
        nalgebra::Schur::try_new(m, f64::EPSILON, SCHUR_MAX_ITER)
            .map(|s| s.complex_eigenvalues())
            .map(|v| v.iter().copied().collect::<Vec<_>>())
    };
    attempt(*x).or_else(|| {
        (1..=4).find_map(|k| {
            let q = Mat8::from_fn(|i, j| ((k * (i + 1) * (j + 2)) as f64).sin()).qr().q();
            attempt(q.transpose() * x * q)
        })
    })
}

/// Largest modulus among the (complex) eigenvalues. Falls back to Gelfand's
/// formula `‖x^n‖^(1/n)` with `n = 2^12` if no Schur form converges.
pub fn spectral_radius(x: &Mat8) -> f64 {
    match eigenvalues(x) {
        Some(v) => v.iter().map(|z| z.norm()).fold(0.0, f64::max),
        None => {
            let mut p = *x;
            let mut log_scale = 0.0;
            for _ in 0..12 {
                let n = p.norm();
                if n == 0.0 {
                    return 0.0;
                }
                p /= n;
                log_scale = 2.0 * (log_scale + n.ln());
                p = p * p;
            }
            ((log_scale + p.norm().ln()) / 4096.0).exp()
        }
    }
}

/// Largest absolute entry.
pub fn max_abs(x: &Mat8) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn hs_norm(x: &Mat8) -> f64 {
    x.norm()
}

/// Orthogonal projector onto the span of the columns of `basis`, which must
/// be orthonormal.
pub fn projector_from_columns(basis: &[Vec8]) -> Mat8 {
    let mut p = Mat8::zeros();
    for v in basis {
        p += v * v.transpose();
    }
    p
}

/// Number of eigenvalues of a symmetric matrix that are at least 1/2.
pub fn projector_rank(e: &Mat8) -> usize {
    let sym = (e + e.transpose()) * 0.5;
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .filter(|&&v| v >= 0.5)
        .count()
}

/// Singular values and an orthonormal basis of the (approximate) null space
/// of a matrix with 64 columns, obtained from a full SVD.
///
/// The basis vectors are returned in order of increasing singular value, so
/// the least constrained directions come first.
pub struct NullSpace {
    pub rank: usize,
    pub singular_values: Vec<f64>,
    pub directions: Vec<(f64, Mat8)>,
}

pub fn null_space_64(rows: &[[f64; 64]], threshold: f64) -> NullSpace {
    // Pad to at least 64 rows so the SVD returns a full right basis.
    let nrows = rows.len().max(64);
    let mut a = DMatrix::<f64>::zeros(nrows, 64);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            a[(i, j)] = *v;
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let mut pairs: Vec<(f64, usize)> = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .map(|(i, s)| (s, i))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let rank = pairs.iter().filter(|(s, _)| *s > threshold).count();
    let mut directions = Vec::new();
    for &(s, idx) in pairs.iter().filter(|(s, _)| *s <= threshold) {
        let mut d = Mat8::zeros();
        for r in 0..8 {
            for c in 0..8 {
                d[(r, c)] = v_t[(idx, 8 * r + c)];
            }
        }
        directions.push((s, canonical_sign(d)));
    }
    let mut singular_values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    singular_values.reverse();
    NullSpace {
        rank,
        singular_values,
        directions,
    }
}

/// Fix the sign of a direction so its largest-magnitude entry is positive.
fn canonical_sign(d: Mat8) -> Mat8 {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for v in d.iter() {
        if v.abs() > best + 1e-12 {
            best = v.abs();
            sign = v.signum();
        }
    }
    d * sign
}

/// Row vec(m nᵗ) in row-major order.
pub fn outer_row(m: &Vec8, n: &Vec8) -> [f64; 64] {
    let mut row = [0.0; 64];
    for r in 0..8 {
        for c in 0..8 {
            row[8 * r + c] = m[r] * n[c];
        }
    }
    row
}

/// `exp(i H)` for a Hermitian 3x3 matrix `H`.
pub fn expi_hermitian(h: &CMat3) -> CMat3 {
    let eig = h.symmetric_eigen();
    let v = eig.eigenvectors;
    let mut d = CMat3::zeros();
    for k in 0..3 {
        d[(k, k)] = C64::from_polar(1.0, eig.eigenvalues[k]);
    }
    v * d * v.adjoint()
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian 3x3 matrix.
pub fn hermitian_eigen(a: &CMat3) -> ([f64; 3], [CVec3; 3]) {
    let eig = a.symmetric_eigen();
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = [
        eig.eigenvalues[idx[0]],
        eig.eigenvalues[idx[1]],
        eig.eigenvalues[idx[2]],
    ];
    let vecs = [
        eig.eigenvectors.column(idx[0]).into_owned(),
        eig.eigenvectors.column(idx[1]).into_owned(),
        eig.eigenvectors.column(idx[2]).into_owned(),
    ];
    (vals, vecs)
}

/// Smallest eigenvalue of a Hermitian 3x3 matrix.
pub fn hermitian_min_eigenvalue(a: &CMat3) -> f64 {
    a.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Matrix power by repeated squaring.
pub fn mat_pow(x: &Mat8, mut n: u32) -> Mat8 {
    let mut result = Mat8::identity();
    let mut base = *x;
    while n > 0 {
        if n & 1 == 1 {
            result *= base;
        }
        base = base * base;
        n >>= 1;
    }
    result
}

/// Serde adapter writing a [`Mat8`] as an 8x8 array of rows.
pub mod mat8_serde {
    use super::Mat8;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Mat8, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<[f64; 8]> = (0..8)
            .map(|i| {
                let mut r = [0.0; 8];
                for (j, v) in r.iter_mut().enumerate() {
                    *v = m[(i, j)];
                }
                r
            })
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat8, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        if rows.len() != 8 || rows.iter().any(|r| r.len() != 8) {
            return Err(D::Error::custom("expected an 8x8 array"));
        }
        Ok(Mat8::from_fn(|i, j| rows[i][j]))
    }
}

/// Serde adapter for an optional [`Mat8`].
pub mod opt_mat8_serde {
    use super::Mat8;
    use serde::{Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Option<Mat8>, s: S) -> Result<S::Ok, S::Error> {
        match m {
            Some(m) => {
                let rows: Vec<Vec<f64>> = (0..8).map(|i| (0..8).map(|j| m[(i, j)]).collect()).collect();
                Some(rows).serialize(s)
            }
            None => s.serialize_none(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_single_row() {
        let mut row = [0.0; 64];
        row[0] = 1.0;
        let ns = null_space_64(&[row], 1e-8);
        assert_eq!(ns.rank, 1);
        assert_eq!(ns.directions.len(), 63);
        for (_, d) in &ns.directions {
            assert!(d[(0, 0)].abs() < 1e-12);
            assert!((d.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn expi_of_zero_is_identity() {
        let u = expi_hermitian(&CMat3::zeros());
        assert!((u - CMat3::identity()).norm() < 1e-15);
    }

    #[test]
    fn power_matches_repeated_product() {
        let x = Mat8::from_fn(|i, j| ((i * 8 + j) as f64).sin() * 0.3);
        let mut p = Mat8::identity();
        for _ in 0..7 {
            p *= x;
        }
        assert!((mat_pow(&x, 7) - p).norm() < 1e-12);
    }
}
