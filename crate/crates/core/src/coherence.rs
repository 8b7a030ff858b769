//! Gell-Mann coordinates for self-adjoint 3x3 matrices and the
//! correspondence between unital trace-preserving maps on `M3` and real
//! 8x8 matrices.
//!
//! A self-adjoint `A` is written as `λ(a0, ā) = a0 λ0 + Σ a_k λ_k` in the
//! normalised Gell-Mann basis, and a matrix `x` acts on it by keeping `a0`
//! and sending `ā` to `x ā`.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::sync::OnceLock;

use nalgebra::Matrix3;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::linalg::{self, CMat3, CVec3, Mat8, Vec8, C64};

/// Relative Hermiticity tolerance (against the HS-norm of the input).
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Tolerance used by [`map_to_matrix`] for unitality and trace preservation.
pub const MAP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoherenceError {
    #[error("matrix is not self-adjoint: max |A - A*| = {defect:e} exceeds {allowed:e}")]
    NotHermitian { defect: f64, allowed: f64 },
    #[error("map is not unital: max |S(1) - 1| = {defect:e}")]
    NotUnital { defect: f64 },
    #[error("map is not trace preserving: |tr S(λ{index})| = {defect:e}")]
    NotTracePreserving { index: usize, defect: f64 },
    #[error("map does not preserve self-adjointness: defect {defect:e} on λ{index}")]
    NotHermiticityPreserving { index: usize, defect: f64 },
    #[error("matrix has non-finite entries")]
    NonFinite,
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// The normalised Gell-Mann matrices `λ0 … λ8`, orthonormal for
/// `⟨A, B⟩ = tr A* B`.
#[derive(Debug, Clone, PartialEq)]
pub struct GellMannBasis {
    mats: [CMat3; 9],
}

impl GellMannBasis {
    fn build() -> Self {
        let z = c(0.0, 0.0);
        let r = 1.0 / 2f64.sqrt();
        let one = c(r, 0.0);
        let up = c(0.0, -r);
        let dn = c(0.0, r);
        let s6 = 1.0 / 6f64.sqrt();
        let s3 = 1.0 / 3f64.sqrt();
        #[rustfmt::skip]
        let mats = [
            Matrix3::new(c(s3, 0.0), z, z,
                         z, c(s3, 0.0), z,
                         z, z, c(s3, 0.0)),
            Matrix3::new(z, one, z,
                         one, z, z,
                         z, z, z),
            Matrix3::new(z, up, z,
                         dn, z, z,
                         z, z, z),
            Matrix3::new(one, z, z,
                         z, -one, z,
                         z, z, z),
            Matrix3::new(z, z, one,
                         z, z, z,
                         one, z, z),
            Matrix3::new(z, z, up,
                         z, z, z,
                         dn, z, z),
            Matrix3::new(z, z, z,
                         z, z, one,
                         z, one, z),
            Matrix3::new(z, z, z,
                         z, z, up,
                         z, dn, z),
            Matrix3::new(c(s6, 0.0), z, z,
                         z, c(s6, 0.0), z,
                         z, z, c(-2.0 * s6, 0.0)),
        ];
        Self { mats }
    }

    /// `λ_mu` for `mu = 0..=8`.
    pub fn get(&self, mu: usize) -> &CMat3 {
        &self.mats[mu]
    }

    pub fn matrices(&self) -> &[CMat3; 9] {
        &self.mats
    }
}

pub(crate) fn basis() -> &'static GellMannBasis {
    static BASIS: OnceLock<GellMannBasis> = OnceLock::new();
    BASIS.get_or_init(GellMannBasis::build)
}

pub fn gellmann_basis() -> GellMannBasis {
    basis().clone()
}

/// `Re tr(A B)`, the HS inner product when `A` is self-adjoint.
pub(crate) fn tr_re(a: &CMat3, b: &CMat3) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for k in 0..3 {
            s += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    s
}

/// A self-adjoint 3x3 complex matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hermitian3(CMat3);

impl Hermitian3 {
    /// Validates self-adjointness (relative to the HS-norm) and stores the
    /// symmetrised matrix `(A + A*)/2`.
    pub fn new(m: CMat3) -> Result<Self, CoherenceError> {
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(CoherenceError::NonFinite);
        }
        let defect = (m - m.adjoint()).iter().fold(0.0f64, |a, z| a.max(z.norm()));
        let allowed = HERMITIAN_TOL * m.norm();
        if defect > allowed {
            return Err(CoherenceError::NotHermitian { defect, allowed });
        }
        Ok(Self((m + m.adjoint()) * c(0.5, 0.0)))
    }

    pub fn identity() -> Self {
        Self(CMat3::identity())
    }

    pub fn diag(d: [f64; 3]) -> Self {
        Self(CMat3::from_diagonal(&CVec3::new(
            c(d[0], 0.0),
            c(d[1], 0.0),
            c(d[2], 0.0),
        )))
    }

    /// The rank-one projector `|ψ⟩⟨ψ|` for a unit vector.
    pub fn projector(ket: &CVec3) -> Self {
        Self(ket * ket.adjoint())
    }

    /// `λ_mu` itself.
    pub fn basis_element(mu: usize) -> Self {
        Self(*basis().get(mu))
    }

    pub fn matrix(&self) -> &CMat3 {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn square(&self) -> Self {
        Self(self.0 * self.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::hermitian_min_eigenvalue(&self.0)
    }

    /// Max absolute entry of the difference.
    pub fn distance(&self, other: &Self) -> f64 {
        (self.0 - other.0).iter().fold(0.0, |a, z| a.max(z.norm()))
    }
}

impl Sub for Hermitian3 {
    type Output = Hermitian3;
    fn sub(self, rhs: Self) -> Self {
        Self(self.0 - rhs.0)
    }
}

impl Add for Hermitian3 {
    type Output = Hermitian3;
    fn add(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

impl Mul<f64> for Hermitian3 {
    type Output = Hermitian3;
    fn mul(self, rhs: f64) -> Self {
        Self(self.0 * c(rhs, 0.0))
    }
}

/// Coordinates `(a0, ā)` of a self-adjoint matrix in the Gell-Mann basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceVector {
    pub a0: f64,
    pub avec: Vec8,
}

impl CoherenceVector {
    pub fn new(a0: f64, avec: [f64; 8]) -> Self {
        Self {
            a0,
            avec: Vec8::from_column_slice(&avec),
        }
    }

    /// HS inner product of the corresponding matrices.
    pub fn dot(&self, other: &Self) -> f64 {
        self.a0 * other.a0 + self.avec.dot(&other.avec)
    }
}

/// `a_mu = tr λ_mu A`.
pub fn to_coherence(a: &Hermitian3) -> CoherenceVector {
    let b = basis();
    let a0 = tr_re(b.get(0), &a.0);
    let avec = Vec8::from_fn(|k, _| tr_re(b.get(k + 1), &a.0));
    CoherenceVector { a0, avec }
}

/// Traceless part `Σ a_k λ_k`.
pub(crate) fn traceless_from(avec: &Vec8) -> CMat3 {
    let b = basis();
    let mut m = CMat3::zeros();
    for k in 0..8 {
        m += b.get(k + 1) * c(avec[k], 0.0);
    }
    m
}

/// Bloch part `ā` of a self-adjoint matrix, i.e. `tr λ_k A` for `k = 1..=8`.
pub(crate) fn bloch_of(a: &CMat3) -> Vec8 {
    let b = basis();
    Vec8::from_fn(|k, _| tr_re(b.get(k + 1), a))
}

/// `λ(a0, ā)`.
pub fn from_coherence(v: &CoherenceVector) -> Hermitian3 {
    // a0 λ0 = (a0 / √3) 1, written this way so that (√3, 0) gives 1 exactly.
    let scalar = v.a0 / 3f64.sqrt();
    let m = CMat3::identity() * c(scalar, 0.0) + traceless_from(&v.avec);
    Hermitian3(m)
}

/// An 8x8 real matrix `x`, read as the unital trace-preserving map `S_x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapMatrix(Mat8);

impl MapMatrix {
    pub fn new(m: Mat8) -> Self {
        Self(m)
    }

    pub fn identity() -> Self {
        Self(Mat8::identity())
    }

    pub fn zero() -> Self {
        Self(Mat8::zeros())
    }

    pub fn from_diagonal(d: [f64; 8]) -> Self {
        Self(Mat8::from_diagonal(&Vec8::from_column_slice(&d)))
    }

    pub fn from_rows(rows: &[[f64; 8]; 8]) -> Self {
        Self(Mat8::from_fn(|i, j| rows[i][j]))
    }

    pub fn to_rows(&self) -> [[f64; 8]; 8] {
        let mut rows = [[0.0; 8]; 8];
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.0[(i, j)];
            }
        }
        rows
    }

    pub fn matrix(&self) -> &Mat8 {
        &self.0
    }

    pub fn into_inner(self) -> Mat8 {
        self.0
    }

    /// The matrix of the HS-adjoint map, which is the transpose.
    pub fn adjoint(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn operator_norm(&self) -> f64 {
        linalg::operator_norm(&self.0)
    }

    pub fn apply(&self, a: &Hermitian3) -> Hermitian3 {
        apply_map(self, a)
    }
}

impl From<Mat8> for MapMatrix {
    fn from(m: Mat8) -> Self {
        Self(m)
    }
}

impl Mul for MapMatrix {
    type Output = MapMatrix;
    fn mul(self, rhs: Self) -> Self {
        Self(self.0 * rhs.0)
    }
}

impl Mul<f64> for MapMatrix {
    type Output = MapMatrix;
    fn mul(self, rhs: f64) -> Self {
        Self(self.0 * rhs)
    }
}

impl Add for MapMatrix {
    type Output = MapMatrix;
    fn add(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

impl Sub for MapMatrix {
    type Output = MapMatrix;
    fn sub(self, rhs: Self) -> Self {
        Self(self.0 - rhs.0)
    }
}

impl fmt::Display for MapMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..8 {
            let row: Vec<String> = (0..8).map(|j| format!("{:>10.6}", self.0[(i, j)])).collect();
            writeln!(f, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

/// `S_x(λ(a0, ā)) = λ(a0, x ā)`.
pub fn apply_map(x: &MapMatrix, a: &Hermitian3) -> Hermitian3 {
    let avec = bloch_of(&a.0);
    let scalar = a.trace() / 3.0;
    let m = CMat3::identity() * c(scalar, 0.0) + traceless_from(&(x.0 * avec));
    Hermitian3(m)
}

/// `x_ij = tr λ_i S(λ_j)` for a map given as a callable on 3x3 matrices.
pub fn map_to_matrix<F>(s: F) -> Result<MapMatrix, CoherenceError>
where
    F: Fn(&CMat3) -> CMat3,
{
    let b = basis();
    let id = s(&CMat3::identity());
    let unital = (id - CMat3::identity()).iter().fold(0.0f64, |a, z| a.max(z.norm()));
    if !unital.is_finite() {
        return Err(CoherenceError::NonFinite);
    }
    if unital > MAP_TOL {
        return Err(CoherenceError::NotUnital { defect: unital });
    }
    let mut x = Mat8::zeros();
    for j in 1..=8 {
        let img = s(b.get(j));
        let tr = img.trace().norm();
        if tr > MAP_TOL {
            return Err(CoherenceError::NotTracePreserving { index: j, defect: tr });
        }
        let herm = (img - img.adjoint()).iter().fold(0.0f64, |a, z| a.max(z.norm()));
        if herm > MAP_TOL {
            return Err(CoherenceError::NotHermiticityPreserving { index: j, defect: herm });
        }
        for i in 1..=8 {
            x[(i - 1, j - 1)] = tr_re(b.get(i), &img);
        }
    }
    Ok(MapMatrix(x))
}

pub fn adjoint(x: &MapMatrix) -> MapMatrix {
    x.adjoint()
}

pub fn operator_norm(x: &MapMatrix) -> f64 {
    x.operator_norm()
}

// JSON schema: MapMatrix is an 8x8 array of reals (row-major), Hermitian3 a
// 3x3 array of [re, im] pairs, CoherenceVector {"a0": r, "avec": [8 reals]}.

impl Serialize for MapMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for MapMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        if rows.len() != 8 || rows.iter().any(|r| r.len() != 8) {
            return Err(D::Error::custom("map matrix must be an 8x8 array"));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(D::Error::custom("map matrix has non-finite entries"));
        }
        Ok(Self(Mat8::from_fn(|i, j| rows[i][j])))
    }
}

impl Serialize for Hermitian3 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..3)
            .map(|i| (0..3).map(|j| [self.0[(i, j)].re, self.0[(i, j)].im]).collect())
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Hermitian3 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        if rows.len() != 3 || rows.iter().any(|r| r.len() != 3) {
            return Err(D::Error::custom("hermitian matrix must be a 3x3 array of [re, im]"));
        }
        let m = CMat3::from_fn(|i, j| c(rows[i][j][0], rows[i][j][1]));
        Hermitian3::new(m).map_err(D::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct CoherenceRepr {
    a0: f64,
    avec: Vec<f64>,
}

impl Serialize for CoherenceVector {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        CoherenceRepr {
            a0: self.a0,
            avec: self.avec.iter().copied().collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CoherenceVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = CoherenceRepr::deserialize(d)?;
        if r.avec.len() != 8 {
            return Err(D::Error::custom("avec must have 8 components"));
        }
        Ok(Self {
            a0: r.a0,
            avec: Vec8::from_column_slice(&r.avec),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx_eq(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn basis_is_orthonormal() {
        let b = gellmann_basis();
        for mu in 0..9 {
            for nu in 0..9 {
                let ip = (b.get(mu).adjoint() * b.get(nu)).trace();
                let expected = if mu == nu { 1.0 } else { 0.0 };
                assert!(approx_eq(ip.re, expected, 1e-14), "({mu},{nu}) -> {ip}");
                assert!(ip.im.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn lambda0_is_scaled_identity() {
        let b = gellmann_basis();
        let s3 = 1.0 / 3f64.sqrt();
        assert_eq!(*b.get(0), CMat3::identity() * c(s3, 0.0));
    }

    #[test]
    fn lambda3_is_printed_diagonal() {
        let r = 1.0 / 2f64.sqrt();
        let l3 = Hermitian3::basis_element(3);
        assert_eq!(l3, Hermitian3::diag([r, -r, 0.0]));
    }

    #[test]
    fn lambda2_lambda5_orthogonal() {
        let b = gellmann_basis();
        assert_eq!(tr_re(b.get(2), b.get(5)), 0.0);
        assert!(approx_eq(tr_re(b.get(8), b.get(8)), 1.0, 1e-15));
    }

    #[test]
    fn identity_coherence() {
        let v = to_coherence(&Hermitian3::identity());
        assert!(approx_eq(v.a0, 3f64.sqrt(), 1e-15));
        assert!(v.avec.norm() < 1e-15);
        let back = from_coherence(&CoherenceVector::new(3f64.sqrt(), [0.0; 8]));
        assert!(back.distance(&Hermitian3::identity()) < 1e-15);
    }

    #[test]
    fn diag100_coherence() {
        let v = to_coherence(&Hermitian3::diag([1.0, 0.0, 0.0]));
        assert!(approx_eq(v.a0, 1.0 / 3f64.sqrt(), 1e-15));
        for k in 0..8 {
            let expected = match k {
                2 => 1.0 / 2f64.sqrt(),
                7 => 1.0 / 6f64.sqrt(),
                _ => 0.0,
            };
            assert!(approx_eq(v.avec[k], expected, 1e-15), "a{} = {}", k + 1, v.avec[k]);
        }
        let mut avec = [0.0; 8];
        avec[2] = 1.0 / 2f64.sqrt();
        avec[7] = 1.0 / 6f64.sqrt();
        let back = from_coherence(&CoherenceVector::new(1.0 / 3f64.sqrt(), avec));
        assert!(back.distance(&Hermitian3::diag([1.0, 0.0, 0.0])) < 1e-15);
    }

    #[test]
    fn basis_element_coherence() {
        let v = to_coherence(&Hermitian3::basis_element(4));
        assert!(v.a0.abs() < 1e-15);
        for k in 0..8 {
            let expected = if k == 3 { 1.0 } else { 0.0 };
            assert!(approx_eq(v.avec[k], expected, 1e-15));
        }
        let mut e1 = [0.0; 8];
        e1[0] = 1.0;
        let l1 = from_coherence(&CoherenceVector::new(0.0, e1));
        assert!(l1.distance(&Hermitian3::basis_element(1)) < 1e-15);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = CMat3::identity();
        m[(0, 1)] = c(0.5, 0.0);
        match Hermitian3::new(m) {
            Err(CoherenceError::NotHermitian { defect, .. }) => assert!(defect > 0.4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tiny_asymmetry_is_symmetrised() {
        let mut m = CMat3::identity();
        m[(0, 1)] = c(1e-14, 0.0);
        let h = Hermitian3::new(m).unwrap();
        assert_eq!(h.matrix()[(0, 1)], h.matrix()[(1, 0)].conj());
    }

    #[test]
    fn identity_map_fixes_everything() {
        let a = Hermitian3::new(CMat3::new(
            c(0.3, 0.0),
            c(0.1, 0.2),
            c(-0.4, 0.0),
            c(0.1, -0.2),
            c(-1.0, 0.0),
            c(0.0, 0.7),
            c(-0.4, 0.0),
            c(0.0, -0.7),
            c(2.0, 0.0),
        ))
        .unwrap();
        let out = apply_map(&MapMatrix::identity(), &a);
        assert!(out.distance(&a) < 1e-14);
    }

    #[test]
    fn zero_map_is_trace_projection() {
        let out = apply_map(&MapMatrix::zero(), &Hermitian3::diag([1.0, 0.0, 0.0]));
        assert!(out.distance(&(Hermitian3::identity() * (1.0 / 3.0))) < 1e-15);
    }

    #[test]
    fn unital_exactly() {
        let x = MapMatrix::new(Mat8::from_fn(|i, j| ((3 * i + 5 * j) as f64).cos()));
        assert_eq!(apply_map(&x, &Hermitian3::identity()), Hermitian3::identity());
    }

    #[test]
    fn identity_callable_gives_identity_matrix() {
        let x = map_to_matrix(|a| *a).unwrap();
        assert!((x.matrix() - Mat8::identity()).norm() < 1e-14);
    }

    #[test]
    fn map_to_matrix_rejects_non_unital() {
        let err = map_to_matrix(|a| a * c(2.0, 0.0)).unwrap_err();
        assert!(matches!(err, CoherenceError::NotUnital { .. }));
    }

    #[test]
    fn map_to_matrix_rejects_trace_change() {
        // A ↦ A + tr(A λ3)·1 is unital but changes traces.
        let err = map_to_matrix(|a| {
            let t = tr_re(basis().get(3), a);
            a + CMat3::identity() * c(t, 0.0)
        })
        .unwrap_err();
        assert!(matches!(err, CoherenceError::NotTracePreserving { index: 3, .. }));
    }

    #[test]
    fn adjoint_is_involution() {
        let x = MapMatrix::new(Mat8::from_fn(|i, j| (i as f64) - 0.5 * (j as f64)));
        assert_eq!(adjoint(&adjoint(&x)), x);
        let s = MapMatrix::from_diagonal([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        assert_eq!(adjoint(&s), s);
    }

    #[test]
    fn operator_norm_of_identity() {
        assert!(approx_eq(operator_norm(&MapMatrix::identity()), 1.0, 1e-14));
    }

    #[test]
    fn json_shapes() {
        let x = MapMatrix::identity();
        let s = serde_json::to_string(&x).unwrap();
        assert!(s.starts_with("[[1.0,0.0"));
        let back: MapMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, x);
        assert!(serde_json::from_str::<MapMatrix>("[[1.0]]").is_err());

        let h = Hermitian3::basis_element(2);
        let s = serde_json::to_string(&h).unwrap();
        let back: Hermitian3 = serde_json::from_str(&s).unwrap();
        assert!(back.distance(&h) < 1e-16);
        assert!(serde_json::from_str::<Hermitian3>("[[[0,0],[1,0],[0,0]],[[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0]]]").is_err());

        let v = CoherenceVector::new(1.0, [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0]);
        let s = serde_json::to_string(&v).unwrap();
        assert!(s.contains("\"a0\":1.0"));
        let back: CoherenceVector = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }
}
