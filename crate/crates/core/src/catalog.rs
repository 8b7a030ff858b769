//! Explicit maps used as ground truth: the generalised Choi family, the map
//! `S0` with a one-dimensional idempotent, the transpose map and unitary
//! conjugations.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::coherence::{map_to_matrix, CoherenceError, MapMatrix};
use crate::linalg::{CMat3, C64};
use crate::semigroup::adjoint_rep;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("Choi parameters must be nonnegative (got a={a}, b={b}, c={c})")]
    NegativeParameter { a: f64, b: f64, c: f64 },
    #[error("t = {0} is outside [0, 1]")]
    ParameterOutOfRange(f64),
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("malformed generator `{0}`")]
    MalformedGenerator(String),
    #[error(transparent)]
    NotBistochastic(#[from] CoherenceError),
}

/// Parameters of the generalised Choi map `Φ[a, b, c]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChoiParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub t: Option<f64>,
}

impl ChoiParams {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self, CatalogError> {
        if !(a >= 0.0 && b >= 0.0 && c >= 0.0) {
            return Err(CatalogError::NegativeParameter { a, b, c });
        }
        Ok(Self { a, b, c, t: None })
    }

    /// `a(t) = (1-t)²/(1-t+t²)`, `b(t) = t²/(1-t+t²)`, `c(t) = 1/(1-t+t²)`.
    pub fn from_t(t: f64) -> Result<Self, CatalogError> {
        if !(0.0..=1.0).contains(&t) {
            return Err(CatalogError::ParameterOutOfRange(t));
        }
        let d = 1.0 - t + t * t;
        Ok(Self {
            a: (1.0 - t).powi(2) / d,
            b: t * t / d,
            c: 1.0 / d,
            t: Some(t),
        })
    }
}

/// `Φ[a,b,c](X)` applied to a 3x3 matrix, including the global factor 1/2.
pub fn choi_apply(p: &ChoiParams, x: &CMat3) -> CMat3 {
    let mut y = -x;
    let (a, b, c) = (C64::from(p.a), C64::from(p.b), C64::from(p.c));
    y[(0, 0)] = a * x[(0, 0)] + b * x[(1, 1)] + c * x[(2, 2)];
    y[(1, 1)] = c * x[(0, 0)] + a * x[(1, 1)] + b * x[(2, 2)];
    y[(2, 2)] = b * x[(0, 0)] + c * x[(1, 1)] + a * x[(2, 2)];
    y * C64::from(0.5)
}

/// Matrix of `Φ[a,b,c]`; rejected unless `a + b + c = 2`, which is exactly
/// when the map is unital and trace preserving.
pub fn choi_map(p: &ChoiParams) -> Result<MapMatrix, CatalogError> {
    Ok(map_to_matrix(|x| choi_apply(p, x))?)
}

/// Closed form of the matrix of `Φ[a(t), b(t), c(t)]`.
///
/// Diagonal `-1/2` at positions 1, 2, 4, 5, 6, 7 and the 3–8 block
/// `[[q, -s], [s, q]]` with `q = (1-4t+t²)/(4(1-t+t²))` and
/// `s = √3(1-t²)/(4(1-t+t²))`. Since `q² + s² = 1/4` every member is half an
/// orthogonal matrix.
///
/// # Panics
/// If `t` is outside `[0, 1]`.
pub fn choi_matrix(t: f64) -> MapMatrix {
    assert!((0.0..=1.0).contains(&t), "t = {t} outside [0, 1]");
    let d = 4.0 * (1.0 - t + t * t);
    let q = (1.0 - 4.0 * t + t * t) / d;
    let s = 3f64.sqrt() * (1.0 - t * t) / d;
    let mut x = MapMatrix::from_diagonal([-0.5, -0.5, q, -0.5, -0.5, -0.5, -0.5, q]).into_inner();
    x[(2, 7)] = -s;
    x[(7, 2)] = s;
    MapMatrix::new(x)
}

/// The map `S0`: averages the upper 2x2 diagonal, kills the 1–2 coherences
/// and damps the coherences with the third level by `1/√2`.
pub fn s0_apply(x: &CMat3) -> CMat3 {
    let r = C64::from(1.0 / 2f64.sqrt());
    let avg = (x[(0, 0)] + x[(1, 1)]) * 0.5;
    let z = C64::from(0.0);
    CMat3::new(
        avg,
        z,
        r * x[(0, 2)],
        z,
        avg,
        r * x[(2, 1)],
        r * x[(2, 0)],
        r * x[(1, 2)],
        x[(2, 2)],
    )
}

pub fn s0_matrix() -> MapMatrix {
    let r = 1.0 / 2f64.sqrt();
    MapMatrix::from_diagonal([0.0, 0.0, 0.0, r, r, r, -r, 1.0])
}

/// The transpose map `A ↦ Aᵗ`: flips the antisymmetric λ2, λ5, λ7.
pub fn transpose_matrix() -> MapMatrix {
    MapMatrix::from_diagonal([1.0, -1.0, 1.0, 1.0, -1.0, 1.0, -1.0, 1.0])
}

/// A Haar-random unitary drawn from a seeded generator.
pub fn haar_unitary<R: rand::Rng + ?Sized>(rng: &mut R) -> CMat3 {
    let mut cols: Vec<nalgebra::Vector3<C64>> = Vec::with_capacity(3);
    for _ in 0..3 {
        let mut v = nalgebra::Vector3::from_fn(|_, _| {
            C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
        });
        for u in &cols {
            let proj = u.dotc(&v);
            v -= u * proj;
        }
        let n = v.norm();
        cols.push(v / C64::from(n));
    }
    CMat3::from_columns(&cols)
}

/// Matrix of `A ↦ U A U*` for the Haar unitary drawn from `seed`.
pub fn adunitary(seed: u64) -> MapMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = haar_unitary(&mut rng);
    MapMatrix::new(adjoint_rep(&u).expect("Gram-Schmidt output is unitary"))
}

/// Named generators accepted wherever a matrix input is expected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Generator {
    Choi { t: f64 },
    S0,
    Transpose,
    Identity,
    AdUnitary { seed: u64 },
}

impl Generator {
    pub const NAMES: [&'static str; 5] = ["choi:t=<t>", "s0", "transpose", "identity", "adunitary:seed=<n>"];

    pub fn matrix(&self) -> MapMatrix {
        match *self {
            Generator::Choi { t } => choi_matrix(t),
            Generator::S0 => s0_matrix(),
            Generator::Transpose => transpose_matrix(),
            Generator::Identity => MapMatrix::identity(),
            Generator::AdUnitary { seed } => adunitary(seed),
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Choi { t } => write!(f, "choi:t={t}"),
            Generator::S0 => write!(f, "s0"),
            Generator::Transpose => write!(f, "transpose"),
            Generator::Identity => write!(f, "identity"),
            Generator::AdUnitary { seed } => write!(f, "adunitary:seed={seed}"),
        }
    }
}

impl FromStr for Generator {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let malformed = || CatalogError::MalformedGenerator(s.to_string());
        match s {
            "s0" => return Ok(Generator::S0),
            "transpose" => return Ok(Generator::Transpose),
            "identity" => return Ok(Generator::Identity),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("choi:") {
            let t: f64 = rest
                .strip_prefix("t=")
                .ok_or_else(malformed)?
                .parse()
                .map_err(|_| malformed())?;
            if !(0.0..=1.0).contains(&t) {
                return Err(CatalogError::ParameterOutOfRange(t));
            }
            return Ok(Generator::Choi { t });
        }
        if let Some(rest) = s.strip_prefix("adunitary:") {
            let seed: u64 = rest
                .strip_prefix("seed=")
                .ok_or_else(malformed)?
                .parse()
                .map_err(|_| malformed())?;
            return Ok(Generator::AdUnitary { seed });
        }
        Err(CatalogError::UnknownGenerator(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherence::{apply_map, Hermitian3};
    use crate::linalg::{Mat8, CMat3};

    #[test]
    fn params_at_zero() {
        let p = ChoiParams::from_t(0.0).unwrap();
        assert_eq!((p.a, p.b, p.c), (1.0, 0.0, 1.0));
    }

    #[test]
    fn params_sum_to_two() {
        for k in 0..=32 {
            let p = ChoiParams::from_t(k as f64 / 32.0).unwrap();
            assert!((p.a + p.b + p.c - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn choi_unital_when_sum_is_two() {
        let p = ChoiParams::from_t(0.3).unwrap();
        let out = choi_apply(&p, &CMat3::identity());
        assert!((out - CMat3::identity()).norm() < 1e-15);
    }

    #[test]
    fn raw_params_not_bistochastic_rejected() {
        let p = ChoiParams::new(1.0, 1.0, 1.0).unwrap();
        assert!(matches!(choi_map(&p), Err(CatalogError::NotBistochastic(_))));
        assert!(ChoiParams::new(-1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn choi_t0_block() {
        let x = choi_matrix(0.0);
        let m = x.matrix();
        let r3 = 3f64.sqrt();
        assert!((m[(2, 2)] - 0.25).abs() < 1e-15);
        assert!((m[(7, 7)] - 0.25).abs() < 1e-15);
        assert!((m[(2, 7)] + r3 / 4.0).abs() < 1e-15);
        assert!((m[(7, 2)] - r3 / 4.0).abs() < 1e-15);
        for k in [0, 1, 3, 4, 5, 6] {
            assert_eq!(m[(k, k)], -0.5);
        }
    }

    #[test]
    fn choi_t1_is_minus_half() {
        let x = choi_matrix(1.0);
        assert!((x.matrix() + Mat8::identity() * 0.5).norm() < 1e-15);
    }

    #[test]
    fn choi_matrix_norm_is_half() {
        for k in 0..=20 {
            let x = choi_matrix(k as f64 / 20.0);
            assert!((x.operator_norm() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn s0_entries_and_action() {
        let x = s0_matrix();
        assert_eq!(x.matrix()[(7, 7)], 1.0);
        let l8 = Hermitian3::basis_element(8);
        assert!(apply_map(&x, &l8).distance(&l8) < 1e-15);
        let l7 = Hermitian3::basis_element(7);
        let expected = l7 * (-1.0 / 2f64.sqrt());
        assert!(apply_map(&x, &l7).distance(&expected) < 1e-15);
    }

    #[test]
    fn s0_callable_matches_diagonal() {
        let x = map_to_matrix(s0_apply).unwrap();
        assert!((x.matrix() - s0_matrix().matrix()).norm() < 1e-12);
    }

    #[test]
    fn transpose_action() {
        let x = transpose_matrix();
        let l1 = Hermitian3::basis_element(1);
        assert!(apply_map(&x, &l1).distance(&l1) < 1e-15);
        let l5 = Hermitian3::basis_element(5);
        assert!(apply_map(&x, &l5).distance(&(l5 * -1.0)) < 1e-15);
        assert_eq!(x * x, MapMatrix::identity());
        let from_callable = map_to_matrix(|a| a.transpose()).unwrap();
        assert!((from_callable.matrix() - x.matrix()).norm() < 1e-14);
    }

    #[test]
    fn generator_names_parse() {
        assert_eq!("s0".parse::<Generator>().unwrap(), Generator::S0);
        assert_eq!("choi:t=0.25".parse::<Generator>().unwrap(), Generator::Choi { t: 0.25 });
        assert_eq!(
            "adunitary:seed=17".parse::<Generator>().unwrap(),
            Generator::AdUnitary { seed: 17 }
        );
        assert!("choi:t=2".parse::<Generator>().is_err());
        assert!("choi:x=1".parse::<Generator>().is_err());
        assert!("./s0".parse::<Generator>().is_err());
        for g in [Generator::S0, Generator::Choi { t: 0.5 }, Generator::AdUnitary { seed: 3 }] {
            assert_eq!(g.to_string().parse::<Generator>().unwrap(), g);
        }
    }

    #[test]
    fn adunitary_is_deterministic_and_orthogonal() {
        let a = adunitary(5);
        assert_eq!(a, adunitary(5));
        let m = a.matrix();
        assert!((m * m.transpose() - Mat8::identity()).norm() < 1e-12);
    }
}
