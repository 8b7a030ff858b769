//! Idempotents of the power semigroup of `x` and the structure around them.
//!
//! For a contraction `x` the closure of `{x^k}` contains exactly one
//! idempotent `e_x`: the orthogonal projection onto the subspace on which
//! `x` acts isometrically in both directions (its unitary part). Every `x`
//! then splits uniquely as `h + y` with `h = e x e` invertible on the range
//! of `e` and `y = (1-e) x (1-e)` of spectral radius below one.
//!
//! Up to conjugation by `Ad SU(3)`, each idempotent equals one of seven
//! diagonal projectors; [`conjugate_to_canonical`] finds the conjugating
//! element by a local search on SU(3).

use std::fmt;
use std::sync::OnceLock;

use nalgebra::SMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::haar_unitary;
use crate::coherence::{basis, tr_re, MapMatrix};
use crate::linalg::{self, mat8_serde, max_abs, CMat3, Mat8, Vec8, C64};

/// Eigenvalues with modulus at least `1 - PERIPHERAL_TOL` count as peripheral.
pub const PERIPHERAL_TOL: f64 = 1e-8;
/// Cross-block tolerance of [`decompose`].
pub const DECOMPOSE_TOL: f64 = 1e-8;
/// Singular values within this of one count as "equal to one".
pub const Q_TOL: f64 = 1e-6;
pub const WITNESS_MAX_POWER: usize = 4096;
pub const WITNESS_THRESHOLD: f64 = 1e-4;
pub const ORBIT_SUCCESS: f64 = 1e-6;
pub const DEFAULT_ORBIT_BUDGET: usize = 100_000;
pub const DEFAULT_ORBIT_STARTS: usize = 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SemigroupError {
    #[error("not a Λ-contraction: operator norm {norm} exceeds 1")]
    NotContraction { norm: f64 },
    #[error("not a Λ-contraction: {peripheral} peripheral eigenvalues but the unitary part has dimension {unitary_dim}")]
    PeripheralJordan { peripheral: usize, unitary_dim: usize },
    #[error("matrix is not an orthogonal idempotent (defect {defect:e})")]
    NotIdempotent { defect: f64 },
    #[error("idempotents of rank {0} do not occur")]
    ForbiddenRank(usize),
    #[error("x not consistent with e: cross block residual {cross:e}")]
    Inconsistent { cross: f64 },
    #[error("h is not an isometry on the range of e (defect {defect:e})")]
    NotIsometric { defect: f64 },
    #[error("y does not decay: spectral radius {spectral_radius}")]
    NoDecay { spectral_radius: f64 },
    #[error("singular value {value} of y exceeds 1: x is not in Λ")]
    SingularValueAboveOne { value: f64 },
    #[error("matrix is not unitary (defect {defect:e})")]
    NonUnitary { defect: f64 },
    #[error("orbit search failed: best residual {:e}", best.residual)]
    OrbitSearchFailed { best: Box<OrbitFit> },
    #[error("reduction needs 1 <= i <= 4, 0 <= j <= 4, i + j <= 5 (got i = {i}, j = {j})")]
    ReductionOutOfRange { i: usize, j: usize },
    #[error("inconsistent input: {what} = {value:e}")]
    VerificationFailed { what: String, value: f64 },
}

/// The seven diagonal representatives `0, P8, P38, P138, P1238, P13468, 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CanonicalClass {
    P0,
    P1,
    P2,
    P3,
    P4,
    P5,
    One8,
}

impl CanonicalClass {
    pub const ALL: [CanonicalClass; 7] = [
        CanonicalClass::P0,
        CanonicalClass::P1,
        CanonicalClass::P2,
        CanonicalClass::P3,
        CanonicalClass::P4,
        CanonicalClass::P5,
        CanonicalClass::One8,
    ];

    pub fn from_rank(rank: usize) -> Option<Self> {
        match rank {
            0 => Some(Self::P0),
            1 => Some(Self::P1),
            2 => Some(Self::P2),
            3 => Some(Self::P3),
            4 => Some(Self::P4),
            5 => Some(Self::P5),
            8 => Some(Self::One8),
            _ => None,
        }
    }

    pub fn rank(self) -> usize {
        self.indices().len()
    }

    /// One-based Gell-Mann indices spanned by the projector.
    pub fn indices(self) -> &'static [usize] {
        match self {
            Self::P0 => &[],
            Self::P1 => &[8],
            Self::P2 => &[3, 8],
            Self::P3 => &[1, 3, 8],
            Self::P4 => &[1, 2, 3, 8],
            Self::P5 => &[1, 3, 4, 6, 8],
            Self::One8 => &[1, 2, 3, 4, 5, 6, 7, 8],
        }
    }

    pub fn projector(self) -> Mat8 {
        let mut p = Mat8::zeros();
        for &i in self.indices() {
            p[(i - 1, i - 1)] = 1.0;
        }
        p
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::P0 => "p0",
            Self::P1 => "p1",
            Self::P2 => "p2",
            Self::P3 => "p3",
            Self::P4 => "p4",
            Self::P5 => "p5",
            Self::One8 => "one8",
        }
    }
}

impl fmt::Display for CanonicalClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Smallest power `n` with `‖x^n - e‖_HS` below [`WITNESS_THRESHOLD`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerWitness {
    pub power: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IdempotentWarning {
    /// No power up to [`WITNESS_MAX_POWER`] came close to `e` (rotation
    /// phases that do not return); only the algebraic checks apply.
    NoPowerWitness,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdempotentRecord {
    #[serde(with = "mat8_serde")]
    pub e: Mat8,
    pub rank: usize,
    pub canonical_class: CanonicalClass,
    pub idempotency_defect: f64,
    pub symmetry_defect: f64,
    pub commutation_defect: f64,
    pub witness: Option<PowerWitness>,
    /// Closest approach of the powers when no witness was found.
    pub closest_power: Option<PowerWitness>,
    pub warnings: Vec<IdempotentWarning>,
    /// Whether the caller established positivity of `x`.
    pub positivity_verified: bool,
}

impl IdempotentRecord {
    pub fn with_positivity(mut self, verified: bool) -> Self {
        self.positivity_verified = verified;
        self
    }
}

/// Classifies an orthogonal idempotent by its rank.
pub fn rank_class(e: &Mat8, tol: f64) -> Result<IdempotentRecord, SemigroupError> {
    let idem = max_abs(&(e * e - e));
    let sym = max_abs(&(e - e.transpose()));
    let defect = idem.max(sym);
    if !defect.is_finite() || defect > tol {
        return Err(SemigroupError::NotIdempotent { defect });
    }
    let rank = linalg::projector_rank(e);
    let class = CanonicalClass::from_rank(rank).ok_or(SemigroupError::ForbiddenRank(rank))?;
    Ok(IdempotentRecord {
        e: *e,
        rank,
        canonical_class: class,
        idempotency_defect: idem,
        symmetry_defect: sym,
        commutation_defect: 0.0,
        witness: None,
        closest_power: None,
        warnings: Vec::new(),
        positivity_verified: false,
    })
}

/// The unique idempotent in the closure of `{x^k}`.
///
/// The unitary part of a contraction is the largest subspace on which all
/// powers of `x` and `xᵗ` are isometric; in finite dimension it is also the
/// span of the peripheral eigenvectors. Both are computed and must agree.
pub fn idempotent_of(x: &MapMatrix, tol: f64) -> Result<IdempotentRecord, SemigroupError> {
    let xm = x.matrix();
    let norm = linalg::operator_norm(xm);
    if !norm.is_finite() || norm > 1.0 + tol {
        return Err(SemigroupError::NotContraction { norm });
    }
    let id = Mat8::identity();
    let mut defect = Mat8::zeros();
    let mut power = id;
    for _ in 0..8 {
        power *= xm;
        defect += (id - power.transpose() * power) + (id - power * power.transpose());
    }
    let defect = (defect + defect.transpose()) * 0.5;
    let eig = defect.symmetric_eigen();
    let cutoff = 100.0 * tol;
    let basis: Vec<Vec8> = (0..8)
        .filter(|&k| eig.eigenvalues[k] <= cutoff)
        .map(|k| eig.eigenvectors.column(k).into_owned())
        .collect();
    // Cross-check against the peripheral spectrum when a Schur form converges.
    let peripheral = linalg::eigenvalues(xm)
        .map(|v| v.iter().filter(|z| z.norm() >= 1.0 - tol).count())
        .unwrap_or(basis.len());
    if peripheral != basis.len() {
        return Err(SemigroupError::PeripheralJordan {
            peripheral,
            unitary_dim: basis.len(),
        });
    }
    let e = linalg::projector_from_columns(&basis);
    let e = (e + e.transpose()) * 0.5;
    let commutation = max_abs(&(e * xm - xm * e));
    if commutation > 1e-7 {
        return Err(SemigroupError::VerificationFailed {
            what: "‖e x - x e‖".into(),
            value: commutation,
        });
    }
    let mut record = rank_class(&e, 1e-10)?;
    record.commutation_defect = commutation;

    let mut p = id;
    let mut closest = PowerWitness {
        power: 0,
        distance: f64::INFINITY,
    };
    for n in 1..=WITNESS_MAX_POWER {
        p *= xm;
        let d = (p - e).norm();
        if d < closest.distance {
            closest = PowerWitness { power: n, distance: d };
        }
        if d < WITNESS_THRESHOLD {
            record.witness = Some(closest);
            break;
        }
    }
    if record.witness.is_none() {
        record.warnings.push(IdempotentWarning::NoPowerWitness);
        record.closest_power = Some(closest);
    }
    Ok(record)
}

/// `x = h + y` with `h = e x e` and `y = (1-e) x (1-e)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    #[serde(with = "mat8_serde")]
    pub h: Mat8,
    #[serde(with = "mat8_serde")]
    pub y: Mat8,
    /// Reported separately by callers that serialize the decomposition.
    #[serde(skip)]
    pub e: IdempotentRecord,
    pub cross_residual: f64,
    /// `max(‖hᵗh - e‖, ‖hhᵗ - e‖)`, entrywise.
    pub isometry_defect: f64,
    pub y_norm: f64,
    pub y_spectral_radius: f64,
    /// `‖y^64‖`.
    pub y_power_norm: f64,
}

pub fn decompose(x: &MapMatrix, e: &IdempotentRecord, tol: f64) -> Result<Decomposition, SemigroupError> {
    let xm = x.matrix();
    let em = e.e;
    let perp = Mat8::identity() - em;
    let cross = max_abs(&(em * xm * perp)).max(max_abs(&(perp * xm * em)));
    if !(cross <= tol) {
        return Err(SemigroupError::Inconsistent { cross });
    }
    let h = em * xm * em;
    let y = perp * xm * perp;
    let isometry = max_abs(&(h.transpose() * h - em)).max(max_abs(&(h * h.transpose() - em)));
    if isometry > tol.max(1e-8) {
        return Err(SemigroupError::NotIsometric { defect: isometry });
    }
    let rho = linalg::spectral_radius(&y);
    if rho >= 1.0 - PERIPHERAL_TOL {
        return Err(SemigroupError::NoDecay { spectral_radius: rho });
    }
    Ok(Decomposition {
        h,
        y,
        e: e.clone(),
        cross_residual: cross,
        isometry_defect: isometry,
        y_norm: linalg::operator_norm(&y),
        y_spectral_radius: rho,
        y_power_norm: linalg::operator_norm(&linalg::mat_pow(&y, 64)),
    })
}

/// Multiplicity of the singular value one of `y_x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QIndex {
    pub index: usize,
    pub singular_values: [f64; 8],
    /// A counted singular value was not one to within 1e-10.
    pub boundary: bool,
    /// `Q_i(e)` is empty for `i >= 5 - dim e` when `dim e <= 4`, and
    /// `Q(e) = Q_0(e)` when `dim e` is 5 or 8.
    pub emptiness_consistent: bool,
}

pub fn q_index_of(dec: &Decomposition, tol: f64) -> Result<QIndex, SemigroupError> {
    let s = linalg::singular_values(&dec.y);
    if s[0] > 1.0 + tol {
        return Err(SemigroupError::SingularValueAboveOne { value: s[0] });
    }
    let index = s.iter().filter(|&&v| v >= 1.0 - tol).count();
    let boundary = s.iter().any(|&v| v >= 1.0 - tol && (v - 1.0).abs() > 1e-10);
    let rank = dec.e.rank;
    let emptiness_consistent = match rank {
        5 | 8 => index == 0,
        r => index + r < 5,
    };
    Ok(QIndex {
        index,
        singular_values: s,
        boundary,
        emptiness_consistent,
    })
}

/// Runs [`idempotent_of`], [`decompose`] and [`q_index_of`].
pub fn q_index(x: &MapMatrix, tol: f64) -> Result<QIndex, SemigroupError> {
    let e = idempotent_of(x, PERIPHERAL_TOL)?;
    let dec = decompose(x, &e, DECOMPOSE_TOL)?;
    q_index_of(&dec, tol)
}

/// `g_ij = tr λ_i U λ_j U*`.
pub fn adjoint_rep(u: &CMat3) -> Result<Mat8, SemigroupError> {
    let defect = (u.adjoint() * u - CMat3::identity())
        .iter()
        .fold(0.0f64, |a, z| a.max(z.norm()));
    if !(defect <= 1e-10) {
        return Err(SemigroupError::NonUnitary { defect });
    }
    Ok(ad_unchecked(u))
}

fn ad_unchecked(u: &CMat3) -> Mat8 {
    let b = basis();
    let ud = u.adjoint();
    let images: Vec<CMat3> = (1..=8).map(|j| u * b.get(j) * ud).collect();
    Mat8::from_fn(|i, j| tr_re(b.get(i + 1), &images[j]))
}

/// `exp(i Σ θ_k λ_k)`.
pub fn su3_chart(theta: &[f64; 8]) -> CMat3 {
    let b = basis();
    let mut h = CMat3::zeros();
    for k in 0..8 {
        h += b.get(k + 1) * C64::from(theta[k]);
    }
    linalg::expi_hermitian(&h)
}

/// Derivatives of `Ad exp(i t λ_k)` at `t = 0`: `(A_k)_ij = tr λ_i i[λ_k, λ_j]`.
fn generators() -> &'static [Mat8; 8] {
    static GENS: OnceLock<[Mat8; 8]> = OnceLock::new();
    GENS.get_or_init(|| {
        let b = basis();
        let i = C64::new(0.0, 1.0);
        std::array::from_fn(|k| {
            let lk = b.get(k + 1);
            Mat8::from_fn(|r, c| {
                let lc = b.get(c + 1);
                let comm = (lk * lc - lc * lk) * i;
                tr_re(b.get(r + 1), &comm)
            })
        })
    })
}

/// Result of matching an idempotent to the orbit of a canonical projector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitFit {
    /// `e ≈ g p gᵗ`.
    #[serde(with = "mat8_serde")]
    pub g: Mat8,
    #[serde(skip)]
    pub unitary: CMat3,
    pub target: CanonicalClass,
    pub residual: f64,
    pub evaluations: usize,
    pub start: usize,
}

fn orbit_residual(g: &Mat8, p: &Mat8, e: &Mat8) -> f64 {
    (g * p * g.transpose() - e).norm()
}

fn orbit_local_search(u0: CMat3, p: &Mat8, e: &Mat8, cap: usize) -> (CMat3, f64, usize) {
    let mut u = u0;
    let mut g = ad_unchecked(&u);
    let mut value = orbit_residual(&g, p, e);
    let mut evals = 1;

    // Coarse coordinate descent in a chart re-centred at the current point.
    let mut step = 0.5;
    for _ in 0..10 {
        for k in 0..8 {
            for dir in [1.0, -1.0] {
                if evals >= cap {
                    break;
                }
                let mut theta = [0.0; 8];
                theta[k] = dir * step;
                let trial = u * su3_chart(&theta);
                let gt = ad_unchecked(&trial);
                let v = orbit_residual(&gt, p, e);
                evals += 1;
                if v < value {
                    value = v;
                    u = trial;
                    g = gt;
                    break;
                }
            }
        }
        step *= 0.5;
    }

    // Levenberg-Marquardt polish on the residual g p gᵗ - e.
    let gens = generators();
    let mut mu = 1e-3;
    for _ in 0..100 {
        if value < 1e-14 || evals >= cap || mu > 1e10 {
            break;
        }
        let r = g * p * g.transpose() - e;
        let jac: Vec<Mat8> = gens
            .iter()
            .map(|a| g * (a * p - p * a) * g.transpose())
            .collect();
        let mut jtj = SMatrix::<f64, 8, 8>::zeros();
        let mut jtr = Vec8::zeros();
        for a in 0..8 {
            jtr[a] = jac[a].dot(&r);
            for b in 0..8 {
                jtj[(a, b)] = jac[a].dot(&jac[b]);
            }
        }
        evals += 9;
        let scale = jtj.diagonal().max().max(1e-12);
        let mut accepted = false;
        while mu <= 1e10 && evals < cap {
            let mut lhs = jtj;
            for a in 0..8 {
                lhs[(a, a)] += mu * scale;
            }
            let Some(delta) = lhs.cholesky().map(|c| c.solve(&(-jtr))) else {
                mu *= 10.0;
                continue;
            };
            let theta: [f64; 8] = std::array::from_fn(|k| delta[k]);
            let trial = u * su3_chart(&theta);
            let gt = ad_unchecked(&trial);
            let v = orbit_residual(&gt, p, e);
            evals += 1;
            if v < value {
                u = trial;
                g = gt;
                value = v;
                mu = (mu / 3.0).max(1e-12);
                accepted = true;
                break;
            }
            mu *= 4.0;
        }
        if !accepted {
            break;
        }
    }
    (u, value, evals)
}

fn fit_orbit(
    e: &Mat8,
    target: CanonicalClass,
    budget: usize,
    seed: u64,
    starts: usize,
) -> Result<OrbitFit, SemigroupError> {
    let p = target.projector();
    // Moves inside the stabilizer of p leave the residual at rounding level,
    // so an exact fit must not enter the search at all.
    if matches!(target, CanonicalClass::P0 | CanonicalClass::One8) || (p - e).norm() < 1e-12 {
        let fit = OrbitFit {
            g: Mat8::identity(),
            unitary: CMat3::identity(),
            target,
            residual: (p - e).norm(),
            evaluations: 1,
            start: 0,
        };
        return if fit.residual < ORBIT_SUCCESS {
            Ok(fit)
        } else {
            Err(SemigroupError::OrbitSearchFailed { best: Box::new(fit) })
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_start = (budget / starts.max(1)).max(50);
    let mut best: Option<OrbitFit> = None;
    let mut evaluations = 0;
    for s in 0..starts.max(1) {
        if evaluations >= budget {
            break;
        }
        let u0 = if s == 0 { CMat3::identity() } else { haar_unitary(&mut rng) };
        let (u, residual, evals) = orbit_local_search(u0, &p, e, per_start.min(budget - evaluations));
        evaluations += evals;
        if best.as_ref().is_none_or(|b| residual < b.residual) {
            best = Some(OrbitFit {
                g: ad_unchecked(&u),
                unitary: u,
                target,
                residual,
                evaluations,
                start: s,
            });
        }
        if residual < 1e-10 {
            break;
        }
    }
    let mut best = best.expect("at least one start");
    best.evaluations = evaluations;
    if best.residual < ORBIT_SUCCESS {
        Ok(best)
    } else {
        Err(SemigroupError::OrbitSearchFailed { best: Box::new(best) })
    }
}

/// Finds `g = Ad U` with `e ≈ g p gᵗ` for the canonical projector `p` of
/// `e`'s class.
pub fn conjugate_to_canonical(e: &IdempotentRecord, budget: usize, seed: u64) -> Result<OrbitFit, SemigroupError> {
    fit_orbit(&e.e, e.canonical_class, budget, seed, DEFAULT_ORBIT_STARTS)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionResult {
    #[serde(with = "mat8_serde")]
    pub g1: Mat8,
    #[serde(with = "mat8_serde")]
    pub z: Mat8,
    #[serde(with = "mat8_serde")]
    pub g2: Mat8,
    /// Class of `e_x`.
    pub source_class: CanonicalClass,
    /// Class `p_{i+j}` with `z` in `Q_0(p_{i+j})`.
    pub target_class: CanonicalClass,
    /// Multiplicity `i` of the unit singular value of `y_x`.
    pub unit_multiplicity: usize,
    /// Largest of the reconstruction error, the orbit residuals and the
    /// commutation defect of `z`.
    pub residual: f64,
    pub orbit_residuals: Vec<f64>,
    pub commutation_defect: f64,
    pub z_y_norm: f64,
    pub evaluations: usize,
}

/// Writes `x = g1 z g2` with `g1, g2` in `Ad SU(3)` and `z` in
/// `Q_0(p_{i+j})`, following the singular value decomposition of `y_x`.
pub fn reduce_canonical(x: &MapMatrix, budget: usize, seed: u64) -> Result<ReductionResult, SemigroupError> {
    let xm = *x.matrix();
    let e = idempotent_of(x, PERIPHERAL_TOL)?;
    let j = e.rank;
    let pj = e.canonical_class.projector();
    let mut orbit_residuals = Vec::new();
    let mut evaluations = 0;

    let g0 = if max_abs(&(e.e - pj)) <= 1e-10 {
        Mat8::identity()
    } else {
        let fit = conjugate_to_canonical(&e, budget, seed)?;
        orbit_residuals.push(fit.residual);
        evaluations += fit.evaluations;
        fit.g
    };
    let xc = g0.transpose() * xm * g0;
    let perp = Mat8::identity() - pj;
    let cross = max_abs(&(pj * xc * perp)).max(max_abs(&(perp * xc * pj)));
    if cross > DECOMPOSE_TOL.max(10.0 * orbit_residuals.iter().copied().fold(0.0, f64::max)) {
        return Err(SemigroupError::Inconsistent { cross });
    }
    let y = perp * xc * perp;
    let svd = y.svd(true, true);
    let (u, v_t) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
    if let Some(&s) = svd.singular_values.iter().find(|&&s| s > 1.0 + Q_TOL) {
        return Err(SemigroupError::SingularValueAboveOne { value: s });
    }
    let unit: Vec<usize> = (0..8).filter(|&k| svd.singular_values[k] >= 1.0 - Q_TOL).collect();
    let i = unit.len();

    let finish = |g1: Mat8, z: Mat8, g2: Mat8, target: CanonicalClass, orbit_residuals: Vec<f64>, evaluations| {
        let pk = target.projector();
        let commutation = max_abs(&(pk * z - z * pk));
        let tol = 1e-8f64.max(10.0 * orbit_residuals.iter().copied().fold(0.0, f64::max));
        if commutation > tol {
            return Err(SemigroupError::VerificationFailed {
                what: "‖p z - z p‖".into(),
                value: commutation,
            });
        }
        let pk_perp = Mat8::identity() - pk;
        let z_y_norm = linalg::operator_norm(&(pk_perp * z * pk_perp));
        if z_y_norm >= 1.0 - Q_TOL {
            return Err(SemigroupError::VerificationFailed {
                what: "‖y_z‖".into(),
                value: z_y_norm,
            });
        }
        let reconstruction = (g1 * z * g2 - xm).norm();
        let residual = orbit_residuals
            .iter()
            .copied()
            .fold(reconstruction.max(commutation), f64::max);
        Ok(ReductionResult {
            g1,
            z,
            g2,
            source_class: e.canonical_class,
            target_class: target,
            unit_multiplicity: i,
            residual,
            orbit_residuals,
            commutation_defect: commutation,
            z_y_norm,
            evaluations,
        })
    };

    if i == 0 {
        return finish(g0, xc, g0.transpose(), e.canonical_class, orbit_residuals, evaluations);
    }
    if i > 4 || j > 4 || i + j > 5 {
        return Err(SemigroupError::ReductionOutOfRange { i, j });
    }
    let k = i + j;
    let target = CanonicalClass::from_rank(k).ok_or(SemigroupError::ForbiddenRank(k))?;
    let mut e1 = pj;
    let mut e2 = pj;
    for &c in &unit {
        let left = u.column(c).into_owned();
        let right = v_t.row(c).transpose();
        e1 += left * left.transpose();
        e2 += right * right.transpose();
    }
    let fit1 = fit_orbit(&e1, target, budget, seed.wrapping_add(1), DEFAULT_ORBIT_STARTS)?;
    let fit2 = fit_orbit(&e2, target, budget, seed.wrapping_add(2), DEFAULT_ORBIT_STARTS)?;
    orbit_residuals.push(fit1.residual);
    orbit_residuals.push(fit2.residual);
    evaluations += fit1.evaluations + fit2.evaluations;
    // e1 = g1' p g1'ᵗ and e2 = g2'ᵗ p g2'.
    let g1p = fit1.g;
    let g2p = fit2.g.transpose();
    let z = g1p.transpose() * xc * g2p.transpose();
    finish(g0 * g1p, z, g2p * g0.transpose(), target, orbit_residuals, evaluations)
}
