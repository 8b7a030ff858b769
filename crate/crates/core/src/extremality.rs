//! Extreme points of Λ.
//!
//! A positive `x` is constrained by `1/3 + ⟨m, x n⟩ ≥ 0` for every pair of
//! pure-state Bloch vectors. The pairs where the constraint is tight (the
//! active set) determine which perturbations `x ± εd` can stay inside Λ:
//! if the outer products `m nᵗ` of active pairs span all 64 dimensions no
//! such `d` exists and `x` is extreme. Otherwise a candidate `d` from the
//! null space is tested by explicit positivity checks of both endpoints.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::coherence::{bloch_of, MapMatrix};
use crate::linalg::{self, opt_mat8_serde, CMat3, CVec3, Mat8, Vec8, C64};
use crate::positivity::{
    self, coordinate_descent, image_of_pure, pair_value, PositivityError, PureState, Verdict, Witness, MIN_BUDGET,
};
use crate::semigroup::{self, CanonicalClass, SemigroupError, DEFAULT_ORBIT_BUDGET};

/// Constraint values at or below this count as active.
pub const ACTIVE_TOL: f64 = 1e-6;
pub const DEFLATION_RADIUS: f64 = 0.05;
/// Restarts without a new active pair before the search gives up.
pub const STALL_RESTARTS: usize = 16;
/// Singular values of the active rows above this count toward the rank.
pub const RANK_THRESHOLD: f64 = 1e-8;
pub const MAX_DIRECTIONS: usize = 16;
pub const BISECTION_STEPS: usize = 12;
pub const MAX_EPSILON: f64 = 0.1;
/// Shorter admissible segments are not accepted as evidence.
pub const MIN_EPSILON: f64 = 1e-3;
/// Positivity tolerance for the endpoints `x ± εd`.
pub const ENDPOINT_TOL: f64 = 1e-10;

const GRID_POINTS: usize = 8;
const MAX_ACTIVE_STATES: usize = 512;
/// Candidate directions may violate the linearised constraints by this much.
const DIRECTION_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtremalityError {
    #[error(transparent)]
    Positivity(#[from] PositivityError),
    #[error("x is not positive: tr P S_x(Q) = {value:e} at the attached witness")]
    NotPositive { value: f64, witness: Option<Box<Witness>> },
    #[error("tolerance {0:e} must be positive and below 1e-2")]
    InvalidTolerance(f64),
}

fn serialize_vec8<S: Serializer>(v: &Vec8, s: S) -> Result<S::Ok, S::Error> {
    v.as_slice().serialize(s)
}

/// A pure-state pair `(P, Q)` with `tr P S_x(Q) = 1/3 + ⟨m, x n⟩`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivePair {
    #[serde(serialize_with = "serialize_vec8")]
    pub m: Vec8,
    #[serde(serialize_with = "serialize_vec8")]
    pub n: Vec8,
    pub value: f64,
    #[serde(skip)]
    pub p: PureState,
    #[serde(skip)]
    pub q: PureState,
}

impl ActivePair {
    fn new(x: &MapMatrix, p: PureState, q: PureState) -> Self {
        Self {
            m: p.bloch,
            n: q.bloch,
            value: pair_value(x, &p.bloch, &q.bloch),
            p,
            q,
        }
    }

    pub fn row(&self) -> [f64; 64] {
        linalg::outer_row(&self.m, &self.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStop {
    Stalled,
    BudgetExhausted,
    FullRank,
    StateCap,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActiveSet {
    pub pairs: Vec<ActivePair>,
    pub tol: f64,
    pub restarts: usize,
    pub evaluations: usize,
    pub stop: SearchStop,
}

impl ActiveSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn rows(&self) -> Vec<[f64; 64]> {
        self.pairs.iter().map(ActivePair::row).collect()
    }

    /// Rank of the span of `m nᵗ` over the pairs.
    pub fn rank(&self) -> usize {
        linalg::null_space_64(&self.rows(), RANK_THRESHOLD).rank
    }

    /// One line per pair: the eight components of `m`, then those of `n`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for p in &self.pairs {
            let fields: Vec<String> = p.m.iter().chain(p.n.iter()).map(|v| format!("{v:.17e}")).collect();
            let _ = writeln!(out, "{}", fields.join(","));
        }
        out
    }
}

/// Angles reproducing `ket` up to phase under [`PureState::from_angles`].
fn angles_of(ket: &CVec3) -> [f64; 4] {
    let t1 = ket[0].norm().clamp(0.0, 1.0).acos();
    let t2 = ket[2].norm().atan2(ket[1].norm());
    let phase = if ket[0].norm() > 1e-12 { ket[0].arg() } else { 0.0 };
    [t1, t2, ket[1].arg() - phase, ket[2].arg() - phase]
}

/// Bloch vectors of the four tangent directions of the pure-state manifold
/// at `ψ`, i.e. of `ψφ* + φψ*` for `φ ∈ {φ1, iφ1, φ2, iφ2}` spanning `ψ⊥`.
fn tangents(ket: &CVec3) -> [Vec8; 4] {
    let psi = ket / C64::from(ket.norm());
    let mut perp: Vec<CVec3> = Vec::with_capacity(2);
    for k in 0..3 {
        let mut v = CVec3::zeros();
        v[k] = C64::from(1.0);
        v -= psi * psi.dotc(&v);
        for u in &perp {
            v -= u * u.dotc(&v);
        }
        if v.norm() > 1e-6 {
            perp.push(v / C64::from(v.norm()));
        }
        if perp.len() == 2 {
            break;
        }
    }
    let i = C64::new(0.0, 1.0);
    let dir = |phi: CVec3| -> Vec8 {
        let d: CMat3 = psi * phi.adjoint() + phi * psi.adjoint();
        bloch_of(&d)
    };
    [dir(perp[0]), dir(perp[0] * i), dir(perp[1]), dir(perp[1] * i)]
}

/// Rows `vec(δm nᵗ)` and `vec(m δnᵗ)`: a segment through `x` inside Λ must
/// keep each active pair a critical point of the constraint.
fn tangent_rows(pair: &ActivePair) -> Vec<[f64; 64]> {
    let mut rows = Vec::with_capacity(8);
    for dm in tangents(&pair.p.ket) {
        rows.push(linalg::outer_row(&dm, &pair.n));
    }
    for dn in tangents(&pair.q.ket) {
        rows.push(linalg::outer_row(&pair.m, &dn));
    }
    rows
}

fn random_angles(rng: &mut ChaCha8Rng) -> [f64; 4] {
    [
        rng.random_range(0.0..FRAC_PI_2),
        rng.random_range(0.0..FRAC_PI_2),
        rng.random_range(0.0..2.0 * PI),
        rng.random_range(0.0..2.0 * PI),
    ]
}

fn grid_angles(idx: usize) -> [f64; 4] {
    let g = GRID_POINTS;
    let theta = |i: usize| FRAC_PI_2 * i as f64 / (g - 1) as f64;
    let phi = |i: usize| 2.0 * PI * i as f64 / g as f64;
    [
        theta(idx / (g * g * g)),
        theta((idx / (g * g)) % g),
        phi((idx / g) % g),
        phi(idx % g),
    ]
}

fn min_eig(x: &MapMatrix, angles: &[f64; 4]) -> f64 {
    let q = PureState::from_angles(angles);
    linalg::hermitian_min_eigenvalue(&image_of_pure(x, &q.bloch))
}

/// All pairs `(P, Q)` with `Q` at `angles` and `P` in the eigenspace of
/// `S_x(Q)` for eigenvalues at most `tol`. A two-dimensional eigenspace
/// contributes four projectors, enough to span its Hermitian matrices.
fn pairs_at(x: &MapMatrix, q: PureState, tol: f64) -> Vec<ActivePair> {
    let (vals, vecs) = linalg::hermitian_eigen(&image_of_pure(x, &q.bloch));
    let zero: Vec<CVec3> = (0..3).filter(|&k| vals[k] <= tol).map(|k| vecs[k]).collect();
    let kets: Vec<CVec3> = match zero.as_slice() {
        [] => Vec::new(),
        [a] => vec![*a],
        [a, b, ..] => {
            let s = C64::from(std::f64::consts::FRAC_1_SQRT_2);
            vec![*a, *b, (a + b) * s, (a + b * C64::new(0.0, 1.0)) * s]
        }
    };
    kets.into_iter()
        .map(|k| ActivePair::new(x, PureState::from_ket(k), q))
        .collect()
}

/// Collects pairs with `1/3 + ⟨m, x n⟩ ≤ tol` by restarted local minimisation
/// of `λ_min(S_x(Q))` over `Q`, penalising the neighbourhoods of states found
/// earlier.
pub fn active_pairs(x: &MapMatrix, tol: f64, budget: usize, seed: u64) -> Result<ActiveSet, ExtremalityError> {
    active_pairs_with(x, tol, budget, seed, DEFLATION_RADIUS)
}

pub fn active_pairs_with(
    x: &MapMatrix,
    tol: f64,
    budget: usize,
    seed: u64,
    radius: f64,
) -> Result<ActiveSet, ExtremalityError> {
    if !(tol > 0.0 && tol < 1e-2) {
        return Err(ExtremalityError::InvalidTolerance(tol));
    }
    if budget < MIN_BUDGET {
        return Err(PositivityError::BudgetTooSmall(budget).into());
    }
    let grid = GRID_POINTS.pow(4).min(budget / 4);
    let values: Vec<f64> = (0..grid).into_par_iter().map(|i| min_eig(x, &grid_angles(i))).collect();
    let mut order: Vec<usize> = (0..grid).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut next_grid = order.into_iter();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut evaluations = grid;
    let mut found: Vec<Vec8> = Vec::new();
    let mut pairs: Vec<ActivePair> = Vec::new();
    let mut stall = 0;
    let mut restarts = 0;
    let step = FRAC_PI_2 / (GRID_POINTS - 1) as f64;

    let stop = loop {
        if stall >= STALL_RESTARTS {
            break SearchStop::Stalled;
        }
        if evaluations >= budget {
            break SearchStop::BudgetExhausted;
        }
        if found.len() >= MAX_ACTIVE_STATES {
            break SearchStop::StateCap;
        }
        restarts += 1;
        let start = if restarts % 2 == 1 {
            next_grid.next().map(grid_angles).unwrap_or_else(|| random_angles(&mut rng))
        } else {
            random_angles(&mut rng)
        };
        let near = |n: &Vec8| found.iter().map(|f| (f - n).norm()).fold(f64::INFINITY, f64::min);
        let penalised = |a: &[f64; 4]| {
            let q = PureState::from_angles(a);
            let base = linalg::hermitian_min_eigenvalue(&image_of_pure(x, &q.bloch));
            base + found.iter().map(|f| (radius - (f - q.bloch).norm()).max(0.0)).sum::<f64>()
        };
        let cap = (budget - evaluations).min(400);
        let (_, angles, used) = coordinate_descent(&penalised, start, step, 40, cap, None);
        evaluations += used;
        let q = PureState::from_angles(&angles);
        if near(&q.bloch) < radius {
            stall += 1;
            continue;
        }
        // Polish without the penalty so the reported pair is a genuine zero.
        let plain = |a: &[f64; 4]| min_eig(x, a);
        let cap = (budget.saturating_sub(evaluations)).clamp(1, 400);
        let (value, angles, used) = coordinate_descent(&plain, angles, 0.02, 40, cap, None);
        evaluations += used;
        if value < -tol {
            let q = PureState::from_angles(&angles);
            let (_, vecs) = linalg::hermitian_eigen(&image_of_pure(x, &q.bloch));
            return Err(ExtremalityError::NotPositive {
                value,
                witness: Some(Box::new(Witness {
                    p: PureState::from_ket(vecs[0]),
                    q,
                })),
            });
        }
        let q = PureState::from_angles(&angles);
        if value > tol || near(&q.bloch) < radius {
            stall += 1;
            continue;
        }
        stall = 0;
        found.push(q.bloch);
        pairs.extend(pairs_at(x, q, tol));
        let rows: Vec<[f64; 64]> = pairs.iter().map(ActivePair::row).collect();
        if linalg::null_space_64(&rows, RANK_THRESHOLD).rank == 64 {
            break SearchStop::FullRank;
        }
    };
    Ok(ActiveSet {
        pairs,
        tol,
        restarts,
        evaluations,
        stop,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExtremalityVerdict {
    CertifiedExtreme,
    NotExtreme,
    Inconclusive,
}

/// What settled the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremalityBasis {
    /// `‖x‖ < 1/2`: a ball around `x` lies in Λ.
    NormScreen,
    /// The active outer products span all 64 dimensions.
    ActiveRank,
    /// A verified segment `x ± εd` inside Λ.
    Segment,
    /// Every candidate direction failed.
    DirectionsExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremalityReport {
    pub verdict: ExtremalityVerdict,
    pub basis: ExtremalityBasis,
    /// Rank of the span of `m nᵗ` over active pairs.
    pub active_rank: usize,
    pub active_pairs: usize,
    /// Rank of the active rows together with their tangent rows.
    pub constraint_rank: usize,
    #[serde(serialize_with = "opt_mat8_serde::serialize")]
    pub direction: Option<Mat8>,
    pub epsilon: Option<f64>,
    pub directions_tried: usize,
    pub operator_norm: f64,
    pub tol: f64,
    pub budget: usize,
    pub seed: u64,
}

impl ExtremalityReport {
    fn new(x: &MapMatrix, tol: f64, budget: usize, seed: u64) -> Self {
        Self {
            verdict: ExtremalityVerdict::Inconclusive,
            basis: ExtremalityBasis::DirectionsExhausted,
            active_rank: 0,
            active_pairs: 0,
            constraint_rank: 0,
            direction: None,
            epsilon: None,
            directions_tried: 0,
            operator_norm: x.operator_norm(),
            tol,
            budget,
            seed,
        }
    }
}

/// The failing endpoint's witness if one of `x ± εd` is not positive.
fn endpoints(
    x: &MapMatrix,
    d: &Mat8,
    eps: f64,
    budget: usize,
    seed: u64,
) -> Result<Option<Option<Witness>>, ExtremalityError> {
    for sign in [1.0, -1.0] {
        let y = MapMatrix::new(x.matrix() + d * (sign * eps));
        let r = positivity::is_positive(&y, ENDPOINT_TOL, budget, seed)?;
        if r.verdict == Verdict::NotPositive {
            return Ok(Some(r.witness));
        }
    }
    Ok(None)
}

/// Largest `ε ≤ MAX_EPSILON` (up to bisection accuracy) with `x ± εd` in Λ,
/// or the witness against the shortest acceptable segment.
fn line_search(
    x: &MapMatrix,
    d: &Mat8,
    budget: usize,
    seed: u64,
) -> Result<Result<f64, Option<Witness>>, ExtremalityError> {
    if endpoints(x, d, MAX_EPSILON, budget, seed)?.is_none() {
        return Ok(Ok(MAX_EPSILON));
    }
    // Settle the lower end first: if even the shortest acceptable segment
    // fails, bisection cannot help.
    if let Some(w) = endpoints(x, d, MIN_EPSILON, budget, seed)? {
        return Ok(Err(w));
    }
    let (mut lo, mut hi) = (MIN_EPSILON, MAX_EPSILON);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if endpoints(x, d, mid, budget, seed)?.is_none() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Ok(lo))
}

/// Tests whether `x` is an extreme point of Λ.
///
/// `tol` is the activity threshold for constraints. Directions are drawn
/// from the common null space of the active rows and their tangent rows; a
/// direction that fails is answered by adding the failing pair (refined to
/// a nearby zero of `x` where possible) to the constraints.
pub fn extreme_in_lambda(
    x: &MapMatrix,
    tol: f64,
    budget: usize,
    seed: u64,
) -> Result<ExtremalityReport, ExtremalityError> {
    if !(tol > 0.0 && tol < 1e-2) {
        return Err(ExtremalityError::InvalidTolerance(tol));
    }
    let pos = positivity::is_positive(x, positivity::DEFAULT_TOL, budget, seed)?;
    if pos.verdict == Verdict::NotPositive {
        return Err(ExtremalityError::NotPositive {
            value: pos.min_value,
            witness: pos.witness.map(Box::new),
        });
    }
    let mut report = ExtremalityReport::new(x, tol, budget, seed);

    if report.operator_norm < 0.5 {
        let d = Mat8::identity() / 8f64.sqrt();
        let eps = ((0.5 - report.operator_norm) * 8f64.sqrt()).min(MAX_EPSILON);
        if endpoints(x, &d, eps, budget, seed)?.is_none() {
            report.verdict = ExtremalityVerdict::NotExtreme;
            report.basis = ExtremalityBasis::NormScreen;
            report.direction = Some(d);
            report.epsilon = Some(eps);
            report.directions_tried = 1;
            return Ok(report);
        }
    }

    let active = active_pairs(x, tol, budget, seed)?;
    let mut pairs = active.pairs;
    let mut rows: Vec<[f64; 64]> = Vec::new();
    for p in &pairs {
        rows.push(p.row());
        rows.extend(tangent_rows(p));
    }
    let active_rank = |pairs: &[ActivePair]| {
        let r: Vec<[f64; 64]> = pairs.iter().filter(|p| p.value <= tol).map(ActivePair::row).collect();
        linalg::null_space_64(&r, RANK_THRESHOLD).rank
    };
    report.active_rank = active_rank(&pairs);
    report.active_pairs = pairs.len();
    if report.active_rank == 64 {
        report.verdict = ExtremalityVerdict::CertifiedExtreme;
        report.basis = ExtremalityBasis::ActiveRank;
        report.constraint_rank = 64;
        return Ok(report);
    }

    while report.directions_tried < MAX_DIRECTIONS {
        let ns = linalg::null_space_64(&rows, DIRECTION_THRESHOLD);
        report.constraint_rank = ns.rank;
        let Some(&(_, d)) = ns.directions.first() else {
            break;
        };
        report.directions_tried += 1;
        match line_search(x, &d, budget, seed)? {
            Ok(eps) => {
                report.verdict = ExtremalityVerdict::NotExtreme;
                report.basis = ExtremalityBasis::Segment;
                report.direction = Some(d);
                report.epsilon = Some(eps);
                return Ok(report);
            }
            Err(witness) => {
                let cut = match witness {
                    Some(w) => refine_cut(x, &w, tol, budget / 16),
                    // No witness: the endpoint failed on the norm bound. Cut
                    // the direction itself.
                    None => Vec::new(),
                };
                if cut.is_empty() {
                    let mut row = [0.0; 64];
                    row.copy_from_slice(d.transpose().as_slice());
                    rows.push(row);
                }
                for p in cut {
                    rows.push(p.row());
                    rows.extend(tangent_rows(&p));
                    pairs.push(p);
                }
            }
        }
    }
    report.active_rank = active_rank(&pairs);
    report.active_pairs = pairs.iter().filter(|p| p.value <= tol).count();
    if report.active_rank == 64 {
        report.verdict = ExtremalityVerdict::CertifiedExtreme;
        report.basis = ExtremalityBasis::ActiveRank;
    }
    Ok(report)
}

/// Pairs to add after a failed direction: the zeros of `x` nearest the
/// witness `Q` if the local search reaches one, otherwise the witness pair.
fn refine_cut(x: &MapMatrix, w: &Witness, tol: f64, budget: usize) -> Vec<ActivePair> {
    let plain = |a: &[f64; 4]| min_eig(x, a);
    let start = angles_of(&w.q.ket);
    let (value, angles, _) = coordinate_descent(&plain, start, 0.02, 40, budget.max(400), None);
    if value <= tol {
        let found = pairs_at(x, PureState::from_angles(&angles), tol);
        if !found.is_empty() {
            return found;
        }
    }
    vec![ActivePair::new(x, w.p, w.q)]
}

/// Group of the extremal-candidate program a map falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CandidateTag {
    /// `x` orthogonal: a Jordan automorphism of `M3`.
    JordanIso,
    /// `e_x = 0` and `x = R/2` with `R` orthogonal.
    StronglyErgodicHalf,
    /// `x = g1 (P8 + y) g2` with `y P8 = P8 y = 0` and `‖y‖ < 1`.
    Q0P8Form,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateEvidence {
    pub operator_norm: f64,
    pub idempotent_class: CanonicalClass,
    pub q_index: Option<usize>,
    /// `‖x xᵗ - 1‖`.
    pub orthogonality_defect: f64,
    /// `‖4 x xᵗ - 1‖`.
    pub half_orthogonality_defect: f64,
    pub reduction_residual: Option<f64>,
    pub reduced_y_norm: Option<f64>,
    /// An orbit search or reduction failed; the tag is a fallback.
    pub degraded: bool,
    pub degraded_reason: Option<String>,
    /// `x` violates a necessary condition for extremality in the cone of all
    /// positive maps: its idempotent class is not `p0`, `p1` or `one8`, or it
    /// has norm one without reducing to `P8 + y`.
    pub ext0_excluded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateGroup {
    pub tag: CandidateTag,
    pub evidence: CandidateEvidence,
}

const CLASSIFY_TOL: f64 = 1e-8;

/// Sorts `x` into the candidate groups for extremal positive maps.
pub fn classify_candidate(x: &MapMatrix, budget: usize, seed: u64) -> Result<CandidateGroup, SemigroupError> {
    let xm = x.matrix();
    let e = semigroup::idempotent_of(x, semigroup::PERIPHERAL_TOL)?;
    let norm = x.operator_norm();
    let xxt = xm * xm.transpose();
    let id = Mat8::identity();
    let mut ev = CandidateEvidence {
        operator_norm: norm,
        idempotent_class: e.canonical_class,
        q_index: None,
        orthogonality_defect: linalg::operator_norm(&(xxt - id)),
        half_orthogonality_defect: linalg::operator_norm(&(xxt * 4.0 - id)),
        reduction_residual: None,
        reduced_y_norm: None,
        degraded: false,
        degraded_reason: None,
        ext0_excluded: !matches!(
            e.canonical_class,
            CanonicalClass::P0 | CanonicalClass::P1 | CanonicalClass::One8
        ),
    };
    match semigroup::decompose(x, &e, semigroup::DECOMPOSE_TOL)
        .and_then(|d| semigroup::q_index_of(&d, semigroup::Q_TOL))
    {
        Ok(q) => ev.q_index = Some(q.index),
        Err(err) => {
            ev.degraded = true;
            ev.degraded_reason = Some(err.to_string());
        }
    }

    let tag = |tag, ev| Ok(CandidateGroup { tag, evidence: ev });
    if e.canonical_class == CanonicalClass::One8 && ev.orthogonality_defect <= CLASSIFY_TOL {
        return tag(CandidateTag::JordanIso, ev);
    }
    if e.canonical_class == CanonicalClass::P0
        && (norm - 0.5).abs() <= CLASSIFY_TOL
        && ev.half_orthogonality_defect <= CLASSIFY_TOL
    {
        return tag(CandidateTag::StronglyErgodicHalf, ev);
    }
    let reducible = match (e.canonical_class, ev.q_index) {
        (CanonicalClass::P1, Some(0)) | (CanonicalClass::P0, Some(1)) => true,
        (CanonicalClass::P1, Some(_)) => {
            ev.ext0_excluded = true;
            false
        }
        (CanonicalClass::P0, Some(i)) => {
            ev.ext0_excluded |= i >= 2;
            false
        }
        _ => false,
    };
    if reducible {
        match semigroup::reduce_canonical(x, budget.max(DEFAULT_ORBIT_BUDGET), seed) {
            Ok(r) => {
                let p8 = CanonicalClass::P1.projector();
                let y = r.z - p8;
                let block = linalg::max_abs(&(y * p8)).max(linalg::max_abs(&(p8 * y)));
                let y_norm = linalg::operator_norm(&y);
                ev.reduction_residual = Some(r.residual);
                ev.reduced_y_norm = Some(y_norm);
                if r.target_class == CanonicalClass::P1
                    && r.residual < semigroup::ORBIT_SUCCESS
                    && block <= CLASSIFY_TOL
                    && y_norm < 1.0 - CLASSIFY_TOL
                {
                    return tag(CandidateTag::Q0P8Form, ev);
                }
            }
            Err(err) => {
                ev.degraded = true;
                ev.degraded_reason = Some(err.to_string());
            }
        }
    }
    if norm >= 1.0 - CLASSIFY_TOL && e.canonical_class == CanonicalClass::P0 && ev.q_index != Some(1) {
        ev.ext0_excluded = true;
    }
    tag(CandidateTag::Other, ev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{adunitary, choi_matrix, s0_matrix, transpose_matrix};
    use crate::positivity::DEFAULT_BUDGET;

    #[test]
    fn zero_map_has_no_active_pairs() {
        let a = active_pairs(&MapMatrix::zero(), ACTIVE_TOL, 50_000, 1).unwrap();
        assert!(a.is_empty());
        assert_eq!(a.stop, SearchStop::Stalled);
    }

    #[test]
    fn identity_pairs_are_orthogonal_states() {
        let a = active_pairs(&MapMatrix::identity(), ACTIVE_TOL, 100_000, 2).unwrap();
        assert!(!a.is_empty());
        for p in &a.pairs {
            let overlap = p.p.ket.dotc(&p.q.ket).norm_sqr();
            assert!(overlap < 1e-6);
            assert!((pair_value(&MapMatrix::identity(), &p.m, &p.n) - p.value).abs() < 1e-10);
        }
    }

    #[test]
    fn angles_round_trip() {
        let s = PureState::from_angles(&[0.3, 1.2, 0.4, -2.0]);
        let t = PureState::from_angles(&angles_of(&s.ket));
        assert!((s.bloch - t.bloch).norm() < 1e-12);
    }

    #[test]
    fn tangents_are_orthogonal_to_state() {
        let s = PureState::from_angles(&[0.7, 0.3, 1.0, 2.0]);
        for t in tangents(&s.ket) {
            // d/dt |n(t)|² = 0 on the sphere of pure states.
            assert!(t.dot(&s.bloch).abs() < 1e-12);
            assert!(t.norm() > 0.1);
        }
    }

    #[test]
    fn csv_has_sixteen_columns() {
        let a = active_pairs(&choi_matrix(0.0), ACTIVE_TOL, 50_000, 3).unwrap();
        assert!(!a.is_empty());
        for line in a.to_csv().lines() {
            assert_eq!(line.split(',').count(), 16);
        }
    }

    #[test]
    fn zero_is_not_extreme() {
        let r = extreme_in_lambda(&MapMatrix::zero(), ACTIVE_TOL, DEFAULT_BUDGET, 0).unwrap();
        assert_eq!(r.verdict, ExtremalityVerdict::NotExtreme);
        assert_eq!(r.basis, ExtremalityBasis::NormScreen);
    }

    #[test]
    fn rejects_non_positive() {
        let x = MapMatrix::identity() * 1.3;
        assert!(matches!(
            extreme_in_lambda(&x, ACTIVE_TOL, DEFAULT_BUDGET, 0),
            Err(ExtremalityError::NotPositive { .. })
        ));
    }

    #[test]
    fn catalog_tags() {
        let t = classify_candidate(&transpose_matrix(), DEFAULT_BUDGET, 0).unwrap();
        assert_eq!(t.tag, CandidateTag::JordanIso);
        let s = classify_candidate(&s0_matrix(), DEFAULT_BUDGET, 0).unwrap();
        assert_eq!(s.tag, CandidateTag::Q0P8Form);
        assert!((s.evidence.reduced_y_norm.unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        let c = classify_candidate(&choi_matrix(0.25), DEFAULT_BUDGET, 0).unwrap();
        assert_eq!(c.tag, CandidateTag::StronglyErgodicHalf);
        assert!(!c.evidence.ext0_excluded);
        let u = classify_candidate(&adunitary(5), DEFAULT_BUDGET, 0).unwrap();
        assert_eq!(u.tag, CandidateTag::JordanIso);
    }

    #[test]
    fn half_of_p2_is_excluded() {
        let x = MapMatrix::new(CanonicalClass::P2.projector());
        let c = classify_candidate(&x, DEFAULT_BUDGET, 0).unwrap();
        assert_eq!(c.tag, CandidateTag::Other);
        assert!(c.evidence.ext0_excluded);
    }
}
