//! Positivity of `S_x` on pure states.
//!
//! `S_x` is positive iff `tr P S_x(Q) = 1/3 + ⟨m, x n⟩ ≥ 0` for all pure
//! states `P`, `Q` with Bloch vectors `m`, `n`. For fixed `Q` the best `P` is
//! the eigenprojection of the smallest eigenvalue of `S_x(Q)`, so the search
//! runs over `Q` only: a deterministic grid on the four angles of a pure
//! state followed by multi-start coordinate descent.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coherence::{apply_map, bloch_of, traceless_from, tr_re, Hermitian3, MapMatrix};
use crate::linalg::{self, CMat3, CVec3, Vec8, C64};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_BUDGET: usize = 200_000;
pub const MIN_BUDGET: usize = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PositivityError {
    #[error("budget {0} is below the minimum of {MIN_BUDGET} evaluations")]
    BudgetTooSmall(usize),
    #[error("tolerance {0:e} is outside [1e-10, 1e-4]")]
    InvalidTolerance(f64),
    #[error("budget of {budget} evaluations exhausted before the {grid}-point grid pass completed (best so far {partial_value})")]
    BudgetExhausted {
        budget: usize,
        grid: usize,
        partial_value: f64,
        partial: Box<MinExpectation>,
    },
}

/// A unit vector in `C³` with its Bloch vector `(tr λ_k ψψ*)_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureState {
    pub ket: CVec3,
    pub bloch: Vec8,
}

impl PureState {
    /// Normalises and fixes the global phase so that the first nonzero
    /// component is real and positive.
    pub fn from_ket(ket: CVec3) -> Self {
        let n = ket.norm();
        let mut ket = ket / C64::from(n);
        if let Some(z) = ket.iter().find(|z| z.norm() > 1e-12).copied() {
            let phase = z.conj() / C64::from(z.norm());
            ket *= phase;
        }
        let bloch = bloch_of(&(ket * ket.adjoint()));
        Self { ket, bloch }
    }

    /// `(cos θ1, sin θ1 cos θ2 e^{iφ1}, sin θ1 sin θ2 e^{iφ2})`.
    pub fn from_angles(angles: &[f64; 4]) -> Self {
        let [t1, t2, p1, p2] = *angles;
        let ket = CVec3::new(
            C64::from(t1.cos()),
            C64::from_polar(t1.sin() * t2.cos(), p1),
            C64::from_polar(t1.sin() * t2.sin(), p2),
        );
        Self::from_ket(ket)
    }

    pub fn projector(&self) -> Hermitian3 {
        Hermitian3::projector(&self.ket)
    }
}

impl Serialize for PureState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            ket: [[f64; 2]; 3],
            bloch: [f64; 8],
        }
        let mut bloch = [0.0; 8];
        bloch.copy_from_slice(self.bloch.as_slice());
        Repr {
            ket: [
                [self.ket[0].re, self.ket[0].im],
                [self.ket[1].re, self.ket[1].im],
                [self.ket[2].re, self.ket[2].im],
            ],
            bloch,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PureState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            ket: [[f64; 2]; 3],
        }
        let r = Repr::deserialize(d)?;
        let ket = CVec3::from_fn(|i, _| C64::new(r.ket[i][0], r.ket[i][1]));
        if !(ket.norm() > 0.0) {
            return Err(serde::de::Error::custom("ket must be nonzero"));
        }
        Ok(PureState::from_ket(ket))
    }
}

/// `tr P S_x(Q)` computed from the matrices themselves.
pub fn expectation(x: &MapMatrix, p: &PureState, q: &PureState) -> f64 {
    let image = apply_map(x, &q.projector());
    tr_re(p.projector().matrix(), image.matrix())
}

/// `1/3 + ⟨m, x n⟩`.
pub fn pair_value(x: &MapMatrix, m: &Vec8, n: &Vec8) -> f64 {
    1.0 / 3.0 + m.dot(&(x.matrix() * n))
}

/// `S_x(Q)` for a pure state with Bloch vector `n`.
pub(crate) fn image_of_pure(x: &MapMatrix, n: &Vec8) -> CMat3 {
    CMat3::identity() * C64::from(1.0 / 3.0) + traceless_from(&(x.matrix() * n))
}

/// Smallest eigenvalue of `S_x(Q)` for `Q` given by angles.
fn objective(x: &MapMatrix, angles: &[f64; 4]) -> f64 {
    let q = PureState::from_angles(angles);
    linalg::hermitian_min_eigenvalue(&image_of_pure(x, &q.bloch))
}

/// Result of the pure-state minimisation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinExpectation {
    pub value: f64,
    pub p: PureState,
    pub q: PureState,
    pub evaluations: usize,
    #[serde(skip)]
    pub angles: [f64; 4],
}

impl MinExpectation {
    fn at(x: &MapMatrix, angles: [f64; 4], evaluations: usize) -> Self {
        let q = PureState::from_angles(&angles);
        let (vals, vecs) = linalg::hermitian_eigen(&image_of_pure(x, &q.bloch));
        Self {
            value: vals[0],
            p: PureState::from_ket(vecs[0]),
            q,
            evaluations,
            angles,
        }
    }
}

/// Knobs of the pure-state search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams {
    /// Grid points per angle.
    pub grid_points: usize,
    /// Number of local refinements.
    pub starts: usize,
    /// How many of the starts are seeded random points rather than the best
    /// grid points.
    pub random_starts: usize,
    /// Step-halving rounds of coordinate descent.
    pub rounds: usize,
    /// Stop as soon as a value below this is found.
    pub stop_below: Option<f64>,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            grid_points: 12,
            starts: 64,
            random_starts: 16,
            rounds: 40,
            stop_below: None,
        }
    }
}

impl SearchParams {
    pub fn grid_size(&self) -> usize {
        self.grid_points.pow(4)
    }
}

fn grid_angles(g: usize, idx: usize) -> [f64; 4] {
    let theta = |i: usize| FRAC_PI_2 * i as f64 / (g - 1) as f64;
    let phi = |i: usize| 2.0 * PI * i as f64 / g as f64;
    let (i0, r) = (idx / (g * g * g), idx % (g * g * g));
    let (i1, r) = (r / (g * g), r % (g * g));
    let (i2, i3) = (r / g, r % g);
    [theta(i0), theta(i1), phi(i2), phi(i3)]
}

fn lex_cmp(a: &[f64; 4], b: &[f64; 4]) -> std::cmp::Ordering {
    for k in 0..4 {
        let o = a[k].total_cmp(&b[k]);
        if o != std::cmp::Ordering::Equal {
            return o;
        }
    }
    std::cmp::Ordering::Equal
}

/// Coordinate descent with step halving; returns (value, angles, evaluations).
pub(crate) fn coordinate_descent<F>(
    f: &F,
    start: [f64; 4],
    initial_step: f64,
    rounds: usize,
    cap: usize,
    floor: Option<f64>,
) -> (f64, [f64; 4], usize)
where
    F: Fn(&[f64; 4]) -> f64,
{
    let mut best = start;
    let mut value = f(&best);
    let mut evals = 1;
    let mut h = initial_step;
    'outer: for _ in 0..rounds {
        for k in 0..4 {
            for dir in [1.0, -1.0] {
                if evals >= cap {
                    break 'outer;
                }
                let mut trial = best;
                trial[k] += dir * h;
                let v = f(&trial);
                evals += 1;
                if v < value {
                    value = v;
                    best = trial;
                    break;
                }
            }
            if floor.is_some_and(|fl| value < fl) {
                break 'outer;
            }
        }
        h *= 0.5;
    }
    (value, best, evals)
}

/// Smallest `tr P S_x(Q)` found over pure states, with the minimising pair.
pub fn min_expectation(x: &MapMatrix, budget: usize, seed: u64) -> Result<MinExpectation, PositivityError> {
    min_expectation_with(x, budget, seed, &SearchParams::default())
}

pub fn min_expectation_with(
    x: &MapMatrix,
    budget: usize,
    seed: u64,
    params: &SearchParams,
) -> Result<MinExpectation, PositivityError> {
    if budget < MIN_BUDGET {
        return Err(PositivityError::BudgetTooSmall(budget));
    }
    let g = params.grid_points.max(2);
    let grid = g.pow(4);
    let evaluated = grid.min(budget);
    let values: Vec<f64> = (0..evaluated)
        .into_par_iter()
        .map(|idx| objective(x, &grid_angles(g, idx)))
        .collect();
    let mut order: Vec<usize> = (0..evaluated).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let best_grid = MinExpectation::at(x, grid_angles(g, order[0]), evaluated);
    if evaluated < grid {
        return Err(PositivityError::BudgetExhausted {
            budget,
            grid,
            partial_value: best_grid.value,
            partial: Box::new(best_grid),
        });
    }
    if params.stop_below.is_some_and(|s| best_grid.value < s) {
        return Ok(best_grid);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_grid_starts = params.starts.saturating_sub(params.random_starts).min(grid);
    let mut starts: Vec<[f64; 4]> = order[..n_grid_starts].iter().map(|&i| grid_angles(g, i)).collect();
    for _ in 0..params.starts - n_grid_starts {
        starts.push([
            rng.random_range(0.0..FRAC_PI_2),
            rng.random_range(0.0..FRAC_PI_2),
            rng.random_range(0.0..2.0 * PI),
            rng.random_range(0.0..2.0 * PI),
        ]);
    }
    if starts.is_empty() {
        return Ok(best_grid);
    }
    let cap = (budget - grid) / starts.len();
    let step = FRAC_PI_2 / (g - 1) as f64;
    let f = |a: &[f64; 4]| objective(x, a);
    let results: Vec<(f64, [f64; 4], usize)> = starts
        .par_iter()
        .map(|s| coordinate_descent(&f, *s, step, params.rounds, cap.max(1), params.stop_below))
        .collect();
    let evaluations = grid + results.iter().map(|r| r.2).sum::<usize>();
    let (value, angles, _) = results
        .iter()
        .copied()
        .chain(std::iter::once((best_grid.value, best_grid.angles, 0)))
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| lex_cmp(&a.1, &b.1)))
        .expect("nonempty");
    let mut out = MinExpectation::at(x, angles, evaluations);
    // The eigen-solve at the winning point is the reported value.
    debug_assert!((out.value - value).abs() < 1e-12);
    out.value = out.value.min(value);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    CertifiedPositive,
    NumericallyPositive,
    NotPositive,
}

/// How the verdict was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// `‖x‖ ≤ 1/2`.
    HalfBall,
    /// `‖x‖ > 1 + tol`, outside the unit ball.
    NormBound,
    /// Pure-state search.
    Search,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub p: PureState,
    pub q: PureState,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivityReport {
    pub verdict: Verdict,
    /// Smallest `tr P S_x(Q)` found; for the half-ball certificate, the lower
    /// bound `1/3 - (2/3)‖x‖`.
    pub min_value: f64,
    pub witness: Option<Witness>,
    pub evaluations: usize,
    pub seed: u64,
    pub basis: Basis,
    pub operator_norm: f64,
    pub tol: f64,
    pub budget: usize,
}

impl PositivityReport {
    pub fn is_positive(&self) -> bool {
        self.verdict != Verdict::NotPositive
    }
}

pub fn is_positive(x: &MapMatrix, tol: f64, budget: usize, seed: u64) -> Result<PositivityReport, PositivityError> {
    is_positive_with(x, tol, budget, seed, &SearchParams::default())
}

pub fn is_positive_with(
    x: &MapMatrix,
    tol: f64,
    budget: usize,
    seed: u64,
    params: &SearchParams,
) -> Result<PositivityReport, PositivityError> {
    if !(1e-10..=1e-4).contains(&tol) {
        return Err(PositivityError::InvalidTolerance(tol));
    }
    if budget < MIN_BUDGET {
        return Err(PositivityError::BudgetTooSmall(budget));
    }
    let norm = x.operator_norm();
    let mut report = PositivityReport {
        verdict: Verdict::CertifiedPositive,
        min_value: 1.0 / 3.0 - 2.0 / 3.0 * norm,
        witness: None,
        evaluations: 0,
        seed,
        basis: Basis::HalfBall,
        operator_norm: norm,
        tol,
        budget,
    };
    if norm <= 0.5 {
        return Ok(report);
    }
    let mut search = *params;
    search.stop_below = Some(-tol);
    if norm > 1.0 + tol {
        // Outside the unit ball: not positive regardless; the search only
        // supplies a witness when it can find one quickly.
        report.verdict = Verdict::NotPositive;
        report.basis = Basis::NormBound;
        let found = match min_expectation_with(x, budget, seed, &search) {
            Ok(found) => found,
            Err(PositivityError::BudgetExhausted { partial, .. }) => *partial,
            Err(e) => return Err(e),
        };
        report.min_value = found.value;
        report.evaluations = found.evaluations;
        if found.value < -tol {
            report.witness = Some(Witness { p: found.p, q: found.q });
        }
        return Ok(report);
    }
    let found = min_expectation_with(x, budget, seed, &search)?;
    report.basis = Basis::Search;
    report.min_value = found.value;
    report.evaluations = found.evaluations;
    if found.value < -tol {
        report.verdict = Verdict::NotPositive;
        report.witness = Some(Witness { p: found.p, q: found.q });
    } else {
        report.verdict = Verdict::NumericallyPositive;
    }
    Ok(report)
}

/// Smallest eigenvalue of `S_x(A²) - S_x(A)²`; nonnegative for positive `x`.
pub fn kadison_schwarz_violation(x: &MapMatrix, a: &Hermitian3) -> f64 {
    let lhs = apply_map(x, &a.square());
    let img = apply_map(x, a);
    (lhs - img.square()).min_eigenvalue()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{choi_matrix, transpose_matrix};
    use crate::linalg::Mat8;

    #[test]
    fn pure_state_invariants() {
        let s = PureState::from_angles(&[0.4, 1.1, 2.0, -0.7]);
        assert!((s.ket.norm() - 1.0).abs() < 1e-12);
        assert!((s.bloch.norm() - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!(s.ket[0].im == 0.0 && s.ket[0].re > 0.0);
        let e3 = PureState::from_angles(&[FRAC_PI_2, FRAC_PI_2, 0.0, 1.3]);
        assert!(e3.ket[2].im.abs() < 1e-15 && e3.ket[2].re > 0.0);
    }

    #[test]
    fn expectation_matches_bloch_formula() {
        let x = choi_matrix(0.3);
        let p = PureState::from_angles(&[0.2, 0.9, 1.0, 2.5]);
        let q = PureState::from_angles(&[1.3, 0.1, -0.4, 0.3]);
        let direct = expectation(&x, &p, &q);
        assert!((direct - pair_value(&x, &p.bloch, &q.bloch)).abs() < 1e-14);
    }

    #[test]
    fn identity_min_is_zero() {
        let r = min_expectation(&MapMatrix::identity(), DEFAULT_BUDGET, 1).unwrap();
        assert!(r.value.abs() < 1e-12);
        assert!(r.value >= -1e-14);
        assert!(expectation(&MapMatrix::identity(), &r.p, &r.q).abs() < 1e-12);
    }

    #[test]
    fn zero_map_min_is_one_third() {
        let r = min_expectation(&MapMatrix::zero(), DEFAULT_BUDGET, 1).unwrap();
        assert!((r.value - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn small_budget_errors_with_partial() {
        assert!(matches!(
            min_expectation(&MapMatrix::identity(), 10, 0),
            Err(PositivityError::BudgetTooSmall(10))
        ));
        match min_expectation(&MapMatrix::identity(), 5000, 0) {
            Err(PositivityError::BudgetExhausted { partial, .. }) => assert_eq!(partial.evaluations, 5000),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tolerance_range_enforced() {
        assert!(is_positive(&MapMatrix::identity(), 1e-12, DEFAULT_BUDGET, 0).is_err());
        assert!(is_positive(&MapMatrix::identity(), 1e-3, DEFAULT_BUDGET, 0).is_err());
    }

    #[test]
    fn half_ball_is_certified() {
        let x = MapMatrix::new(Mat8::from_fn(|i, j| ((i * 7 + j * 3) as f64).sin()));
        let x = x * (0.4 / x.operator_norm());
        let r = is_positive(&x, DEFAULT_TOL, DEFAULT_BUDGET, 0).unwrap();
        assert_eq!(r.verdict, Verdict::CertifiedPositive);
        assert_eq!(r.evaluations, 0);
    }

    #[test]
    fn transpose_is_numerically_positive() {
        let r = is_positive(&transpose_matrix(), DEFAULT_TOL, DEFAULT_BUDGET, 3).unwrap();
        assert_eq!(r.verdict, Verdict::NumericallyPositive);
        assert!(r.min_value.abs() < 1e-10);
    }

    #[test]
    fn scaled_identity_violates_norm_bound() {
        let r = is_positive(&(MapMatrix::identity() * 1.2), DEFAULT_TOL, DEFAULT_BUDGET, 0).unwrap();
        assert_eq!(r.verdict, Verdict::NotPositive);
        assert_eq!(r.basis, Basis::NormBound);
        let w = r.witness.expect("1.2·1 has pure-state witnesses");
        assert!(expectation(&(MapMatrix::identity() * 1.2), &w.p, &w.q) < -DEFAULT_TOL);
    }

    #[test]
    fn kadison_schwarz_examples() {
        let a = Hermitian3::basis_element(3);
        assert!(kadison_schwarz_violation(&MapMatrix::identity(), &a).abs() < 1e-14);
        let v = kadison_schwarz_violation(&(MapMatrix::identity() * 1.5), &a);
        assert!((v + 13.0 / 24.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn deterministic_for_seed() {
        let x = choi_matrix(0.2) * 1.05;
        let a = is_positive(&x, DEFAULT_TOL, DEFAULT_BUDGET, 11).unwrap();
        let b = is_positive(&x, DEFAULT_TOL, DEFAULT_BUDGET, 11).unwrap();
        assert_eq!(a, b);
    }
}
