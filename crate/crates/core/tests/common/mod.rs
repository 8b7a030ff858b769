//! Random inputs shared by the integration suites.
#![allow(dead_code)]

use nalgebra::{Matrix2, Vector3};
use posmap::catalog::haar_unitary;
use posmap::coherence::{Hermitian3, MapMatrix};
use posmap::linalg::{CMat3, Mat8, C64};
use posmap::semigroup::{adjoint_rep, idempotent_of, CanonicalClass, PERIPHERAL_TOL};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn random_hermitian(rng: &mut ChaCha8Rng) -> Hermitian3 {
    let g = CMat3::from_fn(|_, _| C64::new(gaussian(rng), gaussian(rng)));
    Hermitian3::new((g + g.adjoint()) * C64::from(0.5)).unwrap()
}

pub fn random_mat8(rng: &mut ChaCha8Rng) -> Mat8 {
    Mat8::from_fn(|_, _| gaussian(rng))
}

/// A Gaussian matrix rescaled to operator norm `norm`.
pub fn random_with_norm(rng: &mut ChaCha8Rng, norm: f64) -> MapMatrix {
    let m = random_mat8(rng);
    let s = m.singular_values().max();
    MapMatrix::new(m * (norm / s))
}

pub fn random_ad(rng: &mut ChaCha8Rng) -> Mat8 {
    adjoint_rep(&haar_unitary(rng)).unwrap()
}

fn phase(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

/// A unitary whose adjoint action maps the range of the canonical projector
/// of rank `j` onto itself.
pub fn stabilizer_unitary(rng: &mut ChaCha8Rng, j: usize) -> CMat3 {
    let mut angle = || rng.random_range(0.0..std::f64::consts::TAU);
    match j {
        0 => haar_unitary(rng),
        1 | 4 => {
            // U(2) on the first two coordinates, a compensating phase on the third.
            let h = haar_unitary(rng);
            let m = Matrix2::new(h[(0, 0)], h[(0, 1)], h[(1, 0)], h[(1, 1)]);
            let (q, _) = (m.qr().q(), ());
            let det = q.determinant();
            let mut u = CMat3::zeros();
            for a in 0..2 {
                for b in 0..2 {
                    u[(a, b)] = q[(a, b)];
                }
            }
            u[(2, 2)] = det.conj() / C64::from(det.norm());
            u
        }
        2 => {
            let (a, b) = (angle(), angle());
            CMat3::from_diagonal(&Vector3::new(phase(a), phase(b), phase(-a - b)))
        }
        3 => {
            // Real rotations of the 2x2 block keep it real symmetric.
            let (t, p) = (angle(), angle());
            let mut u = CMat3::zeros();
            u[(0, 0)] = C64::from(t.cos());
            u[(0, 1)] = C64::from(-t.sin());
            u[(1, 0)] = C64::from(t.sin());
            u[(1, 1)] = C64::from(t.cos());
            u *= phase(p);
            u[(2, 2)] = phase(-2.0 * p);
            u
        }
        _ => panic!("no stabilizer sampler for rank {j}"),
    }
}

/// A contraction of norm at most `bound` supported on the complement of `p`.
pub fn contraction_off(rng: &mut ChaCha8Rng, p: &Mat8, bound: f64) -> Mat8 {
    let perp = Mat8::identity() - p;
    let c = perp * random_mat8(rng) * perp;
    let s = c.singular_values().max();
    let target = rng.random_range(0.1..bound);
    c * (target / s)
}

fn permutation(perm: [usize; 3]) -> CMat3 {
    let mut u = CMat3::zeros();
    for (col, &row) in perm.iter().enumerate() {
        u[(row, col)] = C64::from(1.0);
    }
    u
}

const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [1, 0, 2], [0, 2, 1], [2, 1, 0], [1, 2, 0], [2, 0, 1]];

/// Coordinate permutations whose adjoint action preserves the range of `p_j`.
fn stabilizing_permutations(j: usize) -> &'static [[usize; 3]] {
    match j {
        0 | 2 => &PERMUTATIONS,
        _ => &PERMUTATIONS[..2],
    }
}

fn random_stabilizer(rng: &mut ChaCha8Rng, j: usize) -> Mat8 {
    let perms = stabilizing_permutations(j);
    let p = permutation(perms[rng.random_range(0..perms.len())]);
    adjoint_rep(&(p * stabilizer_unitary(rng, j))).unwrap()
}

/// `x = G t σ (p_k + c) σᵗ s Gᵗ` with `k = i + j`, where `t, s` preserve
/// the range of `p_j`, `σ` is a coordinate permutation with `σ p_k σᵗ ⊇ p_j`
/// and `c` is a contraction on the complement of `p_k`. Then `e_x = G p_j Gᵗ`
/// and `y_x` has exactly `i` unit singular values; candidates that happen to
/// violate this (because `t` and `s` also preserve `σ p_k σᵗ`) are redrawn.
pub struct Planted {
    pub x: MapMatrix,
    pub i: usize,
    pub j: usize,
    pub g: Mat8,
}

pub fn planted_reduction(rng: &mut ChaCha8Rng, i: usize, j: usize) -> Planted {
    let pj = CanonicalClass::from_rank(j).unwrap().projector();
    let pk = CanonicalClass::from_rank(i + j).unwrap().projector();
    let sigmas: Vec<Mat8> = PERMUTATIONS
        .iter()
        .map(|&p| adjoint_rep(&permutation(p)).unwrap())
        .filter(|s| ((Mat8::identity() - s * pk * s.transpose()) * pj).norm() < 1e-12)
        .collect();
    for _ in 0..100 {
        let sigma = sigmas[rng.random_range(0..sigmas.len())];
        let t = random_stabilizer(rng, j);
        let s = random_stabilizer(rng, j);
        let c = contraction_off(rng, &pk, 0.8);
        let core = t * sigma * (pk + c) * sigma.transpose() * s;
        let Ok(e) = idempotent_of(&MapMatrix::new(core), PERIPHERAL_TOL) else {
            continue;
        };
        let y = (Mat8::identity() - pj) * core * (Mat8::identity() - pj);
        let units = y.singular_values().iter().filter(|&&v| v > 1.0 - 1e-6).count();
        if e.rank != j || (e.e - pj).norm() > 1e-8 || units != i {
            continue;
        }
        let g = random_ad(rng);
        return Planted {
            x: MapMatrix::new(g * core * g.transpose()),
            i,
            j,
            g,
        };
    }
    panic!("could not plant an element of Q_{i}(p_{j})");
}

/// Index pairs of the reduction theorem, `1 <= i <= 4`, `i + j <= 5`, that
/// can be planted. `j = 4` needs `p4 ⊂ p5`, which fails, and `Q_1(p3)` is
/// empty: the only conjugate of `p4` containing `p3` is `p4` itself.
pub const REDUCIBLE_INDICES: [(usize, usize); 11] = [
    (1, 0),
    (2, 0),
    (3, 0),
    (4, 0),
    (1, 1),
    (2, 1),
    (3, 1),
    (4, 1),
    (1, 2),
    (2, 2),
    (3, 2),
];

pub fn random_indices(rng: &mut ChaCha8Rng) -> (usize, usize) {
    REDUCIBLE_INDICES[rng.random_range(0..REDUCIBLE_INDICES.len())]
}
