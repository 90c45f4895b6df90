//! Seeded generators of random valid matching conditions.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::graph::MatchingConditions;
use crate::linalg::{self, c, CMatrix};
use crate::subspaces::{build_d0, build_n0};

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Haar-distributed unitary from the QR factorization of a complex Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    if n == 0 {
        return linalg::zeros(0, 0);
    }
    let g = CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im)
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    // fix the phase of each column so the distribution is Haar
    for j in 0..n {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            let mut col = q.column_mut(j);
            col *= phase;
        }
    }
    q
}

/// Random nonzero real in `±[lo, hi]`.
fn signed_magnitude<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let m = rng.random_range(lo..hi);
    if rng.random_bool(0.5) {
        m
    } else {
        -m
    }
}

fn outer_sum(cols: &CMatrix) -> CMatrix {
    cols * cols.adjoint()
}

/// Conditions from a random unitary whose columns are split into three groups
/// spanning `Ran P_D`, `Ran P_N` and `Ran P_R`; `Lambda = V diag(d) V*` on `Ran P_R`
/// with nonzero real `d`.
pub fn random_conditions<R: Rng + ?Sized>(num_edges: usize, rng: &mut R) -> MatchingConditions {
    let n = 2 * num_edges;
    let u = random_unitary(n, rng);
    let d_d = rng.random_range(0..=n);
    let d_n = rng.random_range(0..=n - d_d);
    let d_r = n - d_d - d_n;
    conditions_from_split(&u, d_d, d_n, d_r, rng)
}

fn conditions_from_split<R: Rng + ?Sized>(
    u: &CMatrix,
    d_d: usize,
    d_n: usize,
    d_r: usize,
    rng: &mut R,
) -> MatchingConditions {
    let n = u.nrows();
    let cols_d = u.columns(0, d_d).into_owned();
    let cols_n = u.columns(d_d, d_n).into_owned();
    let cols_r = u.columns(d_d + d_n, d_r).into_owned();
    let v = &cols_r * random_unitary(d_r, rng);
    let spectrum: Vec<f64> = (0..d_r).map(|_| signed_magnitude(rng, 0.2, 2.0)).collect();
    let lambda = if d_r > 0 {
        &v * linalg::diag(&spectrum) * v.adjoint()
    } else {
        linalg::zeros(n, n)
    };
    MatchingConditions::from_parts(
        outer_sum(&cols_d),
        outer_sum(&cols_n),
        outer_sum(&cols_r),
        linalg::hermitian_part(&lambda),
    )
}

/// Conditions built edge by edge from interval blocks (some of them resonant,
/// such as Neumann–Neumann or Robin(g)–Robin(-g)), then conjugated by a random
/// unitary that preserves `D0` and `N0`. Such conditions have exotic modes far
/// more often than [`random_conditions`].
pub fn random_resonant_conditions<R: Rng + ?Sized>(
    num_edges: usize,
    rng: &mut R,
) -> MatchingConditions {
    let n = 2 * num_edges;
    let mut p_d = linalg::zeros(n, n);
    let mut p_n = linalg::zeros(n, n);
    let mut p_r = linalg::zeros(n, n);
    let mut lambda = linalg::zeros(n, n);
    for e in 0..num_edges {
        let (a, b) = (2 * e, 2 * e + 1);
        match rng.random_range(0..5) {
            0 => {
                p_n[(a, a)] = c(1.0);
                p_n[(b, b)] = c(1.0);
            }
            1 => {
                let g = signed_magnitude(rng, 0.2, 2.0);
                p_r[(a, a)] = c(1.0);
                p_r[(b, b)] = c(1.0);
                lambda[(a, a)] = c(g);
                lambda[(b, b)] = c(-g);
            }
            2 => {
                p_d[(a, a)] = c(1.0);
                p_n[(b, b)] = c(1.0);
            }
            3 => {
                p_r[(a, a)] = c(1.0);
                p_n[(b, b)] = c(1.0);
                lambda[(a, a)] = c(signed_magnitude(rng, 0.2, 2.0));
            }
            _ => {
                // Robin on both ends with unrelated strengths
                p_r[(a, a)] = c(1.0);
                p_r[(b, b)] = c(1.0);
                lambda[(a, a)] = c(signed_magnitude(rng, 0.2, 2.0));
                lambda[(b, b)] = c(signed_magnitude(rng, 0.2, 2.0));
            }
        }
    }
    // W = [D0 | N0] diag(U_D, U_N) [D0 | N0]* preserves both subspaces
    let d0 = build_d0(num_edges);
    let n0 = build_n0(num_edges);
    let frame = linalg::hstack(d0.basis(), n0.basis());
    let mut inner = linalg::zeros(n, n);
    inner
        .view_mut((0, 0), (num_edges, num_edges))
        .copy_from(&random_unitary(num_edges, rng));
    inner
        .view_mut((num_edges, num_edges), (num_edges, num_edges))
        .copy_from(&random_unitary(num_edges, rng));
    let w = &frame * inner * frame.adjoint();
    let conj = |m: &CMatrix| linalg::hermitian_part(&(&w * m * w.adjoint()));
    MatchingConditions::from_parts(conj(&p_d), conj(&p_n), conj(&p_r), conj(&lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{validate_conditions, Tolerances};

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = seeded_rng(7);
        for n in 1..7 {
            let u = random_unitary(n, &mut rng);
            assert!(linalg::orthonormality_defect(&u) < 1e-12);
        }
    }

    #[test]
    fn generated_conditions_pass_validation() {
        let mut rng = seeded_rng(42);
        for i in 0..50 {
            let cond = if i % 2 == 0 {
                random_conditions(3, &mut rng)
            } else {
                random_resonant_conditions(3, &mut rng)
            };
            let checked = validate_conditions(
                cond.p_d(),
                cond.p_n(),
                cond.p_r(),
                cond.lambda(),
                &Tolerances::default(),
            )
            .unwrap();
            assert!(checked.defects().worst_projector_defect() < 1e-12);
        }
    }

    #[test]
    fn generator_is_deterministic() {
        let a = random_conditions(2, &mut seeded_rng(3));
        let b = random_conditions(2, &mut seeded_rng(3));
        assert_eq!(a, b);
    }
}
