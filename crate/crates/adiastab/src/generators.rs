//! Builtin family generators used by the CLI and the test suites.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::graded::{GradedFamily, Grading, Schedule, SplineSchedule};
use crate::operator::{op_norm, CMatrix, HermitianMatrix, C64};

/// Split a full Hermitian matrix into its block-diagonal and
/// block-antidiagonal parts with respect to the grading.
pub fn split_blocks(grading: &Grading, a: &HermitianMatrix) -> (HermitianMatrix, HermitianMatrix) {
    let ps = grading.p_s();
    let psbar = grading.p_sbar();
    let h = HermitianMatrix::from_hermitian_parts(
        ps.as_matrix() * a.matrix() * ps.as_matrix()
            + psbar.as_matrix() * a.matrix() * psbar.as_matrix(),
    );
    let d = HermitianMatrix::from_hermitian_parts(
        ps.as_matrix() * a.matrix() * psbar.as_matrix()
            + psbar.as_matrix() * a.matrix() * ps.as_matrix(),
    );
    (h, d)
}

/// Linear family between two full Hamiltonians, re-blocked along the grading.
pub fn linear_family(
    grading: Grading,
    a0: &HermitianMatrix,
    a1: &HermitianMatrix,
) -> Result<GradedFamily> {
    let (h0, d0) = split_blocks(&grading, a0);
    let (h1, d1) = split_blocks(&grading, a1);
    GradedFamily::new(
        grading,
        Schedule::Linear { m0: h0, m1: h1 },
        Schedule::Linear { m0: d0, m1: d1 },
    )
}

/// Constant family from a single full Hamiltonian.
pub fn static_family(grading: Grading, a: &HermitianMatrix) -> Result<GradedFamily> {
    let (h, d) = split_blocks(&grading, a);
    GradedFamily::new(grading, Schedule::constant(h), Schedule::constant(d))
}

/// Constant diagonal family with `Δ ≡ 0`.
pub fn diagonal_family(diag: &[f64], s_indices: &[usize]) -> Result<GradedFamily> {
    let n = diag.len();
    let mat = CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            C64::new(diag[i], 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let h = HermitianMatrix::new(mat)?;
    let grading = Grading::new(n, s_indices.to_vec())?;
    GradedFamily::new(
        grading,
        Schedule::constant(h),
        Schedule::constant(HermitianMatrix::zeros(n)),
    )
}

fn dw_h(asymmetry: f64) -> HermitianMatrix {
    HermitianMatrix::from_real(&[
        &[0.0, 0.0, 0.0, 0.0],
        &[0.0, 1.0, 0.0, 0.0],
        &[0.0, 0.0, asymmetry, 0.0],
        &[0.0, 0.0, 0.0, 1.0 + asymmetry],
    ])
    .expect("diagonal matrix is Hermitian")
}

fn coupling_02(value: f64) -> HermitianMatrix {
    let mut mat = CMatrix::zeros(4, 4);
    mat[(0, 2)] = C64::new(value, 0.0);
    mat[(2, 0)] = C64::new(value, 0.0);
    HermitianMatrix::from_hermitian_parts(mat)
}

/// Canonical 4-level "double well": `S = {0,1}`, `H_S = diag(0,1)`,
/// `H_S̄ = diag(a, 1+a)` fixed in `s`, and a single symmetric coupling
/// `-δ(1-s)` between indices 0 and 2. The ground state spreads across both
/// blocks, so the Cheeger ratio stays of order the well offset.
pub fn double_well(delta: f64, asymmetry: f64) -> Result<GradedFamily> {
    let grading = Grading::new(4, vec![0, 1])?;
    GradedFamily::new(
        grading,
        Schedule::constant(dw_h(asymmetry)),
        Schedule::Linear {
            m0: coupling_02(-delta),
            m1: HermitianMatrix::zeros(4),
        },
    )
}

/// Double well frozen at its `s = 0` coupling (`Δ` constant `-δ`), for the
/// time-independent theorem.
pub fn double_well_static(delta: f64, asymmetry: f64) -> Result<GradedFamily> {
    let grading = Grading::new(4, vec![0, 1])?;
    GradedFamily::new(
        grading,
        Schedule::constant(dw_h(asymmetry)),
        Schedule::constant(coupling_02(-delta)),
    )
}

/// Double well whose `S` block rotates: `H_S(s) = G(θ) diag(0,1) G(θ)†` with
/// `θ = rate·s`, tabulated on a fine spline so the schedule carries exact
/// (spline) derivatives. `H_S̄ = diag(0.2, 1.2)` and `Δ` is a constant `-δ`
/// coupling between indices 0 and 2. The rotation makes `Ṗ_μ ≠ 0`.
pub fn rotating_block(delta: f64, rate: f64) -> Result<GradedFamily> {
    let grading = Grading::new(4, vec![0, 1])?;
    let knots: Vec<f64> = (0..=48).map(|k| k as f64 / 48.0).collect();
    let values: Vec<HermitianMatrix> = knots
        .iter()
        .map(|&s| {
            let th = rate * s;
            let (c, sn) = (th.cos(), th.sin());
            // rotated diag(0,1) inside S, i.e. the rank-1 projector onto
            // (-sin, cos) scaled by the upper level
            HermitianMatrix::from_real(&[
                &[sn * sn, -sn * c, 0.0, 0.0],
                &[-sn * c, c * c, 0.0, 0.0],
                &[0.0, 0.0, 0.2, 0.0],
                &[0.0, 0.0, 0.0, 1.2],
            ])
            .expect("rotation block is symmetric")
        })
        .collect();
    GradedFamily::new(
        grading,
        Schedule::Spline(SplineSchedule::new(knots, values)?),
        Schedule::constant(coupling_02(-delta)),
    )
}

fn random_hermitian_block<R: Rng>(
    rng: &mut R,
    dim: usize,
    indices: &[usize],
    scale: f64,
    real_nonpositive_offdiag: bool,
) -> HermitianMatrix {
    let normal = Normal::new(0.0, scale).expect("valid std dev");
    let mut mat = CMatrix::zeros(dim, dim);
    for (a, &i) in indices.iter().enumerate() {
        for &j in indices.iter().skip(a) {
            if i == j {
                mat[(i, i)] = C64::new(normal.sample(rng), 0.0);
            } else if real_nonpositive_offdiag {
                let v = -normal.sample(rng).abs();
                mat[(i, j)] = C64::new(v, 0.0);
                mat[(j, i)] = C64::new(v, 0.0);
            } else {
                let z = C64::new(normal.sample(rng), normal.sample(rng));
                mat[(i, j)] = z;
                mat[(j, i)] = z.conj();
            }
        }
    }
    HermitianMatrix::from_hermitian_parts(mat)
}

fn random_coupling<R: Rng>(
    rng: &mut R,
    grading: &Grading,
    scale: f64,
    real_nonpositive: bool,
) -> HermitianMatrix {
    let normal = Normal::new(0.0, scale).expect("valid std dev");
    let dim = grading.dim();
    let mut mat = CMatrix::zeros(dim, dim);
    for &i in grading.s_indices() {
        for &j in grading.sbar_indices() {
            let z = if real_nonpositive {
                C64::new(-normal.sample(rng).abs(), 0.0)
            } else {
                C64::new(normal.sample(rng), normal.sample(rng))
            };
            mat[(i, j)] = z;
            mat[(j, i)] = z.conj();
        }
    }
    HermitianMatrix::from_hermitian_parts(mat)
}

/// Random linear graded family. Block entries are seeded normal draws; the
/// coupling is rescaled so the realized `c = |Δ|/min{Γ_S, Γ_S̄}` stays near
/// `c_target`, which keeps Assumption 2 satisfiable by construction. With
/// `stoquastic` set, every off-diagonal entry of `A` is real nonpositive.
pub fn random_graded<R: Rng>(
    rng: &mut R,
    dim: usize,
    s_size: usize,
    c_target: f64,
    stoquastic: bool,
) -> Result<GradedFamily> {
    if s_size == 0 || s_size >= dim {
        return Err(Error::InvalidGrading(format!(
            "|S| = {s_size} must satisfy 0 < |S| < {dim}"
        )));
    }
    let s_indices: Vec<usize> = (0..s_size).collect();
    let grading = Grading::new(dim, s_indices)?;

    let block = |rng: &mut R| {
        let h_s = random_hermitian_block(rng, dim, grading.s_indices(), 1.0, stoquastic);
        let h_sbar = random_hermitian_block(rng, dim, grading.sbar_indices(), 1.0, stoquastic);
        &h_s + &h_sbar
    };
    let h0 = block(rng);
    let h1 = block(rng);
    let d0 = random_coupling(rng, &grading, 1.0, stoquastic);
    let d1 = if stoquastic {
        // keep the sign pattern fixed along the schedule
        d0.clone()
    } else {
        random_coupling(rng, &grading, 1.0, stoquastic)
    };

    // realized min local gap over a coarse s sample, for the c rescale
    let h_sched = Schedule::Linear {
        m0: h0.clone(),
        m1: h1.clone(),
    };
    let mut min_gap = f64::INFINITY;
    for k in 0..=4 {
        let s = k as f64 / 4.0;
        let h = h_sched.value(s);
        for part in [grading.s_indices(), grading.sbar_indices()] {
            let loc = crate::spectral::local_spectrum(&h, part, 1e-9);
            min_gap = min_gap.min(loc.gamma);
        }
    }
    let d_norm = op_norm(d0.matrix()).max(op_norm(d1.matrix()));
    let scale = if d_norm > 0.0 && min_gap.is_finite() {
        c_target * min_gap / d_norm
    } else if d_norm > 0.0 {
        c_target / d_norm
    } else {
        0.0
    };
    let d0 = HermitianMatrix::from_hermitian_parts(d0.matrix().scale(scale));
    let d1 = HermitianMatrix::from_hermitian_parts(d1.matrix().scale(scale));

    GradedFamily::new(
        grading,
        h_sched,
        Schedule::Linear { m0: d0, m1: d1 },
    )
}

/// Transverse-field chain on `n ≤ 4` qubits: linear interpolation from
/// `-Σ X_i` to `Σ Z_i Z_{i+1}`, re-blocked along the supplied cut (default:
/// first half of the computational basis).
pub fn transverse_chain(n_qubits: usize, s_indices: Option<Vec<usize>>) -> Result<GradedFamily> {
    if n_qubits == 0 || n_qubits > 4 {
        return Err(Error::Config(format!(
            "transverse-chain supports 1..=4 qubits, got {n_qubits}"
        )));
    }
    let n = 1usize << n_qubits;
    let mut x_sum = DMatrix::<f64>::zeros(n, n);
    for q in 0..n_qubits {
        for b in 0..n {
            x_sum[(b ^ (1 << q), b)] -= 1.0;
        }
    }
    let mut zz = DMatrix::<f64>::zeros(n, n);
    for q in 0..n_qubits.saturating_sub(1) {
        for b in 0..n {
            let s1 = if b & (1 << q) == 0 { 1.0 } else { -1.0 };
            let s2 = if b & (1 << (q + 1)) == 0 { 1.0 } else { -1.0 };
            zz[(b, b)] += s1 * s2;
        }
    }
    let to_herm = |m: &DMatrix<f64>| {
        HermitianMatrix::from_hermitian_parts(CMatrix::from_fn(n, n, |i, j| {
            C64::new(m[(i, j)], 0.0)
        }))
    };
    let a0 = to_herm(&x_sum);
    let a1 = to_herm(&(&zz - &x_sum.scale(0.1))); // keep off-diagonals nonpositive at s=1
    let cut = s_indices.unwrap_or_else(|| (0..n / 2).collect());
    let grading = Grading::new(n, cut)?;
    linear_family(grading, &a0, &a1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn double_well_delta_vanishes_at_one() {
        let fam = double_well(0.05, 0.2).unwrap();
        let b = fam.blocks(1.0).unwrap();
        assert_eq!(op_norm(b.delta.matrix()), 0.0);
    }

    #[test]
    fn random_graded_hits_target_c() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let fam = random_graded(&mut rng, 8, 3, 0.3, false).unwrap();
        let rep = crate::graded::check_assumptions(&fam, &[0.0, 0.5, 1.0]).unwrap();
        for p in &rep.points {
            assert!(p.c < 1.0, "c = {} out of range", p.c);
        }
    }

    #[test]
    fn stoquastic_generator_has_nonpositive_offdiagonals() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let fam = random_graded(&mut rng, 6, 2, 0.2, true).unwrap();
        for s in [0.0, 0.5, 1.0] {
            let b = fam.blocks(s).unwrap();
            for i in 0..6 {
                for j in 0..6 {
                    if i != j {
                        let z = b.a.matrix()[(i, j)];
                        assert!(z.im.abs() < 1e-14);
                        assert!(z.re <= 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn transverse_chain_is_stoquastic() {
        let fam = transverse_chain(3, None).unwrap();
        let b = fam.blocks(0.5).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                if i != j {
                    assert!(b.a.matrix()[(i, j)].re <= 1e-14);
                }
            }
        }
    }

    #[test]
    fn rotating_block_has_moving_ground_projector() {
        let fam = rotating_block(0.05, 1.0).unwrap();
        let d = crate::spectral::projector_derivatives(&fam, 0.5).unwrap();
        assert!(op_norm(&d.p_mu_dot) > 0.1);
    }
}
