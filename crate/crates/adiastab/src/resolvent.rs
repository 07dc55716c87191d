//! Reduced-resolvent calculus: `H'`, `R`, `R_perp`, `L`, the generator
//! correction `F` and its derivative, together with numerical verification of
//! every identity and norm bound they satisfy.

use crate::error::{Error, Result};
use crate::graded::GradedFamily;
use crate::operator::{eigh_unchecked, op_norm, CMatrix, HermitianMatrix, C64};
use crate::spectral::{
    self, local_reduced_resolvent, IneqCheck, SpectralSnapshot,
};

/// `x / g` treating an infinite local gap as a vanishing contribution.
pub(crate) fn over(x: f64, g: f64) -> f64 {
    if g.is_infinite() {
        0.0
    } else {
        x / g
    }
}

/// All resolvent-level operators at one `s`, with enough derivative data to
/// assemble `Fdot P_mu`.
#[derive(Debug, Clone)]
pub struct ResolventBundle {
    pub s: f64,
    pub snap: SpectralSnapshot,
    /// `H' = H + (mu - mubar) P_Sbar`: the S̄ block shifted so both local
    /// ground energies sit at `mu`.
    pub hprime: HermitianMatrix,
    /// Reduced resolvent of `H' - mu I` away from the combined ground space.
    pub r: CMatrix,
    /// Reduced resolvent of `H' + Delta_perp - mu I`, built spectrally on
    /// the complement of `M`.
    pub r_perp: CMatrix,
    /// `L = I + R Delta_perp`.
    pub l: CMatrix,
    pub l_inv: CMatrix,
    /// `1 - |Delta_perp| / min{Gamma_S, Gamma_Sbar}`, in (0, 1].
    pub eta: f64,
    pub mu_dot: f64,
    pub mubar_dot: f64,
    pub p_mu_dot: CMatrix,
    pub p_mubar_dot: CMatrix,
    pub p_mu_ddot: CMatrix,
    pub hprime_dot: CMatrix,
    pub delta_perp_dot: CMatrix,
    pub r_dot: CMatrix,
    /// `F = R_perp Pdot_mu P_mu + P_mu Pdot_mu R_perp`.
    pub f: CMatrix,
    /// Four-term expansion of `(d/ds F) P_mu`.
    pub fdot_pmu: CMatrix,
}

/// `H' := H + (mu - mubar) P_Sbar`.
pub fn h_prime(snap: &SpectralSnapshot) -> HermitianMatrix {
    let h = snap.blocks.h_s.matrix() + snap.blocks.h_sbar.matrix();
    let shift = C64::new(snap.mu - snap.mubar, 0.0);
    HermitianMatrix::from_hermitian_parts(h + snap.grading.p_sbar().as_matrix() * shift)
}

fn block_trace_mean(p: &CMatrix, m: &CMatrix, rank: usize) -> f64 {
    ((p * m).trace().re) / rank.max(1) as f64
}

/// Build the full bundle at `s`.
pub fn build_bundle(fam: &GradedFamily, s: f64) -> Result<ResolventBundle> {
    let snap = spectral::snapshot(fam, s)?;
    let n = fam.dim();
    let hprime = h_prime(&snap);

    // the kernel of H' - mu I must be exactly the combined ground space
    let cluster = fam.tols().cluster(op_norm(hprime.matrix()));
    let found = hprime
        .eigh()
        .values
        .iter()
        .filter(|&&e| (e - snap.mu).abs() <= cluster)
        .count();
    if found != snap.m.rank {
        return Err(Error::ClusterCollision {
            found,
            expected: snap.m.rank,
        });
    }

    let min_gap = snap.min_local_gap();
    let delta_perp_norm = op_norm(snap.delta_perp.matrix());
    let eta = if min_gap.is_infinite() {
        1.0
    } else {
        1.0 - delta_perp_norm / min_gap
    };
    if eta <= 0.0 {
        return Err(Error::PerturbationTooLarge { eta });
    }

    // R from the local spectra: the S part at mu, the S̄ part at mubar
    // (which the H' shift moves to mu). The local helper inverts mu - mu_j,
    // while R inverts e - mu, hence the sign flip.
    let r = -(local_reduced_resolvent(&snap.local_s) + local_reduced_resolvent(&snap.local_sbar));

    let identity = CMatrix::identity(n, n);
    let l = &identity + &r * snap.delta_perp.matrix();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or(Error::PerturbationTooLarge { eta })?;

    let r_perp = r_perp_spectral(&snap, &hprime);

    // derivative data
    let d = fam.derivatives(s);
    let (p_mu_dot, p_mubar_dot) = spectral::first_derivatives(fam, s)?;
    let p_mu_ddot = spectral::p_mu_ddot(fam, s, 1e-4)?;
    let mu_dot = block_trace_mean(snap.p_mu.as_matrix(), d.h_s_dot.matrix(), snap.p_mu.rank);
    let mubar_dot = block_trace_mean(
        snap.p_mubar.as_matrix(),
        d.h_sbar_dot.matrix(),
        snap.p_mubar.rank,
    );
    let hprime_dot = d.h_dot.matrix()
        + snap.grading.p_sbar().as_matrix() * C64::new(mu_dot - mubar_dot, 0.0);

    let m_dot = &p_mu_dot + &p_mubar_dot;
    let m_perp = snap.m_perp.as_matrix();
    let delta = snap.blocks.delta.matrix();
    let delta_dot = d.delta_dot.matrix();
    let delta_perp_dot =
        -(&m_dot) * delta * m_perp + m_perp * delta_dot * m_perp - m_perp * delta * &m_dot;

    let r_dot = -(&m_dot) * &r
        - &r * (&hprime_dot - &identity * C64::new(mu_dot, 0.0)) * &r
        - &r * &m_dot;

    let p_mu = snap.p_mu.as_matrix();
    let f = &r_perp * &p_mu_dot * p_mu + p_mu * &p_mu_dot * &r_perp;

    // Fdot P_mu: differentiate F P_mu = L^{-1} R Pdot_mu P_mu termwise,
    // using Ldot = Rdot Delta_perp + R Ddot_perp and R P_mu = 0
    let delta_perp = snap.delta_perp.matrix();
    let a0 = -(&l_inv)
        * (&r_dot * delta_perp + &r * &delta_perp_dot)
        * &l_inv
        * &r
        * &p_mu_dot
        * p_mu;
    let a1 = &l_inv * &r_dot * &p_mu_dot * p_mu;
    let a2 = &l_inv * &r * &p_mu_ddot * p_mu;
    let a3 = -(p_mu * &p_mu_dot * &l_inv * &r * &p_mu_dot * p_mu);
    let fdot_pmu = a0 + a1 + a2 + a3;

    Ok(ResolventBundle {
        s,
        snap,
        hprime,
        r,
        r_perp,
        l,
        l_inv,
        eta,
        mu_dot,
        mubar_dot,
        p_mu_dot,
        p_mubar_dot,
        p_mu_ddot,
        hprime_dot,
        delta_perp_dot,
        r_dot,
        f,
        fdot_pmu,
    })
}

/// `R_perp` built spectrally: restrict `H' + Delta_perp` to the orthogonal
/// complement of `M` (spanned by the locally excited eigenvectors), invert
/// `e - mu` there, and embed back.
fn r_perp_spectral(snap: &SpectralSnapshot, hprime: &HermitianMatrix) -> CMatrix {
    let n = hprime.dim();
    let k_s = snap.local_s.values.len();
    let k_sbar = snap.local_sbar.values.len();
    let k = (k_s - snap.local_s.ground_rank) + (k_sbar - snap.local_sbar.ground_rank);
    if k == 0 {
        return CMatrix::zeros(n, n);
    }
    let mut w = CMatrix::zeros(n, k);
    let mut col = 0;
    for (loc, range) in [
        (&snap.local_s, snap.local_s.ground_rank..k_s),
        (&snap.local_sbar, snap.local_sbar.ground_rank..k_sbar),
    ] {
        for j in range {
            w.set_column(col, &loc.vectors.column(j));
            col += 1;
        }
    }
    let op = hprime.matrix() + snap.delta_perp.matrix();
    let restricted = w.adjoint() * &op * &w;
    let es = eigh_unchecked(&restricted);
    let mut inv = CMatrix::zeros(k, k);
    for j in 0..k {
        inv[(j, j)] = C64::new(1.0 / (es.values[j] - snap.mu), 0.0);
    }
    &w * &es.vectors * inv * es.vectors.adjoint() * w.adjoint()
}

/// Convenience accessor matching the bundle's stored derivative.
pub fn r_dot(fam: &GradedFamily, s: f64) -> Result<CMatrix> {
    Ok(build_bundle(fam, s)?.r_dot)
}

/// Residual of `[H' + Delta_perp, F] = [Pdot_mu, P_mu]`.
pub fn verify_commutator(bundle: &ResolventBundle) -> f64 {
    let gen = bundle.hprime.matrix() + bundle.snap.delta_perp.matrix();
    let lhs = &gen * &bundle.f - &bundle.f * &gen;
    let rhs = &bundle.p_mu_dot * bundle.snap.p_mu.as_matrix()
        - bundle.snap.p_mu.as_matrix() * &bundle.p_mu_dot;
    op_norm(&(lhs - rhs))
}

/// Defining identities of the bundle, as residual-vs-tolerance checks.
pub fn verify_identities(bundle: &ResolventBundle) -> Vec<IneqCheck> {
    let snap = &bundle.snap;
    let n = bundle.hprime.dim();
    let identity = CMatrix::identity(n, n);
    let scale = 1.0_f64.max(op_norm(snap.blocks.a.matrix()));
    let tol = 1e-9 * scale;
    let shifted = bundle.hprime.matrix() - &identity * C64::new(snap.mu, 0.0);
    let m_perp_mat = &identity - snap.m.as_matrix();

    let mut checks = vec![
        IneqCheck::new(
            "R_left_identity",
            op_norm(&(&shifted * &bundle.r - &m_perp_mat)),
            tol,
            true,
        ),
        IneqCheck::new(
            "R_right_identity",
            op_norm(&(&bundle.r * &shifted - &m_perp_mat)),
            tol,
            true,
        ),
        IneqCheck::new(
            "R_annihilates_M",
            op_norm(&(&bundle.r * snap.m.as_matrix())),
            tol,
            true,
        ),
        IneqCheck::new(
            "Rperp_eq_Linv_R",
            op_norm(&(&bundle.r_perp - &bundle.l_inv * &bundle.r)),
            tol,
            true,
        ),
        IneqCheck::new(
            "second_resolvent_identity",
            op_norm(
                &(&bundle.r
                    - &bundle.r_perp
                    - &bundle.r * snap.delta_perp.matrix() * &bundle.r_perp),
            ),
            tol,
            true,
        ),
    ];

    let min_gap = snap.min_local_gap();
    checks.push(IneqCheck::new(
        "R_norm_le_inv_min_gap",
        op_norm(&bundle.r),
        over(1.0, min_gap),
        true,
    ));

    // the S̄ block of H' moves with mu - mubar, so its derivative norm is
    // read off hprime_dot directly
    let psb = snap.grading.p_sbar();
    let hps_dot_norm = op_norm(&(psb.as_matrix() * &bundle.hprime_dot * psb.as_matrix()));
    let hs_dot_norm = op_norm(&(snap.grading.p_s().as_matrix() * &bundle.hprime_dot
        * snap.grading.p_s().as_matrix()));
    let g_s2 = snap.gamma_s * snap.gamma_s;
    let g_sb2 = snap.gamma_sbar * snap.gamma_sbar;
    checks.push(IneqCheck::new(
        "Rdot_norm",
        op_norm(&bundle.r_dot),
        4.0 * over(hs_dot_norm, g_s2).max(over(hps_dot_norm, g_sb2)),
        true,
    ));
    checks.push(IneqCheck::new(
        "RdotPS_norm",
        op_norm(&(&bundle.r_dot * snap.grading.p_s().as_matrix())),
        4.0 * over(hs_dot_norm, g_s2),
        true,
    ));

    checks
}

/// Norm bounds of the F-operator lemma, each as an lhs/rhs pair, including
/// the four individual terms of the `Fdot P_mu` expansion.
pub fn verify_f_bounds(bundle: &ResolventBundle, fam: &GradedFamily) -> Vec<IneqCheck> {
    let snap = &bundle.snap;
    let d = fam.derivatives(bundle.s);
    let hs_dot = op_norm(d.h_s_dot.matrix());
    let hsbar_dot = op_norm(d.h_sbar_dot.matrix());
    let hs_ddot = op_norm(d.h_s_ddot.matrix());
    let psb = snap.grading.p_sbar();
    let hprime_sbar_dot = op_norm(&(psb.as_matrix() * &bundle.hprime_dot * psb.as_matrix()));
    let g_s = snap.gamma_s;
    let g_sb = snap.gamma_sbar;
    let g_s2 = g_s * g_s;
    let g_s3 = g_s2 * g_s;
    let min_gap = snap.min_local_gap();
    let eta = bundle.eta;
    let delta_perp_norm = op_norm(snap.delta_perp.matrix());
    let delta_perp_dot_norm = op_norm(&bundle.delta_perp_dot);
    let p_mu = snap.p_mu.as_matrix();
    let p_s = snap.grading.p_s();

    let mut checks = vec![IneqCheck::new(
        "Linv_le_inv_eta",
        op_norm(&bundle.l_inv),
        1.0 / eta,
        true,
    )];

    checks.push(IneqCheck::new(
        "Pmu_dot_le_HSdot_over_gap",
        op_norm(&bundle.p_mu_dot),
        over(hs_dot, g_s),
        true,
    ));
    checks.push(IneqCheck::new(
        "Pmu_ddot_cross_term",
        op_norm(&((p_s.as_matrix() - p_mu) * &bundle.p_mu_ddot * p_mu)),
        over(hs_ddot, g_s) + 4.0 * over(hs_dot * hs_dot, g_s2),
        true,
    ));

    let f_pmu = op_norm(&(&bundle.f * p_mu));
    let f_rest = op_norm(&(&bundle.f * (p_s.as_matrix() - p_mu)));
    checks.push(IneqCheck::new(
        "F_norms_le_HSdot_over_eta_gap2",
        f_pmu.max(f_rest),
        over(hs_dot, g_s2) / eta,
        true,
    ));

    // individual terms of the Fdot P_mu expansion, with the bounds used to
    // assemble the lemma's constant
    let delta_perp = snap.delta_perp.matrix();
    let a0 = -(&bundle.l_inv)
        * (&bundle.r_dot * delta_perp + &bundle.r * &bundle.delta_perp_dot)
        * &bundle.l_inv
        * &bundle.r
        * &bundle.p_mu_dot
        * p_mu;
    let a1 = &bundle.l_inv * &bundle.r_dot * &bundle.p_mu_dot * p_mu;
    let a2 = &bundle.l_inv * &bundle.r * &bundle.p_mu_ddot * p_mu;
    let a3 = -(p_mu * &bundle.p_mu_dot * &bundle.l_inv * &bundle.r * &bundle.p_mu_dot * p_mu);

    let coupling = over(delta_perp_dot_norm, min_gap)
        + 4.0
            * delta_perp_norm
            * over(hs_dot, g_s2).max(over(hprime_sbar_dot, g_sb * g_sb));
    checks.push(IneqCheck::new(
        "A0_norm",
        op_norm(&a0),
        over(hs_dot, g_s2) * coupling / (eta * eta),
        true,
    ));
    checks.push(IneqCheck::new(
        "A1_norm",
        op_norm(&a1),
        4.0 * over(hs_dot * hs_dot, g_s3) / eta,
        true,
    ));
    checks.push(IneqCheck::new(
        "A2_norm",
        op_norm(&a2),
        (over(hs_ddot, g_s2) + 4.0 * over(hs_dot * hs_dot, g_s3)) / eta,
        true,
    ));
    checks.push(IneqCheck::new(
        "A3_norm",
        op_norm(&a3),
        over(hs_dot * hs_dot, g_s3) / eta,
        true,
    ));

    // full lemma constant, with the S̄ derivative eliminated via
    // |Hprime_Sbar_dot| <= 2|H_Sbar_dot| + |H_S_dot|
    let lemma_coupling = over(delta_perp_dot_norm, min_gap)
        + 4.0
            * delta_perp_norm
            * over(hs_dot, g_s2).max(over(2.0 * hsbar_dot + hs_dot, g_sb * g_sb));
    let lemma_rhs = (over(hs_dot, g_s2) * lemma_coupling / eta
        + 9.0 * over(hs_dot * hs_dot, g_s3)
        + over(hs_ddot, g_s2))
        / eta;
    checks.push(IneqCheck::new(
        "FdotPmu_le_lemma",
        op_norm(&bundle.fdot_pmu),
        lemma_rhs,
        true,
    ));

    checks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;
    use crate::operator::HermitianMatrix;
    use rand::SeedableRng;

    #[test]
    fn h_prime_diagonal_oracle() {
        let fam = generators::double_well_static(0.0, 0.2).unwrap();
        let snap = spectral::snapshot(&fam, 0.5).unwrap();
        let hp = h_prime(&snap);
        let expected =
            HermitianMatrix::from_real(&[
                &[0.0, 0.0, 0.0, 0.0],
                &[0.0, 1.0, 0.0, 0.0],
                &[0.0, 0.0, 0.0, 0.0],
                &[0.0, 0.0, 0.0, 1.0],
            ])
            .unwrap();
        assert!(op_norm(&(hp.matrix() - expected.matrix())) < 1e-12);
    }

    #[test]
    fn zero_coupling_gives_trivial_l() {
        let fam = generators::diagonal_family(&[0.0, 1.0, 0.2, 1.2], &[0, 1]).unwrap();
        let b = build_bundle(&fam, 0.5).unwrap();
        assert_eq!(b.eta, 1.0);
        let n = 4;
        assert!(op_norm(&(&b.l - CMatrix::identity(n, n))) < 1e-14);
        assert!(op_norm(&(&b.r_perp - &b.r)) < 1e-12);
        // diag(0,1,0,1) pseudo-inverse on the excited levels
        let expected = HermitianMatrix::from_real(&[
            &[0.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert!(op_norm(&(&b.r - expected.matrix())) < 1e-12);
    }

    #[test]
    fn constant_family_has_zero_derivative_operators() {
        let fam = generators::double_well_static(0.05, 0.2).unwrap();
        let b = build_bundle(&fam, 0.5).unwrap();
        assert!(op_norm(&b.r_dot) < 1e-10);
        assert!(op_norm(&b.f) < 1e-12);
        assert!(op_norm(&b.fdot_pmu) < 1e-8);
        assert_eq!(verify_commutator(&b), 0.0);
    }

    #[test]
    fn bundle_identities_double_well() {
        let fam = generators::double_well(0.05, 0.2).unwrap();
        for k in 0..=4 {
            let s = k as f64 / 4.0;
            let b = build_bundle(&fam, s).unwrap();
            for chk in verify_identities(&b) {
                assert!(chk.margin >= 0.0, "s={s}: {chk:?}");
            }
            assert!(verify_commutator(&b) < 1e-9, "s={s}");
            for chk in verify_f_bounds(&b, &fam) {
                assert!(chk.margin > -1e-9, "s={s}: {chk:?}");
            }
        }
    }

    #[test]
    fn r_dot_matches_finite_differences() {
        let fam = generators::rotating_block(0.05, 1.0).unwrap();
        let s = 0.45;
        let b = build_bundle(&fam, s).unwrap();
        let step = 1e-5;
        let hi = build_bundle(&fam, s + step).unwrap().r;
        let lo = build_bundle(&fam, s - step).unwrap().r;
        let fd = (hi - lo).map(|z| z / (2.0 * step));
        let scale = 1.0_f64.max(op_norm(&b.r));
        assert!(
            op_norm(&(&b.r_dot - &fd)) < 1e-6 * scale,
            "residual {}",
            op_norm(&(&b.r_dot - &fd))
        );
    }

    #[test]
    fn fdot_matches_finite_differences() {
        let fam = generators::rotating_block(0.05, 1.0).unwrap();
        let s = 0.45;
        let b = build_bundle(&fam, s).unwrap();
        let step = 1e-5;
        let hi = build_bundle(&fam, s + step).unwrap().f;
        let lo = build_bundle(&fam, s - step).unwrap().f;
        let fd = (hi - lo).map(|z| z / (2.0 * step)) * b.snap.p_mu.as_matrix();
        let err = op_norm(&(&b.fdot_pmu - &fd));
        assert!(err < 1e-5, "residual {err}");
        // the term dropped from the expansion vanishes identically
        let dropped = &b.r_perp * &b.p_mu_dot * &b.p_mu_dot * b.snap.p_mu.as_matrix();
        assert!(op_norm(&dropped) < 1e-10);
    }

    #[test]
    fn f_two_forms_agree() {
        let fam = generators::rotating_block(0.08, 1.0).unwrap();
        let b = build_bundle(&fam, 0.3).unwrap();
        let p = b.snap.p_mu.as_matrix();
        let alt = &b.l_inv * &b.r * &b.p_mu_dot * p + p * &b.p_mu_dot * &b.l_inv * &b.r;
        assert!(op_norm(&(&b.f - &alt)) < 1e-9);
    }

    #[test]
    fn commutator_random_ensemble() {
        for seed in 0..20u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let fam = generators::random_graded(&mut rng, 8, 3, 0.25, false).unwrap();
            let b = match build_bundle(&fam, 0.5) {
                Ok(b) => b,
                Err(Error::DegenerateGroundState { .. }) => continue,
                Err(e) => panic!("seed {seed}: {e}"),
            };
            let scale = 1.0_f64.max(op_norm(b.snap.blocks.a.matrix()));
            assert!(verify_commutator(&b) < 1e-9 * scale, "seed {seed}");
            for chk in verify_identities(&b) {
                assert!(chk.margin > -1e-9 * scale, "seed {seed}: {chk:?}");
            }
            for chk in verify_f_bounds(&b, &fam) {
                assert!(chk.margin > -1e-9 * scale, "seed {seed}: {chk:?}");
            }
        }
    }

    #[test]
    fn eta_gate_rejects_oversized_perturbation() {
        // coupling rescaled close to the gap, then inflated past it
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let fam = generators::random_graded(&mut rng, 6, 3, 3.0, false).unwrap();
        match build_bundle(&fam, 0.5) {
            Err(Error::PerturbationTooLarge { eta }) => assert!(eta <= 0.0),
            Ok(b) => assert!(b.eta > 0.0), // rescaling may still land below the gap
            Err(e) => panic!("unexpected error {e}"),
        }
    }
}
