//! Static spectral quantities at a point of the schedule: gaps, ground
//! projectors, the Cheeger ratio, `lambda_S`, `kappa`, `M`, `Delta_perp`,
//! projector derivatives, and the inequality suite relating them.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graded::{Blocks, GradedFamily, Grading};
use crate::operator::{
    eigh_unchecked, op_norm, CMatrix, EigenSystem, HermitianMatrix, Projector, Tolerances, C64,
};

/// Eigen-data of one block restricted to its subspace, with eigenvectors
/// embedded back into the full space.
#[derive(Debug, Clone)]
pub struct LocalSpectrum {
    /// Ascending eigenvalues of the restriction.
    pub values: Vec<f64>,
    /// Lowest eigenvalue.
    pub mu: f64,
    /// First eigenvalue beyond the ground cluster; `+inf` when there is none
    /// (one-dimensional or fully degenerate block).
    pub mu1: f64,
    /// `mu1 - mu`, inheriting the `+inf` sentinel.
    pub gamma: f64,
    /// Projector onto the local ground cluster, embedded in the full space.
    pub p_ground: Projector,
    /// All local eigenvectors as full-space columns.
    pub vectors: CMatrix,
    /// Number of eigenvalues in the ground cluster.
    pub ground_rank: usize,
}

/// Eigendecomposition of a block supported on `indices`. Eigenvalues within
/// `cluster_width` of the bottom form the ground cluster.
pub fn local_spectrum(
    block: &HermitianMatrix,
    indices: &[usize],
    cluster_width: f64,
) -> LocalSpectrum {
    let k = indices.len();
    let n = block.dim();
    let sub = CMatrix::from_fn(k, k, |a, b| block.matrix()[(indices[a], indices[b])]);
    let es = eigh_unchecked(&sub);
    let mut vectors = CMatrix::zeros(n, k);
    for col in 0..k {
        for (row, &i) in indices.iter().enumerate() {
            vectors[(i, col)] = es.vectors[(row, col)];
        }
    }
    let mu = es.values[0];
    let ground_rank = es.values.iter().filter(|&&v| v - mu <= cluster_width).count();
    let mu1 = if ground_rank < k {
        es.values[ground_rank]
    } else {
        f64::INFINITY
    };
    let mut p = CMatrix::zeros(n, n);
    for col in 0..ground_rank {
        let v = vectors.column(col);
        p += v * v.adjoint();
    }
    LocalSpectrum {
        values: es.values,
        mu,
        mu1,
        gamma: mu1 - mu,
        p_ground: Projector {
            matrix: HermitianMatrix::from_hermitian_parts(p),
            rank: ground_rank,
        },
        vectors,
        ground_rank,
    }
}

/// Reduced resolvent of the block at its ground energy:
/// `sum_{j not in ground cluster} (mu - mu_j)^{-1} |v_j><v_j|`.
pub fn local_reduced_resolvent(loc: &LocalSpectrum) -> CMatrix {
    let n = loc.vectors.nrows();
    let mut r = CMatrix::zeros(n, n);
    for j in loc.ground_rank..loc.values.len() {
        let w = C64::new(1.0 / (loc.mu - loc.values[j]), 0.0);
        let v = loc.vectors.column(j);
        r += (v * v.adjoint()) * w;
    }
    r
}

/// Everything static the bounds need at one value of `s`.
#[derive(Debug, Clone)]
pub struct SpectralSnapshot {
    pub s: f64,
    pub grading: Grading,
    pub blocks: Blocks,
    pub eigen: EigenSystem,
    pub lambda: Vec<f64>,
    pub lambda0: f64,
    /// Global gap `lambda_1 - lambda_0`.
    pub gamma: f64,
    /// Spectral spread `lambda_{N-1} - lambda_0`.
    pub kappa: f64,
    pub mu: f64,
    pub mu1: f64,
    pub mubar: f64,
    pub mubar1: f64,
    pub gamma_s: f64,
    pub gamma_sbar: f64,
    /// Cheeger ratio of the global ground state across the cut.
    pub h: f64,
    /// Rayleigh quotient of `H_S` in the ground state; NaN when the ground
    /// state has no support on S.
    pub lambda_s: f64,
    pub support_on_s: bool,
    pub delta_norm: f64,
    pub p_lambda: Projector,
    /// Spectral projector of `A` onto `(-inf, lambda + 2h]`.
    pub pi: Projector,
    pub p_mu: Projector,
    pub p_mubar: Projector,
    pub m: Projector,
    pub m_perp: Projector,
    pub delta_perp: HermitianMatrix,
    pub local_s: LocalSpectrum,
    pub local_sbar: LocalSpectrum,
}

impl SpectralSnapshot {
    pub fn min_local_gap(&self) -> f64 {
        self.gamma_s.min(self.gamma_sbar)
    }

    pub fn ground_vector(&self) -> DVector<C64> {
        DVector::from_column_slice(self.eigen.vectors.column(0).as_slice())
    }

    /// Realized coupling ratio `c = |Delta| / min{Gamma_S, Gamma_Sbar}`.
    pub fn c_ratio(&self) -> f64 {
        let g = self.min_local_gap();
        if g.is_infinite() {
            0.0
        } else {
            self.delta_norm / g
        }
    }

    pub fn summary(&self, full: bool) -> SnapshotSummary {
        SnapshotSummary {
            s: self.s,
            lambda0: self.lambda0,
            gamma: self.gamma,
            kappa: self.kappa,
            mu: self.mu,
            mu1: self.mu1,
            mubar: self.mubar,
            mubar1: self.mubar1,
            gamma_s: self.gamma_s,
            gamma_sbar: self.gamma_sbar,
            h: self.h,
            lambda_s: self.lambda_s,
            delta_norm: self.delta_norm,
            delta_perp_norm: op_norm(self.delta_perp.matrix()),
            c: self.c_ratio(),
            pi_rank: self.pi.rank,
            p_mu_rank: self.p_mu.rank,
            p_mubar_rank: self.p_mubar.rank,
            support_on_s: self.support_on_s,
            a: full.then(|| self.blocks.a.clone()),
        }
    }
}

/// Scalar view of a snapshot for serialization. Infinite gaps and an
/// undefined `lambda_S` serialize as JSON `null`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotSummary {
    pub s: f64,
    pub lambda0: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub mu: f64,
    #[serde(with = "inf_as_null")]
    pub mu1: f64,
    pub mubar: f64,
    #[serde(with = "inf_as_null")]
    pub mubar1: f64,
    #[serde(with = "inf_as_null")]
    pub gamma_s: f64,
    #[serde(with = "inf_as_null")]
    pub gamma_sbar: f64,
    pub h: f64,
    #[serde(with = "nan_as_null")]
    pub lambda_s: f64,
    pub delta_norm: f64,
    pub delta_perp_norm: f64,
    pub c: f64,
    pub pi_rank: usize,
    pub p_mu_rank: usize,
    pub p_mubar_rank: usize,
    pub support_on_s: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub a: Option<HermitianMatrix>,
}

pub(crate) mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, ser: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            ser.serialize_some(v)
        } else {
            ser.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(de)?.unwrap_or(f64::INFINITY))
    }
}

pub(crate) mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, ser: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_nan() {
            ser.serialize_none()
        } else {
            ser.serialize_some(v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(de)?.unwrap_or(f64::NAN))
    }
}

/// Cheeger ratio of a normalized ground vector with respect to the cut:
/// `-<v, Delta P_S v> / min{<v, P_S v>, <v, P_Sbar v>}`, zero when the
/// smaller mass is below the support tolerance. The numerator must be real
/// up to `h_imag`.
pub fn cheeger_ratio(
    ground: &DVector<C64>,
    delta: &HermitianMatrix,
    grading: &Grading,
    tols: &Tolerances,
) -> Result<f64> {
    let ps = grading.p_s();
    let psbar = grading.p_sbar();
    let mass_s = ground.dotc(&(ps.as_matrix() * ground)).re;
    let mass_sbar = ground.dotc(&(psbar.as_matrix() * ground)).re;
    let numerator = -ground.dotc(&(delta.matrix() * (ps.as_matrix() * ground)));
    if numerator.im.abs() > tols.h_imag {
        return Err(Error::NonRealCheeger {
            imag: numerator.im,
            tol: tols.h_imag,
        });
    }
    let min_mass = mass_s.min(mass_sbar);
    if min_mass <= tols.supp {
        Ok(0.0)
    } else {
        Ok(numerator.re / min_mass)
    }
}

/// Compute the full snapshot at `s`. Fails if the global ground state is
/// degenerate (the Cheeger ratio would be ambiguous).
pub fn snapshot(fam: &GradedFamily, s: f64) -> Result<SpectralSnapshot> {
    let tols = *fam.tols();
    let blocks = fam.blocks(s)?;
    let eigen = blocks.a.eigh();
    let n = fam.dim();
    let lambda = eigen.values.clone();
    let lambda0 = lambda[0];
    let a_scale = lambda.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let cluster = tols.cluster(a_scale);
    if n > 1 && lambda[1] - lambda[0] <= cluster {
        return Err(Error::DegenerateGroundState {
            gap: lambda[1] - lambda[0],
            tol: cluster,
        });
    }
    let gamma = lambda[1] - lambda0;
    let kappa = lambda[n - 1] - lambda0;

    let grading = fam.grading().clone();
    let local_s = local_spectrum(&blocks.h_s, grading.s_indices(), cluster);
    let local_sbar = local_spectrum(&blocks.h_sbar, grading.sbar_indices(), cluster);

    let ground = DVector::from_column_slice(eigen.vectors.column(0).as_slice());
    let h = cheeger_ratio(&ground, &blocks.delta, &grading, &tols)?;

    let ps = grading.p_s();
    let mass_s = ground.dotc(&(ps.as_matrix() * &ground)).re;
    let support_on_s = mass_s > tols.supp;
    let lambda_s = if support_on_s {
        ground.dotc(&(blocks.h_s.matrix() * &ground)).re / mass_s
    } else {
        f64::NAN
    };

    let p_lambda = eigen.projector(&[0]);
    let pi_indices: Vec<usize> = (0..n)
        .filter(|&j| lambda[j] <= lambda0 + 2.0 * h + cluster)
        .collect();
    let pi = eigen.projector(&pi_indices);

    let p_mu = local_s.p_ground.clone();
    let p_mubar = local_sbar.p_ground.clone();
    let m = Projector {
        matrix: HermitianMatrix::from_hermitian_parts(p_mu.as_matrix() + p_mubar.as_matrix()),
        rank: p_mu.rank + p_mubar.rank,
    };
    let m_perp = m.complement();
    let delta_perp = HermitianMatrix::from_hermitian_parts(
        m_perp.as_matrix() * blocks.delta.matrix() * m_perp.as_matrix(),
    );
    let delta_norm = op_norm(blocks.delta.matrix());

    Ok(SpectralSnapshot {
        s,
        grading,
        mu: local_s.mu,
        mu1: local_s.mu1,
        mubar: local_sbar.mu,
        mubar1: local_sbar.mu1,
        gamma_s: local_s.gamma,
        gamma_sbar: local_sbar.gamma,
        lambda,
        lambda0,
        gamma,
        kappa,
        h,
        lambda_s,
        support_on_s,
        delta_norm,
        p_lambda,
        pi,
        p_mu,
        p_mubar,
        m,
        m_perp,
        delta_perp,
        local_s,
        local_sbar,
        blocks,
        eigen,
    })
}

/// Analytic first derivatives of the local ground projectors, plus the
/// measured second-derivative cross term.
#[derive(Debug, Clone)]
pub struct ProjectorDerivatives {
    pub p_mu_dot: CMatrix,
    pub p_mubar_dot: CMatrix,
    /// `|(P_S - P_mu) Pddot_mu P_mu|` with the second derivative taken by
    /// central differences of the analytic first derivative.
    pub cross_term_norm: f64,
}

fn p_dot_from_local(loc: &LocalSpectrum, block_dot: &HermitianMatrix) -> CMatrix {
    let r = local_reduced_resolvent(loc);
    let p = loc.p_ground.as_matrix();
    &r * block_dot.matrix() * p + p * block_dot.matrix() * &r
}

pub(crate) fn first_derivatives(fam: &GradedFamily, s: f64) -> Result<(CMatrix, CMatrix)> {
    let blocks = fam.blocks(s)?;
    let cluster = fam.tols().cluster(op_norm(blocks.a.matrix()));
    let grading = fam.grading();
    let local_s = local_spectrum(&blocks.h_s, grading.s_indices(), cluster);
    let local_sbar = local_spectrum(&blocks.h_sbar, grading.sbar_indices(), cluster);
    for (loc, which) in [(&local_s, "Gamma_S"), (&local_sbar, "Gamma_Sbar")] {
        if loc.gamma.is_finite() && loc.gamma <= cluster {
            return Err(Error::GapCollapse {
                which: which.into(),
                gap: loc.gamma,
            });
        }
    }
    let d = fam.derivatives(s);
    Ok((
        p_dot_from_local(&local_s, &d.h_s_dot),
        p_dot_from_local(&local_sbar, &d.h_sbar_dot),
    ))
}

/// Second derivative of `P_mu` by central differences of the analytic first
/// derivative (one-sided at the interval ends).
pub fn p_mu_ddot(fam: &GradedFamily, s: f64, step: f64) -> Result<CMatrix> {
    let (lo, hi) = if s - step < 0.0 {
        (s, s + step)
    } else if s + step > 1.0 {
        (s - step, s)
    } else {
        (s - step, s + step)
    };
    let (d_hi, _) = first_derivatives(fam, hi)?;
    let (d_lo, _) = first_derivatives(fam, lo)?;
    Ok((d_hi - d_lo).map(|z| z / (hi - lo)))
}

/// Derivatives of `P_mu` and `P_mubar` at `s` via the block reduced
/// resolvents. A one-dimensional (or fully degenerate) block contributes
/// zero.
pub fn projector_derivatives(fam: &GradedFamily, s: f64) -> Result<ProjectorDerivatives> {
    let (p_mu_dot, p_mubar_dot) = first_derivatives(fam, s)?;
    let pddot = p_mu_ddot(fam, s, 1e-4)?;
    let blocks = fam.blocks(s)?;
    let cluster = fam.tols().cluster(op_norm(blocks.a.matrix()));
    let local_s = local_spectrum(&blocks.h_s, fam.grading().s_indices(), cluster);
    let pmu_perp = fam.grading().p_s().as_matrix() - local_s.p_ground.as_matrix();
    let cross = &pmu_perp * &pddot * local_s.p_ground.as_matrix();
    Ok(ProjectorDerivatives {
        p_mu_dot,
        p_mubar_dot,
        cross_term_norm: op_norm(&cross),
    })
}

/// Signed margins of the eigenvalue chain
/// `lambda <= min{mu, mubar} <= lambda_S <= lambda + h`
/// (the middle link is `mu <= lambda_S`). NaN when the ground state has no
/// support on S.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Prop1Margins {
    /// `min{mu, mubar} - lambda`.
    pub lambda_below_local: f64,
    /// `lambda_S - mu`.
    pub mu_below_rayleigh: f64,
    /// `lambda + h - lambda_S`.
    pub rayleigh_below_lambda_plus_h: f64,
}

impl Prop1Margins {
    pub fn min(&self) -> f64 {
        self.lambda_below_local
            .min(self.mu_below_rayleigh)
            .min(self.rayleigh_below_lambda_plus_h)
    }
}

pub fn verify_prop1(snap: &SpectralSnapshot) -> Prop1Margins {
    Prop1Margins {
        lambda_below_local: snap.mu.min(snap.mubar) - snap.lambda0,
        mu_below_rayleigh: snap.lambda_s - snap.mu,
        rayleigh_below_lambda_plus_h: snap.lambda0 + snap.h - snap.lambda_s,
    }
}

/// One verified inequality: `lhs <= rhs` with `margin = rhs - lhs`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IneqCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    /// False when the hypotheses of this entry fail at this `s`; the margin
    /// is then informational only.
    pub applicable: bool,
}

impl IneqCheck {
    pub(crate) fn new(name: &str, lhs: f64, rhs: f64, applicable: bool) -> Self {
        IneqCheck {
            name: name.into(),
            lhs,
            rhs,
            margin: rhs - lhs,
            applicable,
        }
    }
}

/// The spectral-norm inequality suite tying `Delta`, the ground projectors
/// and the Cheeger ratio together. Entries whose hypotheses fail are marked
/// not applicable rather than asserted.
pub fn verify_section3(snap: &SpectralSnapshot, assumptions_hold: bool) -> Vec<IneqCheck> {
    let delta = snap.blocks.delta.matrix();
    let h = snap.h.max(0.0);
    let min_gap = snap.min_local_gap();
    let c = snap.c_ratio();
    let sqrt_hk = (h * snap.kappa).sqrt();
    let base_ok = assumptions_hold && snap.support_on_s && snap.h >= 0.0;

    let mut checks = Vec::new();

    let mdm = snap.m.as_matrix() * delta * snap.m.as_matrix();
    checks.push(IneqCheck::new("MDeltaM_le_h", op_norm(&mdm), h, base_ok));

    checks.push(IneqCheck::new(
        "DeltaPmu_le_sqrt_hk_plus_h",
        op_norm(&(delta * snap.p_mu.as_matrix())),
        sqrt_hk + h,
        base_ok,
    ));
    checks.push(IneqCheck::new(
        "DeltaM_le_sqrt_hk_plus_h",
        op_norm(&(delta * snap.m.as_matrix())),
        sqrt_hk + h,
        base_ok,
    ));

    // ground-state projection approximation onto the local ground subspace
    let p_s = snap.grading.p_s();
    let pmu_perp_in_s = p_s.as_matrix() - snap.p_mu.as_matrix();
    let num = op_norm(&(snap.p_lambda.as_matrix() * &pmu_perp_in_s));
    let den = op_norm(&(snap.p_lambda.as_matrix() * p_s.as_matrix()));
    let proj_ok = snap.support_on_s && den > 0.0;
    let ratio = if proj_ok { num / den } else { 0.0 };
    let lemma_rhs = if snap.gamma_s.is_infinite() {
        0.0
    } else {
        ((snap.lambda_s - snap.mu).max(0.0) / snap.gamma_s).sqrt()
    };
    checks.push(IneqCheck::new(
        "projection_lemma_ratio",
        ratio,
        lemma_rhs,
        proj_ok,
    ));
    let corr_rhs = if snap.gamma_s.is_infinite() {
        0.0
    } else {
        (h / snap.gamma_s).sqrt()
    };
    checks.push(IneqCheck::new(
        "projection_corollary_ratio",
        ratio,
        corr_rhs,
        proj_ok && assumptions_hold && snap.h >= 0.0,
    ));

    let lam_mperp = op_norm(&(snap.p_lambda.as_matrix() * snap.m_perp.as_matrix()));
    let rhs_mperp = if min_gap.is_infinite() {
        0.0
    } else {
        (2.0 * h / min_gap).sqrt()
    };
    checks.push(IneqCheck::new(
        "PlambdaMperp_le_sqrt_2h_over_min_gap",
        lam_mperp,
        rhs_mperp,
        base_ok,
    ));

    // this bound is proved for the projector onto the two lowest global
    // eigenstates, which only coincides with the threshold projector `pi`
    // when lambda_1 <= lambda + 2h
    let pi_two = if snap.blocks.a.dim() >= 2 {
        snap.eigen.projector(&[0, 1])
    } else {
        snap.p_lambda.clone()
    };
    let lhs_pi = op_norm(&(pi_two.complement().as_matrix() * snap.m.as_matrix()));
    let rhs_pi = if min_gap.is_infinite() {
        0.0
    } else if c < 1.0 {
        (2.0 * h / ((1.0 - c) * min_gap)).sqrt()
    } else {
        f64::INFINITY
    };
    checks.push(IneqCheck::new(
        "PiPerpM_le_sqrt_2h_over_1mc_min_gap",
        lhs_pi,
        rhs_pi,
        base_ok && c < 1.0,
    ));

    checks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;
    use crate::graded::{GradedFamily, Grading};
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn two_level() -> GradedFamily {
        let a = HermitianMatrix::from_real(&[&[0.0, -0.1], &[-0.1, 1.0]]).unwrap();
        generators::static_family(Grading::new(2, vec![0]).unwrap(), &a).unwrap()
    }

    // closed-form 2x2 oracle: lambda0 = (1 - sqrt(1.04)) / 2, unnormalized
    // ground vector (1, -10 lambda0), h = 0.1 v0 / v1.
    #[test]
    fn two_level_closed_form() {
        let snap = snapshot(&two_level(), 0.5).unwrap();
        let lambda0 = 0.5 * (1.0 - 1.04_f64.sqrt());
        let v1_over_v0 = -10.0 * lambda0;
        let h_expected = 0.1 / v1_over_v0;
        assert!((snap.lambda0 - lambda0).abs() < 1e-12);
        assert!((snap.kappa - 1.04_f64.sqrt()).abs() < 1e-12);
        assert!((snap.h - h_expected).abs() < 1e-10, "h = {}", snap.h);
        // both blocks are one-dimensional
        assert!(snap.gamma_s.is_infinite() && snap.gamma_sbar.is_infinite());
        assert_eq!(snap.mu, 0.0);
        assert!((snap.mubar - 1.0).abs() < 1e-14);
        assert!(snap.lambda_s.abs() < 1e-12);
        let m = verify_prop1(&snap);
        assert!(m.min() > -1e-12, "{m:?}");
    }

    // dense-eigendecomposition oracle for the double-well family
    #[test]
    fn double_well_snapshot_matches_dense_oracle() {
        let fam = generators::double_well(0.05, 0.2).unwrap();
        let s = 0.37;
        let snap = snapshot(&fam, s).unwrap();
        let a = fam.blocks(s).unwrap().a;
        let es = a.eigh();
        assert!((snap.lambda0 - es.values[0]).abs() < 1e-12);
        assert!((snap.gamma - (es.values[1] - es.values[0])).abs() < 1e-12);
        assert!((snap.kappa - (es.values[3] - es.values[0])).abs() < 1e-12);
        // local blocks are diagonal for this family
        assert!(snap.mu.abs() < 1e-12);
        assert!((snap.gamma_s - 1.0).abs() < 1e-12);
        assert!((snap.mubar - 0.2).abs() < 1e-12);
        assert!((snap.gamma_sbar - 1.0).abs() < 1e-12);
        assert!(snap.support_on_s);
        assert!(snap.h > 0.0 && snap.h < 0.5);
        assert_eq!(snap.p_mu.rank, 1);
        assert_eq!(snap.m.rank, 2);
        // Delta_perp annihilates M by construction
        let res = snap.delta_perp.matrix() * snap.m.as_matrix();
        assert!(op_norm(&res) < 1e-12);
    }

    #[test]
    fn cheeger_zero_when_no_coupling() {
        let fam = generators::diagonal_family(&[0.0, 1.0, 0.2, 1.2], &[0, 1]).unwrap();
        let snap = snapshot(&fam, 0.3).unwrap();
        assert_eq!(snap.h, 0.0);
        assert_eq!(snap.delta_norm, 0.0);
        assert!(snap.support_on_s);
    }

    #[test]
    fn degenerate_ground_state_is_rejected() {
        let a = HermitianMatrix::from_real(&[&[0.0, 0.0], &[0.0, 0.0]]).unwrap();
        let fam = generators::static_family(Grading::new(2, vec![0]).unwrap(), &a).unwrap();
        assert!(matches!(
            snapshot(&fam, 0.5),
            Err(Error::DegenerateGroundState { .. })
        ));
    }

    // finite-difference oracle for the analytic projector derivative
    #[test]
    fn projector_derivative_matches_finite_differences() {
        let fam = generators::rotating_block(0.05, 1.0).unwrap();
        let s = 0.4;
        let d = projector_derivatives(&fam, s).unwrap();
        let step = 1e-5;
        let fd = |get: &dyn Fn(f64) -> CMatrix| {
            (get(s + step) - get(s - step)).map(|z| z / (2.0 * step))
        };
        let fd_mu = fd(&|x| snapshot(&fam, x).unwrap().p_mu.as_matrix().clone());
        let err = op_norm(&(&d.p_mu_dot - &fd_mu));
        assert!(err < 1e-6, "FD mismatch {err}");
        let fd_bar = fd(&|x| snapshot(&fam, x).unwrap().p_mubar.as_matrix().clone());
        let err_bar = op_norm(&(&d.p_mubar_dot - &fd_bar));
        assert!(err_bar < 1e-6, "FD mismatch (Sbar) {err_bar}");
    }

    #[test]
    fn pi_contains_ground_state() {
        let fam = generators::double_well(0.1, 0.2).unwrap();
        let snap = snapshot(&fam, 0.6).unwrap();
        assert!(snap.pi.rank >= 1);
        let g = snap.ground_vector();
        let img = snap.pi.as_matrix() * &g;
        assert!((img - &g).norm() < 1e-10);
    }

    #[test]
    fn section3_suite_on_double_well_grid() {
        let fam = generators::double_well(0.08, 0.2).unwrap();
        for k in 0..=8 {
            let s = k as f64 / 8.0;
            let snap = snapshot(&fam, s).unwrap();
            let tol = fam.tols().ineq(snap.kappa.max(1.0));
            for chk in verify_section3(&snap, true) {
                if chk.applicable {
                    assert!(chk.margin > -tol, "{} at s={s}: {chk:?}", chk.name);
                }
            }
            let m = verify_prop1(&snap);
            assert!(m.min() > -tol, "prop1 at s={s}: {m:?}");
        }
    }

    #[test]
    fn summary_serializes_infinities_as_null() {
        let snap = snapshot(&two_level(), 0.5).unwrap();
        let text = serde_json::to_string(&snap.summary(false)).unwrap();
        assert!(text.contains("\"gamma_s\":null"), "{text}");
        let back: SnapshotSummary = serde_json::from_str(&text).unwrap();
        assert!(back.gamma_s.is_infinite());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        // eigenvalue chain and norm inequalities on random graded families
        #[test]
        fn random_families_satisfy_inequalities(seed in 0u64..2000, s in 0.0f64..=1.0) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let fam = generators::random_graded(&mut rng, 5, 2, 0.3, false).unwrap();
            let snap = match snapshot(&fam, s) {
                Ok(sn) => sn,
                Err(Error::DegenerateGroundState { .. }) => return Ok(()),
                Err(e) => return Err(TestCaseError::fail(format!("{e}"))),
            };
            let assumptions = crate::graded::check_assumptions(&fam, &[s])
                .map(|r| r.all_hold)
                .unwrap_or(false);
            let tol = fam.tols().ineq(snap.kappa.max(1.0));
            if snap.support_on_s && snap.h >= 0.0 {
                let m = verify_prop1(&snap);
                prop_assert!(m.min() > -tol, "prop1 {:?}", m);
            }
            for chk in verify_section3(&snap, assumptions) {
                if chk.applicable {
                    prop_assert!(chk.margin > -tol, "{:?}", chk);
                }
            }
        }
    }
}
