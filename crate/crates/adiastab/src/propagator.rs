//! Time evolution: integrates the exact and reference Schrödinger problems
//! on the rescaled interval `s ∈ [0,1]`, measures subspace leakage
//! (`epsilon_T`), the intertwiner property, and the evolution-difference
//! norms that the bounds must dominate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graded::GradedFamily;
use crate::operator::{
    op_norm, reunitarize, unitarity_defect, unitary_exp, CMatrix, HermitianMatrix, C64,
};
use crate::resolvent::h_prime;
use crate::spectral;

/// Number of points in the fixed reporting grid.
pub const REPORT_POINTS: usize = 257;

/// Default accepted-step budget per integration; override with the
/// `ADIASTAB_MAX_STEPS` environment variable.
pub const DEFAULT_MAX_STEPS: u64 = 2_000_000;

/// Which Schrödinger problems to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kind {
    /// Generator `T A(s)`.
    U,
    /// Generator `T (H(s) + Delta_perp(s))`.
    UPerp,
    /// Generator `T (H'(s) + Delta_perp(s))`.
    UPerpPrime,
    /// Generator `T H(s)`.
    V,
    /// Generator `T H(s) + i [Pdot_mu(s), P_mu(s)]`.
    VAd,
}

pub const ALL_KINDS: [Kind; 5] = [Kind::U, Kind::UPerp, Kind::UPerpPrime, Kind::V, Kind::VAd];

fn generator(fam: &GradedFamily, kind: Kind, t: f64, s: f64) -> Result<HermitianMatrix> {
    let blocks = fam.blocks(s)?;
    let h = blocks.h_s.matrix() + blocks.h_sbar.matrix();
    let tt = C64::new(t, 0.0);
    let mat = match kind {
        Kind::U => blocks.a.matrix() * tt,
        Kind::V => h * tt,
        Kind::UPerp => {
            let snap = spectral::snapshot(fam, s)?;
            (h + snap.delta_perp.matrix()) * tt
        }
        Kind::UPerpPrime => {
            let snap = spectral::snapshot(fam, s)?;
            (h_prime(&snap).matrix() + snap.delta_perp.matrix()) * tt
        }
        Kind::VAd => {
            let snap = spectral::snapshot(fam, s)?;
            let (p_mu_dot, _) = spectral::first_derivatives(fam, s)?;
            let comm = &p_mu_dot * snap.p_mu.as_matrix() - snap.p_mu.as_matrix() * &p_mu_dot;
            h * tt + comm * C64::new(0.0, 1.0)
        }
    };
    Ok(HermitianMatrix::from_hermitian_parts(mat))
}

/// Unitaries of one integrated problem at every reporting-grid point.
#[derive(Debug, Clone)]
pub struct Track {
    pub kind: Kind,
    pub unitaries: Vec<CMatrix>,
    pub step_error_estimate: f64,
    pub steps: u64,
}

impl Track {
    pub fn at_end(&self) -> &CMatrix {
        self.unitaries.last().expect("non-empty grid")
    }
}

/// The integrated set: fixed reporting grid plus one track per requested
/// problem.
#[derive(Debug, Clone)]
pub struct PropagatorSet {
    pub t: f64,
    pub tol_step: f64,
    pub s_grid: Vec<f64>,
    pub tracks: Vec<Track>,
}

impl PropagatorSet {
    pub fn track(&self, kind: Kind) -> Option<&Track> {
        self.tracks.iter().find(|tr| tr.kind == kind)
    }

    pub fn require(&self, kind: Kind) -> Result<&Track> {
        self.track(kind)
            .ok_or_else(|| Error::Config(format!("propagator {kind:?} was not integrated")))
    }

    /// Largest accumulated local-error estimate across tracks.
    pub fn step_error_estimate(&self) -> f64 {
        self.tracks
            .iter()
            .map(|tr| tr.step_error_estimate)
            .fold(0.0, f64::max)
    }
}

pub fn report_grid() -> Vec<f64> {
    (0..REPORT_POINTS)
        .map(|k| k as f64 / (REPORT_POINTS - 1) as f64)
        .collect()
}

/// Parse the `ADIASTAB_MAX_STEPS` override; anything unparseable falls back
/// to the default.
pub fn parse_max_steps(var: Option<&str>) -> u64 {
    var.and_then(|v| v.parse().ok()).unwrap_or(DEFAULT_MAX_STEPS)
}

fn max_steps_budget() -> u64 {
    parse_max_steps(std::env::var("ADIASTAB_MAX_STEPS").ok().as_deref())
}

/// Integrate one problem with adaptive midpoint-exponential stepping.
///
/// Each trial step compares `exp(-i d G(s+d/2))` against two half steps and
/// accepts when the difference is below `tol_step`, using the half-step
/// composition as the new state. Steps never exceed `0.1 / |G|` so each
/// exponential stays well resolved, and the state is re-unitarized whenever
/// drift exceeds `tol_unit`.
fn integrate(
    fam: &GradedFamily,
    kind: Kind,
    t: f64,
    tol_step: f64,
    max_steps: u64,
) -> Result<Track> {
    let grid = report_grid();
    let n = fam.dim();
    let unit_tol = fam.tols().unit;
    let mut u = CMatrix::identity(n, n);
    let mut unitaries = Vec::with_capacity(grid.len());
    unitaries.push(u.clone());
    let mut err_acc = 0.0_f64;
    let mut steps = 0_u64;
    let mut delta = 1.0 / (REPORT_POINTS - 1) as f64;

    for w in grid.windows(2) {
        let (start, stop) = (w[0], w[1]);
        let mut s = start;
        while stop - s > 1e-15 {
            let g_probe = generator(fam, kind, t, s + 0.5 * (stop - s).min(delta))?;
            let g_norm = op_norm(g_probe.matrix()).max(1e-12);
            let cap = 0.1 / g_norm;
            let d = delta.min(stop - s).min(cap);

            let g_mid = generator(fam, kind, t, s + 0.5 * d)?;
            let full = unitary_exp(&g_mid, d) * &u;
            let g_q1 = generator(fam, kind, t, s + 0.25 * d)?;
            let g_q3 = generator(fam, kind, t, s + 0.75 * d)?;
            let half = unitary_exp(&g_q3, 0.5 * d) * unitary_exp(&g_q1, 0.5 * d) * &u;
            let err = op_norm(&(&full - &half));

            if err <= tol_step {
                u = half;
                s += d;
                err_acc += err;
                steps += 1;
                if steps > max_steps {
                    return Err(Error::StepBudget { max_steps });
                }
                if unitarity_defect(&u) > unit_tol {
                    u = reunitarize(&u);
                }
                // third-order local error controls the step update
                let grow = if err > 0.0 {
                    (0.9 * (tol_step / err).powf(1.0 / 3.0)).clamp(0.5, 2.0)
                } else {
                    2.0
                };
                delta = (d * grow).min(0.25);
            } else {
                delta = d * (0.9 * (tol_step / err).powf(1.0 / 3.0)).clamp(0.1, 0.9);
            }
        }
        unitaries.push(u.clone());
    }

    Ok(Track {
        kind,
        unitaries,
        step_error_estimate: err_acc,
        steps,
    })
}

/// Integrate the requested problems over the reporting grid, with the step
/// budget taken from the environment override or the default.
pub fn evolve(fam: &GradedFamily, t: f64, kinds: &[Kind], tol_step: f64) -> Result<PropagatorSet> {
    evolve_with_budget(fam, t, kinds, tol_step, max_steps_budget())
}

/// As [`evolve`], with an explicit accepted-step budget per track.
pub fn evolve_with_budget(
    fam: &GradedFamily,
    t: f64,
    kinds: &[Kind],
    tol_step: f64,
    max_steps: u64,
) -> Result<PropagatorSet> {
    if t <= 0.0 {
        return Err(Error::Config(format!("total time must be positive, got {t}")));
    }
    let mut tracks = Vec::with_capacity(kinds.len());
    for &kind in kinds {
        tracks.push(integrate(fam, kind, t, tol_step, max_steps)?);
    }
    Ok(PropagatorSet {
        t,
        tol_step,
        s_grid: report_grid(),
        tracks,
    })
}

/// Measured leakage curves and their maximum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpsilonReport {
    /// `max_s max{ variant_ground(s), variant_window(s), variant_local(s) }`.
    pub value: f64,
    /// `|P_lambda(s)_perp U(s) ground(0)|` per grid point.
    pub variant_ground: Vec<f64>,
    /// `|Pi(s)_perp U(s) Pi(0)|` per grid point.
    pub variant_window: Vec<f64>,
    /// `|M(s)_perp U'_perp(s) P_mu(0)|` per grid point.
    pub variant_local: Vec<f64>,
}

/// Leakage of the true evolution out of the instantaneous low-energy
/// subspaces, and of the reference evolution out of the local ground space.
/// Both published variants are evaluated and the maximum is taken.
pub fn epsilon_t(fam: &GradedFamily, props: &PropagatorSet) -> Result<EpsilonReport> {
    let u_track = props.require(Kind::U)?;
    let up_track = props.require(Kind::UPerpPrime)?;
    let snap0 = spectral::snapshot(fam, 0.0)?;
    let ground0 = snap0.ground_vector();
    let pi0 = snap0.pi.as_matrix().clone();
    let p_mu0 = snap0.p_mu.as_matrix().clone();

    let mut variant_ground = Vec::with_capacity(props.s_grid.len());
    let mut variant_window = Vec::with_capacity(props.s_grid.len());
    let mut variant_local = Vec::with_capacity(props.s_grid.len());
    let mut value = 0.0_f64;
    for (i, &s) in props.s_grid.iter().enumerate() {
        let snap = spectral::snapshot(fam, s)?;
        let u = &u_track.unitaries[i];
        let up = &up_track.unitaries[i];
        let g = (snap.p_lambda.complement().as_matrix() * (u * &ground0)).norm();
        let w = op_norm(&(snap.pi.complement().as_matrix() * u * &pi0));
        let l = op_norm(&(snap.m_perp.as_matrix() * up * &p_mu0));
        value = value.max(g).max(w).max(l);
        variant_ground.push(g);
        variant_window.push(w);
        variant_local.push(l);
    }
    Ok(EpsilonReport {
        value,
        variant_ground,
        variant_window,
        variant_local,
    })
}

/// `max_s |V_ad(s) P_mu(0) V_ad(s)^† - P_mu(s)|`: the adiabatic reference
/// transports the local ground space exactly up to integrator error.
pub fn verify_intertwining(fam: &GradedFamily, props: &PropagatorSet) -> Result<f64> {
    let track = props.require(Kind::VAd)?;
    let p_mu0 = spectral::snapshot(fam, 0.0)?.p_mu.as_matrix().clone();
    let mut worst = 0.0_f64;
    for (i, &s) in props.s_grid.iter().enumerate() {
        let v = &track.unitaries[i];
        let transported = v * &p_mu0 * v.adjoint();
        let p_mu = spectral::snapshot(fam, s)?.p_mu;
        worst = worst.max(op_norm(&(transported - p_mu.as_matrix())));
    }
    Ok(worst)
}

/// The four evolution-difference norms the bounds must dominate, evaluated
/// at `s = 1`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LhsErrors {
    /// `|(U(1) - V_ad(1)) P_mu(0)|`.
    pub main: f64,
    /// `|(U(1) - U'_perp(1)) P_mu(0)|`.
    pub tunnel: f64,
    /// `|(U'_perp(1) - V_ad(1)) P_mu(0)|`.
    pub adiab: f64,
    /// `|(exp(-i T A) - exp(-i mu T)) P_mu|` for the family frozen at s=0;
    /// closed form, no integration.
    pub static_: f64,
}

fn diff_on_pmu0(a: &CMatrix, b: &CMatrix, p_mu0: &CMatrix) -> f64 {
    op_norm(&((a - b) * p_mu0))
}

/// Closed-form static difference at `s = 0`: evolve under the frozen `A`,
/// compare with the pure local-ground phase.
pub fn static_lhs(fam: &GradedFamily, t: f64) -> Result<f64> {
    let snap = spectral::snapshot(fam, 0.0)?;
    let u = unitary_exp(&snap.blocks.a, t);
    let phase = C64::from_polar(1.0, -t * snap.mu);
    let n = fam.dim();
    let phase_mat = CMatrix::identity(n, n) * phase;
    Ok(diff_on_pmu0(&u, &phase_mat, snap.p_mu.as_matrix()))
}

/// Evaluate all four difference norms from an integrated set.
pub fn lhs_errors(fam: &GradedFamily, props: &PropagatorSet) -> Result<LhsErrors> {
    let p_mu0 = spectral::snapshot(fam, 0.0)?.p_mu.as_matrix().clone();
    let u = props.require(Kind::U)?.at_end();
    let up = props.require(Kind::UPerpPrime)?.at_end();
    let vad = props.require(Kind::VAd)?.at_end();
    Ok(LhsErrors {
        main: diff_on_pmu0(u, vad, &p_mu0),
        tunnel: diff_on_pmu0(u, up, &p_mu0),
        adiab: diff_on_pmu0(up, vad, &p_mu0),
        static_: static_lhs(fam, props.t)?,
    })
}

/// Per-grid-point difference curves for plotting/CSV export.
pub fn lhs_curves(fam: &GradedFamily, props: &PropagatorSet) -> Result<Vec<(f64, f64, f64, f64)>> {
    let p_mu0 = spectral::snapshot(fam, 0.0)?.p_mu.as_matrix().clone();
    let u = props.require(Kind::U)?;
    let up = props.require(Kind::UPerpPrime)?;
    let vad = props.require(Kind::VAd)?;
    let mut out = Vec::with_capacity(props.s_grid.len());
    for (i, &s) in props.s_grid.iter().enumerate() {
        out.push((
            s,
            diff_on_pmu0(&u.unitaries[i], &vad.unitaries[i], &p_mu0),
            diff_on_pmu0(&u.unitaries[i], &up.unitaries[i], &p_mu0),
            diff_on_pmu0(&up.unitaries[i], &vad.unitaries[i], &p_mu0),
        ));
    }
    Ok(out)
}
