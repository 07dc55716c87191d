//! Assembles every right-hand side — folk baseline, main theorem (B, C, eta,
//! c), tunneling and local-adiabatic pieces, the time-independent bound, and
//! the stoquastic corollary with its balance / min-cut machinery — and
//! compares them against measured evolution errors.

use std::collections::VecDeque;
use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graded::{GradedFamily, Grading};
use crate::operator::{op_norm, CMatrix, HermitianMatrix, Tolerances, C64};
use crate::propagator::{self, Kind, LhsErrors};
use crate::resolvent::over;
use crate::spectral;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_MAX_CUT_DIM: usize = 16;

/// Which matrix feeds the row-sum constant `Q`: the full operator (default)
/// or only its block-diagonal part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum QMatrix {
    Full,
    Block,
}

/// Scalar inputs to every bound, tabulated at one grid point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub s: f64,
    /// Cheeger ratio of the ground state across the cut.
    pub h: f64,
    /// Global spectral gap.
    pub gamma: f64,
    /// Spectral spread.
    pub kappa: f64,
    #[serde(with = "crate::spectral::inf_as_null")]
    pub gamma_s: f64,
    #[serde(with = "crate::spectral::inf_as_null")]
    pub gamma_sbar: f64,
    /// Realized coupling ratio `|Delta| / min{Gamma_S, Gamma_Sbar}`.
    pub c: f64,
    /// `1 - |Delta_perp| / min{Gamma_S, Gamma_Sbar}`.
    pub eta: f64,
    pub delta_norm: f64,
    pub delta_perp_norm: f64,
    pub delta_perp_dot_norm: f64,
    pub hs_dot: f64,
    pub hsbar_dot: f64,
    pub hs_ddot: f64,
    /// `|A'(s)|`, the folk baseline numerator.
    pub a_dot_norm: f64,
    /// Max off-diagonal absolute row sum of the chosen Q matrix.
    pub q: f64,
    /// Whether a diagonal gauge makes every off-diagonal real nonpositive.
    pub balanced: bool,
    /// `sqrt(gamma (2Q + gamma))`.
    pub gamma_tilde: f64,
}

fn sweep_point(fam: &GradedFamily, s: f64, q_matrix: QMatrix) -> Result<SweepPoint> {
    let snap = spectral::snapshot(fam, s)?;
    let d = fam.derivatives(s);
    let (p_mu_dot, p_mubar_dot) = spectral::first_derivatives(fam, s)?;
    let m_dot = &p_mu_dot + &p_mubar_dot;
    let m_perp = snap.m_perp.as_matrix();
    let delta = snap.blocks.delta.matrix();
    let delta_dot = d.delta_dot.matrix();
    let delta_perp_dot =
        -(&m_dot) * delta * m_perp + m_perp * delta_dot * m_perp - m_perp * delta * &m_dot;

    let min_gap = snap.min_local_gap();
    let delta_perp_norm = op_norm(snap.delta_perp.matrix());
    let eta = if min_gap.is_infinite() {
        1.0
    } else {
        1.0 - delta_perp_norm / min_gap
    };

    let (balanced, _, _) = balance_and_gamma_tilde(&snap.blocks.a);
    let q = match q_matrix {
        QMatrix::Full => off_diag_row_sum(&snap.blocks.a),
        QMatrix::Block => off_diag_row_sum(&(&snap.blocks.h_s + &snap.blocks.h_sbar)),
    };
    let gamma_tilde = (snap.gamma * (2.0 * q + snap.gamma)).sqrt();

    Ok(SweepPoint {
        s,
        h: snap.h,
        gamma: snap.gamma,
        kappa: snap.kappa,
        gamma_s: snap.gamma_s,
        gamma_sbar: snap.gamma_sbar,
        c: snap.c_ratio(),
        eta,
        delta_norm: snap.delta_norm,
        delta_perp_norm,
        delta_perp_dot_norm: op_norm(&delta_perp_dot),
        hs_dot: d.h_s_dot.norm(),
        hsbar_dot: d.h_sbar_dot.norm(),
        hs_ddot: d.h_s_ddot.norm(),
        a_dot_norm: op_norm(&(d.h_dot.matrix() + d.delta_dot.matrix())),
        q,
        balanced,
        gamma_tilde,
    })
}

/// Tabulate bound inputs over a grid of schedule points.
pub fn sweep(fam: &GradedFamily, s_grid: &[f64], q_matrix: QMatrix) -> Result<Vec<SweepPoint>> {
    s_grid.iter().map(|&s| sweep_point(fam, s, q_matrix)).collect()
}

/// Which spread ratio sits inside `B`: the theorem uses `h` with
/// `eps (1 + sqrt(kappa/h))`; the stoquastic corollary substitutes
/// `gamma_tilde` with `eps (1 + sqrt(2 kappa / gamma_tilde))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundVariant {
    Theorem,
    Stoquastic,
}

impl BoundVariant {
    fn spread(self, p: &SweepPoint) -> f64 {
        match self {
            BoundVariant::Theorem => p.h.max(0.0),
            BoundVariant::Stoquastic => p.gamma_tilde,
        }
    }

    fn eps_ratio(self) -> f64 {
        match self {
            BoundVariant::Theorem => 1.0,
            BoundVariant::Stoquastic => 2.0,
        }
    }
}

/// `B(x)` in its finite convention (the `eps sqrt(rho kappa / x)` piece is
/// dropped at `x = 0`) together with the product `x B(x)`, recomposed as
/// `x (1 + ... + eps) + eps sqrt(rho kappa x)` so it stays continuous as the
/// spread ratio vanishes.
fn b_parts(p: &SweepPoint, eps: f64, variant: BoundVariant) -> (f64, f64) {
    let x = variant.spread(p);
    let rho = variant.eps_ratio();
    let denom = (1.0 - p.c) * p.gamma_s.min(p.gamma_sbar);
    let t1 = (2.0 * over(x, denom)).sqrt();
    let t2 = (2.0 * over(p.kappa, denom)).sqrt();
    let finite = 1.0 + t1 + t2 + eps;
    let b = if x > 0.0 {
        finite + eps * (rho * p.kappa / x).sqrt()
    } else {
        finite
    };
    let xb = x * finite + eps * (rho * p.kappa * x).sqrt();
    (b, xb)
}

/// The adiabatic constant `C(s)` in its canonical ten-coefficient form.
fn c_constant(p: &SweepPoint) -> f64 {
    let gs2 = p.gamma_s * p.gamma_s;
    let gs3 = gs2 * p.gamma_s;
    2.0 * over(p.hs_dot, gs2)
        + over(p.hs_ddot, gs2)
        + 10.0 * over(p.hs_dot * p.hs_dot, gs3)
        + over(p.hs_dot, gs2) / p.eta * coupling_factor(p)
}

/// The bracketed coupling factor shared by `C` and the `Fdot` bound.
fn coupling_factor(p: &SweepPoint) -> f64 {
    let gs2 = p.gamma_s * p.gamma_s;
    let gsb2 = p.gamma_sbar * p.gamma_sbar;
    over(p.delta_perp_dot_norm, p.gamma_s.min(p.gamma_sbar))
        + 4.0
            * p.delta_perp_norm
            * over(p.hs_dot, gs2).max(over(2.0 * p.hsbar_dot + p.hs_dot, gsb2))
}

/// Proof-level restatements of `C` tracked alongside the canonical form.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProofVariants {
    /// `C` with the nine-coefficient velocity term from the per-piece sums.
    pub c_nine_coefficient_max: f64,
    /// `C` with the coupling factor outside the extra `1/eta`.
    pub c_single_eta_max: f64,
    /// The four-piece `(d/ds F) P_mu` norm bound.
    pub fdot_lemma_max: f64,
}

fn proof_variants(points: &[SweepPoint]) -> ProofVariants {
    let mut nine = 0.0_f64;
    let mut single = 0.0_f64;
    let mut fdot = 0.0_f64;
    for p in points {
        let gs2 = p.gamma_s * p.gamma_s;
        let gs3 = gs2 * p.gamma_s;
        let vel = over(p.hs_dot * p.hs_dot, gs3);
        let base = 2.0 * over(p.hs_dot, gs2) + over(p.hs_ddot, gs2);
        nine = nine.max(base + 9.0 * vel + over(p.hs_dot, gs2) / p.eta * coupling_factor(p));
        single = single.max(base + 10.0 * vel + over(p.hs_dot, gs2) * coupling_factor(p));
        fdot = fdot.max(
            over(p.hs_dot, gs2) / (p.eta * p.eta) * coupling_factor(p)
                + 4.0 / p.eta * vel
                + (over(p.hs_ddot, gs2) + 4.0 * vel) / p.eta
                + vel / p.eta,
        );
    }
    ProofVariants {
        c_nine_coefficient_max: nine,
        c_single_eta_max: single,
        fdot_lemma_max: fdot,
    }
}

/// Sweep maxima entering the bound, composed once per family.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Constants {
    /// `max_s B(s)` (finite convention at vanishing Cheeger ratio).
    pub b: f64,
    /// `max_s C(s)`.
    pub c: f64,
    pub eta_min: f64,
    pub c_ratio_max: f64,
    /// `max_s h(s) B(s)` via the continuous recomposition.
    pub hb_max: f64,
    /// `max_s C(s) / eta(s)`.
    pub c_over_eta_max: f64,
}

/// Compose the theorem constants from a tabulated sweep; rejects `c >= 1`.
pub fn constants_b_c(points: &[SweepPoint], eps: f64) -> Result<Constants> {
    let mut out = Constants {
        b: 0.0,
        c: 0.0,
        eta_min: f64::INFINITY,
        c_ratio_max: 0.0,
        hb_max: 0.0,
        c_over_eta_max: 0.0,
    };
    for p in points {
        if p.c >= 1.0 {
            return Err(Error::CNotBelowOne { c: p.c });
        }
        let (b, xb) = b_parts(p, eps, BoundVariant::Theorem);
        let c_s = c_constant(p);
        out.b = out.b.max(b);
        out.c = out.c.max(c_s);
        out.eta_min = out.eta_min.min(p.eta);
        out.c_ratio_max = out.c_ratio_max.max(p.c);
        out.hb_max = out.hb_max.max(xb);
        out.c_over_eta_max = out.c_over_eta_max.max(c_s / p.eta);
    }
    Ok(out)
}

/// The three timescale-dependent right-hand sides for one variant:
/// pointwise-maximized total, tunneling piece, and adiabatic piece.
pub fn composed_rhs(points: &[SweepPoint], eps: f64, t: f64, variant: BoundVariant) -> (f64, f64, f64) {
    let mut main = 0.0_f64;
    let mut xb_max = 0.0_f64;
    let mut adiab = 0.0_f64;
    for p in points {
        let (_, xb) = b_parts(p, eps, variant);
        let c_over_eta = c_constant(p) / p.eta;
        main = main.max(2.0 * (xb * t).sqrt() + c_over_eta / t);
        xb_max = xb_max.max(xb);
        adiab = adiab.max(c_over_eta / t);
    }
    (main, 2.0 * (xb_max * t).sqrt(), adiab)
}

/// Minimizer of `T -> 2 sqrt(aT) + b/T`, from setting the derivative to zero.
pub fn t_star(a: f64, b: f64) -> Option<f64> {
    if a > 0.0 && b > 0.0 {
        Some((b / a.sqrt()).powf(2.0 / 3.0))
    } else {
        None
    }
}

fn off_diag_row_sum(a: &HermitianMatrix) -> f64 {
    let n = a.dim();
    let m = a.matrix();
    (0..n)
        .map(|i| (0..n).filter(|&j| j != i).map(|j| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn is_balanced(a: &HermitianMatrix) -> bool {
    let n = a.dim();
    let m = a.matrix();
    let scale = op_norm(m).max(1.0);
    let edge_tol = 1e-12 * scale;
    let check_tol = 1e-9 * scale;
    // propagate a diagonal phase gauge over a spanning forest of the
    // off-diagonal support graph, then verify every remaining edge
    let mut theta: Vec<Option<f64>> = vec![None; n];
    for root in 0..n {
        if theta[root].is_some() {
            continue;
        }
        theta[root] = Some(0.0);
        let mut queue = VecDeque::from([root]);
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                if j == i || m[(i, j)].norm() <= edge_tol {
                    continue;
                }
                let ti = theta[i].expect("visited nodes carry a phase");
                match theta[j] {
                    None => {
                        // want e^{i(theta_i - theta_j)} a_ij = -|a_ij|
                        theta[j] = Some(ti - PI + m[(i, j)].arg());
                        queue.push_back(j);
                    }
                    Some(tj) => {
                        let gauged = C64::from_polar(1.0, ti - tj) * m[(i, j)];
                        if (gauged + C64::new(m[(i, j)].norm(), 0.0)).norm() > check_tol {
                            return false;
                        }
                    }
                }
            }
        }
    }
    true
}

/// Frustration test, row-sum constant, and effective spread for one matrix:
/// `(balanced, Q, sqrt(gamma (2Q + gamma)))` with `gamma` its spectral gap.
pub fn balance_and_gamma_tilde(a: &HermitianMatrix) -> (bool, f64, f64) {
    let balanced = is_balanced(a);
    let q = off_diag_row_sum(a);
    let es = a.eigh();
    let gamma = if a.dim() > 1 {
        es.values[1] - es.values[0]
    } else {
        0.0
    };
    (balanced, q, (gamma * (2.0 * q + gamma)).sqrt())
}

/// Outcome of the exhaustive cut search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CutSearchResult {
    pub best_cut: Vec<usize>,
    /// `max_s h` of the best cut — the smallest such value over all cuts.
    pub h_min: f64,
    pub evaluated_cuts: usize,
    /// Balance verdict of every supplied matrix.
    pub balanced: bool,
    /// `max_s Q`.
    pub q: f64,
    /// `min_s gamma_tilde`.
    pub gamma_tilde: f64,
}

fn off_block(a: &HermitianMatrix, in_s: &[bool]) -> HermitianMatrix {
    let n = a.dim();
    HermitianMatrix::from_hermitian_parts(CMatrix::from_fn(n, n, |i, j| {
        if in_s[i] != in_s[j] {
            a.matrix()[(i, j)]
        } else {
            C64::new(0.0, 0.0)
        }
    }))
}

/// `max_s h` of one explicit cut over the supplied matrices.
pub fn cut_h(mats: &[HermitianMatrix], cut: &[usize]) -> Result<f64> {
    let first = mats
        .first()
        .ok_or_else(|| Error::Config("cut evaluation needs at least one matrix".into()))?;
    let n = first.dim();
    let grading = Grading::new(n, cut.to_vec())?;
    let mut in_s = vec![false; n];
    for &i in grading.s_indices() {
        in_s[i] = true;
    }
    let tols = Tolerances::default();
    let mut h = 0.0_f64;
    for a in mats {
        let es = a.eigh();
        let gap = es.values[1] - es.values[0];
        let tol = tols.cluster(op_norm(a.matrix()));
        if gap <= tol {
            return Err(Error::DegenerateGroundState { gap, tol });
        }
        let v = DVector::from_column_slice(es.vectors.column(0).as_slice());
        h = h.max(spectral::cheeger_ratio(&v, &off_block(a, &in_s), &grading, &tols)?);
    }
    Ok(h)
}

/// Balance verdict, `max Q`, and `min gamma_tilde` across a set of matrices.
pub fn matrices_balance(mats: &[HermitianMatrix]) -> (bool, f64, f64) {
    let mut balanced = true;
    let mut q = 0.0_f64;
    let mut gamma_tilde = f64::INFINITY;
    for a in mats {
        let (b, q_s, gt) = balance_and_gamma_tilde(a);
        balanced &= b;
        q = q.max(q_s);
        gamma_tilde = gamma_tilde.min(gt);
    }
    (balanced, q, gamma_tilde)
}

/// Exhaustive search for the cut minimizing `max_s h_S(s)` over nonempty
/// proper subsets up to complement symmetry (index 0 pinned to `S`). Ties go
/// to the smallest cut, then lexicographic order.
pub fn min_cut(mats: &[HermitianMatrix], max_dim: usize) -> Result<CutSearchResult> {
    let first = mats
        .first()
        .ok_or_else(|| Error::Config("cut search needs at least one matrix".into()))?;
    let n = first.dim();
    if n > max_dim {
        return Err(Error::CutSearchTooLarge { dim: n, max_dim });
    }
    if n < 2 {
        return Err(Error::Config("cut search needs dimension at least 2".into()));
    }

    let tols = Tolerances::default();
    let mut grounds: Vec<DVector<C64>> = Vec::with_capacity(mats.len());
    let mut balanced = true;
    let mut q = 0.0_f64;
    let mut gamma_tilde = f64::INFINITY;
    for a in mats {
        let es = a.eigh();
        let gap = es.values[1] - es.values[0];
        let tol = tols.cluster(op_norm(a.matrix()));
        if gap <= tol {
            return Err(Error::DegenerateGroundState { gap, tol });
        }
        grounds.push(DVector::from_column_slice(es.vectors.column(0).as_slice()));
        let (b_s, q_s, gt_s) = balance_and_gamma_tilde(a);
        balanced &= b_s;
        q = q.max(q_s);
        gamma_tilde = gamma_tilde.min(gt_s);
    }

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut evaluated = 0usize;
    for mask in 0u64..(1u64 << (n - 1)) {
        let mut cut = vec![0usize];
        for i in 0..n - 1 {
            if mask & (1 << i) != 0 {
                cut.push(i + 1);
            }
        }
        if cut.len() == n {
            continue;
        }
        evaluated += 1;

        let mut in_s = vec![false; n];
        for &i in &cut {
            in_s[i] = true;
        }
        let grading = Grading::new(n, cut.clone())?;
        let mut h_cut = 0.0_f64;
        for (a, v) in mats.iter().zip(&grounds) {
            let delta = off_block(a, &in_s);
            h_cut = h_cut.max(spectral::cheeger_ratio(v, &delta, &grading, &tols)?);
        }
        let better = match &best {
            None => true,
            Some((h, c)) => {
                h_cut < *h || (h_cut == *h && (cut.len(), &cut) < (c.len(), c))
            }
        };
        if better {
            best = Some((h_cut, cut));
        }
    }

    let (h_min, best_cut) = best.expect("n >= 2 yields at least one cut");
    Ok(CutSearchResult {
        best_cut,
        h_min,
        evaluated_cuts: evaluated,
        balanced,
        q,
        gamma_tilde,
    })
}

/// Applicability and margins of the stoquastic corollary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoqInfo {
    pub applicable: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<String>,
    pub q_max: f64,
    pub gamma_tilde_min: f64,
    /// `min_s (gamma_tilde - h)`; nonnegative whenever the corollary applies.
    pub gamma_tilde_margin: f64,
}

fn stoq_info(points: &[SweepPoint], assumptions_hold: bool) -> StoqInfo {
    let balanced = points.iter().all(|p| p.balanced);
    let q_max = points.iter().map(|p| p.q).fold(0.0, f64::max);
    let gamma_tilde_min = points.iter().map(|p| p.gamma_tilde).fold(f64::INFINITY, f64::min);
    let gamma_tilde_margin = points
        .iter()
        .map(|p| p.gamma_tilde - p.h)
        .fold(f64::INFINITY, f64::min);
    let reason = if !balanced {
        Some("family is unbalanced at a sampled point".into())
    } else if !assumptions_hold {
        Some("gap/coupling assumptions fail at a sampled point".into())
    } else {
        None
    };
    StoqInfo {
        applicable: reason.is_none(),
        reason,
        q_max,
        gamma_tilde_min,
        gamma_tilde_margin,
    }
}

/// Bound-minus-measurement for each comparable pair; negative values are the
/// falsification signal.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Margins {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub main: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tunnel: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub adiab: Option<f64>,
    pub static_: f64,
}

/// Everything the verdict needs, serialized as one schema-versioned record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub schema: u32,
    pub family: String,
    pub t: f64,
    /// Gap and coupling assumptions hold at every sampled point.
    pub assumptions_hold: bool,
    pub h_max: f64,
    #[serde(with = "crate::spectral::inf_as_null")]
    pub gamma_s_min: f64,
    #[serde(with = "crate::spectral::inf_as_null")]
    pub gamma_sbar_min: f64,
    pub kappa_max: f64,
    pub c_max: f64,
    pub eta_min: f64,
    pub eps_t: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub constants: Option<Constants>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rhs_main: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rhs_tunnel: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rhs_adiab: Option<f64>,
    pub rhs_static: f64,
    pub rhs_folk: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rhs_stoq: Option<f64>,
    pub stoq: StoqInfo,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lhs: Option<LhsErrors>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub margins: Option<Margins>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub crossover_t_star: Option<f64>,
    pub step_error: f64,
    pub proof_variants: ProofVariants,
}

/// Knobs for one report run.
#[derive(Debug, Clone)]
pub struct ReportOptions {
    pub family_id: String,
    pub tol_step: f64,
    /// Skip the adiabatic reference and the measured-error comparison.
    pub bounds_only: bool,
    pub q_matrix: QMatrix,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            family_id: "unnamed".into(),
            tol_step: Tolerances::default().step,
            bounds_only: false,
            q_matrix: QMatrix::Full,
        }
    }
}

/// Assemble the full report at one timescale: sweep the constants, integrate
/// the needed propagators, measure leakage, compose every right-hand side.
pub fn bound_report(fam: &GradedFamily, t: f64, opts: &ReportOptions) -> Result<BoundReport> {
    let grid = propagator::report_grid();
    let points = sweep(fam, &grid, opts.q_matrix)?;

    let kinds: &[Kind] = if opts.bounds_only {
        &[Kind::U, Kind::UPerpPrime]
    } else {
        &[Kind::U, Kind::UPerpPrime, Kind::VAd]
    };
    let props = propagator::evolve(fam, t, kinds, opts.tol_step)?;
    let eps = propagator::epsilon_t(fam, &props)?.value;
    let lhs = if opts.bounds_only {
        None
    } else {
        Some(propagator::lhs_errors(fam, &props)?)
    };

    assemble_report(t, opts, &points, eps, lhs, props.step_error_estimate())
}

/// Pure composition step, separated so reports can be rebuilt from stored
/// sweeps without re-integrating.
pub fn assemble_report(
    t: f64,
    opts: &ReportOptions,
    points: &[SweepPoint],
    eps: f64,
    lhs: Option<LhsErrors>,
    step_error: f64,
) -> Result<BoundReport> {
    let assumptions_hold = points.iter().all(|p| p.c < 1.0 && p.eta > 0.0);

    let h_max = points.iter().map(|p| p.h).fold(0.0, f64::max);
    let gamma_s_min = points.iter().map(|p| p.gamma_s).fold(f64::INFINITY, f64::min);
    let gamma_sbar_min = points.iter().map(|p| p.gamma_sbar).fold(f64::INFINITY, f64::min);
    let kappa_max = points.iter().map(|p| p.kappa).fold(0.0, f64::max);
    let c_max = points.iter().map(|p| p.c).fold(0.0, f64::max);
    let eta_min = points.iter().map(|p| p.eta).fold(f64::INFINITY, f64::min);

    let rhs_static = 2.0 * (h_max * t).sqrt();
    let rhs_folk = points
        .iter()
        .map(|p| p.a_dot_norm / (p.gamma * p.gamma))
        .fold(0.0, f64::max)
        / t;

    let stoq = stoq_info(points, assumptions_hold);

    let (constants, rhs_main, rhs_tunnel, rhs_adiab, rhs_stoq, crossover_t_star) =
        if assumptions_hold {
            let consts = constants_b_c(points, eps)?;
            let (main, tunnel, adiab) = composed_rhs(points, eps, t, BoundVariant::Theorem);
            let rhs_stoq = stoq.applicable.then(|| {
                composed_rhs(points, eps, t, BoundVariant::Stoquastic).0
            });
            let cross = t_star(consts.hb_max, consts.c_over_eta_max);
            (Some(consts), Some(main), Some(tunnel), Some(adiab), rhs_stoq, cross)
        } else {
            (None, None, None, None, None, None)
        };

    let margins = lhs.map(|l| Margins {
        main: rhs_main.map(|r| r - l.main),
        tunnel: rhs_tunnel.map(|r| r - l.tunnel),
        adiab: rhs_adiab.map(|r| r - l.adiab),
        static_: rhs_static - l.static_,
    });

    Ok(BoundReport {
        schema: SCHEMA_VERSION,
        family: opts.family_id.clone(),
        t,
        assumptions_hold,
        h_max,
        gamma_s_min,
        gamma_sbar_min,
        kappa_max,
        c_max,
        eta_min,
        eps_t: eps,
        constants,
        rhs_main,
        rhs_tunnel,
        rhs_adiab,
        rhs_static,
        rhs_folk,
        rhs_stoq,
        stoq,
        lhs,
        margins,
        crossover_t_star,
        step_error,
        proof_variants: proof_variants(points),
    })
}

fn csv_field(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

/// RFC-4180 CSV of the per-point curves: inputs, pointwise bound pieces, and
/// (when measured) the evolution-error curves on the same grid.
pub fn curves_csv(
    points: &[SweepPoint],
    eps: f64,
    t: f64,
    lhs_curves: Option<&[(f64, f64, f64, f64)]>,
) -> String {
    let mut out = String::from(
        "s,h,gamma_s,gamma_sbar,gamma,kappa,c,eta,gamma_tilde,\
         rhs_tunnel_point,rhs_adiab_point,rhs_main_point,lhs_main,lhs_tunnel,lhs_adiab\r\n",
    );
    for (i, p) in points.iter().enumerate() {
        let (_, xb) = b_parts(p, eps, BoundVariant::Theorem);
        let tunnel = 2.0 * (xb * t).sqrt();
        let adiab = c_constant(p) / p.eta / t;
        let (lm, lt, la) = match lhs_curves.and_then(|c| c.get(i)) {
            Some(&(_, m, tn, a)) => (csv_field(m), csv_field(tn), csv_field(a)),
            None => (String::new(), String::new(), String::new()),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\r\n",
            csv_field(p.s),
            csv_field(p.h),
            csv_field(p.gamma_s),
            csv_field(p.gamma_sbar),
            csv_field(p.gamma),
            csv_field(p.kappa),
            csv_field(p.c),
            csv_field(p.eta),
            csv_field(p.gamma_tilde),
            csv_field(tunnel),
            csv_field(adiab),
            csv_field(tunnel + adiab),
            lm,
            lt,
            la,
        ));
    }
    out
}
