//! The grading `H = S ⊕ S̄`, schedule families `(H(s), Δ(s))` with exact first
//! and second derivatives, block extraction, and validation of the structural
//! assumptions every bound relies on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{op_norm, CMatrix, HermitianMatrix, Projector, Tolerances};
use crate::spectral;

/// Fixed index bipartition of the coordinate basis. `S` is nonempty and
/// proper; the complement is derived.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grading {
    dim: usize,
    s_indices: Vec<usize>,
    sbar_indices: Vec<usize>,
}

impl Grading {
    pub fn new(dim: usize, mut s_indices: Vec<usize>) -> Result<Self> {
        s_indices.sort_unstable();
        s_indices.dedup();
        if s_indices.is_empty() {
            return Err(Error::InvalidGrading("S is empty".into()));
        }
        if s_indices.len() >= dim {
            return Err(Error::InvalidGrading(format!(
                "S has {} indices but must be a proper subset of 0..{dim}",
                s_indices.len()
            )));
        }
        if let Some(&bad) = s_indices.iter().find(|&&i| i >= dim) {
            return Err(Error::InvalidGrading(format!(
                "index {bad} out of range 0..{dim}"
            )));
        }
        let sbar_indices = (0..dim).filter(|i| !s_indices.contains(i)).collect();
        Ok(Grading {
            dim,
            s_indices,
            sbar_indices,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn s_indices(&self) -> &[usize] {
        &self.s_indices
    }

    pub fn sbar_indices(&self) -> &[usize] {
        &self.sbar_indices
    }

    pub fn p_s(&self) -> Projector {
        Projector::coordinate(self.dim, &self.s_indices)
    }

    pub fn p_sbar(&self) -> Projector {
        Projector::coordinate(self.dim, &self.sbar_indices)
    }
}

/// A twice continuously differentiable matrix-valued schedule on `[0, 1]`
/// carrying analytic derivatives.
#[derive(Debug, Clone)]
pub enum Schedule {
    /// `(1-s) M0 + s M1`.
    Linear {
        m0: HermitianMatrix,
        m1: HermitianMatrix,
    },
    /// `C0 + C1 s + C2 s^2 + C3 s^3`.
    Cubic { coeffs: Box<[HermitianMatrix; 4]> },
    /// Natural cubic spline through tabulated knot matrices.
    Spline(SplineSchedule),
}

impl Schedule {
    pub fn constant(m: HermitianMatrix) -> Self {
        Schedule::Linear {
            m0: m.clone(),
            m1: m,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Schedule::Linear { m0, .. } => m0.dim(),
            Schedule::Cubic { coeffs } => coeffs[0].dim(),
            Schedule::Spline(sp) => sp.values[0].dim(),
        }
    }

    pub fn value(&self, s: f64) -> HermitianMatrix {
        match self {
            Schedule::Linear { m0, m1 } => HermitianMatrix::from_hermitian_parts(
                m0.matrix().scale(1.0 - s) + m1.matrix().scale(s),
            ),
            Schedule::Cubic { coeffs } => {
                let mut acc = coeffs[3].matrix().clone();
                for k in (0..3).rev() {
                    acc = acc.scale(s) + coeffs[k].matrix();
                }
                HermitianMatrix::from_hermitian_parts(acc)
            }
            Schedule::Spline(sp) => sp.eval(s, 0),
        }
    }

    pub fn d1(&self, s: f64) -> HermitianMatrix {
        match self {
            Schedule::Linear { m0, m1 } => m1 - m0,
            Schedule::Cubic { coeffs } => {
                // C1 + 2 C2 s + 3 C3 s^2
                let acc = coeffs[1].matrix()
                    + coeffs[2].matrix().scale(2.0 * s)
                    + coeffs[3].matrix().scale(3.0 * s * s);
                HermitianMatrix::from_hermitian_parts(acc)
            }
            Schedule::Spline(sp) => sp.eval(s, 1),
        }
    }

    pub fn d2(&self, s: f64) -> HermitianMatrix {
        match self {
            Schedule::Linear { m0, .. } => HermitianMatrix::zeros(m0.dim()),
            Schedule::Cubic { coeffs } => {
                let acc = coeffs[2].matrix().scale(2.0) + coeffs[3].matrix().scale(6.0 * s);
                HermitianMatrix::from_hermitian_parts(acc)
            }
            Schedule::Spline(sp) => sp.eval(s, 2),
        }
    }
}

/// Natural cubic spline with matrix knots. The tridiagonal moment system is
/// entrywise independent with shared coefficients, so it is solved once with
/// matrix-valued unknowns.
#[derive(Debug, Clone)]
pub struct SplineSchedule {
    knots: Vec<f64>,
    values: Vec<HermitianMatrix>,
    /// Second-derivative matrices at the knots (natural: zero at the ends).
    moments: Vec<CMatrix>,
}

impl SplineSchedule {
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[HermitianMatrix] {
        &self.values
    }

    pub fn new(knots: Vec<f64>, values: Vec<HermitianMatrix>) -> Result<Self> {
        let n = knots.len();
        if n < 2 || values.len() != n {
            return Err(Error::Config(
                "spline needs at least two knots with one matrix per knot".into(),
            ));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("spline knots must be strictly increasing".into()));
        }
        let dim = values[0].dim();
        if values.iter().any(|m| m.dim() != dim) {
            return Err(Error::DimMismatch("spline knot matrices differ in size".into()));
        }

        // Thomas algorithm for the natural-spline moment system.
        let mut moments = vec![CMatrix::zeros(dim, dim); n];
        if n > 2 {
            let m = n - 2;
            let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
            let mut diag = vec![0.0; m];
            let mut upper = vec![0.0; m];
            let mut rhs: Vec<CMatrix> = Vec::with_capacity(m);
            for i in 0..m {
                diag[i] = 2.0 * (h[i] + h[i + 1]);
                upper[i] = h[i + 1];
                let d1 = (values[i + 2].matrix() - values[i + 1].matrix()).scale(1.0 / h[i + 1]);
                let d0 = (values[i + 1].matrix() - values[i].matrix()).scale(1.0 / h[i]);
                rhs.push((d1 - d0).scale(6.0));
            }
            for i in 1..m {
                let w = h[i] / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                let prev = rhs[i - 1].clone();
                rhs[i] -= prev.scale(w);
            }
            moments[m] = rhs[m - 1].scale(1.0 / diag[m - 1]);
            for i in (0..m - 1).rev() {
                let next = moments[i + 2].clone();
                moments[i + 1] = (rhs[i].clone() - next.scale(upper[i])).scale(1.0 / diag[i]);
            }
        }
        Ok(SplineSchedule {
            knots,
            values,
            moments,
        })
    }

    fn segment(&self, s: f64) -> usize {
        let n = self.knots.len();
        match self.knots.binary_search_by(|k| k.total_cmp(&s)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    fn eval(&self, s: f64, order: u8) -> HermitianMatrix {
        let i = self.segment(s);
        let (s0, s1) = (self.knots[i], self.knots[i + 1]);
        let h = s1 - s0;
        let a = (s1 - s) / h;
        let b = (s - s0) / h;
        let y0 = self.values[i].matrix();
        let y1 = self.values[i + 1].matrix();
        let m0 = &self.moments[i];
        let m1 = &self.moments[i + 1];
        let mat = match order {
            0 => {
                y0.scale(a)
                    + y1.scale(b)
                    + m0.scale((a * a * a - a) * h * h / 6.0)
                    + m1.scale((b * b * b - b) * h * h / 6.0)
            }
            1 => {
                (y1 - y0).scale(1.0 / h)
                    + m0.scale(-(3.0 * a * a - 1.0) * h / 6.0)
                    + m1.scale((3.0 * b * b - 1.0) * h / 6.0)
            }
            _ => m0.scale(a) + m1.scale(b),
        };
        HermitianMatrix::from_hermitian_parts(mat)
    }
}

/// Block decomposition of `A(s)` at a point: `A = H_S + H_S̄ + Δ` exactly.
#[derive(Debug, Clone)]
pub struct Blocks {
    pub h_s: HermitianMatrix,
    pub h_sbar: HermitianMatrix,
    pub delta: HermitianMatrix,
    pub a: HermitianMatrix,
}

/// Analytic schedule derivatives at a point.
#[derive(Debug, Clone)]
pub struct Derivatives {
    pub h_dot: HermitianMatrix,
    pub h_ddot: HermitianMatrix,
    pub delta_dot: HermitianMatrix,
    pub h_s_dot: HermitianMatrix,
    pub h_sbar_dot: HermitianMatrix,
    pub h_s_ddot: HermitianMatrix,
}

/// A graded family `A(s) = H(s) + Δ(s)` with `H` block-diagonal and `Δ`
/// block-antidiagonal with respect to the grading.
#[derive(Debug, Clone)]
pub struct GradedFamily {
    grading: Grading,
    h_schedule: Schedule,
    delta_schedule: Schedule,
    tols: Tolerances,
}

impl GradedFamily {
    pub fn new(grading: Grading, h_schedule: Schedule, delta_schedule: Schedule) -> Result<Self> {
        Self::with_tols(grading, h_schedule, delta_schedule, Tolerances::default())
    }

    pub fn with_tols(
        grading: Grading,
        h_schedule: Schedule,
        delta_schedule: Schedule,
        tols: Tolerances,
    ) -> Result<Self> {
        if h_schedule.dim() != grading.dim() || delta_schedule.dim() != grading.dim() {
            return Err(Error::DimMismatch(format!(
                "schedules ({}, {}) do not match grading dimension {}",
                h_schedule.dim(),
                delta_schedule.dim(),
                grading.dim()
            )));
        }
        let fam = GradedFamily {
            grading,
            h_schedule,
            delta_schedule,
            tols,
        };
        // validate block structure on a sample grid; sub-tolerance violations
        // are repaired by the exact projector sandwich in blocks()
        for k in 0..=10 {
            fam.blocks(k as f64 / 10.0)?;
        }
        Ok(fam)
    }

    pub fn grading(&self) -> &Grading {
        &self.grading
    }

    pub fn dim(&self) -> usize {
        self.grading.dim()
    }

    pub fn tols(&self) -> &Tolerances {
        &self.tols
    }

    pub fn h_schedule(&self) -> &Schedule {
        &self.h_schedule
    }

    pub fn delta_schedule(&self) -> &Schedule {
        &self.delta_schedule
    }

    /// Extract `(H_S, H_S̄, Δ, A)` at `s`. The pieces are exact projector
    /// sandwiches, so they reassemble `A` bitwise and carry no off-block
    /// residue; violations of the declared structure beyond
    /// `block_rel * |A|` are errors.
    pub fn blocks(&self, s: f64) -> Result<Blocks> {
        let h = self.h_schedule.value(s);
        let delta_raw = self.delta_schedule.value(s);
        let ps = self.grading.p_s();
        let psbar = self.grading.p_sbar();

        let scale = op_norm(h.matrix()) + op_norm(delta_raw.matrix());
        let tol = self.tols.block_rel * scale.max(1.0);

        let h_off = ps.as_matrix() * h.matrix() * psbar.as_matrix();
        let off_norm = op_norm(&h_off);
        if off_norm > tol {
            return Err(Error::BlockStructure {
                which: format!("P_S H(s) P_Sbar at s={s}"),
                norm: off_norm,
                tol,
            });
        }
        let d_diag_s = ps.as_matrix() * delta_raw.matrix() * ps.as_matrix();
        let d_diag_sbar = psbar.as_matrix() * delta_raw.matrix() * psbar.as_matrix();
        let d_norm = op_norm(&d_diag_s).max(op_norm(&d_diag_sbar));
        if d_norm > tol {
            return Err(Error::BlockStructure {
                which: format!("block-diagonal part of Delta(s) at s={s}"),
                norm: d_norm,
                tol,
            });
        }

        let h_s = HermitianMatrix::from_hermitian_parts(ps.as_matrix() * h.matrix() * ps.as_matrix());
        let h_sbar =
            HermitianMatrix::from_hermitian_parts(psbar.as_matrix() * h.matrix() * psbar.as_matrix());
        let delta = HermitianMatrix::from_hermitian_parts(
            ps.as_matrix() * delta_raw.matrix() * psbar.as_matrix()
                + psbar.as_matrix() * delta_raw.matrix() * ps.as_matrix(),
        );
        let a = HermitianMatrix::from_hermitian_parts(
            h_s.matrix() + h_sbar.matrix() + delta.matrix(),
        );
        Ok(Blocks {
            h_s,
            h_sbar,
            delta,
            a,
        })
    }

    /// Analytic schedule derivatives at `s`, with the block pieces of `Ḣ`.
    pub fn derivatives(&self, s: f64) -> Derivatives {
        let h_dot = self.h_schedule.d1(s);
        let h_ddot = self.h_schedule.d2(s);
        let delta_dot = self.delta_schedule.d1(s);
        let ps = self.grading.p_s();
        let psbar = self.grading.p_sbar();
        let sandwich = |p: &Projector, m: &HermitianMatrix| {
            HermitianMatrix::from_hermitian_parts(p.as_matrix() * m.matrix() * p.as_matrix())
        };
        Derivatives {
            h_s_dot: sandwich(&ps, &h_dot),
            h_sbar_dot: sandwich(&psbar, &h_dot),
            h_s_ddot: sandwich(&ps, &h_ddot),
            h_dot,
            h_ddot,
            delta_dot,
        }
    }

    /// Strictly block-antidiagonal derivative of `Δ` (projector sandwich of
    /// the raw schedule derivative).
    pub fn delta_dot_antidiag(&self, s: f64) -> HermitianMatrix {
        let d = self.delta_schedule.d1(s);
        let ps = self.grading.p_s();
        let psbar = self.grading.p_sbar();
        HermitianMatrix::from_hermitian_parts(
            ps.as_matrix() * d.matrix() * psbar.as_matrix()
                + psbar.as_matrix() * d.matrix() * ps.as_matrix(),
        )
    }
}

/// Per-`s` record of the structural assumptions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionPoint {
    pub s: f64,
    /// `min{mu_1, mubar_1} > max{mu, mubar}`.
    pub assumption1: bool,
    /// `|Delta| <= c min{Gamma_S, Gamma_Sbar}` with `c <= 1 - h/min{..}`.
    pub assumption2: bool,
    /// Realized `c = |Delta| / min{Gamma_S, Gamma_Sbar}`.
    pub c: f64,
    pub c_limit_ok: bool,
    pub gamma_s: f64,
    pub gamma_sbar: f64,
    pub h: f64,
    /// Set when a block is one-dimensional and its local gap was treated as
    /// infinite.
    pub infinite_gap_flag: bool,
    /// `|P_S lambda_vec| > tol`: the ground state has support on S.
    pub support_on_s: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub points: Vec<AssumptionPoint>,
    pub all_hold: bool,
}

/// Check Assumptions 1 and 2 over an `s` grid.
pub fn check_assumptions(fam: &GradedFamily, s_grid: &[f64]) -> Result<AssumptionReport> {
    let mut points = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let snap = spectral::snapshot(fam, s)?;
        let min_gap = snap.min_local_gap();
        let c = if min_gap.is_infinite() {
            0.0
        } else {
            snap.delta_norm / min_gap
        };
        let c_limit = 1.0 - snap.h / min_gap; // h/inf -> 0
        let tol = fam.tols().ineq(snap.kappa);
        let assumption1 =
            snap.mu1.min(snap.mubar1) > snap.mu.max(snap.mubar) - tol;
        let c_limit_ok = c <= c_limit + tol;
        let assumption2 = c <= 1.0 + tol && c_limit_ok;
        points.push(AssumptionPoint {
            s,
            assumption1,
            assumption2,
            c,
            c_limit_ok,
            gamma_s: snap.gamma_s,
            gamma_sbar: snap.gamma_sbar,
            h: snap.h,
            infinite_gap_flag: snap.gamma_s.is_infinite() || snap.gamma_sbar.is_infinite(),
            support_on_s: snap.support_on_s,
        });
    }
    let all_hold = points.iter().all(|p| p.assumption1 && p.assumption2);
    Ok(AssumptionReport { points, all_hold })
}

// --- JSON wire format -------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct FamilyWire {
    grading: Vec<usize>,
    schedule: ScheduleWire,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind")]
enum ScheduleWire {
    #[serde(rename = "linear-interpolation")]
    Linear {
        #[serde(rename = "H0")]
        h0: HermitianMatrix,
        #[serde(rename = "H1")]
        h1: HermitianMatrix,
        #[serde(rename = "D0")]
        d0: HermitianMatrix,
        #[serde(rename = "D1")]
        d1: HermitianMatrix,
    },
    #[serde(rename = "cubic-polynomial")]
    Cubic {
        #[serde(rename = "H_coeffs")]
        h_coeffs: Vec<HermitianMatrix>,
        #[serde(rename = "D_coeffs")]
        d_coeffs: Vec<HermitianMatrix>,
    },
    #[serde(rename = "tabulated-spline")]
    Spline {
        knots: Vec<f64>,
        #[serde(rename = "H_values")]
        h_values: Vec<HermitianMatrix>,
        #[serde(rename = "D_values")]
        d_values: Vec<HermitianMatrix>,
    },
}

fn coeffs4(mut v: Vec<HermitianMatrix>, what: &str) -> Result<Box<[HermitianMatrix; 4]>> {
    if v.is_empty() || v.len() > 4 {
        return Err(Error::Config(format!(
            "{what} needs 1..=4 coefficient matrices, got {}",
            v.len()
        )));
    }
    let dim = v[0].dim();
    while v.len() < 4 {
        v.push(HermitianMatrix::zeros(dim));
    }
    let arr: [HermitianMatrix; 4] = v.try_into().expect("length checked");
    Ok(Box::new(arr))
}

/// Parse a family from its JSON description, enforcing all invariants.
pub fn family_from_json(text: &str) -> Result<GradedFamily> {
    let wire: FamilyWire =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("family JSON: {e}")))?;
    let (h_schedule, delta_schedule) = match wire.schedule {
        ScheduleWire::Linear { h0, h1, d0, d1 } => (
            Schedule::Linear { m0: h0, m1: h1 },
            Schedule::Linear { m0: d0, m1: d1 },
        ),
        ScheduleWire::Cubic { h_coeffs, d_coeffs } => (
            Schedule::Cubic {
                coeffs: coeffs4(h_coeffs, "H_coeffs")?,
            },
            Schedule::Cubic {
                coeffs: coeffs4(d_coeffs, "D_coeffs")?,
            },
        ),
        ScheduleWire::Spline {
            knots,
            h_values,
            d_values,
        } => (
            Schedule::Spline(SplineSchedule::new(knots.clone(), h_values)?),
            Schedule::Spline(SplineSchedule::new(knots, d_values)?),
        ),
    };
    let dim = h_schedule.dim();
    let grading = Grading::new(dim, wire.grading)?;
    GradedFamily::new(grading, h_schedule, delta_schedule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;
    use crate::operator::op_norm;

    #[test]
    fn grading_rejects_improper_sets() {
        assert!(Grading::new(4, vec![]).is_err());
        assert!(Grading::new(4, vec![0, 1, 2, 3]).is_err());
        assert!(Grading::new(4, vec![5]).is_err());
        let g = Grading::new(4, vec![2, 0]).unwrap();
        assert_eq!(g.s_indices(), &[0, 2]);
        assert_eq!(g.sbar_indices(), &[1, 3]);
    }

    #[test]
    fn blocks_zero_delta() {
        let fam = generators::diagonal_family(&[0.0, 1.0, 0.2, 1.2], &[0, 1]).unwrap();
        let b = fam.blocks(0.3).unwrap();
        assert_eq!(op_norm(b.delta.matrix()), 0.0);
        assert!(op_norm(&(b.a.matrix() - (b.h_s.matrix() + b.h_sbar.matrix()))) < 1e-15);
    }

    #[test]
    fn blocks_double_well_oracle() {
        // DW(delta) at s=0: H_S = diag(0,1) on S={0,1}, coupling -delta on (0,2)
        let fam = generators::double_well(0.05, 0.2).unwrap();
        let b = fam.blocks(0.0).unwrap();
        assert!((b.h_s.matrix()[(1, 1)].re - 1.0).abs() < 1e-14);
        assert!((b.delta.matrix()[(0, 2)].re + 0.05).abs() < 1e-14);
        assert!((b.delta.matrix()[(2, 0)].re + 0.05).abs() < 1e-14);
        // exact reassembly
        let sum = b.h_s.matrix() + b.h_sbar.matrix() + b.delta.matrix();
        assert_eq!(op_norm(&(b.a.matrix() - sum)), 0.0);
    }

    #[test]
    fn linear_derivatives() {
        let fam = generators::double_well(0.05, 0.2).unwrap();
        let d = fam.derivatives(0.4);
        // H blocks constant in s for DW
        assert!(op_norm(d.h_dot.matrix()) < 1e-14);
        assert!(op_norm(d.h_ddot.matrix()) < 1e-14);
        // Delta(s) = -delta (1-s) on the (0,2) coupling -> d/ds = +delta
        assert!((d.delta_dot.matrix()[(0, 2)].re - 0.05).abs() < 1e-14);
    }

    #[test]
    fn cubic_derivatives_match_finite_differences() {
        let dim = 3;
        let mk = |f: &dyn Fn(usize, usize) -> f64| {
            HermitianMatrix::from_hermitian_parts(CMatrix::from_fn(dim, dim, |i, j| {
                crate::operator::C64::new(f(i, j) + f(j, i), 0.0)
            }))
        };
        let coeffs = Box::new([
            mk(&|i, j| (i * j) as f64 * 0.1),
            mk(&|i, j| (i + j) as f64 * 0.2),
            mk(&|i, j| if i == j { 0.3 } else { 0.05 }),
            mk(&|i, _| i as f64 * 0.07),
        ]);
        let sched = Schedule::Cubic { coeffs };
        let s = 0.37;
        for step in [1e-3, 1e-4] {
            let fd1 = (sched.value(s + step).matrix() - sched.value(s - step).matrix())
                .scale(0.5 / step);
            let fd2 = (sched.value(s + step).matrix() + sched.value(s - step).matrix()
                - sched.value(s).matrix().scale(2.0))
            .scale(1.0 / (step * step));
            assert!(op_norm(&(sched.d1(s).matrix() - fd1)) < 10.0 * step * step + 1e-9);
            assert!(op_norm(&(sched.d2(s).matrix() - fd2)) < 1e-5);
        }
    }

    #[test]
    fn spline_interpolates_and_differentiates() {
        let f = |s: f64| {
            HermitianMatrix::from_real(&[&[s * s, 0.5 * s], &[0.5 * s, 1.0 - s]]).unwrap()
        };
        let knots: Vec<f64> = (0..=8).map(|k| k as f64 / 8.0).collect();
        let values: Vec<_> = knots.iter().map(|&s| f(s)).collect();
        let sp = SplineSchedule::new(knots.clone(), values).unwrap();
        for &s in &knots {
            assert!(op_norm(&(sp.eval(s, 0).matrix() - f(s).matrix())) < 1e-12);
        }
        // derivative consistency of the spline itself
        let sched = Schedule::Spline(sp);
        let s = 0.3;
        let step = 1e-5;
        let fd1 =
            (sched.value(s + step).matrix() - sched.value(s - step).matrix()).scale(0.5 / step);
        assert!(op_norm(&(sched.d1(s).matrix() - fd1)) < 1e-8);
    }

    #[test]
    fn assumptions_diagonal_family() {
        let fam = generators::diagonal_family(&[0.0, 1.0, 0.2, 1.2], &[0, 1]).unwrap();
        let rep = check_assumptions(&fam, &[0.0, 0.5, 1.0]).unwrap();
        assert!(rep.all_hold);
        for p in &rep.points {
            assert_eq!(p.c, 0.0);
            assert!((p.gamma_s - 1.0).abs() < 1e-12);
            assert!((p.gamma_sbar - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn assumptions_double_well() {
        let fam = generators::double_well(0.05, 0.2).unwrap();
        let rep = check_assumptions(&fam, &[0.0]).unwrap();
        assert!(rep.all_hold);
        let p = &rep.points[0];
        assert!((p.c - 0.05).abs() < 1e-12);
    }

    #[test]
    fn assumption1_failure_detected() {
        // H = diag(0, 0.1, 5, 6), S = {0,1}: mu_1 = 0.1 < mubar = 5 fails A1
        let fam = generators::diagonal_family(&[0.0, 0.1, 5.0, 6.0], &[0, 1]).unwrap();
        let rep = check_assumptions(&fam, &[0.0]).unwrap();
        assert!(!rep.points[0].assumption1);
    }

    #[test]
    fn family_json_round_trip() {
        let text = r#"{
            "grading": [0, 1],
            "schedule": {
                "kind": "linear-interpolation",
                "H0": {"dim":4,"entries":[[[0,0],[0,0],[0,0],[0,0]],[[0,0],[1,0],[0,0],[0,0]],[[0,0],[0,0],[0.2,0],[0,0]],[[0,0],[0,0],[0,0],[1.2,0]]]},
                "H1": {"dim":4,"entries":[[[0,0],[0,0],[0,0],[0,0]],[[0,0],[1,0],[0,0],[0,0]],[[0,0],[0,0],[0.2,0],[0,0]],[[0,0],[0,0],[0,0],[1.2,0]]]},
                "D0": {"dim":4,"entries":[[[0,0],[0,0],[-0.05,0],[0,0]],[[0,0],[0,0],[0,0],[0,0]],[[-0.05,0],[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0],[0,0]]]},
                "D1": {"dim":4,"entries":[[[0,0],[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0],[0,0]]]}
            }
        }"#;
        let fam = family_from_json(text).unwrap();
        assert_eq!(fam.dim(), 4);
        let b = fam.blocks(0.0).unwrap();
        assert!((b.delta.matrix()[(0, 2)].re + 0.05).abs() < 1e-14);
    }

    #[test]
    fn family_json_rejects_block_violation() {
        // D0 has a diagonal-block entry on S
        let text = r#"{
            "grading": [0],
            "schedule": {
                "kind": "linear-interpolation",
                "H0": {"dim":2,"entries":[[[0,0],[0,0]],[[0,0],[1,0]]]},
                "H1": {"dim":2,"entries":[[[0,0],[0,0]],[[0,0],[1,0]]]},
                "D0": {"dim":2,"entries":[[[0.3,0],[0,0]],[[0,0],[0,0]]]},
                "D1": {"dim":2,"entries":[[[0,0],[0,0]],[[0,0],[0,0]]]}
            }
        }"#;
        assert!(matches!(
            family_from_json(text),
            Err(Error::BlockStructure { .. })
        ));
    }
}
