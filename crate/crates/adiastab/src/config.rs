//! Experiment configuration: the JSON schema the CLI consumes, builtin
//! family construction, grading overrides (including re-grading along a
//! searched cut), and timescale-grid expansion.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, QMatrix, DEFAULT_MAX_CUT_DIM};
use crate::error::{Error, Result};
use crate::generators;
use crate::graded::{family_from_json, GradedFamily, Grading, Schedule, SplineSchedule};
use crate::operator::{CMatrix, HermitianMatrix, C64};

/// Builtin family generators addressable from a config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorSpec {
    DoubleWell {
        delta: f64,
        #[serde(default = "default_asymmetry")]
        asymmetry: f64,
        /// Freeze the coupling at its `s = 0` value.
        #[serde(default)]
        frozen: bool,
    },
    RotatingBlock {
        delta: f64,
        rate: f64,
    },
    RandomGraded {
        dim: usize,
        s_size: usize,
        #[serde(default = "default_c_target")]
        c_target: f64,
        #[serde(default)]
        stoquastic: bool,
    },
    TransverseChain {
        qubits: usize,
        #[serde(default)]
        s_indices: Option<Vec<usize>>,
    },
    Static {
        matrix: Vec<Vec<f64>>,
        s_indices: Vec<usize>,
    },
}

fn default_asymmetry() -> f64 {
    0.2
}

fn default_c_target() -> f64 {
    0.3
}

impl GeneratorSpec {
    /// Instantiate the generator. Random draws are fully determined by the
    /// seed; nothing reads the clock.
    pub fn build(&self, seed: u64) -> Result<(GradedFamily, String)> {
        match self {
            GeneratorSpec::DoubleWell {
                delta,
                asymmetry,
                frozen,
            } => {
                let fam = if *frozen {
                    generators::double_well_static(*delta, *asymmetry)?
                } else {
                    generators::double_well(*delta, *asymmetry)?
                };
                let tag = if *frozen { "static-" } else { "" };
                Ok((fam, format!("{tag}double-well({delta},{asymmetry})")))
            }
            GeneratorSpec::RotatingBlock { delta, rate } => Ok((
                generators::rotating_block(*delta, *rate)?,
                format!("rotating-block({delta},{rate})"),
            )),
            GeneratorSpec::RandomGraded {
                dim,
                s_size,
                c_target,
                stoquastic,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let fam = generators::random_graded(&mut rng, *dim, *s_size, *c_target, *stoquastic)?;
                Ok((
                    fam,
                    format!("random-graded({dim},{s_size},{c_target},{stoquastic},seed={seed})"),
                ))
            }
            GeneratorSpec::TransverseChain { qubits, s_indices } => Ok((
                generators::transverse_chain(*qubits, s_indices.clone())?,
                format!("transverse-chain({qubits})"),
            )),
            GeneratorSpec::Static { matrix, s_indices } => {
                let rows: Vec<&[f64]> = matrix.iter().map(|r| r.as_slice()).collect();
                let a = HermitianMatrix::from_real(&rows)?;
                let grading = Grading::new(a.dim(), s_indices.clone())?;
                let n = a.dim();
                Ok((generators::static_family(grading, &a)?, format!("static({n}x{n})")))
            }
        }
    }
}

/// Where the family comes from: a builtin generator or a family JSON file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilySource {
    Builtin(GeneratorSpec),
    File(PathBuf),
}

/// Explicit index set, or `"search"` for the exhaustive cut minimizer.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GradingSpec {
    Keyword(String),
    Indices(Vec<usize>),
}

/// Timescales as an explicit list or a geometric range.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TSpec {
    List(Vec<f64>),
    LogRange { from: f64, to: f64, points: usize },
}

impl TSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        let ts = match self {
            TSpec::List(v) => v.clone(),
            TSpec::LogRange { from, to, points } => {
                if *points == 0 {
                    return Err(Error::Config("t.points must be positive".into()));
                }
                if *points == 1 {
                    vec![*from]
                } else {
                    (0..*points)
                        .map(|k| from * (to / from).powf(k as f64 / (*points - 1) as f64))
                        .collect()
                }
            }
        };
        if ts.is_empty() {
            return Err(Error::Config("t must contain at least one value".into()));
        }
        if let Some(bad) = ts.iter().find(|t| t.is_nan() || **t <= 0.0) {
            return Err(Error::Config(format!("t values must be positive, got {bad}")));
        }
        Ok(ts)
    }
}

fn default_t() -> TSpec {
    TSpec::List(vec![10.0])
}

fn default_tol_step() -> f64 {
    1e-8
}

fn default_q_matrix() -> QMatrix {
    QMatrix::Full
}

fn default_max_cut_dim() -> usize {
    DEFAULT_MAX_CUT_DIM
}

fn default_grid_points() -> usize {
    11
}

/// One experiment as read from `--config`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: FamilySource,
    /// Replaces the family's own grading; `"search"` runs the cut minimizer.
    #[serde(default)]
    pub grading: Option<GradingSpec>,
    #[serde(default = "default_t")]
    pub t: TSpec,
    #[serde(default = "default_tol_step")]
    pub tol_step: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub bounds_only: bool,
    #[serde(default = "default_q_matrix")]
    pub q_matrix: QMatrix,
    #[serde(default = "default_max_cut_dim")]
    pub max_cut_dim: usize,
    /// Points of the `s` grid used by the snapshot sweep commands.
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config JSON: {e}")))?;
    if cfg.grid_points < 2 {
        return Err(Error::Config("grid_points must be at least 2".into()));
    }
    if let Some(GradingSpec::Keyword(word)) = &cfg.grading {
        if word != "search" {
            return Err(Error::Config(format!(
                "grading must be an index array or \"search\", got {word:?}"
            )));
        }
    }
    cfg.t.values()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Uniform grid on `[0, 1]`.
pub fn s_grid(points: usize) -> Vec<f64> {
    (0..points)
        .map(|k| k as f64 / (points - 1) as f64)
        .collect()
}

fn mask_matrix(m: &HermitianMatrix, in_s: &[bool], diagonal: bool) -> HermitianMatrix {
    let n = m.dim();
    HermitianMatrix::from_hermitian_parts(CMatrix::from_fn(n, n, |i, j| {
        if (in_s[i] == in_s[j]) == diagonal {
            m.matrix()[(i, j)]
        } else {
            C64::new(0.0, 0.0)
        }
    }))
}

fn mask_schedule(sched: &Schedule, in_s: &[bool], diagonal: bool) -> Result<Schedule> {
    Ok(match sched {
        Schedule::Linear { m0, m1 } => Schedule::Linear {
            m0: mask_matrix(m0, in_s, diagonal),
            m1: mask_matrix(m1, in_s, diagonal),
        },
        Schedule::Cubic { coeffs } => {
            let masked: Vec<HermitianMatrix> = coeffs
                .iter()
                .map(|c| mask_matrix(c, in_s, diagonal))
                .collect();
            Schedule::Cubic {
                coeffs: Box::new(masked.try_into().expect("four coefficients in, four out")),
            }
        }
        Schedule::Spline(sp) => Schedule::Spline(SplineSchedule::new(
            sp.knots().to_vec(),
            sp.values()
                .iter()
                .map(|v| mask_matrix(v, in_s, diagonal))
                .collect(),
        )?),
    })
}

/// Pointwise sum of two schedules, exact for every supported combination.
/// A natural spline reproduces affine data, so adding a linear schedule to a
/// spline at its knots is still exact; spline + cubic is not and is refused.
fn add_schedules(a: Schedule, b: Schedule) -> Result<Schedule> {
    let add = |x: &HermitianMatrix, y: &HermitianMatrix| x + y;
    Ok(match (a, b) {
        (Schedule::Linear { m0: a0, m1: a1 }, Schedule::Linear { m0: b0, m1: b1 }) => {
            Schedule::Linear {
                m0: add(&a0, &b0),
                m1: add(&a1, &b1),
            }
        }
        (Schedule::Cubic { coeffs: ca }, Schedule::Cubic { coeffs: cb }) => {
            let summed: Vec<HermitianMatrix> =
                ca.iter().zip(cb.iter()).map(|(x, y)| add(x, y)).collect();
            Schedule::Cubic {
                coeffs: Box::new(summed.try_into().expect("four coefficients")),
            }
        }
        (lin @ Schedule::Linear { .. }, Schedule::Cubic { coeffs })
        | (Schedule::Cubic { coeffs }, lin @ Schedule::Linear { .. }) => {
            let (m0, m1) = match lin {
                Schedule::Linear { m0, m1 } => (m0, m1),
                _ => unreachable!(),
            };
            let c0 = add(&coeffs[0], &m0);
            let c1 = add(&coeffs[1], &(&m1 - &m0));
            Schedule::Cubic {
                coeffs: Box::new([c0, c1, coeffs[2].clone(), coeffs[3].clone()]),
            }
        }
        (Schedule::Spline(sa), Schedule::Spline(sb)) => {
            if sa.knots() != sb.knots() {
                return Err(Error::Config(
                    "cannot regrade: spline schedules have different knots".into(),
                ));
            }
            let summed: Vec<HermitianMatrix> = sa
                .values()
                .iter()
                .zip(sb.values())
                .map(|(x, y)| add(x, y))
                .collect();
            Schedule::Spline(SplineSchedule::new(sa.knots().to_vec(), summed)?)
        }
        (Schedule::Spline(sp), lin @ Schedule::Linear { .. })
        | (lin @ Schedule::Linear { .. }, Schedule::Spline(sp)) => {
            let values: Vec<HermitianMatrix> = sp
                .knots()
                .iter()
                .zip(sp.values())
                .map(|(&s, v)| add(v, &lin.value(s)))
                .collect();
            Schedule::Spline(SplineSchedule::new(sp.knots().to_vec(), values)?)
        }
        _ => {
            return Err(Error::Config(
                "cannot regrade: unsupported spline/cubic schedule combination".into(),
            ))
        }
    })
}

/// Rebuild the family with the block split taken along a different cut.
/// The total operator `A(s)` is unchanged.
pub fn regrade(fam: &GradedFamily, indices: Vec<usize>) -> Result<GradedFamily> {
    let grading = Grading::new(fam.dim(), indices)?;
    let mut in_s = vec![false; fam.dim()];
    for &i in grading.s_indices() {
        in_s[i] = true;
    }
    let h_new = add_schedules(
        mask_schedule(fam.h_schedule(), &in_s, true)?,
        mask_schedule(fam.delta_schedule(), &in_s, true)?,
    )?;
    let d_new = add_schedules(
        mask_schedule(fam.h_schedule(), &in_s, false)?,
        mask_schedule(fam.delta_schedule(), &in_s, false)?,
    )?;
    GradedFamily::new(grading, h_new, d_new)
}

/// The family a config describes, its display id, and — when the grading was
/// searched — the cut-search record.
pub fn resolve_family(
    cfg: &ExperimentConfig,
) -> Result<(GradedFamily, String, Option<bounds::CutSearchResult>)> {
    let (fam, id) = match &cfg.family {
        FamilySource::Builtin(spec) => spec.build(cfg.seed)?,
        FamilySource::File(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            (family_from_json(&text)?, format!("file({})", path.display()))
        }
    };
    match &cfg.grading {
        None => Ok((fam, id, None)),
        Some(GradingSpec::Indices(indices)) => {
            let regraded = regrade(&fam, indices.clone())?;
            Ok((regraded, id, None))
        }
        Some(GradingSpec::Keyword(_)) => {
            let grid = s_grid(cfg.grid_points);
            let mats: Vec<HermitianMatrix> = grid
                .iter()
                .map(|&s| fam.blocks(s).map(|b| b.a))
                .collect::<Result<_>>()?;
            let search = bounds::min_cut(&mats, cfg.max_cut_dim)?;
            let regraded = regrade(&fam, search.best_cut.clone())?;
            Ok((regraded, id, Some(search)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::op_norm;

    #[test]
    fn builtin_double_well_config_parses() {
        let cfg = parse_config(
            r#"{
                "family": {"builtin": {"name": "double-well", "delta": 0.05}},
                "t": [1.0, 10.0],
                "seed": 7
            }"#,
        )
        .unwrap();
        let (fam, id, search) = resolve_family(&cfg).unwrap();
        assert_eq!(fam.dim(), 4);
        assert_eq!(id, "double-well(0.05,0.2)");
        assert!(search.is_none());
        assert_eq!(cfg.t.values().unwrap(), vec![1.0, 10.0]);
    }

    #[test]
    fn unknown_field_is_named_in_the_error() {
        let err = parse_config(
            r#"{"family": {"builtin": {"name": "double-well", "delta": 0.05, "depth": 3}}}"#,
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("depth"), "error should name the field: {msg}");
    }

    #[test]
    fn log_range_is_geometric() {
        let spec = TSpec::LogRange {
            from: 1.0,
            to: 100.0,
            points: 3,
        };
        let ts = spec.values().unwrap();
        assert_eq!(ts.len(), 3);
        assert!((ts[1] - 10.0).abs() < 1e-12);
        assert!(TSpec::List(vec![0.0]).values().is_err());
    }

    #[test]
    fn regrading_preserves_the_total_operator() {
        let fam = generators::double_well(0.05, 0.2).unwrap();
        let moved = regrade(&fam, vec![0, 2]).unwrap();
        for &s in &[0.0, 0.3, 0.7, 1.0] {
            let a = fam.blocks(s).unwrap().a;
            let b = moved.blocks(s).unwrap().a;
            assert!(op_norm(&(a.matrix() - b.matrix())) < 1e-12);
            // the new Delta carries no flux across {0,2} | {1,3}
            assert_eq!(op_norm(moved.blocks(s).unwrap().delta.matrix()), 0.0);
        }
    }

    #[test]
    fn regrading_a_spline_family_is_exact() {
        let fam = generators::rotating_block(0.05, 1.0).unwrap();
        let moved = regrade(&fam, vec![0, 3]).unwrap();
        for &s in &[0.0, 0.41, 1.0] {
            let a = fam.blocks(s).unwrap().a;
            let b = moved.blocks(s).unwrap().a;
            assert!(op_norm(&(a.matrix() - b.matrix())) < 1e-12);
        }
    }

    #[test]
    fn search_grading_uses_the_cut_minimizer() {
        let cfg = parse_config(
            r#"{
                "family": {"builtin": {"name": "double-well", "delta": 0.05}},
                "grading": "search"
            }"#,
        )
        .unwrap();
        let (fam, _, search) = resolve_family(&cfg).unwrap();
        let search = search.unwrap();
        assert_eq!(search.best_cut, vec![0, 2]);
        assert_eq!(fam.grading().s_indices(), &[0, 2]);
    }

    #[test]
    fn static_generator_builds_a_constant_family() {
        let spec = GeneratorSpec::Static {
            matrix: vec![
                vec![0.0, -0.1, 0.0],
                vec![-0.1, 1.0, 0.0],
                vec![0.0, 0.0, 0.5],
            ],
            s_indices: vec![0],
        };
        let (fam, id) = spec.build(0).unwrap();
        assert_eq!(id, "static(3x3)");
        let a0 = fam.blocks(0.0).unwrap().a;
        let a1 = fam.blocks(1.0).unwrap().a;
        assert!(op_norm(&(a0.matrix() - a1.matrix())) == 0.0);
    }

    #[test]
    fn random_graded_is_seed_deterministic() {
        let spec = GeneratorSpec::RandomGraded {
            dim: 6,
            s_size: 3,
            c_target: 0.3,
            stoquastic: false,
        };
        let (fam_a, _) = spec.build(42).unwrap();
        let (fam_b, _) = spec.build(42).unwrap();
        let a = fam_a.blocks(0.5).unwrap().a;
        let b = fam_b.blocks(0.5).unwrap().a;
        assert_eq!(a.matrix(), b.matrix());
        let (fam_c, _) = spec.build(43).unwrap();
        let c = fam_c.blocks(0.5).unwrap().a;
        assert!(op_norm(&(a.matrix() - c.matrix())) > 1e-6);
    }
}
