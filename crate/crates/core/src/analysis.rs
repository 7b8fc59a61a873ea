//! Grid sweeps, empirical Lipschitz estimation, the theoretical Lipschitz
//! bound, and method comparison.

use std::io::Write;

use serde::Serialize;

use crate::geometry::{
    AnalyticCenterProvider, NewtonSettings, ProviderTag, SteinerProvider,
};
use crate::problem::{
    instantiate, Domain, FeasiblePointProvider, LipschitzMetadata, ParametricProblem,
};
use crate::scalar::Scalar;
use crate::solvers::{
    solve_qcqp, solve_qp_oracle, solve_socp, Method, QcqpSettings, SolveResult, SolveStatus,
};
use crate::linalg;

/// Grid-size guard: more points than this refuses to enumerate.
pub const GRID_LIMIT: usize = 10_000_000;

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("grid has {points} points, exceeding the {limit} guard")]
    GridGuard { points: usize, limit: usize },
    #[error("grid step must be positive")]
    NonPositiveStep,
    #[error("need at least 2 records per refinement level, got {0}")]
    TooFewRecords(usize),
    #[error("records do not form a rectangular lexicographic grid")]
    NonRectangular,
    #[error("no records carry method {0}")]
    MissingMethod(Method),
    #[error("comparison needs qp_oracle baseline records")]
    MissingBaseline,
    #[error("metadata lists {got} per-row constants, problem has {expected} rows")]
    MetadataShape { got: usize, expected: usize },
}

/// A box grid at one or more refinement steps.
#[derive(Debug, Clone)]
pub struct GridSpec<F> {
    pub domain: Domain<F>,
    /// Refinement levels, coarsest first.
    pub steps: Vec<F>,
}

impl<F: Scalar> GridSpec<F> {
    pub fn points(&self, level: usize) -> Result<Vec<Vec<F>>, AnalysisError> {
        grid_points(&self.domain, self.steps[level])
    }
}

/// Axis-aligned lattice `lower + i*step` over the box, lexicographic order
/// (last coordinate fastest).
pub fn grid_points<F: Scalar>(
    domain: &Domain<F>,
    step: F,
) -> Result<Vec<Vec<F>>, AnalysisError> {
    if step <= F::zero() {
        return Err(AnalysisError::NonPositiveStep);
    }
    let n = domain.lower.len();
    let mut counts = Vec::with_capacity(n);
    let mut total: usize = 1;
    for j in 0..n {
        let span = (domain.upper[j] - domain.lower[j]) / step;
        let c = span.to_f64().unwrap_or(0.0).max(0.0);
        let count = (c + 1e-9).floor() as usize + 1;
        total = total.saturating_mul(count);
        if total > GRID_LIMIT {
            return Err(AnalysisError::GridGuard { points: total, limit: GRID_LIMIT });
        }
        counts.push(count);
    }
    let mut points = Vec::with_capacity(total);
    let mut idx = vec![0usize; n];
    loop {
        let x: Vec<F> = (0..n)
            .map(|j| domain.lower[j] + F::from_usize(idx[j]).unwrap() * step)
            .collect();
        points.push(x);
        // odometer, last axis fastest
        let mut j = n;
        loop {
            if j == 0 {
                return Ok(points);
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < counts[j] {
                break;
            }
            idx[j] = 0;
        }
    }
}

/// `grid_points` for the common concrete case; panics on guard violation.
pub fn grid_points_f64(domain: &Domain<f64>, step: f64) -> Vec<Vec<f64>> {
    grid_points(domain, step).expect("grid within guard")
}

/// One grid point with the outcome of every requested method. Solver errors
/// are captured per point (`Err(message)`) rather than aborting the sweep.
#[derive(Debug, Clone)]
pub struct SweepRecord<F> {
    pub x: Vec<F>,
    pub outcomes: Vec<(Method, Result<SolveResult<F>, String>)>,
}

impl<F: Scalar> SweepRecord<F> {
    pub fn solution(&self, method: Method) -> Option<&SolveResult<F>> {
        self.outcomes
            .iter()
            .find(|(m, _)| *m == method)
            .and_then(|(_, r)| r.as_ref().ok())
    }
}

/// Sweep parameters beyond the grid itself.
#[derive(Debug, Clone)]
pub struct SweepSettings<F> {
    pub qcqp: QcqpSettings<F>,
    pub provider: ProviderTag,
    pub newton: NewtonSettings<F>,
    pub steiner_samples: usize,
    pub seed: u64,
}

impl<F: Scalar> Default for SweepSettings<F> {
    fn default() -> Self {
        SweepSettings {
            qcqp: QcqpSettings::default(),
            provider: ProviderTag::Expr,
            newton: NewtonSettings::default(),
            steiner_samples: 4096,
            seed: 0,
        }
    }
}

/// Evaluates every method at every grid point, in the given point order.
pub fn sweep<F: Scalar>(
    problem: &ParametricProblem<F>,
    methods: &[Method],
    points: &[Vec<F>],
    settings: &SweepSettings<F>,
) -> Vec<SweepRecord<F>> {
    let mut center = AnalyticCenterProvider::new(settings.newton);
    let mut steiner = SteinerProvider { samples: settings.steiner_samples, seed: settings.seed };
    let mut records = Vec::with_capacity(points.len());
    for x in points {
        let provider: Option<&mut dyn FeasiblePointProvider<F>> = match settings.provider {
            ProviderTag::Expr => None,
            ProviderTag::AnalyticCenter => Some(&mut center),
            ProviderTag::Steiner => Some(&mut steiner),
        };
        let outcomes = match instantiate(problem, x, provider) {
            Ok(instance) => methods
                .iter()
                .map(|&method| {
                    let res = match method {
                        Method::Socp => solve_socp(&instance),
                        Method::Qcqp => solve_qcqp(&instance, &settings.qcqp),
                        Method::QpOracle => solve_qp_oracle(&instance),
                    };
                    (method, res.map_err(|e| e.to_string()))
                })
                .collect(),
            Err(e) => {
                let msg = e.to_string();
                methods.iter().map(|&m| (m, Err(msg.clone()))).collect()
            }
        };
        records.push(SweepRecord { x: x.clone(), outcomes });
    }
    records
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    LipschitzStable,
    Diverging,
    Discontinuous,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::LipschitzStable => "lipschitz_stable",
            Verdict::Diverging => "diverging",
            Verdict::Discontinuous => "discontinuous",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelEstimate<F> {
    pub step: F,
    pub l_est: F,
    pub pairs: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct JumpLocation<F> {
    pub x1: Vec<F>,
    pub x2: Vec<F>,
    pub quotient: F,
}

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzReport<F> {
    pub method: Method,
    pub levels: Vec<LevelEstimate<F>>,
    pub jump_locations: Vec<JumpLocation<F>>,
    pub verdict: Verdict,
}

/// Difference-quotient Lipschitz estimation across refinement levels
/// (coarsest first; each entry is a step size with its lexicographic grid
/// records).
///
/// Verdict rules: `discontinuous` when the solution moves by more than 0.1
/// across a single cell (a fixed-size jump survives refinement, so the
/// per-cell quotient scales like 0.1/step); otherwise `diverging`
/// when L_est grows by at least 2x per 10x refinement between consecutive
/// levels; otherwise `lipschitz_stable`.
pub fn estimate_lipschitz<F: Scalar>(
    levels: &[(F, Vec<SweepRecord<F>>)],
    method: Method,
) -> Result<LipschitzReport<F>, AnalysisError> {
    let mut estimates = Vec::with_capacity(levels.len());
    let mut jumps = Vec::new();
    let mut discontinuous = false;
    for (step, records) in levels {
        if records.len() < 2 {
            return Err(AnalysisError::TooFewRecords(records.len()));
        }
        if !records.iter().any(|r| r.solution(method).is_some()) {
            return Err(AnalysisError::MissingMethod(method));
        }
        let shape = grid_shape(records)?;
        let jump_size = F::c(0.1);
        let mut l_est = F::zero();
        let mut pairs = 0usize;
        for (i, j) in adjacent_pairs(&shape) {
            let (r1, r2) = (&records[i], &records[j]);
            let (u1, u2) = match (r1.solution(method), r2.solution(method)) {
                (Some(a), Some(b)) if a.status == SolveStatus::Ok && b.status == SolveStatus::Ok => {
                    (&a.u, &b.u)
                }
                _ => continue,
            };
            let dx = linalg::dist(&r1.x, &r2.x);
            if dx <= F::zero() {
                return Err(AnalysisError::NonRectangular);
            }
            let q = linalg::dist(u1, u2) / dx;
            pairs += 1;
            l_est = l_est.max(q);
            if q * dx > jump_size {
                discontinuous = true;
                jumps.push(JumpLocation { x1: r1.x.clone(), x2: r2.x.clone(), quotient: q });
            }
        }
        estimates.push(LevelEstimate { step: *step, l_est, pairs });
    }
    let verdict = if discontinuous {
        Verdict::Discontinuous
    } else if diverging(&estimates) {
        Verdict::Diverging
    } else {
        Verdict::LipschitzStable
    };
    Ok(LipschitzReport { method, levels: estimates, jump_locations: jumps, verdict })
}

/// Growth-per-decade test: levels whose steps differ by a factor f are
/// compared against the 2x-per-10x rule via the exponent log10(f).
fn diverging<F: Scalar>(levels: &[LevelEstimate<F>]) -> bool {
    for w in levels.windows(2) {
        let (coarse, fine) = (&w[0], &w[1]);
        let decades = (coarse.step / fine.step).log10();
        if decades <= F::zero() || coarse.l_est <= F::zero() {
            continue;
        }
        let growth_per_decade = (fine.l_est / coarse.l_est).powf(F::one() / decades);
        if growth_per_decade >= F::c(2.0) {
            return true;
        }
    }
    false
}

/// Axis sizes of a lexicographic rectangular grid (last axis fastest),
/// recovered from the records themselves.
fn grid_shape<F: Scalar>(records: &[SweepRecord<F>]) -> Result<Vec<usize>, AnalysisError> {
    let n = records[0].x.len();
    let total = records.len();
    let mut shape = vec![1usize; n];
    //  axis j repeats with period = product of sizes of axes j+1..n
    let mut period = 1usize;
    for j in (0..n).rev() {
        // count distinct consecutive values of coordinate j at stride `period`
        // within one block
        let mut size = 1usize;
        let mut k = period;
        while k < total {
            if (records[k].x[j] - records[k - period].x[j]).abs() <= F::c(1e-12) {
                break;
            }
            if records[k].x[j] < records[k - period].x[j] {
                break; // wrapped to the next outer block
            }
            size += 1;
            k += period;
        }
        shape[j] = size;
        period *= size;
    }
    if shape.iter().product::<usize>() != total {
        return Err(AnalysisError::NonRectangular);
    }
    Ok(shape)
}

/// Index pairs adjacent along one axis of a lexicographic grid.
fn adjacent_pairs(shape: &[usize]) -> Vec<(usize, usize)> {
    let n = shape.len();
    let total: usize = shape.iter().product();
    let mut strides = vec![1usize; n];
    for j in (0..n.saturating_sub(1)).rev() {
        strides[j] = strides[j + 1] * shape[j + 1];
    }
    let mut pairs = Vec::new();
    for i in 0..total {
        let mut rem = i;
        for j in 0..n {
            let coord = rem / strides[j];
            rem %= strides[j];
            if coord + 1 < shape[j] {
                pairs.push((i, i + strides[j]));
            }
        }
    }
    pairs
}

/// Theoretical Lipschitz constant of the SOCP map:
/// `L = L_pi_des + 2 L_pi_f + max_i (L_b[i] + L_pi_f + L_a[i] U_f_bar)`.
pub fn lipschitz_bound<F: Scalar>(
    meta: &LipschitzMetadata<F>,
    p: usize,
) -> Result<F, AnalysisError> {
    if meta.l_a.len() != p || meta.l_b.len() != p {
        return Err(AnalysisError::MetadataShape {
            got: meta.l_a.len().min(meta.l_b.len()),
            expected: p,
        });
    }
    let l_r = meta
        .l_a
        .iter()
        .zip(&meta.l_b)
        .map(|(la, lb)| *lb + meta.l_pi_f + *la * meta.u_f_bar)
        .fold(F::zero(), F::max);
    Ok(meta.l_pi_des + F::c(2.0) * meta.l_pi_f + l_r)
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodComparison<F> {
    pub method: Method,
    /// Distance to the oracle solution.
    pub mean_dist: F,
    pub max_dist: F,
    /// Objective gap `||u - pi_des|| - ||u_qp - pi_des||` (>= 0 up to noise).
    pub mean_gap: F,
    pub max_gap: F,
    pub points: usize,
}

/// Per-method suboptimality statistics against the `qp_oracle` baseline,
/// over points where both solves succeeded. `pi_des` per point is recovered
/// from the oracle itself when it returns an interior solution, so the
/// caller supplies it explicitly instead.
pub fn compare_methods<F: Scalar>(
    records: &[SweepRecord<F>],
    pi_des: &[Vec<F>],
) -> Result<Vec<MethodComparison<F>>, AnalysisError> {
    if !records.iter().any(|r| r.solution(Method::QpOracle).is_some()) {
        return Err(AnalysisError::MissingBaseline);
    }
    let methods: Vec<Method> = records
        .first()
        .map(|r| r.outcomes.iter().map(|(m, _)| *m).collect())
        .unwrap_or_default();
    let mut out = Vec::new();
    for method in methods {
        if method == Method::QpOracle {
            continue;
        }
        let mut dists = Vec::new();
        let mut gaps = Vec::new();
        for (record, des) in records.iter().zip(pi_des) {
            let (Some(base), Some(res)) =
                (record.solution(Method::QpOracle), record.solution(method))
            else {
                continue;
            };
            dists.push(linalg::dist(&res.u, &base.u));
            gaps.push(linalg::dist(&res.u, des) - linalg::dist(&base.u, des));
        }
        if dists.is_empty() {
            return Err(AnalysisError::MissingMethod(method));
        }
        let count = F::from_usize(dists.len()).unwrap();
        out.push(MethodComparison {
            method,
            mean_dist: dists.iter().copied().sum::<F>() / count,
            max_dist: dists.iter().copied().fold(F::zero(), F::max),
            mean_gap: gaps.iter().copied().sum::<F>() / count,
            max_gap: gaps.iter().copied().fold(F::neg_infinity(), F::max),
            points: dists.len(),
        });
    }
    Ok(out)
}

/// Floats in data files: 17 significant digits, round-trip exact for f64.
pub fn fmt_float<F: Scalar>(v: F) -> String {
    format!("{:.16e}", v.to_f64().unwrap_or(f64::NAN))
}

/// Sweep records as CSV: `x_1..x_n`, then per method `u_1..u_m`,
/// `residual`, `status` (method-prefixed headers).
pub fn write_sweep_csv<F: Scalar, W: Write>(
    out: &mut W,
    records: &[SweepRecord<F>],
    n: usize,
    m: usize,
) -> std::io::Result<()> {
    let methods: Vec<Method> = records
        .first()
        .map(|r| r.outcomes.iter().map(|(mt, _)| *mt).collect())
        .unwrap_or_default();
    let mut header: Vec<String> = (1..=n).map(|j| format!("x_{j}")).collect();
    for method in &methods {
        for j in 1..=m {
            header.push(format!("{method}_u_{j}"));
        }
        header.push(format!("{method}_residual"));
        header.push(format!("{method}_status"));
    }
    writeln!(out, "{}", header.join(","))?;
    for record in records {
        let mut row: Vec<String> = record.x.iter().map(|v| fmt_float(*v)).collect();
        for (_, outcome) in &record.outcomes {
            match outcome {
                Ok(res) => {
                    row.extend(res.u.iter().map(|v| fmt_float(*v)));
                    row.push(fmt_float(res.feasibility_residual));
                    row.push(res.status.to_string());
                }
                Err(msg) => {
                    row.extend(std::iter::repeat("nan".to_string()).take(m + 1));
                    row.push(format!("error: {}", msg.replace(',', ";")));
                }
            }
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
