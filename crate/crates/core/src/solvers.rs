//! The three solution maps: closed-form SOCP over the inscribed ball,
//! ball-intersection QCQP by Dykstra's alternating projections, and an exact
//! enumeration-based QP oracle used as ground truth.

use serde::Serialize;

use crate::geometry::{self, Ball};
use crate::linalg;
use crate::problem::{Polytope, ProblemInstance};
use crate::scalar::Scalar;

/// Feasibility slack below which a result no longer counts as `Ok`.
pub const FEAS_TOL: f64 = 1e-9;
/// Window `[-RADIUS_CLAMP, 0)` of radius values clamped to zero: a boundary
/// `pi_f` (example1 at x=0) otherwise turns spuriously infeasible under
/// floating point.
pub const RADIUS_CLAMP: f64 = 1e-9;
/// Dual-sign tolerance in KKT checks; strict nonnegativity is fragile at
/// degenerate vertices.
pub const DUAL_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error(
        "assumption violation: pi_f infeasible for constraint {index} (slack {slack:.3e})"
    )]
    AssumptionViolation { index: usize, slack: f64 },
    #[error("qcqp parameter k must be positive, got {0}")]
    NonPositiveK(f64),
    #[error("active-set enumeration guard exceeded: {subsets} subsets > {limit}")]
    EnumerationGuard { subsets: usize, limit: usize },
    #[error("no feasible candidate found (K(x) appears empty)")]
    NoFeasibleCandidate,
}

/// Which solution map produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Socp,
    Qcqp,
    QpOracle,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Socp => "socp",
            Method::Qcqp => "qcqp",
            Method::QpOracle => "qp_oracle",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "socp" => Ok(Method::Socp),
            "qcqp" => Ok(Method::Qcqp),
            "qp" | "qp_oracle" => Ok(Method::QpOracle),
            other => Err(format!("unknown method `{other}` (socp | qcqp | qp)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Ok,
    Infeasible,
    IterationCap,
    Degenerate,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Ok => "ok",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::IterationCap => "iteration_cap",
            SolveStatus::Degenerate => "degenerate",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult<F> {
    pub u: Vec<F>,
    pub method: Method,
    /// Inscribed-ball radius `r(x)`, for the SOCP.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<F>,
    /// Active constraint indices (0-based), for the QP oracle.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub active_set: Option<Vec<usize>>,
    pub feasibility_residual: F,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    pub status: SolveStatus,
}

/// Inscribed-ball radius `r(x) = min_i (b_i - a_i' pi_f)`. Values in
/// `[-1e-9, 0)` are clamped to zero; anything lower is an assumption
/// violation.
pub fn radius<F: Scalar>(instance: &ProblemInstance<F>) -> Result<F, SolveError> {
    let slacks = instance.polytope.slacks(&instance.pi_f);
    let (index, min_slack) = slacks
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .expect("at least one constraint");
    if min_slack < -F::c(RADIUS_CLAMP) {
        return Err(SolveError::AssumptionViolation {
            index,
            slack: min_slack.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(min_slack.max(F::zero()))
}

/// Closed-form SOCP solution:
/// `pi_f + min(r, ||v_des||) v_des / ||v_des||` with `v_des = pi_des - pi_f`.
pub fn solve_socp<F: Scalar>(instance: &ProblemInstance<F>) -> Result<SolveResult<F>, SolveError> {
    let r = radius(instance)?;
    let v_des = linalg::sub(&instance.pi_des, &instance.pi_f);
    let step = geometry::project_ball(&v_des, r).expect("radius clamped nonnegative");
    let u = linalg::add(&instance.pi_f, &step);
    let feas = instance.polytope.residual(&u);
    Ok(SolveResult {
        u,
        method: Method::Socp,
        radius: Some(r),
        active_set: None,
        feasibility_residual: feas,
        iterations: None,
        status: if feas <= F::c(FEAS_TOL) { SolveStatus::Ok } else { SolveStatus::Degenerate },
    })
}

/// Dykstra parameters for the QCQP solver.
#[derive(Debug, Clone, Copy)]
pub struct QcqpSettings<F> {
    pub k: F,
    /// Cycle-to-cycle iterate-change stopping threshold.
    pub tol: F,
    pub max_iter: usize,
}

impl<F: Scalar> Default for QcqpSettings<F> {
    fn default() -> Self {
        QcqpSettings { k: F::one(), tol: F::c(1e-10), max_iter: 10_000 }
    }
}

/// The balls `(c_i, sqrt(d_i))` whose intersection defines the QCQP
/// feasible set: `c_i = pi_f - k a_i`, `d_i = k^2 + 2 k (b_i - a_i' pi_f)`.
pub fn qcqp_balls<F: Scalar>(
    instance: &ProblemInstance<F>,
    k: F,
) -> Result<Vec<Ball<F>>, SolveError> {
    if k <= F::zero() {
        return Err(SolveError::NonPositiveK(k.to_f64().unwrap_or(f64::NAN)));
    }
    let slacks = instance.polytope.slacks(&instance.pi_f);
    let mut balls = Vec::with_capacity(instance.polytope.p());
    for (i, (row, s)) in instance.polytope.a.iter().zip(&slacks).enumerate() {
        if *s < -F::c(RADIUS_CLAMP) {
            return Err(SolveError::AssumptionViolation {
                index: i,
                slack: s.to_f64().unwrap_or(f64::NAN),
            });
        }
        let s = s.max(F::zero());
        let center = linalg::add_scaled(&instance.pi_f, -k, row);
        let d = k * k + F::c(2.0) * k * s;
        balls.push(Ball { center, radius: d.sqrt() });
    }
    Ok(balls)
}

/// Projection of `pi_des` onto the intersection of the QCQP balls by
/// Dykstra's alternating projections with correction terms. When Dykstra
/// stalls (tangent balls make it converge sublinearly, e.g. at a parameter
/// where the inscribed radius vanishes) the exact subset-enumeration
/// projection takes over.
pub fn solve_qcqp<F: Scalar>(
    instance: &ProblemInstance<F>,
    settings: &QcqpSettings<F>,
) -> Result<SolveResult<F>, SolveError> {
    let balls = qcqp_balls(instance, settings.k)?;
    let m = instance.polytope.m();
    let mut x = instance.pi_des.clone();
    let mut corrections = vec![vec![F::zero(); m]; balls.len()];
    let mut status = SolveStatus::IterationCap;
    let mut cycles = settings.max_iter;
    let violation_tol = F::c(1e-12);
    for cycle in 0..settings.max_iter {
        let prev = x.clone();
        for (ball, q) in balls.iter().zip(&mut corrections) {
            let y = linalg::add(&x, q);
            let projected = ball.project(&y);
            *q = linalg::sub(&y, &projected);
            x = projected;
        }
        let max_violation = balls
            .iter()
            .map(|b| linalg::dist(&x, &b.center) - b.radius)
            .fold(F::neg_infinity(), F::max);
        if linalg::dist(&x, &prev) <= settings.tol && max_violation <= violation_tol {
            status = SolveStatus::Ok;
            cycles = cycle + 1;
            break;
        }
    }
    if status == SolveStatus::IterationCap {
        if let Some(exact) = project_ball_intersection(&balls, &instance.pi_des) {
            x = exact;
            status = SolveStatus::Ok;
        }
    }
    let feas = instance.polytope.residual(&x);
    if status == SolveStatus::Ok && feas > F::c(FEAS_TOL) {
        status = SolveStatus::Degenerate;
    }
    Ok(SolveResult {
        u: x,
        method: Method::Qcqp,
        radius: None,
        active_set: None,
        feasibility_residual: feas,
        iterations: Some(cycles),
        status,
    })
}

/// Outcome of the exact polytope projection.
#[derive(Debug, Clone)]
pub struct Projection<F> {
    pub u: F64Vec<F>,
    /// Active subset (0-based row indices) that produced the minimizer.
    pub active_set: Vec<usize>,
    /// Duals on the active subset (`None` if rank-deficient).
    pub duals: Option<Vec<F>>,
    pub objective: F,
}

type F64Vec<F> = Vec<F>;

const ENUM_LIMIT: usize = 1_000_000;

/// Exact Euclidean projection of `target` onto `{u : A u <= b}` by active-set
/// enumeration: every row subset of size at most `m` is solved as an
/// equality-constrained projection through its KKT system (pseudoinverse for
/// rank-deficient subsets), and the best primal-feasible, KKT-consistent
/// candidate wins.
pub fn project_polytope<F: Scalar>(
    polytope: &Polytope<F>,
    target: &[F],
) -> Result<Projection<F>, SolveError> {
    let (p, m) = (polytope.p(), polytope.m());
    let subsets = count_subsets(p, m);
    if subsets > ENUM_LIMIT {
        return Err(SolveError::EnumerationGuard { subsets, limit: ENUM_LIMIT });
    }
    let scale = F::one() + linalg::norm(target);
    let feas_tol = F::c(FEAS_TOL) * scale;
    let dual_tol = F::c(DUAL_TOL) * scale;

    let mut best: Option<Projection<F>> = None;
    let mut consider = |cand: Projection<F>| {
        if best.as_ref().map_or(true, |b| cand.objective < b.objective) {
            best = Some(cand);
        }
    };

    // the unconstrained minimizer
    if polytope.residual(target) <= feas_tol {
        consider(Projection {
            u: target.to_vec(),
            active_set: Vec::new(),
            duals: Some(Vec::new()),
            objective: F::zero(),
        });
    }

    for size in 1..=m.min(p) {
        let mut subset: Vec<usize> = (0..size).collect();
        loop {
            if let Some(cand) = equality_projection(polytope, target, &subset, feas_tol, dual_tol)
            {
                consider(cand);
            }
            if !next_subset(&mut subset, p) {
                break;
            }
        }
    }
    best.ok_or(SolveError::NoFeasibleCandidate)
}

/// Projection of `target` onto `{a_i' u = b_i, i in S}` with feasibility and
/// KKT screening. Returns `None` when the subset is inconsistent, the
/// candidate is infeasible, or full-rank duals are negative.
fn equality_projection<F: Scalar>(
    polytope: &Polytope<F>,
    target: &[F],
    subset: &[usize],
    feas_tol: F,
    dual_tol: F,
) -> Option<Projection<F>> {
    let k = subset.len();
    let rows: Vec<&Vec<F>> = subset.iter().map(|&i| &polytope.a[i]).collect();
    let mut gram = vec![vec![F::zero(); k]; k];
    for i in 0..k {
        for j in 0..k {
            gram[i][j] = linalg::dot(rows[i], rows[j]);
        }
    }
    let rhs: Vec<F> = subset
        .iter()
        .map(|&i| linalg::dot(&polytope.a[i], target) - polytope.b[i])
        .collect();
    let (nu, rank) = linalg::psd_pinv_solve(&gram, &rhs, F::c(1e-12));
    let mut u = target.to_vec();
    for (coef, row) in nu.iter().zip(&rows) {
        u = linalg::add_scaled(&u, -*coef, row);
    }
    // consistency of the equality system (pseudoinverse may not solve it)
    for &i in subset {
        if (linalg::dot(&polytope.a[i], &u) - polytope.b[i]).abs() > feas_tol {
            return None;
        }
    }
    if polytope.residual(&u) > feas_tol {
        return None;
    }
    let duals: Vec<F> = nu.iter().map(|v| F::c(2.0) * *v).collect();
    let full_rank = rank == k;
    if full_rank && duals.iter().any(|l| *l < -dual_tol) {
        return None;
    }
    Some(Projection {
        u: u.clone(),
        active_set: subset.to_vec(),
        duals: if full_rank { Some(duals) } else { None },
        objective: linalg::dist(&u, target),
    })
}

/// Exact QP oracle: `argmin_{u in K(x)} ||u - pi_des(x)||^2`.
pub fn solve_qp_oracle<F: Scalar>(
    instance: &ProblemInstance<F>,
) -> Result<SolveResult<F>, SolveError> {
    match project_polytope(&instance.polytope, &instance.pi_des) {
        Ok(proj) => {
            let feas = instance.polytope.residual(&proj.u);
            // Report the geometric active set (every row tight at the
            // solution), not just the support subset the enumeration used;
            // degenerate vertices have more tight rows than the support.
            let scale = F::c(FEAS_TOL) * (F::one() + linalg::norm(&proj.u));
            let active: Vec<usize> = instance
                .polytope
                .a
                .iter()
                .zip(&instance.polytope.b)
                .enumerate()
                .filter(|(_, (row, bi))| (linalg::dot(row, &proj.u) - **bi).abs() <= scale)
                .map(|(i, _)| i)
                .collect();
            Ok(SolveResult {
                u: proj.u,
                method: Method::QpOracle,
                radius: None,
                active_set: Some(active),
                feasibility_residual: feas,
                iterations: None,
                status: if feas <= F::c(FEAS_TOL) {
                    SolveStatus::Ok
                } else {
                    SolveStatus::Degenerate
                },
            })
        }
        Err(SolveError::NoFeasibleCandidate) => Ok(SolveResult {
            u: instance.pi_des.clone(),
            method: Method::QpOracle,
            radius: None,
            active_set: None,
            feasibility_residual: instance.polytope.residual(&instance.pi_des),
            iterations: None,
            status: SolveStatus::Infeasible,
        }),
        Err(e) => Err(e),
    }
}

/// Optimality certificate for the QP: `u` is primal feasible and
/// `2 (u - pi_des) + sum lambda_i a_i = 0` admits `lambda >= -tol` supported
/// on the constraints active within `tol`.
pub fn verify_kkt<F: Scalar>(instance: &ProblemInstance<F>, u: &[F], tol: F) -> bool {
    if instance.polytope.residual(u) > tol {
        return false;
    }
    let active: Vec<usize> = instance
        .polytope
        .slacks(u)
        .iter()
        .enumerate()
        .filter(|(_, s)| s.abs() <= tol)
        .map(|(i, _)| i)
        .collect();
    let rhs = linalg::scale(&linalg::sub(&instance.pi_des, u), F::c(2.0));
    let cols: Vec<Vec<F>> = active.iter().map(|&i| instance.polytope.a[i].clone()).collect();
    nonneg_ls_residual(&cols, &rhs, tol) <= tol
}

/// Stationarity residual of the QCQP at `u`: the smallest
/// `||2 (u - pi_des) + sum mu_i 2 (u - c_i)||` over `mu >= 0` supported on
/// the active balls, plus feasibility screening. Small values certify `u` as
/// the unique minimizer over the ball intersection.
pub fn qcqp_kkt_residual<F: Scalar>(
    instance: &ProblemInstance<F>,
    settings: &QcqpSettings<F>,
    u: &[F],
    active_tol: F,
) -> Result<F, SolveError> {
    let balls = qcqp_balls(instance, settings.k)?;
    let mut worst_violation = F::zero();
    let mut cols = Vec::new();
    let mut normals = Vec::new();
    for ball in &balls {
        let gap = linalg::dist(u, &ball.center) - ball.radius;
        worst_violation = worst_violation.max(gap);
        if gap.abs() <= active_tol {
            let grad = linalg::scale(&linalg::sub(u, &ball.center), F::c(2.0));
            let norm = linalg::norm(&grad);
            if norm > F::c(1e-12) {
                normals.push(linalg::scale(&grad, F::one() / norm));
            }
            cols.push(grad);
        }
    }
    // Two tangent active balls pinch the feasible set to the single point
    // between them; stationarity multipliers do not exist there, but the
    // point is trivially optimal, so only feasibility counts.
    for i in 0..normals.len() {
        for j in (i + 1)..normals.len() {
            let sum = linalg::add(&normals[i], &normals[j]);
            if linalg::norm(&sum) <= F::c(1e-6) {
                return Ok(worst_violation.max(F::zero()));
            }
        }
    }
    let rhs = linalg::scale(&linalg::sub(&instance.pi_des, u), F::c(2.0));
    Ok(nonneg_ls_residual(&cols, &rhs, F::c(DUAL_TOL)).max(worst_violation))
}

/// Exact Euclidean projection of `z` onto an intersection of balls by
/// enumerating active sphere subsets. Each subset of spheres reduces to one
/// sphere intersected with hyperplanes (pairwise differences of the squared
/// sphere equations); projecting onto that set yields at most two candidate
/// points. The feasible candidate closest to `z` wins.
fn project_ball_intersection<F: Scalar>(balls: &[Ball<F>], z: &[F]) -> Option<Vec<F>> {
    let dim = z.len();
    let feas_tol = F::c(FEAS_TOL) * (F::one() + linalg::norm(z));
    if count_subsets(balls.len(), dim) > ENUM_LIMIT {
        return None;
    }
    let feasible = |u: &[F]| {
        balls
            .iter()
            .all(|b| linalg::dist(u, &b.center) <= b.radius + feas_tol)
    };
    let mut best: Option<(F, Vec<F>)> = None;
    let mut consider = |u: Vec<F>| {
        if feasible(&u) {
            let d = linalg::dist(&u, z);
            if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
                best = Some((d, u));
            }
        }
    };
    consider(z.to_vec());
    for size in 1..=dim.min(balls.len()) {
        let mut subset: Vec<usize> = (0..size).collect();
        loop {
            for candidate in sphere_subset_candidates(balls, &subset, z) {
                consider(candidate);
            }
            if !next_subset(&mut subset, balls.len()) {
                break;
            }
        }
    }
    best.map(|(_, u)| u)
}

/// Candidate projections of `z` onto the intersection of the spheres indexed
/// by `subset`. The spheres collapse to sphere 0 of the subset intersected
/// with the affine set `{u : 2 (c_i - c_0)' u = ||c_i||^2 - ||c_0||^2 + r_0^2
/// - r_i^2}`; restricted to that flat the problem is a plain sphere
/// projection with a reduced center and radius.
fn sphere_subset_candidates<F: Scalar>(
    balls: &[Ball<F>],
    subset: &[usize],
    z: &[F],
) -> Vec<Vec<F>> {
    let lead = &balls[subset[0]];
    let dim = z.len();
    let rows: Vec<Vec<F>> = subset[1..]
        .iter()
        .map(|&i| linalg::scale(&linalg::sub(&balls[i].center, &lead.center), F::c(2.0)))
        .collect();
    let rhs: Vec<F> = subset[1..]
        .iter()
        .map(|&i| {
            let ci = &balls[i].center;
            linalg::dot(ci, ci) - linalg::dot(&lead.center, &lead.center)
                + lead.radius * lead.radius
                - balls[i].radius * balls[i].radius
        })
        .collect();
    let affine_project = |v: &[F]| -> Option<Vec<F>> {
        if rows.is_empty() {
            return Some(v.to_vec());
        }
        let gram: Vec<Vec<F>> = rows
            .iter()
            .map(|ri| rows.iter().map(|rj| linalg::dot(ri, rj)).collect())
            .collect();
        let gap: Vec<F> = rows
            .iter()
            .zip(&rhs)
            .map(|(row, g)| linalg::dot(row, v) - *g)
            .collect();
        let (mu, _) = linalg::psd_pinv_solve(&gram, &gap, F::c(1e-12));
        let mut out = v.to_vec();
        for (row, m) in rows.iter().zip(&mu) {
            out = linalg::add_scaled(&out, -*m, row);
        }
        // Rank-deficient rows can be inconsistent; then the flat is empty.
        let worst = rows
            .iter()
            .zip(&rhs)
            .map(|(row, g)| (linalg::dot(row, &out) - *g).abs())
            .fold(F::zero(), F::max);
        let scale = F::one() + linalg::norm(&out);
        if worst <= F::c(1e-7) * scale {
            Some(out)
        } else {
            None
        }
    };
    let (Some(z_flat), Some(center_flat)) = (affine_project(z), affine_project(&lead.center))
    else {
        return Vec::new();
    };
    let offset = linalg::dist(&lead.center, &center_flat);
    let rho_sq = lead.radius * lead.radius - offset * offset;
    if rho_sq < -F::c(1e-9) {
        return Vec::new();
    }
    let rho = rho_sq.max(F::zero()).sqrt();
    let dir = linalg::sub(&z_flat, &center_flat);
    let dir_norm = linalg::norm(&dir);
    if dir_norm > F::c(1e-12) {
        let unit = linalg::scale(&dir, F::one() / dir_norm);
        vec![
            linalg::add_scaled(&center_flat, rho, &unit),
            linalg::add_scaled(&center_flat, -rho, &unit),
        ]
    } else {
        // `z` projects onto the reduced center; pick a deterministic
        // direction inside the flat (a projected coordinate axis).
        for axis in 0..dim {
            let mut e = vec![F::zero(); dim];
            e[axis] = F::one();
            let shifted = linalg::add(&center_flat, &e);
            if let Some(p) = affine_project(&shifted) {
                let d = linalg::sub(&p, &center_flat);
                let n = linalg::norm(&d);
                if n > F::c(1e-9) {
                    let unit = linalg::scale(&d, F::one() / n);
                    return vec![linalg::add_scaled(&center_flat, rho, &unit)];
                }
            }
        }
        vec![center_flat]
    }
}

/// Smallest residual `||cols * lambda - rhs||` over `lambda >= -sign_tol`,
/// by enumerating support subsets (exact at this scale).
fn nonneg_ls_residual<F: Scalar>(cols: &[Vec<F>], rhs: &[F], sign_tol: F) -> F {
    let mut best = linalg::norm(rhs); // empty support
    let k = cols.len();
    let dim = rhs.len();
    for size in 1..=k.min(dim) {
        let mut subset: Vec<usize> = (0..size).collect();
        loop {
            let sub_cols: Vec<Vec<F>> = subset.iter().map(|&i| cols[i].clone()).collect();
            let (lambda, res) = linalg::least_squares_cols(&sub_cols, rhs, F::c(1e-12));
            if lambda.iter().all(|l| *l >= -sign_tol) {
                best = best.min(res);
            }
            if !next_subset(&mut subset, k) {
                break;
            }
        }
    }
    best
}

fn count_subsets(p: usize, m: usize) -> usize {
    let mut total: usize = 1;
    let mut binom: usize = 1;
    for size in 1..=m.min(p) {
        binom = binom.saturating_mul(p - size + 1) / size;
        total = total.saturating_add(binom);
    }
    total
}

fn next_subset(subset: &mut [usize], n: usize) -> bool {
    let k = subset.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if subset[i] < n - (k - i) {
            subset[i] += 1;
            for j in (i + 1)..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
