//! Geometric primitives: projection onto a Euclidean ball, analytic center
//! of a polytope by damped Newton on the log barrier, support points and the
//! Steiner point by Monte Carlo over support directions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg;
use crate::problem::{FeasiblePointProvider, Polytope};
use crate::scalar::Scalar;
use crate::solvers;

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("negative ball radius {0}")]
    NegativeRadius(f64),
    #[error("no strictly feasible point: maximum constraint slack is {max_slack:.3e}")]
    EmptyInterior { max_slack: f64 },
    #[error("K likely unbounded: {0}")]
    LikelyUnbounded(String),
    #[error("Newton iteration cap {max_iter} exceeded (gradient norm {grad_norm:.3e})")]
    IterationCap { max_iter: usize, grad_norm: f64 },
    #[error("polytope unbounded in the requested direction")]
    UnboundedDirection,
    #[error("sample count must be at least 1")]
    ZeroSamples,
    #[error("vertex enumeration guard exceeded ({subsets} subsets)")]
    EnumerationGuard { subsets: usize },
    #[error("projection subproblem failed: {0}")]
    Projection(String),
}

/// Closed Euclidean ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball<F> {
    pub center: Vec<F>,
    pub radius: F,
}

impl<F: Scalar> Ball<F> {
    /// Project a point onto the ball.
    pub fn project(&self, point: &[F]) -> Vec<F> {
        let v = linalg::sub(point, &self.center);
        let shifted = project_ball_unchecked(&v, self.radius.max(F::zero()));
        linalg::add(&self.center, &shifted)
    }
}

/// Projection of `v_des` onto the origin-centered ball of the given radius:
/// `min(radius, ||v_des||) * v_des / ||v_des||`, with the zero vector when
/// `||v_des|| = 0`.
pub fn project_ball<F: Scalar>(v_des: &[F], radius: F) -> Result<Vec<F>, GeometryError> {
    if radius < F::zero() {
        return Err(GeometryError::NegativeRadius(radius.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(project_ball_unchecked(v_des, radius))
}

fn project_ball_unchecked<F: Scalar>(v_des: &[F], radius: F) -> Vec<F> {
    let n = linalg::norm(v_des);
    if n == F::zero() {
        return vec![F::zero(); v_des.len()];
    }
    let s = radius.min(n) / n;
    linalg::scale(v_des, s)
}

/// Damped-Newton parameters for the analytic-center computation.
#[derive(Debug, Clone, Copy)]
pub struct NewtonSettings<F> {
    /// Gradient-norm stopping threshold.
    pub tol: F,
    pub max_iter: usize,
    /// Line-search step shrink factor, in (0, 1).
    pub backtrack_beta: F,
    /// Armijo slope fraction, in (0, 0.5).
    pub backtrack_alpha: F,
}

impl<F: Scalar> Default for NewtonSettings<F> {
    fn default() -> Self {
        NewtonSettings {
            tol: F::c(1e-10),
            max_iter: 100,
            backtrack_beta: F::c(0.5),
            backtrack_alpha: F::c(0.1),
        }
    }
}

/// Analytic-center result: the minimizer of the log barrier and the number
/// of Newton iterations it took.
#[derive(Debug, Clone)]
pub struct CenterResult<F> {
    pub u: Vec<F>,
    pub iterations: usize,
    pub grad_norm: F,
}

fn barrier_value<F: Scalar>(slacks: &[F]) -> F {
    -slacks.iter().map(|s| s.ln()).sum::<F>()
}

/// Analytic center of `{u : A u <= b}`: the minimizer of
/// `-sum_i log(b_i - a_i' u)`, by Newton's method with a slack-preserving
/// backtracking line search.
///
/// Starts from `init` when it is strictly feasible, otherwise from the
/// max-min-slack point of [`strictly_feasible_start`].
pub fn analytic_center<F: Scalar>(
    polytope: &Polytope<F>,
    init: Option<&[F]>,
    settings: &NewtonSettings<F>,
) -> Result<CenterResult<F>, GeometryError> {
    let m = polytope.m();
    let mut u = match init {
        Some(u0) if polytope.slacks(u0).iter().all(|s| *s > F::zero()) => u0.to_vec(),
        _ => strictly_feasible_start(polytope)?.0,
    };
    let hess_tol = F::c(1e-12);
    let mut prev_grad_norm = F::infinity();
    for iter in 0..settings.max_iter {
        let slacks = polytope.slacks(&u);
        let mut grad = vec![F::zero(); m];
        let mut hess = vec![vec![F::zero(); m]; m];
        for (row, s) in polytope.a.iter().zip(&slacks) {
            let inv = F::one() / *s;
            for j in 0..m {
                grad[j] = grad[j] + row[j] * inv;
                for l in 0..m {
                    hess[j][l] = hess[j][l] + row[j] * row[l] * inv * inv;
                }
            }
        }
        let grad_norm = linalg::norm(&grad);
        if grad_norm <= settings.tol {
            return Ok(CenterResult { u, iterations: iter, grad_norm });
        }
        // Floating-point floor: accepted steps that no longer reduce the
        // gradient while it idles just above `tol` mean the minimizer is
        // resolved to working precision.
        if grad_norm >= prev_grad_norm && grad_norm <= settings.tol * F::c(1e3) {
            return Ok(CenterResult { u, iterations: iter, grad_norm });
        }
        prev_grad_norm = grad_norm;
        let neg_grad: Vec<F> = grad.iter().map(|g| -*g).collect();
        let dir = match linalg::spd_solve(&hess, &neg_grad, hess_tol) {
            Some(d) => d,
            None => {
                return Err(GeometryError::LikelyUnbounded(format!(
                    "barrier Hessian singular with gradient norm {:.3e}",
                    grad_norm.to_f64().unwrap_or(f64::NAN)
                )))
            }
        };
        // Newton decrement: once it reaches the floating-point floor the
        // barrier value cannot improve any more, even if grad_norm idles a
        // hair above `tol` (full steps then cycle at the last digit).
        let decrement = -linalg::dot(&grad, &dir);
        if decrement <= F::c(1e-18) && grad_norm <= settings.tol * F::c(1e3) {
            return Ok(CenterResult { u, iterations: iter, grad_norm });
        }
        // shrink until all slacks stay strictly positive, then Armijo
        let g0 = barrier_value(&slacks);
        let slope = linalg::dot(&grad, &dir);
        let mut t = F::one();
        let mut accepted = false;
        for _ in 0..80 {
            let trial = linalg::add_scaled(&u, t, &dir);
            let trial_slacks = polytope.slacks(&trial);
            if trial_slacks.iter().all(|s| *s > F::zero())
                && barrier_value(&trial_slacks) <= g0 + settings.backtrack_alpha * t * slope
            {
                u = trial;
                accepted = true;
                break;
            }
            t = t * settings.backtrack_beta;
        }
        if !accepted {
            // Step underflow: the barrier cannot be decreased further in
            // floating point. Accept the iterate when the gradient has
            // already been driven near the tolerance; otherwise report the
            // stall.
            if grad_norm <= settings.tol * F::c(1e3) {
                return Ok(CenterResult { u, iterations: iter, grad_norm });
            }
            return Err(GeometryError::IterationCap {
                max_iter: settings.max_iter,
                grad_norm: grad_norm.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    let grad_norm = {
        let slacks = polytope.slacks(&u);
        let mut grad = vec![F::zero(); m];
        for (row, s) in polytope.a.iter().zip(&slacks) {
            for j in 0..m {
                grad[j] = grad[j] + row[j] / *s;
            }
        }
        linalg::norm(&grad)
    };
    // Same near-tolerance acceptance as the stall branch above: full Newton
    // steps can bounce around the minimizer at the last floating-point digit.
    if grad_norm <= settings.tol * F::c(1e3) {
        return Ok(CenterResult { u, iterations: settings.max_iter, grad_norm });
    }
    Err(GeometryError::IterationCap {
        max_iter: settings.max_iter,
        grad_norm: grad_norm.to_f64().unwrap_or(f64::NAN),
    })
}

/// A point maximizing the minimum constraint slack, found by projecting a
/// far point onto the epigraph-style augmented polytope
/// `{(u, s) : a_i' u + s <= b_i}`. With unit rows the slack is the Euclidean
/// margin, so this is the deepest (Chebyshev-center) point; positive-
/// dimensional optimal faces resolve to the least-norm `u`.
///
/// Returns `(u, max_slack)`.
pub fn strictly_feasible_start<F: Scalar>(
    polytope: &Polytope<F>,
) -> Result<(Vec<F>, F), GeometryError> {
    let m = polytope.m();
    let b_scale = polytope
        .b
        .iter()
        .fold(F::one(), |acc, v| acc.max(v.abs()));
    let big = F::c(1e4) * b_scale;
    let aug = Polytope {
        a: polytope
            .a
            .iter()
            .map(|row| {
                let mut r = row.clone();
                r.push(F::one());
                r
            })
            .collect(),
        b: polytope.b.clone(),
    };
    let mut target = vec![F::zero(); m + 1];
    target[m] = big;
    let proj = solvers::project_polytope(&aug, &target)
        .map_err(|e| GeometryError::Projection(e.to_string()))?;
    let (u, slack) = (proj.u[..m].to_vec(), proj.u[m]);
    if slack >= big * F::c(0.25) {
        return Err(GeometryError::LikelyUnbounded(
            "minimum slack can be made arbitrarily large".into(),
        ));
    }
    if slack <= F::zero() {
        return Err(GeometryError::EmptyInterior {
            max_slack: slack.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok((u, slack))
}

const FEAS_TOL: f64 = 1e-9;

/// All vertices of the polytope, by enumerating row m-subsets.
pub fn vertices<F: Scalar>(polytope: &Polytope<F>) -> Result<Vec<Vec<F>>, GeometryError> {
    let (p, m) = (polytope.p(), polytope.m());
    if p < m {
        return Ok(Vec::new());
    }
    let subsets = binomial(p, m);
    if subsets > 1_000_000 {
        return Err(GeometryError::EnumerationGuard { subsets });
    }
    let mut verts: Vec<Vec<F>> = Vec::new();
    let mut subset = (0..m).collect::<Vec<usize>>();
    loop {
        let rows: Vec<Vec<F>> = subset.iter().map(|&i| polytope.a[i].clone()).collect();
        let rhs: Vec<F> = subset.iter().map(|&i| polytope.b[i]).collect();
        if let Some(v) = solve_square(&rows, &rhs) {
            if polytope.residual(&v) <= F::c(FEAS_TOL)
                && !verts.iter().any(|w| linalg::dist(w, &v) <= F::c(1e-9))
            {
                verts.push(v);
            }
        }
        if !next_subset(&mut subset, p) {
            break;
        }
    }
    Ok(verts)
}

/// `argmax_{u in K} direction' u`, ties broken by the least-norm maximizer
/// (the projection of the origin onto the optimal face).
pub fn support_point<F: Scalar>(
    polytope: &Polytope<F>,
    direction: &[F],
) -> Result<Vec<F>, GeometryError> {
    check_bounded_in(polytope, direction)?;
    let verts = vertices(polytope)?;
    match best_support(&verts, direction) {
        Some(best) => {
            // least-norm point of the face {u in K : direction' u = value}
            let value = linalg::dot(direction, &best);
            let nrm = linalg::norm(direction);
            let unit = linalg::scale(direction, F::one() / nrm);
            let level = value / nrm;
            let mut face = polytope.clone();
            face.a.push(unit.clone());
            face.b.push(level);
            face.a.push(linalg::scale(&unit, -F::one()));
            face.b.push(-level);
            let origin = vec![F::zero(); polytope.m()];
            solvers::project_polytope(&face, &origin)
                .map(|p| p.u)
                .map_err(|e| GeometryError::Projection(e.to_string()))
        }
        None => {
            // no vertices: K contains a line; fall back to projecting a far
            // point along the direction
            let unit = {
                let n = linalg::norm(direction);
                linalg::scale(direction, F::one() / n)
            };
            let big = F::c(1e7)
                * polytope.b.iter().fold(F::one(), |acc, v| acc.max(v.abs()));
            let target = linalg::scale(&unit, big);
            solvers::project_polytope(polytope, &target)
                .map(|p| p.u)
                .map_err(|e| GeometryError::Projection(e.to_string()))
        }
    }
}

fn best_support<F: Scalar>(verts: &[Vec<F>], direction: &[F]) -> Option<Vec<F>> {
    let tie = F::c(1e-9);
    let mut best: Option<(F, F, Vec<F>)> = None; // (value, norm, vertex)
    for v in verts {
        let val = linalg::dot(direction, v);
        let nrm = linalg::norm(v);
        best = match best {
            None => Some((val, nrm, v.clone())),
            Some((bv, bn, bu)) => {
                if val > bv + tie || (val >= bv - tie && nrm < bn) {
                    Some((val, nrm, v.clone()))
                } else {
                    Some((bv, bn, bu))
                }
            }
        };
    }
    best.map(|(_, _, v)| v)
}

/// Unboundedness test: the recession cone `{d : A d <= 0}` admits a
/// direction with positive inner product against `direction` iff the
/// polytope is unbounded that way.
fn check_bounded_in<F: Scalar>(
    polytope: &Polytope<F>,
    direction: &[F],
) -> Result<(), GeometryError> {
    let m = polytope.m();
    let mut a: Vec<Vec<F>> = polytope.a.clone();
    let mut b = vec![F::zero(); polytope.p()];
    for j in 0..m {
        let mut pos = vec![F::zero(); m];
        pos[j] = F::one();
        let mut neg = vec![F::zero(); m];
        neg[j] = -F::one();
        a.push(pos);
        a.push(neg);
        b.push(F::one());
        b.push(F::one());
    }
    let cone_box = Polytope { a, b };
    let unit = {
        let n = linalg::norm(direction);
        if n == F::zero() {
            return Ok(());
        }
        linalg::scale(direction, F::one() / n)
    };
    let target = linalg::scale(&unit, F::c(1e3));
    let proj = solvers::project_polytope(&cone_box, &target)
        .map_err(|e| GeometryError::Projection(e.to_string()))?;
    if linalg::dot(&unit, &proj.u) > F::c(1e-6) {
        return Err(GeometryError::UnboundedDirection);
    }
    Ok(())
}

/// Monte Carlo Steiner-point estimate with its per-coordinate standard error.
#[derive(Debug, Clone)]
pub struct SteinerEstimate<F> {
    pub point: Vec<F>,
    pub std_err: Vec<F>,
    pub samples: usize,
}

/// Steiner point of `K`: the mean of support points over directions drawn
/// uniformly from the unit ball. Deterministic for a fixed seed; samples are
/// averaged in draw order.
pub fn steiner_point<F: Scalar>(
    polytope: &Polytope<F>,
    samples: usize,
    seed: u64,
) -> Result<SteinerEstimate<F>, GeometryError> {
    if samples == 0 {
        return Err(GeometryError::ZeroSamples);
    }
    let m = polytope.m();
    // compactness check along all coordinate axes once, not per sample
    for j in 0..m {
        let mut dir = vec![F::zero(); m];
        dir[j] = F::one();
        check_bounded_in(polytope, &dir)?;
        dir[j] = -F::one();
        check_bounded_in(polytope, &dir)?;
    }
    let verts = vertices(polytope)?;
    if verts.is_empty() {
        return Err(GeometryError::LikelyUnbounded("polytope has no vertices".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = vec![F::zero(); m];
    let mut sum_sq = vec![F::zero(); m];
    for _ in 0..samples {
        let dir = sample_unit_ball::<F>(m, &mut rng);
        let sp = best_support(&verts, &dir).expect("nonempty vertex set");
        for j in 0..m {
            sum[j] = sum[j] + sp[j];
            sum_sq[j] = sum_sq[j] + sp[j] * sp[j];
        }
    }
    let nf = F::c(samples as f64);
    let point: Vec<F> = sum.iter().map(|s| *s / nf).collect();
    let std_err: Vec<F> = (0..m)
        .map(|j| {
            if samples < 2 {
                return F::zero();
            }
            let var = (sum_sq[j] - sum[j] * sum[j] / nf) / F::c((samples - 1) as f64);
            (var.max(F::zero()) / nf).sqrt()
        })
        .collect();
    Ok(SteinerEstimate { point, std_err, samples })
}

fn sample_unit_ball<F: Scalar>(m: usize, rng: &mut ChaCha8Rng) -> Vec<F> {
    loop {
        let g: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n < 1e-12 {
            continue;
        }
        let radius = rng.gen::<f64>().powf(1.0 / m as f64);
        return g.iter().map(|v| F::c(v / n * radius)).collect();
    }
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
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

/// Square solve by Gaussian elimination with partial pivoting; `None` when
/// singular to working precision.
fn solve_square<F: Scalar>(rows: &[Vec<F>], rhs: &[F]) -> Option<Vec<F>> {
    let n = rows.len();
    let mut m: Vec<Vec<F>> = rows
        .iter()
        .zip(rhs)
        .map(|(r, b)| {
            let mut row = r.clone();
            row.push(*b);
            row
        })
        .collect();
    for col in 0..n {
        let (piv, piv_val) = (col..n)
            .map(|i| (i, m[i][col].abs()))
            .fold((col, F::zero()), |acc, c| if c.1 > acc.1 { c } else { acc });
        if piv_val < F::c(1e-12) {
            return None;
        }
        m.swap(col, piv);
        for i in 0..n {
            if i == col {
                continue;
            }
            let f = m[i][col] / m[col][col];
            for j in col..=n {
                let upd = m[col][j];
                m[i][j] = m[i][j] - f * upd;
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

// ---------------------------------------------------------------------------
// Feasible-point providers
// ---------------------------------------------------------------------------

/// Which feasible-point source to use when instantiating a problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderTag {
    /// Use the problem's own `pi_f` expressions.
    Expr,
    AnalyticCenter,
    Steiner,
}

impl std::str::FromStr for ProviderTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "expr" => Ok(ProviderTag::Expr),
            "analytic_center" => Ok(ProviderTag::AnalyticCenter),
            "steiner" => Ok(ProviderTag::Steiner),
            other => Err(format!("unknown provider `{other}` (expr | analytic_center | steiner)")),
        }
    }
}

/// `pi_f(x) = Ac(K(x))`, warm-started from the previous query so that grid
/// sweeps converge in a few Newton steps per point.
pub struct AnalyticCenterProvider<F> {
    pub settings: NewtonSettings<F>,
    warm: Option<Vec<F>>,
    pub max_iterations_seen: usize,
}

impl<F: Scalar> AnalyticCenterProvider<F> {
    pub fn new(settings: NewtonSettings<F>) -> Self {
        AnalyticCenterProvider { settings, warm: None, max_iterations_seen: 0 }
    }
}

impl<F: Scalar> FeasiblePointProvider<F> for AnalyticCenterProvider<F> {
    fn feasible_point(&mut self, polytope: &Polytope<F>, _x: &[F]) -> Result<Vec<F>, String> {
        let res = analytic_center(polytope, self.warm.as_deref(), &self.settings)
            .map_err(|e| e.to_string())?;
        self.max_iterations_seen = self.max_iterations_seen.max(res.iterations);
        self.warm = Some(res.u.clone());
        Ok(res.u)
    }
}

/// `pi_f(x) = St(K(x))`, Monte Carlo with a fixed seed.
pub struct SteinerProvider {
    pub samples: usize,
    pub seed: u64,
}

impl<F: Scalar> FeasiblePointProvider<F> for SteinerProvider {
    fn feasible_point(&mut self, polytope: &Polytope<F>, _x: &[F]) -> Result<Vec<F>, String> {
        let est = steiner_point(polytope, self.samples, self.seed).map_err(|e| e.to_string())?;
        // The estimate can fall marginally outside K near low-volume sets;
        // it is accepted as long as the instantiate-side tolerance holds.
        Ok(est.point)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn box2(half: f64) -> Polytope<f64> {
        Polytope {
            a: vec![
                vec![1.0, 0.0],
                vec![-1.0, 0.0],
                vec![0.0, 1.0],
                vec![0.0, -1.0],
            ],
            b: vec![half; 4],
        }
    }

    fn simplex() -> Polytope<f64> {
        let s = 0.5_f64.sqrt();
        Polytope {
            a: vec![vec![-1.0, 0.0], vec![0.0, -1.0], vec![s, s]],
            b: vec![0.0, 0.0, s],
        }
    }

    #[test]
    fn project_ball_examples() {
        assert_eq!(project_ball(&[3.0, 4.0], 10.0).unwrap(), vec![3.0, 4.0]);
        let p: Vec<f64> = project_ball(&[3.0, 4.0], 1.0).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        assert_eq!(project_ball(&[0.0, 0.0], 0.0).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(
            project_ball(&[1.0], -0.5),
            Err(GeometryError::NegativeRadius(_))
        ));
    }

    #[test]
    fn analytic_center_box_is_origin() {
        let res = analytic_center(&box2(1.0), None, &NewtonSettings::default()).unwrap();
        assert!(linalg::norm(&res.u) < 1e-8, "center {:?}", res.u);
        assert!(res.grad_norm <= 1e-10);
    }

    #[test]
    fn analytic_center_simplex_is_third() {
        // hand solution of grad G = 0 gives u1 = u2 = 1/3; also confirmed by
        // a coarse grid search over the barrier below
        let poly = simplex();
        let res = analytic_center(&poly, None, &NewtonSettings::default()).unwrap();
        assert!((res.u[0] - 1.0 / 3.0).abs() < 1e-9, "{:?}", res.u);
        assert!((res.u[1] - 1.0 / 3.0).abs() < 1e-9);

        let mut best = (f64::INFINITY, vec![0.0, 0.0]);
        for i in 1..100 {
            for j in 1..100 {
                let u = vec![i as f64 / 100.0, j as f64 / 100.0];
                let slacks = poly.slacks(&u);
                if slacks.iter().all(|s| *s > 0.0) {
                    let g = barrier_value(&slacks);
                    if g < best.0 {
                        best = (g, u);
                    }
                }
            }
        }
        assert!(linalg::dist(&best.1, &res.u) < 0.02);
    }

    #[test]
    fn strictly_feasible_start_box() {
        let (u, slack) = strictly_feasible_start(&box2(1.0)).unwrap();
        assert!(linalg::norm(&u) < 1e-9);
        assert!((slack - 1.0).abs() < 1e-9);
    }

    #[test]
    fn strictly_feasible_start_unbounded_slab() {
        // example2 at the origin: two identical halfplanes, slack grows with u1
        let slab = Polytope {
            a: vec![vec![-1.0, 0.0], vec![-1.0, 0.0]],
            b: vec![-1.0, -1.0],
        };
        assert!(matches!(
            strictly_feasible_start(&slab),
            Err(GeometryError::LikelyUnbounded(_))
        ));
    }

    #[test]
    fn strictly_feasible_start_empty_interior() {
        // example1 at x=0: K = {u1 = 1}
        let line = Polytope {
            a: vec![vec![1.0, 0.0], vec![-1.0, 0.0]],
            b: vec![1.0, -1.0],
        };
        match strictly_feasible_start(&line) {
            Err(GeometryError::EmptyInterior { max_slack }) => {
                assert!(max_slack.abs() < 1e-9)
            }
            other => panic!("expected empty interior, got {other:?}"),
        }
    }

    #[test]
    fn support_point_examples() {
        let b = box2(1.0);
        let p = support_point(&b, &[1.0, 0.0]).unwrap();
        assert!(linalg::dist(&p, &[1.0, 0.0]) < 1e-9, "{p:?}");
        let q = support_point(&b, &[1.0, 1.0]).unwrap();
        assert!(linalg::dist(&q, &[1.0, 1.0]) < 1e-9);
        let t = support_point(&simplex(), &[0.0, -1.0]).unwrap();
        assert!(linalg::dist(&t, &[0.0, 0.0]) < 1e-9, "{t:?}");
    }

    #[test]
    fn support_point_dominates_all_vertices() {
        let polys = [box2(1.0), box2(0.3), simplex()];
        let dirs = [
            [1.0, 0.0],
            [0.3, -0.7],
            [-1.0, -1.0],
            [0.0, 1.0],
            [-0.2, 0.9],
        ];
        for poly in &polys {
            let verts = vertices(poly).unwrap();
            assert!(!verts.is_empty());
            for d in &dirs {
                let sp = support_point(poly, d).unwrap();
                let v_sp = linalg::dot(d, &sp);
                for v in &verts {
                    assert!(v_sp >= linalg::dot(d, v) - 1e-9);
                }
            }
        }
    }

    #[test]
    fn support_point_unbounded_direction() {
        let halfplane = Polytope { a: vec![vec![1.0, 0.0]], b: vec![1.0] };
        assert!(matches!(
            support_point(&halfplane, &[-1.0, 0.0]),
            Err(GeometryError::UnboundedDirection)
        ));
    }

    #[test]
    fn steiner_point_symmetric_box() {
        let est = steiner_point(&box2(1.0), 4096, 0).unwrap();
        for j in 0..2 {
            assert!(
                est.point[j].abs() <= 3.0 * est.std_err[j] + 1e-12,
                "coord {j}: {} vs se {}",
                est.point[j],
                est.std_err[j]
            );
        }
    }

    #[test]
    fn steiner_point_regular_polygon_centered() {
        // regular 16-gon centered at c = [0.5, -0.25]
        let c = [0.5, -0.25];
        let k = 16;
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for i in 0..k {
            let th = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
            let n = vec![th.cos(), th.sin()];
            b.push(1.0 + linalg::dot(&n, &c));
            a.push(n);
        }
        let poly = Polytope { a, b };
        let est = steiner_point(&poly, 4096, 7).unwrap();
        for j in 0..2 {
            assert!((est.point[j] - c[j]).abs() <= 3.0 * est.std_err[j]);
        }
    }

    #[test]
    fn steiner_point_triangle_matches_quadrature_oracle() {
        // independent oracle: deterministic quadrature over directions
        let poly = simplex();
        let verts = vertices(&poly).unwrap();
        let nq = 4096;
        let mut oracle = vec![0.0, 0.0];
        for i in 0..nq {
            let th = 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / nq as f64;
            let d = [th.cos(), th.sin()];
            let sp = best_support(&verts, &d).unwrap();
            oracle[0] += sp[0] / nq as f64;
            oracle[1] += sp[1] / nq as f64;
        }
        let est = steiner_point(&poly, 100_000, 0).unwrap();
        for j in 0..2 {
            assert!(
                (est.point[j] - oracle[j]).abs() <= 3.0 * est.std_err[j],
                "coord {j}: {} vs oracle {}",
                est.point[j],
                oracle[j]
            );
        }
    }

    #[test]
    fn steiner_consistency_across_sample_counts() {
        let poly = simplex();
        let small = steiner_point(&poly, 10_000, 3).unwrap();
        let large = steiner_point(&poly, 100_000, 3).unwrap();
        for j in 0..2 {
            assert!((small.point[j] - large.point[j]).abs() <= 4.0 * large.std_err[j]);
        }
    }

    #[test]
    fn steiner_deterministic_per_seed() {
        let a = steiner_point(&box2(1.0), 512, 42).unwrap();
        let b = steiner_point(&box2(1.0), 512, 42).unwrap();
        assert_eq!(a.point, b.point);
        assert!(matches!(
            steiner_point(&box2(1.0), 0, 0),
            Err(GeometryError::ZeroSamples)
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Lemma-style nonexpansiveness with radius sensitivity:
            // ||P_{r1}(u1) - P_{r2}(u2)|| <= ||u1 - u2|| + |r1 - r2|
            #[test]
            fn ball_projection_nonexpansive(
                u1 in prop::collection::vec(-10.0..10.0f64, 3),
                u2 in prop::collection::vec(-10.0..10.0f64, 3),
                r1 in 0.0..5.0f64,
                r2 in 0.0..5.0f64,
            ) {
                let p1 = project_ball(&u1, r1).unwrap();
                let p2 = project_ball(&u2, r2).unwrap();
                prop_assert!(
                    linalg::dist(&p1, &p2)
                        <= linalg::dist(&u1, &u2) + (r1 - r2).abs() + 1e-12
                );
            }

            #[test]
            fn ball_projection_inside(
                u in prop::collection::vec(-10.0..10.0f64, 3),
                r in 0.0..5.0f64,
            ) {
                let p = project_ball(&u, r).unwrap();
                prop_assert!(linalg::norm(&p) <= r + 1e-12);
            }
        }
    }
}

