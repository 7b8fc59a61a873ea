//! Parametric QP models, instantiation with row normalization, and the
//! registry of built-in case studies.
//!
//! A model holds expression-valued data `A(x)`, `b(x)`, `pi_des(x)` and
//! optionally `pi_f(x)` over a box parameter domain. [`instantiate`]
//! evaluates everything at a fixed `x` and divides each row `(a_i, b_i)` by
//! `||a_i||`, which leaves `K(x)` unchanged while establishing the unit-norm
//! row convention the solvers rely on (slack = Euclidean margin).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::expr::{self, Expression, ExprError};
use crate::linalg;
use crate::scalar::Scalar;

/// Rows below this norm are rejected as degenerate.
pub const ZERO_ROW_TOL: f64 = 1e-14;
/// Allowed feasibility violation of `pi_f` (floating-point noise on active
/// constraints; example1 at x=0 sits exactly on the boundary).
pub const PI_F_FEAS_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum ProblemError {
    #[error("expression error: {0}")]
    Expr(#[from] ExprError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("expression references {what} but problem declares {declared}")]
    UndeclaredVariable { what: String, declared: String },
    #[error("domain lower bound exceeds upper bound at coordinate {0}")]
    DomainOrder(usize),
    #[error("parameter {x:?} outside the problem domain")]
    OutsideDomain { x: Vec<f64> },
    #[error("row {index} of A(x) has norm {norm:.3e} below {ZERO_ROW_TOL:.0e} (degenerate row)")]
    DegenerateRow { index: usize, norm: f64 },
    #[error(
        "feasible point violates constraint {index} by {residual:.3e} (assumption violation: pi_f not in K(x))"
    )]
    AssumptionViolation { index: usize, residual: f64 },
    #[error("no pi_f expressions and no feasible-point provider supplied")]
    NoFeasiblePoint,
    #[error("feasible-point provider failed: {0}")]
    Provider(String),
    #[error("unknown problem `{0}` (built-ins: example1, example2, robinson)")]
    UnknownProblem(String),
    #[error("problem file error: {0}")]
    File(String),
}

/// Box parameter domain, componentwise `lower <= x <= upper`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Domain<F> {
    pub lower: Vec<F>,
    pub upper: Vec<F>,
}

impl<F: Scalar> Domain<F> {
    pub fn contains(&self, x: &[F]) -> bool {
        x.len() == self.lower.len()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(xi, (lo, hi))| *xi >= *lo && *xi <= *hi)
    }
}

/// Lipschitz constants of the (row-normalized) problem data, used by the
/// theoretical-bound calculator. All entries are nonnegative.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LipschitzMetadata<F> {
    #[serde(rename = "L_a")]
    pub l_a: Vec<F>,
    #[serde(rename = "L_b")]
    pub l_b: Vec<F>,
    #[serde(rename = "L_pi_des")]
    pub l_pi_des: F,
    #[serde(rename = "L_pi_f")]
    pub l_pi_f: F,
    #[serde(rename = "U_f_bar")]
    pub u_f_bar: F,
}

/// The constraint polyhedron `{ u : A u <= b }` at a fixed parameter,
/// with unit-norm rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope<F> {
    pub a: Vec<Vec<F>>,
    pub b: Vec<F>,
}

impl<F: Scalar> Polytope<F> {
    pub fn p(&self) -> usize {
        self.a.len()
    }

    pub fn m(&self) -> usize {
        self.a.first().map_or(0, Vec::len)
    }

    /// Constraint slacks `b_i - a_i' u`; all nonnegative iff `u` in `K`.
    pub fn slacks(&self, u: &[F]) -> Vec<F> {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(row, bi)| *bi - linalg::dot(row, u))
            .collect()
    }

    /// `max_i (a_i' u - b_i)`; `<= 0` means `u` is feasible.
    pub fn residual(&self, u: &[F]) -> F {
        self.slacks(u)
            .into_iter()
            .map(|s| -s)
            .fold(F::neg_infinity(), F::max)
    }
}

/// A parametric QP model with expression-valued data.
#[derive(Debug, Clone)]
pub struct ParametricProblem<F> {
    pub name: String,
    /// Parameter dimension.
    pub n: usize,
    /// Decision dimension.
    pub m: usize,
    /// Constraint count.
    pub p: usize,
    pub a_exprs: Vec<Vec<Expression<F>>>,
    pub b_exprs: Vec<Expression<F>>,
    pub pi_des_exprs: Vec<Expression<F>>,
    pub pi_f_exprs: Option<Vec<Expression<F>>>,
    pub domain: Domain<F>,
    pub constants: Option<LipschitzMetadata<F>>,
}

/// Numeric snapshot of a problem at a fixed parameter value.
#[derive(Debug, Clone)]
pub struct ProblemInstance<F> {
    pub x: Vec<F>,
    /// Unit-row constraint set.
    pub polytope: Polytope<F>,
    pub pi_des: Vec<F>,
    pub pi_f: Vec<F>,
    /// Pre-normalization row norms.
    pub raw_row_norms: Vec<F>,
}

/// Supplies `pi_f(x)` when the model does not define it by expressions.
///
/// The provider sees the row-normalized constraint set; implementations are
/// the analytic center and the Steiner point in [`crate::geometry`].
pub trait FeasiblePointProvider<F: Scalar> {
    fn feasible_point(&mut self, polytope: &Polytope<F>, x: &[F]) -> Result<Vec<F>, String>;
}

/// Reborrow an optional provider for a nested call without consuming it.
pub fn reborrow_provider<'a, F: Scalar>(
    provider: &'a mut Option<&mut dyn FeasiblePointProvider<F>>,
) -> Option<&'a mut dyn FeasiblePointProvider<F>> {
    match provider {
        Some(p) => Some(&mut **p),
        None => None,
    }
}

impl<F: Scalar> ParametricProblem<F> {
    /// Validate dimensions, variable references and domain ordering.
    pub fn validate(&self) -> Result<(), ProblemError> {
        if self.a_exprs.len() != self.p || self.b_exprs.len() != self.p {
            return Err(ProblemError::Dimension(format!(
                "expected {} constraint rows, got A: {}, b: {}",
                self.p,
                self.a_exprs.len(),
                self.b_exprs.len()
            )));
        }
        for (i, row) in self.a_exprs.iter().enumerate() {
            if row.len() != self.m {
                return Err(ProblemError::Dimension(format!(
                    "A row {i} has {} entries, expected {}",
                    row.len(),
                    self.m
                )));
            }
        }
        if self.pi_des_exprs.len() != self.m {
            return Err(ProblemError::Dimension(format!(
                "pi_des has {} entries, expected {}",
                self.pi_des_exprs.len(),
                self.m
            )));
        }
        if let Some(pf) = &self.pi_f_exprs {
            if pf.len() != self.m {
                return Err(ProblemError::Dimension(format!(
                    "pi_f has {} entries, expected {}",
                    pf.len(),
                    self.m
                )));
            }
        }
        if self.domain.lower.len() != self.n || self.domain.upper.len() != self.n {
            return Err(ProblemError::Dimension(format!(
                "domain bounds have {}/{} entries, expected {}",
                self.domain.lower.len(),
                self.domain.upper.len(),
                self.n
            )));
        }
        for (j, (lo, hi)) in self.domain.lower.iter().zip(&self.domain.upper).enumerate() {
            if *lo > *hi {
                return Err(ProblemError::DomainOrder(j));
            }
        }
        if let Some(c) = &self.constants {
            if c.l_a.len() != self.p || c.l_b.len() != self.p {
                return Err(ProblemError::Dimension(format!(
                    "constants L_a/L_b have {}/{} entries, expected {}",
                    c.l_a.len(),
                    c.l_b.len(),
                    self.p
                )));
            }
        }
        let check = |e: &Expression<F>, what: &str| -> Result<(), ProblemError> {
            let (xs, us) = expr::free_vars(e);
            let max_x = xs.iter().next_back().copied().unwrap_or(0);
            if max_x > self.n {
                return Err(ProblemError::UndeclaredVariable {
                    what: format!("x{max_x} in {what}"),
                    declared: format!("n = {}", self.n),
                });
            }
            if let Some(&u) = us.iter().next_back() {
                let _ = u;
                return Err(ProblemError::UndeclaredVariable {
                    what: format!("input variables in {what}"),
                    declared: "problem data (inputs only allowed in dynamics)".into(),
                });
            }
            Ok(())
        };
        for (i, row) in self.a_exprs.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                check(e, &format!("A[{i}][{j}]"))?;
            }
        }
        for (i, e) in self.b_exprs.iter().enumerate() {
            check(e, &format!("b[{i}]"))?;
        }
        for (j, e) in self.pi_des_exprs.iter().enumerate() {
            check(e, &format!("pi_des[{j}]"))?;
        }
        if let Some(pf) = &self.pi_f_exprs {
            for (j, e) in pf.iter().enumerate() {
                check(e, &format!("pi_f[{j}]"))?;
            }
        }
        Ok(())
    }

    /// Indices (1-based) of parameters referenced anywhere in the data.
    pub fn referenced_params(&self) -> BTreeSet<usize> {
        let mut all = BTreeSet::new();
        let mut grab = |e: &Expression<F>| {
            let (xs, _) = expr::free_vars(e);
            all.extend(xs);
        };
        self.a_exprs.iter().flatten().for_each(&mut grab);
        self.b_exprs.iter().for_each(&mut grab);
        self.pi_des_exprs.iter().for_each(&mut grab);
        if let Some(pf) = &self.pi_f_exprs {
            pf.iter().for_each(&mut grab);
        }
        all
    }
}

/// Evaluate a problem at `x`, normalize constraint rows, and fill `pi_f`
/// from expressions or from the given provider.
pub fn instantiate<F: Scalar>(
    problem: &ParametricProblem<F>,
    x: &[F],
    mut provider: Option<&mut dyn FeasiblePointProvider<F>>,
) -> Result<ProblemInstance<F>, ProblemError> {
    if !problem.domain.contains(x) {
        return Err(ProblemError::OutsideDomain {
            x: x.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect(),
        });
    }
    let mut a = Vec::with_capacity(problem.p);
    let mut b = Vec::with_capacity(problem.p);
    let mut raw_row_norms = Vec::with_capacity(problem.p);
    for (i, (row_exprs, b_expr)) in problem.a_exprs.iter().zip(&problem.b_exprs).enumerate() {
        let mut row: Vec<F> = row_exprs
            .iter()
            .map(|e| expr::evaluate(e, x, None))
            .collect::<Result<_, _>>()?;
        let mut bi = expr::evaluate(b_expr, x, None)?;
        let nrm = linalg::norm(&row);
        if nrm < F::c(ZERO_ROW_TOL) {
            return Err(ProblemError::DegenerateRow {
                index: i,
                norm: nrm.to_f64().unwrap_or(f64::NAN),
            });
        }
        for v in &mut row {
            *v = *v / nrm;
        }
        bi = bi / nrm;
        raw_row_norms.push(nrm);
        a.push(row);
        b.push(bi);
    }
    let polytope = Polytope { a, b };
    let pi_des: Vec<F> = problem
        .pi_des_exprs
        .iter()
        .map(|e| expr::evaluate(e, x, None))
        .collect::<Result<_, _>>()?;
    // An explicitly supplied provider overrides the problem's own pi_f
    // expressions; the expressions are the default source.
    let pi_f: Vec<F> = match (provider.as_mut(), &problem.pi_f_exprs) {
        (Some(p), _) => p
            .feasible_point(&polytope, x)
            .map_err(ProblemError::Provider)?,
        (None, Some(exprs)) => exprs
            .iter()
            .map(|e| expr::evaluate(e, x, None))
            .collect::<Result<_, _>>()?,
        (None, None) => return Err(ProblemError::NoFeasiblePoint),
    };
    // Assumption check: pi_f must lie in K(x) up to tolerance.
    let slacks = polytope.slacks(&pi_f);
    if let Some((i, s)) = slacks
        .iter()
        .enumerate()
        .filter(|(_, s)| **s < -F::c(PI_F_FEAS_TOL))
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
    {
        return Err(ProblemError::AssumptionViolation {
            index: i,
            residual: (-*s).to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(ProblemInstance { x: x.to_vec(), polytope, pi_des, pi_f, raw_row_norms })
}

/// `max_i (a_i' u - b_i)`; `<= 0` means `u` is in `K(x)`.
pub fn feasibility_residual<F: Scalar>(instance: &ProblemInstance<F>, u: &[F]) -> F {
    instance.polytope.residual(u)
}

// ---------------------------------------------------------------------------
// Problem file format (JSON with expression strings)
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(bound(
    serialize = "F: Serialize",
    deserialize = "F: Deserialize<'de>"
))]
struct ProblemFile<F> {
    name: String,
    n: usize,
    m: usize,
    p: usize,
    domain: Domain<F>,
    #[serde(rename = "A")]
    a: Vec<Vec<String>>,
    b: Vec<String>,
    pi_des: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pi_f: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    constants: Option<LipschitzMetadata<F>>,
}

impl<F: Scalar + Serialize + for<'de> Deserialize<'de>> ParametricProblem<F> {
    pub fn from_json(text: &str) -> Result<Self, ProblemError> {
        let file: ProblemFile<F> =
            serde_json::from_str(text).map_err(|e| ProblemError::File(e.to_string()))?;
        let parse_all = |items: &[String]| -> Result<Vec<Expression<F>>, ProblemError> {
            items.iter().map(|s| Ok(expr::parse(s)?)).collect()
        };
        let problem = ParametricProblem {
            name: file.name,
            n: file.n,
            m: file.m,
            p: file.p,
            a_exprs: file
                .a
                .iter()
                .map(|row| parse_all(row))
                .collect::<Result<_, _>>()?,
            b_exprs: parse_all(&file.b)?,
            pi_des_exprs: parse_all(&file.pi_des)?,
            pi_f_exprs: file.pi_f.as_deref().map(parse_all).transpose()?,
            domain: file.domain,
            constants: file.constants,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn to_json(&self) -> String {
        let file = ProblemFile::<F> {
            name: self.name.clone(),
            n: self.n,
            m: self.m,
            p: self.p,
            domain: self.domain.clone(),
            a: self
                .a_exprs
                .iter()
                .map(|row| row.iter().map(|e| e.to_string()).collect())
                .collect(),
            b: self.b_exprs.iter().map(|e| e.to_string()).collect(),
            pi_des: self.pi_des_exprs.iter().map(|e| e.to_string()).collect(),
            pi_f: self
                .pi_f_exprs
                .as_ref()
                .map(|pf| pf.iter().map(|e| e.to_string()).collect()),
            constants: self.constants.clone(),
        };
        serde_json::to_string_pretty(&file).expect("problem serializes")
    }
}

// ---------------------------------------------------------------------------
// Built-in registry
// ---------------------------------------------------------------------------

pub const EXAMPLE1_JSON: &str = include_str!("../problems/example1.json");
pub const EXAMPLE2_JSON: &str = include_str!("../problems/example2.json");
pub const ROBINSON_JSON: &str = include_str!("../problems/robinson.json");

pub const REGISTRY_NAMES: [&str; 3] = ["example1", "example2", "robinson"];

/// Fetch a built-in case study by name.
pub fn registry_get(name: &str) -> Result<ParametricProblem<f64>, ProblemError> {
    let json = match name {
        "example1" => EXAMPLE1_JSON,
        "example2" => EXAMPLE2_JSON,
        "robinson" => ROBINSON_JSON,
        other => return Err(ProblemError::UnknownProblem(other.to_string())),
    };
    ParametricProblem::from_json(json)
}
