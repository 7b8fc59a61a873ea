//! Closed-loop simulation `x' = f(x, pi(x))` with fixed-step RK4, used to
//! contrast input continuity under the different controllers.

use std::io::Write;

use crate::analysis::fmt_float;
use crate::expr::{self, Expression};
use crate::problem::{
    instantiate, reborrow_provider, Domain, FeasiblePointProvider, ParametricProblem,
};
use crate::scalar::Scalar;
use crate::solvers::{solve_qcqp, solve_qp_oracle, solve_socp, Method, QcqpSettings};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("dynamics need {expected} expressions (state dimension), got {got}")]
    DynamicsShape { expected: usize, got: usize },
    #[error("dynamics reference x{index} beyond state dimension {n}")]
    BadStateRef { index: usize, n: usize },
    #[error("dynamics reference u{index} beyond input dimension {m}")]
    BadInputRef { index: usize, m: usize },
    #[error("dt must be positive and T >= dt")]
    BadTimeStep,
    #[error("initial state outside the problem domain")]
    StartOutsideDomain,
}

/// Right-hand side `f(x, u)`, one expression per state coordinate over
/// variables `x1..xn, u1..um`.
#[derive(Debug, Clone)]
pub struct Dynamics<F> {
    pub f_exprs: Vec<Expression<F>>,
}

impl<F: Scalar> Dynamics<F> {
    pub fn parse(sources: &[&str]) -> Result<Self, expr::ExprError> {
        let f_exprs = sources
            .iter()
            .map(|s| expr::parse(s))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Dynamics { f_exprs })
    }

    fn validate(&self, n: usize, m: usize) -> Result<(), SimError> {
        if self.f_exprs.len() != n {
            return Err(SimError::DynamicsShape { expected: n, got: self.f_exprs.len() });
        }
        for e in &self.f_exprs {
            let (xs, us) = expr::free_vars(e);
            if let Some(&i) = xs.iter().max() {
                if i > n {
                    return Err(SimError::BadStateRef { index: i, n });
                }
            }
            if let Some(&i) = us.iter().max() {
                if i > m {
                    return Err(SimError::BadInputRef { index: i, m });
                }
            }
        }
        Ok(())
    }

    fn eval(&self, x: &[F], u: &[F]) -> Result<Vec<F>, String> {
        self.f_exprs
            .iter()
            .map(|e| expr::evaluate(e, x, Some(u)).map_err(|err| err.to_string()))
            .collect()
    }
}

/// Per-step outcome recorded in the trajectory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    Ok,
    /// State left the problem domain; integration stopped here.
    DomainExit,
    /// Controller or dynamics failure; integration stopped here.
    Failure(String),
}

impl std::fmt::Display for Event {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Event::Ok => f.write_str("ok"),
            Event::DomainExit => f.write_str("domain_exit"),
            Event::Failure(msg) => write!(f, "failure: {msg}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory<F> {
    pub times: Vec<F>,
    pub states: Vec<Vec<F>>,
    /// Controller output at each stored state.
    pub inputs: Vec<Vec<F>>,
    pub events: Vec<Event>,
}

impl<F: Scalar> Trajectory<F> {
    /// Largest step-to-step input change, the chattering metric.
    pub fn max_input_jump(&self) -> F {
        self.inputs
            .windows(2)
            .map(|w| crate::linalg::dist(&w[0], &w[1]))
            .fold(F::zero(), F::max)
    }

    pub fn max_state_step(&self) -> F {
        self.states
            .windows(2)
            .map(|w| crate::linalg::dist(&w[0], &w[1]))
            .fold(F::zero(), F::max)
    }
}

#[derive(Debug, Clone)]
pub struct SimSettings<F> {
    pub dt: F,
    pub t_final: F,
    /// Evaluate the controller once per step (zero-order hold) instead of at
    /// every RK4 stage.
    pub zero_order_hold: bool,
    pub qcqp: QcqpSettings<F>,
}

impl<F: Scalar> Default for SimSettings<F> {
    fn default() -> Self {
        SimSettings {
            dt: F::c(1e-3),
            t_final: F::one(),
            zero_order_hold: false,
            qcqp: QcqpSettings::default(),
        }
    }
}

/// Fixed-step RK4 on `x' = f(x, pi(x))`. By default the controller is
/// re-solved at every RK4 stage; with zero-order hold it is evaluated once
/// per step at the step's start. Integration stops early (with a trailing
/// event) when the state leaves the problem domain or a solve fails.
pub fn simulate<F: Scalar>(
    problem: &ParametricProblem<F>,
    dynamics: &Dynamics<F>,
    controller: Method,
    x0: &[F],
    settings: &SimSettings<F>,
    mut provider: Option<&mut dyn FeasiblePointProvider<F>>,
) -> Result<Trajectory<F>, SimError> {
    dynamics.validate(problem.n, problem.m)?;
    if settings.dt <= F::zero() || settings.t_final < settings.dt {
        return Err(SimError::BadTimeStep);
    }
    if !problem.domain.contains(x0) {
        return Err(SimError::StartOutsideDomain);
    }

    let control = |x: &[F], provider: &mut Option<&mut dyn FeasiblePointProvider<F>>|
     -> Result<Vec<F>, String> {
        let instance = instantiate(problem, x, reborrow_provider(provider))
            .map_err(|e| e.to_string())?;
        let res = match controller {
            Method::Socp => solve_socp(&instance).map_err(|e| e.to_string())?,
            Method::Qcqp => solve_qcqp(&instance, &settings.qcqp).map_err(|e| e.to_string())?,
            Method::QpOracle => solve_qp_oracle(&instance).map_err(|e| e.to_string())?,
        };
        match res.status {
            crate::solvers::SolveStatus::Ok => Ok(res.u),
            other => Err(format!("controller status {other}")),
        }
    };

    let steps = (settings.t_final / settings.dt)
        .to_f64()
        .map(|v| (v + 1e-9).floor() as usize)
        .unwrap_or(0);
    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        inputs: Vec::with_capacity(steps + 1),
        events: Vec::with_capacity(steps + 1),
    };
    let mut x = x0.to_vec();
    let dt = settings.dt;
    let half = dt * F::c(0.5);
    let sixth = dt / F::c(6.0);

    for step in 0..=steps {
        let t = F::from_usize(step).unwrap() * dt;
        let u_here = match control(&x, &mut provider) {
            Ok(u) => u,
            Err(msg) => {
                traj.times.push(t);
                traj.states.push(x.clone());
                traj.inputs.push(vec![F::nan(); problem.m]);
                traj.events.push(Event::Failure(msg));
                return Ok(traj);
            }
        };
        traj.times.push(t);
        traj.states.push(x.clone());
        traj.inputs.push(u_here.clone());
        traj.events.push(Event::Ok);
        if step == steps {
            break;
        }

        // one RK4 step; each stage resolves the controller unless held
        enum StepError {
            Exit(Vec<f64>),
            Fail(String),
        }
        let stage = |xs: Vec<F>, provider: &mut Option<&mut dyn FeasiblePointProvider<F>>|
         -> Result<Vec<F>, StepError> {
            if !problem.domain.contains(&xs) {
                return Err(StepError::Exit(
                    xs.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect(),
                ));
            }
            let u = if settings.zero_order_hold {
                u_here.clone()
            } else {
                control(&xs, provider).map_err(StepError::Fail)?
            };
            dynamics.eval(&xs, &u).map_err(StepError::Fail)
        };
        let result = (|| -> Result<Vec<F>, StepError> {
            let k1 = dynamics.eval(&x, &u_here).map_err(StepError::Fail)?;
            let k2 = stage(crate::linalg::add_scaled(&x, half, &k1), &mut provider)?;
            let k3 = stage(crate::linalg::add_scaled(&x, half, &k2), &mut provider)?;
            let k4 = stage(crate::linalg::add_scaled(&x, dt, &k3), &mut provider)?;
            let mut next = x.clone();
            for j in 0..next.len() {
                next[j] = next[j]
                    + sixth * (k1[j] + F::c(2.0) * k2[j] + F::c(2.0) * k3[j] + k4[j]);
            }
            if problem.domain.contains(&next) {
                Ok(next)
            } else {
                Err(StepError::Exit(
                    next.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect(),
                ))
            }
        })();
        match result {
            Ok(next) => x = next,
            Err(StepError::Exit(escapee)) => {
                // clip to the domain box and stop with an exit event
                let escapee: Vec<F> = escapee.iter().map(|v| F::c(*v)).collect();
                let clipped = clip(&escapee, &problem.domain);
                let t_next = F::from_usize(step + 1).unwrap() * dt;
                traj.times.push(t_next);
                traj.states.push(clipped);
                traj.inputs.push(vec![F::nan(); problem.m]);
                traj.events.push(Event::DomainExit);
                return Ok(traj);
            }
            Err(StepError::Fail(msg)) => {
                *traj.events.last_mut().unwrap() = Event::Failure(msg);
                return Ok(traj);
            }
        }
    }
    Ok(traj)
}

fn clip<F: Scalar>(x: &[F], domain: &Domain<F>) -> Vec<F> {
    x.iter()
        .enumerate()
        .map(|(j, v)| v.max(domain.lower[j]).min(domain.upper[j]))
        .collect()
}

/// Trajectory CSV: `t, x_1..x_n, u_1..u_m, status`.
pub fn write_trajectory_csv<F: Scalar, W: Write>(
    out: &mut W,
    traj: &Trajectory<F>,
    n: usize,
    m: usize,
) -> std::io::Result<()> {
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|j| format!("x_{j}")));
    header.extend((1..=m).map(|j| format!("u_{j}")));
    header.push("status".into());
    writeln!(out, "{}", header.join(","))?;
    for i in 0..traj.times.len() {
        let mut row = vec![fmt_float(traj.times[i])];
        row.extend(traj.states[i].iter().map(|v| fmt_float(*v)));
        row.extend(traj.inputs[i].iter().map(|v| fmt_float(*v)));
        row.push(traj.events[i].to_string().replace(',', ";"));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// The fixed saturated-integrator benchmark: `x' = u`,
/// `K = {||u||_inf <= 1}`, `pi_des` a rotation-damped feedback. Smooth
/// closed loop while the feedback stays saturated, so RK4 order checks
/// apply.
pub fn saturated_integrator() -> ParametricProblem<f64> {
    let text = r#"{
        "name": "saturated_integrator",
        "n": 2, "m": 2, "p": 4,
        "A": [["1", "0"], ["-1", "0"], ["0", "1"], ["0", "-1"]],
        "b": ["1", "1", "1", "1"],
        "pi_des": ["0 - x1 - 0.5*x2", "0.5*x1 - x2"],
        "pi_f": ["0", "0"],
        "domain": {"lower": [-10, -10], "upper": [10, 10]}
    }"#;
    ParametricProblem::from_json(text).expect("valid built-in benchmark")
}
