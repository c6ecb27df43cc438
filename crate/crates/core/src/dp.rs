//! Dynamic-programming engine shared by the control and decision-process
//! solvers.
//!
//! A stage is stored as, for every state and action, a list of outcomes
//! `(next state, cost)` together with candidate laws over those outcomes.
//! A control model indexes outcomes by noise atom; a decision process indexes
//! them by next state.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::Categorical;
use crate::nested::StageRiskProfile;
use crate::risk::{evaluate, RiskSpec};

/// Values per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueFunction(pub Vec<f64>);

impl ValueFunction {
    pub fn zeros(states: usize) -> Self {
        ValueFunction(vec![0.0; states])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Sup-norm distance.
    pub fn distance(&self, other: &ValueFunction) -> f64 {
        sup_distance(&self.0, &other.0)
    }
}

/// Action index per state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Policy(pub Vec<usize>);

impl Policy {
    pub fn actions(&self) -> &[usize] {
        &self.0
    }
}

/// Backward-induction result. `values[t]` is `V_{t+1}` for `t = 0..T` and
/// `values[T]` the terminal cost; `policy[t]` is the greedy rule of stage `t + 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpSolution {
    pub values: Vec<ValueFunction>,
    pub policy: Vec<Policy>,
}

impl DpSolution {
    /// First-stage value at `state`.
    pub fn value_at(&self, state: usize) -> f64 {
        self.values[0].0[state]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueIteration {
    pub value: ValueFunction,
    pub policy: Policy,
    pub iterations: usize,
    pub residual: f64,
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Choice {
    pub next: Vec<usize>,
    pub cost: Vec<f64>,
    pub candidates: Vec<Categorical>,
}

/// `choices[s][a]`, with every `next` index below `next_states`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct StageTable {
    pub choices: Vec<Vec<Choice>>,
    pub next_states: usize,
}

/// Result of one stage sweep.
pub(crate) struct Sweep {
    pub values: Vec<f64>,
    pub policy: Vec<usize>,
    /// Worst candidate per (state, action).
    pub nature: Vec<Vec<usize>>,
}

pub(crate) fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

impl Choice {
    /// Outcome values `cost + beta * v(next)`.
    pub fn outcomes(&self, v_next: &[f64], beta: f64) -> Vec<f64> {
        self.next
            .iter()
            .zip(&self.cost)
            .map(|(&j, &c)| c + beta * v_next[j])
            .collect()
    }

    /// Risk of the outcome under each candidate.
    pub fn candidate_risks(&self, risk: &RiskSpec, v_next: &[f64], beta: f64) -> Result<Vec<f64>> {
        let z = self.outcomes(v_next, beta);
        self.candidates
            .iter()
            .map(|c| evaluate(risk, &c.law_of(&z)?))
            .collect()
    }

    /// Worst-case risk and the first candidate attaining it.
    pub fn robust_risk(&self, risk: &RiskSpec, v_next: &[f64], beta: f64) -> Result<(f64, usize)> {
        let risks = self.candidate_risks(risk, v_next, beta)?;
        let mut best = (risks[0], 0);
        for (i, &r) in risks.iter().enumerate().skip(1) {
            if r > best.0 {
                best = (r, i);
            }
        }
        Ok(best)
    }
}

impl StageTable {
    pub fn states(&self) -> usize {
        self.choices.len()
    }

    pub fn sweep(&self, risk: &RiskSpec, v_next: &[f64], beta: f64) -> Result<Sweep> {
        let per_state = self
            .choices
            .par_iter()
            .map(|actions| {
                let mut best = (f64::INFINITY, 0usize);
                let mut nature = Vec::with_capacity(actions.len());
                for (a, choice) in actions.iter().enumerate() {
                    let (q, worst) = choice.robust_risk(risk, v_next, beta)?;
                    nature.push(worst);
                    if q < best.0 {
                        best = (q, a);
                    }
                }
                Ok((best.0, best.1, nature))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut sweep = Sweep {
            values: Vec::with_capacity(per_state.len()),
            policy: Vec::with_capacity(per_state.len()),
            nature: Vec::with_capacity(per_state.len()),
        };
        for (v, a, n) in per_state {
            sweep.values.push(v);
            sweep.policy.push(a);
            sweep.nature.push(n);
        }
        Ok(sweep)
    }
}

/// Finite-horizon backward induction. Returns the solution and the worst
/// candidate per `(t, s, a)`.
pub(crate) fn backward(
    stages: &[StageTable],
    terminal: &[f64],
    profile: &StageRiskProfile,
) -> Result<(DpSolution, Vec<Vec<Vec<usize>>>)> {
    let profile = profile.fit(stages.len())?;
    let mut values = vec![ValueFunction(terminal.to_vec())];
    let mut policy = Vec::with_capacity(stages.len());
    let mut nature = Vec::with_capacity(stages.len());
    for (t, stage) in stages.iter().enumerate().rev() {
        let next = &values.last().unwrap().0;
        let sweep = stage.sweep(profile.stage(t + 1), next, 1.0)?;
        values.push(ValueFunction(sweep.values));
        policy.push(Policy(sweep.policy));
        nature.push(sweep.nature);
    }
    values.reverse();
    policy.reverse();
    nature.reverse();
    Ok((DpSolution { values, policy }, nature))
}

/// Iterates the discounted operator from zero until the contraction bound
/// `beta r / (1 - beta)` on the distance to the fixed point drops to `tol`.
pub(crate) fn value_iteration(
    stage: &StageTable,
    risk: &RiskSpec,
    beta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<ValueIteration> {
    if !(tol > 0.0) {
        return Err(Error::ParameterOutOfRange {
            name: "tol",
            value: tol,
            requirement: "tol > 0",
        });
    }
    let factor = beta / (1.0 - beta);
    let mut g = vec![0.0; stage.states()];
    let mut residuals = Vec::new();
    loop {
        if residuals.len() >= max_iter {
            return Err(Error::MaxIterExceeded {
                iterations: residuals.len(),
                last_residual: residuals.last().copied().unwrap_or(f64::NAN),
                residuals,
            });
        }
        let next = stage.sweep(risk, &g, beta)?.values;
        let r = sup_distance(&next, &g);
        residuals.push(r);
        g = next;
        if factor * r <= tol {
            break;
        }
    }
    let policy = stage.sweep(risk, &g, beta)?.policy;
    Ok(ValueIteration {
        value: ValueFunction(g),
        policy: Policy(policy),
        iterations: residuals.len(),
        residual: *residuals.last().unwrap(),
        residuals,
    })
}

pub(crate) fn check_discount(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange {
            name: "discount",
            value: beta,
            requirement: "0 < beta < 1",
        })
    }
}
