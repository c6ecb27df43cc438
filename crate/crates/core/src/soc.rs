//! Risk-averse stochastic optimal control on finite state grids.
//!
//! The state moves by `x' = phi_t(x, u, xi)` with noise `xi` on finitely many
//! atoms and pays `c_t(x, u, xi)`. Each stage lists candidate noise laws; a
//! single candidate is the plain risk-averse problem, several form a
//! stagewise ambiguity set.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dp::{self, Choice, DpSolution, Policy, StageTable, ValueFunction, ValueIteration};
use crate::error::{record_validation, ensure_finite, Error, Result};
use crate::measures::{Categorical, SampleBatch};
use crate::nested::{ScenarioTree, StageRiskProfile, TreeNode};
use crate::risk::RiskSpec;
use crate::saa::{kappa, n_exact, replication_rng, CoverageReport, Replication};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Finite(usize),
    Discounted(f64),
}

/// Noise law of one stage: atom values and candidate laws over them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseLaw {
    /// Atom values; defaults to the atom indices.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<f64>>,
    pub candidates: Vec<Categorical>,
}

impl NoiseLaw {
    pub fn single(law: Categorical) -> Self {
        NoiseLaw {
            atoms: None,
            candidates: vec![law],
        }
    }

    pub fn len(&self) -> usize {
        self.candidates.first().map_or(0, Categorical::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn atom_values(&self) -> Vec<f64> {
        self.atoms
            .clone()
            .unwrap_or_else(|| (0..self.len()).map(|k| k as f64).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Counts {
    Same(usize),
    PerStage(Vec<usize>),
}

#[derive(Serialize, Deserialize)]
struct RawSoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    discount: Option<f64>,
    states: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coordinates: Option<Vec<Vec<f64>>>,
    controls: Counts,
    noise: Vec<NoiseLaw>,
    phi: Vec<Vec<Vec<Vec<usize>>>>,
    cost: Vec<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    terminal: Option<Vec<f64>>,
}

/// Control model on a finite grid. Stage tables are indexed
/// `phi[t][x][u][k]` and `cost[t][x][u][k]`; a discounted model has one
/// stationary stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSoc", into = "RawSoc")]
pub struct SocModel {
    horizon: Horizon,
    states: usize,
    coordinates: Option<Vec<Vec<f64>>>,
    controls: Vec<usize>,
    noise: Vec<NoiseLaw>,
    phi: Vec<Vec<Vec<Vec<usize>>>>,
    cost: Vec<Vec<Vec<Vec<f64>>>>,
    terminal: Vec<f64>,
}

impl TryFrom<RawSoc> for SocModel {
    type Error = Error;

    fn try_from(raw: RawSoc) -> Result<Self> {
        record_validation((|| -> Result<Self> {
            let horizon = match (raw.horizon, raw.discount) {
                (Some(t), None) => Horizon::Finite(t),
                (None, Some(b)) => Horizon::Discounted(b),
                _ => {
                    return Err(Error::InvalidModel(
                        "exactly one of \"horizon\" and \"discount\" is required".into(),
                    ))
                }
            };
            let stages = match horizon {
                Horizon::Finite(t) => t,
                Horizon::Discounted(_) => 1,
            };
            let controls = match raw.controls {
                Counts::Same(n) => vec![n; stages],
                Counts::PerStage(v) => v,
            };
            SocModel::new(
                horizon,
                raw.states,
                controls,
                raw.noise,
                raw.phi,
                raw.cost,
                raw.terminal.unwrap_or_default(),
                raw.coordinates,
            )
        })())
    }
}

impl From<SocModel> for RawSoc {
    fn from(m: SocModel) -> Self {
        let (horizon, discount) = match m.horizon {
            Horizon::Finite(t) => (Some(t), None),
            Horizon::Discounted(b) => (None, Some(b)),
        };
        RawSoc {
            horizon,
            discount,
            states: m.states,
            coordinates: m.coordinates,
            controls: Counts::PerStage(m.controls),
            noise: m.noise,
            phi: m.phi,
            cost: m.cost,
            terminal: (!m.terminal.is_empty()).then_some(m.terminal),
        }
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidModel(msg.into())
}

impl SocModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        horizon: Horizon,
        states: usize,
        controls: Vec<usize>,
        noise: Vec<NoiseLaw>,
        phi: Vec<Vec<Vec<Vec<usize>>>>,
        cost: Vec<Vec<Vec<Vec<f64>>>>,
        terminal: Vec<f64>,
        coordinates: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let stages = match horizon {
            Horizon::Finite(0) => return Err(bad("horizon must be at least 1")),
            Horizon::Finite(t) => t,
            Horizon::Discounted(b) => {
                dp::check_discount(b)?;
                1
            }
        };
        if states == 0 {
            return Err(bad("state grid is empty"));
        }
        for (what, len) in [
            ("controls", controls.len()),
            ("noise", noise.len()),
            ("phi", phi.len()),
            ("cost", cost.len()),
        ] {
            if len != stages {
                return Err(bad(format!("{what} lists {len} stages, model has {stages}")));
            }
        }
        if let Horizon::Finite(_) = horizon {
            if terminal.len() != states {
                return Err(Error::LengthMismatch {
                    what: "terminal cost per state",
                    expected: states,
                    got: terminal.len(),
                });
            }
        }
        ensure_finite(&terminal, "terminal cost")?;
        if let Some(c) = &coordinates {
            if c.len() != states {
                return Err(Error::LengthMismatch {
                    what: "coordinates per state",
                    expected: states,
                    got: c.len(),
                });
            }
        }
        for t in 0..stages {
            let law = &noise[t];
            if law.candidates.is_empty() {
                return Err(Error::EmptyAmbiguitySet);
            }
            let k = law.len();
            if law.candidates.iter().any(|c| c.len() != k) {
                return Err(bad(format!("stage {}: candidate noise laws differ in size", t + 1)));
            }
            if let Some(a) = &law.atoms {
                if a.len() != k {
                    return Err(Error::LengthMismatch {
                        what: "noise atoms",
                        expected: k,
                        got: a.len(),
                    });
                }
                ensure_finite(a, "noise atoms")?;
            }
            if controls[t] == 0 {
                return Err(bad(format!("stage {} has no controls", t + 1)));
            }
            if phi[t].len() != states || cost[t].len() != states {
                return Err(bad(format!("stage {}: tables must list every state", t + 1)));
            }
            for x in 0..states {
                if phi[t][x].len() != controls[t] || cost[t][x].len() != controls[t] {
                    return Err(bad(format!(
                        "stage {}, state {x}: tables must list every control",
                        t + 1
                    )));
                }
                for u in 0..controls[t] {
                    if phi[t][x][u].len() != k || cost[t][x][u].len() != k {
                        return Err(bad(format!(
                            "stage {}, state {x}, control {u}: tables must list every noise atom",
                            t + 1
                        )));
                    }
                    ensure_finite(&cost[t][x][u], "stage cost")?;
                    if let Some(&j) = phi[t][x][u].iter().find(|&&j| j >= states) {
                        return Err(Error::IndexOutOfRange {
                            what: "next state",
                            index: j,
                            len: states,
                        });
                    }
                }
            }
        }
        Ok(SocModel {
            horizon,
            states,
            coordinates,
            controls,
            noise,
            phi,
            cost,
            terminal,
        })
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn stages(&self) -> usize {
        self.noise.len()
    }

    pub fn controls(&self, t: usize) -> usize {
        self.controls[t]
    }

    pub fn noise(&self, t: usize) -> &NoiseLaw {
        &self.noise[t]
    }

    pub fn next_state(&self, t: usize, x: usize, u: usize, k: usize) -> usize {
        self.phi[t][x][u][k]
    }

    pub fn cost(&self, t: usize, x: usize, u: usize, k: usize) -> f64 {
        self.cost[t][x][u][k]
    }

    pub fn terminal(&self) -> &[f64] {
        &self.terminal
    }

    pub fn coordinates(&self) -> Option<&[Vec<f64>]> {
        self.coordinates.as_deref()
    }

    pub fn discount(&self) -> Option<f64> {
        match self.horizon {
            Horizon::Discounted(b) => Some(b),
            Horizon::Finite(_) => None,
        }
    }

    /// Same model with the noise laws replaced.
    pub fn with_noise(&self, noise: Vec<NoiseLaw>) -> Result<Self> {
        SocModel::new(
            self.horizon,
            self.states,
            self.controls.clone(),
            noise,
            self.phi.clone(),
            self.cost.clone(),
            self.terminal.clone(),
            self.coordinates.clone(),
        )
    }

    pub(crate) fn stage_table(&self, t: usize) -> StageTable {
        let choices = (0..self.states)
            .map(|x| {
                (0..self.controls[t])
                    .map(|u| Choice {
                        next: self.phi[t][x][u].clone(),
                        cost: self.cost[t][x][u].clone(),
                        candidates: self.noise[t].candidates.clone(),
                    })
                    .collect()
            })
            .collect();
        StageTable {
            choices,
            next_states: self.states,
        }
    }

    fn tables(&self) -> Vec<StageTable> {
        (0..self.stages()).map(|t| self.stage_table(t)).collect()
    }

    fn require_finite(&self) -> Result<usize> {
        match self.horizon {
            Horizon::Finite(t) => Ok(t),
            Horizon::Discounted(_) => Err(Error::InfiniteHorizonModel),
        }
    }

    fn require_discounted(&self) -> Result<f64> {
        self.discount().ok_or(Error::FiniteHorizonModel)
    }
}

/// Backward induction `V_t(x) = min_u max_P R^P[c_t + V_{t+1}(phi_t)]` with
/// `V_{T+1}` the terminal cost.
pub fn solve_soc_finite(model: &SocModel, profile: &StageRiskProfile) -> Result<DpSolution> {
    model.require_finite()?;
    Ok(dp::backward(&model.tables(), &model.terminal, profile)?.0)
}

/// One application of the discounted Bellman operator.
pub fn soc_bellman(model: &SocModel, risk: &RiskSpec, g: &ValueFunction) -> Result<ValueFunction> {
    let beta = model.require_discounted()?;
    check_len(g, model.states)?;
    Ok(ValueFunction(model.stage_table(0).sweep(risk, &g.0, beta)?.values))
}

fn check_len(g: &ValueFunction, states: usize) -> Result<()> {
    if g.len() != states {
        return Err(Error::LengthMismatch {
            what: "value function per state",
            expected: states,
            got: g.len(),
        });
    }
    ensure_finite(&g.0, "value function")
}

pub fn soc_value_iteration(
    model: &SocModel,
    risk: &RiskSpec,
    tol: f64,
    max_iter: usize,
) -> Result<ValueIteration> {
    let beta = model.require_discounted()?;
    risk.validate()?;
    dp::value_iteration(&model.stage_table(0), risk, beta, tol, max_iter)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalValue {
    pub solution: ValueIteration,
    /// Empirical noise law built from the sample.
    pub law: Categorical,
    /// `||V - V_N||` against a supplied reference value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit: Option<f64>,
}

fn single_law(model: &SocModel) -> Result<&NoiseLaw> {
    let law = &model.noise[0];
    if law.candidates.len() != 1 {
        return Err(bad("the empirical operator needs a single noise law"));
    }
    Ok(law)
}

/// Fixed point of the Bellman operator with the noise law replaced by the
/// empirical law of `samples`, whose values must be noise atoms.
pub fn soc_empirical_value(
    model: &SocModel,
    samples: &SampleBatch,
    risk: &RiskSpec,
    tol: f64,
    max_iter: usize,
    reference: Option<&ValueFunction>,
) -> Result<EmpiricalValue> {
    model.require_discounted()?;
    let law = single_law(model)?;
    let atoms = law.atom_values();
    let mut counts = vec![0usize; atoms.len()];
    for &s in samples.values() {
        let k = atoms.iter().position(|&a| a == s).ok_or_else(|| {
            Error::InvalidSampler(format!("sample value {s} is not a noise atom"))
        })?;
        counts[k] += 1;
    }
    let empirical = Categorical::from_counts(&counts)?;
    let solution = empirical_solve(model, &empirical, risk, tol, max_iter)?;
    let audit = match reference {
        Some(v) => {
            check_len(v, model.states)?;
            Some(v.distance(&solution.value))
        }
        None => None,
    };
    Ok(EmpiricalValue {
        solution,
        law: empirical,
        audit,
    })
}

fn empirical_solve(
    model: &SocModel,
    law: &Categorical,
    risk: &RiskSpec,
    tol: f64,
    max_iter: usize,
) -> Result<ValueIteration> {
    let atoms = model.noise[0].atoms.clone();
    let m = model.with_noise(vec![NoiseLaw {
        atoms,
        candidates: vec![law.clone()],
    }])?;
    soc_value_iteration(&m, risk, tol, max_iter)
}

/// `kappa` of the outcome law `c(x, u, xi) + beta v(phi(x, u, xi))` for every
/// state and control.
pub fn kappa_table(model: &SocModel, alpha: f64, v: &ValueFunction) -> Result<Vec<Vec<f64>>> {
    let beta = model.require_discounted()?;
    check_len(v, model.states)?;
    let law = &single_law(model)?.candidates[0];
    let table = model.stage_table(0);
    table
        .choices
        .iter()
        .map(|actions| {
            actions
                .iter()
                .map(|c| kappa(&law.law_of(&c.outcomes(&v.0, beta))?, alpha))
                .collect()
        })
        .collect()
}

/// Settings of the discounted sample-complexity experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SocExperiment {
    pub alpha: f64,
    pub eps: f64,
    pub delta: f64,
    pub reps: usize,
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iter() -> usize {
    1_000_000
}

/// Coverage of `||V - V_N|| <= eps` where `V_N` solves the empirical Bellman
/// equation from `N = n_exact(min kappa, delta)` noise draws under the VaR
/// functional.
///
/// The secondary event checks the perturbation bound
/// `||V - V_N|| <= (||(T - T_N) V|| + 2 tol) / (1 - beta) + 2 tol`,
/// with the `tol` terms covering the stopping error of both solves.
pub fn mc_soc_experiment(model: &SocModel, cfg: &SocExperiment) -> Result<CoverageReport> {
    let beta = model.require_discounted()?;
    if cfg.reps == 0 {
        return Err(Error::ParameterOutOfRange {
            name: "reps",
            value: 0.0,
            requirement: "at least one replication",
        });
    }
    if !(cfg.eps > 0.0) {
        return Err(Error::EpsOutOfRange {
            eps: cfg.eps,
            range: "(0, inf)",
        });
    }
    let risk = RiskSpec::VaR { alpha: cfg.alpha };
    risk.validate()?;
    let law = single_law(model)?.candidates[0].clone();
    let exact = soc_value_iteration(model, &risk, cfg.tol, cfg.max_iter)?;
    let kappas = kappa_table(model, cfg.alpha, &exact.value)?;
    let mut min_kappa = (f64::INFINITY, 0, 0);
    for (x, row) in kappas.iter().enumerate() {
        for (u, &k) in row.iter().enumerate() {
            if k < min_kappa.0 {
                min_kappa = (k, x, u);
            }
        }
    }
    let (k, x, u) = min_kappa;
    if k <= 0.0 {
        return Err(Error::KappaNotPositive {
            context: format!(
                "state {x}, control {u}: 1 - alpha = {} is an attainable cdf level",
                1.0 - cfg.alpha
            ),
        });
    }
    let n = n_exact(k, cfg.delta)?;
    let table = model.stage_table(0);
    let v = &exact.value;
    let slack = 2.0 * cfg.tol;
    let replications = (0..cfg.reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = replication_rng(cfg.seed, r as u64);
            let mut counts = vec![0usize; law.len()];
            for _ in 0..n {
                counts[law.sample_index(rng.gen())] += 1;
            }
            let empirical = Categorical::from_counts(&counts)?;
            let vn = empirical_solve(model, &empirical, &risk, cfg.tol, cfg.max_iter)?;
            let dev = v.distance(&vn.value);
            let emp_table = StageTable {
                choices: table
                    .choices
                    .iter()
                    .map(|acts| {
                        acts.iter()
                            .map(|c| Choice {
                                candidates: vec![empirical.clone()],
                                ..c.clone()
                            })
                            .collect()
                    })
                    .collect(),
                next_states: table.next_states,
            };
            let tv = table.sweep(&risk, &v.0, beta)?.values;
            let tnv = emp_table.sweep(&risk, &v.0, beta)?.values;
            let bound = (dp::sup_distance(&tv, &tnv) + slack) / (1.0 - beta) + slack;
            Ok(Replication {
                index: r,
                deviation: dev,
                hit: dev <= cfg.eps,
                secondary_hit: Some(dev <= bound + 1e-12),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoverageReport::from_replications(
        "soc",
        n,
        cfg.seed,
        cfg.delta,
        Some("perturbation_bound_holds"),
        replications,
    ))
}

/// Largest tree `unroll_soc_policy` will build.
pub const UNROLL_NODE_LIMIT: usize = 1_000_000;

/// Scenario tree of the costs incurred by a Markov policy from `x1`: one branch
/// per noise atom at each stage, leaves holding the accumulated stage costs
/// plus the terminal cost. Nodes carry the stage's candidate noise laws.
pub fn unroll_soc_policy(model: &SocModel, policy: &[Policy], x1: usize) -> Result<ScenarioTree> {
    let horizon = model.require_finite()?;
    if policy.len() != horizon {
        return Err(Error::LengthMismatch {
            what: "policy per stage",
            expected: horizon,
            got: policy.len(),
        });
    }
    if x1 >= model.states {
        return Err(Error::IndexOutOfRange {
            what: "initial state",
            index: x1,
            len: model.states,
        });
    }
    let mut total = 1usize;
    let mut width = 1usize;
    for t in 0..horizon {
        width = width.saturating_mul(model.noise[t].len());
        total = total.saturating_add(width);
    }
    if total > UNROLL_NODE_LIMIT {
        return Err(Error::EnumerationTooLarge {
            count: total as u128,
            limit: UNROLL_NODE_LIMIT as u128,
        });
    }
    let mut nodes = vec![TreeNode {
        id: 0,
        stage: 1,
        parent: None,
        children: vec![],
        candidates: vec![],
    }];
    // (node id, state, accumulated cost)
    let mut frontier = vec![(0usize, x1, 0.0f64)];
    for t in 0..horizon {
        let mut next = Vec::with_capacity(frontier.len() * model.noise[t].len());
        for &(id, x, acc) in &frontier {
            let u = *policy[t].0.get(x).ok_or(Error::IndexOutOfRange {
                what: "policy state",
                index: x,
                len: policy[t].0.len(),
            })?;
            if u >= model.controls[t] {
                return Err(Error::IndexOutOfRange {
                    what: "control",
                    index: u,
                    len: model.controls[t],
                });
            }
            let mut children = Vec::with_capacity(model.noise[t].len());
            for k in 0..model.noise[t].len() {
                let child = nodes.len();
                nodes.push(TreeNode {
                    id: child,
                    stage: t + 2,
                    parent: Some(id),
                    children: vec![],
                    candidates: vec![],
                });
                children.push(child);
                next.push((child, model.phi[t][x][u][k], acc + model.cost[t][x][u][k]));
            }
            nodes[id].children = children;
            nodes[id].candidates = model.noise[t].candidates.clone();
        }
        frontier = next;
    }
    let leaves: BTreeMap<usize, f64> = frontier
        .into_iter()
        .map(|(id, x, acc)| (id, acc + model.terminal[x]))
        .collect();
    ScenarioTree::new(horizon, nodes, leaves)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat(p: &[f64]) -> Categorical {
        Categorical::new(p.to_vec()).unwrap()
    }

    fn one_state(horizon: Horizon, cost: f64) -> SocModel {
        let stages = match horizon {
            Horizon::Finite(t) => t,
            Horizon::Discounted(_) => 1,
        };
        SocModel::new(
            horizon,
            1,
            vec![1; stages],
            vec![NoiseLaw::single(cat(&[1.0])); stages],
            vec![vec![vec![vec![0]]]; stages],
            vec![vec![vec![vec![cost]]]; stages],
            vec![0.0],
            None,
        )
        .unwrap()
    }

    #[test]
    fn telescoping_constant_cost() {
        let m = one_state(Horizon::Finite(3), 1.0);
        let s = solve_soc_finite(&m, &StageRiskProfile::constant(RiskSpec::Expectation, 1)).unwrap();
        assert_eq!(s.value_at(0), 3.0);
        assert_eq!(s.values.len(), 4);
    }

    #[test]
    fn constant_cost_fixed_point() {
        let m = one_state(Horizon::Discounted(0.5), 1.0);
        let vi = soc_value_iteration(&m, &RiskSpec::Expectation, 1e-10, 1000).unwrap();
        assert!((vi.value.0[0] - 2.0).abs() <= 1e-10);
        assert_eq!(vi.policy.0, vec![0]);
        for w in vi.residuals.windows(2) {
            assert!(w[1] <= 0.5 * w[0] + 1e-12);
        }
    }

    #[test]
    fn bellman_zero_cost_shift() {
        let m = one_state(Horizon::Discounted(0.7), 0.0);
        let g = ValueFunction(vec![3.0]);
        let tg = soc_bellman(&m, &RiskSpec::AVaR { alpha: 0.2 }, &g).unwrap();
        assert!((tg.0[0] - 2.1).abs() < 1e-12);
        assert_eq!(
            soc_bellman(&m, &RiskSpec::Expectation, &ValueFunction(vec![0.0])).unwrap().0,
            vec![0.0]
        );
        let f = one_state(Horizon::Finite(1), 0.0);
        assert!(matches!(
            soc_bellman(&f, &RiskSpec::Expectation, &g),
            Err(Error::FiniteHorizonModel)
        ));
        assert!(matches!(
            solve_soc_finite(&m, &StageRiskProfile::constant(RiskSpec::Expectation, 1)),
            Err(Error::InfiniteHorizonModel)
        ));
    }

    /// Two states, two controls, two equally likely noise atoms.
    fn toy() -> SocModel {
        SocModel::new(
            Horizon::Discounted(0.5),
            2,
            vec![2],
            vec![NoiseLaw::single(cat(&[0.5, 0.5]))],
            vec![vec![vec![vec![0, 1], vec![1, 1]], vec![vec![0, 0], vec![1, 0]]]],
            vec![vec![vec![vec![1.0, 3.0], vec![2.0, 2.0]], vec![vec![0.0, 4.0], vec![5.0, 1.0]]]],
            vec![],
            None,
        )
        .unwrap()
    }

    #[test]
    fn bellman_by_enumeration() {
        // VaR at 0.5 of two equally likely outcomes is the smaller one
        let m = toy();
        let g = ValueFunction(vec![2.0, 4.0]);
        let tg = soc_bellman(&m, &RiskSpec::VaR { alpha: 0.5 }, &g).unwrap();
        // x=0: u0 -> {1+1, 3+2} min 2; u1 -> {2+2, 2+2} = 4  => 2
        // x=1: u0 -> {0+1, 4+1} min 1; u1 -> {5+2, 1+1} min 2 => 1
        assert_eq!(tg.0, vec![2.0, 1.0]);
    }

    #[test]
    fn empirical_with_exact_frequencies() {
        let m = toy();
        let risk = RiskSpec::AVaR { alpha: 0.3 };
        let v = soc_value_iteration(&m, &risk, 1e-10, 10_000).unwrap();
        let batch = SampleBatch::new(vec![0.0, 1.0, 1.0, 0.0], 0).unwrap();
        let e = soc_empirical_value(&m, &batch, &risk, 1e-10, 10_000, Some(&v.value)).unwrap();
        assert!(e.audit.unwrap() <= 2e-10);
        let bad = SampleBatch::new(vec![0.5], 0).unwrap();
        assert!(soc_empirical_value(&m, &bad, &risk, 1e-10, 100, None).is_err());
    }

    #[test]
    fn max_iter_reports_residuals() {
        let m = one_state(Horizon::Discounted(0.9), 1.0);
        match soc_value_iteration(&m, &RiskSpec::Expectation, 1e-12, 5) {
            Err(Error::MaxIterExceeded { iterations, residuals, .. }) => {
                assert_eq!(iterations, 5);
                assert_eq!(residuals.len(), 5);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn json_round_trip() {
        let m = toy();
        let s = serde_json::to_string(&m).unwrap();
        let back: SocModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        let short = r#"{"discount":0.5,"states":1,"controls":1,
            "noise":[{"candidates":[{"probs":[1]}]}],"phi":[[[[0]]]],"cost":[[[[1]]]]}"#;
        let m: SocModel = serde_json::from_str(short).unwrap();
        assert_eq!(m.discount(), Some(0.5));
        let both = r#"{"discount":0.5,"horizon":2,"states":1,"controls":1,
            "noise":[{"candidates":[{"probs":[1]}]}],"phi":[[[[0]]]],"cost":[[[[1]]]]}"#;
        assert!(serde_json::from_str::<SocModel>(both).is_err());
        let oob = r#"{"discount":0.5,"states":1,"controls":1,
            "noise":[{"candidates":[{"probs":[1]}]}],"phi":[[[[3]]]],"cost":[[[[1]]]]}"#;
        assert!(serde_json::from_str::<SocModel>(oob).is_err());
    }

    #[test]
    fn unrolled_greedy_policy_matches_dp() {
        let m = SocModel::new(
            Horizon::Finite(2),
            2,
            vec![2, 2],
            vec![
                NoiseLaw::single(cat(&[0.3, 0.7])),
                NoiseLaw {
                    atoms: None,
                    candidates: vec![cat(&[0.5, 0.5]), cat(&[0.9, 0.1])],
                },
            ],
            vec![vec![vec![vec![0, 1], vec![1, 0]], vec![vec![1, 1], vec![0, 1]]]; 2],
            vec![vec![vec![vec![1.0, 0.0], vec![2.0, 0.5]], vec![vec![0.0, 3.0], vec![1.0, 1.0]]]; 2],
            vec![0.0, 2.0],
            None,
        )
        .unwrap();
        let profile: StageRiskProfile = "avar:0.4,var:0.3".parse().unwrap();
        let sol = solve_soc_finite(&m, &profile).unwrap();
        for x in 0..2 {
            let tree = unroll_soc_policy(&m, &sol.policy, x).unwrap();
            let v = tree.robust_nested_evaluate(&profile).unwrap();
            assert!((v - sol.value_at(x)).abs() < 1e-12);
        }
    }
}
