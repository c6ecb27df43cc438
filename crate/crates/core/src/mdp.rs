//! Risk-averse Markov decision processes with finite state and action sets.
//!
//! Transition kernels are given per `(stage, state, action)` as a list of
//! candidate laws over the next-stage states; several candidates form an
//! `(s, a)`-rectangular ambiguity set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dp::{self, Choice, DpSolution, Policy, StageTable, ValueFunction, ValueIteration};
use crate::error::{record_validation, ensure_finite, Error, Result};
use crate::measures::Categorical;
use crate::nested::StageRiskProfile;
use crate::risk::{evaluate, RiskSpec};
use crate::soc::{Horizon, SocModel};

/// Candidate kernels of one `(t, s, a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSet {
    pub candidates: Vec<Categorical>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum StateCounts {
    Same(usize),
    PerStage(Vec<usize>),
}

#[derive(Serialize, Deserialize)]
struct RawMdp {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stages: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    discount: Option<f64>,
    states: StateCounts,
    actions: Vec<Vec<usize>>,
    kernels: Vec<Vec<Vec<KernelSet>>>,
    cost: Vec<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    terminal: Option<Vec<f64>>,
}

/// Tables are indexed `actions[t][s]`, `kernels[t][s][a]` and
/// `cost[t][s][a][s']`. A discounted model has one stationary stage whose
/// kernels map the state space to itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMdp", into = "RawMdp")]
pub struct MdpModel {
    horizon: Horizon,
    /// State counts of stages `1..=T+1` (a single entry when discounted).
    states: Vec<usize>,
    actions: Vec<Vec<usize>>,
    kernels: Vec<Vec<Vec<KernelSet>>>,
    cost: Vec<Vec<Vec<Vec<f64>>>>,
    terminal: Vec<f64>,
}

impl TryFrom<RawMdp> for MdpModel {
    type Error = Error;

    fn try_from(raw: RawMdp) -> Result<Self> {
        record_validation((|| -> Result<Self> {
            let horizon = match (raw.stages, raw.discount) {
                (Some(t), None) => Horizon::Finite(t),
                (None, Some(b)) => Horizon::Discounted(b),
                _ => {
                    return Err(Error::InvalidModel(
                        "exactly one of \"stages\" and \"discount\" is required".into(),
                    ))
                }
            };
            let layers = match horizon {
                Horizon::Finite(t) => t + 1,
                Horizon::Discounted(_) => 1,
            };
            let states = match raw.states {
                StateCounts::Same(n) => vec![n; layers],
                StateCounts::PerStage(v) => v,
            };
            MdpModel::new(
                horizon,
                states,
                raw.actions,
                raw.kernels,
                raw.cost,
                raw.terminal.unwrap_or_default(),
            )
        })())
    }
}

impl From<MdpModel> for RawMdp {
    fn from(m: MdpModel) -> Self {
        let (stages, discount) = match m.horizon {
            Horizon::Finite(t) => (Some(t), None),
            Horizon::Discounted(b) => (None, Some(b)),
        };
        RawMdp {
            stages,
            discount,
            states: StateCounts::PerStage(m.states),
            actions: m.actions,
            kernels: m.kernels,
            cost: m.cost,
            terminal: (!m.terminal.is_empty()).then_some(m.terminal),
        }
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidModel(msg.into())
}

/// Candidate kernel chosen by nature per `(t, s, a)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NaturePolicy(pub Vec<Vec<Vec<usize>>>);

impl MdpModel {
    pub fn new(
        horizon: Horizon,
        states: Vec<usize>,
        actions: Vec<Vec<usize>>,
        kernels: Vec<Vec<Vec<KernelSet>>>,
        cost: Vec<Vec<Vec<Vec<f64>>>>,
        terminal: Vec<f64>,
    ) -> Result<Self> {
        let (stages, layers) = match horizon {
            Horizon::Finite(0) => return Err(bad("horizon must be at least 1")),
            Horizon::Finite(t) => (t, t + 1),
            Horizon::Discounted(b) => {
                dp::check_discount(b)?;
                (1, 1)
            }
        };
        if states.len() != layers {
            return Err(bad(format!(
                "states lists {} stages, model needs {layers}",
                states.len()
            )));
        }
        if states.contains(&0) {
            return Err(bad("every stage needs at least one state"));
        }
        for (what, len) in [
            ("actions", actions.len()),
            ("kernels", kernels.len()),
            ("cost", cost.len()),
        ] {
            if len != stages {
                return Err(bad(format!("{what} lists {len} stages, model has {stages}")));
            }
        }
        let next_count = |t: usize| if layers == 1 { states[0] } else { states[t + 1] };
        for t in 0..stages {
            let (here, next) = (states[t], next_count(t));
            if actions[t].len() != here || kernels[t].len() != here || cost[t].len() != here {
                return Err(bad(format!("stage {}: tables must list every state", t + 1)));
            }
            for s in 0..here {
                let na = actions[t][s];
                if na == 0 {
                    return Err(bad(format!("stage {}, state {s} has no actions", t + 1)));
                }
                if kernels[t][s].len() != na || cost[t][s].len() != na {
                    return Err(bad(format!(
                        "stage {}, state {s}: tables must list every action",
                        t + 1
                    )));
                }
                for a in 0..na {
                    let set = &kernels[t][s][a];
                    if set.candidates.is_empty() {
                        return Err(Error::EmptyAmbiguitySet);
                    }
                    if set.candidates.iter().any(|c| c.len() != next) {
                        return Err(bad(format!(
                            "stage {}, state {s}, action {a}: kernels must cover {next} next states",
                            t + 1
                        )));
                    }
                    if cost[t][s][a].len() != next {
                        return Err(Error::LengthMismatch {
                            what: "cost per next state",
                            expected: next,
                            got: cost[t][s][a].len(),
                        });
                    }
                    ensure_finite(&cost[t][s][a], "stage cost")?;
                }
            }
        }
        if let Horizon::Finite(_) = horizon {
            if terminal.len() != states[stages] {
                return Err(Error::LengthMismatch {
                    what: "terminal cost per state",
                    expected: states[stages],
                    got: terminal.len(),
                });
            }
        }
        ensure_finite(&terminal, "terminal cost")?;
        Ok(MdpModel {
            horizon,
            states,
            actions,
            kernels,
            cost,
            terminal,
        })
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn stages(&self) -> usize {
        self.kernels.len()
    }

    /// Number of states at stage `t` (0-based; `t = T` is the terminal layer).
    pub fn states(&self, t: usize) -> usize {
        self.states[t.min(self.states.len() - 1)]
    }

    pub fn actions(&self, t: usize, s: usize) -> usize {
        self.actions[t][s]
    }

    pub fn kernel(&self, t: usize, s: usize, a: usize) -> &KernelSet {
        &self.kernels[t][s][a]
    }

    pub fn cost(&self, t: usize, s: usize, a: usize) -> &[f64] {
        &self.cost[t][s][a]
    }

    pub fn terminal(&self) -> &[f64] {
        &self.terminal
    }

    pub fn discount(&self) -> Option<f64> {
        match self.horizon {
            Horizon::Discounted(b) => Some(b),
            Horizon::Finite(_) => None,
        }
    }

    /// Largest candidate count over all `(s, a)` of stage `t`.
    pub fn candidate_count(&self, t: usize) -> usize {
        self.kernels[t]
            .iter()
            .flatten()
            .map(|k| k.candidates.len())
            .max()
            .unwrap_or(0)
    }

    pub(crate) fn stage_table(&self, t: usize) -> StageTable {
        let next = self.states(t + 1);
        let choices = (0..self.states(t))
            .map(|s| {
                (0..self.actions[t][s])
                    .map(|a| Choice {
                        next: (0..next).collect(),
                        cost: self.cost[t][s][a].clone(),
                        candidates: self.kernels[t][s][a].candidates.clone(),
                    })
                    .collect()
            })
            .collect();
        StageTable {
            choices,
            next_states: next,
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

    /// Same model with each kernel set replaced by `pick(t, s, a, set)`.
    fn map_kernels(&self, pick: impl Fn(usize, usize, usize, &KernelSet) -> KernelSet) -> Self {
        let kernels = self
            .kernels
            .iter()
            .enumerate()
            .map(|(t, layer)| {
                layer
                    .iter()
                    .enumerate()
                    .map(|(s, acts)| {
                        acts.iter()
                            .enumerate()
                            .map(|(a, k)| pick(t, s, a, k))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        MdpModel {
            kernels,
            ..self.clone()
        }
    }
}

/// Backward induction `V_t(s) = min_a max_P R^P[c_t(s, a, .) + V_{t+1}]`.
pub fn solve_mdp_finite(model: &MdpModel, profile: &StageRiskProfile) -> Result<DpSolution> {
    model.require_finite()?;
    Ok(dp::backward(&model.tables(), &model.terminal, profile)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameSolution {
    pub solution: DpSolution,
    pub nature: NaturePolicy,
}

/// Stagewise controller-versus-nature game: same values as
/// [`solve_mdp_finite`], plus nature's worst-case kernel selection.
pub fn solve_mdp_game(model: &MdpModel, profile: &StageRiskProfile) -> Result<GameSolution> {
    model.require_finite()?;
    let (solution, nature) = dp::backward(&model.tables(), &model.terminal, profile)?;
    Ok(GameSolution {
        solution,
        nature: NaturePolicy(nature),
    })
}

/// Nested risk of the costs of a Markov policy started in `s1`, under the
/// single kernel of each `(t, s, a)` or the one picked by `nature`.
pub fn evaluate_policy_nested(
    model: &MdpModel,
    policy: &[Policy],
    profile: &StageRiskProfile,
    nature: Option<&NaturePolicy>,
    s1: usize,
) -> Result<f64> {
    let horizon = model.require_finite()?;
    let profile = profile.fit(horizon)?;
    if policy.len() != horizon {
        return Err(Error::LengthMismatch {
            what: "policy per stage",
            expected: horizon,
            got: policy.len(),
        });
    }
    if s1 >= model.states(0) {
        return Err(Error::IndexOutOfRange {
            what: "initial state",
            index: s1,
            len: model.states(0),
        });
    }
    let mut z = model.terminal.clone();
    for t in (0..horizon).rev() {
        if policy[t].0.len() != model.states(t) {
            return Err(Error::LengthMismatch {
                what: "policy entries per state",
                expected: model.states(t),
                got: policy[t].0.len(),
            });
        }
        z = (0..model.states(t))
            .map(|s| {
                let a = policy[t].0[s];
                if a >= model.actions[t][s] {
                    return Err(Error::IndexOutOfRange {
                        what: "action",
                        index: a,
                        len: model.actions[t][s],
                    });
                }
                let set = &model.kernels[t][s][a].candidates;
                let kernel = match (set.len(), nature) {
                    (1, _) => &set[0],
                    (n, Some(g)) => {
                        let i = *g
                            .0
                            .get(t)
                            .and_then(|l| l.get(s))
                            .and_then(|l| l.get(a))
                            .ok_or(Error::UnresolvedAmbiguity { stage: t + 1, state: s, action: a })?;
                        set.get(i).ok_or(Error::MemberOutOfRange {
                            node: s,
                            member: i,
                            count: n,
                        })?
                    }
                    (_, None) => {
                        return Err(Error::UnresolvedAmbiguity {
                            stage: t + 1,
                            state: s,
                            action: a,
                        })
                    }
                };
                let outcome: Vec<f64> = model.cost[t][s][a]
                    .iter()
                    .zip(&z)
                    .map(|(c, v)| c + v)
                    .collect();
                evaluate(profile.stage(t + 1), &kernel.law_of(&outcome)?)
            })
            .collect::<Result<Vec<f64>>>()?;
    }
    Ok(z[s1])
}

/// Cap on the number of stagewise kernel selections enumerated.
pub const STATIC_ENUMERATION_LIMIT: u128 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StaticRobustReport {
    /// Worst case over stagewise selections of the optimal nested value.
    pub value: f64,
    /// Candidate index per stage attaining `value` (lexicographically first).
    pub choice: Vec<usize>,
    /// Value when nature may choose per visited state and action.
    pub dynamic_value: f64,
    pub gap: f64,
    pub selections: u128,
}

/// Nature commits to one candidate index per stage, shared by every `(s, a)`,
/// before the process starts. All selections are enumerated.
pub fn static_robust_bruteforce(
    model: &MdpModel,
    profile: &StageRiskProfile,
    s1: usize,
) -> Result<StaticRobustReport> {
    let horizon = model.require_finite()?;
    let profile = profile.fit(horizon)?;
    let mut counts = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let n = model.candidate_count(t);
        if model.kernels[t].iter().flatten().any(|k| k.candidates.len() != n) {
            return Err(bad(format!(
                "stage {}: a static selection needs the same number of candidates at every state and action",
                t + 1
            )));
        }
        counts.push(n);
    }
    let total = counts
        .iter()
        .try_fold(1u128, |acc, &n| acc.checked_mul(n as u128))
        .unwrap_or(u128::MAX);
    if total > STATIC_ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge {
            count: total,
            limit: STATIC_ENUMERATION_LIMIT,
        });
    }
    if s1 >= model.states(0) {
        return Err(Error::IndexOutOfRange {
            what: "initial state",
            index: s1,
            len: model.states(0),
        });
    }
    let decode = |mut i: usize| {
        let mut choice = vec![0; horizon];
        for t in (0..horizon).rev() {
            choice[t] = i % counts[t];
            i /= counts[t];
        }
        choice
    };
    let values = (0..total as usize)
        .into_par_iter()
        .map(|i| {
            let choice = decode(i);
            let fixed = model.map_kernels(|t, _, _, k| KernelSet {
                candidates: vec![k.candidates[choice[t]].clone()],
            });
            Ok(solve_mdp_finite(&fixed, &profile)?.value_at(s1))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    let dynamic_value = solve_mdp_finite(model, &profile)?.value_at(s1);
    Ok(StaticRobustReport {
        value: values[best],
        choice: decode(best),
        dynamic_value,
        gap: dynamic_value - values[best],
        selections: total,
    })
}

pub fn mdp_value_iteration(
    model: &MdpModel,
    risk: &RiskSpec,
    tol: f64,
    max_iter: usize,
) -> Result<ValueIteration> {
    let beta = model.discount().ok_or(Error::FiniteHorizonModel)?;
    risk.validate()?;
    dp::value_iteration(&model.stage_table(0), risk, beta, tol, max_iter)
}

/// One application of the discounted Bellman operator.
pub fn mdp_bellman(model: &MdpModel, risk: &RiskSpec, g: &ValueFunction) -> Result<ValueFunction> {
    let beta = model.discount().ok_or(Error::FiniteHorizonModel)?;
    if g.len() != model.states(0) {
        return Err(Error::LengthMismatch {
            what: "value function per state",
            expected: model.states(0),
            got: g.len(),
        });
    }
    Ok(ValueFunction(model.stage_table(0).sweep(risk, &g.0, beta)?.values))
}

/// Decision process induced by a control model: the kernel of `(x, u)` is
/// the image of each noise law under `xi -> phi(x, u, xi)`.
///
/// The stage cost must depend on the noise only through the next state;
/// otherwise the induced process would need costs on noise atoms.
pub fn mdp_from_soc(model: &SocModel) -> Result<MdpModel> {
    let n = model.states();
    let stages = model.stages();
    let mut actions = Vec::with_capacity(stages);
    let mut kernels = Vec::with_capacity(stages);
    let mut costs = Vec::with_capacity(stages);
    for t in 0..stages {
        let m = model.controls(t);
        let noise = model.noise(t);
        actions.push(vec![m; n]);
        let mut k_layer = Vec::with_capacity(n);
        let mut c_layer = Vec::with_capacity(n);
        for x in 0..n {
            let mut k_row = Vec::with_capacity(m);
            let mut c_row = Vec::with_capacity(m);
            for u in 0..m {
                let map: Vec<usize> = (0..noise.len()).map(|k| model.next_state(t, x, u, k)).collect();
                let mut cost: Vec<Option<f64>> = vec![None; n];
                for (k, &j) in map.iter().enumerate() {
                    let c = model.cost(t, x, u, k);
                    match cost[j] {
                        Some(prev) if prev != c => {
                            return Err(bad(format!(
                                "stage {}, state {x}, control {u}: cost differs between noise atoms leading to state {j}",
                                t + 1
                            )))
                        }
                        _ => cost[j] = Some(c),
                    }
                }
                let candidates = noise
                    .candidates
                    .iter()
                    .map(|c| c.pushforward_indices(&map, n))
                    .collect::<Result<Vec<_>>>()?;
                k_row.push(KernelSet { candidates });
                c_row.push(cost.into_iter().map(|c| c.unwrap_or(0.0)).collect());
            }
            k_layer.push(k_row);
            c_layer.push(c_row);
        }
        kernels.push(k_layer);
        costs.push(c_layer);
    }
    let layers = match model.horizon() {
        Horizon::Finite(t) => t + 1,
        Horizon::Discounted(_) => 1,
    };
    MdpModel::new(
        model.horizon(),
        vec![n; layers],
        actions,
        kernels,
        costs,
        model.terminal().to_vec(),
    )
}
