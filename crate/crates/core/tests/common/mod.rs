//! Random instance generators and brute-force oracles shared by the
//! integration tests. Oracles use only plain loops over the raw tables.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use riskdp::mdp::{KernelSet, MdpModel};
use riskdp::nested::TreeNode;
use riskdp::soc::{Horizon, NoiseLaw, SocModel};
use riskdp::{Categorical, FiniteDistribution, RiskSpec, ScenarioTree};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Strictly positive weights normalized to one.
pub fn probs(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

pub fn categorical(rng: &mut impl Rng, n: usize) -> Categorical {
    Categorical::new(probs(rng, n)).unwrap()
}

/// Random law; half the time on a small integer lattice so ties and exact
/// cdf levels occur.
pub fn distribution(rng: &mut impl Rng) -> FiniteDistribution {
    let n = rng.gen_range(1..=8);
    let lattice = rng.gen_bool(0.5);
    let atoms: Vec<f64> = (0..n)
        .map(|_| {
            if lattice {
                rng.gen_range(0..5) as f64
            } else {
                rng.gen_range(-10.0..10.0)
            }
        })
        .collect();
    let p = if lattice { vec![1.0 / n as f64; n] } else { probs(rng, n) };
    FiniteDistribution::new(atoms, p).unwrap()
}

pub fn risk(rng: &mut impl Rng) -> RiskSpec {
    match rng.gen_range(0..4) {
        0 => RiskSpec::Expectation,
        1 => RiskSpec::VaR { alpha: rng.gen_range(0.05..0.95) },
        2 => RiskSpec::AVaR { alpha: rng.gen_range(0.05..1.0) },
        _ => RiskSpec::Entropic { tau: rng.gen_range(0.1..2.0) },
    }
}

pub fn all_risks() -> Vec<RiskSpec> {
    vec![
        RiskSpec::Expectation,
        RiskSpec::VaR { alpha: 0.3 },
        RiskSpec::AVaR { alpha: 0.25 },
        RiskSpec::Entropic { tau: 0.7 },
    ]
}

/// Shape of a random model.
#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub horizon: Horizon,
    pub max_states: usize,
    pub max_actions: usize,
    pub max_noise: usize,
    /// Candidate laws per stage; 1 means no ambiguity.
    pub candidates: usize,
}

impl Shape {
    pub fn finite(t: usize) -> Self {
        Shape {
            horizon: Horizon::Finite(t),
            max_states: 5,
            max_actions: 3,
            max_noise: 4,
            candidates: 1,
        }
    }

    pub fn discounted(beta: f64) -> Self {
        Shape {
            horizon: Horizon::Discounted(beta),
            max_states: 10,
            max_actions: 4,
            max_noise: 4,
            candidates: 1,
        }
    }

    pub fn robust(mut self, candidates: usize) -> Self {
        self.candidates = candidates;
        self
    }

    fn layers(&self) -> usize {
        match self.horizon {
            Horizon::Finite(t) => t,
            Horizon::Discounted(_) => 1,
        }
    }
}

/// Random control model. With `markov_cost` the stage cost depends on the
/// noise only through the next state, so the induced decision process exists.
pub fn soc_model(rng: &mut impl Rng, shape: Shape, markov_cost: bool) -> SocModel {
    let states = rng.gen_range(1..=shape.max_states);
    let layers = shape.layers();
    let mut controls = Vec::new();
    let mut noise = Vec::new();
    let mut phi = Vec::new();
    let mut cost = Vec::new();
    for _ in 0..layers {
        let m = rng.gen_range(1..=shape.max_actions);
        let k = rng.gen_range(1..=shape.max_noise);
        controls.push(m);
        noise.push(NoiseLaw {
            atoms: None,
            candidates: (0..shape.candidates).map(|_| categorical(rng, k)).collect(),
        });
        let mut phi_t = Vec::new();
        let mut cost_t = Vec::new();
        for _ in 0..states {
            let mut phi_x = Vec::new();
            let mut cost_x = Vec::new();
            for _ in 0..m {
                let next: Vec<usize> = (0..k).map(|_| rng.gen_range(0..states)).collect();
                let by_state: Vec<f64> = (0..states).map(|_| rng.gen_range(0.0..5.0)).collect();
                let c: Vec<f64> = if markov_cost {
                    next.iter().map(|&y| by_state[y]).collect()
                } else {
                    (0..k).map(|_| rng.gen_range(0.0..5.0)).collect()
                };
                phi_x.push(next);
                cost_x.push(c);
            }
            phi_t.push(phi_x);
            cost_t.push(cost_x);
        }
        phi.push(phi_t);
        cost.push(cost_t);
    }
    let terminal = (0..states).map(|_| rng.gen_range(0.0..3.0)).collect();
    SocModel::new(shape.horizon, states, controls, noise, phi, cost, terminal, None).unwrap()
}

/// Random decision process with per-stage state counts.
pub fn mdp_model(rng: &mut impl Rng, shape: Shape) -> MdpModel {
    let layers = shape.layers();
    let states: Vec<usize> = match shape.horizon {
        Horizon::Finite(t) => (0..=t).map(|_| rng.gen_range(1..=shape.max_states)).collect(),
        Horizon::Discounted(_) => vec![rng.gen_range(1..=shape.max_states)],
    };
    let next_count = |t: usize| if states.len() == 1 { states[0] } else { states[t + 1] };
    let mut actions = Vec::new();
    let mut kernels = Vec::new();
    let mut cost = Vec::new();
    for t in 0..layers {
        let n = next_count(t);
        let acts: Vec<usize> = (0..states[t]).map(|_| rng.gen_range(1..=shape.max_actions)).collect();
        let mut k_t = Vec::new();
        let mut c_t = Vec::new();
        for &a in &acts {
            k_t.push(
                (0..a)
                    .map(|_| KernelSet {
                        candidates: (0..shape.candidates).map(|_| categorical(rng, n)).collect(),
                    })
                    .collect::<Vec<_>>(),
            );
            c_t.push(
                (0..a)
                    .map(|_| (0..n).map(|_| rng.gen_range(0.0..5.0)).collect::<Vec<f64>>())
                    .collect::<Vec<_>>(),
            );
        }
        actions.push(acts);
        kernels.push(k_t);
        cost.push(c_t);
    }
    let terminal = (0..*states.last().unwrap()).map(|_| rng.gen_range(0.0..3.0)).collect();
    MdpModel::new(shape.horizon, states, actions, kernels, cost, terminal).unwrap()
}

/// Classical expected-cost backward induction on a control model with one
/// noise law per stage.
pub fn soc_expected_dp(m: &SocModel) -> Vec<Vec<f64>> {
    let t_max = m.stages();
    let mut v = vec![m.terminal().to_vec()];
    for t in (0..t_max).rev() {
        let next = v[0].clone();
        let p = m.noise(t).candidates[0].probs().to_vec();
        let layer: Vec<f64> = (0..m.states())
            .map(|x| {
                let mut best = f64::INFINITY;
                for u in 0..m.controls(t) {
                    let mut e = 0.0;
                    for (k, pk) in p.iter().enumerate() {
                        e += pk * (m.cost(t, x, u, k) + next[m.next_state(t, x, u, k)]);
                    }
                    best = best.min(e);
                }
                best
            })
            .collect();
        v.insert(0, layer);
    }
    v
}

pub fn mdp_expected_dp(m: &MdpModel) -> Vec<Vec<f64>> {
    let t_max = m.stages();
    let mut v = vec![m.terminal().to_vec()];
    for t in (0..t_max).rev() {
        let next = v[0].clone();
        let layer: Vec<f64> = (0..m.states(t))
            .map(|s| {
                let mut best = f64::INFINITY;
                for a in 0..m.actions(t, s) {
                    let p = m.kernel(t, s, a).candidates[0].probs();
                    let c = m.cost(t, s, a);
                    let e: f64 = (0..next.len()).map(|y| p[y] * (c[y] + next[y])).sum();
                    best = best.min(e);
                }
                best
            })
            .collect();
        v.insert(0, layer);
    }
    v
}

/// Risk value of the law putting `p[i]` on `z[i]`, by direct scans.
pub fn var_oracle(z: &[f64], p: &[f64], alpha: f64) -> f64 {
    let mut support: Vec<f64> = z
        .iter()
        .zip(p)
        .filter(|(_, &q)| q > 0.0)
        .map(|(&v, _)| v)
        .collect();
    support.sort_by(f64::total_cmp);
    for &c in &support {
        let f: f64 = z.iter().zip(p).filter(|(&v, _)| v <= c).map(|(_, q)| q).sum();
        if f >= 1.0 - alpha - 1e-12 {
            return c;
        }
    }
    *support.last().unwrap()
}

pub fn avar_oracle(z: &[f64], p: &[f64], alpha: f64) -> f64 {
    z.iter()
        .map(|&tau| {
            let tail: f64 = z.iter().zip(p).map(|(&v, q)| q * (v - tau).max(0.0)).sum();
            tau + tail / alpha
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn expectation_oracle(z: &[f64], p: &[f64]) -> f64 {
    z.iter().zip(p).map(|(v, q)| v * q).sum()
}

/// Random scenario tree with all leaves at stage `stages + 1`.
pub fn tree(rng: &mut impl Rng, stages: usize, max_branch: usize, candidates: usize) -> ScenarioTree {
    let mut nodes = vec![TreeNode {
        id: 0,
        stage: 1,
        parent: None,
        children: vec![],
        candidates: vec![],
    }];
    let mut frontier = vec![0];
    for t in 1..=stages {
        let mut next = Vec::new();
        for &parent in &frontier {
            let b = rng.gen_range(1..=max_branch);
            let mut children = Vec::new();
            for _ in 0..b {
                let id = nodes.len();
                nodes.push(TreeNode {
                    id,
                    stage: t + 1,
                    parent: Some(parent),
                    children: vec![],
                    candidates: vec![],
                });
                children.push(id);
                next.push(id);
            }
            nodes[parent].children = children;
            nodes[parent].candidates = (0..candidates).map(|_| categorical(rng, b)).collect();
        }
        frontier = next;
    }
    let leaves: BTreeMap<usize, f64> = frontier.iter().map(|&id| (id, rng.gen_range(-5.0..5.0))).collect();
    ScenarioTree::new(stages, nodes, leaves).unwrap()
}

/// Expected leaf value by walking every root-to-leaf path, using the first
/// candidate (or the one in `members`) at each node.
pub fn path_expectation(tree: &ScenarioTree, members: &BTreeMap<usize, usize>) -> f64 {
    fn walk(tree: &ScenarioTree, id: usize, weight: f64, members: &BTreeMap<usize, usize>) -> f64 {
        let node = tree.node(id).unwrap();
        if node.is_leaf() {
            return weight * tree.leaf_values()[&id];
        }
        let m = members.get(&id).copied().unwrap_or(0);
        let law = node.candidates[m].probs();
        node.children
            .iter()
            .zip(law)
            .map(|(&c, &p)| walk(tree, c, weight * p, members))
            .sum()
    }
    walk(tree, tree.root_id(), 1.0, members)
}

/// Solves the square system `a x = b` by Gaussian elimination with full
/// pivoting; `None` when singular.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let mut col_perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let (mut pi, mut pj, mut best) = (k, k, 0.0);
        for i in k..n {
            for j in k..n {
                if a[i][j].abs() > best {
                    (pi, pj, best) = (i, j, a[i][j].abs());
                }
            }
        }
        if best < 1e-12 {
            return None;
        }
        a.swap(k, pi);
        b.swap(k, pi);
        for row in a.iter_mut() {
            row.swap(k, pj);
        }
        col_perm.swap(k, pj);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut y = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * y[j]).sum();
        y[k] = (b[k] - s) / a[k][k];
    }
    let mut x = vec![0.0; n];
    for (k, &c) in col_perm.iter().enumerate() {
        x[c] = y[k];
    }
    Some(x)
}

fn subsets(n: usize) -> Vec<Vec<usize>> {
    (1u32..1 << n)
        .map(|mask| (0..n).filter(|i| mask >> i & 1 == 1).collect())
        .collect()
}

/// `min over mixed rows of max over columns` by trying every pair of equal-size
/// row and column supports and equalizing the chosen columns.
pub fn mixed_value_oracle(psi: &[Vec<f64>]) -> f64 {
    let (m, n) = (psi.len(), psi[0].len());
    let mut best = f64::INFINITY;
    for rows in subsets(m) {
        for cols in subsets(n).into_iter().filter(|c| c.len() == rows.len()) {
            let k = rows.len();
            // unknowns x_rows and v: sum_i x_i psi[i][j] - v = 0 for j in cols, sum x = 1
            let mut a = Vec::with_capacity(k + 1);
            let mut b = Vec::with_capacity(k + 1);
            for &j in &cols {
                let mut row: Vec<f64> = rows.iter().map(|&i| psi[i][j]).collect();
                row.push(-1.0);
                a.push(row);
                b.push(0.0);
            }
            let mut ones = vec![1.0; k];
            ones.push(0.0);
            a.push(ones);
            b.push(1.0);
            let Some(sol) = solve_linear(a, b) else { continue };
            if sol[..k].iter().any(|&x| x < -1e-12) {
                continue;
            }
            let value = (0..n)
                .map(|j| rows.iter().zip(&sol).map(|(&i, x)| x * psi[i][j]).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            best = best.min(value);
        }
    }
    best
}
