//! Stagewise min-max analysis: payoff matrices `psi[u][P]` of controls
//! against candidate measures, their pure min-max and max-min values and the
//! mixed-strategy value of the matrix game.

use serde::{Deserialize, Serialize};

use crate::dp::StageTable;
use crate::error::{record_validation, ensure_finite, Error, Result};
use crate::mdp::MdpModel;
use crate::risk::RiskSpec;
use crate::soc::SocModel;

/// Largest side handled by the support-enumeration solver.
pub const MAX_GAME_SIZE: usize = 16;

/// Default tolerance for declaring a saddle point.
pub const DEFAULT_SADDLE_TOL: f64 = 1e-9;

/// Rows are controls, columns candidate measures. The optional risk records
/// which functional produced the entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPsi", into = "RawPsi")]
pub struct PsiMatrix {
    rows: Vec<Vec<f64>>,
    risk: Option<RiskSpec>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawPsi {
    Tagged {
        psi: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        risk: Option<RiskSpec>,
    },
    Bare(Vec<Vec<f64>>),
}

impl TryFrom<RawPsi> for PsiMatrix {
    type Error = Error;

    fn try_from(raw: RawPsi) -> Result<Self> {
        record_validation((|| -> Result<Self> {
            match raw {
                RawPsi::Tagged { psi, risk } => Ok(PsiMatrix::new(psi)?.with_risk(risk)),
                RawPsi::Bare(psi) => PsiMatrix::new(psi),
            }
        })())
    }
}

impl From<PsiMatrix> for RawPsi {
    fn from(m: PsiMatrix) -> Self {
        RawPsi::Tagged {
            psi: m.rows,
            risk: m.risk,
        }
    }
}

impl PsiMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::InvalidMatrix("matrix is empty".into()));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidMatrix("rows differ in length".into()));
        }
        for r in &rows {
            ensure_finite(r, "payoff matrix")?;
        }
        Ok(PsiMatrix { rows, risk: None })
    }

    pub fn with_risk(mut self, risk: Option<RiskSpec>) -> Self {
        self.risk = risk;
        self
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn risk(&self) -> Option<&RiskSpec> {
        self.risk.as_ref()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.rows[0].len()
    }

    pub fn get(&self, u: usize, p: usize) -> f64 {
        self.rows[u][p]
    }

    fn scale(&self) -> f64 {
        self.rows
            .iter()
            .flatten()
            .fold(1.0f64, |m, v| m.max(v.abs()))
    }
}

fn psi_from_table(table: &StageTable, state: usize, v_next: &[f64], beta: f64, risk: &RiskSpec) -> Result<PsiMatrix> {
    let actions = table.choices.get(state).ok_or(Error::IndexOutOfRange {
        what: "state",
        index: state,
        len: table.choices.len(),
    })?;
    if v_next.len() != table.next_states {
        return Err(Error::LengthMismatch {
            what: "next-stage values",
            expected: table.next_states,
            got: v_next.len(),
        });
    }
    ensure_finite(v_next, "next-stage values")?;
    risk.validate()?;
    let rows = actions
        .iter()
        .map(|c| c.candidate_risks(risk, v_next, beta))
        .collect::<Result<Vec<_>>>()?;
    Ok(PsiMatrix::new(rows)?.with_risk(Some(*risk)))
}

/// `psi[u][P] = R^P[c_t(x, u, xi) + beta V(phi_t(x, u, xi))]` at stage `t`
/// (0-based), with `beta = 1` for finite horizons.
pub fn build_psi_soc(
    model: &SocModel,
    t: usize,
    x: usize,
    v_next: &[f64],
    risk: &RiskSpec,
) -> Result<PsiMatrix> {
    if t >= model.stages() {
        return Err(Error::IndexOutOfRange {
            what: "stage",
            index: t,
            len: model.stages(),
        });
    }
    let beta = model.discount().unwrap_or(1.0);
    psi_from_table(&model.stage_table(t), x, v_next, beta, risk)
}

/// `psi[a][P] = R^P[c_t(s, a, .) + beta V]`; every action of `s` must carry the
/// same number of candidate kernels.
pub fn build_psi_mdp(
    model: &MdpModel,
    t: usize,
    s: usize,
    v_next: &[f64],
    risk: &RiskSpec,
) -> Result<PsiMatrix> {
    if t >= model.stages() {
        return Err(Error::IndexOutOfRange {
            what: "stage",
            index: t,
            len: model.stages(),
        });
    }
    let beta = model.discount().unwrap_or(1.0);
    psi_from_table(&model.stage_table(t), s, v_next, beta, risk)
}

/// `min_u max_P psi`, smallest minimizing row.
pub fn primal_minimax(psi: &PsiMatrix) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for (u, row) in psi.rows.iter().enumerate() {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if m < best.0 {
            best = (m, u);
        }
    }
    best
}

/// `max_P min_u psi`, smallest maximizing column.
pub fn dual_maximin(psi: &PsiMatrix) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for p in 0..psi.n_cols() {
        let m = psi
            .rows
            .iter()
            .map(|r| r[p])
            .fold(f64::INFINITY, f64::min);
        if m > best.0 {
            best = (m, p);
        }
    }
    best
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Weights on `support` that equalize `payoff(i, j)` over `targets`:
/// `sum_i w_i payoff(i, j) = v` for `j` in targets, `sum w = 1`.
fn equalize(support: &[usize], targets: &[usize], payoff: impl Fn(usize, usize) -> f64) -> Option<(Vec<f64>, f64)> {
    let k = support.len();
    let mut a = vec![vec![0.0; k + 1]; k + 1];
    let mut b = vec![0.0; k + 1];
    for (r, &j) in targets.iter().enumerate() {
        for (c, &i) in support.iter().enumerate() {
            a[r][c] = payoff(i, j);
        }
        a[r][k] = -1.0;
    }
    for c in 0..k {
        a[k][c] = 1.0;
    }
    b[k] = 1.0;
    let x = solve_linear(a, b)?;
    let v = x[k];
    Some((x[..k].to_vec(), v))
}

/// Lexicographic `k`-subsets of `0..n`.
fn combinations(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut next = (k <= n).then(|| (0..k).collect::<Vec<usize>>());
    std::iter::from_fn(move || {
        let cur = next.take()?;
        let mut c = cur.clone();
        let mut i = k;
        while i > 0 {
            i -= 1;
            if c[i] < n - k + i {
                c[i] += 1;
                for j in i + 1..k {
                    c[j] = c[j - 1] + 1;
                }
                next = Some(c);
                break;
            }
        }
        Some(cur)
    })
}

/// Mixed-strategy game value `min_Q max_P sum_u Q(u) psi[u][P]` and an optimal `Q`.
///
/// Square supports are tried in increasing size and lexicographic order; the
/// first pair whose equalizing strategies are nonnegative and optimal against
/// every pure reply is returned.
pub fn randomized_value(psi: &PsiMatrix) -> Result<(f64, Vec<f64>)> {
    let (m, n) = (psi.n_rows(), psi.n_cols());
    if m > MAX_GAME_SIZE || n > MAX_GAME_SIZE {
        return Err(Error::MatrixTooLarge {
            rows: m,
            cols: n,
            limit: MAX_GAME_SIZE,
        });
    }
    let eps = 1e-9 * psi.scale();
    let at = |u: usize, p: usize| psi.rows[u][p];
    for k in 1..=m.min(n) {
        for rows in combinations(m, k) {
            for cols in combinations(n, k) {
                let Some((q, v)) = equalize(&rows, &cols, at) else { continue };
                if q.iter().any(|&w| w < -eps) {
                    continue;
                }
                let Some((p, _)) = equalize(&cols, &rows, |j, i| at(i, j)) else { continue };
                if p.iter().any(|&w| w < -eps) {
                    continue;
                }
                let mut mix = vec![0.0; m];
                for (&u, &w) in rows.iter().zip(&q) {
                    mix[u] = w.max(0.0);
                }
                let total: f64 = mix.iter().sum();
                mix.iter_mut().for_each(|w| *w /= total);
                let row_best = (0..n)
                    .map(|j| (0..m).map(|u| mix[u] * at(u, j)).sum::<f64>())
                    .fold(f64::NEG_INFINITY, f64::max);
                let col_best = (0..m)
                    .map(|u| cols.iter().zip(&p).map(|(&j, &w)| w.max(0.0) * at(u, j)).sum::<f64>())
                    .fold(f64::INFINITY, f64::min);
                let p_total: f64 = p.iter().map(|w| w.max(0.0)).sum();
                if row_best <= v + eps && col_best / p_total >= v - eps {
                    return Ok((row_best, mix));
                }
            }
        }
    }
    // every finite game has an equilibrium on some square support
    Err(Error::InvalidMatrix(
        "no equilibrium support found; the matrix is numerically degenerate".into(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaddleReport {
    pub primal: f64,
    pub dual: f64,
    pub randomized: f64,
    pub gap: f64,
    /// `(row, column)` pair verified as a saddle point.
    pub saddle: Option<(usize, usize)>,
    pub mix: Vec<f64>,
    pub warning: Option<String>,
}

/// `u` minimizes column `p` and `p` maximizes row `u`, within `tol`.
pub fn is_saddle(psi: &PsiMatrix, u: usize, p: usize, tol: f64) -> bool {
    let v = psi.rows[u][p];
    psi.rows.iter().all(|r| v <= r[p] + tol) && psi.rows[u].iter().all(|&x| v >= x - tol)
}

pub fn analyze(psi: &PsiMatrix, tol: f64) -> Result<SaddleReport> {
    if !(tol >= 0.0) {
        return Err(Error::ParameterOutOfRange {
            name: "tol",
            value: tol,
            requirement: "tol >= 0",
        });
    }
    let (primal, row) = primal_minimax(psi);
    let (dual, col) = dual_maximin(psi);
    let (randomized, mix) = randomized_value(psi)?;
    let gap = primal - dual;
    let saddle = if gap <= tol {
        debug_assert!(is_saddle(psi, row, col, tol));
        is_saddle(psi, row, col, tol).then_some((row, col))
    } else {
        None
    };
    let warning = matches!(psi.risk, Some(RiskSpec::Entropic { .. })).then(|| {
        "entropic risk is not known to be concave in the measure; a positive gap does not rule out a non-randomized optimum".to_string()
    });
    Ok(SaddleReport {
        primal,
        dual,
        randomized,
        gap,
        saddle,
        mix,
        warning,
    })
}
