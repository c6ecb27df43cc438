//! Empirical Value-at-Risk, sample-size bounds and seeded Monte Carlo
//! coverage experiments.
//!
//! Every experiment is a pure function of its configuration and seed:
//! replication `r` draws from a ChaCha stream selected by `(seed, r)`, so the
//! replications can run on any number of threads and still aggregate to the
//! same report.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{record_validation, ensure_finite, Error, Result};
use crate::measures::{empirical, empirical_from_values, FiniteDistribution, SampleBatch};
use crate::risk::{quantile_index, var, CDF_SLACK};

/// Levels closer than this are treated as equal when computing kappa.
pub const KAPPA_ZERO: f64 = 1e-12;

/// Random stream of replication `rep` under `seed`.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// Continuous law given by a piecewise-linear cdf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPiecewise", into = "RawPiecewise")]
pub struct PiecewiseLinearCdf {
    breakpoints: Vec<f64>,
    levels: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawPiecewise {
    breakpoints: Vec<f64>,
    cdf: Vec<f64>,
}

impl TryFrom<RawPiecewise> for PiecewiseLinearCdf {
    type Error = Error;

    fn try_from(raw: RawPiecewise) -> Result<Self> {
        record_validation(PiecewiseLinearCdf::new(raw.breakpoints, raw.cdf))
    }
}

impl From<PiecewiseLinearCdf> for RawPiecewise {
    fn from(p: PiecewiseLinearCdf) -> Self {
        RawPiecewise {
            breakpoints: p.breakpoints,
            cdf: p.levels,
        }
    }
}

impl PiecewiseLinearCdf {
    pub fn new(breakpoints: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        let bad = |m: &str| Err(Error::InvalidSampler(m.to_string()));
        if breakpoints.len() != levels.len() {
            return Err(Error::LengthMismatch {
                what: "breakpoints and cdf levels",
                expected: breakpoints.len(),
                got: levels.len(),
            });
        }
        if breakpoints.len() < 2 {
            return bad("piecewise-linear cdf needs at least two breakpoints");
        }
        ensure_finite(&breakpoints, "breakpoints")?;
        ensure_finite(&levels, "cdf levels")?;
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return bad("breakpoints must be strictly increasing");
        }
        if levels.windows(2).any(|w| w[1] < w[0]) {
            return bad("cdf levels must be nondecreasing");
        }
        if levels[0] != 0.0 || levels[levels.len() - 1] != 1.0 {
            return bad("cdf must start at 0 and end at 1");
        }
        Ok(PiecewiseLinearCdf {
            breakpoints,
            levels,
        })
    }

    /// Uniform law on `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo, hi], vec![0.0, 1.0])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn cdf(&self, z: f64) -> f64 {
        let b = &self.breakpoints;
        if z <= b[0] {
            return 0.0;
        }
        if z >= b[b.len() - 1] {
            return 1.0;
        }
        let i = b.partition_point(|&x| x <= z) - 1;
        let w = (z - b[i]) / (b[i + 1] - b[i]);
        self.levels[i] + w * (self.levels[i + 1] - self.levels[i])
    }

    /// Left quantile `inf{x : F(x) >= u}`.
    pub fn quantile(&self, u: f64) -> f64 {
        let (b, l) = (&self.breakpoints, &self.levels);
        if u <= 0.0 {
            return b[0];
        }
        let i = (0..b.len() - 1)
            .find(|&i| l[i + 1] >= u)
            .unwrap_or(b.len() - 2);
        let rise = l[i + 1] - l[i];
        if rise <= 0.0 {
            return b[i];
        }
        b[i] + (u - l[i]) / rise * (b[i + 1] - b[i])
    }

    /// Value-at-Risk of the law.
    pub fn var(&self, alpha: f64) -> Result<f64> {
        check_alpha(alpha)?;
        Ok(self.quantile(1.0 - alpha))
    }

    /// Smallest cdf slope on `[lo, hi]`; zero where the window leaves the support.
    pub fn min_slope(&self, lo: f64, hi: f64) -> f64 {
        let b = &self.breakpoints;
        if lo < b[0] || hi > b[b.len() - 1] {
            return 0.0;
        }
        (0..b.len() - 1)
            .filter(|&i| b[i + 1] > lo && b[i] < hi)
            .map(|i| (self.levels[i + 1] - self.levels[i]) / (b[i + 1] - b[i]))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Sampling law for the experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sampler {
    Finite(FiniteDistribution),
    PiecewiseLinearCdf(PiecewiseLinearCdf),
}

impl Sampler {
    /// Inverse-transform draw.
    pub fn draw(&self, rng: &mut impl Rng) -> f64 {
        let u: f64 = rng.gen();
        match self {
            Sampler::Finite(d) => {
                let i = d.cumulative().partition_point(|&c| c <= u);
                d.atoms()[i.min(d.len() - 1)]
            }
            Sampler::PiecewiseLinearCdf(p) => p.quantile(u),
        }
    }

    pub fn draw_n(&self, n: usize, rng: &mut impl Rng) -> Vec<f64> {
        (0..n).map(|_| self.draw(rng)).collect()
    }

    pub fn cdf(&self, z: f64) -> f64 {
        match self {
            Sampler::Finite(d) => d.cdf(z),
            Sampler::PiecewiseLinearCdf(p) => p.cdf(z),
        }
    }

    pub fn var(&self, alpha: f64) -> Result<f64> {
        match self {
            Sampler::Finite(d) => var(d, alpha),
            Sampler::PiecewiseLinearCdf(p) => p.var(alpha),
        }
    }

    /// Kolmogorov distance `sup_z |F_N(z) - F(z)|` of a sample to this law.
    pub fn ks_distance(&self, samples: &[f64]) -> f64 {
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        match self {
            Sampler::PiecewiseLinearCdf(p) => sorted
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let f = p.cdf(x);
                    ((i + 1) as f64 / n - f).max(f - i as f64 / n)
                })
                .fold(0.0, f64::max),
            Sampler::Finite(d) => {
                // both cdfs jump only at atoms of the law
                let count_le = |z: f64| sorted.partition_point(|&x| x <= z) as f64 / n;
                let count_lt = |z: f64| sorted.partition_point(|&x| x < z) as f64 / n;
                d.atoms()
                    .iter()
                    .map(|&z| {
                        (count_le(z) - d.cdf(z))
                            .abs()
                            .max((count_lt(z) - d.cdf_left(z)).abs())
                    })
                    .fold(0.0, f64::max)
            }
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::AlphaOutOfRange {
            alpha,
            range: "(0, 1)",
        })
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::DeltaOutOfRange { delta })
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange {
            name,
            value,
            requirement: "a positive finite value",
        })
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::EpsOutOfRange {
            eps,
            range: "(0, inf)",
        })
    }
}

fn check_reps(reps: usize) -> Result<()> {
    if reps >= 1 {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange {
            name: "reps",
            value: 0.0,
            requirement: "at least one replication",
        })
    }
}

/// Ceiling that ignores last-bit rounding above an integer.
fn ceil_count(x: f64) -> u64 {
    let c = (x - 1e-12 * x.abs().max(1.0)).ceil();
    if c < 0.0 {
        0
    } else {
        c as u64
    }
}

/// Empirical Value-at-Risk. Computed as the quantile of the empirical measure
/// and, independently, as the `ceil(N (1 - alpha))`-th order statistic.
pub fn empirical_var(samples: &SampleBatch, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let via_measure = var(&empirical(samples), alpha)?;
    let via_order = order_statistic_var(samples.values(), alpha);
    debug_assert_eq!(via_measure, via_order);
    Ok(via_measure)
}

fn order_statistic_var(values: &[f64], alpha: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let level = 1.0 - alpha - CDF_SLACK;
    let mut k = ((level * n as f64).ceil() as usize).clamp(1, n);
    // settle the boundary with the same float predicate as the cdf scan
    while k > 1 && (k - 1) as f64 / n as f64 >= level {
        k -= 1;
    }
    while k < n && (k as f64 / n as f64) < level {
        k += 1;
    }
    sorted[k - 1]
}

// Empirical VaR on raw values; the experiments call this in hot loops.
fn sample_var(values: &[f64], alpha: f64) -> f64 {
    let d = empirical_from_values(values);
    d.atoms()[quantile_index(&d, 1.0 - alpha)]
}

/// Slack between `1 - alpha` and the cdf levels around the VaR atom:
/// `min{(1-alpha) - F(nu-), F(nu) - (1-alpha)}`, clamped at 0.
pub fn kappa(dist: &FiniteDistribution, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let level = 1.0 - alpha;
    let idx = quantile_index(dist, level);
    let below = if idx == 0 {
        0.0
    } else {
        dist.cumulative()[idx - 1]
    };
    let at = dist.cumulative()[idx];
    let k = (level - below).min(at - level);
    Ok(if k <= KAPPA_ZERO { 0.0 } else { k })
}

/// `ceil(kappa^-2 log(2/delta) / 2)`: sample size for exact recovery of VaR.
pub fn n_exact(kappa: f64, delta: f64) -> Result<u64> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::KappaNotPositive {
            context: format!("kappa = {kappa}"),
        });
    }
    check_delta(delta)?;
    Ok(ceil_count(0.5 / (kappa * kappa) * (2.0 / delta).ln()).max(1))
}

/// `ceil(c^-2 eps^-2 log(2/delta) / 2)` under the local growth condition.
pub fn n_growth(c: f64, eps: f64, delta: f64) -> Result<u64> {
    check_positive("c", c)?;
    check_eps(eps)?;
    check_delta(delta)?;
    Ok(ceil_count(0.5 / (c * c * eps * eps) * (2.0 / delta).ln()).max(1))
}

/// `ceil(2 c^-2 eps^-2 [n log(4LD/eps) + log(1/delta)])`: uniform accuracy over
/// an `n`-dimensional compact set of diameter `D`.
pub fn n_uniform(n: usize, l: f64, d: f64, c: f64, eps: f64, delta: f64) -> Result<u64> {
    check_positive("L", l)?;
    check_positive("D", d)?;
    check_positive("c", c)?;
    check_eps(eps)?;
    check_delta(delta)?;
    if n == 0 {
        return Err(Error::ParameterOutOfRange {
            name: "n",
            value: 0.0,
            requirement: "a positive dimension",
        });
    }
    let ratio = 4.0 * l * d / eps;
    if ratio <= 1.0 {
        return Err(Error::NonpositiveLogArgument { value: ratio });
    }
    let bracket = n as f64 * ratio.ln() + (1.0 / delta).ln();
    Ok(ceil_count(2.0 / (c * c * eps * eps) * bracket).max(1))
}

/// Sample size for `||V - V_N|| <= eps` in discounted VaR control with
/// finite-support noise. Requires `beta * L > 1`.
#[allow(clippy::too_many_arguments)]
pub fn n_soc(
    n: usize,
    m: usize,
    l: f64,
    d: f64,
    beta: f64,
    kappa_alpha: f64,
    eps: f64,
    delta: f64,
) -> Result<u64> {
    check_positive("L", l)?;
    check_positive("D", d)?;
    check_eps(eps)?;
    check_delta(delta)?;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::ParameterOutOfRange {
            name: "beta",
            value: beta,
            requirement: "0 < beta < 1",
        });
    }
    if !(kappa_alpha > 0.0) {
        return Err(Error::KappaNotPositive {
            context: format!("kappa_alpha = {kappa_alpha}"),
        });
    }
    let beta_l = beta * l;
    if beta_l <= 1.0 {
        return Err(Error::BetaLRegime { beta_l });
    }
    let dim = (n + m) as f64;
    let horizon = 1.0 - beta;
    let net = dim * (8.0 * d * l * l / (eps * horizon * (beta_l - 1.0))).ln();
    let growth = dim / horizon * beta_l.ln() * (4.0 / (eps * horizon)).ln();
    let conf = (2.0 / delta).ln();
    let total = 0.5 / (kappa_alpha * kappa_alpha) * (net + growth + conf);
    Ok(ceil_count(total).max(1))
}

/// Iteration count `k` and Lipschitz constant of the `k`-th value iterate
/// used to approximate the value function within `eps`.
pub fn lipschitz_tilde_constants(l_risk: f64, l: f64, beta: f64, eps: f64) -> Result<(u64, f64)> {
    check_positive("L_R", l_risk)?;
    check_positive("L", l)?;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::ParameterOutOfRange {
            name: "beta",
            value: beta,
            requirement: "0 < beta < 1",
        });
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::EpsOutOfRange {
            eps,
            range: "(0, 1]",
        });
    }
    let k = ceil_count((1.0 / eps).ln() / (1.0 - beta));
    let base = l_risk * l;
    let q = beta * base;
    let l_tilde = if (q - 1.0).abs() <= 1e-12 {
        k as f64 * base
    } else {
        base * (q.powi(k as i32) - 1.0) / (q - 1.0)
    };
    Ok((k, l_tilde))
}

/// `(1 - delta) - 3 sqrt(delta (1 - delta) / reps)`: the pass line for a
/// coverage frequency, allowing three Monte Carlo standard errors.
pub fn coverage_threshold(delta: f64, reps: usize) -> f64 {
    (1.0 - delta) - 3.0 * (delta * (1.0 - delta) / reps as f64).sqrt()
}

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replication {
    pub index: usize,
    pub deviation: f64,
    pub hit: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub secondary_hit: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecondaryCoverage {
    pub event: String,
    pub coverage: f64,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub experiment: String,
    pub n_used: u64,
    pub reps: usize,
    pub coverage: f64,
    pub max_deviation: f64,
    pub seed: u64,
    pub target: f64,
    pub threshold: f64,
    pub passes: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub secondary: Option<SecondaryCoverage>,
    #[serde(skip)]
    pub replications: Vec<Replication>,
}

impl CoverageReport {
    pub(crate) fn from_replications(
        experiment: &str,
        n_used: u64,
        seed: u64,
        delta: f64,
        secondary_event: Option<&str>,
        replications: Vec<Replication>,
    ) -> Self {
        let reps = replications.len();
        let hits = replications.iter().filter(|r| r.hit).count();
        let coverage = hits as f64 / reps as f64;
        let max_deviation = replications
            .iter()
            .map(|r| r.deviation)
            .fold(0.0, f64::max);
        let threshold = coverage_threshold(delta, reps);
        let secondary = secondary_event.map(|event| {
            let h = replications
                .iter()
                .filter(|r| r.secondary_hit == Some(true))
                .count();
            let cov = h as f64 / reps as f64;
            SecondaryCoverage {
                event: event.to_string(),
                coverage: cov,
                passes: cov >= threshold,
            }
        });
        CoverageReport {
            experiment: experiment.to_string(),
            n_used,
            reps,
            coverage,
            max_deviation,
            seed,
            target: 1.0 - delta,
            threshold,
            passes: coverage >= threshold,
            secondary,
            replications,
        }
    }

    /// One CSV row per replication.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("replication,deviation,hit,secondary_hit\n");
        for r in &self.replications {
            let sec = r.secondary_hit.map(|b| b.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{:e},{},{}\n", r.index, r.deviation, r.hit, sec));
        }
        out
    }
}

/// Frequency with which `VaR` of the empirical measure at `N = n_exact(kappa, delta)`
/// equals the true VaR exactly.
pub fn mc_exact_experiment(
    dist: &FiniteDistribution,
    alpha: f64,
    delta: f64,
    reps: usize,
    seed: u64,
) -> Result<CoverageReport> {
    check_reps(reps)?;
    let k = kappa(dist, alpha)?;
    if k <= 0.0 {
        let level = 1.0 - alpha;
        return Err(Error::KappaNotPositive {
            context: format!("1 - alpha = {level} coincides with an attainable cdf level"),
        });
    }
    let n = n_exact(k, delta)?;
    let truth = var(dist, alpha)?;
    let sampler = Sampler::Finite(dist.clone());
    let replications = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = replication_rng(seed, r as u64);
            let xs = sampler.draw_n(n as usize, &mut rng);
            let est = sample_var(&xs, alpha);
            Replication {
                index: r,
                deviation: (est - truth).abs(),
                hit: est == truth,
                secondary_hit: None,
            }
        })
        .collect();
    Ok(CoverageReport::from_replications(
        "exact", n, seed, delta, None, replications,
    ))
}

/// Local growth parameters: cdf slope at least `c` on `[nu - b, nu + b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthCondition {
    pub c: f64,
    pub b: f64,
}

impl GrowthCondition {
    fn check(&self, law: &PiecewiseLinearCdf, nu: f64, scale: f64) -> Result<()> {
        check_positive("c", self.c)?;
        check_positive("b", self.b)?;
        let (lo, hi) = (nu - self.b / scale, nu + self.b / scale);
        let slope = law.min_slope(lo, hi) / scale;
        if slope < self.c {
            return Err(Error::GrowthViolated {
                slope,
                c: self.c,
                lo,
                hi,
            });
        }
        Ok(())
    }
}

/// Frequency of `|VaR_N - VaR| < eps` at `N = n_growth(c, eps, delta)`.
///
/// For `eps >= b` the sample size uses `b` in place of `eps`, the larger of
/// the two requirements.
pub fn mc_growth_experiment(
    law: &PiecewiseLinearCdf,
    alpha: f64,
    growth: GrowthCondition,
    eps: f64,
    delta: f64,
    reps: usize,
    seed: u64,
) -> Result<CoverageReport> {
    check_reps(reps)?;
    check_eps(eps)?;
    let nu = law.var(alpha)?;
    growth.check(law, nu, 1.0)?;
    let n = n_growth(growth.c, eps.min(growth.b), delta)?;
    let sampler = Sampler::PiecewiseLinearCdf(law.clone());
    let replications = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = replication_rng(seed, r as u64);
            let xs = sampler.draw_n(n as usize, &mut rng);
            let dev = (sample_var(&xs, alpha) - nu).abs();
            Replication {
                index: r,
                deviation: dev,
                hit: dev < eps,
                secondary_hit: None,
            }
        })
        .collect();
    Ok(CoverageReport::from_replications(
        "growth", n, seed, delta, None, replications,
    ))
}

/// Objective family `psi(x, xi) = shift(x) + scale(x) * xi` over a finite set
/// of decision points, with `scale > 0`. Each `psi(x, .)` is an increasing
/// affine image of the noise, so its quantiles and cdf slopes are exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFamily", into = "RawFamily")]
pub struct AffineNoiseFamily {
    points: Vec<Vec<f64>>,
    shift: Vec<f64>,
    scale: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawFamily {
    points: Vec<Vec<f64>>,
    shift: Vec<f64>,
    scale: Vec<f64>,
}

impl TryFrom<RawFamily> for AffineNoiseFamily {
    type Error = Error;

    fn try_from(r: RawFamily) -> Result<Self> {
        record_validation(AffineNoiseFamily::new(r.points, r.shift, r.scale))
    }
}

impl From<AffineNoiseFamily> for RawFamily {
    fn from(f: AffineNoiseFamily) -> Self {
        RawFamily {
            points: f.points,
            shift: f.shift,
            scale: f.scale,
        }
    }
}

impl AffineNoiseFamily {
    pub fn new(points: Vec<Vec<f64>>, shift: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidModel("decision grid is empty".into()));
        }
        let dim = points[0].len();
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidModel(
                "decision points must share a positive dimension".into(),
            ));
        }
        for (what, v) in [("shift", &shift), ("scale", &scale)] {
            if v.len() != points.len() {
                return Err(Error::LengthMismatch {
                    what: if what == "shift" { "shift per point" } else { "scale per point" },
                    expected: points.len(),
                    got: v.len(),
                });
            }
        }
        for p in &points {
            ensure_finite(p, "decision point")?;
        }
        ensure_finite(&shift, "shift")?;
        if scale.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidModel("noise scale must be positive".into()));
        }
        Ok(AffineNoiseFamily {
            points,
            shift,
            scale,
        })
    }

    /// `psi(x, xi) = x + xi` on scalar points.
    pub fn additive(grid: &[f64]) -> Result<Self> {
        Self::new(
            grid.iter().map(|&x| vec![x]).collect(),
            grid.to_vec(),
            vec![1.0; grid.len()],
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.points[0].len()
    }

    /// Euclidean diameter of the decision set.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for a in &self.points {
            for b in &self.points {
                let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                d = d.max(s.sqrt());
            }
        }
        d
    }

    pub fn value(&self, i: usize, xi: f64) -> f64 {
        self.shift[i] + self.scale[i] * xi
    }
}

/// Parameters of the uniform-accuracy experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformBoundParams {
    pub growth: GrowthCondition,
    /// Lipschitz constant of `psi` in `x`.
    pub lipschitz: f64,
    pub eps: f64,
    pub delta: f64,
}

/// Uniform VaR accuracy over a decision grid and the inclusion of the
/// empirical argmin set in the `eps`-optimal set.
///
/// The primary coverage counts `sup_x |VaR_N(x) - VaR(x)| <= eps`; the secondary
/// coverage counts `argmin VaR_N  is a subset of  {x : VaR(x) <= min VaR + eps}`.
/// A single-point grid uses the single-point sample size `n_growth`.
pub fn mc_uniform_experiment(
    family: &AffineNoiseFamily,
    law: &PiecewiseLinearCdf,
    alpha: f64,
    params: UniformBoundParams,
    reps: usize,
    seed: u64,
) -> Result<CoverageReport> {
    check_reps(reps)?;
    check_eps(params.eps)?;
    if params.eps >= params.growth.b {
        return Err(Error::EpsOutOfRange {
            eps: params.eps,
            range: "(0, b)",
        });
    }
    let nu = law.var(alpha)?;
    for i in 0..family.len() {
        params.growth.check(law, nu, family.scale[i])?;
    }
    let n = if family.len() == 1 {
        n_growth(params.growth.c, params.eps, params.delta)?
    } else {
        n_uniform(
            family.dimension(),
            params.lipschitz,
            family.diameter(),
            params.growth.c,
            params.eps,
            params.delta,
        )?
    };
    let truth: Vec<f64> = (0..family.len()).map(|i| family.value(i, nu)).collect();
    let best_true = truth.iter().copied().fold(f64::INFINITY, f64::min);
    let sampler = Sampler::PiecewiseLinearCdf(law.clone());
    let eps = params.eps;
    let replications = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = replication_rng(seed, r as u64);
            let xi = sampler.draw_n(n as usize, &mut rng);
            let estimates: Vec<f64> = (0..family.len())
                .map(|i| {
                    let values: Vec<f64> = xi.iter().map(|&v| family.value(i, v)).collect();
                    sample_var(&values, alpha)
                })
                .collect();
            let dev = estimates
                .iter()
                .zip(&truth)
                .map(|(e, t)| (e - t).abs())
                .fold(0.0, f64::max);
            let best_est = estimates.iter().copied().fold(f64::INFINITY, f64::min);
            let inclusion = estimates
                .iter()
                .zip(&truth)
                .filter(|(e, _)| **e == best_est)
                .all(|(_, t)| *t <= best_true + eps);
            Replication {
                index: r,
                deviation: dev,
                hit: dev <= eps,
                secondary_hit: Some(inclusion),
            }
        })
        .collect();
    Ok(CoverageReport::from_replications(
        "uniform",
        n,
        seed,
        params.delta,
        Some("argmin_in_eps_optimal_set"),
        replications,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DkwReport {
    pub n: usize,
    pub eps: f64,
    pub reps: usize,
    pub seed: u64,
    /// Fraction of replications with `sup |F_N - F| > eps`.
    pub exceedance: f64,
    /// `2 exp(-2 N eps^2)`.
    pub bound: f64,
}

/// Monte Carlo frequency of the Kolmogorov distance exceeding `eps`.
pub fn dkw_experiment(
    sampler: &Sampler,
    n: usize,
    eps: f64,
    reps: usize,
    seed: u64,
) -> Result<DkwReport> {
    check_reps(reps)?;
    check_eps(eps)?;
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let exceed = (0..reps)
        .into_par_iter()
        .filter(|&r| {
            let mut rng = replication_rng(seed, r as u64);
            sampler.ks_distance(&sampler.draw_n(n, &mut rng)) > eps
        })
        .count();
    Ok(DkwReport {
        n,
        eps,
        reps,
        seed,
        exceedance: exceed as f64 / reps as f64,
        bound: 2.0 * (-2.0 * n as f64 * eps * eps).exp(),
    })
}
