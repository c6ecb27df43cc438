//! Law-invariant risk functionals on finite distributions.
//!
//! All functionals take a [`FiniteDistribution`] of losses (larger is worse):
//!
//! - expectation `E[Z]`,
//! - Value-at-Risk, the left-side `(1 - alpha)`-quantile `inf{z : F(z) >= 1 - alpha}`,
//! - Average Value-at-Risk `inf_t { t + E[Z - t]_+ / alpha }`, evaluated in
//!   closed form at the minimizer `t = VaR_alpha(Z)`,
//! - entropic risk `tau^-1 log E[exp(tau Z)]`.
//!
//! [`robust_evaluate`] takes the worst case over a finite ambiguity set. A convex
//! ambiguity set is represented by its extreme points.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{record_validation, Error, Result};
use crate::measures::FiniteDistribution;

/// Slack on the cdf threshold in the quantile scan. Cumulative sums of
/// rational masses can undershoot the exact level by a few ulps.
pub const CDF_SLACK: f64 = 1e-12;

/// Choice of risk functional and its parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRiskSpec", into = "RawRiskSpec")]
pub enum RiskSpec {
    Expectation,
    /// Value-at-Risk, `alpha` in (0, 1).
    VaR { alpha: f64 },
    /// Average Value-at-Risk, `alpha` in (0, 1].
    AVaR { alpha: f64 },
    /// Entropic risk, `tau > 0`.
    Entropic { tau: f64 },
}

#[derive(Serialize, Deserialize)]
struct RawRiskSpec {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tau: Option<f64>,
}

impl TryFrom<RawRiskSpec> for RiskSpec {
    type Error = Error;

    fn try_from(raw: RawRiskSpec) -> Result<Self> {
        record_validation((|| -> Result<Self> {
            let missing = |what: &str| {
                Error::InvalidProfile(format!("risk kind {:?} requires {}", raw.kind, what))
            };
            let spec = match raw.kind.to_ascii_lowercase().as_str() {
                "expectation" => RiskSpec::Expectation,
                "var" => RiskSpec::VaR {
                    alpha: raw.alpha.ok_or_else(|| missing("alpha"))?,
                },
                "avar" | "cvar" => RiskSpec::AVaR {
                    alpha: raw.alpha.ok_or_else(|| missing("alpha"))?,
                },
                "entropic" => RiskSpec::Entropic {
                    tau: raw.tau.ok_or_else(|| missing("tau"))?,
                },
                other => return Err(Error::InvalidProfile(format!("unknown risk kind {other:?}"))),
            };
            spec.validate()?;
            Ok(spec)
        })())
    }
}

impl From<RiskSpec> for RawRiskSpec {
    fn from(spec: RiskSpec) -> Self {
        let (kind, alpha, tau) = match spec {
            RiskSpec::Expectation => ("expectation", None, None),
            RiskSpec::VaR { alpha } => ("var", Some(alpha), None),
            RiskSpec::AVaR { alpha } => ("avar", Some(alpha), None),
            RiskSpec::Entropic { tau } => ("entropic", None, Some(tau)),
        };
        RawRiskSpec {
            kind: kind.to_string(),
            alpha,
            tau,
        }
    }
}

impl RiskSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RiskSpec::Expectation => Ok(()),
            RiskSpec::VaR { alpha } => check_var_alpha(alpha),
            RiskSpec::AVaR { alpha } => check_avar_alpha(alpha),
            RiskSpec::Entropic { tau } => check_tau(tau),
        }
    }

    /// Whether the functional is positively homogeneous.
    pub fn is_positively_homogeneous(&self) -> bool {
        !matches!(self, RiskSpec::Entropic { .. })
    }

    /// Whether the functional is convex in the random variable.
    pub fn is_convex(&self) -> bool {
        !matches!(self, RiskSpec::VaR { .. })
    }
}

/// Parses `expectation`, `var:0.3`, `avar:0.1` or `entropic:1`.
impl FromStr for RiskSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, param) = match s.split_once(':') {
            Some((k, p)) => (k.trim(), Some(p.trim())),
            None => (s, None),
        };
        let value = |name: &str| -> Result<f64> {
            let p = param.ok_or_else(|| {
                Error::InvalidProfile(format!("{kind:?} needs a parameter, as in {kind}:{name}"))
            })?;
            p.parse::<f64>()
                .map_err(|_| Error::InvalidProfile(format!("bad parameter {p:?} for {kind}")))
        };
        let spec = match kind.to_ascii_lowercase().as_str() {
            "expectation" | "mean" | "e" => RiskSpec::Expectation,
            "var" => RiskSpec::VaR {
                alpha: value("alpha")?,
            },
            "avar" | "cvar" => RiskSpec::AVaR {
                alpha: value("alpha")?,
            },
            "entropic" => RiskSpec::Entropic { tau: value("tau")? },
            other => return Err(Error::InvalidProfile(format!("unknown risk kind {other:?}"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for RiskSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RiskSpec::Expectation => write!(f, "expectation"),
            RiskSpec::VaR { alpha } => write!(f, "var:{alpha}"),
            RiskSpec::AVaR { alpha } => write!(f, "avar:{alpha}"),
            RiskSpec::Entropic { tau } => write!(f, "entropic:{tau}"),
        }
    }
}

fn check_var_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::AlphaOutOfRange {
            alpha,
            range: "(0, 1)",
        })
    }
}

fn check_avar_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::AlphaOutOfRange {
            alpha,
            range: "(0, 1]",
        })
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::TauOutOfRange { tau })
    }
}

pub fn expectation(dist: &FiniteDistribution) -> f64 {
    dist.atoms()
        .iter()
        .zip(dist.probs())
        .map(|(z, p)| z * p)
        .sum()
}

/// Index of the left `level`-quantile atom.
pub(crate) fn quantile_index(dist: &FiniteDistribution, level: f64) -> usize {
    let threshold = level - CDF_SLACK;
    dist.cumulative()
        .iter()
        .position(|&c| c >= threshold)
        .unwrap_or(dist.len() - 1)
}

/// Value-at-Risk: smallest atom `z` with `F(z) >= 1 - alpha`.
pub fn var(dist: &FiniteDistribution, alpha: f64) -> Result<f64> {
    check_var_alpha(alpha)?;
    Ok(dist.atoms()[quantile_index(dist, 1.0 - alpha)])
}

/// Average Value-at-Risk.
pub fn avar(dist: &FiniteDistribution, alpha: f64) -> Result<f64> {
    check_avar_alpha(alpha)?;
    if alpha == 1.0 {
        return Ok(expectation(dist));
    }
    let t = dist.atoms()[quantile_index(dist, 1.0 - alpha)];
    let excess: f64 = dist
        .atoms()
        .iter()
        .zip(dist.probs())
        .map(|(z, p)| p * (z - t).max(0.0))
        .sum();
    Ok(t + excess / alpha)
}

/// Entropic risk, evaluated with a max-shifted log-sum-exp.
pub fn entropic(dist: &FiniteDistribution, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    let m = dist.max_atom();
    // sum_i p_i (exp(tau (z_i - m)) - 1), kept in expm1 form so small tau keeps precision
    let s_minus_one: f64 = dist
        .atoms()
        .iter()
        .zip(dist.probs())
        .map(|(z, p)| p * (tau * (z - m)).exp_m1())
        .sum();
    Ok(m + s_minus_one.ln_1p() / tau)
}

pub fn evaluate(risk: &RiskSpec, dist: &FiniteDistribution) -> Result<f64> {
    match *risk {
        RiskSpec::Expectation => Ok(expectation(dist)),
        RiskSpec::VaR { alpha } => var(dist, alpha),
        RiskSpec::AVaR { alpha } => avar(dist, alpha),
        RiskSpec::Entropic { tau } => entropic(dist, tau),
    }
}

/// Worst case of `risk` over the members; ties go to the smallest index.
pub fn robust_evaluate(risk: &RiskSpec, dists: &[FiniteDistribution]) -> Result<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (i, d) in dists.iter().enumerate() {
        let v = evaluate(risk, d)?;
        if best.is_none_or(|(b, _)| v > b) {
            best = Some((v, i));
        }
    }
    best.ok_or(Error::EmptyAmbiguitySet)
}

/// A risk functional paired with the declared size of its ambiguity family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustRiskSpec {
    pub inner: RiskSpec,
    pub member_count: usize,
}

impl RobustRiskSpec {
    pub fn new(inner: RiskSpec, member_count: usize) -> Result<Self> {
        inner.validate()?;
        if member_count == 0 {
            return Err(Error::EmptyAmbiguitySet);
        }
        Ok(RobustRiskSpec {
            inner,
            member_count,
        })
    }

    pub fn evaluate(&self, dists: &[FiniteDistribution]) -> Result<(f64, usize)> {
        if dists.len() != self.member_count {
            return Err(Error::AmbiguitySizeMismatch {
                expected: self.member_count,
                got: dists.len(),
            });
        }
        robust_evaluate(&self.inner, dists)
    }
}

pub mod axioms {
    //! Randomized checks of monotonicity (A1), convexity (A2), translation
    //! equivariance (A3) and positive homogeneity (A4) on shared finite sample
    //! spaces.

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use serde::Serialize;

    use super::{evaluate, RiskSpec};
    use crate::measures::Categorical;

    /// Absolute tolerance, scaled by `max(1, |value|)`.
    pub const AXIOM_TOLERANCE: f64 = 1e-9;

    #[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
    pub enum Axiom {
        A1,
        A2,
        A3,
        A4,
    }

    impl Axiom {
        pub const ALL: [Axiom; 4] = [Axiom::A1, Axiom::A2, Axiom::A3, Axiom::A4];

        pub fn name(self) -> &'static str {
            match self {
                Axiom::A1 => "monotonicity",
                Axiom::A2 => "convexity",
                Axiom::A3 => "translation equivariance",
                Axiom::A4 => "positive homogeneity",
            }
        }
    }

    /// Two random variables on a common atom set witnessing a violation.
    ///
    /// For (A1) `z <= z_prime` atomwise but `lhs = R(z_prime) < rhs = R(z)`.
    /// For (A2) `lhs = R(t z + (1-t) z_prime) > rhs = t R(z) + (1-t) R(z_prime)`.
    /// For (A3) and (A4) `z_prime` is `z + c` or `c z` and `lhs`, `rhs` are the
    /// two sides of the identity.
    #[derive(Debug, Clone, PartialEq, Serialize)]
    pub struct Counterexample {
        pub probs: Vec<f64>,
        pub z: Vec<f64>,
        pub z_prime: Vec<f64>,
        pub parameter: f64,
        pub lhs: f64,
        pub rhs: f64,
    }

    #[derive(Debug, Clone, PartialEq, Serialize)]
    pub struct AxiomResult {
        pub axiom: Axiom,
        pub name: &'static str,
        pub holds: bool,
        pub checked: usize,
        pub violations: usize,
        pub max_violation: f64,
        pub counterexample: Option<Counterexample>,
    }

    #[derive(Debug, Clone, PartialEq, Serialize)]
    pub struct AxiomReport {
        pub risk: RiskSpec,
        pub trials: usize,
        pub seed: u64,
        pub axioms: Vec<AxiomResult>,
    }

    impl AxiomReport {
        pub fn get(&self, axiom: Axiom) -> &AxiomResult {
            self.axioms.iter().find(|r| r.axiom == axiom).unwrap()
        }

        pub fn holds(&self, axiom: Axiom) -> bool {
            self.get(axiom).holds
        }
    }

    fn risk_of(risk: &RiskSpec, probs: &Categorical, z: &[f64]) -> f64 {
        let law = probs.law_of(z).expect("generated variables are finite");
        evaluate(risk, &law).expect("risk spec validated before the check")
    }

    struct Instance {
        probs: Categorical,
        z: Vec<f64>,
        z_prime: Vec<f64>,
    }

    // Half the instances live on a coarse integer lattice with equal weights,
    // where quantile jumps and ties are frequent.
    fn draw_instance(rng: &mut ChaCha8Rng) -> Instance {
        let n = rng.gen_range(2..=6);
        let lattice = rng.gen_bool(0.5);
        let probs = if lattice {
            Categorical::uniform(n)
        } else {
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
            let s: f64 = w.iter().sum();
            Categorical::new(w.iter().map(|x| x / s).collect()).unwrap()
        };
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..n)
                .map(|_| {
                    if lattice {
                        rng.gen_range(0..=4) as f64
                    } else {
                        rng.gen_range(-10.0..10.0)
                    }
                })
                .collect()
        };
        let z = draw(rng);
        let z_prime = draw(rng);
        Instance { probs, z, z_prime }
    }

    struct Tracker {
        result: AxiomResult,
    }

    impl Tracker {
        fn new(axiom: Axiom) -> Self {
            Tracker {
                result: AxiomResult {
                    axiom,
                    name: axiom.name(),
                    holds: true,
                    checked: 0,
                    violations: 0,
                    max_violation: 0.0,
                    counterexample: None,
                },
            }
        }

        // `excess > tol` is a violation
        fn record(&mut self, excess: f64, tol: f64, witness: impl FnOnce() -> Counterexample) {
            self.result.checked += 1;
            if excess > tol {
                self.result.holds = false;
                self.result.violations += 1;
                if excess > self.result.max_violation {
                    self.result.max_violation = excess;
                }
                if self.result.counterexample.is_none() {
                    self.result.counterexample = Some(witness());
                }
            }
        }
    }

    fn tol(scale: f64) -> f64 {
        AXIOM_TOLERANCE * scale.abs().max(1.0)
    }

    /// Runs `trials` random instances of each axiom. Deterministic in `seed`.
    pub fn check_axioms(risk: &RiskSpec, trials: usize, seed: u64) -> AxiomReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a1 = Tracker::new(Axiom::A1);
        let mut a2 = Tracker::new(Axiom::A2);
        let mut a3 = Tracker::new(Axiom::A3);
        let mut a4 = Tracker::new(Axiom::A4);

        for _ in 0..trials {
            let Instance { probs, z, z_prime } = draw_instance(&mut rng);
            let rz = risk_of(risk, &probs, &z);
            let rzp = risk_of(risk, &probs, &z_prime);

            // (A1): raise z by a nonnegative perturbation, some entries untouched
            let upper: Vec<f64> = z
                .iter()
                .map(|v| {
                    if rng.gen_bool(0.5) {
                        *v
                    } else {
                        v + rng.gen_range(0.0..3.0)
                    }
                })
                .collect();
            let r_upper = risk_of(risk, &probs, &upper);
            a1.record(rz - r_upper, tol(rz), || Counterexample {
                probs: probs.probs().to_vec(),
                z: z.clone(),
                z_prime: upper.clone(),
                parameter: 0.0,
                lhs: r_upper,
                rhs: rz,
            });

            // (A2)
            let t = if rng.gen_bool(0.5) {
                0.5
            } else {
                rng.gen_range(0.0..=1.0)
            };
            let mix: Vec<f64> = z
                .iter()
                .zip(&z_prime)
                .map(|(a, b)| t * a + (1.0 - t) * b)
                .collect();
            let r_mix = risk_of(risk, &probs, &mix);
            let bound = t * rz + (1.0 - t) * rzp;
            a2.record(r_mix - bound, tol(bound), || Counterexample {
                probs: probs.probs().to_vec(),
                z: z.clone(),
                z_prime: z_prime.clone(),
                parameter: t,
                lhs: r_mix,
                rhs: bound,
            });

            // (A3)
            let c = rng.gen_range(-10.0..10.0);
            let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
            let r_shift = risk_of(risk, &probs, &shifted);
            a3.record((r_shift - (rz + c)).abs(), tol(rz + c), || Counterexample {
                probs: probs.probs().to_vec(),
                z: z.clone(),
                z_prime: shifted.clone(),
                parameter: c,
                lhs: r_shift,
                rhs: rz + c,
            });

            // (A4)
            let s = rng.gen_range(0.0..5.0);
            let scaled: Vec<f64> = z.iter().map(|v| s * v).collect();
            let r_scale = risk_of(risk, &probs, &scaled);
            a4.record((r_scale - s * rz).abs(), tol(s * rz), || Counterexample {
                probs: probs.probs().to_vec(),
                z: z.clone(),
                z_prime: scaled.clone(),
                parameter: s,
                lhs: r_scale,
                rhs: s * rz,
            });
        }

        AxiomReport {
            risk: *risk,
            trials,
            seed,
            axioms: vec![a1.result, a2.result, a3.result, a4.result],
        }
    }
}

pub use axioms::{check_axioms, Axiom, AxiomReport};

#[cfg(test)]
mod tests {
    use super::*;

    fn d(values: &[f64], probs: &[f64]) -> FiniteDistribution {
        FiniteDistribution::new(values.to_vec(), probs.to_vec()).unwrap()
    }

    fn uniform4() -> FiniteDistribution {
        FiniteDistribution::uniform(&[1.0, 2.0, 3.0, 4.0]).unwrap()
    }

    #[test]
    fn expectation_examples() {
        assert_eq!(expectation(&FiniteDistribution::dirac(5.0).unwrap()), 5.0);
        assert_eq!(expectation(&d(&[1.0, 3.0], &[0.5, 0.5])), 2.0);
        assert!((expectation(&d(&[0.0, 10.0], &[0.9, 0.1])) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn var_examples() {
        assert_eq!(var(&uniform4(), 0.3).unwrap(), 3.0);
        assert_eq!(var(&FiniteDistribution::dirac(-2.5).unwrap(), 0.7).unwrap(), -2.5);
        assert_eq!(var(&d(&[0.0, 10.0], &[0.9, 0.1]), 0.05).unwrap(), 10.0);
        assert!(matches!(var(&uniform4(), 1.0), Err(Error::AlphaOutOfRange { .. })));
        assert!(matches!(var(&uniform4(), 0.0), Err(Error::AlphaOutOfRange { .. })));
    }

    #[test]
    fn var_threshold_slack_keeps_exact_levels() {
        // 1 - 0.7 = 0.30000000000000004 overshoots F(1) = 0.3 by an ulp
        let dist = d(&[1.0, 2.0], &[0.3, 0.7]);
        assert_eq!(var(&dist, 0.7).unwrap(), 1.0);
        let thirds = FiniteDistribution::uniform(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(var(&thirds, 1.0 / 3.0).unwrap(), 2.0);
    }

    #[test]
    fn avar_examples() {
        assert_eq!(avar(&d(&[0.0, 10.0], &[0.5, 0.5]), 0.5).unwrap(), 10.0);
        assert_eq!(avar(&uniform4(), 0.25).unwrap(), 4.0);
        let skew = d(&[0.0, 10.0, 3.0], &[0.5, 0.2, 0.3]);
        assert_eq!(avar(&skew, 1.0).unwrap(), expectation(&skew));
        assert!(matches!(avar(&skew, 1.5), Err(Error::AlphaOutOfRange { .. })));
    }

    #[test]
    fn entropic_examples() {
        assert_eq!(entropic(&FiniteDistribution::dirac(3.0).unwrap(), 2.0).unwrap(), 3.0);
        let coin = d(&[0.0, 1.0], &[0.5, 0.5]);
        let expected = ((1.0 + std::f64::consts::E) / 2.0).ln();
        assert!((entropic(&coin, 1.0).unwrap() - expected).abs() < 1e-15);
        assert!((entropic(&coin, 1.0).unwrap() - 0.620115).abs() < 1e-6);
        assert!((entropic(&coin, 1e-6).unwrap() - 0.5).abs() < 1e-3);
        assert!(matches!(entropic(&coin, 0.0), Err(Error::TauOutOfRange { .. })));
        // no overflow for large tau * z
        let big = d(&[0.0, 700.0], &[0.5, 0.5]);
        assert!(entropic(&big, 5.0).unwrap().is_finite());
    }

    #[test]
    fn evaluate_dispatch() {
        assert_eq!(evaluate(&RiskSpec::VaR { alpha: 0.3 }, &uniform4()).unwrap(), 3.0);
        assert_eq!(
            evaluate(&RiskSpec::Expectation, &FiniteDistribution::dirac(5.0).unwrap()).unwrap(),
            5.0
        );
        assert_eq!(
            evaluate(&RiskSpec::AVaR { alpha: 1.0 }, &d(&[1.0, 3.0], &[0.5, 0.5])).unwrap(),
            2.0
        );
    }

    #[test]
    fn robust_examples() {
        let members = vec![d(&[0.0, 10.0], &[0.9, 0.1]), d(&[0.0, 10.0], &[0.5, 0.5])];
        let (v, i) = robust_evaluate(&RiskSpec::Expectation, &members).unwrap();
        assert!((v - 5.0).abs() < 1e-15);
        assert_eq!(i, 1);
        assert_eq!(
            robust_evaluate(&RiskSpec::VaR { alpha: 0.2 }, &members).unwrap(),
            (10.0, 1)
        );
        let single = vec![uniform4()];
        assert_eq!(
            robust_evaluate(&RiskSpec::AVaR { alpha: 0.5 }, &single).unwrap(),
            (avar(&uniform4(), 0.5).unwrap(), 0)
        );
        assert_eq!(
            robust_evaluate(&RiskSpec::Expectation, &[]),
            Err(Error::EmptyAmbiguitySet)
        );
        // ties resolve to the smallest index
        let twins = vec![uniform4(), uniform4()];
        assert_eq!(robust_evaluate(&RiskSpec::Expectation, &twins).unwrap().1, 0);
    }

    #[test]
    fn robust_spec_checks_member_count() {
        let spec = RobustRiskSpec::new(RiskSpec::Expectation, 2).unwrap();
        assert!(matches!(
            spec.evaluate(&[uniform4()]),
            Err(Error::AmbiguitySizeMismatch { .. })
        ));
        assert!(RobustRiskSpec::new(RiskSpec::Expectation, 0).is_err());
    }

    #[test]
    fn spec_parsing() {
        assert_eq!("var:0.3".parse::<RiskSpec>().unwrap(), RiskSpec::VaR { alpha: 0.3 });
        assert_eq!("avar:1".parse::<RiskSpec>().unwrap(), RiskSpec::AVaR { alpha: 1.0 });
        assert_eq!("expectation".parse::<RiskSpec>().unwrap(), RiskSpec::Expectation);
        assert!("var:1.2".parse::<RiskSpec>().is_err());
        assert!("var".parse::<RiskSpec>().is_err());
        let s: RiskSpec = serde_json::from_str(r#"{"kind":"entropic","tau":1.0}"#).unwrap();
        assert_eq!(s, RiskSpec::Entropic { tau: 1.0 });
        assert_eq!(
            serde_json::to_string(&RiskSpec::VaR { alpha: 0.1 }).unwrap(),
            r#"{"kind":"var","alpha":0.1}"#
        );
        assert!(serde_json::from_str::<RiskSpec>(r#"{"kind":"var","alpha":2}"#).is_err());
        assert!(serde_json::from_str::<RiskSpec>(r#"{"kind":"avar"}"#).is_err());
    }

    #[test]
    fn axiom_examples() {
        let r = check_axioms(&RiskSpec::AVaR { alpha: 0.5 }, 200, 1);
        assert!(Axiom::ALL.iter().all(|a| r.holds(*a)));

        let r = check_axioms(&RiskSpec::VaR { alpha: 0.5 }, 200, 1);
        assert!(r.holds(Axiom::A1) && r.holds(Axiom::A3) && r.holds(Axiom::A4));
        assert!(!r.holds(Axiom::A2));
        let cx = r.get(Axiom::A2).counterexample.clone().unwrap();
        // replay the stored witness
        let p = crate::measures::Categorical::new(cx.probs.clone()).unwrap();
        let mix: Vec<f64> = cx
            .z
            .iter()
            .zip(&cx.z_prime)
            .map(|(a, b)| cx.parameter * a + (1.0 - cx.parameter) * b)
            .collect();
        let spec = RiskSpec::VaR { alpha: 0.5 };
        let lhs = evaluate(&spec, &p.law_of(&mix).unwrap()).unwrap();
        let rhs = cx.parameter * evaluate(&spec, &p.law_of(&cx.z).unwrap()).unwrap()
            + (1.0 - cx.parameter) * evaluate(&spec, &p.law_of(&cx.z_prime).unwrap()).unwrap();
        assert!(lhs > rhs + 1e-9);

        let r = check_axioms(&RiskSpec::Entropic { tau: 1.0 }, 200, 1);
        assert!(r.holds(Axiom::A1) && r.holds(Axiom::A2) && r.holds(Axiom::A3));
        assert!(!r.holds(Axiom::A4));
    }

    #[test]
    fn axiom_report_is_deterministic() {
        let spec = RiskSpec::VaR { alpha: 0.25 };
        let a = serde_json::to_string(&check_axioms(&spec, 50, 9)).unwrap();
        let b = serde_json::to_string(&check_axioms(&spec, 50, 9)).unwrap();
        assert_eq!(a, b);
    }
}
