//! Exact-rational validation of the admissibility region and the full
//! chain of derived exponents.
//!
//! Everything here is computed in exact rational arithmetic: the
//! admissibility window
//!
//! ```text
//! 1 < γ < min{ 2(n+1)/(n+2), (3n−2)/(n+2) },
//! (n+2)(γ+1)/(4n) + 1/2 < β < (n+2)(γ+1)/(2n),
//! ```
//!
//! the base exponent q = (2β/(n+2) + 1/2 − (γ+1)/n)^{−1}, and the derived
//! family (μ, r, p, s, p₁, p₃, s₃, p₄, α, α₃, δ) together with the
//! inequality chain they must satisfy. No tolerances appear in this
//! module; every comparison is a rational comparison.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::util::{rat, rational_f64, rational_string};

/// The tuple (n, γ, β, k). The weight index k is carried along for
/// reporting; the main theorem fixes k = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    n: u32,
    gamma: BigRational,
    beta: BigRational,
    k: BigRational,
}

impl Params {
    pub fn new(n: u32, gamma: BigRational, beta: BigRational, k: BigRational) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be a positive integer".into()));
        }
        if !gamma.is_positive() {
            return Err(Error::InvalidParameter("gamma must be > 0".into()));
        }
        if !beta.is_positive() {
            return Err(Error::InvalidParameter("beta must be > 0".into()));
        }
        if k.is_negative() {
            return Err(Error::InvalidParameter("k must be >= 0".into()));
        }
        Ok(Self { n, gamma, beta, k })
    }

    /// Convenience constructor with k = 1.
    pub fn with_unit_weight(n: u32, gamma: BigRational, beta: BigRational) -> Result<Self> {
        Self::new(n, gamma, beta, BigRational::one())
    }

    pub fn n(&self) -> u32 {
        self.n
    }
    pub fn gamma(&self) -> &BigRational {
        &self.gamma
    }
    pub fn beta(&self) -> &BigRational {
        &self.beta
    }
    pub fn weight(&self) -> &BigRational {
        &self.k
    }
}

/// Every exponent derived from (n, γ, β), all exact.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedExponents {
    pub q: BigRational,
    pub mu: BigRational,
    pub r: BigRational,
    pub p: BigRational,
    pub s: BigRational,
    pub q_conj: BigRational,
    pub r_conj: BigRational,
    pub p1: BigRational,
    pub p3: BigRational,
    pub s3: BigRational,
    /// p₄ = 6n/(3n−2γ); the text's p₅ has the same defining expression
    /// and is housed here.
    pub p4: BigRational,
    pub alpha: BigRational,
    pub alpha3: BigRational,
    pub delta: BigRational,
}

/// One evaluated constraint, with both sides kept exact.
///
/// `gates_feasibility` is false for the checks that are algebraically
/// equivalent to δ > 0 (notably q < 2n/(n+2(1−γ)), which reduces to
/// β > (n+2)/n, i.e. exactly δ > 0): those are reported alongside the
/// δ flag instead of rejecting the parameter set, since the admissibility
/// window alone does not imply them.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintCheck {
    pub name: &'static str,
    pub lhs: BigRational,
    pub relation: Relation,
    pub rhs: BigRational,
    pub satisfied: bool,
    pub gates_feasibility: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
}

impl Relation {
    fn holds(self, lhs: &BigRational, rhs: &BigRational) -> bool {
        match self {
            Relation::Lt => lhs < rhs,
            Relation::Le => lhs <= rhs,
        }
    }
}

fn check(
    name: &'static str,
    lhs: BigRational,
    relation: Relation,
    rhs: BigRational,
) -> ConstraintCheck {
    let satisfied = relation.holds(&lhs, &rhs);
    ConstraintCheck { name, lhs, relation, rhs, satisfied, gates_feasibility: true }
}

fn reported_check(
    name: &'static str,
    lhs: BigRational,
    relation: Relation,
    rhs: BigRational,
) -> ConstraintCheck {
    let mut c = check(name, lhs, relation, rhs);
    c.gates_feasibility = false;
    c
}

/// Outcome of the admissibility evaluation.
#[derive(Debug, Clone)]
pub struct AdmissibilityReport {
    pub feasible: bool,
    /// Every constraint evaluated, satisfied or not.
    pub checks: Vec<ConstraintCheck>,
    /// The failing subset of `checks`. Empty iff `feasible`.
    pub violations: Vec<ConstraintCheck>,
    /// Present iff feasible.
    pub derived: Option<DerivedExponents>,
    /// δ > 0 is reported separately and does not gate feasibility: the
    /// admissibility window alone does not imply it.
    pub delta_positive: bool,
    pub delta: BigRational,
}

/// Open interval with rational endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalInterval {
    pub lower: BigRational,
    pub upper: BigRational,
}

impl RationalInterval {
    pub fn is_empty(&self) -> bool {
        self.upper <= self.lower
    }
}

/// The admissible open γ-interval (1, min{2(n+1)/(n+2), (3n−2)/(n+2)}).
/// Empty when the upper endpoint is ≤ 1; this happens exactly for n < 3.
pub fn feasible_gamma_interval(n: u32) -> Result<RationalInterval> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be a positive integer".into()));
    }
    let n = n as i64;
    let a = rat(2 * (n + 1), n + 2);
    let b = rat(3 * n - 2, n + 2);
    let upper = a.min(b);
    Ok(RationalInterval { lower: BigRational::one(), upper })
}

/// δ = 2nβ/(n+2) − 2. May be ≤ 0; positivity is reported, not enforced.
pub fn theoretical_decay(n: u32, beta: &BigRational) -> Result<BigRational> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be a positive integer".into()));
    }
    if !beta.is_positive() {
        return Err(Error::InvalidParameter("beta must be > 0".into()));
    }
    let n = n as i64;
    Ok(rat(2 * n, n + 2) * beta - rat(2, 1))
}

/// Raw exponent formulas, assuming q is well defined (its reciprocal
/// positive). Callers gate on that.
fn derive_unchecked(params: &Params) -> DerivedExponents {
    let n = params.n as i64;
    let gamma = &params.gamma;
    let beta = &params.beta;
    let one = BigRational::one();
    let two = rat(2, 1);

    // q = (2β/(n+2) + 1/2 − (γ+1)/n)^{−1}
    let inv_q = rat(2, n + 2) * beta + rat(1, 2) - (gamma + &one) / rat(n, 1);
    let q = inv_q.recip();

    // μ = (1/2)(1 + n/2)(1 − 2/q)
    let one_minus_2q = &one - rat(2, 1) * &inv_q;
    let mu = rat(1, 2) * rat(n + 2, 2) * &one_minus_2q;

    // 2/r = (n/2)(1 − 2/q)
    let inv_r = rat(n, 4) * &one_minus_2q;
    let r = inv_r.recip();

    // 2/p + γ/n = 2 − 2/q
    let inv_p = (&two - &two * &inv_q - gamma / rat(n, 1)) / &two;
    let p = inv_p.recip();

    // 2/s = 1 − 2/r
    let inv_s = (&one - &two * &inv_r) / &two;
    let s = inv_s.recip();

    let q_conj = &q / (&q - &one);
    let r_conj = &r / (&r - &one);

    // 3/p1 = 3/2 − γ/n
    let p1 = (rat(3, 2) - gamma / rat(n, 1)).recip() * rat(3, 1);

    // 2/p3 = 3/2 − 1/q − (γ+1)/n
    let p3 = ((rat(3, 2) - &inv_q - (gamma + &one) / rat(n, 1)) / &two).recip();

    // 2/s3 = 1 − 1/r
    let s3 = ((&one - &inv_r) / &two).recip();

    // p4 = 6n/(3n − 2γ)
    let p4 = rat(6 * n, 1) / (rat(3 * n, 1) - &two * gamma);

    // α = (1 + n/2)(1 − 2/p), α3 likewise with p3
    let alpha = rat(n + 2, 2) * (&one - &two * &inv_p);
    let alpha3 = rat(n + 2, 2) * (&one - &two / &p3);

    let delta = rat(2 * n, n + 2) * beta - &two;

    DerivedExponents {
        q,
        mu,
        r,
        p,
        s,
        q_conj,
        r_conj,
        p1,
        p3,
        s3,
        p4,
        alpha,
        alpha3,
        delta,
    }
}

/// Evaluate the full admissibility chain: the γ-window, the β-window, and
/// the derived inequalities on q and μ. Feasibility requires all of them;
/// δ > 0 is flagged separately.
pub fn check_constraints(params: &Params) -> AdmissibilityReport {
    let n = params.n as i64;
    let gamma = params.gamma.clone();
    let beta = params.beta.clone();
    let one = BigRational::one();
    let two = rat(2, 1);

    let mut checks = Vec::new();

    let interval = feasible_gamma_interval(params.n).expect("n validated by Params");
    checks.push(check(
        "nonempty_gamma_interval",
        one.clone(),
        Relation::Lt,
        interval.upper.clone(),
    ));
    checks.push(check("gamma_lower", one.clone(), Relation::Lt, gamma.clone()));
    checks.push(check("gamma_upper", gamma.clone(), Relation::Lt, interval.upper.clone()));

    // β-window
    let beta_lo = rat(n + 2, 4 * n) * (&gamma + &one) + rat(1, 2);
    let beta_hi = rat(n + 2, 2 * n) * (&gamma + &one);
    checks.push(check("beta_lower", beta_lo, Relation::Lt, beta.clone()));
    checks.push(check("beta_upper", beta.clone(), Relation::Lt, beta_hi));

    // Derived chain. q is well defined only when its reciprocal is
    // positive; record that as its own check and skip the dependents
    // otherwise.
    let inv_q = rat(2, n + 2) * &beta + rat(1, 2) - (&gamma + &one) / rat(n, 1);
    checks.push(check("q_defined", BigRational::zero(), Relation::Lt, inv_q.clone()));

    let delta = theoretical_decay(params.n, &beta).expect("validated by Params");

    if inv_q.is_positive() {
        let d = derive_unchecked(params);

        checks.push(check("beta_min", one.clone(), Relation::Le, beta.clone()));
        checks.push(check("beta_max", beta.clone(), Relation::Le, two.clone()));
        checks.push(check("q_lower", two.clone(), Relation::Lt, d.q.clone()));
        // q < 2n/(n + 2(1−γ)) is equivalent to β > (n+2)/n, i.e. to
        // δ > 0, so it is reported rather than gating. The denominator is
        // positive on the γ-window; guard against probes far outside it.
        let q_upper_den = rat(n, 1) + &two * (&one - &gamma);
        if q_upper_den.is_positive() {
            let q_upper = rat(2 * n, 1) / q_upper_den;
            checks.push(reported_check("q_upper", d.q.clone(), Relation::Lt, q_upper));
        }
        checks.push(check(
            "gamma_vs_beta",
            gamma.clone(),
            Relation::Lt,
            rat(3 * n, n + 2) * &beta,
        ));
        checks.push(check("mu_positive", BigRational::zero(), Relation::Lt, d.mu.clone()));
        checks.push(check("mu_max", d.mu.clone(), Relation::Le, rat(1, 2)));
        checks.push(check("mu_vs_beta", d.mu.clone(), Relation::Le, &beta - &one));
        checks.push(check(
            "mu_beta_sum",
            &d.mu + &beta - &two,
            Relation::Le,
            BigRational::zero(),
        ));
    }

    let violations: Vec<ConstraintCheck> =
        checks.iter().filter(|c| c.gates_feasibility && !c.satisfied).cloned().collect();
    let feasible = violations.is_empty();
    let delta_positive = delta.is_positive();
    let derived = if feasible { Some(derive_unchecked(params)) } else { None };

    AdmissibilityReport { feasible, checks, violations, derived, delta_positive, delta }
}

/// All derived exponents for a feasible parameter set. Fails on
/// infeasible inputs.
pub fn derive_exponents(params: &Params) -> Result<DerivedExponents> {
    let report = check_constraints(params);
    if !report.feasible {
        let names: Vec<&str> = report.violations.iter().map(|v| v.name).collect();
        return Err(Error::Infeasible(names.join(", ")));
    }
    Ok(report.derived.expect("feasible reports carry derived exponents"))
}

// --- JSON rendering -------------------------------------------------------

/// Rational rendered for reports: exact "num/den" plus a decimal
/// approximation.
#[derive(Debug, Clone, Serialize)]
pub struct RationalJson {
    pub exact: String,
    pub approx: f64,
}

impl From<&BigRational> for RationalJson {
    fn from(r: &BigRational) -> Self {
        RationalJson { exact: rational_string(r), approx: rational_f64(r) }
    }
}

impl AdmissibilityReport {
    pub fn to_json(&self) -> serde_json::Value {
        let check_json = |c: &ConstraintCheck| {
            serde_json::json!({
                "name": c.name,
                "lhs": RationalJson::from(&c.lhs),
                "relation": match c.relation { Relation::Lt => "<", Relation::Le => "<=" },
                "rhs": RationalJson::from(&c.rhs),
                "satisfied": c.satisfied,
                "gates_feasibility": c.gates_feasibility,
            })
        };
        let derived = self.derived.as_ref().map(|d| {
            serde_json::json!({
                "q": RationalJson::from(&d.q),
                "mu": RationalJson::from(&d.mu),
                "r": RationalJson::from(&d.r),
                "p": RationalJson::from(&d.p),
                "s": RationalJson::from(&d.s),
                "q_conj": RationalJson::from(&d.q_conj),
                "r_conj": RationalJson::from(&d.r_conj),
                "p1": RationalJson::from(&d.p1),
                "p3": RationalJson::from(&d.p3),
                "s3": RationalJson::from(&d.s3),
                "p4": RationalJson::from(&d.p4),
                "alpha": RationalJson::from(&d.alpha),
                "alpha3": RationalJson::from(&d.alpha3),
                "delta": RationalJson::from(&d.delta),
            })
        });
        serde_json::json!({
            "feasible": self.feasible,
            "delta_positive": self.delta_positive,
            "delta": RationalJson::from(&self.delta),
            "checks": self.checks.iter().map(check_json).collect::<Vec<_>>(),
            "violations": self.violations.iter().map(check_json).collect::<Vec<_>>(),
            "derived": derived,
        })
    }
}
