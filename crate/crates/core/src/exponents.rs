//! Exponents and regime thresholds for `∂ₜu − Δₚu + |∇u|^q = 0`.
//!
//! Everything downstream (solver defaults, fitted-law selection, proof-step
//! checkers) reads its exponents from [`ExponentSet`], so this module is the
//! single place where the arithmetic lives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used when testing `q` against the critical values
/// `p − 1` and `q_*`.
pub const REGIME_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub p: f64,
    pub q: f64,
    #[serde(rename = "N")]
    pub n: u32,
    pub eps: f64,
    pub gamma: f64,
}

impl ProblemParams {
    /// Parameters with the largest admissible floor exponent `γ`.
    pub fn new(p: f64, q: f64, n: u32, eps: f64) -> Result<Self> {
        check_pqn(p, q, n)?;
        let gamma = gamma_max(p, q, n);
        let params = Self { p, q, n, eps, gamma };
        params.validate()?;
        Ok(params)
    }

    pub fn with_gamma(self, gamma: f64) -> Result<Self> {
        let params = Self { gamma, ..self };
        params.validate()?;
        Ok(params)
    }

    pub fn with_eps(self, eps: f64) -> Result<Self> {
        let params = Self { eps, ..self };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        check_pqn(self.p, self.q, self.n)?;
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(Error::InvalidParams(format!(
                "eps must lie in (0, 1/2), got {}",
                self.eps
            )));
        }
        let gmax = gamma_max(self.p, self.q, self.n);
        if !(self.gamma > 0.0 && self.gamma <= gmax + 1e-15) {
            return Err(Error::InvalidParams(format!(
                "gamma must lie in (0, {gmax}], got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    /// The lifted floor `ε^γ`.
    pub fn floor(&self) -> f64 {
        self.eps.powf(self.gamma)
    }

    pub fn exponents(&self) -> ExponentSet {
        // p, q, N were validated at construction
        compute_exponents(self.p, self.q, self.n).expect("validated parameters")
    }

    pub fn regime(&self) -> Regime {
        classify(self.p, self.q, self.n)
    }
}

fn check_pqn(p: f64, q: f64, n: u32) -> Result<()> {
    if !(p > 2.0) || !p.is_finite() {
        return Err(Error::InvalidParams(format!("p must satisfy p > 2, got {p}")));
    }
    if !(q > 1.0) || !q.is_finite() {
        return Err(Error::InvalidParams(format!("q must satisfy q > 1, got {q}")));
    }
    if n < 1 {
        return Err(Error::InvalidParams(format!("N must satisfy N >= 1, got {n}")));
    }
    Ok(())
}

pub fn alpha_p(p: f64, n: u32) -> f64 {
    let nf = f64::from(n);
    let inv = (p - 1.0) / (p - 2.0) - (nf - 1.0) / (p * (nf + 3.0) - 2.0 * (nf + 1.0));
    1.0 / inv
}

pub fn beta_pq(p: f64, q: f64, n: u32) -> f64 {
    alpha_p(p, n).max((q - 1.0) / q)
}

pub fn q_star(p: f64, n: u32) -> f64 {
    let nf = f64::from(n);
    p - nf / (nf + 1.0)
}

pub fn xi(q: f64, n: u32) -> f64 {
    let nf = f64::from(n);
    1.0 / (q * (nf + 1.0) - nf)
}

pub fn eta(p: f64, n: u32) -> f64 {
    let nf = f64::from(n);
    1.0 / (nf * (p - 2.0) + p)
}

/// Largest admissible floor exponent: `min{3/4, 2β_{p,q}, q, (q+2)/2}`.
pub fn gamma_max(p: f64, q: f64, n: u32) -> f64 {
    0.75_f64
        .min(2.0 * beta_pq(p, q, n))
        .min(q)
        .min((q + 2.0) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentSet {
    pub alpha_p: f64,
    pub beta_pq: f64,
    pub q_star: f64,
    pub xi: f64,
    pub eta: f64,
    /// Support-growth exponent `(q−p+1)/(2q−p)`; only in the intermediate regime.
    pub a_support: Option<f64>,
    /// L¹-decay exponent `(N+1)(q_*−q)/(2q−p)`; only in the intermediate regime.
    pub b_l1: Option<f64>,
    pub gamma_max: f64,
    pub regime: Regime,
}

pub fn compute_exponents(p: f64, q: f64, n: u32) -> Result<ExponentSet> {
    check_pqn(p, q, n)?;
    let regime = classify(p, q, n);
    let qs = q_star(p, n);
    let (a_support, b_l1) = if regime == Regime::Intermediate {
        let a = (q - p + 1.0) / (2.0 * q - p);
        let b = (f64::from(n) + 1.0) * (qs - q) / (2.0 * q - p);
        (Some(a), Some(b))
    } else {
        (None, None)
    };
    Ok(ExponentSet {
        alpha_p: alpha_p(p, n),
        beta_pq: beta_pq(p, q, n),
        q_star: qs,
        xi: xi(q, n),
        eta: eta(p, n),
        a_support,
        b_l1,
        gamma_max: gamma_max(p, q, n),
        regime,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// `1 < q < p − 1`
    AbsorptionDominated,
    /// `q = p − 1`
    CriticalAbsorption,
    /// `p − 1 < q < q_*`
    Intermediate,
    /// `q = q_*`
    CriticalMass,
    /// `q > q_*`
    DiffusionDominated,
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::AbsorptionDominated => "AbsorptionDominated",
            Regime::CriticalAbsorption => "CriticalAbsorption",
            Regime::Intermediate => "Intermediate",
            Regime::CriticalMass => "CriticalMass",
            Regime::DiffusionDominated => "DiffusionDominated",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn classify(p: f64, q: f64, n: u32) -> Regime {
    let qs = q_star(p, n);
    let d1 = q - (p - 1.0);
    let d2 = q - qs;
    if d1.abs() <= REGIME_TOL {
        Regime::CriticalAbsorption
    } else if d2.abs() <= REGIME_TOL {
        Regime::CriticalMass
    } else if d1 < 0.0 {
        Regime::AbsorptionDominated
    } else if d2 < 0.0 {
        Regime::Intermediate
    } else {
        Regime::DiffusionDominated
    }
}

pub fn classify_regime(params: &ProblemParams) -> Result<Regime> {
    check_pqn(params.p, params.q, params.n)?;
    Ok(classify(params.p, params.q, params.n))
}

/// A time-decay rate `t^{exponent}`. At `q = q_*` both neighbouring
/// branches are reported instead of picking one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RateLaw {
    Single(f64),
    CriticalMass { below: f64, above: f64 },
}

impl RateLaw {
    /// The slower (larger) of the reported exponents.
    pub fn exponent(&self) -> f64 {
        match *self {
            RateLaw::Single(e) => e,
            RateLaw::CriticalMass { below, above } => below.max(above),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SupportLaw {
    Bounded,
    Log,
    Power(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum L1Law {
    /// `‖u(t)‖₁ ≲ t^{exponent}`
    Power(f64),
    /// `‖u(t)‖₁ ≲ t^{power} (ln t)^{log_power}`
    PowerLog { power: f64, log_power: f64 },
    /// `‖u(t)‖₁ ≲ (ln t)^{log_power}`
    InverseLogPower(f64),
    PositiveLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictedLaws {
    pub regime: Regime,
    pub sup_decay: RateLaw,
    pub grad_decay: RateLaw,
    pub support: SupportLaw,
    pub l1: L1Law,
}

pub fn predicted_laws(params: &ProblemParams) -> Result<PredictedLaws> {
    let ex = compute_exponents(params.p, params.q, params.n)?;
    let nf = f64::from(params.n);
    let q = params.q;
    let (sup_decay, grad_decay) = match ex.regime {
        Regime::CriticalMass => (
            RateLaw::CriticalMass {
                below: -nf * ex.xi,
                above: -nf * ex.eta,
            },
            RateLaw::CriticalMass {
                below: -(nf + 1.0) * ex.xi,
                above: -(nf + 1.0) * ex.eta,
            },
        ),
        Regime::DiffusionDominated => (
            RateLaw::Single(-nf * ex.eta),
            RateLaw::Single(-(nf + 1.0) * ex.eta),
        ),
        _ => (
            RateLaw::Single(-nf * ex.xi),
            RateLaw::Single(-(nf + 1.0) * ex.xi),
        ),
    };
    let (support, l1) = match ex.regime {
        Regime::AbsorptionDominated => (SupportLaw::Bounded, L1Law::Power(-1.0 / (q - 1.0))),
        Regime::CriticalAbsorption => (
            SupportLaw::Log,
            L1Law::PowerLog {
                power: -1.0 / (q - 1.0),
                log_power: 1.0 / (ex.xi * (q - 1.0)),
            },
        ),
        Regime::Intermediate => (
            SupportLaw::Power(ex.a_support.expect("intermediate regime")),
            L1Law::Power(-ex.b_l1.expect("intermediate regime")),
        ),
        Regime::CriticalMass => (
            SupportLaw::Power(ex.eta),
            L1Law::InverseLogPower(-1.0 / (q - 1.0)),
        ),
        Regime::DiffusionDominated => (SupportLaw::Power(ex.eta), L1Law::PositiveLimit),
    };
    Ok(PredictedLaws {
        regime: ex.regime,
        sup_decay,
        grad_decay,
        support,
        l1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn exponents_p3_q2_n1() {
        let ex = compute_exponents(3.0, 2.0, 1).unwrap();
        assert!(close(ex.alpha_p, 0.5, 1e-15));
        assert!(close(ex.beta_pq, 0.5, 1e-15));
        assert!(close(ex.q_star, 2.5, 1e-15));
        assert!(close(ex.xi, 1.0 / 3.0, 1e-15));
        assert!(close(ex.eta, 0.25, 1e-15));
        assert_eq!(ex.regime, Regime::CriticalAbsorption);
        assert!(ex.a_support.is_none() && ex.b_l1.is_none());
    }

    #[test]
    fn exponents_p3_q2_n2() {
        let ex = compute_exponents(3.0, 2.0, 2).unwrap();
        assert!(close(ex.alpha_p, 9.0 / 17.0, 1e-15));
        assert!(close(ex.beta_pq, 9.0 / 17.0, 1e-15));
        assert!(close(ex.q_star, 7.0 / 3.0, 1e-15));
        assert!(close(ex.xi, 0.25, 1e-15));
        assert!(close(ex.eta, 0.2, 1e-15));
    }

    #[test]
    fn intermediate_exponents() {
        let ex = compute_exponents(3.0, 2.25, 1).unwrap();
        assert_eq!(ex.regime, Regime::Intermediate);
        assert!(close(ex.a_support.unwrap(), 1.0 / 6.0, 1e-15));
        assert!(close(ex.b_l1.unwrap(), 1.0 / 3.0, 1e-15));
    }

    #[test]
    fn rejects_bad_params() {
        assert!(compute_exponents(2.0, 2.0, 1).is_err());
        assert!(compute_exponents(3.0, 1.0, 1).is_err());
        assert!(compute_exponents(3.0, 2.0, 0).is_err());
        assert!(ProblemParams::new(3.0, 2.0, 1, 0.5).is_err());
        assert!(ProblemParams::new(3.0, 2.0, 1, 0.0).is_err());
        let pp = ProblemParams::new(3.0, 2.0, 1, 1e-3).unwrap();
        assert!(pp.with_gamma(0.8).is_err());
        assert!(pp.with_gamma(0.0).is_err());
    }

    #[test]
    fn regime_examples() {
        let r = |q| ProblemParams::new(3.0, q, 1, 1e-3).unwrap().regime();
        assert_eq!(r(1.5), Regime::AbsorptionDominated);
        assert_eq!(r(2.0), Regime::CriticalAbsorption);
        assert_eq!(r(2.25), Regime::Intermediate);
        assert_eq!(r(2.5), Regime::CriticalMass);
        assert_eq!(r(3.0), Regime::DiffusionDominated);
    }

    #[test]
    fn default_gamma_is_largest_admissible() {
        let pp = ProblemParams::new(3.0, 1.5, 1, 1e-3).unwrap();
        assert!(close(pp.gamma, 0.75, 1e-15));
        // 2β binds: N = 1, p = 2.2 gives α = 0.2/1.2, q = 1.1 gives (q-1)/q < α
        let pp = ProblemParams::new(2.2, 1.1, 1, 1e-3).unwrap();
        assert!(close(pp.gamma, 2.0 * (0.2 / 1.2), 1e-15));
    }

    #[test]
    fn predicted_law_examples() {
        let pp = ProblemParams::new(3.0, 1.6, 1, 1e-3).unwrap();
        let laws = predicted_laws(&pp).unwrap();
        assert!(close(laws.sup_decay.exponent(), -1.0 / 2.2, 1e-15));

        let pp = ProblemParams::new(3.0, 3.0, 1, 1e-3).unwrap();
        let laws = predicted_laws(&pp).unwrap();
        assert!(close(laws.sup_decay.exponent(), -0.25, 1e-15));
        assert_eq!(laws.support, SupportLaw::Power(0.25));
        assert_eq!(laws.l1, L1Law::PositiveLimit);

        let pp = ProblemParams::new(3.0, 2.0, 1, 1e-3).unwrap();
        let laws = predicted_laws(&pp).unwrap();
        assert_eq!(laws.support, SupportLaw::Log);
        assert!(matches!(laws.l1, L1Law::PowerLog { .. }));

        let pp = ProblemParams::new(3.0, 2.5, 1, 1e-3).unwrap();
        let laws = predicted_laws(&pp).unwrap();
        assert!(matches!(laws.sup_decay, RateLaw::CriticalMass { .. }));
        assert!(matches!(laws.l1, L1Law::InverseLogPower(_)));
    }
}
