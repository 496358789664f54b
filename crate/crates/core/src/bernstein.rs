//! Closed-form evaluators for the quantities of the Bernstein gradient
//! argument, with brute-force checkers for each inequality it relies on.
//!
//! Notation: `v = φ⁻¹(u)`, `w = |∇v|²`, `g = (|∇u|² + ε²)^{1/2}` and
//! `ψ = φ''/φ'`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{alpha_p, ProblemParams};

/// Slack allowed on a margin before a check is declared failed.
pub const MARGIN_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PhiChoice {
    /// `φ(r) = r`
    Identity,
    /// `φ(r) = (2Kr − r²)^{1/α}` on `(0, K]`
    Phi1 { k: f64, alpha: f64 },
    /// `φ(r) = β r^{1/β}` on `(0, ∞)`
    Phi2 { beta: f64 },
}

/// `φ, φ', φ'', φ'''` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiDerivs {
    pub phi: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl PhiChoice {
    fn check_domain(&self, v: f64) -> Result<()> {
        let ok = match *self {
            PhiChoice::Identity => v.is_finite(),
            PhiChoice::Phi1 { k, .. } => v > 0.0 && v <= k,
            PhiChoice::Phi2 { .. } => v > 0.0 && v.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("v = {v} outside the domain of {self:?}")))
        }
    }

    pub fn derivatives(&self, v: f64) -> Result<PhiDerivs> {
        self.check_domain(v)?;
        Ok(match *self {
            PhiChoice::Identity => PhiDerivs {
                phi: v,
                d1: 1.0,
                d2: 0.0,
                d3: 0.0,
            },
            PhiChoice::Phi1 { k, alpha } => {
                let m = 1.0 / alpha;
                let s = 2.0 * k * v - v * v;
                let s1 = 2.0 * (k - v);
                let s2 = -2.0;
                let pm = |e: f64| s.powf(m - e);
                PhiDerivs {
                    phi: pm(0.0),
                    d1: m * pm(1.0) * s1,
                    d2: m * (m - 1.0) * pm(2.0) * s1 * s1 + m * pm(1.0) * s2,
                    d3: m * (m - 1.0) * (m - 2.0) * pm(3.0) * s1 * s1 * s1
                        + 3.0 * m * (m - 1.0) * pm(2.0) * s1 * s2,
                }
            }
            PhiChoice::Phi2 { beta } => {
                let m = 1.0 / beta;
                PhiDerivs {
                    phi: beta * v.powf(m),
                    d1: v.powf(m - 1.0),
                    d2: (m - 1.0) * v.powf(m - 2.0),
                    d3: (m - 1.0) * (m - 2.0) * v.powf(m - 3.0),
                }
            }
        })
    }

    /// `(ψ, ψ')` with `ψ = φ''/φ'`, from simplified closed forms.
    pub fn log_derivative(&self, v: f64) -> Result<(f64, f64)> {
        self.check_domain(v)?;
        Ok(match *self {
            PhiChoice::Identity => (0.0, 0.0),
            PhiChoice::Phi1 { k, alpha } => {
                if v == k {
                    return Err(Error::Domain("φ₁' vanishes at v = K".into()));
                }
                let c = 1.0 / alpha - 1.0;
                let s = 2.0 * k * v - v * v;
                let s1 = 2.0 * (k - v);
                let s2 = -2.0;
                let psi = c * s1 / s + s2 / s1;
                let dpsi = c * (s2 * s - s1 * s1) / (s * s) - s2 * s2 / (s1 * s1);
                (psi, dpsi)
            }
            PhiChoice::Phi2 { beta } => {
                let c = 1.0 / beta - 1.0;
                (c / v, -c / (v * v))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernsteinInputs {
    pub g: f64,
    pub w: f64,
    pub v: f64,
    pub params: ProblemParams,
}

impl BernsteinInputs {
    /// Inputs consistent with a field: `w = (g² − ε²)/φ'(v)²`.
    pub fn consistent(g: f64, v: f64, params: ProblemParams, phi: &PhiChoice) -> Result<Self> {
        let d = phi.derivatives(v)?;
        let e = params.eps;
        Ok(Self {
            g,
            w: (g * g - e * e) / (d.d1 * d.d1),
            v,
            params,
        })
    }

    fn check(&self) -> Result<()> {
        if !(self.g >= self.params.eps && self.w >= 0.0) {
            return Err(Error::Domain(format!(
                "need g >= eps and w >= 0, got g = {}, w = {}",
                self.g, self.w
            )));
        }
        Ok(())
    }
}

/// `ℛ₂ = (φ''/φ'²)(v) [(q−1)g^q + ε^q − qε²g^{q−2}]`.
pub fn r2_value(inputs: &BernsteinInputs, phi: &PhiChoice) -> Result<f64> {
    inputs.check()?;
    let d = phi.derivatives(inputs.v)?;
    let pp = &inputs.params;
    Ok(d.d2 / (d.d1 * d.d1) * r2_bracket(pp.q, pp.eps, inputs.g))
}

/// `(q−1)g^q + ε^q − qε²g^{q−2}`
pub fn r2_bracket(q: f64, eps: f64, g: f64) -> f64 {
    (q - 1.0) * g.powf(q) + eps.powf(q) - q * eps * eps * g.powf(q - 2.0)
}

/// `ℛ₂` in the general form `(φ''/φ'²)(2b'φ'²w − b)` with `b = b_ε` at
/// `s = φ'²w`.
pub fn r2_lemma_value(inputs: &BernsteinInputs, phi: &PhiChoice) -> Result<f64> {
    inputs.check()?;
    let d = phi.derivatives(inputs.v)?;
    let pp = &inputs.params;
    let (q, e) = (pp.q, pp.eps);
    let s = d.d1 * d.d1 * inputs.w;
    let b = (e * e + s).powf(q / 2.0) - e.powf(q);
    let b1 = 0.5 * q * (e * e + s).powf(q / 2.0 - 1.0);
    Ok(d.d2 / (d.d1 * d.d1) * (2.0 * b1 * s - b))
}

/// `ℛ₁ = −(p−1)g^{p−2}[ψ' + (α_p/(1−α_p))ψ²] + ε²ℛ₁₁`.
pub fn r1_value(inputs: &BernsteinInputs, phi: &PhiChoice) -> Result<f64> {
    inputs.check()?;
    let (psi, dpsi) = phi.log_derivative(inputs.v)?;
    let pp = &inputs.params;
    let (p, e, g) = (pp.p, pp.eps, inputs.g);
    let nf = f64::from(pp.n);
    let alpha = alpha_p(p, pp.n);
    let lead = -(p - 1.0) * g.powf(p - 2.0) * (dpsi + alpha / (1.0 - alpha) * psi * psi);
    let r11 = (p - 2.0) * dpsi * g.powf(p - 4.0)
        + (p - 2.0) * (p * (nf + 3.0) - 2.0 * (nf + 1.0)) / 4.0 * psi * psi * g.powf(p - 4.0)
        + (p - 2.0) * (p * (nf + 3.0) - 2.0 * (nf + 7.0)) / 4.0 * psi * psi * (g * g - e * e) * g.powf(p - 6.0);
    Ok(lead + e * e * r11)
}

/// `a_ε` and its first two derivatives at `s = g² − ε²`.
fn a_and_derivs(p: f64, g: f64) -> (f64, f64, f64) {
    let a = g.powf(p - 2.0);
    let a1 = 0.5 * (p - 2.0) * g.powf(p - 4.0);
    let a2 = 0.25 * (p - 2.0) * (p - 4.0) * g.powf(p - 6.0);
    (a, a1, a2)
}

fn r1_general(inputs: &BernsteinInputs, phi: &PhiChoice, dimension_term: bool) -> Result<f64> {
    inputs.check()?;
    let d = phi.derivatives(inputs.v)?;
    let (_, dpsi) = phi.log_derivative(inputs.v)?;
    let pp = &inputs.params;
    let (a, a1, a2) = a_and_derivs(pp.p, inputs.g);
    let w = inputs.w;
    let coef = if dimension_term {
        (f64::from(pp.n) - 1.0) * a1 * a1 / a + 4.0 * a2
    } else {
        4.0 * a2
    };
    let pp2 = d.d1 * d.d2;
    Ok(-a * dpsi - coef * pp2 * pp2 * w * w - 2.0 * a1 * w * (2.0 * d.d2 * d.d2 + d.d1 * d.d3))
}

/// `ℛ₁` in the general form `−aψ' − ((N−1)a'²/a + 4a'')(φ'φ'')²w² − 2a'w(2φ''² + φ'φ''')`.
pub fn r1_lemma_value(inputs: &BernsteinInputs, phi: &PhiChoice) -> Result<f64> {
    r1_general(inputs, phi, true)
}

/// Radial replacement `−aψ' − 4a''(φ'φ'')²w² − 2a'w(2φ''² + φ'φ''')`.
pub fn r1_radial_value(inputs: &BernsteinInputs, phi: &PhiChoice) -> Result<f64> {
    r1_general(inputs, phi, false)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofCheckReport {
    pub name: String,
    pub grid: String,
    pub worst_margin: f64,
    pub pass: bool,
    /// Named coordinates of the worst point.
    pub worst_point: Vec<(String, f64)>,
}

impl ProofCheckReport {
    fn new(name: &str, grid: String) -> Self {
        Self {
            name: name.into(),
            grid,
            worst_margin: f64::INFINITY,
            pass: true,
            worst_point: Vec::new(),
        }
    }

    fn record(&mut self, margin: f64, point: &[(&str, f64)]) {
        if margin < self.worst_margin || self.worst_point.is_empty() {
            self.worst_margin = margin;
            self.worst_point = point.iter().map(|&(k, v)| (k.to_string(), v)).collect();
        }
        if !(margin >= -MARGIN_SLACK) {
            self.pass = false;
        }
    }
}

/// `n` points spaced evenly in `ln` between `lo` and `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Constant of the Young-inequality step: `2(q−2)^{(q−2)/2}` for `q > 2`,
/// `q − 1` for `q ≤ 2`.
pub fn c14(q: f64) -> f64 {
    if q > 2.0 {
        2.0 * (q - 2.0).powf((q - 2.0) / 2.0)
    } else {
        q - 1.0
    }
}

/// Margin of `(q−1)g^q + ε^q − qε²g^{q−2} ≥ (q−1−ε)g^q − C₁₄(ε^{(q+2)/2} + ε^q)`.
pub fn b22_margin(q: f64, eps: f64, g: f64) -> f64 {
    let lhs = r2_bracket(q, eps, g);
    let rhs = (q - 1.0 - eps) * g.powf(q) - c14(q) * (eps.powf((q + 2.0) / 2.0) + eps.powf(q));
    lhs - rhs
}

/// Checks the lower bound on the ℛ₂ bracket at every `(ε, g)` point.
pub fn check_b22(q: f64, points: &[(f64, f64)]) -> Result<ProofCheckReport> {
    if !(q > 1.0) {
        return Err(Error::InvalidParams(format!("q must exceed 1, got {q}")));
    }
    let eps_max = (q - 1.0).min(0.5);
    let mut report = ProofCheckReport::new("b22", format!("q = {q}, {} (eps, g) points", points.len()));
    for &(eps, g) in points {
        if !(eps > 0.0 && eps < eps_max) {
            return Err(Error::Domain(format!("eps = {eps} outside (0, {eps_max})")));
        }
        if !(g >= eps) {
            return Err(Error::Domain(format!("g = {g} below eps = {eps}")));
        }
        // relative slack: both sides are O(g^q)
        let scale = g.powf(q).max(1.0);
        report.record(b22_margin(q, eps, g) / scale, &[("q", q), ("eps", eps), ("g", g)]);
    }
    Ok(report)
}

/// The documented scan: 100 values of ε log-spaced in `[1e−6, min(0.49, 0.99(q−1))]`,
/// and for each 100 values of `g` log-spaced in `[ε, 10³]`.
pub fn b22_grid(q: f64) -> Vec<(f64, f64)> {
    let eps_hi = 0.49f64.min(0.99 * (q - 1.0));
    let mut pts = Vec::with_capacity(10_000);
    for eps in log_grid(1e-6, eps_hi, 100) {
        for g in log_grid(eps, 1e3, 100) {
            pts.push((eps, g));
        }
    }
    pts
}

/// Scans the sign of the ℛ₂ bracket itself for `g ≥ ε`.
pub fn check_r2_bracket(q: f64, points: &[(f64, f64)]) -> ProofCheckReport {
    let mut report = ProofCheckReport::new("r2_bracket", format!("q = {q}, {} (eps, g) points", points.len()));
    for &(eps, g) in points {
        let scale = g.powf(q).max(eps.powf(q));
        report.record(r2_bracket(q, eps, g) / scale, &[("q", q), ("eps", eps), ("g", g)]);
    }
    report
}

/// `K = √(1+μ) M^α`.
pub fn phi1_k(mu: f64, m: f64, alpha: f64) -> f64 {
    (1.0 + mu).sqrt() * m.powf(alpha)
}

/// Admissible range of `v`: `[ε^{γα}/(2K), K − √(K² − M^α)]`.
pub fn phi1_v_range(mu: f64, m: f64, eps: f64, gamma: f64, alpha: f64) -> Result<(f64, f64)> {
    let k = phi1_k(mu, m, alpha);
    let ma = m.powf(alpha);
    if k * k < ma {
        return Err(Error::Domain(format!("K² = {} below M^α = {ma}", k * k)));
    }
    let lo = eps.powf(gamma * alpha) / (2.0 * k);
    let hi = ma / (k + (k * k - ma).sqrt());
    Ok((lo, hi))
}

/// Checks, at each sample, the sign conditions `ψ' ≤ 0`, `ψ ≥ 0` and the
/// bound `ψ' + (α/(1−α))ψ² ≤ −((1+α)/(2α))/(Kv)` for `φ₁`. Margins are
/// made dimensionless by powers of `v`.
pub fn check_phi1_properties(
    mu: f64,
    m: f64,
    eps: f64,
    gamma: f64,
    alpha: f64,
    v_samples: &[f64],
) -> Result<ProofCheckReport> {
    let k = phi1_k(mu, m, alpha);
    let (lo, hi) = phi1_v_range(mu, m, eps, gamma, alpha)?;
    let phi = PhiChoice::Phi1 { k, alpha };
    let mut report = ProofCheckReport::new(
        "phi1_properties",
        format!("mu = {mu}, M = {m}, eps = {eps}, gamma = {gamma}, alpha = {alpha}, {} samples", v_samples.len()),
    );
    for &v in v_samples {
        if v < lo * (1.0 - 1e-12) || v > hi * (1.0 + 1e-12) {
            return Err(Error::Domain(format!("sample v = {v} outside [{lo}, {hi}]")));
        }
        let (psi, dpsi) = phi.log_derivative(v)?;
        let decreasing = -dpsi * v * v;
        let positive = psi * v;
        let curvature = -(dpsi + alpha / (1.0 - alpha) * psi * psi + (1.0 + alpha) / (2.0 * alpha * k * v)) * v * v;
        report.record(
            decreasing.min(positive).min(curvature),
            &[("mu", mu), ("v", v), ("decreasing", decreasing), ("positive", positive), ("curvature", curvature)],
        );
    }
    Ok(report)
}

/// Smallest `μ ∈ {1, 2, 4, …, 2²⁰}` for which [`check_phi1_properties`]
/// passes on `n_samples` log-spaced points of the admissible range.
pub fn search_mu(m: f64, eps: f64, gamma: f64, alpha: f64, n_samples: usize) -> Result<(f64, ProofCheckReport)> {
    let mut last = None;
    for j in 0..=20 {
        let mu = f64::from(1u32 << j);
        let Ok((lo, hi)) = phi1_v_range(mu, m, eps, gamma, alpha) else {
            continue;
        };
        if !(lo < hi) {
            continue;
        }
        let report = check_phi1_properties(mu, m, eps, gamma, alpha, &log_grid(lo, hi, n_samples))?;
        if report.pass {
            return Ok((mu, report));
        }
        last = Some(report.worst_margin);
    }
    Err(Error::NoAdmissibleMu(format!(
        "M = {m}, eps = {eps}, gamma = {gamma}, alpha = {alpha}; last worst margin {last:?}"
    )))
}

/// `ε^{(2β−γ)/β} + ε^{(q+2−2γ)/2} + ε^{q−γ}`.
pub fn omega_eps(params: &ProblemParams) -> f64 {
    let e = params.eps;
    if e == 0.0 {
        return 0.0;
    }
    let beta = params.exponents().beta_pq;
    let (q, gm) = (params.q, params.gamma);
    e.powf((2.0 * beta - gm) / beta) + e.powf((q + 2.0 - 2.0 * gm) / 2.0) + e.powf(q - gm)
}

/// For `S(t) = θt^{−σ}` with `σ(m−1) = 1`, `S' + cS^m − dS ≥ 0` on `(0, T]`
/// reduces to `cθ^{m−1} ≥ σ + dT`; the margin is the difference.
pub fn verify_power_supersolution(c: f64, d: f64, m: f64, sigma: f64, theta: f64, t_max: f64) -> Result<ProofCheckReport> {
    if !(c > 0.0 && d >= 0.0 && m > 1.0 && sigma > 0.0 && theta > 0.0 && t_max > 0.0) {
        return Err(Error::InvalidParams(format!(
            "need c > 0, d >= 0, m > 1, sigma > 0, theta > 0, T > 0; got c = {c}, d = {d}, m = {m}, sigma = {sigma}, theta = {theta}, T = {t_max}"
        )));
    }
    if (sigma * (m - 1.0) - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParams(format!(
            "candidate is not scale-consistent: sigma (m - 1) = {}",
            sigma * (m - 1.0)
        )));
    }
    let margin = c * theta.powf(m - 1.0) - sigma - d * t_max;
    let mut report = ProofCheckReport::new(
        "power_supersolution",
        format!("c = {c}, d = {d}, m = {m}, sigma = {sigma}, theta = {theta}, T = {t_max}"),
    );
    report.record(margin, &[("T", t_max)]);
    Ok(report)
}

/// Parameters `(c, d, m, σ, θ)` of the first supersolution with unit
/// amplitude `M` and given constants `C₉`, `C₁₀`.
pub fn s1_parameters(p: f64, eps: f64, gamma: f64, c9: f64, c10: f64) -> (f64, f64, f64, f64, f64) {
    let c = 2.0 * c10;
    let d = 2.0 * c9 * eps.powf(2.0 * (1.0 - gamma));
    let theta = ((1.0 + 2.0 * c9 * eps.powf(0.25)) / (p * c10)).powf(2.0 / p);
    (c, d, (p + 2.0) / 2.0, 2.0 / p, theta)
}

/// Parameters `(c, d, m, σ, θ)` of the second supersolution with unit
/// amplitude `M` and given constant `C₁₆`.
pub fn s2_parameters(params: &ProblemParams, c16: f64) -> (f64, f64, f64, f64, f64) {
    let q = params.q;
    let e = params.eps;
    let beta = params.exponents().beta_pq;
    let om = omega_eps(params);
    let c = 2.0 * (1.0 - beta) / beta.powf(q * (1.0 - beta)) * (q - 1.0 - e);
    let d = c16 * om;
    let theta = beta.powf(2.0 * (1.0 - beta))
        / (2f64.powf(2.0 / q) * (1.0 - beta).powf(2.0 / q) * (q - 1.0 - e).powf(2.0 / q))
        * ((2.0 + q * c16 * om.sqrt()) / q).powf(2.0 / q);
    (c, d, (q + 2.0) / 2.0, 2.0 / q, theta)
}

/// Largest relative mismatch between closed-form `φ', φ'', φ'''` and
/// five-point centred differences of the next lower derivative.
pub fn phi_fd_mismatch(phi: &PhiChoice, v: f64) -> Result<f64> {
    let d = phi.derivatives(v)?;
    let span = match *phi {
        PhiChoice::Phi1 { k, .. } => v.min(k - v),
        PhiChoice::Phi2 { .. } => v,
        PhiChoice::Identity => v.abs().max(1.0),
    };
    let h = 1e-3 * span;
    let at = |x: f64| phi.derivatives(x);
    let (m2, m1, p1, p2) = (at(v - 2.0 * h)?, at(v - h)?, at(v + h)?, at(v + 2.0 * h)?);
    let fd = |f: fn(&PhiDerivs) -> f64| (f(&m2) - 8.0 * f(&m1) + 8.0 * f(&p1) - f(&p2)) / (12.0 * h);
    let rel = |exact: f64, approx: f64| {
        let scale = exact.abs().max(1e-300);
        if exact == 0.0 && approx.abs() < 1e-12 {
            0.0
        } else {
            (exact - approx).abs() / scale
        }
    };
    let e1 = rel(d.d1, fd(|x| x.phi));
    let e2 = rel(d.d2, fd(|x| x.d1));
    let e3 = rel(d.d3, fd(|x| x.d2));
    Ok(e1.max(e2).max(e3))
}

/// Finite-difference agreement for `φ₁` and `φ₂` at interior points,
/// staying `10⁻³K` away from the ends of `φ₁`'s domain.
pub fn check_phi_derivatives(choices: &[PhiChoice], n_samples: usize, tol: f64) -> Result<ProofCheckReport> {
    let mut report = ProofCheckReport::new("phi_derivatives", format!("{} choices x {n_samples} points, tol {tol}", choices.len()));
    for (ci, phi) in choices.iter().enumerate() {
        let (lo, hi) = match *phi {
            PhiChoice::Phi1 { k, .. } => (1e-3 * k, k * (1.0 - 1e-3)),
            _ => (1e-2, 10.0),
        };
        for v in log_grid(lo, hi, n_samples) {
            let err = phi_fd_mismatch(phi, v)?;
            report.record(tol - err, &[("choice", ci as f64), ("v", v), ("mismatch", err)]);
        }
    }
    Ok(report)
}

/// For `φ₂` with `β = β_{p,q}` the ε-free part of ℛ₁ equals
/// `(p−1)g^{p−2}c(1 − cα/(1−α))/v²` with `c = 1/β − 1`, non-negative since
/// `β ≥ α`. Evaluated through [`r1_value`] at `ε = 0`.
pub fn check_phi2_leading_r1(p: f64, q: f64, n: u32, samples: &[(f64, f64)]) -> Result<ProofCheckReport> {
    let base = ProblemParams::new(p, q, n, 0.25)?;
    let params = ProblemParams { eps: 0.0, ..base };
    let beta = params.exponents().beta_pq;
    let phi = PhiChoice::Phi2 { beta };
    let mut report = ProofCheckReport::new("phi2_leading_r1", format!("p = {p}, q = {q}, N = {n}, {} samples", samples.len()));
    for &(g, v) in samples {
        let inputs = BernsteinInputs { g, w: 0.0, v, params };
        let r = r1_value(&inputs, &phi)?;
        let scale = g.powf(p - 2.0) / (v * v);
        report.record(r / scale, &[("g", g), ("v", v)]);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p: f64, q: f64, n: u32, eps: f64) -> ProblemParams {
        ProblemParams::new(p, q, n, eps).unwrap()
    }

    #[test]
    fn r2_examples() {
        let pp = ProblemParams { eps: 0.0, ..params(3.0, 2.0, 1, 0.1) };
        let inp = BernsteinInputs { g: 2.0, w: 1.0, v: 1.0, params: pp };
        assert_eq!(r2_value(&inp, &PhiChoice::Identity).unwrap(), 0.0);
        let r = r2_value(&inp, &PhiChoice::Phi2 { beta: 0.5 }).unwrap();
        assert!((r - 4.0).abs() < 1e-14);
        let pp = params(3.0, 2.7, 1, 0.1);
        let inp = BernsteinInputs { g: 0.1, w: 1.0, v: 0.7, params: pp };
        assert!(r2_value(&inp, &PhiChoice::Phi2 { beta: 0.6 }).unwrap().abs() < 1e-15);
    }

    #[test]
    fn identity_r1_vanishes() {
        let inp = BernsteinInputs { g: 1.3, w: 0.4, v: 0.5, params: params(3.5, 2.0, 2, 0.1) };
        assert_eq!(r1_value(&inp, &PhiChoice::Identity).unwrap(), 0.0);
        assert_eq!(r1_radial_value(&inp, &PhiChoice::Identity).unwrap(), 0.0);
    }

    #[test]
    fn lemma_and_closed_forms_agree_on_consistent_inputs() {
        for &(p, q, n) in &[(3.0, 2.0, 1), (4.5, 3.0, 3), (2.5, 1.5, 2)] {
            let pp = params(p, q, n, 0.2);
            let alpha = alpha_p(p, n);
            for phi in [PhiChoice::Phi1 { k: 2.0, alpha }, PhiChoice::Phi2 { beta: pp.exponents().beta_pq }] {
                for &(g, v) in &[(0.3, 0.4), (1.7, 1.1), (0.25, 0.05)] {
                    let inp = BernsteinInputs::consistent(g, v, pp, &phi).unwrap();
                    let a = r1_value(&inp, &phi).unwrap();
                    let b = r1_lemma_value(&inp, &phi).unwrap();
                    assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{phi:?} {a} {b}");
                    let a = r2_value(&inp, &phi).unwrap();
                    let b = r2_lemma_value(&inp, &phi).unwrap();
                    assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn radial_form_matches_in_one_dimension() {
        let pp = params(3.0, 2.0, 1, 0.1);
        let phi = PhiChoice::Phi1 { k: 1.5, alpha: 0.5 };
        let inp = BernsteinInputs::consistent(0.8, 0.3, pp, &phi).unwrap();
        let a = r1_value(&inp, &phi).unwrap();
        let b = r1_radial_value(&inp, &phi).unwrap();
        assert!((a - b).abs() <= 1e-10 * a.abs());
    }

    #[test]
    fn b22_at_q_two_is_eps_g2_plus_eps2() {
        for &(e, g) in &[(0.1, 0.1), (0.01, 3.0), (0.3, 7.0)] {
            let m = b22_margin(2.0, e, g);
            assert!((m - (e * g * g + e * e)).abs() < 1e-12 * (1.0 + g * g));
        }
        assert!(b22_margin(3.0, 0.2, 0.2) >= 0.0);
        assert!(check_b22(2.0, &[(0.1, 0.05)]).is_err());
    }

    #[test]
    fn supersolution_examples() {
        let r = verify_power_supersolution(1.0, 0.1, 2.0, 1.0, 2.5, 10.0).unwrap();
        assert!((r.worst_margin - 0.5).abs() < 1e-12);
        let (c, m, sigma) = (2.0_f64, 2.5_f64, 2.0 / 3.0);
        let theta = (sigma / c).powf(1.0 / (m - 1.0));
        let r = verify_power_supersolution(c, 0.0, m, sigma, theta, 1.0).unwrap();
        assert!(r.worst_margin.abs() < 1e-12);
        assert!(verify_power_supersolution(1.0, 0.0, 2.0, 0.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn omega_limits() {
        let pp = params(3.0, 2.0, 1, 1e-8);
        assert!(omega_eps(&pp) < 1e-2);
        assert_eq!(omega_eps(&ProblemParams { eps: 0.0, ..pp }), 0.0);
    }

    #[test]
    fn phi1_sign_at_half_k() {
        let phi = PhiChoice::Phi1 { k: 1.0, alpha: 0.5 };
        let (_, dpsi) = phi.log_derivative(0.5).unwrap();
        assert!(dpsi <= 0.0);
        assert!(phi.derivatives(1.5).is_err());
        assert!(phi.derivatives(0.0).is_err());
    }
}
