//! Closed-form ingredients: the regularized coefficients `a_ε`, `b_ε`,
//! initial profiles, and the Barenblatt solution of `∂ₜw = Δₚw`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents;
use crate::grid::Grid;

/// `x ↦ x^e` with fast paths for the exponents that show up for the usual
/// `p = 3`, `q ∈ {1.5, 2, 2.5, 3}` runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Pow {
    Int(i32),
    Half,
    OneAndHalf,
    Quarter,
    ThreeQuarters,
    MinusHalf,
    General(f64),
}

impl Pow {
    pub(crate) fn new(e: f64) -> Self {
        if e == e.trunc() && e.abs() < 64.0 {
            Pow::Int(e as i32)
        } else if e == 0.5 {
            Pow::Half
        } else if e == 1.5 {
            Pow::OneAndHalf
        } else if e == 0.25 {
            Pow::Quarter
        } else if e == 0.75 {
            Pow::ThreeQuarters
        } else if e == -0.5 {
            Pow::MinusHalf
        } else {
            Pow::General(e)
        }
    }

    #[inline]
    pub(crate) fn apply(self, x: f64) -> f64 {
        match self {
            Pow::Int(k) => x.powi(k),
            Pow::Half => x.sqrt(),
            Pow::OneAndHalf => x * x.sqrt(),
            Pow::Quarter => x.sqrt().sqrt(),
            Pow::ThreeQuarters => {
                let s = x.sqrt();
                s * s.sqrt()
            }
            Pow::MinusHalf => 1.0 / x.sqrt(),
            Pow::General(e) => x.powf(e),
        }
    }
}

/// `a_ε(s) = (ε² + s)^{(p−2)/2}` and `b_ε(s) = (ε² + s)^{q/2} − ε^q`, where
/// `s` is the squared gradient magnitude.
#[derive(Debug, Clone, Copy)]
pub struct RegularizedCoefficients {
    pub p: f64,
    pub q: f64,
    pub eps: f64,
    eps2: f64,
    eps_q: f64,
    pow_a: Pow,
    pow_b: Pow,
    pow_d: Pow,
    pow_hj: Pow,
}

impl RegularizedCoefficients {
    /// `eps = 0` is allowed here (unregularized coefficients).
    pub fn new(p: f64, q: f64, eps: f64) -> Self {
        let eps2 = eps * eps;
        let pow_b = Pow::new(q / 2.0);
        Self {
            p,
            q,
            eps,
            eps2,
            // computed through the same power as b so that b(0) == 0 exactly
            eps_q: pow_b.apply(eps2),
            pow_a: Pow::new((p - 2.0) / 2.0),
            pow_b,
            pow_d: Pow::new((p - 4.0) / 2.0),
            pow_hj: Pow::new((q - 2.0) / 2.0),
        }
    }

    #[inline]
    pub fn a_eps(&self, s: f64) -> f64 {
        self.pow_a.apply(self.eps2 + s)
    }

    #[inline]
    pub fn b_eps(&self, s: f64) -> f64 {
        self.pow_b.apply(self.eps2 + s) - self.eps_q
    }

    /// Face flux `a_ε(g²) g`.
    #[inline]
    pub fn flux(&self, g: f64) -> f64 {
        self.a_eps(g * g) * g
    }

    /// `d/dg [a_ε(g²) g]` at `g = √s`: `(ε²+s)^{(p−4)/2} (ε² + (p−1)s)`.
    #[inline]
    pub fn effective_diffusivity(&self, s: f64) -> f64 {
        let base = self.eps2 + s;
        if base == 0.0 {
            return 0.0;
        }
        self.pow_d.apply(base) * (self.eps2 + (self.p - 1.0) * s)
    }

    /// `(ε² + g²)^{(q−2)/2} g`, which is `b_ε'(g²)·2g / q`; monotone in `g ≥ 0`.
    #[inline]
    pub fn absorption_slope(&self, g: f64) -> f64 {
        if g == 0.0 {
            return 0.0;
        }
        self.pow_hj.apply(self.eps2 + g * g) * g
    }
}

/// Barenblatt constant `γ_p = ((p−2)/p) η^{1/(p−1)}`.
pub fn gamma_p_constant(p: f64, n: u32) -> f64 {
    (p - 2.0) / p * exponents::eta(p, n).powf(1.0 / (p - 1.0))
}

/// `𝓑(t,x) = t^{−Nη} (1 − γ_p (|x|/t^η)^{p/(p−1)})₊^{(p−1)/(p−2)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarenblattSolution {
    pub p: f64,
    pub n: u32,
    pub gamma_p: f64,
    pub eta: f64,
}

impl BarenblattSolution {
    /// Builds the profile and checks it against the radial p-Laplacian at 20
    /// interior sample points.
    pub fn new(p: f64, n: u32) -> Result<Self> {
        exponents::compute_exponents(p, 2.0, n)?;
        let sol = Self {
            p,
            n,
            gamma_p: gamma_p_constant(p, n),
            eta: exponents::eta(p, n),
        };
        let worst = sol.validation_residual();
        if !(worst <= 1e-6) {
            return Err(Error::BarenblattMismatch(worst));
        }
        Ok(sol)
    }

    /// Largest relative PDE residual over the fixed validation sample.
    pub fn validation_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for &t in &[1.0, 1.7, 2.5, 4.0] {
            let edge = self.support_radius_unchecked(t);
            for &frac in &[0.15, 0.35, 0.55, 0.75, 0.9] {
                let r = frac * edge;
                let bt = self.time_derivative(t, r);
                let lap = self.p_laplacian(t, r);
                let scale = bt.abs().max(lap.abs()).max(t.powf(-f64::from(self.n) * self.eta - 1.0) * 1e-3);
                worst = worst.max((bt - lap).abs() / scale);
            }
        }
        worst
    }

    fn shape(&self, zeta: f64) -> (f64, f64, f64) {
        // F(ζ), F'(ζ), F''(ζ) of F = (1 − γ ζ^k)₊^e
        let p = self.p;
        let k = p / (p - 1.0);
        let e = (p - 1.0) / (p - 2.0);
        let g = self.gamma_p;
        let y = 1.0 - g * zeta.powf(k);
        if y <= 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let f = y.powf(e);
        let f1 = -e * g * k * y.powf(e - 1.0) * zeta.powf(k - 1.0);
        let f2 = -e
            * g
            * k
            * (-(e - 1.0) * g * k * y.powf(e - 2.0) * zeta.powf(2.0 * k - 2.0)
                + (k - 1.0) * y.powf(e - 1.0) * zeta.powf(k - 2.0));
        (f, f1, f2)
    }

    pub fn value(&self, t: f64, r: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("Barenblatt time must be positive, got {t}")));
        }
        Ok(self.value_unchecked(t, r))
    }

    pub(crate) fn value_unchecked(&self, t: f64, r: f64) -> f64 {
        let nf = f64::from(self.n);
        let k = self.p / (self.p - 1.0);
        let e = (self.p - 1.0) / (self.p - 2.0);
        let zeta = r.abs() / t.powf(self.eta);
        let y = 1.0 - self.gamma_p * zeta.powf(k);
        if y <= 0.0 {
            0.0
        } else {
            t.powf(-nf * self.eta) * y.powf(e)
        }
    }

    pub fn support_radius(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("Barenblatt time must be positive, got {t}")));
        }
        Ok(self.support_radius_unchecked(t))
    }

    pub(crate) fn support_radius_unchecked(&self, t: f64) -> f64 {
        self.gamma_p.powf(-(self.p - 1.0) / self.p) * t.powf(self.eta)
    }

    /// `∂ₜ𝓑(t, r)`.
    pub fn time_derivative(&self, t: f64, r: f64) -> f64 {
        let nf = f64::from(self.n);
        let zeta = r / t.powf(self.eta);
        let (f, f1, _) = self.shape(zeta);
        -self.eta * t.powf(-nf * self.eta - 1.0) * (nf * f + zeta * f1)
    }

    /// `∂ᵣ𝓑(t, r)`.
    pub fn radial_derivative(&self, t: f64, r: f64) -> f64 {
        let nf = f64::from(self.n);
        let zeta = r / t.powf(self.eta);
        let (_, f1, _) = self.shape(zeta);
        t.powf(-(nf + 1.0) * self.eta) * f1
    }

    /// `Δₚ𝓑 = |𝓑ᵣ|^{p−2} ((p−1) 𝓑ᵣᵣ + (N−1) 𝓑ᵣ / r)` for `r > 0`.
    pub fn p_laplacian(&self, t: f64, r: f64) -> f64 {
        let nf = f64::from(self.n);
        let zeta = r / t.powf(self.eta);
        let (_, f1, f2) = self.shape(zeta);
        let br = t.powf(-(nf + 1.0) * self.eta) * f1;
        let brr = t.powf(-(nf + 2.0) * self.eta) * f2;
        br.abs().powf(self.p - 2.0) * ((self.p - 1.0) * brr + (nf - 1.0) * br / r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitialProfile {
    /// `H (1 − (r/R₀)²)₊^m`
    Bump { r0: f64, height: f64, m: f64 },
    /// `H (1 − ((2r − R₀ − R₁)/(R₁ − R₀))²)₊²` on `R₀ < r < R₁`; vanishes for `r ≤ R₀`.
    DeadCoreAnnulus { r0: f64, r1: f64, height: f64 },
    /// `scale · 𝓑(t₀, r)`
    BarenblattAt { t0: f64, scale: f64 },
}

impl InitialProfile {
    pub fn bump(r0: f64, height: f64) -> Self {
        InitialProfile::Bump { r0, height, m: 2.0 }
    }

    fn check(&self) -> Result<()> {
        let ok = match *self {
            InitialProfile::Bump { r0, height, m } => r0 > 0.0 && height >= 0.0 && m >= 1.0,
            InitialProfile::DeadCoreAnnulus { r0, r1, height } => r0 > 0.0 && r1 > r0 && height >= 0.0,
            InitialProfile::BarenblattAt { t0, scale } => t0 > 0.0 && scale >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("invalid profile {self}")))
        }
    }

    /// Start time of a run initialised with this profile.
    pub fn start_time(&self) -> f64 {
        match *self {
            InitialProfile::BarenblattAt { t0, .. } => t0,
            _ => 0.0,
        }
    }

    /// Outer radius of the support.
    pub fn outer_radius(&self, p: f64, n: u32) -> Result<f64> {
        self.check()?;
        Ok(match *self {
            InitialProfile::Bump { r0, .. } => r0,
            InitialProfile::DeadCoreAnnulus { r1, .. } => r1,
            InitialProfile::BarenblattAt { t0, .. } => BarenblattSolution::new(p, n)?.support_radius_unchecked(t0),
        })
    }

    pub fn sup_norm(&self, p: f64, n: u32) -> Result<f64> {
        self.check()?;
        Ok(match *self {
            InitialProfile::Bump { height, .. } => height,
            InitialProfile::DeadCoreAnnulus { height, .. } => height,
            InitialProfile::BarenblattAt { t0, scale } => {
                scale * t0.powf(-f64::from(n) * exponents::eta(p, n))
            }
        })
    }

    /// Point value at distance `r` from the origin.
    pub fn evaluator(&self, p: f64, n: u32) -> Result<impl Fn(f64) -> f64> {
        self.check()?;
        let profile = *self;
        let barenblatt = match profile {
            InitialProfile::BarenblattAt { .. } => Some(BarenblattSolution::new(p, n)?),
            _ => None,
        };
        Ok(move |r: f64| {
            let r = r.abs();
            match profile {
                InitialProfile::Bump { r0, height, m } => {
                    let y = 1.0 - (r / r0) * (r / r0);
                    if y <= 0.0 {
                        0.0
                    } else {
                        height * y.powf(m)
                    }
                }
                InitialProfile::DeadCoreAnnulus { r0, r1, height } => {
                    if r <= r0 || r >= r1 {
                        0.0
                    } else {
                        let z = (2.0 * r - r0 - r1) / (r1 - r0);
                        let y = 1.0 - z * z;
                        height * y * y
                    }
                }
                InitialProfile::BarenblattAt { t0, scale } => {
                    scale * barenblatt.as_ref().expect("built above").value_unchecked(t0, r)
                }
            }
        })
    }

    fn resolution_check(&self, p: f64, n: u32, h: f64) -> Result<()> {
        let features: Vec<(&str, f64)> = match *self {
            InitialProfile::Bump { r0, .. } => vec![("bump radius R0", r0)],
            InitialProfile::DeadCoreAnnulus { r0, r1, .. } => {
                vec![("dead-core radius R0", r0), ("annulus width R1-R0", r1 - r0)]
            }
            InitialProfile::BarenblattAt { .. } => {
                vec![("Barenblatt support radius", self.outer_radius(p, n)?)]
            }
        };
        for (feature, len) in features {
            let cells = len / h;
            if cells < 8.0 {
                return Err(Error::UnderResolved {
                    feature: feature.to_string(),
                    cells,
                });
            }
        }
        Ok(())
    }
}

/// Samples the profile at the cell centres of `grid`.
pub fn sample_profile(profile: &InitialProfile, p: f64, n: u32, grid: &Grid) -> Result<Vec<f64>> {
    profile.resolution_check(p, n, grid.h)?;
    let f = profile.evaluator(p, n)?;
    Ok((0..grid.n).map(|i| f(grid.radius(i))).collect())
}

impl fmt::Display for InitialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            InitialProfile::Bump { r0, height, m } => write!(f, "bump:R0={r0},H={height},m={m}"),
            InitialProfile::DeadCoreAnnulus { r0, r1, height } => {
                write!(f, "annulus:R0={r0},R1={r1},H={height}")
            }
            InitialProfile::BarenblattAt { t0, scale } => write!(f, "barenblatt:t0={t0},M={scale}"),
        }
    }
}

impl FromStr for InitialProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut kv = std::collections::BTreeMap::new();
        for item in rest.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("profile field `{item}` is not key=value")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("profile field `{item}` is not numeric")))?;
            kv.insert(k.trim().to_string(), v);
        }
        let mut take = |key: &str, default: Option<f64>| -> Result<f64> {
            kv.remove(key)
                .or(default)
                .ok_or_else(|| Error::Config(format!("profile `{s}` is missing `{key}`")))
        };
        let profile = match kind.trim() {
            "bump" => InitialProfile::Bump {
                r0: take("R0", None)?,
                height: take("H", Some(1.0))?,
                m: take("m", Some(2.0))?,
            },
            "annulus" => InitialProfile::DeadCoreAnnulus {
                r0: take("R0", None)?,
                r1: take("R1", None)?,
                height: take("H", Some(1.0))?,
            },
            "barenblatt" => InitialProfile::BarenblattAt {
                t0: take("t0", Some(1.0))?,
                scale: take("M", Some(1.0))?,
            },
            other => return Err(Error::Config(format!("unknown profile kind `{other}`"))),
        };
        if let Some(k) = kv.keys().next() {
            return Err(Error::Config(format!("unknown profile field `{k}` in `{s}`")));
        }
        profile.check().map_err(|e| Error::Config(e.to_string()))?;
        Ok(profile)
    }
}
