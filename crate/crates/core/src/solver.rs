//! Explicit conservative finite-volume evolution of
//! `∂ₜu − div(a_ε(|∇u|²)∇u) + b_ε(|∇u|²) = 0` on line and radial grids.
//!
//! Diffusion uses face gradients `(u_{i+1} − u_i)/h` and the flux
//! `a_ε(g²)g`; absorption uses the Godunov upwind gradient
//! `ĝ² = max(D⁻u, 0)² + min(D⁺u, 0)²`, which vanishes at every discrete
//! local minimum. Under [`stable_dt`] the update is a monotone function of
//! the three-point stencil, so the floor `ε^γ`, the maximum principle and
//! order preservation all hold without clamping.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::ProblemParams;
use crate::grid::{Geometry, Grid};
use crate::model::{gamma_p_constant, sample_profile, InitialProfile, RegularizedCoefficients};
use crate::observe::{observe, support_radius, Observables, TimeSeries};

/// Slack allowed below the floor before a step is declared a CFL breach.
pub const FLOOR_SLACK: f64 = 1e-14;

/// Domain margin used for the default half-width.
pub const DOMAIN_MARGIN: f64 = 1.25;

/// Recording cadence: four samples per octave.
pub const RECORDS_PER_OCTAVE: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub time: f64,
    pub values: Vec<f64>,
    pub params: ProblemParams,
    pub grid: Grid,
    pub floor: f64,
    pub absorbed_mass: f64,
    pub boundary_out: f64,
    pub absorption: bool,
    /// Initial sup of `u − floor`; support detection is relative to it.
    pub reference_sup: f64,
    /// Inclusive index range of cells whose value differs from the floor.
    /// `lo > hi` when the field is identically at the floor.
    active: (usize, usize),
}

impl State {
    /// Lifts `profile_values` by the floor, pins the boundary cells and
    /// records the reference height.
    pub fn new(
        params: ProblemParams,
        grid: Grid,
        profile_values: &[f64],
        time: f64,
        absorption: bool,
    ) -> Result<Self> {
        params.validate()?;
        check_geometry(&params, &grid)?;
        if profile_values.len() != grid.n {
            return Err(Error::InvalidParams(format!(
                "profile has {} samples for a grid of {} cells",
                profile_values.len(),
                grid.n
            )));
        }
        if let Some(v) = profile_values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidParams(format!(
                "initial data must be finite and non-negative, found {v}"
            )));
        }
        let floor = params.floor();
        let mut values: Vec<f64> = profile_values.iter().map(|v| v + floor).collect();
        values[grid.n - 1] = floor;
        if grid.geometry == Geometry::Line {
            values[0] = floor;
        }
        let reference_sup = values.iter().fold(0.0f64, |m, v| m.max(v - floor));
        let mut state = Self {
            time,
            values,
            params,
            grid,
            floor,
            absorbed_mass: 0.0,
            boundary_out: 0.0,
            absorption,
            reference_sup,
            active: (1, 0),
        };
        state.refresh_active();
        Ok(state)
    }

    fn refresh_active(&mut self) {
        let f = self.floor;
        let lo = self.values.iter().position(|&v| v != f);
        let hi = self.values.iter().rposition(|&v| v != f);
        self.active = match (lo, hi) {
            (Some(lo), Some(hi)) => (lo, hi),
            _ => (1, 0),
        };
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `∫ (u − floor)`.
    pub fn excess_mass(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| (v - self.floor) * self.grid.cell_measure(i))
            .sum()
    }

    fn first_updatable(&self) -> usize {
        match self.grid.geometry {
            Geometry::Line => 1,
            Geometry::Radial(_) => 0,
        }
    }

    fn last_updatable(&self) -> usize {
        self.grid.n - 2
    }

    /// Cells that can change in the next step.
    fn update_range(&self) -> Option<(usize, usize)> {
        let (lo, hi) = self.active;
        if lo > hi {
            return None;
        }
        let a = lo.saturating_sub(1).max(self.first_updatable());
        let b = (hi + 1).min(self.last_updatable());
        (a <= b).then_some((a, b))
    }
}

fn check_geometry(params: &ProblemParams, grid: &Grid) -> Result<()> {
    match grid.geometry {
        Geometry::Line if params.n != 1 => Err(Error::InvalidParams(format!(
            "line geometry requires N = 1, got N = {}",
            params.n
        ))),
        Geometry::Radial(n) if n != params.n => Err(Error::InvalidParams(format!(
            "radial grid dimension {n} does not match N = {}",
            params.n
        ))),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub dt: f64,
    pub max_face_gradient: f64,
    pub max_effective_diffusivity: f64,
    pub boundary_flux: f64,
}

/// Precomputed geometry weights and scratch space for stepping one grid.
#[derive(Debug, Clone)]
pub struct Stepper {
    coeffs: RegularizedCoefficients,
    h: f64,
    /// `A_{i+1/2} / V_i`
    w_plus: Vec<f64>,
    /// `A_{i−1/2} / V_i` (zero at the radial origin)
    w_minus: Vec<f64>,
    measure: Vec<f64>,
    face: Vec<f64>,
    /// `flux[j + 1]` holds the flux through the face between cells `j` and `j + 1`.
    flux: Vec<f64>,
}

impl Stepper {
    pub fn new(params: &ProblemParams, grid: &Grid) -> Self {
        let n = grid.n;
        let measure: Vec<f64> = (0..n).map(|i| grid.cell_measure(i)).collect();
        let face: Vec<f64> = (0..n).map(|i| grid.face_measure(i)).collect();
        let w_plus = (0..n).map(|i| face[i] / measure[i]).collect();
        let w_minus = (0..n)
            .map(|i| if i == 0 { 0.0 } else { face[i - 1] / measure[i] })
            .collect();
        Self {
            coeffs: RegularizedCoefficients::new(params.p, params.q, params.eps),
            h: grid.h,
            w_plus,
            w_minus,
            measure,
            face,
            flux: vec![0.0; n + 1],
        }
    }

    pub fn coefficients(&self) -> &RegularizedCoefficients {
        &self.coeffs
    }

    /// Largest face gradient and largest upwind cell gradient over the cells
    /// that can change.
    fn gradient_extremes(&self, state: &State) -> (f64, f64) {
        let Some((a, b)) = state.update_range() else {
            return (0.0, 0.0);
        };
        let u = &state.values;
        let inv_h = 1.0 / self.h;
        let mut gmax: f64 = 0.0;
        let mut ghat2: f64 = 0.0;
        for i in a..=b {
            let left = if i == 0 { u[0] } else { u[i - 1] };
            let dm = (u[i] - left) * inv_h;
            let dp = (u[i + 1] - u[i]) * inv_h;
            gmax = gmax.max(dm.abs()).max(dp.abs());
            let up = dm.max(0.0);
            let dn = dp.min(0.0);
            ghat2 = ghat2.max(up * up + dn * dn);
        }
        (gmax, ghat2.sqrt())
    }

    /// Monotonicity-preserving time step; see [`stable_dt`].
    pub fn stable_dt(&self, state: &State, safety: f64) -> f64 {
        let (gmax, ghat) = self.gradient_extremes(state);
        let h = self.h;
        let d_max = self.coeffs.effective_diffusivity(gmax * gmax);
        let mut rate = 2.0 * state.grid.geometry.n_eff() * d_max / (h * h);
        let mut dt_floor = f64::INFINITY;
        if state.absorption && ghat > 0.0 {
            rate += std::f64::consts::SQRT_2 * self.coeffs.q * self.coeffs.absorption_slope(ghat) / h;
            let b_max = self.coeffs.b_eps(ghat * ghat);
            if b_max > 0.0 {
                dt_floor = safety * state.floor / b_max;
            }
        }
        (safety / rate).min(dt_floor)
    }

    /// Advances `state` by `dt`.
    pub fn step(&mut self, state: &mut State, dt: f64) -> Result<StepStats> {
        let mut stats = StepStats {
            dt,
            max_face_gradient: 0.0,
            max_effective_diffusivity: self.coeffs.effective_diffusivity(0.0),
            boundary_flux: 0.0,
        };
        let Some((a, b)) = state.update_range() else {
            state.time += dt;
            return Ok(stats);
        };
        let inv_h = 1.0 / self.h;
        let u = &mut state.values;

        // faces a-1 ..= b ; face -1 (radial origin) carries no flux
        let first_face = if a == 0 { 0 } else { a - 1 };
        self.flux[first_face] = 0.0;
        let mut gmax: f64 = 0.0;
        for j in first_face..=b {
            let g = (u[j + 1] - u[j]) * inv_h;
            gmax = gmax.max(g.abs());
            self.flux[j + 1] = self.coeffs.flux(g);
        }
        if a == 0 {
            self.flux[0] = 0.0;
        }
        stats.max_face_gradient = gmax;
        stats.max_effective_diffusivity = self.coeffs.effective_diffusivity(gmax * gmax);

        let floor = state.floor;
        let mut absorbed = 0.0;
        let mut left_old = if a == 0 { u[0] } else { u[a - 1] };
        for i in a..=b {
            let old = u[i];
            let div = self.w_plus[i] * self.flux[i + 1] - self.w_minus[i] * self.flux[i];
            let sink = if state.absorption {
                let up = ((old - left_old) * inv_h).max(0.0);
                let dn = ((u[i + 1] - old) * inv_h).min(0.0);
                self.coeffs.b_eps(up * up + dn * dn)
            } else {
                0.0
            };
            let new = old + dt * (div - sink);
            absorbed += sink * self.measure[i];
            if !new.is_finite() {
                return Err(Error::NonFinite { t: state.time, cell: i });
            }
            if new < floor - FLOOR_SLACK {
                return Err(Error::FloorViolation {
                    t: state.time,
                    cell: i,
                    value: new,
                    floor,
                });
            }
            u[i] = new;
            left_old = old;
        }

        // flux leaving through faces next to pinned cells
        let n = u.len();
        let mut out = 0.0;
        if state.grid.geometry == Geometry::Line && a == 1 {
            out += self.face[0] * self.flux[1];
        }
        if b == n - 2 {
            out -= self.face[n - 2] * self.flux[n - 1];
        }
        stats.boundary_flux = out;
        state.boundary_out += dt * out;
        state.absorbed_mass += dt * absorbed;
        state.time += dt;

        // new nonzero excess lies within [a, b]
        let lo = (a..=b).find(|&i| u[i] != floor);
        let hi = (a..=b).rev().find(|&i| u[i] != floor);
        state.active = match (lo, hi) {
            (Some(lo), Some(hi)) => (lo, hi),
            _ => (1, 0),
        };
        Ok(stats)
    }
}

/// `dt = safety / (2 N_eff D_max / h² + √2 q (ε²+ĝ²)^{(q−2)/2} ĝ / h)`,
/// further capped by `safety · floor / max b_ε(ĝ²)`; `D_max` is the
/// effective diffusivity at the largest face gradient and `ĝ` the largest
/// upwind cell gradient. The absorption terms drop out when absorption is
/// off or the field is flat.
pub fn stable_dt(state: &State, safety: f64) -> f64 {
    Stepper::new(&state.params, &state.grid).stable_dt(state, safety)
}

/// One explicit step; allocates a fresh [`Stepper`].
pub fn step(state: &State, dt: f64) -> Result<(State, StepStats)> {
    let mut next = state.clone();
    let stats = Stepper::new(&state.params, &state.grid).step(&mut next, dt)?;
    Ok((next, stats))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub params: ProblemParams,
    pub geometry: Geometry,
    /// Cell width; defaults to the smallest profile feature / 200.
    pub h: Option<f64>,
    /// Domain half-width (line) or outer radius; defaults from the
    /// Barenblatt support bound with margin 1.25.
    pub half_width: Option<f64>,
    pub t_end: f64,
    pub safety: f64,
    pub profile: InitialProfile,
    pub absorption: bool,
    /// First geometric recording time; defaults to the start time or 1/16.
    pub record_start: Option<f64>,
    pub support_rel_tol: f64,
    /// Composite exponents recorded in addition to `α_p` and `β_{p,q}`.
    pub extra_thetas: Vec<f64>,
}

impl RunConfig {
    pub fn new(params: ProblemParams, geometry: Geometry, profile: InitialProfile, t_end: f64) -> Self {
        Self {
            params,
            geometry,
            h: None,
            half_width: None,
            t_end,
            safety: 0.4,
            profile,
            absorption: true,
            record_start: None,
            support_rel_tol: 1e-6,
            extra_thetas: Vec::new(),
        }
    }

    pub fn start_time(&self) -> f64 {
        self.profile.start_time()
    }

    pub fn resolved_h(&self) -> Result<f64> {
        if let Some(h) = self.h {
            return Ok(h);
        }
        let feature = match self.profile {
            InitialProfile::Bump { r0, .. } => r0,
            InitialProfile::DeadCoreAnnulus { r0, r1, .. } => r0.min(r1 - r0),
            InitialProfile::BarenblattAt { .. } => self.profile.outer_radius(self.params.p, self.params.n)?,
        };
        Ok(feature / 200.0)
    }

    pub fn resolved_half_width(&self) -> Result<f64> {
        if let Some(l) = self.half_width {
            return Ok(l);
        }
        let p = self.params.p;
        let n = self.params.n;
        let r0 = self.profile.outer_radius(p, n)?;
        let gp = gamma_p_constant(p, n);
        let eta = crate::exponents::eta(p, n);
        Ok(DOMAIN_MARGIN * (r0 + 2.0 * self.t_end.powf(eta) * gp.powf(-(p - 1.0) / p)))
    }

    pub fn resolved_record_start(&self) -> f64 {
        self.record_start.unwrap_or_else(|| {
            let t0 = self.start_time();
            if t0 > 0.0 {
                t0
            } else {
                1.0 / 16.0
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(Error::InvalidParams(format!("safety must lie in (0, 1], got {}", self.safety)));
        }
        if !(self.t_end > self.start_time()) {
            return Err(Error::InvalidParams(format!(
                "t_end = {} must exceed the start time {}",
                self.t_end,
                self.start_time()
            )));
        }
        if !(self.resolved_record_start() > 0.0) {
            return Err(Error::InvalidParams("record_start must be positive".into()));
        }
        if !(self.support_rel_tol > 0.0 && self.support_rel_tol < 1.0) {
            return Err(Error::InvalidParams("support_rel_tol must lie in (0, 1)".into()));
        }
        if let Some(th) = self.extra_thetas.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return Err(Error::InvalidParams(format!("composite exponent {th} outside (0, 1]")));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.geometry, self.resolved_h()?, self.resolved_half_width()?)
    }

    /// Builds the lifted initial state.
    pub fn initial_state(&self) -> Result<State> {
        self.validate()?;
        let grid = self.grid()?;
        let samples = sample_profile(&self.profile, self.params.p, self.params.n, &grid)?;
        State::new(self.params, grid, &samples, self.start_time(), self.absorption)
    }

    /// Exponents whose composite gradient `|∇(u^θ)|` is recorded.
    pub fn thetas(&self) -> Vec<f64> {
        let ex = self.params.exponents();
        let mut th = vec![ex.alpha_p, ex.beta_pq];
        th.extend(self.extra_thetas.iter().copied());
        th
    }

    /// Parses the plain-text `key = value` format.
    ///
    /// Keys: `p`, `q`, `N`, `eps`, `gamma`, `geometry` (`line` | `radial`),
    /// `h`, `L`, `t_end`, `safety`, `profile`, `absorption` (`on` | `off`),
    /// `record_start`. `#` starts a comment.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let kv = parse_kv(text)?;
        Self::from_kv(&kv)
    }

    pub(crate) fn from_kv(kv: &[(String, String)]) -> Result<Self> {
        let mut fields = std::collections::BTreeMap::new();
        for (k, v) in kv {
            if !RUN_KEYS.contains(&k.as_str()) {
                return Err(Error::Config(format!("unknown key `{k}`")));
            }
            if fields.insert(k.as_str(), v.as_str()).is_some() {
                return Err(Error::Config(format!("duplicate key `{k}`")));
            }
        }
        let num = |key: &str| -> Result<Option<f64>> {
            fields
                .get(key)
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| Error::Config(format!("`{key}` expects a number, got `{v}`")))
                })
                .transpose()
        };
        let req = |key: &str| -> Result<f64> {
            num(key)?.ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
        };
        let p = req("p")?;
        let q = req("q")?;
        let n = match fields.get("N") {
            Some(v) => v
                .parse::<u32>()
                .map_err(|_| Error::Config(format!("`N` expects a positive integer, got `{v}`")))?,
            None => 1,
        };
        let eps = num("eps")?.unwrap_or(1e-3);
        let cfg_err = |e: Error| Error::Config(e.to_string());
        let mut params = ProblemParams::new(p, q, n, eps).map_err(cfg_err)?;
        if let Some(g) = num("gamma")? {
            params = params.with_gamma(g).map_err(cfg_err)?;
        }
        let geometry = match fields.get("geometry").copied().unwrap_or("line") {
            "line" => Geometry::Line,
            "radial" => Geometry::Radial(n),
            other => return Err(Error::Config(format!("unknown geometry `{other}`"))),
        };
        let profile: InitialProfile = fields
            .get("profile")
            .ok_or_else(|| Error::Config("missing required key `profile`".into()))?
            .parse()?;
        let absorption = match fields.get("absorption").copied().unwrap_or("on") {
            "on" => true,
            "off" => false,
            other => return Err(Error::Config(format!("`absorption` expects on/off, got `{other}`"))),
        };
        let mut cfg = RunConfig::new(params, geometry, profile, req("t_end")?);
        cfg.h = num("h")?;
        cfg.half_width = num("L")?;
        cfg.safety = num("safety")?.unwrap_or(0.4);
        cfg.absorption = absorption;
        cfg.record_start = num("record_start")?;
        cfg.validate().map_err(cfg_err)?;
        if geometry == Geometry::Line && n != 1 {
            return Err(Error::Config("line geometry requires N = 1".into()));
        }
        Ok(cfg)
    }

    /// Inverse of [`RunConfig::from_kv_str`] for the documented keys.
    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        let pp = &self.params;
        let _ = writeln!(s, "p = {}", pp.p);
        let _ = writeln!(s, "q = {}", pp.q);
        let _ = writeln!(s, "N = {}", pp.n);
        let _ = writeln!(s, "eps = {}", pp.eps);
        let _ = writeln!(s, "gamma = {}", pp.gamma);
        let geom = match self.geometry {
            Geometry::Line => "line",
            Geometry::Radial(_) => "radial",
        };
        let _ = writeln!(s, "geometry = {geom}");
        if let Some(h) = self.h {
            let _ = writeln!(s, "h = {h}");
        }
        if let Some(l) = self.half_width {
            let _ = writeln!(s, "L = {l}");
        }
        let _ = writeln!(s, "t_end = {}", self.t_end);
        let _ = writeln!(s, "safety = {}", self.safety);
        let _ = writeln!(s, "profile = {}", self.profile);
        let _ = writeln!(s, "absorption = {}", if self.absorption { "on" } else { "off" });
        if let Some(r) = self.record_start {
            let _ = writeln!(s, "record_start = {r}");
        }
        s
    }
}

pub(crate) const RUN_KEYS: &[&str] = &[
    "p",
    "q",
    "N",
    "eps",
    "gamma",
    "geometry",
    "h",
    "L",
    "t_end",
    "safety",
    "profile",
    "absorption",
    "record_start",
];

/// Splits `key = value` lines, dropping blanks and `#` comments.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Geometric recording times `t_rec0 · 2^{j/4}` strictly after `t_start`
/// and up to `t_end`, with `t_end` appended if it is not on the grid.
pub fn recording_times(t_start: f64, record_start: f64, t_end: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut j = 0u32;
    loop {
        let t = record_start * 2f64.powf(f64::from(j) / RECORDS_PER_OCTAVE);
        if t > t_end * (1.0 + 1e-12) {
            break;
        }
        if t > t_start * (1.0 + 1e-12) && t > t_start {
            out.push(t.min(t_end));
        }
        j += 1;
    }
    if out.last().is_none_or(|&t| t < t_end) {
        out.push(t_end);
    }
    out
}

/// Evolves from the profile's start time to `t_end`, recording observables
/// at the initial time and at each geometric recording time.
pub fn run(config: &RunConfig) -> Result<(State, TimeSeries)> {
    run_with(config, |_| {})
}

/// [`run`] with a callback on the state after every step.
pub fn run_with(config: &RunConfig, mut on_step: impl FnMut(&State)) -> Result<(State, TimeSeries)> {
    let mut state = config.initial_state()?;
    let mut stepper = Stepper::new(&state.params, &state.grid);
    let thetas = config.thetas();
    let rel_tol = config.support_rel_tol;
    let mut series = TimeSeries::default();
    series.push(observe(&state, &thetas, rel_tol));

    let half_width = state.grid.half_width;
    let times = recording_times(state.time, config.resolved_record_start(), config.t_end);
    let mut steps_since_check = 0usize;
    for target in times {
        while state.time < target {
            let mut dt = stepper.stable_dt(&state, config.safety);
            let remaining = target - state.time;
            let landing = dt >= remaining * (1.0 - 1e-12);
            if landing {
                dt = remaining;
            }
            stepper.step(&mut state, dt)?;
            if landing {
                state.time = target;
            }
            on_step(&state);
            steps_since_check += 1;
            if steps_since_check >= 4096 {
                steps_since_check = 0;
                check_overflow(&state, rel_tol, half_width)?;
            }
        }
        check_overflow(&state, rel_tol, half_width)?;
        series.push(observe(&state, &thetas, rel_tol));
    }
    Ok((state, series))
}

fn check_overflow(state: &State, rel_tol: f64, half_width: f64) -> Result<()> {
    let rho = support_radius(state, rel_tol);
    if rho > 0.9 * half_width {
        return Err(Error::SupportOverflow {
            t: state.time,
            radius: rho,
            half_width,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// `max_t max_i (u_A − u_B)₊`
    pub max_violation: f64,
    pub time_of_max: f64,
    pub steps: usize,
}

/// Evolves two runs on a common grid with a shared time-step sequence and
/// reports the worst violation of `u_A ≤ u_B`.
pub fn comparison_run(config_a: &RunConfig, config_b: &RunConfig) -> Result<ComparisonReport> {
    let mut a = config_a.initial_state()?;
    let mut b = config_b.initial_state()?;
    if a.grid != b.grid || a.params != b.params || a.time != b.time {
        return Err(Error::InvalidParams(
            "comparison runs need the same grid, parameters and start time".into(),
        ));
    }
    if config_a.t_end != config_b.t_end {
        return Err(Error::InvalidParams("comparison runs need the same t_end".into()));
    }
    if let Some(i) = (0..a.values.len()).find(|&i| a.values[i] > b.values[i]) {
        return Err(Error::InvalidParams(format!(
            "initial data are not ordered at cell {i}"
        )));
    }
    let safety = config_a.safety.min(config_b.safety);
    let mut sa = Stepper::new(&a.params, &a.grid);
    let mut sb = Stepper::new(&b.params, &b.grid);
    let t_end = config_a.t_end;
    let mut report = ComparisonReport {
        max_violation: 0.0,
        time_of_max: a.time,
        steps: 0,
    };
    while a.time < t_end {
        let mut dt = sa.stable_dt(&a, safety).min(sb.stable_dt(&b, safety));
        let remaining = t_end - a.time;
        let landing = dt >= remaining * (1.0 - 1e-12);
        if landing {
            dt = remaining;
        }
        sa.step(&mut a, dt)?;
        sb.step(&mut b, dt)?;
        report.steps += 1;
        let v = a
            .values
            .iter()
            .zip(&b.values)
            .fold(0.0f64, |m, (x, y)| m.max(x - y));
        if v > report.max_violation {
            report.max_violation = v;
            report.time_of_max = a.time;
        }
        if landing {
            a.time = t_end;
            b.time = t_end;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationReport {
    pub eps: Vec<f64>,
    pub finals: Vec<Observables>,
    /// Largest relative change of sup, L¹ and support between successive ε.
    pub max_relative_change: f64,
    pub pass: bool,
}

/// Reruns `config` at ε, ε/2, ε/4 and checks the final observables move by
/// less than 2%.
pub fn epsilon_continuation(config: &RunConfig) -> Result<ContinuationReport> {
    let eps0 = config.params.eps;
    let mut eps = Vec::new();
    let mut finals = Vec::new();
    for k in 0..3 {
        let e = eps0 / f64::from(1u32 << k);
        let mut cfg = config.clone();
        cfg.params = cfg.params.with_eps(e)?;
        let (_, series) = run(&cfg)?;
        eps.push(e);
        finals.push(series.records.last().cloned().expect("run records at least one sample"));
    }
    let rel = |a: f64, b: f64| {
        let s = a.abs().max(b.abs());
        if s == 0.0 {
            0.0
        } else {
            (a - b).abs() / s
        }
    };
    let mut worst: f64 = 0.0;
    for w in finals.windows(2) {
        worst = worst
            .max(rel(w[0].sup_excess, w[1].sup_excess))
            .max(rel(w[0].l1_excess, w[1].l1_excess))
            .max(rel(w[0].support_radius, w[1].support_radius));
    }
    Ok(ContinuationReport {
        eps,
        finals,
        max_relative_change: worst,
        pass: worst < 0.02,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(q: f64) -> ProblemParams {
        ProblemParams::new(3.0, q, 1, 1e-3).unwrap()
    }

    #[test]
    fn constant_field_dt_and_steady_state() {
        let pp = params(2.0);
        let grid = Grid::new(Geometry::Line, 0.01, 1.0).unwrap();
        let state = State::new(pp, grid.clone(), &vec![0.0; grid.n], 0.0, true).unwrap();
        let dt = stable_dt(&state, 0.5);
        let expected = 0.5 * grid.h * grid.h / (2.0 * pp.eps.powf(pp.p - 2.0));
        assert!((dt - expected).abs() <= 1e-15 * expected);
        let (next, _) = step(&state, dt).unwrap();
        assert_eq!(next.values, state.values);
        assert_eq!(next.time, dt);
    }

    #[test]
    fn radial_constant_field_dt_uses_dimension() {
        let pp = ProblemParams::new(3.0, 2.0, 3, 1e-3).unwrap();
        let grid = Grid::new(Geometry::Radial(3), 0.01, 1.0).unwrap();
        let state = State::new(pp, grid.clone(), &vec![0.0; grid.n], 0.0, true).unwrap();
        let dt = stable_dt(&state, 0.4);
        let expected = 0.4 * grid.h * grid.h / (2.0 * 3.0 * pp.eps);
        assert!((dt - expected).abs() <= 1e-15 * expected);
    }

    #[test]
    fn halving_h_quarters_dt_without_absorption() {
        let pp = params(2.0);
        let profile = InitialProfile::bump(1.0, 1.0);
        let mut dts = Vec::new();
        for &h in &[0.02, 0.01] {
            let grid = Grid::new(Geometry::Line, h, 2.0).unwrap();
            let samples = sample_profile(&profile, 3.0, 1, &grid).unwrap();
            let state = State::new(pp, grid, &samples, 0.0, false).unwrap();
            dts.push(stable_dt(&state, 0.4));
        }
        assert!((dts[0] / dts[1] - 4.0).abs() < 1e-2, "{dts:?}");
    }

    #[test]
    fn floor_and_max_principle_on_bump() {
        let pp = params(1.5);
        let mut cfg = RunConfig::new(pp, Geometry::Line, InitialProfile::bump(1.0, 1.0), 0.05);
        cfg.h = Some(0.02);
        cfg.half_width = Some(2.0);
        let mut state = cfg.initial_state().unwrap();
        let mut stepper = Stepper::new(&state.params, &state.grid);
        let mut last_max = state.max_value();
        for _ in 0..500 {
            let dt = stepper.stable_dt(&state, 0.4);
            stepper.step(&mut state, dt).unwrap();
            assert!(state.min_value() >= state.floor - FLOOR_SLACK);
            let m = state.max_value();
            assert!(m <= last_max);
            last_max = m;
        }
    }

    #[test]
    fn zero_profile_stays_at_floor() {
        let pp = params(2.0);
        let mut cfg = RunConfig::new(pp, Geometry::Line, InitialProfile::bump(1.0, 0.0), 1.0);
        cfg.h = Some(0.05);
        cfg.half_width = Some(3.0);
        let (state, series) = run(&cfg).unwrap();
        assert!(state.values.iter().all(|&v| v == state.floor));
        for r in &series.records {
            assert_eq!(r.sup_excess, 0.0);
            assert_eq!(r.l1_excess, 0.0);
            assert_eq!(r.support_radius, 0.0);
            assert_eq!(r.absorbed_mass, 0.0);
        }
    }

    #[test]
    fn recording_times_are_quarter_octaves() {
        let t = recording_times(0.0, 1.0, 4.0);
        assert_eq!(t.len(), 9);
        assert_eq!(t[0], 1.0);
        assert_eq!(t[4], 2.0);
        assert_eq!(*t.last().unwrap(), 4.0);
        let t = recording_times(1.0, 1.0, 2.0);
        assert_eq!(t.len(), 4);
        assert!(t[0] > 1.0);
        let t = recording_times(0.0, 1.0, 3.0);
        assert_eq!(*t.last().unwrap(), 3.0);
        assert!(t.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn support_overflow_reported() {
        let pp = params(3.0);
        let mut cfg = RunConfig::new(pp, Geometry::Line, InitialProfile::bump(1.0, 1.0), 50.0);
        cfg.h = Some(0.05);
        cfg.half_width = Some(1.3);
        assert!(matches!(run(&cfg), Err(Error::SupportOverflow { .. })));
    }

    #[test]
    fn config_round_trip_and_errors() {
        let text = "p = 3\nq = 2.25\nN = 1\neps = 1e-3\nprofile = bump:R0=1,H=1,m=2\nt_end = 8 # short\nabsorption = on\n";
        let cfg = RunConfig::from_kv_str(text).unwrap();
        assert_eq!(cfg.params.q, 2.25);
        assert_eq!(cfg.geometry, Geometry::Line);
        let again = RunConfig::from_kv_str(&cfg.to_kv_string()).unwrap();
        assert_eq!(cfg, again);
        assert!(RunConfig::from_kv_str("p = 3\nq = 2\nt_end = 1\n").is_err());
        assert!(RunConfig::from_kv_str("p = 2\nq = 2\nt_end = 1\nprofile = bump:R0=1\n").is_err());
        assert!(RunConfig::from_kv_str("p = 3\nq = 2\nt_end = 1\nprofile = bump:R0=1\ncolour = red\n").is_err());
        assert!(RunConfig::from_kv_str("p = 3\nq = 2\nN = 2\nt_end = 1\nprofile = bump:R0=1\n").is_err());
        assert!(RunConfig::from_kv_str("p = 3\nq = 2\nq = 3\nt_end = 1\nprofile = bump:R0=1\n").is_err());
    }
}
