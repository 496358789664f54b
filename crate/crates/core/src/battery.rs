//! The acceptance battery: a fixed set of scenarios and one check per
//! criterion. Simulations are cached per process so that criteria sharing
//! a run (the mass-balance check reuses every absorption run) pay for it
//! once.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::bernstein::{
    b22_grid, check_b22, check_phi2_leading_r1, check_phi_derivatives, check_r2_bracket, log_grid, omega_eps, ProofCheckReport,
    s1_parameters, s2_parameters, search_mu, verify_power_supersolution, PhiChoice,
};
use crate::error::{Error, Result};
use crate::exponents::{alpha_p, beta_pq, compute_exponents, ProblemParams, Regime};
use crate::fit::{fit_power, last_octaves, plateau_test, Law};
use crate::grid::Geometry;
use crate::model::{BarenblattSolution, InitialProfile};
use crate::observe::{mass_balance_residual, TimeSeries};
use crate::solver::{comparison_run, run, run_with, RunConfig, State};

pub const CRITERIA: [(u8, &str); 12] = [
    (1, "exponents"),
    (2, "barenblatt"),
    (3, "diffusion-support"),
    (4, "decay"),
    (5, "radial-gradient"),
    (6, "dichotomy"),
    (7, "localization"),
    (8, "intermediate"),
    (9, "deadcore"),
    (10, "comparison"),
    (11, "mass-balance"),
    (12, "bernstein"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u8,
    pub name: String,
    pub pass: bool,
    pub details: Vec<String>,
}

impl CriterionReport {
    pub fn summary_line(&self) -> String {
        format!(
            "criterion {:>2} {:<18} {}  {}",
            self.id,
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.details.join("; ")
        )
    }
}

/// Resolves a `--only` filter (criterion name or number) to criterion ids.
pub fn select(only: Option<&str>) -> Result<Vec<u8>> {
    let Some(key) = only else {
        return Ok(CRITERIA.iter().map(|c| c.0).collect());
    };
    let hit = CRITERIA
        .iter()
        .find(|(id, name)| *name == key || id.to_string() == key)
        .map(|c| c.0);
    hit.map(|id| vec![id]).ok_or_else(|| {
        let names: Vec<&str> = CRITERIA.iter().map(|c| c.1).collect();
        Error::Config(format!("unknown criterion `{key}`; expected one of {}", names.join(", ")))
    })
}

/// Runs one criterion; errors become failing reports.
pub fn evaluate(id: u8) -> CriterionReport {
    let name = CRITERIA
        .iter()
        .find(|c| c.0 == id)
        .map_or("unknown", |c| c.1)
        .to_string();
    let mut details = Vec::new();
    let outcome = match id {
        1 => exponents_check(&mut details),
        2 => barenblatt_check(&mut details),
        3 => diffusion_support_check(&mut details),
        4 => decay_check(&mut details),
        5 => radial_gradient_check(&mut details),
        6 => dichotomy_check(&mut details),
        7 => localization_check(&mut details),
        8 => intermediate_check(&mut details),
        9 => deadcore_check(&mut details),
        10 => comparison_check(&mut details),
        11 => mass_balance_check(&mut details),
        12 => bernstein_check(&mut details),
        _ => Err(Error::Config(format!("no criterion {id}"))),
    };
    let pass = match outcome {
        Ok(pass) => pass,
        Err(e) => {
            details.push(format!("error: {e}"));
            false
        }
    };
    CriterionReport { id, name, pass, details }
}

/// Adds a detail line and returns `ok`.
fn note(details: &mut Vec<String>, ok: bool, text: String) -> bool {
    details.push(format!("{}{text}", if ok { "" } else { "[x] " }));
    ok
}

// ---------------------------------------------------------------- scenarios

struct Scenario {
    series: TimeSeries,
    h: f64,
    floor: f64,
    /// Scenario-specific measurement (see the constructors).
    extra: f64,
}

type Cell = OnceLock<std::result::Result<Scenario, Error>>;
type ScenarioFn = fn() -> Result<&'static Scenario>;

fn cached(cell: &'static Cell, build: impl FnOnce() -> Result<Scenario>) -> Result<&'static Scenario> {
    cell.get_or_init(build).as_ref().map_err(Clone::clone)
}

fn params(q: f64, eps: f64) -> Result<ProblemParams> {
    ProblemParams::new(3.0, q, 1, eps)
}

/// Symmetric one-dimensional runs use the half-line with a zero-flux face
/// at the origin; this is the even line grid folded in two.
fn bump_config(q: f64, eps: f64, profile: InitialProfile, t_end: f64) -> Result<RunConfig> {
    let mut cfg = RunConfig::new(params(q, eps)?, Geometry::Radial(1), profile, t_end);
    cfg.record_start = Some(1.0 / 16.0);
    Ok(cfg)
}

fn from_run(cfg: &RunConfig) -> Result<Scenario> {
    let (state, series) = run(cfg)?;
    Ok(Scenario {
        series,
        h: state.grid.h,
        floor: state.floor,
        extra: 0.0,
    })
}

const BARENBLATT_T_END: f64 = 256.0;
const BARENBLATT_CHECK_T: f64 = 2.0;

fn barenblatt_config(h: f64, t_end: f64, half_width: Option<f64>) -> Result<RunConfig> {
    let mut cfg = RunConfig::new(
        params(2.0, 1e-3)?,
        Geometry::Radial(1),
        InitialProfile::BarenblattAt { t0: 1.0, scale: 1.0 },
        t_end,
    );
    cfg.h = Some(h);
    cfg.half_width = half_width;
    cfg.absorption = false;
    cfg.record_start = Some(1.0);
    Ok(cfg)
}

/// `max_i |u_i − floor − 𝓑(t, r_i)| / 𝓑(t, 0)`
fn barenblatt_error(state: &State, b: &BarenblattSolution) -> Result<f64> {
    let peak = b.value(state.time, 0.0)?;
    let mut worst: f64 = 0.0;
    for (i, &u) in state.values.iter().enumerate() {
        let exact = b.value(state.time, state.grid.radius(i))?;
        worst = worst.max((u - state.floor - exact).abs());
    }
    Ok(worst / peak)
}

/// Pure diffusion from `𝓑(1,·)` at `h = 0.005` to `t = 256`; `extra` is the
/// relative error at `t = 2`.
fn barenblatt_long() -> Result<&'static Scenario> {
    static CELL: Cell = OnceLock::new();
    cached(&CELL, || {
        let cfg = barenblatt_config(0.005, BARENBLATT_T_END, None)?;
        let b = BarenblattSolution::new(3.0, 1)?;
        let mut err = Err(Error::InvalidParams("t = 2 was never reached exactly".into()));
        let (state, series) = run_with(&cfg, |s| {
            if s.time == BARENBLATT_CHECK_T {
                err = barenblatt_error(s, &b);
            }
        })?;
        Ok(Scenario {
            series,
            h: state.grid.h,
            floor: state.floor,
            extra: err?,
        })
    })
}

/// Same domain at half the cell width, to `t = 2`; `extra` is the error there.
fn barenblatt_fine() -> Result<&'static Scenario> {
    static CELL: Cell = OnceLock::new();
    cached(&CELL, || {
        let coarse = barenblatt_config(0.005, BARENBLATT_T_END, None)?;
        let grid = coarse.grid()?;
        let cfg = barenblatt_config(grid.h / 2.0, BARENBLATT_CHECK_T, Some(grid.half_width))?;
        let (state, series) = run(&cfg)?;
        let b = BarenblattSolution::new(3.0, 1)?;
        Ok(Scenario {
            extra: barenblatt_error(&state, &b)?,
            series,
            h: state.grid.h,
            floor: state.floor,
        })
    })
}

fn decay_run() -> Result<&'static Scenario> {
    static CELL: Cell = OnceLock::new();
    cached(&CELL, || from_run(&bump_config(1.6, 1e-3, InitialProfile::bump(1.0, 1.0), 256.0)?))
}

const RADIAL_Q: f64 = 2.5;

fn radial_gradient_run() -> Result<&'static Scenario> {
    static CELL: Cell = OnceLock::new();
    cached(&CELL, || {
        let mut cfg = bump_config(RADIAL_Q, 1e-3, InitialProfile::bump(1.0, 1.0), 50.0)?;
        cfg.record_start = Some(0.5);
        cfg.extra_thetas = vec![(RADIAL_Q - 1.0) / RADIAL_Q];
        from_run(&cfg)
    })
}

fn diffusive_run() -> Result<&'static Scenario> {
    static CELL: Cell = OnceLock::new();
    cached(&CELL, || from_run(&bump_config(3.0, 1e-3, InitialProfile::bump(1.0, 1.0), 256.0)?))
}

/// Small ε: at ε = 1e−3 the regularized coefficients act like a linear
/// heat equation once gradients fall below ε, and the resulting tails push
/// the detected support outward.
fn localized_run() -> Result<&'static Scenario> {
    static CELL: Cell = OnceLock::new();
    cached(&CELL, || from_run(&bump_config(1.5, 1e-6, InitialProfile::bump(1.0, 1.0), 256.0)?))
}

/// Height 10 moves the crossover to the self-similar regime earlier by
/// roughly ten octaves (crossover time scales like mass⁻³).
pub const INTERMEDIATE_HEIGHT: f64 = 10.0;

fn intermediate_run() -> Result<&'static Scenario> {
    static CELL: Cell = OnceLock::new();
    cached(&CELL, || {
        from_run(&bump_config(2.25, 1e-6, InitialProfile::bump(1.0, INTERMEDIATE_HEIGHT), 256.0)?)
    })
}

const DEADCORE_RADIUS: f64 = 1.0;

/// `extra` is the largest excess seen on `|x| ≤ 1` after any step.
fn deadcore_run() -> Result<&'static Scenario> {
    static CELL: Cell = OnceLock::new();
    cached(&CELL, || {
        let profile = InitialProfile::DeadCoreAnnulus {
            r0: 4.0,
            r1: 6.0,
            height: 1.0,
        };
        let cfg = bump_config(1.5, 1e-3, profile, 256.0)?;
        let mut worst: f64 = 0.0;
        let (state, series) = run_with(&cfg, |s| {
            for (i, &u) in s.values.iter().enumerate() {
                if s.grid.radius(i) > DEADCORE_RADIUS {
                    break;
                }
                worst = worst.max(u - s.floor);
            }
        })?;
        Ok(Scenario {
            series,
            h: state.grid.h,
            floor: state.floor,
            extra: worst,
        })
    })
}

// ----------------------------------------------------------------- criteria

fn exponents_check(d: &mut Vec<String>) -> Result<bool> {
    let e = compute_exponents(3.0, 2.0, 1)?;
    let exact = [
        ("alpha", e.alpha_p, 0.5),
        ("beta", e.beta_pq, 0.5),
        ("q_star", e.q_star, 2.5),
        ("xi", e.xi, 1.0 / 3.0),
        ("eta", e.eta, 0.25),
        ("alpha(N=2)", compute_exponents(3.0, 2.0, 2)?.alpha_p, 9.0 / 17.0),
    ];
    let worst = exact.iter().map(|(_, a, b)| (a - b).abs()).fold(0.0, f64::max);
    let mut ok = note(d, worst <= 1e-15, format!("closed values max error {worst:.1e}"));

    let mut cells = 0;
    let mut worst_id: f64 = 0.0;
    for i in 0..20 {
        let p = 2.1 + 3.9 * f64::from(i) / 19.0;
        let q_lo = p - 1.0;
        let q_hi = p - 0.5;
        for j in 0..20 {
            let q = q_lo + (q_hi - q_lo) * (f64::from(j) + 0.5) / 20.0;
            let ex = compute_exponents(p, q, 1)?;
            if ex.regime != Regime::Intermediate {
                continue;
            }
            let (a, b) = (ex.a_support.unwrap_or(f64::NAN), ex.b_l1.unwrap_or(f64::NAN));
            let id1 = a + q * ex.xi * (p - 2.0) * b / p - (1.0 - ex.xi * (p - 2.0)) / p;
            let id2 = 1.0 - a / ex.xi - (q - 1.0) * b;
            worst_id = worst_id.max(id1.abs()).max(id2.abs());
            cells += 1;
        }
    }
    ok &= note(d, cells == 400 && worst_id <= 1e-12, format!("{cells} intermediate cells, identity residual {worst_id:.1e}"));
    Ok(ok)
}

fn barenblatt_check(d: &mut Vec<String>) -> Result<bool> {
    let long = barenblatt_long()?;
    let fine = barenblatt_fine()?;
    let mut ok = note(d, long.extra <= 0.02, format!("rel error at t=2 {:.3e} (h={:.5})", long.extra, long.h));
    let ratio = long.extra / fine.extra;
    ok &= note(d, ratio >= 1.7, format!("error ratio h/(h/2) {ratio:.3}"));
    let t = long.series.times();
    let sup = long.series.column(|o| o.sup_excess);
    let k = fit_power(&t, &sup, (1.0, 16.0))?.slope();
    ok &= note(d, (k + 0.25).abs() <= 0.02, format!("sup exponent on [1,16] {k:.4}"));
    Ok(ok)
}

fn diffusion_support_check(d: &mut Vec<String>) -> Result<bool> {
    let long = barenblatt_long()?;
    let w = last_octaves(&long.series, 3.0)?;
    let t = long.series.times();
    let rho = long.series.column(|o| o.support_radius);
    let k = fit_power(&t, &rho, w)?.slope();
    Ok(note(d, (k - 0.25).abs() <= 0.05, format!("support exponent on [{},{}] {k:.4}", w.0, w.1)))
}

fn decay_check(d: &mut Vec<String>) -> Result<bool> {
    let s = decay_run()?;
    let w = last_octaves(&s.series, 3.0)?;
    let k = fit_power(&s.series.times(), &s.series.column(|o| o.sup_excess), w)?.slope();
    let bound = -1.0 / 2.2 + 0.08;
    Ok(note(d, k <= bound, format!("sup exponent {k:.4} <= {bound:.4}")))
}

fn radial_gradient_check(d: &mut Vec<String>) -> Result<bool> {
    let s = radial_gradient_run()?;
    let q = RADIAL_Q;
    let theta = (q - 1.0) / q;
    let constant = (q - 1.0).powf((q - 1.0) / q) / q;
    let mut worst: f64 = 0.0;
    let mut at = 0.0;
    for o in &s.series.records {
        if o.t < 0.5 * (1.0 - 1e-12) || o.t > 50.0 * (1.0 + 1e-12) {
            continue;
        }
        let g = o
            .grad_power_at(theta)
            .ok_or_else(|| Error::InvalidParams("composite gradient not recorded".into()))?;
        let scaled = g * o.t.powf(1.0 / q);
        if scaled > worst {
            worst = scaled;
            at = o.t;
        }
    }
    let bound = 1.10 * constant;
    Ok(note(d, worst <= bound, format!("max t^(1/q)|grad u^theta| {worst:.4} at t={at:.3} <= {bound:.4}")))
}

fn dichotomy_check(d: &mut Vec<String>) -> Result<bool> {
    let s = diffusive_run()?;
    let t = s.series.times();
    let l1 = s.series.column(|o| o.l1_excess);
    let f = plateau_test(&t, &l1, (64.0, 256.0), 0.05)?;
    let (variation, plateau) = match f.law {
        Law::Plateau {
            relative_variation,
            pass,
            ..
        } => (relative_variation, pass),
        _ => (f64::NAN, false),
    };
    let mut ok = note(d, plateau, format!("q=3 L1 variation on [64,256] {variation:.4}"));
    let first = l1.first().copied().unwrap_or(0.0);
    let last = l1.last().copied().unwrap_or(0.0);
    ok &= note(d, last >= 0.2 * first, format!("q=3 final/initial L1 {:.4}", last / first));

    let s = localized_run()?;
    let w = last_octaves(&s.series, 3.0)?;
    let k = fit_power(&s.series.times(), &s.series.column(|o| o.l1_excess), w)?.slope();
    ok &= note(d, k <= -2.0 + 0.3, format!("q=1.5 L1 exponent {k:.4} <= -1.7"));
    Ok(ok)
}

fn localization_check(d: &mut Vec<String>) -> Result<bool> {
    let s = localized_run()?;
    let early = s
        .series
        .records
        .iter()
        .find(|o| (o.t - 8.0).abs() <= 1e-9)
        .ok_or_else(|| Error::SeriesTooShort("no record at t = 8".into()))?;
    let late = s.series.records.last().expect("non-empty series");
    let growth = late.support_radius - early.support_radius;
    Ok(note(
        d,
        growth <= 3.0 * s.h,
        format!(
            "rho(8)={:.4}, rho(256)={:.4}, growth {growth:.4} <= 3h={:.4}",
            early.support_radius,
            late.support_radius,
            3.0 * s.h
        ),
    ))
}

fn intermediate_check(d: &mut Vec<String>) -> Result<bool> {
    let s = intermediate_run()?;
    let t = s.series.times();
    let k = fit_power(&t, &s.series.column(|o| o.support_radius), (16.0, 256.0))?.slope();
    let a = 1.0 / 6.0;
    let mut ok = note(d, k <= a + 0.05, format!("support exponent on [16,256] {k:.4} <= {:.4}", a + 0.05));
    let w = last_octaves(&s.series, 3.0)?;
    let k = fit_power(&t, &s.series.column(|o| o.l1_excess), w)?.slope();
    let b = 1.0 / 3.0;
    ok &= note(d, k <= -b + 0.1, format!("L1 exponent {k:.4} <= {:.4}", -b + 0.1));
    d.push(format!("bump height {INTERMEDIATE_HEIGHT}"));
    Ok(ok)
}

fn deadcore_check(d: &mut Vec<String>) -> Result<bool> {
    let s = deadcore_run()?;
    Ok(note(
        d,
        s.extra <= 10.0 * s.floor,
        format!("max excess on |x|<=1 {:.3e} vs 10*floor {:.3e}", s.extra, 10.0 * s.floor),
    ))
}

fn comparison_check(d: &mut Vec<String>) -> Result<bool> {
    let pp = params(2.0, 1e-3)?;
    let make = |height: f64, absorption: bool| {
        let mut cfg = RunConfig::new(pp, Geometry::Line, InitialProfile::bump(1.0, height), 16.0);
        cfg.h = Some(0.01);
        cfg.half_width = Some(8.0);
        cfg.absorption = absorption;
        cfg
    };
    let r = comparison_run(&make(1.0, true), &make(1.5, true))?;
    let mut ok = note(d, r.max_violation <= 1e-12, format!("bump vs 1.5 bump violation {:.1e}", r.max_violation));
    let r = comparison_run(&make(1.0, true), &make(1.0, false))?;
    ok &= note(d, r.max_violation <= 1e-12, format!("absorption on vs off violation {:.1e}", r.max_violation));
    Ok(ok)
}

fn mass_balance_check(d: &mut Vec<String>) -> Result<bool> {
    let runs: [(&str, ScenarioFn); 6] = [
        ("decay", decay_run),
        ("radial-gradient", radial_gradient_run),
        ("dichotomy q=3", diffusive_run),
        ("localization", localized_run),
        ("intermediate", intermediate_run),
        ("deadcore", deadcore_run),
    ];
    let mut ok = true;
    for (name, f) in runs {
        let r = mass_balance_residual(&f()?.series);
        ok &= note(d, r <= 1e-3, format!("{name} {r:.1e}"));
    }
    Ok(ok)
}

/// One proof check, and whether the battery requires it to pass. The
/// bracket scan and the full-window `S₁` margin are reported for
/// information only.
pub struct ProofCheck {
    pub report: ProofCheckReport,
    pub required: bool,
}

fn named(mut report: ProofCheckReport, name: String) -> ProofCheckReport {
    report.name = name;
    report
}

/// Every proof-machinery check run by criterion 12.
pub fn proof_checks() -> Result<Vec<ProofCheck>> {
    let mut out = Vec::new();
    let mut push = |report, required| out.push(ProofCheck { report, required });
    for q in [1.1, 1.5, 2.0, 2.5, 3.0, 4.0] {
        let grid = b22_grid(q);
        push(named(check_b22(q, &grid)?, format!("b22 q={q}")), true);
        push(named(check_r2_bracket(q, &grid), format!("r2_bracket q={q}")), false);
    }

    let alpha = alpha_p(3.0, 1);
    for eps in [1e-1, 1e-2, 1e-3] {
        let (mu, r) = search_mu(1.0, eps, 0.75, alpha, 200)?;
        push(named(r, format!("mu_search eps={eps} mu={mu}")), true);
    }

    let (c, m, sigma) = (2.0_f64, 2.5_f64, 2.0 / 3.0);
    let theta = (sigma / c).powf(1.0 / (m - 1.0));
    let mut r = verify_power_supersolution(c, 0.0, m, sigma, theta, 1.0)?;
    r.pass = r.worst_margin.abs() <= 1e-12;
    push(named(r, "supersolution_equality".into()), true);

    let omega_ref = omega_eps(&ProblemParams::new(3.0, 2.5, 1, 1e-3)?.with_gamma(0.75)?);
    for eps in [1e-3, 1e-4, 1e-6] {
        for cst in [0.5, 1.0, 2.0] {
            let (c, dd, m, sigma, theta) = s1_parameters(3.0, eps, 0.75, cst, cst);
            let t_half = (1.0 / 3.0) * eps.powf(-0.25);
            let r = verify_power_supersolution(c, dd, m, sigma, theta, t_half)?;
            push(named(r, format!("s1 eps={eps} C={cst} T=eps^-1/4/p")), true);
            let r = verify_power_supersolution(c, dd, m, sigma, theta, eps.powf(-0.25))?;
            push(named(r, format!("s1 eps={eps} C={cst} T=eps^-1/4")), false);
            for q in [2.0, 2.5] {
                let pp = ProblemParams::new(3.0, q, 1, eps)?.with_gamma(0.75)?;
                let om = omega_eps(&pp);
                if om > omega_ref * (1.0 + 1e-12) {
                    continue;
                }
                let (c, dd, m, sigma, theta) = s2_parameters(&pp, cst);
                let r = verify_power_supersolution(c, dd, m, sigma, theta, 0.5 / om.sqrt())?;
                push(named(r, format!("s2 q={q} eps={eps} C={cst} T=omega^-1/2/2")), true);
            }
        }
    }

    let choices = [
        PhiChoice::Phi1 { k: 1.5, alpha: 0.5 },
        PhiChoice::Phi1 { k: 3.0, alpha: alpha_p(4.0, 2) },
        PhiChoice::Phi2 { beta: 0.6 },
        PhiChoice::Phi2 { beta: beta_pq(3.0, 2.5, 1) },
    ];
    push(check_phi_derivatives(&choices, 50, 1e-6)?, true);

    let samples: Vec<(f64, f64)> = log_grid(1e-3, 10.0, 20)
        .into_iter()
        .flat_map(|g| log_grid(1e-3, 10.0, 20).into_iter().map(move |v| (g, v)))
        .collect();
    for (p, q) in [(3.0, 1.5), (3.0, 2.5), (4.0, 2.0)] {
        push(named(check_phi2_leading_r1(p, q, 1, &samples)?, format!("phi2_leading_r1 p={p} q={q}")), true);
    }
    Ok(out)
}

fn bernstein_check(d: &mut Vec<String>) -> Result<bool> {
    let checks = proof_checks()?;
    let mut ok = true;
    let mut required = 0;
    for c in &checks {
        if c.required {
            required += 1;
            if !c.report.pass {
                ok = note(d, false, format!("{} worst margin {:.2e}", c.report.name, c.report.worst_margin));
            }
        }
    }
    let worst = |prefix: &str| {
        checks
            .iter()
            .filter(|c| c.required && c.report.name.starts_with(prefix))
            .map(|c| c.report.worst_margin)
            .fold(f64::INFINITY, f64::min)
    };
    d.push(format!("{required} required checks"));
    d.push(format!("b22 worst relative margin {:.2e}", worst("b22")));
    d.push(format!("S1 worst margin {:.2e} on T <= eps^-1/4/p", worst("s1")));
    d.push(format!("S2 worst margin {:.2e}", worst("s2")));
    d.push(format!("phi FD headroom {:.2e}", worst("phi_derivatives")));
    Ok(ok)
}
