use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::State;

pub const CSV_HEADER: &str = "t,sup_excess,l1_excess,grad_sup,grad_alpha,grad_beta,rho,absorbed,boundary_out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub t: f64,
    pub sup_excess: f64,
    pub l1_excess: f64,
    pub grad_sup: f64,
    /// `max |∇(u^{α_p})|`
    pub grad_alpha: f64,
    /// `max |∇(u^{β_{p,q}})|`
    pub grad_beta: f64,
    /// `(θ, max |∇(u^θ)|)` for every requested exponent, in request order.
    pub grad_power: Vec<(f64, f64)>,
    pub support_radius: f64,
    pub absorbed_mass: f64,
    pub boundary_out: f64,
}

impl Observables {
    /// Looks up a composite gradient recorded for `theta`.
    pub fn grad_power_at(&self, theta: f64) -> Option<f64> {
        self.grad_power
            .iter()
            .find(|(th, _)| (th - theta).abs() <= 1e-12)
            .map(|&(_, v)| v)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub records: Vec<Observables>,
}

impl TimeSeries {
    pub fn push(&mut self, obs: Observables) {
        self.records.push(obs);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.column(|o| o.t)
    }

    pub fn column(&self, f: impl Fn(&Observables) -> f64) -> Vec<f64> {
        self.records.iter().map(f).collect()
    }

    /// Record closest to `t` in log-time.
    pub fn at(&self, t: f64) -> Option<&Observables> {
        self.records.iter().min_by(|a, b| {
            let da = (a.t.ln() - t.ln()).abs();
            let db = (b.t.ln() - t.ln()).abs();
            da.total_cmp(&db)
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * (self.records.len() + 1));
        s.push_str(CSV_HEADER);
        s.push('\n');
        for o in &self.records {
            let cols = [
                o.t,
                o.sup_excess,
                o.l1_excess,
                o.grad_sup,
                o.grad_alpha,
                o.grad_beta,
                o.support_radius,
                o.absorbed_mass,
                o.boundary_out,
            ];
            let row: Vec<String> = cols.iter().map(|v| format!("{v:.16e}")).collect();
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }

    /// Parses the output of [`TimeSeries::to_csv`]. Composite gradients
    /// other than the two fixed columns are not stored in the file.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Config("empty series file".into()))?;
        let normalized: String = header.chars().filter(|c| !c.is_whitespace()).collect();
        if normalized != CSV_HEADER {
            return Err(Error::Config(format!("unexpected series header `{header}`")));
        }
        let mut records = Vec::new();
        for (k, line) in lines.enumerate() {
            let vals: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("series row {}: {e}", k + 1)))?;
            if vals.len() != 9 {
                return Err(Error::Config(format!(
                    "series row {} has {} columns, expected 9",
                    k + 1,
                    vals.len()
                )));
            }
            records.push(Observables {
                t: vals[0],
                sup_excess: vals[1],
                l1_excess: vals[2],
                grad_sup: vals[3],
                grad_alpha: vals[4],
                grad_beta: vals[5],
                grad_power: Vec::new(),
                support_radius: vals[6],
                absorbed_mass: vals[7],
                boundary_out: vals[8],
            });
        }
        if records.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(Error::Config("series times must be strictly increasing".into()));
        }
        Ok(Self { records })
    }
}

/// `max_i |(u_{i+1}^θ − u_i^θ)/h|` over all faces of the raw field.
pub fn composite_gradient(state: &State, theta: f64) -> f64 {
    let u = &state.values;
    let h = state.grid.h;
    if theta == 1.0 {
        return max_face_gradient(u, h);
    }
    let mut prev = u[0].powf(theta);
    let mut m: f64 = 0.0;
    for &v in &u[1..] {
        let cur = v.powf(theta);
        m = m.max((cur - prev).abs());
        prev = cur;
    }
    m / h
}

fn max_face_gradient(u: &[f64], h: f64) -> f64 {
    u.windows(2).fold(0.0f64, |m, w| m.max((w[1] - w[0]).abs())) / h
}

/// Largest `|centre|` whose excess exceeds `rel_tol` times the initial peak
/// excess, plus `h/2`; zero when no cell qualifies.
pub fn support_radius(state: &State, rel_tol: f64) -> f64 {
    let threshold = rel_tol * state.reference_sup;
    if state.reference_sup <= 0.0 {
        return 0.0;
    }
    let mut r: Option<f64> = None;
    for (i, &v) in state.values.iter().enumerate() {
        if v - state.floor > threshold {
            let ri = state.grid.radius(i);
            r = Some(r.map_or(ri, |m: f64| m.max(ri)));
        }
    }
    r.map_or(0.0, |r| r + 0.5 * state.grid.h)
}

/// Snapshot of all observables. `thetas[0]` and `thetas[1]` fill the
/// `grad_alpha` and `grad_beta` columns.
pub fn observe(state: &State, thetas: &[f64], rel_tol: f64) -> Observables {
    let floor = state.floor;
    let sup_excess = state.values.iter().fold(0.0f64, |m, v| m.max(v - floor));
    let grad_power: Vec<(f64, f64)> = thetas
        .iter()
        .map(|&th| (th, composite_gradient(state, th)))
        .collect();
    let pick = |k: usize| grad_power.get(k).map_or(0.0, |&(_, v)| v);
    Observables {
        t: state.time,
        sup_excess,
        l1_excess: state.excess_mass(),
        grad_sup: max_face_gradient(&state.values, state.grid.h),
        grad_alpha: pick(0),
        grad_beta: pick(1),
        support_radius: support_radius(state, rel_tol),
        absorbed_mass: state.absorbed_mass,
        boundary_out: state.boundary_out,
        grad_power,
    }
}

/// `max_t |l1(t) + absorbed(t) + out(t) − l1(0)| / l1(0)`; zero when the
/// initial excess mass vanishes.
pub fn mass_balance_residual(series: &TimeSeries) -> f64 {
    let Some(first) = series.records.first() else {
        return 0.0;
    };
    let m0 = first.l1_excess;
    if m0 == 0.0 {
        return 0.0;
    }
    series
        .records
        .iter()
        .map(|o| (o.l1_excess + o.absorbed_mass + o.boundary_out - m0).abs() / m0)
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::ProblemParams;
    use crate::grid::{Geometry, Grid};

    fn state_from(values: Vec<f64>, h: f64) -> State {
        let pp = ProblemParams::new(3.0, 2.0, 1, 1e-3).unwrap();
        let grid = Grid::new(Geometry::Line, h, h * values.len() as f64 / 2.0).unwrap();
        State::new(pp, grid, &values, 0.0, true).unwrap()
    }

    #[test]
    fn constant_field_has_no_gradients() {
        let s = state_from(vec![0.0; 32], 0.1);
        let o = observe(&s, &[0.5, 0.5, 1.0], 1e-6);
        assert_eq!(o.grad_sup, 0.0);
        assert!(o.grad_power.iter().all(|&(_, v)| v == 0.0));
        assert_eq!(o.support_radius, 0.0);
    }

    #[test]
    fn theta_one_matches_grad_sup() {
        let vals: Vec<f64> = (0..40).map(|i| ((i as f64) * 0.3).sin().abs()).collect();
        let s = state_from(vals, 0.05);
        let o = observe(&s, &[1.0, 0.5], 1e-6);
        assert_eq!(o.grad_power_at(1.0), Some(o.grad_sup));
    }

    #[test]
    fn csv_round_trip() {
        let vals: Vec<f64> = (0..40).map(|i| if (10..30).contains(&i) { 1.0 } else { 0.0 }).collect();
        let s = state_from(vals, 0.05);
        let mut ts = TimeSeries::default();
        let mut o = observe(&s, &[0.5, 0.6], 1e-6);
        ts.push(o.clone());
        o.t = 1.0 / 3.0;
        ts.push(o);
        let text = ts.to_csv();
        assert!(text.starts_with(CSV_HEADER));
        let back = TimeSeries::from_csv(&text).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in back.records.iter().zip(&ts.records) {
            assert_eq!(a.t, b.t);
            assert_eq!(a.l1_excess, b.l1_excess);
            assert_eq!(a.grad_beta, b.grad_beta);
            assert_eq!(a.support_radius, b.support_radius);
        }
        assert!(TimeSeries::from_csv("t,x\n1,2\n").is_err());
    }

    #[test]
    fn residual_zero_for_empty_mass() {
        let mut ts = TimeSeries::default();
        let s = state_from(vec![0.0; 32], 0.1);
        ts.push(observe(&s, &[0.5, 0.5], 1e-6));
        assert_eq!(mass_balance_residual(&ts), 0.0);
    }
}
