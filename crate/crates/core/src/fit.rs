//! Least-squares rate fits on recorded series and the verdict table.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{predicted_laws, L1Law, ProblemParams, RateLaw, Regime, SupportLaw};
use crate::observe::TimeSeries;

pub const DEFAULT_TOLERANCE: f64 = 0.1;
pub const DEFAULT_OCTAVES: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Law {
    Power { exponent: f64, amplitude: f64 },
    LogGrowth { slope: f64, intercept: f64 },
    Plateau { level: f64, relative_variation: f64, pass: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub law: Law,
    pub r2: f64,
    pub window: (f64, f64),
}

impl FitResult {
    /// Slope of the fitted line (exponent, log-growth slope, or 0 for a plateau).
    pub fn slope(&self) -> f64 {
        match self.law {
            Law::Power { exponent, .. } => exponent,
            Law::LogGrowth { slope, .. } => slope,
            Law::Plateau { .. } => 0.0,
        }
    }
}

/// Samples with `t` inside the window, a relative slack of 1e-9 on each end.
fn select(t: &[f64], y: &[f64], window: (f64, f64)) -> Vec<(f64, f64)> {
    let (lo, hi) = window;
    t.iter()
        .zip(y)
        .filter(|(&ti, _)| ti >= lo * (1.0 - 1e-9) && ti <= hi * (1.0 + 1e-9))
        .map(|(&a, &b)| (a, b))
        .collect()
}

fn need(samples: usize, min: usize, what: &str) -> Result<()> {
    if samples < min {
        return Err(Error::SeriesTooShort(format!(
            "{what} needs at least {min} samples in the window, got {samples}"
        )));
    }
    Ok(())
}

/// Ordinary least squares `y = a + b x`; returns `(b, a, r²)`.
fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    let r2 = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    (b, a, r2)
}

/// Fits `y = A t^k` by least squares on `(ln t, ln y)`.
pub fn fit_power(t: &[f64], y: &[f64], window: (f64, f64)) -> Result<FitResult> {
    let pts = select(t, y, window);
    need(pts.len(), 6, "power fit")?;
    if let Some(&(ti, yi)) = pts.iter().find(|(ti, yi)| !(*yi > 0.0) || !(*ti > 0.0)) {
        return Err(Error::NonPositiveSample { t: ti, value: yi });
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (b, a, r2) = ols(&xs, &ys);
    Ok(FitResult {
        law: Law::Power {
            exponent: b,
            amplitude: a.exp(),
        },
        r2,
        window,
    })
}

/// Fits `y = a + b ln t`.
pub fn fit_log_growth(t: &[f64], y: &[f64], window: (f64, f64)) -> Result<FitResult> {
    let pts = select(t, y, window);
    need(pts.len(), 6, "log-growth fit")?;
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let (b, a, r2) = ols(&xs, &ys);
    Ok(FitResult {
        law: Law::LogGrowth {
            slope: b,
            intercept: a,
        },
        r2,
        window,
    })
}

/// Regresses `ln y` on `ln X(t)`; a slope of 1 means `y ∝ X`.
pub fn fit_composite(
    t: &[f64],
    y: &[f64],
    window: (f64, f64),
    abscissa: impl Fn(f64) -> f64,
) -> Result<FitResult> {
    let pts: Vec<(f64, f64)> = select(t, y, window)
        .into_iter()
        .map(|(ti, yi)| (abscissa(ti), yi))
        .collect();
    need(pts.len(), 6, "composite fit")?;
    if let Some(&(xi, yi)) = pts.iter().find(|(xi, yi)| !(*yi > 0.0 && *xi > 0.0)) {
        return Err(Error::NonPositiveSample { t: xi, value: yi });
    }
    let lx: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (b, a, r2) = ols(&lx, &ly);
    Ok(FitResult {
        law: Law::Power {
            exponent: b,
            amplitude: a.exp(),
        },
        r2,
        window,
    })
}

/// Passes iff `Σ|Δy| / |y_last| ≤ rel_tol` over the window. `r2` reports
/// `1 − CV²` clipped to `[0, 1]`.
pub fn plateau_test(t: &[f64], y: &[f64], window: (f64, f64), rel_tol: f64) -> Result<FitResult> {
    let pts = select(t, y, window);
    need(pts.len(), 4, "plateau test")?;
    let level = pts.last().expect("non-empty").1;
    let total: f64 = pts.windows(2).map(|w| (w[1].1 - w[0].1).abs()).sum();
    let relative_variation = if level != 0.0 {
        total / level.abs()
    } else if total == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let n = pts.len() as f64;
    let mean = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let var = pts.iter().map(|p| (p.1 - mean).powi(2)).sum::<f64>() / n;
    let r2 = if mean != 0.0 {
        (1.0 - var / (mean * mean)).clamp(0.0, 1.0)
    } else if var == 0.0 {
        1.0
    } else {
        0.0
    };
    Ok(FitResult {
        law: Law::Plateau {
            level,
            relative_variation,
            pass: relative_variation <= rel_tol,
        },
        r2,
        window,
    })
}

/// `[t_last / 2^octaves, t_last]`.
pub fn last_octaves(series: &TimeSeries, octaves: f64) -> Result<(f64, f64)> {
    let last = series
        .records
        .last()
        .ok_or_else(|| Error::SeriesTooShort("empty series".into()))?
        .t;
    Ok((last / 2f64.powf(octaves), last))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub quantity: String,
    pub predicted: String,
    pub fitted: f64,
    pub r2: f64,
    pub window: (f64, f64),
    pub tolerance: f64,
    pub pass: bool,
}

impl Verdict {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("verdicts serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerdictOptions {
    pub tolerance: f64,
    pub octaves: f64,
    /// Cell width, for the bounded-support test `ϱ(end) − ϱ(end/32) ≤ 3h`.
    pub h: f64,
    /// False for pure-diffusion runs, which follow the Barenblatt laws.
    pub absorption: bool,
}

impl VerdictOptions {
    pub fn new(h: f64, absorption: bool) -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            octaves: DEFAULT_OCTAVES,
            h,
            absorption,
        }
    }
}

fn failed(quantity: &str, predicted: String, window: (f64, f64), tolerance: f64) -> Verdict {
    Verdict {
        quantity: quantity.into(),
        predicted,
        fitted: f64::NAN,
        r2: 0.0,
        window,
        tolerance,
        pass: false,
    }
}

fn rate_verdict(
    quantity: &str,
    t: &[f64],
    y: &[f64],
    window: (f64, f64),
    predicted: f64,
    tol: f64,
    sharp: bool,
) -> Verdict {
    let label = if sharp {
        format!("t^{predicted:.6}")
    } else {
        format!("<= t^{predicted:.6}")
    };
    match fit_power(t, y, window) {
        Ok(f) => {
            let k = f.slope();
            let pass = if sharp {
                (k - predicted).abs() <= tol
            } else {
                k <= predicted + tol
            };
            Verdict {
                quantity: quantity.into(),
                predicted: label,
                fitted: k,
                r2: f.r2,
                window,
                tolerance: tol,
                pass,
            }
        }
        Err(_) => failed(quantity, label, window, tol),
    }
}

fn composite_verdict(
    quantity: &str,
    t: &[f64],
    y: &[f64],
    window: (f64, f64),
    label: String,
    abscissa: impl Fn(f64) -> f64,
) -> Verdict {
    let tol = 0.2;
    match fit_composite(t, y, window, abscissa) {
        Ok(f) => Verdict {
            quantity: quantity.into(),
            predicted: label,
            fitted: f.slope(),
            r2: f.r2,
            window,
            tolerance: tol,
            pass: (f.slope() - 1.0).abs() <= tol,
        },
        Err(_) => failed(quantity, label, window, tol),
    }
}

/// One verdict per law of [`predicted_laws`]; the law table is selected
/// from the regime alone.
pub fn verdict(params: &ProblemParams, series: &TimeSeries, opts: &VerdictOptions) -> Result<Vec<Verdict>> {
    let laws = predicted_laws(params)?;
    let ex = params.exponents();
    let window = last_octaves(series, opts.octaves)?;
    let first = series.records.first().map_or(0.0, |o| o.t);
    let start = if first > 0.0 { first } else { series.records.get(1).map_or(0.0, |o| o.t) };
    if !(start > 0.0) || window.0 < start * (1.0 - 1e-9) {
        return Err(Error::SeriesTooShort(format!(
            "verdicts need {} octaves of recorded data; rerun with t_end >= {}",
            opts.octaves,
            start.max(f64::MIN_POSITIVE) * 2f64.powf(opts.octaves)
        )));
    }
    let tol = opts.tolerance;
    let t = series.times();
    let sup = series.column(|o| o.sup_excess);
    let grad = series.column(|o| o.grad_sup);
    let rho = series.column(|o| o.support_radius);
    let l1 = series.column(|o| o.l1_excess);
    let nf = f64::from(params.n);
    let mut out = Vec::new();

    if !opts.absorption {
        out.push(rate_verdict("sup_excess", &t, &sup, window, -nf * ex.eta, tol, true));
        out.push(rate_verdict("support_radius", &t, &rho, window, ex.eta, tol, true));
        out.push(plateau(&t, &l1, window, "l1_excess"));
        return Ok(out);
    }

    let diffusion = laws.regime == Regime::DiffusionDominated;
    let sup_rate = match laws.sup_decay {
        RateLaw::Single(e) => e,
        r @ RateLaw::CriticalMass { .. } => r.exponent(),
    };
    out.push(rate_verdict("sup_excess", &t, &sup, window, sup_rate, tol, diffusion));
    out.push(rate_verdict("grad_sup", &t, &grad, window, laws.grad_decay.exponent(), tol, false));

    match laws.support {
        SupportLaw::Bounded => {
            let end = window.1;
            let early = series.at(end / 32.0).map_or(0.0, |o| o.support_radius);
            let late = series.records.last().map_or(0.0, |o| o.support_radius);
            let growth = late - early;
            out.push(Verdict {
                quantity: "support_radius".into(),
                predicted: "bounded".into(),
                fitted: growth,
                r2: 1.0,
                window: (end / 32.0, end),
                tolerance: 3.0 * opts.h,
                pass: growth <= 3.0 * opts.h,
            });
        }
        SupportLaw::Log => {
            let label = "<= C (1 + ln t)".to_string();
            let tol_log = 0.2;
            match fit_composite(&t, &rho, window, |s| 1.0 + s.ln()) {
                Ok(f) => out.push(Verdict {
                    quantity: "support_radius".into(),
                    predicted: label,
                    fitted: f.slope(),
                    r2: f.r2,
                    window,
                    tolerance: tol_log,
                    pass: f.slope() <= 1.0 + tol_log,
                }),
                Err(_) => out.push(failed("support_radius", label, window, tol_log)),
            }
        }
        SupportLaw::Power(a) => {
            out.push(rate_verdict("support_radius", &t, &rho, window, a, tol, diffusion));
        }
    }

    match laws.l1 {
        L1Law::Power(e) => out.push(rate_verdict("l1_excess", &t, &l1, window, e, tol, false)),
        L1Law::PowerLog { power, log_power } => out.push(composite_verdict(
            "l1_excess",
            &t,
            &l1,
            window,
            format!("t^{power:.6} (ln t)^{log_power:.6}"),
            move |s| s.powf(power) * s.ln().powf(log_power),
        )),
        L1Law::InverseLogPower(k) => out.push(composite_verdict(
            "l1_excess",
            &t,
            &l1,
            window,
            format!("(ln t)^{k:.6}"),
            move |s| s.ln().powf(k),
        )),
        L1Law::PositiveLimit => out.push(plateau(&t, &l1, window, "l1_excess")),
    }
    Ok(out)
}

fn plateau(t: &[f64], y: &[f64], window: (f64, f64), quantity: &str) -> Verdict {
    let tol = 0.05;
    // the last two octaves of the window
    let w = (window.1 / 4.0, window.1);
    match plateau_test(t, y, w, tol) {
        Ok(f) => {
            let (level, variation, pass) = match f.law {
                Law::Plateau {
                    level,
                    relative_variation,
                    pass,
                } => (level, relative_variation, pass),
                _ => unreachable!("plateau_test returns a plateau"),
            };
            Verdict {
                quantity: quantity.into(),
                predicted: "positive limit".into(),
                fitted: variation,
                r2: f.r2,
                window: w,
                tolerance: tol,
                pass: pass && level > 0.0,
            }
        }
        Err(_) => failed(quantity, "positive limit".into(), w, tol),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometric(n: usize, t0: f64) -> Vec<f64> {
        (0..n).map(|j| t0 * 2f64.powf(j as f64 / 4.0)).collect()
    }

    #[test]
    fn exact_power_law() {
        let t = geometric(10, 1.0);
        let y: Vec<f64> = t.iter().map(|s| 5.0 * s.powf(-0.25)).collect();
        let f = fit_power(&t, &y, (1.0, 1e9)).unwrap();
        assert!((f.slope() + 0.25).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        match f.law {
            Law::Power { amplitude, .. } => assert!((amplitude - 5.0).abs() < 1e-10),
            _ => panic!(),
        }
    }

    #[test]
    fn corrected_power_law_on_late_window() {
        let t = geometric(40, 1.0);
        let y: Vec<f64> = t.iter().map(|s| s.powf(-0.5) * (1.0 + 1.0 / s)).collect();
        let f = fit_power(&t, &y, (16.0, 256.0)).unwrap();
        assert!((f.slope() + 0.5).abs() < 0.03, "{}", f.slope());
    }

    #[test]
    fn log_growth_exact() {
        let t = geometric(12, 1.0);
        let y: Vec<f64> = t.iter().map(|s| 3.0 + 2.0 * s.ln()).collect();
        assert!((fit_log_growth(&t, &y, (1.0, 1e9)).unwrap().slope() - 2.0).abs() < 1e-12);
        let c = vec![4.0; t.len()];
        assert!(fit_log_growth(&t, &c, (1.0, 1e9)).unwrap().slope().abs() < 1e-12);
    }

    #[test]
    fn plateau_cases() {
        let t = geometric(12, 1.0);
        let c = vec![2.0; t.len()];
        let f = plateau_test(&t, &c, (1.0, 1e9), 1e-9).unwrap();
        assert!(matches!(f.law, Law::Plateau { pass: true, .. }));
        let y: Vec<f64> = t.iter().map(|s| 1.0 / s).collect();
        let f = plateau_test(&t, &y, (2.0, 4.0), 0.05).unwrap();
        assert!(matches!(f.law, Law::Plateau { pass: false, .. }));
    }

    #[test]
    fn short_or_nonpositive_series_rejected() {
        let t = geometric(5, 1.0);
        let y = vec![1.0; 5];
        assert!(matches!(fit_power(&t, &y, (1.0, 10.0)), Err(Error::SeriesTooShort(_))));
        let t = geometric(8, 1.0);
        let mut y = vec![1.0; 8];
        y[3] = 0.0;
        assert!(matches!(fit_power(&t, &y, (1.0, 10.0)), Err(Error::NonPositiveSample { .. })));
    }

    #[test]
    fn composite_slope_one() {
        let t = geometric(40, 2.0);
        let y: Vec<f64> = t.iter().map(|s| 0.7 * s.powf(-2.0) * s.ln().powf(3.0)).collect();
        let f = fit_composite(&t, &y, (16.0, 1e9), |s| s.powf(-2.0) * s.ln().powf(3.0)).unwrap();
        assert!((f.slope() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn json_line_shape() {
        let v = Verdict {
            quantity: "sup_excess".into(),
            predicted: "t^-0.25".into(),
            fitted: -0.26,
            r2: 0.99,
            window: (32.0, 256.0),
            tolerance: 0.1,
            pass: true,
        };
        let line = v.to_json_line();
        assert!(line.starts_with("{\"quantity\":\"sup_excess\""));
        assert!(line.ends_with("\"pass\":true}"));
    }
}
