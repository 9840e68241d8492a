//! Derivative-free maximisation of a (CRN-deterministic) objective over a box.

use crate::error::{Error, Result};
use crate::model::ParameterBox;
use crate::rng::{Purpose, StreamKey};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Search strategy for [`maximize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    /// Exhaustive scan of `lo + i·step` in every coordinate (upper bound included).
    Grid { step: f64 },
    /// Grid scan, then golden-section refinement of each coordinate in turn
    /// (two cyclic sweeps) within one grid step of the best point.
    GridThenGolden { step: f64, tol: f64 },
    /// Nelder–Mead from `restarts` Latin-hypercube starting points.
    NelderMead {
        restarts: usize,
        #[serde(default = "default_max_evals")]
        max_evals: usize,
        #[serde(default = "default_nm_tol")]
        tol: f64,
    },
}

fn default_max_evals() -> usize {
    400
}

fn default_nm_tol() -> f64 {
    1e-6
}

impl Optimizer {
    /// Grid-then-golden for `d ≤ 2`, five Nelder–Mead restarts otherwise.
    pub fn default_for(bounds: &ParameterBox) -> Self {
        let d = bounds.dim();
        let width = (0..d).map(|i| bounds.width(i)).fold(f64::INFINITY, f64::min);
        match d {
            1 => Optimizer::GridThenGolden {
                step: width / 60.0,
                tol: 1e-4 * width,
            },
            2 => Optimizer::GridThenGolden {
                step: width / 20.0,
                tol: 1e-3 * width,
            },
            _ => Optimizer::NelderMead {
                restarts: 5,
                max_evals: default_max_evals(),
                tol: default_nm_tol(),
            },
        }
    }

    /// Parse `grid:STEP`, `grid_then_golden:STEP[:TOL]` or `nelder_mead[:RESTARTS]`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| -> Result<Option<f64>> {
            parts
                .get(i)
                .map(|v| {
                    v.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite() && *x > 0.0)
                        .ok_or_else(|| Error::config("optimizer", format!("bad number `{v}` in `{s}`")))
                })
                .transpose()
        };
        let need = |v: Option<f64>| v.ok_or_else(|| Error::config("optimizer", format!("`{s}` needs a step")));
        match parts[0] {
            "grid" => Ok(Optimizer::Grid { step: need(num(1)?)? }),
            "grid_then_golden" => {
                let step = need(num(1)?)?;
                Ok(Optimizer::GridThenGolden {
                    step,
                    tol: num(2)?.unwrap_or(step * 1e-3),
                })
            }
            "nelder_mead" => Ok(Optimizer::NelderMead {
                restarts: num(1)?.map_or(5, |r| r as usize).max(1),
                max_evals: default_max_evals(),
                tol: default_nm_tol(),
            }),
            other => Err(Error::config("optimizer", format!("unknown optimizer `{other}`"))),
        }
    }
}

/// One objective evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub theta: Vec<f64>,
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub value: f64,
    /// Monte Carlo standard-error proxy (0 for exact objectives).
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub se: f64,
}

/// Output of [`maximize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Maximum {
    pub theta_hat: Vec<f64>,
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub value: f64,
    /// Every evaluation in order.
    pub trace: Vec<TracePoint>,
    /// Evaluations returning −∞ or NaN.
    pub failures: usize,
}

/// Grid points `lo, lo + step, …` up to `hi`, with `hi` appended when the
/// step does not land on it.
pub fn grid_points(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    let mut pts: Vec<f64> = (0..=count).map(|i| (lo + i as f64 * step).min(hi)).collect();
    if hi - pts[count] > 1e-9 * (hi - lo).max(1.0) {
        pts.push(hi);
    }
    pts
}

/// Maximise `objective` (returning `(value, se)`) over `bounds`.
///
/// The returned point is the first trace entry attaining the maximal value.
/// `seed` drives the Nelder–Mead starting design only.
pub fn maximize<F>(objective: F, bounds: &ParameterBox, optimizer: &Optimizer, seed: u64) -> Result<Maximum>
where
    F: Fn(&[f64]) -> (f64, f64) + Sync,
{
    let mut trace = Vec::new();
    match optimizer {
        Optimizer::Grid { step } => {
            check_step(*step)?;
            grid_scan(&objective, bounds, *step, &mut trace)?;
        }
        Optimizer::GridThenGolden { step, tol } => {
            check_step(*step)?;
            grid_scan(&objective, bounds, *step, &mut trace)?;
            let mut x = best(&trace).theta.clone();
            for _sweep in 0..2 {
                for i in 0..bounds.dim() {
                    let a = (x[i] - step).max(bounds.lower(i));
                    let b = (x[i] + step).min(bounds.upper(i));
                    golden(&objective, &mut x, i, a, b, *tol, &mut trace);
                    x = best(&trace).theta.clone();
                }
            }
        }
        Optimizer::NelderMead { restarts, max_evals, tol } => {
            let starts = latin_hypercube(bounds, (*restarts).max(1), seed);
            for s in starts {
                nelder_mead(&objective, bounds, s, *max_evals, *tol, &mut trace);
            }
        }
    }
    let failures = trace.iter().filter(|t| !(t.value > f64::NEG_INFINITY)).count();
    if failures == trace.len() {
        return Err(Error::EstimationFailed {
            evaluations: trace.len(),
            failures,
        });
    }
    let b = best(&trace).clone();
    Ok(Maximum {
        theta_hat: b.theta,
        value: b.value,
        trace,
        failures,
    })
}

fn check_step(step: f64) -> Result<()> {
    if step.is_finite() && step > 0.0 {
        Ok(())
    } else {
        Err(Error::config("optimizer.step", format!("grid step must be positive, got {step}")))
    }
}

/// First entry with the largest value (NaN counts as −∞).
fn best(trace: &[TracePoint]) -> &TracePoint {
    let mut b = &trace[0];
    for t in trace {
        if t.value > b.value || (b.value.is_nan() && !t.value.is_nan()) {
            b = t;
        }
    }
    b
}

fn grid_scan<F>(objective: &F, bounds: &ParameterBox, step: f64, trace: &mut Vec<TracePoint>) -> Result<()>
where
    F: Fn(&[f64]) -> (f64, f64) + Sync,
{
    let axes: Vec<Vec<f64>> = (0..bounds.dim())
        .map(|i| grid_points(bounds.lower(i), bounds.upper(i), step))
        .collect();
    let total: usize = axes.iter().map(Vec::len).product();
    if total > 5_000_000 {
        return Err(Error::config("optimizer.step", format!("grid of {total} points is too large")));
    }
    // row-major: the last coordinate varies fastest
    let points: Vec<Vec<f64>> = (0..total)
        .map(|mut idx| {
            let mut p = vec![0.0; axes.len()];
            for (i, axis) in axes.iter().enumerate().rev() {
                p[i] = axis[idx % axis.len()];
                idx /= axis.len();
            }
            p
        })
        .collect();
    let values: Vec<(f64, f64)> = points.par_iter().map(|p| objective(p)).collect();
    trace.extend(points.into_iter().zip(values).map(|(theta, (value, se))| TracePoint { theta, value, se }));
    Ok(())
}

fn eval<F: Fn(&[f64]) -> (f64, f64)>(objective: &F, x: &[f64], trace: &mut Vec<TracePoint>) -> f64 {
    let (value, se) = objective(x);
    trace.push(TracePoint {
        theta: x.to_vec(),
        value,
        se,
    });
    if value.is_nan() {
        f64::NEG_INFINITY
    } else {
        value
    }
}

fn golden<F>(objective: &F, x: &mut [f64], i: usize, mut a: f64, mut b: f64, tol: f64, trace: &mut Vec<TracePoint>)
where
    F: Fn(&[f64]) -> (f64, f64),
{
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut at = |t: f64, trace: &mut Vec<TracePoint>| {
        x[i] = t;
        eval(objective, x, trace)
    };
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = at(c, trace);
    let mut fd = at(d, trace);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = at(c, trace);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = at(d, trace);
        }
    }
}

fn latin_hypercube(bounds: &ParameterBox, k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = StreamKey::new(seed, Purpose::Optimizer).rng();
    let d = bounds.dim();
    let mut pts = vec![vec![0.0; d]; k];
    for i in 0..d {
        let mut strata: Vec<usize> = (0..k).collect();
        strata.shuffle(&mut rng);
        for (p, s) in pts.iter_mut().zip(strata) {
            let u = (s as f64 + rng.random::<f64>()) / k as f64;
            p[i] = bounds.lower(i) + u * bounds.width(i);
        }
    }
    pts
}

fn nelder_mead<F>(objective: &F, bounds: &ParameterBox, start: Vec<f64>, max_evals: usize, tol: f64, trace: &mut Vec<TracePoint>)
where
    F: Fn(&[f64]) -> (f64, f64),
{
    let d = start.len();
    // minimise the negated objective; points are projected onto the box
    let f = |x: &mut Vec<f64>, trace: &mut Vec<TracePoint>| {
        bounds.clamp(x);
        -eval(objective, x, trace)
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    let mut x0 = start;
    let f0 = f(&mut x0, trace);
    simplex.push((x0.clone(), f0));
    for i in 0..d {
        let mut x = x0.clone();
        let h = 0.1 * bounds.width(i);
        x[i] = if x[i] + h <= bounds.upper(i) { x[i] + h } else { x[i] - h };
        let fx = f(&mut x, trace);
        simplex.push((x, fx));
    }
    let mut evals = d + 1;
    let order = |s: &mut Vec<(Vec<f64>, f64)>| s.sort_by(|a, b| a.1.total_cmp(&b.1));
    while evals < max_evals {
        order(&mut simplex);
        let spread = simplex[d].1 - simplex[0].1;
        let size = simplex
            .iter()
            .skip(1)
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if (spread.is_finite() && spread.abs() <= tol) && size <= tol.sqrt() {
            break;
        }
        let centroid: Vec<f64> = (0..d)
            .map(|j| simplex[..d].iter().map(|(x, _)| x[j]).sum::<f64>() / d as f64)
            .collect();
        let toward = |t: f64, from: &[f64]| -> Vec<f64> {
            centroid.iter().zip(from).map(|(c, w)| c + t * (w - c)).collect()
        };
        let worst = simplex[d].0.clone();
        let mut xr = toward(-1.0, &worst);
        let fr = f(&mut xr, trace);
        evals += 1;
        if fr < simplex[0].1 {
            let mut xe = toward(-2.0, &worst);
            let fe = f(&mut xe, trace);
            evals += 1;
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            let mut xc = if fr < simplex[d].1 { toward(-0.5, &worst) } else { toward(0.5, &worst) };
            let fc = f(&mut xc, trace);
            evals += 1;
            if fc < fr.min(simplex[d].1) {
                simplex[d] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for s in simplex.iter_mut().skip(1) {
                    let mut x: Vec<f64> = best.iter().zip(&s.0).map(|(b, w)| b + 0.5 * (w - b)).collect();
                    let fx = f(&mut x, trace);
                    *s = (x, fx);
                    evals += 1;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box() -> ParameterBox {
        ParameterBox::new(vec![[0.0, 1.0]]).unwrap()
    }

    #[test]
    fn grid_hits_quadratic_peak() {
        let m = maximize(|t| (-(t[0] - 0.7).powi(2), 0.0), &unit_box(), &Optimizer::Grid { step: 0.1 }, 0).unwrap();
        assert!((m.theta_hat[0] - 0.7).abs() < 1e-12);
        assert_eq!(m.trace.len(), 11);
    }

    #[test]
    fn constant_objective_returns_first_point() {
        let m = maximize(|_| (1.0, 0.0), &unit_box(), &Optimizer::Grid { step: 0.25 }, 0).unwrap();
        assert_eq!(m.theta_hat, vec![0.0]);
        let m = maximize(
            |_| (1.0, 0.0),
            &unit_box(),
            &Optimizer::GridThenGolden { step: 0.25, tol: 1e-3 },
            0,
        )
        .unwrap();
        assert_eq!(m.theta_hat, vec![0.0]);
    }

    #[test]
    fn golden_refines_between_grid_points() {
        let m = maximize(
            |t| (-(t[0] - 0.4321).powi(2), 0.0),
            &unit_box(),
            &Optimizer::GridThenGolden { step: 0.1, tol: 1e-8 },
            0,
        )
        .unwrap();
        assert!((m.theta_hat[0] - 0.4321).abs() < 1e-7);
    }

    #[test]
    fn nelder_mead_two_dimensional_quadratic() {
        let b = ParameterBox::new(vec![[-2.0, 2.0], [-2.0, 2.0]]).unwrap();
        let f = |t: &[f64]| (-(t[0] - 0.3).powi(2) - 2.0 * (t[1] + 0.6).powi(2) - 0.5 * t[0] * t[1], 0.0);
        // stationarity: 2x + y/2 = 0.6, x/2 + 4y = −2.4
        let det = 2.0 * 4.0 - 0.25;
        let x = (0.6 * 4.0 - 0.5 * -2.4) / det;
        let y = (2.0 * -2.4 - 0.5 * 0.6) / det;
        let opt = Optimizer::NelderMead {
            restarts: 3,
            max_evals: 2000,
            tol: 1e-12,
        };
        let m = maximize(f, &b, &opt, 11).unwrap();
        assert!((m.theta_hat[0] - x).abs() < 1e-4 && (m.theta_hat[1] - y).abs() < 1e-4, "{:?} vs {x} {y}", m.theta_hat);
    }

    #[test]
    fn all_negative_infinity_fails() {
        let r = maximize(|_| (f64::NEG_INFINITY, 0.0), &unit_box(), &Optimizer::Grid { step: 0.5 }, 0);
        assert!(matches!(r, Err(Error::EstimationFailed { evaluations: 3, failures: 3 })));
    }

    #[test]
    fn grid_includes_upper_bound() {
        assert_eq!(grid_points(0.0, 1.0, 0.3).last(), Some(&1.0));
        assert_eq!(grid_points(0.0, 3.0, 0.01).len(), 301);
        assert_eq!(grid_points(0.0, 3.0, 0.01)[100], 1.0);
    }

    #[test]
    fn boundary_maximum_is_clamped() {
        let m = maximize(|t| (t[0], 0.0), &unit_box(), &Optimizer::default_for(&unit_box()), 0).unwrap();
        assert_eq!(m.theta_hat, vec![1.0]);
        let opt = Optimizer::NelderMead { restarts: 2, max_evals: 200, tol: 1e-9 };
        let m = maximize(|t| (t[0], 0.0), &unit_box(), &opt, 0).unwrap();
        assert_eq!(m.theta_hat, vec![1.0]);
    }

    #[test]
    fn parse_optimizers() {
        assert_eq!(Optimizer::parse("grid:0.5").unwrap(), Optimizer::Grid { step: 0.5 });
        assert!(matches!(Optimizer::parse("nelder_mead:3").unwrap(), Optimizer::NelderMead { restarts: 3, .. }));
        assert!(Optimizer::parse("grid").is_err());
        assert!(Optimizer::parse("bfgs").is_err());
    }
}
