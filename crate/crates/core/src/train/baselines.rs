//! Device-only optimizers: parameter-shift gradients and Nelder-Mead.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::sim::GradientVector;
use crate::{Error, Result};

/// `g_k = (f(θ + π/2·e_k) - f(θ - π/2·e_k)) / 2`, using exactly `2·len(θ)`
/// evaluations. Exact for expectation values when each parameter drives a
/// single gate.
pub fn parameter_shift_gradient(evaluate: &mut dyn FnMut(&[f64]) -> Result<f64>, params: &[f64]) -> Result<GradientVector> {
    let mut shifted = params.to_vec();
    let mut grad = Vec::with_capacity(params.len());
    for k in 0..params.len() {
        shifted[k] = params[k] + FRAC_PI_2;
        let plus = evaluate(&shifted)?;
        shifted[k] = params[k] - FRAC_PI_2;
        let minus = evaluate(&shifted)?;
        shifted[k] = params[k];
        grad.push(0.5 * (plus - minus));
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numerical("non-finite parameter-shift gradient".into()));
    }
    Ok(GradientVector(grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NelderMeadConfig {
    pub max_evaluations: usize,
    /// Offset added to each coordinate for the initial simplex.
    pub initial_step: f64,
    pub xatol: f64,
    pub fatol: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self { max_evaluations: 1000, initial_step: 0.05, xatol: 1e-4, fatol: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadResult {
    /// Best point evaluated.
    pub params: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub iterations: usize,
    /// Stopped because the evaluation budget ran out.
    pub exhausted: bool,
    pub converged: bool,
}

struct Budgeted<'f> {
    f: &'f mut dyn FnMut(&[f64]) -> Result<f64>,
    used: usize,
    max: usize,
    best: (Vec<f64>, f64),
}

impl Budgeted<'_> {
    fn eval(&mut self, x: &[f64]) -> Result<Option<f64>> {
        if self.used >= self.max {
            return Ok(None);
        }
        self.used += 1;
        let v = (self.f)(x)?;
        if v < self.best.1 || self.best.1.is_nan() {
            self.best = (x.to_vec(), v);
        }
        Ok(Some(v))
    }
}

fn combine(a: &[f64], wa: f64, b: &[f64], wb: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| wa * x + wb * y).collect()
}

/// Nelder-Mead with coefficients 1, 2, 0.5, 0.5 in the classic scipy loop.
pub fn nelder_mead_optimize(
    evaluate: &mut dyn FnMut(&[f64]) -> Result<f64>,
    params0: &[f64],
    cfg: &NelderMeadConfig,
) -> Result<NelderMeadResult> {
    nelder_mead_with_callback(evaluate, params0, cfg, &mut |_, _, _| {})
}

/// As [`nelder_mead_optimize`]; `on_iteration(evaluations, best_params, best_value)`
/// runs after every iteration.
pub fn nelder_mead_with_callback(
    evaluate: &mut dyn FnMut(&[f64]) -> Result<f64>,
    params0: &[f64],
    cfg: &NelderMeadConfig,
    on_iteration: &mut dyn FnMut(usize, &[f64], f64),
) -> Result<NelderMeadResult> {
    let n = params0.len();
    if n == 0 {
        return Err(Error::InvalidConfig("Nelder-Mead needs at least one parameter".into()));
    }
    if cfg.max_evaluations < n + 1 {
        return Err(Error::InvalidConfig(format!(
            "budget {} is smaller than the simplex size {}",
            cfg.max_evaluations,
            n + 1
        )));
    }
    let (rho, chi, psi, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut f = Budgeted { f: evaluate, used: 0, max: cfg.max_evaluations, best: (params0.to_vec(), f64::NAN) };

    let mut sim = vec![params0.to_vec()];
    for k in 0..n {
        let mut v = params0.to_vec();
        v[k] += cfg.initial_step;
        sim.push(v);
    }
    let mut fsim = Vec::with_capacity(n + 1);
    for v in &sim {
        fsim.push(f.eval(v)?.expect("budget covers the simplex"));
    }

    let sort = |sim: &mut Vec<Vec<f64>>, fsim: &mut Vec<f64>| {
        let mut order: Vec<usize> = (0..sim.len()).collect();
        order.sort_by(|&a, &b| fsim[a].total_cmp(&fsim[b]));
        *sim = order.iter().map(|&i| sim[i].clone()).collect();
        *fsim = order.iter().map(|&i| fsim[i]).collect();
    };
    sort(&mut sim, &mut fsim);

    let mut iterations = 0;
    let mut converged = false;
    let mut exhausted = false;
    'outer: loop {
        let xspread = sim[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&sim[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let fspread = fsim[1..].iter().map(|v| (v - fsim[0]).abs()).fold(0.0, f64::max);
        if xspread <= cfg.xatol && fspread <= cfg.fatol {
            converged = true;
            break;
        }

        let xbar: Vec<f64> = (0..n).map(|j| sim[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
        let worst = sim[n].clone();
        macro_rules! eval_or_stop {
            ($x:expr) => {
                match f.eval(&$x)? {
                    Some(v) => v,
                    None => {
                        exhausted = true;
                        break 'outer;
                    }
                }
            };
        }

        let xr = combine(&xbar, 1.0 + rho, &worst, -rho);
        let fxr = eval_or_stop!(xr);
        let mut shrink = false;
        if fxr < fsim[0] {
            let xe = combine(&xbar, 1.0 + rho * chi, &worst, -rho * chi);
            let fxe = eval_or_stop!(xe);
            if fxe < fxr {
                (sim[n], fsim[n]) = (xe, fxe);
            } else {
                (sim[n], fsim[n]) = (xr, fxr);
            }
        } else if fxr < fsim[n - 1] {
            (sim[n], fsim[n]) = (xr, fxr);
        } else if fxr < fsim[n] {
            let xc = combine(&xbar, 1.0 + psi * rho, &worst, -psi * rho);
            let fxc = eval_or_stop!(xc);
            if fxc <= fxr {
                (sim[n], fsim[n]) = (xc, fxc);
            } else {
                shrink = true;
            }
        } else {
            let xcc = combine(&xbar, 1.0 - psi, &worst, psi);
            let fxcc = eval_or_stop!(xcc);
            if fxcc < fsim[n] {
                (sim[n], fsim[n]) = (xcc, fxcc);
            } else {
                shrink = true;
            }
        }
        if shrink {
            for j in 1..=n {
                sim[j] = combine(&sim[0], 1.0 - sigma, &sim[j], sigma);
                fsim[j] = eval_or_stop!(sim[j].clone());
            }
        }
        sort(&mut sim, &mut fsim);
        iterations += 1;
        on_iteration(f.used, &f.best.0, f.best.1);
    }
    if exhausted {
        on_iteration(f.used, &f.best.0, f.best.1);
    }
    let (params, value) = f.best;
    Ok(NelderMeadResult { params, value, evaluations: f.used, iterations, exhausted, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{Circuit, GateKind, PauliString};
    use crate::sim;

    #[test]
    fn shift_rule_on_rx() {
        let mut c = Circuit::new(1);
        c.push_param(GateKind::RX, &[0]).unwrap();
        let z: PauliString = "Z".parse().unwrap();
        let mut calls = 0;
        let mut f = |p: &[f64]| {
            calls += 1;
            sim::expectation(sim::forward(&c, p).unwrap().state(), &z)
        };
        for theta in [0.0, 0.4, 1.3, -2.0] {
            let g = parameter_shift_gradient(&mut f, &[theta]).unwrap();
            assert!((g[0] + f64::sin(theta)).abs() < 1e-9);
        }
        assert_eq!(calls, 8);
    }

    #[test]
    fn nelder_mead_quadratic_bowl() {
        let target = [0.3, -0.2, 0.1, 0.4];
        let mut f = |x: &[f64]| Ok(x.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum());
        let cfg = NelderMeadConfig { max_evaluations: 500, ..Default::default() };
        let r = nelder_mead_optimize(&mut f, &[0.0; 4], &cfg).unwrap();
        assert!(r.evaluations <= 500);
        let err = r.params.iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-4, "error {err} after {} evaluations", r.evaluations);
        assert!(r.converged && !r.exhausted);
    }

    #[test]
    fn nelder_mead_budget() {
        let mut calls = 0;
        let mut f = |x: &[f64]| {
            calls += 1;
            Ok(x.iter().map(|v| (v - 1.0).powi(2)).sum::<f64>())
        };
        let cfg = NelderMeadConfig { max_evaluations: 20, ..Default::default() };
        let r = nelder_mead_optimize(&mut f, &[0.0; 3], &cfg).unwrap();
        assert!(r.exhausted && !r.converged);
        assert_eq!(r.evaluations, 20);
        assert_eq!(calls, 20);
        assert!(r.value < 3.0);
        let bad = NelderMeadConfig { max_evaluations: 3, ..Default::default() };
        assert!(nelder_mead_optimize(&mut |_| Ok(0.0), &[0.0; 3], &bad).is_err());
    }

    #[test]
    fn nelder_mead_is_deterministic() {
        let mut f = |x: &[f64]| Ok((x[0] - 0.5).powi(2) + 3.0 * (x[1] + 0.2).powi(2) + x[0] * x[1]);
        let cfg = NelderMeadConfig::default();
        let a = nelder_mead_optimize(&mut f, &[1.0, 1.0], &cfg).unwrap();
        let b = nelder_mead_optimize(&mut f, &[1.0, 1.0], &cfg).unwrap();
        assert_eq!(a, b);
    }
}
