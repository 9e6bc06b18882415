use std::collections::VecDeque;

use crate::error::{HspError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iters: usize,
    /// Stop once the infinity norm of the gradient falls to this value.
    pub g_tol: f64,
    /// Consecutive small-decrease iterations (as judged by the caller's rule) needed to stop.
    pub patience: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iters: 500,
            g_tol: 0.0,
            patience: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iters: usize,
    /// Objective at the start and after every accepted step; non-increasing.
    pub trace: Vec<f64>,
    pub converged: bool,
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Limited-memory BFGS with a backtracking Armijo line search.
///
/// `fg(x, grad)` returns the objective and writes its gradient. A step is only
/// accepted if it lowers the objective, so the trace is monotone. The run stops
/// when `small_decrease(f_prev, f_new)` holds for `patience` consecutive steps,
/// when the line search cannot find a lower point, or at `max_iters`.
pub fn lbfgs<F, S>(
    mut fg: F,
    x0: &[f64],
    opts: &LbfgsOptions,
    small_decrease: S,
) -> Result<LbfgsResult>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
    S: Fn(f64, f64) -> bool,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut f = fg(&x, &mut g);
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(HspError::Numerical(format!(
            "non-finite objective {f} at the starting point"
        )));
    }
    let mut trace = vec![f];
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut quiet = 0usize;
    let mut converged = false;
    let mut iters = 0usize;

    while iters < opts.max_iters {
        let g_inf = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if g_inf <= opts.g_tol {
            converged = true;
            break;
        }

        // Two-loop recursion for d = -H g.
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        let gamma = history
            .back()
            .map(|(s, y, _)| dot(s, y) / dot(y, y))
            .unwrap_or_else(|| 1.0 / g_inf);
        q.iter_mut().for_each(|v| *v *= gamma);
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut d: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            history.clear();
            d = g.iter().map(|v| -v / g_inf).collect();
            slope = dot(&g, &d);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            x_new
                .iter_mut()
                .zip(&x)
                .zip(&d)
                .for_each(|((xn, xi), di)| *xn = xi + step * di);
            let f_try = fg(&x_new, &mut g_new);
            if f_try.is_finite() && f_try <= f + ARMIJO_C1 * step * slope && f_try < f {
                accepted = Some(f_try);
                break;
            }
            step *= 0.5;
        }
        let Some(f_new) = accepted else {
            converged = true;
            break;
        };
        iters += 1;

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let f_prev = f;
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        f = f_new;
        trace.push(f);

        if small_decrease(f_prev, f) {
            quiet += 1;
            if quiet >= opts.patience {
                converged = true;
                break;
            }
        } else {
            quiet = 0;
        }
    }

    Ok(LbfgsResult {
        x,
        f,
        iters,
        trace,
        converged,
    })
}
