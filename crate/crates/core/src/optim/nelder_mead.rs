use super::Minimum;

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadOptions {
    /// Edge length of the initial simplex as a fraction of each box width.
    pub initial_step: f64,
    pub max_evals: usize,
    /// Simplex extent (infinity norm) below which the run may stop.
    pub xtol: f64,
    /// Spread of vertex values, relative to the best value, below which the run may stop.
    pub ftol: f64,
    /// Fresh simplices built around the best point after convergence.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            initial_step: 0.05,
            max_evals: 10_000,
            xtol: 1e-10,
            ftol: 1e-14,
            restarts: 2,
        }
    }
}

fn clamp_into(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*lo, *hi);
    }
}

struct Simplex {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl Simplex {
    fn sort(&mut self) {
        let mut order: Vec<usize> = (0..self.points.len()).collect();
        order.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]).then(a.cmp(&b)));
        self.points = order.iter().map(|&i| self.points[i].clone()).collect();
        self.values = order.iter().map(|&i| self.values[i]).collect();
    }

    fn extent(&self) -> f64 {
        let best = &self.points[0];
        self.points[1..]
            .iter()
            .flat_map(|p| p.iter().zip(best).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }
}

/// Nelder–Mead restricted to the box `[lower, upper]` by projecting every trial
/// point onto it. Uses the dimension-adaptive coefficients of Gao and Han.
///
/// Non-finite objective values are treated as `+∞`.
pub fn nelder_mead_bounded<F>(
    mut f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &NelderMeadOptions,
) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = x0.len();
    assert!(dim > 0 && lower.len() == dim && upper.len() == dim);
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let d = dim as f64;
    let (alpha, gamma) = (1.0, 1.0 + 2.0 / d);
    let rho = 0.75 - 1.0 / (2.0 * d);
    let sigma = 1.0 - 1.0 / d;

    let mut best = x0.to_vec();
    clamp_into(&mut best, lower, upper);
    let mut best_f = eval(&best, &mut evals);
    let mut converged = false;

    for _round in 0..=opts.restarts {
        let mut points = vec![best.clone()];
        let mut values = vec![best_f];
        for i in 0..dim {
            let mut p = best.clone();
            let width = upper[i] - lower[i];
            let step = if width.is_finite() && width > 0.0 {
                opts.initial_step * width
            } else {
                opts.initial_step
            };
            p[i] = if p[i] + step <= upper[i] {
                p[i] + step
            } else {
                p[i] - step
            };
            clamp_into(&mut p, lower, upper);
            values.push(eval(&p, &mut evals));
            points.push(p);
        }
        let mut s = Simplex { points, values };
        s.sort();
        let round_start = s.values[0];
        converged = false;

        while evals < opts.max_evals {
            let spread = s.values[dim] - s.values[0];
            if s.extent() <= opts.xtol
                && spread <= opts.ftol * s.values[0].abs().max(f64::MIN_POSITIVE)
            {
                converged = true;
                break;
            }
            if s.extent() <= opts.xtol * 1e-3 {
                converged = true;
                break;
            }
            let mut centroid = vec![0.0; dim];
            for p in &s.points[..dim] {
                for (c, v) in centroid.iter_mut().zip(p) {
                    *c += v / d;
                }
            }
            let worst = s.points[dim].clone();
            let along = |t: f64| {
                let mut x: Vec<f64> = centroid
                    .iter()
                    .zip(&worst)
                    .map(|(c, w)| c + t * (c - w))
                    .collect();
                clamp_into(&mut x, lower, upper);
                x
            };
            let xr = along(alpha);
            let fr = eval(&xr, &mut evals);
            if fr < s.values[0] {
                let xe = along(alpha * gamma);
                let fe = eval(&xe, &mut evals);
                if fe < fr {
                    s.points[dim] = xe;
                    s.values[dim] = fe;
                } else {
                    s.points[dim] = xr;
                    s.values[dim] = fr;
                }
            } else if fr < s.values[dim - 1] {
                s.points[dim] = xr;
                s.values[dim] = fr;
            } else {
                let (xc, fc) = if fr < s.values[dim] {
                    let xc = along(alpha * rho);
                    let fc = eval(&xc, &mut evals);
                    (xc, fc)
                } else {
                    let xc = along(-rho);
                    let fc = eval(&xc, &mut evals);
                    (xc, fc)
                };
                if fc < s.values[dim].min(fr) {
                    s.points[dim] = xc;
                    s.values[dim] = fc;
                } else {
                    let x_best = s.points[0].clone();
                    for k in 1..=dim {
                        let shrunk: Vec<f64> = x_best
                            .iter()
                            .zip(&s.points[k])
                            .map(|(b, p)| b + sigma * (p - b))
                            .collect();
                        s.values[k] = eval(&shrunk, &mut evals);
                        s.points[k] = shrunk;
                    }
                }
            }
            s.sort();
        }

        let improved = s.values[0] < best_f;
        if improved {
            best = s.points[0].clone();
            best_f = s.values[0];
        }
        if evals >= opts.max_evals || !(round_start - best_f > opts.ftol * best_f.abs()) {
            break;
        }
    }

    Minimum {
        x: best,
        f: best_f,
        evals,
        converged,
    }
}
