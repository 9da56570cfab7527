//! Derivative-free Nelder-Mead simplex minimizer.
//!
//! Used for the conditional-sum-of-squares objective in the ARIMA fitter,
//! which is smooth but has no cheap analytic gradient once moving-average
//! terms enter the recursion. Deterministic: no randomness, canonical
//! tie-breaking through stable sorting.

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    /// Initial step added to each coordinate to form the starting simplex.
    pub step: f64,
    pub max_iters: usize,
    /// Stop when the simplex function-value spread falls below
    /// `f_tol * (1 + |f_best|)`.
    pub f_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            step: 0.25,
            max_iters: 400,
            f_tol: 1e-12,
        }
    }
}

/// Minimizes `f` starting from `x0`. Non-finite objective values are treated
/// as +inf so the simplex retreats from them. Returns the best vertex seen.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: NelderMeadOptions) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert!(n >= 1, "cannot optimize a zero-dimensional function");
    let mut eval = |x: &[f64]| -> f64 {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let fx0 = eval(x0);
    simplex.push((x0.to_vec(), fx0));
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += opts.step * p[i].abs().max(1.0);
        let fp = eval(&p);
        simplex.push((p, fp));
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    for _ in 0..opts.max_iters {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("no NaN after guard"));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if worst.is_finite() && (worst - best) <= opts.f_tol * (1.0 + best.abs()) {
            break;
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; n];
        for (p, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v;
            }
        }
        for c in &mut centroid {
            *c /= n as f64;
        }

        let worst_point = simplex[n].0.clone();
        let reflect: Vec<f64> = centroid
            .iter()
            .zip(&worst_point)
            .map(|(c, w)| c + alpha * (c - w))
            .collect();
        let f_reflect = eval(&reflect);

        if f_reflect < simplex[0].1 {
            let expand: Vec<f64> = centroid
                .iter()
                .zip(&worst_point)
                .map(|(c, w)| c + gamma * (c - w))
                .collect();
            let f_expand = eval(&expand);
            simplex[n] = if f_expand < f_reflect {
                (expand, f_expand)
            } else {
                (reflect, f_reflect)
            };
        } else if f_reflect < simplex[n - 1].1 {
            simplex[n] = (reflect, f_reflect);
        } else {
            let contract: Vec<f64> = if f_reflect < simplex[n].1 {
                centroid
                    .iter()
                    .zip(&reflect)
                    .map(|(c, r)| c + rho * (r - c))
                    .collect()
            } else {
                centroid
                    .iter()
                    .zip(&worst_point)
                    .map(|(c, w)| c + rho * (w - c))
                    .collect()
            };
            let f_contract = eval(&contract);
            if f_contract < simplex[n].1.min(f_reflect) {
                simplex[n] = (contract, f_contract);
            } else {
                // Shrink towards the best vertex.
                let best_point = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let p: Vec<f64> = best_point
                        .iter()
                        .zip(&entry.0)
                        .map(|(b, x)| b + sigma * (x - b))
                        .collect();
                    let fp = eval(&p);
                    *entry = (p, fp);
                }
            }
        }
    }

    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("no NaN after guard"));
    simplex.swap_remove(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_quadratic() {
        let (x, fx) = nelder_mead(
            |p| (p[0] - 3.0).powi(2) + (p[1] + 1.0).powi(2),
            &[0.0, 0.0],
            NelderMeadOptions::default(),
        );
        assert!((x[0] - 3.0).abs() < 1e-5, "{x:?}");
        assert!((x[1] + 1.0).abs() < 1e-5);
        assert!(fx < 1e-9);
    }

    #[test]
    fn one_dimensional() {
        let (x, _) = nelder_mead(
            |p| (p[0] - 0.6).powi(2),
            &[0.0],
            NelderMeadOptions::default(),
        );
        assert!((x[0] - 0.6).abs() < 1e-5);
    }

    #[test]
    fn never_worse_than_start() {
        let f = |p: &[f64]| p[0].powi(4) - p[0] + p[1] * p[1];
        let start = [2.0, 2.0];
        let (_, fx) = nelder_mead(f, &start, NelderMeadOptions::default());
        assert!(fx <= f(&start));
    }

    #[test]
    fn survives_infinite_regions() {
        let f = |p: &[f64]| {
            if p[0] > 1.5 {
                f64::INFINITY
            } else {
                (p[0] - 1.0).powi(2)
            }
        };
        let (x, _) = nelder_mead(f, &[0.0], NelderMeadOptions::default());
        assert!((x[0] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn deterministic() {
        let f = |p: &[f64]| (p[0] - 0.3).powi(2) + (p[1] - 0.7).powi(2) + p[0] * p[1];
        let a = nelder_mead(f, &[0.1, 0.1], NelderMeadOptions::default());
        let b = nelder_mead(f, &[0.1, 0.1], NelderMeadOptions::default());
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }
}
