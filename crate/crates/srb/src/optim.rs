//! Minimal derivative-free simplex minimizer used by the gate synthesizer.
//!
//! Nelder-Mead with the dimension-adaptive coefficients of Gao & Han. The
//! synthesis objective is smooth, low-dimensional, and cheap, so a compact
//! implementation with multi-start handled by the caller is enough.

pub struct NmResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
}

pub fn nelder_mead<F>(
    f: &mut F,
    x0: &[f64],
    initial_step: f64,
    f_target: f64,
    max_evals: usize,
) -> NmResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let (alpha, beta, gamma, delta) = (
        1.0,
        1.0 + 2.0 / n as f64,
        0.75 - 1.0 / (2.0 * n as f64),
        1.0 - 1.0 / n as f64,
    );

    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        f(x)
    };

    // Initial simplex: x0 plus a step along each coordinate.
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), f0));
    for i in 0..n {
        let mut xi = x0.to_vec();
        xi[i] += initial_step;
        let fi = eval(&xi, &mut evals);
        simplex.push((xi, fi));
    }

    loop {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let best = simplex[0].1;
        if best <= f_target || evals >= max_evals {
            break;
        }
        // Degenerate simplex: nothing left to explore.
        let spread = simplex[n].1 - best;
        if spread.abs() < 1e-16 {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let point = |coef: f64| -> Vec<f64> {
            (0..n).map(|j| centroid[j] + coef * (centroid[j] - worst.0[j])).collect()
        };

        let xr = point(alpha);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = point(alpha * beta);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let contracted = if fr < worst.1 {
                let xc = point(alpha * gamma);
                let fc = eval(&xc, &mut evals);
                if fc <= fr { Some((xc, fc)) } else { None }
            } else {
                let xc = point(-gamma);
                let fc = eval(&xc, &mut evals);
                if fc < worst.1 { Some((xc, fc)) } else { None }
            };
            match contracted {
                Some(c) => simplex[n] = c,
                None => {
                    // Shrink toward the best vertex.
                    let best_x = simplex[0].0.clone();
                    for v in simplex.iter_mut().skip(1) {
                        for j in 0..n {
                            v.0[j] = best_x[j] + delta * (v.0[j] - best_x[j]);
                        }
                        v.1 = eval(&v.0, &mut evals);
                    }
                }
            }
        }
    }

    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    NmResult { x: simplex[0].0.clone(), f: simplex[0].1, evals }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_shifted_quadratic() {
        let mut f = |x: &[f64]| (x[0] - 1.5).powi(2) + 3.0 * (x[1] + 0.5).powi(2) + 2.0;
        let r = nelder_mead(&mut f, &[0.0, 0.0], 0.5, 2.0 + 1e-14, 5000);
        assert!((r.f - 2.0).abs() < 1e-10);
        assert!((r.x[0] - 1.5).abs() < 1e-5);
    }

    #[test]
    fn respects_eval_budget() {
        let mut count = 0usize;
        let mut f = |x: &[f64]| {
            count += 1;
            x.iter().map(|v| v * v).sum::<f64>()
        };
        let r = nelder_mead(&mut f, &[5.0; 6], 1.0, -1.0, 200);
        assert!(r.evals <= 210);
        assert_eq!(count, r.evals);
    }
}
