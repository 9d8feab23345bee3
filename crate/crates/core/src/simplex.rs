//! Nelder–Mead downhill simplex for small unconstrained problems.

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Edge length of the initial simplex around the start point.
    pub step: f64,
    pub max_iters: usize,
    /// Stop when the spread of objective values over the simplex falls below this.
    pub f_tol: f64,
    /// Stop when every vertex is this close (max-norm) to the best one.
    pub x_tol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            step: 0.5,
            max_iters: 5_000,
            f_tol: 1e-16,
            x_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimize `f` from `start`. NaN objective values are treated as +inf.
pub fn minimize<F>(f: F, start: &[f64], opts: &SimplexOptions) -> SimplexResult
where
    F: Fn(&[f64]) -> f64,
{
    let dim = start.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    pts.push(start.to_vec());
    for i in 0..dim {
        let mut p = start.to_vec();
        p[i] += opts.step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(p)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iters {
        // sort vertices best to worst; stable so ties keep insertion order
        let mut idx: Vec<usize> = (0..=dim).collect();
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = idx.iter().map(|&i| pts[i].clone()).collect();
        vals = idx.iter().map(|&i| vals[i]).collect();

        let spread = vals[dim] - vals[0];
        let size = pts[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if (spread.is_finite() && spread <= opts.f_tol * (1.0 + vals[0].abs())) || size <= opts.x_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..dim)
            .map(|j| pts[..dim].iter().map(|p| p[j]).sum::<f64>() / dim as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&pts[dim])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let reflected = along(1.0);
        let f_r = eval(&reflected);
        if f_r < vals[0] {
            let expanded = along(2.0);
            let f_e = eval(&expanded);
            if f_e < f_r {
                pts[dim] = expanded;
                vals[dim] = f_e;
            } else {
                pts[dim] = reflected;
                vals[dim] = f_r;
            }
            continue;
        }
        if f_r < vals[dim - 1] {
            pts[dim] = reflected;
            vals[dim] = f_r;
            continue;
        }
        let (contracted, f_c) = if f_r < vals[dim] {
            let c = along(0.5);
            let v = eval(&c);
            (c, v)
        } else {
            let c = along(-0.5);
            let v = eval(&c);
            (c, v)
        };
        if f_c < vals[dim].min(f_r) {
            pts[dim] = contracted;
            vals[dim] = f_c;
            continue;
        }
        // shrink toward the best vertex
        let best = pts[0].clone();
        for i in 1..=dim {
            for j in 0..dim {
                pts[i][j] = best[j] + 0.5 * (pts[i][j] - best[j]);
            }
            vals[i] = eval(&pts[i]);
        }
    }

    let best = (0..=dim).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    SimplexResult {
        x: pts[best].clone(),
        value: vals[best],
        iterations,
        converged,
    }
}

/// [`minimize`] followed by `polish` restarts from the best point found.
pub fn minimize_with_restarts<F>(f: F, start: &[f64], opts: &SimplexOptions, polish: usize) -> SimplexResult
where
    F: Fn(&[f64]) -> f64,
{
    let mut res = minimize(&f, start, opts);
    let mut step = opts.step;
    for _ in 0..polish {
        step *= 0.1;
        let again = minimize(&f, &res.x, &SimplexOptions { step, ..*opts });
        if again.value <= res.value {
            res = SimplexResult {
                iterations: res.iterations + again.iterations,
                ..again
            };
        }
    }
    res
}
