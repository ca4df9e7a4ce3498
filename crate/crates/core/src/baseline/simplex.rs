//! Nelder–Mead minimization.

/// Result of a simplex search.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Stop once the largest vertex distance from the best vertex is below this.
    pub diameter_tol: f64,
    pub max_evaluations: usize,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { diameter_tol: 1e-8, max_evaluations: 10_000, initial_step: 0.5 }
    }
}

fn diameter(vertices: &[Vec<f64>]) -> f64 {
    let best = &vertices[0];
    vertices[1..]
        .iter()
        .map(|v| v.iter().zip(best).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

/// Minimizes `f` from `start`. Non-finite values are treated as +∞.
pub fn nelder_mead(mut f: impl FnMut(&[f64]) -> f64, start: &[f64], opts: SimplexOptions) -> SimplexResult {
    let n = start.len();
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

    let mut vertices = vec![start.to_vec()];
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += opts.initial_step;
        vertices.push(v);
    }
    let mut values: Vec<f64> = vertices.iter().map(|v| eval(v, &mut evals)).collect();

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut converged = false;
    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        vertices = order.iter().map(|&i| vertices[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        if diameter(&vertices) < opts.diameter_tol {
            converged = true;
            break;
        }
        if evals >= opts.max_evaluations {
            break;
        }

        let centroid: Vec<f64> = (0..n).map(|j| vertices[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&vertices[n]).map(|(c, w)| c + t * (c - w)).collect() };

        let reflected = along(alpha);
        let fr = eval(&reflected, &mut evals);
        if fr < values[0] {
            let expanded = along(gamma);
            let fe = eval(&expanded, &mut evals);
            if fe < fr {
                vertices[n] = expanded;
                values[n] = fe;
            } else {
                vertices[n] = reflected;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            vertices[n] = reflected;
            values[n] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[n] {
            let c = along(rho);
            let fc = eval(&c, &mut evals);
            (c, fc)
        } else {
            let c = along(-rho);
            let fc = eval(&c, &mut evals);
            (c, fc)
        };
        if fc < values[n].min(fr) {
            vertices[n] = contracted;
            values[n] = fc;
            continue;
        }
        for i in 1..=n {
            let shrunk: Vec<f64> = vertices[0].iter().zip(&vertices[i]).map(|(b, v)| b + sigma * (v - b)).collect();
            values[i] = eval(&shrunk, &mut evals);
            vertices[i] = shrunk;
        }
    }
    SimplexResult { point: vertices[0].clone(), value: values[0], evaluations: evals, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_minimum() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = nelder_mead(rosen, &[-1.2, 1.0], SimplexOptions::default());
        assert!(r.converged);
        assert!((r.point[0] - 1.0).abs() < 1e-6 && (r.point[1] - 1.0).abs() < 1e-6, "{:?}", r.point);
    }

    #[test]
    fn evaluation_budget_flags_unconverged() {
        let opts = SimplexOptions { max_evaluations: 20, ..Default::default() };
        let r = nelder_mead(|x| x.iter().map(|v| (v - 3.0).powi(2)).sum(), &[0.0; 4], opts);
        assert!(!r.converged);
        assert!(r.evaluations >= 20);
    }

    #[test]
    fn infinite_region_is_avoided() {
        let f = |x: &[f64]| if x[0] < 0.0 { f64::NAN } else { (x[0] - 0.25).powi(2) };
        let r = nelder_mead(f, &[1.0], SimplexOptions::default());
        assert!((r.point[0] - 0.25).abs() < 1e-7);
    }
}
