//! Nelder–Mead simplex minimization.
//!
//! Objective values may be `+∞`; such vertices are treated as worse than any
//! finite vertex, which lets callers encode infeasible regions directly.

use nalgebra::DVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Edge length of the initial right-angled simplex.
    pub edge: f64,
    /// Stop once f(worst) − f(best) falls below this value.
    pub spread_tolerance: f64,
    pub max_evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub best: DVector<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Best value after each iteration.
    pub history: Vec<f64>,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

fn spread(values: &[f64]) -> f64 {
    let (lo, hi) = (values[0], values[values.len() - 1]);
    if lo == hi {
        0.0
    } else {
        hi - lo
    }
}

pub fn minimize<F>(mut objective: F, start: &DVector<f64>, opts: &SimplexOptions) -> SimplexResult
where
    F: FnMut(&DVector<f64>) -> f64,
{
    let dim = start.len();
    let mut evaluations = 0;
    let mut eval = |x: &DVector<f64>, count: &mut usize| {
        *count += 1;
        let v = objective(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut vertices: Vec<DVector<f64>> = Vec::with_capacity(dim + 1);
    vertices.push(start.clone());
    for j in 0..dim {
        let mut v = start.clone();
        v[j] += opts.edge;
        vertices.push(v);
    }
    let mut values: Vec<f64> = vertices.iter().map(|v| eval(v, &mut evaluations)).collect();

    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    loop {
        // stable sort keeps the incumbent ahead of ties
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        vertices = order.iter().map(|&i| vertices[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        history.push(values[0]);

        if values[0].is_finite() && spread(&values) <= opts.spread_tolerance {
            converged = true;
            break;
        }
        if evaluations >= opts.max_evaluations {
            break;
        }
        iterations += 1;

        let centroid = vertices[..dim].iter().fold(DVector::zeros(dim), |acc, v| acc + v) / dim as f64;
        let worst = vertices[dim].clone();
        let reflected = &centroid + (&centroid - &worst) * REFLECT;
        let fr = eval(&reflected, &mut evaluations);

        if fr < values[0] {
            let expanded = &centroid + (&reflected - &centroid) * EXPAND;
            let fe = eval(&expanded, &mut evaluations);
            if fe < fr {
                vertices[dim] = expanded;
                values[dim] = fe;
            } else {
                vertices[dim] = reflected;
                values[dim] = fr;
            }
            continue;
        }
        if fr < values[dim - 1] {
            vertices[dim] = reflected;
            values[dim] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[dim] {
            let c = &centroid + (&reflected - &centroid) * CONTRACT;
            let fc = eval(&c, &mut evaluations);
            (c, fc)
        } else {
            let c = &centroid + (&worst - &centroid) * CONTRACT;
            let fc = eval(&c, &mut evaluations);
            (c, fc)
        };
        if fc < fr.min(values[dim]) {
            vertices[dim] = contracted;
            values[dim] = fc;
            continue;
        }
        let best = vertices[0].clone();
        for i in 1..=dim {
            vertices[i] = &best + (&vertices[i] - &best) * SHRINK;
            values[i] = eval(&vertices[i], &mut evaluations);
        }
    }

    SimplexResult {
        best: vertices.swap_remove(0),
        value: values[0],
        evaluations,
        iterations,
        converged,
        history,
    }
}
