//! Derivative-free simplex (Nelder-Mead) minimizer.
//!
//! Deliberately small: the envelope search wraps it with multi-start and
//! its own candidate bookkeeping, so all we need here is a deterministic
//! single-start descent.

/// Result of a simplex run.
#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
}

/// Standard Nelder-Mead with reflection 1, expansion 2, contraction 0.5,
/// shrink 0.5. Ties are broken by simplex index so runs are deterministic.
pub fn nelder_mead<F>(
    mut objective: F,
    x0: &[f64],
    initial_step: f64,
    max_iterations: usize,
    f_tolerance: f64,
) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = x0.len();
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = objective(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(x0.to_vec());
    for i in 0..dim {
        let mut p = x0.to_vec();
        p[i] += initial_step;
        simplex.push(p);
    }
    let mut scores: Vec<f64> = simplex
        .iter()
        .map(|p| eval(p, &mut evaluations))
        .collect();

    let mut iterations = 0usize;
    while iterations < max_iterations {
        iterations += 1;
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| {
            scores[a]
                .partial_cmp(&scores[b])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let best = order[0];
        let worst = order[dim];
        let second_worst = order[dim - 1];
        if (scores[worst] - scores[best]).abs() <= f_tolerance {
            break;
        }

        let mut centroid = vec![0.0; dim];
        for &i in order.iter().take(dim) {
            for d in 0..dim {
                centroid[d] += simplex[i][d];
            }
        }
        for c in centroid.iter_mut() {
            *c /= dim as f64;
        }

        let reflect: Vec<f64> = (0..dim)
            .map(|d| centroid[d] + (centroid[d] - simplex[worst][d]))
            .collect();
        let f_reflect = eval(&reflect, &mut evaluations);

        if f_reflect < scores[best] {
            let expand: Vec<f64> = (0..dim)
                .map(|d| centroid[d] + 2.0 * (reflect[d] - centroid[d]))
                .collect();
            let f_expand = eval(&expand, &mut evaluations);
            if f_expand < f_reflect {
                simplex[worst] = expand;
                scores[worst] = f_expand;
            } else {
                simplex[worst] = reflect;
                scores[worst] = f_reflect;
            }
            continue;
        }
        if f_reflect < scores[second_worst] {
            simplex[worst] = reflect;
            scores[worst] = f_reflect;
            continue;
        }

        let contract: Vec<f64> = (0..dim)
            .map(|d| centroid[d] + 0.5 * (simplex[worst][d] - centroid[d]))
            .collect();
        let f_contract = eval(&contract, &mut evaluations);
        if f_contract < scores[worst] {
            simplex[worst] = contract;
            scores[worst] = f_contract;
            continue;
        }

        for &i in order.iter().skip(1) {
            for d in 0..dim {
                simplex[i][d] = simplex[best][d] + 0.5 * (simplex[i][d] - simplex[best][d]);
            }
            scores[i] = eval(&simplex[i].clone(), &mut evaluations);
        }
    }

    let mut best = 0;
    for i in 1..=dim {
        if scores[i] < scores[best] {
            best = i;
        }
    }
    SimplexResult {
        x: simplex[best].clone(),
        value: scores[best],
        iterations,
        evaluations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_shifted_quadratic() {
        let f = |x: &[f64]| (x[0] - 1.5).powi(2) + 2.0 * (x[1] + 0.5).powi(2) + 3.0;
        let r = nelder_mead(f, &[0.0, 0.0], 0.5, 400, 1e-14);
        assert!((r.x[0] - 1.5).abs() < 1e-5);
        assert!((r.x[1] + 0.5).abs() < 1e-5);
        assert!((r.value - 3.0).abs() < 1e-9);
    }

    #[test]
    fn handles_infinite_regions() {
        // A feasibility-style objective: infinite outside the unit box.
        let f = |x: &[f64]| {
            if x[0].abs() > 1.0 {
                f64::INFINITY
            } else {
                (x[0] - 0.9).powi(2)
            }
        };
        let r = nelder_mead(f, &[0.0], 0.3, 200, 1e-14);
        assert!((r.x[0] - 0.9).abs() < 1e-4);
    }
}
