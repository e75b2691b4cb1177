//! Derivative-free minimization building blocks: a bounded Nelder–Mead
//! simplex and Latin-hypercube start points.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Axis-aligned box; proposals are projected onto it.
#[derive(Debug, Clone)]
pub struct Box {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Box {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        debug_assert!(lo.iter().zip(&hi).all(|(l, h)| l <= h));
        Box { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lo[i], self.hi[i]);
        }
    }
}

/// Latin-hypercube design: `n` points stratified per dimension.
pub fn latin_hypercube(bounds: &Box, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let d = bounds.dim();
    let strata: Vec<Vec<usize>> = (0..d)
        .map(|_| {
            let mut idx: Vec<usize> = (0..n).collect();
            // Fisher-Yates
            for i in (1..n).rev() {
                let j = rng.random_range(0..=i);
                idx.swap(i, j);
            }
            idx
        })
        .collect();
    (0..n)
        .map(|p| {
            (0..d)
                .map(|i| {
                    let cell = strata[i][p] as f64 + rng.random::<f64>();
                    bounds.lo[i] + (bounds.hi[i] - bounds.lo[i]) * cell / n as f64
                })
                .collect()
        })
        .collect()
}

pub struct NelderMeadOptions {
    pub max_iter: usize,
    pub f_tol: f64,
    pub x_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            max_iter: 400,
            f_tol: 1e-13,
            x_tol: 1e-11,
        }
    }
}

/// Nelder–Mead with box projection. Returns (argmin, min, evals).
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step: &[f64],
    bounds: &Box,
    opts: &NelderMeadOptions,
) -> (Vec<f64>, f64, usize) {
    let n = x0.len();
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut evals = 0usize;
    let mut eval = |x: &mut Vec<f64>| {
        bounds.clamp(x);
        evals += 1;
        f(x)
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let mut x = x0.to_vec();
    let fx = eval(&mut x);
    simplex.push((x, fx));
    for i in 0..n {
        let mut v = x0.to_vec();
        let s = if step[i] != 0.0 { step[i] } else { 1e-4 };
        v[i] = if v[i] + s <= bounds.hi[i] { v[i] + s } else { v[i] - s };
        let fv = eval(&mut v);
        simplex.push((v, fv));
    }

    for _ in 0..opts.max_iter * n.max(1) {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let spread = (worst - best).abs();
        let x_spread: f64 = (0..n)
            .map(|i| {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for (v, _) in &simplex {
                    lo = lo.min(v[i]);
                    hi = hi.max(v[i]);
                }
                hi - lo
            })
            .fold(0.0, f64::max);
        if spread <= opts.f_tol * (1.0 + best.abs()) && x_spread <= opts.x_tol {
            break;
        }

        // centroid of all but the worst
        let mut centroid = vec![0.0; n];
        for (v, _) in &simplex[..n] {
            for i in 0..n {
                centroid[i] += v[i] / n as f64;
            }
        }

        let blend = |t: f64| -> Vec<f64> {
            (0..n)
                .map(|i| centroid[i] + t * (centroid[i] - simplex[n].0[i]))
                .collect()
        };

        let mut reflected = blend(alpha);
        let fr = eval(&mut reflected);
        if fr < simplex[0].1 {
            let mut expanded = blend(gamma);
            let fe = eval(&mut expanded);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
            continue;
        }
        let mut contracted = if fr < simplex[n].1 {
            blend(rho)
        } else {
            blend(-rho)
        };
        let fc = eval(&mut contracted);
        if fc < simplex[n].1.min(fr) {
            simplex[n] = (contracted, fc);
            continue;
        }
        // shrink toward the best vertex
        let best_x = simplex[0].0.clone();
        for entry in simplex.iter_mut().skip(1) {
            let mut v: Vec<f64> = entry
                .0
                .iter()
                .zip(&best_x)
                .map(|(xi, bi)| bi + sigma * (xi - bi))
                .collect();
            let fv = eval(&mut v);
            *entry = (v, fv);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x_best, f_best) = simplex.swap_remove(0);
    (x_best, f_best, evals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn minimizes_quadratic_bowl() {
        let bounds = Box::new(vec![-5.0, -5.0], vec![5.0, 5.0]);
        let f = |x: &[f64]| (x[0] - 1.2).powi(2) + 3.0 * (x[1] + 0.7).powi(2);
        let (x, fx, _) = nelder_mead(
            f,
            &[4.0, 4.0],
            &[0.5, 0.5],
            &bounds,
            &NelderMeadOptions::default(),
        );
        assert!((x[0] - 1.2).abs() < 1e-6 && (x[1] + 0.7).abs() < 1e-6, "{x:?}");
        assert!(fx < 1e-10);
    }

    #[test]
    fn respects_bounds() {
        let bounds = Box::new(vec![0.0], vec![2.0]);
        // unconstrained minimum at -3, so the solver must stop at the wall
        let f = |x: &[f64]| (x[0] + 3.0).powi(2);
        let (x, _, _) = nelder_mead(
            f,
            &[1.5],
            &[0.2],
            &bounds,
            &NelderMeadOptions::default(),
        );
        assert!(x[0].abs() < 1e-8, "{x:?}");
    }

    #[test]
    fn rosenbrock_two_dim() {
        let bounds = Box::new(vec![-2.0, -2.0], vec![2.0, 2.0]);
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let (x, fx, _) = nelder_mead(
            f,
            &[-1.2, 1.0],
            &[0.1, 0.1],
            &bounds,
            &NelderMeadOptions {
                max_iter: 2000,
                ..Default::default()
            },
        );
        assert!(fx < 1e-8, "{x:?} f={fx}");
    }

    #[test]
    fn latin_hypercube_is_stratified_and_deterministic() {
        let bounds = Box::new(vec![0.0, 10.0], vec![1.0, 20.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let pts = latin_hypercube(&bounds, 16, &mut rng);
        assert_eq!(pts.len(), 16);
        // one point per stratum in each dimension
        for dim in 0..2 {
            let mut seen = [false; 16];
            for p in &pts {
                let u = (p[dim] - bounds.lo[dim]) / (bounds.hi[dim] - bounds.lo[dim]);
                let cell = (u * 16.0).floor() as usize;
                assert!(!seen[cell.min(15)]);
                seen[cell.min(15)] = true;
            }
            assert!(seen.iter().all(|&s| s));
        }
        let mut rng2 = ChaCha8Rng::seed_from_u64(42);
        assert_eq!(pts, latin_hypercube(&bounds, 16, &mut rng2));
    }
}
