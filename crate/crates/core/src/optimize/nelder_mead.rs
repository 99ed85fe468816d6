//! Derivative-free simplex minimisation.

use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMead {
    /// Stop when the simplex values agree to this relative spread.
    pub rel_tol: f64,
    /// Iteration cap per call, shared by internal re-inflations.
    pub max_iter: usize,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
    /// Times the simplex is rebuilt around a converged point to escape
    /// collapse onto a subspace.
    pub reinflations: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            max_iter: 5000,
            initial_step: 0.5,
            reinflations: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmOutcome<T> {
    pub x: Vec<T>,
    pub value: T,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

const ABS_FLOOR: f64 = 1e-300;

impl NelderMead {
    pub fn minimize<T: Real, F: FnMut(&[T]) -> T>(&self, mut f: F, x0: &[T]) -> NmOutcome<T> {
        let mut evals = 0usize;
        let mut eval = |x: &[T]| {
            evals += 1;
            let v = f(x);
            if v.is_nan() {
                T::infinity()
            } else {
                v
            }
        };
        let dim = x0.len();
        if dim == 0 {
            let value = eval(x0);
            return NmOutcome {
                x: Vec::new(),
                value,
                iterations: 0,
                evaluations: evals,
                converged: true,
            };
        }
        let mut best_x = x0.to_vec();
        let mut best_v = eval(x0);
        let mut iterations = 0usize;
        let mut converged = false;
        let mut step = T::lit(self.initial_step);
        for round in 0..=self.reinflations {
            let (x, v, it, conv) = self.run(&mut eval, &best_x, best_v, step, self.max_iter - iterations);
            iterations += it;
            let improved = v < best_v;
            if v <= best_v {
                best_x = x;
                best_v = v;
            }
            converged = conv;
            if !conv || iterations >= self.max_iter {
                break;
            }
            // a rebuilt simplex that finds nothing better confirms the minimum
            if round > 0 && !improved {
                break;
            }
            step = step * T::lit(0.5);
        }
        NmOutcome {
            x: best_x,
            value: best_v,
            iterations,
            evaluations: evals,
            converged,
        }
    }

    fn run<T: Real, F: FnMut(&[T]) -> T>(
        &self,
        eval: &mut F,
        x0: &[T],
        v0: T,
        step: T,
        budget: usize,
    ) -> (Vec<T>, T, usize, bool) {
        let dim = x0.len();
        let mut pts: Vec<Vec<T>> = Vec::with_capacity(dim + 1);
        let mut vals: Vec<T> = Vec::with_capacity(dim + 1);
        pts.push(x0.to_vec());
        vals.push(v0);
        for i in 0..dim {
            let mut p = x0.to_vec();
            p[i] += step;
            vals.push(eval(&p));
            pts.push(p);
        }
        let (alpha, gamma, rho, shrink) = (T::one(), T::lit(2.0), T::lit(0.5), T::lit(0.5));
        let tol = T::lit(self.rel_tol);
        let floor = T::lit(ABS_FLOOR);
        let mut order: Vec<usize> = (0..=dim).collect();
        let mut centroid = vec![T::zero(); dim];
        let mut trial = vec![T::zero(); dim];
        let mut trial2 = vec![T::zero(); dim];
        let mut it = 0usize;
        loop {
            order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).expect("no NaN after mapping").then(a.cmp(&b)));
            let (lo, hi, second) = (order[0], order[dim], order[dim - 1]);
            let spread = vals[hi] - vals[lo];
            let scale = vals[lo].abs().max(floor);
            if vals[hi].is_finite() && spread <= tol * scale {
                return (pts[lo].clone(), vals[lo], it, true);
            }
            if it >= budget {
                return (pts[lo].clone(), vals[lo], it, false);
            }
            it += 1;
            centroid.iter_mut().for_each(|c| *c = T::zero());
            for &i in &order[..dim] {
                for (c, &p) in centroid.iter_mut().zip(&pts[i]) {
                    *c += p;
                }
            }
            let inv = T::one() / T::from_usize_lossy(dim);
            centroid.iter_mut().for_each(|c| *c *= inv);

            for j in 0..dim {
                trial[j] = centroid[j] + alpha * (centroid[j] - pts[hi][j]);
            }
            let fr = eval(&trial);
            if fr < vals[lo] {
                for j in 0..dim {
                    trial2[j] = centroid[j] + gamma * (trial[j] - centroid[j]);
                }
                let fe = eval(&trial2);
                if fe < fr {
                    pts[hi].copy_from_slice(&trial2);
                    vals[hi] = fe;
                } else {
                    pts[hi].copy_from_slice(&trial);
                    vals[hi] = fr;
                }
                continue;
            }
            if fr < vals[second] {
                pts[hi].copy_from_slice(&trial);
                vals[hi] = fr;
                continue;
            }
            let outside = fr < vals[hi];
            for j in 0..dim {
                trial2[j] = if outside {
                    centroid[j] + rho * (trial[j] - centroid[j])
                } else {
                    centroid[j] + rho * (pts[hi][j] - centroid[j])
                };
            }
            let fc = eval(&trial2);
            if (outside && fc <= fr) || (!outside && fc < vals[hi]) {
                pts[hi].copy_from_slice(&trial2);
                vals[hi] = fc;
                continue;
            }
            let base = pts[lo].clone();
            for &i in &order[1..] {
                for j in 0..dim {
                    pts[i][j] = base[j] + shrink * (pts[i][j] - base[j]);
                }
                vals[i] = eval(&pts[i]);
            }
        }
    }
}
