//! Covariate distributions: density, support, moments, partial moments and
//! seeded sampling.

use rand::Rng;
use rand_distr::Distribution;

use crate::error::{DesignError, Result};
use crate::quadrature::GaussLegendre;
use crate::real::Real;

/// Upper-tail probability cut from the gamma support.
pub const GAMMA_TAIL_CUT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum CovariateModel<T> {
    /// Independent uniform coordinates on a box; `bounds[d] = (lo, hi)`.
    UniformBox { bounds: Vec<(T, T)> },
    /// One-dimensional gamma, truncated at its `1 - 1e-12` quantile.
    Gamma(GammaCovariate<T>),
    /// One-dimensional piecewise-linear density through `(knot, value)` pairs.
    Tabulated(TabulatedDensity<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaCovariate<T> {
    shape: T,
    rate: T,
    upper: T,
    log_norm: T,
}

impl<T: Real> GammaCovariate<T> {
    pub fn new(shape: T, rate: T) -> Result<Self> {
        if !(shape > T::zero() && rate > T::zero()) || !shape.is_finite() || !rate.is_finite() {
            return Err(DesignError::InvalidInput(format!(
                "gamma covariate needs shape > 0 and rate > 0 (got {shape}, {rate})"
            )));
        }
        let (a, r) = (shape.to_f64_lossy(), rate.to_f64_lossy());
        let upper = gamma_upper_quantile(a, r, GAMMA_TAIL_CUT);
        let log_norm = a * r.ln() - statrs::function::gamma::ln_gamma(a);
        Ok(Self {
            shape,
            rate,
            upper: T::lit(upper),
            log_norm: T::lit(log_norm),
        })
    }

    pub fn shape(&self) -> T {
        self.shape
    }

    pub fn rate(&self) -> T {
        self.rate
    }

    pub fn upper(&self) -> T {
        self.upper
    }

    fn density(&self, x: T) -> T {
        if x <= T::zero() || x > self.upper {
            return T::zero();
        }
        ((self.shape - T::one()) * x.ln() - self.rate * x + self.log_norm).exp()
    }
}

/// Smallest `x` with `P(X > x) <= tail` for `Gamma(shape, rate)`.
fn gamma_upper_quantile(shape: f64, rate: f64, tail: f64) -> f64 {
    use statrs::function::gamma::gamma_ur;
    let upper_tail = |x: f64| gamma_ur(shape, rate * x);
    let mut lo = shape / rate;
    let mut hi = lo.max(1.0 / rate);
    while upper_tail(hi) > tail {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if upper_tail(mid) > tail {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedDensity<T> {
    knots: Vec<T>,
    values: Vec<T>,
}

impl<T: Real> TabulatedDensity<T> {
    pub fn new(knots: Vec<T>, values: Vec<T>) -> Result<Self> {
        if knots.len() < 2 || knots.len() != values.len() {
            return Err(DesignError::InvalidInput(
                "tabulated density needs at least two (knot, value) pairs".into(),
            ));
        }
        if !knots.windows(2).all(|w| w[0] < w[1]) {
            return Err(DesignError::InvalidInput(
                "tabulated density knots must be strictly increasing".into(),
            ));
        }
        Ok(Self { knots, values })
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    fn density(&self, x: T) -> T {
        let k = &self.knots;
        if x < k[0] || x > k[k.len() - 1] {
            return T::zero();
        }
        let i = match k.iter().position(|&kn| kn > x) {
            Some(i) => i.max(1),
            None => k.len() - 1,
        };
        let (x0, x1) = (k[i - 1], k[i]);
        let (f0, f1) = (self.values[i - 1], self.values[i]);
        f0 + (f1 - f0) * (x - x0) / (x1 - x0)
    }

    fn segment_masses(&self) -> Vec<T> {
        self.knots
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, f)| (x[1] - x[0]) * (f[0] + f[1]) * T::lit(0.5))
            .collect()
    }
}

impl<T: Real> CovariateModel<T> {
    pub fn uniform(lo: T, hi: T) -> Self {
        CovariateModel::UniformBox {
            bounds: vec![(lo, hi)],
        }
    }

    pub fn unit_box(dim: usize) -> Self {
        CovariateModel::UniformBox {
            bounds: vec![(T::zero(), T::one()); dim],
        }
    }

    pub fn gamma(shape: T, rate: T) -> Result<Self> {
        Ok(CovariateModel::Gamma(GammaCovariate::new(shape, rate)?))
    }

    pub fn dim(&self) -> usize {
        match self {
            CovariateModel::UniformBox { bounds } => bounds.len(),
            _ => 1,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            CovariateModel::UniformBox { .. } => "uniform-box",
            CovariateModel::Gamma(_) => "gamma",
            CovariateModel::Tabulated(_) => "tabulated-density",
        }
    }

    /// Per-dimension `(lo, hi)` bounds of the (truncated) support.
    pub fn support(&self) -> Vec<(T, T)> {
        match self {
            CovariateModel::UniformBox { bounds } => bounds.clone(),
            CovariateModel::Gamma(g) => vec![(T::zero(), g.upper)],
            CovariateModel::Tabulated(t) => vec![(t.knots[0], t.knots[t.knots.len() - 1])],
        }
    }

    pub fn support_1d(&self) -> (T, T) {
        self.support()[0]
    }

    pub fn contains(&self, x: &[T]) -> bool {
        let sup = self.support();
        x.len() == sup.len()
            && x.iter().zip(&sup).all(|(&v, &(lo, hi))| {
                let slack = T::lit(1e-12) * (hi - lo).abs().max(T::one());
                v >= lo - slack && v <= hi + slack
            })
    }

    pub fn density(&self, x: &[T]) -> T {
        match self {
            CovariateModel::UniformBox { bounds } => {
                let mut d = T::one();
                for (&v, &(lo, hi)) in x.iter().zip(bounds) {
                    if v < lo || v > hi {
                        return T::zero();
                    }
                    d /= hi - lo;
                }
                d
            }
            CovariateModel::Gamma(g) => g.density(x[0]),
            CovariateModel::Tabulated(t) => t.density(x[0]),
        }
    }

    #[inline]
    pub fn density_1d(&self, x: T) -> T {
        match self {
            CovariateModel::UniformBox { bounds } => {
                let (lo, hi) = bounds[0];
                if x < lo || x > hi {
                    T::zero()
                } else {
                    T::one() / (hi - lo)
                }
            }
            CovariateModel::Gamma(g) => g.density(x),
            CovariateModel::Tabulated(t) => t.density(x),
        }
    }

    /// Upper bound on the density, when one is cheaply known.
    pub fn density_bound(&self) -> Option<T> {
        match self {
            CovariateModel::UniformBox { bounds } => {
                Some(bounds.iter().fold(T::one(), |d, &(lo, hi)| d / (hi - lo)))
            }
            CovariateModel::Tabulated(t) => t.values.iter().copied().reduce(T::max),
            CovariateModel::Gamma(_) => None,
        }
    }

    /// Points where the density is not smooth (1-D only).
    pub fn kinks(&self) -> Vec<T> {
        match self {
            CovariateModel::Tabulated(t) => t.knots[1..t.knots.len() - 1].to_vec(),
            _ => Vec::new(),
        }
    }

    /// Splits the 1-D support into panels at the density kinks and at any
    /// extra points strictly inside the support.
    pub fn panels_1d(&self, extra: &[T]) -> Vec<(T, T)> {
        let (lo, hi) = self.support_1d();
        let mut cuts: Vec<T> = self
            .kinks()
            .into_iter()
            .chain(extra.iter().copied())
            .filter(|&c| c > lo && c < hi)
            .collect();
        cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite cut"));
        let tol = T::lit(1e-13) * (hi - lo);
        cuts.dedup_by(|a, b| (*a - *b).abs() <= tol);
        let mut edges = Vec::with_capacity(cuts.len() + 2);
        edges.push(lo);
        edges.extend(cuts);
        edges.push(hi);
        edges.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// `∫ f` over the support, by quadrature.
    pub fn total_mass(&self, gl: &GaussLegendre<T>) -> T {
        match self {
            CovariateModel::UniformBox { .. } => T::one(),
            _ => self
                .panels_1d(&[])
                .into_iter()
                .map(|(a, b)| gl.integrate(a, b, |x| self.density_1d(x)))
                .sum(),
        }
    }

    /// Mean and variance of a 1-D covariate by quadrature on the truncated
    /// support (the values every engine integral is consistent with).
    pub fn mean_var_1d(&self, gl: &GaussLegendre<T>) -> (T, T) {
        let mut m0 = T::zero();
        let mut m1 = T::zero();
        let mut m2 = T::zero();
        for (a, b) in self.panels_1d(&[]) {
            for (x, w) in gl.mapped(a, b) {
                let wf = w * self.density_1d(x);
                m0 += wf;
                m1 += wf * x;
                m2 += wf * x * x;
            }
        }
        let mean = m1 / m0;
        (mean, m2 / m0 - mean * mean)
    }

    /// Closed-form mean and variance of the untruncated distribution.
    pub fn closed_form_mean_var(&self) -> Option<(T, T)> {
        match self {
            CovariateModel::UniformBox { bounds } if bounds.len() == 1 => {
                let (lo, hi) = bounds[0];
                Some(((lo + hi) * T::lit(0.5), (hi - lo) * (hi - lo) / T::lit(12.0)))
            }
            CovariateModel::Gamma(g) => Some((g.shape / g.rate, g.shape / (g.rate * g.rate))),
            _ => None,
        }
    }

    /// `(∫_a^b f, ∫_a^b x f)` for a 1-D covariate.
    pub fn partial_moments(&self, a: T, b: T) -> (T, T) {
        let (lo, hi) = self.support_1d();
        let a = a.max(lo);
        let b = b.min(hi);
        if !(b > a) {
            return (T::zero(), T::zero());
        }
        match self {
            CovariateModel::UniformBox { .. } => {
                let d = T::one() / (hi - lo);
                ((b - a) * d, (b * b - a * a) * T::lit(0.5) * d)
            }
            CovariateModel::Gamma(g) => {
                let gamma_lr = |a: f64, x: f64| {
                    if x <= 0.0 {
                        0.0
                    } else {
                        statrs::function::gamma::gamma_lr(a, x)
                    }
                };
                let (s, r) = (g.shape.to_f64_lossy(), g.rate.to_f64_lossy());
                let (af, bf) = (a.to_f64_lossy(), b.to_f64_lossy());
                let mass = gamma_lr(s, r * bf) - gamma_lr(s, r * af);
                let first = s / r * (gamma_lr(s + 1.0, r * bf) - gamma_lr(s + 1.0, r * af));
                (T::lit(mass), T::lit(first))
            }
            CovariateModel::Tabulated(_) => {
                // linear density times x is quadratic: 2-point Gauss is exact per segment
                let gl = GaussLegendre::<T>::new(2);
                let mut mass = T::zero();
                let mut first = T::zero();
                for (p, q) in self.panels_1d(&[a, b]) {
                    if p >= a && q <= b {
                        for (x, w) in gl.mapped(p, q) {
                            let wf = w * self.density_1d(x);
                            mass += wf;
                            first += wf * x;
                        }
                    }
                }
                (mass, first)
            }
        }
    }

    /// Draws one covariate vector.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        match self {
            CovariateModel::UniformBox { bounds } => bounds
                .iter()
                .map(|&(lo, hi)| lo + (hi - lo) * T::lit(rng.random::<f64>()))
                .collect(),
            _ => vec![self.sample_1d(rng)],
        }
    }

    pub fn sample_1d<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        match self {
            CovariateModel::UniformBox { bounds } => {
                let (lo, hi) = bounds[0];
                lo + (hi - lo) * T::lit(rng.random::<f64>())
            }
            CovariateModel::Gamma(g) => {
                let dist = rand_distr::Gamma::new(g.shape.to_f64_lossy(), 1.0 / g.rate.to_f64_lossy())
                    .expect("validated gamma parameters");
                let upper = g.upper.to_f64_lossy();
                loop {
                    let x: f64 = dist.sample(rng);
                    if x <= upper {
                        return T::lit(x);
                    }
                }
            }
            CovariateModel::Tabulated(t) => {
                let masses = t.segment_masses();
                let total: T = masses.iter().copied().sum();
                let mut u = T::lit(rng.random::<f64>()) * total;
                let mut seg = masses.len() - 1;
                for (i, &m) in masses.iter().enumerate() {
                    if u < m {
                        seg = i;
                        break;
                    }
                    u -= m;
                }
                let (x0, x1) = (t.knots[seg], t.knots[seg + 1]);
                let (f0, f1) = (t.values[seg], t.values[seg + 1]);
                let h = x1 - x0;
                let slope = (f1 - f0) / h;
                // solve f0 s + slope s²/2 = u for s in [0, h]
                let s = if slope.abs() <= T::lit(1e-14) * (f0.abs() + f1.abs()) {
                    if f0 > T::zero() {
                        u / f0
                    } else {
                        h * T::lit(0.5)
                    }
                } else {
                    let disc = (f0 * f0 + T::lit(2.0) * slope * u).max(T::zero());
                    (disc.sqrt() - f0) / slope
                };
                x0 + s.max(T::zero()).min(h)
            }
        }
    }
}
