//! Ideal regret: expected utility loss when each arm's fitted response is
//! replaced by its Gaussian large-sample approximation.

use crate::covariate::CovariateModel;
use crate::error::{DesignError, Result};
use crate::linalg::SymMatrix;
use crate::quadrature::{GaussLegendre, StdNormalRule};
use crate::real::Real;
use crate::rules::{arm_moments, AllocationRule, ArmMoments};
use crate::scenario::{Basis, Scenario};

/// Φ arguments beyond this are treated as exactly 0 or 1.
const PHI_CLAMP: f64 = 38.0;
/// Breakpoint layers narrower than panel length over this get graded panels.
const REFINE_RATIO: f64 = 256.0;
/// Gauss-Hermite is used for the selection kernel while every `ξ_k/ξ_l`
/// stays at or below this; steeper factors switch to panelled Legendre.
const HERMITE_MAX_RATIO: f64 = 2.0;
/// Half-width of the standard normal range covered by the panelled rule.
const KERNEL_Z_MAX: f64 = 8.5;
const KERNEL_PANEL_NODES: usize = 16;
/// Panel cuts around each steep factor, in units of its transition width.
const KERNEL_LAYER_CUTS: [f64; 9] = [-6.0, -3.0, -1.5, -0.5, 0.0, 0.5, 1.5, 3.0, 6.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    /// Gauss-Hermite nodes for the selection-probability integral.
    pub hermite_nodes: usize,
    /// Hermite nodes lighter than this are skipped; the probabilities move
    /// by at most the skipped mass.
    pub hermite_min_weight: f64,
    /// Gauss-Legendre nodes per covariate panel.
    pub legendre_nodes: usize,
    /// Outer nodes for a two-dimensional covariate.
    pub outer_nodes: usize,
    /// Add geometrically graded panels around envelope breakpoints so the
    /// `O(n^-1/2)` boundary layer stays resolved at large `n`.
    pub refine_breakpoints: bool,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            hermite_nodes: 64,
            hermite_min_weight: 1e-16,
            legendre_nodes: 256,
            outer_nodes: 128,
            refine_breakpoints: true,
        }
    }
}

/// `ξ²(x) = hᵗ Σ h` for design vector `h = (1, features(x))`.
#[inline]
pub fn xi_sq<T: Real>(sigma: &SymMatrix<T>, h: &[T]) -> T {
    sigma.quad_form(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Path {
    Kernel,
    TwoClosed,
}

/// Reusable quadrature rules for ideal-regret evaluation.
#[derive(Debug, Clone)]
pub struct IdealRegret<T> {
    config: QuadConfig,
    hermite: StdNormalRule<T>,
    legendre: GaussLegendre<T>,
    outer: GaussLegendre<T>,
    kernel_panel: GaussLegendre<T>,
}

impl<T: Real> Default for IdealRegret<T> {
    fn default() -> Self {
        Self::new(QuadConfig::default())
    }
}

struct Workspace<T> {
    h: Vec<T>,
    g: Vec<T>,
    xi: Vec<T>,
}

impl<T: Real> Workspace<T> {
    fn new(k: usize, dl: usize) -> Self {
        Self {
            h: vec![T::zero(); dl],
            g: vec![T::zero(); k],
            xi: vec![T::zero(); k],
        }
    }

    /// Fills `g` and `ξ` from the design vector already in `h`.
    fn load(&mut self, scenario: &Scenario<T>, sigmas: &[&SymMatrix<T>]) {
        for (k, s) in sigmas.iter().enumerate() {
            self.g[k] = scenario.g_design(k, &self.h);
            self.xi[k] = s.quad_form(&self.h).sqrt();
        }
    }
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 {
        return Err(DesignError::InvalidInput("sample size n must be >= 1".into()));
    }
    Ok(())
}

fn covariances<'a, T: Real>(moments: &'a ArmMoments<T>, scenario: &Scenario<T>) -> Result<Vec<&'a SymMatrix<T>>> {
    if moments.arms.len() != scenario.n_arms() {
        return Err(DesignError::InvalidInput(format!(
            "moments describe {} arms, scenario has {}",
            moments.arms.len(),
            scenario.n_arms()
        )));
    }
    moments.require_fed()?;
    (0..scenario.n_arms()).map(|k| moments.covariance(k)).collect()
}

fn argmax<T: Real>(g: &[T]) -> usize {
    let mut best = 0;
    for k in 1..g.len() {
        if g[k] > g[best] {
            best = k;
        }
    }
    best
}

impl<T: Real> IdealRegret<T> {
    pub fn new(config: QuadConfig) -> Self {
        Self {
            config,
            hermite: StdNormalRule::with_min_weight(config.hermite_nodes, config.hermite_min_weight),
            legendre: GaussLegendre::new(config.legendre_nodes),
            outer: GaussLegendre::new(config.outer_nodes),
            kernel_panel: GaussLegendre::new(KERNEL_PANEL_NODES),
        }
    }

    pub fn config(&self) -> &QuadConfig {
        &self.config
    }

    /// `Π_{l≠k} Φ((zξ_k + √n(g_k − g_l))/ξ_l)`.
    #[inline]
    fn kernel_integrand(k: usize, z: T, g: &[T], xi: &[T], sqrt_n: T) -> T {
        let clamp = T::lit(PHI_CLAMP);
        let mut prod = T::one();
        for l in 0..g.len() {
            if l == k {
                continue;
            }
            let arg = (z * xi[k] + sqrt_n * (g[k] - g[l])) / xi[l];
            if arg <= -clamp {
                return T::zero();
            }
            if arg < clamp {
                prod *= arg.norm_cdf();
            }
        }
        prod
    }

    /// `P(ĝ_k > ĝ_l ∀ l ≠ k)` given utilities `g`, standard errors `ξ` and `√n`.
    fn kernel_prob(&self, k: usize, g: &[T], xi: &[T], sqrt_n: T) -> T {
        let limit = T::lit(HERMITE_MAX_RATIO);
        let steep = (0..g.len()).any(|l| l != k && xi[k] > limit * xi[l]);
        if !steep {
            return self
                .hermite
                .iter()
                .map(|(z, w)| w * Self::kernel_integrand(k, z, g, xi, sqrt_n))
                .fold(T::zero(), |a, b| a + b);
        }
        let zmax = T::lit(KERNEL_Z_MAX);
        let mut cuts: Vec<T> = (0..=17).map(|i| T::lit(-KERNEL_Z_MAX + i as f64)).collect();
        for l in 0..g.len() {
            if l == k || xi[k] <= limit * xi[l] {
                continue;
            }
            let centre = -sqrt_n * (g[k] - g[l]) / xi[k];
            let width = xi[l] / xi[k];
            cuts.extend(
                KERNEL_LAYER_CUTS
                    .iter()
                    .map(|&c| centre + T::lit(c) * width)
                    .filter(|&z| z > -zmax && z < zmax),
            );
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite cut"));
        cuts.dedup();
        let mut acc = T::zero();
        for w in cuts.windows(2) {
            acc += self
                .kernel_panel
                .integrate(w[0], w[1], |z| z.norm_pdf() * Self::kernel_integrand(k, z, g, xi, sqrt_n));
        }
        acc
    }

    /// Expected regret at one covariate value.
    #[inline]
    fn pointwise(&self, path: Path, g: &[T], xi: &[T], sqrt_n: T) -> T {
        let best = argmax(g);
        let clamp = T::lit(PHI_CLAMP);
        let mut total = T::zero();
        for k in 0..g.len() {
            if k == best {
                continue;
            }
            let gap = g[best] - g[k];
            // P(k) ≤ P(ĝ_k > ĝ_best) = Φ(pair_arg)
            let pair_arg = -sqrt_n * gap / (xi[k] * xi[k] + xi[best] * xi[best]).sqrt();
            if pair_arg <= -clamp {
                continue;
            }
            let p = match path {
                Path::TwoClosed => pair_arg.norm_cdf(),
                Path::Kernel => self.kernel_prob(k, g, xi, sqrt_n),
            };
            total += p * gap;
        }
        total
    }

    /// Probability that arm `k` (0-based) has the largest fitted utility at `x`.
    pub fn prob_select(
        &self,
        scenario: &Scenario<T>,
        moments: &ArmMoments<T>,
        x: &[T],
        k: usize,
        n: u64,
    ) -> Result<T> {
        check_n(n)?;
        let sigmas = covariances(moments, scenario)?;
        scenario.g_eval(k, x)?;
        let mut ws = Workspace::new(scenario.n_arms(), scenario.basis().design_len());
        scenario.basis().fill_design(x, &mut ws.h);
        ws.load(scenario, &sigmas);
        Ok(self.kernel_prob(k, &ws.g, &ws.xi, T::from_u64(n).expect("n fits").sqrt()))
    }

    /// Ideal regret of the arm moments at sample size `n`. Uses the
    /// single-probability closed form for two arms.
    pub fn evaluate(&self, scenario: &Scenario<T>, moments: &ArmMoments<T>, n: u64) -> Result<T> {
        let path = if scenario.n_arms() == 2 {
            Path::TwoClosed
        } else {
            Path::Kernel
        };
        self.integrate(scenario, moments, n, path)
    }

    /// As [`IdealRegret::evaluate`] but always through the K-arm selection
    /// kernel.
    pub fn evaluate_kernel(&self, scenario: &Scenario<T>, moments: &ArmMoments<T>, n: u64) -> Result<T> {
        self.integrate(scenario, moments, n, Path::Kernel)
    }

    /// Two-arm closed form; errors for any other arm count.
    pub fn evaluate_two_closed(&self, scenario: &Scenario<T>, moments: &ArmMoments<T>, n: u64) -> Result<T> {
        if scenario.n_arms() != 2 {
            return Err(DesignError::InvalidInput(format!(
                "two-arm closed form needs K = 2, scenario has {}",
                scenario.n_arms()
            )));
        }
        self.integrate(scenario, moments, n, Path::TwoClosed)
    }

    /// Moments under `rule`, then [`IdealRegret::evaluate`].
    pub fn evaluate_rule(&self, scenario: &Scenario<T>, rule: &AllocationRule<T>, n: u64) -> Result<T> {
        let m = arm_moments(rule, scenario)?;
        self.evaluate(scenario, &m, n)
    }

    fn integrate(&self, scenario: &Scenario<T>, moments: &ArmMoments<T>, n: u64, path: Path) -> Result<T> {
        check_n(n)?;
        let sigmas = covariances(moments, scenario)?;
        match scenario.dim() {
            1 => Ok(self.integrate_1d(scenario, &sigmas, n, path)),
            2 => self.integrate_2d(scenario, &sigmas, n, path),
            p => Err(DesignError::Unsupported(format!(
                "ideal regret for a {p}-dimensional covariate"
            ))),
        }
    }

    /// Panel edges over `[lo, hi]`: density kinks, envelope breakpoints and,
    /// when enabled, graded refinement around each breakpoint with layer
    /// width `w`. A side is refined only when the layer is too thin for the
    /// end-clustered Legendre nodes of an unrefined panel.
    fn edges(&self, lo: T, hi: T, kinks: &[T], crossings: &[(T, T)]) -> Vec<T> {
        let mut cuts: Vec<T> = kinks.to_vec();
        let thetas: Vec<T> = crossings.iter().map(|c| c.0).collect();
        cuts.extend(thetas.iter().copied());
        if self.config.refine_breakpoints {
            let four = T::lit(4.0);
            for (m, &(theta, w)) in crossings.iter().enumerate() {
                if !(w > T::zero()) || !w.is_finite() {
                    continue;
                }
                let left = if m == 0 { lo } else { thetas[m - 1] };
                let right = if m + 1 == thetas.len() { hi } else { thetas[m + 1] };
                let thin = |room: T| w * T::lit(REFINE_RATIO) < room;
                let room_l = if thin(theta - left) { (theta - left) / four } else { T::zero() };
                let room_r = if thin(right - theta) { (right - theta) / four } else { T::zero() };
                let mut s = w;
                while s < room_l || s < room_r {
                    if s < room_l {
                        cuts.push(theta - s);
                    }
                    if s < room_r {
                        cuts.push(theta + s);
                    }
                    s *= four;
                }
            }
        }
        cuts.retain(|&c| c > lo && c < hi);
        cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite cut"));
        let tol = T::lit(1e-13) * (hi - lo);
        cuts.dedup_by(|a, b| (*a - *b).abs() <= tol);
        let mut edges = Vec::with_capacity(cuts.len() + 2);
        edges.push(lo);
        edges.extend(cuts);
        edges.push(hi);
        edges
    }

    fn panel_sum<F: FnMut(T) -> T>(&self, edges: &[T], mut f: F) -> T {
        let mut total = T::zero();
        for e in edges.windows(2) {
            let mut panel = T::zero();
            for (x, w) in self.legendre.mapped(e[0], e[1]) {
                panel += w * f(x);
            }
            total += panel;
        }
        total
    }

    fn integrate_1d(&self, scenario: &Scenario<T>, sigmas: &[&SymMatrix<T>], n: u64, path: Path) -> T {
        let cov = scenario.covariate();
        let basis = scenario.basis();
        let (lo, hi) = cov.support_1d();
        let nf = T::from_u64(n).expect("n fits");
        let sqrt_n = nf.sqrt();
        let mut ws = Workspace::new(scenario.n_arms(), basis.design_len());

        let crossings: Vec<(T, T)> = scenario
            .envelope_1d()
            .iter()
            .map(|c| {
                basis.fill_design(&[c.theta], &mut ws.h);
                let v = sigmas[c.left].quad_form(&ws.h) + sigmas[c.right].quad_form(&ws.h);
                let slope = (scenario.dg_1d(c.left, c.theta) - scenario.dg_1d(c.right, c.theta)).abs();
                (c.theta, (v / nf).sqrt() / slope)
            })
            .collect();
        let edges = self.edges(lo, hi, &cov.kinks(), &crossings);
        self.panel_sum(&edges, |x| {
            let f = cov.density_1d(x);
            if f == T::zero() {
                return T::zero();
            }
            basis.fill_design(&[x], &mut ws.h);
            ws.load(scenario, sigmas);
            f * self.pointwise(path, &ws.g, &ws.xi, sqrt_n)
        })
    }

    /// Outer integral over `x₂`; for each slice the inner `x₁` integral is
    /// panel-split at that slice's envelope breakpoints.
    fn integrate_2d(&self, scenario: &Scenario<T>, sigmas: &[&SymMatrix<T>], n: u64, path: Path) -> Result<T> {
        let cov = scenario.covariate();
        if !matches!(scenario.basis(), Basis::Linear { dim: 2 }) || !matches!(cov, CovariateModel::UniformBox { .. }) {
            return Err(DesignError::Unsupported(
                "two-dimensional ideal regret needs a linear basis on a uniform box".into(),
            ));
        }
        let support = cov.support();
        let ((lo1, hi1), (lo2, hi2)) = (support[0], support[1]);
        let nf = T::from_u64(n).expect("n fits");
        let sqrt_n = nf.sqrt();
        let k = scenario.n_arms();
        let arms = scenario.arms();

        // x₂ where a pairwise crossing line enters or leaves the x₁ range
        let mut outer_cuts = Vec::new();
        for i in 0..k {
            for j in (i + 1)..k {
                let (ci, cj) = (arms[i].coefficients(), arms[j].coefficients());
                let (d0, d1, d2) = (ci[0] - cj[0], ci[1] - cj[1], ci[2] - cj[2]);
                if d2 != T::zero() {
                    for edge in [lo1, hi1] {
                        outer_cuts.push(-(d0 + d1 * edge) / d2);
                    }
                }
            }
        }
        let outer_edges = self.edges(lo2, hi2, &outer_cuts, &[]);
        let density = cov.density(&[lo1, lo2]);
        let mut ws = Workspace::new(k, 3);

        let mut total = T::zero();
        for e in outer_edges.windows(2) {
            let mut panel = T::zero();
            for (x2, w2) in self.outer.mapped(e[0], e[1]) {
                let params: Vec<(T, T, T)> = arms
                    .iter()
                    .map(|a| (a.alpha - a.cost + a.beta[1] * x2, a.beta[0], a.sigma))
                    .collect();
                let slice = Scenario::linear_1d(&params, CovariateModel::uniform(lo1, hi1))?;
                let crossings: Vec<(T, T)> = slice
                    .envelope_1d()
                    .iter()
                    .map(|c| {
                        let h = [T::one(), c.theta, x2];
                        let v = sigmas[c.left].quad_form(&h) + sigmas[c.right].quad_form(&h);
                        let slope = (arms[c.left].beta[0] - arms[c.right].beta[0]).abs();
                        (c.theta, (v / nf).sqrt() / slope)
                    })
                    .collect();
                let edges = self.edges(lo1, hi1, &[], &crossings);
                let inner = self.panel_sum(&edges, |x1| {
                    ws.h[0] = T::one();
                    ws.h[1] = x1;
                    ws.h[2] = x2;
                    ws.load(scenario, sigmas);
                    self.pointwise(path, &ws.g, &ws.xi, sqrt_n)
                });
                panel += w2 * inner;
            }
            total += panel;
        }
        Ok(total * density)
    }
}

/// Selection probability for arm `k` (0-based) at `x` under `rule`.
pub fn prob_select<T: Real>(
    scenario: &Scenario<T>,
    rule: &AllocationRule<T>,
    x: &[T],
    k: usize,
    n: u64,
) -> Result<T> {
    let m = arm_moments(rule, scenario)?;
    IdealRegret::default().prob_select(scenario, &m, x, k, n)
}

/// Ideal regret of `rule` at sample size `n` with default quadrature.
pub fn ideal_regret<T: Real>(scenario: &Scenario<T>, rule: &AllocationRule<T>, n: u64) -> Result<T> {
    IdealRegret::default().evaluate_rule(scenario, rule, n)
}

/// Two-arm ideal regret via `∫ Φ(−√n|g₁−g₂|/√V) |g₁−g₂| f`.
pub fn ideal_regret_two_closed<T: Real>(scenario: &Scenario<T>, rule: &AllocationRule<T>, n: u64) -> Result<T> {
    let m = arm_moments(rule, scenario)?;
    IdealRegret::default().evaluate_two_closed(scenario, &m, n)
}
