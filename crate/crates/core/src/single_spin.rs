//! The single-spin law χ(du) ∝ exp(−V(u))du, its quadrature representation,
//! and the exponential-moment constants C_±(λ).
//!
//! χ is represented by a discrete measure on composite Gauss–Legendre nodes
//! over a truncated symmetric interval [−U, U]. The cutoff U comes from the
//! tail of exp(−V(u) + λ_max|u|^p + h_max|u|), which decays
//! super-exponentially because deg V > p. The grid is built on [0, U] and
//! mirrored, so the discrete measure is exactly even.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weights::{abs_pow, ModelExponents};

/// Even polynomial V(u) = Σ_k a_{2k} u^{2k}; `coefficients[k]` is a_{2k}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Potential {
    coefficients: Vec<f64>,
}

impl Potential {
    pub fn new(mut coefficients: Vec<f64>) -> Result<Self> {
        while coefficients.len() > 1 && *coefficients.last().unwrap() == 0.0 {
            coefficients.pop();
        }
        if coefficients.len() < 2 {
            return Err(Error::InvalidParameter(
                "potential must have positive degree".into(),
            ));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite potential coefficient".into()));
        }
        if *coefficients.last().unwrap() <= 0.0 {
            return Err(Error::InvalidParameter(
                "leading coefficient of the potential must be positive".into(),
            ));
        }
        Ok(Potential { coefficients })
    }

    /// V(u) = c·u^{2k}.
    pub fn monomial(c: f64, degree: usize) -> Result<Self> {
        if degree % 2 != 0 {
            return Err(Error::InvalidParameter("potential degree must be even".into()));
        }
        let mut coefficients = vec![0.0; degree / 2 + 1];
        coefficients[degree / 2] = c;
        Potential::new(coefficients)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn degree(&self) -> usize {
        2 * (self.coefficients.len() - 1)
    }

    pub fn eval(&self, u: f64) -> f64 {
        let u2 = u * u;
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * u2 + c)
    }

    fn derivative(&self, u: f64) -> f64 {
        let u2 = u * u;
        let mut acc = 0.0;
        for (k, c) in self.coefficients.iter().enumerate().skip(1).rev() {
            acc = acc * u2 + 2.0 * k as f64 * c;
        }
        acc * u
    }
}

impl TryFrom<Vec<f64>> for Potential {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Potential::new(v)
    }
}

impl From<Potential> for Vec<f64> {
    fn from(p: Potential) -> Self {
        p.coefficients
    }
}

/// Construction parameters for the quadrature grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    /// Panels on [−U, U]; must be even. Starting value when refining.
    pub panels: usize,
    /// Gauss–Legendre order per panel.
    pub order: usize,
    /// Largest λ for which e^{λ|u|^p} moments must be resolved.
    pub max_lambda: f64,
    /// Largest linear field |h| the cutoff must accommodate (boundary and
    /// neighbour couplings act on a single spin as fields).
    pub max_field: f64,
    /// Relative tolerance for the panel-doubling self-check.
    pub tol: f64,
    /// Upper limit on panels during refinement.
    pub max_panels: usize,
    /// Fixed cutoff U instead of the tail search.
    pub cutoff: Option<f64>,
    /// Run the panel-doubling self-check; when false the starting grid is used as is.
    pub refine: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            panels: 8,
            order: 8,
            max_lambda: 4.0,
            max_field: 24.0,
            tol: 1e-12,
            max_panels: 256,
            cutoff: None,
            refine: true,
        }
    }
}

impl GridConfig {
    /// Fixed grid of `panels × order` nodes without refinement, for
    /// multi-site tensor quadrature where node count dominates cost.
    pub fn fixed(panels: usize, order: usize) -> Self {
        GridConfig {
            panels,
            order,
            refine: false,
            ..GridConfig::default()
        }
    }
}

/// Composite Gauss–Legendre rule on [−U, U].
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    cutoff: f64,
    panels: usize,
    order: usize,
}

impl QuadratureGrid {
    pub fn composite(cutoff: f64, panels: usize, order: usize) -> Result<Self> {
        if !(cutoff > 0.0 && cutoff.is_finite()) {
            return Err(Error::InvalidParameter(format!("cutoff must be positive, got {cutoff}")));
        }
        if panels == 0 || panels % 2 != 0 {
            return Err(Error::InvalidParameter("panel count must be even and positive".into()));
        }
        let order_nz = NonZeroUsize::new(order)
            .ok_or_else(|| Error::InvalidParameter("quadrature order must be positive".into()))?;
        let rule = GaussLegendre::new(order_nz);
        let mut reference: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
        reference.sort_by(|a, b| a.0.total_cmp(&b.0));

        let half = panels / 2;
        let h = cutoff / half as f64;
        let mut positive = Vec::with_capacity(half * order);
        for k in 0..half {
            let a = k as f64 * h;
            for &(x, wt) in &reference {
                positive.push((a + 0.5 * h * (x + 1.0), 0.5 * h * wt));
            }
        }
        let mut nodes = Vec::with_capacity(2 * positive.len());
        let mut weights = Vec::with_capacity(2 * positive.len());
        for &(x, wt) in positive.iter().rev() {
            nodes.push(-x);
            weights.push(wt);
        }
        for &(x, wt) in &positive {
            nodes.push(x);
            weights.push(wt);
        }
        Ok(QuadratureGrid {
            nodes,
            weights,
            cutoff,
            panels,
            order,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Same cutoff and order, twice the panels.
    pub fn refined(&self) -> QuadratureGrid {
        QuadratureGrid::composite(self.cutoff, 2 * self.panels, self.order)
            .expect("refinement of a valid grid is valid")
    }
}

/// Smallest U beyond which exp(−V(u) + λ|u|^p + h|u|) has dropped by e^{-40}
/// below its running maximum and is decreasing at unit log-rate or faster.
fn search_cutoff(v: &Potential, p: f64, lambda: f64, field: f64) -> Result<f64> {
    let g = |u: f64| -v.eval(u) + lambda * abs_pow(u, p) + field * u;
    let dg = |u: f64| -v.derivative(u) + lambda * p * u.powf(p - 1.0) + field;
    const DROP: f64 = 40.0;
    let mut peak = g(0.0);
    let mut u = 0.0;
    let step = 1e-3;
    while u < 1e4 {
        u += step * (1.0 + u);
        let gu = g(u);
        peak = peak.max(gu);
        if gu < peak - DROP && dg(u) < -1.0 {
            return Ok(u);
        }
    }
    Err(Error::CutoffSearchFailed)
}

/// χ as a discrete probability measure on a quadrature grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SingleSpinMeasure {
    potential: Potential,
    normalizer: f64,
    grid: QuadratureGrid,
    /// χ-mass of each node: w_i e^{−V(u_i)} / normalizer.
    probabilities: Vec<f64>,
    log_probabilities: Vec<f64>,
    max_lambda: f64,
    p: f64,
}

impl SingleSpinMeasure {
    /// Builds and self-validates the measure: panels are doubled until the
    /// normalizer, the moments up to deg V and C_+(max_lambda) move by less
    /// than `config.tol` (relative).
    pub fn build(potential: Potential, exponents: &ModelExponents, config: &GridConfig) -> Result<Self> {
        let p = exponents.p();
        if potential.degree() as f64 <= p {
            return Err(Error::DegreeTooLow {
                degree: potential.degree(),
                p,
            });
        }
        if config.max_lambda < 0.0 || config.max_field < 0.0 || config.tol <= 0.0 {
            return Err(Error::InvalidParameter(
                "max_lambda, max_field must be ≥ 0 and tol > 0".into(),
            ));
        }
        let cutoff = match config.cutoff {
            Some(u) => u,
            None => search_cutoff(&potential, p, config.max_lambda, config.max_field)?,
        };
        let mut grid = QuadratureGrid::composite(cutoff, config.panels, config.order)?;
        let mut current = SingleSpinMeasure::from_grid(potential.clone(), grid.clone(), p, config.max_lambda)?;
        if !config.refine {
            return Ok(current);
        }
        loop {
            let finer_grid = grid.refined();
            if finer_grid.panels() > config.max_panels {
                return Err(Error::QuadratureNotConverged {
                    tol: config.tol,
                    panels: grid.panels(),
                });
            }
            let finer = SingleSpinMeasure::from_grid(potential.clone(), finer_grid.clone(), p, config.max_lambda)?;
            if current.self_check_delta(&finer) <= config.tol {
                return Ok(current);
            }
            grid = finer_grid;
            current = finer;
        }
    }

    /// Measure on a caller-supplied grid, no degree check. `max_lambda`
    /// bounds the exponential moments the caller may ask for.
    pub fn from_grid(potential: Potential, grid: QuadratureGrid, p: f64, max_lambda: f64) -> Result<Self> {
        let raw: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&u| -potential.eval(u))
            .collect();
        let shift = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let scaled: f64 = raw
            .iter()
            .zip(grid.weights())
            .map(|(r, w)| w * (r - shift).exp())
            .sum();
        let log_normalizer = shift + scaled.ln();
        let normalizer = log_normalizer.exp();
        if !(normalizer > 0.0 && normalizer.is_finite()) {
            return Err(Error::InvalidParameter("potential is not normalizable on the grid".into()));
        }
        let log_probabilities: Vec<f64> = raw
            .iter()
            .zip(grid.weights())
            .map(|(r, w)| w.ln() + r - log_normalizer)
            .collect();
        let probabilities = log_probabilities.iter().map(|l| l.exp()).collect();
        Ok(SingleSpinMeasure {
            potential,
            normalizer,
            grid,
            probabilities,
            log_probabilities,
            max_lambda,
            p,
        })
    }

    fn self_check_delta(&self, finer: &SingleSpinMeasure) -> f64 {
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-300);
        let mut worst = rel(self.normalizer, finer.normalizer);
        for k in (2..=self.potential.degree()).step_by(2) {
            worst = worst.max(rel(self.moment(k as i32), finer.moment(k as i32)));
        }
        if let (Ok(a), Ok(b)) = (self.c_plus(self.max_lambda, self.p), finer.c_plus(self.max_lambda, self.p)) {
            worst = worst.max(rel(a, b));
        }
        worst
    }

    /// Same potential on the grid with doubled panels.
    pub fn refined(&self) -> SingleSpinMeasure {
        SingleSpinMeasure::from_grid(self.potential.clone(), self.grid.refined(), self.p, self.max_lambda)
            .expect("refined grid stays valid")
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    /// ∫ e^{−V(u)} du over the grid.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn nodes(&self) -> &[f64] {
        self.grid.nodes()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn log_probabilities(&self) -> &[f64] {
        &self.log_probabilities
    }

    pub fn max_lambda(&self) -> f64 {
        self.max_lambda
    }

    /// p = 2q/(q−1) the grid was built for.
    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// ∫ f dχ.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes()
            .iter()
            .zip(&self.probabilities)
            .map(|(&u, &m)| m * f(u))
            .sum()
    }

    /// ∫ u^k dχ.
    pub fn moment(&self, k: i32) -> f64 {
        self.expect(|u| u.powi(k))
    }

    /// log ∫ e^{s|u|^p} dχ, accumulated with max subtraction.
    fn log_exp_moment(&self, s: f64, p: f64) -> f64 {
        let terms: Vec<f64> = self
            .nodes()
            .iter()
            .zip(&self.log_probabilities)
            .map(|(&u, &l)| l + s * abs_pow(u, p))
            .collect();
        crate::stats::log_sum_exp(&terms)
    }

    /// C_+(λ) = ∫ e^{λ|u|^p} dχ for 0 ≤ λ ≤ max_lambda.
    pub fn c_plus(&self, lambda: f64, p: f64) -> Result<f64> {
        Ok(self.log_c_plus(lambda, p)?.exp())
    }

    pub fn log_c_plus(&self, lambda: f64, p: f64) -> Result<f64> {
        if lambda > self.max_lambda * (1.0 + 1e-12) {
            return Err(Error::LambdaOutOfRange {
                lambda,
                max: self.max_lambda,
            });
        }
        if lambda < 0.0 {
            return Err(Error::InvalidParameter(format!("lambda must be ≥ 0, got {lambda}")));
        }
        Ok(self.log_exp_moment(lambda, p))
    }

    /// C_−(λ) = ∫ e^{−λ|u|^p} dχ ∈ (0, 1] for λ ≥ 0.
    pub fn c_minus(&self, lambda: f64, p: f64) -> Result<f64> {
        Ok(self.log_c_minus(lambda, p)?.exp())
    }

    pub fn log_c_minus(&self, lambda: f64, p: f64) -> Result<f64> {
        if lambda < 0.0 {
            return Err(Error::InvalidParameter(format!("lambda must be ≥ 0, got {lambda}")));
        }
        Ok(self.log_exp_moment(-lambda, p))
    }

    /// C(λ,ϰ) = log C_+(λ + 2dϰ) − log C_−(2dϰ).
    pub fn one_point_constant(&self, lambda: f64, kappa: f64, d: usize, p: f64) -> Result<f64> {
        if !(lambda > 0.0 && kappa > 0.0) {
            return Err(Error::InvalidParameter("lambda and kappa must be positive".into()));
        }
        let s = 2.0 * d as f64 * kappa;
        Ok(self.log_c_plus(lambda + s, p)? - self.log_c_minus(s, p)?)
    }
}
