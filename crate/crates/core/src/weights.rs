//! The weight w(x) = e^{−α|x|}, the tempered norms ‖σ‖_p and ‖J‖_q, and the
//! finite configurations they are evaluated on.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Edge, Region, Site};

/// w(x) = exp(−α‖x‖₁) on ℤᵈ.
///
/// With the ℓ¹ norm the lattice sum factorizes over coordinates, giving
/// |w| = ((1+e^{−α})/(1−e^{−α}))^d. Adjacent sites differ by one in ‖·‖₁, so
/// w(x) ≤ e^{α} w(y) for x ∼ y and w0 = e^{α} is the tight constant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightFunction {
    alpha: f64,
    d: usize,
    total_mass: f64,
    w0: f64,
}

impl WeightFunction {
    pub fn new(alpha: f64, d: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        let r = (-alpha).exp();
        let total_mass = ((1.0 + r) / (1.0 - r)).powi(d as i32);
        Ok(WeightFunction {
            alpha,
            d,
            total_mass,
            w0: alpha.exp(),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// |w| = Σ_x w(x) over the whole lattice.
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn w0(&self) -> f64 {
        self.w0
    }

    pub fn weight_at(&self, x: &Site) -> f64 {
        debug_assert_eq!(x.dim(), self.d);
        (-self.alpha * x.l1_norm() as f64).exp()
    }
}

/// The exponents q > 1 and p = 2q/(q−1) > 2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelExponents {
    q: f64,
    p: f64,
}

impl ModelExponents {
    pub fn from_q(q: f64) -> Result<Self> {
        if !(q > 1.0 && q.is_finite()) {
            return Err(Error::InvalidParameter(format!("q must exceed 1, got {q}")));
        }
        Ok(ModelExponents {
            q,
            p: 2.0 * q / (q - 1.0),
        })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

/// |u|^p with an integer fast path.
#[inline]
pub(crate) fn abs_pow(u: f64, p: f64) -> f64 {
    if p == 4.0 {
        let s = u * u;
        s * s
    } else if p.fract() == 0.0 && p.abs() < 64.0 {
        u.abs().powi(p as i32)
    } else {
        u.abs().powf(p)
    }
}

/// Spin values on a finite set of sites (typically Δ ∪ ∂Δ).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpinConfig(BTreeMap<Site, f64>);

impl SpinConfig {
    pub fn new() -> Self {
        SpinConfig(BTreeMap::new())
    }

    pub fn zeros<'a, I: IntoIterator<Item = &'a Site>>(sites: I) -> Self {
        SpinConfig(sites.into_iter().map(|s| (s.clone(), 0.0)).collect())
    }

    pub fn from_fn<'a, I, F>(sites: I, mut f: F) -> Self
    where
        I: IntoIterator<Item = &'a Site>,
        F: FnMut(&Site) -> f64,
    {
        SpinConfig(sites.into_iter().map(|s| (s.clone(), f(s))).collect())
    }

    pub fn get(&self, x: &Site) -> Option<f64> {
        self.0.get(x).copied()
    }

    pub fn value(&self, x: &Site) -> Result<f64> {
        self.get(x).ok_or_else(|| Error::MissingSpin(x.clone()))
    }

    pub fn set(&mut self, x: Site, v: f64) {
        self.0.insert(x, v);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Site, f64)> {
        self.0.iter().map(|(s, v)| (s, *v))
    }

    pub fn sites(&self) -> impl Iterator<Item = &Site> {
        self.0.keys()
    }

    /// Juxtaposition σ_Δ × ξ: values of `self` overwritten by `inner`.
    pub fn juxtapose(&self, inner: &SpinConfig) -> SpinConfig {
        let mut out = self.clone();
        for (s, v) in inner.iter() {
            out.set(s.clone(), v);
        }
        out
    }

    pub fn scaled(&self, c: f64) -> SpinConfig {
        SpinConfig(self.0.iter().map(|(s, v)| (s.clone(), c * v)).collect())
    }
}

impl FromIterator<(Site, f64)> for SpinConfig {
    fn from_iter<T: IntoIterator<Item = (Site, f64)>>(iter: T) -> Self {
        SpinConfig(iter.into_iter().collect())
    }
}

/// Couplings J_xy on a finite set of edges.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CouplingField(BTreeMap<Edge, f64>);

impl CouplingField {
    pub fn new() -> Self {
        CouplingField(BTreeMap::new())
    }

    /// Same value on every edge touching the region.
    pub fn constant(region: &Region, value: f64) -> Self {
        CouplingField(region.all_edges().map(|e| (e, value)).collect())
    }

    pub fn from_fn<F: FnMut(&Edge) -> f64>(region: &Region, mut f: F) -> Self {
        CouplingField(
            region
                .all_edges()
                .map(|e| {
                    let v = f(&e);
                    (e, v)
                })
                .collect(),
        )
    }

    pub fn get(&self, e: &Edge) -> Option<f64> {
        self.0.get(e).copied()
    }

    pub fn value(&self, e: &Edge) -> Result<f64> {
        self.get(e).ok_or_else(|| Error::MissingCoupling(e.clone()))
    }

    /// Coupling between two adjacent sites.
    pub fn between(&self, x: &Site, y: &Site) -> Result<f64> {
        self.value(&Edge::new(x.clone(), y.clone())?)
    }

    pub fn set(&mut self, e: Edge, v: f64) {
        self.0.insert(e, v);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Edge, f64)> {
        self.0.iter().map(|(e, v)| (e, *v))
    }

    /// The field restricted to the edges touching `region`.
    pub fn restricted_to(&self, region: &Region) -> Result<CouplingField> {
        region
            .all_edges()
            .map(|e| {
                let v = self.value(&e)?;
                Ok((e, v))
            })
            .collect::<Result<BTreeMap<_, _>>>()
            .map(CouplingField)
    }

    pub fn map<F: FnMut(&Edge, f64) -> f64>(&self, mut f: F) -> CouplingField {
        CouplingField(self.0.iter().map(|(e, v)| (e.clone(), f(e, *v))).collect())
    }

    pub fn scaled(&self, c: f64) -> CouplingField {
        self.map(|_, v| c * v)
    }

    /// Pointwise difference on the union of the two edge sets (missing = 0).
    pub fn difference(&self, other: &CouplingField) -> CouplingField {
        let mut out = self.0.clone();
        for (e, v) in other.iter() {
            *out.entry(e.clone()).or_insert(0.0) -= v;
        }
        CouplingField(out)
    }
}

impl FromIterator<(Edge, f64)> for CouplingField {
    fn from_iter<T: IntoIterator<Item = (Edge, f64)>>(iter: T) -> Self {
        CouplingField(iter.into_iter().collect())
    }
}

/// ‖σ‖_p^p = Σ_x |σ(x)|^p w(x) over the configuration's sites.
pub fn norm_p_pow(sigma: &SpinConfig, w: &WeightFunction, p: f64) -> f64 {
    sigma.iter().map(|(x, v)| abs_pow(v, p) * w.weight_at(x)).sum()
}

/// ‖σ‖_p.
pub fn norm_p(sigma: &SpinConfig, w: &WeightFunction, p: f64) -> f64 {
    norm_p_pow(sigma, w, p).powf(1.0 / p)
}

/// ‖J‖_q^q = Σ_⟨x,y⟩ |J_xy|^q [w(x) + w(y)] over the field's edges.
pub fn norm_q_pow(j: &CouplingField, w: &WeightFunction, q: f64) -> f64 {
    j.iter()
        .map(|(e, v)| {
            let (a, b) = e.endpoints();
            abs_pow(v, q) * (w.weight_at(a) + w.weight_at(b))
        })
        .sum()
}

/// ‖J‖_q.
pub fn norm_q(j: &CouplingField, w: &WeightFunction, q: f64) -> f64 {
    norm_q_pow(j, w, q).powf(1.0 / q)
}

/// Both sides of the three-factor Young inequality
/// abc ≤ ϰ(b^p + c^p) + (p−2) p^{−p/(p−2)} ϰ^{−2/(p−2)} a^{p/(p−2)}, p > 2.
pub fn young_bound(a: f64, b: f64, c: f64, kappa: f64, p: f64) -> (f64, f64) {
    debug_assert!(p > 2.0 && kappa > 0.0);
    let lhs = a * b * c;
    let r = p / (p - 2.0);
    let rhs = kappa * (b.powf(p) + c.powf(p))
        + (p - 2.0) * p.powf(-r) * kappa.powf(-2.0 / (p - 2.0)) * a.powf(r);
    (lhs, rhs)
}
