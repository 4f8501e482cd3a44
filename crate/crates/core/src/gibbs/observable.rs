use std::fmt;
use std::sync::Arc;

use super::layout::Layout;
use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::weights::{abs_pow, SpinConfig, WeightFunction};

/// Function of the spin values at an observable's support, in support order.
pub type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum ObservableKind {
    /// f(σ(x_1), …, σ(x_k)); support sites may lie in Δ or on ∂Δ.
    Local { support: Vec<Site>, f: Evaluator },
    /// F_N = exp(λ min{‖σ‖_p^p, N}) with the norm over Δ ∪ ∂Δ.
    TruncatedExpNorm { lambda: f64, cap: f64 },
    /// 1{‖σ‖_p > r} with the norm over Δ ∪ ∂Δ.
    NormExceeds { r: f64 },
    /// ‖σ‖_p^p over Δ ∪ ∂Δ.
    NormPow,
}

/// A named test function f with optional bound ‖f‖_∞ and moment degree.
#[derive(Clone)]
pub struct Observable {
    pub name: String,
    pub kind: ObservableKind,
    pub bound: Option<f64>,
    pub degree: Option<u32>,
    pub family_index: Option<usize>,
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Observable")
            .field("name", &self.name)
            .field("bound", &self.bound)
            .field("degree", &self.degree)
            .field("family_index", &self.family_index)
            .finish()
    }
}

impl Observable {
    pub fn local<F>(name: impl Into<String>, support: Vec<Site>, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Observable {
            name: name.into(),
            kind: ObservableKind::Local {
                support,
                f: Arc::new(f),
            },
            bound: None,
            degree: None,
            family_index: None,
        }
    }

    /// σ(x)^k.
    pub fn moment(x: &Site, k: u32) -> Self {
        let mut o = Observable::local(format!("s{x}^{k}"), vec![x.clone()], move |v| v[0].powi(k as i32));
        o.degree = Some(k);
        o
    }

    /// σ(x).
    pub fn spin(x: &Site) -> Self {
        let mut o = Observable::local(format!("s{x}"), vec![x.clone()], |v| v[0]);
        o.degree = Some(1);
        o
    }

    /// |σ(x)|^p.
    pub fn abs_moment(x: &Site, p: f64) -> Self {
        let mut o = Observable::local(format!("|s{x}|^{p}"), vec![x.clone()], move |v| abs_pow(v[0], p));
        o.degree = Some(p.ceil() as u32);
        o
    }

    /// σ(x)σ(y).
    pub fn product(x: &Site, y: &Site) -> Self {
        let mut o = Observable::local(format!("s{x}s{y}"), vec![x.clone(), y.clone()], |v| v[0] * v[1]);
        o.degree = Some(2);
        o
    }

    /// tanh σ(x), bounded by 1.
    pub fn tanh_spin(x: &Site) -> Self {
        Observable::local(format!("tanh s{x}"), vec![x.clone()], |v| v[0].tanh()).with_bound(1.0)
    }

    pub fn truncated_exp_norm(lambda: f64, cap: f64) -> Self {
        Observable {
            name: format!("F_N(lambda={lambda},N={cap})"),
            kind: ObservableKind::TruncatedExpNorm { lambda, cap },
            bound: Some((lambda * cap).exp()),
            degree: None,
            family_index: None,
        }
    }

    pub fn norm_exceeds(r: f64) -> Self {
        Observable {
            name: format!("1{{|s|_p>{r}}}"),
            kind: ObservableKind::NormExceeds { r },
            bound: Some(1.0),
            degree: None,
            family_index: None,
        }
    }

    pub fn norm_pow() -> Self {
        Observable {
            name: "|s|_p^p".into(),
            kind: ObservableKind::NormPow,
            bound: None,
            degree: None,
            family_index: None,
        }
    }

    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound = Some(bound);
        self
    }

    pub fn with_family_index(mut self, i: usize) -> Self {
        self.family_index = Some(i);
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Direct evaluation on a configuration; norms run over every site of `sigma`.
    pub fn evaluate(&self, sigma: &SpinConfig, w: &WeightFunction, p: f64) -> Result<f64> {
        let norm = || sigma.iter().map(|(x, v)| abs_pow(v, p) * w.weight_at(x)).sum::<f64>();
        Ok(match &self.kind {
            ObservableKind::Local { support, f } => {
                let args = support.iter().map(|x| sigma.value(x)).collect::<Result<Vec<_>>>()?;
                f(&args)
            }
            ObservableKind::TruncatedExpNorm { lambda, cap } => (lambda * norm().min(*cap)).exp(),
            ObservableKind::NormExceeds { r } => {
                if norm() > abs_pow(*r, p) {
                    1.0
                } else {
                    0.0
                }
            }
            ObservableKind::NormPow => norm(),
        })
    }

    /// Support indices in the layout and the evaluator bound to them.
    pub(crate) fn bind(&self, layout: &Layout, p: f64) -> Result<Bound> {
        Ok(match &self.kind {
            ObservableKind::Local { support, f } => {
                let idx = support
                    .iter()
                    .map(|x| layout.index_of(x).ok_or_else(|| Error::MissingSpin(x.clone())))
                    .collect::<Result<Vec<_>>>()?;
                Bound::Local { idx, f: f.clone() }
            }
            ObservableKind::TruncatedExpNorm { lambda, cap } => Bound::ExpNorm {
                lambda: *lambda,
                cap: *cap,
                w: layout.weights.clone(),
                p,
            },
            ObservableKind::NormExceeds { r } => Bound::Exceeds {
                threshold: abs_pow(*r, p),
                w: layout.weights.clone(),
                p,
            },
            ObservableKind::NormPow => Bound::NormPow {
                w: layout.weights.clone(),
                p,
            },
        })
    }
}

pub(crate) enum Bound {
    Local { idx: Vec<usize>, f: Evaluator },
    ExpNorm { lambda: f64, cap: f64, w: Vec<f64>, p: f64 },
    Exceeds { threshold: f64, w: Vec<f64>, p: f64 },
    NormPow { w: Vec<f64>, p: f64 },
}

fn weighted_norm(values: &[f64], w: &[f64], p: f64) -> f64 {
    values.iter().zip(w).map(|(v, w)| w * abs_pow(*v, p)).sum()
}

impl Bound {
    #[inline]
    pub fn eval(&self, values: &[f64]) -> f64 {
        match self {
            Bound::Local { idx, f } => {
                let mut buf = [0.0; 8];
                if idx.len() <= buf.len() {
                    for (b, &i) in buf.iter_mut().zip(idx) {
                        *b = values[i];
                    }
                    f(&buf[..idx.len()])
                } else {
                    let args: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
                    f(&args)
                }
            }
            Bound::ExpNorm { lambda, cap, w, p } => (lambda * weighted_norm(values, w, *p).min(*cap)).exp(),
            Bound::Exceeds { threshold, w, p } => {
                if weighted_norm(values, w, *p) > *threshold {
                    1.0
                } else {
                    0.0
                }
            }
            Bound::NormPow { w, p } => weighted_norm(values, w, *p),
        }
    }

    /// Spin indices (< n) the observable depends on, or None for global ones.
    pub fn spin_support(&self, n: usize) -> Option<Vec<usize>> {
        match self {
            Bound::Local { idx, .. } => {
                let mut s: Vec<usize> = idx.iter().copied().filter(|&i| i < n).collect();
                s.sort_unstable();
                s.dedup();
                Some(s)
            }
            _ => None,
        }
    }
}

pub(crate) fn bind_all(observables: &[Observable], layout: &Layout, p: f64) -> Result<Vec<Bound>> {
    observables.iter().map(|o| o.bind(layout, p)).collect()
}
