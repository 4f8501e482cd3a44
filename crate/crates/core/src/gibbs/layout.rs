//! Index-based view of a spec shared by the engines.
//!
//! The value vector holds the |Δ| spins first (region order) followed by the
//! boundary values (∂Δ order). Crossing couplings fold into linear fields.

use std::collections::HashMap;

use super::GibbsSpec;
use crate::lattice::Site;

#[derive(Clone, Debug)]
pub(crate) struct Layout {
    pub n: usize,
    pub sites: Vec<Site>,
    index: HashMap<Site, usize>,
    /// Spins (initially 0) then boundary values.
    pub values: Vec<f64>,
    /// w(x) for every entry of `values`.
    pub weights: Vec<f64>,
    /// (i, j, J) with i < j < n.
    pub pairs: Vec<(usize, usize, f64)>,
    /// (spin, boundary entry, J).
    pub cross: Vec<(usize, usize, f64)>,
    /// h_i = Σ J_xy ξ(y) over crossing edges at i.
    pub fields: Vec<f64>,
    /// Spin neighbours with couplings.
    pub neighbors: Vec<Vec<(usize, f64)>>,
}

impl Layout {
    pub fn new(spec: &GibbsSpec) -> Self {
        let region = spec.region();
        let n = region.len();
        let mut sites: Vec<Site> = region.sites().to_vec();
        sites.extend(region.boundary().iter().cloned());
        let index: HashMap<Site, usize> = sites.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let mut values = vec![0.0; n];
        values.extend(region.boundary().iter().map(|y| spec.boundary_condition().get(y).unwrap_or(0.0)));
        let weights = sites.iter().map(|s| spec.weight().weight_at(s)).collect();
        let mut pairs = Vec::new();
        let mut neighbors = vec![Vec::new(); n];
        for e in region.interior_edges() {
            let (a, b) = e.endpoints();
            let (i, j) = (index[a], index[b]);
            let (i, j) = (i.min(j), i.max(j));
            let v = spec.couplings().get(e).unwrap_or(0.0);
            pairs.push((i, j, v));
            neighbors[i].push((j, v));
            neighbors[j].push((i, v));
        }
        let cross = region
            .cross_edges()
            .iter()
            .map(|(x, y)| (index[x], index[y], spec.couplings().between(x, y).unwrap_or(0.0)))
            .collect();
        let mut layout = Layout {
            n,
            sites,
            index,
            values,
            weights,
            pairs,
            cross,
            fields: vec![0.0; n],
            neighbors,
        };
        layout.refresh_fields();
        layout
    }

    pub fn index_of(&self, x: &Site) -> Option<usize> {
        self.index.get(x).copied()
    }

    /// Recomputes the linear fields after boundary values changed.
    pub fn refresh_fields(&mut self) {
        self.fields.iter_mut().for_each(|h| *h = 0.0);
        for &(i, k, j) in &self.cross {
            self.fields[i] += j * self.values[k];
        }
    }

    /// −H(σ) for the spins stored in `values`.
    pub fn neg_energy(&self, values: &[f64]) -> f64 {
        let mut s = 0.0;
        for &(i, j, v) in &self.pairs {
            s += v * values[i] * values[j];
        }
        for (h, x) in self.fields.iter().zip(values) {
            s += h * x;
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;
    use crate::gibbs::energy;
    use crate::lattice::Region;
    use crate::weights::{CouplingField, SpinConfig};

    #[test]
    fn neg_energy_matches_energy() {
        let r = square();
        let mut k = 0.0;
        let j = CouplingField::from_fn(&r, |_| {
            k += 0.37;
            (k * 7.1f64).sin()
        });
        let xi = SpinConfig::from_fn(r.boundary(), |y| y.coords()[0] as f64 * 0.5 - 0.2);
        let s = spec(r.clone(), &j, &xi, coarse());
        let layout = Layout::new(&s);
        let sigma = SpinConfig::from_fn(r.sites(), |x| 0.3 + x.coords()[1] as f64);
        let mut v = layout.values.clone();
        for (i, x) in r.sites().iter().enumerate() {
            v[i] = sigma.get(x).unwrap();
        }
        assert!((layout.neg_energy(&v) + energy(&s, &sigma).unwrap()).abs() < 1e-12);
        assert_eq!(layout.values.len(), r.len() + r.boundary().len());
        let one = Region::chain(0, 1).unwrap();
        assert_eq!(Layout::new(&spec(one.clone(), &CouplingField::constant(&one, 1.0), &SpinConfig::zeros(one.boundary()), coarse())).pairs.len(), 0);
    }
}
