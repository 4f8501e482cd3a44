//! Exact tensor-product quadrature over the single-spin grid.

use rayon::prelude::*;

use super::layout::Layout;
use super::observable::{bind_all, Bound};
use super::{EngineKind, GibbsEstimate, GibbsSpec, KernelOutput, Observable};
use crate::error::{Error, Result};
use crate::single_spin::SingleSpinMeasure;
use crate::stats::LogWeightedSums;

pub const DEFAULT_TENSOR_LIMIT: usize = 4;

/// Walks every grid configuration of the spins in `free`, calling
/// `visit(log_weight, node_indices, values)` at each leaf. Spins outside
/// `free` keep their current entries in `values`. The log-weight holds
/// log χ-masses and every −H term that involves a free spin.
pub(crate) struct Enumerator<'a> {
    nodes: &'a [f64],
    free: Vec<usize>,
    /// log p_i + u_i·(fixed field) per level.
    base: Vec<Vec<f64>>,
    /// Couplings to earlier levels.
    back: Vec<Vec<(usize, f64)>>,
}

impl<'a> Enumerator<'a> {
    pub fn new(layout: &Layout, measure: &'a SingleSpinMeasure, free: &[usize], values: &[f64]) -> Self {
        let nodes = measure.nodes();
        let level: Vec<Option<usize>> = (0..layout.n).map(|i| free.iter().position(|&f| f == i)).collect();
        let mut field: Vec<f64> = free.iter().map(|&i| layout.fields[i]).collect();
        let mut back = vec![Vec::new(); free.len()];
        for &(i, j, v) in &layout.pairs {
            match (level[i], level[j]) {
                (Some(a), Some(b)) => back[a.max(b)].push((a.min(b), v)),
                (Some(a), None) => field[a] += v * values[j],
                (None, Some(b)) => field[b] += v * values[i],
                (None, None) => {}
            }
        }
        let base = field
            .iter()
            .map(|h| {
                nodes
                    .iter()
                    .zip(measure.log_probabilities())
                    .map(|(u, lp)| lp + h * u)
                    .collect()
            })
            .collect();
        Enumerator {
            nodes,
            free: free.to_vec(),
            base,
            back,
        }
    }

    /// Runs the walk with the first free spin restricted to `top`.
    pub fn run<F: FnMut(f64, &[usize], &[f64])>(&self, top: std::ops::Range<usize>, values: &mut [f64], visit: &mut F) {
        if self.free.is_empty() {
            visit(0.0, &[], values);
            return;
        }
        let mut idx = vec![0usize; self.free.len()];
        self.level(0, 0.0, top, &mut idx, values, visit);
    }

    fn level<F: FnMut(f64, &[usize], &[f64])>(
        &self,
        k: usize,
        acc: f64,
        range: std::ops::Range<usize>,
        idx: &mut [usize],
        values: &mut [f64],
        visit: &mut F,
    ) {
        let site = self.free[k];
        let c: f64 = self.back[k].iter().map(|&(l, v)| v * values[self.free[l]]).sum();
        let last = k + 1 == self.free.len();
        for i in range {
            let u = self.nodes[i];
            let lw = acc + self.base[k][i] + c * u;
            values[site] = u;
            idx[k] = i;
            if last {
                visit(lw, idx, values);
            } else {
                self.level(k + 1, lw, 0..self.nodes.len(), idx, values, visit);
            }
        }
    }
}

/// Log mass and observable sums over all of Δ, one accumulator per node of
/// the first spin folded in node order so the result does not depend on
/// how the work was split.
pub(crate) fn tensor_sums(layout: &Layout, measure: &SingleSpinMeasure, bound: &[Bound], parallel: bool) -> LogWeightedSums {
    let free: Vec<usize> = (0..layout.n).collect();
    let en = Enumerator::new(layout, measure, &free, &layout.values);
    let one = |i: usize| {
        let mut values = layout.values.clone();
        let mut acc = LogWeightedSums::new(bound.len());
        let mut buf = vec![0.0; bound.len()];
        en.run(i..i + 1, &mut values, &mut |lw, _, v| {
            for (b, o) in buf.iter_mut().zip(bound) {
                *b = o.eval(v);
            }
            acc.push(lw, &buf);
        });
        acc
    };
    let parts: Vec<LogWeightedSums> = if layout.n == 0 {
        Vec::new()
    } else if parallel {
        (0..measure.len()).into_par_iter().map(one).collect()
    } else {
        (0..measure.len()).map(one).collect()
    };
    let mut total = LogWeightedSums::new(bound.len());
    for p in &parts {
        total.merge(p);
    }
    total
}

/// Z_Δ(J,ξ) and exact expectations by tensor quadrature, |Δ| ≤ 4.
pub fn exact_kernel(spec: &GibbsSpec, observables: &[Observable]) -> Result<KernelOutput> {
    exact_kernel_with_limit(spec, observables, DEFAULT_TENSOR_LIMIT)
}

/// As [`exact_kernel`] with a caller-chosen site limit.
pub fn exact_kernel_with_limit(spec: &GibbsSpec, observables: &[Observable], limit: usize) -> Result<KernelOutput> {
    let n = spec.region().len();
    if n > limit {
        return Err(Error::RegionTooLarge { sites: n, limit });
    }
    let layout = Layout::new(spec);
    let bound = bind_all(observables, &layout, spec.exponents().p())?;
    let sums = tensor_sums(&layout, spec.single_spin(), &bound, true);
    Ok(output(&sums, observables, spec.single_spin().len(), n))
}

pub(crate) fn output(sums: &LogWeightedSums, observables: &[Observable], nodes: usize, n: usize) -> KernelOutput {
    let n_samples = (nodes as u64).saturating_pow(n as u32);
    let estimates = observables
        .iter()
        .zip(sums.means())
        .map(|(o, value)| GibbsEstimate {
            observable: o.name.clone(),
            value,
            std_error: 0.0,
            engine: EngineKind::Quadrature,
            n_samples,
        })
        .collect();
    KernelOutput {
        log_z: sums.log_mass(),
        estimates,
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;
    use crate::gibbs::energy;
    use crate::lattice::{Edge, Region, Site};
    use crate::weights::{CouplingField, SpinConfig};

    fn pair_spec(j01: f64) -> GibbsSpec {
        let r = Region::chain(0, 2).unwrap();
        let mut j = CouplingField::constant(&r, 0.0);
        j.set(Edge::new(Site::line(0), Site::line(1)).unwrap(), j01);
        spec(r.clone(), &j, &SpinConfig::zeros(r.boundary()), coarse())
    }

    #[test]
    fn zero_coupling_is_product_measure() {
        let r = Region::chain(0, 3).unwrap();
        let s = spec(r.clone(), &CouplingField::constant(&r, 0.0), &SpinConfig::zeros(r.boundary()), coarse());
        let obs = [
            Observable::product(&Site::line(0), &Site::line(1)),
            Observable::moment(&Site::line(2), 2),
        ];
        let out = exact_kernel(&s, &obs).unwrap();
        assert!(out.log_z.abs() < 1e-13);
        assert!(out.estimates[0].value.abs() < 1e-14);
        assert!((out.estimates[1].value - s.single_spin().moment(2)).abs() < 1e-13);
    }

    #[test]
    fn positive_coupling_positive_correlation_and_flip() {
        let obs = [Observable::product(&Site::line(0), &Site::line(1))];
        let plus = exact_kernel(&pair_spec(1.0), &obs).unwrap();
        let minus = exact_kernel(&pair_spec(-1.0), &obs).unwrap();
        assert!(plus.estimates[0].value > 0.0);
        assert!((plus.estimates[0].value + minus.estimates[0].value).abs() < 1e-14);
        assert!((plus.log_z - minus.log_z).abs() < 1e-13);
        assert!(plus.z() > 0.0);
    }

    #[test]
    fn pair_correlation_matches_fine_grid() {
        // the same kernel on a grid with four times the nodes
        let obs = [Observable::product(&Site::line(0), &Site::line(1))];
        let coarse_out = exact_kernel(&pair_spec(1.0), &obs).unwrap();
        let r = Region::chain(0, 2).unwrap();
        let fine = measure(&crate::single_spin::GridConfig::fixed(16, 8));
        let fine_spec = spec(r.clone(), pair_spec(1.0).couplings(), &SpinConfig::zeros(r.boundary()), fine);
        let fine_out = exact_kernel(&fine_spec, &obs).unwrap();
        assert!((coarse_out.estimates[0].value - fine_out.estimates[0].value).abs() < 1e-4);
        assert!((coarse_out.log_z - fine_out.log_z).abs() < 1e-4);
    }

    #[test]
    fn brute_force_sum_over_grid() {
        let r = Region::chain(0, 2).unwrap();
        let j = CouplingField::from_fn(&r, |e| 0.3 + e.endpoints().0.coords()[0] as f64 * 0.4);
        let xi = SpinConfig::from_fn(r.boundary(), |y| y.coords()[0] as f64 * 0.7);
        let s = spec(r.clone(), &j, &xi, coarse());
        let m = s.single_spin();
        let mut z = 0.0;
        let mut s01 = 0.0;
        for (a, pa) in m.nodes().iter().zip(m.probabilities()) {
            for (b, pb) in m.nodes().iter().zip(m.probabilities()) {
                let sigma: SpinConfig = [(Site::line(0), *a), (Site::line(1), *b)].into_iter().collect();
                let wgt = pa * pb * (-energy(&s, &sigma).unwrap()).exp();
                z += wgt;
                s01 += wgt * a * b;
            }
        }
        let out = exact_kernel(&s, &[Observable::product(&Site::line(0), &Site::line(1))]).unwrap();
        assert!((out.z() - z).abs() < 1e-12 * z);
        assert!((out.estimates[0].value - s01 / z).abs() < 1e-12);
    }

    #[test]
    fn overflow_is_handled_in_log_space() {
        let s = pair_spec(400.0);
        let out = exact_kernel(&s, &[Observable::product(&Site::line(0), &Site::line(1))]).unwrap();
        assert!(out.log_z.is_finite() && out.log_z > 700.0);
        assert!(out.estimates[0].value.is_finite());
    }

    #[test]
    fn region_too_large() {
        let r = Region::chain(0, 5).unwrap();
        let s = spec(r.clone(), &CouplingField::constant(&r, 0.0), &SpinConfig::zeros(r.boundary()), coarse());
        assert_eq!(exact_kernel(&s, &[]).unwrap_err(), Error::RegionTooLarge { sites: 5, limit: 4 });
    }

    #[test]
    fn gauge_invariance_on_square() {
        let r = square();
        let mut k = 0;
        let j = CouplingField::from_fn(&r, |_| {
            k += 1;
            ((k * 37 % 11) as f64 - 5.0) / 4.0
        });
        let a = spec(r.clone(), &j, &SpinConfig::zeros(r.boundary()), coarse());
        let b = spec(r.clone(), &j.scaled(-1.0), &SpinConfig::zeros(r.boundary()), coarse());
        let za = exact_kernel(&a, &[]).unwrap().log_z;
        let zb = exact_kernel(&b, &[]).unwrap().log_z;
        assert!((za - zb).abs() < 1e-12);
    }

    #[test]
    fn split_independent() {
        let s = pair_spec(0.7);
        let layout = Layout::new(&s);
        let bound = bind_all(&[Observable::moment(&Site::line(0), 2)], &layout, 4.0).unwrap();
        let a = tensor_sums(&layout, s.single_spin(), &bound, true);
        let b = tensor_sums(&layout, s.single_spin(), &bound, false);
        assert_eq!(a.log_mass(), b.log_mass());
        assert_eq!(a.means(), b.means());
    }
}
