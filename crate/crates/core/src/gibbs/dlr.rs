//! Consistency ∫ π_Λ(f|η) π_Δ(dη|ξ) = π_Δ(f|ξ) by nested quadrature.

use rayon::prelude::*;

use super::layout::Layout;
use super::observable::bind_all;
use super::tensor::{tensor_sums, Enumerator, DEFAULT_TENSOR_LIMIT};
use super::{GibbsSpec, Observable};
use crate::error::{Error, Result};
use crate::lattice::Region;
use crate::stats::{log_sum_exp, LogWeightedSums};
use crate::weights::SpinConfig;

/// max over observables of |π_Δ(f) − Σ_η π_Δ(η) π_Λ(f|η)|, where η runs over
/// the grid configurations of Δ∖Λ. The marginal of η is read off the outer
/// enumeration and each π_Λ(·|η) is a separate inner quadrature.
pub fn dlr_check(outer: &GibbsSpec, inner: &Region, observables: &[Observable]) -> Result<f64> {
    let region = outer.region();
    if !inner.is_subset_of(region) {
        return Err(Error::NotNested("inner region is not contained in the outer one".into()));
    }
    if region.len() > DEFAULT_TENSOR_LIMIT {
        return Err(Error::RegionTooLarge {
            sites: region.len(),
            limit: DEFAULT_TENSOR_LIMIT,
        });
    }
    let p = outer.exponents().p();
    let measure = outer.single_spin();
    let nodes = measure.nodes();
    let n = nodes.len();

    let outer_layout = Layout::new(outer);
    let outer_bound = bind_all(observables, &outer_layout, p)?;
    let direct = tensor_sums(&outer_layout, measure, &outer_bound, true).means();

    // outer spins in Δ∖Λ, enumerated first so their node indices key the marginal
    let rest: Vec<usize> = (0..outer_layout.n)
        .filter(|&i| !inner.contains(&outer_layout.sites[i]))
        .collect();
    let lam: Vec<usize> = (0..outer_layout.n)
        .filter(|&i| inner.contains(&outer_layout.sites[i]))
        .collect();
    let n_keys = n.pow(rest.len() as u32);
    let free: Vec<usize> = rest.iter().chain(&lam).copied().collect();
    let en = Enumerator::new(&outer_layout, measure, &free, &outer_layout.values);
    let key_of = |idx: &[usize]| idx[..rest.len()].iter().fold(0usize, |k, &i| k * n + i);
    let top = if rest.is_empty() { 0..1 } else { 0..n };
    let chunks: Vec<Vec<(usize, f64)>> = top
        .into_par_iter()
        .map(|t| {
            let range = if rest.is_empty() { 0..n } else { t..t + 1 };
            let mut values = outer_layout.values.clone();
            let mut per_key: Vec<(usize, Vec<f64>)> = Vec::new();
            en.run(range, &mut values, &mut |lw, idx, _| {
                let key = key_of(idx);
                match per_key.last_mut() {
                    Some((k, v)) if *k == key => v.push(lw),
                    _ => per_key.push((key, vec![lw])),
                }
            });
            per_key.into_iter().map(|(k, v)| (k, log_sum_exp(&v))).collect()
        })
        .collect();
    let mut log_marginal = vec![f64::NEG_INFINITY; n_keys];
    for (k, lm) in chunks.into_iter().flatten() {
        log_marginal[k] = log_sum_exp(&[log_marginal[k], lm]);
    }
    let log_total = log_sum_exp(&log_marginal);

    // inner kernel on Λ with boundary η on ∂Λ∩(Δ∖Λ) and ξ on ∂Λ∩∂Δ
    let mut xi_inner = SpinConfig::new();
    for y in inner.boundary() {
        xi_inner.set(y.clone(), outer.boundary_condition().get(y).unwrap_or(0.0));
    }
    let inner_spec = GibbsSpec::new(
        inner.clone(),
        outer.couplings(),
        &xi_inner,
        outer.single_spin_arc().clone(),
        *outer.exponents(),
        outer.weight().clone(),
    )?;
    let base_layout = Layout::new(&inner_spec);
    // where each η coordinate lands among the inner boundary entries
    let eta_slots: Vec<Option<usize>> = rest
        .iter()
        .map(|&i| base_layout.index_of(&outer_layout.sites[i]))
        .collect();
    // observables may read sites of Δ∖Λ that are not on ∂Λ; give the inner
    // view access to every outer entry by evaluating on the outer vector
    let inner_bound = bind_all(observables, &outer_layout, p)?;
    let k = observables.len();

    let mixed: Vec<Vec<f64>> = (0..n_keys)
        .into_par_iter()
        .map_init(
            || base_layout.clone(),
            |layout, key| {
                let weight = (log_marginal[key] - log_total).exp();
                if weight == 0.0 {
                    return vec![0.0; k];
                }
                let mut digits = vec![0usize; rest.len()];
                let mut rem = key;
                for d in digits.iter_mut().rev() {
                    *d = rem % n;
                    rem /= n;
                }
                for (slot, &d) in eta_slots.iter().zip(&digits) {
                    if let Some(s) = slot {
                        layout.values[*s] = nodes[d];
                    }
                }
                layout.refresh_fields();
                let mut outer_values = outer_layout.values.clone();
                for (&i, &d) in rest.iter().zip(&digits) {
                    outer_values[i] = nodes[d];
                }
                let inner_free: Vec<usize> = (0..layout.n).collect();
                let ien = Enumerator::new(layout, measure, &inner_free, &layout.values);
                // inner spin a is outer spin lam[a] since both follow region order
                let mut inner_values = layout.values.clone();
                let mut total = LogWeightedSums::new(k);
                let mut buf = vec![0.0; k];
                // one accumulator per node of the first spin, folded in order,
                // exactly as the direct evaluation does
                for t in 0..n {
                    let mut acc = LogWeightedSums::new(k);
                    ien.run(t..t + 1, &mut inner_values, &mut |lw, _, v| {
                        for (a, &o) in lam.iter().enumerate() {
                            outer_values[o] = v[a];
                        }
                        for (b, f) in buf.iter_mut().zip(&inner_bound) {
                            *b = f.eval(&outer_values);
                        }
                        acc.push(lw, &buf);
                    });
                    total.merge(&acc);
                }
                total.means().into_iter().map(|m| weight * m).collect()
            },
        )
        .collect();
    let mut averaged = vec![0.0; k];
    for row in &mixed {
        for (a, v) in averaged.iter_mut().zip(row) {
            *a += v;
        }
    }
    Ok(direct
        .iter()
        .zip(&averaged)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}
