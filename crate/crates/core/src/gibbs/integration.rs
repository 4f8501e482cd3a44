//! log Z by thermodynamic integration along J → tJ, t ∈ [0, 1]:
//! d/dt log Z(tJ) = E_t[−H(J)] and log Z(0) = 0 for the normalized χ.

use rayon::prelude::*;

use super::layout::Layout;
use super::mcmc::{acceptance_flag, pooled, run_chains, McmcConfig};
use super::{EngineKind, GibbsSpec, LogPartition};
use crate::disorder::derive_seed;
use crate::error::{Error, Result};

/// Composite Simpson rule on a uniform grid with an odd number of points.
pub fn simpson(h: f64, ys: &[f64]) -> f64 {
    simpson_weights(ys.len(), h).iter().zip(ys).map(|(w, y)| w * y).sum()
}

fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let c = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect()
}

fn check_points(n: usize) -> Result<()> {
    if n < 5 || n % 4 != 1 {
        return Err(Error::InvalidParameter(format!(
            "thermodynamic integration needs 4m+1 ≥ 5 grid points, got {n}"
        )));
    }
    Ok(())
}

/// Thermodynamic integration with a caller-supplied estimator of E_t[−H(J)]
/// returning (mean, standard error) for the spec at coupling scale t.
pub fn thermodynamic_integration_with<F>(spec: &GibbsSpec, points: usize, estimate: F) -> Result<LogPartition>
where
    F: Fn(usize, f64, &GibbsSpec) -> Result<(f64, f64)> + Sync,
{
    check_points(points)?;
    let h = 1.0 / (points - 1) as f64;
    let samples = (0..points)
        .into_par_iter()
        .map(|k| {
            let t = k as f64 * h;
            estimate(k, t, &spec.with_scaled_couplings(t))
        })
        .collect::<Result<Vec<_>>>()?;
    let ys: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let fine = simpson_weights(points, h);
    let value: f64 = fine.iter().zip(&ys).map(|(w, y)| w * y).sum();
    let std_error = fine
        .iter()
        .zip(&samples)
        .map(|(w, s)| (w * s.1).powi(2))
        .sum::<f64>()
        .sqrt();
    let half: Vec<f64> = ys.iter().step_by(2).copied().collect();
    let coarse = simpson(2.0 * h, &half);
    let refinement_shift = (value - coarse).abs();
    Ok(LogPartition {
        value,
        std_error,
        engine: EngineKind::Mcmc,
        refinement_shift,
        flagged: refinement_shift > 3.0 * std_error.max(f64::EPSILON),
    })
}

/// log Z_Δ(J,ξ) with each E_t[−H(J)] estimated by Metropolis. Grid point k
/// uses the sub-seed `derive_seed(config.seed, k)`.
pub fn thermodynamic_integration(spec: &GibbsSpec, config: &McmcConfig) -> Result<LogPartition> {
    let full = Layout::new(spec);
    let flags = std::sync::Mutex::new(false);
    let mut out = thermodynamic_integration_with(spec, config.ti_points, |k, _, spec_t| {
        let records = run_chains(spec_t, config, derive_seed(config.seed, k as u64), 1, |v, o| {
            o[0] = full.neg_energy(v);
        })?;
        if acceptance_flag(&records).1 {
            *flags.lock().expect("flag lock") = true;
        }
        Ok(pooled(&records, 1)[0])
    })?;
    out.flagged |= *flags.lock().expect("flag lock");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;
    use crate::gibbs::{exact_kernel, transfer_kernel, Observable};
    use crate::lattice::Region;
    use crate::weights::{CouplingField, SpinConfig};
    use std::sync::Arc;

    #[test]
    fn simpson_exact_for_cubics() {
        let ys: Vec<f64> = (0..9).map(|k| (k as f64 / 8.0).powi(3)).collect();
        assert!((simpson(1.0 / 8.0, &ys) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_grids() {
        let r = Region::chain(0, 1).unwrap();
        let s = spec(r.clone(), &CouplingField::constant(&r, 0.0), &SpinConfig::zeros(r.boundary()), coarse());
        assert!(thermodynamic_integration_with(&s, 7, |_, _, _| Ok((0.0, 0.0))).is_err());
    }

    #[test]
    fn exact_integrand_reproduces_log_z() {
        // E_t[−H(J)] from quadrature isolates the Simpson error.
        let r = Region::chain(0, 3).unwrap();
        let j = CouplingField::from_fn(&r, |e| 0.6 * (1.0 + e.endpoints().0.coords()[0] as f64).cos());
        let xi = SpinConfig::from_fn(r.boundary(), |y| 0.3 * y.coords()[0] as f64);
        let s = spec(r.clone(), &j, &xi, coarse());
        let full = Arc::new(Layout::new(&s));
        let ti = thermodynamic_integration_with(&s, 17, |_, _, st| {
            let f = full.clone();
            let obs = Observable::local("-H", r.sites().to_vec(), move |v| {
                let mut vals = f.values.clone();
                vals[..v.len()].copy_from_slice(v);
                f.neg_energy(&vals)
            });
            Ok((exact_kernel(st, &[obs])?.estimates[0].value, 0.0))
        })
        .unwrap();
        let exact = transfer_kernel(&s, &[]).unwrap().log_z;
        assert!((ti.value - exact).abs() < 1e-5, "{} vs {exact}", ti.value);
    }

    #[test]
    fn monte_carlo_log_z_on_three_chain() {
        let r = Region::chain(0, 3).unwrap();
        let j = CouplingField::from_fn(&r, |e| 0.9 * (2.0 + e.endpoints().0.coords()[0] as f64).sin());
        let s = spec(r.clone(), &j, &SpinConfig::zeros(r.boundary()), measure(&crate::single_spin::GridConfig::default()));
        let cfg = McmcConfig {
            n_sweeps: 30_000,
            burn_in: 2_000,
            seed: 3,
            ..McmcConfig::default()
        };
        let ti = thermodynamic_integration(&s, &cfg).unwrap();
        let exact = transfer_kernel(&s, &[]).unwrap().log_z;
        assert!((ti.value - exact).abs() <= 3.0 * ti.std_error + ti.refinement_shift, "{ti:?} vs {exact}");
        assert!(ti.std_error > 0.0);
    }
}
