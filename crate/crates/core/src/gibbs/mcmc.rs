//! Single-site random-walk Metropolis targeting e^{−H} Π e^{−V(σ(x))}.
//!
//! The sampler draws from the continuum single-spin law, not its grid, so
//! agreement with the quadrature engines is a genuine cross-check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::layout::Layout;
use super::observable::bind_all;
use super::{EngineKind, GibbsEstimate, GibbsSpec, Observable};
use crate::disorder::derive_seed;
use crate::error::{Error, Result};
use crate::single_spin::Potential;
use crate::stats::mean_and_error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    /// Sweeps per chain, burn-in included.
    pub n_sweeps: usize,
    pub burn_in: usize,
    pub n_chains: usize,
    /// Batches per chain for the batch-means error.
    pub n_batches: usize,
    pub seed: u64,
    pub initial_step: f64,
    pub target_acceptance: f64,
    /// Sweeps between step-size updates during burn-in.
    pub adapt_every: usize,
    /// Points of the t-grid for thermodynamic integration (4m+1).
    pub ti_points: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            n_sweeps: 100_000,
            burn_in: 5_000,
            n_chains: 4,
            n_batches: 25,
            seed: 0,
            initial_step: 0.5,
            target_acceptance: 0.4,
            adapt_every: 50,
            ti_points: 9,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_chains == 0 || self.n_batches < 2 {
            return Err(Error::InvalidParameter("need at least one chain and two batches".into()));
        }
        if self.n_sweeps < self.burn_in + self.n_batches {
            return Err(Error::InvalidParameter(format!(
                "n_sweeps = {} leaves no measurement window after burn-in {}",
                self.n_sweeps, self.burn_in
            )));
        }
        if !(self.initial_step > 0.0) || self.adapt_every == 0 {
            return Err(Error::InvalidParameter("initial_step and adapt_every must be positive".into()));
        }
        Ok(())
    }

    fn measured(&self) -> usize {
        self.n_sweeps - self.burn_in
    }
}

/// One Metropolis chain over the spins of Δ with ξ held fixed.
#[derive(Clone, Debug)]
pub struct McmcSampler {
    layout: Layout,
    potential: Potential,
    steps: Vec<f64>,
    rng: ChaCha8Rng,
    accepted: Vec<u64>,
    proposed: Vec<u64>,
}

impl McmcSampler {
    /// Starts at σ ≡ 0.
    pub fn new(spec: &GibbsSpec, seed: u64, initial_step: f64) -> Self {
        let layout = Layout::new(spec);
        let n = layout.n;
        McmcSampler {
            layout,
            potential: spec.single_spin().potential().clone(),
            steps: vec![initial_step; n],
            rng: ChaCha8Rng::seed_from_u64(seed),
            accepted: vec![0; n],
            proposed: vec![0; n],
        }
    }

    /// One systematic scan; returns the number of accepted moves.
    pub fn sweep(&mut self) -> usize {
        let mut acc = 0;
        for s in 0..self.layout.n {
            let old = self.layout.values[s];
            let z: f64 = self.rng.sample(StandardNormal);
            let new = old + self.steps[s] * z;
            let field = self.layout.fields[s]
                + self.layout.neighbors[s]
                    .iter()
                    .map(|&(t, j)| j * self.layout.values[t])
                    .sum::<f64>();
            let delta = self.potential.eval(old) - self.potential.eval(new) + field * (new - old);
            self.proposed[s] += 1;
            let u: f64 = self.rng.random();
            if delta >= 0.0 || u < delta.exp() {
                self.layout.values[s] = new;
                self.accepted[s] += 1;
                acc += 1;
            }
        }
        acc
    }

    /// Moves each step size towards the target acceptance and clears the counters.
    pub fn adapt(&mut self, target: f64) {
        for s in 0..self.layout.n {
            if self.proposed[s] == 0 {
                continue;
            }
            let rate = self.accepted[s] as f64 / self.proposed[s] as f64;
            let factor = if rate > target { 1.1 } else { 1.0 / 1.1 };
            self.steps[s] = (self.steps[s] * factor).clamp(1e-4, 1e3);
        }
        self.reset_counters();
    }

    pub fn reset_counters(&mut self) {
        self.accepted.iter_mut().for_each(|a| *a = 0);
        self.proposed.iter_mut().for_each(|a| *a = 0);
    }

    pub fn acceptance_rate(&self) -> f64 {
        let a: u64 = self.accepted.iter().sum();
        let p: u64 = self.proposed.iter().sum();
        if p == 0 {
            0.0
        } else {
            a as f64 / p as f64
        }
    }

    /// Spins of Δ in region order.
    pub fn spins(&self) -> &[f64] {
        &self.layout.values[..self.layout.n]
    }

    pub(crate) fn values(&self) -> &[f64] {
        &self.layout.values
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }
}

/// Per-chain batch means of k measured functions plus the acceptance rate.
pub(crate) struct ChainRecord {
    pub batches: Vec<Vec<f64>>,
    pub acceptance: f64,
}

/// Runs `config.n_chains` independent chains on `spec`, each seeded by
/// `derive_seed(seed, chain)`, recording `measure(values, out)` every
/// measured sweep.
pub(crate) fn run_chains<M>(spec: &GibbsSpec, config: &McmcConfig, seed: u64, k: usize, measure: M) -> Result<Vec<ChainRecord>>
where
    M: Fn(&[f64], &mut [f64]) + Sync,
{
    config.validate()?;
    let records = (0..config.n_chains as u64)
        .into_par_iter()
        .map(|c| {
            let mut sampler = McmcSampler::new(spec, derive_seed(seed, c), config.initial_step);
            for sweep in 1..=config.burn_in {
                sampler.sweep();
                if sweep % config.adapt_every == 0 {
                    sampler.adapt(config.target_acceptance);
                }
            }
            sampler.reset_counters();
            let n = config.measured();
            let mut series = vec![Vec::with_capacity(n); k];
            let mut out = vec![0.0; k];
            for _ in 0..n {
                sampler.sweep();
                measure(sampler.values(), &mut out);
                for (s, v) in series.iter_mut().zip(&out) {
                    s.push(*v);
                }
            }
            let size = n / config.n_batches;
            let batches = series
                .iter()
                .map(|s| {
                    s.chunks_exact(size)
                        .take(config.n_batches)
                        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
                        .collect()
                })
                .collect();
            ChainRecord {
                batches,
                acceptance: sampler.acceptance_rate(),
            }
        })
        .collect();
    Ok(records)
}

/// Pools batch means over chains: (mean, standard error) per function.
pub(crate) fn pooled(records: &[ChainRecord], k: usize) -> Vec<(f64, f64)> {
    (0..k)
        .map(|i| {
            let all: Vec<f64> = records.iter().flat_map(|r| r.batches[i].iter().copied()).collect();
            mean_and_error(&all)
        })
        .collect()
}

pub(crate) fn acceptance_flag(records: &[ChainRecord]) -> (f64, bool) {
    let rate = records.iter().map(|r| r.acceptance).sum::<f64>() / records.len() as f64;
    let flagged = records.iter().any(|r| !(0.1..=0.9).contains(&r.acceptance));
    (rate, flagged)
}

#[derive(Clone, Debug, PartialEq)]
pub struct McmcOutput {
    pub estimates: Vec<GibbsEstimate>,
    pub acceptance_rate: f64,
    /// Some chain ended with acceptance outside [0.1, 0.9].
    pub flagged: bool,
}

/// Metropolis estimates of π_Δ(f|J,ξ) with batch-means standard errors.
pub fn mcmc_kernel(spec: &GibbsSpec, observables: &[Observable], config: &McmcConfig) -> Result<McmcOutput> {
    let layout = Layout::new(spec);
    let bound = bind_all(observables, &layout, spec.exponents().p())?;
    let k = bound.len();
    let records = run_chains(spec, config, config.seed, k, |v, out| {
        for (o, b) in out.iter_mut().zip(&bound) {
            *o = b.eval(v);
        }
    })?;
    let (acceptance_rate, flagged) = acceptance_flag(&records);
    let n_samples = (config.measured() * config.n_chains) as u64;
    let estimates = observables
        .iter()
        .zip(pooled(&records, k))
        .map(|(o, (value, std_error))| GibbsEstimate {
            observable: o.name.clone(),
            value,
            std_error,
            engine: EngineKind::Mcmc,
            n_samples,
        })
        .collect();
    Ok(McmcOutput {
        estimates,
        acceptance_rate,
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;
    use crate::gibbs::exact_kernel;
    use crate::lattice::{Region, Site};
    use crate::single_spin::GridConfig;
    use crate::weights::{CouplingField, SpinConfig};

    fn short() -> McmcConfig {
        McmcConfig {
            n_sweeps: 40_000,
            burn_in: 2_000,
            n_chains: 4,
            seed: 17,
            ..McmcConfig::default()
        }
    }

    #[test]
    fn free_spin_second_moment() {
        let r = Region::chain(0, 1).unwrap();
        let m = measure(&GridConfig::default());
        let s = spec(r.clone(), &CouplingField::constant(&r, 0.0), &SpinConfig::zeros(r.boundary()), m);
        let out = mcmc_kernel(&s, &[Observable::moment(&Site::line(0), 2)], &short()).unwrap();
        let e = &out.estimates[0];
        assert!(!out.flagged, "acceptance {}", out.acceptance_rate);
        assert!((e.value - s.single_spin().moment(2)).abs() <= 3.0 * e.std_error, "{e:?}");
    }

    #[test]
    fn pair_correlation_matches_quadrature() {
        let r = Region::chain(0, 2).unwrap();
        let j = CouplingField::from_fn(&r, |e| 0.8 - 0.5 * e.endpoints().0.coords()[0] as f64);
        let xi = SpinConfig::from_fn(r.boundary(), |y| 0.4 * y.coords()[0] as f64);
        let s = spec(r.clone(), &j, &xi, measure(&GridConfig::default()));
        let obs = [Observable::product(&Site::line(0), &Site::line(1)), Observable::spin(&Site::line(1))];
        let mc = mcmc_kernel(&s, &obs, &short()).unwrap();
        let ex = exact_kernel(&s, &obs).unwrap();
        for (a, b) in mc.estimates.iter().zip(&ex.estimates) {
            assert!((a.value - b.value).abs() <= 3.0 * a.std_error, "{a:?} vs {}", b.value);
        }
    }

    #[test]
    fn seed_determinism() {
        let r = Region::chain(0, 2).unwrap();
        let s = spec(r.clone(), &CouplingField::constant(&r, 0.5), &SpinConfig::zeros(r.boundary()), coarse());
        let cfg = McmcConfig {
            n_sweeps: 3_000,
            burn_in: 500,
            ..short()
        };
        let obs = [Observable::moment(&Site::line(0), 2)];
        let a = mcmc_kernel(&s, &obs, &cfg).unwrap();
        let b = mcmc_kernel(&s, &obs, &cfg).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| mcmc_kernel(&s, &obs, &cfg).unwrap());
        assert_eq!(a, c);
        let d = mcmc_kernel(&s, &obs, &McmcConfig { seed: 18, ..cfg }).unwrap();
        assert_ne!(a.estimates[0].value, d.estimates[0].value);
    }

    #[test]
    fn rejects_short_runs() {
        let r = Region::chain(0, 1).unwrap();
        let s = spec(r.clone(), &CouplingField::constant(&r, 0.0), &SpinConfig::zeros(r.boundary()), coarse());
        let cfg = McmcConfig {
            n_sweeps: 100,
            burn_in: 100,
            ..McmcConfig::default()
        };
        assert!(mcmc_kernel(&s, &[], &cfg).is_err());
    }

    #[test]
    fn pairwise_flows_balance() {
        // Under reversibility the stationary flow between any two cells is
        // symmetric. Three cells so that a circulating (irreversible) chain
        // would show up; with two cells crossings alternate trivially.
        let r = Region::chain(0, 1).unwrap();
        let j = CouplingField::constant(&r, 0.7);
        let xi = SpinConfig::from_fn(r.boundary(), |_| 0.5);
        let s = spec(r, &j, &xi, coarse());
        let cell = |u: f64| if u < -0.3 { 0 } else if u < 0.4 { 1 } else { 2 };
        let mut sampler = McmcSampler::new(&s, 5, 0.8);
        for _ in 0..2_000 {
            sampler.sweep();
        }
        let mut flow = [[0i64; 3]; 3];
        let mut prev = cell(sampler.spins()[0]);
        for _ in 0..400_000 {
            sampler.sweep();
            let cur = cell(sampler.spins()[0]);
            flow[prev][cur] += 1;
            prev = cur;
        }
        for a in 0..3 {
            for b in a + 1..3 {
                let (x, y) = (flow[a][b], flow[b][a]);
                assert!(x + y > 1000, "{a}-{b}: too few transitions");
                assert!(((x - y).abs() as f64) <= 3.0 * ((x + y) as f64).sqrt(), "{a}-{b}: {x} vs {y}");
            }
        }
    }
}
