//! Pressures and disorder-averaged thermodynamics: local pressure, Cesàro
//! averages of finite-volume kernels, empirical metastates, the interpolated
//! log-partition P_Δ(λ) and the quenched pressure.
//!
//! Disorder averages pair every realization J with −J and treat the pair
//! mean as one sample.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{uniform_moment_constant, BoundReport};
use crate::disorder::{derive_seed, sample_couplings, DisorderLaw};
use crate::error::{Error, Result};
use crate::gibbs::{expectations, log_partition, Engine, GibbsSpec, LogPartition, Model, Observable};
use crate::lattice::{van_hove_ratio, Edge, Region, RegionSequence, Site};
use crate::stats::{mean_and_error, variance};
use crate::weights::{abs_pow, CouplingField, SpinConfig};

/// p_Δ(J,ξ) = log Z_Δ(J,ξ) / |Δ| with its standard error.
pub fn local_pressure(spec: &GibbsSpec, engine: &Engine) -> Result<(f64, f64)> {
    let lz = log_partition(spec, engine)?;
    let n = spec.region().len() as f64;
    Ok((lz.value / n, lz.std_error / n))
}

/// (2d/|Δ|)Σ_{∂Δ}|ξ|^p + (1/2|Δ|)Σ_{x∈Δ}Σ_{y∼x}|J_xy|^q + max{log C_+(2d), −log C_−(2d)}.
pub fn pressure_bound(spec: &GibbsSpec) -> Result<f64> {
    let p = spec.exponents().p();
    let q = spec.exponents().q();
    let two_d = 2.0 * spec.dim() as f64;
    let n = spec.region().len() as f64;
    let xi: f64 = spec.boundary_condition().iter().map(|(_, v)| abs_pow(v, p)).sum();
    let mut j = 0.0;
    for e in spec.region().interior_edges() {
        j += 2.0 * abs_pow(spec.couplings().value(e)?, q);
    }
    for (x, y) in spec.region().cross_edges() {
        j += abs_pow(spec.couplings().between(x, y)?, q);
    }
    let m = spec.single_spin();
    let c = m.log_c_plus(two_d, p)?.max(-m.log_c_minus(two_d, p)?);
    Ok(two_d * xi / n + j / (2.0 * n) + c)
}

/// |p_Δ(J,ξ)| against [`pressure_bound`].
pub fn check_pressure_bound(spec: &GibbsSpec, engine: &Engine) -> Result<BoundReport> {
    let (p, err) = local_pressure(spec, engine)?;
    let rhs = pressure_bound(spec)?;
    let digest = crate::digest_hex(format!("{};engine={}", spec.digest(), engine.kind()).as_bytes());
    Ok(BoundReport::new("pressure", p.abs(), err, rhs, digest))
}

/// Boundary conditions that can be laid on the boundary of any region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryField {
    Zero,
    Constant { value: f64 },
    /// ξ(y) = amplitude · e^{−rate‖y‖₁}.
    ExpDecay { amplitude: f64, rate: f64 },
}

impl BoundaryField {
    pub fn value(&self, y: &Site) -> f64 {
        match self {
            BoundaryField::Zero => 0.0,
            BoundaryField::Constant { value } => *value,
            BoundaryField::ExpDecay { amplitude, rate } => amplitude * (-rate * y.l1_norm() as f64).exp(),
        }
    }

    pub fn on(&self, region: &Region) -> SpinConfig {
        SpinConfig::from_fn(region.boundary(), |y| self.value(y))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            BoundaryField::Zero => true,
            BoundaryField::Constant { value } => *value == 0.0,
            BoundaryField::ExpDecay { amplitude, .. } => *amplitude == 0.0,
        }
    }
}

/// Mean and standard error of f over `n_pairs` antithetic pairs (J, −J),
/// with J drawn on the edges touching `region` from sub-seed i of `seed`.
/// `f` receives the pair index and the realization; every component of its
/// output is averaged separately.
pub fn antithetic_average<F>(law: &DisorderLaw, region: &Region, n_pairs: usize, seed: u64, f: F) -> Result<Vec<(f64, f64)>>
where
    F: Fn(usize, &CouplingField) -> Result<Vec<f64>> + Sync,
{
    let rows = antithetic_rows(law, region, n_pairs, seed, f)?;
    Ok(column_stats(&rows))
}

/// The per-pair means behind [`antithetic_average`].
pub fn antithetic_rows<F>(law: &DisorderLaw, region: &Region, n_pairs: usize, seed: u64, f: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(usize, &CouplingField) -> Result<Vec<f64>> + Sync,
{
    if n_pairs == 0 {
        return Err(Error::InvalidParameter("need at least one realization pair".into()));
    }
    (0..n_pairs)
        .into_par_iter()
        .map(|i| {
            let j = sample_couplings(law, region, derive_seed(seed, i as u64));
            let a = f(i, &j)?;
            let b = f(i, &j.scaled(-1.0))?;
            Ok(a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect())
        })
        .collect()
}

fn column_stats(rows: &[Vec<f64>]) -> Vec<(f64, f64)> {
    let k = rows.first().map_or(0, |r| r.len());
    (0..k)
        .map(|c| mean_and_error(&rows.iter().map(|r| r[c]).collect::<Vec<_>>()))
        .collect()
}

/// Sampler seeds are re-derived per realization so that Metropolis noise is
/// independent across the disorder sample.
fn engine_for(engine: &Engine, i: usize) -> Engine {
    match engine {
        Engine::Mcmc(cfg) => {
            let mut cfg = cfg.clone();
            cfg.seed = derive_seed(cfg.seed, i as u64);
            Engine::Mcmc(cfg)
        }
        e => e.clone(),
    }
}

fn log_z(model: &Model, region: &Region, j: &CouplingField, xi: &SpinConfig, engine: &Engine) -> Result<LogPartition> {
    log_partition(&model.spec(region, j, xi)?, engine)
}

/// Per-region observable vectors and their running means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CesaroTrace {
    pub raw: Vec<Vec<f64>>,
    /// Standard errors of `raw`; zero for deterministic engines.
    pub raw_errors: Vec<Vec<f64>>,
    /// cesaro[N] = mean of raw[0..=N].
    pub cesaro: Vec<Vec<f64>>,
}

impl CesaroTrace {
    pub fn from_raw(raw: Vec<Vec<f64>>, raw_errors: Vec<Vec<f64>>) -> Self {
        let cesaro = running_means(&raw);
        CesaroTrace {
            raw,
            raw_errors,
            cesaro,
        }
    }

    /// max-norm of cesaro[N+1] − cesaro[N] for each N.
    pub fn increments(&self) -> Vec<f64> {
        self.cesaro.windows(2).map(|w| max_dist(&w[1], &w[0])).collect()
    }

    /// ‖cesaro[N+1] − cesaro[N]‖ ≤ max_n ‖raw[n] − cesaro[N]‖ / (N+2) with
    /// 0-based N, up to a few ulps of the entries.
    pub fn increment_bound_holds(&self) -> bool {
        self.cesaro.windows(2).enumerate().all(|(n, w)| {
            let spread = self.raw[..n + 2].iter().map(|r| max_dist(r, &w[0])).fold(0.0, f64::max);
            let scale = self.raw[..n + 2].iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            max_dist(&w[1], &w[0]) <= spread / (n + 2) as f64 + 8.0 * f64::EPSILON * scale
        })
    }
}

/// Running means accumulated left to right, so that recomputing any entry
/// by summing raw[0..=N] in order gives the same bits.
pub fn running_means(raw: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = raw.first().map_or(0, |r| r.len());
    let mut sums = vec![0.0; k];
    raw.iter()
        .enumerate()
        .map(|(n, r)| {
            for (s, v) in sums.iter_mut().zip(r) {
                *s += v;
            }
            sums.iter().map(|s| s / (n + 1) as f64).collect()
        })
        .collect()
}

fn max_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// raw[n] = (π_{Δ_n}(f_i|J,ξ))_i along the sequence. `couplings` must cover
/// every edge touching the largest region; ξ is laid on each ∂Δ_n.
pub fn cesaro_kernels(
    model: &Model,
    sequence: &RegionSequence,
    couplings: &CouplingField,
    xi: &BoundaryField,
    observables: &[Observable],
    engine: &Engine,
) -> Result<CesaroTrace> {
    let rows = sequence
        .regions()
        .par_iter()
        .map(|r| {
            let spec = model.spec(r, couplings, &xi.on(r))?;
            let est = expectations(&spec, observables, engine)?;
            Ok((
                est.iter().map(|e| e.value).collect::<Vec<_>>(),
                est.iter().map(|e| e.std_error).collect::<Vec<_>>(),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let (raw, errors) = rows.into_iter().unzip();
    Ok(CesaroTrace::from_raw(raw, errors))
}

/// Per-realization Cesàro traces and their spread across the disorder sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMetastate {
    pub traces: Vec<CesaroTrace>,
    /// Mean of cesaro[N] over realizations, for each N.
    pub mean: Vec<Vec<f64>>,
    /// Covariance of cesaro[N_max] over realizations.
    pub covariance: Vec<Vec<f64>>,
    /// Trace of the covariance of cesaro[N] over realizations, for each N.
    pub dispersion: Vec<f64>,
}

impl EmpiricalMetastate {
    /// dispersion[N+1] ≤ dispersion[N] for every N ≥ `from`.
    pub fn dispersion_non_increasing_from(&self, from: usize) -> bool {
        self.dispersion.windows(2).skip(from).all(|w| w[1] <= w[0])
    }
}

/// Cesàro traces for independent realizations (sub-seed i of `seed`, drawn on
/// the largest region) and the across-realization mean and covariance.
#[allow(clippy::too_many_arguments)]
pub fn empirical_metastate(
    model: &Model,
    sequence: &RegionSequence,
    law: &DisorderLaw,
    n_realizations: usize,
    xi: &BoundaryField,
    observables: &[Observable],
    engine: &Engine,
    seed: u64,
) -> Result<EmpiricalMetastate> {
    if n_realizations == 0 {
        return Err(Error::InvalidParameter("need at least one realization".into()));
    }
    let largest = sequence.last();
    let traces = (0..n_realizations)
        .into_par_iter()
        .map(|i| {
            let j = sample_couplings(law, largest, derive_seed(seed, i as u64));
            cesaro_kernels(model, sequence, &j, xi, observables, &engine_for(engine, i))
        })
        .collect::<Result<Vec<_>>>()?;
    let k = observables.len();
    let n_regions = sequence.len();
    let column = |n: usize, a: usize| traces.iter().map(|t| t.cesaro[n][a]).collect::<Vec<f64>>();
    let mean = (0..n_regions)
        .map(|n| (0..k).map(|a| mean_and_error(&column(n, a)).0).collect())
        .collect();
    let dispersion = (0..n_regions)
        .map(|n| (0..k).map(|a| variance(&column(n, a))).sum())
        .collect();
    let last = n_regions - 1;
    let covariance = (0..k)
        .map(|a| (0..k).map(|b| covariance(&column(last, a), &column(last, b))).collect())
        .collect();
    Ok(EmpiricalMetastate {
        traces,
        mean,
        covariance,
        dispersion,
    })
}

fn covariance(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (n - 1) as f64
}

/// P_Δ(λ) on a grid with finite-difference derivatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationCurve {
    pub lambdas: Vec<f64>,
    pub p_values: Vec<f64>,
    pub errors: Vec<f64>,
    /// Forward differences (P(λ_{k+1}) − P(λ_k))/h.
    pub first_diffs: Vec<f64>,
    pub first_diff_errors: Vec<f64>,
    /// Central second differences at every grid point, using one auxiliary
    /// point beyond each end of the grid.
    pub second_diffs: Vec<f64>,
    pub second_diff_errors: Vec<f64>,
    /// Central difference (P(h) − P(−h))/2h and its error.
    pub p_prime_zero: (f64, f64),
    /// E_ν[J_e² Var_λ(σ(x̄)σ(ȳ))] from kernel moments, with error; empty
    /// when the engine cannot supply the moments.
    pub covariance_second_derivative: Vec<(f64, f64)>,
    /// max_k |second difference at step h − at step 2h| over interior points.
    pub halving_shift: f64,
}

impl InterpolationCurve {
    /// |P′(0)| ≤ 3σ.
    pub fn derivative_at_zero_vanishes(&self) -> bool {
        self.p_prime_zero.0.abs() <= 3.0 * self.p_prime_zero.1
    }

    /// P″(λ_k) ≥ −3σ_k at every grid point.
    pub fn convex(&self) -> bool {
        self.second_diffs
            .iter()
            .zip(&self.second_diff_errors)
            .all(|(v, e)| *v >= -3.0 * e)
    }

    /// P(1) ≥ P(0) − 3σ of the difference.
    pub fn endpoint_increase(&self) -> (f64, f64) {
        let n = self.lambdas.len() - 1;
        let mean = self.p_values[n] - self.p_values[0];
        let err = self.first_diff_errors.iter().map(|e| e * e).sum::<f64>().sqrt() * self.step();
        (mean, err)
    }

    fn step(&self) -> f64 {
        self.lambdas[1] - self.lambdas[0]
    }
}

/// P_Δ(λ) = E_ν log ∫exp(λJ_e σ(x̄)σ(ȳ) − H̄)dχ with ξ ≡ 0 on a uniform grid
/// of `n_points` values on [0, 1], where H̄ omits the edge e = ⟨x̄,ȳ⟩.
#[allow(clippy::too_many_arguments)]
pub fn gks_interpolation(
    model: &Model,
    region: &Region,
    edge: &Edge,
    law: &DisorderLaw,
    n_pairs: usize,
    n_points: usize,
    engine: &Engine,
    seed: u64,
) -> Result<InterpolationCurve> {
    if !region.interior_edges().contains(edge) {
        return Err(Error::InvalidParameter(format!("edge {edge} is not in E_Δ")));
    }
    if n_points < 3 {
        return Err(Error::InvalidParameter("λ-grid needs at least 3 points".into()));
    }
    let h = 1.0 / (n_points - 1) as f64;
    // −h, 0, h, …, 1, 1 + h
    let ext: Vec<f64> = (0..n_points + 2).map(|k| (k as f64 - 1.0) * h).collect();
    let xi = SpinConfig::zeros(region.boundary());
    let (a, b) = edge.endpoints();
    let pair = Observable::product(a, b);
    let pair_sq = Observable::local("(s s)^2", vec![a.clone(), b.clone()], |v| (v[0] * v[1]).powi(2));
    let with_moments = !matches!(engine, Engine::Mcmc(_));
    let rows = antithetic_rows(law, region, n_pairs, seed, |i, j| {
        let eng = engine_for(engine, i);
        let je = j.value(edge)?;
        let mut out = Vec::with_capacity(2 * ext.len());
        for &lam in &ext {
            let mut jl = j.clone();
            jl.set(edge.clone(), lam * je);
            let spec = model.spec(region, &jl, &xi)?;
            out.push(log_partition(&spec, &eng)?.value);
        }
        if with_moments {
            for &lam in &ext[1..=n_points] {
                let mut jl = j.clone();
                jl.set(edge.clone(), lam * je);
                let spec = model.spec(region, &jl, &xi)?;
                let est = expectations(&spec, &[pair.clone(), pair_sq.clone()], &eng)?;
                out.push(je * je * (est[1].value - est[0].value.powi(2)));
            }
        }
        Ok(out)
    })?;
    let m = ext.len();
    let stat = |f: &dyn Fn(&[f64]) -> f64| mean_and_error(&rows.iter().map(|r| f(&r[..])).collect::<Vec<_>>());
    let lambdas: Vec<f64> = ext[1..=n_points].to_vec();
    let (p_values, errors): (Vec<f64>, Vec<f64>) = (1..=n_points).map(|k| stat(&|r| r[k])).unzip();
    let (first_diffs, first_diff_errors): (Vec<f64>, Vec<f64>) =
        (1..n_points).map(|k| stat(&|r| (r[k + 1] - r[k]) / h)).unzip();
    let (second_diffs, second_diff_errors): (Vec<f64>, Vec<f64>) = (1..=n_points)
        .map(|k| stat(&|r| (r[k + 1] - 2.0 * r[k] + r[k - 1]) / (h * h)))
        .unzip();
    let p_prime_zero = stat(&|r| (r[2] - r[0]) / (2.0 * h));
    let covariance_second_derivative = if with_moments {
        (0..n_points).map(|k| stat(&|r| r[m + k])).collect()
    } else {
        Vec::new()
    };
    let halving_shift = (3..m - 2)
        .map(|k| stat(&|r| (r[k + 2] - 2.0 * r[k] + r[k - 2]) / (4.0 * h * h)).0 - second_diffs[k - 1])
        .fold(0.0f64, |acc, d| acc.max(d.abs()));
    Ok(InterpolationCurve {
        lambdas,
        p_values,
        errors,
        first_diffs,
        first_diff_errors,
        second_diffs,
        second_diff_errors,
        p_prime_zero,
        covariance_second_derivative,
        halving_shift,
    })
}

/// |A|E p_A + |B|E p_B ≤ |A∪B|E p_{A∪B} with ξ ≡ 0, i.e.
/// E log Z_A + E log Z_B ≤ E log Z_{A∪B}. The reported error is that of the
/// paired difference.
pub fn superadditivity_check(
    model: &Model,
    a: &Region,
    b: &Region,
    law: &DisorderLaw,
    n_pairs: usize,
    engine: &Engine,
    seed: u64,
) -> Result<BoundReport> {
    if !a.is_disjoint_from(b) {
        return Err(Error::Overlap);
    }
    let union = a.union(b)?;
    let rows = antithetic_rows(law, &union, n_pairs, seed, |i, j| {
        let eng = engine_for(engine, i);
        let za = log_z(model, a, j, &SpinConfig::zeros(a.boundary()), &eng)?.value;
        let zb = log_z(model, b, j, &SpinConfig::zeros(b.boundary()), &eng)?.value;
        let zu = log_z(model, &union, j, &SpinConfig::zeros(union.boundary()), &eng)?.value;
        Ok(vec![za + zb, zu, za + zb - zu])
    })?;
    let stats = column_stats(&rows);
    let digest = crate::digest_hex(
        format!("{};{};{law:?};n={n_pairs};seed={seed};engine={}", a.digest(), b.digest(), engine.kind()).as_bytes(),
    );
    Ok(BoundReport::new("superadditivity", stats[0].0, stats[2].1, stats[1].0, digest))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PressureEntry {
    pub region_index: usize,
    pub sites: usize,
    pub value: f64,
    pub error: f64,
}

/// Disorder-averaged pressures E_ν p_{Δ_n}(J,0) along a sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PressureSeries {
    pub entries: Vec<PressureEntry>,
    pub boundary_ratios: Vec<f64>,
    /// E_ν[p_{Δ_{n+1}} − p_{Δ_n}] over the same realizations, with error.
    pub increments: Vec<(f64, f64)>,
}

impl PressureSeries {
    /// Every increment ≥ −3σ.
    pub fn non_decreasing(&self) -> bool {
        self.increments.iter().all(|(d, e)| *d >= -3.0 * e)
    }

    /// |Δ_n|·entries[n], the sequence that should be superadditive.
    pub fn extensive(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.sites as f64 * e.value).collect()
    }
}

/// One realization per pair index, drawn on the largest region and shared by
/// every region of the sequence.
pub fn quenched_pressure_trace(
    model: &Model,
    sequence: &RegionSequence,
    law: &DisorderLaw,
    n_pairs: usize,
    engine: &Engine,
    seed: u64,
) -> Result<PressureSeries> {
    let rows = antithetic_rows(law, sequence.last(), n_pairs, seed, |i, j| {
        let eng = engine_for(engine, i);
        sequence
            .regions()
            .iter()
            .map(|r| Ok(log_z(model, r, j, &SpinConfig::zeros(r.boundary()), &eng)?.value / r.len() as f64))
            .collect()
    })?;
    let stats = column_stats(&rows);
    let entries = sequence
        .regions()
        .iter()
        .zip(&stats)
        .enumerate()
        .map(|(n, (r, s))| PressureEntry {
            region_index: n,
            sites: r.len(),
            value: s.0,
            error: s.1,
        })
        .collect();
    let increments = (1..sequence.len())
        .map(|n| mean_and_error(&rows.iter().map(|r| r[n] - r[n - 1]).collect::<Vec<_>>()))
        .collect();
    Ok(PressureSeries {
        entries,
        boundary_ratios: sequence.regions().iter().map(van_hove_ratio).collect(),
        increments,
    })
}

/// lhs_n = |E_ν p_{Δ_n}(J,ξ) − E_ν p_{Δ_n}(J,0)| against
/// rhs_n = (2d|∂Δ_n|/|Δ_n|)(2c_ν + a_ν).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateIndependence {
    pub reports: Vec<BoundReport>,
    /// lhs_{n+1} < lhs_n for every n.
    pub decreasing: bool,
}

impl StateIndependence {
    pub fn passed(&self) -> bool {
        self.decreasing && self.reports.iter().all(|r| r.passed)
    }
}

pub fn state_independence_check(
    model: &Model,
    sequence: &RegionSequence,
    law: &DisorderLaw,
    xi: &BoundaryField,
    n_pairs: usize,
    engine: &Engine,
    seed: u64,
) -> Result<StateIndependence> {
    let c_nu = uniform_moment_constant(law, &model.weight, model.exponents.q(), &model.single_spin)?;
    let a_nu = law.a_nu();
    let two_d = 2.0 * model.dim() as f64;
    let rows = antithetic_rows(law, sequence.last(), n_pairs, seed, |i, j| {
        let eng = engine_for(engine, i);
        sequence
            .regions()
            .iter()
            .map(|r| {
                let with = log_z(model, r, j, &xi.on(r), &eng)?.value;
                let without = log_z(model, r, j, &SpinConfig::zeros(r.boundary()), &eng)?.value;
                Ok((with - without) / r.len() as f64)
            })
            .collect()
    })?;
    let stats = column_stats(&rows);
    let reports: Vec<BoundReport> = sequence
        .regions()
        .iter()
        .zip(&stats)
        .map(|(r, (d, e))| {
            let rhs = two_d * van_hove_ratio(r) * (2.0 * c_nu + a_nu);
            let digest = crate::digest_hex(
                format!("{};{xi:?};{law:?};n={n_pairs};seed={seed};engine={}", r.digest(), engine.kind()).as_bytes(),
            );
            BoundReport::new("state_independence", d.abs(), *e, rhs, digest)
        })
        .collect();
    let decreasing = reports.windows(2).all(|w| w[1].lhs < w[0].lhs) || xi.is_zero();
    Ok(StateIndependence { reports, decreasing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::centered_chains;
    use crate::single_spin::{GridConfig, Potential, SingleSpinMeasure};
    use crate::weights::{ModelExponents, WeightFunction};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn model(d: usize, config: &GridConfig) -> Model {
        let ex = ModelExponents::from_q(2.0).unwrap();
        let m = SingleSpinMeasure::build(Potential::monomial(1.0, 6).unwrap(), &ex, config).unwrap();
        Model::new(Arc::new(m), ex, WeightFunction::new(1.0, d).unwrap())
    }

    fn chain_model() -> Model {
        model(1, &GridConfig::fixed(8, 8))
    }

    #[test]
    fn pressure_without_couplings_is_zero() {
        let md = chain_model();
        let r = Region::chain(0, 3).unwrap();
        let s = md.free_spec(&r, &CouplingField::constant(&r, 0.0)).unwrap();
        let (p, e) = local_pressure(&s, &Engine::Transfer).unwrap();
        assert!(p.abs() < 1e-14 && e == 0.0);
    }

    #[test]
    fn pressure_engines_agree_and_bound_holds() {
        let md = chain_model();
        let r = Region::chain(0, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let j = CouplingField::from_fn(&r, |_| rng.random_range(-3.0..3.0));
            let xi = SpinConfig::from_fn(r.boundary(), |_| rng.random_range(-3.0..3.0));
            let s = md.spec(&r, &j, &xi).unwrap();
            let t = local_pressure(&s, &Engine::Transfer).unwrap().0;
            let q = local_pressure(&s, &Engine::Quadrature).unwrap().0;
            assert!((t - q).abs() < 1e-10, "{t} vs {q}");
            let rep = check_pressure_bound(&s, &Engine::Transfer).unwrap();
            assert!(rep.passed, "{rep:?}");
        }
    }

    #[test]
    fn cesaro_identity_and_increments() {
        let raw = vec![vec![1.0, 2.0]; 5];
        let t = CesaroTrace::from_raw(raw.clone(), vec![vec![0.0; 2]; 5]);
        assert_eq!(t.cesaro, raw);
        let raw: Vec<Vec<f64>> = (0..30).map(|n| vec![(n as f64 * 1.7).sin(), (n as f64).sqrt()]).collect();
        let t = CesaroTrace::from_raw(raw.clone(), vec![vec![0.0; 2]; 30]);
        for (n, c) in t.cesaro.iter().enumerate() {
            for a in 0..2 {
                let recomputed = raw[..=n].iter().map(|r| r[a]).sum::<f64>() / (n + 1) as f64;
                assert_eq!(c[a], recomputed);
            }
        }
        assert!(t.increment_bound_holds());
    }

    #[test]
    fn cesaro_on_random_chains() {
        let md = chain_model();
        let seq = centered_chains(&(1..=20).collect::<Vec<_>>()).unwrap();
        let law = DisorderLaw::gaussian(0.5, 2.0).unwrap();
        let j = sample_couplings(&law, seq.last(), 5);
        let o = Site::line(0);
        let obs = [Observable::spin(&o), Observable::moment(&o, 2), Observable::product(&o, &Site::line(1))];
        let xi = BoundaryField::Constant { value: 1.0 };
        let t = cesaro_kernels(&md, &seq, &j, &xi, &obs, &Engine::Transfer).unwrap();
        assert!(t.increment_bound_holds());
        let range = (0..3)
            .map(|a| {
                let col = t.raw.iter().map(|r| r[a]);
                col.clone().fold(f64::MIN, f64::max) - col.fold(f64::MAX, f64::min)
            })
            .fold(0.0, f64::max);
        for (n, inc) in t.increments().iter().enumerate() {
            assert!(*inc <= range / (n + 2) as f64 + 1e-15);
        }
        let zero = cesaro_kernels(&md, &seq, &CouplingField::constant(seq.last(), 0.0), &xi, &obs, &Engine::Transfer)
            .unwrap();
        for r in &zero.raw {
            for (a, b) in r.iter().zip(&zero.raw[0]) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn metastate_reductions() {
        let md = chain_model();
        let seq = centered_chains(&[1, 2, 3, 4]).unwrap();
        let o = Site::line(0);
        let obs = [Observable::spin(&o), Observable::moment(&o, 2)];
        let xi = BoundaryField::Constant { value: 1.0 };
        let law = DisorderLaw::gaussian(0.5, 2.0).unwrap();
        let one = empirical_metastate(&md, &seq, &law, 1, &xi, &obs, &Engine::Transfer, 8).unwrap();
        let j = sample_couplings(&law, seq.last(), derive_seed(8, 0));
        let direct = cesaro_kernels(&md, &seq, &j, &xi, &obs, &Engine::Transfer).unwrap();
        assert_eq!(one.traces[0], direct);
        let none = DisorderLaw::gaussian(0.0, 2.0).unwrap();
        let flat = empirical_metastate(&md, &seq, &none, 6, &xi, &obs, &Engine::Transfer, 8).unwrap();
        assert!(flat.dispersion.iter().all(|d| *d == 0.0));
        assert!(flat.covariance.iter().flatten().all(|c| *c == 0.0));
    }

    #[test]
    fn gks_without_disorder_is_flat() {
        let md = chain_model();
        let r = Region::chain(0, 4).unwrap();
        let e = Edge::new(Site::line(1), Site::line(2)).unwrap();
        let law = DisorderLaw::gaussian(0.0, 2.0).unwrap();
        let c = gks_interpolation(&md, &r, &e, &law, 3, 5, &Engine::Transfer, 1).unwrap();
        for p in &c.p_values {
            assert_eq!(*p, c.p_values[0]);
        }
        let outside = Edge::new(Site::line(3), Site::line(4)).unwrap();
        assert!(gks_interpolation(&md, &r, &outside, &law, 3, 5, &Engine::Transfer, 1).is_err());
    }

    #[test]
    fn gks_identities_on_four_chain() {
        let md = chain_model();
        let r = Region::chain(0, 4).unwrap();
        let e = Edge::new(Site::line(1), Site::line(2)).unwrap();
        let law = DisorderLaw::gaussian(0.5, 2.0).unwrap();
        let c = gks_interpolation(&md, &r, &e, &law, 200, 11, &Engine::Transfer, 3).unwrap();
        assert!(c.derivative_at_zero_vanishes(), "{:?}", c.p_prime_zero);
        assert!(c.convex());
        let (d, err) = c.endpoint_increase();
        assert!(d >= -3.0 * err);
        // the two estimates of P″ differ by the O(h²) difference error only
        for (k, (fd, (cov, _))) in c.second_diffs.iter().zip(&c.covariance_second_derivative).enumerate() {
            assert!((fd - cov).abs() < 1e-2 * cov.abs().max(1e-3), "k={k}: {fd} vs {cov}");
        }
        assert!(c.halving_shift < 1e-2);
    }

    #[test]
    fn superadditivity_cases() {
        let md = chain_model();
        let law = DisorderLaw::gaussian(0.5, 2.0).unwrap();
        let a = Region::chain(0, 2).unwrap();
        let b = Region::chain(2, 2).unwrap();
        let rep = superadditivity_check(&md, &a, &b, &law, 100, &Engine::Transfer, 2).unwrap();
        assert!(rep.passed && rep.lhs < rep.rhs);
        let far = Region::chain(10, 2).unwrap();
        let rep = superadditivity_check(&md, &a, &far, &law, 50, &Engine::Transfer, 2).unwrap();
        assert!((rep.lhs - rep.rhs).abs() < 1e-12);
        let none = DisorderLaw::gaussian(0.0, 2.0).unwrap();
        let rep = superadditivity_check(&md, &a, &b, &none, 4, &Engine::Transfer, 2).unwrap();
        assert!(rep.lhs.abs() < 1e-14 && rep.rhs.abs() < 1e-14);
        assert_eq!(
            superadditivity_check(&md, &a, &Region::chain(1, 2).unwrap(), &law, 4, &Engine::Transfer, 2).unwrap_err(),
            Error::Overlap
        );
    }

    #[test]
    fn quenched_pressure_trace_properties() {
        let md = chain_model();
        let seq = centered_chains(&[1, 2, 3, 4]).unwrap();
        let none = DisorderLaw::gaussian(0.0, 2.0).unwrap();
        let s = quenched_pressure_trace(&md, &seq, &none, 3, &Engine::Transfer, 0).unwrap();
        assert!(s.entries.iter().all(|e| e.value.abs() < 1e-14));

        let law = DisorderLaw::gaussian(0.5, 2.0).unwrap();
        let s = quenched_pressure_trace(&md, &seq, &law, 200, &Engine::Transfer, 0).unwrap();
        assert!(s.non_decreasing());
        assert_eq!(s.boundary_ratios.len(), 4);
        let big = quenched_pressure_trace(&md, &seq, &law, 800, &Engine::Transfer, 0).unwrap();
        let ratio = big.entries[3].error / s.entries[3].error;
        assert!((ratio - 0.5).abs() < 0.15, "{ratio}");
    }

    #[test]
    fn antithetic_pairs_are_gauge_equivalent_at_zero_field() {
        let md = chain_model();
        let law = DisorderLaw::gaussian(0.7, 2.0).unwrap();
        let r = Region::chain(0, 5).unwrap();
        for i in 0..20 {
            let j = sample_couplings(&law, &r, i);
            let a = log_z(&md, &r, &j, &SpinConfig::zeros(r.boundary()), &Engine::Transfer).unwrap().value;
            let b = log_z(&md, &r, &j.scaled(-1.0), &SpinConfig::zeros(r.boundary()), &Engine::Transfer)
                .unwrap()
                .value;
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn state_independence_cases() {
        let md = model(1, &GridConfig::default());
        let seq = centered_chains(&[1, 2, 3, 4, 5]).unwrap();
        let law = DisorderLaw::gaussian(0.5, 2.0).unwrap();
        let zero = state_independence_check(&md, &seq, &law, &BoundaryField::Zero, 10, &Engine::Transfer, 4).unwrap();
        assert!(zero.reports.iter().all(|r| r.lhs == 0.0));
        let xi = BoundaryField::ExpDecay {
            amplitude: 1.0,
            rate: 1.0,
        };
        let chk = state_independence_check(&md, &seq, &law, &xi, 100, &Engine::Transfer, 4).unwrap();
        assert!(chk.passed(), "{chk:?}");
        let k = chk.reports[0].rhs * seq.regions()[0].len() as f64 / seq.regions()[0].boundary().len() as f64;
        for (r, rep) in seq.regions().iter().zip(&chk.reports) {
            assert_relative_eq!(rep.rhs, k * van_hove_ratio(r), max_relative = 1e-14);
        }
    }
}
