//! Finite-volume Gibbs kernels π_Δ(·|J,ξ) and the engines that evaluate them.
//!
//! A kernel is only ever exposed through expectations of observables, so the
//! tensor-quadrature, transfer-operator and Metropolis engines are
//! interchangeable and can be checked against each other.

mod dlr;
mod integration;
mod layout;
mod mcmc;
mod observable;
mod tensor;
mod transfer;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Region;
use crate::single_spin::SingleSpinMeasure;
use crate::weights::{abs_pow, CouplingField, ModelExponents, SpinConfig, WeightFunction};

pub use dlr::dlr_check;
pub use integration::{simpson, thermodynamic_integration, thermodynamic_integration_with};
pub use mcmc::{mcmc_kernel, McmcConfig, McmcOutput, McmcSampler};
pub use observable::{Evaluator, Observable, ObservableKind};
pub use tensor::{exact_kernel, exact_kernel_with_limit, DEFAULT_TENSOR_LIMIT};
pub use transfer::transfer_kernel;

/// The model data shared by every region: χ, the exponents and the weight.
#[derive(Clone, Debug)]
pub struct Model {
    pub single_spin: Arc<SingleSpinMeasure>,
    pub exponents: ModelExponents,
    pub weight: WeightFunction,
}

impl Model {
    pub fn new(single_spin: Arc<SingleSpinMeasure>, exponents: ModelExponents, weight: WeightFunction) -> Self {
        Model {
            single_spin,
            exponents,
            weight,
        }
    }

    pub fn dim(&self) -> usize {
        self.weight.dim()
    }

    pub fn spec(&self, region: &Region, couplings: &CouplingField, xi: &SpinConfig) -> Result<GibbsSpec> {
        GibbsSpec::new(
            region.clone(),
            couplings,
            xi,
            self.single_spin.clone(),
            self.exponents,
            self.weight.clone(),
        )
    }

    /// Zero boundary condition.
    pub fn free_spec(&self, region: &Region, couplings: &CouplingField) -> Result<GibbsSpec> {
        self.spec(region, couplings, &SpinConfig::zeros(region.boundary()))
    }
}

/// Everything that defines π_Δ(·|J,ξ).
#[derive(Clone, Debug)]
pub struct GibbsSpec {
    region: Region,
    couplings: CouplingField,
    boundary_condition: SpinConfig,
    single_spin: Arc<SingleSpinMeasure>,
    exponents: ModelExponents,
    weight: WeightFunction,
}

impl GibbsSpec {
    /// Couplings and boundary values are restricted to the edges touching Δ
    /// and to ∂Δ; anything missing is an error.
    pub fn new(
        region: Region,
        couplings: &CouplingField,
        boundary_condition: &SpinConfig,
        single_spin: Arc<SingleSpinMeasure>,
        exponents: ModelExponents,
        weight: WeightFunction,
    ) -> Result<Self> {
        if weight.dim() != region.dim() {
            return Err(Error::DimensionMismatch {
                expected: region.dim(),
                found: weight.dim(),
            });
        }
        let couplings = couplings.restricted_to(&region)?;
        let mut xi = SpinConfig::new();
        for y in region.boundary() {
            xi.set(y.clone(), boundary_condition.value(y)?);
        }
        Ok(GibbsSpec {
            region,
            couplings,
            boundary_condition: xi,
            single_spin,
            exponents,
            weight,
        })
    }

    /// Zero boundary condition.
    pub fn free(
        region: Region,
        couplings: &CouplingField,
        single_spin: Arc<SingleSpinMeasure>,
        exponents: ModelExponents,
        weight: WeightFunction,
    ) -> Result<Self> {
        let xi = SpinConfig::zeros(region.boundary());
        GibbsSpec::new(region, couplings, &xi, single_spin, exponents, weight)
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn couplings(&self) -> &CouplingField {
        &self.couplings
    }

    pub fn boundary_condition(&self) -> &SpinConfig {
        &self.boundary_condition
    }

    pub fn single_spin(&self) -> &SingleSpinMeasure {
        &self.single_spin
    }

    pub fn single_spin_arc(&self) -> &Arc<SingleSpinMeasure> {
        &self.single_spin
    }

    pub fn exponents(&self) -> &ModelExponents {
        &self.exponents
    }

    pub fn weight(&self) -> &WeightFunction {
        &self.weight
    }

    pub fn dim(&self) -> usize {
        self.region.dim()
    }

    /// Same kernel family with couplings J′.
    pub fn with_couplings(&self, couplings: &CouplingField) -> Result<Self> {
        GibbsSpec::new(
            self.region.clone(),
            couplings,
            &self.boundary_condition,
            self.single_spin.clone(),
            self.exponents,
            self.weight.clone(),
        )
    }

    /// Same kernel family with boundary condition ξ′.
    pub fn with_boundary(&self, xi: &SpinConfig) -> Result<Self> {
        GibbsSpec::new(
            self.region.clone(),
            &self.couplings,
            xi,
            self.single_spin.clone(),
            self.exponents,
            self.weight.clone(),
        )
    }

    /// J → tJ on every edge touching Δ.
    pub fn with_scaled_couplings(&self, t: f64) -> Self {
        GibbsSpec {
            couplings: self.couplings.scaled(t),
            ..self.clone()
        }
    }

    pub fn model(&self) -> Model {
        Model::new(self.single_spin.clone(), self.exponents, self.weight.clone())
    }

    /// Short digest of region, couplings and boundary values.
    pub fn digest(&self) -> String {
        let mut text = self.region.digest();
        for (e, v) in self.couplings.iter() {
            text.push_str(&format!(";{e}={v:e}"));
        }
        for (y, v) in self.boundary_condition.iter() {
            text.push_str(&format!(";{y}={v:e}"));
        }
        crate::digest_hex(text.as_bytes())
    }

    /// ‖J‖_q^q over the edges touching Δ.
    pub fn coupling_norm_pow(&self) -> f64 {
        crate::weights::norm_q_pow(&self.couplings, &self.weight, self.exponents.q())
    }

    /// ‖ξ‖_p^p over ∂Δ.
    pub fn boundary_norm_pow(&self) -> f64 {
        crate::weights::norm_p_pow(&self.boundary_condition, &self.weight, self.exponents.p())
    }
}

/// Which engine produced an estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    Quadrature,
    Transfer,
    Mcmc,
}

impl std::fmt::Display for EngineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EngineKind::Quadrature => "quadrature",
            EngineKind::Transfer => "transfer",
            EngineKind::Mcmc => "mcmc",
        })
    }
}

/// π_Δ(f|J,ξ) for one observable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsEstimate {
    pub observable: String,
    pub value: f64,
    /// Zero for the deterministic engines.
    pub std_error: f64,
    pub engine: EngineKind,
    /// Grid configurations summed over, or measured sweeps for MCMC.
    pub n_samples: u64,
}

/// Output of a deterministic engine.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelOutput {
    pub log_z: f64,
    pub estimates: Vec<GibbsEstimate>,
}

impl KernelOutput {
    /// Z_Δ(J,ξ); may overflow where `log_z` does not.
    pub fn z(&self) -> f64 {
        self.log_z.exp()
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.estimates.iter().find(|e| e.observable == name).map(|e| e.value)
    }
}

/// log Z_Δ with its uncertainty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogPartition {
    pub value: f64,
    pub std_error: f64,
    pub engine: EngineKind,
    /// Thermodynamic integration only: |Simpson(full grid) − Simpson(half grid)|.
    pub refinement_shift: f64,
    /// Set when the integration grid looks too coarse or the sampler misbehaved.
    pub flagged: bool,
}

/// Engine selection for expectations and log Z.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Quadrature,
    Transfer,
    /// Expectations by Metropolis, log Z by thermodynamic integration.
    Mcmc(McmcConfig),
}

impl Engine {
    pub fn kind(&self) -> EngineKind {
        match self {
            Engine::Quadrature => EngineKind::Quadrature,
            Engine::Transfer => EngineKind::Transfer,
            Engine::Mcmc(_) => EngineKind::Mcmc,
        }
    }
}

/// Expectations of `observables` under π_Δ(·|J,ξ) with the chosen engine.
pub fn expectations(spec: &GibbsSpec, observables: &[Observable], engine: &Engine) -> Result<Vec<GibbsEstimate>> {
    match engine {
        Engine::Quadrature => Ok(exact_kernel(spec, observables)?.estimates),
        Engine::Transfer => Ok(transfer_kernel(spec, observables)?.estimates),
        Engine::Mcmc(cfg) => Ok(mcmc_kernel(spec, observables, cfg)?.estimates),
    }
}

/// log Z_Δ(J,ξ).
pub fn log_partition(spec: &GibbsSpec, engine: &Engine) -> Result<LogPartition> {
    let exact = |value: f64, engine| LogPartition {
        value,
        std_error: 0.0,
        engine,
        refinement_shift: 0.0,
        flagged: false,
    };
    match engine {
        Engine::Quadrature => Ok(exact(exact_kernel(spec, &[])?.log_z, EngineKind::Quadrature)),
        Engine::Transfer => Ok(exact(transfer_kernel(spec, &[])?.log_z, EngineKind::Transfer)),
        Engine::Mcmc(cfg) => thermodynamic_integration(spec, cfg),
    }
}

/// H_Δ(σ|J,ξ). Boundary values are read from `sigma` where present and
/// from the spec's ξ otherwise.
pub fn energy(spec: &GibbsSpec, sigma: &SpinConfig) -> Result<f64> {
    let mut h = 0.0;
    for e in spec.region.interior_edges() {
        let (a, b) = e.endpoints();
        h -= spec.couplings.value(e)? * sigma.value(a)? * sigma.value(b)?;
    }
    for (x, y) in spec.region.cross_edges() {
        let xi = boundary_value(spec, sigma, y)?;
        h -= spec.couplings.between(x, y)? * sigma.value(x)? * xi;
    }
    Ok(h)
}

fn boundary_value(spec: &GibbsSpec, sigma: &SpinConfig, y: &crate::lattice::Site) -> Result<f64> {
    match sigma.get(y) {
        Some(v) => Ok(v),
        None => spec.boundary_condition.value(y),
    }
}

/// (|H|, 2dΣ_Δ|σ|^p + 2dΣ_∂Δ|ξ|^p + ½Σ_{x∈Δ}Σ_{y∼x}|J_xy|^q).
pub fn energy_bound_check(spec: &GibbsSpec, sigma: &SpinConfig) -> Result<(f64, f64)> {
    let p = spec.exponents.p();
    let q = spec.exponents.q();
    let two_d = 2.0 * spec.dim() as f64;
    let lhs = energy(spec, sigma)?.abs();
    let mut spins = 0.0;
    for x in spec.region.sites() {
        spins += abs_pow(sigma.value(x)?, p);
    }
    let mut bdry = 0.0;
    for y in spec.region.boundary() {
        bdry += abs_pow(boundary_value(spec, sigma, y)?, p);
    }
    // interior edges are seen from both endpoints, crossing edges from one
    let mut couplings = 0.0;
    for e in spec.region.interior_edges() {
        couplings += abs_pow(spec.couplings.value(e)?, q);
    }
    for (x, y) in spec.region.cross_edges() {
        couplings += 0.5 * abs_pow(spec.couplings.between(x, y)?, q);
    }
    Ok((lhs, two_d * spins + two_d * bdry + couplings))
}
