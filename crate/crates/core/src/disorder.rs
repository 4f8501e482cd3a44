//! The disorder law ν on couplings and reproducible samples from it.
//!
//! Every coupling is drawn from its own ChaCha stream selected by the
//! canonical edge key, so a realization is a pure function of
//! (seed, edge). Enlarging a region extends a realization instead of
//! reshuffling it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::lattice::{Edge, Region};
use crate::weights::CouplingField;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisorderFamily {
    GaussianIid,
}

/// Product law with i.i.d. N(0, s²) couplings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderLaw {
    pub family: DisorderFamily,
    pub scale: f64,
    pub q: f64,
}

impl DisorderLaw {
    pub fn gaussian(scale: f64, q: f64) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("disorder scale must be ≥ 0, got {scale}")));
        }
        if !(q >= 1.0 && q.is_finite()) {
            return Err(Error::InvalidParameter(format!("q must be ≥ 1, got {q}")));
        }
        Ok(DisorderLaw {
            family: DisorderFamily::GaussianIid,
            scale,
            q,
        })
    }

    /// a_ν = E|J_xy|^q = s^q 2^{q/2} Γ((q+1)/2) / √π.
    pub fn a_nu(&self) -> f64 {
        match self.family {
            DisorderFamily::GaussianIid => {
                let q = self.q;
                self.scale.powf(q) * 2f64.powf(q / 2.0) * gamma((q + 1.0) / 2.0) / std::f64::consts::PI.sqrt()
            }
        }
    }

    /// The coupling on `edge` in realization `seed`.
    pub fn coupling(&self, edge: &Edge, seed: u64) -> f64 {
        if self.scale == 0.0 {
            return 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(edge_key(edge));
        let z: f64 = StandardNormal.sample(&mut rng);
        self.scale * z
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Deterministic 64-bit key of an edge from its canonical endpoints.
pub fn edge_key(edge: &Edge) -> u64 {
    let (a, b) = edge.endpoints();
    let mut h = splitmix64(a.dim() as u64);
    for c in a.coords().iter().chain(b.coords()) {
        h = splitmix64(h ^ (*c as u64));
    }
    h
}

/// Sub-seed for stream `index` of a master seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

/// Independent draws on every edge touching `region`.
pub fn sample_couplings(law: &DisorderLaw, region: &Region, seed: u64) -> CouplingField {
    CouplingField::from_fn(region, |e| law.coupling(e, seed))
}

/// A finite sample of ν on a fixed region.
#[derive(Clone, Debug, PartialEq)]
pub struct DisorderEnsemble {
    law: DisorderLaw,
    seed: u64,
    realizations: Vec<CouplingField>,
    region_hash: String,
}

impl DisorderEnsemble {
    /// Realization i uses the sub-seed `derive_seed(seed, i)`.
    pub fn sample(law: &DisorderLaw, region: &Region, seed: u64, n: usize) -> Self {
        let realizations = (0..n as u64)
            .into_par_iter()
            .map(|i| sample_couplings(law, region, derive_seed(seed, i)))
            .collect();
        DisorderEnsemble {
            law: *law,
            seed,
            realizations,
            region_hash: region.digest(),
        }
    }

    pub fn law(&self) -> &DisorderLaw {
        &self.law
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn realizations(&self) -> &[CouplingField] {
        &self.realizations
    }

    pub fn len(&self) -> usize {
        self.realizations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.realizations.is_empty()
    }

    pub fn manifest(&self) -> EnsembleManifest {
        EnsembleManifest {
            law: self.law,
            seed: self.seed,
            n_realizations: self.realizations.len(),
            region_hash: self.region_hash.clone(),
        }
    }
}

/// JSON record of how an ensemble was generated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub law: DisorderLaw,
    pub seed: u64,
    pub n_realizations: usize,
    pub region_hash: String,
}
