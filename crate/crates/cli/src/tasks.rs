//! Task execution. Every task yields bound rows, estimate rows and named
//! checks; the checks decide the task status.

use std::sync::Arc;

use lattice_gibbs::bounds::{
    check_lipschitz_in_j, check_one_point, check_tail_bound, check_uniform_moment, check_volume_bound, BoundReport,
};
use lattice_gibbs::disorder::{derive_seed, DisorderLaw};
use lattice_gibbs::gibbs::{dlr_check, Engine, Model, Observable};
use lattice_gibbs::lattice::{centered_chains, Edge, Region, Site};
use lattice_gibbs::single_spin::{GridConfig, Potential, SingleSpinMeasure};
use lattice_gibbs::thermo::{
    empirical_metastate, gks_interpolation, quenched_pressure_trace, state_independence_check,
    superadditivity_check,
};
use lattice_gibbs::weights::{CouplingField, ModelExponents, SpinConfig, WeightFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{EngineChoice, RunConfig, Task};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub case: usize,
    pub bound_name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub lhs_error: f64,
    pub deterministic: bool,
    pub passed: bool,
    pub inputs_digest: String,
}

impl BoundRow {
    fn new(case: usize, r: BoundReport) -> Self {
        BoundRow {
            case,
            bound_name: r.bound_name,
            lhs: r.lhs,
            rhs: r.rhs,
            margin: r.margin,
            lhs_error: r.lhs_error,
            deterministic: r.deterministic,
            passed: r.passed,
            inputs_digest: r.inputs_digest,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub series: String,
    pub index: usize,
    pub x: f64,
    pub value: f64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// A failed deterministic check is a violated bound; a failed statistical
    /// one is a 3σ flag.
    pub deterministic: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TaskOutput {
    pub bounds: Vec<BoundRow>,
    pub estimates: Vec<EstimateRow>,
    pub checks: Vec<Check>,
}

impl TaskOutput {
    fn bound(&mut self, case: usize, r: BoundReport) {
        self.checks.push(Check {
            name: format!("{}[{case}]", r.bound_name),
            passed: r.passed,
            deterministic: r.deterministic,
        });
        self.bounds.push(BoundRow::new(case, r));
    }

    fn check(&mut self, name: &str, passed: bool, deterministic: bool) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            deterministic,
        });
    }

    fn estimate(&mut self, series: &str, index: usize, x: f64, value: f64, error: f64) {
        self.estimates.push(EstimateRow {
            series: series.into(),
            index,
            x,
            value,
            error,
        });
    }
}

/// Shared state for one run: the two single-spin grids and the engines.
pub struct Context {
    pub config: RunConfig,
    pub fine: Model,
    pub tensor: Model,
    pub law: DisorderLaw,
}

impl Context {
    pub fn new(config: &RunConfig) -> lattice_gibbs::Result<Self> {
        let m = &config.model;
        let ex = ModelExponents::from_q(m.q)?;
        let v = Potential::new(m.potential.clone())?;
        let w = WeightFunction::new(m.alpha, m.d)?;
        let build = |g: &GridConfig| -> lattice_gibbs::Result<Model> {
            Ok(Model::new(Arc::new(SingleSpinMeasure::build(v.clone(), &ex, g)?), ex, w))
        };
        let tensor_grid = GridConfig {
            max_lambda: config.engines.grid.max_lambda,
            max_field: config.engines.grid.max_field,
            ..GridConfig::fixed(config.engines.tensor_panels, config.engines.tensor_order)
        };
        Ok(Context {
            fine: build(&config.engines.grid)?,
            tensor: build(&tensor_grid)?,
            law: DisorderLaw::gaussian(config.disorder.scale, m.q)?,
            config: config.clone(),
        })
    }

    fn engine(&self, choice: EngineChoice) -> Engine {
        match choice {
            EngineChoice::Quadrature => Engine::Quadrature,
            EngineChoice::Transfer => Engine::Transfer,
            EngineChoice::Mcmc => {
                let mut cfg = self.config.engines.mcmc.clone();
                cfg.seed = derive_seed(self.config.disorder.master_seed, cfg.seed);
                Engine::Mcmc(cfg)
            }
        }
    }

    /// The grid that matches an engine on a region of `sites` sites.
    fn model_for(&self, choice: EngineChoice, sites: usize) -> &Model {
        if choice == EngineChoice::Quadrature && sites > 1 {
            &self.tensor
        } else {
            &self.fine
        }
    }

    fn n(&self) -> usize {
        self.config.disorder.n_realizations
    }

    fn seed(&self, task_index: usize) -> u64 {
        derive_seed(self.config.disorder.master_seed, task_index as u64)
    }

    /// Chain {0..size−1} for d = 1, box {0..size−1}² for d = 2.
    fn block(&self, size: usize) -> lattice_gibbs::Result<Region> {
        let d = self.config.model.d;
        let sites: Vec<Site> = match d {
            1 => (0..size as i64).map(Site::line).collect(),
            _ => (0..size as i64)
                .flat_map(|a| (0..size as i64).map(move |b| Site::new(vec![a, b])))
                .collect(),
        };
        Region::from_sites(d, sites)
    }
}

fn random_inputs(rng: &mut ChaCha8Rng, r: &Region, range: f64) -> (CouplingField, SpinConfig) {
    let j = CouplingField::from_fn(r, |_| rng.random_range(-range..range));
    let xi = SpinConfig::from_fn(r.boundary(), |_| rng.random_range(-range..range));
    (j, xi)
}

fn moments(r: &Region) -> Vec<Observable> {
    let mut obs = Vec::new();
    for x in r.sites() {
        obs.push(Observable::spin(x));
        obs.push(Observable::moment(x, 2));
    }
    for e in r.interior_edges() {
        let (a, b) = e.endpoints();
        obs.push(Observable::product(a, b));
    }
    obs
}

pub fn run_task(ctx: &Context, index: usize, task: &Task) -> lattice_gibbs::Result<TaskOutput> {
    let mut out = TaskOutput::default();
    let seed = ctx.seed(index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match task {
        Task::OnePoint {
            lambda,
            kappa,
            n_inputs,
            range,
        } => {
            let r = ctx.block(1)?;
            for case in 0..*n_inputs {
                let (j, xi) = random_inputs(&mut rng, &r, *range);
                out.bound(case, check_one_point(&ctx.fine.spec(&r, &j, &xi)?, *lambda, *kappa)?);
            }
        }
        Task::VolumeBound {
            lambda,
            cap,
            sizes,
            n_inputs,
            range,
            engine,
        } => {
            let eng = ctx.engine(*engine);
            let mut case = 0;
            for &size in sizes {
                let r = ctx.block(size)?;
                let md = ctx.model_for(*engine, r.len());
                for _ in 0..*n_inputs {
                    let (j, xi) = random_inputs(&mut rng, &r, *range);
                    out.bound(case, check_volume_bound(&md.spec(&r, &j, &xi)?, *lambda, *cap, &eng)?);
                    case += 1;
                }
            }
        }
        Task::TailBound {
            lambda,
            radii,
            size,
            n_inputs,
            range,
            engine,
        } => {
            let eng = ctx.engine(*engine);
            let r = ctx.block(*size)?;
            let md = ctx.model_for(*engine, r.len());
            let mut case = 0;
            for _ in 0..*n_inputs {
                let (j, xi) = random_inputs(&mut rng, &r, *range);
                let spec = md.spec(&r, &j, &xi)?;
                for &radius in radii {
                    out.bound(case, check_tail_bound(&spec, radius, *lambda, &eng)?);
                    case += 1;
                }
            }
        }
        Task::Lipschitz {
            size,
            radius,
            n_inputs,
            engine,
        } => {
            let eng = ctx.engine(*engine);
            let r = ctx.block(*size)?;
            let md = ctx.model_for(*engine, r.len());
            let w = &md.weight;
            let q = md.exponents.q();
            let f = Observable::tanh_spin(&r.sites()[0]);
            for case in 0..*n_inputs {
                // two couplings inside the ball B_q(R), drawn by radial scaling
                let draw = |rng: &mut ChaCha8Rng| {
                    let j = CouplingField::from_fn(&r, |_| rng.random_range(-1.0..1.0));
                    let norm = lattice_gibbs::weights::norm_q(&j, w, q);
                    let t: f64 = rng.random_range(0.0..1.0);
                    j.scaled(t * radius / norm.max(f64::MIN_POSITIVE))
                };
                let j = draw(&mut rng);
                let jp = draw(&mut rng);
                let xi = SpinConfig::from_fn(r.boundary(), |_| rng.random_range(-1.0..1.0));
                let spec = md.spec(&r, &j, &xi)?;
                out.bound(case, check_lipschitz_in_j(&spec, &jp, *radius, &f, &eng)?);
            }
        }
        Task::Dlr {
            size,
            inner_start,
            inner_len,
            n_inputs,
            range,
        } => {
            let r = ctx.block(*size)?;
            let inner = Region::from_sites(r.dim(), r.sites()[*inner_start..inner_start + inner_len].to_vec())?;
            let obs = moments(&r);
            let mut worst: f64 = 0.0;
            for case in 0..*n_inputs {
                let (j, xi) = random_inputs(&mut rng, &r, *range);
                let d = dlr_check(&ctx.tensor.spec(&r, &j, &xi)?, &inner, &obs)?;
                out.estimate("dlr_discrepancy", case, case as f64, d, 0.0);
                worst = worst.max(d);
            }
            out.check("dlr_discrepancy<=1e-8", worst <= 1e-8, true);
        }
        Task::Gks {
            chain_length,
            edge,
            n_points,
            engine,
        } => {
            let r = Region::chain(0, *chain_length)?;
            let e = Edge::new(Site::line(*edge as i64), Site::line(*edge as i64 + 1))?;
            let md = ctx.model_for(*engine, r.len());
            let c = gks_interpolation(md, &r, &e, &ctx.law, ctx.n(), *n_points, &ctx.engine(*engine), seed)?;
            for (k, lam) in c.lambdas.iter().enumerate() {
                out.estimate("P", k, *lam, c.p_values[k], c.errors[k]);
                out.estimate("P''", k, *lam, c.second_diffs[k], c.second_diff_errors[k]);
            }
            for (k, (v, e)) in c.covariance_second_derivative.iter().enumerate() {
                out.estimate("P''_covariance", k, c.lambdas[k], *v, *e);
            }
            out.estimate("P'(0)", 0, 0.0, c.p_prime_zero.0, c.p_prime_zero.1);
            let (d, err) = c.endpoint_increase();
            out.check("P'(0)=0", c.derivative_at_zero_vanishes(), false);
            out.check("P''>=0", c.convex(), false);
            out.check("P(1)>=P(0)", d >= -3.0 * err, false);
        }
        Task::Superadditivity {
            a_len,
            b_len,
            gap,
            engine,
        } => {
            let a = Region::chain(0, *a_len)?;
            let b = Region::chain((a_len + gap) as i64, *b_len)?;
            let md = ctx.model_for(*engine, a_len + b_len);
            let rep = superadditivity_check(md, &a, &b, &ctx.law, ctx.n(), &ctx.engine(*engine), seed)?;
            out.bound(0, rep);
        }
        Task::Pressure { half_widths, engine } => {
            let seq = centered_chains(half_widths)?;
            let md = ctx.model_for(*engine, seq.last().len());
            let s = quenched_pressure_trace(md, &seq, &ctx.law, ctx.n(), &ctx.engine(*engine), seed)?;
            for e in &s.entries {
                out.estimate("pressure", e.region_index, e.sites as f64, e.value, e.error);
            }
            for (k, (d, e)) in s.increments.iter().enumerate() {
                out.estimate("increment", k, s.entries[k + 1].sites as f64, *d, *e);
            }
            out.check("non_decreasing", s.non_decreasing(), false);
        }
        Task::StateIndependence {
            half_widths,
            boundary,
            engine,
        } => {
            let seq = centered_chains(half_widths)?;
            let md = ctx.model_for(*engine, seq.last().len());
            let chk = state_independence_check(md, &seq, &ctx.law, boundary, ctx.n(), &ctx.engine(*engine), seed)?;
            out.check("lhs_decreasing", chk.decreasing, false);
            for (n, rep) in chk.reports.into_iter().enumerate() {
                out.bound(n, rep);
            }
        }
        Task::UniformMoment { half_widths, engine } => {
            let seq = centered_chains(half_widths)?;
            let md = ctx.model_for(*engine, seq.last().len());
            let x = Site::line(0);
            let chk = check_uniform_moment(&ctx.law, &seq, &x, ctx.n(), md, &ctx.engine(*engine), seed)?;
            for (k, ((s, m), e)) in chk.sizes.iter().zip(&chk.means).zip(&chk.errors).enumerate() {
                out.estimate("moment", k, *s as f64, *m, *e);
            }
            out.estimate("slope", 0, 0.0, chk.slope, chk.slope_error);
            out.check("flat", chk.flat, false);
            out.bound(0, chk.report);
        }
        Task::Metastate {
            half_widths,
            boundary,
            burn_in,
            engine,
        } => {
            let seq = centered_chains(half_widths)?;
            let md = ctx.model_for(*engine, seq.last().len());
            let o = Site::line(0);
            let obs = [Observable::spin(&o), Observable::moment(&o, 2), Observable::product(&o, &Site::line(1))];
            let ms = empirical_metastate(md, &seq, &ctx.law, ctx.n(), boundary, &obs, &ctx.engine(*engine), seed)?;
            for (k, d) in ms.dispersion.iter().enumerate() {
                out.estimate("dispersion", k, seq.regions()[k].len() as f64, *d, 0.0);
            }
            for (k, row) in ms.mean.iter().enumerate() {
                for (a, v) in row.iter().enumerate() {
                    out.estimate(&format!("cesaro_mean[{}]", obs[a].name), k, seq.regions()[k].len() as f64, *v, 0.0);
                }
            }
            let arithmetic = ms.traces.iter().all(|t| t.increment_bound_holds());
            out.check("cesaro_increment_bound", arithmetic, true);
            out.check("dispersion_non_increasing", ms.dispersion_non_increasing_from(*burn_in), false);
        }
    }
    Ok(out)
}
