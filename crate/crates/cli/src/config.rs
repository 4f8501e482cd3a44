//! Run configuration and its field-level validation.

use std::path::{Path, PathBuf};

use lattice_gibbs::gibbs::McmcConfig;
use lattice_gibbs::single_spin::{GridConfig, Potential};
use lattice_gibbs::thermo::BoundaryField;
use lattice_gibbs::weights::ModelExponents;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub disorder: DisorderConfig,
    #[serde(default)]
    pub engines: EngineConfig,
    #[serde(default)]
    pub tasks: Vec<Task>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            output_dir: default_output_dir(),
            model: ModelConfig::default(),
            disorder: DisorderConfig::default(),
            engines: EngineConfig::default(),
            tasks: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub d: usize,
    pub q: f64,
    pub alpha: f64,
    /// Coefficients of 1, u², u⁴, … in V.
    pub potential: Vec<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d: 1,
            q: 2.0,
            alpha: 1.0,
            potential: vec![0.0, 0.0, 0.0, 1.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderConfig {
    /// Standard deviation s of the Gaussian couplings.
    pub scale: f64,
    /// Realizations (antithetic pairs for the pressure tasks).
    pub n_realizations: usize,
    pub master_seed: u64,
}

impl Default for DisorderConfig {
    fn default() -> Self {
        DisorderConfig {
            scale: 0.5,
            n_realizations: 100,
            master_seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    /// Single-spin grid for single-site checks and the transfer engine.
    #[serde(default)]
    pub grid: GridConfig,
    /// Fixed grid for multi-site tensor quadrature.
    #[serde(default = "default_tensor_panels")]
    pub tensor_panels: usize,
    #[serde(default = "default_tensor_order")]
    pub tensor_order: usize,
    #[serde(default)]
    pub mcmc: McmcConfig,
}

fn default_tensor_panels() -> usize {
    6
}

fn default_tensor_order() -> usize {
    8
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            grid: GridConfig::default(),
            tensor_panels: default_tensor_panels(),
            tensor_order: default_tensor_order(),
            mcmc: McmcConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineChoice {
    Quadrature,
    Transfer,
    Mcmc,
}

impl EngineChoice {
    pub fn name(&self) -> &'static str {
        match self {
            EngineChoice::Quadrature => "quadrature",
            EngineChoice::Transfer => "transfer",
            EngineChoice::Mcmc => "mcmc",
        }
    }
}

fn quadrature() -> EngineChoice {
    EngineChoice::Quadrature
}

fn transfer() -> EngineChoice {
    EngineChoice::Transfer
}

/// One unit of work. Region sizes are chain lengths when d = 1 and box sides
/// when d = 2; `half_widths` select centred chains {−h..h}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    OnePoint {
        lambda: f64,
        kappa: f64,
        n_inputs: usize,
        range: f64,
    },
    VolumeBound {
        lambda: f64,
        cap: f64,
        sizes: Vec<usize>,
        n_inputs: usize,
        range: f64,
        #[serde(default = "quadrature")]
        engine: EngineChoice,
    },
    TailBound {
        lambda: f64,
        radii: Vec<f64>,
        size: usize,
        n_inputs: usize,
        range: f64,
        #[serde(default = "quadrature")]
        engine: EngineChoice,
    },
    Lipschitz {
        size: usize,
        radius: f64,
        n_inputs: usize,
        #[serde(default = "transfer")]
        engine: EngineChoice,
    },
    Dlr {
        size: usize,
        inner_start: usize,
        inner_len: usize,
        n_inputs: usize,
        range: f64,
    },
    Gks {
        chain_length: usize,
        /// Left endpoint of the interpolated edge.
        edge: usize,
        n_points: usize,
        #[serde(default = "transfer")]
        engine: EngineChoice,
    },
    Superadditivity {
        a_len: usize,
        b_len: usize,
        /// Empty sites between the two chains; 0 joins them by one edge.
        gap: usize,
        #[serde(default = "transfer")]
        engine: EngineChoice,
    },
    Pressure {
        half_widths: Vec<usize>,
        #[serde(default = "transfer")]
        engine: EngineChoice,
    },
    StateIndependence {
        half_widths: Vec<usize>,
        boundary: BoundaryField,
        #[serde(default = "transfer")]
        engine: EngineChoice,
    },
    UniformMoment {
        half_widths: Vec<usize>,
        #[serde(default = "transfer")]
        engine: EngineChoice,
    },
    Metastate {
        half_widths: Vec<usize>,
        boundary: BoundaryField,
        /// Index from which the dispersion must not increase.
        burn_in: usize,
        #[serde(default = "transfer")]
        engine: EngineChoice,
    },
}

impl Task {
    pub fn kind(&self) -> &'static str {
        match self {
            Task::OnePoint { .. } => "one_point",
            Task::VolumeBound { .. } => "volume_bound",
            Task::TailBound { .. } => "tail_bound",
            Task::Lipschitz { .. } => "lipschitz",
            Task::Dlr { .. } => "dlr",
            Task::Gks { .. } => "gks",
            Task::Superadditivity { .. } => "superadditivity",
            Task::Pressure { .. } => "pressure",
            Task::StateIndependence { .. } => "state_independence",
            Task::UniformMoment { .. } => "uniform_moment",
            Task::Metastate { .. } => "metastate",
        }
    }

    fn engine(&self) -> Option<EngineChoice> {
        match self {
            Task::OnePoint { .. } | Task::Dlr { .. } => None,
            Task::VolumeBound { engine, .. }
            | Task::TailBound { engine, .. }
            | Task::Lipschitz { engine, .. }
            | Task::Gks { engine, .. }
            | Task::Superadditivity { engine, .. }
            | Task::Pressure { engine, .. }
            | Task::StateIndependence { engine, .. }
            | Task::UniformMoment { engine, .. }
            | Task::Metastate { engine, .. } => Some(*engine),
        }
    }

    /// Tasks built on centred or offset chains.
    fn needs_chains(&self) -> bool {
        matches!(
            self,
            Task::Gks { .. }
                | Task::Superadditivity { .. }
                | Task::Pressure { .. }
                | Task::StateIndependence { .. }
                | Task::UniformMoment { .. }
                | Task::Metastate { .. }
        )
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Every invariant violation, one message per line, prefixed by the field.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut push = |field: &str, msg: String| out.push(format!("{field}: {msg}"));
        let m = &self.model;
        if m.d == 0 || m.d > 2 {
            push("model.d", format!("d = {} is not supported (1 or 2)", m.d));
        }
        if !(m.alpha > 0.0 && m.alpha.is_finite()) {
            push("model.alpha", format!("alpha must be positive, got {}", m.alpha));
        }
        match ModelExponents::from_q(m.q) {
            Err(_) => push("model.q", "q must exceed 1".into()),
            Ok(ex) => match Potential::new(m.potential.clone()) {
                Err(e) => push("model.potential", e.to_string()),
                Ok(v) => {
                    if (v.degree() as f64) <= ex.p() {
                        push("model.potential", format!("deg V = {} not > p = {}", v.degree(), ex.p()));
                    }
                }
            },
        }
        let dis = &self.disorder;
        if !(dis.scale >= 0.0 && dis.scale.is_finite()) {
            push("disorder.scale", format!("scale must be ≥ 0, got {}", dis.scale));
        }
        if dis.n_realizations == 0 {
            push("disorder.n_realizations", "must be positive".into());
        }
        let en = &self.engines;
        if en.grid.panels == 0 || en.grid.panels % 2 != 0 || en.grid.order == 0 {
            push("engines.grid", "panels must be positive and even, order positive".into());
        }
        if en.tensor_panels == 0 || en.tensor_panels % 2 != 0 || en.tensor_order == 0 {
            push("engines.tensor_panels", "panels must be positive and even, order positive".into());
        }
        if let Err(e) = en.mcmc.validate() {
            push("engines.mcmc", e.to_string());
        }
        if en.mcmc.ti_points < 5 || en.mcmc.ti_points % 4 != 1 {
            push("engines.mcmc.ti_points", format!("need 4m+1 ≥ 5 points, got {}", en.mcmc.ti_points));
        }
        for (i, t) in self.tasks.iter().enumerate() {
            let field = format!("tasks[{i}] ({})", t.kind());
            for msg in task_diagnostics(t, m.d) {
                push(&field, msg);
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let d = self.diagnostics();
        if d.is_empty() {
            Ok(())
        } else {
            Err(CliError::Invalid(d))
        }
    }
}

fn task_diagnostics(t: &Task, d: usize) -> Vec<String> {
    let mut out = Vec::new();
    let mut positive = |name: &str, v: f64| {
        if !(v > 0.0 && v.is_finite()) {
            out.push(format!("{name} must be positive, got {v}"));
        }
    };
    match t {
        Task::OnePoint {
            lambda,
            kappa,
            n_inputs,
            range,
        } => {
            positive("lambda", *lambda);
            positive("kappa", *kappa);
            positive("n_inputs", *n_inputs as f64);
            positive("range", *range);
        }
        Task::VolumeBound {
            lambda,
            cap,
            sizes,
            n_inputs,
            range,
            ..
        } => {
            positive("lambda", *lambda);
            positive("cap", *cap);
            positive("n_inputs", *n_inputs as f64);
            positive("range", *range);
            if sizes.is_empty() || sizes.contains(&0) {
                out.push("sizes must be non-empty and positive".into());
            }
        }
        Task::TailBound {
            lambda,
            radii,
            size,
            n_inputs,
            range,
            ..
        } => {
            positive("lambda", *lambda);
            positive("size", *size as f64);
            positive("n_inputs", *n_inputs as f64);
            positive("range", *range);
            if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
                out.push("radii must be non-empty and positive".into());
            }
        }
        Task::Lipschitz {
            size,
            radius,
            n_inputs,
            ..
        } => {
            positive("size", *size as f64);
            positive("radius", *radius);
            positive("n_inputs", *n_inputs as f64);
        }
        Task::Dlr {
            size,
            inner_start,
            inner_len,
            n_inputs,
            range,
        } => {
            positive("n_inputs", *n_inputs as f64);
            positive("range", *range);
            positive("inner_len", *inner_len as f64);
            let cells = if d == 2 { size * size } else { *size };
            if inner_start + inner_len > cells {
                out.push(format!("inner sites {inner_start}..{} exceed the {cells} outer sites", inner_start + inner_len));
            }
        }
        Task::Gks {
            chain_length,
            edge,
            n_points,
            ..
        } => {
            if edge + 1 >= *chain_length {
                out.push(format!("edge {edge} is not inside a chain of length {chain_length}"));
            }
            if *n_points < 3 {
                out.push("n_points must be at least 3".into());
            }
        }
        Task::Superadditivity { a_len, b_len, .. } => {
            positive("a_len", *a_len as f64);
            positive("b_len", *b_len as f64);
        }
        Task::Pressure { half_widths, .. } | Task::StateIndependence { half_widths, .. } => {
            increasing(half_widths, 0, &mut out);
        }
        Task::UniformMoment { half_widths, .. } => increasing(half_widths, 1, &mut out),
        Task::Metastate {
            half_widths, burn_in, ..
        } => {
            increasing(half_widths, 1, &mut out);
            if *burn_in >= half_widths.len() {
                out.push(format!("burn_in {burn_in} leaves no sequence to check"));
            }
        }
    }
    if t.needs_chains() && d != 1 {
        out.push("needs model.d = 1".into());
    }
    if t.engine() == Some(EngineChoice::Transfer) && d != 1 {
        out.push("the transfer engine needs model.d = 1".into());
    }
    out
}

fn increasing(h: &[usize], min: usize, out: &mut Vec<String>) {
    if h.is_empty() || h[0] < min || h.windows(2).any(|w| w[1] <= w[0]) {
        out.push(format!("half_widths must be non-empty, strictly increasing and ≥ {min}"));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        assert!(RunConfig::default().diagnostics().is_empty());
    }

    #[test]
    fn q_one_rejected() {
        let mut c = RunConfig::default();
        c.model.q = 1.0;
        let d = c.diagnostics();
        assert!(d.iter().any(|m| m.contains("q must exceed 1")), "{d:?}");
    }

    #[test]
    fn quartic_potential_rejected() {
        let mut c = RunConfig::default();
        c.model.potential = vec![0.0, 0.0, 1.0];
        let d = c.diagnostics();
        assert_eq!(d, vec!["model.potential: deg V = 4 not > p = 4".to_string()]);
    }

    #[test]
    fn reports_every_violation() {
        let mut c = RunConfig::default();
        c.disorder.n_realizations = 0;
        c.model.alpha = -1.0;
        c.tasks.push(Task::Gks {
            chain_length: 2,
            edge: 1,
            n_points: 2,
            engine: EngineChoice::Transfer,
        });
        assert_eq!(c.diagnostics().len(), 4);
    }
}
