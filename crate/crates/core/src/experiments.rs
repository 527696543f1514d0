//! Config-driven experiment runners with deterministic tabular output.
//!
//! Every experiment maps a parsed configuration to a table of
//! self-describing rows. Ensemble members are dispatched over a worker pool
//! but keyed by index and reduced in index order, and each member draws from
//! its own counter-based RNG stream, so output bytes are identical for any
//! thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    log_grid, reset_time_from_evaluator, speedup_from_states, DistanceEvaluator, DistanceScope,
    SpeedupOptions,
};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::liouvillian::{build_liouvillian, spectral_decompose, SpectralDecomposition};
use crate::models::{
    analytic_redfield_state, embedding_model, redfield_generator,
    redfield_speedup, thermal_speedup, two_qubit_markovian, two_qubit_thermal, EmbeddingParams,
    MarkovParams, ThermalParams,
};
use crate::protocol::{
    apply_gate, cry_pi, kappa, perturbed_cry_with_order, AncillaState, ControlledGate, ErrorOrder,
};
use crate::state::{
    l1_coherence, partial_trace, purity, qubit, trace_distance, DensityMatrix,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    SpectrumOverlaps,
    SpeedupMap,
    HaarEnsemble,
    NmCompare,
    RedfieldValidate,
    RobustnessMap,
    FiniteTemperature,
    AncillaSweep,
}

impl Experiment {
    pub fn id(&self) -> &'static str {
        match self {
            Experiment::SpectrumOverlaps => "spectrum-overlaps",
            Experiment::SpeedupMap => "speedup-map",
            Experiment::HaarEnsemble => "haar-ensemble",
            Experiment::NmCompare => "nm-compare",
            Experiment::RedfieldValidate => "redfield-validate",
            Experiment::RobustnessMap => "robustness-map",
            Experiment::FiniteTemperature => "finite-temperature",
            Experiment::AncillaSweep => "ancilla-sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub count: u64,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            count: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: std::path::PathBuf,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AncillaConfig {
    pub p0: f64,
    #[serde(default)]
    pub coherence_re: f64,
    #[serde(default)]
    pub coherence_im: f64,
}

impl Default for AncillaConfig {
    fn default() -> Self {
        Self {
            p0: 1.0,
            coherence_re: 0.0,
            coherence_im: 0.0,
        }
    }
}

impl AncillaConfig {
    pub fn state(&self) -> Result<AncillaState> {
        AncillaState::new(
            self.p0,
            num_complex::Complex64::new(self.coherence_re, self.coherence_im),
        )
    }
}

/// Which reduced state the trace distance is measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScopeConfig {
    /// Full state of the model (two qubits, or qubits + TLSs).
    Joint,
    /// Both qubits, TLSs traced out (equals Joint for TLS-free models).
    Qubits,
    /// System qubit q1 alone.
    System,
}

impl Default for ScopeConfig {
    fn default() -> Self {
        Self::Qubits
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    pub markov: Option<MarkovParams>,
    pub thermal: Option<ThermalParams>,
    pub embedding: Option<EmbeddingParams>,
    #[serde(default)]
    pub ancilla: AncillaConfig,
    #[serde(default)]
    pub scope: ScopeConfig,
    /// Side length of parameter-grid experiments.
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    /// Haar states per robustness-map grid point.
    #[serde(default = "default_robustness_states")]
    pub robustness_states: u64,
    #[serde(default = "default_error_order")]
    pub error_order: ErrorOrder,
    /// Coarse time-grid extent and resolution for reset-time scans.
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_time_points")]
    pub time_points: usize,
    pub output: Option<OutputConfig>,
}

fn default_epsilon() -> f64 {
    1e-3
}
fn default_grid_size() -> usize {
    50
}
fn default_robustness_states() -> u64 {
    50
}
fn default_error_order() -> ErrorOrder {
    ErrorOrder::XAfterY
}
fn default_t_max() -> f64 {
    300.0
}
fn default_time_points() -> usize {
    1200
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon <= 0.0 {
            return Err(Error::InvalidConfig("epsilon must be positive".into()));
        }
        if self.ensemble.count == 0 {
            return Err(Error::InvalidConfig("ensemble.count must be > 0".into()));
        }
        if self.grid_size < 2 {
            return Err(Error::InvalidConfig("grid_size must be >= 2".into()));
        }
        if self.t_max <= 0.0 || self.time_points < 16 {
            return Err(Error::InvalidConfig(
                "t_max must be positive and time_points >= 16".into(),
            ));
        }
        if let Some(m) = &self.markov {
            m.validate().map_err(|e| Error::InvalidConfig(e.to_string()))?;
        }
        if let Some(t) = &self.thermal {
            t.validate().map_err(|e| Error::InvalidConfig(e.to_string()))?;
        }
        if let Some(e) = &self.embedding {
            e.validate().map_err(|e| Error::InvalidConfig(e.to_string()))?;
        }
        self.ancilla
            .state()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Ok(())
    }

    pub fn markov_params(&self) -> MarkovParams {
        self.markov.unwrap_or(MarkovParams {
            omega_q: 1.0,
            gamma1: 1.0,
            gamma_phi: 1.0 / 6.0,
        })
    }

    pub fn thermal_params(&self) -> ThermalParams {
        self.thermal.unwrap_or(ThermalParams {
            omega: 1.0,
            gamma: 1.0,
            nbar: 0.0,
            gamma_phi: 1.0 / 6.0,
        })
    }

    /// Default non-Markovian ensemble parameters: kappa/nu_zx = 0.05 with
    /// T2/T1 = 1.5, and frequencies of the order of the coupling so the
    /// reduced dynamics visibly oscillates.
    pub fn embedding_params(&self) -> EmbeddingParams {
        self.embedding.unwrap_or(EmbeddingParams {
            omega_q: 1.0,
            omega_t: 2.0,
            nu_zx: 2.0,
            gamma1: 1.0,
            gamma_phi: 1.0 / 6.0,
            kappa: 0.1,
        })
    }

    fn grid(&self) -> Vec<f64> {
        log_grid(1e-3, self.t_max, self.time_points)
    }
}

/// One output cell; formats identically on every platform and thread count.
#[derive(Debug, Clone)]
pub enum Cell {
    Text(&'static str),
    Num(f64),
    Int(u64),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Text(s) => (*s).to_string(),
            Cell::Num(x) => format!("{x}"),
            Cell::Int(k) => format!("{k}"),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Text(s) => serde_json::Value::String((*s).to_string()),
            Cell::Num(x) => serde_json::Number::from_f64(*x)
                .map(serde_json::Value::Number)
                .unwrap_or(serde_json::Value::Null),
            Cell::Int(k) => serde_json::Value::Number((*k).into()),
        }
    }
}

/// Experiment output: a header and index-ordered rows.
#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            debug_assert_eq!(row.len(), self.header.len());
            let line: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let records: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                let map: serde_json::Map<String, serde_json::Value> = self
                    .header
                    .iter()
                    .zip(row)
                    .map(|(h, c)| ((*h).to_string(), c.json()))
                    .collect();
                serde_json::Value::Object(map)
            })
            .collect();
        serde_json::to_string_pretty(&records).expect("records serialize") + "\n"
    }

    pub fn write(&self, path: &std::path::Path, format: OutputFormat) -> Result<()> {
        let text = match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        };
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// The model an ensemble experiment runs on.
enum Model {
    /// Two-qubit Markovian model (dims [2,2]).
    Markov(SpectralDecomposition),
    /// Two qubit-TLS pairs (dims [2,2,2,2], ordered q1, q2, TLS1, TLS2).
    Embedding(SpectralDecomposition),
}

impl Model {
    fn decomposition(&self) -> &SpectralDecomposition {
        match self {
            Model::Markov(d) | Model::Embedding(d) => d,
        }
    }

    fn dims(&self) -> Vec<usize> {
        match self {
            Model::Markov(_) => vec![2, 2],
            Model::Embedding(_) => vec![2; 4],
        }
    }

    /// Initial joint state: system qubit, ancilla, TLSs in ground.
    fn initial(&self, rho1: &DensityMatrix, ancilla: &AncillaState) -> Result<DensityMatrix> {
        let joint = rho1.tensor(&ancilla.density()?);
        match self {
            Model::Markov(_) => Ok(joint),
            Model::Embedding(_) => Ok(joint.tensor(&qubit::ground()).tensor(&qubit::ground())),
        }
    }

    /// Conjugate by the two-qubit gate, lifted with identity on the TLSs.
    fn gated(&self, gate: &ControlledGate, joint: &DensityMatrix) -> Result<DensityMatrix> {
        match self {
            Model::Markov(_) => apply_gate(gate, joint),
            Model::Embedding(_) => {
                let u = linalg::kron(&gate.unitary(), &qubit::identity(4));
                let out = u.dot(joint.matrix()).dot(&linalg::dagger(&u));
                DensityMatrix::from_propagation(out, self.dims(), 1e-12)
            }
        }
    }

    fn scope(&self, cfg: ScopeConfig) -> DistanceScope {
        let dims = self.dims();
        match (self, cfg) {
            (Model::Markov(_), ScopeConfig::Joint | ScopeConfig::Qubits) => DistanceScope::Joint,
            (Model::Embedding(_), ScopeConfig::Joint) => DistanceScope::Joint,
            (Model::Embedding(_), ScopeConfig::Qubits) => DistanceScope::Marginal {
                dims,
                keep: vec![0, 1],
            },
            (_, ScopeConfig::System) => DistanceScope::Marginal {
                dims,
                keep: vec![0],
            },
        }
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
        .collect()
}

/// Run an experiment and return its table (the caller decides where the
/// bytes go).
pub fn run(cfg: &ExperimentConfig) -> Result<Table> {
    cfg.validate()?;
    match cfg.experiment {
        Experiment::SpectrumOverlaps => spectrum_overlaps(cfg),
        Experiment::SpeedupMap => speedup_map(cfg),
        Experiment::HaarEnsemble => haar_ensemble(cfg),
        Experiment::NmCompare => nm_compare(cfg),
        Experiment::RedfieldValidate => redfield_validate(cfg),
        Experiment::RobustnessMap => robustness_map(cfg),
        Experiment::FiniteTemperature => finite_temperature(cfg),
        Experiment::AncillaSweep => ancilla_sweep(cfg),
    }
}

/// Eigenvalues of the Markovian model plus the overlap of |+> (x) ancilla
/// with every left eigenvector, before and after the entangling gate.
fn spectrum_overlaps(cfg: &ExperimentConfig) -> Result<Table> {
    let dec = spectral_decompose(&build_liouvillian(&two_qubit_markovian(
        &cfg.markov_params(),
    )?))?;
    let ancilla = cfg.ancilla.state()?;
    let joint = qubit::plus().tensor(&ancilla.density()?);
    let gated = apply_gate(&cry_pi(), &joint)?;
    let before = crate::dynamics::mode_coefficients(&dec, &joint)?;
    let after = crate::dynamics::mode_coefficients(&dec, &gated)?;
    let rows = (0..dec.eigenvalues.len())
        .map(|k| {
            vec![
                Cell::Text(cfg.experiment.id()),
                Cell::Int(k as u64 + 1),
                Cell::Num(dec.eigenvalues[k].re),
                Cell::Num(dec.eigenvalues[k].im),
                Cell::Num(before[k].norm()),
                Cell::Num(after[k].norm()),
            ]
        })
        .collect();
    Ok(Table {
        header: vec![
            "experiment",
            "index",
            "eigenvalue_re",
            "eigenvalue_im",
            "overlap_before",
            "overlap_after",
        ],
        rows,
    })
}

/// Asymptotic speedup on a (T1, T2) grid; T2 <= 2 T1 keeps the dephasing
/// rate nonnegative.
fn speedup_map(cfg: &ExperimentConfig) -> Result<Table> {
    let n = cfg.grid_size;
    let t1s = linspace(0.25, 2.0, n);
    let t2s = linspace(0.25, 2.0, n);
    let points: Vec<(f64, f64)> = t1s
        .iter()
        .flat_map(|&t1| t2s.iter().map(move |&t2| (t1, t2)))
        .filter(|&(t1, t2)| t2 <= 2.0 * t1 + 1e-12)
        .collect();
    let rows: Vec<Result<Vec<Cell>>> = points
        .par_iter()
        .map(|&(t1, t2)| {
            let p = MarkovParams {
                omega_q: 1.0,
                gamma1: 1.0 / t1,
                gamma_phi: 1.0 / t2 - 1.0 / (2.0 * t1),
            };
            let dec = spectral_decompose(&build_liouvillian(&two_qubit_markovian(&p)?))?;
            let s = crate::liouvillian::asymptotic_speedup(&dec)?;
            Ok(vec![
                Cell::Text(cfg.experiment.id()),
                Cell::Num(t1),
                Cell::Num(t2),
                Cell::Num(s),
            ])
        })
        .collect();
    Ok(Table {
        header: vec!["experiment", "t1", "t2", "speedup"],
        rows: rows.into_iter().collect::<Result<_>>()?,
    })
}

fn ensemble_model(cfg: &ExperimentConfig) -> Result<Model> {
    if cfg.embedding.is_some() {
        let spec = embedding_model(&cfg.embedding_params(), 2)?;
        Ok(Model::Embedding(spectral_decompose(&build_liouvillian(
            &spec,
        ))?))
    } else {
        Ok(Model::Markov(spectral_decompose(&build_liouvillian(
            &two_qubit_markovian(&cfg.markov_params())?,
        ))?))
    }
}

fn haar_ensemble_rows(
    cfg: &ExperimentConfig,
    model: &Model,
    ancilla: &AncillaState,
    gate: &ControlledGate,
) -> Result<Vec<Vec<Cell>>> {
    let opts = SpeedupOptions {
        epsilon: cfg.epsilon,
        grid: cfg.grid(),
        scope: model.scope(cfg.scope),
    };
    let dec = model.decomposition();
    (0..cfg.ensemble.count)
        .into_par_iter()
        .map(|k| {
            let (rho1, theta, phi) = crate::haar::haar_state(cfg.ensemble.seed, k);
            let plain = model.initial(&rho1, ancilla)?;
            let gated = model.gated(gate, &plain)?;
            let rec = speedup_from_states(dec, &plain, &gated, &opts)?;
            Ok(vec![
                Cell::Text(cfg.experiment.id()),
                Cell::Int(cfg.ensemble.seed),
                Cell::Int(k),
                Cell::Num(theta),
                Cell::Num(phi),
                Cell::Num(rec.t_plain),
                Cell::Num(rec.t_gated),
                Cell::Num(rec.speedup),
                Cell::Num(rec.overlap_l2_before),
                Cell::Num(rec.overlap_l2_after),
            ])
        })
        .collect()
}

/// Speedup of Haar-random system states under the entangling-gate protocol.
fn haar_ensemble(cfg: &ExperimentConfig) -> Result<Table> {
    let model = ensemble_model(cfg)?;
    let ancilla = cfg.ancilla.state()?;
    let rows = haar_ensemble_rows(cfg, &model, &ancilla, &cry_pi())?;
    Ok(Table {
        header: vec![
            "experiment",
            "seed",
            "state_index",
            "theta",
            "phi",
            "t_plain",
            "t_gated",
            "speedup",
            "overlap_l2_before",
            "overlap_l2_after",
        ],
        rows,
    })
}

/// Purity and coherence of the reduced qubit state: full embedding (TLS
/// traced out) vs the time-local reduced generator vs the closed form.
fn nm_compare(cfg: &ExperimentConfig) -> Result<Table> {
    let p = cfg.embedding_params();
    let dec = spectral_decompose(&build_liouvillian(&embedding_model(&p, 1)?))?;
    let rho1 = qubit::plus();
    let joint = rho1.tensor(&qubit::ground());
    let t1 = 1.0 / p.gamma1.max(1e-12);
    let times = linspace(0.0, 5.0 * t1, cfg.time_points.min(400));

    let gen = redfield_generator(&p)?;
    let integrator_grid: Vec<f64> = times.iter().copied().filter(|&t| t > 0.0).collect();
    let red_states = crate::dynamics::propagate_time_dependent(&gen, &rho1, &integrator_grid)?;
    let delta = (p.omega_q - p.omega_t).abs();

    let mut rows = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        let emb = crate::dynamics::propagate(&dec, &joint, t)?;
        let emb_qubit = partial_trace(&emb, &[0])?;
        let red = if t == 0.0 {
            rho1.clone()
        } else {
            red_states[i - 1].clone()
        };
        let closed = analytic_redfield_state(t, &rho1, &p, delta)?;
        rows.push(vec![
            Cell::Text(cfg.experiment.id()),
            Cell::Num(t),
            Cell::Num(purity(&emb_qubit)),
            Cell::Num(l1_coherence(&emb_qubit)),
            Cell::Num(purity(&red)),
            Cell::Num(l1_coherence(&red)),
            Cell::Num(purity(&closed)),
            Cell::Num(l1_coherence(&closed)),
        ]);
    }
    Ok(Table {
        header: vec![
            "experiment",
            "t",
            "purity_embedding",
            "l1_embedding",
            "purity_redfield",
            "l1_redfield",
            "purity_closed_form",
            "l1_closed_form",
        ],
        rows,
    })
}

/// Pointwise validation of the time-local reduced generator: integrator vs
/// closed form, and formula speedup vs instantaneous spectral ratio.
fn redfield_validate(cfg: &ExperimentConfig) -> Result<Table> {
    let p = cfg.embedding_params();
    let rho1 = qubit::bloch_state(1.1, 0.4);
    let t1 = 1.0 / p.gamma1.max(1e-12);
    let times: Vec<f64> = linspace(0.0, 10.0 * t1, cfg.time_points.min(200))
        .into_iter()
        .filter(|&t| t > 0.0)
        .collect();
    let gen = redfield_generator(&p)?;
    let states = crate::dynamics::propagate_time_dependent(&gen, &rho1, &times)?;
    let delta = (p.omega_q - p.omega_t).abs();
    let mut rows = Vec::with_capacity(times.len());
    for (t, st) in times.iter().zip(&states) {
        let closed = analytic_redfield_state(*t, &rho1, &p, delta)?;
        let deviation = linalg::max_abs_diff(st.matrix(), closed.matrix());
        let s_formula = redfield_speedup(*t, &p)?;
        let inst = spectral_decompose(&gen.at(*t))?;
        let rates = inst.distinct_decay_rates(1e-9);
        let s_spectral = match (rates.get(1), rates.get(2)) {
            (Some(&r2), Some(&r3)) if r2 > 0.0 => r3 / r2,
            _ => f64::NAN,
        };
        rows.push(vec![
            Cell::Text(cfg.experiment.id()),
            Cell::Num(*t),
            Cell::Num(deviation),
            Cell::Num(s_formula),
            Cell::Num(s_spectral),
        ]);
    }
    Ok(Table {
        header: vec![
            "experiment",
            "t",
            "integrator_vs_closed_form",
            "speedup_formula",
            "speedup_spectral",
        ],
        rows,
    })
}

fn robustness_at(
    model: &Model,
    ancilla: &AncillaState,
    exact: &ControlledGate,
    perturbed: &ControlledGate,
    epsilon: f64,
    grid: &[f64],
    scope: &DistanceScope,
    n_states: u64,
    seed: u64,
) -> Result<f64> {
    let dec = model.decomposition();
    let target = crate::liouvillian::steady_state(dec)?;
    let mut acc = 0.0;
    for k in 0..n_states {
        let (rho1, _, _) = crate::haar::haar_state(seed, k);
        let joint = model.initial(&rho1, ancilla)?;
        let t_exact = reset_time_from_evaluator(
            &DistanceEvaluator::new(dec, &model.gated(exact, &joint)?, &target, scope)?,
            grid,
            epsilon,
        )?;
        let t_err = reset_time_from_evaluator(
            &DistanceEvaluator::new(dec, &model.gated(perturbed, &joint)?, &target, scope)?,
            grid,
            epsilon,
        )?;
        if t_err <= 0.0 {
            return Err(Error::VanishingDenominator("robustness"));
        }
        acc += t_exact / t_err;
    }
    Ok(acc / n_states as f64)
}

/// Robustness ratio over a grid of gate rotation errors, for the Markovian
/// model and the TLS embedding side by side.
fn robustness_map(cfg: &ExperimentConfig) -> Result<Table> {
    let markov = Model::Markov(spectral_decompose(&build_liouvillian(
        &two_qubit_markovian(&cfg.markov_params())?,
    ))?);
    let embedding = Model::Embedding(spectral_decompose(&build_liouvillian(&embedding_model(
        &cfg.embedding_params(),
        2,
    )?))?);
    let ancilla = cfg.ancilla.state()?;
    let exact = cry_pi();
    let grid = cfg.grid();
    let n = cfg.grid_size;
    let angles = linspace(0.0, std::f64::consts::TAU, n);
    let points: Vec<(f64, f64)> = angles
        .iter()
        .flat_map(|&x| angles.iter().map(move |&y| (x, y)))
        .collect();
    let rows: Vec<Result<Vec<Cell>>> = points
        .par_iter()
        .map(|&(dx, dy)| {
            let perturbed = perturbed_cry_with_order(dx, dy, cfg.error_order);
            let r_markov = robustness_at(
                &markov,
                &ancilla,
                &exact,
                &perturbed,
                cfg.epsilon,
                &grid,
                &markov.scope(cfg.scope),
                cfg.robustness_states,
                cfg.ensemble.seed,
            )?;
            let r_embedding = robustness_at(
                &embedding,
                &ancilla,
                &exact,
                &perturbed,
                cfg.epsilon,
                &grid,
                &embedding.scope(cfg.scope),
                cfg.robustness_states,
                cfg.ensemble.seed,
            )?;
            Ok(vec![
                Cell::Text(cfg.experiment.id()),
                Cell::Num(dx),
                Cell::Num(dy),
                Cell::Num(r_markov),
                Cell::Num(r_embedding),
            ])
        })
        .collect();
    Ok(Table {
        header: vec![
            "experiment",
            "dtheta_x",
            "dtheta_y",
            "r_markov",
            "r_embedding",
        ],
        rows: rows.into_iter().collect::<Result<_>>()?,
    })
}

/// Closed-form thermal speedup over an (nbar, Gamma_phi/gamma) grid, with a
/// spectral cross-check column.
fn finite_temperature(cfg: &ExperimentConfig) -> Result<Table> {
    let base = cfg.thermal_params();
    let n = cfg.grid_size;
    let nbars = linspace(0.0, 3.0, n);
    let ratios = linspace(0.0, 1.0, n);
    let points: Vec<(f64, f64)> = nbars
        .iter()
        .flat_map(|&nb| ratios.iter().map(move |&r| (nb, r)))
        .collect();
    let rows: Vec<Result<Vec<Cell>>> = points
        .par_iter()
        .map(|&(nbar, ratio)| {
            let p = ThermalParams {
                omega: base.omega,
                gamma: base.gamma,
                nbar,
                gamma_phi: ratio * base.gamma,
            };
            let s = thermal_speedup(&p)?;
            let dec = spectral_decompose(&build_liouvillian(&two_qubit_thermal(&p)?))?;
            let s_spectral = crate::liouvillian::asymptotic_speedup(&dec)?;
            Ok(vec![
                Cell::Text(cfg.experiment.id()),
                Cell::Num(nbar),
                Cell::Num(ratio),
                Cell::Num(s),
                Cell::Num(s_spectral),
            ])
        })
        .collect();
    Ok(Table {
        header: vec![
            "experiment",
            "nbar",
            "gamma_phi_over_gamma",
            "speedup",
            "speedup_spectral",
        ],
        rows: rows.into_iter().collect::<Result<_>>()?,
    })
}

/// Speedup distributions while sweeping the ancilla preparation: ground
/// population 0..1 at zero coherence, then coherence 0..0.5 at balanced
/// populations.
fn ancilla_sweep(cfg: &ExperimentConfig) -> Result<Table> {
    let model = ensemble_model(cfg)?;
    let gate = cry_pi();
    let mut rows = Vec::new();
    let mut sweep = |kind: &'static str, params: Vec<(f64, f64)>| -> Result<()> {
        for (p0, coh) in params {
            let ancilla = AncillaState::new(p0, num_complex::Complex64::new(coh, 0.0))?;
            let sub = haar_ensemble_rows(cfg, &model, &ancilla, &gate)?;
            for (k, mut row) in sub.into_iter().enumerate() {
                // Reuse the haar-ensemble row, prefixed with sweep labels.
                let speedup = row.remove(7);
                rows.push(vec![
                    Cell::Text(cfg.experiment.id()),
                    Cell::Text(kind),
                    Cell::Num(p0),
                    Cell::Num(coh),
                    Cell::Int(cfg.ensemble.seed),
                    Cell::Int(k as u64),
                    speedup,
                ]);
            }
        }
        Ok(())
    };
    sweep(
        "population",
        vec![(0.0, 0.0), (0.2, 0.0), (0.4, 0.0), (0.6, 0.0), (0.8, 0.0), (1.0, 0.0)],
    )?;
    sweep(
        "coherence",
        vec![(0.5, 0.0), (0.5, 0.1), (0.5, 0.2), (0.5, 0.3), (0.5, 0.4), (0.5, 0.5)],
    )?;
    Ok(Table {
        header: vec![
            "experiment",
            "sweep",
            "p0",
            "coherence",
            "seed",
            "state_index",
            "speedup",
        ],
        rows,
    })
}

/// One self-test of the cross-implementation validation battery.
#[derive(Debug, Clone)]
pub struct ValidationResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Oracle-equivalence battery: independent implementations of the same
/// quantity must agree to stated tolerances.
pub fn validate() -> Vec<ValidationResult> {
    let mut out = Vec::new();
    let mut push = |name: &'static str, worst: f64, tol: f64| {
        out.push(ValidationResult {
            name,
            passed: worst.is_finite() && worst <= tol,
            detail: format!("max deviation {worst:.3e} (tolerance {tol:.0e})"),
        });
    };

    // Vectorization identity: vec(A rho B^dag) = (conj(B) x A) vec(rho).
    {
        let mut worst: f64 = 0.0;
        for seed in 0..10u64 {
            let (a, b, rho) = (
                test_random_mat(4, 3 * seed + 1),
                test_random_mat(4, 3 * seed + 2),
                test_random_mat(4, 3 * seed + 3),
            );
            let lhs = crate::state::vectorize_matrix(&a.dot(&rho).dot(&linalg::dagger(&b)));
            let rhs = linalg::kron(&b.mapv(|z| z.conj()), &a)
                .dot(&crate::state::vectorize_matrix(&rho));
            let dev = lhs
                .iter()
                .zip(rhs.iter())
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max);
            worst = worst.max(dev);
        }
        push("vectorization identity", worst, 1e-12);
    }

    // Propagation backends: spectral vs exponential vs integrator.
    {
        let worst = (|| -> Result<f64> {
            let p = MarkovParams {
                omega_q: 1.0,
                gamma1: 1.0,
                gamma_phi: 1.0 / 6.0,
            };
            let spec = two_qubit_markovian(&p)?;
            let l = build_liouvillian(&spec);
            let dec = spectral_decompose(&l)?;
            let gen = crate::models::TimeDependentGenerator::new(
                Box::new({
                    let l = l.clone();
                    move |_| l.clone()
                }),
                2.0 * p.omega_q,
                p.gamma1,
                4,
            );
            let mut worst: f64 = 0.0;
            for seed in 0..3u64 {
                let rho = test_random_density(4, seed);
                let grid = [0.4, 1.3, 3.0];
                let rk = crate::dynamics::propagate_time_dependent(&gen, &rho, &grid)?;
                for (t, ri) in grid.iter().zip(&rk) {
                    let a = crate::dynamics::propagate(&dec, &rho, *t)?;
                    let b = crate::dynamics::propagate_expm(&l, &rho, *t)?;
                    worst = worst.max(linalg::max_abs_diff(a.matrix(), b.matrix()));
                    worst = worst.max(linalg::max_abs_diff(a.matrix(), ri.matrix()));
                }
            }
            Ok(worst)
        })()
        .unwrap_or(f64::INFINITY);
        push("propagation backend agreement", worst, 1e-8);
    }

    // Coherence-suppression factor: Bloch form vs direct trace.
    {
        let i = num_complex::Complex64::new(0.0, 1.0);
        let mut worst: f64 = 0.0;
        for a in 0..20 {
            let theta = std::f64::consts::PI * (a as f64 + 0.5) / 20.0;
            for b in 0..20 {
                let phi = std::f64::consts::TAU * b as f64 / 20.0;
                for g in 0..10 {
                    let r = -1.0 + 2.0 * g as f64 / 9.0;
                    let alpha = 0.21 * (a + 2 * b + 3 * g) as f64;
                    let n = [alpha.sin() * 0.6, alpha.sin() * 0.8, alpha.cos()];
                    let nsigma = qubit::sigma_x().mapv(|z| z * n[0])
                        + qubit::sigma_y().mapv(|z| z * n[1])
                        + qubit::sigma_z().mapv(|z| z * n[2]);
                    let w = (qubit::identity(2).mapv(|z| z * (theta / 2.0).cos())
                        + nsigma.mapv(|z| z * i * (theta / 2.0).sin()))
                    .mapv(|z| z * (i * phi).exp());
                    let gate = match ControlledGate::new(qubit::identity(2), w) {
                        Ok(g) => g,
                        Err(_) => {
                            worst = f64::INFINITY;
                            continue;
                        }
                    };
                    let anc = AncillaState::diagonal((1.0 + r) / 2.0).expect("valid ancilla");
                    let direct = kappa(&anc, &gate).expect("kappa");
                    let bloch = (i * phi).exp()
                        * ((theta / 2.0).cos() + i * r * (theta / 2.0).sin() * n[2]);
                    worst = worst.max((direct - bloch).norm());
                }
            }
        }
        push("coherence factor Bloch form", worst, 1e-12);
    }

    // Closed-form reduced-qubit trace distance vs propagated states.
    {
        let worst = (|| -> Result<f64> {
            let p = EmbeddingParams {
                omega_q: 1.0,
                omega_t: 2.0,
                nu_zx: 0.4,
                gamma1: 1.0,
                gamma_phi: 1.0 / 6.0,
                kappa: 0.3,
            };
            let gen = redfield_generator(&p)?;
            let rho0 = qubit::bloch_state(1.2, 0.7);
            let times: Vec<f64> = (1..=20).map(|k| 0.4 * k as f64).collect();
            let states = crate::dynamics::propagate_time_dependent(&gen, &rho0, &times)?;
            let delta = (p.omega_q - p.omega_t).abs();
            let ground = qubit::ground();
            let m = rho0.matrix();
            let mut worst: f64 = 0.0;
            for (t, st) in times.iter().zip(&states) {
                let lam = crate::models::redfield_lambda(*t, &p, delta);
                let closed = ((lam * m[[0, 1]]).norm_sqr()
                    + (-2.0 * p.gamma1 * t).exp() * m[[1, 1]].re.powi(2))
                .sqrt();
                let measured = trace_distance(st, &ground)?;
                worst = worst.max((measured - closed).abs());
            }
            Ok(worst)
        })()
        .unwrap_or(f64::INFINITY);
        push("closed-form trace distance", worst, 1e-8);
    }

    out
}

fn test_random_mat(d: usize, seed: u64) -> CMat {
    let mut s = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(17);
    let mut next = || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    ndarray::Array2::from_shape_fn((d, d), |_| num_complex::Complex64::new(next(), next()))
}

fn test_random_density(d: usize, seed: u64) -> DensityMatrix {
    let a = test_random_mat(d, seed.wrapping_add(1000));
    let m = a.dot(&linalg::dagger(&a));
    let tr = linalg::trace(&m);
    DensityMatrix::new(m.mapv(|z| z / tr), vec![d]).expect("positive definite by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_config(experiment: Experiment) -> ExperimentConfig {
        ExperimentConfig {
            experiment,
            epsilon: 1e-3,
            ensemble: EnsembleConfig { count: 8, seed: 3 },
            markov: None,
            thermal: None,
            embedding: None,
            ancilla: AncillaConfig::default(),
            scope: ScopeConfig::default(),
            grid_size: 4,
            robustness_states: 3,
            error_order: ErrorOrder::XAfterY,
            t_max: 80.0,
            time_points: 800,
            output: None,
        }
    }

    #[test]
    fn toml_roundtrip_and_defaults() {
        let cfg = ExperimentConfig::from_toml(
            r#"
experiment = "haar-ensemble"

[ensemble]
count = 10
seed = 42
"#,
        )
        .unwrap();
        assert_eq!(cfg.experiment, Experiment::HaarEnsemble);
        assert_eq!(cfg.ensemble.count, 10);
        assert_eq!(cfg.epsilon, 1e-3);
        assert_eq!(cfg.ancilla.p0, 1.0);
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(ExperimentConfig::from_toml("experiment = \"haar-ensemble\"\nepsilon = -1.0").is_err());
        assert!(ExperimentConfig::from_toml("experiment = \"no-such\"").is_err());
        assert!(ExperimentConfig::from_toml("experiment = \"haar-ensemble\"\nunknown_key = 1").is_err());
    }

    #[test]
    fn haar_ensemble_csv_header_and_determinism() {
        let cfg = base_config(Experiment::HaarEnsemble);
        let a = run(&cfg).unwrap().to_csv();
        let b = run(&cfg).unwrap().to_csv();
        assert_eq!(a, b);
        assert!(a.starts_with(
            "experiment,seed,state_index,theta,phi,t_plain,t_gated,speedup,overlap_l2_before,overlap_l2_after\n"
        ));
        assert_eq!(a.lines().count(), 9);
    }

    #[test]
    fn haar_ensemble_thread_count_invariance() {
        let cfg = base_config(Experiment::HaarEnsemble);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run(&cfg).unwrap().to_csv());
        let multi = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| run(&cfg).unwrap().to_csv());
        assert_eq!(single, multi);
    }

    #[test]
    fn speedup_map_matches_rate_ratio() {
        let mut cfg = base_config(Experiment::SpeedupMap);
        cfg.grid_size = 5;
        let table = run(&cfg).unwrap();
        for row in &table.rows {
            let (t1, t2, s) = match (&row[1], &row[2], &row[3]) {
                (Cell::Num(a), Cell::Num(b), Cell::Num(c)) => (*a, *b, *c),
                _ => panic!("unexpected cell types"),
            };
            let expect = if t2 >= t1 { t2 / t1 } else { 1.0 };
            assert!((s - expect).abs() < 1e-8, "t1={t1} t2={t2} s={s}");
        }
    }

    #[test]
    fn finite_temperature_bounds() {
        let mut cfg = base_config(Experiment::FiniteTemperature);
        cfg.grid_size = 5;
        let table = run(&cfg).unwrap();
        for row in &table.rows {
            let (s, s_spectral) = match (&row[3], &row[4]) {
                (Cell::Num(a), Cell::Num(b)) => (*a, *b),
                _ => panic!("unexpected cell"),
            };
            // The closed form is bounded by 2 and drops below 1 when pure
            // dephasing dominates; the spectral ratio saturates at 1 there
            // because the slowest mode is then a population mode.
            assert!(s > 0.0 && s <= 2.0 + 1e-12);
            assert!((s_spectral - s.max(1.0)).abs() < 1e-8, "s={s} spectral={s_spectral}");
        }
    }

    #[test]
    fn json_mirrors_csv_rows() {
        let mut cfg = base_config(Experiment::SpectrumOverlaps);
        cfg.ensemble.count = 1;
        let table = run(&cfg).unwrap();
        let json: serde_json::Value = serde_json::from_str(&table.to_json()).unwrap();
        let arr = json.as_array().unwrap();
        assert_eq!(arr.len(), table.rows.len());
        assert_eq!(arr[0]["experiment"], "spectrum-overlaps");
    }

    #[test]
    fn validation_battery_passes() {
        for v in validate() {
            assert!(v.passed, "{}: {}", v.name, v.detail);
        }
    }
}
