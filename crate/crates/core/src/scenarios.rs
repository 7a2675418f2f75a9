//! Declarative scenario runner behind the `tqd` tool.
//!
//! A [`ScenarioConfig`] is a JSON document whose fields all default to the
//! reference protocol (τ = −0.95, α = 1.1, δ′ = 60, ...). [`run`] resolves the scenario-dependent defaults
//! (window, truncation), executes the scenario and returns a [`Report`] that
//! can be written to disk as `populations.csv` / `sweep.csv` plus
//! `summary.json`.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::dynamics::{
    self, evolve_lindblad_with, evolve_mode_vector, evolve_state, Diagnostics, DissipationRates, LindbladOptions,
    SolverOptions, TimeGrid, Trajectory,
};
use crate::error::{Error, Result};
use crate::fock::{self, FockSpace, MECHANICS};
use crate::models::{self, ModeVector};
use crate::observables::{self, Occupations, TimeSeries};
use crate::pulses::{self, CouplingSchedule};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Adiabatic,
    TqdModeMatrix,
    TqdDetuned,
    BeamSplitter,
    Dissipative,
    SweepDetuning,
    SweepInterval,
    SweepThermal,
}

impl Scenario {
    pub const ALL: [Scenario; 8] = [
        Scenario::Adiabatic,
        Scenario::TqdModeMatrix,
        Scenario::TqdDetuned,
        Scenario::BeamSplitter,
        Scenario::Dissipative,
        Scenario::SweepDetuning,
        Scenario::SweepInterval,
        Scenario::SweepThermal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Adiabatic => "adiabatic",
            Scenario::TqdModeMatrix => "tqd-mode-matrix",
            Scenario::TqdDetuned => "tqd-detuned",
            Scenario::BeamSplitter => "beam-splitter",
            Scenario::Dissipative => "dissipative",
            Scenario::SweepDetuning => "sweep-detuning",
            Scenario::SweepInterval => "sweep-interval",
            Scenario::SweepThermal => "sweep-thermal",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Scenario::Adiabatic => "resonant sideband transfer with counterintuitive Gaussian pulses",
            Scenario::TqdModeMatrix => "3x3 counterdiabatic mode-matrix evolution (direct cavity-cavity coupling)",
            Scenario::TqdDetuned => "far-detuned optomechanical realization of the counterdiabatic coupling",
            Scenario::BeamSplitter => "eliminated-mechanics beam-splitter model of the detuned run",
            Scenario::Dissipative => "Lindblad evolution of the detuned run; transfer fidelity",
            Scenario::SweepDetuning => "max phonon number versus detuning",
            Scenario::SweepInterval => "stabilized transfer versus pulse-interval shift",
            Scenario::SweepThermal => "max fidelity over initial phonon number and bath occupancy",
        }
    }

    pub fn is_sweep(self) -> bool {
        matches!(self, Scenario::SweepDetuning | Scenario::SweepInterval | Scenario::SweepThermal)
    }

    fn is_dissipative(self) -> bool {
        matches!(self, Scenario::Dissipative | Scenario::SweepThermal)
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL.into_iter().find(|sc| sc.name() == s).ok_or_else(|| {
            let names: Vec<_> = Scenario::ALL.iter().map(|s| s.name()).collect();
            Error::Config(format!("unknown scenario '{s}' (expected one of: {})", names.join(", ")))
        })
    }
}

/// Initial Fock occupations `|cavity1, mech, cavity2>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Occupation {
    pub cavity1: usize,
    pub mech: usize,
    pub cavity2: usize,
}

impl Occupation {
    pub fn as_array(&self) -> [usize; 3] {
        [self.cavity1, self.mech, self.cavity2]
    }
}

/// Per-mode level counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeDims {
    pub cavity1: usize,
    pub mech: usize,
    pub cavity2: usize,
}

impl ModeDims {
    pub fn space(&self) -> Result<FockSpace> {
        FockSpace::new(&[self.cavity1, self.mech, self.cavity2])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub vector: f64,
    pub density: f64,
}

/// Mechanical cutoff control for Lindblad runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truncation {
    /// Top-level population that triggers a rerun with a larger cutoff.
    pub alarm: f64,
    /// Cutoff growth factor per rerun (rounded up).
    pub growth: f64,
    pub max_mech_dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRanges {
    pub delta_primes: Vec<f64>,
    pub delta_ts: Vec<f64>,
    pub n_b: Vec<usize>,
    pub n_th: Vec<f64>,
}

/// One simulation run or sweep.
///
/// Parse with [`ScenarioConfig::from_json`], which fills every missing field
/// from [`ScenarioConfig::default`]; unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub tau: f64,
    pub alpha: f64,
    pub delta_prime: f64,
    /// Cavity detunings of the resonant (adiabatic) scenario.
    pub cavity_detunings: [f64; 2],
    /// Moves the cavity-1 coupling earlier by this amount in the detuned
    /// scenarios (tqd-detuned, beam-splitter, dissipative).
    pub delta_t: f64,
    pub rates: DissipationRates,
    pub initial: Occupation,
    /// `null` resolves to (2, 2, 2) for closed runs and (2, 10, 2) for
    /// Lindblad runs, with three-level cavities when phonons start excited.
    pub dims: Option<ModeDims>,
    /// `null` resolves to [-2, 8]; Lindblad runs start at 0.
    pub window: Option<[f64; 2]>,
    pub tolerances: Tolerances,
    pub output_points: usize,
    pub truncation: Truncation,
    pub sweep: SweepRanges,
    /// Tail fraction of the window averaged for the stabilized population.
    pub stabilized_fraction: f64,
}

pub const DEFAULT_WINDOW: [f64; 2] = [-2.0, 8.0];
pub const DISSIPATIVE_WINDOW: [f64; 2] = [0.0, 8.0];
pub const DEFAULT_MECH_DIM: usize = 10;

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Adiabatic,
            tau: -0.95,
            alpha: 1.1,
            delta_prime: 60.0,
            cavity_detunings: [0.0, 0.0],
            delta_t: 0.0,
            rates: DissipationRates { kappa1: 0.015, kappa2: 0.015, gamma_m: 5e-4, n_th: 100.0 },
            initial: Occupation { cavity1: 1, mech: 0, cavity2: 0 },
            dims: None,
            window: None,
            tolerances: Tolerances { vector: dynamics::VECTOR_TOL, density: dynamics::DENSITY_TOL },
            output_points: dynamics::DEFAULT_POINTS,
            truncation: Truncation { alarm: 1e-6, growth: 1.5, max_mech_dim: 64 },
            sweep: SweepRanges {
                delta_primes: vec![30.0, 45.0, 60.0, 90.0, 120.0],
                delta_ts: vec![-0.46, 0.0, 0.46],
                n_b: vec![0, 1, 2, 3],
                n_th: vec![0.0, 50.0, 100.0, 200.0, 400.0],
            },
            stabilized_fraction: 0.1,
        }
    }
}

impl ScenarioConfig {
    pub fn for_scenario(scenario: Scenario) -> Self {
        Self { scenario, ..Self::default() }
    }

    /// Defaults overlaid with `doc` (recursively), then validated.
    pub fn from_json(doc: &Value) -> Result<Self> {
        if !doc.is_object() {
            return Err(Error::Config("config document must be a JSON object".into()));
        }
        let mut base = serde_json::to_value(Self::default()).expect("default config serializes");
        merge(&mut base, doc);
        let cfg: Self = serde_json::from_value(base).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed JSON: {e}")))?;
        Self::from_json(&doc)
    }

    /// Applies `key=value` overrides by dotted path. Values are parsed as JSON
    /// and fall back to plain strings.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut doc = serde_json::to_value(self).expect("config serializes");
        for item in overrides {
            set_path(&mut doc, item.as_ref())?;
        }
        Self::from_json(&doc)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !self.tau.is_finite() {
            return bad(format!("tau must be finite, got {}", self.tau));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.delta_prime > 0.0 && self.delta_prime.is_finite()) {
            return bad(format!("delta_prime must be positive, got {}", self.delta_prime));
        }
        if !(self.delta_t.is_finite() && self.cavity_detunings.iter().all(|d| d.is_finite())) {
            return bad("delta_t and cavity_detunings must be finite".into());
        }
        self.rates.validate().map_err(|e| Error::Config(format!("rates: {e}")))?;
        if let Some(d) = self.dims {
            d.space().map_err(|e| Error::Config(format!("dims: {e}")))?;
        }
        if let Some([a, b]) = self.window {
            if !(a.is_finite() && b.is_finite() && b > a) {
                return bad(format!("window must satisfy start < end, got [{a}, {b}]"));
            }
        }
        for (name, tol) in [("vector", self.tolerances.vector), ("density", self.tolerances.density)] {
            if !(tol > 0.0 && tol < 1.0) {
                return bad(format!("tolerances.{name} must lie in (0, 1), got {tol}"));
            }
        }
        if self.output_points < 2 {
            return bad(format!("output_points must be >= 2, got {}", self.output_points));
        }
        let tr = &self.truncation;
        if !(tr.alarm > 0.0 && tr.growth > 1.0 && tr.max_mech_dim >= 2) {
            return bad("truncation needs alarm > 0, growth > 1 and max_mech_dim >= 2".into());
        }
        if !(self.stabilized_fraction > 0.0 && self.stabilized_fraction <= 1.0) {
            return bad(format!("stabilized_fraction must lie in (0, 1], got {}", self.stabilized_fraction));
        }
        let s = &self.sweep;
        if s.delta_primes.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return bad("sweep.delta_primes must be positive".into());
        }
        if s.delta_ts.iter().any(|d| !d.is_finite()) || s.n_th.iter().any(|n| !(*n >= 0.0 && n.is_finite())) {
            return bad("sweep.delta_ts must be finite and sweep.n_th non-negative".into());
        }
        Ok(())
    }

    /// Fills `window` and `dims` with the scenario-dependent defaults.
    pub fn resolved(&self) -> Self {
        let mut cfg = self.clone();
        if cfg.window.is_none() {
            cfg.window = Some(if cfg.scenario.is_dissipative() { DISSIPATIVE_WINDOW } else { DEFAULT_WINDOW });
        }
        if cfg.dims.is_none() && !cfg.scenario.is_sweep() {
            cfg.dims = Some(default_dims(cfg.scenario, &cfg.initial));
        }
        cfg
    }

    /// SHA-256 of the compact JSON form of the resolved config.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(&self.resolved()).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    fn grid(&self) -> Result<TimeGrid> {
        let [a, b] = self.resolved().window.expect("resolved");
        TimeGrid::new(a, b, self.output_points)
    }

    fn space(&self) -> Result<FockSpace> {
        self.resolved().dims.expect("resolved").space()
    }

    fn vector_opts(&self) -> SolverOptions {
        SolverOptions::global(self.tolerances.vector)
    }

    fn expect(&self, allowed: &[Scenario]) -> Result<()> {
        if allowed.contains(&self.scenario) {
            Ok(())
        } else {
            Err(Error::Config(format!("scenario '{}' cannot be run by this entry point", self.scenario)))
        }
    }
}

fn default_dims(scenario: Scenario, initial: &Occupation) -> ModeDims {
    let n = initial.as_array();
    if scenario.is_dissipative() {
        // Extra phonons can be shuffled into the cavities, which a two-level
        // cavity cannot represent.
        let cavity = if n[1] > 0 { 3 } else { 2 };
        ModeDims { cavity1: cavity.max(n[0] + 1), mech: DEFAULT_MECH_DIM.max(n[1] + 2), cavity2: cavity.max(n[2] + 1) }
    } else {
        ModeDims { cavity1: 2.max(n[0] + 1), mech: 2.max(n[1] + 1), cavity2: 2.max(n[2] + 1) }
    }
}

fn merge(base: &mut Value, overlay: &Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}

fn set_path(doc: &mut Value, item: &str) -> Result<()> {
    let (path, raw) =
        item.split_once('=').ok_or_else(|| Error::Config(format!("override '{item}' is not of the form key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        if key.is_empty() {
            return Err(Error::Config(format!("empty key in override path '{path}'")));
        }
        if !node.is_object() {
            *node = Value::Object(Map::new());
        }
        let obj = node.as_object_mut().unwrap();
        if i + 1 == keys.len() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        node = obj.entry(key.to_string()).or_insert(Value::Null);
    }
    unreachable!()
}

/// Series and diagnostics of one closed or open run.
#[derive(Clone, Debug, PartialEq)]
pub struct Run {
    pub times: Vec<f64>,
    /// `(cavity 1, mechanics, cavity 2)` occupations.
    pub populations: [TimeSeries; 3],
    pub fidelity: Option<TimeSeries>,
    pub dark_overlap: Option<TimeSeries>,
    pub diagnostics: Diagnostics,
    /// Mechanical cutoffs tried before the run was accepted (Lindblad only).
    pub escalations: Vec<usize>,
    pub space: Option<FockSpace>,
}

impl Run {
    pub fn final_population(&self, mode: usize) -> f64 {
        self.populations[mode].last()
    }

    pub fn max_phonon(&self) -> f64 {
        self.populations[MECHANICS].values.iter().copied().fold(0.0, f64::max)
    }

    pub fn stabilized_population(&self, fraction: f64) -> f64 {
        self.populations[fock::CAVITY2].tail_mean(fraction)
    }

    /// `(time, value)` of the maximal transfer fidelity.
    pub fn max_fidelity(&self) -> Option<(f64, f64)> {
        self.fidelity.as_ref().map(|f| f.max())
    }

    fn results(&self, cfg: &ScenarioConfig) -> Map<String, Value> {
        let mut r = Map::new();
        r.insert("final_pop_cavity1".into(), json!(self.final_population(0)));
        r.insert("final_pop_mech".into(), json!(self.final_population(1)));
        r.insert("final_pop_cavity2".into(), json!(self.final_population(2)));
        r.insert("max_phonon".into(), json!(self.max_phonon()));
        r.insert("stabilized_pop_cavity2".into(), json!(self.stabilized_population(cfg.stabilized_fraction)));
        if let Some(d) = &self.dark_overlap {
            r.insert("min_dark_overlap".into(), json!(d.min()));
        }
        if let Some((t, f)) = self.max_fidelity() {
            r.insert("max_fidelity".into(), json!(f));
            r.insert("t_max_fidelity".into(), json!(t));
            r.insert("final_fidelity".into(), json!(self.fidelity.as_ref().unwrap().last()));
        }
        r
    }
}

fn state_run(traj: &Trajectory<fock::StateVector>, space: FockSpace, dark: Option<&CouplingSchedule>) -> Result<Run> {
    let populations = observables::populations(traj, &space)?;
    let dark_overlap = match dark {
        Some(s) => {
            let idx = models::single_excitation_indices(&space)?;
            let modes = Trajectory {
                times: traj.times.clone(),
                states: traj.states.iter().map(|psi| ModeVector::new(psi[idx[0]], psi[idx[1]], psi[idx[2]])).collect(),
                diagnostics: Diagnostics::default(),
            };
            Some(observables::dark_mode_overlap(&modes, s)?)
        }
        None => None,
    };
    Ok(Run {
        times: traj.times.clone(),
        populations,
        fidelity: None,
        dark_overlap,
        diagnostics: traj.diagnostics.clone(),
        escalations: Vec::new(),
        space: Some(space),
    })
}

fn single_excitation(initial: &Occupation) -> Option<usize> {
    match initial.as_array() {
        [1, 0, 0] => Some(0),
        [0, 1, 0] => Some(1),
        [0, 0, 1] => Some(2),
        _ => None,
    }
}

/// Couplings of the far-detuned runs: `G1 = G2 = sqrt(d' G')` with `G1`
/// moved earlier by `delta_t`.
pub fn detuned_couplings(cfg: &ScenarioConfig) -> Result<CouplingSchedule> {
    let gp = pulses::fitted_coupling(cfg.tau, cfg.alpha)?;
    let s = pulses::physical_couplings(cfg.delta_prime, &gp)?;
    Ok(CouplingSchedule::new(s.first.shifted(-cfg.delta_t), s.second))
}

pub fn run_adiabatic(cfg: &ScenarioConfig) -> Result<Run> {
    cfg.expect(&[Scenario::Adiabatic])?;
    let grid = cfg.grid()?;
    let space = cfg.space()?;
    let s = pulses::adiabatic_pulses(cfg.tau).checked_on(grid.start, grid.end, grid.points)?;
    let h = models::rwa_generator(&space, &s, cfg.cavity_detunings)?;
    let psi0 = fock::basis_state(&space, cfg.initial.as_array())?;
    let traj = evolve_state(&h, &psi0, &grid, &cfg.vector_opts())?;
    let dark = single_excitation(&cfg.initial).map(|_| &s);
    state_run(&traj, space, dark)
}

/// Counterdiabatic coupling alone, integrated as a 3x3 mode vector.
pub fn run_tqd_mode_matrix(cfg: &ScenarioConfig) -> Result<Run> {
    cfg.expect(&[Scenario::TqdModeMatrix])?;
    let grid = cfg.grid()?;
    let k = single_excitation(&cfg.initial)
        .ok_or_else(|| Error::Config("tqd-mode-matrix needs a single-excitation initial state".into()))?;
    let s = pulses::adiabatic_pulses(cfg.tau).checked_on(grid.start, grid.end, grid.points)?;
    let mut v0 = ModeVector::zeros();
    v0[k] = C64::new(1.0, 0.0);
    let traj = evolve_mode_vector(|t| models::mode_matrix_tqd(&s, t), v0, &grid, &cfg.vector_opts())?;
    Ok(Run {
        times: traj.times.clone(),
        populations: observables::mode_populations(&traj, 1.0),
        fidelity: None,
        dark_overlap: Some(observables::dark_mode_overlap(&traj, &s)?),
        diagnostics: traj.diagnostics.clone(),
        escalations: Vec::new(),
        space: None,
    })
}

pub fn run_tqd_detuned(cfg: &ScenarioConfig) -> Result<Run> {
    cfg.expect(&[Scenario::TqdDetuned])?;
    let grid = cfg.grid()?;
    let space = cfg.space()?;
    let s = detuned_couplings(cfg)?;
    let h = models::detuned_generator(&space, &s, cfg.delta_prime)?;
    let psi0 = fock::basis_state(&space, cfg.initial.as_array())?;
    state_run(&evolve_state(&h, &psi0, &grid, &cfg.vector_opts())?, space, None)
}

pub fn run_beam_splitter(cfg: &ScenarioConfig) -> Result<Run> {
    cfg.expect(&[Scenario::BeamSplitter])?;
    let grid = cfg.grid()?;
    let space = cfg.space()?;
    let s = detuned_couplings(cfg)?;
    let h = models::beam_splitter_generator(&space, &s, cfg.delta_prime, false)?;
    let psi0 = fock::basis_state(&space, cfg.initial.as_array())?;
    state_run(&evolve_state(&h, &psi0, &grid, &cfg.vector_opts())?, space, None)
}

/// Lindblad evolution of `|n1, n_b, n2>` under the detuned Hamiltonian. The
/// mechanical cutoff grows by `truncation.growth` whenever the top level
/// crosses `truncation.alarm`, up to `truncation.max_mech_dim`.
pub fn run_dissipative(cfg: &ScenarioConfig) -> Result<Run> {
    cfg.expect(&[Scenario::Dissipative])?;
    let grid = cfg.grid()?;
    let mut space = cfg.space()?;
    let s = detuned_couplings(cfg)?;
    let opts = LindbladOptions {
        solver: SolverOptions::with_tol(cfg.tolerances.density),
        truncation_threshold: Some(cfg.truncation.alarm),
        ..Default::default()
    };
    let mut escalations = Vec::new();
    loop {
        escalations.push(space.dims()[MECHANICS]);
        match lindblad_once(cfg, &space, &s, &grid, &opts) {
            Err(Error::TruncationAlarm { cutoff, .. }) if cutoff < cfg.truncation.max_mech_dim => {
                let next = ((cutoff as f64 * cfg.truncation.growth).ceil() as usize)
                    .max(cutoff + 1)
                    .min(cfg.truncation.max_mech_dim);
                space = space.with_mechanics_dim(next)?;
            }
            Err(e) => return Err(e),
            Ok(mut run) => {
                run.escalations = escalations;
                return Ok(run);
            }
        }
    }
}

fn lindblad_once(
    cfg: &ScenarioConfig,
    space: &FockSpace,
    s: &CouplingSchedule,
    grid: &TimeGrid,
    opts: &LindbladOptions,
) -> Result<Run> {
    let h = models::detuned_generator(space, s, cfg.delta_prime)?;
    let rho0 = fock::pure_density(&fock::basis_state(space, cfg.initial.as_array())?);
    let mut cols = [Vec::new(), Vec::new(), Vec::new()];
    let mut fid = Vec::with_capacity(grid.points);
    let mut times = Vec::with_capacity(grid.points);
    let diagnostics = evolve_lindblad_with(space, &h, &rho0, &cfg.rates, grid, opts, |t, rho| {
        let occ = rho.mode_occupations(space)?;
        for m in 0..3 {
            cols[m].push(occ[m]);
        }
        fid.push(observables::transfer_fidelity(&rho.to_owned(), space)?);
        times.push(t);
        Ok(())
    })?;
    let [c1, mech, c2] = cols;
    Ok(Run {
        populations: [
            TimeSeries::new(times.clone(), c1),
            TimeSeries::new(times.clone(), mech),
            TimeSeries::new(times.clone(), c2),
        ],
        fidelity: Some(TimeSeries::new(times.clone(), fid)),
        dark_overlap: None,
        diagnostics,
        escalations: Vec::new(),
        space: Some(*space),
        times,
    })
}

/// Runs any non-sweep scenario.
pub fn run_single(cfg: &ScenarioConfig) -> Result<Run> {
    match cfg.scenario {
        Scenario::Adiabatic => run_adiabatic(cfg),
        Scenario::TqdModeMatrix => run_tqd_mode_matrix(cfg),
        Scenario::TqdDetuned => run_tqd_detuned(cfg),
        Scenario::BeamSplitter => run_beam_splitter(cfg),
        Scenario::Dissipative => run_dissipative(cfg),
        sweep => Err(Error::Config(format!("'{sweep}' is a sweep; use run_sweep"))),
    }
}

/// Rows of `(swept values..., results...)`, sorted by the swept values.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepTable {
    pub scenario: Scenario,
    pub config_hash: String,
    pub columns: Vec<String>,
    /// Number of leading columns that hold swept values.
    pub swept: usize,
    pub rows: Vec<Vec<f64>>,
    /// Per-row diagnostics in row order.
    pub diagnostics: Vec<PointDiagnostics>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointDiagnostics {
    pub solver: Diagnostics,
    pub escalations: Vec<usize>,
}

impl SweepTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| format_g(v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// One sweep point as a standalone configuration.
#[derive(Clone, Debug, PartialEq)]
pub enum SweepPoint {
    Detuning(f64),
    Interval(f64),
    Thermal { n_b: usize, n_th: f64 },
}

impl SweepPoint {
    fn values(&self) -> Vec<f64> {
        match *self {
            SweepPoint::Detuning(d) | SweepPoint::Interval(d) => vec![d],
            SweepPoint::Thermal { n_b, n_th } => vec![n_b as f64, n_th],
        }
    }
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// The sweep's points in table order.
pub fn sweep_points(cfg: &ScenarioConfig) -> Result<Vec<SweepPoint>> {
    let s = &cfg.sweep;
    let pts: Vec<SweepPoint> = match cfg.scenario {
        Scenario::SweepDetuning => sorted(&s.delta_primes).into_iter().map(SweepPoint::Detuning).collect(),
        Scenario::SweepInterval => sorted(&s.delta_ts).into_iter().map(SweepPoint::Interval).collect(),
        Scenario::SweepThermal => {
            let mut nb = s.n_b.clone();
            nb.sort_unstable();
            nb.dedup();
            let nth = sorted(&s.n_th);
            nb.iter().flat_map(|&n_b| nth.iter().map(move |&n_th| SweepPoint::Thermal { n_b, n_th })).collect()
        }
        other => return Err(Error::Config(format!("'{other}' is not a sweep"))),
    };
    if pts.is_empty() {
        return Err(Error::Config(format!("sweep '{}' has no points", cfg.scenario)));
    }
    Ok(pts)
}

/// Standalone configuration of one sweep point; running it with
/// [`run_single`] reproduces the corresponding table row exactly.
pub fn point_config(cfg: &ScenarioConfig, point: &SweepPoint) -> ScenarioConfig {
    let mut c = cfg.clone();
    match *point {
        SweepPoint::Detuning(d) => {
            c.scenario = Scenario::TqdDetuned;
            c.delta_prime = d;
        }
        SweepPoint::Interval(dt) => {
            c.scenario = Scenario::TqdDetuned;
            c.delta_t = dt;
        }
        SweepPoint::Thermal { n_b, n_th } => {
            c.scenario = Scenario::Dissipative;
            c.initial.mech = n_b;
            c.rates.n_th = n_th;
        }
    }
    if c.window.is_none() {
        c.window = cfg.resolved().window;
    }
    c.resolved()
}

pub fn run_sweep(cfg: &ScenarioConfig) -> Result<SweepTable> {
    let points = sweep_points(cfg)?;
    let runs = points.par_iter().map(|p| run_single(&point_config(cfg, p))).collect::<Result<Vec<Run>>>()?;
    let (columns, swept): (Vec<&str>, usize) = match cfg.scenario {
        Scenario::SweepDetuning => (vec!["delta_prime", "max_phonon", "g_max", "scaled_phonon"], 1),
        Scenario::SweepInterval => (vec!["delta_t", "stabilized_pop_cavity2", "final_pop_cavity2"], 1),
        _ => (vec!["n_b", "n_th", "max_fidelity", "t_max_fidelity", "mech_dim"], 2),
    };
    let rows = points
        .iter()
        .zip(&runs)
        .map(|(p, r)| {
            let mut row = p.values();
            match cfg.scenario {
                Scenario::SweepDetuning => {
                    let pc = point_config(cfg, p);
                    let g_max = detuned_couplings(&pc).map(|s| s.first.amplitude).unwrap_or(f64::NAN);
                    let n = r.max_phonon();
                    row.extend([n, g_max, n * (pc.delta_prime / g_max).powi(2)]);
                }
                Scenario::SweepInterval => {
                    row.extend([r.stabilized_population(cfg.stabilized_fraction), r.final_population(2)]);
                }
                _ => {
                    let (t, f) = r.max_fidelity().expect("dissipative run has fidelity");
                    let dim = r.space.map_or(0, |s| s.dims()[MECHANICS]);
                    row.extend([f, t, dim as f64]);
                }
            }
            row
        })
        .collect();
    Ok(SweepTable {
        scenario: cfg.scenario,
        config_hash: cfg.hash(),
        columns: columns.into_iter().map(String::from).collect(),
        swept,
        rows,
        diagnostics: runs
            .iter()
            .map(|r| PointDiagnostics { solver: r.diagnostics.clone(), escalations: r.escalations.clone() })
            .collect(),
    })
}

/// Everything a CLI run writes.
#[derive(Clone, Debug)]
pub struct Report {
    pub config: ScenarioConfig,
    pub run: Option<Run>,
    pub sweep: Option<SweepTable>,
}

pub fn run(cfg: &ScenarioConfig) -> Result<Report> {
    cfg.validate()?;
    let config = cfg.resolved();
    if config.scenario.is_sweep() {
        let sweep = run_sweep(&config)?;
        Ok(Report { config, run: None, sweep: Some(sweep) })
    } else {
        let run = run_single(&config)?;
        Ok(Report { config, run: Some(run), sweep: None })
    }
}

impl Report {
    pub fn populations_csv(&self) -> Option<String> {
        let run = self.run.as_ref()?;
        let mut out = String::from("t,pop_cavity1,pop_mech,pop_cavity2");
        if run.fidelity.is_some() {
            out.push_str(",fidelity");
        }
        out.push('\n');
        for (k, &t) in run.times.iter().enumerate() {
            let mut cells = vec![format_g(t)];
            cells.extend(run.populations.iter().map(|p| format_g(p.values[k])));
            if let Some(f) = &run.fidelity {
                cells.push(format_g(f.values[k]));
            }
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        Some(out)
    }

    pub fn summary(&self) -> Value {
        let mut doc = Map::new();
        doc.insert("scenario".into(), json!(self.config.scenario));
        doc.insert("config".into(), serde_json::to_value(&self.config).expect("config serializes"));
        doc.insert("config_hash".into(), json!(self.config.hash()));
        if let Some(run) = &self.run {
            doc.insert("results".into(), Value::Object(run.results(&self.config)));
            let mut diag = serde_json::to_value(&run.diagnostics).expect("diagnostics serialize");
            if let (Some(obj), Some(space)) = (diag.as_object_mut(), run.space) {
                obj.insert("dims".into(), json!(space.dims()));
                if !run.escalations.is_empty() {
                    obj.insert("mech_dims_tried".into(), json!(run.escalations));
                }
            }
            doc.insert("diagnostics".into(), diag);
        }
        if let Some(sweep) = &self.sweep {
            let rows: Vec<Value> = sweep
                .rows
                .iter()
                .map(|r| Value::Object(sweep.columns.iter().cloned().zip(r.iter().map(|v| json!(v))).collect()))
                .collect();
            doc.insert("results".into(), json!({ "columns": sweep.columns, "rows": rows }));
            doc.insert("diagnostics".into(), json!(sweep.diagnostics));
        }
        Value::Object(doc)
    }

    /// Writes `populations.csv` or `sweep.csv`, and `summary.json`, into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| Error::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        if let Some(csv) = self.populations_csv() {
            let p = dir.join("populations.csv");
            std::fs::write(&p, csv).map_err(io(&p))?;
        }
        if let Some(sweep) = &self.sweep {
            let p = dir.join("sweep.csv");
            std::fs::write(&p, sweep.to_csv()).map_err(io(&p))?;
        }
        let p = dir.join("summary.json");
        let mut text = serde_json::to_string_pretty(&self.summary()).expect("summary serializes");
        text.push('\n');
        std::fs::write(&p, text).map_err(io(&p))?;
        Ok(())
    }
}

/// `%.12g`-style formatting: 12 significant digits, trailing zeros removed.
pub fn format_g(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if !(-4..DIGITS).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{:.*}", (DIGITS - 1 - exp) as usize, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
