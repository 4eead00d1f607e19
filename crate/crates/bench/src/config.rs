//! Run configuration: TOML sections layered over preset defaults.
//!
//! A config file may hold any subset of the experiment sections plus the
//! top-level keys `experiment`, `preset` and `seed`. Only the section of the
//! selected experiment is resolved; every key it omits takes the preset's
//! default. Unknown keys are rejected.

use std::f64::consts::PI;

use anyhow::{anyhow, bail, ensure, Context, Result};
use ito_core::krotov::ShapeFunction;
use ito_core::models::{DrivenHoModel, QuditModel};
use ito_core::propagators::{ExpBackend, ItoConfig, Method, MAX_ORDER};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Reduced grids and target counts; minutes on a workstation.
    Desk,
    /// Resolutions of the original figures; slow.
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::Subcommand)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// Driven-oscillator accuracy and cost sweep over n_t and M
    ItoBench,
    /// PWC step-count sweep against one ITO reference run (qudit)
    Compare,
    /// Qudit population dynamics in several frames, with mismatches
    Dynamics,
    /// Final populations and entanglement over the (p, q) drive plane
    PopMap,
    /// Gate invariants and concurrence over the (p, q) drive plane
    GateMap,
    /// Krotov optimization log and final field
    Optimize,
    /// Random-gate optimization success over (T, β)
    QslMap,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::ItoBench,
        Experiment::Compare,
        Experiment::Dynamics,
        Experiment::PopMap,
        Experiment::GateMap,
        Experiment::Optimize,
        Experiment::QslMap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::ItoBench => "ito-bench",
            Experiment::Compare => "compare",
            Experiment::Dynamics => "dynamics",
            Experiment::PopMap => "pop-map",
            Experiment::GateMap => "gate-map",
            Experiment::Optimize => "optimize",
            Experiment::QslMap => "qsl-map",
        }
    }

    /// Name of the config section.
    pub fn section(self) -> &'static str {
        match self {
            Experiment::ItoBench => "ito_bench",
            Experiment::Compare => "compare",
            Experiment::Dynamics => "dynamics",
            Experiment::PopMap => "pop_map",
            Experiment::GateMap => "gate_map",
            Experiment::Optimize => "optimize",
            Experiment::QslMap => "qsl_map",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }
}

/// `H = p²/2m + mω²x²/2 + E₀ sin²(πt/T) cos(ω_L t) x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoParams {
    pub mass: f64,
    pub omega: f64,
    pub e0: f64,
    pub omega_l: f64,
    pub horizon: f64,
    pub n_trunc: usize,
}

impl HoParams {
    fn standard() -> Self {
        let m = DrivenHoModel::standard();
        Self {
            mass: m.mass,
            omega: m.omega,
            e0: m.e0,
            omega_l: m.omega_l,
            horizon: m.horizon,
            n_trunc: m.n_trunc,
        }
    }

    pub fn model(&self) -> DrivenHoModel {
        DrivenHoModel {
            mass: self.mass,
            omega: self.omega,
            e0: self.e0,
            omega_l: self.omega_l,
            horizon: self.horizon,
            n_trunc: self.n_trunc,
        }
    }

    fn validate(&self) -> Result<()> {
        ensure!(self.mass > 0.0 && self.omega > 0.0, "model: mass and omega must be positive");
        ensure!(self.horizon > 0.0, "model: horizon must be positive");
        ensure!(self.n_trunc >= 2, "model: n_trunc must be at least 2");
        Ok(())
    }
}

/// Qudit parameters in laboratory units: frequencies `f = ω/2π` in GHz,
/// times in ns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuditParams {
    pub n_levels: usize,
    pub omega0_ghz: f64,
    pub beta_ghz: f64,
    pub rabi_ghz: f64,
    pub t1_ns: f64,
    pub t2_star_ns: f64,
    pub p: f64,
    pub q: f64,
}

impl QuditParams {
    pub fn default_device() -> Self {
        Self {
            n_levels: 10,
            omega0_ghz: 6.73,
            beta_ghz: 0.12,
            rabi_ghz: 0.0476,
            t1_ns: 230.0,
            t2_star_ns: 120.0,
            p: 0.86,
            q: 0.86,
        }
    }

    fn with_pq(self, p: f64, q: f64) -> Self {
        Self { p, q, ..self }
    }

    pub fn model(&self) -> QuditModel {
        QuditModel {
            n_levels: self.n_levels,
            omega0: 2.0 * PI * self.omega0_ghz,
            beta: 2.0 * PI * self.beta_ghz,
            t1: self.t1_ns,
            t2_star: self.t2_star_ns,
            omega_rabi: 2.0 * PI * self.rabi_ghz,
            p: self.p,
            q: self.q,
        }
    }

    fn validate(&self, need_gate_levels: bool) -> Result<()> {
        ensure!(self.n_levels >= 2, "model: n_levels must be at least 2");
        ensure!(
            !need_gate_levels || self.n_levels >= 4,
            "model: gate analysis needs at least four levels"
        );
        ensure!(self.t1_ns > 0.0 && self.t2_star_ns > 0.0, "model: T1 and T2* must be positive");
        self.model().validate().map_err(|e| anyhow!("model: {e}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Ito,
    Pwc,
}

impl MethodKind {
    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Ito => "ito",
            MethodKind::Pwc => "pwc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagatorParams {
    pub method: MethodKind,
    pub n_t: usize,
    /// ITO interpolation order (ignored by PWC).
    pub m: usize,
    /// ITO self-consistency tolerance.
    pub tol: f64,
}

impl PropagatorParams {
    fn ito(n_t: usize, m: usize) -> Self {
        Self {
            method: MethodKind::Ito,
            n_t,
            m,
            tol: 1e-12,
        }
    }

    fn pwc(n_t: usize) -> Self {
        Self {
            method: MethodKind::Pwc,
            n_t,
            m: 8,
            tol: 1e-12,
        }
    }

    pub fn method(&self) -> Method {
        match self.method {
            MethodKind::Ito => Method::Ito(ItoConfig::new(self.m, 1.0).with_tol(self.tol)),
            MethodKind::Pwc => Method::Pwc(ExpBackend::Polynomial),
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        ensure!(self.n_t >= 1, "{what}: n_t must be at least 1");
        if self.method == MethodKind::Ito {
            check_order(self.m, what)?;
            ensure!(self.tol > 0.0, "{what}: tol must be positive");
        }
        Ok(())
    }
}

fn check_order(m: usize, what: &str) -> Result<()> {
    ensure!((2..=MAX_ORDER).contains(&m), "{what}: M = {m} not in [2, {MAX_ORDER}]");
    Ok(())
}

fn check_nonempty<T>(v: &[T], what: &str) -> Result<()> {
    ensure!(!v.is_empty(), "{what} must not be empty");
    Ok(())
}

fn check_distinct<T: PartialEq>(v: &[T], what: &str) -> Result<()> {
    let repeated = v.iter().enumerate().any(|(i, a)| v[..i].contains(a));
    ensure!(!repeated, "{what} must not repeat an entry");
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItoBenchConfig {
    pub model: HoParams,
    /// ITO self-consistency tolerance.
    pub tol: f64,
    /// ITO cells: every pair from `n_t × m`.
    pub n_t: Vec<usize>,
    pub m: Vec<usize>,
    /// PWC cells.
    pub pwc_n_t: Vec<usize>,
    /// Upper bound on the number of sampled times entering the global error.
    pub max_samples: usize,
}

impl ItoBenchConfig {
    fn defaults(preset: Preset) -> Self {
        let n_t = vec![500, 700, 900, 1200, 1500, 1900, 2100, 2500, 3000];
        match preset {
            Preset::Desk => Self {
                model: HoParams::standard(),
                tol: 1e-12,
                n_t,
                m: vec![8],
                pwc_n_t: vec![],
                max_samples: 1000,
            },
            Preset::Paper => Self {
                model: HoParams::standard(),
                tol: 1e-12,
                n_t,
                m: (3..=12).collect(),
                pwc_n_t: vec![1_000, 10_000, 100_000, 1_000_000, 10_000_000],
                max_samples: 1000,
            },
        }
    }

    fn validate(&self) -> Result<()> {
        self.model.validate()?;
        ensure!(self.tol > 0.0, "tol must be positive");
        ensure!(
            !self.pwc_n_t.is_empty() || !(self.n_t.is_empty() || self.m.is_empty()),
            "the sweep has no cells"
        );
        for &m in &self.m {
            check_order(m, "m")?;
        }
        ensure!(self.n_t.iter().chain(&self.pwc_n_t).all(|&n| n >= 1), "n_t values must be positive");
        ensure!(self.max_samples >= 1, "max_samples must be positive");
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub model: QuditParams,
    pub t_final: f64,
    /// Liouville-space dynamics with the relaxation and dephasing channels.
    pub dissipative: bool,
    pub reference: PropagatorParams,
    pub pwc_n_t: Vec<usize>,
    /// Populations are compared at this many equally spaced times (plus
    /// `t = 0`); every step count must be a multiple of it.
    pub samples: usize,
}

impl CompareConfig {
    fn defaults(preset: Preset) -> Self {
        match preset {
            Preset::Desk => Self {
                model: QuditParams::default_device(),
                t_final: 150.0,
                dissipative: true,
                reference: PropagatorParams::ito(10_000, 10),
                pwc_n_t: vec![10_000, 20_000, 50_000, 100_000],
                samples: 200,
            },
            Preset::Paper => Self {
                model: QuditParams::default_device(),
                t_final: 150.0,
                dissipative: true,
                reference: PropagatorParams::ito(50_000, 12),
                pwc_n_t: vec![10_000, 20_000, 50_000, 100_000, 200_000, 500_000, 1_000_000],
                samples: 1000,
            },
        }
    }

    fn validate(&self) -> Result<()> {
        self.model.validate(false)?;
        ensure!(self.t_final > 0.0, "t_final must be positive");
        self.reference.validate("reference")?;
        check_nonempty(&self.pwc_n_t, "pwc_n_t")?;
        ensure!(self.samples >= 1, "samples must be positive");
        for &n in self.pwc_n_t.iter().chain([&self.reference.n_t]) {
            ensure!(
                n >= self.samples && n.is_multiple_of(self.samples),
                "n_t = {n} is not a multiple of samples = {}",
                self.samples
            );
        }
        Ok(())
    }
}

/// Form of the qudit dynamics. All forms share the lab-frame populations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// Lab frame, `H₀ + ε(t)H₁`.
    Lab,
    /// Interaction picture with all rotating and counter-rotating terms.
    Interaction,
    /// Interaction picture, counter-rotating terms dropped.
    Rwa,
    /// Static resonant part only (infinite anharmonicity).
    Ideal,
}

impl Frame {
    pub fn name(self) -> &'static str {
        match self {
            Frame::Lab => "lab",
            Frame::Interaction => "interaction",
            Frame::Rwa => "rwa",
            Frame::Ideal => "ideal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    pub model: QuditParams,
    pub t_final: f64,
    /// Lab frame only.
    pub dissipative: bool,
    /// Mismatches are reported against the first form.
    pub forms: Vec<Frame>,
    pub propagator: PropagatorParams,
    pub samples: usize,
}

impl DynamicsConfig {
    fn defaults(preset: Preset) -> Self {
        let propagator = match preset {
            Preset::Desk => PropagatorParams::ito(10_000, 10),
            Preset::Paper => PropagatorParams::ito(50_000, 12),
        };
        Self {
            model: QuditParams::default_device(),
            t_final: 150.0,
            dissipative: false,
            forms: vec![Frame::Lab, Frame::Rwa],
            propagator,
            samples: 1000,
        }
    }

    fn validate(&self) -> Result<()> {
        self.model.validate(false)?;
        ensure!(self.t_final > 0.0, "t_final must be positive");
        check_nonempty(&self.forms, "forms")?;
        check_distinct(&self.forms, "forms")?;
        ensure!(
            !self.dissipative || self.forms.iter().all(|&f| f == Frame::Lab),
            "dissipative dynamics is available in the lab frame only"
        );
        self.propagator.validate("propagator")?;
        let n = self.propagator.n_t;
        ensure!(
            self.samples >= 1 && n >= self.samples && n.is_multiple_of(self.samples),
            "n_t = {n} is not a multiple of samples = {}",
            self.samples
        );
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Static resonant Hamiltonian in the rotating frame.
    Ideal,
    /// Lab-frame drive on the full ladder.
    Full,
    /// As `Full`, with relaxation and dephasing.
    FullDissipative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    /// Drive parameters `p`, `q` come from the axes below.
    pub model: QuditParams,
    pub t_final: f64,
    pub variant: Variant,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// Used by the `full` variants.
    pub propagator: PropagatorParams,
}

impl MapConfig {
    fn defaults(preset: Preset) -> Self {
        // k/10 is the double nearest to the decimal literal
        let axis = match preset {
            Preset::Desk => (1..=11).map(|k| (2 * k) as f64 / 10.0).collect::<Vec<_>>(),
            Preset::Paper => (1..=40).map(|k| k as f64 / 10.0).collect(),
        };
        Self {
            model: QuditParams::default_device(),
            t_final: 60.0,
            variant: Variant::Full,
            p: axis.clone(),
            q: axis,
            propagator: PropagatorParams::pwc(60_000),
        }
    }

    fn validate(&self, gate: bool) -> Result<()> {
        self.model.validate(true)?;
        ensure!(self.t_final > 0.0, "t_final must be positive");
        check_nonempty(&self.p, "p")?;
        check_nonempty(&self.q, "q")?;
        ensure!(
            self.p.iter().chain(&self.q).all(|v| v.is_finite()),
            "p and q must be finite"
        );
        ensure!(
            !(gate && self.variant == Variant::FullDissipative),
            "gate maps need unitary dynamics; use the ideal or full variant"
        );
        self.propagator.validate("propagator")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    /// Frequency-controlled oscillator: ground state to the ground state of
    /// a softer oscillator.
    HoFreq,
    /// Qudit population transfer `|0⟩ → |2⟩`.
    QuditState,
    /// CNOT on the lowest four levels (rotating frame).
    QuditCnot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Constant,
    SinSquared,
    FlatTop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoFreqParams {
    pub n_trunc: usize,
    /// Frequency whose ground state is the target.
    pub target_omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    pub problem: Problem,
    pub methods: Vec<MethodKind>,
    pub lambda_a: f64,
    pub max_iter: usize,
    pub stop_tol: f64,
    pub t_final: f64,
    pub n_t: usize,
    /// ITO interpolation order.
    pub m: usize,
    pub shape: ShapeKind,
    /// Ramp fraction of the flat-top shape.
    pub rise: f64,
    /// Order of an extra ITO propagation of each iterate that reports the
    /// continuous-field `J_T`; 0 disables it.
    pub reference_m: usize,
    /// `ho_freq` only.
    pub ho: HoFreqParams,
    /// Qudit problems only; the guess is the Pythagorean field of `p`, `q`.
    pub qudit: QuditParams,
}

impl OptimizeConfig {
    fn defaults(preset: Preset, problem: Problem) -> Self {
        let base = Self {
            problem,
            methods: vec![MethodKind::Pwc, MethodKind::Ito],
            lambda_a: 5.0,
            max_iter: 10,
            stop_tol: 0.0,
            t_final: 150.0,
            n_t: 150_000,
            m: 6,
            shape: ShapeKind::SinSquared,
            rise: 0.1,
            reference_m: 0,
            ho: HoFreqParams {
                n_trunc: 40,
                target_omega: 0.5,
            },
            qudit: QuditParams::default_device().with_pq(0.5, 0.5),
        };
        let paper = preset == Preset::Paper;
        match problem {
            Problem::HoFreq => Self {
                lambda_a: 0.2,
                max_iter: if paper { 200 } else { 100 },
                t_final: 2.0,
                n_t: 200,
                m: 5,
                ..base
            },
            Problem::QuditState => Self {
                max_iter: if paper { 50 } else { 10 },
                ..base
            },
            Problem::QuditCnot => Self {
                max_iter: if paper { 100 } else { 10 },
                n_t: 50_000,
                m: 8,
                ..base
            },
        }
    }

    pub fn shape(&self) -> ShapeFunction {
        match self.shape {
            ShapeKind::Constant => ShapeFunction::Constant,
            ShapeKind::SinSquared => ShapeFunction::SinSquared,
            ShapeKind::FlatTop => ShapeFunction::FlatTop { rise: self.rise },
        }
    }

    fn validate(&self) -> Result<()> {
        check_nonempty(&self.methods, "methods")?;
        check_distinct(&self.methods, "methods")?;
        ensure!(self.lambda_a > 0.0, "lambda_a must be positive");
        ensure!(self.stop_tol >= 0.0, "stop_tol must be non-negative");
        ensure!(self.t_final > 0.0 && self.n_t >= 1, "t_final and n_t must be positive");
        check_order(self.m, "m")?;
        if self.reference_m != 0 {
            check_order(self.reference_m, "reference_m")?;
        }
        ensure!(self.rise > 0.0 && self.rise <= 0.5, "rise must lie in (0, 0.5]");
        match self.problem {
            Problem::HoFreq => {
                ensure!(self.ho.n_trunc >= 2, "ho.n_trunc must be at least 2");
                ensure!(self.ho.target_omega > 0.0, "ho.target_omega must be positive");
            }
            Problem::QuditState => self.qudit.validate(false)?,
            Problem::QuditCnot => self.qudit.validate(true)?,
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QslConfig {
    /// `p`, `q` set the guess amplitude; `beta_ghz` is replaced by the axis.
    pub model: QuditParams,
    pub t_final: Vec<f64>,
    pub beta_ghz: Vec<f64>,
    pub n_random: usize,
    pub dt: f64,
    pub lambda_a: f64,
    /// Ramp fraction of the flat-top update shape.
    pub rise: f64,
    /// Linear rise/fall fraction applied to the guess.
    pub guess_ramp: f64,
    pub max_iter: usize,
    pub success_tol: f64,
}

impl QslConfig {
    fn defaults(preset: Preset) -> Self {
        let base = Self {
            model: QuditParams::default_device().with_pq(2.0, 2.0),
            t_final: vec![10.0, 20.0, 30.0, 40.0, 50.0],
            beta_ghz: vec![0.12],
            n_random: 5,
            dt: 0.005,
            lambda_a: 5.0,
            rise: 0.1,
            guess_ramp: 0.1,
            max_iter: 100,
            success_tol: 1e-3,
        };
        match preset {
            Preset::Desk => base,
            Preset::Paper => Self {
                t_final: (1..=12).map(|k| 5.0 * k as f64).collect(),
                beta_ghz: vec![0.04, 0.08, 0.12, 0.16, 0.2, 0.24],
                n_random: 30,
                ..base
            },
        }
    }

    fn validate(&self) -> Result<()> {
        self.model.validate(true)?;
        check_nonempty(&self.t_final, "t_final")?;
        check_nonempty(&self.beta_ghz, "beta_ghz")?;
        ensure!(self.t_final.iter().all(|&t| t > 0.0), "t_final values must be positive");
        ensure!(self.n_random >= 1, "n_random must be positive");
        ensure!(self.dt > 0.0, "dt must be positive");
        for &t in &self.t_final {
            ensure!(t / self.dt >= 1.0, "T = {t} is shorter than dt");
        }
        ensure!(self.lambda_a > 0.0, "lambda_a must be positive");
        ensure!(self.rise > 0.0 && self.rise <= 0.5, "rise must lie in (0, 0.5]");
        ensure!(
            self.guess_ramp > 0.0 && self.guess_ramp <= 0.5,
            "guess_ramp must lie in (0, 0.5]"
        );
        ensure!(self.success_tol > 0.0, "success_tol must be positive");
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Section {
    ItoBench(ItoBenchConfig),
    Compare(CompareConfig),
    Dynamics(DynamicsConfig),
    PopMap(MapConfig),
    GateMap(MapConfig),
    Optimize(OptimizeConfig),
    QslMap(QslConfig),
}

/// A fully resolved run: every parameter explicit.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub preset: Preset,
    pub seed: u64,
    pub section: Section,
}

/// Overrides from the command line; `None` defers to the file, then to the
/// defaults (`desk`, seed 0).
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub preset: Option<Preset>,
    pub seed: Option<u64>,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    Value::try_from(v).expect("config types serialize to TOML")
}

fn defaults(experiment: Experiment, preset: Preset, user: Option<&Table>) -> Result<Value> {
    Ok(match experiment {
        Experiment::ItoBench => to_value(&ItoBenchConfig::defaults(preset)),
        Experiment::Compare => to_value(&CompareConfig::defaults(preset)),
        Experiment::Dynamics => to_value(&DynamicsConfig::defaults(preset)),
        Experiment::PopMap | Experiment::GateMap => to_value(&MapConfig::defaults(preset)),
        Experiment::Optimize => {
            let problem = match user.and_then(|t| t.get("problem")) {
                Some(v) => v.clone().try_into().context("optimize.problem")?,
                None => Problem::HoFreq,
            };
            to_value(&OptimizeConfig::defaults(preset, problem))
        }
        Experiment::QslMap => to_value(&QslConfig::defaults(preset)),
    })
}

/// Overlays `top` on `base`; tables merge key by key, anything else replaces.
fn merge(base: &mut Value, top: &Value) {
    match (base, top) {
        (Value::Table(b), Value::Table(t)) => {
            for (k, v) in t {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}

fn section_from(experiment: Experiment, value: Value) -> Result<Section> {
    let section = match experiment {
        Experiment::ItoBench => Section::ItoBench(value.try_into()?),
        Experiment::Compare => Section::Compare(value.try_into()?),
        Experiment::Dynamics => Section::Dynamics(value.try_into()?),
        Experiment::PopMap => Section::PopMap(value.try_into()?),
        Experiment::GateMap => Section::GateMap(value.try_into()?),
        Experiment::Optimize => Section::Optimize(value.try_into()?),
        Experiment::QslMap => Section::QslMap(value.try_into()?),
    };
    Ok(section)
}

impl RunConfig {
    /// Defaults of `preset` for `experiment`.
    pub fn preset(experiment: Experiment, preset: Preset) -> Self {
        Self::resolve(
            experiment,
            "",
            Overrides {
                preset: Some(preset),
                seed: None,
            },
        )
        .expect("preset defaults are valid")
    }

    /// Resolves `experiment` from config text (possibly empty).
    pub fn resolve(experiment: Experiment, text: &str, overrides: Overrides) -> Result<Self> {
        let file: Table = toml::from_str(text).context("config is not valid TOML")?;
        let sections: Vec<&str> = Experiment::ALL.iter().map(|e| e.section()).collect();
        for key in file.keys() {
            ensure!(
                matches!(key.as_str(), "experiment" | "preset" | "seed") || sections.contains(&key.as_str()),
                "unknown top-level key `{key}`"
            );
        }
        if let Some(v) = file.get("experiment") {
            let name = v.as_str().ok_or_else(|| anyhow!("`experiment` must be a string"))?;
            let e = Experiment::from_name(name).ok_or_else(|| anyhow!("unknown experiment `{name}`"))?;
            ensure!(
                e == experiment,
                "config is for `{name}`, not `{}`",
                experiment.name()
            );
        }
        let preset = match (overrides.preset, file.get("preset")) {
            (Some(p), _) => p,
            (None, Some(v)) => v.clone().try_into().context("preset")?,
            (None, None) => Preset::Desk,
        };
        let seed = match (overrides.seed, file.get("seed")) {
            (Some(s), _) => s,
            (None, Some(v)) => {
                let s = v.as_integer().ok_or_else(|| anyhow!("`seed` must be an integer"))?;
                u64::try_from(s).context("`seed` must be non-negative")?
            }
            (None, None) => 0,
        };
        ensure!(i64::try_from(seed).is_ok(), "seed must fit a signed 64-bit TOML integer");
        let user = match file.get(experiment.section()) {
            Some(Value::Table(t)) => Some(t),
            Some(_) => bail!("`{}` must be a table", experiment.section()),
            None => None,
        };
        let mut value = defaults(experiment, preset, user)?;
        if let Some(t) = user {
            merge(&mut value, &Value::Table(t.clone()));
        }
        let section =
            section_from(experiment, value).with_context(|| format!("in section [{}]", experiment.section()))?;
        let cfg = Self {
            experiment,
            preset,
            seed,
            section,
        };
        cfg.validate()
            .with_context(|| format!("in section [{}]", experiment.section()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.section {
            Section::ItoBench(c) => c.validate(),
            Section::Compare(c) => c.validate(),
            Section::Dynamics(c) => c.validate(),
            Section::PopMap(c) => c.validate(false),
            Section::GateMap(c) => c.validate(true),
            Section::Optimize(c) => c.validate(),
            Section::QslMap(c) => c.validate(),
        }
    }

    /// Canonical TOML of the resolved run; parsing it back reproduces `self`.
    pub fn to_toml(&self) -> String {
        let section = match &self.section {
            Section::ItoBench(c) => to_value(c),
            Section::Compare(c) => to_value(c),
            Section::Dynamics(c) => to_value(c),
            Section::PopMap(c) | Section::GateMap(c) => to_value(c),
            Section::Optimize(c) => to_value(c),
            Section::QslMap(c) => to_value(c),
        };
        let mut t = Table::new();
        t.insert("experiment".into(), Value::String(self.experiment.name().into()));
        t.insert("preset".into(), to_value(&self.preset));
        // TOML integers are signed 64-bit
        t.insert("seed".into(), Value::Integer(self.seed as i64));
        t.insert(self.experiment.section().into(), section);
        toml::to_string(&t).expect("resolved config serializes")
    }

    /// SHA-256 of the canonical TOML, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
