//! TOML experiment configuration.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::initdata::{
    bubble_pair, load_fields, perturbed_constant, random_perturbation, shift_nonnegative,
    BubbleSpec,
};
use crate::model::{ModelParams, Motility};
use crate::solver::{Outcome, RunSettings, StepControl};
use crate::steady::{SteadyOptions, SteadySeed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Run,
    Steady,
    BubbleEnergy,
    CriticalMass,
    DissipationCheck,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Run => "run",
            ExperimentKind::Steady => "steady",
            ExperimentKind::BubbleEnergy => "bubble-energy",
            ExperimentKind::CriticalMass => "critical-mass",
            ExperimentKind::DissipationCheck => "dissipation-check",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            nx: 64,
            ny: 64,
            lx: 1.0,
            ly: 1.0,
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.nx, self.ny, self.lx, self.ly)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSpec {
    pub chi: f64,
    pub motility: Motility,
    pub sigma: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            chi: 1.0,
            motility: Motility::Exponential,
            sigma: 0.0,
        }
    }
}

impl ModelSpec {
    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.chi, self.motility, self.sigma)
    }
}

fn default_amplitude() -> f64 {
    0.1
}

fn default_mode() -> [u32; 2] {
    [1, 1]
}

fn default_x0() -> [f64; 2] {
    [0.0, 0.5]
}

fn default_true() -> bool {
    true
}

/// Initial data. For critical-mass runs the mass is replaced by each trial mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Constant {
        mass: f64,
    },
    Perturbed {
        mass: f64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default = "default_mode")]
        mode: [u32; 2],
    },
    Random {
        mass: f64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
    Bubble {
        mass: f64,
        epsilon: f64,
        #[serde(default = "default_x0")]
        x0: [f64; 2],
        /// Lift v₀ to be nonnegative.
        #[serde(default = "default_true")]
        shift_v: bool,
    },
    File {
        u: PathBuf,
        v: PathBuf,
    },
}

/// Initial pair plus anything worth recording about how it was built.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub u: Field,
    pub v: Field,
    pub v_shift: f64,
}

impl InitialSpec {
    pub fn mass(&self) -> Option<f64> {
        match *self {
            InitialSpec::Constant { mass }
            | InitialSpec::Perturbed { mass, .. }
            | InitialSpec::Random { mass, .. }
            | InitialSpec::Bubble { mass, .. } => Some(mass),
            InitialSpec::File { .. } => None,
        }
    }

    /// Same data family at another mass. File data cannot be rescaled.
    pub fn with_mass(&self, m: f64) -> Result<InitialSpec> {
        let mut out = self.clone();
        match &mut out {
            InitialSpec::Constant { mass }
            | InitialSpec::Perturbed { mass, .. }
            | InitialSpec::Random { mass, .. }
            | InitialSpec::Bubble { mass, .. } => *mass = m,
            InitialSpec::File { .. } => {
                return Err(Error::Config(
                    "file initial data has a fixed mass and cannot form a mass family".into(),
                ))
            }
        }
        Ok(out)
    }

    /// Builds (u₀, v₀). Relative file paths are taken from `base`.
    pub fn build(&self, grid: &Grid, chi: f64, seed: u64, base: &Path) -> Result<InitialData> {
        let (u, v, v_shift) = match self {
            InitialSpec::Constant { mass } => {
                let (u, v) = perturbed_constant(*mass, 0.0, (0, 0), grid)?;
                (u, v, 0.0)
            }
            InitialSpec::Perturbed {
                mass,
                amplitude,
                mode,
            } => {
                let (u, v) = perturbed_constant(*mass, *amplitude, (mode[0], mode[1]), grid)?;
                (u, v, 0.0)
            }
            InitialSpec::Random { mass, amplitude } => {
                let (u, v) = random_perturbation(*mass, *amplitude, seed, grid)?;
                (u, v, 0.0)
            }
            InitialSpec::Bubble {
                mass,
                epsilon,
                x0,
                shift_v,
            } => {
                let b = bubble_pair(
                    &BubbleSpec {
                        epsilon: *epsilon,
                        x0: (x0[0], x0[1]),
                        mass: *mass,
                        chi,
                    },
                    grid,
                )?;
                if *shift_v {
                    let (v, s) = shift_nonnegative(&b.v);
                    (b.u, v, s)
                } else {
                    (b.u, b.v, 0.0)
                }
            }
            InitialSpec::File { u, v } => {
                let (u, v) = load_fields(&base.join(u), &base.join(v))?;
                if u.grid() != grid {
                    return Err(Error::GridMismatch(format!(
                        "initial data is {}x{} but the configured grid is {}x{}",
                        u.grid().nx(),
                        u.grid().ny(),
                        grid.nx(),
                        grid.ny()
                    )));
                }
                (u, v, 0.0)
            }
        };
        Ok(InitialData { u, v, v_shift })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BubbleEnergySpec {
    pub mass: f64,
    pub epsilons: Vec<f64>,
    #[serde(default = "default_x0")]
    pub x0: [f64; 2],
}

fn default_iterations() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticalMassSpec {
    pub bracket: [f64; 2],
    #[serde(default = "default_iterations")]
    pub iterations: usize,
}

impl CriticalMassSpec {
    /// Bubble at ε = 0.05 on the left edge with v₀ lifted to be nonnegative.
    pub fn default_family() -> InitialSpec {
        InitialSpec::Bubble {
            mass: 1.0,
            epsilon: 0.05,
            x0: default_x0(),
            shift_v: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadySpec {
    pub masses: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<SteadySeed>,
    #[serde(default)]
    pub options: SteadyOptions,
}

fn default_seeds() -> Vec<SteadySeed> {
    vec![SteadySeed::Constant]
}

fn default_dts() -> Vec<f64> {
    vec![1e-2, 5e-3, 2.5e-3]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DissipationSpec {
    #[serde(default = "default_dts")]
    pub dts: Vec<f64>,
}

impl Default for DissipationSpec {
    fn default() -> Self {
        Self { dts: default_dts() }
    }
}

/// Expected values for `--check`. Missing values fall back to per-experiment defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_violation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub control: StepControl,
    #[serde(default)]
    pub run: RunSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bubble_energy: Option<BubbleEnergySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critical_mass: Option<CriticalMassSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steady: Option<SteadySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dissipation: Option<DissipationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckSpec>,
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {x}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e
                .span()
                .map(|s| text[..s.start].matches('\n').count() + 1)
                .unwrap_or(0),
            msg: e.message().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    /// The resolved configuration, defaults filled in.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot encode config: {e}")))
    }

    pub fn kind(&self) -> ExperimentKind {
        self.experiment.kind
    }

    /// Data family used by the critical-mass experiment.
    pub fn family(&self) -> InitialSpec {
        self.initial
            .clone()
            .unwrap_or_else(CriticalMassSpec::default_family)
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid.build()?;
        let params = self.model.params()?;
        self.control.validate()?;
        self.run.validate()?;
        if let Some(init) = &self.initial {
            if let Some(m) = init.mass() {
                positive("initial mass", m)?;
            }
            if let InitialSpec::Bubble { epsilon, x0, .. } = init {
                BubbleSpec {
                    epsilon: *epsilon,
                    x0: (x0[0], x0[1]),
                    mass: init.mass().unwrap_or(1.0),
                    chi: params.chi(),
                }
                .validate(&grid)?;
            }
        }
        match self.kind() {
            ExperimentKind::Run | ExperimentKind::DissipationCheck => {
                if self.initial.is_none() {
                    return Err(Error::Config(format!(
                        "{} needs an [initial] section",
                        self.kind()
                    )));
                }
                if self.kind() == ExperimentKind::DissipationCheck {
                    let d = self.dissipation.clone().unwrap_or_default();
                    if d.dts.is_empty() {
                        return Err(Error::Config("dissipation.dts is empty".into()));
                    }
                    for dt in &d.dts {
                        positive("dissipation dt", *dt)?;
                    }
                }
            }
            ExperimentKind::Steady => {
                let s = self
                    .steady
                    .as_ref()
                    .ok_or_else(|| Error::Config("steady needs a [steady] section".into()))?;
                if s.masses.is_empty() || s.seeds.is_empty() {
                    return Err(Error::Config("steady.masses and steady.seeds must be nonempty".into()));
                }
                for m in &s.masses {
                    positive("steady mass", *m)?;
                }
                if !(s.options.damping > 0.0 && s.options.damping <= 1.0) {
                    return Err(Error::Config(format!(
                        "steady damping must lie in (0, 1], got {}",
                        s.options.damping
                    )));
                }
            }
            ExperimentKind::BubbleEnergy => {
                let b = self.bubble_energy.as_ref().ok_or_else(|| {
                    Error::Config("bubble-energy needs a [bubble_energy] section".into())
                })?;
                positive("bubble_energy mass", b.mass)?;
                for e in &b.epsilons {
                    positive("epsilon", *e)?;
                }
                if !grid.on_boundary(b.x0[0], b.x0[1]) {
                    return Err(Error::Config(format!(
                        "bubble_energy.x0 = [{}, {}] is not on the boundary",
                        b.x0[0], b.x0[1]
                    )));
                }
            }
            ExperimentKind::CriticalMass => {
                let c = self.critical_mass.as_ref().ok_or_else(|| {
                    Error::Config("critical-mass needs a [critical_mass] section".into())
                })?;
                let [lo, hi] = c.bracket;
                positive("bracket lower end", lo)?;
                if !(hi > lo && hi.is_finite()) {
                    return Err(Error::Config(format!(
                        "mass bracket must be ordered, got [{lo}, {hi}]"
                    )));
                }
                self.family().with_mass(lo)?;
            }
        }
        Ok(())
    }
}

/// 4π/χ.
pub fn critical_mass(chi: f64) -> f64 {
    4.0 * PI / chi
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_toml(s, Path::new("test.toml"))
    }

    #[test]
    fn minimal_run_config_fills_defaults() {
        let c = parse(
            r#"
[experiment]
kind = "run"

[initial]
kind = "perturbed"
mass = 6.0
"#,
        )
        .unwrap();
        c.validate().unwrap();
        assert_eq!(c.grid, GridSpec::default());
        assert_eq!(c.control, StepControl::default());
        assert_eq!(
            c.initial,
            Some(InitialSpec::Perturbed {
                mass: 6.0,
                amplitude: 0.1,
                mode: [1, 1]
            })
        );
        let again = parse(&c.to_toml().unwrap()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_line() {
        let err = parse("[experiment]\nkind = \"run\"\n\n[grid]\nnxx = 3\n").unwrap_err();
        match err {
            Error::Parse { line, msg, .. } => {
                assert_eq!(line, 5);
                assert!(msg.contains("nxx"), "{msg}");
            }
            e => panic!("unexpected {e:?}"),
        }
        assert!(parse("[experiment]\nkind = \"walk\"\n").is_err());
        assert!(parse(
            "[experiment]\nkind = \"run\"\n[initial]\nkind = \"constant\"\nmass = 1.0\nextra = 2\n"
        )
        .is_err());
    }

    #[test]
    fn motility_and_seeds_parse() {
        let c = parse(
            r#"
[experiment]
kind = "steady"

[model]
chi = 2.0
motility = { law = "algebraic", k = 1.5 }

[steady]
masses = [1.0, 2.0]
seeds = [{ kind = "constant" }, { kind = "bubble", epsilon = 0.2, x0 = [0.0, 0.5] }]
"#,
        )
        .unwrap();
        c.validate().unwrap();
        assert_eq!(c.model.motility, Motility::Algebraic { k: 1.5 });
        assert_eq!(c.steady.as_ref().unwrap().seeds.len(), 2);
    }

    #[test]
    fn bracket_must_be_ordered() {
        let c = parse(
            "[experiment]\nkind = \"critical-mass\"\n[critical_mass]\nbracket = [8.0, 2.0]\n",
        )
        .unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn missing_sections_are_config_errors() {
        for kind in ["run", "steady", "bubble-energy", "critical-mass", "dissipation-check"] {
            let c = parse(&format!("[experiment]\nkind = \"{kind}\"\n")).unwrap();
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{kind}");
        }
    }

    #[test]
    fn interior_bubble_is_rejected() {
        let c = parse(
            "[experiment]\nkind = \"run\"\n[initial]\nkind = \"bubble\"\nmass = 1.0\nepsilon = 0.1\nx0 = [0.5, 0.5]\n",
        )
        .unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn file_family_cannot_be_rescaled() {
        let f = InitialSpec::File {
            u: "u.snap".into(),
            v: "v.snap".into(),
        };
        assert!(f.with_mass(2.0).is_err());
        let b = CriticalMassSpec::default_family().with_mass(3.0).unwrap();
        assert_eq!(b.mass(), Some(3.0));
    }
}
