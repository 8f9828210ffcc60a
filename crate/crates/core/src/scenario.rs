//! Scenario files.
//!
//! A scenario is a TOML document with five sections:
//!
//! ```toml
//! [fluxes]
//! f0 = { a = 0.0, c = 1.0, f_max = 2.0 }
//! f1 = { a = 0.0, c = 1.0, f_max = 1.0 }
//! f2 = { points = [[0.0, 0.0], [0.5, 1.0], [1.0, 0.0]] }
//!
//! [signal]
//! segments = [
//!   { duration = 0.5, phase = 1, A = 1.0 },
//!   { duration = 0.5, phase = 2, A = 1.0 },
//! ]
//!
//! [initial]
//! branch0 = [{ until = 4.0, rho = 0.75 }]
//! branch1 = [{ rho = 0.0 }]
//! branch2 = [{ rho = 0.0 }]
//!
//! [grid]
//! dx = 0.0025
//! half_length = 4.0
//! cfl = 0.9
//!
//! [run]
//! model = "meso"
//! eps = 0.125
//! horizon = 2.0
//! snapshots = [0.0, 1.0, 2.0]
//! ```
//!
//! Initial pieces are listed by distance from the node; the last piece runs
//! to the far end. For the `two-to-one` model branch 0 is the outgoing road
//! and branches 1 and 2 feed the node.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::Flux;
use crate::fvm::{BranchField, MacroRule, MesoRule, RunOptions, Trajectory};
use crate::germ::Fluxes;
use crate::signal::{Phase, Signal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FluxSpec {
    Quadratic { a: f64, c: f64, f_max: f64 },
    Sampled { points: Vec<[f64; 2]> },
}

impl FluxSpec {
    pub fn build(&self) -> Result<Flux> {
        match self {
            FluxSpec::Quadratic { a, c, f_max } => Flux::quadratic(*a, *c, *f_max),
            FluxSpec::Sampled { points } => {
                let pts: Vec<(f64, f64)> = points.iter().map(|p| (p[0], p[1])).collect();
                Flux::sampled(&pts)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxesSection {
    pub f0: FluxSpec,
    pub f1: FluxSpec,
    pub f2: FluxSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub duration: f64,
    pub phase: usize,
    #[serde(rename = "A")]
    pub limiter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSection {
    pub segments: Vec<SegmentSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub until: Option<f64>,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialSection {
    pub branch0: Vec<PieceSpec>,
    pub branch1: Vec<PieceSpec>,
    pub branch2: Vec<PieceSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSection {
    pub dx: f64,
    pub half_length: f64,
    pub cfl: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            dx: 0.01,
            half_length: 4.0,
            cfl: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Meso,
    Macro,
    TwoToOne,
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "meso" => Ok(Model::Meso),
            "macro" => Ok(Model::Macro),
            "two-to-one" | "2:1" => Ok(Model::TwoToOne),
            _ => Err(Error::Scenario(format!(
                "unknown model {s:?} (meso, macro or two-to-one)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSection {
    pub model: Model,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    pub horizon: f64,
    #[serde(default)]
    pub snapshots: Vec<f64>,
}

/// Raw file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub fluxes: FluxesSection,
    pub signal: SignalSection,
    pub initial: InitialSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
    pub run: RunSection,
}

/// Validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub fluxes: Fluxes,
    pub signal: Signal,
    pub grid: GridSection,
    pub initial: BranchField,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Scenario(format!("parse error: {e}")))?;
        Self::from_file(file)
    }

    pub fn from_file(file: ScenarioFile) -> Result<Self> {
        let build = |name: &str, s: &FluxSpec| s.build().map_err(|e| Error::Scenario(format!("flux {name}: {e}")));
        let fluxes = Fluxes::new(
            build("f0", &file.fluxes.f0)?,
            build("f1", &file.fluxes.f1)?,
            build("f2", &file.fluxes.f2)?,
        );
        let pieces: Vec<(f64, Phase, f64)> = file
            .signal
            .segments
            .iter()
            .map(|s| Ok((s.duration, Phase::from_index(s.phase)?, s.limiter)))
            .collect::<Result<_>>()?;
        let signal = Signal::from_durations(&pieces)?;
        // The cap concerns the node the light controls, which is the
        // reversed one for converging junctions.
        let node_fluxes = match file.run.model {
            Model::TwoToOne => fluxes.reversed(),
            _ => fluxes.clone(),
        };
        signal.validate_caps(&node_fluxes)?;
        let grid = match &file.grid {
            Some(g) => g.clone(),
            None => {
                let g = GridSection::default();
                log::info!(
                    "no [grid] section; using dx = {}, L = {}, cfl = {}",
                    g.dx,
                    g.half_length,
                    g.cfl
                );
                g
            }
        };
        if !(grid.cfl > 0.0 && grid.cfl <= 1.0) {
            return Err(Error::Scenario(format!("cfl must lie in (0, 1], got {}", grid.cfl)));
        }
        let run = &file.run;
        if !(run.horizon > 0.0 && run.horizon.is_finite()) {
            return Err(Error::Scenario(format!(
                "horizon must be positive, got {}",
                run.horizon
            )));
        }
        match (run.model, run.eps) {
            (Model::Meso | Model::TwoToOne, None) => {
                return Err(Error::Scenario("the light models need run.eps".into()));
            }
            (_, Some(e)) if !(e > 0.0 && e.is_finite()) => {
                return Err(Error::Scenario(format!("eps must be positive, got {e}")));
            }
            _ => {}
        }
        let to_pieces = |name: &str, v: &[PieceSpec]| -> Result<Vec<(f64, f64)>> {
            if v.is_empty() {
                return Err(Error::Scenario(format!("initial.{name} is empty")));
            }
            let mut last = 0.0;
            v.iter()
                .enumerate()
                .map(|(i, p)| {
                    let until = match p.until {
                        Some(u) => u,
                        None if i + 1 == v.len() => f64::INFINITY,
                        None => return Err(Error::Scenario(format!("initial.{name}[{i}] needs `until`"))),
                    };
                    if until <= last {
                        return Err(Error::Scenario(format!(
                            "initial.{name} pieces must move away from the node"
                        )));
                    }
                    last = until;
                    Ok((until, p.rho))
                })
                .collect()
        };
        let pieces = [
            to_pieces("branch0", &file.initial.branch0)?,
            to_pieces("branch1", &file.initial.branch1)?,
            to_pieces("branch2", &file.initial.branch2)?,
        ];
        for (j, p) in pieces.iter().enumerate() {
            let f = &fluxes[j];
            if let Some(&(_, rho)) = p.iter().find(|&&(_, r)| r < f.a() || r > f.c()) {
                return Err(Error::Scenario(format!(
                    "initial density {rho} on branch {j} leaves [{}, {}]",
                    f.a(),
                    f.c()
                )));
            }
        }
        let mut initial = BranchField::from_pieces(&pieces, grid.dx, grid.half_length)?;
        if file.run.model == Model::TwoToOne {
            // Stored in the converging frame: the outgoing road is branch 0.
            let n = initial.n();
            initial.cells[0].reverse();
            initial.cells[1].reverse();
            initial.cells[2].reverse();
            initial.incoming = [false, true, true];
            debug_assert_eq!(initial.n(), n);
        }
        let reach = fluxes.max_speed() * run.horizon;
        if reach >= grid.half_length {
            log::warn!(
                "waves may reach the far ends: speed bound x horizon = {reach} >= L = {}",
                grid.half_length
            );
        }
        Ok(Scenario {
            file,
            fluxes,
            signal,
            grid,
            initial,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.file).expect("scenario serializes")
    }

    pub fn model(&self) -> Model {
        self.file.run.model
    }

    pub fn options(&self) -> RunOptions {
        RunOptions {
            horizon: self.file.run.horizon,
            cfl: self.grid.cfl,
            snapshots: self.file.run.snapshots.clone(),
            record_steps: true,
        }
    }

    /// Runs the scenario's model, optionally overriding the model and `ε`.
    pub fn run(&self, model: Option<Model>, eps: Option<f64>) -> Result<Trajectory> {
        let model = model.unwrap_or(self.model());
        let eps = eps.or(self.file.run.eps);
        let opts = self.options();
        let need_eps = || eps.ok_or_else(|| Error::Scenario("this model needs eps".into()));
        match model {
            Model::Meso => {
                let rule = MesoRule::new(self.signal.clone(), self.fluxes.clone(), need_eps()?)?;
                crate::fvm::simulate(self.initial.clone(), &self.fluxes, &rule, &opts)
            }
            Model::Macro => {
                let rule = MacroRule::effective(&self.signal, &self.fluxes)?;
                crate::fvm::simulate(self.initial.clone(), &self.fluxes, &rule, &opts)
            }
            Model::TwoToOne => {
                let rule = MesoRule::new(self.signal.clone(), self.fluxes.reversed(), need_eps()?)?;
                crate::fvm::simulate_2to1(self.initial.clone(), &self.fluxes, &rule, &opts)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
[fluxes]
f0 = { a = 0.0, c = 1.0, f_max = 2.0 }
f1 = { a = 0.0, c = 1.0, f_max = 1.0 }
f2 = { a = 0.0, c = 1.0, f_max = 1.0 }

[signal]
segments = [
  { duration = 0.5, phase = 1, A = 1.0 },
  { duration = 0.5, phase = 2, A = 1.0 },
]

[initial]
branch0 = [{ rho = 0.75 }]
branch1 = [{ rho = 0.0 }]
branch2 = [{ until = 1.0, rho = 0.5 }, { rho = 0.0 }]

[run]
model = "meso"
eps = 0.25
horizon = 0.5
"#;

    #[test]
    fn parses_and_round_trips() {
        let s = Scenario::from_toml(BASIC).unwrap();
        assert_eq!(s.grid, GridSection::default());
        assert_eq!(s.initial.cells[0][0], 0.75);
        let again = Scenario::from_toml(&s.to_toml()).unwrap();
        assert_eq!(again.file.signal, s.file.signal);
        assert_eq!(again.initial, s.initial);
    }

    #[test]
    fn cap_violation_names_the_assumption() {
        let bad = BASIC.replace("phase = 1, A = 1.0", "phase = 1, A = 1.5");
        let e = Scenario::from_toml(&bad).unwrap_err().to_string();
        assert!(e.contains("limiter cap"), "{e}");
    }

    #[test]
    fn rejects_bad_data() {
        assert!(Scenario::from_toml(&BASIC.replace("rho = 0.75", "rho = 1.75")).is_err());
        assert!(Scenario::from_toml(&BASIC.replace("eps = 0.25", "eps = -1.0")).is_err());
        assert!(Scenario::from_toml(&BASIC.replace("model = \"meso\"", "model = \"fast\"")).is_err());
        assert!(Scenario::from_toml("not toml [").is_err());
    }

    #[test]
    fn runs_every_model() {
        let s = Scenario::from_toml(BASIC).unwrap();
        for m in [Model::Meso, Model::Macro] {
            let t = s.run(Some(m), None).unwrap();
            assert!(t.worst_ledger < 1e-12);
        }
    }
}
