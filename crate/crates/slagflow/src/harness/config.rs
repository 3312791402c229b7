//! Experiment configuration (TOML). Every key of every present section is
//! required and unknown keys are rejected; sections a scenario does not use
//! may be left out.
//!
//! ```toml
//! scenario = "transport"       # model-report | transport | flow | ty-pipeline | fibration
//! seed = 11                    # eigen solver start vectors, below 2^63
//! output_dir = "out/transport" # relative to this file
//!
//! [ambient]
//! model = "calabi"             # calabi | flat
//! path = "geometry.toml"       # or an inline [ambient.inline] geometry table
//!
//! [lagrangian]
//! kind = "model"               # model | flat | graph
//! level = 16.0                 # L = −log ε
//! slope = [1, 0]
//! resolution = [16, 16]        # vertices along N, around the fiber
//! warp = 0.0                   # parametrization warp, |warp| < 1/2
//! base_point = [0.0, 0.0]      # z₀ on the base, real and imaginary part
//!
//! [moser]
//! steps = 200                  # RK4 steps over t ∈ [0, 1]
//! snapshots = 10
//! error_estimate = false
//! certificate = [10.0, 2.0]    # (C, K) for the bounded-geometry check
//!
//! [lmcf]
//! dt = "cfl"                   # "cfl" or a fixed step in flow time
//! c_cfl = 0.1
//! stop_h2 = 1e-12              # stop when sup|H|² falls below
//! max_time = 40.0
//! monitor_stride = 10          # steps between samples
//! mesh_tolerance = 1e-5
//! eigen = true                 # λ₁ at every sample
//! smoothing = false            # |∇A|², |∇²A|² at every sample
//! noncollapse_radius = 0.0     # r₀; 0 disables the noncollapsing sample
//! noncollapse_samples = 0      # basepoints per direction
//! redistribute = 0             # steps between tangential redistribution; 0 = never
//! blowup_factor = 100.0        # singularity when sup|A|² grows by this factor
//!
//! [fibration]
//! degree = 9
//! steps = 128                  # fibers along the base loop
//! resolution = [96, 16]
//! level = 4.0                  # L = −log ε of the fibers
//! types = ["I1", "I1", "I1"]   # singular fiber configuration
//! search_bound = 20
//!
//! [tolerances]                 # optional overrides, keyed check → bound
//! "A7.residual" = 1e-6
//! ```

use super::HarnessError;
use crate::ambient::spec_io::GeometryDoc;
use crate::ambient::FlatTorusCY;
use crate::fibration::KodairaType;
use crate::lagmesh::GraphMode;
use crate::lmcf::{DtPolicy, LmcfConfig};
use crate::moser::TransportOptions;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const SCENARIOS: [&str; 5] = ["model-report", "transport", "flow", "ty-pipeline", "fibration"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub ambient: Option<AmbientRef>,
    pub lagrangian: Option<LagrangianSpec>,
    pub moser: Option<MoserSettings>,
    pub lmcf: Option<LmcfDoc>,
    pub fibration: Option<FibrationSettings>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AmbientModel {
    Calabi,
    Flat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmbientRef {
    pub model: AmbientModel,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub inline: Option<GeometryDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LagrangianSpec {
    Model {
        level: f64,
        slope: [i64; 2],
        resolution: [usize; 2],
        warp: f64,
        base_point: [f64; 2],
    },
    /// Sub-torus spanned by two lattice generators of a flat ℂ² torus.
    Flat {
        generators: [usize; 2],
        resolution: [usize; 2],
    },
    Graph {
        resolution: [usize; 2],
        modes: Vec<GraphMode>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoserSettings {
    pub steps: usize,
    pub snapshots: usize,
    pub error_estimate: bool,
    pub certificate: [f64; 2],
}

impl MoserSettings {
    pub fn options(&self) -> TransportOptions {
        TransportOptions { steps: self.steps, snapshots: self.snapshots, error_estimate: self.error_estimate }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DtDoc {
    Fixed(f64),
    Word(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmcfDoc {
    pub dt: DtDoc,
    pub c_cfl: f64,
    pub stop_h2: f64,
    pub max_time: f64,
    pub monitor_stride: usize,
    pub mesh_tolerance: f64,
    pub eigen: bool,
    pub smoothing: bool,
    pub noncollapse_radius: f64,
    pub noncollapse_samples: usize,
    pub redistribute: usize,
    pub blowup_factor: f64,
}

impl LmcfDoc {
    pub fn to_config(&self) -> Result<LmcfConfig, HarnessError> {
        let dt_policy = match &self.dt {
            DtDoc::Fixed(dt) => DtPolicy::Fixed(*dt),
            DtDoc::Word(w) if w == "cfl" => DtPolicy::Cfl,
            DtDoc::Word(w) => {
                return Err(HarnessError::Config(format!("lmcf.dt must be \"cfl\" or a number, got {w:?}")))
            }
        };
        let noncollapse = match (self.noncollapse_radius, self.noncollapse_samples) {
            (_, 0) => None,
            (r, n) if r > 0.0 => Some((r, n)),
            (r, _) => return Err(HarnessError::Config(format!("lmcf.noncollapse_radius must be positive, got {r}"))),
        };
        let cfg = LmcfConfig {
            dt_policy,
            c_cfl: self.c_cfl,
            stop_h2: self.stop_h2,
            max_time: self.max_time,
            monitor_stride: self.monitor_stride,
            mesh_tolerance: self.mesh_tolerance,
            eigen: self.eigen,
            smoothing: self.smoothing,
            noncollapse,
            redistribute: (self.redistribute > 0).then_some(self.redistribute),
            blowup_factor: self.blowup_factor,
        };
        cfg.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Inverse of [`LmcfDoc::to_config`].
    pub fn from_config(cfg: &LmcfConfig) -> Self {
        LmcfDoc {
            dt: match cfg.dt_policy {
                DtPolicy::Fixed(dt) => DtDoc::Fixed(dt),
                DtPolicy::Cfl => DtDoc::Word("cfl".into()),
            },
            c_cfl: cfg.c_cfl,
            stop_h2: cfg.stop_h2,
            max_time: cfg.max_time,
            monitor_stride: cfg.monitor_stride,
            mesh_tolerance: cfg.mesh_tolerance,
            eigen: cfg.eigen,
            smoothing: cfg.smoothing,
            noncollapse_radius: cfg.noncollapse.map(|x| x.0).unwrap_or(0.0),
            noncollapse_samples: cfg.noncollapse.map(|x| x.1).unwrap_or(0),
            redistribute: cfg.redistribute.unwrap_or(0),
            blowup_factor: cfg.blowup_factor,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FibrationSettings {
    pub degree: i64,
    pub steps: usize,
    pub resolution: [usize; 2],
    pub level: f64,
    pub types: Vec<String>,
    pub search_bound: i64,
}

impl FibrationSettings {
    pub fn kodaira_types(&self) -> Result<Vec<KodairaType>, HarnessError> {
        self.types
            .iter()
            .map(|s| s.parse().map_err(|e: crate::fibration::FibrationError| HarnessError::Config(e.to_string())))
            .collect()
    }
}

impl ExperimentConfig {
    /// Parses `text`, resolving relative paths against `base_dir`, and
    /// validates it. A referenced geometry file is read and stored inline.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, HarnessError> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base_dir.join(&cfg.output_dir);
        }
        if let Some(amb) = cfg.ambient.as_mut() {
            match (&amb.path, &amb.inline) {
                (Some(p), None) => {
                    let path = if p.is_relative() { base_dir.join(p) } else { p.clone() };
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| HarnessError::Config(format!("ambient.path {}: {e}", path.display())))?;
                    amb.inline = Some(GeometryDoc::parse(&text).map_err(|e| HarnessError::Config(e.to_string()))?);
                    amb.path = Some(path);
                }
                (None, Some(_)) => {}
                _ => return Err(HarnessError::Config("ambient needs exactly one of path and inline".into())),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Canonical text with the geometry inline; parses back to `self`
    /// without the file reference.
    pub fn to_text(&self) -> String {
        let mut c = self.clone();
        if let Some(a) = c.ambient.as_mut() {
            a.path = None;
        }
        toml::to_string(&c).expect("experiment config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if i64::try_from(self.seed).is_err() {
            return Err(HarnessError::Config(format!("seed {} exceeds the TOML integer range", self.seed)));
        }
        if !SCENARIOS.contains(&self.scenario.as_str()) {
            return Err(HarnessError::UnknownScenario {
                id: self.scenario.clone(),
                known: SCENARIOS.iter().map(|s| s.to_string()).collect(),
            });
        }
        let needs: &[&str] = match self.scenario.as_str() {
            "model-report" => &["ambient", "lagrangian"],
            "transport" => &["ambient", "lagrangian", "moser"],
            "flow" => &["ambient", "lagrangian", "lmcf"],
            "ty-pipeline" => &["ambient", "lagrangian", "moser", "lmcf"],
            _ => &["fibration"],
        };
        for section in needs {
            let present = match *section {
                "ambient" => self.ambient.is_some(),
                "lagrangian" => self.lagrangian.is_some(),
                "moser" => self.moser.is_some(),
                "lmcf" => self.lmcf.is_some(),
                _ => self.fibration.is_some(),
            };
            if !present {
                return Err(HarnessError::Config(format!("scenario {} needs a [{section}] section", self.scenario)));
            }
        }
        if let Some(l) = &self.lmcf {
            l.to_config()?;
        }
        if let Some(f) = &self.fibration {
            f.kodaira_types()?;
            if f.steps < 2 || f.search_bound < 1 || !(f.level > 0.0) {
                return Err(HarnessError::Config("fibration needs steps ≥ 2, search_bound ≥ 1 and level > 0".into()));
            }
        }
        if let Some(amb) = &self.ambient {
            let doc = self.geometry()?;
            match amb.model {
                AmbientModel::Calabi => {
                    doc.calabi().map_err(|e| HarnessError::Config(e.to_string()))?;
                }
                AmbientModel::Flat => {
                    let t = self.flat_torus()?;
                    if doc.perturbation.is_some() {
                        return Err(HarnessError::Config("a flat ambient takes no perturbation".into()));
                    }
                    if t.complex_dim_base != doc.dim {
                        return Err(HarnessError::Config(format!(
                            "flat ambient: dim = {} but the lattice has complex dimension {}",
                            doc.dim, t.complex_dim_base
                        )));
                    }
                }
            }
            let model_lag = matches!(self.lagrangian, Some(LagrangianSpec::Model { .. }));
            if self.lagrangian.is_some() && model_lag != (amb.model == AmbientModel::Calabi) {
                return Err(HarnessError::Config(
                    "model Lagrangians need a calabi ambient, flat and graph ones a flat ambient".into(),
                ));
            }
            if matches!(self.scenario.as_str(), "transport" | "ty-pipeline") && doc.perturbation.is_none() {
                return Err(HarnessError::Config(format!("scenario {} needs ambient.perturbation", self.scenario)));
            }
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<&GeometryDoc, HarnessError> {
        self.ambient
            .as_ref()
            .and_then(|a| a.inline.as_ref())
            .ok_or_else(|| HarnessError::Config("no ambient geometry".into()))
    }

    pub fn flat_torus(&self) -> Result<FlatTorusCY, HarnessError> {
        self.geometry()?.base().map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Override for `key` if present, else `default`.
    pub fn tolerance(&self, key: &str, default: f64) -> f64 {
        self.tolerances.get(key).copied().unwrap_or(default)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn text(scenario: &str) -> String {
        format!(
            r#"
scenario = "{scenario}"
seed = 3
output_dir = "out"

[ambient]
model = "calabi"
[ambient.inline]
dim = 2
kappa = 1.0
lattice = [[6.283185307179586, 0.0], [0.0, 6.283185307179586]]
kahler_re = [[1.0]]
kahler_im = [[0.0]]
holvol_phase = 0.0

[lagrangian]
kind = "model"
level = 16.0
slope = [1, 0]
resolution = [16, 16]
warp = 0.0
base_point = [0.0, 0.0]
"#
        )
    }

    #[test]
    fn model_report_config_parses() {
        let c = ExperimentConfig::parse(&text("model-report"), Path::new("/tmp/x")).unwrap();
        assert_eq!(c.output_dir, PathBuf::from("/tmp/x/out"));
        assert!(matches!(c.lagrangian, Some(LagrangianSpec::Model { level, .. }) if level == 16.0));
        let again = ExperimentConfig::parse(&c.to_text(), Path::new("/elsewhere")).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn unknown_scenario_lists_the_known_ones() {
        match ExperimentConfig::parse(&text("bogus"), Path::new(".")) {
            Err(HarnessError::UnknownScenario { id, known }) => {
                assert_eq!(id, "bogus");
                assert_eq!(known.len(), SCENARIOS.len());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_and_unknown_keys_fail() {
        let t = text("model-report").replace("warp = 0.0\n", "");
        assert!(matches!(ExperimentConfig::parse(&t, Path::new(".")), Err(HarnessError::Config(_))));
        let t = text("model-report").replace("seed = 3", "seed = 3\nsede = 4");
        assert!(matches!(ExperimentConfig::parse(&t, Path::new(".")), Err(HarnessError::Config(_))));
        let t = text("model-report").replace("warp = 0.0", "warp = 0.0\nwrap = 1.0");
        assert!(matches!(ExperimentConfig::parse(&t, Path::new(".")), Err(HarnessError::Config(_))));
    }

    #[test]
    fn scenario_sections_and_perturbation_are_required() {
        let e = ExperimentConfig::parse(&text("flow"), Path::new(".")).unwrap_err();
        assert!(e.to_string().contains("[lmcf]"), "{e}");
        let t = text("transport")
            + "[moser]\nsteps = 10\nsnapshots = 1\nerror_estimate = false\ncertificate = [10.0, 2.0]\n";
        let e = ExperimentConfig::parse(&t, Path::new(".")).unwrap_err();
        assert!(e.to_string().contains("perturbation"), "{e}");
    }

    #[test]
    fn lmcf_section_maps_to_the_flow_config() {
        let cfg = LmcfConfig { redistribute: Some(5), noncollapse: Some((0.5, 3)), ..Default::default() };
        let doc = LmcfDoc::from_config(&cfg);
        assert_eq!(doc.to_config().unwrap(), cfg);
        let bad = LmcfDoc { dt: DtDoc::Word("fast".into()), ..doc.clone() };
        assert!(bad.to_config().is_err());
        let fixed = LmcfDoc { dt: DtDoc::Fixed(1e-3), ..doc };
        let t = toml::to_string(&fixed).unwrap();
        assert!(t.contains("dt = 0.001"), "{t}");
        assert_eq!(toml::from_str::<LmcfDoc>(&t).unwrap(), fixed);
    }
}
