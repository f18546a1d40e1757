//! Run configuration: a TOML file with nested sections, overridable by
//! command-line flags (flags win).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qspread::evolve::Potential;
use qspread::packets::EffectivePacketState;

/// Environment variable supplying the default output directory.
pub const OUT_DIR_ENV: &str = "QSPREAD_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    MakePacket,
    Evolve,
    Effective,
    Compare,
    Spectrum,
    AlgebraCheck,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::MakePacket => "make-packet",
            Experiment::Evolve => "evolve",
            Experiment::Effective => "effective",
            Experiment::Compare => "compare",
            Experiment::Spectrum => "spectrum",
            Experiment::AlgebraCheck => "algebra-check",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { x_min: -32.0, x_max: 32.0, n: 1024 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PacketSection {
    pub q: f64,
    pub p: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub k: u32,
    pub norm: f64,
}

impl Default for PacketSection {
    fn default() -> Self {
        Self { q: 0.0, p: 0.0, alpha: 1.0, beta: 0.0, gamma: 0.0, k: 0, norm: 1.0 }
    }
}

impl PacketSection {
    pub fn to_state(&self) -> Result<EffectivePacketState<f64>, qspread::Error> {
        EffectivePacketState::with_norm(
            self.q, self.p, self.alpha, self.beta, self.gamma, self.k, self.norm,
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialSection {
    /// "zero" | "harmonic" | "poly"
    pub kind: String,
    pub omega: f64,
    /// Taylor coefficients V(x) = sum taylor[n] x^n / n!.
    pub taylor: [f64; 5],
}

impl Default for PotentialSection {
    fn default() -> Self {
        Self { kind: "zero".into(), omega: 1.0, taylor: [0.0; 5] }
    }
}

impl PotentialSection {
    pub fn to_potential(&self) -> Result<Potential<f64>, String> {
        match self.kind.as_str() {
            "zero" => Ok(Potential::Zero),
            "harmonic" => Ok(Potential::Harmonic { omega: self.omega }),
            "poly" => Ok(Potential::Polynomial { taylor: self.taylor }),
            other => Err(format!("unknown potential kind '{other}' (zero|harmonic|poly)")),
        }
    }

    /// Parse the flag syntax `zero`, `harmonic:OMEGA`, `poly:V0,V2,V4`.
    pub fn parse_flag(text: &str) -> Result<Self, String> {
        let mut section = Self::default();
        if text == "zero" {
            return Ok(section);
        }
        if let Some(rest) = text.strip_prefix("harmonic:") {
            section.kind = "harmonic".into();
            section.omega = rest
                .parse::<f64>()
                .map_err(|e| format!("bad harmonic frequency '{rest}': {e}"))?;
            return Ok(section);
        }
        if let Some(rest) = text.strip_prefix("poly:") {
            let parts: Vec<&str> = rest.split(',').collect();
            if parts.len() != 3 {
                return Err(format!("poly potential needs V0,V2,V4; got '{rest}'"));
            }
            section.kind = "poly".into();
            section.taylor = [0.0; 5];
            for (slot, part) in [0usize, 2, 4].into_iter().zip(&parts) {
                section.taylor[slot] = part
                    .parse::<f64>()
                    .map_err(|e| format!("bad coefficient '{part}': {e}"))?;
            }
            return Ok(section);
        }
        Err(format!("unknown potential '{text}' (zero|harmonic:W|poly:V0,V2,V4)"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(default, deny_unknown_fields)]
pub struct NonlinearSection {
    /// Pairs (n, kappa_n).
    pub kappa: Vec<(u32, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionSection {
    pub dt: f64,
    pub steps: usize,
    pub record_every: usize,
    /// 0 disables snapshots.
    pub snapshot_every: usize,
}

impl Default for EvolutionSection {
    fn default() -> Self {
        Self { dt: 1e-3, steps: 1000, record_every: 10, snapshot_every: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsSection {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        Self { hbar: 1.0, mass: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    /// Correlation sector N (1, 2 or 3).
    pub sector: usize,
    pub n_max: u32,
    /// Per-axis grid size; 0 picks the sector default (2D: 256, 3D: 64).
    pub grid_n: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self { sector: 2, n_max: 4, grid_n: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct AlgebraSection {
    /// Random test functions per sector.
    pub count: usize,
    pub seed: u64,
}

impl Default for AlgebraSection {
    fn default() -> Self {
        Self { count: 20, seed: 42 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceSection {
    pub norm_drift: f64,
    pub c_drift: f64,
    pub free_spread: f64,
    pub compare_alpha2: f64,
    pub commutator: f64,
    pub spectrum_value: f64,
    pub spectrum_residual: f64,
    pub kinematics: f64,
    pub energy_drift: f64,
}

impl Default for ToleranceSection {
    fn default() -> Self {
        Self {
            norm_drift: 1e-10,
            c_drift: 1e-6,
            free_spread: 1e-6,
            compare_alpha2: 1e-5,
            commutator: 1e-8,
            spectrum_value: 1e-6,
            spectrum_residual: 1e-6,
            kinematics: 1e-8,
            energy_drift: 1e-8,
        }
    }
}

/// Full description of one run. Serialize/Deserialize round-trips through
/// TOML; every field has a default so partial files work.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub grid: GridSection,
    pub packet: PacketSection,
    pub potential: PotentialSection,
    pub nonlinear: NonlinearSection,
    pub evolution: EvolutionSection,
    pub physics: PhysicsSection,
    pub spectrum: SpectrumSection,
    pub algebra: AlgebraSection,
    pub tolerances: ToleranceSection,
    /// Output directory; flag > file > QSPREAD_OUT > "qspread-out".
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Evolve,
            grid: GridSection::default(),
            packet: PacketSection::default(),
            potential: PotentialSection::default(),
            nonlinear: NonlinearSection::default(),
            evolution: EvolutionSection::default(),
            physics: PhysicsSection::default(),
            spectrum: SpectrumSection::default(),
            algebra: AlgebraSection::default(),
            tolerances: ToleranceSection::default(),
            out_dir: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("config parse error: {e}"))
    }

    pub fn from_toml_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Resolve the output directory: explicit value, then the environment
    /// default, then `qspread-out` in the working directory.
    pub fn resolved_out_dir(&self) -> PathBuf {
        if let Some(dir) = &self.out_dir {
            return dir.clone();
        }
        if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
            if !dir.is_empty() {
                return PathBuf::from(dir);
            }
        }
        PathBuf::from("qspread-out")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let config = RunConfig::default();
        let text = config.to_toml_string();
        let back = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg = RunConfig::from_toml_str(
            "experiment = \"spectrum\"\n[spectrum]\nsector = 3\nn_max = 2\n",
        )
        .unwrap();
        assert_eq!(cfg.experiment, Experiment::Spectrum);
        assert_eq!(cfg.spectrum.sector, 3);
        assert_eq!(cfg.grid, GridSection::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml_str("experiment = \"evolve\"\nbogus = 1\n").is_err());
    }

    #[test]
    fn potential_flag_syntax() {
        assert_eq!(PotentialSection::parse_flag("zero").unwrap().kind, "zero");
        let h = PotentialSection::parse_flag("harmonic:2.5").unwrap();
        assert_eq!(h.kind, "harmonic");
        assert_eq!(h.omega, 2.5);
        let p = PotentialSection::parse_flag("poly:1.0,0.5,0.25").unwrap();
        assert_eq!(p.taylor, [1.0, 0.0, 0.5, 0.0, 0.25]);
        assert!(PotentialSection::parse_flag("poly:1,2").is_err());
        assert!(PotentialSection::parse_flag("coulomb").is_err());
    }
}
