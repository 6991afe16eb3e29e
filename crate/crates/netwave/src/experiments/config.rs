//! Experiment configuration and the flat key-value config file parser.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::network::{GeneratorConfig, DEFAULT_MERGE_TOL_FACTOR, DEFAULT_SEGMENT_LENGTH};
use crate::operators::{ElasticParams, PairConvention};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Homogeneous wave with eigenmode initial data and closed-form solution.
    Eigenmode,
    /// Inhomogeneous scalar wave against an in-run fine reference.
    ScalarInhomogeneous,
    /// Inhomogeneous elastic wave against an in-run fine reference.
    Elastic,
}

impl ExperimentKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "eigenmode" => Ok(ExperimentKind::Eigenmode),
            "scalar" | "scalar_inhomogeneous" => Ok(ExperimentKind::ScalarInhomogeneous),
            "elastic" => Ok(ExperimentKind::Elastic),
            other => Err(Error::Config(format!("unknown experiment {other:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Eigenmode => "eigenmode",
            ExperimentKind::ScalarInhomogeneous => "scalar_inhomogeneous",
            ExperimentKind::Elastic => "elastic",
        }
    }

    pub fn default_tau(&self) -> f64 {
        match self {
            ExperimentKind::Eigenmode => 1e-3,
            ExperimentKind::ScalarInhomogeneous => 2e-3,
            ExperimentKind::Elastic => 1e-2,
        }
    }

    /// Final time; the eigenmode horizon defaults to half a period of the
    /// chosen mode and is resolved at run time.
    pub fn default_horizon(&self) -> Option<f64> {
        match self {
            ExperimentKind::Eigenmode => None,
            ExperimentKind::ScalarInhomogeneous => Some(2.0),
            ExperimentKind::Elastic => Some(10.0),
        }
    }
}

#[derive(Debug, Clone)]
pub enum NetworkSource {
    Generate(GeneratorConfig),
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub network: NetworkSource,
    /// Mesh levels i, H = 2^-i.
    pub levels: Vec<u32>,
    /// Localization override; default k = log2(1/H) = level.
    pub k_override: Option<usize>,
    pub tau: f64,
    pub horizon: Option<f64>,
    pub gamma_range: (f64, f64),
    pub gamma_seed: u64,
    pub elastic: ElasticParams,
    pub kb_pairs: PairConvention,
    pub averaging: bool,
}

/// Desk-scale defaults: quadratic node growth in total length makes the
/// paper-scale target impractical for routine runs, so the default network
/// target length is 150 (about 5-10k nodes) and the elastic variant uses 100.
impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        let total_length = match kind {
            ExperimentKind::Elastic => 100.0,
            _ => 150.0,
        };
        let levels = match kind {
            ExperimentKind::Elastic => vec![2, 3, 4],
            _ => vec![2, 3, 4],
        };
        ExperimentConfig {
            kind,
            network: NetworkSource::Generate(GeneratorConfig::new(total_length, 1)),
            levels,
            k_override: None,
            tau: kind.default_tau(),
            horizon: kind.default_horizon(),
            gamma_range: (0.1, 0.9),
            gamma_seed: 1,
            elastic: ElasticParams::new(210e9, 5e-4).expect("positive parameters"),
            kb_pairs: PairConvention::Ordered,
            averaging: true,
        }
    }

    pub fn k_for_level(&self, level: u32) -> usize {
        self.k_override.unwrap_or(level as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::Config("at least one mesh level is required".into()));
        }
        if self.levels.iter().any(|&l| l == 0 || l > 12) {
            return Err(Error::Config("mesh levels must lie in 1..=12".into()));
        }
        if !(self.tau > 0.0) {
            return Err(Error::Config("tau must be positive".into()));
        }
        if let Some(t) = self.horizon {
            if !(t > 0.0) {
                return Err(Error::Config("T must be positive".into()));
            }
        }
        if !(self.gamma_range.0 > 0.0 && self.gamma_range.1 > self.gamma_range.0) {
            return Err(Error::Config("gamma range must satisfy 0 < min < max".into()));
        }
        if let Some(k) = self.k_override {
            if k == 0 {
                return Err(Error::Config("k must be at least 1".into()));
            }
        }
        if let NetworkSource::Generate(g) = &self.network {
            g.validate()?;
        }
        Ok(())
    }

    /// Applies `key = value` settings from the flat config text.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected key = value, got {raw:?}",
                    ln + 1
                )));
            };
            self.apply(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("cannot parse {what} from {value:?}"));
        match key {
            "experiment" => self.kind = ExperimentKind::parse(value)?,
            "network" => match value {
                "generate" => {
                    if !matches!(self.network, NetworkSource::Generate(_)) {
                        self.network =
                            NetworkSource::Generate(GeneratorConfig::new(150.0, 1));
                    }
                }
                other => self.network = NetworkSource::File(PathBuf::from(other)),
            },
            "total_length" => {
                let v: f64 = value.parse().map_err(|_| bad("total_length"))?;
                self.generator_mut()?.total_length = v;
            }
            "seed" => {
                let v: u64 = value.parse().map_err(|_| bad("seed"))?;
                self.generator_mut()?.seed = v;
                self.gamma_seed = v;
            }
            "segment_length" | "r" => {
                let v: f64 = value.parse().map_err(|_| bad("segment_length"))?;
                self.generator_mut()?.segment_length = v;
            }
            "merge_tol_factor" => {
                let v: f64 = value.parse().map_err(|_| bad("merge_tol_factor"))?;
                self.generator_mut()?.merge_tol_factor = v;
            }
            "H" | "h" => {
                let mut levels = Vec::new();
                for part in value.split(',') {
                    levels.push(parse_level(part.trim())?);
                }
                self.levels = levels;
            }
            "k" => self.k_override = Some(value.parse().map_err(|_| bad("k"))?),
            "tau" => self.tau = value.parse().map_err(|_| bad("tau"))?,
            "T" | "t_final" => self.horizon = Some(value.parse().map_err(|_| bad("T"))?),
            "gamma_min" => self.gamma_range.0 = value.parse().map_err(|_| bad("gamma_min"))?,
            "gamma_max" => self.gamma_range.1 = value.parse().map_err(|_| bad("gamma_max"))?,
            "gamma_seed" => self.gamma_seed = value.parse().map_err(|_| bad("gamma_seed"))?,
            "youngs_modulus" => {
                self.elastic =
                    ElasticParams::new(value.parse().map_err(|_| bad("youngs_modulus"))?, self.elastic.wire_radius)?;
            }
            "wire_radius" => {
                self.elastic = ElasticParams::new(
                    self.elastic.youngs_modulus,
                    value.parse().map_err(|_| bad("wire_radius"))?,
                )?;
            }
            "kb_pairs" => {
                self.kb_pairs = match value {
                    "ordered" => PairConvention::Ordered,
                    "unordered" => PairConvention::Unordered,
                    _ => return Err(bad("kb_pairs (ordered|unordered)")),
                };
            }
            "averaging" => {
                self.averaging = match value {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    _ => return Err(bad("averaging (true|false)")),
                };
            }
            other => {
                return Err(Error::Config(format!("unknown config key {other:?}")));
            }
        }
        Ok(())
    }

    fn generator_mut(&mut self) -> Result<&mut GeneratorConfig> {
        match &mut self.network {
            NetworkSource::Generate(g) => Ok(g),
            NetworkSource::File(_) => Err(Error::Config(
                "generator settings apply only to network = generate".into(),
            )),
        }
    }

    /// Deterministic manifest of the resolved configuration.
    pub fn manifest(&self) -> Vec<(String, String)> {
        let mut kv = vec![("experiment".into(), self.kind.name().to_string())];
        match &self.network {
            NetworkSource::Generate(g) => {
                kv.push(("network".into(), "generate".into()));
                kv.push(("segment_length".into(), format!("{}", g.segment_length)));
                kv.push(("total_length".into(), format!("{}", g.total_length)));
                kv.push(("merge_tol_factor".into(), format!("{}", g.merge_tol_factor)));
                kv.push(("seed".into(), format!("{}", g.seed)));
            }
            NetworkSource::File(p) => kv.push(("network".into(), p.display().to_string())),
        }
        kv.push((
            "H".into(),
            self.levels
                .iter()
                .map(|l| format!("2^-{l}"))
                .collect::<Vec<_>>()
                .join(","),
        ));
        kv.push((
            "k".into(),
            match self.k_override {
                Some(k) => format!("{k}"),
                None => "log2(1/H)".into(),
            },
        ));
        kv.push(("tau".into(), format!("{}", self.tau)));
        if let Some(t) = self.horizon {
            kv.push(("T".into(), format!("{t}")));
        }
        match self.kind {
            ExperimentKind::Elastic => {
                kv.push(("youngs_modulus".into(), format!("{}", self.elastic.youngs_modulus)));
                kv.push(("wire_radius".into(), format!("{}", self.elastic.wire_radius)));
                kv.push((
                    "kb_pairs".into(),
                    match self.kb_pairs {
                        PairConvention::Ordered => "ordered".into(),
                        PairConvention::Unordered => "unordered".into(),
                    },
                ));
            }
            _ => {
                kv.push(("gamma_min".into(), format!("{}", self.gamma_range.0)));
                kv.push(("gamma_max".into(), format!("{}", self.gamma_range.1)));
                kv.push(("gamma_seed".into(), format!("{}", self.gamma_seed)));
            }
        }
        kv.push(("averaging".into(), format!("{}", self.averaging)));
        kv
    }
}

/// Accepts `2^-3`, `0.125`, or a bare level integer `3`.
pub fn parse_level(s: &str) -> Result<u32> {
    if let Some(rest) = s.strip_prefix("2^-") {
        return rest
            .parse()
            .map_err(|_| Error::Config(format!("bad mesh size {s:?}")));
    }
    if let Ok(level) = s.parse::<u32>() {
        return Ok(level);
    }
    let h: f64 = s
        .parse()
        .map_err(|_| Error::Config(format!("bad mesh size {s:?}")))?;
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::Config(format!("mesh size {h} outside (0, 1)")));
    }
    let level = -h.log2();
    let rounded = level.round();
    if (level - rounded).abs() > 1e-9 {
        return Err(Error::Config(format!("mesh size {h} is not a power of two")));
    }
    Ok(rounded as u32)
}

/// Default segment length and merge tolerance re-exported for CLI help.
pub fn default_generator(total_length: f64, seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        segment_length: DEFAULT_SEGMENT_LENGTH,
        total_length,
        merge_tol_factor: DEFAULT_MERGE_TOL_FACTOR,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_level_accepts_all_forms() {
        assert_eq!(parse_level("2^-4").unwrap(), 4);
        assert_eq!(parse_level("0.0625").unwrap(), 4);
        assert_eq!(parse_level("3").unwrap(), 3);
        assert!(parse_level("0.3").is_err());
    }

    #[test]
    fn config_text_round_trip() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::Eigenmode);
        cfg.apply_text(
            "# comment\nexperiment = scalar\ntotal_length = 80\nseed = 7\nH = 2^-2,2^-3\ntau = 0.004\n",
        )
        .unwrap();
        assert_eq!(cfg.kind, ExperimentKind::ScalarInhomogeneous);
        assert_eq!(cfg.levels, vec![2, 3]);
        assert_eq!(cfg.tau, 0.004);
        assert_eq!(cfg.gamma_seed, 7);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::Eigenmode);
        assert!(cfg.apply_text("bogus = 1\n").is_err());
        assert!(cfg.apply_text("tau 0.001\n").is_err());
    }

    #[test]
    fn defaults_are_valid() {
        for kind in [
            ExperimentKind::Eigenmode,
            ExperimentKind::ScalarInhomogeneous,
            ExperimentKind::Elastic,
        ] {
            ExperimentConfig::new(kind).validate().unwrap();
        }
    }
}
