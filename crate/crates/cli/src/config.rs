//! Experiment configuration: flat `key = value` text with section headers.
//!
//! The format is deliberately diff-friendly so experiment configs can live
//! in version control. `render` emits a canonical form; parse -> render ->
//! parse is the identity.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use partseg_core::descriptors::DescriptorConfig;
use partseg_core::localhdp::HdpHyperparams;
use partseg_core::protocol::TeacherConfig;

/// Everything one experiment needs: descriptor parameters, model
/// hyperparameters, teacher settings, training options and paths.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub descriptor: DescriptorConfig,
    pub hyper: HdpHyperparams,
    pub teacher: TeacherConfig,
    /// Offline training passes over the dataset.
    pub epochs: usize,
    /// Train the argumentation layer on ground-truth part names.
    pub oracle_labels: bool,
    /// Minimum keypoint share for a predicted label to reach recognition.
    pub min_label_share: f64,
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub arguments: Option<PathBuf>,
    pub report_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            descriptor: DescriptorConfig::default(),
            hyper: HdpHyperparams::default(),
            teacher: TeacherConfig::default(),
            epochs: 2,
            oracle_labels: false,
            min_label_share: 0.15,
            dataset: None,
            checkpoint: None,
            arguments: None,
            report_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut config = ExperimentConfig::default();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("line {}: expected `key = value`, got {line:?}", idx + 1))?;
            let key = key.trim();
            let value = value.trim();
            config
                .apply(&section, key, value)
                .with_context(|| format!("line {}: bad value for {key:?}", idx + 1))?;
        }
        config.descriptor.validate()?;
        config.hyper.validate()?;
        config.teacher.validate()?;
        if !(0.0..1.0).contains(&config.min_label_share) {
            bail!("min_label_share must lie in [0, 1)");
        }
        Ok(config)
    }

    fn apply(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(value: &str) -> Result<T>
        where
            T::Err: std::error::Error + Send + Sync + 'static,
        {
            Ok(value.parse::<T>()?)
        }
        match (section, key) {
            ("", "seed") => self.seed = parse(value)?,
            ("descriptor", "spin_bins") => self.descriptor.spin_bins = parse(value)?,
            ("descriptor", "proj_bins") => self.descriptor.proj_bins = parse(value)?,
            ("descriptor", "epsilon_scale") => self.descriptor.epsilon_scale = parse(value)?,
            ("descriptor", "count_scale") => self.descriptor.count_scale = parse(value)?,
            ("descriptor", "voxel_leaf") => self.descriptor.voxel_leaf = parse(value)?,
            ("descriptor", "normal_neighbors") => {
                self.descriptor.normal_neighbors = parse(value)?
            }
            ("descriptor", "spin_only") => self.descriptor.spin_only = parse(value)?,
            ("hdp", "gamma") => self.hyper.gamma = parse(value)?,
            ("hdp", "alpha0") => self.hyper.alpha0 = parse(value)?,
            ("hdp", "eta") => self.hyper.eta = parse(value)?,
            ("hdp", "max_topics") => self.hyper.max_topics = parse(value)?,
            ("hdp", "max_tables") => self.hyper.max_tables = parse(value)?,
            ("hdp", "kappa") => self.hyper.kappa = parse(value)?,
            ("hdp", "tau0") => self.hyper.tau0 = parse(value)?,
            ("hdp", "batch_size") => self.hyper.batch_size = parse(value)?,
            ("teacher", "threshold") => self.teacher.threshold = parse(value)?,
            ("teacher", "stall_iterations") => self.teacher.stall_iterations = parse(value)?,
            ("teacher", "teach_count") => self.teacher.teach_count = parse(value)?,
            ("teacher", "window_factor") => self.teacher.window_factor = parse(value)?,
            ("train", "epochs") => self.epochs = parse(value)?,
            ("train", "oracle_labels") => self.oracle_labels = parse(value)?,
            ("train", "min_label_share") => self.min_label_share = parse(value)?,
            ("paths", "dataset") => self.dataset = Some(PathBuf::from(value)),
            ("paths", "checkpoint") => self.checkpoint = Some(PathBuf::from(value)),
            ("paths", "arguments") => self.arguments = Some(PathBuf::from(value)),
            ("paths", "report_dir") => self.report_dir = Some(PathBuf::from(value)),
            _ => bail!("unknown key {key:?} in section {section:?}"),
        }
        Ok(())
    }

    /// Canonical text form.
    pub fn render(&self) -> String {
        let mut out = String::new();
        writeln!(out, "seed = {}", self.seed).unwrap();
        writeln!(out).unwrap();
        writeln!(out, "[descriptor]").unwrap();
        writeln!(out, "spin_bins = {}", self.descriptor.spin_bins).unwrap();
        writeln!(out, "proj_bins = {}", self.descriptor.proj_bins).unwrap();
        writeln!(out, "epsilon_scale = {}", self.descriptor.epsilon_scale).unwrap();
        writeln!(out, "count_scale = {}", self.descriptor.count_scale).unwrap();
        writeln!(out, "voxel_leaf = {}", self.descriptor.voxel_leaf).unwrap();
        writeln!(out, "normal_neighbors = {}", self.descriptor.normal_neighbors).unwrap();
        writeln!(out, "spin_only = {}", self.descriptor.spin_only).unwrap();
        writeln!(out).unwrap();
        writeln!(out, "[hdp]").unwrap();
        writeln!(out, "gamma = {}", self.hyper.gamma).unwrap();
        writeln!(out, "alpha0 = {}", self.hyper.alpha0).unwrap();
        writeln!(out, "eta = {}", self.hyper.eta).unwrap();
        writeln!(out, "max_topics = {}", self.hyper.max_topics).unwrap();
        writeln!(out, "max_tables = {}", self.hyper.max_tables).unwrap();
        writeln!(out, "kappa = {}", self.hyper.kappa).unwrap();
        writeln!(out, "tau0 = {}", self.hyper.tau0).unwrap();
        writeln!(out, "batch_size = {}", self.hyper.batch_size).unwrap();
        writeln!(out).unwrap();
        writeln!(out, "[teacher]").unwrap();
        writeln!(out, "threshold = {}", self.teacher.threshold).unwrap();
        writeln!(out, "stall_iterations = {}", self.teacher.stall_iterations).unwrap();
        writeln!(out, "teach_count = {}", self.teacher.teach_count).unwrap();
        writeln!(out, "window_factor = {}", self.teacher.window_factor).unwrap();
        writeln!(out).unwrap();
        writeln!(out, "[train]").unwrap();
        writeln!(out, "epochs = {}", self.epochs).unwrap();
        writeln!(out, "oracle_labels = {}", self.oracle_labels).unwrap();
        writeln!(out, "min_label_share = {}", self.min_label_share).unwrap();
        writeln!(out).unwrap();
        writeln!(out, "[paths]").unwrap();
        if let Some(p) = &self.dataset {
            writeln!(out, "dataset = {}", p.display()).unwrap();
        }
        if let Some(p) = &self.checkpoint {
            writeln!(out, "checkpoint = {}", p.display()).unwrap();
        }
        if let Some(p) = &self.arguments {
            writeln!(out, "arguments = {}", p.display()).unwrap();
        }
        if let Some(p) = &self.report_dir {
            writeln!(out, "report_dir = {}", p.display()).unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let config = ExperimentConfig::default();
        let text = config.render();
        let parsed = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(parsed, config);
        assert_eq!(parsed.render(), text);
    }

    #[test]
    fn round_trip_preserves_every_field() {
        let mut config = ExperimentConfig::default();
        config.seed = 99;
        config.descriptor.spin_bins = 12;
        config.descriptor.voxel_leaf = 0.07;
        config.descriptor.spin_only = true;
        config.hyper.eta = 0.025;
        config.hyper.max_topics = 14;
        config.hyper.max_tables = 7;
        config.teacher.threshold = 0.6;
        config.epochs = 5;
        config.oracle_labels = true;
        config.min_label_share = 0.2;
        config.dataset = Some(PathBuf::from("/data/things"));
        config.checkpoint = Some(PathBuf::from("model.ckpt"));
        let parsed = ExperimentConfig::parse(&config.render()).unwrap();
        assert_eq!(parsed, config);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# a comment\n\nseed = 3\n[hdp]\n# another\neta = 0.5\n";
        let parsed = ExperimentConfig::parse(text).unwrap();
        assert_eq!(parsed.seed, 3);
        assert_eq!(parsed.hyper.eta, 0.5);
    }

    #[test]
    fn unknown_keys_and_bad_values_error() {
        assert!(ExperimentConfig::parse("mystery = 1\n").is_err());
        assert!(ExperimentConfig::parse("[hdp]\neta = lots\n").is_err());
        assert!(ExperimentConfig::parse("[hdp]\neta = -1\n").is_err());
        assert!(ExperimentConfig::parse("[teacher]\nthreshold = 2\n").is_err());
    }
}
