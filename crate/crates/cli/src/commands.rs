//! Command implementations behind the CLI surface.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context, Result};

use partseg_core::abl::{explain, ArgumentationModel};
use partseg_core::dataset::{load_dataset, Dataset};
use partseg_core::descriptors::point_documents;
use partseg_core::localhdp::{
    load_checkpoint, save_checkpoint, PartRegistry, PartScorer,
};
use partseg_core::pointcloud::{load_cloud, occlude, save_cloud, CloudFormat};
use partseg_core::protocol::{
    dominant_labels, format_report, format_trajectory_csv, offline_train, prepare_dataset,
    run_open_ended, HdpLearner, PreparedObject, TeacherConfig,
};
use partseg_core::synthetic::generate_dataset;

use crate::config::ExperimentConfig;

fn load_config_dataset(config: &ExperimentConfig, dataset_arg: Option<&Path>) -> Result<Dataset> {
    let root = dataset_arg
        .map(|p| p.to_path_buf())
        .or_else(|| config.dataset.clone())
        .ok_or_else(|| anyhow!("no dataset: pass a path or set [paths] dataset in the config"))?;
    Ok(load_dataset(&root)?)
}

fn prepare(config: &ExperimentConfig, dataset: &Dataset) -> Result<Vec<PreparedObject>> {
    Ok(prepare_dataset(dataset, &config.descriptor)?)
}

/// Segment one cloud with a trained checkpoint; emits one
/// `x y z predicted_label` line per keypoint.
pub fn cmd_segment(
    config: &ExperimentConfig,
    input: &Path,
    checkpoint: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let checkpoint_path = checkpoint
        .map(|p| p.to_path_buf())
        .or_else(|| config.checkpoint.clone())
        .ok_or_else(|| anyhow!("no checkpoint: pass --checkpoint or set [paths] checkpoint"))?;
    let registry = load_checkpoint(&checkpoint_path)?;
    let cloud = load_cloud(input, CloudFormat::from_extension(input))?;
    let segmentation = partseg_core::localhdp::segment_object(&registry, &cloud, &config.descriptor)?;

    let mut text = String::new();
    for (point, label) in segmentation
        .keypoints
        .points
        .iter()
        .zip(&segmentation.labels)
    {
        text.push_str(&format!("{} {} {} {label}\n", point.x, point.y, point.z));
    }
    write_output(out, &text)
}

/// Offline training over an annotated dataset; writes a checkpoint and
/// optionally an argument store.
pub fn cmd_train(
    config: &ExperimentConfig,
    dataset_arg: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let dataset = load_config_dataset(config, dataset_arg)?;
    let prepared = prepare(config, &dataset)?;

    let mut registry = PartRegistry::new(
        config.hyper.clone(),
        config.descriptor.full_vocabulary_size(),
    )?;
    let epoch_bounds = offline_train(&mut registry, &prepared, config.epochs, config.seed)?;
    for (epoch, bound) in epoch_bounds.iter().enumerate() {
        eprintln!("epoch {epoch}: mean document bound {bound}");
    }

    let checkpoint_path = out
        .map(|p| p.to_path_buf())
        .or_else(|| config.checkpoint.clone())
        .ok_or_else(|| anyhow!("no output: pass --out or set [paths] checkpoint"))?;
    save_checkpoint(&registry, &checkpoint_path)?;
    eprintln!(
        "wrote checkpoint with {} parts to {}",
        registry.len(),
        checkpoint_path.display()
    );

    if let Some(arguments_path) = &config.arguments {
        let scorer = PartScorer::new(&registry)?;
        let mut abl = ArgumentationModel::new(2);
        for object in &prepared {
            let labels: BTreeSet<String> = if config.oracle_labels {
                object.distinct_parts.clone()
            } else {
                let mut predicted = BTreeSet::new();
                for doc in &object.documents {
                    predicted.insert(scorer.predict(doc)?.label);
                }
                predicted
            };
            abl.train(&labels, &object.category)?;
        }
        fs::write(arguments_path, abl.export())
            .with_context(|| format!("cannot write {}", arguments_path.display()))?;
        eprintln!(
            "wrote {} arguments to {}",
            abl.len(),
            arguments_path.display()
        );
    }
    Ok(())
}

/// Simulated-teacher evaluation; writes `report.txt` and `trajectory.csv`.
pub fn cmd_openended(config: &ExperimentConfig, out: Option<&Path>) -> Result<()> {
    let dataset = load_config_dataset(config, None)?;
    let prepared = prepare(config, &dataset)?;

    let registry = PartRegistry::new(
        config.hyper.clone(),
        config.descriptor.full_vocabulary_size(),
    )?;
    let mut learner = HdpLearner::new(registry, config.seed);
    let teacher = TeacherConfig {
        seed: config.seed,
        ..config.teacher.clone()
    };
    let report = run_open_ended(&prepared, &teacher, &mut learner)?;

    let dir = out
        .map(|p| p.to_path_buf())
        .or_else(|| config.report_dir.clone())
        .ok_or_else(|| anyhow!("no report dir: pass --out or set [paths] report_dir"))?;
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    fs::write(dir.join("report.txt"), format_report(&report))?;
    fs::write(dir.join("trajectory.csv"), format_trajectory_csv(&report))?;
    println!(
        "learned {} parts, {} corrections, stop: {}",
        report.learned_parts,
        report.correction_iterations,
        report.stop_reason.as_str()
    );
    Ok(())
}

/// Rotate a cloud uniformly at random and cut it along the x-axis.
pub fn cmd_occlude(input: &Path, output: &Path, seed: u64) -> Result<()> {
    let format = CloudFormat::from_extension(input);
    let cloud = load_cloud(input, format)?;
    let occluded = occlude(&cloud, seed)?;
    save_cloud(&occluded, output, format)?;
    eprintln!(
        "kept {} of {} points after the cut",
        occluded.len(),
        cloud.len()
    );
    Ok(())
}

/// Segment a cloud, recognize its category and print the explanation.
pub fn cmd_recognize(
    config: &ExperimentConfig,
    input: &Path,
    checkpoint: Option<&Path>,
    arguments: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let checkpoint_path = checkpoint
        .map(|p| p.to_path_buf())
        .or_else(|| config.checkpoint.clone())
        .ok_or_else(|| anyhow!("no checkpoint: pass --checkpoint or set [paths] checkpoint"))?;
    let arguments_path = arguments
        .map(|p| p.to_path_buf())
        .or_else(|| config.arguments.clone())
        .ok_or_else(|| anyhow!("no argument store: pass --arguments or set [paths] arguments"))?;

    let registry = load_checkpoint(&checkpoint_path)?;
    let mut abl = ArgumentationModel::new(2);
    let store_text = fs::read_to_string(&arguments_path)
        .with_context(|| format!("cannot read {}", arguments_path.display()))?;
    abl.import(&store_text)?;

    let cloud = load_cloud(input, CloudFormat::from_extension(input))?;
    let set = point_documents(&cloud, &config.descriptor)?;
    let scorer = PartScorer::new(&registry)?;
    let mut tally: BTreeMap<String, usize> = BTreeMap::new();
    for doc in &set.documents {
        *tally.entry(scorer.predict(doc)?.label).or_insert(0) += 1;
    }
    let labels = dominant_labels(&tally, config.min_label_share);

    let (category, explanation) = abl.predict(&labels)?;
    let text = format!("{category}\n{}\n", explain(&explanation));
    write_output(out, &text)
}

/// Generate the synthetic three-category dataset.
pub fn cmd_gen_data(out_dir: &Path, objects: usize, points: usize, seed: u64) -> Result<()> {
    let dataset = generate_dataset(objects, points, seed);
    partseg_core::dataset::write_dataset(&dataset, out_dir)?;
    eprintln!(
        "wrote {} objects across {} categories to {}",
        dataset.objects.len(),
        dataset.part_names.len(),
        out_dir.display()
    );
    Ok(())
}

/// Print the effective configuration in canonical form; handy for
/// bootstrapping a config file to edit.
pub fn cmd_config(config: &ExperimentConfig, out: Option<&Path>) -> Result<()> {
    write_output(out, &config.render())
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
