//! Open-ended evaluation: simulated teacher, part-wise mIoU and the
//! occlusion experiment.
//!
//! The teacher walks a shuffled dataset, introduces one new part at a time
//! by presenting a few objects that contain it, then keeps testing the
//! learner on objects whose parts are all known. Segmentation quality is
//! tracked as part-wise mIoU over a sliding window whose span grows with the
//! number of learned parts; crossing the threshold triggers the next
//! introduction, and an object segmented below the threshold earns one round
//! of corrective re-training. A run ends when every part is taught or when
//! the threshold has not been crossed for a fixed number of test iterations.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::abl::ArgumentationModel;
use crate::dataset::Dataset;
use crate::descriptors::{point_documents, DescriptorConfig, PointDocument};
use crate::error::{Error, Result};
use crate::localhdp::{PartRegistry, PartScorer};
use crate::pointcloud::{occlude, PointCloud};

/// Simulated-teacher parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherConfig {
    /// Window mIoU that must be exceeded before a new part is introduced.
    pub threshold: f64,
    /// Test iterations without crossing the threshold before giving up.
    pub stall_iterations: usize,
    /// Objects presented when teaching a new part.
    pub teach_count: usize,
    /// Window span per learned part.
    pub window_factor: usize,
    pub seed: u64,
}

impl Default for TeacherConfig {
    fn default() -> Self {
        TeacherConfig {
            threshold: 0.75,
            stall_iterations: 100,
            teach_count: 3,
            window_factor: 3,
            seed: 0,
        }
    }
}

impl TeacherConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidHyperparameter(
                "teacher threshold must lie in (0, 1)".into(),
            ));
        }
        if self.stall_iterations == 0 || self.teach_count == 0 || self.window_factor == 0 {
            return Err(Error::InvalidHyperparameter(
                "teacher counts must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Why an open-ended run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    AllTaught,
    Stalled,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::AllTaught => "all_taught",
            StopReason::Stalled => "stalled",
        }
    }
}

/// One test iteration of the trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub iteration: usize,
    pub learned_parts: usize,
    pub window_miou: f64,
}

/// Metrics of one open-ended run.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolReport {
    pub learned_parts: usize,
    /// Test iterations that triggered corrective feedback.
    pub correction_iterations: usize,
    /// Training instances per learned part.
    pub avg_instances_per_part: f64,
    pub miou_trajectory: Vec<TrajectoryPoint>,
    pub final_miou: f64,
    pub stop_reason: StopReason,
    /// All test presentations, corrected or not.
    pub total_presentations: usize,
    /// Objects used for teaching plus corrective re-trains.
    pub instances_taught: usize,
}

/// Part-wise mean intersection over union.
///
/// For every part in `parts`, IoU is the number of positions labelled with
/// the part in both vectors over the number labelled in either; parts absent
/// from both are skipped.
pub fn part_miou<L: Ord>(pred: &[L], gt: &[L], parts: &BTreeSet<L>) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch(pred.len(), gt.len()));
    }
    let mut total = 0.0;
    let mut counted = 0usize;
    for part in parts {
        let mut intersection = 0usize;
        let mut union = 0usize;
        for (p, g) in pred.iter().zip(gt) {
            let in_pred = p == part;
            let in_gt = g == part;
            if in_pred && in_gt {
                intersection += 1;
            }
            if in_pred || in_gt {
                union += 1;
            }
        }
        if union > 0 {
            total += intersection as f64 / union as f64;
            counted += 1;
        }
    }
    if counted == 0 {
        return Err(Error::EmptyUnion);
    }
    Ok(total / counted as f64)
}

/// An object with its descriptor stage precomputed: keypoints, resolved
/// ground-truth part names and one document per keypoint.
#[derive(Debug, Clone)]
pub struct PreparedObject {
    pub id: String,
    pub category: String,
    pub keypoints: PointCloud,
    /// Ground-truth part name per keypoint.
    pub part_names: Vec<String>,
    pub documents: Vec<PointDocument>,
    pub distinct_parts: BTreeSet<String>,
}

/// Run the descriptor stage once per object. Descriptors depend only on the
/// configuration, so the teacher loop never has to recompute them.
pub fn prepare_dataset(
    dataset: &Dataset,
    config: &DescriptorConfig,
) -> Result<Vec<PreparedObject>> {
    let mut prepared = Vec::with_capacity(dataset.objects.len());
    for object in &dataset.objects {
        prepared.push(prepare_object(
            dataset,
            &object.id,
            &object.category,
            &object.cloud,
            config,
        )?);
    }
    Ok(prepared)
}

fn prepare_object(
    dataset: &Dataset,
    id: &str,
    category: &str,
    cloud: &PointCloud,
    config: &DescriptorConfig,
) -> Result<PreparedObject> {
    let set = point_documents(cloud, config)?;
    let labels = set
        .keypoints
        .part_labels
        .as_ref()
        .ok_or(Error::MissingAnnotations)?;
    let part_names: Vec<String> = labels
        .iter()
        .map(|&label| dataset.part_name(category, label))
        .collect();
    let distinct_parts: BTreeSet<String> = part_names.iter().cloned().collect();
    Ok(PreparedObject {
        id: id.to_string(),
        category: category.to_string(),
        keypoints: set.keypoints,
        part_names,
        documents: set.documents,
        distinct_parts,
    })
}

/// What the teacher drives: anything that can learn parts from presented
/// objects and segment unseen ones.
pub trait Learner {
    /// Train on the given objects for one named part.
    fn teach_part(&mut self, part: &str, objects: &[&PreparedObject]) -> Result<()>;

    /// Corrective feedback: one more training round on a mis-segmented
    /// object using its ground-truth assignments, restricted to parts that
    /// have been introduced.
    fn correct(&mut self, object: &PreparedObject, learned: &BTreeSet<String>) -> Result<()>;

    /// Predict a part name per keypoint.
    fn segment(&self, object: &PreparedObject) -> Result<Vec<String>>;
}

/// The part-model learner used by the real pipeline.
pub struct HdpLearner {
    pub registry: PartRegistry,
    seed: u64,
}

impl HdpLearner {
    pub fn new(registry: PartRegistry, seed: u64) -> Self {
        HdpLearner { registry, seed }
    }

    fn ensure_part(&mut self, part: &str) -> Result<()> {
        if !self.registry.contains(part) {
            let next_seed = self.seed.wrapping_add(self.registry.len() as u64);
            self.registry.new_part(part, next_seed)?;
        }
        Ok(())
    }

    fn update_with_documents(&mut self, part: &str, docs: &[PointDocument]) -> Result<()> {
        let batch = self.registry.hyper().batch_size;
        for chunk in docs.chunks(batch) {
            self.registry.update_minibatch(part, chunk)?;
        }
        Ok(())
    }
}

impl Learner for HdpLearner {
    fn teach_part(&mut self, part: &str, objects: &[&PreparedObject]) -> Result<()> {
        self.ensure_part(part)?;
        let mut docs = Vec::new();
        for object in objects {
            for (doc, name) in object.documents.iter().zip(&object.part_names) {
                if name == part {
                    docs.push(doc.clone());
                }
            }
        }
        if docs.is_empty() {
            return Err(Error::MissingAnnotations);
        }
        self.update_with_documents(part, &docs)
    }

    fn correct(&mut self, object: &PreparedObject, learned: &BTreeSet<String>) -> Result<()> {
        let mut by_part: BTreeMap<&str, Vec<PointDocument>> = BTreeMap::new();
        for (doc, name) in object.documents.iter().zip(&object.part_names) {
            if learned.contains(name) {
                by_part.entry(name).or_default().push(doc.clone());
            }
        }
        for (part, docs) in by_part {
            let part = part.to_string();
            self.ensure_part(&part)?;
            self.update_with_documents(&part, &docs)?;
        }
        Ok(())
    }

    fn segment(&self, object: &PreparedObject) -> Result<Vec<String>> {
        let scorer = PartScorer::new(&self.registry)?;
        object
            .documents
            .iter()
            .map(|doc| scorer.predict(doc).map(|p| p.label))
            .collect()
    }
}

/// Run the simulated-teacher protocol. Deterministic per seed, including the
/// shuffle, the choice of teaching and test objects and every metric.
pub fn run_open_ended(
    objects: &[PreparedObject],
    config: &TeacherConfig,
    learner: &mut dyn Learner,
) -> Result<ProtocolReport> {
    config.validate()?;
    if objects.is_empty() {
        return Err(Error::DatasetTooSmall("no prepared objects".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..objects.len()).collect();
    order.shuffle(&mut rng);

    // Parts queue up in first-appearance order over the shuffled instances.
    let mut queue: VecDeque<String> = VecDeque::new();
    let mut queued: BTreeSet<String> = BTreeSet::new();
    for &idx in &order {
        for name in &objects[idx].part_names {
            if queued.insert(name.clone()) {
                queue.push_back(name.clone());
            }
        }
    }

    let mut learned: BTreeSet<String> = BTreeSet::new();
    let mut instances_taught = 0usize;
    let mut corrections = 0usize;
    let mut presentations = 0usize;
    let mut window: VecDeque<f64> = VecDeque::new();
    let mut trajectory = Vec::new();
    let mut since_introduction = 0usize;
    let mut iteration = 0usize;

    let teach = |part: String,
                     learned: &mut BTreeSet<String>,
                     instances: &mut usize,
                     rng: &mut ChaCha8Rng,
                     learner: &mut dyn Learner|
     -> Result<()> {
        let mut holders: Vec<&PreparedObject> = order
            .iter()
            .map(|&idx| &objects[idx])
            .filter(|o| o.distinct_parts.contains(&part))
            .collect();
        holders.shuffle(rng);
        holders.truncate(config.teach_count);
        if holders.is_empty() {
            return Err(Error::MissingAnnotations);
        }
        learner.teach_part(&part, &holders)?;
        *instances += holders.len();
        learned.insert(part);
        Ok(())
    };

    let first = queue.pop_front().expect("annotated dataset has parts");
    teach(first, &mut learned, &mut instances_taught, &mut rng, learner)?;

    let stop_reason = loop {
        // Only objects whose parts are all known can be tested fairly; if
        // none exists yet the teacher keeps introducing parts.
        let testable: Vec<&PreparedObject> = order
            .iter()
            .map(|&idx| &objects[idx])
            .filter(|o| o.distinct_parts.is_subset(&learned))
            .collect();
        if testable.is_empty() {
            match queue.pop_front() {
                Some(part) => {
                    teach(part, &mut learned, &mut instances_taught, &mut rng, learner)?;
                    since_introduction = 0;
                    continue;
                }
                None => unreachable!("every part taught implies every object testable"),
            }
        }

        let object = testable[rng.random_range(0..testable.len())];
        let predicted = learner.segment(object)?;
        let miou = part_miou(&predicted, &object.part_names, &learned)?;
        presentations += 1;
        iteration += 1;

        window.push_back(miou);
        let span = config.window_factor * learned.len();
        while window.len() > span {
            window.pop_front();
        }
        let window_mean = window.iter().sum::<f64>() / window.len() as f64;
        trajectory.push(TrajectoryPoint {
            iteration,
            learned_parts: learned.len(),
            window_miou: window_mean,
        });

        if miou < config.threshold {
            learner.correct(object, &learned)?;
            corrections += 1;
            instances_taught += 1;
        }
        since_introduction += 1;

        if window_mean > config.threshold {
            match queue.pop_front() {
                Some(part) => {
                    teach(part, &mut learned, &mut instances_taught, &mut rng, learner)?;
                    since_introduction = 0;
                }
                None => break StopReason::AllTaught,
            }
        } else if since_introduction >= config.stall_iterations {
            break StopReason::Stalled;
        }
    };

    let final_miou = trajectory.last().map_or(0.0, |p| p.window_miou);
    Ok(ProtocolReport {
        learned_parts: learned.len(),
        correction_iterations: corrections,
        avg_instances_per_part: instances_taught as f64 / learned.len() as f64,
        miou_trajectory: trajectory,
        final_miou,
        stop_reason,
        total_presentations: presentations,
        instances_taught,
    })
}

/// Offline training: register every annotated part and stream all documents
/// through minibatch updates, `epochs` passes in shuffled order. Returns the
/// mean per-document bound of each epoch.
pub fn offline_train(
    registry: &mut PartRegistry,
    objects: &[PreparedObject],
    epochs: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut by_part: BTreeMap<String, Vec<&PointDocument>> = BTreeMap::new();
    for object in objects {
        for (doc, name) in object.documents.iter().zip(&object.part_names) {
            by_part.entry(name.clone()).or_default().push(doc);
        }
    }
    if by_part.is_empty() {
        return Err(Error::MissingAnnotations);
    }
    for (i, part) in by_part.keys().enumerate() {
        if !registry.contains(part) {
            registry.new_part(part, seed.wrapping_add(i as u64))?;
        }
    }

    let batch = registry.hyper().batch_size;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut epoch_bounds = Vec::with_capacity(epochs);
    for _ in 0..epochs.max(1) {
        let mut bound_sum = 0.0;
        let mut doc_count = 0usize;
        for (part, docs) in &by_part {
            let mut shuffled: Vec<&PointDocument> = docs.clone();
            shuffled.shuffle(&mut rng);
            for chunk in shuffled.chunks(batch) {
                let owned: Vec<PointDocument> = chunk.iter().map(|&d| d.clone()).collect();
                let mean = registry.update_minibatch(part, &owned)?;
                bound_sum += mean * owned.len() as f64;
                doc_count += owned.len();
            }
        }
        epoch_bounds.push(bound_sum / doc_count as f64);
    }
    Ok(epoch_bounds)
}

/// Options of the occlusion experiment.
#[derive(Debug, Clone)]
pub struct OcclusionOptions {
    /// Train the argumentation layer on ground-truth part names instead of
    /// the segmenter's predictions.
    pub oracle_labels: bool,
    /// Offline training epochs for the part models.
    pub epochs: usize,
    /// Keypoint share below which a predicted label is treated as
    /// segmentation noise and kept out of the recognition label set. The
    /// most frequent label always stays.
    pub min_label_share: f64,
}

impl Default for OcclusionOptions {
    fn default() -> Self {
        OcclusionOptions {
            oracle_labels: false,
            epochs: 2,
            min_label_share: 0.15,
        }
    }
}

/// Accuracies of the occlusion experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct OcclusionReport {
    pub acc_original: f64,
    pub acc_occluded: f64,
    pub test_objects: usize,
}

/// Train on 90% of the dataset, leave the remaining 10% out, and measure
/// category-recognition accuracy on the held-out objects twice: intact, and
/// occluded with spin-only documents.
pub fn run_occlusion_experiment(
    dataset: &Dataset,
    split_seed: u64,
    registry: &mut PartRegistry,
    abl: &mut ArgumentationModel,
    config: &DescriptorConfig,
    options: &OcclusionOptions,
) -> Result<OcclusionReport> {
    if dataset.objects.len() < 10 {
        return Err(Error::DatasetTooSmall(format!(
            "occlusion experiment needs at least 10 objects, got {}",
            dataset.objects.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed);
    let mut order: Vec<usize> = (0..dataset.objects.len()).collect();
    order.shuffle(&mut rng);
    let test_count = (dataset.objects.len() / 10).max(1);
    let (test_idx, train_idx) = order.split_at(test_count);

    let full_config = DescriptorConfig {
        spin_only: false,
        ..config.clone()
    };
    let spin_config = DescriptorConfig {
        spin_only: true,
        ..config.clone()
    };

    // Train the segmenter on intact clouds.
    let train_objects: Vec<PreparedObject> = {
        let mut out = Vec::with_capacity(train_idx.len());
        for &idx in train_idx {
            let object = &dataset.objects[idx];
            out.push(prepare_object(
                dataset,
                &object.id,
                &object.category,
                &object.cloud,
                &full_config,
            )?);
        }
        out
    };
    offline_train(registry, &train_objects, options.epochs, split_seed)?;
    let scorer = PartScorer::new(registry)?;

    // Teach the argumentation layer one example per training object.
    for object in &train_objects {
        let labels: BTreeSet<String> = if options.oracle_labels {
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

    let mut correct_original = 0usize;
    let mut correct_occluded = 0usize;
    for (i, &idx) in test_idx.iter().enumerate() {
        let object = &dataset.objects[idx];

        let original = prepare_object(
            dataset,
            &object.id,
            &object.category,
            &object.cloud,
            &full_config,
        )?;
        if recognize(&scorer, abl, &original, options.min_label_share)? == Some(object.category.clone()) {
            correct_original += 1;
        }

        let occluded_cloud = occlude(&object.cloud, split_seed.wrapping_add(i as u64))?;
        let occluded = prepare_object(
            dataset,
            &object.id,
            &object.category,
            &occluded_cloud,
            &spin_config,
        )?;
        if recognize(&scorer, abl, &occluded, options.min_label_share)? == Some(object.category.clone()) {
            correct_occluded += 1;
        }
    }

    Ok(OcclusionReport {
        acc_original: correct_original as f64 / test_idx.len() as f64,
        acc_occluded: correct_occluded as f64 / test_idx.len() as f64,
        test_objects: test_idx.len(),
    })
}

fn recognize(
    scorer: &PartScorer<'_>,
    abl: &ArgumentationModel,
    object: &PreparedObject,
    min_label_share: f64,
) -> Result<Option<String>> {
    let mut tally: BTreeMap<String, usize> = BTreeMap::new();
    for doc in &object.documents {
        *tally.entry(scorer.predict(doc)?.label).or_insert(0) += 1;
    }
    let labels = dominant_labels(&tally, min_label_share);
    match abl.predict(&labels) {
        Ok((category, _)) => Ok(Some(category)),
        Err(Error::UnknownObject) => Ok(None),
        Err(other) => Err(other),
    }
}

/// Labels whose keypoint share clears the threshold; the most frequent label
/// always survives so the set is never empty.
pub fn dominant_labels(tally: &BTreeMap<String, usize>, min_share: f64) -> BTreeSet<String> {
    let total: usize = tally.values().sum();
    let top = tally.values().max().copied().unwrap_or(0);
    tally
        .iter()
        .filter(|&(_, &count)| count == top || count as f64 >= min_share * total as f64)
        .map(|(label, _)| label.clone())
        .collect()
}

/// Render a report as one `key value` line per metric.
pub fn format_report(report: &ProtocolReport) -> String {
    let mut out = String::new();
    writeln!(out, "learned_parts {}", report.learned_parts).unwrap();
    writeln!(out, "correction_iterations {}", report.correction_iterations).unwrap();
    writeln!(out, "avg_instances_per_part {}", report.avg_instances_per_part).unwrap();
    writeln!(out, "final_miou {}", report.final_miou).unwrap();
    writeln!(out, "stop_reason {}", report.stop_reason.as_str()).unwrap();
    writeln!(out, "total_presentations {}", report.total_presentations).unwrap();
    writeln!(out, "instances_taught {}", report.instances_taught).unwrap();
    out
}

/// Render the trajectory as `iteration,n_parts,window_miou` CSV.
pub fn format_trajectory_csv(report: &ProtocolReport) -> String {
    let mut out = String::from("iteration,n_parts,window_miou\n");
    for point in &report.miou_trajectory {
        writeln!(
            out,
            "{},{},{}",
            point.iteration, point.learned_parts, point.window_miou
        )
        .unwrap();
    }
    out
}
