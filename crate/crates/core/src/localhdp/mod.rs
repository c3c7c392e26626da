//! Per-part topic models with truncated stick-breaking and online
//! variational inference.
//!
//! Each semantic object-part owns an independent two-level stick-breaking
//! topic model over the descriptor vocabulary: topics are shared among the
//! keypoints of one part and never across parts, so training one part cannot
//! disturb another. Minibatch updates follow the natural-gradient schedule
//! `rho_t = (tau0 + t)^(-kappa)` with sufficient statistics scaled by the
//! number of documents seen for the part. Prediction scores a keypoint
//! document under every registered part and picks the best document-level
//! bound.

mod checkpoint;
mod inference;

pub use checkpoint::{load_checkpoint, part_blob, save_checkpoint};
pub use inference::{elbo_document, infer_document, DocumentParams, Inference};

use indexmap::IndexMap;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::descriptors::{point_documents, DescriptorConfig, PointDocument};
use crate::error::{Error, Result};
use crate::pointcloud::PointCloud;

use inference::{corpus_terms, infer_parts, DocWords, ModelTables};

/// Coordinate-ascent sweep budget used by training and prediction.
pub const DEFAULT_INFER_ITERS: usize = 30;
/// Stop once the per-document bound improves by less than this. Keypoint
/// documents carry thousands of tokens, so 0.05 nats is far below any
/// difference that could change a prediction.
pub const DEFAULT_INFER_TOL: f64 = 0.05;

/// Hyperparameters shared by every part model of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct HdpHyperparams {
    /// Top-level stick concentration.
    pub gamma: f64,
    /// Document-level stick concentration.
    pub alpha0: f64,
    /// Symmetric Dirichlet prior on topic-word distributions.
    pub eta: f64,
    /// Top-level truncation: maximum topics per part.
    pub max_topics: usize,
    /// Document-level truncation: maximum tables per document.
    pub max_tables: usize,
    /// Learning-rate decay exponent, in (0.5, 1].
    pub kappa: f64,
    /// Learning-rate delay.
    pub tau0: f64,
    /// Documents per minibatch used by the training drivers.
    pub batch_size: usize,
}

impl Default for HdpHyperparams {
    fn default() -> Self {
        HdpHyperparams {
            gamma: 1.0,
            alpha0: 1.0,
            eta: 0.01,
            max_topics: 20,
            max_tables: 10,
            kappa: 0.9,
            tau0: 1.0,
            batch_size: 16,
        }
    }
}

impl HdpHyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |message: &str| Err(Error::InvalidHyperparameter(message.into()));
        if !(self.gamma > 0.0) {
            return bad("gamma must be positive");
        }
        if !(self.alpha0 > 0.0) {
            return bad("alpha0 must be positive");
        }
        if !(self.eta > 0.0) {
            return bad("eta must be positive");
        }
        if self.max_topics < 2 {
            return bad("max_topics must be at least 2");
        }
        if self.max_tables < 1 || self.max_tables > self.max_topics {
            return bad("max_tables must satisfy 1 <= max_tables <= max_topics");
        }
        if !(self.kappa > 0.5 && self.kappa <= 1.0) {
            return bad("kappa must lie in (0.5, 1]");
        }
        if !(self.tau0 >= 0.0) {
            return bad("tau0 must be nonnegative");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        Ok(())
    }
}

/// Variational state of one part's topic model.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPartModel {
    pub part_label: String,
    /// Topic-word Dirichlet parameters, `max_topics x vocab`.
    pub lambda: Array2<f64>,
    /// Beta parameters of the top-level sticks, length `max_topics - 1`.
    pub topic_stick_a: Array1<f64>,
    pub topic_stick_b: Array1<f64>,
    /// Minibatch counter driving the learning-rate schedule.
    pub t_updates: u64,
    /// Documents observed for this part.
    pub doc_count: u64,
}

impl LocalPartModel {
    fn new(part_label: String, hyper: &HdpHyperparams, vocab: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = 0.01 * hyper.eta;
        let lambda = Array2::from_shape_fn((hyper.max_topics, vocab), |_| {
            hyper.eta + noise * rng.random::<f64>()
        });
        LocalPartModel {
            part_label,
            lambda,
            topic_stick_a: Array1::ones(hyper.max_topics - 1),
            topic_stick_b: Array1::from_elem(hyper.max_topics - 1, hyper.gamma),
            t_updates: 0,
            doc_count: 0,
        }
    }

    /// The corpus size used for the 1/|P| scaling; at least one so that a
    /// fresh model still has a finite bound.
    pub(crate) fn effective_corpus_size(&self) -> f64 {
        self.doc_count.max(1) as f64
    }

    /// Expected topic-word distributions; each row sums to one.
    pub fn expected_topics(&self) -> Array2<f64> {
        let mut out = self.lambda.clone();
        for mut row in out.rows_mut() {
            let sum = row.sum();
            row.mapv_inplace(|x| x / sum);
        }
        out
    }
}

/// Prediction outcome for one document.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub label: String,
    pub score: f64,
    /// Document-level bound per registered part, in registration order.
    pub scores: IndexMap<String, f64>,
}

/// A segmented cloud: downsampled keypoints with one predicted part label
/// each.
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub keypoints: PointCloud,
    pub labels: Vec<String>,
}

/// All part models of one experiment, keyed by part label in registration
/// order.
#[derive(Debug, Clone)]
pub struct PartRegistry {
    models: IndexMap<String, LocalPartModel>,
    hyper: HdpHyperparams,
    vocab: usize,
}

impl PartRegistry {
    pub fn new(hyper: HdpHyperparams, vocab: usize) -> Result<Self> {
        hyper.validate()?;
        if vocab == 0 {
            return Err(Error::InvalidHyperparameter(
                "vocabulary size must be positive".into(),
            ));
        }
        Ok(PartRegistry {
            models: IndexMap::new(),
            hyper,
            vocab,
        })
    }

    pub fn hyper(&self) -> &HdpHyperparams {
        &self.hyper
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn contains(&self, part_label: &str) -> bool {
        self.models.contains_key(part_label)
    }

    /// Part labels in registration order.
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.models.keys().map(|s| s.as_str())
    }

    pub fn model(&self, part_label: &str) -> Result<&LocalPartModel> {
        self.models
            .get(part_label)
            .ok_or_else(|| Error::UnknownPart(part_label.to_string()))
    }

    pub fn models(&self) -> impl Iterator<Item = &LocalPartModel> {
        self.models.values()
    }

    /// Register a fresh part model. The seed only breaks topic symmetry;
    /// identical seeds give identical initializations.
    pub fn new_part(&mut self, part_label: &str, seed: u64) -> Result<&mut LocalPartModel> {
        if self.models.contains_key(part_label) {
            return Err(Error::DuplicatePart(part_label.to_string()));
        }
        let model = LocalPartModel::new(part_label.to_string(), &self.hyper, self.vocab, seed);
        Ok(self.models.entry(part_label.to_string()).or_insert(model))
    }

    /// Update one part from a minibatch of its documents; returns the mean
    /// per-document bound. Only the addressed model is touched.
    pub fn update_minibatch(&mut self, part_label: &str, docs: &[PointDocument]) -> Result<f64> {
        let hyper = self.hyper.clone();
        let vocab = self.vocab;
        let model = self
            .models
            .get_mut(part_label)
            .ok_or_else(|| Error::UnknownPart(part_label.to_string()))?;
        update_minibatch(model, &hyper, vocab, docs)
    }

    /// Label a document with the part whose model explains it best.
    ///
    /// Scores are document-level bounds with the corpus terms removed, so
    /// parts with different document counts compete fairly. Ties go to the
    /// earliest-registered part. Callers scoring many documents should build
    /// a [`PartScorer`] once instead.
    pub fn predict_part(&self, doc: &PointDocument) -> Result<Prediction> {
        PartScorer::new(self)?.predict(doc)
    }
}

/// Prediction front end with the per-model digamma tables precomputed;
/// building one costs as much as a single prediction, after which every
/// further document is cheap. Read-only: holds a shared borrow of the
/// registry.
pub struct PartScorer<'a> {
    registry: &'a PartRegistry,
    tables: Vec<ModelTables>,
}

impl<'a> PartScorer<'a> {
    pub fn new(registry: &'a PartRegistry) -> Result<Self> {
        if registry.is_empty() {
            return Err(Error::EmptyRegistry);
        }
        let tables = registry
            .models()
            .map(|model| ModelTables::new(model, &registry.hyper))
            .collect();
        Ok(PartScorer { registry, tables })
    }

    /// See [`PartRegistry::predict_part`].
    pub fn predict(&self, doc: &PointDocument) -> Result<Prediction> {
        let words = DocWords::from_document(doc, self.registry.vocab)?;
        let mut scores = IndexMap::with_capacity(self.registry.models.len());
        let mut best: Option<(String, f64)> = None;
        for (label, tables) in self.registry.models.keys().zip(&self.tables) {
            let inference = infer_parts(
                tables,
                &self.registry.hyper,
                &words,
                DEFAULT_INFER_ITERS,
                DEFAULT_INFER_TOL,
            );
            let score = inference.document_terms;
            scores.insert(label.clone(), score);
            let better = match &best {
                Some((_, best_score)) => score > *best_score,
                None => true,
            };
            if better {
                best = Some((label.clone(), score));
            }
        }
        let (label, score) = best.expect("non-empty registry");
        Ok(Prediction {
            label,
            score,
            scores,
        })
    }
}

/// Minibatch update of a single model (see [`PartRegistry::update_minibatch`]).
pub fn update_minibatch(
    model: &mut LocalPartModel,
    hyper: &HdpHyperparams,
    vocab: usize,
    docs: &[PointDocument],
) -> Result<f64> {
    if docs.is_empty() {
        return Err(Error::EmptyMinibatch);
    }
    let topics = hyper.max_topics;
    let batch = docs.len() as f64;
    model.doc_count += docs.len() as u64;
    let corpus_size = model.effective_corpus_size();

    let corpus = corpus_terms(model, hyper, vocab);
    let tables = ModelTables::new(model, hyper);
    let mut ss_lambda: Array2<f64> = Array2::zeros((topics, vocab));
    let mut ss_topic: Array1<f64> = Array1::zeros(topics);
    let mut bound_sum = 0.0;

    for doc in docs {
        let words = DocWords::from_document(doc, vocab)?;
        let inference = infer_parts(&tables, hyper, &words, DEFAULT_INFER_ITERS, DEFAULT_INFER_TOL);
        bound_sum += inference.document_terms + corpus / corpus_size;

        let params = &inference.params;
        for (n, &word) in words.ids.iter().enumerate() {
            let count = words.counts[n];
            for t in 0..hyper.max_tables {
                let mass = count * params.word_table[(n, t)];
                if mass == 0.0 {
                    continue;
                }
                for k in 0..topics {
                    ss_lambda[(k, word)] += mass * params.table_topic[(t, k)];
                }
            }
        }
        for t in 0..hyper.max_tables {
            for k in 0..topics {
                ss_topic[k] += params.table_topic[(t, k)];
            }
        }
    }

    // Natural-gradient blend toward the minibatch estimate.
    let rho = (hyper.tau0 + model.t_updates as f64).powf(-hyper.kappa);
    let scale = corpus_size / batch;
    for k in 0..topics {
        for w in 0..vocab {
            let estimate = hyper.eta + scale * ss_lambda[(k, w)];
            model.lambda[(k, w)] = (1.0 - rho) * model.lambda[(k, w)] + rho * estimate;
        }
    }
    // Suffix sums of expected topic usage feed the stick updates.
    let mut above = 0.0;
    let mut suffix = Array1::zeros(topics - 1);
    for k in (0..topics - 1).rev() {
        above += ss_topic[k + 1];
        suffix[k] = above;
    }
    for k in 0..topics - 1 {
        let a_estimate = 1.0 + scale * ss_topic[k];
        let b_estimate = hyper.gamma + scale * suffix[k];
        model.topic_stick_a[k] = (1.0 - rho) * model.topic_stick_a[k] + rho * a_estimate;
        model.topic_stick_b[k] = (1.0 - rho) * model.topic_stick_b[k] + rho * b_estimate;
    }
    model.t_updates += 1;

    Ok(bound_sum / batch)
}

/// Segment a cloud: downsample it into keypoints, build their documents and
/// predict a part label for each.
pub fn segment_object(
    registry: &PartRegistry,
    cloud: &PointCloud,
    config: &DescriptorConfig,
) -> Result<Segmentation> {
    let scorer = PartScorer::new(registry)?;
    let set = point_documents(cloud, config)?;
    let mut labels = Vec::with_capacity(set.documents.len());
    for doc in &set.documents {
        labels.push(scorer.predict(doc)?.label);
    }
    Ok(Segmentation {
        keypoints: set.keypoints,
        labels,
    })
}
