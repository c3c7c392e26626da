//! Coordinate-ascent inference of the document-level variational
//! parameters and evaluation of the per-document lower bound.
//!
//! The variational family factorizes over the top-level sticks, the topics,
//! the per-document sticks, the table-to-topic indicators and the
//! word-to-table indicators. One sweep updates, in order: the table-topic
//! rows (softmax over topics), the word-table rows (softmax over tables) and
//! the document stick Beta parameters. Every update is the exact coordinate
//! maximizer, so the bound never decreases across sweeps.
//!
//! Digamma tables of a fixed model are precomputed once (per minibatch, or
//! per [`crate::localhdp::PartScorer`] for prediction) because they dominate
//! the cost of scoring many documents against the same model.

use ndarray::{Array1, Array2};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::descriptors::PointDocument;
use crate::error::{Error, Result};
use crate::localhdp::{HdpHyperparams, LocalPartModel};

/// A document unpacked into parallel id/count vectors, validated against the
/// vocabulary.
#[derive(Debug, Clone)]
pub(crate) struct DocWords {
    pub ids: Vec<usize>,
    pub counts: Vec<f64>,
}

impl DocWords {
    pub fn from_document(doc: &PointDocument, vocab: usize) -> Result<Self> {
        if doc.counts.is_empty() {
            return Err(Error::EmptyDocument);
        }
        let mut ids = Vec::with_capacity(doc.counts.len());
        let mut counts = Vec::with_capacity(doc.counts.len());
        for (&word, &count) in &doc.counts {
            if word >= vocab {
                return Err(Error::WordOutOfRange { word, vocab });
            }
            ids.push(word);
            counts.push(count as f64);
        }
        Ok(DocWords { ids, counts })
    }
}

/// Document-level variational parameters.
///
/// `word_table` has one row per distinct word id of the document in
/// ascending word-id order; repeated tokens of the same word share a row and
/// are weighted by their count.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentParams {
    /// Beta parameters of the per-document sticks, length `max_tables - 1`.
    pub table_stick_a: Array1<f64>,
    pub table_stick_b: Array1<f64>,
    /// Table-to-topic assignment, `max_tables x max_topics`, row-stochastic.
    pub table_topic: Array2<f64>,
    /// Word-to-table assignment, `W x max_tables`, row-stochastic.
    pub word_table: Array2<f64>,
}

/// Result of [`infer_document`]: converged parameters, the bound, and the
/// bound after every sweep.
#[derive(Debug, Clone)]
pub struct Inference {
    pub params: DocumentParams,
    /// Full per-document lower bound, corpus terms included.
    pub bound: f64,
    /// Bound trace, one entry per completed sweep.
    pub sweep_bounds: Vec<f64>,
}

/// Like [`Inference`] but with the corpus terms stripped; prediction uses
/// `document_terms` directly so models with different document counts
/// compete on the document evidence alone.
pub(crate) struct PartialInference {
    pub params: DocumentParams,
    pub document_terms: f64,
    pub document_sweeps: Vec<f64>,
}

/// Precomputed digamma tables of one fixed model.
pub(crate) struct ModelTables {
    topics: usize,
    vocab: usize,
    /// digamma(lambda), row-major `K x V`.
    dig_lambda: Vec<f64>,
    /// digamma of each lambda row total, length `K`.
    dig_total: Vec<f64>,
    /// Expected log stick weight per topic, length `K`.
    pub elog_topic_sticks: Vec<f64>,
}

impl ModelTables {
    pub fn new(model: &LocalPartModel, hyper: &HdpHyperparams) -> Self {
        let topics = hyper.max_topics;
        let vocab = model.lambda.ncols();
        let mut dig_lambda = Vec::with_capacity(topics * vocab);
        let mut dig_total = Vec::with_capacity(topics);
        for k in 0..topics {
            let row = model.lambda.row(k);
            dig_total.push(digamma(row.sum()));
            for &x in row {
                dig_lambda.push(digamma(x));
            }
        }
        let elog_topic_sticks = expected_log_sticks(
            model.topic_stick_a.as_slice().unwrap(),
            model.topic_stick_b.as_slice().unwrap(),
        );
        ModelTables {
            topics,
            vocab,
            dig_lambda,
            dig_total,
            elog_topic_sticks,
        }
    }

    /// `E[log phi_{k,w}]` for the document's words, word-major `W x K`.
    fn word_topic(&self, words: &DocWords) -> Vec<f64> {
        let mut out = Vec::with_capacity(words.ids.len() * self.topics);
        for &word in &words.ids {
            for k in 0..self.topics {
                out.push(self.dig_lambda[k * self.vocab + word] - self.dig_total[k]);
            }
        }
        out
    }
}

/// Expected log stick weights of a truncated stick-breaking construction
/// with Beta(a_i, b_i) proportions; the final segment takes the remainder.
fn expected_log_sticks(a: &[f64], b: &[f64]) -> Vec<f64> {
    let segments = a.len() + 1;
    let mut out = Vec::with_capacity(segments);
    let mut tail = 0.0;
    for k in 0..segments {
        let piece = if k < a.len() {
            digamma(a[k]) - digamma(a[k] + b[k])
        } else {
            0.0
        };
        out.push(tail + piece);
        if k < a.len() {
            tail += digamma(b[k]) - digamma(a[k] + b[k]);
        }
    }
    out
}

fn softmax_rows(scores: &mut [f64], cols: usize) {
    for row in scores.chunks_mut(cols) {
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut sum = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            sum += *x;
        }
        for x in row.iter_mut() {
            *x /= sum;
        }
    }
}

fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

fn beta_entropy(a: f64, b: f64) -> f64 {
    ln_beta(a, b) - (a - 1.0) * digamma(a) - (b - 1.0) * digamma(b)
        + (a + b - 2.0) * digamma(a + b)
}

fn dirichlet_entropy(params: ndarray::ArrayView1<f64>) -> f64 {
    let total: f64 = params.sum();
    let dim = params.len() as f64;
    let mut h = -ln_gamma(total) + (total - dim) * digamma(total);
    for &x in params {
        h += ln_gamma(x) - (x - 1.0) * digamma(x);
    }
    h
}

/// Document-level bound terms over raw row-major buffers.
///
/// `table_mix[n*T + t]` must equal `sum_k zeta[t*K + k] * ewt[n*K + k]`, the
/// expected word log-likelihood of word `n` under table `t`.
#[allow(clippy::too_many_arguments)]
fn document_terms_raw(
    hyper: &HdpHyperparams,
    words: &DocWords,
    zeta: &[f64],
    psi: &[f64],
    stick_a: &[f64],
    stick_b: &[f64],
    table_mix: &[f64],
    elog_topic_sticks: &[f64],
) -> f64 {
    let tables = hyper.max_tables;
    let topics = hyper.max_topics;
    let elog_table_sticks = expected_log_sticks(stick_a, stick_b);

    let mut bound = 0.0;
    // E[log p(w | c, z, phi)] + E[log p(z | pi')] + H(q(z))
    for (n, &count) in words.counts.iter().enumerate() {
        let row = &psi[n * tables..(n + 1) * tables];
        let mix = &table_mix[n * tables..(n + 1) * tables];
        let mut term = 0.0;
        for t in 0..tables {
            term += row[t] * (mix[t] + elog_table_sticks[t]) - xlogx(row[t]);
        }
        bound += count * term;
    }
    // E[log p(c | top-level sticks)] + H(q(c))
    for row in zeta.chunks(topics) {
        for k in 0..topics {
            bound += row[k] * elog_topic_sticks[k] - xlogx(row[k]);
        }
    }
    // E[log p(document sticks | alpha0)] + H(q(document sticks))
    for t in 0..tables - 1 {
        let a = stick_a[t];
        let b = stick_b[t];
        bound += hyper.alpha0.ln() + (hyper.alpha0 - 1.0) * (digamma(b) - digamma(a + b));
        bound += beta_entropy(a, b);
    }
    bound
}

/// Corpus-level bound terms (prior and entropy of the top-level sticks and
/// topics). Constant while document parameters move, so they are computed
/// once per inference call.
pub(crate) fn corpus_terms(model: &LocalPartModel, hyper: &HdpHyperparams, vocab: usize) -> f64 {
    let mut bound = 0.0;
    for k in 0..hyper.max_topics - 1 {
        let a = model.topic_stick_a[k];
        let b = model.topic_stick_b[k];
        bound += hyper.gamma.ln() + (hyper.gamma - 1.0) * (digamma(b) - digamma(a + b));
        bound += beta_entropy(a, b);
    }
    let dim = vocab as f64;
    for k in 0..hyper.max_topics {
        let row = model.lambda.row(k);
        let total = row.sum();
        let dig_total = digamma(total);
        let mut elog_sum = 0.0;
        for &x in row {
            elog_sum += digamma(x) - dig_total;
        }
        bound += ln_gamma(hyper.eta * dim) - dim * ln_gamma(hyper.eta) + (hyper.eta - 1.0) * elog_sum;
        bound += dirichlet_entropy(row);
    }
    bound
}

/// Coordinate ascent on one document given a fixed model.
pub(crate) fn infer_parts(
    tables_of: &ModelTables,
    hyper: &HdpHyperparams,
    words: &DocWords,
    iters: usize,
    tol: f64,
) -> PartialInference {
    let tables = hyper.max_tables;
    let topics = hyper.max_topics;
    let n_words = words.ids.len();

    let ewt = tables_of.word_topic(words); // W x K
    let elog_topic_sticks = &tables_of.elog_topic_sticks;

    let mut stick_a = vec![1.0; tables - 1];
    let mut stick_b = vec![hyper.alpha0; tables - 1];
    let mut zeta = vec![0.0; tables * topics];
    let mut psi = vec![1.0 / tables as f64; n_words * tables];
    let mut table_mix = vec![0.0; n_words * tables];

    let mut sweeps = Vec::new();
    let mut previous = f64::NEG_INFINITY;
    for _ in 0..iters.max(1) {
        // table-topic rows
        for t in 0..tables {
            zeta[t * topics..(t + 1) * topics].copy_from_slice(elog_topic_sticks);
        }
        for n in 0..n_words {
            let count = words.counts[n];
            let word_row = &ewt[n * topics..(n + 1) * topics];
            for t in 0..tables {
                let weight = count * psi[n * tables + t];
                if weight == 0.0 {
                    continue;
                }
                let target = &mut zeta[t * topics..(t + 1) * topics];
                for k in 0..topics {
                    target[k] += weight * word_row[k];
                }
            }
        }
        softmax_rows(&mut zeta, topics);

        // expected word log-likelihood per table
        for n in 0..n_words {
            let word_row = &ewt[n * topics..(n + 1) * topics];
            for t in 0..tables {
                let zeta_row = &zeta[t * topics..(t + 1) * topics];
                let mut mix = 0.0;
                for k in 0..topics {
                    mix += zeta_row[k] * word_row[k];
                }
                table_mix[n * tables + t] = mix;
            }
        }

        // word-table rows
        let elog_table_sticks = expected_log_sticks(&stick_a, &stick_b);
        for n in 0..n_words {
            for t in 0..tables {
                psi[n * tables + t] = elog_table_sticks[t] + table_mix[n * tables + t];
            }
        }
        softmax_rows(&mut psi, tables);

        // document sticks
        for t in 0..tables - 1 {
            let mut here = 0.0;
            let mut beyond = 0.0;
            for n in 0..n_words {
                let row = &psi[n * tables..(n + 1) * tables];
                here += words.counts[n] * row[t];
                for s in t + 1..tables {
                    beyond += words.counts[n] * row[s];
                }
            }
            stick_a[t] = 1.0 + here;
            stick_b[t] = hyper.alpha0 + beyond;
        }

        let bound = document_terms_raw(
            hyper,
            words,
            &zeta,
            &psi,
            &stick_a,
            &stick_b,
            &table_mix,
            elog_topic_sticks,
        );
        sweeps.push(bound);
        if bound - previous < tol {
            previous = bound;
            break;
        }
        previous = bound;
    }

    PartialInference {
        params: DocumentParams {
            table_stick_a: Array1::from_vec(stick_a),
            table_stick_b: Array1::from_vec(stick_b),
            table_topic: Array2::from_shape_vec((tables, topics), zeta).unwrap(),
            word_table: Array2::from_shape_vec((n_words, tables), psi).unwrap(),
        },
        document_terms: previous,
        document_sweeps: sweeps,
    }
}

/// Infer the document-level parameters of `doc` under `model` and return
/// them with the converged per-document lower bound.
pub fn infer_document(
    model: &LocalPartModel,
    hyper: &HdpHyperparams,
    vocab: usize,
    doc: &PointDocument,
    iters: usize,
    tol: f64,
) -> Result<Inference> {
    let words = DocWords::from_document(doc, vocab)?;
    let tables = ModelTables::new(model, hyper);
    let partial = infer_parts(&tables, hyper, &words, iters, tol);
    let corpus = corpus_terms(model, hyper, vocab) / model.effective_corpus_size();
    Ok(Inference {
        params: partial.params,
        bound: partial.document_terms + corpus,
        sweep_bounds: partial
            .document_sweeps
            .iter()
            .map(|b| b + corpus)
            .collect(),
    })
}

/// Evaluate the per-document lower bound at arbitrary feasible parameters.
pub fn elbo_document(
    model: &LocalPartModel,
    hyper: &HdpHyperparams,
    vocab: usize,
    doc: &PointDocument,
    params: &DocumentParams,
) -> Result<f64> {
    let words = DocWords::from_document(doc, vocab)?;
    let tables = hyper.max_tables;
    let topics = hyper.max_topics;
    if params.table_topic.dim() != (tables, topics) {
        return Err(Error::DimensionMismatch(format!(
            "table_topic is {:?}, expected ({tables}, {topics})",
            params.table_topic.dim()
        )));
    }
    if params.word_table.dim() != (words.ids.len(), tables) {
        return Err(Error::DimensionMismatch(format!(
            "word_table is {:?}, expected ({}, {tables})",
            params.word_table.dim(),
            words.ids.len()
        )));
    }
    if params.table_stick_a.len() != tables - 1 || params.table_stick_b.len() != tables - 1 {
        return Err(Error::DimensionMismatch(format!(
            "document sticks have lengths {} and {}, expected {}",
            params.table_stick_a.len(),
            params.table_stick_b.len(),
            tables - 1
        )));
    }
    if model.lambda.dim() != (topics, vocab) {
        return Err(Error::DimensionMismatch(format!(
            "model lambda is {:?}, expected ({topics}, {vocab})",
            model.lambda.dim()
        )));
    }

    let tables_of = ModelTables::new(model, hyper);
    let ewt = tables_of.word_topic(&words);
    let zeta = params.table_topic.as_slice().expect("standard layout");
    let psi = params.word_table.as_slice().expect("standard layout");
    let mut table_mix = vec![0.0; words.ids.len() * tables];
    for n in 0..words.ids.len() {
        let word_row = &ewt[n * topics..(n + 1) * topics];
        for t in 0..tables {
            let zeta_row = &zeta[t * topics..(t + 1) * topics];
            let mut mix = 0.0;
            for k in 0..topics {
                mix += zeta_row[k] * word_row[k];
            }
            table_mix[n * tables + t] = mix;
        }
    }
    let doc_terms = document_terms_raw(
        hyper,
        &words,
        zeta,
        psi,
        params.table_stick_a.as_slice().expect("standard layout"),
        params.table_stick_b.as_slice().expect("standard layout"),
        &table_mix,
        &tables_of.elog_topic_sticks,
    );
    let corpus = corpus_terms(model, hyper, vocab) / model.effective_corpus_size();
    Ok(doc_terms + corpus)
}
