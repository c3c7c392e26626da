//! Independent transcription of the per-document lower bound, used as an
//! oracle against the implementation. The oracle expands counts into
//! individual tokens and recomputes every expectation from scratch, so it
//! shares no code path with `localhdp::inference`.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::{digamma, ln_gamma};

use partseg_core::descriptors::PointDocument;
use partseg_core::localhdp::{
    elbo_document, infer_document, DocumentParams, HdpHyperparams, LocalPartModel, PartRegistry,
};

fn doc(pairs: &[(usize, u32)]) -> PointDocument {
    PointDocument {
        counts: pairs.iter().copied().collect::<BTreeMap<_, _>>(),
    }
}

fn toy_model(vocab: usize, hyper: &HdpHyperparams, seed: u64) -> LocalPartModel {
    let mut registry = PartRegistry::new(hyper.clone(), vocab).unwrap();
    registry.new_part("toy", seed).unwrap();
    registry.model("toy").unwrap().clone()
}

/// Brute-force evaluation of the per-document bound, written token by token
/// directly from the formula.
fn oracle_bound(
    model: &LocalPartModel,
    hyper: &HdpHyperparams,
    vocab: usize,
    document: &PointDocument,
    params: &DocumentParams,
) -> f64 {
    let topics = hyper.max_topics;
    let tables = hyper.max_tables;

    // Token expansion; row n of word_table belongs to the n-th distinct word
    // in ascending id order.
    let distinct: Vec<usize> = document.counts.keys().copied().collect();
    let row_of = |word: usize| distinct.iter().position(|&w| w == word).unwrap();
    let mut tokens = Vec::new();
    for (&word, &count) in &document.counts {
        for _ in 0..count {
            tokens.push(word);
        }
    }

    // E[log phi_{k,w}] from the Dirichlet parameters.
    let elog_phi = |k: usize, w: usize| -> f64 {
        let total: f64 = (0..vocab).map(|v| model.lambda[(k, v)]).sum();
        digamma(model.lambda[(k, w)]) - digamma(total)
    };

    // Expected log stick weights of the top level.
    let elog_beta: Vec<f64> = (0..topics)
        .map(|k| {
            let mut value = 0.0;
            if k + 1 < topics {
                value += digamma(model.topic_stick_a[k])
                    - digamma(model.topic_stick_a[k] + model.topic_stick_b[k]);
            }
            for m in 0..k.min(topics - 1) {
                value += digamma(model.topic_stick_b[m])
                    - digamma(model.topic_stick_a[m] + model.topic_stick_b[m]);
            }
            value
        })
        .collect();

    // Expected log stick weights of the document level.
    let elog_pi: Vec<f64> = (0..tables)
        .map(|t| {
            let mut value = 0.0;
            if t + 1 < tables {
                value += digamma(params.table_stick_a[t])
                    - digamma(params.table_stick_a[t] + params.table_stick_b[t]);
            }
            for s in 0..t.min(tables - 1) {
                value += digamma(params.table_stick_b[s])
                    - digamma(params.table_stick_a[s] + params.table_stick_b[s]);
            }
            value
        })
        .collect();

    let mut bound = 0.0;
    // E[log p(w_j | c_j, z_j, phi)]
    for &word in &tokens {
        let n = row_of(word);
        for t in 0..tables {
            for k in 0..topics {
                bound += params.word_table[(n, t)] * params.table_topic[(t, k)] * elog_phi(k, word);
            }
        }
    }
    // E[log p(c_j | beta')]
    for t in 0..tables {
        for k in 0..topics {
            bound += params.table_topic[(t, k)] * elog_beta[k];
        }
    }
    // E[log p(z_j | pi')]
    for &word in &tokens {
        let n = row_of(word);
        for t in 0..tables {
            bound += params.word_table[(n, t)] * elog_pi[t];
        }
    }
    // E[log p(pi'_j | alpha0)]: Beta(1, alpha0) log-density expectations.
    for t in 0..tables.saturating_sub(1) {
        let a = params.table_stick_a[t];
        let b = params.table_stick_b[t];
        bound += hyper.alpha0.ln() + (hyper.alpha0 - 1.0) * (digamma(b) - digamma(a + b));
    }
    // H(q(c_j))
    for t in 0..tables {
        for k in 0..topics {
            let p = params.table_topic[(t, k)];
            if p > 0.0 {
                bound -= p * p.ln();
            }
        }
    }
    // H(q(z_j))
    for &word in &tokens {
        let n = row_of(word);
        for t in 0..tables {
            let p = params.word_table[(n, t)];
            if p > 0.0 {
                bound -= p * p.ln();
            }
        }
    }
    // H(q(pi'_j))
    for t in 0..tables.saturating_sub(1) {
        bound += beta_entropy(params.table_stick_a[t], params.table_stick_b[t]);
    }

    // Corpus terms, scaled by 1/|P|.
    let mut corpus = 0.0;
    for k in 0..topics.saturating_sub(1) {
        let a = model.topic_stick_a[k];
        let b = model.topic_stick_b[k];
        corpus += hyper.gamma.ln() + (hyper.gamma - 1.0) * (digamma(b) - digamma(a + b));
        corpus += beta_entropy(a, b);
    }
    for k in 0..topics {
        let row: Vec<f64> = (0..vocab).map(|v| model.lambda[(k, v)]).collect();
        let total: f64 = row.iter().sum();
        corpus += ln_gamma(hyper.eta * vocab as f64) - vocab as f64 * ln_gamma(hyper.eta);
        for &x in &row {
            corpus += (hyper.eta - 1.0) * (digamma(x) - digamma(total));
        }
        // Dirichlet entropy
        let mut h = -ln_gamma(total) + (total - vocab as f64) * digamma(total);
        for &x in &row {
            h += ln_gamma(x) - (x - 1.0) * digamma(x);
        }
        corpus += h;
    }
    bound + corpus / model.doc_count.max(1) as f64
}

fn beta_entropy(a: f64, b: f64) -> f64 {
    let ln_beta = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    ln_beta - (a - 1.0) * digamma(a) - (b - 1.0) * digamma(b) + (a + b - 2.0) * digamma(a + b)
}

/// Random feasible parameters: stochastic rows, positive stick parameters.
fn random_params(
    rng: &mut ChaCha8Rng,
    n_words: usize,
    tables: usize,
    topics: usize,
) -> DocumentParams {
    let stochastic_row = |rng: &mut ChaCha8Rng, len: usize| -> Vec<f64> {
        let mut row: Vec<f64> = (0..len).map(|_| -rng.random::<f64>().ln()).collect();
        let sum: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= sum);
        row
    };
    let mut table_topic = Array2::zeros((tables, topics));
    for t in 0..tables {
        for (k, v) in stochastic_row(rng, topics).into_iter().enumerate() {
            table_topic[(t, k)] = v;
        }
    }
    let mut word_table = Array2::zeros((n_words, tables));
    for n in 0..n_words {
        for (t, v) in stochastic_row(rng, tables).into_iter().enumerate() {
            word_table[(n, t)] = v;
        }
    }
    DocumentParams {
        table_stick_a: Array1::from_shape_fn(tables - 1, |_| rng.random_range(0.05..10.0)),
        table_stick_b: Array1::from_shape_fn(tables - 1, |_| rng.random_range(0.05..10.0)),
        table_topic,
        word_table,
    }
}

#[test]
fn implementation_matches_the_oracle_at_random_parameters() {
    let hyper = HdpHyperparams {
        max_topics: 3,
        max_tables: 2,
        ..HdpHyperparams::default()
    };
    let vocab = 5;
    let mut model = toy_model(vocab, &hyper, 7);
    model.doc_count = 4;
    let document = doc(&[(0, 2), (2, 1), (4, 3)]);

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..50 {
        let params = random_params(&mut rng, 3, hyper.max_tables, hyper.max_topics);
        let implementation = elbo_document(&model, &hyper, vocab, &document, &params).unwrap();
        let oracle = oracle_bound(&model, &hyper, vocab, &document, &params);
        assert!(
            (implementation - oracle).abs() < 1e-8,
            "bound mismatch: {implementation} vs {oracle}"
        );
    }
}

#[test]
fn converged_bound_dominates_random_search_on_the_small_instance() {
    // V=3, K=2, T=2, one two-word document.
    let hyper = HdpHyperparams {
        max_topics: 2,
        max_tables: 2,
        ..HdpHyperparams::default()
    };
    let vocab = 3;
    let model = toy_model(vocab, &hyper, 3);
    let document = doc(&[(0, 1), (2, 1)]);

    let converged = infer_document(&model, &hyper, vocab, &document, 200, 1e-10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..1000 {
        let params = random_params(&mut rng, 2, hyper.max_tables, hyper.max_topics);
        let bound = oracle_bound(&model, &hyper, vocab, &document, &params);
        assert!(
            bound <= converged.bound + 1e-9,
            "trial {trial}: random setting beats convergence ({bound} > {})",
            converged.bound
        );
    }
}

#[test]
fn grid_search_cannot_beat_coordinate_ascent_on_the_toy_document() {
    // V=4, K=2, one document of 3 words; sweep bounds must be monotone and
    // dominate a coarse parameter grid.
    let hyper = HdpHyperparams {
        max_topics: 2,
        max_tables: 2,
        ..HdpHyperparams::default()
    };
    let vocab = 4;
    let model = toy_model(vocab, &hyper, 5);
    let document = doc(&[(0, 1), (1, 1), (3, 1)]);

    let converged = infer_document(&model, &hyper, vocab, &document, 200, 1e-12).unwrap();
    for pair in converged.sweep_bounds.windows(2) {
        assert!(pair[1] >= pair[0] - 1e-6, "sweep decreased the bound");
    }

    // Grid over zeta/psi row weights and stick parameters.
    let fractions = [0.0, 0.25, 0.5, 0.75, 1.0];
    let sticks = [0.5, 1.0, 2.0, 4.0];
    let mut best = f64::NEG_INFINITY;
    for &z0 in &fractions {
        for &z1 in &fractions {
            for &p0 in &fractions {
                for &p1 in &fractions {
                    for &p2 in &fractions {
                        for &a in &sticks {
                            for &b in &sticks {
                                let mut table_topic = Array2::zeros((2, 2));
                                table_topic[(0, 0)] = z0;
                                table_topic[(0, 1)] = 1.0 - z0;
                                table_topic[(1, 0)] = z1;
                                table_topic[(1, 1)] = 1.0 - z1;
                                let mut word_table = Array2::zeros((3, 2));
                                for (n, &p) in [p0, p1, p2].iter().enumerate() {
                                    word_table[(n, 0)] = p;
                                    word_table[(n, 1)] = 1.0 - p;
                                }
                                let params = DocumentParams {
                                    table_stick_a: Array1::from_elem(1, a),
                                    table_stick_b: Array1::from_elem(1, b),
                                    table_topic,
                                    word_table,
                                };
                                let bound =
                                    oracle_bound(&model, &hyper, vocab, &document, &params);
                                best = best.max(bound);
                            }
                        }
                    }
                }
            }
        }
    }
    assert!(
        best <= converged.bound + 1e-9,
        "grid point beats convergence: {best} > {}",
        converged.bound
    );
}
