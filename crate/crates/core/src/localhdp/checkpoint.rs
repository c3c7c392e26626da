//! Checkpoint format: a text manifest followed by raw little-endian doubles.
//!
//! ```text
//! partseg checkpoint 1
//! vocab 139
//! hyper <gamma> <alpha0> <eta> <max_topics> <max_tables> <kappa> <tau0> <batch_size>
//! parts 2
//! part <t_updates> <doc_count> <label>
//! part <t_updates> <doc_count> <label>
//! data
//! <per part: lambda row-major, stick a, stick b as f64 LE>
//! ```
//!
//! Hyperparameters round-trip exactly because the shortest-representation
//! float formatting parses back to the identical bits; the variational state
//! is stored in binary so loading reproduces predictions bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::localhdp::{HdpHyperparams, LocalPartModel, PartRegistry};

const MAGIC: &str = "partseg checkpoint 1";
const DATA_MARKER: &[u8] = b"data\n";

/// Serialized variational state of one part; used for byte-level
/// comparisons in tests as well as for the checkpoint payload.
pub fn part_blob(model: &LocalPartModel) -> Vec<u8> {
    let floats = model.lambda.len() + model.topic_stick_a.len() + model.topic_stick_b.len();
    let mut blob = Vec::with_capacity(floats * 8 + 16);
    for &x in model.lambda.iter() {
        blob.extend_from_slice(&x.to_le_bytes());
    }
    for &x in model.topic_stick_a.iter() {
        blob.extend_from_slice(&x.to_le_bytes());
    }
    for &x in model.topic_stick_b.iter() {
        blob.extend_from_slice(&x.to_le_bytes());
    }
    blob.extend_from_slice(&model.t_updates.to_le_bytes());
    blob.extend_from_slice(&model.doc_count.to_le_bytes());
    blob
}

/// Write the registry to disk.
pub fn save_checkpoint(registry: &PartRegistry, path: &Path) -> Result<()> {
    let hyper = registry.hyper();
    let mut manifest = String::new();
    writeln!(manifest, "{MAGIC}").unwrap();
    writeln!(manifest, "vocab {}", registry.vocab()).unwrap();
    writeln!(
        manifest,
        "hyper {} {} {} {} {} {} {} {}",
        hyper.gamma,
        hyper.alpha0,
        hyper.eta,
        hyper.max_topics,
        hyper.max_tables,
        hyper.kappa,
        hyper.tau0,
        hyper.batch_size
    )
    .unwrap();
    writeln!(manifest, "parts {}", registry.len()).unwrap();
    for model in registry.models() {
        writeln!(
            manifest,
            "part {} {} {}",
            model.t_updates, model.doc_count, model.part_label
        )
        .unwrap();
    }
    manifest.push_str("data\n");

    let mut bytes = manifest.into_bytes();
    for model in registry.models() {
        bytes.extend_from_slice(&part_blob(model));
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Load a registry saved by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<PartRegistry> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let split = find_marker(&bytes)
        .ok_or_else(|| Error::Checkpoint("missing data marker".into()))?;
    let (header, payload) = bytes.split_at(split);
    let payload = &payload[DATA_MARKER.len()..];
    let header = std::str::from_utf8(header)
        .map_err(|_| Error::Checkpoint("manifest is not utf-8".into()))?;

    let mut lines = header.lines();
    if lines.next() != Some(MAGIC) {
        return Err(Error::Checkpoint("bad magic line".into()));
    }
    let vocab = parse_prefixed(lines.next(), "vocab ")?
        .parse::<usize>()
        .map_err(|_| Error::Checkpoint("bad vocab line".into()))?;
    let hyper_fields: Vec<&str> = parse_prefixed(lines.next(), "hyper ")?
        .split_whitespace()
        .collect();
    if hyper_fields.len() != 8 {
        return Err(Error::Checkpoint("hyper line needs 8 fields".into()));
    }
    let float = |s: &str| -> Result<f64> {
        s.parse()
            .map_err(|_| Error::Checkpoint(format!("bad float {s:?}")))
    };
    let int = |s: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::Checkpoint(format!("bad integer {s:?}")))
    };
    let hyper = HdpHyperparams {
        gamma: float(hyper_fields[0])?,
        alpha0: float(hyper_fields[1])?,
        eta: float(hyper_fields[2])?,
        max_topics: int(hyper_fields[3])?,
        max_tables: int(hyper_fields[4])?,
        kappa: float(hyper_fields[5])?,
        tau0: float(hyper_fields[6])?,
        batch_size: int(hyper_fields[7])?,
    };
    let n_parts = parse_prefixed(lines.next(), "parts ")?
        .parse::<usize>()
        .map_err(|_| Error::Checkpoint("bad parts line".into()))?;

    let mut registry = PartRegistry::new(hyper, vocab)?;
    let topics = registry.hyper().max_topics;
    let floats_per_part = topics * vocab + 2 * (topics - 1);
    let bytes_per_part = floats_per_part * 8 + 16;
    if payload.len() != n_parts * bytes_per_part {
        return Err(Error::Checkpoint(format!(
            "payload is {} bytes, expected {}",
            payload.len(),
            n_parts * bytes_per_part
        )));
    }

    for index in 0..n_parts {
        let line = lines
            .next()
            .ok_or_else(|| Error::Checkpoint("missing part line".into()))?;
        let rest = line
            .strip_prefix("part ")
            .ok_or_else(|| Error::Checkpoint(format!("bad part line {line:?}")))?;
        let mut fields = rest.splitn(3, ' ');
        let t_updates: u64 = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Checkpoint("bad part t_updates".into()))?;
        let doc_count: u64 = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Checkpoint("bad part doc_count".into()))?;
        let label = fields
            .next()
            .ok_or_else(|| Error::Checkpoint("missing part label".into()))?;

        let chunk = &payload[index * bytes_per_part..(index + 1) * bytes_per_part];
        let mut reader = FloatReader::new(chunk);
        let lambda =
            Array2::from_shape_vec((topics, vocab), reader.take(topics * vocab)).unwrap();
        let stick_a = Array1::from_vec(reader.take(topics - 1));
        let stick_b = Array1::from_vec(reader.take(topics - 1));

        let model = registry.new_part(label, 0)?;
        model.lambda = lambda;
        model.topic_stick_a = stick_a;
        model.topic_stick_b = stick_b;
        model.t_updates = t_updates;
        model.doc_count = doc_count;
    }

    Ok(registry)
}

fn find_marker(bytes: &[u8]) -> Option<usize> {
    bytes
        .windows(DATA_MARKER.len())
        .position(|w| w == DATA_MARKER)
}

fn parse_prefixed<'a>(line: Option<&'a str>, prefix: &str) -> Result<&'a str> {
    line.and_then(|l| l.strip_prefix(prefix))
        .ok_or_else(|| Error::Checkpoint(format!("expected line starting with {prefix:?}")))
}

struct FloatReader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> FloatReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        FloatReader { bytes, offset: 0 }
    }

    fn take(&mut self, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let chunk: [u8; 8] = self.bytes[self.offset..self.offset + 8].try_into().unwrap();
            out.push(f64::from_le_bytes(chunk));
            self.offset += 8;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptors::PointDocument;
    use std::collections::BTreeMap;

    fn doc(pairs: &[(usize, u32)]) -> PointDocument {
        PointDocument {
            counts: pairs.iter().copied().collect::<BTreeMap<_, _>>(),
        }
    }

    fn trained_registry() -> PartRegistry {
        let hyper = HdpHyperparams {
            max_topics: 4,
            max_tables: 2,
            ..HdpHyperparams::default()
        };
        let mut registry = PartRegistry::new(hyper, 6).unwrap();
        registry.new_part("first", 1).unwrap();
        registry.new_part("second", 2).unwrap();
        registry
            .update_minibatch("first", &[doc(&[(0, 3), (1, 1)])])
            .unwrap();
        registry
            .update_minibatch("second", &[doc(&[(4, 2), (5, 5)])])
            .unwrap();
        registry
    }

    #[test]
    fn checkpoint_round_trips_bit_identically() {
        let registry = trained_registry();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&registry, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();

        assert_eq!(loaded.vocab(), registry.vocab());
        assert_eq!(loaded.hyper(), registry.hyper());
        assert_eq!(
            loaded.labels().collect::<Vec<_>>(),
            registry.labels().collect::<Vec<_>>()
        );
        for label in ["first", "second"] {
            assert_eq!(
                part_blob(loaded.model(label).unwrap()),
                part_blob(registry.model(label).unwrap())
            );
        }

        // Identical bytes on re-save, identical predictions.
        let path2 = dir.path().join("model2.ckpt");
        save_checkpoint(&loaded, &path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());

        let probe = doc(&[(0, 1), (5, 2)]);
        let a = registry.predict_part(&probe).unwrap();
        let b = loaded.predict_part(&probe).unwrap();
        assert_eq!(a.label, b.label);
        assert_eq!(a.scores, b.scores);
    }

    #[test]
    fn part_labels_with_spaces_survive() {
        let hyper = HdpHyperparams {
            max_topics: 3,
            max_tables: 2,
            ..HdpHyperparams::default()
        };
        let mut registry = PartRegistry::new(hyper, 4).unwrap();
        registry.new_part("left arm rest", 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&registry, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert!(loaded.contains("left arm rest"));
    }

    #[test]
    fn corrupted_payload_is_reported() {
        let registry = trained_registry();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&registry, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 8);
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_checkpoint(&dir.path().join("absent.ckpt")),
            Err(Error::Io { .. })
        ));
    }
}
