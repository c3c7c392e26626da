//! Argumentation-based incremental category recognition.
//!
//! Training turns every observed (part set, category) example into weighted
//! `pre -> post` rules, one per non-empty subset of the parts up to a
//! configured size. Two rules attack each other when they share the same
//! antecedent but conclude differently; a rule supports another when its
//! conclusion feeds the other's antecedent. Prediction keeps the rules whose
//! antecedent is covered by the observed part labels, resolves attacks in
//! favor of strictly heavier rules, sums the surviving weights per category
//! and returns the winner together with the rule chain that produced it.
//!
//! Because every subset of the training parts carries its own rule, dropping
//! parts (occlusion) leaves the rules of the surviving parts intact, and the
//! model keeps recognizing the category from whatever is left.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// A weighted inference rule: observing all of `pre` is a reason to
/// conclude `post`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Argument {
    pub pre: BTreeSet<String>,
    pub post: String,
    /// Observation count backing this rule.
    pub weight: u64,
}

impl Argument {
    pub fn new<I, S>(pre: I, post: impl Into<String>, weight: u64) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Argument {
            pre: pre.into_iter().map(Into::into).collect(),
            post: post.into(),
            weight,
        }
    }

    fn render(&self) -> String {
        let pre: Vec<&str> = self.pre.iter().map(|s| s.as_str()).collect();
        format!("{} \u{2192} {}", pre.join(","), self.post)
    }
}

/// A and B attack each other iff they share the antecedent but disagree on
/// the conclusion. Symmetric and irreflexive on stored arguments.
pub fn attacks(a: &Argument, b: &Argument) -> bool {
    a.pre == b.pre && a.post != b.post
}

/// A supports B iff A's conclusion occurs in B's antecedent.
pub fn supports(a: &Argument, b: &Argument) -> bool {
    b.pre.contains(&a.post)
}

/// The rule chain behind one prediction, ordered so that every element
/// supports the next and the last concludes the predicted category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Explanation {
    pub chain: Vec<Argument>,
    pub predicted: String,
}

/// Render an explanation as one `pre1,pre2 -> post` line per chain element.
pub fn explain(explanation: &Explanation) -> String {
    let mut out = String::new();
    for (i, argument) in explanation.chain.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&argument.render());
    }
    out
}

/// The rule store: arguments keyed by (pre, post) with duplicate
/// observations merged into weights, plus the set of known categories.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ArgumentationModel {
    arguments: BTreeMap<(BTreeSet<String>, String), u64>,
    categories: BTreeSet<String>,
    max_pre_size: usize,
}

impl ArgumentationModel {
    pub fn new(max_pre_size: usize) -> Self {
        ArgumentationModel {
            arguments: BTreeMap::new(),
            categories: BTreeSet::new(),
            max_pre_size: max_pre_size.max(1),
        }
    }

    pub fn len(&self) -> usize {
        self.arguments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arguments.is_empty()
    }

    pub fn categories(&self) -> &BTreeSet<String> {
        &self.categories
    }

    /// Stored arguments in deterministic key order.
    pub fn arguments(&self) -> impl Iterator<Item = Argument> + '_ {
        self.arguments.iter().map(|((pre, post), &weight)| Argument {
            pre: pre.clone(),
            post: post.clone(),
            weight,
        })
    }

    fn upsert(&mut self, pre: BTreeSet<String>, post: String, weight: u64) {
        if pre.is_empty() || pre.contains(&post) {
            return;
        }
        *self.arguments.entry((pre, post)).or_insert(0) += weight;
    }

    /// Record one training example: every non-empty subset of `part_labels`
    /// up to the configured size becomes (or strengthens) a rule for
    /// `category`. Online: no past data is revisited.
    pub fn train(&mut self, part_labels: &BTreeSet<String>, category: &str) -> Result<()> {
        if part_labels.is_empty() {
            return Err(Error::EmptyPartSet);
        }
        let labels: Vec<&String> = part_labels.iter().collect();
        let mut subset: Vec<usize> = Vec::new();
        enumerate_subsets(&labels, self.max_pre_size, 0, &mut subset, &mut |chosen| {
            let pre: BTreeSet<String> = chosen.iter().map(|&i| labels[i].clone()).collect();
            self_upsert(&mut self.arguments, pre, category);
        });
        self.categories.insert(category.to_string());
        Ok(())
    }

    /// Merge hand-written arguments (the debugging path: users inject
    /// explanations). Weights add onto existing rules. Conclusions that no
    /// stored antecedent mentions are treated as categories.
    pub fn import(&mut self, text: &str) -> Result<()> {
        for line in text.lines() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let argument = parse_argument_line(trimmed)?;
            self.upsert(argument.pre, argument.post, argument.weight);
        }
        // A conclusion is a category unless some rule consumes it.
        let consumed: BTreeSet<&String> =
            self.arguments.keys().flat_map(|(pre, _)| pre.iter()).collect();
        for (_, post) in self.arguments.keys() {
            if !consumed.contains(post) {
                self.categories.insert(post.clone());
            }
        }
        Ok(())
    }

    /// Serialize as `pre1,pre2 -> post : weight` lines in key order.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for ((pre, post), weight) in &self.arguments {
            let pre: Vec<&str> = pre.iter().map(|s| s.as_str()).collect();
            writeln!(out, "{} -> {} : {}", pre.join(","), post, weight).unwrap();
        }
        out
    }

    /// Arguments whose antecedent is covered by the observed labels, after
    /// attack resolution: within a group sharing the same antecedent, only a
    /// strictly heaviest rule survives; an equal-weight clash defeats the
    /// whole group.
    fn surviving_candidates(&self, part_labels: &BTreeSet<String>) -> Vec<Argument> {
        let mut groups: BTreeMap<&BTreeSet<String>, Vec<(&String, u64)>> = BTreeMap::new();
        for ((pre, post), &weight) in &self.arguments {
            if pre.is_subset(part_labels) {
                groups.entry(pre).or_default().push((post, weight));
            }
        }
        let mut survivors = Vec::new();
        for (pre, members) in groups {
            let max = members.iter().map(|&(_, w)| w).max().unwrap();
            let mut at_max = members.iter().filter(|&&(_, w)| w == max);
            let heaviest = at_max.next().unwrap();
            if at_max.next().is_some() && members.len() > 1 {
                continue; // tied attackers defeat each other
            }
            if members.len() > 1 {
                survivors.push(Argument {
                    pre: pre.clone(),
                    post: heaviest.0.clone(),
                    weight: heaviest.1,
                });
            } else {
                for (post, weight) in members {
                    survivors.push(Argument {
                        pre: pre.clone(),
                        post: post.clone(),
                        weight,
                    });
                }
            }
        }
        survivors
    }

    /// Predict the category of an object from its observed part labels and
    /// assemble the explanation chain. Deterministic given the model.
    pub fn predict(&self, part_labels: &BTreeSet<String>) -> Result<(String, Explanation)> {
        let survivors = self.surviving_candidates(part_labels);

        // Category scores: total surviving weight, then specificity.
        let mut scores: BTreeMap<&str, (u64, usize)> = BTreeMap::new();
        for argument in &survivors {
            if !self.categories.contains(&argument.post) {
                continue;
            }
            let entry = scores.entry(argument.post.as_str()).or_insert((0, 0));
            entry.0 += argument.weight;
            entry.1 = entry.1.max(argument.pre.len());
        }
        let winner = scores
            .iter()
            .max_by(|a, b| {
                (a.1 .0, a.1 .1, std::cmp::Reverse(a.0)).cmp(&(b.1 .0, b.1 .1, std::cmp::Reverse(b.0)))
            })
            .map(|(category, _)| category.to_string())
            .ok_or(Error::UnknownObject)?;

        // Winning argument: heaviest, most specific rule of the category.
        let mut winning: Vec<&Argument> = survivors
            .iter()
            .filter(|a| a.post == winner)
            .collect();
        winning.sort_by(|a, b| {
            (b.weight, b.pre.len())
                .cmp(&(a.weight, a.pre.len()))
                .then_with(|| a.pre.cmp(&b.pre))
        });
        let top = winning[0].clone();

        // Walk the support relation backwards through the survivors to pick
        // up intermediate conclusions, most recent supporter first.
        let mut chain = vec![top];
        let mut visited: BTreeSet<String> = BTreeSet::new();
        visited.insert(winner.clone());
        loop {
            let head = &chain[0];
            let mut supporters: Vec<&Argument> = survivors
                .iter()
                .filter(|a| supports(a, head) && !visited.contains(&a.post))
                .collect();
            if supporters.is_empty() {
                break;
            }
            supporters.sort_by(|a, b| {
                (b.weight, b.pre.len())
                    .cmp(&(a.weight, a.pre.len()))
                    .then_with(|| a.pre.cmp(&b.pre))
                    .then_with(|| a.post.cmp(&b.post))
            });
            let supporter = supporters[0].clone();
            visited.insert(supporter.post.clone());
            chain.insert(0, supporter);
        }

        Ok((
            winner.clone(),
            Explanation {
                chain,
                predicted: winner,
            },
        ))
    }
}

fn self_upsert(
    arguments: &mut BTreeMap<(BTreeSet<String>, String), u64>,
    pre: BTreeSet<String>,
    post: &str,
) {
    if pre.is_empty() || pre.contains(post) {
        return;
    }
    *arguments.entry((pre, post.to_string())).or_insert(0) += 1;
}

fn enumerate_subsets(
    labels: &[&String],
    max_size: usize,
    start: usize,
    current: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    if !current.is_empty() {
        visit(current);
    }
    if current.len() == max_size {
        return;
    }
    for i in start..labels.len() {
        current.push(i);
        enumerate_subsets(labels, max_size, i + 1, current, visit);
        current.pop();
    }
}

fn parse_argument_line(line: &str) -> Result<Argument> {
    let bad = || Error::ArgumentParse(line.to_string());
    let (lhs, rest) = line.split_once("->").ok_or_else(bad)?;
    let (post, weight) = rest.split_once(':').ok_or_else(bad)?;
    let pre: BTreeSet<String> = lhs
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if pre.is_empty() {
        return Err(bad());
    }
    let post = post.trim().to_string();
    if post.is_empty() || pre.contains(&post) {
        return Err(bad());
    }
    let weight: u64 = weight.trim().parse().map_err(|_| bad())?;
    Ok(Argument { pre, post, weight })
}
