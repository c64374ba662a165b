//! Single-site spaces, transition functions and admissible words.
//!
//! A finite alphabet carries a probability vector and the discrete metric.
//! The circle is discretized by `m` equispaced angles with equal weights
//! (the trapezoidal rule for the Haar measure), so any trigonometric
//! polynomial of degree below `m / 2` integrates exactly.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `sum(weights) - 1` accepted before exact renormalization.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Default cap on the number of words [`enumerate_words`] will materialize.
pub const DEFAULT_WORD_CAP: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphabetKind {
    Finite,
    Circle,
}

/// Discretized single-site space with its reference probability weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphabetSpec {
    kind: AlphabetKind,
    labels: Vec<String>,
    angles: Vec<f64>,
    weights: Vec<f64>,
}

impl AlphabetSpec {
    pub fn kind(&self) -> AlphabetKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn is_circle(&self) -> bool {
        self.kind == AlphabetKind::Circle
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, node: usize) -> f64 {
        self.weights[node]
    }

    /// Node labels (finite alphabets) or formatted angles (circle).
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Angles of the circle nodes; empty for finite alphabets.
    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Coordinate handed to observables: the angle on the circle, the node
    /// index otherwise.
    pub fn coordinate(&self, node: usize) -> f64 {
        match self.kind {
            AlphabetKind::Circle => self.angles[node],
            AlphabetKind::Finite => node as f64,
        }
    }

    /// Distance between two nodes: discrete metric, or chord length on the circle.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        match self.kind {
            AlphabetKind::Finite => {
                if a == b {
                    0.0
                } else {
                    1.0
                }
            }
            AlphabetKind::Circle => (2.0 * (0.5 * (self.angles[a] - self.angles[b])).sin()).abs(),
        }
    }

    /// Quadrature of `f` against the reference measure.
    pub fn integrate(&self, mut f: impl FnMut(usize) -> f64) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(k, w)| w * f(k))
            .sum()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Finite alphabet with the given labels and probability weights.
pub fn build_finite_alphabet<S: AsRef<str>>(labels: &[S], weights: &[f64]) -> Result<AlphabetSpec> {
    if labels.is_empty() {
        return Err(Error::invalid("empty label list"));
    }
    if labels.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: weights.len(),
        });
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
        return Err(Error::invalid(format!("non-positive weight {w}")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::invalid(format!("weights sum to {total}, not 1")));
    }
    let labels: Vec<String> = labels.iter().map(|l| l.as_ref().to_string()).collect();
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(Error::invalid(format!("duplicate label {l}")));
        }
    }
    Ok(AlphabetSpec {
        kind: AlphabetKind::Finite,
        labels,
        angles: Vec::new(),
        weights: weights.iter().map(|w| w / total).collect(),
    })
}

/// Finite alphabet with uniform weights.
pub fn build_uniform_alphabet<S: AsRef<str>>(labels: &[S]) -> Result<AlphabetSpec> {
    let w = vec![1.0 / labels.len().max(1) as f64; labels.len()];
    build_finite_alphabet(labels, &w)
}

/// Circle with `m` equispaced nodes `-pi + 2 pi k / m`, weights `1/m`.
pub fn build_circle_alphabet(m: usize) -> Result<AlphabetSpec> {
    if m < 4 {
        return Err(Error::invalid(format!("circle needs at least 4 nodes, got {m}")));
    }
    let angles: Vec<f64> = (0..m).map(|k| -PI + 2.0 * PI * k as f64 / m as f64).collect();
    Ok(AlphabetSpec {
        kind: AlphabetKind::Circle,
        labels: angles.iter().map(|a| format!("{a:.17e}")).collect(),
        angles,
        weights: vec![1.0 / m as f64; m],
    })
}

/// Boolean transition function on the nodes of an alphabet.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionFn {
    size: usize,
    entries: Vec<bool>,
    mixing_time: Option<usize>,
}

impl TransitionFn {
    /// `A == 1` on `size` nodes.
    pub fn full(size: usize) -> Self {
        TransitionFn {
            size,
            entries: vec![true; size * size],
            mixing_time: None,
        }
    }

    /// Builds from 0/1 rows; every row and column must contain a 1.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let size = rows.len();
        if size == 0 {
            return Err(Error::invalid("empty transition table"));
        }
        let mut entries = Vec::with_capacity(size * size);
        for row in rows {
            if row.len() != size {
                return Err(Error::DimensionMismatch {
                    expected: size,
                    got: row.len(),
                });
            }
            for &v in row {
                match v {
                    0 => entries.push(false),
                    1 => entries.push(true),
                    _ => return Err(Error::invalid(format!("transition entry {v} not in {{0,1}}"))),
                }
            }
        }
        let a = TransitionFn {
            size,
            entries,
            mixing_time: None,
        };
        for i in 0..size {
            if !(0..size).any(|j| a.allows(i, j)) {
                return Err(Error::invalid(format!("row {i} of the transition table is empty")));
            }
            if !(0..size).any(|j| a.allows(j, i)) {
                return Err(Error::invalid(format!("column {i} of the transition table is empty")));
            }
        }
        Ok(a)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// `A(from, to) == 1`.
    #[inline]
    pub fn allows(&self, from: usize, to: usize) -> bool {
        self.entries[from * self.size + to]
    }

    pub fn is_full(&self) -> bool {
        self.entries.iter().all(|&e| e)
    }

    pub fn mixing_time(&self) -> Option<usize> {
        self.mixing_time
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        self.entries
            .chunks(self.size)
            .map(|r| r.iter().map(|&e| e as u8).collect())
            .collect()
    }

    /// Runs [`check_mixing`] and records the result.
    pub fn with_verified_mixing(mut self, max_power: usize) -> Result<Self> {
        self.mixing_time = Some(check_mixing(&self, max_power)?);
        Ok(self)
    }

    /// Whether a word is admissible.
    pub fn admits(&self, word: &[usize]) -> bool {
        word.windows(2).all(|w| self.allows(w[0], w[1]))
    }
}

/// Least `N <= max_power` such that the `N`-step boolean power of `A` is all ones.
pub fn check_mixing(a: &TransitionFn, max_power: usize) -> Result<usize> {
    let n = a.size;
    if a.is_full() && max_power >= 1 {
        return Ok(1);
    }
    let mut power = a.entries.clone();
    for k in 1..=max_power {
        if power.iter().all(|&e| e) {
            return Ok(k);
        }
        let mut next = vec![false; n * n];
        for i in 0..n {
            for m in 0..n {
                if power[i * n + m] {
                    for j in 0..n {
                        next[i * n + j] |= a.entries[m * n + j];
                    }
                }
            }
        }
        power = next;
    }
    Err(Error::NotMixing { max_power })
}

/// Endpoint constraints for [`enumerate_words`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WordConstraint {
    Free,
    /// Last letter must be allowed to step into this node.
    Terminal(usize),
    /// First letter reachable from `.0`, last letter steps into `.1`.
    Endpoints(usize, usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordSet {
    pub length: usize,
    pub constraint: WordConstraint,
    pub words: Vec<Vec<usize>>,
}

impl WordSet {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Number of admissible words of a given length, computed without enumeration.
pub fn count_words(a: &TransitionFn, length: usize, constraint: WordConstraint) -> u128 {
    if length == 0 {
        return 1;
    }
    let n = a.size;
    let start_ok = |z: usize| match constraint {
        WordConstraint::Endpoints(s, _) => a.allows(s, z),
        _ => true,
    };
    let end_ok = |z: usize| match constraint {
        WordConstraint::Terminal(b) | WordConstraint::Endpoints(_, b) => a.allows(z, b),
        WordConstraint::Free => true,
    };
    let mut counts: Vec<u128> = (0..n).map(|z| start_ok(z) as u128).collect();
    for _ in 1..length {
        let mut next = vec![0u128; n];
        for (from, c) in counts.iter().enumerate() {
            if *c == 0 {
                continue;
            }
            for (to, slot) in next.iter_mut().enumerate() {
                if a.allows(from, to) {
                    *slot = slot.saturating_add(*c);
                }
            }
        }
        counts = next;
    }
    counts
        .iter()
        .enumerate()
        .filter(|(z, _)| end_ok(*z))
        .fold(0u128, |acc, (_, c)| acc.saturating_add(*c))
}

/// All admissible words of `length` satisfying `constraint`, in lexicographic order.
pub fn enumerate_words(
    a: &TransitionFn,
    length: usize,
    constraint: WordConstraint,
    cap: usize,
) -> Result<WordSet> {
    let needed = count_words(a, length, constraint);
    if needed > cap as u128 {
        return Err(Error::CapExceeded {
            what: "word enumeration",
            needed: usize::try_from(needed).unwrap_or(usize::MAX),
            cap,
        });
    }
    let mut words = Vec::with_capacity(needed as usize);
    if length > 0 {
        let mut word = Vec::with_capacity(length);
        extend_words(a, length, constraint, &mut word, &mut words);
    } else {
        words.push(Vec::new());
    }
    Ok(WordSet {
        length,
        constraint,
        words,
    })
}

fn extend_words(
    a: &TransitionFn,
    length: usize,
    constraint: WordConstraint,
    word: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if word.len() == length {
        let last = *word.last().expect("non-empty word");
        let ok = match constraint {
            WordConstraint::Free => true,
            WordConstraint::Terminal(b) | WordConstraint::Endpoints(_, b) => a.allows(last, b),
        };
        if ok {
            out.push(word.clone());
        }
        return;
    }
    for z in 0..a.size {
        let ok = match word.last() {
            Some(&prev) => a.allows(prev, z),
            None => match constraint {
                WordConstraint::Endpoints(s, _) => a.allows(s, z),
                _ => true,
            },
        };
        if ok {
            word.push(z);
            extend_words(a, length, constraint, word, out);
            word.pop();
        }
    }
}

/// JSON document describing an alphabet and its transition table.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AlphabetDocument {
    pub kind: Option<AlphabetKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<serde_json::Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<Vec<Vec<u8>>>,
}

impl AlphabetDocument {
    /// Builds the alphabet and its transition function (default `A == 1`).
    pub fn build(&self) -> Result<(AlphabetSpec, TransitionFn)> {
        let alphabet = match self.kind.unwrap_or(AlphabetKind::Finite) {
            AlphabetKind::Circle => {
                let m = self.nodes.ok_or_else(|| Error::invalid("circle alphabet needs \"nodes\""))?;
                build_circle_alphabet(m)?
            }
            AlphabetKind::Finite => {
                let labels: Vec<String> = self
                    .labels
                    .as_ref()
                    .ok_or_else(|| Error::invalid("finite alphabet needs \"labels\""))?
                    .iter()
                    .map(|v| match v {
                        serde_json::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect();
                match &self.weights {
                    Some(w) => build_finite_alphabet(&labels, w)?,
                    None => build_uniform_alphabet(&labels)?,
                }
            }
        };
        let transition = match &self.transition {
            Some(rows) => {
                if alphabet.is_circle() {
                    return Err(Error::Unsupported(
                        "constrained transitions on the circle".into(),
                    ));
                }
                let t = TransitionFn::from_rows(rows)?;
                if t.size() != alphabet.len() {
                    return Err(Error::DimensionMismatch {
                        expected: alphabet.len(),
                        got: t.size(),
                    });
                }
                t
            }
            None => TransitionFn::full(alphabet.len()),
        };
        Ok((alphabet, transition))
    }
}

/// Parses an alphabet JSON document.
pub fn load_alphabet_json(text: &str) -> Result<(AlphabetSpec, TransitionFn)> {
    let doc: AlphabetDocument =
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("alphabet JSON: {e}")))?;
    doc.build()
}
