//! Vector-valued cylinder potentials.

use serde::{Deserialize, Serialize};

use crate::alphabet::{enumerate_words, AlphabetSpec, TransitionFn, WordConstraint};
use crate::error::{Error, Result};

/// Largest number of admissible words used for the pairwise Lipschitz estimate.
const LIP_PAIR_WORDS: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PotentialKind {
    /// `psi_i = 1_[i]` for every node.
    Indicators,
    /// One scalar value per node (`+1/-1` spins and friends).
    PlusMinus,
    /// `psi(omega) = (cos theta_0, sin theta_0)` on the circle.
    Xy,
    /// Arbitrary table on admissible words.
    Table,
}

/// `q` potentials depending on the first `depth` coordinates.
///
/// Values are stored for every word of length `depth` in mixed radix
/// (first coordinate most significant); inadmissible words hold zeros.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialVec {
    kind: PotentialKind,
    q: usize,
    depth: usize,
    node_count: usize,
    values: Vec<f64>,
    sup_norm: f64,
    lip_bound: f64,
}

impl PotentialVec {
    /// Builds from a function on admissible `depth`-words.
    pub fn from_fn(
        kind: PotentialKind,
        alphabet: &AlphabetSpec,
        transition: &TransitionFn,
        q: usize,
        depth: usize,
        f: impl Fn(&[usize]) -> Vec<f64>,
    ) -> Result<Self> {
        if q == 0 {
            return Err(Error::invalid("potential dimension q must be positive"));
        }
        if depth == 0 {
            return Err(Error::invalid("potential depth must be at least 1"));
        }
        let m = alphabet.len();
        let total = m
            .checked_pow(depth as u32)
            .ok_or_else(|| Error::invalid("potential table too large"))?;
        let words = enumerate_words(transition, depth, WordConstraint::Free, total)?;
        let mut values = vec![0.0; total * q];
        for w in &words.words {
            let v = f(w);
            if v.len() != q {
                return Err(Error::DimensionMismatch {
                    expected: q,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("non-finite potential value on word {w:?}")));
            }
            let idx = word_index(w, m);
            values[idx * q..(idx + 1) * q].copy_from_slice(&v);
        }
        let mut p = PotentialVec {
            kind,
            q,
            depth,
            node_count: m,
            values,
            sup_norm: 0.0,
            lip_bound: 0.0,
        };
        p.sup_norm = words
            .words
            .iter()
            .map(|w| norm(p.at_word(w)))
            .fold(0.0, f64::max);
        p.lip_bound = lipschitz_estimate(&p, alphabet, &words.words);
        Ok(p)
    }

    /// `psi_i = 1_[i]`, `q = |E|`.
    pub fn indicators(alphabet: &AlphabetSpec, transition: &TransitionFn) -> Result<Self> {
        let m = alphabet.len();
        Self::from_fn(PotentialKind::Indicators, alphabet, transition, m, 1, |w| {
            let mut v = vec![0.0; m];
            v[w[0]] = 1.0;
            v
        })
    }

    /// Scalar potential `psi(omega) = values[omega_0]`.
    pub fn site_values(alphabet: &AlphabetSpec, transition: &TransitionFn, values: &[f64]) -> Result<Self> {
        if values.len() != alphabet.len() {
            return Err(Error::DimensionMismatch {
                expected: alphabet.len(),
                got: values.len(),
            });
        }
        Self::from_fn(PotentialKind::PlusMinus, alphabet, transition, 1, 1, |w| vec![values[w[0]]])
    }

    /// Scalar potential read off numeric labels (`"+1"`, `"-1"`, ...).
    pub fn plus_minus(alphabet: &AlphabetSpec, transition: &TransitionFn) -> Result<Self> {
        let values = alphabet
            .labels()
            .iter()
            .map(|l| {
                l.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(format!("label {l} is not numeric")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::site_values(alphabet, transition, &values)
    }

    /// `psi(omega) = (cos theta_0, sin theta_0)`.
    pub fn xy(alphabet: &AlphabetSpec, transition: &TransitionFn) -> Result<Self> {
        if !alphabet.is_circle() {
            return Err(Error::invalid("the XY potential lives on the circle"));
        }
        let angles = alphabet.angles().to_vec();
        Self::from_fn(PotentialKind::Xy, alphabet, transition, 2, 1, |w| {
            let (s, c) = angles[w[0]].sin_cos();
            vec![c, s]
        })
    }

    /// Explicit table: `rows[word_index]` holds the `q` values of that word.
    pub fn table(
        alphabet: &AlphabetSpec,
        transition: &TransitionFn,
        depth: usize,
        rows: &[Vec<f64>],
    ) -> Result<Self> {
        let m = alphabet.len();
        let total = m.pow(depth as u32);
        if rows.len() != total {
            return Err(Error::DimensionMismatch {
                expected: total,
                got: rows.len(),
            });
        }
        let q = rows.first().map(Vec::len).unwrap_or(0);
        Self::from_fn(PotentialKind::Table, alphabet, transition, q, depth, |w| {
            rows[word_index(w, m)].clone()
        })
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// `max ||psi(word)||` over admissible words.
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn lip_bound(&self) -> f64 {
        self.lip_bound
    }

    /// Values on a word of length at least `depth` (only the prefix is read).
    pub fn at_word(&self, word: &[usize]) -> &[f64] {
        let idx = word_index(&word[..self.depth], self.node_count);
        &self.values[idx * self.q..(idx + 1) * self.q]
    }

    /// Default confinement box half-width `4 ||psi||_inf + 1`.
    pub fn default_search_box(&self) -> f64 {
        4.0 * self.sup_norm + 1.0
    }
}

/// Mixed-radix index of a word over `m` letters.
pub fn word_index(word: &[usize], m: usize) -> usize {
    word.iter().fold(0, |acc, &z| acc * m + z)
}

/// Inverse of [`word_index`] for a given length.
pub fn word_from_index(mut idx: usize, m: usize, len: usize) -> Vec<usize> {
    let mut w = vec![0; len];
    for slot in w.iter_mut().rev() {
        *slot = idx % m;
        idx /= m;
    }
    w
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn lipschitz_estimate(p: &PotentialVec, alphabet: &AlphabetSpec, words: &[Vec<usize>]) -> f64 {
    let stride = words.len().div_ceil(LIP_PAIR_WORDS).max(1);
    let sample: Vec<&Vec<usize>> = words.iter().step_by(stride).collect();
    let mut best: f64 = 0.0;
    for (i, u) in sample.iter().enumerate() {
        for v in &sample[i + 1..] {
            let d: f64 = u
                .iter()
                .zip(v.iter())
                .enumerate()
                .map(|(k, (&a, &b))| alphabet.distance(a, b) / 2f64.powi(k as i32 + 1))
                .sum();
            if d > 0.0 {
                let diff: f64 = p
                    .at_word(u)
                    .iter()
                    .zip(p.at_word(v))
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                best = best.max(diff / d);
            }
        }
    }
    best
}
