//! Cylinder observables `f(omega_0, ..., omega_{D-1})`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::alphabet::AlphabetSpec;
use crate::error::{Error, Result};

type Eval = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A function of the first `depth` coordinates.
///
/// Coordinates are passed as `f64`: node indices for finite alphabets,
/// angles for the circle. Evaluation never sees more than `depth` values.
#[derive(Clone)]
pub struct Observable {
    name: String,
    depth: usize,
    f: Arc<Eval>,
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Observable")
            .field("name", &self.name)
            .field("depth", &self.depth)
            .finish()
    }
}

impl Observable {
    pub fn new(
        name: impl Into<String>,
        depth: usize,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Observable {
            name: name.into(),
            depth: depth.max(1),
            f: Arc::new(f),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Evaluates on coordinates; extra trailing coordinates are ignored.
    pub fn eval(&self, coords: &[f64]) -> f64 {
        (self.f)(&coords[..self.depth])
    }

    /// Evaluates on node indices of `alphabet`.
    pub fn eval_nodes(&self, alphabet: &AlphabetSpec, word: &[usize]) -> f64 {
        let coords: Vec<f64> = word[..self.depth].iter().map(|&z| alphabet.coordinate(z)).collect();
        (self.f)(&coords)
    }

    pub fn constant(c: f64) -> Self {
        Observable::new(format!("const({c})"), 1, move |_| c)
    }

    /// `1_{[word]}` on node indices.
    pub fn indicator_word(word: &[usize]) -> Self {
        let w: Vec<usize> = word.to_vec();
        let name = format!("1[{}]", w.iter().map(|z| z.to_string()).collect::<Vec<_>>().join(","));
        Observable::new(name, w.len(), move |x| {
            w.iter().zip(x).all(|(&a, &b)| b == a as f64) as u8 as f64
        })
    }

    /// `f(omega) = values[omega_0]`.
    pub fn site(values: &[f64]) -> Self {
        let v = values.to_vec();
        Observable::new("site", 1, move |x| v[x[0] as usize])
    }

    /// Table over all `m^depth` words in mixed radix.
    pub fn table(m: usize, depth: usize, values: &[f64]) -> Result<Self> {
        let total = m.pow(depth as u32);
        if values.len() != total {
            return Err(Error::DimensionMismatch {
                expected: total,
                got: values.len(),
            });
        }
        let v = values.to_vec();
        Ok(Observable::new("table", depth, move |x| {
            let idx = x.iter().fold(0usize, |acc, &z| acc * m + z as usize);
            v[idx]
        }))
    }

    /// `cos theta_0`.
    pub fn cos_first() -> Self {
        Observable::new("cos(theta0)", 1, |x| x[0].cos())
    }

    /// `cos(theta_0 - theta_1)`.
    pub fn cos_diff() -> Self {
        Observable::new("cos(theta0-theta1)", 2, |x| (x[0] - x[1]).cos())
    }
}

/// Serializable observable description used by configs and the CLI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum ObservableSpec {
    Constant { value: f64 },
    /// Indicator of a cylinder given by node labels.
    Indicator { word: Vec<String> },
    Site { values: Vec<f64> },
    Table { depth: usize, values: Vec<f64> },
    Cos,
    CosDiff,
}

impl ObservableSpec {
    pub fn build(&self, alphabet: &AlphabetSpec) -> Result<Observable> {
        match self {
            ObservableSpec::Constant { value } => Ok(Observable::constant(*value)),
            ObservableSpec::Indicator { word } => {
                if word.is_empty() {
                    return Err(Error::invalid("indicator word is empty"));
                }
                let nodes = word
                    .iter()
                    .map(|l| {
                        alphabet
                            .index_of(l)
                            .ok_or_else(|| Error::invalid(format!("unknown label {l}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Observable::indicator_word(&nodes))
            }
            ObservableSpec::Site { values } => {
                if values.len() != alphabet.len() {
                    return Err(Error::DimensionMismatch {
                        expected: alphabet.len(),
                        got: values.len(),
                    });
                }
                Ok(Observable::site(values))
            }
            ObservableSpec::Table { depth, values } => Observable::table(alphabet.len(), *depth, values),
            ObservableSpec::Cos | ObservableSpec::CosDiff if !alphabet.is_circle() => {
                Err(Error::invalid("angle observables need a circle alphabet"))
            }
            ObservableSpec::Cos => Ok(Observable::cos_first()),
            ObservableSpec::CosDiff => Ok(Observable::cos_diff()),
        }
    }
}
