use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ComposeError;

/// Value of the scalar boundary marker.
pub const SCALAR_MARKER: f64 = 9999.0;

/// How several dependents collapse into one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Sum,
    Average,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    /// target ∥ head ∥ dependents
    Concat,
    /// target ∥ head
    HeadOnly,
    /// target ⊙ head ⊙ dependents
    Elementwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureKind {
    /// Target word embedding only.
    Baseline,
    Syntactic {
        reduction: Reduction,
        aggregation: Aggregation,
    },
}

impl FeatureKind {
    pub const fn concat(aggregation: Aggregation) -> Self {
        FeatureKind::Syntactic {
            reduction: Reduction::Concat,
            aggregation,
        }
    }

    pub const fn head_only() -> Self {
        FeatureKind::Syntactic {
            reduction: Reduction::HeadOnly,
            aggregation: Aggregation::Sum,
        }
    }

    pub const fn elementwise(aggregation: Aggregation) -> Self {
        FeatureKind::Syntactic {
            reduction: Reduction::Elementwise,
            aggregation,
        }
    }

    /// Length of one sentence's contribution at embedding width `dim`.
    pub fn sentence_dim(self, dim: usize) -> usize {
        match self {
            FeatureKind::Baseline => dim,
            FeatureKind::Syntactic { reduction, .. } => match reduction {
                Reduction::Concat => 3 * dim,
                Reduction::HeadOnly => 2 * dim,
                Reduction::Elementwise => dim,
            },
        }
    }
}

/// Boundary between the two sentences of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Marker {
    /// The first sentence's separator vector.
    Sep,
    None,
    /// A single coordinate holding [`SCALAR_MARKER`].
    Scalar,
}

impl Marker {
    pub const ALL: [Marker; 3] = [Marker::Sep, Marker::None, Marker::Scalar];

    pub fn extra_dim(self, dim: usize) -> usize {
        match self {
            Marker::Sep => dim,
            Marker::None => 0,
            Marker::Scalar => 1,
        }
    }
}

/// Complete description of a pair feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub kind: FeatureKind,
    pub marker: Marker,
    /// Factor applied to the target slot; 1 leaves it untouched.
    pub amplify: f64,
}

impl Variant {
    pub fn new(kind: FeatureKind, marker: Marker) -> Self {
        Self {
            kind,
            marker,
            amplify: 1.0,
        }
    }

    pub fn amplified(mut self, factor: f64) -> Self {
        self.amplify = factor;
        self
    }

    /// Pair length: both sentences plus the marker.
    pub fn expected_dim(&self, dim: usize) -> usize {
        2 * self.kind.sentence_dim(dim) + self.marker.extra_dim(dim)
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Sum => "sum",
            Aggregation::Average => "average",
        })
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureKind::Baseline => f.write_str("baseline"),
            FeatureKind::Syntactic {
                reduction,
                aggregation,
            } => {
                let r = match reduction {
                    Reduction::Concat => "concat",
                    Reduction::HeadOnly => "head_only",
                    Reduction::Elementwise => "elementwise",
                };
                write!(f, "{r}+{aggregation}")
            }
        }
    }
}

impl fmt::Display for Marker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Marker::Sep => "sep1",
            Marker::None => "none",
            Marker::Scalar => "scalar9999",
        })
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/amp={}", self.kind, self.marker, self.amplify)
    }
}

fn bad(what: &'static str, value: &str) -> ComposeError {
    ComposeError::BadTag {
        what,
        value: value.to_string(),
    }
}

impl FromStr for Aggregation {
    type Err = ComposeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sum" => Ok(Aggregation::Sum),
            "average" | "avg" | "mean" => Ok(Aggregation::Average),
            _ => Err(bad("aggregation", s)),
        }
    }
}

impl FromStr for FeatureKind {
    type Err = ComposeError;

    /// `baseline`, `concat+sum`, `concat+average`, `head_only[+agg]`,
    /// `elementwise+sum`, `elementwise+average`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "baseline" {
            return Ok(FeatureKind::Baseline);
        }
        let (r, agg) = s.split_once('+').unwrap_or((s, "sum"));
        let reduction = match r {
            "concat" => Reduction::Concat,
            "head_only" | "head-only" => Reduction::HeadOnly,
            "elementwise" => Reduction::Elementwise,
            _ => return Err(bad("feature kind", s)),
        };
        let aggregation = agg.parse()?;
        Ok(FeatureKind::Syntactic {
            reduction,
            aggregation,
        })
    }
}

impl FromStr for Marker {
    type Err = ComposeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sep" | "sep1" => Ok(Marker::Sep),
            "none" => Ok(Marker::None),
            "scalar" | "scalar9999" | "9999" => Ok(Marker::Scalar),
            _ => Err(bad("marker", s)),
        }
    }
}

impl FromStr for Variant {
    type Err = ComposeError;

    /// Parses the display form, e.g. `concat+sum/none/amp=1`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('/').collect();
        let (kind, marker, amp) = match parts.as_slice() {
            [k, m] => (k, m, None),
            [k, m, a] => (k, m, Some(*a)),
            _ => return Err(bad("variant", s)),
        };
        let amplify = match amp {
            None => 1.0,
            Some(a) => a
                .strip_prefix("amp=")
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| bad("amplification", a))?,
        };
        Ok(Variant {
            kind: kind.parse()?,
            marker: marker.parse()?,
            amplify,
        })
    }
}
