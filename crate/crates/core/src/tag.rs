use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

/// Provenance of a gradient: which constraint (or which parameter value of a
/// parametric constraint) produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tag {
    /// Member `i` of a finite family.
    Constraint(usize),
    /// Term `k` (k >= 1, index value 1/k) of the countable sequence declared
    /// as family member `member`.
    Sequence { member: usize, k: usize },
    /// The limit k -> infinity (index value 0) of that sequence.
    SequenceLimit { member: usize },
    /// Grid point of a box index set.
    Parameter(Vec<f64>),
    /// Point produced by local refinement of a near-active grid point.
    Refined(Vec<f64>),
    /// Row `j` of a polyhedral description.
    Normal(usize),
}

impl Tag {
    /// Limit members are not part of the declared family; they close it up.
    pub fn is_limit(&self) -> bool {
        matches!(self, Tag::SequenceLimit { .. })
    }

    /// Index-set value for parametric tags.
    pub fn parameter(&self) -> Option<&[f64]> {
        match self {
            Tag::Parameter(t) | Tag::Refined(t) => Some(t),
            _ => None,
        }
    }
}

impl PartialEq for Tag {
    fn eq(&self, other: &Self) -> bool {
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        match (self, other) {
            (Tag::Constraint(a), Tag::Constraint(b)) => a == b,
            (Tag::Normal(a), Tag::Normal(b)) => a == b,
            (Tag::Sequence { member: a, k: i }, Tag::Sequence { member: b, k: j }) => {
                a == b && i == j
            }
            (Tag::SequenceLimit { member: a }, Tag::SequenceLimit { member: b }) => a == b,
            (Tag::Parameter(a), Tag::Parameter(b)) | (Tag::Refined(a), Tag::Refined(b)) => {
                bits(a) == bits(b)
            }
            _ => false,
        }
    }
}

impl Eq for Tag {}

impl Hash for Tag {
    fn hash<H: Hasher>(&self, state: &mut H) {
        std::mem::discriminant(self).hash(state);
        match self {
            Tag::Constraint(i) | Tag::Normal(i) => i.hash(state),
            Tag::Sequence { member, k } => {
                member.hash(state);
                k.hash(state);
            }
            Tag::SequenceLimit { member } => member.hash(state),
            Tag::Parameter(t) | Tag::Refined(t) => {
                for v in t {
                    v.to_bits().hash(state);
                }
            }
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |t: &[f64]| {
            t.iter()
                .map(|v| format!("{v}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        match self {
            Tag::Constraint(i) => write!(f, "c{i}"),
            Tag::Sequence { member, k } => write!(f, "c{member}[k={k}]"),
            Tag::SequenceLimit { member } => write!(f, "c{member}[k->inf]"),
            Tag::Parameter(t) => write!(f, "t=({})", list(t)),
            Tag::Refined(t) => write!(f, "t*=({})", list(t)),
            Tag::Normal(j) => write!(f, "a{j}"),
        }
    }
}
