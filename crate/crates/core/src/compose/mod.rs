//! Feature composition.
//!
//! A sentence contributes three word embeddings: the target word, its head
//! and the aggregate of its dependents (missing slots are zero). Those are
//! either concatenated, reduced (head-only or element-wise product) or, for
//! the baseline, replaced by the target alone. Two sentences are then joined
//! around a boundary marker.

mod variant;

use thiserror::Error;

use crate::conllu::{ConlluError, DependencySentence};
use crate::embedstore::{merge_subwords, EmbedError, SentenceEmbeddings, WordAlignment};

pub use variant::{Aggregation, FeatureKind, Marker, Reduction, Variant, SCALAR_MARKER};

#[derive(Debug, Error)]
pub enum ComposeError {
    #[error(transparent)]
    Tree(#[from] ConlluError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("token {index} has no wordpiece alignment")]
    Unaligned { index: usize },
    #[error("no target tokens given")]
    EmptyTarget,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unknown {what} {value:?}")]
    BadTag { what: &'static str, value: String },
}

/// Which dependents take part in the aggregate slot.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DependentFilter {
    #[default]
    All,
    /// Drop dependents tagged `PUNCT`.
    NoPunct,
}

/// The three word-level slots of one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceFeature {
    pub target: Vec<f64>,
    pub head: Vec<f64>,
    pub dep: Vec<f64>,
    pub dep_count: usize,
    pub has_head: bool,
    pub aggregation: Aggregation,
}

impl SentenceFeature {
    pub fn dim(&self) -> usize {
        self.target.len()
    }

    /// Per-sentence vector for `kind`.
    pub fn flatten(&self, kind: FeatureKind) -> Vec<f64> {
        match kind {
            FeatureKind::Baseline => self.target.clone(),
            FeatureKind::Syntactic { reduction, .. } => match reduction {
                Reduction::Concat => [&self.target[..], &self.head, &self.dep].concat(),
                Reduction::HeadOnly => reduce_head_only(self),
                Reduction::Elementwise => reduce_elementwise(self),
            },
        }
    }
}

/// Word embedding of a 1-based parser token.
pub fn word_embedding(
    emb: &SentenceEmbeddings,
    align: &WordAlignment,
    index: usize,
) -> Result<Vec<f64>, ComposeError> {
    let range = align
        .pieces_for(index)
        .ok_or(ComposeError::Unaligned { index })?;
    Ok(merge_subwords(emb.pieces(), range)?)
}

fn mean_of(vectors: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut acc = vec![0.0; dim];
    for v in vectors {
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
    }
    let n = vectors.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// Target-only feature; a multi-token target is the mean of its tokens.
pub fn baseline_feature(
    emb: &SentenceEmbeddings,
    align: &WordAlignment,
    targets: &[usize],
) -> Result<Vec<f64>, ComposeError> {
    match targets {
        [] => Err(ComposeError::EmptyTarget),
        [one] => word_embedding(emb, align, *one),
        many => {
            let words = many
                .iter()
                .map(|&t| word_embedding(emb, align, t))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(mean_of(&words, emb.dim()))
        }
    }
}

/// Target/head/dependents feature of a single-token target, using every
/// dependent.
pub fn sentence_feature(
    emb: &SentenceEmbeddings,
    align: &WordAlignment,
    tree: &DependencySentence,
    target: usize,
    mode: Aggregation,
) -> Result<SentenceFeature, ComposeError> {
    sentence_feature_span(emb, align, tree, &[target], mode, DependentFilter::All)
}

/// Target/head/dependents feature of a target covering one or more tokens.
///
/// For a span, the head is the external head of its first token whose head
/// lies outside the span, and the dependents are all tokens outside the span
/// attached to any span token.
pub fn sentence_feature_span(
    emb: &SentenceEmbeddings,
    align: &WordAlignment,
    tree: &DependencySentence,
    targets: &[usize],
    mode: Aggregation,
    filter: DependentFilter,
) -> Result<SentenceFeature, ComposeError> {
    let dim = emb.dim();
    let target = baseline_feature(emb, align, targets)?;

    let mut head_index = None;
    for &t in targets {
        if let Some(h) = tree.head_of(t)? {
            if !targets.contains(&h) {
                head_index = Some(h);
                break;
            }
        }
    }
    let head = match head_index {
        Some(h) => word_embedding(emb, align, h)?,
        None => vec![0.0; dim],
    };

    let mut deps = Vec::new();
    for &t in targets {
        for d in tree.dependents_of(t)? {
            if targets.contains(&d) {
                continue;
            }
            if filter == DependentFilter::NoPunct && tree.token(d)?.is_punct() {
                continue;
            }
            deps.push(d);
        }
    }
    deps.sort_unstable();
    deps.dedup();

    let mut dep = vec![0.0; dim];
    for &d in &deps {
        let w = word_embedding(emb, align, d)?;
        for (a, x) in dep.iter_mut().zip(&w) {
            *a += x;
        }
    }
    if mode == Aggregation::Average && !deps.is_empty() {
        let k = deps.len() as f64;
        dep.iter_mut().for_each(|a| *a /= k);
    }

    Ok(SentenceFeature {
        target,
        head,
        dep,
        dep_count: deps.len(),
        has_head: head_index.is_some(),
        aggregation: mode,
    })
}

/// `target ∥ head`.
pub fn reduce_head_only(f: &SentenceFeature) -> Vec<f64> {
    [&f.target[..], &f.head].concat()
}

/// `target ⊙ head ⊙ dep`.
pub fn reduce_elementwise(f: &SentenceFeature) -> Vec<f64> {
    f.target
        .iter()
        .zip(&f.head)
        .zip(&f.dep)
        .map(|((t, h), d)| t * h * d)
        .collect()
}

pub fn amplify_target(f: &SentenceFeature, factor: f64) -> SentenceFeature {
    let mut out = f.clone();
    out.target.iter_mut().for_each(|v| *v *= factor);
    out
}

/// What goes between the two sentences.
#[derive(Debug, Clone, Copy)]
pub enum Boundary<'a> {
    Sep(&'a [f32]),
    None,
    Scalar,
}

pub fn pair_feature(f1: &[f64], f2: &[f64], boundary: Boundary<'_>) -> Result<Vec<f64>, ComposeError> {
    if f1.len() != f2.len() {
        return Err(ComposeError::DimensionMismatch {
            expected: f1.len(),
            found: f2.len(),
        });
    }
    let mut out = Vec::with_capacity(2 * f1.len() + 1);
    out.extend_from_slice(f1);
    match boundary {
        Boundary::Sep(sep) => out.extend(sep.iter().map(|&v| f64::from(v))),
        Boundary::None => {}
        Boundary::Scalar => out.push(SCALAR_MARKER),
    }
    out.extend_from_slice(f2);
    Ok(out)
}

/// A composed classifier input, tagged with the variant that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
    variant: Variant,
    expected_dim: usize,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, variant: Variant, embed_dim: usize) -> Result<Self, ComposeError> {
        let expected_dim = variant.expected_dim(embed_dim);
        if values.len() != expected_dim {
            return Err(ComposeError::DimensionMismatch {
                expected: expected_dim,
                found: values.len(),
            });
        }
        Ok(Self {
            values,
            variant,
            expected_dim,
        })
    }

    /// Composes the pair vector for `variant`. The separator vector, when the
    /// marker asks for one, is `sep` (the first sentence's).
    pub fn compose(
        variant: Variant,
        s1: &SentenceFeature,
        s2: &SentenceFeature,
        sep: &[f32],
    ) -> Result<Self, ComposeError> {
        let dim = s1.dim();
        if s2.dim() != dim || sep.len() != dim {
            return Err(ComposeError::DimensionMismatch {
                expected: dim,
                found: if s2.dim() != dim { s2.dim() } else { sep.len() },
            });
        }
        let prep = |s: &SentenceFeature| {
            if variant.amplify == 1.0 {
                s.flatten(variant.kind)
            } else {
                amplify_target(s, variant.amplify).flatten(variant.kind)
            }
        };
        let boundary = match variant.marker {
            Marker::Sep => Boundary::Sep(sep),
            Marker::None => Boundary::None,
            Marker::Scalar => Boundary::Scalar,
        };
        let values = pair_feature(&prep(s1), &prep(s2), boundary)?;
        Self::new(values, variant, dim)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn expected_dim(&self) -> usize {
        self.expected_dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::ConlluToken;
    use crate::embedstore::{align_words, WordpieceRecord};

    fn feature(target: &[f64], head: &[f64], dep: &[f64]) -> SentenceFeature {
        SentenceFeature {
            target: target.to_vec(),
            head: head.to_vec(),
            dep: dep.to_vec(),
            dep_count: 1,
            has_head: true,
            aggregation: Aggregation::Sum,
        }
    }

    /// "the big cat sleeps": the/big -> cat -> sleeps(root); "cat" split in two pieces.
    fn sample() -> (SentenceEmbeddings, DependencySentence) {
        let pieces = vec![
            WordpieceRecord::new("the", vec![1.0, 0.0]),
            WordpieceRecord::new("big", vec![0.0, 2.0]),
            WordpieceRecord::new("ca", vec![3.0, 1.0]),
            WordpieceRecord::new("##t", vec![1.0, 3.0]),
            WordpieceRecord::new("sleeps", vec![-1.0, 5.0]),
        ];
        let emb = SentenceEmbeddings::new("s", pieces, vec![9.0, 9.0], 2).unwrap();
        let tree = DependencySentence::new(vec![
            ConlluToken::new(1, "the", 3, "det"),
            ConlluToken::new(2, "big", 3, "amod"),
            ConlluToken::new(3, "cat", 4, "nsubj"),
            ConlluToken::new(4, "sleeps", 0, "root"),
        ])
        .unwrap();
        (emb, tree)
    }

    #[test]
    fn slots_of_a_word_with_head_and_dependents() {
        let (emb, tree) = sample();
        let align = align_words(&tree.forms(), emb.pieces()).unwrap();
        let f = sentence_feature(&emb, &align, &tree, 3, Aggregation::Sum).unwrap();
        assert_eq!(f.target, vec![2.0, 2.0]);
        assert_eq!(f.head, vec![-1.0, 5.0]);
        assert_eq!(f.dep, vec![1.0, 2.0]);
        assert_eq!(f.dep_count, 2);
        let avg = sentence_feature(&emb, &align, &tree, 3, Aggregation::Average).unwrap();
        assert_eq!(avg.dep, vec![0.5, 1.0]);
    }

    #[test]
    fn leaf_has_zero_dependents() {
        let (emb, tree) = sample();
        let align = align_words(&tree.forms(), emb.pieces()).unwrap();
        let f = sentence_feature(&emb, &align, &tree, 1, Aggregation::Average).unwrap();
        assert_eq!(f.dep, vec![0.0, 0.0]);
        assert_eq!(f.dep_count, 0);
        assert_eq!(f.head, vec![2.0, 2.0]);
    }

    #[test]
    fn lone_root_is_all_zero_context() {
        let emb = SentenceEmbeddings::new(
            "s",
            vec![WordpieceRecord::new("hi", vec![0.5, -0.5])],
            vec![0.0, 0.0],
            2,
        )
        .unwrap();
        let tree = DependencySentence::new(vec![ConlluToken::new(1, "hi", 0, "root")]).unwrap();
        let align = align_words(&tree.forms(), emb.pieces()).unwrap();
        let f = sentence_feature(&emb, &align, &tree, 1, Aggregation::Sum).unwrap();
        assert!(f.head.iter().chain(&f.dep).all(|&v| v == 0.0));
        assert!(!f.has_head);
    }

    #[test]
    fn punct_filter() {
        let pieces = vec![
            WordpieceRecord::new("go", vec![1.0]),
            WordpieceRecord::new("!", vec![7.0]),
        ];
        let emb = SentenceEmbeddings::new("s", pieces, vec![0.0], 1).unwrap();
        let tree = DependencySentence::new(vec![
            ConlluToken::new(1, "go", 0, "root"),
            ConlluToken::new(2, "!", 1, "punct").with_upos("PUNCT"),
        ])
        .unwrap();
        let align = align_words(&tree.forms(), emb.pieces()).unwrap();
        let all = sentence_feature_span(&emb, &align, &tree, &[1], Aggregation::Sum, DependentFilter::All).unwrap();
        let no_p =
            sentence_feature_span(&emb, &align, &tree, &[1], Aggregation::Sum, DependentFilter::NoPunct).unwrap();
        assert_eq!(all.dep, vec![7.0]);
        assert_eq!(no_p.dep, vec![0.0]);
    }

    #[test]
    fn multi_token_target() {
        let (emb, tree) = sample();
        let align = align_words(&tree.forms(), emb.pieces()).unwrap();
        // "big cat": head is "sleeps"; "the" is the only outside dependent.
        let f = sentence_feature_span(&emb, &align, &tree, &[2, 3], Aggregation::Sum, DependentFilter::All).unwrap();
        assert_eq!(f.target, vec![1.0, 2.0]);
        assert_eq!(f.head, vec![-1.0, 5.0]);
        assert_eq!(f.dep, vec![1.0, 0.0]);
        assert_eq!(f.dep_count, 1);
    }

    #[test]
    fn baseline_is_merged_target() {
        let (emb, tree) = sample();
        let align = align_words(&tree.forms(), emb.pieces()).unwrap();
        assert_eq!(baseline_feature(&emb, &align, &[2]).unwrap(), vec![0.0, 2.0]);
        assert_eq!(baseline_feature(&emb, &align, &[3]).unwrap(), vec![2.0, 2.0]);
        assert!(matches!(baseline_feature(&emb, &align, &[]), Err(ComposeError::EmptyTarget)));
        assert!(matches!(
            baseline_feature(&emb, &align, &[9]),
            Err(ComposeError::Unaligned { index: 9 })
        ));
    }

    #[test]
    fn elementwise_by_hand() {
        let f = feature(&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]);
        assert_eq!(reduce_elementwise(&f), vec![15.0, 48.0]);
        let z = feature(&[1.0, 2.0], &[0.0, 0.0], &[5.0, 6.0]);
        assert!(reduce_elementwise(&z).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn head_only_layout() {
        let f = feature(&[1.5, -2.0], &[0.0, 0.0], &[5.0, 6.0]);
        let r = reduce_head_only(&f);
        assert_eq!(&r[..2], &f.target[..]);
        assert!(r[2..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn amplification() {
        let f = feature(&[1.0, -1.0, 0.0], &[0.1, 0.2, 0.3], &[4.0, 5.0, 6.0]);
        assert_eq!(amplify_target(&f, 1.0), f);
        let a = amplify_target(&f, 2.0);
        assert_eq!(a.target, vec![2.0, -2.0, 0.0]);
        assert_eq!(a.head, f.head);
        assert_eq!(a.dep, f.dep);
    }

    #[test]
    fn pair_feature_markers() {
        let a = [1.0, 2.0];
        let b = [3.0, 4.0];
        assert_eq!(pair_feature(&a, &b, Boundary::None).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(
            pair_feature(&a, &b, Boundary::Scalar).unwrap(),
            vec![1.0, 2.0, 9999.0, 3.0, 4.0]
        );
        assert_eq!(
            pair_feature(&a, &b, Boundary::Sep(&[0.5, 0.25])).unwrap(),
            vec![1.0, 2.0, 0.5, 0.25, 3.0, 4.0]
        );
        assert!(pair_feature(&a, &b[..1], Boundary::None).is_err());
    }

    #[test]
    fn compose_checks_dimension() {
        let f = feature(&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]);
        let v = Variant::new(FeatureKind::concat(Aggregation::Sum), Marker::Sep);
        let fv = FeatureVector::compose(v, &f, &f, &[0.0, 0.0]).unwrap();
        assert_eq!(fv.len(), 14);
        assert_eq!(fv.expected_dim(), 14);
        assert!(FeatureVector::compose(v, &f, &f, &[0.0]).is_err());
        assert!(FeatureVector::new(vec![0.0; 3], v, 2).is_err());
    }
}
