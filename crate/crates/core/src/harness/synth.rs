//! Synthetic corpus with planted senses.
//!
//! Each sentence uses one ambiguous lemma under sense `A` or `B`. The sense
//! picks the verbs and adjectives around the lemma, and every wordpiece of
//! the sentence is embedded with the sense as its tag, so the same surface
//! word lands in a different place under each sense. A pair is labelled `T`
//! exactly when both sentences use the same sense.

use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{write_dataset, HarnessError, Label, PairRecord};
use crate::conllu::{serialize_conllu, ConlluToken, DependencySentence};
use crate::embedstore::{synthetic_embeddings, write_embedding_file, SentenceEmbeddings, CONTINUATION_PREFIX};

const LEMMAS: [&str; 24] = [
    "bank", "mouse", "bark", "spring", "match", "pitcher", "crane", "seal", "bat", "bow", "current", "date",
    "fair", "jam", "letter", "mine", "novel", "palm", "pen", "ring", "rock", "scale", "stamp", "trunk",
];
const VERBS: [&str; 24] = [
    "sees", "finds", "moves", "holds", "likes", "takes", "needs", "shows", "keeps", "loses", "wants", "breaks",
    "carries", "watches", "paints", "cleans", "describes", "follows", "prefers", "studies", "borrows", "catches",
    "buys", "sells",
];
const ADJECTIVES: [&str; 16] = [
    "old", "small", "large", "bright", "quiet", "heavy", "strange", "famous", "broken", "wooden", "ancient",
    "simple", "modern", "narrow", "gentle", "rapid",
];
const NOUNS: [&str; 12] = [
    "teacher", "child", "farmer", "doctor", "artist", "student", "sailor", "driver", "painter", "writer", "worker",
    "player",
];
const SENSES: [&str; 2] = ["A", "B"];

/// Words longer than this are split into wordpieces.
const PIECE_LEN: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub train_pairs: usize,
    pub dev_pairs: usize,
    pub dim: usize,
    /// Number of ambiguous lemmas, at most 24. Fewer lemmas give each one
    /// more training pairs.
    pub lemmas: usize,
    pub seed: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            train_pairs: 2000,
            dev_pairs: 400,
            dim: 32,
            lemmas: 12,
            seed: 0,
        }
    }
}

/// Where [`generate_corpus`] put things.
#[derive(Debug, Clone)]
pub struct SynthSummary {
    pub train: PathBuf,
    pub dev: PathBuf,
    pub embeddings: PathBuf,
    pub parses: PathBuf,
    pub train_pairs: usize,
    pub dev_pairs: usize,
    /// Pairs labelled `T` across both splits.
    pub positives: usize,
}

/// Context words of one lemma under one sense.
struct SenseContext {
    verbs: Vec<&'static str>,
    adjectives: Vec<&'static str>,
}

struct Generator {
    rng: ChaCha8Rng,
    contexts: Vec<[SenseContext; 2]>,
    opts: SynthOptions,
}

struct Sentence {
    text: String,
    span: (usize, usize),
    tree: DependencySentence,
    embeddings: SentenceEmbeddings,
}

fn pieces_of(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    if chars.len() <= PIECE_LEN + 1 {
        return vec![word.to_string()];
    }
    chars
        .chunks(PIECE_LEN)
        .enumerate()
        .map(|(i, c)| {
            let s: String = c.iter().collect();
            if i == 0 {
                s
            } else {
                format!("{CONTINUATION_PREFIX}{s}")
            }
        })
        .collect()
}

impl Generator {
    fn new(opts: &SynthOptions) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let contexts = (0..opts.lemmas)
            .map(|_| {
                [0, 1].map(|_| SenseContext {
                    verbs: VERBS.choose_multiple(&mut rng, 3).copied().collect(),
                    adjectives: ADJECTIVES.choose_multiple(&mut rng, 2).copied().collect(),
                })
            })
            .collect();
        Self {
            rng,
            contexts,
            opts: opts.clone(),
        }
    }

    fn sentence(&mut self, id: String, lemma: usize, sense: usize) -> Sentence {
        let ctx = &self.contexts[lemma][sense];
        let word = LEMMAS[lemma];
        let verb = *ctx.verbs.choose(&mut self.rng).expect("three verbs");
        let adj = *ctx.adjectives.choose(&mut self.rng).expect("two adjectives");
        let noun = *NOUNS.choose(&mut self.rng).expect("nouns");
        // (form, head, deprel, upos); the target position is returned alongside
        let (rows, target): (Vec<(&str, usize, &str, &str)>, usize) = match self.rng.random_range(0..3) {
            0 => (
                vec![
                    ("the", 3, "det", "DET"),
                    (adj, 3, "amod", "ADJ"),
                    (word, 4, "nsubj", "NOUN"),
                    (verb, 0, "root", "VERB"),
                    ("the", 6, "det", "DET"),
                    (noun, 4, "obj", "NOUN"),
                    (".", 4, "punct", "PUNCT"),
                ],
                3,
            ),
            1 => (
                vec![
                    ("the", 2, "det", "DET"),
                    (noun, 3, "nsubj", "NOUN"),
                    (verb, 0, "root", "VERB"),
                    ("the", 6, "det", "DET"),
                    (adj, 6, "amod", "ADJ"),
                    (word, 3, "obj", "NOUN"),
                    (".", 3, "punct", "PUNCT"),
                ],
                6,
            ),
            _ => (
                vec![
                    (word, 2, "nsubj", "NOUN"),
                    (verb, 0, "root", "VERB"),
                    (".", 2, "punct", "PUNCT"),
                ],
                1,
            ),
        };

        let mut text = String::new();
        let mut span = (0, 0);
        for (i, (form, ..)) in rows.iter().enumerate() {
            if i > 0 {
                text.push(' ');
            }
            let start = text.chars().count();
            text.push_str(form);
            if i + 1 == target {
                span = (start, start + form.chars().count());
            }
        }
        let tokens = rows
            .iter()
            .enumerate()
            .map(|(i, &(form, head, rel, upos))| ConlluToken::new(i + 1, form, head, rel).with_upos(upos))
            .collect();
        let tree = DependencySentence::new(tokens)
            .expect("templates are valid trees")
            .with_id(id.clone())
            .with_text(text.clone());
        let pieces: Vec<String> = rows.iter().flat_map(|(form, ..)| pieces_of(form)).collect();
        let embeddings = synthetic_embeddings(id, &pieces, SENSES[sense], self.opts.seed, self.opts.dim);
        Sentence {
            text,
            span,
            tree,
            embeddings,
        }
    }

    fn split(&mut self, prefix: &str, n: usize) -> (Vec<PairRecord>, Vec<DependencySentence>, Vec<SentenceEmbeddings>) {
        let mut records = Vec::with_capacity(n);
        let mut trees = Vec::with_capacity(2 * n);
        let mut embeddings = Vec::with_capacity(2 * n);
        let width = n.to_string().len();
        for i in 0..n {
            let id = format!("{prefix}.{i:0width$}");
            let lemma = self.rng.random_range(0..self.opts.lemmas);
            let senses = [self.rng.random_range(0..2), self.rng.random_range(0..2)];
            let s1 = self.sentence(format!("{id}.s1"), lemma, senses[0]);
            let s2 = self.sentence(format!("{id}.s2"), lemma, senses[1]);
            records.push(PairRecord {
                id,
                lang1: "en".into(),
                lang2: "en".into(),
                sentence1: s1.text,
                sentence2: s2.text,
                start1: s1.span.0,
                end1: s1.span.1,
                start2: s2.span.0,
                end2: s2.span.1,
                label: Some(if senses[0] == senses[1] { Label::T } else { Label::F }),
            });
            trees.extend([s1.tree, s2.tree]);
            embeddings.extend([s1.embeddings, s2.embeddings]);
        }
        (records, trees, embeddings)
    }
}

/// Writes `train.jsonl`, `dev.jsonl`, `embeddings/{train,dev}.wpe` and
/// `parses/{train,dev}.conllu` under `out`.
pub fn generate_corpus(opts: &SynthOptions, out: &Path) -> Result<SynthSummary, HarnessError> {
    if opts.lemmas == 0 || opts.lemmas > LEMMAS.len() {
        return Err(HarnessError::Config(format!(
            "lemma count must be between 1 and {}",
            LEMMAS.len()
        )));
    }
    if opts.dim == 0 || opts.train_pairs == 0 || opts.dev_pairs == 0 {
        return Err(HarnessError::Config(
            "dimension and pair counts must be positive".into(),
        ));
    }
    let embeddings_dir = out.join("embeddings");
    let parses_dir = out.join("parses");
    for dir in [out, &embeddings_dir, &parses_dir] {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }

    let mut gen = Generator::new(opts);
    let mut positives = 0;
    let mut paths = Vec::new();
    for (name, n) in [("train", opts.train_pairs), ("dev", opts.dev_pairs)] {
        let (records, trees, embeddings) = gen.split(name, n);
        positives += records.iter().filter(|r| r.label == Some(Label::T)).count();
        let data = out.join(format!("{name}.jsonl"));
        write_dataset(&data, &records)?;
        let wpe = embeddings_dir.join(format!("{name}.wpe"));
        write_embedding_file(&wpe, &embeddings).map_err(|source| HarnessError::Embed {
            path: wpe.display().to_string(),
            source,
        })?;
        let conllu = parses_dir.join(format!("{name}.conllu"));
        std::fs::write(&conllu, serialize_conllu(&trees)).map_err(|e| HarnessError::io(&conllu, e))?;
        paths.push(data);
    }
    log::info!(
        "synthetic corpus in {}: {} train, {} dev pairs, {positives} labelled T",
        out.display(),
        opts.train_pairs,
        opts.dev_pairs
    );
    let dev = paths.pop().expect("two splits");
    let train = paths.pop().expect("two splits");
    Ok(SynthSummary {
        train,
        dev,
        embeddings: embeddings_dir,
        parses: parses_dir,
        train_pairs: opts.train_pairs,
        dev_pairs: opts.dev_pairs,
        positives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{load_dataset, preprocess, Artifacts, PreprocessOptions};

    #[test]
    fn long_words_split() {
        assert_eq!(pieces_of("bank"), ["bank"]);
        assert_eq!(pieces_of("mouse"), ["mouse"]);
        assert_eq!(pieces_of("pitcher"), ["pitc", "##her"]);
        assert_eq!(pieces_of("describes"), ["desc", "##ribe", "##s"]);
    }

    #[test]
    fn small_corpus_is_consistent() {
        let dir = tempfile::tempdir().unwrap();
        let opts = SynthOptions {
            train_pairs: 40,
            dev_pairs: 10,
            dim: 8,
            lemmas: 5,
            seed: 11,
        };
        let s = generate_corpus(&opts, dir.path()).unwrap();
        let train = load_dataset(&s.train).unwrap();
        let dev = load_dataset(&s.dev).unwrap();
        assert_eq!((train.len(), dev.len()), (40, 10));
        assert!(s.positives > 0 && s.positives < 50);
        for r in train.iter().chain(&dev) {
            assert_eq!(r.target_text(1), r.target_text(2));
        }
        let arts = Artifacts::load(&s.embeddings, &s.parses, None).unwrap();
        let v = "concat+sum/none".parse().unwrap();
        let m = preprocess(&train, &arts, v, &PreprocessOptions::default()).unwrap();
        assert_eq!(m.rows.len(), 40);
        assert_eq!(m.dim(), 48);

        // same seed, same bytes
        let again = tempfile::tempdir().unwrap();
        generate_corpus(&opts, again.path()).unwrap();
        for f in ["train.jsonl", "dev.jsonl", "embeddings/train.wpe", "parses/dev.conllu"] {
            assert_eq!(
                std::fs::read(dir.path().join(f)).unwrap(),
                std::fs::read(again.path().join(f)).unwrap(),
                "{f}"
            );
        }
    }

    #[test]
    fn rejects_bad_options() {
        let dir = tempfile::tempdir().unwrap();
        let opts = SynthOptions {
            lemmas: 25,
            ..Default::default()
        };
        assert!(matches!(generate_corpus(&opts, dir.path()), Err(HarnessError::Config(_))));
    }
}
