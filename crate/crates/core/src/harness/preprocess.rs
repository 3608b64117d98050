//! Record → feature vector, with an on-disk cache.
//!
//! Cache files live in the cache directory under
//! `<variant>-<filter>-d<dim>-<digest>.feat`, where the digest is SHA-256 over
//! every input that can change the output (records, their embeddings and
//! parses, variant, filter). Layout:
//!
//! ```text
//! WSDFEAT1 variant=<tag> filter=<f> embed_dim=<d> dim=<H> count=<n>\n
//! n × { u32 LE id length, id bytes, H × f64 LE }
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{HarnessError, PairRecord};
use crate::compose::{sentence_feature_span, Aggregation, DependentFilter, FeatureKind, FeatureVector, Variant};
use crate::conllu::{parse_conllu, serialize_conllu, DependencySentence};
use crate::embedstore::{align_words, read_embedding_file, SentenceEmbeddings};

const CACHE_MAGIC: &str = "WSDFEAT1";

/// Embeddings and parses indexed by sentence id (`<record id>.s1` / `.s2`).
#[derive(Debug, Default)]
pub struct Artifacts {
    embeddings: BTreeMap<String, SentenceEmbeddings>,
    parses: BTreeMap<String, DependencySentence>,
}

fn files_with_extension(dir: &Path, ext: &str) -> Result<Vec<PathBuf>, HarnessError> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| HarnessError::io(dir, e))? {
        let path = entry.map_err(|e| HarnessError::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|x| x == ext) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

impl Artifacts {
    /// Reads every `*.wpe` file in `embeddings` and every `*.conllu` file in
    /// `parses`. With `wanted`, sentences outside that id set are dropped
    /// right after parsing to bound memory.
    pub fn load(
        embeddings: &Path,
        parses: &Path,
        wanted: Option<&BTreeSet<String>>,
    ) -> Result<Self, HarnessError> {
        let keep = |id: &str| wanted.is_none_or(|w| w.contains(id));
        let mut out = Artifacts::default();
        for path in files_with_extension(embeddings, "wpe")? {
            let sentences = read_embedding_file(&path).map_err(|source| HarnessError::Embed {
                path: path.display().to_string(),
                source,
            })?;
            for s in sentences.into_iter().filter(|s| keep(&s.id)) {
                out.insert_embeddings(s)?;
            }
        }
        for path in files_with_extension(parses, "conllu")? {
            let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
            let sentences = parse_conllu(&text).map_err(|source| HarnessError::Conllu {
                path: path.display().to_string(),
                source,
            })?;
            for s in sentences {
                let Some(id) = s.id.clone() else {
                    return Err(HarnessError::Config(format!(
                        "{}: sentence without a sent_id comment",
                        path.display()
                    )));
                };
                if keep(&id) {
                    out.insert_parse(id, s)?;
                }
            }
        }
        log::info!(
            "loaded {} embedded and {} parsed sentences",
            out.embeddings.len(),
            out.parses.len()
        );
        Ok(out)
    }

    pub fn from_parts(
        embeddings: Vec<SentenceEmbeddings>,
        parses: Vec<DependencySentence>,
    ) -> Result<Self, HarnessError> {
        let mut out = Artifacts::default();
        for e in embeddings {
            out.insert_embeddings(e)?;
        }
        for p in parses {
            let id = p
                .id
                .clone()
                .ok_or_else(|| HarnessError::Config("parse without a sentence id".into()))?;
            out.insert_parse(id, p)?;
        }
        Ok(out)
    }

    fn insert_embeddings(&mut self, s: SentenceEmbeddings) -> Result<(), HarnessError> {
        if self.embeddings.contains_key(&s.id) {
            return Err(HarnessError::DuplicateId { id: s.id });
        }
        self.embeddings.insert(s.id.clone(), s);
        Ok(())
    }

    fn insert_parse(&mut self, id: String, s: DependencySentence) -> Result<(), HarnessError> {
        if self.parses.contains_key(&id) {
            return Err(HarnessError::DuplicateId { id });
        }
        self.parses.insert(id, s);
        Ok(())
    }

    pub fn embeddings(&self, id: &str) -> Result<&SentenceEmbeddings, HarnessError> {
        self.embeddings.get(id).ok_or_else(|| HarnessError::MissingArtifact {
            id: id.to_string(),
            kind: "embeddings",
        })
    }

    pub fn parse(&self, id: &str) -> Result<&DependencySentence, HarnessError> {
        self.parses.get(id).ok_or_else(|| HarnessError::MissingArtifact {
            id: id.to_string(),
            kind: "parse",
        })
    }
}

/// 1-based parser tokens whose character range overlaps `start..end`.
///
/// Token forms are located left to right in `sentence`, skipping any text
/// between them.
pub fn target_tokens(
    sentence: &str,
    tree: &DependencySentence,
    (start, end): (usize, usize),
) -> Result<Vec<usize>, String> {
    let chars: Vec<char> = sentence.chars().collect();
    let mut cursor = 0;
    let mut hits = Vec::new();
    for tok in tree.tokens() {
        let form: Vec<char> = tok.form.chars().collect();
        if form.is_empty() {
            return Err(format!("token {} has an empty form", tok.index));
        }
        let found = (cursor..=chars.len().saturating_sub(form.len()))
            .find(|&p| chars[p..p + form.len()] == form[..])
            .ok_or_else(|| format!("token {} {:?} not found in the sentence text", tok.index, tok.form))?;
        let tok_end = found + form.len();
        if found < end && tok_end > start {
            hits.push(tok.index);
        }
        cursor = tok_end;
    }
    if hits.is_empty() {
        return Err(format!("no parser token overlaps characters {start}..{end}"));
    }
    Ok(hits)
}

#[derive(Debug, Clone, Default)]
pub struct PreprocessOptions {
    /// Where feature files are cached; `None` disables caching.
    pub cache_dir: Option<PathBuf>,
    /// Required embedding width; `None` takes it from the data.
    pub dim: Option<usize>,
    pub filter: DependentFilter,
}

/// Feature vectors of a record list, in record order.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub variant: Variant,
    pub embed_dim: usize,
    pub ids: Vec<String>,
    pub rows: Vec<FeatureVector>,
    pub cache_path: Option<PathBuf>,
    /// True when the rows were read back from the cache.
    pub cache_hit: bool,
}

impl FeatureMatrix {
    /// Length of every row.
    pub fn dim(&self) -> usize {
        self.variant.expected_dim(self.embed_dim)
    }
}

fn aggregation_of(kind: FeatureKind) -> Aggregation {
    match kind {
        FeatureKind::Baseline => Aggregation::Sum,
        FeatureKind::Syntactic { aggregation, .. } => aggregation,
    }
}

fn record_feature(
    record: &PairRecord,
    artifacts: &Artifacts,
    variant: Variant,
    filter: DependentFilter,
    embed_dim: usize,
) -> Result<FeatureVector, HarnessError> {
    let mut features = Vec::with_capacity(2);
    let mut sep: &[f32] = &[];
    for which in [1, 2] {
        let sid = record.sentence_id(which);
        let emb = artifacts.embeddings(&sid)?;
        let tree = artifacts.parse(&sid)?;
        if emb.dim() != embed_dim {
            return Err(HarnessError::DimensionMismatch {
                what: sid,
                found: emb.dim(),
                expected: embed_dim,
            });
        }
        let align = align_words(&tree.forms(), emb.pieces()).map_err(|source| HarnessError::AlignmentFailure {
            id: record.id.clone(),
            source,
        })?;
        let targets = target_tokens(record.sentence(which), tree, record.span(which)).map_err(|reason| {
            HarnessError::TargetNotInParse {
                id: record.id.clone(),
                sentence: which,
                reason,
            }
        })?;
        let feature = sentence_feature_span(emb, &align, tree, &targets, aggregation_of(variant.kind), filter)
            .map_err(|source| HarnessError::Compose {
                id: record.id.clone(),
                source,
            })?;
        if which == 1 {
            sep = emb.sep_vector();
        }
        features.push(feature);
    }
    FeatureVector::compose(variant, &features[0], &features[1], sep).map_err(|source| HarnessError::Compose {
        id: record.id.clone(),
        source,
    })
}

fn cache_digest(
    records: &[PairRecord],
    artifacts: &Artifacts,
    variant: Variant,
    filter: DependentFilter,
    embed_dim: usize,
) -> Result<String, HarnessError> {
    let mut h = Sha256::new();
    h.update(CACHE_MAGIC);
    h.update(format!("{variant}|{filter:?}|{embed_dim}\n"));
    for r in records {
        h.update(serde_json::to_vec(r).expect("records serialize"));
        for which in [1, 2] {
            let sid = r.sentence_id(which);
            let emb = artifacts.embeddings(&sid)?;
            h.update((emb.pieces().len() as u64).to_le_bytes());
            for p in emb.pieces() {
                h.update((p.text.len() as u64).to_le_bytes());
                h.update(&p.text);
                p.vector.iter().for_each(|v| h.update(v.to_le_bytes()));
            }
            emb.sep_vector().iter().for_each(|v| h.update(v.to_le_bytes()));
            h.update(serialize_conllu(std::slice::from_ref(artifacts.parse(&sid)?)));
        }
    }
    let digest = h.finalize();
    Ok(digest[..12].iter().map(|b| format!("{b:02x}")).collect())
}

fn sanitize(tag: &str) -> String {
    tag.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' })
        .collect()
}

fn cache_header(variant: Variant, filter: DependentFilter, embed_dim: usize, count: usize) -> String {
    format!(
        "{CACHE_MAGIC} variant={variant} filter={filter:?} embed_dim={embed_dim} dim={} count={count}\n",
        variant.expected_dim(embed_dim)
    )
}

fn encode_cache(header: &str, ids: &[String], rows: &[FeatureVector]) -> Vec<u8> {
    let width = rows.first().map_or(0, FeatureVector::len);
    let mut buf = Vec::with_capacity(header.len() + rows.len() * (16 + 8 * width));
    buf.extend_from_slice(header.as_bytes());
    for (id, row) in ids.iter().zip(rows) {
        buf.extend_from_slice(&(id.len() as u32).to_le_bytes());
        buf.extend_from_slice(id.as_bytes());
        for v in row.values() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

/// Decodes a cache file; `None` if it does not hold exactly the expected rows.
fn decode_cache(
    bytes: &[u8],
    header: &str,
    ids: &[String],
    variant: Variant,
    embed_dim: usize,
) -> Option<Vec<FeatureVector>> {
    let mut rest = bytes.strip_prefix(header.as_bytes())?;
    let width = variant.expected_dim(embed_dim);
    let mut rows = Vec::with_capacity(ids.len());
    for id in ids {
        let (len, tail) = rest.split_first_chunk::<4>()?;
        let len = u32::from_le_bytes(*len) as usize;
        let (got, tail) = tail.split_at_checked(len)?;
        if got != id.as_bytes() {
            return None;
        }
        let (values, tail) = tail.split_at_checked(8 * width)?;
        let values = values
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        rows.push(FeatureVector::new(values, variant, embed_dim).ok()?);
        rest = tail;
    }
    rest.is_empty().then_some(rows)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    let mut f = std::fs::File::create(&tmp).map_err(|e| HarnessError::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| HarnessError::io(&tmp, e))?;
    f.sync_all().map_err(|e| HarnessError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| HarnessError::io(path, e))
}

/// Builds (or reloads) the feature vector of every record.
pub fn preprocess(
    records: &[PairRecord],
    artifacts: &Artifacts,
    variant: Variant,
    opts: &PreprocessOptions,
) -> Result<FeatureMatrix, HarnessError> {
    let first = records
        .first()
        .ok_or_else(|| HarnessError::InsufficientData("no records to preprocess".into()))?;
    let found = artifacts.embeddings(&first.sentence_id(1))?.dim();
    let embed_dim = opts.dim.unwrap_or(found);
    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let header = cache_header(variant, opts.filter, embed_dim, records.len());

    let cache_path = match &opts.cache_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
            let digest = cache_digest(records, artifacts, variant, opts.filter, embed_dim)?;
            let name = format!(
                "{}-{:?}-d{embed_dim}-{digest}.feat",
                sanitize(&variant.to_string()),
                opts.filter
            );
            Some(dir.join(name))
        }
        None => None,
    };

    if let Some(path) = cache_path.as_ref().filter(|p| p.is_file()) {
        let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
        match decode_cache(&bytes, &header, &ids, variant, embed_dim) {
            Some(rows) => {
                log::info!("{}: reused {} cached feature vectors", path.display(), rows.len());
                return Ok(FeatureMatrix {
                    variant,
                    embed_dim,
                    ids,
                    rows,
                    cache_path,
                    cache_hit: true,
                });
            }
            None => log::warn!("{}: unreadable cache file, rebuilding", path.display()),
        }
    }

    let rows = records
        .iter()
        .map(|r| record_feature(r, artifacts, variant, opts.filter, embed_dim))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(path) = &cache_path {
        write_atomic(path, &encode_cache(&header, &ids, &rows))?;
        log::info!("{}: cached {} feature vectors", path.display(), rows.len());
    }
    Ok(FeatureMatrix {
        variant,
        embed_dim,
        ids,
        rows,
        cache_path,
        cache_hit: false,
    })
}
