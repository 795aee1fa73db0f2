//! Vocabulary construction, tokenization and labeled-dataset loading.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::augmentation::SoftLabel;
use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const MASK: usize = 4;

/// Surface forms of the special tokens, in id order.
pub const SPECIAL_TOKENS: [&str; 5] = ["<pad>", "<bos>", "<eos>", "<unk>", "<mask>"];
pub const NUM_SPECIAL: usize = SPECIAL_TOKENS.len();

pub const DEFAULT_MAX_LEN: usize = 64;

pub fn is_special(id: usize) -> bool {
    id < NUM_SPECIAL
}

/// Splits raw text into surface tokens.
pub trait Tokenizer {
    fn split<'a>(&self, text: &'a str) -> Vec<&'a str>;
}

/// Word-level split on Unicode whitespace.
#[derive(Clone, Copy, Debug, Default)]
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn split<'a>(&self, text: &'a str) -> Vec<&'a str> {
        text.split_whitespace().collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        for (i, special) in SPECIAL_TOKENS.iter().enumerate() {
            if tokens.get(i).map(String::as_str) != Some(*special) {
                return Err(Error::InvalidVocabulary(format!(
                    "line {} must be {special}",
                    i + 1
                )));
            }
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (id, tok) in tokens.iter().enumerate() {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(Error::InvalidVocabulary(format!(
                    "token {id} is empty or contains whitespace"
                )));
            }
            if index.insert(tok.clone(), id).is_some() {
                return Err(Error::InvalidVocabulary(format!("duplicate token `{tok}`")));
            }
        }
        Ok(Self { tokens, index })
    }

    /// Builds a vocabulary from explicit content tokens (specials are prepended).
    pub fn with_content<I, S>(content: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens = SPECIAL_TOKENS
            .iter()
            .map(|s| s.to_string())
            .chain(content.into_iter().map(Into::into))
            .collect();
        Self::from_tokens(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Line-oriented file form: one token per line, specials first.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for tok in &self.tokens {
            out.push_str(tok);
            out.push('\n');
        }
        out
    }

    pub fn parse(contents: &str) -> Result<Self> {
        Self::from_tokens(contents.lines().map(str::to_owned).collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_file_string())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Hex SHA-256 of the vocabulary file form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_file_string().as_bytes()))
    }

    /// Joins the surface forms of `ids` with single spaces, skipping PAD/BOS/EOS.
    pub fn detokenize(&self, ids: &[usize]) -> String {
        ids.iter()
            .filter(|&&id| !matches!(id, PAD | BOS | EOS))
            .map(|&id| self.token(id).unwrap_or(SPECIAL_TOKENS[UNK]))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Counts whitespace tokens and keeps the `max_size - 5` most frequent,
/// breaking frequency ties by first occurrence.
pub fn build_vocabulary<I, S>(corpus: I, max_size: usize) -> Result<Vocabulary>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    if max_size <= NUM_SPECIAL {
        return Err(Error::VocabTooSmall {
            min: NUM_SPECIAL + 1,
            got: max_size,
        });
    }
    // token -> (count, first occurrence)
    let mut counts: HashMap<String, (usize, usize)> = HashMap::new();
    let mut lines = 0usize;
    for line in corpus {
        lines += 1;
        for tok in WhitespaceTokenizer.split(line.as_ref()) {
            if SPECIAL_TOKENS.contains(&tok) {
                continue;
            }
            let next = counts.len();
            counts.entry(tok.to_owned()).or_insert((0, next)).0 += 1;
        }
    }
    if lines == 0 || counts.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut ranked: Vec<(String, (usize, usize))> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.cmp(&b.1 .1)));
    ranked.truncate(max_size - NUM_SPECIAL);
    Vocabulary::with_content(ranked.into_iter().map(|(tok, _)| tok))
}

/// Content token ids (no PAD/BOS/EOS), with `1 <= len`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TokenSequence(Vec<usize>);

impl TokenSequence {
    pub fn new(ids: Vec<usize>) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::EmptyText);
        }
        Ok(Self(ids))
    }

    pub fn ids(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_ids(self) -> Vec<usize> {
        self.0
    }

    pub fn validate(&self, vocab_size: usize) -> Result<()> {
        match self.0.iter().find(|&&id| id >= vocab_size) {
            Some(&id) => Err(Error::TokenOutOfRange {
                id,
                size: vocab_size,
            }),
            None => Ok(()),
        }
    }
}

/// Whitespace tokenization with UNK fallback and truncation to `max_len`.
pub fn tokenize(text: &str, vocab: &Vocabulary, max_len: usize) -> Result<TokenSequence> {
    tokenize_with(&WhitespaceTokenizer, text, vocab, max_len)
}

pub fn tokenize_with(
    tokenizer: &dyn Tokenizer,
    text: &str,
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<TokenSequence> {
    let ids: Vec<usize> = tokenizer
        .split(text)
        .into_iter()
        .take(max_len)
        .map(|t| vocab.id(t).unwrap_or(UNK))
        .collect();
    TokenSequence::new(ids)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskKind {
    SingleSentence,
    SentencePair,
    UnlabeledCorpus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataFormat {
    Tsv,
    Jsonl,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Text {
    Single(TokenSequence),
    Pair {
        premise: TokenSequence,
        hypothesis: TokenSequence,
    },
}

impl Text {
    /// Flattened classifier input; pair parts are joined with EOS.
    pub fn classifier_ids(&self) -> Vec<usize> {
        match self {
            Text::Single(s) => s.ids().to_vec(),
            Text::Pair {
                premise,
                hypothesis,
            } => {
                let mut ids = premise.ids().to_vec();
                ids.push(EOS);
                ids.extend_from_slice(hypothesis.ids());
                ids
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Label {
    Class(usize),
    Soft(SoftLabel),
}

impl Label {
    pub fn to_soft(&self, num_classes: usize) -> Result<SoftLabel> {
        match self {
            Label::Class(c) => SoftLabel::one_hot(*c, num_classes),
            Label::Soft(s) if s.num_classes() == num_classes => Ok(s.clone()),
            Label::Soft(s) => Err(Error::Shape(format!(
                "soft label has {} classes, expected {num_classes}",
                s.num_classes()
            ))),
        }
    }

    /// Hard class, taking the lowest-index argmax for soft labels.
    pub fn class(&self) -> usize {
        match self {
            Label::Class(c) => *c,
            Label::Soft(s) => s.argmax(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledExample {
    pub text: Text,
    pub label: Label,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub examples: Vec<LabeledExample>,
    pub num_classes: usize,
    pub task_kind: TaskKind,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Every sentence in the dataset, premise before hypothesis.
    pub fn sentences(&self) -> Vec<&TokenSequence> {
        let mut out = Vec::new();
        for ex in &self.examples {
            match &ex.text {
                Text::Single(s) => out.push(s),
                Text::Pair {
                    premise,
                    hypothesis,
                } => {
                    out.push(premise);
                    out.push(hypothesis);
                }
            }
        }
        out
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
            num_classes: self.num_classes,
            task_kind: self.task_kind,
        }
    }
}

/// Reads one sentence per line, skipping blank lines.
pub fn load_corpus_lines(path: impl AsRef<Path>) -> Result<Vec<String>> {
    Ok(fs::read_to_string(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect())
}

/// Options for [`load_labeled_dataset`].
#[derive(Clone, Copy, Debug)]
pub struct LoadOptions<'v> {
    pub vocab: &'v Vocabulary,
    pub max_len: usize,
    /// Declared class count; inferred as `max label + 1` when absent.
    pub num_classes: Option<usize>,
}

pub fn load_labeled_dataset(
    path: impl AsRef<Path>,
    format: DataFormat,
    task_kind: TaskKind,
    opts: LoadOptions<'_>,
) -> Result<Dataset> {
    let path = path.as_ref();
    let contents = fs::read_to_string(path)?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_owned(),
        line,
        message,
    };
    let tok = |line: usize, text: &str| {
        tokenize(text, opts.vocab, opts.max_len).map_err(|e| parse_err(line, e.to_string()))
    };

    let mut raw: Vec<(usize, Text, Option<usize>)> = Vec::new();
    for (i, line) in contents.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (text, label) = match format {
            DataFormat::Jsonl => {
                let value: Value = serde_json::from_str(line)
                    .map_err(|e| parse_err(lineno, format!("malformed JSON: {e}")))?;
                let field = |name: &str| -> Result<&str> {
                    value
                        .get(name)
                        .and_then(Value::as_str)
                        .ok_or_else(|| parse_err(lineno, format!("missing string field `{name}`")))
                };
                let text = match task_kind {
                    TaskKind::SentencePair => Text::Pair {
                        premise: tok(lineno, field("premise")?)?,
                        hypothesis: tok(lineno, field("hypothesis")?)?,
                    },
                    _ => Text::Single(tok(lineno, field("text")?)?),
                };
                let label = match task_kind {
                    TaskKind::UnlabeledCorpus => None,
                    _ => Some(
                        value
                            .get("label")
                            .and_then(Value::as_u64)
                            .ok_or_else(|| {
                                parse_err(lineno, "missing non-negative integer field `label`".into())
                            })? as usize,
                    ),
                };
                (text, label)
            }
            DataFormat::Tsv => {
                let cols: Vec<&str> = line.split('\t').collect();
                let want = match task_kind {
                    TaskKind::SentencePair => 3,
                    TaskKind::SingleSentence => 2,
                    TaskKind::UnlabeledCorpus => 1,
                };
                if cols.len() < want {
                    return Err(parse_err(
                        lineno,
                        format!("expected {want} tab-separated fields, found {}", cols.len()),
                    ));
                }
                let text = match task_kind {
                    TaskKind::SentencePair => Text::Pair {
                        premise: tok(lineno, cols[0])?,
                        hypothesis: tok(lineno, cols[1])?,
                    },
                    _ => Text::Single(tok(lineno, cols[0])?),
                };
                let label = if task_kind == TaskKind::UnlabeledCorpus {
                    None
                } else {
                    let raw = cols[want - 1].trim();
                    Some(raw.parse::<usize>().map_err(|_| {
                        parse_err(lineno, format!("label `{raw}` is not a class index"))
                    })?)
                };
                (text, label)
            }
        };
        raw.push((lineno, text, label));
    }

    let num_classes = match task_kind {
        TaskKind::UnlabeledCorpus => 0,
        _ => {
            let n = opts.num_classes.unwrap_or_else(|| {
                raw.iter().filter_map(|r| r.2).max().map_or(0, |m| m + 1)
            });
            if n < 2 {
                return Err(Error::Invalid(format!(
                    "labeled dataset needs at least 2 classes, found {n}"
                )));
            }
            n
        }
    };

    let mut examples = Vec::with_capacity(raw.len());
    for (lineno, text, label) in raw {
        let label = match label {
            Some(l) if l >= num_classes => {
                return Err(parse_err(
                    lineno,
                    Error::LabelOutOfRange {
                        label: l,
                        num_classes,
                    }
                    .to_string(),
                ))
            }
            Some(l) => Label::Class(l),
            // Unlabeled corpora carry a placeholder that is never read.
            None => Label::Class(0),
        };
        examples.push(LabeledExample { text, label });
    }
    Ok(Dataset {
        examples,
        num_classes,
        task_kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn vocab_abc() -> Vocabulary {
        build_vocabulary(["a b", "a c"], 8).unwrap()
    }

    #[test]
    fn frequency_order_with_first_occurrence_ties() {
        let v = vocab_abc();
        assert_eq!(v.len(), 8);
        assert_eq!(&v.tokens()[..5], &SPECIAL_TOKENS.map(String::from));
        assert_eq!(v.id("a"), Some(5));
        assert_eq!(v.id("b"), Some(6));
        assert_eq!(v.id("c"), Some(7));
    }

    #[test]
    fn single_token_corpus() {
        let v = build_vocabulary(["x"], 6).unwrap();
        assert_eq!(v.len(), 6);
        assert_eq!(v.id("x"), Some(5));
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let lines: [&str; 0] = [];
        assert_eq!(
            build_vocabulary(lines, 16).unwrap_err().to_string(),
            "empty corpus"
        );
        assert!(matches!(
            build_vocabulary(["   "], 16),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn top_k_by_brute_force_tally() {
        // token t_i appears (i % 7) + 1 times, interleaved so first
        // occurrence order differs from index order.
        let mut lines = Vec::new();
        for rep in 0..7 {
            let mut line = Vec::new();
            for i in (0..100).rev() {
                if rep < (i % 7) + 1 {
                    line.push(format!("t{i}"));
                }
            }
            lines.push(line.join(" "));
        }
        let v = build_vocabulary(&lines, 20).unwrap();
        assert_eq!(v.len(), 20);

        let mut tally: Vec<(String, usize, usize)> = Vec::new();
        for line in &lines {
            for tok in line.split_whitespace() {
                match tally.iter_mut().find(|t| t.0 == tok) {
                    Some(t) => t.1 += 1,
                    None => {
                        let n = tally.len();
                        tally.push((tok.to_string(), 1, n));
                    }
                }
            }
        }
        tally.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
        let expected: Vec<&str> = tally.iter().take(15).map(|t| t.0.as_str()).collect();
        let got: Vec<&str> = v.tokens()[5..].iter().map(String::as_str).collect();
        assert_eq!(got, expected);

        let dropped = &tally[15].0;
        let seq = tokenize(dropped, &v, 64).unwrap();
        assert_eq!(seq.ids(), &[UNK]);
    }

    #[test]
    fn tokenize_known_unknown_and_truncation() {
        let v = vocab_abc();
        assert_eq!(tokenize("a b", &v, 64).unwrap().ids(), &[5, 6]);
        assert_eq!(tokenize("a zzz", &v, 64).unwrap().ids(), &[5, UNK]);
        let long = vec!["a"; 600].join(" ");
        assert_eq!(tokenize(&long, &v, 512).unwrap().len(), 512);
        assert_eq!(
            tokenize("  \t ", &v, 64).unwrap_err().to_string(),
            "empty input text"
        );
    }

    #[test]
    fn vocabulary_file_round_trip_and_validation() {
        let v = vocab_abc();
        let again = Vocabulary::parse(&v.to_file_string()).unwrap();
        assert_eq!(v, again);
        assert_eq!(v.hash(), again.hash());
        assert!(Vocabulary::parse("<bos>\n<pad>\n<eos>\n<unk>\n<mask>\n").is_err());
        assert!(Vocabulary::parse("<pad>\n<bos>\n<eos>\n<unk>\n<mask>\na\na\n").is_err());
    }

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn jsonl_single_and_pair() {
        let v = Vocabulary::with_content(["good", "movie", "a", "cat", "sat"]).unwrap();
        let opts = LoadOptions {
            vocab: &v,
            max_len: 64,
            num_classes: None,
        };
        let f = write_tmp("{\"text\":\"good movie\",\"label\":1}\n{\"text\":\"a cat\",\"label\":0}\n");
        let d = load_labeled_dataset(f.path(), DataFormat::Jsonl, TaskKind::SingleSentence, opts)
            .unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.num_classes, 2);
        assert_eq!(d.examples[0].label, Label::Class(1));
        assert!(matches!(&d.examples[0].text, Text::Single(s) if s.ids() == [5, 6]));

        let f = write_tmp("{\"premise\":\"a cat sat\",\"hypothesis\":\"a cat\",\"label\":2}\n");
        let d = load_labeled_dataset(
            f.path(),
            DataFormat::Jsonl,
            TaskKind::SentencePair,
            LoadOptions {
                num_classes: Some(3),
                ..opts
            },
        )
        .unwrap();
        match &d.examples[0].text {
            Text::Pair {
                premise,
                hypothesis,
            } => {
                assert_eq!(premise.len(), 3);
                assert_eq!(hypothesis.len(), 2);
            }
            other => panic!("expected pair, got {other:?}"),
        }
    }

    #[test]
    fn malformed_line_is_reported_by_number() {
        let v = Vocabulary::with_content(["a"]).unwrap();
        let mut body = String::new();
        for i in 0..6 {
            body.push_str(&format!("{{\"text\":\"a\",\"label\":{}}}\n", i % 2));
        }
        body.push_str("{\"text\": \"a\", \"label\"\n");
        let f = write_tmp(&body);
        let err = load_labeled_dataset(
            f.path(),
            DataFormat::Jsonl,
            TaskKind::SingleSentence,
            LoadOptions {
                vocab: &v,
                max_len: 64,
                num_classes: None,
            },
        )
        .unwrap_err();
        assert!(err.to_string().contains("line 7"), "{err}");

        let f = write_tmp("{\"label\":1}\n");
        let err = load_labeled_dataset(
            f.path(),
            DataFormat::Jsonl,
            TaskKind::SingleSentence,
            LoadOptions {
                vocab: &v,
                max_len: 64,
                num_classes: None,
            },
        )
        .unwrap_err();
        assert!(err.to_string().contains("line 1") && err.to_string().contains("text"));
    }

    #[test]
    fn tsv_labels_are_range_checked() {
        let v = Vocabulary::with_content(["a", "b"]).unwrap();
        let f = write_tmp("a b\t0\nb\t1\na\t2\n");
        let opts = LoadOptions {
            vocab: &v,
            max_len: 64,
            num_classes: Some(2),
        };
        let err = load_labeled_dataset(f.path(), DataFormat::Tsv, TaskKind::SingleSentence, opts)
            .unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(err.to_string().contains("out of range"), "{err}");

        let d = load_labeled_dataset(
            f.path(),
            DataFormat::Tsv,
            TaskKind::SingleSentence,
            LoadOptions {
                num_classes: None,
                ..opts
            },
        )
        .unwrap();
        assert_eq!(d.num_classes, 3);
        assert_eq!(d.len(), 3);
    }

    #[test]
    fn pair_text_joins_with_eos_for_classifiers() {
        let t = Text::Pair {
            premise: TokenSequence::new(vec![7, 8]).unwrap(),
            hypothesis: TokenSequence::new(vec![9]).unwrap(),
        };
        assert_eq!(t.classifier_ids(), vec![7, 8, EOS, 9]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn tokenize_detokenize_identity(words in prop::collection::vec(0usize..20, 1..30)) {
                let content: Vec<String> = (0..20).map(|i| format!("w{i}")).collect();
                let v = Vocabulary::with_content(content.clone()).unwrap();
                let text = words.iter().map(|&i| content[i].as_str()).collect::<Vec<_>>().join(" ");
                let seq = tokenize(&text, &v, 64).unwrap();
                prop_assert_eq!(v.detokenize(seq.ids()), text);
            }

            #[test]
            fn vocabulary_is_deterministic(lines in prop::collection::vec("[a-e]( [a-e]){0,6}", 1..20)) {
                let a = build_vocabulary(&lines, 16).unwrap();
                let b = build_vocabulary(&lines, 16).unwrap();
                prop_assert_eq!(a.to_file_string(), b.to_file_string());
            }
        }
    }
}
