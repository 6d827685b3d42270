//! Text normalization, tokenization and document field composition.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Deref;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Document;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TextError {
    #[error("field selection must not be empty")]
    EmptyFieldSelection,
    #[error("field `{0}` selected more than once")]
    DuplicateField(Field),
    #[error("unknown document field `{0}`")]
    UnknownField(String),
    #[error("every selected field is empty for document `{doc_id}`")]
    AllFieldsEmpty { doc_id: String },
    #[error("stopword `{0}` is not lowercase")]
    UppercaseStopword(String),
}

/// Literal marker placed between composed document fields.
pub const FIELD_SEPARATOR: &str = " [SEP] ";

static BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

/// Parse a stopword list: one term per line, `#` starts a comment.
pub fn parse_stopwords(text: &str) -> Result<BTreeSet<String>, TextError> {
    let mut set = BTreeSet::new();
    for line in text.lines() {
        let term = line.split('#').next().unwrap_or("").trim();
        if term.is_empty() {
            continue;
        }
        if term.to_lowercase() != term {
            return Err(TextError::UppercaseStopword(term.to_string()));
        }
        set.insert(term.to_string());
    }
    Ok(set)
}

/// The bundled English stopword list.
pub fn default_stopwords() -> &'static BTreeSet<String> {
    static SET: OnceLock<BTreeSet<String>> = OnceLock::new();
    SET.get_or_init(|| parse_stopwords(BUNDLED_STOPWORDS).expect("bundled stopword list is valid"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalyzerMode {
    /// Split on Unicode whitespace and keep tokens verbatim.
    Whitespace,
    /// Alphanumeric runs, optional lowercasing, stopword removal and stemming.
    Full,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzerConfig {
    pub mode: AnalyzerMode,
    #[serde(default = "yes")]
    pub lowercase: bool,
    #[serde(default)]
    pub stopwords: BTreeSet<String>,
    #[serde(default)]
    pub stem: bool,
}

fn yes() -> bool {
    true
}

impl AnalyzerConfig {
    pub fn whitespace() -> Self {
        Self {
            mode: AnalyzerMode::Whitespace,
            lowercase: false,
            stopwords: BTreeSet::new(),
            stem: false,
        }
    }

    /// Full mode with the bundled stopword list and stemming enabled.
    pub fn full() -> Self {
        Self {
            mode: AnalyzerMode::Full,
            lowercase: true,
            stopwords: default_stopwords().clone(),
            stem: true,
        }
    }

    /// Full mode that lowercases and segments but keeps every token.
    pub fn plain() -> Self {
        Self {
            mode: AnalyzerMode::Full,
            lowercase: true,
            stopwords: BTreeSet::new(),
            stem: false,
        }
    }

    pub fn with_stopwords(mut self, stopwords: BTreeSet<String>) -> Result<Self, TextError> {
        if let Some(bad) = stopwords.iter().find(|w| w.to_lowercase() != **w) {
            return Err(TextError::UppercaseStopword(bad.clone()));
        }
        self.stopwords = stopwords;
        Ok(self)
    }
}

/// An ordered list of non-empty terms.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn into_inner(self) -> Vec<String> {
        self.0
    }

    pub fn join(&self, sep: &str) -> String {
        self.0.join(sep)
    }
}

impl Deref for TokenSequence {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

impl FromIterator<String> for TokenSequence {
    fn from_iter<I: IntoIterator<Item = String>>(iter: I) -> Self {
        Self(iter.into_iter().filter(|t| !t.is_empty()).collect())
    }
}

pub fn analyze(text: &str, config: &AnalyzerConfig) -> TokenSequence {
    match config.mode {
        AnalyzerMode::Whitespace => text.split_whitespace().map(str::to_string).collect(),
        AnalyzerMode::Full => {
            let text = if config.lowercase {
                std::borrow::Cow::Owned(text.to_lowercase())
            } else {
                std::borrow::Cow::Borrowed(text)
            };
            text.split(|c: char| !c.is_alphanumeric())
                .filter(|t| !t.is_empty() && !config.stopwords.contains(*t))
                .map(|t| if config.stem { stem(t) } else { t.to_string() })
                // a stem can land on a stopword ("uses" -> "use")
                .filter(|t| !config.stopwords.contains(t))
                .collect()
        }
    }
}

/// Light plural-suffix stemmer.
///
/// `-ies` becomes `-y`, `-es` loses its `s` unless preceded by `a`, `e` or
/// `o`, and a final `s` is dropped unless preceded by `u` or `s`. Words of
/// three characters or fewer are left alone. No output of a rule ends in
/// `s`, so the stemmer is idempotent.
pub fn stem(word: &str) -> String {
    let chars: Vec<char> = word.chars().collect();
    let n = chars.len();
    if n <= 3 || chars[n - 1] != 's' {
        return word.to_string();
    }
    let prev = chars[n - 2];
    if n > 4 && word.ends_with("ies") && !word.ends_with("eies") && !word.ends_with("aies") {
        let mut out: String = chars[..n - 3].iter().collect();
        out.push('y');
        return out;
    }
    if prev == 'e' && n > 4 && !matches!(chars[n - 3], 'a' | 'e' | 'o') {
        return chars[..n - 1].iter().collect();
    }
    if prev == 'e' || prev == 'u' || prev == 's' {
        return word.to_string();
    }
    chars[..n - 1].iter().collect()
}

/// Lowercase, collapse whitespace runs to a single space, trim.
pub fn normalize_query(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&word.to_lowercase());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Title,
    Abstract,
    Authors,
    Journal,
    Source,
}

impl Field {
    pub fn as_str(self) -> &'static str {
        match self {
            Field::Title => "title",
            Field::Abstract => "abstract",
            Field::Authors => "authors",
            Field::Journal => "journal",
            Field::Source => "source",
        }
    }

    fn is_multi_valued(self) -> bool {
        matches!(self, Field::Authors | Field::Source)
    }

    fn value(self, doc: &Document) -> &str {
        match self {
            Field::Title => &doc.title,
            Field::Abstract => &doc.abstract_text,
            Field::Authors => &doc.authors,
            Field::Journal => &doc.journal,
            Field::Source => &doc.source,
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Field {
    type Err = TextError;

    fn from_str(s: &str) -> Result<Self, TextError> {
        Ok(match s {
            "title" => Field::Title,
            "abstract" => Field::Abstract,
            "authors" => Field::Authors,
            "journal" => Field::Journal,
            "source" => Field::Source,
            other => return Err(TextError::UnknownField(other.to_string())),
        })
    }
}

/// A non-empty ordered subset of document fields.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Field>", into = "Vec<Field>")]
pub struct FieldSelection(Vec<Field>);

impl FieldSelection {
    pub fn new(fields: Vec<Field>) -> Result<Self, TextError> {
        if fields.is_empty() {
            return Err(TextError::EmptyFieldSelection);
        }
        for (i, f) in fields.iter().enumerate() {
            if fields[..i].contains(f) {
                return Err(TextError::DuplicateField(*f));
            }
        }
        Ok(Self(fields))
    }

    pub fn title_abstract() -> Self {
        Self(vec![Field::Title, Field::Abstract])
    }

    pub fn all() -> Self {
        Self(vec![Field::Title, Field::Abstract, Field::Authors, Field::Journal, Field::Source])
    }

    pub fn fields(&self) -> &[Field] {
        &self.0
    }
}

impl Default for FieldSelection {
    fn default() -> Self {
        Self::title_abstract()
    }
}

impl TryFrom<Vec<Field>> for FieldSelection {
    type Error = TextError;

    fn try_from(fields: Vec<Field>) -> Result<Self, TextError> {
        Self::new(fields)
    }
}

impl From<FieldSelection> for Vec<Field> {
    fn from(sel: FieldSelection) -> Self {
        sel.0
    }
}

/// Join the selected fields of `doc` with [`FIELD_SEPARATOR`] and normalize.
///
/// Multi-valued fields (authors, source) are split on `;`, trimmed and
/// re-joined with spaces. Empty fields are skipped. Normalization lowercases
/// everything, the separator marker included.
pub fn compose_document_text(doc: &Document, fields: &FieldSelection) -> Result<String, TextError> {
    let blocks: Vec<String> = fields
        .fields()
        .iter()
        .map(|&f| {
            let raw = f.value(doc);
            if f.is_multi_valued() {
                raw.split(';').map(str::trim).filter(|v| !v.is_empty()).collect::<Vec<_>>().join(" ")
            } else {
                raw.trim().to_string()
            }
        })
        .filter(|b| !b.trim().is_empty())
        .collect();
    if blocks.is_empty() {
        return Err(TextError::AllFieldsEmpty { doc_id: doc.doc_id.clone() });
    }
    Ok(normalize_query(&blocks.join(FIELD_SEPARATOR)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn full_with(stop: &[&str], stem: bool) -> AnalyzerConfig {
        AnalyzerConfig {
            mode: AnalyzerMode::Full,
            lowercase: true,
            stopwords: stop.iter().map(|s| s.to_string()).collect(),
            stem,
        }
    }

    #[test]
    fn full_mode_example() {
        let toks = analyze("The CAT sat!!", &full_with(&["the"], false));
        assert_eq!(&*toks, ["cat", "sat"]);
    }

    #[test]
    fn whitespace_mode_example() {
        let toks = analyze("The CAT sat!!", &AnalyzerConfig::whitespace());
        assert_eq!(&*toks, ["The", "CAT", "sat!!"]);
    }

    #[test]
    fn empty_text_yields_no_tokens() {
        assert!(analyze("", &AnalyzerConfig::whitespace()).is_empty());
        assert!(analyze("", &AnalyzerConfig::full()).is_empty());
    }

    #[test]
    fn mixed_alphanumerics_stay_whole() {
        let toks = analyze("COVID19 vaccine-efficacy", &AnalyzerConfig::plain());
        assert_eq!(&*toks, ["covid19", "vaccine", "efficacy"]);
    }

    #[test]
    fn stemmer_rules() {
        assert_eq!(stem("studies"), "study");
        assert_eq!(stem("cats"), "cat");
        assert_eq!(stem("horses"), "horse");
        assert_eq!(stem("glass"), "glass");
        assert_eq!(stem("virus"), "virus");
        assert_eq!(stem("toes"), "toes");
        assert_eq!(stem("its"), "its");
    }

    #[test]
    fn bundled_stopwords_are_pinned() {
        let sw = default_stopwords();
        assert!((500..=600).contains(&sw.len()), "{}", sw.len());
        assert!(sw.contains("the") && sw.contains("and"));
    }

    #[test]
    fn stopword_file_rejects_uppercase() {
        assert_eq!(parse_stopwords("# c\nfoo\n\nbar # trailing").unwrap().len(), 2);
        assert!(matches!(parse_stopwords("Foo"), Err(TextError::UppercaseStopword(_))));
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_query("  Hello   WORLD "), "hello world");
        assert_eq!(normalize_query("already normal"), "already normal");
        // every ASCII whitespace class between two letters
        for ws in ["\t", "\n", "\r", "\x0b", "\x0c", " ", "\t\n", "\u{a0}", "\u{2003}"] {
            assert_eq!(normalize_query(&format!("a{ws}b")), "a b", "{ws:?}");
        }
    }

    fn doc() -> Document {
        Document {
            doc_id: "d".into(),
            title: "T".into(),
            abstract_text: "A".into(),
            authors: "Ada Lovelace; Alan Turing".into(),
            ..Default::default()
        }
    }

    #[test]
    fn compose_examples() {
        let d = doc();
        assert_eq!(compose_document_text(&d, &FieldSelection::title_abstract()).unwrap(), "t [sep] a");
        let authors = FieldSelection::new(vec![Field::Authors]).unwrap();
        assert_eq!(compose_document_text(&d, &authors).unwrap(), "ada lovelace alan turing");
        let journal = FieldSelection::new(vec![Field::Journal]).unwrap();
        assert_eq!(
            compose_document_text(&d, &journal),
            Err(TextError::AllFieldsEmpty { doc_id: "d".into() })
        );
    }

    #[test]
    fn field_selection_validation() {
        assert_eq!(FieldSelection::new(vec![]), Err(TextError::EmptyFieldSelection));
        assert_eq!(
            FieldSelection::new(vec![Field::Title, Field::Title]),
            Err(TextError::DuplicateField(Field::Title))
        );
        let parsed: FieldSelection = serde_json::from_str(r#"["abstract","title"]"#).unwrap();
        assert_eq!(parsed.fields(), [Field::Abstract, Field::Title]);
        assert!(serde_json::from_str::<FieldSelection>("[]").is_err());
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(s in "\\PC{0,40}") {
            let once = normalize_query(&s);
            prop_assert_eq!(normalize_query(&once), once);
        }

        #[test]
        fn full_mode_is_idempotent(s in "[a-zA-Z0-9 ,.!?'éüß-]{0,60}", stem_on in any::<bool>()) {
            let cfg = full_with(&["the", "a", "use", "of"], stem_on);
            let toks = analyze(&s, &cfg);
            let again = analyze(&toks.join(" "), &cfg);
            prop_assert_eq!(again, toks);
        }

        #[test]
        fn stem_is_idempotent(w in "[a-z]{1,12}") {
            let once = stem(&w);
            prop_assert_eq!(stem(&once), once);
        }

        #[test]
        fn full_mode_never_invents_content(s in "[a-zA-Z0-9 ,.!?;:-]{0,60}") {
            let full = analyze(&s, &AnalyzerConfig::plain());
            let ws = analyze(&s, &AnalyzerConfig::whitespace());
            let splits: usize = ws
                .iter()
                .map(|t| t.split(|c: char| !c.is_alphanumeric()).filter(|p| !p.is_empty()).count().saturating_sub(1))
                .sum();
            prop_assert!(full.len() <= ws.len() + splits);
            let lower = s.to_lowercase();
            for t in full.iter() {
                prop_assert!(lower.contains(t.as_str()));
            }
        }
    }
}
