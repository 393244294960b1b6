//! Text-analytics primitives used by feature extraction.
//!
//! All functions are pure. Tokens are maximal runs of alphanumeric characters
//! and `_`, with leading/trailing underscores trimmed; everything else
//! (whitespace, punctuation) separates tokens.

mod lexicon;
mod sentiment;
mod tfidf;

use serde::{Deserialize, Serialize};

pub use lexicon::{LexiconError, Lexicons, WordList};
pub use sentiment::{sentiment, LexiconSentiment, SentimentScorer};
pub use tfidf::{cosine_similarity, idf_weight, SparseVector, TfidfError, Vectorizer, DEFAULT_MAX_TERMS};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// Lowercased form.
    pub text: String,
    /// Form as written, for code-pattern matching.
    pub original: String,
}

pub fn tokenize(text: &str) -> Vec<Token> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .map(|raw| raw.trim_matches('_'))
        .filter(|raw| !raw.is_empty())
        .map(|raw| Token {
            text: raw.to_lowercase(),
            original: raw.to_string(),
        })
        .collect()
}

/// Lowercased tokens.
pub fn words(text: &str) -> Vec<String> {
    tokenize(text).into_iter().map(|t| t.text).collect()
}

/// A sentence segment and whether it ended with `?`.
struct Segment {
    interrogative: bool,
}

/// Splits on `.`, `!` and `?`. A segment counts only if it contains an
/// alphanumeric character; it is interrogative when the first delimiter after
/// it is `?`.
fn segments(text: &str) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut has_word = false;
    for c in text.chars() {
        match c {
            '.' | '!' | '?' => {
                if has_word {
                    out.push(Segment { interrogative: c == '?' });
                }
                has_word = false;
            }
            c if c.is_alphanumeric() => has_word = true,
            _ => {}
        }
    }
    if has_word {
        out.push(Segment { interrogative: false });
    }
    out
}

/// Fraction of sentences that are questions; 0 for empty text.
pub fn question_ratio(text: &str) -> f64 {
    let segs = segments(text);
    if segs.is_empty() {
        return 0.0;
    }
    segs.iter().filter(|s| s.interrogative).count() as f64 / segs.len() as f64
}

/// Whether a token looks like source code: a listed keyword, camelCase,
/// snake_case, or a mix of letters and digits.
pub fn is_code_token(token: &Token, lexicons: &Lexicons) -> bool {
    if lexicons.keywords.contains(&token.original) {
        return true;
    }
    let chars: Vec<char> = token.original.chars().collect();
    let camel = chars
        .windows(2)
        .any(|w| w[0].is_lowercase() && w[1].is_uppercase());
    let snake = chars
        .windows(3)
        .any(|w| w[0].is_alphanumeric() && w[1] == '_' && w[2].is_alphanumeric());
    let alnum_mix = chars.iter().any(|c| c.is_alphabetic()) && chars.iter().any(|c| c.is_ascii_digit());
    camel || snake || alnum_mix
}

/// Number and ratio of code-like tokens.
pub fn code_element_stats(text: &str, lexicons: &Lexicons) -> (usize, f64) {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return (0, 0.0);
    }
    let count = tokens.iter().filter(|t| is_code_token(t, lexicons)).count();
    (count, count as f64 / tokens.len() as f64)
}

pub fn stop_word_ratio(text: &str, lexicons: &Lexicons) -> f64 {
    let words = words(text);
    if words.is_empty() {
        return 0.0;
    }
    let stops = words.iter().filter(|w| lexicons.stopwords.contains(w)).count();
    stops as f64 / words.len() as f64
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Vowel-group syllable estimate: each run of vowels (`y` included) is one
/// syllable, a trailing `e` after a consonant is silent except in a
/// consonant-`le` ending, and every word has at least one syllable.
pub fn syllables(word: &str) -> usize {
    let chars: Vec<char> = word.to_lowercase().chars().collect();
    let mut groups = 0;
    let mut prev_vowel = false;
    for &c in &chars {
        let v = is_vowel(c);
        if v && !prev_vowel {
            groups += 1;
        }
        prev_vowel = v;
    }
    let n = chars.len();
    let consonant_le = n >= 3 && chars[n - 2] == 'l' && !is_vowel(chars[n - 3]);
    if n >= 2 && chars[n - 1] == 'e' && !is_vowel(chars[n - 2]) && !consonant_le && groups > 1 {
        groups -= 1;
    }
    groups.max(1)
}

/// Flesch Reading Ease: `206.835 - 1.015 (words/sentences) - 84.6 (syllables/words)`.
/// Empty text scores 0.
pub fn readability(text: &str) -> f64 {
    let words = words(text);
    if words.is_empty() {
        return 0.0;
    }
    let sentences = segments(text).len().max(1) as f64;
    let n_words = words.len() as f64;
    let n_syllables: usize = words.iter().map(|w| syllables(w)).sum();
    206.835 - 1.015 * (n_words / sentences) - 84.6 * (n_syllables as f64 / n_words)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReplySignals {
    pub confirmatory: bool,
    pub gratitude: bool,
    pub reply_sentiment: i8,
}

/// Acknowledgement signals in the change author's replies.
pub fn reply_signals<S: AsRef<str>>(reply_texts: &[S], lexicons: &Lexicons) -> ReplySignals {
    if reply_texts.is_empty() {
        return ReplySignals::default();
    }
    let has_any = |list: &WordList| {
        reply_texts
            .iter()
            .any(|r| words(r.as_ref()).iter().any(|w| list.contains(w)))
    };
    let joined = reply_texts
        .iter()
        .map(AsRef::as_ref)
        .collect::<Vec<_>>()
        .join(" ");
    ReplySignals {
        confirmatory: has_any(&lexicons.confirmatory),
        gratitude: has_any(&lexicons.gratitude),
        reply_sentiment: sentiment(&joined, lexicons),
    }
}
