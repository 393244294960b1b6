use super::{tokenize, Lexicons};

/// Scores the polarity of a text as -1, 0 or +1.
pub trait SentimentScorer: Send + Sync {
    fn score(&self, text: &str) -> i8;
}

/// Counts lexicon hits; a negation term up to two tokens before a sentiment
/// term flips that term's polarity.
pub struct LexiconSentiment<'a> {
    lexicons: &'a Lexicons,
}

impl<'a> LexiconSentiment<'a> {
    pub fn new(lexicons: &'a Lexicons) -> Self {
        LexiconSentiment { lexicons }
    }
}

impl SentimentScorer for LexiconSentiment<'_> {
    fn score(&self, text: &str) -> i8 {
        let words: Vec<String> = tokenize(text).into_iter().map(|t| t.text).collect();
        let lex = self.lexicons;
        let mut balance = 0i64;
        for (i, w) in words.iter().enumerate() {
            let polarity = if lex.sentiment_pos.contains(w) {
                1
            } else if lex.sentiment_neg.contains(w) {
                -1
            } else {
                continue;
            };
            let negated = words[i.saturating_sub(2)..i]
                .iter()
                .any(|p| lex.sentiment_negation.contains(p));
            balance += if negated { -polarity } else { polarity };
        }
        balance.signum() as i8
    }
}

/// Lexicon sentiment of `text`.
pub fn sentiment(text: &str, lexicons: &Lexicons) -> i8 {
    LexiconSentiment::new(lexicons).score(text)
}
