/// English stopwords removed by [`tokenize`]. This is the classic Lucene
/// `ENGLISH_STOP_WORDS_SET`.
pub const STOPWORDS: [&str; 33] = [
    "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "if", "in", "into", "is", "it", "no",
    "not", "of", "on", "or", "such", "that", "the", "their", "then", "there", "these", "they", "this", "to",
    "was", "will", "with",
];

/// Tokens longer than this many characters are dropped.
pub const MAX_TOKEN_CHARS: usize = 64;

pub fn is_stopword(term: &str) -> bool {
    STOPWORDS.binary_search(&term).is_ok()
}

/// Splits on non-alphanumeric boundaries, lowercases, and drops stopwords
/// and overlong tokens. No stemming.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| t.chars().count() <= MAX_TOKEN_CHARS && !is_stopword(t))
        .collect()
}
