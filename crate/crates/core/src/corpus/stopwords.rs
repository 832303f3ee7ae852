use std::collections::HashSet;
use std::sync::LazyLock;

const STOPWORDS_EN: &str = include_str!("../../data/stopwords_en.txt");

static STOPWORD_SET: LazyLock<HashSet<&'static str>> = LazyLock::new(|| {
    STOPWORDS_EN
        .lines()
        .map(str::trim)
        .filter(|w| !w.is_empty())
        .collect()
});

/// The embedded English stopword list, in file order.
pub fn stopwords() -> impl Iterator<Item = &'static str> {
    STOPWORDS_EN.lines().map(str::trim).filter(|w| !w.is_empty())
}

/// `word` must already be lowercased.
pub fn is_stopword(word: &str) -> bool {
    STOPWORD_SET.contains(word)
}
