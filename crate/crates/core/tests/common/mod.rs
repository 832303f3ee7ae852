//! Deterministic synthetic corpora and a stub embedding provider shared by
//! the integration tests.
#![allow(dead_code)]

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use driftdet::corpus::{AnnotatedSentence, AnnotatedToken, Document};
use driftdet::syntax_stats::{ChunkSentence, ChunkToken};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Zipf-weighted word list: earlier words are drawn more often.
pub struct Vocab {
    words: &'static [&'static str],
    dist: WeightedIndex<f64>,
}

impl Vocab {
    pub fn new(words: &'static [&'static str]) -> Self {
        let weights: Vec<f64> = (0..words.len()).map(|r| 1.0 / (r as f64 + 1.0)).collect();
        Vocab {
            words,
            dist: WeightedIndex::new(weights).unwrap(),
        }
    }

    pub fn draw(&self, rng: &mut impl Rng) -> &'static str {
        self.words[self.dist.sample(rng)]
    }
}

pub const GENERAL_REVIEW: &[&str] = &[
    "really", "time", "great", "good", "like", "just", "best", "even", "well", "much", "first", "never", "back",
    "worth", "recommend", "love", "experience", "people", "little", "lot", "thing", "way", "nothing", "friends",
    "night", "bit", "maybe", "sure", "seen", "whole",
];
pub const POSITIVE: &[&str] = &[
    "amazing", "wonderful", "excellent", "perfect", "enjoyed", "fantastic", "brilliant", "delightful", "superb",
    "memorable",
];
pub const NEGATIVE: &[&str] = &[
    "awful", "terrible", "boring", "disappointing", "waste", "horrible", "mediocre", "worst", "dull", "annoying",
];
pub const MOVIES: &[&str] = &[
    "film", "movie", "actor", "plot", "scene", "director", "cinema", "character", "screenplay", "sequel", "cast",
    "performance", "script", "camera", "soundtrack", "ending", "story", "drama", "comedy", "villain", "hero",
    "audience", "episode", "trailer", "oscar", "studio", "documentary", "thriller", "animation", "actress",
];
pub const RESTAURANTS: &[&str] = &[
    "food", "waiter", "menu", "dish", "table", "service", "pizza", "burger", "dessert", "chef", "kitchen",
    "waitress", "reservation", "lunch", "dinner", "breakfast", "flavor", "salad", "steak", "sushi", "coffee",
    "bartender", "appetizer", "portion", "price", "sauce", "fries", "pasta", "taco", "brunch",
];

/// Sentiment-labelled reviews built from short topic-coherent phrases of
/// general, sentiment or domain words, with an occasional phrase from `leak`.
pub fn reviews(domain: &'static [&'static str], leak: &'static [&'static str], n: usize, prefix: &str, seed: u64) -> Vec<Document> {
    let (general, pos, neg) = (Vocab::new(GENERAL_REVIEW), Vocab::new(POSITIVE), Vocab::new(NEGATIVE));
    let (topic, leak) = (Vocab::new(domain), Vocab::new(leak));
    let mut r = rng(seed);
    (0..n)
        .map(|i| {
            let positive = i % 2 == 0;
            let len = r.gen_range(80..240);
            let mut words: Vec<&str> = Vec::with_capacity(len + 6);
            while words.len() < len {
                let u: f64 = r.gen();
                let source = if u < 0.35 {
                    &general
                } else if u < 0.55 {
                    if positive { &pos } else { &neg }
                } else if u < 0.97 {
                    &topic
                } else {
                    &leak
                };
                for _ in 0..r.gen_range(3..7) {
                    words.push(source.draw(&mut r));
                }
            }
            Document::new(format!("{prefix}-{i}"), words.join(" ")).with_label(if positive { "pos" } else { "neg" })
        })
        .collect()
}

pub const BUSINESS_GENERAL: &[&str] = &[
    "company", "cost", "pay", "year", "million", "customer", "price", "money", "month", "service", "market",
    "rate", "report", "business", "financial", "billion", "percent", "plan", "firm", "account",
];
pub const INSURANCE_SUBTOPICS: [&[&str]; 4] = [
    &["car", "vehicle", "accident", "collision", "driver", "deductible", "repair", "garage", "windshield", "liability"],
    &["hospital", "doctor", "prescription", "surgery", "clinic", "patient", "treatment", "dental", "medical", "therapy"],
    &["house", "roof", "flood", "fire", "burglary", "tenant", "property", "mortgage", "storm", "contents"],
    &["beneficiary", "death", "annuity", "estate", "funeral", "spouse", "inheritance", "payout", "widow", "retirement"],
];
pub const INSURANCE_CORE: &[&str] = &["policy", "claim", "premium", "coverage", "insurer", "agent", "quote", "renewal"];
pub const NEWS_TOPICS: [&[&str]; 4] = [
    &["government", "minister", "election", "president", "troops", "talks", "country", "leaders", "parliament", "rebels"],
    &["team", "game", "season", "coach", "win", "player", "league", "match", "cup", "championship"],
    &["shares", "profit", "stocks", "investors", "quarter", "bank", "oil", "deal", "earnings", "merger"],
    &["software", "internet", "computer", "space", "research", "wireless", "online", "users", "chip", "browser"],
];

/// Mixing weights for the hard pair.
#[derive(Debug, Clone, Copy)]
pub struct HardPairMix {
    /// Share of business vocabulary in insurance documents.
    pub insurance_general: f64,
    /// Share of insurance core terms in insurance documents.
    pub insurance_core: f64,
    /// Share of business vocabulary in news documents.
    pub news_general: f64,
}

pub const HARD_PAIR_MIX: HardPairMix = HardPairMix {
    insurance_general: 0.45,
    insurance_core: 0.15,
    news_general: 0.75,
};

/// Insurance questions, each about one of four sub-topics, labelled by
/// sub-topic.
pub fn insurance(n: usize, mix: HardPairMix, seed: u64) -> Vec<Document> {
    let general = Vocab::new(BUSINESS_GENERAL);
    let core = Vocab::new(INSURANCE_CORE);
    let subs: Vec<Vocab> = INSURANCE_SUBTOPICS.iter().map(|w| Vocab::new(w)).collect();
    let mut r = rng(seed);
    (0..n)
        .map(|i| {
            let k = i % subs.len();
            let len = r.gen_range(12..30);
            let words: Vec<&str> = (0..len)
                .map(|_| {
                    let u: f64 = r.gen();
                    if u < mix.insurance_general {
                        general.draw(&mut r)
                    } else if u < mix.insurance_general + mix.insurance_core {
                        core.draw(&mut r)
                    } else {
                        subs[k].draw(&mut r)
                    }
                })
                .collect();
            Document::new(format!("ins-{i}"), words.join(" ")).with_label(format!("sub{k}"))
        })
        .collect()
}

/// News snippets over four topics sharing the business vocabulary.
pub fn news(n: usize, mix: HardPairMix, seed: u64) -> Vec<Document> {
    let general = Vocab::new(BUSINESS_GENERAL);
    let topics: Vec<Vocab> = NEWS_TOPICS.iter().map(|w| Vocab::new(w)).collect();
    let mut r = rng(seed);
    (0..n)
        .map(|i| {
            let k = i % topics.len();
            let len = r.gen_range(12..30);
            let words: Vec<&str> = (0..len)
                .map(|_| {
                    if r.gen::<f64>() < mix.news_general {
                        general.draw(&mut r)
                    } else {
                        topics[k].draw(&mut r)
                    }
                })
                .collect();
            Document::new(format!("news-{i}"), words.join(" "))
        })
        .collect()
}

fn token(form: &str, upos: &str, ptb: &str, ner: &str, dep: &str, head: usize) -> AnnotatedToken {
    AnnotatedToken {
        form: form.into(),
        lemma: form.to_lowercase(),
        upos: upos.into(),
        ptb_tag: ptb.into(),
        ner: ner.into(),
        dep: dep.into(),
        head,
    }
}

/// A hand-annotated reading of the running example sentence
/// "If you ca n't get a good night 's sleep it 's likely that your parents
/// are at least partly to blame".
pub fn walkthrough_sentence() -> AnnotatedSentence {
    let rows: &[(&str, &str, &str, &str, &str, usize)] = &[
        ("If", "SCONJ", "IN", "O", "mark", 5),
        ("you", "PRON", "PRP", "O", "nsubj", 5),
        ("ca", "AUX", "MD", "O", "aux", 5),
        ("n't", "PART", "RB", "O", "neg", 5),
        ("get", "VERB", "VB", "O", "advcl", 12),
        ("a", "DET", "DT", "B-TIME", "det", 8),
        ("good", "ADJ", "JJ", "I-TIME", "amod", 8),
        ("night", "NOUN", "NN", "I-TIME", "poss", 10),
        ("'s", "PART", "POS", "I-TIME", "case", 8),
        ("sleep", "NOUN", "NN", "O", "dobj", 5),
        ("it", "PRON", "PRP", "O", "nsubj", 12),
        ("'s", "AUX", "VBZ", "O", "ROOT", 0),
        ("likely", "ADJ", "JJ", "O", "acomp", 12),
        ("that", "SCONJ", "IN", "O", "mark", 17),
        ("your", "PRON", "PRP$", "O", "poss", 16),
        ("parents", "NOUN", "NNS", "O", "nsubj", 17),
        ("are", "AUX", "VBP", "O", "ccomp", 12),
        ("at", "ADV", "RB", "O", "advmod", 19),
        ("least", "ADV", "RBS", "O", "advmod", 20),
        ("partly", "ADV", "RB", "O", "advmod", 22),
        ("to", "PART", "TO", "O", "aux", 22),
        ("blame", "VERB", "VB", "O", "xcomp", 17),
    ];
    AnnotatedSentence {
        tokens: rows
            .iter()
            .map(|&(f, u, p, n, d, h)| token(f, u, p, n, d, h))
            .collect(),
    }
}

/// Builds a sentence from PTB tags with generic forms.
pub fn tagged_sentence(tags: &[&str]) -> AnnotatedSentence {
    AnnotatedSentence {
        tokens: tags
            .iter()
            .enumerate()
            .map(|(i, t)| token(&format!("w{i}"), "X", t, "O", "dep", 0))
            .collect(),
    }
}

/// CoNLL-2000 style sentences from a small phrase grammar. Some POS bigrams
/// map to more than one chunk tag (NN NN across a noun-phrase boundary, RB
/// after a verb) so a bigram chunker cannot be perfect.
pub fn conll2000_corpus(n: usize, seed: u64) -> Vec<ChunkSentence> {
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut s: ChunkSentence = Vec::new();
        let push = |s: &mut ChunkSentence, w: &str, pos: &str, chunk: &str| {
            s.push(ChunkToken {
                word: w.into(),
                pos: pos.into(),
                chunk: chunk.into(),
            })
        };
        let np = |s: &mut ChunkSentence, r: &mut ChaCha8Rng| {
            let mut first = true;
            let mut tag = |s: &mut ChunkSentence, w: &str, pos: &str| {
                push(s, w, pos, if first { "B-NP" } else { "I-NP" });
                first = false;
            };
            match r.gen_range(0..5) {
                0 => tag(s, "he", "PRP"),
                1 => {
                    tag(s, "the", "DT");
                    if r.gen_bool(0.5) {
                        tag(s, "big", "JJ");
                    }
                    if r.gen_bool(0.2) {
                        tag(s, "running", "VBG");
                    }
                    tag(s, "dog", "NN");
                }
                2 => {
                    tag(s, "Acme", "NNP");
                    if r.gen_bool(0.5) {
                        tag(s, "Corp", "NNP");
                    }
                }
                3 => {
                    tag(s, "two", "CD");
                    tag(s, "cats", "NNS");
                }
                _ => {
                    if r.gen_bool(0.5) {
                        tag(s, "new", "JJ");
                    }
                    tag(s, "rates", "NNS");
                }
            }
        };
        let vp = |s: &mut ChunkSentence, r: &mut ChaCha8Rng| match r.gen_range(0..4) {
            0 => push(s, "runs", "VBZ", "B-VP"),
            1 => {
                push(s, "will", "MD", "B-VP");
                push(s, "go", "VB", "I-VP");
            }
            2 => {
                push(s, "is", "VBZ", "B-VP");
                push(s, "running", "VBG", "I-VP");
            }
            _ => {
                push(s, "has", "VBZ", "B-VP");
                if r.gen_bool(0.4) {
                    push(s, "quickly", "RB", "I-VP");
                }
                push(s, "grown", "VBN", "I-VP");
            }
        };
        np(&mut s, &mut r);
        if r.gen_bool(0.3) {
            // noun-noun boundary the POS bigram cannot settle: "gave [the dog] [food]"
            // against "bought [the dog food]"
            let ditransitive = r.gen_bool(0.5);
            push(&mut s, if ditransitive { "gave" } else { "bought" }, "VBD", "B-VP");
            push(&mut s, "the", "DT", "B-NP");
            push(&mut s, "dog", "NN", "I-NP");
            push(&mut s, "food", "NN", if ditransitive { "B-NP" } else { "I-NP" });
        } else {
            vp(&mut s, &mut r);
            if r.gen_bool(0.3) {
                // "runs quickly" (adverb phrase) against "has quickly grown"
                push(&mut s, "quickly", "RB", "B-ADVP");
            } else if r.gen_bool(0.7) {
                np(&mut s, &mut r);
            }
        }
        if r.gen_bool(0.5) {
            push(&mut s, "in", "IN", "B-PP");
            np(&mut s, &mut r);
        }
        if r.gen_bool(0.3) {
            push(&mut s, "and", "CC", "O");
            vp(&mut s, &mut r);
            np(&mut s, &mut r);
        }
        push(&mut s, ".", ".", "O");
        out.push(s);
    }
    out
}

/// How the stub provider answers each request.
#[derive(Clone, Copy, Debug)]
pub enum StubMode {
    /// Deterministic vectors of the given width.
    Ok { dim: usize },
    /// HTTP 500 for the first `n` requests, then `Ok`.
    FailFirst { n: usize, dim: usize },
    /// HTTP 500 forever.
    AlwaysFail,
}

pub struct StubProvider {
    pub url: String,
    pub requests: Arc<AtomicUsize>,
    server: Arc<tiny_http::Server>,
    handle: Option<JoinHandle<()>>,
}

/// Stand-in embedding for a text: character histogram folded into `dim`
/// buckets, plus one so no vector is zero.
pub fn stub_embedding(text: &str, dim: usize) -> Vec<f64> {
    let mut v = vec![1.0; dim];
    for (i, b) in text.bytes().enumerate() {
        v[(b as usize + i) % dim] += 1.0;
    }
    v
}

impl StubProvider {
    pub fn start(mode: StubMode) -> Self {
        let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").unwrap());
        let url = format!("http://{}", server.server_addr().to_ip().unwrap());
        let requests = Arc::new(AtomicUsize::new(0));
        let (srv, count) = (server.clone(), requests.clone());
        let handle = std::thread::spawn(move || {
            for mut req in srv.incoming_requests() {
                let n = count.fetch_add(1, Ordering::SeqCst);
                let mut body = String::new();
                req.as_reader().read_to_string(&mut body).unwrap();
                let fail = match mode {
                    StubMode::AlwaysFail => true,
                    StubMode::FailFirst { n: k, .. } => n < k,
                    StubMode::Ok { .. } => false,
                };
                if fail {
                    let _ = req.respond(tiny_http::Response::from_string("boom").with_status_code(500));
                    continue;
                }
                let dim = match mode {
                    StubMode::Ok { dim } | StubMode::FailFirst { dim, .. } => dim,
                    StubMode::AlwaysFail => unreachable!(),
                };
                let parsed: serde_json::Value = serde_json::from_str(&body).unwrap();
                let texts = parsed["texts"].as_array().unwrap();
                let vectors: Vec<Vec<f64>> = texts
                    .iter()
                    .map(|t| stub_embedding(t.as_str().unwrap(), dim))
                    .collect();
                let reply = serde_json::json!({ "dim": dim, "vectors": vectors }).to_string();
                let header = tiny_http::Header::from_bytes("Content-Type", "application/json").unwrap();
                let _ = req.respond(tiny_http::Response::from_string(reply).with_header(header));
            }
        });
        StubProvider {
            url,
            requests,
            server,
            handle: Some(handle),
        }
    }

    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

impl Drop for StubProvider {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}
