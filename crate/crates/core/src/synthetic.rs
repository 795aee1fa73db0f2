//! Templated toy corpora for smoke runs and tests.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DET: &[&str] = &["the", "a", "this", "that", "every", "my", "our", "their"];
const NOUN: &[&str] = &[
    "film", "movie", "story", "actor", "plot", "song", "book", "show", "meal", "hotel", "room",
    "game", "team", "car", "phone", "camera", "album", "novel", "series", "concert", "garden",
    "museum", "teacher", "coffee",
];
const PLACE: &[&str] = &["city", "park", "town", "school", "market", "station", "village", "theater"];
const PERSON: &[&str] = &["i", "we", "they", "you", "she", "he", "people", "critics", "friends", "kids"];
const VERB: &[&str] = &[
    "liked", "loved", "watched", "saw", "found", "enjoyed", "hated", "missed", "read", "played",
    "visited", "bought", "heard", "noticed", "described", "remembered",
];
const POSITIVE: &[&str] = &[
    "good", "great", "wonderful", "excellent", "fine", "lovely", "brilliant", "superb", "charming",
    "delightful",
];
const NEGATIVE: &[&str] = &[
    "bad", "awful", "terrible", "poor", "boring", "dull", "weak", "horrible", "dreadful", "painful",
];
const NEUTRAL: &[&str] = &["old", "new", "long", "short", "small", "large", "red", "blue", "quiet", "busy"];
const ADVERB: &[&str] = &["really", "very", "quite", "truly", "rather", "so"];
const TIME: &[&str] = &["yesterday", "today", "again", "twice", "tonight", "recently"];
const LINK: &[&str] = &["felt", "looked", "seemed", "was"];

fn pick<'a>(rng: &mut ChaCha8Rng, words: &[&'a str]) -> &'a str {
    words.choose(rng).expect("non-empty word list")
}

fn adjective(rng: &mut ChaCha8Rng, polarity: Option<usize>) -> &'static str {
    match polarity {
        Some(0) => pick(rng, POSITIVE),
        Some(_) => pick(rng, NEGATIVE),
        None => match rng.random_range(0..3) {
            0 => pick(rng, POSITIVE),
            1 => pick(rng, NEGATIVE),
            _ => pick(rng, NEUTRAL),
        },
    }
}

/// Sentences carrying an opinion; polarity 0 is positive, 1 negative.
fn opinion(rng: &mut ChaCha8Rng, polarity: usize) -> String {
    let p = Some(polarity);
    match rng.random_range(0..4) {
        0 => format!(
            "{} {} {} was {} {}",
            pick(rng, DET),
            pick(rng, NEUTRAL),
            pick(rng, NOUN),
            pick(rng, ADVERB),
            adjective(rng, p)
        ),
        1 => format!(
            "{} {} {} {} {} and {}",
            pick(rng, DET),
            pick(rng, NOUN),
            pick(rng, LINK),
            pick(rng, ADVERB),
            adjective(rng, p),
            adjective(rng, p)
        ),
        2 => format!("{} {} is {}", pick(rng, DET), pick(rng, NOUN), adjective(rng, p)),
        _ => format!(
            "it was {} {} {} {}",
            pick(rng, DET),
            pick(rng, ADVERB),
            adjective(rng, p),
            pick(rng, NOUN)
        ),
    }
}

fn narrative(rng: &mut ChaCha8Rng) -> String {
    match rng.random_range(0..4) {
        0 => format!(
            "{} {} {} {} {}",
            pick(rng, PERSON),
            pick(rng, VERB),
            pick(rng, DET),
            pick(rng, NOUN),
            pick(rng, TIME)
        ),
        1 => format!(
            "{} {} {} {} {} in {} {}",
            pick(rng, PERSON),
            pick(rng, VERB),
            pick(rng, DET),
            pick(rng, NEUTRAL),
            pick(rng, NOUN),
            pick(rng, DET),
            pick(rng, PLACE)
        ),
        2 => format!(
            "{} {} {} {} but {} {} was {}",
            pick(rng, PERSON),
            pick(rng, VERB),
            pick(rng, DET),
            pick(rng, NOUN),
            pick(rng, DET),
            pick(rng, NOUN),
            adjective(rng, None)
        ),
        _ => format!(
            "{} {} it {} with {} {}",
            pick(rng, PERSON),
            pick(rng, VERB),
            pick(rng, TIME),
            pick(rng, DET),
            pick(rng, PERSON)
        ),
    }
}

/// `n` unlabeled sentences of 4 to 10 words, deterministic in `seed`.
pub fn toy_corpus(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            if rng.random_bool(0.5) {
                narrative(&mut rng)
            } else {
                let polarity = rng.random_range(0..2);
                opinion(&mut rng, polarity)
            }
        })
        .collect()
}

/// `n` opinion sentences with alternating polarity labels.
pub fn sentiment_dataset(n: usize, seed: u64) -> Vec<(String, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = i % 2;
            (opinion(&mut rng, label), label)
        })
        .collect()
}

/// Two-column TSV (`text<TAB>label`).
pub fn to_tsv(rows: &[(String, usize)]) -> String {
    rows.iter().map(|(t, l)| format!("{t}\t{l}\n")).collect()
}

/// Every word the generators can emit.
pub fn word_list() -> Vec<&'static str> {
    let mut words: Vec<&str> = [
        DET, NOUN, PLACE, PERSON, VERB, POSITIVE, NEGATIVE, NEUTRAL, ADVERB, TIME, LINK,
    ]
    .concat();
    words.extend(["in", "but", "and", "with", "it", "is"]);
    words.sort_unstable();
    words.dedup();
    words
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_shape() {
        let c = toy_corpus(500, 7);
        assert_eq!(c, toy_corpus(500, 7));
        let words = word_list();
        for s in &c {
            let n = s.split_whitespace().count();
            assert!((4..=10).contains(&n), "{s}");
            assert!(s.split_whitespace().all(|w| words.contains(&w)), "{s}");
        }
        assert!((100..=140).contains(&words.len()));
    }

    #[test]
    fn sentiment_labels_follow_polarity() {
        for (text, label) in sentiment_dataset(200, 1) {
            let words: Vec<&str> = text.split_whitespace().collect();
            let (own, other) = if label == 0 { (POSITIVE, NEGATIVE) } else { (NEGATIVE, POSITIVE) };
            assert!(words.iter().any(|w| own.contains(w)));
            assert!(!words.iter().any(|w| other.contains(w)));
        }
    }
}
