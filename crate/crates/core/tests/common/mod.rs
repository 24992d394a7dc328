#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sentitrend::{Label, LabeledDocument};

const NEGATIVE: &[&str] = &["sad", "hate", "awful", "terrible", "miss", "sick", "tired", "worst", "cry", "bored"];
const NEUTRAL: &[&str] = &["going", "today", "work", "home", "watching", "bus", "meeting", "lunch", "reading", "weather"];
const POSITIVE: &[&str] = &["love", "happy", "great", "thanks", "awesome", "fun", "best", "nice", "good", "excited"];
const FILLER: &[&str] = &["the", "just", "now", "really", "so", "my", "it", "day", "night", "friends", "week", "morning"];

fn lexicon(label: Label) -> &'static [&'static str] {
    match label {
        Label::Negative => NEGATIVE,
        Label::Neutral => NEUTRAL,
        Label::Positive => POSITIVE,
    }
}

/// Short tweet-like texts: a few words from the label's lexicon mixed with
/// filler, mentions, URLs and (with probability `noise`) words from another
/// class.
pub fn synthetic_corpus(n: usize, noise: f64, seed: u64) -> Vec<LabeledDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = Label::ALL[rng.gen_range(0..3)];
            let mut words: Vec<String> = Vec::new();
            for _ in 0..rng.gen_range(1..4) {
                let source = if rng.gen_bool(noise) {
                    lexicon(Label::ALL[rng.gen_range(0..3)])
                } else {
                    lexicon(label)
                };
                words.push(source.choose(&mut rng).unwrap().to_string());
            }
            for _ in 0..rng.gen_range(0..5) {
                words.push(FILLER.choose(&mut rng).unwrap().to_string());
            }
            if rng.gen_bool(0.2) {
                words.push(format!("@user{}", rng.gen_range(0..1000)));
            }
            if rng.gen_bool(0.1) {
                words.push(format!("http://t.co/{}", rng.gen_range(0..1000)));
            }
            words.shuffle(&mut rng);
            LabeledDocument::new(format!("{i:08x}"), words.join(" "), label)
        })
        .collect()
}

/// Random probe strings: lexicon words, filler and unseen junk.
pub fn random_texts(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pools = [NEGATIVE, NEUTRAL, POSITIVE, FILLER];
    (0..n)
        .map(|_| {
            let k = rng.gen_range(0..8);
            (0..k)
                .map(|_| {
                    if rng.gen_bool(0.15) {
                        (0..rng.gen_range(1..6))
                            .map(|_| rng.gen_range(b'a'..=b'z') as char)
                            .collect()
                    } else {
                        pools.choose(&mut rng).unwrap().choose(&mut rng).unwrap().to_string()
                    }
                })
                .collect::<Vec<String>>()
                .join(" ")
        })
        .collect()
}

/// NDJSON fixture: `n` lines, about 1% of them malformed, timestamps spread
/// over `span_ms`.
pub fn ndjson_fixture(n: usize, span_ms: i64, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let texts = random_texts(n, seed ^ 0x5eed);
    texts
        .into_iter()
        .enumerate()
        .map(|(i, text)| {
            if rng.gen_bool(0.01) {
                format!("{{\"id\": \"broken-{i}\", \"text\": ")
            } else {
                let ts = rng.gen_range(0..span_ms);
                serde_json::json!({ "id": format!("user-{}", i % 977), "text": format!("@friend{} {text}", i % 13), "ts": ts })
                    .to_string()
            }
        })
        .collect()
}
