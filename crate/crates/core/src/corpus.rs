//! Toy byte-level corpora: a seeded pseudo-text generator, an order-1 Markov
//! chain with an analytic entropy rate, and the corpus file formats (raw
//! bytes, or a token-id binary with a 16-byte magic+length header).

use crate::rng::stream_rng;
use crate::{Error, Result};
use rand::Rng;
use std::io::{Read, Write};
use std::path::Path;

pub const TOKEN_MAGIC: &[u8; 8] = b"BLMTOKS1";

/// Common filler words for the synthetic corpus.
const WORDS: &[&str] = &[
    "the", "of", "and", "to", "in", "that", "was", "his", "her", "with", "for", "it", "as",
    "had", "is", "at", "by", "but", "not", "they", "from", "this", "she", "him", "all", "were",
    "when", "we", "there", "can", "an", "more", "if", "out", "so", "said", "what", "up", "its",
    "about", "into", "than", "them", "only", "other", "time", "new", "some", "could", "these",
    "two", "may", "then", "do", "first", "any", "my", "now", "such", "like", "our", "over",
    "man", "even", "most", "made", "after", "also", "did", "many", "before", "must", "through",
    "years", "where", "much", "your", "way", "well", "down", "should", "because", "each", "just",
    "those", "people", "how", "too", "little", "state", "good", "very", "make", "world", "still",
    "own", "see", "men", "work", "long", "get", "here", "between", "both", "life", "being",
    "under", "never", "day", "same", "another", "know", "while", "last", "might", "great", "old",
    "year", "off", "come", "since", "against", "go", "came", "right", "used", "take", "three",
    "house", "water", "light", "paper", "stone", "river", "garden", "winter", "summer", "road",
    "mountain", "morning", "evening", "window", "letter", "silver", "forest", "harbor", "bridge",
];

const SYLLABLES: &[&str] = &[
    "ar", "bel", "cor", "dan", "el", "fen", "gar", "hol", "im", "jor", "kal", "lun", "mor",
    "nar", "ol", "per", "quin", "ros", "sel", "tor", "ul", "ven", "wim", "yor", "zan",
];

/// Deterministic pseudo-text: paragraphs of sentences built from a fixed word
/// list, each paragraph salted with a few repeated topic words (including a
/// made-up proper noun) so that long-range context carries real signal.
pub fn generate_text(n_bytes: usize, seed: u64) -> Vec<u8> {
    let mut rng = stream_rng(seed, "synth-text", 0);
    let mut out: Vec<u8> = Vec::with_capacity(n_bytes + 256);
    while out.len() < n_bytes {
        // Topic for this paragraph: a proper noun plus a couple of words.
        let mut noun = String::new();
        for _ in 0..rng.gen_range(2..=3) {
            noun.push_str(SYLLABLES[rng.gen_range(0..SYLLABLES.len())]);
        }
        let mut chars = noun.chars();
        let noun: String = chars
            .next()
            .map(|c| c.to_ascii_uppercase())
            .into_iter()
            .chain(chars)
            .collect();
        let topics: Vec<&str> = (0..2).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect();

        for _ in 0..rng.gen_range(3..=7) {
            let len = rng.gen_range(5..=11);
            let mut sentence = String::new();
            for w in 0..len {
                let word = match rng.gen_range(0..100) {
                    0..=11 => noun.as_str(),
                    12..=27 => topics[rng.gen_range(0..topics.len())],
                    _ => WORDS[rng.gen_range(0..WORDS.len())],
                };
                if w == 0 {
                    let mut cs = word.chars();
                    if let Some(c) = cs.next() {
                        sentence.push(c.to_ascii_uppercase());
                        sentence.push_str(cs.as_str());
                    }
                } else {
                    sentence.push(' ');
                    sentence.push_str(word);
                }
                if w + 1 < len && rng.gen_range(0..100) < 7 {
                    sentence.push(',');
                }
            }
            sentence.push(match rng.gen_range(0..100) {
                0..=84 => '.',
                85..=92 => '?',
                _ => '!',
            });
            sentence.push(' ');
            out.extend_from_slice(sentence.as_bytes());
        }
        out.pop();
        out.extend_from_slice(b"\n\n");
    }
    out.truncate(n_bytes);
    out
}

/// An order-1 Markov chain over byte states with a computable entropy rate.
#[derive(Debug, Clone)]
pub struct MarkovChain {
    pub states: Vec<u8>,
    /// Row-stochastic transition matrix, p[i][j] = P(next = j | cur = i).
    pub p: Vec<Vec<f64>>,
}

impl MarkovChain {
    pub fn new(states: Vec<u8>, p: Vec<Vec<f64>>) -> Result<Self> {
        let n = states.len();
        if n == 0 || p.len() != n {
            return Err(Error::Config("markov chain shape mismatch".into()));
        }
        for row in &p {
            if row.len() != n {
                return Err(Error::Config("markov chain row length mismatch".into()));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 || row.iter().any(|&x| x < 0.0) {
                return Err(Error::Config("markov chain rows must be distributions".into()));
            }
        }
        Ok(MarkovChain { states, p })
    }

    /// A fixed 6-state chain used by tests and the corpus generator: a mix of
    /// near-deterministic and high-entropy rows.
    pub fn demo() -> Self {
        let states = b"abcdef".to_vec();
        let p = vec![
            vec![0.05, 0.85, 0.025, 0.025, 0.025, 0.025],
            vec![0.10, 0.05, 0.70, 0.05, 0.05, 0.05],
            vec![0.25, 0.25, 0.10, 0.20, 0.10, 0.10],
            vec![0.05, 0.05, 0.05, 0.05, 0.75, 0.05],
            vec![0.40, 0.10, 0.10, 0.10, 0.10, 0.20],
            vec![1.0 / 6.0; 6],
        ];
        MarkovChain::new(states, p).expect("demo chain is valid")
    }

    /// Stationary distribution by power iteration.
    pub fn stationary(&self) -> Vec<f64> {
        let n = self.states.len();
        let mut pi = vec![1.0 / n as f64; n];
        for _ in 0..10_000 {
            let mut next = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    next[j] += pi[i] * self.p[i][j];
                }
            }
            let diff: f64 = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
            pi = next;
            if diff < 1e-14 {
                break;
            }
        }
        pi
    }

    /// Entropy rate in nats: -sum_i pi_i sum_j p_ij ln p_ij.
    pub fn entropy_rate(&self) -> f64 {
        let pi = self.stationary();
        let mut h = 0.0;
        for (i, row) in self.p.iter().enumerate() {
            for &pij in row {
                if pij > 0.0 {
                    h -= pi[i] * pij * pij.ln();
                }
            }
        }
        h
    }

    pub fn generate(&self, n: usize, seed: u64) -> Vec<u8> {
        let mut rng = stream_rng(seed, "markov", 0);
        let mut out = Vec::with_capacity(n);
        let mut cur = 0usize;
        for _ in 0..n {
            out.push(self.states[cur]);
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut next = self.p[cur].len() - 1;
            for (j, &pij) in self.p[cur].iter().enumerate() {
                acc += pij;
                if u < acc {
                    next = j;
                    break;
                }
            }
            cur = next;
        }
        out
    }
}

/// Writes a token-id corpus: 8-byte magic, u64 LE count, then u16 LE ids.
pub fn save_tokens(path: &Path, tokens: &[u16]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(TOKEN_MAGIC)?;
    f.write_all(&(tokens.len() as u64).to_le_bytes())?;
    for &t in tokens {
        f.write_all(&t.to_le_bytes())?;
    }
    f.flush()?;
    Ok(())
}

/// Loads a corpus: token-id binary when the magic matches, raw bytes
/// (byte-level tokenization) otherwise.
pub fn load_corpus(path: &Path) -> Result<Vec<u16>> {
    let mut f = std::fs::File::open(path)?;
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes)?;
    if bytes.len() >= 16 && &bytes[..8] == TOKEN_MAGIC {
        let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let body = &bytes[16..];
        if body.len() != count * 2 {
            return Err(Error::Format(format!(
                "token corpus declares {count} tokens but carries {} bytes",
                body.len()
            )));
        }
        Ok(body
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect())
    } else {
        Ok(bytes.into_iter().map(u16::from).collect())
    }
}
