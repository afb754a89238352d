//! Builders for the committed trace fixtures.

use code_core::providers::ngram::{Corpus, NGramModel};
use code_core::providers::{StepLogits, TraceFile, TraceHeader};
use code_core::{Context, ContextPair, LogitVector, TokenId, Vocabulary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::oracle;

pub const FAGE_V: f64 = 15.02;
pub const YOPLAIT_V: f64 = 15.34;
pub const FAGE_CODE: f64 = 16.66;
pub const YOPLAIT_CODE: f64 = 15.30;
pub const YOGURT_K: f64 = 0.3;

pub const FAGE: TokenId = 1;
pub const YOPLAIT: TokenId = 2;

const WORDS: [&str; 12] = [
    "Chobani", "Danone", "Activia", "Greek", "yogurt", "brand", "The", "cup", "a", "of", "is",
    "plain",
];
const TAIL: usize = 200;

fn yogurt_vocab() -> Vocabulary {
    let mut tokens = vec!["<eos>".to_string(), "Fage".into(), "Yoplait".into()];
    tokens.extend(WORDS.iter().map(|w| w.to_string()));
    tokens.extend((tokens.len()..TAIL + 3).map(|i| format!("w{i}")));
    Vocabulary::new(tokens, Some(0)).unwrap()
}

/// Visual logits and description tails shared by every candidate weight.
fn yogurt_tails() -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut v = vec![0.0; TAIL + 3];
    let mut d = vec![0.0; TAIL + 3];
    for i in (0..TAIL + 3).filter(|&i| i != FAGE as usize && i != YOPLAIT as usize) {
        let u: f64 = rng.random();
        v[i] = 12.5 + 2.0 * (1.0 - u).ln();
        d[i] = v[i] + rng.random_range(-0.3..0.3);
    }
    v[FAGE as usize] = FAGE_V;
    v[YOPLAIT as usize] = YOPLAIT_V;
    (v, d)
}

/// Description logits that give the pinned post-contrast scores under
/// contrast weight `alpha`.
fn yogurt_description(alpha: f64, tail: &[f64]) -> Vec<f64> {
    let mut d = tail.to_vec();
    d[FAGE as usize] = ((1.0 + alpha) * FAGE_V - FAGE_CODE) / alpha;
    d[YOPLAIT as usize] = ((1.0 + alpha) * YOPLAIT_V - YOPLAIT_CODE) / alpha;
    d
}

/// Solves `alpha = 1 − D(P_v, P_d(alpha))` by bisection with the oracle.
pub fn yogurt_solution() -> (f64, Vec<f64>, Vec<f64>) {
    let (v, tail) = yogurt_tails();
    let p_v = oracle::softmax(&v);
    let gap = |alpha: f64| {
        let p_d = oracle::softmax(&yogurt_description(alpha, &tail));
        1.0 - oracle::bounded_divergence(&p_v, &p_d, YOGURT_K) - alpha
    };
    let (mut lo, mut hi) = (0.3, 0.99);
    assert!(gap(lo) > 0.0 && gap(hi) < 0.0, "no root bracketed");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let alpha = 0.5 * (lo + hi);
    let d = yogurt_description(alpha, &tail);
    (alpha, v, d)
}

/// One-step trace where contrast moves Fage above Yoplait.
pub fn yogurt_trace() -> TraceFile {
    let (_, v, d) = yogurt_solution();
    let vocab = yogurt_vocab();
    let mut trace = TraceFile::new(TraceHeader {
        model: "constructed".into(),
        prompt: "What is the brand of the yogurt in the image?".into(),
        k: YOGURT_K,
        note: "description logits solved so the contrast scores Fage 16.66 and Yoplait 15.30"
            .into(),
        ..TraceHeader::new(&vocab)
    });
    trace.steps.push(StepLogits {
        step: 0,
        logits_v: LogitVector::new(v).unwrap(),
        logits_d: LogitVector::new(d).unwrap(),
        recorded_choice: YOPLAIT,
    });
    trace
}

const SCENE: &str = "a red cup sits on a wooden table near the window\n\
                     a red cup sits on the table next to a blue plate\n\
                     a small dog sleeps under the wooden table\n";
const DESCRIPTION: &str = "the blue plate holds a slice of bread and a knife\n\
                           the window shows a garden with tall green trees\n\
                           a woman pours milk into the red cup\n";

/// Two n-gram models over one vocabulary, one per context, recorded
/// greedily for ten steps.
pub fn ngram_trace() -> TraceFile {
    let corpus = Corpus::from_text(&format!("{SCENE}{DESCRIPTION}"), true).unwrap();
    let lines = |text: &str| -> Vec<Vec<TokenId>> {
        text.lines()
            .map(|l| {
                let mut ids = corpus.vocab.encode(l).unwrap();
                ids.push(0);
                ids
            })
            .collect()
    };
    let v = NGramModel::train(&lines(SCENE), corpus.vocab.clone(), 2, 0.5).unwrap();
    let d = NGramModel::train(&lines(DESCRIPTION), corpus.vocab.clone(), 2, 0.5).unwrap();
    let header = TraceHeader {
        model: "ngram".into(),
        note: "bigram models of a scene and of its description".into(),
        ..TraceHeader::new(&corpus.vocab)
    };
    let start = ContextPair::shared(Context::new(Vec::new()));
    TraceFile::record(header, &v, &d, start, 10).unwrap()
}
