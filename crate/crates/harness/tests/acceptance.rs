//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

mod support;

use std::panic::{self, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use code_core::divergence::noise_gap;
use code_core::providers::TraceFile;
use code_core::strategies::{cd_distribution, code_step};
use code_core::{
    argmax_token, bounded_divergence, softmax, DecodeConfig, LogitVector, ProbDistribution,
    Strategy, TokenId,
};
use code_harness::compare::StrategySpec;
use code_harness::{run_bench, run_decode, Layer, ProviderKind, Session, Settings};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use support::fixtures::{self, yogurt_trace, FAGE, YOPLAIT};
use support::{fixture, oracle};

const KS: [f64; 4] = [0.1, 0.3, 1.0, 2.0];
const SIZES: [usize; 3] = [2, 10, 1000];

fn pd(v: Vec<f64>) -> ProbDistribution {
    ProbDistribution::new(v).unwrap()
}

fn lv(v: &[f64]) -> LogitVector {
    LogitVector::new(v.to_vec()).unwrap()
}

/// Random distribution: dense softmax at a random scale, sometimes with
/// part of the support zeroed.
fn random_distribution(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let scale = [0.5, 3.0, 15.0][rng.random_range(0..3)];
    let mut logits: Vec<f64> = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
    if n > 2 && rng.random_bool(0.25) {
        let keep = rng.random_range(0..n);
        for (i, x) in logits.iter_mut().enumerate() {
            if i != keep && rng.random_bool(0.5) {
                *x = f64::NEG_INFINITY;
            }
        }
    }
    oracle::softmax(&logits)
}

fn random_logits(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let scale = [1.0, 5.0, 20.0][rng.random_range(0..3)];
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn divergence_bounds() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut pairs = 0;
    let mut worst_asym = 0.0f64;
    for round in 0..3334 {
        for &n in &SIZES {
            let p = random_distribution(&mut rng, n);
            let q = random_distribution(&mut rng, n);
            let k = KS[round % 4];
            let (pp, qq) = (pd(p.clone()), pd(q.clone()));
            let d = bounded_divergence(&pp, &qq, k).unwrap();
            let back = bounded_divergence(&qq, &pp, k).unwrap();
            ensure((0.0..=1.0).contains(&d), || {
                format!("D = {d} outside [0, 1]")
            })?;
            worst_asym = worst_asym.max((d - back).abs());
            ensure(bounded_divergence(&pp, &pp, k).unwrap() == 0.0, || {
                "D(P, P) != 0".into()
            })?;
            // Zero exactly when every gap is within softmax rounding noise.
            let distinct = p
                .iter()
                .zip(&q)
                .any(|(&a, &b)| (a - b).abs() > noise_gap(a, b));
            ensure(distinct == (d > 0.0), || {
                format!(
                    "n={n} k={k}: D = {d:e} for max gap {:e}",
                    max_abs_diff(&p, &q)
                )
            })?;
            pairs += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(pairs >= 10_000, || format!("only {pairs} pairs"))?;
    ensure(worst_asym <= 1e-15, || format!("asymmetry {worst_asym:e}"))?;
    ensure(elapsed < Duration::from_secs(10), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "{pairs} pairs, max asymmetry {worst_asym:e}, {elapsed:.2?}"
    ))
}

fn boundary_values() -> Result<String, String> {
    let mut worst = 0.0f64;
    for n in [2, 10, 1000] {
        for k in KS {
            let d = bounded_divergence(
                &ProbDistribution::one_hot(n, 0).unwrap(),
                &ProbDistribution::one_hot(n, (n - 1) as TokenId).unwrap(),
                k,
            )
            .unwrap();
            worst = worst.max((d - 1.0).abs());
            ensure((d - 1.0).abs() <= 1e-12, || {
                format!("disjoint one-hots n={n} k={k}: {d}")
            })?;
            let p = pd(oracle::softmax(
                &(0..n).map(|i| (i as f64).sin()).collect::<Vec<_>>(),
            ));
            ensure(bounded_divergence(&p, &p, k).unwrap() == 0.0, || {
                "P = Q gave nonzero".into()
            })?;
        }
    }
    let half = pd(vec![0.5, 0.5]);
    let point = pd(vec![1.0, 0.0]);
    let k1 = bounded_divergence(&half, &point, 1.0).unwrap();
    let k03 = bounded_divergence(&half, &point, 0.3).unwrap();
    ensure(
        (k1 - 0.584963).abs() <= 1e-6 && (k1 - 1.5f64.log2()).abs() <= 1e-9,
        || format!("k=1: {k1}"),
    )?;
    ensure((k03 - 0.857785).abs() <= 1e-5, || format!("k=0.3: {k03}"))?;
    Ok(format!(
        "k=1 -> {k1:.9}, k=0.3 -> {k03:.6}, one-hot error {worst:e}"
    ))
}

fn oracle_equivalence() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let n = SIZES[case % 3];
        let k = KS[case % 4];
        let v = random_logits(&mut rng, n);
        let d = random_logits(&mut rng, n);
        let got = code_step(&lv(&v), &lv(&d), k).map_err(|e| e.to_string())?;
        let want = oracle::code_step(&v, &d, k);
        ensure(got.head_set == want.head, || {
            format!("case {case}: head sets differ")
        })?;
        let diff = max_abs_diff(got.distribution.as_slice(), &want.distribution)
            .max((got.divergence.unwrap() - want.divergence).abs())
            .max((got.alpha_t - want.alpha).abs());
        worst = worst.max(diff);
    }
    let elapsed = start.elapsed();
    ensure(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    ensure(elapsed < Duration::from_secs(30), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "1000 pairs, max deviation {worst:e}, {elapsed:.2?}"
    ))
}

fn reduction_identities() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for case in 0..300 {
        let n = SIZES[case % 3];
        let e = random_logits(&mut rng, n);
        let a = random_logits(&mut rng, n);
        let base = softmax(&lv(&e), 1.0).unwrap();
        let cd = cd_distribution(&lv(&e), &lv(&a), 0.0).unwrap();
        worst = worst.max(max_abs_diff(cd.as_slice(), base.as_slice()));

        let same = code_step(&lv(&e), &lv(&e), KS[case % 4]).unwrap();
        ensure(same.alpha_t == 1.0 && same.beta_t == 0.0, || {
            format!(
                "identical views gave alpha {} beta {}",
                same.alpha_t, same.beta_t
            )
        })?;
        worst = worst.max(max_abs_diff(same.distribution.as_slice(), base.as_slice()));
    }
    ensure(worst <= 1e-9, || format!("deviation {worst:e}"))?;
    for n in [2, 10, 1000] {
        let mut v = vec![f64::NEG_INFINITY; n];
        let mut d = vec![f64::NEG_INFINITY; n];
        v[0] = 0.0;
        d[n - 1] = 0.0;
        let s = code_step(&lv(&v), &lv(&d), 0.3).unwrap();
        ensure(s.alpha_t == 0.0 && s.beta_t == 1.0, || {
            format!(
                "disjoint one-hots gave alpha {} beta {}",
                s.alpha_t, s.beta_t
            )
        })?;
        ensure(s.head_set == vec![0], || format!("head {:?}", s.head_set))?;
        ensure(s.distribution.as_slice()[0] == 1.0, || {
            "mass left the argmax".into()
        })?;
    }
    Ok(format!("max deviation {worst:e}"))
}

fn constraint_safety() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut masked = 0usize;
    for case in 0..3000 {
        let n = SIZES[case % 3];
        let mut v = random_logits(&mut rng, n);
        let mut d = random_logits(&mut rng, n);
        if case % 5 == 0 {
            let tie = v[0];
            v[n - 1] = tie;
        }
        if case % 7 == 0 {
            d[rng.random_range(0..n)] = f64::NEG_INFINITY;
        }
        if case % 11 == 0 && n > 2 {
            v[1] = f64::NEG_INFINITY;
        }
        let s = code_step(&lv(&v), &lv(&d), KS[case % 4]).unwrap();
        let top = argmax_token(&v);
        ensure(s.head_set.contains(&top), || {
            format!("case {case}: argmax {top} outside head")
        })?;
        for (i, &p) in s.distribution.as_slice().iter().enumerate() {
            if !s.head_set.contains(&(i as TokenId)) {
                ensure(p == 0.0, || {
                    format!("case {case}: masked token {i} has mass {p:e}")
                })?;
                masked += 1;
            }
        }
    }
    Ok(format!(
        "3000 steps, {masked} masked tokens all at exactly 0"
    ))
}

fn codedec(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_codedec"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "codedec {} exited with {}: {}",
            args.join(" "),
            out.status,
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn json(bytes: &[u8]) -> Result<Value, String> {
    serde_json::from_slice(bytes).map_err(|e| e.to_string())
}

fn brand_inversion() -> Result<String, String> {
    let path = fixture("yogurt_trace.json");
    let committed = TraceFile::load(&path).map_err(|e| e.to_string())?;
    ensure(committed == yogurt_trace(), || {
        "committed fixture differs from its construction".into()
    })?;
    let path = path.to_str().unwrap();

    let rows = json(&codedec(&[
        "trace",
        "--trace-file",
        path,
        "--k",
        "0.3",
        "--output",
        "machine",
    ])?)?;
    let row = &rows[0];
    let score = |column: &str, id: TokenId| -> Result<f64, String> {
        row[column]
            .as_array()
            .and_then(|c| c.iter().find(|s| s["id"] == id))
            .and_then(|s| s["logit"].as_f64())
            .ok_or_else(|| format!("token {id} missing from {column}"))
    };
    let pinned = [
        ("Fage pre", score("top_v", FAGE)?, fixtures::FAGE_V),
        ("Yoplait pre", score("top_v", YOPLAIT)?, fixtures::YOPLAIT_V),
        ("Fage post", score("top_code", FAGE)?, fixtures::FAGE_CODE),
        (
            "Yoplait post",
            score("top_code", YOPLAIT)?,
            fixtures::YOPLAIT_CODE,
        ),
    ];
    for (what, got, want) in pinned {
        ensure((got - want).abs() <= 0.01, || {
            format!("{what}: {got} vs {want}")
        })?;
    }
    ensure(row["flip"] == true, || "no flip reported".into())?;

    let decode = |strategy: &str| -> Result<Value, String> {
        json(&codedec(&[
            "decode",
            "--provider",
            "trace",
            "--trace-file",
            path,
            "--strategy",
            strategy,
            "--k",
            "0.3",
            "--output",
            "machine",
        ])?)
    };
    let greedy = decode("greedy")?["tokens"].clone();
    let code = decode("code")?["tokens"].clone();
    ensure(greedy == serde_json::json!([YOPLAIT]), || {
        format!("greedy chose {greedy}")
    })?;
    ensure(code == serde_json::json!([FAGE]), || {
        format!("code chose {code}")
    })?;
    Ok(format!(
        "Fage {:.2} -> {:.2}, Yoplait {:.2} -> {:.2}; greedy Yoplait, code Fage",
        pinned[0].1, pinned[2].1, pinned[1].1, pinned[3].1
    ))
}

/// A generated corpus and a scene drawn from its first line.
fn large_corpus() -> (tempfile::NamedTempFile, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut text = String::new();
    for _ in 0..2000 {
        let words: Vec<String> = (0..15)
            .map(|_| format!("w{}", rng.random_range(0..20_000)))
            .collect();
        text.push_str(&words.join(" "));
        text.push('\n');
    }
    let file = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(file.path(), &text).unwrap();
    let scene = text
        .split_whitespace()
        .take(3)
        .collect::<Vec<_>>()
        .join(" ");
    (file, scene)
}

fn cost_accounting() -> Result<String, String> {
    let (corpus, scene) = large_corpus();
    let layer = Layer {
        provider: Some(ProviderKind::Ngram),
        corpus: Some(corpus.path().to_path_buf()),
        scene: Some(scene),
        max_tokens: Some(24),
        rng_seed: Some(7),
        ..Layer::default()
    };
    let mut settings = Settings::resolve(&layer);
    settings.decode.strategy = Strategy::Code;
    let session = Session::open(&settings).map_err(|e| e.to_string())?;

    for strategy in [Strategy::Greedy, Strategy::Nucleus, Strategy::Code] {
        let config = DecodeConfig {
            strategy,
            ..settings.decode.clone()
        };
        let r = run_decode(&session, &config).map_err(|e| e.to_string())?;
        let per_token = if strategy == Strategy::Code { 1 } else { 0 };
        let n = r.tokens.len() as u64;
        ensure(
            r.calls.visual == n && r.calls.description == per_token * n,
            || format!("{strategy}: {:?} for {n} tokens", r.calls),
        )?;
    }

    let specs = [
        StrategySpec::plain(Strategy::Greedy),
        StrategySpec::plain(Strategy::Code),
    ];
    let report = run_bench(&session, &settings.decode, &specs, 1, 7).map_err(|e| e.to_string())?;
    let (greedy, code) = (&report.strategies[0], &report.strategies[1]);
    ensure(greedy.calls_per_token == 1.0, || {
        format!("greedy {}", greedy.calls_per_token)
    })?;
    ensure(code.calls_per_token == 2.0, || {
        format!("code {}", code.calls_per_token)
    })?;
    ensure(
        code.ms_per_token.median >= greedy.ms_per_token.median,
        || {
            format!(
                "code {:.4} ms/token < greedy {:.4} ms/token",
                code.ms_per_token.median, greedy.ms_per_token.median
            )
        },
    )?;
    Ok(format!(
        "calls/token greedy 1, nucleus 1, code 2; median ms/token greedy {:.3}, code {:.3}",
        greedy.ms_per_token.median, code.ms_per_token.median
    ))
}

fn determinism() -> Result<String, String> {
    let tiny = fixture("tiny.txt");
    let tiny = tiny.to_str().unwrap();
    let yogurt = fixture("yogurt_trace.json");
    let ngram = fixture("ngram_trace.json");
    let runs: Vec<Vec<&str>> = vec![
        vec![
            "decode",
            "--strategy",
            "greedy",
            "--provider",
            "ngram",
            "--corpus",
            tiny,
            "--max-tokens",
            "8",
            "--seed",
            "7",
        ],
        vec![
            "decode",
            "--strategy",
            "nucleus",
            "--corpus",
            tiny,
            "--max-tokens",
            "12",
            "--seed",
            "7",
            "--output",
            "machine",
        ],
        vec![
            "decode",
            "--strategy",
            "code",
            "--corpus",
            tiny,
            "--scene",
            "a small dog",
            "--selector",
            "sample",
            "--seed",
            "11",
            "--output",
            "machine",
        ],
        vec![
            "compare",
            "--corpus",
            tiny,
            "--scene",
            "the blue plate",
            "greedy",
            "code",
            "code:k=10",
            "--output",
            "machine",
        ],
        vec![
            "trace",
            "--trace-file",
            yogurt.to_str().unwrap(),
            "--output",
            "machine",
        ],
        vec![
            "decode",
            "--provider",
            "trace",
            "--trace-file",
            ngram.to_str().unwrap(),
            "--strategy",
            "code",
            "--output",
            "machine",
        ],
    ];
    for args in &runs {
        let first = codedec(args)?;
        let second = codedec(args)?;
        ensure(!first.is_empty() && first == second, || {
            format!("codedec {} differs between runs", args.join(" "))
        })?;
    }
    Ok(format!(
        "{} commands byte-identical across two runs",
        runs.len()
    ))
}

type Criterion = (&'static str, fn() -> Result<String, String>);

fn main() {
    let criteria: [Criterion; 8] = [
        ("divergence bound suite", divergence_bounds),
        ("boundary values", boundary_values),
        ("oracle equivalence", oracle_equivalence),
        ("reduction identities", reduction_identities),
        ("constraint safety", constraint_safety),
        ("brand inversion fixture", brand_inversion),
        ("cost accounting", cost_accounting),
        ("determinism", determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!(
        "{} of {} acceptance criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
