//! Straight-line reference implementation of the contrastive step, kept
//! independent of the engine: plain loops over `Vec<f64>`, `powf`/`log2`,
//! no shared helpers.

#![allow(dead_code)]

pub const NEG_INF: f64 = f64::NEG_INFINITY;

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut max = NEG_INF;
    for &x in logits {
        if x > max {
            max = x;
        }
    }
    let mut e = vec![0.0; logits.len()];
    let mut z = 0.0;
    for i in 0..logits.len() {
        if logits[i] > NEG_INF {
            e[i] = (logits[i] - max).exp();
            z += e[i];
        }
    }
    for x in e.iter_mut() {
        *x /= z;
    }
    e
}

pub fn bounded_divergence(p: &[f64], q: &[f64], k: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        s += (p[i] + q[i]) * ((p[i] - q[i]).abs().powf(k) + 1.0).log2();
    }
    0.5 * s
}

pub struct OracleStep {
    pub divergence: f64,
    pub alpha: f64,
    pub beta: f64,
    pub head: Vec<u32>,
    pub contrast: Vec<f64>,
    pub distribution: Vec<f64>,
}

/// Finite logits only.
pub fn code_step(v: &[f64], d: &[f64], k: f64) -> OracleStep {
    let pv = softmax(v);
    let pd = softmax(d);
    let divergence = bounded_divergence(&pv, &pd, k);
    let alpha = 1.0 - divergence;
    let beta = divergence;
    let mut pmax = 0.0;
    for &p in &pv {
        if p > pmax {
            pmax = p;
        }
    }
    let mut head = Vec::new();
    let mut contrast = vec![NEG_INF; v.len()];
    for i in 0..v.len() {
        if pv[i] >= beta * pmax {
            head.push(i as u32);
            contrast[i] = (1.0 + alpha) * v[i] - alpha * d[i];
        }
    }
    let distribution = softmax(&contrast);
    OracleStep {
        divergence,
        alpha,
        beta,
        head,
        contrast,
        distribution,
    }
}

pub fn cd_distribution(expert: &[f64], amateur: &[f64], alpha: f64) -> Vec<f64> {
    let mut c = vec![0.0; expert.len()];
    for i in 0..expert.len() {
        c[i] = (1.0 + alpha) * expert[i] - alpha * amateur[i];
    }
    softmax(&c)
}

pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        if p[i] > 0.0 {
            s += p[i] * (p[i] / q[i]).ln();
        }
    }
    s
}
