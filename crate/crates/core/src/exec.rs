//! Vocabulary-wide kernels with a rayon path and a sequential fallback.
//!
//! Reductions are split into fixed [`CHUNK`]-sized blocks, each block is
//! summed with Neumaier compensation, and block partials are merged in
//! block order. The decomposition does not depend on the thread pool, so
//! [`seq`] and [`par`] return bit-identical results.
//!
//! The crate-level functions dispatch to [`par`] when the `parallel`
//! feature is enabled and to [`seq`] otherwise.

/// Block length for reductions and the minimum length before work is split.
pub const CHUNK: usize = 4096;

/// Compensated (Neumaier) accumulator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(mut self, other: Compensated) -> Compensated {
        self.add(other.sum);
        self.add(other.comp);
        self
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

fn block_partial<F: Fn(usize) -> f64>(start: usize, end: usize, f: &F) -> Compensated {
    let mut acc = Compensated::default();
    for i in start..end {
        acc.add(f(i));
    }
    acc
}

fn block_bounds(n: usize, block: usize) -> (usize, usize) {
    (block * CHUNK, ((block + 1) * CHUNK).min(n))
}

pub mod seq {
    use super::*;

    /// Σ f(i) for i in 0..n.
    pub fn sum_by<F: Fn(usize) -> f64 + Sync>(n: usize, f: F) -> f64 {
        let blocks = n.div_ceil(CHUNK);
        (0..blocks)
            .map(|b| {
                let (s, e) = block_bounds(n, b);
                block_partial(s, e, &f)
            })
            .fold(Compensated::default(), Compensated::merge)
            .value()
    }

    pub fn map_by<F: Fn(usize) -> f64 + Sync>(n: usize, f: F) -> Vec<f64> {
        (0..n).map(f).collect()
    }

    pub fn batch<T: Sync, R: Send, F: Fn(&T) -> R + Sync>(items: &[T], f: F) -> Vec<R> {
        items.iter().map(f).collect()
    }
}

#[cfg(feature = "parallel")]
pub mod par {
    use rayon::prelude::*;

    use super::*;

    pub fn sum_by<F: Fn(usize) -> f64 + Sync>(n: usize, f: F) -> f64 {
        if n <= CHUNK {
            return seq::sum_by(n, f);
        }
        let blocks = n.div_ceil(CHUNK);
        let partials: Vec<Compensated> = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let (s, e) = block_bounds(n, b);
                block_partial(s, e, &f)
            })
            .collect();
        partials
            .into_iter()
            .fold(Compensated::default(), Compensated::merge)
            .value()
    }

    pub fn map_by<F: Fn(usize) -> f64 + Sync>(n: usize, f: F) -> Vec<f64> {
        if n <= CHUNK {
            return seq::map_by(n, f);
        }
        (0..n).into_par_iter().with_min_len(CHUNK).map(&f).collect()
    }

    pub fn batch<T: Sync, R: Send, F: Fn(&T) -> R + Sync>(items: &[T], f: F) -> Vec<R> {
        items.par_iter().map(&f).collect()
    }
}

#[cfg(feature = "parallel")]
use par as active;
#[cfg(not(feature = "parallel"))]
use seq as active;

pub fn sum_by<F: Fn(usize) -> f64 + Sync>(n: usize, f: F) -> f64 {
    active::sum_by(n, f)
}

pub fn map_by<F: Fn(usize) -> f64 + Sync>(n: usize, f: F) -> Vec<f64> {
    active::map_by(n, f)
}

/// Applies `f` to each item, preserving order. Items run concurrently when
/// the `parallel` feature is on.
pub fn batch<T: Sync, R: Send, F: Fn(&T) -> R + Sync>(items: &[T], f: F) -> Vec<R> {
    active::batch(items, f)
}

pub fn sum(xs: &[f64]) -> f64 {
    sum_by(xs.len(), |i| xs[i])
}

/// Whether vocabulary kernels run on the rayon pool in this build.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
