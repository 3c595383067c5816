//! Aggregation of variant histograms: plain summation and plurality voting.
//!
//! The vote is evaluated exactly. For a threshold `t`, strings seen in fewer
//! than `t` variants are dropped, variants left without strings are dropped,
//! and each surviving string `b` is weighted by the probability that at least
//! `t` of the remaining variants would emit `b` when each is sampled once. The
//! count of such variants is Poisson-binomial in the per-variant frequencies.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use thiserror::Error;

use crate::outcome::{Distribution, Histogram};
use crate::par;
use crate::rng::SeedStream;

/// Starting threshold for voting.
pub const DEFAULT_T_START: usize = 7;
/// Shots per variant in the standard protocol.
pub const DEFAULT_SHOTS_PER_VARIANT: u64 = 100;

const MC_CHUNK: u64 = 1 << 15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MitigationError {
    #[error("no variant histograms")]
    Empty,
    #[error("variant {index} has width {got}, expected {expected}")]
    WidthMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("variant {0} has no shots")]
    ZeroShots(usize),
    #[error("starting threshold must be at least 2, got {0}")]
    InvalidThreshold(usize),
}

fn check(hists: &[Histogram]) -> Result<usize, MitigationError> {
    let first = hists.first().ok_or(MitigationError::Empty)?;
    for (i, h) in hists.iter().enumerate() {
        if h.width() != first.width() {
            return Err(MitigationError::WidthMismatch {
                index: i,
                expected: first.width(),
                got: h.width(),
            });
        }
        if h.shots() == 0 {
            return Err(MitigationError::ZeroShots(i));
        }
    }
    Ok(first.width())
}

/// Sum the counts of all variants and normalize.
pub fn simple_aggregate(hists: &[Histogram]) -> Result<Distribution, MitigationError> {
    let width = check(hists)?;
    let mut total = Histogram::new(width);
    for h in hists {
        total.merge(h).expect("widths checked");
    }
    Ok(total.to_distribution().expect("nonzero shots"))
}

/// Full Poisson-binomial mass function: entry `m` is the probability that
/// exactly `m` of the independent events with probabilities `freqs` occur.
pub fn poisson_binomial(freqs: &[f64]) -> Vec<f64> {
    let mut pmf = vec![0.0; freqs.len() + 1];
    pmf[0] = 1.0;
    for (n, &f) in freqs.iter().enumerate() {
        for m in (1..=n + 1).rev() {
            pmf[m] = pmf[m] * (1.0 - f) + pmf[m - 1] * f;
        }
        pmf[0] *= 1.0 - f;
    }
    pmf
}

/// `P(exactly m events)`; zero when `m > freqs.len()`.
pub fn poisson_binomial_pmf(freqs: &[f64], m: usize) -> f64 {
    poisson_binomial(freqs).get(m).copied().unwrap_or(0.0)
}

/// `P(at least t events)`, summing whichever tail is shorter.
fn at_least(freqs: &[f64], t: usize) -> f64 {
    let pmf = poisson_binomial(freqs);
    let n = freqs.len();
    if 2 * t < n {
        1.0 - pmf[..t].iter().sum::<f64>()
    } else {
        pmf.get(t..).map_or(0.0, |tail| tail.iter().sum())
    }
}

/// Outcome of a vote together with how it was reached.
#[derive(Clone, Debug, PartialEq)]
pub struct VoteResult {
    pub distribution: Distribution,
    /// Threshold at which strings survived; `None` after the fallback.
    pub threshold: Option<usize>,
    /// Variants that kept at least one string.
    pub variants_used: usize,
}

/// Strings present in at least `t` variants.
fn survivors(hists: &[Histogram], t: usize) -> BTreeSet<u64> {
    let mut seen: BTreeMap<u64, usize> = BTreeMap::new();
    for h in hists {
        for (&b, &c) in h.counts() {
            if c > 0 {
                *seen.entry(b).or_default() += 1;
            }
        }
    }
    seen.into_iter().filter(|&(_, n)| n >= t).map(|(b, _)| b).collect()
}

/// First threshold from `t_start` downwards with any surviving string.
fn find_threshold(hists: &[Histogram], t_start: usize) -> Option<(usize, BTreeSet<u64>)> {
    (2..=t_start).rev().find_map(|t| {
        let s = survivors(hists, t);
        (!s.is_empty()).then_some((t, s))
    })
}

/// Plurality vote with the threshold lowered one step at a time from
/// `t_start`; falls back to [`simple_aggregate`] when no string appears in
/// two or more variants.
pub fn plurality_vote_detailed(hists: &[Histogram], t_start: usize) -> Result<VoteResult, MitigationError> {
    let width = check(hists)?;
    if t_start < 2 {
        return Err(MitigationError::InvalidThreshold(t_start));
    }
    let Some((t, strings)) = find_threshold(hists, t_start) else {
        return Ok(VoteResult {
            distribution: simple_aggregate(hists)?,
            threshold: None,
            variants_used: hists.len(),
        });
    };
    let kept: Vec<&Histogram> = hists
        .iter()
        .filter(|h| h.counts().keys().any(|b| strings.contains(b)))
        .collect();
    let weights = par::map_slice(&strings.iter().copied().collect::<Vec<_>>(), |&b| {
        let freqs: Vec<f64> = kept
            .iter()
            .map(|h| h.count(b) as f64 / h.shots() as f64)
            .collect();
        (b, at_least(&freqs, t).max(0.0))
    });
    let distribution = Distribution::from_weights(width, weights)
        .expect("surviving strings have positive weight");
    Ok(VoteResult {
        distribution,
        threshold: Some(t),
        variants_used: kept.len(),
    })
}

/// [`plurality_vote_detailed`] returning only the distribution.
pub fn plurality_vote(hists: &[Histogram], t_start: usize) -> Result<Distribution, MitigationError> {
    plurality_vote_detailed(hists, t_start).map(|r| r.distribution)
}

/// Per-variant sampler: cumulative counts for inverse-CDF draws.
struct VariantSampler {
    strings: Vec<u64>,
    cumulative: Vec<u64>,
}

impl VariantSampler {
    fn new(h: &Histogram) -> Self {
        let mut acc = 0;
        let (strings, cumulative) = h
            .counts()
            .iter()
            .filter(|(_, &c)| c > 0)
            .map(|(&b, &c)| {
                acc += c;
                (b, acc)
            })
            .unzip();
        Self { strings, cumulative }
    }

    fn draw(&self, rng: &mut impl Rng) -> u64 {
        let total = *self.cumulative.last().expect("nonempty variant");
        let u = rng.random_range(0..total);
        self.strings[self.cumulative.partition_point(|&c| c <= u)]
    }
}

/// Monte Carlo rendering of the vote: each round draws one shot per variant
/// and accepts every string drawn in at least `t` variants. When a threshold
/// accepts nothing it is lowered; if even `t = 2` accepts nothing the simple
/// aggregate is returned.
///
/// Rounds are split into fixed chunks with their own random streams, so the
/// result does not depend on the worker count.
pub fn plurality_vote_mc(
    hists: &[Histogram],
    t_start: usize,
    rounds: u64,
    seed: u64,
) -> Result<Distribution, MitigationError> {
    let width = check(hists)?;
    if t_start < 2 {
        return Err(MitigationError::InvalidThreshold(t_start));
    }
    let samplers: Vec<VariantSampler> = hists.iter().map(VariantSampler::new).collect();
    let stream = SeedStream::new(seed, "vote-mc");
    let chunks = rounds.div_ceil(MC_CHUNK);
    for t in (2..=t_start).rev() {
        let tallies = par::map_range(chunks as usize, |c| {
            let mut rng = stream.child("threshold", t as u64).rng(c as u64);
            let n = MC_CHUNK.min(rounds - c as u64 * MC_CHUNK);
            let mut tally: BTreeMap<u64, u64> = BTreeMap::new();
            let mut row = vec![0u64; samplers.len()];
            for _ in 0..n {
                for (slot, s) in row.iter_mut().zip(&samplers) {
                    *slot = s.draw(&mut rng);
                }
                row.sort_unstable();
                let mut i = 0;
                while i < row.len() {
                    let j = row[i..].partition_point(|&x| x == row[i]) + i;
                    if j - i >= t {
                        *tally.entry(row[i]).or_default() += 1;
                    }
                    i = j;
                }
            }
            tally
        });
        let mut merged = Histogram::new(width);
        for tally in tallies {
            for (b, c) in tally {
                merged.add(b, c);
            }
        }
        if merged.shots() > 0 {
            return Ok(merged.to_distribution().expect("nonzero"));
        }
    }
    simple_aggregate(hists)
}
