//! Set partitions and the moment-cumulant relation
//! `⟨n^k⟩ = Σ_P Π_{α∈P} κ_{|α|}`.

use crate::error::{Error, Result};

pub const MAX_PARTITION_ORDER: usize = 12;

/// A partition of `{1..k}` into blocks sorted by least element.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SetPartition {
    pub blocks: Vec<Vec<usize>>,
}

impl SetPartition {
    /// Builds the partition from a restricted-growth string `a` where
    /// element `i + 1` sits in block `a[i]`.
    fn from_growth(a: &[usize]) -> Self {
        let count = a.iter().max().map_or(0, |m| m + 1);
        let mut blocks = vec![Vec::new(); count];
        for (i, &b) in a.iter().enumerate() {
            blocks[b].push(i + 1);
        }
        SetPartition { blocks }
    }

    pub fn block_sizes(&self) -> impl Iterator<Item = usize> + '_ {
        self.blocks.iter().map(Vec::len)
    }
}

/// Restricted-growth strings of length `k`: `a[0] = 0`,
/// `a[i] <= 1 + max(a[..i])`.
#[derive(Debug, Clone)]
pub struct GrowthStrings {
    a: Vec<usize>,
    maxes: Vec<usize>,
    done: bool,
}

impl GrowthStrings {
    pub fn new(k: usize) -> Self {
        GrowthStrings {
            a: vec![0; k],
            maxes: vec![0; k],
            done: k == 0,
        }
    }
}

impl Iterator for GrowthStrings {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.a.clone();
        let k = self.a.len();
        // advance: rightmost position that can still grow
        let mut i = k;
        loop {
            if i <= 1 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.a[i] <= self.maxes[i - 1] {
                self.a[i] += 1;
                self.maxes[i] = self.maxes[i - 1].max(self.a[i]);
                for j in i + 1..k {
                    self.a[j] = 0;
                    self.maxes[j] = self.maxes[i];
                }
                break;
            }
        }
        Some(out)
    }
}

fn check_order(k: usize) -> Result<()> {
    if k > MAX_PARTITION_ORDER {
        return Err(Error::KTooLarge {
            k,
            max: MAX_PARTITION_ORDER,
        });
    }
    Ok(())
}

pub fn enumerate_partitions(k: usize) -> Result<Vec<SetPartition>> {
    if k == 0 {
        return Err(Error::invalid("k", "must be at least 1"));
    }
    check_order(k)?;
    Ok(GrowthStrings::new(k)
        .map(|a| SetPartition::from_growth(&a))
        .collect())
}

/// Partition sum `Σ_P Π κ_{|α|}` over partitions of `{1..k}`.
fn partition_sum(kappa: &[f64], k: usize, exclude_full: bool) -> f64 {
    let mut sizes = vec![0usize; k];
    // Neumaier-compensated: B_k terms of mixed sign
    let (mut total, mut carry) = (0.0f64, 0.0f64);
    for a in GrowthStrings::new(k) {
        sizes.iter_mut().for_each(|s| *s = 0);
        for &b in &a {
            sizes[b] += 1;
        }
        let blocks = a.iter().max().unwrap() + 1;
        if exclude_full && blocks == 1 {
            continue;
        }
        let term = sizes[..blocks]
            .iter()
            .map(|&s| kappa[s - 1])
            .product::<f64>();
        let t = total + term;
        carry += if total.abs() >= term.abs() {
            (total - t) + term
        } else {
            (term - t) + total
        };
        total = t;
    }
    total + carry
}

/// Raw moments from cumulants, `κ_1..κ_k ↦ ⟨n⟩..⟨n^k⟩`.
pub fn cumulants_to_moments(kappa: &[f64]) -> Result<Vec<f64>> {
    check_order(kappa.len())?;
    Ok((1..=kappa.len())
        .map(|k| partition_sum(kappa, k, false))
        .collect())
}

/// Inverse of [`cumulants_to_moments`], solved order by order.
pub fn moments_to_cumulants(moments: &[f64]) -> Result<Vec<f64>> {
    check_order(moments.len())?;
    let mut kappa: Vec<f64> = Vec::with_capacity(moments.len());
    for (k, &m) in moments.iter().enumerate() {
        // κ_{k+1} enters only through the single-block partition
        kappa.push(0.0);
        kappa[k] = m - partition_sum(&kappa, k + 1, true);
    }
    Ok(kappa)
}

/// Largest deviation of `moments_to_cumulants(cumulants_to_moments(κ))`
/// from `κ`, each order measured relative to `max(1, |κ_k|, |⟨n^k⟩|)`: the
/// inversion cannot resolve `κ_k` better than the moment it is read from.
pub fn round_trip_deviation(kappa: &[f64]) -> Result<f64> {
    let m = cumulants_to_moments(kappa)?;
    let back = moments_to_cumulants(&m)?;
    Ok(kappa
        .iter()
        .zip(&back)
        .zip(&m)
        .map(|((k, b), m)| (k - b).abs() / 1f64.max(k.abs()).max(m.abs()))
        .fold(0.0, f64::max))
}

/// Bell numbers `B_0..=B_n` from the triangle recurrence.
pub fn bell_numbers(n: usize) -> Vec<u64> {
    let mut bells = vec![1u64];
    let mut row = vec![1u64];
    for _ in 0..n {
        let mut next = vec![*row.last().unwrap()];
        for &x in &row {
            let v = next.last().unwrap() + x;
            next.push(v);
        }
        bells.push(next[0]);
        row = next;
    }
    bells
}
