use super::norms::{ExhaustionNorm, SingularSet};

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical inverse of `i` in `base`.
pub fn halton(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

/// Deterministic low-discrepancy points in `[0, 1)ⁿ`, starting after `skip` terms.
#[derive(Debug, Clone)]
pub struct HaltonSequence {
    dim: usize,
    next: u64,
}

impl HaltonSequence {
    pub fn new(dim: usize, skip: u64) -> Self {
        assert!(
            dim <= PRIMES.len(),
            "Halton sequence supports up to {} dimensions",
            PRIMES.len()
        );
        Self { dim, next: skip + 1 }
    }

    pub fn next_into(&mut self, out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate().take(self.dim) {
            *o = halton(self.next, PRIMES[k]);
        }
        self.next += 1;
    }
}

/// Points with `r_lo < N ≤ r_hi` (or `N ≤ r_hi` when `r_lo = 0`), by rejection from the
/// bounding box of `{N ≤ r_hi}`. Points within `exclude` of the singular set are dropped.
pub fn shell_samples(
    norm: &ExhaustionNorm,
    r_lo: f64,
    r_hi: f64,
    count: usize,
    skip: u64,
    exclude: f64,
) -> Vec<Vec<f64>> {
    let n = norm.dim();
    let bbox = norm.bounding_box(r_hi);
    let mut seq = HaltonSequence::new(n, skip);
    let mut u = vec![0.0; n];
    let mut out = Vec::with_capacity(count);
    let max_draws = 1000 * count.max(1);
    let mut draws = 0;
    while out.len() < count && draws < max_draws {
        draws += 1;
        seq.next_into(&mut u);
        let x: Vec<f64> = u.iter().zip(&bbox).map(|(v, b)| (2.0 * v - 1.0) * b).collect();
        if norm.singular() != SingularSet::None && norm.singular().contains(&x, exclude) {
            continue;
        }
        let Ok(v) = norm.value(&x) else { continue };
        if v <= r_hi && (v > r_lo || (r_lo == 0.0 && v >= 0.0)) {
            out.push(x);
        }
    }
    out
}

/// `per_shell` points in each dyadic shell `(2^k r_lo, 2^{k+1} r_lo]` up to `r_hi`.
pub fn dyadic_samples(norm: &ExhaustionNorm, r_lo: f64, r_hi: f64, per_shell: usize, skip: u64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut a = r_lo;
    let mut k = 0u64;
    while a < r_hi {
        let b = (2.0 * a).min(r_hi);
        out.extend(shell_samples(norm, a, b, per_shell, skip + k * 7919, 0.0));
        a = b;
        k += 1;
    }
    out
}
