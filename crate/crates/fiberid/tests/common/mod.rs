//! Shared oracles for the integration suites.

use num_bigint::BigUint;

/// log10 of a positive big integer, from its top bits.
pub fn log10_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    let top = if bits <= 53 {
        x.clone()
    } else {
        x >> (bits - 53)
    };
    let v = top.iter_u64_digits().next().unwrap_or(0);
    let shift = bits.saturating_sub(53);
    (v as f64).log10() + shift as f64 * 2f64.log10()
}

/// Exact binomial tails in integer arithmetic for p = p_num / p_den.
/// Entirely independent of the log-domain implementation under test.
pub struct ExactBinomial {
    n: u64,
    /// Prefix sums of C(n,k) a^k b^(n-k) for k = 0..=t.
    cumulative: Vec<BigUint>,
    log10_denominator: f64,
}

impl ExactBinomial {
    pub fn new(n: u64, p_num: u64, p_den: u64) -> ExactBinomial {
        assert!(p_num > 0 && p_num < p_den);
        let a = BigUint::from(p_num);
        let b = BigUint::from(p_den - p_num);
        let mut term = b.pow(n as u32); // k = 0
        let mut cumulative = Vec::with_capacity(n as usize + 1);
        let mut running = term.clone();
        cumulative.push(running.clone());
        for k in 1..=n {
            // term(k) = term(k-1) * (n-k+1)/k * a/b
            term = term * BigUint::from(n - k + 1) * &a / (BigUint::from(k) * &b);
            running += &term;
            cumulative.push(running.clone());
        }
        ExactBinomial {
            n,
            cumulative,
            log10_denominator: n as f64 * (p_den as f64).log10(),
        }
    }

    /// log10 P(X <= t).
    pub fn lower_log10(&self, t: u64) -> f64 {
        log10_biguint(&self.cumulative[t as usize]) - self.log10_denominator
    }

    /// log10 P(X > t).
    pub fn upper_log10(&self, t: u64) -> f64 {
        let total = &self.cumulative[self.n as usize];
        let upper = total - &self.cumulative[t as usize];
        if upper == BigUint::from(0u32) {
            return f64::NEG_INFINITY;
        }
        log10_biguint(&upper) - self.log10_denominator
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_sanity() {
        let bin = ExactBinomial::new(2, 1, 2);
        // P(Bin(2, 1/2) <= 0) = 1/4, P(> 0) = 3/4.
        assert!((bin.lower_log10(0) - 0.25f64.log10()).abs() < 1e-12);
        assert!((bin.upper_log10(0) - 0.75f64.log10()).abs() < 1e-12);
        // Full lower tail is 1, empty upper tail is 0.
        assert!(bin.lower_log10(2).abs() < 1e-12);
        assert_eq!(bin.upper_log10(2), f64::NEG_INFINITY);
    }
}
