//! Coefficients `a_{n,k}` of the symmetric random walk's omega-invariant
//! `I_n = 1 + sum_{k=0}^{n} [x > k] * a_{n,k}`.

use std::cell::RefCell;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::kernel::Rational;

thread_local! {
    static ROWS: RefCell<Vec<Vec<Rational>>> = RefCell::new(vec![vec![Rational::one()]]);
}

fn extend_to(rows: &mut Vec<Vec<Rational>>, n: usize) {
    let two = Rational::from_integer(BigInt::from(2));
    let half = Rational::new(BigInt::one(), BigInt::from(2));
    while rows.len() <= n {
        let prev = rows.last().unwrap();
        let m = prev.len(); // prev is row m-1 with entries k = 0..m-1
        let at = |k: usize| prev.get(k).cloned().unwrap_or_else(Rational::zero);
        let mut row = Vec::with_capacity(m + 1);
        row.push(&two + &half * (at(0) + at(1)));
        for k in 1..=m {
            row.push(&half * (at(k - 1) + at(k + 1)));
        }
        rows.push(row);
    }
}

/// `a_{n,k}`, zero for `k > n`.
pub fn rw_coefficient(n: usize, k: usize) -> Rational {
    if k > n {
        return Rational::zero();
    }
    ROWS.with(|r| {
        let mut rows = r.borrow_mut();
        extend_to(&mut rows, n);
        rows[n][k].clone()
    })
}

/// Rows `0..=n_max`; row `n` holds `a_{n,0..=n}`.
pub fn rw_coefficients(n_max: usize) -> Vec<Vec<Rational>> {
    ROWS.with(|r| {
        let mut rows = r.borrow_mut();
        extend_to(&mut rows, n_max);
        rows[..=n_max].to_vec()
    })
}

fn binom(n: i64, m: i64) -> BigInt {
    if m < 0 || m > n {
        return BigInt::zero();
    }
    let m = m.min(n - m);
    let mut acc = BigInt::one();
    for i in 0..m {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// `a_{n,k}` from the binomial closed form
/// `2^-n [-C(n, (n-k) div 2) + 2 sum_{i=0}^{n-k} 2^i C(n-i, (n-i-k) div 2)]`.
pub fn rw_closed_form(n: usize, k: usize) -> Rational {
    if k > n {
        return Rational::zero();
    }
    let (n, k) = (n as i64, k as i64);
    let mut acc = -binom(n, (n - k).div_euclid(2));
    for i in 0..=(n - k) {
        acc += BigInt::from(2) * (BigInt::one() << i as usize) * binom(n - i, (n - i - k).div_euclid(2));
    }
    Rational::new(acc, BigInt::one() << n as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::rat;

    #[test]
    fn closed_form_matches_recurrence() {
        for n in 0..=20 {
            for k in 0..=n {
                assert_eq!(rw_coefficient(n, k), rw_closed_form(n, k), "a({n},{k})");
            }
        }
    }

    #[test]
    fn harmonic_lower_bound() {
        let mut h = Rational::zero();
        let mut upto = 0;
        for n in 2..=40usize {
            while upto < n / 2 {
                upto += 1;
                h += Rational::new(BigInt::one(), BigInt::from(upto));
            }
            assert!(rw_coefficient(n, 0) >= Rational::one() + &h, "n = {n}");
        }
    }

    #[test]
    fn first_rows() {
        assert_eq!(rw_coefficient(0, 0), rat(1, 1));
        assert_eq!(rw_coefficient(1, 0), rat(5, 2));
        assert_eq!(rw_coefficient(1, 1), rat(1, 2));
        assert_eq!(rw_coefficient(1, 2), rat(0, 1));
        let t = rw_coefficients(3);
        assert_eq!(t.len(), 4);
        assert_eq!(t[3].len(), 4);
    }
}
