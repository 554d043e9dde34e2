//! Composite Simpson rule with a fixed summation order.

use crate::{Error, Result};

/// Node `i` of an `n`-point uniform grid on `[lo, hi]`.
pub fn node(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
    if i + 1 == n {
        hi
    } else {
        lo + (hi - lo) * (i as f64) / ((n - 1) as f64)
    }
}

/// Weight of node `i` in the `n`-point composite Simpson rule on `[lo, hi]`.
pub fn weight(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
    let h = (hi - lo) / ((n - 1) as f64);
    let k = if i == 0 || i + 1 == n {
        1.0
    } else if i % 2 == 1 {
        4.0
    } else {
        2.0
    };
    k * h / 3.0
}

pub fn check_nodes(n: usize) -> Result<()> {
    if n < 3 || n.is_multiple_of(2) {
        return Err(Error::Arg("Simpson node count must be odd and >= 3"));
    }
    Ok(())
}

/// `int_lo^hi f` with `n` nodes (odd, >= 3), summed left to right.
pub fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> Result<f64> {
    check_nodes(n)?;
    let mut sum = 0.0;
    for i in 0..n {
        sum += weight(lo, hi, n, i) * f(node(lo, hi, n, i));
    }
    Ok(sum)
}

/// Like [`simpson`] but the integrand may fail; the first error aborts.
pub fn try_simpson(f: impl Fn(f64) -> Result<f64>, lo: f64, hi: f64, n: usize) -> Result<f64> {
    check_nodes(n)?;
    let mut sum = 0.0;
    for i in 0..n {
        sum += weight(lo, hi, n, i) * f(node(lo, hi, n, i))?;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_cubics() {
        let v = simpson(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 3).unwrap();
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn converges_on_exponential() {
        let exact = 1.0 - libm::exp(-1.0);
        let v = simpson(|x| libm::exp(-x), 0.0, 1.0, 101).unwrap();
        assert!((v - exact).abs() < 1e-10);
    }

    #[test]
    fn weights_sum_to_width() {
        let s: f64 = (0..11).map(|i| weight(0.2, 0.9, 11, i)).sum();
        assert!((s - 0.7).abs() < 1e-15);
        assert_eq!(node(0.2, 0.9, 11, 10), 0.9);
    }

    #[test]
    fn rejects_even_counts() {
        assert!(simpson(|x| x, 0.0, 1.0, 10).is_err());
        assert!(simpson(|x| x, 0.0, 1.0, 1).is_err());
    }
}
