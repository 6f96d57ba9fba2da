use super::EvalError;

/// Largest integer below which every `u64` converts to `f64` exactly.
const EXACT_F64_INT: u128 = 1 << 53;

/// Unbiased pass@k estimate `1 - C(n-c, k) / C(n, k)` from `n` samples of
/// which `c` are correct.
///
/// While `C(n, k)` fits in 53 bits the ratio is formed from exact integer
/// binomials and divided once, which gives the correctly rounded result.
/// Larger cases use the product form `1 - prod_{i=n-c+1}^{n} (1 - k/i)`.
pub fn pass_at_k(n: u64, c: u64, k: u64) -> Result<f64, EvalError> {
    validate(n, c, k)?;
    if n - c < k {
        return Ok(1.0);
    }
    if let Some(total) = binomial_below(n, k, EXACT_F64_INT) {
        let misses = binomial_below(n - c, k, EXACT_F64_INT).expect("C(n-c,k) <= C(n,k)");
        return Ok((total - misses) as f64 / total as f64);
    }
    Ok(product_form(n, c, k))
}

/// The product form on its own, for any size.
pub fn pass_at_k_product(n: u64, c: u64, k: u64) -> Result<f64, EvalError> {
    validate(n, c, k)?;
    if n - c < k {
        return Ok(1.0);
    }
    Ok(product_form(n, c, k))
}

fn validate(n: u64, c: u64, k: u64) -> Result<(), EvalError> {
    if n == 0 {
        return Err(EvalError::Argument("n must be at least 1".into()));
    }
    if c > n {
        return Err(EvalError::Argument(format!("c = {c} exceeds n = {n}")));
    }
    if k == 0 || k > n {
        return Err(EvalError::Argument(format!("k = {k} must be in 1..={n}")));
    }
    Ok(())
}

fn product_form(n: u64, c: u64, k: u64) -> f64 {
    let kf = k as f64;
    let prod: f64 = (n - c + 1..=n).map(|i| 1.0 - kf / i as f64).product();
    1.0 - prod
}

/// `C(n, k)` if it is below `limit`.
fn binomial_below(n: u64, k: u64, limit: u128) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=u128::from(k) {
        // acc * (n - k + i) / i stays integral at every step.
        acc = acc.checked_mul(u128::from(n - k) + i)? / i;
        if acc >= limit {
            return None;
        }
    }
    Some(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(pass_at_k(5, 5, 1).unwrap(), 1.0);
        assert_eq!(pass_at_k(5, 0, 3).unwrap(), 0.0);
        // 1 - C(7,5)/C(10,5) = 1 - 21/252
        assert_eq!(pass_at_k(10, 3, 5).unwrap(), 1.0 - 21.0 / 252.0);
        assert!((pass_at_k(10, 3, 5).unwrap() - 11.0 / 12.0).abs() < 1e-15);
        assert_eq!(pass_at_k(5, 1, 1).unwrap(), 0.2);
    }

    #[test]
    fn argument_errors() {
        assert!(pass_at_k(5, 1, 0).is_err());
        assert!(pass_at_k(5, 1, 6).is_err());
        assert!(pass_at_k(5, 6, 1).is_err());
        assert!(pass_at_k(0, 0, 1).is_err());
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial_below(10, 5, u128::MAX), Some(252));
        assert_eq!(binomial_below(7, 0, u128::MAX), Some(1));
        assert_eq!(binomial_below(60, 30, EXACT_F64_INT), None);
    }

    #[test]
    fn product_form_agrees_for_large_n() {
        for &(n, c, k) in &[(200u64, 17u64, 5u64), (1000, 3, 10), (80, 40, 40)] {
            let a = pass_at_k(n, c, k).unwrap();
            let b = pass_at_k_product(n, c, k).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.max(1e-300), "{n} {c} {k}");
        }
    }

    #[test]
    fn monotone_in_c_and_k() {
        for n in 1..=20u64 {
            for k in 1..=n {
                let mut prev = -1.0;
                for c in 0..=n {
                    let v = pass_at_k(n, c, k).unwrap();
                    assert!(v >= prev && (0.0..=1.0).contains(&v));
                    prev = v;
                }
            }
            for c in 0..=n {
                let mut prev = -1.0;
                for k in 1..=n {
                    let v = pass_at_k(n, c, k).unwrap();
                    assert!(v >= prev);
                    prev = v;
                }
                assert_eq!(pass_at_k(n, c, n).unwrap() == 1.0, c >= 1);
            }
        }
    }
}
