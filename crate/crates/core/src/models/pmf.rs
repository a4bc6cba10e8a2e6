//! Probability mass functions on small integer supports.

/// `C(n, k) p^k (1-p)^(n-k)`, with `0^0 = 1` so degenerate `p` are exact.
pub fn binomial(n: u32, k: u32, p: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    choose(n, k) * libm::pow(p, k as f64) * libm::pow(1.0 - p, (n - k) as f64)
}

pub fn choose(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    libm::round(c)
}

/// `e^-lambda lambda^k / k!`, computed in log space.
pub fn poisson(k: u32, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let kf = k as f64;
    libm::exp(kf * libm::log(lambda) - lambda - libm::lgamma(kf + 1.0))
}

/// `P(Poisson(lambda) > k)`, summed upward from `k + 1` so small tails keep
/// their relative precision.
pub fn poisson_upper_tail(k: u32, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    if (k as f64) < lambda {
        let below: f64 = (0..=k).map(|i| poisson(i, lambda)).sum();
        return (1.0 - below).max(0.0);
    }
    let mut term = poisson(k + 1, lambda);
    let mut total = 0.0;
    let mut i = k + 1;
    while term > 0.0 && term > total * 1e-17 {
        total += term;
        i += 1;
        term *= lambda / i as f64;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_sums_and_degenerate() {
        for n in 0..8 {
            for p in [0.0, 0.3, 1.0] {
                let s: f64 = (0..=n).map(|k| binomial(n, k, p)).sum();
                assert!((s - 1.0).abs() < 1e-14);
            }
        }
        assert_eq!(binomial(4, 0, 0.5), 0.0625);
        assert_eq!(binomial(4, 4, 1.0), 1.0);
        assert_eq!(choose(10, 3), 120.0);
    }

    #[test]
    fn poisson_tail_matches_complement() {
        let lambda = 3.5;
        for k in 0..20 {
            let below: f64 = (0..=k).map(|i| poisson(i, lambda)).sum();
            assert!((poisson_upper_tail(k, lambda) - (1.0 - below)).abs() < 1e-14);
        }
        assert!((poisson(2, 2.0) - 2.0 * (-2.0f64).exp()).abs() < 1e-15);
    }
}
