use crate::error::{Error, Result};

const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_TERMS: usize = 10_000;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn regularized_gamma_p(a: f64, x: f64) -> f64 {
    assert!(a > 0.0, "shape must be positive");
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    let log_prefix = -x + a * x.ln() - libm::lgamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut term = 1.0 / a;
        let mut sum = term;
        for _ in 0..MAX_TERMS {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                break;
            }
        }
        (sum.ln() + log_prefix).exp().min(1.0)
    } else {
        // Modified Lentz on the continued fraction for Q(a, x).
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_TERMS {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < EPS {
                break;
            }
        }
        (1.0 - (h.ln() + log_prefix).exp()).max(0.0)
    }
}

/// CDF of `χ²_k` at `q`.
pub fn chi2_cdf(k: usize, q: f64) -> f64 {
    regularized_gamma_p(k as f64 / 2.0, q / 2.0)
}

fn chi2_log_density(k: f64, q: f64) -> f64 {
    let h = k / 2.0;
    (h - 1.0) * q.ln() - q / 2.0 - h * std::f64::consts::LN_2 - libm::lgamma(h)
}

/// The `p`-quantile of `χ²_k`, by Newton steps safeguarded with bisection.
pub fn chi2_quantile(k: usize, p: f64) -> Result<f64> {
    if k < 1 {
        return Err(Error::InvalidArgument(
            "degrees of freedom must be >= 1".into(),
        ));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "probability must be in (0,1), got {p}"
        )));
    }
    let kf = k as f64;
    let mut lo = 0.0;
    let mut hi = kf.max(1.0);
    while chi2_cdf(k, hi) < p {
        lo = hi;
        hi *= 2.0;
    }
    let mut q = 0.5 * (lo + hi);
    for _ in 0..500 {
        let f = chi2_cdf(k, q) - p;
        if f == 0.0 {
            return Ok(q);
        }
        if f < 0.0 {
            lo = q;
        } else {
            hi = q;
        }
        let newton = q - f / chi2_log_density(kf, q).exp();
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - q).abs() <= 4.0 * f64::EPSILON * q || hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(next);
        }
        q = next;
    }
    Err(Error::NoConvergence(format!("chi2 quantile k={k}, p={p}")))
}

/// Survival function of the Kolmogorov distribution, `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.0 {
        // Small-x series for the CDF.
        let pi2 = std::f64::consts::PI.powi(2);
        let mut cdf = 0.0;
        for j in 1..=50 {
            let m = (2 * j - 1) as f64;
            cdf += (-m * m * pi2 / (8.0 * x * x)).exp();
        }
        cdf *= (2.0 * std::f64::consts::PI).sqrt() / x;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sf = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * x * x).exp();
        sf += if j % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sf).clamp(0.0, 1.0)
}
