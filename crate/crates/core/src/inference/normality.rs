use serde::{Deserialize, Serialize};

use super::special::normal_cdf;
use crate::error::{Error, Result};

pub const MIN_NORMALITY_SAMPLES: usize = 20;

/// Kolmogorov–Smirnov distance to the fitted normal and its p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalityTest {
    pub statistic: f64,
    pub p_value: f64,
}

/// Lilliefors test: KS statistic against `N(x̄, s²)` with both moments fitted
/// from the sample.
///
/// The p-value uses the Dallal–Wilkinson tail approximation, with the
/// Stephens-style polynomial in the modified statistic above `p = 0.1`.
pub fn normality_test(samples: &[f64]) -> Result<NormalityTest> {
    let n = samples.len();
    if n < MIN_NORMALITY_SAMPLES {
        return Err(Error::NotEnoughData(format!(
            "normality test needs at least {MIN_NORMALITY_SAMPLES} samples, got {n}"
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("samples must be finite".into()));
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return Err(Error::InvalidArgument("samples have zero variance".into()));
    }
    let mut z: Vec<f64> = samples.iter().map(|x| (x - mean) / sd).collect();
    z.sort_by(f64::total_cmp);
    let mut d = 0.0_f64;
    for (i, &zi) in z.iter().enumerate() {
        let f = normal_cdf(zi);
        d = d.max((i + 1) as f64 / nf - f).max(f - i as f64 / nf);
    }
    Ok(NormalityTest {
        statistic: d,
        p_value: lilliefors_p_value(d, n),
    })
}

/// Approximate null tail probability of the Lilliefors statistic.
pub fn lilliefors_p_value(d: f64, n: usize) -> f64 {
    let nf = n as f64;
    let (kd, nd) = if n > 100 {
        (d * (nf / 100.0).powf(0.49), 100.0)
    } else {
        (d, nf)
    };
    let p = (-7.01256 * kd * kd * (nd + 2.78019) + 2.99587 * kd * (nd + 2.78019).sqrt() - 0.122119
        + 0.974598 / nd.sqrt()
        + 1.67997 / nd)
        .exp();
    if p <= 0.1 {
        return p.clamp(0.0, 1.0);
    }
    let kk = (nf.sqrt() - 0.01 + 0.85 / nf.sqrt()) * d;
    let p = if kk <= 0.302 {
        1.0
    } else if kk <= 0.5 {
        2.76773 - 19.828315 * kk + 80.709644 * kk.powi(2) - 138.55152 * kk.powi(3)
            + 81.218052 * kk.powi(4)
    } else if kk <= 0.9 {
        -4.901232 + 40.662806 * kk - 97.490286 * kk.powi(2) + 94.029866 * kk.powi(3)
            - 32.355711 * kk.powi(4)
    } else if kk <= 1.31 {
        6.198765 - 19.45867 * kk + 23.533567 * kk.powi(2) - 12.41416 * kk.powi(3)
            + 2.372886 * kk.powi(4)
    } else {
        1.0
    };
    p.clamp(0.0, 1.0)
}
