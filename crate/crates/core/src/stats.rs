//! Small statistical toolkit: Wilson intervals, Kolmogorov-Smirnov and
//! chi-square independence tests, and the Laplace law.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::Precondition(
            "Wilson interval needs at least one trial".into(),
        ));
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        (center + half).min(1.0)
    };
    Ok((lo, hi))
}

/// Standard deviation of a binomial proportion.
pub fn binomial_sigma(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// CDF of the zero-centred Laplace law with the given scale.
pub fn laplace_cdf(x: f64, scale: f64) -> f64 {
    if x < 0.0 {
        0.5 * (x / scale).exp()
    } else {
        1.0 - 0.5 * (-x / scale).exp()
    }
}

/// Survival function of the Kolmogorov distribution,
/// `Q(l) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 l^2)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample KS test of `data` against a continuous CDF.
pub fn ks_test<F: Fn(f64) -> f64>(data: &[f64], cdf: F) -> Result<KsResult> {
    if data.is_empty() {
        return Err(Error::Precondition("KS test needs data".into()));
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let d = sorted.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    });
    let en = n.sqrt();
    let p_value = kolmogorov_survival((en + 0.12 + 0.11 / en) * d);
    Ok(KsResult {
        statistic: d,
        p_value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
}

/// Pearson chi-square test of independence on a contingency table. Empty
/// rows and columns are dropped before computing degrees of freedom.
pub fn chi_square_independence(table: &[Vec<u64>]) -> Result<ChiSquareResult> {
    let cols = table.first().map(Vec::len).unwrap_or(0);
    if table.iter().any(|r| r.len() != cols) {
        return Err(Error::Precondition("ragged contingency table".into()));
    }
    let row_tot: Vec<u64> = table.iter().map(|r| r.iter().sum()).collect();
    let col_tot: Vec<u64> = (0..cols)
        .map(|j| table.iter().map(|r| r[j]).sum())
        .collect();
    let total: u64 = row_tot.iter().sum();
    let rows_used = row_tot.iter().filter(|&&t| t > 0).count();
    let cols_used = col_tot.iter().filter(|&&t| t > 0).count();
    if total == 0 || rows_used < 2 || cols_used < 2 {
        return Err(Error::Precondition(
            "contingency table needs two non-empty rows and columns".into(),
        ));
    }
    let mut stat = 0.0;
    for (i, r) in table.iter().enumerate() {
        for (j, &obs) in r.iter().enumerate() {
            if row_tot[i] == 0 || col_tot[j] == 0 {
                continue;
            }
            let expected = row_tot[i] as f64 * col_tot[j] as f64 / total as f64;
            stat += (obs as f64 - expected).powi(2) / expected;
        }
    }
    let dof = ((rows_used - 1) * (cols_used - 1)) as f64;
    let dist = ChiSquared::new(dof).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(ChiSquareResult {
        statistic: stat,
        dof,
        p_value: 1.0 - dist.cdf(stat),
    })
}
