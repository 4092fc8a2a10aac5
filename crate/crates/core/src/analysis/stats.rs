//! Paired t-test, one-sample KS normality test, Pearson and Spearman correlation.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TestId {
    PairedT,
    KsNormal,
    Pearson,
    Spearman,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub test_id: TestId,
}

impl StatResult {
    pub fn significant(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with n - 1 denominator.
fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

fn check_finite(x: &[f64], what: &str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(invalid(format!("{what} contains non-finite values")))
    }
}

/// Two-sided p-value of a Student t statistic.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.cdf(-t.abs())).clamp(0.0, 1.0)
}

/// Paired-samples t-test on `a - b`, two-sided.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<StatResult> {
    if a.len() != b.len() {
        return Err(invalid(format!("paired samples differ in length: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(invalid("paired t-test needs at least two pairs"));
    }
    check_finite(a, "first sample")?;
    check_finite(b, "second sample")?;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len();
    let m = mean(&d);
    let sd = variance(&d).sqrt();
    let t = if sd == 0.0 {
        if m == 0.0 {
            0.0
        } else {
            m.signum() * f64::INFINITY
        }
    } else {
        m / (sd / (n as f64).sqrt())
    };
    Ok(StatResult {
        statistic: t,
        p_value: t_two_sided_p(t, (n - 1) as f64),
        n,
        test_id: TestId::PairedT,
    })
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        // Jacobi-transformed series converges fast for small arguments
        let q = (-std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda)).exp();
        let mut s = 0.0;
        for k in 0..20 {
            let j = (2 * k + 1) as f64;
            s += q.powf(j * j);
        }
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * s;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov test against a normal with the sample mean and
/// standard deviation. The p-value is the plain asymptotic one, `Q(sqrt(n) D)`,
/// without a correction for the estimated parameters.
pub fn ks_normality(x: &[f64]) -> Result<StatResult> {
    if x.len() < 4 {
        return Err(invalid("KS normality test needs at least four values"));
    }
    check_finite(x, "sample")?;
    let sd = variance(x).sqrt();
    if sd == 0.0 {
        return Err(invalid("KS normality test on a constant sample"));
    }
    let normal = Normal::new(mean(x), sd).expect("positive sd");
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let f = normal.cdf(*v);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    Ok(StatResult {
        statistic: d,
        p_value: kolmogorov_sf(n.sqrt() * d),
        n: sorted.len(),
        test_id: TestId::KsNormal,
    })
}

fn correlation_p(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    if r.abs() >= 1.0 {
        return 0.0;
    }
    t_two_sided_p(r * (df / (1.0 - r * r)).sqrt(), df)
}

fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(invalid("correlation with a zero-variance variable"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn check_pairs(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(invalid(format!("correlated samples differ in length: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(invalid("correlation needs at least three pairs"));
    }
    check_finite(x, "x")?;
    check_finite(y, "y")
}

/// Pearson correlation with a two-sided p from `t = r sqrt((n-2)/(1-r^2))`.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<StatResult> {
    check_pairs(x, y)?;
    let r = pearson_r(x, y)?;
    Ok(StatResult {
        statistic: r,
        p_value: correlation_p(r, x.len()),
        n: x.len(),
        test_id: TestId::Pearson,
    })
}

/// 1-based ranks; tied values share the average of their ranks.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman correlation: Pearson on average ranks, same p approximation.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<StatResult> {
    check_pairs(x, y)?;
    let r = pearson_r(&average_ranks(x), &average_ranks(y))?;
    Ok(StatResult {
        statistic: r,
        p_value: correlation_p(r, x.len()),
        n: x.len(),
        test_id: TestId::Spearman,
    })
}
