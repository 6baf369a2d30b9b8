//! The few statistics the analysis needs.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{domain, Result};

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
pub fn std_dev(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)).sqrt()
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(domain("pearson needs two equal-length samples of size >= 2"));
    }
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(domain("pearson is undefined for a constant sample"));
    }
    Ok(sab / (saa * sbb).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub stat: f64,
    pub p: f64,
    pub mean_difference: f64,
}

/// Two-sided paired t-test of `mean(a - b) = 0`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(domain("paired t-test needs two equal-length samples of size >= 2"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let md = mean(&d);
    let sd = std_dev(&d);
    if sd == 0.0 {
        let p = if md == 0.0 { 1.0 } else { 0.0 };
        return Ok(TTest { stat: if md == 0.0 { 0.0 } else { f64::INFINITY.copysign(md) }, p, mean_difference: md });
    }
    let stat = md / (sd / n.sqrt());
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).map_err(|e| domain(e.to_string()))?;
    let p = 2.0 * (1.0 - dist.cdf(stat.abs()));
    Ok(TTest { stat, p, mean_difference: md })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsTest {
    pub d: f64,
    pub p: f64,
}

/// Kolmogorov survival function `Q(λ) = 2 Σ (-1)^(k-1) exp(-2 k² λ²)`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = (-2.0 * (k as f64).powi(2) * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value and the
/// usual small-sample correction to the effective size.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsTest> {
    if a.is_empty() || b.is_empty() {
        return Err(domain("KS test needs two non-empty samples"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0_f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = (na * nb / (na + nb)).sqrt();
    let p = kolmogorov_q((ne + 0.12 + 0.11 / ne) * d);
    Ok(KsTest { d, p })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_examples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson(&a, &[2.0, 4.0, 6.0, 8.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&a, &[8.0, 6.0, 4.0, 2.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!(pearson(&a, &[1.0; 4]).is_err());
    }

    #[test]
    fn t_test_reference() {
        // differences 1, 2, 3, 4, 5, 6: mean 3.5, sd 1.8708, t = 4.5826, df 5
        let a = [2.0, 4.0, 6.0, 8.0, 10.0, 12.0];
        let b = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let t = paired_t_test(&a, &b).unwrap();
        assert!((t.stat - 4.582_575_694_955_84).abs() < 1e-9);
        // two-sided p from the t distribution with 5 degrees of freedom
        assert!((t.p - 0.005_934).abs() < 5e-5, "{}", t.p);
        let same = paired_t_test(&a, &a).unwrap();
        assert_eq!(same.p, 1.0);
    }

    #[test]
    fn ks_examples() {
        let a: Vec<f64> = (0..100).map(f64::from).collect();
        let same = ks_two_sample(&a, &a).unwrap();
        assert_eq!(same.d, 0.0);
        assert_eq!(same.p, 1.0);
        let shifted: Vec<f64> = a.iter().map(|v| v + 50.0).collect();
        let far = ks_two_sample(&a, &shifted).unwrap();
        assert!((far.d - 0.5).abs() < 1e-12);
        assert!(far.p < 1e-8);
        // Q(1) = 0.26999967...
        assert!((kolmogorov_q(1.0) - 0.269_999_67).abs() < 1e-7);
    }
}
