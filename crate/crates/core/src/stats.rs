//! Paired t-test and continuity-corrected McNemar test.

use serde::{Deserialize, Serialize};
use statrs::function::{beta::beta_reg, erf::erfc};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatResult {
    pub test: String,
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
    /// Zero-variance differences with a non-zero mean: t is infinite.
    #[serde(default)]
    pub degenerate: bool,
}

/// Two-sided tail probability of Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    beta_reg(0.5 * df, 0.5, x).clamp(0.0, 1.0)
}

/// Upper tail of χ² with one degree of freedom.
pub fn chi2_df1_upper(chi2: f64) -> f64 {
    erfc((0.5 * chi2).sqrt()).clamp(0.0, 1.0)
}

/// Paired t-test on `x − y`.
pub fn paired_t(x: &[f64], y: &[f64]) -> Result<StatResult> {
    if x.len() != y.len() {
        return Err(Error::UndefinedTest(format!(
            "paired samples differ in length ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::UndefinedTest("paired t-test needs n >= 2".into()));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let sd = var.sqrt();
    let df = nf - 1.0;
    let (statistic, p_value, degenerate) = if sd == 0.0 {
        if mean == 0.0 {
            (0.0, 1.0, false)
        } else {
            (mean.signum() * f64::INFINITY, 0.0, true)
        }
    } else {
        let t = mean / (sd / nf.sqrt());
        (t, student_t_two_sided(t, df), false)
    };
    Ok(StatResult {
        test: "paired_t".into(),
        statistic,
        df,
        p_value,
        degenerate,
    })
}

/// McNemar χ² with continuity correction on the discordant counts `b`, `c`.
pub fn mcnemar(b: u64, c: u64) -> Result<StatResult> {
    let total = b + c;
    if total == 0 {
        return Err(Error::UndefinedTest("McNemar test with no discordant pairs".into()));
    }
    let diff = (b as f64 - c as f64).abs();
    let chi2 = (diff - 1.0).max(0.0).powi(2) / total as f64;
    Ok(StatResult {
        test: "mcnemar".into(),
        statistic: chi2,
        df: 1.0,
        p_value: chi2_df1_upper(chi2),
        degenerate: false,
    })
}

/// Discordant counts for paired binary outcomes: `b` = x true & y false,
/// `c` = x false & y true.
pub fn discordant_counts(x: &[bool], y: &[bool]) -> (u64, u64) {
    x.iter().zip(y).fold((0, 0), |(b, c), (&p, &q)| match (p, q) {
        (true, false) => (b + 1, c),
        (false, true) => (b, c + 1),
        _ => (b, c),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn zero_mean_differences() {
        let r = paired_t(&[1.0, -1.0, 1.0, -1.0], &[0.0; 4]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_abs_diff_eq!(r.p_value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_cases() {
        let r = paired_t(&[2.0; 5], &[1.0; 5]).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.p_value, 0.0);
        let r = paired_t(&[1.0; 5], &[1.0; 5]).unwrap();
        assert!(!r.degenerate);
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
        assert!(paired_t(&[1.0], &[0.0]).is_err());
        assert!(paired_t(&[1.0, 2.0], &[0.0]).is_err());
    }

    #[test]
    fn one_to_four() {
        let r = paired_t(&[1.0, 2.0, 3.0, 4.0], &[0.0; 4]).unwrap();
        assert_abs_diff_eq!(r.statistic, 3.872_983_346, epsilon = 1e-6);
        assert_eq!(r.df, 3.0);
        assert_abs_diff_eq!(r.p_value, 0.0305, epsilon = 1e-4);
    }

    #[test]
    fn mcnemar_published_values() {
        for (b, chi2, p) in [(9, 7.111, 0.007661), (7, 5.143, 0.02334), (2, 0.5, 0.4795), (5, 3.2, 0.073638)] {
            let r = mcnemar(b, 0).unwrap();
            assert_abs_diff_eq!(r.statistic, chi2, epsilon = 1e-3);
            assert_abs_diff_eq!(r.p_value, p, epsilon = 1e-4);
        }
        let r = mcnemar(4, 4).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
        assert!(mcnemar(0, 0).is_err());
    }

    #[test]
    fn discordance() {
        let x = [true, true, false, false, true];
        let y = [false, true, true, false, false];
        assert_eq!(discordant_counts(&x, &y), (2, 1));
    }

    proptest! {
        #[test]
        fn mcnemar_symmetric(b in 0u64..50, c in 0u64..50) {
            prop_assume!(b + c > 0);
            prop_assert_eq!(mcnemar(b, c).unwrap(), mcnemar(c, b).unwrap());
        }

        #[test]
        fn t_antisymmetric_and_shift_invariant(
            pairs in proptest::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 2..30),
            shift in -100.0..100.0f64,
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let xy = paired_t(&x, &y).unwrap();
            let yx = paired_t(&y, &x).unwrap();
            prop_assert!((xy.statistic + yx.statistic).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&xy.p_value));
            let xs: Vec<f64> = x.iter().map(|v| v + shift).collect();
            let ys: Vec<f64> = y.iter().map(|v| v + shift).collect();
            let shifted = paired_t(&xs, &ys).unwrap();
            prop_assert!((shifted.statistic - xy.statistic).abs() < 1e-6 * (1.0 + xy.statistic.abs()));
        }
    }
}
