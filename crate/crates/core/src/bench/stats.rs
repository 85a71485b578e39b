//! Normal-approximation confidence checks for success rates.

/// One-sided 95% standard-normal quantile.
pub const Z95: f64 = 1.644_853_626_951_472_2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Comparison {
    /// Estimated `rate(a) - rate(b)`.
    pub difference: f64,
    pub standard_error: f64,
}

impl Comparison {
    /// Lower end of the one-sided 95% interval on the difference.
    pub fn lower_bound(&self) -> f64 {
        self.difference - Z95 * self.standard_error
    }

    /// `a` beats `b` at one-sided 95% confidence.
    pub fn significant(&self) -> bool {
        self.lower_bound() > 0.0
    }
}

/// Paired comparison of two outcome vectors on the same cases.
pub fn paired(a: &[bool], b: &[bool]) -> Comparison {
    assert_eq!(a.len(), b.len(), "paired outcomes need equal lengths");
    let n = a.len() as f64;
    if a.is_empty() {
        return Comparison {
            difference: 0.0,
            standard_error: 0.0,
        };
    }
    let d: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(u8::from(x)) - f64::from(u8::from(y)))
        .collect();
    let mean = d.iter().sum::<f64>() / n;
    let var = if a.len() > 1 {
        d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Comparison {
        difference: mean,
        standard_error: (var / n).sqrt(),
    }
}

/// Two independent samples of successes.
pub fn two_proportion(a: &[bool], b: &[bool]) -> Comparison {
    let rate = |v: &[bool]| v.iter().filter(|&&x| x).count() as f64 / v.len().max(1) as f64;
    let (pa, pb) = (rate(a), rate(b));
    let se = (pa * (1.0 - pa) / a.len().max(1) as f64 + pb * (1.0 - pb) / b.len().max(1) as f64).sqrt();
    Comparison {
        difference: pa - pb,
        standard_error: se,
    }
}
