//! Small numeric helpers shared across the crate.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal as StatrsNormal};

use crate::error::{Error, Result};

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// A univariate Gaussian given by mean and variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub mean: f64,
    pub var: f64,
}

impl Gaussian {
    pub fn new(mean: f64, var: f64) -> Self {
        Self { mean, var }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        normal_ln_pdf(x, self.mean, self.var)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.mean + self.var.sqrt() * z
    }
}

pub fn normal_ln_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln()) - 0.5 * d * d / var
}

pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Draws a precision `1/σ²` from Gamma(shape, rate) and returns the variance.
pub fn inverse_gamma_variance<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> Result<f64> {
    let g = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| Error::Degenerate(format!("gamma(shape={shape}, rate={rate}): {e}")))?;
    let prec: f64 = g.sample(rng);
    Ok(1.0 / prec)
}

/// Log density of Gamma(shape, rate) at `x`.
pub fn gamma_ln_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - statrs::function::gamma::ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// Log density of an inverse-gamma(shape, rate) variable at `v`.
pub fn inverse_gamma_ln_pdf(v: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - statrs::function::gamma::ln_gamma(shape) - (shape + 1.0) * v.ln() - rate / v
}

pub fn std_normal_cdf(z: f64) -> f64 {
    StatrsNormal::standard().cdf(z)
}

/// Draw from N(mean, var) truncated to the open interval (lo, hi).
pub fn truncated_normal<R: Rng + ?Sized>(
    rng: &mut R,
    mean: f64,
    var: f64,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    if !(lo < hi) || !(var > 0.0) {
        return Err(Error::Degenerate(format!(
            "truncated normal with var={var} on ({lo}, {hi})"
        )));
    }
    let sd = var.sqrt();
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    let z = if a > 3.0 {
        tail_draw(rng, a, b)
    } else if b < -3.0 {
        -tail_draw(rng, -b, -a)
    } else {
        let std = StatrsNormal::standard();
        let (pa, pb) = (std.cdf(a), std.cdf(b));
        loop {
            let u: f64 = rng.random_range(pa..pb);
            let z = std.inverse_cdf(u);
            if z > a && z < b {
                break z;
            }
        }
    };
    let x = mean + sd * z;
    Ok(x.clamp(lo.next_up(), hi.next_down()))
}

// Standard normal restricted to (a, b) with a > 0 in the upper tail.
fn tail_draw<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    if ((a * a - b.min(1e150).powi(2)) / 2.0).exp() > 0.3 {
        loop {
            let z: f64 = rng.random_range(a..b);
            let u: f64 = rng.random();
            if u.ln() <= (a * a - z * z) / 2.0 {
                return z;
            }
        }
    }
    let lambda = (a + (a * a + 4.0).sqrt()) / 2.0;
    let exp = Exp::new(lambda).expect("positive rate");
    loop {
        let z = a + exp.sample(rng);
        if z >= b {
            continue;
        }
        let u: f64 = rng.random();
        if u.ln() <= -(z - lambda).powi(2) / 2.0 {
            return z;
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with denominator n − 1.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64
}

/// Linear-interpolation quantile of already sorted data (R type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(xs: &[f64], p: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, p)
}
