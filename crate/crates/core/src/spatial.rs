//! Exponential correlation matrices, Gaussian conditioning and the
//! multivariate normal log density used by the sampler and the predictor.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::model::SiteMeta;
use crate::stats::LN_2PI;

const JITTER_LADDER: [f64; 3] = [0.0, 1e-10, 1e-8];
const VAR_TOL: f64 = 1e-12;

/// Cholesky factorization with a small diagonal jitter ladder.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
}

impl SpdFactor {
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if n == 0 || n != m.ncols() {
            return Err(Error::Factorization(format!(
                "expected a nonempty square matrix, got {}x{}",
                n,
                m.ncols()
            )));
        }
        let mean_diag = m.diagonal().sum() / n as f64;
        for &rel in &JITTER_LADDER {
            let jitter = rel * mean_diag;
            let mut a = m.clone();
            for k in 0..n {
                a[(k, k)] += jitter;
            }
            if let Some(chol) = Cholesky::new(a) {
                if jitter > 0.0 {
                    log::debug!("factorization needed diagonal jitter {jitter:e}");
                }
                return Ok(Self { chol, jitter });
            }
        }
        Err(Error::Factorization(
            "matrix is not positive definite after jitter".into(),
        ))
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self
            .chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| d.ln())
            .sum::<f64>()
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    /// `L z` for the lower factor `L`; maps iid normals to `N(0, A)`.
    pub fn mul_lower(&self, z: &DVector<f64>) -> DVector<f64> {
        self.chol.l() * z
    }

    /// `xᵀ A⁻¹ x` via one triangular solve.
    pub fn quad_form(&self, x: &DVector<f64>) -> f64 {
        let l = self.chol.l();
        let z = l
            .solve_lower_triangular(x)
            .expect("cholesky factor has a positive diagonal");
        z.norm_squared()
    }
}

/// `R(φ)` with entries `exp(−φ d_jk)` and cached inverse and log-determinant.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    phi: f64,
    matrix: DMatrix<f64>,
    factor: SpdFactor,
    inverse: DMatrix<f64>,
    inv_ones: Vec<f64>,
    inv_total: f64,
}

pub fn distance_matrix(sites: &[SiteMeta]) -> DMatrix<f64> {
    let n = sites.len();
    DMatrix::from_fn(n, n, |j, k| sites[j].distance(&sites[k]))
}

pub fn exp_correlation(sites: &[SiteMeta], phi: f64) -> Result<CorrelationMatrix> {
    if sites.is_empty() {
        return Err(Error::InvalidConfig(
            "correlation needs at least one site".into(),
        ));
    }
    if !(phi > 0.0 && phi.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "decay must be positive, got {phi}"
        )));
    }
    for j in 0..sites.len() {
        for k in j + 1..sites.len() {
            if sites[j].distance(&sites[k]) == 0.0 {
                return Err(Error::DuplicateSites(
                    sites[j].id.clone(),
                    sites[k].id.clone(),
                ));
            }
        }
    }
    let d = distance_matrix(sites);
    CorrelationMatrix::from_distances(&d, phi)
}

impl CorrelationMatrix {
    pub fn from_distances(d: &DMatrix<f64>, phi: f64) -> Result<Self> {
        let matrix = d.map(|x| (-phi * x).exp());
        let factor = SpdFactor::new(&matrix)?;
        let inverse = factor.inverse();
        let inv_ones: Vec<f64> = inverse.row_iter().map(|r| r.sum()).collect();
        let inv_total = inv_ones.iter().sum();
        Ok(Self {
            phi,
            matrix,
            factor,
            inverse,
            inv_ones,
            inv_total,
        })
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
    pub fn factor(&self) -> &SpdFactor {
        &self.factor
    }
    pub fn log_det(&self) -> f64 {
        self.factor.log_det()
    }

    /// Precision entry `r_jk` (element of `R⁻¹`).
    #[inline]
    pub fn inv(&self, j: usize, k: usize) -> f64 {
        self.inverse[(j, k)]
    }

    /// `1ᵀ R⁻¹ 1`.
    pub fn inv_total(&self) -> f64 {
        self.inv_total
    }

    /// `1ᵀ R⁻¹ x`.
    pub fn inv_ones_dot(&self, x: &[f64]) -> f64 {
        self.inv_ones.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// `(x − m1)ᵀ R⁻¹ (x − m1)`.
    pub fn quad_centered(&self, x: &[f64], m: f64) -> f64 {
        let mut q = 0.0;
        for (j, xj) in x.iter().enumerate() {
            let mut row = 0.0;
            for (k, xk) in x.iter().enumerate() {
                row += self.inverse[(j, k)] * (xk - m);
            }
            q += (xj - m) * row;
        }
        q
    }

    /// Conditional prior of site `i` given the others, for a field
    /// `x ~ N(m1, σ² R)`: mean `m − Σ_{k≠i} r_ik (x_k − m) / r_ii`,
    /// variance `σ² / r_ii`.
    pub fn conditional(&self, i: usize, x: &[f64], m: f64, sigma2: f64) -> (f64, f64) {
        let rii = self.inverse[(i, i)];
        let mut s = 0.0;
        for (k, &xk) in x.iter().enumerate() {
            if k != i {
                s += self.inverse[(i, k)] * (xk - m);
            }
        }
        (m - s / rii, sigma2 / rii)
    }

    /// Simple-kriging weights for a new location with correlations `r0`
    /// to the sites.
    pub fn kriging_weights(&self, r0: &[f64]) -> KrigingWeights {
        let rhs = DVector::from_column_slice(r0);
        let w = self.factor.solve(&rhs);
        let v = 1.0 - rhs.dot(&w);
        KrigingWeights {
            weights: w.iter().copied().collect(),
            var_factor: clamp_variance(v, 1.0).unwrap_or(0.0),
            coincident: None,
        }
    }
}

/// Precomputed weights `λ = R⁻¹ r0` and variance factor `1 − r0ᵀλ` for
/// kriging one field at one location; a coincident site short-circuits.
#[derive(Debug, Clone, PartialEq)]
pub struct KrigingWeights {
    pub weights: Vec<f64>,
    pub var_factor: f64,
    pub coincident: Option<usize>,
}

impl KrigingWeights {
    pub fn for_location(
        corr: &CorrelationMatrix,
        sites: &[SiteMeta],
        s0: &SiteMeta,
    ) -> KrigingWeights {
        if let Some(i) = sites.iter().position(|s| s.distance(s0) == 0.0) {
            return KrigingWeights {
                weights: Vec::new(),
                var_factor: 0.0,
                coincident: Some(i),
            };
        }
        let r0: Vec<f64> = sites
            .iter()
            .map(|s| (-corr.phi() * s.distance(s0)).exp())
            .collect();
        corr.kriging_weights(&r0)
    }

    /// Conditional `(mean, variance)` of the field at the new location.
    pub fn conditional(&self, x: &[f64], m: f64, sigma2: f64) -> (f64, f64) {
        if let Some(i) = self.coincident {
            return (x[i], 0.0);
        }
        let mean = m + self
            .weights
            .iter()
            .zip(x)
            .map(|(w, xk)| w * (xk - m))
            .sum::<f64>();
        (mean, sigma2 * self.var_factor)
    }
}

fn clamp_variance(v: f64, scale: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v >= -VAR_TOL * scale.max(1.0) {
        Ok(0.0)
    } else {
        Err(Error::Factorization(format!(
            "negative conditional variance {v:e}"
        )))
    }
}

/// `3 / d_max` over all site pairs.
pub fn default_phi(sites: &[SiteMeta]) -> Result<f64> {
    if sites.len() < 2 {
        return Err(Error::InvalidConfig(
            "default decay needs at least two sites".into(),
        ));
    }
    let mut dmax: f64 = 0.0;
    for j in 0..sites.len() {
        for k in j + 1..sites.len() {
            dmax = dmax.max(sites[j].distance(&sites[k]));
        }
    }
    if dmax <= 0.0 {
        return Err(Error::DuplicateSites(
            sites[0].id.clone(),
            sites[1].id.clone(),
        ));
    }
    Ok(3.0 / dmax)
}

/// Joint Gaussian blocks for conditioning a process at `s0` on observed
/// values `w` at the sites.
#[derive(Debug, Clone)]
pub struct KrigingSystem {
    pub mu0: f64,
    pub mu: Vec<f64>,
    pub sigma00: f64,
    pub sigma_i0: Vec<f64>,
    pub sigma: DMatrix<f64>,
    pub w: Vec<f64>,
}

impl KrigingSystem {
    /// `(μ0 + Σ_i0ᵀ Σ⁻¹ (w − μ), Σ00 − Σ_i0ᵀ Σ⁻¹ Σ_i0)`.
    pub fn conditional(&self) -> Result<(f64, f64)> {
        let n = self.mu.len();
        if self.sigma.nrows() != n || self.sigma_i0.len() != n || self.w.len() != n {
            return Err(Error::InvalidConfig(
                "kriging system dimensions disagree".into(),
            ));
        }
        let f = SpdFactor::new(&self.sigma)?;
        let c = DVector::from_column_slice(&self.sigma_i0);
        let resid = DVector::from_iterator(n, self.w.iter().zip(&self.mu).map(|(w, m)| w - m));
        let a = f.solve(&c);
        let mean = self.mu0 + a.dot(&resid);
        let var = clamp_variance(self.sigma00 - c.dot(&a), self.sigma00)?;
        Ok((mean, var))
    }
}

pub fn krige_conditional(system: &KrigingSystem) -> Result<(f64, f64)> {
    system.conditional()
}

/// `log N(x | m1, σ² R)`.
pub fn mvn_logpdf_centered(x: &[f64], m: f64, sigma2: f64, r: &CorrelationMatrix) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "variance must be positive, got {sigma2}"
        )));
    }
    if x.len() != r.dim() {
        return Err(Error::InvalidConfig(
            "vector and matrix dimensions disagree".into(),
        ));
    }
    let n = x.len() as f64;
    Ok(-0.5 * (n * (LN_2PI + sigma2.ln()) + r.log_det() + r.quad_centered(x, m) / sigma2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::normal_ln_pdf;
    use proptest::prelude::*;

    fn site(id: &str, x: f64, y: f64) -> SiteMeta {
        SiteMeta::new(id, x, y, 0.0)
    }

    #[test]
    fn unit_diagonal_and_range_rule() {
        let s = vec![site("a", 0.0, 0.0), site("b", 100.0, 0.0)];
        let phi = default_phi(&s).unwrap();
        assert_eq!(phi, 0.03);
        let r = exp_correlation(&s, phi).unwrap();
        assert_eq!(r.matrix()[(0, 0)], 1.0);
        assert!((r.matrix()[(0, 1)] - (-3.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn default_phi_collinear_and_single() {
        let s = vec![
            site("a", 0.0, 0.0),
            site("b", 50.0, 0.0),
            site("c", 100.0, 0.0),
        ];
        assert_eq!(default_phi(&s).unwrap(), 0.03);
        assert!(default_phi(&s[..1]).is_err());
    }

    #[test]
    fn duplicate_sites_named() {
        let s = vec![
            site("a", 1.0, 1.0),
            site("b", 2.0, 0.0),
            site("c", 1.0, 1.0),
        ];
        match exp_correlation(&s, 0.1) {
            Err(Error::DuplicateSites(x, y)) => assert_eq!((x.as_str(), y.as_str()), ("a", "c")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn eigenvalues_positive() {
        let s = vec![
            site("a", 0.0, 0.0),
            site("b", 3.0, 4.0),
            site("c", -2.0, 7.0),
        ];
        let r = exp_correlation(&s, 0.2).unwrap();
        let eig = r.matrix().clone().symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&l| l > 0.0));
    }

    #[test]
    fn krige_uncorrelated_returns_prior() {
        let sys = KrigingSystem {
            mu0: 2.0,
            mu: vec![1.0, 1.0],
            sigma00: 3.0,
            sigma_i0: vec![0.0, 0.0],
            sigma: DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.0]),
            w: vec![5.0, -1.0],
        };
        assert_eq!(sys.conditional().unwrap(), (2.0, 3.0));
    }

    #[test]
    fn krige_coincident_limit() {
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let sys = KrigingSystem {
            mu0: 0.0,
            mu: vec![0.0, 0.0],
            sigma00: 2.0,
            sigma_i0: vec![2.0, 0.5],
            sigma,
            w: vec![1.7, 0.3],
        };
        let (m, v) = sys.conditional().unwrap();
        assert!((m - 1.7).abs() < 1e-12);
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn mvn_logpdf_special_cases() {
        let s = vec![site("a", 0.0, 0.0)];
        let r = exp_correlation(&s, 1.0).unwrap();
        let v = mvn_logpdf_centered(&[2.0], 2.0, 4.0, &r).unwrap();
        assert!((v + 0.5 * (LN_2PI + 4.0f64.ln())).abs() < 1e-14);
        // far-apart sites give an identity correlation
        let s = vec![site("a", 0.0, 0.0), site("b", 1e4, 0.0)];
        let r = exp_correlation(&s, 1.0).unwrap();
        let v = mvn_logpdf_centered(&[1.0, -0.5], 0.3, 2.0, &r).unwrap();
        let want = normal_ln_pdf(1.0, 0.3, 2.0) + normal_ln_pdf(-0.5, 0.3, 2.0);
        assert!((v - want).abs() < 1e-12);
        assert!(mvn_logpdf_centered(&[1.0, 0.0], 0.0, 0.0, &r).is_err());
    }

    #[test]
    fn mvn_logpdf_matches_explicit_3x3() {
        let s = vec![
            site("a", 0.0, 0.0),
            site("b", 1.0, 2.0),
            site("c", 3.0, -1.0),
        ];
        let phi = 0.4;
        let r = exp_correlation(&s, phi).unwrap();
        let m = r.matrix();
        // explicit cofactor inverse and determinant
        let (a, b, c) = (m[(0, 0)], m[(0, 1)], m[(0, 2)]);
        let (d, e, f) = (m[(1, 0)], m[(1, 1)], m[(1, 2)]);
        let (g, h, k) = (m[(2, 0)], m[(2, 1)], m[(2, 2)]);
        let det = a * (e * k - f * h) - b * (d * k - f * g) + c * (d * h - e * g);
        let inv = [
            [(e * k - f * h), -(b * k - c * h), (b * f - c * e)],
            [-(d * k - f * g), (a * k - c * g), -(a * f - c * d)],
            [(d * h - e * g), -(a * h - b * g), (a * e - b * d)],
        ];
        let x = [0.7, -1.2, 2.5];
        let (mu, s2): (f64, f64) = (0.4, 1.7);
        let mut q = 0.0;
        for j in 0..3 {
            for l in 0..3 {
                q += (x[j] - mu) * inv[j][l] / det * (x[l] - mu);
            }
        }
        let want = -0.5 * (3.0 * (LN_2PI + s2.ln()) + det.ln() + q / s2);
        let got = mvn_logpdf_centered(&x, mu, s2, &r).unwrap();
        assert!((got - want).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn correlation_decays_monotonically(d in 0.01f64..500.0, p1 in 0.001f64..1.0, dp in 0.001f64..1.0) {
            let p2 = p1 + dp;
            prop_assert!((-p1 * d).exp() > (-p2 * d).exp());
        }

        #[test]
        fn conditional_variance_below_prior(
            xs in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 3),
            x0 in (-50.0f64..50.0, -50.0f64..50.0),
            phi in 0.01f64..0.5,
        ) {
            let sites: Vec<SiteMeta> = xs.iter().enumerate()
                .map(|(i, &(x, y))| site(&format!("s{i}"), x, y)).collect();
            prop_assume!(exp_correlation(&sites, phi).is_ok());
            let r = exp_correlation(&sites, phi).unwrap();
            let s0 = site("new", x0.0, x0.1);
            let kw = KrigingWeights::for_location(&r, &sites, &s0);
            let (_, v) = kw.conditional(&[0.0; 3], 0.0, 2.5);
            prop_assert!((0.0..=2.5 + 1e-12).contains(&v));
        }

        #[test]
        fn logpdf_permutation_invariant(
            xs in proptest::collection::vec(-3.0f64..3.0, 4),
            perm_seed in 0usize..24,
        ) {
            let sites = vec![site("a", 0.0, 0.0), site("b", 5.0, 1.0), site("c", 2.0, 8.0), site("d", -4.0, 3.0)];
            let mut idx: Vec<usize> = (0..4).collect();
            // deterministic permutation from the seed
            let mut k = perm_seed;
            for i in (1..4).rev() {
                idx.swap(i, k % (i + 1));
                k /= i + 1;
            }
            let r = exp_correlation(&sites, 0.2).unwrap();
            let ps: Vec<SiteMeta> = idx.iter().map(|&i| sites[i].clone()).collect();
            let px: Vec<f64> = idx.iter().map(|&i| xs[i]).collect();
            let rp = exp_correlation(&ps, 0.2).unwrap();
            let a = mvn_logpdf_centered(&xs, 0.3, 1.3, &r).unwrap();
            let b = mvn_logpdf_centered(&px, 0.3, 1.3, &rp).unwrap();
            prop_assert!((a - b).abs() < 1e-10);
        }
    }
}
