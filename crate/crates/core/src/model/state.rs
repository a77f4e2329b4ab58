use serde::{Deserialize, Serialize};

use super::variant::ModelVariant;

/// `(β0, α, β1, β2, β3)`: intercept, trend, harmonic pair, elevation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FixedEffects {
    pub beta0: f64,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
}

/// Per-site latent values. `beta0_tilde` and `alpha_tilde` are the
/// hierarchically centered intercept and slope fields.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SiteLatents {
    pub beta0_tilde: Vec<f64>,
    pub alpha_tilde: Vec<f64>,
    pub z_rho: Vec<f64>,
    pub z_sig2: Vec<f64>,
}

/// Inverse of the Fisher-z style link `z = log((1+ρ)/(1−ρ))`.
#[inline]
pub fn rho_from_z(z: f64) -> f64 {
    (0.5 * z).tanh()
}

#[inline]
pub fn z_from_rho(rho: f64) -> f64 {
    ((1.0 + rho) / (1.0 - rho)).ln()
}

impl SiteLatents {
    pub fn constant(n_sites: usize, beta0: f64, alpha: f64, z_rho: f64, z_sig2: f64) -> Self {
        Self {
            beta0_tilde: vec![beta0; n_sites],
            alpha_tilde: vec![alpha; n_sites],
            z_rho: vec![z_rho; n_sites],
            z_sig2: vec![z_sig2; n_sites],
        }
    }

    pub fn len(&self) -> usize {
        self.beta0_tilde.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta0_tilde.is_empty()
    }

    pub fn rho(&self, i: usize) -> f64 {
        rho_from_z(self.z_rho[i])
    }

    pub fn sig2(&self, i: usize) -> f64 {
        self.z_sig2[i].exp()
    }
}

/// Yearly effects `ψ_t` (with `ψ_1 = 0`) and site-year effects `γ_t(s_i)`,
/// the latter stored `[t][i]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TemporalEffects {
    pub psi: Vec<f64>,
    pub gamma: Vec<f64>,
    pub n_sites: usize,
}

impl TemporalEffects {
    pub fn zeros(n_years: usize, n_sites: usize) -> Self {
        Self {
            psi: vec![0.0; n_years],
            gamma: vec![0.0; n_years * n_sites],
            n_sites,
        }
    }

    #[inline]
    pub fn gamma(&self, t: usize, i: usize) -> f64 {
        self.gamma[t * self.n_sites + i]
    }

    #[inline]
    pub fn gamma_mut(&mut self, t: usize, i: usize) -> &mut f64 {
        &mut self.gamma[t * self.n_sites + i]
    }

    pub fn n_years(&self) -> usize {
        self.psi.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperState {
    pub rho_psi: f64,
    pub sigma2_lambda: f64,
    pub sigma2_eta: f64,
    pub sigma2_beta0: f64,
    pub sigma2_alpha: f64,
    pub sigma2_rho: f64,
    pub sigma2_sig2: f64,
    /// Global mean of the `Z_ρY(s)` field.
    pub z_rho: f64,
    /// Global mean of the `Z_σε²(s)` field.
    pub z_sig2: f64,
    pub phi_beta0: f64,
    pub phi_alpha: f64,
    pub phi_rho: f64,
    pub phi_sig2: f64,
}

impl Default for HyperState {
    fn default() -> Self {
        Self {
            rho_psi: 0.0,
            sigma2_lambda: 1.0,
            sigma2_eta: 1.0,
            sigma2_beta0: 1.0,
            sigma2_alpha: 1.0,
            sigma2_rho: 1.0,
            sigma2_sig2: 1.0,
            z_rho: 0.0,
            z_sig2: 0.0,
            phi_beta0: 1.0,
            phi_alpha: 1.0,
            phi_rho: 1.0,
            phi_sig2: 1.0,
        }
    }
}

/// The four spatial fields of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GpField {
    Beta0,
    Alpha,
    Rho,
    Sig2,
}

impl GpField {
    pub const ALL: [GpField; 4] = [GpField::Beta0, GpField::Alpha, GpField::Rho, GpField::Sig2];

    pub fn index(self) -> usize {
        match self {
            GpField::Beta0 => 0,
            GpField::Alpha => 1,
            GpField::Rho => 2,
            GpField::Sig2 => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GpField::Beta0 => "beta0",
            GpField::Alpha => "alpha",
            GpField::Rho => "rho",
            GpField::Sig2 => "sigma",
        }
    }
}

/// One complete point in parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub fixed: FixedEffects,
    pub sites: SiteLatents,
    pub temporal: TemporalEffects,
    pub hyper: HyperState,
}

impl ModelState {
    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn n_years(&self) -> usize {
        self.temporal.n_years()
    }

    /// Site values of a field (`Z` scale for ρ and σ²).
    pub fn field(&self, f: GpField) -> &[f64] {
        match f {
            GpField::Beta0 => &self.sites.beta0_tilde,
            GpField::Alpha => &self.sites.alpha_tilde,
            GpField::Rho => &self.sites.z_rho,
            GpField::Sig2 => &self.sites.z_sig2,
        }
    }

    pub fn field_mut(&mut self, f: GpField) -> &mut Vec<f64> {
        match f {
            GpField::Beta0 => &mut self.sites.beta0_tilde,
            GpField::Alpha => &mut self.sites.alpha_tilde,
            GpField::Rho => &mut self.sites.z_rho,
            GpField::Sig2 => &mut self.sites.z_sig2,
        }
    }

    /// Global mean of a field.
    pub fn field_mean(&self, f: GpField) -> f64 {
        match f {
            GpField::Beta0 => self.fixed.beta0,
            GpField::Alpha => self.fixed.alpha,
            GpField::Rho => self.hyper.z_rho,
            GpField::Sig2 => self.hyper.z_sig2,
        }
    }

    pub fn set_field_mean(&mut self, f: GpField, v: f64) {
        match f {
            GpField::Beta0 => self.fixed.beta0 = v,
            GpField::Alpha => self.fixed.alpha = v,
            GpField::Rho => self.hyper.z_rho = v,
            GpField::Sig2 => self.hyper.z_sig2 = v,
        }
    }

    pub fn field_variance(&self, f: GpField) -> f64 {
        match f {
            GpField::Beta0 => self.hyper.sigma2_beta0,
            GpField::Alpha => self.hyper.sigma2_alpha,
            GpField::Rho => self.hyper.sigma2_rho,
            GpField::Sig2 => self.hyper.sigma2_sig2,
        }
    }

    pub fn set_field_variance(&mut self, f: GpField, v: f64) {
        match f {
            GpField::Beta0 => self.hyper.sigma2_beta0 = v,
            GpField::Alpha => self.hyper.sigma2_alpha = v,
            GpField::Rho => self.hyper.sigma2_rho = v,
            GpField::Sig2 => self.hyper.sigma2_sig2 = v,
        }
    }

    pub fn field_phi(&self, f: GpField) -> f64 {
        match f {
            GpField::Beta0 => self.hyper.phi_beta0,
            GpField::Alpha => self.hyper.phi_alpha,
            GpField::Rho => self.hyper.phi_rho,
            GpField::Sig2 => self.hyper.phi_sig2,
        }
    }

    pub fn set_field_phi(&mut self, f: GpField, v: f64) {
        match f {
            GpField::Beta0 => self.hyper.phi_beta0 = v,
            GpField::Alpha => self.hyper.phi_alpha = v,
            GpField::Rho => self.hyper.phi_rho = v,
            GpField::Sig2 => self.hyper.phi_sig2 = v,
        }
    }

    /// Sets every site value of `f` to its global mean.
    pub fn collapse_field(&mut self, f: GpField) {
        let m = self.field_mean(f);
        self.field_mut(f).iter_mut().for_each(|v| *v = m);
    }

    /// Scalar parameters that the sampler actually moves under `variant`,
    /// on the sampled scale.
    pub fn named_scalars(&self, variant: &ModelVariant) -> Vec<(&'static str, f64)> {
        let f = &self.fixed;
        let h = &self.hyper;
        let mut out = vec![
            ("beta0", f.beta0),
            ("alpha", f.alpha),
            ("beta1", f.beta1),
            ("beta2", f.beta2),
        ];
        if variant.elevation_effect {
            out.push(("beta3", f.beta3));
        }
        out.push(("z_rho", h.z_rho));
        out.push(("z_sig2", h.z_sig2));
        if variant.year_effects {
            if !variant.pin_rho_psi_zero {
                out.push(("rho_psi", h.rho_psi));
            }
            out.push(("sigma2_lambda", h.sigma2_lambda));
        }
        out.push(("sigma2_eta", h.sigma2_eta));
        let named = [
            ("sigma2_beta0", "phi_beta0", GpField::Beta0),
            ("sigma2_alpha", "phi_alpha", GpField::Alpha),
            ("sigma2_rho", "phi_rho", GpField::Rho),
            ("sigma2_sig2", "phi_sig2", GpField::Sig2),
        ];
        for (s, _, field) in named {
            if variant.has_gp(field) {
                out.push((s, self.field_variance(field)));
            }
        }
        for (_, p, field) in named {
            if variant.has_gp(field) {
                out.push((p, self.field_phi(field)));
            }
        }
        out
    }

    /// Checks the type invariants: finite values, `ψ_1 = 0`, positive
    /// variances, `ρψ ∈ (−1, 1)`.
    pub fn check_invariants(&self) -> Result<(), String> {
        let h = &self.hyper;
        if self.temporal.psi.first().is_some_and(|&p| p != 0.0) {
            return Err(format!("psi[1] = {} (must be 0)", self.temporal.psi[0]));
        }
        if !(h.rho_psi > -1.0 && h.rho_psi < 1.0) {
            return Err(format!("rho_psi = {} outside (-1, 1)", h.rho_psi));
        }
        let vars = [
            ("sigma2_lambda", h.sigma2_lambda),
            ("sigma2_eta", h.sigma2_eta),
            ("sigma2_beta0", h.sigma2_beta0),
            ("sigma2_alpha", h.sigma2_alpha),
            ("sigma2_rho", h.sigma2_rho),
            ("sigma2_sig2", h.sigma2_sig2),
            ("phi_beta0", h.phi_beta0),
            ("phi_alpha", h.phi_alpha),
            ("phi_rho", h.phi_rho),
            ("phi_sig2", h.phi_sig2),
        ];
        for (name, v) in vars {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} = {v} (must be positive and finite)"));
            }
        }
        let f = &self.fixed;
        let scalars = [
            f.beta0, f.alpha, f.beta1, f.beta2, f.beta3, h.z_rho, h.z_sig2,
        ];
        if scalars.iter().any(|v| !v.is_finite()) {
            return Err("non-finite fixed effect or global mean".into());
        }
        let s = &self.sites;
        for v in s
            .beta0_tilde
            .iter()
            .chain(&s.alpha_tilde)
            .chain(&s.z_rho)
            .chain(&s.z_sig2)
            .chain(&self.temporal.psi)
            .chain(&self.temporal.gamma)
        {
            if !v.is_finite() {
                return Err("non-finite site latent or temporal effect".into());
            }
        }
        for i in 0..s.len() {
            let r = s.rho(i);
            if !(r > -1.0 && r < 1.0) {
                return Err(format!("rho_Y at site {i} = {r} outside (-1, 1)"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_link_roundtrip() {
        for &r in &[-0.9, -0.2, 0.0, 0.5, 0.691] {
            assert!((rho_from_z(z_from_rho(r)) - r).abs() < 1e-14);
        }
        assert_eq!(rho_from_z(0.0), 0.0);
        // (e^z − 1)/(e^z + 1)
        let z: f64 = 1.3;
        assert!((rho_from_z(z) - (z.exp() - 1.0) / (z.exp() + 1.0)).abs() < 1e-15);
    }
}
