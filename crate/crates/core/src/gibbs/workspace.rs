use super::FitContext;
use crate::model::ModelState;

/// Residuals `X_tℓi = Y − (μ + γ)` kept in step with the state.
///
/// Updates that move `β1, β2, β3` or `γ` shift the affected residuals in
/// place; [`ResidualWorkspace::refresh`] rebuilds from scratch and is called
/// once per sweep to stop rounding drift.
#[derive(Debug, Clone)]
pub struct ResidualWorkspace {
    n_years: usize,
    n_days: usize,
    /// Laid out `[i][t][l]`, like the context's data.
    x: Vec<f64>,
}

/// Per-site autoregressive sums over `t` and `ℓ ≥ 2`:
/// `a = Σ X²_ℓ`, `b = Σ X_ℓ X_{ℓ−1}`, `c = Σ X²_{ℓ−1}`, so the residual
/// sum of squares at `ρ` is `a − 2ρb + ρ²c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArSums {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ArSums {
    #[inline]
    pub fn rss(&self, rho: f64) -> f64 {
        // clamp guards tiny negative values from cancellation
        (self.a - 2.0 * rho * self.b + rho * rho * self.c).max(0.0)
    }
}

impl ResidualWorkspace {
    pub fn new(ctx: &FitContext, state: &ModelState) -> Self {
        let mut ws = Self {
            n_years: ctx.n_years,
            n_days: ctx.n_days,
            x: vec![0.0; ctx.n_sites * ctx.n_years * ctx.n_days],
        };
        ws.refresh(ctx, state);
        ws
    }

    pub fn refresh(&mut self, ctx: &FitContext, state: &ModelState) {
        let f = &state.fixed;
        let d = &ctx.design;
        for i in 0..ctx.n_sites {
            let e = f.beta3 * d.elev[i];
            for t in 0..ctx.n_years {
                let g = state.temporal.gamma(t, i);
                let base = (i * self.n_years + t) * self.n_days;
                for l in 0..ctx.n_days {
                    let mu = f.beta1 * d.sin[l] + f.beta2 * d.cos[l] + e;
                    self.x[base + l] = ctx.y(i, t, l) - mu - g;
                }
            }
        }
    }

    #[inline]
    pub fn get(&self, i: usize, t: usize, l: usize) -> f64 {
        self.x[(i * self.n_years + t) * self.n_days + l]
    }

    /// The `L` residuals of site `i`, year `t`.
    #[inline]
    pub fn year(&self, i: usize, t: usize) -> &[f64] {
        let base = (i * self.n_years + t) * self.n_days;
        &self.x[base..base + self.n_days]
    }

    /// Subtracts `delta · cov[ℓ]` everywhere (a harmonic coefficient moved).
    pub fn shift_by_day(&mut self, delta: f64, cov: &[f64]) {
        for block in self.x.chunks_mut(self.n_days) {
            for (x, c) in block.iter_mut().zip(cov) {
                *x -= delta * c;
            }
        }
    }

    /// Subtracts `delta` from every residual of site `i`.
    pub fn shift_site(&mut self, i: usize, delta: f64) {
        let n = self.n_years * self.n_days;
        for x in &mut self.x[i * n..(i + 1) * n] {
            *x -= delta;
        }
    }

    /// Subtracts `delta` from the residuals of site `i` in year `t`.
    pub fn shift_site_year(&mut self, i: usize, t: usize, delta: f64) {
        let base = (i * self.n_years + t) * self.n_days;
        for x in &mut self.x[base..base + self.n_days] {
            *x -= delta;
        }
    }

    pub fn ar_sums(&self, i: usize) -> ArSums {
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        for t in 0..self.n_years {
            let r = self.year(i, t);
            for l in 1..self.n_days {
                a += r[l] * r[l];
                b += r[l] * r[l - 1];
                c += r[l - 1] * r[l - 1];
            }
        }
        ArSums { a, b, c }
    }

    /// Largest absolute difference from a fresh rebuild.
    pub fn max_drift(&self, ctx: &FitContext, state: &ModelState) -> f64 {
        let fresh = Self::new(ctx, state);
        self.x
            .iter()
            .zip(&fresh.x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{HyperPriors, ModelVariant, ScalingPolicy};
    use crate::synth::{simulate_panel, GeneratorSpec, SiteLayout};

    fn setup() -> (FitContext, ModelState) {
        let spec = GeneratorSpec {
            layout: SiteLayout::Grid {
                n: 3,
                spacing_km: 30.0,
                elev_min: 100.0,
                elev_max: 600.0,
            },
            n_years: 3,
            n_days: 8,
            ..GeneratorSpec::default()
        };
        let (data, state) = simulate_panel(&spec).unwrap();
        let ctx = FitContext::new(
            &data,
            HyperPriors::default(),
            ModelVariant::full(),
            ScalingPolicy::Standardize,
        )
        .unwrap();
        (ctx, state)
    }

    #[test]
    fn shifts_track_a_rebuild() {
        let (ctx, mut s) = setup();
        let mut ws = ResidualWorkspace::new(&ctx, &s);
        s.fixed.beta1 += 0.3;
        ws.shift_by_day(0.3, &ctx.design.sin);
        s.fixed.beta3 -= 0.2;
        for i in 0..3 {
            ws.shift_site(i, -0.2 * ctx.design.elev[i]);
        }
        *s.temporal.gamma_mut(1, 2) += 0.7;
        ws.shift_site_year(2, 1, 0.7);
        assert!(ws.max_drift(&ctx, &s) < 1e-12);
    }

    #[test]
    fn ar_sums_give_the_residual_sum_of_squares() {
        let (ctx, s) = setup();
        let ws = ResidualWorkspace::new(&ctx, &s);
        let sums = ws.ar_sums(1);
        for rho in [-0.5, 0.0, 0.3, 0.9] {
            let direct: f64 = (0..3)
                .flat_map(|t| (1..8).map(move |l| (t, l)))
                .map(|(t, l)| (ws.get(1, t, l) - rho * ws.get(1, t, l - 1)).powi(2))
                .sum();
            assert!((sums.rss(rho) - direct).abs() < 1e-9 * direct.max(1.0));
        }
    }
}
