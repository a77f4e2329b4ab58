use serde::{Deserialize, Serialize};

use super::FitContext;
use crate::model::{GpField, ModelState};

const ADAPT_FACTOR: f64 = 1.1;
const TARGET_LOW: f64 = 0.15;
const TARGET_HIGH: f64 = 0.40;
const INITIAL_SCALE: f64 = 3.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MhFamily {
    Rho,
    Sig2,
}

impl MhFamily {
    fn index(self) -> usize {
        match self {
            MhFamily::Rho => 0,
            MhFamily::Sig2 => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    window_accepted: u32,
    window_proposed: u32,
    accepted: u64,
    proposed: u64,
}

/// Random-walk proposal scales with windowed adaptation during burn-in.
///
/// Each window of `window` iterations, a scale whose acceptance rate was
/// above 40% grows by 10% and one below 15% shrinks by 10%. After
/// [`MhTuner::freeze`] the scales are fixed and counting restarts.
#[derive(Debug, Clone)]
pub struct MhTuner {
    sd: [Vec<f64>; 2],
    counts: [Vec<Counts>; 2],
    window: usize,
    adapting: bool,
}

/// Post-burn-in acceptance rates, one per site (or a single entry for a
/// field shared by all sites).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AcceptanceReport {
    pub rho: Vec<f64>,
    pub sig2: Vec<f64>,
    pub proposals: u64,
}

impl AcceptanceReport {
    pub fn all_within(&self, lo: f64, hi: f64) -> bool {
        self.rho
            .iter()
            .chain(&self.sig2)
            .all(|&r| (lo..=hi).contains(&r))
    }
}

impl MhTuner {
    pub fn new(rho_sd: Vec<f64>, sig2_sd: Vec<f64>, window: usize) -> Self {
        assert!(rho_sd.iter().chain(&sig2_sd).all(|&s| s > 0.0));
        let counts = [
            vec![Counts::default(); rho_sd.len()],
            vec![Counts::default(); sig2_sd.len()],
        ];
        Self {
            sd: [rho_sd, sig2_sd],
            counts,
            window: window.max(1),
            adapting: true,
        }
    }

    /// Fixed scales, no adaptation.
    pub fn fixed(rho_sd: Vec<f64>, sig2_sd: Vec<f64>) -> Self {
        let mut t = Self::new(rho_sd, sig2_sd, 1);
        t.adapting = false;
        t
    }

    /// Scales set to 3.5 times a normal approximation of each conditional's
    /// posterior standard deviation.
    pub fn initial(ctx: &FitContext, state: &ModelState, window: usize) -> Self {
        let n = ctx.transitions() as f64;
        let rho_sd = |k: f64, rho: f64| -> f64 {
            let m = n * k * (1.0 - rho * rho);
            if m > 0.0 {
                INITIAL_SCALE * 2.0 / m.sqrt()
            } else {
                1.0
            }
        };
        let sig_sd = |k: f64| -> f64 {
            if n * k > 0.0 {
                INITIAL_SCALE * (2.0 / (n * k)).sqrt()
            } else {
                1.0
            }
        };
        let rho = if ctx.variant.has_gp(GpField::Rho) {
            (0..ctx.n_sites)
                .map(|i| rho_sd(1.0, state.sites.rho(i)))
                .collect()
        } else {
            let r = crate::model::rho_from_z(state.hyper.z_rho);
            vec![rho_sd(ctx.n_sites as f64, r)]
        };
        let sig2 = if ctx.variant.has_gp(GpField::Sig2) {
            vec![sig_sd(1.0); ctx.n_sites]
        } else {
            vec![sig_sd(ctx.n_sites as f64)]
        };
        Self::new(rho, sig2, window)
    }

    pub fn sd(&self, fam: MhFamily, k: usize) -> f64 {
        self.sd[fam.index()][k]
    }

    pub fn sds(&self, fam: MhFamily) -> &[f64] {
        &self.sd[fam.index()]
    }

    pub fn is_adapting(&self) -> bool {
        self.adapting
    }

    pub fn record(&mut self, fam: MhFamily, k: usize, accepted: bool) {
        let c = &mut self.counts[fam.index()][k];
        c.window_proposed += 1;
        c.proposed += 1;
        if accepted {
            c.window_accepted += 1;
            c.accepted += 1;
        }
    }

    /// Call once after each iteration `iter` (0-based).
    pub fn end_iteration(&mut self, iter: usize) {
        if !self.adapting || !(iter + 1).is_multiple_of(self.window) {
            return;
        }
        for f in 0..2 {
            for (sd, c) in self.sd[f].iter_mut().zip(self.counts[f].iter_mut()) {
                if c.window_proposed > 0 {
                    let rate = c.window_accepted as f64 / c.window_proposed as f64;
                    if rate > TARGET_HIGH {
                        *sd *= ADAPT_FACTOR;
                    } else if rate < TARGET_LOW {
                        *sd /= ADAPT_FACTOR;
                    }
                }
                c.window_accepted = 0;
                c.window_proposed = 0;
            }
        }
    }

    /// Stops adaptation and restarts the acceptance counts.
    pub fn freeze(&mut self) {
        self.adapting = false;
        for f in 0..2 {
            for c in self.counts[f].iter_mut() {
                *c = Counts::default();
            }
        }
    }

    pub fn report(&self) -> AcceptanceReport {
        let rates = |f: usize| -> Vec<f64> {
            self.counts[f]
                .iter()
                .map(|c| {
                    if c.proposed > 0 {
                        c.accepted as f64 / c.proposed as f64
                    } else {
                        0.0
                    }
                })
                .collect()
        };
        AcceptanceReport {
            rho: rates(0),
            sig2: rates(1),
            proposals: self.counts[0].iter().map(|c| c.proposed).sum(),
        }
    }
}
