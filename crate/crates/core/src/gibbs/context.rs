use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{
    Design, GpField, HyperPriors, ModelVariant, PanelDataset, ScalingPolicy, SiteMeta,
};
use crate::spatial::{exp_correlation, CorrelationMatrix};

/// Decay support of one field with a correlation matrix per value.
#[derive(Debug, Clone)]
pub struct PhiTable {
    pub values: Vec<f64>,
    pub fixed: bool,
    matrices: Vec<Arc<CorrelationMatrix>>,
}

impl PhiTable {
    pub fn index_of(&self, phi: f64) -> Option<usize> {
        self.values.iter().position(|&v| v == phi)
    }

    pub fn matrix(&self, k: usize) -> &CorrelationMatrix {
        &self.matrices[k]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Everything a chain reads but never writes: data, covariates, priors,
/// variant and the precomputed correlation matrices.
#[derive(Debug, Clone)]
pub struct FitContext {
    pub sites: Vec<SiteMeta>,
    pub n_years: usize,
    pub n_days: usize,
    pub n_sites: usize,
    pub first_year: i32,
    pub day_of_year_offset: u32,
    /// Observations laid out `[i][t][l]`.
    y: Vec<f64>,
    pub design: Design,
    pub priors: HyperPriors,
    pub variant: ModelVariant,
    phi: [PhiTable; 4],
}

impl FitContext {
    pub fn new(
        data: &PanelDataset,
        priors: HyperPriors,
        variant: ModelVariant,
        policy: ScalingPolicy,
    ) -> Result<Self> {
        let design = Design::new(data, policy)?;
        Self::with_design(data, priors, variant, design)
    }

    pub fn with_design(
        data: &PanelDataset,
        priors: HyperPriors,
        variant: ModelVariant,
        design: Design,
    ) -> Result<Self> {
        data.check_fit_ready()?;
        priors.validate()?;
        let (n_years, n_days, n_sites) = (data.n_years(), data.n_days(), data.n_sites());
        if design.time.len() != n_years
            || design.sin.len() != n_days
            || design.elev.len() != n_sites
        {
            return Err(Error::InvalidConfig(
                "design does not match the panel".into(),
            ));
        }
        let mut y = Vec::with_capacity(n_years * n_days * n_sites);
        for i in 0..n_sites {
            for t in 0..n_years {
                for l in 0..n_days {
                    y.push(data.raw(t, l, i));
                }
            }
        }
        let sites = data.sites().to_vec();
        let build = |f: GpField| -> Result<PhiTable> {
            let support = priors.phi_prior(f).resolve(&sites)?;
            let matrices = if variant.has_gp(f) {
                support
                    .values
                    .iter()
                    .map(|&p| exp_correlation(&sites, p).map(Arc::new))
                    .collect::<Result<Vec<_>>>()?
            } else {
                Vec::new()
            };
            Ok(PhiTable {
                values: support.values,
                fixed: support.fixed,
                matrices,
            })
        };
        let phi = [
            build(GpField::Beta0)?,
            build(GpField::Alpha)?,
            build(GpField::Rho)?,
            build(GpField::Sig2)?,
        ];
        Ok(Self {
            sites,
            n_years,
            n_days,
            n_sites,
            first_year: data.first_year,
            day_of_year_offset: data.day_of_year_offset,
            y,
            design,
            priors,
            variant,
            phi,
        })
    }

    /// Swaps in new observations laid out `[t][l][i]` with the same shape.
    pub fn replace_observations(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.y.len() {
            return Err(Error::InvalidDataset(format!(
                "expected {} values, got {}",
                self.y.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("observations must be finite".into()));
        }
        for i in 0..self.n_sites {
            for t in 0..self.n_years {
                for l in 0..self.n_days {
                    self.y[(i * self.n_years + t) * self.n_days + l] =
                        values[(t * self.n_days + l) * self.n_sites + i];
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn y(&self, i: usize, t: usize, l: usize) -> f64 {
        self.y[(i * self.n_years + t) * self.n_days + l]
    }

    /// The `T × L` block of site `i`.
    pub fn site_block(&self, i: usize) -> &[f64] {
        let n = self.n_years * self.n_days;
        &self.y[i * n..(i + 1) * n]
    }

    pub fn phi_table(&self, f: GpField) -> &PhiTable {
        &self.phi[f.index()]
    }

    /// Correlation matrix of field `f` at decay `phi`, which must lie on the
    /// field's support.
    pub fn correlation(&self, f: GpField, phi: f64) -> Result<&CorrelationMatrix> {
        let table = self.phi_table(f);
        if table.matrices.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "field {} has no spatial process in this variant",
                f.name()
            )));
        }
        let k = table.index_of(phi).ok_or_else(|| {
            Error::InvalidConfig(format!("decay {phi} is not on the {} support", f.name()))
        })?;
        Ok(table.matrix(k))
    }

    /// Number of AR transitions per site, `T (L − 1)`.
    pub fn transitions(&self) -> usize {
        self.n_years * (self.n_days - 1)
    }

    pub fn sum_time_sq(&self) -> f64 {
        self.design.time.iter().map(|t| t * t).sum()
    }
}
