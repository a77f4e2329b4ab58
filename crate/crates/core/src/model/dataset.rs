use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of days in the May–September window.
pub const MJJAS_DAYS: usize = 153;

const ELEV_MIN: f64 = -500.0;
const ELEV_MAX: f64 = 9000.0;
const TEMP_BOUND: f64 = 60.0;

/// A monitoring station: planar coordinates in km and elevation in m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteMeta {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub elevation: f64,
}

impl SiteMeta {
    pub fn new(id: impl Into<String>, x: f64, y: f64, elevation: f64) -> Self {
        Self {
            id: id.into(),
            x,
            y,
            elevation,
        }
    }

    pub fn distance(&self, other: &SiteMeta) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn validate(&self) -> Result<()> {
        if !self.x.is_finite() || !self.y.is_finite() {
            return Err(Error::InvalidDataset(format!(
                "site {} has non-finite coordinates",
                self.id
            )));
        }
        if !(ELEV_MIN..=ELEV_MAX).contains(&self.elevation) {
            return Err(Error::InvalidDataset(format!(
                "site {} elevation {} outside [{ELEV_MIN}, {ELEV_MAX}]",
                self.id, self.elevation
            )));
        }
        Ok(())
    }
}

/// Daily values `Y[t][l][i]` for `T` years, `L` days and `I` sites.
///
/// Year `t = 0` is calendar year `first_year`; day `l = 0` is the first day
/// of the window. Missing cells carry `NaN` in `values` and `true` in the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    sites: Vec<SiteMeta>,
    n_years: usize,
    n_days: usize,
    values: Vec<f64>,
    missing: Vec<bool>,
    pub first_year: i32,
    pub day_of_year_offset: u32,
}

impl PanelDataset {
    /// Builds a panel from `values` laid out `[t][l][i]`; non-finite entries
    /// are treated as missing.
    pub fn new(
        sites: Vec<SiteMeta>,
        n_years: usize,
        n_days: usize,
        values: Vec<f64>,
        first_year: i32,
        day_of_year_offset: u32,
    ) -> Result<Self> {
        if n_years == 0 || n_days == 0 || sites.is_empty() {
            return Err(Error::EmptyPanel(format!(
                "T={n_years}, L={n_days}, I={}",
                sites.len()
            )));
        }
        let n = n_years * n_days * sites.len();
        if values.len() != n {
            return Err(Error::InvalidDataset(format!(
                "expected {n} values for T={n_years}, L={n_days}, I={}, got {}",
                sites.len(),
                values.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for s in &sites {
            s.validate()?;
            if !seen.insert(s.id.as_str()) {
                return Err(Error::InvalidDataset(format!("duplicate site id {}", s.id)));
            }
        }
        let missing: Vec<bool> = values.iter().map(|v| !v.is_finite()).collect();
        for (k, v) in values.iter().enumerate() {
            if v.is_finite() && v.abs() > TEMP_BOUND {
                let i = k % sites.len();
                return Err(Error::InvalidDataset(format!(
                    "value {v} at site {} outside [-{TEMP_BOUND}, {TEMP_BOUND}]",
                    sites[i].id
                )));
            }
        }
        let values = values
            .into_iter()
            .map(|v| if v.is_finite() { v } else { f64::NAN })
            .collect();
        Ok(Self {
            sites,
            n_years,
            n_days,
            values,
            missing,
            first_year,
            day_of_year_offset,
        })
    }

    pub fn sites(&self) -> &[SiteMeta] {
        &self.sites
    }
    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }
    pub fn n_years(&self) -> usize {
        self.n_years
    }
    pub fn n_days(&self) -> usize {
        self.n_days
    }

    #[inline]
    fn index(&self, t: usize, l: usize, i: usize) -> usize {
        (t * self.n_days + l) * self.sites.len() + i
    }

    pub fn value(&self, t: usize, l: usize, i: usize) -> Option<f64> {
        let k = self.index(t, l, i);
        (!self.missing[k]).then(|| self.values[k])
    }

    /// Raw value, `NaN` when missing.
    pub fn raw(&self, t: usize, l: usize, i: usize) -> f64 {
        self.values[self.index(t, l, i)]
    }

    pub fn is_missing(&self, t: usize, l: usize, i: usize) -> bool {
        self.missing[self.index(t, l, i)]
    }

    pub fn site_index(&self, id: &str) -> Option<usize> {
        self.sites.iter().position(|s| s.id == id)
    }

    /// Fraction of non-missing cells per site.
    pub fn completeness(&self) -> Vec<f64> {
        let per = (self.n_years * self.n_days) as f64;
        (0..self.n_sites())
            .map(|i| {
                let mut n = 0usize;
                for t in 0..self.n_years {
                    for l in 0..self.n_days {
                        n += usize::from(!self.is_missing(t, l, i));
                    }
                }
                n as f64 / per
            })
            .collect()
    }

    pub fn site_is_complete(&self, i: usize) -> bool {
        (0..self.n_years).all(|t| (0..self.n_days).all(|l| !self.is_missing(t, l, i)))
    }

    /// Fitting requires every site-year to be fully observed.
    pub fn check_fit_ready(&self) -> Result<()> {
        let incomplete: Vec<&str> = (0..self.n_sites())
            .filter(|&i| !self.site_is_complete(i))
            .map(|i| self.sites[i].id.as_str())
            .collect();
        if incomplete.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidDataset(format!(
                "sites with missing values cannot be fitted: {}",
                incomplete.join(", ")
            )))
        }
    }

    /// Keeps only the listed site indices, in the given order.
    pub fn subset_sites(&self, keep: &[usize]) -> Result<Self> {
        let sites: Vec<SiteMeta> = keep.iter().map(|&i| self.sites[i].clone()).collect();
        let mut values = Vec::with_capacity(self.n_years * self.n_days * keep.len());
        for t in 0..self.n_years {
            for l in 0..self.n_days {
                for &i in keep {
                    values.push(self.raw(t, l, i));
                }
            }
        }
        Self::new(
            sites,
            self.n_years,
            self.n_days,
            values,
            self.first_year,
            self.day_of_year_offset,
        )
    }

    pub fn without_site(&self, drop: usize) -> Result<Self> {
        let keep: Vec<usize> = (0..self.n_sites()).filter(|&i| i != drop).collect();
        self.subset_sites(&keep)
    }

    pub fn complete_sites(&self) -> Result<Self> {
        let keep: Vec<usize> = (0..self.n_sites())
            .filter(|&i| self.site_is_complete(i))
            .collect();
        if keep.is_empty() {
            return Err(Error::EmptyPanel("no fully observed site".into()));
        }
        self.subset_sites(&keep)
    }

    pub fn site_series(&self, i: usize) -> SiteSeries {
        let mut values = Vec::with_capacity(self.n_years * self.n_days);
        for t in 0..self.n_years {
            for l in 0..self.n_days {
                values.push(self.raw(t, l, i));
            }
        }
        SiteSeries {
            site: self.sites[i].clone(),
            n_years: self.n_years,
            n_days: self.n_days,
            values,
        }
    }
}

/// One site's `[T × L]` series; `NaN` marks missing days.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteSeries {
    pub site: SiteMeta,
    pub n_years: usize,
    pub n_days: usize,
    pub values: Vec<f64>,
}

impl SiteSeries {
    pub fn get(&self, t: usize, l: usize) -> Option<f64> {
        let v = self.values[t * self.n_days + l];
        v.is_finite().then_some(v)
    }

    pub fn set(&mut self, t: usize, l: usize, v: f64) {
        self.values[t * self.n_days + l] = v;
    }

    pub fn missing_cells(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for t in 0..self.n_years {
            for l in 0..self.n_days {
                if self.get(t, l).is_none() {
                    out.push((t, l));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sites(n: usize) -> Vec<SiteMeta> {
        (0..n)
            .map(|i| SiteMeta::new(format!("s{i}"), i as f64 * 10.0, 0.0, 300.0))
            .collect()
    }

    #[test]
    fn rejects_empty_and_mismatched() {
        assert!(matches!(
            PanelDataset::new(sites(1), 0, 3, vec![], 2000, 0),
            Err(Error::EmptyPanel(_))
        ));
        assert!(PanelDataset::new(sites(2), 1, 3, vec![20.0; 5], 2000, 0).is_err());
    }

    #[test]
    fn rejects_out_of_range_values_and_elevation() {
        assert!(PanelDataset::new(sites(1), 1, 2, vec![20.0, 75.0], 2000, 0).is_err());
        let bad = vec![SiteMeta::new("a", 0.0, 0.0, 9500.0)];
        assert!(PanelDataset::new(bad, 1, 1, vec![20.0], 2000, 0).is_err());
        let dup = vec![
            SiteMeta::new("a", 0.0, 0.0, 10.0),
            SiteMeta::new("a", 1.0, 0.0, 10.0),
        ];
        assert!(PanelDataset::new(dup, 1, 1, vec![20.0, 21.0], 2000, 0).is_err());
    }

    #[test]
    fn missing_mask_and_subset() {
        let v = vec![20.0, f64::NAN, 21.0, 22.0];
        let d = PanelDataset::new(sites(2), 1, 2, v, 2000, 0).unwrap();
        assert!(d.is_missing(0, 0, 1));
        assert_eq!(d.value(0, 1, 1), Some(22.0));
        assert!(d.check_fit_ready().is_err());
        let c = d.complete_sites().unwrap();
        assert_eq!(c.n_sites(), 1);
        assert_eq!(c.sites()[0].id, "s0");
        assert!(c.check_fit_ready().is_ok());
        assert_eq!(d.completeness(), vec![1.0, 0.5]);
    }
}
