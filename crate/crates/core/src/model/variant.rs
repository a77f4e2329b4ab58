use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::state::GpField;
use crate::error::{Error, Result};

/// Which spatial fields carry a Gaussian process, plus structural switches.
///
/// A disabled field is held at its global value at every site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelVariant {
    pub gp_beta0: bool,
    pub gp_alpha: bool,
    pub gp_rho: bool,
    pub gp_sigma: bool,
    /// Hold `ρψ = 0` instead of sampling it.
    pub pin_rho_psi_zero: bool,
    /// Include the yearly effects `ψ_t`; when off, `ψ ≡ 0`.
    pub year_effects: bool,
    /// Include the elevation coefficient; when off, `β3 ≡ 0`.
    pub elevation_effect: bool,
}

impl Default for ModelVariant {
    fn default() -> Self {
        Self::full()
    }
}

impl ModelVariant {
    pub fn with_gps(beta0: bool, alpha: bool, rho: bool, sigma: bool) -> Self {
        Self {
            gp_beta0: beta0,
            gp_alpha: alpha,
            gp_rho: rho,
            gp_sigma: sigma,
            pin_rho_psi_zero: true,
            year_effects: true,
            elevation_effect: true,
        }
    }

    /// `M0`: no spatial process.
    pub fn none() -> Self {
        Self::with_gps(false, false, false, false)
    }

    /// `M4`: all four spatial processes.
    pub fn full() -> Self {
        Self::with_gps(true, true, true, true)
    }

    pub fn has_gp(&self, f: GpField) -> bool {
        match f {
            GpField::Beta0 => self.gp_beta0,
            GpField::Alpha => self.gp_alpha,
            GpField::Rho => self.gp_rho,
            GpField::Sig2 => self.gp_sigma,
        }
    }

    pub fn gp_count(&self) -> usize {
        GpField::ALL.iter().filter(|&&f| self.has_gp(f)).count()
    }

    pub fn gp_fields(&self) -> impl Iterator<Item = GpField> + '_ {
        GpField::ALL.into_iter().filter(|&f| self.has_gp(f))
    }

    /// Canonical label, e.g. `M0`, `M2:beta0,sigma`, `M4`.
    pub fn label(&self) -> String {
        match self.gp_count() {
            0 => "M0".into(),
            4 => "M4".into(),
            n => {
                let names: Vec<&str> = self.gp_fields().map(GpField::name).collect();
                format!("M{n}:{}", names.join(","))
            }
        }
    }

    /// The nine variants compared in the model lattice, in table order.
    pub fn standard_lattice() -> Vec<ModelVariant> {
        [
            "M0",
            "M1:beta0",
            "M1:alpha",
            "M1:rho",
            "M1:sigma",
            "M2:beta0,sigma",
            "M3:beta0,alpha,sigma",
            "M3:alpha,rho,sigma",
            "M4",
        ]
        .iter()
        .map(|s| s.parse().expect("lattice labels parse"))
        .collect()
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::InvalidConfig(format!("variant {s:?}: {why}"));
        let s = s.trim();
        let (head, tail) = match s.split_once(':') {
            Some((h, t)) => (h, Some(t)),
            None => (s, None),
        };
        let n: usize = head
            .strip_prefix(['M', 'm'])
            .and_then(|d| d.parse().ok())
            .filter(|&n| n <= 4)
            .ok_or_else(|| bad("expected M0..M4"))?;
        let mut v = ModelVariant::none();
        match (n, tail) {
            (0, None) => return Ok(v),
            (4, None) => return Ok(ModelVariant::full()),
            (_, None) => return Err(bad("missing field list")),
            (_, Some(list)) => {
                for name in list.split(',').map(str::trim) {
                    let flag = match name {
                        "beta0" => &mut v.gp_beta0,
                        "alpha" => &mut v.gp_alpha,
                        "rho" => &mut v.gp_rho,
                        "sigma" => &mut v.gp_sigma,
                        _ => return Err(bad(&format!("unknown field {name:?}"))),
                    };
                    if *flag {
                        return Err(bad(&format!("field {name:?} listed twice")));
                    }
                    *flag = true;
                }
            }
        }
        if v.gp_count() != n {
            return Err(bad(&format!("M{n} needs {n} fields")));
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_label_roundtrip() {
        for v in ModelVariant::standard_lattice() {
            let back: ModelVariant = v.label().parse().unwrap();
            assert_eq!(back, v);
        }
        let v: ModelVariant = "M3:beta0,alpha,sigma".parse().unwrap();
        assert!(v.gp_beta0 && v.gp_alpha && !v.gp_rho && v.gp_sigma);
        assert_eq!("M4".parse::<ModelVariant>().unwrap(), ModelVariant::full());
        assert_eq!(
            "M4:beta0,alpha,rho,sigma"
                .parse::<ModelVariant>()
                .unwrap()
                .label(),
            "M4"
        );
    }

    #[test]
    fn rejects_malformed() {
        for s in [
            "M5",
            "M1",
            "M2:beta0",
            "M1:gamma",
            "M2:beta0,beta0",
            "X0",
            "M0:alpha",
        ] {
            assert!(s.parse::<ModelVariant>().is_err(), "{s}");
        }
    }

    #[test]
    fn lattice_has_nine_distinct_rows() {
        let l = ModelVariant::standard_lattice();
        assert_eq!(l.len(), 9);
        let set: std::collections::HashSet<_> = l.iter().collect();
        assert_eq!(set.len(), 9);
    }
}
