//! Model parameters and motility laws.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;

/// Signal-dependent motility γ(v).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum Motility {
    /// γ(v) = e^{-χ v}
    Exponential,
    /// γ(v) = χ / v^k
    Algebraic { k: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    chi: f64,
    motility: Motility,
    sigma: f64,
}

impl ModelParams {
    pub fn new(chi: f64, motility: Motility, sigma: f64) -> Result<Self> {
        if !(chi > 0.0 && chi.is_finite()) {
            return Err(Error::Domain(format!("chi must be positive, got {chi}")));
        }
        if let Motility::Algebraic { k } = motility {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::Domain(format!(
                    "algebraic exponent must be positive, got {k}"
                )));
            }
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::Domain(format!(
                "logistic rate must be nonnegative, got {sigma}"
            )));
        }
        Ok(Self {
            chi,
            motility,
            sigma,
        })
    }

    /// Exponential motility, no logistic source.
    pub fn exponential(chi: f64) -> Result<Self> {
        Self::new(chi, Motility::Exponential, 0.0)
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn motility(&self) -> Motility {
        self.motility
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// γ at a single signal value; `None` outside the law's domain.
    pub fn gamma(&self, v: f64) -> Option<f64> {
        match self.motility {
            Motility::Exponential => Some((-self.chi * v).exp()),
            Motility::Algebraic { k } => (v > 0.0).then(|| self.chi / v.powf(k)),
        }
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            chi: 1.0,
            motility: Motility::Exponential,
            sigma: 0.0,
        }
    }
}

/// Cellwise motility γ(v).
pub fn motility_eval(params: &ModelParams, v: &Field) -> Result<Field> {
    v.check_finite()?;
    let mut out = Vec::with_capacity(v.len());
    for (k, &vk) in v.values().iter().enumerate() {
        match params.gamma(vk) {
            Some(g) => out.push(g),
            None => {
                return Err(Error::Domain(format!(
                    "algebraic motility needs v > 0, got {vk} at cell {k}"
                )))
            }
        }
    }
    Field::new(*v.grid(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use proptest::prelude::*;

    fn grid() -> Grid {
        Grid::unit_square(3).unwrap()
    }

    #[test]
    fn examples() {
        let p = ModelParams::exponential(1.0).unwrap();
        let g = motility_eval(&p, &Field::zeros(grid())).unwrap();
        assert!(g.values().iter().all(|&x| x == 1.0));

        let g = motility_eval(&p, &Field::constant(grid(), 2f64.ln())).unwrap();
        assert!(g.values().iter().all(|&x| (x - 0.5).abs() < 1e-15));

        let p = ModelParams::new(1.0, Motility::Algebraic { k: 1.0 }, 0.0).unwrap();
        let g = motility_eval(&p, &Field::constant(grid(), 2.0)).unwrap();
        assert!(g.values().iter().all(|&x| x == 0.5));
    }

    #[test]
    fn algebraic_rejects_nonpositive_signal() {
        let p = ModelParams::new(1.0, Motility::Algebraic { k: 2.0 }, 0.0).unwrap();
        assert!(matches!(
            motility_eval(&p, &Field::zeros(grid())),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn invalid_params() {
        assert!(ModelParams::exponential(0.0).is_err());
        assert!(ModelParams::new(1.0, Motility::Algebraic { k: 0.0 }, 0.0).is_err());
        assert!(ModelParams::new(1.0, Motility::Exponential, -0.1).is_err());
    }

    proptest! {
        #[test]
        fn monotone_and_positive(
            chi in 0.1f64..5.0,
            k in 0.2f64..3.0,
            a in 0.01f64..20.0,
            d in 0.0f64..20.0,
        ) {
            for p in [
                ModelParams::exponential(chi).unwrap(),
                ModelParams::new(chi, Motility::Algebraic { k }, 0.0).unwrap(),
            ] {
                let lo = p.gamma(a).unwrap();
                let hi = p.gamma(a + d).unwrap();
                prop_assert!(lo > 0.0 && hi > 0.0);
                prop_assert!(hi <= lo);
            }
            prop_assert!(ModelParams::exponential(chi).unwrap().gamma(0.0).unwrap() <= 1.0);
        }
    }
}
