//! Boundary conditions admissible for the degenerate operator.

use std::fmt;

use crate::diffusion::Degeneracy;
use crate::error::{Error, Result};

/// Boundary condition at the two endpoints.
///
/// `Robin` couples the trace of u with the trace of the weighted flux a u_x:
/// beta0 u(-1) + beta1 (a u_x)(-1) = 0 and gamma0 u(1) + gamma1 (a u_x)(1) = 0,
/// admissible only in the weakly degenerate class and under the sign
/// conditions beta0 beta1 <= 0 and gamma0 gamma1 >= 0 (both pairs nonzero).
/// `WeightedNeumann` imposes a u_x -> 0 at both endpoints and is the natural
/// condition in the strongly degenerate class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryCondition {
    Robin {
        beta0: f64,
        beta1: f64,
        gamma0: f64,
        gamma1: f64,
    },
    WeightedNeumann,
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryCondition::Robin {
                beta0,
                beta1,
                gamma0,
                gamma1,
            } => write!(f, "Robin({beta0}, {beta1}, {gamma0}, {gamma1})"),
            BoundaryCondition::WeightedNeumann => write!(f, "WeightedNeumann"),
        }
    }
}

impl BoundaryCondition {
    pub fn robin(beta0: f64, beta1: f64, gamma0: f64, gamma1: f64) -> Result<Self> {
        let bc = BoundaryCondition::Robin {
            beta0,
            beta1,
            gamma0,
            gamma1,
        };
        bc.validate()?;
        Ok(bc)
    }

    pub fn validate(&self) -> Result<()> {
        if let BoundaryCondition::Robin {
            beta0,
            beta1,
            gamma0,
            gamma1,
        } = *self
        {
            for v in [beta0, beta1, gamma0, gamma1] {
                if !v.is_finite() {
                    return Err(Error::InvalidBoundary("non-finite coefficient".into()));
                }
            }
            if beta0 == 0.0 && beta1 == 0.0 {
                return Err(Error::InvalidBoundary(
                    "left pair (beta0, beta1) must not both vanish".into(),
                ));
            }
            if gamma0 == 0.0 && gamma1 == 0.0 {
                return Err(Error::InvalidBoundary(
                    "right pair (gamma0, gamma1) must not both vanish".into(),
                ));
            }
            if beta0 * beta1 > 0.0 {
                return Err(Error::InvalidBoundary(format!(
                    "need beta0 * beta1 <= 0, got {beta0} * {beta1}"
                )));
            }
            if gamma0 * gamma1 < 0.0 {
                return Err(Error::InvalidBoundary(format!(
                    "need gamma0 * gamma1 >= 0, got {gamma0} * {gamma1}"
                )));
            }
        }
        Ok(())
    }

    /// Robin pairs with WDeg; WeightedNeumann pairs with SDeg.
    pub fn admissible_for(&self, class: Degeneracy) -> bool {
        matches!(
            (self, class),
            (BoundaryCondition::Robin { .. }, Degeneracy::WDeg)
                | (BoundaryCondition::WeightedNeumann, Degeneracy::SDeg)
        )
    }

    pub fn check_compatibility(&self, class: Degeneracy) -> Result<()> {
        if self.admissible_for(class) {
            Ok(())
        } else {
            Err(Error::BoundaryMismatch {
                bc: self.to_string(),
                class: class.to_string(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_conditions_enforced() {
        assert!(BoundaryCondition::robin(1.0, -1.0, 1.0, 1.0).is_ok());
        assert!(BoundaryCondition::robin(1.0, 0.0, 1.0, 0.0).is_ok());
        assert!(BoundaryCondition::robin(0.0, 1.0, 1.0, 0.0).is_ok());
        // beta0 * beta1 > 0 violates dissipativity on the left.
        assert!(BoundaryCondition::robin(1.0, 1.0, 1.0, 1.0).is_err());
        // gamma pair must not both vanish.
        assert!(BoundaryCondition::robin(1.0, -1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn compatibility_pairing() {
        let robin = BoundaryCondition::robin(1.0, -1.0, 1.0, 1.0).unwrap();
        assert!(robin.admissible_for(Degeneracy::WDeg));
        assert!(!robin.admissible_for(Degeneracy::SDeg));
        assert!(BoundaryCondition::WeightedNeumann.admissible_for(Degeneracy::SDeg));
        assert!(!BoundaryCondition::WeightedNeumann.admissible_for(Degeneracy::WDeg));
    }
}
