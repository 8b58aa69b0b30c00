//! Boundary reaction rate laws and stoichiometric coupling.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Stoichiometric coefficients of `2 CO + O2 -> 2 CO2`.
pub const CO_OXIDATION_STOICHIOMETRY: [f64; 3] = [-2.0, -1.0, 1.0];

/// A scalar reaction rate `R(Y)` of the species values at a boundary point.
pub trait RateLaw: Send + Sync + fmt::Debug {
    fn rate(&self, y: &[f64]) -> f64;

    /// Writes `dR/dY_s` into `grad`.
    fn gradient(&self, y: &[f64], grad: &mut [f64]);

    fn describe(&self) -> String;
}

/// `R(Y) = k * prod_s Y_s^{order_s}`.
#[derive(Clone, Debug, PartialEq)]
pub struct MassAction {
    pub k: f64,
    pub orders: Vec<u32>,
}

impl MassAction {
    pub fn new(k: f64, orders: Vec<u32>) -> Self {
        Self { k, orders }
    }
}

impl RateLaw for MassAction {
    fn rate(&self, y: &[f64]) -> f64 {
        self.orders
            .iter()
            .zip(y)
            .fold(self.k, |acc, (&p, &v)| acc * v.powi(p as i32))
    }

    fn gradient(&self, y: &[f64], grad: &mut [f64]) {
        for (s, g) in grad.iter_mut().enumerate() {
            let p = self.orders[s];
            if p == 0 {
                *g = 0.0;
                continue;
            }
            let mut d = self.k * p as f64 * y[s].powi(p as i32 - 1);
            for (t, (&q, &v)) in self.orders.iter().zip(y).enumerate() {
                if t != s {
                    d *= v.powi(q as i32);
                }
            }
            *g = d;
        }
    }

    fn describe(&self) -> String {
        format!("mass_action(k={:e}, orders={:?})", self.k, self.orders)
    }
}

/// Rate law plus the stoichiometric vector that distributes it over species.
///
/// The outward boundary flux density of species `s` is `-nu_s * R(Y)`, so
/// consumed species (`nu_s < 0`) leave the domain when `R > 0`.
#[derive(Clone)]
pub struct ReactionModel {
    law: Arc<dyn RateLaw>,
    stoichiometry: Vec<f64>,
    scale: f64,
}

impl fmt::Debug for ReactionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReactionModel")
            .field("law", &self.law.describe())
            .field("stoichiometry", &self.stoichiometry)
            .field("scale", &self.scale)
            .finish()
    }
}

impl ReactionModel {
    pub fn new(law: impl RateLaw + 'static, stoichiometry: Vec<f64>) -> Self {
        Self {
            law: Arc::new(law),
            stoichiometry,
            scale: 1.0,
        }
    }

    /// `R = k Y_CO^2 Y_O2` with species order (CO, O2, CO2).
    pub fn mass_action_co_oxidation(k: f64) -> Self {
        Self::new(
            MassAction::new(k, vec![2, 1, 0]),
            CO_OXIDATION_STOICHIOMETRY.to_vec(),
        )
    }

    /// Builds a model from its configuration name.
    pub fn from_name(kind: &str, k: f64) -> Result<Self> {
        match kind {
            "mass_action_co_ox" | "mass_action_co_oxidation" => Ok(Self::mass_action_co_oxidation(k)),
            // first order in each reactant
            "mass_action_linear" => Ok(Self::new(
                MassAction::new(k, vec![1, 1, 0]),
                CO_OXIDATION_STOICHIOMETRY.to_vec(),
            )),
            other => Err(Error::UnknownModel(other.to_string())),
        }
    }

    /// Same model with the rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            law: Arc::clone(&self.law),
            stoichiometry: self.stoichiometry.clone(),
            scale: self.scale * factor,
        }
    }

    pub fn species_count(&self) -> usize {
        self.stoichiometry.len()
    }

    pub fn stoichiometry(&self) -> &[f64] {
        &self.stoichiometry
    }

    pub fn rate(&self, y: &[f64]) -> f64 {
        self.scale * self.law.rate(y)
    }

    pub fn rate_gradient(&self, y: &[f64], grad: &mut [f64]) {
        self.law.gradient(y, grad);
        grad.iter_mut().for_each(|g| *g *= self.scale);
    }

    /// Outward normal flux density per species.
    pub fn boundary_flux(&self, y: &[f64]) -> Vec<f64> {
        let r = self.rate(y);
        self.stoichiometry.iter().map(|nu| -nu * r).collect()
    }

    pub fn describe(&self) -> String {
        if self.scale == 1.0 {
            self.law.describe()
        } else {
            format!("{:e} * {}", self.scale, self.law.describe())
        }
    }
}
