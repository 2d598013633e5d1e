use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Dirichlet belief over the three answer probabilities of a query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirichletPosterior {
    pub alpha: [f64; 3],
}

impl Default for DirichletPosterior {
    fn default() -> Self {
        DirichletPosterior { alpha: [1.0; 3] }
    }
}

impl DirichletPosterior {
    pub fn new(alpha: [f64; 3]) -> Result<Self> {
        if alpha.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
            return Err(Error::arg(format!("Dirichlet parameters {alpha:?} must be positive")));
        }
        Ok(DirichletPosterior { alpha })
    }

    pub fn update(&self, counts: [usize; 3]) -> Self {
        posterior_update(self, counts)
    }

    pub fn mean(&self) -> [f64; 3] {
        posterior_mean(self)
    }

    pub fn variance(&self) -> [f64; 3] {
        posterior_variance(self)
    }

    pub fn density(&self, theta: [f64; 3]) -> Result<f64> {
        dirichlet_density(self, theta)
    }

    /// `ln Beta(alpha) = sum ln Gamma(alpha_i) - ln Gamma(sum alpha_i)`.
    pub fn ln_beta(&self) -> f64 {
        self.alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>() - ln_gamma(self.alpha.iter().sum())
    }
}

pub fn dirichlet_density(d: &DirichletPosterior, theta: [f64; 3]) -> Result<f64> {
    if theta.iter().any(|&t| !(t >= 0.0)) || (theta.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::arg(format!("{theta:?} is not on the probability simplex")));
    }
    let mut log_p = -d.ln_beta();
    for (&a, &t) in d.alpha.iter().zip(&theta) {
        if a != 1.0 {
            if t == 0.0 {
                return Ok(if a > 1.0 { 0.0 } else { f64::INFINITY });
            }
            log_p += (a - 1.0) * t.ln();
        }
    }
    Ok(log_p.exp())
}

pub fn posterior_update(prior: &DirichletPosterior, counts: [usize; 3]) -> DirichletPosterior {
    let mut alpha = prior.alpha;
    for (a, m) in alpha.iter_mut().zip(counts) {
        *a += m as f64;
    }
    DirichletPosterior { alpha }
}

pub fn posterior_mean(d: &DirichletPosterior) -> [f64; 3] {
    let a0: f64 = d.alpha.iter().sum();
    d.alpha.map(|a| a / a0)
}

pub fn posterior_variance(d: &DirichletPosterior) -> [f64; 3] {
    let a0: f64 = d.alpha.iter().sum();
    d.alpha.map(|a| a * (a0 - a) / (a0 * a0 * (a0 + 1.0)))
}
