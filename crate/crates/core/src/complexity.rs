//! Closed-form sample sizes and kernel indices.
//!
//! Sizes can exceed the `f64` range for small `epsilon`, so every formula is evaluated in
//! `log10` and returned as a [`Magnitude`].

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A positive number stored by its base-10 logarithm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Magnitude {
    pub log10: f64,
}

impl Magnitude {
    fn from_ln(ln: f64) -> Self {
        Magnitude {
            log10: ln / std::f64::consts::LN_10,
        }
    }

    /// The plain value; infinite once it leaves the `f64` range.
    pub fn value(&self) -> f64 {
        10f64.powf(self.log10)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexityBudget {
    pub epsilon: f64,
    pub delta: f64,
    /// Parameter-space dimension.
    pub m: usize,
    /// Box side length.
    pub side: f64,
    /// Twice the bound on `|f|`.
    pub b: f64,
    /// Lipschitz-type continuity constant.
    pub c_l: f64,
    /// Number of local terms.
    pub m_terms: usize,
    /// Continuity exponent: `eta = epsilon^k / (4 C_L)`.
    pub k: f64,
    /// Replaces `ln(2 / delta)` when set.
    #[serde(default)]
    pub log_factor: Option<f64>,
}

impl ComplexityBudget {
    /// Settings of the comparison with the prior exponential bound: `L = 2`, `C_L = 1`,
    /// `k = 1`, `B = M` and `ln(2/delta) = 1`.
    pub fn comparison(m: usize, b: f64, epsilon: f64) -> Self {
        ComplexityBudget {
            epsilon,
            delta: 2.0 / std::f64::consts::E,
            m,
            side: 2.0,
            b,
            c_l: 1.0,
            m_terms: b.round().max(1.0) as usize,
            k: 1.0,
            log_factor: Some(1.0),
        }
    }

    pub fn check(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be positive, got {v}")))
            }
        };
        positive(self.epsilon, "epsilon")?;
        positive(self.side, "L")?;
        positive(self.b, "B")?;
        positive(self.c_l, "C_L")?;
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if self.m_terms == 0 {
            return Err(invalid("M must be at least 1"));
        }
        if !(self.k.is_finite() && self.k >= 0.0) {
            return Err(invalid(format!("k must be nonnegative, got {}", self.k)));
        }
        if let Some(f) = self.log_factor {
            positive(f, "log factor")?;
        }
        Ok(())
    }

    /// `ln(2 / delta)` or its override.
    pub fn log_two_over_delta(&self) -> f64 {
        self.log_factor.unwrap_or_else(|| (2.0 / self.delta).ln())
    }

    pub fn eta(&self) -> f64 {
        self.epsilon.powf(self.k) / (4.0 * self.c_l)
    }

    pub fn c(&self) -> f64 {
        c_const(self.m, self.side, self.eta())
    }
}

/// `epsilon / (4 C_L)`.
pub fn eta_lipschitz(epsilon: f64, c_l: f64) -> Result<f64> {
    if !(epsilon > 0.0 && c_l > 0.0) {
        return Err(invalid("epsilon and C_L must be positive"));
    }
    Ok(epsilon / (4.0 * c_l))
}

/// `C = 4 m L^2 / (pi^2 eta^2)`.
pub fn c_const(m: usize, side: f64, eta: f64) -> f64 {
    4.0 * m as f64 * side * side / (std::f64::consts::PI.powi(2) * eta * eta)
}

/// Smallest integer `Lambda` with `Lambda^m >= 4 B C^m / epsilon`.
pub fn lambda_min(b: f64, c: f64, m: usize, epsilon: f64) -> Result<u64> {
    if !(b > 0.0 && c > 0.0 && epsilon > 0.0 && m >= 1) {
        return Err(invalid("B, C, epsilon and m must be positive"));
    }
    let ln = ((4.0 * b).ln() + m as f64 * c.ln() - epsilon.ln()) / m as f64;
    // Guard against values like 800.0000000000001.
    let v = (ln.exp() * (1.0 - 1e-12)).ceil();
    if v > u64::MAX as f64 {
        return Err(invalid("Lambda exceeds the integer range"));
    }
    Ok(v as u64)
}

/// `32 B^4 C^{2m} epsilon^-4 ln(2/delta)`.
pub fn n_fejer(budget: &ComplexityBudget) -> Result<Magnitude> {
    budget.check()?;
    Ok(fejer_ln(budget, budget.log_two_over_delta()))
}

fn fejer_ln(budget: &ComplexityBudget, log_factor: f64) -> Magnitude {
    let m = budget.m as f64;
    Magnitude::from_ln(
        32f64.ln() + 4.0 * budget.b.ln() + 2.0 * m * budget.c().ln() - 4.0 * budget.epsilon.ln()
            + log_factor.ln(),
    )
}

/// [`n_fejer`] for `M` functions at once: `ln(2/delta)` becomes `ln(2M/delta)`. `b` and the
/// continuity constants are read as the maxima over the functions.
pub fn n_fejer_multi(budget: &ComplexityBudget) -> Result<Magnitude> {
    budget.check()?;
    Ok(fejer_ln(
        budget,
        budget.log_two_over_delta() + (budget.m_terms as f64).ln(),
    ))
}

/// `C_g = (m L^2 / (pi eta^2)) ln(2 m B / epsilon)`.
pub fn c_gaussian(budget: &ComplexityBudget) -> f64 {
    let m = budget.m as f64;
    let eta = budget.eta();
    m * budget.side.powi(2) / (std::f64::consts::PI * eta * eta)
        * (2.0 * m * budget.b / budget.epsilon).ln()
}

/// `2 B^2 C_g^m epsilon^-2 ln(2/delta)`; stated for `m >= 2` only.
pub fn n_gaussian(budget: &ComplexityBudget) -> Result<Magnitude> {
    budget.check()?;
    if budget.m < 2 {
        return Err(invalid("the Gaussian sample size is stated for m >= 2"));
    }
    let cg = c_gaussian(budget);
    Ok(Magnitude::from_ln(
        2f64.ln() + 2.0 * budget.b.ln() + budget.m as f64 * cg.ln() - 2.0 * budget.epsilon.ln()
            + budget.log_two_over_delta().ln(),
    ))
}

/// Prior bound `N_0 = B^2 / epsilon^2 (2m + 1)^{1/epsilon^2}`.
pub fn n_prior(budget: &ComplexityBudget) -> Result<Magnitude> {
    if !(budget.b > 0.0 && budget.epsilon > 0.0) {
        return Err(invalid("B and epsilon must be positive"));
    }
    let e2 = budget.epsilon * budget.epsilon;
    Ok(Magnitude::from_ln(
        2.0 * budget.b.ln() - e2.ln() + (2.0 * budget.m as f64 + 1.0).ln() / e2,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKernel {
    Fejer,
    Gaussian,
}

/// `N_kernel / N_0`.
pub fn compare_ratio(budget: &ComplexityBudget, kernel: BoundKernel) -> Result<Magnitude> {
    let n = match kernel {
        BoundKernel::Fejer => n_fejer(budget)?,
        BoundKernel::Gaussian => n_gaussian(budget)?,
    };
    Ok(Magnitude {
        log10: n.log10 - n_prior(budget)?.log10,
    })
}

/// Sample size making `|f_N(x) - f * F(x)| < epsilon / 2` hold with probability `1 - delta`
/// at a fixed point: `2 B^2 Lambda^{2m} epsilon^-2 ln(2/delta)`.
pub fn n_mcdiarmid(b: f64, lambda: u32, m: usize, epsilon: f64, delta: f64) -> Result<f64> {
    if !(b > 0.0 && epsilon > 0.0 && delta > 0.0 && delta < 1.0 && lambda >= 1) {
        return Err(invalid("need B, epsilon, Lambda > 0 and delta in (0, 1)"));
    }
    Ok(2.0 * b * b * (lambda as f64).powi(2 * m as i32) / (epsilon * epsilon) * (2.0 / delta).ln())
}

/// Upper bound `2 exp(-2 N epsilon^2 / Lambda^{2m})` on `P(|Tr sigma_N(x) - 1| >= epsilon)`.
pub fn trace_concentration_bound(n: usize, lambda: u32, m: usize, epsilon: f64) -> f64 {
    (2.0 * (-2.0 * n as f64 * epsilon * epsilon / (lambda as f64).powi(2 * m as i32)).exp())
        .min(1.0)
}

/// Everything above for one budget, as printed by the CLI.
#[derive(Clone, Debug, Serialize)]
pub struct ComplexityReport {
    pub budget: ComplexityBudget,
    pub eta: f64,
    pub c: f64,
    pub lambda_min: u64,
    pub n_fejer: Magnitude,
    pub n_fejer_multi: Magnitude,
    pub c_gaussian: Option<f64>,
    pub n_gaussian: Option<Magnitude>,
    pub n_prior: Magnitude,
    pub ratio_fejer: Magnitude,
    pub ratio_gaussian: Option<Magnitude>,
}

pub fn report(budget: &ComplexityBudget) -> Result<ComplexityReport> {
    budget.check()?;
    let gaussian = budget.m >= 2;
    Ok(ComplexityReport {
        budget: *budget,
        eta: budget.eta(),
        c: budget.c(),
        lambda_min: lambda_min(budget.b, budget.c(), budget.m.max(1), budget.epsilon)?,
        n_fejer: n_fejer(budget)?,
        n_fejer_multi: n_fejer_multi(budget)?,
        c_gaussian: gaussian.then(|| c_gaussian(budget)),
        n_gaussian: if gaussian {
            Some(n_gaussian(budget)?)
        } else {
            None
        },
        n_prior: n_prior(budget)?,
        ratio_fejer: compare_ratio(budget, BoundKernel::Fejer)?,
        ratio_gaussian: if gaussian {
            Some(compare_ratio(budget, BoundKernel::Gaussian)?)
        } else {
            None
        },
    })
}
