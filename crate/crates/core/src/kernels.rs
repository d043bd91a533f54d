//! Translational kernels on the periodic box and numerical checks of the three
//! positive-good-kernel conditions: positivity with a polynomial sup bound, unit
//! normalization against the sampling measure, and tail mass decaying like `1/index`.
//!
//! All kernels take a *displacement* `x - x_i`; it is wrapped into the box before
//! evaluation, so every kernel is periodic with period `L` in each coordinate.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::param_space::{wrap_coord, Density, ParamPoint, ParamSpace};
use crate::stats::{linear_fit, pairwise_sum_by};

/// Below `|x| < NEAR_ZERO * L` the sine ratios switch to their second-order series.
const NEAR_ZERO: f64 = 1e-8;
/// Total quadrature cells allowed in a PGK check or a convolution.
const QUADRATURE_BUDGET: usize = 100_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelKind {
    /// Rectangular Fejér kernel with cutoff `lambda`.
    Fejer { lambda: u32 },
    /// One-dimensional Dirichlet kernel; sign-indefinite, kept as a counterexample.
    Dirichlet { lambda: u32 },
    /// Gaussian of width parameter `bandwidth`, periodized over image cells.
    GaussianPeriodic { bandwidth: f64 },
    /// `base` multiplied by the importance weight `rho_0 / rho` of the space's density.
    Weighted { base: Box<KernelKind> },
}

impl KernelKind {
    pub fn name(&self) -> &'static str {
        match self {
            KernelKind::Fejer { .. } => "fejer",
            KernelKind::Dirichlet { .. } => "dirichlet",
            KernelKind::GaussianPeriodic { .. } => "gaussian",
            KernelKind::Weighted { .. } => "weighted",
        }
    }
}

#[derive(Clone, Debug)]
pub struct KernelSpec {
    kind: KernelKind,
    space: ParamSpace,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, space: ParamSpace) -> Result<Self> {
        validate_kind(&kind, &space, false)?;
        let spec = KernelSpec { kind, space };
        if let KernelKind::Weighted { .. } = spec.kind {
            spec.check_weight()?;
        }
        Ok(spec)
    }

    pub fn fejer(lambda: u32, space: ParamSpace) -> Result<Self> {
        Self::new(KernelKind::Fejer { lambda }, space)
    }

    pub fn dirichlet(lambda: u32, space: ParamSpace) -> Result<Self> {
        Self::new(KernelKind::Dirichlet { lambda }, space)
    }

    pub fn gaussian(bandwidth: f64, space: ParamSpace) -> Result<Self> {
        Self::new(KernelKind::GaussianPeriodic { bandwidth }, space)
    }

    pub fn weighted(base: KernelKind, space: ParamSpace) -> Result<Self> {
        Self::new(
            KernelKind::Weighted {
                base: Box::new(base),
            },
            space,
        )
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn space(&self) -> &ParamSpace {
        &self.space
    }

    /// Whether the kernel satisfies the positivity condition by construction.
    pub fn is_positive(&self) -> bool {
        !matches!(self.base_kind(), KernelKind::Dirichlet { .. })
    }

    fn base_kind(&self) -> &KernelKind {
        match &self.kind {
            KernelKind::Weighted { base } => base,
            k => k,
        }
    }

    /// The Fejér cutoff if this is an unweighted Fejér kernel.
    pub fn fejer_lambda(&self) -> Option<u32> {
        match self.kind {
            KernelKind::Fejer { lambda } => Some(lambda),
            _ => None,
        }
    }

    /// Scale parameter playing the role of the cutoff: `lambda` for the trigonometric
    /// kernels, `L / sqrt(h)` for the Gaussian.
    pub fn index(&self) -> f64 {
        match self.base_kind() {
            KernelKind::Fejer { lambda } | KernelKind::Dirichlet { lambda } => *lambda as f64,
            KernelKind::GaussianPeriodic { bandwidth } => self.space.side() / bandwidth.sqrt(),
            KernelKind::Weighted { .. } => unreachable!("nested weights are rejected"),
        }
    }

    /// Same family with the index multiplied by `factor`.
    pub fn scaled(&self, factor: u32) -> Result<Self> {
        let scale = |k: &KernelKind| match k {
            KernelKind::Fejer { lambda } => KernelKind::Fejer {
                lambda: lambda * factor,
            },
            KernelKind::Dirichlet { lambda } => KernelKind::Dirichlet {
                lambda: lambda * factor,
            },
            KernelKind::GaussianPeriodic { bandwidth } => KernelKind::GaussianPeriodic {
                bandwidth: bandwidth / (factor as f64).powi(2),
            },
            KernelKind::Weighted { .. } => unreachable!(),
        };
        let kind = match &self.kind {
            KernelKind::Weighted { base } => KernelKind::Weighted {
                base: Box::new(scale(base)),
            },
            k => scale(k),
        };
        Self::new(kind, self.space.clone())
    }

    /// Kernel value at the displacement `x`; `x` need not be wrapped.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let side = self.space.side();
        match &self.kind {
            KernelKind::Weighted { base } => {
                let mut w = x.to_vec();
                self.space.wrap_in_place(&mut w);
                self.space.weight(&w) * base_product(base, &w, side)
            }
            k => base_product(k, x, side),
        }
    }

    /// Per-coordinate factor tables on a midpoint grid when the kernel and the measure both
    /// factorize; `None` otherwise. Each entry is `(kernel factor, measure weight per cell)`.
    fn axis_tables(&self, cells: usize) -> Option<Vec<(Vec<f64>, Vec<f64>)>> {
        let side = self.space.side();
        let cell = side / cells as f64;
        let dim = self.space.dim();
        let xs: Vec<f64> = self.space.midpoints(cells).collect();
        let marginal_weights: Vec<Vec<f64>> = match self.space.density_kind() {
            Density::Uniform => vec![vec![cell / side; cells]; dim],
            Density::Product(marginals) => marginals
                .iter()
                .map(|m| {
                    let raw: Vec<f64> = xs.iter().map(|&x| m(x)).collect();
                    let total: f64 = raw.iter().sum();
                    raw.into_iter().map(|v| v / total).collect()
                })
                .collect(),
            Density::Joint(_) => return None,
        };
        let base = self.base_kind();
        Some(
            marginal_weights
                .into_iter()
                .map(|w| {
                    let k: Vec<f64> = xs
                        .iter()
                        .zip(&w)
                        .map(|(&x, &wi)| {
                            let f = base_factor(base, x, side);
                            if matches!(self.kind, KernelKind::Weighted { .. }) {
                                // Per-axis rho_0 / rho with both sides per unit length.
                                f * (cell / side) / wi
                            } else {
                                f
                            }
                        })
                        .collect();
                    (k, w)
                })
                .collect(),
        )
    }

    fn check_weight(&self) -> Result<()> {
        let cells = match self.space.dim() {
            1 => 10_000,
            2 => 300,
            _ => 40,
        };
        let mut bad = None;
        self.space.for_each_midpoint(cells, |x| {
            let w = self.space.weight(x);
            if !(w.is_finite() && w > 0.0) && bad.is_none() {
                bad = Some(w);
            }
        });
        match bad {
            Some(w) => Err(invalid(format!(
                "importance weight {w} is not finite and positive"
            ))),
            None => Ok(()),
        }
    }
}

fn validate_kind(kind: &KernelKind, space: &ParamSpace, nested: bool) -> Result<()> {
    match kind {
        KernelKind::Fejer { lambda } if *lambda == 0 => {
            Err(invalid("Fejér cutoff must be at least 1"))
        }
        KernelKind::Dirichlet { lambda } if *lambda == 0 => {
            Err(invalid("Dirichlet cutoff must be at least 1"))
        }
        KernelKind::Dirichlet { .. } if space.dim() != 1 => {
            Err(invalid("the Dirichlet kernel is only built for m = 1"))
        }
        KernelKind::GaussianPeriodic { bandwidth } => {
            if !(bandwidth.is_finite() && *bandwidth > 0.0 && *bandwidth < 0.5 * space.side()) {
                Err(invalid(format!(
                    "Gaussian bandwidth must lie in (0, L/2), got {bandwidth}"
                )))
            } else {
                Ok(())
            }
        }
        KernelKind::Weighted { .. } if nested => Err(invalid("weighted kernels cannot be nested")),
        KernelKind::Weighted { base } => validate_kind(base, space, true),
        _ => Ok(()),
    }
}

fn base_product(kind: &KernelKind, x: &[f64], side: f64) -> f64 {
    x.iter()
        .map(|&c| base_factor(kind, wrap_coord(c, side), side))
        .product()
}

fn base_factor(kind: &KernelKind, x: f64, side: f64) -> f64 {
    match kind {
        KernelKind::Fejer { lambda } => fejer_factor(x, *lambda, side),
        KernelKind::Dirichlet { lambda } => dirichlet_factor(x, *lambda, side),
        KernelKind::GaussianPeriodic { bandwidth } => gaussian_factor(x, *bandwidth, side),
        KernelKind::Weighted { .. } => unreachable!(),
    }
}

/// `sin^2(lambda pi x / L) / (lambda sin^2(pi x / L))` for a wrapped coordinate, in `[0, lambda]`.
pub(crate) fn fejer_factor(x: f64, lambda: u32, side: f64) -> f64 {
    let l = lambda as f64;
    let u = PI * x / side;
    if x.abs() < NEAR_ZERO * side {
        return (l * (1.0 - (l * l - 1.0) * u * u / 3.0)).clamp(0.0, l);
    }
    let s = u.sin();
    let t = (l * u).sin();
    (t * t / (s * s * l)).clamp(0.0, l)
}

/// `sin((2 lambda + 1) pi x / L) / sin(pi x / L)`.
pub(crate) fn dirichlet_factor(x: f64, lambda: u32, side: f64) -> f64 {
    let k = 2.0 * lambda as f64 + 1.0;
    let u = PI * x / side;
    if x.abs() < NEAR_ZERO * side {
        return k * (1.0 - (k * k - 1.0) * u * u / 6.0);
    }
    (k * u).sin() / u.sin()
}

/// Image shells needed so that the omitted images weigh less than 1e-17 of the peak.
fn gaussian_shells(bandwidth: f64, side: f64) -> i32 {
    let mut s = 1;
    while ((s as f64 + 0.5) * side).powi(2) / bandwidth < 39.2 {
        s += 1;
    }
    s
}

/// `(L / sqrt(pi h)) sum_v exp(-(x + v L)^2 / h)` for a wrapped coordinate.
pub(crate) fn gaussian_factor(x: f64, bandwidth: f64, side: f64) -> f64 {
    let shells = gaussian_shells(bandwidth, side);
    let sum: f64 = (-shells..=shells)
        .map(|v| {
            let y = x + v as f64 * side;
            (-y * y / bandwidth).exp()
        })
        .sum();
    side / (PI * bandwidth).sqrt() * sum
}

/// Rectangular Fejér kernel `F_lambda(x)`.
pub fn eval_fejer(x: &ParamPoint, lambda: u32, space: &ParamSpace) -> f64 {
    let side = space.side();
    x.coords()
        .iter()
        .map(|&c| fejer_factor(wrap_coord(c, side), lambda.max(1), side))
        .product()
}

/// One-dimensional Dirichlet kernel `sum_{|k| <= lambda} exp(2 pi i k x / L)`.
pub fn eval_dirichlet_1d(x: &ParamPoint, lambda: u32, space: &ParamSpace) -> Result<f64> {
    if space.dim() != 1 || x.dim() != 1 {
        return Err(invalid("the Dirichlet kernel is only built for m = 1"));
    }
    let side = space.side();
    Ok(dirichlet_factor(
        wrap_coord(x.coords()[0], side),
        lambda,
        side,
    ))
}

/// Periodized Gaussian kernel normalized to unit mean over the box.
pub fn eval_gaussian(x: &ParamPoint, bandwidth: f64, space: &ParamSpace) -> Result<f64> {
    validate_kind(&KernelKind::GaussianPeriodic { bandwidth }, space, false)?;
    let side = space.side();
    Ok(x.coords()
        .iter()
        .map(|&c| gaussian_factor(wrap_coord(c, side), bandwidth, side))
        .product())
}

/// `omega(x) * base(x)` with `omega = rho_0 / rho`.
pub fn eval_weighted(x: &ParamPoint, spec: &KernelSpec) -> Result<f64> {
    let KernelKind::Weighted { base } = &spec.kind else {
        return Err(invalid("eval_weighted needs a weighted kernel"));
    };
    let mut w = x.coords().to_vec();
    spec.space.wrap_in_place(&mut w);
    let omega = spec.space.weight(&w);
    if !omega.is_finite() {
        return Err(invalid(format!("importance weight is not finite at {w:?}")));
    }
    Ok(omega * base_product(base, &w, spec.space.side()))
}

/// Outcome of [`verify_pgk`].
#[derive(Clone, Debug, Serialize)]
pub struct PgkReport {
    pub index: f64,
    pub min_value: f64,
    pub sup_value: f64,
    /// Integral of the kernel against the sampling measure.
    pub normalization: f64,
    /// `(eta, integral of |K| over ||x||_2 >= eta)` at the kernel's own index.
    pub tail_integrals: Vec<(f64, f64)>,
    /// Smallest decay exponent `p` of `tail ~ index^-p` over the etas.
    pub fitted_tail_exponent: f64,
    /// Largest fitted prefactor `kappa` of `tail ~ kappa index^-p`.
    pub tail_constant: f64,
    /// Exponent `tau` of the sup bound `sup K ~ index^tau` over the same sweep.
    pub fitted_sup_exponent: f64,
    pub passed: bool,
}

/// Index multipliers of the tail-decay sweep.
const SWEEP: [u32; 3] = [1, 2, 4];

struct QuadratureSummary {
    min: f64,
    max: f64,
    norm: f64,
    tails: Vec<f64>,
}

fn quadrature_summary(spec: &KernelSpec, etas: &[f64], cells: usize) -> Result<QuadratureSummary> {
    let dim = spec.space.dim();
    let total = (cells as u128).pow(dim as u32);
    if total > QUADRATURE_BUDGET as u128 {
        return Err(Error::BudgetExceeded(format!(
            "{cells}^{dim} quadrature cells"
        )));
    }
    let eta_sq: Vec<f64> = etas.iter().map(|e| e * e).collect();
    let xs: Vec<f64> = spec.space.midpoints(cells).collect();
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut norm = 0.0;
    let mut tails = vec![0.0; etas.len()];
    let mut idx = vec![0usize; dim];

    let mut visit = |k: f64, w: f64, r2: f64| {
        min = min.min(k);
        max = max.max(k);
        norm += k * w;
        for (t, e2) in tails.iter_mut().zip(&eta_sq) {
            if r2 >= *e2 {
                *t += k.abs() * w;
            }
        }
    };

    if let Some(tables) = spec.axis_tables(cells) {
        for _ in 0..total {
            let mut k = 1.0;
            let mut w = 1.0;
            let mut r2 = 0.0;
            for (d, &i) in idx.iter().enumerate() {
                k *= tables[d].0[i];
                w *= tables[d].1[i];
                r2 += xs[i] * xs[i];
            }
            visit(k, w, r2);
            step(&mut idx, cells);
        }
    } else {
        let cell_volume = (spec.space.side() / cells as f64).powi(dim as i32);
        let mut x = vec![0.0; dim];
        for _ in 0..total {
            for (c, &i) in x.iter_mut().zip(&idx) {
                *c = xs[i];
            }
            let r2 = x.iter().map(|c| c * c).sum();
            visit(spec.eval(&x), spec.space.density(&x) * cell_volume, r2);
            step(&mut idx, cells);
        }
    }
    let origin = spec.eval(&vec![0.0; dim]);
    Ok(QuadratureSummary {
        min: min.min(origin),
        max: max.max(origin),
        norm,
        tails,
    })
}

fn step(idx: &mut [usize], base: usize) {
    for i in (0..idx.len()).rev() {
        idx[i] += 1;
        if idx[i] < base {
            return;
        }
        idx[i] = 0;
    }
}

/// Checks positivity, normalization and tail decay on a midpoint grid of
/// `quadrature_points` cells per dimension.
///
/// The tail exponent comes from a least-squares fit of `log tail` against `log index` over
/// the index multiples 1, 2 and 4. The grid is refined to at least 8 cells per index unit
/// for the larger indices. An `eta` whose tail region is empty at every index is skipped.
pub fn verify_pgk(spec: &KernelSpec, etas: &[f64], quadrature_points: usize) -> Result<PgkReport> {
    let side = spec.space.side();
    if etas.is_empty() {
        return Err(invalid("at least one eta is required"));
    }
    if let Some(e) = etas.iter().find(|e| !(**e > 0.0 && **e <= side)) {
        return Err(invalid(format!("eta {e} outside (0, L]")));
    }
    if spec.space.dim() > 3 {
        return Err(Error::BudgetExceeded(format!(
            "PGK quadrature in {} dimensions",
            spec.space.dim()
        )));
    }
    if quadrature_points < 2 {
        return Err(invalid("quadrature needs at least 2 points per dimension"));
    }

    let mut summaries = Vec::with_capacity(SWEEP.len());
    let mut indices = Vec::with_capacity(SWEEP.len());
    for &factor in &SWEEP {
        let scaled = spec.scaled(factor)?;
        let index = scaled.index();
        let cells = quadrature_points.max((8.0 * index).ceil() as usize);
        summaries.push(quadrature_summary(&scaled, etas, cells)?);
        indices.push(index);
    }

    let log_idx: Vec<f64> = indices.iter().map(|i| i.ln()).collect();
    let mut exponent = f64::INFINITY;
    let mut kappa: f64 = 0.0;
    for e in 0..etas.len() {
        let tails: Vec<f64> = summaries.iter().map(|s| s.tails[e]).collect();
        if tails.iter().all(|&t| t == 0.0) {
            continue;
        }
        let logs: Vec<f64> = tails.iter().map(|t| t.max(1e-300).ln()).collect();
        let (slope, intercept, _) = linear_fit(&log_idx, &logs);
        exponent = exponent.min(-slope);
        kappa = kappa.max(intercept.exp());
    }
    if exponent == f64::INFINITY {
        // Every tail region is empty: the decay condition holds vacuously.
        exponent = f64::NAN;
    }
    let sups: Vec<f64> = summaries.iter().map(|s| s.max.max(1e-300).ln()).collect();
    let (sup_exponent, _, _) = linear_fit(&log_idx, &sups);

    let own = &summaries[0];
    let min_ok = own.min >= -1e-12;
    let norm_ok = (own.norm - 1.0).abs() <= 1e-4;
    let decay_ok = exponent.is_nan() || exponent >= 0.9;
    Ok(PgkReport {
        index: indices[0],
        min_value: own.min,
        sup_value: own.max,
        normalization: own.norm,
        tail_integrals: etas
            .iter()
            .copied()
            .zip(own.tails.iter().copied())
            .collect(),
        fitted_tail_exponent: exponent,
        tail_constant: kappa,
        fitted_sup_exponent: sup_exponent,
        passed: min_ok && norm_ok && decay_ok,
    })
}

/// `(1/L^m) sum f(x - y) K(y) dy` by the composite midpoint rule; `m <= 2`.
pub fn convolve_quadrature<F>(
    f: F,
    spec: &KernelSpec,
    x: &ParamPoint,
    quadrature_points: usize,
) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let dim = spec.space.dim();
    if dim > 2 {
        return Err(Error::BudgetExceeded(format!(
            "convolution quadrature in {dim} dimensions"
        )));
    }
    if x.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: x.dim(),
        });
    }
    let total = quadrature_points
        .checked_pow(dim as u32)
        .filter(|&t| t <= QUADRATURE_BUDGET)
        .ok_or_else(|| {
            Error::BudgetExceeded(format!("{quadrature_points}^{dim} quadrature cells"))
        })?;
    if quadrature_points < 2 {
        return Err(invalid("quadrature needs at least 2 points per dimension"));
    }
    let axis: Vec<f64> = spec.space.midpoints(quadrature_points).collect();
    let term = |flat: usize| {
        let mut y = [0.0; 2];
        let mut shifted = [0.0; 2];
        let mut rest = flat;
        for d in (0..dim).rev() {
            y[d] = axis[rest % quadrature_points];
            rest /= quadrature_points;
            shifted[d] = wrap_coord(x.coords()[d] - y[d], spec.space.side());
        }
        f(&shifted[..dim]) * spec.eval(&y[..dim])
    };
    Ok(pairwise_sum_by(total, &term) / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(side: f64) -> ParamSpace {
        ParamSpace::uniform(1, side).unwrap()
    }

    fn pt(space: &ParamSpace, x: &[f64]) -> ParamPoint {
        space.wrap(x).unwrap()
    }

    #[test]
    fn fejer_examples() {
        let s = line(1.0);
        assert_eq!(eval_fejer(&pt(&s, &[0.0]), 7, &s), 7.0);
        let s2 = ParamSpace::uniform(2, 3.0).unwrap();
        assert_eq!(eval_fejer(&pt(&s2, &[0.0, 0.0]), 5, &s2), 25.0);
        // sin^2(pi/2) / sin^2(pi/4) / 2 = 1
        assert!((eval_fejer(&pt(&s, &[0.25]), 2, &s) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn fejer_near_zero_is_continuous() {
        let s = line(2.0);
        let lambda = 50;
        let inside = eval_fejer(&pt(&s, &[0.9e-8 * 2.0]), lambda, &s);
        let outside = eval_fejer(&pt(&s, &[1.1e-8 * 2.0]), lambda, &s);
        assert!((inside - outside).abs() < 1e-9 * lambda as f64);
        assert!(inside <= lambda as f64);
    }

    #[test]
    fn fejer_grid_mean_is_one() {
        let s = line(2.0);
        let cells = 10_000;
        let mean: f64 = s
            .midpoints(cells)
            .map(|x| eval_fejer(&pt(&s, &[x]), 37, &s))
            .sum::<f64>()
            / cells as f64;
        assert!((mean - 1.0).abs() < 1e-4);
    }

    #[test]
    fn dirichlet_examples() {
        let s = line(2.0);
        assert_eq!(eval_dirichlet_1d(&pt(&s, &[0.0]), 3, &s).unwrap(), 7.0);
        let v = eval_dirichlet_1d(&pt(&s, &[1.0]), 1, &s).unwrap();
        assert!((v + 1.0).abs() < 1e-12, "{v}");
        let s2 = ParamSpace::uniform(2, 2.0).unwrap();
        assert!(eval_dirichlet_1d(&pt(&s2, &[0.0, 0.0]), 3, &s2).is_err());
        assert!(KernelSpec::dirichlet(3, s2).is_err());
    }

    #[test]
    fn gaussian_examples() {
        let s = line(2.0);
        let v = eval_gaussian(&pt(&s, &[0.0]), 0.1, &s).unwrap();
        let expected = 2.0 / (PI * 0.1f64).sqrt() * (1.0 + 2.0 * (-40.0f64).exp());
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 3.568).abs() < 1e-3);
        let a = eval_gaussian(&pt(&s, &[0.37]), 0.1, &s).unwrap();
        let b = eval_gaussian(&pt(&s, &[-0.37]), 0.1, &s).unwrap();
        assert!((a - b).abs() < 1e-14);
        assert!(eval_gaussian(&pt(&s, &[0.0]), 1.0, &s).is_err());
        assert!(eval_gaussian(&pt(&s, &[0.0]), 0.0, &s).is_err());
    }

    #[test]
    fn gaussian_grid_mean_is_one() {
        let s = line(2.0);
        let cells = 10_000;
        let spec = KernelSpec::gaussian(0.05, s.clone()).unwrap();
        let mean: f64 = s.midpoints(cells).map(|x| spec.eval(&[x])).sum::<f64>() / cells as f64;
        assert!((mean - 1.0).abs() < 1e-4);
    }

    #[test]
    fn weighted_matches_base_for_uniform() {
        let s = line(2.0);
        let spec = KernelSpec::weighted(KernelKind::Fejer { lambda: 9 }, s.clone()).unwrap();
        for x in [-0.93, -0.2, 0.0, 0.41, 0.999] {
            let p = pt(&s, &[x]);
            assert_eq!(eval_weighted(&p, &spec).unwrap(), eval_fejer(&p, 9, &s));
        }
        let plain = KernelSpec::fejer(9, s.clone()).unwrap();
        assert!(eval_weighted(&pt(&s, &[0.1]), &plain).is_err());
    }

    #[test]
    fn weighted_normalizes_against_density() {
        let side = 2.0;
        let s = ParamSpace::with_density(1, side, Density::cosine_product(1, side, 0.5)).unwrap();
        let spec = KernelSpec::weighted(KernelKind::Fejer { lambda: 20 }, s.clone()).unwrap();
        let cells = 20_000;
        let h = side / cells as f64;
        let integral: f64 = s
            .midpoints(cells)
            .map(|x| {
                let k = eval_weighted(&pt(&s, &[x]), &spec).unwrap();
                assert!(k >= 0.0);
                k * s.density(&[x]) * h
            })
            .sum();
        assert!((integral - 1.0).abs() < 1e-6, "{integral}");
    }

    #[test]
    fn weighted_rejects_nesting() {
        let s = line(2.0);
        let nested = KernelKind::Weighted {
            base: Box::new(KernelKind::Weighted {
                base: Box::new(KernelKind::Fejer { lambda: 2 }),
            }),
        };
        assert!(KernelSpec::new(nested, s).is_err());
    }

    #[test]
    fn fejer_is_mean_of_dirichlet() {
        let s = line(2.0);
        let lambda = 12;
        for x in [-0.77, -0.013, 0.0, 0.25, 0.5, 0.9] {
            let p = pt(&s, &[x]);
            let avg: f64 = (0..lambda)
                .map(|n| eval_dirichlet_1d(&p, n, &s).unwrap())
                .sum::<f64>()
                / lambda as f64;
            assert!((avg - eval_fejer(&p, lambda, &s)).abs() < 1e-10);
        }
    }

    #[test]
    fn verify_fejer_passes_and_dirichlet_fails() {
        let s = line(2.0);
        let etas = [0.25, 0.5];
        let fejer = verify_pgk(&KernelSpec::fejer(50, s.clone()).unwrap(), &etas, 10_000).unwrap();
        assert!(fejer.passed, "{fejer:?}");
        assert!(fejer.min_value >= 0.0);
        assert!((fejer.sup_value - 50.0).abs() < 1e-9);
        assert!((fejer.fitted_sup_exponent - 1.0).abs() < 1e-6);
        let dirichlet = verify_pgk(&KernelSpec::dirichlet(50, s).unwrap(), &etas, 10_000).unwrap();
        assert!(!dirichlet.passed);
        assert!(dirichlet.min_value < 0.0);
    }

    #[test]
    fn fejer_tail_halves() {
        let s = line(2.0);
        let eta = [0.3];
        let mut prev = None;
        for lambda in [16, 32, 64, 128, 256] {
            let r =
                verify_pgk(&KernelSpec::fejer(lambda, s.clone()).unwrap(), &eta, 10_000).unwrap();
            let tail = r.tail_integrals[0].1;
            if let Some(p) = prev {
                assert!(tail / p <= 0.75, "lambda {lambda}: {tail} / {p}");
            }
            prev = Some(tail);
        }
    }

    #[test]
    fn verify_rejects_bad_inputs() {
        let s = line(2.0);
        let spec = KernelSpec::fejer(4, s).unwrap();
        assert!(verify_pgk(&spec, &[], 100).is_err());
        assert!(verify_pgk(&spec, &[3.0], 100).is_err());
        let s4 = ParamSpace::uniform(4, 2.0).unwrap();
        let spec4 = KernelSpec::fejer(4, s4).unwrap();
        assert!(matches!(
            verify_pgk(&spec4, &[0.5], 10),
            Err(Error::BudgetExceeded(_))
        ));
    }

    #[test]
    fn convolution_of_constant_and_cosine() {
        let side = 2.0;
        let s = line(side);
        let spec = KernelSpec::fejer(10, s.clone()).unwrap();
        let x = pt(&s, &[0.31]);
        let c = convolve_quadrature(|_| 2.5, &spec, &x, 4096).unwrap();
        assert!((c - 2.5).abs() < 1e-6);
        let cosine = |y: &[f64]| (2.0 * PI * y[0] / side).cos();
        let conv = convolve_quadrature(cosine, &spec, &x, 4096).unwrap();
        let expected = (1.0 - 1.0 / 10.0) * (2.0 * PI * 0.31 / side).cos();
        assert!((conv - expected).abs() < 1e-10);
        let s3 = ParamSpace::uniform(3, side).unwrap();
        let spec3 = KernelSpec::fejer(3, s3.clone()).unwrap();
        assert!(convolve_quadrature(|_| 1.0, &spec3, &pt(&s3, &[0.0, 0.0, 0.0]), 10).is_err());
    }
}
