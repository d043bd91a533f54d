//! The periodic parameter box `[-L/2, L/2)^m`, its sampling density and evaluation grids.
//!
//! Coordinates are identified modulo `L` in every dimension. All randomness goes through
//! [`seeded_rng`]: a ChaCha8 stream keyed by `(seed, stream)`, so a run is reproducible from
//! its seed alone and parallel runs derive independent streams from their run index.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

/// Unnormalized joint density on the box.
pub type JointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Unnormalized one-dimensional marginal.
pub type MarginalFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Cells per dimension used for normalization, inverse-CDF tables and the rejection envelope.
const TABLE_CELLS: usize = 10_000;
/// Upper bound on the number of cells of a joint (non-product) quadrature.
const JOINT_CELL_BUDGET: usize = 100_000_000;
/// Largest grid `grid()` will enumerate.
const GRID_BUDGET: usize = 10_000_000;

/// Sampling density of the parameter space. Non-uniform densities are given unnormalized;
/// [`ParamSpace::with_density`] computes the normalizing constant.
#[derive(Clone)]
pub enum Density {
    Uniform,
    /// Product of one marginal per dimension; sampled by inverse CDF.
    Product(Vec<MarginalFn>),
    /// General joint density; sampled by rejection against the uniform envelope.
    Joint(JointFn),
}

impl Density {
    /// `prod_j (1 + a cos(2 pi x_j / L))`, positive for `|a| < 1`.
    pub fn cosine_product(dim: usize, side: f64, amplitude: f64) -> Self {
        let marginal: MarginalFn =
            Arc::new(move |x: f64| 1.0 + amplitude * (2.0 * std::f64::consts::PI * x / side).cos());
        Density::Product(vec![marginal; dim])
    }
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Density::Uniform => write!(f, "Uniform"),
            Density::Product(m) => write!(f, "Product({} marginals)", m.len()),
            Density::Joint(_) => write!(f, "Joint(..)"),
        }
    }
}

/// A point of the parameter box, coordinates in `[-L/2, L/2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamPoint(Vec<f64>);

impl ParamPoint {
    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for ParamPoint {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Clone, Debug)]
pub struct ParamSpace {
    dim: usize,
    side: f64,
    density: Density,
    /// Normalizing constant of the raw density: the integral of `raw` over the box divided
    /// by `L^m` (so that `raw / norm` integrates to one against `dx / L^m`). One for uniform.
    /// For product densities it holds the product of the per-dimension constants.
    norm: f64,
    marginal_norms: Vec<f64>,
}

impl ParamSpace {
    pub fn uniform(dim: usize, side: f64) -> Result<Self> {
        Self::with_density(dim, side, Density::Uniform)
    }

    pub fn with_density(dim: usize, side: f64, density: Density) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if !(side.is_finite() && side > 0.0) {
            return Err(invalid(format!("side length must be positive, got {side}")));
        }
        let mut space = ParamSpace {
            dim,
            side,
            density,
            norm: 1.0,
            marginal_norms: vec![],
        };
        match &space.density {
            Density::Uniform => {}
            Density::Product(marginals) => {
                if marginals.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        actual: marginals.len(),
                    });
                }
                let mut norms = Vec::with_capacity(dim);
                for m in marginals {
                    let values = space
                        .midpoints(TABLE_CELLS)
                        .map(|x| m(x))
                        .collect::<Vec<_>>();
                    norms.push(check_and_average(&values)?);
                }
                space.norm = norms.iter().product();
                space.marginal_norms = norms;
            }
            Density::Joint(f) => {
                let per_dim = joint_cells_per_dim(dim)?;
                let mut total = 0.0;
                let mut count = 0usize;
                let mut bad = None;
                space.for_each_midpoint(per_dim, |x| {
                    let v = f(x);
                    if !v.is_finite() || v < 0.0 {
                        bad = Some(v);
                    }
                    total += v;
                    count += 1;
                });
                if let Some(v) = bad {
                    return Err(Error::InvalidDensity(format!(
                        "density value {v} is negative or non-finite"
                    )));
                }
                let avg = total / count as f64;
                if !(avg.is_finite() && avg > 0.0) {
                    return Err(Error::InvalidDensity("density is not normalizable".into()));
                }
                space.norm = avg;
            }
        }
        Ok(space)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn density_kind(&self) -> &Density {
        &self.density
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.density, Density::Uniform)
    }

    /// Uniform density `1 / L^m`.
    pub fn uniform_density(&self) -> f64 {
        self.side.powi(-(self.dim as i32))
    }

    /// Normalized density `rho(x)` with respect to Lebesgue measure on the box.
    pub fn density(&self, x: &[f64]) -> f64 {
        let base = self.uniform_density();
        match &self.density {
            Density::Uniform => base,
            Density::Product(m) => {
                let raw: f64 = m.iter().zip(x).map(|(f, &c)| f(c)).product();
                base * raw / self.norm
            }
            Density::Joint(f) => base * f(x) / self.norm,
        }
    }

    /// Importance weight `rho_0(x) / rho(x)` of the weighted kernels.
    pub fn weight(&self, x: &[f64]) -> f64 {
        match &self.density {
            Density::Uniform => 1.0,
            _ => self.uniform_density() / self.density(x),
        }
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: len,
            });
        }
        Ok(())
    }

    /// Maps every coordinate into `[-L/2, L/2)` modulo `L`.
    pub fn wrap(&self, raw: &[f64]) -> Result<ParamPoint> {
        self.check_dim(raw.len())?;
        Ok(ParamPoint(
            raw.iter().map(|&c| wrap_coord(c, self.side)).collect(),
        ))
    }

    /// Wraps in place without the dimension check; for hot loops over known-good buffers.
    pub(crate) fn wrap_in_place(&self, x: &mut [f64]) {
        for c in x {
            *c = wrap_coord(*c, self.side);
        }
    }

    /// Builds a point from coordinates that must already lie in the box.
    pub fn point(&self, coords: Vec<f64>) -> Result<ParamPoint> {
        self.check_dim(coords.len())?;
        let half = 0.5 * self.side;
        if let Some(c) = coords.iter().find(|c| !(-half..half).contains(*c)) {
            return Err(invalid(format!("coordinate {c} outside [-L/2, L/2)")));
        }
        Ok(ParamPoint(coords))
    }

    /// Euclidean distance with periodic identification in each dimension.
    pub fn torus_distance(&self, a: &ParamPoint, b: &ParamPoint) -> Result<f64> {
        self.check_dim(a.dim())?;
        self.check_dim(b.dim())?;
        let sq: f64 = a
            .coords()
            .iter()
            .zip(b.coords())
            .map(|(x, y)| {
                let d = (x - y).abs().rem_euclid(self.side);
                d.min(self.side - d).powi(2)
            })
            .sum();
        Ok(sq.sqrt())
    }

    /// Draws `count` i.i.d. points from the density, deterministically in `seed`.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<ParamPoint>> {
        let mut rng = seeded_rng(seed, 0);
        self.sample_with(count, &mut rng)
    }

    pub fn sample_with<R: Rng>(&self, count: usize, rng: &mut R) -> Result<Vec<ParamPoint>> {
        if count == 0 {
            return Err(invalid("sample count must be at least 1"));
        }
        let half = 0.5 * self.side;
        match &self.density {
            Density::Uniform => Ok((0..count)
                .map(|_| {
                    ParamPoint(
                        (0..self.dim)
                            .map(|_| wrap_coord(-half + self.side * rng.random::<f64>(), self.side))
                            .collect(),
                    )
                })
                .collect()),
            Density::Product(marginals) => {
                let tables = marginals
                    .iter()
                    .map(|m| InverseCdf::new(self, m.as_ref()))
                    .collect::<Result<Vec<_>>>()?;
                Ok((0..count)
                    .map(|_| {
                        ParamPoint(tables.iter().map(|t| t.draw(rng.random::<f64>())).collect())
                    })
                    .collect())
            }
            Density::Joint(f) => {
                // Envelope: grid maximum of rho / rho_0, padded by 5% for the off-grid peaks.
                let per_dim = joint_cells_per_dim(self.dim)?;
                let mut peak: f64 = 0.0;
                self.for_each_midpoint(per_dim, |x| peak = peak.max(f(x)));
                let envelope = 1.05 * peak / self.norm;
                if !(envelope.is_finite() && envelope > 0.0) {
                    return Err(Error::InvalidDensity(
                        "rejection envelope is not finite".into(),
                    ));
                }
                let mut out = Vec::with_capacity(count);
                let mut x = vec![0.0; self.dim];
                while out.len() < count {
                    for c in x.iter_mut() {
                        *c = wrap_coord(-half + self.side * rng.random::<f64>(), self.side);
                    }
                    let ratio = f(&x) / self.norm;
                    if rng.random::<f64>() * envelope < ratio {
                        out.push(ParamPoint(x.clone()));
                    }
                }
                Ok(out)
            }
        }
    }

    /// Regular lattice of `points_per_dim^m` cell midpoints, last coordinate fastest.
    pub fn grid(&self, points_per_dim: usize) -> Result<Vec<ParamPoint>> {
        if points_per_dim < 2 {
            return Err(invalid("grid needs at least 2 points per dimension"));
        }
        let total = grid_size(points_per_dim, self.dim)
            .filter(|&t| t <= GRID_BUDGET)
            .ok_or_else(|| {
                Error::BudgetExceeded(format!("{points_per_dim}^{} grid points", self.dim))
            })?;
        let axis: Vec<f64> = self.midpoints(points_per_dim).collect();
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; self.dim];
        for _ in 0..total {
            out.push(ParamPoint(idx.iter().map(|&i| axis[i]).collect()));
            advance(&mut idx, points_per_dim);
        }
        Ok(out)
    }

    /// Midpoints of `cells` equal cells covering `[-L/2, L/2)`.
    pub fn midpoints(&self, cells: usize) -> impl Iterator<Item = f64> + '_ {
        let h = self.side / cells as f64;
        (0..cells).map(move |i| -0.5 * self.side + (i as f64 + 0.5) * h)
    }

    /// Visits every midpoint of the tensor grid with `cells` cells per dimension.
    pub(crate) fn for_each_midpoint<F: FnMut(&[f64])>(&self, cells: usize, mut f: F) {
        let axis: Vec<f64> = self.midpoints(cells).collect();
        let mut idx = vec![0usize; self.dim];
        let mut x = vec![0.0; self.dim];
        let total = cells.pow(self.dim as u32);
        for _ in 0..total {
            for (c, &i) in x.iter_mut().zip(&idx) {
                *c = axis[i];
            }
            f(&x);
            advance(&mut idx, cells);
        }
    }
}

/// Deterministic generator for `(seed, stream)`. Experiments use the run index, or a hash
/// of `(sweep index, run index)`, as the stream so that runs can execute in any order.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Maps `c` into `[-L/2, L/2)`.
pub fn wrap_coord(c: f64, side: f64) -> f64 {
    let half = 0.5 * side;
    if (-half..half).contains(&c) {
        return c;
    }
    let mut r = (c + half).rem_euclid(side) - half;
    // rem_euclid can round up to `side` for tiny negative arguments.
    if r >= half {
        r -= side;
    }
    if r < -half {
        r = -half;
    }
    r
}

fn advance(idx: &mut [usize], base: usize) {
    for i in (0..idx.len()).rev() {
        idx[i] += 1;
        if idx[i] < base {
            return;
        }
        idx[i] = 0;
    }
}

fn grid_size(per_dim: usize, dim: usize) -> Option<usize> {
    let mut total: usize = 1;
    for _ in 0..dim {
        total = total.checked_mul(per_dim)?;
    }
    Some(total)
}

fn joint_cells_per_dim(dim: usize) -> Result<usize> {
    let mut cells = TABLE_CELLS;
    while grid_size(cells, dim).is_none_or(|t| t > JOINT_CELL_BUDGET) {
        cells /= 2;
        if cells < 8 {
            return Err(Error::BudgetExceeded(format!(
                "joint density quadrature in {dim} dimensions"
            )));
        }
    }
    Ok(cells)
}

/// Mean of tabulated values after checking they form a valid unnormalized density.
fn check_and_average(values: &[f64]) -> Result<f64> {
    if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidDensity(format!(
            "density value {v} is negative or non-finite"
        )));
    }
    let avg = crate::stats::mean(values);
    if !(avg.is_finite() && avg > 0.0) {
        return Err(Error::InvalidDensity("density is not normalizable".into()));
    }
    Ok(avg)
}

/// Piecewise-constant inverse CDF of a marginal on `TABLE_CELLS` cells.
struct InverseCdf {
    lo: f64,
    width: f64,
    cdf: Vec<f64>,
    side: f64,
}

impl InverseCdf {
    fn new(space: &ParamSpace, marginal: &(dyn Fn(f64) -> f64 + Send + Sync)) -> Result<Self> {
        let values: Vec<f64> = space.midpoints(TABLE_CELLS).map(marginal).collect();
        check_and_average(&values)?;
        let mut cdf = Vec::with_capacity(TABLE_CELLS + 1);
        let mut acc = 0.0;
        cdf.push(0.0);
        for v in &values {
            acc += v;
            cdf.push(acc);
        }
        for c in cdf.iter_mut() {
            *c /= acc;
        }
        Ok(InverseCdf {
            lo: -0.5 * space.side,
            width: space.side / TABLE_CELLS as f64,
            cdf,
            side: space.side,
        })
    }

    fn draw(&self, u: f64) -> f64 {
        // First cell whose upper edge reaches u; empty cells are skipped by the search.
        let k = self.cdf.partition_point(|&c| c < u).clamp(1, TABLE_CELLS);
        let (a, b) = (self.cdf[k - 1], self.cdf[k]);
        let frac = if b > a { (u - a) / (b - a) } else { 0.5 };
        wrap_coord(self.lo + ((k - 1) as f64 + frac) * self.width, self.side)
    }
}
