//! Kernel predictors: `sigma_N(x) = (1/N) sum_i K(x - x_i) rho(x_i)` for density matrices and
//! the same average for scalar labels.
//!
//! [`FejerSeries`] evaluates the Fejér-kernel average through its finite Fourier series.
//! It gives identical predictions up to rounding, at a cost of `O(N Lambda^m)` to fit
//! instead of `O(N)` per query point.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::kernels::{KernelKind, KernelSpec};
use crate::param_space::{ParamPoint, ParamSpace};
use crate::quantum::{linf_entry_norm, CMatrix, DensityMatrix, ValidationTolerance};
use crate::stats::pairwise_sum;

/// A training label: a scalar property value or a density matrix.
pub trait Label: Clone + Send + Sync {
    fn check(&self) -> Result<()>;
}

impl Label for f64 {
    fn check(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(invalid(format!("label {self} is not finite")))
        }
    }
}

impl Label for DensityMatrix {
    fn check(&self) -> Result<()> {
        let r = self.validate(&ValidationTolerance::default());
        if r.passed {
            Ok(())
        } else {
            Err(invalid(format!(
                "label is not a density matrix (hermitian {:e}, trace {:e}, min eigenvalue {:e})",
                r.hermitian_residual, r.trace_deviation, r.min_eigenvalue
            )))
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainingSet<L> {
    points: Vec<ParamPoint>,
    labels: Vec<L>,
    seed: Option<u64>,
}

impl<L: Label> TrainingSet<L> {
    pub fn new(points: Vec<ParamPoint>, labels: Vec<L>, seed: Option<u64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        if points.len() != labels.len() {
            return Err(invalid(format!(
                "{} points but {} labels",
                points.len(),
                labels.len()
            )));
        }
        let dim = points[0].dim();
        if let Some(p) = points.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: p.dim(),
            });
        }
        for l in &labels {
            l.check()?;
        }
        Ok(TrainingSet {
            points,
            labels,
            seed,
        })
    }

    /// Draws `count` points from `space` and labels each with `oracle`.
    pub fn sample<F>(space: &ParamSpace, count: usize, seed: u64, oracle: F) -> Result<Self>
    where
        F: Fn(&ParamPoint) -> Result<L> + Sync,
    {
        if count == 0 {
            return Err(Error::EmptyTrainingSet);
        }
        let points = space.sample(count, seed)?;
        let labels = points.par_iter().map(&oracle).collect::<Result<Vec<L>>>()?;
        Self::new(points, labels, Some(seed))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[ParamPoint] {
        &self.points
    }

    pub fn labels(&self) -> &[L] {
        &self.labels
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Same points with labels mapped through `f`.
    pub fn map_labels<M: Label>(&self, f: impl Fn(&L) -> Result<M>) -> Result<TrainingSet<M>> {
        let labels = self.labels.iter().map(f).collect::<Result<Vec<M>>>()?;
        TrainingSet::new(self.points.clone(), labels, self.seed)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PredictOptions {
    /// Accept sign-indefinite kernels such as the Dirichlet kernel.
    pub allow_non_pgk: bool,
    /// Divide each prediction by the trace diagnostic at the same point.
    pub renormalize: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PredictionDiagnostics {
    pub sup_error: f64,
    /// `max_x |(1/N) sum_i K(x - x_i) - 1|` over the grid.
    pub trace_max_dev: f64,
    pub grid_size: usize,
    /// Per-run sup errors when several runs are summarized together.
    pub runs: Vec<f64>,
}

fn check_query(x: &ParamPoint, spec: &KernelSpec) -> Result<()> {
    let dim = spec.space().dim();
    if x.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: x.dim(),
        });
    }
    Ok(())
}

fn check_set<L>(set: &TrainingSet<L>, spec: &KernelSpec) -> Result<()> {
    let dim = spec.space().dim();
    let actual = set.points[0].dim();
    if actual != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual,
        });
    }
    Ok(())
}

fn check_kernel(spec: &KernelSpec, opts: &PredictOptions) -> Result<()> {
    if !spec.is_positive() && !opts.allow_non_pgk {
        return Err(Error::NotPositiveKernel(format!(
            "{} kernel takes negative values; set allow_non_pgk to use it anyway",
            spec.kind().name()
        )));
    }
    Ok(())
}

/// `K(x - x_i)` for every training point.
pub fn kernel_weights(
    x: &ParamPoint,
    points: &[ParamPoint],
    spec: &KernelSpec,
) -> Result<Vec<f64>> {
    check_query(x, spec)?;
    let mut diff = vec![0.0; x.dim()];
    points
        .iter()
        .map(|p| {
            if p.dim() != diff.len() {
                return Err(Error::DimensionMismatch {
                    expected: diff.len(),
                    actual: p.dim(),
                });
            }
            for ((d, a), b) in diff.iter_mut().zip(x.coords()).zip(p.coords()) {
                *d = a - b;
            }
            Ok(spec.eval(&diff))
        })
        .collect()
}

/// `(1/N) sum_i K(x - x_i)`, the trace of the density prediction for unit-trace labels.
pub fn trace_diagnostic<L: Label>(
    x: &ParamPoint,
    set: &TrainingSet<L>,
    spec: &KernelSpec,
) -> Result<f64> {
    check_set(set, spec)?;
    let w = kernel_weights(x, &set.points, spec)?;
    Ok(pairwise_sum(&w) / set.len() as f64)
}

/// Kernel estimate of the density matrix at `x`. Exactly Hermitian; positive semi-definite
/// whenever the kernel is nonnegative.
pub fn predict_density(
    x: &ParamPoint,
    set: &TrainingSet<DensityMatrix>,
    spec: &KernelSpec,
    opts: &PredictOptions,
) -> Result<CMatrix> {
    check_kernel(spec, opts)?;
    check_set(set, spec)?;
    let w = kernel_weights(x, &set.points, spec)?;
    let dim = set.labels[0].dim();
    if let Some(l) = set.labels.iter().find(|l| l.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: l.dim(),
        });
    }
    let mut sigma = CMatrix::zeros(dim, dim);
    for (wi, rho) in w.iter().zip(&set.labels) {
        if *wi != 0.0 {
            sigma.zip_apply(rho.matrix(), |s, r| *s += r * *wi);
        }
    }
    let n = set.len() as f64;
    sigma.apply(|s| *s /= n);
    if opts.renormalize {
        let tr = sigma.trace().re;
        if tr != 0.0 {
            sigma.apply(|s| *s /= tr);
        }
    }
    Ok(sigma)
}

/// `(1/N) sum_i K(x - x_i) f(x_i)`.
pub fn predict_scalar(
    x: &ParamPoint,
    set: &TrainingSet<f64>,
    spec: &KernelSpec,
    opts: &PredictOptions,
) -> Result<f64> {
    check_kernel(spec, opts)?;
    check_set(set, spec)?;
    let w = kernel_weights(x, &set.points, spec)?;
    Ok(scalar_from_weights(&w, &set.labels, opts).0)
}

/// Returns `(prediction, trace)`.
fn scalar_from_weights(w: &[f64], labels: &[f64], opts: &PredictOptions) -> (f64, f64) {
    let n = w.len() as f64;
    let weighted: Vec<f64> = w.iter().zip(labels).map(|(a, b)| a * b).collect();
    let pred = pairwise_sum(&weighted) / n;
    let trace = pairwise_sum(w) / n;
    if opts.renormalize && trace != 0.0 {
        (pred / trace, trace)
    } else {
        (pred, trace)
    }
}

/// Sup-norm error of the scalar predictor against `truth` over `grid`.
pub fn sup_error_scalar<F>(
    set: &TrainingSet<f64>,
    spec: &KernelSpec,
    truth: F,
    grid: &[ParamPoint],
    opts: &PredictOptions,
) -> Result<PredictionDiagnostics>
where
    F: Fn(&ParamPoint) -> f64 + Sync,
{
    if grid.is_empty() {
        return Err(invalid("evaluation grid is empty"));
    }
    check_kernel(spec, opts)?;
    check_set(set, spec)?;
    let per_point = grid
        .par_iter()
        .map(|x| {
            let w = kernel_weights(x, &set.points, spec)?;
            let (pred, trace) = scalar_from_weights(&w, &set.labels, opts);
            Ok(((pred - truth(x)).abs(), (trace - 1.0).abs()))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    Ok(summarize(&per_point, grid.len()))
}

/// Sup over `grid` of the entry-wise distance between the density prediction and `truth`.
pub fn sup_error_density<F>(
    set: &TrainingSet<DensityMatrix>,
    spec: &KernelSpec,
    truth: F,
    grid: &[ParamPoint],
    opts: &PredictOptions,
) -> Result<PredictionDiagnostics>
where
    F: Fn(&ParamPoint) -> Result<DensityMatrix> + Sync,
{
    if grid.is_empty() {
        return Err(invalid("evaluation grid is empty"));
    }
    let per_point = grid
        .par_iter()
        .map(|x| {
            let sigma = predict_density(x, set, spec, opts)?;
            let trace = trace_diagnostic(x, set, spec)?;
            Ok((
                linf_entry_norm(&sigma, truth(x)?.matrix())?,
                (trace - 1.0).abs(),
            ))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    Ok(summarize(&per_point, grid.len()))
}

fn summarize(per_point: &[(f64, f64)], grid_size: usize) -> PredictionDiagnostics {
    let sup_error = per_point.iter().map(|p| p.0).fold(0.0, f64::max);
    let trace_max_dev = per_point.iter().map(|p| p.1).fold(0.0, f64::max);
    PredictionDiagnostics {
        sup_error,
        trace_max_dev,
        grid_size,
        runs: vec![sup_error],
    }
}

/// Splits density matrices into real channels: the real parts of the upper triangle
/// followed by the imaginary parts of the strict upper triangle, `dim^2` in total.
pub fn density_channels(labels: &[DensityMatrix]) -> Vec<Vec<f64>> {
    let Some(first) = labels.first() else {
        return Vec::new();
    };
    let dim = first.dim();
    let mut channels = Vec::with_capacity(dim * dim);
    for a in 0..dim {
        for b in a..dim {
            channels.push(labels.iter().map(|l| l.matrix()[(a, b)].re).collect());
        }
    }
    for a in 0..dim {
        for b in a + 1..dim {
            channels.push(labels.iter().map(|l| l.matrix()[(a, b)].im).collect());
        }
    }
    channels
}

/// Inverse of [`density_channels`] for one point.
pub fn assemble_density(values: &[f64], dim: usize) -> Result<CMatrix> {
    if values.len() != dim * dim {
        return Err(Error::DimensionMismatch {
            expected: dim * dim,
            actual: values.len(),
        });
    }
    let mut m = CMatrix::zeros(dim, dim);
    let mut it = values.iter();
    for a in 0..dim {
        for b in a..dim {
            let v = *it.next().unwrap();
            m[(a, b)].re = v;
            m[(b, a)].re = v;
        }
    }
    for a in 0..dim {
        for b in a + 1..dim {
            let v = *it.next().unwrap();
            m[(a, b)].im = v;
            m[(b, a)].im = -v;
        }
    }
    Ok(m)
}

/// Points per block in the two-dimensional fit.
const FIT_BLOCK: usize = 2048;

/// Fourier-series form of the Fejér-kernel average for one or more real label channels.
///
/// For the kernel `F_Lambda` on a uniform box of side `L`,
/// `(1/N) sum_i F(x - x_i) f_i = sum_{|k_j| < Lambda} w_k c_k e^{2 pi i k.x / L}` with
/// `w_k = prod_j (1 - |k_j| / Lambda)` and `c_k = (1/N) sum_i f_i e^{-2 pi i k.x_i / L}`.
/// Only the half space `k_1 >= 0` is stored since the labels are real.
#[derive(Clone, Debug)]
pub struct FejerSeries {
    dim: usize,
    side: f64,
    lambda: usize,
    channels: usize,
    /// Per channel, `w_k c_k` times 2 for `k_1 > 0`; `k_1` major, then `k_2 + Lambda - 1`.
    coeffs: Vec<Vec<Complex64>>,
}

/// `e^{-i theta k}` for `k = 0 .. count`, by repeated multiplication resynchronized every 32 steps.
fn phases(theta: f64, count: usize, out: &mut Vec<Complex64>) {
    out.clear();
    let step = Complex64::from_polar(1.0, -theta);
    let mut z = Complex64::new(1.0, 0.0);
    for k in 0..count {
        if k % 32 == 0 {
            z = Complex64::from_polar(1.0, -theta * k as f64);
        }
        out.push(z);
        z *= step;
    }
}

impl FejerSeries {
    /// Whether `spec` is a plain Fejér kernel on a uniform box of dimension 1 or 2.
    pub fn supports(spec: &KernelSpec) -> bool {
        matches!(spec.kind(), KernelKind::Fejer { .. })
            && spec.space().is_uniform()
            && spec.space().dim() <= 2
    }

    pub fn fit(spec: &KernelSpec, points: &[ParamPoint], channels: &[Vec<f64>]) -> Result<Self> {
        if !Self::supports(spec) {
            return Err(invalid(
                "the series form needs a Fejér kernel on a uniform box with m <= 2",
            ));
        }
        if points.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        if channels.is_empty() {
            return Err(invalid("at least one label channel is required"));
        }
        let n = points.len();
        if let Some(ch) = channels.iter().find(|c| c.len() != n) {
            return Err(invalid(format!(
                "{n} points but a channel of {} labels",
                ch.len()
            )));
        }
        let dim = spec.space().dim();
        if let Some(p) = points.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: p.dim(),
            });
        }
        let lambda = spec.fejer_lambda().unwrap() as usize;
        let side = spec.space().side();
        let theta = 2.0 * PI / side;
        let coeffs = if dim == 1 {
            fit_1d(points, channels, lambda, theta)
        } else {
            fit_2d(points, channels, lambda, theta)
        };
        let mut series = FejerSeries {
            dim,
            side,
            lambda,
            channels: channels.len(),
            coeffs,
        };
        series.apply_weights(n);
        Ok(series)
    }

    fn apply_weights(&mut self, n: usize) {
        let l = self.lambda as f64;
        let width = 2 * self.lambda - 1;
        for ch in &mut self.coeffs {
            for (idx, c) in ch.iter_mut().enumerate() {
                let (k1, w2) = if self.dim == 1 {
                    (idx, 1.0)
                } else {
                    let k2 = (idx % width) as f64 - (l - 1.0);
                    (idx / width, 1.0 - k2.abs() / l)
                };
                let mult = if k1 == 0 { 1.0 } else { 2.0 };
                *c *= mult * (1.0 - k1 as f64 / l) * w2 / n as f64;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Predictions of every channel at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        let theta = 2.0 * PI / self.side;
        let mut e1 = Vec::new();
        phases(-theta * x[0], self.lambda, &mut e1);
        if self.dim == 1 {
            return Ok(self
                .coeffs
                .iter()
                .map(|ch| ch.iter().zip(&e1).map(|(c, e)| (c * e).re).sum())
                .collect());
        }
        let width = 2 * self.lambda - 1;
        let e2 = two_sided(-theta * x[1], self.lambda);
        Ok(self
            .coeffs
            .iter()
            .map(|ch| {
                let mut acc = 0.0;
                for (k1, z1) in e1.iter().enumerate() {
                    let row = &ch[k1 * width..(k1 + 1) * width];
                    let inner: Complex64 = row.iter().zip(&e2).map(|(c, e)| c * e).sum();
                    acc += (z1 * inner).re;
                }
                acc
            })
            .collect())
    }

    /// Predictions on the midpoint grid of [`ParamSpace::grid`], one vector per channel.
    pub fn eval_grid(&self, points_per_dim: usize) -> Result<Vec<Vec<f64>>> {
        if points_per_dim < 2 {
            return Err(invalid("grid needs at least 2 points per dimension"));
        }
        let p = points_per_dim;
        let h = self.side / p as f64;
        let axis: Vec<f64> = (0..p)
            .map(|i| -0.5 * self.side + (i as f64 + 0.5) * h)
            .collect();
        let theta = 2.0 * PI / self.side;
        let l = self.lambda;
        // e1[x, k1] = e^{i theta k1 x}
        let mut tmp = Vec::new();
        let mut e1r = DMatrix::<f64>::zeros(p, l);
        let mut e1i = DMatrix::<f64>::zeros(p, l);
        for (i, &x) in axis.iter().enumerate() {
            phases(-theta * x, l, &mut tmp);
            for (k, z) in tmp.iter().enumerate() {
                e1r[(i, k)] = z.re;
                e1i[(i, k)] = z.im;
            }
        }
        if self.dim == 1 {
            return Ok(self
                .coeffs
                .iter()
                .map(|ch| {
                    let cr = DMatrix::from_iterator(l, 1, ch.iter().map(|c| c.re));
                    let ci = DMatrix::from_iterator(l, 1, ch.iter().map(|c| c.im));
                    (&e1r * cr - &e1i * ci).iter().copied().collect()
                })
                .collect());
        }
        let width = 2 * l - 1;
        let mut e2r = DMatrix::<f64>::zeros(width, p);
        let mut e2i = DMatrix::<f64>::zeros(width, p);
        for (i, &x) in axis.iter().enumerate() {
            for (k, z) in two_sided(-theta * x, l).iter().enumerate() {
                e2r[(k, i)] = z.re;
                e2i[(k, i)] = z.im;
            }
        }
        Ok(self
            .coeffs
            .iter()
            .map(|ch| {
                let cr = DMatrix::from_fn(l, width, |a, b| ch[a * width + b].re);
                let ci = DMatrix::from_fn(l, width, |a, b| ch[a * width + b].im);
                // a[k1, x2] = sum_k2 c[k1, k2] e^{i theta k2 x2}
                let ar = &cr * &e2r - &ci * &e2i;
                let ai = &cr * &e2i + &ci * &e2r;
                let out = &e1r * ar - &e1i * ai;
                // `out` is p x p with x1 on rows; emit with the last coordinate fastest.
                out.transpose().iter().copied().collect()
            })
            .collect())
    }
}

/// `e^{-i theta k}` for `k = -(lambda - 1) ..= lambda - 1`.
fn two_sided(theta: f64, lambda: usize) -> Vec<Complex64> {
    let mut pos = Vec::new();
    phases(theta, lambda, &mut pos);
    let mut out: Vec<Complex64> = pos[1..].iter().rev().map(|z| z.conj()).collect();
    out.extend_from_slice(&pos);
    out
}

fn fit_1d(
    points: &[ParamPoint],
    channels: &[Vec<f64>],
    lambda: usize,
    theta: f64,
) -> Vec<Vec<Complex64>> {
    let mut coeffs = vec![vec![Complex64::new(0.0, 0.0); lambda]; channels.len()];
    let mut e = Vec::with_capacity(lambda);
    for (i, p) in points.iter().enumerate() {
        phases(theta * p.coords()[0], lambda, &mut e);
        for (ch, out) in channels.iter().zip(coeffs.iter_mut()) {
            let f = ch[i];
            if f == 0.0 {
                continue;
            }
            for (o, z) in out.iter_mut().zip(&e) {
                *o += z * f;
            }
        }
    }
    coeffs
}

fn fit_2d(
    points: &[ParamPoint],
    channels: &[Vec<f64>],
    lambda: usize,
    theta: f64,
) -> Vec<Vec<Complex64>> {
    let width = 2 * lambda - 1;
    let mut cr = vec![DMatrix::<f64>::zeros(lambda, width); channels.len()];
    let mut ci = vec![DMatrix::<f64>::zeros(lambda, width); channels.len()];
    let mut tmp = Vec::new();
    for start in (0..points.len()).step_by(FIT_BLOCK) {
        let block = &points[start..(start + FIT_BLOCK).min(points.len())];
        let b = block.len();
        let mut ur = DMatrix::<f64>::zeros(b, lambda);
        let mut ui = DMatrix::<f64>::zeros(b, lambda);
        let mut vr = DMatrix::<f64>::zeros(b, width);
        let mut vi = DMatrix::<f64>::zeros(b, width);
        for (r, p) in block.iter().enumerate() {
            phases(theta * p.coords()[0], lambda, &mut tmp);
            for (k, z) in tmp.iter().enumerate() {
                ur[(r, k)] = z.re;
                ui[(r, k)] = z.im;
            }
            for (k, z) in two_sided(theta * p.coords()[1], lambda).iter().enumerate() {
                vr[(r, k)] = z.re;
                vi[(r, k)] = z.im;
            }
        }
        for (c, ch) in channels.iter().enumerate() {
            let f = &ch[start..start + b];
            let mut fr = ur.clone();
            let mut fi = ui.clone();
            for (r, &fv) in f.iter().enumerate() {
                fr.row_mut(r).scale_mut(fv);
                fi.row_mut(r).scale_mut(fv);
            }
            cr[c] += fr.tr_mul(&vr) - fi.tr_mul(&vi);
            ci[c] += fr.tr_mul(&vi) + fi.tr_mul(&vr);
        }
    }
    cr.iter()
        .zip(&ci)
        .map(|(r, i)| {
            let mut out = Vec::with_capacity(lambda * width);
            for a in 0..lambda {
                for b in 0..width {
                    out.push(Complex64::new(r[(a, b)], i[(a, b)]));
                }
            }
            out
        })
        .collect()
}
