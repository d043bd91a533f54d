//! Learning experiments on the XY chain: sweeps over the training-set size with repeated
//! runs, sup-norm errors on a fixed grid, log-log fits and file output.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimator::{assemble_density, density_channels, FejerSeries};
use crate::kernels::{KernelKind, KernelSpec};
use crate::param_space::{ParamPoint, ParamSpace};
use crate::quantum::{linf_entry_norm, DensityMatrix};
use crate::stats::{linear_fit, mean, median, standard_error};
use crate::xy_model::{ground_energy_ff, ground_state_ed, longrange_xx_closed_form, XYParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Ground-state energy per site.
    Energy,
    /// Thermodynamic-limit `<S^x_0 S^x_r>`.
    Correlation,
    /// Ground-state density matrix.
    Density,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisMap {
    /// `[-L/2, L/2)` maps affinely onto the range.
    Linear,
    /// `|x|` maps affinely onto the range, so both ends of the box meet at the range start.
    Mirror,
}

/// Physical range covered by one coordinate of the box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub range: (f64, f64),
    pub map: AxisMap,
}

impl Axis {
    pub fn linear(lo: f64, hi: f64) -> Self {
        Axis {
            range: (lo, hi),
            map: AxisMap::Linear,
        }
    }

    pub fn mirror(lo: f64, hi: f64) -> Self {
        Axis {
            range: (lo, hi),
            map: AxisMap::Mirror,
        }
    }

    pub fn to_physical(&self, x: f64, side: f64) -> f64 {
        let (lo, hi) = self.range;
        let t = match self.map {
            AxisMap::Linear => (x + 0.5 * side) / side,
            AxisMap::Mirror => x.abs() / (0.5 * side),
        };
        lo + t * (hi - lo)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n: usize,
    pub j: f64,
    /// Anisotropy used when the box has no anisotropy axis.
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: Task,
    pub kernel: KernelKind,
    /// Box dimension: 1 (field only) or 2 (field and anisotropy).
    pub m: usize,
    pub side: f64,
    /// `axes[0]` is `h/J`; `axes[1]`, when present, is the anisotropy.
    pub axes: Vec<Axis>,
    pub model: ModelConfig,
    pub sweep: Vec<usize>,
    pub runs: usize,
    /// Evaluation grid points per dimension.
    pub grid: usize,
    pub seed: u64,
    #[serde(default)]
    pub renormalize: bool,
    /// Grid points with `|h/J|` inside this window are left out of the sup error.
    #[serde(default)]
    pub exclude_abs_h: Option<(f64, f64)>,
    /// Training-set size of the comparison curve; the largest sweep entry by default.
    #[serde(default)]
    pub curve_n: Option<usize>,
    /// Output stem: `<stem>.csv`, `<stem>.json` and `<stem>.curve.csv`.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// Training-set sizes `10^3, 3 10^3, ..., 10^6`.
pub fn default_sweep() -> Vec<usize> {
    vec![1_000, 3_000, 10_000, 30_000, 100_000, 300_000, 1_000_000]
}

impl ExperimentConfig {
    /// Energy per site of the `n = 5`, `gamma = 1/3` chain over `-3/2 <= h/J <= 3/2`.
    pub fn energy_default() -> Self {
        ExperimentConfig {
            task: Task::Energy,
            kernel: KernelKind::Fejer { lambda: 50 },
            m: 1,
            side: 3.0,
            axes: vec![Axis::linear(-1.5, 1.5)],
            model: ModelConfig {
                n: 5,
                j: 1.0,
                gamma: 1.0 / 3.0,
            },
            sweep: default_sweep(),
            runs: 30,
            grid: 1000,
            seed: 2024,
            renormalize: false,
            exclude_abs_h: None,
            curve_n: None,
            output: None,
        }
    }

    /// Long-range order over `-3/2 <= h/J <= 3/2` and `0 <= gamma <= 1`.
    pub fn correlation_2d_default() -> Self {
        ExperimentConfig {
            task: Task::Correlation,
            m: 2,
            axes: vec![Axis::linear(-1.5, 1.5), Axis::mirror(0.0, 1.0)],
            sweep: vec![1_000, 3_000, 10_000, 30_000, 100_000],
            ..Self::energy_default()
        }
    }

    /// Long-range order at `gamma = 1/3` with `N = 10^5`, excluding the critical window.
    pub fn correlation_1d_default() -> Self {
        ExperimentConfig {
            task: Task::Correlation,
            sweep: vec![100_000],
            exclude_abs_h: Some((0.95, 1.05)),
            ..Self::energy_default()
        }
    }

    /// Ground-state density matrices of the `n = 3` chain for `1.1 <= h/J <= 2.5`, a range
    /// without sector crossings.
    pub fn density_default() -> Self {
        ExperimentConfig {
            task: Task::Density,
            side: 2.0,
            axes: vec![Axis::mirror(1.1, 2.5)],
            model: ModelConfig {
                n: 3,
                j: 1.0,
                gamma: 1.0 / 3.0,
            },
            sweep: vec![1_000, 3_000, 10_000, 30_000, 100_000],
            runs: 10,
            ..Self::energy_default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.sweep.is_empty() || self.sweep.contains(&0) {
            return bad("sweep must be a nonempty list of positive sizes".into());
        }
        if !(1..=2).contains(&self.m) {
            return bad(format!("m must be 1 or 2, got {}", self.m));
        }
        if self.axes.len() != self.m {
            return bad(format!("{} axes given for m = {}", self.axes.len(), self.m));
        }
        if self.m == 2 && self.task != Task::Correlation {
            return bad("only the correlation task has a two-dimensional box".into());
        }
        if !(self.side.is_finite() && self.side > 0.0) {
            return bad(format!("side must be positive, got {}", self.side));
        }
        if self.grid < 2 {
            return bad("grid needs at least 2 points per dimension".into());
        }
        for a in &self.axes {
            if !(a.range.0.is_finite() && a.range.1.is_finite() && a.range.0 < a.range.1) {
                return bad(format!("bad axis range {:?}", a.range));
            }
        }
        if let Some(g) = self.axes.get(1) {
            if g.range.0 < 0.0 || g.range.1 > 1.0 {
                return bad(format!("anisotropy range {:?} leaves [0, 1]", g.range));
            }
        }
        if let Some((a, b)) = self.exclude_abs_h {
            if a.is_nan() || b.is_nan() || a > b {
                return bad(format!("bad exclusion window ({a}, {b})"));
            }
        }
        let model = &self.model;
        XYParams::new(model.n.max(2), model.j, model.gamma, 0.0)
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.task == Task::Density && model.n > 6 {
            return bad(format!("density task needs n <= 6, got {}", model.n));
        }
        if self.task == Task::Energy && model.n < 2 {
            return bad("energy task needs n >= 2".into());
        }
        let spec = self
            .kernel_spec()
            .map_err(|e| Error::Config(e.to_string()))?;
        if !spec.is_positive() {
            return bad(format!(
                "{} kernel is not positive and cannot drive an experiment",
                spec.kind().name()
            ));
        }
        Ok(())
    }

    pub fn space(&self) -> Result<ParamSpace> {
        ParamSpace::uniform(self.m, self.side)
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        KernelSpec::new(self.kernel.clone(), self.space()?)
    }

    /// `(h/J, gamma)` at a box point.
    pub fn physical(&self, x: &[f64]) -> (f64, f64) {
        let h = self.axes[0].to_physical(x[0], self.side);
        let gamma = match self.axes.get(1) {
            Some(a) => a.to_physical(x[1], self.side).clamp(0.0, 1.0),
            None => self.model.gamma,
        };
        (h, gamma)
    }

    fn params(&self, x: &[f64]) -> Result<XYParams> {
        let (h, gamma) = self.physical(x);
        XYParams::new(self.model.n, self.model.j, gamma, h)
    }

    /// Scalar label at a box point for the energy and correlation tasks.
    pub fn scalar_truth(&self, x: &[f64]) -> Result<f64> {
        match self.task {
            Task::Energy => {
                let p = self.params(x)?;
                Ok(ground_energy_ff(&p) / (p.n as f64 * p.j))
            }
            Task::Correlation => {
                let (h, gamma) = self.physical(x);
                longrange_xx_closed_form(gamma, h)
            }
            Task::Density => Err(invalid("the density task has matrix labels")),
        }
    }

    pub fn density_truth(&self, x: &[f64]) -> Result<DensityMatrix> {
        Ok(ground_state_ed(&self.params(x)?)?.1)
    }

    fn curve_n(&self) -> usize {
        self.curve_n
            .unwrap_or_else(|| *self.sweep.iter().max().unwrap())
    }

    fn included(&self, x: &[f64]) -> bool {
        match self.exclude_abs_h {
            Some((a, b)) => {
                let h = self.physical(x).0.abs();
                !(a..=b).contains(&h)
            }
            None => true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub run_id: usize,
    pub sup_error: f64,
    pub trace_max_dev: f64,
    pub seed: u64,
}

/// Statistics over runs at one training-set size.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SizeSummary {
    pub n: usize,
    pub mean_sup_error: f64,
    pub std_error: f64,
    pub median_sup_error: f64,
    pub mean_trace_max_dev: f64,
    pub median_trace_max_dev: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingResult {
    pub rows: Vec<ScalingRow>,
    pub summary: Vec<SizeSummary>,
    /// Fit of `log10(1/mean error)` against `log10 N`; absent with fewer than 3 sizes.
    pub fit: Option<LogLogFit>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub x: f64,
    pub truth: f64,
    pub prediction: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub result: ScalingResult,
    /// Truth and prediction along `h/J` for run 0 at the curve size (a slice at the model
    /// anisotropy when `m = 2`); scalar tasks only.
    pub curve: Option<Vec<CurvePoint>>,
}

/// Least squares of `log10(1/eps)` on `log10 N`. A constant response has `r^2 = 0`.
pub fn loglog_fit(points: &[(f64, f64)]) -> Result<LogLogFit> {
    if points.len() < 3 {
        return Err(invalid(format!(
            "a log-log fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points.iter().find(|(n, e)| !(*n > 0.0 && *e > 0.0)) {
        return Err(invalid(format!(
            "log-log fit needs positive values, got {p:?}"
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.log10()).collect();
    let ys: Vec<f64> = points.iter().map(|p| -p.1.log10()).collect();
    let (slope, intercept, r_squared) = linear_fit(&xs, &ys);
    Ok(LogLogFit {
        slope,
        intercept,
        r_squared,
    })
}

/// SplitMix64 finalizer over `(seed, sweep index, run)`.
pub fn derive_seed(seed: u64, sweep_index: usize, run: usize) -> u64 {
    let mut z = seed.wrapping_add(
        0x9E37_79B9_7F4A_7C15u64.wrapping_mul(1 + ((sweep_index as u64) << 32 | run as u64)),
    );
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Kernel averages of each channel on the grid, one vector per channel.
fn predict_on_grid(
    spec: &KernelSpec,
    points: &[ParamPoint],
    channels: &[Vec<f64>],
    grid: &[ParamPoint],
    ppd: usize,
) -> Result<Vec<Vec<f64>>> {
    if FejerSeries::supports(spec) {
        return FejerSeries::fit(spec, points, channels)?.eval_grid(ppd);
    }
    let n = points.len() as f64;
    let per_point: Vec<Vec<f64>> = grid
        .par_iter()
        .map(|x| {
            let w = crate::estimator::kernel_weights(x, points, spec)?;
            Ok(channels
                .iter()
                .map(|ch| {
                    crate::stats::pairwise_sum(
                        &w.iter().zip(ch).map(|(a, b)| a * b).collect::<Vec<f64>>(),
                    ) / n
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..channels.len())
        .map(|c| per_point.iter().map(|v| v[c]).collect())
        .collect())
}

enum Truth {
    Scalar(Vec<f64>),
    Density(Vec<DensityMatrix>),
}

struct Prepared {
    spec: KernelSpec,
    space: ParamSpace,
    grid: Vec<ParamPoint>,
    mask: Vec<bool>,
    truth: Truth,
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let space = cfg.space()?;
    let spec = cfg.kernel_spec()?;
    let grid = space.grid(cfg.grid)?;
    let mask: Vec<bool> = grid.iter().map(|x| cfg.included(x.coords())).collect();
    if !mask.iter().any(|&m| m) {
        return Err(Error::Config(
            "the exclusion window removes every grid point".into(),
        ));
    }
    let truth = match cfg.task {
        Task::Density => Truth::Density(
            grid.par_iter()
                .map(|x| cfg.density_truth(x.coords()))
                .collect::<Result<_>>()?,
        ),
        _ => Truth::Scalar(
            grid.par_iter()
                .map(|x| cfg.scalar_truth(x.coords()))
                .collect::<Result<_>>()?,
        ),
    };
    Ok(Prepared {
        spec,
        space,
        grid,
        mask,
        truth,
    })
}

struct RunOutcome {
    row: ScalingRow,
    curve: Option<Vec<CurvePoint>>,
}

fn run_one(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    sweep_index: usize,
    run: usize,
    want_curve: bool,
) -> Result<RunOutcome> {
    let n = cfg.sweep[sweep_index];
    let seed = derive_seed(cfg.seed, sweep_index, run);
    let points = prep.space.sample(n, seed)?;
    let mut channels = vec![vec![1.0; n]];
    match cfg.task {
        Task::Density => {
            let labels: Vec<DensityMatrix> = points
                .iter()
                .map(|x| cfg.density_truth(x.coords()))
                .collect::<Result<_>>()?;
            channels.extend(density_channels(&labels));
        }
        _ => channels.push(
            points
                .iter()
                .map(|x| cfg.scalar_truth(x.coords()))
                .collect::<Result<_>>()?,
        ),
    }
    let values = predict_on_grid(&prep.spec, &points, &channels, &prep.grid, cfg.grid)?;
    let trace = &values[0];
    let scale = |g: usize| {
        if cfg.renormalize && trace[g] != 0.0 {
            1.0 / trace[g]
        } else {
            1.0
        }
    };

    let mut sup_error: f64 = 0.0;
    let mut trace_max_dev: f64 = 0.0;
    let mut predictions = Vec::new();
    for g in 0..prep.grid.len() {
        trace_max_dev = trace_max_dev.max((trace[g] - 1.0).abs());
        let err = match &prep.truth {
            Truth::Scalar(t) => {
                let pred = values[1][g] * scale(g);
                if want_curve {
                    predictions.push(pred);
                }
                (pred - t[g]).abs()
            }
            Truth::Density(t) => {
                let dim = t[g].dim();
                let flat: Vec<f64> = values[1..].iter().map(|ch| ch[g] * scale(g)).collect();
                linf_entry_norm(&assemble_density(&flat, dim)?, t[g].matrix())?
            }
        };
        if prep.mask[g] {
            sup_error = sup_error.max(err);
        }
    }
    let curve = match (&prep.truth, want_curve) {
        (Truth::Scalar(t), true) => Some(curve_slice(cfg, prep, t, &predictions)),
        _ => None,
    };
    Ok(RunOutcome {
        row: ScalingRow {
            n,
            run_id: run,
            sup_error,
            trace_max_dev,
            seed,
        },
        curve,
    })
}

fn curve_slice(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    truth: &[f64],
    pred: &[f64],
) -> Vec<CurvePoint> {
    let p = cfg.grid;
    let row = if cfg.m == 1 {
        None
    } else {
        // Grid row whose anisotropy is closest to the model value.
        let axis = &cfg.axes[1];
        (0..p).min_by(|&a, &b| {
            let ga = (axis.to_physical(prep.grid[a].coords()[1], cfg.side) - cfg.model.gamma).abs();
            let gb = (axis.to_physical(prep.grid[b].coords()[1], cfg.side) - cfg.model.gamma).abs();
            ga.total_cmp(&gb)
        })
    };
    (0..p)
        .map(|i| {
            let g = match row {
                None => i,
                Some(j) => i * p + j,
            };
            CurvePoint {
                x: cfg.physical(prep.grid[g].coords()).0,
                truth: truth[g],
                prediction: pred[g],
            }
        })
        .collect()
}

fn summarize(cfg: &ExperimentConfig, rows: &[ScalingRow]) -> Result<ScalingResult> {
    let mut summary = Vec::with_capacity(cfg.sweep.len());
    for &n in &cfg.sweep {
        let sel: Vec<&ScalingRow> = rows.iter().filter(|r| r.n == n).collect();
        let errs: Vec<f64> = sel.iter().map(|r| r.sup_error).collect();
        let traces: Vec<f64> = sel.iter().map(|r| r.trace_max_dev).collect();
        summary.push(SizeSummary {
            n,
            mean_sup_error: mean(&errs),
            std_error: standard_error(&errs),
            median_sup_error: median(&errs),
            mean_trace_max_dev: mean(&traces),
            median_trace_max_dev: median(&traces),
        });
    }
    let fit = if summary.len() >= 3 {
        Some(loglog_fit(
            &summary
                .iter()
                .map(|s| (s.n as f64, s.mean_sup_error))
                .collect::<Vec<_>>(),
        )?)
    } else {
        None
    };
    Ok(ScalingResult {
        rows: rows.to_vec(),
        summary,
        fit,
    })
}

/// Runs every `(N, run)` pair of the sweep. Rows come back ordered by sweep entry, then run.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let prep = prepare(cfg)?;
    let curve_n = cfg.curve_n();
    let jobs: Vec<(usize, usize)> = (0..cfg.sweep.len())
        .flat_map(|s| (0..cfg.runs).map(move |r| (s, r)))
        .collect();
    let outcomes: Vec<RunOutcome> = jobs
        .par_iter()
        .map(|&(s, r)| run_one(cfg, &prep, s, r, r == 0 && cfg.sweep[s] == curve_n))
        .collect::<Result<_>>()?;
    let rows: Vec<ScalingRow> = outcomes.iter().map(|o| o.row).collect();
    let mut curve = outcomes.into_iter().find_map(|o| o.curve);
    if curve.is_none() && !cfg.sweep.contains(&curve_n) && cfg.task != Task::Density {
        let extra = ExperimentConfig {
            sweep: vec![curve_n],
            runs: 1,
            ..cfg.clone()
        };
        curve = run_one(&extra, &prep, 0, 0, true)?.curve;
    }
    Ok(ExperimentOutput {
        config: cfg.clone(),
        result: summarize(cfg, &rows)?,
        curve,
    })
}

fn expect_task(cfg: &ExperimentConfig, task: Task) -> Result<()> {
    if cfg.task != task {
        return Err(Error::Config(format!(
            "expected a {task:?} config, got {:?}",
            cfg.task
        )));
    }
    Ok(())
}

pub fn run_energy_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    expect_task(cfg, Task::Energy)?;
    if cfg.m != 1 {
        return Err(Error::Config(
            "the energy task uses a one-dimensional box".into(),
        ));
    }
    run_experiment(cfg)
}

pub fn run_correlation_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    expect_task(cfg, Task::Correlation)?;
    run_experiment(cfg)
}

pub fn run_density_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    expect_task(cfg, Task::Density)?;
    run_experiment(cfg)
}

/// Paths written by [`write_outputs`].
#[derive(Clone, Debug)]
pub struct OutputFiles {
    pub rows: PathBuf,
    pub sidecar: PathBuf,
    pub curve: Option<PathBuf>,
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

#[derive(Serialize)]
struct Sidecar<'a> {
    fit: Option<LogLogFit>,
    summary: &'a [SizeSummary],
    config: &'a ExperimentConfig,
}

/// Writes `<stem>.csv` (one row per run), `<stem>.json` (fit, per-size summary and config)
/// and, for scalar tasks, `<stem>.curve.csv`.
pub fn write_outputs(out: &ExperimentOutput, stem: &Path) -> Result<OutputFiles> {
    if let Some(dir) = stem.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let rows = with_suffix(stem, ".csv");
    let mut w = csv::Writer::from_path(&rows)?;
    for r in &out.result.rows {
        w.serialize(r)?;
    }
    w.flush()?;

    let sidecar = with_suffix(stem, ".json");
    let doc = Sidecar {
        fit: out.result.fit,
        summary: &out.result.summary,
        config: &out.config,
    };
    fs::write(&sidecar, serde_json::to_string_pretty(&doc)? + "\n")?;

    let curve = match &out.curve {
        Some(points) => {
            let path = with_suffix(stem, ".curve.csv");
            let mut w = csv::Writer::from_path(&path)?;
            for p in points {
                w.serialize(p)?;
            }
            w.flush()?;
            Some(path)
        }
        None => None,
    };
    Ok(OutputFiles {
        rows,
        sidecar,
        curve,
    })
}
