//! Acceptance report. Prints one `PASS` or `FAIL` line per criterion and a summary.
//!
//! The process exits 0 either way so that the rest of the suite still runs; set
//! `PGK_ACCEPTANCE_STRICT=1` to turn any failure into a nonzero exit.

use std::f64::consts::PI;
use std::time::Instant;

use pgk_core::complexity::{compare_ratio, n_mcdiarmid, BoundKernel, ComplexityBudget};
use pgk_core::estimator::{predict_density, FejerSeries};
use pgk_core::experiments::{run_experiment, ExperimentConfig};
use pgk_core::kernels::{convolve_quadrature, eval_dirichlet_1d, eval_fejer, verify_pgk};
use pgk_core::quantum::{validate, ValidationTolerance};
use pgk_core::rkhs::{
    empirical_error, expected_error_estimate, generalization_bound, BoundVariant, RkhsBoundInputs,
};
use pgk_core::xy_model::{
    ground_energy_ed, ground_energy_ff, longrange_xx, longrange_xx_closed_form, sector_crossings,
};
use pgk_core::{KernelSpec, ParamPoint, ParamSpace, PredictOptions, TrainingSet, XYParams};
use rand::Rng;

type Outcome = (bool, String);
type Check = fn() -> Outcome;

fn kernel_axioms() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for m in [1, 2] {
        let space = ParamSpace::uniform(m, 2.0).unwrap();
        for lambda in [8, 16, 32, 64, 128, 256] {
            let r = verify_pgk(
                &KernelSpec::fejer(lambda, space.clone()).unwrap(),
                &[0.25, 0.5],
                4096,
            )
            .unwrap();
            if !r.passed {
                ok = false;
                notes.push(format!("fejer m={m} lambda={lambda}: {r:?}"));
            }
        }
        for h in [0.01, 0.05, 0.1, 0.2].map(|f| f * 2.0) {
            let r = verify_pgk(
                &KernelSpec::gaussian(h, space.clone()).unwrap(),
                &[0.25, 0.5],
                4096,
            )
            .unwrap();
            if !r.passed {
                ok = false;
                notes.push(format!("gaussian m={m} h={h}: {r:?}"));
            }
        }
    }
    let line = ParamSpace::uniform(1, 2.0).unwrap();
    let mut prev = 0.0;
    let mut min_ratio = f64::INFINITY;
    for lambda in [8u32, 16, 32, 64, 128] {
        let spec = KernelSpec::dirichlet(lambda, line.clone()).unwrap();
        let r = verify_pgk(&spec, &[0.25, 0.5], 4096).unwrap();
        if r.passed || r.min_value >= 0.0 {
            ok = false;
            notes.push(format!("dirichlet lambda={lambda} not rejected"));
        }
        let cells = 200_000;
        let l1: f64 = line
            .midpoints(cells)
            .map(|x| {
                eval_dirichlet_1d(&line.point(vec![x]).unwrap(), lambda, &line)
                    .unwrap()
                    .abs()
            })
            .sum::<f64>()
            / cells as f64;
        if l1 <= prev {
            ok = false;
            notes.push(format!("dirichlet L1 not increasing at lambda={lambda}"));
        }
        prev = l1;
        // Lebesgue constants grow like (4/pi^2) ln lambda.
        min_ratio = min_ratio.min(l1 / (lambda as f64).ln());
    }
    if min_ratio < 4.0 / (PI * PI) {
        ok = false;
    }
    notes.push(format!("dirichlet min L1/ln(lambda) = {min_ratio:.3}"));
    (ok, notes.join("; "))
}

fn fejer_dirichlet_identity() -> Outcome {
    let line = ParamSpace::uniform(1, 2.0).unwrap();
    let lambda = 37;
    let mut worst: f64 = 0.0;
    for x in line.sample(1000, 11).unwrap() {
        let avg = (0..lambda)
            .map(|n| eval_dirichlet_1d(&x, n, &line).unwrap())
            .sum::<f64>()
            / lambda as f64;
        worst = worst.max((avg - eval_fejer(&x, lambda, &line)).abs());
    }
    (
        worst <= 1e-10,
        format!("max deviation {worst:.2e} over 1000 points"),
    )
}

fn oracle_equivalence() -> Outcome {
    let fields: Vec<f64> = (0..21).map(|i| -1.5 + 0.15 * i as f64).collect();
    let gammas: Vec<f64> = (0..21).map(|i| 0.05 * i as f64).collect();
    let mut worst: f64 = 0.0;
    for n in 2..=10 {
        for &gamma in &gammas {
            for &h in &fields {
                let p = XYParams::new(n, 1.0, gamma, h).unwrap();
                worst = worst.max((ground_energy_ff(&p) - ground_energy_ed(&p).unwrap()).abs());
            }
        }
    }
    (
        worst <= 1e-10,
        format!("max |E_ff - E_ed| = {worst:.2e} over n = 2..10, 21x21 grid"),
    )
}

fn vacua_competition() -> Outcome {
    let p = XYParams::new(5, 1.0, 1.0 / 3.0, 0.0).unwrap();
    let roots = sector_crossings(&p, (-1.5, 1.5), 3000).unwrap();
    let ok = roots.len() >= 2 && roots.iter().all(|h| h.abs() <= 1.0 + 1e-6);
    (ok, format!("crossings at {roots:.6?}"))
}

fn energy_scaling() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for renormalize in [false, true] {
        let cfg = ExperimentConfig {
            renormalize,
            ..ExperimentConfig::energy_default()
        };
        let out = run_experiment(&cfg).unwrap();
        let fit = out.result.fit.unwrap();
        let curve_sup = out
            .curve
            .as_ref()
            .unwrap()
            .iter()
            .map(|p| (p.truth - p.prediction).abs())
            .fold(0.0, f64::max);
        // The criterion is on the plain estimator; the renormalized run is reported only.
        if !renormalize {
            ok = (0.35..=0.55).contains(&fit.slope) && fit.r_squared >= 0.95 && curve_sup <= 0.05;
        }
        notes.push(format!(
            "renormalize={renormalize}: slope {:.3}, r2 {:.3}, curve sup {curve_sup:.4}",
            fit.slope, fit.r_squared
        ));
    }
    (ok, notes.join("; "))
}

fn correlation_scaling_2d() -> Outcome {
    let out = run_experiment(&ExperimentConfig::correlation_2d_default()).unwrap();
    let fit = out.result.fit.unwrap();
    let means: Vec<String> = out
        .result
        .summary
        .iter()
        .map(|s| format!("{:.4}", s.mean_sup_error))
        .collect();
    let ok = (0.35..=0.55).contains(&fit.slope) && fit.r_squared >= 0.90;
    (
        ok,
        format!(
            "slope {:.3}, r2 {:.3}, mean sup errors [{}]",
            fit.slope,
            fit.r_squared,
            means.join(", ")
        ),
    )
}

fn correlation_curve_1d() -> Outcome {
    let out = run_experiment(&ExperimentConfig::correlation_1d_default()).unwrap();
    let s = &out.result.summary[0];
    let worst = out
        .result
        .rows
        .iter()
        .map(|r| r.sup_error)
        .fold(0.0, f64::max);
    let at_isotropic = longrange_xx(1.0, 0.0).unwrap().value;
    let closed = longrange_xx_closed_form(1.0, 0.0).unwrap();
    let disordered = longrange_xx(1.0 / 3.0, 1.4).unwrap().value;
    let ok = s.mean_sup_error <= 0.02
        && (at_isotropic - 0.25).abs() <= 1e-12
        && closed == 0.25
        && disordered <= 1e-4;
    (
        ok,
        format!(
            "windowed sup error mean {:.4} (worst run {worst:.4}); value(1, 0) = {at_isotropic}; value(1/3, 1.4) = {disordered:.1e}",
            s.mean_sup_error
        ),
    )
}

fn density_behavior() -> Outcome {
    let cfg = ExperimentConfig::density_default();
    let out = run_experiment(&cfg).unwrap();
    let med: Vec<f64> = out
        .result
        .summary
        .iter()
        .map(|s| s.median_sup_error)
        .collect();
    let tr: Vec<f64> = out
        .result
        .summary
        .iter()
        .map(|s| s.median_trace_max_dev)
        .collect();
    let monotone = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0]);
    let mut ok = monotone(&med) && monotone(&tr);

    // Hermiticity and positivity of individual predictions.
    let space = cfg.space().unwrap();
    let spec = cfg.kernel_spec().unwrap();
    let tol = ValidationTolerance {
        hermitian: 1e-12,
        trace: f64::INFINITY,
        min_eigenvalue: 1e-10,
    };
    let mut checked = 0;
    for (i, &n) in cfg.sweep.iter().enumerate() {
        let set = TrainingSet::sample(&space, n, 900 + i as u64, |x| cfg.density_truth(x.coords()))
            .unwrap();
        for x in space.sample(10, 77 + i as u64).unwrap() {
            let sigma = predict_density(&x, &set, &spec, &PredictOptions::default()).unwrap();
            let r = validate(&sigma, &tol);
            ok &= r.hermitian_ok && r.psd_ok;
            checked += 1;
        }
    }

    // Trace concentration at N = 10^6, lambda = 50, m = 1.
    let line = ParamSpace::uniform(1, 2.0).unwrap();
    let fejer = KernelSpec::fejer(50, line.clone()).unwrap();
    let mut good = 0;
    let mut worst: f64 = 0.0;
    for rep in 0..100u64 {
        let pts = line.sample(1_000_000, 5000 + rep).unwrap();
        let series = FejerSeries::fit(&fejer, &pts, &[vec![1.0; pts.len()]]).unwrap();
        let dev = line
            .sample(100, 9000 + rep)
            .unwrap()
            .iter()
            .map(|x| (series.eval(x.coords()).unwrap()[0] - 1.0).abs())
            .fold(0.0, f64::max);
        worst = worst.max(dev);
        if dev <= 0.05 {
            good += 1;
        }
    }
    ok &= good >= 95;
    (
        ok,
        format!(
            "median sup {med:.4?}; median trace dev {tr:.4?}; {checked} predictions validated; trace within 0.05 in {good}/100 repetitions (worst {worst:.4})"
        ),
    )
}

fn mcdiarmid_instance() -> Outcome {
    let (eps, delta, lambda) = (0.2, 0.1, 20);
    let energy = ExperimentConfig::energy_default();
    let space = energy.space().unwrap();
    let truth = |x: &[f64]| energy.scalar_truth(x).unwrap();
    let sup = space
        .grid(2000)
        .unwrap()
        .iter()
        .map(|x| truth(x.coords()).abs())
        .fold(0.0, f64::max);
    let b = 2.0 * sup;
    let n = n_mcdiarmid(b, lambda, 1, eps, delta).unwrap().ceil() as usize;
    let spec = KernelSpec::fejer(lambda, space.clone()).unwrap();
    let x0 = space.point(vec![0.37]).unwrap();
    let target = convolve_quadrature(truth, &spec, &x0, 20_000).unwrap();
    let mut failures = 0;
    let mut rng = pgk_core::param_space::seeded_rng(31, 0);
    for _ in 0..200 {
        let pts = space.sample(n, rng.random()).unwrap();
        let labels: Vec<f64> = pts.iter().map(|p| truth(p.coords())).collect();
        let est = FejerSeries::fit(&spec, &pts, &[labels])
            .unwrap()
            .eval(x0.coords())
            .unwrap()[0];
        if (est - target).abs() >= eps / 2.0 {
            failures += 1;
        }
    }
    let freq = failures as f64 / 200.0;
    (
        freq <= delta + 0.07,
        format!("N = {n}, B = {b:.3}, failure frequency {freq:.3}"),
    )
}

fn complexity_ratios() -> Outcome {
    let budget = ComplexityBudget::comparison(2, 100.0, 0.1);
    let f = compare_ratio(&budget, BoundKernel::Fejer).unwrap().log10;
    let g = compare_ratio(&budget, BoundKernel::Gaussian).unwrap().log10;
    let ok = (f + 48.0).abs() <= 2.0 && (g + 61.0).abs() <= 2.0;
    (ok, format!("log10 ratio Fejer {f:.2}, Gaussian {g:.2}"))
}

fn rkhs_bound() -> Outcome {
    let cfg = ExperimentConfig::energy_default();
    let space = cfg.space().unwrap();
    let spec = cfg.kernel_spec().unwrap();
    let truth = |x: &ParamPoint| cfg.scalar_truth(x.coords()).unwrap();
    let sup = space
        .grid(2000)
        .unwrap()
        .iter()
        .map(truth)
        .map(f64::abs)
        .fold(0.0, f64::max);
    let delta = 0.05;
    let n = 10_000;
    let inputs = RkhsBoundInputs::for_kernel(&spec, 2.0 * sup, n, delta).unwrap();
    let mut ok = inputs.trace_k <= n as f64 * inputs.r * inputs.r * (1.0 + 1e-12);
    let mut worst_gap = f64::INFINITY;
    for run in 0..30u64 {
        let set = TrainingSet::sample(&space, n, 300 + run, |x| Ok(truth(x))).unwrap();
        let series = FejerSeries::fit(&spec, set.points(), &[set.labels().to_vec()]).unwrap();
        let predictor = |x: &ParamPoint| Ok(series.eval(x.coords())?[0]);
        let e_t = empirical_error(&set, predictor).unwrap();
        let test = space.sample(2000, 700 + run).unwrap();
        let e_p = expected_error_estimate(&test, predictor, truth).unwrap();
        let main = generalization_bound(&inputs, e_t, BoundVariant::MainText);
        let appendix = generalization_bound(&inputs, e_t, BoundVariant::Appendix);
        ok &= e_p <= main && appendix >= e_t;
        worst_gap = worst_gap.min(main - e_p);
    }
    (
        ok,
        format!(
            "min (bound - estimate) over 30 runs {worst_gap:.3}; R^2 = {:.1}",
            inputs.r * inputs.r
        ),
    )
}

fn convolution_multiplier() -> Outcome {
    let side = 3.0;
    let line = ParamSpace::uniform(1, side).unwrap();
    let mut worst: f64 = 0.0;
    for lambda in [10, 50] {
        let spec = KernelSpec::fejer(lambda, line.clone()).unwrap();
        for x in line.sample(20, 3).unwrap() {
            let conv =
                convolve_quadrature(|y| (2.0 * PI * y[0] / side).cos(), &spec, &x, 20_000).unwrap();
            let expected = (1.0 - 1.0 / lambda as f64) * (2.0 * PI * x.coords()[0] / side).cos();
            worst = worst.max((conv - expected).abs());
        }
    }
    (worst <= 1e-4, format!("max deviation {worst:.2e}"))
}

fn main() {
    let criteria: [(&str, Check); 12] = [
        ("kernel axioms", kernel_axioms),
        ("fejer-dirichlet identity", fejer_dirichlet_identity),
        ("oracle equivalence", oracle_equivalence),
        ("vacua competition", vacua_competition),
        ("energy scaling (m=1)", energy_scaling),
        ("correlation scaling (m=2)", correlation_scaling_2d),
        ("correlation curve (m=1) and limits", correlation_curve_1d),
        ("density learning and trace concentration", density_behavior),
        ("mcdiarmid instance", mcdiarmid_instance),
        ("complexity ratios", complexity_ratios),
        ("rkhs bound", rkhs_bound),
        ("convolution multiplier", convolution_multiplier),
    ];
    let mut passed = 0;
    for (name, check) in criteria {
        let t = Instant::now();
        let (ok, detail) = check();
        passed += ok as usize;
        println!(
            "{} {name}: {detail} [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {passed}/{} passed", criteria.len());
    let strict = std::env::var("PGK_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && passed < criteria.len() {
        std::process::exit(1);
    }
}
