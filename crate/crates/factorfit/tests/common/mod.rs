//! Randomized property checks shared by the property suite and the
//! acceptance gate. Every check runs a fixed number of cases from a seeded
//! generator, so failures reproduce exactly.

use factorfit::distributions::{
    fit_gamma, fit_geometric, fit_negbin_natural_r, fit_poisson, DiscreteUniformParams,
    DistributionParams, GammaParams, GeometricParams, LogarithmicParams, NegBinParams,
    PoissonParams,
};
use factorfit::factorize::als_fit;
use factorfit::gof::combine_pair;
use factorfit::mixture::{gamma_convolution_density, integrate_adaptive};
use factorfit::table::{ContingencyTable, SeriesSample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Geometric, Poisson};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn assert_monotone_unit_range(label: &str, values: &[f64]) {
    for (i, w) in values.windows(2).enumerate() {
        assert!(
            w[1] >= w[0] - 1e-12,
            "{label}: cdf decreases at index {i}: {} -> {}",
            w[0],
            w[1]
        );
    }
    for v in values {
        assert!(
            (-1e-12..=1.0 + 1e-12).contains(v),
            "{label}: cdf value {v} outside [0, 1]"
        );
    }
}

pub fn check_cdf_monotonicity(seed: u64, cases: usize) {
    let mut r = rng(seed);
    for case in 0..cases {
        match case % 6 {
            0 => {
                let d = PoissonParams {
                    lambda: r.random_range(0.1..60.0),
                };
                let vals: Vec<f64> = (0..150).map(|k| d.cdf(k)).collect();
                assert_monotone_unit_range("poisson", &vals);
            }
            1 => {
                let d = NegBinParams {
                    r: r.random_range(0.5..40.0),
                    p: r.random_range(0.05..0.95),
                };
                let vals: Vec<f64> = (0..200).map(|k| d.cdf(k)).collect();
                assert_monotone_unit_range("negbin", &vals);
            }
            2 => {
                let d = GeometricParams {
                    p: r.random_range(0.02..0.9),
                };
                let vals: Vec<f64> = (0..200).map(|k| d.cdf(k)).collect();
                assert_monotone_unit_range("geometric", &vals);
            }
            3 => {
                let d = LogarithmicParams {
                    theta: r.random_range(0.05..0.995),
                };
                let vals: Vec<f64> = (0..300).map(|k| d.cdf(k)).collect();
                assert_monotone_unit_range("logarithmic", &vals);
            }
            4 => {
                let a = r.random_range(0..30i64);
                let d = DiscreteUniformParams {
                    a,
                    b: a + r.random_range(1..40i64),
                };
                let vals: Vec<f64> = (0..100).map(|k| d.cdf(k)).collect();
                assert_monotone_unit_range("discrete uniform", &vals);
            }
            _ => {
                let d = GammaParams {
                    shape: r.random_range(0.2..50.0),
                    scale: r.random_range(0.02..10.0),
                };
                let upper = d.mean() + 10.0 * d.variance().sqrt();
                let vals: Vec<f64> = (0..300).map(|i| d.cdf(i as f64 * upper / 299.0)).collect();
                assert_monotone_unit_range("gamma", &vals);
            }
        }
    }
}

pub fn check_mass_normalization(seed: u64, cases: usize) {
    let mut r = rng(seed);
    for case in 0..cases {
        let (label, total) = match case % 6 {
            0 => {
                let d = PoissonParams {
                    lambda: r.random_range(0.1..60.0),
                };
                let k_max = (d.lambda + 40.0 * d.lambda.sqrt() + 60.0) as u32;
                ("poisson", (0..=k_max).map(|k| d.mass(k)).sum::<f64>())
            }
            1 => {
                let d = NegBinParams {
                    r: r.random_range(0.5..40.0),
                    p: r.random_range(0.05..0.9),
                };
                let sigma = (d.mean() / (1.0 - d.p)).sqrt();
                let k_max = (d.mean() + 50.0 * sigma + 80.0) as u32;
                ("negbin", (0..=k_max).map(|k| d.mass(k)).sum::<f64>())
            }
            2 => {
                let d = GeometricParams {
                    p: r.random_range(0.02..0.9),
                };
                let k_max = (1e-14f64.ln() / (1.0 - d.p).ln()).ceil() as u32 + 10;
                ("geometric", (0..=k_max).map(|k| d.mass(k)).sum::<f64>())
            }
            3 => {
                let d = LogarithmicParams {
                    theta: r.random_range(0.05..0.99),
                };
                let k_max = (1e-16f64.ln() / d.theta.ln()).ceil() as u32 + 100;
                ("logarithmic", (1..=k_max).map(|k| d.mass(k)).sum::<f64>())
            }
            4 => {
                let a = r.random_range(0..30i64);
                let d = DiscreteUniformParams {
                    a,
                    b: a + r.random_range(1..40i64),
                };
                let total = (d.a..=d.b).map(|k| d.mass(k as u32)).sum::<f64>();
                ("discrete uniform", total)
            }
            _ => {
                let d = GammaParams {
                    shape: r.random_range(1.1..30.0),
                    scale: r.random_range(0.05..5.0),
                };
                // Beyond mean + 45 sigma the remaining gamma tail mass is far
                // below 1e-12 for every shape drawn here. The head segment is
                // integrated under z = t^2, which turns the z^(shape-1) cusp
                // at the origin into a C1 integrand the panels can resolve;
                // the smooth tail segments run on the original axis.
                let sigma = d.variance().sqrt();
                let cut1 = d.mean() + 8.0 * sigma;
                let cut2 = d.mean() + 20.0 * sigma;
                let cut3 = d.mean() + 45.0 * sigma;
                let head =
                    integrate_adaptive(|t| 2.0 * t * d.density(t * t), 0.0, cut1.sqrt(), 3e-13)
                        .expect("gamma head integrates");
                let mid = integrate_adaptive(|z| d.density(z), cut1, cut2, 3e-13)
                    .expect("gamma mid integrates");
                let tail = integrate_adaptive(|z| d.density(z), cut2, cut3, 3e-13)
                    .expect("gamma tail integrates");
                ("gamma", head + mid + tail)
            }
        };
        assert!(
            (total - 1.0).abs() < 1e-10,
            "{label}: mass sums to {total}, tail error {:.3e}",
            (total - 1.0).abs()
        );
    }
}

fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

pub fn check_mle_stationarity(seed: u64, cases: usize) {
    let mut r = rng(seed);
    for case in 0..cases {
        let n = r.random_range(40..160usize);
        match case % 4 {
            0 => {
                let lambda = r.random_range(0.5..40.0);
                let sampler = Poisson::new(lambda).unwrap();
                let mut values: Vec<u32> = Vec::new();
                while values.iter().sum::<u32>() == 0 {
                    values = (0..n).map(|_| sampler.sample(&mut r) as u32).collect();
                }
                let series = SeriesSample::new("x", values.clone()).unwrap();
                let fit = fit_poisson(&series).unwrap();
                let DistributionParams::Poisson(p) = fit.params else {
                    unreachable!()
                };
                let xbar = values.iter().map(|v| *v as f64).sum::<f64>() / n as f64;
                let mean_ll = |lam: f64| xbar * lam.ln() - lam;
                let g = central_diff(mean_ll, p.lambda, 1e-4 * p.lambda);
                assert!(
                    g.abs() < 1e-4,
                    "poisson gradient {g} at lambda {}",
                    p.lambda
                );
            }
            1 => {
                let p0 = r.random_range(0.05..0.8);
                let sampler = Geometric::new(p0).unwrap();
                let mut values: Vec<u32> = Vec::new();
                while values.iter().sum::<u32>() == 0 {
                    values = (0..n).map(|_| sampler.sample(&mut r) as u32).collect();
                }
                let fit = fit_geometric(&values).unwrap();
                let DistributionParams::Geometric(g) = fit.params else {
                    unreachable!()
                };
                let xbar = values.iter().map(|v| *v as f64).sum::<f64>() / n as f64;
                let mean_ll = |p: f64| p.ln() + xbar * (1.0 - p).ln();
                let grad = central_diff(mean_ll, g.p, 1e-5 * g.p);
                assert!(grad.abs() < 1e-4, "geometric gradient {grad} at p {}", g.p);
            }
            2 => {
                let shape = r.random_range(1.5..25.0);
                let scale = r.random_range(0.1..3.0);
                let sampler = Gamma::new(shape, scale).unwrap();
                let values: Vec<f64> = (0..n).map(|_| sampler.sample(&mut r)).collect();
                let fit = fit_gamma(&values).unwrap();
                let DistributionParams::Gamma(g) = fit.params else {
                    unreachable!()
                };
                let mean_ll = |pars: GammaParams| {
                    values.iter().map(|x| pars.ln_density(*x)).sum::<f64>() / n as f64
                };
                let ga = central_diff(
                    |a| {
                        mean_ll(GammaParams {
                            shape: a,
                            scale: g.scale,
                        })
                    },
                    g.shape,
                    1e-4 * g.shape,
                );
                let gs = central_diff(
                    |s| {
                        mean_ll(GammaParams {
                            shape: g.shape,
                            scale: s,
                        })
                    },
                    g.scale,
                    1e-4 * g.scale,
                );
                assert!(
                    ga.abs() < 1e-4 && gs.abs() < 1e-4,
                    "gamma gradient ({ga}, {gs}) at {:?}",
                    g
                );
            }
            _ => {
                // Sampling the rate from Gamma and the count from Poisson at
                // that rate draws from the mixed law directly.
                let r_true = r.random_range(2..15u32) as f64;
                let p_true = r.random_range(0.3..0.7);
                let mix = Gamma::new(r_true, p_true / (1.0 - p_true)).unwrap();
                let values: Vec<u32> = (0..n)
                    .map(|_| {
                        let z: f64 = mix.sample(&mut r);
                        Poisson::new(z.max(1e-9)).unwrap().sample(&mut r) as u32
                    })
                    .collect();
                let Ok(fit) = fit_negbin_natural_r(&values, 64) else {
                    continue;
                };
                let DistributionParams::NegBin(nb) = fit.params else {
                    unreachable!()
                };
                let xbar = values.iter().map(|v| *v as f64).sum::<f64>() / n as f64;
                let mean_ll = |p: f64| xbar * p.ln() + nb.r * (1.0 - p).ln();
                let grad = central_diff(mean_ll, nb.p, 1e-5 * nb.p);
                assert!(
                    grad.abs() < 1e-4,
                    "negbin profile gradient {grad} at (r, p) = ({}, {})",
                    nb.r,
                    nb.p
                );
            }
        }
    }
}

pub fn check_combine_identity(seed: u64, cases: usize) {
    let mut r = rng(seed);
    for _ in 0..cases {
        let p = r.random_range(0.001..1.0);
        let c = combine_pair(p, p);
        assert!(
            (c.p_cs - p).abs() <= 1e-13,
            "combine_pair({p}, {p}).p_cs = {}, expected {p}",
            c.p_cs
        );
        assert!(c.cs >= 0.0);
    }
}

pub fn check_als_descent(seed: u64, cases: usize) {
    let mut r = rng(seed);
    for case in 0..cases {
        let m = r.random_range(2..=7usize);
        let n = r.random_range(2..=7usize);
        let cells: Vec<Vec<u32>> = (0..m)
            .map(|_| (0..n).map(|_| r.random_range(1..=40u32)).collect())
            .collect();
        let table = ContingencyTable::new(
            (0..m).map(|i| format!("r{i}")).collect(),
            (0..n).map(|j| format!("c{j}")).collect(),
            cells,
        )
        .unwrap();
        let fit = als_fit(&table, 1e-12, 400).unwrap();
        for (i, w) in fit.s_squared_trace.windows(2).enumerate() {
            assert!(
                w[1] <= w[0] + 1e-9 * (1.0 + w[0]),
                "case {case}: residual rises at iteration {i}: {} -> {}",
                w[0],
                w[1]
            );
        }
    }
}

pub fn check_convolution_additivity(seed: u64, cases: usize) {
    let mut r = rng(seed);
    for case in 0..cases {
        let g1 = GammaParams {
            shape: r.random_range(2.0..25.0),
            scale: r.random_range(0.05..2.0),
        };
        let g2 = GammaParams {
            shape: r.random_range(2.0..25.0),
            scale: r.random_range(0.05..2.0),
        };
        let upper = g1.mean() + g2.mean() + 8.0 * (g1.variance().sqrt() + g2.variance().sqrt());
        // The trapezoid error scales with (step / sigma)^2, so resolve the
        // combined spread rather than the span: sharp peaks far from the
        // origin need proportionally more points.
        let sigma_sum = (g1.variance() + g2.variance()).sqrt();
        let step = (upper / 900.0).min(sigma_sum / 150.0);
        let curve = gamma_convolution_density(&g1, &g2, step, 8.0).unwrap();
        let mean_expected = g1.mean() + g2.mean();
        let var_expected = g1.variance() + g2.variance();
        assert!(
            (curve.mass - 1.0).abs() < 2e-3,
            "case {case}: convolved mass {} off unit",
            curve.mass
        );
        assert!(
            (curve.mean() - mean_expected).abs() < 1.5e-3 * mean_expected,
            "case {case}: mean {} vs {}",
            curve.mean(),
            mean_expected
        );
        assert!(
            (curve.variance() - var_expected).abs() < 1.5e-2 * var_expected,
            "case {case}: variance {} vs {}",
            curve.variance(),
            var_expected
        );
    }
}
