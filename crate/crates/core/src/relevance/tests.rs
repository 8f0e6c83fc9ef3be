use super::*;
use crate::gp::{fit, HyperPriors, OptimizerConfig};
use crate::kernel::KernelHypers;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn model_with(hypers: KernelHypers, n: usize, seed: u64) -> FittedGP {
    let p = hypers.dim();
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, p, |_, _| r.gen_range(-1.5f64..1.5));
    let y = DVector::from_fn(n, |i, _| {
        (1.3 * x[(i, 0)]).sin()
            + if p > 1 { 0.5 * x[(i, 1)] } else { 0.0 }
            + 0.1 * r.sample::<f64, _>(StandardNormal)
    });
    FittedGP::from_hypers(x, y, hypers, None).unwrap()
}

/// `y = sin(1.5 x1) + x2 + noise` with a third, unused column.
fn fitted_with_dummy(seed: u64) -> FittedGP {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let n = 120;
    let x = DMatrix::from_fn(n, 3, |_, _| r.sample::<f64, _>(StandardNormal));
    let y = DVector::from_fn(n, |i, _| {
        (1.5 * x[(i, 0)]).sin() + x[(i, 1)] + 0.1 * r.sample::<f64, _>(StandardNormal)
    });
    fit(&x, &y, None, &OptimizerConfig::default()).unwrap()
}

#[test]
fn ard_direct_formula() {
    let g = model_with(KernelHypers::new(1.0, &[1.0, 2.0, 4.0], 0.5, 0.2), 10, 1);
    let r = ard_relevance(&g);
    for (a, e) in r.aggregate.iter().zip([1.0, 0.5, 0.25]) {
        assert!((a - e).abs() < 1e-12);
    }
    assert_eq!(r.ranking, vec![0, 1, 2]);
    assert!(r.pointwise.is_none());
}

#[test]
fn ard_ties_use_index_order() {
    let g = model_with(KernelHypers::new(1.0, &[1.5; 4], 0.5, 0.2), 10, 2);
    assert_eq!(ard_relevance(&g).ranking, vec![0, 1, 2, 3]);
}

#[test]
fn ranking_ties_and_scaling() {
    assert_eq!(rank_descending(&[0.5, 2.0, 0.5, 3.0]), vec![3, 1, 0, 2]);
    let s = scale_to_max(&[0.5, 2.0, 0.5, 4.0]);
    assert_eq!(s, vec![0.125, 0.5, 0.125, 1.0]);
    assert_eq!(rank_descending(&s), rank_descending(&[0.5, 2.0, 0.5, 4.0]));
    assert_eq!(scale_to_max(&[0.0, 0.0]), vec![0.0, 0.0]);
}

#[test]
fn dummy_column_has_negligible_relevance() {
    let g = fitted_with_dummy(3);
    let l = g.hypers().lengthscales();
    assert!(l[2] >= 1e3, "dummy lengthscale {}", l[2]);
    let kl = kl_relevance(&g, g.x(), DEFAULT_DELTA).unwrap();
    let max = kl.aggregate.iter().copied().fold(0.0, f64::max);
    assert!(kl.aggregate[2] < 1e-3 * max, "{:?}", kl.aggregate);
    let var = relevance(&g, Method::Var, g.x(), DEFAULT_DELTA, DEFAULT_QUAD_ORDER).unwrap();
    let max = var.aggregate.iter().copied().fold(0.0, f64::max);
    assert!(var.aggregate[2] < 1e-6 * max, "{:?}", var.aggregate);
    assert_eq!(kl.ranking[2], 2);
}

/// Central-difference derivative of `f` along coordinate `j`.
fn central_diff(x: &[f64], j: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
    let h = 1e-4;
    let mut a = x.to_vec();
    let mut b = x.to_vec();
    a[j] += h;
    b[j] -= h;
    (f(&a) - f(&b)) / (2.0 * h)
}

/// Small-Δ limit of `√(2·KL)/Δ` between Gaussians: `√(μ'² + 2σ'²)/σ`.
fn kl_limit(g: &FittedGP, x: &[f64], j: usize) -> f64 {
    let dm = central_diff(x, j, |q| g.predict_mean(q).unwrap());
    let ds = central_diff(x, j, |q| g.predict(q, Flavor::Observation).unwrap().sd());
    let s = g.predict(x, Flavor::Observation).unwrap().sd();
    (dm * dm + 2.0 * ds * ds).sqrt() / s
}

#[test]
fn kl_matches_derivative_limit() {
    // The forward perturbation carries an O(Δ·μ''/μ') bias, so the limit is
    // checked at a step where that term is far below the tolerance.
    let g = fitted_with_dummy(4);
    let mut checked = 0;
    for i in 0..20 {
        let x = kernel::row_vec(g.x(), i);
        for j in 0..2 {
            let r = kl_relevance_point(&g, &x, j, 1e-6).unwrap();
            let lim = kl_limit(&g, &x, j);
            assert!(
                (r - lim).abs() <= 1e-3 * lim,
                "point {i} var {j}: {r} vs {lim}"
            );
            checked += 1;
        }
    }
    assert_eq!(checked, 40);
}

#[test]
fn kl_is_insensitive_to_delta() {
    let g = fitted_with_dummy(5);
    let a = kl_relevance(&g, g.x(), 1e-5).unwrap().scaled();
    let b = kl_relevance(&g, g.x(), 1e-3).unwrap().scaled();
    for (u, v) in a.iter().zip(&b) {
        assert!((u - v).abs() <= 0.02, "{a:?} vs {b:?}");
    }
}

#[test]
fn kl_argument_errors() {
    let g = model_with(KernelHypers::new(1.0, &[1.0, 1.0], 0.5, 0.2), 10, 6);
    assert!(kl_relevance_point(&g, &[0.0, 0.0], 2, 1e-4).is_err());
    assert!(kl_relevance_point(&g, &[0.0, 0.0], 0, 0.0).is_err());
    assert!(kl_relevance_point(&g, &[0.0], 0, 1e-4).is_err());
}

#[test]
fn aggregates_are_column_means() {
    let g = model_with(KernelHypers::new(1.0, &[0.8, 1.2], 0.5, 0.2), 15, 7);
    let one = g.x().rows(4, 1).into_owned();
    let kl1 = kl_relevance(&g, &one, 1e-4).unwrap();
    let row: Vec<f64> = kl1
        .pointwise
        .as_ref()
        .unwrap()
        .row(0)
        .iter()
        .copied()
        .collect();
    assert_eq!(kl1.aggregate, row);

    let kl = kl_relevance(&g, g.x(), 1e-4).unwrap();
    let doubled = DMatrix::from_fn(30, 2, |i, j| g.x()[(i % 15, j)]);
    let kl2 = kl_relevance(&g, &doubled, 1e-4).unwrap();
    for (a, b) in kl.aggregate.iter().zip(&kl2.aggregate) {
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    let im = InputGaussian::estimate(g.x()).unwrap();
    let rule = gauss_hermite(16).unwrap();
    let v1 = var_relevance(&g, &im, &one, &rule).unwrap();
    let row: Vec<f64> = v1
        .pointwise
        .as_ref()
        .unwrap()
        .row(0)
        .iter()
        .copied()
        .collect();
    assert_eq!(v1.aggregate, row);
    let v = var_relevance(&g, &im, g.x(), &rule).unwrap();
    for (j, a) in v.aggregate.iter().enumerate() {
        let mean = v.pointwise.as_ref().unwrap().column(j).mean();
        assert!((a - mean).abs() <= 1e-12 * a.abs().max(1.0));
        assert!(*a >= 0.0 && a.is_finite());
    }
}

#[test]
fn var_of_linear_map() {
    let cond = Conditional1D { m: 0.7, s: 1.3 };
    let a = -2.2;
    for order in [2, 5, 32] {
        let rule = gauss_hermite(order).unwrap();
        let v = gauss_hermite_variance(&rule, cond, |z| a * z).unwrap();
        let expected = a * a * cond.s * cond.s;
        assert!((v - expected).abs() <= 1e-8 * expected, "order {order}");
    }
}

#[test]
fn var_of_constant_is_zero() {
    let rule = gauss_hermite(32).unwrap();
    let v = gauss_hermite_variance(&rule, Conditional1D { m: 0.0, s: 2.0 }, |_| 3.0).unwrap();
    assert!(v.abs() < 1e-24, "{v}");
}

#[test]
fn slice_mean_matches_prediction() {
    let g = model_with(KernelHypers::new(1.1, &[0.7, 1.4, 2.0], 0.6, 0.2), 25, 8);
    let x = kernel::row_vec(g.x(), 3);
    for j in 0..3 {
        let s = SliceMean::new(&g, &x, j);
        for z in [-2.0, -0.1, 0.9] {
            let mut q = x.clone();
            q[j] = z;
            assert!((s.eval(z) - g.predict_mean(&q).unwrap()).abs() < 1e-12);
        }
    }
}

/// Variance of the latent mean along `j` by trapezoid integration over `m ± 8s`.
fn trapezoid_variance(g: &FittedGP, cond: Conditional1D, x: &[f64], j: usize, steps: usize) -> f64 {
    let lo = cond.m - 8.0 * cond.s;
    let h = 16.0 * cond.s / steps as f64;
    let norm = 1.0 / (cond.s * (2.0 * std::f64::consts::PI).sqrt());
    let mut q = x.to_vec();
    let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for k in 0..=steps {
        let z = lo + k as f64 * h;
        q[j] = z;
        let f = g.predict_mean(&q).unwrap();
        let w = if k == 0 || k == steps { 0.5 } else { 1.0 }
            * norm
            * (-0.5 * ((z - cond.m) / cond.s).powi(2)).exp();
        m0 += w;
        m1 += w * f;
        m2 += w * f * f;
    }
    let (m0, m1, m2) = (m0 * h, m1 * h, m2 * h);
    m2 / m0 - (m1 / m0).powi(2)
}

#[test]
fn var_matches_brute_force_and_converges() {
    let g = fitted_with_dummy(9);
    let im = InputGaussian::estimate(g.x()).unwrap();
    let r32 = gauss_hermite(32).unwrap();
    let r16 = gauss_hermite(16).unwrap();
    for i in [0, 7] {
        let x = kernel::row_vec(g.x(), i);
        for j in 0..2 {
            let v32 = var_relevance_point(&g, &im, &x, j, &r32).unwrap();
            let v16 = var_relevance_point(&g, &im, &x, j, &r16).unwrap();
            let cond = im.conditional_1d(j, &x).unwrap();
            let brute = trapezoid_variance(&g, cond, &x, j, 20_000);
            assert!((v32 - brute).abs() <= 1e-3 * brute, "{v32} vs {brute}");
            assert!((v32 - v16).abs() <= 1e-4 * v32, "{v32} vs {v16}");
        }
    }
}

#[test]
fn pure_noise_has_small_var_relevance() {
    let mut r = ChaCha8Rng::seed_from_u64(10);
    let n = 200;
    let x = DMatrix::from_fn(n, 3, |_, _| r.sample::<f64, _>(StandardNormal));
    let y = DVector::from_fn(n, |_, _| r.sample::<f64, _>(StandardNormal));
    let g = fit(
        &x,
        &y,
        Some(&HyperPriors::default()),
        &OptimizerConfig::default(),
    )
    .unwrap();
    let var_y = y.variance();
    let rep = relevance(&g, Method::Var, g.x(), DEFAULT_DELTA, DEFAULT_QUAD_ORDER).unwrap();
    for a in &rep.aggregate {
        assert!(
            *a < 1e-2 * var_y,
            "{:?} {:?} {var_y}",
            rep.aggregate,
            g.hypers()
        );
    }
}

#[test]
fn column_permutation_permutes_relevances() {
    let mut r = ChaCha8Rng::seed_from_u64(11);
    let n = 60;
    let x = DMatrix::from_fn(n, 3, |_, _| r.sample::<f64, _>(StandardNormal));
    let y = DVector::from_fn(n, |i, _| {
        (2.0 * x[(i, 0)]).sin() + 0.6 * x[(i, 2)] + 0.1 * r.sample::<f64, _>(StandardNormal)
    });
    let perm = [2usize, 0, 1];
    let xp = x.select_columns(&perm);
    let cfg = OptimizerConfig::default();
    let g = fit(&x, &y, None, &cfg).unwrap();
    let gp_ = fit(&xp, &y, None, &cfg).unwrap();
    for m in Method::ALL {
        let a = relevance(&g, m, g.x(), DEFAULT_DELTA, DEFAULT_QUAD_ORDER).unwrap();
        let b = relevance(&gp_, m, gp_.x(), DEFAULT_DELTA, DEFAULT_QUAD_ORDER).unwrap();
        for (k, &src) in perm.iter().enumerate() {
            let (u, v) = (b.aggregate[k], a.aggregate[src]);
            assert!(
                (u - v).abs() <= 1e-3 * u.abs().max(v.abs()).max(1e-9),
                "{m}: {u} vs {v}"
            );
        }
        let mapped: Vec<usize> = b.ranking.iter().map(|&k| perm[k]).collect();
        assert_eq!(mapped, a.ranking, "{m}");
    }
}

#[test]
fn csv_exports() {
    let g = model_with(KernelHypers::new(1.0, &[1.0, 2.0], 0.5, 0.2), 6, 12);
    let rep = kl_relevance(&g, g.x(), 1e-4).unwrap();
    let names = vec!["a".to_string(), "b".to_string()];
    let mut buf = Vec::new();
    rep.write_csv(&names, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "variable,aggregate,scaled,rank");
    assert_eq!(lines.len(), 3);
    let scaled: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(scaled.iter().copied().fold(0.0, f64::max), 1.0);

    let mut buf = Vec::new();
    rep.write_pointwise_csv(&names, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 7);
    assert!(ard_relevance(&g)
        .write_pointwise_csv(&names, Vec::new())
        .is_err());

    let json = rep.to_json().unwrap();
    let back: RelevanceReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back.aggregate, rep.aggregate);
    assert!(back.pointwise.is_none());
}
