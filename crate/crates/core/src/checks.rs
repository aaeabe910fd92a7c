//! Property checks run by the `oracle` command.
//!
//! Each check compares a library routine against a closed form or a
//! brute-force reference and reports the worst deviation it saw.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::estimator::{
    counterexample_check, exact_orbit_target, flow_orbit_mean_x1, oracle_conditional_mean,
    rb_flow_velocity_target, snis_orbit_target, Dataset,
};
use crate::groups::{
    cyclic_translations, reflection_group, symmetric_group, GroupElement, GroupKind, GroupSampler,
    Quaternion,
};
use crate::kernels::ForwardKernel;
use crate::point::Point;
use crate::rng::{child_rng, Rng as StreamRng};
use crate::schedule::{make_vp_schedule, FlowCoefficients};
use crate::torus::{wrapped_normal_log_pdf, wrapped_normal_log_pdf_truncated};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub suite: &'static str,
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed deviation (or the statistic being compared).
    pub value: f64,
    pub threshold: f64,
}

pub const SUITES: &[&str] = &["groups", "kernels", "estimator", "flow"];

fn check(suite: &'static str, name: &'static str, value: f64, threshold: f64) -> CheckResult {
    CheckResult {
        suite,
        name,
        passed: value.is_finite() && value < threshold,
        value,
        threshold,
    }
}

fn normal_vec(rng: &mut StreamRng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn max_abs_diff(a: &Point, b: &Point) -> f64 {
    a.coords
        .iter()
        .zip(&b.coords)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn torus_diff(a: &Point, b: &Point) -> f64 {
    a.coords
        .iter()
        .zip(&b.coords)
        .map(|(x, y)| crate::torus::wrap_centered(x - y).abs())
        .fold(0.0, f64::max)
}

/// Runs one suite, or all of them for `"all"`.
pub fn run_suite(name: &str, seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let all = name == "all";
    if all || name == "groups" {
        out.extend(group_checks(seed)?);
    }
    if all || name == "kernels" {
        out.extend(kernel_checks(seed)?);
    }
    if all || name == "estimator" {
        out.extend(estimator_checks(seed)?);
    }
    if all || name == "flow" {
        out.extend(flow_checks(seed)?);
    }
    if out.is_empty() {
        return Err(crate::Error::InvalidConfig(format!(
            "unknown suite `{name}`; expected all or one of {SUITES:?}"
        )));
    }
    Ok(out)
}

fn group_checks(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = child_rng(seed, "oracle-groups", 0);
    let mut law = 0.0f64;
    let mut iso = 0.0f64;
    let rot = GroupSampler::uniform(GroupKind::Rotation);
    let perm = GroupSampler::uniform(GroupKind::Permutation { n: 4 });
    for _ in 0..200 {
        let x = Point::euclidean(normal_vec(&mut rng, 12));
        let y = Point::euclidean(normal_vec(&mut rng, 12));
        for s in [&rot, &perm] {
            let (a, b, c) = (
                s.sample(0, &mut rng),
                s.sample(0, &mut rng),
                s.sample(0, &mut rng),
            );
            let lhs = a.compose(&b)?.compose(&c)?.act(&x)?;
            let rhs = a.compose(&b.compose(&c)?)?.act(&x)?;
            law = law.max(max_abs_diff(&lhs, &rhs));
            let via = a.act(&b.act(&x)?)?;
            law = law.max(max_abs_diff(&a.compose(&b)?.act(&x)?, &via));
            law = law.max(max_abs_diff(&a.compose(&a.invert())?.act(&x)?, &x));
            let d0 = x.distance(&y);
            let d1 = a.act(&x)?.distance(&a.act(&y)?);
            iso = iso.max((d0 - d1).abs());
        }
    }
    let mut torus_law = 0.0f64;
    let tr = GroupSampler::uniform(GroupKind::TorusTranslation { dim: 2 });
    for _ in 0..200 {
        let x = Point::torus(vec![rng.random(), rng.random(), rng.random(), rng.random()]);
        let y = Point::torus(vec![rng.random(), rng.random(), rng.random(), rng.random()]);
        let (a, b) = (tr.sample(0, &mut rng), tr.sample(0, &mut rng));
        torus_law = torus_law.max(torus_diff(&a.compose(&b)?.act(&x)?, &a.act(&b.act(&x)?)?));
        iso = iso.max((x.distance(&y) - a.act(&x)?.distance(&a.act(&y)?)).abs());
    }
    // Riemann sum of the wrapped normal over [0, 1)
    let grid = 10_000;
    let mut mass = 0.0f64;
    for &sigma in &[0.01, 0.1, 0.5] {
        let s: f64 = (0..grid)
            .map(|i| wrapped_normal_log_pdf(i as f64 / grid as f64, sigma).exp())
            .sum();
        mass = mass.max((s / grid as f64 - 1.0).abs());
    }
    // SO(3) angle mean against (1/pi) * int_0^pi th (1 - cos th) dth = pi/2 + 2/pi
    let draws = 100_000;
    let mean_angle: f64 = (0..draws)
        .map(|_| Quaternion::random_uniform(&mut rng).angle())
        .sum::<f64>()
        / draws as f64;
    let exact = std::f64::consts::FRAC_PI_2 + 2.0 / std::f64::consts::PI;
    Ok(vec![
        check("groups", "rotation/permutation group laws", law, 1e-12),
        check("groups", "torus translation group laws", torus_law, 1e-12),
        check("groups", "actions are isometries", iso, 1e-10),
        check(
            "groups",
            "wrapped normal proposal integrates to 1",
            mass,
            1e-6,
        ),
        check(
            "groups",
            "uniform SO(3) mean angle",
            (mean_angle - exact).abs(),
            0.01,
        ),
    ])
}

fn kernel_checks(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = child_rng(seed, "oracle-kernels", 0);
    let sched = make_vp_schedule(1000)?;
    let gauss = ForwardKernel::gaussian(sched.clone());
    let wn = ForwardKernel::wrapped_normal(sched);
    let mut inv = 0.0f64;
    let rot = GroupSampler::uniform(GroupKind::Rotation);
    let perm = GroupSampler::uniform(GroupKind::Permutation { n: 3 });
    let refl = GroupSampler::uniform(GroupKind::Reflection);
    let tr = GroupSampler::uniform(GroupKind::TorusTranslation { dim: 3 });
    for _ in 0..200 {
        let t = rng.random_range(1..=1000);
        let x0 = Point::euclidean(normal_vec(&mut rng, 9));
        let xt = Point::euclidean(normal_vec(&mut rng, 9));
        for s in [&rot, &perm, &refl] {
            let g = s.sample(t, &mut rng);
            let a = gauss.log_density(&g.act(&xt)?, &g.act(&x0)?, t)?;
            inv = inv.max((a - gauss.log_density(&xt, &x0, t)?).abs());
        }
        let y0 = Point::torus((0..6).map(|_| rng.random()).collect());
        let yt = Point::torus((0..6).map(|_| rng.random()).collect());
        let g = tr.sample(t, &mut rng);
        inv = inv.max(
            (wn.log_density(&g.act(&yt)?, &g.act(&y0)?, t)? - wn.log_density(&yt, &y0, t)?).abs(),
        );
    }
    // symmetrize-then-diffuse vs diffuse-then-symmetrize on a grid
    let data = [0.7, -1.6];
    let group = reflection_group();
    let mut marginal_gap = 0.0f64;
    for &t in &[50usize, 400, 900] {
        for i in 0..1000 {
            let x = -4.0 + 8.0 * i as f64 / 999.0;
            let xt = Point::euclidean(vec![x]);
            let mut lhs = 0.0;
            let mut rhs = 0.0;
            for &d in &data {
                let p = Point::euclidean(vec![d]);
                for g in &group {
                    lhs += gauss.log_density(&xt, &g.act(&p)?, t)?.exp() / 4.0;
                    rhs += gauss.log_density(&g.invert().act(&xt)?, &p, t)?.exp() / 4.0;
                }
            }
            marginal_gap = marginal_gap.max((lhs - rhs).abs());
        }
    }
    let mut trunc = 0.0f64;
    for &sigma in &[0.01, 0.05, 0.3, 1.0, 2.0] {
        for i in 0..100 {
            let d = i as f64 / 100.0;
            trunc = trunc.max(
                (wrapped_normal_log_pdf(d, sigma)
                    - wrapped_normal_log_pdf_truncated(d, sigma, 100))
                .abs(),
            );
        }
    }
    Ok(vec![
        check("kernels", "forward kernels are group invariant", inv, 1e-10),
        check(
            "kernels",
            "symmetrized marginals commute with diffusion",
            marginal_gap,
            1e-10,
        ),
        check(
            "kernels",
            "wrapped-sum truncation matches Z=100",
            trunc,
            1e-12,
        ),
    ])
}

fn estimator_checks(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = child_rng(seed, "oracle-estimator", 0);
    let sched = make_vp_schedule(1000)?;
    let gauss = ForwardKernel::gaussian(sched.clone());
    let wn = ForwardKernel::wrapped_normal(sched);
    let x0 = Point::euclidean(vec![1.0]);

    let mut tanh_err = 0.0f64;
    for i in 0..1000 {
        let t = 1 + (i * 37) % 1000;
        let x = -3.0 + 6.0 * ((i * 61) % 1000) as f64 / 999.0;
        let lv = gauss.level(t);
        let got = exact_orbit_target(
            &x0,
            &Point::euclidean(vec![x]),
            t,
            &gauss,
            &reflection_group(),
        )?;
        tanh_err = tanh_err
            .max((got.target.coords[0] - (lv.alpha * x / (lv.sigma * lv.sigma)).tanh()).abs());
    }

    let mut equi = 0.0f64;
    let cases: Vec<(Vec<GroupElement>, bool)> = vec![
        (reflection_group(), false),
        (cyclic_translations(8, 1), true),
        (symmetric_group(4), false),
    ];
    for (elements, torus) in &cases {
        let kernel = if *torus { &wn } else { &gauss };
        for _ in 0..200 {
            let t = rng.random_range(1..=1000);
            let (p0, pt) = if *torus {
                (
                    Point::torus((0..4).map(|_| rng.random()).collect()),
                    Point::torus((0..4).map(|_| rng.random()).collect()),
                )
            } else {
                (
                    Point::euclidean(normal_vec(&mut rng, 4)),
                    Point::euclidean(normal_vec(&mut rng, 4)),
                )
            };
            let h = &elements[rng.random_range(0..elements.len())];
            let lhs = exact_orbit_target(&p0, &h.act(&pt)?, t, kernel, elements)?.target;
            let rhs = h.act(&exact_orbit_target(&p0, &pt, t, kernel, elements)?.target)?;
            equi = equi.max(if *torus {
                torus_diff(&lhs, &rhs)
            } else {
                max_abs_diff(&lhs, &rhs)
            });
        }
    }

    let perms = symmetric_group(3);
    let data = Dataset::new(vec![
        Point::euclidean(vec![0.3, 1.0, -0.5]),
        Point::euclidean(vec![2.0, -1.0, 0.0]),
    ])?
    .symmetrized(&perms)?;
    let mut equivariance_gap = 0.0f64;
    for _ in 0..200 {
        let t = rng.random_range(1..=1000);
        let xt = Point::euclidean(normal_vec(&mut rng, 3));
        let g = &perms[rng.random_range(0..perms.len())];
        let lhs = oracle_conditional_mean(&data, &g.act(&xt)?, t, &gauss, &perms)?;
        let rhs = g.act(&oracle_conditional_mean(&data, &xt, t, &gauss, &perms)?)?;
        equivariance_gap = equivariance_gap.max(max_abs_diff(&lhs, &rhs));
    }

    let mut counter_ok = 0.0f64;
    let mut counter_err = 0.0f64;
    for _ in 0..100 {
        let alpha: f64 = rng.random_range(0.05..1.0);
        let sigma: f64 = rng.random_range(0.2..2.0);
        let x: f64 = rng.random_range(-3.0..3.0);
        let (lhs, rhs) = counterexample_check(alpha, sigma, x, 1.0)?;
        if !(lhs < 1.0 && 1.0 < rhs) {
            counter_ok += 1.0;
        }
        let logistic =
            |y: f64| 1.0 / (1.0 + (-(alpha * (y - alpha / 2.0)) / (sigma * sigma)).exp());
        counter_err = counter_err
            .max((lhs - logistic(x + 1.0)).abs())
            .max((rhs - logistic(x) - 1.0).abs());
    }

    // SNIS with many draws against the exact sum
    let t = 500;
    let xt = Point::euclidean(vec![0.4]);
    let exact = exact_orbit_target(&x0, &xt, t, &gauss, &reflection_group())?
        .target
        .coords[0];
    let n = 4096;
    let sampler = GroupSampler::uniform(GroupKind::Reflection).with_include_identity(false);
    let snis = snis_orbit_target(&x0, &xt, t, &gauss, &sampler, n, &mut rng)?
        .target
        .coords[0];

    Ok(vec![
        check(
            "estimator",
            "reflection target equals tanh closed form",
            tanh_err,
            1e-12,
        ),
        check("estimator", "orbit target is equivariant", equi, 1e-10),
        check(
            "estimator",
            "conditional mean is equivariant on symmetrized data",
            equivariance_gap,
            1e-10,
        ),
        check(
            "estimator",
            "translation counterexample violations",
            counter_ok,
            0.5,
        ),
        check(
            "estimator",
            "counterexample matches logistic form",
            counter_err,
            1e-12,
        ),
        check(
            "estimator",
            "SNIS within 3 standard errors of exact (in SE units)",
            (snis - exact).abs() * (n as f64).sqrt(),
            3.0,
        ),
    ])
}

fn flow_checks(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = child_rng(seed, "oracle-flow", 0);
    let mut rel = 0.0f64;
    for _ in 0..10_000 {
        let c = FlowCoefficients::new(rng.random_range(0.01..1.0))?;
        let t = rng.random_range(c.t_min..1.0 - c.t_min);
        let x0 = Point::euclidean(normal_vec(&mut rng, 3));
        let x1 = Point::euclidean(normal_vec(&mut rng, 3));
        let eps = Point::euclidean(normal_vec(&mut rng, 3));
        let xt = c.interpolate(&x0, &x1, t, &eps)?;
        let direct = c.velocity_from_noise(&x0, &x1, t, &eps)?;
        let coeff = c.velocity(&xt, &x0, &x1, t)?;
        let scale = direct.norm().max(1.0);
        rel = rel.max(max_abs_diff(&direct, &coeff) / scale);
    }
    let mut reduce = 0.0f64;
    let c = FlowCoefficients::new(0.1)?;
    for _ in 0..100 {
        let t = rng.random_range(0.01..0.99);
        let x0 = Point::euclidean(normal_vec(&mut rng, 2));
        let x1 = Point::euclidean(normal_vec(&mut rng, 2));
        let xt = c.interpolate(&x0, &x1, t, &Point::euclidean(normal_vec(&mut rng, 2)))?;
        let m = flow_orbit_mean_x1(
            &x0,
            &x1,
            &xt,
            t,
            &c,
            &[GroupElement::Reflection { sign: 1 }],
        )?;
        let rb = rb_flow_velocity_target(&x0, &xt, t, &c, &m.target)?;
        reduce = reduce.max(max_abs_diff(&rb, &c.velocity(&xt, &x0, &x1, t)?));
    }
    Ok(vec![
        check(
            "flow",
            "velocity coefficient identity (relative)",
            rel,
            1e-8,
        ),
        check(
            "flow",
            "identity orbit reduces to the plain velocity",
            reduce,
            1e-12,
        ),
    ])
}
