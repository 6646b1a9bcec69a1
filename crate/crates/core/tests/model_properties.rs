mod common;

use common::{priced, random_profile, rng, uniform};
use rsg_core::{aggregate_impact, derivatives, utility, ImpactVector};

#[test]
fn derivative_signs_hold_everywhere() {
    let mut r = rng(1);
    for _ in 0..1000 {
        let k = 1 + (uniform(&mut r, 0.0, 4.0) as usize);
        let spec = priced(&mut r, 2, k, (0.1, 1.0));
        let p = random_profile(&mut r, &spec);
        for n in 0..2 {
            let f = aggregate_impact(&spec, &p, n).unwrap();
            let b = derivatives(&spec, n, p.row(n), &f).unwrap();
            let c = spec.price(n);
            for d in 0..k {
                assert!(b.grad_f[d] <= 0.0);
                assert!(b.grad_a[d] + c >= 0.0);
                assert!(b.hess_aa[d] < 0.0);
                assert!(b.hess_ff[d] >= 0.0);
            }
        }
    }
}

fn rel_close(analytic: f64, numeric: f64) -> bool {
    (analytic - numeric).abs() <= 1e-6 * analytic.abs().max(numeric.abs()).max(1e-3)
}

#[test]
fn derivatives_match_central_differences() {
    let mut r = rng(2);
    let h = 1e-6;
    for _ in 0..1000 {
        let k = 1 + (uniform(&mut r, 0.0, 3.0) as usize);
        let spec = priced(&mut r, 2, k, (0.1, 1.0));
        let p = random_profile(&mut r, &spec);
        let n = (uniform(&mut r, 0.0, 2.0) as usize).min(1);
        let f = aggregate_impact(&spec, &p, n).unwrap().values;
        let a = p.row(n).to_vec();
        let b = derivatives(&spec, n, &a, &ImpactVector::new(f.clone())).unwrap();
        let u =
            |a: &[f64], f: &[f64]| utility(&spec, n, a, &ImpactVector::new(f.to_vec())).unwrap();
        for d in 0..k {
            let shift = |v: &[f64], s: f64| {
                let mut w = v.to_vec();
                w[d] += s;
                w
            };
            let ga = (u(&shift(&a, h), &f) - u(&shift(&a, -h), &f)) / (2.0 * h);
            let gf = (u(&a, &shift(&f, h)) - u(&a, &shift(&f, -h))) / (2.0 * h);
            assert!(rel_close(b.grad_a[d], ga), "grad_a {} vs {ga}", b.grad_a[d]);
            assert!(rel_close(b.grad_f[d], gf), "grad_f {} vs {gf}", b.grad_f[d]);
            // second derivatives as differences of the analytic gradients
            let at = |a: &[f64], f: &[f64]| {
                derivatives(&spec, n, a, &ImpactVector::new(f.to_vec())).unwrap()
            };
            let haa =
                (at(&shift(&a, h), &f).grad_a[d] - at(&shift(&a, -h), &f).grad_a[d]) / (2.0 * h);
            let haf =
                (at(&a, &shift(&f, h)).grad_a[d] - at(&a, &shift(&f, -h)).grad_a[d]) / (2.0 * h);
            let hff =
                (at(&a, &shift(&f, h)).grad_f[d] - at(&a, &shift(&f, -h)).grad_f[d]) / (2.0 * h);
            assert!(
                rel_close(b.hess_aa[d], haa),
                "hess_aa {} vs {haa}",
                b.hess_aa[d]
            );
            assert!(
                rel_close(b.hess_af[d], haf),
                "hess_af {} vs {haf}",
                b.hess_af[d]
            );
            assert!(
                rel_close(b.hess_ff[d], hff),
                "hess_ff {} vs {hff}",
                b.hess_ff[d]
            );
        }
    }
}

#[test]
fn utility_is_separable() {
    let mut r = rng(3);
    for _ in 0..300 {
        let spec = priced(&mut r, 2, 4, (0.1, 1.0));
        let p = random_profile(&mut r, &spec);
        let f = aggregate_impact(&spec, &p, 1).unwrap().values;
        let total = utility(&spec, 1, p.row(1), &ImpactVector::new(f.clone())).unwrap();
        let c = spec.price(1);
        let parts: f64 = (0..4)
            .map(|d| (1.0 + spec.direct_gain(1, d) * p.row(1)[d] / f[d]).ln() - c * p.row(1)[d])
            .sum();
        assert!((total - parts).abs() <= 1e-12 * total.abs().max(1.0));
    }
}

#[test]
fn utility_decreases_in_each_impact() {
    let mut r = rng(4);
    for _ in 0..1000 {
        let spec = priced(&mut r, 2, 3, (0.1, 1.0));
        let p = random_profile(&mut r, &spec);
        let f = aggregate_impact(&spec, &p, 0).unwrap().values;
        let d = (uniform(&mut r, 0.0, 3.0) as usize).min(2);
        let mut g = f.clone();
        g[d] += uniform(&mut r, 1e-3, 1.0);
        let u0 = utility(&spec, 0, p.row(0), &ImpactVector::new(f)).unwrap();
        let u1 = utility(&spec, 0, p.row(0), &ImpactVector::new(g)).unwrap();
        if p.row(0)[d] > 0.0 {
            assert!(u1 < u0);
        }
    }
}
