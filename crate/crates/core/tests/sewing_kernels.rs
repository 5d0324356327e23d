use g2fermion::qseries::*;
use g2fermion::sewing::*;
use num_complex::Complex64;
use rand::{rngs::StdRng, Rng, SeedableRng};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn mp(re: f64, im: f64) -> ModularParam {
    ModularParam::new(c(re, im)).unwrap()
}

fn random_twist(rng: &mut StdRng) -> TwistData {
    loop {
        let t = TwistData::new(rng.gen(), rng.gen()).unwrap();
        if !t.is_degenerate() {
            return t;
        }
    }
}

fn random_config(rng: &mut StdRng) -> (SewingConfig, TwistData, TwistData) {
    let m1 = mp(rng.gen_range(-0.5..0.5), rng.gen_range(0.8..1.5));
    let m2 = mp(rng.gen_range(-0.5..0.5), rng.gen_range(0.8..1.5));
    let base = SewingConfig::new(m1, m2, c(0.0, 0.0));
    let r = rng.gen_range(0.001..0.05) * base.domain_bound();
    let eps = Complex64::from_polar(r, rng.gen_range(0.0..std::f64::consts::TAU));
    (base.with_eps(eps).with_order(12), random_twist(rng), random_twist(rng))
}

#[test]
fn block_determinant_matches_product_form() {
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..20 {
        let (cfg, t1, t2) = random_config(&mut rng);
        let dq = det_i_minus_q(&cfg, &t1, &t2).unwrap();
        let df = det_i_minus_f1f2(&cfg, &t1, &t2).unwrap();
        assert!((dq - df).norm() < 1e-12 * df.norm());
        let flipped = det_i_minus_q(&cfg.with_xi(cfg.xi().flipped()), &t1, &t2).unwrap();
        assert!((flipped - dq).norm() < 1e-14 * dq.norm());
    }
}

#[test]
fn kernel_pole_normalization() {
    let cfg = SewingConfig::new(mp(0.0, 1.0), mp(0.1, 1.2), c(0.02, 0.01));
    let t1 = TwistData::new(0.2, 0.7).unwrap();
    let t2 = TwistData::new(0.4, 0.1).unwrap();
    for a in [Torus::One, Torus::Two] {
        let y = SurfacePoint::new(a, c(0.6, -0.3));
        for d in [1e-2, 1e-3] {
            let x = SurfacePoint::new(a, y.z + c(d, 0.0));
            let s = szego_g2(&x, &y, &cfg, &t1, &t2).unwrap();
            assert!((s * d - 1.0).norm() < 2.0 * d);
        }
    }
}

#[test]
fn kernel_reduces_to_genus_one() {
    // The first correction is ε P₁(x) C_ā(1,1) P₁(−y), linear in ε.
    let t1 = TwistData::new(0.2, 0.7).unwrap();
    let t2 = TwistData::new(0.4, 0.1).unwrap();
    let (x, y) = (c(0.9, 0.2), c(-0.4, 0.5));
    for (a, t) in [(Torus::One, &t1), (Torus::Two, &t2)] {
        let other = if a == Torus::One { &t2 } else { &t1 };
        let diff = |r: f64| {
            let eps = c(0.6, 0.8) * r;
            let cfg = SewingConfig::new(mp(0.0, 1.0), mp(0.1, 1.2), eps);
            let s2 = szego_g2(&SurfacePoint::new(a, x), &SurfacePoint::new(a, y), &cfg, &t1, &t2).unwrap();
            let s1 = szego_g1(x, y, t, cfg.tau(a), cfg.policy()).unwrap();
            let lead = eps
                * weierstrass_twisted(1, t, x, cfg.tau(a), cfg.policy()).unwrap()
                * g2fermion::coeffs::c_coeff(1, 1, other, cfg.tau(a.other()), cfg.policy()).unwrap()
                * weierstrass_twisted(1, t, -y, cfg.tau(a), cfg.policy()).unwrap();
            (s2 - s1, lead)
        };
        for r in [1e-6, 1e-8] {
            let (d, lead) = diff(r);
            assert!((d - lead).norm() < 1e-3 * lead.norm(), "{d} vs {lead}");
        }
    }
    // With real characteristics on the other torus the linear term vanishes.
    let ns = TwistData::new(0.0, 0.0).unwrap();
    let cfg = SewingConfig::new(mp(0.0, 1.0), mp(0.1, 1.2), c(6e-7, 8e-7));
    let s2 = szego_g2(&SurfacePoint::new(Torus::One, x), &SurfacePoint::new(Torus::One, y), &cfg, &t1, &ns).unwrap();
    let s1 = szego_g1(x, y, &t1, cfg.tau1(), cfg.policy()).unwrap();
    assert!((s2 - s1).norm() < 1e-8 * s1.norm());
}

#[test]
fn kernel_skew_symmetry() {
    let t1 = TwistData::new(0.2, 0.7).unwrap();
    let t2 = TwistData::new(0.4, 0.1).unwrap();
    let cfg = SewingConfig::new(mp(0.0, 1.0), mp(0.1, 1.2), c(0.05, 0.02));
    let pts = [
        SurfacePoint::new(Torus::One, c(0.9, 0.2)),
        SurfacePoint::new(Torus::One, c(-0.4, 0.5)),
        SurfacePoint::new(Torus::Two, c(0.7, -0.6)),
    ];
    for x in &pts {
        for y in &pts {
            if x == y {
                continue;
            }
            let s = szego_g2(x, y, &cfg, &t1, &t2).unwrap();
            let r = szego_g2(y, x, &cfg, &t1.inverse(), &t2.inverse()).unwrap();
            assert!((s + r).norm() < 1e-9 * s.norm().max(1.0), "{x:?} {y:?}");
        }
    }
}

#[test]
fn kernel_continues_across_the_annulus() {
    // A point of the annulus seen from both tori, with z₂ = ε/z₁ and
    // dz₁^{1/2} = −ξ ε^{1/2} dz₂^{1/2} / z₂.
    let t1 = TwistData::new(0.1, 0.3).unwrap();
    let t2 = TwistData::new(0.6, 0.8).unwrap();
    for xi in [Xi::PlusI, Xi::MinusI] {
        let cfg = SewingConfig::new(mp(0.0, 1.0), mp(0.1, 1.2), c(1e-3, 4e-4)).with_order(30).with_xi(xi);
        let k = Szego2::new(&cfg, &t1, &t2).unwrap();
        let x1 = c(0.2, 0.15);
        let x2 = cfg.eps() / x1;
        let jac = -xi.value() * cfg.eps().sqrt() / x2;
        let w = SurfacePoint::new(Torus::One, c(0.9, 0.3));
        let same = k.kernel(&w, &SurfacePoint::new(Torus::One, x1)).unwrap();
        let cross = k.kernel(&w, &SurfacePoint::new(Torus::Two, x2)).unwrap();
        assert!((cross - same * jac).norm() < 1e-12 * cross.norm());
        let v = SurfacePoint::new(Torus::Two, c(0.7, -0.4));
        let same2 = k.kernel(&v, &SurfacePoint::new(Torus::Two, x2)).unwrap();
        let cross2 = k.kernel(&v, &SurfacePoint::new(Torus::One, x1)).unwrap();
        assert!((same2 - cross2 * jac).norm() < 1e-12 * same2.norm());
    }
}

#[test]
fn kernel_block_assembly_agrees() {
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..5 {
        let (cfg, t1, t2) = random_config(&mut rng);
        let k = Szego2::new(&cfg, &t1, &t2).unwrap();
        let x = SurfacePoint::new(Torus::One, c(0.8, 0.3));
        let y = SurfacePoint::new(Torus::Two, c(-0.5, 0.6));
        let a = k.kernel(&x, &y).unwrap();
        let b = k.kernel_block(&x, &y).unwrap();
        assert!((a - b).norm() < 1e-11 * a.norm());
    }
}
