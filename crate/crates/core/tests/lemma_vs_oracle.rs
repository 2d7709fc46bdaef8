use crsn_core::closed_form::{cdf_lin, cdf_sat, linear_region_probability};
use crsn_core::oracle::{quad_cdf_lin, quad_cdf_sat, quad_region_prob};
use crsn_core::{derive_coeffs, Destination, QuadSpec, Scenario, SeriesControl, Shapes, SystemParams};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_scenario(rng: &mut ChaCha8Rng) -> Scenario {
    let params = SystemParams {
        mu: rng.random_range(0.6..=1.0),
        beta: rng.random_range(0.5..=0.9),
        alpha: if rng.random_bool(0.5) { 0.1 } else { 0.2 },
        ..SystemParams::default()
    }
    .with_snr_db(rng.random_range(20.0..=50.0));
    Scenario {
        params,
        shapes: Shapes {
            m_a: rng.random_range(1..=3),
            m_b: rng.random_range(1..=3),
            ..Shapes::default()
        },
        ..Scenario::default()
    }
}

#[test]
fn lemmas_match_quadrature_on_random_configs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let spec = QuadSpec::default();
    let ctrl = SeriesControl::default();
    let mut worst: f64 = 0.0;
    for _ in 0..40 {
        let s = random_scenario(&mut rng);
        let links = s.links().unwrap();
        for dest in Destination::BOTH {
            let c = derive_coeffs(&s.params, dest).unwrap();
            let pair = links.relay_pair(dest);
            let lin = cdf_lin(&c, pair, ctrl).unwrap().value;
            let qlin = quad_cdf_lin(&c, pair, &spec).unwrap();
            let sat = cdf_sat(&c, pair, ctrl).unwrap().value;
            let qsat = quad_cdf_sat(&c, pair, &spec, false).unwrap();
            assert!(qlin.converged && qsat.converged);
            let d = (lin - qlin.value).abs().max((sat - qsat.value).abs());
            worst = worst.max(d);
            assert!(d <= 1e-5, "{s:?} {dest:?}: lin {lin} vs {} sat {sat} vs {}", qlin.value, qsat.value);
        }
    }
    assert!(worst < 1e-5);
}

#[test]
fn region_probability_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let spec = QuadSpec::default();
    for _ in 0..20 {
        let s = random_scenario(&mut rng);
        let links = s.links().unwrap();
        for dest in Destination::BOTH {
            let c = derive_coeffs(&s.params, dest).unwrap();
            let pair = links.relay_pair(dest);
            let a = linear_region_probability(&c, pair).unwrap().value;
            let q = quad_region_prob(&c, pair, &spec).unwrap().value;
            // symmetric links trip the Ξ = 0 nudge, worth ~1e−8 here
            assert!((a - q).abs() < 1e-7, "{a} {q}");
        }
    }
}

#[test]
fn operating_point_matches_tight_quadrature() {
    // P = 1 W with σ² = 1e−7 W
    let s = Scenario {
        params: SystemParams::default().with_snr_db(70.0),
        ..Scenario::default()
    };
    let spec = QuadSpec {
        abs_tol: 1e-60,
        rel_tol: 1e-11,
        ..QuadSpec::default()
    };
    let links = s.links().unwrap();
    let c = derive_coeffs(&s.params, Destination::A).unwrap();
    let pair = links.relay_pair(Destination::A);
    let lin = cdf_lin(&c, pair, SeriesControl::default()).unwrap().value;
    let q = quad_cdf_lin(&c, pair, &spec).unwrap().value;
    // mpmath, 30 digits, same two-piece integral
    let frozen = 5.484_236_158_469_458e-9;
    assert!(((q - frozen) / frozen).abs() < 1e-9, "{q}");
    assert!(((lin - q) / q).abs() < 1e-6, "{lin} {q}");

    let s40 = Scenario {
        params: SystemParams::default().with_snr_db(40.0),
        ..Scenario::default()
    };
    let c = derive_coeffs(&s40.params, Destination::A).unwrap();
    let sat = cdf_sat(&c, pair, SeriesControl::default()).unwrap().value;
    let q = quad_cdf_sat(&c, pair, &spec, false).unwrap().value;
    let frozen = 6.076_678_000_138_214e-26;
    assert!(((q - frozen) / frozen).abs() < 1e-9, "{q}");
    assert!(((sat - q) / q).abs() < 1e-6, "{sat} {q}");
}

proptest::proptest! {
    #[test]
    fn regime_probabilities_stay_in_unit_interval(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_scenario(&mut rng);
        for dest in Destination::BOTH {
            let b = crsn_core::outage_probability(&s, dest, SeriesControl::default()).unwrap();
            proptest::prop_assert!(b.f_lin >= 0.0 && b.f_sat >= 0.0);
            proptest::prop_assert!(b.f_relayed <= 1.0);
            proptest::prop_assert!((b.op - b.f_relayed * b.f_direct).abs() < 1e-15);
        }
    }
}
