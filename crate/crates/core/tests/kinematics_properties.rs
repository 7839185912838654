use qci_core::kinematics::{mass_boundary, reflect, thermal_coherence_length};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = f64::EPSILON;

fn draw(rng: &mut ChaCha8Rng) -> (f64, f64, f64, f64) {
    let m = 10f64.powf(rng.gen_range(-3.0..3.0));
    let big_m = 10f64.powf(rng.gen_range(-3.0..6.0));
    (m, rng.gen_range(-10.0..10.0), big_m, rng.gen_range(-10.0..10.0))
}

#[test]
fn million_collisions_conserve_momentum_and_energy() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (mut worst_p, mut worst_e) = (0.0f64, 0.0f64);
    for _ in 0..1_000_000 {
        let (m, v, big_m, big_v) = draw(&mut rng);
        let r = reflect(m, v, big_m, big_v, 1.0);
        let (v_r, big_v_r) = (r.particle_velocity, r.scatterer_velocity);

        // errors measured in units of the rounding of the largest term
        let p_scale = (m * v).abs() + (big_m * big_v).abs() + (m * v_r).abs() + (big_m * big_v_r).abs();
        let dp = (m * v + big_m * big_v) - (m * v_r + big_m * big_v_r);
        worst_p = worst_p.max(dp.abs() / (p_scale * EPS));

        let e_scale = m * v * v + big_m * big_v * big_v + m * v_r * v_r + big_m * big_v_r * big_v_r;
        let de = (m * v * v + big_m * big_v * big_v) - (m * v_r * v_r + big_m * big_v_r * big_v_r);
        worst_e = worst_e.max(de.abs() / (e_scale * EPS));
    }
    assert!(worst_p < 8.0, "momentum error {worst_p} ulp");
    assert!(worst_e < 16.0, "energy error {worst_e} ulp");
}

#[test]
fn reflecting_twice_restores_the_incident_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10_000 {
        let (m, v, big_m, big_v) = draw(&mut rng);
        let once = reflect(m, v, big_m, big_v, 1.0);
        let twice = reflect(m, once.particle_velocity, big_m, once.scatterer_velocity, 1.0);
        let scale = v.abs() + big_v.abs();
        assert!((twice.particle_velocity - v).abs() < 1e-12 * scale, "{m} {v} {big_m} {big_v}");
        assert!((twice.scatterer_velocity - big_v).abs() < 1e-12 * scale);
    }
}

#[test]
fn wavevectors_match_textbook_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..20 {
        let (m, v, big_m, big_v) = draw(&mut rng);
        let hbar = rng.gen_range(0.5..2.0);
        let r = reflect(m, v, big_m, big_v, hbar);
        let k_r = m * (2.0 * big_m * big_v - big_m * v + m * v) / (hbar * (big_m + m));
        let big_k_r = big_m * (big_m * big_v - m * big_v + 2.0 * m * v) / (hbar * (big_m + m));
        let tol = |x: f64| 1e-14 * x.abs().max(m * (v.abs() + big_v.abs()) / hbar);
        assert!((r.particle_wavevector - k_r).abs() <= tol(k_r), "{} vs {k_r}", r.particle_wavevector);
        assert!((r.scatterer_wavevector - big_k_r).abs() <= 1e-14 * big_k_r.abs().max(big_m * (v.abs() + big_v.abs()) / hbar));
    }
}

// Substituting the boundary mass into the thermal length gives
// h / sqrt(4 h² / λ0²) = λ0 / 2.
#[test]
fn boundary_mass_has_thermal_length_half_a_wavelength() {
    for (lambda0, t) in [(4e-11, 1.0), (1e-9, 300.0), (5e-12, 0.01)] {
        let m_max = mass_boundary(lambda0, t).unwrap();
        let lc = thermal_coherence_length(m_max, t).unwrap();
        assert!((lc / (lambda0 / 2.0) - 1.0).abs() < 1e-14);
    }
}
