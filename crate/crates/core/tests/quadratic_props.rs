use cwp_core::pressure::{EntropyOptions, PressureMap};
use cwp_core::quadratic::{find_maxima, phi_beta, phibar_beta, MaximaOptions};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn domination_on_spin_line(beta in 0.2f64..3.0, z in -0.999f64..0.999) {
        let pm = PressureMap::new(common::spin());
        let lhs = phibar_beta(&pm, beta, &[z], &EntropyOptions::default()).unwrap();
        prop_assert!(lhs <= phi_beta(&pm, beta, &[z]).unwrap() + 1e-8);
    }

    #[test]
    fn coincidence_at_maxima(beta in 0.3f64..3.0) {
        let pm = PressureMap::new(common::spin());
        let ms = find_maxima(&pm, beta, &MaximaOptions::default()).unwrap();
        prop_assert!(!ms.maxima.is_empty());
        for m in &ms.maxima {
            let bar = phibar_beta(&pm, beta, &m.z, &EntropyOptions::default()).unwrap();
            prop_assert!((m.value - bar).abs() < 1e-6, "beta={beta} z={:?}", m.z);
        }
    }

    #[test]
    fn refinement_keeps_maxima_count(beta in 0.3f64..3.0) {
        let pm = PressureMap::new(common::spin());
        let coarse = find_maxima(&pm, beta, &MaximaOptions { grid_step: Some(2e-2), ..Default::default() }).unwrap();
        let fine = find_maxima(&pm, beta, &MaximaOptions { grid_step: Some(1e-2), ..Default::default() }).unwrap();
        prop_assert_eq!(coarse.maxima.len(), fine.maxima.len());
    }
}

#[test]
fn confinement_outside_box() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for model in [common::potts(3), common::triangle([0.2, 0.3, 0.5])] {
        let pm = PressureMap::new(model);
        let sup = pm.model().potential().sup_norm();
        let htop = pm.h_top().unwrap();
        let q = pm.q();
        for _ in 0..100 {
            let beta = rng.random_range(0.1..5.0);
            let dir: Vec<f64> = (0..q).map(|_| rng.random_range(-1.0..1.0)).collect();
            let len = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-9);
            let radius = rng.random_range(4.0 * sup..8.0 * sup) * 1.000_001;
            let t: Vec<f64> = dir.iter().map(|x| x / len * radius).collect();
            let phi = phi_beta(&pm, beta, &t).unwrap();
            assert!(phi < htop - 0.25 * beta * radius * radius, "beta={beta} t={t:?}");
        }
    }
}

#[test]
fn coincidence_for_potts() {
    let pm = PressureMap::new(common::potts(3));
    for beta in [1.0, 2.0, 4.0] {
        let ms = find_maxima(&pm, beta, &MaximaOptions::default()).unwrap();
        for m in &ms.maxima {
            let bar = phibar_beta(&pm, beta, &m.z, &EntropyOptions::default()).unwrap();
            // Indicator means live on the simplex; the maximizers are interior points of it.
            assert!((m.value - bar).abs() < 1e-6, "beta={beta} z={:?} {} {}", m.z, m.value, bar);
        }
    }
}
