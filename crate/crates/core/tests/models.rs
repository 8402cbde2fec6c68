use photodetection::emodel::{e_count_distribution, e_moments, e_ncav, e_wt_curve};
use photodetection::detector::{default_theta, graded_tau_grid};
use photodetection::sdmodel::{sd_count_distribution, sd_moments, sd_ncav, sd_wt_curve};
use photodetection::{IdealizedDetector, PhotonDistribution, StateFamily, Variant};
use proptest::prelude::*;

fn det(v: Variant, eta: f64, d: f64) -> IdealizedDetector<f64> {
    IdealizedDetector::unit(v, eta, d).unwrap()
}

#[test]
fn single_photon_models_coincide() {
    // with at most one photon the saturated and linear jump forms agree
    let d = PhotonDistribution::new(vec![0.3, 0.7], 1e-12).unwrap();
    let (sd, e) = (det(Variant::Sd, 0.6, 0.1), det(Variant::E, 0.6, 0.1));
    for rt in [0.2, 1.0, 4.0] {
        let a = sd_count_distribution(&d, &sd, rt, 8).unwrap();
        let b = e_count_distribution(&d, &e, rt, 8).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
        assert!((sd_ncav(&d, rt) - e_ncav(&d, rt).unwrap()).abs() < 1e-14);
    }
    let theta = default_theta(0.6).unwrap();
    let taus = graded_tau_grid(theta, 801);
    let a = sd_wt_curve(&d, &sd, 1.0, &taus, theta).unwrap();
    let b = e_wt_curve(&d, &e, 1.0, &taus, theta).unwrap();
    assert!((a.mean_wt.unwrap() - b.mean_wt.unwrap()).abs() < 1e-12);
}

#[test]
fn coherent_state_stays_poissonian_without_dark_counts() {
    let d = PhotonDistribution::coherent(50.0, None, 1e-12).unwrap();
    for rt in [0.1, 1.0, 10.0] {
        let k = sd_moments(&d, &det(Variant::Sd, 0.6, 0.0), rt).unwrap().k_t().unwrap();
        assert!((k - 1.0).abs() < 1e-6);
    }
}

#[test]
fn sd_mean_counts_independent_of_state_family() {
    let dt = det(Variant::Sd, 0.6, 5e-3);
    for rt in [0.5, 2.0, 8.0] {
        let means: Vec<f64> = StateFamily::ALL
            .iter()
            .map(|f| sd_moments(&f.build(50.0, 1e-12).unwrap(), &dt, rt).unwrap().mbar)
            .collect();
        for m in &means {
            assert!((m - means[0]).abs() < 1e-8 * means[0]);
        }
    }
}

#[test]
fn e_model_counts_slower_than_sd() {
    let d = PhotonDistribution::number(50, 50).unwrap();
    for rt in [1.0, 10.0, 40.0] {
        let sd = sd_moments(&d, &det(Variant::Sd, 0.6, 0.0), rt).unwrap().mbar;
        let e = e_moments(&d, &det(Variant::E, 0.6, 0.0), rt).unwrap().mbar;
        assert!(e < sd);
    }
}

#[test]
fn single_precision_moments_track_double() {
    let d64 = PhotonDistribution::<f64>::coherent(20.0, None, 1e-12).unwrap();
    let d32 = PhotonDistribution::<f32>::coherent(20.0, None, 1e-7).unwrap();
    for v in [Variant::Sd, Variant::E] {
        let a = IdealizedDetector::<f32>::unit(v, 0.6, 5e-3).unwrap();
        let b = det(v, 0.6, 5e-3);
        let (x, y) = match v {
            Variant::Sd => (sd_moments(&d32, &a, 2.0).unwrap().mbar, sd_moments(&d64, &b, 2.0).unwrap().mbar),
            Variant::E => (e_moments(&d32, &a, 2.0).unwrap().mbar, e_moments(&d64, &b, 2.0).unwrap().mbar),
        };
        assert!((x as f64 / y - 1.0).abs() < 1e-4, "{v}: {x} {y}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn counting_distributions_are_complete(
        nbar in 0.5f64..30.0, eta in 0.0f64..=1.0, d in 0.0f64..0.1, rt in 0.0f64..20.0,
    ) {
        for fam in StateFamily::ALL {
            let dist: PhotonDistribution<f64> = fam.build(nbar.round().max(1.0), 1e-12).unwrap();
            let m_max = dist.n_max() + 20;
            let sd = sd_count_distribution(&dist, &det(Variant::Sd, eta, d), rt, m_max).unwrap();
            let e = e_count_distribution(&dist, &det(Variant::E, eta, d), rt, m_max).unwrap();
            prop_assert!((sd.iter().sum::<f64>() - 1.0).abs() < 1e-8);
            prop_assert!((e.iter().sum::<f64>() - 1.0).abs() < 1e-8);
            prop_assert!(sd.iter().chain(&e).all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn mean_counts_never_decrease(nbar in 1.0f64..40.0, t0 in 0.0f64..10.0, dt in 0.0f64..5.0) {
        let dist = PhotonDistribution::coherent(nbar, None, 1e-12).unwrap();
        for v in [Variant::Sd, Variant::E] {
            let dt_ = det(v, 0.6, 5e-3);
            let m = |t| match v {
                Variant::Sd => sd_moments(&dist, &dt_, t).unwrap().mbar,
                Variant::E => e_moments(&dist, &dt_, t).unwrap().mbar,
            };
            prop_assert!(m(t0 + dt) >= m(t0) - 1e-12);
        }
    }
}
