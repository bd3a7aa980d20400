use proptest::prelude::*;
use sigmascale_core::precondition::{coeffs, coeffs_with, NoiseEmbedPolicy, OutputScale};
use sigmascale_core::schedule::{ddpm_cosine_alpha_bar, ddpm_cosine_equivalent_sigmas, edm_rho_schedule, phi_schedule};
use sigmascale_core::transforms::{candidate_set, PHI_STAR};
use sigmascale_core::{Order, TransformSpec};

fn any_candidate() -> impl Strategy<Value = TransformSpec> {
    (0..candidate_set().len()).prop_map(|i| candidate_set()[i])
}

proptest! {
    #[test]
    fn phi_schedule_is_equidistant_in_phi(
        spec in any_candidate(),
        lo in 1e-3f64..0.5,
        ratio in 2.0f64..100.0,
        n in 2usize..80,
    ) {
        let hi = lo * ratio;
        let s = phi_schedule(spec, lo, hi, n, Order::Ascending).unwrap();
        prop_assert_eq!(s.sigmas()[0], lo);
        prop_assert_eq!(s.sigmas()[n - 1], hi);
        let (a, b) = (spec.apply(lo).unwrap(), spec.apply(hi).unwrap());
        for (i, &sigma) in s.sigmas().iter().enumerate() {
            let want = a + (b - a) * i as f64 / (n - 1) as f64;
            prop_assert!((spec.apply(sigma).unwrap() - want).abs() < 1e-9, "{} at {}", spec, i);
        }
        let d = phi_schedule(spec, lo, hi, n, Order::Descending).unwrap();
        let mut rev = d.sigmas().to_vec();
        rev.reverse();
        prop_assert_eq!(rev.as_slice(), s.sigmas());
    }

    #[test]
    fn rho_one_is_linear(lo in 1e-3f64..1.0, span in 0.1f64..100.0, n in 2usize..100) {
        let hi = lo + span;
        let s = edm_rho_schedule(1.0, lo, hi, n).unwrap();
        for (i, &sigma) in s.sigmas().iter().enumerate() {
            let want = hi + (lo - hi) * i as f64 / (n - 1) as f64;
            prop_assert!((sigma - want).abs() <= 1e-12 * hi.max(1.0));
        }
    }

    #[test]
    fn identity_phi_is_linspace(lo in 1e-3f64..1.0, span in 0.1f64..100.0, n in 2usize..100) {
        let hi = lo + span;
        let s = phi_schedule(TransformSpec::Identity, lo, hi, n, Order::Ascending).unwrap();
        for (i, &sigma) in s.sigmas().iter().enumerate() {
            let want = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            prop_assert!((sigma - want).abs() <= 1e-12 * hi.max(1.0));
        }
    }

    #[test]
    fn preconditioning_identities(log_sigma in -9.0f64..6.0, sigma_data in 0.1f64..2.0) {
        let sigma = log_sigma.exp();
        let c = coeffs(sigma, sigma_data, NoiseEmbedPolicy::QuarterLog).unwrap();
        prop_assert!((c.c_in * c.c_in * (sigma * sigma + sigma_data * sigma_data) - 1.0).abs() < 1e-12);
        prop_assert!((c.c_skip - sigma_data * sigma_data * c.c_in * c.c_in).abs() < 1e-12);
        prop_assert!((c.c_out - sigma * c.c_in).abs() < 1e-12 * c.c_out.max(1.0));
        let e = coeffs_with(sigma, sigma_data, NoiseEmbedPolicy::QuarterLog, OutputScale::EdmCompat).unwrap();
        prop_assert!((e.c_out - sigma_data * c.c_out).abs() < 1e-12);
    }

    #[test]
    fn phi_star_embedding_is_increasing_and_bounded(a in 1e-6f64..1e3, b in 1e-6f64..1e3) {
        prop_assume!(a < b);
        let p = NoiseEmbedPolicy::PhiStar(PHI_STAR);
        let (ea, eb) = (p.embed(a).unwrap(), p.embed(b).unwrap());
        prop_assert!(0.0 < ea && ea < eb && eb < 1.0);
    }
}

#[test]
fn cosine_schedule_shape() {
    let ab = ddpm_cosine_alpha_bar(25).unwrap();
    assert_eq!(ab.len(), 26);
    assert_eq!(ab[0], 1.0);
    assert!(ab.windows(2).all(|w| w[1] < w[0]));
    let s = ddpm_cosine_equivalent_sigmas(25).unwrap();
    assert_eq!(s.sigmas()[0], 0.0);
    assert!(s.sigmas().windows(2).all(|w| w[1] > w[0]));
    for (a, sigma) in ab.iter().zip(s.sigmas()).skip(1).take(20) {
        assert!((sigma - ((1.0 - a) / a).sqrt()).abs() < 1e-12 * sigma.max(1.0));
    }
}
