use ovm::characterization::{certify_two_moment, holder_gap, in_omega, MATCH_TOL};
use ovm::corpus::{self, SupportRange};
use ovm::counterexample::{build_dilation_matrix, build_povm, solve_params, Case};
use ovm::dilation::{dilate_minimal, numerical_rank};
use ovm::hermitian::{CMatrix, HermitianMatrix, Interval};
use ovm::inequalities::{hansen_gap, kadison_gap, kadison_gap_algebraic, CompressionMap};
use proptest::prelude::*;

fn poly(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

fn exponent_pair_outside_omega() -> impl Strategy<Value = (u32, u32)> {
    (1u32..=8, 1u32..=8)
        .prop_map(|(a, b)| (a.min(b), a.max(b)))
        .prop_filter("outside omega", |&(p, q)| !in_omega(p, q))
}

fn omega_pair() -> impl Strategy<Value = (u32, u32)> {
    (0u32..4, 1u32..=4)
        .prop_map(|(i, j)| (2 * i + 1, 2 * j))
        .prop_filter("p < q", |&(p, q)| p < q)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn eig_reconstructs(seed in any::<u64>(), dim in 1usize..=8) {
        let a = corpus::random_hermitian(&mut corpus::trial_rng(seed, 0), dim);
        let dec = a.eig().unwrap();
        let scale = dec.eigenvalues.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        prop_assert!(dec.reconstruct().distance(&a).unwrap() <= 1e-10 * (1.0 + scale));
        prop_assert!(dec.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        let gram = dec.eigenvectors.adjoint() * &dec.eigenvectors;
        prop_assert!((gram - CMatrix::identity(dim, dim)).norm() < 1e-12);
    }

    #[test]
    fn calculus_is_multiplicative(
        seed in any::<u64>(),
        dim in 1usize..=4,
        f in prop::collection::vec(-1.0f64..1.0, 1..=5),
        g in prop::collection::vec(-1.0f64..1.0, 1..=5),
    ) {
        let a = corpus::random_hermitian(&mut corpus::trial_rng(seed, 0), dim);
        let fg = a.apply_function(|t| poly(&f, t) * poly(&g, t), Interval::REAL_LINE).unwrap();
        let fa = a.apply_function(|t| poly(&f, t), Interval::REAL_LINE).unwrap();
        let ga = a.apply_function(|t| poly(&g, t), Interval::REAL_LINE).unwrap();
        let prod = HermitianMatrix::new(fa.matmul(&ga)).unwrap();
        prop_assert!(fg.approx_eq(&prod, 1e-9).unwrap());
    }

    #[test]
    fn polynomial_calculus_matches_powers(seed in any::<u64>(), dim in 1usize..=5, k in 0u32..=6) {
        let a = corpus::random_hermitian(&mut corpus::trial_rng(seed, 0), dim);
        let via_eig = a.apply_function(|t| t.powi(k as i32), Interval::REAL_LINE).unwrap();
        prop_assert!(via_eig.approx_eq(&a.powi(k), 1e-10).unwrap());
    }

    /// Spectrum kept at `|mu| >= 0.1`: for eigenvalues near zero the root
    /// amplifies the rounding of `A^p` to `(eps |A|^p)^{1/p}`.
    #[test]
    fn odd_root_inverts_odd_power(
        seed in any::<u64>(),
        spectrum in prop::collection::vec((0.1f64..3.0, any::<bool>()), 1..=6),
        half in 0u32..4,
    ) {
        let p = 2 * half + 1;
        let dim = spectrum.len();
        let mu: Vec<f64> = spectrum.iter().map(|&(m, neg)| if neg { -m } else { m }).collect();
        let u = corpus::random_unitary(&mut corpus::trial_rng(seed, 0), dim).unwrap();
        let a = HermitianMatrix::diag(&mu).congruence(&u.adjoint()).unwrap();
        prop_assert!(a.powi(p).odd_root(p).unwrap().approx_eq(&a, 1e-8).unwrap());
        let ap = a.apply_function(|t| t.powi(p as i32), Interval::REAL_LINE).unwrap();
        prop_assert!(ap.odd_root(p).unwrap().approx_eq(&a, 1e-8).unwrap());
    }

    #[test]
    fn square_root_is_operator_monotone(seed in any::<u64>(), dim in 1usize..=5) {
        let mut rng = corpus::trial_rng(seed, 0);
        let a = corpus::random_psd(&mut rng, dim, dim);
        let c = corpus::random_psd(&mut rng, dim, 1);
        let b = &a + &c;
        let diff = &b.powf_psd(0.5).unwrap() - &a.powf_psd(0.5).unwrap();
        prop_assert!(diff.min_eigenvalue().unwrap() >= -1e-9);
    }

    #[test]
    fn zeroth_moment_is_exact_identity(seed in any::<u64>()) {
        let f = corpus::random_mixed(&mut corpus::trial_rng(seed, 0), 4, SupportRange::SYMMETRIC).unwrap();
        prop_assert_eq!(f.moment(0).unwrap(), HermitianMatrix::identity(f.dim()));
    }

    #[test]
    fn variance_and_hankel_are_psd(seed in any::<u64>()) {
        let f = corpus::random_mixed(&mut corpus::trial_rng(seed, 0), 4, SupportRange::SYMMETRIC).unwrap();
        prop_assert!(f.variance().unwrap().min_eigenvalue().unwrap() >= -1e-9);
        for n in 0..=4 {
            prop_assert!(f.hankel(n).unwrap().min_eigenvalue().unwrap() >= -1e-8);
        }
    }

    #[test]
    fn spectral_iff_zero_variance(seed in any::<u64>()) {
        let f = corpus::random_mixed(&mut corpus::trial_rng(seed, 0), 4, SupportRange::SYMMETRIC).unwrap();
        let zero_var = f.variance().unwrap().frobenius_norm() <= 1e-8;
        prop_assert_eq!(f.is_spectral(1e-9), zero_var);
    }

    #[test]
    fn rescale_scales_moments(seed in any::<u64>(), tau_idx in 0usize..4, k in 0u32..=6) {
        let tau = [-2.0, -1.0, 0.5, 3.0][tau_idx];
        let f = corpus::random_mixed(&mut corpus::trial_rng(seed, 0), 4, SupportRange::SYMMETRIC).unwrap();
        let lhs = f.rescale(tau).unwrap().moment(k).unwrap();
        let rhs = f.moment(k).unwrap().scale(tau.powi(k as i32));
        prop_assert!(lhs.approx_eq(&rhs, 1e-10).unwrap());
    }

    #[test]
    fn odd_pushforward_keeps_spectrality(seed in any::<u64>(), half in 0u32..3) {
        let p = 2 * half + 1;
        let f = corpus::random_mixed(&mut corpus::trial_rng(seed, 0), 4, SupportRange::SYMMETRIC).unwrap();
        let g = f.pushforward(|x| x.powi(p as i32)).unwrap();
        prop_assert_eq!(g.len(), f.len());
        prop_assert_eq!(g.is_spectral(1e-9), f.is_spectral(1e-9));
    }

    #[test]
    fn dilation_characterizes_spectrality(seed in any::<u64>()) {
        let f = corpus::random_mixed(&mut corpus::trial_rng(seed, 0), 4, SupportRange::SYMMETRIC).unwrap();
        let d = dilate_minimal(&f).unwrap();
        prop_assert_eq!(f.is_spectral(1e-9), d.p_commutes(1e-9));
        for k in 0..=6 {
            prop_assert!(d.moment(k).unwrap().approx_eq(&f.moment(k).unwrap(), 1e-9).unwrap());
        }
        let ranks: usize = f.atoms().iter().map(|a| numerical_rank(&a.effect).unwrap()).sum();
        prop_assert_eq!(d.big_dim(), ranks);
    }

    #[test]
    fn kadison_identity_on_dilation_space(seed in any::<u64>()) {
        let mut rng = corpus::trial_rng(seed, 0);
        let f = corpus::random_mixed(&mut rng, 3, SupportRange::SYMMETRIC).unwrap();
        let d = dilate_minimal(&f).unwrap();
        let x = corpus::random_hermitian(&mut rng, d.big_dim());
        let p = d.p();
        let pxp = x.congruence(p.matrix()).unwrap();
        let lhs = &x.square().congruence(p.matrix()).unwrap() - &pxp.square();
        let xp = x.matrix() * p.matrix();
        let q = CMatrix::identity(d.big_dim(), d.big_dim()) - p.matrix();
        let rhs = HermitianMatrix::new(xp.adjoint() * q * xp).unwrap();
        prop_assert!(lhs.distance(&rhs).unwrap() <= 1e-9);
    }

    #[test]
    fn kadison_gap_is_a_gram_matrix(seed in any::<u64>(), dim in 2usize..=6) {
        let mut rng = corpus::trial_rng(seed, 0);
        let rank = 1 + (seed as usize) % (dim - 1);
        let p = corpus::random_projection(&mut rng, dim, rank).unwrap();
        let a = corpus::random_hermitian(&mut rng, dim);
        let c = CompressionMap::new(&p).unwrap();
        let gap = kadison_gap(&c, &a).unwrap();
        prop_assert!(gap.min_eigenvalue().unwrap() >= -1e-9);
        prop_assert!(gap.distance(&kadison_gap_algebraic(&c, &a).unwrap()).unwrap() <= 1e-9);
    }

    #[test]
    fn hansen_gap_is_psd(seed in any::<u64>(), dim in 1usize..=5, s in 0.05f64..0.95) {
        let mut rng = corpus::trial_rng(seed, 0);
        let a = corpus::random_psd(&mut rng, dim, dim);
        let c = corpus::random_contraction(&mut rng, dim).unwrap();
        prop_assert!(hansen_gap(&a, &c, s).unwrap().min_eigenvalue().unwrap() >= -1e-9);
    }

    #[test]
    fn holder_inequality_on_scalar_measures(
        (p, q) in omega_pair(),
        alpha in 0.01f64..0.99,
        l1 in -3.0f64..3.0,
        l2 in -3.0f64..3.0,
    ) {
        let gap = holder_gap(alpha, l1, l2, p, q);
        prop_assert!(gap >= -1e-12 * (1.0 + 3f64.powi(q as i32)));
        if (l1 - l2).abs() > 1e-3 {
            prop_assert!(gap > 0.0 || (l1.abs() - l2.abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn spectral_measures_certify(seed in any::<u64>(), (p, q) in omega_pair()) {
        let mut rng = corpus::trial_rng(seed, 0);
        let dim = 1 + (seed % 4) as usize;
        let f = corpus::random_spectral_povm(&mut rng, dim, 3, SupportRange::SYMMETRIC).unwrap();
        let t = f.moment(1).unwrap();
        let v = certify_two_moment(&t, &f, p, q, MATCH_TOL).unwrap();
        prop_assert!(v.all_match());
        prop_assert!(v.direct_spectral && v.theorem_consistent);
        for k in 0..=2 * q {
            prop_assert!(t.powi(k).approx_eq(&f.moment(k).unwrap(), 1e-8).unwrap());
        }
    }

    #[test]
    fn counterexamples_solve_the_system(
        (p, q) in exponent_pair_outside_omega(),
        tau in prop_oneof![-3.0f64..-0.25, 0.25f64..3.0],
    ) {
        let c = solve_params(p, q, tau).unwrap();
        c.validate(1e-12, 1e-10).unwrap();
        prop_assert!(c.lambda1 != c.lambda2);
        let case = Case::classify(p, q).unwrap();
        if matches!(case, Case::EvenOdd | Case::BothOdd) {
            prop_assert!(c.determinant().abs() <= 1e-9);
        }
        let s = build_dilation_matrix(&c);
        for n in 0..=2 * q {
            let scale = c.alpha * c.lambda1.abs().powi(n as i32) + c.beta * c.lambda2.abs().powi(n as i32);
            prop_assert!((s.powi(n).get(0, 0).re - c.moment(n)).abs() <= 1e-9 * scale.max(1.0));
        }
    }

    #[test]
    fn counterexample_dilation_is_the_two_by_two_model((p, q) in exponent_pair_outside_omega()) {
        let c = solve_params(p, q, 1.0).unwrap();
        let (_, f) = build_povm(&c, 1).unwrap();
        let d = dilate_minimal(&f).unwrap();
        prop_assert_eq!(d.big_dim(), 2);
        let model = build_dilation_matrix(&c);
        let ev = d.s().eigenvalues().unwrap();
        let mv = model.eigenvalues().unwrap();
        prop_assert!((ev[0] - mv[0]).abs() < 1e-12 && (ev[1] - mv[1]).abs() < 1e-12);
        for k in 0..=2 * q {
            let compressed = d.moment(k).unwrap().get(0, 0).re;
            let scale = 1.0 + c.lambda1.abs().max(c.lambda2.abs()).powi(k as i32);
            prop_assert!((compressed - model.powi(k).get(0, 0).re).abs() <= 1e-10 * scale);
        }
    }
}
