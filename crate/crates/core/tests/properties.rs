use num_complex::Complex64;
use proptest::prelude::*;

use obss::fixedpoint::{
    check_exponents, duhamel, gauss_legendre, ExponentParams, PanelRule, TauGrid, Trajectory, TrajectoryY,
};
use obss::grid::{
    hs_norm, leray_project, PeriodicGrid, SobolevIndex, Snapshot, SpectralField, SpectralScalarField,
};
use obss::nonuniq::trajectory_distance;
use obss::semigroups::{Semigroup, SyntheticPropagator};
use obss::spectra::random_solenoidal;
use obss::Result;

fn small_grid() -> PeriodicGrid {
    PeriodicGrid::new(8.0, 16).unwrap()
}

fn bump(grid: &PeriodicGrid, cx: f64, w: f64) -> SpectralScalarField {
    SpectralScalarField::from_fn(grid, |x, y, z| (-((x - cx).powi(2) + y * y + z * z) / (w * w)).exp())
}

struct Decay(f64);

impl Semigroup<SpectralScalarField> for Decay {
    fn apply(&self, f: &SpectralScalarField, tau: f64) -> Result<SpectralScalarField> {
        Ok(f.scaled((-self.0 * tau).exp()))
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn feasible_exponents_dominate_every_term_rate(
        a in 0.2f64..4.0, delta in 0.01f64..1.0, beta in 0.1f64..8.0, gamma in 0.1f64..8.0, b in 0.1f64..4.0,
    ) {
        let p = ExponentParams { a, delta, beta, gamma, b, n: 1.75, tau0: -3.0, m: 0.5 };
        if check_exponents(&p).unwrap().is_empty() {
            let r = p.term_rates();
            // velocity terms must beat β, temperature terms γ
            for v in &r[..5] {
                prop_assert!(*v > beta);
            }
            for t in &r[5..] {
                prop_assert!(*t > gamma);
            }
            prop_assert!(p.slowest_rate() > a + delta - 1e-12);
            let g = TauGrid::for_params(&p, 1e-6).unwrap();
            prop_assert!((p.slowest_rate() * g.tau_min()).exp() <= 1e-9 * (1.0 + 1e-9));
        }
    }

    #[test]
    fn suggested_exponents_are_feasible(a in 0.3f64..6.0, frac in 0.01f64..0.49) {
        let p = ExponentParams::suggest(a, frac * a);
        prop_assert!(check_exponents(&p).unwrap().is_empty());
    }

    #[test]
    fn gauss_rule_is_exact_to_degree_2q_minus_1(q in 1usize..9, coeffs in prop::collection::vec(-2.0f64..2.0, 1..18)) {
        let deg = (2 * q - 1).min(coeffs.len() - 1);
        let c = &coeffs[..=deg];
        let (x, w) = gauss_legendre(q);
        let quad: f64 = x.iter().zip(&w).map(|(x, w)| w * c.iter().rev().fold(0.0, |acc, ci| acc * x + ci)).sum();
        let exact: f64 = c.iter().enumerate().map(|(k, ck)| if k % 2 == 0 { 2.0 * ck / (k as f64 + 1.0) } else { 0.0 }).sum();
        prop_assert!((quad - exact).abs() < 1e-11 * (1.0 + exact.abs()));
    }

    #[test]
    fn sigma_rule_weights_sum_to_panel_width(h in 1e-3f64..0.5, q in 1usize..10) {
        let rule = PanelRule::sigma_gauss(h, q).unwrap();
        let s: f64 = rule.weights().iter().sum();
        prop_assert!((s - h).abs() < 1e-13);
        prop_assert!(rule.offsets().iter().all(|o| *o >= 0.0 && *o <= h));
        prop_assert!(rule.offsets().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn tau_grid_ends_at_tau0(tau0 in -6.0f64..-0.5, span in 0.2f64..8.0) {
        let g = TauGrid::new(tau0 - span, tau0, 0.05).unwrap();
        prop_assert_eq!(g.node(g.len() - 1), tau0);
        prop_assert!(g.tau_min() <= tau0 - span + 1e-9);
        prop_assert!(g.tau_min() > tau0 - span - 0.05);
        let mid = 0.5 * (g.tau_min() + tau0);
        prop_assert!((g.node(g.nearest(mid)) - mid).abs() <= 0.025 + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn leray_projection_is_idempotent_and_solenoidal(seed in 0u64..1000) {
        let g = small_grid();
        let phi = bump(&g, 0.5, 1.2);
        let mut v = random_solenoidal(&g, seed);
        v.axpy(1.0, &phi.gradient());
        let p = leray_project(&v);
        let pp = leray_project(&p);
        prop_assert!(p.divergence().l2_norm() <= 1e-12 * p.h1_seminorm().max(1e-300));
        prop_assert!(pp.sub(&p).l2_norm() <= 1e-13 * p.l2_norm());
        // the gradient part is removed entirely
        prop_assert!(p.sub(&random_solenoidal(&g, seed)).l2_norm() <= 1e-10);
    }

    #[test]
    fn sobolev_norms_increase_with_index(seed in 0u64..1000, s in 0.0f64..2.5, ds in 0.0f64..1.5) {
        // the smallest nonzero |k| on this box exceeds 1, so the weights (1+|k|²)^s only grow with s
        let f = random_solenoidal(&small_grid(), seed);
        let lo = hs_norm(&f, SobolevIndex::new(s).unwrap());
        let hi = hs_norm(&f, SobolevIndex::new(s + ds).unwrap());
        prop_assert!(hi >= lo * (1.0 - 1e-14));
    }

    #[test]
    fn snapshot_bytes_roundtrip(seed in 0u64..1000) {
        let v = random_solenoidal(&small_grid(), seed);
        let snap = Snapshot::stack(&[Snapshot::from_vector(&v), Snapshot::from_scalar(v.component(2))]).unwrap();
        let back = Snapshot::from_bytes(&snap.to_bytes()).unwrap();
        prop_assert_eq!(back, snap);
    }

    #[test]
    fn synthetic_propagator_is_a_semigroup(s in 0.0f64..1.5, t in 0.0f64..1.5, re in -1.0f64..2.0, im in 0.0f64..2.0, seed in 0u64..100) {
        let g = small_grid();
        let prop = SyntheticPropagator::new(&g, Complex64::new(re, im), 1.75).unwrap();
        let u = random_solenoidal(&g, seed);
        let one = prop.apply(&u, s + t).unwrap();
        let two = prop.apply(&prop.apply(&u, s).unwrap(), t).unwrap();
        prop_assert!(one.sub(&two).l2_norm() <= 1e-11 * (1.0 + one.l2_norm()));
        // nothing outside the injected plane grows
        prop_assert!(one.l2_norm() <= (re.max(0.0) * (s + t)).exp() * u.l2_norm() * (1.0 + 1e-10));
    }

    #[test]
    fn duhamel_is_linear_in_the_source(alpha in -3.0f64..3.0, mu in 0.0f64..4.0, r1 in 0.5f64..4.0, r2 in 0.5f64..4.0) {
        let g = small_grid();
        let (f1, f2) = (bump(&g, 0.0, 1.0), bump(&g, 1.0, 0.7));
        let taus = TauGrid::new(-2.0, -1.0, 0.05).unwrap();
        let rule = PanelRule::sigma_gauss(0.05, 4).unwrap();
        let z = SpectralScalarField::zeros(&g);
        let d = |src: &dyn Fn(f64) -> SpectralScalarField| duhamel(&Decay(mu), &taus, &rule, z.clone(), |t| Ok(src(t))).unwrap();
        let d1 = d(&|t| f1.scaled((r1 * t).exp()));
        let d2 = d(&|t| f2.scaled((r2 * t).exp()));
        let both = d(&|t| {
            let mut x = f1.scaled(alpha * (r1 * t).exp());
            x.axpy((r2 * t).exp(), &f2);
            x
        });
        for i in 0..taus.len() {
            let mut lin = d1[i].scaled(alpha);
            lin.axpy(1.0, &d2[i]);
            prop_assert!(both[i].sub(&lin).l2_norm() <= 1e-12 * (1.0 + lin.l2_norm()));
        }
    }

    #[test]
    fn weighted_norm_and_distance_behave_like_norms(k in 0.1f64..3.0, rate in 0.0f64..4.0, c in -3.0f64..3.0) {
        let g = small_grid();
        let base = bump(&g, 0.0, 1.0);
        let taus = TauGrid::new(-2.0, -1.0, 0.05).unwrap();
        let a: TrajectoryY = Trajectory::from_fn(taus, |t| base.scaled((k * t).exp()));
        let b: TrajectoryY = Trajectory::from_fn(taus, |t| base.scaled(1.0 + 0.1 * t));
        let s0 = SobolevIndex::new(0.0).unwrap();
        let n = a.weighted_norm(rate, s0);
        prop_assert!((a.scaled(c).weighted_norm(rate, s0) - c.abs() * n).abs() <= 1e-12 * n.max(1e-300));
        prop_assert!(a.sub(&a).unwrap().weighted_norm(rate, s0) == 0.0);
        prop_assert!(trajectory_distance(&a, &a).unwrap() == 0.0);
        let dab = trajectory_distance(&a, &b).unwrap();
        let dba = trajectory_distance(&b, &a).unwrap();
        prop_assert!(dab > 0.0 && dba > 0.0);
    }
}
