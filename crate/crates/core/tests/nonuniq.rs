use std::sync::{Arc, OnceLock};

use obss::fixedpoint::{ExponentParams, FixedPointContext};
use obss::grid::PeriodicGrid;
use obss::nonuniq::{assemble_solution, residual_check, separation, Frame, Mode, SolutionBundle};
use obss::profiles::{synthesize_forcing, BackgroundProfile, ForcingPair, ProfileConfig};
use obss::semigroups::{LinearStepper, StepperConfig};
use obss::ObssError;

struct Fixture {
    ctx: FixedPointContext,
    forcing: Arc<ForcingPair>,
    zero: SolutionBundle,
    one: SolutionBundle,
    two: SolutionBundle,
}

// coarse dt and tolerance keep this quick; the acceptance target runs the fine version
fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let g = PeriodicGrid::new(16.0, 32).unwrap();
        let p = ExponentParams { a: 2.0, delta: 0.1, beta: 2.5, gamma: 3.0, b: 1.5, n: 1.75, tau0: -3.0, m: 0.5 };
        let bg = BackgroundProfile::new(&g, &ProfileConfig::default(), p.n).unwrap();
        let st = LinearStepper::from_background(&bg, StepperConfig::with_dt(4e-3)).unwrap();
        let ctx = FixedPointContext::synthetic(p, bg, st, 1e-6).unwrap();
        let forcing = Arc::new(synthesize_forcing(&ctx.background).unwrap());
        let solve = |c: f64| assemble_solution(&ctx.clone().with_coefficient(c), forcing.clone(), 20, 1e-8).unwrap();
        let (zero, one, two) = (solve(0.0), solve(1.0), solve(2.0));
        Fixture { ctx, forcing, zero, one, two }
    })
}

#[test]
fn zero_coefficient_reproduces_the_background() {
    let f = fixture();
    let s = obss::grid::SobolevIndex::new(0.0).unwrap();
    assert_eq!(f.zero.u_p.weighted_norm(0.0, s), 0.0);
    assert!(f.zero.theta_p.weighted_norm(0.0, s) < 1e-14);
    let r = residual_check(&f.ctx, &f.zero, Frame::SelfSimilar, &f.ctx.taus.nodes()).unwrap();
    assert!(r.max() <= 1e-8, "{}", r.max());
}

#[test]
fn bundles_are_synthetic_and_share_the_forcing() {
    let f = fixture();
    for b in [&f.one, &f.two] {
        assert_eq!(b.mode, Mode::Synthetic);
        assert!(Arc::ptr_eq(&b.forcing, &f.forcing));
        assert!(b.contraction_factor < 0.5);
    }
}

#[test]
fn natural_frame_needs_a_computed_generator() {
    let f = fixture();
    let err = residual_check(&f.ctx, &f.one, Frame::Natural, &[f.ctx.taus.tau0()]).unwrap_err();
    assert!(matches!(err, ObssError::FrameUnavailable(_)), "{err}");
}

#[test]
fn separation_is_symmetric_and_positive() {
    let f = fixture();
    let a = separation(&f.ctx, &f.one, &f.two).unwrap();
    let b = separation(&f.ctx, &f.two, &f.one).unwrap();
    assert_eq!(a.separation, b.separation);
    assert!(a.min_separation > 0.0);
    let early = a.early_rate.unwrap();
    assert!((early - 2.0).abs() < 0.2, "{early}");
}

#[test]
fn separation_rejects_different_forcing() {
    let f = fixture();
    let other = BackgroundProfile::new(f.ctx.grid(), &ProfileConfig { amplitude: 2.0, ..ProfileConfig::default() }, 1.75).unwrap();
    let mut b = f.two.clone();
    b.forcing = Arc::new(synthesize_forcing(&other).unwrap());
    assert!(matches!(separation(&f.ctx, &f.one, &b), Err(ObssError::Config(_))));
}
