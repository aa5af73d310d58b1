use ask_core::models::{self, DynamicalSystem};
use ask_core::reference::{
    reference_solve, rk4_solve, step_halving_gap, ReferenceSource, Rk4Config, LORENZ_LONG_STEP, ORACLE_STEP,
};
use ask_core::{ask_solve, AskConfig};

fn closed_form_models() -> Vec<DynamicalSystem> {
    vec![models::cosine(), models::limit_cycle(), models::appendix_lifted(), models::appendix_lifted_with(-0.3, -2.0)]
}

#[test]
fn closed_forms_satisfy_their_equations() {
    let h = 1e-6;
    for sys in closed_form_models() {
        for k in 1..=100 {
            let t = sys.horizon() * k as f64 / 101.0;
            let plus = sys.closed_form(t + h).unwrap();
            let minus = sys.closed_form(t - h).unwrap();
            let f = sys.rhs_eval(&sys.closed_form(t).unwrap()).unwrap();
            for i in 0..sys.dim() {
                let fd = (plus[i] - minus[i]) / (2.0 * h);
                assert!((fd - f[i]).abs() <= 1e-5 * (1.0 + f[i].abs()), "{} t={t} i={i}: {fd} vs {}", sys.name(), f[i]);
            }
        }
        assert_eq!(sys.closed_form(0.0).unwrap().len(), sys.dim());
        for (a, b) in sys.closed_form(0.0).unwrap().iter().zip(sys.x0()) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}

#[test]
fn kraichnan_orszag_invariants_are_conserved() {
    let sys = models::kraichnan_orszag();
    let inv = |x: &[f64]| (2.0 * x[0] * x[0] + x[2] * x[2], x[1] * x[1] - x[0] * x[0]);
    let (a0, b0) = inv(sys.x0());
    assert_eq!((a0, b0), (11.0, 3.0));
    let times: Vec<f64> = (0..=20).map(|k| k as f64).collect();
    let reference = reference_solve(&sys, &times).unwrap();
    let sol = ask_solve(&sys, sys.x0(), &AskConfig::from_defaults(&sys)).unwrap();
    for (t, x) in times.iter().zip(&reference.states) {
        let (a, b) = inv(x);
        assert!((a - a0).abs() < 1e-10 && (b - b0).abs() < 1e-10, "reference t={t}");
        let (a, b) = inv(&sol.evaluate_at(*t).unwrap());
        assert!((a - a0).abs() < 1e-5 && (b - b0).abs() < 1e-5, "ask t={t}: {a} {b}");
    }
}

#[test]
fn pendulum_energy_is_conserved() {
    let sys = models::simple_pendulum();
    let energy = |x: &[f64]| 0.5 * x[1] * x[1] - x[0].cos();
    let e0 = energy(sys.x0());
    let sol = ask_solve(&sys, sys.x0(), &AskConfig::from_defaults(&sys)).unwrap();
    for k in 0..=40 {
        let t = k as f64 * 0.5;
        let x = sol.evaluate_at(t).unwrap();
        assert!((energy(&x) - e0).abs() < 1e-8, "t={t}");
    }
}

#[test]
fn rk4_converges_at_fourth_order() {
    for sys in [models::cosine(), models::limit_cycle(), models::appendix_lifted()] {
        let exact = sys.closed_form(20.0).unwrap();
        let err = |steps| {
            let traj = rk4_solve(&sys, sys.x0(), 20.0, Rk4Config { steps }).unwrap();
            assert_eq!(traj.f_calls, 4 * steps as u64);
            traj.final_state()
                .iter()
                .zip(&exact)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let order = (err(200) / err(400)).log2();
        assert!((order - 4.0).abs() <= 0.3, "{}: order {order}", sys.name());
    }
}

#[test]
fn oracle_step_passes_halving_gate() {
    for sys in [models::lotka_volterra(), models::simple_pendulum(), models::kraichnan_orszag()] {
        let gap = step_halving_gap(&sys, 20.0, ORACLE_STEP).unwrap();
        assert!(gap <= 1e-10, "{}: {gap:e}", sys.name());
    }
    let gap = step_halving_gap(&models::lorenz(), 10.0, ORACLE_STEP).unwrap();
    assert!(gap <= 1e-8, "lorenz to 10: {gap:e}");
}

#[test]
fn long_lorenz_oracle_passes_halving_gate() {
    let gap = step_halving_gap(&models::lorenz(), 20.0, LORENZ_LONG_STEP).unwrap();
    assert!(gap <= 1e-3, "{gap:e}");
}

#[test]
fn reference_source_follows_closed_form_availability() {
    for sys in models::ModelRegistry::new().iter() {
        let r = reference_solve(sys, &[0.0, 1.0]).unwrap();
        let want = if sys.has_closed_form() { ReferenceSource::ClosedForm } else { ReferenceSource::HighResRk4 };
        assert_eq!(r.source, want, "{}", sys.name());
        for (a, b) in r.at(0.0).unwrap().iter().zip(sys.x0()) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}

#[test]
fn registry_lists_seven_models() {
    let reg = models::ModelRegistry::new();
    assert_eq!(
        reg.names(),
        ["cosine", "lotka_volterra", "simple_pendulum", "limit_cycle", "kraichnan_orszag", "lorenz", "appendix_lifted"]
    );
    assert!(reg.get("nope").is_err());
}
