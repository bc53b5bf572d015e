mod common;

use nalgebra::{Matrix4, Vector4};
use toxflow::control::{
    build_l, compute_r, slot, solve_phi, solve_s, AuxState, CoefficientTable, Mat8, DEFAULT_TOL,
};
use toxflow::sim::{simulate_path, Agent, AgentKind, SimOptions};
use toxflow::{CoefFn, Error, LedgerForm, ModelSpec, Scenario, TimeGrid};

use common::{expm, max_rel};

fn preset(sc: Scenario) -> (ModelSpec, TimeGrid) {
    let spec = ModelSpec::preset(sc);
    let grid = TimeGrid::for_spec(&spec, 1000).unwrap();
    (spec, grid)
}

#[test]
fn l_matches_hand_substitution() {
    let (spec, _) = preset(Scenario::Reversion);
    let l = build_l(&spec, 0.5, 0.2, LedgerForm::Consistent);
    assert_eq!(l[(slot::Q, slot::Y)], 1000.0);
    assert_eq!(l[(slot::Q, slot::GAMMA)], -1000.0);
    assert!((l[(slot::Q, slot::PSI)] + 40.0).abs() < 1e-12);
    assert!((l[(slot::Q, slot::R)] + 20.0).abs() < 1e-12);
    assert!(l.row(slot::R).iter().chain(l.row(slot::P).iter()).all(|v| *v == 0.0));
    assert_eq!(l, build_l(&spec, 0.0, 0.2, LedgerForm::Consistent));
}

#[test]
fn r_for_linear_b_matches_quadrature() {
    let spec = ModelSpec::preset(Scenario::Reversion).with_b(CoefFn::Linear { value0: 0.0, slope: -0.2 });
    let r = compute_r(&spec, &TimeGrid::new(1.0, 1000).unwrap(), 1.0).unwrap();
    // Simpson on 10x the points: -b' ∫₀¹ exp(0.4 (1 - s)) ds - b(1)
    let m = 10_000;
    let h = 1.0 / m as f64;
    let f = |s: f64| (0.4 * (1.0 - s)).exp();
    let simpson: f64 = (0..=m)
        .map(|j| {
            let w = if j == 0 || j == m { 1.0 } else if j % 2 == 1 { 4.0 } else { 2.0 };
            w * f(j as f64 * h)
        })
        .sum::<f64>()
        * h
        / 3.0;
    assert!((r - (0.2 * simpson + 0.2)).abs() < 1e-6);
    assert_eq!(compute_r(&ModelSpec::preset(Scenario::Reversion), &TimeGrid::new(1.0, 10).unwrap(), 0.3).unwrap(), 0.2);
}

#[test]
fn s_matches_matrix_exponential_for_constant_l() {
    let (spec, grid) = preset(Scenario::Reversion);
    let s = solve_s(&spec, &grid, LedgerForm::Consistent).unwrap();
    assert_eq!(s[grid.n_steps], Mat8::identity());
    let l = build_l(&spec, 0.0, 0.2, LedgerForm::Consistent);
    for k in [0, 250, 500, 900, 999] {
        let oracle = expm(&(l * (grid.horizon - grid.time(k))));
        let err = max_rel(&s[k], &oracle);
        assert!(err < 1e-8, "k = {k}: relative error {err:e}");
    }
}

#[test]
fn backward_and_forward_transitions_agree() {
    for sc in Scenario::ALL {
        let (spec, grid) = preset(sc);
        let s = solve_s(&spec, &grid, LedgerForm::Consistent).unwrap();
        let phi = solve_phi(&spec, &grid, LedgerForm::Consistent).unwrap();
        let phi_t = phi[grid.n_steps];
        for k in [0, 100, 500, 1000] {
            let err = max_rel(&(s[k] * phi[k]), &phi_t);
            assert!(err < 1e-6, "{sc} k = {k}: {err:e}");
        }
    }
}

#[test]
fn terminal_ledger_identities() {
    for sc in Scenario::ALL {
        let (spec, grid) = preset(sc);
        for form in [LedgerForm::Consistent, LedgerForm::AsPublished] {
            let table = CoefficientTable::build(&spec, &grid, form).unwrap();
            let n = grid.n_steps;
            let g = table.gains[n];
            let (alpha, eps) = (spec.alpha, spec.epsilon);
            assert!((g.x + 2.0 * alpha / eps).abs() < 1e-10 * (2.0 * alpha / eps));
            assert!((g.y + 1.0 / eps).abs() < 1e-10 / eps);
            assert!(g.theta.abs() < 1e-10 && g.p.abs() < 1e-10 && g.u.abs() < 1e-10);
            let row = &table.ledger[n];
            for c in [row.x, row.theta, row.y, row.p] {
                assert!(c.i_tilde.abs() < 1e-10 && c.h_tilde.abs() < 1e-10);
                assert!(c.h.abs() < 1e-10 && c.i.abs() < 1e-10);
            }
            assert!((row.x.j - 2.0 * alpha).abs() < 1e-10);
            assert!((row.p.j + 1.0).abs() < 1e-10);
            for d in &table.report.diagnostics {
                let at_t = match d.name.as_str() {
                    "inf G4" => row.pivots.g4,
                    "inf H5" => row.pivots.h5,
                    "inf I6" => row.pivots.i6,
                    "inf J7" => row.pivots.j7,
                    "inf |I5 - I6|" => (row.pivots.i5 - row.pivots.i6).abs(),
                    _ => continue,
                };
                assert_eq!(at_t, 1.0, "{}", d.name);
            }
        }
    }
}

#[test]
fn consistent_gains_solve_the_four_relations() {
    for sc in Scenario::ALL {
        let (spec, grid) = preset(sc);
        let table = CoefficientTable::build(&spec, &grid, LedgerForm::Consistent).unwrap();
        for k in [0, 10, 300, 700, 999, 1000] {
            let rw = &table.rows[k];
            let unknowns = [slot::Q, slot::GAMMA, slot::PSI, slot::R];
            let m = Matrix4::from_fn(|r, c| [rw.g, rw.h, rw.i, rw.j][r][unknowns[c]]);
            let lu = m.lu();
            let want: Vec<f64> = [slot::X, slot::THETA, slot::Y, slot::P]
                .iter()
                .map(|&s| {
                    let rhs = -Vector4::new(rw.g[s], rw.h[s], rw.i[s], rw.j[s]);
                    lu.solve(&rhs).unwrap()[0]
                })
                .collect();
            let got = table.ledger[k].gains();
            for (w, g) in want.iter().zip(got) {
                let scale = want.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                assert!((w - g).abs() < 1e-6 * scale, "{sc} k = {k}: {g} vs {w}");
            }
        }
    }
}

#[test]
fn g4_at_zero_regression() {
    let (spec, grid) = preset(Scenario::Reversion);
    let table = CoefficientTable::build(&spec, &grid, LedgerForm::Consistent).unwrap();
    let g4 = table.ledger[0].pivots.g4;
    assert!(g4 > 0.0);
    assert!((g4 / 1.268058412614356e10 - 1.0).abs() < 1e-9, "{g4:e}");
}

#[test]
fn reference_scenarios_satisfy_the_assumptions() {
    for sc in Scenario::ALL {
        let (spec, grid) = preset(sc);
        for form in [LedgerForm::Consistent, LedgerForm::AsPublished] {
            let table = CoefficientTable::build_unchecked(&spec, &grid, form, DEFAULT_TOL).unwrap();
            assert!(table.report.pass, "{sc} {form:?}: {:?}", table.report);
            assert_eq!(table.report.diagnostics.len(), 9);
        }
    }
}

#[test]
fn tiny_epsilon_is_rejected_with_the_offending_bound() {
    let (mut spec, grid) = preset(Scenario::Reversion);
    spec.epsilon = 1e-12;
    match CoefficientTable::build(&spec, &grid, LedgerForm::Consistent).unwrap_err() {
        Error::Assumption { quantity, t, .. } => {
            assert!(quantity.contains('S'), "{quantity}");
            assert!((0.0..=1.0).contains(&t));
        }
        e => panic!("unexpected error {e}"),
    }
}

#[test]
fn signal_gain_vanishes_at_horizon_and_for_fast_reversion() {
    let (spec, grid) = preset(Scenario::ShortSignal);
    let table = CoefficientTable::build(&spec, &grid, LedgerForm::Consistent).unwrap();
    let kappa = spec.signal.unwrap().kappa;
    assert_eq!(table.signal_gain(kappa, spec.horizon).unwrap(), 0.0);
    assert_eq!(table.gains[grid.n_steps].u, 0.0);
    let g0 = table.gains[0].u;
    assert!(g0 != 0.0);
    let mut last = g0.abs();
    for k in [1.0, 10.0, 100.0, 1000.0] {
        let g = table.signal_gain(k, 0.0).unwrap().abs();
        assert!(g < last, "kappa {k}: {g} not below {last}");
        last = g;
    }
    // ∫ kernel e^{-κs} ds ≈ kernel(0, 0) / κ for large κ
    let kern = table.signal_kernel(0, 0).g;
    assert!((1000.0 * table.signal_gain(1000.0, 0.0).unwrap() / kern - 1.0).abs() < 0.05);
}

#[test]
fn signal_gain_converges_under_refinement() {
    let spec = ModelSpec::preset(Scenario::ShortSignal);
    let coarse = CoefficientTable::build(&spec, &TimeGrid::for_spec(&spec, 400).unwrap(), LedgerForm::Consistent).unwrap();
    let fine = CoefficientTable::build(&spec, &TimeGrid::for_spec(&spec, 4000).unwrap(), LedgerForm::Consistent).unwrap();
    let (c, f) = (coarse.gains[0].u, fine.gains[0].u);
    assert!((c / f - 1.0).abs() < 1e-6, "{c} vs {f}");
}

#[test]
fn terminal_feedback_examples() {
    let (spec, grid) = preset(Scenario::Reversion);
    let table = CoefficientTable::build(&spec, &grid, LedgerForm::Consistent).unwrap();
    let q = table.feedback_rate(1.0, 0.01, 0.0, -0.005, 0.0, 0.0).unwrap();
    assert!((q + 199.5).abs() < 1e-9, "{q}");
    assert_eq!(table.feedback_rate(0.4, 0.0, 0.0, 0.0, 0.0, 0.0).unwrap(), 0.0);
    assert!(table.feedback_rate(0.40005, 0.0, 0.0, 0.0, 0.0, 0.0).is_err());
}

#[test]
fn first_order_condition_holds_along_a_path() {
    for sc in Scenario::ALL {
        let (spec, grid) = preset(sc);
        let agent = Agent::new(&spec, AgentKind::PartialInfo, &grid, LedgerForm::Consistent).unwrap();
        let table = CoefficientTable::build(&spec, &grid, LedgerForm::Consistent).unwrap();
        let traj = simulate_path(&spec, &agent, 3, 0, &SimOptions::default()).unwrap();
        let mut worst: f64 = 0.0;
        for s in &traj.nodes {
            let st = AuxState { x: s.x_hat, theta: s.theta_hat, y: s.y, q: s.q, p: s.p, u: s.u };
            let (gamma, psi, r) = table.auxiliaries(s.k, &st);
            let foc = spec.epsilon * s.q + s.p + s.y + gamma + psi + r;
            worst = worst.max(foc.abs());
        }
        assert!(worst < 1e-6, "{sc}: FOC residual {worst:e}");
    }
}

#[test]
fn published_ledger_differs_from_the_exact_solve() {
    let (spec, grid) = preset(Scenario::Reversion);
    let exact = CoefficientTable::build(&spec, &grid, LedgerForm::Consistent).unwrap();
    let published = CoefficientTable::build(&spec, &grid, LedgerForm::AsPublished).unwrap();
    assert!((exact.gains[0].p - published.gains[0].p).abs() > 1.0);
}
