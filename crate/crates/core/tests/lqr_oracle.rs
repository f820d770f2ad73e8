use neurolqr::delayed_lqr::{augment, augment_cost, synthesize, LqrWeights, OptimalGains};
use neurolqr::muscle_plant::{DiscretePlant, MuscleParams};
use neurolqr::simulation::{closed_loop, closed_loop_with_initial, cost_of_trace, pulse, Controller, Disturbance};

const PAIRS: [(f64, f64); 6] = [(1.0, 0.01), (1.0, 1.0), (10.0, 0.1), (0.5, 2.0), (2.0, 1e-3), (0.01, 1.0)];

fn plant() -> DiscretePlant {
    DiscretePlant::from_muscle(&MuscleParams::default(), 1.0, 0.01).unwrap()
}

type Mat<const N: usize> = [[f64; N]; N];

fn matmul<const N: usize>(x: &Mat<N>, y: &Mat<N>) -> Mat<N> {
    let mut out = [[0.0; N]; N];
    for i in 0..N {
        for j in 0..N {
            out[i][j] = (0..N).map(|k| x[i][k] * y[k][j]).sum();
        }
    }
    out
}

fn transpose<const N: usize>(x: &Mat<N>) -> Mat<N> {
    let mut out = [[0.0; N]; N];
    for i in 0..N {
        for j in 0..N {
            out[j][i] = x[i][j];
        }
    }
    out
}

/// Finite-horizon backward dynamic programming on `[δf, γ_{T−1} … γ_1, δr]`
/// with no input penalty. Returns the stage-0 gain and value matrix.
fn backward_dp<const N: usize>(a: f64, b: f64, q: f64, r: f64, horizon: usize) -> ([f64; N], Mat<N>) {
    let mut dyn_a = [[0.0; N]; N];
    dyn_a[0][0] = a;
    dyn_a[0][N - 1] = b;
    for i in 1..N - 1 {
        dyn_a[i + 1][i] = 1.0;
    }
    let mut cost = [[0.0; N]; N];
    cost[0][0] = q;
    cost[N - 1][N - 1] = r;
    let mut p = cost;
    let mut gain = [0.0; N];
    for _ in 0..horizon {
        // Input enters the γ_{T−1} slot.
        let pivot = p[1][1];
        let pa = matmul(&p, &dyn_a);
        let bpa: [f64; N] = std::array::from_fn(|j| pa[1][j]);
        gain = if pivot > 0.0 {
            bpa.map(|v| -v / pivot)
        } else {
            [0.0; N]
        };
        let ata = matmul(&transpose(&dyn_a), &pa);
        let mut next = [[0.0; N]; N];
        for i in 0..N {
            for j in 0..N {
                // A'PB K with B = e_1.
                let apb_i = (0..N).map(|k| dyn_a[k][i] * p[k][1]).sum::<f64>();
                next[i][j] = cost[i][j] + ata[i][j] + apb_i * gain[j];
            }
        }
        p = next;
    }
    (gain, p)
}

#[test]
fn riccati_matches_backward_dp() {
    let pl = plant();
    for (q, r) in PAIRS {
        let (_, sol) = synthesize(&pl, 2, &LqrWeights::new(q, r).unwrap()).unwrap();
        let (gain, p) = backward_dp::<3>(pl.a, pl.b, q, r, 500);
        for (k, o) in sol.gains.as_slice().iter().zip(gain) {
            assert!((k - o).abs() < 1e-9, "q={q} r={r}: {k} vs {o}");
        }
        for (i, row) in p.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!((sol.cost_to_go[(i, j)] - v).abs() < 1e-9 * (1.0 + v.abs()));
            }
        }
    }
}

#[test]
fn longer_delays_match_backward_dp() {
    let pl = plant();
    for (q, r) in PAIRS.into_iter().take(3) {
        let w = LqrWeights::new(q, r).unwrap();
        let (_, sol3) = synthesize(&pl, 3, &w).unwrap();
        let (gain3, _) = backward_dp::<4>(pl.a, pl.b, q, r, 500);
        let (_, sol4) = synthesize(&pl, 4, &w).unwrap();
        let (gain4, _) = backward_dp::<5>(pl.a, pl.b, q, r, 500);
        for (k, o) in sol3.gains.as_slice().iter().zip(gain3).chain(sol4.gains.as_slice().iter().zip(gain4)) {
            assert!((k - o).abs() < 1e-9);
        }
    }
}

#[test]
fn cost_to_go_equals_simulated_cost() {
    let pl = plant();
    for (q, r) in PAIRS {
        let w = LqrWeights::new(q, r).unwrap();
        let (_, sol) = synthesize(&pl, 2, &w).unwrap();
        let tr = closed_loop_with_initial(&pl, &Controller::Gains(sol.gains.clone()), &Disturbance::None, 1000, 1.0).unwrap();
        let cost = cost_of_trace(&tr, &w);
        let p11 = sol.cost_to_go[(0, 0)];
        assert!((cost - p11).abs() < 1e-8 * (1.0 + p11), "q={q} r={r}: {cost} vs {p11}");
    }
}

#[test]
fn optimal_gains_beat_perturbed_gains() {
    let pl = plant();
    let kick = pulse(1.0, 0, 1).unwrap();
    for (q, r) in PAIRS {
        let w = LqrWeights::new(q, r).unwrap();
        let (_, sol) = synthesize(&pl, 2, &w).unwrap();
        let run = |g: OptimalGains| cost_of_trace(&closed_loop(&pl, &Controller::Gains(g), &kick, 2000).unwrap(), &w);
        let best = run(sol.gains.clone());
        for idx in 0..3 {
            for factor in [0.9, 0.95, 1.05, 1.1] {
                let mut k = sol.gains.as_slice().to_vec();
                k[idx] *= factor;
                let c = run(OptimalGains::from_vec(k).unwrap());
                assert!(c >= best - 1e-12 * best, "q={q} r={r} k{idx}*{factor}: {c} < {best}");
            }
        }
    }
}

#[test]
fn augmented_loop_reproduces_delayed_plant() {
    let pl = plant();
    let (sys, sol) = synthesize(&pl, 2, &LqrWeights::default()).unwrap();
    let acl = sys.closed_loop(&sol.gains);
    let tr = closed_loop_with_initial(&pl, &Controller::Gains(sol.gains.clone()), &Disturbance::None, 60, 1.0).unwrap();
    let mut x = nalgebra::DVector::from_vec(vec![1.0, 0.0, 0.0]);
    for t in 0..60 {
        assert!((x[0] - tr.delta_f[t]).abs() < 1e-12);
        assert!((x[2] - tr.delta_r[t]).abs() < 1e-12);
        x = &acl * x;
    }
    // Same weights seen through the stage cost.
    let q_tilde = augment_cost(&LqrWeights::default(), 2);
    assert_eq!(q_tilde[(0, 0)], 1.0);
    assert_eq!(q_tilde[(2, 2)], 0.01);
    assert_eq!(augment(&pl, 2).unwrap(), sys);
}
