use approx::assert_relative_eq;
use isea::pipeline::experiments::random_instance;
use isea::rng::{derive, rng_from};
use isea::transceiver::{
    baseline_channel_inversion, baseline_equal, brute_force_oracle, fdm_md_optimal, fdm_mse_dual, md_objective,
    mse_objective, optimal_rx, tdm_md_optimal, tdm_mse_optimal, OracleObjective,
};
use isea::{FdmInstance, SolverOptions, TdmInstance};
use ndarray::{array, Array2};

/// Minimizes `f` over the unit box: uniform grid, then compass search from
/// the best grid point with halving steps.
fn box_search(dims: usize, grid: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
    let mut best = (f64::INFINITY, vec![0.0; dims]);
    let mut idx = vec![0usize; dims];
    loop {
        let p: Vec<f64> = idx.iter().map(|&i| i as f64 / (grid - 1) as f64).collect();
        let v = f(&p);
        if v < best.0 {
            best = (v, p);
        }
        let mut d = 0;
        while d < dims {
            idx[d] += 1;
            if idx[d] < grid {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == dims {
            break;
        }
    }
    let (mut val, mut p) = best;
    let mut step = 1.0 / (grid - 1) as f64;
    while step > 1e-10 {
        let mut moved = false;
        for d in 0..dims {
            for s in [step, -step] {
                let mut q = p.clone();
                q[d] = (q[d] + s).clamp(0.0, 1.0);
                let v = f(&q);
                if v < val {
                    val = v;
                    p = q;
                    moved = true;
                }
            }
        }
        if !moved {
            step /= 2.0;
        }
    }
    val
}

/// Slot MSE with the receive coefficient chosen optimally, written out from
/// the definition: minimize over `a` the misalignment plus noise.
fn slot_mse(inst: &TdmInstance, b: &[f64]) -> f64 {
    let (mut num, mut den) = (0.0, inst.noise_var);
    for k in 0..b.len() {
        let c = inst.gains[k] * b[k];
        num += c * inst.est_vars[k];
        den += c * c * inst.est_vars[k];
    }
    let a = num / den;
    (0..b.len())
        .map(|k| (a * inst.gains[k] * b[k] - 1.0).powi(2) * inst.est_vars[k])
        .sum::<f64>()
        + a * a * inst.noise_var
}

fn slot_md(inst: &TdmInstance, b: &[f64]) -> f64 {
    let s: f64 = (0..b.len()).map(|k| inst.gains[k] * b[k]).sum();
    let d: f64 = (0..b.len()).map(|k| (inst.gains[k] * b[k]).powi(2) * inst.est_vars[k]).sum::<f64>() + inst.noise_var;
    inst.delta * s * s / d
}

fn full(inst: &TdmInstance, k: usize) -> f64 {
    (inst.budgets[k] / inst.moments[k]).sqrt()
}

fn three_devices() -> TdmInstance {
    TdmInstance {
        gains: vec![1.0, 0.6, 0.3],
        budgets: vec![1.0; 3],
        moments: vec![1.0; 3],
        est_vars: vec![1.0; 3],
        noise_var: 0.1,
        delta: 1.0,
    }
}

#[test]
fn tdm_mse_three_devices_against_search() {
    let inst = three_devices();
    let r = tdm_mse_optimal(&inst).unwrap();
    let want = box_search(3, 60, |p| slot_mse(&inst, &[p[0] * full(&inst, 0), p[1] * full(&inst, 1), p[2] * full(&inst, 2)]));
    assert_relative_eq!(r.objective, want, max_relative = 1e-6);
    let b: Vec<f64> = r.design.tx.column(0).to_vec();
    assert_relative_eq!(slot_mse(&inst, &b), r.objective, max_relative = 1e-10);
    // weakest link is never capped
    assert_relative_eq!(b[2], 1.0, max_relative = 1e-9);
}

#[test]
fn identical_links_use_full_power() {
    let inst = TdmInstance { gains: vec![0.8; 3], ..three_devices() };
    let r = tdm_md_optimal(&inst).unwrap();
    // one-dimensional search over the common cap level
    let top = 0.8;
    let mut best = 0.0f64;
    for i in 1..=100_000 {
        let tau = top * i as f64 / 100_000.0;
        best = best.max(slot_md(&inst, &[tau / 0.8; 3]));
    }
    assert_relative_eq!(r.objective, best, max_relative = 1e-8);
    for k in 0..3 {
        assert_relative_eq!(r.design.tx[[k, 0]], 1.0, max_relative = 1e-9);
    }
    let m = tdm_mse_optimal(&inst).unwrap();
    for k in 0..3 {
        assert_relative_eq!(m.design.tx[[k, 0]], 1.0, max_relative = 1e-9);
    }
}

#[test]
fn tdm_md_random_against_search() {
    for seed in 0..20 {
        let f = random_instance(&mut rng_from(derive(3, &[seed])), 3, 1, 10.0, true);
        let inst = f.slot(0);
        let r = tdm_md_optimal(&inst).unwrap();
        let want = -box_search(3, 30, |p| -slot_md(&inst, &[p[0] * full(&inst, 0), p[1] * full(&inst, 1), p[2] * full(&inst, 2)]));
        assert_relative_eq!(r.objective, want, max_relative = 1e-6);
    }
}

#[test]
fn tdm_md_needs_common_estimate_variance() {
    let inst = TdmInstance { est_vars: vec![1.0, 2.0, 1.0], ..three_devices() };
    assert!(tdm_md_optimal(&inst).is_err());
}

#[test]
fn single_subcarrier_fdm_reduces_to_tdm() {
    let opts = SolverOptions::default();
    for seed in 0..30 {
        let f = random_instance(&mut rng_from(derive(4, &[seed])), 3, 1, 5.0, true);
        let slot = f.slot(0);
        let (a, b) = (fdm_mse_dual(&f, &opts).unwrap(), tdm_mse_optimal(&slot).unwrap());
        assert_relative_eq!(a.objective, b.objective, max_relative = 1e-4);
        let (a, b) = (fdm_md_optimal(&f, &opts).unwrap(), tdm_md_optimal(&slot).unwrap());
        assert_relative_eq!(a.objective, b.objective, max_relative = 1e-4);
    }
}

/// Energy split of two devices over two subcarriers: per device, the share
/// of budget used and the fraction placed on the first subcarrier.
fn two_by_two(inst: &FdmInstance, p: &[f64]) -> Array2<f64> {
    Array2::from_shape_fn((2, 2), |(k, n)| {
        let e = p[2 * k] * inst.budgets[k];
        let share = if n == 0 { p[2 * k + 1] } else { 1.0 - p[2 * k + 1] };
        (e * share / inst.moments[[k, n]]).sqrt()
    })
}

fn own_mse(inst: &FdmInstance, tx: &Array2<f64>) -> f64 {
    mse_objective(inst, tx, &optimal_rx(inst, tx))
}

#[test]
fn fdm_two_by_two_against_search() {
    let opts = SolverOptions::default();
    for seed in 0..10 {
        let inst = random_instance(&mut rng_from(derive(5, &[seed])), 2, 2, 10.0, false);
        let r = fdm_mse_dual(&inst, &opts).unwrap();
        let want = box_search(4, 25, |p| own_mse(&inst, &two_by_two(&inst, p)));
        assert_relative_eq!(r.objective, want, max_relative = 1e-5);
        let r = fdm_md_optimal(&inst, &opts).unwrap();
        let want = -box_search(4, 25, |p| -md_objective(&inst, &two_by_two(&inst, p)));
        assert_relative_eq!(r.objective, want, max_relative = 1e-5);
    }
}

#[test]
fn single_device_md_puts_energy_where_it_counts() {
    // one device: received distance on each subcarrier is delta c^2 / (c^2 s + w)
    let inst = FdmInstance {
        gains: array![[1.0, 0.5]],
        budgets: vec![2.0],
        moments: array![[1.0, 1.0]],
        est_vars: array![[1.0, 1.0]],
        noise_var: 0.1,
        delta: vec![1.0, 1.0],
    };
    let r = fdm_md_optimal(&inst, &SolverOptions::default()).unwrap();
    let mut best = 0.0f64;
    for i in 0..=200_000 {
        let e0 = 2.0 * i as f64 / 200_000.0;
        let c0 = e0;
        let c1 = 0.25 * (2.0 - e0);
        best = best.max(c0 / (c0 + 0.1) + c1 / (c1 + 0.1));
    }
    assert_relative_eq!(r.objective, best, max_relative = 1e-7);
    let used: f64 = inst.power_usage(&r.design.tx)[0];
    assert!(used <= 2.0 * (1.0 + 1e-9));
}

#[test]
fn designs_dominate_each_other_and_the_baselines() {
    let opts = SolverOptions::default();
    for seed in 0..100u64 {
        let snr = [0.0, 10.0, 20.0][seed as usize % 3];
        let inst = random_instance(&mut rng_from(derive(6, &[seed])), 4, 3, snr, false);
        let m = fdm_mse_dual(&inst, &opts).unwrap();
        let d = fdm_md_optimal(&inst, &opts).unwrap();
        let tol = 1e-6;
        assert!(m.objective <= own_mse(&inst, &d.design.tx) * (1.0 + tol));
        assert!(d.objective >= md_objective(&inst, &m.design.tx) * (1.0 - tol));
        for base in [baseline_equal(&inst).unwrap(), baseline_channel_inversion(&inst).unwrap()] {
            assert!(m.objective <= own_mse(&inst, &base.tx) * (1.0 + tol));
            assert!(d.objective >= md_objective(&inst, &base.tx) * (1.0 - tol));
        }
        for usage in [inst.power_usage(&m.design.tx), inst.power_usage(&d.design.tx)] {
            for (u, p) in usage.iter().zip(&inst.budgets) {
                assert!(*u <= p * (1.0 + 1e-9));
            }
        }
        assert!(m.kkt_residual <= 1e-6 && d.kkt_residual <= 1e-6);
    }
}

#[test]
fn reference_solver_never_beats_the_exact_ones() {
    for seed in 0..100u64 {
        let inst = random_instance(&mut rng_from(derive(7, &[seed])), 3, 1, 10.0, true);
        let slot = inst.slot(0);
        let o = brute_force_oracle(&inst, OracleObjective::Mse, 21, 40).unwrap();
        let exact = tdm_mse_optimal(&slot).unwrap().objective;
        assert!(o.objective >= exact * (1.0 - 1e-9));
        assert_relative_eq!(o.objective, own_mse(&inst, &o.design.tx), max_relative = 1e-9);
        let o = brute_force_oracle(&inst, OracleObjective::Md, 21, 40).unwrap();
        let exact = tdm_md_optimal(&slot).unwrap().objective;
        assert!(o.objective <= exact * (1.0 + 1e-9));
    }
}
