//! Property tests for the model invariants.

mod common;

use common::*;
use hetnet_mse::channel::{
    apply_csi_error, assign_users, build_topology, large_scale_map, Geometry, PowerConfig, SystemDims,
};
use hetnet_mse::container::{channel_from_json, channel_to_json, precoders_from_json, precoders_to_json};
use hetnet_mse::linalg::{fro2, C64};
use hetnet_mse::montecarlo::{empirical_mse, estimate_ber, gen_qpsk, simulate_link, Scenario};
use hetnet_mse::robust::RobustContext;
use hetnet_mse::separate_mse::{solve_lp, LpProblem};
use hetnet_mse::sum_mse::{
    chi, eval_sum_mse, initial_iterate, initial_precoders, normalize_precoders, MultiplierProblem, PrecoderSet,
    ReceiverSet,
};
use proptest::prelude::*;

fn multiplier_problem() -> impl Strategy<Value = MultiplierProblem> {
    (1usize..8)
        .prop_flat_map(|n| (prop::collection::vec(0.0f64..10.0, n), prop::collection::vec(1e-3f64..10.0, n), 0.0f64..1.0))
        .prop_map(|(d, a, off)| MultiplierProblem::from_parts(d, a, off).unwrap())
}

fn dims() -> impl Strategy<Value = SystemDims> {
    (1usize..=3, 1usize..=2, 0usize..=2, 1usize..=2).prop_flat_map(|(n_ue, n_s, s_cells, k)| {
        let n_s = n_s.min(n_ue);
        prop::collection::vec(1usize..=2, s_cells).prop_map(move |l_sue| {
            let max_l = l_sue.iter().copied().max().unwrap_or(1);
            SystemDims {
                n_bs: (k + l_sue.iter().sum::<usize>()) * n_ue + 1,
                n_sc: (k + max_l + s_cells * 2) * n_ue + 1,
                n_ue,
                n_s,
                k_mue: k,
                s_cells,
                l_sue,
            }
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chi_is_strictly_decreasing(p in multiplier_problem(), l1 in 0.0f64..5.0, dl in 1e-6f64..5.0) {
        prop_assert!(chi(&p, l1).unwrap() > chi(&p, l1 + dl).unwrap());
    }

    #[test]
    fn upper_bracket_is_valid(p in multiplier_problem()) {
        let hi = p.a.iter().sum::<f64>().sqrt();
        prop_assert!(chi(&p, hi).unwrap() <= 0.0);
    }

    #[test]
    fn normalization_is_idempotent_and_scale_invariant(d in dims(), seed in any::<u64>(), scale in 1e-3f64..1e3) {
        let w = initial_precoders(&d, seed);
        let n = normalize_precoders(&w).unwrap();
        for tx in d.transmitters() {
            prop_assert!((n.power(tx) - 1.0).abs() < 1e-12);
        }
        let nn = normalize_precoders(&n).unwrap();
        let mut scaled = w.clone();
        for tx in d.transmitters() {
            *scaled.block_mut(tx) *= C64::new(scale, 0.0);
        }
        let ns = normalize_precoders(&scaled).unwrap();
        for tx in d.transmitters() {
            prop_assert!(fro2(&(nn.block(tx) - n.block(tx))) < 1e-24);
            prop_assert!(fro2(&(ns.block(tx) - n.block(tx))) < 1e-24);
        }
        let ctx = RobustContext::new(&n, &ReceiverSet::zeros(&d), 1.0);
        prop_assert!((ctx.omega_bar - (d.s_cells as f64 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn breakdown_is_consistent(seed in 0u64..1000) {
        let real = instance(&small_scenario(), seed);
        let g = real.gains();
        let it = initial_iterate(g, real.sigma0_sq, seed).unwrap();
        let b = eval_sum_mse(g, &it.w, &it.r, real.sigma0_sq).unwrap();
        prop_assert!((b.total - b.mse_bs - b.mse_sc).abs() <= 1e-12 * b.total);
        prop_assert!(b.per_user.iter().all(|&v| v >= 0.0));
        let zero = eval_sum_mse(g, &PrecoderSet::zeros(&g.dims), &ReceiverSet::zeros(&g.dims), real.sigma0_sq).unwrap();
        prop_assert_eq!(zero.total, (g.dims.total_users() * g.dims.n_s) as f64);
    }

    #[test]
    fn containers_round_trip_bit_exactly(seed in 0u64..1000) {
        let real = instance(&small_scenario(), seed);
        let back = channel_from_json(&channel_to_json(&real.channels).unwrap()).unwrap();
        prop_assert_eq!(&back, &real.channels);
        let w = initial_precoders(real.dims(), seed);
        prop_assert_eq!(precoders_from_json(&precoders_to_json(&w).unwrap()).unwrap(), w);
    }

    #[test]
    fn effective_gains_scale_by_exact_power(seed in 0u64..1000) {
        let sc = small_scenario();
        let real = instance(&sc, seed);
        let (h, g) = (&real.channels.h, real.gains());
        let p = PowerConfig::default();
        for (tx, pw) in [(hetnet_mse::channel::Tx::Bs, p.p_bs_w()), (hetnet_mse::channel::Tx::Sc(0), p.p_sc_w())] {
            let (hd, gd) = (h.direct(tx), g.direct(tx));
            prop_assert_eq!(hd.shape(), gd.shape());
            for (a, b) in hd.iter().zip(gd.iter()) {
                prop_assert_eq!(*b, *a * pw.sqrt());
            }
        }
    }

    #[test]
    fn exact_csi_is_the_identity(seed in 0u64..1000) {
        let real = instance(&small_scenario(), seed);
        let csi = apply_csi_error(real.gains(), 0.0, real.sigma0_sq, seed).unwrap();
        prop_assert_eq!(&csi.g_hat, real.gains());
    }

    #[test]
    fn association_partitions_the_users(seed in any::<u64>()) {
        let dims = SystemDims::desk();
        let topo = build_topology(&dims, &Geometry::default(), seed).unwrap();
        let ls = large_scale_map(&topo).unwrap();
        let a = assign_users(&topo, &ls, &PowerConfig::default(), &dims);
        let mut all: Vec<usize> = a.mue.iter().chain(a.sue.iter().flatten()).chain(a.dropped.iter()).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..dims.total_users()).collect::<Vec<_>>());
        prop_assert!(a.mue.len() <= dims.n_bs);
        prop_assert!(a.sue.iter().all(|s| !s.is_empty() && s.len() <= dims.n_sc));
    }

    #[test]
    fn lp_solutions_are_feasible(
        (c, x) in (1usize..=6).prop_flat_map(|n| (prop::collection::vec(-5.0f64..=0.0, n), prop::collection::vec(0.0f64..3.0, n))),
        gamma in 1e-3f64..3.0,
        alpha in 1e-3f64..3.0,
    ) {
        let lp = LpProblem::new(c.clone(), x.clone(), gamma, alpha).unwrap();
        let l = solve_lp(&lp);
        prop_assert!(l.iter().all(|&v| v >= 0.0));
        prop_assert!(l.iter().sum::<f64>() <= gamma * (1.0 + 1e-9));
        prop_assert!(l.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() <= alpha * (1.0 + 1e-9));
        prop_assert!((lp.objective(&l) - lp_vertex_oracle(&c, &x, gamma, alpha)).abs() <= 1e-9);
    }

    #[test]
    fn link_statistics_are_in_range(seed in 0u64..200) {
        let sc = Scenario { dims: small_dims(), ..Scenario::default() };
        let real = instance(&sc, seed);
        let g = real.gains();
        let it = initial_iterate(g, real.sigma0_sq, seed).unwrap();
        let block = gen_qpsk(g.dims.total_streams(), 200, seed);
        let xhat = simulate_link(g, &it.w, &it.r, real.sigma0_sq, &block.symbols, seed).unwrap();
        let users: Vec<_> = g.dims.users().collect();
        let ber = estimate_ber(&xhat, &users, &block);
        for b in [ber.mue(), ber.sue(), ber.overall()] {
            prop_assert!((0.0..=1.0).contains(&b));
        }
        let st = empirical_mse(&xhat, &block.symbols);
        prop_assert!(st.total >= 0.0 && st.per_user.iter().all(|&v| v >= 0.0));
    }
}
