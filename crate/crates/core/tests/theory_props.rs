use proptest::prelude::*;

use seedrank_core::sbm::SbmParams;
use seedrank_core::theory::{
    psi_c_block, psi_two_block, solve_aggregate, solve_c_block, solve_two_block_closed, solve_two_block_iterative,
    EigenSolution,
};

fn close(x: f64, y: f64, tol: f64) -> bool {
    (x - y).abs() <= tol * x.abs().max(y.abs()).max(1e-300)
}

fn identical_blocks(c: usize, m: usize, p_in: f64, p_out: f64) -> SbmParams {
    SbmParams {
        n: c * m,
        pi: vec![1.0 / c as f64; c],
        p: (0..c).map(|i| (0..c).map(|j| if i == j { p_in } else { p_out }).collect()).collect(),
        directed: false,
        self_loops: false,
    }
}

proptest! {
    #[test]
    fn closed_and_iterative_agree(p_in in 1e-4..1.0f64, p_out in 1e-4..1.0f64, half in 1.0..1e5f64, k in 1usize..40) {
        let it = solve_two_block_iterative(p_in, p_out, half, k).unwrap();
        let cf = solve_two_block_closed(p_in, p_out, half, k).unwrap();
        for j in 0..=k {
            prop_assert!(close(it.a[j], cf.a[j], 1e-10));
            prop_assert!(close(it.b[j], cf.b[j], 1e-10));
            prop_assert!((it.log_scale[j] - cf.log_scale[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn psi_is_a_power_of_alpha(p_in in 1e-3..1.0f64, p_out in 1e-3..1.0f64, half in 1.0..1e4f64) {
        let sol = psi_two_block(p_in, p_out, half, 12).unwrap();
        let alpha = sol.alpha_star.unwrap();
        for (k, psi) in sol.psi.iter().enumerate() {
            prop_assert!((half * psi - alpha.powi(k as i32 + 1)).abs() < 1e-12);
        }
    }

    #[test]
    fn eigen_reconstruction(d11 in 0.0..50.0f64, d12 in 0.01..50.0f64, d21 in 0.01..50.0f64, d22 in 0.0..50.0f64) {
        let d = [[d11, d12], [d21, d22]];
        let e = EigenSolution::new(d).unwrap();
        let m = e.reconstruct();
        for i in 0..2 {
            for j in 0..2 {
                prop_assert!((m[i][j] - d[i][j]).abs() < 1e-9 * (1.0 + d[i][j].abs()));
            }
        }
        prop_assert!(e.lambda1 <= e.lambda2);
    }

    #[test]
    fn aggregate_matches_direct_iteration(
        d11 in 0.01..20.0f64, d12 in 0.01..20.0f64, d21 in 0.01..20.0f64, d22 in 0.01..20.0f64,
        f0 in 0.0..1.0f64,
    ) {
        let d = [[d11, d12], [d21, d22]];
        let agg = solve_aggregate(d, f0, 1.0 - f0, 10).unwrap();
        let (mut f, mut g) = (f0, 1.0 - f0);
        for k in 1..=10 {
            let (nf, ng) = (d11 * f + d12 * g, d21 * f + d22 * g);
            f = nf;
            g = ng;
            let (fa, ga) = agg.at_scale(k, 0.0);
            prop_assert!(close(f, fa, 1e-9), "k={k} {f} {fa}");
            prop_assert!(close(g, ga, 1e-9), "k={k} {g} {ga}");
        }
    }

    #[test]
    fn identical_blocks_give_alpha_powers(c in 2usize..6, m in 2usize..50, p_in in 0.01..1.0f64, p_out in 0.01..1.0f64) {
        let params = identical_blocks(c, m, p_in, p_out);
        let sol = psi_c_block(&solve_c_block(&params, 0, 8).unwrap(), &[0]).unwrap();
        let alpha = sol.alpha_star.unwrap();
        prop_assert!(sol.homogeneity_violation < 1e-9);
        for (k, psi) in sol.psi.iter().enumerate() {
            prop_assert!((m as f64 * psi - alpha.powi(k as i32 + 1)).abs() < 1e-10);
        }
    }
}

#[test]
fn two_block_model_through_the_c_block_path() {
    let params = identical_blocks(2, 64, 0.3125, 0.1875);
    let via_c = psi_c_block(&solve_c_block(&params, 0, 10).unwrap(), &[0]).unwrap();
    let direct = psi_two_block(0.3125, 0.1875, 64.0, 10).unwrap();
    for k in 0..10 {
        assert!(close(via_c.psi[k], direct.psi[k], 1e-12));
        assert!(close(via_c.centroid_a[k], direct.centroid_a[k], 1e-12));
    }
    assert!((via_c.alpha_star.unwrap() - 0.25).abs() < 1e-15);
}

#[test]
fn huge_scales_stay_finite() {
    let rec = solve_two_block_closed(0.9, 0.8, 1e9, 200).unwrap();
    assert!(rec.a.iter().chain(&rec.b).all(|x| x.is_finite()));
    assert!(rec.raw(200).0.is_infinite());
}
