//! Property tests for kernels, objectives, estimators and accumulators.

use proptest::prelude::*;

use truncvol::estimators;
use truncvol::kernels::{self, CmseObjectiveInput, CmseProblem, FaJumpLaw};
use truncvol::models::PathRecord;
use truncvol::stats::{KahanSum, Welford};
use truncvol::SamplingGrid;

fn sd_strategy() -> impl Strategy<Value = f64> {
    (-3.5f64..-1.0).prop_map(|e| 10f64.powf(e))
}

/// The double loop `Σ_i a_i(ε² + 2Σ_{j≠i} b_j − 2IV)`, with `IV = nσ²h`
/// spread over the inner sum so that `2Σb_j − 2IV` does not cancel.
fn brute_force_f(eps: f64, sigma: f64, jumps: &[f64], h: f64) -> f64 {
    let sd = sigma * h.sqrt();
    let var = sd * sd;
    (0..jumps.len())
        .map(|i| {
            let others: f64 = (0..jumps.len())
                .filter(|&j| j != i)
                .map(|j| kernels::kernel_b(eps, jumps[j], sd) - var)
                .sum();
            kernels::kernel_a(eps, jumps[i], sd) * (eps * eps + 2.0 * others - 2.0 * var)
        })
        .sum()
}

proptest! {
    #[test]
    fn b_derivative_is_eps_squared_a(sd in sd_strategy(), mr in -6.0f64..6.0, er in 0.3f64..4.5) {
        let (m, eps) = (mr * sd, er * sd);
        let d = 1e-3 * sd;
        let b = |e: f64| kernels::kernel_b(e, m, sd);
        let num = (8.0 * (b(eps + d) - b(eps - d)) - (b(eps + 2.0 * d) - b(eps - 2.0 * d))) / (12.0 * d);
        let exact = eps * eps * kernels::kernel_a(eps, m, sd);
        // Differences of b carry roundoff of order ulp(m² + σ²)/d.
        let floor = 1e-12 * (m * m + sd * sd) / sd;
        prop_assert!((num - exact).abs() <= 1e-6 * exact + floor, "num {num:e} exact {exact:e}");
    }

    #[test]
    fn kernels_are_even_in_m(sd in sd_strategy(), mr in 0.0f64..8.0, er in 0.0f64..8.0) {
        let (m, eps) = (mr * sd, er * sd);
        let (a1, a2) = (kernels::kernel_a(eps, m, sd), kernels::kernel_a(eps, -m, sd));
        prop_assert!((a1 - a2).abs() <= 1e-14 * a1.abs().max(a2.abs()));
        // b cancels for small ε; bound by the size of its two terms.
        let (b1, b2) = (kernels::kernel_b(eps, m, sd), kernels::kernel_b(eps, -m, sd));
        let terms = (m * m + sd * sd) * (eps / sd).min(1.0);
        prop_assert!((b1 - b2).abs() <= 1e-14 * (terms + b1.abs()));
    }

    #[test]
    fn b_is_monotone_and_bounded(sd in sd_strategy(), mr in -8.0f64..8.0, e1 in 0.0f64..10.0, e2 in 0.0f64..10.0) {
        let m = mr * sd;
        let (lo, hi) = if e1 <= e2 { (e1 * sd, e2 * sd) } else { (e2 * sd, e1 * sd) };
        let (b_lo, b_hi) = (kernels::kernel_b(lo, m, sd), kernels::kernel_b(hi, m, sd));
        let full = m * m + sd * sd;
        prop_assert!(b_lo <= b_hi * (1.0 + 1e-12) + 1e-300);
        prop_assert!((0.0..=full).contains(&b_lo) && (0.0..=full).contains(&b_hi));
    }

    #[test]
    fn objective_linear_matches_quadratic(
        sigma in 0.05f64..1.0,
        he in -6.0f64..-2.0,
        jumps_r in prop::collection::vec(prop_oneof![3 => Just(0.0), 1 => -8.0f64..8.0], 2..=64),
        er in 0.1f64..6.0,
    ) {
        let h = 10f64.powf(he);
        let sd = sigma * h.sqrt();
        let jumps: Vec<f64> = jumps_r.iter().map(|r| r * sd).collect();
        let grid = SamplingGrid::from_step(h, jumps.len()).unwrap();
        let eps = er * sd;
        let fast = kernels::cmse_objective(&CmseObjectiveInput { eps, sigma, jumps: &jumps, grid }).unwrap();
        let grouped = CmseProblem::new(sigma, &jumps, grid).unwrap().eval(eps);
        let slow = brute_force_f(eps, sigma, &jumps, h);
        // Relative to the magnitude of the summed terms: F itself may sit
        // next to a root, where a plain relative error is unbounded.
        let iv = jumps.len() as f64 * sd * sd;
        let s_b: f64 = jumps.iter().map(|&m| kernels::kernel_b(eps, m, sd)).sum();
        let scale: f64 = jumps
            .iter()
            .map(|&m| kernels::kernel_a(eps, m, sd) * (eps * eps + 2.0 * s_b + 2.0 * iv))
            .sum();
        prop_assert!((fast - slow).abs() <= 1e-12 * scale, "fast {fast:e} slow {slow:e}");
        prop_assert!((grouped - slow).abs() <= 1e-12 * scale, "grouped {grouped:e} slow {slow:e}");
    }

    #[test]
    fn objective_negative_at_zero(
        sigma in 0.05f64..1.0,
        jumps_r in prop::collection::vec(-8.0f64..8.0, 1..=64),
    ) {
        let h: f64 = 1e-4;
        let jumps: Vec<f64> = jumps_r.iter().map(|r| r * sigma * h.sqrt()).collect();
        let grid = SamplingGrid::from_step(h, jumps.len()).unwrap();
        let f0 = kernels::cmse_objective(&CmseObjectiveInput { eps: 0.0, sigma, jumps: &jumps, grid }).unwrap();
        prop_assert!(f0 < 0.0);
    }

    #[test]
    fn expected_b1_increases_with_eps(lambda in 10.0f64..300.0, sj in 0.005f64..0.05, e1 in 0.5f64..8.0, e2 in 0.5f64..8.0) {
        let (sigma, h) = (0.4, 1.0 / 19656.0);
        let law = FaJumpLaw::normal(lambda, 0.0, sj).unwrap();
        let sd = sigma * f64::sqrt(h);
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let g_lo = kernels::expected_b1_merton_excess(lo * sd, sigma, h, &law).unwrap();
        let g_hi = kernels::expected_b1_merton_excess(hi * sd, sigma, h, &law).unwrap();
        prop_assert!(g_lo <= g_hi + 1e-13 * sd * sd);
    }

    #[test]
    fn trv_is_monotone_and_scale_covariant(
        dx in prop::collection::vec(-0.05f64..0.05, 1..200),
        e1 in 0.0f64..0.06,
        e2 in 0.0f64..0.06,
        c in 0.1f64..10.0,
    ) {
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let (t_lo, t_hi) = (estimators::trv(&dx, lo), estimators::trv(&dx, hi));
        prop_assert!(t_lo.iv_hat <= t_hi.iv_hat);
        prop_assert!(t_lo.kept <= t_hi.kept);
        prop_assert!(t_hi.iv_hat <= estimators::rv(&dx) * (1.0 + 1e-12));
        let scaled: Vec<f64> = dx.iter().map(|x| c * x).collect();
        // Kept sets agree unless an increment sits on the threshold after rounding.
        let s = estimators::trv(&scaled, c * hi);
        if s.kept == t_hi.kept {
            prop_assert!((s.iv_hat - c * c * t_hi.iv_hat).abs() <= 1e-12 * c * c * t_hi.iv_hat.max(1e-300));
        }
    }

    #[test]
    fn loss_is_piecewise_constant_between_increments(
        dx in prop::collection::vec(-0.05f64..0.05, 2..100),
        flags in prop::collection::vec(any::<bool>(), 100),
        pick in 0usize..100,
    ) {
        let n = dx.len();
        let dn: Vec<i64> = flags[..n].iter().map(|&f| i64::from(f)).collect();
        let path = PathRecord::from_parts(dx.clone(), vec![0.0; n], dn, vec![1e-6; n], 0).unwrap();
        let mut levels: Vec<f64> = dx.iter().map(|x| x.abs()).collect();
        levels.sort_by(f64::total_cmp);
        let k = pick % (n - 1);
        let (a, b) = (levels[k], levels[k + 1]);
        if a < b {
            let mid = 0.5 * (a + b);
            let at_a = kernels::loss_count(&path, a).unwrap();
            prop_assert_eq!(at_a, kernels::loss_count(&path, mid).unwrap());
        }
    }

    #[test]
    fn welford_matches_two_pass(xs in prop::collection::vec(-1e3f64..1e3, 2..500)) {
        let mut w = Welford::new();
        xs.iter().for_each(|&x| w.push(x));
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        prop_assert!((w.mean() - mean).abs() <= 1e-9 * (1.0 + mean.abs()));
        prop_assert!((w.variance() - var).abs() <= 1e-9 * (1.0 + var));
    }

    #[test]
    fn kahan_is_exact_on_cancelling_sums(xs in prop::collection::vec(-1e6f64..1e6, 1..200)) {
        let s: KahanSum = xs.iter().copied().chain(xs.iter().map(|x| -x)).collect();
        prop_assert_eq!(s.value(), 0.0);
    }
}
