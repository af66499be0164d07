//! Large randomized dominance sweep, beyond the committed acceptance sizes.
//!
//! ```sh
//! cargo run --release -p cetool-core --example sweep -- 2000
//! ```
//!
//! Runs `N` seeded instances under all five estimator/abstraction variants,
//! both moduli kinds, and both Lipschitz modes, and reports the worst slack
//! seen. Any bound violation aborts with the offending history.

use cetool_core::bounds::{
    sufficiency_residuals, verify_bound, LipMode, ModuliKind, VerifyOptions,
};
use cetool_core::scenarios::random_instance;
use rayon::prelude::*;

fn main() {
    let n: usize = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(500);
    let sizes = |i: usize| match i % 6 {
        0 => (3, 3, 2, 3),
        1 => (4, 4, 3, 3),
        2 => (4, 4, 2, 4),
        3 => (2, 4, 3, 4),
        4 => (4, 2, 3, 4),
        _ => (3, 4, 2, 4),
    };
    let worst = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut local: f64 = f64::INFINITY;
            for variant in 0..5 {
                let sc = random_instance(50_000 + i as u64, sizes(i), variant).unwrap();
                for moduli in [ModuliKind::Linear, ModuliKind::Envelope] {
                    for lip_mode in [LipMode::Exact, LipMode::Recursive] {
                        let out = verify_bound(
                            &sc.pomdp,
                            &sc.abstraction,
                            &sc.estimator,
                            VerifyOptions {
                                moduli,
                                lip_mode,
                                ..Default::default()
                            },
                        )
                        .unwrap_or_else(|e| panic!("{}: {e}", sc.label));
                        local = local.min(out.report.worst_slack.unwrap());
                    }
                }
                sufficiency_residuals(
                    &sc.pomdp,
                    &sc.abstraction,
                    &sc.estimator,
                    ModuliKind::Envelope,
                    cetool_core::DEFAULT_BUDGET,
                )
                .unwrap_or_else(|e| panic!("{}: {e}", sc.label));
            }
            local
        })
        .reduce(|| f64::INFINITY, f64::min);
    println!("{n} instances x 5 variants x 4 option combos: worst slack {worst:.6e}");
    assert!(worst >= -1e-9);
}
