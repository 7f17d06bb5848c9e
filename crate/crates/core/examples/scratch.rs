// Temporary probe: revised slice policy.
use std::time::Instant;

use cellcheck_core::baseline::monte_carlo;
use cellcheck_core::checker::{check_layered, CheckConfig};
use cellcheck_core::dynamics::VcasSliceModel;
use cellcheck_core::Network;

fn main() {
    let net = Network::from_file("/tmp/vcas_slice_v3.nnt").unwrap();
    let model = VcasSliceModel::new(-90.0);

    let mut worst = 0.0f64;
    for h in [3000.0, 3400.0, 3600.0, 3800.0, 4200.0] {
        for v0 in [-60.0, 0.0, 60.0] {
            let est = monte_carlo(&[&net], &model, 0, &[h, v0, 40.0], 2000, 50, 9).unwrap();
            worst = worst.max(est.estimate);
        }
    }
    println!("mc worst at tau=40: {worst:.4}");

    for (min_h, min_v) in [(125.0, 12.5), (62.5, 6.25), (31.25, 3.125)] {
        let t0 = Instant::now();
        let config = CheckConfig::new(vec![min_h, min_v, 1.0]).with_transition_threshold(0.005);
        let field = check_layered(&[&net], &model, &config).unwrap();
        let curve = field.tau_curve.as_ref().unwrap();
        let leaves: usize = field.trees.iter().map(|t| t.num_leaves()).sum();
        println!(
            "min=({min_h},{min_v}): tau39={:.4} tau30={:.4} tau20={:.4} tau10={:.4} tau5={:.4} leaves={leaves} ({:?})",
            curve[39].1, curve[30].1, curve[20].1, curve[10].1, curve[5].1, t0.elapsed()
        );
    }
}
