mod common;

use snn_hdc::decoders::DecoderKind;
use snn_hdc::hdc::ClassCodebook;
use snn_hdc::train::{gradient_step_sweep, soft_gradient_check, Objective, DEFAULT_STEP};

#[test]
fn conv_net_all_losses() {
    let cb = ClassCodebook::generate(3, 16, 5).unwrap();
    for seed in 0..3 {
        let sample = common::random_sample(100 + seed, 12, 6, (seed % 3) as usize);
        for (notation, obj) in [
            (
                "2c3-bn-2p-0.2d-3",
                Objective::new(DecoderKind::Rate, None).unwrap(),
            ),
            ("2c3-bn-2p-0.2d-3", Objective::Latency),
            ("2c3-bn-2p-0.2d-16", Objective::Hdc(&cb)),
        ] {
            let net = common::toy(notation, 6, seed);
            let check = soft_gradient_check(&net, &obj, &sample, DEFAULT_STEP).unwrap();
            assert!(
                check.max_relative_error <= 1e-4,
                "seed {seed} {:?}: max relative error {:.3e} at {}",
                obj.kind(),
                check.max_relative_error,
                check.worst_index
            );
        }
    }
}

#[test]
fn dense_only_net() {
    let sample = common::random_sample(3, 15, 4, 0);
    let net = common::toy("6-5-2", 4, 9);
    let check = soft_gradient_check(&net, &Objective::Latency, &sample, DEFAULT_STEP).unwrap();
    assert!(
        check.max_relative_error <= 1e-4,
        "{:.3e}",
        check.max_relative_error
    );
}

/// Central differences are second order: the discrepancy shrinks with the
/// step until rounding takes over.
#[test]
fn error_shrinks_with_step() {
    let sample = common::random_sample(7, 10, 6, 1);
    let net = common::toy("2c3-2p-3", 6, 2);
    let sweep = gradient_step_sweep(
        &net,
        &Objective::Latency,
        &sample,
        &[1e-5, 1e-4, 1e-3, 1e-2],
    )
    .unwrap();
    for w in sweep.windows(2) {
        assert!(w[0].1 < w[1].1, "{sweep:?}");
    }
}
