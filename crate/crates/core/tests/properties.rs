mod common;

use std::time::Duration;

use proptest::collection::vec;
use proptest::prelude::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use snn_hdc::decoders::{hdc_decode, latency_decode, rate_decode, Prediction};
use snn_hdc::events::{bin_to_frames, Event, EventStream, Polarity};
use snn_hdc::harness::sweep_delta;
use snn_hdc::hdc::{capacity, BinaryHypervector, ClassCodebook};
use snn_hdc::snn::{
    count_sops, forward, forward_batch, lif_step, Mode, Network, SpikeTrain, THRESHOLD,
};
use snn_hdc::train::{hdc_loss_counts, kfold_split, latency_loss, rate_loss, RateTarget, Sample};

fn bits(n: usize) -> impl Strategy<Value = BinaryHypervector> {
    vec(any::<bool>(), n).prop_map(BinaryHypervector::from_bits)
}

fn spike_train(neurons: usize, steps: usize) -> impl Strategy<Value = SpikeTrain> {
    vec(vec(prop::bool::weighted(0.1), neurons), steps)
        .prop_map(|rows| SpikeTrain::from_dense(&rows).unwrap())
}

fn silent_frames(net: &Network, steps: usize) -> snn_hdc::events::FrameSequence {
    let s = net.input_shape();
    snn_hdc::events::FrameSequence::zeros(steps, s.height, s.width, Duration::from_millis(1))
}

proptest! {
    #[test]
    fn hamming_is_a_metric((a, b, c) in (1usize..300).prop_flat_map(|n| (bits(n), bits(n), bits(n)))) {
        let ab = a.hamming(&b).unwrap();
        prop_assert_eq!(ab, b.hamming(&a).unwrap());
        prop_assert_eq!(a.hamming(&a).unwrap(), 0);
        prop_assert!(ab <= a.hamming(&c).unwrap() + c.hamming(&b).unwrap());
        let n = a.normalized_hamming(&b).unwrap();
        prop_assert!((0.0..=1.0).contains(&n));
        prop_assert_eq!(a.hamming(&a.complement()).unwrap(), a.dims());
    }

    #[test]
    fn membrane_stays_below_threshold(
        (m, d) in (1usize..64).prop_flat_map(|n| (vec(-2.0f64..1.0, n), vec(-3.0f64..3.0, n))),
        beta in 0.0f64..1.0,
    ) {
        let (state, spikes) = lif_step(&m, &d, beta).unwrap();
        for i in 0..m.len() {
            prop_assert!(state[i] < THRESHOLD);
            prop_assert_eq!(spikes[i], beta * m[i] + d[i] >= THRESHOLD);
        }
    }

    #[test]
    fn capacity_is_monotone(d in 200usize..20_000) {
        prop_assert!(capacity(d + 1) >= capacity(d));
    }

    #[test]
    fn evs1_round_trip(
        raw in vec((0u64..200_000, 0u16..32, 0u16..24, any::<bool>()), 0..300),
        label in proptest::option::of(0u32..20),
    ) {
        let events: Vec<Event> = raw
            .iter()
            .map(|&(t, x, y, on)| Event::new(t, x, y, if on { Polarity::On } else { Polarity::Off }))
            .collect();
        let s = EventStream::new(32, 24, events, label).unwrap();
        let back = EventStream::from_bytes(&s.to_bytes()).unwrap();
        prop_assert_eq!(&back, &s);
        let frames = bin_to_frames(&s, Duration::from_millis(1), Duration::from_millis(150)).unwrap();
        let inside = s.events().iter().filter(|e| e.t < 150_000).count() as u64;
        prop_assert_eq!(frames.total(), inside);
    }

    #[test]
    fn rate_decoder_picks_most_spikes(train in spike_train(5, 30)) {
        let out = rate_decode(&train, Duration::from_millis(1)).unwrap();
        let counts = train.counts();
        let best = counts.iter().copied().max().unwrap();
        let first_best = counts.iter().position(|&c| c == best).unwrap();
        prop_assert_eq!(out.prediction, Prediction::Class(first_best));
        prop_assert_eq!(out.per_timestep.len(), 30);
        if let Some(l) = out.latency {
            prop_assert!(l <= Duration::from_millis(30));
        }
    }

    #[test]
    fn latency_decoder_picks_first_spike(train in spike_train(5, 30)) {
        let out = latency_decode(&train, Duration::from_millis(1)).unwrap();
        let first = (0..train.steps()).find_map(|t| train.spikes_at(t).first().map(|&i| (i as usize, t)));
        match first {
            None => prop_assert_eq!(out.prediction, Prediction::Unknown),
            Some((i, t)) => {
                prop_assert_eq!(out.prediction, Prediction::Class(i));
                prop_assert_eq!(out.latency, Some(Duration::from_millis(t as u64 + 1)));
            }
        }
    }

    #[test]
    fn hdc_vector_marks_neurons_that_fired(train in spike_train(24, 20), seed in any::<u64>()) {
        let cb = ClassCodebook::generate(4, 24, seed).unwrap();
        let out = hdc_decode(&train, &cb, None, Duration::from_millis(1)).unwrap();
        let h = out.hypervector.unwrap();
        for (i, c) in train.counts().iter().enumerate() {
            prop_assert_eq!(h.bit(i), *c > 0);
        }
        let d = out.distances.unwrap();
        let best = d.iter().cloned().fold(f64::INFINITY, f64::min);
        let class = out.prediction.class().unwrap();
        prop_assert_eq!(d[class], best);
        prop_assert_eq!(*out.per_timestep.last().unwrap(), out.prediction);
        prop_assert!(out.latency.unwrap() <= Duration::from_millis(20));
    }

    #[test]
    fn losses_are_nonnegative_and_finite(train in spike_train(6, 15), label in 0usize..6) {
        let s = train.to_signal();
        let (r, gr) = rate_loss(&s, label, RateTarget::default()).unwrap();
        let (l, gl) = latency_loss(&s, label).unwrap();
        prop_assert!(r >= 0.0 && (0.0..=1.0).contains(&l));
        prop_assert!(gr.values().iter().chain(gl.values()).all(|g| g.is_finite()));
    }

    #[test]
    fn hdc_loss_ignores_excess_on_target_bits(
        (h, c) in (1usize..50).prop_flat_map(|n| (vec(0.0f64..5.0, n), bits(n))),
    ) {
        let (loss, grad) = hdc_loss_counts(&h, &c).unwrap();
        prop_assert!(loss >= 0.0);
        let mut more = h.clone();
        for (i, v) in more.iter_mut().enumerate() {
            if c.bit(i) && *v > 1.0 {
                *v += 3.0;
            }
        }
        prop_assert_eq!(hdc_loss_counts(&more, &c).unwrap().0, loss);
        for i in 0..h.len() {
            if c.bit(i) && h[i] > 1.0 {
                prop_assert_eq!(grad[i], 0.0);
            }
        }
    }

    #[test]
    fn hdc_loss_grows_with_spikes_on_off_bits(
        (h, c, i) in (1usize..50).prop_flat_map(|n| (vec(0.0f64..5.0, n), bits(n), 0..n)),
    ) {
        prop_assume!(!c.bit(i));
        let mut more = h.clone();
        more[i] += 1.0;
        prop_assert!(hdc_loss_counts(&more, &c).unwrap().0 > hdc_loss_counts(&h, &c).unwrap().0);
    }

    #[test]
    fn losses_vanish_at_perfect_outputs(c in bits(16), label in 0usize..5) {
        let h: Vec<f64> = c.iter().map(|b| if b { 1.0 } else { 0.0 }).collect();
        prop_assert_eq!(hdc_loss_counts(&h, &c).unwrap().0, 0.0);
        // target fires at the first step, others stay silent
        let first = SpikeTrain::from_events(5, 10, &[(0, label)]).unwrap().to_signal();
        prop_assert_eq!(latency_loss(&first, label).unwrap().0, 0.0);
        // target fires on 8 of 10 steps, others on 2
        let mut ev = Vec::new();
        for n in 0..5 {
            let k = if n == label { 8 } else { 2 };
            ev.extend((0..k).map(|t| (t, n)));
        }
        let rates = SpikeTrain::from_events(5, 10, &ev).unwrap().to_signal();
        prop_assert!(rate_loss(&rates, label, RateTarget::default()).unwrap().0 < 1e-30);
    }

    #[test]
    fn losses_are_equivariant_in_non_target_neurons(
        train in spike_train(6, 15),
        label in 0usize..6,
        (a, b) in (0usize..6, 0usize..6),
    ) {
        prop_assume!(a != label && b != label && a != b);
        let s = train.to_signal();
        let mut swapped = s.clone();
        for t in 0..s.steps() {
            swapped.set(t, a, s.get(t, b));
            swapped.set(t, b, s.get(t, a));
        }
        type LossFn = fn(&snn_hdc::snn::Signal, usize) -> snn_hdc::Result<(f64, snn_hdc::snn::Signal)>;
        let losses: [LossFn; 2] = [|s, l| rate_loss(s, l, RateTarget::default()), latency_loss];
        for f in losses {
            let (l0, g0) = f(&s, label).unwrap();
            let (l1, g1) = f(&swapped, label).unwrap();
            prop_assert!((l0 - l1).abs() <= 1e-15);
            for t in 0..s.steps() {
                prop_assert!((g0.get(t, a) - g1.get(t, b)).abs() <= 1e-15);
                prop_assert!((g0.get(t, label) - g1.get(t, label)).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn kfold_partitions_groups(seed in any::<u64>(), per_signer in vec(1usize..6, 59)) {
        let groups: Vec<u32> = per_signer
            .iter()
            .enumerate()
            .flat_map(|(g, &n)| std::iter::repeat_n(g as u32, n))
            .collect();
        let folds = kfold_split(&groups, 4, seed).unwrap();
        prop_assert_eq!(folds.len(), 4);
        let sizes: Vec<usize> = folds.iter().map(|f| f.test_groups.len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let mut seen = vec![0; groups.len()];
        for f in &folds {
            prop_assert_eq!(f.train.len() + f.test.len(), groups.len());
            for &i in &f.test {
                seen[i] += 1;
                prop_assert!(f.test_groups.contains(&groups[i]));
            }
            for &i in &f.train {
                prop_assert!(!f.test_groups.contains(&groups[i]));
            }
        }
        prop_assert!(seen.iter().all(|&n| n == 1));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sop_count_matches_brute_force_and_doubles(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = common::random_net(&mut rng);
        let trace = common::random_trace(&net, 5, &mut rng);
        let sops = count_sops(&trace, &net).unwrap();
        prop_assert_eq!(&sops, &common::brute_force_sops(&net, &trace));
        let doubled = count_sops(&trace.repeated(), &net).unwrap();
        prop_assert_eq!(doubled, sops.iter().map(|s| 2 * s).collect::<Vec<_>>());
    }

    #[test]
    fn quiescent_without_input(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = common::random_net(&mut rng);
        let trace = forward(&net, &silent_frames(&net, 12), Mode::Eval).unwrap();
        prop_assert_eq!(trace.total_spikes(), 0);
        prop_assert_eq!(trace.total_sops(), 0);
    }

    #[test]
    fn spikes_take_one_step_per_layer(seed in any::<u64>(), onset in 0usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = common::random_net(&mut rng);
        let mut frames = silent_frames(&net, 16).counts().to_vec();
        let len = frames.len() / 16;
        let late = common::random_frames(&mut rng, 16 - onset, net.input_shape().height, 0.5);
        frames[onset * len..].copy_from_slice(late.counts());
        let frames = snn_hdc::events::FrameSequence::from_counts(
            16, net.input_shape().height, net.input_shape().width, Duration::from_millis(1), frames,
        ).unwrap();
        let trace = forward(&net, &frames, Mode::Eval).unwrap();
        let layers = trace.layers.len();
        for (l, train) in trace.layers.iter().enumerate() {
            if let Some(t) = train.first_spikes().iter().flatten().min() {
                prop_assert!(*t > onset + l, "layer {} fired at {} for input from {}", l, t, onset);
            }
        }
        if let Some(t) = trace.output().first_spikes().iter().flatten().min() {
            prop_assert!(*t >= onset + layers - 1);
        }
    }

    #[test]
    fn eval_forward_is_deterministic(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = common::random_net(&mut rng);
        let side = net.input_shape().height;
        let a = common::random_frames(&mut rng, 10, side, 0.4);
        let b = common::random_frames(&mut rng, 10, side, 0.4);
        let first = forward(&net, &a, Mode::Eval).unwrap();
        prop_assert_eq!(&first, &forward(&net, &a, Mode::Eval).unwrap());
        let batch = forward_batch(&net, &[&a, &b], Mode::Eval).unwrap();
        prop_assert_eq!(&batch[0], &first);
        prop_assert_eq!(&batch[1], &forward(&net, &b, Mode::Eval).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn rejection_is_monotone_in_delta(seed in any::<u64>()) {
        let net = common::toy("4c3-2p-24", 8, seed);
        let cb = ClassCodebook::generate(3, 24, seed ^ 1).unwrap().subset(&[0, 2]).unwrap();
        let samples: Vec<Sample> = (0..9)
            .map(|i| common::random_sample(seed.wrapping_add(i), 12, 8, i as usize % 3))
            .collect();
        let deltas = [0.01, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.5];
        let rows = sweep_delta(&net, &cb, &[0, 2], &samples, &deltas).unwrap();
        for w in rows.windows(2) {
            prop_assert!(w[1].unknown_accuracy <= w[0].unknown_accuracy);
            prop_assert!(w[1].known_accuracy >= w[0].known_accuracy);
        }
        prop_assert_eq!(rows[0].unknown_samples, 3);
    }
}
