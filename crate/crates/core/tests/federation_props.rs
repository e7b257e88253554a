//! Protocol invariants of the distributed trainer: ring coverage, swap
//! conservation, privacy of device data and exact schedule arithmetic.

use std::collections::{BTreeSet, HashSet};

use dgids_core::federation::{
    build_ring, event_count, train_distributed, EventKind, FederationConfig, FederationState, Participant,
    PayloadKind, Schedule,
};
use dgids_core::gan::GanConfig;
use ndarray::Array2;
use proptest::prelude::*;

fn config(epochs: usize, t: usize, e: usize) -> FederationConfig {
    FederationConfig {
        gan: GanConfig {
            latent_dim: 2,
            generator_hidden: vec![3],
            discriminator_hidden: vec![3],
            batch_size: 4,
            epochs,
            ..GanConfig::default()
        },
        exchange_period: t,
        swap_period: e,
    }
}

fn shards(n: usize, rows: usize) -> Vec<Array2<f64>> {
    (0..n)
        .map(|i| Array2::from_shape_fn((rows, 2), |(r, c)| i as f64 - 0.1 * r as f64 + 0.05 * c as f64))
        .collect()
}

fn param_bits(state: &FederationState, i: usize) -> Vec<u64> {
    state.discriminator(i).params().flatten().iter().map(|v| v.to_bits()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ring_is_one_cycle(n in 2usize..40, seed in any::<u64>()) {
        let ids: Vec<u32> = (0..n as u32).map(|i| 7 * i + 3).collect();
        let ring = build_ring(&ids, seed).unwrap();
        prop_assert!(ring.is_single_cycle());
        let order = ring.cycle_order();
        prop_assert_eq!(order.len(), n);
        prop_assert_eq!(order.iter().collect::<BTreeSet<_>>().len(), n);
        for i in 0..n {
            let mut j = i;
            for _ in 0..n {
                j = ring.successor(j);
            }
            prop_assert_eq!(j, i);
            prop_assert_eq!(ring.predecessor(ring.successor(i)), i);
        }
        prop_assert_eq!(build_ring(&ids, seed).unwrap(), ring);
    }

    #[test]
    fn every_discriminator_visits_every_device(n in 2usize..9, seed in any::<u64>()) {
        let mut state = FederationState::new(shards(n, 6), &config(1, 1, 1), seed).unwrap();
        let mut visited: Vec<HashSet<usize>> = (0..n).map(|i| HashSet::from([i])).collect();
        for _ in 0..n {
            state.swap_weights();
            for (device, origin) in state.resident_origins().into_iter().enumerate() {
                visited[origin].insert(device);
            }
        }
        prop_assert!(visited.iter().all(|v| v.len() == n));
        prop_assert_eq!(state.resident_origins(), (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn swaps_conserve_the_weight_multiset(n in 2usize..7, seed in any::<u64>(), swaps in 1usize..5) {
        let mut state = FederationState::new(shards(n, 6), &config(4, 1, 100), seed).unwrap();
        for _ in 0..4 {
            state.advance().unwrap();
        }
        let mut before: Vec<Vec<u64>> = (0..n).map(|i| param_bits(&state, i)).collect();
        let data_before: Vec<Array2<f64>> = (0..n).map(|i| state.device_data(i).to_owned()).collect();
        for _ in 0..swaps {
            state.swap_weights();
        }
        let mut after: Vec<Vec<u64>> = (0..n).map(|i| param_bits(&state, i)).collect();
        // each resident moved exactly `swaps` steps along the ring
        for (device, origin) in state.resident_origins().into_iter().enumerate() {
            let mut j = origin;
            for _ in 0..swaps {
                j = state.ring().successor(j);
            }
            prop_assert_eq!(j, device);
        }
        for i in 0..n {
            prop_assert_eq!(state.device_data(i), data_before[i].view());
        }
        before.sort();
        after.sort();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn schedule_and_privacy(
        n in 2usize..5,
        epochs in 1usize..25,
        t in 1usize..6,
        e in 1usize..12,
        seed in any::<u64>(),
    ) {
        let data = shards(n, 5);
        let cfg = config(epochs, t, e);
        let (state, trace) = train_distributed(data.clone(), None, &cfg, seed).unwrap();
        let log = state.message_log();
        let exchanges = epochs / t;
        let swaps = epochs / e;
        prop_assert_eq!(event_count(log, EventKind::Exchange), exchanges);
        prop_assert_eq!(event_count(log, EventKind::GenUpdate), exchanges);
        prop_assert_eq!(event_count(log, EventKind::Swap), swaps);
        prop_assert_eq!(log.len(), exchanges * (2 * n + 1) + swaps * n);
        prop_assert_eq!(trace.len(), exchanges);
        let schedule = Schedule::new(t, e, epochs).unwrap();
        prop_assert_eq!(schedule.exchange_count(), exchanges);
        prop_assert_eq!(schedule.swap_count(), swaps);
        for m in log {
            prop_assert!(m.payload != PayloadKind::RawData);
            prop_assert!(m.epoch >= 1 && m.epoch <= epochs);
            if let (Participant::Device(_), Participant::Device(_)) = (m.sender, m.receiver) {
                prop_assert_eq!(m.payload, PayloadKind::DiscriminatorWeights);
                prop_assert_eq!(m.event, EventKind::Swap);
            }
            match m.event {
                EventKind::Exchange => prop_assert_eq!(m.epoch % t, 0),
                EventKind::Swap => prop_assert_eq!(m.epoch % e, 0),
                EventKind::GenUpdate => prop_assert_eq!(m.sender, Participant::Center),
            }
        }
        for (i, original) in data.iter().enumerate() {
            prop_assert_eq!(state.device_data(i), original.view());
        }
    }
}

#[test]
fn four_devices_forty_epochs_swap_four_times() {
    let (state, _) = train_distributed(shards(4, 8), None, &config(40, 1, 10), 3).unwrap();
    assert_eq!(event_count(state.message_log(), EventKind::Swap), 4);
    let swap_messages = state.message_log().iter().filter(|m| m.event == EventKind::Swap).count();
    assert_eq!(swap_messages, 16);
}

#[test]
fn runs_are_reproducible_and_extraction_is_exact() {
    let cfg = config(15, 2, 5);
    let (a, ta) = train_distributed(shards(3, 7), None, &cfg, 11).unwrap();
    let (b, tb) = train_distributed(shards(3, 7), None, &cfg, 11).unwrap();
    assert_eq!(ta, tb);
    assert_eq!(a.message_log(), b.message_log());
    let before = a.message_log().len();
    let extracted = a.extract_discriminators();
    assert_eq!(extracted.len(), 3);
    for (i, d) in extracted.iter().enumerate() {
        assert_eq!(d.params(), a.discriminator(i).params());
        assert_eq!(d.params(), b.discriminator(i).params());
    }
    assert_eq!(a.message_log().len(), before);
    assert_eq!(a.center().params(), b.center().params());
}
