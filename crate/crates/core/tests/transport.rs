use std::time::Duration;

use flisr::protocol::{PointMessage, PointValue};
use flisr::transport::{
    sample, status_topic, ClockMode, Envelope, MessageBus, NetworkProfile, ProfileName,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn schedule(seed: u64, mode: ClockMode, topics: &[u32], profile: &NetworkProfile) -> Vec<(String, u64, Duration)> {
    let mut bus = MessageBus::new(seed, mode);
    let sub = bus.subscribe("#").unwrap();
    for (i, &t) in topics.iter().enumerate() {
        bus.publish(&status_topic(t), PointMessage::new(t, i as u32, PointValue::On), profile)
            .unwrap();
    }
    bus.run_until_idle();
    sub.drain()
        .into_iter()
        .map(|e: Envelope| (e.topic, e.seq, e.deliver_time))
        .collect()
}

#[test]
fn large_sample_mean_matches_configured_round_trip() {
    let profile = NetworkProfile::calibrated(ProfileName::FiveG);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 100_000;
    let total: f64 = (0..n).map(|_| sample(&profile, &mut rng).as_secs_f64() * 1000.0).sum();
    let round_trip = 2.0 * total / n as f64;
    assert!((round_trip - 212.8).abs() <= 0.02 * 212.8, "{round_trip}");
}

#[test]
fn calibration_constants() {
    let means: Vec<f64> = ProfileName::CELLULAR.iter().map(|p| p.calibrated_round_trip_ms()).collect();
    assert_eq!(means, vec![212.8, 260.4, 267.1, 1049.6]);
    assert!(NetworkProfile::local().mean_round_trip_ms <= 2.0);
}

#[test]
fn simulated_and_wall_clock_orders_agree() {
    let profile = NetworkProfile::local().with_jitter(0.9);
    let topics = [1, 2, 3, 1, 2, 3, 1, 4, 4, 2];
    let sim = schedule(11, ClockMode::Simulated, &topics, &profile);
    let wall = schedule(11, ClockMode::RealTime, &topics, &profile);
    assert_eq!(sim, wall);
}

#[test]
fn wildcard_delivery_in_time_order() {
    let mut bus = MessageBus::simulated(3);
    let sub = bus.subscribe("asdu/+/status").unwrap();
    let p = NetworkProfile::calibrated(ProfileName::ThreeG);
    for a in [10, 20, 30] {
        bus.publish(&status_topic(a), PointMessage::new(a, 2, PointValue::On), &p).unwrap();
    }
    bus.run_until_idle();
    let got = sub.drain();
    assert_eq!(got.len(), 3);
    assert!(got.windows(2).all(|w| w[0].deliver_time <= w[1].deliver_time));
}

proptest! {
    #[test]
    fn same_seed_same_schedule(seed in any::<u64>(), topics in prop::collection::vec(1..6u32, 0..40)) {
        let p = NetworkProfile::calibrated(ProfileName::TwoG);
        prop_assert_eq!(
            schedule(seed, ClockMode::Simulated, &topics, &p),
            schedule(seed, ClockMode::Simulated, &topics, &p)
        );
    }

    #[test]
    fn per_topic_fifo_under_heavy_jitter(seed in any::<u64>(), topics in prop::collection::vec(1..4u32, 1..60)) {
        let p = NetworkProfile::calibrated(ProfileName::FourGLte).with_jitter(1.0);
        let delivered = schedule(seed, ClockMode::Simulated, &topics, &p);
        prop_assert_eq!(delivered.len(), topics.len());
        for t in 1..4u32 {
            let seqs: Vec<u64> = delivered.iter().filter(|d| d.0 == status_topic(t)).map(|d| d.1).collect();
            prop_assert!(seqs.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn delays_never_negative(seed in any::<u64>(), mean in 0.1f64..2000.0, jitter in 0.0f64..3.0) {
        let p = NetworkProfile::calibrated(ProfileName::FiveG).with_mean(mean).with_jitter(jitter);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let d = sample(&p, &mut rng);
            prop_assert!(d.as_secs_f64() * 1000.0 <= mean / 2.0 * (1.0 + jitter) + 1e-9);
        }
    }
}
