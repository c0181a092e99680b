//! Simulated publish/subscribe fabric.
//!
//! [`MessageBus`] is a single-threaded scheduler. Every published envelope is
//! given a delivery time drawn from a [`NetworkProfile`] and delivered in
//! time order to the subscriptions whose topic pattern matches. Delivery
//! times never cross within one topic, so per-topic order equals publish
//! order.
//!
//! The bus runs on a virtual clock by default. In [`ClockMode::RealTime`] the
//! schedule is identical but [`MessageBus::step`] sleeps until each
//! delivery is due.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::mpsc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::PointMessage;

/// Default symmetric jitter as a fraction of the one-way mean.
pub const DEFAULT_JITTER_FRACTION: f64 = 0.1;

/// Upper bound on the mean round trip of the local profile, in ms.
pub const LOCAL_MAX_ROUND_TRIP_MS: f64 = 2.0;

#[derive(Debug, Error, PartialEq)]
pub enum TransportError {
    #[error("bus is closed")]
    BusClosed,
    #[error("invalid network profile: {0}")]
    InvalidProfile(String),
    #[error("unknown network profile {0:?}")]
    UnknownProfile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProfileName {
    #[serde(rename = "5g")]
    FiveG,
    #[serde(rename = "4g")]
    FourGLte,
    #[serde(rename = "3g")]
    ThreeG,
    #[serde(rename = "2g")]
    TwoG,
    #[serde(rename = "local")]
    Local,
}

impl ProfileName {
    pub const CELLULAR: [ProfileName; 4] = [
        ProfileName::FiveG,
        ProfileName::FourGLte,
        ProfileName::ThreeG,
        ProfileName::TwoG,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProfileName::FiveG => "5g",
            ProfileName::FourGLte => "4g",
            ProfileName::ThreeG => "3g",
            ProfileName::TwoG => "2g",
            ProfileName::Local => "local",
        }
    }

    /// Average end-to-end centralized operation time measured per network
    /// type, used as the round-trip calibration target (ms).
    pub fn calibrated_round_trip_ms(self) -> f64 {
        match self {
            ProfileName::FiveG => 212.8,
            ProfileName::FourGLte => 260.4,
            ProfileName::ThreeG => 267.1,
            ProfileName::TwoG => 1049.6,
            ProfileName::Local => LOCAL_MAX_ROUND_TRIP_MS,
        }
    }

    pub fn is_cellular(self) -> bool {
        self != ProfileName::Local
    }
}

impl fmt::Display for ProfileName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProfileName {
    type Err = TransportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "5g" => Ok(ProfileName::FiveG),
            "4g" | "4g_lte" | "lte" => Ok(ProfileName::FourGLte),
            "3g" => Ok(ProfileName::ThreeG),
            "2g" => Ok(ProfileName::TwoG),
            "local" => Ok(ProfileName::Local),
            _ => Err(TransportError::UnknownProfile(s.to_string())),
        }
    }
}

/// Latency model of one link class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkProfile {
    pub name: ProfileName,
    pub mean_round_trip_ms: f64,
    pub jitter_fraction: f64,
}

impl NetworkProfile {
    pub fn calibrated(name: ProfileName) -> Self {
        Self {
            name,
            mean_round_trip_ms: name.calibrated_round_trip_ms(),
            jitter_fraction: DEFAULT_JITTER_FRACTION,
        }
    }

    pub fn local() -> Self {
        Self::calibrated(ProfileName::Local)
    }

    pub fn with_jitter(mut self, jitter_fraction: f64) -> Self {
        self.jitter_fraction = jitter_fraction;
        self
    }

    pub fn with_mean(mut self, mean_round_trip_ms: f64) -> Self {
        self.mean_round_trip_ms = mean_round_trip_ms;
        self
    }

    pub fn validate(&self) -> Result<(), TransportError> {
        let bad = |why: &str| Err(TransportError::InvalidProfile(format!("{}: {why}", self.name)));
        if !self.mean_round_trip_ms.is_finite() || !self.jitter_fraction.is_finite() {
            return bad("values must be finite");
        }
        if self.jitter_fraction < 0.0 {
            return bad("jitter fraction must be non-negative");
        }
        if self.name.is_cellular() && self.mean_round_trip_ms <= 0.0 {
            return bad("cellular mean round trip must be positive");
        }
        if !self.name.is_cellular()
            && !(0.0..=LOCAL_MAX_ROUND_TRIP_MS).contains(&self.mean_round_trip_ms)
        {
            return bad("local mean round trip must be within 0..=2 ms");
        }
        Ok(())
    }

    pub fn one_way_mean(&self) -> Duration {
        Duration::from_secs_f64(self.mean_round_trip_ms / 2.0 / 1000.0)
    }
}

/// Draw one one-way delay.
///
/// Uniform on `mean/2 · [1 − j, 1 + j]` with `j` the jitter fraction;
/// candidates below zero are truncated to zero.
pub fn sample<R: Rng + ?Sized>(profile: &NetworkProfile, rng: &mut R) -> Duration {
    let half = profile.mean_round_trip_ms / 2.0;
    let spread = profile.jitter_fraction * half;
    let ms = if spread > 0.0 {
        half + rng.random_range(-spread..=spread)
    } else {
        half
    };
    Duration::from_secs_f64(ms.max(0.0) / 1000.0)
}

pub fn status_topic(asdu: u32) -> String {
    format!("asdu/{asdu}/status")
}

pub fn control_topic(asdu: u32) -> String {
    format!("asdu/{asdu}/control")
}

/// MQTT-style match: `+` matches one level, a trailing `#` any remainder.
pub fn topic_matches(pattern: &str, topic: &str) -> bool {
    let mut pat = pattern.split('/');
    let mut top = topic.split('/');
    loop {
        match (pat.next(), top.next()) {
            (Some("#"), _) => return true,
            (Some("+"), Some(_)) => {}
            (Some(p), Some(t)) if p == t => {}
            (None, None) => return true,
            _ => return false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub topic: String,
    pub payload: PointMessage,
    pub enqueue_time: Duration,
    pub deliver_time: Duration,
    pub seq: u64,
}

struct Scheduled(Envelope);

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // Reversed: BinaryHeap is a max-heap and we want the earliest first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.0.deliver_time, other.0.seq).cmp(&(self.0.deliver_time, self.0.seq))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockMode {
    #[default]
    Simulated,
    RealTime,
}

pub type SubscriptionId = u64;

/// Receiving end of a subscription.
#[derive(Debug)]
pub struct Subscription {
    id: SubscriptionId,
    rx: mpsc::Receiver<Envelope>,
}

impl Subscription {
    pub fn id(&self) -> SubscriptionId {
        self.id
    }

    pub fn try_next(&self) -> Option<Envelope> {
        self.rx.try_recv().ok()
    }

    pub fn drain(&self) -> Vec<Envelope> {
        self.rx.try_iter().collect()
    }
}

struct SubscriptionEntry {
    id: SubscriptionId,
    pattern: String,
    tx: mpsc::Sender<Envelope>,
}

pub struct MessageBus {
    mode: ClockMode,
    started: Instant,
    now: Duration,
    rng: ChaCha8Rng,
    queue: BinaryHeap<Scheduled>,
    topic_tail: HashMap<String, Duration>,
    subscriptions: Vec<SubscriptionEntry>,
    next_seq: u64,
    next_sub: SubscriptionId,
    closed: bool,
}

impl fmt::Debug for MessageBus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MessageBus")
            .field("mode", &self.mode)
            .field("now", &self.now)
            .field("pending", &self.queue.len())
            .field("subscriptions", &self.subscriptions.len())
            .field("closed", &self.closed)
            .finish()
    }
}

impl MessageBus {
    pub fn new(seed: u64, mode: ClockMode) -> Self {
        Self {
            mode,
            started: Instant::now(),
            now: Duration::ZERO,
            rng: ChaCha8Rng::seed_from_u64(seed),
            queue: BinaryHeap::new(),
            topic_tail: HashMap::new(),
            subscriptions: Vec::new(),
            next_seq: 0,
            next_sub: 0,
            closed: false,
        }
    }

    pub fn simulated(seed: u64) -> Self {
        Self::new(seed, ClockMode::Simulated)
    }

    /// Current time on the bus clock, measured from creation.
    pub fn now(&self) -> Duration {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn is_idle(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn peek_time(&self) -> Option<Duration> {
        self.queue.peek().map(|s| s.0.deliver_time)
    }

    /// Schedule `message` on `topic` with a delay drawn from `profile`.
    pub fn publish(
        &mut self,
        topic: &str,
        message: PointMessage,
        profile: &NetworkProfile,
    ) -> Result<Envelope, TransportError> {
        if self.closed {
            return Err(TransportError::BusClosed);
        }
        profile.validate()?;
        let enqueue_time = self.now;
        let mut deliver_time = enqueue_time + sample(profile, &mut self.rng);
        let tail = self.topic_tail.entry(topic.to_string()).or_default();
        if deliver_time < *tail {
            deliver_time = *tail;
        }
        *tail = deliver_time;
        let envelope = Envelope {
            topic: topic.to_string(),
            payload: message,
            enqueue_time,
            deliver_time,
            seq: self.next_seq,
        };
        self.next_seq += 1;
        self.queue.push(Scheduled(envelope.clone()));
        Ok(envelope)
    }

    pub fn subscribe(&mut self, pattern: &str) -> Result<Subscription, TransportError> {
        if self.closed {
            return Err(TransportError::BusClosed);
        }
        let (tx, rx) = mpsc::channel();
        let id = self.next_sub;
        self.next_sub += 1;
        self.subscriptions.push(SubscriptionEntry {
            id,
            pattern: pattern.to_string(),
            tx,
        });
        Ok(Subscription { id, rx })
    }

    pub fn unsubscribe(&mut self, id: SubscriptionId) {
        self.subscriptions.retain(|s| s.id != id);
    }

    /// Deliver the next due envelope to every matching subscription and
    /// advance the clock to its delivery time. Envelopes with no matching
    /// subscription are dropped.
    pub fn step(&mut self) -> Option<Envelope> {
        let Scheduled(envelope) = self.queue.pop()?;
        if self.mode == ClockMode::RealTime {
            let due = self.started + envelope.deliver_time;
            let wait = due.saturating_duration_since(Instant::now());
            if !wait.is_zero() {
                std::thread::sleep(wait);
            }
        }
        self.now = self.now.max(envelope.deliver_time);
        self.subscriptions.retain(|s| {
            if topic_matches(&s.pattern, &envelope.topic) {
                // A dropped receiver ends its subscription.
                s.tx.send(envelope.clone()).is_ok()
            } else {
                true
            }
        });
        Some(envelope)
    }

    /// Step until the queue is empty; returns the delivered envelopes.
    pub fn run_until_idle(&mut self) -> Vec<Envelope> {
        std::iter::from_fn(|| self.step()).collect()
    }

    /// Refuse further publishes and subscriptions. Already scheduled
    /// envelopes are still delivered.
    pub fn close(&mut self) {
        self.closed = true;
    }
}
