//! Result delivery: the deterministic wire format, broker endpoints and the
//! per-batch delivery pipeline with phase timings.
//!
//! One message carries one group result. Message bytes are a function of
//! the batch alone — JSON with object keys in lexicographic order — so two
//! runs over the same data produce byte-identical deliveries.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{ChannelResultBatch, GroupResult};
use crate::eval::Fields;
use crate::value::Micros;

#[derive(Debug, Error)]
pub enum BrokerError {
    #[error("broker {0} already registered")]
    DuplicateBroker(String),
    #[error("unknown broker {0}")]
    UnknownBroker(String),
    #[error("duplicate subscription id {0} in one group message")]
    DuplicateSubscriber(u64),
    #[error("delivery to {url} failed: {reason}")]
    Delivery { url: String, reason: String },
}

/// One result record as delivered. Field names sort before "pk".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireResult {
    pub fields: Fields,
    pub pk: u64,
}

/// The unit of broker traffic: one group's results for one execution.
/// Serialized keys appear in lexicographic order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMessage {
    pub channel: String,
    #[serde(rename = "executionTs")]
    pub execution_ts: Micros,
    pub results: Vec<WireResult>,
    #[serde(rename = "subIds")]
    pub sub_ids: Vec<u64>,
}

impl GroupMessage {
    pub fn from_group(channel: &str, execution_ts: Micros, group: &GroupResult) -> Self {
        GroupMessage {
            channel: channel.to_string(),
            execution_ts,
            results: group
                .payload
                .iter()
                .map(|r| WireResult { fields: r.fields.clone(), pk: r.pk })
                .collect(),
            sub_ids: group.sub_ids.clone(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("message serialization cannot fail")
    }

    /// Expands the group message into one per-subscriber notification, as a
    /// broker would before pushing to clients. Ids must be unique.
    pub fn fan_out(&self) -> Result<Vec<(u64, GroupMessage)>, BrokerError> {
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::with_capacity(self.sub_ids.len());
        for id in &self.sub_ids {
            if !seen.insert(*id) {
                return Err(BrokerError::DuplicateSubscriber(*id));
            }
            out.push((*id, GroupMessage { sub_ids: vec![*id], ..self.clone() }));
        }
        Ok(out)
    }
}

/// Receiving endpoint of a registered broker.
pub enum Endpoint {
    /// Local sink for embedded use and tests.
    InProcess(Box<dyn Sink>),
    /// Remote broker reached by HTTP POST of one message per request.
    Http { url: String },
}

pub trait Sink: Send {
    fn accept(&mut self, message: &GroupMessage, bytes: &[u8]) -> Result<(), BrokerError>;
}

/// Sink that counts traffic and optionally retains messages.
#[derive(Debug, Clone, Default)]
pub struct CountingSink {
    state: Arc<Mutex<CountingState>>,
    pub retain: bool,
}

#[derive(Debug, Default)]
pub struct CountingState {
    pub messages: u64,
    pub bytes: u64,
    pub subscribers_notified: u64,
    pub retained: Vec<GroupMessage>,
}

impl CountingSink {
    pub fn retaining() -> Self {
        CountingSink { state: Arc::default(), retain: true }
    }

    pub fn state(&self) -> std::sync::MutexGuard<'_, CountingState> {
        self.state.lock().expect("sink mutex poisoned")
    }
}

impl Sink for CountingSink {
    fn accept(&mut self, message: &GroupMessage, bytes: &[u8]) -> Result<(), BrokerError> {
        let mut s = self.state();
        s.messages += 1;
        s.bytes += bytes.len() as u64;
        s.subscribers_notified += message.sub_ids.len() as u64;
        if self.retain {
            s.retained.push(message.clone());
        }
        Ok(())
    }
}

/// Timings and totals for delivering one batch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DeliveryReport {
    /// Receiving the batch and routing groups to brokers.
    pub receiving_ms: f64,
    /// Converting group results to wire messages.
    pub convert_ms: f64,
    /// Handing messages to endpoints.
    pub send_out_ms: f64,
    pub messages: u64,
    pub payload_bytes: u64,
    pub subscribers_notified: u64,
}

#[derive(Default)]
pub struct BrokerRegistry {
    brokers: HashMap<String, Endpoint>,
}

impl BrokerRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, endpoint: Endpoint) -> Result<(), BrokerError> {
        let name = name.into();
        if self.brokers.contains_key(&name) {
            return Err(BrokerError::DuplicateBroker(name));
        }
        self.brokers.insert(name, endpoint);
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.brokers.contains_key(name)
    }

    pub fn names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.brokers.keys().map(String::as_str).collect();
        names.sort_unstable();
        names
    }

    /// Delivers every group of a batch to its broker, in batch order.
    pub fn deliver_batch(&mut self, batch: &ChannelResultBatch) -> Result<DeliveryReport, BrokerError> {
        let mut report = DeliveryReport::default();

        // Receiving: route each group to its broker.
        let started = Instant::now();
        let mut routed: Vec<(&str, &GroupResult)> = Vec::with_capacity(batch.groups.len());
        for group in &batch.groups {
            if !self.brokers.contains_key(&group.broker) {
                return Err(BrokerError::UnknownBroker(group.broker.clone()));
            }
            routed.push((group.broker.as_str(), group));
        }
        report.receiving_ms = started.elapsed().as_secs_f64() * 1_000.0;

        // Convert: group results to wire bytes.
        let started = Instant::now();
        let mut outbound: Vec<(&str, GroupMessage, Vec<u8>)> = Vec::with_capacity(routed.len());
        for (broker, group) in routed {
            let message = GroupMessage::from_group(&batch.channel, batch.execution_ts, group);
            let bytes = message.to_bytes();
            report.messages += 1;
            report.payload_bytes += bytes.len() as u64;
            report.subscribers_notified += message.sub_ids.len() as u64;
            outbound.push((broker, message, bytes));
        }
        report.convert_ms = started.elapsed().as_secs_f64() * 1_000.0;

        // Send out.
        let started = Instant::now();
        for (broker, message, bytes) in outbound {
            match self.brokers.get_mut(broker).expect("routed above") {
                Endpoint::InProcess(sink) => sink.accept(&message, &bytes)?,
                Endpoint::Http { url } => post_message(url, &bytes)?,
            }
        }
        report.send_out_ms = started.elapsed().as_secs_f64() * 1_000.0;
        Ok(report)
    }
}

fn post_message(url: &str, bytes: &[u8]) -> Result<(), BrokerError> {
    ureq::post(url)
        .set("content-type", "application/json")
        .send_bytes(bytes)
        .map(|_| ())
        .map_err(|e| BrokerError::Delivery { url: url.to_string(), reason: e.to_string() })
}

/// Minimal HTTP broker: accepts POSTed group messages and retains them.
/// Used by the CLI's serve command and by HTTP delivery tests.
pub struct HttpBroker {
    addr: String,
    received: Arc<Mutex<Vec<GroupMessage>>>,
    stop: Arc<AtomicBool>,
    handle: Option<std::thread::JoinHandle<()>>,
}

impl HttpBroker {
    /// Binds and starts serving on a background thread. Use port 0 for an
    /// ephemeral port.
    pub fn start(addr: &str) -> Result<Self, BrokerError> {
        let server = tiny_http::Server::http(addr).map_err(|e| BrokerError::Delivery {
            url: addr.to_string(),
            reason: e.to_string(),
        })?;
        let bound = format!("{}", server.server_addr());
        let received: Arc<Mutex<Vec<GroupMessage>>> = Arc::default();
        let stop = Arc::new(AtomicBool::new(false));
        let handle = {
            let received = received.clone();
            let stop = stop.clone();
            std::thread::spawn(move || {
                while !stop.load(Ordering::Relaxed) {
                    match server.recv_timeout(Duration::from_millis(50)) {
                        Ok(Some(mut request)) => {
                            let mut body = Vec::new();
                            let _ = request.as_reader().read_to_end(&mut body);
                            let (status, reply) = match serde_json::from_slice::<GroupMessage>(&body)
                            {
                                Ok(message) => {
                                    received.lock().expect("broker mutex poisoned").push(message);
                                    (200, "ok")
                                }
                                Err(_) => (400, "malformed group message"),
                            };
                            let _ = request.respond(
                                tiny_http::Response::from_string(reply)
                                    .with_status_code(status),
                            );
                        }
                        Ok(None) => {}
                        Err(_) => break,
                    }
                }
            })
        };
        Ok(HttpBroker { addr: bound, received, stop, handle: Some(handle) })
    }

    /// The bound address, e.g. `127.0.0.1:41523`.
    pub fn addr(&self) -> &str {
        &self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn received(&self) -> Vec<GroupMessage> {
        self.received.lock().expect("broker mutex poisoned").clone()
    }

    pub fn stop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

impl Drop for HttpBroker {
    fn drop(&mut self) {
        self.stop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::ResultRecord;
    use crate::value::Value;

    fn sample_batch() -> ChannelResultBatch {
        let fields: Fields = [("text".to_string(), Value::Str("hi".into()))].into_iter().collect();
        ChannelResultBatch {
            channel: "HotTopics".into(),
            execution_ts: 10_000_000,
            groups: vec![
                GroupResult {
                    group_id: 0,
                    broker: "brokerA".into(),
                    sub_ids: vec![1, 2],
                    delivery_time: 10_000_000,
                    payload: vec![ResultRecord { pk: 7, fields: fields.clone() }],
                },
                GroupResult {
                    group_id: 1,
                    broker: "brokerB".into(),
                    sub_ids: vec![3],
                    delivery_time: 10_000_000,
                    payload: vec![ResultRecord { pk: 7, fields }],
                },
            ],
        }
    }

    #[test]
    fn wire_format_is_pinned() {
        let batch = sample_batch();
        let message = GroupMessage::from_group(&batch.channel, batch.execution_ts, &batch.groups[0]);
        let text = String::from_utf8(message.to_bytes()).unwrap();
        assert_eq!(
            text,
            r#"{"channel":"HotTopics","executionTs":10000000,"results":[{"fields":{"text":"hi"},"pk":7}],"subIds":[1,2]}"#
        );
        // Round trip.
        let back: GroupMessage = serde_json::from_str(&text).unwrap();
        assert_eq!(back, message);
    }

    #[test]
    fn delivery_is_deterministic() {
        let batch = sample_batch();
        let run = || {
            let mut registry = BrokerRegistry::new();
            let a = CountingSink::retaining();
            let b = CountingSink::retaining();
            registry.register("brokerA", Endpoint::InProcess(Box::new(a.clone()))).unwrap();
            registry.register("brokerB", Endpoint::InProcess(Box::new(b.clone()))).unwrap();
            registry.deliver_batch(&batch).unwrap();
            let out = (a.state().retained.clone(), b.state().retained.clone());
            out
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn counting_sink_totals() {
        let batch = sample_batch();
        let mut registry = BrokerRegistry::new();
        let sink = CountingSink::default();
        registry.register("brokerA", Endpoint::InProcess(Box::new(sink.clone()))).unwrap();
        registry.register("brokerB", Endpoint::InProcess(Box::new(sink.clone()))).unwrap();
        let report = registry.deliver_batch(&batch).unwrap();
        assert_eq!(report.messages, 2);
        assert_eq!(report.subscribers_notified, 3);
        assert!(report.payload_bytes > 0);
        let state = sink.state();
        assert_eq!(state.messages, 2);
        assert_eq!(state.bytes, report.payload_bytes);
    }

    #[test]
    fn unknown_broker_rejected() {
        let batch = sample_batch();
        let mut registry = BrokerRegistry::new();
        registry
            .register("brokerA", Endpoint::InProcess(Box::new(CountingSink::default())))
            .unwrap();
        assert!(matches!(
            registry.deliver_batch(&batch),
            Err(BrokerError::UnknownBroker(b)) if b == "brokerB"
        ));
    }

    #[test]
    fn fan_out_splits_and_rejects_duplicates() {
        let batch = sample_batch();
        let message = GroupMessage::from_group(&batch.channel, batch.execution_ts, &batch.groups[0]);
        let per_sub = message.fan_out().unwrap();
        assert_eq!(per_sub.len(), 2);
        assert_eq!(per_sub[0].0, 1);
        assert_eq!(per_sub[0].1.sub_ids, vec![1]);
        assert_eq!(per_sub[0].1.results, message.results);

        let mut dup = message;
        dup.sub_ids = vec![4, 4];
        assert!(matches!(dup.fan_out(), Err(BrokerError::DuplicateSubscriber(4))));
    }

    #[test]
    fn http_delivery_round_trip() {
        let broker = HttpBroker::start("127.0.0.1:0").unwrap();
        let batch = sample_batch();
        let mut registry = BrokerRegistry::new();
        registry.register("brokerA", Endpoint::Http { url: broker.url() }).unwrap();
        registry.register("brokerB", Endpoint::Http { url: broker.url() }).unwrap();
        let report = registry.deliver_batch(&batch).unwrap();
        assert_eq!(report.messages, 2);
        // Both messages arrive; order matches delivery order.
        let got = broker.received();
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].sub_ids, vec![1, 2]);
        assert_eq!(got[1].sub_ids, vec![3]);
    }
}
