//! The event loop behind [`run_pattern`].
//!
//! Global iteration `g` arrives at its site at `g × sample_interval_ms`.
//! Events at equal times run in this order: deliveries to sites, point
//! arrivals, P0 push ticks, arrivals at the cloud. Remaining ties follow
//! scheduling order, so arrivals in the same instant are handled by site id.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{
    CloudState, EngineError, Message, MessageStats, NodeId, Pattern, PatternConfig, PatternRun,
    Payload, PushRecord, SiteState, StepRecord,
};
use crate::learners::{self, ModelSnapshot};
use crate::netsim::{transaction_time, MediumProfile};
use crate::streams::{LabeledPoint, SiteStreams};

/// Bookkeeping for a P2 prediction that is waiting for its D message.
#[derive(Debug)]
struct Pending {
    site: usize,
    idx: usize,
    time_ms: f64,
    bytes_up: u64,
    up_ms: f64,
    model_size: Option<usize>,
    model_trained_at: Option<u64>,
}

#[derive(Debug)]
enum EventKind {
    Deliver { msg: Message, pending: Option<Pending> },
    Arrival { site: usize, idx: usize },
    PushTick { iteration: u64 },
    CloudReceive { msg: Message, pending: Option<Pending> },
}

impl EventKind {
    fn priority(&self) -> u8 {
        match self {
            EventKind::Deliver { .. } => 0,
            EventKind::Arrival { .. } => 1,
            EventKind::PushTick { .. } => 2,
            EventKind::CloudReceive { .. } => 3,
        }
    }
}

#[derive(Debug)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl Event {
    fn key(&self) -> (f64, u8, u64) {
        (self.time, self.kind.priority(), self.seq)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Reversed so the max-heap pops the earliest event.
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        let (ta, pa, sa) = self.key();
        let (tb, pb, sb) = other.key();
        tb.total_cmp(&ta).then(pb.cmp(&pa)).then(sb.cmp(&sa))
    }
}

struct Sim<'a> {
    config: &'a PatternConfig,
    medium: &'a MediumProfile,
    streams: &'a SiteStreams,
    queue: BinaryHeap<Event>,
    seq: u64,
    sites: Vec<SiteState>,
    cloud: Option<CloudState>,
    outboxes: Vec<Vec<LabeledPoint>>,
    records: Vec<StepRecord>,
    messages: MessageStats,
    pushes: Vec<PushRecord>,
}

/// Runs one pattern over the given site streams and returns the full log.
///
/// Fails if the config is invalid, if feature dimensions differ anywhere, or
/// if a site's iterations do not strictly increase.
pub fn run_pattern(
    config: &PatternConfig,
    medium: &MediumProfile,
    streams: &SiteStreams,
) -> Result<PatternRun, EngineError> {
    config.validate()?;
    medium.validate()?;
    validate_streams(streams)?;

    let mut sim = Sim {
        config,
        medium,
        streams,
        queue: BinaryHeap::new(),
        seq: 0,
        sites: (0..streams.n_sites()).map(|i| SiteState::new(i, config)).collect(),
        cloud: (config.pattern != Pattern::P1).then(|| CloudState::new(config)),
        outboxes: vec![Vec::new(); streams.n_sites()],
        records: Vec::with_capacity(streams.total_points()),
        messages: MessageStats::default(),
        pushes: Vec::new(),
    };
    sim.schedule_arrivals();
    while let Some(event) = sim.queue.pop() {
        sim.handle(event)?;
    }

    let mut log = sim.records;
    log.sort_by_key(|r| (r.iteration, r.site));
    Ok(PatternRun {
        pattern: config.pattern,
        config: config.clone(),
        medium: medium.clone(),
        sites: sim.sites,
        cloud: sim.cloud,
        log,
        messages: sim.messages,
        pushes: sim.pushes,
    })
}

fn validate_streams(streams: &SiteStreams) -> Result<(), EngineError> {
    let mut dim = None;
    for (site, points) in streams.per_site.iter().enumerate() {
        let mut last = None;
        for p in points {
            let expected = *dim.get_or_insert(p.dim());
            if p.dim() != expected || expected == 0 {
                return Err(EngineError::DimensionMismatch {
                    site,
                    expected: expected.max(1),
                    got: p.dim(),
                });
            }
            if last.is_some_and(|l| p.iteration <= l) {
                return Err(EngineError::NonMonotonic {
                    site,
                    iteration: p.iteration,
                });
            }
            last = Some(p.iteration);
        }
    }
    Ok(())
}

impl Sim<'_> {
    fn push(&mut self, time: f64, kind: EventKind) {
        self.queue.push(Event {
            time,
            seq: self.seq,
            kind,
        });
        self.seq += 1;
    }

    fn arrival_time(&self, iteration: u64) -> f64 {
        iteration as f64 * self.config.sample_interval_ms
    }

    fn schedule_arrivals(&mut self) {
        let mut order: Vec<(u64, usize, usize)> = self
            .streams
            .per_site
            .iter()
            .enumerate()
            .flat_map(|(site, pts)| pts.iter().enumerate().map(move |(idx, p)| (p.iteration, site, idx)))
            .collect();
        order.sort_unstable();
        let last_iteration = order.last().map(|o| o.0);
        for (iteration, site, idx) in order {
            self.push(self.arrival_time(iteration), EventKind::Arrival { site, idx });
        }
        if let (Pattern::P0, Some(last)) = (self.config.pattern, last_iteration) {
            let p = self.config.push_interval;
            let mut g = p;
            while g <= last {
                self.push(self.arrival_time(g), EventKind::PushTick { iteration: g });
                g += p;
            }
        }
    }

    fn handle(&mut self, event: Event) -> Result<(), EngineError> {
        let now = event.time;
        match event.kind {
            EventKind::Arrival { site, idx } => match self.config.pattern {
                Pattern::P0 => self.arrive_p0(site, idx, now),
                Pattern::P1 => self.arrive_p1(site, idx, now),
                Pattern::P2 => self.arrive_p2(site, idx, now),
            },
            EventKind::PushTick { iteration } => self.push_model(iteration, now),
            EventKind::CloudReceive { msg, pending } => self.cloud_receive(msg, pending, now),
            EventKind::Deliver { msg, pending } => self.deliver(msg, pending),
        }
    }

    fn point(&self, site: usize, idx: usize) -> &LabeledPoint {
        &self.streams.per_site[site][idx]
    }

    fn arrive_p1(&mut self, site: usize, idx: usize, now: f64) -> Result<(), EngineError> {
        let point = &self.streams.per_site[site][idx];
        let trains = self.streams.trains_on(site, point.label);
        let record = self.sites[site].step_p1(point, trains, now, self.config)?;
        self.records.push(record);
        Ok(())
    }

    fn arrive_p0(&mut self, site: usize, idx: usize, now: f64) -> Result<(), EngineError> {
        let point = self.point(site, idx).clone();
        let state = &mut self.sites[site];
        state.clock = now;
        let predicted = state
            .current_model
            .as_ref()
            .map(|m| m.predict(&point.features))
            .transpose()?;
        let score_avg = state.tracker.update(predicted, point.label);
        let bytes_down = std::mem::take(&mut state.pending_down);
        let model_size = state.current_model.as_ref().map(ModelSnapshot::serialized_size);
        let model_trained_at = state.current_model.as_ref().map(ModelSnapshot::trained_at);

        let mut record = StepRecord {
            pattern: Pattern::P0,
            site,
            iteration: point.iteration,
            time_ms: now,
            predicted,
            actual: point.label,
            score_avg,
            latency_ms: self.config.compute.edge_ms,
            bytes_up: 0,
            bytes_down,
            model_size,
            model_trained_at,
        };

        self.outboxes[site].push(point);
        let last = idx + 1 == self.streams.per_site[site].len();
        if self.outboxes[site].len() >= self.config.batch_size || last {
            let batch = std::mem::take(&mut self.outboxes[site]);
            let msg = Message::new(NodeId::Site(site), NodeId::Cloud, now, Payload::Sensor(batch));
            record.bytes_up = msg.size() as u64;
            self.send(msg, None);
        }
        self.records.push(record);
        Ok(())
    }

    fn arrive_p2(&mut self, site: usize, idx: usize, now: f64) -> Result<(), EngineError> {
        let point = self.point(site, idx).clone();
        self.sites[site].clock = now;
        let msg = Message::new(NodeId::Site(site), NodeId::Cloud, now, Payload::Sensor(vec![point]));
        let pending = Pending {
            site,
            idx,
            time_ms: now,
            bytes_up: msg.size() as u64,
            up_ms: transaction_time(self.medium, msg.size() as u64),
            model_size: None,
            model_trained_at: None,
        };
        self.send(msg, Some(pending));
        Ok(())
    }

    /// Schedules delivery after one transaction time over the medium.
    fn send(&mut self, msg: Message, pending: Option<Pending>) {
        self.messages.on_send(&msg);
        let at = msg.sent_at + transaction_time(self.medium, msg.size() as u64);
        let kind = match msg.dst {
            NodeId::Cloud => EventKind::CloudReceive { msg, pending },
            NodeId::Site(_) => EventKind::Deliver { msg, pending },
        };
        self.push(at, kind);
    }

    fn push_model(&mut self, iteration: u64, now: f64) -> Result<(), EngineError> {
        let cloud = self.cloud.as_mut().expect("P0 has a cloud");
        let Some(model) = cloud.model(self.config)? else {
            return Ok(());
        };
        let bytes = model.serialize();
        self.pushes.push(PushRecord {
            iteration,
            time_ms: now,
            model_size: model.serialized_size(),
            trained_at: model.trained_at(),
        });
        for site in 0..self.sites.len() {
            let msg = Message::new(NodeId::Cloud, NodeId::Site(site), now, Payload::Model(bytes.clone()));
            self.send(msg, None);
        }
        Ok(())
    }

    fn cloud_receive(&mut self, msg: Message, pending: Option<Pending>, now: f64) -> Result<(), EngineError> {
        self.messages.on_deliver(&msg);
        let NodeId::Site(src) = msg.src else {
            unreachable!("cloud only receives from sites");
        };
        let Payload::Sensor(points) = msg.payload else {
            unreachable!("cloud only receives sensor data");
        };
        let cloud = self.cloud.as_mut().expect("pattern has a cloud");

        if let Some(mut pending) = pending {
            let point = &points[0];
            let model = cloud.model(self.config)?;
            let predicted = model.map(|m| m.predict(&point.features)).transpose()?;
            pending.model_size = model.map(ModelSnapshot::serialized_size);
            pending.model_trained_at = model.map(ModelSnapshot::trained_at);
            let trains = self.streams.trains_on(src, point.label);
            if trains {
                cloud.ingest(point.clone());
            }
            let reply = Message::new(
                NodeId::Cloud,
                NodeId::Site(src),
                now + self.config.compute.cloud_ms,
                Payload::Decision(predicted),
            );
            self.send(reply, Some(pending));
        } else {
            for point in points {
                if self.streams.trains_on(src, point.label) {
                    cloud.ingest(point);
                }
            }
        }
        Ok(())
    }

    fn deliver(&mut self, msg: Message, pending: Option<Pending>) -> Result<(), EngineError> {
        self.messages.on_deliver(&msg);
        let NodeId::Site(site) = msg.dst else {
            unreachable!("deliveries go to sites");
        };
        let size = msg.size() as u64;
        match msg.payload {
            Payload::Model(bytes) => {
                let state = &mut self.sites[site];
                state.current_model = Some(learners::deserialize(&bytes)?);
                state.model_updates += 1;
                state.pending_down += size;
            }
            Payload::Decision(predicted) => {
                let p = pending.expect("decisions answer a pending prediction");
                let point = &self.streams.per_site[p.site][p.idx];
                let score_avg = self.sites[site].tracker.update(predicted, point.label);
                let latency_ms =
                    p.up_ms + self.config.compute.cloud_ms + transaction_time(self.medium, size);
                self.records.push(StepRecord {
                    pattern: Pattern::P2,
                    site,
                    iteration: point.iteration,
                    time_ms: p.time_ms,
                    predicted,
                    actual: point.label,
                    score_avg,
                    latency_ms,
                    bytes_up: p.bytes_up,
                    bytes_down: size,
                    model_size: p.model_size,
                    model_trained_at: p.model_trained_at,
                });
            }
            _ => unreachable!("sites only receive models and decisions"),
        }
        Ok(())
    }
}
