use std::collections::VecDeque;
use std::time::Duration;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{
    Admission, AckSample, CongestionController, Link, LinkQueue, Packet, Scheduler, SimError,
    SimTime,
};
use crate::measurement::{RecordEvent, RecordedFlow, Recorder, MetricsRow, DEFAULT_WINDOW};
use crate::rng::rng_for;
use crate::scenario::{FlowSpec, ScenarioConfig};

const INITIAL_RTO: Duration = Duration::from_secs(1);
const MIN_RTO: Duration = Duration::from_millis(10);
const SRTT_GAIN: f64 = 0.125;
/// Seed stream offset for application arrival processes.
const ARRIVAL_STREAM: u64 = 0x6172_7276;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Timer {
    FlowStart { flow: usize },
    AppMessage { flow: usize },
    Retransmit { flow: usize, tx: u64 },
    WindowClose,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    /// Packet reaches hop `packet.hop` of its path; one past the last link
    /// is the receiver.
    PacketArrival { packet: Packet },
    AckArrival { flow: usize, tx: u64 },
    LinkServiceDone { link: usize },
    TimerFire(Timer),
    PacingTick { flow: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceEntry {
    pub at: SimTime,
    pub seq: u64,
    pub kind: EventKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinkEvent {
    Admitted,
    Dropped,
    Departed,
}

/// Per-link log entry, recorded only when tracing is enabled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Departure {
    pub link: usize,
    pub at: SimTime,
    pub event: LinkEvent,
    pub flow: usize,
    pub packet_id: u64,
    pub bits: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FlowStats {
    /// Transmissions, including retransmissions.
    pub sent: u64,
    /// Transmissions that reached the receiver, duplicates included.
    pub delivered: u64,
    pub dropped: u64,
    pub retransmitted: u64,
    /// Transmissions still queued or propagating when the stats were taken.
    pub in_flight: u64,
    pub messages_offered: u64,
    pub messages_delivered: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunStats {
    pub end_time: SimTime,
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub retransmitted: u64,
    pub per_flow: Vec<FlowStats>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum TxState {
    Outstanding,
    Acked,
    Lost,
}

#[derive(Clone, Debug)]
struct TxRecord {
    message: u64,
    sent_at: SimTime,
    delivered: u64,
    delivered_time: SimTime,
    first_sent_time: SimTime,
    app_limited: bool,
    state: TxState,
}

#[derive(Clone, Debug)]
struct Message {
    created_at: SimTime,
    received: bool,
    acked: bool,
}

#[derive(Debug)]
struct FlowRuntime {
    spec: FlowSpec,
    packet_bits: f64,
    ack_delay: Duration,
    rng: ChaCha8Rng,
    started: bool,
    messages: Vec<Message>,
    app_queue: VecDeque<u64>,
    rtx_queue: VecDeque<u64>,
    txs: Vec<TxRecord>,
    inflight: u64,
    next_send_time: SimTime,
    pacing_pending: bool,
    srtt: Option<f64>,
    min_rtt: Option<Duration>,
    delivered: u64,
    delivered_time: SimTime,
    first_sent_time: SimTime,
    /// Delivery count that ends the current app-limited stretch, 0 when the
    /// flow is not app-limited.
    app_limited_until: u64,
    stats: FlowStats,
}

impl FlowRuntime {
    fn generating(&self, now: SimTime) -> bool {
        self.started
            && self
                .spec
                .stop
                .is_none_or(|stop| now < SimTime::ZERO + stop)
    }

    fn is_bulk(&self) -> bool {
        self.spec.send_rate.is_none()
    }

    fn rto(&self) -> Duration {
        match self.srtt {
            Some(s) => Duration::from_secs_f64(2.0 * s).max(MIN_RTO),
            None => INITIAL_RTO,
        }
    }

    fn drop_acked_retransmissions(&mut self) {
        while let Some(&m) = self.rtx_queue.front() {
            if self.messages[m as usize].acked {
                self.rtx_queue.pop_front();
            } else {
                break;
            }
        }
    }

    fn has_data(&mut self, now: SimTime) -> bool {
        self.drop_acked_retransmissions();
        !self.rtx_queue.is_empty()
            || !self.app_queue.is_empty()
            || (self.is_bulk() && self.generating(now))
    }
}

/// A single simulation run: links, flows, one congestion controller and the
/// metrics recorder. The run is a pure function of its configuration and
/// seed.
pub struct Simulation {
    sched: Scheduler<EventKind>,
    links: Vec<LinkQueue>,
    flows: Vec<FlowRuntime>,
    controller: Box<dyn CongestionController>,
    recorder: Recorder,
    trace: Option<Vec<TraceEntry>>,
    link_log: Option<Vec<Departure>>,
}

impl Simulation {
    pub fn new(
        config: &ScenarioConfig,
        controller: Box<dyn CongestionController>,
    ) -> Result<Self, SimError> {
        config
            .validate()
            .map_err(|e| SimError::Config(e.to_string()))?;
        let links = config.build_links();
        let specs = config
            .build_flows()
            .map_err(|e| SimError::Config(e.to_string()))?;
        Self::from_parts(links, specs, config.seed, controller)
    }

    pub fn from_parts(
        links: Vec<Link>,
        specs: Vec<FlowSpec>,
        seed: u64,
        controller: Box<dyn CongestionController>,
    ) -> Result<Self, SimError> {
        for spec in &specs {
            if spec.path.is_empty() || spec.path.iter().any(|&l| l >= links.len()) {
                return Err(SimError::Config(format!(
                    "flow {} references a missing link",
                    spec.id
                )));
            }
        }
        let recorded = specs
            .iter()
            .map(|s| RecordedFlow {
                id: s.id,
                block_size: s
                    .bottleneck(&links)
                    .map_or(0, |l| links[l].buffer_capacity as u64),
                start: SimTime::ZERO + s.start,
                stop: s.stop.map(|d| SimTime::ZERO + d),
            })
            .collect();
        let flows: Vec<FlowRuntime> = specs
            .into_iter()
            .enumerate()
            .map(|(i, spec)| FlowRuntime {
                packet_bits: f64::from(spec.message_bytes) * 8.0,
                ack_delay: spec.path_delay(&links),
                rng: rng_for(seed ^ ARRIVAL_STREAM, i as u64),
                spec,
                started: false,
                messages: Vec::new(),
                app_queue: VecDeque::new(),
                rtx_queue: VecDeque::new(),
                txs: Vec::new(),
                inflight: 0,
                next_send_time: SimTime::ZERO,
                pacing_pending: false,
                srtt: None,
                min_rtt: None,
                delivered: 0,
                delivered_time: SimTime::ZERO,
                first_sent_time: SimTime::ZERO,
                app_limited_until: 0,
                stats: FlowStats::default(),
            })
            .collect();

        let mut sim = Simulation {
            sched: Scheduler::new(),
            links: links.into_iter().map(LinkQueue::new).collect(),
            flows,
            controller,
            recorder: Recorder::new(recorded, DEFAULT_WINDOW),
            trace: None,
            link_log: None,
        };
        for (i, f) in sim.flows.iter().enumerate() {
            sim.sched.schedule(
                SimTime::ZERO + f.spec.start,
                EventKind::TimerFire(Timer::FlowStart { flow: i }),
            )?;
        }
        sim.sched.schedule(
            SimTime::ZERO + DEFAULT_WINDOW,
            EventKind::TimerFire(Timer::WindowClose),
        )?;
        Ok(sim)
    }

    /// Records every executed event and per-link admissions/departures.
    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
        self.link_log = Some(Vec::new());
    }

    pub fn trace(&self) -> Option<&[TraceEntry]> {
        self.trace.as_deref()
    }

    pub fn link_log(&self) -> Option<&[Departure]> {
        self.link_log.as_deref()
    }

    pub fn now(&self) -> SimTime {
        self.sched.now()
    }

    pub fn rows(&self) -> &[MetricsRow] {
        self.recorder.rows()
    }

    pub fn into_rows(self) -> Vec<MetricsRow> {
        self.recorder.into_rows()
    }

    pub fn controller(&self) -> &dyn CongestionController {
        self.controller.as_ref()
    }

    pub fn links(&self) -> &[LinkQueue] {
        &self.links
    }

    /// Executes every event with time `<= until`.
    pub fn run(&mut self, until: SimTime) -> Result<RunStats, SimError> {
        while let Some((at, handle, kind)) = self.sched.pop_until(until) {
            if let Some(trace) = self.trace.as_mut() {
                trace.push(TraceEntry {
                    at,
                    seq: handle.0,
                    kind,
                });
            }
            self.dispatch(at, kind)?;
        }
        self.sched.advance_to(until);
        Ok(self.stats())
    }

    pub fn stats(&self) -> RunStats {
        let mut stats = RunStats {
            end_time: self.sched.now(),
            ..RunStats::default()
        };
        for (i, f) in self.flows.iter().enumerate() {
            let mut fs = f.stats.clone();
            fs.in_flight = self.in_network(i);
            stats.sent += fs.sent;
            stats.delivered += fs.delivered;
            stats.dropped += fs.dropped;
            stats.retransmitted += fs.retransmitted;
            stats.per_flow.push(fs);
        }
        stats
    }

    /// Packets of `flow` currently queued at a link or propagating,
    /// counted from the queues and pending events.
    pub fn in_network(&self, flow: usize) -> u64 {
        let queued: usize = self
            .links
            .iter()
            .map(|l| l.packets().filter(|p| p.flow_id == flow).count())
            .sum();
        let propagating = self
            .sched
            .pending()
            .filter(|(_, k)| matches!(k, EventKind::PacketArrival { packet } if packet.flow_id == flow))
            .count();
        (queued + propagating) as u64
    }

    fn dispatch(&mut self, now: SimTime, kind: EventKind) -> Result<(), SimError> {
        match kind {
            EventKind::PacketArrival { packet } => self.on_packet_arrival(now, packet),
            EventKind::AckArrival { flow, tx } => self.on_ack_arrival(now, flow, tx),
            EventKind::LinkServiceDone { link } => self.on_service_done(now, link),
            EventKind::PacingTick { flow } => {
                self.flows[flow].pacing_pending = false;
                self.try_send(now, flow)
            }
            EventKind::TimerFire(timer) => match timer {
                Timer::FlowStart { flow } => self.on_flow_start(now, flow),
                Timer::AppMessage { flow } => self.on_app_message(now, flow),
                Timer::Retransmit { flow, tx } => self.on_retransmit_timer(now, flow, tx),
                Timer::WindowClose => self.on_window_close(now),
            },
        }
    }

    fn schedule_next_message(&mut self, now: SimTime, flow: usize) -> Result<(), SimError> {
        let f = &mut self.flows[flow];
        let Some(rate) = f.spec.send_rate else {
            return Ok(());
        };
        let u: f64 = f.rng.gen();
        let gap = -(1.0 - u).ln() / rate;
        let at = now + Duration::from_secs_f64(gap);
        self.sched
            .schedule(at, EventKind::TimerFire(Timer::AppMessage { flow }))?;
        Ok(())
    }

    fn on_flow_start(&mut self, now: SimTime, flow: usize) -> Result<(), SimError> {
        self.flows[flow].started = true;
        self.controller.on_flow_start(flow, now);
        self.schedule_next_message(now, flow)?;
        self.try_send(now, flow)
    }

    fn new_message(&mut self, now: SimTime, flow: usize) -> u64 {
        let f = &mut self.flows[flow];
        let id = f.messages.len() as u64;
        f.messages.push(Message {
            created_at: now,
            received: false,
            acked: false,
        });
        f.stats.messages_offered += 1;
        self.recorder.record(flow, RecordEvent::Sent);
        id
    }

    fn on_app_message(&mut self, now: SimTime, flow: usize) -> Result<(), SimError> {
        if !self.flows[flow].generating(now) {
            return Ok(());
        }
        let id = self.new_message(now, flow);
        self.flows[flow].app_queue.push_back(id);
        self.schedule_next_message(now, flow)?;
        self.try_send(now, flow)
    }

    fn try_send(&mut self, now: SimTime, flow: usize) -> Result<(), SimError> {
        loop {
            if !self.flows[flow].has_data(now) {
                return Ok(());
            }
            if self.flows[flow].inflight >= self.controller.cwnd(flow) {
                return Ok(());
            }
            let rate = self.controller.pacing_rate(flow);
            if !(rate > 0.0 && rate.is_finite()) {
                return Ok(());
            }
            let f = &mut self.flows[flow];
            if now < f.next_send_time {
                if !f.pacing_pending {
                    f.pacing_pending = true;
                    let at = f.next_send_time;
                    self.sched.schedule(at, EventKind::PacingTick { flow })?;
                }
                return Ok(());
            }

            let (message, is_retransmit) = if let Some(m) = f.rtx_queue.pop_front() {
                (m, true)
            } else if let Some(m) = f.app_queue.pop_front() {
                (m, false)
            } else {
                (self.new_message(now, flow), false)
            };
            let cwnd = self.controller.cwnd(flow);
            self.transmit(now, flow, message, is_retransmit, rate, cwnd)?;
        }
    }

    fn transmit(
        &mut self,
        now: SimTime,
        flow: usize,
        message: u64,
        is_retransmit: bool,
        rate: f64,
        cwnd: u64,
    ) -> Result<(), SimError> {
        let f = &mut self.flows[flow];
        if f.inflight == 0 {
            f.first_sent_time = now;
            f.delivered_time = now;
        }
        // the application ran dry before the window filled: samples until
        // everything now in flight is delivered understate the bandwidth
        if !f.is_bulk()
            && f.app_queue.is_empty()
            && f.rtx_queue.is_empty()
            && f.inflight + 1 < cwnd
        {
            f.app_limited_until = (f.delivered + f.inflight + 1).max(1);
        }
        let app_limited = f.app_limited_until > 0;
        let id = f.txs.len() as u64;
        f.txs.push(TxRecord {
            message,
            sent_at: now,
            delivered: f.delivered,
            delivered_time: f.delivered_time,
            first_sent_time: f.first_sent_time,
            app_limited,
            state: TxState::Outstanding,
        });
        f.inflight += 1;
        f.stats.sent += 1;
        if is_retransmit {
            f.stats.retransmitted += 1;
        }
        let gap = Duration::from_secs_f64(f.packet_bits / rate).max(Duration::from_nanos(1));
        f.next_send_time = now + gap;
        let rto = f.rto();
        let inflight = f.inflight;
        let packet = Packet {
            id,
            flow_id: flow,
            message,
            size: f.spec.message_bytes,
            sent_at: now,
            is_retransmit,
            hop: 0,
        };
        self.controller.on_send(flow, now, inflight);
        self.sched.schedule(now, EventKind::PacketArrival { packet })?;
        self.sched.schedule(
            now + rto,
            EventKind::TimerFire(Timer::Retransmit { flow, tx: id }),
        )?;
        Ok(())
    }

    fn log_link(&mut self, link: usize, at: SimTime, event: LinkEvent, packet: &Packet) {
        if let Some(log) = self.link_log.as_mut() {
            log.push(Departure {
                link,
                at,
                event,
                flow: packet.flow_id,
                packet_id: packet.id,
                bits: packet.size_bits(),
            });
        }
    }

    fn on_packet_arrival(&mut self, now: SimTime, packet: Packet) -> Result<(), SimError> {
        let flow = packet.flow_id;
        let path_len = self.flows[flow].spec.path.len();
        if packet.hop >= path_len {
            return self.on_receive(now, packet);
        }
        let link = self.flows[flow].spec.path[packet.hop];
        match self.links[link].enqueue(packet) {
            Admission::Accepted => {
                self.log_link(link, now, LinkEvent::Admitted, &packet);
                if let Some(tx_time) = self.links[link].start_service() {
                    self.sched
                        .schedule(now + tx_time, EventKind::LinkServiceDone { link })?;
                }
            }
            Admission::Dropped => {
                self.log_link(link, now, LinkEvent::Dropped, &packet);
                self.flows[flow].stats.dropped += 1;
            }
        }
        Ok(())
    }

    fn on_service_done(&mut self, now: SimTime, link: usize) -> Result<(), SimError> {
        let Some(mut packet) = self.links[link].finish_service() else {
            return Ok(());
        };
        self.log_link(link, now, LinkEvent::Departed, &packet);
        packet.hop += 1;
        let delay = self.links[link].link().prop_delay;
        self.sched
            .schedule(now + delay, EventKind::PacketArrival { packet })?;
        if let Some(tx_time) = self.links[link].start_service() {
            self.sched
                .schedule(now + tx_time, EventKind::LinkServiceDone { link })?;
        }
        Ok(())
    }

    fn on_receive(&mut self, now: SimTime, packet: Packet) -> Result<(), SimError> {
        let flow = packet.flow_id;
        let f = &mut self.flows[flow];
        f.stats.delivered += 1;
        let msg = &mut f.messages[packet.message as usize];
        if !msg.received {
            msg.received = true;
            f.stats.messages_delivered += 1;
            let latency = (now - msg.created_at).as_secs_f64();
            self.recorder
                .record(flow, RecordEvent::Delivered { latency });
        }
        let at = now + self.flows[flow].ack_delay;
        self.sched.schedule(
            at,
            EventKind::AckArrival {
                flow,
                tx: packet.id,
            },
        )?;
        Ok(())
    }

    fn on_ack_arrival(&mut self, now: SimTime, flow: usize, tx: u64) -> Result<(), SimError> {
        let f = &mut self.flows[flow];
        let rec = f.txs[tx as usize].clone();
        f.messages[rec.message as usize].acked = true;
        if rec.state == TxState::Outstanding {
            f.txs[tx as usize].state = TxState::Acked;
            f.inflight -= 1;
            f.delivered += 1;
            f.delivered_time = now;
            if f.app_limited_until > 0 && f.delivered > f.app_limited_until {
                f.app_limited_until = 0;
            }
            f.first_sent_time = rec.sent_at;

            let rtt = now - rec.sent_at;
            let rtt_s = rtt.as_secs_f64();
            f.srtt = Some(match f.srtt {
                Some(s) => s + SRTT_GAIN * (rtt_s - s),
                None => rtt_s,
            });
            f.min_rtt = Some(f.min_rtt.map_or(rtt, |m| m.min(rtt)));

            let send_elapsed = rec.sent_at - rec.first_sent_time;
            let ack_elapsed = now - rec.delivered_time;
            let interval = send_elapsed.max(ack_elapsed);
            // intervals shorter than the path RTT overestimate bandwidth
            let delivery_rate = (!interval.is_zero() && f.min_rtt.is_some_and(|m| interval >= m))
                .then(|| (f.delivered - rec.delivered) as f64 * f.packet_bits / interval.as_secs_f64());

            let sample = AckSample {
                now,
                rtt,
                delivery_rate,
                delivered: f.delivered,
                prior_delivered: rec.delivered,
                is_app_limited: rec.app_limited,
                inflight: f.inflight,
            };
            self.controller.on_ack(flow, &sample);
        }
        self.try_send(now, flow)
    }

    fn on_retransmit_timer(&mut self, now: SimTime, flow: usize, tx: u64) -> Result<(), SimError> {
        let f = &mut self.flows[flow];
        if f.txs[tx as usize].state != TxState::Outstanding {
            return Ok(());
        }
        f.txs[tx as usize].state = TxState::Lost;
        f.inflight -= 1;
        let message = f.txs[tx as usize].message;
        if !f.messages[message as usize].acked {
            f.rtx_queue.push_back(message);
        }
        let inflight = f.inflight;
        self.controller.on_loss(flow, now, inflight);
        self.try_send(now, flow)
    }

    fn on_window_close(&mut self, now: SimTime) -> Result<(), SimError> {
        let rows = self.recorder.close_window(now).to_vec();
        self.controller.on_window_close(now, &rows);
        self.sched.schedule(
            now + self.recorder.window(),
            EventKind::TimerFire(Timer::WindowClose),
        )?;
        Ok(())
    }
}
