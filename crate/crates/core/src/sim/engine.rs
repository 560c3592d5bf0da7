use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Arc, Flow, Multipath, RoutingTable, SimConfig, Topology};
use crate::Result;

#[derive(Debug, Clone, Copy)]
struct Packet {
    flow: u32,
    born: f64,
    queued: f64,
    /// Propagation plus transmission time of the arcs traversed so far.
    bound: f64,
    counted: bool,
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Generate(u32),
    TxDone(u32),
    Arrive(Packet, u32),
}

struct Event {
    t: f64,
    seq: u64,
    kind: Kind,
}

impl PartialEq for Event {
    fn eq(&self, o: &Self) -> bool {
        self.t == o.t && self.seq == o.seq
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Event {
    fn cmp(&self, o: &Self) -> Ordering {
        o.t.total_cmp(&self.t).then(o.seq.cmp(&self.seq))
    }
}

#[derive(Default)]
struct ArcState {
    busy: Option<Packet>,
    queue: VecDeque<(Packet, f64)>,
    busy_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowResult {
    pub src: usize,
    pub dst: usize,
    pub gbps: f64,
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub in_flight: u64,
    pub mean_delay_ms: f64,
    pub max_delay_ms: f64,
    pub mean_queuing_ms: f64,
    pub loss: f64,
    #[serde(skip)]
    delay_sum: f64,
    #[serde(skip)]
    queuing_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub flows: Vec<FlowResult>,
    /// Busy fraction of each arc over the measured window.
    pub arc_utilization: Vec<f64>,
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub in_flight: u64,
    pub mean_delay_ms: f64,
    pub mean_queuing_ms: f64,
    pub loss_rate: f64,
    /// Packets delivered faster than their path's propagation plus
    /// transmission time. Always zero.
    pub bound_violations: u64,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

struct Sim<'a> {
    cfg: &'a SimConfig,
    arcs: Vec<Arc>,
    tx_s: Vec<f64>,
    table: &'a RoutingTable,
    flows: &'a [Flow],
    state: Vec<ArcState>,
    heap: BinaryHeap<Event>,
    seq: u64,
    rng: ChaCha8Rng,
    warmup: f64,
    end: f64,
    out: Vec<FlowResult>,
    violations: u64,
}

impl Sim<'_> {
    fn push(&mut self, t: f64, kind: Kind) {
        self.seq += 1;
        self.heap.push(Event { t, seq: self.seq, kind });
    }

    fn pick(&mut self, p: &Packet, node: usize) -> usize {
        let hops = self.table.next_hops(node, self.flows[p.flow as usize].dst);
        if hops.len() == 1 {
            return hops[0].0;
        }
        let u: f64 = match self.cfg.multipath {
            Multipath::PerPacket => self.rng.gen(),
            Multipath::PerFlow => {
                let h = splitmix(self.cfg.seed ^ (u64::from(p.flow) << 32 | node as u64));
                (h >> 11) as f64 / (1u64 << 53) as f64
            }
        };
        let mut acc = 0.0;
        for &(a, w) in hops {
            acc += w;
            if u < acc {
                return a;
            }
        }
        hops.last().expect("routing table covers every reachable node").0
    }

    fn start_tx(&mut self, a: usize, p: Packet, t: f64) {
        let tx = self.tx_s[a];
        let overlap = (t + tx).min(self.end) - t.max(self.warmup);
        if overlap > 0.0 {
            self.state[a].busy_s += overlap;
        }
        self.state[a].busy = Some(p);
        self.push(t + tx, Kind::TxDone(a as u32));
    }

    fn forward(&mut self, p: Packet, node: usize, t: f64) {
        let f = p.flow as usize;
        if node == self.flows[f].dst {
            if p.counted {
                let delay = t - p.born;
                if delay < p.bound * (1.0 - 1e-12) {
                    self.violations += 1;
                }
                let r = &mut self.out[f];
                r.in_flight -= 1;
                r.delivered += 1;
                r.delay_sum += delay;
                r.queuing_sum += p.queued;
                r.max_delay_ms = r.max_delay_ms.max(delay * 1e3);
            }
            return;
        }
        let a = self.pick(&p, node);
        if self.state[a].busy.is_none() {
            self.start_tx(a, p, t);
        } else if self.state[a].queue.len() < self.cfg.queue_capacity_packets {
            self.state[a].queue.push_back((p, t));
        } else if p.counted {
            let r = &mut self.out[f];
            r.in_flight -= 1;
            r.dropped += 1;
        }
    }

    fn step(&mut self, ev: Event) {
        let t = ev.t;
        match ev.kind {
            Kind::Generate(f) => {
                let flow = self.flows[f as usize];
                let p = Packet {
                    flow: f,
                    born: t,
                    queued: 0.0,
                    bound: 0.0,
                    counted: t >= self.warmup,
                };
                if p.counted {
                    let r = &mut self.out[f as usize];
                    r.sent += 1;
                    r.in_flight += 1;
                }
                self.forward(p, flow.src, t);
                let next = t + f64::from(self.cfg.packet_bytes) * 8.0 / (flow.gbps * 1e9);
                if next < self.end {
                    self.push(next, Kind::Generate(f));
                }
            }
            Kind::TxDone(a) => {
                let a = a as usize;
                let mut p = self.state[a].busy.take().expect("transmission in progress");
                p.bound += self.tx_s[a] + self.arcs[a].prop_s;
                let to = self.arcs[a].to as u32;
                self.push(t + self.arcs[a].prop_s, Kind::Arrive(p, to));
                if let Some((mut q, enq)) = self.state[a].queue.pop_front() {
                    q.queued += t - enq;
                    self.start_tx(a, q, t);
                }
            }
            Kind::Arrive(p, node) => self.forward(p, node as usize, t),
        }
    }
}

/// Event-driven simulation of constant-rate flows over drop-tail FIFO
/// arcs. Statistics cover packets generated after the warm-up window.
pub fn run(topo: &Topology, flows: &[Flow], table: &RoutingTable, cfg: &SimConfig) -> Result<SimStats> {
    cfg.validate()?;
    topo.validate()?;
    let arcs = topo.arcs();
    let bits = f64::from(cfg.packet_bytes) * 8.0;
    let mut sim = Sim {
        cfg,
        tx_s: arcs.iter().map(|a| bits / (a.capacity_gbps * 1e9)).collect(),
        state: arcs.iter().map(|_| ArcState::default()).collect(),
        arcs,
        table,
        flows,
        heap: BinaryHeap::new(),
        seq: 0,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        warmup: cfg.sim_seconds * cfg.warmup_fraction,
        end: cfg.sim_seconds,
        out: flows
            .iter()
            .map(|f| FlowResult {
                src: f.src,
                dst: f.dst,
                gbps: f.gbps,
                ..Default::default()
            })
            .collect(),
        violations: 0,
    };
    for (k, f) in flows.iter().enumerate() {
        if f.gbps <= 0.0 {
            continue;
        }
        let interval = bits / (f.gbps * 1e9);
        let phase = sim.rng.gen::<f64>() * interval;
        if phase < sim.end {
            sim.push(phase, Kind::Generate(k as u32));
        }
    }
    while let Some(ev) = sim.heap.pop() {
        if ev.t > sim.end {
            break;
        }
        sim.step(ev);
    }
    let window = sim.end - sim.warmup;
    let arc_utilization = sim.state.iter().map(|s| (s.busy_s / window).min(1.0)).collect();
    let mut flows_out = sim.out;
    let (mut sent, mut delivered, mut dropped, mut in_flight) = (0, 0, 0, 0);
    let (mut delay_sum, mut queuing_sum) = (0.0, 0.0);
    for r in &mut flows_out {
        if r.delivered > 0 {
            r.mean_delay_ms = r.delay_sum / r.delivered as f64 * 1e3;
            r.mean_queuing_ms = r.queuing_sum / r.delivered as f64 * 1e3;
        }
        if r.sent > 0 {
            r.loss = r.dropped as f64 / r.sent as f64;
        }
        sent += r.sent;
        delivered += r.delivered;
        dropped += r.dropped;
        in_flight += r.in_flight;
        delay_sum += r.delay_sum;
        queuing_sum += r.queuing_sum;
    }
    let per = |x: f64| if delivered > 0 { x / delivered as f64 * 1e3 } else { 0.0 };
    Ok(SimStats {
        flows: flows_out,
        arc_utilization,
        sent,
        delivered,
        dropped,
        in_flight,
        mean_delay_ms: per(delay_sum),
        mean_queuing_ms: per(queuing_sum),
        loss_rate: if sent > 0 { dropped as f64 / sent as f64 } else { 0.0 },
        bound_violations: sim.violations,
    })
}

impl SimStats {
    /// CSV `link,from,to,utilization` over arcs.
    pub fn write_utilization_csv<W: std::io::Write>(&self, topo: &Topology, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["link", "from", "to", "medium", "capacity_gbps", "utilization"])?;
        for (a, u) in topo.arcs().iter().zip(&self.arc_utilization) {
            let l = &topo.links[a.link];
            w.write_record([
                a.link.to_string(),
                topo.nodes[a.from].clone(),
                topo.nodes[a.to].clone(),
                l.medium.to_string(),
                l.capacity_gbps.to_string(),
                u.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// CSV of per-flow results.
    pub fn write_flows_csv<W: std::io::Write>(&self, topo: &Topology, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "src",
            "dst",
            "gbps",
            "sent",
            "delivered",
            "dropped",
            "in_flight",
            "mean_delay_ms",
            "max_delay_ms",
            "mean_queuing_ms",
            "loss",
        ])?;
        for f in &self.flows {
            w.write_record([
                topo.nodes[f.src].clone(),
                topo.nodes[f.dst].clone(),
                f.gbps.to_string(),
                f.sent.to_string(),
                f.delivered.to_string(),
                f.dropped.to_string(),
                f.in_flight.to_string(),
                f.mean_delay_ms.to_string(),
                f.max_delay_ms.to_string(),
                f.mean_queuing_ms.to_string(),
                f.loss.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
