use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lane {
    Compute,
    Channel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateSlot {
    /// Routes the block it sits in.
    Conventional,
    /// Routes a block `L` positions later.
    Pre,
}

/// What a scheduled event does. Compute ops carry enough to replay the math.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Op {
    Head,
    Gate(GateSlot),
    Expert { expert: usize, weight: f64 },
    Dense,
    Transfer {
        /// Block whose experts move; may differ from the issuing block.
        target_block: usize,
        experts: Vec<usize>,
        bytes: u64,
        /// Fast-tier bytes once this transfer's destination is reserved.
        fast_bytes_after: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineEvent {
    pub lane: Lane,
    pub label: String,
    pub iteration: usize,
    /// Block the event belongs to; `None` for per-iteration events.
    pub block: Option<usize>,
    pub start: SimTime,
    pub end: SimTime,
    /// Earlier events on the other lane that had to finish first.
    pub deps: Vec<usize>,
    pub op: Op,
}

impl TimelineEvent {
    pub fn duration(&self) -> SimTime {
        self.end - self.start
    }
}

#[derive(Serialize)]
struct JsonEvent<'a> {
    lane: Lane,
    label: &'a str,
    block: Option<usize>,
    start_s: f64,
    end_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub events: Vec<TimelineEvent>,
}

impl Timeline {
    pub fn push(&mut self, event: TimelineEvent) -> usize {
        self.events.push(event);
        self.events.len() - 1
    }

    pub fn lane(&self, lane: Lane) -> impl Iterator<Item = (usize, &TimelineEvent)> {
        self.events.iter().enumerate().filter(move |(_, e)| e.lane == lane)
    }

    pub fn end(&self) -> SimTime {
        self.events.iter().map(|e| e.end).max().unwrap_or(SimTime::ZERO)
    }

    /// Same-lane events never overlap, run in issue order, and start only
    /// after their dependencies end; expert compute waits for its transfer.
    pub fn check(&self) -> Result<()> {
        for lane in [Lane::Compute, Lane::Channel] {
            let mut free = SimTime::ZERO;
            for (i, e) in self.lane(lane) {
                if e.end < e.start {
                    return Err(Error::Wiring(format!("event {i} ends before it starts")));
                }
                if e.start < free {
                    return Err(Error::Wiring(format!("event {i} ({}) overlaps its lane", e.label)));
                }
                free = e.end;
            }
        }
        for (i, e) in self.events.iter().enumerate() {
            for &d in &e.deps {
                let dep = self.events.get(d).ok_or_else(|| Error::Wiring(format!("event {i} has dangling dep")))?;
                if d >= i || dep.end > e.start {
                    return Err(Error::Wiring(format!("event {i} ({}) starts before dep {d} ends", e.label)));
                }
            }
            if let Op::Expert { expert, .. } = e.op {
                let block = e.block;
                let covered = self.events[..i].iter().any(|t| match &t.op {
                    Op::Transfer { target_block, experts, .. } => {
                        t.iteration == e.iteration
                            && Some(*target_block) == block
                            && experts.contains(&expert)
                            && t.end > e.start
                    }
                    _ => false,
                });
                if covered {
                    return Err(Error::Wiring(format!("expert event {i} starts before its transfer ends")));
                }
            }
        }
        Ok(())
    }

    /// One JSON object per line: `lane, label, block, start_s, end_s`.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for e in &self.events {
            let j = JsonEvent {
                lane: e.lane,
                label: &e.label,
                block: e.block,
                start_s: e.start.as_secs(),
                end_s: e.end.as_secs(),
            };
            serde_json::to_writer(&mut w, &j).map_err(|e| Error::Io(e.into()))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}
