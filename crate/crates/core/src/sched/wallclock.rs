//! Real-time replay of a planned timeline on two OS threads.
//!
//! A compute worker and a transfer worker each walk their lane in order and
//! sleep for the scaled duration of every event. Cross-lane dependencies are
//! signalled over channels. If a transfer would push the fast tier past its
//! capacity, the transfer worker cancels the compute worker, which stops
//! before its next event.

use std::collections::HashSet;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use super::engine::{simulate, SimConfig, SimOutput};
use super::cost::Footprint;
use super::timeline::{Lane, Op, Timeline};
use crate::error::{Error, Result};
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallclockOptions {
    /// Real seconds slept per virtual second.
    pub scale: f64,
    /// Fast-tier capacity enforced during replay; defaults to the plan's tier.
    pub capacity: Option<u64>,
}

impl Default for WallclockOptions {
    fn default() -> Self {
        WallclockOptions { scale: 1.0, capacity: None }
    }
}

#[derive(Debug)]
pub struct WallclockOutput {
    pub events_done: usize,
    pub elapsed: Duration,
    /// The OOM that cancelled the run, if any.
    pub error: Option<Error>,
    /// Compute events that finished after cancellation was raised.
    pub compute_after_cancel: usize,
}

enum Msg {
    Done(usize),
    Cancel,
}

struct Shared {
    cancelled: AtomicBool,
    done: AtomicUsize,
    after_cancel: AtomicUsize,
}

/// Waits until every cross-lane dependency of an event has been reported.
/// Returns false if cancelled while waiting.
fn wait_deps(deps: &[usize], lane_of: &[Lane], mine: Lane, seen: &mut HashSet<usize>, inbox: &Receiver<Msg>) -> bool {
    for &d in deps {
        if lane_of[d] == mine {
            continue;
        }
        while !seen.contains(&d) {
            match inbox.recv() {
                Ok(Msg::Done(i)) => {
                    seen.insert(i);
                }
                Ok(Msg::Cancel) | Err(_) => return false,
            }
        }
    }
    true
}

fn worker(
    timeline: &Timeline,
    lane: Lane,
    scale: f64,
    capacity: u64,
    inbox: Receiver<Msg>,
    peer: Sender<Msg>,
    shared: &Shared,
) -> Option<Error> {
    let lane_of: Vec<Lane> = timeline.events.iter().map(|e| e.lane).collect();
    let mut seen = HashSet::new();
    for (idx, ev) in timeline.lane(lane) {
        // Drain notifications so a pending cancel is seen before starting work.
        while let Ok(msg) = inbox.try_recv() {
            match msg {
                Msg::Done(i) => {
                    seen.insert(i);
                }
                Msg::Cancel => return None,
            }
        }
        if !wait_deps(&ev.deps, &lane_of, lane, &mut seen, &inbox) {
            return None;
        }
        if let Op::Transfer { fast_bytes_after, .. } = ev.op {
            if fast_bytes_after > capacity {
                shared.cancelled.store(true, Ordering::SeqCst);
                let _ = peer.send(Msg::Cancel);
                return Some(Error::Oom { needed: fast_bytes_after, capacity });
            }
        }
        let was_cancelled = shared.cancelled.load(Ordering::SeqCst);
        thread::sleep(Duration::from_secs_f64(ev.duration().as_secs() * scale));
        shared.done.fetch_add(1, Ordering::SeqCst);
        if lane == Lane::Compute && (was_cancelled || shared.cancelled.load(Ordering::SeqCst)) {
            shared.after_cancel.fetch_add(1, Ordering::SeqCst);
        }
        let _ = peer.send(Msg::Done(idx));
    }
    None
}

/// Replays `timeline` in real time.
pub fn replay_wallclock(timeline: &Timeline, capacity: u64, scale: f64) -> Result<WallclockOutput> {
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(Error::InvalidConfig(format!("wallclock scale must be finite and non-negative, got {scale}")));
    }
    timeline.check()?;
    let shared = Arc::new(Shared {
        cancelled: AtomicBool::new(false),
        done: AtomicUsize::new(0),
        after_cancel: AtomicUsize::new(0),
    });
    let (to_compute, compute_inbox) = channel();
    let (to_channel, channel_inbox) = channel();
    let started = Instant::now();
    let error = thread::scope(|s| {
        let sh = &shared;
        let compute =
            s.spawn(move || worker(timeline, Lane::Compute, scale, capacity, compute_inbox, to_channel, sh));
        let transfer =
            s.spawn(move || worker(timeline, Lane::Channel, scale, capacity, channel_inbox, to_compute, sh));
        let a = compute.join().expect("compute worker panicked");
        let b = transfer.join().expect("transfer worker panicked");
        a.or(b)
    });
    Ok(WallclockOutput {
        events_done: shared.done.load(Ordering::SeqCst),
        elapsed: started.elapsed(),
        error,
        compute_after_cancel: shared.after_cancel.load(Ordering::SeqCst),
    })
}

/// Plans on the virtual clock, then replays the plan in real time.
pub fn run_wallclock(
    model: &ModelParams,
    footprint: &Footprint,
    sim: &SimConfig,
    input: &[f64],
    opts: WallclockOptions,
) -> Result<(SimOutput, WallclockOutput)> {
    let plan = simulate(model, footprint, sim, input)?;
    let capacity = opts.capacity.unwrap_or(sim.tier.fast_capacity);
    let report = replay_wallclock(&plan.timeline, capacity, opts.scale)?;
    Ok((plan, report))
}
