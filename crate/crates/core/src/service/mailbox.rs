use std::collections::VecDeque;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use super::protocol::Body;

/// A message on its way to one client, or to every client when `to` is
/// `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct Outbound {
    pub to: Option<u64>,
    pub time: f64,
    pub body: Body,
}

impl Outbound {
    pub fn all(time: f64, body: Body) -> Self {
        Self { to: None, time, body }
    }

    pub fn to(client: u64, time: f64, body: Body) -> Self {
        Self {
            to: Some(client),
            time,
            body,
        }
    }
}

#[derive(Debug, PartialEq)]
pub enum Pop {
    Message(Outbound),
    Empty,
    Closed,
}

#[derive(Debug, Default)]
struct State {
    queue: VecDeque<Outbound>,
    closed: bool,
    dropped: u64,
}

/// Bounded queue whose producer never blocks: when full, the oldest
/// periodic sample is evicted, or the oldest message if none is queued.
#[derive(Debug)]
pub struct Mailbox {
    capacity: usize,
    state: Mutex<State>,
    ready: Condvar,
}

impl Mailbox {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            state: Mutex::new(State::default()),
            ready: Condvar::new(),
        }
    }

    pub fn push(&self, msg: Outbound) {
        let mut s = self.state.lock().expect("mailbox lock");
        if s.closed {
            return;
        }
        if s.queue.len() >= self.capacity {
            let victim = s.queue.iter().position(|m| m.body.is_sample()).unwrap_or(0);
            s.queue.remove(victim);
            s.dropped += 1;
        }
        s.queue.push_back(msg);
        self.ready.notify_one();
    }

    /// Waits up to `timeout` for a message. A closed mailbox still hands
    /// out what it holds before reporting `Closed`.
    pub fn pop(&self, timeout: Duration) -> Pop {
        let s = self.state.lock().expect("mailbox lock");
        let (mut s, _) = self
            .ready
            .wait_timeout_while(s, timeout, |s| s.queue.is_empty() && !s.closed)
            .expect("mailbox lock");
        match s.queue.pop_front() {
            Some(m) => Pop::Message(m),
            None if s.closed => Pop::Closed,
            None => Pop::Empty,
        }
    }

    pub fn close(&self) {
        self.state.lock().expect("mailbox lock").closed = true;
        self.ready.notify_all();
    }

    pub fn is_empty(&self) -> bool {
        self.state.lock().expect("mailbox lock").queue.is_empty()
    }

    #[cfg(test)]
    pub fn dropped(&self) -> u64 {
        self.state.lock().expect("mailbox lock").dropped
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::service::protocol::FrameBody;

    fn sample(t: f64) -> Outbound {
        Outbound::all(
            t,
            Body::EventFrame(FrameBody {
                end_us: 0,
                window_us: 0,
                width: 0,
                height: 0,
                cells: vec![],
            }),
        )
    }

    fn event(t: f64) -> Outbound {
        Outbound::all(t, Body::Response { text: "r".into() })
    }

    fn drain(m: &Mailbox) -> Vec<f64> {
        let mut out = vec![];
        while let Pop::Message(msg) = m.pop(Duration::ZERO) {
            out.push(msg.time);
        }
        out
    }

    #[test]
    fn overflow_evicts_oldest_sample_first() {
        let m = Mailbox::new(3);
        m.push(event(0.0));
        m.push(sample(1.0));
        m.push(sample(2.0));
        m.push(event(3.0));
        assert_eq!(m.dropped(), 1);
        assert_eq!(drain(&m), vec![0.0, 2.0, 3.0]);
    }

    #[test]
    fn overflow_without_samples_evicts_oldest() {
        let m = Mailbox::new(2);
        for t in [0.0, 1.0, 2.0] {
            m.push(event(t));
        }
        assert_eq!(drain(&m), vec![1.0, 2.0]);
    }

    #[test]
    fn close_drains_then_reports_closed() {
        let m = Mailbox::new(4);
        m.push(event(0.0));
        m.close();
        m.push(event(1.0));
        assert!(matches!(m.pop(Duration::ZERO), Pop::Message(_)));
        assert_eq!(m.pop(Duration::from_millis(5)), Pop::Closed);
    }

    #[test]
    fn pop_times_out_when_idle() {
        let m = Mailbox::new(1);
        assert_eq!(m.pop(Duration::from_millis(2)), Pop::Empty);
    }
}
