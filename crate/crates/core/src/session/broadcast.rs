use std::sync::Mutex;

use crossbeam_channel::{unbounded, Receiver, Sender};

use super::SessionEvent;

/// Fan-out of the ordered event stream to any number of subscribers.
/// Subscribers that hang up are dropped on the next send.
#[derive(Debug, Default)]
pub struct Broadcaster {
    subscribers: Mutex<Vec<Sender<SessionEvent>>>,
}

impl Broadcaster {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn subscribe(&self) -> Receiver<SessionEvent> {
        let (tx, rx) = unbounded();
        self.subscribers.lock().expect("broadcaster lock").push(tx);
        rx
    }

    pub fn send(&self, event: &SessionEvent) {
        self.subscribers
            .lock()
            .expect("broadcaster lock")
            .retain(|s| s.send(event.clone()).is_ok());
    }

    pub fn subscriber_count(&self) -> usize {
        self.subscribers.lock().expect("broadcaster lock").len()
    }
}
