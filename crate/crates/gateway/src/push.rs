use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use nora_core::chat::{Notification, PushChannel};
use parking_lot::Mutex;
use tokio::sync::mpsc::{unbounded_channel, UnboundedReceiver, UnboundedSender};

/// Routes notifications to the recipient's open WebSocket connections.
/// Each connection gets its own FIFO queue, so delivery on a connection
/// follows push order.
#[derive(Debug, Default)]
pub struct WsHub {
    conns: Mutex<HashMap<String, Vec<(u64, UnboundedSender<Notification>)>>>,
    next_id: AtomicU64,
}

impl WsHub {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn connect(&self, user: &str) -> (u64, UnboundedReceiver<Notification>) {
        let (tx, rx) = unbounded_channel();
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        self.conns.lock().entry(user.to_string()).or_default().push((id, tx));
        (id, rx)
    }

    pub fn disconnect(&self, user: &str, id: u64) {
        let mut conns = self.conns.lock();
        if let Some(v) = conns.get_mut(user) {
            v.retain(|(i, _)| *i != id);
            if v.is_empty() {
                conns.remove(user);
            }
        }
    }

    pub fn connections(&self, user: &str) -> usize {
        self.conns.lock().get(user).map_or(0, Vec::len)
    }
}

impl PushChannel for WsHub {
    fn push(&self, n: Notification) {
        let mut conns = self.conns.lock();
        if let Some(v) = conns.get_mut(&n.recipient) {
            v.retain(|(_, tx)| tx.send(n.clone()).is_ok());
        }
    }
}
