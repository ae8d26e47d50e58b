use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Notification;

/// Outbound notification transport. Delivery is best-effort.
pub trait PushChannel: Send + Sync {
    fn push(&self, notification: Notification);
}

/// Keeps every notification in per-recipient inboxes.
#[derive(Debug, Default)]
pub struct MemoryPush {
    inboxes: Mutex<HashMap<String, Vec<Notification>>>,
    sent: Mutex<Vec<Notification>>,
}

impl MemoryPush {
    pub fn new() -> Self {
        Self::default()
    }

    /// Removes and returns the recipient's pending notifications.
    pub fn drain(&self, recipient: &str) -> Vec<Notification> {
        self.inboxes.lock().remove(recipient).unwrap_or_default()
    }

    /// Every notification pushed so far.
    pub fn sent(&self) -> Vec<Notification> {
        self.sent.lock().clone()
    }
}

impl PushChannel for MemoryPush {
    fn push(&self, n: Notification) {
        self.sent.lock().push(n.clone());
        self.inboxes.lock().entry(n.recipient.clone()).or_default().push(n);
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("conference provider: {0}")]
pub struct ProviderError(pub String);

/// What a conferencing provider returns for a new meeting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderMeeting {
    pub meeting_id: String,
    pub join_url: String,
}

pub trait ConferenceProvider: Send + Sync {
    /// Creates a recurring meeting without a fixed time.
    fn create_meeting(&self, topic: &str) -> Result<ProviderMeeting, ProviderError>;
}

/// In-process provider that counts create calls and can be told to fail.
#[derive(Debug, Default)]
pub struct SimulatedConference {
    creates: AtomicUsize,
    fail_next: AtomicBool,
}

impl SimulatedConference {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn create_calls(&self) -> usize {
        self.creates.load(Ordering::SeqCst)
    }

    pub fn fail_next(&self) {
        self.fail_next.store(true, Ordering::SeqCst);
    }
}

impl ConferenceProvider for SimulatedConference {
    fn create_meeting(&self, topic: &str) -> Result<ProviderMeeting, ProviderError> {
        let n = self.creates.fetch_add(1, Ordering::SeqCst) + 1;
        if self.fail_next.swap(false, Ordering::SeqCst) {
            return Err(ProviderError("simulated outage".into()));
        }
        // Widen the window in which concurrent callers could race.
        std::thread::yield_now();
        let meeting_id = format!("sim-{topic}-{n}");
        Ok(ProviderMeeting {
            join_url: format!("https://meet.invalid/j/{meeting_id}?recurring=1"),
            meeting_id,
        })
    }
}
