//! User-to-user chat: contacts, direct messages, anonymous topic threads,
//! reports and per-topic group meetings.
//!
//! Delivery is notify-then-sync. Posting stores the message first, then
//! pushes a [`Notification`] that names only the conversation and the
//! newest id. Clients fetch bodies with [`ChatService::sync`] from their
//! last-seen id, so a lost or repeated notification never loses or
//! duplicates a message.
//!
//! Message ids are dense per conversation: an append claims id `n` with a
//! create-only write of key `<conversation>#<n>`, retrying with `n + 1`
//! when another writer got there first.

mod provider;
mod pseudonym;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use provider::{
    ConferenceProvider, MemoryPush, PushChannel, ProviderError, ProviderMeeting, SimulatedConference,
};
pub use pseudonym::pseudonym;

use crate::clock::{system_clock, Clock};
use crate::error::ErrorKind;
use crate::profile::{self, ProfileError};
use crate::store::{collections, modify, DocumentStore, DocumentStoreExt, Order, Query, StoreError};

pub const MAX_BODY_CHARS: usize = 4000;

#[derive(Debug, Error)]
pub enum ChatError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("forbidden: {0}")]
    Forbidden(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl ChatError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            ChatError::InvalidInput(_) => ErrorKind::InvalidInput,
            ChatError::NotFound(_) => ErrorKind::NotFound,
            ChatError::Forbidden(_) => ErrorKind::Forbidden,
            ChatError::Provider(_) => ErrorKind::Provider,
            ChatError::Store(e) => e.kind(),
        }
    }
}

impl From<ProfileError> for ChatError {
    fn from(e: ProfileError) -> Self {
        match e {
            ProfileError::NotFound(u) => ChatError::NotFound(format!("user `{u}`")),
            ProfileError::Store(s) => ChatError::Store(s),
            other => ChatError::InvalidInput(other.to_string()),
        }
    }
}

/// A direct conversation between two users or a topic thread.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConversationRef {
    /// Members in sorted order.
    Direct { members: [String; 2] },
    Topic { topic: String },
}

impl ConversationRef {
    pub fn direct(a: &str, b: &str) -> Self {
        let mut members = [a.to_string(), b.to_string()];
        members.sort();
        ConversationRef::Direct { members }
    }

    pub fn topic(topic: &str) -> Self {
        ConversationRef::Topic {
            topic: topic.to_string(),
        }
    }

    pub fn is_topic(&self) -> bool {
        matches!(self, ConversationRef::Topic { .. })
    }
}

/// `direct:<a>|<b>` or `topic:<id>`.
impl fmt::Display for ConversationRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConversationRef::Direct { members } => write!(f, "direct:{}|{}", members[0], members[1]),
            ConversationRef::Topic { topic } => write!(f, "topic:{topic}"),
        }
    }
}

impl FromStr for ConversationRef {
    type Err = ChatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ChatError::InvalidInput(format!("bad conversation id `{s}`"));
        if let Some(rest) = s.strip_prefix("direct:") {
            let (a, b) = rest.split_once('|').ok_or_else(bad)?;
            if a.is_empty() || b.is_empty() || a == b {
                return Err(bad());
            }
            return Ok(ConversationRef::direct(a, b));
        }
        match s.strip_prefix("topic:") {
            Some(t) if !t.is_empty() => Ok(ConversationRef::topic(t)),
            _ => Err(bad()),
        }
    }
}

/// A message as delivered to clients. In topic threads `sender` is the
/// poster's pseudonym.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub id: u64,
    pub conversation: ConversationRef,
    pub sender: String,
    pub body: String,
    pub sent_at: u64,
}

/// "Something new in this conversation"; bodies travel only via sync.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Notification {
    pub recipient: String,
    pub conversation: ConversationRef,
    pub hint: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncCursor {
    pub user: String,
    pub conversation: ConversationRef,
    pub last_seen: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncResult {
    pub messages: Vec<ChatMessage>,
    pub cursor: SyncCursor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contact {
    pub user: String,
    pub alias: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubscriptionDiff {
    pub added: Vec<String>,
    pub removed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicDef {
    pub id: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeetingCredentials {
    pub topic: String,
    pub join_url: String,
    pub provider_meeting_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub reporter: String,
    pub conversation: ConversationRef,
    pub message_id: u64,
    pub reason: String,
    pub created_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatConfig {
    pub topics: Vec<TopicDef>,
    /// Keys topic pseudonyms.
    pub pseudonym_salt: String,
}

impl Default for ChatConfig {
    fn default() -> Self {
        Self {
            topics: [("movies", "Movies"), ("cooking", "Cooking"), ("music", "Music")]
                .into_iter()
                .map(|(id, name)| TopicDef {
                    id: id.into(),
                    name: name.into(),
                })
                .collect(),
            pseudonym_salt: "nora".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StoredMessage {
    conversation: String,
    id: u64,
    message: ChatMessage,
    /// Account id of the poster, never sent to clients.
    author: String,
    #[serde(default)]
    flagged: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct ContactList {
    contacts: BTreeSet<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct TopicDoc {
    subscribers: BTreeSet<String>,
}

fn message_key(conversation: &str, id: u64) -> String {
    format!("{conversation}#{id:012}")
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, StoreError> {
    Ok(serde_json::to_value(v)?)
}

fn from_value<T: serde::de::DeserializeOwned + Default>(v: Option<&Value>) -> Result<T, StoreError> {
    match v {
        Some(v) => Ok(serde_json::from_value(v.clone())?),
        None => Ok(T::default()),
    }
}

pub struct ChatService {
    store: Arc<dyn DocumentStore>,
    push: Arc<dyn PushChannel>,
    conference: Arc<dyn ConferenceProvider>,
    config: ChatConfig,
    clock: Clock,
    /// Last id known per conversation, a hint for the next append.
    heads: Mutex<HashMap<String, u64>>,
    meeting_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl fmt::Debug for ChatService {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChatService").field("config", &self.config).finish_non_exhaustive()
    }
}

impl ChatService {
    pub fn new(
        store: Arc<dyn DocumentStore>,
        push: Arc<dyn PushChannel>,
        conference: Arc<dyn ConferenceProvider>,
        config: ChatConfig,
    ) -> Self {
        Self {
            store,
            push,
            conference,
            config,
            clock: system_clock(),
            heads: Mutex::new(HashMap::new()),
            meeting_locks: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn topics(&self) -> &[TopicDef] {
        &self.config.topics
    }

    fn require_topic(&self, topic: &str) -> Result<(), ChatError> {
        if self.config.topics.iter().any(|t| t.id == topic) {
            Ok(())
        } else {
            Err(ChatError::NotFound(format!("topic `{topic}`")))
        }
    }

    // Contacts

    /// Makes `user` and the owner of `alias` contacts of each other.
    pub fn add_friend(&self, user: &str, alias: &str) -> Result<Contact, ChatError> {
        profile::require(&*self.store, user)?;
        let other = profile::by_alias(&*self.store, alias)?
            .ok_or_else(|| ChatError::NotFound(format!("alias `{alias}`")))?;
        if other.id == user {
            return Err(ChatError::InvalidInput("cannot add yourself".into()));
        }
        for (owner, added) in [(user, other.id.as_str()), (other.id.as_str(), user)] {
            modify(&*self.store, collections::CONTACTS, owner, |cur| {
                let mut list: ContactList = from_value(cur)?;
                list.contacts.insert(added.to_string());
                to_value(&list)
            })?;
        }
        Ok(Contact {
            user: other.id,
            alias: other.alias,
        })
    }

    fn contact_ids(&self, user: &str) -> Result<BTreeSet<String>, ChatError> {
        let doc = self.store.get(collections::CONTACTS, user)?;
        Ok(from_value::<ContactList>(doc.as_ref().map(|d| &d.body))?.contacts)
    }

    pub fn contacts(&self, user: &str) -> Result<Vec<Contact>, ChatError> {
        let mut out = Vec::new();
        for id in self.contact_ids(user)? {
            if let Some(p) = profile::get(&*self.store, &id)? {
                out.push(Contact { user: p.id, alias: p.alias });
            }
        }
        Ok(out)
    }

    // Topics

    fn subscribers(&self, topic: &str) -> Result<BTreeSet<String>, ChatError> {
        let doc = self.store.get(collections::TOPICS, topic)?;
        Ok(from_value::<TopicDoc>(doc.as_ref().map(|d| &d.body))?.subscribers)
    }

    /// Topics the user is subscribed to, in catalog order.
    pub fn interests(&self, user: &str) -> Result<Vec<String>, ChatError> {
        let mut out = Vec::new();
        for t in &self.config.topics {
            if self.subscribers(&t.id)?.contains(user) {
                out.push(t.id.clone());
            }
        }
        Ok(out)
    }

    /// Subscribes the user to exactly `topics`.
    pub fn set_interests(&self, user: &str, topics: &[String]) -> Result<SubscriptionDiff, ChatError> {
        profile::require(&*self.store, user)?;
        for t in topics {
            if !self.config.topics.iter().any(|d| &d.id == t) {
                return Err(ChatError::InvalidInput(format!("unknown topic `{t}`")));
            }
        }
        let mut diff = SubscriptionDiff::default();
        for def in &self.config.topics {
            let want = topics.contains(&def.id);
            let mut changed = false;
            modify(&*self.store, collections::TOPICS, &def.id, |cur| {
                let mut doc: TopicDoc = from_value(cur)?;
                changed = if want {
                    doc.subscribers.insert(user.to_string())
                } else {
                    doc.subscribers.remove(user)
                };
                to_value(&doc)
            })?;
            if changed {
                if want {
                    diff.added.push(def.id.clone());
                } else {
                    diff.removed.push(def.id.clone());
                }
            }
        }
        Ok(diff)
    }

    // Messages

    fn is_member(&self, user: &str, conv: &ConversationRef) -> Result<bool, ChatError> {
        match conv {
            ConversationRef::Direct { members } => Ok(members.iter().any(|m| m == user)),
            ConversationRef::Topic { topic } => Ok(self.subscribers(topic)?.contains(user)),
        }
    }

    fn head(&self, conversation: &str) -> Result<u64, ChatError> {
        if let Some(h) = self.heads.lock().get(conversation) {
            return Ok(*h);
        }
        let q = Query::new().eq("conversation", conversation).order_by("id", Order::Desc);
        let newest = self
            .store
            .query(collections::MESSAGES, &q)?
            .first()
            .and_then(|d| d.body.get("id").and_then(Value::as_u64))
            .unwrap_or(0);
        let mut heads = self.heads.lock();
        let h = heads.entry(conversation.to_string()).or_insert(newest);
        *h = (*h).max(newest);
        Ok(*h)
    }

    fn append(&self, conv: &ConversationRef, author: &str, shown_as: &str, body: &str) -> Result<u64, ChatError> {
        if body.trim().is_empty() {
            return Err(ChatError::InvalidInput("message body is empty".into()));
        }
        if body.chars().count() > MAX_BODY_CHARS {
            return Err(ChatError::InvalidInput(format!("message longer than {MAX_BODY_CHARS} characters")));
        }
        let cid = conv.to_string();
        let mut id = self.head(&cid)?;
        loop {
            id += 1;
            let stored = StoredMessage {
                conversation: cid.clone(),
                id,
                message: ChatMessage {
                    id,
                    conversation: conv.clone(),
                    sender: shown_as.to_string(),
                    body: body.to_string(),
                    sent_at: (self.clock)(),
                },
                author: author.to_string(),
                flagged: false,
            };
            match self
                .store
                .compare_and_put(collections::MESSAGES, &message_key(&cid, id), 0, to_value(&stored)?)
            {
                Ok(_) => {
                    let mut heads = self.heads.lock();
                    let h = heads.entry(cid).or_insert(id);
                    *h = (*h).max(id);
                    return Ok(id);
                }
                Err(StoreError::Conflict { .. }) => continue,
                Err(e) => return Err(e.into()),
            }
        }
    }

    /// Stores a direct message, then notifies the receiver.
    pub fn send_direct(&self, sender: &str, receiver: &str, body: &str) -> Result<u64, ChatError> {
        if !self.contact_ids(sender)?.contains(receiver) {
            return Err(ChatError::Forbidden(format!("`{receiver}` is not a contact")));
        }
        let conv = ConversationRef::direct(sender, receiver);
        let id = self.append(&conv, sender, sender, body)?;
        self.push.push(Notification {
            recipient: receiver.to_string(),
            conversation: conv,
            hint: id,
        });
        Ok(id)
    }

    /// Stores a topic post under the poster's pseudonym, then notifies every
    /// current subscriber except the poster.
    pub fn post_topic(&self, user: &str, topic: &str, body: &str) -> Result<u64, ChatError> {
        self.require_topic(topic)?;
        let conv = ConversationRef::topic(topic);
        if !self.subscribers(topic)?.contains(user) {
            return Err(ChatError::Forbidden(format!("not subscribed to `{topic}`")));
        }
        let name = pseudonym(&self.config.pseudonym_salt, topic, user);
        let id = self.append(&conv, user, &name, body)?;
        for r in self.subscribers(topic)? {
            if r != user {
                self.push.push(Notification {
                    recipient: r,
                    conversation: conv.clone(),
                    hint: id,
                });
            }
        }
        Ok(id)
    }

    fn load(&self, cid: &str, id: u64) -> Result<Option<(StoredMessage, u64)>, ChatError> {
        Ok(self.store.get_as(collections::MESSAGES, &message_key(cid, id))?)
    }

    /// Messages after `last_seen`, in id order.
    pub fn sync(&self, user: &str, conversation: &ConversationRef, last_seen: u64) -> Result<SyncResult, ChatError> {
        if let ConversationRef::Topic { topic } = conversation {
            self.require_topic(topic)?;
        }
        if !self.is_member(user, conversation)? {
            return Err(ChatError::Forbidden(format!("not a member of {conversation}")));
        }
        let cid = conversation.to_string();
        if last_seen > 0 && self.load(&cid, last_seen)?.is_none() {
            return Err(ChatError::InvalidInput(format!("cursor {last_seen} is ahead of the log")));
        }
        let mut messages = Vec::new();
        let mut next = last_seen + 1;
        while let Some((m, _)) = self.load(&cid, next)? {
            messages.push(m.message);
            next += 1;
        }
        Ok(SyncResult {
            cursor: SyncCursor {
                user: user.to_string(),
                conversation: conversation.clone(),
                last_seen: next - 1,
            },
            messages,
        })
    }

    /// Conversations the user can sync: one per contact plus subscribed topics.
    pub fn conversations(&self, user: &str) -> Result<Vec<ConversationRef>, ChatError> {
        let mut out: Vec<_> = self
            .contact_ids(user)?
            .iter()
            .map(|c| ConversationRef::direct(user, c))
            .collect();
        out.extend(self.interests(user)?.iter().map(|t| ConversationRef::topic(t)));
        Ok(out)
    }

    // Reports and meetings

    /// Records a report and flags the message. Repeating a report returns
    /// the original record.
    pub fn report_message(
        &self,
        user: &str,
        conversation: &ConversationRef,
        message_id: u64,
        reason: &str,
    ) -> Result<ReportRecord, ChatError> {
        let not_found = || ChatError::NotFound(format!("message {message_id} in {conversation}"));
        let readable = match conversation {
            ConversationRef::Topic { topic } => {
                self.config.topics.iter().any(|t| &t.id == topic) && self.is_member(user, conversation)?
            }
            ConversationRef::Direct { .. } => self.is_member(user, conversation)?,
        };
        if !readable {
            return Err(not_found());
        }
        let cid = conversation.to_string();
        if self.load(&cid, message_id)?.is_none() {
            return Err(not_found());
        }
        let record = ReportRecord {
            reporter: user.to_string(),
            conversation: conversation.clone(),
            message_id,
            reason: reason.to_string(),
            created_at: (self.clock)(),
        };
        let key = format!("{user}@{}", message_key(&cid, message_id));
        let record = match self.store.compare_and_put(collections::REPORTS, &key, 0, to_value(&record)?) {
            Ok(_) => record,
            Err(StoreError::Conflict { .. }) => self
                .store
                .get_as::<ReportRecord>(collections::REPORTS, &key)?
                .map(|(r, _)| r)
                .ok_or_else(not_found)?,
            Err(e) => return Err(e.into()),
        };
        modify(&*self.store, collections::MESSAGES, &message_key(&cid, message_id), |cur| {
            let mut m: StoredMessage = serde_json::from_value(cur.cloned().unwrap_or(Value::Null))?;
            m.flagged = true;
            to_value(&m)
        })?;
        Ok(record)
    }

    pub fn reports_by(&self, user: &str) -> Result<Vec<ReportRecord>, ChatError> {
        Ok(self
            .store
            .query_as(collections::REPORTS, &Query::new().eq("reporter", user))?)
    }

    pub fn is_flagged(&self, conversation: &ConversationRef, message_id: u64) -> Result<bool, ChatError> {
        Ok(self
            .load(&conversation.to_string(), message_id)?
            .is_some_and(|(m, _)| m.flagged))
    }

    /// Join URL of the topic's standing meeting, creating it with the
    /// provider on first use. Concurrent first calls create it once.
    pub fn get_or_create_meeting(&self, topic: &str) -> Result<MeetingCredentials, ChatError> {
        self.require_topic(topic)?;
        if let Some((c, _)) = self.store.get_as(collections::MEETINGS, topic)? {
            return Ok(c);
        }
        let lock = self
            .meeting_locks
            .lock()
            .entry(topic.to_string())
            .or_insert_with(|| Arc::new(Mutex::new(())))
            .clone();
        let _guard = lock.lock();
        if let Some((c, _)) = self.store.get_as(collections::MEETINGS, topic)? {
            return Ok(c);
        }
        let m = self.conference.create_meeting(topic)?;
        let creds = MeetingCredentials {
            topic: topic.to_string(),
            join_url: m.join_url,
            provider_meeting_id: m.meeting_id,
        };
        match self.store.compare_and_put(collections::MEETINGS, topic, 0, to_value(&creds)?) {
            Ok(_) => Ok(creds),
            // Another process stored one first; theirs wins.
            Err(StoreError::Conflict { .. }) => Ok(self
                .store
                .get_as(collections::MEETINGS, topic)?
                .map(|(c, _)| c)
                .unwrap_or(creds)),
            Err(e) => Err(e.into()),
        }
    }
}

#[cfg(test)]
mod tests;
