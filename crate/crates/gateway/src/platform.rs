//! Everything the HTTP surface exposes, as plain synchronous calls on one
//! in-process instance.

use std::collections::HashMap;
use std::sync::Arc;

use nora_core::chat::{
    ChatService, ConferenceProvider, Contact, ConversationRef, MeetingCredentials, MemoryPush, PushChannel,
    ReportRecord, SimulatedConference, SubscriptionDiff, SyncResult, TopicDef,
};
use nora_core::clock::{system_clock, Clock};
use nora_core::config::PlatformConfig;
use nora_core::dialogue::session::{
    advance_session, close_session, load_session, open_session, sessions, start_session, summaries,
    SessionSummary,
};
use nora_core::dialogue::{ActivityPreferences, BotResponse, DialogueEngine, Directive, Phase, SessionState};
use nora_core::empathy::{AudioFeatures, EmotionDistribution, EmpathyScores, EmpathyService};
use nora_core::nlu::{classify, InputSource, IntentFrame, Ruleset, Utterance};
use nora_core::profile::{self, Program, UserProfile};
use nora_core::screening::{history, HealthRecord};
use nora_core::store::{DocumentStore, MemoryStore};
use nora_core::{ErrorKind, Language};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::auth::{hash_password, validate_password, verify_password, AuthToken, TokenStore};
use crate::error::{GatewayError, GatewayResult};
use crate::speech::{Passthrough, SpeechAdapter};

/// Text the transcript records for the console's continue button.
pub const RESUME_TEXT: &str = "[continue]";

// Requests

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterRequest {
    pub alias: String,
    pub password: String,
    #[serde(default)]
    pub language: Language,
    #[serde(default)]
    pub program: Option<Program>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoginRequest {
    pub alias: String,
    pub password: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AudioInput {
    /// Raw audio for the speech adapter.
    pub data: Vec<u8>,
    /// Acoustic summary for emotion scoring, when the client computed one.
    #[serde(default)]
    pub features: Option<AudioFeatures>,
}

/// Exactly one of `text` and `audio`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurnRequest {
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub audio: Option<AudioInput>,
}

impl TurnRequest {
    pub fn text(t: impl Into<String>) -> Self {
        Self {
            text: Some(t.into()),
            audio: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileUpdate {
    #[serde(default)]
    pub language: Option<Language>,
    #[serde(default)]
    pub program: Option<Program>,
    #[serde(default)]
    pub activity: Option<ActivityPreferences>,
}

// Responses

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublicProfile {
    pub id: String,
    pub alias: String,
    pub language: Language,
    pub program: Program,
    pub activity: ActivityPreferences,
    pub interests: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReply {
    pub day: u32,
    pub phase: Phase,
    pub response: BotResponse,
    /// Present on the turn that ended the session.
    pub summary: Option<SessionSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnReply {
    pub day: u32,
    pub phase: Phase,
    pub transcript: String,
    pub frame: IntentFrame,
    pub scores: EmpathyScores,
    pub response: BotResponse,
    pub summary: Option<SessionSummary>,
    /// Synthesized reply, for audio turns.
    pub speech: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayProgress {
    pub day: u32,
    pub health: HealthRecord,
    pub sentiment: Option<f64>,
    pub stress: Option<f64>,
    pub emotion: Option<EmotionDistribution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub program: Program,
    pub days: Vec<DayProgress>,
}

/// Pluggable collaborators of a platform instance.
#[derive(Clone)]
pub struct Services {
    pub store: Arc<dyn DocumentStore>,
    pub push: Arc<dyn PushChannel>,
    pub conference: Arc<dyn ConferenceProvider>,
    pub speech: Arc<dyn SpeechAdapter>,
    pub clock: Clock,
}

impl Services {
    /// Memory store, the given push channel, simulated conferencing and
    /// passthrough speech.
    pub fn in_memory(push: Arc<dyn PushChannel>) -> Self {
        Self {
            store: Arc::new(MemoryStore::platform()),
            push,
            conference: Arc::new(SimulatedConference::new()),
            speech: Arc::new(Passthrough),
            clock: system_clock(),
        }
    }
}

impl Default for Services {
    fn default() -> Self {
        Self::in_memory(Arc::new(MemoryPush::new()))
    }
}

pub struct Platform {
    config: PlatformConfig,
    store: Arc<dyn DocumentStore>,
    rules: HashMap<Language, Ruleset>,
    empathy: EmpathyService,
    engine: DialogueEngine,
    chat: ChatService,
    speech: Arc<dyn SpeechAdapter>,
    tokens: TokenStore,
    session_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl std::fmt::Debug for Platform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Platform").field("config", &self.config).finish_non_exhaustive()
    }
}

impl Platform {
    pub fn new(config: PlatformConfig, services: Services) -> GatewayResult<Self> {
        config.validate()?;
        let mut rules = HashMap::new();
        for lang in Language::ALL {
            rules.insert(lang, config.ruleset(lang)?);
        }
        let empathy = EmpathyService::with_lexicons(Arc::new(config.lexicons()?), &config.empathy);
        let engine = config.dialogue_engine()?;
        let chat = ChatService::new(
            services.store.clone(),
            services.push,
            services.conference,
            config.chat(),
        )
        .with_clock(services.clock.clone());
        Ok(Self {
            tokens: TokenStore::new(config.token_ttl_secs.saturating_mul(1000), services.clock),
            store: services.store,
            speech: services.speech,
            rules,
            empathy,
            engine,
            chat,
            config,
            session_locks: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &PlatformConfig {
        &self.config
    }

    pub fn store(&self) -> &Arc<dyn DocumentStore> {
        &self.store
    }

    pub fn engine(&self) -> &DialogueEngine {
        &self.engine
    }

    pub fn empathy(&self) -> &EmpathyService {
        &self.empathy
    }

    pub fn chat(&self) -> &ChatService {
        &self.chat
    }

    pub fn ruleset(&self, lang: Language) -> &Ruleset {
        &self.rules[&lang]
    }

    // Accounts

    pub fn register(&self, req: &RegisterRequest) -> GatewayResult<AuthToken> {
        validate_password(&req.password)?;
        let p = UserProfile {
            id: uuid::Uuid::new_v4().to_string(),
            alias: req.alias.trim().to_string(),
            language: req.language,
            program: req.program.clone().unwrap_or_else(|| self.config.program.clone()),
            activity: ActivityPreferences::default(),
            credential: hash_password(&req.password),
        };
        profile::create(&*self.store, &p)?;
        Ok(self.tokens.issue(&p.id))
    }

    pub fn login(&self, req: &LoginRequest) -> GatewayResult<AuthToken> {
        let denied = || GatewayError::unauthorized("unknown alias or wrong password");
        let p = profile::by_alias(&*self.store, req.alias.trim())?.ok_or_else(denied)?;
        if !verify_password(&req.password, &p.credential) {
            return Err(denied());
        }
        Ok(self.tokens.issue(&p.id))
    }

    /// The user a bearer token belongs to.
    pub fn authenticate(&self, token: &str) -> GatewayResult<String> {
        let user = self.tokens.verify(token)?;
        // Tokens of deleted accounts are worthless.
        if profile::get(&*self.store, &user)?.is_none() {
            self.tokens.revoke(token);
            return Err(GatewayError::unauthorized("account no longer exists"));
        }
        Ok(user)
    }

    pub fn logout(&self, token: &str) {
        self.tokens.revoke(token);
    }

    pub fn profile(&self, user: &str) -> GatewayResult<PublicProfile> {
        let p = profile::require(&*self.store, user)?;
        Ok(PublicProfile {
            interests: self.chat.interests(user)?,
            id: p.id,
            alias: p.alias,
            language: p.language,
            program: p.program,
            activity: p.activity,
        })
    }

    /// Changes language, program or activity preferences. The program
    /// cannot shrink below a day that already has a session.
    pub fn update_profile(&self, user: &str, update: &ProfileUpdate) -> GatewayResult<PublicProfile> {
        let lock = self.session_lock(user);
        let _guard = lock.lock();
        if let Some(program) = &update.program {
            if let Some(last) = sessions(&*self.store, user)?.last() {
                if program.days < last.day {
                    return Err(GatewayError::invalid(format!(
                        "program cannot end before day {}, which already has a session",
                        last.day
                    )));
                }
            }
        }
        profile::update(&*self.store, user, |p| {
            if let Some(l) = update.language {
                p.language = l;
            }
            if let Some(prog) = &update.program {
                p.program = prog.clone();
            }
            if let Some(a) = &update.activity {
                p.activity = a.clone();
            }
        })?;
        self.profile(user)
    }

    // Sessions

    fn session_lock(&self, user: &str) -> Arc<Mutex<()>> {
        self.session_locks
            .lock()
            .entry(user.to_string())
            .or_insert_with(|| Arc::new(Mutex::new(())))
            .clone()
    }

    pub fn start_session(&self, user: &str, day: u32) -> GatewayResult<SessionReply> {
        let lock = self.session_lock(user);
        let _guard = lock.lock();
        let p = profile::require(&*self.store, user)?;
        let (state, response) = start_session(
            &*self.store,
            &self.engine,
            user,
            day,
            p.language,
            &p.activity,
            p.program.days,
        )?;
        Ok(SessionReply {
            day,
            phase: state.phase,
            response,
            summary: None,
        })
    }

    fn require_open(&self, user: &str) -> GatewayResult<SessionState> {
        open_session(&*self.store, user)?
            .ok_or_else(|| GatewayError::new(ErrorKind::InvalidState, "no session in progress"))
    }

    /// Speech adapter, intent classification, affect scoring, then the
    /// dialogue step. The ending turn also writes the day's records.
    pub fn turn(&self, user: &str, req: &TurnRequest) -> GatewayResult<TurnReply> {
        let lock = self.session_lock(user);
        let _guard = lock.lock();
        let state = self.require_open(user)?;
        let lang = state.language;
        let (utterance, features) = match (&req.text, &req.audio) {
            (Some(t), None) => (Utterance::new(t.clone(), lang)?, None),
            (None, Some(a)) => {
                let text = self.speech.transcribe(&a.data, lang)?;
                (Utterance::with_source(text, lang, InputSource::SpeechAdapter)?, a.features)
            }
            _ => return Err(GatewayError::invalid("send exactly one of `text` and `audio`")),
        };
        let frame = classify(&utterance, self.ruleset(lang))?;
        let scores = self.empathy.score_turn(&utterance, features.as_ref())?;
        let (next, response) = advance_session(
            &*self.store,
            &self.engine,
            user,
            state.day,
            &utterance.text,
            &frame,
            Some(&scores),
        )?;
        let summary = self.close_if_ended(user, &next, &response)?;
        Ok(TurnReply {
            day: next.day,
            phase: next.phase,
            speech: req.audio.as_ref().map(|_| self.speech.synthesize(&response.text, lang)),
            transcript: utterance.text,
            frame,
            scores,
            response,
            summary,
        })
    }

    /// The continue button after an activity video.
    pub fn resume(&self, user: &str) -> GatewayResult<SessionReply> {
        let lock = self.session_lock(user);
        let _guard = lock.lock();
        let state = self.require_open(user)?;
        if state.phase != Phase::ActivityRunning {
            return Err(GatewayError::new(ErrorKind::InvalidState, "no activity is running"));
        }
        let (next, response) = advance_session(
            &*self.store,
            &self.engine,
            user,
            state.day,
            RESUME_TEXT,
            &IntentFrame::synthetic("resume"),
            None,
        )?;
        let summary = self.close_if_ended(user, &next, &response)?;
        Ok(SessionReply {
            day: next.day,
            phase: next.phase,
            response,
            summary,
        })
    }

    fn close_if_ended(
        &self,
        user: &str,
        state: &SessionState,
        response: &BotResponse,
    ) -> GatewayResult<Option<SessionSummary>> {
        if response.directive != Directive::EndSession {
            return Ok(None);
        }
        let p = profile::require(&*self.store, user)?;
        Ok(Some(close_session(&*self.store, state, p.program.days.max(state.day))?))
    }

    pub fn session(&self, user: &str, day: u32) -> GatewayResult<SessionState> {
        load_session(&*self.store, user, day)?
            .map(|(s, _)| s)
            .ok_or_else(|| GatewayError::new(ErrorKind::NotFound, format!("no session for day {day}")))
    }

    pub fn sessions(&self, user: &str) -> GatewayResult<Vec<SessionState>> {
        Ok(sessions(&*self.store, user)?)
    }

    /// Per-day health readings and affect aggregates, by day.
    pub fn progress(&self, user: &str) -> GatewayResult<Progress> {
        let p = profile::require(&*self.store, user)?;
        let mut by_day: HashMap<u32, SessionSummary> =
            summaries(&*self.store, user)?.into_iter().map(|s| (s.day, s)).collect();
        let days = history(&*self.store, user)?
            .into_iter()
            .map(|health| {
                let s = by_day.remove(&health.day);
                DayProgress {
                    day: health.day,
                    sentiment: s.as_ref().and_then(|s| s.sentiment),
                    stress: s.as_ref().and_then(|s| s.stress),
                    emotion: s.and_then(|s| s.emotion),
                    health,
                }
            })
            .collect();
        Ok(Progress {
            program: p.program,
            days,
        })
    }

    /// One-shot affect scoring outside any session.
    pub fn score(&self, text: &str, lang: Language) -> GatewayResult<EmpathyScores> {
        Ok(self.empathy.score_turn(&Utterance::new(text, lang)?, None)?)
    }

    // Chat

    pub fn topics(&self) -> &[TopicDef] {
        self.chat.topics()
    }

    pub fn add_contact(&self, user: &str, alias: &str) -> GatewayResult<Contact> {
        Ok(self.chat.add_friend(user, alias)?)
    }

    pub fn contacts(&self, user: &str) -> GatewayResult<Vec<Contact>> {
        Ok(self.chat.contacts(user)?)
    }

    pub fn conversations(&self, user: &str) -> GatewayResult<Vec<ConversationRef>> {
        Ok(self.chat.conversations(user)?)
    }

    pub fn send_direct(&self, user: &str, to: &str, body: &str) -> GatewayResult<u64> {
        Ok(self.chat.send_direct(user, to, body)?)
    }

    pub fn post_topic(&self, user: &str, topic: &str, body: &str) -> GatewayResult<u64> {
        Ok(self.chat.post_topic(user, topic, body)?)
    }

    pub fn sync(&self, user: &str, conversation: &ConversationRef, last_seen: u64) -> GatewayResult<SyncResult> {
        Ok(self.chat.sync(user, conversation, last_seen)?)
    }

    pub fn interests(&self, user: &str) -> GatewayResult<Vec<String>> {
        Ok(self.chat.interests(user)?)
    }

    pub fn set_interests(&self, user: &str, topics: &[String]) -> GatewayResult<SubscriptionDiff> {
        Ok(self.chat.set_interests(user, topics)?)
    }

    pub fn report(
        &self,
        user: &str,
        conversation: &ConversationRef,
        message_id: u64,
        reason: &str,
    ) -> GatewayResult<ReportRecord> {
        Ok(self.chat.report_message(user, conversation, message_id, reason)?)
    }

    pub fn meeting(&self, user: &str, topic: &str) -> GatewayResult<MeetingCredentials> {
        if !self.topics().iter().any(|t| t.id == topic) {
            return Err(GatewayError::new(ErrorKind::NotFound, format!("topic `{topic}`")));
        }
        if !self.chat.interests(user)?.iter().any(|t| t == topic) {
            return Err(GatewayError::new(ErrorKind::Forbidden, format!("not subscribed to `{topic}`")));
        }
        Ok(self.chat.get_or_create_meeting(topic)?)
    }
}
