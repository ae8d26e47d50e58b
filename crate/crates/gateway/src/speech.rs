use nora_core::Language;

use crate::error::GatewayError;

/// Speech recognition and synthesis engines.
pub trait SpeechAdapter: Send + Sync {
    fn transcribe(&self, audio: &[u8], lang: Language) -> Result<String, GatewayError>;
    fn synthesize(&self, text: &str, lang: Language) -> Vec<u8>;
}

/// Treats audio blobs as UTF-8 text, and text as its own audio.
#[derive(Debug, Default, Clone, Copy)]
pub struct Passthrough;

impl SpeechAdapter for Passthrough {
    fn transcribe(&self, audio: &[u8], _lang: Language) -> Result<String, GatewayError> {
        String::from_utf8(audio.to_vec()).map_err(|_| GatewayError::invalid("audio blob is not UTF-8 text"))
    }

    fn synthesize(&self, text: &str, _lang: Language) -> Vec<u8> {
        text.as_bytes().to_vec()
    }
}
