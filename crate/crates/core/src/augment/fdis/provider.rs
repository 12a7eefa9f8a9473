//! Translation providers: offline mocks and an HTTP client.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::textdata::synthetic::restore;

pub trait MtProvider: Send + Sync {
    fn id(&self) -> &str;

    /// Must return exactly one translation per input.
    fn translate(&self, texts: &[String], source_lang: &str, target_lang: &str) -> Result<Vec<String>>;
}

pub const ENGLISH: &str = "en";

/// Returns every input unchanged.
#[derive(Debug, Clone, Default)]
pub struct IdentityProvider;

impl MtProvider for IdentityProvider {
    fn id(&self) -> &str {
        "identity"
    }

    fn translate(&self, texts: &[String], _: &str, _: &str) -> Result<Vec<String>> {
        Ok(texts.to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockStrength {
    Strong,
    Medium,
    Weak,
}

impl MockStrength {
    /// Share of restore sites the back leg repairs.
    pub fn fraction(self) -> f64 {
        match self {
            MockStrength::Strong => 1.0,
            MockStrength::Medium => 0.6,
            MockStrength::Weak => 0.3,
        }
    }
}

/// Offline stand-in for a real translator. The leg out of English is the
/// identity; the leg back into English undoes the synthetic
/// informalization rules at a fixed share of the places where they apply.
/// Which places is a hash of the provider, the text and the site, so the
/// output is a pure function of its input.
#[derive(Debug, Clone)]
pub struct MockProvider {
    strength: MockStrength,
    id: String,
}

impl MockProvider {
    pub fn new(strength: MockStrength) -> Self {
        let id = match strength {
            MockStrength::Strong => "mock-strong",
            MockStrength::Medium => "mock-medium",
            MockStrength::Weak => "mock-weak",
        };
        MockProvider {
            strength,
            id: id.to_string(),
        }
    }

    fn back_translate(&self, text: &str, pivot: &str) -> String {
        let fraction = self.strength.fraction();
        let mut site = 0u32;
        restore(text, |_| {
            site += 1;
            fraction >= 1.0 || unit_hash(&[self.id.as_bytes(), pivot.as_bytes(), text.as_bytes(), &site.to_le_bytes()]) < fraction
        })
    }
}

/// Uniform value in [0, 1) derived from the parts.
fn unit_hash(parts: &[&[u8]]) -> f64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let digest = h.finalize();
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    (u64::from_le_bytes(first) >> 11) as f64 / (1u64 << 53) as f64
}

impl MtProvider for MockProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn translate(&self, texts: &[String], source_lang: &str, target_lang: &str) -> Result<Vec<String>> {
        if target_lang != ENGLISH {
            return Ok(texts.to_vec());
        }
        Ok(texts.iter().map(|t| self.back_translate(t, source_lang)).collect())
    }
}

#[derive(Serialize)]
struct TranslateRequest<'a> {
    texts: &'a [String],
    source_lang: &'a str,
    target_lang: &'a str,
}

#[derive(Deserialize)]
struct TranslateResponse {
    translations: Vec<String>,
}

/// Client for a service answering `POST {endpoint}/translate`.
pub struct HttpProvider {
    endpoint: String,
    agent: ureq::Agent,
    id: String,
}

impl HttpProvider {
    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        let endpoint = endpoint.trim_end_matches('/').to_string();
        HttpProvider {
            id: format!("http:{endpoint}"),
            endpoint,
            agent,
        }
    }
}

impl MtProvider for HttpProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn translate(&self, texts: &[String], source_lang: &str, target_lang: &str) -> Result<Vec<String>> {
        let body = TranslateRequest {
            texts,
            source_lang,
            target_lang,
        };
        let url = format!("{}/translate", self.endpoint);
        let mut resp = self
            .agent
            .post(&url)
            .send_json(&body)
            .map_err(|e| Error::Transport(format!("{url}: {e}")))?;
        let parsed: TranslateResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| Error::Transport(format!("{url}: unreadable response: {e}")))?;
        Ok(parsed.translations)
    }
}

/// Provider selected by name: `identity`, `mock-strong`, `mock-medium`,
/// `mock-weak`, or `http` (which needs an endpoint).
pub fn provider_by_name(name: &str, endpoint: Option<&str>) -> Result<Box<dyn MtProvider>> {
    Ok(match name {
        "identity" => Box::new(IdentityProvider),
        "mock-strong" => Box::new(MockProvider::new(MockStrength::Strong)),
        "mock-medium" => Box::new(MockProvider::new(MockStrength::Medium)),
        "mock-weak" => Box::new(MockProvider::new(MockStrength::Weak)),
        "http" => {
            let url = endpoint.ok_or_else(|| Error::Contract("the http provider needs an endpoint URL".into()))?;
            Box::new(HttpProvider::new(url, Duration::from_secs(30)))
        }
        other => return Err(Error::Contract(format!("unknown provider `{other}`"))),
    })
}
