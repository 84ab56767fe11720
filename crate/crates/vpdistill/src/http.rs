//! Teacher client for an HTTP completion endpoint.
//!
//! The endpoint takes a JSON POST with the prompt and sampling settings and
//! answers `{"completion": "..."}`.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use vpdistill_core::teacher::{GenerationConfig, TeacherClient, TransportError};

pub const URL_ENV: &str = "VPD_TEACHER_URL";
pub const TOKEN_ENV: &str = "VPD_TEACHER_TOKEN";

#[derive(Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
    temperature: f64,
    top_p: f64,
    frequency_penalty: f64,
    presence_penalty: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct CompletionResponse {
    completion: String,
}

pub struct HttpTeacher {
    agent: ureq::Agent,
    url: String,
    token: Option<String>,
    generation: GenerationConfig,
}

impl HttpTeacher {
    pub fn new(url: impl Into<String>, token: Option<String>, generation: GenerationConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        HttpTeacher {
            agent,
            url: url.into(),
            token,
            generation,
        }
    }

    /// Reads the endpoint and optional bearer token from the environment.
    pub fn from_env(generation: GenerationConfig) -> Result<Self, TransportError> {
        let url = std::env::var(URL_ENV).map_err(|_| TransportError::new(format!("{URL_ENV} is not set")))?;
        let token = std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty());
        Ok(Self::new(url, token, generation))
    }
}

impl TeacherClient for HttpTeacher {
    fn generate(&mut self, prompt: &str) -> Result<String, TransportError> {
        let body = CompletionRequest {
            prompt,
            temperature: self.generation.temperature,
            top_p: self.generation.top_p,
            frequency_penalty: self.generation.frequency_penalty,
            presence_penalty: self.generation.presence_penalty,
            max_tokens: self.generation.max_tokens,
        };
        let mut request = self.agent.post(&self.url);
        if let Some(token) = &self.token {
            request = request.header("Authorization", &format!("Bearer {token}"));
        }
        let mut response = request
            .send_json(&body)
            .map_err(|e| TransportError::new(format!("POST {}: {e}", self.url)))?;
        let parsed: CompletionResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| TransportError::new(format!("bad response from {}: {e}", self.url)))?;
        Ok(parsed.completion)
    }
}
