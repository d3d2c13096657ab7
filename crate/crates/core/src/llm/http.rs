use serde::{Deserialize, Serialize};

use super::{CompletionProvider, GenParams, ProviderError};
use crate::prompt::PromptRequest;

#[derive(Serialize)]
struct Body<'a> {
    request: Wire<'a>,
    params: &'a GenParams,
}

#[derive(Serialize)]
struct Wire<'a> {
    system: &'a str,
    user: &'a str,
}

#[derive(Deserialize)]
struct Reply {
    text: String,
}

/// Posts `{request: {system, user}, params}` to a URL and reads `{text}`.
pub struct HttpProvider {
    url: String,
}

impl HttpProvider {
    pub fn new(url: impl Into<String>) -> Self {
        Self { url: url.into() }
    }
}

impl CompletionProvider for HttpProvider {
    fn name(&self) -> &str {
        "http"
    }

    fn generate(&self, request: &PromptRequest, params: &GenParams) -> Result<String, ProviderError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(params.timeout))
            .build()
            .into();
        let body = Body { request: Wire { system: &request.system, user: &request.user }, params };
        let mut resp = agent.post(&self.url).send_json(&body).map_err(|e| match e {
            ureq::Error::Timeout(_) => ProviderError::Timeout,
            e => ProviderError::Unavailable(e.to_string()),
        })?;
        let reply: Reply = resp
            .body_mut()
            .read_json()
            .map_err(|e| ProviderError::BadResponse(e.to_string()))?;
        Ok(reply.text)
    }
}
