use std::sync::{Condvar, Mutex};
use std::time::Duration;

use super::{validate_response, AnnotationRequest, AnnotationResponse, Annotator, AnnotatorError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub max_in_flight: usize,
    pub timeout: Duration,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key: None,
            max_in_flight: 4,
            timeout: Duration::from_secs(60),
        }
    }
}

/// Counting semaphore bounding concurrent requests.
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        SlotGuard(self)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

/// Posts each request as a JSON body and reads the response record back.
pub struct RemoteAnnotator {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
    slots: Slots,
}

impl RemoteAnnotator {
    pub fn new(config: RemoteConfig) -> Result<Self, AnnotatorError> {
        if config.max_in_flight == 0 {
            return Err(AnnotatorError::Config(
                "max_in_flight must be positive".into(),
            ));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| AnnotatorError::Config(e.to_string()))?;
        Ok(Self {
            slots: Slots {
                free: Mutex::new(config.max_in_flight),
                cv: Condvar::new(),
            },
            config,
            client,
        })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }
}

impl Annotator for RemoteAnnotator {
    fn kind(&self) -> &'static str {
        "remote"
    }

    fn annotate(&self, req: &AnnotationRequest) -> Result<AnnotationResponse, AnnotatorError> {
        let _slot = self.slots.acquire();
        let mut call = self.client.post(&self.config.endpoint).json(req);
        if let Some(key) = &self.config.api_key {
            call = call.bearer_auth(key);
        }
        let reply = call
            .send()
            .map_err(|e| AnnotatorError::ProviderUnavailable(e.to_string()))?;
        let status = reply.status();
        if !status.is_success() {
            return Err(AnnotatorError::ProviderUnavailable(format!(
                "HTTP {status}"
            )));
        }
        let body = reply
            .text()
            .map_err(|e| AnnotatorError::ProviderUnavailable(e.to_string()))?;
        let resp: AnnotationResponse = serde_json::from_str(&body)
            .map_err(|e| AnnotatorError::InvalidResponse(e.to_string()))?;
        validate_response(req, &resp)?;
        Ok(resp)
    }
}
