//! Chat-completions client with bounded concurrency, a token bucket and
//! exponential backoff.

use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use base64::Engine as _;
use serde_json::{json, Value};

use super::{GenerationParams, LlmError};
use crate::prompt::PromptBundle;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HttpLimits {
    pub max_in_flight: usize,
    /// Token refill rate; zero disables the bucket.
    pub requests_per_second: f64,
    /// Bucket capacity.
    pub burst: u32,
}

impl Default for HttpLimits {
    fn default() -> Self {
        Self { max_in_flight: 2, requests_per_second: 1.0, burst: 2 }
    }
}

#[derive(Debug)]
struct LimiterState {
    in_flight: usize,
    tokens: f64,
    refilled: Instant,
}

/// Caps in-flight requests and their start rate. Shared across threads.
#[derive(Debug)]
pub struct RateLimiter {
    limits: HttpLimits,
    state: Mutex<LimiterState>,
    freed: Condvar,
}

pub struct Permit<'a>(&'a RateLimiter);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut s = self.0.state.lock().unwrap_or_else(|p| p.into_inner());
        s.in_flight -= 1;
        self.0.freed.notify_one();
    }
}

impl RateLimiter {
    pub fn new(limits: HttpLimits) -> Self {
        let limits = HttpLimits { max_in_flight: limits.max_in_flight.max(1), burst: limits.burst.max(1), ..limits };
        Self {
            limits,
            state: Mutex::new(LimiterState { in_flight: 0, tokens: f64::from(limits.burst), refilled: Instant::now() }),
            freed: Condvar::new(),
        }
    }

    pub fn limits(&self) -> HttpLimits {
        self.limits
    }

    pub fn in_flight(&self) -> usize {
        self.state.lock().unwrap_or_else(|p| p.into_inner()).in_flight
    }

    /// Blocks until a slot and a token are both available.
    pub fn acquire(&self) -> Permit<'_> {
        let mut s = self.state.lock().unwrap_or_else(|p| p.into_inner());
        loop {
            let now = Instant::now();
            if self.limits.requests_per_second > 0.0 {
                let gained = now.duration_since(s.refilled).as_secs_f64() * self.limits.requests_per_second;
                s.tokens = (s.tokens + gained).min(f64::from(self.limits.burst));
            } else {
                s.tokens = f64::from(self.limits.burst);
            }
            s.refilled = now;
            if s.in_flight < self.limits.max_in_flight && s.tokens >= 1.0 {
                s.tokens -= 1.0;
                s.in_flight += 1;
                return Permit(self);
            }
            let wait = if s.tokens < 1.0 {
                Duration::from_secs_f64((1.0 - s.tokens) / self.limits.requests_per_second)
            } else {
                Duration::from_millis(50)
            };
            s = self.freed.wait_timeout(s, wait).unwrap_or_else(|p| p.into_inner()).0;
        }
    }
}

fn text_part(text: &str) -> Value {
    json!({ "type": "text", "text": text })
}

pub(crate) fn request_body(bundle: &PromptBundle, model: &str, params: &GenerationParams) -> Result<Value, LlmError> {
    let mut user = vec![text_part(&bundle.user)];
    for a in &bundle.attachments {
        let bytes = std::fs::read(&a.path)?;
        let data = base64::engine::general_purpose::STANDARD.encode(bytes);
        user.push(json!({ "type": "image_url", "image_url": { "url": format!("data:{};base64,{data}", a.media_type) } }));
    }
    let mut messages = vec![json!({ "role": "system", "content": [text_part(&bundle.system)] })];
    if !bundle.example.is_empty() {
        messages.push(json!({ "role": "user", "content": [text_part(&bundle.example)] }));
    }
    messages.push(json!({ "role": "user", "content": user }));
    Ok(json!({
        "model": model,
        "messages": messages,
        "temperature": params.temperature,
        "max_tokens": params.max_tokens,
        "top_p": params.top_p,
    }))
}

fn first_choice(body: &str) -> Result<String, LlmError> {
    let v: Value = serde_json::from_str(body).map_err(|e| LlmError::BadResponse(e.to_string()))?;
    let content = &v["choices"][0]["message"]["content"];
    match content {
        Value::String(s) => Ok(s.clone()),
        // Some servers return content parts.
        Value::Array(parts) => Ok(parts.iter().filter_map(|p| p["text"].as_str()).collect::<Vec<_>>().join("")),
        _ => Err(LlmError::BadResponse("no choices[0].message.content".into())),
    }
}

enum Failure {
    RateLimited,
    Timeout,
    Server(u16, String),
    Transport(String),
}

pub(crate) fn generate(
    bundle: &PromptBundle,
    endpoint: &str,
    model: &str,
    key: Option<&str>,
    params: &GenerationParams,
    limiter: &RateLimiter,
    backoff_base: Duration,
) -> Result<String, LlmError> {
    let key = key.ok_or(LlmError::AuthMissing)?;
    let body = request_body(bundle, model, params)?;
    let client = reqwest::blocking::Client::builder()
        .timeout(params.timeout())
        .build()
        .map_err(|e| LlmError::Transport(e.to_string()))?;

    let attempts = params.retries + 1;
    let mut last = Failure::Transport("no attempt made".into());
    for attempt in 0..attempts {
        if attempt > 0 {
            std::thread::sleep(backoff_base * 2u32.pow(attempt - 1));
        }
        let permit = limiter.acquire();
        let sent = client.post(endpoint).bearer_auth(key).json(&body).send();
        let outcome = match sent {
            Ok(resp) => {
                let status = resp.status().as_u16();
                let text = resp.text();
                drop(permit);
                match (status, text) {
                    (200..=299, Ok(text)) => return first_choice(&text),
                    (200..=299, Err(e)) if e.is_timeout() => Failure::Timeout,
                    (200..=299, Err(e)) => Failure::Transport(e.to_string()),
                    (429, _) => Failure::RateLimited,
                    (500..=599, t) => Failure::Server(status, t.unwrap_or_default()),
                    (s, t) => return Err(LlmError::Http { status: s, body: t.unwrap_or_default() }),
                }
            }
            Err(e) if e.is_timeout() => Failure::Timeout,
            Err(e) => Failure::Transport(e.to_string()),
        };
        log::warn!("attempt {} of {attempts} to {endpoint} failed", attempt + 1);
        last = outcome;
    }
    Err(match last {
        Failure::RateLimited => LlmError::RateLimited { attempts },
        Failure::Timeout => LlmError::Timeout { attempts },
        Failure::Server(status, body) => LlmError::Http { status, body },
        Failure::Transport(m) => LlmError::Transport(m),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    /// Serves the scripted `(status, body)` replies in order, one per
    /// connection, and returns the request bodies it saw.
    fn mock(replies: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let handle = std::thread::spawn(move || {
            let mut seen = Vec::new();
            for (status, body) in replies {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream);
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                seen.push(String::from_utf8(buf).unwrap());
                let mut stream = reader.into_inner();
                let reply = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(reply.as_bytes()).unwrap();
            }
            seen
        });
        (url, handle)
    }

    fn bundle() -> PromptBundle {
        PromptBundle {
            system: "sys".into(),
            example: "ex".into(),
            user: "user".into(),
            attachments: vec![],
            constraint_echo: crate::prompt::ConstraintEcho {
                page: crate::design::Dimensions { width: 10, height: 10 },
                elements: vec![],
                assets: vec![],
            },
        }
    }

    fn ok_body(text: &str) -> String {
        json!({ "choices": [{ "message": { "role": "assistant", "content": text } }] }).to_string()
    }

    #[test]
    fn posts_chat_request_and_returns_first_choice() {
        let (url, server) = mock(vec![(200, ok_body("```jsx\n<div/>\n```"))]);
        let limiter = RateLimiter::new(HttpLimits { requests_per_second: 0.0, ..Default::default() });
        let out = generate(&bundle(), &url, "m1", Some("k"), &GenerationParams::default(), &limiter, Duration::from_millis(1)).unwrap();
        assert_eq!(out, "```jsx\n<div/>\n```");
        let seen = server.join().unwrap();
        let req: Value = serde_json::from_str(&seen[0]).unwrap();
        assert_eq!(req["model"], "m1");
        assert_eq!(req["temperature"], 0.7);
        assert_eq!(req["max_tokens"], 4000);
        let roles: Vec<&str> = req["messages"].as_array().unwrap().iter().map(|m| m["role"].as_str().unwrap()).collect();
        assert_eq!(roles, vec!["system", "user", "user"]);
    }

    #[test]
    fn retries_then_rate_limited() {
        let (url, server) = mock(vec![(429, "{}".into()), (429, "{}".into()), (429, "{}".into())]);
        let limiter = RateLimiter::new(HttpLimits { requests_per_second: 0.0, ..Default::default() });
        let err = generate(&bundle(), &url, "m", Some("k"), &GenerationParams::default(), &limiter, Duration::from_millis(1)).unwrap_err();
        assert!(matches!(err, LlmError::RateLimited { attempts: 3 }), "{err:?}");
        assert_eq!(server.join().unwrap().len(), 3);
    }

    #[test]
    fn recovers_after_server_error() {
        let (url, server) = mock(vec![(503, "busy".into()), (200, ok_body("fine"))]);
        let limiter = RateLimiter::new(HttpLimits { requests_per_second: 0.0, ..Default::default() });
        let out = generate(&bundle(), &url, "m", Some("k"), &GenerationParams::default(), &limiter, Duration::from_millis(1)).unwrap();
        assert_eq!(out, "fine");
        server.join().unwrap();
    }

    #[test]
    fn missing_key() {
        let limiter = RateLimiter::new(HttpLimits::default());
        let err = generate(&bundle(), "http://127.0.0.1:9/", "m", None, &GenerationParams::default(), &limiter, Duration::ZERO).unwrap_err();
        assert!(matches!(err, LlmError::AuthMissing));
    }

    #[test]
    fn limiter_caps_concurrency() {
        let limiter = Arc::new(RateLimiter::new(HttpLimits { max_in_flight: 2, requests_per_second: 0.0, burst: 1 }));
        let peak = Arc::new(AtomicUsize::new(0));
        let threads: Vec<_> = (0..6)
            .map(|_| {
                let (limiter, peak) = (limiter.clone(), peak.clone());
                std::thread::spawn(move || {
                    let _p = limiter.acquire();
                    peak.fetch_max(limiter.in_flight(), Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(20));
                })
            })
            .collect();
        for t in threads {
            t.join().unwrap();
        }
        assert_eq!(peak.load(Ordering::SeqCst), 2);
        assert_eq!(limiter.in_flight(), 0);
    }

    #[test]
    fn token_bucket_spaces_requests() {
        let limiter = RateLimiter::new(HttpLimits { max_in_flight: 4, requests_per_second: 50.0, burst: 1 });
        let start = Instant::now();
        for _ in 0..4 {
            drop(limiter.acquire());
        }
        // One token up front, three refills at 20 ms each.
        assert!(start.elapsed() >= Duration::from_millis(55), "{:?}", start.elapsed());
    }
}
