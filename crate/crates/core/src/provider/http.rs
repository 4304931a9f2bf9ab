use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Provider, ProviderError, Reply, Request};
use crate::exec::Semaphore;

/// OpenAI-compatible chat-completions endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpConfig {
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_timeout")]
    pub timeout_s: u64,
}

fn default_in_flight() -> usize {
    4
}

fn default_timeout() -> u64 {
    300
}

pub struct HttpProvider {
    cfg: HttpConfig,
    token: Option<String>,
    agent: ureq::Agent,
    slots: Semaphore,
}

impl HttpProvider {
    pub fn new(cfg: HttpConfig) -> Result<Self, ProviderError> {
        let token = match &cfg.api_key_env {
            Some(var) => Some(
                std::env::var(var).map_err(|_| ProviderError::Config(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_s)))
            .http_status_as_error(false)
            .build()
            .into();
        let slots = Semaphore::new(cfg.max_in_flight.max(1));
        Ok(HttpProvider { cfg, token, agent, slots })
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'))
    }
}

impl Provider for HttpProvider {
    fn id(&self) -> String {
        format!("http:{}", self.cfg.model)
    }

    fn complete(&self, req: &Request) -> Result<Reply, ProviderError> {
        let body = json!({
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
            "seed": req.seed,
        });
        let _permit = self.slots.acquire();
        let mut call = self.agent.post(&self.endpoint());
        if let Some(t) = &self.token {
            call = call.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = call.send_json(&body).map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        if status != 200 {
            return Err(ProviderError::Status { status, body: text });
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| ProviderError::Invalid(e.to_string()))?;
        let content = v["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| ProviderError::Invalid("missing choices[0].message.content".into()))?;
        Ok(Reply {
            text: content.to_string(),
            request_id: v["id"].as_str().map(str::to_string),
        })
    }
}

#[cfg(test)]
mod tests {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    use super::*;

    /// Serve one request, returning the received body through the handle.
    fn serve_once(status: &'static str, reply: &'static str) -> (String, std::thread::JoinHandle<(String, String)>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1", listener.local_addr().unwrap());
        let handle = std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut head = String::new();
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                head.push_str(&line);
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            write!(stream, "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}", reply.len()).unwrap();
            (head, String::from_utf8(body).unwrap())
        });
        (url, handle)
    }

    fn request() -> Request {
        Request { key: "k".into(), turn: 0, prompt: "hello".into(), temperature: 0.7, max_output_tokens: 64, seed: 9 }
    }

    #[test]
    fn posts_chat_completion() {
        let (url, server) = serve_once("200 OK", r#"{"id":"r-1","choices":[{"message":{"content":"done"}}]}"#);
        std::env::set_var("BUGSYNTH_TEST_KEY", "sekrit");
        let p = HttpProvider::new(HttpConfig {
            base_url: url,
            model: "m".into(),
            api_key_env: Some("BUGSYNTH_TEST_KEY".into()),
            max_in_flight: 1,
            timeout_s: 10,
        })
        .unwrap();
        let reply = p.complete(&request()).unwrap();
        assert_eq!(reply, Reply { text: "done".into(), request_id: Some("r-1".into()) });
        let (head, body) = server.join().unwrap();
        assert!(head.starts_with("POST /v1/chat/completions"));
        assert!(head.contains("Bearer sekrit"));
        let v: Value = serde_json::from_str(&body).unwrap();
        assert_eq!(v["messages"][0]["content"], "hello");
        assert_eq!(v["temperature"], 0.7);
        assert_eq!(v["max_tokens"], 64);
    }

    #[test]
    fn error_status_is_reported() {
        let (url, server) = serve_once("500 Internal Server Error", r#"{"error":"boom"}"#);
        let p = HttpProvider::new(HttpConfig { base_url: url, model: "m".into(), api_key_env: None, max_in_flight: 1, timeout_s: 10 }).unwrap();
        assert!(matches!(p.complete(&request()), Err(ProviderError::Status { status: 500, .. })));
        server.join().unwrap();
    }
}
