//! Line-delimited JSON request/response loop around [`PegInHoleEnv`].
//!
//! ```text
//! {"cmd":"reset","task":"easy","seed":3}   -> {"obs":[x,y,z]}
//! {"cmd":"step","action":[vx,vy,vz]}       -> {"obs":[..],"reward":r,"done":b,"info":{..}}
//! {"cmd":"close"}                          -> {"closed":true}
//! ```
//!
//! Any request that cannot be served is answered with `{"error":"..."}`
//! and the session continues.

use std::io::{BufRead, Write};

use serde::Deserialize;
use serde_json::{json, Value};

use super::env::{EnvConfig, PegInHoleEnv, Task};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "cmd", rename_all = "lowercase", deny_unknown_fields)]
pub enum Request {
    Reset {
        task: Task,
        #[serde(default)]
        seed: u64,
    },
    Step {
        action: [f64; 3],
    },
    Close,
}

/// Protocol session state; one environment per session.
pub struct Session {
    env: PegInHoleEnv,
    closed: bool,
}

impl Session {
    pub fn new(config: EnvConfig) -> Self {
        Self { env: PegInHoleEnv::new(config), closed: false }
    }

    pub fn env(&self) -> &PegInHoleEnv {
        &self.env
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Answers one request line.
    pub fn handle_line(&mut self, line: &str) -> Value {
        let request: Request = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => return json!({ "error": format!("malformed request: {e}") }),
        };
        self.handle(request)
    }

    pub fn handle(&mut self, request: Request) -> Value {
        match request {
            Request::Reset { task, seed } => match self.env.reset(task, seed) {
                Ok(obs) => json!({ "obs": obs }),
                Err(e) => json!({ "error": e.to_string() }),
            },
            Request::Step { action } => match self.env.step(action) {
                Ok(r) => serde_json::to_value(r).unwrap_or_else(|e| json!({ "error": e.to_string() })),
                Err(e) => json!({ "error": e.to_string() }),
            },
            Request::Close => {
                self.closed = true;
                json!({ "closed": true })
            }
        }
    }
}

/// Serves requests until `close` or end of input. Only I/O failures end
/// the loop with an error.
pub fn serve(config: EnvConfig, input: impl BufRead, mut output: impl Write) -> std::io::Result<()> {
    let mut session = Session::new(config);
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = session.handle_line(&line);
        serde_json::to_writer(&mut output, &response)?;
        output.write_all(b"\n")?;
        output.flush()?;
        if session.is_closed() {
            break;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_requests() {
        let r: Request = serde_json::from_str(r#"{"cmd":"reset","task":"hard","seed":7}"#).unwrap();
        assert_eq!(r, Request::Reset { task: Task::Hard, seed: 7 });
        let r: Request = serde_json::from_str(r#"{"cmd":"step","action":[0,0,-0.05]}"#).unwrap();
        assert_eq!(r, Request::Step { action: [0.0, 0.0, -0.05] });
        assert!(serde_json::from_str::<Request>(r#"{"cmd":"fly"}"#).is_err());
    }

    #[test]
    fn step_before_reset_is_an_error_response() {
        let mut s = Session::new(EnvConfig::default());
        let v = s.handle_line(r#"{"cmd":"step","action":[0,0,0]}"#);
        assert!(v.get("error").is_some());
        assert!(s.handle_line("not json").get("error").is_some());
        assert!(!s.is_closed());
    }
}
