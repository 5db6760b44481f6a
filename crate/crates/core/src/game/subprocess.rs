//! Games whose utility is computed by a child process.
//!
//! Protocol, one line per message: the parent writes `EVAL <bitmask>`, the
//! child answers `VALUE <float>`; `QUIT` ends the session. Queries are
//! serialised through a single child, so callers get exclusive access per query.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use super::Utility;
use crate::coalition::{Coalition, MAX_PLAYERS};
use crate::error::{Error, Result};

pub const DEFAULT_QUERY_TIMEOUT: Duration = Duration::from_secs(60);

struct Session {
    child: Child,
    stdin: ChildStdin,
    replies: Receiver<std::io::Result<String>>,
    broken: Option<String>,
}

pub struct SubprocessUtility {
    n: usize,
    timeout: Duration,
    session: Mutex<Session>,
}

impl SubprocessUtility {
    pub fn spawn(command: &[String], n: usize, timeout: Duration) -> Result<Self> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| Error::InvalidArgument("subprocess command is empty".into()))?;
        if n == 0 || n > MAX_PLAYERS {
            return Err(Error::Capacity {
                what: "subprocess game",
                max: MAX_PLAYERS,
                n,
            });
        }
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::ExternalUtility {
                request: "spawn".into(),
                reason: format!("{program}: {e}"),
            })?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(SubprocessUtility {
            n,
            timeout,
            session: Mutex::new(Session {
                child,
                stdin,
                replies: rx,
                broken: None,
            }),
        })
    }
}

fn parse_reply(line: &str) -> std::result::Result<f64, String> {
    let rest = line
        .trim_end_matches(['\r', '\n'])
        .strip_prefix("VALUE ")
        .ok_or_else(|| format!("malformed reply {line:?}"))?;
    let v: f64 = rest
        .trim()
        .parse()
        .map_err(|_| format!("malformed float in reply {line:?}"))?;
    if !v.is_finite() {
        return Err(format!("non-finite value in reply {line:?}"));
    }
    Ok(v)
}

impl Utility for SubprocessUtility {
    fn n(&self) -> usize {
        self.n
    }

    fn value(&self, c: Coalition) -> Result<f64> {
        let request = format!("EVAL {}", c.bits());
        let fail = |reason: String| Error::ExternalUtility {
            request: request.clone(),
            reason,
        };
        let mut session = self.session.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(reason) = &session.broken {
            return Err(fail(format!(
                "session unusable after earlier failure: {reason}"
            )));
        }
        let outcome = (|| {
            writeln!(session.stdin, "{request}").map_err(|e| format!("write failed: {e}"))?;
            session
                .stdin
                .flush()
                .map_err(|e| format!("flush failed: {e}"))?;
            match session.replies.recv_timeout(self.timeout) {
                Ok(Ok(line)) => parse_reply(&line),
                Ok(Err(e)) => Err(format!("read failed: {e}")),
                Err(RecvTimeoutError::Timeout) => {
                    Err(format!("no reply within {:?}", self.timeout))
                }
                Err(RecvTimeoutError::Disconnected) => Err("child closed its output".to_string()),
            }
        })();
        outcome.map_err(|reason| {
            session.broken = Some(reason.clone());
            fail(reason)
        })
    }
}

impl Drop for SubprocessUtility {
    fn drop(&mut self) {
        let session = self.session.get_mut().unwrap_or_else(|p| p.into_inner());
        let _ = writeln!(session.stdin, "QUIT");
        let _ = session.stdin.flush();
        let deadline = Instant::now() + Duration::from_millis(500);
        while Instant::now() < deadline {
            if let Ok(Some(_)) = session.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(10));
        }
        let _ = session.child.kill();
        let _ = session.child.wait();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reply_parsing() {
        assert_eq!(parse_reply("VALUE 0.25\n").unwrap(), 0.25);
        assert_eq!(parse_reply("VALUE -1e-3").unwrap(), -1e-3);
        assert!(parse_reply("VALUES 1").is_err());
        assert!(parse_reply("VALUE abc").is_err());
        assert!(parse_reply("VALUE inf").is_err());
        assert!(parse_reply("VALUE NaN").is_err());
    }

    #[test]
    fn empty_command_is_rejected() {
        assert!(SubprocessUtility::spawn(&[], 3, DEFAULT_QUERY_TIMEOUT).is_err());
    }
}
