//! Line-oriented TCP client for an external emotion classifier.
//!
//! The classifier itself (the paper fine-tunes a text model for this) is out
//! of scope; this client speaks a deliberately minimal wire protocol so any
//! classifier can be wrapped in a few lines of server code:
//!
//! 1. The client connects and sends the sentence as one UTF-8 line.
//! 2. The server replies with one line, `category \t score`, and may close.
//!
//! Transport failures (connect, timeout, dropped connection) are retried
//! with exponential backoff; a malformed or out-of-range response is a
//! contract violation and is not retried.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::time::Duration;

use thiserror::Error;

use super::EmotionLabel;

/// Errors from one classification request.
#[derive(Debug, Error)]
pub enum ClientError {
    /// The request text cannot be sent over a line protocol.
    #[error("request text contains a newline")]
    InvalidRequest,
    /// All attempts failed at the transport level.
    #[error("classifier at {endpoint} unreachable after {attempts} attempts: {last}")]
    Transport {
        /// Endpoint that was tried.
        endpoint: String,
        /// Number of attempts made.
        attempts: u32,
        /// Error from the final attempt.
        last: std::io::Error,
    },
    /// The server's reply does not match `category \t score`.
    #[error("malformed classifier response {got:?}")]
    MalformedResponse {
        /// Raw response line.
        got: String,
    },
    /// The reply's category is outside the 7-label set.
    #[error("classifier returned unknown category {got:?}")]
    UnknownCategory {
        /// Offending category string.
        got: String,
    },
    /// The reply's score is outside `[0, 1]`.
    #[error("classifier returned score {got} outside [0, 1]")]
    ScoreRange {
        /// Offending value.
        got: f64,
    },
}

/// A classifier endpoint with its retry policy.
#[derive(Debug, Clone)]
pub struct ClassifierClient {
    endpoint: String,
    timeout: Duration,
    attempts: u32,
    initial_backoff: Duration,
}

impl ClassifierClient {
    /// Client for `endpoint` (`host:port`) with the default policy:
    /// 1 s timeout, 3 attempts, backoff starting at 50 ms and doubling.
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout: Duration::from_millis(1000),
            attempts: 3,
            initial_backoff: Duration::from_millis(50),
        }
    }

    /// Sets the per-attempt connect/read/write timeout.
    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Sets the number of transport attempts (at least 1).
    pub fn with_attempts(mut self, attempts: u32) -> Self {
        self.attempts = attempts.max(1);
        self
    }

    /// Sets the backoff before the second attempt; later backoffs double.
    pub fn with_initial_backoff(mut self, backoff: Duration) -> Self {
        self.initial_backoff = backoff;
        self
    }

    /// Classifies one sentence, retrying transport failures.
    pub fn classify(&self, text: &str) -> Result<(EmotionLabel, f64), ClientError> {
        if text.contains('\n') || text.contains('\r') {
            return Err(ClientError::InvalidRequest);
        }
        let mut backoff = self.initial_backoff;
        let mut last_err: Option<std::io::Error> = None;
        for attempt in 0..self.attempts {
            if attempt > 0 {
                std::thread::sleep(backoff);
                backoff *= 2;
            }
            match self.attempt(text) {
                Ok(line) => return parse_response(&line),
                Err(err) => last_err = Some(err),
            }
        }
        Err(ClientError::Transport {
            endpoint: self.endpoint.clone(),
            attempts: self.attempts,
            last: last_err.expect("at least one attempt"),
        })
    }

    fn attempt(&self, text: &str) -> Result<String, std::io::Error> {
        let mut stream = TcpStream::connect(&self.endpoint)?;
        stream.set_read_timeout(Some(self.timeout))?;
        stream.set_write_timeout(Some(self.timeout))?;
        stream.write_all(text.as_bytes())?;
        stream.write_all(b"\n")?;
        stream.flush()?;
        let mut reader = BufReader::new(stream);
        let mut line = String::new();
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            return Err(std::io::Error::new(
                std::io::ErrorKind::UnexpectedEof,
                "connection closed before response",
            ));
        }
        Ok(line)
    }
}

fn parse_response(line: &str) -> Result<(EmotionLabel, f64), ClientError> {
    let trimmed = line.trim_end_matches(['\n', '\r']);
    let mut fields = trimmed.split('\t');
    let (category, score) = match (fields.next(), fields.next(), fields.next()) {
        (Some(category), Some(score), None) => (category.trim(), score.trim()),
        _ => return Err(ClientError::MalformedResponse { got: trimmed.to_string() }),
    };
    let label: EmotionLabel = category
        .parse()
        .map_err(|_| ClientError::UnknownCategory { got: category.to_string() })?;
    let score: f64 = score
        .parse()
        .map_err(|_| ClientError::MalformedResponse { got: trimmed.to_string() })?;
    if !(0.0..=1.0).contains(&score) {
        return Err(ClientError::ScoreRange { got: score });
    }
    Ok((label, score))
}
