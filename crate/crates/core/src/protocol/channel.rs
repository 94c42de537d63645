//! Line-framed message channels over any byte stream.

use std::io::{BufRead, ErrorKind, Write};

use super::{decode, encode, salvage_seq, ErrorPayload, Message, ProtocolError};

pub trait Channel {
    fn send(&mut self, msg: &Message) -> Result<(), ProtocolError>;
    /// Next well-formed message. Bad lines are answered with an error
    /// message and skipped.
    fn recv(&mut self) -> Result<Message, ProtocolError>;
    fn set_session(&mut self, session_id: &str);
}

pub struct StreamChannel<R, W> {
    reader: R,
    writer: W,
    session_id: String,
    next_seq: u64,
    last_seen: Option<u64>,
    /// Consecutive bad lines tolerated before giving up.
    pub max_bad_lines: usize,
}

impl<R: BufRead, W: Write> StreamChannel<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        StreamChannel {
            reader,
            writer,
            session_id: String::new(),
            next_seq: 0,
            last_seen: None,
            max_bad_lines: 16,
        }
    }

    pub fn into_parts(self) -> (R, W) {
        (self.reader, self.writer)
    }

    fn reject(&mut self, err: &ProtocolError, echo_seq: Option<u64>) -> Result<(), ProtocolError> {
        self.send(&Message::Error(ErrorPayload {
            code: err.code().to_string(),
            message: err.to_string(),
            echo_seq,
        }))
    }
}

impl<R: BufRead, W: Write> Channel for StreamChannel<R, W> {
    fn send(&mut self, msg: &Message) -> Result<(), ProtocolError> {
        let line = encode(&msg.envelope(&self.session_id, self.next_seq));
        self.next_seq += 1;
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        Ok(())
    }

    fn recv(&mut self) -> Result<Message, ProtocolError> {
        let mut bad = 0;
        loop {
            let mut line = String::new();
            match self.reader.read_line(&mut line) {
                Ok(0) => return Err(ProtocolError::Closed),
                Ok(_) => {}
                Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => return Err(ProtocolError::Timeout),
                Err(e) => return Err(e.into()),
            }
            if line.trim().is_empty() {
                continue;
            }
            let parsed = decode(&line).and_then(|env| {
                if self.last_seen.is_some_and(|s| env.seq <= s) {
                    return Err(ProtocolError::Malformed(format!("seq {} does not increase", env.seq)));
                }
                self.last_seen = Some(env.seq);
                Message::from_envelope(&env)
            });
            match parsed {
                Ok(m) => return Ok(m),
                Err(e) => {
                    bad += 1;
                    self.reject(&e, salvage_seq(&line))?;
                    if bad >= self.max_bad_lines {
                        return Err(e);
                    }
                }
            }
        }
    }

    fn set_session(&mut self, session_id: &str) {
        self.session_id = session_id.to_string();
    }
}
