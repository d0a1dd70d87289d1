use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Bytes per record: `f64` time, `i32` channel, `i8` direction.
pub const RECORD_BYTES: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub channel: i32,
    pub direction: i8,
}

/// Full path record of one run: initial configuration plus every event.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub n: usize,
    pub t_final: f64,
    pub initial: Vec<u8>,
    pub events: Vec<Event>,
}

impl EventLog {
    /// Writes the events as little-endian records.
    pub fn write_records(&self, mut out: impl Write) -> Result<()> {
        let mut buf = Vec::with_capacity(self.events.len() * RECORD_BYTES);
        for e in &self.events {
            buf.extend_from_slice(&e.time.to_le_bytes());
            buf.extend_from_slice(&e.channel.to_le_bytes());
            buf.extend_from_slice(&e.direction.to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_records(mut input: impl Read) -> Result<Vec<Event>> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        if bytes.len() % RECORD_BYTES != 0 {
            return Err(Error::Consistency(format!(
                "event stream of {} bytes is not a whole number of {RECORD_BYTES}-byte records",
                bytes.len()
            )));
        }
        Ok(bytes
            .chunks_exact(RECORD_BYTES)
            .map(|r| Event {
                time: f64::from_le_bytes(r[0..8].try_into().unwrap()),
                channel: i32::from_le_bytes(r[8..12].try_into().unwrap()),
                direction: r[12] as i8,
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let log = EventLog {
            n: 2,
            t_final: 1.0,
            initial: vec![0, 1, 0, 1, 0],
            events: vec![
                Event {
                    time: 0.125,
                    channel: 3,
                    direction: -1,
                },
                Event {
                    time: 0.5,
                    channel: 8,
                    direction: 1,
                },
            ],
        };
        let mut buf = Vec::new();
        log.write_records(&mut buf).unwrap();
        assert_eq!(buf.len(), 2 * RECORD_BYTES);
        assert_eq!(EventLog::read_records(buf.as_slice()).unwrap(), log.events);
        assert!(EventLog::read_records(&buf[..20]).is_err());
    }
}
