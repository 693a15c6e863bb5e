//! Line-oriented wire messages.
//!
//! ```text
//! POSE <vehicle_id> <t> <x> <y> <theta>
//! QUERY <vehicle_id>
//! WARN <target_id> <offending_id> <z_hat> <t>
//! STATUS <vehicle_id> <zone> <buffer_len>
//! ERR <code> <text>
//! ```
//!
//! Fields are separated by single spaces. Decimals are written with
//! [`exact`], so a formatted message parses back to identical values.

use std::fmt;

use crate::numfmt::exact;
use crate::sim::{valid_id, Pose, Zone};

/// `ERR` codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrCode {
    Parse = 1,
    UnknownCommand = 2,
    Incompatible = 3,
}

impl ErrCode {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            1 => Some(ErrCode::Parse),
            2 => Some(ErrCode::UnknownCommand),
            3 => Some(ErrCode::Incompatible),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Pose { vehicle_id: String, pose: Pose },
    Query { vehicle_id: String },
    Warn { target: String, offender: String, z_hat: f64, t: f64 },
    Status { vehicle_id: String, zone: Zone, buffer_len: usize },
    Err { code: ErrCode, text: String },
}

/// Rejected line: the code and text to send back in an `ERR`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolError {
    pub code: ErrCode,
    pub text: String,
}

impl ProtocolError {
    fn parse(text: impl Into<String>) -> Self {
        Self {
            code: ErrCode::Parse,
            text: text.into(),
        }
    }

    pub fn to_message(&self) -> Message {
        Message::Err {
            code: self.code,
            text: self.text.clone(),
        }
    }
}

impl fmt::Display for ProtocolError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ERR {}: {}", self.code.code(), self.text)
    }
}

impl std::error::Error for ProtocolError {}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Message::Pose { vehicle_id, pose } => write!(
                f,
                "POSE {vehicle_id} {} {} {} {}",
                exact(pose.t),
                exact(pose.x),
                exact(pose.y),
                exact(pose.theta)
            ),
            Message::Query { vehicle_id } => write!(f, "QUERY {vehicle_id}"),
            Message::Warn {
                target,
                offender,
                z_hat,
                t,
            } => write!(f, "WARN {target} {offender} {} {}", exact(*z_hat), exact(*t)),
            Message::Status {
                vehicle_id,
                zone,
                buffer_len,
            } => write!(f, "STATUS {vehicle_id} {zone} {buffer_len}"),
            Message::Err { code, text } => {
                if text.is_empty() {
                    write!(f, "ERR {}", code.code())
                } else {
                    write!(f, "ERR {} {text}", code.code())
                }
            }
        }
    }
}

fn id(field: &str) -> Result<String, ProtocolError> {
    if valid_id(field) {
        Ok(field.to_string())
    } else {
        Err(ProtocolError::parse(format!("invalid vehicle id '{field}'")))
    }
}

fn num(field: &str, name: &str) -> Result<f64, ProtocolError> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(ProtocolError::parse(format!("{name} '{field}' is not a finite number"))),
    }
}

fn arity(fields: &[&str], n: usize) -> Result<(), ProtocolError> {
    if fields.len() == n + 1 {
        Ok(())
    } else {
        Err(ProtocolError::parse(format!(
            "{} takes {n} fields, got {}",
            fields[0],
            fields.len() - 1
        )))
    }
}

/// Parses one line, without its terminator. A trailing `\r` is ignored.
pub fn parse_line(line: &str) -> Result<Message, ProtocolError> {
    let line = line.strip_suffix('\r').unwrap_or(line);
    if !line.is_ascii() {
        return Err(ProtocolError::parse("non-ASCII input"));
    }
    let f: Vec<&str> = line.split(' ').collect();
    if f.iter().any(|s| s.is_empty()) {
        return Err(ProtocolError::parse("empty field"));
    }
    match f[0] {
        "POSE" => {
            arity(&f, 5)?;
            Ok(Message::Pose {
                vehicle_id: id(f[1])?,
                pose: Pose::new(num(f[2], "t")?, num(f[3], "x")?, num(f[4], "y")?, num(f[5], "theta")?),
            })
        }
        "QUERY" => {
            arity(&f, 1)?;
            Ok(Message::Query { vehicle_id: id(f[1])? })
        }
        "WARN" => {
            arity(&f, 4)?;
            Ok(Message::Warn {
                target: id(f[1])?,
                offender: id(f[2])?,
                z_hat: num(f[3], "z_hat")?,
                t: num(f[4], "t")?,
            })
        }
        "STATUS" => {
            arity(&f, 3)?;
            Ok(Message::Status {
                vehicle_id: id(f[1])?,
                zone: f[2].parse().map_err(|_| ProtocolError::parse(format!("unknown zone '{}'", f[2])))?,
                buffer_len: f[3]
                    .parse()
                    .map_err(|_| ProtocolError::parse(format!("buffer length '{}' is not a count", f[3])))?,
            })
        }
        "ERR" => {
            let code = f
                .get(1)
                .and_then(|c| c.parse::<u8>().ok())
                .and_then(ErrCode::from_code)
                .ok_or_else(|| ProtocolError::parse("ERR needs a code in 1..=3"))?;
            Ok(Message::Err {
                code,
                text: f[2..].join(" "),
            })
        }
        other => Err(ProtocolError {
            code: ErrCode::UnknownCommand,
            text: format!("unknown command '{other}'"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pose_round_trip() {
        let m = Message::Pose {
            vehicle_id: "car-1".into(),
            pose: Pose::new(12.5, -0.1, 3.0e-300, -3.141592653589793),
        };
        let line = m.to_string();
        assert_eq!(parse_line(&line).unwrap(), m);
    }

    #[test]
    fn codes() {
        assert_eq!(parse_line("HELLO").unwrap_err().code, ErrCode::UnknownCommand);
        assert_eq!(parse_line("POSE a 1 2 3").unwrap_err().code, ErrCode::Parse);
        assert_eq!(parse_line("POSE a 1 2 3 nan").unwrap_err().code, ErrCode::Parse);
        assert_eq!(parse_line("POSE a  1 2 3 4").unwrap_err().code, ErrCode::Parse);
        assert_eq!(parse_line("POSE a/b 1 2 3 4").unwrap_err().code, ErrCode::Parse);
        assert_eq!(parse_line("").unwrap_err().code, ErrCode::Parse);
    }

    #[test]
    fn crlf_accepted() {
        assert_eq!(parse_line("QUERY v\r").unwrap(), Message::Query { vehicle_id: "v".into() });
    }

    #[test]
    fn err_text_keeps_spaces() {
        let m = Message::Err {
            code: ErrCode::Incompatible,
            text: "pose spacing 1 s, expected 0.5 s".into(),
        };
        assert_eq!(parse_line(&m.to_string()).unwrap(), m);
    }
}
