//! Length-prefixed little-endian frame codec.
//!
//! ```text
//! frame   = u32 payload_len ++ payload
//! payload = u8 version (1) ++ u8 msg_type ++ u8 aggregator ++ u8 reserved (0)
//!        ++ u16 sender ++ u16 receiver ++ u32 entry_count ++ entries
//! REQ      entry = u32 vertex
//! RESP_STD entry = u32 vertex ++ d x f32
//! RESP_ABC entry = u32 vertex ++ d x f32 [++ u32 count, mean only]
//! ```
//!
//! The aggregator byte is 255 for REQ and RESP_STD. The feature dim `d` is
//! session state and is not carried in the frame.

use thiserror::Error;

use crate::aggregation::{AggregatorKind, Partial};

pub const WIRE_VERSION: u8 = 1;
/// Length prefix plus fixed payload header.
pub const FRAME_HEADER_LEN: usize = 4 + 12;
const NO_AGGREGATOR: u8 = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageType {
    Request = 0,
    StandardResponse = 1,
    AbcResponse = 2,
}

impl MessageType {
    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(MessageType::Request),
            1 => Some(MessageType::StandardResponse),
            2 => Some(MessageType::AbcResponse),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Request {
        sender: u16,
        receiver: u16,
        ids: Vec<u32>,
    },
    StandardResponse {
        sender: u16,
        receiver: u16,
        entries: Vec<(u32, Vec<f32>)>,
    },
    AbcResponse {
        sender: u16,
        receiver: u16,
        kind: AggregatorKind,
        entries: Vec<(u32, Partial)>,
    },
}

impl Message {
    pub fn message_type(&self) -> MessageType {
        match self {
            Message::Request { .. } => MessageType::Request,
            Message::StandardResponse { .. } => MessageType::StandardResponse,
            Message::AbcResponse { .. } => MessageType::AbcResponse,
        }
    }

    pub fn sender(&self) -> u16 {
        match self {
            Message::Request { sender, .. }
            | Message::StandardResponse { sender, .. }
            | Message::AbcResponse { sender, .. } => *sender,
        }
    }

    pub fn receiver(&self) -> u16 {
        match self {
            Message::Request { receiver, .. }
            | Message::StandardResponse { receiver, .. }
            | Message::AbcResponse { receiver, .. } => *receiver,
        }
    }

    pub fn entry_count(&self) -> usize {
        match self {
            Message::Request { ids, .. } => ids.len(),
            Message::StandardResponse { entries, .. } => entries.len(),
            Message::AbcResponse { entries, .. } => entries.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MalformedFrame {
    #[error("frame truncated: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("unsupported wire version {0}")]
    BadVersion(u8),
    #[error("unknown message type {0}")]
    UnknownType(u8),
    #[error("aggregator code {code} invalid for message type {msg_type}")]
    BadAggregator { code: u8, msg_type: u8 },
    #[error("reserved byte is {0}, expected 0")]
    NonZeroReserved(u8),
    #[error("payload length {declared} disagrees with content ({expected} bytes)")]
    LengthMismatch { declared: usize, expected: usize },
}

fn entry_len(msg_type: MessageType, dim: usize, kind: Option<AggregatorKind>) -> usize {
    match msg_type {
        MessageType::Request => 4,
        MessageType::StandardResponse => 4 + 4 * dim,
        MessageType::AbcResponse => {
            4 + 4 * dim
                + if kind == Some(AggregatorKind::Mean) {
                    4
                } else {
                    0
                }
        }
    }
}

/// Closed-form encoded size of a frame with `entries` entries.
pub fn frame_len(
    msg_type: MessageType,
    entries: usize,
    dim: usize,
    kind: Option<AggregatorKind>,
) -> usize {
    FRAME_HEADER_LEN + entries * entry_len(msg_type, dim, kind)
}

fn put_floats(out: &mut Vec<u8>, xs: &[f32]) {
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

pub fn encode_frame(msg: &Message) -> Vec<u8> {
    let mut payload = Vec::new();
    let aggregator = match msg {
        Message::AbcResponse { kind, .. } => kind.wire_code(),
        _ => NO_AGGREGATOR,
    };
    payload.extend_from_slice(&[WIRE_VERSION, msg.message_type() as u8, aggregator, 0]);
    payload.extend_from_slice(&msg.sender().to_le_bytes());
    payload.extend_from_slice(&msg.receiver().to_le_bytes());
    payload.extend_from_slice(&(msg.entry_count() as u32).to_le_bytes());
    match msg {
        Message::Request { ids, .. } => ids
            .iter()
            .for_each(|id| payload.extend_from_slice(&id.to_le_bytes())),
        Message::StandardResponse { entries, .. } => {
            for (id, row) in entries {
                payload.extend_from_slice(&id.to_le_bytes());
                put_floats(&mut payload, row);
            }
        }
        Message::AbcResponse { entries, .. } => {
            for (id, partial) in entries {
                payload.extend_from_slice(&id.to_le_bytes());
                put_floats(&mut payload, partial.values());
                if let Some(count) = partial.count() {
                    payload.extend_from_slice(&count.to_le_bytes());
                }
            }
        }
    }
    let mut frame = Vec::with_capacity(4 + payload.len());
    frame.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    frame.extend_from_slice(&payload);
    frame
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let out = self.bytes[self.at..self.at + N]
            .try_into()
            .expect("length checked before reading");
        self.at += N;
        out
    }

    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }

    fn floats(&mut self, dim: usize) -> Vec<f32> {
        (0..dim).map(|_| f32::from_le_bytes(self.take())).collect()
    }
}

/// Decodes exactly one frame; `dim` is the session feature dimension.
pub fn decode_frame(bytes: &[u8], dim: usize) -> Result<Message, MalformedFrame> {
    if bytes.len() < 4 {
        return Err(MalformedFrame::Truncated {
            needed: 4,
            available: bytes.len(),
        });
    }
    let declared = u32::from_le_bytes(bytes[..4].try_into().expect("4 bytes")) as usize;
    let available = bytes.len() - 4;
    if available < declared {
        return Err(MalformedFrame::Truncated {
            needed: 4 + declared,
            available: bytes.len(),
        });
    }
    if available > declared {
        return Err(MalformedFrame::LengthMismatch {
            declared,
            expected: available,
        });
    }
    let header = FRAME_HEADER_LEN - 4;
    if declared < header {
        return Err(MalformedFrame::LengthMismatch {
            declared,
            expected: header,
        });
    }
    let payload = &bytes[4..];
    let (version, type_code, agg_code, reserved) = (payload[0], payload[1], payload[2], payload[3]);
    if version != WIRE_VERSION {
        return Err(MalformedFrame::BadVersion(version));
    }
    let msg_type =
        MessageType::from_code(type_code).ok_or(MalformedFrame::UnknownType(type_code))?;
    let kind = match msg_type {
        MessageType::AbcResponse => Some(AggregatorKind::from_wire_code(agg_code).ok_or(
            MalformedFrame::BadAggregator {
                code: agg_code,
                msg_type: type_code,
            },
        )?),
        _ if agg_code == NO_AGGREGATOR => None,
        _ => {
            return Err(MalformedFrame::BadAggregator {
                code: agg_code,
                msg_type: type_code,
            })
        }
    };
    if reserved != 0 {
        return Err(MalformedFrame::NonZeroReserved(reserved));
    }
    let mut r = Reader {
        bytes: payload,
        at: 4,
    };
    let sender = u16::from_le_bytes(r.take());
    let receiver = u16::from_le_bytes(r.take());
    let count = r.u32() as usize;
    let expected = count
        .checked_mul(entry_len(msg_type, dim, kind))
        .and_then(|body| body.checked_add(header))
        .unwrap_or(usize::MAX);
    if expected != declared {
        return Err(MalformedFrame::LengthMismatch { declared, expected });
    }
    Ok(match msg_type {
        MessageType::Request => Message::Request {
            sender,
            receiver,
            ids: (0..count).map(|_| r.u32()).collect(),
        },
        MessageType::StandardResponse => Message::StandardResponse {
            sender,
            receiver,
            entries: (0..count).map(|_| (r.u32(), r.floats(dim))).collect(),
        },
        MessageType::AbcResponse => {
            let kind = kind.expect("abc responses carry an aggregator");
            let entries = (0..count)
                .map(|_| {
                    let id = r.u32();
                    let values = r.floats(dim);
                    let n = if kind == AggregatorKind::Mean {
                        r.u32()
                    } else {
                        0
                    };
                    (id, Partial::from_parts(kind, values, n))
                })
                .collect();
            Message::AbcResponse {
                sender,
                receiver,
                kind,
                entries,
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_response() -> Message {
        Message::AbcResponse {
            sender: 1,
            receiver: 0,
            kind: AggregatorKind::Mean,
            entries: vec![(
                7,
                Partial::Mean {
                    sum: vec![1.5, -2.25],
                    count: 3,
                },
            )],
        }
    }

    #[test]
    fn request_round_trip_and_layout() {
        let msg = Message::Request {
            sender: 1,
            receiver: 0,
            ids: vec![1, 2, 3],
        };
        let bytes = encode_frame(&msg);
        assert_eq!(bytes.len(), frame_len(MessageType::Request, 3, 8, None));
        assert_eq!(&bytes[..4], &24u32.to_le_bytes());
        assert_eq!(&bytes[4..8], &[1, 0, 255, 0]);
        assert_eq!(&bytes[8..12], &[1, 0, 0, 0]);
        assert_eq!(&bytes[12..16], &3u32.to_le_bytes());
        assert_eq!(decode_frame(&bytes, 8).unwrap(), msg);
    }

    #[test]
    fn mean_count_survives() {
        let bytes = encode_frame(&mean_response());
        assert_eq!(
            bytes.len(),
            frame_len(MessageType::AbcResponse, 1, 2, Some(AggregatorKind::Mean))
        );
        let back = decode_frame(&bytes, 2).unwrap();
        assert_eq!(back, mean_response());
        let Message::AbcResponse { entries, .. } = back else {
            panic!("wrong type")
        };
        assert_eq!(entries[0].1.count(), Some(3));
    }

    #[test]
    fn truncation_is_rejected() {
        let bytes = encode_frame(&mean_response());
        assert!(matches!(
            decode_frame(&bytes[..bytes.len() - 1], 2),
            Err(MalformedFrame::Truncated { .. })
        ));
        assert!(matches!(
            decode_frame(&bytes[..3], 2),
            Err(MalformedFrame::Truncated { .. })
        ));
    }

    #[test]
    fn header_defects() {
        let good = encode_frame(&Message::Request {
            sender: 0,
            receiver: 1,
            ids: vec![5],
        });
        let patched = |at: usize, v: u8| {
            let mut b = good.clone();
            b[at] = v;
            decode_frame(&b, 4)
        };
        assert_eq!(patched(4, 2), Err(MalformedFrame::BadVersion(2)));
        assert_eq!(patched(5, 9), Err(MalformedFrame::UnknownType(9)));
        assert_eq!(
            patched(6, 0),
            Err(MalformedFrame::BadAggregator {
                code: 0,
                msg_type: 0
            })
        );
        assert_eq!(patched(7, 1), Err(MalformedFrame::NonZeroReserved(1)));
        // entry count says 2, payload holds 1
        assert!(matches!(
            patched(12, 2),
            Err(MalformedFrame::LengthMismatch { .. })
        ));
        let mut long = good.clone();
        long.push(0);
        assert!(matches!(
            decode_frame(&long, 4),
            Err(MalformedFrame::LengthMismatch { .. })
        ));
        // decoding with the wrong session dim cannot line up for responses
        let resp = encode_frame(&Message::StandardResponse {
            sender: 0,
            receiver: 1,
            entries: vec![(0, vec![1.0; 4])],
        });
        assert!(matches!(
            decode_frame(&resp, 3),
            Err(MalformedFrame::LengthMismatch { .. })
        ));
    }

    #[test]
    fn empty_extremum_partials_round_trip() {
        let msg = Message::AbcResponse {
            sender: 2,
            receiver: 3,
            kind: AggregatorKind::Max,
            entries: vec![
                (0, Partial::empty(AggregatorKind::Max, 2)),
                (
                    1,
                    Partial::Max {
                        values: vec![0.5, -1.0],
                        empty: false,
                    },
                ),
            ],
        };
        assert_eq!(decode_frame(&encode_frame(&msg), 2).unwrap(), msg);
    }
}
