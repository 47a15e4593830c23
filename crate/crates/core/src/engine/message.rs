//! Messages exchanged between edge sites and the cloud.
//!
//! `size` is the length of the payload encoding only; the 5-byte header
//! (kind, source, destination) is framing and is not counted.

use std::fmt;

use thiserror::Error;

use crate::streams::LabeledPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MessageKind {
    /// Sensor data.
    S,
    /// Sensor data together with the edge's prediction.
    SD,
    /// Serialized model.
    M,
    /// Prediction / decision.
    D,
}

impl MessageKind {
    fn tag(self) -> u8 {
        match self {
            MessageKind::S => 0,
            MessageKind::SD => 1,
            MessageKind::M => 2,
            MessageKind::D => 3,
        }
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MessageKind::S => "S",
            MessageKind::SD => "S+D",
            MessageKind::M => "M",
            MessageKind::D => "D",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeId {
    Cloud,
    Site(usize),
}

impl NodeId {
    const CLOUD_WIRE: u16 = u16::MAX;

    fn to_wire(self) -> u16 {
        match self {
            NodeId::Cloud => Self::CLOUD_WIRE,
            NodeId::Site(i) => u16::try_from(i).expect("site id exceeds u16"),
        }
    }

    fn from_wire(v: u16) -> Self {
        if v == Self::CLOUD_WIRE {
            NodeId::Cloud
        } else {
            NodeId::Site(v as usize)
        }
    }
}

/// Labeled samples travel with their ground truth so the receiver can train.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Sensor(Vec<LabeledPoint>),
    SensorDecision {
        points: Vec<LabeledPoint>,
        prediction: Option<usize>,
    },
    Model(Vec<u8>),
    Decision(Option<usize>),
}

impl Payload {
    pub fn kind(&self) -> MessageKind {
        match self {
            Payload::Sensor(_) => MessageKind::S,
            Payload::SensorDecision { .. } => MessageKind::SD,
            Payload::Model(_) => MessageKind::M,
            Payload::Decision(_) => MessageKind::D,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            Payload::Sensor(points) => encode_points(points, &mut out),
            Payload::SensorDecision { points, prediction } => {
                encode_points(points, &mut out);
                out.extend(encode_label(*prediction));
            }
            Payload::Model(bytes) => out.extend_from_slice(bytes),
            Payload::Decision(label) => out.extend(encode_label(*label)),
        }
        out
    }

    fn decode(kind: u8, bytes: &[u8]) -> Result<Self, WireError> {
        let mut cur = Cursor { bytes, at: 0 };
        let payload = match kind {
            0 => Payload::Sensor(decode_points(&mut cur)?),
            1 => {
                let points = decode_points(&mut cur)?;
                let prediction = decode_label(cur.u32()?);
                Payload::SensorDecision { points, prediction }
            }
            2 => Payload::Model(bytes.to_vec()),
            3 => Payload::Decision(decode_label(cur.u32()?)),
            k => return Err(WireError::UnknownKind(k)),
        };
        if kind != 2 && cur.at != bytes.len() {
            return Err(WireError::Trailing(bytes.len() - cur.at));
        }
        Ok(payload)
    }
}

const ABSTAIN: u32 = u32::MAX;

fn encode_label(label: Option<usize>) -> [u8; 4] {
    label
        .map_or(ABSTAIN, |l| u32::try_from(l).expect("label exceeds u32"))
        .to_le_bytes()
}

fn decode_label(v: u32) -> Option<usize> {
    (v != ABSTAIN).then_some(v as usize)
}

// u16 count, then per point: u64 iteration, u32 label, u16 dim, dim × f64.
fn encode_points(points: &[LabeledPoint], out: &mut Vec<u8>) {
    out.extend(u16::try_from(points.len()).expect("batch too large").to_le_bytes());
    for p in points {
        out.extend(p.iteration.to_le_bytes());
        out.extend((p.label as u32).to_le_bytes());
        out.extend((p.features.len() as u16).to_le_bytes());
        for f in &p.features {
            out.extend(f.to_le_bytes());
        }
    }
}

fn decode_points(cur: &mut Cursor<'_>) -> Result<Vec<LabeledPoint>, WireError> {
    let n = cur.u16()? as usize;
    let mut points = Vec::with_capacity(n.min(1024));
    for _ in 0..n {
        let iteration = cur.u64()?;
        let label = cur.u32()? as usize;
        let dim = cur.u16()? as usize;
        let features = (0..dim).map(|_| cur.f64()).collect::<Result<_, _>>()?;
        points.push(LabeledPoint::new(features, label, iteration));
    }
    Ok(points)
}

#[derive(Debug, Error, PartialEq)]
pub enum WireError {
    #[error("message truncated at byte {0}")]
    Truncated(usize),
    #[error("unknown message kind {0}")]
    UnknownKind(u8),
    #[error("{0} trailing bytes after payload")]
    Trailing(usize),
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], WireError> {
        let end = self.at + N;
        let s = self.bytes.get(self.at..end).ok_or(WireError::Truncated(self.at))?;
        self.at = end;
        Ok(s.try_into().unwrap())
    }
    fn u16(&mut self) -> Result<u16, WireError> {
        self.take().map(u16::from_le_bytes)
    }
    fn u32(&mut self) -> Result<u32, WireError> {
        self.take().map(u32::from_le_bytes)
    }
    fn u64(&mut self) -> Result<u64, WireError> {
        self.take().map(u64::from_le_bytes)
    }
    fn f64(&mut self) -> Result<f64, WireError> {
        self.take().map(f64::from_le_bytes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub src: NodeId,
    pub dst: NodeId,
    pub sent_at: f64,
    pub payload: Payload,
    size: usize,
}

impl Message {
    pub fn new(src: NodeId, dst: NodeId, sent_at: f64, payload: Payload) -> Self {
        let size = payload.encode().len();
        Self {
            src,
            dst,
            sent_at,
            payload,
            size,
        }
    }

    pub fn kind(&self) -> MessageKind {
        self.payload.kind()
    }

    /// Payload bytes on the wire.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Header (kind u8, src u16, dst u16) followed by the payload.
    pub fn to_wire(&self) -> Vec<u8> {
        let mut out = vec![self.kind().tag()];
        out.extend(self.src.to_wire().to_le_bytes());
        out.extend(self.dst.to_wire().to_le_bytes());
        out.extend(self.payload.encode());
        out
    }

    pub fn from_wire(bytes: &[u8], sent_at: f64) -> Result<Self, WireError> {
        if bytes.len() < 5 {
            return Err(WireError::Truncated(bytes.len()));
        }
        let src = NodeId::from_wire(u16::from_le_bytes([bytes[1], bytes[2]]));
        let dst = NodeId::from_wire(u16::from_le_bytes([bytes[3], bytes[4]]));
        let payload = Payload::decode(bytes[0], &bytes[5..])?;
        Ok(Self::new(src, dst, sent_at, payload))
    }
}
