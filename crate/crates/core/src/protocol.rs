//! JSON SCADA point messages.
//!
//! Every status and control message is a flat JSON object with five keys:
//!
//! ```json
//! {"LinkAdd": 1, "ASDU_CA": 51908, "TypeID": 30, "IOA": 4, "Value": "1(ON)"}
//! ```
//!
//! `ASDU_CA` identifies the device, `IOA` the point on the device and `Value`
//! is one of the two wire tokens `"1(ON)"` / `"0(OFF)"`. The meaning of an IOA
//! depends on the device class, see [`IoaProfile`]. `TypeID` is carried through
//! untouched and never consulted.

use std::fmt;
use std::str::FromStr;

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::Value as Json;
use thiserror::Error;

use crate::topology::SwitchKind;

pub const DEFAULT_LINK_ADD: u32 = 1;
pub const DEFAULT_TYPE_ID: u32 = 30;

const ON_TOKEN: &str = "1(ON)";
const OFF_TOKEN: &str = "0(OFF)";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("malformed point message: {0}")]
    MalformedJson(String),
    #[error("unknown value token {0:?}")]
    UnknownValueToken(String),
    #[error("point message is missing field {0}")]
    MissingField(&'static str),
    #[error("ASDU_CA must be positive")]
    ZeroAsdu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PointValue {
    On,
    Off,
}

impl PointValue {
    pub fn from_bool(asserted: bool) -> Self {
        if asserted {
            PointValue::On
        } else {
            PointValue::Off
        }
    }

    pub fn is_on(self) -> bool {
        self == PointValue::On
    }

    pub fn token(self) -> &'static str {
        match self {
            PointValue::On => ON_TOKEN,
            PointValue::Off => OFF_TOKEN,
        }
    }
}

impl fmt::Display for PointValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for PointValue {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            ON_TOKEN => Ok(PointValue::On),
            OFF_TOKEN => Ok(PointValue::Off),
            other => Err(ProtocolError::UnknownValueToken(other.to_string())),
        }
    }
}

impl Serialize for PointValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.token())
    }
}

impl<'de> Deserialize<'de> for PointValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let token = String::deserialize(d)?;
        token.parse().map_err(serde::de::Error::custom)
    }
}

/// One SCADA point message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PointMessage {
    pub link_add: u32,
    pub asdu_ca: u32,
    pub type_id: u32,
    pub ioa: u32,
    pub value: PointValue,
}

impl PointMessage {
    pub fn new(asdu_ca: u32, ioa: u32, value: PointValue) -> Self {
        Self {
            link_add: DEFAULT_LINK_ADD,
            asdu_ca,
            type_id: DEFAULT_TYPE_ID,
            ioa,
            value,
        }
    }
}

impl Serialize for PointMessage {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(5))?;
        map.serialize_entry("LinkAdd", &self.link_add)?;
        map.serialize_entry("ASDU_CA", &self.asdu_ca)?;
        map.serialize_entry("TypeID", &self.type_id)?;
        map.serialize_entry("IOA", &self.ioa)?;
        map.serialize_entry("Value", &self.value)?;
        map.end()
    }
}

impl<'de> Deserialize<'de> for PointMessage {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let value = Json::deserialize(d)?;
        from_json(&value).map_err(serde::de::Error::custom)
    }
}

/// Compact single-line JSON text of `message`.
pub fn encode(message: &PointMessage) -> String {
    serde_json::to_string(message).expect("point messages always serialize")
}

/// Multi-line JSON text with four-space indentation.
pub fn encode_pretty(message: &PointMessage) -> String {
    let mut out = Vec::new();
    let formatter = serde_json::ser::PrettyFormatter::with_indent(b"    ");
    let mut ser = serde_json::Serializer::with_formatter(&mut out, formatter);
    message.serialize(&mut ser).expect("point messages always serialize");
    String::from_utf8(out).expect("serde_json emits UTF-8")
}

pub fn decode(bytes: &[u8]) -> Result<PointMessage, ProtocolError> {
    let value: Json =
        serde_json::from_slice(bytes).map_err(|e| ProtocolError::MalformedJson(e.to_string()))?;
    from_json(&value)
}

pub fn decode_str(text: &str) -> Result<PointMessage, ProtocolError> {
    decode(text.as_bytes())
}

fn from_json(value: &Json) -> Result<PointMessage, ProtocolError> {
    let obj = value
        .as_object()
        .ok_or_else(|| ProtocolError::MalformedJson("expected a JSON object".into()))?;
    let int = |key: &'static str| -> Result<u32, ProtocolError> {
        let v = obj.get(key).ok_or(ProtocolError::MissingField(key))?;
        v.as_u64()
            .and_then(|n| u32::try_from(n).ok())
            .ok_or_else(|| ProtocolError::MalformedJson(format!("{key} must be an unsigned integer")))
    };
    let message = PointMessage {
        link_add: int("LinkAdd")?,
        asdu_ca: int("ASDU_CA")?,
        type_id: int("TypeID")?,
        ioa: int("IOA")?,
        value: match obj.get("Value").ok_or(ProtocolError::MissingField("Value"))? {
            Json::String(token) => token.parse()?,
            other => return Err(ProtocolError::UnknownValueToken(other.to_string())),
        },
    };
    if message.asdu_ca == 0 {
        return Err(ProtocolError::ZeroAsdu);
    }
    Ok(message)
}

// ---------------------------------------------------------------------------
// Device-class semantics
// ---------------------------------------------------------------------------

/// The three points used on each device class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IoaProfile {
    /// Fault passage indication ("Fault Current" / "End of Protection Sequence").
    pub fpi: u32,
    /// Loss of voltage indication ("AC Supply Fail" / "Controller Locked Out").
    pub lvi: u32,
    /// Circuit breaker control: ON opens, OFF closes.
    pub control: u32,
}

pub const LBFM_PROFILE: IoaProfile = IoaProfile {
    fpi: 4,
    lvi: 2,
    control: 8,
};

pub const RECLOSER_PROFILE: IoaProfile = IoaProfile {
    fpi: 27,
    lvi: 34,
    control: 4096,
};

impl IoaProfile {
    pub fn for_kind(kind: SwitchKind) -> &'static IoaProfile {
        match kind {
            SwitchKind::Lbfm => &LBFM_PROFILE,
            SwitchKind::Recloser => &RECLOSER_PROFILE,
        }
    }

    pub fn ioa(&self, which: Indicator) -> u32 {
        match which {
            Indicator::Fpi => self.fpi,
            Indicator::Lvi => self.lvi,
        }
    }
}

/// A status indicator on a switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Indicator {
    #[serde(rename = "FPI")]
    Fpi,
    #[serde(rename = "LVI")]
    Lvi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Meaning {
    Fpi,
    Lvi,
    Control,
    Unknown,
}

impl From<Indicator> for Meaning {
    fn from(i: Indicator) -> Self {
        match i {
            Indicator::Fpi => Meaning::Fpi,
            Indicator::Lvi => Meaning::Lvi,
        }
    }
}

/// A decoded status message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Indication {
    pub asdu_ca: u32,
    pub meaning: Meaning,
    pub asserted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BreakerAction {
    Open,
    Close,
}

impl BreakerAction {
    pub fn wire_value(self) -> PointValue {
        match self {
            BreakerAction::Open => PointValue::On,
            BreakerAction::Close => PointValue::Off,
        }
    }

    pub fn from_wire(value: PointValue) -> Self {
        match value {
            PointValue::On => BreakerAction::Open,
            PointValue::Off => BreakerAction::Close,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ControlCommand {
    pub asdu_ca: u32,
    pub action: BreakerAction,
}

/// Map a message through the profile of `kind`.
///
/// The control point is reported as [`Meaning::Control`]; any other point
/// outside the profile is [`Meaning::Unknown`].
pub fn interpret(message: &PointMessage, kind: SwitchKind) -> Indication {
    let profile = IoaProfile::for_kind(kind);
    let meaning = match message.ioa {
        ioa if ioa == profile.fpi => Meaning::Fpi,
        ioa if ioa == profile.lvi => Meaning::Lvi,
        ioa if ioa == profile.control => Meaning::Control,
        _ => Meaning::Unknown,
    };
    Indication {
        asdu_ca: message.asdu_ca,
        meaning,
        asserted: message.value.is_on(),
    }
}

/// Read a control message for a device of `kind`. `None` unless the message
/// addresses the control point.
pub fn interpret_control(message: &PointMessage, kind: SwitchKind) -> Option<ControlCommand> {
    (message.ioa == IoaProfile::for_kind(kind).control).then(|| ControlCommand {
        asdu_ca: message.asdu_ca,
        action: BreakerAction::from_wire(message.value),
    })
}

pub fn make_status(kind: SwitchKind, asdu_ca: u32, which: Indicator, asserted: bool) -> PointMessage {
    PointMessage::new(
        asdu_ca,
        IoaProfile::for_kind(kind).ioa(which),
        PointValue::from_bool(asserted),
    )
}

pub fn make_control(kind: SwitchKind, asdu_ca: u32, action: BreakerAction) -> PointMessage {
    PointMessage::new(asdu_ca, IoaProfile::for_kind(kind).control, action.wire_value())
}
