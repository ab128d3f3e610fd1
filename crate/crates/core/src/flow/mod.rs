//! Packet records, bidirectional flows and device sessions.

mod assemble;
mod manifest;
pub mod pcap;

pub use assemble::{assemble_flows, truncate_session};
pub use manifest::{parse_manifest, read_manifest, ManifestEntry};
pub use pcap::{parse_capture, Capture};

use std::fmt;
use std::net::IpAddr;
use thiserror::Error;

/// Upper bound on the number of payload bytes retained per packet.
pub const PAYLOAD_PREFIX_LEN: usize = 512;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("malformed capture: {0}")]
    MalformedCapture(String),
    #[error("unsupported link type {0} (only Ethernet is accepted)")]
    UnsupportedLinkType(u32),
    #[error("observation window must be positive, got {0}")]
    NonPositiveWindow(f64),
    #[error("manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Proto {
    Tcp,
    Udp,
    Other(u8),
}

impl Proto {
    pub fn from_number(n: u8) -> Self {
        match n {
            6 => Proto::Tcp,
            17 => Proto::Udp,
            n => Proto::Other(n),
        }
    }

    /// IANA protocol number.
    pub fn number(self) -> u8 {
        match self {
            Proto::Tcp => 6,
            Proto::Udp => 17,
            Proto::Other(n) => n,
        }
    }
}

impl fmt::Display for Proto {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Proto::Tcp => f.write_str("TCP"),
            Proto::Udp => f.write_str("UDP"),
            Proto::Other(n) => write!(f, "OTHER({n})"),
        }
    }
}

/// TCP flag byte, bit layout as on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct TcpFlags(pub u8);

impl TcpFlags {
    pub const FIN: TcpFlags = TcpFlags(0x01);
    pub const SYN: TcpFlags = TcpFlags(0x02);
    pub const RST: TcpFlags = TcpFlags(0x04);
    pub const PSH: TcpFlags = TcpFlags(0x08);
    pub const ACK: TcpFlags = TcpFlags(0x10);
    pub const URG: TcpFlags = TcpFlags(0x20);
    pub const ECE: TcpFlags = TcpFlags(0x40);
    pub const CWR: TcpFlags = TcpFlags(0x80);

    pub const fn empty() -> Self {
        TcpFlags(0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, other: TcpFlags) -> bool {
        self.0 & other.0 == other.0 && other.0 != 0
    }
}

impl std::ops::BitOr for TcpFlags {
    type Output = TcpFlags;
    fn bitor(self, rhs: TcpFlags) -> TcpFlags {
        TcpFlags(self.0 | rhs.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Endpoint {
    pub ip: IpAddr,
    pub port: u16,
}

impl Endpoint {
    pub fn new(ip: IpAddr, port: u16) -> Self {
        Self { ip, port }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.ip {
            IpAddr::V4(ip) => write!(f, "{ip}:{}", self.port),
            IpAddr::V6(ip) => write!(f, "[{ip}]:{}", self.port),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PacketRecord {
    /// Seconds since the capture epoch, microsecond resolution.
    pub ts: f64,
    pub src_ip: IpAddr,
    pub dst_ip: IpAddr,
    pub src_port: u16,
    pub dst_port: u16,
    pub proto: Proto,
    pub tcp_flags: TcpFlags,
    pub wire_len: u32,
    /// First `min(payload_len, 512)` transport payload bytes.
    pub payload_prefix: Vec<u8>,
    pub payload_len: u32,
}

impl PacketRecord {
    pub fn src(&self) -> Endpoint {
        Endpoint::new(self.src_ip, self.src_port)
    }

    pub fn dst(&self) -> Endpoint {
        Endpoint::new(self.dst_ip, self.dst_port)
    }

    pub fn key(&self) -> FlowKey {
        FlowKey::new(self.src(), self.dst(), self.proto)
    }

    /// The same packet travelling in the opposite direction.
    pub fn reversed(&self) -> PacketRecord {
        PacketRecord {
            src_ip: self.dst_ip,
            dst_ip: self.src_ip,
            src_port: self.dst_port,
            dst_port: self.src_port,
            ..self.clone()
        }
    }
}

/// Direction-independent 5-tuple; `endpoint_a` is the smaller endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FlowKey {
    pub endpoint_a: Endpoint,
    pub endpoint_b: Endpoint,
    pub proto: Proto,
}

impl FlowKey {
    pub fn new(x: Endpoint, y: Endpoint, proto: Proto) -> Self {
        let (endpoint_a, endpoint_b) = if x <= y { (x, y) } else { (y, x) };
        Self {
            endpoint_a,
            endpoint_b,
            proto,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub key: FlowKey,
    /// Sender of the flow's first packet; defines the forward direction.
    pub initiator: Endpoint,
    pub packets: Vec<PacketRecord>,
    pub session_id: String,
    pub first_ts: f64,
    pub last_ts: f64,
}

impl Flow {
    pub fn responder(&self) -> Endpoint {
        if self.initiator == self.key.endpoint_a {
            self.key.endpoint_b
        } else {
            self.key.endpoint_a
        }
    }

    pub fn is_forward(&self, p: &PacketRecord) -> bool {
        p.src() == self.initiator
    }

    /// Same packets with the opposite orientation.
    pub fn with_swapped_initiator(&self) -> Flow {
        Flow {
            initiator: self.responder(),
            ..self.clone()
        }
    }

    fn refresh_bounds(&mut self) {
        self.first_ts = self.packets.first().map_or(0.0, |p| p.ts);
        self.last_ts = self.packets.last().map_or(0.0, |p| p.ts);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub session_id: String,
    pub device_label: String,
    pub power_on_ts: f64,
    pub flows: Vec<Flow>,
}

impl Session {
    /// Builds a session from raw packets. Packets captured before power-on
    /// do not belong to the device's startup and are discarded.
    pub fn from_packets(
        session_id: impl Into<String>,
        device_label: impl Into<String>,
        power_on_ts: f64,
        packets: Vec<PacketRecord>,
    ) -> Self {
        let session_id = session_id.into();
        let packets: Vec<_> = packets.into_iter().filter(|p| p.ts >= power_on_ts).collect();
        let flows = assemble_flows(packets, &session_id);
        Self {
            session_id,
            device_label: device_label.into(),
            power_on_ts,
            flows,
        }
    }

    pub fn packet_count(&self) -> usize {
        self.flows.iter().map(|f| f.packets.len()).sum()
    }
}
