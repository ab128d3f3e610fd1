//! Classic libpcap reader and writer for Ethernet captures.
//!
//! Only the original microsecond format is accepted, in either byte order.
//! The writer produces little-endian files and is what the synthetic trace
//! generator uses.

use super::{FlowError, PacketRecord, Proto, TcpFlags, PAYLOAD_PREFIX_LEN};
use std::collections::HashMap;
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

const MAGIC_USEC: u32 = 0xA1B2_C3D4;
const MAGIC_USEC_SWAPPED: u32 = 0xD4C3_B2A1;
const LINKTYPE_ETHERNET: u32 = 1;
const GLOBAL_HEADER_LEN: usize = 24;
const RECORD_HEADER_LEN: usize = 16;

const ETHERTYPE_IPV4: u16 = 0x0800;
const ETHERTYPE_IPV6: u16 = 0x86DD;
const ETHERTYPE_VLAN: u16 = 0x8100;
pub const ETHERTYPE_ARP: u16 = 0x0806;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Capture {
    pub packets: Vec<PacketRecord>,
    /// Non-IP frames (ARP, LLDP, ...).
    pub skipped_non_ip: usize,
    /// IP frames whose headers could not be decoded.
    pub skipped_malformed: usize,
    /// A trailing record cut short by the end of the file.
    pub truncated_records: usize,
}

#[derive(Clone, Copy)]
enum Endian {
    Little,
    Big,
}

impl Endian {
    fn u32(self, b: &[u8]) -> u32 {
        let a = [b[0], b[1], b[2], b[3]];
        match self {
            Endian::Little => u32::from_le_bytes(a),
            Endian::Big => u32::from_be_bytes(a),
        }
    }
}

fn be16(b: &[u8]) -> u16 {
    u16::from_be_bytes([b[0], b[1]])
}

/// Parses an entire classic pcap file held in memory.
pub fn parse_capture(bytes: &[u8]) -> Result<Capture, FlowError> {
    if bytes.len() < GLOBAL_HEADER_LEN {
        return Err(FlowError::MalformedCapture(format!(
            "file is {} bytes, shorter than the 24-byte global header",
            bytes.len()
        )));
    }
    let endian = match u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) {
        MAGIC_USEC => Endian::Little,
        MAGIC_USEC_SWAPPED => Endian::Big,
        m => return Err(FlowError::MalformedCapture(format!("bad magic {m:#010x}"))),
    };
    let linktype = endian.u32(&bytes[20..24]);
    if linktype != LINKTYPE_ETHERNET {
        return Err(FlowError::UnsupportedLinkType(linktype));
    }

    let mut cap = Capture::default();
    let mut frag_ports: HashMap<(IpAddr, IpAddr, u8, u32), (u16, u16)> = HashMap::new();
    let mut pos = GLOBAL_HEADER_LEN;
    while pos < bytes.len() {
        if bytes.len() - pos < RECORD_HEADER_LEN {
            cap.truncated_records += 1;
            break;
        }
        let h = &bytes[pos..pos + RECORD_HEADER_LEN];
        let ts_sec = endian.u32(&h[0..4]);
        let ts_usec = endian.u32(&h[4..8]);
        let incl_len = endian.u32(&h[8..12]) as usize;
        let orig_len = endian.u32(&h[12..16]);
        pos += RECORD_HEADER_LEN;
        if bytes.len() - pos < incl_len {
            cap.truncated_records += 1;
            break;
        }
        let frame = &bytes[pos..pos + incl_len];
        pos += incl_len;

        let ts = f64::from(ts_sec) + f64::from(ts_usec) * 1e-6;
        match decode_frame(frame, ts, orig_len, &mut frag_ports) {
            Decoded::Packet(p) => cap.packets.push(p),
            Decoded::NonIp => cap.skipped_non_ip += 1,
            Decoded::Malformed => cap.skipped_malformed += 1,
        }
    }
    Ok(cap)
}

enum Decoded {
    Packet(PacketRecord),
    NonIp,
    Malformed,
}

struct IpLayer<'a> {
    src: IpAddr,
    dst: IpAddr,
    proto: u8,
    /// Transport bytes as captured (may be shorter than `transport_len`).
    body: &'a [u8],
    /// Transport length claimed by the IP header.
    transport_len: usize,
    /// `Some(id)` for a non-first fragment.
    later_fragment: Option<u32>,
    /// `Some(id)` for a first fragment with more to follow.
    first_fragment: Option<u32>,
}

fn decode_frame(
    frame: &[u8],
    ts: f64,
    wire_len: u32,
    frag_ports: &mut HashMap<(IpAddr, IpAddr, u8, u32), (u16, u16)>,
) -> Decoded {
    if frame.len() < 14 {
        return Decoded::Malformed;
    }
    let mut ethertype = be16(&frame[12..14]);
    let mut off = 14;
    while ethertype == ETHERTYPE_VLAN {
        if frame.len() < off + 4 {
            return Decoded::Malformed;
        }
        ethertype = be16(&frame[off + 2..off + 4]);
        off += 4;
    }
    let l3 = &frame[off..];
    let ip = match ethertype {
        ETHERTYPE_IPV4 => decode_ipv4(l3),
        ETHERTYPE_IPV6 => decode_ipv6(l3),
        _ => return Decoded::NonIp,
    };
    let Some(ip) = ip else {
        return Decoded::Malformed;
    };
    let proto = Proto::from_number(ip.proto);

    let (src_port, dst_port, flags, payload_off, payload_len) = if let Some(id) = ip.later_fragment
    {
        let (sp, dp) = frag_ports
            .get(&(ip.src, ip.dst, ip.proto, id))
            .copied()
            .unwrap_or((0, 0));
        (sp, dp, TcpFlags::empty(), None, ip.transport_len)
    } else {
        match proto {
            Proto::Tcp => {
                if ip.body.len() < 20 {
                    return Decoded::Malformed;
                }
                let hdr = usize::from(ip.body[12] >> 4) * 4;
                if hdr < 20 || hdr > ip.transport_len {
                    return Decoded::Malformed;
                }
                (
                    be16(&ip.body[0..2]),
                    be16(&ip.body[2..4]),
                    TcpFlags(ip.body[13]),
                    Some(hdr),
                    ip.transport_len - hdr,
                )
            }
            Proto::Udp => {
                if ip.body.len() < 8 || ip.transport_len < 8 {
                    return Decoded::Malformed;
                }
                (
                    be16(&ip.body[0..2]),
                    be16(&ip.body[2..4]),
                    TcpFlags::empty(),
                    Some(8),
                    ip.transport_len - 8,
                )
            }
            Proto::Other(_) => (0, 0, TcpFlags::empty(), Some(0), ip.transport_len),
        }
    };
    if let Some(id) = ip.first_fragment {
        frag_ports.insert((ip.src, ip.dst, ip.proto, id), (src_port, dst_port));
    }
    let payload_prefix = match payload_off {
        Some(o) => {
            let avail = ip.body.len().saturating_sub(o);
            let n = avail.min(payload_len).min(PAYLOAD_PREFIX_LEN);
            ip.body[o..o + n].to_vec()
        }
        None => Vec::new(),
    };
    Decoded::Packet(PacketRecord {
        ts,
        src_ip: ip.src,
        dst_ip: ip.dst,
        src_port,
        dst_port,
        proto,
        tcp_flags: flags,
        wire_len,
        payload_prefix,
        payload_len: u32::try_from(payload_len).unwrap_or(u32::MAX),
    })
}

fn decode_ipv4(b: &[u8]) -> Option<IpLayer<'_>> {
    if b.len() < 20 || b[0] >> 4 != 4 {
        return None;
    }
    let ihl = usize::from(b[0] & 0x0F) * 4;
    let total = usize::from(be16(&b[2..4]));
    if ihl < 20 || total < ihl || b.len() < ihl {
        return None;
    }
    let id = u32::from(be16(&b[4..6]));
    let frag = be16(&b[6..8]);
    let more_fragments = frag & 0x2000 != 0;
    let offset = frag & 0x1FFF;
    let src = IpAddr::V4(Ipv4Addr::new(b[12], b[13], b[14], b[15]));
    let dst = IpAddr::V4(Ipv4Addr::new(b[16], b[17], b[18], b[19]));
    // Ethernet padding past `total` is ignored.
    let end = total.min(b.len());
    Some(IpLayer {
        src,
        dst,
        proto: b[9],
        body: &b[ihl..end],
        transport_len: total - ihl,
        later_fragment: (offset != 0).then_some(id),
        first_fragment: (offset == 0 && more_fragments).then_some(id),
    })
}

fn decode_ipv6(b: &[u8]) -> Option<IpLayer<'_>> {
    if b.len() < 40 || b[0] >> 4 != 6 {
        return None;
    }
    let payload_len = usize::from(be16(&b[4..6]));
    let mut next = b[6];
    let mut src = [0u8; 16];
    let mut dst = [0u8; 16];
    src.copy_from_slice(&b[8..24]);
    dst.copy_from_slice(&b[24..40]);
    let end = (40 + payload_len).min(b.len());
    let mut off = 40;
    let mut remaining = payload_len;
    let mut later_fragment = None;
    let mut first_fragment = None;
    loop {
        match next {
            // hop-by-hop, routing, destination options
            0 | 43 | 60 => {
                if end < off + 8 {
                    return None;
                }
                let len = (usize::from(b[off + 1]) + 1) * 8;
                if remaining < len || end < off + len {
                    return None;
                }
                next = b[off];
                off += len;
                remaining -= len;
            }
            44 => {
                if end < off + 8 || remaining < 8 {
                    return None;
                }
                let frag = be16(&b[off + 2..off + 4]);
                let id = u32::from_be_bytes([b[off + 4], b[off + 5], b[off + 6], b[off + 7]]);
                if frag >> 3 != 0 {
                    later_fragment = Some(id);
                } else if frag & 1 != 0 {
                    first_fragment = Some(id);
                }
                next = b[off];
                off += 8;
                remaining -= 8;
            }
            _ => break,
        }
    }
    Some(IpLayer {
        src: IpAddr::V6(Ipv6Addr::from(src)),
        dst: IpAddr::V6(Ipv6Addr::from(dst)),
        proto: next,
        body: &b[off..end],
        transport_len: remaining,
        later_fragment,
        first_fragment,
    })
}

/// Description of one frame to synthesize.
#[derive(Debug, Clone)]
pub struct FrameSpec<'a> {
    pub src_ip: IpAddr,
    pub dst_ip: IpAddr,
    pub src_port: u16,
    pub dst_port: u16,
    pub proto: Proto,
    pub tcp_flags: TcpFlags,
    pub ip_id: u16,
    pub payload: &'a [u8],
}

fn mac_for(ip: IpAddr) -> [u8; 6] {
    let o = match ip {
        IpAddr::V4(v) => v.octets(),
        IpAddr::V6(v) => {
            let s = v.octets();
            [s[12], s[13], s[14], s[15]]
        }
    };
    [0x02, 0x00, o[0], o[1], o[2], o[3]]
}

fn ipv4_checksum(h: &[u8]) -> u16 {
    let mut sum: u32 = 0;
    for c in h.chunks(2) {
        sum += u32::from(u16::from_be_bytes([c[0], *c.get(1).unwrap_or(&0)]));
    }
    while sum >> 16 != 0 {
        sum = (sum & 0xFFFF) + (sum >> 16);
    }
    !(sum as u16)
}

/// Serializes an Ethernet + IPv4/IPv6 + TCP/UDP frame. Transport checksums
/// are left zero.
pub fn build_frame(spec: &FrameSpec<'_>) -> Vec<u8> {
    let mut transport = Vec::with_capacity(20 + spec.payload.len());
    match spec.proto {
        Proto::Tcp => {
            transport.extend_from_slice(&spec.src_port.to_be_bytes());
            transport.extend_from_slice(&spec.dst_port.to_be_bytes());
            transport.extend_from_slice(&[0, 0, 0, 1, 0, 0, 0, 0]);
            transport.push(5 << 4);
            transport.push(spec.tcp_flags.0);
            transport.extend_from_slice(&[0xFF, 0xFF, 0, 0, 0, 0]);
        }
        Proto::Udp => {
            let len = u16::try_from(8 + spec.payload.len()).expect("udp payload too large");
            transport.extend_from_slice(&spec.src_port.to_be_bytes());
            transport.extend_from_slice(&spec.dst_port.to_be_bytes());
            transport.extend_from_slice(&len.to_be_bytes());
            transport.extend_from_slice(&[0, 0]);
        }
        Proto::Other(_) => {}
    }
    transport.extend_from_slice(spec.payload);

    let mut frame = Vec::with_capacity(14 + 40 + transport.len());
    frame.extend_from_slice(&mac_for(spec.dst_ip));
    frame.extend_from_slice(&mac_for(spec.src_ip));
    match (spec.src_ip, spec.dst_ip) {
        (IpAddr::V4(s), IpAddr::V4(d)) => {
            frame.extend_from_slice(&ETHERTYPE_IPV4.to_be_bytes());
            let total = u16::try_from(20 + transport.len()).expect("ip packet too large");
            let mut h = Vec::with_capacity(20);
            h.push(0x45);
            h.push(0);
            h.extend_from_slice(&total.to_be_bytes());
            h.extend_from_slice(&spec.ip_id.to_be_bytes());
            h.extend_from_slice(&[0x40, 0]);
            h.push(64);
            h.push(spec.proto.number());
            h.extend_from_slice(&[0, 0]);
            h.extend_from_slice(&s.octets());
            h.extend_from_slice(&d.octets());
            let c = ipv4_checksum(&h);
            h[10..12].copy_from_slice(&c.to_be_bytes());
            frame.extend_from_slice(&h);
        }
        (IpAddr::V6(s), IpAddr::V6(d)) => {
            frame.extend_from_slice(&ETHERTYPE_IPV6.to_be_bytes());
            let len = u16::try_from(transport.len()).expect("ip packet too large");
            frame.extend_from_slice(&[0x60, 0, 0, 0]);
            frame.extend_from_slice(&len.to_be_bytes());
            frame.push(spec.proto.number());
            frame.push(64);
            frame.extend_from_slice(&s.octets());
            frame.extend_from_slice(&d.octets());
        }
        _ => panic!("mixed address families in one frame"),
    }
    frame.extend_from_slice(&transport);
    frame
}

/// A minimal ARP request frame, useful for exercising non-IP skipping.
pub fn build_arp_frame(sender: Ipv4Addr, target: Ipv4Addr) -> Vec<u8> {
    let smac = mac_for(IpAddr::V4(sender));
    let mut f = Vec::with_capacity(42);
    f.extend_from_slice(&[0xFF; 6]);
    f.extend_from_slice(&smac);
    f.extend_from_slice(&ETHERTYPE_ARP.to_be_bytes());
    f.extend_from_slice(&[0, 1, 0x08, 0, 6, 4, 0, 1]);
    f.extend_from_slice(&smac);
    f.extend_from_slice(&sender.octets());
    f.extend_from_slice(&[0; 6]);
    f.extend_from_slice(&target.octets());
    f
}

/// Accumulates frames into a little-endian classic pcap file.
pub struct PcapWriter {
    buf: Vec<u8>,
}

impl Default for PcapWriter {
    fn default() -> Self {
        Self::new()
    }
}

impl PcapWriter {
    pub fn new() -> Self {
        let mut buf = Vec::with_capacity(4096);
        buf.extend_from_slice(&MAGIC_USEC.to_le_bytes());
        buf.extend_from_slice(&2u16.to_le_bytes());
        buf.extend_from_slice(&4u16.to_le_bytes());
        buf.extend_from_slice(&0i32.to_le_bytes());
        buf.extend_from_slice(&0u32.to_le_bytes());
        buf.extend_from_slice(&65535u32.to_le_bytes());
        buf.extend_from_slice(&LINKTYPE_ETHERNET.to_le_bytes());
        Self { buf }
    }

    /// Appends a frame stamped at `ts_us` microseconds since the epoch.
    pub fn push(&mut self, ts_us: u64, frame: &[u8]) {
        let sec = u32::try_from(ts_us / 1_000_000).expect("timestamp beyond 2106");
        let usec = (ts_us % 1_000_000) as u32;
        let len = u32::try_from(frame.len()).expect("frame too large");
        self.buf.extend_from_slice(&sec.to_le_bytes());
        self.buf.extend_from_slice(&usec.to_le_bytes());
        self.buf.extend_from_slice(&len.to_le_bytes());
        self.buf.extend_from_slice(&len.to_le_bytes());
        self.buf.extend_from_slice(frame);
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}
