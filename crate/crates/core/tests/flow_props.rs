mod common;

use iotfp_core::flow::pcap::{build_arp_frame, build_frame, FrameSpec};
use iotfp_core::flow::{assemble_flows, parse_capture, truncate_session, PacketRecord, Proto, Session, TcpFlags};
use iotfp_core::seed;
use proptest::prelude::*;
use rand::Rng;
use std::collections::BTreeMap;
use std::net::{IpAddr, Ipv4Addr};

fn packets_over_tuples(s: u64, n: usize, tuples: usize) -> Vec<PacketRecord> {
    let mut rng = seed::rng(s);
    let pool: Vec<Vec<PacketRecord>> = (0..tuples).map(|_| common::random_flow_packets(&mut rng)).collect();
    (0..n)
        .map(|i| {
            let f = &pool[rng.random_range(0..tuples)];
            let mut p = f[rng.random_range(0..f.len())].clone();
            if rng.random_bool(0.5) {
                p = p.reversed();
            }
            p.ts = 100.0 + (i as f64) * 0.25 + rng.random_range(0..3) as f64;
            p
        })
        .collect()
}

fn tuple_of(p: &PacketRecord) -> (IpAddr, u16, IpAddr, u16, u8) {
    let a = (p.src_ip, p.src_port);
    let b = (p.dst_ip, p.dst_port);
    let (x, y) = if a <= b { (a, b) } else { (b, a) };
    (x.0, x.1, y.0, y.1, p.proto.number())
}

proptest! {
    #[test]
    fn key_is_symmetric(s in any::<u64>()) {
        for p in common::random_flow_packets(&mut seed::rng(s)) {
            prop_assert_eq!(p.key(), p.reversed().key());
        }
    }

    #[test]
    fn assembly_matches_group_by(s in any::<u64>(), tuples in 1usize..8) {
        let packets = packets_over_tuples(s, 50, tuples);
        let mut groups: BTreeMap<_, Vec<f64>> = BTreeMap::new();
        for p in &packets {
            groups.entry(tuple_of(p)).or_default().push(p.ts);
        }
        let flows = assemble_flows(packets.clone(), "s");
        prop_assert_eq!(flows.len(), groups.len());
        prop_assert_eq!(flows.iter().map(|f| f.packets.len()).sum::<usize>(), packets.len());
        for f in &flows {
            let g = &groups[&tuple_of(&f.packets[0])];
            prop_assert_eq!(f.packets.len(), g.len());
            prop_assert!(f.packets.windows(2).all(|w| w[0].ts <= w[1].ts));
            prop_assert_eq!(f.first_ts, g.iter().copied().fold(f64::INFINITY, f64::min));
            prop_assert!(f.packets.iter().all(|p| p.key() == f.key));
        }
        prop_assert!(flows.windows(2).all(|w| w[0].first_ts <= w[1].first_ts));
    }

    #[test]
    fn truncation_is_monotone_and_idempotent(s in any::<u64>(), w1 in 0.1f64..30.0, dw in 0.0f64..30.0) {
        let packets = packets_over_tuples(s, 60, 5);
        let sess = Session::from_packets("s", "d", 100.0, packets.clone());
        let w2 = w1 + dw;
        let a = truncate_session(&sess, w1).unwrap();
        let b = truncate_session(&sess, w2).unwrap();
        let ts = |x: &Session| {
            let mut v: Vec<(String, u64)> = x
                .flows
                .iter()
                .flat_map(|f| f.packets.iter().map(|p| (format!("{:?}", p.key()), p.ts.to_bits())))
                .collect();
            v.sort();
            v
        };
        let (ta, tb) = (ts(&a), ts(&b));
        prop_assert!(ta.iter().all(|x| tb.binary_search(x).is_ok()));
        let mut brute: Vec<_> = packets.iter().filter(|p| p.ts <= 100.0 + w1).map(|p| (format!("{:?}", p.key()), p.ts.to_bits())).collect();
        brute.sort();
        prop_assert_eq!(&ta, &brute);
        prop_assert_eq!(truncate_session(&a, w1).unwrap(), a);
    }
}

/// Reads a classic pcap by fixed byte offsets: big- or little-endian
/// header, Ethernet, IPv4 without options, TCP or UDP.
fn reference_decode(bytes: &[u8]) -> (Vec<(f64, [u8; 4], [u8; 4], u16, u16, u8, u8, u32, Vec<u8>)>, usize) {
    let be = bytes[0..4] == [0xA1, 0xB2, 0xC3, 0xD4];
    let u32_at = |b: &[u8], o: usize| {
        let a = [b[o], b[o + 1], b[o + 2], b[o + 3]];
        if be { u32::from_be_bytes(a) } else { u32::from_le_bytes(a) }
    };
    let mut off = 24;
    let mut out = Vec::new();
    let mut skipped = 0;
    while off + 16 <= bytes.len() {
        let (sec, usec, incl) = (u32_at(bytes, off), u32_at(bytes, off + 4), u32_at(bytes, off + 8) as usize);
        let f = &bytes[off + 16..off + 16 + incl];
        off += 16 + incl;
        if f[12..14] != [0x08, 0x00] {
            skipped += 1;
            continue;
        }
        let ip = &f[14..];
        let proto = ip[9];
        let src = [ip[12], ip[13], ip[14], ip[15]];
        let dst = [ip[16], ip[17], ip[18], ip[19]];
        let t = &ip[20..];
        let sport = u16::from_be_bytes([t[0], t[1]]);
        let dport = u16::from_be_bytes([t[2], t[3]]);
        let (flags, hdr) = if proto == 6 { (t[13], usize::from(t[12] >> 4) * 4) } else { (0, 8) };
        out.push((
            sec as f64 + usec as f64 / 1e6,
            src,
            dst,
            sport,
            dport,
            proto,
            flags,
            f.len() as u32,
            t[hdr..].to_vec(),
        ));
    }
    (out, skipped)
}

fn write_pcap(frames: &[(u32, u32, Vec<u8>)], big_endian: bool) -> Vec<u8> {
    let w32 = |v: u32| if big_endian { v.to_be_bytes() } else { v.to_le_bytes() };
    let w16 = |v: u16| if big_endian { v.to_be_bytes() } else { v.to_le_bytes() };
    let mut b = Vec::new();
    b.extend_from_slice(&w32(0xA1B2_C3D4));
    b.extend_from_slice(&w16(2));
    b.extend_from_slice(&w16(4));
    b.extend_from_slice(&w32(0));
    b.extend_from_slice(&w32(0));
    b.extend_from_slice(&w32(65535));
    b.extend_from_slice(&w32(1));
    for (s, us, f) in frames {
        b.extend_from_slice(&w32(*s));
        b.extend_from_slice(&w32(*us));
        b.extend_from_slice(&w32(f.len() as u32));
        b.extend_from_slice(&w32(f.len() as u32));
        b.extend_from_slice(f);
    }
    b
}

#[test]
fn capture_matches_reference_decoder_in_both_byte_orders() {
    let dev = Ipv4Addr::new(192, 168, 1, 20);
    let cloud = Ipv4Addr::new(52, 1, 2, 3);
    let payload: Vec<u8> = (0..700u32).map(|i| (i * 7 % 251) as u8).collect();
    let tcp = |src, dst, sp, dp, flags, body: &[u8]| {
        build_frame(&FrameSpec {
            src_ip: IpAddr::V4(src),
            dst_ip: IpAddr::V4(dst),
            src_port: sp,
            dst_port: dp,
            proto: Proto::Tcp,
            tcp_flags: flags,
            ip_id: 1,
            payload: body,
        })
    };
    let frames = vec![
        (1_700_000_000, 5, tcp(dev, cloud, 50000, 443, TcpFlags::SYN, &[])),
        (1_700_000_000, 900, build_arp_frame(dev, Ipv4Addr::new(192, 168, 1, 1))),
        (1_700_000_001, 10, tcp(cloud, dev, 443, 50000, TcpFlags::SYN | TcpFlags::ACK, &payload[..40])),
        (1_700_000_001, 20, build_arp_frame(cloud, dev)),
        (1_700_000_002, 999_999, tcp(dev, cloud, 50000, 443, TcpFlags::PSH | TcpFlags::ACK, &payload)),
    ];
    for be in [false, true] {
        let bytes = write_pcap(&frames, be);
        let cap = parse_capture(&bytes).unwrap();
        let (want, skipped) = reference_decode(&bytes);
        assert_eq!(cap.packets.len(), 3);
        assert_eq!(want.len(), 3);
        assert_eq!(cap.skipped_non_ip, 2);
        assert_eq!(skipped, 2);
        for (p, w) in cap.packets.iter().zip(&want) {
            assert!((p.ts - w.0).abs() < 1e-6);
            assert_eq!(p.src_ip, IpAddr::V4(w.1.into()));
            assert_eq!(p.dst_ip, IpAddr::V4(w.2.into()));
            assert_eq!((p.src_port, p.dst_port), (w.3, w.4));
            assert_eq!(p.proto.number(), w.5);
            assert_eq!(p.tcp_flags.0, w.6);
            assert_eq!(p.wire_len, w.7);
            assert_eq!(p.payload_len as usize, w.8.len());
            assert_eq!(p.payload_prefix, w.8[..w.8.len().min(512)]);
        }
        let mut cut = bytes.clone();
        cut.truncate(bytes.len() - 10);
        let cap = parse_capture(&cut).unwrap();
        assert_eq!((cap.packets.len(), cap.truncated_records), (2, 1));
        assert!(parse_capture(&bytes[..20]).is_err());
    }
}
