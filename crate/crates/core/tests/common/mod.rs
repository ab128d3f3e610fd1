//! Test-only helpers: a random flow generator and a feature oracle written
//! directly from the column definitions, sharing no code with the crate's
//! extractor.
#![allow(dead_code)]

use iotfp_core::features::{FeatureSchema, FeatureValue, FeatureVector};
use iotfp_core::flow::{PacketRecord, Proto, TcpFlags};
use rand::Rng;
use std::collections::BTreeMap;
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Expect {
    Num(f64),
    Missing,
    Cat(u16),
    Bin(bool),
}

const PORTS: [u16; 16] = [53, 80, 443, 123, 67, 68, 5353, 1883, 8883, 22, 1023, 1024, 8080, 49151, 49152, 65535];

fn random_ip(rng: &mut impl Rng, v6: bool) -> IpAddr {
    if v6 {
        let mut o = [0u8; 16];
        rng.fill_bytes(&mut o);
        return IpAddr::V6(Ipv6Addr::from(o));
    }
    match rng.random_range(0..5) {
        0 => IpAddr::V4(Ipv4Addr::new(10, rng.random(), rng.random(), rng.random())),
        1 => IpAddr::V4(Ipv4Addr::new(172, rng.random_range(14..34), rng.random(), rng.random())),
        2 => IpAddr::V4(Ipv4Addr::new(192, 168, rng.random(), rng.random())),
        3 => IpAddr::V4(Ipv4Addr::new(192, rng.random_range(167..170), rng.random(), rng.random())),
        _ => IpAddr::V4(Ipv4Addr::from(rng.random::<u32>())),
    }
}

fn random_port(rng: &mut impl Rng) -> u16 {
    if rng.random_bool(0.5) {
        PORTS[rng.random_range(0..PORTS.len())]
    } else {
        rng.random()
    }
}

fn random_payload(rng: &mut impl Rng) -> Vec<u8> {
    let n = match rng.random_range(0..4) {
        0 => 0,
        1 => rng.random_range(1..16),
        2 => rng.random_range(16..300),
        _ => rng.random_range(300..900),
    };
    match rng.random_range(0..4) {
        0 => vec![0u8; n],
        1 => (0..n).map(|_| if rng.random_bool(0.5) { b'a' } else { 0 }).collect(),
        2 => (0..n).map(|_| rng.random_range(b' '..=b'z')).collect(),
        _ => {
            let mut v = vec![0u8; n];
            rng.fill_bytes(&mut v);
            v
        }
    }
}

/// Packets of one random bidirectional flow in time order; the first packet
/// is sent by the initiator.
pub fn random_flow_packets(rng: &mut impl Rng) -> Vec<PacketRecord> {
    let v6 = rng.random_bool(0.1);
    let a = (random_ip(rng, v6), random_port(rng));
    let mut b = (random_ip(rng, v6), random_port(rng));
    if b == a {
        b.1 = b.1.wrapping_add(1);
    }
    let proto = match rng.random_range(0..5) {
        0..=1 => Proto::Tcp,
        2..=3 => Proto::Udp,
        _ => Proto::Other(1),
    };
    let (a, b) = if proto == Proto::Other(1) { ((a.0, 0), (b.0, 0)) } else { (a, b) };
    let (a, b) = if a == b { (a, (random_ip(rng, !v6), 0)) } else { (a, b) };
    let n = match rng.random_range(0..6) {
        0 => 1,
        1 => 2,
        _ => rng.random_range(3..40),
    };
    let p_fwd = rng.random_range(0.1..0.9);
    let mut ts_us: u64 = if rng.random_bool(0.5) {
        1_700_000_000_000_000 + rng.random_range(0..1_000_000_000)
    } else {
        rng.random_range(0..5_000_000)
    };
    (0..n)
        .map(|i| {
            if i > 0 {
                ts_us += match rng.random_range(0..4) {
                    0 => 0,
                    1 => rng.random_range(1..100),
                    _ => rng.random_range(100..3_000_000),
                };
            }
            let fwd = i == 0 || rng.random_bool(p_fwd);
            let (s, d) = if fwd { (a, b) } else { (b, a) };
            let payload = random_payload(rng);
            PacketRecord {
                ts: ts_us as f64 / 1e6,
                src_ip: s.0,
                dst_ip: d.0,
                src_port: s.1,
                dst_port: d.1,
                proto,
                tcp_flags: if proto == Proto::Tcp { TcpFlags(rng.random()) } else { TcpFlags(0) },
                wire_len: (payload.len() as u32 + 42).max(rng.random_range(42..1514)),
                payload_len: payload.len() as u32,
                payload_prefix: payload[..payload.len().min(512)].to_vec(),
            }
        })
        .collect()
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

// Population variance as half the mean squared pairwise difference.
fn std(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mut acc = 0.0;
    for x in xs {
        for y in xs {
            acc += (x - y) * (x - y);
        }
    }
    Some((acc / (2.0 * n * n)).sqrt())
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn entropy(bytes: &[u8]) -> Option<f64> {
    if bytes.is_empty() {
        return None;
    }
    let mut s = bytes.to_vec();
    s.sort_unstable();
    let n = s.len() as f64;
    let mut h = 0.0;
    for run in s.chunk_by(|a, b| a == b) {
        let p = run.len() as f64 / n;
        h -= p * p.log2();
    }
    Some(h.max(0.0))
}

fn bucket(port: u16) -> u16 {
    match port {
        53 => 0,
        80 => 1,
        443 => 2,
        123 => 3,
        67 | 68 => 4,
        5353 => 5,
        1883 | 8883 => 6,
        0..=1023 => 7,
        1024..=49151 => 8,
        _ => 9,
    }
}

fn private(ip: IpAddr) -> bool {
    match ip {
        IpAddr::V4(v) => {
            let [a, b, _, _] = v.octets();
            a == 10 || (a == 172 && (16..=31).contains(&b)) || (a == 192 && b == 168)
        }
        IpAddr::V6(_) => false,
    }
}

/// Expected value of every column for a flow given as time-ordered packets.
pub fn oracle(packets: &[PacketRecord]) -> BTreeMap<&'static str, Expect> {
    let init = (packets[0].src_ip, packets[0].src_port);
    let resp = (packets[0].dst_ip, packets[0].dst_port);
    let is_fwd = |p: &PacketRecord| (p.src_ip, p.src_port) == init;
    let fwd: Vec<&PacketRecord> = packets.iter().filter(|p| is_fwd(p)).collect();
    let bwd: Vec<&PacketRecord> = packets.iter().filter(|p| !is_fwd(p)).collect();
    let lens = |ps: &[&PacketRecord]| ps.iter().map(|p| p.wire_len as f64).collect::<Vec<_>>();
    let gaps = |ps: &[&PacketRecord]| ps.windows(2).map(|w| w[1].ts - w[0].ts).collect::<Vec<_>>();
    let all: Vec<&PacketRecord> = packets.iter().collect();

    let mut m = BTreeMap::new();
    let num = |v: Option<f64>| v.map_or(Expect::Missing, Expect::Num);
    let dur = packets.last().unwrap().ts - packets[0].ts;
    let (pf, pb) = (fwd.len() as f64, bwd.len() as f64);
    let (bf, bb): (f64, f64) = (lens(&fwd).iter().sum(), lens(&bwd).iter().sum());
    m.insert("dur", Expect::Num(dur));
    m.insert("pkts_fwd", Expect::Num(pf));
    m.insert("pkts_bwd", Expect::Num(pb));
    m.insert("pkts_tot", Expect::Num(packets.len() as f64));
    m.insert("bytes_fwd", Expect::Num(bf));
    m.insert("bytes_bwd", Expect::Num(bb));
    m.insert("bytes_tot", Expect::Num(packets.iter().map(|p| p.wire_len as f64).sum()));
    let groups: [(&str, Vec<f64>); 4] = [
        ("pktlen_fwd", lens(&fwd)),
        ("pktlen_bwd", lens(&bwd)),
        ("iat_fwd", gaps(&fwd)),
        ("iat_bwd", gaps(&bwd)),
    ];
    let names: [[&'static str; 4]; 4] = [
        ["pktlen_fwd_mean", "pktlen_fwd_std", "pktlen_fwd_min", "pktlen_fwd_max"],
        ["pktlen_bwd_mean", "pktlen_bwd_std", "pktlen_bwd_min", "pktlen_bwd_max"],
        ["iat_fwd_mean", "iat_fwd_std", "iat_fwd_min", "iat_fwd_max"],
        ["iat_bwd_mean", "iat_bwd_std", "iat_bwd_min", "iat_bwd_max"],
    ];
    for ((_, xs), n) in groups.iter().zip(names) {
        let s = sorted(xs);
        m.insert(n[0], num(mean(xs)));
        m.insert(n[1], num(std(xs)));
        m.insert(n[2], num(s.first().copied()));
        m.insert(n[3], num(s.last().copied()));
    }
    let tot = gaps(&all);
    m.insert("iat_tot_mean", num(mean(&tot)));
    m.insert("iat_tot_std", num(std(&tot)));
    m.insert("pps", num((dur > 0.0).then(|| packets.len() as f64 / dur)));
    m.insert("bps", num((dur > 0.0).then(|| (bf + bb) / dur)));
    m.insert("down_up_pkt_ratio", num((pf > 0.0).then(|| pb / pf)));
    m.insert("down_up_byte_ratio", num((bf > 0.0).then(|| bb / bf)));
    for (name, bit) in [
        ("fin_cnt", 0x01u8),
        ("syn_cnt", 0x02),
        ("rst_cnt", 0x04),
        ("psh_cnt", 0x08),
        ("ack_cnt", 0x10),
        ("urg_cnt", 0x20),
        ("ece_cnt", 0x40),
        ("cwr_cnt", 0x80),
    ] {
        let c = packets.iter().filter(|p| p.tcp_flags.0 & bit != 0).count();
        m.insert(name, Expect::Num(c as f64));
    }
    let corpus = |ps: &[&PacketRecord]| {
        let cat: Vec<u8> = ps.iter().flat_map(|p| p.payload_prefix.iter().copied()).collect();
        cat[..cat.len().min(512)].to_vec()
    };
    let (cf, cb) = (corpus(&fwd), corpus(&bwd));
    let nz = |c: &[u8]| (!c.is_empty()).then(|| c.iter().filter(|&&b| b != 0).count() as f64 / c.len() as f64);
    m.insert("payload_entropy_fwd", num(entropy(&cf)));
    m.insert("payload_entropy_bwd", num(entropy(&cb)));
    m.insert("payload_nonzero_frac_fwd", num(nz(&cf)));
    m.insert("payload_nonzero_frac_bwd", num(nz(&cb)));
    m.insert("has_fwd", Expect::Bin(!fwd.is_empty()));
    m.insert("has_bwd", Expect::Bin(!bwd.is_empty()));
    let proto = match packets[0].proto {
        Proto::Tcp => 6,
        Proto::Udp => 17,
        Proto::Other(n) => n,
    };
    m.insert("proto", Expect::Cat(u16::from(proto)));
    m.insert("sport_bucket", Expect::Cat(bucket(init.1)));
    m.insert("dport_bucket", Expect::Cat(bucket(resp.1)));
    m.insert("internal_dst", Expect::Bin(private(resp.0)));
    m
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs()) || (a.abs() < 1e-12 && b.abs() < 1e-12)
}

/// First disagreement between an extracted vector and the oracle.
pub fn compare(fv: &FeatureVector<f64>, expected: &BTreeMap<&'static str, Expect>) -> Result<(), String> {
    let schema = FeatureSchema::full();
    if schema.len() != expected.len() || fv.values.len() != schema.len() {
        return Err(format!("width: schema {} oracle {} vector {}", schema.len(), expected.len(), fv.values.len()));
    }
    for (name, got) in schema.names().zip(&fv.values) {
        let want = expected.get(name).ok_or_else(|| format!("oracle lacks {name}"))?;
        let ok = match (got, want) {
            (FeatureValue::Num(g), Expect::Num(w)) => {
                let integral = name.ends_with("_cnt") || name.starts_with("pkts_") || name.starts_with("bytes_");
                if integral { g == w } else { close(*g, *w, 1e-9) }
            }
            (FeatureValue::Missing, Expect::Missing) => true,
            (FeatureValue::Cat(g), Expect::Cat(w)) => g == w,
            (FeatureValue::Bin(g), Expect::Bin(w)) => g == w,
            _ => false,
        };
        if !ok {
            return Err(format!("{name}: extracted {got:?}, oracle {want:?}"));
        }
    }
    Ok(())
}
