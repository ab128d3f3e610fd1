use super::{
    is_internal_dst, nonzero_fraction, payload_entropy, port_bucket, FeatureError, FeatureValue,
    FeatureVector, Provenance, PAYLOAD_CAP,
};
use crate::flow::{Flow, PacketRecord, Session, TcpFlags};
use crate::scalar::Scalar;

#[derive(Default)]
struct Summary {
    n: usize,
    mean: f64,
    std: Option<f64>,
    min: f64,
    max: f64,
}

/// Population statistics; `std` needs at least two samples.
fn summarize(xs: &[f64]) -> Option<Summary> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let std = (n >= 2).then(|| (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt());
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(Summary {
        n,
        mean,
        std,
        min,
        max,
    })
}

fn gaps(ts: &[f64]) -> Vec<f64> {
    ts.windows(2).map(|w| w[1] - w[0]).collect()
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den != 0.0).then(|| num / den)
}

fn payload_corpus<'a>(packets: impl Iterator<Item = &'a PacketRecord>) -> Vec<u8> {
    let mut buf = Vec::with_capacity(PAYLOAD_CAP);
    for p in packets {
        let room = PAYLOAD_CAP - buf.len();
        if room == 0 {
            break;
        }
        buf.extend_from_slice(&p.payload_prefix[..p.payload_prefix.len().min(room)]);
    }
    buf
}

/// Computes the full 47-column catalogue for one flow, oriented by
/// `flow.initiator`.
pub fn extract_features<T: Scalar>(flow: &Flow) -> Result<FeatureVector<T>, FeatureError> {
    if flow.packets.is_empty() {
        return Err(FeatureError::EmptyFlow);
    }
    let (fwd, bwd): (Vec<&PacketRecord>, Vec<&PacketRecord>) =
        flow.packets.iter().partition(|p| flow.is_forward(p));

    let len = |ps: &[&PacketRecord]| ps.iter().map(|p| f64::from(p.wire_len)).collect::<Vec<_>>();
    let times = |ps: &[&PacketRecord]| ps.iter().map(|p| p.ts).collect::<Vec<_>>();
    let all_ts: Vec<f64> = flow.packets.iter().map(|p| p.ts).collect();

    let dur = flow.last_ts - flow.first_ts;
    let pkts_fwd = fwd.len() as f64;
    let pkts_bwd = bwd.len() as f64;
    let bytes_fwd: f64 = len(&fwd).iter().sum();
    let bytes_bwd: f64 = len(&bwd).iter().sum();
    let pkts_tot = pkts_fwd + pkts_bwd;
    let bytes_tot = bytes_fwd + bytes_bwd;

    let len_fwd = summarize(&len(&fwd));
    let len_bwd = summarize(&len(&bwd));
    let iat_fwd = summarize(&gaps(&times(&fwd)));
    let iat_bwd = summarize(&gaps(&times(&bwd)));
    let iat_tot = summarize(&gaps(&all_ts));

    let mut flag_counts = [0f64; 8];
    for p in &flow.packets {
        for (slot, bit) in FLAG_ORDER.iter().enumerate() {
            if p.tcp_flags.contains(*bit) {
                flag_counts[slot] += 1.0;
            }
        }
    }

    let corpus_fwd = payload_corpus(fwd.iter().copied());
    let corpus_bwd = payload_corpus(bwd.iter().copied());

    let responder = flow.responder();
    let mut v: Vec<FeatureValue<T>> = Vec::with_capacity(47);
    let num = FeatureValue::<T>::num;
    let opt = FeatureValue::<T>::opt;

    v.push(num(dur));
    v.extend([num(pkts_fwd), num(pkts_bwd), num(pkts_tot)]);
    v.extend([num(bytes_fwd), num(bytes_bwd), num(bytes_tot)]);
    for s in [&len_fwd, &len_bwd, &iat_fwd, &iat_bwd] {
        v.push(opt(s.as_ref().map(|s| s.mean)));
        v.push(opt(s.as_ref().and_then(|s| s.std)));
        v.push(opt(s.as_ref().map(|s| s.min)));
        v.push(opt(s.as_ref().map(|s| s.max)));
    }
    v.push(opt(iat_tot.as_ref().map(|s| s.mean)));
    v.push(opt(iat_tot.as_ref().and_then(|s| s.std)));
    v.push(opt(ratio(pkts_tot, dur)));
    v.push(opt(ratio(bytes_tot, dur)));
    v.push(opt(ratio(pkts_bwd, pkts_fwd)));
    v.push(opt(ratio(bytes_bwd, bytes_fwd)));
    v.extend(flag_counts.iter().map(|&c| num(c)));
    v.push(opt(payload_entropy::<f64>(&corpus_fwd).ok()));
    v.push(opt(payload_entropy::<f64>(&corpus_bwd).ok()));
    v.push(opt(nonzero_fraction::<f64>(&corpus_fwd).ok()));
    v.push(opt(nonzero_fraction::<f64>(&corpus_bwd).ok()));
    v.push(FeatureValue::Bin(!fwd.is_empty()));
    v.push(FeatureValue::Bin(!bwd.is_empty()));
    v.push(FeatureValue::Cat(u16::from(flow.key.proto.number())));
    v.push(FeatureValue::Cat(port_bucket(flow.initiator.port).code()));
    v.push(FeatureValue::Cat(port_bucket(responder.port).code()));
    v.push(FeatureValue::Bin(is_internal_dst(responder.ip)));
    debug_assert_eq!(v.len(), 47);
    debug_assert!(len_fwd.as_ref().is_none_or(|s| s.n == fwd.len()));

    Ok(FeatureVector {
        values: v,
        provenance: Provenance {
            session_id: flow.session_id.clone(),
            flow_index: 0,
            window: None,
        },
    })
}

const FLAG_ORDER: [TcpFlags; 8] = [
    TcpFlags::SYN,
    TcpFlags::ACK,
    TcpFlags::FIN,
    TcpFlags::RST,
    TcpFlags::PSH,
    TcpFlags::URG,
    TcpFlags::ECE,
    TcpFlags::CWR,
];

/// Feature vectors for every flow of a (possibly truncated) session.
pub fn extract_session<T: Scalar>(
    session: &Session,
    window: Option<f64>,
) -> Result<Vec<FeatureVector<T>>, FeatureError> {
    session
        .flows
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let mut fv = extract_features::<T>(f)?;
            fv.provenance.flow_index = u32::try_from(i).unwrap_or(u32::MAX);
            fv.provenance.window = window;
            Ok(fv)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureSchema;
    use crate::flow::{assemble_flows, Proto};
    use std::net::{IpAddr, Ipv4Addr};

    fn pkt(ts: f64, fwd: bool, wire_len: u32) -> PacketRecord {
        let a = (IpAddr::V4(Ipv4Addr::new(192, 168, 1, 10)), 50000);
        let b = (IpAddr::V4(Ipv4Addr::new(8, 8, 8, 8)), 53);
        let (s, d) = if fwd { (a, b) } else { (b, a) };
        PacketRecord {
            ts,
            src_ip: s.0,
            dst_ip: d.0,
            src_port: s.1,
            dst_port: d.1,
            proto: Proto::Udp,
            tcp_flags: TcpFlags::empty(),
            wire_len,
            payload_prefix: vec![],
            payload_len: 0,
        }
    }

    fn get(fv: &FeatureVector<f64>, name: &str) -> FeatureValue<f64> {
        fv.get(&FeatureSchema::full(), name).unwrap()
    }

    #[test]
    fn single_packet_flow() {
        let flow = assemble_flows(vec![pkt(3.0, true, 80)], "s").remove(0);
        let fv = extract_features::<f64>(&flow).unwrap();
        assert_eq!(get(&fv, "dur"), FeatureValue::Num(0.0));
        assert_eq!(get(&fv, "pkts_fwd"), FeatureValue::Num(1.0));
        assert_eq!(get(&fv, "pkts_bwd"), FeatureValue::Num(0.0));
        assert_eq!(get(&fv, "has_bwd"), FeatureValue::Bin(false));
        for n in ["pktlen_fwd_std", "iat_fwd_mean", "iat_tot_mean", "pps", "bps"] {
            assert!(get(&fv, n).is_missing(), "{n}");
        }
        assert_eq!(get(&fv, "pktlen_fwd_mean"), FeatureValue::Num(80.0));
        assert!(get(&fv, "payload_entropy_fwd").is_missing());
        assert_eq!(get(&fv, "dport_bucket"), FeatureValue::Cat(0));
        assert_eq!(get(&fv, "internal_dst"), FeatureValue::Bin(false));
    }

    #[test]
    fn two_forward_packets() {
        let flow = assemble_flows(vec![pkt(0.0, true, 100), pkt(0.5, true, 300)], "s").remove(0);
        let fv = extract_features::<f64>(&flow).unwrap();
        assert_eq!(get(&fv, "dur"), FeatureValue::Num(0.5));
        assert_eq!(get(&fv, "pktlen_fwd_mean"), FeatureValue::Num(200.0));
        assert_eq!(get(&fv, "pktlen_fwd_std"), FeatureValue::Num(100.0));
        assert_eq!(get(&fv, "iat_fwd_mean"), FeatureValue::Num(0.5));
        assert!(get(&fv, "iat_fwd_std").is_missing());
        assert_eq!(get(&fv, "pps"), FeatureValue::Num(4.0));
        assert_eq!(get(&fv, "bps"), FeatureValue::Num(800.0));
        assert!(get(&fv, "down_up_byte_ratio") == FeatureValue::Num(0.0));
    }

    #[test]
    fn entropy_corpus_capped_at_512() {
        let mut a = pkt(0.0, true, 600);
        a.payload_prefix = vec![0u8; 512];
        let mut b = pkt(0.1, true, 600);
        b.payload_prefix = (0..=255).collect();
        let flow = assemble_flows(vec![a, b], "s").remove(0);
        let fv = extract_features::<f64>(&flow).unwrap();
        // second packet's bytes fall past the cap
        assert_eq!(get(&fv, "payload_entropy_fwd"), FeatureValue::Num(0.0));
        assert_eq!(get(&fv, "payload_nonzero_frac_fwd"), FeatureValue::Num(0.0));
    }

    #[test]
    fn tcp_flags_counted_across_directions() {
        let mut a = pkt(0.0, true, 60);
        a.proto = Proto::Tcp;
        a.tcp_flags = TcpFlags::SYN;
        let mut b = pkt(0.1, false, 60);
        b.proto = Proto::Tcp;
        b.tcp_flags = TcpFlags::SYN | TcpFlags::ACK;
        let flow = assemble_flows(vec![a, b], "s").remove(0);
        let fv = extract_features::<f64>(&flow).unwrap();
        assert_eq!(get(&fv, "syn_cnt"), FeatureValue::Num(2.0));
        assert_eq!(get(&fv, "ack_cnt"), FeatureValue::Num(1.0));
        assert_eq!(get(&fv, "proto"), FeatureValue::Cat(6));
    }

    #[test]
    fn empty_flow_rejected() {
        let mut flow = assemble_flows(vec![pkt(0.0, true, 60)], "s").remove(0);
        flow.packets.clear();
        assert_eq!(extract_features::<f64>(&flow), Err(FeatureError::EmptyFlow));
    }
}
