use super::{ByteSource, DeviceProfile, FlowTemplate, SynthError, Transport};
use crate::flow::pcap::{build_frame, FrameSpec, PcapWriter};
use crate::flow::{ManifestEntry, Proto, TcpFlags};
use crate::seed;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::net::{IpAddr, Ipv4Addr};
use std::path::{Path, PathBuf};

/// Noise flows are scheduled up to this many seconds after power-on.
pub const NOISE_HORIZON_S: f64 = 120.0;

const GATEWAY: Ipv4Addr = Ipv4Addr::new(192, 168, 1, 1);
const MAX_FRAME: f64 = 1514.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSession {
    pub pcap: Vec<u8>,
    pub entry: ManifestEntry,
    pub n_flows: usize,
    pub n_packets: usize,
}

fn draw(rng: &mut seed::Rng, mean: f64, std: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    mean + std * z
}

fn device_ip(label: &str) -> Ipv4Addr {
    let h = seed::tag_str(label);
    Ipv4Addr::new(192, 168, 1 + (h % 200) as u8, 2 + ((h >> 8) % 250) as u8)
}

fn cloud_ip(label: &str, which: &str) -> Ipv4Addr {
    let h = seed::tag_str(&format!("{label}/{which}"));
    Ipv4Addr::new(52, (h % 250) as u8, ((h >> 8) % 250) as u8, 1 + ((h >> 16) % 250) as u8)
}

struct Emitter {
    frames: Vec<(u64, Vec<u8>)>,
    n_flows: usize,
    ip_id: u16,
}

impl Emitter {
    /// Emits one flow starting `start_us`: the initiator speaks first, then
    /// directions alternate until one side runs out.
    fn flow(&mut self, t: &FlowTemplate, start_us: u64, device: Ipv4Addr, peer: Ipv4Addr, sport: u16, rng: &mut seed::Rng) {
        let n_fwd = rng.random_range(t.pkts_fwd[0]..=t.pkts_fwd[1]) as usize;
        let n_bwd = rng.random_range(t.pkts_bwd[0]..=t.pkts_bwd[1]) as usize;
        let (proto, header) = match t.transport {
            Transport::Tcp => (Proto::Tcp, 54.0),
            Transport::Udp => (Proto::Udp, 42.0),
        };
        let mut fwd_bytes = ByteSource::new(t.entropy, rng.random());
        let mut bwd_bytes = ByteSource::new(t.entropy, rng.random());
        let mut order = Vec::with_capacity(n_fwd + n_bwd);
        let (mut f, mut b) = (n_fwd, n_bwd);
        let mut next_fwd = true;
        while f + b > 0 {
            if (next_fwd && f > 0) || b == 0 {
                order.push(true);
                f -= 1;
            } else {
                order.push(false);
                b -= 1;
            }
            next_fwd = !next_fwd;
        }
        let last = order.len() - 1;
        let mut ts = start_us;
        let mut seen_bwd = false;
        for (k, &fwd) in order.iter().enumerate() {
            if k > 0 {
                let gap = draw(rng, t.iat.mean, t.iat.std).max(5e-5);
                ts += ((gap * 1e6).round() as u64).max(1);
            }
            let size = if fwd { t.size_fwd } else { t.size_bwd };
            let wire = draw(rng, size.mean, size.std).round().clamp(header + 1.0, MAX_FRAME);
            let payload = if fwd { fwd_bytes.take((wire - header) as usize) } else { bwd_bytes.take((wire - header) as usize) };
            let flags = match proto {
                Proto::Tcp if k == 0 => TcpFlags::SYN,
                Proto::Tcp if !fwd && !seen_bwd => TcpFlags::SYN | TcpFlags::ACK,
                Proto::Tcp if k == last => TcpFlags::FIN | TcpFlags::ACK,
                Proto::Tcp => TcpFlags::PSH | TcpFlags::ACK,
                _ => TcpFlags::empty(),
            };
            seen_bwd |= !fwd;
            let (src_ip, dst_ip, src_port, dst_port) = if fwd {
                (device, peer, sport, t.dst_port)
            } else {
                (peer, device, t.dst_port, sport)
            };
            self.ip_id = self.ip_id.wrapping_add(1);
            let frame = build_frame(&FrameSpec {
                src_ip: IpAddr::V4(src_ip),
                dst_ip: IpAddr::V4(dst_ip),
                src_port,
                dst_port,
                proto,
                tcp_flags: flags,
                ip_id: self.ip_id,
                payload: &payload,
            });
            self.frames.push((ts, frame));
        }
        self.n_flows += 1;
    }
}

/// Renders one power-cycle capture of `profile`.
pub fn generate_session(profile: &DeviceProfile, session_id: &str, seed: u64) -> SynthSession {
    let mut rng = seed::rng(seed);
    let power_on_s = 1_700_000_000 + seed % 100_000_000;
    let power_on_us = power_on_s * 1_000_000;
    let device = device_ip(&profile.label);
    let mut next_port: u16 = rng.random_range(49_152..60_000);
    let mut em = Emitter {
        frames: Vec::new(),
        n_flows: 0,
        ip_id: rng.random(),
    };
    let mut port_for = |fixed: Option<u16>| {
        fixed.unwrap_or_else(|| {
            next_port = next_port.wrapping_add(1).max(49_152);
            next_port
        })
    };

    for (j, ph) in profile.phases.iter().enumerate() {
        let mut frng = seed::rng(seed::derive(seed, j as u64));
        let at = draw(&mut frng, ph.offset.mean, ph.offset.std).max(0.0);
        let peer = if ph.flow.internal { GATEWAY } else { cloud_ip(&profile.label, &ph.name) };
        let sport = port_for(ph.flow.src_port);
        em.flow(&ph.flow, power_on_us + (at * 1e6).round() as u64, device, peer, sport, &mut frng);
    }
    if let Some(noise) = &profile.noise {
        let peer = if noise.flow.internal { GATEWAY } else { cloud_ip(&profile.label, "noise") };
        let mut nrng = seed::rng(seed::derive_str(seed, "noise"));
        let mut k = 0u32;
        loop {
            let jitter = if noise.jitter > 0.0 { nrng.random_range(-noise.jitter..noise.jitter) } else { 0.0 };
            let at = (noise.start + f64::from(k) * noise.period + jitter).max(0.0);
            if noise.start + f64::from(k) * noise.period >= NOISE_HORIZON_S {
                break;
            }
            let sport = port_for(noise.flow.src_port);
            em.flow(&noise.flow, power_on_us + (at * 1e6).round() as u64, device, peer, sport, &mut nrng);
            k += 1;
        }
    }

    em.frames.sort_by_key(|(ts, _)| *ts);
    let mut w = PcapWriter::new();
    for (ts, f) in &em.frames {
        w.push(*ts, f);
    }
    SynthSession {
        pcap: w.finish(),
        entry: ManifestEntry {
            session_id: session_id.to_string(),
            device_label: profile.label.clone(),
            power_on_ts: power_on_s as f64,
            pcap_path: PathBuf::from(&profile.label).join(format!("{session_id}.pcap")),
        },
        n_flows: em.n_flows,
        n_packets: em.frames.len(),
    }
}

pub fn session_id(label: &str, k: usize) -> String {
    format!("{label}-s{k:03}")
}

/// Writes `<out>/<label>/<session_id>.pcap` for every session plus
/// `<out>/manifest.tsv`, and returns the manifest entries.
pub fn generate_corpus(
    profiles: &[DeviceProfile],
    sessions_per_device: usize,
    seed: u64,
    out: &Path,
) -> Result<Vec<ManifestEntry>, SynthError> {
    if profiles.len() < 2 {
        return Err(SynthError::Profile(format!("a corpus needs at least 2 profiles, got {}", profiles.len())));
    }
    profiles.iter().try_for_each(DeviceProfile::validate)?;
    let mut labels: Vec<&str> = profiles.iter().map(|p| p.label.as_str()).collect();
    labels.sort_unstable();
    if labels.windows(2).any(|w| w[0] == w[1]) {
        return Err(SynthError::Profile("duplicate device label".into()));
    }
    let jobs: Vec<(&DeviceProfile, String)> = profiles
        .iter()
        .flat_map(|p| (0..sessions_per_device).map(move |k| (p, session_id(&p.label, k))))
        .collect();
    let sessions: Vec<SynthSession> = jobs
        .par_iter()
        .map(|(p, sid)| generate_session(p, sid, seed::derive_str(seed, sid)))
        .collect();

    let io = |p: &Path| {
        let path = p.display().to_string();
        move |source| SynthError::Io { path, source }
    };
    let mut manifest = String::from("# session_id\tdevice_label\tpower_on_ts\tpcap_path\n");
    let mut entries = Vec::with_capacity(sessions.len());
    for s in sessions {
        let path = out.join(&s.entry.pcap_path);
        let dir = path.parent().expect("capture path has a parent");
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        std::fs::write(&path, &s.pcap).map_err(io(&path))?;
        manifest.push_str(&s.entry.to_line());
        manifest.push('\n');
        entries.push(s.entry);
    }
    let mpath = out.join("manifest.tsv");
    std::fs::write(&mpath, manifest).map_err(io(&mpath))?;
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{extract_session, FeatureSchema};
    use crate::flow::{parse_capture, read_manifest, Session};
    use crate::synth::{builtin_profiles, Dist, EntropyLevel, Phase};

    fn parse(s: &SynthSession) -> Session {
        let cap = parse_capture(&s.pcap).unwrap();
        Session::from_packets(&s.entry.session_id, &s.entry.device_label, s.entry.power_on_ts, cap.packets)
    }

    fn dns_only() -> DeviceProfile {
        DeviceProfile {
            label: "probe".into(),
            phases: vec![Phase {
                name: "dns".into(),
                offset: Dist::new(0.5, 0.0),
                flow: FlowTemplate {
                    internal: true,
                    transport: Transport::Udp,
                    src_port: None,
                    dst_port: 53,
                    pkts_fwd: [3, 3],
                    pkts_bwd: [2, 2],
                    size_fwd: Dist::new(80.0, 1.0),
                    size_bwd: Dist::new(120.0, 1.0),
                    iat: Dist::new(0.01, 0.001),
                    entropy: EntropyLevel::Text,
                },
            }],
            noise: None,
        }
    }

    #[test]
    fn single_dns_flow_round_trips() {
        let s = generate_session(&dns_only(), "probe-s000", 1);
        let sess = parse(&s);
        assert_eq!(sess.flows.len(), 1);
        assert_eq!(sess.packet_count(), 5);
        assert_eq!(sess.flows[0].responder().port, 53);
    }

    #[test]
    fn deterministic_bytes() {
        let p = &builtin_profiles(3)[1];
        assert_eq!(generate_session(p, "x", 9), generate_session(p, "x", 9));
        assert_ne!(generate_session(p, "x", 9).pcap, generate_session(p, "x", 10).pcap);
    }

    #[test]
    fn builtin_sessions_round_trip_exactly() {
        for p in builtin_profiles(5) {
            for k in 0..3 {
                let s = generate_session(&p, &session_id(&p.label, k), k as u64 * 31 + 7);
                let sess = parse(&s);
                assert_eq!(sess.flows.len(), s.n_flows);
                assert_eq!(sess.packet_count(), s.n_packets);
                assert_eq!(s.n_flows, 4 + 7);
                for f in &sess.flows {
                    let fwd = f.packets.iter().filter(|p| f.is_forward(p)).count();
                    assert!(fwd >= 3 && f.packets.len() - fwd >= 3);
                }
                let startup_end = sess.flows.iter().filter(|f| f.responder().port != 8883).map(|f| f.last_ts).fold(0.0, f64::max);
                assert!(startup_end - s.entry.power_on_ts < 5.0);
            }
        }
    }

    #[test]
    fn encrypted_flows_have_high_entropy() {
        let p = &builtin_profiles(4)[2];
        let s = generate_session(p, "e", 3);
        let rows = extract_session::<f64>(&parse(&s), None).unwrap();
        let schema = FeatureSchema::full();
        let sess = parse(&s);
        for (f, r) in sess.flows.iter().zip(&rows) {
            if f.responder().port == 443 {
                let h = r.get(&schema, "payload_entropy_fwd").unwrap().as_scalar().unwrap();
                assert!(h >= 7.5, "{h}");
            }
        }
    }

    #[test]
    fn corpus_layout_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let ps = builtin_profiles(3);
        let entries = generate_corpus(&ps, 2, 5, dir.path()).unwrap();
        assert_eq!(entries.len(), 6);
        let back = read_manifest(&dir.path().join("manifest.tsv")).unwrap();
        assert_eq!(back.len(), 6);
        for e in &back {
            assert!(e.pcap_path.exists());
            assert!(e.pcap_path.ends_with(format!("{}/{}.pcap", e.device_label, e.session_id)));
        }
        assert!(generate_corpus(&ps[..1], 2, 5, dir.path()).is_err());
    }

    #[test]
    fn feature_moments_match_profile() {
        let p = dns_only();
        let mut sizes = Vec::new();
        for s in 0..250u64 {
            let sess = parse(&generate_session(&p, "m", s));
            for pk in &sess.flows[0].packets {
                if pk.dst_port == 53 {
                    sizes.push(f64::from(pk.wire_len));
                }
            }
        }
        let n = sizes.len() as f64;
        let mean = sizes.iter().sum::<f64>() / n;
        let se = 1.0 / n.sqrt();
        assert!((mean - 80.0).abs() < 3.0 * se + 0.01, "{mean}");
    }
}
