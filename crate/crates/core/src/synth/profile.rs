use super::{EntropyLevel, SynthError};
use serde::{Deserialize, Serialize};

/// Normal distribution by its first two moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dist {
    pub mean: f64,
    pub std: f64,
}

impl Dist {
    pub const fn new(mean: f64, std: f64) -> Self {
        Self { mean, std }
    }

    fn check(&self, what: &str) -> Result<(), SynthError> {
        if !self.mean.is_finite() || !self.std.is_finite() || self.std < 0.0 {
            return Err(SynthError::Profile(format!("{what}: mean and std must be finite, std >= 0")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transport {
    Tcp,
    Udp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowTemplate {
    /// Destination inside the home network (RFC1918) rather than the cloud.
    pub internal: bool,
    pub transport: Transport,
    /// Fixed device-side port; ephemeral when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src_port: Option<u16>,
    pub dst_port: u16,
    /// Inclusive `[min, max]` packet counts per direction.
    pub pkts_fwd: [u32; 2],
    pub pkts_bwd: [u32; 2],
    /// Wire length of each packet in bytes.
    pub size_fwd: Dist,
    pub size_bwd: Dist,
    /// Gap between consecutive packets of the flow, in seconds.
    pub iat: Dist,
    pub entropy: EntropyLevel,
}

impl FlowTemplate {
    fn check(&self, what: &str) -> Result<(), SynthError> {
        for (d, n) in [(&self.size_fwd, "size_fwd"), (&self.size_bwd, "size_bwd"), (&self.iat, "iat")] {
            d.check(&format!("{what}.{n}"))?;
        }
        for (p, n) in [(self.pkts_fwd, "pkts_fwd"), (self.pkts_bwd, "pkts_bwd")] {
            if p[0] > p[1] {
                return Err(SynthError::Profile(format!("{what}.{n}: min exceeds max")));
            }
        }
        if self.pkts_fwd[0] == 0 {
            return Err(SynthError::Profile(format!("{what}.pkts_fwd: the initiator sends at least one packet")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phase {
    pub name: String,
    /// Start time after power-on, in seconds; negative draws clamp to 0.
    pub offset: Dist,
    pub flow: FlowTemplate,
}

/// Periodic background flows starting `start` seconds after power-on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Noise {
    pub start: f64,
    pub period: f64,
    /// Uniform jitter in `[-jitter, jitter]` seconds on each start time.
    pub jitter: f64,
    pub flow: FlowTemplate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceProfile {
    pub label: String,
    #[serde(default)]
    pub phases: Vec<Phase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<Noise>,
}

impl DeviceProfile {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.label.is_empty() || self.label.contains(['/', '\\', '\t', '\n']) || self.label == "." || self.label == ".." {
            return Err(SynthError::Profile(format!("invalid label {:?}", self.label)));
        }
        for p in &self.phases {
            p.offset.check(&p.name)?;
            if p.offset.mean < 0.0 {
                return Err(SynthError::Profile(format!("{}: offset must be >= 0", p.name)));
            }
            p.flow.check(&p.name)?;
        }
        if let Some(n) = &self.noise {
            if !(n.start >= 0.0 && n.period > 0.0 && n.jitter >= 0.0 && n.jitter < n.period) {
                return Err(SynthError::Profile("noise: need start >= 0, period > 0, 0 <= jitter < period".into()));
            }
            n.flow.check("noise")?;
        }
        if self.phases.is_empty() && self.noise.is_none() {
            return Err(SynthError::Profile(format!("{}: profile emits no traffic", self.label)));
        }
        Ok(())
    }

    /// A near-copy whose packet sizes differ by one byte, standing in for a
    /// second device of the same vendor family.
    pub fn sibling(&self, label: impl Into<String>) -> Self {
        let mut p = self.clone();
        p.label = label.into();
        let bump = |t: &mut FlowTemplate| {
            t.size_fwd.mean += 1.0;
            t.size_bwd.mean += 1.0;
        };
        p.phases.iter_mut().for_each(|ph| bump(&mut ph.flow));
        if let Some(n) = p.noise.as_mut() {
            bump(&mut n.flow);
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSet {
    pub device: Vec<DeviceProfile>,
}

pub fn parse_profiles(text: &str) -> Result<Vec<DeviceProfile>, SynthError> {
    let set: ProfileSet = toml::from_str(text).map_err(|e| SynthError::Profile(e.to_string()))?;
    set.device.iter().try_for_each(DeviceProfile::validate)?;
    Ok(set.device)
}

pub fn render_profiles(profiles: &[DeviceProfile]) -> String {
    toml::to_string(&ProfileSet {
        device: profiles.to_vec(),
    })
    .expect("profiles serialize")
}

fn next_prime(n: usize) -> usize {
    (n.max(2)..)
        .find(|&k| (2..).take_while(|d| d * d <= k).all(|d| k % d != 0))
        .expect("primes are unbounded")
}

/// `n` mutually separable profiles. Each device's packet sizes and gaps are
/// placed on a 20-byte (resp. 5 ms) lattice, with independent permutations
/// of the device index per dimension; per-packet noise is a tenth of the
/// lattice step. All identity-bearing flows start within the first 5 s.
pub fn builtin_profiles(n: usize) -> Vec<DeviceProfile> {
    // A prime modulus above every multiplier keeps `i -> (i * m) mod p` a bijection.
    let p = next_prime(n.max(19));
    let lattice = |base: f64, k: usize| base + 20.0 * k as f64;
    (0..n)
        .map(|i| {
            let a = (i * 11) % p;
            let b = (i * 17) % p;
            let c = (i * 13) % p;
            let d = (i * 7) % p;
            // Device-specific packet-count ranges keep byte totals from being
            // near-multiples of the mean packet size.
            let count = |m: usize| {
                let lo = 3 + (i * m) % 7;
                [lo as u32, lo as u32 + 3]
            };
            let gap = Dist::new(0.02 + 0.005 * b as f64, 0.0005);
            let flow = |internal, transport, src_port, dst_port, fwd: f64, bwd: f64, entropy| FlowTemplate {
                internal,
                transport,
                src_port,
                dst_port,
                pkts_fwd: count(5),
                pkts_bwd: count(3),
                size_fwd: Dist::new(lattice(fwd, i), 2.0),
                size_bwd: Dist::new(lattice(bwd, a), 2.0),
                iat: gap,
                entropy,
            };
            let phase = |name: &str, at: f64, flow| Phase {
                name: name.into(),
                offset: Dist::new(at, 0.02),
                flow,
            };
            DeviceProfile {
                label: format!("device-{i:02}"),
                phases: vec![
                    phase("dhcp", 0.1, flow(true, Transport::Udp, Some(68), 67, 300.0, 320.0, EntropyLevel::Zero)),
                    phase("dns", 0.8, flow(true, Transport::Udp, None, 53, 70.0, 90.0, EntropyLevel::Text)),
                    phase("tls", 1.5, flow(false, Transport::Tcp, None, 443, 200.0, 400.0, EntropyLevel::Encrypted)),
                    phase("ntp", 2.6, flow(false, Transport::Udp, Some(123), 123, 90.0, 90.0, EntropyLevel::Zero)),
                ],
                noise: Some(Noise {
                    start: 20.0,
                    period: 15.0,
                    jitter: 1.0,
                    flow: FlowTemplate {
                        internal: false,
                        transport: Transport::Tcp,
                        src_port: None,
                        dst_port: 8883,
                        pkts_fwd: count(4),
                        pkts_bwd: count(6),
                        size_fwd: Dist::new(lattice(150.0, c), 2.0),
                        size_bwd: Dist::new(lattice(160.0, d), 2.0),
                        iat: Dist::new(0.3 + 0.005 * c as f64, 0.0005),
                        entropy: EntropyLevel::Encrypted,
                    },
                }),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_profiles_are_valid_and_distinct() {
        let ps = builtin_profiles(37);
        assert_eq!(ps.len(), 37);
        ps.iter().for_each(|p| p.validate().unwrap());
        let mut bwd: Vec<i64> = ps.iter().map(|p| p.phases[0].flow.size_bwd.mean as i64).collect();
        bwd.sort();
        bwd.dedup();
        assert_eq!(bwd.len(), 37);
    }

    #[test]
    fn toml_round_trip() {
        let ps = builtin_profiles(3);
        let text = render_profiles(&ps);
        assert_eq!(parse_profiles(&text).unwrap(), ps);
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        let mut text = render_profiles(&builtin_profiles(1));
        text = text.replacen("internal = ", "colour = 1\ninternal = ", 1);
        assert!(parse_profiles(&text).is_err());
        let mut p = builtin_profiles(1);
        p[0].phases[0].flow.pkts_fwd = [4, 3];
        assert!(p[0].validate().is_err());
        p[0] = builtin_profiles(1)[0].clone();
        p[0].label = "a/b".into();
        assert!(p[0].validate().is_err());
    }

    #[test]
    fn primes() {
        assert_eq!(next_prime(19), 19);
        assert_eq!(next_prime(20), 23);
        assert_eq!(next_prime(37), 37);
    }
}
