use std::fmt;
use std::net::IpAddr;

/// Coarse port categories; the discriminant is the categorical code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u16)]
pub enum PortBucket {
    WellKnownDns = 0,
    WellKnownHttp = 1,
    WellKnownHttps = 2,
    WellKnownNtp = 3,
    WellKnownDhcp = 4,
    WellKnownMdns = 5,
    WellKnownMqtt = 6,
    OtherSystem = 7,
    Registered = 8,
    Ephemeral = 9,
}

impl PortBucket {
    pub const ALL: [PortBucket; 10] = [
        PortBucket::WellKnownDns,
        PortBucket::WellKnownHttp,
        PortBucket::WellKnownHttps,
        PortBucket::WellKnownNtp,
        PortBucket::WellKnownDhcp,
        PortBucket::WellKnownMdns,
        PortBucket::WellKnownMqtt,
        PortBucket::OtherSystem,
        PortBucket::Registered,
        PortBucket::Ephemeral,
    ];

    pub fn code(self) -> u16 {
        self as u16
    }

    pub fn from_code(code: u16) -> Option<Self> {
        Self::ALL.get(usize::from(code)).copied()
    }
}

impl fmt::Display for PortBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PortBucket::WellKnownDns => "WELL_KNOWN_DNS",
            PortBucket::WellKnownHttp => "WELL_KNOWN_HTTP",
            PortBucket::WellKnownHttps => "WELL_KNOWN_HTTPS",
            PortBucket::WellKnownNtp => "WELL_KNOWN_NTP",
            PortBucket::WellKnownDhcp => "WELL_KNOWN_DHCP",
            PortBucket::WellKnownMdns => "WELL_KNOWN_MDNS",
            PortBucket::WellKnownMqtt => "WELL_KNOWN_MQTT",
            PortBucket::OtherSystem => "OTHER_SYSTEM",
            PortBucket::Registered => "REGISTERED",
            PortBucket::Ephemeral => "EPHEMERAL",
        })
    }
}

pub fn port_bucket(port: u16) -> PortBucket {
    match port {
        53 => PortBucket::WellKnownDns,
        80 => PortBucket::WellKnownHttp,
        443 => PortBucket::WellKnownHttps,
        123 => PortBucket::WellKnownNtp,
        67 | 68 => PortBucket::WellKnownDhcp,
        5353 => PortBucket::WellKnownMdns,
        1883 | 8883 => PortBucket::WellKnownMqtt,
        0..=1023 => PortBucket::OtherSystem,
        1024..=49151 => PortBucket::Registered,
        _ => PortBucket::Ephemeral,
    }
}

/// RFC 1918 membership. IPv6 addresses are never internal.
pub fn is_internal_dst(ip: IpAddr) -> bool {
    match ip {
        IpAddr::V4(v) => {
            let o = v.octets();
            o[0] == 10 || (o[0] == 172 && (16..=31).contains(&o[1])) || (o[0] == 192 && o[1] == 168)
        }
        IpAddr::V6(_) => false,
    }
}
