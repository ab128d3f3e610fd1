use super::{Flow, FlowError, FlowKey, PacketRecord, Session};
use std::collections::HashMap;

/// Groups one session's packets into bidirectional flows.
///
/// Packets are stably sorted by timestamp first, so equal timestamps keep
/// capture order. The initiator of each flow is the sender of its earliest
/// packet and flows come back ordered by `first_ts`.
pub fn assemble_flows(mut packets: Vec<PacketRecord>, session_id: &str) -> Vec<Flow> {
    packets.sort_by(|a, b| a.ts.total_cmp(&b.ts));

    let mut index: HashMap<FlowKey, usize> = HashMap::new();
    let mut flows: Vec<Flow> = Vec::new();
    for p in packets {
        let key = p.key();
        match index.get(&key) {
            Some(&i) => {
                flows[i].last_ts = p.ts;
                flows[i].packets.push(p);
            }
            None => {
                index.insert(key, flows.len());
                flows.push(Flow {
                    key,
                    initiator: p.src(),
                    session_id: session_id.to_string(),
                    first_ts: p.ts,
                    last_ts: p.ts,
                    packets: vec![p],
                });
            }
        }
    }
    // Creation order already follows first_ts because input is sorted.
    flows
}

/// Keeps only packets with `ts <= power_on_ts + window`.
pub fn truncate_session(session: &Session, window: f64) -> Result<Session, FlowError> {
    if !(window > 0.0) {
        return Err(FlowError::NonPositiveWindow(window));
    }
    let cutoff = session.power_on_ts + window;
    let flows = session
        .flows
        .iter()
        .filter_map(|f| {
            let packets: Vec<_> = f.packets.iter().filter(|p| p.ts <= cutoff).cloned().collect();
            if packets.is_empty() {
                return None;
            }
            let mut flow = Flow {
                packets,
                ..f.clone()
            };
            flow.refresh_bounds();
            Some(flow)
        })
        .collect();
    Ok(Session {
        flows,
        ..session.clone()
    })
}
