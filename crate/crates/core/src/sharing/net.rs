// SPDX-License-Identifier: Apache-2.0

//! Shareholder wire protocol over TCP.
//!
//! Ops: `PING`, `PUT`, `GET`, `NAMES`, `EPOCH`, `RESHARE_BEGIN`, `SUBSHARE`,
//! `COMMIT`, `ABORT`, `SHUTDOWN`, `STAT`. After `SHUTDOWN` the server stops.

use std::net::TcpListener;

use super::store::{Shareholder, SubShares};
use super::{Result, Share, SharingError};
use crate::encoding::{CanonicalValue, EncodingError};
use crate::net;

fn subshares_to_value(s: &SubShares) -> CanonicalValue {
    CanonicalValue::tuple(
        s.iter()
            .map(|(n, d)| CanonicalValue::tuple([CanonicalValue::str(n), CanonicalValue::bytes(d.clone())])),
    )
}

fn subshares_from_value(v: &CanonicalValue) -> Result<SubShares, EncodingError> {
    v.as_tuple()?
        .iter()
        .map(|p| {
            let p = p.as_tuple_of(2)?;
            Ok((p[0].as_str()?.to_owned(), p[1].as_bytes()?.to_vec()))
        })
        .collect()
}

fn small(v: &CanonicalValue) -> Result<u8, EncodingError> {
    u8::try_from(v.as_uint()?).map_err(|_| EncodingError::Shape("share index below 256"))
}

/// Executes one request against a local node. Returns the response and
/// whether the server should stop.
pub fn handle(node: &mut dyn Shareholder, req: &CanonicalValue) -> (CanonicalValue, bool) {
    let res = dispatch(node, req);
    let stop = matches!(res, Ok(_)) && net::parse_request(req).map(|(op, _)| op == "SHUTDOWN").unwrap_or(false);
    match res {
        Ok(v) => (net::ok(v), stop),
        Err(e) => (net::err(&e.to_string()), false),
    }
}

fn dispatch(node: &mut dyn Shareholder, req: &CanonicalValue) -> Result<CanonicalValue> {
    let (op, args) = net::parse_request(req)?;
    let arg = |i: usize| args.get(i).ok_or(SharingError::Encoding(EncodingError::Shape("request argument")));
    let unit = CanonicalValue::Tuple(vec![]);
    Ok(match op {
        "PING" => {
            node.ping()?;
            unit
        }
        "PUT" => {
            node.put(Share::from_value(arg(0)?)?, arg(1)?.as_uint()? != 0)?;
            unit
        }
        "GET" => CanonicalValue::tuple(node.get(arg(0)?.as_str()?)?.map(|s| s.to_value())),
        "NAMES" => CanonicalValue::tuple(node.names()?.iter().map(|n| CanonicalValue::str(n))),
        "EPOCH" => CanonicalValue::UInt(node.epoch()?),
        "RESHARE_BEGIN" => {
            let peers = arg(0)?.as_tuple()?.iter().map(small).collect::<Result<Vec<u8>, _>>()?;
            let t = arg(1)?.as_uint()? as usize;
            let out = node.reshare_begin(&peers, t)?;
            CanonicalValue::tuple(
                out.iter()
                    .map(|(p, s)| CanonicalValue::tuple([CanonicalValue::UInt(*p as u64), subshares_to_value(s)])),
            )
        }
        "SUBSHARE" => {
            node.subshare(small(arg(0)?)?, subshares_from_value(arg(1)?)?)?;
            unit
        }
        "COMMIT" => {
            node.commit(arg(0)?.as_uint()?)?;
            unit
        }
        "ABORT" => {
            node.abort()?;
            unit
        }
        "SHUTDOWN" => {
            node.shutdown()?;
            unit
        }
        "STAT" => CanonicalValue::UInt(node.stored_bytes()?),
        other => return Err(SharingError::Protocol(format!("unknown op {other}"))),
    })
}

/// Serves `node` until a `SHUTDOWN` request succeeds.
pub fn serve_shareholder(listener: TcpListener, node: &mut dyn Shareholder) -> std::io::Result<()> {
    net::serve(listener, |req| handle(node, req))
}

/// Client stub for a shareholder reachable at `addr` (`host:port`).
#[derive(Debug, Clone)]
pub struct RemoteShareholder {
    x: u8,
    addr: String,
}

impl RemoteShareholder {
    pub fn new(x: u8, addr: &str) -> Self {
        RemoteShareholder {
            x,
            addr: addr.trim_start_matches("tcp://").to_owned(),
        }
    }

    fn call(&self, op: &str, args: impl IntoIterator<Item = CanonicalValue>) -> Result<CanonicalValue> {
        match net::call(&self.addr, &net::request(op, args)) {
            Err(e) => {
                log::warn!("shareholder {} at {}: {e}", self.x, self.addr);
                Err(SharingError::Unreachable(self.x))
            }
            Ok(Err(msg)) if msg.contains("already stored") => Err(SharingError::AlreadyStored(msg)),
            Ok(Err(msg)) => Err(SharingError::Protocol(msg)),
            Ok(Ok(v)) => Ok(v),
        }
    }
}

impl Shareholder for RemoteShareholder {
    fn x(&self) -> u8 {
        self.x
    }

    fn ping(&mut self) -> Result<()> {
        self.call("PING", []).map(|_| ())
    }

    fn put(&mut self, share: Share, overwrite: bool) -> Result<()> {
        self.call("PUT", [share.to_value(), CanonicalValue::UInt(overwrite as u64)])
            .map(|_| ())
    }

    fn get(&mut self, name: &str) -> Result<Option<Share>> {
        let v = self.call("GET", [CanonicalValue::str(name)])?;
        match v.as_tuple()? {
            [] => Ok(None),
            [s] => Ok(Some(Share::from_value(s)?)),
            _ => Err(EncodingError::Shape("at most one share").into()),
        }
    }

    fn names(&mut self) -> Result<Vec<String>> {
        let v = self.call("NAMES", [])?;
        Ok(v.as_tuple()?
            .iter()
            .map(|n| n.as_str().map(str::to_owned))
            .collect::<Result<_, _>>()?)
    }

    fn epoch(&mut self) -> Result<u64> {
        Ok(self.call("EPOCH", [])?.as_uint()?)
    }

    fn reshare_begin(&mut self, peers: &[u8], t: usize) -> Result<Vec<(u8, SubShares)>> {
        let v = self.call(
            "RESHARE_BEGIN",
            [
                CanonicalValue::tuple(peers.iter().map(|&p| CanonicalValue::UInt(p as u64))),
                CanonicalValue::UInt(t as u64),
            ],
        )?;
        Ok(v.as_tuple()?
            .iter()
            .map(|e| {
                let e = e.as_tuple_of(2)?;
                Ok((small(&e[0])?, subshares_from_value(&e[1])?))
            })
            .collect::<Result<_, EncodingError>>()?)
    }

    fn subshare(&mut self, from: u8, deltas: SubShares) -> Result<()> {
        self.call("SUBSHARE", [CanonicalValue::UInt(from as u64), subshares_to_value(&deltas)])
            .map(|_| ())
    }

    fn commit(&mut self, new_epoch: u64) -> Result<()> {
        self.call("COMMIT", [CanonicalValue::UInt(new_epoch)]).map(|_| ())
    }

    fn abort(&mut self) -> Result<()> {
        self.call("ABORT", []).map(|_| ())
    }

    fn shutdown(&mut self) -> Result<()> {
        self.call("SHUTDOWN", []).map(|_| ())
    }

    fn stored_bytes(&mut self) -> Result<u64> {
        Ok(self.call("STAT", [])?.as_uint()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sharing::{LocalShareholder, ShareCluster, SharingPolicy};
    use std::thread;

    #[test]
    fn cluster_over_tcp() {
        let mut handles = Vec::new();
        let mut holders: Vec<Box<dyn Shareholder>> = Vec::new();
        for x in 1..=3u8 {
            let listener = TcpListener::bind("127.0.0.1:0").unwrap();
            let addr = listener.local_addr().unwrap().to_string();
            handles.push(thread::spawn(move || {
                let mut node = LocalShareholder::in_memory(x, x as u64);
                serve_shareholder(listener, &mut node).unwrap();
            }));
            holders.push(Box::new(RemoteShareholder::new(x, &format!("tcp://{addr}"))));
        }
        let policy = SharingPolicy {
            n: 3,
            t: 2,
            addresses: vec![],
        };
        let mut c = ShareCluster::new(policy, holders, 9).unwrap();
        c.store("data/a", &CanonicalValue::str("over the wire"), false).unwrap();
        assert!(matches!(
            c.store("data/a", &CanonicalValue::str("again"), false),
            Err(SharingError::AlreadyStored(_))
        ));
        assert_eq!(c.reshare().unwrap(), 1);
        assert_eq!(c.retrieve("data/a").unwrap(), CanonicalValue::str("over the wire"));
        assert!(c.stored_bytes().unwrap().iter().all(|&b| b > 0));

        let mut target = ShareCluster::in_memory(2, 2, 1).unwrap();
        c.migrate_to(&mut target).unwrap();
        for h in handles {
            h.join().unwrap();
        }
        assert!(matches!(c.retrieve("data/a"), Err(SharingError::Unavailable { .. })));
        assert_eq!(target.retrieve("data/a").unwrap(), CanonicalValue::str("over the wire"));
    }

    #[test]
    fn unknown_op_is_an_error_reply() {
        let mut node = LocalShareholder::in_memory(1, 0);
        let (resp, stop) = handle(&mut node, &net::request("FROB", []));
        assert!(!stop);
        assert!(net::parse_response(resp).is_err());
    }
}
